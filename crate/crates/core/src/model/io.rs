//! JSON documents for systems and certificates. Matrices are arrays of rows;
//! unknown fields are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;

use super::certificate::Certificate;
use super::nonlinearity::{Nonlinearity, NonlinearityKind};
use super::system::PdeOdeSystem;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PsiDoc {
    kind: NonlinearityKind,
    #[serde(default = "default_width")]
    width: f64,
}

fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    n_x: usize,
    n_chi: usize,
    n_z: usize,
    n_y: usize,
    lambda: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "Z")]
    z: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    psi: PsiDoc,
    ell: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateDoc {
    #[serde(rename = "P1")]
    p1: Vec<f64>,
    #[serde(rename = "P2")]
    p2: Vec<Vec<f64>>,
    #[serde(rename = "P3")]
    p3: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    l: Vec<Vec<f64>>,
    mu: f64,
    iota: f64,
}

fn matrix_field(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Matrix> {
    if rows.len() != nrows {
        return Err(Error::dim(field, format!("{nrows} rows"), rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::dim(field, format!("{ncols} columns"), r.len()));
    }
    if nrows == 0 {
        return Ok(Matrix::zeros(0, ncols));
    }
    Matrix::from_rows(rows)
}

fn ragged_matrix(field: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    matrix_field(field, rows, rows.len(), ncols)
}

pub fn load_system(text: &str) -> Result<PdeOdeSystem> {
    let doc: SystemDoc = serde_json::from_str(text)?;
    if doc.lambda.len() != doc.n_x {
        return Err(Error::dim("lambda", doc.n_x, doc.lambda.len()));
    }
    let a = matrix_field("A", &doc.a, doc.n_chi, doc.n_chi)?;
    // n_l = n_z for the componentwise nonlinearities
    let b = matrix_field("B", &doc.b, doc.n_chi, doc.n_z)?;
    let c = matrix_field("C", &doc.c, doc.n_x, doc.n_chi)?;
    let z = matrix_field("Z", &doc.z, doc.n_z, doc.n_chi)?;
    let m = matrix_field("M", &doc.m, doc.n_y, doc.n_x)?;
    let psi = Nonlinearity::new(doc.psi.kind, doc.psi.width)?;
    PdeOdeSystem::new(doc.lambda, a, b, c, z, m, psi, doc.ell)
}

pub fn save_system(sys: &PdeOdeSystem) -> String {
    let doc = SystemDoc {
        n_x: sys.n_x(),
        n_chi: sys.n_chi(),
        n_z: sys.n_z(),
        n_y: sys.n_y(),
        lambda: sys.lambda().to_vec(),
        a: sys.a().to_rows(),
        b: sys.b().to_rows(),
        c: sys.c().to_rows(),
        z: sys.z().to_rows(),
        m: sys.m().to_rows(),
        psi: PsiDoc {
            kind: sys.psi().kind,
            width: sys.psi().width,
        },
        ell: sys.ell(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("system serializes");
    s.push('\n');
    s
}

/// Parses a certificate and checks its structural invariants.
pub fn load_certificate(text: &str) -> Result<Certificate> {
    let cert = parse_certificate(text)?;
    cert.validate()?;
    Ok(cert)
}

/// Parses a certificate without checking `mu > 0`, `iota >= 0`, or `P1 > 0`.
pub fn parse_certificate(text: &str) -> Result<Certificate> {
    let doc: CertificateDoc = serde_json::from_str(text)?;
    let nx = doc.p1.len();
    let p3 = ragged_matrix("P3", &doc.p3)?;
    let nc = p3.rows();
    if p3.cols() != nc {
        return Err(Error::dim("P3", format!("{nc} columns"), p3.cols()));
    }
    let p2 = matrix_field("P2", &doc.p2, nc, nx)?;
    let l = ragged_matrix("L", &doc.l)?;
    if l.rows() != nc {
        return Err(Error::dim("L", format!("{nc} rows"), l.rows()));
    }
    Ok(Certificate {
        p1: doc.p1,
        p2,
        p3,
        l_gain: l,
        mu: doc.mu,
        iota: doc.iota,
    })
}

pub fn save_certificate(cert: &Certificate) -> String {
    let mut s = serde_json::to_string_pretty(&certificate_json(cert)).expect("certificate serializes");
    s.push('\n');
    s
}

pub(crate) fn certificate_json(cert: &Certificate) -> serde_json::Value {
    let doc = CertificateDoc {
        p1: cert.p1.clone(),
        p2: cert.p2.to_rows(),
        p3: cert.p3.to_rows(),
        l: cert.l_gain.to_rows(),
        mu: cert.mu,
        iota: cert.iota,
    };
    serde_json::to_value(doc).expect("certificate serializes")
}
