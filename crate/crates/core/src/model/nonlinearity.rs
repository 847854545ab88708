use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    /// Zero on `[-w, w]`, unit slope outside.
    Deadzone,
    /// Clamp to `[-w, w]`.
    Saturation,
    Zero,
    ComponentwiseSine,
}

impl NonlinearityKind {
    pub const ALL: [NonlinearityKind; 4] = [
        NonlinearityKind::Deadzone,
        NonlinearityKind::Saturation,
        NonlinearityKind::Zero,
        NonlinearityKind::ComponentwiseSine,
    ];
}

/// A componentwise, globally Lipschitz map `R^n -> R^n` from a closed set,
/// so that its Lipschitz constant is known exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub width: f64,
}

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Invariant(format!(
                "nonlinearity width must be positive, got {width}"
            )));
        }
        Ok(Nonlinearity { kind, width })
    }

    pub fn deadzone(width: f64) -> Self {
        Nonlinearity::new(NonlinearityKind::Deadzone, width).expect("positive width")
    }

    pub fn saturation(width: f64) -> Self {
        Nonlinearity::new(NonlinearityKind::Saturation, width).expect("positive width")
    }

    pub fn zero() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            width: 1.0,
        }
    }

    pub fn sine() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::ComponentwiseSine,
            width: 1.0,
        }
    }

    /// Exact global Lipschitz constant of the kind.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            NonlinearityKind::Deadzone
            | NonlinearityKind::Saturation
            | NonlinearityKind::ComponentwiseSine => 1.0,
            NonlinearityKind::Zero => 0.0,
        }
    }

    pub fn eval_scalar(&self, v: f64) -> f64 {
        let w = self.width;
        match self.kind {
            NonlinearityKind::Deadzone => {
                if v.abs() <= w {
                    0.0
                } else {
                    v.signum() * (v.abs() - w)
                }
            }
            NonlinearityKind::Saturation => v.clamp(-w, w),
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::ComponentwiseSine => v.sin(),
        }
    }
}

pub fn eval_psi(psi: &Nonlinearity, v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| psi.eval_scalar(x)).collect()
}
