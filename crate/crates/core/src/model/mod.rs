//! Plant, nonlinearity and certificate data, plus their JSON documents.

mod certificate;
mod io;
mod nonlinearity;
pub mod reference;
mod system;

pub use certificate::Certificate;
pub(crate) use io::certificate_json;
pub use io::{load_certificate, load_system, parse_certificate, save_certificate, save_system};
pub use nonlinearity::{eval_psi, Nonlinearity, NonlinearityKind};
pub use system::{is_hurwitz, rho, rho_bound_holds, PdeOdeSystem, RHO_BOUND_SLACK};
