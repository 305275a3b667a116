//! FIR multipliers, the frequency-domain inequality and its LP search,
//! finite-horizon negativity checks, LTV-to-LTI averaging, and the nonlinear
//! multiplier evaluator.

mod fdi;
mod fir;
mod negativity;
mod nonlinear;

pub use fdi::{search_fir, verify_fdi, FdiReport, SearchReport};
pub use fir::{ClassMode, FirMultiplier, FrequencyGrid, DEFAULT_MARGIN};
pub use negativity::{
    average_to_lti, negativity_form, quadratic_negativity, quadratic_negativity_on, NegativityReport,
    NEGATIVITY_TOL,
};
pub use nonlinear::{nonlinear_certificate, CertificateForm, NonlinearReport, ProbeConfig};
