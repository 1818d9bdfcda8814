//! Dense linear algebra and singular-spectrum diagnostics.

pub mod decomp;
pub mod matrix;
pub mod spectrum;
pub mod svd;

pub use matrix::{dot, norm, Matrix};
pub use spectrum::{
    ausc, smoothing_loss, smoothing_loss_grad, smoothing_loss_with_grad, spectrum_report,
    SpectrumReport,
};
pub use svd::{singular_values, svd, SvdResult};
