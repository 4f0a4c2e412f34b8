use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular covariance (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("kernel under-resolved: std {std:e} < 2 x max cell {cell:e}")]
    UnderResolvedKernel { std: f64, cell: f64 },

    #[error("PDE blow-up at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },

    #[error("butterfly degenerate at T = {maturity}, K = {strike}: C_KK = {c_kk:e}")]
    ButterflyDegenerate { maturity: f64, strike: f64, c_kk: f64 },

    #[error(
        "negative variance at T = {maturity}, K = {strike}: sigma2 = {sigma2:e} \
         (dupire = {dupire:e}, adj = {adj:e}, C_KK = {c_kk:e})"
    )]
    NegativeVariance {
        maturity: f64,
        strike: f64,
        sigma2: f64,
        dupire: f64,
        adj: f64,
        c_kk: f64,
    },

    #[error("calibration failed at {} node(s): {nodes:?}", nodes.len())]
    CalibrationFailure { nodes: Vec<(f64, f64)> },

    #[error("Monte Carlo aborted: {aborted} of {total} paths non-finite")]
    McAborted { aborted: u64, total: u64 },

    #[error("no kernel weight at center ({spot}, {rate})")]
    NoData { spot: f64, rate: f64 },
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    ensure(x.is_finite(), || format!("{name} must be finite, got {x}"))
}
