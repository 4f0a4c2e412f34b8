//! Corrective terms, local volatility formulas and the bootstrapped
//! calibration loop.

mod bootstrap;
mod dupire;
mod integrals;
mod surface;

pub use bootstrap::{
    calibrate, Calibration, CalibrationReport, CalibrationSettings, FixedPoint, MaturityReport,
};
pub use dupire::{
    dupire_vol, dupire_vol_with_floor, local_variance, local_vol_stochastic_rates, LocalVariance,
    C_KK_FLOOR,
};
pub use integrals::{corrective_terms, price_calls_from_pz, tail_integral, CorrectiveTermCurve};
pub use surface::{CallSurface, Provider, Sensitivities};
