//! Hybrid equity / short-rate model:
//!
//! ```text
//! dS/S = r dt + σ(t,S) dW¹
//! dr   = μ(t,r) dt + α(t,r) (ρ dW¹ + √(1−ρ²) dW²)
//! ```
//!
//! with Hull-White rate dynamics μ = a(θ(t) − r), α = σ₂.

mod hull_white;
mod local_vol;

pub use hull_white::{
    fit_theta, forward_rate, forward_rate_slope, model_forward_curve, zc_price, ForwardCurve,
    HullWhiteParams, Theta,
};
pub use local_vol::{
    hyperbolic_vol, LocalVolFunction, LocalVolSurface, TimeInterpolation, VolDerivs,
};

use crate::error::{ensure, ensure_finite, Result};

#[derive(Clone, Debug)]
pub struct HybridModel {
    pub s0: f64,
    pub rate: HullWhiteParams,
    pub vol: LocalVolFunction,
    pub rho: f64,
}

impl HybridModel {
    pub fn new(s0: f64, rate: HullWhiteParams, vol: LocalVolFunction, rho: f64) -> Result<Self> {
        let m = Self { s0, rate, vol, rho };
        m.validate()?;
        Ok(m)
    }

    /// Black-Scholes equity with constant-θ Hull-White rates.
    pub fn bshw(s0: f64, r0: f64, sigma1: f64, sigma2: f64, rho: f64, a: f64, theta: f64) -> Result<Self> {
        Self::new(
            s0,
            HullWhiteParams::constant(a, sigma2, theta, r0)?,
            LocalVolFunction::Constant { sigma1 },
            rho,
        )
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("s0", self.s0)?;
        ensure(self.s0 > 0.0, || format!("spot must be > 0, got {}", self.s0))?;
        ensure(self.rho.is_finite() && self.rho.abs() <= 1.0, || {
            format!("correlation must lie in [-1, 1], got {}", self.rho)
        })?;
        self.rate.validate()?;
        self.vol.validate()
    }

    pub fn zc(&self, t: f64) -> Result<f64> {
        zc_price(&self.rate, t)
    }

    pub fn forward(&self, t: f64) -> Result<f64> {
        forward_rate(&self.rate, t)
    }

    /// The constant σ₁ when the equity leg is Black-Scholes.
    pub fn constant_vol(&self) -> Option<f64> {
        match self.vol {
            LocalVolFunction::Constant { sigma1 } => Some(sigma1),
            _ => None,
        }
    }

    pub fn with_vol(&self, vol: LocalVolFunction) -> Self {
        Self {
            vol,
            ..self.clone()
        }
    }
}

/// SDE coefficients at (t, S, r) and the spatial derivatives the forward
/// equation needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeCoefficients {
    /// r·S
    pub drift_s: f64,
    /// σ(t,S)·S
    pub vol_s: f64,
    /// μ(t,r)
    pub drift_r: f64,
    /// α(t,r)
    pub vol_r: f64,
    pub sigma: f64,
    pub sigma_s: f64,
    pub sigma_ss: f64,
    pub alpha_r: f64,
    pub alpha_rr: f64,
    pub mu_r: f64,
}

pub fn sde_coefficients(m: &HybridModel, t: f64, spot: f64, rate: f64) -> Result<SdeCoefficients> {
    ensure(spot.is_finite() && spot > 0.0, || format!("spot must be > 0, got {spot}"))?;
    ensure_finite("rate", rate)?;
    ensure_finite("t", t)?;
    let v = m.vol.derivs(t, spot);
    let theta = m.rate.theta_at(t)?;
    Ok(SdeCoefficients {
        drift_s: rate * spot,
        vol_s: v.sigma * spot,
        drift_r: m.rate.a * (theta - rate),
        vol_r: m.rate.sigma2,
        sigma: v.sigma,
        sigma_s: v.sigma_s,
        sigma_ss: v.sigma_ss,
        alpha_r: 0.0,
        alpha_rr: 0.0,
        mu_r: -m.rate.a,
    })
}
