//! Hull-White short rate: dr = a(θ(t) - r)dt + σ₂ dW.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure, ensure_finite, Error, Result};
use crate::quad::gauss_legendre;

type CurveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Instantaneous forward curve `t -> f(0, t)` with an optional derivative.
#[derive(Clone)]
pub struct ForwardCurve {
    value: CurveFn,
    slope: Option<CurveFn>,
}

impl ForwardCurve {
    pub fn new<F, D>(value: F, slope: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            slope: Some(Arc::new(slope)),
        }
    }

    /// A curve known only pointwise. [`fit_theta`] rejects it.
    pub fn without_slope<F>(value: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            slope: None,
        }
    }

    pub fn flat(rate: f64) -> Self {
        Self::new(move |_| rate, |_| 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn slope(&self, t: f64) -> Option<f64> {
        self.slope.as_ref().map(|d| d(t))
    }

    /// `exp(-∫₀ᵀ f(0,u) du)`.
    pub fn discount(&self, maturity: f64) -> f64 {
        let panels = (maturity.abs() * 8.0).ceil().max(4.0) as usize;
        (-gauss_legendre(|u| self.value(u), 0.0, maturity, panels)).exp()
    }
}

impl fmt::Debug for ForwardCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardCurve")
            .field("f(0)", &self.value(0.0))
            .field("has_slope", &self.slope.is_some())
            .finish()
    }
}

/// Long-term mean level: either a constant or fitted to a forward curve.
#[derive(Clone, Debug)]
pub enum Theta {
    Constant(f64),
    Fitted(ForwardCurve),
}

#[derive(Clone, Debug)]
pub struct HullWhiteParams {
    pub a: f64,
    pub sigma2: f64,
    pub theta: Theta,
    pub r0: f64,
}

impl HullWhiteParams {
    pub fn constant(a: f64, sigma2: f64, theta: f64, r0: f64) -> Result<Self> {
        let p = Self {
            a,
            sigma2,
            theta: Theta::Constant(theta),
            r0,
        };
        p.validate()?;
        Ok(p)
    }

    /// θ(t) fitted so the model reproduces `curve`; r0 is taken as f(0,0).
    pub fn fitted(a: f64, sigma2: f64, curve: ForwardCurve) -> Result<Self> {
        let p = Self {
            a,
            sigma2,
            r0: curve.value(0.0),
            theta: Theta::Fitted(curve),
        };
        p.validate()?;
        let th0 = p.theta_at(0.0)?;
        ensure(th0.is_finite(), || format!("fitted theta(0) = {th0} is not finite"))?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("a", self.a)?;
        ensure_finite("sigma2", self.sigma2)?;
        ensure_finite("r0", self.r0)?;
        ensure(self.a > 0.0, || format!("mean reversion a must be > 0, got {}", self.a))?;
        ensure(self.sigma2 >= 0.0, || {
            format!("rate volatility must be >= 0, got {}", self.sigma2)
        })?;
        if let Theta::Constant(th) = self.theta {
            ensure_finite("theta", th)?;
        }
        Ok(())
    }

    pub fn theta_at(&self, t: f64) -> Result<f64> {
        match &self.theta {
            Theta::Constant(th) => Ok(*th),
            Theta::Fitted(curve) => fit_theta(curve, self.a, self.sigma2, t),
        }
    }

    /// Drift μ(t, r) = a(θ(t) − r).
    pub fn drift(&self, t: f64, r: f64) -> f64 {
        let th = self.theta_at(t).unwrap_or(f64::NAN);
        self.a * (th - r)
    }

    pub fn constant_theta(&self) -> Option<f64> {
        match self.theta {
            Theta::Constant(th) => Some(th),
            Theta::Fitted(_) => None,
        }
    }

    /// B(0,T) = (1 − e^{−aT})/a.
    pub fn b(&self, t: f64) -> f64 {
        -(-self.a * t).exp_m1() / self.a
    }

    /// Mean of r(T) under the risk-neutral measure.
    pub fn mean_rate(&self, t: f64) -> f64 {
        match self.theta {
            Theta::Constant(th) => {
                let e = (-self.a * t).exp();
                self.r0 * e + th * (1.0 - e)
            }
            Theta::Fitted(ref curve) => {
                // E[r(t)] = f(0,t) + (σ₂²/2a²)(1 − e^{−at})²
                let b = self.b(t);
                curve.value(t) + 0.5 * self.sigma2 * self.sigma2 * b * b
            }
        }
    }

    pub fn rate_variance(&self, t: f64) -> f64 {
        let s2 = self.sigma2 * self.sigma2;
        -s2 * (-2.0 * self.a * t).exp_m1() / (2.0 * self.a)
    }
}

/// ZC(0,T). Closed form for constant θ, forward-curve quadrature otherwise.
pub fn zc_price(p: &HullWhiteParams, maturity: f64) -> Result<f64> {
    p.validate()?;
    ensure_finite("maturity", maturity)?;
    ensure(maturity >= 0.0, || format!("maturity must be >= 0, got {maturity}"))?;
    if maturity == 0.0 {
        return Ok(1.0);
    }
    match &p.theta {
        Theta::Constant(th) => {
            let a = p.a;
            let s2 = p.sigma2 * p.sigma2;
            let b = p.b(maturity);
            let log_a = (th - s2 / (2.0 * a * a)) * (b - maturity) - s2 / (4.0 * a) * b * b;
            Ok((log_a - b * p.r0).exp())
        }
        Theta::Fitted(curve) => Ok(curve.discount(maturity)),
    }
}

/// Instantaneous forward rate f(0,T).
pub fn forward_rate(p: &HullWhiteParams, maturity: f64) -> Result<f64> {
    p.validate()?;
    ensure_finite("maturity", maturity)?;
    ensure(maturity >= 0.0, || format!("maturity must be >= 0, got {maturity}"))?;
    match &p.theta {
        Theta::Constant(th) => {
            let a = p.a;
            let c = p.sigma2 * p.sigma2 / (2.0 * a * a);
            let e = (-a * maturity).exp();
            Ok(-c + th - (th - 2.0 * c - p.r0) * e - c * e * e)
        }
        Theta::Fitted(curve) => Ok(curve.value(maturity)),
    }
}

/// ∂f(0,T)/∂T for the constant-θ closed form.
pub fn forward_rate_slope(p: &HullWhiteParams, maturity: f64) -> Result<f64> {
    match &p.theta {
        Theta::Constant(th) => {
            let a = p.a;
            let c = p.sigma2 * p.sigma2 / (2.0 * a * a);
            let e = (-a * maturity).exp();
            Ok(a * (th - 2.0 * c - p.r0) * e + 2.0 * a * c * e * e)
        }
        Theta::Fitted(curve) => curve
            .slope(maturity)
            .ok_or_else(|| Error::InvalidInput("forward curve has no slope".into())),
    }
}

/// θ(t) = f'(0,t)/a + f(0,t) + ½(σ₂/a)²(1 − e^{−2at}).
pub fn fit_theta(curve: &ForwardCurve, a: f64, sigma2: f64, t: f64) -> Result<f64> {
    ensure(a > 0.0, || format!("mean reversion a must be > 0, got {a}"))?;
    let slope = curve.slope(t).ok_or_else(|| {
        Error::InvalidInput("forward curve is not differentiable (no slope supplied)".into())
    })?;
    let f = curve.value(t);
    ensure(slope.is_finite() && f.is_finite(), || {
        format!("forward curve not differentiable at t = {t}")
    })?;
    let k = sigma2 / a;
    Ok(slope / a + f + 0.5 * k * k * (1.0 - (-2.0 * a * t).exp()))
}

/// The forward curve implied by a constant-θ model.
pub fn model_forward_curve(p: &HullWhiteParams) -> Result<ForwardCurve> {
    p.validate()?;
    let q = p.clone();
    let q2 = p.clone();
    Ok(ForwardCurve::new(
        move |t| forward_rate(&q, t).unwrap_or(f64::NAN),
        move |t| forward_rate_slope(&q2, t).unwrap_or(f64::NAN),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1() -> HullWhiteParams {
        HullWhiteParams::constant(0.5, 0.04, 0.02, 0.02).unwrap()
    }

    #[test]
    fn zc_trivial_cases() {
        assert_eq!(zc_price(&set1(), 0.0).unwrap(), 1.0);
        let det = HullWhiteParams::constant(0.7, 0.0, 0.02, 0.02).unwrap();
        assert!((zc_price(&det, 1.0).unwrap() - (-0.02f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn forward_trivial_cases() {
        let p = set1();
        assert!((forward_rate(&p, 0.0).unwrap() - 0.02).abs() < 1e-16);
        let det = HullWhiteParams::constant(0.7, 0.0, 0.02, 0.02).unwrap();
        for t in [0.0, 0.3, 1.0, 7.0] {
            assert!((forward_rate(&det, t).unwrap() - 0.02).abs() < 1e-16);
        }
    }

    #[test]
    fn forward_matches_log_zc_difference() {
        let p = set1();
        let h = 1e-5;
        let fd = -((zc_price(&p, 1.0 + h).unwrap()).ln() - (zc_price(&p, 1.0 - h).unwrap()).ln())
            / (2.0 * h);
        let f = forward_rate(&p, 1.0).unwrap();
        assert!(((fd - f) / f).abs() < 1e-6, "{fd} vs {f}");
    }

    #[test]
    fn fit_theta_flat_curve() {
        let c = ForwardCurve::flat(0.03);
        assert_eq!(fit_theta(&c, 0.4, 0.0, 2.0).unwrap(), 0.03);
        let c = ForwardCurve::flat(0.02);
        let th = fit_theta(&c, 0.5, 0.04, 1.0).unwrap();
        // 0.02 + 0.5 * (0.04/0.5)^2 * (1 - e^{-1})
        let want = 0.02 + 0.0032 * (1.0 - (-1f64).exp());
        assert!((th - want).abs() < 1e-15);
        assert!((th - 0.022_022_8).abs() < 1e-7);
    }

    #[test]
    fn fit_theta_rejects_curve_without_slope() {
        let c = ForwardCurve::without_slope(|_| 0.02);
        assert!(matches!(fit_theta(&c, 0.5, 0.01, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fitted_theta_reproduces_constant_model() {
        let p = set1();
        let curve = model_forward_curve(&p).unwrap();
        for t in [0.0, 0.5, 1.0, 3.0] {
            assert!((fit_theta(&curve, p.a, p.sigma2, t).unwrap() - 0.02).abs() < 1e-14);
        }
        let fitted = HullWhiteParams::fitted(p.a, p.sigma2, curve).unwrap();
        for t in [0.25, 1.0, 2.0, 5.0] {
            let z0 = zc_price(&p, t).unwrap();
            let z1 = zc_price(&fitted, t).unwrap();
            assert!((z0 - z1).abs() < 1e-8, "T={t}: {z0} vs {z1}");
            assert!((p.mean_rate(t) - fitted.mean_rate(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HullWhiteParams::constant(0.0, 0.01, 0.02, 0.02).is_err());
        assert!(HullWhiteParams::constant(0.5, -0.01, 0.02, 0.02).is_err());
        assert!(HullWhiteParams::constant(0.5, 0.01, f64::NAN, 0.02).is_err());
        assert!(zc_price(&set1(), -1.0).is_err());
        assert!(zc_price(&set1(), f64::INFINITY).is_err());
    }
}
