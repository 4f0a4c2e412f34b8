//! Local volatility functions σ(t, S).

use std::sync::Arc;

use crate::error::{ensure, ensure_finite, Result};

/// σ and its first two spot derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolDerivs {
    pub sigma: f64,
    pub sigma_s: f64,
    pub sigma_ss: f64,
}

/// How a [`LocalVolSurface`] is read between maturity nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeInterpolation {
    /// Linear in T between nodes, flat outside.
    #[default]
    Linear,
    /// Slice i applies on (T_{i-1}, T_i]; flat before the first and after the last.
    LeftContinuous,
}

/// Local volatility node values σ(T_i, K_j), row-major by maturity.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalVolSurface {
    maturities: Vec<f64>,
    strikes: Vec<f64>,
    sigma: Vec<f64>,
    time_rule: TimeInterpolation,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl LocalVolSurface {
    pub fn new(
        maturities: Vec<f64>,
        strikes: Vec<f64>,
        sigma: Vec<f64>,
        time_rule: TimeInterpolation,
    ) -> Result<Self> {
        ensure(!maturities.is_empty() && !strikes.is_empty(), || {
            "local vol surface needs at least one maturity and one strike".into()
        })?;
        ensure(strictly_increasing(&maturities), || "maturities must increase".into())?;
        ensure(strictly_increasing(&strikes), || "strikes must increase".into())?;
        ensure(sigma.len() == maturities.len() * strikes.len(), || {
            format!(
                "expected {} sigma values, got {}",
                maturities.len() * strikes.len(),
                sigma.len()
            )
        })?;
        for &s in &sigma {
            ensure(s.is_finite() && s >= 0.0, || format!("local vol node {s} must be finite and >= 0"))?;
        }
        Ok(Self {
            maturities,
            strikes,
            sigma,
            time_rule,
        })
    }

    pub fn flat(sigma: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![1.0], vec![sigma], TimeInterpolation::Linear)
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn time_rule(&self) -> TimeInterpolation {
        self.time_rule
    }

    pub fn with_time_rule(mut self, rule: TimeInterpolation) -> Self {
        self.time_rule = rule;
        self
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.strikes.len() + j]
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.strikes.len();
        &self.sigma[i * n..(i + 1) * n]
    }

    /// Appends a maturity slice (used by the bootstrap).
    pub fn push_slice(&mut self, maturity: f64, values: &[f64]) -> Result<()> {
        ensure(values.len() == self.strikes.len(), || "slice length mismatch".into())?;
        ensure(self.maturities.last().is_none_or(|&t| maturity > t), || {
            "maturities must increase".into()
        })?;
        self.maturities.push(maturity);
        self.sigma.extend_from_slice(values);
        Ok(())
    }

    /// Smallest gap between strike nodes, or +inf for a single strike.
    pub fn strike_spacing(&self) -> f64 {
        self.strikes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn interp_strike(&self, row: usize, k: f64) -> f64 {
        let ks = &self.strikes;
        let vals = self.slice(row);
        if k <= ks[0] {
            return vals[0];
        }
        let last = ks.len() - 1;
        if k >= ks[last] {
            return vals[last];
        }
        let j = ks.partition_point(|&x| x <= k) - 1;
        let w = (k - ks[j]) / (ks[j + 1] - ks[j]);
        vals[j] + w * (vals[j + 1] - vals[j])
    }

    /// σ(t, S): linear in strike with flat extrapolation, time rule per
    /// [`TimeInterpolation`].
    pub fn eval(&self, t: f64, spot: f64) -> f64 {
        let ts = &self.maturities;
        let last = ts.len() - 1;
        if t <= ts[0] {
            return self.interp_strike(0, spot);
        }
        if t >= ts[last] {
            return self.interp_strike(last, spot);
        }
        let i = ts.partition_point(|&x| x < t);
        match self.time_rule {
            TimeInterpolation::LeftContinuous => self.interp_strike(i, spot),
            TimeInterpolation::Linear => {
                let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                let lo = self.interp_strike(i - 1, spot);
                let hi = self.interp_strike(i, spot);
                lo + w * (hi - lo)
            }
        }
    }
}

/// Local volatility choices supported by the engine.
#[derive(Clone, Debug)]
pub enum LocalVolFunction {
    Constant { sigma1: f64 },
    Hyperbolic { nu: f64, beta: f64 },
    Surface(Arc<LocalVolSurface>),
}

impl LocalVolFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { sigma1 } => {
                ensure_finite("sigma1", sigma1)?;
                ensure(sigma1 >= 0.0, || format!("sigma1 must be >= 0, got {sigma1}"))
            }
            Self::Hyperbolic { nu, beta } => check_hyperbolic(nu, beta),
            Self::Surface(_) => Ok(()),
        }
    }

    pub fn sigma(&self, t: f64, spot: f64) -> f64 {
        match self {
            Self::Constant { sigma1 } => *sigma1,
            Self::Hyperbolic { nu, beta } => hyperbolic_parts(*nu, *beta, spot).sigma,
            Self::Surface(s) => s.eval(t, spot),
        }
    }

    /// σ, σ_S and σ_SS. Analytic for the closed forms; central differences on
    /// the interpolant for surfaces, step = strike spacing floored at 1e-4·S.
    pub fn derivs(&self, t: f64, spot: f64) -> VolDerivs {
        match self {
            Self::Constant { sigma1 } => VolDerivs {
                sigma: *sigma1,
                sigma_s: 0.0,
                sigma_ss: 0.0,
            },
            Self::Hyperbolic { nu, beta } => hyperbolic_parts(*nu, *beta, spot),
            Self::Surface(s) => {
                let mut h = s.strike_spacing().max(1e-4 * spot);
                if !h.is_finite() {
                    h = 1e-4 * spot;
                }
                // keep S - h positive
                h = h.min(0.5 * spot);
                let lo = s.eval(t, spot - h);
                let mid = s.eval(t, spot);
                let hi = s.eval(t, spot + h);
                VolDerivs {
                    sigma: mid,
                    sigma_s: (hi - lo) / (2.0 * h),
                    sigma_ss: (hi - 2.0 * mid + lo) / (h * h),
                }
            }
        }
    }
}

fn check_hyperbolic(nu: f64, beta: f64) -> Result<()> {
    ensure(nu.is_finite() && nu > 0.0, || format!("nu must be > 0, got {nu}"))?;
    ensure(beta.is_finite() && beta > 0.0 && beta <= 1.0, || {
        format!("beta must lie in (0, 1], got {beta}")
    })
}

/// Hyperbolic local volatility
/// σ_H(S) = ν{(1−β+β²)/β + (β−1)/(βS)·(√(S²+β²(1−S)²) − β)}.
pub fn hyperbolic_vol(nu: f64, beta: f64, spot: f64) -> Result<f64> {
    check_hyperbolic(nu, beta)?;
    ensure(spot.is_finite() && spot > 0.0, || format!("spot must be > 0, got {spot}"))?;
    Ok(hyperbolic_parts(nu, beta, spot).sigma)
}

/// The bracket is rewritten with (q − β)/S = (S(1+β²) − 2β²)/(q + β),
/// q = √(S²+β²(1−S)²), which has no cancellation as S → 0.
fn hyperbolic_parts(nu: f64, beta: f64, s: f64) -> VolDerivs {
    let b2 = beta * beta;
    let c0 = (1.0 - beta + b2) / beta;
    let c1 = (beta - 1.0) / beta;
    let q = (s * s + b2 * (1.0 - s) * (1.0 - s)).sqrt();
    let q1 = (s * (1.0 + b2) - b2) / q;
    let q2 = ((1.0 + b2) * q * q - (s * (1.0 + b2) - b2).powi(2)) / (q * q * q);
    let n = s * (1.0 + b2) - 2.0 * b2;
    let d = q + beta;
    let g = n / d;
    let g1 = ((1.0 + b2) * d - n * q1) / (d * d);
    let g2 = -n * q2 / (d * d) - 2.0 * q1 * g1 / d;
    VolDerivs {
        sigma: nu * (c0 + c1 * g),
        sigma_s: nu * c1 * g1,
        sigma_ss: nu * c1 * g2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal transcription of the formula, used as an independent check.
    fn literal(nu: f64, beta: f64, s: f64) -> f64 {
        nu * ((1.0 - beta + beta * beta) / beta
            + (beta - 1.0) / (beta * s)
                * ((s * s + beta * beta * (1.0 - s) * (1.0 - s)).sqrt() - beta))
    }

    #[test]
    fn hyperbolic_reduces_to_nu() {
        for s in [0.01, 0.5, 1.0, 3.0] {
            assert!((hyperbolic_vol(0.2, 1.0, s).unwrap() - 0.2).abs() < 1e-15);
        }
        for beta in [0.1, 0.3, 0.5, 0.9] {
            assert!((hyperbolic_vol(0.25, beta, 1.0).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn hyperbolic_matches_literal_formula_and_skews_down() {
        for &s in &[0.05, 0.5, 0.9, 1.3, 4.0] {
            let a = hyperbolic_vol(0.2, 0.5, s).unwrap();
            assert!((a - literal(0.2, 0.5, s)).abs() < 1e-13);
        }
        let low = hyperbolic_vol(0.2, 0.5, 0.5).unwrap();
        let atm = hyperbolic_vol(0.2, 0.5, 1.0).unwrap();
        assert!(low > atm, "{low} <= {atm}");
        // limit S -> 0 is ν/β
        assert!((hyperbolic_vol(0.2, 0.5, 1e-12).unwrap() - 0.4).abs() < 1e-10);
    }

    #[test]
    fn hyperbolic_rejects_bad_inputs() {
        assert!(hyperbolic_vol(0.2, 0.0, 1.0).is_err());
        assert!(hyperbolic_vol(0.2, 1.2, 1.0).is_err());
        assert!(hyperbolic_vol(0.0, 0.5, 1.0).is_err());
        assert!(hyperbolic_vol(0.2, 0.5, 0.0).is_err());
        assert!(hyperbolic_vol(0.2, 0.5, -1.0).is_err());
    }

    #[test]
    fn hyperbolic_derivatives_match_finite_differences() {
        let f = LocalVolFunction::Hyperbolic { nu: 0.2, beta: 0.5 };
        for &s in &[0.5, 1.0, 1.5] {
            let d = f.derivs(0.0, s);
            let h = 1e-5 * s;
            let fd1 = (literal(0.2, 0.5, s + h) - literal(0.2, 0.5, s - h)) / (2.0 * h);
            assert!(((d.sigma_s - fd1) / fd1).abs() < 1e-6, "S={s}: {} vs {fd1}", d.sigma_s);
            let h2 = 1e-3 * s;
            let fd2 = (literal(0.2, 0.5, s + h2) - 2.0 * literal(0.2, 0.5, s)
                + literal(0.2, 0.5, s - h2))
                / (h2 * h2);
            assert!(((d.sigma_ss - fd2) / fd2).abs() < 1e-4, "S={s}: {} vs {fd2}", d.sigma_ss);
        }
        let flat = LocalVolFunction::Hyperbolic { nu: 0.2, beta: 1.0 };
        let d = flat.derivs(0.0, 0.7);
        assert_eq!((d.sigma_s, d.sigma_ss), (0.0, 0.0));
    }

    #[test]
    fn surface_interpolation_rules() {
        let s = LocalVolSurface::new(
            vec![0.5, 1.0],
            vec![0.8, 1.0, 1.2],
            vec![0.3, 0.2, 0.25, 0.4, 0.3, 0.35],
            TimeInterpolation::Linear,
        )
        .unwrap();
        assert!((s.eval(0.5, 0.9) - 0.25).abs() < 1e-15);
        assert!((s.eval(0.75, 1.0) - 0.25).abs() < 1e-15);
        assert_eq!(s.eval(0.1, 0.5), 0.3);
        assert_eq!(s.eval(2.0, 2.0), 0.35);
        let lc = s.clone().with_time_rule(TimeInterpolation::LeftContinuous);
        assert_eq!(lc.eval(0.75, 1.0), 0.3);
        assert_eq!(lc.eval(0.5, 1.0), 0.2);
        assert_eq!(lc.eval(0.2, 1.0), 0.2);

        let f = LocalVolFunction::Surface(Arc::new(s));
        // step is the strike spacing 0.2: σ(0.7) = 0.3 (flat), σ(1.1) = 0.225
        let d = f.derivs(0.5, 0.9);
        assert!((d.sigma_s - (0.225 - 0.3) / 0.4).abs() < 1e-12);
        assert!((d.sigma_ss - (0.225 - 0.5 + 0.3) / 0.04).abs() < 1e-12);
    }

    #[test]
    fn surface_rejects_negative_nodes() {
        assert!(LocalVolSurface::new(vec![1.0], vec![1.0, 2.0], vec![0.2, -0.1], TimeInterpolation::Linear).is_err());
    }
}
