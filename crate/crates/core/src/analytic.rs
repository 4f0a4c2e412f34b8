//! Closed forms for the Black-Scholes equity / Hull-White rate model: call
//! prices and their T, K, KK sensitivities, the Gaussian law of
//! `(log S(T), r(T), ∫₀ᵀ r)`, the conditional discount projection `Z` and
//! the reference `P·Z` field.

use crate::error::{ensure, Error, Result};
use crate::models::HybridModel;
use crate::normal::{cdf, pdf};

fn require_constant_vol(m: &HybridModel) -> Result<f64> {
    m.constant_vol().ok_or_else(|| {
        Error::InvalidInput("closed forms need a constant (Black-Scholes) local volatility".into())
    })
}

/// σ̂²(t) = σ₁² + 2ρσ₁σ₂B(0,t) + σ₂²B(0,t)².
pub fn effective_variance_rate(m: &HybridModel, t: f64) -> Result<f64> {
    let s1 = require_constant_vol(m)?;
    let s2 = m.rate.sigma2;
    let b = m.rate.b(t);
    Ok(s1 * s1 + 2.0 * m.rho * s1 * s2 * b + s2 * s2 * b * b)
}

/// g(T) = ∫₀ᵀ σ̂²(t) dt.
pub fn integrated_variance(m: &HybridModel, maturity: f64) -> Result<f64> {
    let s1 = require_constant_vol(m)?;
    ensure(maturity >= 0.0, || format!("maturity must be >= 0, got {maturity}"))?;
    let a = m.rate.a;
    let s2 = m.rate.sigma2;
    let t = maturity;
    let e1 = (-a * t).exp();
    let e2 = (-2.0 * a * t).exp();
    let equity = s1 * s1 * t;
    let cross = 2.0 * m.rho * s1 * s2 / a * (t + (e1 - 1.0) / a);
    let rates = (s2 / a).powi(2) * (t - (3.0 - 4.0 * e1 + e2) / (2.0 * a));
    Ok((equity + cross + rates).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceAndGreeks {
    pub price: f64,
    pub c_t: f64,
    pub c_k: f64,
    pub c_kk: f64,
    pub d1: f64,
    pub d2: f64,
    pub g_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CallValue {
    Regular(PriceAndGreeks),
    /// Zero horizon or zero total variance: the forward intrinsic value,
    /// with no well-defined sensitivities.
    Intrinsic { price: f64 },
}

impl CallValue {
    pub fn price(&self) -> f64 {
        match self {
            Self::Regular(g) => g.price,
            Self::Intrinsic { price } => *price,
        }
    }

    pub fn greeks(&self) -> Option<&PriceAndGreeks> {
        match self {
            Self::Regular(g) => Some(g),
            Self::Intrinsic { .. } => None,
        }
    }
}

/// European call under Black-Scholes / Hull-White,
/// `C = S₀N(d₁) − K·ZC(0,T)·N(d₂)`.
///
/// `C_K = −ZC(0,T)·N(d₂)`: the sensitivity follows from `d₁,K = d₂,K` and
/// `S₀n(d₁) = K·ZC·n(d₂)`; there is no forward-rate factor.
pub fn bshw_call(m: &HybridModel, maturity: f64, strike: f64) -> Result<CallValue> {
    ensure(strike.is_finite() && strike > 0.0, || format!("strike must be > 0, got {strike}"))?;
    ensure(maturity.is_finite() && maturity >= 0.0, || {
        format!("maturity must be >= 0, got {maturity}")
    })?;
    let zc = m.zc(maturity)?;
    let g = integrated_variance(m, maturity)?;
    if maturity == 0.0 || g <= 0.0 {
        return Ok(CallValue::Intrinsic {
            price: (m.s0 - strike * zc).max(0.0),
        });
    }
    let sg = g.sqrt();
    let d1 = ((m.s0 / strike).ln() - zc.ln() + 0.5 * g) / sg;
    let d2 = d1 - sg;
    let f = m.forward(maturity)?;
    let var_rate = effective_variance_rate(m, maturity)?;
    // price via put-call parity on the in-the-money side keeps the
    // small time value from cancelling against the intrinsic part
    let price = if d2 > 0.0 {
        let put = strike * zc * cdf(-d2) - m.s0 * cdf(-d1);
        m.s0 - strike * zc + put
    } else {
        m.s0 * cdf(d1) - strike * zc * cdf(d2)
    };
    let nd2 = pdf(d2);
    Ok(CallValue::Regular(PriceAndGreeks {
        price,
        c_t: 0.5 * m.s0 * pdf(d1) * var_rate / sg + strike * zc * f * cdf(d2),
        c_k: -zc * cdf(d2),
        c_kk: zc * nd2 / (strike * sg),
        d1,
        d2,
        g_t: g,
    }))
}

/// Mean and covariance of `(Y, r, R) = (log S(T), r(T), ∫₀ᵀ r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BshwMoments {
    pub mu_y: f64,
    pub mu_r: f64,
    pub mu_big_r: f64,
    pub var_y: f64,
    pub var_r: f64,
    pub var_big_r: f64,
    /// Covariance matrix of (Y, r).
    pub cov_yr: [[f64; 2]; 2],
    /// Covariances of Y and r with R.
    pub cov_yr_big_r: [f64; 2],
}

/// Gaussian moments of the state at horizon T.
///
/// Since `Y = log S₀ + R − ½σ₁²T + σ₁W¹(T)`, every covariance involving Y
/// carries the matching R contribution: `Cov(Y,r) = Cov(R,r) + ρσ₁σ₂B` and
/// `Cov(Y,R) = Var(R) + ρσ₁σ₂(T − B)/a`.
pub fn bshw_moments(m: &HybridModel, maturity: f64) -> Result<BshwMoments> {
    let s1 = require_constant_vol(m)?;
    ensure(maturity >= 0.0, || format!("maturity must be >= 0, got {maturity}"))?;
    let t = maturity;
    let a = m.rate.a;
    let s2 = m.rate.sigma2;
    let rho = m.rho;
    let b = m.rate.b(t);
    let k2 = (s2 / a).powi(2);
    let e1 = (-a * t).exp();
    let e2 = (-2.0 * a * t).exp();

    let var_r = m.rate.rate_variance(t);
    let var_big_r = k2 * (t + (1.0 - e2) / (2.0 * a) - 2.0 * b);
    let cov_r_big_r = k2 * (0.5 - e1 + 0.5 * e2);
    let cov_w_big_r = rho * s2 / a * (t - b);
    let mu_r = m.rate.mean_rate(t);
    let mu_big_r = match m.rate.constant_theta() {
        Some(th) => m.rate.r0 * b + th * t - th * b,
        // E[e^{-R}] = ZC(0,T)
        None => -m.zc(t)?.ln() + 0.5 * var_big_r,
    };
    let mu_y = m.s0.ln() + mu_big_r - 0.5 * s1 * s1 * t;
    let var_y = var_big_r + s1 * s1 * t + 2.0 * s1 * cov_w_big_r;
    let cov_y_r = cov_r_big_r + rho * s1 * s2 * b;
    let cov_y_big_r = var_big_r + s1 * cov_w_big_r;
    Ok(BshwMoments {
        mu_y,
        mu_r,
        mu_big_r,
        var_y: var_y.max(0.0),
        var_r,
        var_big_r: var_big_r.max(0.0),
        cov_yr: [[var_y.max(0.0), cov_y_r], [cov_y_r, var_r]],
        cov_yr_big_r: [cov_y_big_r, cov_r_big_r],
    })
}

impl BshwMoments {
    pub fn det_yr(&self) -> f64 {
        self.cov_yr[0][0] * self.cov_yr[1][1] - self.cov_yr[0][1] * self.cov_yr[1][0]
    }

    fn inverse_yr(&self) -> Result<[[f64; 2]; 2]> {
        let det = self.det_yr();
        if !(det > 1e-300) {
            return Err(Error::SingularCovariance { det });
        }
        let c = &self.cov_yr;
        Ok([
            [c[1][1] / det, -c[0][1] / det],
            [-c[1][0] / det, c[0][0] / det],
        ])
    }

    /// `E[e^{−R} | Y = y, r]`: R given (Y, r) is Gaussian with mean
    /// `μ_R + β·(x − μ)` and variance `Σ_R − β·Σ_{yr,R}`, `β = Σ_{yr,R}ᵀΣ_{yr}⁻¹`.
    pub fn conditional_discount(&self, y: f64, r: f64) -> Result<f64> {
        if self.var_big_r == 0.0 && self.var_y > 0.0 {
            // deterministic rates: nothing to condition on
            return Ok((-self.mu_big_r).exp());
        }
        let inv = self.inverse_yr()?;
        let c = &self.cov_yr_big_r;
        let beta = [
            c[0] * inv[0][0] + c[1] * inv[1][0],
            c[0] * inv[0][1] + c[1] * inv[1][1],
        ];
        let dy = y - self.mu_y;
        let dr = r - self.mu_r;
        let cond_var = self.var_big_r - (beta[0] * c[0] + beta[1] * c[1]);
        Ok((-self.mu_big_r - beta[0] * dy - beta[1] * dr + 0.5 * cond_var).exp())
    }

    /// Limit of a Nadaraya-Watson regression of e^{−R} on (Y, r) with the
    /// kernel exp(−|x − c|²/(2h²)) centred at c = (y, r): the mean of
    /// `Z(X)` with X drawn from the Gaussian (Y, r) law tilted by the kernel.
    /// Equals the conditional discount as h → 0.
    pub fn kernel_smoothed_discount(&self, y: f64, r: f64, bandwidth: f64) -> Result<f64> {
        ensure(bandwidth > 0.0, || format!("bandwidth must be > 0, got {bandwidth}"))?;
        if self.var_big_r == 0.0 && self.var_y > 0.0 {
            return Ok((-self.mu_big_r).exp());
        }
        let inv = self.inverse_yr()?;
        let c = &self.cov_yr_big_r;
        let beta = [
            c[0] * inv[0][0] + c[1] * inv[1][0],
            c[0] * inv[0][1] + c[1] * inv[1][1],
        ];
        let cond_var = self.var_big_r - (beta[0] * c[0] + beta[1] * c[1]);
        let k = 1.0 / (bandwidth * bandwidth);
        // tilted precision and covariance
        let p = [[inv[0][0] + k, inv[0][1]], [inv[1][0], inv[1][1] + k]];
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        let cov = [[p[1][1] / det, -p[0][1] / det], [-p[1][0] / det, p[0][0] / det]];
        let mu = [self.mu_y, self.mu_r];
        let rhs = [
            inv[0][0] * mu[0] + inv[0][1] * mu[1] + k * y,
            inv[1][0] * mu[0] + inv[1][1] * mu[1] + k * r,
        ];
        let mean = [
            cov[0][0] * rhs[0] + cov[0][1] * rhs[1],
            cov[1][0] * rhs[0] + cov[1][1] * rhs[1],
        ];
        let shift = beta[0] * (mean[0] - mu[0]) + beta[1] * (mean[1] - mu[1]);
        let spread = beta[0] * (cov[0][0] * beta[0] + cov[0][1] * beta[1])
            + beta[1] * (cov[1][0] * beta[0] + cov[1][1] * beta[1]);
        Ok((-self.mu_big_r - shift + 0.5 * cond_var + 0.5 * spread).exp())
    }

    /// Bivariate normal density of (Y, r) at (y, r).
    pub fn density_yr(&self, y: f64, r: f64) -> Result<f64> {
        let inv = self.inverse_yr()?;
        let dy = y - self.mu_y;
        let dr = r - self.mu_r;
        let q = dy * dy * inv[0][0] + 2.0 * dy * dr * inv[0][1] + dr * dr * inv[1][1];
        Ok((-0.5 * q).exp() / (2.0 * std::f64::consts::PI * self.det_yr().sqrt()))
    }
}

/// Z(T, S, r) = E[e^{−∫₀ᵀ r} | S(T) = S, r(T) = r].
pub fn analytic_z(m: &HybridModel, maturity: f64, spot: f64, rate: f64) -> Result<f64> {
    ensure(maturity > 0.0, || format!("maturity must be > 0, got {maturity}"))?;
    ensure(spot > 0.0, || format!("spot must be > 0, got {spot}"))?;
    bshw_moments(m, maturity)?.conditional_discount(spot.ln(), rate)
}

/// P(T,S,r)·Z(T,S,r), with P the joint density of (S, r): the (Y, r)
/// Gaussian density at (log S, r) divided by S.
pub fn analytic_pz(m: &HybridModel, maturity: f64, spot: f64, rate: f64) -> Result<f64> {
    ensure(maturity > 0.0, || format!("maturity must be > 0, got {maturity}"))?;
    ensure(spot > 0.0, || format!("spot must be > 0, got {spot}"))?;
    let mom = bshw_moments(m, maturity)?;
    let y = spot.ln();
    Ok(mom.density_yr(y, rate)? / spot * mom.conditional_discount(y, rate)?)
}

/// Pre-computed moments for evaluating `P·Z` on many nodes.
#[derive(Clone, Copy, Debug)]
pub struct PzReference {
    moments: BshwMoments,
}

impl PzReference {
    pub fn new(m: &HybridModel, maturity: f64) -> Result<Self> {
        ensure(maturity > 0.0, || format!("maturity must be > 0, got {maturity}"))?;
        let moments = bshw_moments(m, maturity)?;
        moments.inverse_yr()?;
        Ok(Self { moments })
    }

    pub fn moments(&self) -> &BshwMoments {
        &self.moments
    }

    pub fn z(&self, spot: f64, rate: f64) -> f64 {
        self.moments
            .conditional_discount(spot.ln(), rate)
            .expect("checked at construction")
    }

    pub fn pz(&self, spot: f64, rate: f64) -> f64 {
        if spot <= 0.0 {
            return 0.0;
        }
        let y = spot.ln();
        let d = self.moments.density_yr(y, rate).expect("checked at construction");
        d / spot * self.z(spot, rate)
    }
}

/// Largest relative gap between the closed-form C_T, C_K, C_KK and central
/// differences of the price (h_T = 1e-4, h_K = 1e-4·K).
pub fn bshw_greeks_fd_check(m: &HybridModel, maturity: f64, strike: f64) -> Result<f64> {
    let price = |t: f64, k: f64| bshw_call(m, t, k).map(|c| c.price());
    let g = match bshw_call(m, maturity, strike)? {
        CallValue::Regular(g) => g,
        CallValue::Intrinsic { .. } => {
            return Err(Error::InvalidInput("no sensitivities for an intrinsic-value call".into()))
        }
    };
    let ht = 1e-4;
    let hk = 1e-4 * strike;
    let c_t = (price(maturity + ht, strike)? - price(maturity - ht, strike)?) / (2.0 * ht);
    let c_k = (price(maturity, strike + hk)? - price(maturity, strike - hk)?) / (2.0 * hk);
    let c_kk = (price(maturity, strike + hk)? - 2.0 * g.price + price(maturity, strike - hk)?)
        / (hk * hk);
    let rel = |cf: f64, fd: f64| (cf - fd).abs() / (cf.abs() + 1e-12);
    Ok(rel(g.c_t, c_t).max(rel(g.c_k, c_k)).max(rel(g.c_kk, c_kk)))
}
