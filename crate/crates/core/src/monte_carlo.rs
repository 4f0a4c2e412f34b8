//! Euler Monte Carlo for the hybrid model, used as an independent oracle.
//!
//! Paths are simulated in fixed-size batches; batch `b` draws from the
//! ChaCha8 stream `b` of the configured seed, and batch statistics are
//! merged in batch order, so results depend only on the seed and the
//! configuration.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::models::HybridModel;
use crate::normal::inv_cdf;

/// Spot discretization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpotScheme {
    /// `S ← S·exp((r̄ − ½σ²)Δt + σ√Δt·ξ₁)` with r̄ the step's trapezoid rate.
    #[default]
    LogEuler,
    /// `S ← S·(1 + rΔt + σ√Δt·ξ₁)`, absorbed at 1e-12.
    Euler,
}

/// Short-rate discretization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RateScheme {
    /// Exact Gaussian transition of the Hull-White rate.
    #[default]
    Exact,
    /// `r ← r + a(θ(t) − r)Δt + σ₂√Δt·ξ₂`.
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    /// Number of independent samples; doubled by antithetic pairing.
    pub n_paths: u64,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub spot_scheme: SpotScheme,
    pub rate_scheme: RateScheme,
    /// Samples per batch (one RNG stream each).
    pub batch_size: u64,
}

impl McConfig {
    pub fn new(n_paths: u64, dt: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            seed,
            antithetic: true,
            spot_scheme: SpotScheme::default(),
            rate_scheme: RateScheme::default(),
            batch_size: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_paths >= 1, || "need at least one path".into())?;
        ensure(self.dt.is_finite() && self.dt > 0.0, || format!("dt must be > 0, got {}", self.dt))?;
        ensure(self.batch_size >= 1, || "batch size must be >= 1".into())
    }

    pub fn n_effective(&self) -> u64 {
        if self.antithetic {
            2 * self.n_paths
        } else {
            self.n_paths
        }
    }
}

/// Mean with its standard error.
///
/// With antithetic pairing the sample statistic is the pair average;
/// `sample_std` is reported per path, i.e. `√2·std(pair averages)`, so that
/// `standard_error = sample_std/√n_effective` in both modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub sample_std: f64,
    pub n_effective: u64,
}

/// Terminal state of one path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terminal {
    pub spot: f64,
    pub rate: f64,
    /// Trapezoid approximation of ∫₀ᵀ r.
    pub integrated_rate: f64,
}

impl Terminal {
    pub fn discount(&self) -> f64 {
        (-self.integrated_rate).exp()
    }

    fn is_finite(&self) -> bool {
        self.spot.is_finite() && self.rate.is_finite() && self.integrated_rate.is_finite()
    }
}

struct Step {
    t: f64,
    h: f64,
    sqrt_h: f64,
    decay: f64,
    shift: f64,
    sd: f64,
    theta: f64,
}

struct Stepper<'a> {
    m: &'a HybridModel,
    steps: Vec<Step>,
    spot: SpotScheme,
    rate: RateScheme,
    corr: (f64, f64),
}

const ABSORB: f64 = 1e-12;

impl<'a> Stepper<'a> {
    fn new(m: &'a HybridModel, maturity: f64, cfg: &McConfig) -> Result<Self> {
        let n_full = (maturity / cfg.dt * (1.0 + 1e-12)).floor() as usize;
        let mut grid: Vec<f64> = (0..=n_full).map(|k| k as f64 * cfg.dt).collect();
        if maturity - grid[n_full] > 1e-12 * maturity {
            grid.push(maturity);
        } else {
            grid[n_full] = maturity;
        }
        let a = m.rate.a;
        let s2 = m.rate.sigma2;
        let mut steps = Vec::with_capacity(grid.len() - 1);
        for w in grid.windows(2) {
            let (t, u) = (w[0], w[1]);
            let h = u - t;
            let decay = (-a * h).exp();
            steps.push(Step {
                t,
                h,
                sqrt_h: h.sqrt(),
                decay,
                shift: m.rate.mean_rate(u) - m.rate.mean_rate(t) * decay,
                sd: s2 * (-(-2.0 * a * h).exp_m1() / (2.0 * a)).sqrt(),
                theta: m.rate.theta_at(t)?,
            });
        }
        Ok(Self {
            m,
            steps,
            spot: cfg.spot_scheme,
            rate: cfg.rate_scheme,
            corr: (m.rho, (1.0 - m.rho * m.rho).max(0.0).sqrt()),
        })
    }

    /// One path driven by the normal pairs in `z` (sign-flipped when `anti`).
    fn path(&self, z: &[(f64, f64)], anti: bool) -> Terminal {
        let sign = if anti { -1.0 } else { 1.0 };
        let (rho, rho_c) = self.corr;
        let a = self.m.rate.a;
        let s2 = self.m.rate.sigma2;
        let mut s = self.m.s0;
        let mut r = self.m.rate.r0;
        let mut int_r = 0.0;
        for (st, &(z1, z2)) in self.steps.iter().zip(z) {
            let x1 = sign * z1;
            let x2 = rho * x1 + rho_c * sign * z2;
            let r_next = match self.rate {
                RateScheme::Exact => r * st.decay + st.shift + st.sd * x2,
                RateScheme::Euler => r + a * (st.theta - r) * st.h + s2 * st.sqrt_h * x2,
            };
            let sig = self.m.vol.sigma(st.t, s);
            match self.spot {
                SpotScheme::LogEuler => {
                    let rbar = 0.5 * (r + r_next);
                    s *= ((rbar - 0.5 * sig * sig) * st.h + sig * st.sqrt_h * x1).exp();
                }
                SpotScheme::Euler => {
                    if s > 0.0 {
                        s += s * (r * st.h + sig * st.sqrt_h * x1);
                        if s <= ABSORB {
                            s = 0.0;
                        }
                    }
                }
            }
            int_r += 0.5 * (r + r_next) * st.h;
            r = r_next;
        }
        Terminal {
            spot: s,
            rate: r,
            integrated_rate: int_r,
        }
    }
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    // midpoint of a 2^-53 cell: never 0 or 1
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Running mean / M2 per output (Welford), merged with Chan's rule.
#[derive(Clone, Debug)]
struct Moments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    aborted: u64,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
            aborted: 0,
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, m2), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *m2 += d * (v - *m);
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.aborted += o.aborted;
        if o.n == 0 {
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let d = o.mean[k] - self.mean[k];
            self.mean[k] += d * nb / n;
            self.m2[k] += o.m2[k] + d * d * na * nb / n;
        }
        self.n += o.n;
    }
}

/// Simulates `cfg.n_paths` samples to `maturity` and averages the `n_out`
/// quantities written by `f` for each terminal state.
pub fn simulate<F>(m: &HybridModel, maturity: f64, cfg: &McConfig, n_out: usize, f: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&Terminal, &mut [f64]) + Sync,
{
    m.validate()?;
    cfg.validate()?;
    ensure(maturity > 0.0 && maturity.is_finite(), || format!("maturity must be > 0, got {maturity}"))?;
    let stepper = Stepper::new(m, maturity, cfg)?;
    let n_batches = cfg.n_paths.div_ceil(cfg.batch_size);
    let run_batch = |b: u64| -> Moments {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b);
        let count = cfg.batch_size.min(cfg.n_paths - b * cfg.batch_size);
        let mut acc = Moments::new(n_out);
        let mut z = vec![(0.0, 0.0); stepper.steps.len()];
        let mut out = vec![0.0; n_out];
        let mut anti = vec![0.0; n_out];
        for _ in 0..count {
            for zk in z.iter_mut() {
                *zk = (inv_cdf(uniform(&mut rng)), inv_cdf(uniform(&mut rng)));
            }
            let p = stepper.path(&z, false);
            if !p.is_finite() {
                acc.aborted += 1;
                continue;
            }
            f(&p, &mut out);
            if cfg.antithetic {
                let q = stepper.path(&z, true);
                if !q.is_finite() {
                    acc.aborted += 1;
                    continue;
                }
                f(&q, &mut anti);
                for (o, a) in out.iter_mut().zip(&anti) {
                    *o = 0.5 * (*o + a);
                }
            }
            if out.iter().all(|v| v.is_finite()) {
                acc.push(&out);
            } else {
                acc.aborted += 1;
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let batches: Vec<Moments> = (0..n_batches).into_par_iter().map(run_batch).collect();
    #[cfg(not(feature = "parallel"))]
    let batches: Vec<Moments> = (0..n_batches).map(run_batch).collect();

    let mut total = Moments::new(n_out);
    for b in &batches {
        total.merge(b);
    }
    // abort above 0.01% non-finite samples
    if total.aborted * 10_000 > cfg.n_paths {
        return Err(Error::McAborted {
            aborted: total.aborted,
            total: cfg.n_paths,
        });
    }
    ensure(total.n >= 2, || "fewer than two finite samples".into())?;
    let n = total.n as f64;
    let per_path = if cfg.antithetic { 2.0 } else { 1.0 };
    let n_eff = total.n * per_path as u64;
    Ok(total
        .mean
        .iter()
        .zip(&total.m2)
        .map(|(&mean, &m2)| {
            let var = (m2 / (n - 1.0)).max(0.0);
            let std = (var * per_path).sqrt();
            McEstimate {
                mean,
                standard_error: std / (n_eff as f64).sqrt(),
                sample_std: std,
                n_effective: n_eff,
            }
        })
        .collect())
}

/// Estimates `E[payoff(S_T, r_T, ∫r)]` for each payoff.
pub fn simulate_paths(
    m: &HybridModel,
    maturity: f64,
    cfg: &McConfig,
    payoffs: &[&(dyn Fn(&Terminal) -> f64 + Sync)],
) -> Result<Vec<McEstimate>> {
    simulate(m, maturity, cfg, payoffs.len(), |p, out| {
        for (o, f) in out.iter_mut().zip(payoffs) {
            *o = f(p);
        }
    })
}

/// Discounted call prices `E[e^{−∫r}(S_T − K)⁺]`.
pub fn price_calls(m: &HybridModel, maturity: f64, strikes: &[f64], cfg: &McConfig) -> Result<Vec<McEstimate>> {
    simulate(m, maturity, cfg, strikes.len(), |p, out| {
        let d = p.discount();
        for (o, &k) in out.iter_mut().zip(strikes) {
            *o = d * (p.spot - k).max(0.0);
        }
    })
}

/// Kernel-regression estimate of `E[e^{−∫r} | S_T ≈ S, r_T ≈ r]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalZ {
    pub spot: f64,
    pub rate: f64,
    pub estimate: f64,
    pub kernel_se: f64,
    /// (Σw)² / Σw²
    pub effective_size: f64,
    /// Effective size below 100.
    pub unreliable: bool,
}

/// Nadaraya-Watson regression of the path discount on (log S_T, r_T) with a
/// product Gaussian kernel of the given bandwidth in both coordinates.
/// Antithetic partners enter as separate observations. Centers that receive
/// no weight give [`Error::NoData`].
pub fn conditional_z_estimate(
    m: &HybridModel,
    maturity: f64,
    cfg: &McConfig,
    centers: &[(f64, f64)],
    bandwidth: f64,
) -> Result<Vec<Result<ConditionalZ>>> {
    ensure(bandwidth > 0.0 && bandwidth.is_finite(), || format!("bandwidth must be > 0, got {bandwidth}"))?;
    ensure(centers.iter().all(|&(s, r)| s > 0.0 && r.is_finite()), || "centers need S > 0".into())?;
    let logc: Vec<(f64, f64)> = centers.iter().map(|&(s, r)| (s.ln(), r)).collect();
    let inv = 1.0 / (bandwidth * bandwidth);
    // discounts are centred on ZC(0,T) to keep the variance sums accurate
    let shift = m.zc(maturity)?;
    // sums per center: Σw, ΣwD, Σw², Σw²D, Σw²D²
    let per_path = |p: &Terminal, out: &mut [f64]| {
        let y = p.spot.ln();
        let d = p.discount() - shift;
        for (k, &(yc, rc)) in logc.iter().enumerate() {
            let q = ((y - yc).powi(2) + (p.rate - rc).powi(2)) * inv;
            let w = (-0.5 * q).exp();
            let o = &mut out[5 * k..5 * k + 5];
            o[0] = w;
            o[1] = w * d;
            o[2] = w * w;
            o[3] = w * w * d;
            o[4] = w * w * d * d;
        }
    };
    // sample means scaled back to sums over every observation
    let sums: Vec<f64> = simulate(m, maturity, cfg, 5 * centers.len(), per_path)?
        .iter()
        .map(|e| e.mean * e.n_effective as f64)
        .collect();
    Ok(centers
        .iter()
        .enumerate()
        .map(|(k, &(s, r))| {
            let v = &sums[5 * k..5 * k + 5];
            let (sw, swd, sw2, sw2d, sw2d2) = (v[0], v[1], v[2], v[3], v[4]);
            if !(sw > 0.0) || !(sw2 > 0.0) {
                return Err(Error::NoData { spot: s, rate: r });
            }
            let est = swd / sw;
            let var = (sw2d2 - 2.0 * est * sw2d + est * est * sw2).max(0.0);
            let est = shift + est;
            let ess = sw * sw / sw2;
            Ok(ConditionalZ {
                spot: s,
                rate: r,
                estimate: est,
                kernel_se: var.sqrt() / sw,
                effective_size: ess,
                unreliable: ess < 100.0,
            })
        })
        .collect())
}
