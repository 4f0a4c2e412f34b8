use crate::error::{ensure, Result};
use crate::models::{HybridModel, LocalVolFunction};

/// Uniform truncated (S, r) lattice with a uniform time step.
///
/// `n_s` and `n_r` count interior nodes; the boundary nodes at `s_min`,
/// `s_max`, `r_min` and `r_max` carry the Dirichlet value 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub s_min: f64,
    pub s_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n_s: usize,
    pub n_r: usize,
    pub t_end: f64,
    pub n_t: usize,
}

impl Grid2D {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s_min: f64,
        s_max: f64,
        r_min: f64,
        r_max: f64,
        n_s: usize,
        n_r: usize,
        t_end: f64,
        n_t: usize,
    ) -> Result<Self> {
        ensure(s_min.is_finite() && s_min > 0.0, || format!("s_min must be > 0, got {s_min}"))?;
        ensure(s_max.is_finite() && s_max > s_min, || format!("s_max {s_max} must exceed s_min {s_min}"))?;
        ensure(r_min.is_finite() && r_max.is_finite() && r_max > r_min, || {
            format!("r_max {r_max} must exceed r_min {r_min}")
        })?;
        ensure(n_s >= 8 && n_r >= 8, || format!("need at least 8 interior nodes per axis, got {n_s} x {n_r}"))?;
        ensure(t_end.is_finite() && t_end > 0.0, || format!("horizon must be > 0, got {t_end}"))?;
        ensure(n_t >= 1, || "need at least one time step".into())?;
        Ok(Self {
            s_min,
            s_max,
            r_min,
            r_max,
            n_s,
            n_r,
            t_end,
            n_t,
        })
    }

    /// Node counts chosen so that the spacings do not exceed the targets.
    pub fn with_spacing(
        (s_min, s_max): (f64, f64),
        (r_min, r_max): (f64, f64),
        t_end: f64,
        ds: f64,
        dr: f64,
        dt: f64,
    ) -> Result<Self> {
        ensure(ds > 0.0 && dr > 0.0 && dt > 0.0, || "spacings must be > 0".into())?;
        let n_s = ((s_max - s_min) / ds).ceil() as usize;
        let n_r = ((r_max - r_min) / dr).ceil() as usize;
        let n_t = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(
            s_min,
            s_max,
            r_min,
            r_max,
            n_s.saturating_sub(1),
            n_r.saturating_sub(1),
            t_end,
            n_t,
        )
    }

    /// Default truncation: `s_min = 1e-4·S₀`,
    /// `s_max = S₀·exp(5σ_ref√T + f̄T)`, and `r` within six stationary
    /// Hull-White standard deviations of the band spanned by r₀ and θ.
    pub fn auto(m: &HybridModel, t_end: f64, ds: f64, dr: f64, dt: f64) -> Result<Self> {
        let (s_bounds, r_bounds) = auto_bounds(m, t_end)?;
        Self::with_spacing(s_bounds, r_bounds, t_end, ds, dr, dt)
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / (self.n_s + 1) as f64
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n_r + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_t as f64
    }

    /// Spot of interior node `i` (0-based).
    #[inline]
    pub fn spot(&self, i: usize) -> f64 {
        self.s_min + (i + 1) as f64 * self.ds()
    }

    /// Rate of interior node `j` (0-based).
    #[inline]
    pub fn rate(&self, j: usize) -> f64 {
        self.r_min + (j + 1) as f64 * self.dr()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_r
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spots(&self) -> Vec<f64> {
        (0..self.n_s).map(|i| self.spot(i)).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.n_r).map(|j| self.rate(j)).collect()
    }

    pub fn contains(&self, s: f64, r: f64) -> bool {
        s > self.s_min && s < self.s_max && r > self.r_min && r < self.r_max
    }

    /// Same bounds and horizon with every spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            n_s: 2 * self.n_s + 1,
            n_r: 2 * self.n_r + 1,
            n_t: 2 * self.n_t,
            ..*self
        }
    }

    /// Same lattice, different horizon at (as close as possible) the same dt.
    pub fn with_horizon(&self, t_end: f64) -> Result<Self> {
        let n_t = (t_end / self.dt() - 1e-9).ceil().max(1.0) as usize;
        Self::new(
            self.s_min, self.s_max, self.r_min, self.r_max, self.n_s, self.n_r, t_end, n_t,
        )
    }
}

/// Target spacings with optional explicit truncation bounds; missing
/// bounds come from [`auto_bounds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub ds: f64,
    pub dr: f64,
    pub dt: f64,
    pub s_bounds: Option<(f64, f64)>,
    pub r_bounds: Option<(f64, f64)>,
}

impl GridSpec {
    pub fn new(ds: f64, dr: f64, dt: f64) -> Self {
        Self {
            ds,
            dr,
            dt,
            s_bounds: None,
            r_bounds: None,
        }
    }

    /// Grid for horizon `t_end`; automatic bounds are sized for `t_end`.
    pub fn build(&self, m: &HybridModel, t_end: f64) -> Result<Grid2D> {
        let (s_auto, r_auto) = if self.s_bounds.is_none() || self.r_bounds.is_none() {
            auto_bounds(m, t_end)?
        } else {
            ((0.0, 0.0), (0.0, 0.0))
        };
        Grid2D::with_spacing(
            self.s_bounds.unwrap_or(s_auto),
            self.r_bounds.unwrap_or(r_auto),
            t_end,
            self.ds,
            self.dr,
            self.dt,
        )
    }
}

pub fn auto_bounds(m: &HybridModel, t_end: f64) -> Result<((f64, f64), (f64, f64))> {
    m.validate()?;
    let sigma_ref = match &m.vol {
        LocalVolFunction::Constant { sigma1 } => *sigma1,
        v => v.sigma(0.0, m.s0),
    };
    let fbar = -m.zc(t_end)?.ln() / t_end;
    let s_min = 1e-4 * m.s0;
    let s_max = m.s0 * (5.0 * sigma_ref * t_end.sqrt() + fbar * t_end).exp();
    let sd = m.rate.sigma2 / (2.0 * m.rate.a).sqrt();
    let mut lo = m.rate.r0;
    let mut hi = m.rate.r0;
    let steps = 16;
    for k in 1..=steps {
        let mu = m.rate.mean_rate(t_end * k as f64 / steps as f64);
        lo = lo.min(mu);
        hi = hi.max(mu);
    }
    // keep a band of at least ±3% even when rates are nearly deterministic
    let sd = sd.max(5e-3);
    Ok(((s_min, s_max), (lo - 6.0 * sd, hi + 6.0 * sd)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_relations() {
        let g = Grid2D::new(0.0001, 3.0, -0.2, 0.25, 99, 49, 1.0, 100).unwrap();
        assert!((g.ds() - (3.0 - 0.0001) / 100.0).abs() < 1e-15);
        assert!((g.dr() - 0.45 / 50.0).abs() < 1e-15);
        assert!((g.dt() - 0.01).abs() < 1e-15);
        assert!((g.spot(98) + g.ds() - 3.0).abs() < 1e-12);
        assert!((g.rate(0) - (-0.2 + g.dr())).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new(0.0, 3.0, -0.2, 0.2, 10, 10, 1.0, 10).is_err());
        assert!(Grid2D::new(1.0, 0.5, -0.2, 0.2, 10, 10, 1.0, 10).is_err());
        assert!(Grid2D::new(0.1, 3.0, 0.2, 0.2, 10, 10, 1.0, 10).is_err());
        assert!(Grid2D::new(0.1, 3.0, -0.2, 0.2, 7, 10, 1.0, 10).is_err());
        assert!(Grid2D::new(0.1, 3.0, -0.2, 0.2, 10, 10, 1.0, 0).is_err());
    }

    #[test]
    fn spacing_targets_are_upper_bounds() {
        let g = Grid2D::with_spacing((1e-4, 2.77), (-0.22, 0.26), 1.0, 0.0156, 0.0026, 0.0099).unwrap();
        assert!(g.ds() <= 0.0156 && g.ds() > 0.0150);
        assert!(g.dr() <= 0.0026 && g.dr() > 0.0025);
        assert!(g.dt() <= 0.0099 && g.dt() > 0.0097);
        let fine = g.refined();
        assert!((fine.ds() - 0.5 * g.ds()).abs() < 1e-15);
        assert!((fine.dr() - 0.5 * g.dr()).abs() < 1e-15);
    }
}
