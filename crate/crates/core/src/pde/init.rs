//! Initial conditions for the `P·Z` forward equation.
//!
//! At t = 0 the density is a Dirac mass at (S₀, r₀). Two grid
//! representations are provided: an isotropic Gaussian kernel γ_{1/N}
//! placed at t = 0, and a short-time Gaussian that starts the march a few
//! steps after 0 with moments matched to the model.

use super::{Field2D, Grid2D};
use crate::error::{ensure, Error, Result};
use crate::models::HybridModel;

/// How the Dirac start is represented on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    /// Isotropic kernel with covariance diag(1/N, 1/N) at t = 0, mass 1.
    /// `None` picks N so the kernel spans three cells.
    Dirac { n_kernel: Option<f64> },
    /// Correlated Gaussian at a small start time t₀ = k·Δt, where k is the
    /// smallest step count for which the spot standard deviation covers
    /// `cells` spot cells. Mass ZC(0, t₀).
    ShortTime { cells: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::ShortTime { cells: 2.0 }
    }
}

/// Kernel concentration giving a standard deviation of three cells.
pub fn default_kernel_concentration(grid: &Grid2D) -> f64 {
    let std = 3.0 * grid.ds().max(grid.dr());
    1.0 / (std * std)
}

fn check_inside(grid: &Grid2D, s0: f64, r0: f64) -> Result<()> {
    ensure(
        s0 > grid.s_min && s0 < grid.s_max && r0 > grid.r_min && r0 < grid.r_max,
        || {
            format!(
                "({s0}, {r0}) outside [{}, {}] x [{}, {}]",
                grid.s_min, grid.s_max, grid.r_min, grid.r_max
            )
        },
    )
}

fn normalize(mut field: Field2D, mass: f64) -> Result<Field2D> {
    let raw = field.mass();
    ensure(raw > 0.0 && raw.is_finite(), || "initial kernel has no mass on the grid".into())?;
    field.scale(mass / raw);
    Ok(field)
}

/// Gaussian kernel γ_{1/N}(S − s0, r − r0) rescaled to unit trapezoid mass.
pub fn init_dirac(grid: &Grid2D, s0: f64, r0: f64, n_kernel: f64) -> Result<Field2D> {
    check_inside(grid, s0, r0)?;
    ensure(n_kernel.is_finite() && n_kernel > 0.0, || format!("kernel N must be > 0, got {n_kernel}"))?;
    let var = 1.0 / n_kernel;
    let std = var.sqrt();
    let cell = grid.ds().max(grid.dr());
    if std < 2.0 * cell {
        return Err(Error::UnderResolvedKernel { std, cell });
    }
    let field = Field2D::from_fn(*grid, |s, r| {
        let q = ((s - s0).powi(2) + (r - r0).powi(2)) / var;
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * var)
    });
    normalize(field, 1.0)
}

/// Moments of the short-time Gaussian at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortTimeMoments {
    pub mean_s: f64,
    pub mean_r: f64,
    pub sd_s: f64,
    pub sd_r: f64,
    pub corr: f64,
    pub mass: f64,
}

/// First two moments of (S(t), r(t)) under the discounted measure for a
/// small t, with the local vol frozen at (0, S₀). The means satisfy
/// E[Z·S] = S₀ and E[Z·r] = f(0,t)·ZC(0,t) exactly.
pub fn short_time_moments(m: &HybridModel, t: f64) -> Result<ShortTimeMoments> {
    ensure(t >= 0.0 && t.is_finite(), || format!("start time must be >= 0, got {t}"))?;
    let zc = m.zc(t)?;
    let sigma = m.vol.sigma(0.0, m.s0);
    let r0 = m.rate.r0;
    let var_s = m.s0 * m.s0 * (2.0 * r0 * t).exp() * (sigma * sigma * t).exp_m1();
    let var_r = m.rate.rate_variance(t);
    let cov = m.rho * m.s0 * sigma * m.rate.sigma2 * m.rate.b(t);
    let (sd_s, sd_r) = (var_s.max(0.0).sqrt(), var_r.max(0.0).sqrt());
    let corr = if sd_s > 0.0 && sd_r > 0.0 { (cov / (sd_s * sd_r)).clamp(-1.0, 1.0) } else { 0.0 };
    Ok(ShortTimeMoments {
        mean_s: m.s0 / zc,
        mean_r: m.forward(t)?,
        sd_s,
        sd_r,
        corr,
        mass: zc,
    })
}

/// Start step k ≥ 1 for [`InitialCondition::ShortTime`].
pub fn short_time_start_step(m: &HybridModel, grid: &Grid2D, cells: f64) -> Result<usize> {
    ensure(cells.is_finite() && cells > 0.0, || format!("cells must be > 0, got {cells}"))?;
    let sigma = m.vol.sigma(0.0, m.s0);
    ensure(sigma > 0.0, || "short-time start needs a positive spot volatility".into())?;
    let t0 = (cells * grid.ds() / (m.s0 * sigma)).powi(2);
    let k = (t0 / grid.dt() - 1e-9).ceil().max(1.0) as usize;
    Ok(k.min(grid.n_t))
}

/// Correlated Gaussian with the moments of [`short_time_moments`] at `t`,
/// standard deviations floored at one cell, mass ZC(0, t).
pub fn init_short_time(m: &HybridModel, grid: &Grid2D, t: f64) -> Result<Field2D> {
    let mo = short_time_moments(m, t)?;
    check_inside(grid, mo.mean_s, mo.mean_r)?;
    let sd_s = mo.sd_s.max(grid.ds());
    let sd_r = mo.sd_r.max(grid.dr());
    // keep the field well defined if the floors leave |corr| near 1
    let corr = mo.corr.clamp(-0.99, 0.99);
    let om = 1.0 - corr * corr;
    let field = Field2D::from_fn(*grid, |s, r| {
        let x = (s - mo.mean_s) / sd_s;
        let y = (r - mo.mean_r) / sd_r;
        (-0.5 * (x * x - 2.0 * corr * x * y + y * y) / om).exp()
    });
    normalize(field, mo.mass)
}

/// Field and start step for an initial condition.
pub fn initial_field(m: &HybridModel, grid: &Grid2D, ic: InitialCondition) -> Result<(usize, Field2D)> {
    match ic {
        InitialCondition::Dirac { n_kernel } => {
            let n = n_kernel.unwrap_or_else(|| default_kernel_concentration(grid));
            Ok((0, init_dirac(grid, m.s0, m.rate.r0, n)?))
        }
        InitialCondition::ShortTime { cells } => {
            let k = short_time_start_step(m, grid, cells)?;
            Ok((k, init_short_time(m, grid, grid.time(k))?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        // midpoints of both axes land on nodes: 1.0 and 0.02
        Grid2D::new(0.5, 1.5, -0.08, 0.12, 39, 39, 1.0, 100).unwrap()
    }

    #[test]
    fn dirac_mass_and_peak() {
        let g = grid();
        let f = init_dirac(&g, 1.0, 0.02, 1.0 / 0.09f64.powi(2)).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-14);
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for i in 0..g.n_s {
            for j in 0..g.n_r {
                if f.at(i, j) > best {
                    best = f.at(i, j);
                    at = (i, j);
                }
            }
        }
        assert!((g.spot(at.0) - 1.0).abs() < 0.5 * g.ds());
        assert!((g.rate(at.1) - 0.02).abs() < 0.5 * g.dr());
    }

    #[test]
    fn dirac_is_symmetric_about_the_center() {
        let g = grid();
        let f = init_dirac(&g, 1.0, 0.02, 1.0 / 0.09f64.powi(2)).unwrap();
        for i in 0..g.n_s {
            for j in 0..g.n_r {
                let m = f.at(g.n_s - 1 - i, g.n_r - 1 - j);
                assert!((f.at(i, j) - m).abs() <= 1e-14 * f.at(19, 19), "({i},{j})");
            }
        }
    }

    #[test]
    fn dirac_rejects_bad_input() {
        let g = grid();
        assert!(matches!(init_dirac(&g, 1.0, 0.02, 1e6), Err(Error::UnderResolvedKernel { .. })));
        assert!(init_dirac(&g, 2.0, 0.02, 100.0).is_err());
        assert!(init_dirac(&g, 1.0, 0.5, 100.0).is_err());
        assert!(init_dirac(&g, 1.0, 0.02, -1.0).is_err());
        let n = default_kernel_concentration(&g);
        assert!(init_dirac(&g, 1.0, 0.02, n).is_ok());
    }

    #[test]
    fn short_time_moments_match_identities() {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let g = Grid2D::new(0.3, 1.7, -0.1, 0.14, 139, 119, 1.0, 100).unwrap();
        let t = 0.04;
        let f = init_short_time(&m, &g, t).unwrap();
        let zc = m.zc(t).unwrap();
        assert!((f.mass() - zc).abs() < 1e-14);
        assert!((f.integrate(|s, _| s) - 1.0).abs() < 1e-9);
        let fwd = m.forward(t).unwrap();
        assert!((f.integrate(|_, r| r) - fwd * zc).abs() < 1e-9);
        let mo = short_time_moments(&m, t).unwrap();
        assert!(mo.corr > 0.0 && mo.corr < 1.0);
    }

    #[test]
    fn start_step_is_positive() {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let g = Grid2D::with_spacing((1e-4, 2.77), (-0.22, 0.26), 1.0, 0.0156, 0.0026, 0.0099).unwrap();
        let k = short_time_start_step(&m, &g, 2.0).unwrap();
        assert!(k >= 1 && g.time(k) >= (2.0 * g.ds() / 0.2f64).powi(2));
        assert!(g.time(k - 1) < (2.0 * g.ds() / 0.2f64).powi(2));
    }
}
