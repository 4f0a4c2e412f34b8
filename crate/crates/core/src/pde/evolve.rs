//! Time march of the forward equation with per-step renormalization.

use super::init::{init_short_time, initial_field, InitialCondition};
use super::{adi_step, build_coefficients, Field2D, Grid2D, NegativityReport};
use crate::error::{ensure, Error, Result};
use crate::models::HybridModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub initial: InitialCondition,
    /// Rescale the mass to ZC(0, t) after every step.
    pub normalize: bool,
    /// Relative raw-mass drift above which a divergence warning is recorded.
    pub drift_warning: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            initial: InitialCondition::default(),
            normalize: true,
            drift_warning: 0.2,
        }
    }
}

/// Diagnostics of one time step, taken before renormalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub raw_mass: f64,
    pub zc: f64,
    /// raw_mass / zc
    pub ratio: f64,
    /// Mass after renormalization.
    pub mass: f64,
    pub negative: NegativityReport,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    /// Time step at which the march started (0 for a kernel at t = 0).
    pub start_step: usize,
    pub snapshots: Vec<(f64, Field2D)>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
}

impl Evolution {
    pub fn snapshot(&self, t: f64) -> Option<&Field2D> {
        self.snapshots.iter().find(|(s, _)| (s - t).abs() < 1e-9 * t.max(1.0)).map(|(_, f)| f)
    }

    pub fn last(&self) -> Option<&Field2D> {
        self.snapshots.last().map(|(_, f)| f)
    }

    /// Largest |raw_mass/zc − 1| over the march.
    pub fn max_drift(&self) -> f64 {
        self.diagnostics.iter().map(|d| (d.ratio - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest negative mass relative to the total, over the march.
    pub fn max_negative_mass(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.negative.mass / d.mass.abs().max(1e-300)).fold(0.0, f64::max)
    }
}

/// One normalized step from `t` to `t + dt`.
fn advance(
    m: &HybridModel,
    field: &Field2D,
    t: f64,
    dt: f64,
    step: usize,
    options: &EvolveOptions,
    warnings: &mut Vec<String>,
) -> Result<(Field2D, StepDiagnostics)> {
    let grid = field.grid();
    let coeffs = build_coefficients(m, grid, t)?;
    let mut next = adi_step(field, &coeffs, dt)?;
    let t_next = t + dt;
    let raw = next.mass();
    if !next.is_finite() || !raw.is_finite() || raw <= 0.0 {
        return Err(Error::BlowUp { step, t: t_next });
    }
    let zc = m.zc(t_next)?;
    let ratio = raw / zc;
    if (ratio - 1.0).abs() > options.drift_warning {
        warnings.push(format!(
            "step {step}: raw mass {raw:.6e} deviates from ZC {zc:.6e} by {:.2}%",
            100.0 * (ratio - 1.0)
        ));
    }
    if options.normalize {
        next.scale(zc / raw);
    }
    let diag = StepDiagnostics {
        step,
        t: t_next,
        raw_mass: raw,
        zc,
        ratio,
        mass: next.mass(),
        negative: next.negativity(),
    };
    Ok((next, diag))
}

/// Result of [`evolve_segment`].
#[derive(Clone, Debug)]
pub struct Segment {
    pub field: Field2D,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
}

/// Marches `field` from `t_from` to `t_to` on its own spatial lattice with
/// the largest uniform step not above the grid's `dt`.
pub fn evolve_segment(
    m: &HybridModel,
    field: Field2D,
    t_from: f64,
    t_to: f64,
    options: &EvolveOptions,
) -> Result<Segment> {
    ensure(t_from >= 0.0 && t_to > t_from, || format!("empty segment [{t_from}, {t_to}]"))?;
    let target = field.grid().dt();
    let steps = ((t_to - t_from) / target - 1e-9).ceil().max(1.0) as usize;
    let dt = (t_to - t_from) / steps as f64;
    let mut out = Segment {
        field,
        diagnostics: Vec::with_capacity(steps),
        warnings: Vec::new(),
    };
    for n in 0..steps {
        let t = t_from + n as f64 * dt;
        let (next, diag) = advance(m, &out.field, t, dt, n + 1, options, &mut out.warnings)?;
        out.diagnostics.push(diag);
        out.field = next;
    }
    Ok(out)
}

fn step_index(grid: &Grid2D, t: f64) -> Result<usize> {
    let dt = grid.dt();
    let k = (t / dt).round();
    ensure(t >= 0.0 && k <= grid.n_t as f64 && (k * dt - t).abs() <= 1e-9 * dt.max(t), || {
        format!("snapshot time {t} is not a multiple of dt = {dt} within [0, {}]", grid.t_end)
    })?;
    Ok(k as usize)
}

/// Marches from the configured initial condition to the last requested
/// snapshot time.
///
/// Snapshots requested before the short-time start are filled with the
/// short-time Gaussian at that time.
pub fn evolve(m: &HybridModel, grid: &Grid2D, options: &EvolveOptions, snapshot_times: &[f64]) -> Result<Evolution> {
    m.validate()?;
    let (start, field) = initial_field(m, grid, options.initial)?;
    evolve_from(m, grid, field, start, options, snapshot_times)
}

/// Marches `field`, given at step `start`, to the last requested snapshot.
pub fn evolve_from(
    m: &HybridModel,
    grid: &Grid2D,
    mut field: Field2D,
    start: usize,
    options: &EvolveOptions,
    snapshot_times: &[f64],
) -> Result<Evolution> {
    ensure(field.grid() == grid, || "field is on another grid".into())?;
    ensure(start <= grid.n_t, || format!("start step {start} beyond the horizon"))?;
    let mut targets = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        targets.push((step_index(grid, t)?, t));
    }
    let mut out = Evolution {
        start_step: start,
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };
    for &(k, t) in &targets {
        if k < start {
            if k == 0 && !matches!(options.initial, InitialCondition::ShortTime { .. }) {
                return Err(Error::InvalidInput(format!("snapshot at t = {t} precedes the start step {start}")));
            }
            out.snapshots.push((t, init_short_time(m, grid, grid.time(k))?));
        }
    }
    let last = targets.iter().map(|&(k, _)| k).max().unwrap_or(start).max(start);
    let dt = grid.dt();
    for n in start..=last {
        for &(k, t) in &targets {
            if k == n {
                out.snapshots.push((t, field.clone()));
            }
        }
        if n == last {
            break;
        }
        let (next, diag) = advance(m, &field, grid.time(n), dt, n + 1, options, &mut out.warnings)?;
        out.diagnostics.push(diag);
        field = next;
    }
    out.snapshots.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (HybridModel, Grid2D) {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let g = Grid2D::new(0.3, 2.2, -0.12, 0.16, 59, 47, 0.5, 25).unwrap();
        (m, g)
    }

    #[test]
    fn mass_tracks_zero_coupon() {
        let (m, g) = setup();
        let ev = evolve(&m, &g, &EvolveOptions::default(), &[0.5]).unwrap();
        assert_eq!(ev.diagnostics.len(), 25 - ev.start_step);
        for d in &ev.diagnostics {
            assert!((d.mass - d.zc).abs() < 1e-12, "step {}", d.step);
            assert!((d.ratio - 1.0).abs() < 0.05);
        }
        assert!(ev.warnings.is_empty());
        assert!((ev.last().unwrap().mass() - m.zc(0.5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn snapshots_must_sit_on_the_time_grid() {
        let (m, g) = setup();
        assert!(evolve(&m, &g, &EvolveOptions::default(), &[0.105]).is_err());
        assert!(evolve(&m, &g, &EvolveOptions::default(), &[0.6]).is_err());
        let ev = evolve(&m, &g, &EvolveOptions::default(), &[0.0, 0.1, 0.5]).unwrap();
        assert_eq!(ev.snapshots.len(), 3);
        assert!(ev.snapshot(0.1).is_some());
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let (m, g) = setup();
        let a = evolve(&m, &g, &EvolveOptions::default(), &[0.5]).unwrap();
        let b = evolve(&m, &g, &EvolveOptions::default(), &[0.5]).unwrap();
        assert_eq!(a.last().unwrap().values(), b.last().unwrap().values());
    }

    #[test]
    fn segments_reproduce_a_single_march() {
        let (m, g) = setup();
        let opts = EvolveOptions::default();
        let ev = evolve(&m, &g, &opts, &[0.2, 0.5]).unwrap();
        let seg = evolve_segment(&m, ev.snapshot(0.2).unwrap().clone(), 0.2, 0.5, &opts).unwrap();
        let d = seg.field.l1_distance(ev.snapshot(0.5).unwrap()).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn unnormalized_march_reports_raw_mass() {
        let (m, g) = setup();
        let opts = EvolveOptions { normalize: false, ..Default::default() };
        let ev = evolve(&m, &g, &opts, &[0.5]).unwrap();
        for d in &ev.diagnostics {
            assert_eq!(d.mass, d.raw_mass);
        }
    }
}
