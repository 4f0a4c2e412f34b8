//! Maturity-by-maturity calibration of a local volatility surface under
//! Hull-White rates.

use std::sync::Arc;

use super::dupire::{local_variance, C_KK_FLOOR};
use super::{corrective_terms, CallSurface, CorrectiveTermCurve};
use crate::error::{ensure, Error, Result};
use crate::models::{HybridModel, LocalVolFunction, LocalVolSurface, TimeInterpolation};
use crate::pde::{evolve, evolve_segment, EvolveOptions, Field2D, GridSpec};

/// Repeat the PDE solve for a maturity with the freshly calibrated slice
/// until the slice stops moving.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub max_iter: usize,
    /// Largest absolute change in σ between iterations.
    pub tol: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self { max_iter: 5, tol: 1e-4 }
    }
}

#[derive(Clone, Debug)]
pub struct CalibrationSettings {
    pub grid: GridSpec,
    pub evolve: EvolveOptions,
    pub fixed_point: Option<FixedPoint>,
    /// Resume each maturity from the previous snapshot instead of
    /// restarting at t = 0.
    pub continuation: bool,
    pub c_kk_floor: f64,
}

impl CalibrationSettings {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            evolve: EvolveOptions::default(),
            fixed_point: None,
            continuation: false,
            c_kk_floor: C_KK_FLOOR,
        }
    }
}

/// Per-maturity diagnostics.
#[derive(Clone, Debug, Default)]
pub struct MaturityReport {
    pub maturity: f64,
    /// PDE solves spent on this maturity.
    pub solves: usize,
    /// Last fixed-point change in σ (0 without iteration).
    pub fixed_point_change: f64,
    pub max_mass_drift: f64,
    pub max_negative_fraction: f64,
    pub max_negative_mass: f64,
    pub skipped_strikes: Vec<f64>,
    pub dupire: Vec<f64>,
    pub adj: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct CalibrationReport {
    pub maturities: Vec<MaturityReport>,
}

impl CalibrationReport {
    /// Plain-text summary, one block per maturity.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.maturities {
            out.push_str(&format!(
                "maturity {}: solves={} fixed_point_change={:.3e} max_mass_drift={:.3e} \
                 max_negative_fraction={:.3e} max_negative_mass={:.3e} skipped={:?}\n",
                r.maturity,
                r.solves,
                r.fixed_point_change,
                r.max_mass_drift,
                r.max_negative_fraction,
                r.max_negative_mass,
                r.skipped_strikes
            ));
            for w in &r.warnings {
                out.push_str(&format!("  warning: {w}\n"));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub surface: LocalVolSurface,
    pub corrective_terms: Vec<CorrectiveTermCurve>,
    pub report: CalibrationReport,
}

/// Outcome of assembling one slice from a snapshot.
struct Slice {
    sigma: Vec<f64>,
    dupire: Vec<f64>,
    adj: CorrectiveTermCurve,
    skipped: Vec<f64>,
}

fn assemble_slice(
    market: &CallSurface,
    f0t: f64,
    t: f64,
    adj: CorrectiveTermCurve,
    floor: f64,
) -> Result<Slice> {
    let ks = market.strikes();
    let mut sigma = vec![f64::NAN; ks.len()];
    let mut dupire = vec![f64::NAN; ks.len()];
    let mut skipped = Vec::new();
    let mut negative = Vec::new();
    for (j, &k) in ks.iter().enumerate() {
        match local_variance(market, f0t, &adj, t, k, floor) {
            Ok(v) => {
                sigma[j] = v.sigma2.sqrt();
                dupire[j] = v.dupire.max(0.0).sqrt();
            }
            Err(Error::ButterflyDegenerate { .. }) => skipped.push(j),
            Err(Error::NegativeVariance { .. }) => negative.push((t, k)),
            Err(e) => return Err(e),
        }
    }
    if !negative.is_empty() {
        return Err(Error::CalibrationFailure { nodes: negative });
    }
    let valid: Vec<usize> = (0..ks.len()).filter(|j| !skipped.contains(j)).collect();
    if valid.is_empty() {
        return Err(Error::ButterflyDegenerate {
            maturity: t,
            strike: ks[0],
            c_kk: market.sensitivities(t, ks[0])?.c_kk,
        });
    }
    // flat fill from the nearest valid strike
    for &j in &skipped {
        let near = *valid.iter().min_by_key(|&&v| v.abs_diff(j)).expect("non-empty");
        sigma[j] = sigma[near];
        dupire[j] = dupire[near];
    }
    Ok(Slice {
        sigma,
        dupire,
        adj,
        skipped: skipped.into_iter().map(|j| ks[j]).collect(),
    })
}

/// σ_Dup slice used as the first guess for the earliest maturity.
fn dupire_slice(market: &CallSurface, f0t: f64, t: f64, floor: f64) -> Result<Vec<f64>> {
    let ks = market.strikes();
    let zero = CorrectiveTermCurve {
        maturity: t,
        forward: f0t,
        strikes: ks.to_vec(),
        adj: vec![0.0; ks.len()],
    };
    Ok(assemble_slice(market, f0t, t, zero, floor)?.sigma)
}

fn surface_with(done: &LocalVolSurface, t: f64, slice: &[f64]) -> Result<LocalVolSurface> {
    let mut s = done.clone();
    s.push_slice(t, slice)?;
    Ok(s)
}

/// Bootstraps σ(T_i, K_j) on the market lattice.
///
/// For each maturity the PDE is solved with the slices already calibrated,
/// read piecewise constant in time; the interval being calibrated uses the
/// previous slice (the Dupire slice for the first maturity), or the
/// fixed point of the slice when iteration is enabled. The returned surface
/// keeps that left-continuous time rule.
pub fn calibrate(market: &CallSurface, m0: &HybridModel, settings: &CalibrationSettings) -> Result<Calibration> {
    m0.validate()?;
    let ts = market.maturities().to_vec();
    let ks = market.strikes().to_vec();
    ensure(settings.c_kk_floor >= 0.0, || "C_KK floor must be >= 0".into())?;
    let deterministic = m0.rate.sigma2 == 0.0;

    // lattice sized for the last maturity at the at-the-money Dupire level
    let t_last = *ts.last().expect("non-empty");
    let atm = ks.iter().enumerate().min_by(|a, b| (a.1 - m0.s0).abs().total_cmp(&(b.1 - m0.s0).abs())).expect("non-empty").0;
    let sigma_ref = dupire_slice(market, m0.forward(t_last)?, t_last, settings.c_kk_floor)?[atm];
    let sizing = m0.with_vol(LocalVolFunction::Constant { sigma1: sigma_ref.max(0.01) });
    let base_grid = settings.grid.build(&sizing, t_last)?;

    let mut done: Option<LocalVolSurface> = None;
    let mut curves = Vec::with_capacity(ts.len());
    let mut report = CalibrationReport::default();
    let mut previous: Option<(f64, Field2D)> = None;

    for (i, &t) in ts.iter().enumerate() {
        let f0t = m0.forward(t)?;
        let mut rep = MaturityReport {
            maturity: t,
            ..Default::default()
        };
        let mut guess = match &done {
            None => dupire_slice(market, f0t, t, settings.c_kk_floor)?,
            Some(d) => d.slice(i - 1).to_vec(),
        };
        let max_iter = settings.fixed_point.map_or(1, |fp| fp.max_iter.max(1));
        let mut result = None;
        let mut latest = None;
        for _ in 0..max_iter {
            let trial = match &done {
                None => LocalVolSurface::new(vec![t], ks.clone(), guess.clone(), TimeInterpolation::LeftContinuous)?,
                Some(d) => surface_with(d, t, &guess)?,
            };
            let m = m0.with_vol(LocalVolFunction::Surface(Arc::new(trial)));
            let adj = if deterministic {
                // r(T) = f(0,T) pathwise: the corrective term vanishes
                CorrectiveTermCurve {
                    maturity: t,
                    forward: f0t,
                    strikes: ks.clone(),
                    adj: vec![0.0; ks.len()],
                }
            } else {
                let field = solve_to(&m, t, &base_grid, settings, previous.as_ref(), &mut rep)?;
                let curve = corrective_terms(&field, t, f0t, &ks)?;
                latest = Some(field);
                curve
            };
            rep.solves += 1;
            let slice = assemble_slice(market, f0t, t, adj, settings.c_kk_floor)?;
            let change = slice.sigma.iter().zip(&guess).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rep.fixed_point_change = if settings.fixed_point.is_some() { change } else { 0.0 };
            guess = slice.sigma.clone();
            result = Some(slice);
            if deterministic || settings.fixed_point.is_none_or(|fp| change < fp.tol) {
                break;
            }
        }
        let slice = result.expect("at least one pass");
        if !slice.skipped.is_empty() {
            rep.warnings.push(format!("C_KK below floor at strikes {:?}; filled flat", slice.skipped));
        }
        rep.skipped_strikes = slice.skipped.clone();
        rep.dupire = slice.dupire.clone();
        rep.adj = slice.adj.adj.clone();
        match &mut done {
            None => {
                done = Some(LocalVolSurface::new(vec![t], ks.clone(), slice.sigma.clone(), TimeInterpolation::LeftContinuous)?)
            }
            Some(d) => d.push_slice(t, &slice.sigma)?,
        }
        if settings.continuation {
            previous = latest.map(|f| (t, f));
        }
        curves.push(slice.adj);
        report.maturities.push(rep);
    }
    Ok(Calibration {
        surface: done.expect("at least one maturity"),
        corrective_terms: curves,
        report,
    })
}

fn solve_to(
    m: &HybridModel,
    t: f64,
    base: &crate::pde::Grid2D,
    settings: &CalibrationSettings,
    previous: Option<&(f64, Field2D)>,
    rep: &mut MaturityReport,
) -> Result<Field2D> {
    let (field, diags, warnings) = match (settings.continuation, previous) {
        (true, Some((t_prev, f))) if *t_prev < t => {
            let seg = evolve_segment(m, f.clone(), *t_prev, t, &settings.evolve)?;
            (seg.field, seg.diagnostics, seg.warnings)
        }
        _ => {
            let grid = base.with_horizon(t)?;
            let mut ev = evolve(m, &grid, &settings.evolve, &[grid.t_end])?;
            let field = ev.snapshots.pop().expect("one snapshot").1;
            (field, ev.diagnostics, ev.warnings)
        }
    };
    for d in &diags {
        rep.max_mass_drift = rep.max_mass_drift.max((d.ratio - 1.0).abs());
        rep.max_negative_fraction = rep.max_negative_fraction.max(d.negative.fraction);
        rep.max_negative_mass = rep.max_negative_mass.max(d.negative.mass);
    }
    rep.warnings.extend(warnings);
    Ok(field)
}
