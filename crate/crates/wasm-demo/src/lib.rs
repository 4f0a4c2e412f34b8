//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export wraps a plain function that also runs (and is tested) on the
//! host.

use hybridlv::analytic::bshw_call;
use hybridlv::calibration::{corrective_terms, price_calls_from_pz};
use hybridlv::models::hyperbolic_vol;
use hybridlv::pde::{evolve, EvolveOptions, Field2D, GridSpec};
use hybridlv::HybridModel;
use wasm_bindgen::prelude::*;

/// Sampled curve `y(x)`.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
}

/// PDE and closed-form call prices on a common strike grid.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    strikes: Vec<f64>,
    pde: Vec<f64>,
    analytic: Vec<f64>,
}

#[wasm_bindgen]
impl Comparison {
    #[wasm_bindgen(getter)]
    pub fn strikes(&self) -> Vec<f64> {
        self.strikes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn pde(&self) -> Vec<f64> {
        self.pde.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn analytic(&self) -> Vec<f64> {
        self.analytic.clone()
    }

    #[wasm_bindgen(getter, js_name = maxAbsDiff)]
    pub fn max_abs_diff(&self) -> f64 {
        self.pde.iter().zip(&self.analytic).map(|(p, a)| (p - a).abs()).fold(0.0, f64::max)
    }
}

/// Black-Scholes / Hull-White inputs shared by the PDE operations.
#[derive(Clone, Copy, Debug)]
pub struct Inputs {
    pub rho: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub a: f64,
    pub r0: f64,
    pub maturity: f64,
    pub ds: f64,
    pub dr: f64,
    pub dt: f64,
}

fn strike_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn solve(p: &Inputs) -> Result<(HybridModel, Field2D), String> {
    let m = HybridModel::bshw(1.0, p.r0, p.sigma1, p.sigma2, p.rho, p.a, p.r0).map_err(|e| e.to_string())?;
    let grid = GridSpec::new(p.ds, p.dr, p.dt).build(&m, p.maturity).map_err(|e| e.to_string())?;
    if grid.len() > 400_000 {
        return Err(format!("grid of {} nodes is too large for the demo", grid.len()));
    }
    let ev = evolve(&m, &grid, &EvolveOptions::default(), &[p.maturity]).map_err(|e| e.to_string())?;
    let field = ev.snapshots.into_iter().last().ok_or("no snapshot")?.1;
    Ok((m, field))
}

pub fn vol_curve_host(nu: f64, beta: f64, s_lo: f64, s_hi: f64, n: usize) -> Result<Curve, String> {
    if !(n >= 2 && s_lo > 0.0 && s_hi > s_lo) {
        return Err("need n >= 2 and 0 < s_lo < s_hi".into());
    }
    let x = strike_axis(s_lo, s_hi, n);
    let y = x.iter().map(|&s| hyperbolic_vol(nu, beta, s)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok(Curve { x, y })
}

pub fn compare_prices_host(p: &Inputs) -> Result<Comparison, String> {
    let (m, field) = solve(p)?;
    let strikes = strike_axis(0.5, 1.5, 51);
    let pde = price_calls_from_pz(&field, &strikes).map_err(|e| e.to_string())?;
    let analytic = strikes
        .iter()
        .map(|&k| bshw_call(&m, p.maturity, k).map(|c| c.price()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Comparison {
        strikes,
        pde,
        analytic,
    })
}

pub fn corrective_curve_host(p: &Inputs) -> Result<Curve, String> {
    let (m, field) = solve(p)?;
    let strikes = strike_axis(0.4, 1.8, 71);
    let f0t = m.forward(p.maturity).map_err(|e| e.to_string())?;
    let curve = corrective_terms(&field, p.maturity, f0t, &strikes).map_err(|e| e.to_string())?;
    Ok(Curve { x: strikes, y: curve.adj })
}

/// Hyperbolic local vol σ(S) on `n` points of `[s_lo, s_hi]`.
#[wasm_bindgen(js_name = volCurve)]
pub fn vol_curve(nu: f64, beta: f64, s_lo: f64, s_hi: f64, n: usize) -> Result<Curve, JsError> {
    vol_curve_host(nu, beta, s_lo, s_hi, n).map_err(|e| JsError::new(&e))
}

/// PDE vs closed-form call prices for K in [0.5, 1.5].
#[wasm_bindgen(js_name = comparePrices)]
#[allow(clippy::too_many_arguments)]
pub fn compare_prices(
    rho: f64,
    sigma1: f64,
    sigma2: f64,
    a: f64,
    r0: f64,
    maturity: f64,
    ds: f64,
    dr: f64,
    dt: f64,
) -> Result<Comparison, JsError> {
    let p = Inputs { rho, sigma1, sigma2, a, r0, maturity, ds, dr, dt };
    compare_prices_host(&p).map_err(|e| JsError::new(&e))
}

/// Corrective term Adj(K) for K in [0.4, 1.8].
#[wasm_bindgen(js_name = correctiveCurve)]
#[allow(clippy::too_many_arguments)]
pub fn corrective_curve(
    rho: f64,
    sigma1: f64,
    sigma2: f64,
    a: f64,
    r0: f64,
    maturity: f64,
    ds: f64,
    dr: f64,
    dt: f64,
) -> Result<Curve, JsError> {
    let p = Inputs { rho, sigma1, sigma2, a, r0, maturity, ds, dr, dt };
    corrective_curve_host(&p).map_err(|e| JsError::new(&e))
}
