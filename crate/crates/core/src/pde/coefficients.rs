use super::Grid2D;
use crate::error::Result;
use crate::models::{sde_coefficients, HybridModel};

/// Per-node coefficients of the expanded forward equation
///
/// ```text
/// u_t + C1 u_S + C2 u_r + C3 u_SS + C4 u_rr + C5 u_Sr + C6 u = 0
/// ```
///
/// frozen at one time level, S-major like [`super::Field2D`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdiCoefficients {
    pub n_s: usize,
    pub n_r: usize,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub c4: Vec<f64>,
    pub c5: Vec<f64>,
    pub c6: Vec<f64>,
}

/// The six coefficients at a single point.
pub fn point_coefficients(m: &HybridModel, t: f64, s: f64, r: f64) -> Result<[f64; 6]> {
    let k = sde_coefficients(m, t, s, r)?;
    let rho = m.rho;
    let (sig, sig_s, sig_ss) = (k.sigma, k.sigma_s, k.sigma_ss);
    let (alpha, alpha_r, alpha_rr) = (k.vol_r, k.alpha_r, k.alpha_rr);
    let c1 = r * s - 2.0 * s * sig * sig - 2.0 * s * s * sig * sig_s - rho * sig * s * alpha_r;
    let c2 = k.drift_r - rho * sig * alpha - rho * sig_s * s * alpha - 2.0 * alpha * alpha_r;
    let c3 = -0.5 * s * s * sig * sig;
    let c4 = -0.5 * alpha * alpha;
    let c5 = -rho * sig * s * alpha;
    let c6 = 2.0 * r + k.mu_r
        - sig * sig
        - 4.0 * s * sig * sig_s
        - sig_s * sig_s * s * s
        - sig * sig_ss * s * s
        - alpha_r * alpha_r
        - alpha * alpha_rr
        - rho * sig_s * s * alpha_r
        - rho * sig * alpha_r;
    Ok([c1, c2, c3, c4, c5, c6])
}

pub fn build_coefficients(m: &HybridModel, grid: &Grid2D, t: f64) -> Result<AdiCoefficients> {
    let n = grid.len();
    let mut out = AdiCoefficients {
        n_s: grid.n_s,
        n_r: grid.n_r,
        c1: Vec::with_capacity(n),
        c2: Vec::with_capacity(n),
        c3: Vec::with_capacity(n),
        c4: Vec::with_capacity(n),
        c5: Vec::with_capacity(n),
        c6: Vec::with_capacity(n),
    };
    let rates = grid.rates();
    for i in 0..grid.n_s {
        let s = grid.spot(i);
        for &r in &rates {
            let c = point_coefficients(m, t, s, r)?;
            out.c1.push(c[0]);
            out.c2.push(c[1]);
            out.c3.push(c[2]);
            out.c4.push(c[3]);
            out.c5.push(c[4]);
            out.c6.push(c[5]);
        }
    }
    Ok(out)
}
