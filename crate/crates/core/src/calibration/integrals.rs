//! Strike sweeps over a `P·Z` snapshot.
//!
//! The r-direction is integrated by the trapezoid rule at every spot node,
//! which leaves a spot marginal on the nodes `s_min, S_1, …, S_n, s_max`
//! (zero at both ends). Integrals in S are exact integrals of the linear
//! interpolant of that marginal, so strikes between nodes are handled with
//! partial cells and the full-domain results coincide with the 2-D
//! trapezoid rule.

use crate::error::{ensure, Result};
use crate::pde::Field2D;

/// Piecewise-linear function on the closed spot lattice.
struct Marginal {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Marginal {
    fn new(field: &Field2D, weight: impl Fn(f64) -> f64) -> Self {
        let g = field.grid();
        let mut x = Vec::with_capacity(g.n_s + 2);
        let mut y = Vec::with_capacity(g.n_s + 2);
        x.push(g.s_min);
        y.push(0.0);
        for (i, v) in field.rate_marginal(weight).into_iter().enumerate() {
            x.push(g.spot(i));
            y.push(v);
        }
        x.push(g.s_max);
        y.push(0.0);
        Self { x, y }
    }

    /// Cell index c with x[c] ≤ k < x[c+1].
    fn cell(&self, k: f64) -> usize {
        let h = self.x[1] - self.x[0];
        let c = ((k - self.x[0]) / h).floor() as isize;
        let c = c.clamp(0, self.x.len() as isize - 2) as usize;
        // guard against rounding at node positions
        if k < self.x[c] && c > 0 {
            c - 1
        } else if k >= self.x[c + 1] && c + 2 < self.x.len() {
            c + 1
        } else {
            c
        }
    }

    fn value(&self, c: usize, k: f64) -> f64 {
        let (x0, x1) = (self.x[c], self.x[c + 1]);
        let w = (k - x0) / (x1 - x0);
        self.y[c] * (1.0 - w) + self.y[c + 1] * w
    }

    /// `(∫ g, ∫ (x − k) g)` over `[p, q]` for the linear piece with end
    /// values `gp`, `gq`.
    fn piece(p: f64, q: f64, gp: f64, gq: f64, k: f64) -> (f64, f64) {
        let l = q - p;
        let m0 = 0.5 * l * (gp + gq);
        let (a, b) = (p - k, q - k);
        let m1 = l / 6.0 * (gp * (2.0 * a + b) + gq * (a + 2.0 * b));
        (m0, m1)
    }
}

fn check_strikes(field: &Field2D, strikes: &[f64]) -> Result<()> {
    let g = field.grid();
    ensure(strikes.windows(2).all(|w| w[0] < w[1]), || "strikes must be strictly increasing".into())?;
    ensure(strikes.iter().all(|&k| k >= g.s_min && k <= g.s_max), || {
        format!("strikes must lie within [{}, {}]", g.s_min, g.s_max)
    })
}

/// For every strike, `∫_{S>K} ĝ` and `∫_{S>K} (S − K) ĝ`, from one
/// downward sweep. Zeroth moments are accumulated as
/// `M0(K_i) = M0(K_{i+1}) + ∫_{K_i}^{K_{i+1}} ĝ`.
fn sweep(m: &Marginal, strikes: &[f64]) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); strikes.len()];
    let top = m.x.len() - 1;
    // suffix sums over full cells above `c`: ∫ g and ∫ x g
    let mut upper = top; // cells [upper, top) already summed
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut prev: Option<(f64, f64)> = None; // (strike, M0) of the previous (higher) strike
    for (idx, &k) in strikes.iter().enumerate().rev() {
        let c = m.cell(k);
        while upper > c + 1 {
            upper -= 1;
            let (p, q) = (m.x[upper], m.x[upper + 1]);
            let (a0, a1) = Marginal::piece(p, q, m.y[upper], m.y[upper + 1], 0.0);
            s0 += a0;
            s1 += a1;
        }
        let gk = m.value(c, k);
        let (p0, p1) = if k < m.x[c + 1] {
            Marginal::piece(k, m.x[c + 1], gk, m.y[c + 1], k)
        } else {
            (0.0, 0.0)
        };
        let call = p1 + (s1 - k * s0);
        let m0 = match prev {
            None => p0 + s0,
            // slice (K_i, K_{i+1}] of the linear interpolant
            Some((kn, m0n)) => m0n + slice(m, k, kn),
        };
        out[idx] = (m0, call);
        prev = Some((k, m0));
    }
    out
}

/// Exact `∫_{lo}^{hi} ĝ` of the interpolant.
fn slice(m: &Marginal, lo: f64, hi: f64) -> f64 {
    let (cl, ch) = (m.cell(lo), m.cell(hi));
    if cl == ch {
        return Marginal::piece(lo, hi, m.value(cl, lo), m.value(ch, hi), 0.0).0;
    }
    let mut acc = Marginal::piece(lo, m.x[cl + 1], m.value(cl, lo), m.y[cl + 1], 0.0).0;
    for c in cl + 1..ch {
        acc += Marginal::piece(m.x[c], m.x[c + 1], m.y[c], m.y[c + 1], 0.0).0;
    }
    acc + Marginal::piece(m.x[ch], hi, m.y[ch], m.value(ch, hi), 0.0).0
}

/// `C(K) = ∫∫ (S − K)⁺ P·Z dS dr` for each strike.
pub fn price_calls_from_pz(field: &Field2D, strikes: &[f64]) -> Result<Vec<f64>> {
    check_strikes(field, strikes)?;
    let m = Marginal::new(field, |_| 1.0);
    Ok(sweep(&m, strikes).into_iter().map(|(_, c)| c).collect())
}

/// `Adj(K) = E[Z(T)(r(T) − f(0,T)) 1{S(T) > K}]` on a strike lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectiveTermCurve {
    pub maturity: f64,
    pub forward: f64,
    pub strikes: Vec<f64>,
    pub adj: Vec<f64>,
}

impl CorrectiveTermCurve {
    /// Linear in K between nodes, flat outside.
    pub fn at(&self, k: f64) -> f64 {
        let (ks, v) = (&self.strikes, &self.adj);
        if k <= ks[0] {
            return v[0];
        }
        if k >= ks[ks.len() - 1] {
            return v[v.len() - 1];
        }
        let i = ks.partition_point(|&x| x <= k) - 1;
        let w = (k - ks[i]) / (ks[i + 1] - ks[i]);
        v[i] * (1.0 - w) + v[i + 1] * w
    }
}

/// Corrective terms at `strikes`: the top strike is integrated directly,
/// the rest by adding the slice between consecutive strikes.
pub fn corrective_terms(field: &Field2D, maturity: f64, f0t: f64, strikes: &[f64]) -> Result<CorrectiveTermCurve> {
    ensure(!strikes.is_empty(), || "need at least one strike".into())?;
    ensure(f0t.is_finite(), || format!("forward rate must be finite, got {f0t}"))?;
    check_strikes(field, strikes)?;
    let m = Marginal::new(field, |r| r - f0t);
    let adj = sweep(&m, strikes).into_iter().map(|(m0, _)| m0).collect();
    Ok(CorrectiveTermCurve {
        maturity,
        forward: f0t,
        strikes: strikes.to_vec(),
        adj,
    })
}

/// Direct (non-telescoped) `∫_{S>K} ∫ w(r) P·Z`, for cross-checks.
pub fn tail_integral(field: &Field2D, strike: f64, weight: impl Fn(f64) -> f64) -> Result<f64> {
    check_strikes(field, &[strike])?;
    let m = Marginal::new(field, weight);
    let top = m.x[m.x.len() - 1];
    Ok(slice(&m, strike, top))
}
