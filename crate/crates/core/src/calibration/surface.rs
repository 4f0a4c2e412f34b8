//! Call price surfaces on a (maturity, strike) lattice.

use crate::analytic::{bshw_call, CallValue};
use crate::error::{ensure, Result};
use crate::models::HybridModel;

/// Where the prices came from; decides how sensitivities are taken.
#[derive(Clone, Debug)]
pub enum Provider {
    /// Closed-form Black-Scholes / Hull-White; Greeks are analytic.
    Analytic(Box<HybridModel>),
    /// Integrated from P·Z snapshots.
    Pde,
    /// Supplied by the caller.
    External,
}

impl Provider {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Analytic(_) => "analytic",
            Self::Pde => "pde",
            Self::External => "external",
        }
    }
}

/// `C(T, K)` and the three sensitivities entering the local vol formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensitivities {
    pub price: f64,
    pub c_t: f64,
    pub c_k: f64,
    pub c_kk: f64,
}

#[derive(Clone, Debug)]
pub struct CallSurface {
    maturities: Vec<f64>,
    strikes: Vec<f64>,
    prices: Vec<f64>,
    provider: Provider,
}

const SHAPE_TOL: f64 = 1e-10;

fn increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl CallSurface {
    /// Lattice prices, row-major by maturity. Rejects surfaces that are not
    /// decreasing and convex in strike.
    pub fn from_prices(maturities: Vec<f64>, strikes: Vec<f64>, prices: Vec<f64>, provider: Provider) -> Result<Self> {
        ensure(!maturities.is_empty() && !strikes.is_empty(), || "empty call surface".into())?;
        ensure(increasing(&maturities) && maturities[0] > 0.0, || "maturities must be positive and increasing".into())?;
        ensure(increasing(&strikes) && strikes[0] > 0.0, || "strikes must be positive and increasing".into())?;
        ensure(prices.len() == maturities.len() * strikes.len(), || {
            format!("expected {} prices, got {}", maturities.len() * strikes.len(), prices.len())
        })?;
        ensure(prices.iter().all(|p| p.is_finite()), || "prices must be finite".into())?;
        let n = strikes.len();
        for (i, row) in prices.chunks_exact(n).enumerate() {
            for j in 1..n {
                ensure(row[j] <= row[j - 1] + SHAPE_TOL, || {
                    format!("prices increase in strike at T = {}, K = {}", maturities[i], strikes[j])
                })?;
            }
            for j in 1..n.saturating_sub(1) {
                let left = (row[j] - row[j - 1]) / (strikes[j] - strikes[j - 1]);
                let right = (row[j + 1] - row[j]) / (strikes[j + 1] - strikes[j]);
                ensure(right - left >= -SHAPE_TOL, || {
                    format!("prices not convex at T = {}, K = {}", maturities[i], strikes[j])
                })?;
            }
        }
        Ok(Self {
            maturities,
            strikes,
            prices,
            provider,
        })
    }

    /// Closed-form surface of a Black-Scholes / Hull-White model.
    pub fn analytic(m: &HybridModel, maturities: Vec<f64>, strikes: Vec<f64>) -> Result<Self> {
        let mut prices = Vec::with_capacity(maturities.len() * strikes.len());
        for &t in &maturities {
            for &k in &strikes {
                prices.push(bshw_call(m, t, k)?.price());
            }
        }
        Self::from_prices(maturities, strikes, prices, Provider::Analytic(Box::new(m.clone())))
    }

    pub fn maturities(&self) -> &[f64] {
        &self.maturities
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn price(&self, i: usize, j: usize) -> f64 {
        self.prices[i * self.strikes.len() + j]
    }

    fn node_index(xs: &[f64], x: f64, what: &str) -> Result<usize> {
        xs.iter()
            .position(|&v| (v - x).abs() <= 1e-12 * v.abs().max(1.0))
            .ok_or_else(|| crate::Error::InvalidInput(format!("{what} {x} is not a lattice node")))
    }

    /// Sensitivities at (T, K). Analytic surfaces evaluate the closed forms
    /// anywhere; lattice surfaces need a node and use central differences
    /// (one-sided at the edges).
    pub fn sensitivities(&self, t: f64, k: f64) -> Result<Sensitivities> {
        if let Provider::Analytic(m) = &self.provider {
            return match bshw_call(m, t, k)? {
                CallValue::Regular(g) => Ok(Sensitivities {
                    price: g.price,
                    c_t: g.c_t,
                    c_k: g.c_k,
                    c_kk: g.c_kk,
                }),
                CallValue::Intrinsic { .. } => Err(crate::Error::InvalidInput("sensitivities need T > 0".into())),
            };
        }
        let i = Self::node_index(&self.maturities, t, "maturity")?;
        let j = Self::node_index(&self.strikes, k, "strike")?;
        let (nt, nk) = (self.maturities.len(), self.strikes.len());
        ensure(nt >= 2, || "maturity derivative needs at least two maturities".into())?;
        ensure(nk >= 3, || "strike derivatives need at least three strikes".into())?;
        let ts = &self.maturities;
        let ks = &self.strikes;
        let (i0, i1) = if i == 0 { (0, 1) } else if i == nt - 1 { (nt - 2, nt - 1) } else { (i - 1, i + 1) };
        let c_t = (self.price(i1, j) - self.price(i0, j)) / (ts[i1] - ts[i0]);
        let (jm, jp) = if j == 0 { (0, 1) } else if j == nk - 1 { (nk - 2, nk - 1) } else { (j - 1, j + 1) };
        let c_k = (self.price(i, jp) - self.price(i, jm)) / (ks[jp] - ks[jm]);
        // three-point second difference centred at c (shifted inward at the edges)
        let c = j.clamp(1, nk - 2);
        let (hl, hr) = (ks[c] - ks[c - 1], ks[c + 1] - ks[c]);
        let c_kk = 2.0
            * ((self.price(i, c + 1) - self.price(i, c)) / hr - (self.price(i, c) - self.price(i, c - 1)) / hl)
            / (hl + hr);
        Ok(Sensitivities {
            price: self.price(i, j),
            c_t,
            c_k,
            c_kk,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set1() -> HybridModel {
        HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap()
    }

    #[test]
    fn lattice_differences_track_closed_forms() {
        let m = set1();
        let ts: Vec<f64> = (0..=40).map(|i| 0.8 + 0.01 * i as f64).collect();
        let ks: Vec<f64> = (0..=100).map(|i| 0.5 + 0.01 * i as f64).collect();
        let an = CallSurface::analytic(&m, ts.clone(), ks.clone()).unwrap();
        let lat = CallSurface::from_prices(ts, ks, an.prices().to_vec(), Provider::External).unwrap();
        let a = an.sensitivities(1.0, 1.0).unwrap();
        let b = lat.sensitivities(1.0, 1.0).unwrap();
        assert!((a.c_t - b.c_t).abs() < 1e-5);
        assert!((a.c_k - b.c_k).abs() < 1e-4);
        assert!((a.c_kk - b.c_kk).abs() < 1e-3 * a.c_kk);
        assert_eq!(an.provider().tag(), "analytic");
        assert!(lat.sensitivities(1.0, 1.005).is_err());
    }

    #[test]
    fn rejects_arbitrageable_rows() {
        let ts = vec![1.0];
        let ks = vec![0.9, 1.0, 1.1];
        assert!(CallSurface::from_prices(ts.clone(), ks.clone(), vec![0.1, 0.12, 0.05], Provider::External).is_err());
        assert!(CallSurface::from_prices(ts.clone(), ks.clone(), vec![0.2, 0.05, 0.04], Provider::External).is_ok());
        assert!(CallSurface::from_prices(ts, ks, vec![0.2, 0.15, 0.01], Provider::External).is_err());
    }
}
