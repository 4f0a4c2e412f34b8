//! Local variance from call sensitivities, with and without the
//! stochastic-rate correction.

use super::{CallSurface, CorrectiveTermCurve, Sensitivities};
use crate::error::{ensure, Error, Result};

/// Default lower bound on `C_KK` below which a node is degenerate.
pub const C_KK_FLOOR: f64 = 1e-12;

/// Local variance at one node together with its ingredients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalVariance {
    pub maturity: f64,
    pub strike: f64,
    /// σ²
    pub sigma2: f64,
    /// Deterministic-rates part σ²_Dup.
    pub dupire: f64,
    pub adj: f64,
    pub sens: Sensitivities,
}

fn checked_sensitivities(surface: &CallSurface, t: f64, k: f64, floor: f64) -> Result<Sensitivities> {
    ensure(k > 0.0 && t > 0.0, || format!("need T > 0 and K > 0, got ({t}, {k})"))?;
    let s = surface.sensitivities(t, k)?;
    if !(s.c_kk > floor) {
        return Err(Error::ButterflyDegenerate { maturity: t, strike: k, c_kk: s.c_kk });
    }
    Ok(s)
}

fn dupire_from(s: &Sensitivities, f0t: f64, k: f64) -> f64 {
    (s.c_t + k * f0t * s.c_k) / (0.5 * k * k * s.c_kk)
}

/// σ²_Dup = (C_T + K f(0,T) C_K) / (½K² C_KK).
pub fn dupire_vol(surface: &CallSurface, f0t: f64, t: f64, k: f64) -> Result<f64> {
    dupire_vol_with_floor(surface, f0t, t, k, C_KK_FLOOR)
}

pub fn dupire_vol_with_floor(surface: &CallSurface, f0t: f64, t: f64, k: f64, floor: f64) -> Result<f64> {
    let s = checked_sensitivities(surface, t, k, floor)?;
    let v = dupire_from(&s, f0t, k);
    if v < 0.0 {
        return Err(Error::NegativeVariance {
            maturity: t,
            strike: k,
            sigma2: v,
            dupire: v,
            adj: 0.0,
            c_kk: s.c_kk,
        });
    }
    Ok(v)
}

/// σ² = σ²_Dup − Adj(K) / (½K C_KK), with Adj read linearly between the
/// curve's strike nodes.
pub fn local_vol_stochastic_rates(
    surface: &CallSurface,
    f0t: f64,
    adj: &CorrectiveTermCurve,
    t: f64,
    k: f64,
) -> Result<f64> {
    Ok(local_variance(surface, f0t, adj, t, k, C_KK_FLOOR)?.sigma2)
}

/// Like [`local_vol_stochastic_rates`] but returns every ingredient.
pub fn local_variance(
    surface: &CallSurface,
    f0t: f64,
    adj: &CorrectiveTermCurve,
    t: f64,
    k: f64,
    floor: f64,
) -> Result<LocalVariance> {
    let s = checked_sensitivities(surface, t, k, floor)?;
    let dupire = dupire_from(&s, f0t, k);
    let a = adj.at(k);
    let sigma2 = dupire - a / (0.5 * k * s.c_kk);
    if !(sigma2 >= 0.0) {
        return Err(Error::NegativeVariance {
            maturity: t,
            strike: k,
            sigma2,
            dupire,
            adj: a,
            c_kk: s.c_kk,
        });
    }
    Ok(LocalVariance {
        maturity: t,
        strike: k,
        sigma2,
        dupire,
        adj: a,
        sens: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::Provider;
    use crate::models::HybridModel;

    #[test]
    fn deterministic_rates_give_back_sigma() {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.0, 0.4, 0.5, 0.02).unwrap();
        let ks: Vec<f64> = (0..=10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let surf = CallSurface::analytic(&m, vec![1.0], ks.clone()).unwrap();
        let f = m.forward(1.0).unwrap();
        let zero = CorrectiveTermCurve { maturity: 1.0, forward: f, strikes: ks.clone(), adj: vec![0.0; ks.len()] };
        for &k in &ks {
            let d = dupire_vol(&surf, f, 1.0, k).unwrap();
            assert!((d - 0.04).abs() < 1e-10, "K={k}: {d}");
            assert_eq!(local_vol_stochastic_rates(&surf, f, &zero, 1.0, k).unwrap(), d);
        }
    }

    #[test]
    fn positive_adjustment_lowers_the_variance() {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let surf = CallSurface::analytic(&m, vec![1.0], vec![0.9, 1.0, 1.1]).unwrap();
        let f = m.forward(1.0).unwrap();
        let adj = CorrectiveTermCurve { maturity: 1.0, forward: f, strikes: vec![0.9, 1.1], adj: vec![1e-3, 1e-3] };
        let d = dupire_vol(&surf, f, 1.0, 1.0).unwrap();
        let v = local_vol_stochastic_rates(&surf, f, &adj, 1.0, 1.0).unwrap();
        assert!(v < d);
    }

    #[test]
    fn degenerate_and_negative_paths() {
        // flat zero wing on a coarse lattice
        let surf = CallSurface::from_prices(
            vec![0.5, 1.0],
            vec![1.5, 2.0, 2.5, 3.0],
            vec![0.0; 8],
            Provider::External,
        )
        .unwrap();
        assert!(matches!(dupire_vol(&surf, 0.02, 1.0, 2.5), Err(Error::ButterflyDegenerate { .. })));
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let an = CallSurface::analytic(&m, vec![1.0], vec![1.0]).unwrap();
        let f = m.forward(1.0).unwrap();
        let big = CorrectiveTermCurve { maturity: 1.0, forward: f, strikes: vec![1.0], adj: vec![1.0] };
        match local_vol_stochastic_rates(&an, f, &big, 1.0, 1.0) {
            Err(Error::NegativeVariance { adj, .. }) => assert_eq!(adj, 1.0),
            other => panic!("expected negative variance, got {other:?}"),
        }
    }
}
