use hybridlv::analytic::{bshw_call, PzReference};
use hybridlv::calibration::{
    calibrate, corrective_terms, dupire_vol, local_vol_stochastic_rates, price_calls_from_pz, CalibrationSettings,
    CallSurface, CorrectiveTermCurve, Provider,
};
use hybridlv::models::HullWhiteParams;
use hybridlv::pde::{evolve, EvolveOptions, Field2D, GridSpec};
use hybridlv::HybridModel;

fn set1() -> HybridModel {
    HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap()
}

fn paper_grid() -> GridSpec {
    GridSpec::new(0.0156, 0.0026, 0.0099)
}

fn analytic_field(m: &HybridModel, t: f64) -> Field2D {
    let grid = paper_grid().build(m, t).unwrap();
    let reference = PzReference::new(m, t).unwrap();
    Field2D::from_fn(grid, |s, r| reference.pz(s, r))
}

#[test]
fn analytic_density_integrates_to_zero_coupon() {
    let m = set1();
    let f = analytic_field(&m, 1.0);
    let zc = m.zc(1.0).unwrap();
    assert!((f.mass() - zc).abs() < 1e-3);
    let discounted_spot = f.integrate(|s, _| s);
    assert!((discounted_spot / m.s0 - 1.0).abs() < 2e-3);
}

#[test]
fn uncorrelated_corrective_term_matches_closed_form() {
    // With ρ = 0 the spot still loads on ∫r through its drift, so Adj does
    // not vanish: Adj = ½K·C_KK·(σ²_Dup − σ₁²) from the closed-form surface.
    let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.0, 0.5, 0.02).unwrap();
    let f = analytic_field(&m, 1.0);
    let f0t = m.forward(1.0).unwrap();
    let ks: Vec<f64> = (0..=20).map(|i| 0.6 + 0.04 * i as f64).collect();
    let curve = corrective_terms(&f, 1.0, f0t, &ks).unwrap();
    let market = CallSurface::analytic(&m, vec![1.0], ks.clone()).unwrap();
    for (k, adj) in ks.iter().zip(&curve.adj) {
        let c_kk = market.sensitivities(1.0, *k).unwrap().c_kk;
        let expected = 0.5 * k * c_kk * (dupire_vol(&market, f0t, 1.0, *k).unwrap() - 0.04);
        assert!((adj - expected).abs() < 2e-5, "K = {k}: {adj} vs {expected}");
    }
}

#[test]
fn analytic_corrective_term_recovers_the_generating_vol() {
    let m = set1();
    let f = analytic_field(&m, 1.0);
    let f0t = m.forward(1.0).unwrap();
    let curve = corrective_terms(&f, 1.0, f0t, &[0.9, 0.95, 1.0, 1.05, 1.1]).unwrap();
    let market = CallSurface::analytic(&m, vec![1.0], vec![0.9, 1.0, 1.1]).unwrap();
    let sigma = local_vol_stochastic_rates(&market, f0t, &curve, 1.0, 1.0).unwrap().sqrt();
    let dupire = dupire_vol(&market, f0t, 1.0, 1.0).unwrap().sqrt();
    assert!((sigma - 0.2).abs() < 1e-3, "{sigma}");
    assert!(sigma < dupire);
}

#[test]
fn evolved_prices_are_convex_and_bounded() {
    let m = set1();
    let grid = paper_grid().build(&m, 1.0).unwrap();
    let ev = evolve(&m, &grid, &EvolveOptions::default(), &[1.0]).unwrap();
    let f = ev.last().unwrap();
    assert!(ev.max_negative_mass() < 1e-3);

    let ks: Vec<f64> = (0..=135).map(|i| grid.s_min + 0.02 * i as f64).collect();
    let p = price_calls_from_pz(f, &ks).unwrap();
    for w in p.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        assert!(w[1] < w[0]);
    }
    let zc = m.zc(1.0).unwrap();
    assert!((p[0] - (m.s0 - ks[0] * zc)).abs() < 2e-3);
}

#[test]
fn adjustment_is_consistent_across_strike_resolutions() {
    let m = set1();
    let grid = paper_grid().build(&m, 1.0).unwrap();
    let ev = evolve(&m, &grid, &EvolveOptions::default(), &[1.0]).unwrap();
    let f = ev.last().unwrap();
    let f0t = m.forward(1.0).unwrap();
    let coarse_k: Vec<f64> = (0..=24).map(|i| 0.7 + 0.025 * i as f64).collect();
    let fine_k: Vec<f64> = (0..=48).map(|i| 0.7 + 0.0125 * i as f64).collect();
    let coarse = corrective_terms(f, 1.0, f0t, &coarse_k).unwrap();
    let fine = corrective_terms(f, 1.0, f0t, &fine_k).unwrap();
    let market = CallSurface::analytic(&m, vec![1.0], vec![0.8, 1.0, 1.2]).unwrap();
    for k in [0.81, 0.93, 1.0, 1.07, 1.19] {
        let a = local_vol_stochastic_rates(&market, f0t, &coarse, 1.0, k).unwrap().sqrt();
        let b = local_vol_stochastic_rates(&market, f0t, &fine, 1.0, k).unwrap().sqrt();
        assert!((a - b).abs() < 1e-4, "K = {k}: {a} vs {b}");
    }
}

#[test]
fn deterministic_rates_leave_dupire_unchanged() {
    let m = HybridModel::bshw(1.0, 0.02, 0.25, 0.0, 0.4, 0.5, 0.02).unwrap();
    let market = CallSurface::analytic(&m, vec![1.0], vec![0.8, 1.0, 1.2]).unwrap();
    let zero = CorrectiveTermCurve {
        maturity: 1.0,
        forward: 0.02,
        strikes: vec![0.5, 1.5],
        adj: vec![0.0, 0.0],
    };
    let a = local_vol_stochastic_rates(&market, 0.02, &zero, 1.0, 1.0).unwrap();
    let d = dupire_vol(&market, 0.02, 1.0, 1.0).unwrap();
    assert_eq!(a, d);
    assert!((d - 0.0625).abs() < 1e-10);
}

#[test]
fn single_node_calibration_with_deterministic_rates() {
    let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.0, 0.0, 0.5, 0.02).unwrap();
    let price = bshw_call(&m, 1.0, 1.0).unwrap().price();
    let market = CallSurface::from_prices(vec![1.0], vec![1.0], vec![price], Provider::Analytic(Box::new(m.clone())))
        .unwrap();
    let cal = calibrate(&market, &m, &CalibrationSettings::new(paper_grid())).unwrap();
    assert!((cal.surface.node(0, 0) - 0.2).abs() < 1e-10);
}

fn round_trip_market(m: &HybridModel) -> CallSurface {
    let ks: Vec<f64> = (0..=12).map(|i| 0.7 + 0.05 * i as f64).collect();
    CallSurface::analytic(m, vec![0.25, 0.5, 0.75, 1.0], ks).unwrap()
}

#[test]
fn dropping_the_corrective_term_biases_the_surface() {
    let m = set1();
    let market = round_trip_market(&m);
    let mut blind = m.clone();
    blind.rate = HullWhiteParams::constant(0.5, 0.0, 0.02, 0.02).unwrap();
    let cal = calibrate(&market, &blind, &CalibrationSettings::new(paper_grid())).unwrap();
    let n = market.strikes().len();
    for i in 0..4 {
        let row = cal.surface.slice(i);
        for v in [row[0], row[n - 1]] {
            assert!((v - 0.2).abs() > 1e-3, "maturity {i}: {v}");
        }
    }
    let values = cal.surface.values();
    let mean_bias = values.iter().map(|v| v - 0.2).sum::<f64>() / values.len() as f64;
    assert!(mean_bias > 5e-3, "{mean_bias}");
}

#[test]
fn continuation_agrees_with_restarts() {
    let m = set1();
    let market = round_trip_market(&m);
    let restart = calibrate(&market, &m, &CalibrationSettings::new(paper_grid())).unwrap();
    let mut settings = CalibrationSettings::new(paper_grid());
    settings.continuation = true;
    let cont = calibrate(&market, &m, &settings).unwrap();
    let worst = restart
        .surface
        .values()
        .iter()
        .zip(cont.surface.values())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(worst < 1e-3, "{worst}");
}
