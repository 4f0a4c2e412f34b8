use hybridlv_wasm::{compare_prices_host, corrective_curve_host, vol_curve_host, Inputs};

fn demo_inputs(rho: f64) -> Inputs {
    Inputs {
        rho,
        sigma1: 0.2,
        sigma2: 0.04,
        a: 0.5,
        r0: 0.02,
        maturity: 1.0,
        ds: 0.025,
        dr: 0.004,
        dt: 0.02,
    }
}

#[test]
fn vol_curve_is_flat_at_beta_one() {
    let c = vol_curve_host(0.25, 1.0, 0.1, 3.0, 30).unwrap();
    assert_eq!(c.x().len(), 30);
    assert!(c.y().iter().all(|v| (v - 0.25).abs() < 1e-15));
    assert!(vol_curve_host(0.2, 0.0, 0.1, 3.0, 30).is_err());
    assert!(vol_curve_host(0.2, 0.5, 3.0, 0.1, 30).is_err());
}

#[test]
fn coarse_demo_grid_prices_close_to_closed_form() {
    let c = compare_prices_host(&demo_inputs(0.4)).unwrap();
    assert_eq!(c.strikes().len(), 51);
    assert!(c.max_abs_diff() < 1e-3, "{}", c.max_abs_diff());
}

#[test]
fn corrective_curve_sign_follows_correlation() {
    let up = corrective_curve_host(&demo_inputs(0.4)).unwrap();
    let down = corrective_curve_host(&demo_inputs(-0.4)).unwrap();
    let peak = up.y().iter().cloned().fold(f64::MIN, f64::max);
    let trough = down.y().iter().cloned().fold(f64::MAX, f64::min);
    assert!(peak > 1e-3 && trough < -1e-3);
}
