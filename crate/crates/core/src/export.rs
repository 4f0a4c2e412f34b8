//! CSV renderings of engine outputs.
//!
//! Numbers are written with 17 significant digits so that values round-trip
//! exactly. Every table may start with `#` comment lines.

use std::fmt::Write;

use crate::calibration::CorrectiveTermCurve;
use crate::models::LocalVolSurface;
use crate::monte_carlo::McEstimate;
use crate::pde::Field2D;

/// 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn start(comments: &[String], header: &str) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(header);
    out.push('\n');
    out
}

/// `t,S,r,pz`, S outer and r inner, one block per snapshot.
pub fn field_csv(comments: &[String], snapshots: &[(f64, &Field2D)]) -> String {
    let mut out = start(comments, "t,S,r,pz");
    for (t, f) in snapshots {
        let g = f.grid();
        let rates = g.rates();
        for i in 0..g.n_s {
            let s = g.spot(i);
            for (j, r) in rates.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", fmt17(*t), fmt17(s), fmt17(*r), fmt17(f.at(i, j)));
            }
        }
    }
    out
}

/// `T,K,sigma` for every node of the surface.
pub fn surface_csv(comments: &[String], surface: &LocalVolSurface) -> String {
    let mut out = start(comments, "T,K,sigma");
    for (i, t) in surface.maturities().iter().enumerate() {
        for (j, k) in surface.strikes().iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt17(*t), fmt17(*k), fmt17(surface.node(i, j)));
        }
    }
    out
}

/// `T,K,adj` for a set of curves.
pub fn corrective_terms_csv(comments: &[String], curves: &[CorrectiveTermCurve]) -> String {
    let mut out = start(comments, "T,K,adj");
    for c in curves {
        for (k, a) in c.strikes.iter().zip(&c.adj) {
            let _ = writeln!(out, "{},{},{}", fmt17(c.maturity), fmt17(*k), fmt17(*a));
        }
    }
    out
}

/// `K,price,se`; deterministic prices carry `se = 0`.
pub fn prices_csv(comments: &[String], strikes: &[f64], prices: &[f64], se: Option<&[f64]>) -> String {
    let mut out = start(comments, "K,price,se");
    for (n, (k, p)) in strikes.iter().zip(prices).enumerate() {
        let e = se.map_or(0.0, |s| s[n]);
        let _ = writeln!(out, "{},{},{}", fmt17(*k), fmt17(*p), fmt17(e));
    }
    out
}

/// `K,price,se` from Monte Carlo estimates.
pub fn estimates_csv(comments: &[String], strikes: &[f64], est: &[McEstimate]) -> String {
    let prices: Vec<f64> = est.iter().map(|e| e.mean).collect();
    let se: Vec<f64> = est.iter().map(|e| e.standard_error).collect();
    prices_csv(comments, strikes, &prices, Some(&se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid2D;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn field_rows_are_spot_major() {
        let g = Grid2D::new(0.5, 1.5, -0.1, 0.1, 8, 8, 1.0, 4).unwrap();
        let f = Field2D::from_fn(g, |s, r| s + r);
        let csv = field_csv(&["config_hash=abc".into()], &[(1.0, &f)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc");
        assert_eq!(lines[1], "t,S,r,pz");
        assert_eq!(lines.len(), 2 + 64);
        let row = |n: usize| -> Vec<f64> { lines[n].split(',').map(|v| v.parse().unwrap()).collect() };
        assert_eq!(row(2)[1], row(3)[1]);
        assert!(row(3)[2] > row(2)[2]);
        assert_eq!(row(2 + 8)[2], row(2)[2]);
    }

    #[test]
    fn price_table_layout() {
        let csv = prices_csv(&[], &[1.0, 1.1], &[0.1, 0.05], None);
        let mut it = csv.lines();
        assert_eq!(it.next(), Some("K,price,se"));
        assert!(it.next().unwrap().ends_with(",0.0000000000000000e0"));
    }
}
