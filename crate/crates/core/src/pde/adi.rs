//! Two half-step alternating direction implicit (Peaceman-Rachford type)
//! time step. Step 1 is implicit in S and explicit in r; step 2 is implicit
//! in r and explicit in S. Each half-step advances Δt/2 with the full
//! operator; coefficients are frozen at the start of the step.

use super::tridiag::solve_into;
use super::{AdiCoefficients, Field2D};
use crate::error::{ensure, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Values at (i, j) with zero outside the interior block.
struct Padded<'a> {
    v: &'a [f64],
    n_s: usize,
    n_r: usize,
}

impl Padded<'_> {
    #[inline]
    fn get(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.n_s as isize || j >= self.n_r as isize {
            0.0
        } else {
            self.v[i as usize * self.n_r + j as usize]
        }
    }

    #[inline]
    fn cross(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i as isize, j as isize);
        self.get(i + 1, j + 1) + self.get(i - 1, j - 1) - self.get(i - 1, j + 1) - self.get(i + 1, j - 1)
    }
}

/// Right-hand side of step 1 at node (i, j): the r-direction and mixed
/// terms taken explicitly from `u`, moved across the equality.
pub(crate) fn step1_rhs(u: &Field2D, c: &AdiCoefficients, dt: f64, i: usize, j: usize) -> f64 {
    let g = u.grid();
    let (ds, dr) = (g.ds(), g.dr());
    let p = Padded { v: u.values(), n_s: g.n_s, n_r: g.n_r };
    let k = i * g.n_r + j;
    let (ii, jj) = (i as isize, j as isize);
    let (c2, c4, c5) = (c.c2[k], c.c4[k], c.c5[k]);
    p.get(ii, jj) * (2.0 / dt + 2.0 * c4 / (dr * dr))
        - p.get(ii, jj + 1) * (c2 / (2.0 * dr) + c4 / (dr * dr))
        + p.get(ii, jj - 1) * (c2 / (2.0 * dr) - c4 / (dr * dr))
        - c5 * p.cross(i, j) / (4.0 * ds * dr)
}

/// Right-hand side of step 2 at node (i, j), from the half-step field.
pub(crate) fn step2_rhs(v: &Field2D, c: &AdiCoefficients, dt: f64, i: usize, j: usize) -> f64 {
    let g = v.grid();
    let (ds, dr) = (g.ds(), g.dr());
    let p = Padded { v: v.values(), n_s: g.n_s, n_r: g.n_r };
    let k = i * g.n_r + j;
    let (ii, jj) = (i as isize, j as isize);
    let (c1, c3, c5) = (c.c1[k], c.c3[k], c.c5[k]);
    p.get(ii, jj) * (2.0 / dt + 2.0 * c3 / (ds * ds))
        - p.get(ii + 1, jj) * (c1 / (2.0 * ds) + c3 / (ds * ds))
        + p.get(ii - 1, jj) * (c1 / (2.0 * ds) - c3 / (ds * ds))
        - c5 * p.cross(i, j) / (4.0 * ds * dr)
}

fn solve_s_line(u: &Field2D, c: &AdiCoefficients, dt: f64, j: usize) -> Result<Vec<f64>> {
    let g = u.grid();
    let n = g.n_s;
    let ds = g.ds();
    let (mut lo, mut mid, mut up, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let k = i * g.n_r + j;
        let (c1, c3, c6) = (c.c1[k], c.c3[k], c.c6[k]);
        lo[i] = -c1 / (2.0 * ds) + c3 / (ds * ds);
        mid[i] = 2.0 / dt - 2.0 * c3 / (ds * ds) + c6;
        up[i] = c1 / (2.0 * ds) + c3 / (ds * ds);
        rhs[i] = step1_rhs(u, c, dt, i, j);
    }
    let mut x = vec![0.0; n];
    solve_into(&lo, &mid, &up, &rhs, &mut lo.clone(), &mut x)?;
    Ok(x)
}

fn solve_r_line(v: &Field2D, c: &AdiCoefficients, dt: f64, i: usize) -> Result<Vec<f64>> {
    let g = v.grid();
    let n = g.n_r;
    let dr = g.dr();
    let (mut lo, mut mid, mut up, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let k = i * g.n_r + j;
        let (c2, c4, c6) = (c.c2[k], c.c4[k], c.c6[k]);
        lo[j] = -c2 / (2.0 * dr) + c4 / (dr * dr);
        mid[j] = 2.0 / dt - 2.0 * c4 / (dr * dr) + c6;
        up[j] = c2 / (2.0 * dr) + c4 / (dr * dr);
        rhs[j] = step2_rhs(v, c, dt, i, j);
    }
    let mut x = vec![0.0; n];
    solve_into(&lo, &mid, &up, &rhs, &mut lo.clone(), &mut x)?;
    Ok(x)
}

fn map_lines<F>(count: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Advances `field` by one full time step `dt`.
pub fn adi_step(field: &Field2D, coeffs: &AdiCoefficients, dt: f64) -> Result<Field2D> {
    let g = *field.grid();
    ensure(coeffs.n_s == g.n_s && coeffs.n_r == g.n_r, || "coefficients built for another grid".into())?;
    ensure(dt > 0.0, || format!("time step must be > 0, got {dt}"))?;

    // step 1: one S-line per rate node
    let lines = map_lines(g.n_r, |j| solve_s_line(field, coeffs, dt, j))?;
    let mut half = Field2D::zeros(g);
    {
        let hv = half.values_mut();
        for (j, line) in lines.iter().enumerate() {
            for (i, x) in line.iter().enumerate() {
                hv[i * g.n_r + j] = *x;
            }
        }
    }

    // step 2: one r-line per spot node
    let lines = map_lines(g.n_s, |i| solve_r_line(&half, coeffs, dt, i))?;
    let mut next = Field2D::zeros(g);
    {
        let nv = next.values_mut();
        for (i, line) in lines.iter().enumerate() {
            nv[i * g.n_r..(i + 1) * g.n_r].copy_from_slice(line);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HybridModel;
    use crate::pde::{build_coefficients, Grid2D};

    fn setup() -> (HybridModel, Grid2D, AdiCoefficients) {
        let m = HybridModel::bshw(1.0, 0.02, 0.2, 0.04, 0.4, 0.5, 0.02).unwrap();
        let g = Grid2D::new(0.2, 2.0, -0.1, 0.14, 29, 23, 1.0, 50).unwrap();
        let c = build_coefficients(&m, &g, 0.0).unwrap();
        (m, g, c)
    }

    #[test]
    fn zero_field_stays_zero() {
        let (_, g, c) = setup();
        let z = Field2D::zeros(g);
        let next = adi_step(&z, &c, g.dt()).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
    }

    /// Unit impulse at (i0, j0): hand-expanded stencil of the right-hand
    /// sides, obtained by moving the explicit terms of each half-step
    /// equation across the equality.
    #[test]
    fn unit_impulse_stencils() {
        let (_, g, c) = setup();
        let (i0, j0) = (10, 12);
        let mut v = vec![0.0; g.len()];
        v[i0 * g.n_r + j0] = 1.0;
        let u = Field2D::from_values(g, v).unwrap();
        let (ds, dr, dt) = (g.ds(), g.dr(), g.dt());
        let k = |i: usize, j: usize| i * g.n_r + j;

        // step 1, node itself: 2/dt·u − C4·(−2u)/dr²
        let kk = k(i0, j0);
        let want = 2.0 / dt + 2.0 * c.c4[kk] / (dr * dr);
        assert!((step1_rhs(&u, &c, dt, i0, j0) - want).abs() < 1e-9);
        // node below in r sees u at j+1: −C2/(2dr) − C4/dr²
        let kb = k(i0, j0 - 1);
        let want = -(c.c2[kb] / (2.0 * dr) + c.c4[kb] / (dr * dr));
        assert!((step1_rhs(&u, &c, dt, i0, j0 - 1) - want).abs() < 1e-9);
        // node above in r sees u at j−1: +C2/(2dr) − C4/dr²
        let ka = k(i0, j0 + 1);
        let want = c.c2[ka] / (2.0 * dr) - c.c4[ka] / (dr * dr);
        assert!((step1_rhs(&u, &c, dt, i0, j0 + 1) - want).abs() < 1e-9);
        // diagonal neighbour (i0−1, j0−1) sees u at (i+1, j+1): −C5/(4 ds dr)
        let kd = k(i0 - 1, j0 - 1);
        let want = -c.c5[kd] / (4.0 * ds * dr);
        assert!((step1_rhs(&u, &c, dt, i0 - 1, j0 - 1) - want).abs() < 1e-9);
        // anti-diagonal neighbour (i0+1, j0−1) sees u at (i−1, j+1): +C5/(4 ds dr)
        let kad = k(i0 + 1, j0 - 1);
        let want = c.c5[kad] / (4.0 * ds * dr);
        assert!((step1_rhs(&u, &c, dt, i0 + 1, j0 - 1) - want).abs() < 1e-9);
        // S neighbours are implicit in step 1: no contribution
        assert_eq!(step1_rhs(&u, &c, dt, i0 + 1, j0), 0.0);

        // step 2 mirrors step 1 with S explicit
        let want = 2.0 / dt + 2.0 * c.c3[kk] / (ds * ds);
        assert!((step2_rhs(&u, &c, dt, i0, j0) - want).abs() < 1e-9);
        let kl = k(i0 - 1, j0);
        let want = -(c.c1[kl] / (2.0 * ds) + c.c3[kl] / (ds * ds));
        assert!((step2_rhs(&u, &c, dt, i0 - 1, j0) - want).abs() < 1e-9);
        let kr = k(i0 + 1, j0);
        let want = c.c1[kr] / (2.0 * ds) - c.c3[kr] / (ds * ds);
        assert!((step2_rhs(&u, &c, dt, i0 + 1, j0) - want).abs() < 1e-9);
        assert_eq!(step2_rhs(&u, &c, dt, i0, j0 + 1), 0.0);
    }

    /// Each half-step solution satisfies its defining difference equation.
    #[test]
    fn half_steps_satisfy_their_equations() {
        let (_, g, c) = setup();
        let u = Field2D::from_fn(g, |s, r| (-(s - 1.0f64).powi(2) / 0.05 - (r - 0.02f64).powi(2) / 0.002).exp());
        let dt = g.dt();
        let next = adi_step(&u, &c, dt).unwrap();
        // recompute the half step
        let lines: Vec<Vec<f64>> = (0..g.n_r).map(|j| solve_s_line(&u, &c, dt, j).unwrap()).collect();
        let mut hv = vec![0.0; g.len()];
        for (j, l) in lines.iter().enumerate() {
            for (i, x) in l.iter().enumerate() {
                hv[i * g.n_r + j] = *x;
            }
        }
        let half = Field2D::from_values(g, hv).unwrap();
        let (ds, dr) = (g.ds(), g.dr());
        let pu = Padded { v: u.values(), n_s: g.n_s, n_r: g.n_r };
        let ph = Padded { v: half.values(), n_s: g.n_s, n_r: g.n_r };
        let pn = Padded { v: next.values(), n_s: g.n_s, n_r: g.n_r };
        for i in 0..g.n_s {
            for j in 0..g.n_r {
                let k = i * g.n_r + j;
                let (ii, jj) = (i as isize, j as isize);
                let d_s = |p: &Padded| (p.get(ii + 1, jj) - p.get(ii - 1, jj)) / (2.0 * ds);
                let d_r = |p: &Padded| (p.get(ii, jj + 1) - p.get(ii, jj - 1)) / (2.0 * dr);
                let d_ss = |p: &Padded| (p.get(ii + 1, jj) - 2.0 * p.get(ii, jj) + p.get(ii - 1, jj)) / (ds * ds);
                let d_rr = |p: &Padded| (p.get(ii, jj + 1) - 2.0 * p.get(ii, jj) + p.get(ii, jj - 1)) / (dr * dr);
                let d_sr = |p: &Padded| p.cross(i, j) / (4.0 * ds * dr);
                let eq1 = (ph.get(ii, jj) - pu.get(ii, jj)) / (0.5 * dt)
                    + c.c1[k] * d_s(&ph)
                    + c.c2[k] * d_r(&pu)
                    + c.c3[k] * d_ss(&ph)
                    + c.c4[k] * d_rr(&pu)
                    + c.c5[k] * d_sr(&pu)
                    + c.c6[k] * ph.get(ii, jj);
                let eq2 = (pn.get(ii, jj) - ph.get(ii, jj)) / (0.5 * dt)
                    + c.c1[k] * d_s(&ph)
                    + c.c2[k] * d_r(&pn)
                    + c.c3[k] * d_ss(&ph)
                    + c.c4[k] * d_rr(&pn)
                    + c.c5[k] * d_sr(&ph)
                    + c.c6[k] * pn.get(ii, jj);
                assert!(eq1.abs() < 1e-8, "step 1 residual {eq1} at ({i},{j})");
                assert!(eq2.abs() < 1e-8, "step 2 residual {eq2} at ({i},{j})");
            }
        }
    }
}
