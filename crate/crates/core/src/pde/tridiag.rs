//! Thomas algorithm for tridiagonal systems with a Dirichlet closure
//! (`x₀ = x_{n+1} = 0`, so `lower[0]` and `upper[n-1]` are ignored).

use crate::error::{ensure, Error, Result};

const PIVOT_EPS: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub main: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, main: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = main.len();
        ensure(lower.len() == n && upper.len() == n && rhs.len() == n, || {
            format!(
                "diagonal lengths differ: lower {}, main {n}, upper {}, rhs {}",
                lower.len(),
                upper.len(),
                rhs.len()
            )
        })?;
        Ok(Self {
            lower,
            main,
            upper,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut x = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        solve_into(&self.lower, &self.main, &self.upper, &self.rhs, &mut scratch, &mut x)?;
        Ok(x)
    }

    /// max_i |(A·x)_i − f_i|
    pub fn residual(&self, x: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut ax = self.main[i] * x[i];
                if i > 0 {
                    ax += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    ax += self.upper[i] * x[i + 1];
                }
                (ax - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves into `out`; `scratch` holds the modified upper diagonal.
pub fn solve_into(
    lower: &[f64],
    main: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = main.len();
    if n == 0 {
        return Ok(());
    }
    let mut pivot = main[0];
    if !(pivot.abs() > PIVOT_EPS) {
        return Err(Error::SingularSystem { row: 0 });
    }
    scratch[0] = upper[0] / pivot;
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = main[i] - lower[i] * scratch[i - 1];
        if !(pivot.abs() > PIVOT_EPS) {
            return Err(Error::SingularSystem { row: i });
        }
        scratch[i] = upper[i] / pivot;
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
    Ok(())
}
