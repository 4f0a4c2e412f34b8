use super::Grid2D;
use crate::error::{ensure, Result};

/// Values at the interior nodes of a [`Grid2D`], S-major
/// (`index = i·n_r + j`). Boundary nodes are implicitly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

/// Negative-node report for a density-like field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NegativityReport {
    pub fraction: f64,
    pub mass: f64,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        ensure(values.len() == grid.len(), || {
            format!("expected {} values, got {}", grid.len(), values.len())
        })?;
        ensure(values.iter().all(|v| v.is_finite()), || "field values must be finite".into())?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_s {
            let s = grid.spot(i);
            for j in 0..grid.n_r {
                values.push(f(s, grid.rate(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_r + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Two-dimensional trapezoid rule of `weight(S, r)·u(S, r)`; the zero
    /// boundary nodes contribute nothing, so every interior node has weight
    /// `ΔS·Δr`.
    pub fn integrate(&self, weight: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let rates = g.rates();
        let mut total = 0.0;
        for i in 0..g.n_s {
            let s = g.spot(i);
            let row = &self.values[i * g.n_r..(i + 1) * g.n_r];
            let mut acc = 0.0;
            for (v, &r) in row.iter().zip(&rates) {
                acc += weight(s, r) * v;
            }
            total += acc;
        }
        total * g.ds() * g.dr()
    }

    pub fn mass(&self) -> f64 {
        let g = &self.grid;
        self.values.iter().sum::<f64>() * g.ds() * g.dr()
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
    }

    /// Trapezoid integral over r at each spot node of `weight(r)·u(S_i, r)`.
    pub fn rate_marginal(&self, weight: impl Fn(f64) -> f64) -> Vec<f64> {
        let g = &self.grid;
        let dr = g.dr();
        let w: Vec<f64> = g.rates().into_iter().map(weight).collect();
        self.values
            .chunks_exact(g.n_r)
            .map(|row| row.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() * dr)
            .collect()
    }

    /// Trapezoid integral over S at each rate node.
    pub fn spot_marginal(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.n_r];
        for row in self.values.chunks_exact(g.n_r) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let ds = g.ds();
        out.iter_mut().for_each(|o| *o *= ds);
        out
    }

    pub fn negativity(&self) -> NegativityReport {
        let g = &self.grid;
        let mut count = 0usize;
        let mut mass = 0.0;
        for &v in &self.values {
            if v < 0.0 {
                count += 1;
                mass -= v;
            }
        }
        NegativityReport {
            fraction: count as f64 / self.values.len() as f64,
            mass: mass * g.ds() * g.dr(),
        }
    }

    /// `∫∫ |u − v| dS dr` by the trapezoid rule.
    pub fn l1_distance(&self, other: &Field2D) -> Result<f64> {
        ensure(self.grid == other.grid, || "fields live on different grids".into())?;
        let g = &self.grid;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(s * g.ds() * g.dr())
    }

    /// Linear interpolation in S and r; zero outside the lattice.
    pub fn sample(&self, s: f64, r: f64) -> f64 {
        let g = &self.grid;
        let x = (s - g.s_min) / g.ds();
        let y = (r - g.r_min) / g.dr();
        if !(x > 0.0 && y > 0.0 && x < (g.n_s + 1) as f64 && y < (g.n_r + 1) as f64) {
            return 0.0;
        }
        let (xi, yi) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - xi as f64, y - yi as f64);
        // lattice index k (0..=n+1) maps to interior index k-1
        let node = |a: usize, b: usize| -> f64 {
            if a == 0 || b == 0 || a > g.n_s || b > g.n_r {
                0.0
            } else {
                self.at(a - 1, b - 1)
            }
        };
        let v00 = node(xi, yi);
        let v10 = node(xi + 1, yi);
        let v01 = node(xi, yi + 1);
        let v11 = node(xi + 1, yi + 1);
        (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11)
    }
}
