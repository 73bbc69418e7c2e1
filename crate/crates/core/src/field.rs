//! Grids, sampled scalar and vector fields, and rectangle-rule quadrature.
//!
//! Values are stored row-major with shape `(nx, ny)`: the sample at
//! `(ix, iy)` lives at `ix * ny + iy`. On the torus the sample points are
//! `x = ix * hx`; on the Neumann square they are cell centres
//! `x = (ix + 1/2) * hx`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralOps;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcMode {
    /// Doubly periodic domain.
    Torus,
    /// Square with zero normal derivative for scalar fields (cosine basis).
    SquareNeumann,
}

impl BcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BcMode::Torus => "torus",
            BcMode::SquareNeumann => "square_neumann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "torus" => Some(BcMode::Torus),
            "square_neumann" | "neumann" => Some(BcMode::SquareNeumann),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc_mode: BcMode,
}

/// Smallest accepted resolution along either axis.
pub const MIN_CELLS: usize = 8;

impl Grid {
    /// Builds a grid, rejecting non-power-of-two sizes and nonpositive lengths.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc_mode: BcMode) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < MIN_CELLS || !n.is_power_of_two() {
                return Err(Error::config(
                    format!("grid.{name}"),
                    format!("must be a power of two >= {MIN_CELLS}, got {n}"),
                ));
            }
        }
        for (name, l) in [("lx", lx), ("ly", ly)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config(
                    format!("grid.{name}"),
                    format!("must be positive and finite, got {l}"),
                ));
            }
        }
        Ok(Grid {
            nx,
            ny,
            lx,
            ly,
            bc_mode,
        })
    }

    /// Unit-square torus with `n x n` cells.
    pub fn unit_torus(n: usize) -> Result<Self> {
        Grid::new(n, n, 1.0, 1.0, BcMode::Torus)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    /// Physical coordinates of sample `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        match self.bc_mode {
            BcMode::Torus => (ix as f64 * self.hx(), iy as f64 * self.hy()),
            BcMode::SquareNeumann => ((ix as f64 + 0.5) * self.hx(), (iy as f64 + 0.5) * self.hy()),
        }
    }

    /// Same resolution and extent with periodic boundaries; the velocity
    /// always lives on this grid.
    pub fn as_torus(&self) -> Grid {
        Grid {
            bc_mode: BcMode::Torus,
            ..*self
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                let (x, y) = grid.point(ix, iy);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid.same_shape(&other.grid));
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.idx(ix, iy)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, vx: f64, vy: f64) -> Self {
        VectorField {
            grid,
            x: vec![vx; grid.len()],
            y: vec![vy; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                let (px, py) = grid.point(ix, iy);
                let (vx, vy) = f(px, py);
                x.push(vx);
                y.push(vy);
            }
        }
        VectorField { grid, x, y }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Self {
        debug_assert!(x.grid.same_shape(&y.grid));
        VectorField {
            grid: x.grid,
            x: x.values,
            y: y.values,
        }
    }

    pub fn x_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.x.clone(),
        }
    }

    pub fn y_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.y.clone(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        VectorField {
            grid: self.grid,
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &VectorField, b: f64) -> Self {
        let comb = |p: &[f64], q: &[f64]| -> Vec<f64> {
            p.iter().zip(q).map(|(&s, &t)| a * s + b * t).collect()
        };
        VectorField {
            grid: self.grid,
            x: comb(&self.x, &other.x),
            y: comb(&self.y, &other.y),
        }
    }

    /// Pointwise magnitude.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self
                .x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Re-labels the samples with another grid of identical shape.
    pub fn with_grid(mut self, grid: Grid) -> Self {
        debug_assert!(self.grid.same_shape(&grid));
        self.grid = grid;
        self
    }
}

/// Rectangle-rule integral `hx * hy * sum(f)`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid.cell_area() * f.values.iter().sum::<f64>()
}

/// L2 inner product of two scalar fields.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    f.grid.cell_area() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>()
}

/// L2 inner product of two vector fields.
pub fn inner_vec(v: &VectorField, w: &VectorField) -> f64 {
    let sx: f64 = v.x.iter().zip(&w.x).map(|(a, b)| a * b).sum();
    let sy: f64 = v.y.iter().zip(&w.y).map(|(a, b)| a * b).sum();
    v.grid.cell_area() * (sx + sy)
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    inner(f, f).sqrt()
}

pub fn l2_norm_vec(v: &VectorField) -> f64 {
    inner_vec(v, v).sqrt()
}

/// `||grad f||_{L2}` with the spectral gradient.
pub fn h1_seminorm(f: &ScalarField) -> f64 {
    SpectralOps::for_grid(&f.grid).grad_norm_sq(&f.values).sqrt()
}

/// `||grad v||_{L2}` summed over both components.
pub fn h1_seminorm_vec(v: &VectorField) -> f64 {
    let ops = SpectralOps::for_grid(&v.grid);
    (ops.grad_norm_sq(&v.x) + ops.grad_norm_sq(&v.y)).sqrt()
}

pub fn sup_norm(f: &ScalarField) -> f64 {
    f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sup_norm_vec(v: &VectorField) -> f64 {
    v.x.iter()
        .zip(&v.y)
        .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
}

pub fn min_value(f: &ScalarField) -> f64 {
    f.values.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_value(f: &ScalarField) -> f64 {
    f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing() {
        let g = Grid::new(64, 64, 1.0, 1.0, BcMode::Torus).unwrap();
        assert_eq!(g.hx(), 1.0 / 64.0);
        assert_eq!(g.hy(), 1.0 / 64.0);
        let g = Grid::new(8, 16, 2.0, 1.0, BcMode::Torus).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.0625);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        match Grid::new(7, 8, 1.0, 1.0, BcMode::Torus) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.nx"),
            other => panic!("expected config error, got {other:?}"),
        }
        assert!(Grid::new(4, 4, 1.0, 1.0, BcMode::Torus).is_err());
        assert!(Grid::new(8, 24, 1.0, 1.0, BcMode::Torus).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0, BcMode::Torus).is_err());
        assert!(Grid::new(8, 8, 1.0, -2.0, BcMode::Torus).is_err());
    }

    #[test]
    fn integrate_constants() {
        let g = Grid::unit_torus(16).unwrap();
        assert!((integrate(&ScalarField::constant(g, 1.0)) - 1.0).abs() < 1e-14);
        let g = Grid::new(16, 8, 2.0, 1.0, BcMode::Torus).unwrap();
        assert!((integrate(&ScalarField::constant(g, 3.0)) - 6.0).abs() < 1e-13);
    }

    #[test]
    fn integrate_sine_vanishes() {
        let g = Grid::unit_torus(8).unwrap();
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        // Brute-force sum written out independently of `integrate`.
        let mut brute = 0.0;
        for ix in 0..8 {
            for _ in 0..8 {
                brute += (2.0 * PI * ix as f64 / 8.0).sin() / 64.0;
            }
        }
        assert!(brute.abs() < 1e-12);
        assert!(integrate(&f).abs() < 1e-12);
    }

    #[test]
    fn norms_of_constant() {
        let g = Grid::unit_torus(16).unwrap();
        let f = ScalarField::constant(g, 2.0);
        assert!((l2_norm(&f) - 2.0).abs() < 1e-14);
        assert_eq!(sup_norm(&f), 2.0);
        assert_eq!(min_value(&f), 2.0);
        assert!(h1_seminorm(&f).abs() < 1e-14);
    }

    #[test]
    fn norms_of_sine() {
        let g = Grid::unit_torus(32).unwrap();
        let f = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        assert!((l2_norm(&f) - 0.5_f64.sqrt()).abs() < 1e-13);
        let expected = 2.0 * PI * 0.5_f64.sqrt();
        assert!((h1_seminorm(&f) - expected).abs() < 1e-11);
    }

    #[test]
    fn neumann_points_are_cell_centred() {
        let g = Grid::new(8, 8, 1.0, 1.0, BcMode::SquareNeumann).unwrap();
        assert_eq!(g.point(0, 0), (1.0 / 16.0, 1.0 / 16.0));
    }
}
