//! Initial-data presets. All presets give `n0 > 0`, `c0` inside `[0, C_M]`
//! and a divergence-free `u0` whose L2 norm equals the requested amplitude.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_norm_vec, max_value, min_value, BcMode, Grid, ScalarField, VectorField};
use crate::noise::{eigenmodes, gaussian};
use crate::operators::{forward_vector, leray_spec};
use crate::spectral::SpectralOps;
use crate::stepper::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialPreset {
    UniformPlusBump,
    RandomSmooth,
    Benchmark,
}

impl InitialPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialPreset::UniformPlusBump => "uniform_plus_bump",
            InitialPreset::RandomSmooth => "random_smooth",
            InitialPreset::Benchmark => "benchmark",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform_plus_bump" => Some(InitialPreset::UniformPlusBump),
            "random_smooth" => Some(InitialPreset::RandomSmooth),
            "benchmark" => Some(InitialPreset::Benchmark),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialParams {
    pub preset: InitialPreset,
    pub seed: u64,
    /// L2 norm of `u0`.
    pub amplitude: f64,
}

impl Default for InitialParams {
    fn default() -> Self {
        InitialParams {
            preset: InitialPreset::UniformPlusBump,
            seed: 0,
            amplitude: 0.2,
        }
    }
}

/// Height and width of the density bump.
pub const BUMP_HEIGHT: f64 = 2.0;
pub const BUMP_WIDTH: f64 = 0.1;

/// Exact mass of the `UniformPlusBump` density on `grid`.
pub fn bump_mass(grid: &Grid) -> f64 {
    let s = BUMP_WIDTH * grid.lx.min(grid.ly);
    grid.area() + 2.0 * PI * s * s * BUMP_HEIGHT
}

/// Periodized Gaussian centred in the domain, summed over nearby images.
fn bump(grid: Grid) -> ScalarField {
    let s = BUMP_WIDTH * grid.lx.min(grid.ly);
    let (cx, cy) = (0.5 * grid.lx, 0.5 * grid.ly);
    ScalarField::from_fn(grid, |x, y| {
        let mut v = 0.0;
        for i in -3..=3 {
            for j in -3..=3 {
                let dx = x - cx + i as f64 * grid.lx;
                let dy = y - cy + j as f64 * grid.ly;
                v += (-(dx * dx + dy * dy) / (2.0 * s * s)).exp();
            }
        }
        BUMP_HEIGHT * v
    })
}

/// Random trigonometric polynomial with wavenumbers up to `kmax`, compatible
/// with the grid's boundary mode. `odd_x`/`odd_y` select sine factors on the
/// Neumann square (used for velocity components).
fn random_band_limited(grid: Grid, kmax: i64, seed: u64, stream: usize, odd_x: bool, odd_y: bool) -> ScalarField {
    let mut terms: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut counter = 0u64;
    let mut draw = || {
        counter += 1;
        gaussian(seed, stream, counter)
    };
    match grid.bc_mode {
        BcMode::Torus => {
            for kx in -kmax..=kmax {
                for ky in -kmax..=kmax {
                    if kx == 0 && ky == 0 {
                        continue;
                    }
                    terms.push((kx as f64, ky as f64, draw(), draw()));
                }
            }
            let (lx, ly) = (grid.lx, grid.ly);
            ScalarField::from_fn(grid, |x, y| {
                terms
                    .iter()
                    .map(|(kx, ky, a, b)| {
                        let arg = 2.0 * PI * (kx * x / lx + ky * y / ly);
                        a * arg.cos() + b * arg.sin()
                    })
                    .sum()
            })
        }
        BcMode::SquareNeumann => {
            for kx in 0..=2 * kmax {
                for ky in 0..=2 * kmax {
                    if (kx == 0 && ky == 0) || (odd_x && kx == 0) || (odd_y && ky == 0) {
                        continue;
                    }
                    terms.push((kx as f64, ky as f64, draw(), 0.0));
                }
            }
            let (lx, ly) = (grid.lx, grid.ly);
            let fx = move |k: f64, x: f64| if odd_x { (PI * k * x / lx).sin() } else { (PI * k * x / lx).cos() };
            let fy = move |k: f64, y: f64| if odd_y { (PI * k * y / ly).sin() } else { (PI * k * y / ly).cos() };
            ScalarField::from_fn(grid, |x, y| terms.iter().map(|(kx, ky, a, _)| a * fx(*kx, x) * fy(*ky, y)).sum())
        }
    }
}

/// Helmholtz-Leray projection that honours the reflection parities on the square.
pub fn project_solenoidal(v: &VectorField) -> VectorField {
    let ops = SpectralOps::for_grid(&v.grid);
    let (mut cx, mut cy) = forward_vector(&ops, v);
    leray_spec(&ops, &mut cx, &mut cy);
    VectorField {
        grid: v.grid,
        x: ops.backward(&cx),
        y: ops.backward(&cy),
    }
}

fn normalized(v: VectorField, amplitude: f64) -> VectorField {
    let norm = l2_norm_vec(&v);
    if amplitude == 0.0 || norm == 0.0 {
        VectorField::zeros(v.grid)
    } else {
        v.scaled(amplitude / norm)
    }
}

fn random_velocity(grid: Grid, seed: u64, amplitude: f64) -> VectorField {
    let vx = random_band_limited(grid, 2, seed, 3, true, false);
    let vy = random_band_limited(grid, 2, seed, 4, false, true);
    normalized(project_solenoidal(&VectorField::from_components(vx, vy)), amplitude)
}

fn taylor_green(grid: Grid, amplitude: f64) -> VectorField {
    let a = 2.0 * PI / grid.lx;
    let b = 2.0 * PI / grid.ly;
    let v = VectorField::from_fn(grid, |x, y| {
        (b * (a * x).sin() * (b * y).cos(), -a * (a * x).cos() * (b * y).sin())
    });
    normalized(v, amplitude)
}

/// Rescales `f` to the range `[centre - half, centre + half]` around its mean shape.
fn unit_sup(f: ScalarField) -> ScalarField {
    let s = max_value(&f).abs().max(min_value(&f).abs());
    if s == 0.0 {
        f
    } else {
        f.scaled(1.0 / s)
    }
}

/// Initial data `(n0, c0, u0)` for a preset; `c_max` is the bound `C_M`.
pub fn default_initial(grid: Grid, params: &InitialParams, c_max: f64) -> Result<State> {
    if !(params.amplitude >= 0.0 && params.amplitude.is_finite()) {
        return Err(Error::config(
            "initial.amplitude",
            format!("must be nonnegative, got {}", params.amplitude),
        ));
    }
    if !(c_max > 0.0) {
        return Err(Error::config("coefficients.c_max", "must be positive"));
    }
    let (lx, ly) = (grid.lx, grid.ly);
    let (n, c, u) = match params.preset {
        InitialPreset::UniformPlusBump => {
            let n = bump(grid).map(|v| 1.0 + v);
            let c = ScalarField::from_fn(grid, |x, y| {
                c_max * (0.5 + 0.25 * (2.0 * PI * x / lx).cos() * (2.0 * PI * y / ly).cos())
            });
            (n, c, random_velocity(grid, params.seed, params.amplitude))
        }
        InitialPreset::RandomSmooth => {
            let f = unit_sup(random_band_limited(grid, 2, params.seed, 1, false, false));
            let g = unit_sup(random_band_limited(grid, 2, params.seed, 2, false, false));
            let n = f.map(|v| 1.0 + 0.5 * v);
            let c = g.map(|v| c_max * (0.5 + 0.3 * v));
            (n, c, random_velocity(grid, params.seed, params.amplitude))
        }
        InitialPreset::Benchmark => {
            let n = ScalarField::from_fn(grid, |x, y| {
                1.0 + 0.5 * (2.0 * PI * x / lx).cos() * (2.0 * PI * y / ly).cos()
            });
            let c = ScalarField::from_fn(grid, |x, y| {
                c_max * (0.5 + 0.2 * ((2.0 * PI * x / lx).cos() + (2.0 * PI * y / ly).cos()))
            });
            (n, c, taylor_green(grid, params.amplitude))
        }
    };
    State::new(n, c, u)
}

/// Adds `delta0 e_1` to the velocity, where `e_1` is the first Stokes eigenmode.
pub fn perturb_velocity(state: &State, delta0: f64) -> Result<State> {
    let grid = state.u.grid;
    if grid.bc_mode != BcMode::Torus {
        return Err(Error::contract("velocity perturbations are defined on the torus"));
    }
    let e1 = eigenmodes(&grid, 1)?[0].field(&grid);
    let mut out = state.clone();
    out.u = state.u.lin_comb(1.0, &e1, delta0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::integrate;
    use crate::stepper::velocity_divergence;

    fn check_b1(s: &State, c_max: f64) {
        assert!(min_value(&s.n) >= 0.0);
        assert!(min_value(&s.c) >= 0.0 && max_value(&s.c) <= c_max);
        assert!(velocity_divergence(&s.u) <= 1e-11, "{}", velocity_divergence(&s.u));
    }

    #[test]
    fn presets_satisfy_initial_conditions() {
        for mode in [BcMode::Torus, BcMode::SquareNeumann] {
            let g = Grid::new(32, 32, 1.0, 1.0, mode).unwrap();
            for preset in [InitialPreset::UniformPlusBump, InitialPreset::RandomSmooth, InitialPreset::Benchmark] {
                let p = InitialParams { preset, seed: 9, amplitude: 0.5 };
                let s = default_initial(g, &p, 2.0).unwrap();
                check_b1(&s, 2.0);
                assert!((l2_norm_vec(&s.u) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bump_mass_is_analytic() {
        for mode in [BcMode::Torus, BcMode::SquareNeumann] {
            let g = Grid::new(64, 64, 1.0, 1.0, mode).unwrap();
            let s = default_initial(g, &InitialParams::default(), 1.0).unwrap();
            assert!((integrate(&s.n) - bump_mass(&g)).abs() < 1e-12);
            assert!(min_value(&s.n) >= 1.0);
        }
    }

    #[test]
    fn random_smooth_is_seed_reproducible() {
        let g = Grid::unit_torus(16).unwrap();
        let p = InitialParams { preset: InitialPreset::RandomSmooth, seed: 4, amplitude: 0.1 };
        assert_eq!(default_initial(g, &p, 1.0).unwrap(), default_initial(g, &p, 1.0).unwrap());
        let q = InitialParams { seed: 5, ..p };
        assert_ne!(default_initial(g, &p, 1.0).unwrap().n, default_initial(g, &q, 1.0).unwrap().n);
    }

    #[test]
    fn perturbation_has_requested_norm() {
        let g = Grid::unit_torus(16).unwrap();
        let s = default_initial(g, &InitialParams { amplitude: 0.0, ..Default::default() }, 1.0).unwrap();
        let p = perturb_velocity(&s, 1e-4).unwrap();
        assert!((l2_norm_vec(&p.u) - 1e-4).abs() < 1e-16);
    }
}
