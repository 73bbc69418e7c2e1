//! Spectral differential operators, the Helmholtz-Leray projection and the
//! heat/Stokes semigroups.
//!
//! Nonlinear fluxes are evaluated pseudo-spectrally with the 2/3 rule: both
//! factors are truncated to the inner band before the pointwise product, and
//! the product spectrum is truncated again before differentiation.

use rustfft::num_complex::Complex64;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{sup_norm_vec, BcMode, Grid, ScalarField, VectorField};
use crate::spectral::{Parity, SpectralOps};

use Parity::{Even, Odd};

pub fn gradient(f: &ScalarField) -> VectorField {
    let ops = SpectralOps::for_grid(&f.grid);
    let c = ops.forward_scalar(&f.values);
    VectorField {
        grid: f.grid,
        x: ops.backward(&ops.ddx(&c)),
        y: ops.backward(&ops.ddy(&c)),
    }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let ops = SpectralOps::for_grid(&v.grid);
    let (cx, cy) = forward_vector(&ops, v);
    ScalarField {
        grid: v.grid,
        values: ops.backward(&ops.div(&cx, &cy)),
    }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let ops = SpectralOps::for_grid(&f.grid);
    let c = ops.forward_scalar(&f.values);
    ScalarField {
        grid: f.grid,
        values: ops.backward(&ops.laplacian(&c)),
    }
}

/// Forward transforms of the two components with their reflection parities.
pub(crate) fn forward_vector(ops: &SpectralOps, v: &VectorField) -> (Vec<Complex64>, Vec<Complex64>) {
    (ops.forward(&v.x, Odd, Even), ops.forward(&v.y, Even, Odd))
}

/// Largest tolerated `max |div u|` for a field treated as divergence-free.
pub fn divergence_tolerance(u: &VectorField) -> f64 {
    let g = &u.grid;
    let kmax = std::f64::consts::PI * (g.nx as f64 / g.lx).max(g.ny as f64 / g.ly);
    1e-9 * (1.0 + sup_norm_vec(u) * kmax)
}

/// `max |div u|` evaluated on the periodic grid the velocity lives on.
pub fn max_divergence(u: &VectorField) -> f64 {
    let v = u.clone().with_grid(u.grid.as_torus());
    divergence(&v)
        .values
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
}

/// Truncates `values` to the 2/3 band and returns the physical samples.
pub(crate) fn dealias(ops: &SpectralOps, values: &[f64], px: Parity, py: Parity) -> Vec<f64> {
    let mut c = ops.forward(values, px, py);
    ops.truncate(&mut c);
    ops.backward(&c)
}

/// Spectrum of `div (fx, fy)` for flux samples with gradient-like parities.
pub(crate) fn flux_divergence_spec(ops: &SpectralOps, fx: &[f64], fy: &[f64]) -> Vec<Complex64> {
    let mut cx = ops.forward(fx, Odd, Even);
    let mut cy = ops.forward(fy, Even, Odd);
    ops.truncate(&mut cx);
    ops.truncate(&mut cy);
    ops.div(&cx, &cy)
}

/// Spectrum of `div(u f)` with `u` and `f` already dealiased.
pub(crate) fn advection_spec(ops: &SpectralOps, ux: &[f64], uy: &[f64], f: &[f64]) -> Vec<Complex64> {
    let fx: Vec<f64> = ux.iter().zip(f).map(|(a, b)| a * b).collect();
    let fy: Vec<f64> = uy.iter().zip(f).map(|(a, b)| a * b).collect();
    flux_divergence_spec(ops, &fx, &fy)
}

/// `div(u f)` in flux form with 2/3-rule dealiasing. `u` must be divergence-free.
pub fn advect_conservative(u: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    if !u.grid.same_shape(&f.grid) {
        return Err(Error::contract("velocity and scalar live on different grids"));
    }
    let div = max_divergence(u);
    let tol = divergence_tolerance(u);
    if div > tol {
        return Err(Error::contract(format!(
            "advecting velocity is not divergence-free: max |div u| = {div:e} > {tol:e}"
        )));
    }
    let ops = SpectralOps::for_grid(&f.grid);
    let ux = dealias(&ops, &u.x, Odd, Even);
    let uy = dealias(&ops, &u.y, Even, Odd);
    let fd = dealias(&ops, &f.values, Even, Even);
    Ok(ScalarField {
        grid: f.grid,
        values: ops.backward(&advection_spec(&ops, &ux, &uy, &fd)),
    })
}

/// Spectrum of `div(chi(c) n grad c)`; inputs are physical samples.
pub(crate) fn chemotaxis_spec(
    ops: &SpectralOps,
    n: &[f64],
    c_spec: &[Complex64],
    coeffs: &CoefficientSet,
) -> Vec<Complex64> {
    let ct = ops.truncated(c_spec);
    let c_d = ops.backward(&ct);
    let gx = ops.backward(&ops.ddx(&ct));
    let gy = ops.backward(&ops.ddy(&ct));
    let n_d = dealias(ops, n, Even, Even);
    let weight: Vec<f64> = n_d
        .iter()
        .zip(&c_d)
        .map(|(nv, cv)| coeffs.chi.value(*cv) * nv)
        .collect();
    let fx: Vec<f64> = weight.iter().zip(&gx).map(|(w, g)| w * g).collect();
    let fy: Vec<f64> = weight.iter().zip(&gy).map(|(w, g)| w * g).collect();
    flux_divergence_spec(ops, &fx, &fy)
}

/// `div(chi(c) n grad c)` in flux form with dealiasing.
pub fn chemotaxis_flux(n: &ScalarField, c: &ScalarField, coeffs: &CoefficientSet) -> ScalarField {
    let ops = SpectralOps::for_grid(&n.grid);
    let cs = ops.forward_scalar(&c.values);
    ScalarField {
        grid: n.grid,
        values: ops.backward(&chemotaxis_spec(&ops, &n.values, &cs, coeffs)),
    }
}

/// In-place Leray projection of a torus spectrum: `v - xi (xi . v) / |xi|^2`.
pub(crate) fn leray_spec(ops: &SpectralOps, vx: &mut [Complex64], vy: &mut [Complex64]) {
    for i in 0..ops.sx {
        for j in 0..ops.sy {
            let k2 = ops.k2(i, j);
            if k2 == 0.0 {
                continue;
            }
            let p = i * ops.sy + j;
            let (kx, ky) = (ops.kx[i], ops.ky[j]);
            let dot = vx[p] * kx + vy[p] * ky;
            vx[p] -= dot * (kx / k2);
            vy[p] -= dot * (ky / k2);
        }
    }
}

fn require_torus(grid: &Grid, what: &str) -> Result<()> {
    if grid.bc_mode != BcMode::Torus {
        return Err(Error::contract(format!("{what} is only available on the torus")));
    }
    Ok(())
}

/// Helmholtz-Leray projection onto divergence-free fields (torus only).
pub fn leray_project(v: &VectorField) -> Result<VectorField> {
    require_torus(&v.grid, "leray_project")?;
    let ops = SpectralOps::for_grid(&v.grid);
    let (mut cx, mut cy) = forward_vector(&ops, v);
    leray_spec(&ops, &mut cx, &mut cy);
    Ok(VectorField {
        grid: v.grid,
        x: ops.backward(&cx),
        y: ops.backward(&cy),
    })
}

/// Per-mode decay factors `exp(-kappa |xi|^2 t)` for one `(kappa, t)` pair.
///
/// The decay uses the full wavenumber, so the Nyquist modes are damped too.
#[derive(Clone, Debug)]
pub struct SemigroupKernel {
    pub grid: Grid,
    pub diffusivity: f64,
    pub t: f64,
    factors: Vec<f64>,
}

impl SemigroupKernel {
    pub fn new(grid: Grid, diffusivity: f64, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::contract(format!("semigroup time must be >= 0, got {t}")));
        }
        if !(diffusivity > 0.0) || !diffusivity.is_finite() {
            return Err(Error::contract(format!(
                "diffusivity must be > 0, got {diffusivity}"
            )));
        }
        let ops = SpectralOps::for_grid(&grid);
        let (lx, ly) = match grid.bc_mode {
            BcMode::Torus => (grid.lx, grid.ly),
            BcMode::SquareNeumann => (2.0 * grid.lx, 2.0 * grid.ly),
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut factors = Vec::with_capacity(ops.len());
        for i in 0..ops.sx {
            let kx = two_pi * ops.kx_int[i] as f64 / lx;
            for j in 0..ops.sy {
                let ky = two_pi * ops.ky_int[j] as f64 / ly;
                factors.push((-diffusivity * (kx * kx + ky * ky) * t).exp());
            }
        }
        Ok(SemigroupKernel {
            grid,
            diffusivity,
            t,
            factors,
        })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn apply_spec(&self, c: &mut [Complex64]) {
        for (v, f) in c.iter_mut().zip(&self.factors) {
            *v *= *f;
        }
    }

    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        if self.t == 0.0 {
            return f.clone();
        }
        let ops = SpectralOps::for_grid(&f.grid);
        let mut c = ops.forward_scalar(&f.values);
        self.apply_spec(&mut c);
        ScalarField {
            grid: f.grid,
            values: ops.backward(&c),
        }
    }
}

/// `exp(t kappa Laplacian) f`
pub fn heat_semigroup(f: &ScalarField, t: f64, kappa: f64) -> Result<ScalarField> {
    Ok(SemigroupKernel::new(f.grid, kappa, t)?.apply(f))
}

/// `exp(-t nu A) u` with `A = -P Laplacian`; the mean of `u` is left untouched.
pub fn stokes_semigroup(u: &VectorField, t: f64, nu: f64) -> Result<VectorField> {
    require_torus(&u.grid, "stokes_semigroup")?;
    let kernel = SemigroupKernel::new(u.grid, nu, t)?;
    let ops = SpectralOps::for_grid(&u.grid);
    let (mut cx, mut cy) = forward_vector(&ops, u);
    leray_spec(&ops, &mut cx, &mut cy);
    kernel.apply_spec(&mut cx);
    kernel.apply_spec(&mut cy);
    Ok(VectorField {
        grid: u.grid,
        x: ops.backward(&cx),
        y: ops.backward(&cy),
    })
}
