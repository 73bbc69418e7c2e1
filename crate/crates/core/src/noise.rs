//! Truncated cylindrical Wiener process in the Stokes eigenbasis.
//!
//! The diffusion coefficient is affine and diagonal in the eigenbasis:
//! `sigma(u) dW = sum_i q_i (a_i + b_i <u, e_i>) e_i dW_i`.
//! Gaussian increments are counter-based: the draw for `(mode, step)` is a
//! pure function of `(seed, mode, step)`, so paths can be regenerated in any
//! order and coarsened by summation.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{inner_vec, Grid, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Cos,
    Sin,
}

/// One real divergence-free Fourier mode `sqrt(2/|O|) trig(xi . x) xi_perp / |xi|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenmode {
    pub kx: i64,
    pub ky: i64,
    pub phase: Phase,
    /// Eigenvalue `|xi|^2` of the Stokes operator.
    pub beta: f64,
}

impl Eigenmode {
    pub fn field(&self, grid: &Grid) -> VectorField {
        let xi_x = 2.0 * PI * self.kx as f64 / grid.lx;
        let xi_y = 2.0 * PI * self.ky as f64 / grid.ly;
        let norm = (xi_x * xi_x + xi_y * xi_y).sqrt();
        let (dx, dy) = (-xi_y / norm, xi_x / norm);
        let amp = (2.0 / grid.area()).sqrt();
        let phase = self.phase;
        VectorField::from_fn(grid.as_torus(), |x, y| {
            let arg = xi_x * x + xi_y * y;
            let s = amp
                * match phase {
                    Phase::Cos => arg.cos(),
                    Phase::Sin => arg.sin(),
                };
            (s * dx, s * dy)
        })
    }
}

/// Number of real divergence-free modes the grid resolves (Nyquist and mean excluded).
pub fn resolved_mode_count(grid: &Grid) -> usize {
    (grid.nx - 1) * (grid.ny - 1) - 1
}

/// The first `m` eigenmodes, ordered by eigenvalue, then wavevector, then phase.
pub fn eigenmodes(grid: &Grid, m: usize) -> Result<Vec<Eigenmode>> {
    let available = resolved_mode_count(grid);
    if m == 0 || m > available {
        return Err(Error::config(
            "noise.m",
            format!("must be in 1..={available} for a {}x{} grid, got {m}", grid.nx, grid.ny),
        ));
    }
    let kx_max = grid.nx as i64 / 2 - 1;
    let ky_max = grid.ny as i64 / 2 - 1;
    let mut modes = Vec::with_capacity(available);
    for kx in 0..=kx_max {
        for ky in -ky_max..=ky_max {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let xi_x = 2.0 * PI * kx as f64 / grid.lx;
            let xi_y = 2.0 * PI * ky as f64 / grid.ly;
            let beta = xi_x * xi_x + xi_y * xi_y;
            for phase in [Phase::Cos, Phase::Sin] {
                modes.push(Eigenmode { kx, ky, phase, beta });
            }
        }
    }
    modes.sort_by(|a, b| {
        a.beta
            .partial_cmp(&b.beta)
            .unwrap_or(Ordering::Equal)
            .then(a.kx.cmp(&b.kx))
            .then(a.ky.cmp(&b.ky))
            .then((a.phase == Phase::Sin).cmp(&(b.phase == Phase::Sin)))
    });
    modes.truncate(m);
    Ok(modes)
}

/// First `m` orthonormal divergence-free eigenfields of the Stokes operator.
pub fn eigenbasis(grid: &Grid, m: usize) -> Result<Vec<VectorField>> {
    Ok(eigenmodes(grid, m)?
        .iter()
        .map(|mode| mode.field(grid))
        .collect())
}

/// Parameters that generate a [`NoiseModel`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub m: usize,
    /// Decay exponent in `q_i = q0 (beta_i / beta_1)^(-p)`.
    pub p: f64,
    pub q0: f64,
    pub a_scale: f64,
    pub b_scale: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            m: 16,
            p: 1.5,
            q0: 1.0,
            a_scale: 1.0,
            b_scale: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub grid: Grid,
    pub modes: Vec<Eigenmode>,
    pub basis: Vec<VectorField>,
    pub q: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn from_params(grid: &Grid, params: &NoiseParams) -> Result<Self> {
        if !(params.p > 1.0) {
            return Err(Error::config("noise.p", format!("must exceed 1, got {}", params.p)));
        }
        for (name, v) in [("q0", params.q0), ("a_scale", params.a_scale), ("b_scale", params.b_scale)] {
            if !v.is_finite() {
                return Err(Error::config(format!("noise.{name}"), "must be finite"));
            }
        }
        let modes = eigenmodes(grid, params.m)?;
        let beta1 = modes[0].beta;
        let q = modes
            .iter()
            .map(|md| params.q0 * (md.beta / beta1).powf(-params.p))
            .collect();
        let m = modes.len();
        Self::with_modes(grid, modes, q, vec![params.a_scale; m], vec![params.b_scale; m], params.seed)
    }

    /// Explicit per-mode weights.
    pub fn with_coefficients(grid: &Grid, q: Vec<f64>, a: Vec<f64>, b: Vec<f64>, seed: u64) -> Result<Self> {
        let modes = eigenmodes(grid, q.len())?;
        Self::with_modes(grid, modes, q, a, b, seed)
    }

    fn with_modes(
        grid: &Grid,
        modes: Vec<Eigenmode>,
        q: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let m = modes.len();
        if a.len() != m || b.len() != m {
            return Err(Error::contract(format!(
                "noise coefficient arrays must have length {m} (a: {}, b: {})",
                a.len(),
                b.len()
            )));
        }
        let basis = modes.iter().map(|md| md.field(grid)).collect();
        Ok(NoiseModel {
            grid: grid.as_torus(),
            modes,
            basis,
            q,
            a,
            b,
            seed,
        })
    }

    /// A model whose every coefficient vanishes (deterministic dynamics).
    pub fn silent(grid: &Grid) -> Self {
        Self::with_coefficients(grid, vec![0.0], vec![0.0], vec![0.0], 0).expect("one mode always fits")
    }

    pub fn m(&self) -> usize {
        self.modes.len()
    }

    /// `sigma = 0` identically.
    pub fn is_silent(&self) -> bool {
        self.q
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .all(|(q, (a, b))| *q == 0.0 || (*a == 0.0 && *b == 0.0))
    }

    /// Keeps only the first `m` modes (`sigma_m = P_m sigma`).
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::config(
                "noise.m",
                format!("truncation level must be in 1..={}, got {m}", self.m()),
            ));
        }
        Ok(NoiseModel {
            grid: self.grid,
            modes: self.modes[..m].to_vec(),
            basis: self.basis[..m].to_vec(),
            q: self.q[..m].to_vec(),
            a: self.a[..m].to_vec(),
            b: self.b[..m].to_vec(),
            seed: self.seed,
        })
    }

    /// Coordinates `<u, e_i>`.
    pub fn coordinates(&self, u: &VectorField) -> Vec<f64> {
        let u = u.clone().with_grid(self.grid);
        self.basis.iter().map(|e| inner_vec(&u, e)).collect()
    }

    /// Per-mode amplitudes `q_i (a_i + b_i <u, e_i>)`.
    pub fn amplitudes(&self, u: &VectorField) -> Vec<f64> {
        self.coordinates(u)
            .iter()
            .enumerate()
            .map(|(i, c)| self.q[i] * (self.a[i] + self.b[i] * c))
            .collect()
    }

    /// Lipschitz constant `max_i q_i^2 b_i^2` of `sigma` in the Hilbert-Schmidt norm.
    pub fn lipschitz_constant(&self) -> f64 {
        self.q
            .iter()
            .zip(&self.b)
            .fold(0.0_f64, |m, (q, b)| m.max(q * q * b * b))
    }

    /// Constant `C` in `||sigma(u)||^2 <= C (1 + ||u||^2)`.
    pub fn growth_constant(&self) -> f64 {
        let additive: f64 = self.q.iter().zip(&self.a).map(|(q, a)| q * q * a * a).sum();
        (2.0 * additive).max(2.0 * self.lipschitz_constant())
    }
}

/// `sigma(u) dW` as a divergence-free field.
pub fn sigma_apply(model: &NoiseModel, u: &VectorField, dw: &[f64]) -> Result<VectorField> {
    if dw.len() != model.m() {
        return Err(Error::contract(format!(
            "noise increment has length {}, model expects {}",
            dw.len(),
            model.m()
        )));
    }
    Ok(sigma_from_amplitudes(model, &model.amplitudes(u), dw))
}

/// `sum_i amps_i dW_i e_i` for precomputed amplitudes.
pub fn sigma_from_amplitudes(model: &NoiseModel, amps: &[f64], dw: &[f64]) -> VectorField {
    combine(model, amps.iter().zip(dw).map(|(a, w)| a * w))
}

fn combine(model: &NoiseModel, weights: impl Iterator<Item = f64>) -> VectorField {
    let mut out = VectorField::zeros(model.grid);
    for (w, e) in weights.zip(&model.basis) {
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.x.iter_mut().zip(&e.x) {
            *o += w * v;
        }
        for (o, v) in out.y.iter_mut().zip(&e.y) {
            *o += w * v;
        }
    }
    out
}

/// `||sigma(u)||^2` in the Hilbert-Schmidt norm `L_2(U, H)`.
pub fn hs_norm_sq(model: &NoiseModel, u: &VectorField) -> f64 {
    model.amplitudes(u).iter().map(|a| a * a).sum()
}

/// `||sigma(u1) - sigma(u2)||^2` in the Hilbert-Schmidt norm.
pub fn hs_norm_sq_diff(model: &NoiseModel, u1: &VectorField, u2: &VectorField) -> f64 {
    let (c1, c2) = (model.coordinates(u1), model.coordinates(u2));
    (0..model.m())
        .map(|i| {
            let d = model.q[i] * model.b[i] * (c1[i] - c2[i]);
            d * d
        })
        .sum()
}

/// Orthogonal projection onto `span{e_1, ..., e_m}`.
pub fn galerkin_project(model: &NoiseModel, v: &VectorField, m: usize) -> Result<VectorField> {
    if m > model.m() {
        return Err(Error::config(
            "noise.m",
            format!("projection level {m} exceeds model truncation {}", model.m()),
        ));
    }
    let coords = model.coordinates(v);
    Ok(combine(model, coords.into_iter().take(m)).with_grid(v.grid))
}

/// Standard normal draw for `(seed, mode, step)`: one ChaCha stream per mode,
/// four 32-bit words per step, Box-Muller on two 53-bit uniforms.
pub fn gaussian(seed: u64, mode: usize, step: u64) -> f64 {
    let mut column = GaussianColumn::new(seed, mode, step);
    column.next_value()
}

struct GaussianColumn {
    rng: ChaCha8Rng,
}

impl GaussianColumn {
    fn new(seed: u64, mode: usize, start_step: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(mode as u64);
        rng.set_word_pos(4 * start_step as u128);
        GaussianColumn { rng }
    }

    fn next_value(&mut self) -> f64 {
        let scale = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * scale;
        let u2 = (self.rng.next_u64() >> 11) as f64 * scale;
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Brownian increments on a uniform time grid, stored step-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    pub dt: f64,
    pub steps: usize,
    pub m: usize,
    /// Seed the path was drawn from; `None` for hand-built paths.
    pub seed: Option<u64>,
    increments: Vec<f64>,
}

impl WienerPath {
    /// Increments for step `s` (length `m`).
    pub fn increment(&self, s: usize) -> &[f64] {
        &self.increments[s * self.m..(s + 1) * self.m]
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// A path with all increments zero.
    pub fn zeros(m: usize, steps: usize, dt: f64) -> Self {
        WienerPath {
            dt,
            steps,
            m,
            seed: None,
            increments: vec![0.0; m * steps],
        }
    }

    /// Sums blocks of `factor` consecutive increments.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::config(
                "time.dt",
                format!("coarsening factor {factor} does not divide {} steps", self.steps),
            ));
        }
        let steps = self.steps / factor;
        let mut increments = vec![0.0; steps * self.m];
        for s in 0..steps {
            for f in 0..factor {
                let src = self.increment(s * factor + f);
                for (d, v) in increments[s * self.m..(s + 1) * self.m].iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
        Ok(WienerPath {
            dt: self.dt * factor as f64,
            steps,
            m: self.m,
            seed: self.seed,
            increments,
        })
    }

    /// Path coarsened to time step `dt` (must be an integer multiple of the fine step).
    pub fn coarsen_to(&self, dt: f64) -> Result<Self> {
        let ratio = dt / self.dt;
        let factor = ratio.round();
        if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "time.dt",
                format!("dt = {dt} is not a multiple of the path step {}", self.dt),
            ));
        }
        self.coarsen(factor as usize)
    }

    /// Column `i` as a time series.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.steps).map(|s| self.increments[s * self.m + i]).collect()
    }
}

/// Samples a path of `T / dt` steps for every mode of `model`.
pub fn wiener_path(model: &NoiseModel, horizon: f64, dt: f64) -> Result<WienerPath> {
    sample_path(model.seed, model.m(), horizon, dt)
}

/// As [`wiener_path`] with an explicit seed and column count.
pub fn sample_path(seed: u64, m: usize, horizon: f64, dt: f64) -> Result<WienerPath> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::config("time.dt", "horizon and step must be positive"));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-12 * ratio.max(1.0) {
        return Err(Error::config(
            "time.dt",
            format!("dt = {dt} does not divide T = {horizon}"),
        ));
    }
    let steps = steps as usize;
    let scale = dt.sqrt();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut col = GaussianColumn::new(seed, i, 0);
            (0..steps).map(|_| scale * col.next_value()).collect()
        })
        .collect();
    let mut increments = vec![0.0; steps * m];
    for (i, col) in columns.iter().enumerate() {
        for (s, v) in col.iter().enumerate() {
            increments[s * m + i] = *v;
        }
    }
    Ok(WienerPath {
        dt,
        steps,
        m,
        seed: Some(seed),
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{l2_norm_vec, BcMode, Grid};
    use crate::operators::{divergence, leray_project};

    fn grid() -> Grid {
        Grid::unit_torus(16).unwrap()
    }

    fn random_velocity(g: Grid, seed: u64) -> VectorField {
        let w = |i: usize| gaussian(seed, i, 0);
        let v = VectorField::from_fn(g, |x, y| {
            (
                w(0) * (2.0 * PI * y).sin() + w(1) * (4.0 * PI * (x + y)).cos() + w(2) * (2.0 * PI * x).cos(),
                w(3) * (2.0 * PI * x).cos() + w(4) * (6.0 * PI * y).sin() + w(5),
            )
        });
        leray_project(&v).unwrap()
    }

    #[test]
    fn basis_is_orthonormal_and_solenoidal() {
        let g = grid();
        let basis = eigenbasis(&g, 24).unwrap();
        for (i, ei) in basis.iter().enumerate() {
            assert!(divergence(ei).values.iter().all(|d| d.abs() < 1e-11));
            for (j, ej) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((inner_vec(ei, ej) - expected).abs() < 1e-10, "({i}, {j})");
            }
        }
    }

    #[test]
    fn first_eigenvalue_on_unit_torus() {
        let modes = eigenmodes(&grid(), 4).unwrap();
        assert!((modes[0].beta - 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!((modes[0].kx, modes[0].ky, modes[0].phase), (0, 1, Phase::Cos));
        assert_eq!((modes[2].kx, modes[2].ky), (1, 0));
        assert!(modes.windows(2).all(|w| w[0].beta <= w[1].beta));
    }

    #[test]
    fn too_many_modes_is_config_error() {
        let g = Grid::unit_torus(8).unwrap();
        assert!(eigenmodes(&g, resolved_mode_count(&g)).is_ok());
        assert!(matches!(
            eigenmodes(&g, resolved_mode_count(&g) + 1),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn paths_are_reproducible() {
        let g = grid();
        let model = NoiseModel::from_params(&g, &NoiseParams { seed: 99, ..Default::default() }).unwrap();
        let a = wiener_path(&model, 1.0, 1e-2).unwrap();
        let b = wiener_path(&model, 1.0, 1e-2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.increment(17)[3], 0.1 * gaussian(99, 3, 17));
        let other = NoiseModel { seed: 100, ..model };
        assert_ne!(wiener_path(&other, 1.0, 1e-2).unwrap(), a);
    }

    #[test]
    fn non_divisible_horizon_is_rejected() {
        assert!(matches!(sample_path(1, 2, 1.0, 0.3), Err(Error::Config { .. })));
    }

    #[test]
    fn increment_variance_matches_step() {
        let dt = 1e-3;
        let path = sample_path(5, 2, 100.0, dt).unwrap();
        for col in 0..2 {
            let xs = path.column(col);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!((var / dt - 1.0).abs() < 0.05, "column {col}: var/dt = {}", var / dt);
        }
        let k = 8;
        let coarse = path.coarsen(k).unwrap();
        let xs = coarse.column(0);
        let var = xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64;
        assert!((var / (k as f64 * dt) - 1.0).abs() < 0.05);
    }

    #[test]
    fn coarsening_sums_fine_increments() {
        let fine = sample_path(3, 4, 1.0, 0.125).unwrap();
        let coarse = fine.coarsen_to(0.25).unwrap();
        assert_eq!(coarse.steps, 4);
        for s in 0..4 {
            for i in 0..4 {
                let expected = fine.increment(2 * s)[i] + fine.increment(2 * s + 1)[i];
                assert_eq!(coarse.increment(s)[i], expected);
            }
        }
        assert!(fine.coarsen_to(0.3).is_err());
    }

    #[test]
    fn sigma_examples() {
        let g = grid();
        let m = 6;
        let q: Vec<f64> = (0..m).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let model = NoiseModel::with_coefficients(&g, q.clone(), vec![0.0; m], vec![0.7; m], 1).unwrap();
        let zero = sigma_apply(&model, &VectorField::zeros(g), &[0.3; 6]).unwrap();
        assert!(zero.x.iter().chain(&zero.y).all(|v| *v == 0.0));

        let additive = NoiseModel::with_coefficients(&g, q.clone(), vec![0.5; m], vec![0.0; m], 1).unwrap();
        let dw = [0.2, -0.1, 0.4, 0.0, 0.3, -0.6];
        let s1 = sigma_apply(&additive, &VectorField::zeros(g), &dw).unwrap();
        let s2 = sigma_apply(&additive, &random_velocity(g, 4), &dw).unwrap();
        assert_eq!(s1, s2);

        let affine = NoiseModel::with_coefficients(&g, q.clone(), vec![0.5; m], vec![0.7; m], 1).unwrap();
        let u = random_velocity(g, 8);
        let mut unit = [0.0; 6];
        unit[0] = 1.0;
        let out = sigma_apply(&affine, &u, &unit).unwrap();
        let e1 = &affine.basis[0];
        let coef = q[0] * (0.5 + 0.7 * inner_vec(&u, e1));
        let expected = e1.scaled(coef);
        for (a, b) in out.x.iter().zip(&expected.x).chain(out.y.iter().zip(&expected.y)) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(divergence(&out).values.iter().all(|d| d.abs() < 1e-11));
        assert!(matches!(sigma_apply(&affine, &u, &[1.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn hs_norm_examples() {
        let g = grid();
        let m = 5;
        let q: Vec<f64> = (0..m).map(|i| 0.5_f64.powi(i as i32)).collect();
        let a = vec![0.3, -0.2, 0.1, 0.4, 0.0];
        let model = NoiseModel::with_coefficients(&g, q.clone(), a.clone(), vec![0.9; m], 1).unwrap();
        let expected: f64 = q.iter().zip(&a).map(|(q, a)| q * q * a * a).sum();
        assert!((hs_norm_sq(&model, &VectorField::zeros(g)) - expected).abs() < 1e-15);

        let mult = NoiseModel::with_coefficients(&g, q, vec![0.0; m], vec![0.9; m], 1).unwrap();
        let u = random_velocity(g, 2);
        let h1 = hs_norm_sq(&mult, &u);
        let h2 = hs_norm_sq(&mult, &u.scaled(2.0));
        assert!((h2 - 4.0 * h1).abs() <= 1e-12 * h2);
    }

    #[test]
    fn lipschitz_bound_holds() {
        let g = grid();
        let m = 12;
        let q: Vec<f64> = (0..m).map(|i| 1.0 / (1.0 + i as f64).powf(1.5)).collect();
        let b: Vec<f64> = (0..m).map(|i| 0.2 + 0.1 * i as f64).collect();
        let model = NoiseModel::with_coefficients(&g, q, vec![0.1; m], b, 1).unwrap();
        let k = model.lipschitz_constant();
        for seed in 0..20 {
            let u1 = random_velocity(g, 2 * seed);
            let u2 = random_velocity(g, 2 * seed + 1);
            let lhs = hs_norm_sq_diff(&model, &u1, &u2);
            let rhs = k * l2_norm_vec(&u1.lin_comb(1.0, &u2, -1.0)).powi(2);
            assert!(lhs <= rhs * (1.0 + 1e-10), "seed {seed}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn galerkin_projection_properties() {
        let g = grid();
        let model = NoiseModel::from_params(&g, &NoiseParams { m: 40, ..Default::default() }).unwrap();
        let v = random_velocity(g, 11);
        let p = galerkin_project(&model, &v, 10).unwrap();
        let pp = galerkin_project(&model, &p, 10).unwrap();
        for (a, b) in p.x.iter().zip(&pp.x).chain(p.y.iter().zip(&pp.y)) {
            assert!((a - b).abs() < 1e-11);
        }
        assert!(l2_norm_vec(&p) <= l2_norm_vec(&v));

        let in_span = model.basis[2].lin_comb(0.5, &model.basis[7], -1.5);
        let back = galerkin_project(&model, &in_span, 10).unwrap();
        for (a, b) in back.x.iter().zip(&in_span.x) {
            assert!((a - b).abs() < 1e-11);
        }

        let mut last = f64::INFINITY;
        for m in [1, 5, 10, 20, 40] {
            let r = l2_norm_vec(&v.lin_comb(1.0, &galerkin_project(&model, &v, m).unwrap(), -1.0));
            assert!(r <= last + 1e-14);
            last = r;
        }
        assert!(matches!(galerkin_project(&model, &v, 41), Err(Error::Config { .. })));
    }

    #[test]
    fn neumann_grid_noise_lives_on_torus() {
        let g = Grid::new(8, 8, 1.0, 1.0, BcMode::SquareNeumann).unwrap();
        let model = NoiseModel::from_params(&g, &NoiseParams { m: 4, ..Default::default() }).unwrap();
        assert_eq!(model.grid.bc_mode, BcMode::Torus);
    }
}
