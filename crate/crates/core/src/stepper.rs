//! Stochastic exponential Euler integration of the coupled system.
//!
//! Each step freezes the nonlinear terms at the left endpoint and propagates
//! them, together with the current state and the noise increment, through the
//! exact diffusion semigroups:
//!
//! ```text
//! n' = S_delta(dt) [n - dt (div(u n) + div(chi(c) n grad c))]
//! c' = S_mu(dt)    [c - dt (div(u c) + k(c) n)]
//! u' = S_nu(dt)  P [u - dt (div(u (x) u) + n grad phi) + sigma(u) dW]
//! ```

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{integrate, max_value, min_value, BcMode, ScalarField, VectorField};
use crate::noise::{sigma_from_amplitudes, NoiseModel, WienerPath};
use crate::operators::{divergence_tolerance, forward_vector, leray_spec, SemigroupKernel};
use crate::spectral::{Parity, SpectralOps};

pub use crate::initial::{default_initial, perturb_velocity, InitialParams, InitialPreset};

use Parity::{Even, Odd};

/// Floor applied to `n` before square roots and logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Floor applied to `c` where `d/dc sqrt(k/chi)` may be singular at zero.
pub const CONCENTRATION_FLOOR: f64 = 1e-12;

/// Running left-endpoint time integrals carried by a [`State`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulators {
    /// `int ||grad sqrt(n)||^2`
    pub fisher: f64,
    /// `int ||grad u||^2`
    pub enstrophy: f64,
    /// `int sum_ij ||d_i d_j Psi - (sqrt(k/chi))'(c) d_i Psi d_j Psi||^2`
    pub hessian: f64,
    /// `int ||grad Psi||_{L4}^4`
    pub quartic: f64,
    /// `int int n |grad Psi|^2`
    pub cross: f64,
    /// `int ||sigma(u)||_HS^2`
    pub noise_hs: f64,
    /// `sum <sigma(u) dW, u>` (Ito sum)
    pub martingale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub n: ScalarField,
    pub c: ScalarField,
    pub u: VectorField,
    pub t: f64,
    pub step: u64,
    pub acc: Accumulators,
}

impl State {
    pub fn new(n: ScalarField, c: ScalarField, u: VectorField) -> Result<Self> {
        if !n.grid.same_shape(&c.grid) || !n.grid.same_shape(&u.grid) {
            return Err(Error::contract("n, c and u must share one grid"));
        }
        Ok(State {
            n,
            c,
            u,
            t: 0.0,
            step: 0,
            acc: Accumulators::default(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.n.is_finite() && self.c.is_finite() && self.u.is_finite()
    }
}

/// Instantaneous integrands of the dissipation accumulators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DissipationRates {
    pub fisher: f64,
    pub enstrophy: f64,
    pub hessian: f64,
    pub quartic: f64,
    pub cross: f64,
}

/// Evaluates the dissipation integrands for one snapshot.
pub fn dissipation_rates(n: &ScalarField, c: &ScalarField, u: &VectorField, coeffs: &CoefficientSet) -> DissipationRates {
    let ops = SpectralOps::for_grid(&n.grid);
    let (ux, uy) = ops.forward_pair(&u.x, (Odd, Even), &u.y, (Even, Odd));
    rates_with_velocity_spectra(&ops, n, c, &ux, &uy, coeffs)
}

fn rates_with_velocity_spectra(
    ops: &SpectralOps,
    n: &ScalarField,
    c: &ScalarField,
    ux: &[Complex64],
    uy: &[Complex64],
    coeffs: &CoefficientSet,
) -> DissipationRates {
    let enstrophy = ops.grad_norm_sq_spec(ux) + ops.grad_norm_sq_spec(uy);
    let sqrt_n: Vec<f64> = n.values.iter().map(|v| v.max(DENSITY_FLOOR).sqrt()).collect();
    let psi = coeffs.psi_field(c);
    let (sq, ps) = ops.forward_pair(&sqrt_n, (Even, Even), &psi.values, (Even, Even));
    let fisher = ops.grad_norm_sq_spec(&sq);
    let (sx, sy) = (ops.ddx(&ps), ops.ddy(&ps));
    let (px, py) = ops.backward_pair(&sx, &sy);
    let (pxx, pxy) = ops.backward_pair(&ops.ddx(&sx), &ops.ddy(&sx));
    let pyy = ops.backward(&ops.ddy(&sy));
    let (mut hessian, mut quartic, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..n.values.len() {
        let rho = coeffs.sqrt_ratio_d1(c.values[i].max(CONCENTRATION_FLOOR));
        let (gx, gy) = (px[i], py[i]);
        let hxx = pxx[i] - rho * gx * gx;
        let hxy = pxy[i] - rho * gx * gy;
        let hyy = pyy[i] - rho * gy * gy;
        hessian += hxx * hxx + 2.0 * hxy * hxy + hyy * hyy;
        let g2 = gx * gx + gy * gy;
        quartic += g2 * g2;
        cross += n.values[i] * g2;
    }
    let w = n.grid.cell_area();
    DissipationRates {
        fisher,
        enstrophy,
        hessian: hessian * w,
        quartic: quartic * w,
        cross: cross * w,
    }
}

#[derive(Clone, Debug)]
pub struct StepperConfig {
    pub dt: f64,
    pub horizon: f64,
    pub coefficients: CoefficientSet,
    pub noise: NoiseModel,
    pub cfl_safety: f64,
    pub clip_negative_n: bool,
    /// Record every `sample_stride`-th state in the trajectory.
    pub sample_stride: usize,
    /// Turn invariant-monitor breaches into errors.
    pub strict: bool,
    /// Advance the dissipation accumulators (costs a few transforms per step).
    pub track_dissipation: bool,
    pub thresholds: MonitorThresholds,
}

impl StepperConfig {
    pub fn new(dt: f64, horizon: f64, coefficients: CoefficientSet, noise: NoiseModel) -> Result<Self> {
        let cfg = StepperConfig {
            dt,
            horizon,
            coefficients,
            noise,
            cfl_safety: 0.8,
            clip_negative_n: false,
            sample_stride: 1,
            strict: false,
            track_dissipation: true,
            thresholds: MonitorThresholds::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Deterministic configuration with `sigma = 0`.
    pub fn deterministic(dt: f64, horizon: f64, coefficients: CoefficientSet) -> Result<Self> {
        let noise = NoiseModel::silent(&coefficients.phi.grid);
        Self::new(dt, horizon, coefficients, noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("time.T", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config(
                "time.cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        if self.sample_stride == 0 {
            return Err(Error::config("output.sample_stride", "must be at least 1"));
        }
        self.steps()?;
        let grid = self.coefficients.phi.grid;
        if grid.bc_mode == BcMode::SquareNeumann && !self.noise.is_silent() {
            return Err(Error::config(
                "noise",
                "the square_neumann mode supports deterministic velocity only; set q0 = 0",
            ));
        }
        if !self.noise.grid.same_shape(&grid) {
            return Err(Error::config("noise", "noise model and coefficients use different grids"));
        }
        Ok(())
    }

    /// Number of steps `T / dt`; `dt` must divide `T`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio {
            return Err(Error::config(
                "time.dt",
                format!("dt = {} does not divide T = {}", self.dt, self.horizon),
            ));
        }
        Ok(steps as usize)
    }
}

/// Largest step the CFL rule admits for `state`.
pub fn admissible_dt(state: &State, coeffs: &CoefficientSet, cfl_safety: f64) -> f64 {
    let grid = state.n.grid;
    let ops = SpectralOps::for_grid(&grid);
    let cs = ops.forward_scalar(&state.c.values);
    let gx = ops.backward(&ops.ddx(&cs));
    let gy = ops.backward(&ops.ddy(&cs));
    let mut drift = 0.0_f64;
    let mut speed = 0.0_f64;
    for i in 0..grid.len() {
        let g = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        drift = drift.max(coeffs.chi.value(state.c.values[i]) * g);
        let (ux, uy) = (state.u.x[i], state.u.y[i]);
        speed = speed.max((ux * ux + uy * uy).sqrt());
    }
    let denom = speed + drift;
    if denom > 0.0 {
        cfl_safety * grid.hx().min(grid.hy()) / denom
    } else {
        f64::INFINITY
    }
}

/// Reusable per-`dt` context: transform plans, semigroup factors, `grad phi`.
pub struct Stepper<'a> {
    cfg: &'a StepperConfig,
    dt: f64,
    ops: Arc<SpectralOps>,
    heat_n: SemigroupKernel,
    heat_c: SemigroupKernel,
    stokes: SemigroupKernel,
    phi_x: Vec<f64>,
    phi_y: Vec<f64>,
    phi_active: bool,
}

/// Spectra and dealiased samples of the state shared by all explicit terms.
struct Prepared {
    n_hat: Vec<Complex64>,
    c_hat: Vec<Complex64>,
    ux_hat: Vec<Complex64>,
    uy_hat: Vec<Complex64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
    n_d: Vec<f64>,
    c_d: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

struct Forcing {
    n: Vec<Complex64>,
    c: Vec<Complex64>,
    ux: Vec<Complex64>,
    uy: Vec<Complex64>,
}

fn check_finite(term: &str, values: &[f64], t: f64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            term: term.to_string(),
            t,
        })
    }
}

fn add_into(acc: &mut [Complex64], other: &[Complex64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a StepperConfig, dt: f64) -> Result<Self> {
        let coeffs = &cfg.coefficients;
        let grid = coeffs.phi.grid;
        let ops = SpectralOps::for_grid(&grid);
        let phi_hat = ops.truncated(&ops.forward_scalar(&coeffs.phi.values));
        let (phi_x, phi_y) = ops.backward_pair(&ops.ddx(&phi_hat), &ops.ddy(&phi_hat));
        Ok(Stepper {
            cfg,
            dt,
            heat_n: SemigroupKernel::new(grid, coeffs.delta, dt)?,
            heat_c: SemigroupKernel::new(grid, coeffs.mu, dt)?,
            stokes: SemigroupKernel::new(grid, coeffs.nu, dt)?,
            phi_x,
            phi_y,
            phi_active: coeffs.phi.values.iter().any(|v| *v != 0.0),
            ops,
        })
    }

    fn prepare(&self, state: &State) -> Prepared {
        let ops = &*self.ops;
        let (n_hat, c_hat) = ops.forward_pair(&state.n.values, (Even, Even), &state.c.values, (Even, Even));
        let (ux_hat, uy_hat) = ops.forward_pair(&state.u.x, (Odd, Even), &state.u.y, (Even, Odd));
        let (ux, uy) = ops.backward_pair(&ops.truncated(&ux_hat), &ops.truncated(&uy_hat));
        let ct = ops.truncated(&c_hat);
        let (n_d, c_d) = ops.backward_pair(&ops.truncated(&n_hat), &ct);
        let (gx, gy) = ops.backward_pair(&ops.ddx(&ct), &ops.ddy(&ct));
        Prepared {
            n_hat,
            c_hat,
            ux_hat,
            uy_hat,
            ux,
            uy,
            n_d,
            c_d,
            gx,
            gy,
        }
    }

    /// CFL bound from the sampled velocity and the dealiased chemotactic drift.
    fn admissible(&self, state: &State, p: &Prepared) -> f64 {
        let chi = &self.cfg.coefficients.chi;
        let mut speed = 0.0_f64;
        let mut drift = 0.0_f64;
        for i in 0..p.gx.len() {
            let (ux, uy) = (state.u.x[i], state.u.y[i]);
            speed = speed.max((ux * ux + uy * uy).sqrt());
            let g = (p.gx[i] * p.gx[i] + p.gy[i] * p.gy[i]).sqrt();
            drift = drift.max(chi.value(p.c_d[i]) * g);
        }
        let grid = state.n.grid;
        let denom = speed + drift;
        if denom > 0.0 {
            self.cfg.cfl_safety * grid.hx().min(grid.hy()) / denom
        } else {
            f64::INFINITY
        }
    }

    /// Spectra of the explicit right-hand sides (advection, chemotaxis,
    /// consumption, convection, buoyancy) with 2/3-rule dealiasing.
    fn forcing(&self, t: f64, p: &Prepared) -> Result<Forcing> {
        let ops = &*self.ops;
        let coeffs = &self.cfg.coefficients;
        let len = p.n_d.len();

        let mut fx = Vec::with_capacity(len);
        let mut fy = Vec::with_capacity(len);
        for i in 0..len {
            let w = coeffs.chi.value(p.c_d[i]) * p.n_d[i];
            fx.push(p.ux[i] * p.n_d[i] + w * p.gx[i]);
            fy.push(p.uy[i] * p.n_d[i] + w * p.gy[i]);
        }
        check_finite("advection and chemotaxis flux of n", &fx, t)?;
        check_finite("advection and chemotaxis flux of n", &fy, t)?;
        let fn_ = self.flux_divergence(&fx, &fy);

        let cx: Vec<f64> = p.ux.iter().zip(&p.c_d).map(|(a, b)| a * b).collect();
        let cy: Vec<f64> = p.uy.iter().zip(&p.c_d).map(|(a, b)| a * b).collect();
        check_finite("advection flux of c", &cx, t)?;
        check_finite("advection flux of c", &cy, t)?;
        let mut fc = self.flux_divergence(&cx, &cy);

        let consumption: Vec<f64> = p
            .n_d
            .iter()
            .zip(&p.c_d)
            .map(|(nv, cv)| coeffs.k.value(*cv) * nv)
            .collect();
        check_finite("consumption k(c) n", &consumption, t)?;
        let pxy: Vec<f64> = p.ux.iter().zip(&p.uy).map(|(a, b)| a * b).collect();
        let (mut cons, mut sxy) = ops.forward_pair(&consumption, (Even, Even), &pxy, (Odd, Odd));
        ops.truncate(&mut cons);
        ops.truncate(&mut sxy);
        add_into(&mut fc, &cons);

        let pxx: Vec<f64> = p.ux.iter().map(|a| a * a).collect();
        let pyy: Vec<f64> = p.uy.iter().map(|a| a * a).collect();
        check_finite("convection (u . grad) u", &pxx, t)?;
        check_finite("convection (u . grad) u", &pyy, t)?;
        let (mut sxx, mut syy) = ops.forward_pair(&pxx, (Even, Even), &pyy, (Even, Even));
        ops.truncate(&mut sxx);
        ops.truncate(&mut syy);
        let mut fux = ops.ddx(&sxx);
        add_into(&mut fux, &ops.ddy(&sxy));
        let mut fuy = ops.ddx(&sxy);
        add_into(&mut fuy, &ops.ddy(&syy));

        if self.phi_active {
            let bx: Vec<f64> = p.n_d.iter().zip(&self.phi_x).map(|(a, b)| a * b).collect();
            let by: Vec<f64> = p.n_d.iter().zip(&self.phi_y).map(|(a, b)| a * b).collect();
            check_finite("buoyancy n grad phi", &bx, t)?;
            check_finite("buoyancy n grad phi", &by, t)?;
            let (mut sbx, mut sby) = ops.forward_pair(&bx, (Odd, Even), &by, (Even, Odd));
            ops.truncate(&mut sbx);
            ops.truncate(&mut sby);
            add_into(&mut fux, &sbx);
            add_into(&mut fuy, &sby);
        }
        Ok(Forcing {
            n: fn_,
            c: fc,
            ux: fux,
            uy: fuy,
        })
    }

    fn flux_divergence(&self, fx: &[f64], fy: &[f64]) -> Vec<Complex64> {
        let ops = &*self.ops;
        let (mut cx, mut cy) = ops.forward_pair(fx, (Odd, Even), fy, (Even, Odd));
        ops.truncate(&mut cx);
        ops.truncate(&mut cy);
        ops.div(&cx, &cy)
    }

    /// One exponential Euler step driven by the increment `dw`.
    pub fn step(&self, state: &State, dw: &[f64]) -> Result<State> {
        let cfg = self.cfg;
        let coeffs = &cfg.coefficients;
        let noise = &cfg.noise;
        if dw.len() < noise.m() {
            return Err(Error::contract(format!(
                "noise increment has length {}, model expects {}",
                dw.len(),
                noise.m()
            )));
        }
        let dw = &dw[..noise.m()];
        let p = self.prepare(state);
        let admissible = self.admissible(state, &p);
        if self.dt > admissible {
            return Err(Error::StepSize {
                dt: self.dt,
                admissible,
                t: state.t,
            });
        }
        let ops = &*self.ops;
        let dt = self.dt;
        let f = self.forcing(state.t, &p)?;

        let mut acc = state.acc;
        if cfg.track_dissipation {
            let r = rates_with_velocity_spectra(ops, &state.n, &state.c, &p.ux_hat, &p.uy_hat, coeffs);
            acc.fisher += dt * r.fisher;
            acc.enstrophy += dt * r.enstrophy;
            acc.hessian += dt * r.hessian;
            acc.quartic += dt * r.quartic;
            acc.cross += dt * r.cross;
        }

        let mut nn: Vec<Complex64> = p.n_hat.iter().zip(&f.n).map(|(a, b)| a - b * dt).collect();
        self.heat_n.apply_spec(&mut nn);
        let mut cn: Vec<Complex64> = p.c_hat.iter().zip(&f.c).map(|(a, b)| a - b * dt).collect();
        self.heat_c.apply_spec(&mut cn);

        let mut vx: Vec<Complex64> = p.ux_hat.iter().zip(&f.ux).map(|(a, b)| a - b * dt).collect();
        let mut vy: Vec<Complex64> = p.uy_hat.iter().zip(&f.uy).map(|(a, b)| a - b * dt).collect();
        if !noise.is_silent() {
            let coords = noise.coordinates(&state.u);
            let amps: Vec<f64> = (0..noise.m())
                .map(|i| noise.q[i] * (noise.a[i] + noise.b[i] * coords[i]))
                .collect();
            acc.noise_hs += dt * amps.iter().map(|a| a * a).sum::<f64>();
            acc.martingale += (0..noise.m()).map(|i| amps[i] * dw[i] * coords[i]).sum::<f64>();
            let s = sigma_from_amplitudes(noise, &amps, dw);
            check_finite("noise sigma(u) dW", &s.x, state.t)?;
            check_finite("noise sigma(u) dW", &s.y, state.t)?;
            let (sx, sy) = ops.forward_pair(&s.x, (Odd, Even), &s.y, (Even, Odd));
            add_into(&mut vx, &sx);
            add_into(&mut vy, &sy);
        }
        leray_spec(ops, &mut vx, &mut vy);
        self.stokes.apply_spec(&mut vx);
        self.stokes.apply_spec(&mut vy);

        let grid = state.n.grid;
        let (mut n_vals, c_vals) = ops.backward_pair(&nn, &cn);
        let (ux, uy) = ops.backward_pair(&vx, &vy);
        if cfg.clip_negative_n {
            clip_preserving_mass(&mut n_vals, integrate(&state.n), grid.cell_area());
        }
        let next = State {
            n: ScalarField { grid, values: n_vals },
            c: ScalarField { grid, values: c_vals },
            u: VectorField { grid, x: ux, y: uy },
            t: state.t + dt,
            step: state.step + 1,
            acc,
        };
        if !next.is_finite() {
            return Err(Error::Divergence {
                term: "state after step".to_string(),
                t: next.t,
            });
        }
        Ok(next)
    }

    pub fn config(&self) -> &StepperConfig {
        self.cfg
    }

    /// Continuous-time right-hand sides `(n_t, c_t)` at `state`.
    pub fn tendencies(&self, state: &State) -> Result<(ScalarField, ScalarField)> {
        let ops = &*self.ops;
        let coeffs = &self.cfg.coefficients;
        let p = self.prepare(state);
        let f = self.forcing(state.t, &p)?;
        let ln = ops.laplacian(&p.n_hat);
        let lc = ops.laplacian(&p.c_hat);
        let nt: Vec<Complex64> = ln.iter().zip(&f.n).map(|(l, g)| l * coeffs.delta - g).collect();
        let ct: Vec<Complex64> = lc.iter().zip(&f.c).map(|(l, g)| l * coeffs.mu - g).collect();
        let grid = state.n.grid;
        let (nt, ct) = ops.backward_pair(&nt, &ct);
        Ok((
            ScalarField { grid, values: nt },
            ScalarField { grid, values: ct },
        ))
    }
}

/// Zeroes negative cells and rescales so the integral stays `mass`.
fn clip_preserving_mass(values: &mut [f64], mass: f64, cell_area: f64) {
    if values.iter().all(|v| *v >= 0.0) {
        return;
    }
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let clipped: f64 = values.iter().sum::<f64>() * cell_area;
    if clipped > 0.0 {
        let s = mass / clipped;
        for v in values.iter_mut() {
            *v *= s;
        }
    }
}

/// One step with a freshly built context. Prefer [`run`] for many steps.
pub fn step(state: &State, dt: f64, dw: &[f64], cfg: &StepperConfig) -> Result<State> {
    Stepper::new(cfg, dt)?.step(state, dw)
}

/// Breach thresholds for the invariant monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorThresholds {
    pub mass_rel: f64,
    pub negativity: f64,
    pub max_principle: f64,
}

impl Default for MonitorThresholds {
    fn default() -> Self {
        MonitorThresholds {
            mass_rel: 1e-10,
            negativity: 1e-6,
            max_principle: 1e-6,
        }
    }
}

/// Running extremes of the monitored invariants over a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub mass0: f64,
    pub sup_c0: f64,
    pub max_mass_drift_rel: f64,
    pub min_n: f64,
    pub min_c: f64,
    /// `max_t (sup c(t) - sup c0)`
    pub max_c_overshoot: f64,
    pub max_divergence: f64,
    pub breaches: Vec<String>,
}

impl MonitorReport {
    fn start(state: &State) -> Self {
        MonitorReport {
            mass0: integrate(&state.n),
            sup_c0: max_value(&state.c),
            max_mass_drift_rel: 0.0,
            min_n: min_value(&state.n),
            min_c: min_value(&state.c),
            max_c_overshoot: 0.0,
            max_divergence: velocity_divergence(&state.u),
            breaches: Vec::new(),
        }
    }

    fn record(&mut self, kind: &str, detail: String) -> Option<String> {
        if self.breaches.iter().any(|b| b.starts_with(kind)) {
            return None;
        }
        let msg = format!("{kind}: {detail}");
        self.breaches.push(msg.clone());
        Some(msg)
    }

    /// Updates the extremes; returns the first new breach message, if any.
    fn observe(&mut self, state: &State, th: &MonitorThresholds, check_divergence: bool) -> Option<String> {
        let mut first = None;
        let mass = integrate(&state.n);
        let drift = (mass - self.mass0).abs() / self.mass0.abs().max(f64::MIN_POSITIVE);
        self.max_mass_drift_rel = self.max_mass_drift_rel.max(drift);
        if drift > th.mass_rel {
            first = first.or(self.record("mass", format!("relative drift {drift:e} at t = {}", state.t)));
        }
        let mn = min_value(&state.n);
        self.min_n = self.min_n.min(mn);
        if mn < -th.negativity {
            first = first.or(self.record("negativity", format!("min n = {mn:e} at t = {}", state.t)));
        }
        self.min_c = self.min_c.min(min_value(&state.c));
        let over = max_value(&state.c) - self.sup_c0;
        self.max_c_overshoot = self.max_c_overshoot.max(over);
        if over > th.max_principle {
            first = first.or(self.record(
                "max_principle",
                format!("sup c exceeds sup c0 by {over:e} at t = {}", state.t),
            ));
        }
        if check_divergence {
            let d = velocity_divergence(&state.u);
            self.max_divergence = self.max_divergence.max(d);
            let tol = divergence_tolerance(&state.u);
            if d > tol {
                first = first.or(self.record("divergence", format!("max |div u| = {d:e} at t = {}", state.t)));
            }
        }
        first
    }
}

/// `max |div u|` with the reflection parities of the grid's mode.
pub fn velocity_divergence(u: &VectorField) -> f64 {
    let ops = SpectralOps::for_grid(&u.grid);
    let (cx, cy) = forward_vector(&ops, u);
    ops.backward(&ops.div(&cx, &cy))
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
}

/// Receives every sampled state of a run.
pub trait Observer {
    fn observe(&mut self, state: &State) -> Result<()>;
}

impl<F: FnMut(&State) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &State) -> Result<()> {
        self(state)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub sample_stride: usize,
    /// States at `t = 0, stride dt, 2 stride dt, ...`, always including `T`.
    pub samples: Vec<State>,
    pub monitor: MonitorReport,
    /// Seed of the driving Wiener path, if any.
    pub path_seed: Option<u64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.samples.last().expect("a trajectory holds at least the initial state")
    }
}

fn check_initial(state: &State, cfg: &StepperConfig) -> Result<()> {
    if !state.n.grid.same_shape(&cfg.coefficients.phi.grid) {
        return Err(Error::contract("initial state and coefficients use different grids"));
    }
    if !state.is_finite() {
        return Err(Error::contract("initial state has non-finite entries"));
    }
    let mn = min_value(&state.n);
    if mn < 0.0 {
        return Err(Error::contract(format!("initial density must be nonnegative, min = {mn}")));
    }
    let (cmin, cmax) = (min_value(&state.c), max_value(&state.c));
    let c_max = cfg.coefficients.c_max;
    if cmin < 0.0 || cmax > c_max * (1.0 + 1e-12) {
        return Err(Error::contract(format!(
            "initial concentration must lie in [0, {c_max}], found [{cmin}, {cmax}]"
        )));
    }
    let d = velocity_divergence(&state.u);
    if d > divergence_tolerance(&state.u) {
        return Err(Error::contract(format!("initial velocity is not divergence-free: {d:e}")));
    }
    Ok(())
}

/// Advances `initial` to `T` on the increments of `path`.
///
/// `path` may be finer than `cfg.dt`; it is coarsened by summation. It may be
/// omitted when the noise is silent.
pub fn run(
    cfg: &StepperConfig,
    initial: &State,
    path: Option<&WienerPath>,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(initial, cfg)?;
    let steps = cfg.steps()?;
    let m = cfg.noise.m();
    let coarse = match path {
        Some(p) => {
            if p.m < m {
                return Err(Error::contract(format!("path has {} columns, noise needs {m}", p.m)));
            }
            let c = if (p.dt - cfg.dt).abs() <= 1e-12 * cfg.dt {
                p.clone()
            } else {
                p.coarsen_to(cfg.dt)?
            };
            if c.steps < steps {
                return Err(Error::contract(format!(
                    "path covers {} steps, run needs {steps}",
                    c.steps
                )));
            }
            Some(c)
        }
        None if cfg.noise.is_silent() => None,
        None => return Err(Error::contract("a Wiener path is required for non-silent noise")),
    };
    let zeros = vec![0.0; m];
    let stepper = Stepper::new(cfg, cfg.dt)?;
    let mut monitor = MonitorReport::start(initial);
    let mut samples = vec![initial.clone()];
    for o in observers.iter_mut() {
        o.observe(initial)?;
    }
    let mut state = initial.clone();
    for s in 0..steps {
        let dw = match &coarse {
            Some(p) => p.increment(s),
            None => &zeros[..],
        };
        state = stepper.step(&state, dw)?;
        let sampled = (s + 1) % cfg.sample_stride == 0 || s + 1 == steps;
        if let Some(msg) = monitor.observe(&state, &cfg.thresholds, sampled) {
            if cfg.strict {
                return Err(Error::Invariant(msg));
            }
        }
        if sampled {
            for o in observers.iter_mut() {
                o.observe(&state)?;
            }
            samples.push(state.clone());
        }
    }
    Ok(Trajectory {
        dt: cfg.dt,
        sample_stride: cfg.sample_stride,
        samples,
        monitor,
        path_seed: path.and_then(|p| p.seed),
    })
}
