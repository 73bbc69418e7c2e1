//! Functionals and invariant checks evaluated on states and trajectories.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{h1_seminorm, inner, integrate, l2_norm, l2_norm_vec, max_value, min_value, ScalarField, VectorField};
use crate::operators::laplacian;
use crate::spectral::{Parity, SpectralOps};
use crate::stepper::{dissipation_rates, State, Stepper, Trajectory, CONCENTRATION_FLOOR, DENSITY_FLOOR};

pub fn mass(n: &ScalarField) -> f64 {
    integrate(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// `max_t (sup c(t) - sup c(0))`, zero when the supremum never grows.
    pub max_overshoot: f64,
    /// `min_t min_x c(t, x)`
    pub min_c: f64,
}

/// Scans a time series of concentrations; the first entry is `c0`.
pub fn max_principle_check<'a>(c_series: impl IntoIterator<Item = &'a ScalarField>) -> MaxPrincipleReport {
    let mut it = c_series.into_iter();
    let Some(c0) = it.next() else {
        return MaxPrincipleReport {
            max_overshoot: 0.0,
            min_c: f64::INFINITY,
        };
    };
    let sup0 = max_value(c0);
    let mut report = MaxPrincipleReport {
        max_overshoot: 0.0,
        min_c: min_value(c0),
    };
    for c in it {
        report.max_overshoot = report.max_overshoot.max(max_value(c) - sup0);
        report.min_c = report.min_c.min(min_value(c));
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherValue {
    /// `int |grad n|^2 / n = 4 ||grad sqrt(n)||^2`
    pub value: f64,
    /// Cells where `n` was raised to the density floor.
    pub floored_cells: usize,
}

pub fn fisher(n: &ScalarField) -> FisherValue {
    let floored_cells = n.values.iter().filter(|v| **v < DENSITY_FLOOR).count();
    let root = n.map(|v| v.max(DENSITY_FLOOR).sqrt());
    FisherValue {
        value: 4.0 * h1_seminorm(&root).powi(2),
        floored_cells,
    }
}

/// Values of `c` below `-PSI_NEGATIVE_TOL` are rejected; smaller negatives are clamped to 0.
pub const PSI_NEGATIVE_TOL: f64 = 1e-9;

/// Pointwise `Psi(c) = int_0^c sqrt(chi/k)`.
pub fn psi_transform(c: &ScalarField, coeffs: &CoefficientSet) -> Result<ScalarField> {
    let m = min_value(c);
    if m < -PSI_NEGATIVE_TOL {
        return Err(Error::contract(format!("psi_transform needs c >= 0, found {m}")));
    }
    Ok(coeffs.psi_field(&c.map(|v| v.max(0.0))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaConstants {
    pub lambda0: f64,
    pub lambda1: f64,
    /// `lambda1` vanishes (allowed, but the quartic dissipation drops out).
    pub lambda1_zero: bool,
    pub argmin0: f64,
    pub argmin1: f64,
}

/// Default number of search points on `[0, C_M]`.
pub const LAMBDA_GRID: usize = 10_000;

fn grid_min(f: &dyn Fn(f64) -> f64, c_max: f64, points: usize) -> (f64, f64) {
    let h = c_max / (points - 1) as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..points {
        let c = i as f64 * h;
        let v = f(c);
        if v < best.0 {
            best = (v, c);
        }
    }
    let (lo, hi) = ((best.1 - h).max(0.0), (best.1 + h).min(c_max));
    let (mut a, mut b) = (lo, hi);
    let g = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let mid = 0.5 * (a + b);
    for c in [mid, lo, hi] {
        let v = f(c);
        if v < best.0 {
            best = (v, c);
        }
    }
    best
}

/// `2 lambda0 = min (chi k)'/(2 chi)` and `2 lambda1 = min -(k/chi)''/2` on `[0, C_M]`.
pub fn lambda_constants(coeffs: &CoefficientSet) -> Result<LambdaConstants> {
    lambda_constants_with(coeffs, LAMBDA_GRID)
}

pub fn lambda_constants_with(coeffs: &CoefficientSet, points: usize) -> Result<LambdaConstants> {
    let points = points.max(2);
    let f0 = |c: f64| coeffs.product_d1(c) / (2.0 * coeffs.chi.value(c));
    let f1 = |c: f64| -0.5 * coeffs.ratio_d2(c);
    let (m0, a0) = grid_min(&f0, coeffs.c_max, points);
    let (m1, a1) = grid_min(&f1, coeffs.c_max, points);
    let (lambda0, lambda1) = (0.5 * m0, 0.5 * m1);
    let zero_tol = derivative_tolerance(coeffs);
    if !(lambda0 > zero_tol) {
        return Err(Error::config(
            "coefficients",
            format!("condition (A) violated: lambda0 = {lambda0} <= 0 (at c = {a0})"),
        ));
    }
    if lambda1 < -zero_tol {
        return Err(Error::config(
            "coefficients",
            format!("condition (A) violated: lambda1 = {lambda1} < 0 (at c = {a1})"),
        ));
    }
    let lambda1_zero = lambda1.abs() <= zero_tol;
    Ok(LambdaConstants {
        lambda0,
        lambda1: if lambda1_zero { 0.0 } else { lambda1 },
        lambda1_zero,
        argmin0: a0,
        argmin1: a1,
    })
}

/// Numerical zero for sign tests: exact with closed-form derivatives,
/// finite-difference noise level otherwise.
fn derivative_tolerance(coeffs: &CoefficientSet) -> f64 {
    if coeffs.derivatives_exact() {
        1e-12
    } else {
        1e-5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub t: f64,
    pub cell_entropy: f64,
    pub psi_gradient_sq: f64,
    pub fisher_integral: f64,
    pub kinetic: f64,
    pub enstrophy_integral: f64,
    pub hessian_dissipation: f64,
    pub quartic_dissipation: f64,
    pub cross_dissipation: f64,
    pub total: f64,
    pub floored_cells: usize,
}

/// `int n ln n` with `0 ln 0 = 0`; cells below the density floor contribute nothing.
pub fn cell_entropy(n: &ScalarField) -> f64 {
    let s: f64 = n
        .values
        .iter()
        .map(|&v| if v > DENSITY_FLOOR { v * v.ln() } else { 0.0 })
        .sum();
    s * n.grid.cell_area()
}

/// `1/2 ||grad Psi(c)||^2`
pub fn psi_gradient_energy(c: &ScalarField, coeffs: &CoefficientSet) -> Result<f64> {
    Ok(0.5 * h1_seminorm(&psi_transform(c, coeffs)?).powi(2))
}

pub fn entropy(state: &State, coeffs: &CoefficientSet, k: f64) -> Result<EntropyReport> {
    entropy_with(state, coeffs, k, &lambda_constants(coeffs)?)
}

/// The entropy functional with precomputed `lambda` constants.
pub fn entropy_with(state: &State, coeffs: &CoefficientSet, k: f64, lambdas: &LambdaConstants) -> Result<EntropyReport> {
    let acc = &state.acc;
    let cell = cell_entropy(&state.n);
    let psi = psi_gradient_energy(&state.c, coeffs)?;
    let fisher_integral = 2.0 * coeffs.delta * acc.fisher;
    let kinetic = k / coeffs.nu * l2_norm_vec(&state.u).powi(2);
    let enstrophy_integral = k * acc.enstrophy;
    let hessian_dissipation = coeffs.mu * acc.hessian;
    let quartic_dissipation = lambdas.lambda1 * coeffs.mu * acc.quartic;
    let cross_dissipation = 2.0 * lambdas.lambda0 * acc.cross;
    Ok(EntropyReport {
        t: state.t,
        cell_entropy: cell,
        psi_gradient_sq: psi,
        fisher_integral,
        kinetic,
        enstrophy_integral,
        hessian_dissipation,
        quartic_dissipation,
        cross_dissipation,
        total: cell + psi + fisher_integral + kinetic + enstrophy_integral + hessian_dissipation + quartic_dissipation + cross_dissipation,
        floored_cells: state.n.values.iter().filter(|v| **v < DENSITY_FLOOR).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `max(0, max residual)`
    pub max_positive: f64,
}

impl ResidualSeries {
    fn from_parts(times: Vec<f64>, residuals: Vec<f64>) -> Self {
        let max_positive = residuals.iter().fold(0.0_f64, |m, r| m.max(*r));
        ResidualSeries {
            times,
            residuals,
            max_positive,
        }
    }
}

/// Discrete form of the entropy dissipation inequality between consecutive samples:
///
/// `Delta(int n ln n + 1/2 ||grad Psi||^2)/Dt + (4 delta Delta F + mu Delta H
///  + lambda1 mu Delta Q + 2 lambda0 Delta X)/Dt - K Delta Z/Dt`
///
/// where `F, H, Q, X, Z` are the running dissipation integrals.
pub fn entropy_dissipation_check(
    samples: &[State],
    coeffs: &CoefficientSet,
    k: f64,
    lambdas: &LambdaConstants,
) -> Result<ResidualSeries> {
    let mut energies = Vec::with_capacity(samples.len());
    for s in samples {
        energies.push(cell_entropy(&s.n) + psi_gradient_energy(&s.c, coeffs)?);
    }
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    for i in 1..samples.len() {
        let (a, b) = (&samples[i - 1], &samples[i]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(Error::contract("samples must be strictly increasing in time"));
        }
        let d = |f: fn(&State) -> f64| (f(b) - f(a)) / dt;
        let lhs = (energies[i] - energies[i - 1]) / dt
            + 4.0 * coeffs.delta * d(|s| s.acc.fisher)
            + coeffs.mu * d(|s| s.acc.hessian)
            + lambdas.lambda1 * coeffs.mu * d(|s| s.acc.quartic)
            + 2.0 * lambdas.lambda0 * d(|s| s.acc.cross);
        residuals.push(lhs - k * d(|s| s.acc.enstrophy));
        times.push(a.t);
    }
    Ok(ResidualSeries::from_parts(times, residuals))
}

/// Integrated stochastic entropy balance along one path:
///
/// `E(t) - E(0) - (K/nu)(2 M(t) + int ||sigma||_HS^2) - C (t + int ||u||^2)`
///
/// with `M` the Ito sum of `<sigma(u) dW, u>`.
pub fn ito_entropy_residual(
    samples: &[State],
    coeffs: &CoefficientSet,
    k: f64,
    c: f64,
    lambdas: &LambdaConstants,
) -> Result<ResidualSeries> {
    let Some(first) = samples.first() else {
        return Ok(ResidualSeries::from_parts(Vec::new(), Vec::new()));
    };
    let e0 = entropy_with(first, coeffs, k, lambdas)?.total;
    let mut times = Vec::with_capacity(samples.len());
    let mut residuals = Vec::with_capacity(samples.len());
    let mut u_int = 0.0;
    let mut prev = (first.t, l2_norm_vec(&first.u).powi(2));
    for s in samples {
        let u2 = l2_norm_vec(&s.u).powi(2);
        u_int += 0.5 * (s.t - prev.0) * (u2 + prev.1);
        prev = (s.t, u2);
        let e = entropy_with(s, coeffs, k, lambdas)?.total;
        let ito = k / coeffs.nu * (2.0 * s.acc.martingale + s.acc.noise_hs);
        residuals.push(e - e0 - ito - c * ((s.t - first.t) + u_int));
        times.push(s.t);
    }
    Ok(ResidualSeries::from_parts(times, residuals))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRate {
    /// Instantaneous left side of the dissipation inequality.
    pub lhs: f64,
    /// `||grad u||^2`
    pub enstrophy: f64,
}

/// Evaluates the dissipation inequality from the continuous right-hand sides at `state`.
pub fn entropy_rate(state: &State, stepper: &Stepper, lambdas: &LambdaConstants) -> Result<EntropyRate> {
    let coeffs = &stepper.config().coefficients;
    let (nt, ct) = stepper.tendencies(state)?;
    let log_n = state.n.map(|v| v.max(DENSITY_FLOOR).ln() + 1.0);
    let d_cell = inner(&log_n, &nt);
    let c = state.c.map(|v| v.max(CONCENTRATION_FLOOR));
    let psi = psi_transform(&c, coeffs)?;
    let psi_t = coeffs.psi_d1_field(&c).zip_map(&ct, |a, b| a * b);
    let d_psi = -inner(&laplacian(&psi), &psi_t);
    let r = dissipation_rates(&state.n, &state.c, &state.u, coeffs);
    Ok(EntropyRate {
        lhs: d_cell
            + d_psi
            + 4.0 * coeffs.delta * r.fisher
            + coeffs.mu * r.hessian
            + lambdas.lambda1 * coeffs.mu * r.quartic
            + 2.0 * lambdas.lambda0 * r.cross,
        enstrophy: r.enstrophy,
    })
}

/// `safety * max lhs / ||grad u||^2` over states with non-negligible velocity gradient.
pub fn calibrate_k<'a>(
    states: impl IntoIterator<Item = &'a State>,
    stepper: &Stepper,
    lambdas: &LambdaConstants,
    safety: f64,
) -> Result<f64> {
    let mut k = 0.0_f64;
    for s in states {
        let r = entropy_rate(s, stepper, lambdas)?;
        if r.enstrophy > 1e-12 {
            k = k.max(r.lhs / r.enstrophy);
        }
    }
    Ok(safety * k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    /// `||n||_{L2}`
    pub lhs: f64,
    /// `||n||_{L1}^{1/2} ||grad sqrt(n)||_{L2} + ||sqrt(n)||_{L2}^2` (without the constant)
    pub rhs_shape: f64,
    pub constant: f64,
    pub margin: f64,
}

/// Gagliardo-Nirenberg type bound `||n|| <= C (||n||_1^{1/2} ||grad sqrt n|| + ||sqrt n||^2)`.
pub fn gn_check(n: &ScalarField, constant: f64) -> GnCheck {
    let lhs = l2_norm(n);
    let l1: f64 = n.values.iter().map(|v| v.abs()).sum::<f64>() * n.grid.cell_area();
    let root = n.map(|v| v.max(0.0).sqrt());
    let rhs_shape = l1.sqrt() * h1_seminorm(&root) + l2_norm(&root).powi(2);
    GnCheck {
        lhs,
        rhs_shape,
        constant,
        margin: constant * rhs_shape - lhs,
    }
}

/// `safety * max lhs / rhs_shape` over a calibration family.
pub fn calibrate_gn<'a>(family: impl IntoIterator<Item = &'a ScalarField>, safety: f64) -> f64 {
    family
        .into_iter()
        .map(|n| {
            let g = gn_check(n, 1.0);
            g.lhs / g.rhs_shape
        })
        .fold(0.0_f64, f64::max)
        * safety
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntropy {
    /// `int n |ln n|`
    pub abs_integral: f64,
    /// `int n ln n`
    pub integral: f64,
    /// `2 (2/e) |O|^{1/2} ||n||_1^{1/2}`
    pub constant: f64,
    pub slack: f64,
}

/// Both sides of `int n |ln n| <= int n ln n + C`, using
/// `s ln(1/s) <= (2/e) sqrt(s)` on `(0, 1]` and Cauchy-Schwarz.
pub fn log_entropy_bound(n: &ScalarField) -> LogEntropy {
    let w = n.grid.cell_area();
    let (mut abs_sum, mut sum, mut l1) = (0.0, 0.0, 0.0);
    for &v in &n.values {
        if v > 0.0 {
            let t = v * v.ln();
            abs_sum += t.abs();
            sum += t;
            l1 += v;
        }
    }
    let (abs_integral, integral) = (abs_sum * w, sum * w);
    let constant = 4.0 / std::f64::consts::E * n.grid.area().sqrt() * (l1 * w).sqrt();
    LogEntropy {
        abs_integral,
        integral,
        constant,
        slack: integral + constant - abs_integral,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionMode {
    H,
    A,
}

impl ConditionMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "h" | "H" => Some(ConditionMode::H),
            "a" | "A" => Some(ConditionMode::A),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub violations: usize,
    /// Smallest `c` where the condition fails.
    pub first_violation: Option<f64>,
    /// Value of the tested expression at its least favourable grid point.
    pub worst_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub mode: ConditionMode,
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
    pub lambdas: Option<LambdaConstants>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy)]
enum Sign {
    Positive,
    NonNegative,
    Negative,
    NonPositive,
}

fn sign_check(name: &str, f: &dyn Fn(f64) -> f64, sign: Sign, grid: &[f64], eps: f64) -> ConditionCheck {
    let mut violations = 0;
    let mut first_violation = None;
    let mut worst = match sign {
        Sign::Positive | Sign::NonNegative => f64::INFINITY,
        Sign::Negative | Sign::NonPositive => f64::NEG_INFINITY,
    };
    for &c in grid {
        let v = f(c);
        let ok = match sign {
            Sign::Positive => v > eps,
            Sign::NonNegative => v >= -eps,
            Sign::Negative => v < -eps,
            Sign::NonPositive => v <= eps,
        };
        worst = match sign {
            Sign::Positive | Sign::NonNegative => worst.min(v),
            Sign::Negative | Sign::NonPositive => worst.max(v),
        };
        if !ok || !v.is_finite() {
            violations += 1;
            first_violation.get_or_insert(c);
        }
    }
    ConditionCheck {
        name: name.to_string(),
        passed: violations == 0,
        violations,
        first_violation,
        worst_value: worst,
    }
}

/// Sign conditions of the coupling functions on a 10^4-point grid of `[0, C_M]`.
pub fn validate_coefficients(coeffs: &CoefficientSet, mode: ConditionMode) -> CoefficientReport {
    let points = LAMBDA_GRID;
    let grid: Vec<f64> = (0..points)
        .map(|i| coeffs.c_max * i as f64 / (points - 1) as f64)
        .collect();
    let interior: Vec<f64> = grid.iter().copied().filter(|c| *c > 0.0).collect();
    let eps = derivative_tolerance(coeffs);
    let chi = |c: f64| coeffs.chi.value(c);
    let k = |c: f64| coeffs.k.value(c);
    let r1 = |c: f64| coeffs.ratio_d1(c);
    let r2 = |c: f64| coeffs.ratio_d2(c);
    let p1 = |c: f64| coeffs.product_d1(c);
    let k0 = |_: f64| coeffs.k.value(0.0).abs();
    let mut checks = vec![
        sign_check("chi > 0", &chi, Sign::Positive, &grid, 0.0),
        sign_check("k(0) = 0", &k0, Sign::NonPositive, &[0.0], 1e-14),
        sign_check("k > 0 on (0, C_M]", &k, Sign::Positive, &interior, 0.0),
    ];
    match mode {
        ConditionMode::H => {
            checks.push(sign_check("(k/chi)' > 0", &r1, Sign::Positive, &grid, eps));
            checks.push(sign_check("(k/chi)'' <= 0", &r2, Sign::NonPositive, &grid, eps));
            checks.push(sign_check("(chi k)' >= 0", &p1, Sign::NonNegative, &grid, eps));
        }
        ConditionMode::A => {
            let kd = |c: f64| coeffs.k.d1(c);
            let xd = |c: f64| coeffs.chi.d1(c);
            checks.push(sign_check("k' >= 0", &kd, Sign::NonNegative, &grid, eps));
            checks.push(sign_check("chi' >= 0", &xd, Sign::NonNegative, &grid, eps));
            checks.push(sign_check("(k/chi)' > 0", &r1, Sign::Positive, &grid, eps));
            checks.push(sign_check("(k/chi)'' < 0", &r2, Sign::Negative, &grid, eps));
            checks.push(sign_check("(chi k)' > 0", &p1, Sign::Positive, &grid, eps));
        }
    }
    let mut warnings = Vec::new();
    let lambdas = match lambda_constants(coeffs) {
        Ok(l) => {
            if l.lambda1_zero {
                warnings.push("lambda1 = 0: the quartic dissipation term vanishes".to_string());
            }
            Some(l)
        }
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    CoefficientReport {
        mode,
        passed: checks.iter().all(|c| c.passed),
        checks,
        lambdas,
        warnings,
    }
}

/// `||grad u||^2` with the reflection parities of the grid's mode.
pub fn velocity_gradient_sq(u: &VectorField) -> f64 {
    let ops = SpectralOps::for_grid(&u.grid);
    let (cx, cy) = ops.forward_pair(&u.x, (Parity::Odd, Parity::Even), &u.y, (Parity::Even, Parity::Odd));
    ops.grad_norm_sq_spec(&cx) + ops.grad_norm_sq_spec(&cy)
}

/// `(||c||^2 + ||grad c||^2 + ||Laplacian c||^2)^{1/2}`
pub fn h2_norm(c: &ScalarField) -> f64 {
    (l2_norm(c).powi(2) + h1_seminorm(c).powi(2) + l2_norm(&laplacian(c)).powi(2)).sqrt()
}

/// `||n - n'||^2 + ||c - c'||^2 + ||grad(c - c')||^2 + ||u - u'||^2`
pub fn stability_lambda(a: &State, b: &State) -> f64 {
    let dn = a.n.lin_comb(1.0, &b.n, -1.0);
    let dc = a.c.lin_comb(1.0, &b.c, -1.0);
    let du = a.u.lin_comb(1.0, &b.u, -1.0);
    l2_norm(&dn).powi(2) + l2_norm(&dc).powi(2) + h1_seminorm(&dc).powi(2) + l2_norm_vec(&du).powi(2)
}

/// Per-solution sum over `j in {1, 2}` of the terms of the Gronwall weight.
fn xi_terms(s: &State) -> f64 {
    let n = l2_norm(&s.n);
    let gn = h1_seminorm(&s.n);
    let c = l2_norm(&s.c);
    let gc = h1_seminorm(&s.c);
    let h2 = h2_norm(&s.c);
    let u = l2_norm_vec(&s.u);
    let gu = velocity_gradient_sq(&s.u).sqrt();
    (1..=2)
        .map(|j| {
            let (j1, j2) = (j, 2 * j);
            (n * gn).powi(j1)
                + n.powi(j2)
                + (c * gc).powi(j1)
                + c.powi(j2)
                + (h2 * gc).powi(j1)
                + gc.powi(j2)
                + (u * gu).powi(j1)
        })
        .sum()
}

/// `Xi = 1 + sum_{i=1,2} sum_{j=1,2} (...)` for one pair of states.
pub fn stability_xi(a: &State, b: &State) -> f64 {
    1.0 + (xi_terms(a) + xi_terms(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    /// Trapezoidal `int_0^t Xi`.
    pub xi_integral: Vec<f64>,
    /// Gronwall constant used for the margin.
    pub constant: f64,
    /// `log Lambda(t) - log Lambda(0) - C int_0^t Xi`
    pub gronwall_margin: Vec<f64>,
}

impl StabilityReport {
    pub fn max_margin(&self) -> f64 {
        self.gronwall_margin.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

/// Smallest `C` with `log Lambda(t)/Lambda(0) <= C int_0^t Xi` at every sample.
/// Negative when the difference decays; 0 without usable samples.
pub fn fit_gronwall_constant(lambda: &[f64], xi_integral: &[f64]) -> f64 {
    let Some(&l0) = lambda.first() else { return 0.0 };
    if !(l0 > 0.0) {
        return 0.0;
    }
    let c = lambda
        .iter()
        .zip(xi_integral)
        .skip(1)
        .filter(|(l, x)| **x > 0.0 && **l > 0.0)
        .map(|(l, x)| (l / l0).ln() / x)
        .fold(f64::NEG_INFINITY, f64::max);
    if c.is_finite() {
        c
    } else {
        0.0
    }
}

/// `Lambda`, `Xi` and the Gronwall margin for two trajectories driven by one path.
///
/// With `constant = None` the constant is fitted by [`fit_gronwall_constant`].
pub fn stability_functionals(a: &Trajectory, b: &Trajectory, constant: Option<f64>) -> Result<StabilityReport> {
    if a.samples.len() != b.samples.len() || a.dt != b.dt || a.path_seed != b.path_seed {
        return Err(Error::contract(
            "stability functionals need trajectories with one time grid and one Wiener path",
        ));
    }
    let mut times = Vec::with_capacity(a.samples.len());
    let mut lambda = Vec::with_capacity(a.samples.len());
    let mut xi = Vec::with_capacity(a.samples.len());
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        if sa.t != sb.t || !sa.n.grid.same_shape(&sb.n.grid) {
            return Err(Error::contract("trajectories are sampled on different grids or times"));
        }
        times.push(sa.t);
        lambda.push(stability_lambda(sa, sb));
        xi.push(stability_xi(sa, sb));
    }
    let mut xi_integral = vec![0.0; xi.len()];
    for i in 1..xi.len() {
        xi_integral[i] = xi_integral[i - 1] + 0.5 * (times[i] - times[i - 1]) * (xi[i] + xi[i - 1]);
    }
    let constant = constant.unwrap_or_else(|| fit_gronwall_constant(&lambda, &xi_integral));
    let l0 = lambda.first().copied().unwrap_or(0.0);
    let gronwall_margin = lambda
        .iter()
        .zip(&xi_integral)
        .map(|(l, x)| {
            if l0 > 0.0 {
                (l / l0).ln() - constant * x
            } else if *l == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(StabilityReport {
        times,
        lambda,
        xi,
        xi_integral,
        constant,
        gronwall_margin,
    })
}
