//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Run with `cargo test --release -p ctns-core --test acceptance`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctns_core::coefficients::{ChiPreset, CoefficientSet, KPreset};
use ctns_core::diagnostics::{
    calibrate_gn, entropy_dissipation_check, gn_check, ito_entropy_residual, lambda_constants, log_entropy_bound,
    mass, max_principle_check, validate_coefficients, ConditionMode,
};
use ctns_core::experiments::{
    calibrate_entropy_weight, ensemble_run, galerkin_sweep, refinement_study, twin_run, EnsembleSpec,
};
use ctns_core::field::{inner, inner_vec, l2_norm_vec, max_value, min_value, BcMode, Grid, ScalarField, VectorField};
use ctns_core::initial::{default_initial, InitialParams};
use ctns_core::io::{emit_timeseries, encode_snapshot, TimeseriesRecord};
use ctns_core::noise::{sample_path, NoiseModel, NoiseParams};
use ctns_core::operators::{divergence, gradient, heat_semigroup, leray_project, stokes_semigroup};
use ctns_core::stepper::{run, State, StepperConfig, Trajectory};

const N: usize = 64;
const T: f64 = 1.0;
const DT: f64 = 1e-3;
const DT_HALF: f64 = 5e-4;

const MASS_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-6;
const HALVING_RATIO: f64 = 0.6;
const OPERATOR_TOL: f64 = 1e-10;
const SEMIGROUP_TOL: f64 = 1e-12;
/// Pinned tolerance of the discrete dissipation inequality: `tol(dt) = DISSIPATION_SLOPE * dt`.
const DISSIPATION_SLOPE: f64 = 2.5e4;
const ENSEMBLE_MEMBERS: usize = 64;
const ENSEMBLE_SEEDS: [u64; 2] = [1, 2];
const RATIO_AGREEMENT: f64 = 0.2;
const GN_SAFETY: f64 = 1.1;
const FAMILY_SIZE: usize = 1000;
const CALIBRATION_SIZE: usize = 200;
const GALERKIN_LEVELS: [usize; 4] = [4, 8, 16, 32];
const TWIN_DELTAS: [f64; 3] = [1e-4, 1e-6, 1e-8];
/// Largest tolerated Gronwall margin, in units of `log Lambda`.
const GRONWALL_TOL: f64 = 1e-5;
const GRONWALL_STABILITY: f64 = 0.3;
const REFINE_DTS: [f64; 4] = [4e-3, 2e-3, 1e-3, 5e-4];
const REFINE_REFERENCE: f64 = 1.25e-4;
const REFINE_PATHS: usize = 8;
const DETERMINISTIC_SLOPE: (f64, f64) = (0.8, 1.2);
const STOCHASTIC_SLOPE_MIN: f64 = 0.45;
const LAMBDA_TOL: f64 = 1e-6;

fn verdict(id: u32, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} criterion {id:>2}: {}", detail.as_ref()).unwrap();
    out.flush().unwrap();
}

fn grid() -> Grid {
    Grid::unit_torus(N).unwrap()
}

fn initial(g: Grid) -> State {
    default_initial(g, &InitialParams::default(), 1.0).unwrap()
}

fn deterministic(dt: f64) -> StepperConfig {
    StepperConfig::deterministic(dt, T, CoefficientSet::default_for(grid())).unwrap()
}

fn stochastic(dt: f64, params: NoiseParams) -> StepperConfig {
    let g = grid();
    let noise = NoiseModel::from_params(&g, &params).unwrap();
    StepperConfig::new(dt, T, CoefficientSet::default_for(g), noise).unwrap()
}

fn multiplicative() -> NoiseParams {
    NoiseParams {
        b_scale: 0.5,
        ..NoiseParams::default()
    }
}

fn run_with(cfg: &StepperConfig, seed: Option<u64>) -> Trajectory {
    let path = seed.map(|s| sample_path(s, cfg.noise.m(), cfg.horizon, cfg.dt).unwrap());
    run(cfg, &initial(grid()), path.as_ref(), &mut []).unwrap()
}

/// Random trigonometric polynomial on the unit torus with wavenumbers `|k_x|, |k_y| <= band`.
struct TrigPoly {
    terms: Vec<(i32, i32, f64, f64)>,
}

impl TrigPoly {
    fn random(rng: &mut ChaCha8Rng, band: i32) -> Self {
        let mut terms = Vec::new();
        for kx in -band..=band {
            for ky in 0..=band {
                if ky == 0 && kx <= 0 {
                    continue;
                }
                let w = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
                terms.push((kx, ky, w * rng.random_range(-1.0..1.0), w * rng.random_range(-1.0..1.0)));
            }
        }
        TrigPoly { terms }
    }

    fn sample(&self, g: Grid) -> ScalarField {
        ScalarField::from_fn(g, |x, y| {
            self.terms
                .iter()
                .map(|&(kx, ky, a, b)| {
                    let th = 2.0 * PI * (kx as f64 * x + ky as f64 * y);
                    a * th.cos() + b * th.sin()
                })
                .sum()
        })
    }
}

/// Nonnegative band-limited densities: alternately a shifted and a squared trigonometric polynomial.
fn density_family(seed: u64, count: usize) -> Vec<ScalarField> {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let band = 1 + (i % 6) as i32;
            let f = TrigPoly::random(&mut rng, band).sample(g);
            let scale = 10f64.powf(rng.random_range(-1.0..1.0));
            if i % 2 == 0 {
                let (lo, hi) = (min_value(&f), max_value(&f));
                let floor = 10f64.powf(rng.random_range(-3.0..0.0)) * (hi - lo);
                f.map(|v| scale * (v - lo + floor))
            } else {
                f.map(|v| scale * v * v)
            }
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_diff_vec(a: &VectorField, b: &VectorField) -> f64 {
    sup_diff(&a.x, &b.x).max(sup_diff(&a.y, &b.y))
}

#[test]
fn criterion_01_mass_conservation() {
    let det = run_with(&deterministic(DT), None);
    let sto = run_with(&stochastic(DT, multiplicative()), Some(7));
    let drift = |tr: &Trajectory| {
        let m0 = mass(&tr.samples[0].n);
        let sampled = tr.samples.iter().fold(0.0_f64, |m, s| m.max((mass(&s.n) - m0).abs() / m0));
        sampled.max(tr.monitor.max_mass_drift_rel)
    };
    let (d, s) = (drift(&det), drift(&sto));
    let pass = d <= MASS_TOL && s <= MASS_TOL;
    verdict(1, pass, format!("relative mass drift deterministic {d:.3e}, stochastic {s:.3e} (tol {MASS_TOL:e})"));
    assert!(pass);
}

#[test]
fn criterion_02_maximum_principle() {
    let coarse = run_with(&deterministic(DT), None);
    let fine = run_with(&deterministic(DT_HALF), None);
    let sup_c0 = max_value(&coarse.samples[0].c);
    let report = |tr: &Trajectory| {
        let r = max_principle_check(tr.samples.iter().map(|s| &s.c));
        let over = r.max_overshoot.max(tr.monitor.max_c_overshoot).max(0.0);
        (over, r.min_c.min(tr.monitor.min_c))
    };
    let ((o1, m1), (o2, m2)) = (report(&coarse), report(&fine));
    let halving = o2 <= HALVING_RATIO * o1 || (o1 == 0.0 && o2 == 0.0);
    let pass = o1 <= SIGN_TOL && halving && m1 >= -SIGN_TOL && m2 >= -SIGN_TOL;
    verdict(
        2,
        pass,
        format!(
            "sup c0 {sup_c0:.6}; overshoot {o1:.3e} (dt 1e-3), {o2:.3e} (dt 5e-4); min c {m1:.4}, {m2:.4}{}",
            if o1 == 0.0 { "; overshoot ratio vacuous, sup c never exceeds sup c0" } else { "" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_nonnegative_density() {
    let neg = |dt: f64| {
        let tr = run_with(&deterministic(dt), None);
        let mn = tr.samples.iter().map(|s| min_value(&s.n)).fold(tr.monitor.min_n, f64::min);
        (mn, (-mn).max(0.0))
    };
    let ((mn1, v1), (mn2, v2)) = (neg(DT), neg(DT_HALF));
    let halving = v2 <= HALVING_RATIO * v1 || (v1 == 0.0 && v2 == 0.0);
    let pass = mn1 >= -SIGN_TOL && halving;
    verdict(
        3,
        pass,
        format!(
            "min n {mn1:.4} (dt 1e-3), {mn2:.4} (dt 5e-4){}",
            if v1 == 0.0 { "; halving vacuous, n stays positive" } else { "" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_operator_algebra() {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0_f64; 6];
    let names = ["leray", "adjoint", "semigroup", "heat positivity", "heat sup", "neumann"];
    for _ in 0..8 {
        let band = 8;
        let v = VectorField::from_components(
            TrigPoly::random(&mut rng, band).sample(g),
            TrigPoly::random(&mut rng, band).sample(g),
        );
        let w = VectorField::from_components(
            TrigPoly::random(&mut rng, band).sample(g),
            TrigPoly::random(&mut rng, band).sample(g),
        );
        let f = TrigPoly::random(&mut rng, band).sample(g);

        let pv = leray_project(&v).unwrap();
        let ppv = leray_project(&pv).unwrap();
        let pw = leray_project(&w).unwrap();
        let idem = sup_diff_vec(&ppv, &pv);
        let sym = (inner_vec(&pv, &w) - inner_vec(&v, &pw)).abs();
        let contraction = (l2_norm_vec(&pv) - l2_norm_vec(&v)).max(0.0);
        worst[0] = worst[0].max(idem).max(sym).max(contraction);

        let adj = (inner_vec(&gradient(&f), &v) + inner(&f, &divergence(&v))).abs();
        worst[1] = worst[1].max(adj);

        let (t, s) = (rng.random_range(0.0..0.01), rng.random_range(0.0..0.01));
        let heat = sup_diff(
            &heat_semigroup(&heat_semigroup(&f, s, 1.0).unwrap(), t, 1.0).unwrap().values,
            &heat_semigroup(&f, t + s, 1.0).unwrap().values,
        );
        let heat0 = sup_diff(&heat_semigroup(&f, 0.0, 1.0).unwrap().values, &f.values);
        let stokes = sup_diff_vec(
            &stokes_semigroup(&stokes_semigroup(&pv, s, 1.0).unwrap(), t, 1.0).unwrap(),
            &stokes_semigroup(&pv, t + s, 1.0).unwrap(),
        );
        let stokes0 = sup_diff_vec(&stokes_semigroup(&pv, 0.0, 1.0).unwrap(), &pv);
        worst[2] = worst[2].max(heat).max(heat0).max(stokes).max(stokes0);

        // sum of a_k (1 + cos(k.(x - x0))) with a_k >= 0 peaks exactly at the grid point x0
        let (x0, y0) = g.point(rng.random_range(0..N), rng.random_range(0..N));
        let bumps: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.random_range(0.0..1.0),
                    rng.random_range(-band..=band) as f64,
                    rng.random_range(-band..=band) as f64,
                )
            })
            .collect();
        let peak: f64 = bumps.iter().map(|b| 2.0 * b.0).sum();
        let bump = ScalarField::from_fn(g, |x, y| {
            bumps
                .iter()
                .map(|&(a, kx, ky)| a * (1.0 + (2.0 * PI * (kx * (x - x0) + ky * (y - y0))).cos()))
                .sum()
        });
        let square = f.map(|v| v * v);
        for t in [1e-4, 1e-3, 1e-2, 1e-1] {
            for data in [&bump, &square] {
                let h = heat_semigroup(data, t, 1.0).unwrap();
                worst[3] = worst[3].max(-min_value(&h));
            }
            let h = heat_semigroup(&bump, t, 1.0).unwrap();
            worst[4] = worst[4].max(max_value(&h) - peak);
        }

        let gn = Grid::new(N, N, 1.0, 1.0, BcMode::SquareNeumann).unwrap();
        let coeffs: Vec<[f64; 4]> = (0..10).map(|_| [0.0; 4].map(|_| rng.random_range(-1.0..1.0))).collect();
        let modes = |i: usize| ((1 + i % 4) as f64, (i / 4) as f64);
        let fn_ = ScalarField::from_fn(gn, |x, y| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c[0] * (PI * modes(i).0 * x).cos() * (PI * modes(i).1 * y).cos())
                .sum()
        });
        let vn = VectorField::from_fn(gn, |x, y| {
            coeffs.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, c)| {
                let (p, q) = modes(i);
                (
                    a + c[1] * (PI * p * x).sin() * (PI * q * y).cos(),
                    b + c[2] * (PI * q * x).cos() * (PI * p * y).sin(),
                )
            })
        });
        let adj_n = (inner_vec(&gradient(&fn_), &vn) + inner(&fn_, &divergence(&vn))).abs();
        let heat_n = sup_diff(
            &heat_semigroup(&heat_semigroup(&fn_, s, 1.0).unwrap(), t, 1.0).unwrap().values,
            &heat_semigroup(&fn_, t + s, 1.0).unwrap().values,
        );
        worst[5] = worst[5].max(adj_n / OPERATOR_TOL).max(heat_n / SEMIGROUP_TOL);
    }
    let tols = [OPERATOR_TOL, OPERATOR_TOL, SEMIGROUP_TOL, SEMIGROUP_TOL, SEMIGROUP_TOL, 1.0];
    let pass = worst.iter().zip(&tols).all(|(w, t)| w <= t);
    let detail = names
        .iter()
        .zip(&worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(4, pass, format!("worst errors: {detail} (neumann as fraction of tol)"));
    assert!(pass);
}

#[test]
fn criterion_05_entropy_dissipation() {
    let k = calibrate_entropy_weight(&deterministic(DT), &initial(grid())).unwrap();
    let lambdas = lambda_constants(&CoefficientSet::default_for(grid())).unwrap();
    let mut rows = Vec::new();
    let mut monotone = true;
    for dt in [DT, DT_HALF] {
        let tr = run_with(&deterministic(dt), None);
        for w in tr.samples.windows(2) {
            let (a, b) = (&w[0].acc, &w[1].acc);
            monotone &= b.fisher >= a.fisher
                && b.hessian >= a.hessian
                && b.quartic >= a.quartic
                && b.cross >= a.cross
                && b.enstrophy >= a.enstrophy;
        }
        let res = entropy_dissipation_check(&tr.samples, &CoefficientSet::default_for(grid()), k, &lambdas).unwrap();
        rows.push((dt, res.max_positive, DISSIPATION_SLOPE * dt));
    }
    let ratio = rows[1].1 / rows[0].1;
    let within = rows.iter().all(|r| r.1 <= r.2);
    let pass = within && ratio <= HALVING_RATIO && monotone;
    verdict(
        5,
        pass,
        format!(
            "K {k:.4e}; max residual {:.4} <= {:.1} (dt 1e-3), {:.4} <= {:.2} (dt 5e-4); ratio {ratio:.3}; accumulators monotone {monotone}",
            rows[0].1, rows[0].2, rows[1].1, rows[1].2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_expected_entropy_bound() {
    let g = grid();
    let init = initial(g);
    let cfg = {
        let mut c = stochastic(DT, NoiseParams::default());
        c.sample_stride = 10;
        c
    };
    let k = calibrate_entropy_weight(&deterministic(DT), &init).unwrap();
    let lambdas = lambda_constants(&cfg.coefficients).unwrap();
    let mut det_cfg = deterministic(DT);
    det_cfg.sample_stride = 10;
    let det = run(&det_cfg, &init, None, &mut []).unwrap();
    let det_residual = ito_entropy_residual(&det.samples, &det_cfg.coefficients, k, 0.0, &lambdas).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut ratios = Vec::new();
    for master in ENSEMBLE_SEEDS {
        let spec = EnsembleSpec {
            members: ENSEMBLE_MEMBERS,
            master_seed: master,
            k,
            c: 0.0,
        };
        let rep = ensemble_run(&cfg, &init, &spec).unwrap();
        let n = rep.survivors as f64;
        let se = (0..rep.times.len())
            .map(|i| {
                let vals: Vec<f64> = rep.members.iter().filter(|m| m.survived()).map(|m| m.residual[i]).collect();
                let mean = vals.iter().sum::<f64>() / n;
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            })
            .fold(0.0_f64, f64::max);
        let tol = det_residual.max_positive + 3.0 * se;
        let finite = rep.sup_entropy.mean.is_finite() && rep.survivors == ENSEMBLE_MEMBERS;
        pass &= finite && rep.max_mean_residual <= tol;
        ratios.push(rep.ratio);
        lines.push(format!(
            "seed {master}: E[sup E] {:.4}, ratio {:.4}, mean residual {:.4e} <= {tol:.4e}",
            rep.sup_entropy.mean, rep.ratio, rep.max_mean_residual
        ));
    }
    let spread = (ratios[0] - ratios[1]).abs() / (0.5 * (ratios[0] + ratios[1]));
    pass &= spread <= RATIO_AGREEMENT;
    verdict(6, pass, format!("N = {ENSEMBLE_MEMBERS}, K {k:.4e}; {}; ratio spread {spread:.2e}", lines.join("; ")));
    assert!(pass);
}

#[test]
fn criteria_07_08_gagliardo_nirenberg_and_log_entropy() {
    let calibration = density_family(70, CALIBRATION_SIZE);
    let constant = calibrate_gn(&calibration, GN_SAFETY);
    let family = density_family(71, FAMILY_SIZE);
    let gn_min = family.iter().map(|n| gn_check(n, constant).margin).fold(f64::INFINITY, f64::min);
    let slack_min = family.iter().map(|n| log_entropy_bound(n).slack).fold(f64::INFINITY, f64::min);
    let pass7 = gn_min >= 0.0;
    let pass8 = slack_min >= 0.0;
    verdict(7, pass7, format!("calibrated C {constant:.4}; min margin {gn_min:.4e} over {FAMILY_SIZE} fields"));
    verdict(8, pass8, format!("min slack {slack_min:.4e} over {FAMILY_SIZE} fields"));
    assert!(pass7 && pass8);
}

#[test]
fn criterion_09_galerkin_sweep() {
    let params = NoiseParams {
        m: 32,
        ..multiplicative()
    };
    let mut cfg = stochastic(DT, params);
    cfg.sample_stride = 10;
    cfg.track_dissipation = false;
    let table = galerkin_sweep(&cfg, &initial(grid()), &GALERKIN_LEVELS, 9).unwrap();
    let pass = table.strictly_decreasing();
    let detail = table
        .rows
        .iter()
        .map(|r| format!("{}->{}: n {:.2e} c {:.2e} u {:.2e}", r.m_coarse, r.m_fine, r.d_n, r.d_c, r.d_u))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(9, pass, detail);
    assert!(pass);
}

#[test]
fn criterion_10_pathwise_uniqueness() {
    let mut cfg = stochastic(DT, NoiseParams::default());
    cfg.sample_stride = 10;
    cfg.track_dissipation = false;
    let bytes = |tr: &Trajectory| {
        let coeffs = &cfg.coefficients;
        let recs: Vec<TimeseriesRecord> =
            tr.samples.iter().map(|s| TimeseriesRecord::of(s, coeffs, 1.0, None).unwrap()).collect();
        let mut out = Vec::new();
        emit_timeseries(&mut out, &recs).unwrap();
        for s in &tr.samples {
            out.extend(encode_snapshot(s));
        }
        out
    };
    let identical = bytes(&run_with(&cfg, Some(10))) == bytes(&run_with(&cfg, Some(10)));

    let init = initial(grid());
    let reports: Vec<_> = TWIN_DELTAS.iter().map(|&d| twin_run(&cfg, &init, d, 10).unwrap()).collect();
    let reference = reports[0].fitted_constant;
    let spread = reports
        .iter()
        .map(|r| (r.fitted_constant - reference).abs() / reference.abs())
        .fold(0.0_f64, f64::max);
    let smallest = &reports[2].stability;
    let l0 = smallest.lambda[0];
    let margin = smallest
        .lambda
        .iter()
        .zip(&smallest.xi_integral)
        .map(|(l, x)| (l / l0).ln() - reference * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let pass = identical && margin <= GRONWALL_TOL && spread <= GRONWALL_STABILITY;
    let fits = reports
        .iter()
        .map(|r| format!("{:.5}", r.fitted_constant))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        10,
        pass,
        format!("byte-identical reruns {identical}; fitted C {fits}; spread {spread:.2e}; margin at delta0 1e-8 {margin:.2e} (tol {GRONWALL_TOL:e})"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_convergence_orders() {
    let init = initial(grid());
    let det = refinement_study(&deterministic(DT), &init, &REFINE_DTS, REFINE_REFERENCE, 1, 0).unwrap();
    let sto = refinement_study(&stochastic(DT, multiplicative()), &init, &REFINE_DTS, REFINE_REFERENCE, REFINE_PATHS, 11)
        .unwrap();
    let pass_det = det.slope >= DETERMINISTIC_SLOPE.0 && det.slope <= DETERMINISTIC_SLOPE.1 && !det.inconclusive;
    let pass_sto = sto.slope >= STOCHASTIC_SLOPE_MIN && !sto.inconclusive;
    verdict(
        11,
        pass_det && pass_sto,
        format!(
            "deterministic slope {:.3} (R2 {:.4}); stochastic strong slope {:.3} (R2 {:.4}, {REFINE_PATHS} paths)",
            det.slope, det.r_squared, sto.slope, sto.r_squared
        ),
    );
    assert!(pass_det && pass_sto);
}

#[test]
fn criterion_12_coefficient_validator() {
    let g = Grid::unit_torus(8).unwrap();
    let set = |k| CoefficientSet::from_presets(1.0, 1.0, 1.0, ChiPreset::One, k, ScalarField::zeros(g), 1.0).unwrap();
    let linear = set(KPreset::Linear);
    let saturating = set(KPreset::Saturating);
    let h = validate_coefficients(&linear, ConditionMode::H);
    let a = validate_coefficients(&linear, ConditionMode::A);
    let failed: Vec<&str> = a.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let linear_ok = h.passed && !a.passed && failed == ["(k/chi)'' < 0"];
    let sat = validate_coefficients(&saturating, ConditionMode::A);

    // chi = 1: 2 lambda0 = min k'/2, 2 lambda1 = min -k''/2 over [0, 1]
    let oracle = |k1: &dyn Fn(f64) -> f64, k2: &dyn Fn(f64) -> f64| {
        let pts = (0..=100_000).map(|i| i as f64 / 100_000.0);
        let l0 = pts.clone().map(|c| 0.25 * k1(c)).fold(f64::INFINITY, f64::min);
        let l1 = pts.map(|c| -0.25 * k2(c)).fold(f64::INFINITY, f64::min);
        (l0, l1)
    };
    let lin = oracle(&|_| 1.0, &|_| 0.0);
    let satur = oracle(&|c| 1.0 / (1.0 + c).powi(2), &|c| -2.0 / (1.0 + c).powi(3));
    let ll = lambda_constants(&linear).unwrap();
    let ls = lambda_constants(&saturating).unwrap();
    let err = (ll.lambda0 - lin.0)
        .abs()
        .max((ll.lambda1 - lin.1).abs())
        .max((ls.lambda0 - satur.0).abs())
        .max((ls.lambda1 - satur.1).abs());
    let pass = linear_ok && sat.passed && err <= LAMBDA_TOL;
    verdict(
        12,
        pass,
        format!(
            "k = c: (H) {}, (A) fails {failed:?}; k = c/(1+c): (A) {}; lambda (1/4, 0) and (1/16, 1/16) max error {err:.1e}",
            h.passed, sat.passed
        ),
    );
    assert!(pass);
}
