//! Multi-run studies: ensembles, coupled Galerkin truncations, twin runs and
//! time-step refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::diagnostics::{
    calibrate_k, entropy_with, fit_gronwall_constant, ito_entropy_residual, lambda_constants, psi_gradient_energy,
    stability_functionals, LambdaConstants, StabilityReport,
};
use crate::error::{Error, Result};
use crate::field::{l2_norm, l2_norm_vec};
use crate::initial::perturb_velocity;
use crate::noise::{sample_path, NoiseModel, WienerPath};
use crate::stepper::{run, State, Stepper, StepperConfig, Trajectory};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of member `i` under master seed `master`.
pub fn member_seed(master: u64, i: u64) -> u64 {
    mix(mix(master) ^ i)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ensemble,
    GalerkinSweep,
    TwinRun,
    Refinement,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::GalerkinSweep => "sweep",
            ExperimentKind::TwinRun => "twin",
            ExperimentKind::Refinement => "refine",
        }
    }
}

/// Path for one member, or `None` when the noise is silent.
fn member_path(cfg: &StepperConfig, seed: u64, dt: f64) -> Result<Option<WienerPath>> {
    if cfg.noise.is_silent() {
        Ok(None)
    } else {
        Ok(Some(sample_path(seed, cfg.noise.m(), cfg.horizon, dt)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl Stats {
    /// Sample statistics; quantiles by linear interpolation of order statistics.
    pub fn of(values: &[f64]) -> Stats {
        let count = values.len();
        if count == 0 {
            return Stats {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                q05: f64::NAN,
                q50: f64::NAN,
                q95: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (count - 1) as f64;
            let (i, f) = (x.floor() as usize, x.fract());
            if i + 1 < count {
                sorted[i] * (1.0 - f) + sorted[i + 1] * f
            } else {
                sorted[i]
            }
        };
        Stats {
            count,
            mean,
            variance,
            min: sorted[0],
            max: sorted[count - 1],
            q05: q(0.05),
            q50: q(0.5),
            q95: q(0.95),
        }
    }
}

/// Safety factor applied to calibrated constants.
pub const CALIBRATION_SAFETY: f64 = 1.1;

/// Velocity weight `K` of the entropy functional: the safety factor times the largest
/// ratio of the instantaneous dissipation balance to `||grad u||^2` along the
/// deterministic run from `initial`.
pub fn calibrate_entropy_weight(cfg: &StepperConfig, initial: &State) -> Result<f64> {
    let mut det = cfg.clone();
    det.noise = NoiseModel::silent(&cfg.noise.grid);
    det.track_dissipation = false;
    det.strict = false;
    let traj = run(&det, initial, None, &mut [])?;
    let stepper = Stepper::new(&det, det.dt)?;
    calibrate_k(&traj.samples, &stepper, &lambda_constants(&det.coefficients)?, CALIBRATION_SAFETY)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: usize,
    pub master_seed: u64,
    /// Weight `K` of the velocity terms in the entropy functional.
    pub k: f64,
    /// Constant multiplying `t + int ||u||^2` in the integrated balance.
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub index: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub sup_entropy: f64,
    pub sup_kinetic: f64,
    pub enstrophy_integral: f64,
    pub times: Vec<f64>,
    /// Integrated stochastic entropy balance at each sample.
    pub residual: Vec<f64>,
}

impl MemberResult {
    pub fn survived(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub members: Vec<MemberResult>,
    pub survivors: usize,
    pub sup_entropy: Stats,
    pub sup_kinetic: Stats,
    pub enstrophy_integral: Stats,
    /// `int n0 ln n0 + ||grad Psi(c0)||^2 + ||u0||^2 + 1`
    pub d0: f64,
    /// `E[sup E] / D0`
    pub ratio: f64,
    pub times: Vec<f64>,
    /// Ensemble mean of the integrated balance residual.
    pub mean_residual: Vec<f64>,
    pub max_mean_residual: f64,
    pub lambdas: LambdaConstants,
}

/// Data functional bounding the expected entropy supremum.
pub fn data_functional(initial: &State, coeffs: &CoefficientSet) -> Result<f64> {
    let cell: f64 = initial
        .n
        .values
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>()
        * initial.n.grid.cell_area();
    Ok(cell + 2.0 * psi_gradient_energy(&initial.c, coeffs)? + l2_norm_vec(&initial.u).powi(2) + 1.0)
}

fn run_member(cfg: &StepperConfig, initial: &State, index: usize, seed: u64, spec: &EnsembleSpec, lambdas: &LambdaConstants) -> MemberResult {
    let outcome = (|| -> Result<MemberResult> {
        let path = member_path(cfg, seed, cfg.dt)?;
        let traj = run(cfg, initial, path.as_ref(), &mut [])?;
        let coeffs = &cfg.coefficients;
        let mut sup_entropy = f64::NEG_INFINITY;
        let mut sup_kinetic = 0.0_f64;
        for s in &traj.samples {
            sup_entropy = sup_entropy.max(entropy_with(s, coeffs, spec.k, lambdas)?.total);
            sup_kinetic = sup_kinetic.max(l2_norm_vec(&s.u).powi(2));
        }
        let res = ito_entropy_residual(&traj.samples, coeffs, spec.k, spec.c, lambdas)?;
        Ok(MemberResult {
            index,
            seed,
            error: None,
            sup_entropy,
            sup_kinetic,
            enstrophy_integral: traj.final_state().acc.enstrophy,
            times: res.times,
            residual: res.residuals,
        })
    })();
    outcome.unwrap_or_else(|e| MemberResult {
        index,
        seed,
        error: Some(e.to_string()),
        sup_entropy: f64::NAN,
        sup_kinetic: f64::NAN,
        enstrophy_integral: f64::NAN,
        times: Vec::new(),
        residual: Vec::new(),
    })
}

/// `N` independent paths from one initial state; member `i` uses seed `member_seed(master, i)`.
pub fn ensemble_run(cfg: &StepperConfig, initial: &State, spec: &EnsembleSpec) -> Result<EnsembleReport> {
    if spec.members < 2 {
        return Err(Error::config("experiment.members", "an ensemble needs at least 2 members"));
    }
    cfg.validate()?;
    let lambdas = lambda_constants(&cfg.coefficients)?;
    let members: Vec<MemberResult> = (0..spec.members)
        .into_par_iter()
        .map(|i| run_member(cfg, initial, i, member_seed(spec.master_seed, i as u64), spec, &lambdas))
        .collect();
    let ok: Vec<&MemberResult> = members.iter().filter(|m| m.survived()).collect();
    let pick = |f: fn(&MemberResult) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<_>>();
    let sup_entropy = Stats::of(&pick(|m| m.sup_entropy));
    let d0 = data_functional(initial, &cfg.coefficients)?;
    let times = ok.first().map(|m| m.times.clone()).unwrap_or_default();
    let mut mean_residual = vec![0.0; times.len()];
    for m in &ok {
        for (acc, r) in mean_residual.iter_mut().zip(&m.residual) {
            *acc += r / ok.len() as f64;
        }
    }
    let max_mean_residual = mean_residual.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    Ok(EnsembleReport {
        survivors: ok.len(),
        sup_kinetic: Stats::of(&pick(|m| m.sup_kinetic)),
        enstrophy_integral: Stats::of(&pick(|m| m.enstrophy_integral)),
        ratio: sup_entropy.mean / d0,
        sup_entropy,
        d0,
        times,
        mean_residual,
        max_mean_residual,
        lambdas,
        members,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub m_coarse: usize,
    pub m_fine: usize,
    pub d_n: f64,
    pub d_c: f64,
    pub d_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalerkinTable {
    pub seed: u64,
    pub rows: Vec<CauchyRow>,
}

impl GalerkinTable {
    /// Every column strictly decreasing down the table.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].d_n < w[0].d_n && w[1].d_c < w[0].d_c && w[1].d_u < w[0].d_u)
    }
}

/// `L2([0, T]; L2)` distances of `n`, `c` and `u` by the trapezoid rule over samples.
pub fn space_time_distances(a: &Trajectory, b: &Trajectory) -> Result<(f64, f64, f64)> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::contract("trajectories have different sample counts"));
    }
    let sq: Vec<(f64, f64, f64, f64)> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            (
                x.t,
                l2_norm(&x.n.lin_comb(1.0, &y.n, -1.0)).powi(2),
                l2_norm(&x.c.lin_comb(1.0, &y.c, -1.0)).powi(2),
                l2_norm_vec(&x.u.lin_comb(1.0, &y.u, -1.0)).powi(2),
            )
        })
        .collect();
    let mut d = (0.0, 0.0, 0.0);
    for w in sq.windows(2) {
        let h = 0.5 * (w[1].0 - w[0].0);
        d.0 += h * (w[0].1 + w[1].1);
        d.1 += h * (w[0].2 + w[1].2);
        d.2 += h * (w[0].3 + w[1].3);
    }
    Ok((d.0.sqrt(), d.1.sqrt(), d.2.sqrt()))
}

/// Runs at each truncation level on one shared path (the run at `m` reads its first `m` columns)
/// and tabulates distances between consecutive levels.
pub fn galerkin_sweep(cfg: &StepperConfig, initial: &State, ms: &[usize], seed: u64) -> Result<GalerkinTable> {
    if ms.len() < 2 {
        return Err(Error::config("experiment.m_list", "need at least two truncation levels"));
    }
    if ms.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("experiment.m_list", "truncation levels must be nondecreasing"));
    }
    let m_max = *ms.last().unwrap();
    if m_max > cfg.noise.m() {
        return Err(Error::config(
            "noise.m",
            format!("truncation {m_max} exceeds the {} configured modes", cfg.noise.m()),
        ));
    }
    let path = sample_path(seed, m_max, cfg.horizon, cfg.dt)?;
    let trajectories: Vec<Trajectory> = ms
        .par_iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.noise = cfg.noise.truncated(m)?;
            run(&c, initial, Some(&path), &mut [])
        })
        .collect::<Result<_>>()?;
    let rows = ms
        .windows(2)
        .zip(trajectories.windows(2))
        .map(|(m, t)| {
            let (d_n, d_c, d_u) = space_time_distances(&t[0], &t[1])?;
            Ok(CauchyRow {
                m_coarse: m[0],
                m_fine: m[1],
                d_n,
                d_c,
                d_u,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GalerkinTable { seed, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinReport {
    pub delta0: f64,
    pub seed: u64,
    pub stability: StabilityReport,
    /// Smallest constant making the Gronwall form hold at every sample.
    pub fitted_constant: f64,
    /// Least-squares slope of `log Lambda/Lambda(0)` against `int Xi`.
    pub least_squares_constant: f64,
}

/// Runs `initial` and `initial + delta0 e_1` on one path.
pub fn twin_run(cfg: &StepperConfig, initial: &State, delta0: f64, seed: u64) -> Result<TwinReport> {
    let path = member_path(cfg, seed, cfg.dt)?;
    let perturbed = perturb_velocity(initial, delta0)?;
    let (a, b) = rayon::join(
        || run(cfg, initial, path.as_ref(), &mut []),
        || run(cfg, &perturbed, path.as_ref(), &mut []),
    );
    let stability = stability_functionals(&a?, &b?, None)?;
    let fitted_constant = fit_gronwall_constant(&stability.lambda, &stability.xi_integral);
    let l0 = stability.lambda.first().copied().unwrap_or(0.0);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    if l0 > 0.0 {
        for (l, x) in stability.lambda.iter().zip(&stability.xi_integral) {
            sxy += (l / l0).ln() * x;
            sxx += x * x;
        }
    }
    Ok(TwinReport {
        delta0,
        seed,
        fitted_constant,
        least_squares_constant: if sxx > 0.0 { sxy / sxx } else { 0.0 },
        stability,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub paths: usize,
    /// Root-mean-square (over paths) final-time error of `(n, c, u)` in `L2`.
    pub errors: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
    /// Fit rejected: `R^2 < 0.9` or not enough distinct nonzero errors.
    pub inconclusive: bool,
}

/// Slope and `R^2` of a least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

fn final_error(a: &State, b: &State) -> f64 {
    (l2_norm(&a.n.lin_comb(1.0, &b.n, -1.0)).powi(2)
        + l2_norm(&a.c.lin_comb(1.0, &b.c, -1.0)).powi(2)
        + l2_norm_vec(&a.u.lin_comb(1.0, &b.u, -1.0)).powi(2))
    .sqrt()
}

/// Final-time errors at each `dt` against a run at `reference_dt` on coupled paths
/// (coarse increments are sums of the reference ones). `paths` independent paths
/// are averaged in mean square. Silent noise uses one deterministic run and, when
/// `reference_dt` is strictly finer than every listed step, the Richardson
/// reference `2 y(reference_dt) - y(2 reference_dt)`.
pub fn refinement_study(
    cfg: &StepperConfig,
    initial: &State,
    dts: &[f64],
    reference_dt: f64,
    paths: usize,
    master_seed: u64,
) -> Result<RefinementReport> {
    if dts.is_empty() {
        return Err(Error::config("experiment.dt_list", "empty step list"));
    }
    if dts.iter().any(|dt| *dt < reference_dt) {
        return Err(Error::config("experiment.reference_dt", "reference step must be the finest"));
    }
    let paths = if cfg.noise.is_silent() { 1 } else { paths.max(1) };
    let richardson = dts.iter().all(|dt| *dt > reference_dt);
    let run_at = |dt: f64, path: Option<&WienerPath>| -> Result<State> {
        let mut c = cfg.clone();
        c.dt = dt;
        c.sample_stride = usize::MAX;
        c.track_dissipation = false;
        Ok(run(&c, initial, path, &mut [])?.final_state().clone())
    };
    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let path = member_path(cfg, member_seed(master_seed, p as u64), reference_dt)?;
            let mut reference = run_at(reference_dt, path.as_ref())?;
            if path.is_none() && richardson {
                let half = run_at(2.0 * reference_dt, None)?;
                reference.n = reference.n.lin_comb(2.0, &half.n, -1.0);
                reference.c = reference.c.lin_comb(2.0, &half.c, -1.0);
                reference.u = reference.u.lin_comb(2.0, &half.u, -1.0);
            }
            dts.iter()
                .map(|&dt| Ok(final_error(&run_at(dt, path.as_ref())?, &reference)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = (0..dts.len())
        .map(|i| (per_path.iter().map(|e| e[i] * e[i]).sum::<f64>() / paths as f64).sqrt())
        .collect();
    let (slope, r_squared) = log_log_fit(dts, &errors);
    Ok(RefinementReport {
        dts: dts.to_vec(),
        reference_dt,
        paths,
        inconclusive: !(r_squared >= 0.9) || !slope.is_finite(),
        errors,
        slope,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub version: String,
    pub master_seed: u64,
    pub member_seeds: Vec<u64>,
    pub spec: serde_json::Value,
    pub files: Vec<String>,
    pub timings_ms: Vec<f64>,
}

impl Manifest {
    pub fn new(kind: ExperimentKind, master_seed: u64, spec: serde_json::Value) -> Self {
        Manifest {
            kind,
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            member_seeds: Vec::new(),
            spec,
            files: Vec::new(),
            timings_ms: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::initial::{default_initial, InitialParams};
    use crate::noise::{NoiseModel, NoiseParams};

    fn small_cfg(noise: NoiseModel) -> (StepperConfig, State) {
        let g = Grid::unit_torus(16).unwrap();
        let co = CoefficientSet::default_for(g);
        let mut cfg = StepperConfig::new(5e-3, 0.05, co, noise).unwrap();
        cfg.sample_stride = 2;
        let init = default_initial(g, &InitialParams::default(), 1.0).unwrap();
        (cfg, init)
    }

    fn noisy(m: usize, b: f64) -> NoiseModel {
        let g = Grid::unit_torus(16).unwrap();
        NoiseModel::from_params(&g, &NoiseParams { m, b_scale: b, ..Default::default() }).unwrap()
    }

    #[test]
    fn member_seeds_are_prefix_stable_and_distinct() {
        let a: Vec<u64> = (0..4).map(|i| member_seed(7, i)).collect();
        let b: Vec<u64> = (0..8).map(|i| member_seed(7, i)).collect();
        assert_eq!(a[..], b[..4]);
        let mut s = b.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 8);
        assert_ne!(member_seed(8, 0), member_seed(7, 0));
    }

    #[test]
    fn silent_ensemble_has_zero_variance() {
        let g = Grid::unit_torus(16).unwrap();
        let (cfg, init) = small_cfg(NoiseModel::silent(&g));
        let r = ensemble_run(&cfg, &init, &EnsembleSpec { members: 4, master_seed: 1, k: 1.0, c: 0.0 }).unwrap();
        assert_eq!(r.survivors, 4);
        assert_eq!(r.sup_entropy.variance, 0.0);
        assert_eq!(r.sup_kinetic.variance, 0.0);
        assert!(r.ratio.is_finite());
        assert!(ensemble_run(&cfg, &init, &EnsembleSpec { members: 1, master_seed: 1, k: 1.0, c: 0.0 }).is_err());
    }

    #[test]
    fn doubling_members_reuses_paths() {
        let (cfg, init) = small_cfg(noisy(4, 0.5));
        let spec = EnsembleSpec { members: 2, master_seed: 3, k: 1.0, c: 0.0 };
        let a = ensemble_run(&cfg, &init, &spec).unwrap();
        let b = ensemble_run(&cfg, &init, &EnsembleSpec { members: 4, ..spec }).unwrap();
        assert_eq!(a.members[..], b.members[..2]);
    }

    #[test]
    fn sweep_trivial_cases() {
        let (cfg, init) = small_cfg(noisy(16, 0.0));
        let same = galerkin_sweep(&cfg, &init, &[8, 8], 5).unwrap();
        assert_eq!((same.rows[0].d_n, same.rows[0].d_c, same.rows[0].d_u), (0.0, 0.0, 0.0));

        let g = Grid::unit_torus(16).unwrap();
        let mut q = vec![0.0; 16];
        q[..4].fill(1.0);
        let model = NoiseModel::with_coefficients(&g, q, vec![1.0; 16], vec![0.0; 16], 0).unwrap();
        let (cfg, init) = small_cfg(model);
        let t = galerkin_sweep(&cfg, &init, &[4, 8, 16], 5).unwrap();
        assert!(t.rows.iter().all(|r| r.d_n == 0.0 && r.d_c == 0.0 && r.d_u == 0.0));
    }

    #[test]
    fn twin_trivial_cases() {
        let (cfg, init) = small_cfg(noisy(4, 0.0));
        let z = twin_run(&cfg, &init, 0.0, 2).unwrap();
        assert!(z.stability.lambda.iter().all(|l| *l == 0.0));
        let r = twin_run(&cfg, &init, 1e-6, 2).unwrap();
        // u0 + delta0 e1 - u0 loses about |u0| eps / delta0 relative accuracy
        assert!((r.stability.lambda[0] - 1e-12).abs() <= 1e-9 * 1e-12);
        assert!(r.stability.max_margin() <= 1e-12);
    }

    #[test]
    fn repeated_dt_is_flagged() {
        let g = Grid::unit_torus(16).unwrap();
        let (cfg, init) = small_cfg(NoiseModel::silent(&g));
        let r = refinement_study(&cfg, &init, &[5e-3, 5e-3], 5e-3, 1, 0).unwrap();
        assert_eq!(r.errors, vec![0.0, 0.0]);
        assert!(r.inconclusive && r.slope.is_nan());
    }

    #[test]
    fn heat_submode_is_exact_under_refinement() {
        let g = Grid::unit_torus(16).unwrap();
        let co = CoefficientSet::from_presets(
            1.0,
            1.0,
            1.0,
            crate::coefficients::ChiPreset::One,
            crate::coefficients::KPreset::Linear,
            crate::field::ScalarField::zeros(g),
            1.0,
        )
        .unwrap();
        let cfg = StepperConfig::deterministic(5e-3, 0.05, co).unwrap();
        let n = crate::field::ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos() * (4.0 * std::f64::consts::PI * y).sin());
        let init = State::new(n, crate::field::ScalarField::zeros(g), crate::field::VectorField::zeros(g)).unwrap();
        let r = refinement_study(&cfg, &init, &[1e-2, 5e-3], 2.5e-3, 1, 0).unwrap();
        assert!(r.errors.iter().all(|e| *e <= 1e-12), "{:?}", r.errors);
    }

    #[test]
    fn stats_quantiles() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((s.mean, s.min, s.max, s.q50), (3.0, 1.0, 5.0, 3.0));
        assert!((s.variance - 2.5).abs() < 1e-15);
        assert!((s.q05 - 1.2).abs() < 1e-12);
    }
}
