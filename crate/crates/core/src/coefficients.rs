//! Coefficient functions `chi(c)`, `k(c)`, the potential `phi` and the
//! transform `Psi(c) = int_0^c sqrt(chi(s) / k(s)) ds`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Step used by finite-difference derivatives when no closed form is registered.
pub const FD_STEP: f64 = 1e-5;

/// A scalar coefficient function with optional closed-form derivatives.
#[derive(Clone)]
pub struct Profile {
    name: String,
    f: RealFn,
    d1: Option<RealFn>,
    d2: Option<RealFn>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("name", &self.name)
            .field("closed_forms", &self.has_closed_forms())
            .finish()
    }
}

impl Profile {
    /// A profile known only pointwise; derivatives fall back to finite differences.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile {
            name: name.into(),
            f: Arc::new(f),
            d1: None,
            d2: None,
        }
    }

    pub fn with_derivatives(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Profile {
            name: name.into(),
            f: Arc::new(f),
            d1: Some(Arc::new(d1)),
            d2: Some(Arc::new(d2)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_closed_forms(&self) -> bool {
        self.d1.is_some() && self.d2.is_some()
    }

    #[inline]
    pub fn value(&self, c: f64) -> f64 {
        (self.f)(c)
    }

    pub fn d1(&self, c: f64) -> f64 {
        match &self.d1 {
            Some(d) => d(c),
            None => fd_d1(&*self.f, c),
        }
    }

    pub fn d2(&self, c: f64) -> f64 {
        match &self.d2 {
            Some(d) => d(c),
            None => fd_d2(&*self.f, c),
        }
    }
}

/// First derivative by centred differences, one-sided (second order) near 0.
pub fn fd_d1(f: &dyn Fn(f64) -> f64, c: f64) -> f64 {
    let h = FD_STEP;
    if c >= h {
        (f(c + h) - f(c - h)) / (2.0 * h)
    } else {
        (-3.0 * f(c) + 4.0 * f(c + h) - f(c + 2.0 * h)) / (2.0 * h)
    }
}

/// Second derivative by centred differences, one-sided (second order) near 0.
pub fn fd_d2(f: &dyn Fn(f64) -> f64, c: f64) -> f64 {
    let h = FD_STEP;
    if c >= h {
        (f(c + h) - 2.0 * f(c) + f(c - h)) / (h * h)
    } else {
        (2.0 * f(c) - 5.0 * f(c + h) + 4.0 * f(c + 2.0 * h) - f(c + 3.0 * h)) / (h * h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiPreset {
    /// `chi(c) = 1`
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KPreset {
    /// `k(c) = c`
    Linear,
    /// `k(c) = c / (1 + c)`, strictly concave.
    Saturating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiPreset {
    Zero,
    /// `phi = cos(2 pi x / lx) + cos(2 pi y / ly)`
    Cosine,
}

impl ChiPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            ChiPreset::One => "one",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one" => Some(ChiPreset::One),
            _ => None,
        }
    }

    pub fn profile(self) -> Profile {
        match self {
            ChiPreset::One => Profile::with_derivatives("one", |_| 1.0, |_| 0.0, |_| 0.0),
        }
    }
}

impl KPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            KPreset::Linear => "linear",
            KPreset::Saturating => "saturating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(KPreset::Linear),
            "saturating" => Some(KPreset::Saturating),
            _ => None,
        }
    }

    pub fn profile(self) -> Profile {
        match self {
            KPreset::Linear => Profile::with_derivatives("linear", |c| c, |_| 1.0, |_| 0.0),
            KPreset::Saturating => Profile::with_derivatives(
                "saturating",
                |c| c / (1.0 + c),
                |c| 1.0 / ((1.0 + c) * (1.0 + c)),
                |c| -2.0 / ((1.0 + c) * (1.0 + c) * (1.0 + c)),
            ),
        }
    }
}

impl PhiPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            PhiPreset::Zero => "zero",
            PhiPreset::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(PhiPreset::Zero),
            "cosine" => Some(PhiPreset::Cosine),
            _ => None,
        }
    }

    pub fn field(self, grid: Grid, amplitude: f64) -> ScalarField {
        use std::f64::consts::PI;
        match self {
            PhiPreset::Zero => ScalarField::zeros(grid),
            PhiPreset::Cosine => ScalarField::from_fn(grid, |x, y| {
                amplitude * ((2.0 * PI * x / grid.lx).cos() + (2.0 * PI * y / grid.ly).cos())
            }),
        }
    }
}

/// Diffusivities, coupling functions and potential of the system.
#[derive(Clone)]
pub struct CoefficientSet {
    pub delta: f64,
    pub mu: f64,
    pub nu: f64,
    pub chi: Profile,
    pub k: Profile,
    pub phi: ScalarField,
    /// Bound `C_M` on the initial chemical concentration.
    pub c_max: f64,
    psi_closed: Option<RealFn>,
    sqrt_ratio_d1_closed: Option<RealFn>,
    psi_table: Arc<OnceLock<PsiTable>>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("delta", &self.delta)
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("chi", &self.chi)
            .field("k", &self.k)
            .field("c_max", &self.c_max)
            .field("closed_psi", &self.psi_closed.is_some())
            .finish()
    }
}

impl CoefficientSet {
    /// General constructor. Derived quantities without closed forms use quadrature
    /// or finite differences.
    pub fn new(
        delta: f64,
        mu: f64,
        nu: f64,
        chi: Profile,
        k: Profile,
        phi: ScalarField,
        c_max: f64,
    ) -> Result<Self> {
        for (name, v) in [("delta", delta), ("mu", mu), ("nu", nu), ("c_max", c_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("coefficients.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(CoefficientSet {
            delta,
            mu,
            nu,
            chi,
            k,
            phi,
            c_max,
            psi_closed: None,
            sqrt_ratio_d1_closed: None,
            psi_table: Arc::new(OnceLock::new()),
        })
    }

    /// Preset-based constructor; registers closed forms where they exist.
    #[allow(clippy::too_many_arguments)]
    pub fn from_presets(
        delta: f64,
        mu: f64,
        nu: f64,
        chi: ChiPreset,
        k: KPreset,
        phi: ScalarField,
        c_max: f64,
    ) -> Result<Self> {
        let mut set = CoefficientSet::new(delta, mu, nu, chi.profile(), k.profile(), phi, c_max)?;
        if chi == ChiPreset::One && k == KPreset::Linear {
            set.psi_closed = Some(Arc::new(|c: f64| 2.0 * c.max(0.0).sqrt()));
            set.sqrt_ratio_d1_closed = Some(Arc::new(|c: f64| 0.5 / c.sqrt()));
        }
        Ok(set)
    }

    /// `delta = mu = nu = 1`, `chi = 1`, `k(c) = c`, `phi = 0`, `C_M = 1`.
    pub fn default_for(grid: Grid) -> Self {
        CoefficientSet::from_presets(
            1.0,
            1.0,
            1.0,
            ChiPreset::One,
            KPreset::Linear,
            ScalarField::zeros(grid),
            1.0,
        )
        .expect("default coefficients are valid")
    }

    pub fn with_phi(mut self, phi: ScalarField) -> Self {
        self.phi = phi;
        self
    }

    pub fn has_closed_psi(&self) -> bool {
        self.psi_closed.is_some()
    }

    /// `(k / chi)(c)`
    pub fn ratio(&self, c: f64) -> f64 {
        self.k.value(c) / self.chi.value(c)
    }

    pub fn ratio_d1(&self, c: f64) -> f64 {
        if self.chi.has_closed_forms() && self.k.has_closed_forms() {
            let (x, x1) = (self.chi.value(c), self.chi.d1(c));
            let (k, k1) = (self.k.value(c), self.k.d1(c));
            (k1 * x - k * x1) / (x * x)
        } else {
            fd_d1(&|s| self.ratio(s), c)
        }
    }

    pub fn ratio_d2(&self, c: f64) -> f64 {
        if self.chi.has_closed_forms() && self.k.has_closed_forms() {
            let (x, x1, x2) = (self.chi.value(c), self.chi.d1(c), self.chi.d2(c));
            let (k, k1, k2) = (self.k.value(c), self.k.d1(c), self.k.d2(c));
            // (k/x)'' = k''/x - 2 k' x'/x^2 - k x''/x^2 + 2 k x'^2/x^3
            k2 / x - 2.0 * k1 * x1 / (x * x) - k * x2 / (x * x) + 2.0 * k * x1 * x1 / (x * x * x)
        } else {
            fd_d2(&|s| self.ratio(s), c)
        }
    }

    /// `(chi k)'(c)`
    pub fn product_d1(&self, c: f64) -> f64 {
        if self.chi.has_closed_forms() && self.k.has_closed_forms() {
            self.chi.d1(c) * self.k.value(c) + self.chi.value(c) * self.k.d1(c)
        } else {
            fd_d1(&|s| self.chi.value(s) * self.k.value(s), c)
        }
    }

    /// Whether all derived derivatives come from closed forms (no finite-difference noise).
    pub fn derivatives_exact(&self) -> bool {
        self.chi.has_closed_forms() && self.k.has_closed_forms()
    }

    /// `Psi'(c) = sqrt(chi(c) / k(c))`
    pub fn psi_d1(&self, c: f64) -> f64 {
        (self.chi.value(c) / self.k.value(c)).sqrt()
    }

    /// `d/dc sqrt(k(c) / chi(c))`
    pub fn sqrt_ratio_d1(&self, c: f64) -> f64 {
        match &self.sqrt_ratio_d1_closed {
            Some(f) => f(c),
            None => self.ratio_d1(c) / (2.0 * self.ratio(c).sqrt()),
        }
    }

    /// `Psi(c)` at a single point.
    pub fn psi(&self, c: f64) -> f64 {
        match &self.psi_closed {
            Some(f) => f(c),
            None => self.psi_quadrature(c),
        }
    }

    /// `Psi(c)` by adaptive quadrature after the substitution `s = t^2`,
    /// which removes the `s^{-1/2}` endpoint singularity.
    pub fn psi_quadrature(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        let g0 = 2.0 * (self.chi.value(0.0) / self.k.d1(0.0)).sqrt();
        let g = |t: f64| {
            if t == 0.0 {
                g0
            } else {
                let s = t * t;
                2.0 * t * (self.chi.value(s) / self.k.value(s)).sqrt()
            }
        };
        adaptive_simpson(&g, 0.0, c.sqrt(), 1e-13)
    }

    /// Pointwise `Psi(c)` over a field. Without a closed form a cached Hermite
    /// table over `[0, 2 C_M]` is used, with direct quadrature beyond it.
    pub fn psi_field(&self, c: &ScalarField) -> ScalarField {
        match &self.psi_closed {
            Some(f) => c.map(|v| f(v)),
            None => {
                let table = self.psi_table.get_or_init(|| PsiTable::build(self, 2.0 * self.c_max));
                c.map(|v| table.eval(self, v))
            }
        }
    }

    /// Pointwise `Psi'(c)` over a field.
    pub fn psi_d1_field(&self, c: &ScalarField) -> ScalarField {
        c.map(|v| self.psi_d1(v))
    }
}

/// Cubic Hermite table of `Psi` in the variable `t = sqrt(c)`.
#[derive(Debug)]
struct PsiTable {
    t_max: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PsiTable {
    const NODES: usize = 4096;

    fn build(set: &CoefficientSet, c_top: f64) -> Self {
        let t_max = c_top.sqrt();
        let h = t_max / Self::NODES as f64;
        let g0 = 2.0 * (set.chi.value(0.0) / set.k.d1(0.0)).sqrt();
        let g = |t: f64| {
            if t == 0.0 {
                g0
            } else {
                let s = t * t;
                2.0 * t * (set.chi.value(s) / set.k.value(s)).sqrt()
            }
        };
        let mut values = Vec::with_capacity(Self::NODES + 1);
        let mut slopes = Vec::with_capacity(Self::NODES + 1);
        let mut acc = 0.0;
        values.push(0.0);
        slopes.push(g(0.0));
        for i in 0..Self::NODES {
            let a = i as f64 * h;
            acc += adaptive_simpson(&g, a, a + h, 1e-15);
            values.push(acc);
            slopes.push(g(a + h));
        }
        PsiTable {
            t_max,
            h,
            values,
            slopes,
        }
    }

    fn eval(&self, set: &CoefficientSet, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        let t = c.sqrt();
        if t >= self.t_max {
            return set.psi_quadrature(c);
        }
        let i = ((t / self.h) as usize).min(Self::NODES - 1);
        let s = (t - i as f64 * self.h) / self.h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
