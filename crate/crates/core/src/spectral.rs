//! Fourier and cosine transforms over a [`Grid`].
//!
//! Torus grids use the plain 2D DFT. Neumann grids are handled by mirroring
//! the samples into a doubled periodic box (even reflection for scalars, odd
//! reflection across the wall normal to a vector component), which turns the
//! cosine transform into an ordinary DFT. Every operator therefore works on a
//! single periodic spectrum.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::{BcMode, Grid, ScalarField};

/// Reflection symmetry used when extending a Neumann-grid field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Transform coefficients of a scalar field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    pub grid: Grid,
    /// Row-major `(sx, sy)` coefficients; `sx = nx` on the torus, `2 nx` on the Neumann square.
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Transform shape `(sx, sy)`.
    pub fn shape(&self) -> (usize, usize) {
        let ops = SpectralOps::for_grid(&self.grid);
        (ops.sx, ops.sy)
    }

    /// `||f||_{L2}^2` recovered from the coefficients (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        SpectralOps::for_grid(&self.grid).l2_sq(&self.coeffs)
    }
}

/// Forward transform (DFT on the torus, cosine transform on the Neumann square).
pub fn spectral_forward(f: &ScalarField) -> SpectralField {
    let ops = SpectralOps::for_grid(&f.grid);
    SpectralField {
        grid: f.grid,
        coeffs: ops.forward(&f.values, Parity::Even, Parity::Even),
    }
}

/// Inverse of [`spectral_forward`].
pub fn spectral_backward(f: &SpectralField) -> ScalarField {
    let ops = SpectralOps::for_grid(&f.grid);
    ScalarField {
        grid: f.grid,
        values: ops.backward(&f.coeffs),
    }
}

/// Precomputed transform plans and wavenumber tables for one grid shape.
pub struct SpectralOps {
    pub grid: Grid,
    /// Transform sizes (doubled on the Neumann square).
    pub sx: usize,
    pub sy: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers `2 pi k / L`, Nyquist entry zeroed.
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// Signed integer wavenumbers (Nyquist reported as `+s/2`).
    pub kx_int: Vec<i64>,
    pub ky_int: Vec<i64>,
    keep_x: Vec<bool>,
    keep_y: Vec<bool>,
    /// Ratio of extended to physical area (1 on the torus, 4 on the square).
    ext_factor: f64,
    ext_area: f64,
}

type CacheKey = (usize, usize, u64, u64, BcMode);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<SpectralOps>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<SpectralOps>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn wavenumbers(s: usize, length: f64) -> (Vec<f64>, Vec<i64>, Vec<bool>) {
    let mut k = Vec::with_capacity(s);
    let mut k_int = Vec::with_capacity(s);
    let mut keep = Vec::with_capacity(s);
    for i in 0..s {
        let ki = if i <= s / 2 {
            i as i64
        } else {
            i as i64 - s as i64
        };
        k_int.push(ki);
        k.push(if i == s / 2 {
            0.0
        } else {
            2.0 * PI * ki as f64 / length
        });
        // 2/3 rule: keep |k| < s/3
        keep.push(3 * ki.unsigned_abs() < s as u64);
    }
    (k, k_int, keep)
}

impl SpectralOps {
    /// Shared, lazily-built transform context for `grid`.
    pub fn for_grid(grid: &Grid) -> Arc<SpectralOps> {
        let key = (
            grid.nx,
            grid.ny,
            grid.lx.to_bits(),
            grid.ly.to_bits(),
            grid.bc_mode,
        );
        let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(key)
            .or_insert_with(|| Arc::new(SpectralOps::build(*grid)))
            .clone()
    }

    fn build(grid: Grid) -> SpectralOps {
        let (sx, sy, lx, ly, ext_factor) = match grid.bc_mode {
            BcMode::Torus => (grid.nx, grid.ny, grid.lx, grid.ly, 1.0),
            BcMode::SquareNeumann => (
                2 * grid.nx,
                2 * grid.ny,
                2.0 * grid.lx,
                2.0 * grid.ly,
                4.0,
            ),
        };
        let mut planner = FftPlanner::new();
        let (kx, kx_int, keep_x) = wavenumbers(sx, lx);
        let (ky, ky_int, keep_y) = wavenumbers(sy, ly);
        SpectralOps {
            grid,
            sx,
            sy,
            fwd_x: planner.plan_fft_forward(sx),
            fwd_y: planner.plan_fft_forward(sy),
            inv_x: planner.plan_fft_inverse(sx),
            inv_y: planner.plan_fft_inverse(sy),
            kx,
            ky,
            kx_int,
            ky_int,
            keep_x,
            keep_y,
            ext_factor,
            ext_area: lx * ly,
        }
    }

    pub fn len(&self) -> usize {
        self.sx * self.sy
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let (sx, sy) = (self.sx, self.sy);
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        fy.process(data);
        let mut t = vec![Complex64::new(0.0, 0.0); sx * sy];
        for i in 0..sx {
            for j in 0..sy {
                t[j * sx + i] = data[i * sy + j];
            }
        }
        fx.process(&mut t);
        let scale = if inverse {
            1.0 / (sx * sy) as f64
        } else {
            1.0
        };
        for j in 0..sy {
            for i in 0..sx {
                data[i * sy + j] = t[j * sx + i] * scale;
            }
        }
    }

    /// Mirrors physical samples into the transform box.
    fn extend(&self, values: &[f64], px: Parity, py: Parity) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        match self.grid.bc_mode {
            BcMode::Torus => values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            BcMode::SquareNeumann => {
                let (sx, sy) = (self.sx, self.sy);
                let mut out = vec![Complex64::new(0.0, 0.0); sx * sy];
                for i in 0..sx {
                    let (si, fi) = if i < nx {
                        (i, 1.0)
                    } else {
                        (sx - 1 - i, if px == Parity::Odd { -1.0 } else { 1.0 })
                    };
                    for j in 0..sy {
                        let (sj, fj) = if j < ny {
                            (j, 1.0)
                        } else {
                            (sy - 1 - j, if py == Parity::Odd { -1.0 } else { 1.0 })
                        };
                        out[i * sy + j] = Complex64::new(fi * fj * values[si * ny + sj], 0.0);
                    }
                }
                out
            }
        }
    }

    /// Forward transform with the given reflection parities (ignored on the torus).
    pub fn forward(&self, values: &[f64], px: Parity, py: Parity) -> Vec<Complex64> {
        let mut data = self.extend(values, px, py);
        self.fft2(&mut data, false);
        data
    }

    pub fn forward_scalar(&self, values: &[f64]) -> Vec<Complex64> {
        self.forward(values, Parity::Even, Parity::Even)
    }

    /// Inverse transform, restricted to the physical samples.
    pub fn backward(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft2(&mut data, true);
        match self.grid.bc_mode {
            BcMode::Torus => data.iter().map(|c| c.re).collect(),
            BcMode::SquareNeumann => {
                let (nx, ny) = (self.grid.nx, self.grid.ny);
                let mut out = Vec::with_capacity(nx * ny);
                for i in 0..nx {
                    for j in 0..ny {
                        out.push(data[i * self.sy + j].re);
                    }
                }
                out
            }
        }
    }

    /// Forward transforms of two real fields with a single complex FFT.
    pub fn forward_pair(
        &self,
        a: &[f64],
        pa: (Parity, Parity),
        b: &[f64],
        pb: (Parity, Parity),
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let ea = self.extend(a, pa.0, pa.1);
        let eb = self.extend(b, pb.0, pb.1);
        let mut z: Vec<Complex64> = ea
            .iter()
            .zip(&eb)
            .map(|(x, y)| Complex64::new(x.re, y.re))
            .collect();
        self.fft2(&mut z, false);
        let (sx, sy) = (self.sx, self.sy);
        let mut fa = vec![Complex64::new(0.0, 0.0); sx * sy];
        let mut fb = vec![Complex64::new(0.0, 0.0); sx * sy];
        for i in 0..sx {
            let mi = (sx - i) % sx;
            for j in 0..sy {
                let mj = (sy - j) % sy;
                let zp = z[i * sy + j];
                let zm = z[mi * sy + mj].conj();
                fa[i * sy + j] = (zp + zm) * 0.5;
                fb[i * sy + j] = (zp - zm) * Complex64::new(0.0, -0.5);
            }
        }
        (fa, fb)
    }

    /// Inverse transforms of two Hermitian spectra with a single complex FFT.
    pub fn backward_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.fft2(&mut z, true);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut ra = Vec::with_capacity(nx * ny);
        let mut rb = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let v = z[i * self.sy + j];
                ra.push(v.re);
                rb.push(v.im);
            }
        }
        (ra, rb)
    }

    pub fn ddx(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = c.to_vec();
        for i in 0..self.sx {
            let k = Complex64::new(0.0, self.kx[i]);
            for v in &mut out[i * self.sy..(i + 1) * self.sy] {
                *v *= k;
            }
        }
        out
    }

    pub fn ddy(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = c.to_vec();
        for i in 0..self.sx {
            for j in 0..self.sy {
                out[i * self.sy + j] *= Complex64::new(0.0, self.ky[j]);
            }
        }
        out
    }

    /// `|xi|^2` for transform entry `(i, j)`, derivative wavenumbers.
    #[inline]
    pub fn k2(&self, i: usize, j: usize) -> f64 {
        self.kx[i] * self.kx[i] + self.ky[j] * self.ky[j]
    }

    /// Multiplies by the Laplacian symbol `-|xi|^2`.
    pub fn laplacian(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = c.to_vec();
        for i in 0..self.sx {
            for j in 0..self.sy {
                out[i * self.sy + j] *= -self.k2(i, j);
            }
        }
        out
    }

    /// Divergence `i xi . (vx, vy)` in spectral space.
    pub fn div(&self, vx: &[Complex64], vy: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for i in 0..self.sx {
            for j in 0..self.sy {
                let p = i * self.sy + j;
                out[p] = Complex64::new(0.0, self.kx[i]) * vx[p] + Complex64::new(0.0, self.ky[j]) * vy[p];
            }
        }
        out
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn truncate(&self, c: &mut [Complex64]) {
        for i in 0..self.sx {
            for j in 0..self.sy {
                if !(self.keep_x[i] && self.keep_y[j]) {
                    c[i * self.sy + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn truncated(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = c.to_vec();
        self.truncate(&mut out);
        out
    }

    /// Whether `(i, j)` survives the 2/3-rule truncation.
    pub fn kept(&self, i: usize, j: usize) -> bool {
        self.keep_x[i] && self.keep_y[j]
    }

    /// Physical `||f||_{L2}^2` from transform coefficients.
    pub fn l2_sq(&self, c: &[Complex64]) -> f64 {
        let n = self.len() as f64;
        let s: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        s * self.ext_area / (n * n) / self.ext_factor
    }

    /// Physical `<f, g>_{L2}` from transform coefficients.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        let n = self.len() as f64;
        let s: f64 = a.iter().zip(b).map(|(p, q)| (p * q.conj()).re).sum();
        s * self.ext_area / (n * n) / self.ext_factor
    }

    /// `||grad f||^2` of physical samples via Parseval.
    pub fn grad_norm_sq(&self, values: &[f64]) -> f64 {
        let c = self.forward_scalar(values);
        self.grad_norm_sq_spec(&c)
    }

    pub fn grad_norm_sq_spec(&self, c: &[Complex64]) -> f64 {
        let n = self.len() as f64;
        let mut s = 0.0;
        for i in 0..self.sx {
            for j in 0..self.sy {
                s += self.k2(i, j) * c[i * self.sy + j].norm_sqr();
            }
        }
        s * self.ext_area / (n * n) / self.ext_factor
    }
}
