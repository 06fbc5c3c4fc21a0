//! Finite-volume estimators for n-point correlations and moments.
//!
//! Test functions are (modulated) Gaussians, whose Fourier transforms are
//! available in closed form with the convention `ĥ(k) = ∫ h(x) e^{-2πik·x} dx`.

use crate::error::{Error, Result};
use crate::modelset::PointPatch;
use crate::numeric::{batch_means, pairwise_sum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MIN_SIGMA: f64 = 1e-6;
/// Supports are taken as `6σ` for margin checks.
pub const SUPPORT_SIGMAS: f64 = 6.0;
/// Local sums include points out to `8σ` (relative truncation `e^{-32}`).
const SUM_SIGMAS: f64 = 8.0;
const BATCHES: usize = 20;

/// `h(x) = A · exp(-|x-c|²/(2σ²)) · e^{2πi q·x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTestFunction {
    pub center: Vec<f64>,
    pub sigma: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: Complex64,
    /// Modulation frequency `q`; empty means zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frequency: Vec<f64>,
}

fn unit_amplitude() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl GaussianTestFunction {
    pub fn new(center: Vec<f64>, sigma: f64, amplitude: Complex64) -> Result<Self> {
        let g = GaussianTestFunction {
            center,
            sigma,
            amplitude,
            frequency: Vec::new(),
        };
        g.validate()?;
        Ok(g)
    }

    /// Unit-amplitude Gaussian.
    pub fn unit(center: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::new(center, sigma, unit_amplitude())
    }

    /// Modulated Gaussian centred at the origin, normalised so `ĥ(q) = 1`.
    pub fn spectral_probe(frequency: Vec<f64>, sigma: f64) -> Result<Self> {
        let d = frequency.len();
        let norm = (2.0 * PI * sigma * sigma).powf(d as f64 / 2.0);
        let g = GaussianTestFunction {
            center: vec![0.0; d],
            sigma,
            amplitude: Complex64::new(1.0 / norm, 0.0),
            frequency,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_frequency(mut self, q: Vec<f64>) -> Result<Self> {
        self.frequency = q;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= MIN_SIGMA) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Gaussian width {} below {MIN_SIGMA}",
                self.sigma
            )));
        }
        if !self.frequency.is_empty() && self.frequency.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                got: self.frequency.len(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn freq(&self, k: usize) -> f64 {
        self.frequency.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for k in 0..self.center.len() {
            let dx = x[k] - self.center[k];
            r2 += dx * dx;
            phase += self.freq(k) * x[k];
        }
        let mag = (-r2 / (2.0 * self.sigma * self.sigma)).exp();
        if phase == 0.0 {
            self.amplitude * mag
        } else {
            self.amplitude * Complex64::from_polar(mag, 2.0 * PI * phase)
        }
    }

    /// `ĥ(k)` in closed form.
    pub fn fourier(&self, k: &[f64]) -> Complex64 {
        let d = self.center.len();
        let s2 = self.sigma * self.sigma;
        let mut dk2 = 0.0;
        let mut phase = 0.0;
        for j in 0..d {
            let dk = k[j] - self.freq(j);
            dk2 += dk * dk;
            phase += dk * self.center[j];
        }
        let mag = (2.0 * PI * s2).powf(d as f64 / 2.0) * (-2.0 * PI * PI * s2 * dk2).exp();
        self.amplitude * Complex64::from_polar(mag, -2.0 * PI * phase)
    }

    /// `∫ h = ĥ(0)`.
    pub fn integral(&self) -> Complex64 {
        self.fourier(&vec![0.0; self.dim()])
    }

    /// `sup |ĥ|`, attained at the modulation frequency.
    pub fn fourier_peak(&self) -> f64 {
        self.amplitude.norm() * (2.0 * PI * self.sigma * self.sigma).powf(self.dim() as f64 / 2.0)
    }

    /// The function whose transform is `conj ĥ(-k)`, i.e. `conj h`.
    pub fn conj(&self) -> Self {
        GaussianTestFunction {
            center: self.center.clone(),
            sigma: self.sigma,
            amplitude: self.amplitude.conj(),
            frequency: self.frequency.iter().map(|q| -q).collect(),
        }
    }

    /// Largest coordinate reach `|c|_∞ + 6σ`.
    pub fn reach(&self) -> f64 {
        self.center.iter().fold(0.0f64, |a, c| a.max(c.abs())) + SUPPORT_SIGMAS * self.sigma
    }
}

/// Translates `t` at which spatial averages are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslateGrid {
    pub spacing: f64,
    /// Grid points keep at least this distance from `∂C_R`.
    pub margin: f64,
}

impl TranslateGrid {
    pub fn new(spacing: f64, margin: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(margin >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs spacing > 0 and margin ≥ 0, got {spacing}, {margin}"
            )));
        }
        Ok(TranslateGrid { spacing, margin })
    }

    /// Spacing `0.25·min σ`, margin just wide enough for `fns`.
    pub fn default_for(fns: &[GaussianTestFunction]) -> Result<Self> {
        let min_sigma = fns.iter().map(|g| g.sigma).fold(f64::INFINITY, f64::min);
        let reach = fns.iter().map(|g| g.reach()).fold(0.0, f64::max);
        if !min_sigma.is_finite() {
            return Err(Error::InvalidArgument("no test functions".into()));
        }
        TranslateGrid::new(0.25 * min_sigma, reach)
    }

    pub fn axis(&self, r: f64) -> Vec<f64> {
        let lo = -r / 2.0 + self.margin;
        let span = r - 2.0 * self.margin;
        if span <= 0.0 {
            return Vec::new();
        }
        let count = (span / self.spacing + 1e-9).floor() as usize;
        (0..count).map(|j| lo + j as f64 * self.spacing).collect()
    }

    /// Row-major product grid in `d` dimensions.
    pub fn points(&self, r: f64, d: usize) -> Vec<Vec<f64>> {
        let axis = self.axis(r);
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        if axis.is_empty() {
            Vec::new()
        } else {
            out
        }
    }

    fn check(&self, required: f64) -> Result<()> {
        if self.margin + 1e-12 < required {
            return Err(Error::MarginViolation {
                required,
                available: self.margin,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSum {
    pub value: Complex64,
    /// Bound on the contribution of points of `Λ` outside `C_R`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub stderr: f64,
    pub samples: usize,
}

fn check_dims(patch: &PointPatch, fns: &[GaussianTestFunction]) -> Result<()> {
    for g in fns {
        g.validate()?;
        if g.dim() != patch.d() {
            return Err(Error::DimensionMismatch {
                expected: patch.d(),
                got: g.dim(),
            });
        }
    }
    Ok(())
}

/// `Σ_{x∈patch} h(x - shift)` restricted to the points within `8σ` of the centre.
pub(crate) fn local_sum(patch: &PointPatch, h: &GaussianTestFunction, shift: &[f64]) -> Complex64 {
    let d = patch.d();
    let radius = SUM_SIGMAS * h.sigma;
    let c0 = h.center[0] + shift[0];
    let mut acc = Complex64::new(0.0, 0.0);
    let mut arg = vec![0.0; d];
    for p in &patch.points[patch.slab(c0 - radius, c0 + radius)] {
        let mut far = false;
        for k in 0..d {
            arg[k] = p.x[k] - shift[k];
            if (arg[k] - h.center[k]).abs() > radius {
                far = true;
            }
        }
        if !far {
            acc += h.eval(&arg);
        }
    }
    acc
}

/// `N_h` of the patch translated by `-shift`, with a bound on the part of `Λ`
/// outside the cube that the patch cannot see.
pub fn eval_test_sum(patch: &PointPatch, h: &GaussianTestFunction, origin_shift: &[f64]) -> Result<TestSum> {
    check_dims(patch, std::slice::from_ref(h))?;
    if origin_shift.len() != patch.d() {
        return Err(Error::DimensionMismatch {
            expected: patch.d(),
            got: origin_shift.len(),
        });
    }
    if patch.is_empty() || h.amplitude == Complex64::new(0.0, 0.0) {
        return Ok(TestSum {
            value: Complex64::new(0.0, 0.0),
            tail_bound: 0.0,
        });
    }
    let value = local_sum(patch, h, origin_shift);
    let d = patch.d();
    let half = patch.r / 2.0;
    let delta = (0..d)
        .map(|k| half - (h.center[k] + origin_shift[k]).abs())
        .fold(f64::INFINITY, f64::min);
    let sep = patch.min_separation().min(patch.r);
    let s = h.sigma;
    let tail_bound = if delta <= 0.0 {
        f64::INFINITY
    } else {
        // 1-D bound per face: g(δ) + (1/r)∫_δ^∞ g, widened by the number of
        // lattice rows within 6σ along the remaining directions.
        let g = (-delta * delta / (2.0 * s * s)).exp();
        let integral = s * (PI / 2.0).sqrt() * erfc_upper(delta / (s * 2f64.sqrt()));
        let rows = (1.0 + 2.0 * SUPPORT_SIGMAS * s / sep).powi(d as i32 - 1);
        h.amplitude.norm() * 2.0 * d as f64 * rows * (g + integral / sep)
    };
    Ok(TestSum { value, tail_bound })
}

/// Upper bound for `erfc(z)` for `z ≥ 0`: `e^{-z²}`.
fn erfc_upper(z: f64) -> f64 {
    (-z * z).exp()
}

/// `(1/vol C_R) Σ_{x} Π_i Σ_{y} g_i(-x+y)`: the finite-volume `(n+1)`-point
/// correlation of the separable function `g_1 ⊗ … ⊗ g_n`.
pub fn npoint_correlation(patch: &PointPatch, fns: &[GaussianTestFunction]) -> Result<Estimate> {
    if fns.is_empty() {
        return Err(Error::InvalidArgument("need at least one test function".into()));
    }
    check_dims(patch, fns)?;
    let required = fns.iter().map(|g| g.reach()).fold(0.0, f64::max);
    if required >= patch.r / 2.0 {
        return Err(Error::MarginViolation {
            required,
            available: patch.r / 2.0,
        });
    }
    if patch.is_empty() {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            stderr: 0.0,
            samples: 0,
        });
    }
    let terms: Vec<Complex64> = patch
        .points
        .par_iter()
        .map(|p| {
            fns.iter()
                .map(|g| local_sum(patch, g, &p.x))
                .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v)
        })
        .collect();
    let (_, se) = batch_means(&terms, BATCHES);
    let scale = patch.len() as f64 / patch.volume();
    Ok(Estimate {
        value: pairwise_sum(&terms) / patch.volume(),
        stderr: se * scale,
        samples: terms.len(),
    })
}


/// Grid average of `Π_i N_{h_i}(-t + Λ)`: a Birkhoff estimate of the moment
/// `μ_n(h_1, …, h_n)`, with a batch-means standard error.
pub fn birkhoff_moment(
    patch: &PointPatch,
    fns: &[GaussianTestFunction],
    grid: &TranslateGrid,
) -> Result<Estimate> {
    if fns.is_empty() {
        return Err(Error::InvalidArgument("need at least one test function".into()));
    }
    check_dims(patch, fns)?;
    grid.check(fns.iter().map(|g| g.reach()).fold(0.0, f64::max))?;
    let ts = grid.points(patch.r, patch.d());
    if ts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let terms: Vec<Complex64> = ts
        .par_iter()
        .map(|t| {
            fns.iter()
                .map(|g| local_sum(patch, g, t))
                .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v)
        })
        .collect();
    let (value, stderr) = batch_means(&terms, BATCHES);
    Ok(Estimate {
        value,
        stderr,
        samples: terms.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedMomentReport {
    /// `μ_n(G)` with `G(x, y_1, …) = g(x) Π (T_x h_i)(y_i)`.
    pub lhs: Complex64,
    pub lhs_stderr: f64,
    /// `(∫g) · γ^{(n)}(h_1, …, h_{n-1})`.
    pub rhs: Complex64,
    pub relative_discrepancy: f64,
}

/// Compares the moment of a translate-product function against the
/// correlation estimate scaled by `∫g`.
pub fn verify_reduced_moment_identity(
    patch: &PointPatch,
    g: &GaussianTestFunction,
    hs: &[GaussianTestFunction],
    grid: &TranslateGrid,
) -> Result<ReducedMomentReport> {
    if hs.is_empty() {
        return Err(Error::InvalidArgument("need n ≥ 2 (at least one h)".into()));
    }
    check_dims(patch, std::slice::from_ref(g))?;
    check_dims(patch, hs)?;
    let inner = hs.iter().map(|h| h.reach()).fold(0.0, f64::max);
    grid.check(g.reach() + inner)?;
    let ts = grid.points(patch.r, patch.d());
    if ts.is_empty() {
        return Err(Error::EmptyGrid);
    }

    // P(x) = Π_i Σ_y h_i(y - x), needed only near the grid region.
    let products: Vec<Complex64> = patch
        .points
        .par_iter()
        .map(|p| {
            hs.iter()
                .map(|h| local_sum(patch, h, &p.x))
                .fold(Complex64::new(1.0, 0.0), |acc, v| acc * v)
        })
        .collect();

    let d = patch.d();
    let radius = SUM_SIGMAS * g.sigma;
    let terms: Vec<Complex64> = ts
        .par_iter()
        .map(|t| {
            let c0 = g.center[0] + t[0];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut arg = vec![0.0; d];
            for i in patch.slab(c0 - radius, c0 + radius) {
                let x = &patch.points[i].x;
                for k in 0..d {
                    arg[k] = x[k] - t[k];
                }
                acc += g.eval(&arg) * products[i];
            }
            acc
        })
        .collect();
    let (lhs, lhs_stderr) = batch_means(&terms, BATCHES);
    let corr = npoint_correlation(patch, hs)?;
    let rhs = g.integral() * corr.value;
    let relative_discrepancy = if rhs.norm() > 0.0 {
        (lhs - rhs).norm() / rhs.norm()
    } else if lhs.norm() == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ReducedMomentReport {
        lhs,
        lhs_stderr,
        rhs,
        relative_discrepancy,
    })
}
