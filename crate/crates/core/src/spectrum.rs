//! Bragg spectrum of a model set: exponential-sum amplitudes, closed-form
//! intensities, enumeration of the projected Fourier module, and extinctions.

use crate::error::{Error, Result};
use crate::modelset::PointPatch;
use crate::numeric::{cis_turns, dot, norm, pairwise_sum};
use crate::scheme::{CutProjectScheme, ModuleVector, Side};
use crate::window::Window;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

pub const DEFAULT_EPS_EXT: f64 = 1e-12;
/// Relative to `density²`.
pub const DEFAULT_EPS_BRAGG_REL: f64 = 1e-6;
pub const DEFAULT_RECORD_CAP: u64 = 5_000_000;
/// Physical positions closer than this are treated as the same frequency.
pub const ALIAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Bragg,
    Extinction,
    BelowThreshold,
    /// Numerically zero, but at the physical position of a Bragg record.
    Aliased,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Bragg => "bragg",
            Classification::Extinction => "extinction",
            Classification::BelowThreshold => "below-threshold",
            Classification::Aliased => "aliased",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub k: ModuleVector,
    pub k_phys: Vec<f64>,
    pub k_star: Vec<f64>,
    /// Exponential-sum estimate, present once amplitudes are attached.
    pub amplitude: Option<Complex64>,
    pub intensity_theory: f64,
    pub classification: Classification,
}

impl PeakRecord {
    pub fn is_bragg(&self) -> bool {
        self.classification == Classification::Bragg
    }
}

/// `(1/vol C_R) Σ_{x ∈ patch} e^{2πi k·x}`.
pub fn bombieri_taylor(patch: &PointPatch, k_phys: &[f64]) -> Result<Complex64> {
    if k_phys.len() != patch.d() {
        return Err(Error::DimensionMismatch {
            expected: patch.d(),
            got: k_phys.len(),
        });
    }
    if patch.is_empty() {
        return Err(Error::EmptyPatch);
    }
    Ok(exp_sum(patch, k_phys))
}

fn exp_sum(patch: &PointPatch, k_phys: &[f64]) -> Complex64 {
    let terms: Vec<Complex64> = patch.points.iter().map(|p| cis_turns(dot(k_phys, &p.x))).collect();
    pairwise_sum(&terms) / patch.volume()
}

/// `1̂_W(y)`.
pub fn window_ft(window: &Window, y: &[f64]) -> Complex64 {
    window.fourier_transform(y)
}

fn intensity_from_star(window: &Window, covolume: f64, k_star: &[f64]) -> f64 {
    let neg: Vec<f64> = k_star.iter().map(|y| -y).collect();
    window.fourier_transform(&neg).norm_sqr() / (covolume * covolume)
}

/// `|1̂_W(-k⋆)|² / covol²` for a Fourier-side `k` of `scheme`'s module.
pub fn theoretical_intensity(scheme: &CutProjectScheme, window: &Window, k: &ModuleVector) -> Result<f64> {
    let dual = fourier_scheme(scheme)?;
    let k_star = dual.star_coords(k)?;
    if window.dim() != k_star.len() {
        return Err(Error::DimensionMismatch {
            expected: k_star.len(),
            got: window.dim(),
        });
    }
    Ok(intensity_from_star(window, scheme.covolume(), &k_star))
}

/// Accepts either side and returns the scheme indexing the Fourier module.
fn fourier_scheme(scheme: &CutProjectScheme) -> Result<CutProjectScheme> {
    match scheme.side() {
        Side::Physical => scheme.dual(),
        Side::Fourier => Ok(scheme.clone()),
    }
}

/// Radius in internal space beyond which `|1̂_W|² / covol² < ε`.
pub fn star_cut(window: &Window, covolume: f64, eps: f64) -> f64 {
    window.perimeter() / (2.0 * PI * covolume * eps.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub scheme: CutProjectScheme,
    pub window: Window,
    pub k_max: f64,
    pub eps_bragg: f64,
    pub eps_ext: f64,
    pub star_cut: f64,
    /// Sorted by `k`.
    pub records: Vec<PeakRecord>,
    /// Id of the patch the amplitudes came from.
    pub patch_id: Option<u64>,
    index: HashMap<ModuleVector, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub k_max: f64,
    pub eps_bragg: f64,
    pub eps_ext: f64,
    pub cap: u64,
}

impl SpectrumParams {
    /// Default thresholds for the given density.
    pub fn with_defaults(k_max: f64, density: f64) -> Self {
        SpectrumParams {
            k_max,
            eps_bragg: DEFAULT_EPS_BRAGG_REL * density * density,
            eps_ext: DEFAULT_EPS_EXT,
            cap: DEFAULT_RECORD_CAP,
        }
    }
}

/// Enumerates the projected Fourier module in `|k_phys| ≤ k_max`,
/// `|k⋆| ≤ star_cut(ε_bragg)`. Every `k` in the physical range with
/// intensity `≥ ε_bragg` is included.
pub fn enumerate_spectrum(
    scheme: &CutProjectScheme,
    window: &Window,
    params: SpectrumParams,
) -> Result<SpectrumTable> {
    let SpectrumParams {
        k_max,
        eps_bragg,
        eps_ext,
        cap,
    } = params;
    if !(k_max > 0.0) || !(eps_ext > 0.0) || !(eps_ext <= eps_bragg) {
        return Err(Error::InvalidArgument(format!(
            "need k_max > 0 and 0 < eps_ext ≤ eps_bragg, got {k_max}, {eps_ext}, {eps_bragg}"
        )));
    }
    window.validate()?;
    let physical = match scheme.side() {
        Side::Physical => scheme.clone(),
        Side::Fourier => scheme.dual()?,
    };
    let dual = physical.dual()?;
    let (d, e) = (physical.d(), physical.e());
    if window.dim() != e {
        return Err(Error::DimensionMismatch {
            expected: e,
            got: window.dim(),
        });
    }
    let covol = physical.covolume();
    let zero_intensity = window.volume().powi(2) / (covol * covol);
    if eps_bragg > zero_intensity {
        return Err(Error::InvalidArgument(format!(
            "eps_bragg {eps_bragg} exceeds the intensity {zero_intensity} at k = 0"
        )));
    }
    let cut = star_cut(window, covol, eps_bragg);
    let mut lo = vec![-k_max; d];
    lo.extend(std::iter::repeat_n(-cut, e));
    let hi: Vec<f64> = lo.iter().map(|x| -x).collect();
    let candidates = dual.lattice_points_in_box(&lo, &hi, cap)?;

    let mut records: Vec<PeakRecord> = candidates
        .into_par_iter()
        .filter_map(|k| {
            let full = dual.full_coords(&k).ok()?;
            let (k_phys, k_star) = (full[..d].to_vec(), full[d..].to_vec());
            if norm(&k_phys) > k_max || norm(&k_star) > cut {
                return None;
            }
            let intensity = intensity_from_star(window, covol, &k_star);
            let classification = if intensity >= eps_bragg {
                Classification::Bragg
            } else if intensity < eps_ext {
                Classification::Extinction
            } else {
                Classification::BelowThreshold
            };
            Some(PeakRecord {
                k,
                k_phys,
                k_star,
                amplitude: None,
                intensity_theory: intensity,
                classification,
            })
        })
        .collect();
    records.sort_by(|a, b| a.k.cmp(&b.k));
    mark_aliases(&mut records);

    let index = records.iter().enumerate().map(|(i, r)| (r.k.clone(), i)).collect();
    Ok(SpectrumTable {
        scheme: physical,
        window: window.clone(),
        k_max,
        eps_bragg,
        eps_ext,
        star_cut: cut,
        records,
        patch_id: None,
        index,
    })
}

fn mark_aliases(records: &mut [PeakRecord]) {
    let mut bragg: Vec<&[f64]> = records
        .iter()
        .filter(|r| r.is_bragg())
        .map(|r| r.k_phys.as_slice())
        .collect();
    bragg.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let aliased: Vec<bool> = records
        .iter()
        .map(|r| {
            if r.is_bragg() {
                return false;
            }
            let start = bragg.partition_point(|p| p[0] < r.k_phys[0] - ALIAS_TOL);
            bragg[start..]
                .iter()
                .take_while(|p| p[0] <= r.k_phys[0] + ALIAS_TOL)
                .any(|p| {
                    let diff: Vec<f64> = p.iter().zip(&r.k_phys).map(|(a, b)| a - b).collect();
                    norm(&diff) <= ALIAS_TOL
                })
        })
        .collect();
    for (r, a) in records.iter_mut().zip(aliased) {
        if a {
            r.classification = Classification::Aliased;
        }
    }
}

impl SpectrumTable {
    pub fn fourier_scheme(&self) -> Result<CutProjectScheme> {
        self.scheme.dual()
    }

    pub fn get(&self, k: &ModuleVector) -> Option<&PeakRecord> {
        self.index.get(k).map(|&i| &self.records[i])
    }

    pub fn contains(&self, k: &ModuleVector) -> bool {
        self.index.contains_key(k)
    }

    pub fn bragg(&self) -> impl Iterator<Item = &PeakRecord> {
        self.records.iter().filter(|r| r.is_bragg())
    }

    pub fn extinctions(&self) -> impl Iterator<Item = &PeakRecord> {
        self.records
            .iter()
            .filter(|r| r.classification == Classification::Extinction)
    }

    pub fn is_bragg(&self, k: &ModuleVector) -> bool {
        self.get(k).map(|r| r.is_bragg()).unwrap_or(false)
    }

    /// Bragg records by decreasing intensity, ties broken by `k`.
    pub fn strongest(&self, n: usize) -> Vec<&PeakRecord> {
        let mut v: Vec<&PeakRecord> = self.bragg().collect();
        v.sort_by(|a, b| {
            b.intensity_theory
                .total_cmp(&a.intensity_theory)
                .then_with(|| a.k.cmp(&b.k))
        });
        v.truncate(n);
        v
    }

    /// Estimates `f_k` on `patch` for every Bragg record. Negated pairs get
    /// exactly conjugate values.
    pub fn attach_amplitudes(&mut self, patch: &PointPatch) -> Result<()> {
        if patch.scheme != self.scheme || patch.window != self.window {
            return Err(Error::SchemeMismatch(format!(
                "table {} / {}, patch {} / {}",
                self.scheme.label(),
                self.window,
                patch.scheme.label(),
                patch.window
            )));
        }
        if patch.is_empty() {
            return Err(Error::EmptyPatch);
        }
        let half: Vec<usize> = (0..self.records.len())
            .filter(|&i| {
                let r = &self.records[i];
                r.is_bragg() && r.k >= -&r.k
            })
            .collect();
        let values: Vec<Complex64> = half
            .par_iter()
            .map(|&i| exp_sum(patch, &self.records[i].k_phys))
            .collect();
        for r in &mut self.records {
            r.amplitude = None;
        }
        for (&i, f) in half.iter().zip(values) {
            let neg = -&self.records[i].k;
            self.records[i].amplitude = Some(f);
            if let Some(&j) = self.index.get(&neg) {
                self.records[j].amplitude = Some(f.conj());
            }
        }
        self.patch_id = Some(patch.id());
        Ok(())
    }

    pub fn amplitude(&self, k: &ModuleVector) -> Option<Complex64> {
        self.get(k).and_then(|r| r.amplitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraggMismatch {
    pub k: ModuleVector,
    pub measured: f64,
    pub theory: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraggReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub failures: Vec<BraggMismatch>,
}

/// Compares `|f_k|²` on `patch` with the theoretical intensity for the
/// strongest `top` Bragg records (all of them when `None`).
pub fn verify_bragg_consistency(
    patch: &PointPatch,
    table: &SpectrumTable,
    tol: f64,
    top: Option<usize>,
) -> Result<BraggReport> {
    if patch.scheme != table.scheme || patch.window != table.window {
        return Err(Error::SchemeMismatch(format!(
            "table {}, patch {}",
            table.scheme.label(),
            patch.scheme.label()
        )));
    }
    if patch.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let selected = table.strongest(top.unwrap_or(usize::MAX));
    let rows: Vec<BraggMismatch> = selected
        .par_iter()
        .map(|r| {
            let measured = exp_sum(patch, &r.k_phys).norm_sqr();
            let theory = r.intensity_theory;
            BraggMismatch {
                k: r.k.clone(),
                measured,
                theory,
                relative_error: (measured - theory).abs() / theory,
            }
        })
        .collect();
    let max_relative_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    Ok(BraggReport {
        checked: rows.len(),
        max_relative_error,
        failures: rows.into_iter().filter(|r| r.relative_error > tol).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionWitness {
    pub extinction: ModuleVector,
    pub s1: ModuleVector,
    pub s2: ModuleVector,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtinctionReport {
    pub witnesses: Vec<ExtinctionWitness>,
    pub unresolved: Vec<ModuleVector>,
}

/// For each extinction `k`, finds Bragg `s₁, s₂` in the table with
/// `s₁ + s₂ = k`, preferring the pair whose weaker member is strongest.
pub fn verify_extinction_sum_decomposition(table: &SpectrumTable) -> ExtinctionReport {
    let bragg: Vec<&PeakRecord> = table.bragg().collect();
    let mut report = ExtinctionReport::default();
    for ext in table.extinctions() {
        let best = bragg
            .iter()
            .filter_map(|s1| {
                let s2 = &ext.k - &s1.k;
                let r2 = table.get(&s2).filter(|r| r.is_bragg())?;
                Some((s1.intensity_theory.min(r2.intensity_theory), &s1.k, s2))
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)));
        match best {
            Some((_, s1, s2)) => report.witnesses.push(ExtinctionWitness {
                extinction: ext.k.clone(),
                s1: s1.clone(),
                s2,
            }),
            None => report.unresolved.push(ext.k.clone()),
        }
    }
    report
}
