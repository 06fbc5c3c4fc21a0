//! The cycle function `a`: estimation from Bragg amplitudes or from moments,
//! its algebraic checks, and the spectral formula for moments.

use crate::correlations::{birkhoff_moment, GaussianTestFunction, TranslateGrid};
use crate::cycles::{decompose, sum_as_bragg, Cycle};
use crate::error::{Error, Result};
use crate::modelset::PointPatch;
use crate::numeric::{norm, pairwise_sum};
use crate::rng::SeededRng;
use crate::scheme::ModuleVector;
use crate::spectrum::{bombieri_taylor, PeakRecord, SpectrumTable};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Candidates kept per slot in spectral sums.
pub const DEFAULT_POOL: usize = 200;
const HALF_BUDGET: usize = 1_000_000;
/// Slot candidates weaker than this fraction of the strongest are dropped.
const SLOT_REL_CUT: f64 = 1e-7;
pub const DEFAULT_LEAKAGE_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleFunctionEstimate {
    /// Canonical form of the input cycle.
    pub cycle: Cycle,
    /// On the unit circle.
    pub value: Complex64,
    /// Modulus before normalisation; ideally 1.
    pub raw_modulus: f64,
    pub r: f64,
    pub phase_error: f64,
}

fn normalize(z: Complex64) -> Result<Complex64> {
    let m = z.norm();
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("cannot normalise {z}")));
    }
    Ok(z / m)
}

fn bragg_record<'a>(table: &'a SpectrumTable, k: &ModuleVector) -> Result<&'a PeakRecord> {
    table
        .get(k)
        .filter(|r| r.is_bragg() && r.intensity_theory >= table.eps_bragg)
        .ok_or_else(|| Error::NotBragg { coords: k.to_vec() })
}

/// `f_k` on `patch`, using the table's attached values when they came from
/// the same patch. `-k` is always the exact conjugate of `k`.
struct Amplitudes<'a> {
    patch: &'a PointPatch,
    table: &'a SpectrumTable,
    attached: bool,
}

impl<'a> Amplitudes<'a> {
    fn new(patch: &'a PointPatch, table: &'a SpectrumTable) -> Result<Self> {
        if patch.scheme != table.scheme || patch.window != table.window {
            return Err(Error::SchemeMismatch(format!(
                "table {}, patch {}",
                table.scheme.label(),
                patch.scheme.label()
            )));
        }
        let attached = match table.patch_id {
            Some(id) => {
                let own = patch.id();
                if id != own {
                    return Err(Error::PatchMismatch { table: id, patch: own });
                }
                true
            }
            None => false,
        };
        Ok(Amplitudes { patch, table, attached })
    }

    fn get(&self, k: &ModuleVector) -> Result<Complex64> {
        if self.attached {
            if let Some(f) = self.table.amplitude(k) {
                return Ok(f);
            }
        }
        let neg = -k;
        let (rep, flip) = if *k >= neg { (k, false) } else { (&neg, true) };
        let rec = bragg_record(self.table, rep)?;
        let f = bombieri_taylor(self.patch, &rec.k_phys)?;
        Ok(if flip { f.conj() } else { f })
    }
}

fn estimate_with(amps: &Amplitudes, cycle: &Cycle) -> Result<CycleFunctionEstimate> {
    let mut entries = cycle.entries().to_vec();
    entries.sort();
    let d = amps.patch.d() as f64;
    let r = amps.patch.r;
    let mut prod = Complex64::new(1.0, 0.0);
    let mut phase_error = 0.0;
    for k in &entries {
        let rec = bragg_record(amps.table, k)?;
        let f = amps.get(k)?;
        let s = rec.intensity_theory.sqrt();
        prod *= f / s;
        phase_error += ((f.norm() - s).abs() + 2.0 * d / r) / s;
    }
    Ok(CycleFunctionEstimate {
        cycle: cycle.reduce(),
        value: normalize(prod)?,
        raw_modulus: prod.norm(),
        r,
        phase_error,
    })
}

/// `a(c) = normalize(Π f_{k_i} / Π γ̂(k_i)^{1/2})`, evaluated over the
/// sorted entries of `cycle`.
pub fn estimate_a(patch: &PointPatch, cycle: &Cycle, table: &SpectrumTable) -> Result<CycleFunctionEstimate> {
    let amps = Amplitudes::new(patch, table)?;
    estimate_with(&amps, cycle)
}

/// `normalize(Π 1̂_W(k_i⋆))`: the cycle function of the ideal model set.
pub fn theoretical_a(table: &SpectrumTable, cycle: &Cycle) -> Result<Complex64> {
    let mut entries = cycle.entries().to_vec();
    entries.sort();
    let mut prod = Complex64::new(1.0, 0.0);
    for k in &entries {
        let rec = bragg_record(table, k)?;
        let ft = table.window.fourier_transform(&rec.k_star);
        prod *= ft / ft.norm();
    }
    normalize(prod)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PropertyReport {
    pub cycles: usize,
    /// `|a(0) - 1|`.
    pub zero_residual: f64,
    /// `max |a(k, -k) - 1|` over entries of the input cycles.
    pub pair_residual: f64,
    /// `max |a(c_i) a(c_{i+1}) - a(c_i c_{i+1})|`.
    pub homomorphism_residual: f64,
    /// `max |a(perm c) - a(c)|` over reversal and rotation.
    pub permutation_residual: f64,
    /// `max |a(c (k,-k) 0) - a(c)|`.
    pub insertion_residual: f64,
    /// `max |a(-c) - conj a(c)|`.
    pub reflection_residual: f64,
    /// `max |a(c) - a_ideal(c)|`.
    pub theory_residual: f64,
    pub max_phase_error: f64,
}

/// Checks the algebraic properties of `a` on the given cycles.
pub fn check_properties(patch: &PointPatch, table: &SpectrumTable, cycles: &[Cycle]) -> Result<PropertyReport> {
    let amps = Amplitudes::new(patch, table)?;
    let a = |c: &Cycle| estimate_with(&amps, c);
    let dim = table.scheme.rank();
    let zero = ModuleVector::zero(dim, crate::scheme::Side::Fourier);
    let mut rep = PropertyReport {
        cycles: cycles.len(),
        zero_residual: (a(&Cycle::new(vec![zero.clone()])?)?.value - 1.0).norm(),
        ..Default::default()
    };
    let max = |slot: &mut f64, v: f64| *slot = slot.max(v);
    for (i, c) in cycles.iter().enumerate() {
        let est = a(c)?;
        max(&mut rep.max_phase_error, est.phase_error);
        max(&mut rep.theory_residual, (est.value - theoretical_a(table, c)?).norm());
        for k in c.entries() {
            let pair = a(&Cycle::new(vec![k.clone(), -k])?)?;
            max(&mut rep.pair_residual, (pair.value - 1.0).norm());
        }
        let mut rev = c.entries().to_vec();
        rev.reverse();
        let mut rot = c.entries().to_vec();
        if !rot.is_empty() {
            rot.rotate_left(1);
        }
        for p in [rev, rot] {
            max(&mut rep.permutation_residual, (a(&Cycle::new(p)?)?.value - est.value).norm());
        }
        if let Some(k) = c.entries().first() {
            let mut ins = c.entries().to_vec();
            ins.extend([k.clone(), -k, zero.clone()]);
            max(&mut rep.insertion_residual, (a(&Cycle::new(ins)?)?.value - est.value).norm());
        }
        max(&mut rep.reflection_residual, (a(&c.inverse())?.value - est.value.conj()).norm());
        if let Some(next) = cycles.get(i + 1) {
            let other = a(next)?;
            let joint = a(&c.concat(next)?)?;
            max(&mut rep.homomorphism_residual, (est.value * other.value - joint.value).norm());
        }
    }
    Ok(rep)
}

/// Source of cycle-function values for spectral sums.
pub trait CycleFunction: Sync {
    fn value(&self, cycle: &Cycle) -> Result<Complex64>;
}

/// Values looked up by canonical form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleTable(pub BTreeMap<Cycle, Complex64>);

impl CycleTable {
    pub fn insert(&mut self, cycle: &Cycle, value: Complex64) {
        self.0.insert(cycle.reduce(), value);
    }
}

impl CycleFunction for CycleTable {
    fn value(&self, cycle: &Cycle) -> Result<Complex64> {
        let c = cycle.reduce();
        if c.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.0
            .get(&c)
            .copied()
            .ok_or_else(|| Error::MissingCycleValue(c.to_string()))
    }
}

/// The ideal model-set cycle function.
pub struct Theoretical<'a>(pub &'a SpectrumTable);

impl CycleFunction for Theoretical<'_> {
    fn value(&self, cycle: &Cycle) -> Result<Complex64> {
        theoretical_a(self.0, cycle)
    }
}

/// `estimate_a` on demand.
pub struct Measured<'a> {
    amps: Amplitudes<'a>,
}

impl<'a> Measured<'a> {
    pub fn new(patch: &'a PointPatch, table: &'a SpectrumTable) -> Result<Self> {
        Ok(Measured {
            amps: Amplitudes::new(patch, table)?,
        })
    }

    pub fn estimate(&self, cycle: &Cycle) -> Result<CycleFunctionEstimate> {
        estimate_with(&self.amps, cycle)
    }
}

impl CycleFunction for Measured<'_> {
    fn value(&self, cycle: &Cycle) -> Result<Complex64> {
        Ok(self.estimate(cycle)?.value)
    }
}

/// Uses `base` on cycles of reduced length `≤ 2n+1` and extends to longer
/// ones multiplicatively through [`decompose`] with a Bragg sum oracle.
pub struct Extended<'a> {
    base: &'a dyn CycleFunction,
    table: &'a SpectrumTable,
    n: usize,
    memo: Mutex<HashMap<Cycle, Complex64>>,
    direct: AtomicUsize,
    extended: AtomicUsize,
}

impl<'a> Extended<'a> {
    pub fn new(base: &'a dyn CycleFunction, table: &'a SpectrumTable, n: usize) -> Self {
        Extended {
            base,
            table,
            n,
            memo: Mutex::new(HashMap::new()),
            direct: AtomicUsize::new(0),
            extended: AtomicUsize::new(0),
        }
    }

    /// `(direct lookups, values obtained by decomposition)`.
    pub fn counts(&self) -> (usize, usize) {
        (self.direct.load(Ordering::Relaxed), self.extended.load(Ordering::Relaxed))
    }

    pub fn factors(&self, cycle: &Cycle) -> Result<Vec<Cycle>> {
        decompose(&cycle.reduce().balanced(), self.n, |t| sum_as_bragg(self.table, t, self.n))
    }
}

impl CycleFunction for Extended<'_> {
    fn value(&self, cycle: &Cycle) -> Result<Complex64> {
        let c = cycle.reduce();
        if c.len() <= 2 * self.n + 1 {
            self.direct.fetch_add(1, Ordering::Relaxed);
            return self.base.value(&c);
        }
        if let Some(v) = self.memo.lock().expect("memo").get(&c) {
            return Ok(*v);
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for f in self.factors(&c)? {
            prod *= self.base.value(&f)?;
        }
        let v = normalize(prod)?;
        self.extended.fetch_add(1, Ordering::Relaxed);
        self.memo.lock().expect("memo").insert(c, v);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMoment {
    pub value: Complex64,
    /// Estimated truncation error.
    pub tail_estimate: f64,
    pub tuples: usize,
    pub distinct_cycles: usize,
    /// `Σ |terms|`.
    pub absolute_sum: f64,
}

struct Slot<'a> {
    recs: Vec<&'a PeakRecord>,
    weights: Vec<Complex64>,
    /// `Σ |ĥ(k)| γ̂(k)^{1/2}` over the retained candidates.
    kept: f64,
    /// The same sum over peaks the enumeration leaves out.
    excluded: f64,
}

fn slot_candidates<'a>(table: &'a SpectrumTable, h: &GaussianTestFunction, pool: usize) -> Slot<'a> {
    let mut scored: Vec<(f64, Complex64, &PeakRecord)> = table
        .bragg()
        .map(|r| {
            let w = h.fourier(&r.k_phys) * r.intensity_theory.sqrt();
            (w.norm(), w, r)
        })
        .collect();
    let all: f64 = scored.iter().map(|s| s.0).sum();
    let top = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    scored.retain(|s| s.0 > 0.0 && s.0 >= SLOT_REL_CUT * top);
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.2.k.cmp(&b.2.k)));
    scored.truncate(pool);
    let kept: f64 = scored.iter().map(|s| s.0).sum();

    // sub-threshold records inside the table
    let weak: f64 = table
        .records
        .iter()
        .filter(|r| !r.is_bragg())
        .map(|r| h.fourier(&r.k_phys).norm() * r.intensity_theory.sqrt())
        .sum();
    // peaks beyond k_max, weighted like the in-range Bragg mass
    let gap = (table.k_max - norm(&h.frequency)).max(0.0);
    let decay = (-2.0 * std::f64::consts::PI.powi(2) * h.sigma * h.sigma * gap * gap).exp();
    let mass: f64 = table.bragg().map(|r| r.intensity_theory.sqrt()).sum();
    let beyond = h.fourier_peak() * decay * mass;

    Slot {
        recs: scored.iter().map(|s| s.2).collect(),
        weights: scored.iter().map(|s| s.1).collect(),
        kept,
        excluded: (all - kept).max(0.0) + weak + beyond,
    }
}

/// `Σ_i E_i Π_{j≠i} (S_j + E_j)`: every tuple with at least one excluded
/// entry, bounded without the zero-sum constraint.
fn truncation_bound(slots: &[Slot]) -> f64 {
    (0..slots.len())
        .map(|i| {
            slots
                .iter()
                .enumerate()
                .map(|(j, s)| if j == i { s.excluded } else { s.kept + s.excluded })
                .product::<f64>()
        })
        .sum()
}

fn half_tuples(slots: &[Slot], dim: usize) -> Vec<(Vec<usize>, Vec<i64>)> {
    let mut out = vec![(Vec::new(), vec![0i64; dim])];
    for slot in slots {
        let mut next = Vec::with_capacity(out.len() * slot.recs.len());
        for (idx, sum) in &out {
            for (i, r) in slot.recs.iter().enumerate() {
                let mut idx = idx.clone();
                idx.push(i);
                let s: Vec<i64> = sum.iter().zip(r.k.coords.iter()).map(|(a, b)| a + b).collect();
                next.push((idx, s));
            }
        }
        out = next;
    }
    out
}

/// Exact zero-sum index tuples over the slot candidates, in lexicographic
/// order of the indices.
fn zero_sum_tuples(slots: &[Slot], dim: usize) -> Vec<Vec<usize>> {
    let split = slots.len() / 2;
    let (left, right) = slots.split_at(split);
    let mut by_sum: HashMap<Vec<i64>, Vec<Vec<usize>>> = HashMap::new();
    for (idx, sum) in half_tuples(left, dim) {
        by_sum.entry(sum).or_default().push(idx);
    }
    let mut out = Vec::new();
    for (idx_r, sum) in half_tuples(right, dim) {
        let need: Vec<i64> = sum.iter().map(|c| -c).collect();
        if let Some(lefts) = by_sum.get(&need) {
            for l in lefts {
                let mut t = l.clone();
                t.extend(idx_r.iter().copied());
                out.push(t);
            }
        }
    }
    out.sort();
    out
}

fn spectral_sum(
    table: &SpectrumTable,
    a: &dyn CycleFunction,
    hs: &[GaussianTestFunction],
    pool: usize,
) -> Result<(Complex64, usize, usize, f64, f64)> {
    let dim = table.scheme.rank();
    let slots: Vec<Slot> = hs.iter().map(|h| slot_candidates(table, h, pool)).collect();
    let tuples = zero_sum_tuples(&slots, dim);
    let cycles: Vec<Cycle> = tuples
        .par_iter()
        .map(|t| {
            let entries = t.iter().zip(&slots).map(|(&i, s)| s.recs[i].k.clone()).collect();
            Cycle::new(entries).map(|c| c.reduce())
        })
        .collect::<Result<_>>()?;
    let distinct: Vec<Cycle> = cycles.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let values: Vec<Complex64> = distinct.par_iter().map(|c| a.value(c)).collect::<Result<_>>()?;
    let lookup: HashMap<&Cycle, Complex64> = distinct.iter().zip(values).collect();
    let terms: Vec<Complex64> = tuples
        .iter()
        .zip(&cycles)
        .map(|(t, c)| {
            let w = t
                .iter()
                .zip(&slots)
                .fold(Complex64::new(1.0, 0.0), |acc, (&i, s)| acc * s.weights[i]);
            w * lookup[c]
        })
        .collect();
    let abs: f64 = pairwise_sum(&terms.iter().map(|t| t.norm()).collect::<Vec<_>>());
    Ok((pairwise_sum(&terms), tuples.len(), distinct.len(), abs, truncation_bound(&slots)))
}

fn pool_size(n: usize, requested: usize) -> usize {
    let larger_half = n - n / 2;
    let by_budget = (HALF_BUDGET as f64).powf(1.0 / larger_half.max(1) as f64).floor() as usize;
    requested.min(by_budget).max(1)
}

/// `Σ_{k_1+…+k_n=0} Π ĥ_i(k_i) · a(k_1,…,k_n) · Π γ̂(k_i)^{1/2}` over Bragg
/// records of the table.
///
/// The tail estimate bounds the tuples that use at least one excluded peak:
/// Bragg records dropped from a pool, sub-threshold records, and peaks past
/// `k_max`, the latter through the Gaussian decay of `ĥ_i`.
pub fn moment_from_cyclefunction(
    table: &SpectrumTable,
    a: &dyn CycleFunction,
    hs: &[GaussianTestFunction],
    tail_budget: f64,
) -> Result<SpectralMoment> {
    if hs.is_empty() {
        return Err(Error::InvalidArgument("need at least one test function".into()));
    }
    for h in hs {
        h.validate()?;
        if h.dim() != table.scheme.d() {
            return Err(Error::DimensionMismatch {
                expected: table.scheme.d(),
                got: h.dim(),
            });
        }
    }
    let pool = pool_size(hs.len(), DEFAULT_POOL);
    let (value, tuples, distinct_cycles, absolute_sum, tail_estimate) = spectral_sum(table, a, hs, pool)?;
    if tail_estimate > tail_budget {
        return Err(Error::TailBudget {
            tail: tail_estimate,
            budget: tail_budget,
        });
    }
    Ok(SpectralMoment {
        value,
        tail_estimate,
        tuples,
        distinct_cycles,
        absolute_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCycleEstimate {
    pub estimate: CycleFunctionEstimate,
    /// `Σ_j Σ_{k' ≠ k_j} |ĥ_j(k')| γ̂(k')^{1/2} / γ̂(k_j)^{1/2}`.
    pub leakage: f64,
    pub moment: Complex64,
    pub moment_stderr: f64,
}

/// Reads `a(c)` off a Birkhoff moment of modulated Gaussians whose
/// transforms are bumps of width `sigma_k` at the entries of `c`.
pub fn cyclefunction_from_moments(
    patch: &PointPatch,
    cycle: &Cycle,
    table: &SpectrumTable,
    grid: Option<TranslateGrid>,
    sigma_k: f64,
    leakage_tol: f64,
) -> Result<MomentCycleEstimate> {
    if !(sigma_k > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_k must be positive, got {sigma_k}")));
    }
    if cycle.is_empty() {
        return Err(Error::InvalidArgument("empty cycle".into()));
    }
    let sigma = 1.0 / (2.0 * std::f64::consts::PI * sigma_k);
    let mut hs = Vec::with_capacity(cycle.len());
    let mut sqrt_i = 1.0;
    let mut leakage = 0.0;
    for k in cycle.entries() {
        let rec = bragg_record(table, k)?;
        let h = GaussianTestFunction::spectral_probe(rec.k_phys.clone(), sigma)?;
        let s = rec.intensity_theory.sqrt();
        let spill: f64 = table
            .bragg()
            .filter(|r| r.k != rec.k)
            .map(|r| h.fourier(&r.k_phys).norm() * r.intensity_theory.sqrt())
            .sum();
        leakage += spill / s;
        sqrt_i *= s;
        hs.push(h);
    }
    if leakage > leakage_tol {
        return Err(Error::Leakage {
            bound: leakage,
            tolerance: leakage_tol,
        });
    }
    let grid = match grid {
        Some(g) => g,
        None => TranslateGrid::default_for(&hs)?,
    };
    let m = birkhoff_moment(patch, &hs, &grid)?;
    let raw = m.value / sqrt_i;
    let modulus = raw.norm();
    let phase_error = leakage + 2.0 * m.stderr / m.value.norm().max(f64::MIN_POSITIVE);
    Ok(MomentCycleEstimate {
        estimate: CycleFunctionEstimate {
            cycle: cycle.reduce(),
            value: normalize(raw)?,
            raw_modulus: modulus,
            r: patch.r,
            phase_error,
        },
        leakage,
        moment: m.value,
        moment_stderr: m.stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub tail_budget: f64,
    pub grid: Option<TranslateGrid>,
    /// Random long cycles used to compare direct and extended values.
    pub extension_samples: usize,
    pub alphabet_size: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            tail_budget: f64::INFINITY,
            grid: None,
            extension_samples: 20,
            alphabet_size: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: usize,
    pub spectral: Complex64,
    pub tail_estimate: f64,
    pub birkhoff: Complex64,
    pub birkhoff_stderr: f64,
    pub relative_residual: f64,
    pub tuples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub n: usize,
    pub measured_lookups: usize,
    pub extended_lookups: usize,
    /// `max |a_direct - a_via_factors|` over the sampled long cycles.
    pub extension_residual: f64,
    pub extension_checked: usize,
    pub extension_failures: usize,
    /// Target of the first failed decomposition, if any.
    pub failed_target: Option<Vec<i64>>,
    pub rows: Vec<MomentRow>,
}

/// Random zero-sum cycle of exactly `len` entries drawn from `alphabet`,
/// closed by a Bragg record of the table. `None` after repeated misses.
pub fn random_zero_sum_cycle(
    table: &SpectrumTable,
    alphabet: &[ModuleVector],
    len: usize,
    rng: &mut SeededRng,
) -> Option<Cycle> {
    if len < 2 || alphabet.is_empty() {
        return None;
    }
    for _ in 0..1000 {
        let mut entries: Vec<ModuleVector> = (0..len - 1).map(|_| alphabet[rng.index(alphabet.len())].clone()).collect();
        let closing = -&crate::cycles::vector_sum(&entries).expect("nonempty");
        if table.is_bragg(&closing) {
            entries.push(closing);
            let c = Cycle::new(entries).ok()?;
            if c.reduced_length() == len {
                return Some(c);
            }
        }
    }
    None
}

/// Distinct canonical zero-sum cycles of reduced length `len ≥ 3` whose
/// first `len - 1` entries come from the `alphabet_size` strongest nonzero
/// peaks and whose last entry is any Bragg record. Index tuples are visited
/// in lexicographic order; at most `limit` cycles are returned.
pub fn top_peak_cycles(table: &SpectrumTable, alphabet_size: usize, len: usize, limit: usize) -> Vec<Cycle> {
    cycles_over(table, &peak_alphabet(table, alphabet_size), len, limit, |_| true)
}

/// The `size` strongest nonzero Bragg vectors, strongest first.
pub fn peak_alphabet(table: &SpectrumTable, size: usize) -> Vec<ModuleVector> {
    strongest_nonzero(table, size, |_| true)
}

fn strongest_nonzero(table: &SpectrumTable, size: usize, keep: impl Fn(&PeakRecord) -> bool) -> Vec<ModuleVector> {
    table
        .strongest(usize::MAX)
        .into_iter()
        .filter(|r| !r.k.is_zero() && keep(r))
        .take(size)
        .map(|r| r.k.clone())
        .collect()
}

fn cycles_over(
    table: &SpectrumTable,
    alphabet: &[ModuleVector],
    len: usize,
    limit: usize,
    closing_ok: impl Fn(&PeakRecord) -> bool,
) -> Vec<Cycle> {
    let mut out = Vec::new();
    if len < 3 || alphabet.is_empty() {
        return out;
    }
    let mut seen = BTreeSet::new();
    let mut idx = vec![0usize; len - 1];
    loop {
        let mut entries: Vec<ModuleVector> = idx.iter().map(|&i| alphabet[i].clone()).collect();
        let closing = -&crate::cycles::vector_sum(&entries).expect("nonempty");
        if let Some(rec) = table.get(&closing).filter(|r| r.is_bragg() && closing_ok(r)) {
            entries.push(rec.k.clone());
            if let Ok(c) = Cycle::new(entries) {
                if c.reduced_length() == len && seen.insert(c.reduce()) {
                    out.push(c.reduce());
                    if out.len() >= limit {
                        return out;
                    }
                }
            }
        }
        // next nondecreasing index tuple
        let mut pos = idx.len();
        while pos > 0 && idx[pos - 1] == alphabet.len() - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        let v = idx[pos - 1];
        for i in &mut idx[pos..] {
            *i = v;
        }
    }
}

/// Test functions for an order-`m` moment: Gaussians of width `sigma`,
/// normalised so `ĥ(q) = 1`, modulated at the entries of a strong zero-sum
/// cycle (`(0)` for `m = 1`, `(k, -k)` for `m = 2`). Frequencies stay eight
/// spectral widths inside the table's range.
pub fn probe_moments(table: &SpectrumTable, order: usize, sigma: f64) -> Result<Vec<GaussianTestFunction>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("probe width must be positive, got {sigma}")));
    }
    let margin = 8.0 / (2.0 * std::f64::consts::PI * sigma);
    let inside = |r: &PeakRecord| norm(&r.k_phys) + margin <= table.k_max;
    let ks: Vec<ModuleVector> = match order {
        0 => return Err(Error::InvalidArgument("moment order must be ≥ 1".into())),
        1 => vec![ModuleVector::zero(table.scheme.rank(), crate::scheme::Side::Fourier)],
        2 => {
            let k = strongest_nonzero(table, 1, inside)
                .pop()
                .ok_or_else(|| Error::InvalidArgument("no nonzero Bragg peak inside the table range".into()))?;
            vec![-&k, k]
        }
        m => {
            let alphabet = strongest_nonzero(table, 12, inside);
            cycles_over(table, &alphabet, m, 1, inside)
                .into_iter()
                .next()
                .map(|c| c.balanced().entries().to_vec())
                .ok_or_else(|| Error::InvalidArgument(format!("no zero-sum {m}-cycle among the top peaks")))?
        }
    };
    ks.iter()
        .map(|k| GaussianTestFunction::spectral_probe(bragg_record(table, k)?.k_phys.clone(), sigma))
        .collect()
}

/// Measures `a` on short cycles, extends it by decomposition, and compares
/// spectral-sum moments with direct Birkhoff averages.
pub fn reconstruct_pipeline(
    table: &SpectrumTable,
    patch: &PointPatch,
    n: usize,
    test_moments: &[Vec<GaussianTestFunction>],
    opts: &PipelineOptions,
) -> Result<ReconstructionReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("pipeline needs n ≥ 1".into()));
    }
    let measured = Measured::new(patch, table)?;
    let ext = Extended::new(&measured, table, n);

    let alphabet = peak_alphabet(table, opts.alphabet_size);
    let mut rng = SeededRng::new(opts.seed);
    let mut extension_residual = 0.0f64;
    let (mut checked, mut failures) = (0, 0);
    let mut failed_target = None;
    for i in 0..opts.extension_samples {
        let len = 2 * n + 2 + i % 2;
        let Some(c) = random_zero_sum_cycle(table, &alphabet, len, &mut rng) else {
            failures += 1;
            continue;
        };
        match ext.value(&c) {
            Ok(v) => {
                let direct = measured.value(&c)?;
                extension_residual = extension_residual.max((v - direct).norm());
                checked += 1;
            }
            Err(Error::OracleFailure { target }) => {
                failures += 1;
                failed_target.get_or_insert(target);
            }
            Err(e) => return Err(e),
        }
    }

    let mut rows = Vec::with_capacity(test_moments.len());
    for hs in test_moments {
        let spectral = moment_from_cyclefunction(table, &ext, hs, opts.tail_budget)?;
        let grid = match opts.grid {
            Some(g) => g,
            None => TranslateGrid::default_for(hs)?,
        };
        let direct = birkhoff_moment(patch, hs, &grid)?;
        let scale = direct.value.norm().max(spectral.value.norm()).max(f64::MIN_POSITIVE);
        rows.push(MomentRow {
            order: hs.len(),
            spectral: spectral.value,
            tail_estimate: spectral.tail_estimate,
            birkhoff: direct.value,
            birkhoff_stderr: direct.stderr,
            relative_residual: (spectral.value - direct.value).norm() / scale,
            tuples: spectral.tuples,
        });
    }
    let (measured_lookups, extended_lookups) = ext.counts();
    Ok(ReconstructionReport {
        n,
        measured_lookups,
        extended_lookups,
        extension_residual,
        extension_checked: checked,
        extension_failures: failures,
        failed_target,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelset::{generate_patch, HullPoint};
    use crate::scheme::{preset, TAU};
    use crate::spectrum::{enumerate_spectrum, SpectrumParams};
    use crate::window::Window;

    fn fv(c: &[i64]) -> ModuleVector {
        ModuleVector::fourier(c.iter().copied())
    }

    fn z_setup(r: f64) -> (PointPatch, SpectrumTable) {
        let s = preset("z-fixture").unwrap();
        let w = Window::for_preset("z-fixture").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::origin(1, 1), r).unwrap();
        let t = enumerate_spectrum(&s, &w, SpectrumParams::with_defaults(6.5, 1.0)).unwrap();
        (p, t)
    }

    fn fib_setup(r: f64) -> (PointPatch, SpectrumTable) {
        let s = preset("fibonacci").unwrap();
        let w = Window::for_preset("fibonacci").unwrap();
        let p = generate_patch(&s, &w, &HullPoint::new(vec![0.37], vec![0.21]), r).unwrap();
        let mut params = SpectrumParams::with_defaults(5.0, TAU / 5f64.sqrt());
        params.eps_bragg = 1e-4;
        let t = enumerate_spectrum(&s, &w, params).unwrap();
        (p, t)
    }

    #[test]
    fn zero_cycle_is_one() {
        let (p, t) = fib_setup(500.0);
        let c = Cycle::new(vec![fv(&[0, 0])]).unwrap();
        let a = estimate_a(&p, &c, &t).unwrap();
        assert_eq!(a.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn crystal_triangle_is_one() {
        let (p, t) = z_setup(100.0);
        let c = Cycle::new(vec![fv(&[1, 0]), fv(&[1, 0]), fv(&[-2, 0])]).unwrap();
        let a = estimate_a(&p, &c, &t).unwrap();
        assert!((a.value - 1.0).norm() < 1e-12);
        // R = 100 leaves 99 points: f_k = 0.99 and modulus 0.99³
        assert!((a.raw_modulus - 0.99f64.powi(3)).abs() < 1e-9);
    }

    #[test]
    fn pair_and_extinction() {
        let (p, t) = fib_setup(2000.0);
        let k = t.strongest(2)[1].k.clone();
        let a = estimate_a(&p, &Cycle::new(vec![k.clone(), -&k]).unwrap(), &t).unwrap();
        assert_eq!(a.value, Complex64::new(1.0, 0.0));
        let ext = Cycle::new(vec![fv(&[1, 3]), fv(&[-1, -3])]).unwrap();
        assert_eq!(estimate_a(&p, &ext, &t).unwrap_err(), Error::NotBragg { coords: vec![-1, -3] });
    }

    #[test]
    fn estimate_tracks_ideal_cycle_function() {
        let (p, t) = fib_setup(10_000.0);
        let top: Vec<ModuleVector> = t.strongest(12).iter().map(|r| r.k.clone()).collect();
        let mut checked = 0;
        for a in &top {
            for b in &top {
                let c = -&(a + b);
                if !t.is_bragg(&c) {
                    continue;
                }
                let cyc = Cycle::new(vec![a.clone(), b.clone(), c]).unwrap();
                let est = estimate_a(&p, &cyc, &t).unwrap();
                let ideal = theoretical_a(&t, &cyc).unwrap();
                assert!((est.value - ideal).norm() <= est.phase_error, "{cyc}: {} vs {ideal}", est.value);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn properties_on_fibonacci() {
        let (p, t) = fib_setup(3000.0);
        let top: Vec<ModuleVector> = t.strongest(8).iter().map(|r| r.k.clone()).collect();
        let cycles: Vec<Cycle> = top
            .windows(2)
            .filter_map(|w| {
                let c = -&(&w[0] + &w[1]);
                t.is_bragg(&c).then(|| Cycle::new(vec![w[0].clone(), w[1].clone(), c]).unwrap())
            })
            .collect();
        let rep = check_properties(&p, &t, &cycles).unwrap();
        assert_eq!(rep.zero_residual, 0.0);
        assert_eq!(rep.permutation_residual, 0.0);
        assert!(rep.pair_residual < 1e-14);
        assert!(rep.homomorphism_residual < 1e-12);
        assert!(rep.reflection_residual < 1e-12);
        assert!(rep.insertion_residual <= 2.0 * rep.max_phase_error);
    }

    #[test]
    fn mixed_patches_rejected() {
        let (p, mut t) = fib_setup(500.0);
        let (q, _) = fib_setup(600.0);
        t.attach_amplitudes(&q).unwrap();
        let c = Cycle::new(vec![fv(&[0, 0])]).unwrap();
        assert!(matches!(estimate_a(&p, &c, &t), Err(Error::PatchMismatch { .. })));
    }

    #[test]
    fn first_moment_is_integral_times_density() {
        let (_, t) = fib_setup(500.0);
        let h = GaussianTestFunction::unit(vec![0.0], 2.0).unwrap();
        let m = moment_from_cyclefunction(&t, &Theoretical(&t), std::slice::from_ref(&h), f64::INFINITY).unwrap();
        let density = TAU / 5f64.sqrt();
        assert!((m.value - h.integral() * density).norm() < 1e-12 * m.value.norm());
    }

    #[test]
    fn probe_away_from_peaks_is_small() {
        let (_, t) = z_setup(100.0);
        let h = GaussianTestFunction::spectral_probe(vec![0.5], 5.0).unwrap();
        let m = moment_from_cyclefunction(&t, &Theoretical(&t), &[h.clone(), h.conj()], f64::INFINITY).unwrap();
        assert!(m.value.norm() < 1e-20);
    }

    #[test]
    fn crystal_third_moment_matches_birkhoff() {
        let (p, t) = z_setup(400.0);
        let hs = vec![
            GaussianTestFunction::unit(vec![0.0], 0.3).unwrap(),
            GaussianTestFunction::new(vec![0.2], 0.35, Complex64::new(0.0, 1.0)).unwrap(),
            GaussianTestFunction::unit(vec![-0.1], 0.4).unwrap(),
        ];
        let spec = moment_from_cyclefunction(&t, &Measured::new(&p, &t).unwrap(), &hs, f64::INFINITY).unwrap();
        let grid = TranslateGrid::new(1.0 / 40.0, 10.0).unwrap();
        let direct = birkhoff_moment(&p, &hs, &grid).unwrap();
        assert!((spec.value - direct.value).norm() <= 0.01 * direct.value.norm(), "{spec:?} {direct:?}");
    }

    #[test]
    fn conjugate_symmetry() {
        let (p, t) = fib_setup(2000.0);
        let hs = vec![
            GaussianTestFunction::unit(vec![0.3], 0.8).unwrap(),
            GaussianTestFunction::new(vec![-0.5], 0.6, Complex64::new(0.3, 0.7)).unwrap(),
            GaussianTestFunction::unit(vec![0.0], 0.7).unwrap(),
        ];
        let conj: Vec<_> = hs.iter().map(|h| h.conj()).collect();
        let a = Measured::new(&p, &t).unwrap();
        let m1 = moment_from_cyclefunction(&t, &a, &hs, f64::INFINITY).unwrap();
        let m2 = moment_from_cyclefunction(&t, &a, &conj, f64::INFINITY).unwrap();
        assert!((m1.value.conj() - m2.value).norm() <= 1e-12 * m1.value.norm());
    }

    #[test]
    fn moments_recover_cycle_function() {
        let (p, t) = fib_setup(10_000.0);
        let top: Vec<ModuleVector> = t.strongest(6).iter().map(|r| r.k.clone()).collect();
        let c = (1..top.len())
            .find_map(|j| {
                let closing = -&(&top[1] + &top[j]);
                t.is_bragg(&closing).then(|| Cycle::new(vec![top[1].clone(), top[j].clone(), closing]).unwrap())
            })
            .unwrap();
        let from_amp = estimate_a(&p, &c, &t).unwrap();
        let from_mom = cyclefunction_from_moments(&p, &c, &t, None, 0.01, DEFAULT_LEAKAGE_TOL).unwrap();
        let diff = (from_amp.value - from_mom.estimate.value).norm();
        assert!(diff <= from_amp.phase_error + from_mom.estimate.phase_error, "{diff} {from_amp:?} {from_mom:?}");
        let zero = Cycle::new(vec![fv(&[0, 0])]).unwrap();
        let z = cyclefunction_from_moments(&p, &zero, &t, None, 0.01, DEFAULT_LEAKAGE_TOL).unwrap();
        assert!((z.estimate.value - 1.0).norm() < 0.01);
        assert!(matches!(
            cyclefunction_from_moments(&p, &c, &t, None, 2.0, DEFAULT_LEAKAGE_TOL),
            Err(Error::Leakage { .. })
        ));
    }

    #[test]
    fn extension_by_decomposition() {
        let (p, t) = z_setup(200.0);
        let m = Measured::new(&p, &t).unwrap();
        let ext = Extended::new(&m, &t, 1);
        let c = Cycle::new(vec![fv(&[1, 0]), fv(&[2, 0]), fv(&[1, 0]), fv(&[-4, 0])]).unwrap();
        let v = ext.value(&c).unwrap();
        assert!((v - m.value(&c).unwrap()).norm() < 1e-12);
        assert_eq!(ext.counts(), (0, 1));
        for f in ext.factors(&c).unwrap() {
            assert!(f.reduced_length() <= 3);
        }
    }

    #[test]
    fn top_cycles_are_canonical_and_distinct() {
        let (_, t) = fib_setup(100.0);
        let cs = top_peak_cycles(&t, 8, 3, 10);
        assert_eq!(cs.len(), 10);
        let set: BTreeSet<_> = cs.iter().cloned().collect();
        assert_eq!(set.len(), cs.len());
        for c in &cs {
            assert!(c.is_canonical() && c.reduced_length() == 3);
            assert!(c.entries().iter().all(|k| t.is_bragg(k)));
        }
        let probes = probe_moments(&t, 4, 3.0).unwrap();
        assert_eq!(probes.len(), 4);
        let q: f64 = probes.iter().map(|h| h.frequency[0]).sum();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn cycle_table_lookup() {
        let mut tab = CycleTable::default();
        let c = Cycle::new(vec![fv(&[1, 0]), fv(&[-1, 0]), fv(&[2, 1]), fv(&[-2, -1]), fv(&[3, 0]), fv(&[-3, 0])]).unwrap();
        assert_eq!(tab.value(&c).unwrap(), Complex64::new(1.0, 0.0));
        let d = Cycle::new(vec![fv(&[1, 0]), fv(&[1, 0]), fv(&[-2, 0])]).unwrap();
        assert!(matches!(tab.value(&d), Err(Error::MissingCycleValue(_))));
        tab.insert(&d, Complex64::new(0.0, 1.0));
        assert_eq!(tab.value(&d).unwrap(), Complex64::new(0.0, 1.0));
    }
}
