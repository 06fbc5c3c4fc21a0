//! Cut-and-project schemes with exact integer module coordinates.
//!
//! A scheme is a full-rank lattice in `ℝ^d × ℝ^e` given by the columns of a
//! square basis matrix. Points of the lattice are stored as integer
//! coordinate vectors ([`ModuleVector`]); real coordinates are derived on
//! demand, so identity of module points never depends on rounding.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;
use std::ops::{Add, Neg, Sub};

pub const DET_FLOOR: f64 = 1e-12;
pub const RANK_TOL: f64 = 1e-10;

/// Golden mean `(1+√5)/2`.
pub const TAU: f64 = 1.618_033_988_749_895;

/// Which lattice a [`ModuleVector`] indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Coordinates w.r.t. the direct basis (points of the physical module `L`).
    Physical,
    /// Coordinates w.r.t. the dual basis (points of the Fourier module).
    Fourier,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Physical => Side::Fourier,
            Side::Fourier => Side::Physical,
        }
    }
}

pub type Coords = SmallVec<[i64; 4]>;

/// An exact point of the embedded lattice, in integer coordinates.
///
/// Ordering is lexicographic on the coordinates; it is the tie-breaking rule
/// used everywhere a deterministic order is needed.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModuleVector {
    pub coords: Coords,
    pub side: Side,
}

impl ModuleVector {
    pub fn new(coords: impl IntoIterator<Item = i64>, side: Side) -> Self {
        ModuleVector {
            coords: coords.into_iter().collect(),
            side,
        }
    }

    pub fn fourier(coords: impl IntoIterator<Item = i64>) -> Self {
        Self::new(coords, Side::Fourier)
    }

    pub fn physical(coords: impl IntoIterator<Item = i64>) -> Self {
        Self::new(coords, Side::Physical)
    }

    pub fn zero(dim: usize, side: Side) -> Self {
        ModuleVector {
            coords: SmallVec::from_elem(0, dim),
            side,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn to_vec(&self) -> Vec<i64> {
        self.coords.to_vec()
    }
}

impl fmt::Debug for ModuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords.as_slice())
    }
}

impl fmt::Display for ModuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &ModuleVector {
    type Output = ModuleVector;
    fn add(self, rhs: &ModuleVector) -> ModuleVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        ModuleVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a + b).collect(),
            side: self.side,
        }
    }
}

impl Sub for &ModuleVector {
    type Output = ModuleVector;
    fn sub(self, rhs: &ModuleVector) -> ModuleVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        ModuleVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a - b).collect(),
            side: self.side,
        }
    }
}

impl Neg for &ModuleVector {
    type Output = ModuleVector;
    fn neg(self) -> ModuleVector {
        ModuleVector {
            coords: self.coords.iter().map(|a| -a).collect(),
            side: self.side,
        }
    }
}

impl Neg for ModuleVector {
    type Output = ModuleVector;
    fn neg(self) -> ModuleVector {
        -&self
    }
}

/// A cut-and-project scheme `(ℝ^d, ℝ^e, L̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutProjectScheme {
    d: usize,
    e: usize,
    basis: DMatrix<f64>,
    inverse: DMatrix<f64>,
    covolume: f64,
    label: String,
    provenance: String,
    side: Side,
}

/// JSON form of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDescription {
    pub label: String,
    pub d: usize,
    pub e: usize,
    /// Row-major `(d+e)×(d+e)`; columns are lattice generators.
    pub basis: Vec<f64>,
    #[serde(default)]
    pub provenance: String,
    #[serde(default = "default_side")]
    pub side: Side,
}

fn default_side() -> Side {
    Side::Physical
}

impl CutProjectScheme {
    /// Builds a scheme from a row-major basis whose columns generate the lattice.
    pub fn new(label: impl Into<String>, d: usize, e: usize, basis_rows: &[f64]) -> Result<Self> {
        let n = d + e;
        if d == 0 || e == 0 {
            return Err(Error::InvalidArgument("d and e must be at least 1".into()));
        }
        if basis_rows.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: basis_rows.len(),
            });
        }
        let basis = DMatrix::from_row_slice(n, n, basis_rows);
        Self::from_matrix(label.into(), d, e, basis, String::new(), Side::Physical)
    }

    fn from_matrix(
        label: String,
        d: usize,
        e: usize,
        basis: DMatrix<f64>,
        provenance: String,
        side: Side,
    ) -> Result<Self> {
        let det = basis.determinant();
        if !(det.abs() > DET_FLOOR) {
            return Err(Error::SingularBasis { det });
        }
        let n = d + e;
        let phys_rank = basis.rows(0, d).clone_owned().rank(RANK_TOL);
        let int_rank = basis.rows(d, e).clone_owned().rank(RANK_TOL);
        if phys_rank != d {
            return Err(Error::DegenerateProjection(format!(
                "physical block has rank {phys_rank}, expected {d}"
            )));
        }
        if int_rank != e {
            return Err(Error::DegenerateProjection(format!(
                "internal block has rank {int_rank}, expected {e}"
            )));
        }
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or(Error::SingularBasis { det })?;
        debug_assert_eq!(inverse.nrows(), n);
        Ok(CutProjectScheme {
            d,
            e,
            basis,
            inverse,
            covolume: det.abs(),
            label,
            provenance,
            side,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn rank(&self) -> usize {
        self.d + self.e
    }
    pub fn covolume(&self) -> f64 {
        self.covolume
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn provenance(&self) -> &str {
        &self.provenance
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
    pub fn inverse_basis(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance = note.into();
        self
    }

    fn check(&self, m: &ModuleVector) -> Result<()> {
        if m.dim() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                got: m.dim(),
            });
        }
        if m.side != self.side {
            return Err(Error::SideMismatch {
                expected: self.side,
                got: m.side,
            });
        }
        Ok(())
    }

    /// Embedded point `basis · coords` in `ℝ^{d+e}`, unchecked.
    pub(crate) fn embed_raw(&self, coords: &[i64]) -> Vec<f64> {
        let n = self.rank();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &c) in coords.iter().enumerate() {
                acc += self.basis[(i, j)] * c as f64;
            }
            *o = acc;
        }
        out
    }

    pub fn full_coords(&self, m: &ModuleVector) -> Result<Vec<f64>> {
        self.check(m)?;
        Ok(self.embed_raw(&m.coords))
    }

    /// Projection of `m` to physical space.
    pub fn phys_coords(&self, m: &ModuleVector) -> Result<Vec<f64>> {
        let mut full = self.full_coords(m)?;
        full.truncate(self.d);
        Ok(full)
    }

    /// Star image of `m` (projection to internal space).
    pub fn star_coords(&self, m: &ModuleVector) -> Result<Vec<f64>> {
        let full = self.full_coords(m)?;
        Ok(full[self.d..].to_vec())
    }

    /// Scheme with basis `(B⁻¹)ᵀ`; its integer points form the Fourier module.
    pub fn dual(&self) -> Result<CutProjectScheme> {
        let dual_basis = self.inverse.transpose();
        let label = match self.label.strip_suffix("*") {
            Some(base) => base.to_string(),
            None => format!("{}*", self.label),
        };
        Self::from_matrix(
            label,
            self.d,
            self.e,
            dual_basis,
            self.provenance.clone(),
            self.side.flip(),
        )
    }

    pub fn description(&self) -> SchemeDescription {
        let n = self.rank();
        let mut basis = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                basis.push(self.basis[(i, j)]);
            }
        }
        SchemeDescription {
            label: self.label.clone(),
            d: self.d,
            e: self.e,
            basis,
            provenance: self.provenance.clone(),
            side: self.side,
        }
    }

    pub fn from_description(desc: &SchemeDescription) -> Result<Self> {
        let n = desc.d + desc.e;
        if desc.basis.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: desc.basis.len(),
            });
        }
        Self::from_matrix(
            desc.label.clone(),
            desc.d,
            desc.e,
            DMatrix::from_row_slice(n, n, &desc.basis),
            desc.provenance.clone(),
            desc.side,
        )
    }

    /// All integer `m` with `lo_i - slack ≤ (B m)_i ≤ hi_i + slack` for every row.
    ///
    /// Outer coordinates range over the integer hull of `B⁻¹(box)`; the last
    /// coordinate is solved from the row constraints. Callers filter the
    /// candidates with their own (strict or closed) predicates.
    pub fn lattice_points_in_box(
        &self,
        lo: &[f64],
        hi: &[f64],
        cap: u64,
    ) -> Result<Vec<ModuleVector>> {
        let n = self.rank();
        if lo.len() != n || hi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: lo.len().min(hi.len()),
            });
        }
        let slack = 1e-7;
        let lo: Vec<f64> = lo.iter().map(|x| x - slack).collect();
        let hi: Vec<f64> = hi.iter().map(|x| x + slack).collect();

        let mut bounds = Vec::with_capacity(n);
        for j in 0..n {
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                let w = self.inverse[(j, i)];
                let (p, q) = (w * lo[i], w * hi[i]);
                a += p.min(q);
                b += p.max(q);
            }
            bounds.push(((a - 1e-9).floor() as i64, (b + 1e-9).ceil() as i64));
        }
        let outer: u64 = bounds[..n - 1]
            .iter()
            .map(|(a, b)| (b - a + 1) as u64)
            .product();
        let last = (bounds[n - 1].1 - bounds[n - 1].0 + 1) as u64;
        let estimate = outer.saturating_mul(last.min(4));
        if estimate > cap {
            return Err(Error::ResourceCap { estimate, cap });
        }

        let mut out = Vec::new();
        let mut coords = vec![0i64; n];
        let mut partial = vec![0.0; n];
        self.enumerate_level(0, &bounds, &lo, &hi, &mut coords, &mut partial, &mut out);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_level(
        &self,
        level: usize,
        bounds: &[(i64, i64)],
        lo: &[f64],
        hi: &[f64],
        coords: &mut [i64],
        partial: &mut [f64],
        out: &mut Vec<ModuleVector>,
    ) {
        let n = self.rank();
        if level == n - 1 {
            let (mut a, mut b) = (bounds[level].0 as f64, bounds[level].1 as f64);
            for i in 0..n {
                let w = self.basis[(i, level)];
                if w.abs() < 1e-300 {
                    if partial[i] < lo[i] || partial[i] > hi[i] {
                        return;
                    }
                    continue;
                }
                let (p, q) = ((lo[i] - partial[i]) / w, (hi[i] - partial[i]) / w);
                a = a.max(p.min(q));
                b = b.min(p.max(q));
            }
            if a > b {
                return;
            }
            let (start, end) = ((a - 1e-9).ceil() as i64, (b + 1e-9).floor() as i64);
            for c in start..=end {
                coords[level] = c;
                out.push(ModuleVector::new(coords.iter().copied(), self.side));
            }
            return;
        }
        for c in bounds[level].0..=bounds[level].1 {
            coords[level] = c;
            for i in 0..n {
                partial[i] += self.basis[(i, level)] * c as f64;
            }
            self.enumerate_level(level + 1, bounds, lo, hi, coords, partial, out);
            for i in 0..n {
                partial[i] -= self.basis[(i, level)] * c as f64;
            }
        }
    }
}

pub const PRESETS: &[&str] = &["z-fixture", "fibonacci", "silver-mean", "ammann-beenker"];

/// Built-in schemes. Values are computed from closed forms, so presets are
/// bit-identical across runs.
pub fn preset(name: &str) -> Result<CutProjectScheme> {
    match name {
        "z-fixture" => CutProjectScheme::new("z-fixture", 1, 1, &[1.0, 0.0, 0.0, 1.0])
            .map(|s| s.with_provenance("identity basis; with window [-1/2,1/2] the model set is Z")),
        "fibonacci" => CutProjectScheme::new("fibonacci", 1, 1, &[1.0, TAU, 1.0, 1.0 - TAU])
            .map(|s| s.with_provenance("Z[tau] with Galois conjugation as star map")),
        "silver-mean" => {
            let lambda = 1.0 + 2f64.sqrt();
            let conj = 1.0 - 2f64.sqrt();
            CutProjectScheme::new("silver-mean", 1, 1, &[1.0, lambda, 1.0, conj])
                .map(|s| s.with_provenance("Z[1+sqrt2] with Galois conjugation as star map"))
        }
        "ammann-beenker" => {
            let mut rows = vec![0.0; 16];
            for j in 0..4 {
                let a = j as f64 * std::f64::consts::FRAC_PI_4;
                let b = 3.0 * a;
                rows[j] = a.cos();
                rows[4 + j] = a.sin();
                rows[8 + j] = b.cos();
                rows[12 + j] = b.sin();
            }
            CutProjectScheme::new("ammann-beenker", 2, 2, &rows)
                .map(|s| s.with_provenance("Z^4 with 8-fold star map e_j -> e_{3j}"))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}
