//! The cycle group: zero-sum tuples of Fourier-module vectors modulo
//! reordering, zero insertion and `{k, -k}` pair insertion.

pub mod rewrite;
pub mod sum_search;

use crate::error::{Error, Result};
use crate::scheme::{ModuleVector, Side};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub use sum_search::sum_as_bragg;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cycle {
    entries: Vec<ModuleVector>,
}

impl fmt::Debug for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, k) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "]")
    }
}

/// Exact integer sum; `None` for an empty list.
pub fn vector_sum(entries: &[ModuleVector]) -> Option<ModuleVector> {
    let first = entries.first()?;
    let mut acc = vec![0i64; first.dim()];
    for k in entries {
        for (a, c) in acc.iter_mut().zip(k.coords.iter()) {
            *a += c;
        }
    }
    Some(ModuleVector::new(acc, first.side))
}

fn check_entries(entries: &[ModuleVector]) -> Result<()> {
    let Some(first) = entries.first() else {
        return Ok(());
    };
    for k in entries {
        if k.side != Side::Fourier {
            return Err(Error::SideMismatch {
                expected: Side::Fourier,
                got: k.side,
            });
        }
        if k.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: k.dim(),
            });
        }
    }
    Ok(())
}

/// `(representative, sign)` with the representative the larger of `±k`.
fn orient(k: &ModuleVector) -> (ModuleVector, i64) {
    let neg = -k;
    if *k >= neg {
        (k.clone(), 1)
    } else {
        (neg, -1)
    }
}

impl Cycle {
    /// Checks that the entries sum to zero.
    pub fn new(entries: Vec<ModuleVector>) -> Result<Self> {
        check_entries(&entries)?;
        if let Some(s) = vector_sum(&entries) {
            if !s.is_zero() {
                return Err(Error::NonZeroSum { sum: s.to_vec() });
            }
        }
        Ok(Cycle { entries })
    }

    pub fn from_coords(entries: &[Vec<i64>]) -> Result<Self> {
        Cycle::new(entries.iter().map(|c| ModuleVector::fourier(c.iter().copied())).collect())
    }

    pub fn empty() -> Self {
        Cycle { entries: Vec::new() }
    }

    pub fn entries(&self) -> &[ModuleVector] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_coords(&self) -> Vec<Vec<i64>> {
        self.entries.iter().map(|k| k.to_vec()).collect()
    }

    /// Net multiplicity of each `±k` class.
    fn net_counts(&self) -> BTreeMap<ModuleVector, i64> {
        let mut net = BTreeMap::new();
        for k in &self.entries {
            if k.is_zero() {
                continue;
            }
            let (rep, sign) = orient(k);
            *net.entry(rep).or_insert(0) += sign;
        }
        net
    }

    /// Canonical representative: zeros dropped, `{k, -k}` pairs cancelled,
    /// entries sorted.
    pub fn reduce(&self) -> Cycle {
        let mut out = Vec::new();
        for (rep, count) in self.net_counts() {
            let v = if count > 0 { rep } else { -&rep };
            out.extend(std::iter::repeat_n(v, count.unsigned_abs() as usize));
        }
        out.sort();
        Cycle { entries: out }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.reduce()
    }

    pub fn reduced_length(&self) -> usize {
        self.net_counts().values().map(|c| c.unsigned_abs() as usize).sum()
    }

    pub fn concat(&self, other: &Cycle) -> Result<Cycle> {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        check_entries(&entries)?;
        Ok(Cycle { entries })
    }

    /// Entrywise negation.
    pub fn inverse(&self) -> Cycle {
        Cycle {
            entries: self.entries.iter().map(|k| -k).collect(),
        }
    }

    pub fn equivalent(&self, other: &Cycle) -> bool {
        self.reduce() == other.reduce()
    }

    /// Same entries reordered greedily so that partial sums stay short
    /// (squared integer norm), ties broken lexicographically.
    pub fn balanced(&self) -> Cycle {
        let mut rest = self.entries.clone();
        rest.sort();
        let dim = rest.first().map(|k| k.dim()).unwrap_or(0);
        let mut prefix = vec![0i64; dim];
        let mut out = Vec::with_capacity(rest.len());
        while !rest.is_empty() {
            let cost = |k: &ModuleVector| -> i128 {
                prefix
                    .iter()
                    .zip(k.coords.iter())
                    .map(|(p, c)| {
                        let s = (p + c) as i128;
                        s * s
                    })
                    .sum()
            };
            let best = (0..rest.len()).min_by_key(|&i| cost(&rest[i])).expect("nonempty");
            let k = rest.remove(best);
            for (p, c) in prefix.iter_mut().zip(k.coords.iter()) {
                *p += c;
            }
            out.push(k);
        }
        Cycle { entries: out }
    }

    /// Zeros dropped and pairs cancelled, survivors kept in their original
    /// order (first occurrences survive).
    pub fn reduce_stable(&self) -> Cycle {
        let mut net = self.net_counts();
        let mut out = Vec::new();
        for k in &self.entries {
            if k.is_zero() {
                continue;
            }
            let (rep, sign) = orient(k);
            let c = net.get_mut(&rep).expect("counted");
            if *c * sign > 0 {
                *c -= sign;
                out.push(k.clone());
            }
        }
        Cycle { entries: out }
    }
}

pub fn reduce(c: &Cycle) -> Cycle {
    c.reduce()
}

pub fn concat(a: &Cycle, b: &Cycle) -> Result<Cycle> {
    a.concat(b)
}

pub fn reduced_length(c: &Cycle) -> usize {
    c.reduced_length()
}

/// Writes a cycle of reduced length above `2n+1` as a product of cycles of
/// reduced length at most `2n+1`.
///
/// `oracle(t)` must return `n` spectrum vectors summing to `t`. Each step
/// peels `j` (the first `n+1` entries) off, emits `j·(-l)` with `l` the
/// oracle's answer for `Σj`, and continues with `l` followed by the rest.
pub fn decompose<F>(c: &Cycle, n: usize, mut oracle: F) -> Result<Vec<Cycle>>
where
    F: FnMut(&ModuleVector) -> Option<Vec<ModuleVector>>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("decompose needs n ≥ 1".into()));
    }
    check_entries(&c.entries)?;
    if let Some(s) = vector_sum(&c.entries) {
        if !s.is_zero() {
            return Err(Error::NonZeroSum { sum: s.to_vec() });
        }
    }
    let limit = 2 * n + 1;
    if c.reduced_length() <= limit {
        return Ok(vec![c.clone()]);
    }
    let mut factors = Vec::new();
    let mut current = c.reduce_stable();
    while current.len() > limit {
        let (j, rest) = current.entries.split_at(n + 1);
        let target = vector_sum(j).expect("nonempty");
        let l = oracle(&target)
            .filter(|l| l.len() == n && vector_sum(l).as_ref() == Some(&target))
            .ok_or_else(|| Error::OracleFailure {
                target: target.to_vec(),
            })?;
        let mut factor = j.to_vec();
        factor.extend(l.iter().map(|k| -k));
        factors.push(Cycle::new(factor)?);
        let mut next = l;
        next.extend(rest.iter().cloned());
        current = Cycle::new(next)?.reduce_stable();
    }
    if !current.is_empty() {
        factors.push(current);
    }
    Ok(factors)
}

/// Concatenation of all `factors`.
pub fn product(factors: &[Cycle]) -> Result<Cycle> {
    factors.iter().try_fold(Cycle::empty(), |acc, f| acc.concat(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i64]) -> ModuleVector {
        ModuleVector::fourier(c.iter().copied())
    }

    fn cyc(c: &[&[i64]]) -> Cycle {
        Cycle::new(c.iter().map(|x| v(x)).collect()).unwrap()
    }

    #[test]
    fn pair_cancels() {
        assert_eq!(cyc(&[&[1, 2], &[-1, -2]]).reduce(), Cycle::empty());
        assert_eq!(cyc(&[&[1, 2], &[-1, -2]]).reduced_length(), 0);
        assert_eq!(Cycle::empty().reduced_length(), 0);
    }

    #[test]
    fn permutations_share_canonical_form() {
        let a = cyc(&[&[1, 0], &[0, 1], &[-1, -1]]);
        let b = cyc(&[&[-1, -1], &[1, 0], &[0, 1]]);
        assert_eq!(a.reduce(), b.reduce());
        assert!(a.reduce().is_canonical());
        assert_eq!(a.reduce().reduce(), a.reduce());
    }

    #[test]
    fn padded_cycle_reduces() {
        let (k1, k2) = ([1i64, 0], [0i64, 1]);
        let padded = cyc(&[&k1, &k2, &[0, -1], &[0, 0], &k2, &[-1, -1]]);
        let plain = cyc(&[&k1, &k2, &[-1, -1]]);
        assert_eq!(padded.reduce(), plain.reduce());
        assert_eq!(padded.reduced_length(), 3);
    }

    #[test]
    fn nonzero_sum_rejected() {
        assert_eq!(
            Cycle::new(vec![v(&[1, 0]), v(&[0, 1])]),
            Err(Error::NonZeroSum { sum: vec![1, 1] })
        );
        assert!(matches!(
            Cycle::new(vec![ModuleVector::physical([1]), ModuleVector::physical([-1])]),
            Err(Error::SideMismatch { .. })
        ));
    }

    #[test]
    fn group_laws() {
        let c = cyc(&[&[1, 0], &[0, 1], &[-1, -1]]);
        assert!(c.concat(&c.inverse()).unwrap().reduce().is_empty());
        assert_eq!(Cycle::empty().concat(&c).unwrap().reduce(), c.reduce());
    }

    #[test]
    fn stable_reduction_keeps_order() {
        let c = cyc(&[&[2], &[0], &[1], &[-2], &[3], &[-1], &[-3], &[1], &[-1]]);
        assert!(c.reduce_stable().is_empty());
        let c = cyc(&[&[2], &[1], &[-1], &[1], &[-3]]);
        assert_eq!(c.reduce_stable(), cyc(&[&[2], &[1], &[-3]]));
    }

    #[test]
    fn balancing_keeps_prefixes_short() {
        let c = cyc(&[&[3], &[3], &[3], &[-3], &[-3], &[-3]]);
        let b = c.balanced();
        assert_eq!(b.reduce(), c.reduce());
        let mut acc = 0i64;
        for k in b.entries() {
            acc += k.coords[0];
            assert!(acc.abs() <= 3);
        }
    }

    #[test]
    fn four_cycle_splits_in_two() {
        let (k1, k2, k3, k4) = (v(&[1, 0]), v(&[0, 1]), v(&[2, 1]), v(&[-3, -2]));
        let c = Cycle::new(vec![k1.clone(), k2.clone(), k3.clone(), k4.clone()]).unwrap();
        let factors = decompose(&c, 1, |t| Some(vec![t.clone()])).unwrap();
        let s = &k1 + &k2;
        assert_eq!(factors[0], Cycle::new(vec![k1, k2, -&s]).unwrap());
        assert_eq!(factors[1], Cycle::new(vec![s, k3, k4]).unwrap());
        assert_eq!(product(&factors).unwrap().reduce(), c.reduce());
    }

    #[test]
    fn short_cycle_is_its_own_factor() {
        let c = cyc(&[&[1], &[2], &[-3]]);
        assert_eq!(decompose(&c, 1, |_| None).unwrap(), vec![c]);
    }

    #[test]
    fn oracle_failure_carries_target() {
        let c = cyc(&[&[1], &[2], &[3], &[-6]]);
        assert_eq!(
            decompose(&c, 1, |_| None),
            Err(Error::OracleFailure { target: vec![3] })
        );
        let lying = decompose(&c, 1, |_| Some(vec![v(&[4])]));
        assert!(lying.unwrap_err().is_oracle_failure());
    }
}
