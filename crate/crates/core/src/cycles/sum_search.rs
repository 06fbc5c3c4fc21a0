//! Writing a Fourier-module vector as a sum of Bragg vectors.

use crate::scheme::ModuleVector;
use crate::spectrum::{PeakRecord, SpectrumTable};
use std::collections::HashMap;

/// Pool size for the half-sums once `n ≥ 3`.
pub const POOL_CAP: usize = 200;
/// Upper bound on the number of tuples enumerated per half.
const HALF_BUDGET: usize = 1_000_000;

fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// All ordered `m`-tuples of pool indices in lexicographic order, with sums.
fn tuples(pool: &[&PeakRecord], m: usize, dim: usize) -> Vec<(Vec<usize>, Vec<i64>)> {
    let mut out = vec![(Vec::new(), vec![0i64; dim])];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for (idx, sum) in &out {
            for (i, r) in pool.iter().enumerate() {
                let mut idx = idx.clone();
                idx.push(i);
                next.push((idx, add(sum, &r.k.coords)));
            }
        }
        out = next;
    }
    out
}

/// `n` Bragg vectors of the table summing exactly to `target`, or `None`
/// when the (truncated) search space holds no such tuple.
///
/// Meet in the middle: sums of the first `⌊n/2⌋` entries are hashed, the
/// remaining `⌈n/2⌉` are enumerated. Pools are ordered by decreasing
/// intensity, so the first hit favours strong peaks.
pub fn sum_as_bragg(table: &SpectrumTable, target: &ModuleVector, n: usize) -> Option<Vec<ModuleVector>> {
    if n == 0 {
        return if target.is_zero() { Some(Vec::new()) } else { None };
    }
    if n == 1 {
        return table.is_bragg(target).then(|| vec![target.clone()]);
    }
    let all = table.strongest(usize::MAX);
    let dim = target.dim();
    let (a, b) = (n / 2, n - n / 2);
    let pool_for = |m: usize| -> Vec<&PeakRecord> {
        if m == 1 {
            return all.clone();
        }
        let by_budget = (HALF_BUDGET as f64).powf(1.0 / m as f64).floor() as usize;
        all.iter().take(POOL_CAP.min(by_budget)).copied().collect()
    };

    let (pool_a, pool_b) = (pool_for(a), pool_for(b));
    let mut left: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (idx, sum) in tuples(&pool_a, a, dim) {
        left.entry(sum).or_insert(idx);
    }
    if b == 1 {
        for r in &pool_b {
            let need = sub(&target.coords, &r.k.coords);
            if let Some(idx) = left.get(&need) {
                let mut out: Vec<ModuleVector> = idx.iter().map(|&i| pool_a[i].k.clone()).collect();
                out.push(r.k.clone());
                return Some(out);
            }
        }
        return None;
    }
    for (idx_b, sum) in tuples(&pool_b, b, dim) {
        let need = sub(&target.coords, &sum);
        if let Some(idx) = left.get(&need) {
            let mut out: Vec<ModuleVector> = idx.iter().map(|&i| pool_a[i].k.clone()).collect();
            out.extend(idx_b.iter().map(|&i| pool_b[i].k.clone()));
            return Some(out);
        }
    }
    None
}
