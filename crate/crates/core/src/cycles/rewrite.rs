//! Exhaustive search over the rewriting system of the cycle group, used as a
//! reference for the canonical form. Exponential; meant for short cycles.

use super::Cycle;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

type State = Vec<Vec<i64>>;

fn is_zero(k: &[i64]) -> bool {
    k.iter().all(|&c| c == 0)
}

fn neg(k: &[i64]) -> Vec<i64> {
    k.iter().map(|c| -c).collect()
}

fn sorted(mut s: State) -> State {
    s.sort();
    s
}

/// States reachable in one removal step (a zero or a `{k, -k}` pair).
fn removals(s: &State) -> Vec<State> {
    let mut out = BTreeSet::new();
    for i in 0..s.len() {
        if is_zero(&s[i]) {
            let mut t = s.clone();
            t.remove(i);
            out.insert(t);
            continue;
        }
        let target = neg(&s[i]);
        for j in i + 1..s.len() {
            if s[j] == target {
                let mut t = s.clone();
                t.remove(j);
                t.remove(i);
                out.insert(t);
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub minimal_length: usize,
    /// All reachable representatives of minimal length, as sorted multisets.
    pub minimal_forms: BTreeSet<State>,
    pub states_visited: usize,
}

/// Breadth-first search over insertions and removals of zeros and of pairs
/// `{a, -a}` with `a` from `alphabet`, never exceeding `len(c) + slack`
/// entries.
pub fn minimal_forms(c: &Cycle, alphabet: &[Vec<i64>], slack: usize) -> SearchResult {
    let start = sorted(c.to_coords());
    let cap = start.len() + slack;
    let dim = start.first().or(alphabet.first()).map(|k| k.len()).unwrap_or(0);
    let zero = vec![0i64; dim];
    let mut seen: HashSet<State> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        let mut next = removals(&s);
        if s.len() < cap {
            let mut t = s.clone();
            t.push(zero.clone());
            next.push(sorted(t));
        }
        if s.len() + 2 <= cap {
            for a in alphabet {
                let mut t = s.clone();
                t.push(a.clone());
                t.push(neg(a));
                next.push(sorted(t));
            }
        }
        for t in next {
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    let minimal_length = seen.iter().map(|s| s.len()).min().unwrap_or(0);
    let minimal_forms = seen.iter().filter(|s| s.len() == minimal_length).cloned().collect();
    SearchResult {
        minimal_length,
        minimal_forms,
        states_visited: seen.len(),
    }
}

/// Every state in which removal-only rewriting can terminate, over all
/// orders of applying the rules.
pub fn terminal_forms(c: &Cycle) -> BTreeSet<State> {
    fn walk(s: State, memo: &mut HashMap<State, BTreeSet<State>>) -> BTreeSet<State> {
        if let Some(r) = memo.get(&s) {
            return r.clone();
        }
        let next = removals(&s);
        let out = if next.is_empty() {
            BTreeSet::from([s.clone()])
        } else {
            let mut acc = BTreeSet::new();
            for t in next {
                acc.extend(walk(t, memo));
            }
            acc
        };
        memo.insert(s, out.clone());
        out
    }
    walk(sorted(c.to_coords()), &mut HashMap::new())
}

/// Outcome of comparing [`Cycle::reduce`] against the exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCheck {
    pub canonical_matches: bool,
    pub length_matches: bool,
    pub unique_minimum: bool,
    pub confluent: bool,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.canonical_matches && self.length_matches && self.unique_minimum && self.confluent
    }
}

pub fn check_against_oracle(c: &Cycle, alphabet: &[Vec<i64>]) -> OracleCheck {
    let search = minimal_forms(c, alphabet, 2);
    let canonical = c.reduce().to_coords();
    let terminals = terminal_forms(c);
    OracleCheck {
        canonical_matches: search.minimal_forms.len() == 1 && search.minimal_forms.contains(&canonical),
        length_matches: search.minimal_length == c.reduced_length(),
        unique_minimum: search.minimal_forms.len() == 1,
        confluent: terminals.len() == 1 && terminals.contains(&canonical),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_finds_pair_free_form() {
        let c = Cycle::from_coords(&[vec![1], vec![2], vec![-2], vec![0], vec![-1]]).unwrap();
        let r = minimal_forms(&c, &[vec![1], vec![2]], 2);
        assert_eq!(r.minimal_length, 0);
        assert!(check_against_oracle(&c, &[vec![1], vec![2]]).passed());
    }

    #[test]
    fn terminal_forms_of_redundant_cycle() {
        let c = Cycle::from_coords(&[vec![1, 0], vec![-1, 0], vec![1, 0], vec![0, 0], vec![-1, 0]]).unwrap();
        assert_eq!(terminal_forms(&c), BTreeSet::from([Vec::new()]));
    }
}
