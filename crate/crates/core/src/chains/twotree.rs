//! The 2-tree projection of the Aldous chain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::aldous::{enumerate_trees, project_oriented, BinaryTree};
use super::ChainError;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwoTree {
    pub m1: u32,
    pub m2: u32,
    /// Spinal masses by decreasing distance from the root.
    pub spinal: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TwoTreeOutcome {
    Alive(TwoTree),
    /// A top mass died with no spinal mass left to promote.
    Degenerate,
}

/// Outcome of the down-move applied to mass `i` (0 = m1, 1 = m2, 2.. = spinal).
fn down(state: &TwoTree, i: usize) -> TwoTreeOutcome {
    let mut s = state.clone();
    match i {
        0 | 1 => {
            let m = if i == 0 { &mut s.m1 } else { &mut s.m2 };
            *m -= 1;
            if *m == 0 {
                if s.spinal.is_empty() {
                    return TwoTreeOutcome::Degenerate;
                }
                *m = s.spinal.remove(0);
            }
        }
        _ => {
            s.spinal[i - 2] -= 1;
            if s.spinal[i - 2] == 0 {
                s.spinal.remove(i - 2);
            }
        }
    }
    TwoTreeOutcome::Alive(s)
}

/// Up-moves with integer weights `2m - 1` per mass and 1 per spinal edge.
fn up_moves(state: &TwoTree) -> Vec<(TwoTree, u64)> {
    let mut out = Vec::new();
    let masses = 2 + state.spinal.len();
    for i in 0..masses {
        let mut s = state.clone();
        let m = match i {
            0 => &mut s.m1,
            1 => &mut s.m2,
            _ => &mut s.spinal[i - 2],
        };
        let w = 2 * *m as u64 - 1;
        *m += 1;
        out.push((s, w));
    }
    // Spinal edges: just below the branch point and below each spinal mass.
    for slot in 0..=state.spinal.len() {
        let mut s = state.clone();
        s.spinal.insert(slot, 1);
        out.push((s, 1));
    }
    out
}

impl TwoTree {
    pub fn n(&self) -> u32 {
        self.m1 + self.m2 + self.spinal.iter().sum::<u32>()
    }

    pub fn masses(&self) -> Vec<u32> {
        let mut v = vec![self.m1, self.m2];
        v.extend_from_slice(&self.spinal);
        v
    }

    /// Up-move probabilities `(m1+1, m2+1, any new spinal)` as exact fractions over `2n - 1`.
    pub fn up_probabilities(&self) -> (f64, f64, f64) {
        let d = (2 * self.n() - 1) as f64;
        let k = 2 + self.spinal.len();
        ((2 * self.m1 - 1) as f64 / d, (2 * self.m2 - 1) as f64 / d, (k - 1) as f64 / d)
    }
}

/// Exact one-step law with integer weights over `n (2n - 3)`.
pub fn two_tree_transition_counts(state: &TwoTree) -> Vec<(TwoTreeOutcome, u64)> {
    let n = state.n() as u64;
    let mut acc: HashMap<TwoTreeOutcome, u64> = HashMap::new();
    for (i, &m) in state.masses().iter().enumerate() {
        match down(state, i) {
            TwoTreeOutcome::Degenerate => *acc.entry(TwoTreeOutcome::Degenerate).or_default() += m as u64 * (2 * n - 3),
            TwoTreeOutcome::Alive(d) => {
                for (u, w) in up_moves(&d) {
                    *acc.entry(TwoTreeOutcome::Alive(u)).or_default() += m as u64 * w;
                }
            }
        }
    }
    let mut v: Vec<_> = acc.into_iter().collect();
    v.sort();
    v
}

pub fn two_tree_downup_step(state: &TwoTree, rng: &mut RngStream) -> Result<TwoTreeOutcome, ChainError> {
    let n = state.n();
    if n < 2 || state.m1 == 0 || state.m2 == 0 || state.spinal.contains(&0) {
        return Err(ChainError::InvalidTwoTree);
    }
    let masses = state.masses();
    let mut u = rng.below(n as usize) as u32;
    let mut i = 0;
    while u >= masses[i] {
        u -= masses[i];
        i += 1;
    }
    let d = match down(state, i) {
        TwoTreeOutcome::Degenerate => return Ok(TwoTreeOutcome::Degenerate),
        TwoTreeOutcome::Alive(d) => d,
    };
    let moves = up_moves(&d);
    let total: u64 = moves.iter().map(|m| m.1).sum();
    let mut target = (rng.uniform() * total as f64) as u64;
    for (s, w) in moves {
        if target < w {
            return Ok(TwoTreeOutcome::Alive(s));
        }
        target -= w;
    }
    unreachable!("weights cover the target")
}

/// Tracked branch point in a full tree: `(tree, v, first child of v)`.
#[derive(Clone, Debug)]
struct Tracked {
    tree: BinaryTree,
    v: usize,
    first: usize,
}

fn tracked_move(x: &Tracked, leaf: usize, edge_after: Option<usize>) -> Option<Tracked> {
    let mut t = x.tree.clone();
    let (mut v, mut first) = (x.v, x.first);
    let p = t.parent(leaf).expect("leaf is attached");
    if p == v {
        let g = t.parent(v)?;
        let s = t.sibling(leaf);
        let r = t.sibling(v);
        t.remove_leaf(leaf);
        // The spinal mass takes the place of the dead top mass.
        first = if leaf == first { r } else { s };
        v = g;
    } else {
        let s = t.sibling(leaf);
        t.remove_leaf(leaf);
        if p == first {
            first = s;
        }
    }
    let edges = t.edges();
    let e = edge_after.map(|k| edges[k]).expect("edge index");
    let u = t.insert_leaf(leaf, e);
    if e == first {
        first = u;
    }
    Some(Tracked { tree: t, v, first })
}

/// For every oriented branch point of every tree with `n` leaves, compares
/// the law of the projected next state with `two_tree_transition_counts`.
/// Returns the number of states checked and the number of mismatches.
pub fn lumpability_check(n: usize) -> (usize, usize) {
    assert!((3..=7).contains(&n));
    let mut checked = 0;
    let mut mismatches = 0;
    for tree in enumerate_trees(n) {
        for v in tree.internal_nodes() {
            let [a, b] = tree.children(v).expect("internal");
            for first in [a, b] {
                let x = Tracked { tree: tree.clone(), v, first };
                let proj = project_oriented(&tree, v, Some(first)).expect("valid");
                let mut full: HashMap<TwoTreeOutcome, u64> = HashMap::new();
                for leaf in 0..n {
                    for k in 0..(2 * n - 3) {
                        let out = match tracked_move(&x, leaf, Some(k)) {
                            None => TwoTreeOutcome::Degenerate,
                            Some(y) => TwoTreeOutcome::Alive(project_oriented(&y.tree, y.v, Some(y.first)).expect("valid")),
                        };
                        *full.entry(out).or_default() += 1;
                    }
                }
                let mut full: Vec<_> = full.into_iter().collect();
                full.sort();
                checked += 1;
                if full != two_tree_transition_counts(&proj) {
                    mismatches += 1;
                }
            }
        }
    }
    (checked, mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tt(m1: u32, m2: u32, spinal: &[u32]) -> TwoTree {
        TwoTree { m1, m2, spinal: spinal.to_vec() }
    }

    #[test]
    fn up_move_weights() {
        let (p1, p2, pn) = tt(2, 3, &[]).up_probabilities();
        assert!((p1 - 3.0 / 9.0).abs() < 1e-15);
        assert!((p2 - 5.0 / 9.0).abs() < 1e-15);
        assert!((pn - 1.0 / 9.0).abs() < 1e-15);
        let (_, _, q) = tt(1, 1, &[]).up_probabilities();
        assert!((q - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn smallest_state_degenerates() {
        let mut r = RngStream::new(1, 0);
        for _ in 0..20 {
            assert_eq!(two_tree_downup_step(&tt(1, 1, &[]), &mut r).unwrap(), TwoTreeOutcome::Degenerate);
        }
        assert_eq!(two_tree_transition_counts(&tt(1, 1, &[])), vec![(TwoTreeOutcome::Degenerate, 2)]);
    }

    #[test]
    fn promotion_replaces_dead_top() {
        assert_eq!(down(&tt(1, 4, &[2, 3]), 0), TwoTreeOutcome::Alive(tt(2, 4, &[3])));
        assert_eq!(down(&tt(4, 1, &[2]), 1), TwoTreeOutcome::Alive(tt(4, 2, &[])));
        assert_eq!(down(&tt(4, 1, &[1, 5]), 2), TwoTreeOutcome::Alive(tt(4, 1, &[5])));
    }

    #[test]
    fn counts_are_stochastic_and_conserve_mass() {
        let s = tt(2, 1, &[3, 1]);
        let n = s.n() as u64;
        let rows = two_tree_transition_counts(&s);
        assert_eq!(rows.iter().map(|r| r.1).sum::<u64>(), n * (2 * n - 3));
        for (o, _) in rows {
            if let TwoTreeOutcome::Alive(t) = o {
                assert_eq!(t.n() as u64, n);
            }
        }
    }

    #[test]
    fn step_matches_counts() {
        let s = tt(2, 1, &[1]);
        let n = s.n() as u64;
        let rows = two_tree_transition_counts(&s);
        let mut r = RngStream::new(2, 0);
        let reps = 100_000;
        let mut hits: HashMap<TwoTreeOutcome, usize> = HashMap::new();
        for _ in 0..reps {
            *hits.entry(two_tree_downup_step(&s, &mut r).unwrap()).or_default() += 1;
        }
        for (o, c) in rows {
            let p = c as f64 / (n * (2 * n - 3)) as f64;
            let got = *hits.get(&o).unwrap_or(&0) as f64 / reps as f64;
            assert!((got - p).abs() < 4.0 * (p * (1.0 - p) / reps as f64).sqrt(), "{o:?}");
        }
    }

    #[test]
    fn lumpable_for_small_trees() {
        for n in 3..=5 {
            let (checked, bad) = lumpability_check(n);
            assert!(checked > 0);
            assert_eq!(bad, 0, "n={n}");
        }
    }
}
