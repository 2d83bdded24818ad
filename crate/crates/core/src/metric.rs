//! The `d_I` distance between annotated interval partitions.
//!
//! A correspondence is an order-preserving partial matching of blocks. Its
//! distortion is the largest of the sup of left-diversity differences over
//! matched pairs, the total-diversity difference, and the two
//! "mismatched plus unmatched mass" sums. The distance is the infimum of
//! the distortion over correspondences.

use serde::{Deserialize, Serialize};

use crate::ip::IntervalPartition;

/// Block counts up to which [`d_ip`] is exact.
pub const EXACT_THRESHOLD: usize = 10;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    /// Both index sequences must be strictly increasing.
    pub fn new(pairs: Vec<(usize, usize)>) -> Option<Self> {
        let ok = pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
        ok.then_some(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub value: f64,
    /// False when `value` is only an upper bound (greedy matching).
    pub exact: bool,
}

pub fn distortion(beta: &IntervalPartition, gamma: &IntervalPartition, c: &Correspondence) -> f64 {
    let mut sup = 0.0_f64;
    let mut diff = 0.0;
    let mut matched_b = 0.0;
    let mut matched_g = 0.0;
    for &(i, j) in &c.pairs {
        sup = sup.max((beta.div_left(i) - gamma.div_left(j)).abs());
        let (x, y) = (beta.blocks()[i].mass, gamma.blocks()[j].mass);
        diff += (x - y).abs();
        matched_b += x;
        matched_g += y;
    }
    let total = (beta.total_diversity() - gamma.total_diversity()).abs();
    let mass_b = diff + beta.total_mass() - matched_b;
    let mass_g = diff + gamma.total_mass() - matched_g;
    sup.max(total).max(mass_b).max(mass_g)
}

/// Exact when both partitions have at most [`EXACT_THRESHOLD`] blocks.
pub fn d_ip(beta: &IntervalPartition, gamma: &IntervalPartition) -> Distance {
    d_ip_with_threshold(beta, gamma, EXACT_THRESHOLD)
}

pub fn d_ip_with_threshold(beta: &IntervalPartition, gamma: &IntervalPartition, threshold: usize) -> Distance {
    if beta.len() <= threshold && gamma.len() <= threshold {
        Distance { value: exact(beta, gamma), exact: true }
    } else {
        Distance { value: greedy(beta, gamma), exact: false }
    }
}

/// Pareto dynamic program. For each candidate bound `tau` on the diversity
/// term, pairs further apart than `tau` are forbidden, and the DP keeps the
/// non-dominated frontier of `(S - Σx, S - Σy)` where `S = Σ|x - y|`.
fn exact(beta: &IntervalPartition, gamma: &IntervalPartition) -> f64 {
    let (n, m) = (beta.len(), gamma.len());
    let xs: Vec<f64> = beta.masses().collect();
    let ys: Vec<f64> = gamma.masses().collect();
    let total = (beta.total_diversity() - gamma.total_diversity()).abs();
    let (mb, mg) = (beta.total_mass(), gamma.total_mass());

    let mut gaps = vec![0.0];
    for i in 0..n {
        for j in 0..m {
            gaps.push((beta.div_left(i) - gamma.div_left(j)).abs());
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();

    let mut best = f64::INFINITY;
    let mut frontier: Vec<Vec<Vec<(f64, f64)>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for &tau in &gaps {
        if tau.max(total) >= best {
            break;
        }
        for i in 0..=n {
            for j in 0..=m {
                let mut cell: Vec<(f64, f64)> = Vec::new();
                if i == 0 || j == 0 {
                    cell.push((0.0, 0.0));
                } else {
                    cell.extend_from_slice(&frontier[i - 1][j]);
                    cell.extend_from_slice(&frontier[i][j - 1]);
                    if (beta.div_left(i - 1) - gamma.div_left(j - 1)).abs() <= tau {
                        let (x, y) = (xs[i - 1], ys[j - 1]);
                        let d = (x - y).abs();
                        cell.extend(frontier[i - 1][j - 1].iter().map(|&(a, b)| (a + d - x, b + d - y)));
                    }
                    prune(&mut cell);
                }
                frontier[i][j] = cell;
            }
        }
        let mass = frontier[n][m]
            .iter()
            .map(|&(a, b)| (a + mb).max(b + mg))
            .fold(f64::INFINITY, f64::min);
        best = best.min(tau.max(total).max(mass));
    }
    best
}

fn prune(cell: &mut Vec<(f64, f64)>) {
    cell.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(cell.len());
    for &p in cell.iter() {
        if kept.last().is_none_or(|&(_, b)| p.1 < b) {
            kept.push(p);
        }
    }
    *cell = kept;
}

/// Upper bound: for each k, match the k largest blocks of each side in
/// positional order, and keep the best distortion.
fn greedy(beta: &IntervalPartition, gamma: &IntervalPartition) -> f64 {
    let top = |p: &IntervalPartition| {
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| p.blocks()[b].mass.total_cmp(&p.blocks()[a].mass));
        idx
    };
    let (rb, rg) = (top(beta), top(gamma));
    let mut best = distortion(beta, gamma, &Correspondence::default());
    for k in 1..=rb.len().min(rg.len()) {
        let mut ib = rb[..k].to_vec();
        let mut ig = rg[..k].to_vec();
        ib.sort_unstable();
        ig.sort_unstable();
        let c = Correspondence { pairs: ib.into_iter().zip(ig).collect() };
        best = best.min(distortion(beta, gamma, &c));
    }
    best
}

/// Minimum distortion by enumerating every correspondence. Exponential; for
/// small partitions only.
pub fn d_ip_enumerate(beta: &IntervalPartition, gamma: &IntervalPartition) -> f64 {
    fn rec(
        beta: &IntervalPartition,
        gamma: &IntervalPartition,
        start: (usize, usize),
        pairs: &mut Vec<(usize, usize)>,
        best: &mut f64,
    ) {
        let c = Correspondence { pairs: pairs.clone() };
        *best = best.min(distortion(beta, gamma, &c));
        for i in start.0..beta.len() {
            for j in start.1..gamma.len() {
                pairs.push((i, j));
                rec(beta, gamma, (i + 1, j + 1), pairs, best);
                pairs.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(beta, gamma, (0, 0), &mut Vec::new(), &mut best);
    best
}
