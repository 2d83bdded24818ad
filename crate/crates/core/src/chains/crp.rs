//! Ordered Chinese restaurant processes with `α = 1/2` and their
//! Poissonized down-up dynamics.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ChainError;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrpParams {
    /// `(1/2, 0)`
    HalfZero,
    /// `(1/2, 1/2)`
    HalfHalf,
    /// `(1/2, -1/2)`: no new table at the far left or between the two leftmost tables.
    HalfMinusHalf,
}

impl CrpParams {
    pub fn alpha(self) -> f64 {
        0.5
    }

    pub fn theta(self) -> f64 {
        match self {
            Self::HalfZero => 0.0,
            Self::HalfHalf => 0.5,
            Self::HalfMinusHalf => -0.5,
        }
    }

    pub fn from_theta(theta: f64) -> Result<Self, ChainError> {
        match theta {
            t if t == 0.0 => Ok(Self::HalfZero),
            t if t == 0.5 => Ok(Self::HalfHalf),
            t if t == -0.5 => Ok(Self::HalfMinusHalf),
            _ => Err(ChainError::UnsupportedParams(theta)),
        }
    }
}

impl fmt::Display for CrpParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(1/2,{})", self.theta())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrpConfig {
    pub tables: Vec<u32>,
    pub params: CrpParams,
}

/// Where the next customer sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seat {
    Join(usize),
    NewLeftmost,
    /// New table immediately right of table `i`.
    NewAfter(usize),
}

impl CrpConfig {
    pub fn new(tables: Vec<u32>, params: CrpParams) -> Result<Self, ChainError> {
        if tables.contains(&0) {
            return Err(ChainError::EmptyTable);
        }
        Ok(Self { tables, params })
    }

    pub fn customers(&self) -> u64 {
        self.tables.iter().map(|&m| m as u64).sum()
    }

    pub fn no_gap_after_first(&self) -> bool {
        self.params == CrpParams::HalfMinusHalf
    }

    /// Insertion slots for a new table, as `Seat` values, each of weight `α`
    /// (and `θ` for the far-left slot).
    fn new_table_slots(&self) -> impl Iterator<Item = (Seat, f64)> + '_ {
        let k = self.tables.len();
        let left = (self.params == CrpParams::HalfHalf).then_some((Seat::NewLeftmost, 0.5));
        let first = usize::from(self.no_gap_after_first());
        left.into_iter().chain((first..k).map(|i| (Seat::NewAfter(i), 0.5)))
    }

    /// Seating probabilities for the next customer.
    pub fn seating_probabilities(&self) -> Result<Vec<(Seat, f64)>, ChainError> {
        let n = self.customers() as f64;
        let theta = self.params.theta();
        if self.params == CrpParams::HalfMinusHalf && self.tables.len() < 2 {
            return Err(ChainError::SingleTableMinusHalf);
        }
        if n + theta <= 0.0 {
            return Err(ChainError::EmptyConfig);
        }
        let mut out: Vec<(Seat, f64)> =
            self.tables.iter().enumerate().map(|(i, &m)| (Seat::Join(i), (m as f64 - 0.5) / (n + theta))).collect();
        out.extend(self.new_table_slots().map(|(s, w)| (s, w / (n + theta))));
        Ok(out)
    }

    pub fn apply_seat(&mut self, seat: Seat) {
        match seat {
            Seat::Join(i) => self.tables[i] += 1,
            Seat::NewLeftmost => self.tables.insert(0, 1),
            Seat::NewAfter(i) => self.tables.insert(i + 1, 1),
        }
    }
}

fn pick(weights: &[(Seat, f64)], u: f64) -> Seat {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut acc = 0.0;
    let target = u * total;
    for &(s, w) in weights {
        acc += w;
        if target < acc {
            return s;
        }
    }
    weights.last().expect("nonempty").0
}

/// Seat one customer by the ordered seating rule.
pub fn ocrp_seat(config: &CrpConfig, rng: &mut RngStream) -> Result<CrpConfig, ChainError> {
    let probs = config.seating_probabilities()?;
    let mut next = config.clone();
    next.apply_seat(pick(&probs, rng.uniform()));
    Ok(next)
}

/// One move of the Poissonized down-up chain: population `m` goes down at
/// rate `m` and up at rate `m - 1/2`; each new-table slot fires at rate
/// `1/2` (`θ` for the far-left slot). Tables that empty are removed.
pub fn poissonized_step(config: &CrpConfig, rng: &mut RngStream) -> Result<(CrpConfig, f64), ChainError> {
    #[derive(Clone, Copy)]
    enum Move {
        Down(usize),
        Up(usize),
        New(Seat),
    }
    let mut moves: Vec<(Move, f64)> = Vec::with_capacity(3 * config.tables.len() + 1);
    for (i, &m) in config.tables.iter().enumerate() {
        moves.push((Move::Down(i), m as f64));
        moves.push((Move::Up(i), m as f64 - 0.5));
    }
    moves.extend(config.new_table_slots().map(|(s, w)| (Move::New(s), w)));
    let total: f64 = moves.iter().map(|m| m.1).sum();
    if total <= 0.0 {
        return Err(ChainError::EmptyConfig);
    }
    let elapsed = rng.exp1() / total;
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut chosen = moves.last().expect("nonempty").0;
    for &(mv, w) in &moves {
        acc += w;
        if target < acc {
            chosen = mv;
            break;
        }
    }
    let mut next = config.clone();
    match chosen {
        Move::Down(i) => {
            next.tables[i] -= 1;
            if next.tables[i] == 0 {
                next.tables.remove(i);
            }
        }
        Move::Up(i) => next.tables[i] += 1,
        Move::New(s) => next.apply_seat(s),
    }
    Ok((next, elapsed))
}

/// Total event rate of `poissonized_step` from `config`.
pub fn poissonized_total_rate(config: &CrpConfig) -> f64 {
    let tables: f64 = config.tables.iter().map(|&m| 2.0 * m as f64 - 0.5).sum();
    tables + config.new_table_slots().map(|s| s.1).sum::<f64>()
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn with_capacity(n: usize) -> Self {
        Self { tree: vec![0.0; n + 1] }
    }

    fn add(&mut self, mut i: usize, v: f64) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64, len: usize) -> usize {
        let mut pos = 0;
        let mut step = self.tree.len().next_power_of_two() / 2;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step /= 2;
        }
        pos.min(len - 1)
    }
}

/// Table populations, left to right, of an `oCRP(1/2, θ)` with `n`
/// customers started from one customer; `θ ∈ {0, 1/2}`.
pub fn ocrp_sample(theta: f64, n: usize, rng: &mut RngStream) -> Vec<u32> {
    assert!(theta == 0.0 || theta == 0.5, "ocrp_sample supports θ ∈ {{0, 1/2}}");
    if n == 0 {
        return Vec::new();
    }
    // Tables indexed by creation order; `next` links them left to right.
    let cap = n + 1;
    let mut pops: Vec<u32> = Vec::with_capacity(cap);
    let mut next: Vec<usize> = Vec::with_capacity(cap);
    let mut weights = Fenwick::with_capacity(cap);
    const NIL: usize = usize::MAX;
    pops.push(1);
    next.push(NIL);
    weights.add(0, 0.5);
    let mut head = 0;
    for i in 1..n {
        let k = pops.len();
        let new_weight = theta + 0.5 * k as f64;
        let u = rng.uniform() * (i as f64 + theta);
        if u < new_weight {
            let t = pops.len();
            pops.push(1);
            weights.add(t, 0.5);
            if u < theta {
                next.push(head);
                head = t;
            } else {
                let after = rng.below(k);
                next.push(next[after]);
                next[after] = t;
            }
        } else {
            let j = weights.find(u - new_weight, k);
            pops[j] += 1;
            weights.add(j, 1.0);
        }
    }
    let mut out = Vec::with_capacity(pops.len());
    let mut cur = head;
    while cur != NIL {
        out.push(pops[cur]);
        cur = next[cur];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: &[u32], p: CrpParams) -> CrpConfig {
        CrpConfig::new(t.to_vec(), p).unwrap()
    }

    #[test]
    fn minus_half_two_singletons() {
        let probs = cfg(&[1, 1], CrpParams::HalfMinusHalf).seating_probabilities().unwrap();
        assert_eq!(probs.len(), 3);
        for (_, p) in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(probs[2].0, Seat::NewAfter(1));
    }

    #[test]
    fn half_zero_single_table() {
        let n = 7u32;
        let probs = cfg(&[n], CrpParams::HalfZero).seating_probabilities().unwrap();
        assert!((probs[0].1 - (n as f64 - 0.5) / n as f64).abs() < 1e-15);
        assert_eq!(probs[1].0, Seat::NewAfter(0));
        assert!((probs[1].1 - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn single_table_minus_half_rejected() {
        let mut r = RngStream::new(0, 0);
        assert_eq!(ocrp_seat(&cfg(&[4], CrpParams::HalfMinusHalf), &mut r), Err(ChainError::SingleTableMinusHalf));
        assert_eq!(CrpConfig::new(vec![1, 0], CrpParams::HalfZero), Err(ChainError::EmptyTable));
    }

    #[test]
    fn seating_probabilities_sum_to_one() {
        for p in [CrpParams::HalfZero, CrpParams::HalfHalf, CrpParams::HalfMinusHalf] {
            for t in [vec![1, 1], vec![3, 1, 2], vec![5, 2, 2, 1, 8]] {
                let s: f64 = cfg(&t, p).seating_probabilities().unwrap().iter().map(|x| x.1).sum();
                assert!((s - 1.0).abs() < 1e-14, "{p} {t:?}");
            }
        }
    }

    #[test]
    fn minus_half_insertion_probability() {
        // k masses, n customers: new-table probability (k-1)/(2n-1).
        let c = cfg(&[2, 3, 1, 4], CrpParams::HalfMinusHalf);
        let p: f64 = c
            .seating_probabilities()
            .unwrap()
            .iter()
            .filter(|(s, _)| !matches!(s, Seat::Join(_)))
            .map(|x| x.1)
            .sum();
        assert!((p - 3.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn poissonized_rates() {
        let single = cfg(&[3], CrpParams::HalfMinusHalf);
        assert!((poissonized_total_rate(&single) - 5.5).abs() < 1e-15);
        assert!((poissonized_total_rate(&cfg(&[2, 2], CrpParams::HalfZero)) - 8.0).abs() < 1e-15);
        // Drift identity: Σ(m-1/2) + slots/2 - Σm.
        let c = cfg(&[2, 5, 1], CrpParams::HalfHalf);
        let mut r = RngStream::new(3, 0);
        let reps = 200_000;
        let mut dn = 0.0;
        let mut time = 0.0;
        for _ in 0..reps {
            let (next, dt) = poissonized_step(&c, &mut r).unwrap();
            dn += next.customers() as f64 - c.customers() as f64;
            time += dt;
        }
        // Ups 6.5, downs 8, four slots at 1/2: drift 0.5, total rate 16.5.
        let total = poissonized_total_rate(&c);
        assert!((total - 16.5).abs() < 1e-15);
        let want = 0.5 / total;
        let got = dn / reps as f64;
        assert!((got - want).abs() < 4.0 / (reps as f64).sqrt(), "{got} vs {want}");
        assert!((time / reps as f64 - 1.0 / total).abs() < 4.0 / total / (reps as f64).sqrt());
    }

    #[test]
    fn poissonized_minus_half_never_inserts_second_slot() {
        let mut r = RngStream::new(4, 0);
        let mut c = cfg(&[1, 1], CrpParams::HalfMinusHalf);
        for _ in 0..2000 {
            let before = c.clone();
            match poissonized_step(&c, &mut r) {
                Ok((next, _)) => c = next,
                Err(_) => break,
            }
            if c.tables.len() == before.tables.len() + 1 && before.tables.len() >= 2 {
                assert_eq!(c.tables[..2], before.tables[..2]);
            }
            if c.tables.is_empty() {
                break;
            }
        }
    }

    #[test]
    fn fast_sampler_matches_seating_rule() {
        // Law of (number of tables, leftmost population) at n = 6, fast vs step-by-step.
        let mut r = RngStream::new(5, 0);
        let reps = 60_000;
        for theta in [0.0, 0.5] {
            let params = CrpParams::from_theta(theta).unwrap();
            let mut a = std::collections::HashMap::<(usize, u32), f64>::new();
            let mut b = std::collections::HashMap::<(usize, u32), f64>::new();
            for _ in 0..reps {
                let t = ocrp_sample(theta, 6, &mut r);
                assert_eq!(t.iter().sum::<u32>(), 6);
                *a.entry((t.len(), t[0])).or_default() += 1.0;
                let mut c = cfg(&[1], params);
                for _ in 1..6 {
                    c = ocrp_seat(&c, &mut r).unwrap();
                }
                *b.entry((c.tables.len(), c.tables[0])).or_default() += 1.0;
            }
            for (key, &ca) in &a {
                let cb = b.get(key).copied().unwrap_or(0.0);
                let p = (ca + cb) / (2.0 * reps as f64);
                let se = (2.0 * p * (1.0 - p) / reps as f64).sqrt();
                assert!(((ca - cb) / reps as f64).abs() < 4.5 * se + 1e-9, "θ={theta} {key:?}");
            }
        }
    }

    #[test]
    fn half_half_table_count_mean() {
        // E[K_n] for CRP(1/2, 1/2) = Σ_{i<n} (1/2 + k/2)/(i + 1/2) recursion: E K_{i+1} = E K_i + (1/2 + E K_i / 2)/(i + 1/2).
        let n = 200;
        let mut ek = 1.0;
        for i in 1..n {
            ek += (0.5 + ek / 2.0) / (i as f64 + 0.5);
        }
        let mut r = RngStream::new(6, 0);
        let reps = 20_000;
        let ks: Vec<f64> = (0..reps).map(|_| ocrp_sample(0.5, n, &mut r).len() as f64).collect();
        let m = ks.iter().sum::<f64>() / reps as f64;
        let v = ks.iter().map(|k| (k - m).powi(2)).sum::<f64>() / reps as f64;
        assert!((m - ek).abs() < 4.0 * (v / reps as f64).sqrt(), "{m} vs {ek}");
    }
}
