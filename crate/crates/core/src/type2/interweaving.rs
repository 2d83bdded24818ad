use rand::RngCore;

use super::{ClockRef, Construction, Segment, Stage, Type2Config, Type2Error, Type2Run};
use crate::chains::{ocrp_sample, RootKind, RootSpec, SpindleForest};
use crate::kernels::sample_gamma;
use crate::rng::RngStream;
use crate::scaffolding::lattice_pop;

/// Interweaving of two type-1 evolutions started from `(a, C1 β̄1)` and
/// `(b, C2 β̄2)` with `C_i ~ Gamma(1/2, gamma)` and `β̄_i ~ PDIP(1/2, 1/2)`.
///
/// With `Z_1` the lifetime of the first spindle of list 1, `T_j` is the
/// first spindle at or after `T_{j-2}` of list 2 (odd `j`) or list 1 (even
/// `j`) that dies above `Z_j`, and `Z_{j+1}` is its death. Piece `j` holds
/// the spindles strictly after `T_{j-2}` up to `T_j`; the state reads the
/// pieces in order. Which list is cut short depends on which evolution
/// dies first, so the forests are simulated with a growing horizon until
/// that is settled.
pub fn type2_interweaving(a: f64, b: f64, gamma: f64, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    cfg.validate()?;
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) || !(gamma > 0.0) {
        return Err(Type2Error::InvalidState(format!("a={a}, b={b}, gamma={gamma}")));
    }
    let tops = [lattice_pop(a, cfg.n, rng), lattice_pop(b, cfg.n, rng)];
    interweave_from_lattice(tops, gamma, cfg, rng)
}

pub(crate) fn interweave_from_lattice(tops: [u32; 2], gamma: f64, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    let n = cfg.n;
    let mut lists: [Vec<(RootSpec, u64)>; 2] = Default::default();
    for (list, pop) in lists.iter_mut().zip(tops) {
        let c = sample_gamma(0.5, gamma, rng)?;
        let customers = lattice_pop(c, n, rng) as usize;
        list.push((RootSpec { birth: 0.0, pop, kind: RootKind::Clade }, rng.next_u64()));
        for p in ocrp_sample(0.5, customers, rng) {
            list.push((RootSpec { birth: 0.0, pop: p, kind: RootKind::Clade }, rng.next_u64()));
        }
    }
    let mut h = cfg.horizon;
    loop {
        let f = [
            SpindleForest::simulate_seeded(&lists[0], cfg.scale(), h, cfg.horizon),
            SpindleForest::simulate_seeded(&lists[1], cfg.scale(), h, cfg.horizon),
        ];
        if let Some(stages) = interweave(&f) {
            let [f1, f2] = f;
            return Ok(Type2Run::assemble(Construction::Interweaving, n, cfg.horizon, vec![f1, f2], Vec::new(), stages, false));
        }
        if h >= cfg.max_horizon {
            return Err(Type2Error::Unresolved(h));
        }
        h = (2.0 * h).min(cfg.max_horizon);
    }
}

/// List index of `p(j)`: list 2 for even `j`, list 1 for odd `j`.
fn p(j: usize) -> usize {
    if j % 2 == 0 {
        1
    } else {
        0
    }
}

fn tail_max(f: &SpindleForest, from: usize) -> f64 {
    f.deaths()[from..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Stages of the interweaving, or `None` if both evolutions outlive the horizon.
fn interweave(f: &[SpindleForest; 2]) -> Option<Vec<Stage>> {
    // t[j + 1] = T_j; T_{-1} = -1 so that piece 1 starts at the first spindle of list 2.
    let mut t: Vec<i64> = vec![-1, 0];
    let mut z = vec![0.0, f[0].death(0)];
    let mut pieces: Vec<Segment> = vec![Segment { forest: 0, start: 0, end: 0 }];
    let mut j = 1;
    loop {
        let zj = z[j];
        let list = p(j + 1);
        let from = (t[j - 1] + 1) as usize;
        if zj.is_infinite() {
            // The clock of stage j - 1 outlives the simulation: the evolution
            // is determined only if the other list dies out.
            if tail_max(&f[list], from).is_infinite() {
                return None;
            }
            pieces.push(Segment { forest: list, start: from, end: f[list].len() });
            break;
        }
        match f[list].first_death_above(t[j - 1].max(0) as usize, zj) {
            None => {
                pieces.push(Segment { forest: list, start: from, end: f[list].len() });
                break;
            }
            Some(tj) => {
                pieces.push(Segment { forest: list, start: from, end: tj + 1 });
                t.push(tj as i64);
                z.push(f[list].death(tj));
                j += 1;
            }
        }
    }
    let last = pieces.len() - 1;
    let stages = (0..last)
        .map(|s| {
            let forest = p(s + 1);
            let idx = if s == 0 { 0 } else { t[s + 1] as usize };
            Stage {
                start: z[s],
                end: z[s + 1],
                clock: ClockRef::Spindle { forest, idx },
                label: if s % 2 == 0 { 1 } else { 2 },
                others: pieces[s + 1..].iter().copied().filter(|g| g.end > g.start).collect(),
            }
        })
        .collect();
    Some(stages)
}
