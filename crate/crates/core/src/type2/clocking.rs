use rand::RngCore;

use super::{validate_state, ClockRef, Construction, LatticeState, Segment, Stage, Type2Config, Type2Error, Type2Run};
use crate::chains::{immigrant_roots, RootKind, RootSpec, SpindleForest};
use crate::ip::IntervalPartition;
use crate::rng::RngStream;

/// Deletion clocking: a lone spindle for `a` as the first clock, then one
/// forest holding the spindle of `b` with the descent clades born below its
/// death, followed by the clades of `β`. Each clock is the first later
/// spindle outliving the previous clock; the clock's children born while it
/// is the clock are deleted.
pub fn type2_deletion_clocking(a: f64, b: f64, beta: &IntervalPartition, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    cfg.validate()?;
    validate_state(a, b, beta)?;
    let init = LatticeState::round(a, b, beta, cfg.n, rng);
    clocking_from_lattice(&init, false, cfg, rng)
}

/// Deletion clocking from populations. With `swapped` the clock `a` carries
/// label 2, which continues a run whose clock was the second top mass.
pub fn clocking_from_lattice(init: &LatticeState, swapped: bool, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    cfg.validate()?;
    let clock = (init.a, rng.next_u64());
    let host = (init.b, rng.next_u64());
    let beta: Vec<(u32, u64)> = init.beta.iter().map(|&p| (p, rng.next_u64())).collect();
    let top = lone(host, cfg).death(0).min(cfg.horizon);
    let descent = immigrant_roots(0.0, top, cfg.scale(), rng).into_iter().map(|r| (r.birth, rng.next_u64())).collect();
    let data = ClockingData { clock, host, descent, beta };
    Ok(run_clocking(&data, swapped, cfg))
}

/// Populations and seeds for deletion clocking. `descent` lists births of
/// the descent clades by decreasing level; only those below the death of
/// `host` are used.
#[derive(Clone, Debug)]
pub(crate) struct ClockingData {
    pub clock: (u32, u64),
    pub host: (u32, u64),
    pub descent: Vec<(f64, u64)>,
    pub beta: Vec<(u32, u64)>,
}

fn lone((pop, seed): (u32, u64), cfg: &Type2Config) -> SpindleForest {
    SpindleForest::simulate_seeded(&[(RootSpec { birth: 0.0, pop, kind: RootKind::Lone }, seed)], cfg.scale(), cfg.horizon, cfg.horizon)
}

pub(crate) fn run_clocking(data: &ClockingData, swapped: bool, cfg: &Type2Config) -> Type2Run {
    let f1 = lone(data.clock, cfg);
    let host_death = lone(data.host, cfg).death(0);
    let mut roots = vec![(RootSpec { birth: 0.0, pop: data.host.0, kind: RootKind::Lone }, data.host.1)];
    roots.extend(
        data.descent
            .iter()
            .filter(|d| d.0 < host_death)
            .map(|&(birth, seed)| (RootSpec { birth, pop: 1, kind: RootKind::Graft }, seed)),
    );
    roots.extend(data.beta.iter().map(|&(pop, seed)| (RootSpec { birth: 0.0, pop, kind: RootKind::Clade }, seed)));
    let star = SpindleForest::simulate_seeded(&roots, cfg.scale(), cfg.horizon, cfg.horizon);
    let dead = data.clock.0 == 0 && data.host.0 == 0 && data.beta.is_empty();
    let mut stages = Vec::new();
    if !dead {
        let len = star.len();
        let mut y = f1.death(0);
        stages.push(Stage {
            start: 0.0,
            end: y,
            clock: ClockRef::Spindle { forest: 1, idx: 0 },
            label: 1,
            others: vec![Segment { forest: 0, start: 0, end: len }],
        });
        let mut pos = 0;
        while y.is_finite() {
            let Some(k) = star.first_death_above(pos, y) else {
                break;
            };
            debug_assert!(star.birth(k) <= y);
            pos = star.children(k).find(|&c| star.birth(c) <= y).unwrap_or(star.subtree_end(k) + 1);
            let end = star.death(k);
            let label = if stages.len() % 2 == 0 { 1 } else { 2 };
            stages.push(Stage {
                start: y,
                end,
                clock: ClockRef::Spindle { forest: 0, idx: k },
                label,
                others: vec![Segment { forest: 0, start: pos, end: len }],
            });
            y = end;
        }
    }
    Type2Run::assemble(Construction::Clocking, cfg.n, cfg.horizon, vec![star, f1], Vec::new(), stages, swapped)
}
