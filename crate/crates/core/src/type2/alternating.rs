use super::{validate_state, ClockRef, Construction, Segment, Stage, Type2Config, Type2Error, Type2Run};
use crate::chains::{RootKind, RootSpec, SpindleForest};
use crate::ip::IntervalPartition;
use crate::kernels::sample_besq_path;
use crate::rng::RngStream;
use crate::scaffolding::lattice_pop;

/// A BESQ(−1) clock next to a type-1 evolution; when the clock dies the
/// leftmost block of the type-1 evolution becomes the next clock and the
/// rest restarts as a fresh type-1 evolution.
pub fn type2_alternating(a: f64, b: f64, beta: &IntervalPartition, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    cfg.validate()?;
    validate_state(a, b, beta)?;
    let rest: Vec<u32> = std::iter::once(b).chain(beta.masses()).map(|m| lattice_pop(m, cfg.n, rng)).collect();
    alternate(a, rest, cfg, rng)
}

/// Alternation from a continuous clock `a` and populations `rest` (other top first).
pub(crate) fn alternate(a: f64, mut rest: Vec<u32>, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    let n = cfg.n;
    let sc = cfg.scale();
    let h = cfg.horizon;
    let mut clock = a;
    let mut y = 0.0;
    let mut forests = Vec::new();
    let mut paths = Vec::new();
    let mut stages = Vec::new();
    if a == 0.0 && rest.iter().all(|&p| p == 0) {
        return Ok(Type2Run::assemble(Construction::Alternating, n, h, forests, paths, stages, false));
    }
    loop {
        let path = sample_besq_path(clock, -1.0, cfg.dt, h - y, rng)?;
        let end = y + path.lifetime;
        let roots: Vec<RootSpec> =
            rest.iter().filter(|&&p| p > 0).map(|&p| RootSpec { birth: y, pop: p, kind: RootKind::Clade }).collect();
        let f = SpindleForest::simulate(&roots, sc, end.min(h), rng);
        let label = if stages.len() % 2 == 0 { 1 } else { 2 };
        stages.push(Stage {
            start: y,
            end,
            clock: ClockRef::Besq { path: paths.len(), offset: y },
            label,
            others: vec![Segment { forest: forests.len(), start: 0, end: f.len() }],
        });
        paths.push(path);
        let next = if end.is_finite() { f.skewer_pops(end) } else { Vec::new() };
        forests.push(f);
        let Some((&top, tail)) = next.split_first() else {
            break;
        };
        clock = top as f64 / n as f64;
        rest = tail.to_vec();
        y = end;
    }
    Ok(Type2Run::assemble(Construction::Alternating, n, h, forests, paths, stages, false))
}
