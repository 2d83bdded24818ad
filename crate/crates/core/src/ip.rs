//! Interval partitions stored as ordered block masses with optional
//! diversity annotations.
//!
//! Left endpoints are implicit prefix sums of the masses. Missing
//! diversity annotations read as 0.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IpError {
    #[error("block {index} has non-positive mass {mass}")]
    NonPositiveMass { index: usize, mass: f64 },
    #[error("diversity annotation decreases at block {index}")]
    DiversityDecreasing { index: usize },
    #[error("total diversity {total} is below the last block annotation {last}")]
    TotalBelowLast { total: f64, last: f64 },
    #[error("annotations must be given for all blocks or for none")]
    PartialAnnotation,
    #[error("cannot parse partition line: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub mass: f64,
    pub div_left: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    blocks: Vec<Block>,
    total_diversity: Option<f64>,
}

impl IntervalPartition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validating constructor.
    pub fn new(blocks: Vec<Block>, total_diversity: Option<f64>) -> Result<Self, IpError> {
        let annotated = blocks.iter().filter(|b| b.div_left.is_some()).count();
        if annotated != 0 && annotated != blocks.len() {
            return Err(IpError::PartialAnnotation);
        }
        let mut last = 0.0_f64;
        for (index, b) in blocks.iter().enumerate() {
            if !(b.mass > 0.0) || !b.mass.is_finite() {
                return Err(IpError::NonPositiveMass { index, mass: b.mass });
            }
            if let Some(d) = b.div_left {
                if d < last || d < 0.0 {
                    return Err(IpError::DiversityDecreasing { index });
                }
                last = d;
            }
        }
        if let Some(total) = total_diversity {
            if total < last {
                return Err(IpError::TotalBelowLast { total, last });
            }
        }
        Ok(Self { blocks, total_diversity })
    }

    /// Unannotated partition from masses; every mass must be positive.
    pub fn from_masses(masses: &[f64]) -> Result<Self, IpError> {
        Self::new(
            masses.iter().map(|&mass| Block { mass, div_left: None }).collect(),
            None,
        )
    }

    /// Internal constructor for masses already known to be positive.
    pub(crate) fn from_masses_unchecked(masses: Vec<f64>) -> Self {
        debug_assert!(masses.iter().all(|&m| m > 0.0));
        Self {
            blocks: masses.into_iter().map(|mass| Block { mass, div_left: None }).collect(),
            total_diversity: None,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().map(|b| b.mass)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.blocks.iter().map(|b| b.mass).sum()
    }

    pub fn is_annotated(&self) -> bool {
        self.total_diversity.is_some() || self.blocks.iter().any(|b| b.div_left.is_some())
    }

    /// Total diversity, 0 when absent.
    pub fn total_diversity(&self) -> f64 {
        self.total_diversity.unwrap_or(0.0)
    }

    /// Diversity to the left of block `i`, 0 when absent.
    pub fn div_left(&self, i: usize) -> f64 {
        self.blocks[i].div_left.unwrap_or(0.0)
    }

    /// Drop the first `k` blocks, keeping annotations as they are.
    pub fn without_prefix(&self, k: usize) -> Self {
        let k = k.min(self.blocks.len());
        Self {
            blocks: self.blocks[k..].to_vec(),
            total_diversity: self.total_diversity,
        }
    }

    /// Copy of the partition with annotations from [`diversity_estimate`] at `h`.
    pub fn annotate(&self, h: f64) -> Self {
        let unit = (PI * h).sqrt();
        let mut count = 0usize;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            blocks.push(Block { mass: b.mass, div_left: Some(unit * count as f64) });
            if b.mass > h {
                count += 1;
            }
        }
        Self { blocks, total_diversity: Some(unit * count as f64) }
    }

    /// Comma-separated masses on the first line; with annotations, a second
    /// line holds the per-block left diversities followed by the total.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        join_into(&mut out, self.masses());
        if self.is_annotated() {
            out.push('\n');
            join_into(
                &mut out,
                (0..self.len()).map(|i| self.div_left(i)).chain(std::iter::once(self.total_diversity())),
            );
        }
        out
    }

    pub fn from_lines(masses: &str, diversity: Option<&str>) -> Result<Self, IpError> {
        let masses = parse_list(masses)?;
        match diversity {
            None => Self::from_masses(&masses),
            Some(line) => {
                let divs = parse_list(line)?;
                if divs.len() != masses.len() + 1 {
                    return Err(IpError::Parse(format!(
                        "expected {} diversity values, found {}",
                        masses.len() + 1,
                        divs.len()
                    )));
                }
                let blocks = masses
                    .iter()
                    .zip(&divs)
                    .map(|(&mass, &d)| Block { mass, div_left: Some(d) })
                    .collect();
                Self::new(blocks, Some(divs[masses.len()]))
            }
        }
    }
}

fn join_into(out: &mut String, values: impl Iterator<Item = f64>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

fn parse_list(line: &str) -> Result<Vec<f64>, IpError> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| IpError::Parse(format!("{s:?}: {e}"))))
        .collect()
}

/// `√(πh)` times the number of blocks of mass greater than `h` among the
/// first `upto` blocks (all blocks when `upto` is `None`).
pub fn diversity_estimate(beta: &IntervalPartition, h: f64, upto: Option<usize>) -> f64 {
    assert!(h > 0.0, "diversity_estimate needs h > 0");
    let end = upto.unwrap_or(beta.len()).min(beta.len());
    let count = beta.blocks[..end].iter().filter(|b| b.mass > h).count();
    (PI * h).sqrt() * count as f64
}

/// Blocks of `beta` followed by blocks of `gamma`, with the annotations of
/// `gamma` shifted by the total diversity of `beta`.
pub fn concatenate(beta: &IntervalPartition, gamma: &IntervalPartition) -> IntervalPartition {
    let annotated = beta.is_annotated() || gamma.is_annotated();
    let shift = beta.total_diversity();
    let mut blocks = Vec::with_capacity(beta.len() + gamma.len());
    for (i, b) in beta.blocks.iter().enumerate() {
        let div_left = annotated.then(|| beta.div_left(i));
        blocks.push(Block { mass: b.mass, div_left });
    }
    for (i, b) in gamma.blocks.iter().enumerate() {
        let div_left = annotated.then(|| shift + gamma.div_left(i));
        blocks.push(Block { mass: b.mass, div_left });
    }
    let total_diversity = annotated.then(|| shift + gamma.total_diversity());
    IntervalPartition { blocks, total_diversity }
}

/// Masses times `c`, diversities times `√c`.
pub fn scale(c: f64, beta: &IntervalPartition) -> IntervalPartition {
    assert!(c > 0.0, "scale needs c > 0");
    let r = c.sqrt();
    IntervalPartition {
        blocks: beta
            .blocks
            .iter()
            .map(|b| Block { mass: c * b.mass, div_left: b.div_left.map(|d| r * d) })
            .collect(),
        total_diversity: beta.total_diversity.map(|d| r * d),
    }
}
