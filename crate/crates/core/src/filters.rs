//! Free filters on ℕ = {1, 2, ...} evaluated on a finite horizon, and
//! filter convergence of real (or lattice-valued) sequences.
//!
//! Every verdict is relative to the horizon `H`. Cofinite membership is
//! accepted only when all exceptions sit in the first half `{1..H/2}`;
//! density-filter membership is read off the dyadic tail block
//! `(H/2, H]`, which ignores any finite initial segment just as the
//! asymptotic density does.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{unit_dominance, LatticeVector, OSequenceLadder};

/// A subset of ℕ, either as a closed-form predicate or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexSet {
    All,
    Empty,
    Evens,
    Odds,
    Squares,
    NonSquares,
    /// `{k : k >= m}`
    AtLeast(usize),
    /// Sorted, deduplicated indices.
    Explicit(Vec<usize>),
    /// `mask[k - 1]` tells whether `k` belongs; indices past the mask are excluded.
    Mask(Vec<bool>),
    Complement(Box<IndexSet>),
    Intersection(Box<IndexSet>, Box<IndexSet>),
}

fn is_square(k: usize) -> bool {
    let r = (k as f64).sqrt() as usize;
    (r.saturating_sub(1)..=r + 1).any(|q| q * q == k)
}

impl IndexSet {
    pub fn explicit(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet::Explicit(indices)
    }

    /// `{k <= horizon : pred(k)}` materialized as a mask.
    pub fn from_predicate(horizon: usize, pred: impl Fn(usize) -> bool + Sync) -> Self {
        IndexSet::Mask((1..=horizon).into_par_iter().map(&pred).collect())
    }

    pub fn complement(self) -> Self {
        IndexSet::Complement(Box::new(self))
    }

    pub fn intersect(self, other: IndexSet) -> Self {
        IndexSet::Intersection(Box::new(self), Box::new(other))
    }

    pub fn contains(&self, k: usize) -> bool {
        if k == 0 {
            return false;
        }
        match self {
            IndexSet::All => true,
            IndexSet::Empty => false,
            IndexSet::Evens => k.is_multiple_of(2),
            IndexSet::Odds => k % 2 == 1,
            IndexSet::Squares => is_square(k),
            IndexSet::NonSquares => !is_square(k),
            IndexSet::AtLeast(m) => k >= *m,
            IndexSet::Explicit(list) => list.binary_search(&k).is_ok(),
            IndexSet::Mask(mask) => mask.get(k - 1).copied().unwrap_or(false),
            IndexSet::Complement(inner) => !inner.contains(k),
            IndexSet::Intersection(x, y) => x.contains(k) && y.contains(k),
        }
    }

    /// `|self ∩ {lo..=hi}|`.
    pub fn count_in(&self, lo: usize, hi: usize) -> usize {
        let lo = lo.max(1);
        if hi < lo {
            return 0;
        }
        match self {
            IndexSet::All => hi - lo + 1,
            IndexSet::Empty => 0,
            IndexSet::Squares => isqrt(hi) - isqrt(lo - 1),
            IndexSet::NonSquares => (hi - lo + 1) - (isqrt(hi) - isqrt(lo - 1)),
            IndexSet::Evens => hi / 2 - (lo - 1) / 2,
            IndexSet::Odds => (hi - lo + 1) - (hi / 2 - (lo - 1) / 2),
            IndexSet::Explicit(list) => {
                let start = list.partition_point(|&k| k < lo);
                let end = list.partition_point(|&k| k <= hi);
                end - start
            }
            IndexSet::Complement(inner) => (hi - lo + 1) - inner.count_in(lo, hi),
            _ => (lo..=hi).filter(|&k| self.contains(k)).count(),
        }
    }

    /// Whether `self ∩ {1..H} ⊆ other`.
    pub fn subset_upto(&self, other: &IndexSet, horizon: usize) -> bool {
        (1..=horizon).all(|k| !self.contains(k) || other.contains(k))
    }
}

fn isqrt(k: usize) -> usize {
    let mut r = (k as f64).sqrt() as usize;
    while r * r > k {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= k {
        r += 1;
    }
    r
}

/// Finite-horizon density `|s ∩ {1..H}| / H`.
pub fn density(s: &IndexSet, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    Ok(s.count_in(1, horizon) as f64 / horizon as f64)
}

/// Density of `s` on the dyadic block `(H/2, H]`.
pub fn tail_block_density(s: &IndexSet, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let start = horizon / 2 + 1;
    Ok(s.count_in(start, horizon) as f64 / (horizon - start + 1) as f64)
}

pub const DEFAULT_DENSITY_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    Cofinite,
    Density { threshold: f64 },
    ExplicitBase { base: Vec<IndexSet> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    kind: FilterKind,
    horizon: usize,
}

impl FilterSpec {
    pub fn cofinite(horizon: usize) -> Result<Self> {
        Self::new(FilterKind::Cofinite, horizon)
    }

    pub fn density(horizon: usize, threshold: f64) -> Result<Self> {
        Self::new(FilterKind::Density { threshold }, horizon)
    }

    pub fn explicit_base(horizon: usize, base: Vec<IndexSet>) -> Result<Self> {
        Self::new(FilterKind::ExplicitBase { base }, horizon)
    }

    pub fn new(kind: FilterKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        match &kind {
            FilterKind::Density { threshold } if !(*threshold > 0.0 && *threshold <= 1.0) => {
                return Err(Error::InvalidParameter(format!("density threshold must lie in (0, 1], got {threshold}")));
            }
            FilterKind::ExplicitBase { base } => {
                if base.is_empty() {
                    return Err(Error::InvalidParameter("filter base must be nonempty".into()));
                }
                // Filter-base axiom up to the horizon: every pairwise
                // intersection contains some member of the base.
                for (i, x) in base.iter().enumerate() {
                    if x.count_in(1, horizon) == 0 {
                        return Err(Error::InvalidParameter(format!("base set {i} is empty up to the horizon")));
                    }
                    for y in &base[i + 1..] {
                        let both = x.clone().intersect(y.clone());
                        if !base.iter().any(|c| c.subset_upto(&both, horizon)) {
                            return Err(Error::InvalidParameter(
                                "base is not closed under pairwise intersection up to the horizon".into(),
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(Self { kind, horizon })
    }

    pub fn kind(&self) -> &FilterKind {
        &self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn descriptor(&self) -> FilterDescriptor {
        match &self.kind {
            FilterKind::Cofinite => FilterDescriptor { kind: "cofinite".into(), threshold: None, base_sets: None },
            FilterKind::Density { threshold } => {
                FilterDescriptor { kind: "density".into(), threshold: Some(*threshold), base_sets: None }
            }
            FilterKind::ExplicitBase { base } => {
                FilterDescriptor { kind: "explicit_base".into(), threshold: None, base_sets: Some(base.len()) }
            }
        }
    }
}

/// Serializable summary of a [`FilterSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDescriptor {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_sets: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    InFilter,
    NotInFilter,
    Undecidable,
}

/// Horizon-relative membership of `s` in the filter.
pub fn contains(f: &FilterSpec, s: &IndexSet) -> Verdict {
    let horizon = f.horizon;
    match &f.kind {
        FilterKind::Cofinite => {
            let last_exception = (1..=horizon).rev().find(|&k| !s.contains(k));
            match last_exception {
                None => Verdict::InFilter,
                Some(k) if k <= horizon / 2 => Verdict::InFilter,
                Some(_) => Verdict::Undecidable,
            }
        }
        FilterKind::Density { threshold } => {
            let d = tail_block_density(s, horizon).expect("horizon >= 1");
            if d >= *threshold {
                Verdict::InFilter
            } else {
                Verdict::NotInFilter
            }
        }
        FilterKind::ExplicitBase { base } => {
            if base.iter().any(|b| b.subset_upto(s, horizon)) {
                Verdict::InFilter
            } else {
                Verdict::NotInFilter
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub epsilon: f64,
    pub set_size: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub horizon: usize,
    pub filter: FilterDescriptor,
    pub rungs: Vec<Rung>,
    pub pass: bool,
}

/// Filter convergence of `z ↦ x_z` to `limit`: for each rung `ε` the set
/// `{z <= H : |x_z − limit| <= ε}` must belong to the filter.
pub fn filter_limit_verdict(
    x: impl Fn(usize) -> f64 + Sync,
    limit: f64,
    ladder: &OSequenceLadder,
    f: &FilterSpec,
) -> ConvergenceReport {
    verdict_from_distance(|z| (x(z) - limit).abs(), ladder, f)
}

/// Lattice-valued variant: distances are measured by `unit_dominance(x_z − limit)`.
pub fn filter_limit_verdict_lattice(
    x: impl Fn(usize) -> LatticeVector + Sync,
    limit: &LatticeVector,
    ladder: &OSequenceLadder,
    f: &FilterSpec,
) -> Result<ConvergenceReport> {
    let probe = x(1);
    if probe.dim() != limit.dim() {
        return Err(Error::DimensionMismatch { left: probe.dim(), right: limit.dim() });
    }
    Ok(verdict_from_distance(
        |z| unit_dominance(&x(z).sub(limit).expect("generator keeps a fixed dimension")),
        ladder,
        f,
    ))
}

fn verdict_from_distance(dist: impl Fn(usize) -> f64 + Sync, ladder: &OSequenceLadder, f: &FilterSpec) -> ConvergenceReport {
    let horizon = f.horizon;
    let distances: Vec<f64> = (1..=horizon).into_par_iter().map(&dist).collect();
    let rungs: Vec<Rung> = ladder
        .values()
        .par_iter()
        .map(|&epsilon| {
            let set = IndexSet::Mask(distances.iter().map(|&d| d <= epsilon).collect());
            Rung { epsilon, set_size: set.count_in(1, horizon), verdict: contains(f, &set) }
        })
        .collect();
    let pass = rungs.iter().all(|r| r.verdict == Verdict::InFilter);
    ConvergenceReport { horizon, filter: f.descriptor(), rungs, pass }
}
