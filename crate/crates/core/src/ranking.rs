//! Generalized Kendall rank distance with element weights, position swap
//! costs and element swap costs.
//!
//! A [`Ranking`] lists the rank of each competitor. Distances are taken
//! against the identity, so competitors are expected in reference-rank order:
//! competitor `i` is the one the reference ranking puts at position `i`.
//! [`kendall_between`] reindexes an arbitrary pair of rankings that way.
//!
//! These distances are provided for studying rank-based judge evaluation;
//! they are not part of the marking-score pipeline.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::model::{ParameterSetId, RankingParams};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    /// `ranks[i]` is the 1-based rank of competitor `i`.
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r == 0 || r > n || seen[r - 1] {
                return Err(Error::InvalidRanking(format!("{ranks:?} is not a permutation of 1..={n}")));
            }
            seen[r - 1] = true;
        }
        Ok(Ranking(ranks))
    }

    pub fn identity(n: usize) -> Self {
        Ranking((1..=n).collect())
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `inverse().ranks()[k - 1]` is the competitor (1-based) holding rank `k`.
    pub fn inverse(&self) -> Ranking {
        let mut inv = vec![0; self.0.len()];
        for (i, &r) in self.0.iter().enumerate() {
            inv[r - 1] = i + 1;
        }
        Ranking(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Ranking) -> Result<Ranking> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(Ranking(other.0.iter().map(|&o| self.0[o - 1]).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lower index ranks first.
    #[default]
    ByIndex,
    Random(u64),
}

/// Rank 1 goes to the highest mark.
pub fn ranking_from_marks(marks: &[f64], tie_break: TieBreak) -> Ranking {
    let keys: Vec<u64> = match tie_break {
        TieBreak::ByIndex => vec![0; marks.len()],
        TieBreak::Random(seed) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            marks.iter().map(|_| rng.next_u64()).collect()
        }
    };
    let mut order: Vec<usize> = (0..marks.len()).collect();
    order.sort_by(|&a, &b| marks[b].total_cmp(&marks[a]).then(keys[a].cmp(&keys[b])).then(a.cmp(&b)));
    let mut ranks = vec![0; marks.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ranking(ranks)
}

/// Distance between `r` and the identity ranking.
pub fn generalized_kendall(r: &Ranking, params: &RankingParams) -> Result<f64> {
    let n = r.len();
    if params.len() != n {
        return Err(Error::DimensionMismatch { expected: params.len(), got: n });
    }
    params.validate()?;

    // cumulative[i] = delta_1 + ... + delta_{i+1}
    let cumulative: Vec<f64> = params
        .delta
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    // Mean cost of moving the element at position i to position r_i; 1 for fixed points.
    let mean_cost: Vec<f64> = (0..n)
        .map(|i| {
            let target = r.0[i] - 1;
            if target == i {
                1.0
            } else {
                (cumulative[i] - cumulative[target]) / (i as f64 - target as f64)
            }
        })
        .collect();

    let mut total = 0.0;
    for s in 0..n {
        for t in 0..s {
            if r.0[s] < r.0[t] {
                total += params.w[s] * params.w[t] * mean_cost[s] * mean_cost[t] * params.d[s][t];
            }
        }
    }
    Ok(total)
}

/// Distance between two rankings of the same competitors, with positions
/// taken from `reference`.
pub fn kendall_between(r: &Ranking, reference: &Ranking, params: &RankingParams) -> Result<f64> {
    let composite = r.compose(&reference.inverse())?;
    generalized_kendall(&composite, params)
}

/// Materializes a predefined parameter set. `controls[i]` is the control score
/// of the competitor at reference position `i`.
pub fn parameter_set(set_id: ParameterSetId, controls: &[f64]) -> Result<RankingParams> {
    let n = controls.len();
    let unit_costs =
        || -> Vec<Vec<f64>> { (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect() };
    let score_gaps =
        || -> Vec<Vec<f64>> { (0..n).map(|i| (0..n).map(|j| (controls[i] - controls[j]).abs()).collect()).collect() };
    let (delta, d) = match set_id {
        ParameterSetId::Set1 => (vec![1.0; n], unit_costs()),
        ParameterSetId::Set2 => (vec![1.0; n], score_gaps()),
        ParameterSetId::Set3 => ((1..=n).map(|i| 1.0 / i as f64).collect(), score_gaps()),
        ParameterSetId::Custom => return Err(Error::UnknownParameterSet("CUSTOM".into())),
    };
    Ok(RankingParams { set_id, w: vec![1.0; n], delta, d })
}

pub const PARAMETER_SETS: [ParameterSetId; 3] = [ParameterSetId::Set1, ParameterSetId::Set2, ParameterSetId::Set3];
