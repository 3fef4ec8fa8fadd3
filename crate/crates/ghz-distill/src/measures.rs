//! Information and entanglement measures: local binary entropy, the three
//! GHZ-distance measures, and the entanglement entropy of bipartite residues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{BipartiteState, Subsystem, TripartiteState};

/// Distance of a state from the GHZ family under three different measures.
/// All three vanish simultaneously exactly when p1 = p2 = p3 = 1/2.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceTriple {
    /// sum p_i - 3/2, in [0, 3/2].
    pub d_p: f64,
    /// 3 - sum H(p_i), in [0, 3].
    pub d_s: f64,
    /// 3/4 - sum p_i (1 - p_i), in [0, 3/4].
    pub d_2: f64,
}

impl DistanceTriple {
    pub fn converged(&self, d_tol: f64) -> bool {
        self.d_p < d_tol
    }
}

/// Binary entropy H(p) = -(p log2 p + (1-p) log2 (1-p)), with 0 log 0 = 0.
///
/// This is the minimum local information generated by measuring a subsystem
/// whose reduced density matrix has eigenvalues p and 1-p; it is maximal (=1)
/// at p = 1/2.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(entropy_unchecked(p))
}

/// Entropy for callers holding an eigenvalue that may carry rounding noise
/// slightly outside [0, 1].
pub(crate) fn entropy_clamped(p: f64) -> f64 {
    entropy_unchecked(p.clamp(0.0, 1.0))
}

fn entropy_unchecked(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if q > 0.0 {
        h -= q * q.log2();
    }
    h
}

/// The three GHZ-distance measures, from the local probabilities p_i.
pub fn distances(state: &TripartiteState) -> DistanceTriple {
    let mut sum_p = 0.0;
    let mut sum_h = 0.0;
    let mut sum_pq = 0.0;
    for s in Subsystem::all() {
        let p = state.local_probability(s);
        sum_p += p;
        sum_h += entropy_clamped(p);
        sum_pq += p * (1.0 - p);
    }
    DistanceTriple {
        d_p: (sum_p - 1.5).max(0.0),
        d_s: (3.0 - sum_h).max(0.0),
        d_2: (0.75 - sum_pq).max(0.0),
    }
}

/// Entropy of entanglement of a two-qubit residue: the asymptotic EPR yield
/// per copy under standard concentration.
pub fn entanglement_entropy(residue: &BipartiteState) -> f64 {
    entropy_clamped(residue.schmidt_weight())
}

/// Single-copy Procrustean EPR yield of a residue: 2(1 - lambda_max).
pub fn single_shot_epr(residue: &BipartiteState) -> f64 {
    2.0 * (1.0 - residue.schmidt_weight())
}
