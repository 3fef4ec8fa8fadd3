//! Exceptional states of the distillation dynamics: triple states, the
//! golden-mean attractor, and escape through a rotated measurement basis.
//!
//! A triple state has exactly three components in the product of the three
//! local Schmidt bases, each pairwise biorthogonal (but not triorthogonal) to
//! the other two: the support is {001, 010, 100} or a local bit-flip image of
//! it. Both distillation procedures map triple states to triple states, so
//! the GHZ state is never reached from them.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::povm::{alpha_big_step, povm_step, MeasurementBasis, PovmOutcome};
use crate::state::{Subsystem, TripartiteState};

/// Default tolerance on off-pattern residual mass.
pub const TRIPLE_TOL: f64 = 1e-9;

/// What the triple-state detector saw.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleStateReport {
    pub is_triple: bool,
    /// The three basis labels carrying the amplitude, in the product of the
    /// local Schmidt bases; ascending order.
    pub support_pattern: Option<[u8; 3]>,
    /// Probability mass outside the best-matching pattern.
    pub residual: f64,
}

/// All local-bit-flip images of {001, 010, 100}: the 3-subsets of one parity
/// class where every pair of labels differs in exactly two bit positions.
const PATTERNS: [[u8; 3]; 8] = [
    [1, 2, 4],
    [0, 3, 5],
    [0, 3, 6],
    [0, 5, 6],
    [1, 2, 7],
    [1, 4, 7],
    [2, 4, 7],
    [3, 5, 6],
];

/// Test whether the state is a triple state, within `tol` residual mass.
///
/// The state is transformed into the product of the three local Schmidt
/// bases, and the support (components with |amp|^2 > tol) is matched against
/// the eight patterns. When one subsystem has a degenerate Schmidt spectrum
/// (p = 1/2) its eigenbasis is not unique, so a failed match retries with a
/// basis recovered from the pattern structure itself.
pub fn is_triple_state(state: &TripartiteState, tol: f64) -> TripleStateReport {
    let views: Vec<_> = Subsystem::all()
        .into_iter()
        .map(|s| state.schmidt_decompose(s))
        .collect();
    let bases: [[[Complex64; 2]; 2]; 3] = [
        [views[0].plus_vec, views[0].minus_vec],
        [views[1].plus_vec, views[1].minus_vec],
        [views[2].plus_vec, views[2].minus_vec],
    ];

    let transformed = transform_to_bases(state, &bases);
    let report = match_patterns(&transformed, tol);
    if report.is_triple {
        return report;
    }

    // Degenerate retry: a genuine triple state has at most one component
    // weight equal to 1/2, hence at most one degenerate subsystem.
    let degenerate: Vec<usize> = (0..3)
        .filter(|&i| (views[i].p - 0.5).abs() < 1e-6)
        .collect();
    if degenerate.len() == 1 {
        let k = degenerate[0];
        if let Some(recovered) = recover_degenerate_basis(state, &bases, k) {
            let mut bases2 = bases;
            bases2[k] = recovered;
            let retry = match_patterns(&transform_to_bases(state, &bases2), tol);
            if retry.is_triple {
                return retry;
            }
        }
    }
    report
}

/// Rewrite the amplitudes in the given per-subsystem orthonormal bases.
fn transform_to_bases(state: &TripartiteState, bases: &[[[Complex64; 2]; 2]; 3]) -> [Complex64; 8] {
    let mut out = [Complex64::ZERO; 8];
    for label in 0..8usize {
        let mut acc = Complex64::ZERO;
        for src in 0..8usize {
            let mut coeff = Complex64::ONE;
            for (i, basis) in bases.iter().enumerate() {
                let bit = 2 - i;
                let row = (label >> bit) & 1;
                let col = (src >> bit) & 1;
                coeff *= basis[row][col].conj();
            }
            acc += coeff * state.amp(src);
        }
        out[label] = acc;
    }
    out
}

fn match_patterns(amps: &[Complex64; 8], tol: f64) -> TripleStateReport {
    let mass: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let mut best: Option<([u8; 3], f64, f64)> = None;
    for pattern in PATTERNS {
        let in_mass: f64 = pattern.iter().map(|&l| mass[l as usize]).sum();
        let min_component = pattern
            .iter()
            .map(|&l| mass[l as usize])
            .fold(f64::INFINITY, f64::min);
        let residual = (1.0 - in_mass).max(0.0);
        if best.map_or(true, |(_, r, _)| residual < r) {
            best = Some((pattern, residual, min_component));
        }
    }
    let (pattern, residual, min_component) = best.expect("pattern list is nonempty");
    // Exactly three nonzero components: all pattern slots carry real mass.
    let is_triple = residual < tol && min_component > tol;
    TripleStateReport {
        is_triple,
        support_pattern: is_triple.then_some(pattern),
        residual,
    }
}

/// For a degenerate subsystem `k`, look for a local basis vector whose
/// projection leaves a single-component co-vector, as the pattern demands.
fn recover_degenerate_basis(
    state: &TripartiteState,
    bases: &[[[Complex64; 2]; 2]; 3],
    k: usize,
) -> Option<[[Complex64; 2]; 2]> {
    // Transform the other two subsystems only.
    let mut partial = *bases;
    partial[k] = [
        [Complex64::ONE, Complex64::ZERO],
        [Complex64::ZERO, Complex64::ONE],
    ];
    let amps = transform_to_bases(state, &partial);

    // Rows of the 2x4 matrix A[s][m]: s = subsystem-k bit, m = label of the
    // other two bits in ascending subsystem order.
    let bit = 2 - k;
    let mut a = [[Complex64::ZERO; 4]; 2];
    for l in 0..8usize {
        let s = (l >> bit) & 1;
        let (hi, lo) = match k {
            0 => ((l >> 1) & 1, l & 1),
            1 => ((l >> 2) & 1, l & 1),
            _ => ((l >> 2) & 1, (l >> 1) & 1),
        };
        a[s][hi * 2 + lo] = amps[l];
    }

    // Try each column as the single-support target: find the unit vector v
    // with conj(v) . (A[0][m], A[1][m]) = 0 for all other columns m.
    let mut best: Option<([[Complex64; 2]; 2], f64)> = None;
    for target in 0..4usize {
        let rows: Vec<[Complex64; 2]> = (0..4)
            .filter(|&m| m != target)
            .map(|m| [a[0][m], a[1][m]])
            .collect();
        let pivot = rows
            .iter()
            .max_by(|x, y| {
                let nx = x[0].norm_sqr() + x[1].norm_sqr();
                let ny = y[0].norm_sqr() + y[1].norm_sqr();
                nx.partial_cmp(&ny).expect("finite norms")
            })
            .copied()
            .expect("three rows");
        let pn = pivot[0].norm_sqr() + pivot[1].norm_sqr();
        if pn < 1e-20 {
            continue;
        }
        // Null direction of the pivot row (conjugated so it can act as a bra).
        let vbar = [pivot[1] / pn.sqrt(), -pivot[0] / pn.sqrt()];
        let defect: f64 = rows
            .iter()
            .map(|r| (vbar[0] * r[0] + vbar[1] * r[1]).norm_sqr())
            .sum();
        if best.map_or(true, |(_, d)| defect < d) {
            let v = [vbar[0].conj(), vbar[1].conj()];
            let v_perp = [-v[1].conj(), v[0].conj()];
            // v isolates the single-support branch; order within the basis is
            // immaterial because all flip images are matched anyway.
            best = Some(([v_perp, v], defect));
        }
    }
    best.map(|(basis, _)| basis)
}

/// The golden-mean attractor of big-step iteration on triple states:
/// sqrt(1/2)|001> + sqrt((sqrt5 - 1)/4)|010> + sqrt((3 - sqrt5)/4)|100>.
pub fn golden_mean_state() -> TripartiteState {
    let mut amps = [Complex64::ZERO; 8];
    let w = golden_mean_weights();
    amps[0b001] = Complex64::new(w[0].sqrt(), 0.0);
    amps[0b010] = Complex64::new(w[1].sqrt(), 0.0);
    amps[0b100] = Complex64::new(w[2].sqrt(), 0.0);
    TripartiteState::new(amps).expect("golden-mean weights sum to 1")
}

/// Component weights of the golden-mean state on |001>, |010>, |100>.
pub fn golden_mean_weights() -> [f64; 3] {
    let s5 = 5.0f64.sqrt();
    [0.5, (s5 - 1.0) / 4.0, (3.0 - s5) / 4.0]
}

/// Sample a triple state: component weights uniform on the 2-simplex with
/// independent random phases, placed on the {001, 010, 100} pattern.
pub fn random_triple_state<R: Rng + ?Sized>(rng: &mut R) -> TripartiteState {
    // Uniform simplex weights via sorted-uniform gaps, rejecting near-zero
    // components so the state is a genuine three-component triple.
    loop {
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u > v {
            std::mem::swap(&mut u, &mut v);
        }
        let w = [u, v - u, 1.0 - v];
        if w.iter().any(|&x| x < 1e-4) {
            continue;
        }
        let mut amps = [Complex64::ZERO; 8];
        for (slot, &weight) in [0b001usize, 0b010, 0b100].iter().zip(&w) {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            amps[*slot] = Complex64::from_polar(weight.sqrt(), phase);
        }
        return TripartiteState::new(amps).expect("simplex weights sum to 1");
    }
}

/// L2 distance between the sorted amplitude-magnitude multisets of two
/// states. The attractor is approached up to cyclic shuffling of the
/// components, so position-wise comparison is meaningless.
pub fn multiset_distance(a: &TripartiteState, b: &TripartiteState) -> f64 {
    let mut ma: Vec<f64> = a.amps().iter().map(|x| x.norm()).collect();
    let mut mb: Vec<f64> = b.amps().iter().map(|x| x.norm()).collect();
    ma.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    mb.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    ma.iter()
        .zip(mb.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Iterate `n_cycles` big-step cycles (success branches only) on a triple
/// state. Errors if the input is not a triple state. The result is again a
/// triple state; its amplitude multiset converges to the golden-mean weights,
/// after which further steps cyclically shuffle the components.
pub fn attractor_iterate(state: &TripartiteState, n_cycles: usize) -> Result<TripartiteState> {
    let report = is_triple_state(state, TRIPLE_TOL);
    if !report.is_triple {
        return Err(Error::NotTripleState {
            residual: report.residual,
        });
    }
    let mut current = state.clone();
    for _ in 0..n_cycles {
        for s in Subsystem::all() {
            current = attractor_single_step(&current, s)?;
        }
    }
    Ok(current)
}

/// One big-step success branch on one subsystem, skipping p = 1/2 exactly.
pub fn attractor_single_step(state: &TripartiteState, s: Subsystem) -> Result<TripartiteState> {
    let p = state.local_probability(s);
    if p - 0.5 < 1e-12 {
        return Ok(state.clone());
    }
    let alpha = alpha_big_step(p)?;
    Ok(povm_step(state, s, alpha, MeasurementBasis::Schmidt)?.success_state)
}

/// A POVM step on subsystem 1 in a rotated basis. With the defaults
/// theta = pi/4, alpha = sqrt(1/2), this takes triple states to non-triple
/// states, from which ordinary distillation can proceed.
pub fn escape_step(state: &TripartiteState, theta: f64, alpha: f64) -> Result<PovmOutcome> {
    povm_step(state, Subsystem::ONE, alpha, MeasurementBasis::Rotated(theta))
}

pub const ESCAPE_THETA: f64 = std::f64::consts::FRAC_PI_4;
pub const ESCAPE_ALPHA: f64 = std::f64::consts::FRAC_1_SQRT_2;
