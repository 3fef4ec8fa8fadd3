//! Shared test helpers, including the explicit-ancilla POVM oracle.

use ghz_distill::povm::MeasurementBasis;
use ghz_distill::state::{BipartiteState, Subsystem, TripartiteState};
use num_complex::Complex64;

/// Outcome of the brute-force step, mirroring `PovmOutcome`.
pub struct OracleOutcome {
    pub success_state: TripartiteState,
    pub success_prob: f64,
    pub failure_residue: Option<BipartiteState>,
    pub failure_prob: f64,
}

/// Build the 4x4 coupling on (subsystem (x) ancilla) from the four rules, in
/// the given local basis: the plus branch mixes the ancilla through the
/// reflection [[alpha, beta], [beta, -alpha]], the minus branch leaves it
/// alone.
pub fn coupling_matrix(
    alpha: f64,
    b_plus: &[Complex64; 2],
    b_minus: &[Complex64; 2],
) -> [[Complex64; 4]; 4] {
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let mut u = [[Complex64::ZERO; 4]; 4];
    for r_s in 0..2 {
        for r_a in 0..2 {
            for c_s in 0..2 {
                for c_a in 0..2 {
                    let p_plus = b_plus[r_s] * b_plus[c_s].conj();
                    let p_minus = b_minus[r_s] * b_minus[c_s].conj();
                    let refl = match (r_a, c_a) {
                        (0, 0) => alpha,
                        (1, 1) => -alpha,
                        _ => beta,
                    };
                    let ident = if r_a == c_a { 1.0 } else { 0.0 };
                    u[r_s * 2 + r_a][c_s * 2 + c_a] = p_plus * refl + p_minus * ident;
                }
            }
        }
    }
    u
}

/// The local basis a measurement mode selects for a given state/subsystem.
pub fn basis_vectors(
    state: &TripartiteState,
    s: Subsystem,
    basis: MeasurementBasis,
) -> ([Complex64; 2], [Complex64; 2]) {
    let view = state.schmidt_decompose(s);
    match basis {
        MeasurementBasis::Schmidt => (view.plus_vec, view.minus_vec),
        MeasurementBasis::Rotated(theta) => {
            let (sin, cos) = theta.sin_cos();
            let mix = |a: f64, u: &[Complex64; 2], b: f64, v: &[Complex64; 2]| {
                [a * u[0] + b * v[0], a * u[1] + b * v[1]]
            };
            (
                mix(cos, &view.plus_vec, sin, &view.minus_vec),
                mix(-sin, &view.plus_vec, cos, &view.minus_vec),
            )
        }
    }
}

/// Brute-force POVM step: adjoin a 2-dim ancilla in |0>, apply the coupling
/// on the (subsystem, ancilla) factor of the 16-dim space, and project the
/// ancilla on |0> / |1>. Completely independent of the analytic step.
pub fn oracle_povm_step(
    state: &TripartiteState,
    s: Subsystem,
    alpha: f64,
    basis: MeasurementBasis,
) -> OracleOutcome {
    let (b_plus, b_minus) = basis_vectors(state, s, basis);
    let u = coupling_matrix(alpha, &b_plus, &b_minus);

    // 16-dim vector indexed by 2*label + ancilla bit.
    let mut full = [Complex64::ZERO; 16];
    for l in 0..8 {
        full[l * 2] = state.amp(l);
    }

    let bit = 3 - s.index() as usize;
    let mut after = [Complex64::ZERO; 16];
    for l in 0..8usize {
        for a in 0..2usize {
            let src = full[l * 2 + a];
            if src == Complex64::ZERO {
                continue;
            }
            let sb = (l >> bit) & 1;
            for new_sb in 0..2usize {
                for new_a in 0..2usize {
                    let nl = (l & !(1 << bit)) | (new_sb << bit);
                    after[nl * 2 + new_a] += u[new_sb * 2 + new_a][sb * 2 + a] * src;
                }
            }
        }
    }

    let mut succ = [Complex64::ZERO; 8];
    let mut fail = [Complex64::ZERO; 8];
    let mut p_succ = 0.0;
    let mut p_fail = 0.0;
    for l in 0..8 {
        succ[l] = after[l * 2];
        fail[l] = after[l * 2 + 1];
        p_succ += succ[l].norm_sqr();
        p_fail += fail[l].norm_sqr();
    }

    let success_state = TripartiteState::from_unnormalized(succ)
        .unwrap_or_else(|_| state.clone());
    // The failure branch is |b+>_s (x) residue; project the residue out.
    let failure_residue = if p_fail > 1e-20 {
        let fail_state = TripartiteState::from_unnormalized(fail).expect("nonzero branch");
        let co = fail_state.project_onto(s, &b_plus);
        Some(BipartiteState::new(s.residue_pair(), co, p_fail).expect("nonzero residue"))
    } else {
        None
    };

    OracleOutcome {
        success_state,
        success_prob: p_succ,
        failure_residue,
        failure_prob: p_fail,
    }
}

/// Max deviation of U*U from the identity, for unitarity checks.
pub fn unitarity_defect(u: &[[Complex64; 4]; 4]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut e = Complex64::ZERO;
            for k in 0..4 {
                e += u[k][i].conj() * u[k][j];
            }
            let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
            worst = worst.max((e - target).norm());
        }
    }
    worst
}

/// Print one pass/fail line for an acceptance criterion; returns `pass` so
/// callers can assert on it afterwards.
pub fn report(criterion: &str, pass: bool, detail: &str) -> bool {
    eprintln!(
        "[acceptance] {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
