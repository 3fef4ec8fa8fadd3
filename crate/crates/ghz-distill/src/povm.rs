//! The ancilla-mediated POVM step.
//!
//! A single step couples one subsystem to an ancilla qubit through the
//! unitary (in the chosen local basis |b+>, |b-> of the subsystem)
//!
//! ```text
//! |b+>|0>  ->  alpha |b+>|0> + sqrt(1-alpha^2) |b+>|1>
//! |b->|0>  ->  |b->|0>
//! |b+>|1>  ->  sqrt(1-alpha^2) |b+>|0> - alpha |b+>|1>
//! |b->|1>  ->  |b->|1>
//! ```
//!
//! and then measures the ancilla. Ancilla outcome 0 keeps the tripartite
//! state with the |b+> branch attenuated by alpha; outcome 1 leaves the
//! measured subsystem in |b+> and the other two in the corresponding
//! co-state, a bipartite residue. The step here is carried out analytically
//! on the Schmidt view (no explicit ancilla); an explicit-ancilla simulation
//! lives in the test suite as an independent oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{BipartiteState, Subsystem, TripartiteState};

/// Which local basis the step measures in.
///
/// `Schmidt` uses the eigenbasis of the subsystem's reduced density matrix.
/// `Rotated(theta)` rotates that basis in its real span:
/// |b+> = cos(theta)|+> + sin(theta)|->, |b-> = -sin(theta)|+> + cos(theta)|->.
/// theta = 0 reduces to Schmidt mode; theta = pi/4 is the (|+> +- |->)/sqrt(2)
/// basis used to escape from triple states.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasurementBasis {
    Schmidt,
    Rotated(f64),
}

/// Both branches of one POVM step.
#[derive(Clone, Debug)]
pub struct PovmOutcome {
    pub success_state: TripartiteState,
    pub success_prob: f64,
    /// Residue on the pair complementary to the measured subsystem; its
    /// weight field carries `failure_prob`.
    pub failure_residue: BipartiteState,
    pub failure_prob: f64,
    pub measured_subsystem: Subsystem,
    pub alpha: f64,
}

/// alpha for the big step: drives the measured subsystem's p to 1/2 on
/// success, with success probability 2(1-p).
pub fn alpha_big_step(p: f64) -> Result<f64> {
    check_range("p", p, 0.5, 1.0)?;
    Ok(((1.0 - p) / p).sqrt().clamp(0.0, 1.0))
}

/// alpha realizing p -> p_target on the success branch:
/// alpha = sqrt( p_target (1-p) / (p (1-p_target)) ).
///
/// Requires 1/2 <= p_target <= p <= 1, and p < 1 unless p_target = p.
pub fn alpha_for_target(p: f64, p_target: f64) -> Result<f64> {
    check_range("p", p, 0.5, 1.0)?;
    check_range("p_target", p_target, 0.5, 1.0)?;
    if p_target > p + 1e-15 {
        return Err(Error::BadStepTarget { p, target: p_target });
    }
    if p_target >= p {
        return Ok(1.0);
    }
    if p >= 1.0 {
        return Err(Error::BadStepTarget { p, target: p_target });
    }
    Ok((p_target * (1.0 - p) / (p * (1.0 - p_target))).sqrt().clamp(0.0, 1.0))
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    // Absorb eigenvalue rounding at the boundaries.
    if !(value >= lo - 1e-12 && value <= hi + 1e-12) {
        return Err(Error::OutOfRange { name, value, lo, hi });
    }
    Ok(())
}

/// One POVM step on subsystem `s` with the given alpha and basis.
///
/// Writing the state as sqrt(q)|b+>|w+> + sqrt(1-q)|b->|w-> in the chosen
/// basis, the success branch keeps
/// normalize(alpha sqrt(q)|b+>|w+> + sqrt(1-q)|b->|w->) with probability
/// alpha^2 q + (1-q); the failure branch leaves |b+> on the measured
/// subsystem and the normalized co-state as a residue, with probability
/// (1 - alpha^2) q. In Schmidt mode q = p_s.
pub fn povm_step(
    state: &TripartiteState,
    s: Subsystem,
    alpha: f64,
    basis: MeasurementBasis,
) -> Result<PovmOutcome> {
    check_range("alpha", alpha, 0.0, 1.0)?;
    let alpha = alpha.clamp(0.0, 1.0);

    let view = state.schmidt_decompose(s);
    let (b_plus, b_minus) = match basis {
        MeasurementBasis::Schmidt => (view.plus_vec, view.minus_vec),
        MeasurementBasis::Rotated(theta) => {
            let (sin, cos) = theta.sin_cos();
            let rot = |a: f64, u: &[Complex64; 2], b: f64, v: &[Complex64; 2]| {
                [a * u[0] + b * v[0], a * u[1] + b * v[1]]
            };
            (
                rot(cos, &view.plus_vec, sin, &view.minus_vec),
                rot(-sin, &view.plus_vec, cos, &view.minus_vec),
            )
        }
    };

    let w_plus = state.project_onto(s, &b_plus);
    let w_minus = state.project_onto(s, &b_minus);
    let q: f64 = w_plus.iter().map(|a| a.norm_sqr()).sum();

    let failure_prob = ((1.0 - alpha * alpha) * q).max(0.0);
    let success_prob = (alpha * alpha * q + (1.0 - q)).clamp(0.0, 1.0);

    let mut success_amps = [Complex64::ZERO; 8];
    let plus_part = TripartiteState::embed(s, &b_plus, &w_plus);
    let minus_part = TripartiteState::embed(s, &b_minus, &w_minus);
    for l in 0..8 {
        success_amps[l] = alpha * plus_part[l] + minus_part[l];
    }
    let success_state = TripartiteState::from_unnormalized(success_amps)
        // alpha = 0 on a pure |b+> state: the success branch has zero weight
        // and its state is immaterial; keep the input.
        .unwrap_or_else(|_| state.clone());

    let pair = s.residue_pair();
    let failure_residue = BipartiteState::new(pair, w_plus, failure_prob)
        .unwrap_or_else(|_| BipartiteState::new(pair, unit4(), 0.0).expect("unit residue"));

    Ok(PovmOutcome {
        success_state,
        success_prob,
        failure_residue,
        failure_prob,
        measured_subsystem: s,
        alpha,
    })
}

fn unit4() -> [Complex64; 4] {
    [Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO]
}
