//! Three-qubit (and residual two-qubit) pure states.
//!
//! A [`TripartiteState`] is a normalized vector of 8 complex amplitudes in the
//! computational basis, with qubit 1 as the most significant bit, so the
//! amplitude order is |000>, |001>, ..., |111>. All operations are pure: they
//! take `&self` and return fresh values, so states can be shared freely across
//! threads. Random sampling takes an explicit RNG; there is no global state.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for algebraic identities (norms, traces, orthogonality).
pub const TOL_ALGEBRAIC: f64 = 1e-12;
/// Tolerance for decomposition round-trips.
pub const TOL_DECOMP: f64 = 1e-10;
/// Largest norm deviation the state reader repairs by renormalizing.
pub const TOL_INPUT_NORM: f64 = 1e-6;

/// One of the three qubits, indexed 1, 2, 3 (party labels, not bit offsets).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subsystem(u8);

impl Subsystem {
    pub const ONE: Subsystem = Subsystem(1);
    pub const TWO: Subsystem = Subsystem(2);
    pub const THREE: Subsystem = Subsystem(3);

    pub fn new(index: u8) -> Result<Self> {
        match index {
            1..=3 => Ok(Subsystem(index)),
            other => Err(Error::InvalidSubsystem(other)),
        }
    }

    pub fn all() -> [Subsystem; 3] {
        [Self::ONE, Self::TWO, Self::THREE]
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Bit position inside a basis label; qubit 1 is the most significant bit.
    fn bit(self) -> usize {
        3 - self.0 as usize
    }

    /// The other two subsystems, in ascending order.
    pub fn others(self) -> (Subsystem, Subsystem) {
        match self.0 {
            1 => (Self::TWO, Self::THREE),
            2 => (Self::ONE, Self::THREE),
            _ => (Self::ONE, Self::TWO),
        }
    }

    /// The pair left behind when this subsystem is measured out.
    pub fn residue_pair(self) -> Pair {
        match self.0 {
            1 => Pair::P23,
            2 => Pair::P13,
            _ => Pair::P12,
        }
    }
}

impl std::fmt::Display for Subsystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An unordered pair of subsystems carrying a bipartite residue.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pair {
    #[serde(rename = "12")]
    P12,
    #[serde(rename = "13")]
    P13,
    #[serde(rename = "23")]
    P23,
}

impl Pair {
    pub fn all() -> [Pair; 3] {
        [Pair::P12, Pair::P13, Pair::P23]
    }

    pub fn label(self) -> &'static str {
        match self {
            Pair::P12 => "12",
            Pair::P13 => "13",
            Pair::P23 => "23",
        }
    }

    /// The two members, ascending.
    pub fn members(self) -> (Subsystem, Subsystem) {
        match self {
            Pair::P12 => (Subsystem::ONE, Subsystem::TWO),
            Pair::P13 => (Subsystem::ONE, Subsystem::THREE),
            Pair::P23 => (Subsystem::TWO, Subsystem::THREE),
        }
    }

    /// The subsystem not in the pair.
    pub fn complement(self) -> Subsystem {
        match self {
            Pair::P12 => Subsystem::THREE,
            Pair::P13 => Subsystem::TWO,
            Pair::P23 => Subsystem::ONE,
        }
    }

    pub fn contains(self, s: Subsystem) -> bool {
        self.complement() != s
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A normalized pure state of three qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct TripartiteState {
    amps: [Complex64; 8],
}

impl TripartiteState {
    /// Build from amplitudes. The norm must be within [`TOL_INPUT_NORM`] of 1;
    /// any smaller deviation is repaired by exact renormalization.
    pub fn new(amps: [Complex64; 8]) -> Result<Self> {
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let dev = (n2 - 1.0).abs();
        if dev > TOL_INPUT_NORM {
            return Err(Error::NotNormalized {
                deviation: dev,
                tolerance: TOL_INPUT_NORM,
            });
        }
        Ok(Self::renormalized(amps, n2))
    }

    /// Build from any nonzero vector by normalizing it.
    pub fn from_unnormalized(amps: [Complex64; 8]) -> Result<Self> {
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n2 < 1e-24 {
            return Err(Error::MalformedState("zero state vector".into()));
        }
        Ok(Self::renormalized(amps, n2))
    }

    fn renormalized(mut amps: [Complex64; 8], norm_sqr: f64) -> Self {
        let inv = 1.0 / norm_sqr.sqrt();
        for a in &mut amps {
            *a *= inv;
        }
        TripartiteState { amps }
    }

    /// The computational basis state with the given label (0..8).
    pub fn basis(label: usize) -> Self {
        assert!(label < 8, "basis label out of range");
        let mut amps = [Complex64::ZERO; 8];
        amps[label] = Complex64::ONE;
        TripartiteState { amps }
    }

    /// The maximally entangled state sqrt(1/2)(|000> - |111>).
    pub fn ghz() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = [Complex64::ZERO; 8];
        amps[0] = Complex64::new(r, 0.0);
        amps[7] = Complex64::new(-r, 0.0);
        TripartiteState { amps }
    }

    /// Uniform (Haar) sample on the unit sphere of the 8-dimensional complex
    /// space: i.i.d. complex Gaussian components, normalized. Deterministic
    /// for a given RNG state.
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let mut amps = [Complex64::ZERO; 8];
            for a in &mut amps {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *a = Complex64::new(re, im);
            }
            let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if n2 > 1e-12 {
                return Self::renormalized(amps, n2);
            }
        }
    }

    pub fn amps(&self) -> &[Complex64; 8] {
        &self.amps
    }

    pub fn amp(&self, label: usize) -> Complex64 {
        self.amps[label]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Tr_{jk}(|psi><psi|): the 2x2 reduced density matrix of one qubit.
    /// Hermitian with unit trace by construction.
    pub fn reduced_density(&self, s: Subsystem) -> [[Complex64; 2]; 2] {
        let bit = s.bit();
        let mut rho = [[Complex64::ZERO; 2]; 2];
        for l in 0..8usize {
            let sl = (l >> bit) & 1;
            // Partner label with the subsystem bit flipped.
            let fl = l ^ (1 << bit);
            rho[sl][sl] += self.amps[l] * self.amps[l].conj();
            if sl == 0 {
                rho[0][1] += self.amps[l] * self.amps[fl].conj();
            }
        }
        rho[1][0] = rho[0][1].conj();
        rho
    }

    /// The larger eigenvalue p of the reduced density matrix, in [1/2, 1].
    pub fn local_probability(&self, s: Subsystem) -> f64 {
        let rho = self.reduced_density(s);
        let a = rho[0][0].re;
        let d = rho[1][1].re;
        let half_gap = 0.5 * (a - d);
        let split = (half_gap * half_gap + rho[0][1].norm_sqr()).sqrt();
        (0.5 * (a + d) + split).clamp(0.5, 1.0)
    }

    /// Inner product <local| applied to one subsystem, leaving a 4-dim
    /// co-vector on the other two (ascending order of the remaining qubits).
    pub fn project_onto(&self, s: Subsystem, local: &[Complex64; 2]) -> [Complex64; 4] {
        let bit = s.bit();
        let (j, k) = s.others();
        let (jb, kb) = (j.bit(), k.bit());
        let mut out = [Complex64::ZERO; 4];
        for l in 0..8usize {
            let sl = (l >> bit) & 1;
            let m = ((l >> jb) & 1) * 2 + ((l >> kb) & 1);
            out[m] += local[sl].conj() * self.amps[l];
        }
        out
    }

    /// Embed a local vector on subsystem `s` against a co-vector on the other
    /// two subsystems: |local>_s (x) |co>_{jk}, reordered to the global basis.
    pub fn embed(s: Subsystem, local: &[Complex64; 2], co: &[Complex64; 4]) -> [Complex64; 8] {
        let bit = s.bit();
        let (j, k) = s.others();
        let (jb, kb) = (j.bit(), k.bit());
        let mut out = [Complex64::ZERO; 8];
        for l in 0..8usize {
            let sl = (l >> bit) & 1;
            let m = ((l >> jb) & 1) * 2 + ((l >> kb) & 1);
            out[l] = local[sl] * co[m];
        }
        out
    }

    /// Schmidt decomposition of the state with respect to subsystem `s`
    /// against the composite of the other two.
    pub fn schmidt_decompose(&self, s: Subsystem) -> SchmidtView {
        let rho = self.reduced_density(s);
        let (p, plus_vec, minus_vec) = eig2_hermitian(&rho);

        let wp = self.project_onto(s, &plus_vec);
        let wm = self.project_onto(s, &minus_vec);
        let phi_plus = normalize4_or(wp, 0);
        // For p ~ 1 the minus co-vector vanishes; fall back to a deterministic
        // unit vector orthogonal to phi_plus so the view stays well-formed.
        let wm_norm: f64 = wm.iter().map(|a| a.norm_sqr()).sum();
        let phi_minus = if wm_norm > 1e-24 {
            normalize4_or(wm, 1)
        } else {
            orthogonal_unit4(&phi_plus)
        };

        SchmidtView {
            subsystem: s,
            p,
            plus_vec,
            minus_vec,
            phi_plus,
            phi_minus,
        }
    }

    /// Some(i) if the state is a product across i|jk: p_i > 1 - tol.
    /// Reports the smallest such index.
    pub fn is_product(&self, tol: f64) -> Option<Subsystem> {
        Subsystem::all()
            .into_iter()
            .find(|&s| self.local_probability(s) > 1.0 - tol)
    }

    /// Apply a 2x2 unitary to one subsystem. The matrix must be unitary
    /// within 1e-10. Local invariants (all p_i) are unchanged.
    pub fn apply_local_unitary(&self, s: Subsystem, u: &[[Complex64; 2]; 2]) -> Result<Self> {
        check_unitary2(u, 1e-10)?;
        let bit = s.bit();
        let mut amps = self.amps;
        for l in 0..8usize {
            if (l >> bit) & 1 == 0 {
                let fl = l | (1 << bit);
                let a0 = self.amps[l];
                let a1 = self.amps[fl];
                amps[l] = u[0][0] * a0 + u[0][1] * a1;
                amps[fl] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(TripartiteState { amps })
    }

    /// min over a global phase of the Euclidean distance to `other`. The
    /// minimizing phase aligns the overlap; the difference is then computed
    /// componentwise, which keeps full precision for nearly equal states.
    pub fn distance_up_to_phase(&self, other: &TripartiteState) -> f64 {
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| b.conj() * a)
            .sum();
        let n = overlap.norm();
        let phase = if n > 1e-300 { overlap / n } else { Complex64::ONE };
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Serialize as the canonical file format: a JSON array of 8 [re, im]
    /// pairs in basis order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serialization cannot fail")
    }

    /// Parse the canonical file format. Renormalizes when the norm deviates
    /// by less than [`TOL_INPUT_NORM`], errors otherwise.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Serialize for TripartiteState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TripartiteState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        if pairs.len() != 8 {
            return Err(D::Error::custom(format!(
                "expected 8 amplitude pairs, got {}",
                pairs.len()
            )));
        }
        let mut amps = [Complex64::ZERO; 8];
        for (a, p) in amps.iter_mut().zip(&pairs) {
            *a = Complex64::new(p[0], p[1]);
        }
        TripartiteState::new(amps).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Schmidt decomposition of a tripartite state with respect to one subsystem:
/// |psi> = sqrt(p) |+>|phi+> + sqrt(1-p) |->|phi->, with p >= 1/2.
#[derive(Clone, Debug)]
pub struct SchmidtView {
    pub subsystem: Subsystem,
    /// Larger Schmidt weight, in [1/2, 1].
    pub p: f64,
    /// Local eigenvector for weight p.
    pub plus_vec: [Complex64; 2],
    /// Local eigenvector for weight 1-p.
    pub minus_vec: [Complex64; 2],
    /// Co-state on the other two subsystems for the plus branch.
    pub phi_plus: [Complex64; 4],
    /// Co-state for the minus branch.
    pub phi_minus: [Complex64; 4],
}

impl SchmidtView {
    /// Rebuild sqrt(p)|+>|phi+> + sqrt(1-p)|->|phi->; equals the source state
    /// (not merely up to phase, since the co-states carry the projections).
    pub fn reconstruct(&self) -> TripartiteState {
        let sp = self.p.sqrt();
        let sm = (1.0 - self.p).max(0.0).sqrt();
        let plus = TripartiteState::embed(self.subsystem, &self.plus_vec, &self.phi_plus);
        let minus = TripartiteState::embed(self.subsystem, &self.minus_vec, &self.phi_minus);
        let mut amps = [Complex64::ZERO; 8];
        for l in 0..8 {
            amps[l] = sp * plus[l] + sm * minus[l];
        }
        TripartiteState::from_unnormalized(amps).expect("reconstruction is near-normalized")
    }
}

/// A two-qubit residue tagged with the pair it lives on and the probability
/// mass it carries within an ensemble. The amplitudes are normalized; the
/// weight is bookkeeping carried separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BipartiteState {
    pair: Pair,
    amps: [Complex64; 4],
    weight: f64,
}

impl BipartiteState {
    pub fn new(pair: Pair, amps: [Complex64; 4], weight: f64) -> Result<Self> {
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if n2 < 1e-24 {
            return Err(Error::MalformedState("zero residue vector".into()));
        }
        let inv = 1.0 / n2.sqrt();
        let mut amps = amps;
        for a in &mut amps {
            *a *= inv;
        }
        Ok(BipartiteState { pair, amps, weight })
    }

    /// The maximally entangled pair (|00> + |11>)/sqrt(2).
    pub fn epr(pair: Pair, weight: f64) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [
            Complex64::new(r, 0.0),
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::new(r, 0.0),
        ];
        BipartiteState { pair, amps, weight }
    }

    pub fn pair(&self) -> Pair {
        self.pair
    }

    pub fn amps(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BipartiteState {
            weight: self.weight * factor,
            ..self.clone()
        }
    }

    /// Reduced density matrix of the first member of the pair.
    pub fn reduced_first(&self) -> [[Complex64; 2]; 2] {
        let mut rho = [[Complex64::ZERO; 2]; 2];
        for x in 0..2usize {
            for y in 0..2usize {
                let mut e = Complex64::ZERO;
                for c in 0..2usize {
                    e += self.amps[x * 2 + c] * self.amps[y * 2 + c].conj();
                }
                rho[x][y] = e;
            }
        }
        rho
    }

    /// Larger Schmidt weight (squared coefficient) of the pair, in [1/2, 1].
    pub fn schmidt_weight(&self) -> f64 {
        let rho = self.reduced_first();
        let a = rho[0][0].re;
        let d = rho[1][1].re;
        let half_gap = 0.5 * (a - d);
        let split = (half_gap * half_gap + rho[0][1].norm_sqr()).sqrt();
        (0.5 * (a + d) + split).clamp(0.5, 1.0)
    }
}

/// Eigen-decompose a 2x2 Hermitian matrix with unit trace. Returns the larger
/// eigenvalue and both eigenvectors with a deterministic phase and tie-break
/// convention, so repeated runs see identical bases even at degeneracies.
fn eig2_hermitian(rho: &[[Complex64; 2]; 2]) -> (f64, [Complex64; 2], [Complex64; 2]) {
    let a = rho[0][0].re;
    let d = rho[1][1].re;
    let b = rho[0][1];
    let half_gap = 0.5 * (a - d);
    let split = (half_gap * half_gap + b.norm_sqr()).sqrt();
    let mean = 0.5 * (a + d);
    let p = (mean + split).clamp(0.5, 1.0);

    // Degenerate spectrum: fix the computational basis.
    if split < 1e-14 {
        let e0 = [Complex64::ONE, Complex64::ZERO];
        let e1 = [Complex64::ZERO, Complex64::ONE];
        return (p, e0, e1);
    }

    // Pick the better-conditioned eigenvector expression.
    let plus = if half_gap >= 0.0 {
        // (p - d, conj(b)) with p - d = split + |half_gap|
        [Complex64::new(split + half_gap, 0.0), b.conj()]
    } else {
        // (b, p - a)
        [b, Complex64::new(split - half_gap, 0.0)]
    };
    let plus = phase_fix2(normalize2(plus));
    let minus = phase_fix2([-plus[1].conj(), plus[0].conj()]);
    (p, plus, minus)
}

fn normalize2(v: [Complex64; 2]) -> [Complex64; 2] {
    let inv = 1.0 / (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] * inv, v[1] * inv]
}

/// Rotate a global phase so the largest-magnitude component is real positive
/// (first component wins ties).
fn phase_fix2(v: [Complex64; 2]) -> [Complex64; 2] {
    let k = if v[1].norm_sqr() > v[0].norm_sqr() { 1 } else { 0 };
    let z = v[k];
    let n = z.norm();
    if n < 1e-300 {
        return v;
    }
    let rot = z.conj() / n;
    [v[0] * rot, v[1] * rot]
}

fn normalize4_or(v: [Complex64; 4], fallback: usize) -> [Complex64; 4] {
    let n2: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    if n2 < 1e-24 {
        let mut out = [Complex64::ZERO; 4];
        out[fallback] = Complex64::ONE;
        return out;
    }
    let inv = 1.0 / n2.sqrt();
    let mut out = v;
    for a in &mut out {
        *a *= inv;
    }
    out
}

/// A deterministic unit vector orthogonal to `v` (Gram-Schmidt against the
/// first standard basis vector that leaves enough residual).
fn orthogonal_unit4(v: &[Complex64; 4]) -> [Complex64; 4] {
    for k in 0..4 {
        let mut cand = [Complex64::ZERO; 4];
        cand[k] = Complex64::ONE;
        let overlap: Complex64 = v.iter().zip(cand.iter()).map(|(a, b)| a.conj() * b).sum();
        for (c, vi) in cand.iter_mut().zip(v.iter()) {
            *c -= overlap * vi;
        }
        let n2: f64 = cand.iter().map(|a| a.norm_sqr()).sum();
        if n2 > 0.25 {
            let inv = 1.0 / n2.sqrt();
            for c in &mut cand {
                *c *= inv;
            }
            return cand;
        }
    }
    unreachable!("a 4-dim vector always has an orthogonal complement");
}

/// Check U*U = I for a 2x2 matrix within `tol`.
pub fn check_unitary2(u: &[[Complex64; 2]; 2], tol: f64) -> Result<()> {
    let mut dev: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut e = Complex64::ZERO;
            for k in 0..2 {
                e += u[k][i].conj() * u[k][j];
            }
            let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
            dev = dev.max((e - target).norm());
        }
    }
    if dev > tol {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Brute-force partial trace through the full 8x8 density matrix,
    /// independent of the direct bookkeeping in `reduced_density`.
    fn reduced_density_oracle(state: &TripartiteState, s: Subsystem) -> [[Complex64; 2]; 2] {
        let mut full = [[Complex64::ZERO; 8]; 8];
        for r in 0..8 {
            for cidx in 0..8 {
                full[r][cidx] = state.amp(r) * state.amp(cidx).conj();
            }
        }
        let bit = 3 - s.index() as usize;
        let mut rho = [[Complex64::ZERO; 2]; 2];
        for r in 0..8 {
            for cidx in 0..8 {
                // Keep entries whose traced-out bits agree.
                if r & !(1 << bit) == cidx & !(1 << bit) {
                    rho[(r >> bit) & 1][(cidx >> bit) & 1] += full[r][cidx];
                }
            }
        }
        rho
    }

    fn random_unitary2<R: Rng>(rng: &mut R) -> [[Complex64; 2]; 2] {
        // QR-style: orthonormalize two random Gaussian columns.
        let g = |rng: &mut R| c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let v0 = normalize2([g(rng), g(rng)]);
        let v1 = phase_fix2([-v0[1].conj(), v0[0].conj()]);
        [[v0[0], v1[0]], [v0[1], v1[1]]]
    }

    #[test]
    fn ghz_reduced_density_is_maximally_mixed() {
        let ghz = TripartiteState::ghz();
        for s in Subsystem::all() {
            let rho = ghz.reduced_density(s);
            assert!((rho[0][0].re - 0.5).abs() < TOL_ALGEBRAIC);
            assert!((rho[1][1].re - 0.5).abs() < TOL_ALGEBRAIC);
            assert!(rho[0][1].norm() < TOL_ALGEBRAIC);
            assert!((ghz.local_probability(s) - 0.5).abs() < TOL_ALGEBRAIC);
        }
    }

    #[test]
    fn product_state_reduced_density() {
        let zero = TripartiteState::basis(0);
        let rho = zero.reduced_density(Subsystem::TWO);
        assert!((rho[0][0].re - 1.0).abs() < TOL_ALGEBRAIC);
        assert!(rho[1][1].norm() < TOL_ALGEBRAIC);
        assert!((zero.local_probability(Subsystem::TWO) - 1.0).abs() < TOL_ALGEBRAIC);
    }

    #[test]
    fn reduced_density_matches_full_density_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let state = TripartiteState::haar_random(&mut rng);
            for s in Subsystem::all() {
                let fast = state.reduced_density(s);
                let slow = reduced_density_oracle(&state, s);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((fast[i][j] - slow[i][j]).norm() < TOL_ALGEBRAIC);
                    }
                }
                let trace = fast[0][0].re + fast[1][1].re;
                assert!((trace - 1.0).abs() < TOL_ALGEBRAIC);
            }
        }
    }

    #[test]
    fn schmidt_of_product_state() {
        let zero = TripartiteState::basis(0);
        let view = zero.schmidt_decompose(Subsystem::ONE);
        assert!((view.p - 1.0).abs() < TOL_ALGEBRAIC);
        assert!((view.plus_vec[0] - Complex64::ONE).norm() < TOL_ALGEBRAIC);
        assert!((view.phi_plus[0] - Complex64::ONE).norm() < TOL_ALGEBRAIC);
        assert!(zero.distance_up_to_phase(&view.reconstruct()) < TOL_DECOMP);
    }

    #[test]
    fn schmidt_of_ghz_reconstructs() {
        let ghz = TripartiteState::ghz();
        for s in Subsystem::all() {
            let view = ghz.schmidt_decompose(s);
            assert!((view.p - 0.5).abs() < TOL_ALGEBRAIC);
            assert!(ghz.distance_up_to_phase(&view.reconstruct()) < TOL_DECOMP);
        }
    }

    #[test]
    fn schmidt_roundtrip_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let state = TripartiteState::haar_random(&mut rng);
            let s = Subsystem::new(rng.random_range(1..=3)).unwrap();
            let view = state.schmidt_decompose(s);
            assert!(state.distance_up_to_phase(&view.reconstruct()) < TOL_DECOMP);
            // Local vectors and co-states are orthonormal.
            let lo: Complex64 = view
                .plus_vec
                .iter()
                .zip(view.minus_vec.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let co: Complex64 = view
                .phi_plus
                .iter()
                .zip(view.phi_minus.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!(lo.norm() < TOL_ALGEBRAIC);
            assert!(co.norm() < TOL_ALGEBRAIC);
            assert!(view.p >= 0.5 && view.p <= 1.0);
        }
    }

    #[test]
    fn haar_is_deterministic_per_seed() {
        let a = TripartiteState::haar_random(&mut ChaCha8Rng::seed_from_u64(5));
        let b = TripartiteState::haar_random(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.amps(), b.amps());
        assert!((a.norm_sqr() - 1.0).abs() < TOL_ALGEBRAIC);
    }

    #[test]
    fn haar_mean_local_probability_matches_independent_sampler() {
        // Independent oracle: Box-Muller Gaussians from raw uniforms, rather
        // than the rand_distr ziggurat used by the implementation.
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut box_muller = ChaCha8Rng::seed_from_u64(29);
        let mut gauss = move |rng: &mut ChaCha8Rng| {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };

        let mut sum_impl = 0.0;
        let mut sum_oracle = 0.0;
        for _ in 0..n {
            sum_impl += TripartiteState::haar_random(&mut rng).local_probability(Subsystem::ONE);

            let mut amps = [Complex64::ZERO; 8];
            for a in &mut amps {
                *a = c(gauss(&mut box_muller), gauss(&mut box_muller));
            }
            let state = TripartiteState::from_unnormalized(amps).unwrap();
            sum_oracle += state.local_probability(Subsystem::ONE);
        }
        let mean_impl = sum_impl / n as f64;
        let mean_oracle = sum_oracle / n as f64;

        // Std of p1 is below 0.1, so 3 sigma of the difference of two means
        // is under 0.0014.
        assert!(
            (mean_impl - mean_oracle).abs() < 1.4e-3,
            "means differ: {mean_impl} vs {mean_oracle}"
        );
        // Exact moment for a Haar 2x4 bipartition: E[p] = 99/128.
        let expected = 99.0 / 128.0;
        assert!(
            (mean_impl - expected).abs() < 1.0e-3,
            "mean {mean_impl} vs analytic {expected}"
        );
    }

    #[test]
    fn is_product_detects_all_placements() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        assert_eq!(TripartiteState::basis(0).is_product(1e-9), Some(Subsystem::ONE));
        assert_eq!(TripartiteState::ghz().is_product(1e-9), None);

        // |0>_1 (x) EPR_23
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = [Complex64::ZERO; 8];
        amps[0b000] = c(r, 0.0);
        amps[0b011] = c(r, 0.0);
        let state = TripartiteState::new(amps).unwrap();
        assert_eq!(state.is_product(1e-9), Some(Subsystem::ONE));

        // Random single-qubit factor against a random pair factor, all three
        // placements.
        for s in Subsystem::all() {
            for _ in 0..50 {
                let chi = normalize2([
                    c(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                    c(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                ]);
                let mut zeta = [Complex64::ZERO; 4];
                for z in &mut zeta {
                    *z = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
                }
                let amps = TripartiteState::embed(s, &chi, &zeta);
                let state = TripartiteState::from_unnormalized(amps).unwrap();
                assert_eq!(state.is_product(1e-9), Some(s), "split at {s}");
            }
        }
    }

    #[test]
    fn local_unitary_preserves_local_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let id = [[Complex64::ONE, Complex64::ZERO], [Complex64::ZERO, Complex64::ONE]];
        let flip = [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]];

        let zero = TripartiteState::basis(0);
        assert_eq!(zero.apply_local_unitary(Subsystem::ONE, &id).unwrap(), zero);
        let flipped = zero.apply_local_unitary(Subsystem::ONE, &flip).unwrap();
        assert!((flipped.amp(0b100) - Complex64::ONE).norm() < TOL_ALGEBRAIC);

        for _ in 0..1000 {
            let state = TripartiteState::haar_random(&mut rng);
            let s = Subsystem::new(rng.random_range(1..=3)).unwrap();
            let u = random_unitary2(&mut rng);
            let rotated = state.apply_local_unitary(s, &u).unwrap();
            assert!((rotated.norm_sqr() - 1.0).abs() < TOL_ALGEBRAIC);
            for t in Subsystem::all() {
                let before = state.local_probability(t);
                let after = rotated.local_probability(t);
                assert!((before - after).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_unitary_matrix_is_rejected() {
        let bad = [[c(1.0, 0.0), c(0.1, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let err = TripartiteState::ghz().apply_local_unitary(Subsystem::ONE, &bad);
        assert!(matches!(err, Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn subsystem_index_validation() {
        assert!(Subsystem::new(0).is_err());
        assert!(Subsystem::new(4).is_err());
        assert_eq!(Subsystem::new(2).unwrap(), Subsystem::TWO);
    }

    #[test]
    fn json_roundtrip_and_renormalization() {
        let ghz = TripartiteState::ghz();
        let parsed = TripartiteState::from_json(&ghz.to_json()).unwrap();
        assert!(ghz.distance_up_to_phase(&parsed) < TOL_ALGEBRAIC);

        // Slightly denormalized input is repaired...
        let near = "[[0.70710678,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[-0.70710678,0]]";
        let state = TripartiteState::from_json(near).unwrap();
        assert!((state.norm_sqr() - 1.0).abs() < TOL_ALGEBRAIC);

        // ...badly denormalized input is rejected.
        let bad = "[[0.7,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[-0.7,0]]";
        assert!(TripartiteState::from_json(bad).is_err());

        let short = "[[1,0],[0,0]]";
        assert!(TripartiteState::from_json(short).is_err());
    }

    #[test]
    fn bipartite_schmidt_weight() {
        let epr = BipartiteState::epr(Pair::P23, 1.0);
        assert!((epr.schmidt_weight() - 0.5).abs() < TOL_ALGEBRAIC);

        let amps = [c(0.8f64.sqrt(), 0.0), Complex64::ZERO, Complex64::ZERO, c(0.2f64.sqrt(), 0.0)];
        let skew = BipartiteState::new(Pair::P12, amps, 1.0).unwrap();
        assert!((skew.schmidt_weight() - 0.8).abs() < TOL_ALGEBRAIC);
    }
}
