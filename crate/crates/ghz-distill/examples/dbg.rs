use ghz_distill::measures::distances;
use ghz_distill::povm::*;
use ghz_distill::protocols::*;
use ghz_distill::state::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn real_sphere<R: Rng>(rng: &mut R) -> TripartiteState {
    let mut amps = [Complex64::ZERO; 8];
    for a in &mut amps {
        *a = Complex64::new(rng.sample(StandardNormal), 0.0);
    }
    TripartiteState::from_unnormalized(amps).unwrap()
}

fn simplex_phases<R: Rng>(rng: &mut R) -> TripartiteState {
    // weights uniform on the 7-simplex (sorted-uniform gaps), random phases
    let mut cuts: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut amps = [Complex64::ZERO; 8];
    let mut prev = 0.0;
    for i in 0..8 {
        let next = if i < 7 { cuts[i] } else { 1.0 };
        let w: f64 = next - prev;
        prev = next;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        amps[i] = Complex64::from_polar(w.sqrt(), phase);
    }
    TripartiteState::new(amps).unwrap()
}

fn study(name: &str, states: Vec<TripartiteState>) {
    let mut frac2 = 0usize;
    let mut frac4 = 0usize;
    let config = RunConfig::default();
    let mut primary = 0.0;
    let mut total = 0.0;
    let pipe = PipelineConfig::default();
    let n = states.len();
    for state in &states {
        let mut s = state.clone();
        for cycle in 0..4 {
            for sub in Subsystem::all() {
                let p = s.local_probability(sub);
                if p - 0.5 < 1e-12 { continue; }
                s = povm_step(&s, sub, alpha_big_step(p).unwrap(), MeasurementBasis::Schmidt).unwrap().success_state;
            }
            if distances(&s).d_p < 1e-3 {
                if cycle < 2 { frac2 += 1; }
                frac4 += 1;
                break;
            }
        }
        let r = full_pipeline(state, ProtocolKind::BigStep, &pipe).unwrap();
        primary += r.primary_yield;
        total += r.total_yield;
        let _ = config;
    }
    println!(
        "{name}: frac<=2cyc {:.3}  frac<=4cyc {:.3}  primary {:.4}  total(per-state) {:.4}",
        frac2 as f64 / n as f64,
        frac4 as f64 / n as f64,
        primary / n as f64,
        total / n as f64
    );
}

fn main() {
    let n = 1500;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    study("haar          ", (0..n).map(|_| TripartiteState::haar_random(&mut rng)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    study("real-sphere   ", (0..n).map(|_| real_sphere(&mut rng)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    study("simplex+phases", (0..n).map(|_| simplex_phases(&mut rng)).collect());
}
