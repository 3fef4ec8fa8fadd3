//! Seeded Monte Carlo over input ensembles.
//!
//! Every sample draws its input state from an independent RNG stream derived
//! from the master seed and the sample index, so reports are bit-identical
//! across runs and across worker counts. Aggregation is a sequential
//! reduction over the index-ordered per-sample results.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{
    run_with_report, EprCounts, EprMode, PipelineConfig, ProtocolKind, Terminal, YieldReport,
};
use crate::state::TripartiteState;

/// Which protocols an ensemble run covers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolSelect {
    BigStep,
    Infinitesimal,
    Baseline,
    All,
}

impl ProtocolSelect {
    pub fn kinds(self) -> Vec<ProtocolKind> {
        match self {
            ProtocolSelect::BigStep => vec![ProtocolKind::BigStep],
            ProtocolSelect::Infinitesimal => vec![ProtocolKind::Infinitesimal],
            ProtocolSelect::Baseline => vec![ProtocolKind::Baseline],
            ProtocolSelect::All => vec![
                ProtocolKind::BigStep,
                ProtocolKind::Infinitesimal,
                ProtocolKind::Baseline,
            ],
        }
    }
}

/// Input-state distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    /// Uniform on the unit sphere of the 8-dim complex space.
    Haar,
    /// Every sample is the state stored in the given file.
    FromFile(PathBuf),
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Haar
    }
}

/// Full configuration of an ensemble run. Identical configs produce
/// bit-identical reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub seed: u64,
    pub protocol: ProtocolSelect,
    pub epsilon: f64,
    pub d_tol: f64,
    pub max_iters: usize,
    pub max_steps: usize,
    pub epr_mode: EprMode,
    pub distribution: Distribution,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        EnsembleConfig {
            samples: 1000,
            seed: 1,
            protocol: ProtocolSelect::All,
            epsilon: pipeline.run.epsilon,
            d_tol: pipeline.run.d_tol,
            max_iters: pipeline.run.max_iters,
            max_steps: pipeline.run.max_steps,
            epr_mode: pipeline.epr_mode,
            distribution: Distribution::Haar,
        }
    }
}

impl EnsembleConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig::default();
        p.run.epsilon = self.epsilon;
        p.run.d_tol = self.d_tol;
        p.run.max_iters = self.max_iters;
        p.run.max_steps = self.max_steps;
        p.epr_mode = self.epr_mode;
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        self.pipeline().run.validate()
    }

    /// The RNG stream for one sample: same master seed, per-sample stream id.
    pub fn sample_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalCounts {
    pub converged: usize,
    pub triple: usize,
    pub product: usize,
    pub max_steps: usize,
}

impl TerminalCounts {
    fn add(&mut self, t: &Terminal) {
        match t {
            Terminal::Converged { .. } => self.converged += 1,
            Terminal::TripleState => self.triple += 1,
            Terminal::ProductState { .. } => self.product += 1,
            Terminal::MaxSteps => self.max_steps += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.converged + self.triple + self.product + self.max_steps
    }
}

/// Standard errors attached to a protocol summary.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub primary: f64,
    pub total: f64,
}

/// Ensemble-level summary for one protocol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub protocol: ProtocolKind,
    pub samples: usize,
    pub seed: u64,
    /// Mean primary yield over the ensemble.
    pub primary_yield: f64,
    /// Mean expected EPR counts per input system.
    pub epr_counts: EprCounts,
    /// GHZ triplets from the residues. For the primary protocols this is the
    /// mean of the per-state conversions; for the baseline the counts only
    /// combine across states, so it is the conversion of the mean counts.
    pub secondary_ghz: f64,
    pub total_yield: f64,
    pub se: StdErrors,
    /// histogram[k] = number of samples converging within k full cycles;
    /// only primary protocols populate it.
    pub histogram: Vec<usize>,
    pub terminals: TerminalCounts,
}

/// The full report: one summary per requested protocol, in a stable order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    pub protocols: Vec<ProtocolSummary>,
}

impl EnsembleReport {
    pub fn summary(&self, kind: ProtocolKind) -> Option<&ProtocolSummary> {
        self.protocols.iter().find(|p| p.protocol == kind)
    }

    /// Canonical JSON: stable key order (struct declaration order), pretty
    /// printed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// One CSV row per protocol.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "protocol,samples,seed,primary_yield,n12,n23,n31,secondary_ghz,total_yield,se_primary,se_total,converged,triple,product,max_steps\n",
        );
        for p in &self.protocols {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                p.protocol.label(),
                p.samples,
                p.seed,
                p.primary_yield,
                p.epr_counts.n12,
                p.epr_counts.n23,
                p.epr_counts.n31,
                p.secondary_ghz,
                p.total_yield,
                p.se.primary,
                p.se.total,
                p.terminals.converged,
                p.terminals.triple,
                p.terminals.product,
                p.terminals.max_steps,
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
struct SampleOutcome {
    report: YieldReport,
    terminal: Option<Terminal>,
    converged_cycles: Option<usize>,
}

/// Run the configured ensemble. Samples are processed in parallel; the
/// reduction is sequential over sample indices, so the report does not depend
/// on the worker count.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleReport> {
    config.validate()?;
    let pipeline = config.pipeline();

    let file_state = match &config.distribution {
        Distribution::Haar => None,
        Distribution::FromFile(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(TripartiteState::from_json(&text)?)
        }
    };

    let kinds = config.protocol.kinds();
    let results: Vec<Vec<SampleOutcome>> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let state = match &file_state {
                Some(s) => s.clone(),
                None => TripartiteState::haar_random(&mut config.sample_rng(i)),
            };
            kinds
                .iter()
                .map(|&kind| {
                    let (trajectory, report) =
                        run_with_report(&state, kind, &pipeline).expect("validated config");
                    let terminal = trajectory.as_ref().map(|t| t.terminal);
                    let converged_cycles = match terminal {
                        Some(Terminal::Converged { cycles }) => Some(cycles),
                        _ => None,
                    };
                    SampleOutcome {
                        report,
                        terminal,
                        converged_cycles,
                    }
                })
                .collect()
        })
        .collect();

    let mut protocols = Vec::new();
    for (k, &kind) in kinds.iter().enumerate() {
        let per_sample: Vec<&SampleOutcome> = results.iter().map(|r| &r[k]).collect();
        protocols.push(summarize(kind, config, &per_sample));
    }

    Ok(EnsembleReport {
        config: config.clone(),
        protocols,
    })
}

fn summarize(kind: ProtocolKind, config: &EnsembleConfig, outcomes: &[&SampleOutcome]) -> ProtocolSummary {
    let n = outcomes.len();
    let nf = n as f64;

    let mean = |f: &dyn Fn(&SampleOutcome) -> f64| outcomes.iter().map(|o| f(o)).sum::<f64>() / nf;
    let se_of = |f: &dyn Fn(&SampleOutcome) -> f64| {
        if n < 2 {
            return 0.0;
        }
        let m = mean(f);
        let var = outcomes.iter().map(|o| (f(o) - m).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    };

    let primary = mean(&|o| o.report.primary_yield);
    let counts = EprCounts {
        n12: mean(&|o| o.report.epr_counts.n12),
        n23: mean(&|o| o.report.epr_counts.n23),
        n31: mean(&|o| o.report.epr_counts.n31),
    };

    let (secondary, total, se) = match kind {
        ProtocolKind::Baseline => {
            // Counts combine across states; the statistic is nonlinear in the
            // per-sample values, so its SE comes from jackknife resampling.
            let combine = |c: &EprCounts| {
                crate::protocols::combine_eprs(c.n12, c.n23, c.n31).expect("nonnegative counts")
            };
            let secondary = combine(&counts);
            let se_total = jackknife_se(outcomes, |o| {
                (o.report.epr_counts.n12, o.report.epr_counts.n23, o.report.epr_counts.n31)
            });
            (
                secondary,
                secondary,
                StdErrors {
                    primary: 0.0,
                    total: se_total,
                },
            )
        }
        _ => {
            let secondary = mean(&|o| o.report.secondary_ghz);
            let total = mean(&|o| o.report.total_yield);
            (
                secondary,
                total,
                StdErrors {
                    primary: se_of(&|o| o.report.primary_yield),
                    total: se_of(&|o| o.report.total_yield),
                },
            )
        }
    };

    let mut terminals = TerminalCounts::default();
    let mut histogram = Vec::new();
    for o in outcomes {
        if let Some(t) = &o.terminal {
            terminals.add(t);
        }
        if let Some(c) = o.converged_cycles {
            if histogram.len() <= c {
                histogram.resize(c + 1, 0);
            }
            histogram[c] += 1;
        }
    }

    ProtocolSummary {
        protocol: kind,
        samples: n,
        seed: config.seed,
        primary_yield: primary,
        epr_counts: counts,
        secondary_ghz: secondary,
        total_yield: total,
        se,
        histogram,
        terminals,
    }
}

/// Leave-one-out jackknife SE of combine_eprs applied to mean counts.
fn jackknife_se(outcomes: &[&SampleOutcome], counts: impl Fn(&SampleOutcome) -> (f64, f64, f64)) -> f64 {
    let n = outcomes.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mut sum = (0.0, 0.0, 0.0);
    for o in outcomes {
        let c = counts(o);
        sum = (sum.0 + c.0, sum.1 + c.1, sum.2 + c.2);
    }
    let combine = |a: f64, b: f64, c: f64| crate::protocols::combine_eprs(a, b, c).expect("nonnegative");

    let mut loo = Vec::with_capacity(n);
    for o in outcomes {
        let c = counts(o);
        loo.push(combine(
            (sum.0 - c.0) / (nf - 1.0),
            (sum.1 - c.1) / (nf - 1.0),
            (sum.2 - c.2) / (nf - 1.0),
        ));
    }
    let m = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    var.sqrt()
}
