//! Discrete thermodynamic processes: alternating instantaneous quenches
//! (work exchange only) and complete thermalizations (heat exchange only).
//!
//! A protocol starts in the Gibbs state of its initial spectrum. Because a
//! thermalization resets the state regardless of history, the per-quench
//! work variables are independent and the total-work law is their exact
//! discrete convolution.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermo::{InverseTemperature, Spectrum, WorkAtom, WorkDistribution};

/// Default cap on the raw atom count of a single pairwise convolution.
pub const DEFAULT_ATOM_CAP: usize = 1 << 22;

/// One step of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolStep {
    /// Instantaneous change of the spectrum at fixed state; the only step
    /// where work is exchanged.
    Quench(Spectrum),
    /// Complete relaxation to the Gibbs state of the current spectrum; the
    /// only step where heat is exchanged.
    Thermalize,
}

/// A quench/thermalize sequence in canonical order.
///
/// Steps must alternate Quench, Thermalize, Quench, Thermalize, ...; the
/// trailing Thermalize is optional (the final state may be out of
/// equilibrium, the free-energy difference still refers to the final
/// spectrum). Two quenches with no thermalization in between are rejected:
/// the work law would then depend on a non-Gibbs state.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    beta: InverseTemperature,
    initial: Spectrum,
    steps: Vec<ProtocolStep>,
}

/// One Monte Carlo realization of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    /// Total work, the sum of `per_step_works` in order.
    pub work: f64,
    /// Work exchanged at each quench.
    pub per_step_works: Vec<f64>,
}

/// Work law of a single quench `prev` -> `next` acting on the Gibbs state
/// of `prev`: atoms at E_k(prev) − E_k(next) weighted by the populations.
pub fn step_work_distribution(
    prev: &Spectrum,
    next: &Spectrum,
    beta: InverseTemperature,
) -> Result<WorkDistribution> {
    if prev.dim() != next.dim() {
        return Err(Error::InvalidInput(format!(
            "quench changes dimension from {} to {}",
            prev.dim(),
            next.dim()
        )));
    }
    let probs = prev.gibbs_probabilities(beta);
    let atoms = prev
        .levels()
        .iter()
        .zip(next.levels())
        .zip(probs)
        .map(|((&ep, &en), p)| WorkAtom::new(ep - en, p))
        .collect();
    WorkDistribution::from_atoms(atoms)
}

impl Protocol {
    pub fn new(
        beta: InverseTemperature,
        initial: Spectrum,
        steps: Vec<ProtocolStep>,
    ) -> Result<Self> {
        let d = initial.dim();
        for (i, step) in steps.iter().enumerate() {
            match step {
                ProtocolStep::Quench(target) => {
                    if i % 2 != 0 {
                        return Err(Error::InvalidInput(format!(
                            "step {i}: expected \"thermalize\", found a quench \
                             (canonical order is quench, thermalize, quench, ...)"
                        )));
                    }
                    if target.dim() != d {
                        return Err(Error::InvalidInput(format!(
                            "step {i}: quench target has dimension {}, protocol has {d}",
                            target.dim()
                        )));
                    }
                }
                ProtocolStep::Thermalize => {
                    if i % 2 != 1 {
                        return Err(Error::InvalidInput(format!(
                            "step {i}: expected a quench, found \"thermalize\" \
                             (canonical order is quench, thermalize, quench, ...)"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            beta,
            initial,
            steps,
        })
    }

    #[inline]
    pub fn beta(&self) -> InverseTemperature {
        self.beta
    }

    #[inline]
    pub fn initial(&self) -> &Spectrum {
        &self.initial
    }

    #[inline]
    pub fn steps(&self) -> &[ProtocolStep] {
        &self.steps
    }

    pub fn quench_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, ProtocolStep::Quench(_)))
            .count()
    }

    /// Spectrum in force after the last quench (`initial` if there is none).
    pub fn final_spectrum(&self) -> &Spectrum {
        self.steps
            .iter()
            .rev()
            .find_map(|s| match s {
                ProtocolStep::Quench(t) => Some(t),
                ProtocolStep::Thermalize => None,
            })
            .unwrap_or(&self.initial)
    }

    /// The sequence of spectra seen by the quenches: initial, then each
    /// quench target in order.
    fn spectrum_chain(&self) -> Vec<&Spectrum> {
        let mut chain = vec![&self.initial];
        for step in &self.steps {
            if let ProtocolStep::Quench(t) = step {
                chain.push(t);
            }
        }
        chain
    }

    /// ΔF = F(final spectrum) − F(initial spectrum).
    pub fn delta_f(&self) -> f64 {
        self.final_spectrum().free_energy(self.beta) - self.initial.free_energy(self.beta)
    }

    /// Exact total-work distribution with the default atom cap.
    pub fn work_distribution(&self) -> Result<WorkDistribution> {
        self.work_distribution_with_cap(DEFAULT_ATOM_CAP)
    }

    /// Exact total-work distribution.
    ///
    /// Per-quench laws are combined pairwise (balanced, with merging after
    /// every product) so ramps with heavy value collisions stay near the
    /// number of distinct work values instead of d^N. Any single pairwise
    /// product larger than `cap` raw atoms aborts with a hint to sample.
    pub fn work_distribution_with_cap(&self, cap: usize) -> Result<WorkDistribution> {
        let chain = self.spectrum_chain();
        let mut laws = Vec::with_capacity(chain.len().saturating_sub(1));
        for pair in chain.windows(2) {
            laws.push(step_work_distribution(pair[0], pair[1], self.beta)?);
        }
        convolve_balanced(laws, cap)
    }

    /// Draw `n` i.i.d. trajectories. Deterministic for a given `(seed, n)`
    /// within one build of the library.
    pub fn sample_work(&self, n: usize, seed: u64) -> Result<Vec<TrajectorySample>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        let chain = self.spectrum_chain();
        // Per-quench outcome tables: work values and cumulative weights.
        let mut tables = Vec::with_capacity(chain.len().saturating_sub(1));
        for pair in chain.windows(2) {
            let works: Vec<f64> = pair[0]
                .levels()
                .iter()
                .zip(pair[1].levels())
                .map(|(&ep, &en)| ep - en)
                .collect();
            let mut cdf = pair[0].gibbs_probabilities(self.beta);
            for i in 1..cdf.len() {
                cdf[i] += cdf[i - 1];
            }
            tables.push((works, cdf));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut per_step = Vec::with_capacity(tables.len());
            let mut total = 0.0;
            for (works, cdf) in &tables {
                let u: f64 = rng.gen();
                let k = cdf.iter().position(|&c| u < c).unwrap_or(works.len() - 1);
                per_step.push(works[k]);
                total += works[k];
            }
            samples.push(TrajectorySample {
                work: total,
                per_step_works: per_step,
            });
        }
        Ok(samples)
    }

    /// Parse the JSON protocol format:
    /// `{ "beta": number, "initial_levels": [numbers],
    ///    "steps": [ {"quench": [numbers]} | "thermalize", ... ] }`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProtocolFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        file.into_protocol()
    }

    pub fn to_json(&self) -> String {
        let file = ProtocolFile::from_protocol(self);
        serde_json::to_string_pretty(&file).expect("protocol serialization cannot fail")
    }
}

/// Balanced pairwise convolution of independent step laws.
fn convolve_balanced(mut laws: Vec<WorkDistribution>, cap: usize) -> Result<WorkDistribution> {
    if laws.is_empty() {
        return Ok(WorkDistribution::point(0.0));
    }
    while laws.len() > 1 {
        let mut next = Vec::with_capacity(laws.len().div_ceil(2));
        let mut it = laws.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.convolve(&b, cap)?),
                None => next.push(a),
            }
        }
        laws = next;
    }
    Ok(laws.pop().expect("one law left"))
}

#[derive(Serialize, Deserialize)]
struct ProtocolFile {
    beta: f64,
    initial_levels: Vec<f64>,
    steps: Vec<StepSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StepSpec {
    Quench(Vec<f64>),
    Thermalize,
}

impl ProtocolFile {
    fn into_protocol(self) -> Result<Protocol> {
        let beta = InverseTemperature::new(self.beta)
            .map_err(|e| Error::Parse(format!("field \"beta\": {e}")))?;
        let initial = Spectrum::new(self.initial_levels)
            .map_err(|e| Error::Parse(format!("field \"initial_levels\": {e}")))?;
        let steps = self
            .steps
            .into_iter()
            .enumerate()
            .map(|(i, s)| match s {
                StepSpec::Quench(levels) => Spectrum::new(levels)
                    .map(ProtocolStep::Quench)
                    .map_err(|e| Error::Parse(format!("steps[{i}]: {e}"))),
                StepSpec::Thermalize => Ok(ProtocolStep::Thermalize),
            })
            .collect::<Result<Vec<_>>>()?;
        Protocol::new(beta, initial, steps).map_err(|e| Error::Parse(e.to_string()))
    }

    fn from_protocol(p: &Protocol) -> Self {
        Self {
            beta: p.beta.value(),
            initial_levels: p.initial.levels().to_vec(),
            steps: p
                .steps
                .iter()
                .map(|s| match s {
                    ProtocolStep::Quench(t) => StepSpec::Quench(t.levels().to_vec()),
                    ProtocolStep::Thermalize => StepSpec::Thermalize,
                })
                .collect(),
        }
    }
}
