//! Tail bounds on the work-extraction probability and the protocols that
//! saturate them.
//!
//! For any process obeying the Jarzynski identity with a work floor W_min,
//! the probability of extracting at least Λ is bounded by
//!
//! ```text
//! P(W ≥ Λ) ≤ (e^{−βΔF} − e^{βW_min}) / (e^{βΛ} − e^{βW_min})
//! ```
//!
//! (for Λ ≤ −ΔF the bound is trivially 1, and W_min → −∞ gives
//! e^{−β(Λ+ΔF)}). The unique saturating work law is two-point: mass p at Λ
//! and 1−p at W_min. This module evaluates the bound, builds that target
//! law, and synthesizes concrete quench/thermalize protocols reaching it:
//! a quasi-static ramp to a pivot spectrum, one finite quench, and a
//! quasi-static ramp to the final spectrum.

use crate::error::{Error, Result};
use crate::process::{step_work_distribution, Protocol, ProtocolStep};
use crate::thermo::{InverseTemperature, Spectrum, WorkAtom, WorkDistribution};

/// A ramp step whose β·Σ|ΔE| exceeds this is too coarse to count as
/// quasi-static.
pub const RAMP_WEIGHT_WARN: f64 = 0.1;

/// Default number of ramp steps per quasi-static segment.
pub const DEFAULT_RAMP_STEPS: usize = 1000;

/// Absolute slack allowed between a caller-supplied ΔF and the one implied
/// by the endpoint spectra.
const DELTA_F_SLACK: f64 = 1e-9;

/// A work-extraction query: threshold Λ, failure floor W_min (may be −∞),
/// free-energy difference ΔF of the process endpoints, and β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    lambda: f64,
    w_min: f64,
    delta_f: f64,
    beta: InverseTemperature,
}

impl BoundQuery {
    /// `w_min` may be `f64::NEG_INFINITY` for the unconstrained case.
    pub fn new(lambda: f64, w_min: f64, delta_f: f64, beta: InverseTemperature) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("threshold must be finite, got {lambda}")));
        }
        if !delta_f.is_finite() {
            return Err(Error::InvalidInput(format!("delta_f must be finite, got {delta_f}")));
        }
        if w_min.is_nan() || w_min == f64::INFINITY {
            return Err(Error::InvalidInput(format!(
                "work floor must be finite or -inf, got {w_min}"
            )));
        }
        if w_min > lambda {
            return Err(Error::Infeasible(format!(
                "work floor {w_min} exceeds the threshold {lambda}"
            )));
        }
        if w_min > -delta_f {
            return Err(Error::Infeasible(format!(
                "work floor {w_min} exceeds the second-law limit {}",
                -delta_f
            )));
        }
        Ok(Self { lambda, w_min, delta_f, beta })
    }

    /// Query with no failure floor (W_min = −∞).
    pub fn unconstrained(lambda: f64, delta_f: f64, beta: InverseTemperature) -> Result<Self> {
        Self::new(lambda, f64::NEG_INFINITY, delta_f, beta)
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    #[inline]
    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    #[inline]
    pub fn beta(&self) -> InverseTemperature {
        self.beta
    }
}

/// Closed-form success probability for Λ > −ΔF > W_min, written with
/// `expm1` so nothing overflows and W_min = −∞ falls out as the
/// unconstrained bound e^{−β(Λ+ΔF)}.
fn two_point_probability(lambda: f64, w_min: f64, delta_f: f64, beta: f64) -> f64 {
    let scale = (-beta * (lambda + delta_f)).exp();
    let num = (beta * (w_min + delta_f)).exp_m1();
    let den = (beta * (w_min - lambda)).exp_m1();
    scale * num / den
}

/// Maximum probability of extracting work at or above Λ.
///
/// Returns 1 when Λ ≤ −ΔF (a quasi-static process already succeeds with
/// certainty); otherwise the two-point bound for the query's floor.
pub fn bound_with_wmin(q: &BoundQuery) -> f64 {
    if q.lambda <= -q.delta_f {
        return 1.0;
    }
    two_point_probability(q.lambda, q.w_min, q.delta_f, q.beta.value())
}

/// The unique work law saturating the bound: atoms at W_min and Λ.
///
/// At the boundary Λ = −ΔF the law degenerates to a single atom at −ΔF.
pub fn optimal_two_point(q: &BoundQuery) -> Result<WorkDistribution> {
    if q.lambda == -q.delta_f {
        return Ok(WorkDistribution::point(-q.delta_f));
    }
    if q.lambda < -q.delta_f {
        return Err(Error::Infeasible(format!(
            "threshold {} is below the second-law limit {}; any reversible \
             process already succeeds with certainty",
            q.lambda, -q.delta_f
        )));
    }
    if !q.w_min.is_finite() {
        return Err(Error::Infeasible(
            "a two-point law needs a finite work floor".into(),
        ));
    }
    if q.w_min >= -q.delta_f {
        return Err(Error::Infeasible(format!(
            "work floor {} must lie strictly below the second-law limit {}",
            q.w_min, -q.delta_f
        )));
    }
    let p = two_point_probability(q.lambda, q.w_min, q.delta_f, q.beta.value());
    WorkDistribution::from_atoms(vec![
        WorkAtom::new(q.w_min, 1.0 - p),
        WorkAtom::new(q.lambda, p),
    ])
}

/// How a synthesized quasi-static segment is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Ramps are replaced by deterministic free-energy work credits, the
    /// exact infinite-step limit. Saturation holds to machine precision.
    Ideal,
    /// Ramps are kept as finite N-step protocols; the work law carries the
    /// physical O(1/√N) smearing.
    Discretized,
}

/// Parameters of a synthesized optimal protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisPlan {
    /// Pivot level reached by the opening ramp.
    pub e_a: f64,
    /// Level the single finite quench jumps to; always above `e_a`.
    pub e_b: f64,
    /// Probability of the Λ outcome.
    pub p_success: f64,
    /// Work extracted on success (= Λ).
    pub w_max: f64,
    /// Work extracted on failure.
    pub w_min: f64,
    /// Ramp steps per quasi-static segment.
    pub ramp_steps: usize,
    pub mode: SynthesisMode,
}

/// A quasi-static segment: N quench+thermalize pairs linearly
/// interpolating every level.
#[derive(Debug, Clone)]
pub struct Ramp {
    pub steps: Vec<ProtocolStep>,
    /// β·Σ_k|ΔE_k| of a single step; the quasi-static approximation wants
    /// this well below one.
    pub step_weight: f64,
}

impl Ramp {
    pub fn is_coarse(&self) -> bool {
        self.step_weight > RAMP_WEIGHT_WARN
    }
}

/// Linear N-step interpolation between two spectra of equal dimension.
pub fn quasi_static_ramp(
    from: &Spectrum,
    to: &Spectrum,
    n: usize,
    beta: InverseTemperature,
) -> Result<Ramp> {
    if from.dim() != to.dim() {
        return Err(Error::InvalidInput(format!(
            "ramp endpoints have dimensions {} and {}",
            from.dim(),
            to.dim()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("ramp needs at least one step".into()));
    }
    let travel: f64 = from
        .levels()
        .iter()
        .zip(to.levels())
        .map(|(&a, &b)| (b - a).abs())
        .sum();
    let step_weight = beta.value() * travel / n as f64;

    let mut steps = Vec::with_capacity(2 * n);
    for i in 1..=n {
        let target = if i == n {
            to.clone()
        } else {
            let t = i as f64 / n as f64;
            Spectrum::new(
                from.levels()
                    .iter()
                    .zip(to.levels())
                    .map(|(&a, &b)| a + t * (b - a))
                    .collect(),
            )?
        };
        steps.push(ProtocolStep::Quench(target));
        steps.push(ProtocolStep::Thermalize);
    }
    Ok(Ramp { steps, step_weight })
}

/// Result of protocol synthesis.
#[derive(Debug, Clone)]
pub enum Synthesis {
    /// Λ = −ΔF: the plain quasi-static ramp start -> final extracts −ΔF
    /// deterministically and succeeds with probability 1.
    QuasiStatic(QuasiStaticSynthesis),
    /// Λ > −ΔF > W_min: ramp to a pivot, one finite quench, ramp to the
    /// final spectrum.
    Optimal(OptimalSynthesis),
}

impl Synthesis {
    pub fn protocol(&self) -> &Protocol {
        match self {
            Synthesis::QuasiStatic(s) => &s.protocol,
            Synthesis::Optimal(s) => &s.protocol,
        }
    }

    pub fn plan(&self) -> Option<&SynthesisPlan> {
        match self {
            Synthesis::QuasiStatic(_) => None,
            Synthesis::Optimal(s) => Some(&s.plan),
        }
    }

    pub fn distribution(&self) -> Result<WorkDistribution> {
        match self {
            Synthesis::QuasiStatic(s) => s.distribution(),
            Synthesis::Optimal(s) => s.distribution(),
        }
    }

    pub fn is_coarse(&self) -> bool {
        match self {
            Synthesis::QuasiStatic(s) => s.step_weight > RAMP_WEIGHT_WARN,
            Synthesis::Optimal(s) => s.step_weight > RAMP_WEIGHT_WARN,
        }
    }
}

/// Boundary route: a single quasi-static segment.
#[derive(Debug, Clone)]
pub struct QuasiStaticSynthesis {
    pub protocol: Protocol,
    /// Deterministic work in the ideal limit, −ΔF.
    pub work: f64,
    pub mode: SynthesisMode,
    step_weight: f64,
}

impl QuasiStaticSynthesis {
    pub fn distribution(&self) -> Result<WorkDistribution> {
        match self.mode {
            SynthesisMode::Ideal => Ok(WorkDistribution::point(self.work)),
            SynthesisMode::Discretized => self.protocol.work_distribution(),
        }
    }
}

/// Three-stage optimal protocol with its evaluation context.
#[derive(Debug, Clone)]
pub struct OptimalSynthesis {
    pub plan: SynthesisPlan,
    pub protocol: Protocol,
    beta: InverseTemperature,
    initial: Spectrum,
    pivot_a: Spectrum,
    pivot_b: Spectrum,
    final_spec: Spectrum,
    step_weight: f64,
}

impl OptimalSynthesis {
    /// Exact work law of the plan in its mode.
    ///
    /// Ideal mode convolves the finite quench with the deterministic
    /// free-energy credits of the two ramps, checks that this physical
    /// route reproduces (W_min, Λ), and emits the atoms at those target
    /// values. Discretized mode is the exact law of the emitted protocol.
    pub fn distribution(&self) -> Result<WorkDistribution> {
        self.distribution_with_cap(crate::process::DEFAULT_ATOM_CAP)
    }

    pub fn distribution_with_cap(&self, cap: usize) -> Result<WorkDistribution> {
        match self.plan.mode {
            SynthesisMode::Ideal => self.ideal_distribution(),
            SynthesisMode::Discretized => self.protocol.work_distribution_with_cap(cap),
        }
    }

    fn ideal_distribution(&self) -> Result<WorkDistribution> {
        let credit_a = self.initial.free_energy(self.beta) - self.pivot_a.free_energy(self.beta);
        let credit_c = self.pivot_b.free_energy(self.beta) - self.final_spec.free_energy(self.beta);
        let quench = step_work_distribution(&self.pivot_a, &self.pivot_b, self.beta)?;
        let raw = quench.shifted(credit_a + credit_c)?;

        if raw.atoms().len() != 2 {
            return Err(Error::Infeasible(format!(
                "quench outcomes collapsed to {} atom(s); the query is too \
                 close to the degenerate boundary",
                raw.atoms().len()
            )));
        }
        let scale = self.plan.w_max.abs().max(self.plan.w_min.abs()).max(1.0);
        let (bot, top) = (raw.atoms()[0], raw.atoms()[1]);
        if (top.work - self.plan.w_max).abs() > 1e-9 * scale
            || (bot.work - self.plan.w_min).abs() > 1e-9 * scale
        {
            return Err(Error::Normalization(format!(
                "pivot inversion is inconsistent: credits place the outcomes at \
                 ({}, {}) instead of ({}, {})",
                bot.work, top.work, self.plan.w_min, self.plan.w_max
            )));
        }
        // The credit route reproduced the targets; pin the atoms to them so
        // closed-endpoint tails at Λ are exact.
        WorkDistribution::from_atoms(vec![
            WorkAtom::new(self.plan.w_min, bot.probability),
            WorkAtom::new(self.plan.w_max, top.probability),
        ])
    }
}

/// Optimal protocol for a two-level system in the gauge where the ground
/// level stays at zero; `e_in` and `e_fin` are the excited-level endpoints.
pub fn synth_two_level(
    e_in: f64,
    e_fin: f64,
    q: &BoundQuery,
    ramp_steps: usize,
    mode: SynthesisMode,
) -> Result<Synthesis> {
    let initial = Spectrum::new(vec![0.0, e_in])?;
    let final_spec = Spectrum::new(vec![0.0, e_fin])?;
    synth_d_level(&initial, &final_spec, 1, q, ramp_steps, mode)
}

/// Optimal protocol for a d-level system: every level except `m` ramps
/// directly to its final value, level `m` detours through the pivots
/// E_a -> E_b that encode (Λ, W_min).
pub fn synth_d_level(
    initial: &Spectrum,
    final_spec: &Spectrum,
    m: usize,
    q: &BoundQuery,
    ramp_steps: usize,
    mode: SynthesisMode,
) -> Result<Synthesis> {
    if initial.dim() != final_spec.dim() {
        return Err(Error::InvalidInput(format!(
            "initial and final spectra have dimensions {} and {}",
            initial.dim(),
            final_spec.dim()
        )));
    }
    if initial.dim() < 2 {
        return Err(Error::InvalidInput(
            "synthesis needs at least two levels".into(),
        ));
    }
    if m >= initial.dim() {
        return Err(Error::InvalidInput(format!(
            "level index {m} out of range for dimension {}",
            initial.dim()
        )));
    }
    let beta = q.beta();
    let b = beta.value();
    let delta_f = final_spec.free_energy(beta) - initial.free_energy(beta);
    if (q.delta_f() - delta_f).abs() > DELTA_F_SLACK * delta_f.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "query delta_f {} does not match the spectra ({})",
            q.delta_f(),
            delta_f
        )));
    }

    if q.lambda() == -delta_f {
        let ramp = quasi_static_ramp(initial, final_spec, ramp_steps, beta)?;
        let protocol = Protocol::new(beta, initial.clone(), ramp.steps)?;
        return Ok(Synthesis::QuasiStatic(QuasiStaticSynthesis {
            protocol,
            work: -delta_f,
            mode,
            step_weight: ramp.step_weight,
        }));
    }

    // Feasibility is read off the signs of the closed-form right-hand
    // sides rather than re-validated ranges.
    let num_a = (b * (q.lambda() + delta_f)).exp_m1();
    let den_a = -(b * (q.w_min() + delta_f)).exp_m1();
    if num_a <= 0.0 {
        return Err(Error::Infeasible(format!(
            "threshold {} does not exceed the second-law limit {}",
            q.lambda(),
            -delta_f
        )));
    }
    if !(den_a > 0.0) {
        return Err(Error::Infeasible(format!(
            "work floor {} does not lie strictly below the second-law limit {}",
            q.w_min(),
            -delta_f
        )));
    }
    if !q.w_min().is_finite() {
        return Err(Error::Infeasible(
            "synthesis needs a finite work floor".into(),
        ));
    }
    let num_b = -(-b * (q.lambda() + delta_f)).exp_m1();
    let den_b = (-b * (q.w_min() + delta_f)).exp_m1();

    // e^{−βE_a} = S (e^{−βΔF} − e^{βΛ}) / (e^{βW_min} − e^{−βΔF}) and the
    // matching expression for E_b, with S = Σ_{k≠m} e^{−βE_k(final)}.
    let ln_s = log_sum_exp_excluding(final_spec.levels(), m, b);
    let e_a = -(ln_s + (num_a / den_a).ln()) / b;
    let e_b = -(ln_s + (num_b / den_b).ln()) / b;
    if !(e_b > e_a) {
        return Err(Error::Infeasible(format!(
            "pivot inversion produced a non-increasing quench {e_a} -> {e_b}"
        )));
    }

    let pivot_a = replace_level(final_spec, m, e_a)?;
    let pivot_b = replace_level(final_spec, m, e_b)?;
    let p_success = 1.0 - pivot_a.gibbs_probabilities(beta)[m];

    let ramp_in = quasi_static_ramp(initial, &pivot_a, ramp_steps, beta)?;
    let ramp_out = quasi_static_ramp(&pivot_b, final_spec, ramp_steps, beta)?;
    let mut steps = ramp_in.steps;
    steps.push(ProtocolStep::Quench(pivot_b.clone()));
    steps.push(ProtocolStep::Thermalize);
    steps.extend(ramp_out.steps);
    let protocol = Protocol::new(beta, initial.clone(), steps)?;

    let plan = SynthesisPlan {
        e_a,
        e_b,
        p_success,
        w_max: q.lambda(),
        w_min: q.w_min(),
        ramp_steps,
        mode,
    };
    Ok(Synthesis::Optimal(OptimalSynthesis {
        plan,
        protocol,
        beta,
        initial: initial.clone(),
        pivot_a,
        pivot_b,
        final_spec: final_spec.clone(),
        step_weight: ramp_in.step_weight.max(ramp_out.step_weight),
    }))
}

fn replace_level(s: &Spectrum, m: usize, value: f64) -> Result<Spectrum> {
    let mut levels = s.levels().to_vec();
    levels[m] = value;
    Spectrum::new(levels)
}

/// ln Σ_{k≠m} e^{−β E_k}.
fn log_sum_exp_excluding(levels: &[f64], m: usize, beta: f64) -> f64 {
    let min = levels
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != m)
        .map(|(_, &e)| e)
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = levels
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != m)
        .map(|(_, &e)| (-beta * (e - min)).exp())
        .sum();
    -beta * min + sum.ln()
}
