//! Statistical-mechanics primitives for finite-level systems.
//!
//! Everything works in units where k_B = 1, so the inverse temperature
//! β = 1/T carries the whole temperature dependence and energies are in
//! arbitrary (but consistent) units. Partition sums are evaluated relative
//! to the lowest level so that βE up to ~700 stays finite.

use crate::error::{Error, Result};

/// Relative tolerance used when merging work atoms. Per-step work values
/// are exact floating-point differences, so only ulp-level representation
/// noise has to be absorbed.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Probability mass further than this from 1 is treated as a logic error
/// rather than rounding.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Neumaier compensated sum; keeps mass checks meaningful for
/// distributions with millions of atoms.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Inverse temperature β = 1/(k_B T), strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )));
        }
        Ok(Self(beta))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Energy levels of a diagonal Hamiltonian at one instant.
///
/// Index k always refers to the same eigenstate across a process; a quench
/// moves the levels without touching the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    levels: Vec<f64>,
}

impl Spectrum {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("spectrum needs at least one level".into()));
        }
        if let Some(bad) = levels.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite energy level {bad}")));
        }
        Ok(Self { levels })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// All levels shifted by a constant. Gibbs populations are invariant
    /// under this; free energy shifts by the same constant.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Spectrum::new(self.levels.iter().map(|e| e + c).collect())
    }

    fn min_level(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ln Z, evaluated relative to the lowest level.
    pub fn log_partition_function(&self, beta: InverseTemperature) -> f64 {
        let b = beta.value();
        let e0 = self.min_level();
        let s: f64 = self.levels.iter().map(|e| (-b * (e - e0)).exp()).sum();
        -b * e0 + s.ln()
    }

    /// Z = Σ_k e^{−βE_k}. May overflow to infinity for extreme negative
    /// levels; use [`log_partition_function`](Self::log_partition_function)
    /// when only ratios or logs are needed.
    pub fn partition_function(&self, beta: InverseTemperature) -> f64 {
        self.log_partition_function(beta).exp()
    }

    /// Helmholtz free energy F = −(1/β) ln Z.
    pub fn free_energy(&self, beta: InverseTemperature) -> f64 {
        -self.log_partition_function(beta) / beta.value()
    }

    /// Gibbs populations p_k = e^{−βE_k}/Z.
    pub fn gibbs_probabilities(&self, beta: InverseTemperature) -> Vec<f64> {
        let b = beta.value();
        let e0 = self.min_level();
        let weights: Vec<f64> = self.levels.iter().map(|e| (-b * (e - e0)).exp()).collect();
        let z: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / z).collect()
    }
}

/// One outcome of the total-work random variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkAtom {
    pub work: f64,
    pub probability: f64,
}

impl WorkAtom {
    pub fn new(work: f64, probability: f64) -> Self {
        Self { work, probability }
    }
}

/// Exact law of the total extracted work: a finite list of atoms sorted by
/// work value, strictly increasing after merging, with total mass one.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    atoms: Vec<WorkAtom>,
}

impl WorkDistribution {
    /// Merge raw atoms into a normalized distribution.
    ///
    /// Atoms closer than the merge tolerance (relative to the largest |w|)
    /// are collapsed by summing their probabilities. The total mass must
    /// already be 1 up to [`MASS_TOLERANCE`]; anything worse is reported as
    /// an upstream bug rather than silently rescaled.
    pub fn from_atoms(raw: Vec<WorkAtom>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidInput("empty atom list".into()));
        }
        for a in &raw {
            if !a.work.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite work value {}", a.work)));
            }
            if !a.probability.is_finite() || a.probability <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "atom weight must be positive and finite, got {}",
                    a.probability
                )));
            }
        }

        let mut atoms = raw;
        atoms.sort_by(|a, b| a.work.total_cmp(&b.work));

        let max_abs = atoms
            .iter()
            .map(|a| a.work.abs())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        let tol = MERGE_TOLERANCE * max_abs;

        // Cluster anchored at the first atom of each run so near-collisions
        // cannot chain across the whole axis.
        let mut merged: Vec<WorkAtom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if a.work - last.work <= tol => last.probability += a.probability,
                _ => merged.push(a),
            }
        }

        let mass = compensated_sum(merged.iter().map(|a| a.probability));
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Normalization(format!(
                "total mass {mass} deviates from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        for a in &mut merged {
            a.probability /= mass;
        }
        Ok(Self { atoms: merged })
    }

    /// The deterministic distribution δ(W − w).
    pub fn point(work: f64) -> Self {
        Self {
            atoms: vec![WorkAtom::new(work, 1.0)],
        }
    }

    #[inline]
    pub fn atoms(&self) -> &[WorkAtom] {
        &self.atoms
    }

    pub fn support_min(&self) -> f64 {
        self.atoms.first().expect("non-empty").work
    }

    pub fn support_max(&self) -> f64 {
        self.atoms.last().expect("non-empty").work
    }

    /// ⟨W⟩.
    pub fn mean(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.probability * a.work))
    }

    /// Var(W).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        compensated_sum(
            self.atoms
                .iter()
                .map(|a| a.probability * (a.work - m) * (a.work - m)),
        )
    }

    /// Tail probability P(W ≥ Λ) with a closed lower endpoint; the
    /// comparison is exact on the merged atom values.
    pub fn tail(&self, lambda: f64) -> f64 {
        compensated_sum(
            self.atoms
                .iter()
                .filter(|a| a.work >= lambda)
                .map(|a| a.probability),
        )
    }

    /// ⟨e^{βW}⟩, the quantity constrained by the Jarzynski identity.
    pub fn exp_beta_average(&self, beta: InverseTemperature) -> f64 {
        let b = beta.value();
        compensated_sum(self.atoms.iter().map(|a| a.probability * (b * a.work).exp()))
    }

    /// |⟨e^{βW}⟩ e^{βΔF} − 1|, evaluated per atom in log space so an
    /// individual e^{βW} cannot overflow even when the balanced product
    /// stays near one.
    pub fn jarzynski_residual(&self, beta: InverseTemperature, delta_f: f64) -> f64 {
        let b = beta.value();
        let total = compensated_sum(
            self.atoms
                .iter()
                .map(|a| (a.probability.ln() + b * (a.work + delta_f)).exp()),
        );
        (total - 1.0).abs()
    }

    /// Distribution of W + c (e.g. a deterministic work credit added to
    /// every outcome).
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::from_atoms(
            self.atoms
                .iter()
                .map(|a| WorkAtom::new(a.work + c, a.probability))
                .collect(),
        )
    }

    /// Law of the sum of two independent work variables.
    ///
    /// The raw product is rejected if it would exceed `cap` atoms before
    /// merging; large protocols should fall back to Monte Carlo sampling.
    pub fn convolve(&self, other: &Self, cap: usize) -> Result<Self> {
        let n = self.atoms.len().checked_mul(other.atoms.len());
        match n {
            Some(n) if n <= cap => {}
            _ => {
                return Err(Error::AtomBudget(format!(
                    "convolution needs {} x {} atoms (cap {})",
                    self.atoms.len(),
                    other.atoms.len(),
                    cap
                )))
            }
        }
        let mut raw = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for a in &self.atoms {
            for b in &other.atoms {
                raw.push(WorkAtom::new(a.work + b.work, a.probability * b.probability));
            }
        }
        Self::from_atoms(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta(b: f64) -> InverseTemperature {
        InverseTemperature::new(b).unwrap()
    }

    fn spectrum(levels: &[f64]) -> Spectrum {
        Spectrum::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn partition_function_single_level() {
        assert_eq!(spectrum(&[0.0]).partition_function(beta(1.0)), 1.0);
    }

    #[test]
    fn partition_function_two_levels() {
        let z = spectrum(&[0.0, 1.0]).partition_function(beta(1.0));
        let expected = 1.0 + (-1.0_f64).exp();
        assert!((z - expected).abs() < 1e-14, "z = {z}");
    }

    #[test]
    fn partition_function_degenerate_pair() {
        let z = spectrum(&[0.0, 0.0]).partition_function(beta(2.0));
        assert!((z - 2.0).abs() < 1e-14);
    }

    #[test]
    fn partition_function_large_beta_energy_does_not_overflow() {
        // βE ~ 700 overflows a naive Σ e^{−βE} when levels are negative.
        let s = spectrum(&[-700.0, -699.0]);
        let lz = s.log_partition_function(beta(1.0));
        let expected = 700.0 + (1.0 + (-1.0_f64).exp()).ln();
        assert!((lz - expected).abs() < 1e-10, "log Z = {lz}");
    }

    #[test]
    fn free_energy_values() {
        assert_eq!(spectrum(&[0.0]).free_energy(beta(3.7)), 0.0);
        let f = spectrum(&[0.0, 0.0]).free_energy(beta(1.0));
        assert!((f + std::f64::consts::LN_2).abs() < 1e-14);
        let f = spectrum(&[0.0, 1.0]).free_energy(beta(1.0));
        let expected = -(1.0 + (-1.0_f64).exp()).ln();
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn gibbs_probabilities_values() {
        let p = spectrum(&[0.0, 0.0]).gibbs_probabilities(beta(1.0));
        assert_eq!(p, vec![0.5, 0.5]);

        let p = spectrum(&[0.0, 1.0]).gibbs_probabilities(beta(1.0));
        let p0 = 1.0 / (1.0 + (-1.0_f64).exp());
        assert!((p[0] - p0).abs() < 1e-12);
        assert!((p[1] - (1.0 - p0)).abs() < 1e-12);
        assert!((compensated_sum(p.iter().copied()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_must_be_positive() {
        assert!(InverseTemperature::new(0.0).is_err());
        assert!(InverseTemperature::new(-1.0).is_err());
        assert!(InverseTemperature::new(f64::NAN).is_err());
        assert!(InverseTemperature::new(f64::INFINITY).is_err());
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
        assert!(Spectrum::new(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn gibbs_shift_invariance() {
        let s = spectrum(&[0.3, -1.2, 4.0]);
        let shifted = s.shifted(17.5).unwrap();
        let b = beta(0.7);
        for (a, c) in s.gibbs_probabilities(b).iter().zip(shifted.gibbs_probabilities(b)) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn free_energy_shift_property() {
        let s = spectrum(&[0.3, -1.2, 4.0]);
        let b = beta(2.1);
        let f = s.free_energy(b);
        let g = s.shifted(-3.25).unwrap().free_energy(b);
        assert!((g - (f - 3.25)).abs() < 1e-10);
    }

    #[test]
    fn tail_boundary_inclusion() {
        let d = WorkDistribution::point(1.0);
        assert_eq!(d.tail(1.0), 1.0);
        assert_eq!(d.tail(1.0 + 1e-9), 0.0);
    }

    #[test]
    fn symmetric_two_point_stats() {
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(-1.0, 0.5),
            WorkAtom::new(1.0, 0.5),
        ])
        .unwrap();
        assert_eq!(d.tail(0.0), 0.5);
        assert!(d.mean().abs() < 1e-15);
        assert!((d.variance() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_of_synthesis_example() {
        let ln2 = std::f64::consts::LN_2;
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(ln2, 1.0 / 3.0),
            WorkAtom::new(-ln2, 2.0 / 3.0),
        ])
        .unwrap();
        assert!((d.tail(0.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exp_beta_average_values() {
        let b = beta(1.0);
        assert_eq!(WorkDistribution::point(0.0).exp_beta_average(b), 1.0);

        // Single quench [0,1] -> [0,2]: ⟨e^{βW}⟩ must be Z_fin/Z_in.
        let p0 = 1.0 / (1.0 + (-1.0_f64).exp());
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(0.0, p0),
            WorkAtom::new(-1.0, 1.0 - p0),
        ])
        .unwrap();
        let z_ratio = spectrum(&[0.0, 2.0]).partition_function(b)
            / spectrum(&[0.0, 1.0]).partition_function(b);
        assert!((d.exp_beta_average(b) - z_ratio).abs() < 1e-12);

        // Jarzynski with ΔF = 0.
        let ln2 = std::f64::consts::LN_2;
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(ln2, 1.0 / 3.0),
            WorkAtom::new(-ln2, 2.0 / 3.0),
        ])
        .unwrap();
        assert!((d.exp_beta_average(b) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn merge_collapses_duplicates() {
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(0.0, 0.5),
            WorkAtom::new(0.0, 0.5),
        ])
        .unwrap();
        assert_eq!(d.atoms().len(), 1);
        assert_eq!(d.atoms()[0].work, 0.0);
        assert_eq!(d.atoms()[0].probability, 1.0);
    }

    #[test]
    fn merge_within_tolerance() {
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(1.0, 0.3),
            WorkAtom::new(1.0 + 1e-15, 0.7),
        ])
        .unwrap();
        assert_eq!(d.atoms().len(), 1);
        assert_eq!(d.atoms()[0].work, 1.0);
        assert!((d.atoms()[0].probability - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_deficit_is_an_error() {
        let err = WorkDistribution::from_atoms(vec![WorkAtom::new(0.0, 0.4)]).unwrap_err();
        assert!(matches!(err, Error::Normalization(_)));
    }

    #[test]
    fn nonpositive_weights_rejected() {
        assert!(WorkDistribution::from_atoms(vec![WorkAtom::new(0.0, 0.0)]).is_err());
        assert!(WorkDistribution::from_atoms(vec![
            WorkAtom::new(0.0, 1.2),
            WorkAtom::new(1.0, -0.2)
        ])
        .is_err());
    }

    #[test]
    fn convolution_respects_cap() {
        let d = WorkDistribution::from_atoms(vec![
            WorkAtom::new(0.0, 0.5),
            WorkAtom::new(1.0, 0.5),
        ])
        .unwrap();
        assert!(matches!(d.convolve(&d, 3), Err(Error::AtomBudget(_))));
        let c = d.convolve(&d, 4).unwrap();
        assert_eq!(c.atoms().len(), 3);
        assert!((c.tail(1.0) - 0.75).abs() < 1e-15);
    }
}
