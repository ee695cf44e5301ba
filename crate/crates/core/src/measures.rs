//! Empirical joint state-control measures and the functionals built on them.
//!
//! Population summaries (mass, first moment, mean control) are accumulated in
//! 64.64 fixed point so that adding and removing atoms is exact and the result
//! does not depend on the order of updates. The engine relies on this: a
//! summary maintained incrementally during a sweep is bit-identical to one
//! rebuilt from scratch over the same atoms.

use std::ops::{AddAssign, SubAssign};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::math::WeakStarMetricConfig;

/// Slack on the sub-probability constraint `sum w <= 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// One weighted atom `w * delta_(x, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Atom {
    pub x: f64,
    pub alpha: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(x: f64, alpha: f64, weight: f64) -> Self {
        Atom { x, alpha, weight }
    }
}

const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Fixed-point accumulator with exact addition and subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactSum(i128);

impl ExactSum {
    #[inline]
    pub fn quantize(v: f64) -> Self {
        ExactSum((v * FIXED_SCALE).round() as i128)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }
}

impl AddAssign for ExactSum {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for ExactSum {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

/// Running totals of `sum w`, `sum w x` and `sum w alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SummaryAccumulator {
    mass: ExactSum,
    first_moment: ExactSum,
    theta: ExactSum,
}

impl SummaryAccumulator {
    #[inline]
    pub fn add(&mut self, atom: &Atom) {
        self.mass += ExactSum::quantize(atom.weight);
        self.first_moment += ExactSum::quantize(atom.weight * atom.x);
        self.theta += ExactSum::quantize(atom.weight * atom.alpha);
    }

    #[inline]
    pub fn remove(&mut self, atom: &Atom) {
        self.mass -= ExactSum::quantize(atom.weight);
        self.first_moment -= ExactSum::quantize(atom.weight * atom.x);
        self.theta -= ExactSum::quantize(atom.weight * atom.alpha);
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary {
            mass: self.mass.value(),
            first_moment: self.first_moment.value(),
            theta: self.theta.value(),
        }
    }
}

impl<'a> FromIterator<&'a Atom> for SummaryAccumulator {
    fn from_iter<I: IntoIterator<Item = &'a Atom>>(iter: I) -> Self {
        let mut acc = SummaryAccumulator::default();
        for a in iter {
            acc.add(a);
        }
        acc
    }
}

/// Scalar summaries of a measure: `nu(Omega x A)`, `int x dnu`, `Theta(nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasureSummary {
    pub mass: f64,
    pub first_moment: f64,
    pub theta: f64,
}

/// Read-only view of a population handed to model callbacks: exact summaries
/// plus the underlying atoms for models that need full convolutions.
///
/// Atoms with zero weight are absent agents and contribute nothing.
#[derive(Debug, Clone, Copy)]
pub struct MeasureView<'a> {
    summary: MeasureSummary,
    atoms: &'a [Atom],
}

impl<'a> MeasureView<'a> {
    pub fn new(summary: MeasureSummary, atoms: &'a [Atom]) -> Self {
        MeasureView { summary, atoms }
    }

    /// View with summaries only; `convolve` sees an empty population.
    pub fn summary_only(summary: MeasureSummary) -> MeasureView<'static> {
        MeasureView {
            summary,
            atoms: &[],
        }
    }

    pub fn summary(&self) -> MeasureSummary {
        self.summary
    }

    pub fn mass(&self) -> f64 {
        self.summary.mass
    }

    pub fn first_moment(&self) -> f64 {
        self.summary.first_moment
    }

    pub fn theta(&self) -> f64 {
        self.summary.theta
    }

    pub fn atoms(&self) -> &'a [Atom] {
        self.atoms
    }

    /// `(Q * pi_1 nu)(x) = sum_k w_k Q(x - x_k)`.
    pub fn convolve(&self, kernel: impl Fn(f64) -> f64, x: f64) -> f64 {
        convolve_atoms(self.atoms, kernel, x)
    }
}

fn convolve_atoms(atoms: &[Atom], kernel: impl Fn(f64) -> f64, x: f64) -> f64 {
    atoms
        .iter()
        .filter(|a| a.weight != 0.0)
        .map(|a| a.weight * kernel(x - a.x))
        .sum()
}

/// Sub-probability measure on `Omega x A` made of weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalJointMeasure {
    atoms: Vec<Atom>,
    domain: Interval,
    controls: Interval,
    summary: MeasureSummary,
}

impl EmpiricalJointMeasure {
    pub fn new(atoms: Vec<Atom>, domain: Interval, controls: Interval) -> Result<Self> {
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight >= 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "atom {i} has invalid weight {}",
                    a.weight
                )));
            }
            if !domain.contains(a.x) {
                return Err(Error::InvalidInput(format!(
                    "atom {i} position {} outside {domain}",
                    a.x
                )));
            }
            if !controls.contains(a.alpha) {
                return Err(Error::InvalidInput(format!(
                    "atom {i} control {} outside {controls}",
                    a.alpha
                )));
            }
            total += a.weight;
        }
        if total > 1.0 + MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("total mass {total} exceeds 1")));
        }
        let summary = atoms.iter().collect::<SummaryAccumulator>().summary();
        Ok(EmpiricalJointMeasure {
            atoms,
            domain,
            controls,
            summary,
        })
    }

    pub fn empty(domain: Interval, controls: Interval) -> Self {
        EmpiricalJointMeasure {
            atoms: Vec::new(),
            domain,
            controls,
            summary: MeasureSummary::default(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn controls(&self) -> Interval {
        self.controls
    }

    pub fn view(&self) -> MeasureView<'_> {
        MeasureView::new(self.summary, &self.atoms)
    }

    pub fn summary(&self) -> MeasureSummary {
        self.summary
    }

    /// `Theta(nu) = int alpha dnu`, not renormalized by the mass.
    pub fn theta(&self) -> f64 {
        self.summary.theta
    }

    pub fn total_mass(&self) -> f64 {
        self.summary.mass
    }

    /// `int x dnu`, not renormalized by the mass.
    pub fn first_moment(&self) -> f64 {
        self.summary.first_moment
    }

    pub fn center_of_mass(&self) -> Result<f64> {
        if self.summary.mass <= 0.0 {
            return Err(Error::EmptyPopulation);
        }
        Ok(self.summary.first_moment / self.summary.mass)
    }

    pub fn convolve(&self, kernel: impl Fn(f64) -> f64, x: f64) -> f64 {
        convolve_atoms(&self.atoms, kernel, x)
    }

    /// Pushes the `(x, alpha)` coordinates of every atom through the metric's
    /// monomial basis.
    pub fn moments(&self, cfg: &WeakStarMetricConfig) -> Vec<f64> {
        let mut out = vec![0.0; cfg.max_terms()];
        for a in &self.atoms {
            cfg.accumulate(&mut out, &[a.x, a.alpha], a.weight);
        }
        out
    }
}

/// Truncated weak-* distance between two joint measures.
pub fn weak_star_distance(
    nu1: &EmpiricalJointMeasure,
    nu2: &EmpiricalJointMeasure,
    cfg: &WeakStarMetricConfig,
) -> f64 {
    cfg.distance_from_moments(&nu1.moments(cfg), &nu2.moments(cfg))
}

/// `int (L(t, ., .; nu1) - L(t, ., .; nu2)) d(nu1 - nu2)`.
///
/// A Lagrangian is monotone in the measure argument when this is
/// non-negative for every pair.
pub fn monotonicity_check<L>(
    lagrangian: L,
    nu1: &EmpiricalJointMeasure,
    nu2: &EmpiricalJointMeasure,
    t: f64,
) -> f64
where
    L: Fn(f64, f64, f64, &MeasureView<'_>) -> f64,
{
    let v1 = nu1.view();
    let v2 = nu2.view();
    let diff = |a: &Atom| lagrangian(t, a.x, a.alpha, &v1) - lagrangian(t, a.x, a.alpha, &v2);
    let plus: f64 = nu1.atoms.iter().map(|a| a.weight * diff(a)).sum();
    let minus: f64 = nu2.atoms.iter().map(|a| a.weight * diff(a)).sum();
    plus - minus
}

/// `max_k |alpha_k - best_response(t, x_k)|` over the atoms of `mu`.
pub fn fixed_point_residual<F>(mu: &EmpiricalJointMeasure, best_response: F, t: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    mu.atoms
        .iter()
        .filter(|a| a.weight > 0.0)
        .map(|a| (a.alpha - best_response(t, a.x)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn ctrl() -> Interval {
        Interval::new(-0.2, 0.2).unwrap()
    }

    fn measure(atoms: &[(f64, f64, f64)]) -> EmpiricalJointMeasure {
        EmpiricalJointMeasure::new(
            atoms.iter().map(|&(x, a, w)| Atom::new(x, a, w)).collect(),
            unit(),
            ctrl(),
        )
        .unwrap()
    }

    #[test]
    fn theta_examples() {
        assert!(measure(&[(0.5, 0.1, 0.5), (0.7, -0.1, 0.5)]).theta().abs() < 1e-18);
        assert!((measure(&[(0.3, 0.2, 1.0)]).theta() - 0.2).abs() < 1e-18);
        assert!((measure(&[(0.1, 0.2, 0.25), (0.9, 0.1, 0.25)]).theta() - 0.075).abs() < 1e-16);
        assert_eq!(EmpiricalJointMeasure::empty(unit(), ctrl()).theta(), 0.0);
    }

    #[test]
    fn mass_and_moments() {
        let m = measure(&[(0.5, 0.0, 0.5), (1.0, 0.0, 0.5)]);
        assert_eq!(m.total_mass(), 1.0);
        assert!((m.first_moment() - 0.75).abs() < 1e-18);
        assert!((m.center_of_mass().unwrap() - 0.75).abs() < 1e-15);

        let exited = measure(&[(0.5, 0.0, 0.5)]);
        assert_eq!(exited.total_mass(), 0.5);

        let single = measure(&[(0.3, 0.0, 0.2)]);
        assert!((single.first_moment() - 0.06).abs() < 1e-17);
        assert!((single.center_of_mass().unwrap() - 0.3).abs() < 1e-15);

        assert!(matches!(
            EmpiricalJointMeasure::empty(unit(), ctrl()).center_of_mass(),
            Err(Error::EmptyPopulation)
        ));
    }

    #[test]
    fn convolution_examples() {
        let m = measure(&[(0.5, 0.0, 0.6), (0.2, 0.1, 0.3)]);
        assert!((m.convolve(|_| 1.0, 0.4) - m.total_mass()).abs() < 1e-15);
        assert_eq!(m.convolve(|_| 0.0, 0.4), 0.0);
        let single = measure(&[(0.5, 0.0, 1.0)]);
        assert!((single.convolve(|z| z * z, 0.7) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_measures() {
        let bad_mass = EmpiricalJointMeasure::new(
            vec![Atom::new(0.2, 0.0, 0.7), Atom::new(0.4, 0.0, 0.7)],
            unit(),
            ctrl(),
        );
        assert!(bad_mass.is_err());
        assert!(
            EmpiricalJointMeasure::new(vec![Atom::new(1.2, 0.0, 0.1)], unit(), ctrl()).is_err()
        );
        assert!(
            EmpiricalJointMeasure::new(vec![Atom::new(0.2, 0.3, 0.1)], unit(), ctrl()).is_err()
        );
        assert!(
            EmpiricalJointMeasure::new(vec![Atom::new(0.2, 0.0, -0.1)], unit(), ctrl()).is_err()
        );
    }

    #[test]
    fn monotonicity_of_alignment_cost() {
        let m1 = 0.4;
        let lag = |_t: f64, _x: f64, a: f64, v: &MeasureView<'_>| m1 * a * v.theta();
        let nu1 = measure(&[(0.3, 0.2, 0.3), (0.6, -0.1, 0.4)]);
        let nu2 = measure(&[(0.5, 0.05, 0.5), (0.9, 0.15, 0.2)]);
        let value = monotonicity_check(lag, &nu1, &nu2, 0.0);
        let expected = m1 * (nu1.theta() - nu2.theta()).powi(2);
        assert!((value - expected).abs() < 1e-15);
        assert_eq!(monotonicity_check(lag, &nu1, &nu1, 0.0), 0.0);
        let independent = |_t: f64, x: f64, a: f64, _v: &MeasureView<'_>| x + a * a;
        assert_eq!(monotonicity_check(independent, &nu1, &nu2, 0.0), 0.0);
    }

    #[test]
    fn fixed_point_residual_examples() {
        let m = measure(&[(0.4, 0.1, 1.0)]);
        assert!((fixed_point_residual(&m, |_, _| -0.1, 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(fixed_point_residual(&m, |_, _| 0.1, 0.0), 0.0);
    }

    #[test]
    fn incremental_summary_is_order_independent() {
        let atoms: Vec<Atom> = (0..50)
            .map(|i| {
                Atom::new(
                    (i as f64 * 0.37) % 1.0,
                    ((i * 7) % 11) as f64 * 0.04 - 0.2,
                    0.02,
                )
            })
            .collect();
        let fresh = atoms.iter().collect::<SummaryAccumulator>();
        let mut inc = SummaryAccumulator::default();
        for a in atoms.iter().rev() {
            inc.add(a);
        }
        inc.add(&Atom::new(0.123, 0.2, 0.01));
        inc.remove(&Atom::new(0.123, 0.2, 0.01));
        assert_eq!(fresh, inc);
    }
}
