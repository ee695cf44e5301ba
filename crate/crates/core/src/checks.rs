//! Randomized checks of structural assumptions: monotonicity of a Lagrangian
//! in the measure argument and the admissibility gates of a model.

use rand::Rng;

use crate::controls::{validate_parameters, ControlParams, ParameterReport};
use crate::interval::Interval;
use crate::measures::{monotonicity_check, Atom, EmpiricalJointMeasure, MeasureView};
use crate::rng::{self, Purpose};
use crate::Result;

/// Values below `-MONOTONICITY_TOLERANCE` count as violations.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-12;

/// How the second measure of each random pair is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Independent atoms and weights.
    General,
    /// The same atoms as the first measure with weights scaled by factors in
    /// `[0, 1]`, so `nu2 <= nu1`.
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub pairs: usize,
    pub min_value: f64,
    pub violations: usize,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_measure<R: Rng>(rng: &mut R, domain: Interval, controls: Interval) -> Vec<Atom> {
    let n = rng.random_range(1..=12);
    let mass: f64 = rng.random_range(0.05..=1.0);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter()
        .map(|w| {
            Atom::new(
                rng.random_range(domain.lo..domain.hi),
                rng.random_range(controls.lo..=controls.hi),
                mass * w / total,
            )
        })
        .collect()
}

/// Pair `i` of the reproducible random family used by the suites.
pub fn random_measure_pair(
    seed: u64,
    i: u64,
    kind: PairKind,
    domain: Interval,
    controls: Interval,
) -> Result<(EmpiricalJointMeasure, EmpiricalJointMeasure)> {
    let mut rng = rng::stream(seed, Purpose::Sampling, i, 0);
    let a = random_measure(&mut rng, domain, controls);
    let b = match kind {
        PairKind::General => random_measure(&mut rng, domain, controls),
        PairKind::Nested => a
            .iter()
            .map(|atom| Atom {
                weight: atom.weight * rng.random_range(0.0..=1.0),
                ..*atom
            })
            .collect(),
    };
    Ok((
        EmpiricalJointMeasure::new(a, domain, controls)?,
        EmpiricalJointMeasure::new(b, domain, controls)?,
    ))
}

/// Runs `monotonicity_check` on `pairs` random measure pairs.
pub fn monotonicity_suite<L>(
    lagrangian: L,
    domain: Interval,
    controls: Interval,
    pairs: usize,
    kind: PairKind,
    seed: u64,
) -> Result<MonotonicityReport>
where
    L: Fn(f64, f64, f64, &MeasureView<'_>) -> f64,
{
    let mut min_value = f64::INFINITY;
    let mut violations = 0;
    for i in 0..pairs {
        let (nu1, nu2) = random_measure_pair(seed, i as u64, kind, domain, controls)?;
        let v = monotonicity_check(&lagrangian, &nu1, &nu2, 0.0);
        min_value = min_value.min(v);
        if v < -MONOTONICITY_TOLERANCE {
            violations += 1;
        }
    }
    Ok(MonotonicityReport {
        pairs,
        min_value,
        violations,
    })
}

/// Gates for a Lagrangian with linear alignment cost `phi(z) = m1 z`, for
/// which `Lip(phi') = 0` and `|phi'|_inf = |m1|`.
pub fn linear_alignment_gates(m1: f64, epsilon: f64, bound: f64) -> Result<ParameterReport> {
    validate_parameters(
        &ControlParams {
            m1,
            m2: 0.0,
            epsilon,
            bound,
        },
        0.0,
        m1.abs(),
    )
}
