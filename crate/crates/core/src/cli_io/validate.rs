//! Checks run by `mfg validate`.

use super::config::{ModelKind, RunConfig};
use crate::checks::{linear_alignment_gates, monotonicity_suite, PairKind};
use crate::Result;

/// Random measure pairs drawn per monotonicity suite.
pub const VALIDATION_PAIRS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub checks: Vec<CheckLine>,
    /// Observations that do not affect the outcome.
    pub notes: Vec<String>,
}

impl ValidationOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Parameter gates for the alignment part of the Lagrangian and a
/// monotonicity suite on the full Lagrangian at `t = 0`.
pub fn validate_config(cfg: &RunConfig) -> Result<ValidationOutcome> {
    cfg.validate()?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();

    let alignment = match cfg.model {
        ModelKind::Evacuation => cfg.beta,
        ModelKind::Refinancing | ModelKind::Custom => cfg.m1,
    };
    let gates = linear_alignment_gates(alignment, cfg.epsilon, cfg.gate_bound)?;
    let failed: Vec<String> = gates.violations.iter().map(|g| g.to_string()).collect();
    checks.push(CheckLine {
        name: "parameter gates".into(),
        passed: gates.passed(),
        detail: if failed.is_empty() {
            format!("M = {}, margin = {:.6}", cfg.gate_bound, gates.margin)
        } else {
            format!(
                "M = {}, margin = {:.6}, violated: {}",
                cfg.gate_bound,
                gates.margin,
                failed.join("; ")
            )
        },
    });
    let state_sup = cfg.domain().sup_abs();
    if state_sup > cfg.gate_bound {
        notes.push(format!(
            "gate bound M = {} is below sup |x| = {state_sup} over the domain; gates use the configured M",
            cfg.gate_bound
        ));
    }

    let model = cfg.build_model();
    let suite = monotonicity_suite(
        |t, x, a, mu| model.lagrangian(t, x, a, mu),
        cfg.domain(),
        cfg.control_set(),
        VALIDATION_PAIRS,
        PairKind::General,
        cfg.seed,
    )?;
    checks.push(CheckLine {
        name: "monotonicity".into(),
        passed: suite.passed(),
        detail: format!(
            "{} random pairs, {} negative, min value {:.6e}",
            suite.pairs, suite.violations, suite.min_value
        ),
    });
    Ok(ValidationOutcome { checks, notes })
}
