//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Keys may appear in any
//! order but at most once; unknown keys are errors. Lists are comma
//! separated. Defaults depend on `model`, which is therefore resolved first.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::controls::ControlGrid;
use crate::engine::{CostEvaluation, EngineConfig, InitialDensity, PhaseOneConfig, SweepMode};
use crate::interval::Interval;
use crate::math::KernelFamily;
use crate::models::{
    CongestionKernel, ConvolutionCongestionModel, DriftKernel, EvacuationModel, EvacuationParams,
    MeanFieldModel, RateFunction, RefinancingModel, RefinancingParams, RunningCost,
};
use crate::{Error, Result};

/// Tolerance on `T / dt` being an integer.
const STEP_COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Evacuation,
    Refinancing,
    /// Convolution congestion model with a Gaussian-bump kernel.
    Custom,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Evacuation => "evacuation",
            ModelKind::Refinancing => "refinancing",
            ModelKind::Custom => "custom",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evacuation" => Ok(ModelKind::Evacuation),
            "refinancing" => Ok(ModelKind::Refinancing),
            "custom" => Ok(ModelKind::Custom),
            _ => Err(Error::InvalidInput(format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Step,
    Uniform,
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityKind::Step => "step",
            DensityKind::Uniform => "uniform",
        })
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(DensityKind::Step),
            "uniform" => Ok(DensityKind::Uniform),
            _ => Err(Error::InvalidInput(format!(
                "unknown initial density `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Zero,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunningCostKind {
    Zero,
    Affine,
    Identity,
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateKind::Zero => "zero",
            RateKind::Linear => "linear",
        })
    }
}

impl FromStr for RateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(RateKind::Zero),
            "linear" => Ok(RateKind::Linear),
            _ => Err(Error::InvalidInput(format!("unknown rate function `{s}`"))),
        }
    }
}

impl fmt::Display for RunningCostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunningCostKind::Zero => "zero",
            RunningCostKind::Affine => "affine",
            RunningCostKind::Identity => "identity",
        })
    }
}

impl FromStr for RunningCostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(RunningCostKind::Zero),
            "affine" => Ok(RunningCostKind::Affine),
            "identity" => Ok(RunningCostKind::Identity),
            _ => Err(Error::InvalidInput(format!("unknown running cost `{s}`"))),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub domain_lo: f64,
    pub domain_hi: f64,
    pub control_lo: f64,
    pub control_hi: f64,
    pub n_particles: usize,
    pub n_alpha: usize,
    pub dt: f64,
    pub horizon: f64,
    pub sigma: f64,
    pub seed: u64,

    pub eta: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub softening: f64,
    /// Constant drift kernel `K = c`; 0 means no interaction in the drift.
    pub drift_kernel: f64,

    pub m1: f64,
    pub rate: RateKind,
    pub rate_slope: f64,
    pub running_cost: RunningCostKind,
    pub running_cost_scale: f64,

    pub congestion_floor: f64,
    pub congestion_amplitude: f64,
    pub congestion_width: f64,

    pub initial_density: DensityKind,
    pub initial_lo: f64,
    pub initial_hi: f64,

    pub kde_kernel: KernelFamily,
    pub kde_bandwidth: f64,
    pub snapshot_times: Vec<f64>,
    pub value_trace_starts: Vec<f64>,

    pub phase1_enabled: bool,
    pub phase1_n_particles: usize,
    pub phase1_keep_fraction: f64,

    pub max_sweeps: usize,
    pub convergence_threshold: f64,
    pub sweep_mode: SweepMode,
    pub cost_evaluation: CostEvaluation,
    pub exclude_self: bool,
    pub metric_a: f64,
    pub metric_terms: usize,
    pub workers: usize,
    /// Bound `M` used by the parameter gates.
    pub gate_bound: f64,
}

impl RunConfig {
    pub fn defaults(model: ModelKind) -> Self {
        let base = RunConfig {
            model,
            domain_lo: 0.0,
            domain_hi: 1.0,
            control_lo: -0.2,
            control_hi: 0.2,
            n_particles: 600,
            n_alpha: 11,
            dt: 0.004,
            horizon: 4.0,
            sigma: 2.5e-9,
            seed: 0,
            eta: 4.0,
            beta: 1.0,
            epsilon: 0.5,
            softening: 0.2,
            drift_kernel: 0.0,
            m1: 1.0,
            rate: RateKind::Linear,
            rate_slope: 1.0,
            running_cost: RunningCostKind::Affine,
            running_cost_scale: 1.0,
            congestion_floor: 1.0,
            congestion_amplitude: 1.0,
            congestion_width: 0.1,
            initial_density: DensityKind::Step,
            initial_lo: 0.5,
            initial_hi: 1.0,
            kde_kernel: KernelFamily::CubicBSpline,
            kde_bandwidth: 0.02,
            snapshot_times: vec![0.012, 0.2, 0.8, 1.0, 1.4, 2.4],
            value_trace_starts: vec![0.6, 0.7, 0.8],
            phase1_enabled: true,
            phase1_n_particles: 100,
            phase1_keep_fraction: 0.1,
            max_sweeps: 60,
            convergence_threshold: 0.0,
            sweep_mode: SweepMode::AllParticlesPerStep,
            cost_evaluation: CostEvaluation::PostStep,
            exclude_self: true,
            metric_a: 2.0,
            metric_terms: 20,
            workers: 0,
            gate_bound: 0.2,
        };
        match model {
            ModelKind::Evacuation | ModelKind::Custom => base,
            ModelKind::Refinancing => RunConfig {
                domain_lo: -1.0,
                control_lo: -0.05,
                control_hi: 0.05,
                horizon: 1.0,
                sigma: 1e-3,
                m1: 0.1,
                initial_density: DensityKind::Uniform,
                initial_lo: -1.0,
                initial_hi: 1.0,
                kde_bandwidth: 0.05,
                snapshot_times: vec![0.0, 0.25, 0.5, 1.0],
                value_trace_starts: vec![-0.5, 0.0, 0.5],
                phase1_enabled: false,
                gate_bound: 0.05,
                ..base
            },
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_named(&text, &path.display().to_string())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "<config>")
    }

    fn parse_named(text: &str, name: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: name.into(),
            line,
            message,
        };
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(perr(
                    line_no,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(perr(line_no, "missing key".into()));
            }
            if let Some((first, _, _)) = entries.iter().find(|(_, k, _)| k == key) {
                return Err(perr(
                    line_no,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
            entries.push((line_no, key.to_string(), value.to_string()));
        }
        let model = match entries.iter().find(|(_, k, _)| k == "model") {
            Some((line, _, v)) => v
                .parse::<ModelKind>()
                .map_err(|e| perr(*line, e.to_string()))?,
            None => ModelKind::Evacuation,
        };
        let mut cfg = RunConfig::defaults(model);
        for (line, key, value) in &entries {
            cfg.apply(key, value).map_err(|e| perr(*line, e))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse::<T>()
                .map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        fn boolean(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!(
                    "invalid value `{v}` for `{key}` (expected true or false)"
                )),
            }
        }
        fn list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|p| num::<f64>(key, p.trim())).collect()
        }
        fn named<T: FromStr<Err = Error>>(v: &str) -> std::result::Result<T, String> {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "model" => self.model = named(value)?,
            "domain_lo" => self.domain_lo = num(key, value)?,
            "domain_hi" => self.domain_hi = num(key, value)?,
            "control_lo" => self.control_lo = num(key, value)?,
            "control_hi" => self.control_hi = num(key, value)?,
            "n_particles" => self.n_particles = num(key, value)?,
            "n_alpha" => self.n_alpha = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "softening" => self.softening = num(key, value)?,
            "drift_kernel" => self.drift_kernel = num(key, value)?,
            "m1" => self.m1 = num(key, value)?,
            "rate" => self.rate = named(value)?,
            "rate_slope" => self.rate_slope = num(key, value)?,
            "running_cost" => self.running_cost = named(value)?,
            "running_cost_scale" => self.running_cost_scale = num(key, value)?,
            "congestion_floor" => self.congestion_floor = num(key, value)?,
            "congestion_amplitude" => self.congestion_amplitude = num(key, value)?,
            "congestion_width" => self.congestion_width = num(key, value)?,
            "initial_density" => self.initial_density = named(value)?,
            "initial_lo" => self.initial_lo = num(key, value)?,
            "initial_hi" => self.initial_hi = num(key, value)?,
            "kde_kernel" => self.kde_kernel = named(value)?,
            "kde_bandwidth" => self.kde_bandwidth = num(key, value)?,
            "snapshot_times" => self.snapshot_times = list(key, value)?,
            "value_trace_starts" => self.value_trace_starts = list(key, value)?,
            "phase1_enabled" => self.phase1_enabled = boolean(key, value)?,
            "phase1_n_particles" => self.phase1_n_particles = num(key, value)?,
            "phase1_keep_fraction" => self.phase1_keep_fraction = num(key, value)?,
            "max_sweeps" => self.max_sweeps = num(key, value)?,
            "convergence_threshold" => self.convergence_threshold = num(key, value)?,
            "sweep_mode" => self.sweep_mode = named(value)?,
            "cost_evaluation" => self.cost_evaluation = named(value)?,
            "exclude_self" => self.exclude_self = boolean(key, value)?,
            "metric_a" => self.metric_a = num(key, value)?,
            "metric_terms" => self.metric_terms = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "gate_bound" => self.gate_bound = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Number of time steps `T / dt`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn domain(&self) -> Interval {
        Interval {
            lo: self.domain_lo,
            hi: self.domain_hi,
        }
    }

    pub fn control_set(&self) -> Interval {
        Interval {
            lo: self.control_lo,
            hi: self.control_hi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        let finite = [
            ("domain_lo", self.domain_lo),
            ("domain_hi", self.domain_hi),
            ("control_lo", self.control_lo),
            ("control_hi", self.control_hi),
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("sigma", self.sigma),
            ("eta", self.eta),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("softening", self.softening),
            ("drift_kernel", self.drift_kernel),
            ("m1", self.m1),
            ("rate_slope", self.rate_slope),
            ("running_cost_scale", self.running_cost_scale),
            ("congestion_floor", self.congestion_floor),
            ("congestion_amplitude", self.congestion_amplitude),
            ("congestion_width", self.congestion_width),
            ("initial_lo", self.initial_lo),
            ("initial_hi", self.initial_hi),
            ("kde_bandwidth", self.kde_bandwidth),
            ("phase1_keep_fraction", self.phase1_keep_fraction),
            ("convergence_threshold", self.convergence_threshold),
            ("metric_a", self.metric_a),
            ("gate_bound", self.gate_bound),
        ];
        if let Some((k, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return fail(format!("{k} must be finite, got {v}"));
        }
        if self.dt <= 0.0 {
            return fail(format!("dt must be > 0, got {}", self.dt));
        }
        if self.horizon <= 0.0 {
            return fail(format!("horizon must be > 0, got {}", self.horizon));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > STEP_COUNT_TOLERANCE * ratio.max(1.0) {
            return fail(format!("horizon / dt = {ratio} is not an integer"));
        }
        if self.n_particles < 1 {
            return fail("n_particles must be >= 1".into());
        }
        if self.n_alpha < 2 {
            return fail(format!("n_alpha must be >= 2, got {}", self.n_alpha));
        }
        if self.domain_lo >= self.domain_hi {
            return fail("domain_lo must be < domain_hi".into());
        }
        if self.control_lo >= self.control_hi {
            return fail("control_lo must be < control_hi".into());
        }
        if self.sigma < 0.0 {
            return fail("sigma must be >= 0".into());
        }
        if self.epsilon <= 0.0 {
            return fail("epsilon must be > 0".into());
        }
        if self.model == ModelKind::Evacuation && self.softening <= 0.0 {
            return fail("softening must be > 0".into());
        }
        if self.model == ModelKind::Custom && self.congestion_width <= 0.0 {
            return fail("congestion_width must be > 0".into());
        }
        if self.initial_density == DensityKind::Step
            && !(self.domain_lo <= self.initial_lo
                && self.initial_lo < self.initial_hi
                && self.initial_hi <= self.domain_hi)
        {
            return fail("initial_lo < initial_hi must lie inside the domain".into());
        }
        if self.kde_bandwidth <= 0.0 {
            return fail("kde_bandwidth must be > 0".into());
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.horizon).contains(&t))
        {
            return fail(format!("snapshot time {t} outside [0, {}]", self.horizon));
        }
        if let Some(x) = self
            .value_trace_starts
            .iter()
            .find(|&&x| !self.domain().contains(x))
        {
            return fail(format!("value trace start {x} outside the domain"));
        }
        if self.phase1_enabled && self.phase1_n_particles < 1 {
            return fail("phase1_n_particles must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.phase1_keep_fraction) {
            return fail("phase1_keep_fraction must lie in [0, 1]".into());
        }
        if self.convergence_threshold < 0.0 {
            return fail("convergence_threshold must be >= 0".into());
        }
        if self.metric_a <= 1.0 || self.metric_terms == 0 {
            return fail("metric_a must be > 1 and metric_terms >= 1".into());
        }
        if self.gate_bound <= 0.0 {
            return fail("gate_bound must be > 0".into());
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an identical config.
    pub fn to_text(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("model", self.model.to_string());
        kv("domain_lo", self.domain_lo.to_string());
        kv("domain_hi", self.domain_hi.to_string());
        kv("control_lo", self.control_lo.to_string());
        kv("control_hi", self.control_hi.to_string());
        kv("n_particles", self.n_particles.to_string());
        kv("n_alpha", self.n_alpha.to_string());
        kv("dt", self.dt.to_string());
        kv("horizon", self.horizon.to_string());
        kv("sigma", self.sigma.to_string());
        kv("seed", self.seed.to_string());
        kv("eta", self.eta.to_string());
        kv("beta", self.beta.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("softening", self.softening.to_string());
        kv("drift_kernel", self.drift_kernel.to_string());
        kv("m1", self.m1.to_string());
        kv("rate", self.rate.to_string());
        kv("rate_slope", self.rate_slope.to_string());
        kv("running_cost", self.running_cost.to_string());
        kv("running_cost_scale", self.running_cost_scale.to_string());
        kv("congestion_floor", self.congestion_floor.to_string());
        kv(
            "congestion_amplitude",
            self.congestion_amplitude.to_string(),
        );
        kv("congestion_width", self.congestion_width.to_string());
        kv("initial_density", self.initial_density.to_string());
        kv("initial_lo", self.initial_lo.to_string());
        kv("initial_hi", self.initial_hi.to_string());
        kv("kde_kernel", self.kde_kernel.to_string());
        kv("kde_bandwidth", self.kde_bandwidth.to_string());
        kv("snapshot_times", list(&self.snapshot_times));
        kv("value_trace_starts", list(&self.value_trace_starts));
        kv("phase1_enabled", self.phase1_enabled.to_string());
        kv("phase1_n_particles", self.phase1_n_particles.to_string());
        kv(
            "phase1_keep_fraction",
            self.phase1_keep_fraction.to_string(),
        );
        kv("max_sweeps", self.max_sweeps.to_string());
        kv(
            "convergence_threshold",
            self.convergence_threshold.to_string(),
        );
        kv("sweep_mode", self.sweep_mode.to_string());
        kv("cost_evaluation", self.cost_evaluation.to_string());
        kv("exclude_self", self.exclude_self.to_string());
        kv("metric_a", self.metric_a.to_string());
        kv("metric_terms", self.metric_terms.to_string());
        kv("workers", self.workers.to_string());
        kv("gate_bound", self.gate_bound.to_string());
        s
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            n_particles: self.n_particles,
            n_steps: self.n_steps(),
            dt: self.dt,
            seed: self.seed,
            sweep_mode: self.sweep_mode,
            cost_evaluation: self.cost_evaluation,
            exclude_self: self.exclude_self,
            max_sweeps: self.max_sweeps,
            convergence_threshold: self.convergence_threshold,
            metric_a: self.metric_a,
            metric_terms: self.metric_terms,
            workers: self.workers,
            phase: 0,
        }
    }

    pub fn phase_one(&self) -> Option<PhaseOneConfig> {
        self.phase1_enabled.then_some(PhaseOneConfig {
            n_particles: self.phase1_n_particles,
            keep_fraction: self.phase1_keep_fraction,
        })
    }

    pub fn control_grid(&self) -> Result<ControlGrid> {
        ControlGrid::uniform(self.control_lo, self.control_hi, self.n_alpha)
    }

    pub fn initial_density(&self) -> InitialDensity {
        match self.initial_density {
            DensityKind::Step => InitialDensity::Step {
                lo: self.initial_lo,
                hi: self.initial_hi,
            },
            DensityKind::Uniform => InitialDensity::Uniform,
        }
    }

    fn drift(&self) -> DriftKernel {
        if self.drift_kernel == 0.0 {
            DriftKernel::Zero
        } else {
            DriftKernel::Constant(self.drift_kernel)
        }
    }

    pub fn evacuation_params(&self) -> EvacuationParams {
        EvacuationParams {
            eta: self.eta,
            beta: self.beta,
            epsilon: self.epsilon,
            softening: self.softening,
            kernel: self.drift(),
        }
    }

    pub fn refinancing_params(&self) -> RefinancingParams {
        RefinancingParams {
            m1: self.m1,
            epsilon: self.epsilon,
            rate: match self.rate {
                RateKind::Zero => RateFunction::Zero,
                RateKind::Linear => RateFunction::Linear(self.rate_slope),
            },
            running_cost: match self.running_cost {
                RunningCostKind::Zero => RunningCost::Zero,
                RunningCostKind::Affine => RunningCost::Affine(self.running_cost_scale),
                RunningCostKind::Identity => RunningCost::Identity,
            },
        }
    }

    pub fn congestion_model(&self) -> ConvolutionCongestionModel {
        ConvolutionCongestionModel {
            q: CongestionKernel {
                floor: self.congestion_floor,
                amplitude: self.congestion_amplitude,
                width: self.congestion_width,
            },
            m1: self.m1,
            epsilon: self.epsilon,
            kernel: self.drift(),
            domain: self.domain(),
            controls: self.control_set(),
            sigma: self.sigma,
        }
    }

    pub fn build_model(&self) -> Box<dyn MeanFieldModel> {
        match self.model {
            ModelKind::Evacuation => Box::new(EvacuationModel {
                params: self.evacuation_params(),
                domain: self.domain(),
                controls: self.control_set(),
                sigma: self.sigma,
            }),
            ModelKind::Refinancing => Box::new(RefinancingModel {
                params: self.refinancing_params(),
                domain: self.domain(),
                controls: self.control_set(),
                sigma: self.sigma,
            }),
            ModelKind::Custom => Box::new(self.congestion_model()),
        }
    }
}
