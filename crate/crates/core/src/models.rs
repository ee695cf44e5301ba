//! Concrete mean-field models behind the [`MeanFieldModel`] interface.
//!
//! Every model is one-dimensional in state and control. The agent dynamics
//! are `dX = b(t, X, alpha; mu) dt + 2 sqrt(sigma) dW`, stopped on leaving the
//! open domain, and the running cost is `L(t, X, alpha; mu)`.

use std::fmt;
use std::sync::Arc;

use crate::interval::Interval;
use crate::measures::MeasureView;

/// Drift, running cost and terminal cost of a mean-field model.
///
/// Callbacks receive the population as a [`MeasureView`]. Models that only
/// read the exact summaries (mass, first moment, mean control) keep
/// `requires_atoms` false; the engine then skips materializing atoms.
pub trait MeanFieldModel: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> Interval;
    fn control_set(&self) -> Interval;
    /// Diffusion coefficient `sigma >= 0`.
    fn sigma(&self) -> f64;
    fn drift(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64;
    fn lagrangian(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64;
    /// Exit / terminal cost `psi(x, m)`; zero unless overridden.
    fn terminal_cost(&self, _x: f64, _mass: f64) -> f64 {
        0.0
    }
    fn requires_atoms(&self) -> bool {
        false
    }
}

/// Interaction kernel in the drift, `K * m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftKernel {
    Zero,
    /// `K = c`, so `K * m = c m(Omega)`.
    Constant(f64),
}

impl DriftKernel {
    fn convolve(&self, mu: &MeasureView<'_>) -> f64 {
        match *self {
            DriftKernel::Zero => 0.0,
            DriftKernel::Constant(c) => c * mu.mass(),
        }
    }
}

impl fmt::Display for DriftKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftKernel::Zero => f.write_str("zero"),
            DriftKernel::Constant(c) => write!(f, "constant({c})"),
        }
    }
}

/// Congestion-avoidance plus alignment cost of the pedestrian model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvacuationParams {
    /// Congestion weight `eta`.
    pub eta: f64,
    /// Alignment weight `beta`.
    pub beta: f64,
    /// Quadratic control weight.
    pub epsilon: f64,
    /// Additive constant in the congestion denominator.
    pub softening: f64,
    pub kernel: DriftKernel,
}

impl Default for EvacuationParams {
    fn default() -> Self {
        EvacuationParams {
            eta: 4.0,
            beta: 1.0,
            epsilon: 0.5,
            softening: 0.2,
            kernel: DriftKernel::Zero,
        }
    }
}

impl EvacuationParams {
    /// `eta / (|int y dm - x| + softening) + beta alpha Theta + eps alpha^2`.
    ///
    /// The congestion distance uses the unnormalized first moment of the
    /// state marginal.
    pub fn lagrangian(&self, _t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.eta / ((mu.first_moment() - x).abs() + self.softening)
            + self.beta * alpha * mu.theta()
            + self.epsilon * alpha * alpha
    }

    /// `K * m(x) + alpha`.
    pub fn drift(&self, _t: f64, _x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.kernel.convolve(mu) + alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvacuationModel {
    pub params: EvacuationParams,
    pub domain: Interval,
    pub controls: Interval,
    pub sigma: f64,
}

impl MeanFieldModel for EvacuationModel {
    fn name(&self) -> &str {
        "evacuation"
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn control_set(&self) -> Interval {
        self.controls
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn drift(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.params.drift(t, x, alpha, mu)
    }

    fn lagrangian(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.params.lagrangian(t, x, alpha, mu)
    }
}

/// Interest-rate response `rho` to the aggregate debt demand `Theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFunction {
    Zero,
    /// `rho(z) = slope * z`
    Linear(f64),
}

impl RateFunction {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            RateFunction::Zero => 0.0,
            RateFunction::Linear(k) => k * z,
        }
    }
}

/// Running state cost `l(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunningCost {
    Zero,
    /// `l(t, x) = c (1 + x) / 2`, increasing in the debt level.
    Affine(f64),
    /// `l(t, x) = x`
    Identity,
}

impl RunningCost {
    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        match *self {
            RunningCost::Zero => 0.0,
            RunningCost::Affine(c) => c * (1.0 + x) / 2.0,
            RunningCost::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinancingParams {
    /// Scale of the linear alignment cost `g(alpha, nu) = M1 alpha Theta(nu)`.
    pub m1: f64,
    pub epsilon: f64,
    pub rate: RateFunction,
    pub running_cost: RunningCost,
}

impl Default for RefinancingParams {
    fn default() -> Self {
        RefinancingParams {
            m1: 0.1,
            epsilon: 0.5,
            rate: RateFunction::Linear(1.0),
            running_cost: RunningCost::Affine(1.0),
        }
    }
}

impl RefinancingParams {
    /// `(1 + rho(Theta)) x + alpha`.
    pub fn drift(&self, _t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        (1.0 + self.rate.eval(mu.theta())) * x + alpha
    }

    /// `l(t, x) + M1 alpha Theta + eps alpha^2`.
    pub fn lagrangian(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.running_cost.eval(t, x) + self.m1 * alpha * mu.theta() + self.epsilon * alpha * alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinancingModel {
    pub params: RefinancingParams,
    pub domain: Interval,
    pub controls: Interval,
    pub sigma: f64,
}

impl MeanFieldModel for RefinancingModel {
    fn name(&self) -> &str {
        "refinancing"
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn control_set(&self) -> Interval {
        self.controls
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn drift(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.params.drift(t, x, alpha, mu)
    }

    fn lagrangian(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.params.lagrangian(t, x, alpha, mu)
    }
}

/// Radial congestion kernel `Q(z) = floor + amplitude exp(-z^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionKernel {
    /// Lower bound `B = inf Q`.
    pub floor: f64,
    pub amplitude: f64,
    pub width: f64,
}

impl CongestionKernel {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.floor + self.amplitude * (-(z * z) / (2.0 * self.width * self.width)).exp()
    }
}

/// Multi-agent Lagrangian `Q * m(x) + phi(alpha Theta) + eps alpha^2` with the
/// linear alignment cost `phi(z) = -M1 z`, and drift `K * m + alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionCongestionModel {
    pub q: CongestionKernel,
    pub m1: f64,
    pub epsilon: f64,
    pub kernel: DriftKernel,
    pub domain: Interval,
    pub controls: Interval,
    pub sigma: f64,
}

impl ConvolutionCongestionModel {
    /// `M1 <= B / M^2` with `M = sup_A |alpha|`.
    pub fn alignment_is_dominated(&self) -> bool {
        let m = self.controls.sup_abs();
        self.m1 <= self.q.floor / (m * m)
    }
}

impl MeanFieldModel for ConvolutionCongestionModel {
    fn name(&self) -> &str {
        "custom"
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn control_set(&self) -> Interval {
        self.controls
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn drift(&self, _t: f64, _x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        self.kernel.convolve(mu) + alpha
    }

    fn lagrangian(&self, _t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        mu.convolve(|z| self.q.eval(z), x) - self.m1 * alpha * mu.theta()
            + self.epsilon * alpha * alpha
    }

    fn requires_atoms(&self) -> bool {
        true
    }
}

type ModelFn = dyn Fn(f64, f64, f64, &MeasureView<'_>) -> f64 + Send + Sync;
type TerminalFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Model assembled from user-supplied closures.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub drift: Arc<ModelFn>,
    pub lagrangian: Arc<ModelFn>,
    pub terminal_cost: Arc<TerminalFn>,
    pub sigma: f64,
    pub domain: Interval,
    pub control_set: Interval,
    /// Whether the callbacks read individual atoms (e.g. convolutions).
    pub requires_atoms: bool,
}

impl ModelSpec {
    pub fn new<D, L>(
        domain: Interval,
        control_set: Interval,
        sigma: f64,
        drift: D,
        lagrangian: L,
    ) -> Self
    where
        D: Fn(f64, f64, f64, &MeasureView<'_>) -> f64 + Send + Sync + 'static,
        L: Fn(f64, f64, f64, &MeasureView<'_>) -> f64 + Send + Sync + 'static,
    {
        ModelSpec {
            name: "custom".into(),
            drift: Arc::new(drift),
            lagrangian: Arc::new(lagrangian),
            terminal_cost: Arc::new(|_, _| 0.0),
            sigma,
            domain,
            control_set,
            requires_atoms: false,
        }
    }

    pub fn with_terminal_cost<F>(mut self, psi: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.terminal_cost = Arc::new(psi);
        self
    }

    pub fn with_atoms(mut self) -> Self {
        self.requires_atoms = true;
        self
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("sigma", &self.sigma)
            .field("domain", &self.domain)
            .field("control_set", &self.control_set)
            .field("requires_atoms", &self.requires_atoms)
            .finish_non_exhaustive()
    }
}

impl MeanFieldModel for ModelSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> Interval {
        self.domain
    }

    fn control_set(&self) -> Interval {
        self.control_set
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn drift(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        (self.drift)(t, x, alpha, mu)
    }

    fn lagrangian(&self, t: f64, x: f64, alpha: f64, mu: &MeasureView<'_>) -> f64 {
        (self.lagrangian)(t, x, alpha, mu)
    }

    fn terminal_cost(&self, x: f64, mass: f64) -> f64 {
        (self.terminal_cost)(x, mass)
    }

    fn requires_atoms(&self) -> bool {
        self.requires_atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, EmpiricalJointMeasure, MeasureSummary};

    fn view(first_moment: f64, theta: f64, mass: f64) -> MeasureView<'static> {
        MeasureView::summary_only(MeasureSummary {
            mass,
            first_moment,
            theta,
        })
    }

    #[test]
    fn evacuation_lagrangian_examples() {
        let p = EvacuationParams::default();
        let v = view(0.75, 0.0, 1.0);
        assert!((p.lagrangian(0.0, 0.75, 0.0, &v) - 20.0).abs() < 1e-12);
        let v = view(0.75, 0.1, 1.0);
        assert!((p.lagrangian(0.0, 0.55, 0.2, &v) - 10.04).abs() < 1e-12);
        let quiet = EvacuationParams {
            eta: 0.0,
            beta: 0.0,
            ..p
        };
        assert!((quiet.lagrangian(0.0, 0.3, 0.2, &v) - 0.5 * 0.04).abs() < 1e-15);
    }

    #[test]
    fn evacuation_drift_examples() {
        let p = EvacuationParams::default();
        assert_eq!(p.drift(0.0, 0.4, 0.2, &view(0.3, 0.0, 1.0)), 0.2);
        assert_eq!(p.drift(0.0, 0.4, 0.0, &view(0.3, 0.0, 1.0)), 0.0);
        let k = EvacuationParams {
            kernel: DriftKernel::Constant(1.0),
            ..p
        };
        assert!((k.drift(0.0, 0.4, 0.0, &view(0.3, 0.0, 0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn refinancing_examples() {
        let zero = RefinancingParams {
            m1: 0.1,
            epsilon: 0.5,
            rate: RateFunction::Zero,
            running_cost: RunningCost::Zero,
        };
        assert!((zero.drift(0.0, 0.5, -0.1, &view(0.0, 0.0, 1.0)) - 0.4).abs() < 1e-15);
        assert_eq!(zero.drift(0.0, 0.0, 0.0, &view(0.0, 0.3, 1.0)), 0.0);
        let linear = RefinancingParams {
            rate: RateFunction::Linear(1.0),
            ..zero
        };
        assert!((linear.drift(0.0, 1.0, 0.0, &view(0.0, 0.1, 1.0)) - 1.1).abs() < 1e-15);

        assert!((zero.lagrangian(0.0, 0.2, 0.1, &view(0.0, 0.0, 1.0)) - 0.005).abs() < 1e-15);
        assert!((zero.lagrangian(0.0, 0.2, 0.2, &view(0.0, -0.2, 1.0)) - 0.016).abs() < 1e-15);
        let ident = RefinancingParams {
            running_cost: RunningCost::Identity,
            ..zero
        };
        assert!((ident.lagrangian(0.0, 0.3, 0.0, &view(0.0, 0.4, 1.0)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lagrangians_are_strictly_convex_on_grid() {
        let grid: Vec<f64> = (0..11).map(|i| -0.2 + 0.04 * i as f64).collect();
        let v = view(0.6, -0.07, 0.8);
        let evac = EvacuationParams::default();
        let refi = RefinancingParams::default();
        for w in grid.windows(3) {
            let second = |f: &dyn Fn(f64) -> f64| f(w[0]) - 2.0 * f(w[1]) + f(w[2]);
            assert!(second(&|a| evac.lagrangian(0.0, 0.4, a, &v)) > 0.0);
            assert!(second(&|a| refi.lagrangian(0.0, 0.4, a, &v)) > 0.0);
        }
    }

    #[test]
    fn convolution_model_reads_atoms() {
        let dom = Interval::new(0.0, 1.0).unwrap();
        let ctl = Interval::new(-0.2, 0.2).unwrap();
        let model = ConvolutionCongestionModel {
            q: CongestionKernel {
                floor: 1.0,
                amplitude: 0.0,
                width: 0.1,
            },
            m1: 0.0,
            epsilon: 0.5,
            kernel: DriftKernel::Zero,
            domain: dom,
            controls: ctl,
            sigma: 0.0,
        };
        let mu = EmpiricalJointMeasure::new(vec![Atom::new(0.3, 0.1, 0.4)], dom, ctl).unwrap();
        assert!((model.lagrangian(0.0, 0.5, 0.0, &mu.view()) - 0.4).abs() < 1e-15);
        assert!(model.requires_atoms());
    }

    #[test]
    fn model_spec_dispatches_to_closures() {
        let dom = Interval::new(0.0, 1.0).unwrap();
        let ctl = Interval::new(-1.0, 1.0).unwrap();
        let spec = ModelSpec::new(dom, ctl, 0.0, |_, x, a, _| x + a, |_, _, a, _| a * a)
            .with_terminal_cost(|x, _| 2.0 * x);
        let v = view(0.0, 0.0, 1.0);
        assert_eq!(spec.drift(0.0, 0.5, 0.25, &v), 0.75);
        assert_eq!(spec.lagrangian(0.0, 0.5, 0.5, &v), 0.25);
        assert_eq!(spec.terminal_cost(0.5, 1.0), 1.0);
    }
}
