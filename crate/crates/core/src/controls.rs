//! Optimal-control computations: discrete best responses over a control grid,
//! the closed-form controls for linear and exponential alignment costs, and
//! the admissibility gates on the cost parameters.

use std::fmt;

use crate::error::{Error, Result};
use crate::math::lambert_w0;

/// Finite set of admissible controls, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    points: Vec<f64>,
}

impl ControlGrid {
    /// `lo + i (hi - lo) / (n - 1)` for `i = 0..n`, both endpoints included.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "control grid needs at least 2 points, got {n}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "invalid control bounds [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
        points[n - 1] = hi;
        Ok(ControlGrid { points })
    }

    /// Grid from explicit points; they must be finite and strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "control grid needs at least 2 points".into(),
            ));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "control grid points must be finite and strictly increasing".into(),
            ));
        }
        Ok(ControlGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        self.points[index]
    }

    pub fn min_index(&self) -> usize {
        0
    }

    pub fn max_index(&self) -> usize {
        self.points.len() - 1
    }

    /// Index of the grid point nearest to `value` (lowest index on ties).
    pub fn nearest_index(&self, value: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p - value).abs() < (self.points[best] - value).abs() {
                best = i;
            }
        }
        best
    }
}

impl fmt::Display for ControlGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.points.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Index of the smallest cost; ties go to the lowest index.
pub fn argmin_index<I>(costs: I) -> Result<usize>
where
    I: IntoIterator<Item = f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in costs.into_iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { index: i, value: c });
        }
        match best {
            Some((_, b)) if c >= b => {}
            _ => best = Some((i, c)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyCosts)
}

/// Control with minimal cost among `(control, cost)` candidates.
pub fn best_response_discrete(costs: &[(f64, f64)]) -> Result<f64> {
    let i = argmin_index(costs.iter().map(|&(_, c)| c))?;
    Ok(costs[i].0)
}

/// `alpha* = -p - M1 Theta` for the linear alignment cost `phi(z) = M1 z`.
pub fn linear_control(p: &[f64], theta: &[f64], m1: f64) -> Vec<f64> {
    p.iter().zip(theta).map(|(p, t)| -p - m1 * t).collect()
}

/// Closed-loop linear control given the adjoint sampled on a weighted
/// population `(x, p(x), w)`:
/// `alpha*(x) = -p(x) + M1 / (1 + M1 m) * sum_k w_k p_k`, `m = sum_k w_k`.
pub fn linear_control_closed_loop(p_values: &[(f64, f64, f64)], m1: f64) -> Vec<(f64, f64)> {
    let mass: f64 = p_values.iter().map(|&(_, _, w)| w).sum();
    let weighted_p: f64 = p_values.iter().map(|&(_, p, w)| w * p).sum();
    let shift = m1 / (1.0 + m1 * mass) * weighted_p;
    p_values.iter().map(|&(x, p, _)| (x, -p + shift)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const SCALAR_TOL: f64 = 1e-12;

/// Solves `p + alpha + a exp(b alpha.q) q = 0` for `alpha`.
///
/// With `s = alpha.q` the equation reduces to the scalar root problem
/// `s + p.q + a |q|^2 exp(b s) = 0`; `alpha = -p - a exp(b s) q` follows.
pub fn solve_alignment_equation(p: &[f64], q: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput("p and q must have equal length".into()));
    }
    let q2 = dot(q, q);
    if q2 == 0.0 || a == 0.0 {
        return Ok(p.iter().map(|v| -v).collect());
    }
    let c = dot(p, q);
    let aq2 = a * q2;
    let f = |s: f64| s + c + aq2 * (b * s).exp();
    let df = |s: f64| 1.0 + aq2 * b * (b * s).exp();

    let (mut lo, mut hi) = bracket(&f, -c, aq2, b, c)?;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fs = f(s);
        if fs.abs() <= SCALAR_TOL {
            break;
        }
        if fs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = df(s);
        let newton = s - fs / d;
        s = if d.is_finite() && d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * s.abs().max(1e-300) {
            break;
        }
    }
    let residual = f(s);
    if !(residual.abs() <= SCALAR_TOL) {
        return Err(Error::Bracketing(format!(
            "scalar residual {residual:e} above tolerance after refinement"
        )));
    }
    let scale = a * (b * s).exp();
    Ok(p.iter().zip(q).map(|(p, q)| -p - scale * q).collect())
}

/// Finds `lo < hi` with `f(lo) <= 0 <= f(hi)`.
fn bracket(f: &impl Fn(f64) -> f64, start: f64, aq2: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    // monotone case: f(-c) = aq2 e^{-bc} >= 0 and f(-c - aq2 e^{-bc}) <= 0
    if aq2 >= 0.0 && b >= 0.0 {
        let hi = start;
        let lo = start - aq2 * (-b * c).exp() - 1e-300;
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            return Ok((lo, hi));
        }
    }
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut step = 1e-3_f64.max(start.abs() * 1e-3);
    for _ in 0..200 {
        let left = start - step;
        let right = start + step;
        let (fl, fr) = (f(left), f(right));
        if fl.is_finite() && fl <= 0.0 && f0 >= 0.0 {
            return Ok((left, start));
        }
        if fr.is_finite() && fr >= 0.0 && f0 <= 0.0 {
            return Ok((start, right));
        }
        step *= 2.0;
        if !step.is_finite() {
            break;
        }
    }
    Err(Error::Bracketing(format!(
        "no sign change for a|q|^2 = {aq2}, b = {b}, p.q = {c}"
    )))
}

/// Closed-form exponential-cost control exactly as published:
/// `alpha = -p - a exp(b W(a b |q|^2 (p.q) exp(-b p.q))) q` with `a = M1 M2`,
/// `b = M2`.
///
/// This expression does not solve the first-order condition in general (the
/// `p.q` factor inside `W` and the outer `exp(b W)` do not follow from the
/// substitution). It is kept as a candidate to be compared against
/// [`solve_alignment_equation`]; see [`cross_check_exponential_control`].
pub fn exponential_control_closed_form(p: &[f64], q: &[f64], m1: f64, m2: f64) -> Result<Vec<f64>> {
    let q2 = dot(q, q);
    if q2 == 0.0 || m1 == 0.0 {
        return Ok(p.iter().map(|v| -v).collect());
    }
    let a = m1 * m2;
    let b = m2;
    let c = dot(p, q);
    let w = lambert_w0(a * b * q2 * c * (-b * c).exp())?;
    let scale = a * (b * w).exp();
    Ok(p.iter().zip(q).map(|(p, q)| -p - scale * q).collect())
}

/// Lambert-W solution of `p + alpha + a exp(b alpha.q) q = 0` obtained from
/// the scalar reduction: with `z = a b |q|^2 exp(-b p.q)`,
/// `alpha = -p - W(z) / (b |q|^2) q`.
pub fn alignment_lambert(p: &[f64], q: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    let q2 = dot(q, q);
    if q2 == 0.0 || a == 0.0 {
        return Ok(p.iter().map(|v| -v).collect());
    }
    if b == 0.0 {
        return Ok(p.iter().zip(q).map(|(p, q)| -p - a * q).collect());
    }
    let c = dot(p, q);
    let z = a * b * q2 * (-b * c).exp();
    let w = lambert_w0(z)?;
    let scale = w / (b * q2);
    Ok(p.iter().zip(q).map(|(p, q)| -p - scale * q).collect())
}

/// Outcome of comparing the published closed form against the root solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialControlCheck {
    /// Root-solver value; always the one to use.
    pub solver: Vec<f64>,
    /// Published closed form, or `None` if its Lambert argument was out of domain.
    pub closed_form: Option<Vec<f64>>,
    /// Max componentwise difference (infinite when `closed_form` is `None`).
    pub discrepancy: f64,
    /// True when the closed form disagrees with the solver beyond tolerance.
    pub flagged: bool,
}

pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;

pub fn cross_check_exponential_control(
    p: &[f64],
    q: &[f64],
    m1: f64,
    m2: f64,
) -> Result<ExponentialControlCheck> {
    let solver = solve_alignment_equation(p, q, m1 * m2, m2)?;
    let closed_form = exponential_control_closed_form(p, q, m1, m2).ok();
    let discrepancy = closed_form.as_ref().map_or(f64::INFINITY, |cf| {
        cf.iter()
            .zip(&solver)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    Ok(ExponentialControlCheck {
        flagged: !(discrepancy <= CLOSED_FORM_TOLERANCE),
        solver,
        closed_form,
        discrepancy,
    })
}

/// `|p + alpha + a exp(b alpha.q) q|_inf`.
pub fn alignment_residual(p: &[f64], q: &[f64], a: f64, b: f64, alpha: &[f64]) -> f64 {
    let e = a * (b * dot(alpha, q)).exp();
    p.iter()
        .zip(alpha)
        .zip(q)
        .map(|((p, al), q)| (p + al + e * q).abs())
        .fold(0.0, f64::max)
}

/// Parameters of the alignment cost `phi` and the standing bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    /// Cost scale `M1`.
    pub m1: f64,
    /// Exponential rate `M2` (exponential cost only).
    pub m2: f64,
    /// Weight of the quadratic control cost.
    pub epsilon: f64,
    /// Bound `M` with `A` inside the ball of radius `M` and `sup |(x, alpha)| <= M`.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// `0 < 2 eps - 6M^3 - 9M^2 - 3M <= 2 eps <= 1`
    ConstantWindow,
    /// `Lip(phi') < (2 eps - 6M^3 - 9M^2 - 3M) / M^2`
    DerivativeLipschitz,
    /// `|phi'|_inf <= 2 eps - Lip(phi') M^2`
    DerivativeBound,
    /// `1 / (2 eps - Lip(phi') M^2) < 1 / ((3 + 3M)(1 + 2M) M)`
    ControlLipschitz,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gate::ConstantWindow => "(a) 0 < 2eps - 6M^3 - 9M^2 - 3M <= 2eps <= 1",
            Gate::DerivativeLipschitz => "(b) Lip(phi') < (2eps - 6M^3 - 9M^2 - 3M) / M^2",
            Gate::DerivativeBound => "(c) |phi'|_inf <= 2eps - Lip(phi') M^2",
            Gate::ControlLipschitz => "(d) L < 1 / ((3 + 3M)(1 + 2M) M)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterReport {
    pub violations: Vec<Gate>,
    /// `2 eps - 6M^3 - 9M^2 - 3M`
    pub margin: f64,
    /// Lipschitz constant `1 / (2 eps - Lip(phi') M^2)` of the optimal control
    /// when that denominator is positive.
    pub lipschitz: Option<f64>,
    /// `1 / ((3 + 3M)(1 + 2M) M)`
    pub lipschitz_limit: f64,
}

impl ParameterReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates the admissibility gates that guarantee a unique, Lipschitz
/// optimal control for `L = l + phi(alpha.Theta) + eps |alpha|^2` with drift
/// `b1 + alpha`. The diameter bound and `|xi|_inf` are both taken to be `M`.
pub fn validate_parameters(
    params: &ControlParams,
    lip_phi_prime: f64,
    sup_phi_prime: f64,
) -> Result<ParameterReport> {
    let ControlParams {
        epsilon, bound: m, ..
    } = *params;
    if !(epsilon > 0.0) || !(m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon and M must be positive (epsilon = {epsilon}, M = {m})"
        )));
    }
    if !(lip_phi_prime >= 0.0) || !(sup_phi_prime >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "Lip(phi') and |phi'|_inf must be non-negative (got {lip_phi_prime}, {sup_phi_prime})"
        )));
    }

    let two_eps = 2.0 * epsilon;
    let margin = two_eps - 6.0 * m.powi(3) - 9.0 * m * m - 3.0 * m;
    let mut violations = Vec::new();
    if !(margin > 0.0 && margin <= two_eps && two_eps <= 1.0) {
        violations.push(Gate::ConstantWindow);
    }
    if !(lip_phi_prime < margin / (m * m)) {
        violations.push(Gate::DerivativeLipschitz);
    }
    let denom = two_eps - lip_phi_prime * m * m;
    if !(sup_phi_prime <= denom) {
        violations.push(Gate::DerivativeBound);
    }
    let lipschitz = (denom > 0.0).then(|| 1.0 / denom);
    let lipschitz_limit = 1.0 / ((3.0 + 3.0 * m) * (1.0 + 2.0 * m) * m);
    if !lipschitz.is_some_and(|l| l < lipschitz_limit) {
        violations.push(Gate::ControlLipschitz);
    }
    Ok(ParameterReport {
        violations,
        margin,
        lipschitz,
        lipschitz_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_points() {
        let g = ControlGrid::uniform(-0.2, 0.2, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.get(0), -0.2);
        assert_eq!(g.get(10), 0.2);
        assert!((g.get(5)).abs() < 1e-16);
        assert!((g.get(1) - (-0.16)).abs() < 1e-15);
        assert!(ControlGrid::uniform(-0.2, 0.2, 1).is_err());
        assert!(ControlGrid::from_points(vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn discrete_best_response_examples() {
        let grid = [-0.2, 0.0, 0.2];
        let quad: Vec<_> = grid.iter().map(|&a| (a, 0.5 * a * a)).collect();
        assert_eq!(best_response_discrete(&quad).unwrap(), 0.0);

        // costs -0.18, 0, 0.22
        let aligned: Vec<_> = grid.iter().map(|&a| (a, 0.5 * a * a + a)).collect();
        assert!((aligned[0].1 + 0.18).abs() < 1e-15);
        assert!((aligned[2].1 - 0.22).abs() < 1e-15);
        assert_eq!(best_response_discrete(&aligned).unwrap(), -0.2);

        let flat: Vec<_> = grid.iter().map(|&a| (a, 3.0)).collect();
        assert_eq!(best_response_discrete(&flat).unwrap(), -0.2);
    }

    #[test]
    fn discrete_best_response_errors() {
        assert!(matches!(
            best_response_discrete(&[]),
            Err(Error::EmptyCosts)
        ));
        assert!(matches!(
            best_response_discrete(&[(0.0, 1.0), (0.1, f64::NAN)]),
            Err(Error::NonFiniteCost { index: 1, .. })
        ));
    }

    #[test]
    fn linear_control_examples() {
        assert_eq!(linear_control(&[0.0], &[0.0], 0.7), vec![0.0]);
        assert_eq!(linear_control(&[0.3], &[0.9], 0.0), vec![-0.3]);
        assert!((linear_control(&[1.0], &[0.2], 0.5)[0] + 1.1).abs() < 1e-15);
    }

    #[test]
    fn closed_loop_examples() {
        let n = 100;
        let uniform: Vec<_> = (0..n)
            .map(|i| (i as f64 / n as f64, 1.0, 1.0 / n as f64))
            .collect();
        for (_, a) in linear_control_closed_loop(&uniform, 1.0) {
            assert!((a + 0.5).abs() < 1e-12);
        }
        let varied: Vec<_> = (0..5).map(|i| (i as f64, i as f64 * 0.3, 0.1)).collect();
        for ((_, a), (_, p, _)) in linear_control_closed_loop(&varied, 0.0).iter().zip(&varied) {
            assert_eq!(*a, -p);
        }
        let massless: Vec<_> = (0..5).map(|i| (i as f64, i as f64 * 0.3, 0.0)).collect();
        for ((_, a), (_, p, _)) in linear_control_closed_loop(&massless, 2.0)
            .iter()
            .zip(&massless)
        {
            assert_eq!(*a, -p);
        }
    }

    #[test]
    fn closed_loop_is_a_fixed_point_of_the_linear_control() {
        let pop: Vec<_> = (0..7)
            .map(|i| (i as f64, 0.1 * i as f64 - 0.2, 0.12))
            .collect();
        let m1 = 0.8;
        let controls = linear_control_closed_loop(&pop, m1);
        let theta: f64 = controls
            .iter()
            .zip(&pop)
            .map(|((_, a), (_, _, w))| a * w)
            .sum();
        for ((_, a), (_, p, _)) in controls.iter().zip(&pop) {
            assert!((a - linear_control(&[*p], &[theta], m1)[0]).abs() < 1e-14);
        }
    }

    /// plain bisection on the scalar reduction, used as an oracle
    fn bisect_scalar(p: &[f64], q: &[f64], a: f64, b: f64) -> Vec<f64> {
        let c = dot(p, q);
        let q2 = dot(q, q);
        let f = |s: f64| s + c + a * q2 * (b * s).exp();
        let (mut lo, mut hi) = (-50.0, 50.0);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let s = 0.5 * (lo + hi);
        p.iter()
            .zip(q)
            .map(|(p, q)| -p - a * (b * s).exp() * q)
            .collect()
    }

    #[test]
    fn alignment_equation_examples() {
        assert_eq!(
            solve_alignment_equation(&[0.4, -0.1], &[0.0, 0.0], 2.0, 1.0).unwrap(),
            vec![-0.4, 0.1]
        );
        let lin = solve_alignment_equation(&[0.4, -0.1], &[0.3, 0.2], 2.0, 0.0).unwrap();
        assert!((lin[0] - (-0.4 - 0.6)).abs() < 1e-12);
        assert!((lin[1] - (0.1 - 0.4)).abs() < 1e-12);

        let (p, q) = ([1.0, 0.0], [0.1, 0.1]);
        let alpha = solve_alignment_equation(&p, &q, 0.5, 1.0).unwrap();
        let oracle = bisect_scalar(&p, &q, 0.5, 1.0);
        for (x, y) in alpha.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(alignment_residual(&p, &q, 0.5, 1.0, &alpha) <= 1e-10);
    }

    #[test]
    fn lambert_route_matches_solver() {
        let (p, q) = ([1.0, 0.0], [0.1, 0.1]);
        let a = alignment_lambert(&p, &q, 0.5, 1.0).unwrap();
        let s = solve_alignment_equation(&p, &q, 0.5, 1.0).unwrap();
        for (x, y) in a.iter().zip(&s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn published_closed_form_degenerate_cases() {
        assert_eq!(
            exponential_control_closed_form(&[0.3], &[0.0], 1.0, 2.0).unwrap(),
            vec![-0.3]
        );
        assert_eq!(
            exponential_control_closed_form(&[0.3], &[0.4], 0.0, 2.0).unwrap(),
            vec![-0.3]
        );
    }

    #[test]
    fn published_closed_form_is_flagged_when_wrong() {
        // p.q = 0 makes the published W argument vanish, leaving -p - a q,
        // while the true solution carries exp(b s) with s = -a|q|^2 e^{bs} != 0
        let check = cross_check_exponential_control(&[0.0, 1.0], &[0.5, 0.0], 0.5, 1.0).unwrap();
        assert!(check.flagged);
        assert!(alignment_residual(&[0.0, 1.0], &[0.5, 0.0], 0.5, 1.0, &check.solver) <= 1e-10);
    }

    #[test]
    fn parameter_gate_examples() {
        let ok = ControlParams {
            m1: 0.1,
            m2: 0.0,
            epsilon: 0.5,
            bound: 0.05,
        };
        let report = validate_parameters(&ok, 0.0, 0.1).unwrap();
        assert!((report.margin - 0.82675).abs() < 1e-12);
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.lipschitz, Some(1.0));

        let bad = ControlParams { bound: 1.0, ..ok };
        let report = validate_parameters(&bad, 0.0, 0.1).unwrap();
        assert!(!report.passed());
        assert_eq!(report.violations[0], Gate::ConstantWindow);

        assert!(validate_parameters(&ok, -1.0, 0.1).is_err());
        assert!(validate_parameters(&ok, 0.0, -0.1).is_err());
    }
}
