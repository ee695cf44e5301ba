//! Truncated weak-* metric on sub-probability measures.
//!
//! `d_a(nu1, nu2) = sum_{k=1}^{K} a^-k |I_k| / (1 + |I_k|)` with
//! `I_k = int f_k d(nu1 - nu2)` and `f_k` the raw monomials in the joint
//! coordinates, ordered by total degree and then lexicographically
//! (`f_1 = 1`, then `z_1`, `z_2`, ..., then `z_1^2`, `z_1 z_2`, ...).
//!
//! The value depends on the choice of unnormalized monomials; it is a
//! convergence diagnostic, not a calibrated distance.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeakStarMetricConfig {
    a: f64,
    max_terms: usize,
    /// `(lo, hi)` per joint coordinate.
    domain_box: Vec<(f64, f64)>,
    exponents: Vec<Vec<u32>>,
}

impl WeakStarMetricConfig {
    pub const DEFAULT_A: f64 = 2.0;
    pub const DEFAULT_TERMS: usize = 20;

    pub fn new(a: f64, max_terms: usize, domain_box: Vec<(f64, f64)>) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "metric base a must exceed 1, got {a}"
            )));
        }
        if max_terms == 0 {
            return Err(Error::InvalidInput("metric needs at least one term".into()));
        }
        if domain_box.is_empty() || domain_box.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidInput(
                "metric domain box is empty or inverted".into(),
            ));
        }
        let exponents = monomial_exponents(domain_box.len(), max_terms);
        Ok(WeakStarMetricConfig {
            a,
            max_terms,
            domain_box,
            exponents,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn domain_box(&self) -> &[(f64, f64)] {
        &self.domain_box
    }

    pub fn dimension(&self) -> usize {
        self.domain_box.len()
    }

    /// Exponent vectors of `f_1 .. f_K`.
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// `sup { |z| : z in box }`, the quantity written `delta(B)`.
    pub fn delta(&self) -> f64 {
        self.domain_box
            .iter()
            .map(|&(lo, hi)| {
                let m = lo.abs().max(hi.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Upper bound on the dropped tail, `sum_{k > K} a^-k = a^-K / (a - 1)`.
    pub fn truncation_slack(&self) -> f64 {
        self.a.powi(-(self.max_terms as i32)) / (self.a - 1.0)
    }

    /// Right-hand side of `|int h d(nu1 - nu2)| <= a (1 + 2 delta) |h|_inf d_a`.
    pub fn test_function_bound(&self, h_sup: f64, distance: f64) -> f64 {
        self.a * (1.0 + 2.0 * self.delta()) * h_sup * distance
    }

    /// Accumulates `w * f_k(z)` for one weighted point into `moments`.
    pub fn accumulate(&self, moments: &mut [f64], coords: &[f64], weight: f64) {
        debug_assert_eq!(coords.len(), self.dimension());
        debug_assert_eq!(moments.len(), self.max_terms);
        let max_deg = self.exponents.last().map_or(0, |e| e.iter().sum::<u32>()) as usize;
        // powers[v][p] = coords[v]^p
        let mut stack = [[1.0f64; 16]; 4];
        let mut heap;
        let powers: &mut [[f64; 16]] = if coords.len() <= stack.len() {
            &mut stack[..coords.len()]
        } else {
            heap = vec![[1.0f64; 16]; coords.len()];
            &mut heap
        };
        let max_deg = max_deg.min(15);
        for (v, &c) in coords.iter().enumerate() {
            for p in 1..=max_deg {
                powers[v][p] = powers[v][p - 1] * c;
            }
        }
        for (m, exps) in moments.iter_mut().zip(&self.exponents) {
            let mut term = weight;
            for (v, &e) in exps.iter().enumerate() {
                term *= powers[v][e as usize];
            }
            *m += term;
        }
    }

    /// Moment vector `(int f_k d nu)_k` of weighted points.
    pub fn moments<'a, I>(&self, points: I) -> Vec<f64>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut out = vec![0.0; self.max_terms];
        for (coords, w) in points {
            self.accumulate(&mut out, coords, w);
        }
        out
    }

    /// Distance between two measures given by their moment vectors.
    pub fn distance_from_moments(&self, m1: &[f64], m2: &[f64]) -> f64 {
        let mut weight = 1.0;
        let mut total = 0.0;
        for (a, b) in m1.iter().zip(m2) {
            weight /= self.a;
            let diff = (a - b).abs();
            total += weight * diff / (1.0 + diff);
        }
        total
    }
}

/// First `count` exponent vectors in `vars` variables, graded lex order.
fn monomial_exponents(vars: usize, count: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(count);
    let mut degree = 0u32;
    while out.len() < count {
        let mut current = vec![0u32; vars];
        push_compositions(&mut out, &mut current, 0, degree, count);
        degree += 1;
    }
    out
}

fn push_compositions(
    out: &mut Vec<Vec<u32>>,
    current: &mut Vec<u32>,
    var: usize,
    remaining: u32,
    count: usize,
) {
    if out.len() >= count {
        return;
    }
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        push_compositions(out, current, var + 1, remaining - e, count);
    }
    current[var] = 0;
}
