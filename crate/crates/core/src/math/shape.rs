//! Compactly supported shape functions for density reconstruction.
//!
//! A [`ShapeKernel`] is `phi_eps(x) = phi(x / eps) / eps^d` where `phi` is a
//! radial profile supported in the closed unit ball with unit integral over
//! `R^d`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelFamily {
    /// Cubic B-spline rescaled from `[-2, 2]` to `[-1, 1]`. C2.
    #[default]
    CubicBSpline,
    /// `(1 - r^2)^2`. C1.
    Biweight,
    /// `(1 - r^2)^3`. C2.
    Triweight,
}

impl KernelFamily {
    /// Unnormalized radial profile on `r = |u| >= 0`.
    fn profile(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            KernelFamily::CubicBSpline => {
                if r <= 0.5 {
                    2.0 / 3.0 - 4.0 * r * r + 4.0 * r * r * r
                } else {
                    let s = 1.0 - r;
                    4.0 / 3.0 * s * s * s
                }
            }
            KernelFamily::Biweight => {
                let s = 1.0 - r * r;
                s * s
            }
            KernelFamily::Triweight => {
                let s = 1.0 - r * r;
                s * s * s
            }
        }
    }

    /// `int_0^1 profile(r) r^(d-1) dr`, in closed form.
    fn radial_moment(self, d: u32) -> f64 {
        let k = d as f64;
        match self {
            KernelFamily::CubicBSpline => {
                // [0, 1/2]: 2/3 r^(d-1) - 4 r^(d+1) + 4 r^(d+2)
                let h = 0.5f64;
                let inner = 2.0 / 3.0 * h.powf(k) / k - 4.0 * h.powf(k + 2.0) / (k + 2.0)
                    + 4.0 * h.powf(k + 3.0) / (k + 3.0);
                // [1/2, 1]: 4/3 (1 - r)^3 r^(d-1), expanded
                let coeffs = [1.0, -3.0, 3.0, -1.0];
                let outer: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let p = k + j as f64;
                        c * (1.0 - h.powf(p)) / p
                    })
                    .sum();
                inner + 4.0 / 3.0 * outer
            }
            KernelFamily::Biweight => beta_moment(k, 2),
            KernelFamily::Triweight => beta_moment(k, 3),
        }
    }
}

/// `int_0^1 (1 - r^2)^n r^(d-1) dr` via binomial expansion.
fn beta_moment(k: f64, n: u32) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom / (k + 2.0 * j as f64);
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    total
}

/// Surface area of the unit sphere in `R^d`, `2 pi^(d/2) / Gamma(d/2)`.
fn sphere_area(d: u32) -> f64 {
    // Gamma at half integers by recurrence
    let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut z = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    let target = d as f64 / 2.0;
    while z < target {
        gamma *= z;
        z += 1.0;
    }
    2.0 * PI.powf(target) / gamma
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::CubicBSpline => "cubic_bspline",
            KernelFamily::Biweight => "biweight",
            KernelFamily::Triweight => "triweight",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic_bspline" => Ok(KernelFamily::CubicBSpline),
            "biweight" => Ok(KernelFamily::Biweight),
            "triweight" => Ok(KernelFamily::Triweight),
            other => Err(Error::InvalidInput(format!(
                "unknown kernel family `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeKernel {
    family: KernelFamily,
    bandwidth: f64,
    dimension: u32,
    /// `1 / (eps^d * int phi)`
    scale: f64,
}

impl ShapeKernel {
    pub fn new(family: KernelFamily, bandwidth: f64, dimension: u32) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if dimension == 0 {
            return Err(Error::InvalidInput("kernel dimension must be >= 1".into()));
        }
        let mass = sphere_area(dimension) * family.radial_moment(dimension);
        Ok(ShapeKernel {
            family,
            bandwidth,
            dimension,
            scale: 1.0 / (mass * bandwidth.powi(dimension as i32)),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// Normalized unit-bandwidth kernel `phi(u)` at radius `|u|`.
    pub fn unit_value(&self, radius: f64) -> f64 {
        self.scale * self.bandwidth.powi(self.dimension as i32) * self.family.profile(radius)
    }

    /// `phi_eps(offset)` for an offset of any dimension matching the kernel.
    pub fn eval(&self, offset: &[f64]) -> f64 {
        debug_assert_eq!(offset.len(), self.dimension as usize);
        let r = offset.iter().map(|v| v * v).sum::<f64>().sqrt() / self.bandwidth;
        self.scale * self.family.profile(r)
    }

    /// `phi_eps(offset)` in one dimension.
    #[inline]
    pub fn eval1(&self, offset: f64) -> f64 {
        self.scale * self.family.profile(offset.abs() / self.bandwidth)
    }
}

/// `sum_k w_k phi_eps(query - x_k)` over one-dimensional weighted atoms.
pub fn kernel_density(atoms: &[(f64, f64)], kernel: &ShapeKernel, query: f64) -> f64 {
    atoms
        .iter()
        .map(|&(x, w)| w * kernel.eval1(query - x))
        .sum()
}
