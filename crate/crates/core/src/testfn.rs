//! Smooth test functions with analytic derivatives up to order three.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::quadrature::normal_pdf;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// A real function with analytic derivatives of order 0 to 3.
pub trait SmoothTestFn: Send + Sync {
    fn name(&self) -> String;

    /// `[h, h', h'', h''']` at `x`.
    fn jet(&self, x: f64) -> [f64; 4];

    fn value(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }

    fn deriv(&self, x: f64, order: usize) -> f64 {
        self.jet(x)[order]
    }
}

/// `sin(omega x + phase) / max(1, omega^3)`; every derivative up to order 3 is bounded by 1.
#[derive(Debug, Clone, Copy)]
pub struct Sine {
    pub omega: f64,
    pub phase: f64,
}

impl Sine {
    pub fn new(omega: f64, phase: f64) -> Self {
        Sine { omega, phase }
    }

    fn scale(&self) -> f64 {
        1.0 / self.omega.powi(3).max(1.0)
    }
}

impl SmoothTestFn for Sine {
    fn name(&self) -> String {
        format!("sin(w={},p={:.4})", self.omega, self.phase)
    }

    fn jet(&self, x: f64) -> [f64; 4] {
        let (s, c) = (self.omega * x + self.phase).sin_cos();
        let w = self.omega;
        let k = self.scale();
        [k * s, k * w * c, -k * w * w * s, -k * w * w * w * c]
    }
}

/// `clamp(x - shift, -1, 1)` convolved with a standard normal density.
#[derive(Debug, Clone, Copy)]
pub struct SmoothRamp {
    pub shift: f64,
}

impl SmoothTestFn for SmoothRamp {
    fn name(&self) -> String {
        format!("ramp(shift={})", self.shift)
    }

    fn jet(&self, x: f64) -> [f64; 4] {
        let a = x - self.shift;
        let (lo, hi) = (-1.0 - a, 1.0 - a);
        let inner = normal_cdf(hi) - normal_cdf(lo);
        let value = -normal_cdf(lo) + normal_cdf(-hi) + a * inner + normal_pdf(lo) - normal_pdf(hi);
        // derivatives of E[clamp(a + Z)] in a
        let d1 = inner;
        let d2 = normal_pdf(a + 1.0) - normal_pdf(a - 1.0);
        let d3 = -(a + 1.0) * normal_pdf(a + 1.0) + (a - 1.0) * normal_pdf(a - 1.0);
        [value, d1, d2, d3]
    }
}

/// `0.7 exp(-(x - center)^2 / 2)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBump {
    pub center: f64,
}

const BUMP_HEIGHT: f64 = 0.7;

impl SmoothTestFn for GaussianBump {
    fn name(&self) -> String {
        format!("bump(center={})", self.center)
    }

    fn jet(&self, x: f64) -> [f64; 4] {
        let z = x - self.center;
        let e = BUMP_HEIGHT * (-0.5 * z * z).exp();
        [e, -z * e, (z * z - 1.0) * e, (3.0 * z - z * z * z) * e]
    }
}

/// `h(x) = x`. Not bounded, but Lipschitz; used for mean comparisons.
#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl SmoothTestFn for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn jet(&self, x: f64) -> [f64; 4] {
        [x, 1.0, 0.0, 0.0]
    }
}

/// `h(x) = x^2`.
#[derive(Debug, Clone, Copy)]
pub struct Square;

impl SmoothTestFn for Square {
    fn name(&self) -> String {
        "square".into()
    }

    fn jet(&self, x: f64) -> [f64; 4] {
        [x * x, 2.0 * x, 2.0, 0.0]
    }
}

/// The default sixteen-member family used for smooth-Wasserstein lower bounds.
pub fn default_family() -> Vec<Box<dyn SmoothTestFn>> {
    let mut out: Vec<Box<dyn SmoothTestFn>> = Vec::with_capacity(16);
    for omega in [0.25, 0.5, 1.0, 2.0] {
        for phase in [0.0, PI / 2.0] {
            out.push(Box::new(Sine::new(omega, phase)));
        }
    }
    for shift in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        out.push(Box::new(SmoothRamp { shift }));
    }
    for center in [-1.0, 0.0, 1.0] {
        out.push(Box::new(GaussianBump { center }));
    }
    out
}
