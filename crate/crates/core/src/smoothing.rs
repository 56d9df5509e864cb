//! Gaussian smoothing `h_a(x) = E h(x + sqrt(a) Z)` of Lipschitz functions.
//!
//! Derivatives move onto the Gaussian weight:
//! `h_a^{(n)}(x) = (-1)^n a^{-n/2} \int h(x + y sqrt(a)) phi^{(n)}(y) dy
//!              = a^{-n/2} E[h(x + sqrt(a) Z) He_n(Z)]`,
//! so only the base function is ever evaluated. Integrals use composite Gauss-Legendre
//! panels on `[-10, 10]`, split at the preimages of the kinks of `h`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, gaussian_constant, normal_pdf};

/// A 1-Lipschitz function with finitely many points of non-differentiability.
pub trait LipschitzFn: Send + Sync {
    fn name(&self) -> String;
    fn eval(&self, x: f64) -> f64;
    /// Kink locations. Quadrature panels are split there.
    fn kinks(&self) -> Vec<f64> {
        vec![]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity;

impl LipschitzFn for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn eval(&self, x: f64) -> f64 {
        x
    }
}

/// `|x - center|`
#[derive(Debug, Clone, Copy)]
pub struct Abs {
    pub center: f64,
}

impl LipschitzFn for Abs {
    fn name(&self) -> String {
        if self.center == 0.0 {
            "abs".into()
        } else {
            format!("abs(x-{})", self.center)
        }
    }
    fn eval(&self, x: f64) -> f64 {
        (x - self.center).abs()
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.center]
    }
}

/// `clamp(x, lo, hi)`
#[derive(Debug, Clone, Copy)]
pub struct Ramp {
    pub lo: f64,
    pub hi: f64,
}

impl LipschitzFn for Ramp {
    fn name(&self) -> String {
        format!("ramp[{},{}]", self.lo, self.hi)
    }
    fn eval(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.lo, self.hi]
    }
}

/// `max(0, width - |x|)`
#[derive(Debug, Clone, Copy)]
pub struct Tent {
    pub width: f64,
}

impl LipschitzFn for Tent {
    fn name(&self) -> String {
        format!("tent({})", self.width)
    }
    fn eval(&self, x: f64) -> f64 {
        (self.width - x.abs()).max(0.0)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![-self.width, 0.0, self.width]
    }
}

/// `sin(omega x) / omega` with `omega > 0`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSine {
    pub omega: f64,
}

impl LipschitzFn for ScaledSine {
    fn name(&self) -> String {
        if self.omega == 1.0 {
            "sin".into()
        } else {
            format!("sin({}x)/{}", self.omega, self.omega)
        }
    }
    fn eval(&self, x: f64) -> f64 {
        (self.omega * x).sin() / self.omega
    }
}

/// The functions checked by [`verify_lemma_a1`] by default.
pub fn default_catalog() -> Vec<Box<dyn LipschitzFn>> {
    vec![
        Box::new(Identity),
        Box::new(Abs { center: 0.0 }),
        Box::new(Ramp { lo: -1.0, hi: 1.0 }),
        Box::new(Tent { width: 1.0 }),
        Box::new(ScaledSine { omega: 1.0 }),
        Box::new(ScaledSine { omega: 3.0 }),
    ]
}

/// Sup-norm verification grid `[lo, hi]` with spacing `1 / per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_unit: u32,
}

impl Default for VerificationGrid {
    fn default() -> Self {
        VerificationGrid {
            lo: -10.0,
            hi: 10.0,
            per_unit: 1000,
        }
    }
}

impl VerificationGrid {
    /// Points are `lo + i / per_unit`, computed so that integers land exactly.
    pub fn points(&self) -> Vec<f64> {
        let s = self.per_unit as f64;
        let a = (self.lo * s).round() as i64;
        let b = (self.hi * s).round() as i64;
        (a..=b).map(|i| i as f64 / s).collect()
    }
}

const HALF_WIDTH: f64 = 10.0;
const PANEL: f64 = 0.5;
const GL_NODES: usize = 20;

/// `h_a` together with its first three derivatives.
pub struct SmoothedFunction<'a> {
    base: &'a dyn LipschitzFn,
    alpha: f64,
    kinks: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl<'a> SmoothedFunction<'a> {
    /// Fails for `alpha <= 0` or when `base` is not 1-Lipschitz on the default grid.
    pub fn new(base: &'a dyn LipschitzFn, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        let pts = VerificationGrid::default().points();
        let mut lip: f64 = 0.0;
        for w in pts.windows(2) {
            lip = lip.max((base.eval(w[1]) - base.eval(w[0])).abs() / (w[1] - w[0]));
        }
        if lip > 1.0 + 1e-9 {
            return Err(invalid(
                "base",
                format!("{} has grid Lipschitz constant {lip}", base.name()),
            ));
        }
        let mut kinks = base.kinks();
        kinks.sort_by(f64::total_cmp);
        Ok(SmoothedFunction {
            base,
            alpha,
            kinks,
            gl: gauss_legendre(GL_NODES),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `[h_a, h_a', h_a'', h_a''']` at `x`.
    pub fn jet(&self, x: f64) -> [f64; 4] {
        let sa = self.alpha.sqrt();
        let mut cuts = vec![-HALF_WIDTH];
        for k in &self.kinks {
            let y = (k - x) / sa;
            if y > -HALF_WIDTH && y < HALF_WIDTH {
                cuts.push(y);
            }
        }
        cuts.push(HALF_WIDTH);
        let (nodes, weights) = &self.gl;
        let mut acc = [0.0; 4];
        for seg in cuts.windows(2) {
            let len = seg[1] - seg[0];
            let panels = (len / PANEL).ceil().max(1.0) as usize;
            let h = len / panels as f64;
            for p in 0..panels {
                let mid = seg[0] + (p as f64 + 0.5) * h;
                for (z, w) in nodes.iter().zip(weights) {
                    let y = mid + 0.5 * h * z;
                    let f = self.base.eval(x + y * sa) * normal_pdf(y) * w * 0.5 * h;
                    acc[0] += f;
                    acc[1] += f * y;
                    acc[2] += f * (y * y - 1.0);
                    acc[3] += f * (y * y * y - 3.0 * y);
                }
            }
        }
        [acc[0], acc[1] / sa, acc[2] / self.alpha, acc[3] / (self.alpha * sa)]
    }
}

pub fn smooth_eval(sf: &SmoothedFunction, x: f64) -> f64 {
    sf.jet(x)[0]
}

/// Derivative of order `n` in `1..=3`.
pub fn smooth_deriv(sf: &SmoothedFunction, x: f64, n: usize) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(invalid("order", format!("must be 1, 2 or 3, got {n}")));
    }
    Ok(sf.jet(x)[n])
}

/// Sup-norm bound on `|h_a - h|` for 1-Lipschitz `h`.
pub fn deviation_bound(alpha: f64) -> f64 {
    (2.0 * alpha / std::f64::consts::PI).sqrt()
}

/// Bound on `||h_a^{(n)}||_inf`: `a^{-(n-1)/2} \int |phi^{(n-1)}|`.
pub fn derivative_bound(alpha: f64, n: usize) -> Result<f64> {
    Ok(alpha.powf(-(n as f64 - 1.0) / 2.0) * gaussian_constant(n)?)
}

/// Result for one `(h, alpha)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA1Entry {
    pub function: String,
    pub alpha: f64,
    pub max_deviation: f64,
    pub argmax_deviation: f64,
    pub deviation_bound: f64,
    /// Grid sup norms of the first three derivatives.
    pub derivative_norms: [f64; 3],
    pub derivative_bounds: [f64; 3],
    /// Smallest of `bound - observed` over the four checks.
    pub min_slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaA1Report {
    pub grid: VerificationGrid,
    pub tolerance: f64,
    pub entries: Vec<LemmaA1Entry>,
    pub pass: bool,
}

pub const LEMMA_A1_TOLERANCE: f64 = 1e-6;

/// Checks the sup-norm deviation and derivative bounds on the default grid for every
/// pair in `catalog x alphas`.
pub fn verify_lemma_a1(catalog: &[Box<dyn LipschitzFn>], alphas: &[f64]) -> Result<LemmaA1Report> {
    verify_lemma_a1_on(catalog, alphas, VerificationGrid::default())
}

pub fn verify_lemma_a1_on(
    catalog: &[Box<dyn LipschitzFn>],
    alphas: &[f64],
    grid: VerificationGrid,
) -> Result<LemmaA1Report> {
    let pts = grid.points();
    let mut entries = vec![];
    for h in catalog {
        for &alpha in alphas {
            let sf = SmoothedFunction::new(h.as_ref(), alpha)?;
            let rows: Vec<(f64, [f64; 4])> = pts
                .par_iter()
                .map(|&x| {
                    let j = sf.jet(x);
                    ((j[0] - h.eval(x)).abs(), j)
                })
                .collect();
            let mut dev = 0.0;
            let mut arg = pts[0];
            let mut norms = [0.0f64; 3];
            for (&x, (d, j)) in pts.iter().zip(&rows) {
                if *d > dev {
                    dev = *d;
                    arg = x;
                }
                for n in 0..3 {
                    norms[n] = norms[n].max(j[n + 1].abs());
                }
            }
            let dbound = deviation_bound(alpha);
            let bounds = [
                derivative_bound(alpha, 1)?,
                derivative_bound(alpha, 2)?,
                derivative_bound(alpha, 3)?,
            ];
            let mut slack = dbound - dev;
            for n in 0..3 {
                slack = slack.min(bounds[n] - norms[n]);
            }
            entries.push(LemmaA1Entry {
                function: h.name(),
                alpha,
                max_deviation: dev,
                argmax_deviation: arg,
                deviation_bound: dbound,
                derivative_norms: norms,
                derivative_bounds: bounds,
                min_slack: slack,
                pass: slack >= -LEMMA_A1_TOLERANCE,
            });
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(LemmaA1Report {
        grid,
        tolerance: LEMMA_A1_TOLERANCE,
        entries,
        pass,
    })
}
