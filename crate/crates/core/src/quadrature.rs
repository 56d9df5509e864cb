//! Numerical integration: adaptive Gauss-Kronrod (7/15) on finite intervals,
//! geometric panelling on half-lines, and fixed Gauss-Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBDIVISIONS: usize = 20_000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let (value, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut n = 1;
    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if !total.is_finite() {
            return Err(Error::Quadrature {
                tol,
                err: f64::INFINITY,
            });
        }
        if n >= MAX_SUBDIVISIONS {
            return Err(Error::Quadrature {
                tol,
                err: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            let tol = abs_tol.max(rel_tol * total.abs());
            return Err(Error::Quadrature {
                tol,
                err: total_err,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        n += 1;
    }
    // re-sum to limit drift from incremental updates
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_error: f64 = heap.iter().map(|s| s.err).sum();
    Ok(Integral { value, abs_error })
}

/// Integrates over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut edges = Vec::with_capacity(points.len() + 2);
    edges.push(a);
    edges.extend(points);
    edges.push(b);
    let pieces = (edges.len() - 1) as f64;
    let mut out = Integral {
        value: 0.0,
        abs_error: 0.0,
    };
    for w in edges.windows(2) {
        let piece = integrate(&f, w[0], w[1], abs_tol / pieces, rel_tol)?;
        out.value += piece.value;
        out.abs_error += piece.abs_error;
    }
    Ok(out)
}

/// Integrates `f` over `[a, inf)` with `a > 0` using geometric panels `[a 2^k, a 2^(k+1)]`.
///
/// Returns `NonIntegrable` when the panel contributions fail to die out before
/// `y = 1e30` or the running total overflows.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> Result<Integral> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lower",
            reason: format!("half-line integration needs a > 0, got {a}"),
        });
    }
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut lo = a;
    let mut quiet = 0;
    while lo < 1e30 {
        let hi = 2.0 * lo;
        let panel = integrate(&f, lo, hi, 1e-300, rel_tol * 1e-2)?;
        total += panel.value;
        total_err += panel.abs_error;
        if !total.is_finite() || total.abs() > 1e300 {
            return Err(Error::NonIntegrable {
                cutoff: a,
                reason: "integral diverges".into(),
            });
        }
        if panel.value.abs() <= 1e-17 * total.abs() || (total == 0.0 && panel.value == 0.0) {
            quiet += 1;
            if quiet >= 4 {
                return Ok(Integral {
                    value: total,
                    abs_error: total_err,
                });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(Error::NonIntegrable {
        cutoff: a,
        reason: "tail contributions do not vanish".into(),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Standard normal density.
pub fn normal_pdf(y: f64) -> f64 {
    (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `phi^{(k)}(y) = (-1)^k He_k(y) phi(y)` for `k <= 4`.
pub fn normal_pdf_derivative(y: f64, k: usize) -> f64 {
    let he = match k {
        0 => 1.0,
        1 => y,
        2 => y * y - 1.0,
        3 => y * y * y - 3.0 * y,
        4 => y.powi(4) - 6.0 * y * y + 3.0,
        _ => panic!("derivative order {k} not supported"),
    };
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * he * normal_pdf(y)
}

/// `C_n = \int |phi^{(n-1)}(y)| dy`, computed by quadrature split at the sign changes.
pub fn gaussian_constant(n: usize) -> Result<f64> {
    let roots: Vec<f64> = match n {
        1 => vec![],
        2 => vec![0.0],
        3 => vec![-1.0, 1.0],
        4 => vec![-(3f64.sqrt()), 0.0, 3f64.sqrt()],
        _ => {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("gaussian constant defined here for 1 <= n <= 4, got {n}"),
            })
        }
    };
    let k = n - 1;
    let r = integrate_with_breaks(
        |y| normal_pdf_derivative(y, k).abs(),
        -40.0,
        40.0,
        &roots,
        1e-15,
        1e-14,
    )?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_on_half_line() {
        let r = integrate_to_infinity(|y| (-y).exp(), 1.0, 1e-12).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn divergent_half_line_is_reported() {
        let err = integrate_to_infinity(|y| 1.0 / y, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonIntegrable { .. }));
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kinked_integrand_with_break() {
        let r = integrate_with_breaks(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-14, 1e-14).unwrap();
        assert!((r.value - 2.5).abs() < 1e-14);
    }
}
