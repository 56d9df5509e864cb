//! One-dimensional distances: empirical Wasserstein-1, Fortet-Mourier between finite
//! discrete measures, and smooth-Wasserstein lower bounds from a test-function family.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measure::{union_support, DiscreteMeasure};
use crate::testfn::{default_family, SmoothTestFn};

/// Largest union support accepted by [`fm_discrete`].
pub const MAX_FM_ATOMS: usize = 10_000;

/// Sorted finite samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid("samples", format!("non-finite sample {bad}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(SampleSet { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean_of<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.values.iter().map(|&v| f(v)).sum::<f64>() / self.values.len() as f64
    }
}

/// Wasserstein-1 distance between the empirical measures of `a` and `b`.
///
/// Equal sizes reduce to the mean absolute difference of order statistics. For
/// unequal sizes the exact value `\int_0^1 |F_a^{-1}(q) - F_b^{-1}(q)| dq` is
/// computed by merging the two quantile step functions, which avoids resampling.
pub fn w1_empirical(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    let (x, y) = (&a.values, &b.values);
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySamples);
    }
    if x.len() == y.len() {
        let s: f64 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
        return Ok(s / x.len() as f64);
    }
    let (n, m) = (x.len() as u128, y.len() as u128);
    // quantile breakpoints i/n and j/m compared exactly as i*m vs j*n
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0u128;
    let mut total = 0.0;
    let denom = (n * m) as f64;
    while i < x.len() && j < y.len() {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        total += (next - prev) as f64 / denom * (x[i] - y[j]).abs();
        prev = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(total)
}

/// Concave piecewise-linear function on `[lo, lo + sum(len)]` stored as the value at
/// `lo` and a run of `(length, slope)` segments with nonincreasing slopes.
struct Concave {
    left_value: f64,
    segs: Vec<(f64, f64)>,
}

impl Concave {
    fn push(segs: &mut Vec<(f64, f64)>, len: f64, slope: f64) {
        if len <= 0.0 {
            return;
        }
        match segs.last_mut() {
            Some(last) if last.1 == slope => last.0 += len,
            _ => segs.push((len, slope)),
        }
    }

    /// `h -> max_{|h' - h| <= r} f(h')`; the domain grows by `r` on both sides.
    fn window_max(&mut self, r: f64) {
        let mut out = Vec::with_capacity(self.segs.len() + 1);
        let mut flat = 2.0 * r;
        let mut flat_done = false;
        for &(len, slope) in &self.segs {
            if slope > 0.0 {
                Self::push(&mut out, len, slope);
            } else if slope == 0.0 {
                flat += len;
            } else {
                if !flat_done {
                    Self::push(&mut out, flat, 0.0);
                    flat_done = true;
                }
                Self::push(&mut out, len, slope);
            }
        }
        if !flat_done {
            Self::push(&mut out, flat, 0.0);
        }
        self.segs = out;
    }

    /// Removes `r` from each end of the domain.
    fn trim(&mut self, r: f64) {
        let mut left = r;
        let mut start = 0;
        while left > 0.0 && start < self.segs.len() {
            let (len, slope) = self.segs[start];
            let take = len.min(left);
            self.left_value += take * slope;
            left -= take;
            if take >= len {
                start += 1;
            } else {
                self.segs[start].0 -= take;
            }
        }
        self.segs.drain(..start);
        let mut right = r;
        while right > 0.0 {
            let Some(last) = self.segs.last_mut() else {
                break;
            };
            if last.0 <= right {
                right -= last.0;
                self.segs.pop();
            } else {
                last.0 -= right;
                right = 0.0;
            }
        }
    }

    fn add_linear(&mut self, c: f64, lo: f64) {
        self.left_value += c * lo;
        for seg in &mut self.segs {
            seg.1 += c;
        }
    }

    fn max(&self) -> f64 {
        let mut v = self.left_value;
        let mut best = v;
        for &(len, slope) in &self.segs {
            if slope <= 0.0 {
                break;
            }
            v += len * slope;
            best = best.max(v);
        }
        best
    }
}

/// `max sum_i c_i h_i` subject to `|h_i| <= s` and `|h_{i+1} - h_i| <= l * gaps_i`.
fn chain_value(c: &[f64], gaps: &[f64], s: f64, l: f64) -> f64 {
    let mut f = Concave {
        left_value: 0.0,
        segs: Vec::with_capacity(c.len() + 1),
    };
    Concave::push(&mut f.segs, 2.0 * s, 0.0);
    f.add_linear(c[0], -s);
    for i in 1..c.len() {
        let r = l * gaps[i - 1];
        f.window_max(r);
        f.trim(r);
        f.add_linear(c[i], -s);
    }
    f.max()
}

/// Fortet-Mourier distance together with the optimal split of the unit budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmSolution {
    pub value: f64,
    /// Optimal Lipschitz budget `l`; the sup-norm budget is `1 - l`.
    pub lipschitz: f64,
}

/// `sup { \int h d(m1 - m2) : ||h||_inf + ||h||_L <= 1 }` for finite discrete measures.
///
/// On the sorted union support the program keeps only adjacent Lipschitz
/// constraints. For a fixed split `(1 - l, l)` of the budget the value is computed
/// exactly by a dynamic program over concave piecewise-linear functions; the value is
/// concave in `l`, which is maximized by golden-section search.
pub fn fm_discrete(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<f64> {
    Ok(fm_solve(m1, m2)?.value)
}

pub fn fm_solve(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<FmSolution> {
    let support = union_support(m1, m2);
    if support.len() > MAX_FM_ATOMS {
        return Err(Error::LinearProgram(format!(
            "union support of {} atoms exceeds the cap of {MAX_FM_ATOMS}",
            support.len()
        )));
    }
    let c: Vec<f64> = support.iter().map(|&(_, a, b)| a - b).collect();
    if c.iter().all(|&v| v == 0.0) {
        return Ok(FmSolution {
            value: 0.0,
            lipschitz: 0.0,
        });
    }
    let gaps: Vec<f64> = support.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let value_at = |l: f64| chain_value(&c, &gaps, 1.0 - l, l);

    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (value_at(x1), value_at(x2));
    for _ in 0..72 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = value_at(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = value_at(x1);
        }
    }
    let mut best = FmSolution {
        value: f1,
        lipschitz: x1,
    };
    for (l, v) in [(x2, f2), (0.0, value_at(0.0)), (1.0, value_at(1.0))] {
        if v > best.value {
            best = FmSolution {
                value: v,
                lipschitz: l,
            };
        }
    }
    if !best.value.is_finite() {
        return Err(Error::LinearProgram("non-finite objective".into()));
    }
    Ok(FmSolution {
        value: best.value.max(0.0),
        lipschitz: best.lipschitz,
    })
}

/// Result of the brute-force Fortet-Mourier enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// Best objective found; always a feasible value, hence a lower bound.
    pub value: f64,
    /// Heuristic discretization slack: the true optimum is expected within `value + tolerance`.
    pub tolerance: f64,
}

/// Enumerates `h` restricted to `grid_resolution + 1` equally spaced levels in `[-s, s]`
/// for `l` on a grid of the same resolution, keeping only level sequences that satisfy
/// the bounded-Lipschitz constraints exactly.
pub fn fm_bruteforce_oracle(
    m1: &DiscreteMeasure,
    m2: &DiscreteMeasure,
    grid_resolution: usize,
) -> Result<OracleValue> {
    let support = union_support(m1, m2);
    if support.len() > 20 {
        return Err(Error::OracleResolution(format!(
            "{} atoms is too many for enumeration (max 20)",
            support.len()
        )));
    }
    if grid_resolution < 8 {
        return Err(Error::OracleResolution(format!(
            "resolution {grid_resolution} is below the minimum of 8"
        )));
    }
    if support.is_empty() {
        return Ok(OracleValue {
            value: 0.0,
            tolerance: 0.0,
        });
    }
    let c: Vec<f64> = support.iter().map(|&(_, a, b)| a - b).collect();
    let gaps: Vec<f64> = support.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let k = grid_resolution;
    let mut best = 0.0f64;
    let mut cur = vec![0.0; k + 1];
    let mut next = vec![0.0; k + 1];
    let mut deque = std::collections::VecDeque::with_capacity(k + 1);
    for li in 0..=k {
        let l = li as f64 / k as f64;
        let s = 1.0 - l;
        let step = 2.0 * s / k as f64;
        let level = |q: usize| -s + step * q as f64;
        for q in 0..=k {
            cur[q] = c[0] * level(q);
        }
        for i in 1..c.len() {
            // admissible level moves: |q - q'| * step <= l * gap, filtered exactly
            let reach = if step > 0.0 {
                let mut r = ((l * gaps[i - 1]) / step).floor() as usize;
                while r > 0 && r as f64 * step > l * gaps[i - 1] {
                    r -= 1;
                }
                r.min(k)
            } else {
                k
            };
            // sliding-window maximum of cur over [q - reach, q + reach]
            deque.clear();
            let mut pushed = 0usize;
            for q in 0..=k {
                let hi = (q + reach).min(k);
                while pushed <= hi {
                    while deque.back().is_some_and(|&b: &usize| cur[b] <= cur[pushed]) {
                        deque.pop_back();
                    }
                    deque.push_back(pushed);
                    pushed += 1;
                }
                while deque.front().is_some_and(|&f| f + reach < q) {
                    deque.pop_front();
                }
                next[q] = cur[*deque.front().expect("window nonempty")] + c[i] * level(q);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        best = cur.iter().copied().fold(best, f64::max);
    }
    let mass: f64 = c.iter().map(|v| v.abs()).sum();
    let span = support.last().unwrap().0 - support[0].0;
    let tolerance = mass * (2.0 + span) * 2.0 / k as f64;
    Ok(OracleValue {
        value: best,
        tolerance,
    })
}

/// Members of the smooth class: every derivative of order 0 to 3 bounded by 1.
pub struct TestFunctionDictionary {
    members: Vec<Box<dyn SmoothTestFn>>,
}

impl std::fmt::Debug for TestFunctionDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.members.iter().map(|m| m.name()))
            .finish()
    }
}

impl TestFunctionDictionary {
    /// Checks every member on `[-20, 20]` at step `1e-3` before accepting it.
    pub fn new(members: Vec<Box<dyn SmoothTestFn>>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("dictionary", "needs at least one function"));
        }
        for m in &members {
            for i in -20_000..=20_000 {
                let x = i as f64 * 1e-3;
                let j = m.jet(x);
                if let Some(k) = (0..4).find(|&k| !(j[k].abs() <= 1.0 + 1e-12)) {
                    return Err(invalid(
                        "dictionary",
                        format!("{}: |h^({k})({x})| = {} exceeds 1", m.name(), j[k].abs()),
                    ));
                }
            }
        }
        Ok(TestFunctionDictionary { members })
    }

    pub fn standard() -> Self {
        Self::new(default_family()).expect("default family lies in the smooth class")
    }

    pub fn members(&self) -> &[Box<dyn SmoothTestFn>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `max_h |mean h(a) - mean h(b)|` over the dictionary, a lower bound on the smooth
/// Wasserstein distance of order 3 between the empirical laws.
pub fn dw3_dictionary_lower_bound(
    a: &SampleSet,
    b: &SampleSet,
    dict: &TestFunctionDictionary,
) -> f64 {
    dict.members
        .iter()
        .map(|h| (a.mean_of(|x| h.value(x)) - b.mean_of(|x| h.value(x))).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec()).unwrap()
    }

    fn ss(v: &[f64]) -> SampleSet {
        SampleSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn w1_examples() {
        assert_eq!(w1_empirical(&ss(&[0.0, 0.0, 0.0]), &ss(&[1.0, 1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(w1_empirical(&ss(&[0.0, 2.0]), &ss(&[3.0, 1.0])).unwrap(), 1.0);
        let a = ss(&[0.3, -1.0, 4.0]);
        assert_eq!(w1_empirical(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_unequal_sizes() {
        // {0} against {0, 1}: half the mass moves by 1
        assert!((w1_empirical(&ss(&[0.0]), &ss(&[0.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        // duplicating every sample leaves the measure unchanged
        let a = ss(&[0.1, 0.7, 2.0]);
        let b = ss(&[-0.5, 1.0]);
        let b2 = ss(&[-0.5, -0.5, -0.5, 1.0, 1.0, 1.0]);
        let d1 = w1_empirical(&a, &b).unwrap();
        let d2 = w1_empirical(&a, &b2).unwrap();
        assert!((d1 - d2).abs() < 1e-14);
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(matches!(SampleSet::new(vec![]), Err(Error::EmptySamples)));
    }

    #[test]
    fn fm_examples() {
        let m = dm(&[(0.0, 1.0), (2.0, 0.5)]);
        assert_eq!(fm_discrete(&m, &m).unwrap(), 0.0);
        let v = fm_discrete(&dm(&[(1.0, 2.0)]), &dm(&[(1.0, 3.5)])).unwrap();
        assert!((v - 1.5).abs() < 1e-12);
        for d in [0.1, 1.0, 3.0, 50.0] {
            let v = fm_discrete(&dm(&[(0.0, 1.0)]), &dm(&[(d, 1.0)])).unwrap();
            assert!((v - 2.0 * d / (d + 2.0)).abs() < 1e-10, "d = {d}: {v}");
        }
    }

    #[test]
    fn oracle_examples() {
        let z = fm_bruteforce_oracle(&dm(&[(0.0, 1.0)]), &dm(&[(0.0, 1.0)]), 64).unwrap();
        assert_eq!(z.value, 0.0);
        let g = fm_bruteforce_oracle(&dm(&[(1.0, 2.0)]), &dm(&[(1.0, 3.0)]), 64).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
        let o = fm_bruteforce_oracle(&dm(&[(0.0, 1.0)]), &dm(&[(1.0, 1.0)]), 300).unwrap();
        assert!(o.value <= 2.0 / 3.0 + 1e-12 && 2.0 / 3.0 - o.value <= o.tolerance);
        assert!(fm_bruteforce_oracle(&dm(&[(0.0, 1.0)]), &dm(&[(1.0, 1.0)]), 2).is_err());
    }

    #[test]
    fn dictionary_examples() {
        let dict = TestFunctionDictionary::standard();
        assert_eq!(dict.len(), 16);
        let a = ss(&[0.0; 5]);
        assert_eq!(dw3_dictionary_lower_bound(&a, &a, &dict), 0.0);
        let delta = 1e-3;
        let b = ss(&[delta; 5]);
        let v = dw3_dictionary_lower_bound(&a, &b, &dict);
        assert!(v >= delta.sin() - 1e-15 && v <= delta);
    }

    #[test]
    fn dictionary_rejects_out_of_class() {
        let loud: Vec<Box<dyn SmoothTestFn>> = vec![Box::new(crate::testfn::Square)];
        assert!(TestFunctionDictionary::new(loud).is_err());
    }
}
