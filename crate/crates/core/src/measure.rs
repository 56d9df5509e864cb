//! Compensator measures: analytic descriptions, discrete approximations and the
//! transformations used by the bounds (pushforward, `y^2` tilting, total variation).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::TimeFn;
use crate::quadrature::{integrate, integrate_to_infinity, Integral};

/// Relative distance under which two atom locations are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Default small-jump cutoff for infinite-activity measures.
pub const DEFAULT_EPSILON: f64 = 1e-3;

const QUAD_REL_TOL: f64 = 1e-11;

/// Analytic description of a compensator slice `nu_hat(t, dy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasureSpec {
    /// `a(t) delta_c`
    PointMass { rate: TimeFn, location: f64 },
    /// `1_{y > 0} exp(-alpha(t) y) / y dy`
    GammaLevy { shape_rate: TimeFn },
    /// `sum_j w_j delta_{y_j}`, constant in time.
    FiniteDiscrete { atoms: Vec<(f64, f64)> },
    /// A catalog density restricted to `|y| > cutoff`.
    TruncatedDensity { density: DensityForm, cutoff: f64 },
}

/// Jump densities available to [`LevyMeasureSpec::TruncatedDensity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityForm {
    /// `c_+ e^{-l_+ y} / y^{1+index}` on `y > 0` and the mirrored expression on `y < 0`.
    TemperedStable {
        c_pos: f64,
        c_neg: f64,
        lambda_pos: f64,
        lambda_neg: f64,
        index: f64,
    },
    /// `rate(t)` times a normal density with the given mean and standard deviation.
    Gaussian { rate: TimeFn, mean: f64, std: f64 },
}

impl DensityForm {
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match *self {
            DensityForm::TemperedStable {
                c_pos,
                c_neg,
                lambda_pos,
                lambda_neg,
                index,
            } => {
                if y > 0.0 {
                    c_pos * (-lambda_pos * y).exp() / y.powf(1.0 + index)
                } else if y < 0.0 {
                    let a = -y;
                    c_neg * (-lambda_neg * a).exp() / a.powf(1.0 + index)
                } else {
                    0.0
                }
            }
            DensityForm::Gaussian { rate, mean, std } => {
                let z = (y - mean) / std;
                rate.at(t) * (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        match *self {
            DensityForm::TemperedStable {
                c_pos,
                c_neg,
                lambda_pos,
                lambda_neg,
                index,
            } => {
                if !(c_pos >= 0.0 && c_neg >= 0.0) {
                    return Err(invalid("density", "tempered-stable weights must be nonnegative"));
                }
                if !(lambda_pos > 0.0 && lambda_neg > 0.0) {
                    return Err(invalid("density", "tempering rates must be positive"));
                }
                if !(index < 2.0) {
                    return Err(invalid("density", "index must be < 2 for a finite second moment"));
                }
            }
            DensityForm::Gaussian { rate, mean, std } => {
                if !(rate.min_on(horizon) >= 0.0) || !mean.is_finite() || !(std > 0.0) {
                    return Err(invalid("density", "gaussian jumps need rate >= 0 and std > 0"));
                }
            }
        }
        Ok(())
    }
}

impl LevyMeasureSpec {
    pub fn point_mass(rate: f64, location: f64) -> Self {
        LevyMeasureSpec::PointMass {
            rate: TimeFn::Const(rate),
            location,
        }
    }

    pub fn gamma(shape_rate: f64) -> Self {
        LevyMeasureSpec::GammaLevy {
            shape_rate: TimeFn::Const(shape_rate),
        }
    }

    pub fn none() -> Self {
        LevyMeasureSpec::FiniteDiscrete { atoms: vec![] }
    }

    /// True when the measure has infinitely many small jumps and must be truncated.
    pub fn is_infinite_activity(&self) -> bool {
        match self {
            LevyMeasureSpec::GammaLevy { .. } => true,
            LevyMeasureSpec::TruncatedDensity { density, .. } => {
                matches!(density, DensityForm::TemperedStable { index, .. } if *index >= 0.0)
            }
            _ => false,
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            LevyMeasureSpec::PointMass { rate, location } => {
                if !rate.is_finite() || !(rate.min_on(horizon) >= 0.0) || !location.is_finite() {
                    return Err(invalid("rate", "point-mass rate must be finite and >= 0 on [0,T]"));
                }
            }
            LevyMeasureSpec::GammaLevy { shape_rate } => {
                if !shape_rate.is_finite() || !(shape_rate.min_on(horizon) > 0.0) {
                    return Err(invalid("shape_rate", "gamma rate must be > 0 on [0,T]"));
                }
            }
            LevyMeasureSpec::FiniteDiscrete { atoms } => {
                if atoms
                    .iter()
                    .any(|&(y, w)| !y.is_finite() || !w.is_finite() || w < 0.0)
                {
                    return Err(invalid("atoms", "atoms need finite locations and weights >= 0"));
                }
            }
            LevyMeasureSpec::TruncatedDensity { density, cutoff } => {
                if !(*cutoff > 0.0) {
                    return Err(invalid("cutoff", "cutoff must be positive"));
                }
                density.validate(horizon)?;
            }
        }
        Ok(())
    }

    /// `\int_{|y| <= eps} y^2 nu_hat(t, dy)`, the variance rate of the discarded small jumps.
    pub fn small_jump_second_moment(&self, t: f64, epsilon: f64) -> Result<f64> {
        match self {
            LevyMeasureSpec::GammaLevy { shape_rate } => {
                let a = shape_rate.at(t);
                let ae = a * epsilon;
                // \int_0^eps y e^{-a y} dy
                Ok((-(-ae).exp_m1() - ae * (-ae).exp()) / (a * a))
            }
            LevyMeasureSpec::TruncatedDensity { density, cutoff } => {
                let eps = epsilon.max(*cutoff);
                let pos = integrate(|y| y * y * density.eval(t, y), 0.0, eps, 1e-300, 1e-9)?;
                let neg = integrate(|y| y * y * density.eval(t, -y), 0.0, eps, 1e-300, 1e-9)?;
                Ok(pos.value + neg.value)
            }
            _ => Ok(0.0),
        }
    }
}

/// Finite measure on the line given by sorted atoms with nonnegative weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
    total_mass: f64,
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteMeasure {
    type Error = Error;
    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        DiscreteMeasure::new(atoms)
    }
}

impl From<DiscreteMeasure> for Vec<(f64, f64)> {
    fn from(m: DiscreteMeasure) -> Self {
        m.atoms
    }
}

fn same_location(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs())
}

impl DiscreteMeasure {
    /// Canonicalizes: sorts, merges near-duplicate locations, drops zero weights.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(y, w) in &atoms {
            if !y.is_finite() {
                return Err(Error::NonFiniteMap { at: y });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(invalid("weight", format!("weight {w} at {y} must be finite and >= 0")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (y, w) in atoms {
            match merged.last_mut() {
                Some(last) if same_location(last.0, y) => last.1 += w,
                _ => merged.push((y, w)),
            }
        }
        merged.retain(|&(_, w)| w > 0.0);
        let total_mass = merged.iter().map(|a| a.1).sum();
        Ok(DiscreteMeasure {
            atoms: merged,
            total_mass,
        })
    }

    pub fn empty() -> Self {
        DiscreteMeasure::default()
    }

    pub fn dirac(location: f64, weight: f64) -> Result<Self> {
        DiscreteMeasure::new(vec![(location, weight)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `\int f dm`
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(y, w)| w * f(y)).sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.integrate(|y| y)
    }

    /// Multiplies every weight by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        DiscreteMeasure::new(self.atoms.iter().map(|&(y, w)| (y, c * w)).collect())
    }
}

/// `y^2`-tilt: each atom `(y, w)` becomes `(y, y^2 w)`; atoms at zero vanish.
pub fn tilt_square(m: &DiscreteMeasure) -> DiscreteMeasure {
    let atoms: Vec<(f64, f64)> = m
        .atoms
        .iter()
        .filter(|&&(y, _)| y != 0.0)
        .map(|&(y, w)| (y, y * y * w))
        .collect();
    // input was canonical and y != 0, so only zero weights can need dropping
    let atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|&(_, w)| w > 0.0).collect();
    let total_mass = atoms.iter().map(|a| a.1).sum();
    DiscreteMeasure { atoms, total_mass }
}

/// Image measure of `m` under `map`.
pub fn pushforward<F: Fn(f64) -> f64>(m: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure> {
    let mut atoms = Vec::with_capacity(m.len());
    for &(y, w) in &m.atoms {
        let z = map(y);
        if !z.is_finite() {
            return Err(Error::NonFiniteMap { at: y });
        }
        atoms.push((z, w));
    }
    DiscreteMeasure::new(atoms)
}

/// Image of `m` under `y -> k y` followed by the `y^2` tilt, without re-sorting work
/// beyond a reversal when `k < 0`.
pub fn scaled_tilt(m: &DiscreteMeasure, k: f64) -> DiscreteMeasure {
    if k == 0.0 || m.is_empty() {
        return DiscreteMeasure::empty();
    }
    let mut atoms: Vec<(f64, f64)> = m
        .atoms
        .iter()
        .filter(|&&(y, _)| y != 0.0)
        .map(|&(y, w)| {
            let z = k * y;
            (z, z * z * w)
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    if k < 0.0 {
        atoms.reverse();
    }
    let total_mass = atoms.iter().map(|a| a.1).sum();
    DiscreteMeasure { atoms, total_mass }
}

/// Walks the union support of two canonical measures, yielding `(y, w1, w2)`.
pub fn union_support(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Vec<(f64, f64, f64)> {
    let (a, b) = (&m1.atoms, &m2.atoms);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0 && !same_location(a[i].0, b[j].0)) {
            out.push((a[i].0, a[i].1, 0.0));
            i += 1;
        } else if i == a.len() || (b[j].0 < a[i].0 && !same_location(a[i].0, b[j].0)) {
            out.push((b[j].0, 0.0, b[j].1));
            j += 1;
        } else {
            out.push((a[i].0, a[i].1, b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

/// Total variation mass `||m1 - m2||(R)`.
pub fn tv_distance(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> f64 {
    union_support(m1, m2)
        .into_iter()
        .map(|(_, w1, w2)| (w1 - w2).abs())
        .sum()
}

/// Total variation mass between two gamma Levy measures, `|log(beta / alpha)|`.
pub fn frullani_tv(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta", "must be positive"));
    }
    Ok((beta / alpha).ln().abs())
}

/// Discretization together with the accumulated quadrature error estimate.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub measure: DiscreteMeasure,
    pub abs_error: f64,
}

/// Discrete approximation of `nu_hat(t, .)` restricted to `|y| > epsilon`.
///
/// Point masses and finite discrete measures are returned exactly. Densities are
/// split into `n_nodes` log-spaced cells per occupied half-line; each cell becomes
/// one atom carrying the cell mass, placed at the cell's centroid so that the first
/// moment of the truncated measure is preserved.
pub fn discretize(
    spec: &LevyMeasureSpec,
    t: f64,
    epsilon: f64,
    n_nodes: usize,
) -> Result<DiscreteMeasure> {
    Ok(discretize_with_error(spec, t, epsilon, n_nodes)?.measure)
}

pub fn discretize_with_error(
    spec: &LevyMeasureSpec,
    t: f64,
    epsilon: f64,
    n_nodes: usize,
) -> Result<Discretized> {
    if n_nodes < 2 {
        return Err(invalid("n_nodes", "need at least 2 nodes"));
    }
    match spec {
        LevyMeasureSpec::PointMass { rate, location } => {
            let a = rate.at(t);
            if !(a >= 0.0) {
                return Err(invalid("rate", format!("negative rate {a} at t = {t}")));
            }
            Ok(Discretized {
                measure: DiscreteMeasure::dirac(*location, a)?,
                abs_error: 0.0,
            })
        }
        LevyMeasureSpec::FiniteDiscrete { atoms } => Ok(Discretized {
            measure: DiscreteMeasure::new(atoms.clone())?,
            abs_error: 0.0,
        }),
        LevyMeasureSpec::GammaLevy { shape_rate } => {
            if !(epsilon > 0.0) {
                return Err(invalid("epsilon", "gamma measures need a positive cutoff"));
            }
            let a = shape_rate.at(t);
            if !(a > 0.0) {
                return Err(invalid("shape_rate", format!("rate {a} at t = {t} must be > 0")));
            }
            let density = move |y: f64| (-a * y).exp() / y;
            let (atoms, err) = discretize_half_line(&density, epsilon, n_nodes)?;
            Ok(Discretized {
                measure: DiscreteMeasure::new(atoms)?,
                abs_error: err,
            })
        }
        LevyMeasureSpec::TruncatedDensity { density, cutoff } => {
            let eps = epsilon.max(*cutoff);
            if !(eps > 0.0) {
                return Err(invalid("cutoff", "must be positive"));
            }
            let pos = |y: f64| density.eval(t, y);
            let neg = |y: f64| density.eval(t, -y);
            let half = (n_nodes / 2).max(1);
            let (mut atoms, e1) = discretize_half_line(&pos, eps, half)?;
            let (neg_atoms, e2) = discretize_half_line(&neg, eps, half)?;
            atoms.extend(neg_atoms.into_iter().map(|(y, w)| (-y, w)));
            Ok(Discretized {
                measure: DiscreteMeasure::new(atoms)?,
                abs_error: e1 + e2,
            })
        }
    }
}

fn tail(f: &dyn Fn(f64) -> f64, from: f64) -> Result<Integral> {
    integrate_to_infinity(f, from, QUAD_REL_TOL)
}

fn discretize_half_line(
    density: &dyn Fn(f64) -> f64,
    epsilon: f64,
    n_cells: usize,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let (mut atoms, err) = discretize_half_line_shared(&[density], epsilon, n_cells)?;
    Ok((atoms.pop().expect("one density"), err))
}

type Atoms = Vec<(f64, f64)>;

/// Discretizes several densities on `[epsilon, inf)` over one set of log-spaced cells.
/// Atoms sit at the centroid of the summed density, so all outputs share a support.
fn discretize_half_line_shared(
    densities: &[&dyn Fn(f64) -> f64],
    epsilon: f64,
    n_cells: usize,
) -> Result<(Vec<Atoms>, f64)> {
    let sum = |y: f64| densities.iter().map(|d| d(y)).sum::<f64>();
    let total = tail(&sum, epsilon)?;
    let mut out = vec![Vec::with_capacity(n_cells); densities.len()];
    if total.value <= 0.0 {
        return Ok((out, total.abs_error));
    }
    // upper edge of the last bounded cell: where the remaining tail is negligible
    let mut top = 2.0 * epsilon;
    while tail(&sum, top)?.value > 1e-15 * total.value && top < 1e29 {
        top *= 2.0;
    }
    let ratio = (top / epsilon).ln() / n_cells as f64;
    let edges: Vec<f64> = (0..=n_cells)
        .map(|i| epsilon * (ratio * i as f64).exp())
        .collect();
    let mut err = 0.0;
    let cell = |f: &dyn Fn(f64) -> f64, i: usize| -> Result<Integral> {
        if i + 1 == n_cells {
            tail(f, edges[i])
        } else {
            integrate(f, edges[i], edges[i + 1], 1e-300, QUAD_REL_TOL)
        }
    };
    for i in 0..n_cells {
        let moment = cell(&|y: f64| y * sum(y), i)?;
        let masses = densities
            .iter()
            .map(|d| cell(*d, i))
            .collect::<Result<Vec<_>>>()?;
        let mass: f64 = masses.iter().map(|m| m.value).sum();
        err += masses.iter().map(|m| m.abs_error).sum::<f64>();
        if mass > 0.0 {
            let hi = if i + 1 == n_cells { f64::MAX } else { edges[i + 1] };
            let centroid = (moment.value / mass).clamp(edges[i], hi);
            for (o, m) in out.iter_mut().zip(&masses) {
                if m.value > 0.0 {
                    o.push((centroid, m.value));
                }
            }
        }
    }
    Ok((out, err))
}

type BoxedDensity<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

impl LevyMeasureSpec {
    /// Positive and mirrored negative half-line densities, plus the truncation cutoff.
    fn half_line_densities(&self, t: f64) -> Option<(BoxedDensity<'_>, BoxedDensity<'_>, f64)> {
        match self {
            LevyMeasureSpec::GammaLevy { shape_rate } => {
                let a = shape_rate.at(t);
                Some((Box::new(move |y: f64| (-a * y).exp() / y), Box::new(|_| 0.0), 0.0))
            }
            LevyMeasureSpec::TruncatedDensity { density, cutoff } => Some((
                Box::new(move |y| density.eval(t, y)),
                Box::new(move |y| density.eval(t, -y)),
                *cutoff,
            )),
            _ => None,
        }
    }
}

/// Discretizes two compensators so that they can be compared atom by atom.
///
/// When both are densities they share log-spaced cells and atom locations, which keeps
/// total variation and Fortet-Mourier comparisons free of artificial support mismatch.
/// Otherwise each is discretized on its own.
pub fn discretize_pair(
    a: &LevyMeasureSpec,
    b: &LevyMeasureSpec,
    t: f64,
    epsilon: f64,
    n_nodes: usize,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    a.validate(t.max(0.0))?;
    b.validate(t.max(0.0))?;
    match (a.half_line_densities(t), b.half_line_densities(t)) {
        (Some((ap, an, ca)), Some((bp, bn, cb))) => {
            if !(epsilon > 0.0) {
                return Err(invalid("epsilon", "density compensators need a positive cutoff"));
            }
            if !(n_nodes >= 2) {
                return Err(invalid("n_nodes", "need at least 2 nodes"));
            }
            let lo_a = epsilon.max(ca);
            let lo_b = epsilon.max(cb);
            let pa = move |y: f64| if y >= lo_a { ap(y) } else { 0.0 };
            let pb = move |y: f64| if y >= lo_b { bp(y) } else { 0.0 };
            let na = move |y: f64| if y >= lo_a { an(y) } else { 0.0 };
            let nb = move |y: f64| if y >= lo_b { bn(y) } else { 0.0 };
            let lo = lo_a.min(lo_b);
            let half = if a.is_two_sided() || b.is_two_sided() { (n_nodes / 2).max(1) } else { n_nodes };
            let (mut pos, _) = discretize_half_line_shared(&[&pa, &pb], lo, half)?;
            let mut sides = (pos.remove(0), pos.remove(0));
            if a.is_two_sided() || b.is_two_sided() {
                let (mut neg, _) = discretize_half_line_shared(&[&na, &nb], lo, half)?;
                sides.0.extend(neg[0].drain(..).map(|(y, w)| (-y, w)));
                sides.1.extend(neg[1].drain(..).map(|(y, w)| (-y, w)));
            }
            Ok((DiscreteMeasure::new(sides.0)?, DiscreteMeasure::new(sides.1)?))
        }
        _ => Ok((
            discretize(a, t, epsilon, n_nodes)?,
            discretize(b, t, epsilon, n_nodes)?,
        )),
    }
}

impl LevyMeasureSpec {
    fn is_two_sided(&self) -> bool {
        matches!(self, LevyMeasureSpec::TruncatedDensity { .. })
    }

    /// True when the measure does not change with time.
    pub fn is_time_homogeneous(&self) -> bool {
        let c = |f: &TimeFn| matches!(f, TimeFn::Const(_)) || matches!(f, TimeFn::Affine(a) if a.slope == 0.0);
        match self {
            LevyMeasureSpec::PointMass { rate, .. } => c(rate),
            LevyMeasureSpec::GammaLevy { shape_rate } => c(shape_rate),
            LevyMeasureSpec::FiniteDiscrete { .. } => true,
            LevyMeasureSpec::TruncatedDensity { density, .. } => match density {
                DensityForm::TemperedStable { .. } => true,
                DensityForm::Gaussian { rate, .. } => c(rate),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec()).unwrap()
    }

    /// E_1(x) by its power series; independent of any quadrature.
    fn exp_integral_e1(x: f64) -> f64 {
        let euler_gamma = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -euler_gamma - x.ln() - sum
    }

    #[test]
    fn point_mass_is_exact() {
        let d = discretize(&LevyMeasureSpec::point_mass(2.0, 1.0), 0.3, 1e-3, 10).unwrap();
        assert_eq!(d.atoms(), &[(1.0, 2.0)]);
    }

    #[test]
    fn gamma_mass_matches_exponential_integral() {
        let d = discretize_with_error(&LevyMeasureSpec::gamma(1.0), 0.0, 0.01, 2000).unwrap();
        let expected = exp_integral_e1(0.01);
        assert!((expected - 4.0379).abs() < 1e-4);
        assert!((d.measure.total_mass() - expected).abs() < 1e-8, "{}", d.measure.total_mass());
        // first moment of the truncated measure: \int_eps^inf e^{-y} dy
        assert!((d.measure.first_moment() - (-0.01f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn gamma_mass_stable_under_refinement() {
        let spec = LevyMeasureSpec::gamma(2.0);
        let a = discretize_with_error(&spec, 0.0, 1e-3, 64).unwrap();
        let b = discretize_with_error(&spec, 0.0, 1e-3, 128).unwrap();
        let tol = a.abs_error + b.abs_error + 1e-9;
        assert!((a.measure.total_mass() - b.measure.total_mass()).abs() < tol);
    }

    #[test]
    fn gamma_rejects_nonpositive_cutoff() {
        assert!(discretize(&LevyMeasureSpec::gamma(1.0), 0.0, 0.0, 10).is_err());
    }

    #[test]
    fn truncated_density_two_sided() {
        let spec = LevyMeasureSpec::TruncatedDensity {
            density: DensityForm::Gaussian {
                rate: 3.0.into(),
                mean: 0.0,
                std: 1.0,
            },
            cutoff: 1e-6,
        };
        let d = discretize(&spec, 0.0, 1e-6, 40).unwrap();
        assert!((d.total_mass() - 3.0).abs() < 1e-5);
        assert!(d.first_moment().abs() < 1e-9);
    }

    #[test]
    fn non_integrable_density_is_reported() {
        let spec = LevyMeasureSpec::TruncatedDensity {
            density: DensityForm::TemperedStable {
                c_pos: 1.0,
                c_neg: 0.0,
                lambda_pos: 1e-40,
                lambda_neg: 1.0,
                index: -1.0,
            },
            cutoff: 0.1,
        };
        assert!(discretize(&spec, 0.0, 0.1, 10).is_err());
    }

    #[test]
    fn duplicates_merge() {
        assert_eq!(m(&[(1.0, 0.5), (1.0, 0.5)]).atoms(), &[(1.0, 1.0)]);
    }

    #[test]
    fn tilt_examples() {
        assert_eq!(tilt_square(&m(&[(1.0, 0.7)])).atoms(), &[(1.0, 0.7)]);
        assert_eq!(tilt_square(&m(&[(2.0, 3.0)])).atoms(), &[(2.0, 12.0)]);
        assert!(tilt_square(&m(&[(0.0, 5.0)])).is_empty());
    }

    #[test]
    fn pushforward_examples() {
        let a = m(&[(1.0, 0.3)]);
        assert_eq!(pushforward(&a, |y| y).unwrap(), a);
        let (eta, x) = (0.1, 2.0);
        assert_eq!(pushforward(&a, |y| eta * x * y).unwrap().atoms(), &[(eta * x, 0.3)]);
        let b = m(&[(-1.0, 1.0), (1.0, 1.0)]);
        assert_eq!(pushforward(&b, |y| y * y).unwrap().atoms(), &[(1.0, 2.0)]);
        assert!(pushforward(&b, |y| 1.0 / (y + 1.0)).is_err());
    }

    #[test]
    fn scaled_tilt_matches_pushforward_then_tilt() {
        let a = m(&[(-2.0, 0.5), (0.5, 1.0), (3.0, 0.25)]);
        for k in [-1.5, 0.0, 0.3] {
            let direct = tilt_square(&pushforward(&a, |y| k * y).unwrap());
            assert_eq!(scaled_tilt(&a, k), direct);
        }
    }

    #[test]
    fn tv_examples() {
        let a = m(&[(1.0, 2.0), (3.0, 1.0)]);
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert!((tv_distance(&m(&[(1.0, 2.0)]), &m(&[(1.0, 3.5)])) - 1.5).abs() < 1e-15);
        assert_eq!(tv_distance(&m(&[(1.0, 1.0)]), &m(&[(2.0, 1.0)])), 2.0);
    }

    #[test]
    fn frullani_examples() {
        assert_eq!(frullani_tv(1.5, 1.5).unwrap(), 0.0);
        assert!((frullani_tv(1.0, 2.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(frullani_tv(2.0, 1.0).unwrap(), frullani_tv(1.0, 2.0).unwrap());
        assert!(frullani_tv(0.0, 1.0).is_err());
        assert!(frullani_tv(1.0, -1.0).is_err());
    }

    #[test]
    fn serializes_as_pairs() {
        let a = m(&[(2.0, 1.0), (1.0, 0.5)]);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[[1.0,0.5],[2.0,1.0]]");
        let back: DiscreteMeasure = serde_json::from_str("[[2.0,1.0],[1.0,0.5]]").unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<DiscreteMeasure>("[[1.0,-1.0]]").is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s: LevyMeasureSpec =
            serde_json::from_str(r#"{"variant": "gamma_levy", "shape_rate": 2.0}"#).unwrap();
        assert_eq!(s, LevyMeasureSpec::gamma(2.0));
        assert!(serde_json::from_str::<LevyMeasureSpec>(
            r#"{"variant": "point_mass", "rate": 1.0, "location": 1.0, "extra": 0}"#
        )
        .is_err());
    }

    #[test]
    fn paired_gamma_shares_support_and_approaches_frullani() {
        let (a, b) =
            discretize_pair(&LevyMeasureSpec::gamma(1.0), &LevyMeasureSpec::gamma(2.0), 0.0, 1e-6, 400)
                .unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.atoms().iter().zip(b.atoms()).all(|(p, q)| p.0 == q.0));
        // missing mass on (0, eps) is about |beta - alpha| eps
        let tv = tv_distance(&a, &b);
        assert!((tv - 2f64.ln()).abs() < 1e-3, "{tv}");
    }

    #[test]
    fn small_jump_moment_gamma() {
        let eps = 0.01;
        let v = LevyMeasureSpec::gamma(1.0).small_jump_second_moment(0.0, eps).unwrap();
        let q = integrate(|y| y * (-y).exp(), 0.0, eps, 1e-300, 1e-13).unwrap().value;
        assert!((v - q).abs() < 1e-15);
    }
}
