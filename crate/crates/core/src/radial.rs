//! Shooting solver for the radial reduction on Wulff shapes.
//!
//! With `ρ(0) = 1` the ODE is integrated in divergence form
//!
//! ```text
//! ρ′(r) = −( r^{1−n} I(r) )^{1/(p−1)},   I′(r) = Λ m̃(r) ρ₊(r)^{q−1} r^{n−1}
//! ```
//!
//! by Heun's method on a uniform grid, and `Λ` is bisected until the first
//! zero of `ρ` lands on the target radius.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::anisotropy::{unit_ball_volume, NormSpec};
use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::rearrangement::DecreasingProfile;

/// Default number of radial steps.
pub const DEFAULT_NODES: usize = 4096;

const MIN_NODES: usize = 64;
const SHOOT_RESIDUAL: f64 = 1e-8;

/// `m̃(r)` on `[0, R]`.
#[derive(Clone, Debug)]
pub enum RadialWeight {
    Constant(f64),
    /// `m̃(r) = m*(k_n rⁿ)` by right-continuous lookup.
    Rearranged {
        profile: DecreasingProfile,
        measure: f64,
        dim: usize,
    },
    /// Right-continuous step table: `m[k]` on `[r[k], r[k+1])`, last value
    /// beyond.
    Table {
        r: Vec<f64>,
        m: Vec<f64>,
    },
}

impl RadialWeight {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("weight must be positive, got {c}")));
        }
        Ok(Self::Constant(c))
    }

    /// `m̃(r) = m*(k_n rⁿ)` with `k_n` taken from `spec`.
    pub fn rearranged(profile: DecreasingProfile, spec: &NormSpec) -> Result<Self> {
        if profile.values().iter().any(|&v| !(v > 0.0)) {
            return Err(invalid("rearranged weight must be positive"));
        }
        Ok(Self::Rearranged { profile, measure: spec.wulff_measure(), dim: spec.dim() })
    }

    pub fn table(r: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if r.is_empty() || r.len() != m.len() {
            return Err(Error::Data("weight table needs matching nonempty columns".into()));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("weight table radii must start at 0 and increase".into()));
        }
        if m.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::Data("weight table values must be positive".into()));
        }
        Ok(Self::Table { r, m })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Rearranged { profile, measure, dim } => profile.eval(measure * r.powi(*dim as i32)),
            Self::Table { r: rs, m } => {
                let k = rs.partition_point(|&x| x <= r);
                m[k.saturating_sub(1)]
            }
        }
    }

    /// Upper end of the radius range the weight describes, if bounded.
    pub fn max_radius(&self) -> Option<f64> {
        match self {
            Self::Constant(_) | Self::Table { .. } => None,
            Self::Rearranged { profile, measure, dim } => {
                Some((profile.total_measure() / measure).powf(1.0 / *dim as f64))
            }
        }
    }
}

/// Exponents, dimension, Wulff measure `k_n` and weight of a radial problem.
#[derive(Clone, Debug)]
pub struct RadialProblem {
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub wulff_measure: f64,
    pub weight: RadialWeight,
    pub nodes: usize,
}

impl RadialProblem {
    /// Problem with the Euclidean `k_n = ω_n`.
    pub fn new(p: f64, q: f64, dim: usize, weight: RadialWeight) -> Result<Self> {
        if dim < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {dim}")));
        }
        Self::with_measure(p, q, dim, unit_ball_volume(dim), weight)
    }

    pub fn for_norm(p: f64, q: f64, spec: &NormSpec, weight: RadialWeight) -> Result<Self> {
        Self::with_measure(p, q, spec.dim(), spec.wulff_measure(), weight)
    }

    pub fn with_measure(
        p: f64,
        q: f64,
        dim: usize,
        wulff_measure: f64,
        weight: RadialWeight,
    ) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(invalid(format!("p must exceed 1, got {p}")));
        }
        if !(q.is_finite() && q > 1.0) {
            return Err(invalid(format!("q must exceed 1, got {q}")));
        }
        if q > p {
            return Err(invalid(format!(
                "q = {q} exceeds p = {p}; the first eigenvalue need not be simple for q > p"
            )));
        }
        if dim < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {dim}")));
        }
        if !(wulff_measure.is_finite() && wulff_measure > 0.0) {
            return Err(invalid("Wulff measure must be positive"));
        }
        Ok(Self { p, q, dim, wulff_measure, weight, nodes: DEFAULT_NODES })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(invalid(format!("need at least {MIN_NODES} radial nodes, got {nodes}")));
        }
        self.nodes = nodes;
        Ok(self)
    }
}

/// Samples of `ρ` and `ρ′` on a uniform grid of `[0, R]`.
#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub radius: f64,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub drho: Vec<f64>,
    /// First sign change of `ρ` in `(0, R]`, by linear interpolation.
    pub first_zero: Option<f64>,
}

impl RadialProfile {
    pub fn nodes(&self) -> usize {
        self.r.len() - 1
    }

    /// `ρ(R)`.
    pub fn residual(&self) -> f64 {
        *self.rho.last().unwrap()
    }

    /// Piecewise-linear `ρ₊`, zero beyond `R`.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let step = self.radius / self.nodes() as f64;
        let x = (r.max(0.0) / step).min(self.nodes() as f64);
        let k = (x.floor() as usize).min(self.nodes() - 1);
        let t = x - k as f64;
        ((1.0 - t) * self.rho[k] + t * self.rho[k + 1]).max(0.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,rho,drho")?;
        for ((r, v), d) in self.r.iter().zip(&self.rho).zip(&self.drho) {
            writeln!(w, "{r:.16e},{v:.16e},{d:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut cols = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("line {}: {e}", n + 1)))?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with('r')) {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("line {}: {e}", n + 1)))?;
            if vals.len() != 3 {
                return Err(Error::Data(format!("line {}: expected `r,rho,drho`", n + 1)));
            }
            cols.0.push(vals[0]);
            cols.1.push(vals[1]);
            cols.2.push(vals[2]);
        }
        if cols.0.len() < 2 {
            return Err(Error::Data("radial profile needs at least two rows".into()));
        }
        let radius = *cols.0.last().unwrap();
        let first_zero = first_crossing(&cols.0, &cols.1);
        Ok(Self { radius, r: cols.0, rho: cols.1, drho: cols.2, first_zero })
    }
}

fn first_crossing(r: &[f64], rho: &[f64]) -> Option<f64> {
    (1..rho.len()).find(|&i| rho[i] <= 0.0).map(|i| {
        let (a, b) = (rho[i - 1], rho[i]);
        if a == b {
            r[i]
        } else {
            r[i - 1] + (r[i] - r[i - 1]) * a / (a - b)
        }
    })
}

/// Integrates the radial ODE for trial eigenvalue `lambda` on `[0, radius]`
/// with `problem.nodes` Heun steps.
pub fn integrate_radial(problem: &RadialProblem, lambda: f64, radius: f64) -> Result<RadialProfile> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid(format!("trial eigenvalue must be positive, got {lambda}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let n = problem.nodes;
    let dim = problem.dim as i32;
    let inv_pm1 = 1.0 / (problem.p - 1.0);
    let qm1 = problem.q - 1.0;
    let step = radius / n as f64;

    let mut weights = Vec::with_capacity(2 * n + 1);
    for k in 0..=2 * n {
        let m = problem.weight.eval(0.5 * step * k as f64);
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Data(format!(
                "weight sample {m} at r = {} is not positive and finite",
                0.5 * step * k as f64
            )));
        }
        weights.push(m);
    }

    let slope = |r: f64, integral: f64| -> f64 {
        if r <= 0.0 || integral <= 0.0 {
            0.0
        } else {
            -(integral * r.powi(1 - dim)).powf(inv_pm1)
        }
    };
    let source = |r: f64, m: f64, rho: f64| -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            lambda * m * rho.powf(qm1) * r.powi(dim - 1)
        }
    };

    let mut r = Vec::with_capacity(n + 1);
    let mut rho = Vec::with_capacity(n + 1);
    let mut drho = Vec::with_capacity(n + 1);
    let (mut y, mut integral) = (1.0, 0.0);
    r.push(0.0);
    rho.push(y);
    drho.push(0.0);
    for k in 0..n {
        let r0 = step * k as f64;
        let r1 = step * (k + 1) as f64;
        // weight sampled just inside each end so steps see one-sided values
        let m0 = weights[2 * k];
        let m1 =
            if weights[2 * k + 1] == weights[2 * k + 2] { weights[2 * k + 2] } else { weights[2 * k + 1] };
        let k1y = slope(r0, integral);
        let k1i = source(r0, m0, y);
        let yp = y + step * k1y;
        let ip = integral + step * k1i;
        let k2y = slope(r1, ip);
        let k2i = source(r1, m1, yp);
        y += 0.5 * step * (k1y + k2y);
        integral += 0.5 * step * (k1i + k2i);
        r.push(r1);
        rho.push(y);
        drho.push(slope(r1, integral));
    }
    let first_zero = first_crossing(&r, &rho);
    Ok(RadialProfile { radius, r, rho, drho, first_zero })
}

/// Bisects the trial eigenvalue so that the first zero of `ρ` lands at
/// `radius`. Returns the unnormalized eigenvalue `Λ*` and its profile,
/// which is positive on `[0, R)`.
pub fn shoot_eigenvalue(problem: &RadialProblem, radius: f64) -> Result<(f64, RadialProfile)> {
    let crosses = |lambda: f64| -> Result<(bool, RadialProfile)> {
        let prof = integrate_radial(problem, lambda, radius)?;
        Ok((prof.first_zero.is_some(), prof))
    };
    let scale = radius.powf(-problem.p);
    let (mut lo, mut hi) = (1e-3 * scale, 1e3 * scale);
    let mut expansions = 0;
    let mut lo_prof = loop {
        let (c, prof) = crosses(lo)?;
        if !c {
            break prof;
        }
        if expansions == 10 {
            return Err(Error::NoConvergence(format!(
                "no eigenvalue bracket: profile already crosses zero before R = {radius} at Λ = {lo}"
            )));
        }
        lo /= 2.0;
        expansions += 1;
    };
    expansions = 0;
    loop {
        if crosses(hi)?.0 {
            break;
        }
        if expansions == 10 {
            return Err(Error::NoConvergence(format!(
                "no eigenvalue bracket: profile stays positive on [0, {radius}] at Λ = {hi}"
            )));
        }
        hi *= 2.0;
        expansions += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (c, prof) = crosses(mid)?;
        if c {
            hi = mid;
        } else {
            lo = mid;
            lo_prof = prof;
        }
        if lo_prof.residual().abs() <= 1e-3 * SHOOT_RESIDUAL && (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    let residual = lo_prof.residual();
    if residual.abs() > SHOOT_RESIDUAL {
        return Err(Error::NoConvergence(format!(
            "shooting residual {residual:e} at R = {radius} exceeds {SHOOT_RESIDUAL:e}"
        )));
    }
    Ok((lo, lo_prof))
}

/// `‖ρ‖_{q,m̃}^q = n k_n ∫₀^R m̃ ρ₊^q r^{n−1} dr` by the trapezoid rule.
pub fn profile_norm_power(problem: &RadialProblem, profile: &RadialProfile) -> f64 {
    let dim = problem.dim as i32;
    let step = profile.radius / profile.nodes() as f64;
    let f = |k: usize| {
        let r = profile.r[k];
        problem.weight.eval(r) * profile.rho[k].max(0.0).powf(problem.q) * r.powi(dim - 1)
    };
    let last = profile.nodes();
    let inner: f64 = (1..last).map(f).sum();
    let integral = step * (inner + 0.5 * (f(0) + f(last)));
    problem.dim as f64 * problem.wulff_measure * integral
}

/// `λ = Λ* / ‖ρ‖_{q,m̃}^{p−q}`, the eigenvalue of the normalized problem.
pub fn normalized_eigenvalue(problem: &RadialProblem, raw: f64, profile: &RadialProfile) -> Result<f64> {
    if problem.p == problem.q {
        return Ok(raw);
    }
    let norm_q = profile_norm_power(problem, profile);
    if !(norm_q.is_finite() && norm_q > 0.0) {
        return Err(Error::InvalidProfile("radial profile has zero norm".into()));
    }
    Ok(raw / norm_q.powf((problem.p - problem.q) / problem.q))
}

/// Converged eigenpair on the Wulff shape of radius `R`.
#[derive(Clone, Debug, Serialize)]
pub struct RadialSolution {
    pub raw_eigenvalue: f64,
    pub eigenvalue: f64,
    pub radius: f64,
    pub nodes: usize,
    pub residual: f64,
    #[serde(skip)]
    pub profile: RadialProfile,
}

pub fn solve_radial(problem: &RadialProblem, radius: f64) -> Result<RadialSolution> {
    let (raw, profile) = shoot_eigenvalue(problem, radius)?;
    let eigenvalue = normalized_eigenvalue(problem, raw, &profile)?;
    Ok(RadialSolution {
        raw_eigenvalue: raw,
        eigenvalue,
        radius,
        nodes: profile.nodes(),
        residual: profile.residual(),
        profile,
    })
}

/// `z(x) = ρ(H°(x))` on a grid of spacing `h` covering `W_R`, with weight
/// `m̃(H°(x))`.
pub fn wulff_eigenfunction(
    profile: &RadialProfile,
    problem: &RadialProblem,
    spec: &NormSpec,
    h: f64,
) -> Result<ScalarField> {
    let dom = ScalarField::wulff(spec, profile.radius, h)?;
    let z = dom.map_values(|x, y| profile.eval(spec.polar_unchecked(&[x, y])))?;
    z.map_weight(|x, y| problem.weight.eval(spec.polar_unchecked(&[x, y])))
}

/// Output of [`matched_wulff_shape`].
#[derive(Clone, Debug)]
pub struct MatchedShape {
    pub radius: f64,
    pub solution: RadialSolution,
    /// Eigenvalue of the full shape `W_{R★}`.
    pub floor: f64,
    /// True when the target sat below `floor` within the admissibility
    /// slack and the radius was clamped to `R★`.
    pub clamped: bool,
}

/// Radius `R_λ ≤ R★` of the Wulff shape whose first eigenvalue, with the
/// problem's weight restricted to it, equals `target`. `R★` is
/// `problem.weight.max_radius()` or `full_radius` if given.
pub fn matched_wulff_shape(target: f64, problem: &RadialProblem, full_radius: f64) -> Result<MatchedShape> {
    matched_wulff_shape_with_slack(target, problem, full_radius, 0.0)
}

/// As [`matched_wulff_shape`], but targets below `λ(W_{R★})` by at most a
/// relative `slack` are clamped to `R★` instead of rejected.
pub fn matched_wulff_shape_with_slack(
    target: f64,
    problem: &RadialProblem,
    full_radius: f64,
    slack: f64,
) -> Result<MatchedShape> {
    if !(target.is_finite() && target > 0.0) {
        return Err(invalid(format!("target eigenvalue must be positive, got {target}")));
    }
    if !(full_radius.is_finite() && full_radius > 0.0) {
        return Err(invalid(format!("full radius must be positive, got {full_radius}")));
    }
    let full = solve_radial(problem, full_radius)?;
    let floor = full.eigenvalue;
    if target <= floor {
        if target >= floor * (1.0 - slack) {
            return Ok(MatchedShape { radius: full_radius, solution: full, floor, clamped: target < floor });
        }
        return Err(Error::Infeasible { target, floor });
    }
    let mut hi = full_radius;
    let mut lo = 0.5 * full_radius;
    let mut lo_sol = solve_radial(problem, lo)?;
    while lo_sol.eigenvalue <= target {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-12 * full_radius {
            return Err(Error::NoConvergence(format!("no radius with eigenvalue above {target}")));
        }
        lo_sol = solve_radial(problem, lo)?;
    }
    let mut best = lo_sol;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sol = solve_radial(problem, mid)?;
        if sol.eigenvalue > target {
            lo = mid;
        } else {
            hi = mid;
        }
        let closer = (sol.eigenvalue - target).abs() < (best.eigenvalue - target).abs();
        if closer {
            best = sol;
        }
        if (best.eigenvalue - target).abs() <= 1e-10 * target && hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(MatchedShape { radius: best.radius, solution: best, floor, clamped: false })
}
