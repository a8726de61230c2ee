//! Numerical verification of the symmetrization inequality chain for a
//! computed eigenfunction: Faber–Krahn, the Talenti-type differential
//! inequality, pointwise and cumulative comparison with the matched Wulff
//! eigenfunction, and reverse Hölder constants.
//!
//! Every tolerance is `TOLERANCE_FACTOR·h/R★` times the natural scale of
//! the compared quantity, with `R★` the radius of the symmetrized domain.

pub mod contour;

use rayon::prelude::*;
use serde::Serialize;

use crate::anisotropy::NormSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::radial::{
    matched_wulff_shape_with_slack, MatchedShape, RadialProblem, RadialProfile, RadialWeight,
};
use crate::rearrangement::{
    decreasing_rearrangement, symmetrize, symmetrized_radius, weight_rearrangement, DecreasingProfile,
};
use crate::solver::{minimize, EigenResult, SolveConfig};

pub use contour::{level_set_deficit, level_set_loops, LevelSetDeficit};

/// First-order discretization budget multiplier, calibrated on Wulff
/// equality cases at `h = 1/64` and frozen.
pub const TOLERANCE_FACTOR: f64 = 1.25;

/// Relative slack allowed in the Faber–Krahn comparison.
pub const FABER_KRAHN_SLACK: f64 = 0.02;

/// Dimensionless mesh size `h/R★`.
pub fn relative_mesh(domain: &ScalarField, spec: &NormSpec) -> f64 {
    domain.h() / symmetrized_radius(domain.domain_measure(), spec)
}

#[derive(Clone, Debug, Serialize)]
pub struct FaberKrahn {
    pub lambda_omega: f64,
    pub lambda_star: f64,
    /// `λ(Ω) − λ(Ω★)`.
    pub margin: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Solves on `domain` and on its symmetrization `Ω★` (weight `m★`) and
/// compares the eigenvalues.
pub fn faber_krahn_check(domain: &ScalarField, cfg: &SolveConfig) -> Result<FaberKrahn> {
    let u = minimize(domain, cfg)?;
    faber_krahn_with(domain, &u, cfg)
}

/// As [`faber_krahn_check`], reusing a solve on `domain`.
pub fn faber_krahn_with(domain: &ScalarField, u: &EigenResult, cfg: &SolveConfig) -> Result<FaberKrahn> {
    let star = symmetrize(domain, &cfg.norm)?;
    let v = minimize(&star, cfg)?;
    let margin = u.lambda - v.lambda;
    let slack = FABER_KRAHN_SLACK * v.lambda;
    Ok(FaberKrahn { lambda_omega: u.lambda, lambda_star: v.lambda, margin, slack, passed: margin >= -slack })
}

/// Extrapolates a quantity with first-order error from its values at mesh
/// sizes `h` and `h/2`.
pub fn richardson_first_order(coarse: f64, fine: f64) -> f64 {
    2.0 * fine - coarse
}

/// Margins of the Talenti-type inequality
/// `(−u*′(s))^{p−1} ≤ n^{−p} k_n^{−p/n} λ ‖u‖^{p−q} s^{p/n−p} ∫₀^s m*(u*)^{q−1}`.
#[derive(Clone, Debug, Serialize)]
pub struct TalentiCheck {
    pub s: Vec<f64>,
    /// `RHS(s) − (−u*′(s))^{p−1}`.
    pub margin: Vec<f64>,
    pub rhs: Vec<f64>,
    pub min_margin: f64,
    /// Extremes of `margin/RHS`.
    pub min_relative: f64,
    pub max_relative: f64,
    /// Relative tolerance: pass iff `margin ≥ −tolerance·RHS` everywhere.
    pub tolerance: f64,
    pub passed: bool,
}

/// Width, in steps, of the averaging window for `−u*′`: lattice level-set
/// areas fluctuate, so the profile is differenced between adjacent windows.
pub fn talenti_window(steps: usize) -> usize {
    (1.5 * (steps as f64).powf(2.0 / 3.0)).round().max(1.0) as usize
}

/// Talenti-type check for a positive eigenfunction with eigenvalue
/// `lambda`; `n = 2`. One window is excluded at each end of `[0, |Ω|]`.
pub fn talenti_check(
    u: &ScalarField,
    lambda: f64,
    spec: &NormSpec,
    p: f64,
    q: f64,
    tolerance: f64,
) -> Result<TalentiCheck> {
    let w = talenti_window(u.masked_count());
    talenti_check_windowed(u, lambda, spec, p, q, tolerance, w)
}

/// [`talenti_check`] with an explicit window width in steps.
pub fn talenti_check_windowed(
    u: &ScalarField,
    lambda: f64,
    spec: &NormSpec,
    p: f64,
    q: f64,
    tolerance: f64,
    w: usize,
) -> Result<TalentiCheck> {
    let ustar = decreasing_rearrangement(u);
    let mstar = weight_rearrangement(u);
    let steps = ustar.steps();
    let w = w.max(1);
    let cell = ustar.breakpoints()[1];
    let n: f64 = 2.0;
    let kn = spec.wulff_measure();
    let norm = u.weighted_norm(q);
    let coeff = n.powf(-p) * kn.powf(-p / n) * lambda * norm.powf(p - q);
    // prefix sums of u* and m*(u*)^{q−1}
    let v = ustar.values();
    let mut pu = vec![0.0; steps + 1];
    let mut pm = vec![0.0; steps + 1];
    for k in 0..steps {
        pu[k + 1] = pu[k] + v[k];
        pm[k + 1] = pm[k] + mstar.values()[k] * v[k].powf(q - 1.0) * cell;
    }
    let mut out = TalentiCheck {
        s: Vec::new(),
        margin: Vec::new(),
        rhs: Vec::new(),
        min_margin: f64::INFINITY,
        min_relative: f64::INFINITY,
        max_relative: f64::NEG_INFINITY,
        tolerance,
        passed: true,
    };
    let start = w.max(3);
    if 2 * start + 1 > steps {
        return Err(invalid("too few cells for the Talenti check"));
    }
    for k in start..=steps - w {
        // narrower near the origin, where the profile bends
        let w = w.min(k / 2).max(1);
        let s = k as f64 * cell;
        let before = (pu[k] - pu[k - w]) / w as f64;
        let after = (pu[k + w] - pu[k]) / w as f64;
        let slope = ((before - after) / (w as f64 * cell)).max(0.0);
        let rhs = coeff * s.powf(p / n - p) * pm[k];
        let margin = rhs - slope.powf(p - 1.0);
        let rel = margin / rhs;
        out.s.push(s);
        out.margin.push(margin);
        out.rhs.push(rhs);
        out.min_margin = out.min_margin.min(margin);
        out.min_relative = out.min_relative.min(rel);
        out.max_relative = out.max_relative.max(rel);
    }
    out.passed = out.min_relative >= -tolerance;
    Ok(out)
}

/// `z*(s) = ρ((s/k_n)^{1/n})` sampled at the step midpoints of
/// `breakpoints`, zero beyond `|W_R|`.
pub fn wulff_profile_on(
    profile: &RadialProfile,
    spec: &NormSpec,
    breakpoints: &[f64],
) -> Result<DecreasingProfile> {
    let kn = spec.wulff_measure();
    let n = spec.dim() as f64;
    let mut values: Vec<f64> =
        breakpoints.windows(2).map(|w| profile.eval((0.5 * (w[0] + w[1]) / kn).powf(1.0 / n))).collect();
    for k in 1..values.len() {
        values[k] = values[k].min(values[k - 1]);
    }
    DecreasingProfile::new(breakpoints.to_vec(), values)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointwiseCheck {
    pub measure_cut: f64,
    pub s: Vec<f64>,
    /// `u*(s)/u*(0) − z*(s)/z*(0)`.
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub max_margin: f64,
    /// `u*(|Ω★_λ|)/u*(0)`, the endpoint value.
    pub endpoint: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `min_{s ≤ cut} u*(s) − z*(s)` after rescaling both to unit sup, on the
/// step midpoints of `u*`. Returns `+∞` margins when `cut = 0`.
pub fn pointwise_comparison_check(
    ustar: &DecreasingProfile,
    zstar: &DecreasingProfile,
    measure_cut: f64,
    tolerance: f64,
) -> Result<PointwiseCheck> {
    let (u0, z0) = (ustar.sup(), zstar.sup());
    if !(u0 > 0.0 && z0 > 0.0) {
        return Err(Error::InvalidProfile("comparison needs nonzero profiles".into()));
    }
    let mut out = PointwiseCheck {
        measure_cut,
        s: Vec::new(),
        margin: Vec::new(),
        min_margin: f64::INFINITY,
        max_margin: f64::NEG_INFINITY,
        endpoint: ustar.eval(measure_cut) / u0,
        tolerance,
        passed: true,
    };
    for w in ustar.breakpoints().windows(2) {
        let s = 0.5 * (w[0] + w[1]);
        if s > measure_cut {
            break;
        }
        let m = ustar.eval(s) / u0 - zstar.eval(s) / z0;
        out.s.push(s);
        out.margin.push(m);
        out.min_margin = out.min_margin.min(m);
        out.max_margin = out.max_margin.max(m);
    }
    out.passed = out.min_margin >= -tolerance;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationCheck {
    pub r: f64,
    pub s: Vec<f64>,
    /// `∫₀^s m*(z*)^r − ∫₀^s m*(u*)^r` at the breakpoints.
    pub margin: Vec<f64>,
    pub min_margin: f64,
    pub max_margin: f64,
    /// `∫₀^{|Ω|} m*(z*)^r`.
    pub total: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Cumulative domination of `m*(u*)^r` by `m*(z*)^r` after rescaling `u*`
/// so that the weighted `q`-integrals on the measure axis agree. `z*` is
/// zero beyond its support. All profiles share the breakpoints of `u*`.
pub fn cumulative_domination_check(
    ustar: &DecreasingProfile,
    zstar: &DecreasingProfile,
    mstar: &DecreasingProfile,
    r: f64,
    q: f64,
    tolerance: f64,
) -> Result<DominationCheck> {
    if ustar.breakpoints() != zstar.breakpoints() || ustar.breakpoints() != mstar.breakpoints() {
        return Err(invalid("domination check needs profiles on common breakpoints"));
    }
    if r < q {
        return Err(invalid(format!("domination needs r >= q, got r = {r} < q = {q}")));
    }
    let widths: Vec<f64> = ustar.breakpoints().windows(2).map(|w| w[1] - w[0]).collect();
    let integral = |f: &DecreasingProfile, e: f64| -> f64 {
        f.values().iter().zip(mstar.values()).zip(&widths).map(|((v, m), w)| m * v.powf(e) * w).sum()
    };
    let (iu, iz) = (integral(ustar, q), integral(zstar, q));
    if !(iu > 0.0 && iz > 0.0) {
        return Err(Error::InvalidProfile("domination needs nonzero profiles".into()));
    }
    let scale = (iz / iu).powf(1.0 / q);
    let mut out = DominationCheck {
        r,
        s: Vec::with_capacity(widths.len()),
        margin: Vec::with_capacity(widths.len()),
        min_margin: f64::INFINITY,
        max_margin: f64::NEG_INFINITY,
        total: integral(zstar, r),
        tolerance,
        passed: true,
    };
    let (mut cu, mut cz) = (0.0, 0.0);
    for (k, w) in widths.iter().enumerate() {
        let m = mstar.values()[k];
        cu += m * (scale * ustar.values()[k]).powf(r) * w;
        cz += m * zstar.values()[k].powf(r) * w;
        let margin = cz - cu;
        out.s.push(ustar.breakpoints()[k + 1]);
        out.margin.push(margin);
        out.min_margin = out.min_margin.min(margin);
        out.max_margin = out.max_margin.max(margin);
    }
    out.passed = out.min_margin >= -tolerance * out.total;
    Ok(out)
}

/// Reverse Hölder constants of the matched Wulff eigenfunction.
#[derive(Clone, Debug, Serialize)]
pub struct ChitiEntry {
    pub r: f64,
    /// `‖z‖_r / ‖z‖_q`, defined for `r ≥ q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_i: Option<f64>,
    /// `‖z‖_∞ / ‖z‖_r`.
    pub c_ii: f64,
    /// `C_i‖u‖_q − ‖u‖_r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack_i: Option<f64>,
    /// `C_ii‖u‖_r − ‖u‖_∞`.
    pub slack_ii: f64,
    /// `‖u‖_r/‖u‖_∞ − ‖z‖_r/‖z‖_∞`.
    pub slack_scale_free: f64,
    pub passed: bool,
}

/// `‖z‖_{L^r(W_R, m★)}` by radial quadrature.
pub fn radial_norm(problem: &RadialProblem, profile: &RadialProfile, r: f64) -> f64 {
    let pr = RadialProblem { q: r, ..problem.clone() };
    crate::radial::profile_norm_power(&pr, profile).powf(1.0 / r)
}

/// `{C_i(r), C_ii(r)}` for each `r` (only `C_ii(1)` when `r_list` is
/// empty), checked against `u` with relative tolerance `tolerance`.
pub fn chiti_constants(
    problem: &RadialProblem,
    profile: &RadialProfile,
    u: &ScalarField,
    q: f64,
    r_list: &[f64],
    tolerance: f64,
) -> Result<Vec<ChitiEntry>> {
    let zq = radial_norm(problem, profile, q);
    let zinf = profile.rho.iter().fold(0.0f64, |a, &v| a.max(v));
    if !(zq > 0.0 && zinf > 0.0) {
        return Err(Error::InvalidProfile("zero matched eigenfunction".into()));
    }
    let uq = u.weighted_norm(q);
    let uinf = u.sup_norm();
    let rs: Vec<f64> = if r_list.is_empty() { vec![1.0] } else { r_list.to_vec() };
    let mut out = Vec::with_capacity(rs.len());
    for &r in &rs {
        if !(r.is_finite() && r >= 1.0) {
            return Err(invalid(format!("Chiti exponents must be >= 1, got {r}")));
        }
        let zr = radial_norm(problem, profile, r);
        let ur = u.weighted_norm(r);
        let c_ii = zinf / zr;
        let c_i = (r >= q).then(|| zr / zq);
        let slack_i = c_i.map(|c| c * uq - ur);
        let slack_ii = c_ii * ur - uinf;
        let slack_scale_free = ur / uinf - zr / zinf;
        let passed = slack_i.is_none_or(|s| s >= -tolerance * ur)
            && slack_ii >= -tolerance * uinf
            && slack_scale_free >= -tolerance * ur / uinf;
        out.push(ChitiEntry { r, c_i, c_ii, slack_i, slack_ii, slack_scale_free, passed });
    }
    Ok(out)
}

/// Profiles on the common measure axis (step midpoints of `u*`).
#[derive(Clone, Debug, Serialize)]
pub struct ProfileTable {
    pub s: Vec<f64>,
    pub u_star: Vec<f64>,
    pub z_star: Vec<f64>,
    pub m_star: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub norm: NormSpec,
    pub p: f64,
    pub q: f64,
    pub h: f64,
    pub measure: f64,
    pub lambda_omega: f64,
    /// Eigenvalue of the full symmetrized Wulff shape, radial solve.
    pub lambda_star: f64,
    pub r_star: f64,
    pub r_lambda: f64,
    pub matched_measure: f64,
    /// `λ(Ω)` sat below `lambda_star` within the admissibility slack and the
    /// matched shape was clamped to the full symmetrized shape.
    pub clamped: bool,
    pub solver_converged: bool,
    pub weak_residual: f64,
    pub faber_krahn: FaberKrahn,
    pub talenti: TalentiCheck,
    pub pointwise: PointwiseCheck,
    pub domination: Vec<DominationCheck>,
    pub chiti: Vec<ChitiEntry>,
    pub level_sets: Vec<LevelSetDeficit>,
    pub tolerance: f64,
    pub notes: Vec<String>,
    pub passed: bool,
    #[serde(skip)]
    pub profiles: ProfileTable,
    #[serde(skip)]
    pub eigenfunction: ScalarField,
    #[serde(skip)]
    pub matched_profile: RadialProfile,
}

/// Options for [`build_comparison`].
#[derive(Clone, Debug)]
pub struct ComparisonOptions {
    /// Exponents for the domination check and the Chiti constants.
    pub r_list: Vec<f64>,
    /// Number of level sets sampled for isoperimetric deficits.
    pub levels: usize,
    pub radial_nodes: usize,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self { r_list: Vec::new(), levels: 8, radial_nodes: crate::radial::DEFAULT_NODES }
    }
}

/// Solves on `domain`, builds the matched Wulff shape `Ω★_λ` and runs
/// every check.
pub fn build_comparison(
    domain: &ScalarField,
    cfg: &SolveConfig,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    let spec = &cfg.norm;
    let (p, q) = (cfg.p, cfg.q);
    let u = minimize(domain, cfg)?;
    let faber_krahn = faber_krahn_with(domain, &u, cfg)?;
    let field = &u.field;

    let ustar = decreasing_rearrangement(field);
    let mstar = weight_rearrangement(field);
    let measure = ustar.total_measure();
    let r_star = symmetrized_radius(measure, spec);
    let h_rel = domain.h() / r_star;
    let tol = TOLERANCE_FACTOR * h_rel;

    let weight = RadialWeight::rearranged(mstar.clone(), spec)?;
    let problem = RadialProblem::for_norm(p, q, spec, weight)?.with_nodes(opts.radial_nodes)?;
    // the grid eigenvalue may sit below the radial one by the boundary
    // discretization error: one cell in radius
    let exponent = p + spec.dim() as f64 * (p / q - 1.0);
    let slack = 1.0 - (1.0 - h_rel).powf(exponent);
    let matched: MatchedShape = matched_wulff_shape_with_slack(u.lambda, &problem, r_star, slack)?;
    let r_lambda = matched.radius;
    let kn = spec.wulff_measure();
    let matched_measure = kn * r_lambda.powi(spec.dim() as i32);
    let zprof = &matched.solution.profile;
    let zstar = wulff_profile_on(zprof, spec, ustar.breakpoints())?;

    let talenti = talenti_check(field, u.lambda, spec, p, q, tol)?;
    let pointwise = pointwise_comparison_check(&ustar, &zstar, matched_measure.min(measure), tol)?;
    let mut rs = vec![q];
    rs.extend(opts.r_list.iter().copied().filter(|&r| r > q));
    let domination = rs
        .par_iter()
        .map(|&r| cumulative_domination_check(&ustar, &zstar, &mstar, r, q, tol))
        .collect::<Result<Vec<_>>>()?;
    let chiti = chiti_constants(&problem, zprof, field, q, &opts.r_list, tol)?;
    let sup = field.sup_norm();
    let level_sets = (1..=opts.levels)
        .map(|k| {
            let t = sup * k as f64 / (opts.levels + 1) as f64;
            level_set_deficit(field, spec, t)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mids: Vec<f64> = ustar.breakpoints().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let profiles = ProfileTable {
        s: mids,
        u_star: ustar.values().to_vec(),
        z_star: zstar.values().to_vec(),
        m_star: mstar.values().to_vec(),
    };
    let mut notes = vec!["differential inequality evaluated with the factor s^(p/n-p)".to_string()];
    if matched.clamped {
        notes.push(format!(
            "grid eigenvalue {} below full-shape eigenvalue {}; matched shape clamped to R* = {}",
            u.lambda, matched.floor, r_star
        ));
    }
    if !u.converged {
        notes.push("field solver hit the iteration limit".to_string());
    }
    let passed = faber_krahn.passed
        && talenti.passed
        && pointwise.passed
        && domination.iter().all(|d| d.passed)
        && chiti.iter().all(|c| c.passed);
    Ok(ComparisonReport {
        norm: spec.clone(),
        p,
        q,
        h: domain.h(),
        measure,
        lambda_omega: u.lambda,
        lambda_star: matched.floor,
        r_star,
        r_lambda,
        matched_measure,
        clamped: matched.clamped,
        solver_converged: u.converged,
        weak_residual: u.weak_residual,
        faber_krahn,
        talenti,
        pointwise,
        domination,
        chiti,
        level_sets,
        tolerance: tol,
        notes,
        passed,
        profiles,
        eigenfunction: u.field,
        matched_profile: matched.solution.profile,
    })
}
