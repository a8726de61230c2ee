//! Decreasing rearrangement, convex symmetrization and the rearrangement
//! inequalities (Hardy–Littlewood, dominated rearrangement, Pólya–Szegő).

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use crate::anisotropy::NormSpec;
use crate::energy::dirichlet_energy;
use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;

/// Calibration constant of the Pólya–Szegő discretization budget
/// `ε_h = C_PS·h·E(f)`. Frozen regression value.
pub const POLYA_SZEGO_BUDGET: f64 = 5.0;

/// A right-continuous nonincreasing step function on `[0, |Ω|]`.
///
/// Step `k` has height `values[k]` on `[breakpoints[k], breakpoints[k+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecreasingProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl DecreasingProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidProfile("need K >= 1 steps and K+1 breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidProfile("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidProfile("breakpoints must be finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidProfile("values must be finite and nonnegative".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidProfile("values must be nonincreasing".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// Steps of equal width `width`.
    pub fn uniform(width: f64, values: Vec<f64>) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid("step width must be positive"));
        }
        let bp = (0..=values.len()).map(|k| k as f64 * width).collect();
        Self::new(bp, values)
    }

    pub fn constant(value: f64, measure: f64) -> Result<Self> {
        Self::new(vec![0.0, measure], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    pub fn total_measure(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn sup(&self) -> f64 {
        self.values[0]
    }

    fn step_index(&self, s: f64) -> usize {
        // last k with breakpoints[k] <= s
        let k = self.breakpoints.partition_point(|&b| b <= s);
        k.saturating_sub(1).min(self.values.len() - 1)
    }

    /// Right-continuous evaluation; clamped to the first/last step outside
    /// `[0, |Ω|)`.
    pub fn eval(&self, s: f64) -> f64 {
        self.values[self.step_index(s)]
    }

    /// `|{f* > t}|`.
    pub fn distribution(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v > t);
        self.breakpoints[k]
    }

    /// `∫₀^{|Ω|} (f*)^r`.
    pub fn integral_power(&self, r: f64) -> f64 {
        self.values.iter().zip(self.breakpoints.windows(2)).map(|(v, w)| v.powf(r) * (w[1] - w[0])).sum()
    }

    pub fn integral(&self) -> f64 {
        self.integral_power(1.0)
    }

    /// `∫₀^{s_k} f*` at every breakpoint (length `K + 1`).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.breakpoints.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (v, w) in self.values.iter().zip(self.breakpoints.windows(2)) {
            acc += v * (w[1] - w[0]);
            out.push(acc);
        }
        out
    }

    /// `∫₀^s f*` for any `s`.
    pub fn cumulative_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.total_measure());
        let k = self.step_index(s);
        let cum: f64 =
            self.values[..k].iter().zip(self.breakpoints.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum();
        cum + self.values[k] * (s - self.breakpoints[k])
    }

    /// Mean of `f*` over `[s − w/2, s + w/2] ∩ [0, |Ω|]`; `eval(s)` when
    /// the window is empty.
    pub fn window_mean(&self, s: f64, w: f64) -> f64 {
        let lo = (s - 0.5 * w).max(0.0);
        let hi = (s + 0.5 * w).min(self.total_measure());
        if hi - lo <= 0.0 {
            return self.eval(s);
        }
        (self.cumulative_at(hi) - self.cumulative_at(lo)) / (hi - lo)
    }

    /// Pointwise product on the merged breakpoints. Both factors are
    /// nonincreasing and nonnegative, so the product is too.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let bp = merged_breakpoints(self, other)?;
        let values = bp
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.eval(mid) * other.eval(mid)
            })
            .collect();
        Self::new(bp, values)
    }

    /// Equal-measure bins of consecutive steps, each replaced by its mean.
    /// Only valid for profiles with uniform step width.
    pub fn coarsen(&self, bins: usize) -> Result<Self> {
        let k = self.values.len();
        let bins = bins.clamp(1, k);
        let mut bp = Vec::with_capacity(bins + 1);
        let mut vals = Vec::with_capacity(bins);
        bp.push(0.0);
        for b in 0..bins {
            let lo = b * k / bins;
            let hi = (b + 1) * k / bins;
            let width = self.breakpoints[hi] - self.breakpoints[lo];
            let mass: f64 =
                (lo..hi).map(|i| self.values[i] * (self.breakpoints[i + 1] - self.breakpoints[i])).sum();
            vals.push(mass / width);
            bp.push(self.breakpoints[hi]);
        }
        // averaging can break monotonicity only through rounding
        for i in 1..vals.len() {
            if vals[i] > vals[i - 1] {
                vals[i] = vals[i - 1];
            }
        }
        Self::new(bp, vals)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.breakpoints.clone(), self.values.iter().map(|v| v * c).collect())
    }

    /// Two-column CSV `s,value`: one row per step start, plus the final
    /// breakpoint carrying the last value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,value")?;
        for (s, v) in self.breakpoints.iter().zip(&self.values) {
            writeln!(w, "{s:.16e},{v:.16e}")?;
        }
        writeln!(w, "{:.16e},{:.16e}", self.total_measure(), self.values.last().unwrap())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("line {}: {e}", n + 1)))?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with('s')) {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let mut next = || -> Result<f64> {
                it.next()
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| Error::Data(format!("line {}: expected `s,value`", n + 1)))
            };
            rows.push((next()?, next()?));
        }
        if rows.len() < 2 {
            return Err(Error::Data("profile CSV needs at least two rows".into()));
        }
        let bp = rows.iter().map(|r| r.0).collect();
        let vals = rows[..rows.len() - 1].iter().map(|r| r.1).collect();
        Self::new(bp, vals)
    }
}

fn merged_breakpoints(a: &DecreasingProfile, b: &DecreasingProfile) -> Result<Vec<f64>> {
    let (ta, tb) = (a.total_measure(), b.total_measure());
    if (ta - tb).abs() > 1e-10 * ta.max(tb) {
        return Err(invalid(format!("profiles live on different measure axes ({ta} vs {tb})")));
    }
    if a.breakpoints == b.breakpoints {
        return Ok(a.breakpoints.clone());
    }
    let mut bp: Vec<f64> = a.breakpoints.iter().chain(&b.breakpoints).copied().collect();
    bp.sort_by(f64::total_cmp);
    let tol = 1e-12 * ta;
    bp.dedup_by(|x, y| (*x - *y).abs() <= tol);
    let last = bp.len() - 1;
    bp[last] = ta.max(tb);
    Ok(bp)
}

/// `μ(t) = |{x ∈ Ω : |f(x)| > t}|`.
pub fn distribution_function(f: &ScalarField, t: f64) -> f64 {
    let count = f.mask().iter().zip(f.values()).filter(|(&m, v)| m && v.abs() > t).count();
    count as f64 * f.cell_measure()
}

fn rearrange(f: &ScalarField, data: &[f64]) -> DecreasingProfile {
    let mut cells: Vec<(usize, f64)> = f.masked_indices().into_iter().map(|k| (k, data[k].abs())).collect();
    // stable sort keeps cell-index order among ties
    cells.sort_by(|a, b| b.1.total_cmp(&a.1));
    let values = cells.into_iter().map(|(_, v)| v).collect();
    DecreasingProfile::uniform(f.cell_measure(), values)
        .expect("sorted finite magnitudes form a valid profile")
}

/// `f*`: the masked `|values|` sorted in decreasing order, one step of width
/// `h²` per cell. Ties keep cell-index order.
pub fn decreasing_rearrangement(f: &ScalarField) -> DecreasingProfile {
    rearrange(f, f.values())
}

/// `m*`, the decreasing rearrangement of the weight field.
pub fn weight_rearrangement(f: &ScalarField) -> DecreasingProfile {
    rearrange(f, f.weight())
}

/// Memoizes `m*` per domain (grid, mask and weight).
#[derive(Debug, Default)]
pub struct WeightCache {
    entries: Mutex<HashMap<u64, Arc<DecreasingProfile>>>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, f: &ScalarField) -> Arc<DecreasingProfile> {
        let key = f.domain_hash();
        let mut entries = self.entries.lock().unwrap();
        entries.entry(key).or_insert_with(|| Arc::new(weight_rearrangement(f))).clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Radius `R★ = (|Ω| / k_n)^{1/n}` of the Wulff shape with measure `|Ω|`.
pub fn symmetrized_radius(measure: f64, spec: &NormSpec) -> f64 {
    (measure / spec.wulff_measure()).powf(1.0 / spec.dim() as f64)
}

/// The Wulff shape `Ω★` of measure `measure` on a grid of spacing `h`: the
/// `round(measure/h²)` cells nearest the origin in `H°`.
pub fn symmetrized_domain(measure: f64, spec: &NormSpec, h: f64) -> Result<ScalarField> {
    let count = (measure / (h * h)).round() as usize;
    ScalarField::wulff_with_count(spec, count.max(1), h)
}

/// `f★(x) = f*(k_n H°(x)ⁿ)` on a grid of spacing `h` covering the Wulff
/// shape `Ω★` with `|Ω★| = |Ω|`. Weight is 1.
///
/// The continuous measure `k_n H°(x)ⁿ` is replaced by its lattice count:
/// the cell of rank `j` in `H°` order takes `f*((j + ½)h²)`. On the grid of
/// `f*` itself this makes `f★` exactly equimeasurable with `f`.
pub fn convex_symmetrand(profile: &DecreasingProfile, spec: &NormSpec, h: f64) -> Result<ScalarField> {
    let dom = symmetrized_domain(profile.total_measure(), spec, h)?;
    let values = by_rank(&dom, spec, profile);
    dom.with_values(values)
}

fn by_rank(dom: &ScalarField, spec: &NormSpec, profile: &DecreasingProfile) -> Vec<f64> {
    let cell = dom.cell_measure();
    let mut out = vec![0.0; dom.mask().len()];
    for (j, k) in dom.polar_order(spec).into_iter().enumerate() {
        out[k] = profile.eval((j as f64 + 0.5) * cell);
    }
    out
}

/// The symmetrized problem data on `Ω★`: values `u★` and weight `m★`.
pub fn symmetrize(f: &ScalarField, spec: &NormSpec) -> Result<ScalarField> {
    let u = convex_symmetrand(&decreasing_rearrangement(f), spec, f.h())?;
    let weight = by_rank(&u, spec, &weight_rearrangement(f));
    u.with_weight(weight)
}

/// `∫₀^{|Ω|} f*g* − ∫_Ω |fg|`; nonnegative by Hardy–Littlewood.
pub fn hardy_littlewood_gap(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    if !f.same_domain(g) {
        return Err(invalid("Hardy-Littlewood gap needs fields on the same grid and mask"));
    }
    let fs = decreasing_rearrangement(f);
    let gs = decreasing_rearrangement(g);
    let cell = f.cell_measure();
    let sorted: f64 = fs.values().iter().zip(gs.values()).map(|(a, b)| a * b).sum();
    let direct: f64 = f.values().iter().zip(g.values()).map(|(a, b)| (a * b).abs()).sum();
    Ok((sorted - direct) * cell)
}

/// Whether `g ≺ f`: `∫₀^s g* ≤ ∫₀^s f*` for all `s` and equal totals,
/// both within `1e-10` of the integral scale.
pub fn dominates(f: &DecreasingProfile, g: &DecreasingProfile) -> bool {
    let Ok(bp) = merged_breakpoints(f, g) else {
        return false;
    };
    let scale = f.integral().abs().max(g.integral().abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let mut cf = 0.0;
    let mut cg = 0.0;
    for w in bp.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        cf += f.eval(mid) * (w[1] - w[0]);
        cg += g.eval(mid) * (w[1] - w[0]);
        if cg > cf + tol {
            return false;
        }
    }
    (cf - cg).abs() <= tol
}

/// Outcome of [`convex_order_gap`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderGap {
    /// `∫h*F(f*) − ∫h*F(g*)`.
    Gap(f64),
    /// The precondition `h·g ≺ h·f` does not hold.
    Inapplicable,
}

/// `∫₀^{|Ω|} h* F(f*) − ∫₀^{|Ω|} h* F(g*)` with `F(t) = t^r`, `r > 1`.
pub fn convex_order_gap(
    h: &DecreasingProfile,
    f: &DecreasingProfile,
    g: &DecreasingProfile,
    r: f64,
) -> Result<OrderGap> {
    if !(r.is_finite() && r > 1.0) {
        return Err(invalid(format!("convex map t^r needs r > 1 for strict convexity, got {r}")));
    }
    if !dominates(&h.product(f)?, &h.product(g)?) {
        return Ok(OrderGap::Inapplicable);
    }
    let hf = h.product(&power(f, r)?)?;
    let hg = h.product(&power(g, r)?)?;
    Ok(OrderGap::Gap(hf.integral() - hg.integral()))
}

fn power(f: &DecreasingProfile, r: f64) -> Result<DecreasingProfile> {
    DecreasingProfile::new(f.breakpoints.clone(), f.values.iter().map(|v| v.powf(r)).collect())
}

/// Result of a discrete Pólya–Szegő comparison.
#[derive(Clone, Copy, Debug)]
pub struct PolyaSzego {
    pub energy: f64,
    pub symmetrized_energy: f64,
    /// `energy − symmetrized_energy`.
    pub gap: f64,
    /// Discretization budget `ε_h`; the contract is `gap ≥ −budget`.
    pub budget: f64,
}

/// `E(f) − E(f★)` on the shared forward-difference stencil.
///
/// Cell values of `f★` average `f*` over the measure band of anisotropic
/// width `2h` around the cell. Runs of (near-)ties in lattice data would
/// otherwise sample as a staircase whose finite-difference energy stays
/// O(1) above the continuum value as `h → 0`.
pub fn polya_szego_gap(f: &ScalarField, spec: &NormSpec, p: f64) -> Result<PolyaSzego> {
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(invalid("Polya-Szego comparison needs a nonnegative field"));
    }
    let energy = dirichlet_energy(f, spec, p)?;
    let profile = decreasing_rearrangement(f);
    let kn = spec.wulff_measure();
    let h = f.h();
    let star = symmetrized_domain(profile.total_measure(), spec, h)?.map_values(|x, y| {
        let r = spec.polar_unchecked(&[x, y]);
        // measure of the band of anisotropic width 2h around the cell
        let band = kn * ((r + h).powi(2) - (r - h).max(0.0).powi(2));
        profile.window_mean(kn * r * r, band)
    })?;
    let symmetrized_energy = dirichlet_energy(&star, spec, p)?;
    Ok(PolyaSzego {
        energy,
        symmetrized_energy,
        gap: energy - symmetrized_energy,
        budget: POLYA_SZEGO_BUDGET * f.h() * energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_cells() -> ScalarField {
        // three masked cells with h² = 0.5
        let h = 0.5f64.sqrt();
        ScalarField::new(h, 3, 1, vec![true; 3], vec![3.0, 1.0, 2.0], vec![1.0; 3]).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let f = three_cells();
        assert!((distribution_function(&f, 1.5) - 1.0).abs() < 1e-15);
        assert_eq!(distribution_function(&f, 3.0), 0.0);
        assert!((distribution_function(&f, 0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rearrangement_example() {
        let p = decreasing_rearrangement(&three_cells());
        assert_eq!(p.values(), &[3.0, 2.0, 1.0]);
        let bp = p.breakpoints();
        assert!((bp[1] - 0.5).abs() < 1e-15 && (bp[3] - 1.5).abs() < 1e-15);
        assert_eq!(p.eval(0.0), 3.0);
        assert_eq!(p.eval(bp[1]), 2.0);
        assert_eq!(p.eval(0.75), 2.0);
        assert_eq!(p.eval(1.5), 1.0);
    }

    #[test]
    fn constant_field_rearranges_to_constant() {
        let f = ScalarField::disk(1.0, 0.1).unwrap().map_values(|_, _| 2.5).unwrap();
        let p = decreasing_rearrangement(&f);
        assert!(p.values().iter().all(|&v| v == 2.5));
        assert!((p.total_measure() - f.domain_measure()).abs() < 1e-12);
    }

    #[test]
    fn norms_are_conserved() {
        let f = ScalarField::disk(1.0, 0.05).unwrap().map_values(|x, y| (x * 3.0).sin() + y * y).unwrap();
        let p = decreasing_rearrangement(&f);
        for r in [1.0, 2.0, 5.0] {
            let direct: f64 = f.values().iter().map(|v| v.abs().powf(r)).sum::<f64>() * f.cell_measure();
            assert!((p.integral_power(r) - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn profile_validation() {
        assert!(DecreasingProfile::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(DecreasingProfile::new(vec![0.0, 1.0, 1.0], vec![2.0, 1.0]).is_err());
        assert!(DecreasingProfile::new(vec![0.0, 1.0], vec![-1.0]).is_err());
        assert!(DecreasingProfile::new(vec![0.5, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn symmetrand_of_constant_is_constant() {
        let spec = NormSpec::ellipse(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let prof = DecreasingProfile::constant(1.7, 2.0).unwrap();
        let s = convex_symmetrand(&prof, &spec, 0.05).unwrap();
        assert!(s.masked_values().iter().all(|&v| v == 1.7));
        assert!((s.domain_measure() - 2.0).abs() < 0.05 * 0.05);
    }

    #[test]
    fn euclidean_symmetrand_is_schwarz() {
        let e = NormSpec::euclidean(2).unwrap();
        let f = ScalarField::square(1.0, 1.0 / 32.0)
            .unwrap()
            .map_values(|x, y| (1.0 - 4.0 * x * x) * (1.0 - 4.0 * y * y))
            .unwrap();
        let prof = decreasing_rearrangement(&f);
        let s = convex_symmetrand(&prof, &e, f.h()).unwrap();
        // same multiset as f*, laid out nonincreasing in |x|
        let mut v = s.masked_values();
        v.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(v, prof.values());
        let mut by_radius: Vec<(f64, f64)> = s
            .masked_indices()
            .into_iter()
            .map(|k| {
                let (x, y) = s.center(k % s.nx(), k / s.nx());
                (x * x + y * y, s.values()[k])
            })
            .collect();
        by_radius.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(by_radius.windows(2).all(|w| w[0].1 >= w[1].1 || w[0].0 == w[1].0));
        // and close to f*(π|x|²)
        let pi = std::f64::consts::PI;
        for &(r2, v) in &by_radius {
            assert!((v - prof.eval(pi * r2)).abs() < 0.05, "{v} at r² = {r2}");
        }
    }

    #[test]
    fn symmetrand_l2_norm_converges() {
        // ‖f★‖₂ vs ‖f*‖₂ at 128²; error bound 2h (frozen regression)
        let e = NormSpec::euclidean(2).unwrap();
        let h = 1.0 / 128.0;
        let f = ScalarField::square(1.0, h)
            .unwrap()
            .map_values(|x, y| (1.0 - 4.0 * x * x) * (1.0 - 4.0 * y * y))
            .unwrap();
        let prof = decreasing_rearrangement(&f);
        let s = convex_symmetrand(&prof, &e, h).unwrap();
        let a = prof.integral_power(2.0).sqrt();
        let b = s.weighted_norm(2.0);
        assert!((a - b).abs() <= 2.0 * h * a, "{a} vs {b}");
    }

    #[test]
    fn hardy_littlewood_examples() {
        let mk = |v: Vec<f64>| ScalarField::new(1.0, 2, 1, vec![true; 2], v, vec![1.0; 2]).unwrap();
        let f = mk(vec![1.0, 2.0]);
        let g = mk(vec![2.0, 1.0]);
        assert!((hardy_littlewood_gap(&f, &g).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(hardy_littlewood_gap(&f, &f).unwrap(), 0.0);
        let other = ScalarField::new(1.0, 3, 1, vec![true; 3], vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert!(hardy_littlewood_gap(&f, &other).is_err());
    }

    #[test]
    fn superlevel_indicator_special_case() {
        // ∫_{u>t} f ≤ ∫₀^{μ(t)} f*
        let dom = ScalarField::disk(1.0, 0.05).unwrap();
        let f = dom.map_values(|x, y| 1.0 + x - 0.5 * y).unwrap();
        let u = dom.map_values(|x, y| (x + 0.3).powi(2) + y * y).unwrap();
        for t in [0.1, 0.4, 0.9] {
            let ind: Vec<f64> = u.values().iter().map(|&v| f64::from(u8::from(v > t))).collect();
            let g = dom.with_values(ind).unwrap();
            let lhs: f64 =
                f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum::<f64>() * f.cell_measure();
            let rhs = decreasing_rearrangement(&f).cumulative_at(distribution_function(&u, t));
            assert!(lhs <= rhs + 1e-12);
            assert!(hardy_littlewood_gap(&f, &g).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn dominates_examples() {
        let f = DecreasingProfile::uniform(0.25, vec![4.0, 3.0, 1.0, 0.0]).unwrap();
        assert!(dominates(&f, &f));
        let mean = f.integral() / f.total_measure();
        let g = DecreasingProfile::constant(mean, 1.0).unwrap();
        assert!(dominates(&f, &g));
        assert!(!dominates(&g, &f));
        let bigger = DecreasingProfile::constant(mean * 1.01, 1.0).unwrap();
        assert!(!dominates(&f, &bigger));
    }

    #[test]
    fn convex_order_examples() {
        let one = DecreasingProfile::constant(1.0, 1.0).unwrap();
        let f = DecreasingProfile::uniform(0.25, vec![4.0, 3.0, 1.0, 0.5]).unwrap();
        assert_eq!(convex_order_gap(&one, &f, &f, 2.0).unwrap(), OrderGap::Gap(0.0));
        let mean = f.integral();
        let g = DecreasingProfile::constant(mean, 1.0).unwrap();
        let var = f.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() * 0.25;
        match convex_order_gap(&one, &f, &g, 2.0).unwrap() {
            OrderGap::Gap(x) => assert!((x - var).abs() < 1e-12, "{x} vs {var}"),
            OrderGap::Inapplicable => panic!("precondition holds"),
        }
        assert_eq!(convex_order_gap(&one, &g, &f, 2.0).unwrap(), OrderGap::Inapplicable);
        assert!(convex_order_gap(&one, &f, &g, 1.0).is_err());
    }

    #[test]
    fn window_mean_examples() {
        let p = DecreasingProfile::uniform(1.0, vec![3.0, 3.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.window_mean(2.0, 2.0), 2.0);
        assert_eq!(p.window_mean(0.5, 1.0), 3.0);
        // clipped at the ends of the axis
        assert_eq!(p.window_mean(4.0, 2.0), 1.0);
        assert_eq!(p.window_mean(1.5, 0.0), 3.0);
    }

    #[test]
    fn coarsen_preserves_integral() {
        let p = DecreasingProfile::uniform(0.1, (0..37).rev().map(|k| k as f64).collect()).unwrap();
        let c = p.coarsen(5).unwrap();
        assert_eq!(c.steps(), 5);
        assert!((c.integral() - p.integral()).abs() < 1e-12);
        assert_eq!(c.total_measure(), p.total_measure());
    }

    #[test]
    fn profile_csv_round_trip() {
        let p = DecreasingProfile::uniform(0.3, vec![2.0, 1.5, 1.5, 0.25]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(DecreasingProfile::read_csv(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn weight_cache_reuses_entries() {
        let cache = WeightCache::new();
        let f = ScalarField::disk(1.0, 0.1).unwrap();
        let a = cache.get(&f);
        let b = cache.get(&f.map_values(|x, _| x.abs()).unwrap());
        assert!(Arc::ptr_eq(&a, &b));
        let g = f.map_weight(|x, _| 2.0 + x).unwrap();
        let c = cache.get(&g);
        assert!(!Arc::ptr_eq(&a, &c));
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn polya_szego_on_cone() {
        let e = NormSpec::euclidean(2).unwrap();
        let sq = ScalarField::square(2.0, 1.0 / 32.0)
            .unwrap()
            .map_values(|x, y| (1.0 - x.abs().max(y.abs())).max(0.0))
            .unwrap();
        let ps = polya_szego_gap(&sq, &e, 2.0).unwrap();
        assert!(ps.gap > 0.0, "{ps:?}");
        let disk = ScalarField::disk(1.0, 1.0 / 64.0)
            .unwrap()
            .map_values(|x, y| (1.0 - (x * x + y * y).sqrt()).max(0.0))
            .unwrap();
        for p in [1.5, 2.0, 4.0] {
            let ps = polya_szego_gap(&disk, &e, p).unwrap();
            assert!(ps.gap >= -ps.budget, "p={p} {ps:?}");
            assert!(ps.gap.abs() <= ps.budget, "p={p} {ps:?}");
        }
    }
}
