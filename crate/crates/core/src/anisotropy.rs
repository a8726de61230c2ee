//! Finsler norms `H`, their polars `H°`, Wulff shapes and anisotropic perimeter.
//!
//! Three families are supported, each with closed-form gradient, polar and
//! Wulff measure:
//!
//! * Euclidean: `H(ξ) = |ξ|`
//! * Ellipse: `H(ξ) = sqrt(ξ·Aξ)` for a symmetric positive-definite `A`
//! * Power: `H(ξ) = (Σ|ξᵢ|^s)^{1/s}` for `1 < s < ∞`
//!
//! Power norms with `s < 2` are not `C²` on the coordinate axes. Callers that
//! need second-order smoothness should keep their inputs away from the axes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Euclidean,
    Ellipse { matrix: Vec<f64>, inverse: Vec<f64>, det: f64, eig_min: f64, eig_max: f64 },
    Power { s: f64, conj: f64 },
}

/// A concrete anisotropy on `ℝⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormConfig", into = "NormConfig")]
pub struct NormSpec {
    kind: Kind,
    dim: usize,
}

/// Serialized form of a [`NormSpec`]: `{variant, matrix | exponent, dimension}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormConfig {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    pub dimension: usize,
}

impl TryFrom<NormConfig> for NormSpec {
    type Error = Error;

    fn try_from(cfg: NormConfig) -> Result<Self> {
        match cfg.variant.to_ascii_lowercase().as_str() {
            "euclidean" => NormSpec::euclidean(cfg.dimension),
            "ellipse" => {
                let m = cfg.matrix.ok_or_else(|| invalid("ellipse norm requires `matrix` (row-major)"))?;
                NormSpec::ellipse(cfg.dimension, &m)
            }
            "power" => {
                let s = cfg.exponent.ok_or_else(|| invalid("power norm requires `exponent`"))?;
                NormSpec::power(cfg.dimension, s)
            }
            other => {
                Err(invalid(format!("unknown norm variant `{other}` (expected euclidean, ellipse or power)")))
            }
        }
    }
}

impl From<NormSpec> for NormConfig {
    fn from(spec: NormSpec) -> Self {
        let dimension = spec.dim;
        match spec.kind {
            Kind::Euclidean => {
                NormConfig { variant: "euclidean".into(), matrix: None, exponent: None, dimension }
            }
            Kind::Ellipse { matrix, .. } => {
                NormConfig { variant: "ellipse".into(), matrix: Some(matrix), exponent: None, dimension }
            }
            Kind::Power { s, .. } => {
                NormConfig { variant: "power".into(), matrix: None, exponent: Some(s), dimension }
            }
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

/// Volume of the Euclidean unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

fn power_sum(v: &[f64], s: f64) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = v.iter().map(|x| (x.abs() / scale).powf(s)).sum();
    scale * sum.powf(1.0 / s)
}

fn quad_form(a: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

fn mat_vec_into(a: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        out[i] = (0..n).map(|j| a[i * n + j] * v[j]).sum();
    }
}

impl NormSpec {
    pub fn euclidean(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { kind: Kind::Euclidean, dim: n })
    }

    /// `H(ξ) = sqrt(ξ·Aξ)` with `A` given row-major. `A` must be symmetric
    /// positive definite.
    pub fn ellipse(n: usize, matrix: &[f64]) -> Result<Self> {
        check_dim(n)?;
        if matrix.len() != n * n {
            return Err(invalid(format!("ellipse matrix needs {} entries, got {}", n * n, matrix.len())));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(invalid("ellipse matrix has non-finite entries"));
        }
        let a = DMatrix::from_row_slice(n, n, matrix);
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * a.amax().max(1.0) {
            return Err(invalid("ellipse matrix must be symmetric"));
        }
        let eig = a.clone().symmetric_eigen();
        let eig_min = eig.eigenvalues.min();
        let eig_max = eig.eigenvalues.max();
        if eig_min <= 0.0 {
            return Err(invalid(format!(
                "ellipse matrix must be positive definite (smallest eigenvalue {eig_min})"
            )));
        }
        let chol = a.clone().cholesky().ok_or_else(|| invalid("ellipse matrix is not positive definite"))?;
        let inv = chol.inverse();
        let inverse: Vec<f64> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect();
        Ok(Self {
            kind: Kind::Ellipse { matrix: matrix.to_vec(), inverse, det: a.determinant(), eig_min, eig_max },
            dim: n,
        })
    }

    /// `H(ξ) = (Σ|ξᵢ|^s)^{1/s}`, `1 < s < ∞`.
    pub fn power(n: usize, s: f64) -> Result<Self> {
        check_dim(n)?;
        if !(s.is_finite() && s > 1.0) {
            return Err(invalid(format!("power-norm exponent must satisfy 1 < s < inf, got {s}")));
        }
        Ok(Self { kind: Kind::Power { s, conj: s / (s - 1.0) }, dim: n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            Kind::Euclidean => "euclidean",
            Kind::Ellipse { .. } => "ellipse",
            Kind::Power { .. } => "power",
        }
    }

    fn check_vec(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(invalid(format!("vector has length {}, norm dimension is {}", v.len(), self.dim)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("vector has non-finite components"));
        }
        Ok(())
    }

    /// `H(ξ)`.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        self.check_vec(xi)?;
        Ok(self.eval_unchecked(xi))
    }

    /// `H(ξ)` without validation. `xi.len()` must equal the dimension.
    #[inline]
    pub fn eval_unchecked(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            Kind::Euclidean => xi.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Kind::Ellipse { matrix, .. } => quad_form(matrix, xi).max(0.0).sqrt(),
            Kind::Power { s, .. } => power_sum(xi, *s),
        }
    }

    /// `∇H(ξ)`; undefined at `ξ = 0`.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(xi)?;
        if xi.iter().all(|&x| x == 0.0) {
            return Err(Error::SingularPoint);
        }
        let mut out = vec![0.0; self.dim];
        self.grad_into(xi, &mut out);
        Ok(out)
    }

    /// Writes `∇H(ξ)` into `out` and returns `H(ξ)`. For `ξ = 0` the output
    /// is zeroed.
    #[inline]
    pub fn grad_into(&self, xi: &[f64], out: &mut [f64]) -> f64 {
        let h = self.eval_unchecked(xi);
        if h == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return 0.0;
        }
        match &self.kind {
            Kind::Euclidean => {
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = x / h;
                }
            }
            Kind::Ellipse { matrix, .. } => {
                mat_vec_into(matrix, xi, out);
                out.iter_mut().for_each(|o| *o /= h);
            }
            Kind::Power { s, .. } => {
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = x.signum() * (x.abs() / h).powf(s - 1.0);
                }
            }
        }
        h
    }

    /// `H°(x)`, the polar (dual) norm.
    pub fn polar(&self, x: &[f64]) -> Result<f64> {
        self.check_vec(x)?;
        Ok(self.polar_unchecked(x))
    }

    #[inline]
    pub fn polar_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Kind::Ellipse { inverse, .. } => quad_form(inverse, x).max(0.0).sqrt(),
            Kind::Power { conj, .. } => power_sum(x, *conj),
        }
    }

    /// `∇H°(x)`; undefined at `x = 0`.
    pub fn polar_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::SingularPoint);
        }
        let h = self.polar_unchecked(x);
        let out = match &self.kind {
            Kind::Euclidean => x.iter().map(|v| v / h).collect(),
            Kind::Ellipse { inverse, .. } => {
                let mut out = vec![0.0; self.dim];
                mat_vec_into(inverse, x, &mut out);
                out.iter_mut().for_each(|o| *o /= h);
                out
            }
            Kind::Power { conj, .. } => {
                x.iter().map(|v| v.signum() * (v.abs() / h).powf(conj - 1.0)).collect()
            }
        };
        Ok(out)
    }

    /// `k_n = |{H° < 1}|`, the measure of the unit Wulff shape.
    pub fn wulff_measure(&self) -> f64 {
        let n = self.dim;
        match &self.kind {
            Kind::Euclidean => unit_ball_volume(n),
            Kind::Ellipse { det, .. } => unit_ball_volume(n) * det.sqrt(),
            Kind::Power { conj, .. } => {
                let nf = n as f64;
                2f64.powf(nf) * gamma(1.0 + 1.0 / conj).powf(nf) / gamma(1.0 + nf / conj)
            }
        }
    }

    /// Constants `0 < γ ≤ δ` with `γ|ξ| ≤ H(ξ) ≤ δ|ξ|`.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Euclidean => (1.0, 1.0),
            Kind::Ellipse { eig_min, eig_max, .. } => (eig_min.sqrt(), eig_max.sqrt()),
            Kind::Power { s, .. } => {
                let k = (self.dim as f64).powf((1.0 / s - 0.5).abs());
                if *s >= 2.0 {
                    (1.0 / k, 1.0)
                } else {
                    (1.0, k)
                }
            }
        }
    }

    /// Half-extents of the bounding box of the Wulff shape `{H° < R}`.
    ///
    /// The support function of `{H° < 1}` is `H`, so the extent along `eᵢ`
    /// is `R·H(eᵢ)`.
    pub fn wulff_half_extents(&self, radius: f64) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let mut e = vec![0.0; self.dim];
                e[i] = 1.0;
                radius * self.eval_unchecked(&e)
            })
            .collect()
    }
}

/// A closed planar polygon, stored counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

impl Polygon {
    /// Builds a polygon from its vertices (either orientation; clockwise
    /// input is reversed). Rejects self-intersecting or degenerate input.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("polygon has non-finite vertices"));
        }
        let mut poly = Self { vertices };
        let distinct = poly.distinct_vertices();
        if distinct.len() < 3 {
            return Err(invalid("polygon needs at least three distinct vertices"));
        }
        if !Self::is_simple(&distinct) {
            return Err(invalid("polygon is self-intersecting"));
        }
        let area = poly.signed_area();
        if area == 0.0 {
            return Err(invalid("polygon has zero area"));
        }
        if area < 0.0 {
            poly.vertices.reverse();
        }
        Ok(poly)
    }

    /// Regular polygon with `sides` vertices on the circle of radius `radius`.
    pub fn regular(sides: usize, radius: f64) -> Result<Self> {
        let verts = (0..sides)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / sides as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Self::new(verts)
    }

    /// Inscribed polygon of the Wulff shape `{H° < radius}` with vertices on
    /// its boundary at equally spaced angles.
    pub fn wulff(spec: &NormSpec, radius: f64, sides: usize) -> Result<Self> {
        if spec.dim() != 2 {
            return Err(invalid("Wulff polygon requires a planar norm"));
        }
        let verts = (0..sides)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / sides as f64;
                let dir = [t.cos(), t.sin()];
                let r = radius / spec.polar_unchecked(&dir);
                [r * dir[0], r * dir[1]]
            })
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn distinct_vertices(&self) -> Vec<[f64; 2]> {
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(self.vertices.len());
        for &v in &self.vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        out
    }

    fn is_simple(v: &[[f64; 2]]) -> bool {
        let n = v.len();
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Shoelace area; positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// `P_H(Γ) = Σ_e H(ν_e)·|e|` with `ν_e` the outward Euclidean unit normal.
pub fn anisotropic_perimeter(spec: &NormSpec, poly: &Polygon) -> Result<f64> {
    if spec.dim() != 2 {
        return Err(invalid("polygon perimeter is only defined for planar norms"));
    }
    // H is 1-homogeneous, so H(ν)|e| = H(|e|ν) = H((dy, -dx)) for a ccw edge.
    Ok(poly
        .edges()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| spec.eval_unchecked(&[b[1] - a[1], a[0] - b[0]]))
        .sum())
}

/// `P_H(Γ) − n k_n^{1/n} |Γ|^{1−1/n}` for `n = 2`. Nonnegative by the
/// anisotropic isoperimetric inequality, zero on Wulff shapes.
pub fn isoperimetric_deficit(spec: &NormSpec, poly: &Polygon) -> Result<f64> {
    let per = anisotropic_perimeter(spec, poly)?;
    Ok(per - 2.0 * (spec.wulff_measure() * poly.area()).sqrt())
}
