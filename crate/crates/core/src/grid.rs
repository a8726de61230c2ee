//! Masked uniform 2D grids carrying a scalar field and a weight.
//!
//! Grids are centered at the origin: cell `(i, j)` has center
//! `((i − (nx−1)/2)·h, (j − (ny−1)/2)·h)`. Built-in shapes use an odd number
//! of cells per axis so centers sit on integer multiples of `h`, and mask the
//! cells whose centers lie at least [`BOUNDARY_OFFSET`]`·h` inside the shape.
//! Values outside the mask are zero (homogeneous Dirichlet by extension).

use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::anisotropy::NormSpec;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    h: f64,
    nx: usize,
    ny: usize,
    mask: Vec<bool>,
    values: Vec<f64>,
    weight: Vec<f64>,
}

/// Minimum depth of a masked cell center below the boundary, in units of `h`.
///
/// With zero extension the effective Dirichlet boundary sits at the first
/// unmasked centers. Straight node-aligned edges put those on the boundary
/// and are unaffected by any offset in `(0, 1)`; on curved boundaries they
/// overshoot by about `h/3` on average, which `3h/8` cancels (calibrated on
/// disk eigenvalues for `(p, q) = (2, 2)` and `(3, 1.5)`).
pub const BOUNDARY_OFFSET: f64 = 0.375;

impl ScalarField {
    /// Builds a field from full-grid arrays (length `nx·ny`, row-major with
    /// `x` fastest). Values and weights outside the mask are zeroed.
    pub fn new(
        h: f64,
        nx: usize,
        ny: usize,
        mask: Vec<bool>,
        mut values: Vec<f64>,
        mut weight: Vec<f64>,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("grid spacing must be positive, got {h}")));
        }
        let n = nx * ny;
        if mask.len() != n || values.len() != n || weight.len() != n {
            return Err(invalid(format!("grid arrays must have nx*ny = {n} entries")));
        }
        if !mask.iter().any(|&m| m) {
            return Err(invalid("mask selects no cells"));
        }
        for k in 0..n {
            if mask[k] {
                if !values[k].is_finite() {
                    return Err(Error::Data(format!("non-finite value at cell {k}")));
                }
                if !(weight[k].is_finite() && weight[k] > 0.0) {
                    return Err(Error::Data(format!(
                        "weight must be positive and finite, got {} at cell {k}",
                        weight[k]
                    )));
                }
            } else {
                values[k] = 0.0;
                weight[k] = 0.0;
            }
        }
        Ok(Self { h, nx, ny, mask, values, weight })
    }

    /// Field on a domain given by `inside(x, y)`, with unit weight and zero
    /// values.
    pub fn from_predicate(h: f64, half_extent: [f64; 2], inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("grid spacing must be positive, got {h}")));
        }
        // odd cell counts with at least one empty ring of cells
        let nx = 2 * (half_extent[0] / h).ceil() as usize + 3;
        let ny = 2 * (half_extent[1] / h).ceil() as usize + 3;
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = center_of(h, nx, ny, i, j);
                mask[j * nx + i] = inside(x, y);
            }
        }
        let n = nx * ny;
        let weight = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Self::new(h, nx, ny, mask, vec![0.0; n], weight)
    }

    pub fn disk(radius: f64, h: f64) -> Result<Self> {
        positive("radius", radius)?;
        let r = radius - BOUNDARY_OFFSET * h;
        Self::from_predicate(h, [radius, radius], |x, y| x * x + y * y < r * r)
    }

    pub fn square(side: f64, h: f64) -> Result<Self> {
        Self::rectangle(side, side, h)
    }

    /// Axis-aligned rectangle `[−a/2, a/2] × [−b/2, b/2]`.
    pub fn rectangle(a: f64, b: f64, h: f64) -> Result<Self> {
        positive("rectangle width", a)?;
        positive("rectangle height", b)?;
        let d = BOUNDARY_OFFSET * h;
        let (ha, hb) = (a / 2.0 - d, b / 2.0 - d);
        Self::from_predicate(h, [a / 2.0, b / 2.0], |x, y| x.abs() < ha && y.abs() < hb)
    }

    /// Wulff shape `{H°(x) < radius}`, represented by the sublevel set of
    /// `H°` whose area deficit matches a Euclidean inward offset of
    /// `BOUNDARY_OFFSET·h`.
    pub fn wulff(spec: &NormSpec, radius: f64, h: f64) -> Result<Self> {
        positive("radius", radius)?;
        if spec.dim() != 2 {
            return Err(invalid("grid domains require a planar norm"));
        }
        let perimeter = wulff_euclidean_perimeter(spec, radius)?;
        let shrink = perimeter * BOUNDARY_OFFSET * h / (2.0 * spec.wulff_measure() * radius);
        let ext = spec.wulff_half_extents(radius);
        let r = radius - shrink;
        Self::from_predicate(h, [ext[0], ext[1]], |x, y| spec.polar_unchecked(&[x, y]) < r)
    }

    /// The `count` cells with smallest `H°(center)` (ties by cell index):
    /// a Wulff shape of measure exactly `count·h²`.
    pub fn wulff_with_count(spec: &NormSpec, count: usize, h: f64) -> Result<Self> {
        if spec.dim() != 2 {
            return Err(invalid("grid domains require a planar norm"));
        }
        if count == 0 {
            return Err(invalid("Wulff domain needs at least one cell"));
        }
        positive("grid spacing", h)?;
        let radius = (count as f64 * h * h / spec.wulff_measure()).sqrt();
        let ext = spec.wulff_half_extents(radius + 2.0 * h);
        let mut f = Self::from_predicate(h, [ext[0], ext[1]], |_, _| true)?;
        let mut order: Vec<(f64, usize)> = (0..f.mask.len())
            .map(|k| {
                let (x, y) = f.center(k % f.nx, k / f.nx);
                (spec.polar_unchecked(&[x, y]), k)
            })
            .collect();
        if order.len() < count + 2 * (f.nx + f.ny) {
            return Err(invalid("Wulff grid too small for the requested count"));
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        f.mask.iter_mut().for_each(|m| *m = false);
        for &(_, k) in &order[..count] {
            f.mask[k] = true;
        }
        for k in 0..f.mask.len() {
            f.weight[k] = if f.mask[k] { 1.0 } else { 0.0 };
        }
        Ok(f)
    }

    /// Masked cell indices ordered by `H°(center)`, ties by index.
    pub fn polar_order(&self, spec: &NormSpec) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .masked_indices()
            .into_iter()
            .map(|k| {
                let (x, y) = self.center(k % self.nx, k / self.nx);
                (spec.polar_unchecked(&[x, y]), k)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, k)| k).collect()
    }

    pub fn annulus(r_in: f64, r_out: f64, h: f64) -> Result<Self> {
        positive("inner radius", r_in)?;
        if r_out <= r_in {
            return Err(invalid("annulus needs r_in < r_out"));
        }
        let d = BOUNDARY_OFFSET * h;
        let (a, b) = (r_in + d, r_out - d);
        Self::from_predicate(h, [r_out, r_out], |x, y| {
            let r2 = x * x + y * y;
            r2 > a * a && r2 < b * b
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_measure(&self) -> f64 {
        self.h * self.h
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `|Ω| = (#masked)·h²`.
    pub fn domain_measure(&self) -> f64 {
        self.masked_count() as f64 * self.cell_measure()
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        center_of(self.h, self.nx, self.ny, i, j)
    }

    /// Value with zero extension; indices outside the grid are allowed.
    #[inline]
    pub fn value_at(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            return 0.0;
        }
        self.values[j as usize * self.nx + i as usize]
    }

    /// Indices of masked cells, in row-major order.
    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&k| self.mask[k]).collect()
    }

    pub fn masked_values(&self) -> Vec<f64> {
        self.masked_indices().into_iter().map(|k| self.values[k]).collect()
    }

    /// Same domain and weight, new values (full-grid array).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.h, self.nx, self.ny, self.mask.clone(), values, self.weight.clone())
    }

    /// Same domain and values, new weight (full-grid array).
    pub fn with_weight(&self, weight: Vec<f64>) -> Result<Self> {
        Self::new(self.h, self.nx, self.ny, self.mask.clone(), self.values.clone(), weight)
    }

    /// Fills masked cells with `f(x, y)`.
    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self.sample(f);
        self.with_values(values)
    }

    /// Fills the weight on masked cells with `m(x, y)`.
    pub fn map_weight(&self, m: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let weight = self.sample(m);
        self.with_weight(weight)
    }

    fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if self.mask[k] {
                    let (x, y) = self.center(i, j);
                    out[k] = f(x, y);
                }
            }
        }
        out
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.h == other.h && self.mask == other.mask
    }

    /// Hash of grid geometry, mask and weight; identifies a domain.
    pub fn domain_hash(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.h.to_bits().hash(&mut hasher);
        self.nx.hash(&mut hasher);
        self.ny.hash(&mut hasher);
        self.mask.hash(&mut hasher);
        for w in &self.weight {
            w.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Whether the mask is 4-connected.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.mask.iter().position(|&m| m) else {
            return false;
        };
        let mut seen = vec![false; self.mask.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % self.nx, k / self.nx);
            let mut visit = |nk: usize| {
                if self.mask[nk] && !seen[nk] {
                    seen[nk] = true;
                    count += 1;
                    queue.push_back(nk);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < self.nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - self.nx);
            }
            if j + 1 < self.ny {
                visit(k + self.nx);
            }
        }
        count == self.masked_count()
    }

    /// Weighted norm `(Σ m|u|^r h²)^{1/r}`.
    pub fn weighted_norm(&self, r: f64) -> f64 {
        let s: f64 = self.values.iter().zip(&self.weight).map(|(v, w)| w * v.abs().powf(r)).sum();
        (s * self.cell_measure()).powf(1.0 / r)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Writes the CSV grid format: a `h,nx,ny` header line and its values,
    /// then one `ix,iy,mask,value,weight` row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "h,nx,ny")?;
        writeln!(w, "{:.16e},{},{}", self.h, self.nx, self.ny)?;
        writeln!(w, "ix,iy,mask,value,weight")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                writeln!(
                    w,
                    "{},{},{},{:.16e},{:.16e}",
                    i,
                    j,
                    u8::from(self.mask[k]),
                    self.values[k],
                    self.weight[k]
                )?;
            }
        }
        Ok(())
    }

    /// Parses the format written by [`ScalarField::write_csv`]. Cells that
    /// are not listed are outside the mask.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(n, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((n + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(s))) => Ok((n, s)),
                Some((n, Err(e))) => Err(Error::Data(format!("line {n}: {e}"))),
                None => Err(Error::Data(format!("missing {what}"))),
            }
        };
        let (_, header) = next("header")?;
        if normalize(&header) != "h,nx,ny" {
            return Err(Error::Data(format!("expected header `h,nx,ny`, found `{header}`")));
        }
        let (ln, dims) = next("grid dimensions")?;
        let parts: Vec<&str> = dims.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Data(format!("line {ln}: expected `h,nx,ny` values")));
        }
        let h: f64 = parse(parts[0], ln)?;
        let nx: usize = parse(parts[1], ln)?;
        let ny: usize = parse(parts[2], ln)?;
        let (ln, cols) = next("column header")?;
        if normalize(&cols) != "ix,iy,mask,value,weight" {
            return Err(Error::Data(format!("line {ln}: expected `ix,iy,mask,value,weight`")));
        }
        let n = nx * ny;
        let (mut mask, mut values, mut weight) = (vec![false; n], vec![0.0; n], vec![0.0; n]);
        for item in lines {
            let (ln, row) = match item {
                (n, Ok(s)) => (n, s),
                (n, Err(e)) => return Err(Error::Data(format!("line {n}: {e}"))),
            };
            let f: Vec<&str> = row.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::Data(format!("line {ln}: expected 5 columns")));
            }
            let i: usize = parse(f[0], ln)?;
            let j: usize = parse(f[1], ln)?;
            if i >= nx || j >= ny {
                return Err(Error::Data(format!("line {ln}: cell ({i},{j}) out of range")));
            }
            let k = j * nx + i;
            mask[k] = match f[2] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::Data(format!("line {ln}: bad mask flag `{other}`"))),
            };
            values[k] = parse(f[3], ln)?;
            weight[k] = parse(f[4], ln)?;
        }
        Self::new(h, nx, ny, mask, values, weight)
    }
}

fn center_of(h: f64, nx: usize, ny: usize, i: usize, j: usize) -> (f64, f64) {
    ((i as f64 - (nx as f64 - 1.0) / 2.0) * h, (j as f64 - (ny as f64 - 1.0) / 2.0) * h)
}

fn wulff_euclidean_perimeter(spec: &NormSpec, radius: f64) -> Result<f64> {
    let poly = crate::anisotropy::Polygon::wulff(spec, radius, 4096)?;
    let v = poly.vertices();
    Ok((0..v.len())
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % v.len()]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum())
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive, got {v}")))
    }
}

fn normalize(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Data(format!("line {line}: cannot parse `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_node_aligned() {
        let f = ScalarField::square(1.0, 1.0 / 8.0).unwrap();
        // centers at k/8, strictly inside |x| < 1/2 gives 7 per side
        assert_eq!(f.masked_count(), 49);
        assert_eq!(f.nx() % 2, 1);
        let (x, y) = f.center((f.nx() - 1) / 2, (f.ny() - 1) / 2);
        assert_eq!((x, y), (0.0, 0.0));
    }

    #[test]
    fn disk_measure_converges() {
        let f = ScalarField::disk(1.0, 1.0 / 64.0).unwrap();
        let m = f.domain_measure();
        let r = 1.0 - BOUNDARY_OFFSET / 64.0;
        assert!((m - std::f64::consts::PI * r * r).abs() < 0.01);
        assert!(f.is_connected());
    }

    #[test]
    fn wulff_with_exact_count() {
        let ell = NormSpec::ellipse(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let f = ScalarField::wulff_with_count(&ell, 1234, 0.05).unwrap();
        assert_eq!(f.masked_count(), 1234);
        assert!(f.is_connected());
        // a built-in Wulff shape is its own exact-count representative
        let w = ScalarField::wulff(&ell, 1.0, 0.05).unwrap();
        let again = ScalarField::wulff_with_count(&ell, w.masked_count(), 0.05).unwrap();
        let centers = |g: &ScalarField| {
            let mut c: Vec<(i64, i64)> = g
                .masked_indices()
                .into_iter()
                .map(|k| {
                    let (x, y) = g.center(k % g.nx(), k / g.nx());
                    ((x / 0.05).round() as i64, (y / 0.05).round() as i64)
                })
                .collect();
            c.sort();
            c
        };
        assert_eq!(centers(&w), centers(&again));
    }

    #[test]
    fn annulus_is_connected_and_two_disks_are_not() {
        let a = ScalarField::annulus(0.5, 1.0, 1.0 / 32.0).unwrap();
        assert!(a.is_connected());
        let two = ScalarField::from_predicate(0.1, [2.0, 1.0], |x, y| {
            (x - 1.0).powi(2) + y * y < 0.25 || (x + 1.0).powi(2) + y * y < 0.25
        })
        .unwrap();
        assert!(!two.is_connected());
    }

    #[test]
    fn rejects_bad_weights_and_empty_masks() {
        let f = ScalarField::disk(1.0, 0.25).unwrap();
        let n = f.nx() * f.ny();
        assert!(f.with_weight(vec![0.0; n]).is_err());
        assert!(ScalarField::new(0.1, 2, 2, vec![false; 4], vec![0.0; 4], vec![0.0; 4]).is_err());
        assert!(ScalarField::disk(1.0, -0.1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = ScalarField::disk(1.0, 0.2)
            .unwrap()
            .map_values(|x, y| 1.0 - x * x - y * y)
            .unwrap()
            .map_weight(|x, _| 2.0 + x)
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = ScalarField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let bad = "h,nx,ny\n0.1,2,2\nix,iy,mask,value,weight\n0,0,1,abc,1\n";
        let err = ScalarField::read_csv(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }
}
