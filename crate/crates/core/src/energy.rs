//! Discrete anisotropic Dirichlet energy `Σ H(∇ₕu)^p h²`.
//!
//! `∇ₕ` is the forward-difference stencil
//! `((u[i+1,j] − u[i,j])/h, (u[i,j+1] − u[i,j])/h)` applied to the field
//! extended by zero, summed over every cell of the grid plus one ghost row
//! and column on the low side so that all boundary jumps are counted. The
//! same stencil backs both the rearrangement inequalities and the
//! eigenvalue solver.

use crate::anisotropy::NormSpec;
use crate::error::{invalid, Result};
use crate::grid::ScalarField;

/// Geometry of a grid, used by the energy kernels on raw value arrays.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Stencil {
    pub fn of(f: &ScalarField) -> Self {
        Self { nx: f.nx(), ny: f.ny(), h: f.h() }
    }

    #[inline]
    fn at(&self, u: &[f64], i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            0.0
        } else {
            u[j as usize * self.nx + i as usize]
        }
    }

    /// Energy of a full-grid array (zero outside the mask).
    pub fn energy(&self, spec: &NormSpec, p: f64, u: &[f64]) -> f64 {
        let inv_h = 1.0 / self.h;
        let area = self.h * self.h;
        let mut total = 0.0;
        for j in -1..self.ny as isize {
            for i in -1..self.nx as isize {
                let c = self.at(u, i, j);
                let e = self.at(u, i + 1, j);
                let n = self.at(u, i, j + 1);
                if c == 0.0 && e == 0.0 && n == 0.0 {
                    continue;
                }
                let g = [(e - c) * inv_h, (n - c) * inv_h];
                let hv = spec.eval_unchecked(&g);
                if hv > 0.0 {
                    total += hv.powf(p);
                }
            }
        }
        total * area
    }

    /// Energy and its gradient with respect to every grid value.
    ///
    /// For `p < 2` the factor `H^{p−2}` is replaced by
    /// `(H² + ε²)^{(p−2)/2}`; for `p ≥ 2` `eps` is ignored.
    pub fn energy_grad(&self, spec: &NormSpec, p: f64, eps: f64, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let inv_h = 1.0 / self.h;
        let area = self.h * self.h;
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        let mut total = 0.0;
        let mut dh = [0.0; 2];
        for j in -1..ny {
            for i in -1..nx {
                let c = self.at(u, i, j);
                let e = self.at(u, i + 1, j);
                let n = self.at(u, i, j + 1);
                if c == 0.0 && e == 0.0 && n == 0.0 {
                    continue;
                }
                let g = [(e - c) * inv_h, (n - c) * inv_h];
                let hv = spec.grad_into(&g, &mut dh);
                if hv == 0.0 {
                    continue;
                }
                total += hv.powf(p);
                let scale = if p < 2.0 {
                    p * (hv * hv + eps * eps).powf(0.5 * (p - 2.0)) * hv
                } else {
                    p * hv.powf(p - 1.0)
                };
                // d/du of the cell term, times h² / h
                let fx = scale * dh[0] * self.h;
                let fy = scale * dh[1] * self.h;
                if i >= 0 && j >= 0 {
                    grad[(j * nx + i) as usize] -= fx + fy;
                }
                if i + 1 < nx && j >= 0 {
                    grad[(j * nx + i + 1) as usize] += fx;
                }
                if j + 1 < ny && i >= 0 {
                    grad[((j + 1) * nx + i) as usize] += fy;
                }
            }
        }
        total * area
    }
}

/// `Σ_cells H(∇ₕf)^p h²` for the field extended by zero outside its mask.
pub fn dirichlet_energy(f: &ScalarField, spec: &NormSpec, p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid(format!("energy exponent must exceed 1, got {p}")));
    }
    if spec.dim() != 2 {
        return Err(invalid("grid energies require a planar norm"));
    }
    Ok(Stencil::of(f).energy(spec, p, f.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_has_zero_energy() {
        let f = ScalarField::disk(1.0, 0.1).unwrap();
        let e = NormSpec::euclidean(2).unwrap();
        assert_eq!(dirichlet_energy(&f, &e, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn cone_energy_on_disk() {
        // ∫_disk |∇(1−|x|)|² = π
        let f = ScalarField::disk(1.0, 1.0 / 64.0)
            .unwrap()
            .map_values(|x, y| (1.0 - (x * x + y * y).sqrt()).max(0.0))
            .unwrap();
        let e = NormSpec::euclidean(2).unwrap();
        let en = dirichlet_energy(&f, &e, 2.0).unwrap();
        assert!((en - PI).abs() < 0.03 * PI, "{en}");
    }

    #[test]
    fn cone_energy_ellipse_against_monte_carlo() {
        // Oracle: Monte-Carlo quadrature of 4u_x² + u_y² for u = 1 − |x| on
        // the unit disk, |∇u| = 1 so the integrand is 4cos²θ + sin²θ.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = 1_000_000;
        let mut acc = 0.0;
        let mut hits = 0usize;
        for _ in 0..samples {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            let r2 = x * x + y * y;
            if r2 < 1.0 && r2 > 0.0 {
                hits += 1;
                acc += (4.0 * x * x + y * y) / r2;
            }
        }
        let oracle = acc / samples as f64 * 4.0;
        assert!(hits > 0);
        let f = ScalarField::disk(1.0, 1.0 / 64.0)
            .unwrap()
            .map_values(|x, y| (1.0 - (x * x + y * y).sqrt()).max(0.0))
            .unwrap();
        let ell = NormSpec::ellipse(2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let en = dirichlet_energy(&f, &ell, 2.0).unwrap();
        assert!((en - oracle).abs() < 0.03 * oracle, "{en} vs {oracle}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = ScalarField::square(1.0, 1.0 / 9.0).unwrap();
        let specs = [
            NormSpec::euclidean(2).unwrap(),
            NormSpec::ellipse(2, &[2.0, 0.5, 0.5, 1.0]).unwrap(),
            NormSpec::power(2, 3.0).unwrap(),
        ];
        for spec in &specs {
            for &p in &[1.5, 2.0, 3.0] {
                let vals =
                    base.mask().iter().map(|&m| if m { rng.random_range(0.1..1.0) } else { 0.0 }).collect();
                let f = base.with_values(vals).unwrap();
                let st = Stencil::of(&f);
                let u = f.values().to_vec();
                let mut g = vec![0.0; u.len()];
                st.energy_grad(spec, p, 1e-8, &u, &mut g);
                let step = 1e-6;
                for k in f.masked_indices().into_iter().step_by(5) {
                    let mut a = u.clone();
                    let mut b = u.clone();
                    a[k] += step;
                    b[k] -= step;
                    let fd = (st.energy(spec, p, &a) - st.energy(spec, p, &b)) / (2.0 * step);
                    assert!(
                        (fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-8),
                        "{spec:?} p={p} k={k}: {fd} vs {}",
                        g[k]
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        let f = ScalarField::disk(1.0, 0.1).unwrap();
        let e = NormSpec::euclidean(2).unwrap();
        assert!(dirichlet_energy(&f, &e, 1.0).is_err());
    }
}
