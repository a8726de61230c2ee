//! First eigenpair on a masked grid by direct minimization of
//! `E(u) / ‖u‖_{q,m}^p`.
//!
//! Each restart runs a projected descent: limited-memory quasi-Newton
//! directions, monotone Armijo backtracking on the quotient, projection
//! `u ↦ |u|` and renormalization to `‖u‖_{q,m} = 1` after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::anisotropy::NormSpec;
use crate::energy::Stencil;
use crate::error::{invalid, Result};
use crate::grid::ScalarField;

/// Iteration window of the stagnation test.
const WINDOW: usize = 20;
const MEMORY: usize = 12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    pub p: f64,
    pub q: f64,
    pub norm: NormSpec,
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    /// Relative gradient smoothing for `p < 2`, scaled by `sup|u|/h`.
    pub smoothing: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Stop when the quotient drops by less than this fraction over
    /// [`WINDOW`] iterations.
    pub tolerance: f64,
}

impl SolveConfig {
    pub fn new(p: f64, q: f64, norm: NormSpec) -> Self {
        Self {
            p,
            q,
            norm,
            max_iters: 20_000,
            initial_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            smoothing: 1e-8,
            restarts: 1,
            seed: 0,
            tolerance: 1e-11,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(invalid(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.q.is_finite() && self.q > 1.0) {
            return Err(invalid(format!("q must exceed 1, got {}", self.q)));
        }
        if self.q > self.p {
            return Err(invalid(format!(
                "q = {} exceeds p = {}; simplicity of the first eigenvalue requires 1 < q <= p",
                self.q, self.p
            )));
        }
        if self.norm.dim() != 2 {
            return Err(invalid("the field solver needs a planar norm"));
        }
        if !(self.smoothing >= 0.0) {
            return Err(invalid("smoothing must be nonnegative"));
        }
        if self.restarts == 0 {
            return Err(invalid("need at least one restart"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtracking factor must lie in (0, 1)"));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(invalid("sufficient-decrease constant must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(invalid("initial step must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// Positive eigenfunction with `‖u‖_{q,m} = 1`, carrying the domain
    /// weight.
    pub field: ScalarField,
    pub q_norm: f64,
    pub iterations: usize,
    pub quotient_history: Vec<f64>,
    pub weak_residual: f64,
    pub restart_spread: f64,
    pub converged: bool,
    /// Index of the winning restart (seed is `cfg.seed + index`).
    pub restart: usize,
    pub smoothing: f64,
}

/// `Σ m|u|^q h²`.
fn q_integral(u: &[f64], m: &[f64], q: f64, area: f64) -> f64 {
    u.iter().zip(m).filter(|(v, _)| **v != 0.0).map(|(v, w)| w * v.abs().powf(q)).sum::<f64>() * area
}

/// `E(u) / (Σ m|u|^q h²)^{p/q}` with `m` the field's weight.
pub fn rayleigh_quotient(u: &ScalarField, spec: &NormSpec, p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && q > 1.0) {
        return Err(invalid("exponents must exceed 1"));
    }
    if u.values().iter().all(|&v| v == 0.0) {
        return Err(invalid("Rayleigh quotient of the zero field"));
    }
    let e = crate::energy::dirichlet_energy(u, spec, p)?;
    let n = q_integral(u.values(), u.weight(), q, u.cell_measure());
    Ok(e / n.powf(p / q))
}

struct Problem<'a> {
    stencil: Stencil,
    spec: &'a NormSpec,
    p: f64,
    q: f64,
    weight: &'a [f64],
    mask: &'a [bool],
    area: f64,
    smoothing: f64,
}

impl Problem<'_> {
    fn quotient(&self, u: &[f64]) -> f64 {
        let e = self.stencil.energy(self.spec, self.p, u);
        e / q_integral(u, self.weight, self.q, self.area).powf(self.p / self.q)
    }

    /// Quotient and its gradient; `u` must have `‖u‖_{q,m} = 1`.
    fn quotient_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let eps = self.smoothing * sup / self.stencil.h;
        let e = self.stencil.energy_grad(self.spec, self.p, eps, u, grad);
        let coeff = self.p * e * self.area;
        for ((g, v), (m, inside)) in grad.iter_mut().zip(u).zip(self.weight.iter().zip(self.mask)) {
            if *inside {
                *g -= coeff * m * v.abs().powf(self.q - 1.0) * v.signum();
            } else {
                *g = 0.0;
            }
        }
        e
    }

    /// `|u|` rescaled to unit `‖·‖_{q,m}`.
    fn project(&self, u: &mut [f64]) -> bool {
        u.iter_mut().for_each(|v| *v = v.abs());
        let n = q_integral(u, self.weight, self.q, self.area);
        if !(n.is_finite() && n > 0.0) {
            return false;
        }
        let c = n.powf(-1.0 / self.q);
        u.iter_mut().for_each(|v| *v *= c);
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Run {
    values: Vec<f64>,
    quotient: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn descend(pb: &Problem, cfg: &SolveConfig, mut u: Vec<f64>) -> Run {
    let len = u.len();
    pb.project(&mut u);
    let mut g = vec![0.0; len];
    let mut quot = pb.quotient_grad(&u, &mut g);
    let mut history = vec![quot];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut d = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut alpha_buf = [0.0; MEMORY];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        // two-loop recursion for d = −H g
        d.iter_mut().zip(&g).for_each(|(a, b)| *a = -b);
        for (k, (s, y, rho)) in memory.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            d.iter_mut().zip(y).for_each(|(x, yy)| *x -= a * yy);
        }
        let gamma = match memory.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => {
                let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                cfg.initial_step * 0.1 / gmax.max(f64::MIN_POSITIVE)
            }
        };
        d.iter_mut().for_each(|x| *x *= gamma);
        for (k, (s, y, rho)) in memory.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(x, ss)| *x += (alpha_buf[k] - b) * ss);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let scale = 0.1 / gmax.max(f64::MIN_POSITIVE);
            d.iter_mut().zip(&g).for_each(|(a, b)| *a = -scale * b);
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                converged = true;
                break;
            }
        }

        let mut step = if memory.is_empty() { cfg.initial_step } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            trial.iter_mut().zip(u.iter().zip(&d)).for_each(|(t, (a, b))| *t = a + step * b);
            if pb.project(&mut trial) {
                let qt = pb.quotient(&trial);
                if qt <= quot + cfg.sufficient_decrease * step * slope {
                    accepted = Some(qt);
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        let Some(_) = accepted else {
            if memory.is_empty() {
                converged = true;
                break;
            }
            memory.clear();
            continue;
        };
        let q_new = pb.quotient_grad(&trial, &mut g_new);
        let s: Vec<f64> = trial.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        quot = q_new;
        history.push(quot);
        if history.len() > WINDOW {
            let old = history[history.len() - 1 - WINDOW];
            if (old - quot) <= cfg.tolerance * quot {
                converged = true;
                break;
            }
        }
    }
    Run { quotient: quot, values: u, history, iterations, converged }
}

fn initial_field(domain: &ScalarField, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    domain.mask().iter().map(|&m| if m { rng.random_range(0.5..1.5) } else { 0.0 }).collect()
}

fn l2_distance(a: &[f64], b: &[f64], area: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * area).sqrt()
}

/// Minimizes the Rayleigh quotient on `domain` (mask and weight; values
/// are ignored) over `cfg.restarts` seeded starts, in parallel.
pub fn minimize(domain: &ScalarField, cfg: &SolveConfig) -> Result<EigenResult> {
    cfg.validate()?;
    if !domain.is_connected() {
        return Err(invalid("domain mask is not 4-connected"));
    }
    let pb = Problem {
        stencil: Stencil::of(domain),
        spec: &cfg.norm,
        p: cfg.p,
        q: cfg.q,
        weight: domain.weight(),
        mask: domain.mask(),
        area: domain.cell_measure(),
        smoothing: if cfg.p < 2.0 { cfg.smoothing } else { 0.0 },
    };
    let runs: Vec<Run> = (0..cfg.restarts)
        .into_par_iter()
        .map(|k| descend(&pb, cfg, initial_field(domain, cfg.seed.wrapping_add(k as u64))))
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.quotient.total_cmp(&b.1.quotient).then(a.0.cmp(&b.0)))
        .map(|(k, _)| k)
        .unwrap();
    let mut spread = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            spread = spread.max(l2_distance(&runs[i].values, &runs[j].values, pb.area));
        }
    }
    let run = runs.into_iter().nth(best).unwrap();
    let field = domain.with_values(run.values)?;
    let q_norm = field.weighted_norm(cfg.q);
    let lambda = rayleigh_quotient(&field, &cfg.norm, cfg.p, cfg.q)?;
    let mut result = EigenResult {
        lambda,
        field,
        q_norm,
        iterations: run.iterations,
        quotient_history: run.history,
        weak_residual: 0.0,
        restart_spread: spread,
        converged: run.converged,
        restart: best,
        smoothing: pb.smoothing,
    };
    result.weak_residual = weak_residual(&result.field, &cfg.norm, cfg.p, cfg.q)?;
    Ok(result)
}

/// Relative ℓ² mismatch, over cells whose four neighbours lie in the mask,
/// between the discrete `−div(H(∇u)^{p−1}∇H(∇u))` and
/// `λ m ‖u‖_{q,m}^{p−q} u^{q−1}`, with `λ` the quotient of `u`.
pub fn weak_residual(u: &ScalarField, spec: &NormSpec, p: f64, q: f64) -> Result<f64> {
    let lambda = rayleigh_quotient(u, spec, p, q)?;
    let st = Stencil::of(u);
    let mut grad = vec![0.0; u.values().len()];
    st.energy_grad(spec, p, 0.0, u.values(), &mut grad);
    let area = u.cell_measure();
    let norm = u.weighted_norm(q);
    let factor = lambda * norm.powf(p - q);
    let (nx, ny) = (u.nx(), u.ny());
    let mask = u.mask();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 1..ny.saturating_sub(1) {
        for i in 1..nx.saturating_sub(1) {
            let k = j * nx + i;
            if !(mask[k] && mask[k - 1] && mask[k + 1] && mask[k - nx] && mask[k + nx]) {
                continue;
            }
            let v = u.values()[k];
            let lhs = grad[k] / (p * area);
            let rhs = factor * u.weight()[k] * v.abs().powf(q - 1.0) * v.signum();
            num += (lhs - rhs).powi(2);
            den += rhs * rhs;
        }
    }
    if den == 0.0 {
        return Err(invalid("weak residual needs interior cells with nonzero values"));
    }
    Ok((num / den).sqrt())
}

/// Largest pairwise `L²` distance between the normalized eigenfunctions of
/// the restarts in `cfg`.
pub fn simplicity_spread(domain: &ScalarField, cfg: &SolveConfig) -> Result<f64> {
    Ok(minimize(domain, cfg)?.restart_spread)
}
