//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the iteration; the remaining free variables take an L-BFGS step and the
//! trial point is projected back onto the box before an Armijo backtracking
//! test. Termination mirrors the usual L-BFGS-B criteria: the projected
//! gradient's infinity norm or the relative decrease in the objective falls
//! below tolerance.

use serde::{Deserialize, Serialize};

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Relative loss change treated as floating-point noise.
const ROUNDING: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub function_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Projected gradient below tolerance.
    Gradient,
    /// Relative decrease of the objective below tolerance.
    Function,
    MaxIterations,
    /// No decrease found along the search direction.
    LineSearch,
    /// The objective became non-finite.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub gradient: [f64; D],
    pub iterations: usize,
    pub termination: Termination,
}

impl<const D: usize> Minimum<D> {
    pub fn projected_gradient_norm(&self, bounds: &[(f64, f64); D]) -> f64 {
        projected_gradient(&self.x, &self.gradient, bounds)
            .iter()
            .fold(0.0, |m: f64, g| m.max(g.abs()))
    }
}

fn dot<const D: usize>(x: &[f64; D], y: &[f64; D]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn project<const D: usize>(x: &mut [f64; D], bounds: &[(f64, f64); D]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn projected_gradient<const D: usize>(
    x: &[f64; D],
    g: &[f64; D],
    bounds: &[(f64, f64); D],
) -> [f64; D] {
    let mut pg = *g;
    for i in 0..D {
        let (lo, hi) = bounds[i];
        if (x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0) {
            pg[i] = 0.0;
        }
    }
    pg
}

/// L-BFGS two-loop recursion restricted to the free variables.
fn lbfgs_direction<const D: usize>(
    g: &[f64; D],
    free: &[bool; D],
    history: &[([f64; D], [f64; D])],
) -> [f64; D] {
    let mask = |v: &[f64; D]| {
        let mut out = *v;
        for i in 0..D {
            if !free[i] {
                out[i] = 0.0;
            }
        }
        out
    };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(history.len());
    let mut scale = 1.0;
    let mut used = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let sy = dot(&s, &y);
        if sy <= 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            continue;
        }
        let rho = 1.0 / sy;
        let alpha = rho * dot(&s, &q);
        for i in 0..D {
            q[i] -= alpha * y[i];
        }
        alphas.push(alpha);
        used.push((s, y, rho));
    }
    if let Some((s, y, _)) = used.first() {
        scale = dot(s, y) / dot(y, y);
    }
    let mut r = q.map(|v| v * scale);
    for ((s, y, rho), alpha) in used.iter().zip(&alphas).rev() {
        let beta = rho * dot(y, &r);
        for i in 0..D {
            r[i] += s[i] * (alpha - beta);
        }
    }
    r.map(|v| -v)
}

/// Minimizes `f` over the box `bounds`, starting from `x0` (projected first).
///
/// `f` returns the objective and its gradient.
pub fn minimize_bounded<const D: usize>(
    mut f: impl FnMut(&[f64; D]) -> (f64, [f64; D]),
    x0: [f64; D],
    bounds: &[(f64, f64); D],
    options: &BoundedOptions,
) -> Minimum<D> {
    let mut x = x0;
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x);
    let mut history: Vec<([f64; D], [f64; D])> = Vec::with_capacity(MEMORY);
    let mut iterations = 0;

    let finish = |x, value, gradient, iterations, termination| Minimum {
        x,
        value,
        gradient,
        iterations,
        termination,
    };
    if !fx.is_finite() {
        return finish(x, fx, g, 0, Termination::NonFinite);
    }

    loop {
        let pg = projected_gradient(&x, &g, bounds);
        if pg.iter().fold(0.0, |m: f64, v| m.max(v.abs())) <= options.gradient_tolerance {
            return finish(x, fx, g, iterations, Termination::Gradient);
        }
        if iterations >= options.max_iterations {
            return finish(x, fx, g, iterations, Termination::MaxIterations);
        }
        iterations += 1;

        let free: [bool; D] = std::array::from_fn(|i| pg[i] != 0.0 || g[i] == 0.0);
        let mut direction = lbfgs_direction(&g, &free, &history);
        if dot(&direction, &pg) >= 0.0 {
            history.clear();
            direction = pg.map(|v| -v);
        }
        let mut step = if history.is_empty() {
            (1.0 / dot(&pg, &pg).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = x;
            for i in 0..D {
                trial[i] += step * direction[i];
            }
            project(&mut trial, bounds);
            let moved: [f64; D] = std::array::from_fn(|i| trial[i] - x[i]);
            let decrease = dot(&g, &moved);
            if decrease >= 0.0 {
                step *= 0.5;
                continue;
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft < fx && ft <= fx + ARMIJO * decrease {
                accepted = Some((trial, ft, gt, true));
                break;
            }
            // Near the optimum the loss stops resolving progress; accept a step
            // that keeps the loss within rounding and shrinks the projected gradient.
            if ft.is_finite()
                && ft <= fx + ROUNDING * fx.abs().max(1.0)
                && {
                    let pt = projected_gradient(&trial, &gt, bounds);
                    dot(&pt, &pt) < dot(&pg, &pg)
                }
            {
                accepted = Some((trial, ft, gt, false));
                break;
            }
            step *= 0.5;
        }

        let Some((trial, ft, gt, sufficient)) = accepted else {
            if history.is_empty() {
                return finish(x, fx, g, iterations, Termination::LineSearch);
            }
            // Retry from steepest descent before giving up.
            history.clear();
            continue;
        };

        let s: [f64; D] = std::array::from_fn(|i| trial[i] - x[i]);
        let y: [f64; D] = std::array::from_fn(|i| gt[i] - g[i]);
        if dot(&s, &y) > f64::EPSILON * dot(&y, &y) {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y));
        }

        let relative_decrease = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
        x = trial;
        fx = ft;
        g = gt;
        if sufficient && relative_decrease <= options.function_tolerance {
            return finish(x, fx, g, iterations, Termination::Function);
        }
    }
}
