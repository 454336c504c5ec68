//! Boundaries of the feasible tradeoff region: the lower curve `q⋆`, the
//! Donoho–Tanner transition `ε⋆(δ)`, the power ceiling `u⋆(δ, ε)` and the two
//! straight lines `l1: fdp = 1 − ε`, `l2: fdp = 1 − (ε/δ)·tpp`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{brent, RootOptions};
use crate::scalar_math::{half_noise_risk, norm_cdf, norm_pdf};
use crate::state_evolution::ProblemShape;

/// Smallest `t` examined when scanning for the largest root of the `t⋆`
/// equation. Both sides diverge like `1/t` at the origin.
const SCAN_FLOOR: f64 = 1e-3;
const CEILING_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub shape: ProblemShape,
    /// `(u, q⋆(u))` with `u` strictly increasing.
    pub samples: Vec<(f64, f64)>,
}

/// Residuals of the transition identities at the solved `(t⋆, ε⋆)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `2(1−ε⋆)[(1+t²)Φ(−t) − tφ(t)] + ε⋆(1+t²) − δ`
    pub transition_equation: f64,
    /// `φ(t⋆)/t⋆ − δ/(2(1−ε⋆))`
    pub density_ratio: f64,
    /// `Φ(−t⋆) − (δ−ε⋆)/(2(1−ε⋆))`
    pub tail_mass: f64,
}

impl IdentityResiduals {
    pub fn max_abs(&self) -> f64 {
        self.transition_equation
            .abs()
            .max(self.density_ratio.abs())
            .max(self.tail_mass.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtTransition {
    pub delta: f64,
    pub epsilon_star: f64,
    pub t_star: f64,
    pub residuals: IdentityResiduals,
}

/// Sampling ratio on the transition curve, parametrized by `t⋆`.
pub fn transition_delta(t: f64) -> f64 {
    let p = norm_pdf(t);
    2.0 * p / (2.0 * p + t * (1.0 - 2.0 * norm_cdf(-t)))
}

/// Transition sparsity, parametrized by `t⋆`.
pub fn transition_epsilon(t: f64) -> f64 {
    let p = norm_pdf(t);
    (2.0 * p - 2.0 * t * norm_cdf(-t)) / (2.0 * p + t * (1.0 - 2.0 * norm_cdf(-t)))
}

/// Left side of the transition equation minus `δ`.
pub fn transition_equation(t: f64, delta: f64, epsilon: f64) -> f64 {
    2.0 * (1.0 - epsilon) * half_noise_risk(t) + epsilon * (1.0 + t * t) - delta
}

fn identity_residuals(delta: f64, eps: f64, t: f64) -> IdentityResiduals {
    IdentityResiduals {
        transition_equation: transition_equation(t, delta, eps),
        density_ratio: norm_pdf(t) / t - delta / (2.0 * (1.0 - eps)),
        tail_mass: norm_cdf(-t) - (delta - eps) / (2.0 * (1.0 - eps)),
    }
}

/// Donoho–Tanner transition for `0 < δ < 1`.
pub fn epsilon_star(delta: f64) -> Result<DtTransition> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "the transition is defined for 0 < delta < 1, got {delta}; delta >= 1 is always below it"
        )));
    }
    let (lo, hi) = (1e-12, 30.0);
    if transition_delta(hi) >= delta {
        return Err(Error::domain(format!("delta {delta} is too small to resolve")));
    }
    let t = brent(
        |t| transition_delta(t) - delta,
        lo,
        hi,
        RootOptions {
            xtol: 1e-15,
            ..RootOptions::default()
        },
    )?;
    let eps = transition_epsilon(t);
    let residuals = identity_residuals(delta, eps, t);
    if residuals.max_abs() > 1e-8 {
        return Err(Error::Convergence {
            solver: "transition identities",
            iterations: 0,
            last: t,
            residual: residuals.max_abs(),
        });
    }
    Ok(DtTransition {
        delta,
        epsilon_star: eps,
        t_star: t,
        residuals,
    })
}

/// `ε⋆(δ)`, or `None` when `δ ≥ 1`.
pub fn transition_for(shape: ProblemShape) -> Result<Option<DtTransition>> {
    if shape.delta >= 1.0 {
        Ok(None)
    } else {
        epsilon_star(shape.delta).map(Some)
    }
}

/// Largest achievable TPP.
pub fn u_star(shape: ProblemShape) -> Result<f64> {
    match transition_for(shape)? {
        Some(dt) if shape.epsilon > dt.epsilon_star => Ok(u_prime(shape, dt.epsilon_star)),
        _ => Ok(1.0),
    }
}

/// `1 − (1−δ)(ε−ε⋆)/(ε(1−ε⋆))`, unclamped.
pub(crate) fn u_prime(shape: ProblemShape, eps_star: f64) -> f64 {
    let ProblemShape { delta, epsilon } = shape;
    1.0 - (1.0 - delta) * (epsilon - eps_star) / (epsilon * (1.0 - eps_star))
}

pub fn l1_value(shape: ProblemShape) -> f64 {
    1.0 - shape.epsilon
}

pub fn l2_value(u: f64, shape: ProblemShape) -> f64 {
    1.0 - shape.epsilon / shape.delta * u
}

/// Difference of the two sides of the `t⋆(u)` equation.
fn t_star_gap(t: f64, u: f64, shape: ProblemShape) -> f64 {
    let ProblemShape { delta, epsilon } = shape;
    let tail = norm_cdf(-t);
    let p = norm_pdf(t);
    let t2 = 1.0 + t * t;
    let central = 1.0 - 2.0 * tail;
    let lhs = (2.0 * (1.0 - epsilon) * half_noise_risk(t) + epsilon * t2 - delta)
        / (epsilon * (t2 * central + 2.0 * t * p));
    lhs - (1.0 - u) / central
}

/// Largest positive root of the `t⋆(u)` equation for any `u > 0`.
///
/// Scans downward from a point where the gap is positive, with a step that
/// grows with `t`, then refines the first sign change with Brent.
pub(crate) fn t_star_extended(u: f64, shape: ProblemShape) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(format!("t_star needs u > 0, got {u}")));
    }
    let gap = |t: f64| t_star_gap(t, u, shape);
    let mut t = (30.0f64).max(2.0 * (shape.delta / (shape.epsilon * u)).sqrt() + 2.0);
    let mut g = gap(t);
    let mut doublings = 0;
    while !(g > 0.0) {
        t *= 2.0;
        doublings += 1;
        if doublings > 30 {
            return Err(Error::domain(format!("no root of the t_star equation for u = {u}")));
        }
        g = gap(t);
    }
    while t > SCAN_FLOOR {
        let step = 0.005 * (t / 5.0).max(1.0);
        let next = (t - step).max(SCAN_FLOOR);
        let gn = gap(next);
        if gn <= 0.0 {
            return brent(
                gap,
                next,
                t,
                RootOptions {
                    xtol: 1e-13,
                    ..RootOptions::default()
                },
            );
        }
        t = next;
    }
    Err(Error::domain(format!(
        "u = {u} is outside the achievable range for delta = {}, epsilon = {}",
        shape.delta, shape.epsilon
    )))
}

/// Largest root `t⋆(u)` for `0 < u < 1`.
pub fn t_star(u: f64, shape: ProblemShape) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("t_star needs 0 < u < 1, got {u}")));
    }
    t_star_extended(u, shape)
}

fn q_from_t(t: f64, u: f64, shape: ProblemShape) -> f64 {
    let num = 2.0 * (1.0 - shape.epsilon) * norm_cdf(-t);
    num / (num + shape.epsilon * u)
}

/// Lower boundary `q⋆(u)` on `[0, 1]`; the endpoints are open-interval limits.
pub fn q_star(u: f64, shape: ProblemShape) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("q_star needs u in [0, 1], got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    // t⋆ ≈ √(δ/(εu)) for small u; past 60 the value underflows anyway
    if shape.delta / (shape.epsilon * u) > 3600.0 {
        return Ok(0.0);
    }
    let u = u.min(1.0 - CEILING_CLAMP);
    let t = t_star(u, shape)?;
    Ok(q_from_t(t, u, shape))
}

/// Intersection of the extended lower curve with `l2` at `u′`.
///
/// Past `u = 1` the branch through the intersection is the one carrying the
/// transition root `t⋆`, which need not be the largest root there. Returns
/// `(u′, q, gap)` where `gap` is the residual of the `t⋆(u′)` equation at `t⋆`.
pub fn extended_intersection(shape: ProblemShape, dt: &DtTransition) -> (f64, f64, f64) {
    let up = u_prime(shape, dt.epsilon_star);
    (up, q_from_t(dt.t_star, up, shape), t_star_gap(dt.t_star, up, shape))
}

/// `q⋆` at the power ceiling `u⋆`.
pub fn q_star_at_ceiling(shape: ProblemShape) -> Result<(f64, f64)> {
    let ceiling = u_star(shape)?;
    Ok((ceiling, q_star(ceiling, shape)?))
}

/// `n_samples` points of `q⋆` on `[0, u⋆]`, evaluated in parallel.
pub fn boundary_curve(shape: ProblemShape, n_samples: usize) -> Result<BoundaryCurve> {
    if n_samples < 2 {
        return Err(Error::domain("a boundary curve needs at least two samples"));
    }
    let ceiling = u_star(shape)?;
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let u = ceiling * i as f64 / (n_samples - 1) as f64;
            q_star(u, shape).map(|q| (u, q))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryCurve { shape, samples })
}
