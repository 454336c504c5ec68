//! State evolution and calibration for the asymptotic Lasso.
//!
//! For a threshold multiplier `α` the effective noise `τ` solves
//!
//! ```text
//! τ² = σ² + (1/δ)·E(η_{ατ}(Π + τW) − Π)²
//! ```
//!
//! and the Lasso penalty follows from the calibration
//! `λ = (1 − P(|Π + τW| > ατ)/δ)·ατ`. The map `α ↦ λ` is increasing on the
//! usable range, so penalties are turned back into thresholds by bracketing.
//!
//! All functions here take the full prior `Π` (zero atom included). The
//! shape only contributes its sampling ratio `δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect, brent, RootOptions};
use crate::scalar_math::{exceed_probability, half_noise_risk, normalized_mse, DiscretePrior};

/// The asymptotic regime `n/p → δ`, `k/p → ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeFields")]
pub struct ProblemShape {
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Deserialize)]
struct ShapeFields {
    delta: f64,
    epsilon: f64,
}

impl TryFrom<ShapeFields> for ProblemShape {
    type Error = Error;

    fn try_from(f: ShapeFields) -> Result<Self> {
        ProblemShape::new(f.delta, f.epsilon)
    }
}

impl ProblemShape {
    pub fn new(delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("delta must be positive, got {delta}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(ProblemShape { delta, epsilon })
    }
}

/// Noise standard deviation, with `σ = ∞` as a distinguished value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Finite(f64),
    Infinite,
}

impl NoiseLevel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_infinite() && sigma > 0.0 {
            Ok(NoiseLevel::Infinite)
        } else if sigma >= 0.0 {
            Ok(NoiseLevel::Finite(sigma))
        } else {
            Err(Error::domain(format!("sigma must be nonnegative, got {sigma}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NoiseLevel::Finite(s) => s,
            NoiseLevel::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEvolutionPoint {
    pub alpha: f64,
    pub tau: f64,
    pub lambda: f64,
}

/// Outcome of the `τ` fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauFixedPoint {
    Positive(f64),
    /// Iterates collapsed below the floor: the noiseless regime where the
    /// effective noise vanishes.
    Degenerate { last: f64 },
}

impl TauFixedPoint {
    pub fn positive(self) -> Option<f64> {
        match self {
            TauFixedPoint::Positive(t) => Some(t),
            TauFixedPoint::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative step tolerance `|τ_{k+1} − τ_k| ≤ tol·max(1, τ_k)`.
    pub tau_tol: f64,
    pub max_iter: usize,
    pub tau_floor: f64,
    /// Relative residual on `λ(α) − λ`.
    pub lambda_rtol: f64,
    pub alpha_max: f64,
    /// Plain iterations before switching to a bracketed solve.
    pub iterate_before_bracket: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tau_tol: 1e-10,
            max_iter: 10_000,
            tau_floor: 1e-8,
            lambda_rtol: 1e-9,
            alpha_max: 1e6,
            iterate_before_bracket: 200,
        }
    }
}

/// Root of `(1+t²)Φ(−t) − tφ(t) = δ/2` for `δ < 1`, zero otherwise.
pub fn alpha0(shape: ProblemShape) -> f64 {
    let target = 0.5 * shape.delta;
    if target >= 0.5 {
        return 0.0;
    }
    let mut hi = 1.0;
    while half_noise_risk(hi) > target {
        hi *= 2.0;
    }
    brent(
        |t| half_noise_risk(t) - target,
        0.0,
        hi,
        RootOptions {
            xtol: 1e-15,
            ..RootOptions::default()
        },
    )
    .expect("half_noise_risk is monotone on [0, hi]")
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "state evolution needs a finite nonnegative sigma, got {sigma}"
        )));
    }
    Ok(())
}

/// `(σ² + mse(τ)/δ)/τ² − 1`; negative above the largest fixed point.
#[inline]
fn scaled_gap(delta: f64, prior: &DiscretePrior, sigma: f64, alpha: f64, tau: f64) -> f64 {
    (sigma / tau).powi(2) + normalized_mse(prior, tau, alpha) / delta - 1.0
}

#[inline]
fn tau_map(delta: f64, prior: &DiscretePrior, sigma: f64, alpha: f64, tau: f64) -> f64 {
    (sigma * sigma + tau * tau * normalized_mse(prior, tau, alpha) / delta).sqrt()
}

pub fn solve_tau_fixed_point(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    alpha: f64,
) -> Result<TauFixedPoint> {
    solve_tau_with(shape, prior, sigma, alpha, &SolverOptions::default())
}

/// Largest fixed point of `τ ↦ √(σ² + mse(τ)/δ)`.
///
/// Iterates downward from a start above every fixed point, damping by one
/// half if the steps alternate in sign. When the plain iteration contracts
/// slowly (α close to `α₀`), the remaining distance is closed by a bracketed
/// Brent solve on the scaled gap.
pub fn solve_tau_with(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<TauFixedPoint> {
    check_sigma(sigma)?;
    let a0 = alpha0(shape);
    if !(alpha > a0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "alpha {alpha} must exceed alpha0 = {a0} for delta = {}",
            shape.delta
        )));
    }
    let delta = shape.delta;
    let gap = |tau: f64| scaled_gap(delta, prior, sigma, alpha, tau);

    let mut tau = 10.0 * (sigma + prior.second_moment().sqrt() + 1.0);
    let mut expansions = 0;
    while gap(tau) >= 0.0 {
        tau *= 2.0;
        expansions += 1;
        if expansions > 200 || !tau.is_finite() {
            return Err(Error::Convergence {
                solver: "tau fixed point (start expansion)",
                iterations: expansions,
                last: tau,
                residual: gap(tau),
            });
        }
    }

    let mut prev_step = 0.0f64;
    for iter in 0..opts.max_iter {
        let mapped = tau_map(delta, prior, sigma, alpha, tau);
        let mut next = mapped;
        let step = mapped - tau;
        if prev_step != 0.0 && step.signum() != prev_step.signum() {
            next = 0.5 * tau + 0.5 * mapped;
        }
        let moved = (next - tau).abs();
        if moved <= opts.tau_tol * tau.max(1.0) {
            if next < opts.tau_floor {
                return Ok(TauFixedPoint::Degenerate { last: next });
            }
            return polish_tau(gap, next, opts);
        }
        if next < opts.tau_floor {
            return Ok(TauFixedPoint::Degenerate { last: next });
        }
        prev_step = step;
        tau = next;
        if iter + 1 >= opts.iterate_before_bracket {
            return bracket_tau(gap, tau, iter + 1, opts);
        }
    }
    Err(Error::Convergence {
        solver: "tau fixed point",
        iterations: opts.max_iter,
        last: tau,
        residual: gap(tau),
    })
}

/// Small steps do not mean a small error when the map contracts slowly, so a
/// converged iterate is refined by Brent on a bracket grown around it.
fn polish_tau(gap: impl Fn(f64) -> f64, tau: f64, opts: &SolverOptions) -> Result<TauFixedPoint> {
    let g = gap(tau);
    if g == 0.0 {
        return Ok(TauFixedPoint::Positive(tau));
    }
    let mut step = 1e-9 * tau;
    let (lo, hi);
    if g > 0.0 {
        let mut h = tau + step;
        while gap(h) > 0.0 {
            step *= 4.0;
            h = tau + step;
            if !h.is_finite() {
                return Err(Error::Convergence {
                    solver: "tau fixed point (polish)",
                    iterations: 0,
                    last: tau,
                    residual: g,
                });
            }
        }
        (lo, hi) = (tau, h);
    } else {
        let mut l = tau - step;
        while gap(l) < 0.0 {
            step *= 4.0;
            l = tau - step;
            if l < opts.tau_floor {
                return Ok(TauFixedPoint::Degenerate { last: l.max(0.0) });
            }
        }
        (lo, hi) = (l, tau);
    }
    let root = brent(
        &gap,
        lo,
        hi,
        RootOptions {
            xtol: 0.1 * opts.tau_tol * hi.max(1.0).min(hi * 1e6),
            ftol: 0.0,
            max_iter: 200,
        },
    )?;
    Ok(if root < opts.tau_floor {
        TauFixedPoint::Degenerate { last: root }
    } else {
        TauFixedPoint::Positive(root)
    })
}

fn bracket_tau(
    gap: impl Fn(f64) -> f64,
    hi: f64,
    used: usize,
    opts: &SolverOptions,
) -> Result<TauFixedPoint> {
    let mut hi = hi;
    let mut lo = hi;
    let mut iters = used;
    loop {
        lo *= 0.5;
        iters += 1;
        if lo < opts.tau_floor {
            return Ok(TauFixedPoint::Degenerate { last: lo });
        }
        let g = gap(lo);
        if g > 0.0 {
            break;
        }
        hi = lo;
        if iters >= opts.max_iter {
            return Err(Error::Convergence {
                solver: "tau fixed point (bracket)",
                iterations: iters,
                last: lo,
                residual: g,
            });
        }
    }
    let xtol = 0.1 * opts.tau_tol * hi.max(1.0);
    let root = brent(
        &gap,
        lo,
        hi,
        RootOptions {
            xtol,
            ftol: 0.0,
            max_iter: opts.max_iter.saturating_sub(iters).max(100),
        },
    )?;
    Ok(if root < opts.tau_floor {
        TauFixedPoint::Degenerate { last: root }
    } else {
        TauFixedPoint::Positive(root)
    })
}

/// Calibration factor `1 − P(|Π + τW| > ατ)/δ`.
pub fn calibration_factor(shape: ProblemShape, prior: &DiscretePrior, tau: f64, alpha: f64) -> f64 {
    1.0 - exceed_probability(prior, tau, alpha) / shape.delta
}

pub fn lambda_of_alpha(shape: ProblemShape, prior: &DiscretePrior, sigma: f64, alpha: f64) -> Result<f64> {
    lambda_of_alpha_with(shape, prior, sigma, alpha, &SolverOptions::default()).map(|(l, _)| l)
}

/// Penalty matching threshold `α`, together with the `τ` solve.
///
/// A degenerate `τ` gives `λ = 0`, the limit of `factor·α·τ` as `τ → 0`.
/// Values `≤ 0` mark thresholds below the usable range.
pub fn lambda_of_alpha_with(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<(f64, TauFixedPoint)> {
    let fixed = solve_tau_with(shape, prior, sigma, alpha, opts)?;
    let lambda = match fixed {
        TauFixedPoint::Positive(tau) => calibration_factor(shape, prior, tau, alpha) * alpha * tau,
        TauFixedPoint::Degenerate { .. } => 0.0,
    };
    Ok((lambda, fixed))
}

pub fn solve_alpha_of_lambda(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    lambda: f64,
) -> Result<StateEvolutionPoint> {
    solve_alpha_near(shape, prior, sigma, lambda, None, &SolverOptions::default())
}

/// Inverts [`lambda_of_alpha`]. `hint` is a threshold expected to lie near
/// the answer (a neighbouring grid solution) and only narrows the bracket.
pub fn solve_alpha_near(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    lambda: f64,
    hint: Option<f64>,
    opts: &SolverOptions,
) -> Result<StateEvolutionPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    check_sigma(sigma)?;
    let a0 = alpha0(shape);
    let resid = |alpha: f64| -> Result<f64> {
        Ok(lambda_of_alpha_with(shape, prior, sigma, alpha, opts)?.0 - lambda)
    };

    let (mut lo, mut hi) = match hint {
        Some(h) if h > a0 && h.is_finite() => {
            let gap = h - a0;
            (a0 + 0.5 * gap, h + 0.5 * gap.max(0.05))
        }
        _ => (a0 + 0.5, a0 + 1.0),
    };

    // upper end: λ(hi) > target
    let mut r_hi = resid(hi)?;
    while r_hi <= 0.0 {
        lo = lo.max(hi);
        hi = a0 + 2.0 * (hi - a0);
        if hi > opts.alpha_max {
            return Err(Error::Bracket(format!(
                "lambda {lambda} needs alpha beyond {}",
                opts.alpha_max
            )));
        }
        r_hi = resid(hi)?;
    }
    // lower end: λ(lo) < target
    if lo >= hi {
        lo = a0 + 0.5 * (hi - a0);
    }
    let mut r_lo = resid(lo)?;
    while r_lo >= 0.0 {
        hi = lo;
        r_hi = r_lo;
        lo = a0 + 0.5 * (lo - a0);
        if lo - a0 <= 1e-14 * a0.max(1.0) {
            return Err(Error::Bracket(format!(
                "lambda {lambda} is below the smallest representable penalty"
            )));
        }
        r_lo = resid(lo)?;
    }
    let _ = r_hi;

    let ftol = opts.lambda_rtol * lambda.max(1.0);
    let mut failure = None;
    let alpha = brent(
        |a| match resid(a) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        RootOptions {
            xtol: 1e-15,
            ftol,
            max_iter: 300,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let alpha = match alpha {
        Ok(a) => a,
        Err(Error::Convergence { .. }) => bisect(
            |a| resid(a).unwrap_or(f64::NAN),
            lo,
            hi,
            1e-15,
            400,
        )?,
        Err(e) => return Err(e),
    };
    let (lam, fixed) = lambda_of_alpha_with(shape, prior, sigma, alpha, opts)?;
    match fixed.positive() {
        Some(tau) if (lam - lambda).abs() <= ftol => Ok(StateEvolutionPoint { alpha, tau, lambda: lam }),
        _ => solve_across_jump(shape, prior, sigma, lambda, lo, hi, opts),
    }
}

/// Handles a penalty that falls inside a jump of `α ↦ λ`.
///
/// Without noise and with large atoms, `τ(α)` leaps from zero to the signal
/// scale across a single representable `α`: there the fixed-point equation
/// holds for a whole interval of `τ` up to exponentially small terms. The
/// threshold is pinned at the jump and the penalty is matched through `τ`.
fn solve_across_jump(
    shape: ProblemShape,
    prior: &DiscretePrior,
    sigma: f64,
    lambda: f64,
    lo: f64,
    hi: f64,
    opts: &SolverOptions,
) -> Result<StateEvolutionPoint> {
    let at = |a: f64| lambda_of_alpha_with(shape, prior, sigma, a, opts);
    let (mut lo, mut hi) = (lo, hi);
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)?.0 < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (lam_hi, fixed_hi) = at(hi)?;
    let no_jump = || Error::Convergence {
        solver: "alpha of lambda",
        iterations: 0,
        last: hi,
        residual: (lam_hi - lambda).abs(),
    };
    let tau_hi = fixed_hi.positive().ok_or_else(no_jump)?;
    let tau_lo = match at(lo)?.1 {
        TauFixedPoint::Positive(t) => t,
        TauFixedPoint::Degenerate { .. } => 1e-3 * opts.tau_floor,
    };
    if !(tau_hi > tau_lo) {
        return Err(no_jump());
    }
    let alpha = hi;
    let tau = brent(
        |tau| calibration_factor(shape, prior, tau, alpha) * alpha * tau - lambda,
        tau_lo,
        tau_hi,
        RootOptions {
            xtol: 1e-15 * tau_hi,
            ftol: opts.lambda_rtol * lambda.max(1.0),
            max_iter: 300,
        },
    )
    .map_err(|_| no_jump())?;
    let residual = scaled_gap(shape.delta, prior, sigma, alpha, tau);
    if residual.abs() > 1e-8 {
        return Err(Error::Convergence {
            solver: "alpha of lambda (jump)",
            iterations: 0,
            last: tau,
            residual,
        });
    }
    let lam = calibration_factor(shape, prior, tau, alpha) * alpha * tau;
    Ok(StateEvolutionPoint { alpha, tau, lambda: lam })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_math::{norm_cdf, norm_pdf};
    use approx::assert_abs_diff_eq;

    fn shape(d: f64, e: f64) -> ProblemShape {
        ProblemShape::new(d, e).unwrap()
    }

    /// Damped fixed-point iteration from an arbitrary start, run to stagnation.
    fn iterate_oracle(delta: f64, prior: &DiscretePrior, sigma: f64, alpha: f64, start: f64) -> f64 {
        let mut tau = start;
        for _ in 0..200_000 {
            let mse = crate::scalar_math::shrinkage_mse(prior, tau, alpha);
            let next = 0.5 * tau + 0.5 * (sigma * sigma + mse / delta).sqrt();
            if (next - tau).abs() < 1e-15 {
                return next;
            }
            tau = next;
        }
        tau
    }

    #[test]
    fn alpha0_examples() {
        assert_eq!(alpha0(shape(1.0, 0.3)), 0.0);
        assert_eq!(alpha0(shape(2.0, 0.3)), 0.0);
        let t = alpha0(shape(0.5, 0.3));
        assert!(t > 0.0);
        let f = |t: f64| (1.0 + t * t) * norm_cdf(-t) - t * norm_pdf(t) - 0.25;
        assert!(f(t).abs() < 1e-10);
        // bisection oracle on [0, 10]
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(t, 0.5 * (lo + hi), epsilon = 1e-10);
    }

    #[test]
    fn tau_noise_only_limit() {
        let prior = DiscretePrior::point_mass_at_zero();
        let tau = solve_tau_fixed_point(shape(1.0, 0.3), &prior, 1.0, 12.0)
            .unwrap()
            .positive()
            .unwrap();
        assert_abs_diff_eq!(tau, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tau_collapses_below_transition_without_noise() {
        // δ = 0.7, ε = 0.1 sits below the transition, so a noiseless problem
        // is recovered exactly for thresholds near alpha0.
        let s = shape(0.7, 0.1);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.1).unwrap();
        // thresholds where 2(1−ε)[(1+α²)Φ(−α) − αφ(α)] + ε(1+α²) < δ
        let lhs = |a: f64| 2.0 * 0.9 * half_noise_risk(a) + 0.1 * (1.0 + a * a);
        let a = (1..400)
            .map(|i| alpha0(s) + i as f64 * 0.01)
            .min_by(|x, y| lhs(*x).partial_cmp(&lhs(*y)).unwrap())
            .unwrap();
        assert!(lhs(a) < 0.7);
        let out = solve_tau_fixed_point(s, &prior, 0.0, a).unwrap();
        assert!(matches!(out, TauFixedPoint::Degenerate { .. }), "{out:?}");
    }

    #[test]
    fn tau_matches_multistart_oracle() {
        let s = shape(0.8, 0.2);
        let prior = DiscretePrior::conditional(&[(2.0, 1.0)]).unwrap().with_sparsity(0.2).unwrap();
        let tau = solve_tau_fixed_point(s, &prior, 0.5, 1.5).unwrap().positive().unwrap();
        for start in [0.1, 1.0, 10.0] {
            let oracle = iterate_oracle(0.8, &prior, 0.5, 1.5, start);
            assert_abs_diff_eq!(tau, oracle, epsilon = 1e-8);
        }
        assert!(tau >= 0.5);
    }

    #[test]
    fn tau_rejects_small_alpha() {
        let s = shape(0.5, 0.2);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.2).unwrap();
        assert!(solve_tau_fixed_point(s, &prior, 1.0, alpha0(s)).is_err());
        assert!(solve_tau_fixed_point(s, &prior, -1.0, 2.0).is_err());
    }

    #[test]
    fn tau_near_alpha0_uses_bracket() {
        let s = shape(0.5, 0.2);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.2).unwrap();
        let a = alpha0(s) + 1e-4;
        let tau = solve_tau_fixed_point(s, &prior, 1.0, a).unwrap().positive().unwrap();
        assert!(tau > 10.0);
        let mapped = tau_map(0.5, &prior, 1.0, a, tau);
        assert!((mapped - tau).abs() <= 1e-9 * tau);
    }

    #[test]
    fn lambda_grows_with_alpha() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        let l20 = lambda_of_alpha(s, &prior, 0.25, 20.0).unwrap();
        let l50 = lambda_of_alpha(s, &prior, 0.25, 50.0).unwrap();
        assert!(l50 > l20);
    }

    #[test]
    fn lambda_positive_when_oversampled() {
        let s = shape(1.5, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        for a in [0.01, 0.1, 0.5, 1.0, 3.0] {
            assert!(lambda_of_alpha(s, &prior, 0.5, a).unwrap() > 0.0);
        }
    }

    #[test]
    fn lambda_golden_value() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        let (sigma, alpha) = (0.25, 2.0);
        let tau = iterate_oracle(0.7, &prior, sigma, alpha, 10.0);
        for start in [0.1, 1.0] {
            assert_abs_diff_eq!(tau, iterate_oracle(0.7, &prior, sigma, alpha, start), epsilon = 1e-10);
        }
        let p = 0.7 * 2.0 * norm_cdf(-alpha)
            + 0.3 * (norm_cdf(-alpha + 1.0 / tau) + norm_cdf(-alpha - 1.0 / tau));
        let oracle = (1.0 - p / 0.7) * alpha * tau;
        let lam = lambda_of_alpha(s, &prior, sigma, alpha).unwrap();
        assert_abs_diff_eq!(lam, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(lam, LAMBDA_GOLDEN, epsilon = 1e-9);
    }

    const LAMBDA_GOLDEN: f64 = 1.056_046_410_656_548;

    #[test]
    fn alpha_round_trip() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        let lam = lambda_of_alpha(s, &prior, 0.25, 1.7).unwrap();
        let pt = solve_alpha_of_lambda(s, &prior, 0.25, lam).unwrap();
        assert_abs_diff_eq!(pt.alpha, 1.7, epsilon = 1e-7);
        assert!((pt.lambda - lam).abs() <= 1e-9 * lam.max(1.0));
    }

    #[test]
    fn alpha_increases_along_lambda_grid() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let mut hint = None;
        for i in 0..50 {
            let lam = 10f64.powf(-3.0 + 4.0 * i as f64 / 49.0);
            let pt = solve_alpha_near(s, &prior, 0.25, lam, hint, &SolverOptions::default()).unwrap();
            assert!(pt.alpha > prev);
            assert!(pt.alpha > alpha0(s));
            assert!(pt.tau >= 0.25);
            prev = pt.alpha;
            hint = Some(pt.alpha);
        }
    }

    #[test]
    fn large_lambda_gives_large_alpha() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        let pt = solve_alpha_of_lambda(s, &prior, 0.25, 100.0).unwrap();
        assert!(pt.alpha > 50.0);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let s = shape(0.7, 0.3);
        let prior = DiscretePrior::conditional(&[(1.0, 1.0)]).unwrap().with_sparsity(0.3).unwrap();
        assert!(solve_alpha_of_lambda(s, &prior, 0.25, 0.0).is_err());
        assert!(solve_alpha_of_lambda(s, &prior, 0.25, -1.0).is_err());
    }
}
