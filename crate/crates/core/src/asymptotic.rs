//! The deterministic limit of the Lasso path: `(tpp∞(λ), fdp∞(λ))` curves,
//! their endpoints, and a numeric search for parameters reaching a target
//! point of the feasible region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{l2_value, transition_for};
use crate::error::{Error, Result};
use crate::region::{FeasibleRegion, TradeoffPoint};
use crate::roots::{bisect, brent, RootOptions};
use crate::scalar_math::{exceed_probability, norm_cdf, p_exceed, DiscretePrior};
use crate::state_evolution::{
    alpha0, lambda_of_alpha_with, solve_alpha_near, solve_tau_with, NoiseLevel, ProblemShape,
    SolverOptions, StateEvolutionPoint, TauFixedPoint,
};

const MAX_LEVELS: usize = 64;

/// Geometric magnitude ladder `base, base·ratio, …` with equal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyFields")]
pub struct HeterogeneousFamily {
    pub m: usize,
    pub base: f64,
    pub ratio: f64,
}

#[derive(Deserialize)]
struct FamilyFields {
    m: usize,
    #[serde(default = "default_base")]
    base: f64,
    #[serde(default = "default_ratio")]
    ratio: f64,
}

fn default_base() -> f64 {
    0.01
}

fn default_ratio() -> f64 {
    10.0
}

impl TryFrom<FamilyFields> for HeterogeneousFamily {
    type Error = Error;

    fn try_from(f: FamilyFields) -> Result<Self> {
        HeterogeneousFamily::with_ladder(f.m, f.base, f.ratio)
    }
}

impl HeterogeneousFamily {
    pub fn new(m: usize) -> Result<Self> {
        Self::with_ladder(m, default_base(), default_ratio())
    }

    pub fn with_ladder(m: usize, base: f64, ratio: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("family needs at least one level"));
        }
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::domain(format!("base magnitude must be positive, got {base}")));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::domain(format!("ratio must exceed 1, got {ratio}")));
        }
        if m > MAX_LEVELS {
            return Err(Error::domain(format!("at most {MAX_LEVELS} levels, got {m}")));
        }
        let top = base * ratio.powi(m as i32 - 1);
        if !top.is_finite() || top > 1e150 {
            return Err(Error::domain(format!("largest magnitude {top} is out of range")));
        }
        Ok(HeterogeneousFamily { m, base, ratio })
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.base * self.ratio.powi(i as i32)).collect()
    }

    /// The conditional prior `Π⋆`.
    pub fn prior(&self) -> DiscretePrior {
        let w = 1.0 / self.m as f64;
        let pairs: Vec<(f64, f64)> = self.levels().into_iter().map(|v| (v, w)).collect();
        DiscretePrior::conditional(&pairs).expect("ladder levels are positive and finite")
    }
}

/// One solved point of the limit curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub se: StateEvolutionPoint,
    pub point: TradeoffPoint,
}

/// `2(1−ε)Φ(−α)`: mass of null coordinates crossing the threshold.
fn null_exceed(shape: ProblemShape, alpha: f64) -> f64 {
    2.0 * (1.0 - shape.epsilon) * norm_cdf(-alpha)
}

fn fdp_ratio(null: f64, signal: f64) -> f64 {
    let total = null + signal;
    if total > 0.0 {
        null / total
    } else {
        0.0
    }
}

fn check_conditional(prior_star: &DiscretePrior) -> Result<()> {
    if !prior_star.is_conditional() {
        return Err(Error::domain("expected a conditional prior with no atom at zero"));
    }
    Ok(())
}

/// Evaluates the limit point at a known threshold multiplier and `τ`.
fn point_at(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    full: &DiscretePrior,
    alpha: f64,
    tau: f64,
) -> Result<TradeoffPoint> {
    let tpp = p_exceed(prior_star, tau, alpha)?;
    let null = null_exceed(shape, alpha);
    let fdp = fdp_ratio(null, shape.epsilon * tpp);
    let via_full = fdp_ratio(null, exceed_probability(full, tau, alpha) - null);
    if (fdp - via_full).abs() > 1e-10 {
        return Err(Error::Convergence {
            solver: "fdp consistency",
            iterations: 0,
            last: fdp,
            residual: (fdp - via_full).abs(),
        });
    }
    Ok(TradeoffPoint { tpp, fdp })
}

/// Limit point for `σ = ∞`. `λ` is read on the noise scale: the signal
/// vanishes relative to the noise and only the null fraction matters.
fn infinite_noise_point(shape: ProblemShape, lambda: f64, hint: Option<f64>) -> Result<CurvePoint> {
    let null = DiscretePrior::point_mass_at_zero();
    let se = solve_alpha_near(shape, &null, 1.0, lambda, hint, &SolverOptions::default())?;
    Ok(CurvePoint {
        lambda,
        se,
        point: TradeoffPoint {
            tpp: 2.0 * norm_cdf(-se.alpha),
            fdp: 1.0 - shape.epsilon,
        },
    })
}

pub fn tpp_fdp_infinity(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    noise: NoiseLevel,
    lambda: f64,
) -> Result<CurvePoint> {
    evaluate(shape, prior_star, noise, lambda, None)
}

fn evaluate(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    noise: NoiseLevel,
    lambda: f64,
    hint: Option<f64>,
) -> Result<CurvePoint> {
    check_conditional(prior_star)?;
    let sigma = match noise {
        NoiseLevel::Infinite => return infinite_noise_point(shape, lambda, hint),
        NoiseLevel::Finite(s) => s,
    };
    let full = prior_star.with_sparsity(shape.epsilon)?;
    let se = solve_alpha_near(shape, &full, sigma, lambda, hint, &SolverOptions::default())?;
    let point = point_at(shape, prior_star, &full, se.alpha, se.tau)?;
    Ok(CurvePoint { lambda, se, point })
}

/// Evaluates the curve at threshold `α` directly; `None` when the matching
/// penalty is not positive (the threshold lies below the Lasso path).
pub fn point_at_alpha(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    sigma: f64,
    alpha: f64,
) -> Result<Option<CurvePoint>> {
    check_conditional(prior_star)?;
    let full = prior_star.with_sparsity(shape.epsilon)?;
    let (lambda, fixed) = lambda_of_alpha_with(shape, &full, sigma, alpha, &SolverOptions::default())?;
    let tau = match fixed {
        TauFixedPoint::Positive(t) if lambda > 0.0 => t,
        _ => return Ok(None),
    };
    let point = point_at(shape, prior_star, &full, alpha, tau)?;
    Ok(Some(CurvePoint {
        lambda,
        se: StateEvolutionPoint { alpha, tau, lambda },
        point,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n: usize,
    pub log_spaced: bool,
}

impl LambdaGrid {
    /// Grid values in increasing order.
    pub fn values(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (self.lambda_min, self.lambda_max);
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::domain(format!("need 0 < lambda_min < lambda_max, got [{lo}, {hi}]")));
        }
        if self.n < 2 {
            return Err(Error::domain("lambda grid needs at least two points"));
        }
        let last = (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| {
                let f = i as f64 / last;
                if self.log_spaced {
                    (lo.ln() + f * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + f * (hi - lo)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroPenaltyBranch {
    /// On the vertical line `tpp = 1`.
    FullPower,
    /// On the line `(ε/δ)·tpp + fdp = 1`.
    DiscoveryLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPenaltyLimit {
    pub point: TradeoffPoint,
    pub branch: ZeroPenaltyBranch,
    /// True when the shape allows either branch and the prior decided.
    pub on_poly_line: bool,
    /// Distance from the point to the line named by `branch`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointLimits {
    pub lambda_to_0: ZeroPenaltyLimit,
    pub lambda_to_inf: TradeoffPoint,
    /// Threshold used for the large-penalty end.
    pub alpha_cap: f64,
}

/// Largest `α` with `Φ(−α) > 1e-300`.
pub fn alpha_cap() -> f64 {
    brent(
        |a| norm_cdf(-a).ln() - (1e-300f64).ln(),
        1.0,
        40.0,
        RootOptions::default(),
    )
    .expect("Φ(−α) crosses 1e-300 between 1 and 40")
    .next_down()
}

fn signal_scale(prior_star: &DiscretePrior, noise: NoiseLevel) -> f64 {
    match noise {
        NoiseLevel::Infinite => 1.0,
        NoiseLevel::Finite(s) => s.max(prior_star.max_abs()).max(1e-300),
    }
}

pub fn endpoint_limits(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    noise: NoiseLevel,
) -> Result<EndpointLimits> {
    check_conditional(prior_star)?;
    let cap = alpha_cap();
    let lambda_to_inf = match noise {
        NoiseLevel::Infinite => TradeoffPoint {
            tpp: 2.0 * norm_cdf(-cap),
            fdp: 1.0 - shape.epsilon,
        },
        NoiseLevel::Finite(sigma) => {
            let full = prior_star.with_sparsity(shape.epsilon)?;
            let tau = match solve_tau_with(shape, &full, sigma, cap, &SolverOptions::default())? {
                TauFixedPoint::Positive(t) => t,
                TauFixedPoint::Degenerate { .. } => {
                    return Err(Error::Convergence {
                        solver: "large-penalty endpoint",
                        iterations: 0,
                        last: cap,
                        residual: 0.0,
                    })
                }
            };
            point_at(shape, prior_star, &full, cap, tau)?
        }
    };

    let scale = signal_scale(prior_star, noise);
    let mut lambda = 1e-9 * scale;
    let mut last_err = None;
    let mut zero_end = None;
    for _ in 0..12 {
        match evaluate(shape, prior_star, noise, lambda, None) {
            Ok(p) => {
                zero_end = Some(p.point);
                break;
            }
            Err(e) => {
                last_err = Some(e);
                lambda *= 10.0;
            }
        }
    }
    let point = match zero_end {
        Some(p) => p,
        None => return Err(last_err.expect("loop ran at least once")),
    };
    let full_power = 1.0 - point.tpp;
    let on_line = (l2_value(point.tpp, shape) - point.fdp).abs();
    let dt = transition_for(shape)?;
    let (branch, on_poly_line) = match dt {
        _ if shape.delta > 1.0 => (ZeroPenaltyBranch::FullPower, false),
        Some(dt) if shape.epsilon >= dt.epsilon_star => (ZeroPenaltyBranch::DiscoveryLine, false),
        _ if full_power <= on_line => (ZeroPenaltyBranch::FullPower, true),
        _ => (ZeroPenaltyBranch::DiscoveryLine, true),
    };
    let residual = match branch {
        ZeroPenaltyBranch::FullPower => full_power,
        ZeroPenaltyBranch::DiscoveryLine => on_line,
    };
    Ok(EndpointLimits {
        lambda_to_0: ZeroPenaltyLimit {
            point,
            branch,
            on_poly_line,
            residual,
        },
        lambda_to_inf,
        alpha_cap: cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPath {
    pub shape: ProblemShape,
    pub prior: DiscretePrior,
    /// `None` for infinite noise.
    pub sigma: Option<f64>,
    pub grid: Vec<f64>,
    /// Solved points in increasing `λ`; failed grid values are skipped.
    pub points: Vec<CurvePoint>,
    pub failures: Vec<PathFailure>,
    pub endpoints: Option<EndpointLimits>,
}

/// Solves the curve on a grid, warm-starting each threshold search from the
/// neighbouring solution. Failed grid values are recorded and skipped.
pub fn path(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    noise: NoiseLevel,
    grid: &LambdaGrid,
) -> Result<AsymptoticPath> {
    check_conditional(prior_star)?;
    let values = grid.values()?;
    let mut points = Vec::with_capacity(values.len());
    let mut failures = Vec::new();
    let mut hint = None;
    for &lambda in values.iter().rev() {
        match evaluate(shape, prior_star, noise, lambda, hint) {
            Ok(p) => {
                hint = Some(p.se.alpha);
                points.push(p);
            }
            Err(e) => {
                log::debug!("path point lambda={lambda} failed: {e}");
                failures.push(PathFailure {
                    lambda,
                    message: e.to_string(),
                });
            }
        }
    }
    points.reverse();
    failures.reverse();
    let endpoints = match endpoint_limits(shape, prior_star, noise) {
        Ok(e) => Some(e),
        Err(e) => {
            log::warn!("endpoint limits unavailable: {e}");
            None
        }
    };
    Ok(AsymptoticPath {
        shape,
        prior: prior_star.clone(),
        sigma: match noise {
            NoiseLevel::Finite(s) => Some(s),
            NoiseLevel::Infinite => None,
        },
        grid: values,
        points,
        failures,
        endpoints,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Achievement {
    pub family: HeterogeneousFamily,
    pub sigma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub achieved: TradeoffPoint,
    pub distance: f64,
}

/// Options for [`achieve_point`].
#[derive(Debug, Clone, Copy)]
pub struct AchieveOptions {
    pub family: HeterogeneousFamily,
    /// Noise levels tried on a log grid between these multiples of the
    /// smallest and largest magnitude, plus `σ = 0`.
    pub sigma_span: (f64, f64),
    pub sigma_grid: usize,
    pub bisection_steps: usize,
}

impl Default for AchieveOptions {
    fn default() -> Self {
        AchieveOptions {
            family: HeterogeneousFamily::new(8).expect("valid ladder"),
            sigma_span: (1e-4, 1e3),
            sigma_grid: 48,
            bisection_steps: 60,
        }
    }
}

/// The part of one noise level's curve relevant to a target power.
struct Slice {
    sigma: f64,
    /// Curve point at the target power, if the curve reaches it.
    at_target: Option<CurvePoint>,
    /// Point of the curve closest to the target.
    closest: Option<CurvePoint>,
}

/// Smallest threshold with a positive penalty, by bisection on the sign of `λ`.
fn alpha_floor(shape: ProblemShape, full: &DiscretePrior, sigma: f64, cap: f64) -> Option<f64> {
    let opts = SolverOptions::default();
    let positive = |a: f64| {
        matches!(
            lambda_of_alpha_with(shape, full, sigma, a, &opts),
            Ok((l, TauFixedPoint::Positive(_))) if l > 0.0
        )
    };
    let a0 = alpha0(shape);
    if !positive(cap) {
        return None;
    }
    let mut lo = a0;
    let mut hi = cap;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Some(hi)
}

fn slice_at(
    shape: ProblemShape,
    prior_star: &DiscretePrior,
    sigma: f64,
    target: TradeoffPoint,
) -> Result<Slice> {
    let full = prior_star.with_sparsity(shape.epsilon)?;
    let cap = alpha_cap();
    let empty = Slice {
        sigma,
        at_target: None,
        closest: None,
    };
    let Some(floor) = alpha_floor(shape, &full, sigma, cap) else {
        return Ok(empty);
    };
    let eval = |a: f64| point_at_alpha(shape, prior_star, sigma, a).ok().flatten();
    // step just inside the usable range
    let mut lo = floor;
    let mut lo_pt = eval(lo);
    let mut nudge = 1e-12 * floor.max(1.0);
    while lo_pt.is_none() && nudge < 1e-2 {
        lo = floor + nudge;
        lo_pt = eval(lo);
        nudge *= 10.0;
    }
    let Some(lo_pt) = lo_pt else {
        return Ok(empty);
    };
    let Some(hi_pt) = eval(cap) else {
        return Ok(empty);
    };

    let closest_on_scan = || {
        let n = 64;
        (0..=n)
            .filter_map(|i| {
                let a = lo + (cap.min(12.0).max(lo) - lo) * i as f64 / n as f64;
                eval(a)
            })
            .min_by(|p, q| {
                p.point
                    .distance(&target)
                    .total_cmp(&q.point.distance(&target))
            })
    };

    if target.tpp > lo_pt.point.tpp || target.tpp < hi_pt.point.tpp {
        return Ok(Slice {
            sigma,
            at_target: None,
            closest: closest_on_scan(),
        });
    }
    let alpha = bisect(
        |a| eval(a).map_or(f64::NAN, |p| p.point.tpp - target.tpp),
        lo,
        cap,
        1e-13,
        200,
    )?;
    let at = eval(alpha);
    Ok(Slice {
        sigma,
        at_target: at,
        closest: at,
    })
}

/// Searches noise level and penalty so that the limit curve of
/// `opts.family` passes through `target` within `tol`.
///
/// Noise levels are scanned on a grid, then bracketed and bisected on the
/// signed vertical offset of the curve at the target power. The best point
/// seen is reported when no bracket exists.
pub fn achieve_point(
    target: TradeoffPoint,
    shape: ProblemShape,
    tol: f64,
    opts: &AchieveOptions,
) -> Result<Achievement> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let region = FeasibleRegion::new(shape)?;
    if !region.contains(target, 0.0)? {
        return Err(Error::Infeasible {
            target,
            reason: describe_violation(&region, target)?,
        });
    }
    let family = opts.family;
    let prior = family.prior();
    let levels = family.levels();
    let (lo_mult, hi_mult) = opts.sigma_span;
    let (s_lo, s_hi) = (lo_mult * levels[0], hi_mult * levels[levels.len() - 1]);
    let n = opts.sigma_grid.max(2);
    let mut sigmas = vec![0.0];
    sigmas.extend((0..n).map(|i| {
        let f = i as f64 / (n - 1) as f64;
        (s_lo.ln() + f * (s_hi.ln() - s_lo.ln())).exp()
    }));

    let slices: Vec<Slice> = sigmas
        .par_iter()
        .map(|&s| slice_at(shape, &prior, s, target))
        .collect::<Result<_>>()?;

    let finish = |p: CurvePoint, sigma: f64| Achievement {
        family,
        sigma,
        lambda: p.lambda,
        alpha: p.se.alpha,
        achieved: p.point,
        distance: p.point.distance(&target),
    };
    let mut best: Option<Achievement> = None;
    let consider = |a: Achievement, best: &mut Option<Achievement>| {
        if best.as_ref().is_none_or(|b| a.distance < b.distance) {
            *best = Some(a);
        }
    };
    for s in &slices {
        if let Some(p) = s.closest {
            consider(finish(p, s.sigma), &mut best);
        }
    }

    let offset = |s: &Slice| s.at_target.map(|p| p.point.fdp - target.fdp);
    for w in slices.windows(2) {
        let (Some(f0), Some(f1)) = (offset(&w[0]), offset(&w[1])) else {
            continue;
        };
        if f0.signum() == f1.signum() {
            continue;
        }
        let log_axis = w[0].sigma > 0.0;
        let to_axis = |s: f64| if log_axis { s.ln() } else { s };
        let from_axis = |x: f64| if log_axis { x.exp() } else { x };
        let (mut a, mut b) = (to_axis(w[0].sigma), to_axis(w[1].sigma));
        let mut fa = f0;
        for _ in 0..opts.bisection_steps {
            let mid = 0.5 * (a + b);
            let slice = slice_at(shape, &prior, from_axis(mid), target)?;
            let Some(p) = slice.at_target else { break };
            consider(finish(p, slice.sigma), &mut best);
            let fm = p.point.fdp - target.fdp;
            if fm.abs() <= 1e-3 * tol {
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        if best.as_ref().is_some_and(|b| b.distance <= tol) {
            break;
        }
    }

    match best {
        Some(b) if b.distance <= tol => {
            // re-evaluate through the penalty to confirm the round trip
            let check = tpp_fdp_infinity(shape, &prior, NoiseLevel::new(b.sigma)?, b.lambda)?;
            let distance = check.point.distance(&target);
            if distance <= tol {
                Ok(Achievement {
                    achieved: check.point,
                    alpha: check.se.alpha,
                    distance,
                    ..b
                })
            } else {
                Err(Error::NotFound {
                    target,
                    closest: check.point,
                })
            }
        }
        Some(b) => Err(Error::NotFound {
            target,
            closest: b.achieved,
        }),
        None => Err(Error::NotFound {
            target,
            closest: TradeoffPoint { tpp: 0.0, fdp: 0.0 },
        }),
    }
}

fn describe_violation(region: &FeasibleRegion, target: TradeoffPoint) -> Result<String> {
    let c = region.check(target, 0.0)?;
    let mut failed = Vec::new();
    if !c.power_range {
        failed.push("tpp outside [0, 1]");
    }
    if !c.random_guess {
        failed.push("fdp above 1 - epsilon");
    }
    if !c.lower_boundary {
        failed.push("fdp below the lower boundary");
    }
    if !c.discoveries {
        failed.push("more discoveries than observations");
    }
    Ok(failed.join(", "))
}
