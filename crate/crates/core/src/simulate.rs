//! Finite-sample experiments: Gaussian designs, Lasso paths, empirical
//! (TPP, FDP) averaged over trials, and containment in the feasible region.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{path as lasso_path, DesignProblem, FitOptions, LassoFit};
use crate::region::{ConstraintCheck, FeasibleRegion, TradeoffPoint};
use crate::scalar_math::DiscretePrior;
use crate::state_evolution::ProblemShape;

/// Trials may fail up to this fraction before a run is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLevel {
    pub magnitude: f64,
    pub count: usize,
}

/// `n_lambda` log-spaced penalties from `min_ratio·λmax` to `λmax`, where
/// `λmax = max_j |X_j'y|` is taken per instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeGrid {
    pub n_lambda: usize,
    pub min_ratio: f64,
}

impl Default for RelativeGrid {
    fn default() -> Self {
        RelativeGrid {
            n_lambda: 50,
            min_ratio: 0.01,
        }
    }
}

impl RelativeGrid {
    /// Ratios to `λmax`, descending from 1.
    pub fn ratios(&self) -> Vec<f64> {
        let last = (self.n_lambda - 1) as f64;
        (0..self.n_lambda)
            .map(|i| self.min_ratio.powf(i as f64 / last))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub beta_spec: Vec<BetaLevel>,
    pub sigma: f64,
    #[serde(default)]
    pub lambda_grid: RelativeGrid,
    pub trials: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let total: usize = self.beta_spec.iter().map(|l| l.count).sum();
        if total != self.k {
            return bad(format!("beta levels hold {total} signals but k = {}", self.k));
        }
        if self.k == 0 || self.k > self.p {
            return bad(format!("need 1 <= k <= p, got k = {}, p = {}", self.k, self.p));
        }
        if let Some(l) = self.beta_spec.iter().find(|l| !l.magnitude.is_finite() || l.magnitude == 0.0) {
            return bad(format!("beta magnitude {} must be finite and nonzero", l.magnitude));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be finite and nonnegative, got {}", self.sigma));
        }
        let g = self.lambda_grid;
        if g.n_lambda < 2 || !(g.min_ratio > 0.0 && g.min_ratio < 1.0) {
            return bad(format!(
                "lambda grid needs n_lambda >= 2 and min_ratio in (0, 1), got {} and {}",
                g.n_lambda, g.min_ratio
            ));
        }
        Ok(())
    }

    /// `(n/p, k/p)`; fails when every coordinate is a signal.
    pub fn shape(&self) -> Result<ProblemShape> {
        ProblemShape::new(self.n as f64 / self.p as f64, self.k as f64 / self.p as f64)
    }

    /// Conditional law of the nonzero coefficients.
    pub fn prior_star(&self) -> Result<DiscretePrior> {
        let levels: Vec<(f64, usize)> = self.beta_spec.iter().map(|l| (l.magnitude, l.count)).collect();
        DiscretePrior::from_levels(&levels)
    }
}

/// A configuration swept over several noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    #[serde(flatten)]
    pub config: SimulationConfig,
    /// Replaces `sigma` when nonempty.
    #[serde(default)]
    pub sigma_levels: Vec<f64>,
}

impl SimulationPlan {
    pub fn configs(&self) -> Vec<SimulationConfig> {
        if self.sigma_levels.is_empty() {
            return vec![self.config.clone()];
        }
        self.sigma_levels
            .iter()
            .map(|&sigma| SimulationConfig {
                sigma,
                ..self.config.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrial {
    pub problem: DesignProblem,
    pub beta: Vec<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
}

fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws the design, coefficients and noise of one trial. The draw depends
/// only on `(seed, trial_index)`.
pub fn generate(config: &SimulationConfig, trial_index: u64) -> Result<GeneratedTrial> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut rng = trial_rng(config.seed, trial_index);
    let scale = 1.0 / (n as f64).sqrt();
    let x: Vec<f64> = (0..n * p)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            scale * w
        })
        .collect();
    let positions = index::sample(&mut rng, p, config.k).into_vec();
    let mut beta = vec![0.0; p];
    let mut slots = positions.iter();
    for level in &config.beta_spec {
        for &j in slots.by_ref().take(level.count) {
            beta[j] = level.magnitude;
        }
    }
    let mut support = positions;
    support.sort_unstable();
    let mut y = vec![0.0; n];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (yi, xi) in y.iter_mut().zip(&x[j * n..(j + 1) * n]) {
                *yi += b * xi;
            }
        }
    }
    if config.sigma > 0.0 {
        for yi in &mut y {
            let z: f64 = StandardNormal.sample(&mut rng);
            *yi += config.sigma * z;
        }
    }
    Ok(GeneratedTrial {
        problem: DesignProblem::new(n, p, x, y)?,
        beta,
        support,
    })
}

/// Empirical (TPP, FDP) of a fit; FDP is 0 when nothing is selected.
pub fn tpp_fdp(fit: &LassoFit, true_support: &[usize], k: usize) -> Result<TradeoffPoint> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let true_hits = fit
        .support
        .iter()
        .filter(|j| true_support.binary_search(j).is_ok())
        .count();
    let discoveries = fit.support.len();
    let fdp = if discoveries == 0 {
        0.0
    } else {
        (discoveries - true_hits) as f64 / discoveries as f64
    };
    Ok(TradeoffPoint {
        tpp: true_hits as f64 / k as f64,
        fdp,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPath {
    pub trial_index: u64,
    pub lambdas: Vec<f64>,
    pub points: Vec<TradeoffPoint>,
    pub discoveries: Vec<usize>,
}

pub fn run_trial(config: &SimulationConfig, trial_index: u64) -> Result<TrialPath> {
    let trial = generate(config, trial_index)?;
    let lmax = trial.problem.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::domain("response is orthogonal to every column"));
    }
    let lambdas: Vec<f64> = config.lambda_grid.ratios().iter().map(|r| r * lmax).collect();
    let fits = lasso_path(&trial.problem, &lambdas, &FitOptions::default())?;
    if let Some(e) = fits.errors.first() {
        return Err(Error::Convergence {
            solver: "lasso path",
            iterations: e.index,
            last: e.lambda,
            residual: f64::NAN,
        });
    }
    let points = fits
        .fits
        .iter()
        .map(|f| tpp_fdp(f, &trial.support, config.k))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialPath {
        trial_index,
        lambdas,
        points,
        discoveries: fits.fits.iter().map(|f| f.support.len()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPoint {
    pub lambda_ratio: f64,
    /// Mean over trials of the penalty actually used.
    pub lambda: f64,
    pub mean_tpp: f64,
    pub mean_fdp: f64,
    pub std_tpp: f64,
    pub std_fdp: f64,
    pub n_trials: usize,
}

impl EmpiricalPoint {
    pub fn mean(&self) -> TradeoffPoint {
        TradeoffPoint {
            tpp: self.mean_tpp,
            fdp: self.mean_fdp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPath {
    pub config: SimulationConfig,
    pub points: Vec<EmpiricalPoint>,
    pub failed_trials: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs every trial in parallel and averages in trial order, so results do
/// not depend on the number of workers.
pub fn run(config: &SimulationConfig) -> Result<EmpiricalPath> {
    config.validate()?;
    let outcomes: Vec<Result<TrialPath>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect();
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(path) => trials.push(path),
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                failed += 1;
            }
        }
    }
    if trials.is_empty() || failed as f64 > MAX_FAILED_FRACTION * config.trials as f64 {
        return Err(Error::TrialFailures {
            failed,
            total: config.trials,
        });
    }
    let ratios = config.lambda_grid.ratios();
    let points = ratios
        .iter()
        .enumerate()
        .map(|(i, &lambda_ratio)| {
            let (mean_tpp, std_tpp) = mean_std(trials.iter().map(|t| t.points[i].tpp));
            let (mean_fdp, std_fdp) = mean_std(trials.iter().map(|t| t.points[i].fdp));
            let (lambda, _) = mean_std(trials.iter().map(|t| t.lambdas[i]));
            EmpiricalPoint {
                lambda_ratio,
                lambda,
                mean_tpp,
                mean_fdp,
                std_tpp,
                std_fdp,
                n_trials: trials.len(),
            }
        })
        .collect();
    Ok(EmpiricalPath {
        config: config.clone(),
        points,
        failed_trials: failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub index: usize,
    pub point: TradeoffPoint,
    pub checks: ConstraintCheck,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub shape: ProblemShape,
    pub slack: f64,
    pub points: Vec<PointCheck>,
    pub pass_fraction: f64,
}

pub fn containment_of_points(
    points: &[TradeoffPoint],
    shape: ProblemShape,
    slack: f64,
) -> Result<ContainmentReport> {
    if !(slack > 0.0) {
        return Err(Error::domain(format!("slack must be positive, got {slack}")));
    }
    let region = FeasibleRegion::new(shape)?;
    let checks = points
        .iter()
        .enumerate()
        .map(|(index, &point)| {
            let checks = region.check(point, slack)?;
            Ok(PointCheck {
                index,
                point,
                checks,
                pass: checks.all(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = checks.iter().filter(|c| c.pass).count();
    let pass_fraction = if checks.is_empty() {
        1.0
    } else {
        passed as f64 / checks.len() as f64
    };
    Ok(ContainmentReport {
        shape,
        slack,
        points: checks,
        pass_fraction,
    })
}

pub fn containment_report(path: &EmpiricalPath, shape: ProblemShape, slack: f64) -> Result<ContainmentReport> {
    let means: Vec<TradeoffPoint> = path.points.iter().map(|p| p.mean()).collect();
    containment_of_points(&means, shape, slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, p: usize, levels: &[(f64, usize)], sigma: f64, trials: usize) -> SimulationConfig {
        SimulationConfig {
            n,
            p,
            k: levels.iter().map(|l| l.1).sum(),
            beta_spec: levels
                .iter()
                .map(|&(magnitude, count)| BetaLevel { magnitude, count })
                .collect(),
            sigma,
            lambda_grid: RelativeGrid::default(),
            trials,
            seed: 42,
        }
    }

    fn fit_with_support(p: usize, support: Vec<usize>) -> LassoFit {
        let mut beta = vec![0.0; p];
        for &j in &support {
            beta[j] = 1.0;
        }
        LassoFit {
            lambda: 1.0,
            beta_hat: beta,
            support,
            iterations: 1,
            kkt_residual: 0.0,
        }
    }

    #[test]
    fn counting_examples() {
        let truth: Vec<usize> = (0..60).collect();
        let perfect = tpp_fdp(&fit_with_support(100, truth.clone()), &truth, 60).unwrap();
        assert_eq!(perfect, TradeoffPoint { tpp: 1.0, fdp: 0.0 });
        let empty = tpp_fdp(&fit_with_support(100, vec![]), &truth, 60).unwrap();
        assert_eq!(empty, TradeoffPoint { tpp: 0.0, fdp: 0.0 });
        let mut extra = truth.clone();
        extra.push(80);
        let one_false = tpp_fdp(&fit_with_support(100, extra), &truth, 60).unwrap();
        assert_eq!(one_false.tpp, 1.0);
        assert!((one_false.fdp - 1.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn design_columns_have_unit_norm_on_average() {
        let c = config(200, 300, &[(1.0, 30)], 1.0, 1);
        let t = generate(&c, 0).unwrap();
        let mean: f64 = (0..300)
            .map(|j| t.problem.column(j).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 300.0;
        assert!((mean - 1.0).abs() < 3.0 / (200f64).sqrt(), "{mean}");
        assert_eq!(t.support.len(), 30);
        assert!(t.support.iter().all(|&j| t.beta[j] == 1.0));
    }

    #[test]
    fn noiseless_response_is_exact() {
        let c = config(30, 40, &[(2.0, 5), (0.5, 5)], 0.0, 1);
        let t = generate(&c, 3).unwrap();
        assert_eq!(t.problem.predict(&t.beta), t.problem.y().to_vec());
    }

    #[test]
    fn draws_are_keyed_by_seed_and_trial() {
        let c = config(20, 30, &[(1.0, 6)], 0.5, 1);
        assert_eq!(generate(&c, 5).unwrap(), generate(&c, 5).unwrap());
        assert_ne!(generate(&c, 5).unwrap().problem, generate(&c, 6).unwrap().problem);
        let one = run(&c).unwrap();
        let two = run(&SimulationConfig { trials: 2, ..c.clone() }).unwrap();
        let first = run_trial(&c, 0).unwrap();
        for (p, q) in one.points.iter().zip(&first.points) {
            assert_eq!(p.mean(), *q);
        }
        assert_eq!(two.points[0].n_trials, 2);
    }

    #[test]
    fn trial_paths_respect_discovery_bound_and_monotone_power() {
        let c = config(60, 120, &[(0.5, 12), (3.0, 12)], 0.3, 3);
        let shape = c.shape().unwrap();
        for t in 0..3 {
            let path = run_trial(&c, t).unwrap();
            for (pt, &d) in path.points.iter().zip(&path.discoveries) {
                let bound = 1.0 + if d > 0 { 1.0 / d as f64 } else { 0.0 };
                assert!(shape.epsilon / shape.delta * pt.tpp + pt.fdp <= bound + 1e-12);
            }
            for w in path.points.windows(2) {
                assert!(w[1].tpp >= w[0].tpp - 1.0 / 24.0, "{:?}", path.points);
            }
        }
    }

    #[test]
    fn injected_random_guess_violation_is_flagged() {
        let shape = ProblemShape::new(0.7, 0.3).unwrap();
        let points = [
            TradeoffPoint { tpp: 0.0, fdp: 0.0 },
            TradeoffPoint { tpp: 0.3, fdp: 0.7 + 0.2 },
        ];
        let report = containment_of_points(&points, shape, 0.05).unwrap();
        assert!(report.points[0].pass);
        assert!(!report.points[1].pass);
        assert!(!report.points[1].checks.random_guess);
        assert_eq!(report.pass_fraction, 0.5);
        assert!(containment_of_points(&points, shape, 0.0).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = config(20, 30, &[(1.0, 6)], 0.5, 1);
        c.k = 7;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = config(20, 30, &[(1.0, 6)], -1.0, 1);
        assert!(c.validate().is_err());
        let c = config(20, 30, &[(1.0, 6)], 0.5, 0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn plan_expands_noise_levels() {
        let json = r#"{"n": 20, "p": 30, "k": 6, "beta_spec": [{"magnitude": 1.0, "count": 6}],
                       "sigma": 0.0, "trials": 2, "seed": 1, "sigma_levels": [0.0, 1.0, 10.0]}"#;
        let plan: SimulationPlan = serde_json::from_str(json).unwrap();
        let configs = plan.configs();
        assert_eq!(configs.len(), 3);
        assert_eq!(configs[2].sigma, 10.0);
        assert_eq!(configs[0].lambda_grid, RelativeGrid::default());
    }
}
