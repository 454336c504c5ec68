//! Lasso fits by cyclic coordinate descent, single penalties and warm-started
//! paths.
//!
//! The objective is `½‖y − Xb‖² + λ‖b‖₁`. Coordinates are updated with an
//! exact soft threshold, so zeros in a fit are exact zeros.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar_math::shrink;

/// Above this many columns the Gram matrix is not formed.
const GRAM_MAX_P: usize = 2000;
/// Support sweeps between attempts at an exact solve on the support.
const POLISH_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    n: usize,
    p: usize,
    /// Column-major `n × p`.
    x: Vec<f64>,
    y: Vec<f64>,
}

impl DesignProblem {
    pub fn new(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::domain(format!("design must be nonempty, got {n} x {p}")));
        }
        if x.len() != n * p {
            return Err(Error::domain(format!(
                "design has {} entries, expected {n} x {p}",
                x.len()
            )));
        }
        if y.len() != n {
            return Err(Error::domain(format!("response has length {}, expected {n}", y.len())));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("design and response must be finite"));
        }
        Ok(DesignProblem { n, p, x, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, xi) in out.iter_mut().zip(self.column(j)) {
                    *o += b * xi;
                }
            }
        }
        out
    }

    /// `X'v` for an `n`-vector `v`.
    pub fn xt(&self, v: &[f64]) -> Vec<f64> {
        (0..self.p).map(|j| dot(self.column(j), v)).collect()
    }

    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let fit = self.predict(beta);
        self.y.iter().zip(&fit).map(|(y, f)| y - f).collect()
    }

    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let r = self.residual(beta);
        0.5 * dot(&r, &r) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Smallest penalty whose fit is zero: `max_j |X_j'y|`.
    pub fn lambda_max(&self) -> f64 {
        self.xt(&self.y).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub lambda: f64,
    pub beta_hat: Vec<f64>,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

impl LassoFit {
    fn from_beta(lambda: f64, beta_hat: Vec<f64>, iterations: usize, kkt_residual: f64) -> Self {
        let support = (0..beta_hat.len()).filter(|&j| beta_hat[j] != 0.0).collect();
        LassoFit {
            lambda,
            beta_hat,
            support,
            iterations,
            kkt_residual,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Stop when `max_j |Δb_j|·‖X_j‖` falls below this; KKT must then hold
    /// within `10·tol`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

/// Largest violation of the optimality conditions at `beta`.
pub fn kkt_residual(problem: &DesignProblem, beta: &[f64], lambda: f64) -> f64 {
    let grad = problem.xt(&problem.residual(beta));
    grad.iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Coordinate descent state: either Gram-based (`g` holds `X'r`) or
/// residual-based (`r` holds `y − Xb`).
enum Updater<'a> {
    Gram { gram: &'a [f64], g: Vec<f64> },
    Residual { r: Vec<f64> },
}

struct Solver<'a> {
    problem: &'a DesignProblem,
    norms_sq: Vec<f64>,
    gram: Option<Vec<f64>>,
    xty: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a DesignProblem) -> Self {
        let p = problem.p;
        let norms_sq: Vec<f64> = (0..p).map(|j| dot(problem.column(j), problem.column(j))).collect();
        let gram = (p <= GRAM_MAX_P).then(|| {
            let mut g = vec![0.0; p * p];
            for j in 0..p {
                for k in j..p {
                    let v = dot(problem.column(j), problem.column(k));
                    g[j * p + k] = v;
                    g[k * p + j] = v;
                }
            }
            g
        });
        let xty = problem.xt(&problem.y);
        Solver {
            problem,
            norms_sq,
            gram,
            xty,
        }
    }

    fn updater(&self, beta: &[f64]) -> Updater<'_> {
        match &self.gram {
            Some(gram) => {
                let p = self.problem.p;
                let mut g = self.xty.clone();
                for (k, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        for (gj, gk) in g.iter_mut().zip(&gram[k * p..(k + 1) * p]) {
                            *gj -= b * gk;
                        }
                    }
                }
                Updater::Gram { gram, g }
            }
            None => Updater::Residual {
                r: self.problem.residual(beta),
            },
        }
    }

    /// One coordinate update; returns the scaled change.
    fn update(&self, up: &mut Updater<'_>, beta: &mut [f64], j: usize, lambda: f64) -> f64 {
        let nsq = self.norms_sq[j];
        if nsq == 0.0 {
            return 0.0;
        }
        let old = beta[j];
        let corr = match up {
            Updater::Gram { g, .. } => g[j],
            Updater::Residual { r } => dot(self.problem.column(j), r),
        };
        let new = shrink(corr + nsq * old, lambda) / nsq;
        let delta = new - old;
        if delta == 0.0 {
            return 0.0;
        }
        beta[j] = new;
        match up {
            Updater::Gram { gram, g } => {
                let p = self.problem.p;
                for (gk, gjk) in g.iter_mut().zip(&gram[j * p..(j + 1) * p]) {
                    *gk -= delta * gjk;
                }
            }
            Updater::Residual { r } => {
                for (ri, xi) in r.iter_mut().zip(self.problem.column(j)) {
                    *ri -= delta * xi;
                }
            }
        }
        delta.abs() * nsq.sqrt()
    }

    fn sweep(&self, up: &mut Updater<'_>, beta: &mut [f64], coords: &[usize], lambda: f64) -> f64 {
        coords
            .iter()
            .map(|&j| self.update(up, beta, j, lambda))
            .fold(0.0, f64::max)
    }

    /// Solves the optimality equations on the current support with its
    /// current signs. Returns `None` unless every sign survives, in which
    /// case the result is the exact minimizer over that sign pattern.
    fn polish(&self, beta: &[f64], lambda: f64) -> Option<Vec<f64>> {
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let m = support.len();
        if m == 0 || m > self.problem.n {
            return None;
        }
        let p = self.problem.p;
        let gram = DMatrix::from_fn(m, m, |a, b| {
            let (j, k) = (support[a], support[b]);
            match &self.gram {
                Some(g) => g[j * p + k],
                None => dot(self.problem.column(j), self.problem.column(k)),
            }
        });
        let rhs = DVector::from_fn(m, |a, _| {
            let j = support[a];
            self.xty[j] - lambda * beta[j].signum()
        });
        let solved = gram.cholesky()?.solve(&rhs);
        let mut out = vec![0.0; p];
        for (a, &j) in support.iter().enumerate() {
            if solved[a].signum() != beta[j].signum() || !solved[a].is_finite() {
                return None;
            }
            out[j] = solved[a];
        }
        Some(out)
    }

    /// Alternates full sweeps with sweeps over the current support until a
    /// full sweep moves nothing and the KKT check passes.
    fn solve(&self, lambda: f64, init: Vec<f64>, opts: &FitOptions) -> Result<LassoFit> {
        let p = self.problem.p;
        let all: Vec<usize> = (0..p).collect();
        let mut beta = init;
        let mut up = self.updater(&beta);
        let kkt_tol = 10.0 * opts.tol;
        let mut sweeps = 0;
        let mut last_change = f64::INFINITY;
        while sweeps < opts.max_sweeps {
            last_change = self.sweep(&mut up, &mut beta, &all, lambda);
            sweeps += 1;
            if last_change <= opts.tol {
                let kkt = kkt_residual(self.problem, &beta, lambda);
                if kkt <= kkt_tol {
                    return Ok(LassoFit::from_beta(lambda, beta, sweeps, kkt));
                }
                // drift in the running correlations; restart from scratch
                up = self.updater(&beta);
                continue;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let mut inner = 0;
            while sweeps < opts.max_sweeps {
                let change = self.sweep(&mut up, &mut beta, &active, lambda);
                sweeps += 1;
                inner += 1;
                if change <= opts.tol {
                    break;
                }
                if inner % POLISH_EVERY == 0 {
                    if let Some(exact) = self.polish(&beta, lambda) {
                        beta = exact;
                        up = self.updater(&beta);
                        break;
                    }
                }
            }
        }
        Err(Error::Convergence {
            solver: "lasso coordinate descent",
            iterations: sweeps,
            last: lambda,
            residual: last_change,
        })
    }
}

pub fn fit(
    problem: &DesignProblem,
    lambda: f64,
    init: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<LassoFit> {
    check_lambda(lambda)?;
    check_opts(opts)?;
    let beta = initial(problem, init)?;
    Solver::new(problem).solve(lambda, beta, opts)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

fn check_opts(opts: &FitOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

fn initial(problem: &DesignProblem, init: Option<&[f64]>) -> Result<Vec<f64>> {
    match init {
        None => Ok(vec![0.0; problem.p]),
        Some(b) if b.len() == problem.p && b.iter().all(|v| v.is_finite()) => Ok(b.to_vec()),
        Some(b) => Err(Error::domain(format!(
            "initial vector has length {}, expected {}",
            b.len(),
            problem.p
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathError {
    pub index: usize,
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    /// Successful fits in grid order.
    pub fits: Vec<LassoFit>,
    pub errors: Vec<PathError>,
}

/// Fits along a strictly descending grid, each fit starting from the last
/// successful one. Failed penalties are collected rather than aborting.
pub fn path(problem: &DesignProblem, grid: &[f64], opts: &FitOptions) -> Result<LassoPath> {
    check_opts(opts)?;
    for &l in grid {
        check_lambda(l)?;
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("lambda grid must be strictly descending"));
    }
    let solver = Solver::new(problem);
    let mut warm = vec![0.0; problem.p];
    let mut fits = Vec::with_capacity(grid.len());
    let mut errors = Vec::new();
    for (index, &lambda) in grid.iter().enumerate() {
        match solver.solve(lambda, warm.clone(), opts) {
            Ok(f) => {
                warm.clone_from(&f.beta_hat);
                fits.push(f);
            }
            Err(e) => errors.push(PathError {
                index,
                lambda,
                message: e.to_string(),
            }),
        }
    }
    Ok(LassoPath { fits, errors })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Projected gradient on the split `b = u − v`, `u, v ≥ 0`, which turns
    //! the Lasso into a smooth problem over the nonnegative orthant.
    use super::DesignProblem;

    pub fn minimize(problem: &DesignProblem, lambda: f64, iterations: usize) -> Vec<f64> {
        let p = problem.p();
        // power iteration for ‖X‖₂²
        let mut v = vec![1.0; p];
        let mut norm_sq = 0.0;
        for _ in 0..200 {
            let w = problem.xt(&problem.predict(&v));
            norm_sq = w.iter().map(|a| a * a).sum::<f64>().sqrt() / v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v = w;
        }
        let step = 1.0 / (2.0 * norm_sq * 1.01);
        let mut u = vec![0.0; p];
        let mut w = vec![0.0; p];
        for _ in 0..iterations {
            let b: Vec<f64> = u.iter().zip(&w).map(|(a, c)| a - c).collect();
            let g = problem.xt(&problem.residual(&b));
            for j in 0..p {
                u[j] = (u[j] + step * (g[j] - lambda)).max(0.0);
                w[j] = (w[j] + step * (-g[j] - lambda)).max(0.0);
            }
        }
        u.iter().zip(&w).map(|(a, c)| a - c).collect()
    }
}
