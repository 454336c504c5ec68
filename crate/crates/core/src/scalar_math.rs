//! Gaussian primitives, soft thresholding and closed-form Gaussian
//! expectations of the soft-threshold estimator under discrete priors.
//!
//! For an atom at `m` observed as `m + τW` and thresholded at `ατ`, write
//! `μ = |m| / τ`. The normalized squared error `E(η_α(μ + W) − μ)²` splits
//! into three Gaussian pieces (above, inside and below the dead zone), each a
//! truncated first or second moment of `W`:
//!
//! ```text
//! R(μ, α) = (1+α²)Φ(μ−α) − (α+μ)φ(α−μ)
//!         + (1+α²)Φ(−α−μ) + (μ−α)φ(α+μ)
//!         + μ²[Φ(α−μ) − Φ(−α−μ)]
//! ```
//!
//! `R(0, α)` collapses to `2[(1+α²)Φ(−α) − αφ(α)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density. No input checks.
#[inline]
pub fn norm_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn norm_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * std::f64::consts::FRAC_1_SQRT_2)
}

/// Checked standard normal density.
pub fn phi(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::domain(format!("phi: non-finite argument {t}")));
    }
    Ok(norm_pdf(t))
}

/// Checked standard normal distribution function.
pub fn big_phi(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::domain(format!("Phi: non-finite argument {t}")));
    }
    Ok(norm_cdf(t))
}

#[inline]
pub(crate) fn shrink(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

/// Soft-thresholding operator `sign(x)·max(|x| − θ, 0)`.
pub fn soft_threshold(x: f64, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::domain(format!("soft_threshold: negative threshold {theta}")));
    }
    Ok(shrink(x, theta))
}

/// `(1+t²)Φ(−t) − tφ(t)`, half of the noise-only thresholding risk.
#[inline]
pub(crate) fn half_noise_risk(t: f64) -> f64 {
    (1.0 + t * t) * norm_cdf(-t) - t * norm_pdf(t)
}

/// `E η_α(W)²` for `W ~ N(0,1)`.
pub fn e_eta_sq_noise(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("e_eta_sq_noise: negative alpha {alpha}")));
    }
    if alpha.is_infinite() {
        return Ok(0.0);
    }
    Ok(2.0 * half_noise_risk(alpha))
}

/// Normalized per-atom risk `E(η_α(μ+W) − μ)²`.
#[inline]
pub(crate) fn atom_risk(mu: f64, alpha: f64) -> f64 {
    let mu = mu.abs();
    if mu == 0.0 {
        return 2.0 * half_noise_risk(alpha);
    }
    let a2 = 1.0 + alpha * alpha;
    let upper = a2 * norm_cdf(mu - alpha) - (alpha + mu) * norm_pdf(alpha - mu);
    let lower = a2 * norm_cdf(-alpha - mu) + (mu - alpha) * norm_pdf(alpha + mu);
    let dead = if mu.is_finite() {
        mu * mu * (norm_cdf(alpha - mu) - norm_cdf(-alpha - mu))
    } else {
        0.0
    };
    upper + lower + dead
}

/// `P(|μ + W| > α)`.
#[inline]
pub(crate) fn atom_exceed(mu: f64, alpha: f64) -> f64 {
    norm_cdf(-alpha + mu) + norm_cdf(-alpha - mu)
}

/// One nonzero support point of a discrete prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// A finite mixture `zero_mass·δ₀ + Σ weight·δ_value` with nonzero values.
///
/// With `zero_mass = 0` the prior doubles as a conditional prior `Π⋆`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorFields")]
pub struct DiscretePrior {
    atoms: Vec<Atom>,
    zero_mass: f64,
}

#[derive(Deserialize)]
struct PriorFields {
    atoms: Vec<Atom>,
    #[serde(default)]
    zero_mass: f64,
}

impl TryFrom<PriorFields> for DiscretePrior {
    type Error = Error;

    fn try_from(f: PriorFields) -> Result<Self> {
        DiscretePrior::new(f.atoms, f.zero_mass)
    }
}

const MASS_TOL: f64 = 1e-12;

impl DiscretePrior {
    pub fn new(atoms: Vec<Atom>, zero_mass: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&zero_mass) {
            return Err(Error::domain(format!("zero mass {zero_mass} outside [0, 1]")));
        }
        let mut total = zero_mass;
        for atom in &atoms {
            if !atom.value.is_finite() || atom.value == 0.0 {
                return Err(Error::domain(format!(
                    "atom value {} must be finite and nonzero",
                    atom.value
                )));
            }
            if !(atom.weight >= 0.0) || !atom.weight.is_finite() {
                return Err(Error::domain(format!("atom weight {} is negative", atom.weight)));
            }
            total += atom.weight;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("prior mass sums to {total}, not 1")));
        }
        Ok(DiscretePrior { atoms, zero_mass })
    }

    /// All mass at zero.
    pub fn point_mass_at_zero() -> Self {
        DiscretePrior {
            atoms: Vec::new(),
            zero_mass: 1.0,
        }
    }

    /// Conditional prior from `(value, weight)` pairs. Weights must sum to one.
    pub fn conditional(pairs: &[(f64, f64)]) -> Result<Self> {
        let atoms = pairs
            .iter()
            .map(|&(value, weight)| Atom { value, weight })
            .collect();
        let prior = DiscretePrior::new(atoms, 0.0)?;
        if prior.atoms.is_empty() {
            return Err(Error::domain("conditional prior has no atoms"));
        }
        Ok(prior)
    }

    /// Conditional prior from `(value, count)` levels, weighting each level by
    /// its share of the total count.
    pub fn from_levels(levels: &[(f64, usize)]) -> Result<Self> {
        let total: usize = levels.iter().map(|l| l.1).sum();
        if total == 0 {
            return Err(Error::domain("levels contain no signals"));
        }
        let pairs: Vec<(f64, f64)> = levels
            .iter()
            .filter(|l| l.1 > 0)
            .map(|&(v, c)| (v, c as f64 / total as f64))
            .collect();
        DiscretePrior::conditional(&pairs)
    }

    /// Mixes this conditional prior with an atom at zero of mass `1 − ε`.
    pub fn with_sparsity(&self, epsilon: f64) -> Result<Self> {
        if !self.is_conditional() {
            return Err(Error::domain("with_sparsity expects a conditional prior"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!("sparsity {epsilon} outside (0, 1]")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                value: a.value,
                weight: a.weight * epsilon,
            })
            .collect();
        Ok(DiscretePrior {
            atoms,
            zero_mass: 1.0 - epsilon,
        })
    }

    /// The law of `Π` given `Π ≠ 0`.
    pub fn to_conditional(&self) -> Result<Self> {
        let eps = self.nonzero_mass();
        if eps <= 0.0 {
            return Err(Error::domain("prior has no nonzero mass"));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                value: a.value,
                weight: a.weight / eps,
            })
            .collect();
        Ok(DiscretePrior {
            atoms,
            zero_mass: 0.0,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn zero_mass(&self) -> f64 {
        self.zero_mass
    }

    pub fn nonzero_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn is_conditional(&self) -> bool {
        self.zero_mass == 0.0 && !self.atoms.is_empty()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.value * a.value).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.value.abs()))
    }

    pub fn min_abs(&self) -> f64 {
        self.atoms
            .iter()
            .fold(f64::INFINITY, |m, a| m.min(a.value.abs()))
    }
}

fn check_scale(tau: f64, alpha: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be positive and finite, got {tau}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")));
    }
    Ok(())
}

/// `E(η_{ατ}(Π + τW) − Π)²`, summed atom by atom including the zero atom.
pub fn e_shrinkage_mse(prior: &DiscretePrior, tau: f64, alpha: f64) -> Result<f64> {
    check_scale(tau, alpha)?;
    if prior.atoms.is_empty() && prior.zero_mass == 0.0 {
        return Err(Error::domain("empty prior"));
    }
    Ok(shrinkage_mse(prior, tau, alpha))
}

#[inline]
pub(crate) fn shrinkage_mse(prior: &DiscretePrior, tau: f64, alpha: f64) -> f64 {
    tau * tau * normalized_mse(prior, tau, alpha)
}

/// `E(η_{ατ}(Π + τW) − Π)² / τ²`.
#[inline]
pub(crate) fn normalized_mse(prior: &DiscretePrior, tau: f64, alpha: f64) -> f64 {
    let mut acc = if prior.zero_mass > 0.0 {
        prior.zero_mass * atom_risk(0.0, alpha)
    } else {
        0.0
    };
    for atom in &prior.atoms {
        acc += atom.weight * atom_risk(atom.value / tau, alpha);
    }
    acc
}

/// `P(|Π + τW| > ατ)` over the full mixture, zero atom included.
#[inline]
pub(crate) fn exceed_probability(prior: &DiscretePrior, tau: f64, alpha: f64) -> f64 {
    let mut acc = if prior.zero_mass > 0.0 {
        prior.zero_mass * 2.0 * norm_cdf(-alpha)
    } else {
        0.0
    };
    for atom in &prior.atoms {
        acc += atom.weight * atom_exceed(atom.value / tau, alpha);
    }
    acc
}

/// `P(|Π⋆ + τW| > ατ)` for a conditional prior.
pub fn p_exceed(prior_star: &DiscretePrior, tau: f64, alpha: f64) -> Result<f64> {
    check_scale(tau, alpha)?;
    if prior_star.zero_mass != 0.0 {
        return Err(Error::domain("p_exceed expects a conditional prior without a zero atom"));
    }
    if prior_star.atoms.is_empty() {
        return Err(Error::domain("empty prior"));
    }
    Ok(exceed_probability(prior_star, tau, alpha))
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Composite Gauss–Legendre quadrature of Gaussian expectations, split at
    //! the kinks of the integrand. Independent of the closed forms above.

    use super::{norm_pdf, shrink};

    pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    }

    /// `E g(W)` with integration pieces delimited by `breaks` on `[-14, 14]`.
    pub fn gaussian_expectation(g: impl Fn(f64) -> f64, breaks: &[f64], n: usize) -> f64 {
        let (x, w) = gauss_legendre(n);
        let mut cuts = vec![-14.0];
        cuts.extend(breaks.iter().copied().filter(|b| b.abs() < 14.0));
        cuts.push(14.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(&w) {
                let t = mid + half * xi;
                total += half * wi * g(t) * norm_pdf(t);
            }
        }
        total
    }

    /// Quadrature of `E(η_{ατ}(m + τW) − m)²`.
    pub fn atom_mse(m: f64, tau: f64, alpha: f64, n: usize) -> f64 {
        let th = alpha * tau;
        gaussian_expectation(
            |w| {
                let e = shrink(m + tau * w, th) - m;
                e * e
            },
            &[(th - m) / tau, (-th - m) / tau],
            n,
        )
    }
}
