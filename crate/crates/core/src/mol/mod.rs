//! Mixture-of-Logistics density over box vectors.
//!
//! Each component factorizes over dimensions; every dimension follows a
//! logistic law with location `mu` and scale `s`. The mixture is
//! dimension-generic so the same machinery serves the 12-dim box vectors and
//! low-dimensional diagnostics.

pub mod fit;
pub mod io;

use rand::distributions::{Distribution, Open01};
use rand::Rng;
use thiserror::Error;

pub use fit::{fit_em, FitOptions, FitOutcome};

/// Lower bound on fitted scales.
pub const S_MIN: f64 = 1e-4;

/// Tolerance on the simplex constraint of the mixing weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MolError {
    #[error("mixture needs at least one component")]
    NoComponents,
    #[error("weights and components disagree in count ({weights} vs {components})")]
    CountMismatch { weights: usize, components: usize },
    #[error("component {component} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        component: usize,
        expected: usize,
        found: usize,
    },
    #[error("weight {index} is invalid: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("component {component} dimension {dim}: scale {value} must be finite and positive")]
    InvalidScale {
        component: usize,
        dim: usize,
        value: f64,
    },
    #[error("component {component} dimension {dim}: location {value} is not finite")]
    InvalidLocation {
        component: usize,
        dim: usize,
        value: f64,
    },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("sample {index} has dimension {found}, expected {expected}")]
    SampleDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticComponent {
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
}

impl LogisticComponent {
    pub fn new(mu: Vec<f64>, s: Vec<f64>) -> Self {
        Self { mu, s }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.mu
            .iter()
            .zip(&self.s)
            .zip(x)
            .map(|((&mu, &s), &xd)| logistic_log_pdf(xd, mu, s))
            .sum()
    }
}

/// `log f(x | mu, s)` for the logistic density, stable in both tails.
pub fn logistic_log_pdf(x: f64, mu: f64, s: f64) -> f64 {
    let a = ((x - mu) / s).abs();
    -a - s.ln() - 2.0 * (-a).exp().ln_1p()
}

/// Inverse CDF of the logistic law.
pub fn logistic_quantile(u: f64, mu: f64, s: f64) -> f64 {
    mu + s * (u / (1.0 - u)).ln()
}

pub fn logistic_cdf(x: f64, mu: f64, s: f64) -> f64 {
    let z = (x - mu) / s;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stable `log(sum(exp(v)))`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfLogistics {
    weights: Vec<f64>,
    components: Vec<LogisticComponent>,
}

impl MixtureOfLogistics {
    pub fn new(
        weights: Vec<f64>,
        components: Vec<LogisticComponent>,
    ) -> Result<Self, MolError> {
        if components.is_empty() {
            return Err(MolError::NoComponents);
        }
        if weights.len() != components.len() {
            return Err(MolError::CountMismatch {
                weights: weights.len(),
                components: components.len(),
            });
        }
        let dim = components[0].dim();
        for (k, c) in components.iter().enumerate() {
            if c.mu.len() != dim || c.s.len() != dim {
                return Err(MolError::DimensionMismatch {
                    component: k,
                    expected: dim,
                    found: c.mu.len().min(c.s.len()),
                });
            }
            for d in 0..dim {
                if !c.mu[d].is_finite() {
                    return Err(MolError::InvalidLocation {
                        component: k,
                        dim: d,
                        value: c.mu[d],
                    });
                }
                if !(c.s[d].is_finite() && c.s[d] > 0.0) {
                    return Err(MolError::InvalidScale {
                        component: k,
                        dim: d,
                        value: c.s[d],
                    });
                }
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(MolError::InvalidWeight { index: i, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MolError::WeightSum(sum));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Single-component mixture.
    pub fn single(mu: Vec<f64>, s: Vec<f64>) -> Result<Self, MolError> {
        Self::new(vec![1.0], vec![LogisticComponent::new(mu, s)])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[LogisticComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Per-component `log(pi_k) + log p_k(x)`.
    pub fn weighted_component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(&w, c)| {
                if w > 0.0 {
                    w.ln() + c.log_density(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "sample dimension mismatch");
        log_sum_exp(&self.weighted_component_log_densities(x))
    }

    pub fn nll(&self, x: &[f64]) -> f64 {
        -self.log_density(x)
    }

    pub fn total_loss(&self, x: &[f64], lambda: f64) -> f64 {
        self.nll(x) + lambda * entropy_term(&self.weights)
    }

    /// Ancestral sample: pick a component by weight, then invert each
    /// dimension's CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.pick_component(rng.gen::<f64>());
        let us: Vec<f64> = (0..self.dim()).map(|_| Open01.sample(rng)).collect();
        self.sample_from_uniforms(k, &us)
    }

    /// Index of the component selected by a uniform draw `u` in `[0, 1)`.
    pub fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // Rounding left u above the final partial sum; take the last
        // component with positive weight.
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Deterministic inverse-CDF draw from component `k` given per-dimension
    /// uniforms in `(0, 1)`.
    pub fn sample_from_uniforms(&self, k: usize, us: &[f64]) -> Vec<f64> {
        let c = &self.components[k];
        c.mu.iter()
            .zip(&c.s)
            .zip(us)
            .map(|((&mu, &s), &u)| logistic_quantile(u, mu, s))
            .collect()
    }

    /// Mixture of the 1-d marginals along `dim`.
    pub fn marginal(&self, dims: &[usize]) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| {
                LogisticComponent::new(
                    dims.iter().map(|&d| c.mu[d]).collect(),
                    dims.iter().map(|&d| c.s[d]).collect(),
                )
            })
            .collect();
        Self {
            weights: self.weights.clone(),
            components,
        }
    }
}

/// `sum_k pi_k log pi_k`, with `0 log 0 = 0`. Lies in `[-log K, 0]`.
pub fn entropy_term(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn peak(k: usize) -> MixtureOfLogistics {
        let comps = (0..k)
            .map(|_| LogisticComponent::new(vec![0.3; 12], vec![0.25; 12]))
            .collect();
        MixtureOfLogistics::new(vec![1.0 / k as f64; k], comps).unwrap()
    }

    /// Direct product-sum evaluation, outside log space.
    fn naive_density(m: &MixtureOfLogistics, x: &[f64]) -> f64 {
        m.weights()
            .iter()
            .zip(m.components())
            .map(|(w, c)| {
                let mut p = *w;
                for d in 0..x.len() {
                    let z = (x[d] - c.mu[d]) / c.s[d];
                    p *= (-z).exp() / (c.s[d] * (1.0 + (-z).exp()).powi(2));
                }
                p
            })
            .sum()
    }

    #[test]
    fn peak_density_is_one() {
        let m = peak(1);
        let x = vec![0.3; 12];
        assert!(m.log_density(&x).abs() < 1e-12);
        assert!(m.nll(&x).abs() < 1e-12);
        assert!((peak(2).log_density(&x) - m.log_density(&x)).abs() < 1e-12);
    }

    #[test]
    fn log_density_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(1..5);
            let comps: Vec<_> = (0..k)
                .map(|_| {
                    LogisticComponent::new(
                        (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        (0..12).map(|_| rng.gen_range(0.3..1.5)).collect(),
                    )
                })
                .collect();
            let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let m = MixtureOfLogistics::new(w, comps).unwrap();
            let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let naive = naive_density(&m, &x);
            let fast = m.log_density(&x).exp();
            assert!((naive - fast).abs() <= 1e-9 * naive.max(1e-300), "{naive} vs {fast}");
            assert!((m.nll(&x) + naive.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn nll_bounded_by_density_peak() {
        let m = peak(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bound: f64 = -(0..12).map(|_| (1.0 / (4.0 * 0.25f64)).ln()).sum::<f64>();
        for _ in 0..100 {
            let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!(m.nll(&x) >= bound - 1e-12);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_term(&[1.0, 0.0, 0.0]), 0.0);
        assert!((entropy_term(&[0.25; 4]) - 0.25f64.ln()).abs() < 1e-15);
        assert!((entropy_term(&[0.25; 4]) + 1.38629).abs() < 1e-5);
        assert!((entropy_term(&[0.5, 0.5]) + 0.69315).abs() < 1e-5);
    }

    #[test]
    fn total_loss_examples() {
        let x = vec![0.3; 12];
        let m1 = peak(1);
        assert_eq!(m1.total_loss(&x, 0.0), m1.nll(&x));
        assert_eq!(m1.total_loss(&x, 5.0), m1.nll(&x));
        let m4 = peak(4);
        assert!((m4.total_loss(&x, 0.1) + 0.138629).abs() < 1e-6);
    }

    #[test]
    fn median_uniform_returns_location() {
        let m = MixtureOfLogistics::new(
            vec![0.5, 0.5],
            vec![
                LogisticComponent::new(vec![1.0, 2.0], vec![0.3, 0.4]),
                LogisticComponent::new(vec![-1.0, 5.0], vec![0.3, 0.4]),
            ],
        )
        .unwrap();
        assert_eq!(m.sample_from_uniforms(1, &[0.5, 0.5]), vec![-1.0, 5.0]);
        assert_eq!(m.pick_component(0.2), 0);
        assert_eq!(m.pick_component(0.7), 1);
    }

    #[test]
    fn single_component_moments() {
        let mu = vec![0.5, -2.0, 3.0];
        let s = vec![0.2, 1.0, 0.05];
        let m = MixtureOfLogistics::single(mu.clone(), s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| m.sample(&mut rng)).collect();
        for d in 0..3 {
            let mean = draws.iter().map(|x| x[d]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let true_var = s[d] * s[d] * std::f64::consts::PI.powi(2) / 3.0;
            let se = (true_var / n as f64).sqrt();
            assert!((mean - mu[d]).abs() < 3.0 * se, "dim {d} mean {mean}");
            assert!((var / true_var - 1.0).abs() < 0.05, "dim {d} var {var}");
        }
    }

    #[test]
    fn component_occupancy() {
        let m = MixtureOfLogistics::new(
            vec![0.7, 0.3],
            vec![
                LogisticComponent::new(vec![0.0; 2], vec![0.1; 2]),
                LogisticComponent::new(vec![5.0; 2], vec![0.1; 2]),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let first = (0..n)
            .filter(|_| {
                let x = m.sample(&mut rng);
                x[0].hypot(x[1]) < (x[0] - 5.0).hypot(x[1] - 5.0)
            })
            .count();
        assert!((first as f64 / n as f64 - 0.7).abs() < 0.02);
    }

    #[test]
    fn marginal_histogram_matches_cdf() {
        let m = MixtureOfLogistics::new(
            vec![0.6, 0.4],
            vec![
                LogisticComponent::new(vec![0.0, 1.0], vec![0.5, 0.2]),
                LogisticComponent::new(vec![2.0, -1.0], vec![0.3, 0.2]),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let (lo, hi, bins) = (-4.0, 5.0, 90);
        let width = (hi - lo) / bins as f64;
        let mut hist = vec![0usize; bins];
        let mut outside = 0usize;
        for _ in 0..n {
            let x = m.sample(&mut rng)[0];
            if x < lo || x >= hi {
                outside += 1;
            } else {
                hist[((x - lo) / width) as usize] += 1;
            }
        }
        let cdf = |x: f64| -> f64 {
            m.weights()
                .iter()
                .zip(m.components())
                .map(|(w, c)| w * logistic_cdf(x, c.mu[0], c.s[0]))
                .sum()
        };
        let mut tv = 0.0;
        for (b, count) in hist.iter().enumerate() {
            let a = lo + b as f64 * width;
            let p = cdf(a + width) - cdf(a);
            tv += (*count as f64 / n as f64 - p).abs();
        }
        let p_out = cdf(lo) + 1.0 - cdf(hi);
        tv += (outside as f64 / n as f64 - p_out).abs();
        assert!(0.5 * tv <= 0.02, "tv {}", 0.5 * tv);
    }

    #[test]
    fn two_dim_marginal_integrates_to_one() {
        // Uniform-proposal Monte-Carlo over a box covering +-10 s.
        let m = MixtureOfLogistics::new(
            vec![0.3, 0.7],
            vec![
                LogisticComponent::new(vec![0.0, 0.0, 9.0], vec![0.2, 0.1, 1.0]),
                LogisticComponent::new(vec![1.0, -0.5, 2.0], vec![0.1, 0.3, 1.0]),
            ],
        )
        .unwrap();
        let marg = m.marginal(&[0, 1]);
        let (x0, x1) = (-2.0, 2.0);
        let (y0, y1) = (-3.5, 2.5);
        let area = (x1 - x0) * (y1 - y0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let p = [rng.gen_range(x0..x1), rng.gen_range(y0..y1)];
            acc += marg.log_density(&p).exp();
        }
        let integral = acc / n as f64 * area;
        assert!((integral - 1.0).abs() < 0.05, "integral {integral}");
    }

    #[test]
    fn invalid_mixtures_rejected() {
        let c = || LogisticComponent::new(vec![0.0], vec![1.0]);
        assert!(matches!(
            MixtureOfLogistics::new(vec![0.5, 0.4], vec![c(), c()]),
            Err(MolError::WeightSum(_))
        ));
        assert!(MixtureOfLogistics::new(vec![], vec![]).is_err());
        assert!(MixtureOfLogistics::new(vec![1.0], vec![LogisticComponent::new(vec![0.0], vec![0.0])]).is_err());
        assert!(MixtureOfLogistics::new(vec![1.5, -0.5], vec![c(), c()]).is_err());
    }
}
