use std::collections::BTreeSet;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mean-zero noise process over the unit index `0..n`.
///
/// Clustered variants use contiguous blocks of `cluster_size` units (the last
/// block may be shorter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ErrorProcessSpec {
    Iid {
        sigma: f64,
    },
    /// Stationary AR(1), `e_t = rho e_{t-1} + sigma u_t`.
    Ar1 {
        rho: f64,
        sigma: f64,
    },
    /// `e_t = Σ_k coefficients[k] u_{t-k}` with standard normal `u`.
    Ma {
        coefficients: Vec<f64>,
    },
    /// Random effect per cluster plus an idiosyncratic term.
    ClusterRe {
        sigma_between: f64,
        sigma_within: f64,
        cluster_size: usize,
    },
    /// `e_i = u_i + weight Σ_{j ∈ nbr(i)} u_j` on an undirected graph.
    NetworkMa {
        edges: Vec<(usize, usize)>,
        weight: f64,
        sigma: f64,
    },
}

impl ErrorProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be a nonnegative number, got {x}")))
            }
        };
        match self {
            Self::Iid { sigma } => nonneg("sigma", *sigma),
            Self::Ar1 { rho, sigma } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidSpec(format!("AR(1) needs |rho| < 1, got {rho}")));
                }
                nonneg("sigma", *sigma)
            }
            Self::Ma { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("MA coefficients must be finite and nonempty".into()));
                }
                Ok(())
            }
            Self::ClusterRe {
                sigma_between,
                sigma_within,
                cluster_size,
            } => {
                nonneg("sigma_between", *sigma_between)?;
                nonneg("sigma_within", *sigma_within)?;
                if *cluster_size == 0 {
                    return Err(Error::InvalidSpec("cluster_size must be positive".into()));
                }
                Ok(())
            }
            Self::NetworkMa { edges, weight, sigma } => {
                if edges.iter().any(|(a, b)| a == b) {
                    return Err(Error::InvalidSpec("network edges must not be self-loops".into()));
                }
                if !weight.is_finite() {
                    return Err(Error::InvalidSpec("network weight must be finite".into()));
                }
                nonneg("sigma", *sigma)
            }
        }
    }

    /// Checks that the process is defined on `n` units.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let Self::NetworkMa { edges, .. } = self {
            if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n || *b >= n) {
                return Err(Error::InvalidSpec(format!("edge ({a}, {b}) is outside 0..{n}")));
            }
        }
        Ok(())
    }

    /// Autocovariance at lag `h` for the stationary processes, `None` otherwise.
    pub fn autocovariance(&self, h: usize) -> Option<f64> {
        match self {
            Self::Iid { sigma } => Some(if h == 0 { sigma * sigma } else { 0.0 }),
            Self::Ar1 { rho, sigma } => Some(sigma * sigma * rho.powi(h as i32) / (1.0 - rho * rho)),
            Self::Ma { coefficients } => Some(
                coefficients
                    .iter()
                    .zip(coefficients.iter().skip(h))
                    .map(|(a, b)| a * b)
                    .sum(),
            ),
            _ => None,
        }
    }

    /// `Cov(e_i, e_j)` for a sample of size `n`.
    pub fn covariance(&self, n: usize, i: usize, j: usize) -> f64 {
        match self {
            Self::ClusterRe {
                sigma_between,
                sigma_within,
                cluster_size,
            } => {
                let same = i / cluster_size == j / cluster_size;
                let between = if same { sigma_between * sigma_between } else { 0.0 };
                between + if i == j { sigma_within * sigma_within } else { 0.0 }
            }
            Self::NetworkMa { weight, sigma, .. } => {
                let adj = self.adjacency(n);
                // (I + wA)(I + wA)ᵀ, A symmetric
                let a_ij = if adj[i].contains(&j) { 1.0 } else { 0.0 };
                let common = adj[i].intersection(&adj[j]).count() as f64;
                let delta = if i == j { 1.0 } else { 0.0 };
                sigma * sigma * (delta + 2.0 * weight * a_ij + weight * weight * common)
            }
            _ => self.autocovariance(i.abs_diff(j)).expect("stationary process"),
        }
    }

    /// `Var(e_i)`.
    pub fn marginal_variance(&self, n: usize, i: usize) -> f64 {
        match self {
            Self::NetworkMa { weight, sigma, .. } => {
                let deg = self.adjacency(n)[i].len() as f64;
                sigma * sigma * (1.0 + weight * weight * deg)
            }
            _ => self.covariance(n, i, i),
        }
    }

    /// `n⁻¹ Σ_i Var(e_i)`.
    pub fn average_variance(&self, n: usize) -> f64 {
        match self {
            Self::NetworkMa { weight, sigma, .. } => {
                let total_deg: usize = self.adjacency(n).iter().map(BTreeSet::len).sum();
                sigma * sigma * (1.0 + weight * weight * total_deg as f64 / n as f64)
            }
            _ => (0..n).map(|i| self.marginal_variance(n, i)).sum::<f64>() / n as f64,
        }
    }

    /// `Var(Σ_{i ∈ block} e_i)` for a contiguous block of a size-`n` sample.
    pub fn block_sum_variance(&self, n: usize, block: Range<usize>) -> f64 {
        let m = block.len();
        match self {
            Self::ClusterRe {
                sigma_between,
                sigma_within,
                cluster_size,
            } => {
                let between: f64 = overlaps(block.clone(), *cluster_size)
                    .map(|c| (c * c) as f64)
                    .sum();
                sigma_between * sigma_between * between + sigma_within * sigma_within * m as f64
            }
            Self::NetworkMa { weight, sigma, .. } => {
                // Σ_{i∈B} e_i = Σ_k c_k u_k with c = 1_B + w A 1_B
                let adj = self.adjacency(n);
                let mut c = vec![0.0; n];
                for i in block.clone() {
                    c[i] += 1.0;
                    for &k in &adj[i] {
                        c[k] += weight;
                    }
                }
                sigma * sigma * c.iter().map(|x| x * x).sum::<f64>()
            }
            _ => {
                let mut total = m as f64 * self.autocovariance(0).unwrap();
                for h in 1..m {
                    total += 2.0 * (m - h) as f64 * self.autocovariance(h).unwrap();
                }
                total
            }
        }
    }

    fn adjacency(&self, n: usize) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); n];
        if let Self::NetworkMa { edges, .. } = self {
            for &(a, b) in edges {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj
    }
}

/// Sizes of the intersections of `block` with consecutive clusters of `size`.
pub(crate) fn overlaps(block: Range<usize>, size: usize) -> impl Iterator<Item = usize> {
    let first = block.start / size;
    let last = if block.is_empty() { first } else { (block.end - 1) / size + 1 };
    (first..last).map(move |c| {
        let lo = (c * size).max(block.start);
        let hi = ((c + 1) * size).min(block.end);
        hi.saturating_sub(lo)
    })
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws `n` values of the process. AR(1) starts from its stationary law.
pub fn gen_errors<R: Rng + ?Sized>(spec: &ErrorProcessSpec, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate_for(n)?;
    if n == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    let out = match spec {
        ErrorProcessSpec::Iid { sigma } => (0..n).map(|_| sigma * normal(rng)).collect(),
        ErrorProcessSpec::Ar1 { rho, sigma } => {
            let mut e = Vec::with_capacity(n);
            let mut prev = sigma / (1.0 - rho * rho).sqrt() * normal(rng);
            e.push(prev);
            for _ in 1..n {
                prev = rho * prev + sigma * normal(rng);
                e.push(prev);
            }
            e
        }
        ErrorProcessSpec::Ma { coefficients } => {
            let q = coefficients.len() - 1;
            let u: Vec<f64> = (0..n + q).map(|_| normal(rng)).collect();
            (0..n)
                .map(|t| {
                    coefficients
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * u[t + q - k])
                        .sum()
                })
                .collect()
        }
        ErrorProcessSpec::ClusterRe {
            sigma_between,
            sigma_within,
            cluster_size,
        } => {
            let mut e = Vec::with_capacity(n);
            let mut shared = 0.0;
            for i in 0..n {
                if i % cluster_size == 0 {
                    shared = sigma_between * normal(rng);
                }
                e.push(shared + sigma_within * normal(rng));
            }
            e
        }
        ErrorProcessSpec::NetworkMa { weight, sigma, .. } => {
            let u: Vec<f64> = (0..n).map(|_| sigma * normal(rng)).collect();
            let adj = spec.adjacency(n);
            (0..n)
                .map(|i| u[i] + weight * adj[i].iter().map(|&j| u[j]).sum::<f64>())
                .collect()
        }
    };
    Ok(out)
}
