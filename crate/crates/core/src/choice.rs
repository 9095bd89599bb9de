//! Utilities, multinomial-logit choice probabilities and endorsement sampling.
//!
//! Utilities are linear in the preference vector over a list of feature maps,
//! `u_ij(s) = sum_l beta_l * phi^l_ij(s)`. The canonical pair is prestige
//! `phi_ij = s_j` and proximity `phi_ij = (s_i - s_j)^2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::RankVector;

/// A smooth map from scores to an `n x n` feature matrix.
pub trait FeatureMap: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn eval(&self, s: &DVector<f64>) -> DMatrix<f64>;

    /// `grad[k]` is the entrywise derivative `d phi / d s_k`.
    fn grad(&self, _s: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        None
    }
}

/// `phi_ij = s_j`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Prestige;

impl FeatureMap for Prestige {
    fn name(&self) -> &str {
        "prestige"
    }

    fn eval(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let n = s.len();
        DMatrix::from_fn(n, n, |_, j| s[j])
    }

    fn grad(&self, s: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let n = s.len();
        Some(
            (0..n)
                .map(|k| DMatrix::from_fn(n, n, |_, j| if j == k { 1.0 } else { 0.0 }))
                .collect(),
        )
    }
}

/// `phi_ij = (s_i - s_j)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Proximity;

impl FeatureMap for Proximity {
    fn name(&self) -> &str {
        "proximity"
    }

    fn eval(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let n = s.len();
        DMatrix::from_fn(n, n, |i, j| (s[i] - s[j]).powi(2))
    }

    fn grad(&self, s: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let n = s.len();
        Some(
            (0..n)
                .map(|k| {
                    DMatrix::from_fn(n, n, |i, j| {
                        let d = 2.0 * (s[i] - s[j]);
                        match (i == k, j == k) {
                            (true, false) => d,
                            (false, true) => -d,
                            _ => 0.0,
                        }
                    })
                })
                .collect(),
        )
    }
}

/// `phi(sqrt(s))`: lets an in-degree state drive features of Root-Degree scores.
#[derive(Debug, Clone)]
pub struct SqrtOf(pub Arc<dyn FeatureMap>);

impl FeatureMap for SqrtOf {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn eval(&self, s: &DVector<f64>) -> DMatrix<f64> {
        self.0.eval(&s.map(f64::sqrt))
    }

    fn grad(&self, s: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let root = s.map(f64::sqrt);
        let inner = self.0.grad(&root)?;
        Some(
            inner
                .into_iter()
                .zip(root.iter())
                .map(|(g, r)| g / (2.0 * r))
                .collect(),
        )
    }
}

/// Central finite-difference gradient of a feature map.
pub fn finite_difference_grad(f: &dyn FeatureMap, s: &DVector<f64>) -> Vec<DMatrix<f64>> {
    (0..s.len())
        .map(|k| {
            let h = 1e-5 * (1.0 + s[k].abs());
            let mut plus = s.clone();
            plus[k] += h;
            let mut minus = s.clone();
            minus[k] -= h;
            (f.eval(&plus) - f.eval(&minus)) / (2.0 * h)
        })
        .collect()
}

/// An ordered list of feature maps paired positionally with `beta`.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    maps: Vec<Arc<dyn FeatureMap>>,
}

impl FeatureSet {
    pub fn new(maps: Vec<Arc<dyn FeatureMap>>) -> Self {
        Self { maps }
    }

    /// Prestige and proximity, in that order.
    pub fn canonical() -> Self {
        Self::new(vec![Arc::new(Prestige), Arc::new(Proximity)])
    }

    /// The same features evaluated at `sqrt(s)`.
    pub fn sqrt_composed(&self) -> Self {
        Self::new(
            self.maps
                .iter()
                .map(|f| Arc::new(SqrtOf(f.clone())) as Arc<dyn FeatureMap>)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[Arc<dyn FeatureMap>] {
        &self.maps
    }

    pub fn eval_all(&self, s: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.maps.iter().map(|f| f.eval(s)).collect()
    }

    pub fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.maps.len() {
            return Err(Error::shape(
                format!("{} preference parameters", self.maps.len()),
                format!("{}", beta.len()),
            ));
        }
        Ok(())
    }

    /// `d u / d s_k` for every `k`. With `analytic_only`, a feature lacking an
    /// analytic gradient is a configuration error instead of being
    /// differenced numerically.
    pub fn utility_grad(
        &self,
        s: &DVector<f64>,
        beta: &[f64],
        analytic_only: bool,
    ) -> Result<Vec<DMatrix<f64>>> {
        self.check_beta(beta)?;
        let n = s.len();
        let mut out = vec![DMatrix::zeros(n, n); n];
        for (f, &b) in self.maps.iter().zip(beta) {
            if b == 0.0 {
                continue;
            }
            let g = match f.grad(s) {
                Some(g) => g,
                None if analytic_only => {
                    return Err(Error::Config(format!(
                        "feature '{}' has no analytic gradient",
                        f.name()
                    )))
                }
                None => finite_difference_grad(f.as_ref(), s),
            };
            for (acc, gk) in out.iter_mut().zip(g) {
                *acc += gk * b;
            }
        }
        Ok(out)
    }
}

/// `u_ij = sum_l beta_l * phi^l_ij(s)`.
pub fn utility(s: &DVector<f64>, beta: &[f64], features: &FeatureSet) -> Result<DMatrix<f64>> {
    features.check_beta(beta)?;
    let n = s.len();
    let mut u = DMatrix::zeros(n, n);
    for (f, &b) in features.maps().iter().zip(beta) {
        if b != 0.0 {
            u += f.eval(s) * b;
        }
    }
    Ok(u)
}

/// Row-stochastic logit choice matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceProbabilities(pub DMatrix<f64>);

impl ChoiceProbabilities {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank_vector(&self) -> RankVector {
        crate::model::rank_vector_unchecked(&self.0)
    }

    /// Expected update `E[Delta] = m G`.
    pub fn expected_delta(&self, m: u32) -> DMatrix<f64> {
        &self.0 * (m as f64 / self.n() as f64)
    }
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn choice_probabilities(u: &DMatrix<f64>) -> ChoiceProbabilities {
    choice_probabilities_masked(u, false)
}

/// As [`choice_probabilities`], optionally excluding `j == i` from each
/// choice set.
pub fn choice_probabilities_masked(u: &DMatrix<f64>, mask_diagonal: bool) -> ChoiceProbabilities {
    ChoiceProbabilities(log_choice_probabilities(u, mask_diagonal).map(f64::exp))
}

/// Log of the choice probabilities; masked entries are `-inf`.
pub fn log_choice_probabilities(u: &DMatrix<f64>, mask_diagonal: bool) -> DMatrix<f64> {
    let n = u.nrows();
    let mut out = u.clone();
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..u.ncols() {
            if !(mask_diagonal && i == j) {
                max = max.max(u[(i, j)]);
            }
        }
        let mut total = 0.0;
        for j in 0..u.ncols() {
            if !(mask_diagonal && i == j) {
                total += (u[(i, j)] - max).exp();
            }
        }
        let lse = max + total.ln();
        for j in 0..u.ncols() {
            out[(i, j)] = if mask_diagonal && i == j {
                f64::NEG_INFINITY
            } else {
                u[(i, j)] - lse
            };
        }
    }
    out
}

/// `d G / d s_k` for every `k`, with `G = p / n` and `du[k] = d u / d s_k`.
pub fn rate_matrix_derivatives(p: &DMatrix<f64>, du: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = p.nrows() as f64;
    du.iter()
        .map(|d| {
            let mut out = p.component_mul(d);
            for i in 0..out.nrows() {
                let mean: f64 = out.row(i).sum();
                for j in 0..out.ncols() {
                    out[(i, j)] -= p[(i, j)] * mean;
                }
            }
            out / n
        })
        .collect()
}

/// `d gamma / d s` as a matrix: column `k` is `d gamma / d s_k`.
pub fn rank_jacobian(p: &DMatrix<f64>, du: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = p.nrows();
    let mut out = DMatrix::zeros(n, du.len());
    for (k, dg) in rate_matrix_derivatives(p, du).iter().enumerate() {
        out.set_column(k, &dg.row_sum().transpose());
    }
    out
}

/// RNG for time step `t` of a run seeded with `seed`; each step owns an
/// independent stream so any `Delta(t)` can be regenerated in isolation.
pub fn step_rng(seed: u64, t: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

/// Draws `m` independent endorsements: endorser uniform, endorsee from that
/// endorser's row of `p`.
pub fn sample_delta<R: Rng + ?Sized>(
    p: &ChoiceProbabilities,
    m: u32,
    rng: &mut R,
) -> Result<DMatrix<u32>> {
    if m < 1 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    let n = p.n();
    let mut rows: Vec<Option<WeightedIndex<f64>>> = vec![None; n];
    let mut delta = DMatrix::zeros(n, n);
    for _ in 0..m {
        let i = rng.random_range(0..n);
        let dist = match &mut rows[i] {
            Some(d) => d,
            slot => {
                let d = WeightedIndex::new(p.0.row(i).iter().copied())
                    .map_err(|e| Error::Domain(format!("row {i} of choice matrix: {e}")))?;
                slot.insert(d)
            }
        };
        let j = dist.sample(rng);
        delta[(i, j)] += 1;
    }
    Ok(delta)
}
