//! Model state, parameters, and the memory-decay update rule.
//!
//! `A[(i, j)]` holds the remembered weight of endorsements `i -> j`. Each step
//! the state decays geometrically and absorbs a new update matrix:
//!
//! ```text
//! A(t+1) = lambda * A(t) + (1 - lambda) * Delta(t)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::choice::step_rng;
use crate::error::{Error, Result};
use crate::scores::ScoreKind;

/// Tolerance used when validating row-stochastic input.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EndorsementState {
    a: DMatrix<f64>,
    t: u64,
}

impl EndorsementState {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        Self::with_time(a, 0)
    }

    pub fn with_time(a: DMatrix<f64>, t: u64) -> Result<Self> {
        validate_adjacency(&a)?;
        Ok(Self { a, t })
    }

    /// Uniform start `(m / n^2) * E`: total weight `m`, every node equal.
    pub fn uniform(n: usize, m: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 nodes, got {n}")));
        }
        let w = m as f64 / (n * n) as f64;
        Self::new(DMatrix::from_element(n, n, w))
    }

    /// Sparse random start: `m` endorsements with uniformly random endpoints.
    pub fn random_sparse<R: Rng + ?Sized>(n: usize, m: u32, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 nodes, got {n}")));
        }
        let mut a = DMatrix::zeros(n, n);
        for _ in 0..m {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            a[(i, j)] += 1.0;
        }
        Self::new(a)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_adjacency(self) -> DMatrix<f64> {
        self.a
    }

    pub fn total_weight(&self) -> f64 {
        self.a.sum()
    }
}

pub(crate) fn validate_adjacency(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.nrows() < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 nodes, got {}",
            a.nrows()
        )));
    }
    if let Some(bad) = a.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!(
            "adjacency entries must be finite and nonnegative, found {bad}"
        )));
    }
    Ok(())
}

/// Which starting state a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Uniform,
    RandomSparse,
}

impl InitKind {
    /// The starting state for `n` nodes and `m` endorsements per step. The
    /// sparse start draws from a stream disjoint from every simulation step.
    pub fn state(self, n: usize, m: u32, seed: u64) -> Result<EndorsementState> {
        match self {
            InitKind::Uniform => EndorsementState::uniform(n, m),
            InitKind::RandomSparse => EndorsementState::random_sparse(n, m, &mut step_rng(seed, u64::MAX)),
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(InitKind::Uniform),
            "random_sparse" | "sparse" => Ok(InitKind::RandomSparse),
            other => Err(Error::Config(format!("unknown init '{other}' (uniform|random_sparse)"))),
        }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitKind::Uniform => "uniform",
            InitKind::RandomSparse => "random_sparse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub m: u32,
    pub score_kind: ScoreKind,
    pub alpha_p: f64,
    pub alpha_s: f64,
    pub seed: u64,
    /// Exclude self-endorsements from the choice set.
    #[serde(default)]
    pub mask_diagonal: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda: 0.995,
            beta: vec![0.0, 0.0],
            m: 1,
            score_kind: ScoreKind::SpringRank,
            alpha_p: 0.85,
            alpha_s: 1e-8,
            seed: 0,
            mask_diagonal: false,
        }
    }
}

impl ModelParams {
    pub fn new(score_kind: ScoreKind, lambda: f64, beta1: f64, beta2: f64, m: u32) -> Self {
        Self {
            lambda,
            beta: vec![beta1, beta2],
            m,
            score_kind,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Domain(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.alpha_p > 0.0 && self.alpha_p < 1.0) {
            return Err(Error::Domain(format!(
                "alpha_p must lie in (0, 1), got {}",
                self.alpha_p
            )));
        }
        if !(self.alpha_s > 0.0) {
            return Err(Error::Domain(format!(
                "alpha_s must be positive, got {}",
                self.alpha_s
            )));
        }
        if self.m < 1 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("beta entries must be finite".into()));
        }
        Ok(())
    }
}

/// One application of the memory-decay update.
pub fn step(state: &EndorsementState, delta: &DMatrix<f64>, lambda: f64) -> Result<EndorsementState> {
    if delta.shape() != state.a.shape() {
        return Err(Error::shape(
            format!("{}x{}", state.n(), state.n()),
            format!("{}x{}", delta.nrows(), delta.ncols()),
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    if let Some(bad) = delta.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!(
            "update entries must be finite and nonnegative, found {bad}"
        )));
    }
    Ok(EndorsementState {
        a: decay_into(&state.a, delta, lambda),
        t: state.t + 1,
    })
}

/// Unchecked form of [`step`] for the hot loops.
pub(crate) fn decay_into(a: &DMatrix<f64>, delta: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    a * lambda + delta * (1.0 - lambda)
}

/// Rate matrix `G = p / n`: the chance that a step's endorsement is `i -> j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(pub DMatrix<f64>);

impl RateMatrix {
    pub fn from_choice(p: &DMatrix<f64>) -> Self {
        RateMatrix(p / p.nrows() as f64)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Column sums of `G`, which equal the rank vector.
    pub fn rank_vector(&self) -> RankVector {
        RankVector(self.0.row_sum().transpose())
    }
}

/// `gamma[j]`: probability that the next endorsement flows to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector(pub DVector<f64>);

impl RankVector {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

/// `gamma_j = n^-1 * sum_i p_ij` for a row-stochastic `p`.
pub fn rank_vector(p: &DMatrix<f64>) -> Result<RankVector> {
    if p.nrows() != p.ncols() {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    for (i, row) in p.row_iter().enumerate() {
        let sum = row.sum();
        if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Domain(format!(
                "row {i} of choice matrix is not a probability distribution (sum {sum})"
            )));
        }
    }
    Ok(rank_vector_unchecked(p))
}

pub(crate) fn rank_vector_unchecked(p: &DMatrix<f64>) -> RankVector {
    RankVector(p.row_sum().transpose() / p.nrows() as f64)
}

/// Periods until a remembered endorsement's direct weight halves.
pub fn half_life(lambda: f64) -> f64 {
    -std::f64::consts::LN_2 / lambda.ln()
}
