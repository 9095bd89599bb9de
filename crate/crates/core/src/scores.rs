//! Score functions mapping the endorsement matrix to a per-node score.
//!
//! Degree conventions are fixed throughout the crate: the in-degree of `i` is
//! the weight it has *received*, `sum_j a[(j, i)]` (a column sum), and the
//! out-degree is the weight it has given, `sum_j a[(i, j)]` (a row sum).

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_P: f64 = 0.85;
pub const DEFAULT_ALPHA_S: f64 = 1e-8;

/// L1 convergence tolerance of the PageRank power iteration.
pub const PAGERANK_TOL: f64 = 1e-12;
pub const PAGERANK_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    RootDegree,
    PageRank,
    SpringRank,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::RootDegree, ScoreKind::PageRank, ScoreKind::SpringRank];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::RootDegree => "rootdegree",
            ScoreKind::PageRank => "pagerank",
            ScoreKind::SpringRank => "springrank",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rootdegree" => Ok(ScoreKind::RootDegree),
            "pagerank" => Ok(ScoreKind::PageRank),
            "springrank" => Ok(ScoreKind::SpringRank),
            other => Err(Error::Config(format!(
                "unknown score function '{other}' (expected rootdegree, pagerank or springrank)"
            ))),
        }
    }
}

/// A map from an endorsement matrix to node scores.
///
/// Implementors may also supply the directional derivative
/// `D sigma(A)[B]`; routines that need it fall back to central finite
/// differences otherwise (see [`score_derivative`]).
pub trait ScoreFunction: Send + Sync {
    fn score(&self, a: &DMatrix<f64>) -> Result<DVector<f64>>;

    /// Directional derivative at `a` (whose score is `s`) along `b`.
    fn directional_derivative(
        &self,
        _a: &DMatrix<f64>,
        _s: &DVector<f64>,
        _b: &DMatrix<f64>,
    ) -> Option<Result<DVector<f64>>> {
        None
    }
}

/// `D sigma(A)[B]`, analytic when the score function provides it.
pub fn score_derivative(
    f: &dyn ScoreFunction,
    a: &DMatrix<f64>,
    s: &DVector<f64>,
    b: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if let Some(d) = f.directional_derivative(a, s, b) {
        return d;
    }
    let scale = b.amax();
    if scale == 0.0 {
        return Ok(DVector::zeros(s.len()));
    }
    let h = 1e-6 * (1.0 + a.amax()) / scale;
    let plus = f.score(&(a + b * h))?;
    let minus = f.score(&(a - b * h))?;
    Ok((plus - minus) / (2.0 * h))
}

/// One of the built-in score functions with its regularization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub kind: ScoreKind,
    pub alpha_p: f64,
    pub alpha_s: f64,
}

impl Scorer {
    pub fn new(kind: ScoreKind) -> Self {
        Self {
            kind,
            alpha_p: DEFAULT_ALPHA_P,
            alpha_s: DEFAULT_ALPHA_S,
        }
    }

    pub fn with_alphas(kind: ScoreKind, alpha_p: f64, alpha_s: f64) -> Self {
        Self { kind, alpha_p, alpha_s }
    }
}

impl ScoreFunction for Scorer {
    fn score(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self.kind {
            ScoreKind::RootDegree => root_degree_score(a),
            ScoreKind::PageRank => pagerank_score(a, self.alpha_p),
            ScoreKind::SpringRank => springrank_score(a, self.alpha_s),
        }
    }

    fn directional_derivative(
        &self,
        a: &DMatrix<f64>,
        s: &DVector<f64>,
        b: &DMatrix<f64>,
    ) -> Option<Result<DVector<f64>>> {
        Some(match self.kind {
            ScoreKind::RootDegree => {
                let d_in = in_degree(b);
                if s.iter().any(|x| *x <= 0.0) {
                    Err(Error::Domain(
                        "root-degree derivative is unbounded at zero in-degree".into(),
                    ))
                } else {
                    Ok(d_in.component_div(&(s * 2.0)))
                }
            }
            ScoreKind::PageRank => pagerank_derivative(a, s, b, self.alpha_p),
            ScoreKind::SpringRank => springrank_derivative(a, s, b, self.alpha_s),
        })
    }
}

/// Plain weighted in-degree: the score whose square root is Root-Degree.
#[derive(Debug, Clone, Copy, Default)]
pub struct InDegree;

impl ScoreFunction for InDegree {
    fn score(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        check_square(a)?;
        Ok(in_degree(a))
    }

    fn directional_derivative(
        &self,
        _a: &DMatrix<f64>,
        _s: &DVector<f64>,
        b: &DMatrix<f64>,
    ) -> Option<Result<DVector<f64>>> {
        Some(Ok(in_degree(b)))
    }
}

/// Weight received by each node (column sums).
pub fn in_degree(a: &DMatrix<f64>) -> DVector<f64> {
    a.row_sum().transpose()
}

/// Weight given by each node (row sums).
pub fn out_degree(a: &DMatrix<f64>) -> DVector<f64> {
    a.column_sum()
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::shape(
            "nonempty square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(())
}

fn check_nonnegative(a: &DMatrix<f64>) -> Result<()> {
    check_square(a)?;
    if let Some(bad) = a.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!(
            "score input must be finite and nonnegative, found {bad}"
        )));
    }
    Ok(())
}

/// Square root of the weighted in-degree.
pub fn root_degree_score(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_nonnegative(a)?;
    Ok(in_degree(a).map(f64::sqrt))
}

/// Diagnostics of a PageRank solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankInfo {
    pub iterations: usize,
    pub l1_change: f64,
}

/// PageRank of `A^T`, normalized so the scores sum to `n`.
pub fn pagerank_score(a: &DMatrix<f64>, alpha_p: f64) -> Result<DVector<f64>> {
    pagerank_with(a, alpha_p, PAGERANK_TOL, PAGERANK_MAX_ITER).map(|(s, _)| s)
}

pub fn pagerank_with(
    a: &DMatrix<f64>,
    alpha_p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, PageRankInfo)> {
    check_nonnegative(a)?;
    if !(alpha_p > 0.0 && alpha_p < 1.0) {
        return Err(Error::Domain(format!("alpha_p must lie in (0, 1), got {alpha_p}")));
    }
    let n = a.nrows();
    let transition = pagerank_transition(a);
    let teleport = (1.0 - alpha_p) / n as f64;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let mut next = &transition * &x * alpha_p;
        next.add_scalar_mut(teleport * x.sum());
        let total = next.sum();
        next /= total;
        change = (&next - &x).lp_norm(1);
        x = next;
        if change < tol {
            let s = x * n as f64;
            return Ok((
                s,
                PageRankInfo {
                    iterations: it,
                    l1_change: change,
                },
            ));
        }
    }
    Err(Error::numeric(format!(
        "pagerank power iteration did not converge in {max_iter} iterations (last L1 change {change:e})"
    )))
}

/// Column-stochastic `A^T (D^out)^-1`; rows of `A` with no out-weight are
/// replaced by the uniform distribution.
fn pagerank_transition(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let d_out = out_degree(a);
    DMatrix::from_fn(n, n, |j, i| {
        if d_out[i] > 0.0 {
            a[(i, j)] / d_out[i]
        } else {
            1.0 / n as f64
        }
    })
}

/// `D PR(A)[B]` for a matrix with strictly positive out-degrees.
fn pagerank_derivative(
    a: &DMatrix<f64>,
    s: &DVector<f64>,
    b: &DMatrix<f64>,
    alpha_p: f64,
) -> Result<DVector<f64>> {
    PageRankSensitivity::new(a, s, alpha_p)?.apply(b)
}

/// Linearization of PageRank at a fixed matrix, reusable across directions.
pub struct PageRankSensitivity {
    a: DMatrix<f64>,
    s: DVector<f64>,
    d_out: DVector<f64>,
    alpha: f64,
    lu: nalgebra::LU<f64, Dyn, Dyn>,
}

impl PageRankSensitivity {
    /// `s` must be the PageRank vector of `a`.
    pub fn new(a: &DMatrix<f64>, s: &DVector<f64>, alpha_p: f64) -> Result<Self> {
        let n = a.nrows();
        let d_out = out_degree(a);
        if d_out.iter().any(|d| *d <= 0.0) {
            return Err(Error::Domain(
                "pagerank derivative requires strictly positive out-degrees".into(),
            ));
        }
        // (I - P) x = r has a one-dimensional kernel along s; restricted to
        // e^T x = 0 it is regular, and adding E / n enforces that restriction.
        let mut k = -(pagerank_transition(a) * alpha_p);
        k.add_scalar_mut(1.0 / n as f64 - (1.0 - alpha_p) / n as f64);
        for i in 0..n {
            k[(i, i)] += 1.0;
        }
        Ok(Self {
            a: a.clone(),
            s: s.clone(),
            d_out,
            alpha: alpha_p,
            lu: k.lu(),
        })
    }

    pub fn apply(&self, b: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = self.a.nrows();
        let b_out = out_degree(b);
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let w = self.alpha * self.s[i] / self.d_out[i];
            let shrink = b_out[i] / self.d_out[i];
            for j in 0..n {
                rhs[j] += w * (b[(i, j)] - self.a[(i, j)] * shrink);
            }
        }
        self.lu
            .solve(&rhs)
            .ok_or_else(|| Error::numeric("singular pagerank sensitivity system"))
    }
}

/// Factorization of the regularized spring Laplacian
/// `L_alpha = D^in + D^out - (A + A^T) + alpha I`.
///
/// `L_alpha` has eigenvalue `alpha` on the constant vector, which makes a
/// direct solve lose about `log10(1/alpha)` digits there. Right-hand sides
/// are split into a part orthogonal to `e`, solved against the
/// well-conditioned `L_alpha + E`, and a part along `e`, inverted exactly.
pub struct SpringSolver {
    laplacian: DMatrix<f64>,
    alpha: f64,
    chol: Cholesky<f64, Dyn>,
}

impl SpringSolver {
    pub fn new(a: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        check_square(a)?;
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!(
                "springrank regularization must be positive, got {alpha}"
            )));
        }
        let laplacian = regularized_laplacian(a, alpha);
        let shifted = laplacian.add_scalar(1.0);
        let chol = Cholesky::new(shifted)
            .ok_or_else(|| Error::numeric("spring Laplacian is not positive definite"))?;
        Ok(Self {
            laplacian,
            alpha,
            chol,
        })
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// `D sigma(A)[B]` where `s` is the SpringRank vector of the factored matrix.
    pub fn derivative(&self, s: &DVector<f64>, b: &DMatrix<f64>) -> DVector<f64> {
        let rhs = in_degree(b) - out_degree(b) - laplacian(b) * s;
        self.solve_balanced(&rhs)
    }

    /// Solves `L_alpha x = b` for a right-hand side that sums to zero in
    /// exact arithmetic, discarding its rounding error along `e` instead of
    /// amplifying it by `1/alpha`.
    pub fn solve_balanced(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_perp(&b.add_scalar(-b.mean()))
    }

    /// Solves `L_alpha x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mean = b.mean();
        let mut x = self.solve_perp(&b.add_scalar(-mean));
        x.add_scalar_mut(mean / self.alpha);
        x
    }

    fn solve_perp(&self, perp: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(perp);
        // One step of iterative refinement.
        let r = perp - &self.laplacian * &x - DVector::from_element(x.len(), x.sum());
        x += self.chol.solve(&r);
        x
    }
}

fn regularized_laplacian(a: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let d_in = in_degree(a);
    let d_out = out_degree(a);
    let mut l = -(a + a.transpose());
    for i in 0..n {
        l[(i, i)] += d_in[i] + d_out[i] + alpha;
    }
    l
}

/// Unregularized Laplacian of a (possibly signed) weight matrix.
pub(crate) fn laplacian(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let d = in_degree(b) + out_degree(b);
    let mut l = -(b + b.transpose());
    for i in 0..n {
        l[(i, i)] += d[i];
    }
    l
}

/// SpringRank scores: the solution of `L_alpha s = (D^in - D^out) e`.
pub fn springrank_score(a: &DMatrix<f64>, alpha_s: f64) -> Result<DVector<f64>> {
    check_nonnegative(a)?;
    let solver = SpringSolver::new(a, alpha_s)?;
    let rhs = in_degree(a) - out_degree(a);
    let s = solver.solve_balanced(&rhs);
    let residual = (solver.laplacian() * &s - &rhs).amax();
    let bound = 1e-10 * rhs.amax() + 1e-12;
    if !(residual <= bound) {
        return Err(Error::numeric(format!(
            "springrank residual {residual:e} exceeds {bound:e}"
        )));
    }
    Ok(s)
}

fn springrank_derivative(
    a: &DMatrix<f64>,
    s: &DVector<f64>,
    b: &DMatrix<f64>,
    alpha_s: f64,
) -> Result<DVector<f64>> {
    Ok(SpringSolver::new(a, alpha_s)?.derivative(s, b))
}
