//! Long-memory analysis of the endorsement dynamics.
//!
//! As `lambda -> 1` the expected score increment per unit of `1 - lambda`
//! converges to a deterministic drift
//!
//! ```text
//! f(s, A) = D sigma(A)[m G(s) - A]
//! ```
//!
//! (the derivative of the score map along the expected state change). Its
//! equilibria satisfy `A = m G(s)` and `s = sigma(m G(s))`. Linear stability
//! is read off the Jacobian `J = m D sigma(A*)[dG/ds] - I` evaluated at
//! `A* = m G(s*)`; every other direction of the state space decays at rate
//! one.
//!
//! Root-Degree is analysed in in-degree coordinates: the state variable is
//! `x = A^T e` and the square root is folded into the feature maps. The
//! egalitarian roots are `(m/n) e` (Root-Degree), `e` (PageRank, scores sum
//! to `n`) and `0` (SpringRank).

mod equilibria;

pub use equilibria::{
    bifurcation_diagram, egalitarian_equilibrium, nearest_stable_distance, solve_pagerank_equilibrium, two_group_equilibria,
    two_group_roots, BifurcationDiagram, Branch, BranchGap, BranchPoint, BranchRow, GroupStructure,
    PageRankIteration,
};

use nalgebra::{Complex, DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::choice::{
    choice_probabilities, rank_jacobian, rate_matrix_derivatives, utility, ChoiceProbabilities, FeatureSet,
};
use crate::error::{Error, Result};
use crate::scores::{
    in_degree, laplacian, out_degree, pagerank_score, springrank_score, PageRankSensitivity, ScoreKind,
    SpringSolver, DEFAULT_ALPHA_P, DEFAULT_ALPHA_S,
};

/// Half-width of the band around zero in which a leading eigenvalue is
/// reported as marginal rather than stable or unstable.
pub const MARGINAL_BAND: f64 = 1e-10;

/// How feature gradients are obtained for Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Every feature with a nonzero weight must provide an analytic gradient.
    #[default]
    Analytic,
    /// Use analytic gradients when present, central differences otherwise.
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct LongMemoryModel {
    pub kind: ScoreKind,
    pub n: usize,
    pub m: f64,
    pub beta: Vec<f64>,
    pub alpha_p: f64,
    pub alpha_s: f64,
    pub gradients: GradientMode,
    features: FeatureSet,
    state_features: FeatureSet,
}

impl LongMemoryModel {
    /// Canonical prestige/proximity utilities with `beta = (beta1, beta2)`.
    pub fn new(kind: ScoreKind, n: usize, m: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Self::with_features(kind, n, m, vec![beta1, beta2], FeatureSet::canonical())
    }

    /// `features` act on scores; for Root-Degree they are composed with the
    /// square root of the in-degree automatically.
    pub fn with_features(kind: ScoreKind, n: usize, m: f64, beta: Vec<f64>, features: FeatureSet) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 nodes, got {n}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("m must be positive, got {m}")));
        }
        features.check_beta(&beta)?;
        let state_features = match kind {
            ScoreKind::RootDegree => features.sqrt_composed(),
            _ => features.clone(),
        };
        Ok(Self {
            kind,
            n,
            m,
            beta,
            alpha_p: DEFAULT_ALPHA_P,
            alpha_s: DEFAULT_ALPHA_S,
            gradients: GradientMode::Analytic,
            features,
            state_features,
        })
    }

    pub fn alphas(mut self, alpha_p: f64, alpha_s: f64) -> Result<Self> {
        if !(alpha_p > 0.0 && alpha_p < 1.0) {
            return Err(Error::Domain(format!("alpha_p must lie in (0, 1), got {alpha_p}")));
        }
        if !(alpha_s > 0.0) {
            return Err(Error::Domain(format!("alpha_s must be positive, got {alpha_s}")));
        }
        self.alpha_p = alpha_p;
        self.alpha_s = alpha_s;
        Ok(self)
    }

    pub fn gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradients = mode;
        self
    }

    /// Same model with the prestige weight replaced.
    pub fn with_beta1(&self, beta1: f64) -> Self {
        let mut out = self.clone();
        out.beta[0] = beta1;
        out
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn critical_beta1(&self) -> f64 {
        critical_beta1(self.kind, self.n, self.m, self.alpha_p, self.alpha_s)
    }

    /// The unique egalitarian root.
    pub fn egalitarian(&self) -> DVector<f64> {
        let n = self.n;
        match self.kind {
            ScoreKind::RootDegree => DVector::from_element(n, self.m / n as f64),
            ScoreKind::PageRank => DVector::from_element(n, 1.0),
            ScoreKind::SpringRank => DVector::zeros(n),
        }
    }

    /// Score map in analysis coordinates (in-degree for Root-Degree).
    pub fn state_score(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self.kind {
            ScoreKind::RootDegree => Ok(in_degree(a)),
            ScoreKind::PageRank => pagerank_score(a, self.alpha_p),
            ScoreKind::SpringRank => springrank_score(a, self.alpha_s),
        }
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::shape(format!("{} scores", self.n), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("scores must be finite".into()));
        }
        if self.kind == ScoreKind::RootDegree && x.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("in-degrees must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn choice(&self, x: &DVector<f64>) -> Result<ChoiceProbabilities> {
        self.check_state(x)?;
        Ok(choice_probabilities(&utility(x, &self.beta, &self.state_features)?))
    }

    /// Rate matrix `G(x) = p(x) / n`.
    pub fn rate(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.choice(x)?.0 / self.n as f64)
    }

    pub fn gamma(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.choice(x)?.rank_vector().0)
    }

    /// The state the expected dynamics relax to with scores frozen at `x`.
    pub fn expected_state(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.rate(x)? * self.m)
    }

    /// `sigma(m G(x))`; equilibria are its fixed points.
    pub fn fixed_point_map(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.state_score(&self.expected_state(x)?)
    }

    pub fn fixed_point_residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.fixed_point_map(x)? - x)
    }

    /// Long-memory drift at scores `x` and state `a`, in closed form.
    /// `x` should be the score of `a`.
    pub fn drift(&self, x: &DVector<f64>, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self.kind {
            ScoreKind::RootDegree => f_degree(x, self),
            ScoreKind::PageRank => f_pagerank(x, a, self),
            ScoreKind::SpringRank => f_springrank(x, a, self),
        }
    }

    /// Finite-memory difference quotient whose `lambda -> 1` limit is the
    /// drift: `[sigma(lambda A + (1 - lambda) m G(x)) - x] / (1 - lambda)`.
    pub fn drift_oracle(&self, x: &DVector<f64>, a: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let next = a * lambda + self.expected_state(x)? * (1.0 - lambda);
        Ok((self.state_score(&next)? - x) / (1.0 - lambda))
    }

    /// `d gamma / d x`.
    pub fn rank_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.choice(x)?;
        let du = self.utility_grad(x)?;
        Ok(rank_jacobian(&p.0, &du))
    }

    fn utility_grad(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let analytic = self.gradients == GradientMode::Analytic;
        self.state_features.utility_grad(x, &self.beta, analytic)
    }

    /// Jacobian of the long-memory dynamics at scores `x`, evaluated at the
    /// matching state `A* = m G(x)`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.n;
        let p = self.choice(x)?;
        let dg = rate_matrix_derivatives(&p.0, &self.utility_grad(x)?);
        let a_star = &p.0 * (self.m / n as f64);
        let mut jac = DMatrix::zeros(n, n);
        match self.kind {
            ScoreKind::RootDegree => {
                for (k, d) in dg.iter().enumerate() {
                    jac.set_column(k, &(in_degree(d) * self.m));
                }
            }
            ScoreKind::PageRank => {
                let s_star = pagerank_score(&a_star, self.alpha_p)?;
                let sens = PageRankSensitivity::new(&a_star, &s_star, self.alpha_p)?;
                for (k, d) in dg.iter().enumerate() {
                    jac.set_column(k, &sens.apply(&(d * self.m))?);
                }
            }
            ScoreKind::SpringRank => {
                let s_star = springrank_score(&a_star, self.alpha_s)?;
                let solver = SpringSolver::new(&a_star, self.alpha_s)?;
                for (k, d) in dg.iter().enumerate() {
                    jac.set_column(k, &solver.derivative(&s_star, &(d * self.m)));
                }
            }
        }
        for i in 0..n {
            jac[(i, i)] -= 1.0;
        }
        Ok(jac)
    }
}

/// Root-Degree drift in in-degree coordinates: `m gamma(x) - x`.
pub fn f_degree(x: &DVector<f64>, model: &LongMemoryModel) -> Result<DVector<f64>> {
    Ok(model.gamma(x)? * model.m - x)
}

/// PageRank drift `D PR(A)[m G(s) - A]`. Requires positive out-degrees.
pub fn f_pagerank(s: &DVector<f64>, a: &DMatrix<f64>, model: &LongMemoryModel) -> Result<DVector<f64>> {
    let sens = PageRankSensitivity::new(a, s, model.alpha_p)?;
    sens.apply(&(model.expected_state(s)? - a))
}

/// Residual of the PageRank equilibrium condition
/// `[G^T + alpha^-1 (1 - alpha) n^-2 E] s = alpha^-1 n^-1 s`.
pub fn f_pagerank_root_system(s: &DVector<f64>, model: &LongMemoryModel) -> Result<DVector<f64>> {
    let n = model.n as f64;
    if (s.sum() - n).abs() > 1e-9 * n {
        return Err(Error::Domain(format!(
            "pagerank scores must sum to n = {n}, got {}",
            s.sum()
        )));
    }
    if s.iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain("pagerank scores must be positive".into()));
    }
    let alpha = model.alpha_p;
    let g = model.rate(s)?;
    let teleport = (1.0 - alpha) / (alpha * n * n) * s.sum();
    Ok((g.transpose() * s).add_scalar(teleport) - s / (alpha * n))
}

/// SpringRank drift in closed form,
/// `f = -L_alpha(A)^-1 [alpha s + m (L_G s + e/n - gamma)]`,
/// with `L_G = Gamma + I/n - (G + G^T)` the Laplacian of the rate matrix.
/// `s` must be the SpringRank vector of `a`, so that it sums to zero.
pub fn f_springrank(s: &DVector<f64>, a: &DMatrix<f64>, model: &LongMemoryModel) -> Result<DVector<f64>> {
    let solver = SpringSolver::new(a, model.alpha_s)?;
    let g = model.rate(s)?;
    let gamma = in_degree(&g);
    let forcing = (laplacian(&g) * s + out_degree(&g) - gamma) * model.m + s * model.alpha_s;
    Ok(-solver.solve_balanced(&forcing))
}

/// Prestige preference at which the egalitarian root loses stability.
pub fn critical_beta1(kind: ScoreKind, n: usize, m: f64, alpha_p: f64, alpha_s: f64) -> f64 {
    let n = n as f64;
    match kind {
        ScoreKind::RootDegree => 2.0 * (n / m).sqrt(),
        ScoreKind::PageRank => 1.0 / alpha_p,
        ScoreKind::SpringRank => 2.0 + alpha_s * n / m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

impl Stability {
    pub fn from_max_real(max_real: f64) -> Self {
        if max_real < -MARGINAL_BAND {
            Stability::Stable
        } else if max_real > MARGINAL_BAND {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }
}

/// Full complex spectrum of a dense matrix, via a bounded Schur iteration.
/// Falls back to a looser deflation tolerance before giving up.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let max_iter = 1000 * m.nrows().max(1);
    for eps in [f64::EPSILON, 1e-13, 1e-11] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::numeric(format!(
        "eigenvalue iteration did not converge for a {0}x{0} matrix",
        m.nrows()
    )))
}

pub fn max_real_part(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Linearization at the egalitarian root.
#[derive(Debug, Clone)]
pub struct EgalitarianJacobian {
    pub state: DVector<f64>,
    /// `d gamma / d x` at the root.
    pub rank_sensitivity: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_real: f64,
    pub stability: Stability,
}

pub fn jacobian_egalitarian(model: &LongMemoryModel) -> Result<EgalitarianJacobian> {
    let x0 = model.egalitarian();
    let rank_sensitivity = model.rank_jacobian(&x0)?;
    let jacobian = model.jacobian(&x0)?;
    let eigenvalues = spectrum(&jacobian)?;
    let max_real = max_real_part(&eigenvalues);
    Ok(EgalitarianJacobian {
        state: x0,
        rank_sensitivity,
        jacobian,
        eigenvalues,
        max_real,
        stability: Stability::from_max_real(max_real),
    })
}

/// A classified root of the long-memory dynamics.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub state: DVector<f64>,
    pub gamma: DVector<f64>,
    /// `|sigma(m G(x)) - x|_inf`.
    pub residual: f64,
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_real: f64,
    pub stability: Stability,
    pub group: Option<GroupStructure>,
}

impl Equilibrium {
    pub fn stable(&self) -> bool {
        self.stability == Stability::Stable
    }
}

/// Evaluates residual, spectrum and stability of a candidate root.
pub fn analyze_equilibrium(model: &LongMemoryModel, x: &DVector<f64>) -> Result<Equilibrium> {
    let residual = model.fixed_point_residual(x)?.amax();
    let eigenvalues = spectrum(&model.jacobian(x)?)?;
    let max_real = max_real_part(&eigenvalues);
    Ok(Equilibrium {
        state: x.clone(),
        gamma: model.gamma(x)?,
        residual,
        eigenvalues,
        max_real,
        stability: Stability::from_max_real(max_real),
        group: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0)
    }

    #[test]
    fn critical_values() {
        assert!((critical_beta1(ScoreKind::PageRank, 8, 1.0, 0.85, 1e-8) - 1.0 / 0.85).abs() < 1e-15);
        assert!((critical_beta1(ScoreKind::RootDegree, 70, 150.0, 0.85, 1e-8) - 1.3662601).abs() < 1e-6);
        assert!((critical_beta1(ScoreKind::RootDegree, 8, 1.0, 0.85, 1e-8) - 5.656854).abs() < 1e-6);
        assert!((critical_beta1(ScoreKind::SpringRank, 8, 1.0, 0.85, 1e-8) - (2.0 + 8e-8)).abs() < 1e-15);
    }

    #[test]
    fn egalitarian_roots_vanish() {
        for kind in ScoreKind::ALL {
            let model = LongMemoryModel::new(kind, 8, 3.0, 1.7, -0.6).unwrap();
            let x0 = model.egalitarian();
            assert!(model.fixed_point_residual(&x0).unwrap().amax() < 1e-12, "{kind}");
            let a = model.expected_state(&x0).unwrap();
            assert!(model.drift(&x0, &a).unwrap().amax() < 1e-12, "{kind}");
        }
        let model = LongMemoryModel::new(ScoreKind::PageRank, 8, 1.0, 0.0, 0.0).unwrap();
        assert!(f_pagerank_root_system(&e(8), &model).unwrap().amax() < 1e-14);
    }

    #[test]
    fn degree_drift_with_flat_utilities() {
        let model = LongMemoryModel::new(ScoreKind::RootDegree, 4, 2.0, 0.0, 0.0).unwrap();
        let x = DVector::from_vec(vec![0.1, 0.7, 1.5, 0.2]);
        let f = f_degree(&x, &model).unwrap();
        assert!((f - (DVector::from_element(4, 0.5) - &x)).amax() < 1e-15);
    }

    #[test]
    fn degree_drift_pushes_toward_concentration() {
        // m gamma - x evaluated directly for n = 2: with a strong prestige
        // preference node 1, already ahead, attracts almost every endorsement.
        let model = LongMemoryModel::new(ScoreKind::RootDegree, 2, 1.0, 20.0, 0.0).unwrap();
        let x = DVector::from_vec(vec![0.6, 0.4]);
        let f = f_degree(&x, &model).unwrap();
        let w = (20.0 * (0.6f64.sqrt() - 0.4f64.sqrt())).exp();
        let gamma1 = w / (1.0 + w);
        assert!((f[0] - (gamma1 - 0.6)).abs() < 1e-14);
        assert!(f[0] > 0.0 && f[1] < 0.0);
        // At full concentration the drift points back inward, since gamma < 1.
        let f = f_degree(&DVector::from_vec(vec![1.0, 0.0]), &model).unwrap();
        assert!(f[0] < 0.0 && f[1] > 0.0);
    }

    #[test]
    fn pagerank_root_system_rejects_unnormalized() {
        let model = LongMemoryModel::new(ScoreKind::PageRank, 4, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            f_pagerank_root_system(&DVector::from_element(4, 2.0), &model),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn springrank_drift_vanishes_on_symmetric_state() {
        let model = LongMemoryModel::new(ScoreKind::SpringRank, 3, 1.0, 2.5, -1.0).unwrap();
        let a = nalgebra::dmatrix![0.0, 2.0, 1.0; 2.0, 0.0, 3.0; 1.0, 3.0, 1.0];
        let s = model.state_score(&a).unwrap();
        assert!(s.amax() < 1e-12);
        assert!(f_springrank(&s, &a, &model).unwrap().amax() < 1e-12);
    }

    #[test]
    fn linear_feature_rank_sensitivity_spectrum() {
        // For prestige-only utilities d gamma / ds = beta / n (I - E / n).
        let n = 6;
        let beta = 1.7;
        for kind in [ScoreKind::PageRank, ScoreKind::SpringRank] {
            let model = LongMemoryModel::new(kind, n, 1.0, beta, -3.0).unwrap();
            let jac = jacobian_egalitarian(&model).unwrap();
            let expected = (DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)) * (beta / n as f64);
            assert!((&jac.rank_sensitivity - expected).amax() < 1e-14);
            let mut eigs: Vec<f64> = spectrum(&jac.rank_sensitivity).unwrap().iter().map(|z| z.re).collect();
            eigs.sort_by(f64::total_cmp);
            assert!(eigs[0].abs() < 1e-12);
            assert!(eigs[1..].iter().all(|v| (v - beta / n as f64).abs() < 1e-12));
        }
    }

    #[test]
    fn jacobian_perp_eigenvalues_match_closed_forms() {
        let n = 8;
        let m = 2.0;
        let beta = 1.3;
        let perp = |kind| {
            let model = LongMemoryModel::new(kind, n, m, beta, 0.0).unwrap();
            let mut eigs: Vec<f64> = jacobian_egalitarian(&model).unwrap().eigenvalues.iter().map(|z| z.re).collect();
            eigs.sort_by(f64::total_cmp);
            eigs
        };
        // Root-Degree: beta/2 sqrt(m/n) - 1 (n - 1 times) and -1 along e.
        let rd = perp(ScoreKind::RootDegree);
        assert!((rd[0] + 1.0).abs() < 1e-12);
        assert!(rd[1..].iter().all(|v| (v - (beta / 2.0 * (m / n as f64).sqrt() - 1.0)).abs() < 1e-12));
        // PageRank: alpha beta - 1.
        let pr = perp(ScoreKind::PageRank);
        assert!(pr[1..].iter().all(|v| (v - (0.85 * beta - 1.0)).abs() < 1e-9));
        // SpringRank: -(alpha + (m/n)(2 - beta)) / (2m/n + alpha).
        let sr = perp(ScoreKind::SpringRank);
        let a = 1e-8;
        let want = -(a + m / n as f64 * (2.0 - beta)) / (2.0 * m / n as f64 + a);
        assert!(sr[1..].iter().all(|v| (v - want).abs() < 1e-9), "{sr:?} vs {want}");
    }

    #[test]
    fn marginal_at_exact_critical_value() {
        let model = LongMemoryModel::new(ScoreKind::RootDegree, 8, 1.0, 0.0, 0.0).unwrap();
        let model = model.with_beta1(model.critical_beta1());
        let jac = jacobian_egalitarian(&model).unwrap();
        assert!(jac.max_real.abs() < 1e-12);
        assert_eq!(jac.stability, Stability::Marginal);
    }

    #[test]
    fn general_jacobian_matches_finite_differences_of_fixed_point_map() {
        // J + I is the derivative of x -> sigma(m G(x)) at any x.
        let n = 5;
        for kind in ScoreKind::ALL {
            let model = LongMemoryModel::new(kind, n, 2.0, 1.4, -0.7).unwrap().alphas(0.85, 0.05).unwrap();
            let x = match kind {
                ScoreKind::RootDegree => DVector::from_vec(vec![0.2, 0.5, 0.3, 0.6, 0.4]),
                ScoreKind::PageRank => DVector::from_vec(vec![0.8, 1.3, 0.9, 1.1, 0.9]),
                ScoreKind::SpringRank => DVector::from_vec(vec![-0.3, 0.4, 0.1, -0.1, -0.1]),
            };
            let jac = model.jacobian(&x).unwrap();
            for k in 0..n {
                let h = 1e-6;
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fd = (model.fixed_point_map(&xp).unwrap() - model.fixed_point_map(&xm).unwrap()) / (2.0 * h);
                let mut col = jac.column(k).into_owned();
                col[k] += 1.0;
                assert!((&col - &fd).amax() < 1e-6, "{kind} column {k}: {col} vs {fd}");
            }
        }
    }

    #[test]
    fn finite_difference_gradient_mode_agrees() {
        let analytic = LongMemoryModel::new(ScoreKind::SpringRank, 5, 1.0, 2.3, -0.8).unwrap();
        let fd = analytic.clone().gradient_mode(GradientMode::FiniteDifference);
        let x = DVector::from_vec(vec![-0.3, 0.4, 0.1, -0.1, -0.1]);
        let j1 = analytic.jacobian(&x).unwrap();
        let j2 = fd.jacobian(&x).unwrap();
        assert!((j1 - j2).amax() < 1e-9);
    }
}
