//! Maximum-likelihood inference from observed update matrices.
//!
//! Scores depend only on the observed history and `lambda`, never on `beta`,
//! so for fixed `lambda` the log-likelihood is a concave function of `beta`
//! with a closed-form gradient and Hessian. The fit profiles `beta` out with
//! Newton's method and searches `lambda` with restarted bracketing plus
//! golden-section refinement.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{log_choice_probabilities, FeatureSet};
use crate::error::{Error, Result};
use crate::model::{decay_into, validate_adjacency};
use crate::scores::{ScoreFunction, ScoreKind, Scorer, DEFAULT_ALPHA_P, DEFAULT_ALPHA_S};
use crate::stability::critical_beta1;

pub use crate::model::half_life as halflife;

/// Observed updates `Delta(t)` with labels and an optional warm-start state.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSequence {
    pub deltas: Vec<DMatrix<u32>>,
    /// Initial state. When absent the first period seeds the state and is
    /// not scored.
    pub a0: Option<DMatrix<f64>>,
    pub node_labels: Vec<String>,
    pub period_labels: Vec<String>,
    /// Unit of one period, e.g. "year" or "week".
    pub period_unit: Option<String>,
}

impl InteractionSequence {
    pub fn new(deltas: Vec<DMatrix<u32>>, node_labels: Vec<String>, period_labels: Vec<String>) -> Result<Self> {
        let n = node_labels.len();
        if n == 0 {
            return Err(Error::Domain("sequence needs at least one node".into()));
        }
        if period_labels.len() != deltas.len() {
            return Err(Error::shape(format!("{} period labels", deltas.len()), period_labels.len()));
        }
        for d in &deltas {
            if d.shape() != (n, n) {
                return Err(Error::shape(format!("{n}x{n} update"), format!("{}x{}", d.nrows(), d.ncols())));
            }
        }
        Ok(Self {
            deltas,
            a0: None,
            node_labels,
            period_labels,
            period_unit: None,
        })
    }

    /// Sequence with integer labels, as produced by a simulation.
    pub fn from_deltas(a0: Option<DMatrix<f64>>, deltas: Vec<DMatrix<u32>>) -> Result<Self> {
        let n = deltas.first().map(|d| d.nrows()).or(a0.as_ref().map(|a| a.nrows())).unwrap_or(0);
        let periods = (0..deltas.len()).map(|t| t.to_string()).collect();
        let seq = Self::new(deltas, (0..n).map(|i| i.to_string()).collect(), periods)?;
        match a0 {
            Some(a) => seq.with_a0(a),
            None => Ok(seq),
        }
    }

    pub fn with_a0(mut self, a0: DMatrix<f64>) -> Result<Self> {
        validate_adjacency(&a0)?;
        if a0.nrows() != self.n() {
            return Err(Error::shape(format!("{0}x{0} initial state", self.n()), a0.nrows()));
        }
        self.a0 = Some(a0);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.node_labels.len()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Total endorsements per period.
    pub fn totals(&self) -> Vec<u64> {
        self.deltas.iter().map(|d| d.iter().map(|&k| k as u64).sum()).collect()
    }

    /// Mean endorsements per period.
    pub fn mean_count(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.totals().iter().sum::<u64>() as f64 / self.len() as f64
    }

    /// The starting state and the index of the first scored period.
    pub fn initial_state(&self) -> Result<(DMatrix<f64>, usize)> {
        match &self.a0 {
            Some(a) => Ok((a.clone(), 0)),
            None => {
                let first = self
                    .deltas
                    .first()
                    .ok_or_else(|| Error::Domain("sequence has no periods".into()))?;
                Ok((first.map(f64::from), 1))
            }
        }
    }

    /// Number of periods that contribute to the likelihood.
    pub fn scored_periods(&self) -> usize {
        match self.a0 {
            Some(_) => self.len(),
            None => self.len().saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LikelihoodOptions {
    pub alpha_p: f64,
    pub alpha_s: f64,
    pub mask_diagonal: bool,
    pub features: FeatureSet,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        Self {
            alpha_p: DEFAULT_ALPHA_P,
            alpha_s: DEFAULT_ALPHA_S,
            mask_diagonal: false,
            features: FeatureSet::canonical(),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// Feature matrices along the observed history at one `lambda`; the
/// likelihood in `beta` is evaluated from these without rescoring.
#[derive(Debug, Clone)]
pub struct ScoredSequence {
    counts: Vec<DMatrix<f64>>,
    features: Vec<Vec<DMatrix<f64>>>,
    n: usize,
    mask_diagonal: bool,
    labels: Vec<String>,
}

/// Likelihood value with first and second derivatives in `beta`.
#[derive(Debug, Clone)]
pub struct LikelihoodEval {
    pub loglik: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl ScoredSequence {
    pub fn new(seq: &InteractionSequence, kind: ScoreKind, lambda: f64, opts: &LikelihoodOptions) -> Result<Self> {
        check_lambda(lambda)?;
        let (mut a, first) = seq.initial_state()?;
        let scorer = Scorer::with_alphas(kind, opts.alpha_p, opts.alpha_s);
        let mut counts = Vec::with_capacity(seq.len() - first);
        let mut features = Vec::with_capacity(seq.len() - first);
        let mut labels = Vec::with_capacity(seq.len() - first);
        for t in first..seq.len() {
            let s = scorer
                .score(&a)
                .map_err(|e| Error::numeric(format!("scoring period {}: {e}", seq.period_labels[t])))?;
            features.push(opts.features.eval_all(&s));
            let delta = seq.deltas[t].map(f64::from);
            a = decay_into(&a, &delta, lambda);
            counts.push(delta);
            labels.push(seq.period_labels[t].clone());
        }
        Ok(Self {
            counts,
            features,
            n: seq.n(),
            mask_diagonal: opts.mask_diagonal,
            labels,
        })
    }

    pub fn periods(&self) -> usize {
        self.counts.len()
    }

    pub fn loglik(&self, beta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(beta, false)?.loglik)
    }

    /// Log-likelihood, gradient and (if `second_order`) Hessian in `beta`.
    /// An observed endorsement with zero modelled probability yields
    /// `-inf` with a warning.
    pub fn evaluate(&self, beta: &[f64], second_order: bool) -> Result<LikelihoodEval> {
        let l = beta.len();
        if let Some(f) = self.features.first() {
            if f.len() != l {
                return Err(Error::shape(format!("{} utility weights", f.len()), l));
            }
        }
        let n = self.n;
        let log_n = (n as f64).ln();
        let mut loglik = 0.0;
        let mut gradient = DVector::zeros(l);
        let mut hessian = DMatrix::zeros(l, l);
        let mut mean = vec![0.0; l];
        for (t, (k, phi)) in self.counts.iter().zip(&self.features).enumerate() {
            let mut u = DMatrix::zeros(n, n);
            for (f, &b) in phi.iter().zip(beta) {
                if b != 0.0 {
                    u += f * b;
                }
            }
            let logp = log_choice_probabilities(&u, self.mask_diagonal);
            for i in 0..n {
                let k_i: f64 = k.row(i).sum();
                if k_i == 0.0 {
                    continue;
                }
                mean.iter_mut().for_each(|m| *m = 0.0);
                for j in 0..n {
                    let kij = k[(i, j)];
                    let lp = logp[(i, j)];
                    if kij > 0.0 {
                        if lp == f64::NEG_INFINITY {
                            log::warn!(
                                "period {}: observed endorsement {i}->{j} has zero modelled probability",
                                self.labels[t]
                            );
                            return Ok(LikelihoodEval {
                                loglik: f64::NEG_INFINITY,
                                gradient: DVector::from_element(l, f64::NAN),
                                hessian: DMatrix::from_element(l, l, f64::NAN),
                            });
                        }
                        loglik += kij * (lp - log_n);
                    }
                    let p = lp.exp();
                    for (ell, f) in phi.iter().enumerate() {
                        gradient[ell] += kij * f[(i, j)];
                        mean[ell] += p * f[(i, j)];
                    }
                }
                for ell in 0..l {
                    gradient[ell] -= k_i * mean[ell];
                }
                if second_order {
                    for j in 0..n {
                        let p = logp[(i, j)].exp();
                        if p == 0.0 {
                            continue;
                        }
                        for a in 0..l {
                            let da = phi[a][(i, j)] - mean[a];
                            for b in 0..=a {
                                hessian[(a, b)] -= k_i * p * da * (phi[b][(i, j)] - mean[b]);
                            }
                        }
                    }
                }
            }
        }
        for a in 0..l {
            for b in 0..a {
                hessian[(b, a)] = hessian[(a, b)];
            }
        }
        Ok(LikelihoodEval {
            loglik,
            gradient,
            hessian,
        })
    }

    /// Maximizes over `beta` by damped Newton ascent from `beta0`.
    pub fn maximize_beta(&self, beta0: &[f64], max_iter: usize) -> Result<BetaOptimum> {
        let l = beta0.len();
        let mut beta = DVector::from_column_slice(beta0);
        let mut ev = self.evaluate(beta.as_slice(), true)?;
        if !ev.loglik.is_finite() {
            return Err(Error::numeric("log-likelihood is not finite at the starting point"));
        }
        let mut iterations = 0;
        while iterations < max_iter {
            let gnorm = ev.gradient.amax();
            if gnorm <= 1e-10 * (1.0 + ev.loglik.abs()) {
                break;
            }
            iterations += 1;
            let neg_h = -&ev.hessian;
            let step = newton_direction(&neg_h, &ev.gradient, l);
            let slope = ev.gradient.dot(&step);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = &beta + &step * t;
                let tv = self.evaluate(trial.as_slice(), true)?;
                if tv.loglik.is_finite() && tv.loglik >= ev.loglik + 1e-4 * t * slope {
                    accepted = Some((trial, tv));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((b, v)) => {
                    let gain = v.loglik - ev.loglik;
                    beta = b;
                    ev = v;
                    if gain.abs() <= 1e-15 * (1.0 + ev.loglik.abs()) && ev.gradient.amax() <= 1e-6 * (1.0 + ev.loglik.abs()) {
                        break;
                    }
                }
                // No ascent possible at working precision.
                None => break,
            }
        }
        Ok(BetaOptimum {
            beta: beta.iter().copied().collect(),
            loglik: ev.loglik,
            grad_norm: ev.gradient.amax(),
            iterations,
        })
    }
}

fn newton_direction(neg_h: &DMatrix<f64>, g: &DVector<f64>, l: usize) -> DVector<f64> {
    let scale = neg_h.amax().max(1.0);
    let mut mu = 0.0;
    for _ in 0..30 {
        let shifted = neg_h + DMatrix::identity(l, l) * mu;
        if let Some(ch) = shifted.cholesky() {
            return ch.solve(g);
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { mu * 10.0 };
    }
    g / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaOptimum {
    pub beta: Vec<f64>,
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// `sum_t sum_ij k_ij(t) log G_ij(t)` with the multinomial constant dropped.
pub fn log_likelihood(
    seq: &InteractionSequence,
    lambda: f64,
    beta: &[f64],
    kind: ScoreKind,
    opts: &LikelihoodOptions,
) -> Result<f64> {
    opts.features.check_beta(beta)?;
    ScoredSequence::new(seq, kind, lambda, opts)?.loglik(beta)
}

/// Exact gradient of [`log_likelihood`] in `beta`.
pub fn grad_beta(
    seq: &InteractionSequence,
    lambda: f64,
    beta: &[f64],
    kind: ScoreKind,
    opts: &LikelihoodOptions,
) -> Result<DVector<f64>> {
    opts.features.check_beta(beta)?;
    Ok(ScoredSequence::new(seq, kind, lambda, opts)?.evaluate(beta, false)?.gradient)
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub likelihood: LikelihoodOptions,
    /// Starting values for the `lambda` search; one restart each.
    pub restarts: Vec<f64>,
    pub lambda_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            likelihood: LikelihoodOptions::default(),
            restarts: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            lambda_tol: 1e-4,
            newton_max_iter: 200,
        }
    }
}

impl FitOptions {
    /// `r` restarts spread evenly over the interior of (0, 1).
    pub fn with_restart_count(mut self, r: usize) -> Self {
        self.restarts = (0..r).map(|i| (2 * i + 1) as f64 / (2 * r) as f64).collect();
        self
    }
}

/// Outcome of one `lambda` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub start: f64,
    pub lambda: Option<f64>,
    pub loglik: Option<f64>,
    pub evaluations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub score_kind: ScoreKind,
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// Standard errors of `(lambda, beta...)`; absent when the Hessian at
    /// the optimum is not negative definite.
    pub se: Option<Vec<f64>>,
    pub loglik: f64,
    pub halflife: f64,
    pub grad_norm: f64,
    pub n: usize,
    pub periods: usize,
    pub mean_count: f64,
    pub restarts: Vec<RestartTrace>,
}

impl FitResult {
    pub fn se_lambda(&self) -> Option<f64> {
        self.se.as_ref().map(|s| s[0])
    }

    pub fn se_beta(&self, ell: usize) -> Option<f64> {
        self.se.as_ref().and_then(|s| s.get(ell + 1).copied())
    }
}

const LAMBDA_LO: f64 = 1e-4;
const LAMBDA_HI: f64 = 1.0 - 1e-4;

struct Profile<'a> {
    seq: &'a InteractionSequence,
    kind: ScoreKind,
    opts: &'a FitOptions,
    evaluations: usize,
}

impl Profile<'_> {
    fn eval(&mut self, lambda: f64) -> f64 {
        self.evaluations += 1;
        let beta0 = vec![0.0; self.opts.likelihood.features.len()];
        match ScoredSequence::new(self.seq, self.kind, lambda, &self.opts.likelihood)
            .and_then(|s| s.maximize_beta(&beta0, self.opts.newton_max_iter))
        {
            Ok(opt) => opt.loglik,
            Err(e) => {
                log::debug!("profile at lambda {lambda}: {e}");
                f64::NEG_INFINITY
            }
        }
    }

    /// Walks uphill from `start` with growing steps until the profile
    /// turns down, then refines the bracket by golden-section search.
    fn search(&mut self, start: f64) -> Result<(f64, f64)> {
        let mut b = start.clamp(LAMBDA_LO, LAMBDA_HI);
        let mut fb = self.eval(b);
        let h0 = 0.02;
        let up = (b + h0).min(LAMBDA_HI);
        let down = (b - h0).max(LAMBDA_LO);
        let (fu, fd) = (self.eval(up), self.eval(down));
        if !fb.is_finite() && !fu.is_finite() && !fd.is_finite() {
            return Err(Error::Fit(format!("likelihood not finite near lambda {start}")));
        }
        let (mut lo, mut hi);
        if fb >= fu && fb >= fd {
            lo = down;
            hi = up;
        } else {
            let dir = if fu > fd { 1.0 } else { -1.0 };
            let mut a = b;
            b = if dir > 0.0 { up } else { down };
            fb = fu.max(fd);
            let mut h = h0;
            loop {
                h *= 2.0;
                let c = (b + dir * h).clamp(LAMBDA_LO, LAMBDA_HI);
                let fc = if c == b { f64::NEG_INFINITY } else { self.eval(c) };
                if fc <= fb {
                    lo = a.min(c);
                    hi = a.max(c);
                    break;
                }
                a = b;
                (b, fb) = (c, fc);
            }
        }
        // Golden section on [lo, hi].
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let mut f1 = self.eval(x1);
        let mut f2 = self.eval(x2);
        while hi - lo > self.opts.lambda_tol {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = self.eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = self.eval(x2);
            }
        }
        let candidates = [(x1, f1), (x2, f2), (b, fb)];
        let best = candidates
            .into_iter()
            .filter(|(x, _)| (lo - self.opts.lambda_tol..=hi + self.opts.lambda_tol).contains(x))
            .fold((x1, f1), |acc, c| if c.1 > acc.1 { c } else { acc });
        if !best.1.is_finite() {
            return Err(Error::Fit(format!("no finite likelihood found from lambda {start}")));
        }
        Ok(best)
    }
}

/// Maximum-likelihood estimate of `(lambda, beta)` for one score kind.
pub fn fit(seq: &InteractionSequence, kind: ScoreKind, opts: &FitOptions) -> Result<FitResult> {
    if seq.len() < 2 {
        return Err(Error::Domain(format!("fitting needs at least 2 periods, got {}", seq.len())));
    }
    if opts.restarts.is_empty() {
        return Err(Error::Config("at least one restart is required".into()));
    }
    let traces: Vec<(RestartTrace, Option<(f64, f64)>)> = opts
        .restarts
        .par_iter()
        .map(|&start| {
            let mut profile = Profile { seq, kind, opts, evaluations: 0 };
            let out = profile.search(start);
            let trace = RestartTrace {
                start,
                lambda: out.as_ref().ok().map(|o| o.0),
                loglik: out.as_ref().ok().map(|o| o.1),
                evaluations: profile.evaluations,
                error: out.as_ref().err().map(|e| e.to_string()),
            };
            (trace, out.ok())
        })
        .collect();
    let best = traces
        .iter()
        .filter_map(|(_, o)| *o)
        .fold(None, |acc: Option<(f64, f64)>, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        });
    let restarts: Vec<RestartTrace> = traces.into_iter().map(|(t, _)| t).collect();
    let Some((lambda, _)) = best else {
        let detail: Vec<String> = restarts
            .iter()
            .map(|t| format!("start {}: {}", t.start, t.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Fit(format!("all restarts failed: {}", detail.join("; "))));
    };
    let l = opts.likelihood.features.len();
    let scored = ScoredSequence::new(seq, kind, lambda, &opts.likelihood)?;
    let opt = scored.maximize_beta(&vec![0.0; l], opts.newton_max_iter)?;
    let se = standard_errors(seq, kind, &opts.likelihood, lambda, &opt.beta)?;
    Ok(FitResult {
        score_kind: kind,
        lambda,
        beta: opt.beta,
        se,
        loglik: opt.loglik,
        halflife: halflife(lambda),
        grad_norm: opt.grad_norm,
        n: seq.n(),
        periods: scored.periods(),
        mean_count: seq.mean_count(),
        restarts,
    })
}

/// Standard errors from the inverse of the negated finite-difference
/// Hessian of the log-likelihood in `(lambda, beta)`.
pub fn standard_errors(
    seq: &InteractionSequence,
    kind: ScoreKind,
    opts: &LikelihoodOptions,
    lambda: f64,
    beta: &[f64],
) -> Result<Option<Vec<f64>>> {
    let hessian = fd_hessian(seq, kind, opts, lambda, beta)?;
    let neg = -hessian;
    let Some(ch) = neg.clone().cholesky() else {
        log::warn!("log-likelihood Hessian is not negative definite; standard errors unavailable");
        return Ok(None);
    };
    let cov = ch.inverse();
    let se: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    if se.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(Some(se))
    } else {
        log::warn!("standard errors are not finite");
        Ok(None)
    }
}

/// Central-difference Hessian in `theta = (lambda, beta)`, symmetrized.
pub fn fd_hessian(
    seq: &InteractionSequence,
    kind: ScoreKind,
    opts: &LikelihoodOptions,
    lambda: f64,
    beta: &[f64],
) -> Result<DMatrix<f64>> {
    let d = beta.len() + 1;
    let theta: Vec<f64> = std::iter::once(lambda).chain(beta.iter().copied()).collect();
    let mut h: Vec<f64> = theta.iter().map(|t| 1e-4 * (1.0 + t.abs())).collect();
    // Keep the lambda stencil inside the unit interval.
    h[0] = h[0].min(0.5 * lambda.min(1.0 - lambda));
    if !(h[0] > 0.0) {
        return Err(Error::Domain(format!("lambda {lambda} lies on the boundary")));
    }
    let f = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut th = theta.clone();
        for &(i, v) in shift {
            th[i] += v;
        }
        log_likelihood(seq, th[0], &th[1..], kind, opts)
    };
    let f0 = f(&[])?;
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let fp = f(&[(i, h[i])])?;
        let fm = f(&[(i, -h[i])])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = f(&[(i, h[i]), (j, h[j])])?;
            let fpm = f(&[(i, h[i]), (j, -h[j])])?;
            let fmp = f(&[(i, -h[i]), (j, h[j])])?;
            let fmm = f(&[(i, -h[i]), (j, -h[j])])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub score_kind: ScoreKind,
    pub fit: Option<FitResult>,
    pub error: Option<String>,
    /// Highest log-likelihood among the successful fits.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreComparison {
    pub entries: Vec<ComparisonEntry>,
}

impl ScoreComparison {
    pub fn best(&self) -> Option<ScoreKind> {
        self.entries.iter().find(|e| e.best).map(|e| e.score_kind)
    }

    /// Rows in the parameter-table layout.
    pub fn rows(&self, dataset: &str) -> Vec<FitRow> {
        self.entries
            .iter()
            .filter_map(|e| e.fit.as_ref().map(|f| FitRow::new(dataset, f)))
            .collect()
    }
}

/// `dataset,score,lambda,se_lambda,beta1,se_beta1,beta2,se_beta2,loglik`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub dataset: String,
    pub score: ScoreKind,
    pub lambda: f64,
    pub se_lambda: Option<f64>,
    pub beta1: f64,
    pub se_beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub se_beta2: Option<f64>,
    pub loglik: f64,
}

impl FitRow {
    pub fn new(dataset: &str, fit: &FitResult) -> Self {
        Self {
            dataset: dataset.to_string(),
            score: fit.score_kind,
            lambda: fit.lambda,
            se_lambda: fit.se_lambda(),
            beta1: fit.beta.first().copied().unwrap_or(f64::NAN),
            se_beta1: fit.se_beta(0),
            beta2: fit.beta.get(1).copied(),
            se_beta2: fit.se_beta(1),
            loglik: fit.loglik,
        }
    }
}

/// Fits every requested score kind to the same sequence. Per-kind failures
/// are recorded, not propagated; output order is canonical.
pub fn compare_scores(seq: &InteractionSequence, kinds: &[ScoreKind], opts: &FitOptions) -> Result<ScoreComparison> {
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    if kinds.len() < 2 {
        return Err(Error::Domain("comparison needs at least 2 distinct score kinds".into()));
    }
    if seq.len() < 2 {
        return Err(Error::Domain(format!("fitting needs at least 2 periods, got {}", seq.len())));
    }
    let fits: Vec<Result<FitResult>> = kinds.par_iter().map(|&k| fit(seq, k, opts)).collect();
    let mut entries: Vec<ComparisonEntry> = kinds
        .into_iter()
        .zip(fits)
        .map(|(k, r)| match r {
            Ok(f) => ComparisonEntry { score_kind: k, fit: Some(f), error: None, best: false },
            Err(e) => ComparisonEntry { score_kind: k, fit: None, error: Some(e.to_string()), best: false },
        })
        .collect();
    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.fit.as_ref().map(|f| (i, f.loglik)))
        .filter(|(_, l)| l.is_finite())
        .fold(None, |acc: Option<(usize, f64)>, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        });
    if let Some((i, _)) = best {
        entries[i].best = true;
    }
    Ok(ScoreComparison { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
    Equal,
}

/// Fitted prestige weight against the critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub score_kind: ScoreKind,
    pub n: usize,
    pub m_bar: f64,
    pub beta1: f64,
    pub se_beta1: Option<f64>,
    pub critical_beta1: f64,
    pub side: Side,
    /// More than two standard errors from the critical value.
    pub significant: bool,
}

impl CriticalityReport {
    pub fn label(&self) -> &'static str {
        match (self.side, self.significant) {
            (Side::Above, true) => "above, significant",
            (Side::Above, false) => "above",
            (Side::Below, true) => "below, significant",
            (Side::Below, false) => "below",
            (Side::Equal, _) => "indistinguishable",
        }
    }
}

pub fn criticality_report(fit: &FitResult, n: usize, m_bar: f64) -> CriticalityReport {
    let opts = LikelihoodOptions::default();
    let critical = critical_beta1(fit.score_kind, n, m_bar, opts.alpha_p, opts.alpha_s);
    criticality_against(fit, n, m_bar, critical)
}

/// As [`criticality_report`] with an explicit critical value.
pub fn criticality_against(fit: &FitResult, n: usize, m_bar: f64, critical: f64) -> CriticalityReport {
    let beta1 = fit.beta.first().copied().unwrap_or(f64::NAN);
    let se = fit.se_beta(0);
    let side = if beta1 > critical {
        Side::Above
    } else if beta1 < critical {
        Side::Below
    } else {
        Side::Equal
    };
    let significant = side != Side::Equal && se.is_some_and(|se| (beta1 - critical).abs() > 2.0 * se);
    CriticalityReport {
        score_kind: fit.score_kind,
        n,
        m_bar,
        beta1,
        se_beta1: se,
        critical_beta1: critical,
        side,
        significant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EndorsementState, ModelParams};
    use crate::sim::{run_observed, Dynamics};
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn two_node(periods: usize) -> InteractionSequence {
        let d = dmatrix![0u32, 1; 0, 0];
        InteractionSequence::from_deltas(Some(DMatrix::from_element(2, 2, 0.25)), vec![d; periods]).unwrap()
    }

    #[test]
    fn uniform_two_node_likelihood() {
        let opts = LikelihoodOptions::default();
        for kind in ScoreKind::ALL {
            let l1 = log_likelihood(&two_node(1), 0.5, &[0.0, 0.0], kind, &opts).unwrap();
            assert!((l1 - 0.25f64.ln()).abs() < 1e-12);
            let l2 = log_likelihood(&two_node(2), 0.5, &[0.0, 0.0], kind, &opts).unwrap();
            assert!((l2 - 2.0 * 0.25f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_data_has_zero_prestige_gradient() {
        let d = dmatrix![0u32, 1; 1, 0];
        let seq = InteractionSequence::from_deltas(Some(DMatrix::from_element(2, 2, 0.5)), vec![d; 3]).unwrap();
        for kind in ScoreKind::ALL {
            let g = grad_beta(&seq, 0.7, &[0.0, 0.0], kind, &LikelihoodOptions::default()).unwrap();
            assert!(g[0].abs() < 1e-12, "{kind}: {g}");
        }
    }

    fn synthetic(kind: ScoreKind, n: usize, t: usize, m: u32, seed: u64) -> InteractionSequence {
        let params = ModelParams::new(kind, 0.8, 1.5, -0.5, m).with_seed(seed);
        let a0 = EndorsementState::uniform(n, m).unwrap().into_adjacency();
        let (_, deltas) = run_observed(&params, &a0, t).unwrap();
        InteractionSequence::from_deltas(Some(a0), deltas).unwrap()
    }

    #[test]
    fn matches_brute_force_recomputation() {
        let opts = LikelihoodOptions::default();
        for kind in ScoreKind::ALL {
            let seq = synthetic(kind, 5, 12, 6, 3);
            let (lambda, beta) = (0.65, [1.1, -0.4]);
            let fast = log_likelihood(&seq, lambda, &beta, kind, &opts).unwrap();
            let params = ModelParams::new(kind, lambda, beta[0], beta[1], 1);
            let dynamics = Dynamics::from_params(&params).unwrap();
            let mut slow = 0.0;
            for t in 0..seq.len() {
                // Roll the state forward from scratch for every period.
                let mut a = seq.a0.clone().unwrap();
                for d in &seq.deltas[..t] {
                    a = a * lambda + d.map(f64::from) * (1.0 - lambda);
                }
                let (_, p) = dynamics.choice(&a).unwrap();
                for ((k, p), _) in seq.deltas[t].iter().zip(p.0.iter()).zip(0..) {
                    if *k > 0 {
                        slow += *k as f64 * (p / 5.0).ln();
                    }
                }
            }
            assert!((fast - slow).abs() < 1e-10 * slow.abs().max(1.0), "{kind}: {fast} vs {slow}");
        }
    }

    #[test]
    fn first_period_seeds_state_when_no_warm_start() {
        let mut seq = synthetic(ScoreKind::SpringRank, 4, 6, 5, 9);
        seq.a0 = None;
        let opts = LikelihoodOptions::default();
        let scored = ScoredSequence::new(&seq, ScoreKind::SpringRank, 0.5, &opts).unwrap();
        assert_eq!(scored.periods(), 5);
        let mut tail = seq.clone();
        tail.a0 = Some(seq.deltas[0].map(f64::from));
        tail.deltas.remove(0);
        tail.period_labels.remove(0);
        let a = log_likelihood(&seq, 0.5, &[1.0, -1.0], ScoreKind::SpringRank, &opts).unwrap();
        let b = log_likelihood(&tail, 0.5, &[1.0, -1.0], ScoreKind::SpringRank, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn masked_self_endorsement_is_impossible() {
        let d = dmatrix![1u32, 0; 0, 0];
        let seq = InteractionSequence::from_deltas(Some(DMatrix::from_element(2, 2, 0.25)), vec![d]).unwrap();
        let opts = LikelihoodOptions { mask_diagonal: true, ..Default::default() };
        let l = log_likelihood(&seq, 0.5, &[0.0, 0.0], ScoreKind::SpringRank, &opts).unwrap();
        assert_eq!(l, f64::NEG_INFINITY);
    }

    #[test]
    fn analytic_hessian_matches_gradient_differences() {
        let seq = synthetic(ScoreKind::PageRank, 6, 10, 8, 1);
        let scored = ScoredSequence::new(&seq, ScoreKind::PageRank, 0.7, &LikelihoodOptions::default()).unwrap();
        let beta = [0.8, -0.3];
        let h = scored.evaluate(&beta, true).unwrap().hessian;
        for k in 0..2 {
            let eps = 1e-6;
            let mut bp = beta;
            bp[k] += eps;
            let mut bm = beta;
            bm[k] -= eps;
            let gp = scored.evaluate(&bp, false).unwrap().gradient;
            let gm = scored.evaluate(&bm, false).unwrap().gradient;
            let col = (gp - gm) / (2.0 * eps);
            assert!((col - h.column(k)).amax() < 1e-5 * h.amax());
        }
    }

    #[test]
    fn newton_reaches_stationary_point() {
        let seq = synthetic(ScoreKind::RootDegree, 6, 30, 10, 4);
        let scored = ScoredSequence::new(&seq, ScoreKind::RootDegree, 0.8, &LikelihoodOptions::default()).unwrap();
        let opt = scored.maximize_beta(&[0.0, 0.0], 200).unwrap();
        assert!(opt.grad_norm <= 1e-6 * (1.0 + opt.loglik.abs()));
        assert!(opt.loglik <= 0.0);
    }

    #[test]
    fn halflife_values() {
        assert!((halflife(0.87) - 4.97).abs() < 0.01);
        assert_eq!(halflife(0.5), 1.0);
    }

    fn fake_fit(kind: ScoreKind, beta1: f64, se: f64) -> FitResult {
        FitResult {
            score_kind: kind,
            lambda: 0.9,
            beta: vec![beta1, 0.0],
            se: Some(vec![0.01, se, 0.1]),
            loglik: -1.0,
            halflife: halflife(0.9),
            grad_norm: 0.0,
            n: 8,
            periods: 2,
            mean_count: 1.0,
            restarts: vec![],
        }
    }

    #[test]
    fn criticality_examples() {
        let r = criticality_against(&fake_fit(ScoreKind::SpringRank, 3.03, 0.16), 21, 1.0, 2.00);
        assert_eq!(r.label(), "above, significant");
        let r = criticality_against(&fake_fit(ScoreKind::RootDegree, 1.28, 0.02), 70, 150.0, 1.36);
        assert_eq!(r.label(), "below, significant");
        let r = criticality_against(&fake_fit(ScoreKind::PageRank, 1.2, 0.5), 8, 1.0, 1.2);
        assert_eq!(r.label(), "indistinguishable");
        let r = criticality_report(&fake_fit(ScoreKind::RootDegree, 1.28, 0.02), 70, 150.0);
        assert!((r.critical_beta1 - 2.0 * (70.0f64 / 150.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.side, Side::Below);
    }

    #[test]
    fn comparison_preconditions() {
        let seq = synthetic(ScoreKind::SpringRank, 4, 3, 4, 1);
        let opts = FitOptions::default();
        assert!(compare_scores(&seq, &[ScoreKind::PageRank, ScoreKind::PageRank], &opts).is_err());
        let one = InteractionSequence::from_deltas(None, vec![seq.deltas[0].clone()]).unwrap();
        assert!(fit(&one, ScoreKind::SpringRank, &opts).is_err());
        assert!(compare_scores(&one, &ScoreKind::ALL, &opts).is_err());
    }

    #[test]
    fn comparison_is_order_invariant() {
        let seq = synthetic(ScoreKind::SpringRank, 5, 25, 8, 2);
        let opts = FitOptions::default().with_restart_count(2);
        let a = compare_scores(&seq, &ScoreKind::ALL, &opts).unwrap();
        let mut rev = ScoreKind::ALL.to_vec();
        rev.reverse();
        let b = compare_scores(&seq, &rev, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.iter().filter(|e| e.best).count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn concave_along_segments(seed in 0u64..1000, b in prop::array::uniform4(-3.0f64..3.0), kind_ix in 0usize..3) {
            let kind = ScoreKind::ALL[kind_ix];
            let seq = synthetic(kind, 5, 8, 6, seed);
            let scored = ScoredSequence::new(&seq, kind, 0.6, &LikelihoodOptions::default()).unwrap();
            let x = [b[0], b[1]];
            let y = [b[2], b[3]];
            let mid = [(x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0];
            let (lx, ly, lm) = (scored.loglik(&x).unwrap(), scored.loglik(&y).unwrap(), scored.loglik(&mid).unwrap());
            prop_assert!(lm >= 0.5 * (lx + ly) - 1e-9 * lm.abs());
        }

        #[test]
        fn additive_over_periods(seed in 0u64..1000, split in 1usize..9, lambda in 0.05f64..0.95) {
            let kind = ScoreKind::PageRank;
            let seq = synthetic(kind, 4, 10, 5, seed);
            let opts = LikelihoodOptions::default();
            let beta = [1.0, -0.5];
            let whole = log_likelihood(&seq, lambda, &beta, kind, &opts).unwrap();
            let head = InteractionSequence::from_deltas(seq.a0.clone(), seq.deltas[..split].to_vec()).unwrap();
            let mut a = seq.a0.clone().unwrap();
            for d in &seq.deltas[..split] {
                a = a * lambda + d.map(f64::from) * (1.0 - lambda);
            }
            let tail = InteractionSequence::from_deltas(Some(a), seq.deltas[split..].to_vec()).unwrap();
            let parts = log_likelihood(&head, lambda, &beta, kind, &opts).unwrap()
                + log_likelihood(&tail, lambda, &beta, kind, &opts).unwrap();
            prop_assert!((whole - parts).abs() < 1e-9 * whole.abs());
        }

        #[test]
        fn halflife_increasing(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assume!(a < b);
            prop_assert!(halflife(a) < halflife(b));
        }
    }
}
