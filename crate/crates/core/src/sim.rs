//! Trajectory engine: score, utilities, choice, sample, decay; repeated.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{choice_probabilities_masked, sample_delta, step_rng, utility, ChoiceProbabilities, FeatureSet};
use crate::error::{Error, Result};
use crate::model::{decay_into, validate_adjacency, ModelParams};
use crate::scores::{ScoreFunction, Scorer};
use crate::serde_matrix;

/// Default length of the averaging window for long-run summaries.
pub const DEFAULT_WINDOW: usize = 500;

/// Score function plus utility specification: everything needed to turn a
/// state matrix into choice probabilities.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub scorer: Scorer,
    pub beta: Vec<f64>,
    pub features: FeatureSet,
    pub mask_diagonal: bool,
}

impl Dynamics {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        Self::with_features(params, FeatureSet::canonical())
    }

    pub fn with_features(params: &ModelParams, features: FeatureSet) -> Result<Self> {
        params.validate()?;
        features.check_beta(&params.beta)?;
        Ok(Self {
            scorer: Scorer::with_alphas(params.score_kind, params.alpha_p, params.alpha_s),
            beta: params.beta.clone(),
            features,
            mask_diagonal: params.mask_diagonal,
        })
    }

    pub fn choice(&self, a: &DMatrix<f64>) -> Result<(DVector<f64>, ChoiceProbabilities)> {
        let s = self.scorer.score(a)?;
        let u = utility(&s, &self.beta, &self.features)?;
        Ok((s, choice_probabilities_masked(&u, self.mask_diagonal)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Keep the full score history (T x n) in addition to the rank history.
    pub scores: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `gamma[t]` is the rank vector in force at step `t`.
    pub gamma: Vec<Vec<f64>>,
    pub scores: Option<Vec<Vec<f64>>>,
    #[serde(with = "serde_matrix")]
    pub a0: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub a_final: DMatrix<f64>,
    pub params: ModelParams,
    pub seed: u64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.gamma.len()
    }

    pub fn n(&self) -> usize {
        self.a0.nrows()
    }

    fn tail(&self, window: usize) -> Result<&[Vec<f64>]> {
        if window == 0 || window > self.gamma.len() {
            return Err(Error::Domain(format!(
                "window {window} must lie in 1..={}",
                self.gamma.len()
            )));
        }
        Ok(&self.gamma[self.gamma.len() - window..])
    }

    /// Mean rank vector over the final `window` steps.
    pub fn mean_gamma(&self, window: usize) -> Result<DVector<f64>> {
        let tail = self.tail(window)?;
        let mut mean = DVector::zeros(self.n());
        for g in tail {
            mean += DVector::from_column_slice(g);
        }
        Ok(mean / window as f64)
    }
}

/// Runs the model for `steps` steps from `a0`.
pub fn run(params: &ModelParams, a0: &DMatrix<f64>, steps: usize, record: RecordOptions) -> Result<Trajectory> {
    run_with(&Dynamics::from_params(params)?, params, a0, steps, record)
}

pub fn run_with(
    dynamics: &Dynamics,
    params: &ModelParams,
    a0: &DMatrix<f64>,
    steps: usize,
    record: RecordOptions,
) -> Result<Trajectory> {
    run_inner(dynamics, params, a0, steps, record, None)
}

/// Runs the model and also returns the sampled update matrices, one per
/// step; these are the observations a fit would see.
pub fn run_observed(
    params: &ModelParams,
    a0: &DMatrix<f64>,
    steps: usize,
) -> Result<(Trajectory, Vec<DMatrix<u32>>)> {
    let mut deltas = Vec::with_capacity(steps);
    let traj = run_inner(
        &Dynamics::from_params(params)?,
        params,
        a0,
        steps,
        RecordOptions::default(),
        Some(&mut deltas),
    )?;
    Ok((traj, deltas))
}

fn run_inner(
    dynamics: &Dynamics,
    params: &ModelParams,
    a0: &DMatrix<f64>,
    steps: usize,
    record: RecordOptions,
    mut deltas: Option<&mut Vec<DMatrix<u32>>>,
) -> Result<Trajectory> {
    params.validate()?;
    validate_adjacency(a0)?;
    let mut a = a0.clone();
    let mut gamma = Vec::with_capacity(steps);
    let mut scores = record.scores.then(|| Vec::with_capacity(steps));
    for t in 0..steps {
        let (s, p) = dynamics.choice(&a).map_err(|e| at_step(t, e))?;
        gamma.push(p.rank_vector().0.iter().copied().collect());
        if let Some(h) = scores.as_mut() {
            h.push(s.iter().copied().collect());
        }
        let mut rng = step_rng(params.seed, t as u64);
        let delta = sample_delta(&p, params.m, &mut rng).map_err(|e| at_step(t, e))?;
        a = decay_into(&a, &delta.map(f64::from), params.lambda);
        if let Some(d) = deltas.as_mut() {
            d.push(delta);
        }
    }
    Ok(Trajectory {
        gamma,
        scores,
        a0: a0.clone(),
        a_final: a,
        params: params.clone(),
        seed: params.seed,
    })
}

fn at_step(t: usize, e: Error) -> Error {
    match e {
        Error::Numeric { message } => Error::numeric(format!("at step {t}: {message}")),
        other => other,
    }
}

/// Population variance of all rank-vector entries over the final `window`
/// steps. Zero for an egalitarian history; larger for sharper hierarchies.
pub fn rank_variance(traj: &Trajectory, window: usize) -> Result<f64> {
    let tail = traj.tail(window)?;
    let count = (tail.len() * traj.n()) as f64;
    let mean = tail.iter().flatten().sum::<f64>() / count;
    Ok(tail.iter().flatten().map(|g| (g - mean).powi(2)).sum::<f64>() / count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta1: f64,
    pub beta2: f64,
    pub variance: f64,
}

/// Rank variance over a `(beta1, beta2)` grid. Runs execute in parallel,
/// share the base seed, and are returned in grid order.
pub fn sweep_variance(
    base: &ModelParams,
    a0: &DMatrix<f64>,
    beta1: &[f64],
    beta2: &[f64],
    steps: usize,
    window: usize,
) -> Result<Vec<SweepPoint>> {
    let grid: Vec<(f64, f64)> = beta1
        .iter()
        .flat_map(|&b1| beta2.iter().map(move |&b2| (b1, b2)))
        .collect();
    grid.par_iter()
        .map(|&(b1, b2)| {
            let mut params = base.clone();
            params.beta = vec![b1, b2];
            let traj = run(&params, a0, steps, RecordOptions::default())?;
            Ok(SweepPoint {
                beta1: b1,
                beta2: b2,
                variance: rank_variance(&traj, window)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EndorsementState;
    use crate::scores::ScoreKind;

    fn uniform(n: usize, m: u32) -> DMatrix<f64> {
        EndorsementState::uniform(n, m).unwrap().into_adjacency()
    }

    #[test]
    fn zero_steps_is_empty() {
        let params = ModelParams::new(ScoreKind::SpringRank, 0.9, 1.0, 0.0, 1);
        let a0 = uniform(4, 1);
        let traj = run(&params, &a0, 0, RecordOptions::default()).unwrap();
        assert!(traj.gamma.is_empty());
        assert_eq!(traj.a_final, a0);
    }

    #[test]
    fn runs_are_deterministic_and_stochastic_in_seed() {
        for kind in ScoreKind::ALL {
            let params = ModelParams::new(kind, 0.95, 2.0, -0.5, 2).with_seed(5);
            let a0 = uniform(5, 2);
            let rec = RecordOptions { scores: true };
            let t1 = run(&params, &a0, 200, rec).unwrap();
            let t2 = run(&params, &a0, 200, rec).unwrap();
            assert_eq!(t1, t2);
            let t3 = run(&params.clone().with_seed(6), &a0, 200, rec).unwrap();
            assert_ne!(t1.a_final, t3.a_final);
            for g in &t1.gamma {
                assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert_eq!(t1.scores.as_ref().unwrap().len(), 200);
        }
    }

    #[test]
    fn rank_variance_closed_forms() {
        let mut traj = run(
            &ModelParams::new(ScoreKind::RootDegree, 0.9, 0.0, 0.0, 1),
            &uniform(8, 1),
            3,
            RecordOptions::default(),
        )
        .unwrap();
        traj.gamma = vec![vec![1.0 / 8.0; 8]; 3];
        assert!(rank_variance(&traj, 3).unwrap().abs() < 1e-18);
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        traj.gamma = vec![e1; 3];
        assert!((rank_variance(&traj, 2).unwrap() - 7.0 / 64.0).abs() < 1e-15);
        assert!(rank_variance(&traj, 4).is_err());
    }

    #[test]
    fn flat_utilities_average_to_uniform() {
        let params = ModelParams::new(ScoreKind::PageRank, 0.99, 0.0, 0.0, 1).with_seed(1);
        let traj = run(&params, &uniform(4, 1), 10_000, RecordOptions::default()).unwrap();
        // With beta = 0 the choice is uniform at every step, whatever the state.
        let mean = traj.mean_gamma(10_000).unwrap();
        assert!((mean - DVector::from_element(4, 0.25)).amax() < 1e-12);
    }

    #[test]
    fn sweep_returns_grid_order() {
        let base = ModelParams::new(ScoreKind::SpringRank, 0.9, 0.0, 0.0, 1);
        let pts = sweep_variance(&base, &uniform(4, 1), &[0.5, 3.0], &[0.0, -1.0], 50, 10).unwrap();
        let keys: Vec<(f64, f64)> = pts.iter().map(|p| (p.beta1, p.beta2)).collect();
        assert_eq!(keys, vec![(0.5, 0.0), (0.5, -1.0), (3.0, 0.0), (3.0, -1.0)]);
    }
}
