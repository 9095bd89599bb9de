//! Two-group equilibria and bifurcation diagrams.
//!
//! Under the ansatz that `k` elite nodes share one score and the remaining
//! `n - k` share another, the fixed-point map preserves both the group
//! structure and the conserved total (`m` in-degree, `n` for PageRank, `0`
//! for SpringRank). Equilibria therefore lie on the line
//! `x(t) = x0 + t v`, with `x0` the egalitarian root and `v` equal to
//! `(n - k)/n` on elite nodes and `-k/n` elsewhere, so `t` is the gap
//! between the two levels. Roots of the scalar residual are bracketed on a
//! dense grid and polished by bisection, which finds every transversal root
//! rather than only the one a continuation happens to follow.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{analyze_equilibrium, Equilibrium, LongMemoryModel, Stability};
use crate::error::{Error, Result};
use crate::scores::ScoreKind;

/// Gaps below this are the egalitarian root.
pub const TIE_TOL: f64 = 1e-9;
/// Largest accepted fixed-point residual.
pub const ROOT_TOL: f64 = 1e-8;

const UNIFORM_POINTS: usize = 400;
const LOG_POINTS: usize = 40;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub k_elite: usize,
    /// Score (or in-degree) shared by the elite nodes.
    pub a: f64,
    pub b: f64,
}

fn direction(n: usize, k: usize) -> DVector<f64> {
    let (nf, kf) = (n as f64, k as f64);
    DVector::from_fn(n, |i, _| if i < k { (nf - kf) / nf } else { -kf / nf })
}

/// Largest gap worth scanning.
fn gap_limit(model: &LongMemoryModel, k: usize) -> Result<f64> {
    let (n, k) = (model.n as f64, k as f64);
    Ok(match model.kind {
        ScoreKind::RootDegree => model.m / k * (1.0 - 1e-9),
        ScoreKind::PageRank => n / k * 0.999,
        ScoreKind::SpringRank => {
            // Grow until the residual has turned negative for good.
            let mut t = 4.0;
            while t < 256.0 && gap_residual(model, k as usize, t)? > 0.0 {
                t *= 2.0;
            }
            t
        }
    })
}

fn gap_residual(model: &LongMemoryModel, k: usize, t: f64) -> Result<f64> {
    let x = model.egalitarian() + direction(model.n, k) * t;
    Ok(model.fixed_point_map(&x)?[0] - x[0])
}

fn scan_grid(t_max: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..LOG_POINTS)
        .map(|i| t_max * 10f64.powf(-9.0 + 7.0 * i as f64 / LOG_POINTS as f64))
        .collect();
    grid.extend((1..=UNIFORM_POINTS).map(|i| t_max * i as f64 / UNIFORM_POINTS as f64));
    grid
}

fn bisect(model: &LongMemoryModel, k: usize, mut lo: f64, mut hi: f64, mut g_lo: f64) -> Result<f64> {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = gap_residual(model, k, mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// All inegalitarian two-group roots with `k` elite nodes at the model's
/// current parameters, ordered by gap. Each is analysed and classified.
pub fn two_group_roots(model: &LongMemoryModel, k: usize) -> Result<Vec<Equilibrium>> {
    let n = model.n;
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("k_elite must lie in 1..{n}, got {k}")));
    }
    let t_max = gap_limit(model, k)?;
    let grid = scan_grid(t_max);
    let values = grid
        .iter()
        .map(|&t| gap_residual(model, k, t))
        .collect::<Result<Vec<_>>>()?;
    let x0 = model.egalitarian();
    let v = direction(n, k);
    let mut roots = Vec::new();
    for i in 1..grid.len() {
        let (g0, g1) = (values[i - 1], values[i]);
        if g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0) {
            continue;
        }
        let t = bisect(model, k, grid[i - 1], grid[i], g0)?;
        if t < TIE_TOL {
            continue;
        }
        let x = &x0 + &v * t;
        let mut eq = analyze_equilibrium(model, &x)?;
        if eq.residual > ROOT_TOL {
            log::debug!("discarding k={k} root at gap {t}: residual {}", eq.residual);
            continue;
        }
        eq.group = Some(GroupStructure { k_elite: k, a: x[0], b: x[n - 1] });
        roots.push(eq);
    }
    Ok(roots)
}

/// The egalitarian root, analysed.
pub fn egalitarian_equilibrium(model: &LongMemoryModel) -> Result<Equilibrium> {
    let x0 = model.egalitarian();
    let mut eq = analyze_equilibrium(model, &x0)?;
    eq.group = Some(GroupStructure { k_elite: 0, a: x0[0], b: x0[0] });
    Ok(eq)
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub beta1: f64,
    pub equilibrium: Equilibrium,
}

impl BranchPoint {
    fn gap(&self) -> f64 {
        self.equilibrium.group.map_or(0.0, |g| g.a - g.b)
    }
}

/// A continuous family of equilibria, ordered by `beta1`.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Zero for the egalitarian branch.
    pub k_elite: usize,
    pub points: Vec<BranchPoint>,
}

/// A grid point at which root finding failed for one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchGap {
    pub beta1: f64,
    pub k_elite: usize,
    pub message: String,
}

/// One row of the exported branch table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub beta1: f64,
    pub k_elite: usize,
    pub a: f64,
    pub b: f64,
    pub stable: bool,
    pub max_eig_real: f64,
}

#[derive(Debug, Clone)]
pub struct BifurcationDiagram {
    pub kind: ScoreKind,
    pub n: usize,
    pub m: f64,
    pub beta2: f64,
    pub critical_beta1: f64,
    pub branches: Vec<Branch>,
    pub gaps: Vec<BranchGap>,
}

impl BifurcationDiagram {
    /// Rows ordered by branch, then `beta1`.
    pub fn rows(&self) -> Vec<BranchRow> {
        self.branches
            .iter()
            .flat_map(|br| {
                br.points.iter().map(move |p| {
                    let g = p.equilibrium.group.expect("branch points carry their group structure");
                    BranchRow {
                        beta1: p.beta1,
                        k_elite: br.k_elite,
                        a: g.a,
                        b: g.b,
                        stable: p.equilibrium.stable(),
                        max_eig_real: p.equilibrium.max_real,
                    }
                })
            })
            .collect()
    }

    /// All equilibria found at `beta1` (matched to 1e-12).
    pub fn equilibria_at(&self, beta1: f64) -> Vec<&Equilibrium> {
        self.branches
            .iter()
            .flat_map(|b| b.points.iter())
            .filter(|p| (p.beta1 - beta1).abs() <= 1e-12 * beta1.abs().max(1.0))
            .map(|p| &p.equilibrium)
            .collect()
    }

    /// Stable equilibria at `beta1`.
    pub fn stable_at(&self, beta1: f64) -> Vec<&Equilibrium> {
        self.equilibria_at(beta1).into_iter().filter(|e| e.stable()).collect()
    }
}

/// Two-group roots with `k` elite nodes over a `beta1` grid, strung into
/// branches. Failures at individual grid points become gaps.
pub fn two_group_equilibria(
    model: &LongMemoryModel,
    k: usize,
    beta1_grid: &[f64],
) -> Result<(Vec<Branch>, Vec<BranchGap>)> {
    if k == 0 || k >= model.n {
        return Err(Error::Domain(format!("k_elite must lie in 1..{}, got {k}", model.n)));
    }
    let grid = sorted_grid(beta1_grid)?;
    let per_point: Vec<(f64, Result<Vec<Equilibrium>>)> = grid
        .par_iter()
        .map(|&b1| (b1, two_group_roots(&model.with_beta1(b1), k)))
        .collect();
    Ok(string_branches(k, per_point))
}

fn sorted_grid(beta1_grid: &[f64]) -> Result<Vec<f64>> {
    if beta1_grid.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("beta1 grid must be finite".into()));
    }
    let mut grid = beta1_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Greedy nearest-neighbour matching of roots at consecutive grid points.
fn string_branches(k: usize, per_point: Vec<(f64, Result<Vec<Equilibrium>>)>) -> (Vec<Branch>, Vec<BranchGap>) {
    let mut branches: Vec<Branch> = Vec::new();
    let mut gaps = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for (beta1, roots) in per_point {
        let roots = match roots {
            Ok(r) => r,
            Err(e) => {
                gaps.push(BranchGap { beta1, k_elite: k, message: e.to_string() });
                open.clear();
                continue;
            }
        };
        let points: Vec<BranchPoint> = roots.into_iter().map(|equilibrium| BranchPoint { beta1, equilibrium }).collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (oi, &bi) in open.iter().enumerate() {
            let last = branches[bi].points.last().expect("open branches are nonempty").gap();
            for (pi, p) in points.iter().enumerate() {
                pairs.push(((p.gap() - last).abs(), oi, pi));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut taken_open = vec![false; open.len()];
        let mut target: Vec<Option<usize>> = vec![None; points.len()];
        for (_, oi, pi) in pairs {
            if !taken_open[oi] && target[pi].is_none() {
                taken_open[oi] = true;
                target[pi] = Some(open[oi]);
            }
        }
        let mut next_open = Vec::with_capacity(points.len());
        for (p, t) in points.into_iter().zip(target) {
            let bi = match t {
                Some(bi) => bi,
                None => {
                    branches.push(Branch { k_elite: k, points: Vec::new() });
                    branches.len() - 1
                }
            };
            branches[bi].points.push(p);
            next_open.push(bi);
        }
        open = next_open;
    }
    (branches, gaps)
}

/// Egalitarian branch plus two-group branches for every `k` in `ks`
/// (default `1..n`), over a `beta1` grid.
pub fn bifurcation_diagram(
    model: &LongMemoryModel,
    beta1_grid: &[f64],
    ks: Option<&[usize]>,
) -> Result<BifurcationDiagram> {
    let grid = sorted_grid(beta1_grid)?;
    let ks: Vec<usize> = match ks {
        Some(ks) => ks.to_vec(),
        None => (1..model.n).collect(),
    };
    let egal = grid
        .par_iter()
        .map(|&b1| {
            Ok(BranchPoint {
                beta1: b1,
                equilibrium: egalitarian_equilibrium(&model.with_beta1(b1))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut branches = vec![Branch { k_elite: 0, points: egal }];
    let mut gaps = Vec::new();
    let per_k: Vec<Result<(Vec<Branch>, Vec<BranchGap>)>> =
        ks.par_iter().map(|&k| two_group_equilibria(model, k, &grid)).collect();
    for r in per_k {
        let (b, g) = r?;
        branches.extend(b);
        gaps.extend(g);
    }
    Ok(BifurcationDiagram {
        kind: model.kind,
        n: model.n,
        m: model.m,
        beta2: model.beta.get(1).copied().unwrap_or(0.0),
        critical_beta1: model.critical_beta1(),
        branches,
        gaps,
    })
}

/// Max-norm distance between the sorted entries of `gamma` and those of the
/// nearest stable equilibrium at `beta1`, or `None` if none is stable.
/// Sorting removes the arbitrary labelling of which nodes are elite.
pub fn nearest_stable_distance(diagram: &BifurcationDiagram, beta1: f64, gamma: &DVector<f64>) -> Option<f64> {
    let mut observed: Vec<f64> = gamma.iter().copied().collect();
    observed.sort_by(f64::total_cmp);
    diagram
        .stable_at(beta1)
        .into_iter()
        .map(|eq| {
            let mut g: Vec<f64> = eq.gamma.iter().copied().collect();
            g.sort_by(f64::total_cmp);
            g.iter().zip(&observed).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .min_by(f64::total_cmp)
}

/// Settings for the alternating PageRank equilibrium iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankIteration {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight on the new iterate; values below one damp oscillation.
    pub damping: f64,
}

impl Default for PageRankIteration {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000, damping: 0.5 }
    }
}

/// Finds a PageRank equilibrium by alternating between the rate matrix at
/// the current scores and the leading eigenvector of the resulting operator
/// (the PageRank of `m G(s)`), starting from `start`.
pub fn solve_pagerank_equilibrium(
    model: &LongMemoryModel,
    start: &DVector<f64>,
    opts: PageRankIteration,
) -> Result<Equilibrium> {
    if model.kind != ScoreKind::PageRank {
        return Err(Error::Domain(format!("expected a pagerank model, got {}", model.kind)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Domain(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let n = model.n as f64;
    let mut s = start * (n / start.sum());
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let next = model.fixed_point_map(&s)?;
        change = (&next - &s).amax();
        s = &s * (1.0 - opts.damping) + next * opts.damping;
        if change < opts.tol {
            let eq = analyze_equilibrium(model, &s)?;
            return Ok(eq);
        }
    }
    Err(Error::numeric(format!(
        "pagerank equilibrium iteration did not converge in {} iterations (last change {change:e})",
        opts.max_iter
    )))
}

impl Stability {
    pub fn is_stable(self) -> bool {
        self == Stability::Stable
    }
}
