//! The subcommands. Each reads its keys from [`Settings`], writes its
//! artifacts into the output directory and finishes with `run.json`.

use std::path::{Path, PathBuf};

use endorse_core::data::{
    self, convert_contests, convert_placements, convert_rankings_topk, period_window, read_contests,
    read_placements, read_rankings, restrict_top_placers, PlacementDirection, DEFAULT_TOP_K,
};
use endorse_core::inference::{
    compare_scores, criticality_against, fit, CriticalityReport, FitOptions, FitResult, FitRow, InteractionSequence,
    LikelihoodOptions,
};
use endorse_core::model::InitKind;
use endorse_core::sim::{run, sweep_variance, RecordOptions};
use endorse_core::stability::{bifurcation_diagram, critical_beta1, nearest_stable_distance, LongMemoryModel};
use endorse_core::{Error, ModelParams, Result, ScoreKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{opt, prepare_dir, write_csv, write_json, write_matrix_csv, write_run_json};
use crate::settings::{parse_grid, Settings};

const DEFAULT_ALPHA_P: f64 = 0.85;
const DEFAULT_ALPHA_S: f64 = 1e-8;

fn out_dir(s: &Settings) -> Result<PathBuf> {
    prepare_dir(&s.require::<PathBuf>("out")?)
}

/// Model parameters shared by `simulate`, `sweep` and the bifurcation overlay.
fn model_params(s: &Settings, beta1: f64, beta2: f64) -> Result<ModelParams> {
    let mut p = ModelParams::new(
        s.require::<ScoreKind>("score")?,
        s.require("lambda")?,
        beta1,
        beta2,
        s.or("m", 1u32)?,
    )
    .with_seed(s.or("seed", 0u64)?);
    p.alpha_p = s.or("alpha-p", DEFAULT_ALPHA_P)?;
    p.alpha_s = s.or("alpha-s", DEFAULT_ALPHA_S)?;
    p.mask_diagonal = s.or("mask-diagonal", false)?;
    p.validate()?;
    Ok(p)
}

fn node_count(s: &Settings) -> Result<usize> {
    let n: usize = s.require("n")?;
    if n < 2 {
        return Err(Error::Config(format!("'n' must be at least 2, got {n}")));
    }
    Ok(n)
}

fn window(s: &Settings, steps: usize) -> Result<usize> {
    let w = s.or("window", steps.min(500))?;
    if w == 0 || w > steps {
        return Err(Error::Config(format!("'window' must lie in 1..={steps}, got {w}")));
    }
    Ok(w)
}

pub fn simulate(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let n = node_count(s)?;
    let steps: usize = s.require("steps")?;
    let params = model_params(s, s.require("beta1")?, s.or("beta2", 0.0)?)?;
    let init: InitKind = s.or("init", InitKind::Uniform)?;
    let a0 = init.state(n, params.m, params.seed)?.into_adjacency();
    let traj = run(&params, &a0, steps, RecordOptions { scores: s.or("record-scores", false)? })?;

    write_csv(
        &out.join("trajectory.csv"),
        &["t", "node", "gamma"],
        traj.gamma.iter().enumerate().flat_map(|(t, g)| {
            g.iter()
                .enumerate()
                .map(move |(j, v)| vec![t.to_string(), j.to_string(), v.to_string()])
        }),
    )?;
    write_matrix_csv(&out.join("final_adjacency.csv"), &traj.a_final)?;
    write_json(&out.join("trajectory.json"), &traj)?;
    if traj.steps() > 0 {
        let w = window(s, traj.steps())?;
        let mean = traj.mean_gamma(w)?;
        log::info!(
            "mean gamma over final {w} steps: max {:.4}, rank variance {:.6}",
            mean.max(),
            endorse_core::sim::rank_variance(&traj, w)?
        );
    }
    write_run_json(&out, "simulate", s.resolved(), Some(&params))
}

pub fn sweep(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let n = node_count(s)?;
    let steps: usize = s.require("steps")?;
    let g1 = parse_grid("grid-beta1", &s.require::<String>("grid-beta1")?)?;
    let g2 = parse_grid("grid-beta2", &s.or("grid-beta2", "0:0:1".to_string())?)?;
    let w = window(s, steps)?;
    let params = model_params(s, g1[0], g2[0])?;
    let init: InitKind = s.or("init", InitKind::Uniform)?;
    let a0 = init.state(n, params.m, params.seed)?.into_adjacency();
    let points = sweep_variance(&params, &a0, &g1, &g2, steps, w)?;
    write_csv(
        &out.join("variance.csv"),
        &["beta1", "beta2", "variance"],
        points
            .iter()
            .map(|p| vec![p.beta1.to_string(), p.beta2.to_string(), p.variance.to_string()]),
    )?;
    write_run_json(&out, "sweep", s.resolved(), Some(&params))
}

fn parse_ks(spec: &str, n: usize) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| (1..n).contains(&k))
                .ok_or_else(|| Error::Config(format!("invalid k '{t}': must lie in 1..{n}")))
        })
        .collect()
}

/// `(beta1, mean gamma, distance to the nearest stable equilibrium)`.
type OverlayPoint = (f64, Vec<f64>, Option<f64>);

pub fn bifurcate(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let kind: ScoreKind = s.require("score")?;
    let grid = parse_grid("grid-beta1", &s.require::<String>("grid-beta1")?)?;
    let n: usize = s.or("n", 8)?;
    let m: u32 = s.or("m", 1)?;
    let beta2: f64 = s.or("beta2", 0.0)?;
    let ks = match s.get::<String>("k")? {
        Some(spec) => Some(parse_ks(&spec, n)?),
        None => None,
    };
    let model = LongMemoryModel::new(kind, n, m as f64, grid[0], beta2)?
        .alphas(s.or("alpha-p", DEFAULT_ALPHA_P)?, s.or("alpha-s", DEFAULT_ALPHA_S)?)?;
    let diagram = bifurcation_diagram(&model, &grid, ks.as_deref())?;
    log::info!("critical beta1 = {}", diagram.critical_beta1);

    write_csv(
        &out.join("branches.csv"),
        &["beta1", "k_elite", "a", "b", "stable", "max_eig_real"],
        diagram.rows().iter().map(|r| {
            vec![
                r.beta1.to_string(),
                r.k_elite.to_string(),
                r.a.to_string(),
                r.b.to_string(),
                r.stable.to_string(),
                r.max_eig_real.to_string(),
            ]
        }),
    )?;
    for g in &diagram.gaps {
        log::warn!("no k={} roots at beta1 {}: {}", g.k_elite, g.beta1, g.message);
    }
    write_csv(
        &out.join("gaps.csv"),
        &["beta1", "k_elite", "message"],
        diagram
            .gaps
            .iter()
            .map(|g| vec![g.beta1.to_string(), g.k_elite.to_string(), g.message.clone()]),
    )?;

    if s.or("overlay", false)? {
        let steps: usize = s.or("steps", 50_000)?;
        let w = window(s, steps)?;
        let mut params = ModelParams::new(kind, s.or("lambda", 0.9995)?, grid[0], beta2, m).with_seed(s.or("seed", 0)?);
        params.alpha_p = model.alpha_p;
        params.alpha_s = model.alpha_s;
        params.validate()?;
        let a0 = s
            .or("init", InitKind::Uniform)?
            .state(n, m, params.seed)?
            .into_adjacency();
        let mut grid = grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let sims: Vec<Result<OverlayPoint>> = grid
            .par_iter()
            .map(|&b1| {
                let mut p = params.clone();
                p.beta[0] = b1;
                let gamma = run(&p, &a0, steps, RecordOptions::default())?.mean_gamma(w)?;
                let dist = nearest_stable_distance(&diagram, b1, &gamma);
                Ok((b1, gamma.iter().copied().collect(), dist))
            })
            .collect();
        let sims = sims.into_iter().collect::<Result<Vec<_>>>()?;
        write_csv(
            &out.join("overlay.csv"),
            &["beta1", "node", "gamma", "nearest_stable_distance"],
            sims.iter().flat_map(|(b1, g, d)| {
                g.iter()
                    .enumerate()
                    .map(move |(j, v)| vec![b1.to_string(), j.to_string(), v.to_string(), opt(*d)])
            }),
        )?;
    }
    write_run_json::<()>(&out, "bifurcate", s.resolved(), None)
}

fn load_sequence(s: &Settings) -> Result<(InteractionSequence, String)> {
    let path: PathBuf = s.require("data")?;
    let mut seq = data::load_edge_list(&path)?;
    if let Some(warm) = s.get::<PathBuf>("warm-start")? {
        let a0 = data::load_warm_start(&warm, &seq)?;
        seq = seq.with_a0(a0)?;
    }
    let default_name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |x| x.to_string_lossy().into_owned());
    let name = s.or("dataset", default_name)?;
    Ok((seq, name))
}

fn fit_options(s: &Settings) -> Result<FitOptions> {
    let restarts: usize = s.or("restarts", 5)?;
    if restarts == 0 {
        return Err(Error::Config("'restarts' must be positive".into()));
    }
    Ok(FitOptions {
        likelihood: LikelihoodOptions {
            alpha_p: s.or("alpha-p", DEFAULT_ALPHA_P)?,
            alpha_s: s.or("alpha-s", DEFAULT_ALPHA_S)?,
            mask_diagonal: s.or("mask-diagonal", false)?,
            ..LikelihoodOptions::default()
        },
        ..FitOptions::default()
    }
    .with_restart_count(restarts))
}

const FIT_HEADER: [&str; 9] = [
    "dataset", "score", "lambda", "se_lambda", "beta1", "se_beta1", "beta2", "se_beta2", "loglik",
];

fn fit_row(r: &FitRow) -> Vec<String> {
    vec![
        r.dataset.clone(),
        r.score.to_string(),
        r.lambda.to_string(),
        opt(r.se_lambda),
        r.beta1.to_string(),
        opt(r.se_beta1),
        opt(r.beta2),
        opt(r.se_beta2),
        r.loglik.to_string(),
    ]
}

fn write_criticality(path: &Path, dataset: &str, reports: &[CriticalityReport]) -> Result<()> {
    write_csv(
        path,
        &["dataset", "score", "n", "m_bar", "beta1", "se_beta1", "critical_beta1", "side", "significant", "label"],
        reports.iter().map(|r| {
            vec![
                dataset.to_string(),
                r.score_kind.to_string(),
                r.n.to_string(),
                r.m_bar.to_string(),
                r.beta1.to_string(),
                opt(r.se_beta1),
                r.critical_beta1.to_string(),
                serde_json::to_value(r.side).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                r.significant.to_string(),
                r.label().to_string(),
            ]
        }),
    )
}

fn report(fit: &FitResult, seq: &InteractionSequence, s: &Settings) -> Result<CriticalityReport> {
    let (n, m_bar) = (seq.n(), seq.mean_count());
    let critical = critical_beta1(
        fit.score_kind,
        n,
        m_bar,
        s.or("alpha-p", DEFAULT_ALPHA_P)?,
        s.or("alpha-s", DEFAULT_ALPHA_S)?,
    );
    Ok(criticality_against(fit, n, m_bar, critical))
}

pub fn fit_cmd(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let kind: ScoreKind = s.require("score")?;
    let (seq, name) = load_sequence(s)?;
    let opts = fit_options(s)?;
    let result = fit(&seq, kind, &opts)?;
    write_json(&out.join("fit.json"), &result)?;
    write_csv(&out.join("fit_table.csv"), &FIT_HEADER, [fit_row(&FitRow::new(&name, &result))])?;
    write_criticality(&out.join("criticality.csv"), &name, &[report(&result, &seq, s)?])?;
    write_run_json::<()>(&out, "fit", s.resolved(), None)
}

#[derive(Serialize)]
struct ComparisonFile<'a> {
    dataset: &'a str,
    best: Option<ScoreKind>,
    entries: &'a [endorse_core::inference::ComparisonEntry],
}

pub fn compare(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let kinds = s
        .or("scores", "rootdegree,pagerank,springrank".to_string())?
        .split(',')
        .map(|k| k.trim().parse::<ScoreKind>())
        .collect::<Result<Vec<_>>>()?;
    let (seq, name) = load_sequence(s)?;
    let opts = fit_options(s)?;
    let cmp = compare_scores(&seq, &kinds, &opts)?;
    write_json(
        &out.join("comparison.json"),
        &ComparisonFile { dataset: &name, best: cmp.best(), entries: &cmp.entries },
    )?;
    write_csv(&out.join("fit_table.csv"), &FIT_HEADER, cmp.rows(&name).iter().map(fit_row))?;
    let reports = cmp
        .entries
        .iter()
        .filter_map(|e| e.fit.as_ref())
        .map(|f| report(f, &seq, s))
        .collect::<Result<Vec<_>>>()?;
    write_criticality(&out.join("criticality.csv"), &name, &reports)?;
    write_run_json::<()>(&out, "compare", s.resolved(), None)?;
    for e in cmp.entries.iter().filter(|e| e.error.is_some()) {
        log::warn!("{} fit failed: {}", e.score_kind, e.error.as_deref().unwrap_or(""));
    }
    match cmp.best() {
        Some(best) => {
            log::info!("best score function: {best}");
            Ok(())
        }
        None => Err(Error::Fit("every score function failed to fit".into())),
    }
}

pub fn convert(s: &Settings) -> Result<()> {
    let out = out_dir(s)?;
    let from: String = s.require("from")?;
    let input: PathBuf = s.require("input")?;
    let file = std::fs::File::open(&input)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot open {}: {e}", input.display()))))?;
    let mut seq = match from.as_str() {
        "edges" => data::read_edge_list(file)?,
        "rankings" => convert_rankings_topk(&read_rankings(file)?, s.or("top-k", DEFAULT_TOP_K)?)?,
        "placements" => convert_placements(
            &read_placements(file)?,
            s.or("direction", PlacementDirection::default())?,
        )?,
        "contests" => convert_contests(&read_contests(file)?)?,
        other => {
            return Err(Error::Config(format!(
                "unknown input kind '{other}' (edges|rankings|placements|contests)"
            )))
        }
    };
    if let Some(count) = s.get::<usize>("restrict")? {
        let window = match s.get::<String>("period-window")? {
            Some(w) => {
                let (a, b) = w
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("invalid period-window '{w}': expected START:END")))?;
                Some(period_window(&seq, a.trim(), b.trim())?)
            }
            None => None,
        };
        seq = restrict_top_placers(&seq, count, window)?;
    }
    data::save_edge_list(&seq, out.join("edges.csv"))?;
    log::info!("{} nodes, {} periods, mean {:.2} endorsements per period", seq.n(), seq.len(), seq.mean_count());
    write_run_json::<()>(&out, "convert", s.resolved(), None)
}
