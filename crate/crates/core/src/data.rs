//! Interaction data: the `period,source,target,count` interchange format and
//! converters from dataset-specific layouts.
//!
//! Every row is an endorsement `source -> target` (source endorses target).
//! Node and period labels are sorted numerically when all of them parse as
//! integers and lexicographically otherwise. Rows with `count = 0` are
//! accepted and only declare a node or period; the writer uses them so that
//! isolated nodes and empty periods survive a round trip. Consecutive
//! periods are consecutive model steps; gaps are not imputed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InteractionSequence;

pub const EDGE_HEADER: [&str; 4] = ["period", "source", "target", "count"];
pub const RANKING_HEADER: [&str; 4] = ["period", "ranker", "ranked", "rank"];
pub const PLACEMENT_HEADER: [&str; 3] = ["period", "degree", "hiring"];
pub const CONTEST_HEADER: [&str; 3] = ["period", "winner", "loser"];

/// Default number of top-ranked peers that count as endorsed.
pub const DEFAULT_TOP_K: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub period: String,
    pub source: String,
    pub target: String,
    pub count: u32,
}

/// True for labels made only of `[A-Za-z0-9_.-]`.
pub fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// Sorts labels numerically if every one parses as an integer, otherwise
/// lexicographically.
pub fn sort_labels(labels: &mut [String]) {
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().expect("checked above"));
    } else {
        labels.sort();
    }
}

fn unique_sorted<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = labels.collect();
    let mut out: Vec<String> = set.into_iter().map(String::from).collect();
    sort_labels(&mut out);
    out
}

/// Opens a CSV reader and checks that the header names exactly `expected`,
/// in any order. Returns the column index of each expected name.
fn open_csv<R: Read>(reader: R, expected: &[&str]) -> Result<(csv::Reader<R>, Vec<usize>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    for name in header.iter() {
        if !expected.contains(&name) {
            return Err(Error::Format {
                line: 1,
                message: format!("unknown column '{name}'; expected {}", expected.join(",")),
            });
        }
    }
    let idx = expected
        .iter()
        .map(|name| {
            header.iter().position(|h| h == *name).ok_or_else(|| Error::Format {
                line: 1,
                message: format!("missing column '{name}'"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rdr, idx))
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Format {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads rows of a CSV with the given header, yielding `(line, fields)`.
fn read_rows<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let (mut rdr, idx) = open_csv(reader, expected)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect();
        for (name, value) in expected.iter().zip(&fields) {
            if *name != "count" && *name != "rank" && !valid_label(value) {
                return Err(Error::Format {
                    line,
                    message: format!("invalid {name} label '{value}'"),
                });
            }
        }
        rows.push((line, fields));
    }
    Ok(rows)
}

fn parse_count(value: &str, line: u64, what: &str) -> Result<i64> {
    value.parse::<i64>().map_err(|_| Error::Format {
        line,
        message: format!("{what} '{value}' is not an integer"),
    })
}

/// Parses interchange-format rows.
pub fn read_edge_records<R: Read>(reader: R) -> Result<Vec<EdgeRecord>> {
    read_rows(reader, &EDGE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let count = parse_count(&f[3], line, "count")?;
            if count < 0 {
                return Err(Error::Domain(format!("line {line}: count {count} is negative")));
            }
            let count = u32::try_from(count)
                .map_err(|_| Error::Domain(format!("line {line}: count {count} is too large")))?;
            let mut f = f.into_iter();
            Ok(EdgeRecord {
                period: f.next().expect("4 fields"),
                source: f.next().expect("4 fields"),
                target: f.next().expect("4 fields"),
                count,
            })
        })
        .collect()
}

/// Builds a sequence from records: sorted node and period indices, one
/// update matrix per period with duplicate rows summed.
pub fn sequence_from_records(records: &[EdgeRecord]) -> Result<InteractionSequence> {
    if records.iter().all(|r| r.count == 0) {
        return Err(Error::Domain("no interactions".into()));
    }
    let nodes = unique_sorted(records.iter().flat_map(|r| [r.source.as_str(), r.target.as_str()]));
    let periods = unique_sorted(records.iter().map(|r| r.period.as_str()));
    let node_ix: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let period_ix: HashMap<&str, usize> = periods.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n = nodes.len();
    let mut deltas = vec![DMatrix::<u32>::zeros(n, n); periods.len()];
    for r in records {
        let d = &mut deltas[period_ix[r.period.as_str()]];
        let cell = &mut d[(node_ix[r.source.as_str()], node_ix[r.target.as_str()])];
        *cell = cell
            .checked_add(r.count)
            .ok_or_else(|| Error::Domain(format!("count overflow in period {}", r.period)))?;
    }
    InteractionSequence::new(deltas, nodes, periods)
}

pub fn read_edge_list<R: Read>(reader: R) -> Result<InteractionSequence> {
    let seq = sequence_from_records(&read_edge_records(reader)?)?;
    log::info!(
        "loaded {} nodes, {} periods, mean {:.3} interactions per period",
        seq.n(),
        seq.len(),
        seq.mean_count()
    );
    Ok(seq)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<InteractionSequence> {
    read_edge_list(std::fs::File::open(path)?)
}

/// Interchange rows for a sequence, periods in order and cells in row-major
/// order. Empty periods and isolated nodes are declared with zero counts.
pub fn edge_records(seq: &InteractionSequence) -> Vec<EdgeRecord> {
    let n = seq.n();
    let mut out = Vec::new();
    let mut seen = vec![false; n];
    for (d, period) in seq.deltas.iter().zip(&seq.period_labels) {
        let start = out.len();
        for i in 0..n {
            for j in 0..n {
                if d[(i, j)] > 0 {
                    seen[i] = true;
                    seen[j] = true;
                    out.push(EdgeRecord {
                        period: period.clone(),
                        source: seq.node_labels[i].clone(),
                        target: seq.node_labels[j].clone(),
                        count: d[(i, j)],
                    });
                }
            }
        }
        if out.len() == start {
            let l = &seq.node_labels[0];
            seen[0] = true;
            out.push(EdgeRecord { period: period.clone(), source: l.clone(), target: l.clone(), count: 0 });
        }
    }
    if let Some(first) = seq.period_labels.first() {
        for (i, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
            let l = &seq.node_labels[i];
            out.push(EdgeRecord { period: first.clone(), source: l.clone(), target: l.clone(), count: 0 });
        }
    }
    out
}

pub fn write_edge_list<W: Write>(seq: &InteractionSequence, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(EDGE_HEADER).map_err(|e| csv_error(e, 0))?;
    for r in edge_records(seq) {
        w.write_record([r.period.as_str(), &r.source, &r.target, &r.count.to_string()])
            .map_err(|e| csv_error(e, 0))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_edge_list(seq: &InteractionSequence, path: impl AsRef<Path>) -> Result<()> {
    write_edge_list(seq, std::fs::File::create(path)?)
}

/// Aggregates a warm-start edge list (all periods summed) onto the node
/// index of `seq`. Endorsements touching unknown nodes are ignored.
pub fn read_warm_start<R: Read>(reader: R, seq: &InteractionSequence) -> Result<DMatrix<f64>> {
    let records = read_edge_records(reader)?;
    let ix: HashMap<&str, usize> = seq.node_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n = seq.n();
    let mut a = DMatrix::zeros(n, n);
    let mut dropped = 0u64;
    for r in &records {
        match (ix.get(r.source.as_str()), ix.get(r.target.as_str())) {
            (Some(&i), Some(&j)) => a[(i, j)] += r.count as f64,
            _ => dropped += r.count as u64,
        }
    }
    if dropped > 0 {
        log::warn!("warm start: ignored {dropped} endorsements touching unknown nodes");
    }
    Ok(a)
}

pub fn load_warm_start(path: impl AsRef<Path>, seq: &InteractionSequence) -> Result<DMatrix<f64>> {
    read_warm_start(std::fs::File::open(path)?, seq)
}

/// One period of full preference rankings: `ranks[i][j]` is the position
/// (1 = most preferred) at which `labels[i]` places `labels[j]`; the
/// diagonal is ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingWeek {
    pub period: String,
    pub labels: Vec<String>,
    pub ranks: Vec<Vec<u32>>,
}

/// Endorsement `i -> j` whenever `i` ranks `j` within its top `k`.
pub fn convert_rankings_topk(weeks: &[RankingWeek], k: u32) -> Result<InteractionSequence> {
    let mut records = Vec::new();
    for w in weeks {
        let n = w.labels.len();
        if w.ranks.len() != n {
            return Err(Error::shape(format!("{n} ranking rows in week {}", w.period), w.ranks.len()));
        }
        for (i, row) in w.ranks.iter().enumerate() {
            let mut seen: Vec<u32> = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &r)| r).collect();
            seen.sort_unstable();
            if row.len() != n || seen != (1..n as u32).collect::<Vec<_>>() {
                return Err(Error::Domain(format!(
                    "incomplete ranking by {} in week {}",
                    w.labels[i], w.period
                )));
            }
            for (j, &r) in row.iter().enumerate() {
                if j != i && r <= k {
                    records.push(EdgeRecord {
                        period: w.period.clone(),
                        source: w.labels[i].clone(),
                        target: w.labels[j].clone(),
                        count: 1,
                    });
                }
            }
        }
    }
    sequence_from_records(&records)
}

/// Reads `period,ranker,ranked,rank` rows into weekly ranking matrices.
pub fn read_rankings<R: Read>(reader: R) -> Result<Vec<RankingWeek>> {
    let mut by_week: BTreeMap<String, BTreeMap<(String, String), u32>> = BTreeMap::new();
    for (line, f) in read_rows(reader, &RANKING_HEADER)? {
        let rank = parse_count(&f[3], line, "rank")?;
        let rank = u32::try_from(rank)
            .ok()
            .filter(|r| *r >= 1)
            .ok_or_else(|| Error::Domain(format!("line {line}: rank {rank} must be positive")))?;
        by_week.entry(f[0].clone()).or_default().insert((f[1].clone(), f[2].clone()), rank);
    }
    let mut periods: Vec<String> = by_week.keys().cloned().collect();
    sort_labels(&mut periods);
    periods
        .into_iter()
        .map(|period| {
            let cells = &by_week[&period];
            let labels = unique_sorted(cells.keys().flat_map(|(a, b)| [a.as_str(), b.as_str()]));
            let ranks = labels
                .iter()
                .map(|i| {
                    labels
                        .iter()
                        .map(|j| cells.get(&(i.clone(), j.clone())).copied().unwrap_or(0))
                        .collect()
                })
                .collect();
            Ok(RankingWeek { period, labels, ranks })
        })
        .collect()
}

/// A graduate of `degree` taking a position at `hiring`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementEvent {
    pub period: String,
    pub degree: String,
    pub hiring: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementDirection {
    /// The hiring institution endorses the degree-granting one.
    #[default]
    HiringToDegree,
    DegreeToHiring,
}

impl std::str::FromStr for PlacementDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hiring_to_degree" => Ok(PlacementDirection::HiringToDegree),
            "degree_to_hiring" => Ok(PlacementDirection::DegreeToHiring),
            other => Err(Error::Config(format!(
                "unknown direction '{other}' (hiring_to_degree|degree_to_hiring)"
            ))),
        }
    }
}

impl std::fmt::Display for PlacementDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlacementDirection::HiringToDegree => "hiring_to_degree",
            PlacementDirection::DegreeToHiring => "degree_to_hiring",
        })
    }
}

pub fn convert_placements(events: &[PlacementEvent], direction: PlacementDirection) -> Result<InteractionSequence> {
    let records: Vec<EdgeRecord> = events
        .iter()
        .map(|e| {
            let (source, target) = match direction {
                PlacementDirection::HiringToDegree => (&e.hiring, &e.degree),
                PlacementDirection::DegreeToHiring => (&e.degree, &e.hiring),
            };
            EdgeRecord { period: e.period.clone(), source: source.clone(), target: target.clone(), count: 1 }
        })
        .collect();
    sequence_from_records(&records)
}

pub fn read_placements<R: Read>(reader: R) -> Result<Vec<PlacementEvent>> {
    Ok(read_rows(reader, &PLACEMENT_HEADER)?
        .into_iter()
        .map(|(_, mut f)| PlacementEvent {
            hiring: f.pop().expect("3 fields"),
            degree: f.pop().expect("3 fields"),
            period: f.pop().expect("3 fields"),
        })
        .collect())
}

/// A dominance contest; the loser endorses the winner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contest {
    pub period: String,
    pub winner: String,
    pub loser: String,
}

pub fn convert_contests(contests: &[Contest]) -> Result<InteractionSequence> {
    let records: Vec<EdgeRecord> = contests
        .iter()
        .map(|c| EdgeRecord {
            period: c.period.clone(),
            source: c.loser.clone(),
            target: c.winner.clone(),
            count: 1,
        })
        .collect();
    sequence_from_records(&records)
}

pub fn read_contests<R: Read>(reader: R) -> Result<Vec<Contest>> {
    Ok(read_rows(reader, &CONTEST_HEADER)?
        .into_iter()
        .map(|(_, mut f)| Contest {
            loser: f.pop().expect("3 fields"),
            winner: f.pop().expect("3 fields"),
            period: f.pop().expect("3 fields"),
        })
        .collect())
}

/// Period indices from `start` to `end` (labels, inclusive).
pub fn period_window(seq: &InteractionSequence, start: &str, end: &str) -> Result<RangeInclusive<usize>> {
    let find = |l: &str| {
        seq.period_labels
            .iter()
            .position(|p| p == l)
            .ok_or_else(|| Error::Domain(format!("period '{l}' not in sequence")))
    };
    let (a, b) = (find(start)?, find(end)?);
    if a > b {
        return Err(Error::Domain(format!("window start '{start}' is after end '{end}'")));
    }
    Ok(a..=b)
}

/// Keeps the `count` nodes that received the most endorsements within
/// `window` (all periods if `None`), ties broken by label order. All periods
/// are kept; edges touching dropped nodes are removed.
pub fn restrict_top_placers(
    seq: &InteractionSequence,
    count: usize,
    window: Option<RangeInclusive<usize>>,
) -> Result<InteractionSequence> {
    let n = seq.n();
    if count > n {
        return Err(Error::Domain(format!("cannot keep {count} of {n} nodes")));
    }
    let window = window.unwrap_or(0..=seq.len().saturating_sub(1));
    if *window.end() >= seq.len() {
        return Err(Error::Domain(format!("window ends at period {} of {}", window.end(), seq.len())));
    }
    let mut received = vec![0u64; n];
    for d in &seq.deltas[window] {
        for (r, col) in received.iter_mut().zip(d.column_iter()) {
            *r += col.iter().map(|&k| k as u64).sum::<u64>();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Node indices already follow label order, so index breaks ties.
    order.sort_by(|&a, &b| match received[b].cmp(&received[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let mut keep: Vec<usize> = order[..count].to_vec();
    keep.sort_unstable();
    let sub = |m: &DMatrix<u32>| DMatrix::from_fn(count, count, |i, j| m[(keep[i], keep[j])]);
    let mut out = InteractionSequence::new(
        seq.deltas.iter().map(sub).collect(),
        keep.iter().map(|&i| seq.node_labels[i].clone()).collect(),
        seq.period_labels.clone(),
    )?;
    out.period_unit = seq.period_unit.clone();
    out.a0 = seq
        .a0
        .as_ref()
        .map(|a| DMatrix::from_fn(count, count, |i, j| a[(keep[i], keep[j])]));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn load(s: &str) -> Result<InteractionSequence> {
        read_edge_list(s.as_bytes())
    }

    #[test]
    fn tabulates_rows() {
        let seq = load("period,source,target,count\n1,a,b,1\n2,b,a,2\n").unwrap();
        assert_eq!(seq.node_labels, vec!["a", "b"]);
        assert_eq!(seq.deltas, vec![dmatrix![0u32, 1; 0, 0], dmatrix![0u32, 0; 2, 0]]);
        assert_eq!(seq.totals(), vec![1, 2]);
        assert_eq!(seq.mean_count(), 1.5);
    }

    #[test]
    fn sums_duplicates_and_sorts_numerically() {
        let seq = load("period,source,target,count\n10,a,b,1\n9,a,b,2\n10,a,b,3\n").unwrap();
        assert_eq!(seq.period_labels, vec!["9", "10"]);
        assert_eq!(seq.deltas[1][(0, 1)], 4);
    }

    #[test]
    fn column_order_is_free() {
        let seq = load("source,target,count,period\na,b,1,1\n").unwrap();
        assert_eq!(seq.deltas[0][(0, 1)], 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(load("period,source,target,count\n"), Err(Error::Domain(m)) if m == "no interactions"));
        assert!(matches!(load("period,source,target,weight\n1,a,b,1\n"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(load("period,source,target,count\n1,a,b,1\n1,a,b,-2\n"), Err(Error::Domain(m)) if m.contains("line 3")));
        assert!(matches!(load("period,source,target,count\n1,a,b,x\n"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load("period,source,target,count\n1,a b,c,1\n"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(load("period,source,target,count\n1,a,b\n"), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn topk_rankings() {
        // Three members; k = 1 keeps only each member's favourite.
        let week = RankingWeek {
            period: "1".into(),
            labels: vec!["x".into(), "y".into(), "z".into()],
            ranks: vec![vec![0, 2, 1], vec![1, 0, 2], vec![2, 1, 0]],
        };
        let seq = convert_rankings_topk(std::slice::from_ref(&week), 1).unwrap();
        assert_eq!(seq.deltas[0], dmatrix![0u32, 0, 1; 1, 0, 0; 0, 1, 0]);
        let mut bad = week.clone();
        bad.ranks[1] = vec![1, 0, 1];
        let err = convert_rankings_topk(&[bad], 1).unwrap_err().to_string();
        assert!(err.contains("by y") && err.contains("week 1"), "{err}");
    }

    #[test]
    fn topk_boundary_and_totals() {
        let n = 17;
        let labels: Vec<String> = (0..n).map(|i| format!("b{i:02}")).collect();
        let ranks: Vec<Vec<u32>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0 } else { ((j + n - i) % n) as u32 }).collect())
            .collect();
        let week = RankingWeek { period: "1".into(), labels, ranks };
        let seq = convert_rankings_topk(&[week], DEFAULT_TOP_K).unwrap();
        assert_eq!(seq.totals(), vec![85]);
        // Member 0 ranks member 3 third and member 6 sixth.
        assert_eq!(seq.deltas[0][(0, 3)], 1);
        assert_eq!(seq.deltas[0][(0, 6)], 0);
    }

    #[test]
    fn ranking_csv() {
        let csv = "period,ranker,ranked,rank\n1,x,y,1\n1,x,z,2\n1,y,x,2\n1,y,z,1\n1,z,x,1\n1,z,y,2\n";
        let weeks = read_rankings(csv.as_bytes()).unwrap();
        let seq = convert_rankings_topk(&weeks, 1).unwrap();
        assert_eq!(seq.deltas[0], dmatrix![0u32, 1, 0; 0, 0, 1; 1, 0, 0]);
        let missing = "period,ranker,ranked,rank\n1,x,y,1\n1,x,z,2\n1,y,x,2\n1,z,x,1\n1,z,y,2\n";
        let err = convert_rankings_topk(&read_rankings(missing.as_bytes()).unwrap(), 1).unwrap_err();
        assert!(err.to_string().contains("by y"));
    }

    #[test]
    fn placements_and_contests() {
        let ev = vec![PlacementEvent { period: "1990".into(), degree: "mit".into(), hiring: "uw".into() }];
        let seq = convert_placements(&ev, PlacementDirection::default()).unwrap();
        assert_eq!(seq.node_labels, vec!["mit", "uw"]);
        assert_eq!(seq.deltas[0], dmatrix![0u32, 0; 1, 0]);
        let seq = convert_placements(&ev, PlacementDirection::DegreeToHiring).unwrap();
        assert_eq!(seq.deltas[0], dmatrix![0u32, 1; 0, 0]);
        let c = read_contests("period,winner,loser\n1,p1,p2\n".as_bytes()).unwrap();
        let seq = convert_contests(&c).unwrap();
        assert_eq!(seq.deltas[0], dmatrix![0u32, 0; 1, 0]);
        let p = read_placements("period,degree,hiring\n1990,mit,uw\n".as_bytes()).unwrap();
        assert_eq!(p, ev);
    }

    #[test]
    fn restriction() {
        let csv = "period,source,target,count\n1,a,b,3\n1,c,d,3\n1,a,c,1\n2,b,a,1\n2,a,e,9\n";
        let seq = load(csv).unwrap();
        assert_eq!(restrict_top_placers(&seq, 5, None).unwrap(), seq);
        assert!(restrict_top_placers(&seq, 6, None).is_err());
        // Window = period 1 only: b and d received 3, c received 1.
        let w = period_window(&seq, "1", "1").unwrap();
        let top = restrict_top_placers(&seq, 2, Some(w)).unwrap();
        assert_eq!(top.node_labels, vec!["b", "d"]);
        // Overall e leads; b and d tie behind it and the earlier label wins.
        let all = restrict_top_placers(&seq, 2, None).unwrap();
        assert_eq!(all.node_labels, vec!["b", "e"]);
        assert_eq!(all.deltas[1], DMatrix::<u32>::zeros(2, 2));
    }

    #[test]
    fn warm_start_ignores_unknown_nodes() {
        let seq = load("period,source,target,count\n1,a,b,1\n").unwrap();
        let a = read_warm_start("period,source,target,count\n0,a,b,2\n-1,b,a,1\n0,a,q,5\n".as_bytes(), &seq).unwrap();
        assert_eq!(a, dmatrix![0.0, 2.0; 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn round_trip(n in 1usize..6, t in 1usize..5, cells in prop::collection::vec(0u32..4, 150), alpha in any::<bool>()) {
            let mut k = 0;
            let deltas: Vec<DMatrix<u32>> = (0..t)
                .map(|_| DMatrix::from_fn(n, n, |_, _| { k += 1; cells[k % cells.len()] }))
                .collect();
            prop_assume!(deltas.iter().any(|d| d.iter().any(|&c| c > 0)));
            let nodes: Vec<String> = (0..n).map(|i| if alpha { format!("n{i}") } else { (i * 7).to_string() }).collect();
            let periods: Vec<String> = (0..t).map(|p| (1990 + 5 * p).to_string()).collect();
            let seq = InteractionSequence::new(deltas, nodes, periods).unwrap();
            let mut buf = Vec::new();
            write_edge_list(&seq, &mut buf).unwrap();
            let back = read_edge_list(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &seq);
            let mut again = Vec::new();
            write_edge_list(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
