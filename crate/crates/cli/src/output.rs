//! Writers for the plot-ready CSV and JSON artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use endorse_core::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Creates the output directory if needed.
pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", dir.display()))))?;
    Ok(dir.to_path_buf())
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a, P: Serialize> {
    command: &'a str,
    version: &'a str,
    config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a P>,
}

/// `run.json`: the resolved configuration, reusable via `--config`.
pub fn write_run_json<P: Serialize>(dir: &Path, command: &str, config: BTreeMap<String, String>, params: Option<&P>) -> Result<()> {
    write_json(
        &dir.join("run.json"),
        &RunRecord { command, version: env!("CARGO_PKG_VERSION"), config, params },
    )
}

pub fn write_matrix_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = (0..a.ncols()).map(|j| format!("n{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        a.row_iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
    )
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
