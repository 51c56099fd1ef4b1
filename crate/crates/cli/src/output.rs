//! CSV tables, run manifests and the mapping from errors to exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use fiberlink::config::RunConfig;
use serde::Serialize;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    use fiberlink::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::InvalidParameter { .. } => EXIT_CONFIG,
                E::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                _ => EXIT_NUMERIC,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_CONFIG;
        }
    }
    1
}

/// A CSV table held in memory until it is written.
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_owned(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: Vec<String>,
    version: &'static str,
    config: Option<&'a RunConfig>,
    preset: Option<&'a str>,
    outputs: Vec<String>,
    wall_time_s: f64,
    /// Seconds since the Unix epoch.
    timestamp: u64,
}

pub struct Sink {
    pub out_dir: Option<PathBuf>,
    pub command: &'static str,
    started: Instant,
}

impl Sink {
    pub fn new(out_dir: Option<PathBuf>, command: &'static str) -> Self {
        Sink { out_dir, command, started: Instant::now() }
    }

    /// Writes each table to `<out>/<name>.csv` plus `<out>/<command>.manifest.json`,
    /// or prints the tables to stdout when no output directory is set.
    pub fn emit(&self, tables: &[Table], config: Option<&RunConfig>, preset: Option<&str>) -> Result<Vec<PathBuf>> {
        let Some(dir) = &self.out_dir else {
            let stdout = std::io::stdout();
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(stdout.lock())?;
                }
                t.write_to(stdout.lock())?;
            }
            return Ok(Vec::new());
        };
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut paths = Vec::new();
        for t in tables {
            let p = dir.join(format!("{}.csv", t.name));
            let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            t.write_to(std::io::BufWriter::new(f))?;
            paths.push(p);
        }
        self.write_manifest(dir, &paths, config, preset)?;
        Ok(paths)
    }

    fn write_manifest(&self, dir: &Path, paths: &[PathBuf], config: Option<&RunConfig>, preset: Option<&str>) -> Result<()> {
        let m = Manifest {
            command: self.command,
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            preset,
            outputs: paths.iter().map(|p| p.display().to_string()).collect(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let p = dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&p, serde_json::to_string_pretty(&m)?).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }
}
