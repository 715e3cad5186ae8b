use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context as _, Result};
use decomp_gw::experiments::ConvergenceReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where artifacts go and in which form.
#[derive(Debug, Clone)]
pub struct Sink {
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
    pub plotdata: bool,
}

pub const OUT_DIR_ENV: &str = "DGW_OUT_DIR";

impl Sink {
    fn target(&self, experiment: &str, model: &str) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        dir.join(format!("{experiment}_{}_{ts}.{ext}", sanitize(model)))
    }

    /// Writes a report with `header` lines and returns the written path.
    pub fn write_report(&self, rep: &ConvergenceReport, header: &[String]) -> Result<PathBuf> {
        let path = self.target(&rep.experiment, &rep.model);
        let body = match self.format {
            Format::Csv => rep.to_csv(header),
            Format::Json => {
                let v = serde_json::json!({ "config": header, "report": rep, "verdict": rep.verdict_json() });
                serde_json::to_string_pretty(&v)? + "\n"
            }
        };
        write_file(&path, &body)?;
        if self.plotdata {
            let stem = path.with_extension("");
            for (key, series) in rep.plot_series() {
                let p = PathBuf::from(format!("{}.{}.dat", stem.display(), sanitize(&key)));
                write_file(&p, &series)?;
                eprintln!("plot data: {}", p.display());
            }
        }
        Ok(path)
    }

    /// Writes a plain table with the same header convention.
    pub fn write_table(&self, experiment: &str, model: &str, header: &[String], table: &Table) -> Result<PathBuf> {
        let path = self.target(experiment, model);
        let body = match self.format {
            Format::Csv => {
                let mut out = String::new();
                for h in header {
                    for line in h.lines() {
                        let _ = writeln!(out, "# {line}");
                    }
                }
                out.push_str(&table.to_csv());
                out
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = table
                    .rows
                    .iter()
                    .map(|r| {
                        serde_json::Value::Object(
                            table.columns.iter().cloned().zip(r.iter().map(|c| serde_json::Value::from(c.clone()))).collect(),
                        )
                    })
                    .collect();
                serde_json::to_string_pretty(&serde_json::json!({ "config": header, "rows": rows }))? + "\n"
            }
        };
        write_file(&path, &body)?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",") + "\n";
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '=' { c } else { '_' })
        .collect()
}
