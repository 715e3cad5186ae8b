//! Convergence tables, tolerance bands and their serialization.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    /// Aligned with [`ConvergenceReport::param_names`].
    pub params: Vec<f64>,
    pub value: f64,
    pub limit: f64,
    pub ratio: f64,
    pub precision_ok: bool,
    /// Aligned with [`ConvergenceReport::extra_names`].
    pub extras: Vec<f64>,
    pub band: Option<Band>,
    pub note: Option<String>,
}

impl ReportRow {
    pub fn new(n: usize, params: Vec<f64>, value: f64, limit: f64) -> Self {
        let ratio = if limit != 0.0 { value / limit } else { f64::NAN };
        Self {
            n,
            params,
            value,
            limit,
            ratio,
            precision_ok: value.is_finite(),
            extras: Vec::new(),
            band: None,
            note: None,
        }
    }

    pub fn flagged(n: usize, params: Vec<f64>, limit: f64, note: String) -> Self {
        Self {
            precision_ok: false,
            note: Some(note),
            ..Self::new(n, params, f64::NAN, limit)
        }
    }

    pub fn with_extras(mut self, extras: Vec<f64>) -> Self {
        self.extras = extras;
        self
    }

    pub fn verdict(&self) -> Option<bool> {
        self.band.map(|b| self.precision_ok && b.contains(self.ratio))
    }
}

/// `[center - half_width, center + half_width]` for the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub center: f64,
    pub half_width: f64,
}

impl Band {
    pub fn contains(&self, ratio: f64) -> bool {
        (ratio - self.center).abs() <= self.half_width
    }

    pub fn low(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.center + self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// No row had a declared band.
    Unbanded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub model: String,
    pub param_names: Vec<String>,
    pub extra_names: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Additional checks beyond per-row bands (trends, normalizations).
    pub checks: Vec<Check>,
}

impl ConvergenceReport {
    pub fn new(experiment: &str, model: &str, param_names: &[&str], extra_names: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            model: model.into(),
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            extra_names: extra_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Band lookup key of a row: experiment, model and parameters, without `n`.
    pub fn row_key(&self, row: &ReportRow) -> String {
        let params: Vec<String> = self
            .param_names
            .iter()
            .zip(&row.params)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}/{}/{}", self.experiment, self.model, params.join(","))
    }

    /// Attaches bands whose key and target `n` match a row.
    pub fn apply_bands(&mut self, bands: &BandFile) {
        let keys: Vec<String> = self.rows.iter().map(|r| self.row_key(r)).collect();
        for (row, key) in self.rows.iter_mut().zip(keys) {
            if let Some(b) = bands.find(&key, row.n) {
                row.band = Some(b.band(bands.rule.center));
            }
        }
    }

    pub fn verdict(&self) -> Verdict {
        let judged: Vec<bool> = self.rows.iter().filter_map(|r| r.verdict()).collect();
        if judged.is_empty() && self.checks.is_empty() {
            return Verdict::Unbanded;
        }
        if judged.iter().all(|&p| p) && self.checks.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// CSV with `# `-prefixed header lines; every float with 17 significant digits.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let mut cols = vec!["experiment".to_string(), "model".into(), "n".into()];
        cols.extend(self.param_names.iter().cloned());
        cols.extend(
            ["value", "limit", "ratio", "precision_ok", "band_low", "band_high", "row_verdict"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.extend(self.extra_names.iter().cloned());
        cols.push("note".into());
        let _ = writeln!(out, "{}", cols.join(","));
        for r in &self.rows {
            let mut f = vec![self.experiment.clone(), self.model.clone(), r.n.to_string()];
            f.extend(r.params.iter().map(|&v| num(v)));
            f.push(num(r.value));
            f.push(num(r.limit));
            f.push(num(r.ratio));
            f.push(r.precision_ok.to_string());
            f.push(r.band.map(|b| num(b.low())).unwrap_or_default());
            f.push(r.band.map(|b| num(b.high())).unwrap_or_default());
            f.push(match r.verdict() {
                Some(true) => "PASS".into(),
                Some(false) => "FAIL".into(),
                None => String::new(),
            });
            f.extend(r.extras.iter().map(|&v| num(v)));
            f.push(r.note.clone().unwrap_or_default().replace(',', ";"));
            let _ = writeln!(out, "{}", f.join(","));
        }
        out
    }

    pub fn verdict_json(&self) -> serde_json::Value {
        let judged = self.rows.iter().filter(|r| r.band.is_some()).count();
        let failed: Vec<String> = self
            .rows
            .iter()
            .filter(|r| r.verdict() == Some(false))
            .map(|r| format!("{} n={}", self.row_key(r), r.n))
            .collect();
        serde_json::json!({
            "experiment": self.experiment,
            "model": self.model,
            "verdict": self.verdict(),
            "rows": self.rows.len(),
            "rows_judged": judged,
            "rows_failed": failed,
            "precision_clean": self.rows.iter().all(|r| r.precision_ok),
            "checks": self.checks,
        })
    }

    /// Two-column `(n, ratio)` series, one per parameter combination.
    pub fn plot_series(&self) -> Vec<(String, String)> {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.rows {
            let k = self.row_key(r);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|k| {
                let mut body = String::from("n,ratio\n");
                for r in self.rows.iter().filter(|r| self.row_key(r) == k) {
                    let _ = writeln!(body, "{},{}", r.n, num(r.ratio));
                }
                (k, body)
            })
            .collect()
    }
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// How half-widths are derived from a pilot ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRule {
    pub center: f64,
    pub factor: f64,
    pub min_half_width: f64,
    pub max_half_width: f64,
}

impl Default for BandRule {
    fn default() -> Self {
        Self {
            center: 1.0,
            factor: 1.5,
            min_half_width: 1e-3,
            max_half_width: 0.2,
        }
    }
}

impl BandRule {
    pub fn half_width(&self, pilot_ratio: f64) -> f64 {
        if !pilot_ratio.is_finite() {
            return self.min_half_width;
        }
        (self.factor * (pilot_ratio - self.center).abs()).clamp(self.min_half_width, self.max_half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub key: String,
    pub target_n: usize,
    pub pilot_n: usize,
    pub pilot_ratio: f64,
    pub half_width: f64,
}

impl BandEntry {
    pub fn band(&self, center: f64) -> Band {
        Band {
            center,
            half_width: self.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BandFile {
    pub rule: BandRule,
    #[serde(default, rename = "band")]
    pub bands: Vec<BandEntry>,
}

impl BandFile {
    pub fn find(&self, key: &str, n: usize) -> Option<&BandEntry> {
        self.bands.iter().find(|b| b.key == key && b.target_n == n)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("band file serializes")
    }
}
