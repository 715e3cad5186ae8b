//! TOML model files.
//!
//! ```toml
//! name = "zoo2"
//! types = 2
//!
//! [[law]]
//! parent = 1
//! kind = "product"
//! children = [
//!   { type = 1, family = "geometric", mean = 1.0 },
//!   { type = 2, family = "poisson", mean = 1.0 },
//! ]
//!
//! [[law]]
//! parent = 2
//! kind = "table"
//! rows = [
//!   { counts = [0], p = 0.25 },
//!   { counts = [1], p = 0.5 },
//!   { counts = [2], p = 0.25 },
//! ]
//! ```
//!
//! Types are labelled `1..=types`. A product law lists one marginal per child
//! type; unlisted child types get no children. Families and their parameters:
//! `geometric` (`mean`), `poisson` (`mean`), `bernoulli` (`p`), `point_mass` (`k`).
//! Table rows give counts for child types `parent..=types`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::family::Family;
use super::law::{LawKind, OffspringLaw, ProcessSpec, TableRow};
use super::ModelError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Option<String>,
    types: usize,
    law: Vec<toml::Spanned<RawLaw>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaw {
    parent: usize,
    kind: String,
    children: Option<Vec<RawChild>>,
    rows: Option<Vec<RawRow>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChild {
    #[serde(rename = "type")]
    child_type: usize,
    family: String,
    mean: Option<f64>,
    p: Option<f64>,
    k: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    counts: Vec<u32>,
    p: f64,
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub spec: ProcessSpec,
}

impl ModelConfig {
    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let fallback = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        Self::parse(&text, &fallback)
    }

    pub fn parse(text: &str, fallback_name: &str) -> Result<Self, ModelError> {
        let raw: RawModel = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            ModelError::Parse {
                line,
                field: None,
                detail: e.message().to_string(),
            }
        })?;
        let n = raw.types;
        if n == 0 {
            return Err(ModelError::Parse {
                line: Some(1),
                field: Some("types".into()),
                detail: "must be at least 1".into(),
            });
        }
        let mut laws: Vec<Option<OffspringLaw>> = vec![None; n];
        for (idx, spanned) in raw.law.iter().enumerate() {
            let line = line_of(text, spanned.span().start);
            let law = spanned.get_ref();
            let at = |field: &str, detail: String| ModelError::Parse {
                line: Some(line),
                field: Some(format!("law[{idx}].{field}")),
                detail,
            };
            if law.parent == 0 || law.parent > n {
                return Err(at("parent", format!("must be in 1..={n}, got {}", law.parent)));
            }
            let parent = law.parent - 1;
            if laws[parent].is_some() {
                return Err(at("parent", format!("type {} has more than one law", law.parent)));
            }
            let width = n - parent;
            let built = match law.kind.as_str() {
                "product" => {
                    let children = law
                        .children
                        .as_ref()
                        .ok_or_else(|| at("children", "product law needs a `children` list".into()))?;
                    let mut marginals = vec![Family::ZERO; width];
                    let mut seen = vec![false; width];
                    for (ci, child) in children.iter().enumerate() {
                        let cfield = |f: &str| format!("children[{ci}].{f}");
                        if child.child_type < law.parent || child.child_type > n {
                            return Err(at(
                                &cfield("type"),
                                format!(
                                    "type {} parents can only have children of types {}..={n}, got {}",
                                    law.parent, law.parent, child.child_type
                                ),
                            ));
                        }
                        let slot = child.child_type - law.parent;
                        if seen[slot] {
                            return Err(at(&cfield("type"), format!("child type {} listed twice", child.child_type)));
                        }
                        seen[slot] = true;
                        marginals[slot] = family_of(child).map_err(|(f, d)| at(&cfield(f), d))?;
                    }
                    OffspringLaw::product(parent, marginals)
                }
                "table" => {
                    let rows = law
                        .rows
                        .as_ref()
                        .ok_or_else(|| at("rows", "table law needs a `rows` list".into()))?;
                    let rows = rows
                        .iter()
                        .map(|r| TableRow {
                            counts: r.counts.clone(),
                            prob: r.p,
                        })
                        .collect();
                    OffspringLaw::table(parent, rows)
                }
                other => return Err(at("kind", format!("expected \"product\" or \"table\", got {other:?}"))),
            };
            laws[parent] = Some(built);
        }
        let mut ordered = Vec::with_capacity(n);
        for (i, l) in laws.into_iter().enumerate() {
            match l {
                Some(l) => ordered.push(l),
                None => {
                    return Err(ModelError::Parse {
                        line: None,
                        field: Some("law".into()),
                        detail: format!("no law given for type {}", i + 1),
                    })
                }
            }
        }
        let spec = ProcessSpec::new(ordered)?;
        Ok(Self {
            name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
            spec,
        })
    }

    /// Canonical TOML rendering; parsing it back yields an equal config.
    pub fn render(&self) -> String {
        let n = self.spec.n_types();
        let mut out = String::new();
        let _ = writeln!(out, "name = {:?}", self.name);
        let _ = writeln!(out, "types = {n}");
        for law in self.spec.laws() {
            let parent = law.parent();
            let _ = writeln!(out, "\n[[law]]\nparent = {}", parent + 1);
            match law.kind() {
                LawKind::Product(m) => {
                    let _ = writeln!(out, "kind = \"product\"\nchildren = [");
                    for (off, fam) in m.iter().enumerate() {
                        if *fam == Family::ZERO {
                            continue;
                        }
                        let ty = parent + off + 1;
                        let params = match *fam {
                            Family::Geometric { mean } => format!("family = \"geometric\", mean = {mean:?}"),
                            Family::Poisson { mean } => format!("family = \"poisson\", mean = {mean:?}"),
                            Family::Bernoulli { p } => format!("family = \"bernoulli\", p = {p:?}"),
                            Family::PointMass { k } => format!("family = \"point_mass\", k = {k}"),
                        };
                        let _ = writeln!(out, "  {{ type = {ty}, {params} }},");
                    }
                    out.push_str("]\n");
                }
                LawKind::Table(rows) => {
                    let _ = writeln!(out, "kind = \"table\"\nrows = [");
                    for r in rows {
                        let counts: Vec<String> = r.counts.iter().map(|c| c.to_string()).collect();
                        let _ = writeln!(out, "  {{ counts = [{}], p = {:?} }},", counts.join(", "), r.prob);
                    }
                    out.push_str("]\n");
                }
            }
        }
        out
    }
}

fn family_of(child: &RawChild) -> Result<Family, (&'static str, String)> {
    let need_mean = || child.mean.ok_or(("mean", format!("family {:?} requires `mean`", child.family)));
    let fam = match child.family.as_str() {
        "geometric" => Family::Geometric { mean: need_mean()? },
        "poisson" => Family::Poisson { mean: need_mean()? },
        "bernoulli" => Family::Bernoulli {
            p: child.p.ok_or(("p", "family \"bernoulli\" requires `p`".to_string()))?,
        },
        "point_mass" => Family::PointMass {
            k: child.k.ok_or(("k", "family \"point_mass\" requires `k`".to_string()))?,
        },
        other => {
            return Err((
                "family",
                format!("unknown family {other:?}; expected geometric, poisson, bernoulli or point_mass"),
            ))
        }
    };
    fam.check().map_err(|d| ("family", d))?;
    Ok(fam)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}
