//! On-disk formats: JSON for distributions, marginals, libraries and
//! metadata; delimited text for samples.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use pidq::model_quant::{LibraryEntry, RankedModel};
use pidq::{Cardinalities, Features, JointDist, Matrix, ModelLibrary, NormalizedPid, PairwiseMarginals, SampleTable};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub cardinalities: [usize; 3],
    /// Flat, index `(i1 * n2 + i2) * ny + iy`.
    pub p: Vec<f64>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl DistFile {
    pub fn from_joint(joint: &JointDist) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            cardinalities: joint.card().dims(),
            p: joint.probs().to_vec(),
        }
    }

    pub fn to_joint(&self, cap: usize) -> Result<JointDist> {
        let [n1, n2, ny] = self.cardinalities;
        let card = Cardinalities::with_cap(n1, n2, ny, cap)?;
        Ok(JointDist::new(card, self.p.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub m1y: Vec<Vec<f64>>,
    pub m2y: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m12: Option<Vec<Vec<f64>>>,
}

impl MarginalsFile {
    pub fn to_marginals(&self, cap: usize) -> Result<PairwiseMarginals> {
        let m = |name: &str, rows: &[Vec<f64>]| {
            Matrix::from_rows(rows).with_context(|| format!("field {name}"))
        };
        let m12 = self.m12.as_deref().map(|r| m("m12", r)).transpose()?;
        Ok(PairwiseMarginals::with_cap(m("m1y", &self.m1y)?, m("m2y", &self.m2y)?, m12, cap)?)
    }

    pub fn from_marginals(m: &PairwiseMarginals) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            m1y: m.m1y().to_rows(),
            m2y: m.m2y().to_rows(),
            m12: m.m12().map(Matrix::to_rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRecord {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub dataset_id: u32,
    #[serde(default)]
    pub name: String,
    pub profile: ProfileRecord,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub entries: Vec<EntryRecord>,
}

impl LibraryFile {
    pub fn from_library(lib: &ModelLibrary) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            entries: lib
                .entries()
                .iter()
                .map(|e| EntryRecord {
                    dataset_id: e.dataset_id,
                    name: e.name.clone(),
                    profile: ProfileRecord {
                        r: e.profile.r_hat,
                        u1: e.profile.u1_hat,
                        u2: e.profile.u2_hat,
                        s: e.profile.s_hat,
                    },
                    models: e
                        .models
                        .iter()
                        .map(|m| ModelRecord {
                            id: m.id.clone(),
                            score: m.score,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Profiles must already be normalized: non-negative and summing to 1.
    pub fn to_library(&self) -> Result<ModelLibrary> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let p = &e.profile;
            let parts = [p.r, p.u1, p.u2, p.s];
            let sum: f64 = parts.iter().sum();
            if parts.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                bail!(
                    "dataset {}: profile must be non-negative shares summing to 1 (sum is {sum})",
                    e.dataset_id
                );
            }
            entries.push(LibraryEntry {
                dataset_id: e.dataset_id,
                name: e.name.clone(),
                profile: NormalizedPid {
                    r_hat: p.r,
                    u1_hat: p.u1,
                    u2_hat: p.u2,
                    s_hat: p.s,
                    degenerate: false,
                },
                models: e
                    .models
                    .iter()
                    .map(|m| RankedModel {
                        id: m.id.clone(),
                        score: m.score,
                    })
                    .collect(),
            });
        }
        Ok(ModelLibrary::new(entries)?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        anyhow!(
            "{}: line {}, column {}: {}",
            path.display(),
            e.line(),
            e.column(),
            e
        )
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| anyhow!("cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Column layout of a samples file.
struct Columns {
    x1: Vec<usize>,
    x2: Vec<usize>,
    y: usize,
}

fn modality_columns(header: &csv::StringRecord, name: &str) -> Result<Vec<usize>> {
    if let Some(i) = header.iter().position(|h| h == name) {
        if header.iter().any(|h| h.starts_with(&format!("{name}_"))) {
            bail!("header mixes `{name}` with `{name}_<k>` columns");
        }
        return Ok(vec![i]);
    }
    let prefix = format!("{name}_");
    let mut indexed: Vec<(usize, usize)> = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(k) = h.strip_prefix(&prefix) {
            let k: usize = k
                .parse()
                .map_err(|_| anyhow!("header column `{h}` should be `{prefix}<index>`"))?;
            indexed.push((k, i));
        }
    }
    if indexed.is_empty() {
        bail!("header has no `{name}` column");
    }
    indexed.sort_unstable();
    for (expect, (k, _)) in indexed.iter().enumerate() {
        if *k != expect {
            bail!("`{prefix}` columns must be numbered 0..{} without gaps", indexed.len());
        }
    }
    Ok(indexed.into_iter().map(|(_, i)| i).collect())
}

/// Reads a header-led table with columns `x1` or `x1_0..`, `x2` or
/// `x2_0..`, and an integer `y`. Tab-separated when the extension is `tsv`.
pub fn read_samples(path: &Path) -> Result<SampleTable> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header = reader.headers()?.clone();
    let cols = Columns {
        x1: modality_columns(&header, "x1")?,
        x2: modality_columns(&header, "x2")?,
        y: header
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| anyhow!("header has no `y` column"))?,
    };
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.with_context(|| format!("{}: line {line}", path.display()))?;
        if record.len() != header.len() {
            bail!(
                "{}: line {line}: expected {} fields, found {}",
                path.display(),
                header.len(),
                record.len()
            );
        }
        let number = |i: usize| -> Result<f64> {
            let cell = &record[i];
            let v: f64 = cell.parse().map_err(|_| {
                anyhow!("{}: line {line}, column `{}`: `{cell}` is not a number", path.display(), &header[i])
            })?;
            if !v.is_finite() {
                bail!("{}: line {line}, column `{}`: value is not finite", path.display(), &header[i]);
            }
            Ok(v)
        };
        for &i in &cols.x1 {
            x1.push(number(i)?);
        }
        for &i in &cols.x2 {
            x2.push(number(i)?);
        }
        let label = number(cols.y)?;
        if label < 0.0 || label.fract() != 0.0 || label > u32::MAX as f64 {
            bail!(
                "{}: line {line}, column `y`: label `{}` is not a non-negative integer",
                path.display(),
                &record[cols.y]
            );
        }
        y.push(label as usize);
    }
    let rows = y.len();
    if rows == 0 {
        bail!("{}: no samples", path.display());
    }
    Ok(SampleTable::new(
        Features::new(rows, cols.x1.len(), x1)?,
        Features::new(rows, cols.x2.len(), x2)?,
        y,
        None,
    )?)
}

/// `.json` inputs are distribution files; anything else is read as samples.
pub enum Input {
    Dist(JointDist),
    Samples(SampleTable),
}

pub fn read_input(path: &Path, cap: usize) -> Result<Input> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let file: DistFile = read_json(path)?;
        let joint = file
            .to_joint(cap)
            .with_context(|| format!("{}: invalid distribution", path.display()))?;
        Ok(Input::Dist(joint))
    } else {
        Ok(Input::Samples(read_samples(path)?))
    }
}
