//! Spec files, PMF tables, and data tables on disk.
//!
//! Specs are JSON; tables and samples are comma-separated with a header row
//! and LF line endings.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::WeightedTable;
use crate::model::{BinaryConfig, ModelSpec};
use crate::pmf::Pmf;
use crate::sampling::parse_spin;

/// On-disk form of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    pub n: usize,
    pub delta: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_shift: Option<f64>,
}

impl From<ModelSpec> for ModelSpecFile {
    fn from(spec: ModelSpec) -> Self {
        ModelSpecFile {
            n: spec.n(),
            delta: spec.delta().to_vec(),
            sigma: spec.sigma_rows(),
            extra_shift: None,
        }
    }
}

impl TryFrom<ModelSpecFile> for ModelSpec {
    type Error = Error;

    fn try_from(file: ModelSpecFile) -> Result<Self> {
        if file.delta.len() != file.n {
            return Err(Error::invalid(
                "delta",
                format!("has {} entries but n = {}", file.delta.len(), file.n),
            ));
        }
        if file.sigma.len() != file.n {
            return Err(Error::invalid(
                "sigma",
                format!("has {} rows but n = {}", file.sigma.len(), file.n),
            ));
        }
        ModelSpec::new(file.delta, file.sigma)
    }
}

/// A validated spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSpec {
    pub spec: ModelSpec,
    pub extra_shift: f64,
    /// Non-fatal findings, meant for the error stream.
    pub warnings: Vec<String>,
}

impl ParsedSpec {
    pub fn to_file(&self) -> ModelSpecFile {
        let mut file = ModelSpecFile::from(self.spec.clone());
        if self.extra_shift != 0.0 {
            file.extra_shift = Some(self.extra_shift);
        }
        file
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }
}

/// Parses and validates a spec document. A non-zero diagonal is zeroed with a warning.
pub fn parse_spec(text: &str) -> Result<ParsedSpec> {
    let file: ModelSpecFile = serde_json::from_str(text)
        .map_err(|e| Error::invalid("spec file", e.to_string()))?;
    let extra_shift = file.extra_shift.unwrap_or(0.0);
    if !(extra_shift.is_finite() && extra_shift >= 0.0) {
        return Err(Error::invalid(
            "extra_shift",
            format!("{extra_shift} is not a finite non-negative number"),
        ));
    }
    let spec = ModelSpec::try_from(file)?;
    let mut warnings = Vec::new();
    let spec = if spec.has_nonzero_diagonal() {
        warnings.push("sigma has a non-zero diagonal; it does not affect any probability and was set to zero".to_string());
        spec.with_zero_diagonal()
    } else {
        spec
    };
    Ok(ParsedSpec {
        spec,
        extra_shift,
        warnings,
    })
}

pub fn read_spec(path: &Path) -> Result<ParsedSpec> {
    parse_spec(&std::fs::read_to_string(path)?)
}

/// 17 significant digits, enough to recover every binary64 value exactly.
pub fn format_probability(p: f64) -> String {
    format!("{p:.16e}")
}

/// Header `x_1,..,x_n,probability`, one row per configuration in index order.
pub fn write_pmf_csv<W: Write>(pmf: &Pmf, mut out: W) -> Result<()> {
    let n = pmf.n();
    let mut header: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    header.push("probability".into());
    writeln!(out, "{}", header.join(","))?;
    for (k, p) in pmf.probs().iter().enumerate() {
        let mut line = String::with_capacity(4 * n + 24);
        for i in 0..n {
            line.push_str(if (k >> i) & 1 == 1 { "+1," } else { "-1," });
        }
        line.push_str(&format_probability(*p));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PmfDocument {
    n: usize,
    log_z: f64,
    /// Which variables are +1 for `probs[k]`.
    configurations: Vec<Vec<i8>>,
    probs: Vec<f64>,
}

pub fn write_pmf_json<W: Write>(pmf: &Pmf, out: W) -> Result<()> {
    let doc = PmfDocument {
        n: pmf.n(),
        log_z: pmf.log_z(),
        configurations: (0..pmf.len())
            .map(|k| BinaryConfig::from_index(pmf.n(), k).values().to_vec())
            .collect(),
        probs: pmf.probs().to_vec(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

/// Reads `x_1..x_n` columns of ±1, with an optional trailing `probability`
/// or `weight` column. Without one, every row weighs 1.
pub fn read_data_csv<R: Read>(input: R) -> Result<WeightedTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyData);
    }
    let weighted = matches!(headers.iter().next_back(), Some("probability" | "weight"));
    let n = if weighted { headers.len() - 1 } else { headers.len() };
    for (i, h) in headers.iter().take(n).enumerate() {
        if h != format!("x_{}", i + 1) {
            return Err(Error::invalid(
                format!("header column {}", i + 1),
                format!("expected x_{}, found {h:?}", i + 1),
            ));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = line + 1;
        let mut x = Vec::with_capacity(n);
        for (i, field) in record.iter().take(n).enumerate() {
            x.push(parse_spin(field).ok_or_else(|| {
                Error::invalid(format!("row {row} column x_{}", i + 1), format!("{field:?} is not +1 or -1"))
            })?);
        }
        let w = if weighted {
            let field = record.get(n).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("row {row} weight"), format!("{field:?} is not a number")))?
        } else {
            1.0
        };
        rows.push((BinaryConfig::new(x)?, w));
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    WeightedTable::new(n, rows)
}
