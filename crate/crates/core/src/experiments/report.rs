use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const CSV_COLUMNS: [&str; 13] = [
    "experiment",
    "n",
    "alpha",
    "lambda",
    "param_name",
    "param",
    "value",
    "slope",
    "slope_stderr",
    "band",
    "grid_m",
    "seed",
    "flag",
];

/// One measured value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub n: usize,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub param_name: String,
    pub param: f64,
    pub value: f64,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Eigenvalue cap of the band; `0` when no Hermite band is involved.
    pub band: usize,
    pub grid_m: usize,
    pub seed: u64,
    pub flag: String,
}

/// Outcome of one pass/fail criterion of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<CheckOutcome>,
    pub runtime: Duration,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Rows with the given `param_name`.
    pub fn rows_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.param_name == name)
    }

    /// Every row must name its experiment and carry the band, grid size and
    /// seed of the configuration that produced it.
    pub fn provenance_check(&self, cfg: &ExperimentConfig) -> Result<()> {
        let seed = cfg.seed.unwrap_or(0);
        for (i, r) in self.rows.iter().enumerate() {
            let missing = if r.experiment != cfg.experiment.name() {
                Some("experiment")
            } else if r.grid_m == 0 {
                Some("grid_m")
            } else if r.seed != seed {
                Some("seed")
            } else if r.band == 0 && !matches!(cfg.experiment, super::ExperimentKind::IdentitySuite) {
                Some("band")
            } else if r.param_name.is_empty() {
                Some("param_name")
            } else {
                None
            };
            if let Some(field) = missing {
                return Err(Error::Config(format!("row {i} lacks provenance field {field}")));
            }
        }
        Ok(())
    }

    /// CSV body: header plus one line per row, without the comment line.
    pub fn csv_body(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.n.to_string(),
                opt(r.alpha),
                opt(r.lambda),
                r.param_name.clone(),
                r.param.to_string(),
                r.value.to_string(),
                opt(r.slope),
                opt(r.slope_stderr),
                r.band.to_string(),
                r.grid_m.to_string(),
                r.seed.to_string(),
                r.flag.clone(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Full CSV: a `#` comment line with a timestamp and the runtime, then
    /// the body.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(
            out,
            "# {} generated_unix={stamp} runtime_s={:.3}",
            self.experiment,
            self.runtime.as_secs_f64()
        )?;
        out.write_all(&self.csv_body()?)?;
        out.flush()?;
        Ok(())
    }

    /// Writes the CSV to a temporary file beside `path`, then renames it
    /// into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.write_csv(tmp.as_file_mut())?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}
