//! On-disk result bundles: `basis.csv`, `spectrum.csv`, `history.csv`,
//! `config.json` and `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sploc::analysis::{class_subspaces, Subspace};
use sploc::{OptimizerConfig, Spectrum, SplocError, SplocResult};

use crate::scenario::Scenario;

/// Everything needed to rerun `train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub manifest: PathBuf,
    pub scenario: Scenario,
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(rename = "nD")]
    pub n_d: usize,
    #[serde(rename = "nU")]
    pub n_u: usize,
    #[serde(rename = "nI")]
    pub n_i: usize,
    pub net_efficacy: f64,
    pub sweeps: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub elapsed_seconds: f64,
}

impl RunSummary {
    pub fn of(result: &SplocResult) -> Self {
        let c = result.counts();
        RunSummary {
            n_d: c.d,
            n_u: c.u,
            n_i: c.i,
            net_efficacy: result.net_efficacy(),
            sweeps: result.sweeps(),
            converged: result.converged,
            warning: (!result.converged).then(|| {
                format!("not converged after {} sweeps", result.config.max_sweeps)
            }),
            elapsed_seconds: result.elapsed.as_secs_f64(),
        }
    }

    /// The one-line summary printed by `train`.
    pub fn line(&self) -> String {
        format!("{} {} {} {}", self.n_d, self.n_u, self.n_i, self.net_efficacy)
    }
}

fn write(path: &Path, text: &str) -> Result<(), SplocError> {
    fs::write(path, text).map_err(|e| SplocError::io(path, e))
}

fn read(path: &Path) -> Result<String, SplocError> {
    fs::read_to_string(path).map_err(|e| SplocError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// One row per mode (the transpose of the column-major basis).
pub fn basis_csv(basis: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for col in basis.column_iter() {
        let row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_basis_csv(text: &str) -> Result<DMatrix<f64>, SplocError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| SplocError::Parse {
                        what: "basis entry",
                        text: f.to_string(),
                        reason: e.to_string(),
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(SplocError::invalid("basis.csv must hold a square matrix"));
    }
    Ok(DMatrix::from_fn(p, p, |r, c| rows[c][r]))
}

pub fn history_csv(result: &SplocResult) -> String {
    let mut out = String::from("sweep,net_E,nD,nU,nI\n");
    for h in &result.history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.sweep, h.net_efficacy, h.counts.d, h.counts.u, h.counts.i
        ));
    }
    out
}

pub fn write_bundle(dir: &Path, result: &SplocResult, config: &TrainConfig) -> Result<RunSummary, SplocError> {
    fs::create_dir_all(dir).map_err(|e| SplocError::io(dir, e))?;
    let summary = RunSummary::of(result);
    write(&dir.join("basis.csv"), &basis_csv(result.basis.matrix()))?;
    write(&dir.join("spectrum.csv"), &result.spectrum.to_csv())?;
    write(&dir.join("history.csv"), &history_csv(result))?;
    write(&dir.join("config.json"), &to_json(config))?;
    write(&dir.join("summary.json"), &to_json(&summary))?;
    Ok(summary)
}

/// A bundle read back from disk.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub basis: DMatrix<f64>,
    pub spectrum: Spectrum,
    pub config: Option<TrainConfig>,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Self, SplocError> {
        if !dir.join("basis.csv").is_file() {
            return Err(SplocError::invalid(format!(
                "{} is not a result bundle (no basis.csv)",
                dir.display()
            )));
        }
        let basis = parse_basis_csv(&read(&dir.join("basis.csv"))?)?;
        let spectrum = Spectrum::from_csv(&read(&dir.join("spectrum.csv"))?)?;
        if spectrum.len() != basis.ncols() {
            return Err(SplocError::DimensionMismatch {
                context: format!("spectrum of {}", dir.display()),
                expected: basis.ncols(),
                found: spectrum.len(),
            });
        }
        let config_path = dir.join("config.json");
        let config = if config_path.is_file() {
            Some(
                serde_json::from_str(&read(&config_path)?)
                    .map_err(|e| SplocError::invalid(format!("{}: {e}", config_path.display())))?,
            )
        } else {
            None
        };
        Ok(Bundle {
            dir: dir.to_path_buf(),
            basis,
            spectrum,
            config,
        })
    }

    pub fn name(&self) -> String {
        self.dir.display().to_string()
    }

    pub fn subspaces(&self) -> [Subspace; 3] {
        class_subspaces(&self.basis, &self.spectrum, &self.name())
    }
}

pub fn read_train_config(path: &Path) -> Result<TrainConfig, SplocError> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| SplocError::invalid(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6000000000000001]);
        let back = parse_basis_csv(&basis_csv(&m)).unwrap();
        assert_eq!(back, m);
        assert!(parse_basis_csv("1,2\n3\n").is_err());
    }
}
