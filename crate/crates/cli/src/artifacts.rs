//! Run directory layout. Every file is written to a temporary sibling and
//! renamed into place, so readers never see a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surrogate_mcmc_core::adaptive::{IterationRecord, TrainingSet};
use surrogate_mcmc_core::mcmc::{Chains, Marginal};

use crate::summary::{DensityCurve, PosteriorSummary};
use crate::RunError;

pub const CHAINS: &str = "chains.csv";
pub const DESIGN_POINTS: &str = "design_points.csv";
pub const RECORDS: &str = "iteration_records.jsonl";
pub const SUMMARY: &str = "posterior_summary.json";
pub const DENSITIES: &str = "densities.csv";
pub const METADATA: &str = "metadata.json";
pub const RESUME_STATE: &str = "resume_state.json";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let name = path.file_name().ok_or_else(|| RunError::Artifact(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Artifact(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Artifact(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Artifact(format!("{}: {e}", path.display())))
}

/// Everything about a run except its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub status: RunStatus,
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub param_names: Vec<String>,
    pub prior: Vec<Marginal>,
    pub true_params: Option<Vec<f64>>,
    pub n_chains: usize,
    pub n_generations: usize,
    pub burn_in: f64,
    pub high_fidelity_calls: usize,
    /// Strategy A incorporation mode, when Strategy A is used.
    pub strategy_a_mode: Option<String>,
    pub error: Option<serde_json::Value>,
    pub version: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    Failed,
}

fn header(names: &[String], first: &[&str], last: &[&str]) -> String {
    let cols: Vec<&str> =
        first.iter().copied().chain(names.iter().map(String::as_str)).chain(last.iter().copied()).collect();
    cols.join(",") + "\n"
}

/// One row per chain and generation, chain-major.
pub fn chains_csv(chains: &Chains, names: &[String]) -> String {
    let mut s = header(names, &["chain", "generation"], &["log_density"]);
    for c in 0..chains.n_chains {
        for g in 0..chains.n_generations() {
            write!(s, "{c},{g}").unwrap();
            for v in chains.state(c, g) {
                write!(s, ",{v}").unwrap();
            }
            writeln!(s, ",{}", chains.log_density[c][g]).unwrap();
        }
    }
    s
}

/// Parsed `chains.csv`: parameter names and rows of
/// `(chain, generation, state, log_density)`.
pub struct ChainTable {
    pub names: Vec<String>,
    pub rows: Vec<(usize, usize, Vec<f64>, f64)>,
}

impl ChainTable {
    pub fn n_generations(&self) -> usize {
        self.rows.iter().map(|r| r.1 + 1).max().unwrap_or(0)
    }

    /// States from generation `floor(burn_in · n_generations)` on.
    pub fn retained(&self, burn_in: f64) -> Vec<Vec<f64>> {
        let start = (self.n_generations() as f64 * burn_in).floor() as usize;
        self.rows.iter().filter(|r| r.1 >= start).map(|r| r.2.clone()).collect()
    }
}

pub fn read_chains(path: &Path) -> Result<ChainTable, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Artifact(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let head: Vec<&str> =
        lines.next().ok_or_else(|| RunError::Artifact("chains.csv is empty".into()))?.split(',').collect();
    if head.len() < 4 || head[0] != "chain" || head[1] != "generation" || head[head.len() - 1] != "log_density" {
        return Err(RunError::Artifact("chains.csv has an unexpected header".into()));
    }
    let names: Vec<String> = head[2..head.len() - 1].iter().map(|s| s.to_string()).collect();
    let bad = |i: usize| RunError::Artifact(format!("chains.csv line {} is malformed", i + 2));
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != head.len() {
            return Err(bad(i));
        }
        let c = f[0].parse().map_err(|_| bad(i))?;
        let g = f[1].parse().map_err(|_| bad(i))?;
        let vals: Vec<f64> = f[2..].iter().map(|v| v.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(i))?;
        let (state, ld) = vals.split_at(vals.len() - 1);
        rows.push((c, g, state.to_vec(), ld[0]));
    }
    if rows.is_empty() {
        return Err(RunError::Artifact("chains.csv holds no samples".into()));
    }
    Ok(ChainTable { names, rows })
}

/// Design points in order of evaluation, tagged with the iteration that
/// added them (0 for the initial design).
pub fn design_points_csv(training: &TrainingSet, records: &[IterationRecord], names: &[String]) -> String {
    let mut s = header(names, &["iteration"], &["log_likelihood"]);
    let mut row = 0;
    for r in records {
        for _ in 0..r.added.len() {
            if row >= training.len() {
                break;
            }
            write!(s, "{}", r.iteration).unwrap();
            for v in &training.points[row] {
                write!(s, ",{v}").unwrap();
            }
            writeln!(s, ",{}", training.scores[row]).unwrap();
            row += 1;
        }
    }
    s
}

pub fn records_jsonl(records: &[IterationRecord]) -> Result<String, RunError> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).map_err(|e| RunError::Artifact(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>, RunError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| RunError::Artifact(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn densities_csv(curves: &[DensityCurve]) -> String {
    let mut s = String::from("param,x,density\n");
    for c in curves {
        for (x, d) in c.x.iter().zip(&c.density) {
            writeln!(s, "{},{x},{d}", c.name).unwrap();
        }
    }
    s
}

pub fn read_densities(path: &Path) -> Result<Vec<DensityCurve>, RunError> {
    let text = fs::read_to_string(path)?;
    let mut curves: Vec<DensityCurve> = Vec::new();
    for (i, line) in text.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || RunError::Artifact(format!("densities.csv line {} is malformed", i + 2));
        if f.len() != 3 {
            return Err(bad());
        }
        let (x, d) = (f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?);
        match curves.last_mut() {
            Some(c) if c.name == f[0] => {
                c.x.push(x);
                c.density.push(d);
            }
            _ => curves.push(DensityCurve { name: f[0].to_string(), x: vec![x], density: vec![d] }),
        }
    }
    Ok(curves)
}

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<(), RunError> {
        write_atomic(&self.path(name), text.as_bytes())
    }

    pub fn write_summary(&self, summary: &PosteriorSummary, curves: &[DensityCurve]) -> Result<(), RunError> {
        write_json(&self.path(SUMMARY), summary)?;
        self.write(DENSITIES, &densities_csv(curves))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_round_trip_through_csv() {
        let chains = Chains {
            n_chains: 2,
            dim: 2,
            seed: 0,
            initial: vec![vec![0.0, 0.0]; 2],
            states: vec![vec![0.1, 0.2, 0.3, 0.4], vec![1.0 / 3.0, -2.5, 7.0, 1e-300]],
            log_density: vec![vec![-1.0, -2.0], vec![-0.5, f64::MIN_POSITIVE]],
            archive: vec![],
            initial_archive: 0,
            accepted: vec![0, 0],
            proposed: vec![0, 0],
        };
        let names = vec!["a".to_string(), "b".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(CHAINS);
        write_atomic(&p, chains_csv(&chains, &names).as_bytes()).unwrap();
        let t = read_chains(&p).unwrap();
        assert_eq!(t.names, names);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[2].2, vec![1.0 / 3.0, -2.5]);
        assert_eq!(t.rows[3].3, f64::MIN_POSITIVE);
        assert_eq!(t.retained(0.5).len(), 2);
        assert!(!dir.path().join(".chains.csv.tmp").exists());
    }
}
