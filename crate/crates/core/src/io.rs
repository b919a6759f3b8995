//! File formats: model files, trajectory/master outputs, Poisson paths and
//! run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::master::MasterTrajectory;
use crate::model::{Convention, JumpOperator, ModelSpec};
use crate::pdp::{Diagnostics, Method, TrajectoryRecord};
use crate::poisson::{PoissonPath, RateModel};
use crate::scalar::C;
use crate::state::StateVector;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpOpFile {
    pub label: String,
    pub matrix: Vec<[f64; 2]>,
}

/// JSON model file; matrices are row-major lists of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    pub hamiltonian: Vec<[f64; 2]>,
    #[serde(default)]
    pub jump_ops: Vec<JumpOpFile>,
    pub convention: Convention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<[f64; 2]>>,
}

fn to_pairs(m: &CMatrix<f64>) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(dim: usize, v: &[[f64; 2]], what: &str) -> Result<CMatrix<f64>> {
    if v.len() != dim * dim {
        return Err(Error::InvalidModel(format!(
            "{what}: expected {} entries for dim {dim}, found {}",
            dim * dim,
            v.len()
        )));
    }
    CMatrix::from_row_major(v.iter().map(|p| C::new(p[0], p[1])).collect())
}

impl ModelFile {
    pub fn from_model(m: &ModelSpec<f64>, psi0: Option<&StateVector<f64>>) -> Self {
        Self {
            dim: m.dim,
            hamiltonian: to_pairs(&m.hamiltonian),
            jump_ops: m
                .jump_ops
                .iter()
                .map(|j| JumpOpFile {
                    label: j.label.clone(),
                    matrix: to_pairs(&j.op),
                })
                .collect(),
            convention: m.convention,
            initial_state: psi0.map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect()),
        }
    }

    /// The model exactly as written; use `validate_model` before simulating.
    pub fn to_model(&self) -> Result<ModelSpec<f64>> {
        if self.dim == 0 {
            return Err(Error::InvalidModel("dim must be positive".into()));
        }
        let hamiltonian = from_pairs(self.dim, &self.hamiltonian, "hamiltonian")?;
        let jump_ops = self
            .jump_ops
            .iter()
            .map(|j| {
                Ok(JumpOperator {
                    label: j.label.clone(),
                    op: from_pairs(self.dim, &j.matrix, &j.label)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ModelSpec {
            dim: self.dim,
            hamiltonian,
            jump_ops,
            convention: self.convention,
        })
    }

    pub fn initial_state(&self) -> Result<Option<StateVector<f64>>> {
        self.initial_state
            .as_ref()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: v.len(),
                        context: "initial_state",
                    });
                }
                StateVector::normalize(v.iter().map(|p| C::new(p[0], p[1])).collect())
            })
            .transpose()
    }
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `t, re_00, im_00, re_01, …` with one row per grid time.
pub fn master_csv(traj: &MasterTrajectory<f64>) -> String {
    let d = traj.states.first().map_or(0, |s| s.dim());
    let mut out = String::from("t");
    for i in 0..d {
        for j in 0..d {
            let _ = write!(out, ",re_{i}{j},im_{i}{j}");
        }
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let _ = write!(out, "{t:.17e}");
        for z in s.matrix().as_slice() {
            let _ = write!(out, ",{:.17e},{:.17e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MasterJson {
    pub dim: usize,
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<[f64; 2]>>,
    pub max_trace_correction: f64,
}

pub fn master_json(traj: &MasterTrajectory<f64>) -> MasterJson {
    MasterJson {
        dim: traj.states.first().map_or(0, |s| s.dim()),
        dt: traj.grid.dt,
        horizon: traj.grid.horizon,
        times: traj.times.clone(),
        states: traj.states.iter().map(|s| to_pairs(s.matrix())).collect(),
        max_trace_correction: traj.max_trace_correction(),
    }
}

fn amps(v: &[C<f64>]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpJson {
    pub time: f64,
    pub channel: usize,
    pub label: String,
    pub pre_norm: f64,
    pub post_hash: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryJson {
    pub method: Method,
    pub seed: u64,
    pub trajectory: u64,
    pub normalized: bool,
    pub end_time: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<[f64; 2]>>,
    pub jumps: Vec<JumpJson>,
    pub diagnostics: Diagnostics,
}

/// JSON view of a record with every `stride`-th state (the last state is
/// always kept); jump events are never thinned.
pub fn trajectory_json(rec: &TrajectoryRecord<f64>, stride: usize) -> TrajectoryJson {
    let stride = stride.max(1);
    let n = rec.states.len();
    let keep: Vec<usize> = (0..n).filter(|&k| k % stride == 0 || k + 1 == n).collect();
    TrajectoryJson {
        method: rec.method,
        seed: rec.seed,
        trajectory: rec.trajectory,
        normalized: rec.normalized,
        end_time: rec.end_time,
        stride,
        times: keep.iter().map(|&k| rec.times[k]).collect(),
        states: keep.iter().map(|&k| amps(&rec.states[k])).collect(),
        jumps: rec
            .jumps
            .iter()
            .map(|e| JumpJson {
                time: e.time,
                channel: e.channel,
                label: e.label.clone(),
                pre_norm: e.pre_norm,
                post_hash: e.post_hash.clone(),
            })
            .collect(),
        diagnostics: rec.diagnostics,
    }
}

/// `{channel index → [jump times]}` plus horizon and rate model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathJson {
    pub horizon: f64,
    pub rate_model: RateModel,
    pub jumps: BTreeMap<String, Vec<f64>>,
}

impl PathJson {
    pub fn from_path(p: &PoissonPath<f64>) -> Self {
        Self {
            horizon: p.horizon(),
            rate_model: p.rate_model(),
            jumps: p
                .all_jumps()
                .iter()
                .enumerate()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    pub fn to_path(&self) -> Result<PoissonPath<f64>> {
        let mut jumps = Vec::new();
        for (k, (key, v)) in self.jumps.iter().enumerate() {
            let idx: usize = key
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("path channel key {key:?} is not an index")))?;
            if idx >= self.jumps.len() {
                return Err(Error::InvalidArgument(format!("path channel {idx} out of range")));
            }
            let _ = k;
            if jumps.len() <= idx {
                jumps.resize(idx + 1, Vec::new());
            }
            jumps[idx] = v.clone();
        }
        PoissonPath::new(self.horizon, jumps, self.rate_model)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a configuration's canonical JSON form.
pub fn config_hash<S: Serialize>(cfg: &S) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: Option<u64>,
    /// Number of trajectories; substreams `(master_seed, 0..n)` were used.
    pub trajectories: Option<u64>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, master_seed: Option<u64>, trajectories: Option<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            config_hash,
            master_seed,
            trajectories,
            files: Vec::new(),
        }
    }

    /// Records a written file, relative to `dir`.
    pub fn add(&mut self, dir: &Path, file: &Path) -> Result<()> {
        let bytes = fs::read(file)?;
        let rel: PathBuf = file.strip_prefix(dir).map(Path::to_path_buf).unwrap_or_else(|_| file.to_path_buf());
        self.files.push(FileEntry {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn model_file_round_trip() {
        let m = models::driven_damped::<f64>(1.0, 0.5, 0.2);
        let psi = StateVector::basis(2, 1);
        let f = ModelFile::from_model(&m, Some(&psi));
        let text = serde_json::to_string(&f).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_model().unwrap(), m);
        assert_eq!(back.initial_state().unwrap().unwrap(), psi);
    }

    #[test]
    fn wrong_entry_count_is_a_model_error() {
        let f = ModelFile {
            dim: 2,
            hamiltonian: vec![[0.0, 0.0]; 3],
            jump_ops: vec![],
            convention: Convention::RawL,
            initial_state: None,
        };
        assert!(matches!(f.to_model(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn path_round_trip() {
        let p = PoissonPath::new(2.0, vec![vec![0.5, 1.5], vec![], vec![1.0]], RateModel::UnitRate).unwrap();
        let j = PathJson::from_path(&p);
        let back: PathJson = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back.to_path().unwrap(), p);
    }

    #[test]
    fn master_csv_header() {
        let m = models::amplitude_damping::<f64>(1.0);
        let rho = crate::state::DensityMatrix::pure(&StateVector::basis(2, 1));
        let traj = crate::master::integrate_master(&m, &rho, 0.1, 0.05).unwrap();
        let csv = master_csv(&traj);
        assert!(csv.starts_with("t,re_00,im_00,re_01,im_01,re_10,im_10,re_11,im_11\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn config_hash_is_stable() {
        #[derive(Serialize)]
        struct Cfg {
            a: u32,
        }
        assert_eq!(config_hash(&Cfg { a: 1 }).unwrap(), config_hash(&Cfg { a: 1 }).unwrap());
        assert_ne!(config_hash(&Cfg { a: 1 }).unwrap(), config_hash(&Cfg { a: 2 }).unwrap());
    }
}
