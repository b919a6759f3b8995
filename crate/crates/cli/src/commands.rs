use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use unravel_core::ensemble::{compare as compare_gate, density_ensemble, map_indexed, simulate, SimConfig, Simulator};
use unravel_core::grw::{build_grw_family, gaussian_packet, grw_localization_experiment, hopping_hamiltonian, tune_width, GrwRun};
use unravel_core::io::{
    config_hash, master_csv, master_json, read_model_file, sha256_hex, trajectory_json, write_json, Manifest, PathJson,
};
use unravel_core::master::integrate_master;
use unravel_core::model::validate_model;
use unravel_core::pdp::{replay_normalized, simulate_linear_on_path, LinearOptions};
use unravel_core::poisson::sample_unit_poisson;
use unravel_core::{Density, Error, Method, Result, State};

use crate::config::Resolved;

const GRW_WARN_DEFECT: f64 = 0.05;

struct Out {
    dir: PathBuf,
    manifest: Manifest,
}

impl Out {
    fn new(dir: &Path, manifest: Manifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.manifest.add(&self.dir, &p)
    }

    fn json<S: Serialize + ?Sized>(&mut self, name: &str, v: &S) -> Result<()> {
        let p = self.dir.join(name);
        write_json(&p, v)?;
        self.manifest.add(&self.dir, &p)
    }

    fn finish(self) -> Result<()> {
        write_json(&self.dir.join("manifest.json"), &self.manifest)
    }
}

fn sim_config(r: &Resolved) -> SimConfig {
    SimConfig {
        method: r.method,
        horizon: r.horizon,
        dt: r.dt,
        seed: r.seed,
        stop_after_jumps: None,
    }
}

pub fn validate(path: &Path) -> Result<bool> {
    let model = read_model_file(path)?.to_model()?;
    let report = validate_model(&model);
    print!("{report}");
    Ok(report.ok)
}

pub fn master(r: &Resolved) -> Result<bool> {
    let traj = integrate_master(&r.model, &Density::pure(&r.psi0), r.horizon, r.dt)?;
    let mut out = Out::new(&r.out_dir, Manifest::new("master", r.hash("master", json!(null))?, None, None))?;
    out.text("master.csv", &master_csv(&traj))?;
    out.json("master.json", &master_json(&traj))?;
    out.finish()?;
    println!(
        "master: {} steps, max trace correction {:.3e}, written to {}",
        traj.times.len() - 1,
        traj.max_trace_correction(),
        r.out_dir.display()
    );
    Ok(true)
}

pub fn trajectory(r: &Resolved, index: u64, dump_path: bool) -> Result<bool> {
    let rec = simulate(&r.model, &r.psi0, &sim_config(r), index)?;
    let extra = json!({ "index": index, "dump_path": dump_path });
    let mut out = Out::new(
        &r.out_dir,
        Manifest::new("trajectory", r.hash("trajectory", extra)?, Some(r.seed), Some(1)),
    )?;
    out.json("trajectory.json", &trajectory_json(&rec, r.stride))?;
    if dump_path {
        out.json("path.json", &PathJson::from_path(&rec.path()?))?;
    }
    out.finish()?;
    println!(
        "trajectory {index} ({}): {} jumps, end time {}",
        r.method,
        rec.jumps.len(),
        rec.end_time
    );
    Ok(true)
}

#[derive(Serialize)]
struct Checkpoint {
    time: f64,
    mean: Vec<[f64; 2]>,
    populations: Vec<f64>,
    population_stderr: Vec<f64>,
    trace_distance_stderr: f64,
}

pub fn ensemble(r: &Resolved, workers: usize, save_trajectories: bool) -> Result<bool> {
    let cfg = sim_config(r);
    let ens = density_ensemble(&r.model, &r.psi0, &cfg, r.trajectories, workers, &r.checkpoints)?;
    let n = r.trajectories as f64;
    let d = r.model.dim;
    let cps: Vec<Checkpoint> = (0..r.checkpoints.len())
        .map(|k| Checkpoint {
            time: r.checkpoints[k],
            mean: ens.mean[k].as_slice().iter().map(|z| [z.re, z.im]).collect(),
            populations: (0..d).map(|i| ens.mean[k][(i, i)].re).collect(),
            population_stderr: (0..d).map(|i| (ens.var_re[k][i * d + i] / n).sqrt()).collect(),
            trace_distance_stderr: ens.trace_distance_stderr(k),
        })
        .collect();
    let extra = json!({ "save_trajectories": save_trajectories });
    let mut out = Out::new(
        &r.out_dir,
        Manifest::new("ensemble", r.hash("ensemble", extra)?, Some(r.seed), Some(r.trajectories)),
    )?;
    let mut csv = String::from("t");
    for i in 0..d {
        let _ = write!(csv, ",p_{i},stderr_{i}");
    }
    csv.push('\n');
    for c in &cps {
        let _ = write!(csv, "{:.17e}", c.time);
        for (p, s) in c.populations.iter().zip(&c.population_stderr) {
            let _ = write!(csv, ",{p:.17e},{s:.17e}");
        }
        csv.push('\n');
    }
    out.text("ensemble.csv", &csv)?;
    out.json(
        "ensemble.json",
        &json!({
            "method": r.method,
            "trajectories": r.trajectories,
            "seed": r.seed,
            "checkpoints": cps,
        }),
    )?;
    if save_trajectories {
        let sim = Simulator::new(&r.model, &cfg)?;
        let lines = map_indexed(r.trajectories, workers, |i| {
            let rec = sim.run(&r.psi0, i)?;
            Ok(serde_json::to_string(&trajectory_json(&rec, r.stride))?)
        })?;
        out.text("trajectories.jsonl", &(lines.join("\n") + "\n"))?;
    }
    out.finish()?;
    for c in &cps {
        println!("t = {:<8} populations {:?} ± {:?}", c.time, c.populations, c.population_stderr);
    }
    Ok(true)
}

pub fn compare(r: &Resolved, workers: usize, master_model: Option<&Path>) -> Result<bool> {
    let (mmodel, mhash) = match master_model {
        Some(p) => (read_model_file(p)?.to_model()?, Some(sha256_hex(&fs::read(p)?))),
        None => (r.model.clone(), None),
    };
    let master = integrate_master(&mmodel, &Density::pure(&r.psi0), r.horizon, r.dt)?;
    let ens = density_ensemble(&r.model, &r.psi0, &sim_config(r), r.trajectories, workers, &r.checkpoints)?;
    let report = compare_gate(&master, &ens)?;
    let extra = json!({ "master_model_sha256": mhash });
    let mut out = Out::new(
        &r.out_dir,
        Manifest::new("compare", r.hash("compare", extra)?, Some(r.seed), Some(r.trajectories)),
    )?;
    out.json("compare.json", &report)?;
    out.finish()?;
    println!("{report}");
    Ok(report.pass)
}

pub struct GrwArgs {
    pub sites: usize,
    pub grid: usize,
    pub width_a: Option<f64>,
    pub box_bounds: (f64, f64),
    pub trajectories: u64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub hopping: f64,
    pub packet_center: f64,
    pub packet_sigma: f64,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct GrwHashed {
    sites: usize,
    grid: usize,
    width_a: Option<f64>,
    box_bounds: (f64, f64),
    trajectories: u64,
    horizon: f64,
    dt: f64,
    seed: u64,
    hopping: f64,
    packet_center: f64,
    packet_sigma: f64,
}

pub fn grw_demo(g: &GrwArgs, workers: usize) -> Result<bool> {
    let a = match g.width_a {
        Some(a) => a,
        None => tune_width(g.sites, g.box_bounds, g.grid)?.0,
    };
    let family = build_grw_family::<f64>(g.sites, g.box_bounds, g.grid, a)?;
    if family.defect > GRW_WARN_DEFECT {
        eprintln!(
            "warning: completeness defect {:.3e} exceeds {GRW_WARN_DEFECT}",
            family.defect
        );
    }
    let psi0: State = gaussian_packet(&family.sites, g.packet_center, g.packet_sigma)?;
    let run = GrwRun {
        horizon: g.horizon,
        dt: g.dt,
        trajectories: g.trajectories,
        seed: g.seed,
        workers,
    };
    let rep = grw_localization_experiment(&family, hopping_hamiltonian(g.sites, g.hopping), &psi0, &run)?;
    let hash = config_hash(&GrwHashed {
        sites: g.sites,
        grid: g.grid,
        width_a: g.width_a,
        box_bounds: g.box_bounds,
        trajectories: g.trajectories,
        horizon: g.horizon,
        dt: g.dt,
        seed: g.seed,
        hopping: g.hopping,
        packet_center: g.packet_center,
        packet_sigma: g.packet_sigma,
    })?;
    let mut out = Out::new(&g.out_dir, Manifest::new("grw-demo", hash, Some(g.seed), Some(g.trajectories)))?;

    let jumped: Vec<_> = rep.per_trajectory.iter().filter(|t| t.jumped).collect();
    let series = |f: &dyn Fn(&unravel_core::grw::GrwTrajectory) -> f64| {
        unravel_core::stats::mean_stderr(&jumped.iter().map(|t| f(t)).collect::<Vec<_>>())
    };
    let mut csv = String::from("observable,mean,stderr\n");
    for (name, (m, s)) in [
        ("position_mean_before", series(&|t| t.mean_before)),
        ("position_mean_after", series(&|t| t.mean_after)),
        ("position_variance_before", series(&|t| t.var_before)),
        ("position_variance_after", series(&|t| t.var_after)),
        ("jump_time", series(&|t| t.time.unwrap_or(f64::NAN))),
    ] {
        let _ = writeln!(csv, "{name},{m:.17e},{s:.17e}");
    }
    out.text("grw_series.csv", &csv)?;
    let mut hist = String::from("channel,center,observed,expected_probability\n");
    let total: f64 = rep.expected.iter().sum();
    for (k, (o, e)) in rep.histogram.iter().zip(&rep.expected).enumerate() {
        let _ = writeln!(hist, "{k},{:.17e},{o},{:.17e}", family.centers[k], e / total);
    }
    out.text("grw_histogram.csv", &hist)?;
    out.json(
        "grw.json",
        &json!({
            "sites": rep.sites,
            "centers": rep.centers,
            "a": rep.a,
            "defect": rep.defect,
            "trajectories": rep.trajectories,
            "jumped": rep.jumped,
            "variance_reduced_fraction": rep.variance_reduced_fraction,
            "mean_var_before": rep.mean_var_before,
            "mean_var_after": rep.mean_var_after,
            "variance_ratio": rep.mean_var_after / rep.mean_var_before,
            "chi_square": rep.chi_square,
        }),
    )?;
    out.finish()?;

    println!("a = {:.6e}, completeness defect {:.3e}", rep.a, rep.defect);
    println!(
        "{} of {} trajectories jumped; variance reduced in {:.4} of them",
        rep.jumped, rep.trajectories, rep.variance_reduced_fraction
    );
    let chi_ok = match &rep.chi_square {
        Some(c) => {
            println!("jump-location chi-square {:.3} on {} dof, p = {:.4}", c.statistic, c.dof, c.p_value);
            c.p_value > 0.01
        }
        None => {
            println!("jump-location chi-square skipped (H ≠ 0)");
            true
        }
    };
    Ok(chi_ok)
}

pub fn paths_dump(r: &Resolved, index: u64) -> Result<bool> {
    let path = sample_unit_poisson::<f64>(r.model.channels(), r.horizon, r.seed, index)?;
    let extra = json!({ "index": index });
    let mut out = Out::new(&r.out_dir, Manifest::new("paths-dump", r.hash("paths-dump", extra)?, Some(r.seed), Some(1)))?;
    out.json("path.json", &PathJson::from_path(&path))?;
    out.finish()?;
    println!("{} jumps over {} channels", path.total_jumps(), path.channels());
    Ok(true)
}

pub fn paths_replay(r: &Resolved, path_file: &Path, method: Method) -> Result<bool> {
    let pj: PathJson = serde_json::from_str(&fs::read_to_string(path_file)?)?;
    let path = pj.to_path()?;
    if path.channels() != r.model.channels() {
        return Err(Error::DimensionMismatch {
            expected: r.model.channels(),
            found: path.channels(),
            context: "path channels vs model jump operators",
        });
    }
    let opts = LinearOptions {
        dt: r.dt,
        record_fine: false,
    };
    let rec = match method {
        Method::Linear => simulate_linear_on_path(&r.model, &r.psi0, &path, &opts)?,
        Method::Replay => replay_normalized(&r.model, &r.psi0, &path, &opts)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "replay supports linear or replay, not {other}"
            )))
        }
    };
    let extra = json!({ "path_sha256": sha256_hex(&fs::read(path_file)?), "replay": method });
    let mut out = Out::new(&r.out_dir, Manifest::new("paths-replay", r.hash("paths-replay", extra)?, None, Some(1)))?;
    out.json("trajectory.json", &trajectory_json(&rec, r.stride))?;
    out.finish()?;
    println!("replayed {} jumps", rec.jumps.len());
    Ok(true)
}
