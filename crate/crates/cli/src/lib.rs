//! Subcommand implementations for the `floqmem` binary.
//!
//! Every command writes into a run directory:
//!
//! ```text
//! <out>/manifest.json     version, command, resolved config, file list
//! <out>/*.csv             top-level tables
//! <out>/details/          per-point tables and fit diagnostics
//! ```

use std::path::{Path, PathBuf};

use floqmem::analysis::{correspondence_report, sweep};
use floqmem::config::{LindbladModel, Solver};
use floqmem::floquet::{
    auto_n_max, find_crossings, floquet_solve, fourier_coefficients, quasienergy_csv, solve_grid,
    DriveSpec,
};
use floqmem::heom::heom_evolve;
use floqmem::lindblad::{
    build_degenerate, build_generic, build_nondegenerate, evolve as lindblad_evolve,
    relaxation_times, transition_frequency, DissipatorSpec,
};
use floqmem::output::{num, write_json, Csv};
use floqmem::qubit::from_basis;
use floqmem::{RunConfig, VERSION};
use serde_json::{json, Value};

pub mod plot;

/// Outcome of a command, mapped to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    PartialFailure,
}

/// Output directory bookkeeping.
pub struct Run {
    pub dir: PathBuf,
    command: String,
    config: RunConfig,
    files: Vec<String>,
}

impl Run {
    pub fn create(dir: &Path, command: &str, config: &RunConfig) -> floqmem::Result<Self> {
        std::fs::create_dir_all(dir.join("details"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: config.clone(),
            files: Vec::new(),
        })
    }

    fn header(&self, csv: Csv) -> Csv {
        csv.comment(VERSION)
            .comment(format!("command: {}", self.command))
            .comment(format!("config: {}", self.config.to_json()))
    }

    pub fn csv(&mut self, rel: &str, csv: Csv) -> floqmem::Result<()> {
        let csv = self.header(csv);
        csv.write(&self.dir.join(rel))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    /// Writes `body` wrapped with the version and config.
    pub fn json(&mut self, rel: &str, body: Value) -> floqmem::Result<()> {
        let doc = json!({
            "version": VERSION,
            "command": self.command,
            "config": self.config,
            "data": body,
        });
        write_json(&self.dir.join(rel), &doc)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn finish(mut self, status: Status, extra: Value) -> floqmem::Result<Status> {
        self.files.sort();
        let manifest = json!({
            "version": VERSION,
            "command": self.command,
            "config": self.config,
            "status": match status {
                Status::Ok => "ok",
                Status::PartialFailure => "partial_failure",
            },
            "files": self.files,
            "summary": extra,
        });
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(status)
    }
}

fn n_max_for(cfg: &RunConfig, drive: &DriveSpec) -> i32 {
    cfg.floquet.n_max.unwrap_or_else(|| auto_n_max(drive))
}

pub fn cmd_quasienergies(cfg: &RunConfig, out: &Path) -> floqmem::Result<Status> {
    let mut run = Run::create(out, "quasienergies", cfg)?;
    let grid = cfg.drive.grid();
    let sols = solve_grid(&cfg.drive.drive(), &grid, cfg.floquet.samples)?;
    run.csv("quasienergies.csv", quasienergy_csv(&sols))?;
    run.finish(Status::Ok, json!({ "points": grid.len() }))
}

pub fn cmd_coefficients(cfg: &RunConfig, out: &Path) -> floqmem::Result<Status> {
    let mut run = Run::create(out, "coefficients", cfg)?;
    let grid = cfg.drive.grid();
    let base = cfg.drive.drive();
    let tables = grid
        .iter()
        .map(|&a| {
            let d = base.with_amplitude(a);
            let sol = floquet_solve(&d, cfg.floquet.samples)?;
            fourier_coefficients(&sol, n_max_for(cfg, &d))
        })
        .collect::<floqmem::Result<Vec<_>>>()?;
    let mut summary = Csv::new(&[
        "Omega",
        "abs_c0_12",
        "abs_c1_11",
        "max_other_11",
        "parseval",
    ]);
    let width = digits(grid.len());
    for (k, (a, t)) in grid.iter().zip(&tables).enumerate() {
        summary.push_numbers(&[
            *a,
            t.get(0, 0, 1).norm(),
            t.get(1, 0, 0).norm(),
            t.max_excluding(0, 0, &[1, -1]),
            t.parseval_sum(),
        ]);
        let rel = format!("details/coefficients_{k:0width$}.csv");
        let table = t.to_csv().comment(format!("Omega = {}", num(*a)));
        run.csv(&rel, table)?;
    }
    run.csv("coefficients.csv", summary)?;
    run.finish(Status::Ok, json!({ "points": grid.len() }))
}

pub fn cmd_crossings(cfg: &RunConfig, out: &Path) -> floqmem::Result<Status> {
    let mut run = Run::create(out, "crossings", cfg)?;
    let found = find_crossings(&cfg.crossing_search())?;
    run.json(
        "crossings.json",
        json!({ "omega": cfg.drive.omega, "crossings": found }),
    )?;
    run.finish(Status::Ok, json!({ "crossings": found.len() }))
}

/// Dissipator selected by the `evolve` section.
pub fn lindblad_model(cfg: &RunConfig, drive: &DriveSpec) -> floqmem::Result<DissipatorSpec> {
    let sol = floquet_solve(drive, cfg.floquet.samples)?;
    let table = fourier_coefficients(&sol, n_max_for(cfg, drive))?;
    let e = &cfg.evolve;
    let c11 = e.c11.unwrap_or_else(|| table.get(1, 0, 0).norm());
    let model = match e.lindblad {
        LindbladModel::Auto if sol.gap() <= e.degeneracy_threshold => LindbladModel::Degenerate,
        LindbladModel::Auto => LindbladModel::NonDegenerate,
        m => m,
    };
    Ok(match model {
        LindbladModel::Generic => build_generic(&table, &sol, &cfg.bath, table.n_max, e.bin_tol),
        LindbladModel::Degenerate => build_degenerate(drive.omega, &cfg.bath, c11),
        _ => build_nondegenerate(
            transition_frequency(&table, &sol),
            drive.omega,
            &cfg.bath,
            c11,
            e.degeneracy_threshold,
        )?,
    })
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> floqmem::Result<Status> {
    let mut run = Run::create(out, "evolve", cfg)?;
    let drive = cfg.drive.drive();
    let sol = floquet_solve(&drive, cfg.floquet.samples)?;
    let e = &cfg.evolve;
    let period = drive.period();
    let m = e.dt_factor;
    let steps = (e.t_end / period * m as f64 + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * period / m as f64).collect();
    let rho0_f = e.rho0.matrix()?;
    let (traj, extra) = match e.solver {
        Solver::Heom => {
            let rho0 = from_basis(&rho0_f, &sol.basis());
            let (traj, diag) = heom_evolve(&drive, &cfg.bath, &rho0, &cfg.heom, &grid, Some(&sol))?;
            (traj, json!({ "heom": diag }))
        }
        Solver::Lindblad => {
            let spec = lindblad_model(cfg, &drive)?;
            let traj = lindblad_evolve(&spec, &rho0_f, &grid, Some(&sol))?;
            let times = relaxation_times(&spec).ok();
            (
                traj,
                json!({ "dissipator": spec, "relaxation_times": times }),
            )
        }
    };
    run.csv("trajectory.csv", traj.to_csv())?;
    let diag = traj.diagnostics();
    run.json(
        "details/metadata.json",
        json!({
            "trajectory": traj.metadata,
            "state_diagnostics": diag,
            "solver": extra,
            "quasienergies": sol.quasienergies,
        }),
    )?;
    run.finish(
        Status::Ok,
        json!({ "samples": grid.len(), "state_diagnostics": diag }),
    )
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> floqmem::Result<Status> {
    let mut run = Run::create(out, "sweep", cfg)?;
    let grid = cfg.drive.grid();
    let result = sweep(
        &cfg.drive.drive(),
        &grid,
        &cfg.bath,
        &cfg.sweep_settings(),
        &cfg.crossing_search(),
    )?;
    run.csv("sweep.csv", result.to_csv())?;
    let report = correspondence_report(&result);
    run.json("correspondence.json", serde_json::to_value(&report)?)?;
    run.json("failures.json", serde_json::to_value(&result.failures)?)?;
    let width = digits(grid.len());
    for p in result.points.iter().flatten() {
        let dir = format!("details/omega_{:0width$}", p.index);
        std::fs::create_dir_all(run.dir.join(&dir))?;
        let mut curve = Csv::new(&["t", "D"]);
        for (t, d) in p.curve.times.iter().zip(&p.curve.values) {
            curve.push_numbers(&[*t, *d]);
        }
        run.csv(
            &format!("{dir}/trace_distance.csv"),
            curve.comment(format!("Omega = {}", num(p.amplitude))),
        )?;
        run.json(
            &format!("{dir}/fit.json"),
            json!({
                "Omega": p.amplitude,
                "nonmarkovianity": p.nonmarkovianity,
                "sigma_x_axis": p.sigma_x_axis,
                "axis_angle_deg": p.axis_angle_deg,
                "fit": p.fit,
                "lab_fit": p.lab_fit,
                "tau_estimate": p.tau_estimate,
                "horizon": p.horizon,
                "nm_horizon": p.nm_horizon,
                "heom": p.heom,
            }),
        )?;
    }
    if cfg.wants_json() {
        let mut slim = result.clone();
        slim.points.clear();
        run.json("sweep.json", serde_json::to_value(&slim)?)?;
    }
    let status = if result.failures.is_empty() {
        Status::Ok
    } else {
        if result.failures.len() == grid.len() {
            log::error!("every sweep point failed");
        }
        Status::PartialFailure
    };
    run.finish(
        status,
        json!({
            "points": grid.len(),
            "failures": result.failures.len(),
            "N_peaks": result.n_peaks,
            "tau_peaks": result.tau_peaks,
            "crossings": result.crossings,
            "one_to_one": report.one_to_one(),
        }),
    )
}
