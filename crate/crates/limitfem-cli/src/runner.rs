//! Experiment execution and output layout.
//!
//! Each run writes into `<outdir>/<domain>_case<n>_<model>/`:
//! `fields.vtk`, optional `fields.csv`, `profile_<model>.csv` on the slit
//! domain, and a machine-readable `summary.txt`.

use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use limitfem::postproc::{
    recover_fields, sample_reference_line, write_profile_csv, write_vtk, RecoveredFields,
};
use limitfem::solver::{run_experiment, ExperimentResult};
use limitfem::{mms, Domain, Model, TemperatureCase};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

struct RunOutput {
    dir: PathBuf,
    result: ExperimentResult,
    wall_time_s: f64,
}

fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let result = run_experiment(
        cfg.domain,
        cfg.temperature_case,
        cfg.model,
        cfg.refinements,
        &cfg.material(),
        &cfg.newton(),
    )
    .with_context(|| format!("experiment {}", cfg.run_dir_name()))?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let dir = cfg.outdir.join(cfg.run_dir_name());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let params = match cfg.model {
        Model::Linear => cfg.material().with_beta(0.0),
        Model::Nonlinear => cfg.material(),
    };
    let fields = recover_fields(&result.mesh, &params, &result.state, false);

    if cfg.export_vtk {
        let mut file = fs::File::create(dir.join("fields.vtk"))?;
        write_vtk(&result.mesh, &fields.named(), &mut file)?;
    }
    if cfg.export_csv {
        let mut file = fs::File::create(dir.join("fields.csv"))?;
        write_fields_csv(&result, &fields, &mut file)?;
    }
    if cfg.export_profile && cfg.domain == Domain::Example2 {
        // sample at the grid nodes on the reference line
        let n_samples = (1usize << cfg.refinements) / 2 + 1;
        for (name, values) in [("T_yy", &fields.t_yy), ("eps_yy", &fields.eps_yy)] {
            let profile =
                sample_reference_line(&result.mesh, values, n_samples, cfg.model)
                    .context("sampling reference line")?;
            let path = dir.join(format!("profile_{}_{}.csv", name, cfg.model.as_str()));
            let mut file = fs::File::create(path)?;
            write_profile_csv(&profile, &mut file)?;
        }
    }

    let summary = summary_text(cfg, &result, wall_time_s);
    fs::write(dir.join("summary.txt"), &summary)?;
    fs::write(dir.join("config.txt"), cfg.to_config_string())?;

    Ok(RunOutput {
        dir,
        result,
        wall_time_s,
    })
}

fn write_fields_csv<W: Write>(
    result: &ExperimentResult,
    fields: &RecoveredFields,
    w: &mut W,
) -> Result<()> {
    writeln!(w, "node,x,y,theta,u_x,u_y,T_xx,T_yy,T_xy,eps_xx,eps_yy,eps_xy")?;
    for (i, n) in result.mesh.nodes.iter().enumerate() {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            i,
            n.x,
            n.y,
            fields.theta[i],
            fields.u_x[i],
            fields.u_y[i],
            fields.t_xx[i],
            fields.t_yy[i],
            fields.t_xy[i],
            fields.eps_xx[i],
            fields.eps_yy[i],
            fields.eps_xy[i],
        )?;
    }
    Ok(())
}

fn summary_text(cfg: &RunConfig, result: &ExperimentResult, wall_time_s: f64) -> String {
    let history = result
        .state
        .newton_history
        .iter()
        .map(|r| format!("{r:e}"))
        .collect::<Vec<_>>()
        .join(",");
    let final_residual = result
        .state
        .newton_history
        .last()
        .map(|r| format!("{r:e}"))
        .unwrap_or_else(|| "nan".into());
    format!(
        "domain = {}\ncase = {}\nmodel = {}\nrefinements = {}\nn_nodes = {}\nn_cells = {}\nconverged = {}\niterations = {}\nfinal_residual = {}\nresidual_history = {}\nwall_time_s = {:.3}\ncertificate_max_beta_energy_norm = {:e}\n",
        cfg.domain_str(),
        cfg.case_number(),
        cfg.model.as_str(),
        cfg.refinements,
        result.mesh.n_nodes(),
        result.mesh.n_cells(),
        result.state.converged,
        result.state.newton_history.len(),
        final_residual,
        history,
        wall_time_s,
        result.certificate,
    )
}

pub fn run_one(cfg: RunConfig) -> Result<()> {
    let out = execute(&cfg)?;
    println!(
        "{}: converged = {} in {} iterations, certificate = {:.3e}, outputs in {}",
        cfg.run_dir_name(),
        out.result.state.converged,
        out.result.state.newton_history.len(),
        out.result.certificate,
        out.dir.display()
    );
    if !out.result.state.converged {
        eprintln!("residual history: {:?}", out.result.state.newton_history);
        bail!("Newton did not reach tolerance {}", cfg.tol);
    }
    Ok(())
}

pub fn run_mms(cycles: usize, outdir: Option<PathBuf>) -> Result<()> {
    let rows = mms::convergence_study(cycles).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("cycle      h            L2 error        rate");
    for r in &rows {
        match r.rate {
            Some(rate) => println!("{:>5}  {:<10}  {:.12e}  {:.4}", r.cycle, r.h, r.l2_error, rate),
            None => println!("{:>5}  {:<10}  {:.12e}     -", r.cycle, r.h, r.l2_error),
        }
    }
    let dir = outdir
        .or_else(|| std::env::var("LIMITFEM_OUTDIR").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    let path = dir.join("convergence.csv");
    let mut file = fs::File::create(&path)?;
    mms::write_convergence_csv(&rows, &mut file)?;
    println!("table written to {}", path.display());
    Ok(())
}

pub fn run_sweep(base: RunConfig) -> Result<()> {
    let combos: Vec<(Domain, TemperatureCase, Model)> = [
        Domain::Example1,
        Domain::Example2,
    ]
    .into_iter()
    .flat_map(|d| {
        [TemperatureCase::Case1, TemperatureCase::Case2]
            .into_iter()
            .flat_map(move |c| {
                [Model::Linear, Model::Nonlinear]
                    .into_iter()
                    .map(move |m| (d, c, m))
            })
    })
    .collect();

    let queue: Mutex<Vec<usize>> = Mutex::new((0..combos.len()).rev().collect());
    let results: Mutex<Vec<Option<(String, Result<RunOutput>)>>> =
        Mutex::new((0..combos.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..base.workers.min(combos.len()) {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop();
                let Some(i) = next else { break };
                let (domain, case, model) = combos[i];
                let mut cfg = base.clone();
                cfg.domain = domain;
                cfg.temperature_case = case;
                cfg.model = model;
                if model == Model::Linear {
                    cfg.beta = 0.0;
                }
                let name = cfg.run_dir_name();
                let out = execute(&cfg);
                results.lock().unwrap()[i] = Some((name, out));
            });
        }
    });

    fs::create_dir_all(&base.outdir)?;
    let mut manifest = String::from("run converged iterations final_residual dir\n");
    let mut failures = 0usize;
    for slot in results.into_inner().unwrap() {
        let (name, outcome) = slot.expect("every combo ran");
        match outcome {
            Ok(out) => {
                let converged = out.result.state.converged;
                if !converged {
                    failures += 1;
                }
                manifest.push_str(&format!(
                    "{} {} {} {} {}\n",
                    name,
                    converged,
                    out.result.state.newton_history.len(),
                    out.result
                        .state
                        .newton_history
                        .last()
                        .map(|r| format!("{r:e}"))
                        .unwrap_or_else(|| "nan".into()),
                    out.dir.display(),
                ));
                println!(
                    "{name}: converged = {converged} ({} iterations, {:.1}s)",
                    out.result.state.newton_history.len(),
                    out.wall_time_s
                );
            }
            Err(err) => {
                failures += 1;
                manifest.push_str(&format!("{name} error - - -\n"));
                eprintln!("{name}: {err:#}");
            }
        }
    }
    let manifest_path = base.outdir.join("manifest.txt");
    fs::write(&manifest_path, manifest)?;
    println!("manifest written to {}", manifest_path.display());
    if failures > 0 {
        bail!("{failures} of {} runs failed or did not converge", combos.len());
    }
    Ok(())
}
