use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatflow_core::flow::read_snapshot;
use heatflow_core::lab::{gauge_from_snapshot, hardy_from_snapshot, load_config, run_scenario, verify_suite};
use heatflow_core::mesh::DiskMesh;
use heatflow_core::{Error, Result};

#[derive(Parser)]
#[command(name = "heatflow", version, about = "Harmonic map heat flow lab on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every config in a directory; exit 0 iff all gating checks pass.
    Verify {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write per-scenario outputs and `suite.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gauge diagnostics for a stored snapshot.
    Gauge { snapshot: PathBuf, config: PathBuf },
    /// h¹ norm of the energy density of a stored snapshot.
    Hardy { snapshot: PathBuf, config: PathBuf },
    /// Write the mesh at a refinement level.
    Mesh {
        #[arg(long)]
        refinement: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(config: &Path, out: &Path) -> Result<bool> {
    let cfg = load_config(config)?;
    let outcome = run_scenario(&cfg)?;
    outcome.write(out)?;
    let r = &outcome.report;
    if !r.feasibility.feasible {
        println!("infeasible: {}", r.feasibility.reason.as_deref().unwrap_or("unknown"));
    }
    for c in &r.checks {
        let verdict = serde_json::to_value(c.verdict)?;
        let name = serde_json::to_value(c.check)?;
        match &c.reason {
            Some(why) => println!("{:<16} {:<8} {why}", name.as_str().unwrap_or(""), verdict.as_str().unwrap_or("")),
            None => println!("{:<16} {}", name.as_str().unwrap_or(""), verdict.as_str().unwrap_or("")),
        }
    }
    println!("report written to {}", out.join("report.json").display());
    Ok(cfg.exploratory || (r.passed && r.feasibility.feasible))
}

fn verify(dir: &Path, jobs: usize, out: Option<&Path>) -> Result<bool> {
    let suite = verify_suite(dir, jobs, out)?;
    for e in &suite.entries {
        let status = if e.passed {
            "pass"
        } else if e.exploratory {
            "explore"
        } else {
            "FAIL"
        };
        print!("{status:<8} {}", e.config);
        if !e.failures.is_empty() {
            print!("  [{}]", e.failures.join(", "));
        }
        if let Some(err) = &e.error {
            print!("  {err}");
        }
        println!();
    }
    print_json(&suite.constants)?;
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("suite.json"), serde_json::to_string_pretty(&suite)? + "\n")?;
    }
    Ok(suite.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Verify { dir, jobs, out } => verify(dir, *jobs, out.as_deref()),
        Command::Gauge { snapshot, config } => (|| {
            let cfg = load_config(config)?;
            let (t, u) = read_snapshot(snapshot)?;
            let (mesh, snap) = gauge_from_snapshot(&cfg, t, &u)?;
            print_json(&serde_json::json!({ "mesh": mesh, "gauge": snap }))?;
            Ok(snap.failures(mesh.h).is_empty())
        })(),
        Command::Hardy { snapshot, config } => (|| {
            let cfg = load_config(config)?;
            let (t, u) = read_snapshot(snapshot)?;
            print_json(&hardy_from_snapshot(&cfg, t, &u)?)?;
            Ok(true)
        })(),
        Command::Mesh { refinement, out } => (|| {
            let mesh = DiskMesh::build(*refinement)?;
            mesh.write(out)?;
            println!("{} vertices, {} triangles, h = {}", mesh.num_vertices(), mesh.num_triangles(), mesh.h());
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Usage(_) | Error::Config(_) => 2,
                _ => 3,
            })
        }
    }
}
