//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use extito_core::harness::{convergence_table, run_identity, CheckpointStats, ExperimentConfig, Identity};
use extito_core::mc;
use log::info;

use crate::config::{experiment_config, load_config, Overrides};
use crate::report::{write_report, RunManifest};
use crate::store::{export_csv, store_paths, CSV_FILE};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "extito", version, about = "Simulate paths and check extended Ito identities on them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSVs, path stores and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed base; overrides the config and EXTITO_SEED_BASE.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of paths per step size.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Step size; repeat for a refinement list (coarsest first).
    #[arg(long, global = true)]
    pub dt: Vec<f64>,
    /// Only report errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate paths and write one path store per step size.
    Simulate {
        /// Also write a CSV dump of every path.
        #[arg(long)]
        export_csv: bool,
    },
    VerifyIto,
    VerifyTanaka,
    VerifyOccupation,
    VerifyLocaltime,
    VerifyMultidim,
    /// Convergence table over the step-size list for every applicable identity.
    Table,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::VerifyIto => "verify-ito",
            Command::VerifyTanaka => "verify-tanaka",
            Command::VerifyOccupation => "verify-occupation",
            Command::VerifyLocaltime => "verify-localtime",
            Command::VerifyMultidim => "verify-multidim",
            Command::Table => "table",
        }
    }

    fn identity(&self) -> Option<Identity> {
        Some(match self {
            Command::VerifyIto => Identity::Ito,
            Command::VerifyTanaka => Identity::Tanaka,
            Command::VerifyOccupation => Identity::Occupation,
            Command::VerifyLocaltime => Identity::LocalTime,
            Command::VerifyMultidim => Identity::Multidim,
            _ => return None,
        })
    }
}

fn dt_tag(dt: f64) -> String {
    format!("dt_{dt:e}")
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn say_rows(cli: &Cli, rows: &[CheckpointStats]) {
    for r in rows {
        say(
            cli,
            format!(
                "  {:<10} dt={:<8e} t={:<6} mean={:<12.4e} se={:<12.4e} max={:<12.4e} {}",
                r.identity.name(),
                r.dt,
                r.t,
                r.mean_residual,
                r.se_residual,
                r.max_abs_residual,
                if r.pass { "pass" } else { "FAIL" }
            ),
        );
    }
}

/// Parses the config, runs the command and returns the process exit code.
///
/// Invalid configs, failed preconditions and engine errors give
/// [`EXIT_CONFIG`]; a completed run gives [`EXIT_PASS`] or [`EXIT_FAIL`].
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("extito: error: {e:#}");
            EXIT_CONFIG
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let loaded = load_config(cli.config.as_deref())?;
    let overrides = Overrides { seed: cli.seed, paths: cli.paths, dt: cli.dt.clone() };
    let cfg = experiment_config(&loaded, &overrides)?;
    if cli.command == Command::Table && cfg.dts.len() < 2 {
        bail!("table: >= 2 dt values required, got {}", cfg.dts.len());
    }
    std::fs::create_dir_all(&cli.out)?;
    let mut manifest = RunManifest::new(cli.command.name(), &loaded.hash, cfg.seed_base);
    let started = Instant::now();
    let ok = match cli.command {
        Command::Simulate { export_csv } => simulate(cli, &cfg, export_csv, &mut manifest)?,
        Command::Table => table(cli, &cfg, &mut manifest)?,
        c => verify(cli, &cfg, c.identity().expect("verify command"), &mut manifest)?,
    };
    manifest.timings_ms.insert("total".into(), started.elapsed().as_millis());
    manifest.write(&cli.out)?;
    say(cli, format!("{}: {}", cli.command.name(), if ok { "PASS" } else { "FAIL" }));
    Ok(ok)
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

fn simulate(cli: &Cli, cfg: &ExperimentConfig, csv: bool, manifest: &mut RunManifest) -> Result<bool> {
    for &dt in &cfg.dts {
        let t0 = Instant::now();
        let paths = mc::try_map_seeds(cfg.seed_base, cfg.n_paths, |seed| {
            mc::sample_path(&cfg.spec, cfg.horizon, dt, seed, cfg.start)
        })?;
        let sim_ms = t0.elapsed().as_millis();
        let dir = cli.out.join(dt_tag(dt));
        let t1 = Instant::now();
        let files = store_paths(&dir, &cfg.spec, dt, cfg.horizon, &paths)?;
        manifest.timings_ms.insert(format!("simulate {}", dt_tag(dt)), sim_ms);
        manifest.timings_ms.insert(format!("store {}", dt_tag(dt)), t1.elapsed().as_millis());
        manifest.outputs.extend(files.iter().map(|f| rel(&cli.out, f)));
        if csv {
            let p = dir.join(CSV_FILE);
            export_csv(&p, &paths)?;
            manifest.outputs.push(rel(&cli.out, &p));
        }
        info!("stored {} paths at dt={dt:e} in {}", paths.len(), dir.display());
        say(cli, format!("  dt={dt:e}: {} paths -> {}", paths.len(), dir.display()));
    }
    manifest.results.insert("simulate".into(), true);
    Ok(true)
}

/// Runs one identity over every step size; the verdict is read at the finest.
fn verify(cli: &Cli, cfg: &ExperimentConfig, identity: Identity, manifest: &mut RunManifest) -> Result<bool> {
    let mut rows = Vec::new();
    let mut finest = true;
    for (j, &dt) in cfg.dts.iter().enumerate() {
        let t0 = Instant::now();
        let run = run_identity(cfg, identity, dt)?;
        manifest.timings_ms.insert(format!("{} {}", identity.name(), dt_tag(dt)), t0.elapsed().as_millis());
        if j + 1 == cfg.dts.len() {
            finest = run.pass();
        }
        rows.extend(run.stats);
    }
    say_rows(cli, &rows);
    let p = cli.out.join(format!("{}.csv", identity.name()));
    write_report(&p, &rows)?;
    manifest.outputs.push(rel(&cli.out, &p));
    manifest.results.insert(identity.name().into(), finest);
    Ok(finest)
}

fn table(cli: &Cli, cfg: &ExperimentConfig, manifest: &mut RunManifest) -> Result<bool> {
    let identities: &[Identity] = if cfg.spec.dim() == 2 {
        &[Identity::Multidim]
    } else {
        &[Identity::Ito, Identity::Tanaka, Identity::Occupation, Identity::LocalTime]
    };
    let mut rows = Vec::new();
    let mut ok = true;
    for &id in identities {
        let t0 = Instant::now();
        let t = convergence_table(cfg, id)?;
        manifest.timings_ms.insert(format!("table {}", id.name()), t0.elapsed().as_millis());
        let last_pass = t.rows.last().is_some_and(|r| r.pass);
        say(cli, format!("{}:\n{}", id.name(), t.render()));
        manifest.results.insert(id.name().into(), last_pass);
        manifest.trends.insert(id.name().into(), t.trend_ok);
        ok &= last_pass && t.trend_ok;
        rows.extend(t.rows);
    }
    let p = cli.out.join("table.csv");
    write_report(&p, &rows)?;
    manifest.outputs.push(rel(&cli.out, &p));
    Ok(ok)
}
