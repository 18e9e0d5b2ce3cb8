use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use wbweno::experiments::{
    run_convergence, run_example, run_single, run_wb_check, ExampleArtifacts,
};
use wbweno::io::{write_json, write_report, write_series, Manifest};
use wbweno::{Order, RunConfig};

/// Well-balanced central-upwind and A-WENO solvers for nozzle flow and
/// two-layer shallow water.
#[derive(Debug, Parser)]
#[command(name = "wbweno", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scheme order; both orders when omitted.
    #[arg(long, global = true, value_parser = parse_order)]
    order: Option<u32>,
    #[arg(long, global = true)]
    dx: Option<f64>,
    #[arg(long, global = true)]
    t_final: Option<f64>,
    /// Output directory; each command writes into a subdirectory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied over the config file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One simulation of an example at a single order (5 unless --order).
    Run { example: u32 },
    /// The full recipe of an example: both orders, references, checks.
    Example { example: u32 },
    /// Example 3 mesh sweep and Runge tables.
    Convergence,
    /// Steady-state preservation runs of Example 1, 2, 4 or 5.
    WbCheck { example: u32 },
}

fn parse_order(s: &str) -> Result<u32, String> {
    match s {
        "2" => Ok(2),
        "5" => Ok(5),
        _ => Err(format!("order must be 2 or 5, got {s}")),
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => String::new(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(o) = cli.order {
        overrides.push(format!("run.order={o}"));
    }
    if let Some(dx) = cli.dx {
        overrides.push(format!("mesh.dx={dx:e}"));
    }
    if let Some(t) = cli.t_final {
        overrides.push(format!("time.t_final={t:e}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("run.out={}", toml_string(&out.to_string_lossy())));
    }
    let example = match cli.command {
        Command::Run { example } | Command::Example { example } | Command::WbCheck { example } => {
            Some(example)
        }
        Command::Convergence => None,
    };
    if let Some(n) = example {
        overrides.push(format!("run.example={n}"));
    }
    let cfg = RunConfig::with_overrides(&text, &overrides).map_err(|e| match &cli.config {
        Some(p) => anyhow::anyhow!("{}: {e}", p.display()),
        None => anyhow::anyhow!("{e}"),
    })?;
    Ok(cfg)
}

fn toml_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_outputs(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    art: &ExampleArtifacts,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Manifest::new(command, cfg)?;
    for s in &art.series {
        let name = format!("{}.csv", s.name);
        write_series(s, &dir.join(&name))?;
        manifest.outputs.push(name);
    }
    write_report(&art.report, &dir.join("report.json"))?;
    manifest.outputs.push("report.json".into());
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(())
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = build_config(cli)?;
    let opts = cfg.options();
    let order = cfg.run.order;
    let (label, art) = match cli.command {
        Command::Run { example } => {
            let order = order.unwrap_or(Order::Fifth);
            (
                format!("run{example}_o{order}"),
                run_single(example, order, &opts)?,
            )
        }
        Command::Example { example } => (
            format!("example{example}"),
            run_example(example, order, &opts)?,
        ),
        Command::Convergence => ("convergence".to_string(), run_convergence(order, &opts)?),
        Command::WbCheck { example } => {
            if matches!(example, 3 | 6) {
                bail!("example {example} has no steady state; choose 1, 2, 4 or 5");
            }
            (
                format!("wb_check{example}"),
                run_wb_check(example, order, &opts)?,
            )
        }
    };
    let dir = cfg.run.out.join(&label);
    write_outputs(&dir, &label, &cfg, &art)?;
    let mut ok = true;
    for c in &art.report.checks {
        ok &= c.passed;
        println!(
            "{} {} = {:.3e} (threshold {:.3e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    for c in &art.report.comparisons {
        println!(
            "{} {} t = {}: L1 order 2 {:.3e}, order 5 {:.3e}",
            c.case, c.quantity, c.time, c.l1_second, c.l1_fifth
        );
    }
    for r in &art.report.runge {
        for row in &r.rows {
            println!(
                "runge order {} dx {}: error {} rate {}",
                r.order,
                row.dx,
                row.error.map_or("-".into(), |e| format!("{e:.3e}")),
                row.rate.map_or("-".into(), |e| format!("{e:.2}"))
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        // checks ran but some failed
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
