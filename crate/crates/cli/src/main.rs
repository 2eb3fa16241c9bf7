use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timeavg::Error;
use timeavg_cli::commands::{run, Outcome};
use timeavg_cli::{
    exit_code, parse_box, parse_point, resolve_map, resolve_poly, BudgetConfig, CommandKind,
    RunConfig, TolConfig,
};

#[derive(Parser)]
#[command(
    name = "timeavg",
    version,
    about = "Certificates for weighted time averages of polynomial maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monodromy generators and group order of f^N.
    Img(Common),
    /// Decide whether the time average exists at a point.
    Certify(Common),
    /// Random-fiber rank check against a global average.
    RefuteGlobal(Common),
    /// Weight sequence for a disk inside a rotation domain.
    SiegelWeights(Common),
    /// Green's function value or a level curve.
    Green(Common),
    /// Fatou component chart as PGM plus JSON.
    Chart(Common),
    /// Degree growth and relations of a polynomial map of C^k.
    ClassifyAuto(Common),
    /// Rerun a stored configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Fixture name, inline [[re,im],..] literal or JSON file.
    #[arg(long)]
    poly: Option<String>,
    /// Fixture name, inline map literal or JSON file.
    #[arg(long)]
    map: Option<String>,
    /// Inverse map, used to verify invertibility and for backward orbits.
    #[arg(long)]
    inverse: Option<String>,
    /// Point as re,im.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disk radius for Siegel weights.
    #[arg(long)]
    radius: Option<f64>,
    /// Chart box re_min,re_max,im_min,im_max.
    #[arg(long = "box", allow_hyphen_values = true)]
    chart_box: Option<String>,
    /// Green level whose curve is written as CSV.
    #[arg(long)]
    level_curve: Option<f64>,
    /// Allow the identity map in relations.
    #[arg(long)]
    include_identity: bool,
    #[arg(long)]
    budget_iterations: Option<usize>,
    #[arg(long)]
    budget_resolution: Option<usize>,
    #[arg(long)]
    budget_max_iter: Option<usize>,
    #[arg(long)]
    budget_scan: Option<usize>,
    #[arg(long)]
    budget_groups: Option<usize>,
    #[arg(long)]
    budget_closure: Option<usize>,
    #[arg(long)]
    budget_trials: Option<usize>,
    #[arg(long)]
    budget_degree: Option<usize>,
    #[arg(long)]
    budget_rays: Option<usize>,
    #[arg(long)]
    tol_green: Option<f64>,
    #[arg(long)]
    tol_guard: Option<usize>,
    #[arg(long)]
    tol_offset: Option<f64>,
    /// Output JSON path; side files share its stem. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn build_config(command: CommandKind, c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new(command);
    cfg.seed = c.seed;
    cfg.level = c.level;
    cfg.poly = c
        .poly
        .as_deref()
        .map(|p| resolve_poly(p, c.seed))
        .transpose()?;
    cfg.map = c.map.as_deref().map(resolve_map).transpose()?;
    cfg.inverse = c.inverse.as_deref().map(resolve_map).transpose()?;
    if cfg.inverse.is_none() && c.map.as_deref() == Some("henon") {
        cfg.inverse = Some(timeavg::autos::fixtures::henon_inverse());
    }
    cfg.point = c.point.as_deref().map(parse_point).transpose()?;
    if let Some(r) = c.radius {
        cfg.radius = r;
    }
    cfg.chart_box = c.chart_box.as_deref().map(parse_box).transpose()?;
    cfg.level_curve = c.level_curve;
    cfg.include_identity = c.include_identity;
    let d = BudgetConfig::default();
    cfg.budgets = BudgetConfig {
        iterations: c.budget_iterations.unwrap_or(d.iterations),
        resolution: c.budget_resolution.unwrap_or(d.resolution),
        max_iter: c.budget_max_iter.unwrap_or(d.max_iter),
        scan: c.budget_scan.unwrap_or(d.scan),
        groups: c.budget_groups.unwrap_or(d.groups),
        closure: c.budget_closure.unwrap_or(d.closure),
        trials: c.budget_trials.unwrap_or(d.trials),
        degree: c.budget_degree.unwrap_or(d.degree),
        rays: c.budget_rays.unwrap_or(d.rays),
    };
    let t = TolConfig::default();
    cfg.tolerances = TolConfig {
        green: c.tol_green.unwrap_or(t.green),
        guard: c.tol_guard.unwrap_or(t.guard),
        offset: c.tol_offset.unwrap_or(t.offset),
    };
    cfg.out = c.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn write_outcome(cfg: &RunConfig, outcome: &Outcome) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.json)?,
        None => std::io::stdout().write_all(outcome.json.as_bytes())?,
    }
    for (path, bytes) in &outcome.side_files {
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Cmd::Img(c) => (CommandKind::Img, c),
        Cmd::Certify(c) => (CommandKind::Certify, c),
        Cmd::RefuteGlobal(c) => (CommandKind::RefuteGlobal, c),
        Cmd::SiegelWeights(c) => (CommandKind::SiegelWeights, c),
        Cmd::Green(c) => (CommandKind::Green, c),
        Cmd::Chart(c) => (CommandKind::Chart, c),
        Cmd::ClassifyAuto(c) => (CommandKind::ClassifyAuto, c),
        Cmd::Run { config, out } => {
            let loaded = std::fs::read_to_string(config)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", config.display())))
                .and_then(|text| RunConfig::from_json(&text));
            return match loaded {
                Ok(mut cfg) => {
                    if out.is_some() {
                        cfg.out = out.clone();
                    }
                    execute(&cfg)
                }
                Err(e) => fail(&e),
            };
        }
    };
    let cfg = match build_config(kind, common) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if common.print_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    execute(&cfg)
}

fn execute(cfg: &RunConfig) -> ExitCode {
    match run(cfg) {
        Ok(outcome) => {
            if let Err(e) = write_outcome(cfg, &outcome) {
                eprintln!("error: {e}");
                return ExitCode::from(timeavg_cli::EXIT_INVALID as u8);
            }
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e) as u8)
}
