use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cutsv::harness::{
    compute_eoc, dump_geometry, run_convergence, run_interface_sweep, GeometryArg, ResultRow, StudyConfig,
};

#[derive(Parser)]
#[command(name = "cutsv", version, about = "Unfitted divergence-free Stokes solver and study driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence table for one example.
    #[command(alias = "run")]
    Converge(Common),
    /// Example 2 with both multiplier degrees.
    Noflow(Common),
    /// Condition numbers while shifting the quartic domain.
    Sweep(Common),
    /// Mesh, interface and quadrature diagnostics for the finest level.
    DumpGeom(Common),
}

#[derive(Args)]
struct Common {
    /// key = value file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<u32>,
    /// Level range such as `0..4` (inclusive), or a single finest level
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "k-lambda")]
    k_lambda: Option<usize>,
    #[arg(long, value_parser = ["ho", "p1"])]
    geom: Option<String>,
    #[arg(long = "gamma-n")]
    gamma_n: Option<f64>,
    #[arg(long = "gamma-gp")]
    gamma_gp: Option<f64>,
    #[arg(long = "gamma-lambda")]
    gamma_lambda: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    vtk: bool,
    /// Start-vector seed of the condition estimates
    #[arg(long)]
    seed: Option<u64>,
    /// Also estimate condition numbers in convergence runs
    #[arg(long)]
    condest: bool,
}

impl Common {
    fn resolve(&self, example_default: Option<u32>) -> cutsv::Result<StudyConfig> {
        let mut c = StudyConfig::default();
        if let Some(e) = example_default {
            c.example = e;
        }
        if let Some(path) = &self.config {
            c.apply_str(&std::fs::read_to_string(path)?)?;
        }
        if let Some(v) = self.example {
            c.example = v;
        }
        if let Some(l) = &self.levels {
            if l.contains("..") {
                c.set("levels", l)?;
            } else {
                c.set("max_level", l)?;
            }
        }
        if let Some(v) = self.k {
            c.k = v;
            if self.k_lambda.is_none() {
                c.k_lambda = v - 1;
            }
        }
        if let Some(v) = self.k_lambda {
            c.k_lambda = v;
        }
        if let Some(g) = &self.geom {
            c.geometry = g.parse::<GeometryArg>()?;
        }
        if let Some(v) = self.gamma_n {
            c.gamma_n = v;
        }
        if let Some(v) = self.gamma_gp {
            c.gamma_gp = v;
        }
        if let Some(v) = self.gamma_lambda {
            c.gamma_lambda = v;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        c.vtk |= self.vtk;
        c.condest |= self.condest;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |r| format!("{r:.2}"))
}

fn print_table(cfg: &StudyConfig, rows: &[ResultRow]) {
    println!("# {}", cfg.name());
    println!("{:>3} {:>9} {:>10} {:>5} {:>10} {:>5} {:>10} {:>5} {:>10} {:>8}", "lvl", "h", "l2u", "eoc", "h1u", "eoc", "l2p*", "eoc", "l2div", "time[s]");
    let col = |f: fn(&ResultRow) -> f64| compute_eoc(&rows.iter().map(f).collect::<Vec<_>>());
    let (e1, e2, e3) = (col(|r| r.l2u), col(|r| r.h1u), col(|r| r.l2p_star));
    for (i, r) in rows.iter().enumerate() {
        let at = |e: &[Option<f64>]| if i == 0 { "-".into() } else { fmt_rate(e[i - 1]) };
        println!(
            "{:>3} {:>9.3e} {:>10.3e} {:>5} {:>10.3e} {:>5} {:>10.3e} {:>5} {:>10.3e} {:>8.2}",
            r.lvl, r.h, r.l2u, at(&e1), r.h1u, at(&e2), r.l2p_star, at(&e3), r.l2div, r.wall_time
        );
        if let Some(c) = r.condest {
            println!("    condest {c:.4e}");
        }
    }
}

fn run(cli: Cli) -> cutsv::Result<()> {
    match cli.command {
        Command::Converge(c) => {
            let cfg = c.resolve(None)?;
            let rows = run_convergence(&cfg)?;
            print_table(&cfg, &rows);
        }
        Command::Noflow(c) => {
            let mut base = c.resolve(Some(2))?;
            if c.levels.is_none() {
                // the star is not resolved by the coarsest mesh
                base.min_level = 1;
            }
            let k = base.k;
            for kl in [k - 1, k] {
                let cfg = StudyConfig { k_lambda: kl, ..base.clone() };
                let rows = run_convergence(&cfg)?;
                print_table(&cfg, &rows);
            }
        }
        Command::Sweep(c) => {
            let cfg = c.resolve(None)?;
            println!("i shift condest");
            for r in run_interface_sweep(&cfg)? {
                println!("{} {:.4} {:.6e}", r.index, r.shift, r.kappa);
            }
        }
        Command::DumpGeom(c) => {
            let cfg = c.resolve(None)?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("geometry"));
            dump_geometry(&cfg, cfg.max_level, &dir)?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
