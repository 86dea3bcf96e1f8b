use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use potinv::harness::{
    emit_rate, emit_report, emit_sweep, gamma_sweep, rate_study, run, ExperimentConfig, ExperimentKind, GammaMode,
};
use potinv::mesh::{generate_points, quasi_uniformity, Mesh, DEFAULT_PROBE_RESOLUTION};
use potinv::observation::observe;
use potinv::Result;

#[derive(Parser)]
#[command(name = "potinv", version, about = "Potential reconstruction from noisy point data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh and sampling statistics; write nodes.csv, elements.csv, points.csv.
    MeshInfo(Common),
    /// Solve the reference problem and write observations.csv and u_true.csv.
    Forward(Common),
    /// Reconstruct for every gamma in `sweep.gammas`; write sweep.csv.
    Sweep(Common),
    /// Adaptive choice of gamma; write gamma_trace.csv.
    Adapt(Common),
    /// A priori gamma with coupled mesh size over `rate.k_list`; write rate.csv.
    Rate(Common),
    /// Dispatch on the configured experiment id.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok((config, out))
    }
}

fn mesh_info(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let mesh = Mesh::structured(config.dim, config.m)?;
    let points = generate_points(config.dim, config.points, config.k, config.seed)?;
    let quality = quasi_uniformity(&points, DEFAULT_PROBE_RESOLUTION)?;
    println!("dim            {}", mesh.dim());
    println!("M              {}", mesh.divisions());
    println!("nodes          {}", mesh.num_nodes());
    println!("elements       {}", mesh.num_elements());
    println!("h              {:.6e}", mesh.h());
    println!("points         {}", points.len());
    println!("d_max          {:.6e}", quality.d_max);
    println!("d_min          {:.6e}", quality.d_min);
    println!("d_max/d_min    {:.6e}", quality.ratio);
    mesh.write_csv(out)?;
    points.write_csv(&out.join("points.csv"))
}

fn forward(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let gt = config.ground_truth()?;
    let points = generate_points(config.dim, config.points, config.k, config.seed)?;
    let obs = observe(&gt, &points, config.sigma, config.noise, config.seed)?;
    println!("sup |u|        {:.6e}", gt.sup_norm);
    println!("|q|_H1         {:.6e}", gt.q_h1_norm()?);
    println!("noise std      {:.6e}", obs.noise_std);
    gt.u.write_csv(&out.join("u_true.csv"))?;
    obs.write_csv(&out.join("observations.csv"))
}

fn sweep(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let result = gamma_sweep(config, &config.sweep.gammas)?;
    for row in &result.rows {
        println!("gamma {:.1e}  e_q {:.4e}  e_u {:.4e}", row.gamma, row.e_q, row.e_u);
    }
    for (gamma, reason) in &result.failures {
        eprintln!("gamma {gamma:.1e} failed: {reason}");
    }
    if let (Some(q), Some(u)) = (result.argmin_e_q(), result.argmin_e_u()) {
        println!("argmin e_q: {q:.1e}   argmin e_u: {u:.1e}");
    }
    emit_sweep(out, config, &result)
}

fn rate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let rows = rate_study(config, &config.rate.k_list)?;
    for r in &rows {
        println!(
            "n {:>8}  gamma {:.3e}  M {:>3}  e_q {:.4e}  e_u {:.4e}",
            r.n, r.gamma, r.m, r.e_q, r.e_u
        );
    }
    emit_rate(out, config, &rows)
}

fn single(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let (report, _) = run(config)?;
    for s in &report.trace {
        println!(
            "k {:>2}  gamma {:.4e}  misfit {:.4e}  |q|_H1 {:.4e}",
            s.k, s.gamma, s.misfit, s.q_h1
        );
    }
    println!(
        "gamma {:.4e}  e_q {:.4e}  e_u {:.4e}  iterations {}  ({:?}, {:.2?})",
        report.gamma, report.metrics.e_q, report.metrics.e_u, report.iterations, report.termination, report.wall_time
    );
    emit_report(out, config, &report)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::MeshInfo(c) => {
            let (config, out) = c.load()?;
            mesh_info(&config, &out)
        }
        Command::Forward(c) => {
            let (config, out) = c.load()?;
            forward(&config, &out)
        }
        Command::Sweep(c) => {
            let (config, out) = c.load()?;
            sweep(&config, &out)
        }
        Command::Adapt(c) => {
            let (mut config, out) = c.load()?;
            config.gamma = GammaMode::Adaptive;
            single(&config, &out)
        }
        Command::Rate(c) => {
            let (config, out) = c.load()?;
            rate(&config, &out)
        }
        Command::Run(c) => {
            let (config, out) = c.load()?;
            match config.experiment {
                ExperimentKind::GammaSweep => sweep(&config, &out),
                ExperimentKind::Rate1d | ExperimentKind::Rate2d => rate(&config, &out),
                ExperimentKind::Adaptive => single(
                    &ExperimentConfig {
                        gamma: GammaMode::Adaptive,
                        ..config
                    },
                    &out,
                ),
                ExperimentKind::Custom => single(&config, &out),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(code as u8)
        }
    }
}
