use clap::Parser;
use stokes_shape_spectra::pipeline::{run_from_path, Stage, EXIT_CONFIG};
use std::path::PathBuf;

/// Stokes Dirichlet eigenvalues on closed surfaces and their shape-perturbation series.
#[derive(Parser, Debug)]
#[command(name = "stokes-shape-spectra", version)]
struct Cli {
    #[arg(value_enum)]
    stage: Stage,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; default is the number of cores.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            std::process::exit(EXIT_CONFIG);
        }
    }
    std::process::exit(run_from_path(cli.stage, &cli.config, cli.out));
}
