use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use handforge_cli::{
    run_pipeline, CliError, CloudFormat, HandSpecDocument, PipelineOptions, THREADS_ENV,
};

/// Search thumb base placements for an anthropomorphic hand.
#[derive(Debug, Parser)]
#[command(name = "handforge", version)]
struct Args {
    /// Hand specification (JSON). Defaults to the reference hand.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "handforge-out")]
    out: PathBuf,

    /// Override the occupancy grid cell edge (mm).
    #[arg(long, value_name = "MM")]
    grid_step: Option<f64>,

    /// Override the balance threshold (percent).
    #[arg(long, value_name = "PCT")]
    threshold: Option<f64>,

    /// Override the random seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Write the winning hand's occupancy clouds.
    #[arg(long)]
    export_clouds: bool,

    #[arg(long, value_enum, default_value_t = CloudFormat::Ply)]
    cloud_format: CloudFormat,

    /// Write a named pose for the winning hand (repeatable).
    #[arg(long, value_name = "NAME")]
    gesture: Vec<String>,

    /// Print the resolved specification and exit.
    #[arg(long)]
    print_config: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("{THREADS_ENV}: `{value}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Parse(format!("{THREADS_ENV}: {e}")))
}

fn run(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let mut doc = match &args.config {
        Some(path) => HandSpecDocument::from_path(path)?,
        None => HandSpecDocument::default(),
    };
    if let Some(h) = args.grid_step {
        doc.cell_size = h;
    }
    if let Some(t) = args.threshold {
        doc.threshold = t;
    }
    if let Some(s) = args.seed {
        doc.seed = s;
    }
    doc.resolve()?;
    if args.print_config {
        println!("{}", doc.to_json());
        return Ok(());
    }

    let opts = PipelineOptions {
        clouds: args.export_clouds.then_some(args.cloud_format),
        gestures: args.gesture,
    };
    let outcome = run_pipeline(&doc, &args.out, &opts)?;
    let b = outcome.best;
    let stored = outcome.records.iter().filter(|r| r.stored).count();
    println!(
        "{} candidates ({} resumed), {} stored",
        outcome.records.len(),
        outcome.resumed,
        stored
    );
    println!(
        "best base: x {} mm, y {} mm, z {} mm, theta_z {} deg; TOI {:.4}, sigma_r {:.3} %",
        b.x,
        b.y,
        b.z,
        b.theta_z,
        outcome.summary.opposability.index,
        outcome.summary.opposability.sigma_r.unwrap_or(f64::NAN)
    );
    println!("results in {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("handforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
