//! Command-line front end.
//!
//! Exit codes: 0 = safe, 1 = unsafe, 2 = input or model error, 3 = internal
//! failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use saw_core::pipeline::{run_pipeline, Overrides, PipelineError, PipelineOptions};
use saw_core::report::render_svg;

#[derive(Parser, Debug)]
#[command(
    name = "saw",
    about = "Computes the largest grid-union safe initial set of a weakly-hard \
             sampled-data control system",
    version
)]
struct Args {
    /// Model file path.
    model: PathBuf,

    /// Output path for the region plot.
    #[arg(long, default_value = "output.svg")]
    svg: PathBuf,

    /// Skip writing the region plot.
    #[arg(long)]
    no_svg: bool,

    /// Taylor expansion order of the integrator.
    #[arg(long, default_value_t = saw_core::reach::DEFAULT_ORDER)]
    order: usize,

    /// Worker threads (0 = all available).
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Override the deadline-miss budget m.
    #[arg(long)]
    m: Option<usize>,

    /// Override the window length K.
    #[arg(long = "K")]
    k: Option<usize>,

    /// Override the partition count per dimension.
    #[arg(long)]
    p: Option<usize>,

    /// Override the integrator step size.
    #[arg(long)]
    step_size: Option<f64>,

    /// Suppress progress updates and timing lines.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.model) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("[Error] cannot read {}: {e}", args.model.display());
            return ExitCode::from(2);
        }
    };

    let overrides = Overrides {
        miss_budget: args.m,
        window: args.k,
        grid_count: args.p,
        step_size: args.step_size,
    };
    let options = PipelineOptions {
        order: args.order,
        threads: args.threads,
        quiet: args.quiet,
    };

    let outcome = match run_pipeline::<f64, _>(&text, &overrides, &options, std::io::stdout()) {
        Ok(outcome) => outcome,
        Err(PipelineError::Parse(e)) => {
            eprintln!("[Error] {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("[Error] {e}");
            return ExitCode::from(3);
        }
    };
    let _ = std::io::stdout().flush();

    if !args.no_svg {
        if outcome.model.state_dim <= 2 {
            if let Err(e) = render_svg(
                &outcome.model,
                &outcome.gamma_s,
                &outcome.gamma_i,
                &args.svg,
            ) {
                eprintln!("[Error] cannot write {}: {e}", args.svg.display());
                return ExitCode::from(3);
            }
        } else {
            eprintln!(
                "[Warning] region plot skipped: state dimension {} > 2",
                outcome.model.state_dim
            );
        }
    }

    if outcome.verdict.safe {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
