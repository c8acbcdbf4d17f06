//! Command-line model explanation workflow: explain a trained model,
//! rank features, pack correlated ones, and render plots.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{MethodArg, PlotKindArg, SuggestArg};
use shapkit::plots::PlotSpec;

#[derive(Parser)]
#[command(
    name = "shapkit",
    version,
    about = "Shapley-additive explanations for tree ensembles and GLMs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute attributions for a dataset and write shap.csv + sidecar.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank features by variance (default), l1, gain, or beta.
    Importance {
        #[arg(long, value_enum, default_value = "variance")]
        method: MethodArg,
        /// Reuse a shap.csv written by `explain` (sidecar found next to it).
        #[arg(long)]
        shap: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a plot (summary, dependence, pdp, importance) as SVG + CSV.
    Plot {
        #[arg(value_enum)]
        kind: PlotKindArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        shap: Option<PathBuf>,
        /// Feature to plot (dependence and pdp).
        #[arg(long)]
        feature: Option<String>,
        /// Second feature driving dot colors (dependence).
        #[arg(long)]
        color_by: Option<String>,
        /// Importance method when kind is `importance`.
        #[arg(long, value_enum, default_value = "variance")]
        method: MethodArg,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Grid size for pdp.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge attribution columns into grouped features.
    Pack {
        #[arg(long)]
        shap: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// JSON file mapping group name -> list of feature names.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Derive groups automatically instead of reading a file.
        #[arg(long, value_enum)]
        suggest: Option<SuggestArg>,
        /// Normalized covariance cutoff for `--suggest covariance`.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in gain-inconsistency fixture and report the ranks.
    DemoConsistency {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic dataset, schema, and matching model.
    DemoData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 600)]
        rows: usize,
    },
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    match cli.command {
        Command::Explain {
            model,
            data,
            schema,
            out,
        } => commands::cmd_explain(&model, &data, schema.as_ref(), &out),
        Command::Importance {
            method,
            shap,
            model,
            data,
            schema,
            out,
        } => commands::cmd_importance(
            method,
            shap.as_ref(),
            model.as_ref(),
            data.as_ref(),
            schema.as_ref(),
            &out,
        ),
        Command::Plot {
            kind,
            model,
            data,
            schema,
            shap,
            feature,
            color_by,
            method,
            top_k,
            seed,
            grid,
            out,
        } => {
            let spec = PlotSpec {
                top_k,
                jitter_seed: seed,
                ..PlotSpec::default()
            };
            commands::cmd_plot(
                kind,
                model.as_ref(),
                data.as_ref(),
                schema.as_ref(),
                shap.as_ref(),
                feature.as_ref(),
                color_by.as_ref(),
                method,
                &spec,
                grid,
                &out,
            )
        }
        Command::Pack {
            shap,
            model,
            data,
            schema,
            groups,
            suggest,
            threshold,
            out,
        } => commands::cmd_pack(
            shap.as_ref(),
            model.as_ref(),
            data.as_ref(),
            schema.as_ref(),
            groups.as_ref(),
            suggest,
            threshold,
            &out,
        ),
        Command::DemoConsistency { out } => commands::cmd_demo_consistency(out.as_ref()),
        Command::DemoData { out, seed, rows } => commands::cmd_demo_data(&out, seed, rows),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
