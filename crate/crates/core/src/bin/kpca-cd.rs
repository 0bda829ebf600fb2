use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kpca_cd::config::{Mode, RunConfig, Variant};
use kpca_cd::pipeline::{run_baseline, run_detect, run_eval, run_synth};
use kpca_cd::{Error, SynthSpec};

#[derive(Parser)]
#[command(version, about = "Unsupervised change detection with siamese kernel-PCA features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Binary,
    Multiclass,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Wfd,
    M1,
    M2,
    M3,
    M4,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    align: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train the siamese network on a raster pair and write the change map.
    Detect(RunArgs),
    /// Change vector analysis on the raw bands, same outputs as detect.
    Baseline(RunArgs),
    /// Generate a synthetic raster pair with planted changes.
    Synth {
        /// Scene description (JSON); defaults to a 96x96x4 scene with 3 change classes.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the default layout.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a change map against a reference map.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        pred_legend: Option<PathBuf>,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        ref_legend: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "binary")]
        mode: ModeArg,
        #[arg(long)]
        align: bool,
    },
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Binary => Mode::Binary,
        ModeArg::Multiclass => Mode::Multiclass,
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(m) = args.mode {
        cfg.mode = mode(m);
    }
    if let Some(v) = args.variant {
        cfg.variant = match v {
            VariantArg::Wfd => Variant::Wfd,
            VariantArg::M1 => Variant::M1,
            VariantArg::M2 => Variant::M2,
            VariantArg::M3 => Variant::M3,
            VariantArg::M4 => Variant::M4,
        };
    }
    cfg.align |= args.align;
    Ok(cfg)
}

fn synth_spec(config: Option<PathBuf>, seed: Option<u64>) -> Result<SynthSpec, Error> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            Ok(spec)
        }
        None => Ok(SynthSpec::with_layout(96, 96, 4, 3, seed.unwrap_or(0))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Detect(args) => {
            let det = run_detect(&run_config(&args)?, &args.out)?;
            if let Some(m) = det.metrics {
                println!("kappa {:.4}  oa {:.4}", m.kappa, m.oa);
            }
        }
        Command::Baseline(args) => {
            let det = run_baseline(&run_config(&args)?, &args.out)?;
            if let Some(m) = det.metrics {
                println!("kappa {:.4}  oa {:.4}", m.kappa, m.oa);
            }
        }
        Command::Synth { config, out, seed } => {
            run_synth(&synth_spec(config, seed)?, &out)?;
        }
        Command::Eval {
            pred,
            pred_legend,
            reference,
            ref_legend,
            out,
            mode: m,
            align,
        } => {
            let report = run_eval(
                &pred,
                pred_legend.as_deref(),
                &reference,
                ref_legend.as_deref(),
                mode(m),
                align,
                &out,
            )?;
            println!("kappa {:.4}  oa {:.4}", report.kappa, report.oa);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
