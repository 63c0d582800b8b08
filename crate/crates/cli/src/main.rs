use clap::{Args, Parser, Subcommand};
use datquant::preprocess::SliceWindow;
use datquant::shape::SideCombination;
use datquant_cli::{
    cmd_area_profile, cmd_cv, cmd_extract, cmd_importance, cmd_phantom, cmd_stats, CliError, PhantomCounts, RunConfig,
    ThresholdKind, EXIT_INVALID, EXIT_OK, EXIT_PARTIAL,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Striatal shape and surface-fit features from DAT SPECT volumes.
#[derive(Parser)]
#[command(name = "datquant", version)]
struct Cli {
    /// Run configuration (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 = all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the effective configuration as TOML to stdout and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ExtractFlags {
    /// Inclusive slice window `first:last`.
    #[arg(long)]
    slices: Option<SliceWindow>,
    #[arg(long, value_parser = parse_threshold_kind)]
    threshold_mode: Option<ThresholdKind>,
    /// Fixed threshold in (0, 1); implies `--threshold-mode fixed` unless set.
    #[arg(long)]
    threshold: Option<f64>,
    /// left, right or mean.
    #[arg(long)]
    side: Option<SideCombination>,
    #[arg(long)]
    radiological: bool,
    #[arg(long)]
    absolute_ai: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Feature table from a cohort manifest.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// SBR table joined as columns 31-34.
        #[arg(long)]
        sbr: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        flags: ExtractFlags,
    },
    /// Group statistics and significance screen of a feature table.
    Stats {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Repeated stratified cross-validation on the screened features.
    Cv {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// svm, naive_bayes, forest, boost; repeatable.
        #[arg(long = "classifier")]
        classifiers: Vec<String>,
        #[arg(long)]
        include_sbr: bool,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Out-of-bag permutation importance of every column.
    Importance {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Synthetic cohort with ground truth and SBR values.
    Phantom {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        normal: usize,
        #[arg(long, default_value_t = 40)]
        swedd: usize,
        #[arg(long, default_value_t = 200)]
        pd: usize,
        #[arg(long)]
        no_sbr: bool,
    },
    /// Per-slice above-threshold area of one volume.
    AreaProfile {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        slices: Option<SliceWindow>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_threshold_kind(s: &str) -> Result<ThresholdKind, String> {
    match s.replace('-', "_").as_str() {
        "fixed" => Ok(ThresholdKind::Fixed),
        "auto" => Ok(ThresholdKind::Auto),
        "per_subject" => Ok(ThresholdKind::PerSubject),
        other => Err(format!("unknown threshold mode {other:?}")),
    }
}

fn apply_extract_flags(cfg: &mut RunConfig, f: ExtractFlags) {
    if let Some(w) = f.slices {
        cfg.slices = w;
    }
    if let Some(t) = f.threshold {
        cfg.threshold.value = Some(t);
        if f.threshold_mode.is_none() {
            cfg.threshold.mode = ThresholdKind::Fixed;
        }
    }
    if let Some(m) = f.threshold_mode {
        cfg.threshold.mode = m;
    }
    if let Some(s) = f.side {
        cfg.side = s;
    }
    cfg.radiological |= f.radiological;
    cfg.absolute_ai |= f.absolute_ai;
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    match cli.command {
        Command::Extract {
            manifest,
            sbr,
            out,
            flags,
        } => {
            apply_extract_flags(&mut cfg, flags);
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if sbr.is_some() {
                cfg.sbr = sbr;
            }
            if cli.print_config {
                print!("{}", cfg.to_toml());
                return Ok(EXIT_OK);
            }
            let manifest = cfg
                .manifest
                .clone()
                .ok_or_else(|| CliError::Invalid("extract needs --manifest or `manifest` in the config".into()))?;
            let outcome = cmd_extract(&manifest, cfg.sbr.as_deref(), &out, &cfg)?;
            eprintln!(
                "{} of {} subjects extracted into {}",
                outcome.table.rows.len(),
                outcome.provenance.n_subjects,
                out.display()
            );
            if let Some(p) = &outcome.failures_path {
                eprintln!("{} failures listed in {}", outcome.failed(), p.display());
                return Ok(EXIT_PARTIAL);
            }
        }
        Command::Stats { table, out, alpha } => {
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if cli.print_config {
                print!("{}", cfg.to_toml());
                return Ok(EXIT_OK);
            }
            let s = cmd_stats(&table, &out, &cfg)?;
            eprintln!(
                "{} of {} features significant at alpha = {}",
                s.screen.kept.len(),
                s.summary.features.len(),
                cfg.alpha
            );
        }
        Command::Cv {
            table,
            out,
            k,
            repeats,
            classifiers,
            include_sbr,
            alpha,
        } => {
            if let Some(k) = k {
                cfg.cv.k = k;
            }
            if let Some(r) = repeats {
                cfg.cv.repeats = r;
            }
            if !classifiers.is_empty() {
                cfg.cv.classifiers = classifiers;
            }
            cfg.cv.include_sbr |= include_sbr;
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if cli.print_config {
                print!("{}", cfg.to_toml());
                return Ok(EXIT_OK);
            }
            let o = cmd_cv(&table, &out, &cfg)?;
            for r in &o.reports {
                eprintln!(
                    "{:<12} accuracy {:.2} +- {:.2}  sensitivity {:.2}  specificity {:.2}  auc {:.4}",
                    r.classifier, r.accuracy.mean, r.accuracy.sd, r.sensitivity.mean, r.specificity.mean, r.auc.mean
                );
            }
        }
        Command::Importance { table, out, trees } => {
            if let Some(t) = trees {
                cfg.importance.n_trees = t;
            }
            if cli.print_config {
                print!("{}", cfg.to_toml());
                return Ok(EXIT_OK);
            }
            let o = cmd_importance(&table, &out, &cfg)?;
            for f in o.ranking.iter().take(10) {
                eprintln!("{:>3} {:>3} {:<24} {:.3}", f.rank, f.number, f.name, f.score);
            }
            if let (Some(r), Some(a), Some(b)) = (&o.reference, o.shape_above_reference, o.surface_above_reference) {
                eprintln!("{a} shape and {b} surface features score above {} ({:.3})", r.name, r.score);
            }
        }
        Command::Phantom {
            out,
            normal,
            swedd,
            pd,
            no_sbr,
        } => {
            if cli.print_config {
                print!("{}", cfg.to_toml());
                return Ok(EXIT_OK);
            }
            let counts = PhantomCounts { normal, swedd, pd };
            let run = cmd_phantom(&out, counts, !no_sbr, &cfg)?;
            eprintln!(
                "wrote {} phantoms to {} (seed {})",
                normal + swedd + pd,
                out.display(),
                run.seed_or_zero()
            );
        }
        Command::AreaProfile {
            volume,
            threshold,
            slices,
            out,
        } => {
            let profile = cmd_area_profile(&volume, threshold.or(cfg.threshold.value), slices, &out)?;
            eprintln!("{} slices written to {}", profile.len(), out.display());
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,datquant::io=error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
