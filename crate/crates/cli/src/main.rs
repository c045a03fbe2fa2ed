use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atlasforest_cli::config::parse_feature_set;
use atlasforest_cli::{io, stages, CliError, Contrast, PipelineConfig};
use clap::{Args, Parser, Subcommand};

/// Atypical Alzheimer's disease classification and brain-region selection.
#[derive(Parser)]
#[command(name = "atlasforest", version)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Selection {
    /// clinical, hippo, hippo+clinical, mri or mri+clinical.
    #[arg(long)]
    feature_set: Option<String>,
    /// Groups to compare, positive class first, e.g. atAD:nonAD.
    #[arg(long)]
    contrast: Option<String>,
    /// z-score sign: atrophy (predicted minus observed) or conventional.
    #[arg(long)]
    sign: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with planted effects.
    Synth {
        /// Put biomarkers exactly on their thresholds.
        #[arg(long)]
        boundary: bool,
    },
    /// Assign diagnostic groups from clinical and biomarker data.
    Label {
        #[arg(long)]
        subjects: Option<PathBuf>,
    },
    /// Convert MRI features to z-scores against the CN group.
    Normalize {
        #[arg(long)]
        subjects: Option<PathBuf>,
        #[arg(long)]
        groups: Option<PathBuf>,
        #[command(flatten)]
        sel: Selection,
    },
    /// Nested cross-validation of the random forest classifier.
    TrainEval {
        /// Subject or z-score CSV.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        groups: Option<PathBuf>,
        #[command(flatten)]
        sel: Selection,
    },
    /// Boruta selection of brain regions separating the contrast groups.
    Boruta {
        #[arg(long)]
        zscores: Option<PathBuf>,
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Column set offered to Boruta: regions or mri.
        #[arg(long)]
        columns: Option<String>,
        #[command(flatten)]
        sel: Selection,
    },
    /// Full pipeline; synthesizes the cohort when no subject file is given.
    Run {
        #[arg(long)]
        subjects: Option<PathBuf>,
        #[command(flatten)]
        sel: Selection,
    },
}

fn apply_selection(cfg: &mut PipelineConfig, sel: &Selection) -> Result<(), CliError> {
    if let Some(fs) = &sel.feature_set {
        cfg.feature_set = parse_feature_set(fs)?;
    }
    if let Some(c) = &sel.contrast {
        cfg.contrast = c.parse::<Contrast>().map_err(CliError::Config)?;
    }
    if let Some(s) = &sel.sign {
        cfg.sign = match s.as_str() {
            "atrophy" => atlasforest::normalize::ZSign::Atrophy,
            "conventional" => atlasforest::normalize::ZSign::Conventional,
            _ => return Err(CliError::Config(format!("unknown sign `{s}`; valid: atrophy, conventional"))),
        };
    }
    Ok(())
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    match &cli.command {
        Command::Synth { .. } => {}
        Command::Label { subjects } => set(&mut cfg.inputs.subjects, subjects),
        Command::Normalize { subjects, groups, sel } => {
            set(&mut cfg.inputs.subjects, subjects);
            set(&mut cfg.inputs.groups, groups);
            apply_selection(&mut cfg, sel)?;
        }
        Command::TrainEval { features, groups, sel } => {
            set(&mut cfg.inputs.zscores, features);
            set(&mut cfg.inputs.groups, groups);
            apply_selection(&mut cfg, sel)?;
        }
        Command::Boruta { zscores, groups, columns, sel } => {
            set(&mut cfg.inputs.zscores, zscores);
            set(&mut cfg.inputs.groups, groups);
            if let Some(c) = columns {
                cfg.boruta_columns = parse_feature_set(c)?;
            }
            apply_selection(&mut cfg, sel)?;
        }
        Command::Run { subjects, sel } => {
            set(&mut cfg.inputs.subjects, subjects);
            apply_selection(&mut cfg, sel)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("no {what} input; pass --{what} or set inputs.{what}")))
}

fn execute(cli: &Cli, cfg: &PipelineConfig) -> Result<(), CliError> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let inputs = &cfg.inputs;
    match &cli.command {
        Command::Synth { boundary } => stages::synth(cfg, *boundary).map(|_| ()),
        Command::Label { .. } => stages::label(cfg, required(&inputs.subjects, "subjects")?).map(|_| ()),
        Command::Normalize { .. } => {
            stages::normalize(cfg, required(&inputs.subjects, "subjects")?, required(&inputs.groups, "groups")?)
                .map(|_| ())
        }
        Command::TrainEval { .. } => {
            let features = inputs.zscores.as_ref().or(inputs.subjects.as_ref()).cloned();
            stages::train_eval(cfg, required(&features, "features")?, required(&inputs.groups, "groups")?).map(|_| ())
        }
        Command::Boruta { .. } => {
            stages::boruta(cfg, required(&inputs.zscores, "zscores")?, required(&inputs.groups, "groups")?).map(|_| ())
        }
        Command::Run { .. } => stages::run(cfg),
    }
}

fn fail(e: &CliError, out: Option<&Path>) -> ExitCode {
    let report = serde_json::to_string(&e.report()).unwrap_or_else(|_| format!("{{\"message\":{:?}}}", e.to_string()));
    eprintln!("{report}");
    if let Some(dir) = out {
        if let Err(w) = io::write_json(&dir.join("error.json"), &e.report()) {
            log::warn!("could not write error.json: {w}");
        }
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ATLASFOREST_LOG", "warn")).init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&e, cli.out.as_deref()),
    };
    if cli.dump_config {
        return match cfg.to_toml() {
            Ok(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e, None),
        };
    }
    match execute(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, Some(&cfg.out)),
    }
}
