//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bidi_zsl::config::{preset, ExperimentConfig, GraphMode, HyperParams, Learner, PostProc, PRESETS};
use bidi_zsl::error::{HarnessError, Result};
use bidi_zsl::io::{load_matrix_auto, read_json, save_labels, write_json};
use bidi_zsl::pipeline::{
    fit_model, predict_projected, project_views, render_report, resolve_split, run_on_dataset, Method, PipelineReport,
    SemanticUse,
};
use bidi_zsl::search::{
    coarse_grid_search, fine_tune_sequence, gamma_grid, gamma_search, select_views, CoarseGrid, FineGrid, SearchSetup,
};
use bidi_zsl_core::{Metric, StopRule, ZslModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bidi-zsl", version, about = "Zero-shot recognition with bidirectional latent embeddings")]
struct Cli {
    /// Worker threads (capped by BIDI_ZSL_THREADS); 1 runs serially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on the training classes and save it as JSON.
    Fit {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Label instances with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Feature file per view, in training order.
        #[arg(long, required = true)]
        features: Vec<PathBuf>,
        /// `rows` when each line of the feature files is one instance.
        #[arg(long, value_enum, default_value_t = LayoutArg::Columns)]
        layout: LayoutArg,
        #[arg(long, value_enum, default_value_t = PostProc::None)]
        postproc: PostProc,
        #[arg(long, default_value_t = 20)]
        kst: usize,
        /// Labels CSV to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit and score every configured trial.
    #[command(alias = "run")]
    Eval {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Coarse grid search followed by sequential fine-tuning.
    Cv {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Validation trials per point (default from config).
        #[arg(long)]
        cv_trials: Option<usize>,
        /// Start fine-tuning from the given hyperparameters.
        #[arg(long)]
        skip_coarse: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the fusion weight of two semantic tables.
    GammaSearch {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        cv_trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedily pick complementary visual views.
    SelectViews {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Neighbourhood size for complementarity.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Stop after this many views.
        #[arg(long, conflicts_with = "min_complementarity")]
        max_views: Option<usize>,
        /// Stop when the best remaining complementarity falls below this.
        #[arg(long)]
        min_complementarity: Option<f64>,
        #[arg(long)]
        cv_trials: Option<usize>,
    },
    /// Render a saved JSON report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// List the shipped hyperparameter presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Columns,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Named published optimum, applied before explicit flags.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    dy: Option<usize>,
    #[arg(long)]
    kg: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kst: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    graph: Option<GraphMode>,
    #[arg(long, value_enum)]
    learner: Option<Learner>,
    #[arg(long)]
    kernelized: bool,
    #[arg(long, value_enum)]
    postproc: Option<PostProc>,
    /// Metric for every semantic table.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Number of seeded trials.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print a text table to stderr.
    #[arg(long)]
    table: bool,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(name) = &self.preset {
            let p = preset(name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                HarnessError::Usage(format!("unknown preset {name:?}; known: {}", names.join(", ")))
            })?;
            p.apply(&mut cfg.hyper);
        }
        let h = &mut cfg.hyper;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => { $(if let Some(v) = self.$flag { h.$field = v; })* };
        }
        set!(alpha => alpha, dy => d_y, kg => k_g, eta => eta, kst => k_st, gamma => gamma, seed => seed);
        if let Some(g) = self.graph {
            cfg.modes.graph = g;
        }
        if let Some(l) = self.learner {
            cfg.modes.learner = l;
        }
        if self.kernelized {
            cfg.modes.kernelized = true;
        }
        if let Some(p) = self.postproc {
            cfg.modes.postproc = p;
        }
        if let Some(m) = self.metric {
            let m = match m {
                MetricArg::Euclidean => Metric::Euclidean,
                MetricArg::Cosine => Metric::Cosine,
            };
            cfg.semantics.iter_mut().for_each(|s| s.metric = Some(m));
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn method_of(cfg: &ExperimentConfig) -> Method {
    Method {
        modes: cfg.modes,
        lsm: cfg.lsm,
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(value, p),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Fit { exp, model } => {
            let cfg = exp.load()?;
            let ds = cfg.load_dataset()?;
            let split = resolve_split(&ds, &cfg.split)?;
            let m = fit_model(
                &ds,
                &cfg.hyper,
                &method_of(&cfg),
                SemanticUse::Fused,
                &split.train_classes,
                &split.test_classes,
                bidi_zsl::pipeline::trial_seed(cfg.hyper.seed, 0),
            )?;
            write_json(&m, &model)
        }
        Command::Predict {
            model,
            features,
            layout,
            postproc,
            kst,
            out,
        } => {
            let m: ZslModel = read_json(&model)?;
            let views = features
                .iter()
                .map(|p| {
                    let x = load_matrix_auto(p)?;
                    Ok(match layout {
                        LayoutArg::Columns => x,
                        LayoutArg::Rows => x.transpose(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let projected = project_views(&m, &views)?;
            let (labels, _) = predict_projected(&m, &projected, postproc, kst)?;
            match out {
                Some(p) => save_labels(&labels, &p),
                None => {
                    println!("instance_id,label");
                    labels.iter().enumerate().for_each(|(i, l)| println!("{i},{l}"));
                    Ok(())
                }
            }
        }
        Command::Eval { exp, out } => {
            let cfg = exp.load()?;
            let ds = cfg.load_dataset()?;
            let split = resolve_split(&ds, &cfg.split)?;
            let report = run_on_dataset(&ds, &split, &cfg.hyper, &method_of(&cfg), cfg.trials, threads)?;
            if out.table {
                eprint!("{}", render_report(&report));
            }
            emit_json(&report, out.out.as_deref())
        }
        Command::Cv {
            exp,
            cv_trials,
            skip_coarse,
            out,
        } => {
            let cfg = exp.load()?;
            let ds = cfg.load_dataset()?;
            let split = resolve_split(&ds, &cfg.split)?;
            let mut cv = cfg.cv;
            if let Some(t) = cv_trials {
                cv.trials = t;
            }
            let setup = SearchSetup {
                dataset: &ds,
                known_classes: split.train_classes.clone(),
                method: method_of(&cfg),
                cv,
                threads,
            };
            let coarse = if skip_coarse {
                None
            } else {
                Some(coarse_grid_search(&setup, &cfg.hyper, &CoarseGrid::default())?)
            };
            let start: HyperParams = coarse.as_ref().map_or(cfg.hyper, |c| c.best);
            let fine = fine_tune_sequence(&setup, &start, &FineGrid::default())?;
            emit_json(
                &json!({ "best": fine.best, "score": fine.score, "coarse": coarse, "fine": fine }),
                out.as_deref(),
            )
        }
        Command::GammaSearch { exp, cv_trials, out } => {
            let cfg = exp.load()?;
            let ds = cfg.load_dataset()?;
            let split = resolve_split(&ds, &cfg.split)?;
            let mut cv = cfg.cv;
            if let Some(t) = cv_trials {
                cv.trials = t;
            }
            let setup = SearchSetup {
                dataset: &ds,
                known_classes: split.train_classes.clone(),
                method: method_of(&cfg),
                cv,
                threads,
            };
            let outcome = gamma_search(&setup, &cfg.hyper, &gamma_grid())?;
            emit_json(&outcome, out.as_deref())
        }
        Command::SelectViews {
            exp,
            k,
            max_views,
            min_complementarity,
            cv_trials,
        } => {
            let cfg = exp.load()?;
            let ds = cfg.load_dataset()?;
            let split = resolve_split(&ds, &cfg.split)?;
            let mut cv = cfg.cv;
            if let Some(t) = cv_trials {
                cv.trials = t;
            }
            let names: Vec<String> = cfg
                .views
                .iter()
                .enumerate()
                .map(|(i, v)| v.name.clone().unwrap_or_else(|| format!("view{i}")))
                .collect();
            let stop = match (max_views, min_complementarity) {
                (_, Some(c)) => StopRule::MinComplementarity(c),
                (Some(n), None) => StopRule::MaxCount(n),
                (None, None) => StopRule::MaxCount(names.len()),
            };
            let mut modes = cfg.modes;
            modes.kernelized = false;
            let setup = SearchSetup {
                dataset: &ds,
                known_classes: split.train_classes.clone(),
                method: Method { modes, lsm: cfg.lsm },
                cv,
                threads,
            };
            let chosen = select_views(&setup, &cfg.hyper, &names, k, stop)?;
            emit_json(&json!({ "selected": chosen }), None)
        }
        Command::Report { input, format } => {
            let report: PipelineReport = read_json(&input)?;
            if report.trials.is_empty() {
                return Err(HarnessError::Usage("report has no trials".into()));
            }
            match format {
                ReportFormat::Text => print!("{}", render_report(&report)),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(())
        }
        Command::Presets => {
            for p in PRESETS {
                println!(
                    "{:<20} alpha={:<7} d_y={:<4} k_g={:<3} k_st={}",
                    p.name, p.alpha, p.d_y, p.k_g, p.k_st
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "category": e.category(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
