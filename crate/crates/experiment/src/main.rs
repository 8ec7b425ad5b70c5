use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sriq_core::nn::{load_checkpoint, save_checkpoint, Network};
use sriq_core::observers::{
    cho_template, gabor_channels, lambda_grid, save_template, template_image, ObserverInit,
};
use sriq_core::rng::{derive_seed, tag};
use sriq_core::sim::{LabeledSet, PreparedTask};

use sriq_experiment::config::Config;
use sriq_experiment::dataset::save_dataset;
use sriq_experiment::error::{ExperimentError, Result};
use sriq_experiment::plot::{emit_plot, PlotMetric};
use sriq_experiment::report::{write_csv, write_spectra, Outcome, Report, Resolution};
use sriq_experiment::studies::data::{
    measure, stream_views, BackgroundCache, Stream, DEFAULT_CACHE_BYTES,
};
use sriq_experiment::studies::eval::{
    collect_stats, evaluate, fit_rho, train_learned, EvalPlan, EvalStreams, Labeled,
};
use sriq_experiment::studies::{
    rows_for, run_capacity_study, run_depth_study, run_signal_length_study, train_srcnn, Progress,
    StudyOutput,
};

#[derive(Parser)]
#[command(
    name = "sriq",
    version,
    about = "Task-based evaluation of super-resolution networks"
)]
struct Cli {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "SRIQ_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Rayleigh,
    Mc,
}

#[derive(clap::Args)]
struct TaskArgs {
    #[arg(long, value_enum, default_value = "rayleigh")]
    task: TaskArg,
    /// Rayleigh signal length; the depth study's length when absent.
    #[arg(long)]
    length: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    RayleighLength,
    SrcnnDepth,
    McCapacity,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labeled set and write its HR and LR images.
    Gen {
        #[command(flatten)]
        task: TaskArgs,
        /// Seed stream the images come from.
        #[arg(long, default_value = "gen")]
        purpose: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Train an SRCNN and save its checkpoint.
    TrainSr {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Build one observer and save its template or checkpoint.
    TrainObserver {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum)]
        observer: ObserverArg,
        #[arg(long, default_value = "hr")]
        resolution: Resolution,
        /// SRCNN checkpoint for SR images.
        #[arg(long)]
        srcnn: Option<PathBuf>,
    },
    /// Evaluate the observer roster on one task and write a CSV.
    Eval {
        #[command(flatten)]
        task: TaskArgs,
        /// SRCNN checkpoint; one is trained when absent.
        #[arg(long)]
        srcnn: Option<PathBuf>,
    },
    /// Run a whole study and write its CSV and plots.
    Study {
        #[arg(value_enum)]
        study: StudyArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObserverArg {
    Rho,
    Cho,
    Learned,
}

struct Console {
    partial: Option<PathBuf>,
}

impl Progress for Console {
    fn note(&mut self, message: &str) {
        eprintln!("{message}");
    }

    fn partial(&mut self, report: &Report) {
        if let Some(path) = &self.partial {
            if let Err(e) = write_csv(report, path) {
                eprintln!("could not flush partial results: {e}");
            }
        }
    }
}

impl TaskArgs {
    fn name(&self, cfg: &Config) -> String {
        match self.task {
            TaskArg::Rayleigh => format!(
                "rayleigh-L{}",
                self.length.unwrap_or(cfg.srcnn_depth.length)
            ),
            TaskArg::Mc => "mc".into(),
        }
    }

    fn prepare(&self, cfg: &Config) -> Result<PreparedTask> {
        let spec = match self.task {
            TaskArg::Rayleigh => cfg.rayleigh_task(self.length.unwrap_or(cfg.srcnn_depth.length)),
            TaskArg::Mc => cfg.mc_task(),
        };
        Ok(spec.prepare()?)
    }
}

fn load_sr(path: &Path) -> Result<Network<f32>> {
    Ok(load_checkpoint(path)?.network)
}

fn write_study(out_dir: &Path, name: &str, x_label: &str, output: &StudyOutput) -> Result<()> {
    write_csv(&output.report, &out_dir.join(format!("{name}.csv")))?;
    emit_plot(
        &output.report,
        PlotMetric::Auc,
        &format!("{name}: AUC"),
        x_label,
        &out_dir.join(format!("{name}-auc.svg")),
    )?;
    for (metric, suffix) in [
        (PlotMetric::Mse, "mse"),
        (PlotMetric::Psnr, "psnr"),
        (PlotMetric::Ssim, "ssim"),
    ] {
        if output.report.rows.iter().any(|r| r.iq.is_some()) {
            let path = out_dir.join(format!("{name}-{suffix}.svg"));
            emit_plot(
                &output.report,
                metric,
                &format!("{name}: {suffix}"),
                x_label,
                &path,
            )?;
        }
    }
    if let Some(spectra) = &output.spectra {
        write_spectra(spectra, &out_dir.join(format!("{name}-spectra.csv")))?;
    }
    for c in &output.iq_comparisons {
        println!(
            "{x_label} {}: SR-LR MSE {:.4e} [{:.4e}, {:.4e}], SSIM {:.4} [{:.4}, {:.4}]",
            c.sweep_value,
            c.mse.mean,
            c.mse.ci.0,
            c.mse.ci.1,
            c.ssim.mean,
            c.ssim.ci.0,
            c.ssim.ci.1
        );
    }
    for row in output.report.failed() {
        let reason = match &row.outcome {
            Outcome::Failed(msg) => msg.as_str(),
            Outcome::Auc { .. } => "",
        };
        eprintln!(
            "failed cell: {} {} {} {}: {reason}",
            row.study, row.sweep_value, row.resolution, row.observer
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Invalid(vec![format!("threads: {e}")]))?;
    }
    let out = &cli.out_dir;
    std::fs::create_dir_all(out)?;
    let mut cache = BackgroundCache::new(DEFAULT_CACHE_BYTES);

    match &cli.command {
        Command::Gen {
            task,
            purpose,
            count,
        } => {
            let prepared = task.prepare(&cfg)?;
            let stream = Stream::new(cfg.seed, purpose, 0, *count);
            let (mut labels, mut hr, mut lr) = (Vec::new(), Vec::new(), Vec::new());
            for range in stream.chunks() {
                let mut m = measure(&prepared, &stream, range, &mut cache)?;
                labels.append(&mut m.labels);
                hr.append(&mut m.hr);
                lr.append(&mut m.lr);
            }
            let name = task.name(&cfg);
            for (res, images) in [("hr", hr), ("lr", lr)] {
                let path = out.join(format!("{name}-{purpose}-{res}.tbiq"));
                save_dataset(&path, &LabeledSet::new(images, labels.clone())?)?;
                println!("{}", path.display());
            }
        }
        Command::TrainSr { task, depth } => {
            let prepared = task.prepare(&cfg)?;
            let depth = depth.unwrap_or(cfg.sr.depth);
            let trained = train_srcnn(&cfg, &prepared, depth, 0, &mut cache)?;
            for e in &trained.history {
                println!(
                    "epoch {} train {:.6e} val {:?}",
                    e.epoch, e.train_loss, e.val_loss
                );
            }
            let path = out.join(format!("srcnn-{}-d{depth}.ckpt", task.name(&cfg)));
            save_checkpoint(&path, &trained.network, Some(&trained.optimizer))?;
            println!("{}", path.display());
        }
        Command::TrainObserver {
            task,
            observer,
            resolution,
            srcnn,
        } => {
            let prepared = task.prepare(&cfg)?;
            let sr = srcnn.as_deref().map(load_sr).transpose()?;
            let res = [*resolution];
            let streams = EvalStreams::new(&cfg, 0);
            let o = &cfg.observers;
            let name = task.name(&cfg);
            let failure =
                |e: &String| ExperimentError::Core(sriq_core::Error::InvalidParameter(e.clone()));
            let rho = |cache: &mut BackgroundCache| -> Result<_> {
                let (stats, _) = collect_stats(
                    &prepared,
                    &streams.cov,
                    sr.as_ref(),
                    &res,
                    true,
                    None,
                    cache,
                )?;
                let stats = stats[resolution].as_ref().map_err(failure)?;
                let val = stream_views(&prepared, &streams.lambda_val, sr.as_ref(), &res, cache)?;
                let grid = lambda_grid(o.lambda_range.0, o.lambda_range.1, o.lambda_per_decade)?;
                fit_rho(stats, Labeled::of(&val, *resolution), &grid)
            };
            let path = match observer {
                ObserverArg::Rho => {
                    let t = rho(&mut cache)?;
                    let path = out.join(format!("rho-{name}-{resolution}.ltpl"));
                    save_template(&path, &t)?;
                    path
                }
                ObserverArg::Cho => {
                    let (w, h) = prepared.spec().crop_dims;
                    let chs = gabor_channels(w, h)?;
                    let (_, stats) = collect_stats(
                        &prepared,
                        &streams.cov,
                        sr.as_ref(),
                        &res,
                        false,
                        Some(&chs),
                        &mut cache,
                    )?;
                    let t =
                        cho_template(stats[resolution].as_ref().map_err(failure)?, o.cho_lambda)?;
                    let path = out.join(format!("cho-{name}-{resolution}.ltpl"));
                    save_template(&path, &t)?;
                    path
                }
                ObserverArg::Learned => {
                    let spec = cfg.learned_spec(o.learned.blocks);
                    let template = match spec.init {
                        ObserverInit::RhoTemplate => {
                            let (w, h) = prepared.spec().crop_dims;
                            Some(template_image(&rho(&mut cache)?, w, h)?)
                        }
                        ObserverInit::Random => None,
                    };
                    let train =
                        stream_views(&prepared, &streams.obs_train, sr.as_ref(), &res, &mut cache)?;
                    let val =
                        stream_views(&prepared, &streams.obs_val, sr.as_ref(), &res, &mut cache)?;
                    let net = train_learned(
                        &spec,
                        template.as_ref(),
                        Labeled::of(&train, *resolution),
                        Labeled::of(&val, *resolution),
                        o.learned.flips,
                        &cfg.learned_train_config(derive_seed(cfg.seed, tag("learned"), 0)),
                    )?;
                    let path = out.join(format!("learned-{name}-{resolution}.ckpt"));
                    save_checkpoint(&path, &net, None)?;
                    path
                }
            };
            println!("{}", path.display());
        }
        Command::Eval { task, srcnn } => {
            let prepared = task.prepare(&cfg)?;
            let sr = match srcnn {
                Some(p) => load_sr(p)?,
                None => train_srcnn(&cfg, &prepared, cfg.sr.depth, 0, &mut cache)?.network,
            };
            let plan = EvalPlan {
                cfg: &cfg,
                roster: &cfg.observers.roster,
                resolutions: &Resolution::ALL,
                streams: EvalStreams::new(&cfg, 0),
                learned_seed: derive_seed(cfg.seed, tag("learned"), 0),
            };
            let results = evaluate(&plan, &prepared, Some(&sr), &mut cache)?;
            let value = match task.task {
                TaskArg::Rayleigh => f64::from(task.length.unwrap_or(cfg.srcnn_depth.length)),
                TaskArg::Mc => 0.0,
            };
            let report = Report {
                rows: rows_for("eval", value, cfg.seed, &results),
            };
            for row in &report.rows {
                let auc = row
                    .outcome
                    .auc()
                    .map_or("failed".to_string(), |a| format!("{a:.4}"));
                println!("{} {} {}", row.resolution, row.observer, auc);
            }
            let path = out.join(format!("eval-{}.csv", task.name(&cfg)));
            write_csv(&report, &path)?;
            println!("{}", path.display());
        }
        Command::Study { study } => {
            let (name, x_label) = match study {
                StudyArg::RayleighLength => ("rayleigh-length", "signal length"),
                StudyArg::SrcnnDepth => ("srcnn-depth", "SRCNN layers"),
                StudyArg::McCapacity => ("mc-capacity", "training images"),
            };
            let mut progress = Console {
                partial: Some(out.join(format!("{name}.partial.csv"))),
            };
            let output = match study {
                StudyArg::RayleighLength => run_signal_length_study(&cfg, &mut progress)?,
                StudyArg::SrcnnDepth => run_depth_study(&cfg, &mut progress)?,
                StudyArg::McCapacity => run_capacity_study(&cfg, &mut progress)?,
            };
            write_study(out, name, x_label, &output)?;
            if let Some(p) = progress.partial {
                let _ = std::fs::remove_file(p);
            }
            println!("{}", out.join(format!("{name}.csv")).display());
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
