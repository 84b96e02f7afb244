use clap::{Args, Parser, Subcommand};
use ctscan::checkpoint::Checkpoint;
use ctscan::config::RunConfig;
use ctscan::dataset::Dataset;
use ctscan::error::Error;
use ctscan::eval::{
    evaluate, report_csv, summary_line, Policy, SUMMARY_HEADER,
};
use ctscan::phantoms::generate_dataset;
use ctscan::plot::{comparison_svg, training_curve_svg};
use ctscan::trainer::{metrics_csv, parse_metrics_csv, TrainRecord, TrainerState};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ctscan", about = "Adaptive scan-angle selection for sparse-angle CT")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (flat key = value document)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seeds
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a phantom corpus file
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train a policy against a generated corpus
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus file produced by gen-data
        #[arg(long)]
        data: PathBuf,
        /// Resume from an existing checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate policies on a corpus
    Eval {
        #[command(flatten)]
        common: Common,
        /// Corpus file produced by gen-data
        #[arg(long)]
        data: PathBuf,
        /// Trained checkpoint; omit for a baseline-only comparison
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluation worker threads
        #[arg(long)]
        workers: Option<usize>,
        /// Forbid repeated angle selections in the environment
        #[arg(long)]
        mask_repeats: bool,
        /// Use greedy (argmax) actions for the learned policy
        #[arg(long)]
        greedy: bool,
    },
    /// Render SVG reports from metrics / summary CSVs
    Plot {
        /// Training metrics CSV
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Evaluation summary CSV
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the header and config of a checkpoint
    InspectCheckpoint {
        path: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::TrainingAbort(_) => 3,
        Error::State(_) => 4,
        Error::Format(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.data_seed = seed;
        cfg.train_seed = seed;
        cfg.eval_seed = seed;
    }
    Ok(cfg)
}

fn echo_config(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let rendered = cfg.render();
    print!("{rendered}");
    std::fs::write(out.join("resolved-config.txt"), rendered)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::GenData { common } => {
            let cfg = load_config(&common)?;
            echo_config(&cfg, &common.out)?;
            let spec = cfg.dataset_spec();
            let records = generate_dataset(&spec)?;
            let ds = Dataset::new(cfg.image_size, records)?;
            let path = common.out.join("corpus.ctph");
            ds.save(&path)?;
            let kinds = cfg
                .shape_kinds
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(",");
            println!(
                "wrote {} with {} phantoms (kinds: {kinds}; rotation grid: 36 x 5 degrees)",
                path.display(),
                ds.records.len()
            );
            Ok(())
        }
        Cmd::Train {
            common,
            data,
            resume,
        } => {
            let cfg = load_config(&common)?;
            echo_config(&cfg, &common.out)?;
            let ds = Dataset::load(&data)?;
            if ds.image_size != cfg.image_size {
                return Err(Error::State(format!(
                    "dataset image size {} does not match config image size {}",
                    ds.image_size, cfg.image_size
                )));
            }
            let images = ds.images();
            let env_cfg = cfg.env_config(cfg.noise_level)?;
            let tcfg = cfg.train_config();
            let mut state = match resume {
                Some(path) => Checkpoint::load(&path)?.into_trainer(),
                None => TrainerState::new(cfg.image_size, &tcfg)?,
            };
            let mut records: Vec<TrainRecord> = Vec::new();
            let ckpt_path = common.out.join("checkpoint.ctac");
            let every = if cfg.checkpoint_every == 0 {
                cfg.episodes
            } else {
                cfg.checkpoint_every
            };
            while (state.episode as usize) < cfg.episodes {
                let left = cfg.episodes - state.episode as usize;
                let chunk = left.min(every);
                match state.run_episodes(&images, &env_cfg, &tcfg, chunk) {
                    Ok(rs) => records.extend(rs),
                    Err(e) => {
                        // keep a partial checkpoint of the last good state
                        Checkpoint::from_trainer(&cfg, &state).save(&ckpt_path)?;
                        std::fs::write(
                            common.out.join("metrics.csv"),
                            metrics_csv(&records),
                        )?;
                        return Err(e);
                    }
                }
                Checkpoint::from_trainer(&cfg, &state).save(&ckpt_path)?;
            }
            std::fs::write(common.out.join("metrics.csv"), metrics_csv(&records))?;
            println!(
                "trained through episode {} ({} new episodes); checkpoint at {}",
                state.episode,
                records.len(),
                ckpt_path.display()
            );
            Ok(())
        }
        Cmd::Eval {
            common,
            data,
            checkpoint,
            workers,
            mask_repeats,
            greedy,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.mask_repeats |= mask_repeats;
            let ds = Dataset::load(&data)?;
            let ck = match &checkpoint {
                Some(path) => Some(Checkpoint::load(path)?),
                None => None,
            };
            if let Some(ck) = &ck {
                if ck.config.image_size != ds.image_size {
                    return Err(Error::State(format!(
                        "checkpoint image size {} does not match dataset image size {}",
                        ck.config.image_size, ds.image_size
                    )));
                }
                // evaluate with the training-time geometry and recon settings
                let seeds = (cfg.eval_seed, cfg.eval_noise_level, cfg.eval_count);
                let masked = cfg.mask_repeats;
                cfg = ck.config.clone();
                cfg.eval_seed = seeds.0;
                cfg.eval_noise_level = seeds.1;
                cfg.eval_count = seeds.2;
                cfg.mask_repeats = masked;
            }
            echo_config(&cfg, &common.out)?;
            let env_cfg = cfg.env_config(cfg.eval_noise_level)?;
            let workers = workers.unwrap_or(cfg.workers);
            let images = ds.images();
            let mut policies: Vec<Policy> = vec![Policy::Equidistant, Policy::Random];
            if let Some(ck) = &ck {
                policies.push(Policy::Learned {
                    params: &ck.params,
                    greedy: true,
                });
                if !greedy {
                    policies.push(Policy::Learned {
                        params: &ck.params,
                        greedy: false,
                    });
                }
            }
            let mut summary = String::from(SUMMARY_HEADER);
            summary.push('\n');
            for pol in &policies {
                let rep = evaluate(pol, "corpus", &images, &env_cfg, cfg.eval_seed, workers)?;
                std::fs::write(
                    common.out.join(format!("report-{}.csv", rep.policy_id)),
                    report_csv(&rep),
                )?;
                let line = summary_line(&rep, cfg.horizon);
                println!("{line}");
                summary.push_str(&line);
                summary.push('\n');
            }
            std::fs::write(common.out.join("summary.csv"), summary)?;
            Ok(())
        }
        Cmd::Plot { metrics, summary, out } => {
            std::fs::create_dir_all(&out)?;
            if let Some(path) = metrics {
                let records = parse_metrics_csv(&std::fs::read_to_string(&path)?)?;
                let returns: Vec<f64> = records.iter().map(|r| r.ret).collect();
                let svg = training_curve_svg(&returns, 500, "training return", "return");
                let dst = out.join("training-curve.svg");
                std::fs::write(&dst, svg)?;
                println!("wrote {}", dst.display());
            }
            if let Some(path) = summary {
                let rows =
                    ctscan::eval::parse_summary_csv(&std::fs::read_to_string(&path)?)?;
                let mut ms: Vec<usize> = rows.iter().map(|r| r.1).collect();
                ms.sort_unstable();
                ms.dedup();
                for m in ms {
                    let groups: Vec<(String, Vec<f64>)> = rows
                        .iter()
                        .filter(|r| r.1 == m)
                        .map(|r| (r.0.clone(), vec![r.2 - r.3, r.2, r.2 + r.3]))
                        .collect();
                    let svg =
                        comparison_svg(&groups, &format!("policy comparison, m = {m}"), "psnr (db)")?;
                    let dst = out.join(format!("comparison-m{m}.svg"));
                    std::fs::write(&dst, svg)?;
                    println!("wrote {}", dst.display());
                }
            }
            Ok(())
        }
        Cmd::InspectCheckpoint { path } => {
            let ck = Checkpoint::load(&path)?;
            println!("checkpoint: {}", path.display());
            println!("episode: {}", ck.episode);
            let n_params: usize = ck
                .params
                .named_tensors()
                .iter()
                .map(|(_, t)| t.len())
                .sum();
            println!("parameters: {n_params}");
            for (name, t) in ck.params.named_tensors() {
                println!("  {name}: {:?}", t.shape);
            }
            println!("config:");
            for line in ck.config.render().lines() {
                println!("  {line}");
            }
            Ok(())
        }
    }
}
