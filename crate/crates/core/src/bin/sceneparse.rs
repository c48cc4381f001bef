use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sceneparse::harness::{
    exhaustive_oracle, frame_input, frame_stem, read_scene, report_export, run_experiment, tower, write_scene, ExperimentConfig,
    ReportFormat,
};
use sceneparse::parser::{parse_frame, SceneEstimate};
use sceneparse::sensor::CloudIndex;
use sceneparse::{Error, Result};

#[derive(Parser)]
#[command(name = "sceneparse", version, about = "Physics-based sequential scene parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self, fallback: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => fallback(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the scripted scene: per-frame clouds, ground truth and detector hypotheses.
    GenScene {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Repeat index whose noise stream is used.
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Parse a directory written by gen-scene, one estimate file per frame.
    Parse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every repeat of an experiment and export the report.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
    /// Compare the greedy parse of one frame with the exhaustive search.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Writes oracle.json here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a config with every default filled in.
    DumpDefaults {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&Path>, file: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(file);
            fs::write(&path, text)?;
            println!("{}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn tiny_instance() -> ExperimentConfig {
    ExperimentConfig { name: "oracle".into(), script: tower(2, 1), k: 3, ..ExperimentConfig::default() }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScene { cfg, out, repeat } => {
            let cfg = cfg.load(ExperimentConfig::default)?;
            if repeat >= cfg.repeats {
                return Err(Error::InvalidParameter(format!("repeat {repeat} out of range (config has {})", cfg.repeats)));
            }
            for path in write_scene(&cfg, repeat, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Parse { input, out } => {
            let scene = read_scene(&input)?;
            let params = scene.config.parser_params();
            fs::create_dir_all(&out)?;
            let mut prev = SceneEstimate::empty();
            for (dump, cloud) in &scene.frames {
                let start = Instant::now();
                let hyps = dump.hypothesis_set(&scene.models)?;
                let est = parse_frame(&prev, &hyps, cloud, &params).map_err(|e| Error::Frame { frame: dump.frame, source: Box::new(e) })?;
                eprintln!("frame {}: {} objects, {} sims, {:.2} s", dump.frame, est.objects.len(), est.sim_calls, start.elapsed().as_secs_f64());
                let path = out.join(format!("{}_estimate.json", frame_stem(dump.frame)));
                fs::write(&path, est.to_json())?;
                println!("{}", path.display());
                prev = est;
            }
        }
        Command::Experiment { cfg, out, format } => {
            let cfg = cfg.load(ExperimentConfig::default)?;
            let start = Instant::now();
            let report = run_experiment(&cfg)?;
            let frame_time: f64 = report.wall_clock.iter().sum();
            eprintln!(
                "{}: {} repeats, {} frames, {:.2} s total, {:.2} s parsing",
                cfg.name,
                cfg.repeats,
                report.frames.len(),
                start.elapsed().as_secs_f64(),
                frame_time
            );
            for path in report_export(&report, &out, format)? {
                println!("{}", path.display());
            }
        }
        Command::Oracle { cfg, frame, out } => {
            let cfg = cfg.load(tiny_instance)?;
            let models = cfg.models()?;
            let params = cfg.parser_params();
            let input = frame_input(&cfg, &models, frame, cfg.repeat_seed(0))?;
            let greedy = parse_frame(&SceneEstimate::empty(), &input.hypotheses, &input.cloud, &params)?;
            let index = CloudIndex::new(&input.cloud.unlabeled(), params.guiding.d_t);
            let ctx = params.context(&index, None);
            let oracle = exhaustive_oracle(&input.hypotheses, &params.empty_world(), &ctx, params.parallel)?;
            let doc = json!({
                "frame": frame,
                "search_size": input.hypotheses.search_size() as u64,
                "greedy": {
                    "log_prob": greedy.score.log_prob,
                    "sim_calls": greedy.sim_calls,
                    "configuration": greedy.configuration,
                },
                "oracle": {
                    "log_prob": oracle.score.log_prob,
                    "configuration": oracle.configuration,
                },
                "same_configuration": greedy.configuration == oracle.configuration,
                "margin": greedy.score.log_prob - oracle.score.log_prob,
            });
            emit(&serde_json::to_string_pretty(&doc)?, out.as_deref(), "oracle.json")?;
        }
        Command::DumpDefaults { out } => {
            emit(&ExperimentConfig::default().to_json(), out.as_deref(), "defaults.json")?;
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
