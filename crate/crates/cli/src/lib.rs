//! The `wbeam` command-line pipeline.
//!
//! `simulate` renders a dataset and its manifest, `train` runs one training
//! stage from a manifest, `enhance` applies a beamformer to every record,
//! `evaluate` scores enhanced files and `inspect` summarises checkpoints and
//! manifests. Relative output paths resolve against `$WBEAM_OUT` when set.

pub mod enhance;
pub mod error;
pub mod simulate;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use wbeam_core::io::{Manifest, RunConfig};
use wbeam_core::metrics::{evaluate as evaluate_outputs, MetricReport};
use wbeam_core::room::{DatasetKind, ScenarioSampler, SimulationOptions, Split};
use wbeam_core::room::sources::SourceLibrary;
use wbeam_neural::Checkpoint;
use wbeam_train::{ExampleSource, ManifestSource, SimulatedSource, Stage, TrainConfig, TRAIN_SCHEMA};

pub use enhance::{EnhanceInfo, Method};
pub use error::{CliError, Result, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL};
pub use simulate::{MANIFEST_NAME, SIMULATE_SCHEMA};

pub const OUTPUT_ROOT_ENV: &str = "WBEAM_OUT";

#[derive(Debug, Parser)]
#[command(name = "wbeam", version, about = "W-Net and classic beamformers for simulated microphone arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render simulated array recordings and write a manifest.
    Simulate {
        /// Flat `key = value` file; unknown keys are rejected.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one training stage.
    Train {
        /// stage1 (or 1), stage2 (or 2), joint, finetune-m or unet-bf;
        /// overrides the config file.
        #[arg(long)]
        stage: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Training data; scenes are simulated on the fly when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Checkpoint to continue from.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Checkpoint path; the log goes next to it as `<out>.log.tsv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Beamform every record of a manifest split.
    Enhance {
        #[arg(long)]
        manifest: PathBuf,
        /// raw-ch1, das, gev, gev+post, unet-bf, wnet-bf or wnet-bf-m.
        #[arg(long)]
        method: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train, val, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score enhanced files and print a results table.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Label for the table.
        #[arg(long)]
        method: String,
        /// Directory written by `enhance`.
        #[arg(long)]
        outputs: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score even if the outputs came from a different manifest.
        #[arg(long)]
        force: bool,
    },
    /// Summarise a checkpoint or a manifest.
    Inspect { path: PathBuf },
}

/// `path` under `$WBEAM_OUT` when relative and the variable is set.
pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

fn load_config(schema: &[(&str, &str)], file: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut rc = RunConfig::with_defaults(schema);
    if let Some(f) = file {
        rc.merge_file(f)?;
    }
    for kv in overrides {
        rc.merge_override(kv)?;
    }
    Ok(rc)
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    match s {
        "all" => Ok(None),
        _ => Ok(Some(s.parse()?)),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    wbeam_core::Error::Io { path: path.to_path_buf(), source: e }.into()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, overrides, out } => {
            let rc = load_config(SIMULATE_SCHEMA, config.as_deref(), &overrides)?;
            let path = simulate::simulate(&rc, &output_path(&out))?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Train { stage, config, overrides, manifest, init, out } => {
            let mut rc = load_config(TRAIN_SCHEMA, config.as_deref(), &overrides)?;
            if let Some(s) = stage {
                let s: Stage = s.parse()?;
                rc.set("stage", s.as_str())?;
            }
            train(&rc, manifest.as_deref(), init.as_deref(), &output_path(&out))
        }
        Command::Enhance { manifest, method, checkpoint, split, out } => {
            let m = Manifest::read(&manifest)?;
            let method: Method = method.parse()?;
            let n = enhance::enhance(&m, parse_split(&split)?, method, checkpoint.as_deref(), &output_path(&out))?;
            log::info!("enhanced {n} utterances");
            Ok(())
        }
        Command::Evaluate { manifest, method, outputs, split, out, force } => {
            let table = evaluate(&manifest, &method, &output_path(&outputs), parse_split(&split)?, force)?;
            print!("{table}");
            if let Some(p) = out {
                let p = output_path(&p);
                std::fs::write(&p, &table).map_err(|e| io_err(&p, e))?;
            }
            Ok(())
        }
        Command::Inspect { path } => {
            print!("{}", inspect(&path)?);
            Ok(())
        }
    }
}

/// Runs one stage and writes the checkpoint and its log.
pub fn train(rc: &RunConfig, manifest: Option<&Path>, init: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = TrainConfig::from_run_config(rc)?;
    let hash = rc.hash(None);
    let init = init.map(Checkpoint::load).transpose()?;
    let (train_set, val_set, data_hash): (Box<dyn ExampleSource>, Box<dyn ExampleSource>, String) = match manifest {
        Some(p) => {
            let m = Manifest::read(p)?;
            m.check_paths()?;
            let h = m.config_hash.clone();
            let kinds = cfg.dataset.kinds();
            let tr = ManifestSource::new(m.clone(), Split::Train, kinds, cfg.segment_frames);
            let va = ManifestSource::new(m, Split::Val, kinds, cfg.segment_frames);
            (Box::new(tr), Box::new(va), h)
        }
        None => {
            let sampler = ScenarioSampler {
                snr_mean_db: cfg.snr_mean_db,
                snr_std_db: cfg.snr_std_db,
                ..ScenarioSampler::default()
            };
            let source = |split, count| SimulatedSource {
                sampler,
                library: SourceLibrary::Synthetic,
                options: SimulationOptions::default(),
                seed: cfg.seed,
                split,
                kinds: cfg.dataset.kinds().to_vec(),
                count,
                frames: cfg.segment_frames,
            };
            let n = cfg.utterance_budget.max(1) as usize;
            (Box::new(source(Split::Train, n)), Box::new(source(Split::Val, 64)), "simulated".into())
        }
    };
    if train_set.is_empty() || val_set.is_empty() {
        return Err(CliError::Config(format!(
            "manifest has no {} records in the train and val splits",
            cfg.dataset.as_str()
        )));
    }
    log::info!(
        "stage {}: {} training / {} validation utterances",
        cfg.stage,
        train_set.len(),
        val_set.len()
    );
    let mut outcome = wbeam_train::train(&cfg, &hash, init.as_ref(), train_set.as_ref(), val_set.as_ref())?;
    outcome.checkpoint.meta.extra.insert("data_config_hash".into(), data_hash);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    outcome.checkpoint.save(out)?;
    let log_path = PathBuf::from(format!("{}.log.tsv", out.display()));
    std::fs::write(&log_path, outcome.log.to_table()).map_err(|e| io_err(&log_path, e))?;
    println!(
        "{}\tstage={}\tvalidation_loss={:.6e}\tutterances_seen={}",
        out.display(),
        outcome.checkpoint.meta.stage,
        outcome.checkpoint.meta.validation_loss,
        outcome.checkpoint.meta.utterances_seen
    );
    Ok(())
}

/// Scores `outputs` against the manifest and renders the report table,
/// prefixed by a comment line naming the manifest's config hash.
pub fn evaluate(manifest: &Path, method: &str, outputs: &Path, split: Option<Split>, force: bool) -> Result<String> {
    let mut m = Manifest::read(manifest)?;
    if let Some(info) = EnhanceInfo::read(outputs)? {
        if info.manifest_config_hash != m.config_hash && !force {
            return Err(CliError::Config(format!(
                "{} was produced from manifest config {}, not {}; pass --force to score anyway",
                outputs.display(),
                info.manifest_config_hash,
                m.config_hash
            )));
        }
    }
    m.records.retain(|r| split.map_or(true, |s| r.split == s));
    if m.records.is_empty() {
        return Err(CliError::Config("no manifest records to evaluate".into()));
    }
    // One row per dataset kind, as in a results table.
    let mut table = format!("# config_hash {}\n{}\n", m.config_hash, MetricReport::table_header());
    for kind in [DatasetKind::Static, DatasetKind::Moving] {
        let mut part = m.clone();
        part.records.retain(|r| r.dataset == kind);
        if !part.records.is_empty() {
            table.push_str(&evaluate_outputs(&part, method, outputs)?.table_row());
            table.push('\n');
        }
    }
    Ok(table)
}

/// Human-readable summary of a checkpoint or manifest.
pub fn inspect(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut out = String::new();
    if bytes.starts_with(wbeam_neural::checkpoint::MAGIC) {
        let c = Checkpoint::from_bytes(&bytes, path)?;
        let meta = &c.meta;
        out.push_str(&format!("checkpoint\t{}\n", path.display()));
        out.push_str(&format!("stage\t{}\n", meta.stage));
        out.push_str(&format!("utterances_seen\t{}\n", meta.utterances_seen));
        out.push_str(&format!("validation_loss\t{:.6e}\n", meta.validation_loss));
        out.push_str(&format!("timestamp\t{}\n", meta.timestamp));
        out.push_str(&format!("config_hash\t{}\n", meta.config_hash));
        out.push_str(&format!("spec_fingerprint\t{}\n", meta.spec_fingerprint));
        for (name, spec) in &meta.specs {
            out.push_str(&format!(
                "network\t{name}\t{}->{} channels\t{} parameters\n",
                spec.in_channels,
                spec.out_channels,
                spec.param_count()
            ));
        }
        out.push_str(&format!("parameters\t{}\n", c.store.scalar_count()));
        for (k, v) in &meta.extra {
            out.push_str(&format!("{k}\t{v}\n"));
        }
    } else {
        let m = Manifest::read(path)?;
        out.push_str(&format!("manifest\t{}\n", path.display()));
        out.push_str(&format!("config_hash\t{}\n", m.config_hash));
        for split in [Split::Train, Split::Val, Split::Test] {
            for kind in [DatasetKind::Static, DatasetKind::Moving] {
                let snrs: Vec<f64> = m
                    .records
                    .iter()
                    .filter(|r| r.split == split && r.dataset == kind)
                    .map(|r| r.realized_snr_db)
                    .collect();
                if !snrs.is_empty() {
                    let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
                    out.push_str(&format!(
                        "{split}\t{}\t{} utterances\tmean SNR {mean:.2} dB\n",
                        kind.as_str(),
                        snrs.len()
                    ));
                }
            }
        }
    }
    Ok(out)
}
