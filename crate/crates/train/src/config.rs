use std::fmt;
use std::str::FromStr;

use wbeam_core::io::RunConfig;
use wbeam_core::room::DatasetKind;
use wbeam_neural::Objective;

use crate::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// UNET1 on the reference-magnitude loss.
    Stage1,
    /// UNET2 on the filter loss with the true reference magnitude as input.
    Stage2,
    /// Both networks on the filter loss.
    Joint,
    /// Joint training continued on static and moving scenes.
    FinetuneMoving,
    /// Single-network comparator.
    UnetBf,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Stage1,
        Stage::Stage2,
        Stage::Joint,
        Stage::FinetuneMoving,
        Stage::UnetBf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
            Stage::Joint => "joint",
            Stage::FinetuneMoving => "finetune-m",
            Stage::UnetBf => "unet-bf",
        }
    }

    /// Objective of the W-Net stages; `None` for the comparator.
    pub fn objective(self) -> Option<Objective> {
        match self {
            Stage::Stage1 => Some(Objective::Magnitude),
            Stage::Stage2 => Some(Objective::FilterOracle),
            Stage::Joint | Stage::FinetuneMoving => Some(Objective::Joint),
            Stage::UnetBf => None,
        }
    }

    /// Whether the stage continues from an existing checkpoint.
    pub fn needs_init(self) -> bool {
        matches!(self, Stage::Joint | Stage::FinetuneMoving)
    }

    pub fn loss_name(self) -> &'static str {
        match self {
            Stage::Stage1 => "L1",
            _ => "L2",
        }
    }

    fn tag(self) -> u64 {
        Stage::ALL.iter().position(|s| *s == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = TrainError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stage1" | "1" => Ok(Stage::Stage1),
            "stage2" | "2" => Ok(Stage::Stage2),
            "joint" => Ok(Stage::Joint),
            "finetune-m" => Ok(Stage::FinetuneMoving),
            "unet-bf" => Ok(Stage::UnetBf),
            _ => Err(TrainError::Config(format!("unknown stage `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMix {
    Static,
    StaticMoving,
}

impl DataMix {
    pub fn kinds(self) -> &'static [DatasetKind] {
        match self {
            DataMix::Static => &[DatasetKind::Static],
            DataMix::StaticMoving => &[DatasetKind::Static, DatasetKind::Moving],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataMix::Static => "static",
            DataMix::StaticMoving => "static+moving",
        }
    }
}

impl FromStr for DataMix {
    type Err = TrainError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(DataMix::Static),
            "static+moving" => Ok(DataMix::StaticMoving),
            _ => Err(TrainError::Config(format!("unknown dataset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub stage: Stage,
    /// Utterance segments consumed by the stage, repeats included.
    pub utterance_budget: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Mixing SNR distribution for scenes simulated on the fly.
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    pub seed: u64,
    pub dataset: DataMix,
    /// Hidden widths of every network are divided by this.
    pub width_divisor: usize,
    pub mics: usize,
    /// Validate after every this many utterances, and at the end.
    pub validation_every: u64,
    pub segment_frames: usize,
    /// Checkpoint timestamp; `None` reads the clock.
    pub timestamp: Option<u64>,
}

/// Keys accepted in a training config file, with their defaults.
pub const TRAIN_SCHEMA: &[(&str, &str)] = &[
    ("stage", "stage1"),
    ("utterance_budget", "15000000"),
    ("batch_size", "4"),
    ("learning_rate", "1e-4"),
    ("snr_mean_db", "5"),
    ("snr_std_db", "5"),
    ("seed", "1"),
    ("dataset", "static"),
    ("width_divisor", "1"),
    ("mics", "6"),
    ("validation_every", "1000"),
    ("segment_frames", "256"),
    ("timestamp", "auto"),
];

impl Default for TrainConfig {
    fn default() -> Self {
        Self::from_run_config(&RunConfig::with_defaults(TRAIN_SCHEMA)).expect("schema defaults parse")
    }
}

impl TrainConfig {
    /// Reduced-width profile that trains in hours on one CPU core.
    pub fn desk(stage: Stage) -> Self {
        Self {
            stage,
            utterance_budget: 2000,
            learning_rate: 1e-3,
            width_divisor: 4,
            validation_every: 250,
            dataset: if stage == Stage::FinetuneMoving {
                DataMix::StaticMoving
            } else {
                DataMix::Static
            },
            ..Self::default()
        }
    }

    pub fn from_run_config(rc: &RunConfig) -> Result<Self> {
        let timestamp = match rc.get("timestamp")? {
            "auto" => None,
            _ => Some(rc.parse("timestamp")?),
        };
        let cfg = Self {
            stage: rc.get("stage")?.parse()?,
            utterance_budget: rc.parse("utterance_budget")?,
            batch_size: rc.parse("batch_size")?,
            learning_rate: rc.parse("learning_rate")?,
            snr_mean_db: rc.parse("snr_mean_db")?,
            snr_std_db: rc.parse("snr_std_db")?,
            seed: rc.parse("seed")?,
            dataset: rc.get("dataset")?.parse()?,
            width_divisor: rc.parse("width_divisor")?,
            mics: rc.parse("mics")?,
            validation_every: rc.parse("validation_every")?,
            segment_frames: rc.parse("segment_frames")?,
            timestamp,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config as a [`RunConfig`], whose hash identifies the run.
    pub fn to_run_config(&self) -> RunConfig {
        let mut rc = RunConfig::with_defaults(TRAIN_SCHEMA);
        let ts = self.timestamp.map_or("auto".to_string(), |t| t.to_string());
        let pairs = [
            ("stage", self.stage.to_string()),
            ("utterance_budget", self.utterance_budget.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", format!("{:e}", self.learning_rate)),
            ("snr_mean_db", self.snr_mean_db.to_string()),
            ("snr_std_db", self.snr_std_db.to_string()),
            ("seed", self.seed.to_string()),
            ("dataset", self.dataset.as_str().to_string()),
            ("width_divisor", self.width_divisor.to_string()),
            ("mics", self.mics.to_string()),
            ("validation_every", self.validation_every.to_string()),
            ("segment_frames", self.segment_frames.to_string()),
            ("timestamp", ts),
        ];
        for (k, v) in pairs {
            rc.set(k, &v).expect("schema key");
        }
        rc
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.width_divisor == 0 || self.mics == 0 || self.segment_frames == 0 {
            return bad("width_divisor, mics and segment_frames must be positive");
        }
        if self.validation_every == 0 {
            return bad("validation_every must be positive");
        }
        if !(self.snr_std_db >= 0.0 && self.snr_mean_db.is_finite()) {
            return bad("SNR distribution must be finite with nonnegative spread");
        }
        Ok(())
    }

    /// Seed of the stream that drives data order and crops for this stage.
    pub(crate) fn data_stream(&self) -> u64 {
        self.stage.tag()
    }
}
