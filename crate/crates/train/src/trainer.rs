use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbeam_neural::wnet::{UNET1_PREFIX, UNET2_PREFIX, UNETB_PREFIX};
use wbeam_neural::{
    build_timestamp, wnet_specs, Adam, Checkpoint, CheckpointMeta, Example, FilterUNet,
    ParamStore, Tensor, UNetSpec, WNet,
};

use crate::data::ExampleSource;
use crate::log::{LogRow, TrainLog};
use crate::{Result, Stage, TrainConfig, TrainError};

/// A network bound to a parameter store.
#[derive(Debug, Clone)]
pub enum Model {
    WNet(WNet),
    UNetBf(FilterUNet),
}

impl Model {
    /// Architectures keyed by parameter prefix.
    pub fn specs(&self) -> BTreeMap<String, UNetSpec> {
        match self {
            Model::WNet(n) => BTreeMap::from([
                (UNET1_PREFIX.to_string(), n.unet1.spec.clone()),
                (UNET2_PREFIX.to_string(), n.unet2.spec.clone()),
            ]),
            Model::UNetBf(n) => BTreeMap::from([(UNETB_PREFIX.to_string(), n.unet.spec.clone())]),
        }
    }

    /// Rebinds the networks recorded in a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let specs = &ckpt.meta.specs;
        if CheckpointMeta::fingerprint_of(specs) != ckpt.meta.spec_fingerprint {
            return Err(TrainError::Config("checkpoint spec fingerprint does not match its specs".into()));
        }
        match (specs.get(UNET1_PREFIX), specs.get(UNET2_PREFIX), specs.get(UNETB_PREFIX)) {
            (Some(s1), Some(s2), None) => {
                Ok(Model::WNet(WNet::bind(s1.clone(), s2.clone(), &ckpt.store)?))
            }
            (None, None, Some(s)) => Ok(Model::UNetBf(FilterUNet::bind(s.clone(), &ckpt.store)?)),
            _ => Err(TrainError::Config("checkpoint holds neither a W-Net nor a U-Net BF".into())),
        }
    }

    fn loss(&self, store: &ParamStore, ex: &Example, stage: Stage) -> Result<f64> {
        Ok(match (self, stage.objective()) {
            (Model::WNet(n), Some(obj)) => n.loss(store, ex, obj)?,
            (Model::UNetBf(n), None) => n.loss(store, ex)?,
            _ => unreachable!("stage and model are checked together"),
        })
    }

    fn loss_and_backward(&self, store: &mut ParamStore, ex: &Example, stage: Stage) -> Result<f64> {
        Ok(match (self, stage.objective()) {
            (Model::WNet(n), Some(obj)) => n.loss_and_backward(store, ex, obj)?,
            (Model::UNetBf(n), None) => n.loss_and_backward(store, ex)?,
            _ => unreachable!("stage and model are checked together"),
        })
    }
}

/// Parameter ids a stage updates.
pub fn trained_ids(store: &ParamStore, stage: Stage) -> Vec<usize> {
    let pre = |p: &str| store.ids_with_prefix(&format!("{p}."));
    match stage {
        Stage::Stage1 => pre(UNET1_PREFIX),
        Stage::Stage2 => pre(UNET2_PREFIX),
        Stage::Joint | Stage::FinetuneMoving => {
            let mut ids = pre(UNET1_PREFIX);
            ids.extend(pre(UNET2_PREFIX));
            ids
        }
        Stage::UnetBf => pre(UNETB_PREFIX),
    }
}

/// Index of the smallest loss; ties go to the earliest.
pub fn best_index(losses: &[f64]) -> Result<usize> {
    if losses.is_empty() {
        return Err(TrainError::Config("no checkpoints to select from".into()));
    }
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Checkpoint with the lowest validation loss, earliest on ties.
pub fn select_best(checkpoints: &[Checkpoint]) -> Result<&Checkpoint> {
    let losses: Vec<f64> = checkpoints.iter().map(|c| c.meta.validation_loss).collect();
    Ok(&checkpoints[best_index(&losses)?])
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation parameters.
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
}

fn initial_model(cfg: &TrainConfig, init: Option<&Checkpoint>) -> Result<(Model, ParamStore)> {
    let want: BTreeMap<String, UNetSpec> = if cfg.stage == Stage::UnetBf {
        let s = UNetSpec::single_net(2 * cfg.mics, 2 * cfg.mics).narrowed(cfg.width_divisor);
        BTreeMap::from([(UNETB_PREFIX.to_string(), s)])
    } else {
        let (s1, s2) = wnet_specs(cfg.mics, cfg.width_divisor);
        BTreeMap::from([(UNET1_PREFIX.to_string(), s1), (UNET2_PREFIX.to_string(), s2)])
    };
    match init {
        Some(ckpt) => {
            if ckpt.meta.specs != want {
                return Err(TrainError::Config(format!(
                    "initial checkpoint architecture {} does not match the configured {}",
                    ckpt.meta.spec_fingerprint,
                    CheckpointMeta::fingerprint_of(&want)
                )));
            }
            Ok((Model::from_checkpoint(ckpt)?, ckpt.store.clone()))
        }
        None if cfg.stage.needs_init() => Err(TrainError::Config(format!(
            "stage {} continues from a checkpoint; none given",
            cfg.stage
        ))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut store = ParamStore::new();
            let model = if cfg.stage == Stage::UnetBf {
                Model::UNetBf(FilterUNet::register(cfg.mics, cfg.width_divisor, &mut store, &mut rng)?)
            } else {
                Model::WNet(WNet::register(cfg.mics, cfg.width_divisor, &mut store, &mut rng)?)
            };
            Ok((model, store))
        }
    }
}

/// Mean loss of the stage's objective over every validation example.
pub fn validation_loss(
    model: &Model,
    store: &ParamStore,
    stage: Stage,
    val: &dyn ExampleSource,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..val.len() {
        total += model.loss(store, &val.load(i, None)?, stage)?;
    }
    Ok(total / val.len() as f64)
}

fn snapshot(store: &ParamStore, ids: &[usize]) -> Vec<Tensor> {
    ids.iter().map(|&i| store.value(i).clone()).collect()
}

/// Runs one training stage: Adam on mini-batches of `batch_size` segments
/// until `utterance_budget` segments are consumed, validating at the start,
/// every `validation_every` segments and at the end. The returned checkpoint
/// holds the full parameter store with the stage's networks at their best
/// validation loss.
pub fn train(
    cfg: &TrainConfig,
    config_hash: &str,
    init: Option<&Checkpoint>,
    train: &dyn ExampleSource,
    val: &dyn ExampleSource,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Config("training and validation sets must be nonempty".into()));
    }
    let stage = cfg.stage;
    let (model, mut store) = initial_model(cfg, init)?;
    let ids = trained_ids(&store, stage);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.data_stream());
    let mut adam = Adam::new(cfg.learning_rate);
    let mut log = TrainLog::new(stage.loss_name());
    let diverged = |seen: u64, loss: f64| TrainError::Diverged {
        stage: stage.to_string(),
        utterances: seen,
        loss,
    };

    let v0 = validation_loss(&model, &store, stage, val)?;
    if !v0.is_finite() {
        return Err(diverged(0, v0));
    }
    log.rows.push(LogRow { step: 0, utterances: 0, train_loss: None, validation_loss: Some(v0) });
    let mut best = (v0, 0u64, snapshot(&store, &ids));

    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut seen = 0u64;
    let mut step = 0u64;
    while seen < cfg.utterance_budget {
        let batch = (cfg.batch_size as u64).min(cfg.utterance_budget - seen);
        store.zero_grads();
        let mut batch_loss = 0.0;
        for _ in 0..batch {
            if cursor == order.len() {
                order = (0..train.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = train.load(order[cursor], Some(&mut rng))?;
            cursor += 1;
            let l = model.loss_and_backward(&mut store, &ex, stage)?;
            if !l.is_finite() {
                return Err(diverged(seen, l));
            }
            batch_loss += l;
        }
        adam.step(&mut store, &ids, 1.0 / batch as f64);
        let before = seen;
        seen += batch;
        step += 1;
        let due = seen / cfg.validation_every > before / cfg.validation_every || seen == cfg.utterance_budget;
        let validation = if due {
            let v = validation_loss(&model, &store, stage, val)?;
            if !v.is_finite() {
                return Err(diverged(seen, v));
            }
            if v < best.0 {
                best = (v, seen, snapshot(&store, &ids));
            }
            Some(v)
        } else {
            None
        };
        log.rows.push(LogRow {
            step,
            utterances: seen,
            train_loss: Some(batch_loss / batch as f64),
            validation_loss: validation,
        });
    }

    let (loss, at, values) = best;
    for (&id, v) in ids.iter().zip(values) {
        store.get_mut(id).value = v;
    }
    store.zero_grads();
    let specs = model.specs();
    let rc = cfg.to_run_config();
    let mut extra: BTreeMap<String, String> =
        rc.iter().map(|(k, v)| (format!("config.{k}"), v.to_string())).collect();
    extra.insert("steps".into(), step.to_string());
    extra.insert("utterances_total".into(), seen.to_string());
    if let Some(parent) = init {
        extra.insert("init_stage".into(), parent.meta.stage.clone());
        extra.insert("init_config_hash".into(), parent.meta.config_hash.clone());
    }
    let meta = CheckpointMeta {
        stage: stage.to_string(),
        utterances_seen: at,
        validation_loss: loss,
        timestamp: cfg.timestamp.unwrap_or_else(build_timestamp),
        config_hash: config_hash.to_string(),
        spec_fingerprint: CheckpointMeta::fingerprint_of(&specs),
        specs,
        extra,
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint { meta, store },
        log,
    })
}

pub fn train_stage1(
    cfg: &TrainConfig,
    config_hash: &str,
    train_set: &dyn ExampleSource,
    val: &dyn ExampleSource,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::Stage1)?;
    train(cfg, config_hash, None, train_set, val)
}

/// Stage 2 on top of an optional stage-1 checkpoint, whose UNET1 is carried
/// along untouched.
pub fn train_stage2(
    cfg: &TrainConfig,
    config_hash: &str,
    init: Option<&Checkpoint>,
    train_set: &dyn ExampleSource,
    val: &dyn ExampleSource,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::Stage2)?;
    train(cfg, config_hash, init, train_set, val)
}

pub fn train_joint(
    cfg: &TrainConfig,
    config_hash: &str,
    init: &Checkpoint,
    train_set: &dyn ExampleSource,
    val: &dyn ExampleSource,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::Joint)?;
    train(cfg, config_hash, Some(init), train_set, val)
}

pub fn finetune_moving(
    cfg: &TrainConfig,
    config_hash: &str,
    init: &Checkpoint,
    train_set: &dyn ExampleSource,
    val: &dyn ExampleSource,
) -> Result<TrainOutcome> {
    expect_stage(cfg, Stage::FinetuneMoving)?;
    train(cfg, config_hash, Some(init), train_set, val)
}

fn expect_stage(cfg: &TrainConfig, stage: Stage) -> Result<()> {
    if cfg.stage == stage {
        Ok(())
    } else {
        Err(TrainError::Config(format!("config is for stage {}, not {stage}", cfg.stage)))
    }
}
