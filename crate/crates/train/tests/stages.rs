use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbeam_core::dsp::FeatureTensor;
use wbeam_core::room::sources::SourceLibrary;
use wbeam_core::room::{DatasetKind, ScenarioSampler, SimulationOptions, Split};
use wbeam_core::Complex64;
use wbeam_neural::wnet::{UNET1_PREFIX, UNET2_PREFIX};
use wbeam_neural::{Example, Objective, ParamStore, WNet};
use wbeam_train::*;

const MICS: usize = 2;

/// A small scene-like example: the reference is a masked copy of channel 1.
fn example(frames: usize, bins: usize, rng: &mut impl Rng) -> Example {
    let mut values = Vec::with_capacity(frames * bins * 2 * MICS);
    let mut reference = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        for f in 0..bins {
            let speech = ((t / 8 + f / 8) % 2 == 0) as u8 as f64;
            let mags: Vec<f64> = (0..MICS).map(|_| rng.gen_range(0.2..1.0) + speech).collect();
            let phases: Vec<f64> = (0..MICS).map(|_| rng.gen_range(-3.0..3.0)).collect();
            reference.push(Complex64::from_polar(mags[0] * speech * 0.8, phases[0]));
            values.extend(&mags);
            values.extend(&phases);
        }
    }
    let feat = FeatureTensor { frames, bins, mics: MICS, values };
    Example::new(&feat, &reference).unwrap()
}

fn tiny(stage: Stage) -> TrainConfig {
    TrainConfig {
        stage,
        mics: MICS,
        width_divisor: 8,
        learning_rate: 1e-3,
        batch_size: 1,
        utterance_budget: 200,
        validation_every: 50,
        timestamp: Some(0),
        ..TrainConfig::default()
    }
}

fn one_example(seed: u64) -> MemorySource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MemorySource(vec![example(64, 64, &mut rng)])
}

fn digest(store: &ParamStore, prefix: &str) -> String {
    store.digest(&store.ids_with_prefix(&format!("{prefix}.")))
}

#[test]
fn stage1_overfits_one_utterance() {
    let data = one_example(1);
    let cfg = TrainConfig { width_divisor: 4, ..tiny(Stage::Stage1) };
    let out = train_stage1(&cfg, "t", &data, &data).unwrap();
    let v: Vec<f64> = out.log.validation_losses().collect();
    assert!(out.checkpoint.meta.validation_loss <= 0.1 * v[0], "{v:?}");
}

#[test]
fn stage2_overfits_one_utterance() {
    let data = one_example(2);
    let cfg = TrainConfig { width_divisor: 4, ..tiny(Stage::Stage2) };
    let out = train_stage2(&cfg, "t", None, &data, &data).unwrap();
    let v: Vec<f64> = out.log.validation_losses().collect();
    assert!(out.checkpoint.meta.validation_loss <= 0.1 * v[0], "{v:?}");
}

#[test]
fn stages_leave_the_other_network_untouched() {
    let data = one_example(3);
    let short = |s| TrainConfig { utterance_budget: 8, ..tiny(s) };
    let s1 = train_stage1(&short(Stage::Stage1), "a", &data, &data).unwrap().checkpoint;
    let mut store = ParamStore::new();
    WNet::register(MICS, 8, &mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(digest(&s1.store, UNET2_PREFIX), digest(&store, UNET2_PREFIX));
    assert_ne!(digest(&s1.store, UNET1_PREFIX), digest(&store, UNET1_PREFIX));

    let s2 = train_stage2(&short(Stage::Stage2), "b", Some(&s1), &data, &data).unwrap().checkpoint;
    assert_eq!(digest(&s2.store, UNET1_PREFIX), digest(&s1.store, UNET1_PREFIX));
    assert_ne!(digest(&s2.store, UNET2_PREFIX), digest(&s1.store, UNET2_PREFIX));
}

#[test]
fn same_seed_gives_identical_checkpoint_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = MemorySource((0..3).map(|_| example(64, 64, &mut rng)).collect());
    let cfg = TrainConfig { utterance_budget: 10, batch_size: 2, ..tiny(Stage::Stage1) };
    let a = train_stage1(&cfg, "h", &data, &data).unwrap();
    let b = train_stage1(&cfg, "h", &data, &data).unwrap();
    assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
    assert_eq!(a.log.to_table(), b.log.to_table());
    let c = train_stage1(&TrainConfig { seed: 2, ..cfg }, "h", &data, &data).unwrap();
    assert_ne!(a.checkpoint.to_bytes().unwrap(), c.checkpoint.to_bytes().unwrap());
}

#[test]
fn non_finite_loss_aborts() {
    let mut ex = one_example(5).0.remove(0);
    ex.features.data[17] = f64::NAN;
    let data = MemorySource(vec![ex]);
    let err = train_stage1(&tiny(Stage::Stage1), "n", &data, &data).unwrap_err();
    assert!(matches!(err, TrainError::Diverged { .. }), "{err}");
}

#[test]
fn joint_needs_an_initial_checkpoint() {
    let data = one_example(6);
    let err = train(&tiny(Stage::Joint), "j", None, &data, &data).unwrap_err();
    assert!(matches!(err, TrainError::Config(_)));
}

#[test]
fn joint_validation_never_exceeds_its_starting_point() {
    let data = one_example(7);
    let short = |s| TrainConfig { utterance_budget: 20, validation_every: 5, ..tiny(s) };
    let s1 = train_stage1(&short(Stage::Stage1), "a", &data, &data).unwrap().checkpoint;
    let s2 = train_stage2(&short(Stage::Stage2), "b", Some(&s1), &data, &data).unwrap().checkpoint;
    let joint = train_joint(&short(Stage::Joint), "c", &s2, &data, &data).unwrap();
    let model = Model::from_checkpoint(&s2).unwrap();
    let start = validation_loss(&model, &s2.store, Stage::Joint, &data).unwrap();
    assert!(joint.checkpoint.meta.validation_loss <= start);
    assert_eq!(joint.log.validation_losses().next().unwrap(), start);
}

#[test]
fn zero_finetune_steps_return_the_initial_model() {
    let data = one_example(8);
    let s1 = train_stage1(&TrainConfig { utterance_budget: 4, ..tiny(Stage::Stage1) }, "a", &data, &data)
        .unwrap()
        .checkpoint;
    let cfg = TrainConfig { utterance_budget: 0, ..tiny(Stage::FinetuneMoving) };
    let ft = finetune_moving(&cfg, "f", &s1, &data, &data).unwrap().checkpoint;
    assert_eq!(ft.store, s1.store);
    assert_eq!(ft.meta.utterances_seen, 0);
}

#[test]
fn mismatched_initial_architecture_is_refused() {
    let data = one_example(9);
    let s1 = train_stage1(&TrainConfig { utterance_budget: 1, ..tiny(Stage::Stage1) }, "a", &data, &data)
        .unwrap()
        .checkpoint;
    let cfg = TrainConfig { width_divisor: 4, ..tiny(Stage::Joint) };
    assert!(matches!(train(&cfg, "j", Some(&s1), &data, &data), Err(TrainError::Config(_))));
}

#[test]
fn joint_objective_changes_first_network_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut store = ParamStore::new();
    let net = WNet::register(MICS, 8, &mut store, &mut rng).unwrap();
    let ex = example(64, 64, &mut rng);
    let ids = store.ids_with_prefix("unet1.");
    let grads = |store: &mut ParamStore, obj| {
        store.zero_grads();
        net.loss_and_backward(store, &ex, obj).unwrap();
        ids.iter().flat_map(|&i| store.get(i).grad.data.clone()).collect::<Vec<f64>>()
    };
    let magnitude = grads(&mut store, Objective::Magnitude);
    let joint = grads(&mut store, Objective::Joint);
    assert!(magnitude.iter().any(|g| *g != 0.0) && joint.iter().any(|g| *g != 0.0));
    let diff: f64 = magnitude.iter().zip(&joint).map(|(a, b)| (a - b).abs()).sum();
    assert!(diff > 1e-6);
}

#[test]
fn unet_bf_trains_only_its_network() {
    let data = one_example(11);
    let cfg = TrainConfig { utterance_budget: 4, ..tiny(Stage::UnetBf) };
    let out = train(&cfg, "u", None, &data, &data).unwrap().checkpoint;
    assert!(matches!(Model::from_checkpoint(&out).unwrap(), Model::UNetBf(_)));
    assert_eq!(out.store.ids_with_prefix("unet1.").len(), 0);
}

#[test]
fn select_best_prefers_earliest_minimum() {
    let data = one_example(12);
    let base = train_stage1(&TrainConfig { utterance_budget: 1, ..tiny(Stage::Stage1) }, "a", &data, &data)
        .unwrap()
        .checkpoint;
    let with_loss = |l| {
        let mut c = base.clone();
        c.meta.validation_loss = l;
        c.meta.utterances_seen = (l * 10.0) as u64;
        c
    };
    let list = vec![with_loss(3.0), with_loss(1.0), with_loss(2.0), with_loss(1.0)];
    let best = select_best(&list).unwrap();
    assert_eq!(best.meta.validation_loss, 1.0);
    assert!(std::ptr::eq(best, &list[1]));
    assert!(select_best(&[]).is_err());
}

#[test]
fn simulated_source_is_repeatable() {
    let src = SimulatedSource {
        sampler: ScenarioSampler { reflection_order: 1, ..ScenarioSampler::default() },
        library: SourceLibrary::Synthetic,
        options: SimulationOptions { clip_len: 40 * 256 + 768, ..SimulationOptions::default() },
        seed: 9,
        split: Split::Train,
        kinds: vec![DatasetKind::Static],
        count: 2,
        frames: 32,
    };
    let a = src.load(1, Some(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
    let b = src.load(1, Some(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.frames(), a.bins(), a.mics), (32, 512, 6));
    assert_ne!(a, src.load(0, Some(&mut ChaCha8Rng::seed_from_u64(1))).unwrap());
}

proptest! {
    #[test]
    fn best_index_is_earliest_argmin(losses in prop::collection::vec(-5i32..5, 1..20)) {
        let l: Vec<f64> = losses.iter().map(|&v| v as f64).collect();
        let i = best_index(&l).unwrap();
        prop_assert!(l.iter().all(|&v| v >= l[i]));
        prop_assert!(l[..i].iter().all(|&v| v > l[i]));
    }

    #[test]
    fn crop_keeps_the_window(total in 1usize..40, offset in 0usize..40, frames in 1usize..40) {
        use wbeam_core::dsp::{AnalysisConfig, MultichannelSpectrogram};
        let cfg = AnalysisConfig { fft_size: 8, hop: 2, ..AnalysisConfig::default() };
        let data = (0..total * 4).map(|i| Complex64::new(i as f64 + 1.0, 0.0)).collect();
        let s = MultichannelSpectrogram::from_data(total, 1, data, cfg).unwrap();
        let offset = offset.min(total - 1);
        let c = wbeam_train::data::crop_or_pad(&s, offset, frames);
        prop_assert_eq!(c.frames(), frames);
        for t in 0..frames {
            let want = if offset + t < total { s.get(offset + t, 2, 0) } else { Complex64::new(0.0, 0.0) };
            prop_assert_eq!(c.get(t, 2, 0), want);
        }
    }
}
