use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::geometry::{
    distance, ArrayGeometry, DatasetKind, Point3, RoomConfig, ScenarioSpec, SourceTrajectory,
    Split,
};

const WALL_MARGIN: f64 = 0.2;
/// Sources are kept at least this far from the array centre.
const MIN_ARRAY_DISTANCE: f64 = 0.3;

/// Independent generator for scenario `index` of `split`, so that rendering
/// order and worker count never change the drawn scenes.
pub fn scenario_rng(seed: u64, split: Split, kind: DatasetKind, index: u64) -> ChaCha8Rng {
    let split_tag = match split {
        Split::Train => 1u64,
        Split::Val => 2,
        Split::Test => 3,
    };
    let kind_tag = match kind {
        DatasetKind::Static => 0u64,
        DatasetKind::Moving => 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((split_tag << 1 | kind_tag) << 48 | index);
    rng
}

/// Scene randomisation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSampler {
    pub reflection_order: u32,
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    /// Speed of moving noise sources along +y, m/s.
    pub noise_speed: f64,
    /// Clip length used to keep moving sources inside the room.
    pub clip_secs: f64,
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self {
            reflection_order: 17,
            snr_mean_db: 5.0,
            snr_std_db: 5.0,
            noise_speed: 0.2,
            clip_secs: 4.144,
        }
    }
}

fn uniform_point(rng: &mut impl Rng, dims: &Point3, y_travel: f64) -> Point3 {
    [
        rng.gen_range(WALL_MARGIN..dims[0] - WALL_MARGIN),
        rng.gen_range(WALL_MARGIN..dims[1] - WALL_MARGIN - y_travel),
        rng.gen_range(WALL_MARGIN..dims[2] - WALL_MARGIN),
    ]
}

fn place(rng: &mut impl Rng, room: &RoomConfig, array: &ArrayGeometry, y_travel: f64) -> Point3 {
    loop {
        let p = uniform_point(rng, &room.dims, y_travel);
        if distance(&p, &array.center) >= MIN_ARRAY_DISTANCE {
            return p;
        }
    }
}

impl ScenarioSampler {
    pub fn room_for(&self, split: Split, rng: &mut impl Rng) -> RoomConfig {
        match split {
            Split::Train => RoomConfig::new(
                [
                    rng.gen_range(6.0..9.0),
                    rng.gen_range(4.0..7.0),
                    rng.gen_range(2.5..3.5),
                ],
                rng.gen_range(0.2..0.8),
                self.reflection_order,
            ),
            Split::Val => RoomConfig::new([8.0, 6.0, 3.0], 0.45, self.reflection_order),
            Split::Test => RoomConfig::new([7.0, 7.0, 2.8], 0.4, self.reflection_order),
        }
    }

    /// Draws a scene: room per split, array at `(l_x/4, l_y/2, 0.5)`, speech
    /// and one to three noise positions uniform in the interior, SNR from
    /// `N(mean, std²)`. Moving scenes move every noise source along +y.
    pub fn sample(&self, rng: &mut impl Rng, split: Split, kind: DatasetKind) -> ScenarioSpec {
        let room = self.room_for(split, rng);
        let array = ArrayGeometry::circular6([room.dims[0] / 4.0, room.dims[1] / 2.0, 0.5]);
        let speech = SourceTrajectory::fixed(place(rng, &room, &array, 0.0));
        let count = rng.gen_range(1..=3);
        let (velocity, travel) = match kind {
            DatasetKind::Static => ([0.0; 3], 0.0),
            DatasetKind::Moving => (
                [0.0, self.noise_speed, 0.0],
                self.noise_speed * self.clip_secs + 1e-3,
            ),
        };
        let noise_sources = (0..count)
            .map(|_| SourceTrajectory {
                start: place(rng, &room, &array, travel),
                velocity,
            })
            .collect();
        let snr = Normal::new(self.snr_mean_db, self.snr_std_db)
            .expect("finite SNR distribution")
            .sample(rng);
        ScenarioSpec {
            room,
            array,
            speech_source: speech,
            noise_sources,
            target_snr_db: snr,
            seed: rng.gen(),
        }
    }
}

/// [`ScenarioSampler::sample`] with default (full-fidelity) parameters.
pub fn sample_scenario(rng: &mut impl Rng, split: Split) -> ScenarioSpec {
    ScenarioSampler::default().sample(rng, split, DatasetKind::Static)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_room_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_scenario(&mut rng, Split::Val);
        assert_eq!(s.room.dims, [8.0, 6.0, 3.0]);
        assert_eq!(s.room.reflection_coeff, 0.45);
        assert_eq!(s.room.reflection_order, 17);
    }

    #[test]
    fn test_room_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_scenario(&mut rng, Split::Test);
        assert_eq!(s.room.dims, [7.0, 7.0, 2.8]);
        assert_eq!(s.room.reflection_coeff, 0.4);
        assert_eq!(s.array.center, [1.75, 3.5, 0.5]);
    }

    #[test]
    fn train_draws_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sampler = ScenarioSampler::default();
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for _ in 0..10_000 {
            let r = sampler.room_for(Split::Train, &mut rng);
            lo = lo.min(r.dims[0]);
            hi = hi.max(r.dims[0]);
            assert!(r.dims[1] > 4.0 && r.dims[1] < 7.0);
            assert!(r.dims[2] > 2.5 && r.dims[2] < 3.5);
            assert!(r.reflection_coeff > 0.2 && r.reflection_coeff < 0.8);
        }
        assert!(lo > 6.0 && hi < 9.0);
        assert!(lo < 6.01 && hi > 8.99);
    }

    #[test]
    fn sources_respect_margins_and_counts() {
        let sampler = ScenarioSampler::default();
        for i in 0..500 {
            let mut rng = scenario_rng(7, Split::Train, DatasetKind::Moving, i);
            let s = sampler.sample(&mut rng, Split::Train, DatasetKind::Moving);
            s.validate().unwrap();
            for n in &s.noise_sources {
                assert_eq!(n.velocity, [0.0, 0.2, 0.0]);
                let end = n.position_at(sampler.clip_secs);
                assert!(end[1] < s.room.dims[1] - 0.2);
                assert!(n.start.iter().all(|&c| c >= 0.2));
            }
        }
    }

    #[test]
    fn per_index_streams_are_reproducible() {
        let sampler = ScenarioSampler::default();
        let a = sampler.sample(&mut scenario_rng(9, Split::Test, DatasetKind::Static, 5), Split::Test, DatasetKind::Static);
        let b = sampler.sample(&mut scenario_rng(9, Split::Test, DatasetKind::Static, 5), Split::Test, DatasetKind::Static);
        let c = sampler.sample(&mut scenario_rng(9, Split::Test, DatasetKind::Static, 6), Split::Test, DatasetKind::Static);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
