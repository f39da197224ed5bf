use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point3 = [f64; 3];

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    /// `(l_x, l_y, l_z)` in metres, origin at one corner.
    pub dims: Point3,
    /// Pressure reflection coefficient shared by all walls.
    pub reflection_coeff: f64,
    /// Maximum total number of wall reflections per image.
    pub reflection_order: u32,
    pub sound_speed: f64,
}

impl RoomConfig {
    pub fn new(dims: Point3, reflection_coeff: f64, reflection_order: u32) -> Self {
        Self {
            dims,
            reflection_coeff,
            reflection_order,
            sound_speed: 343.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Geometry(format!("room dimensions must be positive: {:?}", self.dims)));
        }
        if !(0.0..1.0).contains(&self.reflection_coeff) {
            return Err(Error::Geometry(format!(
                "reflection coefficient must lie in [0, 1), got {}",
                self.reflection_coeff
            )));
        }
        if !(self.sound_speed > 0.0) {
            return Err(Error::Geometry("sound speed must be positive".into()));
        }
        Ok(())
    }

    /// Strictly inside the room.
    pub fn contains(&self, p: &Point3) -> bool {
        p.iter().zip(&self.dims).all(|(&x, &l)| x > 0.0 && x < l)
    }
}

/// Uniform circular array in a horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub center: Point3,
    pub diameter: f64,
    pub mic_count: usize,
    /// Azimuth of the first microphone, radians.
    pub orientation: f64,
}

impl ArrayGeometry {
    /// Six microphones on a 9.26 cm circle.
    pub fn circular6(center: Point3) -> Self {
        Self {
            center,
            diameter: 0.0926,
            mic_count: 6,
            orientation: 0.0,
        }
    }
}

/// Microphone positions, evenly spaced on the circle. A one-element array
/// degenerates to a single microphone at the centre.
pub fn array_positions(geom: &ArrayGeometry) -> Vec<Point3> {
    if geom.mic_count == 1 {
        return vec![geom.center];
    }
    let r = geom.diameter / 2.0;
    let m = geom.mic_count;
    (0..m)
        .map(|i| {
            let a = geom.orientation + 2.0 * PI * i as f64 / m as f64;
            [
                geom.center[0] + r * a.cos(),
                geom.center[1] + r * a.sin(),
                geom.center[2],
            ]
        })
        .collect()
}

/// Straight-line constant-velocity motion; zero velocity is a static source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceTrajectory {
    pub start: Point3,
    pub velocity: Point3,
}

impl SourceTrajectory {
    pub fn fixed(start: Point3) -> Self {
        Self {
            start,
            velocity: [0.0; 3],
        }
    }

    pub fn is_static(&self) -> bool {
        self.velocity.iter().all(|&v| v == 0.0)
    }

    pub fn position_at(&self, secs: f64) -> Point3 {
        [
            self.start[0] + self.velocity[0] * secs,
            self.start[1] + self.velocity[1] * secs,
            self.start[2] + self.velocity[2] * secs,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split `{s}`"))),
        }
    }
}

/// Static-Dataset scenes keep every source fixed; Moving-Dataset scenes move
/// the noise sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Static,
    Moving,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Static => "static",
            DatasetKind::Moving => "moving",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(DatasetKind::Static),
            "moving" => Ok(DatasetKind::Moving),
            _ => Err(Error::InvalidArgument(format!("unknown dataset kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceId {
    Speech,
    Noise(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub room: RoomConfig,
    pub array: ArrayGeometry,
    pub speech_source: SourceTrajectory,
    pub noise_sources: Vec<SourceTrajectory>,
    pub target_snr_db: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        if !(1..=3).contains(&self.noise_sources.len()) {
            return Err(Error::InvalidArgument(format!(
                "a scenario needs one to three noise sources, got {}",
                self.noise_sources.len()
            )));
        }
        if self.array.mic_count == 0 {
            return Err(Error::InvalidArgument("array needs at least one microphone".into()));
        }
        Ok(())
    }

    pub fn source(&self, id: SourceId) -> Result<&SourceTrajectory> {
        match id {
            SourceId::Speech => Ok(&self.speech_source),
            SourceId::Noise(i) => self.noise_sources.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "noise source {i} requested, scenario has {}",
                    self.noise_sources.len()
                ))
            }),
        }
    }
}
