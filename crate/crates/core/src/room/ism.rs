use std::f64::consts::PI;

use super::geometry::{distance, Point3, RoomConfig};
use crate::dsp::resample::sinc;
use crate::{Error, Result};

/// Half-width of the windowed-sinc fractional-delay kernel (81 taps).
pub const SINC_HALF_WIDTH: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
}

/// One mirrored source: arrival delay in samples, amplitude and the number of
/// wall reflections it represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageContribution {
    pub delay_samples: f64,
    pub amplitude: f64,
    pub order: u32,
}

/// Per-axis reflection count of image `(n, q)`: `|n - q| + |n|`.
fn axis_order(n: i64, q: i64) -> u32 {
    ((n - q).abs() + n.abs()) as u32
}

fn check_endpoints(room: &RoomConfig, src: &Point3, mic: &Point3) -> Result<()> {
    room.validate()?;
    if !room.contains(src) {
        return Err(Error::Geometry(format!("source {src:?} is not inside the room")));
    }
    if !room.contains(mic) {
        return Err(Error::Geometry(format!("microphone {mic:?} is not inside the room")));
    }
    if distance(src, mic) < 1e-9 {
        return Err(Error::Geometry("source and microphone coincide".into()));
    }
    Ok(())
}

/// All image sources of total reflection order `<= room.reflection_order`.
pub fn image_sources(
    room: &RoomConfig,
    src: &Point3,
    mic: &Point3,
    fs: u32,
) -> Result<Vec<ImageContribution>> {
    check_endpoints(room, src, mic)?;
    let order = room.reflection_order as i64;
    let range = order.div_euclid(2) + 1;
    let mut out = Vec::new();
    for nx in -range..=range {
        for qx in 0..2 {
            let ox = axis_order(nx, qx);
            if ox as i64 > order {
                continue;
            }
            let dx = (1 - 2 * qx) as f64 * src[0] + 2.0 * nx as f64 * room.dims[0] - mic[0];
            for ny in -range..=range {
                for qy in 0..2 {
                    let oy = axis_order(ny, qy);
                    if (ox + oy) as i64 > order {
                        continue;
                    }
                    let dy =
                        (1 - 2 * qy) as f64 * src[1] + 2.0 * ny as f64 * room.dims[1] - mic[1];
                    for nz in -range..=range {
                        for qz in 0..2 {
                            let oz = axis_order(nz, qz);
                            let total = ox + oy + oz;
                            if total as i64 > order {
                                continue;
                            }
                            let dz = (1 - 2 * qz) as f64 * src[2]
                                + 2.0 * nz as f64 * room.dims[2]
                                - mic[2];
                            let d = (dx * dx + dy * dy + dz * dz).sqrt();
                            out.push(ImageContribution {
                                delay_samples: d / room.sound_speed * fs as f64,
                                amplitude: room.reflection_coeff.powi(total as i32)
                                    / (4.0 * PI * d),
                                order: total,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Hann-windowed sinc evaluated at offset `x` samples from the true delay.
fn kernel(x: f64) -> f64 {
    let width = SINC_HALF_WIDTH as f64 + 1.0;
    0.5 * (1.0 + (PI * x / width).cos()) * sinc(x)
}

/// Adds a fractionally delayed impulse of height `amplitude` to `taps`,
/// growing it as needed; taps before time zero are dropped.
pub(crate) fn add_fractional_impulse(taps: &mut Vec<f64>, delay: f64, amplitude: f64) {
    let centre = delay.round() as i64;
    let half = SINC_HALF_WIDTH as i64;
    let last = (centre + half) as usize;
    if taps.len() <= last {
        taps.resize(last + 1, 0.0);
    }
    for n in (centre - half).max(0)..=centre + half {
        taps[n as usize] += amplitude * kernel(n as f64 - delay);
    }
}

/// Image-source impulse response from `src` to `mic`.
pub fn image_source_ir(
    room: &RoomConfig,
    src: &Point3,
    mic: &Point3,
    fs: u32,
) -> Result<ImpulseResponse> {
    let images = image_sources(room, src, mic, fs)?;
    let mut taps = Vec::new();
    for img in &images {
        add_fractional_impulse(&mut taps, img.delay_samples, img.amplitude);
    }
    Ok(ImpulseResponse {
        taps,
        sample_rate: fs,
    })
}
