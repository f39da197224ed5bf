use num_complex::Complex64;
use rustfft::FftPlanner;

use super::geometry::{array_positions, Point3, ScenarioSpec, SourceId, SourceTrajectory};
use super::ism::image_source_ir;
use crate::dsp::{fft_convolve, MultichannelWaveform, Waveform};
use crate::{Error, Result};

/// 256 samples (16 ms at 16 kHz).
pub const DEFAULT_BLOCK_SIZE: usize = 256;

fn irs_at(scenario: &ScenarioSpec, pos: &Point3, fs: u32) -> Result<Vec<Vec<f64>>> {
    array_positions(&scenario.array)
        .iter()
        .map(|mic| image_source_ir(&scenario.room, pos, mic, fs).map(|ir| ir.taps))
        .collect()
}

/// Convolves a static source with the impulse response to every microphone.
///
/// Every channel has length `N + L - 1`, with `L` the longest response.
pub fn render_static(
    src_wave: &Waveform,
    scenario: &ScenarioSpec,
    source: SourceId,
) -> Result<MultichannelWaveform> {
    let traj = scenario.source(source)?;
    if !traj.is_static() {
        return Err(Error::InvalidArgument(
            "source trajectory is moving; use render_moving".into(),
        ));
    }
    let fs = src_wave.sample_rate;
    let mut irs = irs_at(scenario, &traj.start, fs)?;
    let l = irs.iter().map(Vec::len).max().unwrap_or(1);
    irs.iter_mut().for_each(|h| h.resize(l, 0.0));
    let channels = irs
        .iter()
        .map(|h| fft_convolve(&src_wave.samples, h))
        .collect();
    MultichannelWaveform::new(channels, fs)
}

struct Nodes {
    /// Sample index of every IR evaluation point; the last one is the clip end.
    times: Vec<usize>,
    /// `irs[node][mic]`, all padded to a common length.
    irs: Vec<Vec<Vec<f64>>>,
    ir_len: usize,
}

fn trajectory_nodes(
    src_len: usize,
    fs: u32,
    scenario: &ScenarioSpec,
    traj: &SourceTrajectory,
    block_size: usize,
) -> Result<Nodes> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let duration = src_len as f64 / fs as f64;
    let end = traj.position_at(duration);
    if !scenario.room.contains(&traj.start) || !scenario.room.contains(&end) {
        return Err(Error::Geometry(format!(
            "trajectory from {:?} to {end:?} leaves the room",
            traj.start
        )));
    }
    let mut times: Vec<usize> = (0..src_len.div_ceil(block_size))
        .map(|b| b * block_size)
        .collect();
    times.push(src_len);
    times.dedup();
    let mut irs = times
        .iter()
        .map(|&n| irs_at(scenario, &traj.position_at(n as f64 / fs as f64), fs))
        .collect::<Result<Vec<_>>>()?;
    let ir_len = irs.iter().flatten().map(Vec::len).max().unwrap_or(1);
    irs.iter_mut()
        .flatten()
        .for_each(|h| h.resize(ir_len, 0.0));
    Ok(Nodes {
        times,
        irs,
        ir_len,
    })
}

/// Output window `[lo, hi)` in which node `b` has nonzero cross-fade weight.
fn node_support(nodes: &Nodes, b: usize, out_len: usize) -> (usize, usize) {
    let t = &nodes.times;
    let lo = if b == 0 { 0 } else { t[b - 1] };
    let hi = if b + 1 == t.len() { out_len } else { t[b + 1] };
    (lo, hi)
}

/// Linear cross-fade weight of node `b` at output sample `n`.
fn fade_weight(nodes: &Nodes, b: usize, n: usize) -> f64 {
    let t = &nodes.times;
    if n < t[b] {
        // Rising edge from the previous node.
        let prev = t[b - 1];
        (n - prev) as f64 / (t[b] - prev) as f64
    } else if b + 1 == t.len() {
        1.0
    } else {
        1.0 - (n - t[b]) as f64 / (t[b + 1] - t[b]) as f64
    }
}

/// `(x * h)(n)` for `n` in `[lo, hi)`, for every impulse response in `hs`.
fn windowed_convolutions(x: &[f64], hs: &[Vec<f64>], lo: usize, hi: usize) -> Vec<Vec<f64>> {
    let l = hs[0].len();
    let seg_start = (lo + 1).saturating_sub(l);
    let seg_end = hi.min(x.len());
    if seg_start >= seg_end {
        return vec![vec![0.0; hi - lo]; hs.len()];
    }
    let seg = &x[seg_start..seg_end];
    let n = (seg.len() + l - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut xf: Vec<Complex64> = seg.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xf.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut xf);
    let scale = 1.0 / n as f64;
    hs.iter()
        .map(|h| {
            let mut hf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            hf.resize(n, Complex64::new(0.0, 0.0));
            fwd.process(&mut hf);
            for (a, b) in hf.iter_mut().zip(&xf) {
                *a *= b;
            }
            inv.process(&mut hf);
            (lo..hi)
                .map(|i| {
                    let k = i - seg_start;
                    if k < seg.len() + l - 1 {
                        hf[k].re * scale
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn render_with_nodes(
    src_wave: &Waveform,
    nodes: &Nodes,
    mics: usize,
    crossfade: bool,
) -> Result<MultichannelWaveform> {
    let x = &src_wave.samples;
    let out_len = x.len() + nodes.ir_len - 1;
    let mut out = vec![vec![0.0; out_len]; mics];
    for b in 0..nodes.times.len() {
        let (lo, hi) = if crossfade {
            node_support(nodes, b, out_len)
        } else {
            // Hard switching: node b owns [t_b, t_{b+1}).
            let t = &nodes.times;
            let hi = if b + 1 == t.len() { out_len } else { t[b + 1] };
            (t[b], hi)
        };
        if lo >= hi {
            continue;
        }
        let conv = windowed_convolutions(x, &nodes.irs[b], lo, hi);
        for (ch, y) in out.iter_mut().zip(&conv) {
            for (i, &v) in y.iter().enumerate() {
                let n = lo + i;
                let w = if crossfade { fade_weight(nodes, b, n) } else { 1.0 };
                ch[n] += w * v;
            }
        }
    }
    MultichannelWaveform::new(out, src_wave.sample_rate)
}

/// Block-wise time-varying rendering of a (possibly) moving source.
///
/// Impulse responses are evaluated at the centre of every block (sample
/// `b * block_size`, plus one final node at the clip end). The output between
/// two nodes linearly cross-fades the two nodes' convolutions over one block.
/// A static trajectory reproduces [`render_static`].
pub fn render_moving(
    src_wave: &Waveform,
    scenario: &ScenarioSpec,
    source: SourceId,
    block_size: usize,
) -> Result<MultichannelWaveform> {
    let traj = scenario.source(source)?;
    let nodes = trajectory_nodes(src_wave.len(), src_wave.sample_rate, scenario, traj, block_size)?;
    render_with_nodes(src_wave, &nodes, scenario.array.mic_count, true)
}

/// Same nodes as [`render_moving`] but switching impulse responses abruptly
/// at node times. Used to check that cross-fading removes discontinuities.
pub fn render_moving_hard_switch(
    src_wave: &Waveform,
    scenario: &ScenarioSpec,
    source: SourceId,
    block_size: usize,
) -> Result<MultichannelWaveform> {
    let traj = scenario.source(source)?;
    let nodes = trajectory_nodes(src_wave.len(), src_wave.sample_rate, scenario, traj, block_size)?;
    render_with_nodes(src_wave, &nodes, scenario.array.mic_count, false)
}

#[cfg(test)]
/// Positions at which [`render_moving`] evaluates impulse responses.
pub(crate) fn node_positions(
    src_len: usize,
    fs: u32,
    traj: &SourceTrajectory,
    block_size: usize,
) -> Vec<Point3> {
    let mut times: Vec<usize> = (0..src_len.div_ceil(block_size))
        .map(|b| b * block_size)
        .collect();
    times.push(src_len);
    times.dedup();
    times
        .iter()
        .map(|&n| traj.position_at(n as f64 / fs as f64))
        .collect()
}
