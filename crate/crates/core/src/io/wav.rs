//! 16-bit PCM little-endian RIFF/WAV.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::resample::decimate;
use crate::dsp::{MultichannelWaveform, Waveform, DEFAULT_SAMPLE_RATE};
use crate::{Error, Result};

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

#[inline]
fn to_i16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes all channels interleaved as 16-bit PCM. Samples are clipped to
/// `[-1, 1)`.
pub fn write_wav(path: &Path, wave: &MultichannelWaveform) -> Result<()> {
    let spec = WavSpec {
        channels: wave.num_channels() as u16,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(wav_err(path))?;
    for i in 0..wave.len() {
        for ch in wave.channels() {
            w.write_sample(to_i16(ch[i])).map_err(wav_err(path))?;
        }
    }
    w.finalize().map_err(wav_err(path))
}

pub fn write_wav_mono(path: &Path, wave: &Waveform) -> Result<()> {
    write_wav(path, &MultichannelWaveform::from_mono(wave.clone()))
}

/// Reads a 16-bit PCM file, scaling samples by `1 / 32768`.
pub fn read_wav(path: &Path) -> Result<MultichannelWaveform> {
    let reader = WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::InvalidArgument(format!(
            "{}: only 16-bit PCM is supported",
            path.display()
        )));
    }
    let m = spec.channels as usize;
    let samples: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(wav_err(path))?;
    let mut channels = vec![Vec::with_capacity(samples.len() / m); m];
    for frame in samples.chunks_exact(m) {
        for (c, &s) in channels.iter_mut().zip(frame) {
            c.push(s as f64 / 32768.0);
        }
    }
    MultichannelWaveform::new(channels, spec.sample_rate)
}

/// First channel of a recording, decimated to 16 kHz when the rate is an
/// integer multiple of it.
pub fn read_wav_mono_16k(path: &Path) -> Result<Waveform> {
    let wave = read_wav(path)?.channel(0);
    let rate = wave.sample_rate;
    if rate == DEFAULT_SAMPLE_RATE {
        Ok(wave)
    } else if rate % DEFAULT_SAMPLE_RATE == 0 {
        decimate(&wave, (rate / DEFAULT_SAMPLE_RATE) as usize)
    } else {
        Err(Error::InvalidArgument(format!(
            "{}: sample rate {rate} Hz is not an integer multiple of 16 kHz",
            path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantised_samples_roundtrip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let ch: Vec<Vec<f64>> = (0..3)
            .map(|c| (0..100).map(|i| ((i * 37 + c * 11) % 200) as f64 / 32768.0 - 0.003).collect())
            .collect();
        let q: Vec<Vec<f64>> = ch
            .iter()
            .map(|c| c.iter().map(|&x| to_i16(x) as f64 / 32768.0).collect())
            .collect();
        let w = MultichannelWaveform::new(q.clone(), 16_000).unwrap();
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.channels(), &q[..]);
        assert_eq!(r.sample_rate(), 16_000);

        // Writing what was read reproduces the file byte for byte.
        let path2 = dir.path().join("b.wav");
        write_wav(&path2, &r).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn header_is_little_endian_riff() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wav");
        write_wav_mono(&path, &Waveform::zeros(10, 16_000)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 16_000);
        assert_eq!(u16::from_le_bytes(bytes[34..36].try_into().unwrap()), 16);
    }

    #[test]
    fn clipping() {
        assert_eq!(to_i16(2.0), 32767);
        assert_eq!(to_i16(-2.0), -32768);
    }
}
