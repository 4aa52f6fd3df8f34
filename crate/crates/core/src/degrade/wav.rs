//! WAV reading and writing (16-bit PCM or 32-bit float, mono or stereo).

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    /// Interleaved samples, nominally in [-1, 1].
    pub samples: Vec<f64>,
    pub channels: u16,
    pub sample_rate: u32,
    pub encoding: WavEncoding,
}

impl Audio {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::Format(format!(
            "{}: {} channels, only mono and stereo are supported",
            path.display(),
            spec.channels
        )));
    }
    let (samples, encoding) = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => (
            reader
                .into_samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| wav_err(path, e))?,
            WavEncoding::Pcm16,
        ),
        (SampleFormat::Float, 32) => (
            reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| wav_err(path, e))?,
            WavEncoding::Float32,
        ),
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported sample format {fmt:?} at {bits} bits",
                path.display()
            )))
        }
    };
    Ok(Audio {
        samples,
        channels: spec.channels,
        sample_rate: spec.sample_rate,
        encoding,
    })
}

/// 16-bit output clamps to [-1, 1) at quantization; float output is written as is.
pub fn write_wav(audio: &Audio, path: &Path) -> Result<()> {
    let spec = WavSpec {
        channels: audio.channels,
        sample_rate: audio.sample_rate,
        bits_per_sample: match audio.encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match audio.encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in &audio.samples {
        match audio.encoding {
            WavEncoding::Pcm16 => w.write_sample(quantize16(s)),
            WavEncoding::Float32 => w.write_sample(s as f32),
        }
        .map_err(|e| wav_err(path, e))?;
    }
    w.finalize().map_err(|e| wav_err(path, e))
}

fn quantize16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_clamps() {
        assert_eq!(quantize16(1.5), 32767);
        assert_eq!(quantize16(1.0), 32767);
        assert_eq!(quantize16(-1.0), -32768);
        assert_eq!(quantize16(-3.0), -32768);
        assert_eq!(quantize16(0.5), 16384);
    }

    #[test]
    fn round_trips_both_encodings() {
        let dir = tempfile::tempdir().unwrap();
        for enc in [WavEncoding::Pcm16, WavEncoding::Float32] {
            let audio = Audio {
                samples: (0..200).map(|i| ((i as f64) * 0.1).sin() * 0.5).collect(),
                channels: 2,
                sample_rate: 16_000,
                encoding: enc,
            };
            let path = dir.path().join("a.wav");
            write_wav(&audio, &path).unwrap();
            let back = read_wav(&path).unwrap();
            assert_eq!(back.channels, 2);
            assert_eq!(back.encoding, enc);
            assert_eq!(back.frames(), 100);
            for (a, b) in audio.samples.iter().zip(&back.samples) {
                assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }

    #[test]
    fn float_path_keeps_out_of_range_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let audio = Audio {
            samples: vec![1.75, -2.5],
            channels: 1,
            sample_rate: 8000,
            encoding: WavEncoding::Float32,
        };
        write_wav(&audio, &path).unwrap();
        assert_eq!(read_wav(&path).unwrap().samples, vec![1.75, -2.5]);
    }
}
