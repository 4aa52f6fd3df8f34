//! Model-free degradation ladders: additive Gaussian noise on audio and
//! probabilistic note perturbation on MIDI.

pub mod midi;
pub mod wav;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

pub use midi::{perturb_midi, MidiFile, PerturbRanges};
pub use wav::{read_wav, write_wav, Audio, WavEncoding};

const NOISE_STREAM: u64 = 0x6e6f_6973;

fn check_ladder_params(params: &[f64], what: &str) -> Result<()> {
    if params.len() < 2 {
        return Err(Error::Domain(format!("a ladder needs at least two {what}")));
    }
    if params[0] != 0.0 {
        return Err(Error::Domain(format!("the first {what} value must be 0")));
    }
    if params.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLadderSpec {
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

impl NoiseLadderSpec {
    /// Eleven levels, σ = 0, 0.02, …, 0.2.
    pub fn standard(seed: u64) -> Self {
        NoiseLadderSpec {
            sigmas: (0..=10).map(|i| 0.02 * i as f64).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("sigmas must be finite".into()));
        }
        check_ladder_params(&self.sigmas, "sigmas")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidiPerturbSpec {
    pub probs: Vec<f64>,
    pub ranges: PerturbRanges,
    pub seed: u64,
}

impl MidiPerturbSpec {
    /// Eleven levels, p = 0, 0.05, …, 0.5, pitch ±6 semitones, timing ±0.2 s.
    pub fn standard(seed: u64) -> Self {
        MidiPerturbSpec {
            probs: (0..=10).map(|i| 0.05 * i as f64).collect(),
            ranges: PerturbRanges::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
        }
        if self.ranges.pitch_semitones < 0 || !(self.ranges.time_seconds >= 0.0) {
            return Err(Error::Domain("perturbation ranges must be non-negative".into()));
        }
        check_ladder_params(&self.probs, "probabilities")
    }
}

/// Adds `sigma`·N(0,1) to every sample. The stream is keyed by `(seed, key...)`,
/// typically `(seed, level, clip)`. `sigma == 0` returns an exact copy.
pub fn add_noise(samples: &[f64], sigma: f64, seed: u64, key: &[u64]) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("samples contain non-finite values".into()));
    }
    if sigma == 0.0 {
        return Ok(samples.to_vec());
    }
    let mut stream = vec![NOISE_STREAM];
    stream.extend_from_slice(key);
    let mut rng = keyed_rng(seed, &stream);
    Ok(samples
        .iter()
        .map(|&x| x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Noise,
    Midi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub index: usize,
    pub param: f64,
    pub dir: String,
}

/// Written as `ladder.json` next to the level directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderManifest {
    pub kind: LadderKind,
    pub levels: Vec<LadderLevel>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_channels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_semitones: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_seconds: Option<f64>,
}

pub const LADDER_MANIFEST: &str = "ladder.json";

pub fn level_dir_name(index: usize) -> String {
    format!("level_{index:02}")
}

/// Input clips sorted by file name; the position in this list is the clip index.
fn corpus(input_dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|e| Error::io(input_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no .{} files in {}",
            extensions.join("/."),
            input_dir.display()
        )));
    }
    Ok(files)
}

fn clip_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn build<F>(
    files: &[PathBuf],
    params: &[f64],
    output_root: &Path,
    degrade: F,
) -> Result<Vec<LadderLevel>>
where
    F: Fn(&Path, &Path, f64, u64, u64) -> Result<()> + Sync,
{
    let mut levels = Vec::with_capacity(params.len());
    for (i, &param) in params.iter().enumerate() {
        let index = i + 1;
        let dir = level_dir_name(index);
        let level_path = output_root.join(&dir);
        fs::create_dir_all(&level_path).map_err(|e| Error::io(&level_path, e))?;
        files
            .par_iter()
            .enumerate()
            .try_for_each(|(clip, src)| {
                let dst = level_path.join(src.file_name().expect("corpus entries are files"));
                let res = if param == 0.0 {
                    fs::copy(src, &dst).map(drop).map_err(|e| Error::io(&dst, e))
                } else {
                    degrade(src, &dst, param, index as u64, clip as u64)
                };
                res.map_err(|e| e.for_clip(&clip_id(src)))
            })
            .map_err(|e| e.for_level(index))?;
        levels.push(LadderLevel { index, param, dir });
    }
    Ok(levels)
}

fn write_manifest(manifest: &LadderManifest, output_root: &Path) -> Result<()> {
    let path = output_root.join(LADDER_MANIFEST);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Writes one directory per σ holding every `.wav` of `input_dir` with noise added.
/// Stereo channels receive independent draws; the first level is a byte copy.
pub fn build_noise_ladder(input_dir: &Path, spec: &NoiseLadderSpec, output_root: &Path) -> Result<LadderManifest> {
    spec.validate()?;
    let files = corpus(input_dir, &["wav"])?;
    let levels = build(&files, &spec.sigmas, output_root, |src, dst, sigma, level, clip| {
        let mut audio = read_wav(src)?;
        audio.samples = add_noise(&audio.samples, sigma, spec.seed, &[level, clip])?;
        write_wav(&audio, dst)
    })?;
    let manifest = LadderManifest {
        kind: LadderKind::Noise,
        levels,
        seed: spec.seed,
        noise_channels: Some("independent".into()),
        pitch_semitones: None,
        time_seconds: None,
    };
    write_manifest(&manifest, output_root)?;
    Ok(manifest)
}

/// Writes one directory per probability holding every `.mid`/`.midi` of
/// `input_dir` with notes perturbed; the first level is a byte copy.
pub fn build_midi_ladder(input_dir: &Path, spec: &MidiPerturbSpec, output_root: &Path) -> Result<LadderManifest> {
    spec.validate()?;
    let files = corpus(input_dir, &["mid", "midi"])?;
    let levels = build(&files, &spec.probs, output_root, |src, dst, prob, level, clip| {
        let bytes = fs::read(src).map_err(|e| Error::io(src, e))?;
        let midi = MidiFile::parse(&bytes)?;
        let (out, _) = perturb_midi(&midi, prob, &spec.ranges, spec.seed, level, clip)?;
        fs::write(dst, out.to_bytes()).map_err(|e| Error::io(dst, e))
    })?;
    let manifest = LadderManifest {
        kind: LadderKind::Midi,
        levels,
        seed: spec.seed,
        noise_channels: None,
        pitch_semitones: Some(spec.ranges.pitch_semitones),
        time_seconds: Some(spec.ranges.time_seconds),
    };
    write_manifest(&manifest, output_root)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_bit_identical() {
        let x = vec![-0.0, 0.25, -1.0, 1e-300];
        let y = add_noise(&x, 0.0, 3, &[1, 0]).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn noise_std_matches_sigma() {
        let x = vec![0.0; 1_000_000];
        let y = add_noise(&x, 0.1, 11, &[2, 5]).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.1).abs() / 0.1 < 0.01, "{sd}");
    }

    #[test]
    fn noise_is_deterministic_and_keyed() {
        let x = vec![0.5; 64];
        assert_eq!(add_noise(&x, 0.2, 1, &[1, 1]).unwrap(), add_noise(&x, 0.2, 1, &[1, 1]).unwrap());
        assert_ne!(add_noise(&x, 0.2, 1, &[1, 1]).unwrap(), add_noise(&x, 0.2, 1, &[1, 2]).unwrap());
    }

    #[test]
    fn specs_validate() {
        assert!(NoiseLadderSpec::standard(0).validate().is_ok());
        assert!(MidiPerturbSpec::standard(0).validate().is_ok());
        assert_eq!(NoiseLadderSpec::standard(0).sigmas.len(), 11);
        let bad = NoiseLadderSpec { sigmas: vec![0.1, 0.2], seed: 0 };
        assert!(matches!(bad.validate(), Err(Error::Domain(_))));
        let bad = NoiseLadderSpec { sigmas: vec![0.0, 0.2, 0.2], seed: 0 };
        assert!(bad.validate().is_err());
        let bad = MidiPerturbSpec { probs: vec![0.0, 1.5], ..MidiPerturbSpec::standard(0) };
        assert!(bad.validate().is_err());
    }
}
