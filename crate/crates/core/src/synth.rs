//! Synthetic embedding corpora for exercising metrics without an audio model.
//!
//! Clips are short frame sequences drawn around cluster centres whose spreads
//! span a wide range of scales, loosely imitating how audio embeddings form
//! tight and diffuse families. A noise ladder perturbs every frame with the
//! same keyed Gaussian noise used for audio (`degrade::add_noise`) and pools
//! the frames into clip vectors.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::degrade::add_noise;
use crate::error::{Error, Result};
use crate::metaeval::DistortionLadder;
use crate::rng::keyed_rng;
use crate::tensor::{pool, EmbeddingSet, FrameSequence, PoolMethod, Role};

const CENTRE_STREAM: u64 = 1;
const CLIP_STREAM: u64 = 2;
const REFERENCE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipCloud {
    pub clips: usize,
    pub dim: usize,
    pub frames: usize,
    pub clusters: usize,
    /// Cluster spreads are log-uniform on this interval.
    pub spread: (f64, f64),
    /// Per-frame jitter around the clip's own centre.
    pub frame_jitter: f64,
    pub pool: PoolMethod,
    pub seed: u64,
}

impl ClipCloud {
    /// 2000 clips of 8 frames in 16 dimensions around 50 clusters.
    pub fn desk(seed: u64) -> Self {
        ClipCloud {
            clips: 2000,
            dim: 16,
            frames: 8,
            clusters: 50,
            spread: (0.003, 0.5),
            frame_jitter: 0.01,
            pool: PoolMethod::Max,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.clips < 2 || self.dim == 0 || self.frames == 0 || self.clusters == 0 {
            return Err(Error::Domain("clip cloud needs clips ≥ 2 and non-zero dim, frames, clusters".into()));
        }
        let (lo, hi) = self.spread;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || !(self.frame_jitter >= 0.0) {
            return Err(Error::Domain("spreads must be positive and ordered, jitter non-negative".into()));
        }
        Ok(())
    }

    fn centres(&self) -> (Array2<f64>, Vec<f64>) {
        let mut rng = keyed_rng(self.seed, &[CENTRE_STREAM]);
        let centres = Array2::from_shape_simple_fn((self.clusters, self.dim), || rng.sample(StandardNormal));
        let (lo, hi) = (self.spread.0.ln(), self.spread.1.ln());
        let spreads = (0..self.clusters)
            .map(|_| if hi > lo { rng.random_range(lo..hi).exp() } else { lo.exp() })
            .collect();
        (centres, spreads)
    }

    /// Clean frame sequences for one independent draw of the corpus.
    pub fn draw(&self, stream: u64) -> Result<Vec<FrameSequence>> {
        self.validate()?;
        let (centres, spreads) = self.centres();
        (0..self.clips)
            .map(|c| {
                let mut rng = keyed_rng(self.seed, &[stream, c as u64]);
                let k = rng.random_range(0..self.clusters);
                let centre: Vec<f64> = centres
                    .row(k)
                    .iter()
                    .map(|m| m + spreads[k] * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let frames = Array2::from_shape_fn((self.frames, self.dim), |(_, j)| {
                    centre[j] + self.frame_jitter * rng.sample::<f64, _>(StandardNormal)
                });
                FrameSequence::new(frames, format!("clip{c:05}"))
            })
            .collect()
    }

    fn pool_all(&self, clips: &[FrameSequence], role: Role, label: String) -> Result<EmbeddingSet> {
        let mut data = Array2::zeros((clips.len(), self.dim));
        for (mut row, clip) in data.axis_iter_mut(Axis(0)).zip(clips) {
            row.assign(&pool(clip, self.pool));
        }
        EmbeddingSet::new(data, role, label)
    }

    /// One candidate set per σ, plus an independently drawn clean reference.
    /// Noise for clip `c` at level `i` is keyed by `(seed, i, c)`.
    pub fn noise_ladder(&self, sigmas: &[f64]) -> Result<DistortionLadder> {
        let base = self.draw(CLIP_STREAM)?;
        let reference = self.pool_all(&self.draw(REFERENCE_STREAM)?, Role::Reference, "reference".into())?;
        let levels = sigmas
            .iter()
            .enumerate()
            .map(|(i, &sigma)| {
                let noisy = base
                    .iter()
                    .enumerate()
                    .map(|(c, clip)| {
                        let flat = clip.data().as_slice().expect("standard layout");
                        let out = add_noise(flat, sigma, self.seed, &[i as u64 + 1, c as u64])?;
                        let frames = Array2::from_shape_vec(clip.data().raw_dim(), out).expect("same shape");
                        FrameSequence::new(frames, clip.clip_id())
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.pool_all(&noisy, Role::Candidate, format!("level_{:02}", i + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        DistortionLadder::new(reference, levels, "fidelity")
    }
}

/// σ = 0, 0.02, …, 0.2.
pub fn desk_sigmas() -> Vec<f64> {
    (0..=10).map(|i| 0.02 * i as f64).collect()
}
