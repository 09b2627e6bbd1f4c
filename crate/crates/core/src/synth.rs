//! Synthetic deblurring problems with known truth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::model::{ForwardModel, Psf};
use crate::problem::DeblurProblem;
use crate::rng;

const TRUTH_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;

/// The latent scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSpec {
    /// Banded disk on a dark background, roughly planet-like.
    Planet { radius_fraction: f64 },
    /// Sum of `count` Gaussian bumps at random positions.
    Blobs { count: usize, width: f64 },
    /// Alternating squares of side `cell`.
    Checker { cell: usize },
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self::Planet { radius_fraction: 0.35 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsfSpec {
    Delta,
    Gaussian { size: usize, sigma: f64 },
    Uniform { height: usize, width: usize },
}

impl Default for PsfSpec {
    fn default() -> Self {
        Self::Gaussian { size: 5, sigma: 1.0 }
    }
}

impl PsfSpec {
    pub fn build(&self) -> Result<Psf> {
        match *self {
            Self::Delta => Ok(Psf::delta()),
            Self::Gaussian { size, sigma } => Psf::gaussian(size, sigma),
            Self::Uniform { height, width } => {
                if height == 0 || width == 0 {
                    return Err(Error::Domain("uniform kernel needs a positive shape".into()));
                }
                Ok(Psf::uniform(height, width))
            }
        }
    }
}

/// Everything needed to regenerate a synthetic problem bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Observed images are `size x size`.
    pub size: usize,
    /// `Some(b)` gives the zero-padded model with a latent border of `b`
    /// pixels; `None` gives the periodic model.
    pub border: Option<usize>,
    pub truth: TruthSpec,
    pub psf: PsfSpec,
    /// Overrides the kernel anchor.
    #[serde(default)]
    pub psf_anchor: Option<(usize, usize)>,
    /// Noise precision; `None` turns noise off.
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn periodic(size: usize, gamma: Option<f64>, seed: u64) -> Self {
        Self {
            size,
            border: None,
            truth: TruthSpec::default(),
            psf: PsfSpec::default(),
            psf_anchor: None,
            gamma,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub spec: SynthSpec,
    pub x_true: ImageGrid,
    pub y: ImageGrid,
    pub model: ForwardModel,
}

impl SynthOutput {
    /// The deblurring problem with the default Laplacian prior.
    pub fn problem(&self) -> Result<DeblurProblem> {
        DeblurProblem::with_default_prior(self.model.clone(), self.y.clone())
    }
}

fn truth_image(truth: &TruthSpec, rows: usize, cols: usize, seed: u64) -> Result<ImageGrid> {
    match *truth {
        TruthSpec::Planet { radius_fraction } => {
            if !(radius_fraction > 0.0) {
                return Err(Error::Domain("planet radius must be positive".into()));
            }
            let (cr, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
            let rad = radius_fraction * rows.min(cols) as f64;
            Ok(ImageGrid::from_fn(cols, rows, |r, c| {
                let (dr, dc) = (r as f64 - cr, c as f64 - cc);
                if (dr * dr + dc * dc).sqrt() <= rad {
                    0.6 + 0.3 * (std::f64::consts::PI * 3.0 * dr / rad).cos()
                } else {
                    0.05
                }
            }))
        }
        TruthSpec::Blobs { count, width } => {
            if !(width > 0.0) {
                return Err(Error::Domain("blob width must be positive".into()));
            }
            let mut rng = rng::stream(seed, TRUTH_STREAM);
            let blobs: Vec<(f64, f64, f64)> = (0..count)
                .map(|_| {
                    (
                        rng.random::<f64>() * rows as f64,
                        rng.random::<f64>() * cols as f64,
                        0.5 + rng.random::<f64>(),
                    )
                })
                .collect();
            Ok(ImageGrid::from_fn(cols, rows, |r, c| {
                blobs
                    .iter()
                    .map(|&(br, bc, a)| {
                        let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                        a * (-d2 / (2.0 * width * width)).exp()
                    })
                    .sum()
            }))
        }
        TruthSpec::Checker { cell } => {
            if cell == 0 {
                return Err(Error::Domain("checker cell must be positive".into()));
            }
            Ok(ImageGrid::from_fn(cols, rows, |r, c| {
                ((r / cell + c / cell) % 2) as f64
            }))
        }
    }
}

/// Builds `x_true`, blurs it, and adds `N(0, 1/gamma)` noise per pixel.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    if spec.size == 0 {
        return Err(Error::Domain("image size must be positive".into()));
    }
    let mut psf = spec.psf.build()?;
    if let Some(anchor) = spec.psf_anchor {
        psf = psf.with_anchor(anchor)?;
    }
    let model = match spec.border {
        None => ForwardModel::periodic(psf, spec.size, spec.size)?,
        Some(b) => ForwardModel::zero_padded(psf, spec.size, spec.size, b)?,
    };
    let (lr, lc) = model.latent_shape();
    let x_true = truth_image(&spec.truth, lr, lc, spec.seed)?;
    let mut y = model.apply_forward(&x_true)?;
    if let Some(gamma) = spec.gamma {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("noise precision must be positive, got {gamma}")));
        }
        let sd = gamma.sqrt().recip();
        let mut rng = rng::stream(spec.seed, NOISE_STREAM);
        for v in y.values_mut() {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(SynthOutput {
        spec: spec.clone(),
        x_true,
        y,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_off_gives_exact_blur() {
        let out = generate(&SynthSpec::periodic(8, None, 1)).unwrap();
        assert_eq!(out.y, out.model.apply_forward(&out.x_true).unwrap());
    }

    #[test]
    fn noise_variance_matches_gamma() {
        let gamma = 25.0;
        let a = generate(&SynthSpec::periodic(64, Some(gamma), 3)).unwrap();
        let clean = a.model.apply_forward(&a.x_true).unwrap();
        let r: Vec<f64> = a.y.values().iter().zip(clean.values()).map(|(u, v)| u - v).collect();
        let n = r.len() as f64;
        let var = r.iter().map(|v| v * v).sum::<f64>() / n;
        // sample variance of n normals has sd sigma^2 sqrt(2/n)
        let sigma2 = 1.0 / gamma;
        assert!((var - sigma2).abs() < 3.0 * sigma2 * (2.0 / n).sqrt());
    }

    #[test]
    fn same_seed_same_output() {
        let mut spec = SynthSpec::periodic(16, Some(100.0), 9);
        spec.truth = TruthSpec::Blobs { count: 4, width: 2.0 };
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_eq!(a.y, b.y);
        assert_eq!(a.x_true, b.x_true);
    }

    #[test]
    fn zero_padded_shapes() {
        let mut spec = SynthSpec::periodic(8, Some(100.0), 0);
        spec.border = Some(2);
        let out = generate(&spec).unwrap();
        assert_eq!(out.x_true.shape(), (12, 12));
        assert_eq!(out.y.shape(), (8, 8));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SynthSpec::periodic(8, Some(4.0), 2);
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SynthSpec>(&s).unwrap(), spec);
    }
}
