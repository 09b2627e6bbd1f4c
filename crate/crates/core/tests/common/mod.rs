//! Dense counterparts of library objects for oracle comparisons.
#![allow(dead_code)]

use deblur_core::synth::{generate, PsfSpec, SynthOutput, SynthSpec, TruthSpec};
use deblur_core::{DeblurProblem, ForwardModel, ImageGrid, Psf};
use deblur_oracle::{
    convolution_periodic, convolution_zero_padded, laplacian_dirichlet, laplacian_periodic, Kernel, Matrix, Vector,
};

pub fn kernel(psf: &Psf) -> Kernel {
    let g = psf.grid();
    let (rows, cols) = g.shape();
    Kernel::new(rows, cols, g.values().to_vec(), psf.anchor())
}

pub fn vector(image: &ImageGrid) -> Vector {
    Vector::from_column_slice(image.values())
}

/// `(A, L, y)` assembled from definitions.
pub fn dense(problem: &DeblurProblem) -> (Matrix, Matrix, Vector) {
    let model = problem.model();
    let k = kernel(model.psf());
    let (rows, cols) = model.observed_shape();
    let (a, l) = match model {
        ForwardModel::PeriodicSpectral(_) => (convolution_periodic(&k, rows, cols), laplacian_periodic(rows, cols)),
        ForwardModel::ZeroPaddedDirichlet(m) => {
            let (lr, lc) = model.latent_shape();
            (
                convolution_zero_padded(&k, rows, m.border()),
                laplacian_dirichlet(lr, lc),
            )
        }
    };
    (a, l, vector(problem.data()))
}

/// A small problem with a 3x3 Gaussian blur.
pub fn small(size: usize, border: Option<usize>, gamma: f64, seed: u64) -> SynthOutput {
    generate(&SynthSpec {
        size,
        border,
        truth: TruthSpec::Blobs { count: 3, width: 1.0 },
        psf: PsfSpec::Gaussian { size: 3, sigma: 0.8 },
        psf_anchor: None,
        gamma: Some(gamma),
        seed,
    })
    .unwrap()
}

/// `k`-th Taylor coefficient of `fun` at `x` from central differences with
/// one Richardson step.
pub fn taylor_fd(fun: impl Fn(f64) -> f64, x: f64, h: f64, k: usize) -> f64 {
    let coarse = deblur_oracle::derivative(&fun, x, h, k);
    let fine = deblur_oracle::derivative(&fun, x, h / 2.0, k);
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    (4.0 * fine - coarse) / 3.0 / factorial
}
