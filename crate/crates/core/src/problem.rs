use crate::error::Result;
use crate::grid::ImageGrid;
use crate::model::{ForwardModel, LaplacianOp};

/// The pieces of a linear-Gaussian inverse problem needed by matrix-free
/// solvers: `A^T A`, `L`, `A^T y` and `y^T y`.
pub trait GaussianProblem {
    /// Number of unknowns `n`.
    fn latent_dim(&self) -> usize;
    /// Number of observations `m`.
    fn data_dim(&self) -> usize;
    /// `out = A^T A x`.
    fn apply_gram(&self, x: &[f64], out: &mut [f64]);
    /// `out = L x`.
    fn apply_precision(&self, x: &[f64], out: &mut [f64]);
    /// `A^T y`.
    fn adjoint_data(&self) -> &[f64];
    /// `y^T y`.
    fn data_norm_sq(&self) -> f64;

    /// `out = (A^T A + lambda L) x`.
    fn apply_system(&self, lambda: f64, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; x.len()];
        self.apply_gram(x, out);
        self.apply_precision(x, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += lambda * t;
        }
    }
}

/// A blurred image together with its forward model and prior precision.
#[derive(Debug, Clone)]
pub struct DeblurProblem {
    model: ForwardModel,
    laplacian: LaplacianOp,
    y: ImageGrid,
    aty: Vec<f64>,
    yty: f64,
}

impl DeblurProblem {
    pub fn new(model: ForwardModel, laplacian: LaplacianOp, y: ImageGrid) -> Result<Self> {
        y.expect_shape(model.observed_shape())?;
        if laplacian.shape() != model.latent_shape() {
            return Err(crate::Error::Dimension {
                expected: model.latent_shape(),
                found: laplacian.shape(),
            });
        }
        let aty = model.apply_adjoint(&y)?.into_values();
        let yty = y.dot(&y);
        Ok(Self {
            model,
            laplacian,
            y,
            aty,
            yty,
        })
    }

    /// Uses the Laplacian whose boundary rule matches the model.
    pub fn with_default_prior(model: ForwardModel, y: ImageGrid) -> Result<Self> {
        let lap = model.laplacian();
        Self::new(model, lap, y)
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn laplacian(&self) -> &LaplacianOp {
        &self.laplacian
    }

    pub fn data(&self) -> &ImageGrid {
        &self.y
    }

    /// Wraps a flat latent vector as an image.
    pub fn latent_image(&self, values: Vec<f64>) -> ImageGrid {
        let (r, c) = self.model.latent_shape();
        ImageGrid::from_vec_unchecked(c, r, values)
    }
}

impl GaussianProblem for DeblurProblem {
    fn latent_dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn data_dim(&self) -> usize {
        self.model.observed_dim()
    }

    fn apply_gram(&self, x: &[f64], out: &mut [f64]) {
        let mut ax = vec![0.0; self.model.observed_dim()];
        self.model.forward_slice(x, &mut ax);
        self.model.adjoint_slice(&ax, out);
    }

    fn apply_precision(&self, x: &[f64], out: &mut [f64]) {
        self.laplacian.apply_slice(x, out);
    }

    fn adjoint_data(&self) -> &[f64] {
        &self.aty
    }

    fn data_norm_sq(&self) -> f64 {
        self.yty
    }
}

/// Transform-domain view of a periodic problem: spectra of `A`, `L` and `y`
/// in DFT order.
#[derive(Debug, Clone)]
pub struct PeriodicProblem {
    fft: crate::fft::Fft2,
    shape: (usize, usize),
    ahat: Vec<num_complex::Complex64>,
    lhat: Vec<f64>,
    yhat: Vec<num_complex::Complex64>,
    ydoty: f64,
}

impl PeriodicProblem {
    pub fn new(model: &crate::model::PeriodicModel, y: &ImageGrid) -> Result<Self> {
        y.expect_shape(model.shape())?;
        let (rows, cols) = model.shape();
        Ok(Self {
            fft: model.fft().clone(),
            shape: (rows, cols),
            ahat: model.spectrum().to_vec(),
            lhat: LaplacianOp::periodic(rows, cols).spectrum().expect("periodic"),
            yhat: model.fft().forward_real(y.values()),
            ydoty: y.dot(y),
        })
    }

    /// Returns `None` unless both the blur and the prior are periodic.
    pub fn from_problem(problem: &DeblurProblem) -> Option<Result<Self>> {
        let model = problem.model().as_periodic()?;
        if problem.laplacian().boundary() != crate::model::Boundary::Periodic {
            return None;
        }
        Some(Self::new(model, problem.data()))
    }

    pub fn fft(&self) -> &crate::fft::Fft2 {
        &self.fft
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.ahat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ahat.is_empty()
    }

    pub fn ahat(&self) -> &[num_complex::Complex64] {
        &self.ahat
    }

    pub fn lhat(&self) -> &[f64] {
        &self.lhat
    }

    pub fn yhat(&self) -> &[num_complex::Complex64] {
        &self.yhat
    }

    pub fn ydoty(&self) -> f64 {
        self.ydoty
    }

    /// Back to the image domain.
    pub fn to_image(&self, spectrum: &[num_complex::Complex64]) -> ImageGrid {
        let (r, c) = self.shape;
        ImageGrid::from_vec_unchecked(c, r, self.fft.inverse_real(spectrum))
    }
}
