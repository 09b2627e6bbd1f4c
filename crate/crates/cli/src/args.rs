//! Command-line arguments shared between subcommands.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use deblur_core::io::load_image;
use deblur_core::model::{extract_psf, Region};
use deblur_core::nonperiodic::IterativeSolverConfig;
use deblur_core::{DeblurProblem, ForwardModel, GammaPrior, ImageGrid, LaplacianOp, Psf};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryArg {
    /// Circular convolution on a torus.
    Periodic,
    /// Latent border around the observed window, zeros beyond it.
    Zero,
}

/// Parses `a,b` or `a,b,c,d` lists of integers.
fn parse_usizes<const N: usize>(s: &str) -> Result<[usize; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated integers, got `{s}`"));
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a nonnegative integer"))?;
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    parse_usizes::<2>(s).map(|[a, b]| (a, b))
}

pub fn parse_region(s: &str) -> Result<(usize, usize, usize, usize), String> {
    parse_usizes::<4>(s).map(|[a, b, c, d]| (a, b, c, d))
}

pub fn parse_gaussian(s: &str) -> Result<(usize, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected SIZE,SIGMA, got `{s}`"))?;
    let size = a.trim().parse().map_err(|_| format!("bad kernel size `{a}`"))?;
    let sigma = b.trim().parse().map_err(|_| format!("bad kernel sigma `{b}`"))?;
    Ok((size, sigma))
}

/// Data, blur kernel and boundary treatment.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Observed image (`.pgm` or raw f64).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
    pub boundary: BoundaryArg,
    /// Latent border width for `--boundary zero`.
    #[arg(long, default_value_t = 16)]
    pub border: usize,
    /// Kernel image file; normalized on load.
    #[arg(long, group = "psf_source")]
    pub psf: Option<PathBuf>,
    /// Kernel cropped from the data as ROW,COL,HEIGHT,WIDTH.
    #[arg(long, value_parser = parse_region, group = "psf_source")]
    pub psf_region: Option<(usize, usize, usize, usize)>,
    /// Truncated Gaussian kernel SIZE,SIGMA.
    #[arg(long, value_parser = parse_gaussian, group = "psf_source")]
    pub psf_gaussian: Option<(usize, f64)>,
    /// Kernel origin ROW,COL; default is the brightest kernel pixel.
    #[arg(long, value_parser = parse_pair)]
    pub psf_anchor: Option<(usize, usize)>,
}

impl ProblemArgs {
    pub fn load_data(&self) -> anyhow::Result<ImageGrid> {
        load_image(&self.data).with_context(|| format!("reading {}", self.data.display()))
    }

    pub fn build_psf(&self, data: &ImageGrid) -> anyhow::Result<Psf> {
        let psf = if let Some(path) = &self.psf {
            let k = load_image(path).with_context(|| format!("reading {}", path.display()))?;
            let region = Region {
                row: 0,
                col: 0,
                height: k.height(),
                width: k.width(),
            };
            extract_psf(&k, region, self.psf_anchor)?
        } else if let Some((row, col, height, width)) = self.psf_region {
            extract_psf(
                data,
                Region {
                    row,
                    col,
                    height,
                    width,
                },
                self.psf_anchor,
            )?
        } else if let Some((size, sigma)) = self.psf_gaussian {
            let p = Psf::gaussian(size, sigma)?;
            match self.psf_anchor {
                Some(a) => p.with_anchor(a)?,
                None => p,
            }
        } else {
            bail!(UsageError(
                "one of --psf, --psf-region or --psf-gaussian is required".into()
            ));
        };
        Ok(psf)
    }

    pub fn build(&self) -> anyhow::Result<DeblurProblem> {
        let y = self.load_data()?;
        let psf = self.build_psf(&y)?;
        let (rows, cols) = y.shape();
        let model = match self.boundary {
            BoundaryArg::Periodic => ForwardModel::periodic(psf, rows, cols)?,
            BoundaryArg::Zero => ForwardModel::zero_padded(psf, rows, cols, self.border)?,
        };
        let (lr, lc) = model.latent_shape();
        let laplacian = LaplacianOp::new(lr, lc, model.boundary());
        Ok(DeblurProblem::new(model, laplacian, y)?)
    }
}

/// Gamma hyperprior constants.
#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct PriorArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha_gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_delta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_delta: f64,
}

impl PriorArgs {
    pub fn build(&self) -> anyhow::Result<GammaPrior> {
        let p = GammaPrior {
            alpha_gamma: self.alpha_gamma,
            beta_gamma: self.beta_gamma,
            alpha_delta: self.alpha_delta,
            beta_delta: self.beta_delta,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Restarted GMRES settings for non-periodic solves.
#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SolverArgs {
    /// Krylov subspace size before restarting.
    #[arg(long, default_value_t = 25)]
    pub restart: usize,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
}

impl SolverArgs {
    pub fn build(&self) -> anyhow::Result<IterativeSolverConfig> {
        let c = IterativeSolverConfig {
            restart: self.restart,
            rel_tol: self.rel_tol,
            max_iters: self.max_iters,
        };
        c.validate()?;
        Ok(c)
    }
}

/// A bad combination of arguments that clap cannot express.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
