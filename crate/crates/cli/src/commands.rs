//! Subcommand implementations. Each writes its outputs and a
//! `manifest.json` recording the full argument set into `--out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use deblur_core::diagnostics::{self, DiagnosticsReport};
use deblur_core::io::save_image;
use deblur_core::nonperiodic::{
    find_mode, posterior_mean, run_mwg_chain, ExpansionConfig, ExpansionSet, ModeConfig, TraceMethod,
};
use deblur_core::regularize::{build_lcurve, default_lambda_grid, log_spaced, solve_gendeconv};
use deblur_core::rng::{self, FIELD_STREAM};
use deblur_core::samplers::{
    draw_images, marginal_mode, run_chain, sample_conditional_x, tune_proposals, Chain, ChainConfig,
    GaussianRandomWalk, MarginalEval, PeriodicPosterior, SamplerKind,
};
use deblur_core::synth::{generate, PsfSpec, SynthSpec, TruthSpec};
use deblur_core::{DeblurProblem, GaussianProblem, Hyper, ImageGrid};
use serde::Serialize;
use serde_json::json;

use crate::args::{parse_pair, PriorArgs, ProblemArgs, SolverArgs, UsageError};

fn write_manifest<T: Serialize>(
    out: &Path,
    command: &str,
    args: &T,
    resolved: serde_json::Value,
) -> anyhow::Result<()> {
    let manifest = json!({
        "tool": "deblur",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "resolved": resolved,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn save(image: &ImageGrid, path: PathBuf) -> anyhow::Result<()> {
    save_image(image, &path).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn rmse(a: &ImageGrid, b: &ImageGrid) -> Option<f64> {
    a.rms_diff(b).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthArg {
    Planet,
    Blobs,
    Checker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsfArg {
    Gaussian,
    Uniform,
    Delta,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Side of the observed square image.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Latent border; omit for the periodic model.
    #[arg(long)]
    pub border: Option<usize>,
    #[arg(long, value_enum, default_value_t = TruthArg::Planet)]
    pub truth: TruthArg,
    /// Planet radius as a fraction of the image side.
    #[arg(long, default_value_t = 0.35)]
    pub radius: f64,
    #[arg(long, default_value_t = 6)]
    pub blobs: usize,
    #[arg(long, default_value_t = 2.0)]
    pub blob_width: f64,
    #[arg(long, default_value_t = 4)]
    pub cell: usize,
    #[arg(long, value_enum, default_value_t = PsfArg::Gaussian)]
    pub psf: PsfArg,
    /// Kernel side (Gaussian and uniform kernels).
    #[arg(long, default_value_t = 5)]
    pub psf_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub psf_sigma: f64,
    #[arg(long, value_parser = parse_pair)]
    pub psf_anchor: Option<(usize, usize)>,
    /// Noise precision.
    #[arg(long, default_value_t = 100.0)]
    pub gamma: f64,
    /// Emit the noiseless blurred image.
    #[arg(long)]
    pub noise_off: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        size: args.size,
        border: args.border,
        truth: match args.truth {
            TruthArg::Planet => TruthSpec::Planet {
                radius_fraction: args.radius,
            },
            TruthArg::Blobs => TruthSpec::Blobs {
                count: args.blobs,
                width: args.blob_width,
            },
            TruthArg::Checker => TruthSpec::Checker { cell: args.cell },
        },
        psf: match args.psf {
            PsfArg::Gaussian => PsfSpec::Gaussian {
                size: args.psf_size,
                sigma: args.psf_sigma,
            },
            PsfArg::Uniform => PsfSpec::Uniform {
                height: args.psf_size,
                width: args.psf_size,
            },
            PsfArg::Delta => PsfSpec::Delta,
        },
        psf_anchor: args.psf_anchor,
        gamma: (!args.noise_off).then_some(args.gamma),
        seed: args.seed,
    };
    let out = generate(&spec)?;
    prepare_out(&args.out)?;
    save(&out.y, args.out.join("y.raw"))?;
    save(&out.y, args.out.join("y.pgm"))?;
    save(&out.x_true, args.out.join("x_true.raw"))?;
    save(&out.x_true, args.out.join("x_true.pgm"))?;
    save(out.model.psf().grid(), args.out.join("psf.raw"))?;
    write_manifest(
        &args.out,
        "synth",
        args,
        json!({ "spec": spec, "psf_anchor": out.model.psf().anchor() }),
    )?;
    println!(
        "wrote {}x{} data and {}x{} truth to {}",
        out.y.height(),
        out.y.width(),
        out.x_true.height(),
        out.x_true.width(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeblurRegArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Number of L-curve points.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Known truth, for an RMSE report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn deblur_reg(args: &DeblurRegArgs) -> anyhow::Result<()> {
    let problem = args.problem.build()?;
    let config = args.solver.build()?;
    if args.points < 3 {
        bail!(UsageError("--points must be at least 3".into()));
    }
    let grid = match (args.lambda_min, args.lambda_max) {
        (None, None) => default_lambda_grid(&problem, args.points),
        (Some(lo), Some(hi)) if lo > 0.0 && hi > lo => log_spaced(lo, hi, args.points),
        _ => bail!(UsageError(
            "--lambda-min and --lambda-max must be given together with 0 < min < max".into()
        )),
    };
    prepare_out(&args.out)?;
    let start = Instant::now();
    let curve = build_lcurve(&problem, &grid, &config)?;
    let lambda_time = start.elapsed().as_secs_f64();
    let lambda = curve.corner_lambda();
    let x = solve_gendeconv(&problem, lambda, &config)?;
    let total_time = start.elapsed().as_secs_f64();

    write_text(&args.out.join("lcurve.csv"), &curve.to_csv())?;
    save(&x, args.out.join("x_reg.raw"))?;
    save(&x, args.out.join("x_reg.pgm"))?;
    let mut report = json!({
        "lambda": lambda,
        "corner_index": curve.corner_index,
        "solves": grid.len() + 1,
        "time_to_lambda_seconds": lambda_time,
        "wall_time_seconds": total_time,
    });
    if let Some(path) = &args.truth {
        let truth = deblur_core::io::load_image(path).with_context(|| format!("reading {}", path.display()))?;
        report["rmse_estimate"] = json!(rmse(&x, &truth));
        report["rmse_data"] = json!(rmse(problem.data(), &truth));
    }
    write_json(&args.out.join("report.json"), &report)?;
    write_manifest(
        &args.out,
        "deblur-reg",
        args,
        json!({ "lambda_grid": [grid[0], grid[grid.len() - 1]] }),
    )?;
    println!("lambda = {lambda:e} ({} solves, {total_time:.3} s)", grid.len() + 1);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmArg {
    Gibbs,
    Oneblock,
    Mtc1,
    Mtc2,
    MtcNonperiodic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum)]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// Default 60 for Gibbs, 20 otherwise.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Error bound for the fast `f`, `g` series.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Head/tail series order.
    #[arg(long, default_value_t = 8)]
    pub series_order: usize,
    /// Taylor order for the non-periodic expansions.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Hutchinson probes; 0 means exact traces.
    #[arg(long, default_value_t = 4)]
    pub probes: usize,
    #[arg(long, default_value_t = 4)]
    pub max_centers: usize,
    #[arg(long)]
    pub w_gamma: Option<f64>,
    #[arg(long)]
    pub w_delta: Option<f64>,
    #[arg(long)]
    pub w2: Option<f64>,
    /// `lambda` step for the non-periodic sampler; default a tenth of the mode.
    #[arg(long)]
    pub w3: Option<f64>,
    /// Pilot length for tuning proposal widths that were not given.
    #[arg(long, default_value_t = 2000)]
    pub tune_steps: usize,
    #[arg(long)]
    pub init_gamma: Option<f64>,
    #[arg(long)]
    pub init_delta: Option<f64>,
    /// Starting `lambda` for the non-periodic mode search.
    #[arg(long)]
    pub lambda_init: Option<f64>,
    /// Most conditional image draws to emit (MTC variants).
    #[arg(long, default_value_t = 20)]
    pub draws: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Seed offset for pilot tuning runs so they do not reuse the main streams.
const PILOT_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

fn independent_states(chain: &Chain, burn_in: usize, max: usize) -> Vec<Hyper> {
    let kept = chain.after_burn_in(burn_in);
    let lambdas: Vec<f64> = kept.iter().map(|h| h.lambda()).collect();
    let tau = diagnostics::iact(&lambdas).map(|e| e.tau).unwrap_or(1.0);
    let stride = tau.ceil().max(1.0) as usize;
    kept.iter().step_by(stride).take(max).copied().collect()
}

fn save_draws(out: &Path, draws: &[ImageGrid]) -> anyhow::Result<()> {
    if draws.is_empty() {
        return Ok(());
    }
    let dir = out.join("draws");
    prepare_out(&dir)?;
    for (i, d) in draws.iter().enumerate() {
        save(d, dir.join(format!("draw_{i:04}.raw")))?;
    }
    Ok(())
}

pub fn sample(args: &SampleArgs) -> anyhow::Result<()> {
    if args.steps == 0 || args.thin == 0 {
        bail!(UsageError("--steps and --thin must be positive".into()));
    }
    let problem = args.problem.build()?;
    let prior = args.prior.build()?;
    prepare_out(&args.out)?;
    let (chain, resolved, draws) = if args.algorithm == AlgorithmArg::MtcNonperiodic {
        sample_nonperiodic(args, &problem, prior)?
    } else {
        sample_periodic(args, &problem, prior)?
    };
    let burn_in = args.burn_in.unwrap_or(match args.algorithm {
        AlgorithmArg::Gibbs => 60,
        _ => 20,
    });
    write_text(&args.out.join("chain.csv"), &chain.to_csv())?;
    save_draws(&args.out, &draws)?;
    write_json(
        &args.out.join("report.json"),
        &json!({
            "algorithm": args.algorithm,
            "steps": args.steps,
            "burn_in": burn_in,
            "acceptance_rate": chain.acceptance_rate(),
            "wall_time_seconds": chain.wall_time,
            "image_draws": draws.len(),
        }),
    )?;
    write_manifest(&args.out, "sample", args, resolved)?;
    println!(
        "{} steps, acceptance {:.3}, {:.3} s",
        args.steps,
        chain.acceptance_rate(),
        chain.wall_time
    );
    Ok(())
}

fn resolved_init<F>(args: &SampleArgs, mode: F) -> anyhow::Result<Hyper>
where
    F: FnOnce() -> anyhow::Result<Hyper>,
{
    match (args.init_gamma, args.init_delta) {
        (Some(g), Some(d)) => Ok(Hyper::new(g, d)?),
        (None, None) => mode(),
        _ => bail!(UsageError(
            "--init-gamma and --init-delta must be given together".into()
        )),
    }
}

fn sample_periodic(
    args: &SampleArgs,
    problem: &DeblurProblem,
    prior: deblur_core::GammaPrior,
) -> anyhow::Result<(Chain, serde_json::Value, Vec<ImageGrid>)> {
    let Some(model) = problem.model().as_periodic() else {
        bail!(UsageError(format!(
            "--algorithm {:?} needs --boundary periodic; use mtc-nonperiodic otherwise",
            args.algorithm
        )));
    };
    let post = PeriodicPosterior::with_order(model, problem.data(), prior, args.series_order)?;
    let init = resolved_init(args, || Ok(marginal_mode(&post, MarginalEval::Direct)?))?;
    let needs_widths = match args.algorithm {
        AlgorithmArg::Oneblock | AlgorithmArg::Mtc1 => args.w_gamma.is_none() || args.w_delta.is_none(),
        AlgorithmArg::Mtc2 => args.w2.is_none(),
        _ => false,
    };
    let tuning = if needs_widths {
        Some(tune_proposals(
            &post,
            init,
            args.tune_steps,
            args.seed.wrapping_add(PILOT_SEED_OFFSET),
            args.eps,
        )?)
    } else {
        None
    };
    let widths = || -> anyhow::Result<GaussianRandomWalk> {
        let t = tuning.map(|t| t.option1);
        Ok(GaussianRandomWalk::new(
            args.w_gamma.or(t.map(|t| t.w_gamma)).unwrap_or_default(),
            args.w_delta.or(t.map(|t| t.w_delta)).unwrap_or_default(),
        )?)
    };
    let kind = match args.algorithm {
        AlgorithmArg::Gibbs => SamplerKind::Gibbs,
        AlgorithmArg::Oneblock => SamplerKind::OneBlock { widths: widths()? },
        AlgorithmArg::Mtc1 => SamplerKind::MtcOption1 { widths: widths()? },
        AlgorithmArg::Mtc2 => SamplerKind::MtcOption2 {
            w2: args.w2.or(tuning.map(|t| t.w2)).unwrap_or_default(),
        },
        AlgorithmArg::MtcNonperiodic => unreachable!(),
    };
    let mut config = ChainConfig::new(kind, args.steps, args.seed);
    config.thinning = args.thin;
    config.eps = args.eps;
    let chain = run_chain(&post, &config, init)?;
    let draws = match args.algorithm {
        AlgorithmArg::Mtc1 | AlgorithmArg::Mtc2 => {
            let burn = args.burn_in.unwrap_or(kind.default_burn_in()) / args.thin;
            draw_images(&post, &independent_states(&chain, burn, args.draws), args.seed)
        }
        _ => Vec::new(),
    };
    Ok((chain, json!({ "init": init, "sampler": kind, "tuning": tuning }), draws))
}

fn sample_nonperiodic(
    args: &SampleArgs,
    problem: &DeblurProblem,
    prior: deblur_core::GammaPrior,
) -> anyhow::Result<(Chain, serde_json::Value, Vec<ImageGrid>)> {
    if args.thin != 1 {
        bail!(UsageError("--thin is not supported by mtc-nonperiodic".into()));
    }
    let expansion = ExpansionConfig {
        order: args.order,
        trace: if args.probes == 0 {
            TraceMethod::Exact
        } else {
            TraceMethod::Hutchinson { probes: args.probes }
        },
        solver: args.solver.build()?,
        max_centers: args.max_centers,
        ..Default::default()
    };
    let mode_config = ModeConfig {
        expansion,
        ..Default::default()
    };
    let lambda_init = match args.lambda_init {
        Some(l) => l,
        None => {
            let g = default_lambda_grid(problem, 3);
            g[1]
        }
    };
    let mut probe_rng = rng::stream(args.seed, rng::PROBE_STREAM);
    let start = Instant::now();
    let mode = find_mode(problem, &prior, lambda_init, &mode_config, &mut probe_rng)?;
    let init = resolved_init(args, || Ok(Hyper::new(mode.gamma, mode.gamma * mode.lambda)?))?;
    let mut set = ExpansionSet::new(problem, prior, expansion, init.lambda(), args.seed)?;
    let setup = start.elapsed().as_secs_f64();
    let w3 = args.w3.unwrap_or(0.1 * init.lambda());
    let chain = run_mwg_chain(&mut set, init, args.steps, w3, args.seed)?;
    let burn = args.burn_in.unwrap_or(20);
    let mut field = rng::stream(args.seed, FIELD_STREAM);
    let draws = independent_states(&chain, burn, args.draws)
        .into_iter()
        .map(|h| sample_conditional_x(problem, h, &mut field, &expansion.solver))
        .collect::<Result<Vec<_>, _>>()?;
    let resolved = json!({
        "lambda_init": lambda_init,
        "mode": { "lambda": mode.lambda, "gamma": mode.gamma, "solves": mode.solves },
        "init": init,
        "w3": w3,
        "expansion_centers": set.centers().len(),
        "setup_seconds": setup,
        "latent_dim": problem.latent_dim(),
    });
    Ok((chain, resolved, draws))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeanArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Chain CSV written by `sample`.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn mean(args: &MeanArgs) -> anyhow::Result<()> {
    let problem = args.problem.build()?;
    let config = args.solver.build()?;
    let text = fs::read_to_string(&args.chain).with_context(|| format!("reading {}", args.chain.display()))?;
    let chain = Chain::from_csv(&text)?;
    let lambdas: Vec<f64> = chain.after_burn_in(args.burn_in).iter().map(|h| h.lambda()).collect();
    let hist = diagnostics::histogram(&lambdas, args.bins)?;
    prepare_out(&args.out)?;
    let start = Instant::now();
    let x = posterior_mean(&problem, &hist.centers(), &hist.weights, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    save(&x, args.out.join("mean.raw"))?;
    save(&x, args.out.join("mean.pgm"))?;
    write_text(&args.out.join("lambda_hist.csv"), &hist.to_csv())?;
    write_manifest(
        &args.out,
        "mean",
        args,
        json!({ "samples": lambdas.len(), "seconds": elapsed }),
    )?;
    println!(
        "posterior mean from {} samples in {} bins",
        lambdas.len(),
        hist.weights.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Chain CSV files.
    #[arg(required = true)]
    pub chains: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// Wolff window factor.
    #[arg(long, default_value_t = diagnostics::DEFAULT_WINDOW_FACTOR)]
    pub window_factor: f64,
    /// Transition time for CCES; default reads `report.json` beside the chain.
    #[arg(long)]
    pub wall_time: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn sibling_wall_time(chain: &Path) -> Option<f64> {
    let report = chain.parent()?.join("report.json");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).ok()?).ok()?;
    v.get("wall_time_seconds")?.as_f64()
}

pub fn diagnose(args: &DiagnoseArgs) -> anyhow::Result<()> {
    if args.window_factor.is_nan() || args.window_factor <= 0.0 {
        bail!(UsageError("--window-factor must be positive".into()));
    }
    prepare_out(&args.out)?;
    let mut all = Vec::new();
    for (k, path) in args.chains.iter().enumerate() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let chain = Chain::from_csv(&text)?;
        let kept = chain.after_burn_in(args.burn_in);
        if kept.len() < 100 {
            bail!(UsageError(format!(
                "{}: fewer than 100 states after burn-in",
                path.display()
            )));
        }
        let wall = args.wall_time.or_else(|| sibling_wall_time(path)).unwrap_or(f64::NAN);
        // scale CCES to the states kept
        let wall_kept = wall * kept.len() as f64 / chain.len() as f64;
        let series = [
            ("gamma", kept.iter().map(|h| h.gamma).collect::<Vec<_>>()),
            ("delta", kept.iter().map(|h| h.delta).collect()),
            ("lambda", kept.iter().map(|h| h.lambda()).collect()),
        ];
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("chain");
        let tag = format!("{k}_{stem}");
        let mut reports: Vec<DiagnosticsReport> = Vec::new();
        for (name, values) in &series {
            let mut r = diagnostics::report(name, values, wall_kept, chain.acceptance_rate(), args.bins)?;
            if args.window_factor != diagnostics::DEFAULT_WINDOW_FACTOR {
                let est = diagnostics::iact_with(values, args.window_factor)?;
                r.tau = est.tau;
                r.tau_std_error = est.std_error;
                r.window = est.window;
                r.unreliable = est.unreliable;
                r.cces = diagnostics::cces(est.tau, wall_kept, values.len());
                r.acf = diagnostics::autocorrelation(values, est.window.min(values.len() / 2))?;
            }
            write_text(&args.out.join(format!("{tag}_{name}_hist.csv")), &r.histogram.to_csv())?;
            println!(
                "{} {name}: mean {:e} sd {:e} tau {:.3} +- {:.3} (W = {}{}) cces {:e} accept {:.3}",
                path.display(),
                r.mean,
                r.std_dev,
                r.tau,
                r.tau_std_error,
                r.window,
                if r.unreliable { ", unreliable" } else { "" },
                r.cces,
                r.acceptance_rate
            );
            reports.push(r);
        }
        all.push(json!({ "chain": path, "states": kept.len(), "wall_time_seconds": wall, "statistics": reports }));
    }
    write_json(&args.out.join("report.json"), &all)?;
    write_manifest(&args.out, "diagnose", args, json!(null))?;
    Ok(())
}
