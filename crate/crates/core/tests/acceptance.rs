//! One line per acceptance criterion. Runs as a plain binary so that the
//! summary is always printed; exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{dense, small, taylor_fd, vector};
use deblur_core::diagnostics::{histogram, iact, Iact};
use deblur_core::nonperiodic::{
    find_mode, hutchinson_traces, posterior_mean, run_mwg_chain, taylor_f, taylor_g, ExpansionConfig, ExpansionSet,
    IterativeSolverConfig, ModeConfig, SystemSolver, TraceMethod,
};
use deblur_core::regularize::{build_lcurve, default_lambda_grid, solve_gendeconv};
use deblur_core::samplers::{
    conditional_mean, marginal_mode, run_chain, sample_conditional_x, tune_proposals, Chain, ChainConfig, MarginalEval,
    PeriodicPosterior, SamplerKind,
};
use deblur_core::spectral::{f_direct, f_fast_detailed, g_direct, g_fast_detailed, CumulantTables, SpectralCache};
use deblur_core::synth::{generate, SynthSpec};
use deblur_core::{DeblurProblem, GammaPrior, Hyper, HyperPrior};
use deblur_oracle::{
    conditional_moments, laplacian_dirichlet, log_marginal_general, quadrature_marginal, solve_spd, trace_powers,
    DenseModel, Matrix, Pencil, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Counts entries of the empirical mean and second moment that miss the
/// dense conditional moments by more than 3 Monte Carlo standard errors.
fn rto_misses(problem: &DeblurProblem, h: Hyper, draws: usize, seed: u64) -> (usize, usize) {
    let (a, l, y) = dense(problem);
    let d = DenseModel::hierarchical(&a, &l, &y, h.gamma, h.delta).unwrap();
    let (mu, cov) = conditional_moments(&d).unwrap();
    let n = mu.len();
    let cfg = IterativeSolverConfig::default().with_rel_tol(1e-11);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = Vector::zeros(n);
    let mut outer = Matrix::zeros(n, n);
    for _ in 0..draws {
        let x = vector(&sample_conditional_x(problem, h, &mut rng, &cfg).unwrap()) - &mu;
        sum += &x;
        outer += &x * x.transpose();
    }
    let k = draws as f64;
    let m = sum / k;
    let c = outer / k;
    let mut misses = 0;
    let mut total = 0;
    for i in 0..n {
        total += 1;
        if m[i].abs() > 3.0 * (cov[(i, i)] / k).sqrt() {
            misses += 1;
        }
        for j in i..n {
            total += 1;
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / k).sqrt();
            if (c[(i, j)] - cov[(i, j)]).abs() > 3.0 * se {
                misses += 1;
            }
        }
    }
    (misses, total)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let draws = 100_000;
    let periodic = small(4, None, 100.0, 11).problem().unwrap();
    let padded = small(4, Some(1), 100.0, 12).problem().unwrap();
    let h = Hyper::new(100.0, 2.0).unwrap();
    let (m1, t1) = rto_misses(&periodic, h, draws, 1);
    let (m2, t2) = rto_misses(&padded, h, draws, 2);
    let secs = t.elapsed().as_secs_f64();
    // The criterion is per entry on the 4x4 problem. The zero-padded run (36
    // unknowns, 702 entries) is an extra check of the Krylov path; there a
    // few 3 SE misses are expected by chance, so its count is held to a
    // binomial bound instead.
    let expected = 0.0027 * t2 as f64;
    outcome(
        m1 == 0 && (m2 as f64) <= expected + 4.0 * expected.sqrt() && secs < 60.0,
        format!(
            "entries beyond 3 SE: periodic {m1}/{t1}; zero-padded {m2}/{t2} (chance level {expected:.1}); {secs:.1}s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let prior = GammaPrior::default();
    let mut worst: f64 = 0.0;
    for (size, seed) in [(4, 21), (6, 22)] {
        let problem = small(size, None, 100.0, seed).problem().unwrap();
        let (a, l, y) = dense(&problem);
        let n = y.len() as f64;
        // Q = delta L is singular; the oracle uses a pseudo-determinant, so
        // the matching exponent of delta is (n - 1)/2
        let post = PeriodicPosterior::from_problem(&problem, prior)
            .unwrap()
            .with_delta_exponent((n - 1.0) / 2.0);
        let oracle = |h: Hyper| {
            let d = DenseModel::hierarchical(&a, &l, &y, h.gamma, h.delta).unwrap();
            log_marginal_general(&d, prior.log_density(h)).unwrap().log_density
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            Hyper::new(
                10f64.powf(rng.random_range(0.0..3.0)),
                10f64.powf(rng.random_range(-3.0..1.0)),
            )
            .unwrap()
        };
        for _ in 0..100 {
            let (h1, h2) = (draw(), draw());
            let ds = post.log_marginal(h1, MarginalEval::Direct).unwrap()
                - post.log_marginal(h2, MarginalEval::Direct).unwrap();
            let d_o = oracle(h1) - oracle(h2);
            worst = worst.max((ds - d_o).abs());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |difference error| = {worst:.2e} over 200 pairs"),
    )
}

fn random_cache(n: usize, rng: &mut ChaCha8Rng) -> SpectralCache {
    let gram: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-6.0..0.0))).collect();
    let lhat: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { rng.random_range(0.0..8.0) })
        .collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    SpectralCache::from_modes(&gram, &lhat, &w).unwrap()
}

/// `mid` shared modes with `Z` in `[1e-2, 1e2]`; the rest sit far below or
/// above every band the test touches.
fn matched_cache(n: usize, mid: &[(f64, f64)]) -> SpectralCache {
    let mut gram = Vec::with_capacity(n);
    let mut lhat = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &(z, wi) in mid {
        gram.push(1.0);
        lhat.push(z);
        w.push(wi);
    }
    for i in 0..n - mid.len() {
        gram.push(1.0);
        lhat.push(if i % 2 == 0 { 1e-12 } else { 1e12 });
        w.push(1e-3);
    }
    SpectralCache::from_modes(&gram, &lhat, &w).unwrap()
}

fn criterion_3() -> Outcome {
    let order = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cache = random_cache(4096, &mut rng);
    let tables = CumulantTables::build(&cache, order).unwrap();
    let lambdas = deblur_core::regularize::log_spaced(1e-8, 1e2, 50);
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for eps in [1e-4, 1e-6, 1e-8] {
        for &lam in &lambdas {
            let ef = (f_fast_detailed(&cache, &tables, lam, eps).unwrap().value - f_direct(&cache, lam).unwrap()).abs();
            let eg = (g_fast_detailed(&cache, &tables, lam, eps).unwrap().value - g_direct(&cache, lam).unwrap()).abs();
            ok &= ef <= eps && eg <= eps;
            worst_ratio = worst_ratio.max(ef / eps).max(eg / eps);
        }
    }
    let mid: Vec<(f64, f64)> = (0..400)
        .map(|i| (10f64.powf(-2.0 + 4.0 * i as f64 / 399.0), rng.random::<f64>()))
        .collect();
    let small_cache = matched_cache(64 * 64, &mid);
    let big_cache = matched_cache(256 * 256, &mid);
    let (ts, tb) = (
        CumulantTables::build(&small_cache, order).unwrap(),
        CumulantTables::build(&big_cache, order).unwrap(),
    );
    let mut band_ratio: f64 = 1.0;
    for eps in [1e-4, 1e-6, 1e-8] {
        for lam in deblur_core::regularize::log_spaced(0.1, 10.0, 10) {
            let a = f_fast_detailed(&small_cache, &ts, lam, eps)
                .unwrap()
                .middle_terms
                .max(1) as f64;
            let b = f_fast_detailed(&big_cache, &tb, lam, eps).unwrap().middle_terms.max(1) as f64;
            let c = g_fast_detailed(&small_cache, &ts, lam, eps)
                .unwrap()
                .middle_terms
                .max(1) as f64;
            let d = g_fast_detailed(&big_cache, &tb, lam, eps).unwrap().middle_terms.max(1) as f64;
            band_ratio = band_ratio.max(a / b).max(b / a).max(c / d).max(d / c);
        }
    }
    outcome(
        ok && band_ratio <= 2.0,
        format!("max error/eps = {worst_ratio:.2}; middle-band ratio 256^2 vs 64^2 = {band_ratio:.2}"),
    )
}

struct Run {
    name: &'static str,
    chain: Chain,
    burn_in: usize,
}

impl Run {
    fn series(&self, pick: fn(&Hyper) -> f64) -> Vec<f64> {
        self.chain.after_burn_in(self.burn_in).iter().map(pick).collect()
    }
}

fn lam(h: &Hyper) -> f64 {
    h.lambda()
}

fn gam(h: &Hyper) -> f64 {
    h.gamma
}

fn del(h: &Hyper) -> f64 {
    h.delta
}

fn run_all<P: HyperPrior>(post: &PeriodicPosterior<P>, steps: usize, seed: u64) -> Vec<Run> {
    let mode = marginal_mode(post, MarginalEval::Direct).unwrap();
    let tuning = tune_proposals(post, mode, 4000, seed ^ 0x5eed, 1e-8).unwrap();
    let kinds = [
        ("gibbs", SamplerKind::Gibbs),
        ("oneblock", SamplerKind::OneBlock { widths: tuning.option1 }),
        ("mtc1", SamplerKind::MtcOption1 { widths: tuning.option1 }),
        ("mtc2", SamplerKind::MtcOption2 { w2: tuning.w2 }),
    ];
    kinds
        .iter()
        .map(|&(name, kind)| {
            let mut cfg = ChainConfig::new(kind, steps, seed);
            cfg.eps = 1e-8;
            Run {
                name,
                chain: run_chain(post, &cfg, mode).unwrap(),
                burn_in: kind.default_burn_in(),
            }
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let out = small(8, None, 100.0, 41);
    let problem = out.problem().unwrap();
    let prior = GammaPrior::default();
    let post = PeriodicPosterior::from_problem(&problem, prior).unwrap();
    let runs = run_all(&post, 100_000, 42);

    let (a, l, y) = dense(&problem);
    let pencil = Pencil::from_model(&a, &l, &y).unwrap();
    let n = y.len();
    let mode = marginal_mode(&post, MarginalEval::Direct).unwrap();
    let grid = |c: f64| deblur_oracle::log_spaced(c * (-1.6f64).exp(), c * 1.6f64.exp(), 300);
    let table = quadrature_marginal(
        |g, d| pencil.log_marginal(n, g, d, n as f64 / 2.0, prior.log_density(Hyper { gamma: g, delta: d })),
        &grid(mode.gamma),
        &grid(mode.delta),
        1e-6,
    )
    .unwrap();
    let (qg, qd, ql) = table.means();

    let stats: [Stat; 3] = [("gamma", gam, qg), ("delta", del, qd), ("lambda", lam, ql)];
    let mut pairwise: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut notes = Vec::new();
    for (sname, pick, q) in stats {
        let means: Vec<f64> = runs.iter().map(|r| mean(&r.series(pick))).collect();
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                pairwise = pairwise.max(rel(means[i], means[j]));
            }
        }
        for (r, m) in runs.iter().zip(&means) {
            let s = r.series(pick);
            let tau = iact(&s).map(|t| t.tau).unwrap_or(f64::INFINITY);
            let se = sd(&s) * (tau / s.len() as f64).sqrt();
            let z = (m - q).abs() / se;
            if z > worst_z {
                notes.push(format!("{}:{sname} z={z:.2}", r.name));
            }
            worst_z = worst_z.max(z);
        }
    }
    outcome(
        pairwise <= 0.05 && worst_z <= 3.0,
        format!(
            "max pairwise relative gap {:.2}%, max |mean - quadrature| / MC SE = {worst_z:.2} ({})",
            100.0 * pairwise,
            notes.last().cloned().unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Outcome {
    let out = small(8, None, 100.0, 51);
    let problem = out.problem().unwrap();
    let post = PeriodicPosterior::from_problem(&problem, GammaPrior::default()).unwrap();
    let mode = marginal_mode(&post, MarginalEval::Direct).unwrap();
    let tuning = tune_proposals(&post, mode, 2000, 5, 1e-8).unwrap();
    let steps = 1000;
    let ob = run_chain(
        &post,
        &ChainConfig::new(SamplerKind::OneBlock { widths: tuning.option1 }, steps, 77),
        mode,
    )
    .unwrap();
    let m1 = run_chain(
        &post,
        &ChainConfig::new(SamplerKind::MtcOption1 { widths: tuning.option1 }, steps, 77),
        mode,
    )
    .unwrap();
    let same = ob.accepted == m1.accepted;
    let worst = ob
        .log_density
        .iter()
        .zip(&m1.log_density)
        .map(|(a, b)| ((a - ob.log_density[0]) - (b - m1.log_density[0])).abs())
        .fold(0.0, f64::max);
    outcome(
        same && worst <= 1e-8,
        format!(
            "accept sequences identical: {same} ({} accepted of {steps}); max log-ratio gap {worst:.2e}",
            m1.accept_count
        ),
    )
}

fn criterion_6() -> Outcome {
    // Taylor coefficients against finite differences of the dense pencil
    let problem = small(6, Some(2), 200.0, 61).problem().unwrap();
    let (a, l, y) = dense(&problem);
    let pencil = Pencil::from_model(&a, &l, &y).unwrap();
    let lambda0 = 0.03;
    let solver = SystemSolver::new(&problem, lambda0, IterativeSolverConfig::default().with_rel_tol(1e-13));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = taylor_f(&solver, 4).unwrap();
    let g = taylor_g(&solver, 4, TraceMethod::Exact, &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        let h = 0.02 * lambda0;
        worst = worst
            .max(rel(f.coefficients[k - 1], taylor_fd(|x| pencil.f(x), lambda0, h, k)))
            .max(rel(g.coefficients[k - 1], taylor_fd(|x| pencil.g(x), lambda0, h, k)));
    }

    // Hutchinson on a 20x20 pair
    let n = 20;
    let lm = laplacian_dirichlet(4, 5);
    let r = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = &r * r.transpose() / n as f64 + Matrix::identity(n, n);
    let exact = trace_powers(&b, &lm, 4).unwrap();
    let runs = 10_000;
    let mut samples = vec![Vec::new(); 4];
    let mut solve = |v: &[f64]| {
        Ok(solve_spd(&b, &Vector::from_column_slice(v))
            .unwrap()
            .as_slice()
            .to_vec())
    };
    let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice((&lm * Vector::from_column_slice(v)).as_slice());
    for _ in 0..runs {
        let est = hutchinson_traces(&mut solve, &apply, n, 4, 1, &mut rng).unwrap();
        for (s, v) in samples.iter_mut().zip(est.values) {
            s.push(v);
        }
    }
    let worst_z = samples
        .iter()
        .zip(&exact)
        .map(|(s, e)| (mean(s) - e).abs() / (sd(s) / (runs as f64).sqrt()))
        .fold(0.0, f64::max);

    // solve accounting
    let counter = SystemSolver::new(&problem, lambda0, IterativeSolverConfig::default());
    taylor_f(&counter, 4).unwrap();
    let f_solves = counter.solve_count();
    let counter = SystemSolver::new(&problem, lambda0, IterativeSolverConfig::default());
    taylor_g(&counter, 4, TraceMethod::Hutchinson { probes: 4 }, &mut rng).unwrap();
    let g_solves = counter.solve_count();

    outcome(
        worst <= 1e-4 && worst_z <= 3.0 && f_solves == 3 && g_solves == 16,
        format!(
            "max coefficient rel. error {worst:.2e}; Hutchinson max |bias|/SE {worst_z:.2}; solves f {f_solves}, g {g_solves}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let problem = small(8, Some(2), 200.0, 71).problem().unwrap();
    let prior = GammaPrior::default();
    let (a, l, y) = dense(&problem);
    let pencil = Pencil::from_model(&a, &l, &y).unwrap();
    let (m, n) = (y.len(), l.nrows());
    // log pi(gamma, lambda | y), gamma maximized numerically
    let profile = |lambda: f64| {
        let at = |lg: f64| {
            let g = lg.exp();
            let d = g * lambda;
            pencil.log_marginal(m, g, d, n as f64 / 2.0, prior.log_density(Hyper { gamma: g, delta: d })) + lg
        };
        let (mut lo, mut hi) = (-10.0f64, 15.0f64);
        for _ in 0..200 {
            let (c, d) = (lo + 0.382 * (hi - lo), lo + 0.618 * (hi - lo));
            if at(c) > at(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        at(0.5 * (lo + hi))
    };
    let grid = deblur_oracle::log_spaced(1e-5, 10.0, 1000);
    let values: Vec<f64> = grid.iter().map(|&x| profile(x)).collect();
    let best = (0..grid.len())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap();
    let target = grid[best];
    let cell = grid[1] / grid[0];

    let cfg = ModeConfig {
        expansion: ExpansionConfig {
            trace: TraceMethod::Exact,
            solver: IterativeSolverConfig::default().with_rel_tol(1e-10),
            ..Default::default()
        },
        stop_tol: 1e-4,
        ..Default::default()
    };
    let mut ok = best > 0 && best + 1 < grid.len();
    let mut found = Vec::new();
    for start in [target * 20.0, target / 20.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        match find_mode(&problem, &prior, start, &cfg, &mut rng) {
            Ok(res) => {
                let off = (res.lambda / target).ln().abs() / cell.ln();
                ok &= off <= 1.0;
                found.push(format!(
                    "{:.4e} from {start:.2e} ({off:.2} cells, {} steps)",
                    res.lambda,
                    res.iterates.len() - 1
                ));
            }
            Err(e) => {
                ok = false;
                found.push(format!("failed from {start:.2e}: {e}"));
            }
        }
    }
    outcome(ok, format!("grid argmax {target:.4e}; found {}", found.join(", ")))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let rho = 0.5;
    let mut x = 0.0;
    let ar: Vec<f64> = (0..n)
        .map(|_| {
            x = rho * x + (1.0f64 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect();
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let (ta, tw): (Iact, Iact) = (iact(&ar).unwrap(), iact(&white).unwrap());
    outcome(
        rel(ta.tau, 3.0) <= 0.1 && (tw.tau - 1.0).abs() <= 0.1,
        format!(
            "AR(1) tau = {:.3} (W = {}), white noise tau = {:.3}",
            ta.tau, ta.window, tw.tau
        ),
    )
}

struct Efficiency {
    name: &'static str,
    tau_lambda: f64,
    tau_delta: f64,
    cces: f64,
}

fn efficiency(runs: &[Run]) -> Vec<Efficiency> {
    runs.iter()
        .map(|r| {
            let (sl, sd_) = (r.series(lam), r.series(del));
            let tau_lambda = iact(&sl).unwrap().tau;
            let per_step = r.chain.wall_time / r.chain.transitions as f64;
            Efficiency {
                name: r.name,
                tau_lambda,
                tau_delta: iact(&sd_).unwrap().tau,
                cces: tau_lambda * per_step,
            }
        })
        .collect()
}

struct Large {
    problem: DeblurProblem,
    efficiency: Vec<Efficiency>,
}

fn large_problem() -> Large {
    let out = generate(&SynthSpec::periodic(64, Some(100.0), 91)).unwrap();
    let problem = out.problem().unwrap();
    let post = PeriodicPosterior::from_problem(&problem, GammaPrior::default()).unwrap();
    let runs = run_all(&post, 40_000, 92);
    Large {
        efficiency: efficiency(&runs),
        problem,
    }
}

fn criterion_9(large: &Large) -> Outcome {
    let e = &large.efficiency;
    let by = |n: &str| e.iter().find(|x| x.name == n).unwrap();
    let (gb, ob, m1, m2) = (by("gibbs"), by("oneblock"), by("mtc1"), by("mtc2"));
    let order = m2.cces < m1.cces && m1.cces < ob.cces && ob.cces < gb.cces;
    let ratio = gb.tau_delta / m2.tau_delta;
    let table: Vec<String> = e
        .iter()
        .map(|x| {
            format!(
                "{} tau_l={:.1} tau_d={:.1} cces={:.2e}s",
                x.name, x.tau_lambda, x.tau_delta, x.cces
            )
        })
        .collect();
    outcome(
        order && ratio >= 2.0,
        format!("{}; tau_d gibbs/mtc2 = {ratio:.1}", table.join("; ")),
    )
}

fn criterion_10(large: &Large) -> Outcome {
    let problem = &large.problem;
    let prior = GammaPrior::default();
    let t = Instant::now();
    let post = PeriodicPosterior::from_problem(problem, prior).unwrap();
    let setup = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let mode = marginal_mode(&post, MarginalEval::Direct).unwrap();
    let tuning = tune_proposals(&post, mode, 2000, 3, 1e-6).unwrap();
    let search = t.elapsed().as_secs_f64();
    let _ = tuning;
    let mtc2 = large.efficiency.iter().find(|x| x.name == "mtc2").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t = Instant::now();
    let x = post.to_image(&post.draw_conditional_hat(mode, &mut rng));
    let rto = t.elapsed().as_secs_f64();
    std::hint::black_box(x);
    let mtc_cost = setup + mtc2.cces + rto;

    let cfg = IterativeSolverConfig::default();
    let t = Instant::now();
    let curve = build_lcurve(problem, &default_lambda_grid(problem, 200), &cfg).unwrap();
    let xr = solve_gendeconv(problem, curve.corner_lambda(), &cfg).unwrap();
    let reg_cost = t.elapsed().as_secs_f64();
    std::hint::black_box(xr);
    outcome(
        mtc_cost < reg_cost,
        format!(
            "MTC2 {:.3}ms (setup {:.3}, tau T/N {:.4}, RTO {:.3}) vs L-curve {:.3}ms: ratio {:.2}; with mode search and tuning ({:.1}ms) ratio {:.2}",
            1e3 * mtc_cost,
            1e3 * setup,
            1e3 * mtc2.cces,
            1e3 * rto,
            1e3 * reg_cost,
            reg_cost / mtc_cost,
            1e3 * search,
            reg_cost / (mtc_cost + search)
        ),
    )
}

fn criterion_11() -> Outcome {
    let problem = small(8, Some(2), 200.0, 111).problem().unwrap();
    let prior = GammaPrior::default();
    let config = ExpansionConfig {
        trace: TraceMethod::Exact,
        solver: IterativeSolverConfig::default().with_rel_tol(1e-10),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mode = find_mode(
        &problem,
        &prior,
        0.01,
        &ModeConfig {
            expansion: config,
            ..Default::default()
        },
        &mut rng,
    )
    .unwrap();
    // 64 observations leave lambda spread over about two decades, far more
    // than four trust regions cover
    let config = ExpansionConfig {
        max_centers: 32,
        ..config
    };
    let mut set = ExpansionSet::new(&problem, prior, config, mode.lambda, 11).unwrap();
    let init = Hyper::new(mode.gamma, mode.gamma * mode.lambda).unwrap();
    let chain = run_mwg_chain(&mut set, init, 20_000, 0.3 * mode.lambda, 12).unwrap();
    let lambdas: Vec<f64> = chain.after_burn_in(20).iter().map(|h| h.lambda()).collect();
    let hist = histogram(&lambdas, 30).unwrap();
    let solver = config.solver;
    let by_hist = posterior_mean(&problem, &hist.centers(), &hist.weights, &solver).unwrap();

    let tau = iact(&lambdas).unwrap().tau;
    let stride = (tau.ceil() as usize).max(1);
    let means: Vec<Vec<f64>> = lambdas
        .iter()
        .step_by(stride)
        .map(|&l| {
            conditional_mean(&problem, Hyper::new(1.0, l).unwrap(), &solver)
                .unwrap()
                .values()
                .to_vec()
        })
        .collect();
    let k = means.len() as f64;
    let mut worst_z: f64 = 0.0;
    for (i, v) in by_hist.values().iter().enumerate() {
        let col: Vec<f64> = means.iter().map(|m| m[i]).collect();
        let se = sd(&col) / k.sqrt();
        worst_z = worst_z.max((v - mean(&col)).abs() / se);
    }
    outcome(
        worst_z <= 3.0,
        format!(
            "max |histogram mean - MC mean| / MC SE = {worst_z:.2} over {} pixels ({} conditional means, tau {tau:.1}, acceptance {:.2}, {} centers)",
            by_hist.values().len(),
            means.len(),
            chain.acceptance_rate(),
            set.centers().len()
        ),
    )
}

type Stat = (&'static str, fn(&Hyper) -> f64, f64);

fn main() {
    let t = Instant::now();
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut run = |id: u8, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let mut res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        res.detail = format!("{} [{:.1}s]", res.detail, t.elapsed().as_secs_f64());
        println!(
            "criterion {id:>2} {}: {} | {}",
            if res.pass { "PASS" } else { "FAIL" },
            name,
            res.detail
        );
        results.push((id, name, res));
    };
    run(1, "conditional sampler exactness", &criterion_1);
    run(2, "marginal density differences", &criterion_2);
    run(3, "series expansions of f and g", &criterion_3);
    run(4, "cross-algorithm stationarity", &criterion_4);
    run(5, "one-block and MTC Option 1 equivalence", &criterion_5);
    run(6, "Taylor, trace and solve accounting", &criterion_6);
    run(7, "mode finder", &criterion_7);
    run(8, "IACT diagnostics", &criterion_8);
    let large = catch_unwind(large_problem).ok();
    match &large {
        Some(l) => {
            run(9, "efficiency ordering", &|| criterion_9(l));
            run(10, "cost against the L-curve", &|| criterion_10(l));
        }
        None => {
            run(9, "efficiency ordering", &|| outcome(false, "64x64 runs failed".into()));
            run(10, "cost against the L-curve", &|| {
                outcome(false, "64x64 runs failed".into())
            });
        }
    }
    run(11, "posterior mean by histogram integration", &criterion_11);
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
