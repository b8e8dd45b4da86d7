//! One runner per CLI subcommand. Each returns a [`Bundle`] whose report
//! lists the checks that decide the exit status.

use std::fmt::Write as _;

use cfs_core::linalg::{self, CVec};
use cfs_core::{
    causal_action, chain_spectrum, classify_spectrum, constraint_report, effective_action, el_values, fit_lagrange_parameters,
    lagrangian_matrix, minimize_action, random_system, DiscreteSystem, RandomSystemSpec, Tolerances,
};
use cfs_spin::{FermionicKernel, SpinFrame};
use cfs_variations::{
    decoupling_report, q_kernel, q_route_agreement, second_variation_action, QKernel, QMode, VariationDirection,
};
use cfs_wave::{
    assemble_strip_operator, build_extended_space, chain_system, commutator_inner, commutator_scale, conservation_series,
    coupling_iteration, default_lambda, embed_hilbert_vectors, homogeneous_from_boundary, kernel_hygiene, lambda_sweep,
    mean_ratio, trace_identity_check, ChainSpec, CouplingMap, CouplingOptions, Cutoffs, ExtendOptions, StripOperator, TimeStrip,
    WaveError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, GeneratorSpec};
use crate::demo::demo_system;
use crate::error::{LabError, Result};
use crate::report::{Bundle, Check, Plot, Relation, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Action,
    Classify,
    Minimize,
    SecondVariation,
    Decoupling,
    SolveStrip,
    Commutator,
    Extend,
    Couple,
    AppendixA,
    DiracDemo,
    KernelAsymptotics,
    VerifyAll,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::Action,
        Experiment::Classify,
        Experiment::Minimize,
        Experiment::SecondVariation,
        Experiment::Decoupling,
        Experiment::SolveStrip,
        Experiment::Commutator,
        Experiment::Extend,
        Experiment::Couple,
        Experiment::AppendixA,
        Experiment::DiracDemo,
        Experiment::KernelAsymptotics,
        Experiment::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Action => "action",
            Experiment::Classify => "classify",
            Experiment::Minimize => "minimize",
            Experiment::SecondVariation => "second-variation",
            Experiment::Decoupling => "decoupling",
            Experiment::SolveStrip => "solve-strip",
            Experiment::Commutator => "commutator",
            Experiment::Extend => "extend",
            Experiment::Couple => "couple",
            Experiment::AppendixA => "appendix-a",
            Experiment::DiracDemo => "dirac-demo",
            Experiment::KernelAsymptotics => "kernel-asymptotics",
            Experiment::VerifyAll => "verify-all",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

/// A validated configuration with its resolved tolerances and hash.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub tol: Tolerances,
    pub hash: String,
}

/// A system with its spin frame, fermionic kernel and `Q` kernel.
#[derive(Debug, Clone)]
pub struct Physics {
    pub system: DiscreteSystem,
    pub frame: SpinFrame,
    pub kernel: FermionicKernel,
    pub q: QKernel,
}

impl Physics {
    pub fn new(system: DiscreteSystem, tol: &Tolerances) -> Self {
        let frame = SpinFrame::new(&system, tol.sigma_rel);
        let kernel = FermionicKernel::new(&frame);
        let q = q_kernel(&system, &frame, &kernel, tol, QMode::Auto);
        Physics { system, frame, kernel, q }
    }

    pub fn with_lagrange_parameters(self, r: f64, s: f64, tol: &Tolerances) -> Self {
        Physics::new(self.system.with_lagrange_parameters(r, s), tol)
    }
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let tol = config.resolved_tolerances()?;
        let hash = config.hash();
        Ok(Context { config, tol, hash })
    }

    pub fn report(&self, experiment: &str, checks: Vec<Check>, data: serde_json::Value) -> Report {
        Report {
            experiment: experiment.into(),
            seed: self.config.seed,
            config_hash: self.hash.clone(),
            tolerances: self.tol,
            passed: checks.iter().all(|c| c.passed),
            checks,
            data,
        }
    }

    /// Independent random stream per purpose.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream)
    }

    /// The system named by the configuration: file, then generator, then the demo.
    pub fn system(&self) -> Result<(DiscreteSystem, String)> {
        if let Some(path) = &self.config.system {
            let system = DiscreteSystem::load(path).map_err(|e| match e {
                cfs_core::CoreError::Io(source) => LabError::Io { path: path.display().to_string(), source },
                other => LabError::Config(format!("system file {}: {other}", path.display())),
            })?;
            return Ok((system, format!("file {}", path.display())));
        }
        if let Some(g) = &self.config.generator {
            return Ok((generated(g, self.config.seed)?, format!("random N={} f={} n={} κ={}", g.points, g.f, g.n, g.kappa)));
        }
        Ok((demo_system(), "bundled two-point demo".into()))
    }

    /// System, strip and kernel for the strip experiments. A system file gets
    /// its `Q` kernel windowed to the strip range `δ`; otherwise a
    /// finite-range chain is built.
    pub fn strip_physics(&self) -> Result<(Physics, TimeStrip, String)> {
        let strip = self.config.strip;
        if self.config.system.is_some() {
            let (system, source) = self.system()?;
            let mut physics = Physics::new(system, &self.tol);
            physics.q = physics.q.windowed(physics.system.times(), strip.delta);
            return Ok((physics, strip, format!("{source}, Q windowed to δ = {}", strip.delta)));
        }
        let c = self.config.chain;
        let spec = ChainSpec::new(c.slots, c.points_per_slot, self.config.seed).with_block_dim(c.block_dim);
        let system = chain_system(&spec)?;
        Ok((Physics::new(system, &self.tol), strip, format!("chain {} slots × {} points", c.slots, c.points_per_slot)))
    }
}

pub fn generated(g: &GeneratorSpec, seed: u64) -> Result<DiscreteSystem> {
    Ok(random_system(&RandomSystemSpec::new(g.points, g.f, g.n, g.kappa, seed))?)
}

pub fn random_direction(physics: &Physics, rng: &mut ChaCha8Rng) -> VariationDirection {
    let f = physics.system.f();
    VariationDirection::General(
        (0..physics.system.len()).map(|i| linalg::random_complex_matrix(rng, physics.frame.dim(i), f)).collect(),
    )
}

fn random_on(op: &StripOperator, rng: &mut ChaCha8Rng, keep: impl Fn(f64) -> bool) -> CVec {
    op.space.mask(&linalg::random_complex_vector(rng, op.dim()), keep)
}

pub fn run(experiment: Experiment, ctx: &Context) -> Result<Bundle> {
    match experiment {
        Experiment::Action => action(ctx),
        Experiment::Classify => classify(ctx),
        Experiment::Minimize => minimize(ctx),
        Experiment::SecondVariation => second_variation(ctx),
        Experiment::Decoupling => decoupling(ctx),
        Experiment::SolveStrip => solve_strip(ctx),
        Experiment::Commutator => commutator(ctx),
        Experiment::Extend => extend(ctx),
        Experiment::Couple => couple(ctx),
        Experiment::AppendixA => trace_identity(ctx),
        Experiment::DiracDemo => dirac_demo(ctx),
        Experiment::KernelAsymptotics => kernel_asymptotics(ctx),
        Experiment::VerifyAll => verify_all(ctx),
    }
}

fn action(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let lag = lagrangian_matrix(&system)?;
    let s = causal_action(&system)?;
    let cons = constraint_report(&system);
    let (r, sv) = fit_lagrange_parameters(&system)?;
    let fitted = system.clone().with_lagrange_parameters(r, sv);
    let ell = el_values(&fitted)?;
    let asym = (0..lag.nrows())
        .flat_map(|i| (0..lag.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| (lag[(i, j)] - lag[(j, i)]).abs())
        .fold(0.0, f64::max);
    let min_l = lag.iter().copied().fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::at_most("volume constraint |Σρ − 1|", (cons.volume - 1.0).abs(), 1e-12),
        Check::at_least("Lagrangian nonnegative", min_l, 0.0),
        Check::at_most("Lagrangian symmetric", asym, 0.0),
    ];
    let mut csv = String::from("i,j,lagrangian\n");
    for i in 0..lag.nrows() {
        for j in 0..lag.ncols() {
            let _ = writeln!(csv, "{i},{j},{:e}", lag[(i, j)]);
        }
    }
    let data = json!({
        "source": source,
        "points": system.len(),
        "action": s,
        "effective_action": effective_action(&system)?,
        "volume": cons.volume,
        "trace": cons.trace,
        "fitted_r": r,
        "fitted_s": sv,
        "el_values": ell,
    });
    Ok(Bundle::new(ctx.report("action", checks, data))
        .table("lagrangian", csv)
        .plot(Plot::new("el-values", ell.iter().enumerate().map(|(i, &v)| (i as f64, v)))))
}

fn classify(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let (n, tol) = (system.n(), &ctx.tol);
    let mut rows = Vec::new();
    let mut csv = String::from("i,j,class,max_modulus,eigenvalues\n");
    let mut asymmetric = 0usize;
    let mut mismatch: f64 = 0.0;
    for i in 0..system.len() {
        for j in i..system.len() {
            let xy = chain_spectrum(system.point(i), system.point(j), n, tol.sigma_rel)?;
            let yx = chain_spectrum(system.point(j), system.point(i), n, tol.sigma_rel)?;
            let class = classify_spectrum(&xy, tol.class_tol);
            if class != classify_spectrum(&yx, tol.class_tol) {
                asymmetric += 1;
            }
            let scale = xy.max_modulus().max(f64::MIN_POSITIVE);
            for z in &xy.values {
                let d = yx.values.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
                mismatch = mismatch.max(d / scale);
            }
            let values: Vec<[f64; 2]> = xy.values.iter().map(|z| [z.re, z.im]).collect();
            let listed: Vec<String> = xy.values.iter().map(|z| format!("{:e}{:+e}i", z.re, z.im)).collect();
            let _ = writeln!(csv, "{i},{j},{class},{:e},\"{}\"", xy.max_modulus(), listed.join(" "));
            rows.push(json!({"i": i, "j": j, "class": class, "eigenvalues": values}));
        }
    }
    let checks = vec![
        Check::at_most("class(x,y) = class(y,x)", asymmetric as f64, 0.0),
        Check::at_most("spectra of xy and yx agree", mismatch, 1e-9),
    ];
    let data = json!({"source": source, "pairs": rows});
    Ok(Bundle::new(ctx.report("classify", checks, data)).table("classes", csv))
}

fn minimize(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let mut options = ctx.config.minimize;
    options.gtol = ctx.tol.gtol;
    let report = minimize_action(&system, &options)?;
    let result = report.system();
    let first = report.action_history.first().copied().unwrap_or(report.initial_action);
    let rise = report.action_history.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_most("projected gradient norm", report.gradient_norm, ctx.tol.gtol),
        Check::at_most("action non-increasing", rise, 1e-12 * first.abs().max(1.0)),
        Check::at_most("volume constraint |Σρ − 1|", (constraint_report(result).volume - 1.0).abs(), 1e-12),
    ];
    if !report.is_clipped() {
        checks.push(Check::at_most("EL residual max|ℓ(x)|", report.el_residual, ctx.tol.el_tol));
    }
    let mut csv = String::from("iteration,action\n");
    for (k, a) in report.action_history.iter().enumerate() {
        let _ = writeln!(csv, "{k},{a:e}");
    }
    let data = json!({"source": source, "clipped": report.is_clipped(), "minimizer": report});
    Ok(Bundle::new(ctx.report("minimize", checks, data))
        .table("action-history", csv)
        .plot(Plot::new("action-history", report.action_history.iter().enumerate().map(|(k, &a)| (k as f64, a))))
        .file("minimized-system.json", result.to_json() + "\n"))
}

fn second_variation(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let p = Physics::new(system, &ctx.tol);
    let mut rng = ctx.rng(1);
    let agreement = q_route_agreement(&p.system, &p.frame, &p.kernel, &ctx.tol);
    let mut checks = vec![
        Check::at_most("Q routes agree", agreement, ctx.tol.q_agree),
        Check::at_most("Q symmetric", p.q.symmetry_residual(&p.frame), 1e-8),
    ];
    let mut summary = String::from("direction,lfe,q_term,remainder,unresolved,total,fd_total,relative_error\n");
    let mut reports = Vec::new();
    let mut pairs_csv = String::new();
    for k in 0..ctx.config.directions {
        let dir = random_direction(&p, &mut rng);
        let r = second_variation_action(&p.system, &p.frame, &p.kernel, &p.q, &dir, &ctx.tol)?;
        checks.push(Check::at_most(format!("direction {k}: decomposition vs oracle"), r.relative_error, ctx.tol.fd2_tol));
        checks.push(Check::at_least(format!("direction {k}: lfe ≥ −1e-14·scale"), r.lfe_term, -1e-14 * r.scale));
        let _ = writeln!(
            summary,
            "{k},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.lfe_term, r.q_term, r.remainder, r.unresolved, r.total, r.fd_total, r.relative_error
        );
        if k == 0 {
            pairs_csv = r.to_csv();
        }
        reports.push(r);
    }
    let plot = Plot::new("relative-error", reports.iter().enumerate().map(|(k, r)| (k as f64, r.relative_error)));
    let data = json!({"source": source, "q_route_agreement": agreement, "directions": reports});
    Ok(Bundle::new(ctx.report("second-variation", checks, data))
        .table("second-variation", summary)
        .table("pairs", pairs_csv)
        .plot(plot))
}

fn decoupling(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let p = Physics::new(system, &ctx.tol);
    let dir = random_direction(&p, &mut ctx.rng(2));
    let times = p.system.times();
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let strips = [(lo - 1.0, hi + 1.0), (lo - 1.0, mid), (mid, hi + 1.0)];
    let slices = TimeStrip::times_between(times, lo - 1.0, hi + 1.0);
    let rep = decoupling_report(&p.system, &p.frame, &p.kernel, &p.q, &dir, &strips, &slices, &ctx.tol)?;
    let global = second_variation_action(&p.system, &p.frame, &p.kernel, &p.q, &dir, &ctx.tol)?;
    let all = rep.strips[0];
    let scale = global.scale.max(f64::MIN_POSITIVE);
    let checks = vec![
        Check::at_most("whole-strip lfe = |global lfe|", (all.lfe - global.lfe_term.abs()).abs() / scale, 1e-12),
        Check::at_most(
            "whole-strip remainder = |global remainder|",
            (all.remainder - global.remainder.abs()).abs() / scale,
            1e-12,
        ),
        Check::at_most("4 × whole-strip q = |global q term|", (4.0 * all.q - global.q_term.abs()).abs() / scale, 1e-10),
    ];
    let plot = Plot::new("slice-q", rep.slices.iter().map(|r| (r.t_lo, r.q)));
    let data = json!({"source": source, "report": rep, "global": global});
    Ok(Bundle::new(ctx.report("decoupling", checks, data)).table("decoupling", rep.to_csv()).plot(plot))
}

fn solve_strip(ctx: &Context) -> Result<Bundle> {
    let (p, strip, source) = ctx.strip_physics()?;
    let hygiene = kernel_hygiene(&p.system, &p.frame, &p.q, strip.delta, f64::INFINITY, 0.0);
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, &ctx.tol)?;
    let mut rng = ctx.rng(3);
    let chi = linalg::random_complex_vector(&mut rng, op.dim());
    let image = op.apply(&chi);
    let solved = op.solve(&image, ctx.tol.adm_tol)?;
    let phi1 = random_on(&op, &mut rng, |t| strip.in_future(t));
    let phi0 = random_on(&op, &mut rng, |t| strip.in_past(t));
    let boundary = homogeneous_from_boundary(&op, &strip, &phi1, &phi0, 1.0, &ctx.tol)?;
    let checks = vec![
        Check::at_most("kernel range violations", hygiene.range_violations.len() as f64, 0.0),
        Check::at_most("strip operator symmetric", op.symmetry_residual, 1e-10),
        Check::at_most("‖𝒬‖ / Schwarz bound", op.norm / op.norm_bound.max(f64::MIN_POSITIVE), 1.0 + 1e-6),
        Check::at_most("solve residual on an image", solved.residual, ctx.tol.solve_tol),
        Check::at_most("boundary-driven solve residual", boundary.solve_residual, ctx.tol.solve_tol),
        Check::at_most("boundary-driven interior homogeneity", boundary.interior_residual, ctx.tol.hom_tol),
    ];
    let mut csv = String::from("index,eigenvalue\n");
    for (k, v) in op.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{k},{v:e}");
    }
    let psi = op.space.extend(&p.frame, &boundary.psi);
    let profile: Vec<(f64, f64)> = (0..p.system.len())
        .filter(|&i| strip.contains(p.system.times()[i]))
        .map(|i| (p.system.times()[i], p.frame.spin_scalar(i, &psi.components[i], &psi.components[i]).re.sqrt()))
        .collect();
    let data = json!({
        "source": source,
        "strip": strip,
        "dimension": op.dim(),
        "norm": op.norm,
        "norm_bound": op.norm_bound,
        "kernel_dim": op.kernel_dim(),
        "eigenvalues": op.eigenvalues,
        "hygiene": hygiene,
    });
    Ok(Bundle::new(ctx.report("solve-strip", checks, data))
        .table("strip-spectrum", csv)
        .plot(Plot::new("strip-spectrum", op.eigenvalues.iter().enumerate().map(|(k, &v)| (k as f64, v))))
        .plot(Plot::new("solution-profile", profile)))
}

fn commutator(ctx: &Context) -> Result<Bundle> {
    let (p, strip, source) = ctx.strip_physics()?;
    let tol = &ctx.tol;
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, tol)?;
    let mut rng = ctx.rng(4);
    let both = homogeneous_from_boundary(
        &op,
        &strip,
        &random_on(&op, &mut rng, |t| strip.in_future(t)),
        &random_on(&op, &mut rng, |t| strip.in_past(t)),
        1.0,
        tol,
    )?;
    let zero = CVec::zeros(op.dim());
    let future = homogeneous_from_boundary(&op, &strip, &random_on(&op, &mut rng, |t| strip.in_future(t)), &zero, 0.0, tol)?;
    let a = op.space.extend(&p.frame, &both.psi);
    let b = op.space.extend(&p.frame, &future.psi);
    let (lo, hi) = strip.interior();
    let grid: Vec<f64> = (0..=20).map(|k| lo + (hi - lo) * k as f64 / 20.0).filter(|&t| t > lo && t < hi).collect();
    let mut checks =
        vec![Check::at_most("interior homogeneity", both.interior_residual.max(future.interior_residual), tol.hom_tol)];
    let mut series = Vec::new();
    for (label, x, y) in [("⟨a|a⟩", &a, &a), ("⟨a|b⟩", &a, &b), ("⟨b|b⟩", &b, &b)] {
        let s = conservation_series(&p.system, &p.frame, &p.q, x, y, &grid);
        checks.push(Check::at_most(format!("{label} drift / scale"), s.relative_drift(), tol.cons_tol));
        series.push(s);
    }
    let scale = commutator_scale(&p.system, &p.frame, &p.q, &b, &b);
    let before: Vec<f64> = (0..12).map(|k| strip.t0 + (strip.t_max - strip.t0) * k as f64 / 12.0).collect();
    let vanishing = before.iter().map(|&t| commutator_inner(&p.system, &p.frame, &p.q, &b, &b, t).norm()).fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    checks.push(Check::at_most("future-driven ⟨b|b⟩^t / scale before t_max", vanishing, tol.cip_tol));

    let lambda = ctx.config.lambda.unwrap_or_else(|| default_lambda(&op, &strip, &future.psi));
    let sweep = lambda_sweep(
        &p.system,
        &p.frame,
        &p.q,
        &op,
        &strip,
        &future.psi,
        &[10.0 * lambda, lambda, 0.1 * lambda],
        0.5 * (lo + hi),
        tol,
    )?;
    checks.push(Check::at_least("past norm of ψ⁽⁰⁾", sweep.past_norm, f64::MIN_POSITIVE));
    checks.push(Check::at_most("λ-linear coefficient vs past norm", sweep.relative_error, tol.fd2_tol));
    let mut sweep_csv = String::from("lambda,re,im,remainder\n");
    for r in &sweep.rows {
        let _ = writeln!(sweep_csv, "{:e},{:e},{:e},{:e}", r.lambda, r.value.re, r.value.im, r.remainder);
    }
    let plot = Plot::new("conservation", series[0].times.iter().zip(&series[0].values).map(|(&t, v)| (t, v.re)));
    let data = json!({"source": source, "strip": strip, "series": series, "sweep": sweep, "lambda": lambda});
    Ok(Bundle::new(ctx.report("commutator", checks, data))
        .table("conservation", series[0].to_csv())
        .table("lambda-sweep", sweep_csv)
        .plot(plot))
}

fn extend(ctx: &Context) -> Result<Bundle> {
    let (p, strip, source) = ctx.strip_physics()?;
    let tol = &ctx.tol;
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, tol)?;
    let mut rng = ctx.rng(5);
    let hf: Vec<CVec> = (0..ctx.config.embed).map(|_| linalg::random_complex_vector(&mut rng, p.system.f())).collect();
    let [t, t_alt] = ctx.config.eval_times;
    let options = ExtendOptions { lambda: ctx.config.lambda.unwrap_or(1e-2), t, t_alt, cutoffs: None };
    let mut checks = Vec::new();
    let mut data = json!({"source": source, "strip": strip, "embedded": hf.len()});
    let mut tables = Vec::new();
    let mut plot = None;
    match build_extended_space(&p.system, &p.frame, &p.q, &op, &strip, &hf, &options, tol) {
        Ok(ext) => {
            let r = &ext.report;
            checks.push(Check::at_least("Gram eigenvalues / max (after kernel quotient)", r.min_ratio, -tol.psd_tol));
            checks.push(Check::at_most("Gram time invariance", r.time_invariance, tol.cons_tol));
            let mut csv = String::from("index,eigenvalue\n");
            for (k, v) in r.eigenvalues.iter().enumerate() {
                let _ = writeln!(csv, "{k},{v:e}");
            }
            tables.push(("gram-spectrum".to_string(), csv));
            plot = Some(Plot::new("gram-spectrum", r.eigenvalues.iter().enumerate().map(|(k, &v)| (k as f64, v))));
            data["extended"] = serde_json::to_value(r).expect("report serializes");
        }
        Err(WaveError::Indefinite(v)) => {
            let (_, rows) = embed_hilbert_vectors(&p.system, &p.frame, &p.q, &op, &strip, &hf, &Cutoffs::linear(&strip), tol)?;
            checks.push(Check::at_least("Gram eigenvalues / max (after kernel quotient)", v, -tol.psd_tol));
            data["embedding"] = serde_json::to_value(rows).expect("rows serialize");
        }
        Err(e) => return Err(e.into()),
    }
    if ctx.config.system.is_none() {
        let neutrality = kernel_neutrality(ctx)?;
        checks.push(Check::at_most("kernel vectors leave the Gram matrix unchanged", neutrality, 1e-10));
        data["kernel_neutrality"] = json!(neutrality);
    }
    let mut bundle = Bundle::new(ctx.report("extend", checks, data));
    for (name, csv) in tables {
        bundle = bundle.table(&name, csv);
    }
    if let Some(plot) = plot {
        bundle = bundle.plot(plot);
    }
    Ok(bundle)
}

/// Kernel neutrality on a chain with two-dimensional blocks whose multiplier
/// `𝔯` is moved onto an eigenvalue of the strip kernel, so that `𝒬` has a
/// one-dimensional kernel.
pub fn kernel_neutrality(ctx: &Context) -> Result<f64> {
    let c = ctx.config.chain;
    let strip = ctx.config.strip;
    let spec = ChainSpec::new(c.slots, c.points_per_slot, ctx.config.seed).with_block_dim(2);
    let p = Physics::new(chain_system(&spec)?, &ctx.tol);
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, &ctx.tol)?;
    let mut spectrum: Vec<f64> = op.multiplier_spectrum().iter().map(|z| z.re).collect();
    spectrum.sort_by(f64::total_cmp);
    let r = spectrum[spectrum.len() / 2];
    let s = p.system.s();
    let p = p.with_lagrange_parameters(r, s, &ctx.tol);
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, &ctx.tol)?;
    if op.kernel_dim() == 0 {
        return Err(LabError::Wave(WaveError::Dimension("shifted strip operator has no kernel".into())));
    }
    let [t, t_alt] = ctx.config.eval_times;
    let options = ExtendOptions { lambda: ctx.config.lambda.unwrap_or(1e-2), t, t_alt, cutoffs: None };
    let ext = build_extended_space(&p.system, &p.frame, &p.q, &op, &strip, &[], &options, &ctx.tol)?;
    Ok(ext.report.kernel_neutrality.unwrap_or(f64::NAN))
}

fn couple(ctx: &Context) -> Result<Bundle> {
    let settings = ctx.config.coupling;
    let [t0, t_min, t_max, t1, delta] = settings.strip;
    let strip = TimeStrip::new(t0, t_min, t_max, t1, delta)?;
    let p = Physics::new(chain_system(&ChainSpec::new(settings.slots, 1, ctx.config.seed))?, &ctx.tol);
    let op = assemble_strip_operator(&p.system, &p.frame, &p.q, &strip, &ctx.tol)?;
    let mut rng = ctx.rng(6);
    let u = linalg::random_complex_vector(&mut rng, p.system.f());
    let map = CouplingMap::new(&p.system, &p.frame, &p.kernel, &p.q, &op, &u, &ctx.tol);
    let phi = linalg::random_complex_vector(&mut rng, op.dim());
    let options = CouplingOptions { scale: settings.scale, max_iters: settings.max_iters };
    let (_, report) = coupling_iteration(&op, &map, &phi, &options, &ctx.tol);
    let mut checks = vec![Check::flag("iteration converged", report.converged)];
    if settings.scale > 0.0 && report.converged && report.ratios.len() > 1 {
        let ratio = mean_ratio(&report, 1);
        checks.push(Check::at_most("|mean ratio / scale − 1|", (ratio / settings.scale - 1.0).abs(), 0.5));
    }
    let mut csv = String::from("iteration,inhomogeneity_norm,ratio\n");
    for (k, n) in report.inhomogeneity_norms.iter().enumerate() {
        let ratio = if k == 0 { f64::NAN } else { report.ratios.get(k - 1).copied().unwrap_or(f64::NAN) };
        let _ = writeln!(csv, "{k},{n:e},{ratio:e}");
    }
    let plot = Plot::new("inhomogeneity", report.inhomogeneity_norms.iter().enumerate().map(|(k, &n)| (k as f64, n)));
    let data = json!({"strip": strip, "slots": settings.slots, "radius": map.radius, "report": report});
    Ok(Bundle::new(ctx.report("couple", checks, data)).table("coupling", csv).plot(plot))
}

fn trace_identity(ctx: &Context) -> Result<Bundle> {
    let (system, source) = ctx.system()?;
    let omega: Vec<usize> = (0..(system.len() / 2).max(1)).collect();
    let mut rng = ctx.rng(7);
    let mut reports = Vec::new();
    for _ in 0..ctx.config.cases {
        let u = linalg::random_complex_vector(&mut rng, system.f());
        reports.push(trace_identity_check(&system, &omega, &u, &ctx.tol)?);
    }
    let max_trace = reports.iter().map(|r| r.relative_trace).fold(0.0, f64::max);
    let max_err = reports.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let checks = vec![Check::at_most("tr C / ‖C‖", max_trace, 1e-10), Check::at_most("⟨u|Cu⟩ vs ⟨u|u⟩^Ω", max_err, 1e-4)];
    let mut csv = String::from("case,relative_trace,quadratic,commutator_norm,relative_error\n");
    for (k, r) in reports.iter().enumerate() {
        let _ = writeln!(csv, "{k},{:e},{:e},{:e},{:e}", r.relative_trace, r.quadratic, r.commutator_norm, r.relative_error);
    }
    let data = json!({"source": source, "omega": omega, "cases": reports});
    Ok(Bundle::new(ctx.report("appendix-a", checks, data)).table("appendix-a", csv))
}

fn dirac_demo(ctx: &Context) -> Result<Bundle> {
    let config = &ctx.config.dirac;
    let report = cfs_dirac::run_suite(config)?;
    let checks: Vec<Check> = report
        .checks
        .iter()
        .map(|c| Check {
            name: c.name.clone(),
            value: c.value,
            relation: if c.lower_bound { Relation::AtLeast } else { Relation::AtMost },
            limit: c.limit,
            passed: c.passed,
        })
        .collect();
    let mode = cfs_dirac::DiracMode::new(config.momenta[0], config.mass)?;
    let grid = cfs_dirac::TimeGrid::new(-5.0, 5.0, 0.02)?;
    let wave = cfs_dirac::plot_samples(&cfs_dirac::ModeSolution::basis(mode, 0), &grid);
    let mut bundle = Bundle::new(ctx.report("dirac-demo", checks, serde_json::to_value(&report).expect("report serializes")))
        .table("dirac-modes", report.to_csv())
        .plot(Plot::new("plane-wave-re", wave.iter().map(|(t, s)| (*t, s[0].re))));
    for m in &report.modes {
        bundle = bundle.plot(Plot::new(&format!("dirac-sequence-k{}", m.k), m.sequence.rows.iter().map(|r| (r.delta, r.ratio))));
    }
    Ok(bundle)
}

fn kernel_asymptotics(ctx: &Context) -> Result<Bundle> {
    let report = cfs_dirac::kernel_asymptotics(&ctx.config.kernel, ctx.tol.quad_tol, ctx.tol.lightcone_tol)?;
    let checks = vec![
        Check::near("|timelike |T_a| exponent + 3/4|", report.t_exponent, -0.75, 0.02),
        Check::at_most("superposition ratio plateau spread", report.plateau_spread, 0.1),
        Check::at_most("smooth control / plateau", report.control_fraction, 0.1),
        Check::near("|exponent(|Q|/|P|) − exponent(|P|) + 3/4|", report.exponent_difference, -0.75, 0.05),
    ];
    let rows = &report.rows;
    let bundle = Bundle::new(ctx.report("kernel-asymptotics", checks, serde_json::to_value(&report).expect("report serializes")))
        .table("kernel-asymptotics", report.to_csv())
        .plot(Plot::new("ratio-re", rows.iter().map(|r| (r.xi2, r.ratio.re))))
        .plot(Plot::new("t-abs", rows.iter().map(|r| (r.xi2, r.t_abs))))
        .plot(Plot::new("p-norm", rows.iter().map(|r| (r.xi2, r.p_norm))))
        .plot(Plot::new("q-norm", rows.iter().map(|r| (r.xi2, r.q_norm))));
    Ok(bundle)
}

/// Every other experiment on the configured system (the generator default
/// when neither a file nor a generator is given), with all checks merged.
fn verify_all(ctx: &Context) -> Result<Bundle> {
    let mut config = ctx.config.clone();
    if config.system.is_none() && config.generator.is_none() {
        config.generator = Some(GeneratorSpec::default());
    }
    let inner = Context { config, ..ctx.clone() };
    let mut children = Vec::new();
    for e in Experiment::ALL.into_iter().filter(|&e| e != Experiment::VerifyAll) {
        children.push(run(e, &inner)?);
    }
    let checks: Vec<Check> =
        children.iter().flat_map(|b| b.report.checks.iter().map(|c| c.clone().prefixed(&b.report.experiment))).collect();
    let summary: serde_json::Map<String, serde_json::Value> =
        children.iter().map(|b| (b.report.experiment.clone(), json!(b.passed()))).collect();
    let mut bundle = Bundle::new(ctx.report("verify-all", checks, json!({"experiments": summary})));
    bundle.children = children;
    Ok(bundle)
}
