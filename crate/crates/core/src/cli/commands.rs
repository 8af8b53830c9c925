use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{GlobalOpts, SpecFile, Verdict};
use crate::bounds::{
    additive_h_threshold, bound_table, combined_bound, crude_bound, linear_additive_bound_setup, loglog_slope, main_bound,
    write_bound_csv, AdditiveEnvelope, AdditiveNoiseConfig, BoundParams, MultiplicativeConfig, MultiplicativeEnvelope,
    TailEnvelope, UExponent,
};
use crate::error::{Error, Result};
use crate::mdp::{
    hurwitz_check, lyapunov_contraction_norm, make_offpolicy_td_sampler, make_q_sampler, make_td_sampler,
    offpolicy_system, projected_bellman_residual, q_bound_setup, td_bound_setup, LfaConfig, Policy, RlBoundSetup,
    TabularMdp,
};
use crate::montecarlo::{
    coverage_test, empirical_quantile, run_ensemble, tail_diagnostics, tightness_check, truncated_mgf_divergence,
    write_summary_csv, CoverageVerdict, EnsembleSetup, ErrorEnsemble, MgfSetup, TailVerdict,
};
use crate::norms::NormSpec;
use crate::operators::{
    make_linear_additive, make_multiplicative_gaussian, make_pair_gaussian_example, make_random_contractive,
    make_two_point_multiplicative, LinearAdditive, StochasticOperator,
};
use crate::sa::StepSchedule;

pub(super) struct Context<'a> {
    pub spec: &'a SpecFile,
    pub opts: &'a GlobalOpts,
}

fn spec_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Spec { line, msg: msg.into() }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

// ---------------------------------------------------------------------------
// building blocks

enum BuiltOp {
    Linear(LinearAdditive),
    Other(Box<dyn StochasticOperator>),
}

impl BuiltOp {
    fn as_dyn(&self) -> &dyn StochasticOperator {
        match self {
            BuiltOp::Linear(op) => op,
            BuiltOp::Other(op) => op.as_ref(),
        }
    }
}

const OPERATOR_KEYS: &[&str] = &["kind", "d", "sigma_bar", "matrix", "offset", "noise_cov", "gamma_c", "noise_scale", "seed", "a", "n"];

fn build_operator(spec: &SpecFile) -> Result<BuiltOp> {
    const S: &str = "operator";
    spec.require_section(S)?;
    spec.check_keys(S, OPERATOR_KEYS)?;
    let kind = spec.str_req(S, "kind")?;
    let at = spec.at(S, "kind");
    Ok(match kind {
        "pair_gaussian" => BuiltOp::Other(Box::new(
            make_pair_gaussian_example(spec.parse_req(S, "d")?, spec.parse_req(S, "sigma_bar")?).map_err(spec.at(S, "d"))?,
        )),
        "linear_additive" => {
            let a = spec.matrix_opt(S, "matrix")?.ok_or_else(|| spec_err(spec.section_line(S), "[operator] needs `matrix`"))?;
            let d = a.nrows();
            let b = spec.list_opt(S, "offset")?.unwrap_or_else(|| vec![0.0; d]);
            let cov = spec.matrix_opt(S, "noise_cov")?.unwrap_or_else(|| DMatrix::identity(d, d));
            BuiltOp::Linear(make_linear_additive(a, b, cov).map_err(spec.at(S, "matrix"))?)
        }
        "random_contractive" => BuiltOp::Linear(
            make_random_contractive(
                spec.parse_req(S, "d")?,
                spec.parse_req(S, "gamma_c")?,
                spec.parse_opt(S, "noise_scale")?.unwrap_or(1.0),
                spec.parse_opt(S, "seed")?.unwrap_or(0),
            )
            .map_err(spec.at(S, "gamma_c"))?,
        ),
        "multiplicative_gaussian" => BuiltOp::Other(Box::new(make_multiplicative_gaussian())),
        "two_point_multiplicative" => BuiltOp::Other(Box::new(
            make_two_point_multiplicative(spec.parse_req(S, "a")?, spec.parse_req(S, "n")?).map_err(spec.at(S, "a"))?,
        )),
        other => return Err(at(Error::invalid(format!("unknown operator kind `{other}`")))),
    })
}

/// `h = auto` resolves to `max(threshold, 2)`.
fn build_schedule(spec: &SpecFile, auto_threshold: Option<&dyn Fn(f64, f64) -> f64>) -> Result<StepSchedule> {
    const S: &str = "schedule";
    spec.require_section(S)?;
    spec.check_keys(S, &["alpha", "h", "xi", "acknowledge_warning"])?;
    let alpha: f64 = spec.parse_req(S, "alpha")?;
    let xi: f64 = spec.parse_opt(S, "xi")?.unwrap_or(0.0);
    let h = match spec.str_req(S, "h")? {
        "auto" => {
            let thr = auto_threshold
                .ok_or_else(|| spec_err(spec.line_of(S, "h"), "`h = auto` needs a known contraction factor"))?;
            thr(alpha, xi).max(2.0)
        }
        _ => spec.parse_req(S, "h")?,
    };
    StepSchedule::new(alpha, h, xi).map_err(spec.at(S, "alpha"))
}

fn thr_fn(gamma_tilde: f64) -> impl Fn(f64, f64) -> f64 {
    move |alpha, xi| additive_h_threshold(gamma_tilde, alpha, xi)
}

fn build_schedule_for(spec: &SpecFile, gamma_tilde: Option<f64>) -> Result<StepSchedule> {
    match gamma_tilde {
        Some(g) => build_schedule(spec, Some(&thr_fn(g))),
        None => build_schedule(spec, None),
    }
}

/// Refuses schedules that miss the offset condition unless acknowledged.
fn gate_schedule(spec: &SpecFile, ok: bool, what: String) -> Result<()> {
    if ok {
        return Ok(());
    }
    if spec.bool_opt("schedule", "acknowledge_warning")? {
        eprintln!("warning: {what}");
        Ok(())
    } else {
        Err(spec_err(spec.line_of("schedule", "h"), format!("{what}; set `acknowledge_warning = true` to run anyway")))
    }
}

fn additive_gate(spec: &SpecFile, sched: &StepSchedule, gamma_tilde: f64) -> Result<()> {
    let thr = additive_h_threshold(gamma_tilde, sched.alpha(), sched.xi());
    gate_schedule(
        spec,
        sched.h() >= thr,
        format!("h = {} is below (2ξ/((1-γ̃)α))^(1/(1-ξ)) = {thr}", sched.h()),
    )
}

fn parse_norm(spec: &SpecFile, section: &str, d: usize, default: NormSpec) -> Result<NormSpec> {
    let Some(v) = spec.str_opt(section, "norm") else { return Ok(default) };
    let line = spec.line_of(section, "norm");
    let toks: Vec<&str> = v.split_whitespace().collect();
    match toks.as_slice() {
        ["euclidean"] => Ok(NormSpec::Euclidean),
        ["max"] => Ok(NormSpec::Max),
        ["p", p] => {
            let p: f64 = p.parse().map_err(|_| spec_err(line, format!("cannot parse p in `{v}`")))?;
            NormSpec::unweighted_p(p, d).map_err(|e| spec_err(line, e.to_string()))
        }
        _ => Err(spec_err(line, format!("norm must be `euclidean`, `max` or `p <value>`, got `{v}`"))),
    }
}

struct RunConfig {
    setup: EnsembleSetup,
    reps: usize,
    seed: u64,
}

fn build_run(ctx: &Context, d: usize, schedule: StepSchedule, default_norm: NormSpec) -> Result<RunConfig> {
    const S: &str = "run";
    let spec = ctx.spec;
    spec.require_section(S)?;
    spec.check_keys(S, &["x0", "checkpoints", "norm", "reps", "seed"])?;
    let x0 = spec.list_opt(S, "x0")?.unwrap_or_else(|| vec![0.0; d]);
    if x0.len() != d {
        return Err(spec_err(spec.line_of(S, "x0"), format!("x0 has {} entries, operator dimension is {d}", x0.len())));
    }
    let checkpoints: Vec<u64> = spec.list_req(S, "checkpoints")?;
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(spec_err(spec.line_of(S, "checkpoints"), "checkpoints must be non-empty and strictly ascending"));
    }
    let norm = parse_norm(spec, S, d, default_norm)?;
    let reps = match ctx.opts.reps {
        Some(r) => r,
        None => spec.parse_opt(S, "reps")?.unwrap_or(1000),
    };
    if reps == 0 {
        return Err(spec_err(spec.line_of(S, "reps"), "reps must be positive"));
    }
    let seed = match ctx.opts.seed {
        Some(s) => s,
        None => spec.parse_opt(S, "seed")?.unwrap_or(0),
    };
    Ok(RunConfig { setup: EnsembleSetup { schedule, x0, checkpoints, norm }, reps, seed })
}

fn ensemble(ctx: &Context, op: &dyn StochasticOperator, run: &RunConfig) -> Result<ErrorEnsemble> {
    let ens = run_ensemble(op, &run.setup, run.reps, run.seed, ctx.opts.parallel)?;
    if ens.divergence_count > 0 {
        eprintln!("warning: {} of {} replications diverged", ens.divergence_count, ens.n_reps);
    }
    Ok(ens)
}

fn parse_envelope(spec: &SpecFile, schedule: &StepSchedule) -> Result<Option<TailEnvelope>> {
    const S: &str = "envelope";
    if !spec.has_section(S) {
        return Ok(None);
    }
    spec.check_keys(
        S,
        &["kind", "value", "sigma_sq", "gamma_c", "mu", "c_d", "x0_err_sq", "l_smooth", "u_cc_star", "a_scale", "beta", "u0"],
    )?;
    let at = spec.at(S, "kind");
    Ok(Some(match spec.str_req(S, "kind")? {
        "constant" => TailEnvelope::Constant(spec.parse_req(S, "value")?),
        "additive" => {
            let gamma_c: f64 = spec.parse_req(S, "gamma_c")?;
            let cfg = AdditiveNoiseConfig::with_self_smoothing(
                spec.parse_req(S, "sigma_sq")?,
                gamma_c,
                spec.parse_opt(S, "mu")?.unwrap_or(1.0),
                spec.parse_req(S, "c_d")?,
                spec.parse_opt(S, "x0_err_sq")?.unwrap_or(0.0),
                spec.parse_opt(S, "l_smooth")?.unwrap_or(1.0),
                spec.parse_opt(S, "u_cc_star")?.unwrap_or(1.0),
                spec.parse_opt(S, "a_scale")?.unwrap_or(schedule.alpha() * (1.0 - gamma_c)),
            );
            TailEnvelope::Additive(AdditiveEnvelope::new(cfg, *schedule).map_err(at)?)
        }
        "multiplicative" => {
            let b: Vec<f64> = spec.list_req(S, "beta")?;
            if b.len() != 4 {
                return Err(spec_err(spec.line_of(S, "beta"), "beta needs four values"));
            }
            let cfg = MultiplicativeConfig::new([b[0], b[1], b[2], b[3]], spec.parse_req(S, "u0")?).map_err(spec.at(S, "beta"))?;
            TailEnvelope::Multiplicative(MultiplicativeEnvelope { cfg, schedule: *schedule })
        }
        other => return Err(at(Error::invalid(format!("unknown envelope kind `{other}`")))),
    }))
}

fn envelope_gate(spec: &SpecFile, env: &TailEnvelope, sched: &StepSchedule) -> Result<()> {
    match env {
        TailEnvelope::Additive(a) => additive_gate(spec, sched, a.constants.gamma_tilde),
        TailEnvelope::Multiplicative(m) => gate_schedule(
            spec,
            m.cfg.h_condition_met(sched),
            format!("h = {} violates 2ξ/h - β₂α/h^ξ <= 0", sched.h()),
        ),
        _ => Ok(()),
    }
}

const BOUND_KEYS: &[&str] = &[
    "source", "nu", "m", "n", "r", "sigma_bar_sq", "sigma_hat_sq", "u_c2", "d", "u_exponent", "deltas", "ks", "mu",
];

/// Bound parameters and envelope from `[bound]` and `[envelope]`.
fn parse_bound(spec: &SpecFile, schedule: &StepSchedule, op: Option<(&BuiltOp, &[f64])>) -> Result<(BoundParams, TailEnvelope)> {
    const S: &str = "bound";
    spec.require_section(S)?;
    spec.check_keys(S, BOUND_KEYS)?;
    let u_exponent = match spec.str_opt(S, "u_exponent").unwrap_or("four") {
        "four" => UExponent::Four,
        "two" => UExponent::Two,
        v => return Err(spec_err(spec.line_of(S, "u_exponent"), format!("u_exponent must be `four` or `two`, got `{v}`"))),
    };
    let envelope = parse_envelope(spec, schedule)?;
    let (mut params, env) = match spec.str_opt(S, "source").unwrap_or("explicit") {
        "operator" => {
            let line = spec.line_of(S, "source");
            let Some((BuiltOp::Linear(lin), x0)) = op else {
                return Err(spec_err(line, "`source = operator` needs a linear_additive or random_contractive operator"));
            };
            let mu = spec.parse_opt(S, "mu")?.unwrap_or(1.0);
            let (p, a) = linear_additive_bound_setup(lin, schedule, x0, mu).map_err(|e| spec_err(line, e.to_string()))?;
            (p, envelope.unwrap_or(TailEnvelope::Additive(a)))
        }
        "explicit" => {
            let p = BoundParams {
                nu: spec.parse_req(S, "nu")?,
                m: spec.parse_req(S, "m")?,
                n: spec.parse_opt(S, "n")?.unwrap_or(0.0),
                r: spec.parse_opt(S, "r")?.unwrap_or(f64::INFINITY),
                sigma_bar_sq: spec.parse_req(S, "sigma_bar_sq")?,
                sigma_hat_sq: spec.parse_opt(S, "sigma_hat_sq")?.unwrap_or(0.0),
                u_c2: spec.parse_opt(S, "u_c2")?.unwrap_or(1.0),
                d: spec.parse_req(S, "d")?,
                schedule: *schedule,
                u_exponent,
            };
            let env = envelope.ok_or_else(|| spec_err(spec.section_line(S), "explicit bounds need an [envelope] section"))?;
            (p, env)
        }
        v => return Err(spec_err(spec.line_of(S, "source"), format!("source must be `explicit` or `operator`, got `{v}`"))),
    };
    params.u_exponent = u_exponent;
    params.validate().map_err(spec.at(S, "nu"))?;
    Ok((params, env))
}

fn deltas(spec: &SpecFile, section: &str, default: &[f64]) -> Result<Vec<f64>> {
    let ds = spec.list_opt(section, "deltas")?.unwrap_or_else(|| default.to_vec());
    if ds.is_empty() || ds.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(spec_err(spec.line_of(section, "deltas"), "deltas must lie in (0, 1)"));
    }
    Ok(ds)
}

fn gamma_of(op: &BuiltOp) -> Option<f64> {
    match op {
        BuiltOp::Linear(l) => Some(l.matrix().clone().singular_values().max()),
        BuiltOp::Other(o) => o.report().gamma_c,
    }
}

fn print_verdicts(label: &str, vs: &[CoverageVerdict]) {
    for v in vs {
        println!(
            "{label} k={} delta={} exceed={}/{} upper_ci={:.6e} bound={:.6e} {}",
            v.checkpoint,
            v.delta,
            v.exceed_count,
            v.n,
            v.binomial_upper_ci,
            v.bound,
            if v.pass { "PASS" } else { "FAIL" }
        );
    }
}

// ---------------------------------------------------------------------------
// subcommands

pub(super) fn cmd_simulate(ctx: &Context) -> Result<Verdict> {
    let spec = ctx.spec;
    let op = build_operator(spec)?;
    let gamma = gamma_of(&op);
    let sched = build_schedule_for(spec, gamma)?;
    let run = build_run(ctx, op.as_dyn().dim(), sched, NormSpec::Euclidean)?;
    match parse_envelope(spec, &sched)? {
        Some(env) => envelope_gate(spec, &env, &sched)?,
        None => {
            if let Some(g) = gamma {
                additive_gate(spec, &sched, g)?;
            }
        }
    }
    let ens = ensemble(ctx, op.as_dyn(), &run)?;
    ens.write_csv(create(&ctx.opts.out, "ensemble.csv")?)?;
    println!("simulate: {} replications x {} checkpoints", ens.n_reps - ens.divergence_count, ens.checkpoints.len());
    Ok(Verdict::Pass)
}

pub(super) fn cmd_bound(ctx: &Context) -> Result<Verdict> {
    let spec = ctx.spec;
    let op = if spec.has_section("operator") { Some(build_operator(spec)?) } else { None };
    let sched = build_schedule_for(spec, op.as_ref().and_then(gamma_of))?;
    let x0 = match &op {
        Some(o) => spec.list_opt("run", "x0")?.unwrap_or_else(|| vec![0.0; o.as_dyn().dim()]),
        None => Vec::new(),
    };
    let (params, env) = parse_bound(spec, &sched, op.as_ref().map(|o| (o, x0.as_slice())))?;
    let ds = deltas(spec, "bound", &[0.1, 0.01])?;
    let ks: Vec<u64> = spec.list_req("bound", "ks")?;
    let rows = bound_table(&params, &env, &ds, &ks);
    write_bound_csv(&rows, create(&ctx.opts.out, "bounds.csv")?)?;
    println!("bound: {} rows ({} envelope)", rows.len(), env.kind());
    Ok(Verdict::Pass)
}

pub(super) fn cmd_coverage(ctx: &Context) -> Result<Verdict> {
    const S: &str = "coverage";
    let spec = ctx.spec;
    spec.require_section(S)?;
    spec.check_keys(S, &["deltas", "slack", "bound", "c0", "m"])?;
    let op = build_operator(spec)?;
    let sched = build_schedule_for(spec, gamma_of(&op))?;
    let run = build_run(ctx, op.as_dyn().dim(), sched, NormSpec::Euclidean)?;
    let ds = deltas(spec, S, &[0.05])?;
    let slack: f64 = spec.parse_opt(S, "slack")?.unwrap_or(1.0);
    let kind = spec.str_opt(S, "bound").unwrap_or("combined");
    let bline = spec.line_of(S, "bound");
    let bound: Box<dyn Fn(u64, f64) -> f64> = match kind {
        "combined" | "main" | "crude" => {
            let (p, env) = parse_bound(spec, &sched, Some((&op, &run.setup.x0)))?;
            envelope_gate(spec, &env, &sched)?;
            match kind {
                "combined" => Box::new(move |k, d| combined_bound(&p, &env, d, k)),
                "main" => Box::new(move |k, d| main_bound(&p, &env, d, k)),
                _ => Box::new(move |k, d| crude_bound(&p, &env, d, k)),
            }
        }
        "infinite" => Box::new(|_, _| f64::INFINITY),
        "zero" => Box::new(|_, _| 0.0),
        "exact_quantile" => {
            let d = op.as_dyn();
            let sb2 = match d.report().sigma_bar_sq {
                Some(s) if d.name() == "pair_gaussian" => s,
                _ => return Err(spec_err(bline, "exact_quantile needs the pair_gaussian operator")),
            };
            if sched.xi() != 0.0 || sched.alpha() != 1.0 || run.setup.x0.iter().any(|x| *x != 0.0) {
                return Err(spec_err(bline, "exact_quantile needs alpha = 1, xi = 0 and x0 = 0"));
            }
            Box::new(move |k, dl| sb2 * k as f64 * (1.0 / dl).ln() / ((k + 1) as f64).powi(2))
        }
        "subweibull" => {
            let c0: f64 = spec.parse_req(S, "c0")?;
            let m: f64 = spec.parse_req(S, "m")?;
            Box::new(move |k, d| c0 * (1.0 / d).ln().powf(m) / (k + 1) as f64)
        }
        other => return Err(spec_err(bline, format!("unknown bound `{other}`"))),
    };
    let ens = ensemble(ctx, op.as_dyn(), &run)?;
    let verdicts: Vec<CoverageVerdict> = ds.iter().flat_map(|&d| coverage_test(&ens, &*bound, d, slack)).collect();
    write_summary_csv(&ens, &verdicts, create(&ctx.opts.out, "coverage.csv")?)?;
    print_verdicts("coverage", &verdicts);
    Ok(Verdict::from_bool(verdicts.iter().all(|v| v.pass)))
}

pub(super) fn cmd_tightness(ctx: &Context) -> Result<Verdict> {
    const S: &str = "tightness";
    let spec = ctx.spec;
    spec.require_section(S)?;
    spec.check_keys(S, &["k", "deltas", "tolerance"])?;
    let op = build_operator(spec)?;
    let dop = op.as_dyn();
    let line = spec.line_of("operator", "kind");
    if dop.name() != "pair_gaussian" {
        return Err(spec_err(line, "tightness needs the pair_gaussian operator"));
    }
    let sigma_bar_sq = dop.report().sigma_bar_sq.unwrap_or(1.0);
    let sched = build_schedule_for(spec, Some(0.0))?;
    let k: u64 = spec.parse_req(S, "k")?;
    let mut run = build_run(ctx, dop.dim(), sched, NormSpec::Euclidean)?;
    if !run.setup.checkpoints.contains(&k) {
        run.setup.checkpoints.push(k);
        run.setup.checkpoints.sort_unstable();
    }
    if sched.xi() != 0.0 || sched.alpha() != 1.0 || run.setup.x0.iter().any(|x| *x != 0.0) {
        return Err(spec_err(spec.section_line("schedule"), "the exact quantile needs alpha = 1, xi = 0 and x0 = 0"));
    }
    let ds = deltas(spec, S, &[0.1, 0.01])?;
    let tol: f64 = spec.parse_opt(S, "tolerance")?.unwrap_or(0.03);
    let params = BoundParams {
        nu: 1.0,
        m: 1.0,
        n: 0.0,
        r: f64::INFINITY,
        sigma_bar_sq,
        sigma_hat_sq: 0.0,
        u_c2: 1.0,
        d: dop.dim(),
        schedule: sched,
        u_exponent: UExponent::Four,
    };
    let ens = ensemble(ctx, dop, &run)?;
    let mut w = create(&ctx.opts.out, "tightness.csv")?;
    writeln!(w, "k,delta,empirical,ci_lo,ci_hi,exact,empirical_over_exact,leading,leading_over_exact,verdict")?;
    let factor = 2.0 * 6f64.sqrt() + 0.1;
    let mut all = true;
    for &d in &ds {
        let t = tightness_check(&ens, &params, sigma_bar_sq.sqrt(), d, k)?;
        let ok = (t.empirical_over_exact - 1.0).abs() <= tol && t.leading_over_exact <= factor;
        all &= ok;
        writeln!(
            w,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            d,
            t.empirical.value,
            t.empirical.ci_lo,
            t.empirical.ci_hi,
            t.exact,
            t.empirical_over_exact,
            t.leading,
            t.leading_over_exact,
            if ok { "pass" } else { "fail" }
        )?;
        println!(
            "tightness k={k} delta={d} empirical/exact={:.4} leading/exact={:.4} {}",
            t.empirical_over_exact,
            t.leading_over_exact,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(Verdict::from_bool(all))
}

pub(super) fn cmd_tail(ctx: &Context) -> Result<Verdict> {
    let spec = ctx.spec;
    let mut all = true;
    let mut did = false;
    if spec.has_section("tail") {
        did = true;
        const S: &str = "tail";
        spec.check_keys(S, &["checkpoint", "expect", "sample"])?;
        let op = build_operator(spec)?;
        let sched = build_schedule_for(spec, gamma_of(&op))?;
        let run = build_run(ctx, op.as_dyn().dim(), sched, NormSpec::Euclidean)?;
        let ens = ensemble(ctx, op.as_dyn(), &run)?;
        let use_x = match spec.str_opt(S, "sample").unwrap_or("err_y") {
            "err_y" => false,
            "err_x" => true,
            v => return Err(spec_err(spec.line_of(S, "sample"), format!("sample must be err_x or err_y, got `{v}`"))),
        };
        let expect = match spec.str_opt(S, "expect") {
            None => None,
            Some("polynomial") => Some(TailVerdict::PolynomialTailConsistent),
            Some("exponential") => Some(TailVerdict::ExponentialTailConsistent),
            Some(v) => return Err(spec_err(spec.line_of(S, "expect"), format!("expect must be polynomial or exponential, got `{v}`"))),
        };
        let cps: Vec<u64> = match spec.parse_opt::<u64>(S, "checkpoint")? {
            Some(c) if ens.checkpoint_index(c).is_some() => vec![c],
            Some(c) => return Err(spec_err(spec.line_of(S, "checkpoint"), format!("checkpoint {c} is not in [run] checkpoints"))),
            None => ens.checkpoints.clone(),
        };
        let mut w = create(&ctx.opts.out, "tail.csv")?;
        writeln!(
            w,
            "checkpoint,hill_1pct,hill_2pct,hill_5pct,hill_stable,exp_slope,exp_residual,poly_slope,poly_residual,subweibull_shape,subweibull_residual,verdict"
        )?;
        for k in cps {
            let samples = if use_x { ens.err_x_at(k) } else { ens.err_y_at(k) }.unwrap_or_default();
            match tail_diagnostics(samples) {
                Ok(t) => {
                    writeln!(
                        w,
                        "{k},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                        t.hill[0].1,
                        t.hill[1].1,
                        t.hill[2].1,
                        t.hill_stable,
                        t.exp_slope,
                        t.exp_residual,
                        t.poly_slope,
                        t.poly_residual,
                        t.subweibull_shape,
                        t.subweibull_residual,
                        t.verdict.label()
                    )?;
                    let ok = expect.map_or(true, |e| e == t.verdict);
                    all &= ok;
                    println!("tail k={k} {} {}", t.verdict.label(), if ok { "PASS" } else { "FAIL" });
                }
                Err(Error::DegenerateSample(why)) => {
                    writeln!(w, "{k},,,,,,,,,,,degenerate")?;
                    println!("tail k={k} degenerate sample: {why}");
                    all &= expect.is_none();
                }
                Err(e) => return Err(e),
            }
        }
    }
    if spec.has_section("mgf") {
        did = true;
        const S: &str = "mgf";
        spec.check_keys(S, &["k", "x0", "alpha", "t_factors", "radii"])?;
        let alpha: f64 = spec.parse_req(S, "alpha")?;
        let setup = MgfSetup {
            k: spec.parse_opt(S, "k")?.unwrap_or(2),
            x0: spec.parse_opt(S, "x0")?.unwrap_or(1.0),
            alpha0: alpha,
            alpha1: alpha,
        };
        if !(setup.x0 > 0.0 && alpha > 0.0) {
            return Err(spec_err(spec.section_line(S), "mgf needs x0 > 0 and alpha > 0"));
        }
        let factors = spec.list_opt(S, "t_factors")?.unwrap_or_else(|| vec![0.5, 2.0]);
        let radii = spec.list_opt(S, "radii")?.unwrap_or_else(|| vec![2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut w = create(&ctx.opts.out, "mgf.csv")?;
        writeln!(w, "t_factor,t,radius,value")?;
        for &fac in &factors {
            let r = truncated_mgf_divergence(&setup, fac * setup.t_star(), &radii).map_err(spec.at(S, "radii"))?;
            for (rad, v) in r.radii.iter().zip(&r.values) {
                writeln!(w, "{fac},{:.16e},{rad},{:.16e}", r.t, v)?;
            }
            let ok = if fac < 1.0 { r.convergent } else if fac > 1.0 { r.growth >= 10.0 } else { true };
            all &= ok;
            println!(
                "mgf t={:.4}·t* last_ratio={:.4} growth={:.4e} {}",
                fac,
                r.last_ratio,
                r.growth,
                if ok { "PASS" } else { "FAIL" }
            );
        }
    }
    if !did {
        return Err(spec_err(0, "tail needs a [tail] or [mgf] section"));
    }
    Ok(Verdict::from_bool(all))
}

// ---------------------------------------------------------------------------
// reinforcement learning

const MDP_KEYS: &[&str] = &[
    "file", "states", "actions", "gamma", "r_max", "seed", "policy", "behavior", "n", "features", "zeta", "mu", "deltas",
    "slack", "slope_range", "quantile_delta",
];

fn build_mdp(spec: &SpecFile) -> Result<TabularMdp> {
    const S: &str = "mdp";
    spec.require_section(S)?;
    spec.check_keys(S, MDP_KEYS)?;
    if let Some(f) = spec.str_opt(S, "file") {
        let line = spec.line_of(S, "file");
        let path = spec.resolve(f);
        let text = std::fs::read_to_string(&path).map_err(|e| spec_err(line, format!("{}: {e}", path.display())))?;
        return TabularMdp::from_text(&text).map_err(|e| spec_err(line, format!("{}: {e}", path.display())));
    }
    TabularMdp::random(
        spec.parse_req(S, "states")?,
        spec.parse_req(S, "actions")?,
        spec.parse_req(S, "gamma")?,
        spec.parse_opt(S, "r_max")?.unwrap_or(1.0),
        spec.parse_opt(S, "seed")?.unwrap_or(0),
    )
    .map_err(spec.at(S, "states"))
}

/// `uniform`, `random <seed>`, `mixed <seed> <w>`, `deterministic a₀ a₁ …` or `table p…`.
fn parse_policy(spec: &SpecFile, key: &str, mdp: &TabularMdp) -> Result<Policy> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let v = spec.str_opt("mdp", key).unwrap_or("uniform");
    let line = spec.line_of("mdp", key);
    let bad = |m: &str| spec_err(line, format!("{key}: {m}"));
    let toks: Vec<&str> = v.split_whitespace().collect();
    let nums = |t: &[&str]| -> Result<Vec<f64>> {
        t.iter().map(|x| x.parse::<f64>().map_err(|_| bad(&format!("cannot parse `{x}`")))).collect()
    };
    match toks.first().copied() {
        Some("uniform") => Ok(Policy::uniform(ns, na)),
        Some("random") if toks.len() == 2 => {
            Ok(Policy::random(ns, na, toks[1].parse().map_err(|_| bad("seed must be an integer"))?))
        }
        Some("mixed") if toks.len() == 3 => {
            let seed = toks[1].parse().map_err(|_| bad("seed must be an integer"))?;
            let w: f64 = toks[2].parse().map_err(|_| bad("weight must be a number"))?;
            if !(0.0..=1.0).contains(&w) {
                return Err(bad("weight must lie in [0, 1]"));
            }
            Ok(Policy::random(ns, na, seed).mixed_with_uniform(w))
        }
        Some("deterministic") => {
            let acts: Vec<usize> = toks[1..]
                .iter()
                .map(|x| x.parse().map_err(|_| bad(&format!("cannot parse `{x}`"))))
                .collect::<Result<_>>()?;
            if acts.len() != ns {
                return Err(bad("needs one action per state"));
            }
            Policy::deterministic(na, &acts).map_err(|e| bad(&e.to_string()))
        }
        Some("table") => Policy::new(ns, na, nums(&toks[1..])?).map_err(|e| bad(&e.to_string())),
        _ => Err(bad(&format!("unrecognized policy `{v}`"))),
    }
}

/// Ensemble plus per-checkpoint coverage of a k-dependent bound setup.
fn rl_coverage(
    ctx: &Context,
    op: &dyn StochasticOperator,
    setup_at: &dyn Fn(&StepSchedule, u64, &[f64]) -> Result<RlBoundSetup>,
    gamma_at: &dyn Fn(u64) -> Result<f64>,
    file: &str,
    label: &str,
) -> Result<Verdict> {
    let spec = ctx.spec;
    // the contraction factor depends on k through p; `h = auto` covers every checkpoint
    let mut g_max: f64 = 0.0;
    for k in spec.list_req::<u64>("run", "checkpoints")? {
        g_max = g_max.max(gamma_at(k).map_err(spec.at("mdp", "n"))?);
    }
    let sched = build_schedule_for(spec, Some(g_max))?;
    let run = build_run(ctx, op.dim(), sched, NormSpec::Max)?;
    if run.setup.norm != NormSpec::Max {
        return Err(spec_err(spec.line_of("run", "norm"), "RL coverage is measured in the max norm"));
    }
    let mut setups = Vec::new();
    for &k in &run.setup.checkpoints {
        let s = setup_at(&sched, k, &run.setup.x0).map_err(spec.at("mdp", "n"))?;
        additive_gate(spec, &sched, s.gamma_c)?;
        setups.push((k, s));
    }
    let ds = deltas(spec, "mdp", &[0.05])?;
    let slack: f64 = spec.parse_opt("mdp", "slack")?.unwrap_or(1.0);
    let ens = ensemble(ctx, op, &run)?;
    let bound = |k: u64, d: f64| setups.iter().find(|(c, _)| *c == k).map_or(f64::NAN, |(_, s)| s.sup_bound(d, k));
    let verdicts: Vec<CoverageVerdict> = ds.iter().flat_map(|&d| coverage_test(&ens, &bound, d, slack)).collect();
    write_summary_csv(&ens, &verdicts, create(&ctx.opts.out, file)?)?;
    for (k, s) in &setups {
        println!("{label} k={k} p={:.4} gamma_c={:.6} h_condition={}", s.p, s.gamma_c, s.h_condition_met);
    }
    print_verdicts(label, &verdicts);
    Ok(Verdict::from_bool(verdicts.iter().all(|v| v.pass)))
}

pub(super) fn cmd_rl_td(ctx: &Context) -> Result<Verdict> {
    let spec = ctx.spec;
    let mdp = build_mdp(spec)?;
    let pi = parse_policy(spec, "policy", &mdp)?;
    let n: u32 = spec.parse_opt("mdp", "n")?.unwrap_or(1);
    let mu = spec.parse_opt("mdp", "mu")?.unwrap_or(1.0);
    let op = make_td_sampler(&mdp, &pi, n).map_err(spec.at("mdp", "policy"))?;
    let report = op.report().clone();
    rl_coverage(
        ctx,
        &op,
        &|s, k, x0| td_bound_setup(&report, s, k, x0, mu),
        &|k| Ok(report.gamma_c(report.p_star(k))),
        "rl_td.csv",
        "rl-td",
    )
}

pub(super) fn cmd_rl_q(ctx: &Context) -> Result<Verdict> {
    let spec = ctx.spec;
    let mdp = build_mdp(spec)?;
    let pi_b = parse_policy(spec, "behavior", &mdp)?;
    let mu = spec.parse_opt("mdp", "mu")?.unwrap_or(1.0);
    let op = make_q_sampler(&mdp, &pi_b).map_err(spec.at("mdp", "behavior"))?;
    let probe = StepSchedule::new(1.0, 2.0, 0.0)?;
    rl_coverage(
        ctx,
        &op,
        &|s, k, x0| q_bound_setup(&op, s, k, x0, mu),
        &|k| Ok(q_bound_setup(&op, &probe, k, &vec![0.0; op.dim()], mu)?.gamma_c),
        "rl_q.csv",
        "rl-q",
    )
}

pub(super) fn cmd_rl_offpolicy(ctx: &Context) -> Result<Verdict> {
    const S: &str = "mdp";
    let spec = ctx.spec;
    let mdp = build_mdp(spec)?;
    let pi = parse_policy(spec, "policy", &mdp)?;
    let pi_b = parse_policy(spec, "behavior", &mdp)?;
    let phi = spec.matrix_opt(S, "features")?.ok_or_else(|| spec_err(spec.section_line(S), "[mdp] needs `features`"))?;
    let n: u32 = spec.parse_opt(S, "n")?.unwrap_or(1);
    let mut cfg = LfaConfig { phi, pi, pi_b, n, zeta: 1.0 };
    let sys = offpolicy_system(&mdp, &cfg).map_err(spec.at(S, "features"))?;
    let hr = hurwitz_check(&sys.a_bar);
    println!("rl-offpolicy hurwitz={} abscissa={:.6e}", hr.hurwitz, hr.abscissa);
    if !hr.hurwitz {
        println!("rl-offpolicy FAIL: the mean dynamics are not stable for this lookahead");
        return Ok(Verdict::Fail);
    }
    let seed = ctx.opts.seed.map_or(spec.parse_opt("run", "seed"), |s| Ok(Some(s)))?.unwrap_or(0);
    let ly = lyapunov_contraction_norm(&sys.a_bar, seed)?;
    cfg.zeta = match spec.str_opt(S, "zeta") {
        None | Some("auto") => ly.zeta_star,
        Some(_) => spec.parse_req(S, "zeta")?,
    };
    let induced = ly.induced(&sys.a_bar, cfg.zeta);
    println!("rl-offpolicy zeta={} zeta_star={} induced_norm={:.6}", cfg.zeta, ly.zeta_star, induced);
    let op = make_offpolicy_td_sampler(&cfg, &mdp).map_err(spec.at(S, "features"))?;
    let resid = projected_bellman_residual(&mdp, &cfg, &sys.mu_b, op.fixed_point())?;
    println!("rl-offpolicy projected_residual={resid:.3e}");
    let sched = build_schedule(spec, None)?;
    let run = build_run(ctx, op.dim(), sched, NormSpec::Euclidean)?;
    let ens = ensemble(ctx, &op, &run)?;
    let qd: f64 = spec.parse_opt(S, "quantile_delta")?.unwrap_or(0.1);
    let mut w = create(&ctx.opts.out, "rl_offpolicy.csv")?;
    writeln!(w, "checkpoint,delta,quantile,ci_lo,ci_hi")?;
    let mut qs = Vec::new();
    for (c, &k) in ens.checkpoints.iter().enumerate() {
        let q = empirical_quantile(&ens.err_y[c], 1.0 - qd)?;
        writeln!(w, "{k},{qd:.16e},{:.16e},{:.16e},{:.16e}", q.value, q.ci_lo, q.ci_hi)?;
        qs.push(q.value);
    }
    let mut ok = induced < 1.0 && resid <= 1e-8;
    if ens.checkpoints.len() >= 2 {
        let ks: Vec<f64> = ens.checkpoints.iter().map(|&k| k as f64).collect();
        let slope = loglog_slope(&ks, &qs);
        println!("rl-offpolicy quantile slope={slope:.4}");
        if let Some(r) = spec.list_opt::<f64>(S, "slope_range")? {
            if r.len() != 2 {
                return Err(spec_err(spec.line_of(S, "slope_range"), "slope_range needs two values"));
            }
            ok &= slope >= r[0] && slope <= r[1];
        }
    }
    println!("rl-offpolicy {}", if ok { "PASS" } else { "FAIL" });
    Ok(Verdict::from_bool(ok))
}
