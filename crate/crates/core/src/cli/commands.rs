use std::fmt::Write;

use super::config::LoadedConfig;
use super::svg::LinePlot;
use super::Command;
use crate::coefficients::{
    builtin_families, linear_growth_constants, lipschitz_estimate, CoefficientSpec, Mollifier,
};
use crate::diagnostics::{
    beta_window, chain_verdict, estimate_sup_moment, kernel_decay_fit, ks_chain, lp_norm_p,
    non_increasing_within, spatial_modulus_estimate, temporal_modulus, uniform_bound_holds,
    ChainVerdict, Regime,
};
use crate::heat_kernel::{semigroup_defect, semigroup_defect_bound};
use crate::quadrature::integrate_adaptive;
use crate::rng::RandomStream;
use crate::solver::{default_test_function, pairing};
use crate::stable_noise::{
    big_jump_intensity, compensation_constants, measure_abs_moment, CellSampler, SmallJumpMode,
};
use crate::stats::Estimate;
use crate::{Error, Result};

/// One pass/fail line of a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Files to write (name, contents) and the checks that ran.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

pub(super) fn execute(cmd: &Command, cfg: &LoadedConfig) -> Result<Report> {
    match cmd {
        Command::KernelCheck(_) => kernel_check(cfg),
        Command::NoiseCheck(_) => noise_check(cfg),
        Command::MollifierCheck(_) => mollifier_check(cfg),
        Command::Simulate(_) => simulate(cfg),
        Command::Moments(_) => moments(cfg),
        Command::Modulus(_) => modulus(cfg),
        Command::Converge(_) => converge(cfg),
    }
}

const SEMIGROUP_PAIRS: [(f64, f64); 3] = [(0.01, 0.02), (0.05, 0.05), (0.1, 0.2)];
const SEMIGROUP_TOL: f64 = 1e-6;
const DECAY_EXPONENTS: [f64; 2] = [1.5, 2.0];
const DECAY_SLOPE_TOL: f64 = 0.05;

fn kernel_check(cfg: &LoadedConfig) -> Result<Report> {
    let kc = cfg.kernel_config();
    let l2 = kc.length * kc.length;
    let nodes = cfg.config.kernel.nx + 2;
    let mut rep = Report::default();
    let mut csv = String::from("check,t,s,p,value,bound_or_defect\n");

    for (s, t) in SEMIGROUP_PAIRS.map(|(s, t)| (s * l2, t * l2)) {
        let defect = semigroup_defect(&kc, s, t, nodes)?;
        let bound = semigroup_defect_bound(&kc, s, t, nodes);
        let _ = writeln!(csv, "semigroup,{t},{s},,{defect},{bound}");
        rep.checks.push(Check::new(
            format!("kernel semigroup (s={s}, t={t})"),
            defect < SEMIGROUP_TOL,
            format!("defect {defect:.3e} < {SEMIGROUP_TOL:.0e}"),
        ));
    }

    let times: Vec<f64> = (0..9)
        .map(|k| 1e-5 * 10f64.powf(k as f64 / 4.0) * l2)
        .collect();
    let mut plot =
        LinePlot::new("Kernel Lp decay at x = L/2", "t", "integral of |G_t|^p").log_log();
    let mut exponents: Vec<f64> = DECAY_EXPONENTS.to_vec();
    for &p in &cfg.config.p_list {
        if !exponents.contains(&p) {
            exponents.push(p);
        }
    }
    for p in exponents {
        let fit = kernel_decay_fit(&kc, p, &times)?;
        let target = -(p - 1.0) / 2.0;
        for (&t, &v) in times.iter().zip(&fit.values) {
            let _ = writeln!(csv, "lp_integral,{t},,{p},{v},{}", v / t.powf(target));
        }
        let _ = writeln!(
            csv,
            "decay_slope,,,{p},{},{}",
            fit.slope,
            (fit.slope - target).abs()
        );
        rep.checks.push(Check::new(
            format!("kernel Lp decay (p={p})"),
            (fit.slope - target).abs() <= DECAY_SLOPE_TOL,
            format!(
                "slope {:.4} vs {target:.4} within {DECAY_SLOPE_TOL}",
                fit.slope
            ),
        ));
        plot = plot.series(
            format!("p = {p}"),
            times.iter().copied().zip(fit.values).collect(),
        );
    }
    rep.file("kernel.csv", csv);
    rep.file("kernel.svg", plot.render());
    Ok(rep)
}

const NOISE_SAMPLES: usize = 100_000;
const MOMENT_REL_TOL: f64 = 1e-6;

/// `∫_{lo<|z|≤K} |z|^q ν(dz)` by adaptive quadrature of the density.
fn density_moment(cfg: &LoadedConfig, q: f64, lo: f64) -> (f64, bool) {
    let spec = cfg.config.noise.resolve();
    let k = spec.truncation;
    // one power: nodes near the origin would overflow |z|^{-1-α} alone
    let f = |z: f64| {
        let side = if z > 0.0 { spec.c_plus } else { spec.c_minus };
        if z == 0.0 {
            0.0
        } else {
            side * z.abs().powf(q - spec.alpha - 1.0)
        }
    };
    let (pos, ok1) = integrate_adaptive(lo, k, 1e-12, f);
    let (neg, ok2) = integrate_adaptive(-k, -lo, 1e-12, f);
    (pos + neg, ok1 && ok2)
}

fn noise_check(cfg: &LoadedConfig) -> Result<Report> {
    let spec = cfg.config.noise.resolve();
    let (a, k, eps) = (spec.alpha, spec.truncation, spec.eps);
    let mut rep = Report::default();
    let mut csv = String::from("check,alpha,p,K,eps,value,reference,tolerance\n");

    let mut exponents = cfg.config.p_list.clone();
    if !exponents.contains(&2.0) {
        exponents.push(2.0);
    }
    for p in exponents {
        let closed = measure_abs_moment(&spec, p)?;
        let (quad, converged) = density_moment(cfg, p, 0.0);
        let rel = (closed - quad).abs() / quad.abs();
        let _ = writeln!(
            csv,
            "abs_moment,{a},{p},{k},{eps},{closed},{quad},{MOMENT_REL_TOL}"
        );
        rep.checks.push(Check::new(
            format!("jump moment (p={p})"),
            converged && rel <= MOMENT_REL_TOL,
            format!("closed form {closed} vs quadrature {quad}, rel {rel:.2e}"),
        ));
    }

    let (intensity, _) = density_moment(cfg, 0.0, eps);
    let _ = writeln!(
        csv,
        "big_jump_intensity,{a},,{k},{eps},{},{intensity},{MOMENT_REL_TOL}",
        big_jump_intensity(&spec)
    );
    let cc = compensation_constants(&spec);
    let mean_big = integrate_adaptive(eps, k, 1e-12, |z| z * spec.levy_density(z)).0
        + integrate_adaptive(-k, -eps, 1e-12, |z| z * spec.levy_density(z)).0;
    let _ = writeln!(
        csv,
        "mean_big,{a},1,{k},{eps},{},{mean_big},{MOMENT_REL_TOL}",
        cc.mean_big
    );
    let (var_small, _) = density_moment(cfg, 2.0, 0.0);
    let (var_big, _) = density_moment(cfg, 2.0, eps);
    let _ = writeln!(
        csv,
        "var_small,{a},2,{k},{eps},{},{},{MOMENT_REL_TOL}",
        cc.var_small,
        var_small - var_big
    );

    let m = cfg.config.grid.dt() * cfg.config.grid.dx();
    let sampler = CellSampler::new(&spec, m)?;
    let mut stream = RandomStream::auxiliary(cfg.config.master_seed, 0x6e6f697365);
    let xs: Vec<f64> = (0..NOISE_SAMPLES)
        .map(|_| sampler.sample(&mut stream))
        .collect();
    let mean = Estimate::from_samples(&xs);
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let second = Estimate::from_samples(&sq);
    let dropped = match spec.small_jump_mode {
        SmallJumpMode::Gaussian => 0.0,
        SmallJumpMode::Drop => cc.var_small,
    };
    let target = m * (measure_abs_moment(&spec, 2.0)? - dropped);
    let _ = writeln!(
        csv,
        "increment_mean,{a},1,{k},{eps},{},0,{}",
        mean.mean,
        4.0 * mean.stderr
    );
    let _ = writeln!(
        csv,
        "increment_second_moment,{a},2,{k},{eps},{},{target},{}",
        second.mean,
        3.0 * second.stderr
    );
    rep.checks.push(Check::new(
        "noise compensation mean",
        mean.mean.abs() <= 4.0 * mean.stderr,
        format!(
            "{:.3e} within 4 SE = {:.3e} of 0",
            mean.mean,
            4.0 * mean.stderr
        ),
    ));
    rep.checks.push(Check::new(
        "noise compensation second moment",
        (second.mean - target).abs() <= 3.0 * second.stderr,
        format!(
            "{:.4e} within 3 SE = {:.3e} of {target:.4e}",
            second.mean,
            3.0 * second.stderr
        ),
    ));

    let zs: Vec<f64> = (0..=200)
        .map(|i| eps + (k - eps) * i as f64 / 200.0)
        .collect();
    let plot = LinePlot::new("Truncated Levy density", "z", "density")
        .log_log()
        .series(
            "z > 0",
            zs.iter().map(|&z| (z, spec.levy_density(z))).collect(),
        )
        .series(
            "z < 0",
            zs.iter().map(|&z| (z, spec.levy_density(-z))).collect(),
        );
    rep.file("noise.csv", csv);
    rep.file("noise.svg", plot.render());
    Ok(rep)
}

const MOLLIFIER_TOL: f64 = 1e-2;
const MOLLIFIER_TEST_POINTS: usize = 21;

fn mollifier_check(cfg: &LoadedConfig) -> Result<Report> {
    let levels = &cfg.config.n_list;
    let n_max = *levels.iter().max().expect("validated nonempty");
    let us: Vec<f64> = (0..MOLLIFIER_TEST_POINTS)
        .map(|i| -2.0 + 4.0 * i as f64 / (MOLLIFIER_TEST_POINTS - 1) as f64)
        .collect();
    let mut families: Vec<(String, _)> = builtin_families()
        .into_iter()
        .map(|(n, f)| (n.to_string(), f))
        .collect();
    if !families.iter().any(|(_, f)| *f == cfg.config.coeff.family) {
        families.push(("config".into(), cfg.config.coeff.family.clone()));
    }
    let mut rep = Report::default();
    let mut csv = String::from("family,n,max_abs_error,lipschitz,eps_n,C\n");
    let mut plot = LinePlot::new(
        &format!("Mollified coefficients, n = {n_max}"),
        "u",
        "phi_n(u)",
    );
    for (name, family) in &families {
        let base = CoefficientSpec {
            family: family.clone(),
            n: 0,
            nodes: cfg.config.coeff.nodes,
        };
        let mut lipschitz_ok = true;
        for &n in levels {
            let spec = base.at_level(n);
            let m = Mollifier::new(&spec);
            let err = us
                .iter()
                .map(|&u| (m.value(u) - family.raw(u)).abs())
                .fold(0.0, f64::max);
            let lip = lipschitz_estimate(&spec, -4.0, 4.0, 801)?;
            let growth = linear_growth_constants(&spec, -4.0, 4.0)?;
            lipschitz_ok &= lip.slope.is_finite() && lip.reliable;
            let _ = writeln!(
                csv,
                "{name},{n},{err},{},{},{}",
                lip.slope, growth.eps_n, growth.c
            );
            if n == n_max {
                rep.checks.push(Check::new(
                    format!("mollifier error ({name}, n={n})"),
                    err < MOLLIFIER_TOL,
                    format!("max |phi_n - phi| on 21 points of [-2, 2] = {err:.3e} < {MOLLIFIER_TOL:.0e}"),
                ));
                let grid: Vec<f64> = (0..=160).map(|i| -2.0 + i as f64 / 40.0).collect();
                plot = plot.series(
                    name.clone(),
                    grid.iter().map(|&u| (u, m.value(u))).collect(),
                );
            }
        }
        rep.checks.push(Check::new(
            format!("mollifier Lipschitz ({name})"),
            lipschitz_ok,
            format!("finite Lipschitz scan at n in {levels:?}"),
        ));
    }
    rep.file("mollifier.csv", csv);
    rep.file("mollifier.svg", plot.render());
    Ok(rep)
}

struct ReplicaTrace {
    norms: Vec<f64>,
    pairings: Vec<f64>,
    last: Vec<f64>,
}

fn simulate(cfg: &LoadedConfig) -> Result<Report> {
    let c = &cfg.config;
    let exp = cfg.experiment();
    let n = c.coeff.n;
    if n == 0 {
        return Err(Error::Config("simulate needs coeff.n >= 1".into()));
    }
    let p = c.p_list[0];
    let grid = exp.grid;
    let dx = grid.dx();
    let psi = default_test_function(&grid);
    let traces = exp.map_replicas(n, c.replicas, |sim, r| {
        let mut t = ReplicaTrace {
            norms: Vec::with_capacity(grid.nt + 1),
            pairings: Vec::with_capacity(grid.nt + 1),
            last: Vec::new(),
        };
        sim.run(exp.master_seed, r, |j, u| {
            t.norms.push(lp_norm_p(u, p, dx));
            t.pairings.push(pairing(u, &psi, dx));
            if j == grid.nt {
                t.last = u.to_vec();
            }
        })?;
        Ok(t)
    })?;

    let mut paths = String::from("replica,step,t,lp_norm_p,pairing\n");
    let mut finals = String::from("replica,x,u\n");
    let mut exploded = Vec::new();
    let mut mean_norm = vec![0.0; grid.nt + 1];
    let mut survivors = 0usize;
    for (r, trace) in traces.into_iter().enumerate() {
        match trace {
            Ok(t) => {
                for (j, (v, q)) in t.norms.iter().zip(&t.pairings).enumerate() {
                    let _ = writeln!(paths, "{r},{j},{},{v},{q}", grid.t(j));
                    mean_norm[j] += v;
                }
                for (i, u) in t.last.iter().enumerate() {
                    let _ = writeln!(finals, "{r},{},{u}", grid.x(i + 1));
                }
                survivors += 1;
            }
            Err(Error::Explosion { step }) => exploded.push((r, step)),
            Err(e) => return Err(e),
        }
    }
    let mut rep = Report::default();
    rep.checks.push(Check::new(
        "simulate finite paths",
        exploded.is_empty(),
        match exploded.first() {
            None => format!("{survivors} replicas at n={n}, no explosions"),
            Some((r, s)) => format!(
                "{} replicas exploded (first: replica {r} at step {s})",
                exploded.len()
            ),
        },
    ));
    let plot = LinePlot::new(
        &format!("Mean ||u_t||_p^p, p = {p}, n = {n}"),
        "t",
        "mean norm",
    )
    .series(
        "mean",
        mean_norm
            .iter()
            .enumerate()
            .map(|(j, v)| (grid.t(j), v / survivors.max(1) as f64))
            .collect(),
    );
    rep.file("paths.csv", paths);
    rep.file("final.csv", finals);
    rep.file("simulate.svg", plot.render());
    Ok(rep)
}

fn moments(cfg: &LoadedConfig) -> Result<Report> {
    let c = &cfg.config;
    let exp = cfg.experiment();
    let spec = exp.noise;
    let mut rep = Report::default();
    let mut csv = String::from("n,alpha,p,K,eps,replicas,estimate,stderr\n");
    let mut plot = LinePlot::new("Sup-in-time moments", "n", "E sup ||u||_p^p");
    plot.log_x = true;
    for &p in &c.p_list {
        let mut ests = Vec::new();
        let mut explosions = 0;
        for &n in &c.n_list {
            let m = estimate_sup_moment(&exp, p, n, c.replicas)?;
            let _ = writeln!(
                csv,
                "{n},{},{p},{},{},{},{},{}",
                spec.alpha,
                spec.truncation,
                spec.eps,
                m.estimate.count,
                m.estimate.mean,
                m.estimate.stderr
            );
            explosions += m.explosions;
            ests.push(m.estimate);
        }
        let summary: Vec<String> = ests
            .iter()
            .map(|e| format!("{:.4}±{:.4}", e.mean, e.stderr))
            .collect();
        rep.checks.push(Check::new(
            format!("uniform moments (p={p})"),
            uniform_bound_holds(&ests, 3.0),
            format!(
                "no level above the across-level mean by > 3 combined SE: {}",
                summary.join(", ")
            ),
        ));
        rep.checks.push(Check::new(
            format!("moment replicas finite (p={p})"),
            explosions == 0,
            format!("{explosions} exploded replicas"),
        ));
        plot = plot.series(
            format!("p = {p}"),
            c.n_list
                .iter()
                .map(|&n| n as f64)
                .zip(ests.iter().map(|e| e.mean))
                .collect(),
        );
    }
    if c.regime == Regime::FunctionValued {
        for &p in &c.p_list {
            rep.checks.push(Check::new(
                format!("beta window (p={p})"),
                beta_window(p)?.is_some(),
                format!("{:?}", beta_window(p)?),
            ));
        }
    }
    rep.file("moments.csv", csv);
    rep.file("moments.svg", plot.render());
    Ok(rep)
}

/// Entries sorted by decreasing offset.
fn by_decreasing_offset(entries: &[crate::diagnostics::ModulusEstimate]) -> Vec<Estimate> {
    let mut e = entries.to_vec();
    e.sort_by(|a, b| b.offset.total_cmp(&a.offset));
    e.into_iter().map(|m| m.estimate).collect()
}

fn modulus(cfg: &LoadedConfig) -> Result<Report> {
    let c = &cfg.config;
    let exp = cfg.experiment();
    let (deltas, shifts) = (cfg.deltas(), cfg.shifts());
    let mut rep = Report::default();
    let mut csv = String::from("kind,delta_or_shift,p,n,estimate,stderr\n");
    let mut plot =
        LinePlot::new("Temporal modulus", "delta", "E sup ||u_{t+h} - u_t||_p^p").log_log();
    for &p in &c.p_list {
        for &n in &c.n_list {
            if !deltas.is_empty() {
                let t = temporal_modulus(&exp, p, n, &deltas, c.replicas)?;
                for e in &t.entries {
                    let _ = writeln!(
                        csv,
                        "temporal,{},{p},{n},{},{}",
                        e.offset, e.estimate.mean, e.estimate.stderr
                    );
                }
                let ordered = by_decreasing_offset(&t.entries);
                let (largest, smallest) = (ordered[0].mean, ordered[ordered.len() - 1].mean);
                let monotone = non_increasing_within(&ordered, 2.0);
                let halved = smallest < 0.5 * largest;
                rep.checks.push(Check::new(
                    format!("temporal modulus (p={p}, n={n})"),
                    monotone && halved && t.explosions == 0,
                    format!(
                        "non-increasing within 2 SE: {monotone}; smallest {smallest:.4} < half of largest {largest:.4}: {halved}; explosions {}",
                        t.explosions
                    ),
                ));
                plot = plot.series(
                    format!("p = {p}, n = {n}"),
                    t.entries
                        .iter()
                        .map(|e| (e.offset, e.estimate.mean))
                        .collect(),
                );
            }
            if !shifts.is_empty() {
                let s = spatial_modulus_estimate(&exp, p, n, &shifts, c.replicas)?;
                for e in &s.entries {
                    let _ = writeln!(
                        csv,
                        "spatial,{},{p},{n},{},{}",
                        e.offset, e.estimate.mean, e.estimate.stderr
                    );
                }
            }
        }
    }
    rep.file("modulus.csv", csv);
    rep.file("modulus.svg", plot.render());
    Ok(rep)
}

fn converge(cfg: &LoadedConfig) -> Result<Report> {
    let c = &cfg.config;
    let exp = cfg.experiment();
    let psi = default_test_function(&exp.grid);
    let links = ks_chain(&exp, &c.n_list, c.replicas, &psi)?;
    let mut csv = String::from("n_lo,n_hi,ks,boot_ci_lo,boot_ci_hi\n");
    for l in &links {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            l.n_lo, l.n_hi, l.ks, l.ci_lo, l.ci_hi
        );
    }
    let (first, last) = (links[0], links[links.len() - 1]);
    let verdict = chain_verdict(&first, &last);
    let detail = format!(
        "KS({},{}) = {:.4} [{:.4}, {:.4}] vs KS({},{}) = {:.4} [{:.4}, {:.4}]: {}",
        first.n_lo,
        first.n_hi,
        first.ks,
        first.ci_lo,
        first.ci_hi,
        last.n_lo,
        last.n_hi,
        last.ks,
        last.ci_lo,
        last.ci_hi,
        match verdict {
            ChainVerdict::Separated => "separated",
            ChainVerdict::Inconclusive => "inconclusive (intervals overlap)",
            ChainVerdict::NotDecreasing => "not decreasing",
        }
    );
    let mut rep = Report::default();
    rep.checks.push(Check::new(
        "weak convergence KS chain",
        verdict != ChainVerdict::NotDecreasing,
        detail,
    ));
    let plot = LinePlot::new("KS distance between consecutive levels", "n_hi", "KS")
        .series("ks", links.iter().map(|l| (l.n_hi as f64, l.ks)).collect())
        .series(
            "ci low",
            links.iter().map(|l| (l.n_hi as f64, l.ci_lo)).collect(),
        )
        .series(
            "ci high",
            links.iter().map(|l| (l.n_hi as f64, l.ci_hi)).collect(),
        );
    rep.file("converge.csv", csv);
    rep.file("converge.svg", plot.render());
    Ok(rep)
}
