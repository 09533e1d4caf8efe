use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Command, ExperimentConfig, PhiSpec, VolterraSpec};
use super::output::{fmt_num, write_outputs, Table};
use crate::error::{Error, Result};
use crate::frac_calc::{xi_of, Grid, WeightedFunction};
use crate::mittag_leffler::{mittag_leffler, ml_eval, ml_oracle, oracle_terms, MlQuery};
use crate::solver::{apply_bf, contraction_factor, picard_solve, residual, ProblemSpec};
use crate::stability::{
    gronwall_extremal, gronwall_verify, make_perturbation, trial_seed, uh_constant, uh_experiment, uhr_experiment,
    PerturbationBound, StabilityCertificate,
};
use crate::volterra::{HadamardOperator, Lipschitz, StateOperator, VolterraOperator, ZeroOperator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Result of one command, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub table: Table,
    pub report: String,
    /// Text for standard output.
    pub stdout: Option<String>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) | Error::GridMismatch(_) | Error::GridTooCoarse { .. } => {
            EXIT_CONFIG
        }
        Error::NotIncreasing { .. } => EXIT_CONFIG,
        Error::NoConvergence(_) | Error::Convergence(_) | Error::Overflow { .. } | Error::Singularity { .. } => {
            EXIT_NO_CONVERGENCE
        }
        Error::HypothesisNotSatisfied { .. } => EXIT_CERTIFICATE,
        Error::Io(_) | Error::Csv(_) => EXIT_OTHER,
    }
}

struct Setup {
    problem: ProblemSpec,
    grid: Arc<Grid>,
    hadamard: Option<HadamardOperator>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let xi = xi_of(cfg.mu, cfg.eta)?;
    let grid = Grid::shared(cfg.psi, cfg.a, cfg.b, cfg.n)?;
    let mut hadamard = None;
    let op: Arc<dyn VolterraOperator> = match cfg.volterra {
        VolterraSpec::Zero => Arc::new(ZeroOperator),
        VolterraSpec::State(c) => Arc::new(StateOperator { c }),
        VolterraSpec::Hadamard => {
            let h = HadamardOperator::new(cfg.mu, Arc::new(cfg.kernel), cfg.hadamard_weight, Arc::clone(&grid), xi)?;
            hadamard = Some(h.clone());
            Arc::new(h)
        }
    };
    let p = ProblemSpec::new(cfg.psi, cfg.mu, cfg.eta, cfg.a, cfg.b, cfg.delta, Arc::new(cfg.f), op)?;
    let l_f = cfg.l_f.map(Lipschitz::Const).unwrap_or_else(|| p.l_f.clone());
    let l_w = cfg.l_w.map(Lipschitz::Const).unwrap_or_else(|| p.l_w.clone());
    let problem = p.with_lipschitz(l_f, l_w)?;
    Ok(Setup { problem, grid, hadamard })
}

fn echo(cfg: &ExperimentConfig, command: Command, report: &mut String) {
    let _ = writeln!(report, "command      {command}");
    let _ = writeln!(report, "psi          {}", cfg.psi);
    let _ = writeln!(report, "interval     [{}, {}]", fmt_num(cfg.a), fmt_num(cfg.b));
    let _ = writeln!(report, "mu, eta      {}, {}", fmt_num(cfg.mu), fmt_num(cfg.eta));
    if let Ok(xi) = xi_of(cfg.mu, cfg.eta) {
        let _ = writeln!(report, "xi           {}", fmt_num(xi));
    }
    if command == Command::Gronwall {
        return;
    }
    let _ = writeln!(report, "delta        {}", fmt_num(cfg.delta));
    let _ = writeln!(report, "f            {}", cfg.f);
    let _ = write!(report, "volterra     {}", cfg.volterra);
    if cfg.volterra == VolterraSpec::Hadamard {
        let _ = write!(report, " (kernel {}, weight {})", cfg.kernel, cfg.hadamard_weight);
    }
    let _ = writeln!(report);
    let _ = writeln!(report, "grid n       {}", cfg.n);
    let _ = writeln!(report, "tol          {}", fmt_num(cfg.tol));
}

fn lip_text(l: &Lipschitz) -> String {
    match l {
        Lipschitz::Const(c) => fmt_num(*c),
        Lipschitz::Table(_) => format!("table, sup {}", fmt_num(l.sup())),
    }
}

fn solve(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table)> {
    let s = setup(cfg)?;
    let p = &s.problem;
    let _ = writeln!(report, "L_f, L_W     {}, {}", lip_text(&p.l_f), lip_text(&p.l_w));
    let (x, diag, code) = match picard_solve(p, &s.grid, cfg.tol, cfg.max_iter) {
        Ok((x, d)) => (x, d, EXIT_OK),
        Err(Error::NoConvergence(b)) => {
            let (x, d) = *b;
            (x, d, EXIT_NO_CONVERGENCE)
        }
        Err(e) => return Err(e),
    };
    let _ = writeln!(report, "contraction q {}{}", fmt_num(diag.contraction_q), if diag.contraction_warning { " (not < 1: no certificate)" } else { "" });
    let _ = writeln!(report, "converged    {}", diag.converged);
    let _ = writeln!(report, "iterations   {}", diag.iterations);
    let _ = writeln!(report, "final step   {}", fmt_num(diag.final_step_norm));
    let _ = writeln!(report, "a-posteriori {}", fmt_num(diag.aposteriori_bound));
    let _ = writeln!(report, "residual     {}", fmt_num(residual(p, &x)?));

    let g = &s.grid;
    let mut t = Table::new(&["t", "psi_t", "weight", "u", "x"]);
    for i in 0..=g.n() {
        t.push(vec![
            fmt_num(g.t(i)),
            fmt_num(p.psi.eval(g.t(i))?),
            fmt_num(g.weight(p.xi, i)),
            fmt_num(x.u()[i]),
            fmt_num(x.x(i)),
        ]);
    }
    Ok((code, t))
}

fn random_smooth(grid: &Arc<Grid>, xi: f64, seed: u64) -> Result<WeightedFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.random_range(-1.0..1.0);
    let amp: f64 = rng.random_range(0.1..2.0);
    let h = make_perturbation(&PerturbationBound::Epsilon(amp), grid, rng.random())?;
    WeightedFunction::new(Arc::clone(grid), xi, h.iter().map(|v| v + offset).collect())
}

/// ‖B_f x − B_f y‖/‖x − y‖ on a seeded random pair.
pub fn operator_ratio(p: &ProblemSpec, grid: &Arc<Grid>, seed: u64) -> Result<f64> {
    let x = random_smooth(grid, p.xi, seed)?;
    let y = random_smooth(grid, p.xi, seed ^ 0x5DEE_CE66)?;
    let num = apply_bf(p, &x, None)?.distance(&apply_bf(p, &y, None)?)?;
    Ok(num / x.distance(&y)?)
}

fn check(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table)> {
    let s = setup(cfg)?;
    let p = &s.problem;
    let q = contraction_factor(p);
    let _ = writeln!(report, "L_f, L_W     {}, {}", lip_text(&p.l_f), lip_text(&p.l_w));
    let _ = writeln!(report, "contraction q {} ({})", fmt_num(q), if q < 1.0 { "< 1" } else { "NOT < 1" });
    if let Some(h) = &s.hadamard {
        let mut raw = p.clone();
        raw.l_w = Lipschitz::Const(h.raw_lk());
        let mut op = p.clone();
        op.l_w = h.lipschitz();
        let _ = writeln!(report, "q with raw L_K          {}", fmt_num(contraction_factor(&raw)));
        let _ = writeln!(report, "q with operator bound   {}", fmt_num(contraction_factor(&op)));
        let _ = writeln!(report, "derived L_K(ln b/a)^mu/G(mu+1) {}", fmt_num(h.derived_bound()));
    }
    match uh_constant(p) {
        Ok(c) => {
            let _ = writeln!(report, "UH constant c {}", fmt_num(c));
        }
        Err(e) => {
            let _ = writeln!(report, "UH constant c unavailable: {e}");
        }
    }

    let mut t = Table::new(&["pair", "seed", "ratio", "q", "pass"]);
    let mut worst = 0.0f64;
    let mut ok = q < 1.0;
    for pair in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, pair);
        let r = operator_ratio(p, &s.grid, seed)?;
        let pass = r <= q * 1.01;
        ok &= pass;
        worst = worst.max(r);
        t.push(vec![pair.to_string(), seed.to_string(), fmt_num(r), fmt_num(q), pass.to_string()]);
    }
    let _ = writeln!(report, "pairs        {}", cfg.trials);
    let _ = writeln!(report, "max ratio    {}", fmt_num(worst));
    let _ = writeln!(report, "pass         {ok}");
    Ok((if ok { EXIT_OK } else { EXIT_CERTIFICATE }, t))
}

fn certificate_table(cert: &StabilityCertificate) -> Table {
    let mut t = Table::new(&["trial", "seed", "epsilon_or_phi", "ratio", "pass"]);
    for r in &cert.trials {
        t.push(vec![r.trial.to_string(), r.seed.to_string(), fmt_num(r.bound), fmt_num(r.ratio), r.pass.to_string()]);
    }
    t
}

fn certificate_report(cert: &StabilityCertificate, report: &mut String) -> i32 {
    let _ = writeln!(report, "contraction q {}", fmt_num(cert.contraction_q));
    if let Some(e) = cert.epsilon {
        let _ = writeln!(report, "epsilon      {}", fmt_num(e));
        let _ = writeln!(report, "c            {}", fmt_num(cert.c));
    }
    if let Some(id) = &cert.phi_id {
        let _ = writeln!(report, "phi          {id}");
        let _ = writeln!(report, "lambda       {}", fmt_num(cert.lambda.unwrap_or(f64::NAN)));
        let _ = writeln!(report, "psi tilde    {}", fmt_num(cert.psi_tilde.unwrap_or(f64::NAN)));
        let _ = writeln!(report, "K tilde      {}", fmt_num(cert.k_tilde.unwrap_or(f64::NAN)));
        let _ = writeln!(report, "c_phi        {}", fmt_num(cert.c));
        let _ = writeln!(report, "note         sups are over the truncated grid [a, horizon]");
    }
    let _ = writeln!(report, "trials       {}", cert.trials.len());
    let _ = writeln!(report, "max ratio    {}", fmt_num(cert.max_observed_ratio));
    let _ = writeln!(report, "pass         {}", cert.pass);
    let failures: Vec<_> = cert.trials.iter().filter_map(|t| t.failure.as_ref().map(|f| (t.trial, f))).collect();
    for (trial, f) in &failures {
        let _ = writeln!(report, "trial {trial} failed: {f}");
    }
    if !failures.is_empty() {
        EXIT_NO_CONVERGENCE
    } else if cert.pass {
        EXIT_OK
    } else {
        EXIT_CERTIFICATE
    }
}

fn uh(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table)> {
    let s = setup(cfg)?;
    let _ = writeln!(report, "L_f, L_W     {}, {}", lip_text(&s.problem.l_f), lip_text(&s.problem.l_w));
    let cert = uh_experiment(&s.problem, &s.grid, cfg.epsilon, cfg.trials, cfg.seed, cfg.tol)?;
    let code = certificate_report(&cert, report);
    Ok((code, certificate_table(&cert)))
}

pub fn phi_samples(phi: PhiSpec, grid: &Grid, mu: f64) -> Result<Vec<f64>> {
    (0..=grid.n())
        .map(|i| match phi {
            PhiSpec::Const(c) => Ok(c),
            PhiSpec::Affine(c0, c1) => Ok(c0 + c1 * grid.t(i)),
            PhiSpec::MittagLeffler => mittag_leffler(mu, grid.offset(i).powf(mu)),
        })
        .collect()
}

fn uhr(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table)> {
    let s = setup(cfg)?;
    let _ = writeln!(report, "L_f, L_W     {}, {}", lip_text(&s.problem.l_f), lip_text(&s.problem.l_w));
    let phi = phi_samples(cfg.phi, &s.grid, cfg.mu)?;
    let cert = uhr_experiment(&s.problem, &s.grid, &phi, &cfg.phi.to_string(), cfg.trials, cfg.seed, cfg.tol)?;
    let code = certificate_report(&cert, report);
    Ok((code, certificate_table(&cert)))
}

fn gronwall(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table)> {
    let grid = Grid::new(cfg.psi, cfg.a, cfg.b, cfg.n)?;
    let len = grid.n() + 1;
    let v = vec![cfg.v; len];
    let g = vec![cfg.g; len];
    let u: Vec<f64> = gronwall_extremal(&grid, &v, &g, cfg.mu, 1e-14, 10_000)?
        .into_iter()
        .map(|x| x * cfg.inflate)
        .collect();
    let _ = writeln!(report, "v, g         {}, {}", fmt_num(cfg.v), fmt_num(cfg.g));
    let _ = writeln!(report, "u            extremal solution x {}", fmt_num(cfg.inflate));
    let _ = writeln!(report, "terms        {}", cfg.terms);

    let mut t = Table::new(&["t", "u", "v", "series_bound", "ml_bound", "pass"]);
    match gronwall_verify(&grid, &u, &v, &g, cfg.mu, cfg.terms) {
        Ok(r) => {
            for i in 0..len {
                let ml = r.ml_bound.as_ref().map_or(f64::NAN, |b| b[i]);
                let pass = !r.series_failures.contains(&i) && !r.ml_failures.contains(&i);
                t.push(vec![fmt_num(grid.t(i)), fmt_num(u[i]), fmt_num(v[i]), fmt_num(r.series_bound[i]), fmt_num(ml), pass.to_string()]);
            }
            let _ = writeln!(report, "hypothesis   satisfied");
            let _ = writeln!(report, "tail ratio   {}", fmt_num(r.tail_ratio));
            let _ = writeln!(report, "tail bound   {}", fmt_num(r.tail_estimate));
            let _ = writeln!(report, "slack        {}", fmt_num(r.slack));
            let _ = writeln!(report, "series fails {}", r.series_failures.len());
            let _ = writeln!(report, "ml fails     {}", r.ml_failures.len());
            let _ = writeln!(report, "pass         {}", r.holds());
            Ok((if r.holds() { EXIT_OK } else { EXIT_CERTIFICATE }, t))
        }
        Err(Error::HypothesisNotSatisfied { node, lhs, rhs }) => {
            for i in 0..len {
                t.push(vec![fmt_num(grid.t(i)), fmt_num(u[i]), fmt_num(v[i]), "nan".into(), "nan".into(), "false".into()]);
            }
            let _ = writeln!(
                report,
                "hypothesis   violated at node {node}: u = {} > {}",
                fmt_num(lhs),
                fmt_num(rhs)
            );
            let _ = writeln!(report, "pass         false");
            Ok((EXIT_CERTIFICATE, t))
        }
        Err(e) => Err(e),
    }
}

fn ml(cfg: &ExperimentConfig, report: &mut String) -> Result<(i32, Table, String)> {
    let (value, mode, terms) = if cfg.oracle {
        let terms = cfg.terms.max(oracle_terms(cfg.mu, cfg.z));
        (ml_oracle(cfg.mu, cfg.z, terms)?, "oracle", terms.to_string())
    } else {
        (ml_eval(&MlQuery::new(cfg.mu, cfg.z))?, "fast", String::new())
    };
    let _ = writeln!(report, "E_mu(z)      mu = {}, z = {}, mode = {mode}", fmt_num(cfg.mu), fmt_num(cfg.z));
    let _ = writeln!(report, "value        {}", fmt_num(value));
    let mut t = Table::new(&["mu", "z", "mode", "terms", "value"]);
    t.push(vec![fmt_num(cfg.mu), fmt_num(cfg.z), mode.into(), terms, fmt_num(value)]);
    Ok((EXIT_OK, t, fmt_num(value)))
}

/// Runs `command` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig, command: Command) -> Result<Outcome> {
    let start = Instant::now();
    let mut report = String::new();
    if command != Command::Ml {
        echo(cfg, command, &mut report);
    }
    let (code, table, stdout) = match command {
        Command::Solve => solve(cfg, &mut report).map(|(c, t)| (c, t, None))?,
        Command::Check => check(cfg, &mut report).map(|(c, t)| (c, t, None))?,
        Command::Uh => uh(cfg, &mut report).map(|(c, t)| (c, t, None))?,
        Command::Uhr => uhr(cfg, &mut report).map(|(c, t)| (c, t, None))?,
        Command::Gronwall => gronwall(cfg, &mut report).map(|(c, t)| (c, t, None))?,
        Command::Ml => ml(cfg, &mut report).map(|(c, t, s)| (c, t, Some(s)))?,
    };
    let _ = writeln!(report, "exit code    {code}");
    let _ = writeln!(report, "elapsed      {:.3} s", start.elapsed().as_secs_f64());
    Ok(Outcome { code, table, report, stdout })
}

/// Executes, writes outputs under `prefix` (if any) and returns the exit code.
pub fn run(cfg: &ExperimentConfig, command: Command, prefix: Option<&str>) -> i32 {
    let outcome = match execute(cfg, command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Overflow { ln_value, .. } = &e {
                eprintln!("ln of the value ≈ {}", fmt_num(*ln_value));
            }
            return exit_code(&e);
        }
    };
    if let Some(s) = &outcome.stdout {
        println!("{s}");
    }
    if let Some(prefix) = prefix {
        match write_outputs(prefix, &outcome.table, &outcome.report) {
            Ok((csv, rep)) => {
                if outcome.stdout.is_none() {
                    println!("wrote {} and {}", csv.display(), rep.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
        }
    }
    outcome.code
}
