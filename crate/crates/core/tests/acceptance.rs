use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use std::sync::Arc;
use std::time::Instant;

use psihilfer::frac_calc::{
    frac_integral, frac_integral_plain, frac_integral_weighted, hilfer_derivative, xi_of, Grid, WeightedFunction,
};
use psihilfer::mittag_leffler::{mittag_leffler, ml_oracle, oracle_terms};
use psihilfer::psi::PsiFunction;
use psihilfer::solver::{contraction_factor, picard_solve, ProblemSpec, RhsFamily};
use psihilfer::stability::{gronwall_extremal, gronwall_verify, trial_seed, uh_experiment, uhr_experiment, DEFAULT_TERMS};
use psihilfer::volterra::{
    causality_check, lipschitz_check, HadamardOperator, HadamardWeight, KernelFamily, Lipschitz, StateOperator,
    VolterraOperator, ZeroOperator,
};
use psihilfer::Error;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    // direct write, so the line survives libtest's output capture
    let line = format!("criterion {id:>2} {:<4} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::Write::write_all(&mut std::io::stderr(), line.as_bytes());
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn psi_cases() -> Vec<(&'static str, PsiFunction, f64, f64)> {
    vec![
        ("identity", PsiFunction::identity(), 0.0, 1.0),
        ("hadamard", PsiFunction::hadamard(), 1.0, std::f64::consts::E),
        ("power2", PsiFunction::power(2.0).unwrap(), 0.5, 1.5),
    ]
}

fn tgamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[test]
fn criterion_01_power_rule() {
    let start = Instant::now();
    let orders = [0.25, 0.5, 0.75, 1.0];
    let n = 2048;
    let mut worst = 0.0f64;
    for (_, psi, a, b) in psi_cases() {
        let grid = Grid::shared(psi, a, b, n).unwrap();
        for &xi in &orders {
            let x = WeightedFunction::constant(Arc::clone(&grid), xi, 1.0).unwrap();
            for &mu in &orders {
                let got = frac_integral(mu, &x).unwrap();
                let c = tgamma(xi) / tgamma(mu + xi);
                for i in n / 2..=n {
                    let exact = c * grid.offset(i).powf(mu + xi - 1.0);
                    worst = worst.max((got[i] - exact).abs() / exact.abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(1, "power rule", worst <= 1e-5 && secs <= 10.0, &format!("max rel err {worst:.2e}, {secs:.2} s"));
}

/// (μ, η) pairs for the composition identities.
const COMPOSITION_CASES: [(f64, f64); 4] = [(0.5, 0.0), (0.5, 0.5), (0.3, 1.0), (0.75, 0.25)];

/// sup_i |ω_i·I^μ(Dx)_i − (u_i − u_0)| for u a cubic in τ'.
fn left_inverse_error(psi: PsiFunction, a: f64, b: f64, mu: f64, eta: f64, n: usize) -> f64 {
    let xi = xi_of(mu, eta).unwrap();
    let grid = Grid::shared(psi, a, b, n).unwrap();
    let poly = |s: f64| 1.0 + 0.8 * s - 0.6 * s * s + 0.3 * s * s * s;
    let x = WeightedFunction::from_offset_fn(Arc::clone(&grid), xi, poly).unwrap();
    let d = hilfer_derivative(mu, eta, &x).unwrap();
    let back = frac_integral_plain(&grid, mu, &d).unwrap();
    (1..=n)
        .map(|i| (grid.weight(xi, i) * back[i] - (x.u()[i] - x.u()[0])).abs())
        .fold(0.0, f64::max)
}

/// sup_i |D(I^μ x)_i − x_i| for x = τ'^{1−μ}·p(τ'), so that I^μ x is a polynomial in τ'.
fn right_inverse_error(psi: PsiFunction, a: f64, b: f64, mu: f64, eta: f64, n: usize) -> f64 {
    let grid = Grid::shared(psi, a, b, n).unwrap();
    let u = |s: f64| s * (1.0 - 0.5 * s + 0.25 * s * s);
    let x = WeightedFunction::from_offset_fn(Arc::clone(&grid), 1.0 - mu, u).unwrap();
    let y = frac_integral_weighted(mu, &x, 1.0).unwrap();
    let d = hilfer_derivative(mu, eta, &y).unwrap();
    (1..=n).map(|i| (d[i] - x.x(i)).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_02_composition_identities() {
    let sizes = [512, 1024, 2048];
    let mut worst_err = 0.0f64;
    let mut worst_order = f64::INFINITY;
    let mut lines = Vec::new();
    for (label, psi, a, b) in psi_cases() {
        for &(mu, eta) in &COMPOSITION_CASES {
            for (kind, f) in [
                ("I∘D", left_inverse_error as fn(PsiFunction, f64, f64, f64, f64, usize) -> f64),
                ("D∘I", right_inverse_error),
            ] {
                let errs: Vec<f64> = sizes.iter().map(|&n| f(psi, a, b, mu, eta, n)).collect();
                let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
                let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
                worst_err = worst_err.max(errs[2]);
                // differences at round-off level carry no order information
                if errs[2] > 1e-11 {
                    worst_order = worst_order.min(order);
                }
                lines.push(format!("{label} μ={mu} η={eta} {kind}: err {:.2e}, order {order:.2}", errs[2]));
            }
        }
    }
    for l in &lines {
        println!("    {l}");
    }
    verdict(
        2,
        "composition identities",
        worst_err <= 5e-3 && worst_order >= 0.85,
        &format!("max err {worst_err:.2e} at n=2048, min order {worst_order:.2}"),
    );
}

#[test]
fn criterion_03_mittag_leffler() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut overflowed = 0usize;
    for k in 1..=10 {
        let mu = k as f64 / 10.0;
        for j in 0..=300 {
            let z = j as f64 * 0.1;
            let fast = mittag_leffler(mu, z);
            let oracle = ml_oracle(mu, z, oracle_terms(mu, z));
            match (fast, oracle) {
                (Ok(f), Ok(o)) => {
                    worst = worst.max((f - o).abs() / o.abs());
                    compared += 1;
                }
                // beyond f64 the oracle either overflows or cannot reach its tail
                (Err(Error::Overflow { ln_value, .. }), Err(_)) if ln_value > f64::MAX.ln() => overflowed += 1,
                (f, o) => panic!("μ = {mu}, z = {z}: fast {f:?} vs oracle {o:?}"),
            }
        }
    }
    let mut exp_worst = 0.0f64;
    for j in 0..=400 {
        let z = j as f64 * 0.05;
        let e = mittag_leffler(1.0, z).unwrap();
        exp_worst = exp_worst.max((e - z.exp()).abs() / z.exp());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "Mittag-Leffler",
        worst <= 1e-8 && exp_worst <= 1e-12 && compared >= 300 && secs <= 5.0,
        &format!(
            "{compared} points compared (max rel {worst:.2e}), {overflowed} beyond f64 in both, E_1 vs exp {exp_worst:.2e}, {secs:.2} s"
        ),
    );
}

fn section3_example() -> ProblemSpec {
    ProblemSpec::new(
        PsiFunction::identity(),
        0.5,
        1.0,
        0.0,
        1.0,
        1.0,
        Arc::new(RhsFamily::Linear(0.1)),
        Arc::new(StateOperator { c: 0.5 }),
    )
    .unwrap()
}

/// Hadamard problem on [1, e] with K = 0.5·x, μ = 0.5, η = 0.
fn hadamard_example(n: usize) -> (ProblemSpec, Arc<Grid>, HadamardOperator) {
    let (a, b) = (1.0, std::f64::consts::E);
    let grid = Grid::shared(PsiFunction::hadamard(), a, b, n).unwrap();
    let xi = xi_of(0.5, 0.0).unwrap();
    let op = HadamardOperator::new(
        0.5,
        Arc::new(KernelFamily::Linear(0.5)),
        HadamardWeight::InvS,
        Arc::clone(&grid),
        xi,
    )
    .unwrap();
    let p = ProblemSpec::new(
        PsiFunction::hadamard(),
        0.5,
        0.0,
        a,
        b,
        1.0,
        Arc::new(RhsFamily::Linear(0.1)),
        Arc::new(op.clone()),
    )
    .unwrap()
    .with_lipschitz(Lipschitz::Const(0.1), Lipschitz::Const(op.raw_lk()))
    .unwrap();
    (p, grid, op)
}

#[test]
fn criterion_04_contraction() {
    let p = section3_example();
    let grid = p.grid(512).unwrap();
    let q3 = contraction_factor(&p);
    let r3 = (0..50)
        .map(|k| psihilfer::cli::run::operator_ratio(&p, &grid, trial_seed(7, k)).unwrap())
        .fold(0.0, f64::max);

    let (ph, hgrid, _) = hadamard_example(512);
    let qh = contraction_factor(&ph);
    let rh = (0..50)
        .map(|k| psihilfer::cli::run::operator_ratio(&ph, &hgrid, trial_seed(11, k)).unwrap())
        .fold(0.0, f64::max);

    let ok = (q3 - 0.16927).abs() < 2e-5
        && (qh - 0.26587).abs() < 5e-6
        && r3 <= q3 * 1.01
        && rh <= qh * 1.01;
    verdict(
        4,
        "contraction certification",
        ok,
        &format!("identity q {q3:.6} max ratio {r3:.6}; hadamard q {qh:.6} max ratio {rh:.6} (50 pairs each)"),
    );
}

/// Σ_{k<100} c^k t^{μk}/Γ(μk + 1).
fn series_oracle(c: f64, mu: f64, t: f64) -> f64 {
    (0..100).map(|k| c.powi(k) * t.powf(mu * k as f64) / tgamma(mu * k as f64 + 1.0)).sum()
}

fn suite() -> Vec<(&'static str, ProblemSpec)> {
    let linear = |psi: PsiFunction, mu: f64, eta: f64, a: f64, b: f64, f: RhsFamily, op: Arc<dyn VolterraOperator>| {
        ProblemSpec::new(psi, mu, eta, a, b, 1.0, Arc::new(f), op).unwrap()
    };
    vec![
        ("linear", linear(PsiFunction::identity(), 0.5, 1.0, 0.0, 1.0, RhsFamily::Linear(0.1), Arc::new(ZeroOperator))),
        ("state", section3_example()),
        (
            "sin-mix ξ<1",
            linear(PsiFunction::identity(), 0.6, 0.2, 0.0, 1.0, RhsFamily::SinMix, Arc::new(StateOperator { c: 0.3 })),
        ),
        (
            "power Ψ",
            linear(PsiFunction::power(2.0).unwrap(), 0.4, 0.5, 0.5, 1.5, RhsFamily::Linear(0.2), Arc::new(ZeroOperator)),
        ),
        ("hadamard", hadamard_example(256).0),
    ]
}

#[test]
fn criterion_05_solver_oracle() {
    let p = suite().remove(0).1;
    let grid = p.grid(2048).unwrap();
    let (x, _) = picard_solve(&p, &grid, 1e-12, 200).unwrap();
    let mut worst = 0.0f64;
    for t in [0.25, 0.5, 1.0] {
        let i = (t * 2048.0) as usize;
        let exact = series_oracle(0.1, 0.5, t);
        worst = worst.max((x.x(i) - exact).abs() / exact);
    }

    let tol = 1e-8;
    let mut bound_ok = true;
    let mut notes = Vec::new();
    for (name, p) in suite() {
        let grid = p.grid(256).unwrap();
        let (xk, d) = picard_solve(&p, &grid, tol, 200).unwrap();
        let (xref, _) = picard_solve(&p, &grid, tol / 100.0, 400).unwrap();
        let err = xk.distance(&xref).unwrap();
        // the reference itself is only within q/(1−q)·tol/100 of the fixed point
        let q = d.contraction_q;
        let ok = err <= d.aposteriori_bound + q / (1.0 - q) * tol / 100.0;
        bound_ok &= ok;
        notes.push(format!("{name} {err:.1e}≤{:.1e}", d.aposteriori_bound));
    }
    verdict(
        5,
        "solver oracle and a-posteriori bound",
        worst <= 1e-4 && bound_ok,
        &format!("series rel err {worst:.2e}; {}", notes.join(", ")),
    );
}

fn linear_problem(b: f64) -> ProblemSpec {
    ProblemSpec::new(
        PsiFunction::identity(),
        0.5,
        1.0,
        0.0,
        b,
        1.0,
        Arc::new(RhsFamily::Linear(0.1)),
        Arc::new(ZeroOperator),
    )
    .unwrap()
}

#[test]
fn criterion_06_ulam_hyers() {
    let start = Instant::now();
    let p = linear_problem(1.0);
    let grid = p.grid(1024).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut control_caught = true;
    for eps in [1e-2, 1e-3] {
        let cert = uh_experiment(&p, &grid, eps, 20, 2024, 1e-12).unwrap();
        ok &= cert.pass && cert.trials.len() == 20;
        let control = cert.with_constant(cert.c / 100.0);
        control_caught &= control.trials.iter().any(|t| !t.pass);
        parts.push(format!("ε={eps:e}: c {:.4}, max ratio {:.3e}", cert.c, cert.max_observed_ratio));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        6,
        "Ulam-Hyers certificate",
        ok && control_caught && secs <= 60.0,
        &format!("{}; c/100 control caught: {control_caught}; {secs:.2} s", parts.join("; ")),
    );
}

#[test]
fn criterion_07_ulam_hyers_rassias() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, eta) in [("ξ=1", 1.0), ("ξ=0.75", 0.5)] {
        let p = ProblemSpec::new(
            PsiFunction::identity(),
            0.5,
            eta,
            0.0,
            5.0,
            1.0,
            Arc::new(RhsFamily::Linear(0.05)),
            Arc::new(ZeroOperator),
        )
        .unwrap();
        let grid = p.grid(1024).unwrap();
        let phi: Vec<f64> = grid.nodes().iter().map(|t| 1.0 + t).collect();
        let cert = uhr_experiment(&p, &grid, &phi, "affine:1:1", 10, 99, 1e-12).unwrap();
        ok &= cert.pass && cert.trials.len() == 10;
        parts.push(format!("{label}: c_φ {:.4}, max pointwise ratio {:.3e}", cert.c, cert.max_observed_ratio));
    }
    verdict(7, "Ulam-Hyers-Rassias certificate", ok, &parts.join("; "));
}

#[test]
fn criterion_08_gronwall() {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, psi, a, b) in psi_cases() {
        let grid = Grid::new(psi, a, b, 1024).unwrap();
        let len = grid.n() + 1;
        let v: Vec<f64> = grid.nodes().iter().map(|t| 1.0 + 0.5 * (t - a)).collect();
        let g = vec![0.3; len];
        let u = gronwall_extremal(&grid, &v, &g, 0.5, 1e-14, 1000).unwrap();
        let r = gronwall_verify(&grid, &u, &v, &g, 0.5, DEFAULT_TERMS).unwrap();
        let both = r.holds() && r.ml_bound.is_some();
        let inflated: Vec<f64> = u.iter().map(|x| 10.0 * x).collect();
        let rejected = matches!(
            gronwall_verify(&grid, &inflated, &v, &g, 0.5, DEFAULT_TERMS),
            Err(Error::HypothesisNotSatisfied { .. })
        );
        ok &= both && rejected;
        parts.push(format!("{label}: bounds hold {both}, inflated rejected {rejected}"));
    }
    verdict(8, "Gronwall verifier", ok, &parts.join("; "));
}

/// Reads one node ahead of the one it reports.
#[derive(Debug)]
struct Peek;

impl VolterraOperator for Peek {
    fn name(&self) -> String {
        "peek".into()
    }

    fn apply(&self, x: &WeightedFunction) -> psihilfer::Result<Vec<f64>> {
        let n = x.grid().n();
        Ok((0..=n).map(|i| x.u()[(i + 1).min(n)]).collect())
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Const(1.0)
    }
}

#[test]
fn criterion_09_causality() {
    let id = Grid::shared(PsiFunction::identity(), 0.0, 1.0, 256).unwrap();
    let had = Grid::shared(PsiFunction::hadamard(), 1.0, 3.0, 256).unwrap();
    let mut ops: Vec<(String, Box<dyn VolterraOperator>, Arc<Grid>, f64)> = vec![
        ("zero".into(), Box::new(ZeroOperator), Arc::clone(&id), 0.7),
        ("state".into(), Box::new(StateOperator { c: 0.5 }), Arc::clone(&id), 0.7),
    ];
    for kernel in [KernelFamily::Linear(0.5), KernelFamily::Sin] {
        for weight in [HadamardWeight::InvS, HadamardWeight::One] {
            let op = HadamardOperator::new(0.5, Arc::new(kernel), weight, Arc::clone(&had), 0.6).unwrap();
            ops.push((format!("hadamard {kernel} w={weight}"), Box::new(op), Arc::clone(&had), 0.6));
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (name, op, grid, xi)) in ops.iter().enumerate() {
        let c = causality_check(op.as_ref(), grid, *xi, 100, 1000 + k as u64).unwrap();
        let l = lipschitz_check(op.as_ref(), grid, *xi, 100, 2000 + k as u64).unwrap();
        ok &= c.violations.is_empty() && l.violations.is_empty();
        parts.push(format!("{name}: {} causality / {} Lipschitz violations", c.violations.len(), l.violations.len()));
    }
    let caught = !causality_check(&Peek, &id, 1.0, 100, 5).unwrap().violations.is_empty();
    verdict(9, "causality", ok && caught, &format!("{}; acausal double caught: {caught}", parts.join("; ")));
}

const CONFIGS: &[(&str, &str)] = &[
    ("solve", "psi = identity\nmu = 0.5\neta = 0.5\na = 0\nb = 1\ndelta = 1\nf = sin-mix\nvolterra = state:0.5\nn = 256\n"),
    (
        "check",
        "psi = hadamard\nmu = 0.5\neta = 0\na = 1\nb = 2.718281828459045\ndelta = 1\nf = linear:0.1\nvolterra = hadamard\nkernel = linear:0.5\nn = 256\ntrials = 50\nseed = 3\n",
    ),
    ("uh", "psi = identity\nmu = 0.5\neta = 1\na = 0\nb = 1\ndelta = 1\nf = linear:0.1\nepsilon = 0.001\nn = 256\ntrials = 8\nseed = 5\n"),
    (
        "uhr",
        "psi = power:2\nmu = 0.5\neta = 0.5\na = 0.5\nhorizon = 2\ndelta = 1\nf = linear:0.1\nphi = affine:1:1\nn = 256\ntrials = 8\nseed = 6\n",
    ),
    ("gronwall", "psi = identity\nmu = 0.5\na = 0\nb = 1\nv = 1\ng = 0.2\nn = 256\n"),
    ("ml", "mu = 0.3\nz = 4.5\noracle = true\n"),
];

fn run_cli(dir: &Path, cmd: &str, threads: &str, tag: &str) -> Vec<u8> {
    let cfg = dir.join(format!("{cmd}.cfg"));
    let prefix = dir.join(format!("{cmd}-{tag}"));
    let status = Proc::new(env!("CARGO_BIN_EXE_psihilfer"))
        .args([cmd, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&prefix)
        .env("PSIHILFER_THREADS", threads)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(PathBuf::from(format!("{}.csv", prefix.display()))).unwrap()
}

#[test]
fn criterion_10_determinism() {
    let dir = std::env::temp_dir().join(format!("psihilfer-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (cmd, text) in CONFIGS {
        std::fs::write(dir.join(format!("{cmd}.cfg")), text).unwrap();
        let runs = [
            run_cli(&dir, cmd, "1", "t1a"),
            run_cli(&dir, cmd, "1", "t1b"),
            run_cli(&dir, cmd, "4", "t4a"),
            run_cli(&dir, cmd, "4", "t4b"),
        ];
        let same = runs.iter().all(|r| r == &runs[0]) && !runs[0].is_empty();
        ok &= same;
        parts.push(format!("{cmd} {}", if same { "identical" } else { "DIFFERS" }));
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(10, "determinism", ok, &parts.join(", "));
}
