//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line even when it passes.
//!
//! The `h = 1e-4` rungs take several minutes and only run when invoked with
//! `--include-ignored` / `--ignored` (or `INVSDE_SLOW=1`).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use invsde::autodiff::{gradient, jacobian, jacvec, VectorField};
use invsde::expr::Expr;
use invsde::geometry::{
    basis_matrix_columns, general_basis, lu_determinant, special_basis, time_extended_basis,
};
use invsde::harness::{
    catalog, convergence_study, export_report, invariant_error, CatalogEntry, ConvergenceTable,
    ReportFormat, RunConfig,
};
use invsde::simulate::{
    milstein_step, simulate_trajectory, sphere_analytic, sphere_rotation, wiener_increments,
    Integrator, NormalStream, SimConfig,
};
use invsde::synthesis::{
    convert_interpretation, sample_points, sigma_correction, Interpretation, SdeSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
const R: usize = 1000;
/// Allowed ratio between a Monte-Carlo estimate and its reference.
const FACTOR: f64 = 2.0;
const ORDER_ONE: (f64, f64) = (0.8, 1.2);
const ORDER_HALF: (f64, f64) = (0.35, 0.65);
const DET_TOL: f64 = 1e-9;
const GRAM_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
const SIGMA_TOL: f64 = 1e-10;
const ROUNDTRIP_TOL: f64 = 1e-12;
const SPHERE_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-6;
const BUDGET_SECS: f64 = 120.0;

// Published invariant drifts.
const CATENOID_EPS: [f64; 3] = [3.315e-2, 3.295e-3, 3.196e-4];
const CATENOID_B_EPS_H2: f64 = 3.116e-2;
const PARABOLA_EPS: [f64; 3] = [4.040e-4, 4.046e-5, 4.070e-6];

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// Collects sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    ok: bool,
    parts: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { ok: true, ..Default::default() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.ok = false;
            self.failed.push(what.clone());
        }
        self.parts.push(what);
    }

    fn done(self) -> Outcome {
        let detail = if self.ok {
            self.parts.join("; ")
        } else {
            format!("failed: {}", self.failed.join("; "))
        };
        outcome(self.ok, detail)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within_factor(est: f64, reference: f64) -> bool {
    est.is_finite() && est >= reference / FACTOR && est <= reference * FACTOR
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

fn run_config(e: &CatalogEntry, integrator: Integrator, x0: usize) -> RunConfig {
    RunConfig {
        system: Some(e.name.into()),
        integrator,
        x0: e.initial_states[x0].clone(),
        t0: e.t0,
        t_end: e.t_end,
    }
}

fn points_for(e: &CatalogEntry, count: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
    sample_points(&e.initial_states, 0.5, (e.t0, e.t_end), count, seed)
}

fn table_line(t: &ConvergenceTable) -> String {
    let eps: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("eps(h={:e})={:.4e} ±{:.1e} aborts={}", r.h, r.epsilon, r.stderr, r.aborts))
        .collect();
    format!("{}; p={:.3}", eps.join(", "), t.orders[0])
}

fn reference_ladder(
    c: &mut Checks,
    e: &CatalogEntry,
    integrator: Integrator,
    refs: &[f64],
) -> ConvergenceTable {
    let t = convergence_study(&e.system, &run_config(e, integrator, 0), &[1e-2, 1e-3], R, SEED)
        .expect("convergence study runs");
    for (row, &reference) in t.rows.iter().zip(refs) {
        c.check(
            within_factor(row.epsilon, reference),
            format!("eps(h={:e}) = {:.4e} vs {:.4e}", row.h, row.epsilon, reference),
        );
    }
    c.check(in_range(t.orders[0], ORDER_ONE), format!("p = {:.3}", t.orders[0]));
    t
}

fn criterion_1() -> Outcome {
    let e = catalog::catenoid();
    let start = Instant::now();
    let mut c = Checks::new();
    let t = reference_ladder(&mut c, &e, Integrator::Milstein, &CATENOID_EPS);
    let secs = start.elapsed().as_secs_f64();
    c.check(secs <= BUDGET_SECS, format!("runtime {secs:.1}s"));
    let mut o = c.done();
    o.detail = format!("{} [{}]", o.detail, table_line(&t));
    o
}

fn criterion_1_slow() -> Outcome {
    let mut c = Checks::new();
    let e = catalog::catenoid();
    let rep = invariant_error(&e.system, &run_config(&e, Integrator::Milstein, 0), 1e-4, R, SEED)
        .expect("run completes");
    c.check(
        within_factor(rep.epsilon, CATENOID_EPS[2]),
        format!("catenoid eps(h=1e-4) = {:.4e} vs {:.4e}", rep.epsilon, CATENOID_EPS[2]),
    );
    let p = catalog::dynamic_parabola();
    let rep = invariant_error(&p.system, &run_config(&p, Integrator::Artemiev, 0), 1e-4, R, SEED)
        .expect("run completes");
    c.check(
        within_factor(rep.epsilon, PARABOLA_EPS[2]),
        format!("parabola eps(h=1e-4) = {:.4e} vs {:.4e}", rep.epsilon, PARABOLA_EPS[2]),
    );
    c.done()
}

fn criterion_2() -> Outcome {
    let e = catalog::catenoid();
    let mut c = Checks::new();
    let x0 = &e.initial_states[1];
    c.check(x0 == &[1.0, 0.0, 0.0], format!("x0 = {x0:?}"));
    let basis = e
        .system
        .provenance()
        .expect("synthesized")
        .spec
        .basis_set(0.0, x0)
        .expect("basis evaluates");
    c.check(basis.is_degenerate(), format!("degenerate components {:?}", basis.degeneracy));
    match invariant_error(&e.system, &run_config(&e, Integrator::Milstein, 1), 1e-2, R, SEED) {
        Ok(rep) => c.check(
            within_factor(rep.epsilon, CATENOID_B_EPS_H2),
            format!(
                "eps(h=1e-2) = {:.4e} vs {:.4e}, aborts {}",
                rep.epsilon, CATENOID_B_EPS_H2, rep.aborts
            ),
        ),
        Err(err) => c.check(false, format!("simulation failed: {err}")),
    }
    c.done()
}

fn criterion_3() -> Outcome {
    let e = catalog::dynamic_parabola();
    let mut c = Checks::new();
    let t = reference_ladder(&mut c, &e, Integrator::Artemiev, &PARABOLA_EPS);
    let mut o = c.done();
    o.detail = format!("{} [{}]", o.detail, table_line(&t));
    o
}

fn criterion_4() -> Outcome {
    let e = catalog::sphere();
    let x0 = [e.initial_states[0][0], e.initial_states[0][1], e.initial_states[0][2]];
    let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 0.01;
    let steps = ((e.t_end - e.t0) / h).round() as usize;
    let (mut worst_norm, mut worst_det) = (0.0f64, 0.0f64);
    for path_index in 0..100 {
        let path = wiener_increments(SEED, path_index, steps, 1, h);
        for (k, y) in sphere_analytic(&x0, &path).iter().enumerate() {
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_norm = worst_norm.max(rel_err(r, r0));
            worst_det = worst_det.max((sphere_rotation(path.w(k)[0]).determinant() - 1.0).abs());
        }
    }
    let mut c = Checks::new();
    c.check(worst_norm <= SPHERE_TOL, format!("max | |X|/|x0| - 1 | = {worst_norm:.2e}"));
    c.check(worst_det <= SPHERE_TOL, format!("max |det - 1| = {worst_det:.2e}"));
    c.done()
}

fn random_gradient(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut chain, mut extended, mut gram, mut det) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 2..=10usize {
        for _ in 0..1000 {
            let g = random_gradient(&mut rng, n);
            let sq: f64 = g.iter().map(|v| v * v).sum();
            let interior: f64 = g[1..n - 1].iter().product();
            let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };

            let b = general_basis(&g).unwrap();
            let lu = lu_determinant(&basis_matrix_columns(&b, 0.0, &g));
            chain = chain.max(rel_err(lu, sign(n - 1) * sq * interior));

            let g0 = rng.gen_range(-2.0..2.0);
            let b = time_extended_basis(g0, &g).unwrap();
            let lu = lu_determinant(&basis_matrix_columns(&b, g0, &g));
            extended = extended.max(rel_err(lu, sign(n) * (g0 * g0 + sq) * interior));

            if matches!(n, 2 | 4 | 8) {
                let b = special_basis(&g).unwrap();
                let cols = basis_matrix_columns(&b, 0.0, &g);
                for i in 0..n {
                    for j in 0..n {
                        let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                        let want = if i == j { sq } else { 0.0 };
                        gram = gram.max((dot - want).abs() / sq);
                    }
                }
                det = det.max(rel_err(lu_determinant(&cols), sq.sqrt().powi(n as i32)));
            }
        }
    }
    let mut c = Checks::new();
    c.check(chain <= DET_TOL, format!("chain det rel err {chain:.2e}"));
    c.check(extended <= DET_TOL, format!("time-extended det rel err {extended:.2e}"));
    c.check(gram <= GRAM_TOL, format!("special Gram rel err {gram:.2e}"));
    c.check(det <= GRAM_TOL, format!("special det rel err {det:.2e}"));
    c.done()
}

fn max_sigma_error(
    system: &SdeSystem,
    points: &[(f64, Vec<f64>)],
    components: &[usize],
    closed: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let mut worst = 0.0f64;
    for (t, x) in points {
        let ad = sigma_correction(system, *t, x).unwrap();
        let want = closed(x);
        for &i in components {
            worst = worst.max((ad[i] - want[i]).abs() / want[i].abs().max(1.0));
        }
    }
    worst
}

fn criterion_6() -> Outcome {
    let mut c = Checks::new();
    for e in catalog::catalog() {
        let rep = e.validate(1000, SEED);
        c.check(
            rep.passes(RESIDUAL_TOL),
            format!("{} residual {:.1e} ({} failures)", e.name, rep.max(), rep.failures),
        );
    }
    let cat = catalog::catenoid();
    let err = max_sigma_error(&cat.system, &points_for(&cat, 100, SEED), &[0, 2], |x| {
        let s = (2.0 * x[2]).sinh();
        vec![-2.0 * x[0] / 9.0 - s / 30.0, f64::NAN, x[0] / 15.0 + s / 100.0]
    });
    c.check(err <= SIGMA_TOL, format!("catenoid Sigma1,3 {err:.1e}"));
    let par = catalog::dynamic_parabola();
    let err = max_sigma_error(&par.system, &points_for(&par, 100, SEED), &[0, 1], |_| {
        vec![-1.0 / 25.0, 0.0]
    });
    c.check(err <= SIGMA_TOL, format!("parabola Sigma {err:.1e}"));
    let sph = catalog::sphere();
    let err = max_sigma_error(&sph.system, &points_for(&sph, 100, SEED), &[0, 1, 2], |x| {
        vec![(-x[0] - x[2]) / 2.0, -x[1], (-x[0] - x[2]) / 2.0]
    });
    c.check(err <= SIGMA_TOL, format!("sphere Sigma {err:.1e}"));
    c.done()
}

fn max_drift_gap(a: &SdeSystem, b: &SdeSystem, points: &[(f64, Vec<f64>)]) -> f64 {
    let mut worst = 0.0f64;
    for (t, x) in points {
        let fa = a.drift(*t, x).unwrap();
        let fb = b.drift(*t, x).unwrap();
        for (u, v) in fa.iter().zip(&fb) {
            worst = worst.max((u - v).abs() / v.abs().max(1.0));
        }
    }
    worst
}

/// `Y + h f + √h σ ξ + (h/2)(∂σ/∂x)σ (ξ² − 1)` with the Itô drift `f`.
fn ito_milstein(ito: &SdeSystem, t: f64, y: &[f64], h: f64, xi: f64) -> Vec<f64> {
    let f = ito.drift(t, y).unwrap();
    let sigma = ito.diffusion(t, y).unwrap().remove(0);
    let dss = jacvec(&ito.diffusion_column(0), t, y, &sigma).unwrap();
    (0..y.len())
        .map(|i| y[i] + h * f[i] + h.sqrt() * sigma[i] * xi + 0.5 * h * dss[i] * (xi * xi - 1.0))
        .collect()
}

fn criterion_7() -> Outcome {
    let mut c = Checks::new();
    for e in catalog::catalog() {
        let pts = points_for(&e, 1000, SEED);
        let here = e.system.interpretation();
        let there = convert_interpretation(&e.system, here.other());
        let back = convert_interpretation(&there, here);
        let generic = max_drift_gap(&back, &e.system, &pts);
        let via = e
            .system
            .in_interpretation(here.other())
            .and_then(|s| s.in_interpretation(here))
            .unwrap();
        let synthesized = max_drift_gap(&via, &e.system, &pts);
        let worst = generic.max(synthesized);
        c.check(worst <= ROUNDTRIP_TOL, format!("{} roundtrip {worst:.1e}", e.name));

        if e.system.s() == 1 {
            let strat = e.system.in_interpretation(Interpretation::Stratonovich).unwrap();
            let ito = e.system.in_interpretation(Interpretation::Ito).unwrap();
            let mut normals = NormalStream::new(SEED, 7);
            let mut worst = 0.0f64;
            for (t, y) in &pts {
                let xi = normals.next_normal();
                let h = 0.01;
                let a = milstein_step(&strat, *t, y, h, xi).unwrap();
                let b = ito_milstein(&ito, *t, y, h, xi);
                for (u, v) in a.iter().zip(&b) {
                    worst = worst.max((u - v).abs() / v.abs().max(1.0));
                }
            }
            c.check(worst <= ROUNDTRIP_TOL, format!("{} Milstein forms {worst:.1e}", e.name));
        }
    }
    c.done()
}

/// Worst relative gap between an AD Jacobian and central differences.
fn fd_gap<F: VectorField + ?Sized>(field: &F, points: &[(f64, Vec<f64>)]) -> f64 {
    let mut worst = 0.0f64;
    for (t, x) in points {
        let ad = jacobian(field, *t, x).unwrap();
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            let fp = field.eval_at(*t, &xp).unwrap();
            let fm = field.eval_at(*t, &xm).unwrap();
            for i in 0..field.dim() {
                let fd = (fp[i] - fm[i]) / (2.0 * FD_STEP);
                worst = worst.max((ad.get(i, j) - fd).abs() / ad.get(i, j).abs().max(1.0));
            }
        }
    }
    worst
}

fn gradient_gap(m: &Expr, points: &[(f64, Vec<f64>)]) -> f64 {
    let mut worst = 0.0f64;
    for (t, x) in points {
        let (g0, g) = gradient(m, *t, x).unwrap();
        let fd_t = (m.eval(t + FD_STEP, x).unwrap() - m.eval(t - FD_STEP, x).unwrap()) / (2.0 * FD_STEP);
        worst = worst.max((g0 - fd_t).abs() / g0.abs().max(1.0));
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            let fd = (m.eval(*t, &xp).unwrap() - m.eval(*t, &xm).unwrap()) / (2.0 * FD_STEP);
            worst = worst.max((g[j] - fd).abs() / g[j].abs().max(1.0));
        }
    }
    worst
}

fn criterion_8() -> Outcome {
    let mut c = Checks::new();
    for e in catalog::catalog() {
        let pts = points_for(&e, 1000, SEED);
        let mut worst = gradient_gap(&e.first_integral, &pts);
        for interp in [Interpretation::Ito, Interpretation::Stratonovich] {
            let sys = e.system.in_interpretation(interp).unwrap();
            worst = worst.max(fd_gap(&sys.drift_field(), &pts));
            for l in 0..sys.s() {
                worst = worst.max(fd_gap(&sys.diffusion_column(l), &pts));
            }
        }
        c.check(worst <= FD_TOL, format!("{} {worst:.1e}", e.name));
    }
    c.done()
}

fn criterion_9() -> Outcome {
    let mut c = Checks::new();
    let it = catalog::iterated_integrals();
    let t = convergence_study(&it.system, &run_config(&it, Integrator::Euler, 0), &[1e-2, 1e-3], R, SEED)
        .expect("study runs");
    c.check(
        in_range(t.orders[0], ORDER_HALF),
        format!("iterated-integrals Euler p = {:.3} [{}]", t.orders[0], table_line(&t)),
    );
    // X2 + X4 = X1 X3 holds exactly for the true solution: check the entry's
    // first integral is that identity.
    let x = [0.7, -0.3, 1.9, 1.63];
    let identity = x[1] + x[3] - x[0] * x[2];
    c.check(
        (it.first_integral.eval(0.0, &x).unwrap() - identity).abs() < 1e-15,
        "M = X2 + X4 - X1 X3",
    );
    let q = catalog::quaternion([0.1; 3], [0.1; 3]);
    let t = convergence_study(&q.system, &run_config(&q, Integrator::Euler, 0), &[1e-2, 1e-3], R, SEED)
        .expect("study runs");
    let (e2, e3) = (t.rows[0].epsilon, t.rows[1].epsilon);
    c.check(e3 < e2, format!("quaternion eps {e2:.3e} -> {e3:.3e}"));
    c.done()
}

fn criterion_10() -> Outcome {
    let mut c = Checks::new();
    let e = catalog::catenoid();
    let cfg = run_config(&e, Integrator::Milstein, 0);
    let study = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| convergence_study(&e.system, &cfg, &[2e-2, 1e-2], 200, 99).unwrap())
    };
    let a = study(1);
    let b = study(1);
    let d = study(4);
    for fmt in [ReportFormat::Csv, ReportFormat::Json] {
        let (ra, rb, rd) = (export_report(&a, fmt), export_report(&b, fmt), export_report(&d, fmt));
        c.check(ra == rb && ra == rd, format!("{fmt:?} reports identical across runs and pool sizes"));
    }
    let bits = |t: &ConvergenceTable| t.rows.iter().map(|r| r.epsilon.to_bits()).collect::<Vec<_>>();
    c.check(bits(&a) == bits(&d), "epsilon bit patterns");
    let sim = SimConfig {
        t0: 0.0,
        t_end: 1.0,
        h: 1e-3,
        x0: e.initial_states[0].clone(),
        integrator: Integrator::Milstein,
        seed: 5,
        trajectory_index: 3,
    };
    let t1 = simulate_trajectory(&e.system, &sim).unwrap().to_csv();
    let t2 = simulate_trajectory(&e.system, &sim).unwrap().to_csv();
    c.check(t1 == t2, "trajectory CSV");
    c.done()
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    // libtest-style probes (e.g. `--list`) have nothing to enumerate here.
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let slow = args.iter().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("INVSDE_SLOW").is_ok_and(|v| v == "1");

    type Criterion = (&'static str, fn() -> Outcome);
    let mut criteria: Vec<Criterion> = vec![
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
        ("10", criterion_10),
    ];
    if slow {
        criteria.push(("1 (h=1e-4)", criterion_1_slow));
    }

    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            });
        if !o.ok {
            failures += 1;
        }
        println!(
            "criterion {name:<10} {} ({:.1}s) {}",
            if o.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if !slow {
        println!("criterion 1 (h=1e-4) SKIP  slow rung; run with --include-ignored");
    }
    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    }
}
