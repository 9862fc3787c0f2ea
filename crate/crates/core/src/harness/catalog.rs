use std::fmt::Write as _;

use crate::autodiff::jacobian;
use crate::expr::Expr;
use crate::simulate::Integrator;
use crate::synthesis::{
    invariance_residuals, sample_points, BasisChoice, CoefficientChoice, Interpretation,
    InvariantSpec, ResidualReport, SdeSystem, Synthesizer,
};

/// Published error estimate for one (integrator, initial state, h).
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub integrator: Integrator,
    /// Index into [`CatalogEntry::initial_states`].
    pub x0: usize,
    pub h: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub system: SdeSystem,
    pub first_integral: Expr,
    pub initial_states: Vec<Vec<f64>>,
    pub t0: f64,
    pub t_end: f64,
    /// Applicable integrators; the first is the default.
    pub integrators: Vec<Integrator>,
    pub references: Vec<Reference>,
    pub notes: Vec<String>,
}

impl CatalogEntry {
    pub fn default_integrator(&self) -> Integrator {
        self.integrators[0]
    }

    /// Residual check at `count` points in boxes around the initial states.
    pub fn validate(&self, count: usize, seed: u64) -> ResidualReport {
        let pts = sample_points(&self.initial_states, 0.5, (self.t0, self.t_end), count, seed);
        invariance_residuals(&self.system, &self.first_integral, &pts)
    }

    pub fn reference(&self, integrator: Integrator, x0: usize, h: f64) -> Option<f64> {
        self.references
            .iter()
            .find(|r| r.integrator == integrator && r.x0 == x0 && (r.h - h).abs() <= 1e-12 * h)
            .map(|r| r.epsilon)
    }
}

/// Residual tolerance every entry must meet on load.
pub const CATALOG_RESIDUAL_TOL: f64 = 1e-10;

pub const NAMES: [&str; 5] = [
    "catenoid",
    "dynamic-parabola",
    "sphere",
    "quaternion",
    "iterated-integrals",
];

/// All built-in systems, each checked against its first integral.
pub fn catalog() -> Vec<CatalogEntry> {
    let entries = vec![
        catenoid(),
        dynamic_parabola(),
        sphere(),
        quaternion([0.1; 3], [0.1; 3]),
        iterated_integrals(),
    ];
    for e in &entries {
        let rep = e.validate(1000, 1);
        assert!(
            rep.passes(CATALOG_RESIDUAL_TOL),
            "catalog entry {} fails its invariance check: max residual {:e}, {} failures",
            e.name,
            rep.max(),
            rep.failures
        );
    }
    entries
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown catalog entry `{name}`{}", suggestion_text(.suggestions))]
pub struct UnknownEntry {
    pub name: String,
    pub suggestions: Vec<&'static str>,
}

fn suggestion_text(s: &[&str]) -> String {
    if s.is_empty() {
        format!("; available: {}", NAMES.join(", "))
    } else {
        format!("; did you mean {}?", s.join(" or "))
    }
}

pub fn find(name: &str) -> Result<CatalogEntry, UnknownEntry> {
    if let Some(e) = catalog().into_iter().find(|e| e.name == name) {
        return Ok(e);
    }
    let lower = name.to_lowercase();
    let suggestions = NAMES
        .iter()
        .copied()
        .filter(|n| strsim::levenshtein(n, &lower) <= 3 || n.contains(&lower) && lower.len() >= 3)
        .collect();
    Err(UnknownEntry {
        name: name.to_string(),
        suggestions,
    })
}

fn p(s: &str) -> Expr {
    s.parse().expect("catalog expression")
}

fn synthesize(
    n: usize,
    m: &str,
    basis: BasisChoice,
    s: usize,
    u: &[(usize, usize, Expr)],
    interpretation: Interpretation,
) -> SdeSystem {
    let spec = InvariantSpec::new(n, p(m), basis).expect("catalog spec");
    let mut choice = CoefficientChoice::new(n, s);
    for (j, l, e) in u {
        choice.set(*j, *l, e.clone()).expect("catalog coefficient");
    }
    SdeSystem::synthesize(Synthesizer::new(spec, choice).expect("catalog"), interpretation)
}

fn milstein_refs(x0: usize, eps: [f64; 3]) -> impl Iterator<Item = Reference> {
    [1e-2, 1e-3, 1e-4]
        .into_iter()
        .zip(eps)
        .map(move |(h, epsilon)| Reference {
            integrator: Integrator::Milstein,
            x0,
            h,
            epsilon,
        })
}

pub fn catenoid() -> CatalogEntry {
    let m = "x1^2 + x2^2 - cosh(x3)^2";
    let system = synthesize(
        3,
        m,
        BasisChoice::General,
        1,
        &[(1, 0, p("1/5")), (1, 1, p("1/3")), (2, 1, p("1/10"))],
        Interpretation::Stratonovich,
    );
    CatalogEntry {
        name: "catenoid",
        summary: "surface x1^2 + x2^2 = cosh^2(x3), chain basis, scalar noise",
        first_integral: p(m),
        system,
        initial_states: vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]],
        t0: 0.0,
        t_end: 10.0,
        integrators: vec![Integrator::Milstein, Integrator::Artemiev, Integrator::Euler],
        references: milstein_refs(0, [3.315e-2, 3.295e-3, 3.196e-4])
            .chain(milstein_refs(1, [3.116e-2, 3.262e-3, 3.393e-4]))
            .collect(),
        notes: vec!["the chain basis degenerates at x0 = (1, 0, 0), where g2 = 0".into()],
    }
}

pub fn dynamic_parabola() -> CatalogEntry {
    let m = "x1 + x2^2 + cos(2*t)";
    let system = synthesize(
        2,
        m,
        BasisChoice::General,
        1,
        &[(1, 0, p("1/10")), (1, 1, p("1/5"))],
        Interpretation::Stratonovich,
    );
    let references = [(1e-2, 4.040e-4), (1e-3, 4.046e-5), (1e-4, 4.070e-6)]
        .into_iter()
        .map(|(h, epsilon)| Reference {
            integrator: Integrator::Artemiev,
            x0: 0,
            h,
            epsilon,
        })
        .collect();
    CatalogEntry {
        name: "dynamic-parabola",
        summary: "moving level set x1 + x2^2 + cos 2t = 3",
        first_integral: p(m),
        system,
        initial_states: vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![0.0, std::f64::consts::SQRT_2]],
        t0: 0.0,
        t_end: 6.28,
        integrators: vec![Integrator::Artemiev, Integrator::Milstein, Integrator::Euler],
        references,
        notes: vec!["u[1,1] = 1/5, so sigma = (2 x2/5, -1/5) and Sigma = (-1/25, 0)".into()],
    }
}

fn format_matrix(name: &str, rows: &[Vec<f64>]) -> String {
    let mut s = format!("{name} =");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{:>6}", crate::fmt_sig(*v))).collect();
        let _ = write!(s, "\n  [{}]", cells.join(" "));
    }
    s
}

pub fn sphere() -> CatalogEntry {
    let m = "(x1^2 + x2^2 + x3^2)/2";
    let system = synthesize(
        3,
        m,
        BasisChoice::General,
        1,
        &[(1, 1, p("1")), (2, 1, p("-1"))],
        Interpretation::Stratonovich,
    );
    // The system is linear, so F and S are Jacobians of f and sigma.
    let ito = system.in_interpretation(Interpretation::Ito).expect("synthesized");
    let origin = [0.0; 3];
    let rows = |j: crate::autodiff::JacobianMatrix| -> Vec<Vec<f64>> {
        (0..3).map(|i| (0..3).map(|k| j.get(i, k)).collect()).collect()
    };
    let f = rows(jacobian(&ito.drift_field(), 0.0, &origin).expect("linear drift"));
    let s = rows(jacobian(&system.diffusion_column(0), 0.0, &origin).expect("linear diffusion"));
    CatalogEntry {
        name: "sphere",
        summary: "linear system dX = F X dt + S X dW on the sphere |X| = |x0|",
        first_integral: p(m),
        system,
        initial_states: vec![vec![0.0, 1.0, 1.0]],
        t0: 0.0,
        t_end: 5.0,
        integrators: vec![Integrator::AnalyticSphere, Integrator::Milstein, Integrator::Euler],
        references: Vec::new(),
        notes: vec![format_matrix("F", &f), format_matrix("S", &s)],
    }
}

/// Rigid-body attitude quaternion with constant angular velocity `omega`
/// and per-axis noise intensities `sigma`.
pub fn quaternion(omega: [f64; 3], sigma: [f64; 3]) -> CatalogEntry {
    quaternion_with(omega.map(Expr::Const), sigma)
}

/// As [`quaternion`] with time-dependent `ω(t)`.
pub fn quaternion_with(omega: [Expr; 3], sigma: [f64; 3]) -> CatalogEntry {
    let m = "(x1^2 + x2^2 + x3^2 + x4^2)/2";
    let half = |e: Expr| crate::synthesis::render::mul(Expr::Const(0.5), e);
    let mut u = Vec::new();
    for j in 0..3 {
        u.push((j + 1, 0, half(omega[j].clone())));
        u.push((j + 1, j + 1, Expr::Const(sigma[j] / 2.0)));
    }
    let system = synthesize(4, m, BasisChoice::Special, 3, &u, Interpretation::Stratonovich);
    CatalogEntry {
        name: "quaternion",
        summary: "rotation quaternion with noisy angular velocity, |lambda| = 1",
        first_integral: p(m),
        system,
        initial_states: vec![vec![1.0, 0.0, 0.0, 0.0]],
        t0: 0.0,
        t_end: 1.0,
        integrators: vec![Integrator::Euler],
        references: Vec::new(),
        notes: vec![format!(
            "omega = ({}, {}, {}), sigma = ({}, {}, {}); x1..x4 = lambda0..lambda3",
            omega[0], omega[1], omega[2], sigma[0], sigma[1], sigma[2]
        )],
    }
}

pub fn iterated_integrals() -> CatalogEntry {
    let m = "x2 + x4 - x1*x3";
    let system = synthesize(
        4,
        m,
        BasisChoice::General,
        2,
        &[(1, 1, p("1")), (3, 2, p("1"))],
        Interpretation::Ito,
    );
    CatalogEntry {
        name: "iterated-integrals",
        summary: "W1, W2 and the iterated integrals of W1, W2; X2 + X4 = X1 X3",
        first_integral: p(m),
        system,
        initial_states: vec![vec![0.0; 4]],
        t0: 0.0,
        t_end: 1.0,
        integrators: vec![Integrator::Euler],
        references: Vec::new(),
        notes: vec!["noncommutative noise: Euler-Maruyama converges at order 1/2".into()],
    }
}
