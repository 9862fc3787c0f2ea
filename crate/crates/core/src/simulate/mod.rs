//! Time stepping: Wiener paths, Euler–Maruyama, Milstein (Stratonovich
//! drift), the Artemiev semi-implicit scheme and the closed-form sphere
//! rotation.

mod noise;
mod sphere;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::jacobian;
use crate::expr::Expr;
use crate::synthesis::{Interpretation, SdeSystem, SynthesisError};

pub use noise::{substream, wiener_increments, NormalStream, WienerPath};
pub use sphere::{is_sphere_system, sphere_analytic, sphere_rotation, SPHERE_S};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Milstein,
    Artemiev,
    AnalyticSphere,
}

impl Integrator {
    pub const ALL: [Integrator; 4] = [
        Integrator::Euler,
        Integrator::Milstein,
        Integrator::Artemiev,
        Integrator::AnalyticSphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::Milstein => "milstein",
            Integrator::Artemiev => "artemiev",
            Integrator::AnalyticSphere => "analytic_sphere",
        }
    }

    /// Interpretation the scheme's drift is written in.
    pub fn interpretation(self) -> Interpretation {
        match self {
            Integrator::Euler => Interpretation::Ito,
            _ => Interpretation::Stratonovich,
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Integrator::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Integrator::ALL.iter().map(|i| i.name()).collect();
                format!("unknown integrator `{s}` (expected one of: {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Coefficients(#[from] SynthesisError),
    #[error("non-finite state")]
    NonFinite,
    #[error("matrix E - (h/2) da/dx is singular")]
    Singular,
    #[error("scheme needs scalar noise, system has s = {0}")]
    NoiseCount(usize),
    #[error("scheme expects a {expected:?} drift, system is {actual:?}")]
    Interpretation {
        expected: Interpretation,
        actual: Interpretation,
    },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integrator is not applicable: {0}")]
    Incompatible(String),
    #[error("trajectory aborted at step {step} (t = {t}): {source}")]
    Aborted {
        step: usize,
        t: f64,
        #[source]
        source: StepError,
    },
    #[error("cannot evaluate the first integral: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub h: f64,
    pub x0: Vec<f64>,
    pub integrator: Integrator,
    pub seed: u64,
    pub trajectory_index: u64,
}

/// Relative tolerance on `(T − t0)/h` being an integer.
const GRID_TOL: f64 = 1e-9;

impl SimConfig {
    /// Number of steps; fails unless the grid divides `[t0, T]` exactly.
    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SimError::Config(format!("step size h = {} must be positive", self.h)));
        }
        let span = self.t_end - self.t0;
        if !(span > 0.0) {
            return Err(SimError::Config(format!("T = {} must exceed t0 = {}", self.t_end, self.t0)));
        }
        let ratio = span / self.h;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > GRID_TOL * ratio {
            return Err(SimError::Config(format!(
                "(T - t0)/h = {ratio} is not an integer number of steps"
            )));
        }
        Ok(n as usize)
    }

    /// Grid time `t_k`; exact at both ends.
    pub fn time(&self, k: usize, steps: usize) -> f64 {
        if k == steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * (k as f64 / steps as f64)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub integrator: Integrator,
    pub seed: u64,
    pub trajectory_index: u64,
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `M(t_k, Y_k)`, when the system carries a first integral.
    pub invariant: Option<Vec<f64>>,
}

impl Trajectory {
    /// `k,t,x1..xn,M`; the `M` column is empty without a first integral.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("k,t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",M\n");
        for (k, (t, y)) in self.times.iter().zip(&self.states).enumerate() {
            out.push_str(&format!("{k},{t:e}"));
            for v in y {
                out.push_str(&format!(",{v:e}"));
            }
            match &self.invariant {
                Some(m) => out.push_str(&format!(",{:e}\n", m[k])),
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }
}

/// `Y' = Y + h·f + Σ_l σ_{*l} ΔW_l` for an Itô system.
pub fn euler_step(
    system: &SdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    dw: &[f64],
) -> Result<Vec<f64>, StepError> {
    expect_interpretation(system, Interpretation::Ito)?;
    let (f, sigma) = system.coefficients(t, y)?;
    let mut out: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y + h * f).collect();
    for (col, w) in sigma.iter().zip(dw) {
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * w;
        }
    }
    finite(out)
}

/// `Y' = Y + h·a + √h·σξ + (h/2)(∂σ/∂x)σ·ξ²` with the Stratonovich drift `a`.
pub fn milstein_step(
    system: &SdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    xi: f64,
) -> Result<Vec<f64>, StepError> {
    let inc = milstein_increment(system, t, y, h, xi)?;
    finite(y.iter().zip(&inc).map(|(a, b)| a + b).collect())
}

fn milstein_increment(
    system: &SdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    xi: f64,
) -> Result<Vec<f64>, StepError> {
    expect_interpretation(system, Interpretation::Stratonovich)?;
    if system.s() != 1 {
        return Err(StepError::NoiseCount(system.s()));
    }
    let (a, sigma) = system.coefficients(t, y)?;
    let sigma = &sigma[0];
    let dss = system.column_derivative(0, t, y, sigma)?;
    let sh = h.sqrt();
    let out: Vec<f64> = (0..y.len())
        .map(|i| h * a[i] + sh * sigma[i] * xi + 0.5 * h * dss[i] * xi * xi)
        .collect();
    finite(out)
}

/// `Y' = Y + [E − (h/2)∂a/∂x]⁻¹ (h·a + √h·σξ + (h/2)(∂σ/∂x)σ·ξ²)`.
pub fn artemiev_step(
    system: &SdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    xi: f64,
) -> Result<Vec<f64>, StepError> {
    let inc = milstein_increment(system, t, y, h, xi)?;
    let n = y.len();
    let jac = jacobian(&system.drift_field(), t, y).map_err(SynthesisError::from)?;
    let mat = DMatrix::<f64>::identity(n, n) - jac.as_matrix() * (0.5 * h);
    if mat.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite);
    }
    let sol = mat
        .lu()
        .solve(&DVector::from_vec(inc))
        .ok_or(StepError::Singular)?;
    finite(y.iter().zip(sol.iter()).map(|(a, b)| a + b).collect())
}

fn expect_interpretation(system: &SdeSystem, expected: Interpretation) -> Result<(), StepError> {
    if system.interpretation() != expected {
        return Err(StepError::Interpretation {
            expected,
            actual: system.interpretation(),
        });
    }
    Ok(())
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>, StepError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(StepError::NonFinite)
    }
}

/// System converted (if needed) to the integrator's interpretation.
pub fn prepare(system: &SdeSystem, integrator: Integrator) -> Result<SdeSystem, SimError> {
    match integrator {
        Integrator::AnalyticSphere => {
            if !is_sphere_system(system) {
                return Err(SimError::Incompatible(
                    "analytic_sphere requires the n = 3 linear sphere system dX = S X ∘ dW".into(),
                ));
            }
            Ok(system.clone())
        }
        Integrator::Milstein | Integrator::Artemiev if system.s() != 1 => Err(SimError::Incompatible(
            format!("{integrator} needs scalar noise, system has s = {}", system.s()),
        )),
        _ => system
            .in_interpretation(integrator.interpretation())
            .map_err(|e| SimError::Incompatible(e.to_string())),
    }
}

/// Runs one trajectory, reporting each grid state to `visit(k, t, y)`.
/// `system` must already be prepared for `cfg.integrator`.
pub fn run_prepared(
    system: &SdeSystem,
    cfg: &SimConfig,
    mut visit: impl FnMut(usize, f64, &[f64]),
) -> Result<(), SimError> {
    let steps = cfg.steps()?;
    if cfg.x0.len() != system.n() {
        return Err(SimError::Config(format!(
            "x0 has {} components, system has n = {}",
            cfg.x0.len(),
            system.n()
        )));
    }
    let h = (cfg.t_end - cfg.t0) / steps as f64;
    let s = system.s();
    let path = wiener_increments(cfg.seed, cfg.trajectory_index, steps, s, h);
    visit(0, cfg.t0, &cfg.x0);
    if cfg.integrator == Integrator::AnalyticSphere {
        for k in 1..=steps {
            let y = sphere_rotation(path.w(k)[0]) * nalgebra::Vector3::from_column_slice(&cfg.x0);
            visit(k, cfg.time(k, steps), y.as_slice());
        }
        return Ok(());
    }
    let mut y = cfg.x0.clone();
    for k in 0..steps {
        let t = cfg.time(k, steps);
        let next = match cfg.integrator {
            Integrator::Euler => euler_step(system, t, &y, h, path.dw(k)),
            Integrator::Milstein => milstein_step(system, t, &y, h, path.xi(k)[0]),
            Integrator::Artemiev => artemiev_step(system, t, &y, h, path.xi(k)[0]),
            Integrator::AnalyticSphere => unreachable!(),
        };
        y = next.map_err(|source| SimError::Aborted { step: k, t, source })?;
        visit(k + 1, cfg.time(k + 1, steps), &y);
    }
    Ok(())
}

/// Final state `Y_N` only.
pub fn simulate_final(system: &SdeSystem, cfg: &SimConfig) -> Result<Vec<f64>, SimError> {
    let prepared = prepare(system, cfg.integrator)?;
    let mut last = Vec::new();
    run_prepared(&prepared, cfg, |_, _, y| {
        last.clear();
        last.extend_from_slice(y);
    })?;
    Ok(last)
}

/// Full trajectory with `M(t_k, Y_k)` when the system has a first integral.
pub fn simulate_trajectory(system: &SdeSystem, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let prepared = prepare(system, cfg.integrator)?;
    let steps = cfg.steps()?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    run_prepared(&prepared, cfg, |_, t, y| {
        times.push(t);
        states.push(y.to_vec());
    })?;
    let invariant = system
        .first_integral()
        .map(|m| invariant_values(m, &times, &states))
        .transpose()?;
    Ok(Trajectory {
        integrator: cfg.integrator,
        seed: cfg.seed,
        trajectory_index: cfg.trajectory_index,
        h: (cfg.t_end - cfg.t0) / steps as f64,
        times,
        states,
        invariant,
    })
}

fn invariant_values(m: &Expr, times: &[f64], states: &[Vec<f64>]) -> Result<Vec<f64>, SimError> {
    times
        .iter()
        .zip(states)
        .map(|(&t, y)| m.eval(t, y).map_err(|e| SimError::Invariant(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{BasisChoice, CoefficientChoice, InvariantSpec, Synthesizer};
    use approx::assert_relative_eq;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    fn synth(n: usize, m: &str, s: usize, u: &[(usize, usize, &str)]) -> Synthesizer {
        let spec = InvariantSpec::new(n, p(m), BasisChoice::General).unwrap();
        let mut choice = CoefficientChoice::new(n, s);
        for &(j, l, e) in u {
            choice.set(j, l, p(e)).unwrap();
        }
        Synthesizer::new(spec, choice).unwrap()
    }

    fn catenoid() -> SdeSystem {
        SdeSystem::synthesize(
            synth(3, "x1^2 + x2^2 - cosh(x3)^2", 1, &[(1, 0, "1/5"), (1, 1, "1/3"), (2, 1, "1/10")]),
            Interpretation::Stratonovich,
        )
    }

    fn parabola() -> SdeSystem {
        SdeSystem::synthesize(
            synth(2, "x1 + x2^2 + cos(2*t)", 1, &[(1, 0, "1/10"), (1, 1, "1/5")]),
            Interpretation::Stratonovich,
        )
    }

    fn cfg(integrator: Integrator, x0: Vec<f64>, t_end: f64, h: f64) -> SimConfig {
        SimConfig {
            t0: 0.0,
            t_end,
            h,
            x0,
            integrator,
            seed: 42,
            trajectory_index: 0,
        }
    }

    #[test]
    fn milstein_step_without_noise() {
        let y = milstein_step(&catenoid(), 0.0, &[0.0, 1.0, 0.0], 0.01, 0.0).unwrap();
        assert_relative_eq!(y[0], 0.004, max_relative = 1e-14);
        assert_relative_eq!(y[1], 1.0, max_relative = 1e-14);
        assert_eq!(y[2], 0.0);
    }

    #[test]
    fn artemiev_step_without_noise() {
        let y = artemiev_step(&parabola(), 0.0, &[1.0, 1.0], 0.01, 0.0).unwrap();
        // (E - h/2 J)^{-1} h a with J = [[0, 1/5], [0, 0]], a = (0.2, -0.1)
        let d1 = -0.001;
        let d0 = 0.002 + 0.001 * d1;
        assert_relative_eq!(y[0], 1.0 + d0, max_relative = 1e-14);
        assert_relative_eq!(y[1], 1.0 + d1, max_relative = 1e-14);
        assert!((y[0] - 1.001999).abs() < 1e-9);
    }

    #[test]
    fn euler_step_on_iterated_integrals() {
        let sys = SdeSystem::synthesize(
            synth(4, "x2 + x4 - x1*x3", 2, &[(1, 1, "1"), (3, 2, "1")]),
            Interpretation::Ito,
        );
        let y = euler_step(&sys, 0.0, &[0.0; 4], 0.01, &[0.3, -0.2]).unwrap();
        assert_eq!(y, vec![0.3, 0.0, -0.2, 0.0]);
    }

    #[test]
    fn milstein_matches_ito_milstein() {
        let strat = catenoid();
        let ito = strat.in_interpretation(Interpretation::Ito).unwrap();
        let (t, y, h, xi) = (0.3, [0.2, 0.9, -0.4], 0.01, 1.3);
        let a = milstein_step(&strat, t, &y, h, xi).unwrap();
        let f = ito.drift(t, &y).unwrap();
        let sigma = ito.diffusion(t, &y).unwrap();
        let dss = ito.column_derivative(0, t, &y, &sigma[0]).unwrap();
        let dw = h.sqrt() * xi;
        for i in 0..3 {
            let b = y[i] + f[i] * h + sigma[0][i] * dw + 0.5 * dss[i] * (dw * dw - h);
            assert!((a[i] - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn interpretation_mismatch_is_reported() {
        let err = euler_step(&catenoid(), 0.0, &[0.0, 1.0, 0.0], 0.01, &[0.1]).unwrap_err();
        assert!(matches!(err, StepError::Interpretation { .. }));
        let multi = SdeSystem::synthesize(
            synth(4, "x2 + x4 - x1*x3", 2, &[(1, 1, "1")]),
            Interpretation::Stratonovich,
        );
        let err = milstein_step(&multi, 0.0, &[0.0; 4], 0.01, 0.1).unwrap_err();
        assert_eq!(err, StepError::NoiseCount(2));
    }

    #[test]
    fn grid_must_be_exact() {
        assert_eq!(cfg(Integrator::Euler, vec![0.0], 10.0, 0.01).steps().unwrap(), 1000);
        assert_eq!(cfg(Integrator::Euler, vec![0.0], 6.28, 0.001).steps().unwrap(), 6280);
        assert!(cfg(Integrator::Euler, vec![0.0], 1.0, 0.3).steps().is_err());
        assert!(cfg(Integrator::Euler, vec![0.0], 1.0, 0.0).steps().is_err());
        assert!(cfg(Integrator::Euler, vec![0.0], -1.0, 0.1).steps().is_err());
    }

    #[test]
    fn catenoid_trajectory_shape() {
        let traj = simulate_trajectory(&catenoid(), &cfg(Integrator::Milstein, vec![0.0, 1.0, 0.0], 10.0, 0.01)).unwrap();
        assert_eq!(traj.states.len(), 1001);
        assert_eq!(traj.times[1000], 10.0);
        let m = traj.invariant.as_ref().unwrap();
        assert_eq!(m[0], 0.0);
        assert!(m[1000].abs() < 1.0);
        let again = simulate_trajectory(&catenoid(), &cfg(Integrator::Milstein, vec![0.0, 1.0, 0.0], 10.0, 0.01)).unwrap();
        assert_eq!(traj, again);
        let csv = traj.to_csv();
        assert!(csv.starts_with("k,t,x1,x2,x3,M\n0,0e0,0e0,1e0,0e0,0e0\n"));
        assert_eq!(csv.lines().count(), 1002);
    }

    #[test]
    fn zero_system_stays_put() {
        let sys = SdeSystem::synthesize(synth(3, "x1*x2*x3", 1, &[]), Interpretation::Ito);
        for integrator in [Integrator::Euler, Integrator::Milstein, Integrator::Artemiev] {
            let traj = simulate_trajectory(&sys, &cfg(integrator, vec![1.0, 2.0, 3.0], 1.0, 0.1)).unwrap();
            assert!(traj.states.iter().all(|y| y == &vec![1.0, 2.0, 3.0]));
        }
    }

    #[test]
    fn deterministic_milstein_equals_euler() {
        let sys = SdeSystem::synthesize(
            synth(3, "x1^2 + x2^2 - cosh(x3)^2", 1, &[(1, 0, "1/5"), (2, 0, "x1")]),
            Interpretation::Ito,
        );
        let e = simulate_trajectory(&sys, &cfg(Integrator::Euler, vec![0.0, 1.0, 0.0], 1.0, 0.01)).unwrap();
        let m = simulate_trajectory(&sys, &cfg(Integrator::Milstein, vec![0.0, 1.0, 0.0], 1.0, 0.01)).unwrap();
        for (a, b) in e.states.iter().flatten().zip(m.states.iter().flatten()) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn analytic_sphere_only_for_sphere() {
        let err = simulate_trajectory(&catenoid(), &cfg(Integrator::AnalyticSphere, vec![0.0, 1.0, 0.0], 1.0, 0.1));
        assert!(matches!(err, Err(SimError::Incompatible(_))));
    }

    #[test]
    fn aborts_carry_step_index() {
        let sys = SdeSystem::explicit(
            Interpretation::Ito,
            vec![p("x1^2")],
            vec![vec![p("0")]],
            None,
        )
        .unwrap();
        let err = simulate_trajectory(&sys, &cfg(Integrator::Euler, vec![1.0], 20.0, 1.0)).unwrap_err();
        assert!(matches!(err, SimError::Aborted { source: StepError::NonFinite, .. }), "{err}");
    }

    #[test]
    fn integrator_names() {
        for i in Integrator::ALL {
            assert_eq!(i.name().parse::<Integrator>().unwrap(), i);
        }
        assert!("rk4".parse::<Integrator>().is_err());
    }
}
