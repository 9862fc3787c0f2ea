use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Interpretation, SdeSystem};
use crate::autodiff::gradient;
use crate::expr::Expr;
use crate::geometry::{dot, norm};

/// Normalized invariance residuals at one point. `None` marks a point where
/// a coefficient could not be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub t: f64,
    pub x: Vec<f64>,
    /// `|(σ_{*l}, G)| / (|σ_{*l}|·|G|)` per column.
    pub diffusion: Vec<f64>,
    /// `|g0 + (a, G)| / ((1 + |a|)·|G̃|)`, with `a = f − Σ` for Itô systems.
    pub drift: f64,
    pub error: Option<String>,
}

impl PointResidual {
    pub fn max(&self) -> f64 {
        self.diffusion.iter().copied().fold(self.drift, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub points: Vec<PointResidual>,
    pub max_diffusion: f64,
    pub max_drift: f64,
    /// Points where evaluation failed.
    pub failures: usize,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_diffusion.max(self.max_drift)
    }

    /// Passes when every point evaluated and the worst residual is below `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.failures == 0 && self.max() <= tol
    }
}

/// Evaluates the invariance conditions for `m` at every sample point.
/// Never fails: evaluation problems are recorded per point.
pub fn invariance_residuals(
    system: &SdeSystem,
    m: &Expr,
    points: &[(f64, Vec<f64>)],
) -> ResidualReport {
    let points: Vec<PointResidual> = points
        .iter()
        .map(|(t, x)| match point_residual(system, m, *t, x) {
            Ok(r) => r,
            Err(msg) => PointResidual {
                t: *t,
                x: x.clone(),
                diffusion: Vec::new(),
                drift: f64::NAN,
                error: Some(msg),
            },
        })
        .collect();
    let ok = || points.iter().filter(|p| p.error.is_none());
    ResidualReport {
        max_diffusion: ok().flat_map(|p| p.diffusion.iter().copied()).fold(0.0, f64::max),
        max_drift: ok().map(|p| p.drift).fold(0.0, f64::max),
        failures: points.iter().filter(|p| p.error.is_some()).count(),
        points,
    }
}

fn point_residual(system: &SdeSystem, m: &Expr, t: f64, x: &[f64]) -> Result<PointResidual, String> {
    if x.len() != system.n() {
        return Err(format!("point has {} coordinates, system has n = {}", x.len(), system.n()));
    }
    let (g0, g) = gradient(m, t, x).map_err(|e| e.to_string())?;
    let gn = norm(&g);
    let (drift, sigma) = system.coefficients(t, x).map_err(|e| e.to_string())?;
    let a = match system.interpretation() {
        Interpretation::Stratonovich => drift,
        Interpretation::Ito => {
            let corr = system
                .sigma_correction_given(t, x, &sigma)
                .map_err(|e| e.to_string())?;
            drift.iter().zip(&corr).map(|(f, c)| f - c).collect()
        }
    };
    let diffusion = sigma
        .iter()
        .map(|col| ratio(dot(col, &g), norm(col) * gn))
        .collect();
    let g_ext = (g0 * g0 + gn * gn).sqrt();
    let drift = ratio(g0 + dot(&a, &g), (1.0 + norm(&a)) * g_ext);
    let finite = drift.is_finite() && sigma.iter().flatten().all(|v| v.is_finite());
    if !finite {
        return Err("non-finite coefficient".into());
    }
    Ok(PointResidual {
        t,
        x: x.to_vec(),
        diffusion,
        drift,
        error: None,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num.abs() / den.max(f64::MIN_POSITIVE)
    }
}

/// Uniform samples in boxes of half-width `radius` around `centers`, with
/// `t` uniform in `time` (cycling through the centers).
pub fn sample_points(
    centers: &[Vec<f64>],
    radius: f64,
    time: (f64, f64),
    count: usize,
    seed: u64,
) -> Vec<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let c = &centers[k % centers.len()];
            let t = if time.1 > time.0 {
                rng.gen_range(time.0..time.1)
            } else {
                time.0
            };
            let x = c.iter().map(|v| v + rng.gen_range(-radius..=radius)).collect();
            (t, x)
        })
        .collect()
}
