//! Invariant SDE coefficients from a first integral and free functions.
//!
//! Given `M(t, x)` and a table of free functions `u_j^l(t, x)`, the
//! diffusion columns are `σ_{*l} = Σ_j u_j^l N_j`, the Stratonovich drift is
//! `a = N₀ + Σ_j u_j^0 N_j` and the Itô drift is `f = a + Σ` with
//! `Σ = ½ Σ_l (∂σ_{*l}/∂x) σ_{*l}`. Both drifts are linear in the `u`.

pub mod render;
mod residuals;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{gradient_masked, Dual, Scalar, VectorField};
use crate::expr::{BindError, EvalError, Expr};
use crate::geometry::{
    self, chain_vectors, n0_vector, projected_candidates, projection_threshold,
    select_independent, special_vectors, supplemented_vectors, BasisKind, BasisSet,
    GeometryError, SupplementLayout,
};

pub use residuals::{invariance_residuals, sample_points, PointResidual, ResidualReport};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("the first integral must depend on the state")]
    ConstantIntegral,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coefficient index u[{j},{l}] is out of range for n = {n}, s = {s}")]
    CoefficientIndex { j: usize, l: usize, n: usize, s: usize },
    #[error("basis `{choice:?}` is not available for n = {n}")]
    BasisUnavailable { choice: BasisChoice, n: usize },
    #[error("system is {actual:?}; {wanted:?} drift requires a synthesized system or explicit conversion")]
    InterpretationMismatch {
        actual: Interpretation,
        wanted: Interpretation,
    },
    #[error("operation requires a synthesized system (M + u)")]
    MissingProvenance,
}

/// Which tangent basis to build; `Auto` picks the non-degenerate
/// construction for the dimension when one exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    #[default]
    Auto,
    General,
    Special,
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    Ito,
    Stratonovich,
}

impl Interpretation {
    pub fn other(self) -> Self {
        match self {
            Interpretation::Ito => Interpretation::Stratonovich,
            Interpretation::Stratonovich => Interpretation::Ito,
        }
    }
}

/// First integral plus the resolved basis construction.
#[derive(Clone, Debug)]
pub struct InvariantSpec {
    n: usize,
    m: Expr,
    time_dependent: bool,
    kind: BasisKind,
    /// Differentiation slots: 0 = t, i = x_i.
    grad_mask: Vec<bool>,
    pivot: usize,
}

impl InvariantSpec {
    pub fn new(n: usize, m: Expr, choice: BasisChoice) -> Result<Self, SynthesisError> {
        if n < 2 {
            return Err(SynthesisError::Dimension(format!("n = {n}, need n >= 2")));
        }
        m.check_dimension(n)?;
        let fv = m.free_variables();
        if fv.vars.is_empty() {
            return Err(SynthesisError::ConstantIntegral);
        }
        let time_dependent = fv.time;
        let zero_mask: Vec<bool> = (1..=n).map(|i| !fv.contains(i)).collect();
        let kind = match choice {
            BasisChoice::Auto => match n {
                2 => BasisKind::Special2,
                4 => BasisKind::Special4,
                8 => BasisKind::Special8,
                3 | 5 | 6 | 7 => BasisKind::Projected(n),
                _ => general_kind(&zero_mask, time_dependent),
            },
            BasisChoice::General => general_kind(&zero_mask, time_dependent),
            BasisChoice::Special => match n {
                2 => BasisKind::Special2,
                4 => BasisKind::Special4,
                8 => BasisKind::Special8,
                _ => return Err(SynthesisError::BasisUnavailable { choice, n }),
            },
            BasisChoice::Projected => match n {
                3 | 5 | 6 | 7 => BasisKind::Projected(n),
                _ => return Err(SynthesisError::BasisUnavailable { choice, n }),
            },
        };
        let pivot = match &kind {
            BasisKind::Supplemented(layout) => layout.pivot(),
            BasisKind::General => 0,
            _ => zero_mask.iter().position(|z| !z).unwrap_or(0),
        };
        let mut grad_mask = vec![time_dependent];
        grad_mask.extend(zero_mask.iter().map(|z| !z));
        Ok(Self {
            n,
            m,
            time_dependent,
            kind,
            grad_mask,
            pivot,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_integral(&self) -> &Expr {
        &self.m
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Vector construction in use (chain, special, projected, supplemented).
    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Original index (0-based) of the component carrying `N₀`.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn frame<S: Scalar>(&self, t: S, x: &[S]) -> Result<Frame<S>, SynthesisError> {
        let (g0, g) = gradient_masked(&self.m, t, x, &self.grad_mask)?;
        let mut vectors = match &self.kind {
            BasisKind::General | BasisKind::TimeExtended => chain_vectors(&g),
            BasisKind::Special2 | BasisKind::Special4 | BasisKind::Special8 => {
                special_vectors(&g).expect("dimension resolved at construction")
            }
            BasisKind::Projected(_) => {
                let candidates = projected_candidates(&g).expect("dimension resolved");
                let re: Vec<Vec<f64>> = candidates
                    .iter()
                    .map(|v| v.iter().map(Scalar::re).collect())
                    .collect();
                let gn = g.iter().map(|v| v.re() * v.re()).sum::<f64>().sqrt();
                let keep = select_independent(&re, projection_threshold(gn), self.n - 1);
                keep.into_iter().map(|i| candidates[i].clone()).collect()
            }
            BasisKind::Supplemented(layout) => supplemented_vectors(&g, layout),
        };
        vectors.resize(self.n - 1, vec![S::zero(); self.n]);
        let n0 = if self.time_dependent {
            Some(n0_vector(g0, &g, self.pivot)?)
        } else {
            None
        };
        Ok(Frame {
            g0,
            g,
            n0,
            vectors,
        })
    }

    /// Basis at a real point with degeneracy diagnostics.
    pub fn basis_set(&self, t: f64, x: &[f64]) -> Result<BasisSet, SynthesisError> {
        let (g0, g) = gradient_masked(&self.m, t, x, &self.grad_mask)?;
        let tol = geometry::degeneracy_tol(geometry::norm(&g));
        let frame = self.frame(t, x)?;
        let degeneracy = match &self.kind {
            BasisKind::General | BasisKind::TimeExtended => {
                let from = usize::from(!self.time_dependent);
                (from..self.n - 1).filter(|&i| g[i].abs() <= tol).map(|i| i + 1).collect()
            }
            BasisKind::Supplemented(layout) => {
                let from = usize::from(!self.time_dependent);
                (from..layout.active.saturating_sub(1))
                    .map(|p| layout.order[p])
                    .filter(|&i| g[i].abs() <= tol)
                    .map(|i| i + 1)
                    .collect()
            }
            _ => Vec::new(),
        };
        let kind = match (&self.kind, self.time_dependent) {
            (BasisKind::General, true) => BasisKind::TimeExtended,
            (k, _) => k.clone(),
        };
        let _ = g0;
        Ok(BasisSet {
            kind,
            vectors: frame.vectors,
            n0: frame.n0,
            degeneracy,
        })
    }
}

fn general_kind(zero_mask: &[bool], time_dependent: bool) -> BasisKind {
    match SupplementLayout::from_mask(zero_mask, time_dependent) {
        Some(layout) => BasisKind::Supplemented(layout),
        None => BasisKind::General,
    }
}

/// Gradient and tangent vectors at one point, over any scalar type.
#[derive(Clone, Debug)]
pub struct Frame<S> {
    pub g0: S,
    pub g: Vec<S>,
    pub n0: Option<Vec<S>>,
    pub vectors: Vec<Vec<S>>,
}

/// Free functions `u_j^l`, `j = 1 … n−1`, `l = 0 … s` (`l = 0` is the drift).
/// Missing entries are the zero function.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientChoice {
    n: usize,
    s: usize,
    /// `table[l][j-1]`
    table: Vec<Vec<Option<Expr>>>,
}

impl CoefficientChoice {
    pub fn new(n: usize, s: usize) -> Self {
        Self {
            n,
            s,
            table: vec![vec![None; n.saturating_sub(1)]; s + 1],
        }
    }

    pub fn with(mut self, j: usize, l: usize, e: Expr) -> Result<Self, SynthesisError> {
        self.set(j, l, e)?;
        Ok(self)
    }

    /// Sets `u_j^l`; `j` is 1-based, `l = 0` selects the drift.
    pub fn set(&mut self, j: usize, l: usize, e: Expr) -> Result<(), SynthesisError> {
        if j == 0 || j >= self.n || l > self.s {
            return Err(SynthesisError::CoefficientIndex {
                j,
                l,
                n: self.n,
                s: self.s,
            });
        }
        e.check_dimension(self.n)?;
        self.table[l][j - 1] = if e.is_zero() { None } else { Some(e) };
        Ok(())
    }

    pub fn get(&self, j: usize, l: usize) -> Option<&Expr> {
        self.table.get(l)?.get(j.checked_sub(1)?)?.as_ref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn noise_count(&self) -> usize {
        self.s
    }

    /// Non-zero entries as `(j, l, expr)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Expr)> {
        self.table.iter().enumerate().flat_map(|(l, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(j, e)| e.as_ref().map(|e| (j + 1, l, e)))
        })
    }

    /// Multiplies every entry by `factor` (as an expression).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.table {
            for e in row.iter_mut().flatten() {
                *e = render::mul(Expr::Const(factor), e.clone());
            }
        }
        out
    }

    fn combine<S: Scalar>(
        &self,
        l: usize,
        vectors: &[Vec<S>],
        t: S,
        x: &[S],
        out: &mut [S],
    ) -> Result<(), EvalError> {
        for (j, u) in self.table[l].iter().enumerate() {
            if let Some(u) = u {
                let c = u.eval(t, x)?;
                for (o, v) in out.iter_mut().zip(&vectors[j]) {
                    *o = *o + c * *v;
                }
            }
        }
        Ok(())
    }
}

/// A first integral together with the free functions that generated a system.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    pub spec: InvariantSpec,
    pub choice: CoefficientChoice,
}

impl Synthesizer {
    pub fn new(spec: InvariantSpec, choice: CoefficientChoice) -> Result<Self, SynthesisError> {
        if spec.n != choice.n {
            return Err(SynthesisError::Dimension(format!(
                "first integral has n = {}, coefficient table has n = {}",
                spec.n, choice.n
            )));
        }
        Ok(Self { spec, choice })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn s(&self) -> usize {
        self.choice.s
    }

    /// Stratonovich drift `a` and diffusion columns from a single frame.
    pub fn coefficients_at<S: Scalar>(
        &self,
        t: S,
        x: &[S],
    ) -> Result<(Vec<S>, Vec<Vec<S>>), SynthesisError> {
        let frame = self.spec.frame(t, x)?;
        let a = self.drift_from(&frame, t, x)?;
        let sigma = self.diffusion_from(&frame, t, x)?;
        Ok((a, sigma))
    }

    pub fn diffusion_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<Vec<S>>, SynthesisError> {
        let frame = self.spec.frame(t, x)?;
        self.diffusion_from(&frame, t, x)
    }

    pub fn stratonovich_drift_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, SynthesisError> {
        let frame = self.spec.frame(t, x)?;
        self.drift_from(&frame, t, x)
    }

    fn drift_from<S: Scalar>(&self, frame: &Frame<S>, t: S, x: &[S]) -> Result<Vec<S>, SynthesisError> {
        let mut a = frame.n0.clone().unwrap_or_else(|| vec![S::zero(); self.n()]);
        self.choice.combine(0, &frame.vectors, t, x, &mut a)?;
        Ok(a)
    }

    fn diffusion_from<S: Scalar>(
        &self,
        frame: &Frame<S>,
        t: S,
        x: &[S],
    ) -> Result<Vec<Vec<S>>, SynthesisError> {
        (1..=self.s())
            .map(|l| {
                let mut col = vec![S::zero(); self.n()];
                self.choice.combine(l, &frame.vectors, t, x, &mut col)?;
                Ok(col)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum DriftField {
    Exprs(Vec<Expr>),
    Synthesized(Arc<Synthesizer>),
    /// `base + sign·Σ`, with `Σ` taken from the system's own diffusion.
    Corrected { base: Box<DriftField>, sign: f64 },
}

#[derive(Clone, Debug)]
enum DiffusionField {
    /// One expression vector per noise column.
    Exprs(Vec<Vec<Expr>>),
    Synthesized(Arc<Synthesizer>),
}

/// `dX = drift dt + Σ_l σ_{*l} dW_l` in a stated interpretation.
#[derive(Clone, Debug)]
pub struct SdeSystem {
    n: usize,
    s: usize,
    interpretation: Interpretation,
    drift: DriftField,
    diffusion: DiffusionField,
    provenance: Option<Arc<Synthesizer>>,
    first_integral: Option<Expr>,
}

impl SdeSystem {
    /// Synthesized system in the requested interpretation.
    pub fn synthesize(synth: Synthesizer, interpretation: Interpretation) -> Self {
        let synth = Arc::new(synth);
        let base = DriftField::Synthesized(synth.clone());
        let drift = match interpretation {
            Interpretation::Stratonovich => base,
            Interpretation::Ito => DriftField::Corrected {
                base: Box::new(base),
                sign: 1.0,
            },
        };
        Self {
            n: synth.n(),
            s: synth.s(),
            interpretation,
            drift,
            diffusion: DiffusionField::Synthesized(synth.clone()),
            first_integral: Some(synth.spec.m.clone()),
            provenance: Some(synth),
        }
    }

    /// Hand-entered system; `diffusion` holds one `n`-vector per noise.
    pub fn explicit(
        interpretation: Interpretation,
        drift: Vec<Expr>,
        diffusion: Vec<Vec<Expr>>,
        first_integral: Option<Expr>,
    ) -> Result<Self, SynthesisError> {
        let n = drift.len();
        if n == 0 {
            return Err(SynthesisError::Dimension("empty drift".into()));
        }
        if diffusion.is_empty() {
            return Err(SynthesisError::Dimension("no diffusion columns".into()));
        }
        for (l, col) in diffusion.iter().enumerate() {
            if col.len() != n {
                return Err(SynthesisError::Dimension(format!(
                    "diffusion column {} has {} entries, expected {n}",
                    l + 1,
                    col.len()
                )));
            }
        }
        for e in drift.iter().chain(diffusion.iter().flatten()) {
            e.check_dimension(n)?;
        }
        if let Some(m) = &first_integral {
            m.check_dimension(n)?;
        }
        Ok(Self {
            n,
            s: diffusion.len(),
            interpretation,
            drift: DriftField::Exprs(drift),
            diffusion: DiffusionField::Exprs(diffusion),
            provenance: None,
            first_integral,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    pub fn provenance(&self) -> Option<&Synthesizer> {
        self.provenance.as_deref()
    }

    pub fn first_integral(&self) -> Option<&Expr> {
        self.first_integral.as_ref()
    }

    pub fn with_first_integral(mut self, m: Expr) -> Self {
        self.first_integral = Some(m);
        self
    }

    /// Drift in the system's own interpretation.
    pub fn drift<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, SynthesisError> {
        self.eval_drift(&self.drift, t, x)
    }

    fn eval_drift<S: Scalar>(&self, field: &DriftField, t: S, x: &[S]) -> Result<Vec<S>, SynthesisError> {
        match field {
            DriftField::Exprs(es) => Ok(es.eval_at(t, x)?),
            DriftField::Synthesized(synth) => synth.stratonovich_drift_at(t, x),
            DriftField::Corrected { base, sign } => {
                let mut d = self.eval_drift(base, t, x)?;
                let corr = self.sigma_correction_at(t, x)?;
                let sgn = S::from_f64(*sign);
                for (a, c) in d.iter_mut().zip(corr) {
                    *a = *a + sgn * c;
                }
                Ok(d)
            }
        }
    }

    /// All diffusion columns.
    pub fn diffusion<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<Vec<S>>, SynthesisError> {
        match &self.diffusion {
            DiffusionField::Exprs(cols) => cols
                .iter()
                .map(|c| c.eval_at(t, x).map_err(Into::into))
                .collect(),
            DiffusionField::Synthesized(synth) => synth.diffusion_at(t, x),
        }
    }

    /// Drift and diffusion, sharing one basis evaluation when synthesized.
    pub fn coefficients<S: Scalar>(
        &self,
        t: S,
        x: &[S],
    ) -> Result<(Vec<S>, Vec<Vec<S>>), SynthesisError> {
        match (&self.drift, &self.diffusion) {
            (DriftField::Synthesized(a), DiffusionField::Synthesized(_)) => a.coefficients_at(t, x),
            (DriftField::Corrected { base, sign }, DiffusionField::Synthesized(_))
                if matches!(**base, DriftField::Synthesized(_)) =>
            {
                let DriftField::Synthesized(synth) = &**base else { unreachable!() };
                let (mut d, sigma) = synth.coefficients_at(t, x)?;
                let corr = self.sigma_correction_given(t, x, &sigma)?;
                let sgn = S::from_f64(*sign);
                for (a, c) in d.iter_mut().zip(corr) {
                    *a = *a + sgn * c;
                }
                Ok((d, sigma))
            }
            _ => Ok((self.drift(t, x)?, self.diffusion(t, x)?)),
        }
    }

    /// `Σ = ½ Σ_l (∂σ_{*l}/∂x) σ_{*l}`.
    pub fn sigma_correction_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, SynthesisError> {
        let sigma = self.diffusion(t, x)?;
        self.sigma_correction_given(t, x, &sigma)
    }

    /// Same as [`Self::sigma_correction_at`] with the columns already known.
    pub fn sigma_correction_given<S: Scalar>(
        &self,
        t: S,
        x: &[S],
        sigma: &[Vec<S>],
    ) -> Result<Vec<S>, SynthesisError> {
        let half = S::from_f64(0.5);
        let mut out = vec![S::zero(); self.n];
        for l in 0..self.s {
            let dd = self.column_derivative(l, t, x, &sigma[l])?;
            for (o, d) in out.iter_mut().zip(dd) {
                *o = *o + half * d;
            }
        }
        Ok(out)
    }

    /// `(∂σ_{*l}/∂x)·v` in one dual pass.
    pub fn column_derivative<S: Scalar>(
        &self,
        l: usize,
        t: S,
        x: &[S],
        v: &[S],
    ) -> Result<Vec<S>, SynthesisError> {
        let td = Dual::constant(t);
        let xd: Vec<Dual<S>> = x.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect();
        let col = match &self.diffusion {
            DiffusionField::Exprs(cols) => cols[l].eval_at(td, &xd)?,
            DiffusionField::Synthesized(synth) => synth.diffusion_at(td, &xd)?.swap_remove(l),
        };
        Ok(col.into_iter().map(|d| d.tangent).collect())
    }

    /// Drift in `target` interpretation. Conversion is automatic only for
    /// synthesized systems.
    pub fn drift_as<S: Scalar>(
        &self,
        target: Interpretation,
        t: S,
        x: &[S],
    ) -> Result<Vec<S>, SynthesisError> {
        if target == self.interpretation {
            return self.drift(t, x);
        }
        if self.provenance.is_none() {
            return Err(SynthesisError::InterpretationMismatch {
                actual: self.interpretation,
                wanted: target,
            });
        }
        let sign = match target {
            Interpretation::Ito => 1.0,
            Interpretation::Stratonovich => -1.0,
        };
        self.eval_drift(
            &DriftField::Corrected {
                base: Box::new(self.drift.clone()),
                sign,
            },
            t,
            x,
        )
    }

    /// Same system in `target` interpretation, for simulation. Hand-entered
    /// systems must already be in the requested form.
    pub fn in_interpretation(&self, target: Interpretation) -> Result<SdeSystem, SynthesisError> {
        if target == self.interpretation {
            return Ok(self.clone());
        }
        match &self.provenance {
            Some(synth) => {
                let mut sys = SdeSystem::synthesize((**synth).clone(), target);
                sys.first_integral = self.first_integral.clone();
                Ok(sys)
            }
            None => Err(SynthesisError::InterpretationMismatch {
                actual: self.interpretation,
                wanted: target,
            }),
        }
    }

    /// View of the drift as a [`VectorField`].
    pub fn drift_field(&self) -> DriftView<'_> {
        DriftView(self)
    }

    /// View of diffusion column `l` (0-based) as a [`VectorField`].
    pub fn diffusion_column(&self, l: usize) -> ColumnView<'_> {
        ColumnView(self, l)
    }
}

/// Explicit change of interpretation: adds `Σ` (to Itô) or subtracts it (to
/// Stratonovich). Works for any system with differentiable diffusion.
pub fn convert_interpretation(system: &SdeSystem, target: Interpretation) -> SdeSystem {
    if target == system.interpretation {
        return system.clone();
    }
    let sign = match target {
        Interpretation::Ito => 1.0,
        Interpretation::Stratonovich => -1.0,
    };
    SdeSystem {
        interpretation: target,
        drift: DriftField::Corrected {
            base: Box::new(system.drift.clone()),
            sign,
        },
        ..system.clone()
    }
}

pub struct DriftView<'a>(&'a SdeSystem);

impl VectorField for DriftView<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, EvalError> {
        self.0.drift(t, x).map_err(to_eval_error)
    }
}

pub struct ColumnView<'a>(&'a SdeSystem, usize);

impl VectorField for ColumnView<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, EvalError> {
        match &self.0.diffusion {
            DiffusionField::Exprs(cols) => cols[self.1].eval_at(t, x),
            DiffusionField::Synthesized(synth) => synth
                .diffusion_at(t, x)
                .map(|mut c| c.swap_remove(self.1))
                .map_err(to_eval_error),
        }
    }
}

fn to_eval_error(e: SynthesisError) -> EvalError {
    match e {
        SynthesisError::Eval(e) => e,
        other => EvalError::Domain {
            kind: crate::expr::DomainError::DivisionByZero,
            node: other.to_string(),
        },
    }
}

/// `σ_{*l} = Σ_j u_j^l N_j` at a point.
pub fn build_diffusion(
    spec: &InvariantSpec,
    choice: &CoefficientChoice,
    t: f64,
    x: &[f64],
) -> Result<Vec<Vec<f64>>, SynthesisError> {
    Synthesizer::new(spec.clone(), choice.clone())?.diffusion_at(t, x)
}

/// `a = N₀ + Σ_j u_j^0 N_j` at a point.
pub fn build_stratonovich_drift(
    spec: &InvariantSpec,
    choice: &CoefficientChoice,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>, SynthesisError> {
    Synthesizer::new(spec.clone(), choice.clone())?.stratonovich_drift_at(t, x)
}

/// `f = a + Σ` at a point.
pub fn build_ito_drift(
    spec: &InvariantSpec,
    choice: &CoefficientChoice,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>, SynthesisError> {
    let synth = Synthesizer::new(spec.clone(), choice.clone())?;
    SdeSystem::synthesize(synth, Interpretation::Ito).drift(t, x)
}

pub fn sigma_correction(system: &SdeSystem, t: f64, x: &[f64]) -> Result<Vec<f64>, SynthesisError> {
    system.sigma_correction_at(t, x)
}
