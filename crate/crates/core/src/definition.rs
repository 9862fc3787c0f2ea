//! JSON system-definition files.
//!
//! A definition is either synthesized (`M` + `u`) or hand-entered
//! (`drift` + `diffusion`, optionally with `M` for verification):
//!
//! ```json
//! { "n": 2, "s": 1, "M": "x1 + x2^2 + cos(2*t)",
//!   "u": { "1,0": "1/10", "1,1": "1/5" },
//!   "x0": [[1, 1], [1, -1]], "t0": 0, "T": 6.28 }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::geometry::BasisKind;
use crate::synthesis::{
    BasisChoice, CoefficientChoice, Interpretation, InvariantSpec, SdeSystem, SynthesisError,
    Synthesizer,
};

#[derive(Debug, Error)]
pub enum DefinitionError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, DefinitionError> {
    Err(DefinitionError::Invalid(msg.into()))
}

/// One initial state or several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialStates {
    One(Vec<f64>),
    Many(Vec<Vec<f64>>),
}

impl InitialStates {
    pub fn to_vec(&self) -> Vec<Vec<f64>> {
        match self {
            InitialStates::One(x) => vec![x.clone()],
            InitialStates::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDefinition {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Expr>,
    /// `"j,l"` → `u_j^l`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<BTreeMap<String, Expr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<Interpretation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<Expr>>,
    /// One array of `n` expressions per noise column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Vec<Vec<Expr>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<InitialStates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl SystemDefinition {
    pub fn from_json(text: &str) -> Result<Self, DefinitionError> {
        let def: Self = serde_json::from_str(text)?;
        def.validate()?;
        Ok(def)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    pub fn is_synthesized(&self) -> bool {
        self.u.is_some()
    }

    pub fn initial_states(&self) -> Vec<Vec<f64>> {
        self.x0.as_ref().map(InitialStates::to_vec).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), DefinitionError> {
        if self.n < 1 {
            return invalid("`n` must be at least 1");
        }
        let hand = self.drift.is_some() || self.diffusion.is_some();
        match (self.u.is_some(), hand) {
            (true, true) => return invalid("give either `M` + `u` or `drift` + `diffusion`, not both"),
            (false, false) if self.m.is_some() => {
                return invalid("missing `u`: a synthesized system needs coefficient functions")
            }
            (false, false) => return invalid("give either `M` + `u` or `drift` + `diffusion`"),
            (true, false) if self.m.is_none() => return invalid("`u` given without `M`"),
            (false, true) => {
                if self.drift.is_none() || self.diffusion.is_none() {
                    return invalid("hand-entered systems need both `drift` and `diffusion`");
                }
                if self.interpretation.is_none() {
                    return invalid("hand-entered systems must state `interpretation` (\"ito\" or \"stratonovich\")");
                }
                if self.basis.is_some() {
                    return invalid("`basis` applies only to synthesized systems");
                }
            }
            _ => {}
        }
        for x in self.initial_states() {
            if x.len() != self.n {
                return invalid(format!("initial state {x:?} has {} components, expected n = {}", x.len(), self.n));
            }
        }
        if let (Some(t0), Some(t1)) = (self.t0, self.t_end) {
            if !(t1 > t0) {
                return invalid(format!("`T` = {t1} must exceed `t0` = {t0}"));
            }
        }
        Ok(())
    }

    fn coefficient_choice(&self, s: usize) -> Result<CoefficientChoice, DefinitionError> {
        let mut choice = CoefficientChoice::new(self.n, s);
        for (key, e) in self.u.iter().flatten() {
            let (j, l) = parse_key(key)?;
            choice.set(j, l, e.clone())?;
        }
        Ok(choice)
    }

    pub fn synthesizer(&self) -> Result<Synthesizer, DefinitionError> {
        let (Some(m), Some(u)) = (&self.m, &self.u) else {
            return invalid("not a synthesized definition (needs `M` and `u`)");
        };
        let inferred = u
            .keys()
            .map(|k| parse_key(k).map(|(_, l)| l))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(1);
        let s = self.s.unwrap_or(inferred);
        if s == 0 {
            return invalid("`s` must be at least 1");
        }
        let spec = InvariantSpec::new(self.n, m.clone(), self.basis.unwrap_or_default())?;
        Ok(Synthesizer::new(spec, self.coefficient_choice(s)?)?)
    }

    pub fn build(&self) -> Result<SdeSystem, DefinitionError> {
        self.validate()?;
        if self.is_synthesized() {
            let interp = self.interpretation.unwrap_or(Interpretation::Ito);
            return Ok(SdeSystem::synthesize(self.synthesizer()?, interp));
        }
        let drift = self.drift.clone().unwrap_or_default();
        let diffusion = self.diffusion.clone().unwrap_or_default();
        if drift.len() != self.n {
            return invalid(format!("`drift` has {} entries, expected n = {}", drift.len(), self.n));
        }
        if let Some(s) = self.s {
            if s != diffusion.len() {
                return invalid(format!("`s` = {s} but `diffusion` has {} columns", diffusion.len()));
            }
        }
        let interp = self.interpretation.expect("validated");
        Ok(SdeSystem::explicit(interp, drift, diffusion, self.m.clone())?)
    }

    /// Definition that regenerates a synthesized system.
    pub fn from_synthesizer(synth: &Synthesizer, interpretation: Interpretation) -> Self {
        let basis = match synth.spec.kind() {
            BasisKind::Special2 | BasisKind::Special4 | BasisKind::Special8 => BasisChoice::Special,
            BasisKind::Projected(_) => BasisChoice::Projected,
            _ => BasisChoice::General,
        };
        let u = synth
            .choice
            .entries()
            .map(|(j, l, e)| (format!("{j},{l}"), e.clone()))
            .collect();
        SystemDefinition {
            n: synth.n(),
            s: Some(synth.s()),
            m: Some(synth.spec.first_integral().clone()),
            u: Some(u),
            basis: Some(basis),
            interpretation: Some(interpretation),
            ..Default::default()
        }
    }
}

fn parse_key(key: &str) -> Result<(usize, usize), DefinitionError> {
    let bad = || DefinitionError::Invalid(format!("bad coefficient key {key:?}, expected \"j,l\""));
    let (j, l) = key.split_once(',').ok_or_else(bad)?;
    let j = j.trim().parse().map_err(|_| bad())?;
    let l = l.trim().parse().map_err(|_| bad())?;
    Ok((j, l))
}
