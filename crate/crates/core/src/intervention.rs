//! Causal interventions.
//!
//! A hard intervention replaces a variable's mechanism by a point mass and
//! cuts its incoming edges, so its ancestors keep their observational
//! distribution. A prior intervention swaps the distribution of a parentless
//! variable. In a scenario each intervention is active over an inclusive
//! window of slices and the original mechanism applies everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DiscreteNetwork;
use crate::temporal::{slice_name, TwoSliceDbn, UnrolledNetwork};

const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InterventionKind {
    /// `do(X = state)`.
    HardDo { variable: String, state: String },
    /// `do(P(X) = prior)` on a root variable.
    PriorDo { variable: String, prior: Vec<f64> },
}

impl InterventionKind {
    pub fn variable(&self) -> &str {
        match self {
            Self::HardDo { variable, .. } | Self::PriorDo { variable, .. } => variable,
        }
    }
}

/// Inclusive, 1-based range of slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceWindow {
    pub from: usize,
    pub to: usize,
}

impl SliceWindow {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }

    pub fn contains(&self, slice: usize) -> bool {
        self.from <= slice && slice <= self.to
    }

    pub fn overlaps(&self, other: &SliceWindow) -> bool {
        self.from <= other.to && other.from <= self.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub kind: InterventionKind,
    pub window: SliceWindow,
}

impl Intervention {
    pub fn fix(variable: &str, state: &str, from: usize, to: usize) -> Self {
        Self {
            kind: InterventionKind::HardDo {
                variable: variable.into(),
                state: state.into(),
            },
            window: SliceWindow::new(from, to),
        }
    }

    pub fn prior(variable: &str, prior: Vec<f64>, from: usize, to: usize) -> Self {
        Self {
            kind: InterventionKind::PriorDo {
                variable: variable.into(),
                prior,
            },
            window: SliceWindow::new(from, to),
        }
    }
}

/// A named policy or event: a set of windowed interventions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub interventions: Vec<Intervention>,
}

/// Replacement mechanism for one variable in one slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Fixed(usize),
    Prior(Vec<f64>),
}

impl Mechanism {
    pub fn distribution(&self, cardinality: usize) -> Vec<f64> {
        match self {
            Self::Fixed(s) => {
                let mut d = vec![0.0; cardinality];
                d[*s] = 1.0;
                d
            }
            Self::Prior(p) => p.clone(),
        }
    }
}

impl Scenario {
    pub fn new(name: impl Into<String>, interventions: Vec<Intervention>) -> Self {
        Self {
            name: name.into(),
            description: String::new(),
            interventions,
        }
    }

    /// Check targets, states, priors, windows and conflicts against `dbn`.
    pub fn validate(&self, dbn: &TwoSliceDbn, horizon: usize) -> Result<()> {
        for iv in &self.interventions {
            let w = iv.window;
            if w.from < 1 || w.from > w.to || w.to > horizon {
                return Err(Error::WindowOutOfRange {
                    from: w.from,
                    to: w.to,
                    horizon,
                });
            }
            self.resolve(dbn, iv)?;
        }
        for (i, a) in self.interventions.iter().enumerate() {
            for b in &self.interventions[i + 1..] {
                if a.kind.variable() == b.kind.variable() && a.window.overlaps(&b.window) {
                    return Err(Error::ConflictingInterventions {
                        variable: a.kind.variable().to_string(),
                        first: (a.window.from, a.window.to),
                        second: (b.window.from, b.window.to),
                    });
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, dbn: &TwoSliceDbn, iv: &Intervention) -> Result<(usize, Mechanism)> {
        let net = dbn.initial();
        match &iv.kind {
            InterventionKind::HardDo { variable, state } => {
                let (id, s) = net.state_id(variable, state)?;
                Ok((id, Mechanism::Fixed(s)))
            }
            InterventionKind::PriorDo { variable, prior } => {
                let id = net.id(variable)?;
                if !dbn.is_root(id) {
                    return Err(Error::InvalidIntervention {
                        variable: variable.clone(),
                        reason: "distribution replacement needs a variable without parents; fix its value instead"
                            .into(),
                    });
                }
                check_prior(net, id, prior)?;
                Ok((id, Mechanism::Prior(prior.clone())))
            }
        }
    }

    /// Mechanisms in force at `slice`.
    pub fn mechanisms_at(&self, dbn: &TwoSliceDbn, slice: usize) -> Result<Vec<(usize, Mechanism)>> {
        self.interventions
            .iter()
            .filter(|iv| iv.window.contains(slice))
            .map(|iv| self.resolve(dbn, iv))
            .collect()
    }
}

fn check_prior(net: &DiscreteNetwork, id: usize, prior: &[f64]) -> Result<()> {
    let name = net.variable(id).name();
    let invalid = |reason: String| Error::InvalidIntervention {
        variable: name.to_string(),
        reason,
    };
    if prior.len() != net.cardinality(id) {
        return Err(invalid(format!(
            "prior has {} entries for {} states",
            prior.len(),
            net.cardinality(id)
        )));
    }
    if prior.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(invalid("prior entries must lie in [0, 1]".into()));
    }
    let sum: f64 = prior.iter().sum();
    if (sum - 1.0).abs() > PRIOR_TOLERANCE {
        return Err(invalid(format!("prior sums to {sum}")));
    }
    Ok(())
}

/// `do(variable = state)`: point-mass CPT, incoming edges removed.
pub fn apply_hard_do(net: &DiscreteNetwork, variable: &str, state: &str) -> Result<DiscreteNetwork> {
    let (id, s) = net.state_id(variable, state)?;
    Ok(net.with_cpt(id, Vec::new(), Mechanism::Fixed(s).distribution(net.cardinality(id))))
}

/// `do(P(variable) = prior)` for a root variable.
pub fn apply_prior_do(net: &DiscreteNetwork, variable: &str, prior: &[f64]) -> Result<DiscreteNetwork> {
    let id = net.id(variable)?;
    if !net.is_root(id) {
        return Err(Error::InvalidIntervention {
            variable: variable.to_string(),
            reason: "distribution replacement needs a variable without parents".into(),
        });
    }
    check_prior(net, id, prior)?;
    Ok(net.with_cpt(id, Vec::new(), prior.to_vec()))
}

/// Apply every intervention of `scenario` to each slice of its window.
pub fn compose(scenario: &Scenario, unrolled: &UnrolledNetwork, dbn: &TwoSliceDbn) -> Result<UnrolledNetwork> {
    scenario.validate(dbn, unrolled.horizon())?;
    let mut net = unrolled.net().clone();
    for iv in &scenario.interventions {
        for t in iv.window.from..=iv.window.to {
            let name = slice_name(iv.kind.variable(), t);
            net = match &iv.kind {
                InterventionKind::HardDo { state, .. } => apply_hard_do(&net, &name, state)?,
                InterventionKind::PriorDo { prior, .. } => apply_prior_do(&net, &name, prior)?,
            };
        }
    }
    Ok(unrolled.with_net(net))
}
