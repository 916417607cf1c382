//! Utility scoring and sensitivity measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::inference::{Evidence, Marginal, VariableElimination};
use crate::network::DiscreteNetwork;

pub const DEFAULT_SCALE: f64 = 100.0;
const WEIGHT_TOLERANCE: f64 = 1e-9;

/// One scored outcome: `weight · P(variable = good_state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityTarget {
    /// Short column label, e.g. `honeybee`.
    pub label: String,
    pub variable: String,
    pub good_state: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    Linear,
    /// `1 - exp(-a x)` applied to the weighted mean; penalises risk.
    Exponential {
        risk_coefficient: f64,
    },
}

/// On the wire the kind is a flat `kind` tag plus `risk_coefficient`;
/// specs are checked as they are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UtilityWire", into = "UtilityWire")]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub targets: Vec<UtilityTarget>,
    pub scale: f64,
}

fn default_scale() -> f64 {
    DEFAULT_SCALE
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Linear,
    Exponential,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityWire {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    risk_coefficient: Option<f64>,
    targets: Vec<UtilityTarget>,
    #[serde(default = "default_scale")]
    scale: f64,
}

impl TryFrom<UtilityWire> for UtilitySpec {
    type Error = Error;

    fn try_from(w: UtilityWire) -> Result<Self> {
        let kind = match (w.kind, w.risk_coefficient) {
            (KindTag::Linear, None) => UtilityKind::Linear,
            (KindTag::Exponential, Some(risk_coefficient)) => UtilityKind::Exponential { risk_coefficient },
            (KindTag::Linear, Some(_)) => {
                return Err(Error::InvalidUtility(
                    "risk_coefficient applies only to exponential utilities".into(),
                ))
            }
            (KindTag::Exponential, None) => {
                return Err(Error::InvalidUtility(
                    "exponential utility needs a risk_coefficient".into(),
                ))
            }
        };
        let spec = Self {
            kind,
            targets: w.targets,
            scale: w.scale,
        };
        spec.check()?;
        Ok(spec)
    }
}

impl From<UtilitySpec> for UtilityWire {
    fn from(s: UtilitySpec) -> Self {
        let (kind, risk_coefficient) = match s.kind {
            UtilityKind::Linear => (KindTag::Linear, None),
            UtilityKind::Exponential { risk_coefficient } => (KindTag::Exponential, Some(risk_coefficient)),
        };
        Self {
            kind,
            risk_coefficient,
            targets: s.targets,
            scale: s.scale,
        }
    }
}

impl UtilitySpec {
    pub fn linear(targets: Vec<UtilityTarget>, scale: f64) -> Result<Self> {
        let spec = Self {
            kind: UtilityKind::Linear,
            targets,
            scale,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn exponential(risk_coefficient: f64, targets: Vec<UtilityTarget>, scale: f64) -> Result<Self> {
        let spec = Self {
            kind: UtilityKind::Exponential { risk_coefficient },
            targets,
            scale,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Equal weights over `(label, variable, good_state)` triples.
    pub fn equal_weights(targets: &[(&str, &str, &str)]) -> Result<Self> {
        let w = 1.0 / targets.len() as f64;
        Self::linear(
            targets
                .iter()
                .map(|&(label, variable, good_state)| UtilityTarget {
                    label: label.into(),
                    variable: variable.into(),
                    good_state: good_state.into(),
                    weight: w,
                })
                .collect(),
            DEFAULT_SCALE,
        )
    }

    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidUtility("no targets".into()));
        }
        if let Some(t) = self.targets.iter().find(|t| !(t.weight >= 0.0)) {
            return Err(Error::InvalidUtility(format!("weight of `{}` is negative", t.label)));
        }
        let total: f64 = self.targets.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidUtility(format!("weights sum to {total}, not 1")));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidUtility("scale must be positive".into()));
        }
        if let UtilityKind::Exponential { risk_coefficient } = self.kind {
            if !(risk_coefficient > 0.0) {
                return Err(Error::InvalidUtility("risk coefficient must be positive".into()));
            }
        }
        Ok(())
    }

    /// Score from the probabilities of each target's good state, in target order.
    pub fn score(&self, good: &[f64]) -> f64 {
        let mean: f64 = self.targets.iter().zip(good).map(|(t, p)| t.weight * p).sum();
        match self.kind {
            UtilityKind::Linear => self.scale * mean,
            UtilityKind::Exponential { risk_coefficient } => self.scale * (1.0 - (-risk_coefficient * mean).exp()),
        }
    }

    /// Per-target share `wᵢ · pᵢ · scale`; sums to the linear score.
    pub fn contributions(&self, good: &[f64]) -> Vec<f64> {
        self.targets
            .iter()
            .zip(good)
            .map(|(t, p)| t.weight * p * self.scale)
            .collect()
    }

    /// Pick each target's good-state probability out of `marginals`.
    pub fn good_probabilities(&self, marginals: &[Marginal]) -> Result<Vec<f64>> {
        self.targets
            .iter()
            .map(|t| {
                let m = marginals
                    .iter()
                    .find(|m| m.variable == t.variable)
                    .ok_or_else(|| Error::MissingMarginal(t.variable.clone()))?;
                m.probability(&t.good_state).ok_or_else(|| Error::UnknownState {
                    variable: t.variable.clone(),
                    state: t.good_state.clone(),
                })
            })
            .collect()
    }
}

pub fn utility(marginals: &[Marginal], spec: &UtilitySpec) -> Result<f64> {
    Ok(spec.score(&spec.good_probabilities(marginals)?))
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(distribution: &[f64]) -> f64 {
    -distribution
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    pub bits: f64,
    /// `100 · I / H(X)`; zero when `H(X) = 0`, see `degenerate`.
    pub percent_of_entropy: f64,
    pub degenerate: bool,
}

/// Row marginal, column marginal of a two-variable joint (x first).
fn split(joint: &Factor) -> (usize, usize, Vec<f64>, Vec<f64>) {
    assert_eq!(joint.scope().len(), 2, "pairwise measure needs a 2-variable joint");
    let (nx, ny) = (joint.cardinalities()[0], joint.cardinalities()[1]);
    let v = joint.values();
    let px: Vec<f64> = (0..nx).map(|i| v[i * ny..(i + 1) * ny].iter().sum()).collect();
    let py: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| v[i * ny + j]).sum()).collect();
    (nx, ny, px, py)
}

/// `I(X;Y)` from a normalised joint whose first scope variable is X.
pub fn mutual_information_from_joint(joint: &Factor) -> MutualInformation {
    let (nx, ny, px, py) = split(joint);
    let v = joint.values();
    let mut bits = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let pxy = v[i * ny + j];
            if pxy > 0.0 {
                bits += pxy * (pxy / (px[i] * py[j])).log2();
            }
        }
    }
    // Rounding can leave a tiny negative value for independent pairs.
    let bits = bits.max(0.0);
    let hx = entropy(&px);
    let degenerate = hx <= 0.0;
    MutualInformation {
        bits,
        percent_of_entropy: if degenerate { 0.0 } else { 100.0 * bits / hx },
        degenerate,
    }
}

/// `S²(X;Y) = Σ_y Σ_x p(x,y) [p(x|y) − p(x)]²` from a joint with X first.
pub fn variance_of_belief_from_joint(joint: &Factor) -> f64 {
    let (nx, ny, px, py) = split(joint);
    let v = joint.values();
    let mut s2 = 0.0;
    for j in 0..ny {
        if py[j] <= 0.0 {
            continue;
        }
        for i in 0..nx {
            let pxy = v[i * ny + j];
            let d = pxy / py[j] - px[i];
            s2 += pxy * d * d;
        }
    }
    s2
}

pub fn mutual_information(net: &DiscreteNetwork, x: &str, y: &str) -> Result<MutualInformation> {
    Ok(mutual_information_from_joint(&pair_joint(net, x, y)?))
}

pub fn variance_of_belief(net: &DiscreteNetwork, x: &str, y: &str) -> Result<f64> {
    Ok(variance_of_belief_from_joint(&pair_joint(net, x, y)?))
}

fn pair_joint(net: &DiscreteNetwork, x: &str, y: &str) -> Result<Factor> {
    if x == y {
        return Err(Error::InvalidQuery(format!("`{x}` compared with itself")));
    }
    VariableElimination::default().joint_query(net, &[x, y], &Evidence::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub source: String,
    pub mutual_information: f64,
    pub percent_of_entropy: f64,
    pub variance_of_belief: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub target: String,
    pub rows: Vec<SensitivityRow>,
}

/// Rank `candidates` by how much a finding at each would inform `target`.
pub fn sensitivity_ranking(
    net: &DiscreteNetwork,
    target: &str,
    candidates: &[&str],
    top_k: usize,
) -> Result<SensitivityReport> {
    net.id(target)?;
    if candidates.contains(&target) {
        return Err(Error::InvalidQuery(format!("target `{target}` is also a candidate")));
    }
    let mut rows = candidates
        .iter()
        .map(|&c| {
            let joint = pair_joint(net, target, c)?;
            let mi = mutual_information_from_joint(&joint);
            Ok(SensitivityRow {
                source: c.to_string(),
                mutual_information: mi.bits,
                percent_of_entropy: mi.percent_of_entropy,
                variance_of_belief: variance_of_belief_from_joint(&joint),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        b.mutual_information
            .total_cmp(&a.mutual_information)
            .then_with(|| a.source.cmp(&b.source))
    });
    rows.truncate(top_k);
    Ok(SensitivityReport {
        target: target.to_string(),
        rows,
    })
}
