//! Exact posterior queries.
//!
//! [`VariableElimination`] answers production queries. It prunes variables
//! that are not ancestors of the query or evidence (they sum to one), absorbs
//! evidence into the CPT factors and eliminates the rest with the min-fill
//! heuristic. [`EnumerationOracle`] sums the chain-rule joint over every
//! assignment and exists to check the former.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::network::DiscreteNetwork;

/// Observed states keyed by variable name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: impl Into<String>, state: impl Into<String>) -> Self {
        self.insert(variable, state);
        self
    }

    /// Returns the previously observed state, if any.
    pub fn insert(&mut self, variable: impl Into<String>, state: impl Into<String>) -> Option<String> {
        self.assignments.insert(variable.into(), state.into())
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn resolve(&self, net: &DiscreteNetwork) -> Result<Vec<(usize, usize)>> {
        self.iter().map(|(v, s)| net.state_id(v, s)).collect()
    }
}

/// Distribution of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub variable: String,
    pub states: Vec<String>,
    pub distribution: Vec<f64>,
}

impl Marginal {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.distribution[i])
    }

    fn from_factor(net: &DiscreteNetwork, var: usize, f: &Factor) -> Self {
        let v = net.variable(var);
        Marginal {
            variable: v.name().to_string(),
            states: v.states().to_vec(),
            distribution: f.values().to_vec(),
        }
    }
}

/// How min-fill ties between elimination candidates are broken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    Lexicographic,
    ReverseLexicographic,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VariableElimination {
    pub tie_break: TieBreak,
}

impl VariableElimination {
    pub fn new(tie_break: TieBreak) -> Self {
        Self { tie_break }
    }

    pub fn posterior_marginal(&self, net: &DiscreteNetwork, target: &str, evidence: &Evidence) -> Result<Marginal> {
        let t = net.id(target)?;
        let obs = evidence.resolve(net)?;
        let f = self.joint_ids(net, &[t], &obs)?;
        Ok(Marginal::from_factor(net, t, &f))
    }

    /// Normalised joint over `targets` (in the given order).
    pub fn joint_query(&self, net: &DiscreteNetwork, targets: &[&str], evidence: &Evidence) -> Result<Factor> {
        let ids = targets.iter().map(|t| net.id(t)).collect::<Result<Vec<_>>>()?;
        let obs = evidence.resolve(net)?;
        self.joint_ids(net, &ids, &obs)
    }

    pub fn joint_ids(&self, net: &DiscreteNetwork, targets: &[usize], evidence: &[(usize, usize)]) -> Result<Factor> {
        check_targets(net, targets)?;
        let cards = net.cardinalities();

        let mut seeds: Vec<usize> = targets.to_vec();
        seeds.extend(evidence.iter().map(|&(v, _)| v));
        let relevant = net.ancestors(&seeds);

        let mut factors = Vec::new();
        for v in (0..net.len()).filter(|&v| relevant[v]) {
            let mut f = Factor::from_cpt(net.cpt(v), &cards);
            for &(ev, es) in evidence {
                f = f.reduce(ev, es);
            }
            if !f.scope().is_empty() || f.values()[0] != 1.0 {
                f = f.normalized().ok_or(Error::ImpossibleEvidence)?;
            }
            factors.push(f);
        }

        // Evidence variables never appear in reduced factors; a target that is
        // also observed gets an indicator so it keeps its place in the scope.
        for &t in targets {
            if let Some(&(_, s)) = evidence.iter().find(|&&(v, _)| v == t) {
                let mut values = vec![0.0; cards[t]];
                values[s] = 1.0;
                factors.push(Factor::new(vec![t], vec![cards[t]], values));
            }
        }

        let names: Vec<&str> = net.variables().iter().map(|v| v.name()).collect();
        let joint = eliminate(factors, targets, &names, self.tie_break);
        joint.permute(targets).normalized().ok_or(Error::ImpossibleEvidence)
    }
}

fn check_targets(net: &DiscreteNetwork, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidQuery("no target variables".into()));
    }
    for (i, t) in targets.iter().enumerate() {
        if targets[..i].contains(t) {
            return Err(Error::InvalidQuery(format!(
                "target `{}` listed twice",
                net.variable(*t).name()
            )));
        }
    }
    Ok(())
}

/// Sum every variable outside `keep` out of the product of `factors`.
///
/// Variables are eliminated greedily by fewest fill-in edges in the
/// interaction graph; equal scores are ordered by `names` under `tie_break`.
/// The returned factor's scope is a permutation of the kept variables that
/// occur in `factors`.
pub fn eliminate(mut factors: Vec<Factor>, keep: &[usize], names: &[&str], tie_break: TieBreak) -> Factor {
    let mut pending: Vec<usize> = factors
        .iter()
        .flat_map(|f| f.scope().iter().copied())
        .filter(|v| !keep.contains(v))
        .collect();
    pending.sort_unstable();
    pending.dedup();

    while !pending.is_empty() {
        let pick = pick_min_fill(&factors, &pending, names, tie_break);
        let var = pending.swap_remove(pick);
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        factors = without;
        if let Some(product) = with.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(product.sum_out(var));
        }
    }

    factors
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .unwrap_or_else(|| Factor::scalar(1.0))
}

fn pick_min_fill(factors: &[Factor], pending: &[usize], names: &[&str], tie_break: TieBreak) -> usize {
    let mut best: Option<(usize, usize)> = None;
    for (i, &v) in pending.iter().enumerate() {
        let mut neighbours: Vec<usize> = factors
            .iter()
            .filter(|f| f.contains(v))
            .flat_map(|f| f.scope().iter().copied())
            .filter(|&u| u != v)
            .collect();
        neighbours.sort_unstable();
        neighbours.dedup();
        let mut fill = 0;
        for (a, &x) in neighbours.iter().enumerate() {
            for &y in &neighbours[a + 1..] {
                let linked = factors.iter().any(|f| f.contains(x) && f.contains(y));
                if !linked {
                    fill += 1;
                }
            }
        }
        best = match best {
            None => Some((i, fill)),
            Some((j, bf)) => {
                let better = match fill.cmp(&bf) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        let (a, b) = (names[v], names[pending[j]]);
                        match tie_break {
                            TieBreak::Lexicographic => a < b,
                            TieBreak::ReverseLexicographic => a > b,
                        }
                    }
                };
                if better {
                    Some((i, fill))
                } else {
                    Some((j, bf))
                }
            }
        };
    }
    best.expect("pending is non-empty").0
}

pub fn posterior_marginal(net: &DiscreteNetwork, target: &str, evidence: &Evidence) -> Result<Marginal> {
    VariableElimination::default().posterior_marginal(net, target, evidence)
}

pub fn joint_query(net: &DiscreteNetwork, targets: &[&str], evidence: &Evidence) -> Result<Factor> {
    VariableElimination::default().joint_query(net, targets, evidence)
}

/// Default cap on the number of joint assignments the oracle will visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

/// Reference inference by summing the full chain-rule joint.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationOracle {
    pub cap: u128,
}

impl Default for EnumerationOracle {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl EnumerationOracle {
    pub fn marginal(&self, net: &DiscreteNetwork, target: &str, evidence: &Evidence) -> Result<Marginal> {
        let t = net.id(target)?;
        let obs = evidence.resolve(net)?;
        let f = self.joint_ids(net, &[t], &obs)?;
        Ok(Marginal::from_factor(net, t, &f))
    }

    pub fn joint(&self, net: &DiscreteNetwork, targets: &[&str], evidence: &Evidence) -> Result<Factor> {
        let ids = targets.iter().map(|t| net.id(t)).collect::<Result<Vec<_>>>()?;
        let obs = evidence.resolve(net)?;
        self.joint_ids(net, &ids, &obs)
    }

    pub fn joint_ids(&self, net: &DiscreteNetwork, targets: &[usize], evidence: &[(usize, usize)]) -> Result<Factor> {
        check_targets(net, targets)?;
        let cards = net.cardinalities();
        let size: u128 = cards.iter().map(|&c| c as u128).product();
        if size > self.cap {
            return Err(Error::StateSpaceTooLarge { size, cap: self.cap });
        }
        let tcards: Vec<usize> = targets.iter().map(|&t| cards[t]).collect();
        let mut acc = vec![0.0; tcards.iter().product()];
        let mut assignment = vec![0usize; net.len()];
        'outer: loop {
            if evidence.iter().all(|&(v, s)| assignment[v] == s) {
                let p = net.joint_probability(&assignment);
                let mut idx = 0;
                for (&t, &c) in targets.iter().zip(&tcards) {
                    idx = idx * c + assignment[t];
                }
                acc[idx] += p;
            }
            for k in (0..net.len()).rev() {
                assignment[k] += 1;
                if assignment[k] < cards[k] {
                    continue 'outer;
                }
                assignment[k] = 0;
            }
            break;
        }
        Factor::new(targets.to_vec(), tcards, acc)
            .normalized()
            .ok_or(Error::ImpossibleEvidence)
    }
}

pub fn enumeration_oracle(net: &DiscreteNetwork, target: &str, evidence: &Evidence) -> Result<Marginal> {
    EnumerationOracle::default().marginal(net, target, evidence)
}
