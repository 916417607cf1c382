//! Two-slice dynamic Bayesian networks: unrolling and scenario evaluation.
//!
//! Slice 1 is the initial network. From slice 2 on every variable follows
//! its transition CPT, whose parents are either in the same slice (lag 0) or
//! in the previous one (lag 1). Variables with lagged parents fall back to
//! the initial CPT at slice 1; there is no slice 0.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::analytics::{sensitivity_ranking, SensitivityReport, UtilitySpec};
use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::inference::{eliminate, Marginal, TieBreak, VariableElimination};
use crate::intervention::{compose, Mechanism, Scenario};
use crate::network::{renormalise, topological_sort, DiscreteNetwork, NetworkBuilder, RENORMALISE_TOLERANCE};

pub const DEFAULT_HORIZON: usize = 10;

/// Name of `variable` in slice `slice` of an unrolled network.
pub fn slice_name(variable: &str, slice: usize) -> String {
    format!("{variable}[{slice}]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionParent {
    pub variable: usize,
    /// 0 for the same slice, 1 for the previous slice.
    pub lag: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCpt {
    pub child: usize,
    pub parents: Vec<TransitionParent>,
    /// Row-major over `parents` (last fastest), one row per assignment.
    pub table: Vec<f64>,
}

/// `(ℬ₁, ℬ→)`: an initial network plus a stationary transition model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSliceDbn {
    initial: DiscreteNetwork,
    transition: Vec<TransitionCpt>,
}

/// `(child, [(parent, lag)], table)` as accepted by [`TwoSliceDbn::new`].
pub type TransitionSpec = (String, Vec<(String, u8)>, Vec<f64>);

impl TwoSliceDbn {
    /// `transition` is keyed by variable name; parents are `(name, lag)`.
    pub fn new(initial: DiscreteNetwork, transition: Vec<TransitionSpec>) -> Result<Self> {
        let n = initial.len();
        let mut cpts: Vec<Option<TransitionCpt>> = vec![None; n];
        for (child, parents, mut table) in transition {
            let c = initial
                .id(&child)
                .map_err(|_| Error::InvalidDbn(format!("transition CPT for unknown variable `{child}`")))?;
            if cpts[c].is_some() {
                return Err(Error::InvalidDbn(format!("two transition CPTs for `{child}`")));
            }
            let mut seen = HashSet::new();
            let parents = parents
                .into_iter()
                .map(|(p, lag)| {
                    let variable = initial
                        .id(&p)
                        .map_err(|_| Error::InvalidDbn(format!("`{child}` has unknown parent `{p}`")))?;
                    if lag > 1 {
                        return Err(Error::InvalidDbn(format!(
                            "edge {p} -> {child} spans {lag} slices; only first-order links are allowed"
                        )));
                    }
                    if !seen.insert((variable, lag)) {
                        return Err(Error::InvalidDbn(format!("`{child}` lists parent `{p}` twice")));
                    }
                    if lag == 0 && variable == c {
                        return Err(Error::InvalidDbn(format!("`{child}` is its own parent")));
                    }
                    Ok(TransitionParent { variable, lag })
                })
                .collect::<Result<Vec<_>>>()?;
            let card = initial.cardinality(c);
            let rows: usize = parents.iter().map(|p| initial.cardinality(p.variable)).product();
            if table.len() != rows * card {
                return Err(Error::InvalidDbn(format!(
                    "transition CPT of `{child}` has {} entries, expected {}",
                    table.len(),
                    rows * card
                )));
            }
            for (r, row) in table.chunks_mut(card).enumerate() {
                if row.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
                    return Err(Error::InvalidDbn(format!(
                        "transition CPT of `{child}` row {r} has an entry outside [0, 1]"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > RENORMALISE_TOLERANCE {
                    return Err(Error::InvalidDbn(format!(
                        "transition CPT of `{child}` row {r} sums to {sum}"
                    )));
                }
                renormalise(row);
            }
            cpts[c] = Some(TransitionCpt {
                child: c,
                parents,
                table,
            });
        }
        let transition = cpts
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| Error::InvalidDbn(format!("no transition CPT for `{}`", initial.variable(i).name())))
            })
            .collect::<Result<Vec<_>>>()?;
        let dbn = Self { initial, transition };
        let names = dbn.names();
        topological_sort(&names, &dbn.intra_edges()).map_err(|e| match e {
            Error::Cycle(nodes) => Error::InvalidDbn(format!("intra-slice cycle through {nodes:?}")),
            other => other,
        })?;
        Ok(dbn)
    }

    pub fn initial(&self) -> &DiscreteNetwork {
        &self.initial
    }

    pub fn transition(&self) -> &[TransitionCpt] {
        &self.transition
    }

    pub fn transition_cpt(&self, id: usize) -> &TransitionCpt {
        &self.transition[id]
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.initial.id(name)
    }

    fn names(&self) -> Vec<&str> {
        self.initial.variables().iter().map(|v| v.name()).collect()
    }

    /// Same-slice edges of the transition model.
    pub fn intra_edges(&self) -> Vec<(usize, usize)> {
        self.edges_with_lag(0)
    }

    /// Edges from slice t−1 into slice t.
    pub fn temporal_edges(&self) -> Vec<(usize, usize)> {
        self.edges_with_lag(1)
    }

    fn edges_with_lag(&self, lag: u8) -> Vec<(usize, usize)> {
        self.transition
            .iter()
            .flat_map(|c| {
                c.parents
                    .iter()
                    .filter(move |p| p.lag == lag)
                    .map(move |p| (p.variable, c.child))
            })
            .collect()
    }

    /// Root in both slice-1 and transition graphs: the only targets of a
    /// distribution replacement.
    pub fn is_root(&self, id: usize) -> bool {
        self.initial.is_root(id) && self.transition[id].parents.is_empty()
    }

    /// Variables read by some lagged edge; their joint is the state carried
    /// from one slice to the next.
    pub fn interface(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.temporal_edges().into_iter().map(|(p, _)| p).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// The DBN expanded over `horizon` slices into one static network.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledNetwork {
    horizon: usize,
    base: Vec<String>,
    net: DiscreteNetwork,
}

impl UnrolledNetwork {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn net(&self) -> &DiscreteNetwork {
        &self.net
    }

    /// Names of the per-slice variables, without slice tags.
    pub fn base_variables(&self) -> &[String] {
        &self.base
    }

    pub fn id(&self, variable: &str, slice: usize) -> Result<usize> {
        self.net.id(&slice_name(variable, slice))
    }

    pub(crate) fn with_net(&self, net: DiscreteNetwork) -> Self {
        Self {
            horizon: self.horizon,
            base: self.base.clone(),
            net,
        }
    }
}

pub fn unroll(dbn: &TwoSliceDbn, horizon: usize) -> Result<UnrolledNetwork> {
    if horizon == 0 {
        return Err(Error::InvalidDbn("horizon must be at least one slice".into()));
    }
    let init = dbn.initial();
    let names = dbn.names();
    let mut b = NetworkBuilder::new();
    for t in 1..=horizon {
        for v in init.variables() {
            b.variable(slice_name(v.name(), t), v.states().iter().cloned());
        }
    }
    for (id, name) in names.iter().enumerate() {
        let child = slice_name(name, 1);
        let parents: Vec<String> = init.parents(id).iter().map(|&p| slice_name(names[p], 1)).collect();
        for p in &parents {
            b.edge(p.clone(), child.clone());
        }
        b.cpt(child, parents, init.cpt(id).table().to_vec());
    }
    for t in 2..=horizon {
        for cpt in dbn.transition() {
            let child = slice_name(names[cpt.child], t);
            let parents: Vec<String> = cpt
                .parents
                .iter()
                .map(|p| slice_name(names[p.variable], t - usize::from(p.lag)))
                .collect();
            for p in &parents {
                b.edge(p.clone(), child.clone());
            }
            b.cpt(child, parents, cpt.table.clone());
        }
    }
    Ok(UnrolledNetwork {
        horizon,
        base: names.iter().map(|s| s.to_string()).collect(),
        net: b.build()?,
    })
}

/// Utility and target probabilities at one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice: usize,
    /// `P(target = good)` for each utility target, in spec order.
    pub good: Vec<f64>,
    /// `wᵢ · pᵢ · scale` per target.
    pub contributions: Vec<f64>,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTimeline {
    /// Target labels, matching the order of `good` and `contributions`.
    pub targets: Vec<String>,
    pub records: Vec<SliceRecord>,
}

impl UtilityTimeline {
    pub fn from_probabilities(spec: &UtilitySpec, per_slice: &[Vec<f64>]) -> Self {
        Self {
            targets: spec.targets.iter().map(|t| t.label.clone()).collect(),
            records: per_slice
                .iter()
                .enumerate()
                .map(|(i, good)| SliceRecord {
                    slice: i + 1,
                    good: good.clone(),
                    contributions: spec.contributions(good),
                    utility: spec.score(good),
                })
                .collect(),
        }
    }

    pub fn utilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.utility).collect()
    }
}

/// Evaluate `scenario` by unrolling, applying its interventions and running
/// exact inference for every utility target at every slice.
pub fn run_scenario(
    dbn: &TwoSliceDbn,
    scenario: &Scenario,
    horizon: usize,
    spec: &UtilitySpec,
) -> Result<UtilityTimeline> {
    let unrolled = compose(scenario, &unroll(dbn, horizon)?, dbn)?;
    let vars: Vec<&str> = spec.targets.iter().map(|t| t.variable.as_str()).collect();
    let marginals = slice_marginals(&unrolled, &vars)?;
    timeline_from(spec, &marginals)
}

fn timeline_from(spec: &UtilitySpec, marginals: &[Vec<Marginal>]) -> Result<UtilityTimeline> {
    let per_slice = marginals
        .iter()
        .map(|slice| spec.good_probabilities(slice))
        .collect::<Result<Vec<_>>>()?;
    Ok(UtilityTimeline::from_probabilities(spec, &per_slice))
}

/// Utility timeline plus every variable's marginal at every slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub timeline: UtilityTimeline,
    /// `[slice - 1][variable id]`.
    pub marginals: Vec<Vec<Marginal>>,
}

/// As [`run_scenario`], also reporting all per-slice marginals.
pub fn evaluate_scenario(
    dbn: &TwoSliceDbn,
    scenario: &Scenario,
    horizon: usize,
    spec: &UtilitySpec,
) -> Result<ScenarioRun> {
    spec.check()?;
    let unrolled = compose(scenario, &unroll(dbn, horizon)?, dbn)?;
    let names: Vec<&str> = unrolled.base_variables().iter().map(String::as_str).collect();
    let marginals = slice_marginals(&unrolled, &names)?;
    Ok(ScenarioRun {
        timeline: timeline_from(spec, &marginals)?,
        marginals,
    })
}

/// Marginals of `variables` at every slice, named without slice tags.
pub fn slice_marginals(unrolled: &UnrolledNetwork, variables: &[&str]) -> Result<Vec<Vec<Marginal>>> {
    let ve = VariableElimination::default();
    let net = unrolled.net();
    (1..=unrolled.horizon())
        .map(|t| {
            variables
                .iter()
                .map(|v| {
                    let id = unrolled.id(v, t)?;
                    let f = ve.joint_ids(net, &[id], &[])?;
                    Ok(Marginal {
                        variable: v.to_string(),
                        states: net.variable(id).states().to_vec(),
                        distribution: f.values().to_vec(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Per-slice marginals of `wanted` (ids into the initial network), computed
/// by carrying the exact joint of the interface variables forward one slice
/// at a time.
///
/// Equivalent to inference on the unrolled network when there is no
/// evidence, at a cost linear in the horizon. `mechanisms(t)` lists the
/// replaced mechanisms active at slice `t`. Output is indexed
/// `[slice - 1][position in wanted][state]`.
pub fn forward_marginals<F>(
    dbn: &TwoSliceDbn,
    horizon: usize,
    wanted: &[usize],
    mut mechanisms: F,
) -> Result<Vec<Vec<Vec<f64>>>>
where
    F: FnMut(usize) -> Vec<(usize, Mechanism)>,
{
    let n = dbn.len();
    let init = dbn.initial();
    let cards = init.cardinalities();
    if let Some(&bad) = wanted.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidQuery(format!("no variable with id {bad}")));
    }
    // Current slice uses ids 0..n, the previous slice n..2n.
    let mut names: Vec<String> = init.variables().iter().map(|v| v.name().to_string()).collect();
    names.extend(init.variables().iter().map(|v| format!("{}[prev]", v.name())));
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let interface = dbn.interface();

    let mut belief: Option<Factor> = None;
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let overrides = mechanisms(t);
        let mut factors = Vec::with_capacity(n + 1);
        if let Some(b) = &belief {
            factors.push(b.clone());
        }
        for v in 0..n {
            if let Some((_, m)) = overrides.iter().find(|(id, _)| *id == v) {
                factors.push(Factor::new(vec![v], vec![cards[v]], m.distribution(cards[v])));
                continue;
            }
            let f = if t == 1 {
                Factor::from_cpt(init.cpt(v), &cards)
            } else {
                let cpt = dbn.transition_cpt(v);
                let mut scope: Vec<usize> = cpt
                    .parents
                    .iter()
                    .map(|p| p.variable + n * usize::from(p.lag))
                    .collect();
                scope.push(v);
                let fc = scope.iter().map(|&s| cards[s % n]).collect();
                Factor::new(scope, fc, cpt.table.clone())
            };
            factors.push(f);
        }
        let joint = if interface.is_empty() {
            None
        } else {
            Some(
                eliminate(factors.clone(), &interface, &names, TieBreak::Lexicographic)
                    .permute(&interface)
                    .normalized()
                    .ok_or(Error::ImpossibleEvidence)?,
            )
        };
        let slice: Vec<Vec<f64>> = wanted
            .iter()
            .map(|&v| {
                let f = match &joint {
                    Some(j) if interface.contains(&v) => j.marginalize_to(&[v]),
                    _ => eliminate(factors.clone(), &[v], &names, TieBreak::Lexicographic),
                };
                f.normalized()
                    .map(|f| f.values().to_vec())
                    .ok_or(Error::ImpossibleEvidence)
            })
            .collect::<Result<_>>()?;
        out.push(slice);
        if let Some(joint) = joint {
            let shifted: Vec<usize> = interface.iter().map(|v| v + n).collect();
            belief = Some(Factor::new(
                shifted,
                joint.cardinalities().to_vec(),
                joint.values().to_vec(),
            ));
        }
    }
    Ok(out)
}

/// First slice from which every later step changes utility by less than
/// `tol`; `None` if the timeline never settles before the horizon.
pub fn steady_state_check(timeline: &UtilityTimeline, tol: f64) -> Option<usize> {
    let u = timeline.utilities();
    match u.len() {
        0 => None,
        1 => Some(1),
        len => (0..len - 1)
            .find(|&s| u[s..].windows(2).all(|w| (w[1] - w[0]).abs() < tol))
            .map(|s| s + 1),
    }
}

/// Rank every other node of the network unrolled to `max(slice, 2)` by
/// its information about `target` at `slice`, with no evidence.
pub fn slice_sensitivity(dbn: &TwoSliceDbn, target: &str, slice: usize, top_k: usize) -> Result<SensitivityReport> {
    if slice < 1 {
        return Err(Error::InvalidQuery("slices are numbered from 1".into()));
    }
    let unrolled = unroll(dbn, slice.max(2))?;
    let target = slice_name(target, slice);
    let net = unrolled.net();
    net.id(&target)?;
    let candidates: Vec<&str> = net
        .variables()
        .iter()
        .map(|v| v.name())
        .filter(|&n| n != target)
        .collect();
    sensitivity_ranking(net, &target, &candidates, top_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::posterior_marginal;
    use crate::inference::Evidence;

    const NONE: [&str; 0] = [];

    fn sticky(p_stay: f64) -> TwoSliceDbn {
        let mut b = NetworkBuilder::new();
        b.node("X", &["a", "b"], NONE, vec![0.3, 0.7]);
        TwoSliceDbn::new(
            b.build().unwrap(),
            vec![(
                "X".into(),
                vec![("X".into(), 1)],
                vec![p_stay, 1.0 - p_stay, 1.0 - p_stay, p_stay],
            )],
        )
        .unwrap()
    }

    fn timeline(values: &[f64]) -> UtilityTimeline {
        UtilityTimeline {
            targets: vec![],
            records: values
                .iter()
                .enumerate()
                .map(|(i, &u)| SliceRecord {
                    slice: i + 1,
                    good: vec![],
                    contributions: vec![],
                    utility: u,
                })
                .collect(),
        }
    }

    #[test]
    fn single_slice_equals_initial_network() {
        let dbn = sticky(0.9);
        let u = unroll(&dbn, 1).unwrap();
        assert_eq!(u.net().len(), 1);
        assert_eq!(u.net().variable(0).name(), "X[1]");
        assert_eq!(u.net().cpt(0).table(), dbn.initial().cpt(0).table());
    }

    #[test]
    fn absorbing_chain_keeps_marginal() {
        let u = unroll(&sticky(1.0), 6).unwrap();
        for t in 1..=6 {
            let m = posterior_marginal(u.net(), &slice_name("X", t), &Evidence::new()).unwrap();
            assert!((m.distribution[0] - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn unrolled_size_and_markov_evolution() {
        let u = unroll(&sticky(0.8), 4).unwrap();
        assert_eq!(u.net().len(), 4);
        let mut p = 0.3;
        for t in 1..=4 {
            let m = posterior_marginal(u.net(), &slice_name("X", t), &Evidence::new()).unwrap();
            assert!((m.distribution[0] - p).abs() < 1e-14);
            p = 0.8 * p + 0.2 * (1.0 - p);
        }
    }

    #[test]
    fn rejects_bad_dbns() {
        let mut b = NetworkBuilder::new();
        b.node("X", &["a", "b"], NONE, vec![0.5, 0.5])
            .node("Y", &["a", "b"], NONE, vec![0.5, 0.5]);
        let init = b.build().unwrap();
        let flat = vec![0.5; 4];
        // Second-order link.
        assert!(TwoSliceDbn::new(
            init.clone(),
            vec![
                ("X".into(), vec![("X".into(), 2)], flat.clone()),
                ("Y".into(), vec![], vec![0.5, 0.5]),
            ]
        )
        .is_err());
        // Intra-slice cycle.
        assert!(TwoSliceDbn::new(
            init.clone(),
            vec![
                ("X".into(), vec![("Y".into(), 0)], flat.clone()),
                ("Y".into(), vec![("X".into(), 0)], flat.clone()),
            ]
        )
        .is_err());
        // Missing transition CPT.
        assert!(TwoSliceDbn::new(init.clone(), vec![("X".into(), vec![], vec![0.5, 0.5])]).is_err());
        // Bad row.
        assert!(TwoSliceDbn::new(
            init,
            vec![
                ("X".into(), vec![], vec![0.5, 0.6]),
                ("Y".into(), vec![], vec![0.5, 0.5]),
            ]
        )
        .is_err());
        assert!(unroll(&sticky(0.5), 0).is_err());
    }

    #[test]
    fn steady_state_examples() {
        assert_eq!(steady_state_check(&timeline(&[5.0; 10]), 0.01), Some(1));
        assert_eq!(steady_state_check(&timeline(&[1.0, 2.0, 3.0, 4.0]), 0.01), None);
        assert_eq!(
            steady_state_check(
                &timeline(&[38.8, 41.10, 41.5, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63, 41.63]),
                0.01
            ),
            Some(4)
        );
        assert_eq!(steady_state_check(&timeline(&[]), 0.01), None);
    }

    #[test]
    fn forward_filter_matches_unrolled_chain() {
        let dbn = sticky(0.7);
        let fwd = forward_marginals(&dbn, 5, &[0], |_| Vec::new()).unwrap();
        let u = unroll(&dbn, 5).unwrap();
        for t in 1..=5 {
            let m = posterior_marginal(u.net(), &slice_name("X", t), &Evidence::new()).unwrap();
            assert!((fwd[t - 1][0][0] - m.distribution[0]).abs() < 1e-14);
        }
    }
}
