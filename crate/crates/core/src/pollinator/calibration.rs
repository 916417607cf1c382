//! Least-squares fit of the free CPT entries to the anchor set.
//!
//! The search is a bounded coordinate descent: each sweep visits the
//! parameters in a fixed order and takes the best of a step either way
//! and the vertex of the parabola through the three points. Restarts are
//! jittered from the hand-set start with a seeded ChaCha stream, so a
//! given seed always produces the same model.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::anchors::{AnchorKind, AnchorSet, Query};
use super::{assemble, default_utility, initial_guess, FixedParameters, FREE_PARAMETERS};
use crate::analytics::{mutual_information_from_joint, variance_of_belief_from_joint, UtilitySpec};
use crate::error::{Error, Result};
use crate::inference::VariableElimination;
use crate::intervention::Scenario;
use crate::temporal::{forward_marginals, unroll, TwoSliceDbn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub seed: u64,
    /// Extra jittered starts after the hand-set one.
    pub restarts: usize,
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Residual scale used to turn curvature into standard errors.
    pub residual_scale: f64,
    /// Standard error above which a parameter is reported as weakly
    /// identified.
    pub weak_threshold: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            restarts: 0,
            max_sweeps: 800,
            initial_step: 0.05,
            min_step: 1e-6,
            residual_scale: 0.005,
            weak_threshold: 0.05,
        }
    }
}

/// Computes every anchor's model value for a candidate DBN.
pub struct Evaluator<'a> {
    fixed: &'a FixedParameters,
    anchors: &'a AnchorSet,
    scenarios: BTreeMap<String, Scenario>,
    utility: UtilitySpec,
}

#[derive(Default)]
struct ScenarioNeeds {
    horizon: usize,
    marginal_slices: usize,
    marginal_vars: BTreeSet<String>,
}

impl<'a> Evaluator<'a> {
    pub fn new(fixed: &'a FixedParameters, anchors: &'a AnchorSet, scenarios: &[Scenario]) -> Result<Self> {
        let scenarios: BTreeMap<String, Scenario> = scenarios.iter().map(|s| (s.name.clone(), s.clone())).collect();
        for name in anchors.scenarios() {
            if !scenarios.contains_key(name) {
                return Err(Error::Calibration(format!(
                    "anchor refers to unknown scenario `{name}`"
                )));
            }
        }
        Ok(Self {
            fixed,
            anchors,
            scenarios,
            utility: default_utility(),
        })
    }

    pub fn anchors(&self) -> &AnchorSet {
        self.anchors
    }

    fn needs(&self) -> BTreeMap<&str, ScenarioNeeds> {
        let mut needs: BTreeMap<&str, ScenarioNeeds> = BTreeMap::new();
        for a in &self.anchors.anchors {
            match &a.query {
                Query::Marginal {
                    scenario,
                    slice,
                    variable,
                    ..
                } => {
                    let n = needs.entry(scenario).or_default();
                    n.marginal_slices = n.marginal_slices.max(*slice);
                    n.marginal_vars.insert(variable.clone());
                }
                Query::Utility { scenario, slice } => {
                    let n = needs.entry(scenario).or_default();
                    n.horizon = n.horizon.max(*slice);
                }
                Query::Step { scenario, slice } => {
                    let n = needs.entry(scenario).or_default();
                    n.horizon = n.horizon.max(slice + 1);
                }
                Query::Gap {
                    scenario,
                    reference,
                    slice,
                } => {
                    for s in [scenario, reference] {
                        let n = needs.entry(s).or_default();
                        n.horizon = n.horizon.max(*slice);
                    }
                }
                Query::MutualInformation { .. } | Query::VarianceOfBelief { .. } => {}
            }
        }
        needs
    }

    /// Model value of every anchor query, in anchor order.
    pub fn values(&self, dbn: &TwoSliceDbn) -> Result<Vec<f64>> {
        let init = dbn.initial();
        let targets: Vec<usize> = self
            .utility
            .targets
            .iter()
            .map(|t| init.id(&t.variable))
            .collect::<Result<_>>()?;
        let good: Vec<usize> = self
            .utility
            .targets
            .iter()
            .map(|t| init.state_id(&t.variable, &t.good_state).map(|(_, s)| s))
            .collect::<Result<_>>()?;

        let mut utilities: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut marginals: BTreeMap<(&str, usize, String), Vec<f64>> = BTreeMap::new();
        for (name, need) in self.needs() {
            let scenario = &self.scenarios[name];
            let horizon = need.horizon.max(need.marginal_slices);
            scenario.validate(dbn, horizon)?;
            let mechanisms = |t| scenario.mechanisms_at(dbn, t).unwrap_or_default();
            if need.horizon > 0 {
                let run = forward_marginals(dbn, need.horizon, &targets, mechanisms)?;
                let u = run
                    .iter()
                    .map(|slice| {
                        let p: Vec<f64> = slice.iter().zip(&good).map(|(d, &g)| d[g]).collect();
                        self.utility.score(&p)
                    })
                    .collect();
                utilities.insert(name, u);
            }
            if need.marginal_slices > 0 {
                let ids: Vec<usize> = need.marginal_vars.iter().map(|v| init.id(v)).collect::<Result<_>>()?;
                let run = forward_marginals(dbn, need.marginal_slices, &ids, mechanisms)?;
                for (t, slice) in run.into_iter().enumerate() {
                    for (v, d) in need.marginal_vars.iter().zip(slice) {
                        marginals.insert((name, t + 1, v.clone()), d);
                    }
                }
            }
        }

        let needs_sensitivity = self.anchors.anchors.iter().any(|a| {
            matches!(
                a.query,
                Query::MutualInformation { .. } | Query::VarianceOfBelief { .. }
            )
        });
        let two_slice = if needs_sensitivity { Some(unroll(dbn, 2)?) } else { None };
        let ve = VariableElimination::default();

        self.anchors
            .anchors
            .iter()
            .map(|a| match &a.query {
                Query::Marginal {
                    scenario,
                    slice,
                    variable,
                    state,
                } => {
                    let (_, s) = init.state_id(variable, state)?;
                    Ok(marginals[&(scenario.as_str(), *slice, variable.clone())][s])
                }
                Query::Utility { scenario, slice } => Ok(utilities[scenario.as_str()][slice - 1]),
                Query::Step { scenario, slice } => {
                    let u = &utilities[scenario.as_str()];
                    Ok(u[*slice] - u[slice - 1])
                }
                Query::Gap {
                    scenario,
                    reference,
                    slice,
                } => Ok(utilities[scenario.as_str()][slice - 1] - utilities[reference.as_str()][slice - 1]),
                Query::MutualInformation { target, source } | Query::VarianceOfBelief { target, source } => {
                    let net = two_slice.as_ref().expect("unrolled above").net();
                    let joint = ve.joint_query(net, &[target, source], &Default::default())?;
                    Ok(match a.query {
                        Query::MutualInformation { .. } => mutual_information_from_joint(&joint).bits,
                        _ => variance_of_belief_from_joint(&joint),
                    })
                }
            })
            .collect()
    }

    /// Weighted, unit-scaled residuals for a free-parameter vector.
    pub fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let dbn = assemble(self.fixed, theta)?;
        let values = self.values(&dbn)?;
        Ok(self
            .anchors
            .anchors
            .iter()
            .zip(values)
            .map(|(a, v)| a.weighted_residual(v))
            .collect())
    }

    /// Sum of squared weighted residuals; infinite for parameter vectors
    /// that do not assemble.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.residuals(theta)
            .map(|r| r.iter().map(|x| x * x).sum())
            .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub anchor: String,
    pub kind: AnchorKind,
    pub target: f64,
    pub achieved: f64,
    /// Signed miss in the query's units; zero for satisfied bounds.
    pub residual: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub name: String,
    pub value: f64,
    pub at_bound: bool,
    /// Linearised standard error at the residual scale; large values mean
    /// the anchors barely constrain the entry.
    pub standard_error: f64,
    pub weakly_identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub seed: u64,
    pub sweeps: usize,
    pub evaluations: usize,
    pub loss: f64,
    /// True when every gating anchor is within tolerance.
    pub success: bool,
    /// Gating anchors outside tolerance, worst first.
    pub failures: Vec<String>,
    pub residuals: Vec<ResidualRow>,
    pub parameters: Vec<ParameterReport>,
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn max_abs_residual(&self, kinds: &[AnchorKind]) -> f64 {
        self.residuals
            .iter()
            .filter(|r| kinds.contains(&r.kind))
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel {
    pub dbn: TwoSliceDbn,
    pub fixed: FixedParameters,
    pub theta: Vec<f64>,
    pub report: FitReport,
}

struct Search<'e, 'a> {
    evaluator: &'e Evaluator<'a>,
    evaluations: usize,
}

impl Search<'_, '_> {
    fn loss(&mut self, theta: &[f64]) -> f64 {
        self.evaluations += 1;
        self.evaluator.loss(theta)
    }

    /// Coordinate descent from `theta`; returns (theta, loss, sweeps).
    fn descend(&mut self, mut theta: Vec<f64>, options: &CalibrationOptions) -> (Vec<f64>, f64, usize) {
        let k = theta.len();
        let mut step = vec![options.initial_step; k];
        let mut best = self.loss(&theta);
        let mut sweeps = 0;
        while sweeps < options.max_sweeps && step.iter().any(|&s| s >= options.min_step) {
            sweeps += 1;
            for i in 0..k {
                if step[i] < options.min_step {
                    continue;
                }
                let FreeParameterBounds { lower, upper } = bounds(i);
                let x0 = theta[i];
                let h = step[i];
                let trial = |x: f64, s: &mut Self| {
                    let mut t = theta.clone();
                    t[i] = x.clamp(lower, upper);
                    (t[i], s.loss(&t))
                };
                let (xp, fp) = trial(x0 + h, self);
                let (xm, fm) = trial(x0 - h, self);
                let mut cand = vec![(xp, fp), (xm, fm)];
                let curvature = fp - 2.0 * best + fm;
                if curvature > 0.0 && xp - x0 == h && x0 - xm == h {
                    let vertex = x0 - 0.5 * h * (fp - fm) / curvature;
                    let vertex = vertex.clamp(x0 - 4.0 * h, x0 + 4.0 * h);
                    cand.push(trial(vertex, self));
                }
                let (x, f) = cand
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("at least two candidates");
                if f < best {
                    let moved = (x - x0).abs();
                    theta[i] = x;
                    best = f;
                    step[i] = if moved >= h {
                        (2.0 * h).min(0.2)
                    } else {
                        moved.max(h * 0.5)
                    };
                } else {
                    step[i] *= 0.5;
                }
            }
        }
        (theta, best, sweeps)
    }
}

struct FreeParameterBounds {
    lower: f64,
    upper: f64,
}

fn bounds(i: usize) -> FreeParameterBounds {
    FreeParameterBounds {
        lower: FREE_PARAMETERS[i].lower,
        upper: FREE_PARAMETERS[i].upper,
    }
}

/// Fit the free parameters; always returns the best model found, with a
/// report saying whether it meets the anchors.
pub fn fit(
    fixed: &FixedParameters,
    anchors: &AnchorSet,
    scenarios: &[Scenario],
    options: &CalibrationOptions,
) -> Result<CalibratedModel> {
    fit_from(fixed, anchors, scenarios, options, initial_guess())
}

/// As [`fit`], starting from `start` instead of the hand-set guess.
pub fn fit_from(
    fixed: &FixedParameters,
    anchors: &AnchorSet,
    scenarios: &[Scenario],
    options: &CalibrationOptions,
    start: Vec<f64>,
) -> Result<CalibratedModel> {
    let evaluator = Evaluator::new(fixed, anchors, scenarios)?;
    evaluator.residuals(&start)?;
    let mut search = Search {
        evaluator: &evaluator,
        evaluations: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for r in 0..=options.restarts {
        let x0: Vec<f64> = if r == 0 {
            start.clone()
        } else {
            start
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let b = bounds(i);
                    (x + rng.gen_range(-0.1..0.1)).clamp(b.lower, b.upper)
                })
                .collect()
        };
        let run = search.descend(x0, options);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (theta, loss, sweeps) = best.expect("at least one start");
    let evaluations = search.evaluations;
    let report = report(&evaluator, &theta, loss, sweeps, evaluations, options)?;
    Ok(CalibratedModel {
        dbn: assemble(fixed, &theta)?,
        fixed: fixed.clone(),
        theta,
        report,
    })
}

/// [`fit`], failing with the worst anchors named when the fit misses.
pub fn calibrate(
    fixed: &FixedParameters,
    anchors: &AnchorSet,
    scenarios: &[Scenario],
    options: &CalibrationOptions,
) -> Result<CalibratedModel> {
    let model = fit(fixed, anchors, scenarios, options)?;
    if !model.report.success {
        let worst: Vec<&str> = model.report.failures.iter().take(5).map(String::as_str).collect();
        return Err(Error::Calibration(format!(
            "{} anchors outside tolerance; worst: {}",
            model.report.failures.len(),
            worst.join("; ")
        )));
    }
    Ok(model)
}

fn report(
    evaluator: &Evaluator,
    theta: &[f64],
    loss: f64,
    sweeps: usize,
    evaluations: usize,
    options: &CalibrationOptions,
) -> Result<FitReport> {
    let anchors = &evaluator.anchors().anchors;
    let values = evaluator.values(&assemble(evaluator.fixed, theta)?)?;
    let residuals: Vec<ResidualRow> = anchors
        .iter()
        .zip(&values)
        .map(|(a, &v)| {
            let residual = a.residual(v);
            ResidualRow {
                anchor: a.query.describe(),
                kind: a.kind,
                target: a.target,
                achieved: v,
                residual,
                tolerance: a.tolerance,
                within_tolerance: residual.abs() <= a.tolerance,
                provenance: a.provenance.clone(),
            }
        })
        .collect();
    let mut failing: Vec<(f64, String)> = anchors
        .iter()
        .zip(&residuals)
        .filter(|(a, r)| a.is_gating() && !r.within_tolerance)
        .map(|(_, r)| {
            (
                r.residual.abs() / r.tolerance,
                format!("{} (target {}, achieved {:.4})", r.anchor, r.target, r.achieved),
            )
        })
        .collect();
    failing.sort_by(|a, b| b.0.total_cmp(&a.0));

    let errors = standard_errors(evaluator, theta, options.residual_scale)?;
    let parameters = FREE_PARAMETERS
        .iter()
        .zip(theta)
        .zip(errors)
        .map(|((p, &value), se)| ParameterReport {
            name: p.name.to_string(),
            value,
            at_bound: value <= p.lower + 1e-9 || value >= p.upper - 1e-9,
            standard_error: se,
            weakly_identified: se > options.weak_threshold,
        })
        .collect::<Vec<_>>();
    let notes = vec![
        "\"10% more likely\" and \"10% higher\" read as additive shifts of 0.1 in probability, clamped to [0, 1]"
            .into(),
        format!(
            "{} of {} free entries weakly identified (standard error > {})",
            parameters.iter().filter(|p| p.weakly_identified).count(),
            parameters.len(),
            options.weak_threshold
        ),
    ];
    Ok(FitReport {
        seed: options.seed,
        sweeps,
        evaluations,
        loss,
        success: failing.is_empty(),
        failures: failing.into_iter().map(|(_, s)| s).collect(),
        residuals,
        parameters,
        notes,
    })
}

/// `σ · sqrt(diag((JᵀJ)⁺))` from a central-difference Jacobian of the
/// weighted residuals.
fn standard_errors(evaluator: &Evaluator, theta: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let k = theta.len();
    let m = evaluator.residuals(theta)?.len();
    let mut jac = DMatrix::<f64>::zeros(m, k);
    let h = 1e-5;
    for i in 0..k {
        let b = bounds(i);
        let (lo, hi) = ((theta[i] - h).max(b.lower), (theta[i] + h).min(b.upper));
        let mut t = theta.to_vec();
        t[i] = hi;
        let rp = evaluator.residuals(&t)?;
        t[i] = lo;
        let rm = evaluator.residuals(&t)?;
        for r in 0..m {
            jac[(r, i)] = (rp[r] - rm[r]) / (hi - lo);
        }
    }
    let jtj = jac.transpose() * &jac;
    let eig = SymmetricEigen::new(jtj);
    let floor = eig.eigenvalues.max() * 1e-14;
    Ok((0..k)
        .map(|i| {
            let var: f64 = (0..k)
                .map(|j| {
                    let l = eig.eigenvalues[j].max(floor);
                    eig.eigenvectors[(i, j)].powi(2) / l
                })
                .sum();
            sigma * var.sqrt()
        })
        .collect())
}
