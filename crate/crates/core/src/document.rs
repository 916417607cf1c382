//! JSON model and scenario documents, canonical encoding and model hashing.
//!
//! Documents are plain JSON with unknown fields rejected. The canonical
//! form is compact JSON with object keys sorted; the model hash is the
//! SHA-256 of that form, so any two byte-different files describing the
//! same model hash identically.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analytics::UtilitySpec;
use crate::error::{Error, Result};
use crate::intervention::{Intervention, InterventionKind, Scenario, SliceWindow};
use crate::network::{NetworkBuilder, RENORMALISE_TOLERANCE};
use crate::temporal::{TwoSliceDbn, DEFAULT_HORIZON};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDecl {
    pub from: String,
    pub to: String,
    /// Edge from the previous slice.
    #[serde(default)]
    pub temporal: bool,
}

/// Slice-1 CPT. `table` nests one array level per parent, in `parents`
/// order; the innermost arrays are distributions over the child's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptDecl {
    pub variable: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub table: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaggedParent {
    pub variable: String,
    pub lag: u8,
}

/// CPT used from slice 2 on. Variables without an entry reuse their
/// slice-1 CPT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDecl {
    pub variable: String,
    #[serde(default)]
    pub parents: Vec<LaggedParent>,
    pub table: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    /// Citation per parameter block, keyed by variable name or block id.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Calibration fit report, stored verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub variables: Vec<VariableDecl>,
    pub edges: Vec<EdgeDecl>,
    pub cpts: Vec<CptDecl>,
    #[serde(default)]
    pub transition: Vec<TransitionDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default)]
    pub metadata: Metadata,
}

fn doc_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Document {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse JSON text into `T`, reporting the failing field path and position.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        doc_err(
            if path == "." || path == "?" {
                "$".to_string()
            } else {
                format!("$.{path}")
            },
            format!("{inner}"),
        )
    })
}

/// Compact JSON with sorted object keys.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key.
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

/// Indented JSON with sorted keys and a trailing newline, for files.
pub fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    s.push('\n');
    Ok(s)
}

/// Hex SHA-256 of the canonical form.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonical_json(value)?.as_bytes())))
}

/// Flatten a nested table of shape `dims` + `[card]`, checking each row.
fn flatten_table(
    value: &Value,
    dims: &[usize],
    card: usize,
    path: &str,
    describe_row: &dyn Fn(&[usize]) -> String,
) -> Result<Vec<f64>> {
    fn walk(
        value: &Value,
        dims: &[usize],
        card: usize,
        path: &str,
        index: &mut Vec<usize>,
        out: &mut Vec<f64>,
        describe_row: &dyn Fn(&[usize]) -> String,
    ) -> Result<()> {
        let arr = value.as_array().ok_or_else(|| doc_err(path, "expected an array"))?;
        match dims.split_first() {
            Some((&n, rest)) => {
                if arr.len() != n {
                    return Err(doc_err(path, format!("expected {n} entries, found {}", arr.len())));
                }
                for (i, v) in arr.iter().enumerate() {
                    index.push(i);
                    walk(v, rest, card, &format!("{path}[{i}]"), index, out, describe_row)?;
                    index.pop();
                }
                Ok(())
            }
            None => {
                if arr.len() != card {
                    return Err(doc_err(
                        path,
                        format!("distribution has {} entries, expected {card}", arr.len()),
                    ));
                }
                let mut row = Vec::with_capacity(card);
                for (i, v) in arr.iter().enumerate() {
                    let p = v
                        .as_f64()
                        .ok_or_else(|| doc_err(format!("{path}[{i}]"), "expected a number"))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(doc_err(
                            format!("{path}[{i}]"),
                            format!("probability {p} outside [0, 1]"),
                        ));
                    }
                    row.push(p);
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > RENORMALISE_TOLERANCE {
                    return Err(doc_err(path, format!("row {} sums to {sum}", describe_row(index))));
                }
                out.extend(row);
                Ok(())
            }
        }
    }
    let mut out = Vec::new();
    walk(value, dims, card, path, &mut Vec::new(), &mut out, describe_row)?;
    Ok(out)
}

fn row_label(parents: &[(&str, &[String])], idx: &[usize]) -> String {
    if parents.is_empty() {
        return "(no parents)".into();
    }
    parents
        .iter()
        .zip(idx)
        .map(|((p, s), &i)| format!("{p}={}", s[i]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Inverse of [`flatten_table`].
fn nest_table(flat: &[f64], dims: &[usize]) -> Value {
    match dims.split_first() {
        None => Value::from(flat.to_vec()),
        Some((&n, rest)) => {
            let chunk = flat.len() / n;
            Value::Array(
                (0..n)
                    .map(|i| nest_table(&flat[i * chunk..(i + 1) * chunk], rest))
                    .collect(),
            )
        }
    }
}

impl ModelDocument {
    fn states(&self) -> BTreeMap<&str, &[String]> {
        self.variables
            .iter()
            .map(|v| (v.name.as_str(), v.states.as_slice()))
            .collect()
    }

    /// Build and validate the DBN described by this document.
    pub fn to_dbn(&self) -> Result<TwoSliceDbn> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let mut seen = BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if !seen.insert(v.name.as_str()) {
                return Err(doc_err(
                    format!("$.variables[{i}].name"),
                    format!("duplicate variable `{}`", v.name),
                ));
            }
            if v.states.len() < 2 {
                return Err(doc_err(format!("$.variables[{i}].states"), "needs at least two states"));
            }
            let uniq: BTreeSet<&String> = v.states.iter().collect();
            if uniq.len() != v.states.len() {
                return Err(doc_err(format!("$.variables[{i}].states"), "duplicate state label"));
            }
        }
        let states = self.states();
        let mut intra: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut temporal: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            for (field, name) in [("from", &e.from), ("to", &e.to)] {
                if !states.contains_key(name.as_str()) {
                    return Err(doc_err(
                        format!("$.edges[{i}].{field}"),
                        format!("unknown variable `{name}`"),
                    ));
                }
            }
            let set = if e.temporal { &mut temporal } else { &mut intra };
            if !set.entry(e.to.as_str()).or_default().insert(e.from.as_str()) {
                return Err(doc_err(format!("$.edges[{i}]"), "duplicate edge"));
            }
        }

        let mut builder = NetworkBuilder::new();
        for v in &self.variables {
            builder.variable(v.name.clone(), v.states.iter().cloned());
        }
        let mut has_cpt = BTreeSet::new();
        for (i, c) in self.cpts.iter().enumerate() {
            let path = format!("$.cpts[{i}]");
            let child_states = *states
                .get(c.variable.as_str())
                .ok_or_else(|| doc_err(format!("{path}.variable"), format!("unknown variable `{}`", c.variable)))?;
            if !has_cpt.insert(c.variable.as_str()) {
                return Err(doc_err(
                    format!("{path}.variable"),
                    format!("second CPT for `{}`", c.variable),
                ));
            }
            let declared: BTreeSet<&str> = c.parents.iter().map(String::as_str).collect();
            let edges = intra.get(c.variable.as_str()).cloned().unwrap_or_default();
            if declared != edges || declared.len() != c.parents.len() {
                return Err(doc_err(
                    format!("{path}.parents"),
                    format!(
                        "parents {:?} do not match the intra-slice edges into `{}` {:?}",
                        c.parents, c.variable, edges
                    ),
                ));
            }
            let parent_states: Vec<(&str, &[String])> =
                c.parents.iter().map(|p| (p.as_str(), states[p.as_str()])).collect();
            let dims: Vec<usize> = parent_states.iter().map(|(_, s)| s.len()).collect();
            let describe = |idx: &[usize]| format!("of `{}` at {}", c.variable, row_label(&parent_states, idx));
            let table = flatten_table(&c.table, &dims, child_states.len(), &format!("{path}.table"), &describe)?;
            for p in &c.parents {
                builder.edge(p.clone(), c.variable.clone());
            }
            builder.cpt(c.variable.clone(), c.parents.clone(), table);
        }
        if let Some(v) = self.variables.iter().find(|v| !has_cpt.contains(v.name.as_str())) {
            return Err(doc_err("$.cpts", format!("no CPT for `{}`", v.name)));
        }
        let initial = builder.build()?;

        let mut transition = Vec::new();
        let mut has_transition = BTreeSet::new();
        for (i, t) in self.transition.iter().enumerate() {
            let path = format!("$.transition[{i}]");
            let child_states = *states
                .get(t.variable.as_str())
                .ok_or_else(|| doc_err(format!("{path}.variable"), format!("unknown variable `{}`", t.variable)))?;
            if !has_transition.insert(t.variable.as_str()) {
                return Err(doc_err(
                    format!("{path}.variable"),
                    format!("second transition CPT for `{}`", t.variable),
                ));
            }
            let mut lag0 = BTreeSet::new();
            let mut lag1 = BTreeSet::new();
            for (j, p) in t.parents.iter().enumerate() {
                if !states.contains_key(p.variable.as_str()) {
                    return Err(doc_err(
                        format!("{path}.parents[{j}].variable"),
                        format!("unknown variable `{}`", p.variable),
                    ));
                }
                let set = match p.lag {
                    0 => &mut lag0,
                    1 => &mut lag1,
                    lag => {
                        return Err(doc_err(
                            format!("{path}.parents[{j}].lag"),
                            format!("lag {lag} not supported; links span at most one slice"),
                        ))
                    }
                };
                if !set.insert(p.variable.as_str()) {
                    return Err(doc_err(format!("{path}.parents[{j}]"), "duplicate parent"));
                }
            }
            let e0 = intra.get(t.variable.as_str()).cloned().unwrap_or_default();
            let e1 = temporal.get(t.variable.as_str()).cloned().unwrap_or_default();
            if lag0 != e0 || lag1 != e1 {
                return Err(doc_err(
                    format!("{path}.parents"),
                    format!("parents do not match the edges into `{}`", t.variable),
                ));
            }
            let parent_states: Vec<(String, &[String])> = t
                .parents
                .iter()
                .map(|p| {
                    let name = if p.lag == 1 {
                        format!("{}[t-1]", p.variable)
                    } else {
                        p.variable.clone()
                    };
                    (name, states[p.variable.as_str()])
                })
                .collect();
            let dims: Vec<usize> = parent_states.iter().map(|(_, s)| s.len()).collect();
            let refs: Vec<(&str, &[String])> = parent_states.iter().map(|(n, s)| (n.as_str(), *s)).collect();
            let describe = |idx: &[usize]| format!("of `{}` at {}", t.variable, row_label(&refs, idx));
            let table = flatten_table(&t.table, &dims, child_states.len(), &format!("{path}.table"), &describe)?;
            transition.push((
                t.variable.clone(),
                t.parents.iter().map(|p| (p.variable.clone(), p.lag)).collect(),
                table,
            ));
        }
        for (child, parents) in &temporal {
            if !has_transition.contains(child) {
                return Err(doc_err(
                    "$.transition",
                    format!("`{child}` has temporal parents {parents:?} but no transition CPT"),
                ));
            }
        }
        for v in &self.variables {
            if !has_transition.contains(v.name.as_str()) {
                let id = initial.id(&v.name)?;
                let cpt = initial.cpt(id);
                transition.push((
                    v.name.clone(),
                    cpt.parents()
                        .iter()
                        .map(|&p| (initial.variable(p).name().to_string(), 0))
                        .collect(),
                    cpt.table().to_vec(),
                ));
            }
        }
        let dbn = TwoSliceDbn::new(initial, transition)?;
        if let Some(u) = &self.utility {
            check_utility(u, &dbn).map_err(|e| doc_err("$.utility", e.to_string()))?;
        }
        Ok(dbn)
    }

    /// Describe `dbn`. Transition entries are written only where they
    /// differ from the slice-1 CPT.
    pub fn from_dbn(name: &str, dbn: &TwoSliceDbn) -> Self {
        let init = dbn.initial();
        let variables = init
            .variables()
            .iter()
            .map(|v| VariableDecl {
                name: v.name().to_string(),
                states: v.states().to_vec(),
                label: None,
            })
            .collect();
        let nm = |i: usize| init.variable(i).name().to_string();
        let mut edges: Vec<EdgeDecl> = dbn
            .intra_edges()
            .into_iter()
            .map(|(a, b)| EdgeDecl {
                from: nm(a),
                to: nm(b),
                temporal: false,
            })
            .collect();
        edges.extend(dbn.temporal_edges().into_iter().map(|(a, b)| EdgeDecl {
            from: nm(a),
            to: nm(b),
            temporal: true,
        }));
        let cards = init.cardinalities();
        let cpts = (0..init.len())
            .map(|i| {
                let cpt = init.cpt(i);
                let dims: Vec<usize> = cpt.parents().iter().map(|&p| cards[p]).collect();
                CptDecl {
                    variable: nm(i),
                    parents: cpt.parents().iter().map(|&p| nm(p)).collect(),
                    table: nest_table(cpt.table(), &dims),
                }
            })
            .collect();
        let transition = dbn
            .transition()
            .iter()
            .filter(|t| {
                let same_parents = t.parents.iter().all(|p| p.lag == 0)
                    && t.parents
                        .iter()
                        .map(|p| p.variable)
                        .eq(init.cpt(t.child).parents().iter().copied());
                !(same_parents && t.table == init.cpt(t.child).table())
            })
            .map(|t| {
                let dims: Vec<usize> = t.parents.iter().map(|p| cards[p.variable]).collect();
                TransitionDecl {
                    variable: nm(t.child),
                    parents: t
                        .parents
                        .iter()
                        .map(|p| LaggedParent {
                            variable: nm(p.variable),
                            lag: p.lag,
                        })
                        .collect(),
                    table: nest_table(&t.table, &dims),
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            description: String::new(),
            variables,
            edges,
            cpts,
            transition,
            utility: None,
            metadata: Metadata::default(),
        }
    }

    pub fn hash(&self) -> Result<String> {
        content_hash(self)
    }
}

fn check_utility(spec: &UtilitySpec, dbn: &TwoSliceDbn) -> Result<()> {
    spec.check()?;
    for t in &spec.targets {
        dbn.initial().state_id(&t.variable, &t.good_state)?;
    }
    Ok(())
}

/// A parsed, validated model together with its hash.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub document: ModelDocument,
    pub dbn: TwoSliceDbn,
    pub hash: String,
}

impl LoadedModel {
    pub fn from_document(document: ModelDocument) -> Result<Self> {
        let dbn = document.to_dbn()?;
        let hash = document.hash()?;
        Ok(Self { document, dbn, hash })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(parse_json(text)?)
    }

    /// The utility spec shipped with the model, if any.
    pub fn utility(&self) -> Option<&UtilitySpec> {
        self.document.utility.as_ref()
    }
}

/// Read, parse and validate a model file; errors name the file and field.
pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    LoadedModel::parse(&text).map_err(|e| match e {
        Error::Document { path: field, message } => Error::Document {
            path: format!("{}: {field}", path.display()),
            message,
        },
        other => doc_err(path.display().to_string(), other.to_string()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionDeclKind {
    Fix,
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionDecl {
    pub target: String,
    pub kind: InterventionDeclKind,
    /// A state label for `fix`, a probability vector for `prior`.
    pub value: Value,
    /// Inclusive `[from, to]`, 1-based.
    pub window: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub interventions: Vec<InterventionDecl>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Overrides the model's utility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Why a scenario cannot run: the document itself is wrong, or it is
/// well formed but asks for something the model cannot do.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Malformed(Vec<FieldError>),
    Infeasible(Vec<FieldError>),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (what, errs) = match self {
            Self::Malformed(e) => ("malformed scenario", e),
            Self::Infeasible(e) => ("infeasible scenario", e),
        };
        write!(f, "{what}:")?;
        for e in errs {
            write!(f, " {}: {};", e.field, e.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

fn field(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioDocument {
    pub fn from_scenario(scenario: &Scenario, horizon: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: scenario.name.clone(),
            description: scenario.description.clone(),
            interventions: scenario
                .interventions
                .iter()
                .map(|iv| {
                    let (kind, value) = match &iv.kind {
                        InterventionKind::HardDo { state, .. } => {
                            (InterventionDeclKind::Fix, Value::from(state.clone()))
                        }
                        InterventionKind::PriorDo { prior, .. } => {
                            (InterventionDeclKind::Prior, Value::from(prior.clone()))
                        }
                    };
                    InterventionDecl {
                        target: iv.kind.variable().to_string(),
                        kind,
                        value,
                        window: [iv.window.from, iv.window.to],
                    }
                })
                .collect(),
            horizon,
            utility: None,
        }
    }

    /// Check against `dbn` and build the engine-level scenario.
    pub fn resolve(&self, dbn: &TwoSliceDbn) -> std::result::Result<Scenario, ScenarioError> {
        let mut malformed = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            malformed.push(field(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if self.horizon < 1 {
            malformed.push(field("horizon", "must be at least 1"));
        }
        let net = dbn.initial();
        let mut interventions = Vec::new();
        for (i, d) in self.interventions.iter().enumerate() {
            let at = |f: &str| format!("interventions[{i}].{f}");
            let [from, to] = d.window;
            if from < 1 || from > to || to > self.horizon {
                malformed.push(field(
                    at("window"),
                    format!(
                        "[{from}, {to}] must satisfy 1 <= from <= to <= horizon ({})",
                        self.horizon
                    ),
                ));
            }
            let Ok(id) = net.id(&d.target) else {
                malformed.push(field(at("target"), format!("unknown variable `{}`", d.target)));
                continue;
            };
            let kind = match d.kind {
                InterventionDeclKind::Fix => match d.value.as_str() {
                    Some(s) if net.variable(id).state_index(s).is_some() => InterventionKind::HardDo {
                        variable: d.target.clone(),
                        state: s.to_string(),
                    },
                    Some(s) => {
                        malformed.push(field(
                            at("value"),
                            format!(
                                "`{}` has no state `{s}`; states are {:?}",
                                d.target,
                                net.variable(id).states()
                            ),
                        ));
                        continue;
                    }
                    None => {
                        malformed.push(field(at("value"), "fix needs a state label"));
                        continue;
                    }
                },
                InterventionDeclKind::Prior => {
                    let prior: Option<Vec<f64>> =
                        d.value.as_array().and_then(|a| a.iter().map(Value::as_f64).collect());
                    let Some(prior) = prior else {
                        malformed.push(field(at("value"), "prior needs an array of probabilities"));
                        continue;
                    };
                    let card = net.cardinality(id);
                    let sum: f64 = prior.iter().sum();
                    if prior.len() != card {
                        malformed.push(field(
                            at("value"),
                            format!("prior has {} entries for {card} states", prior.len()),
                        ));
                        continue;
                    }
                    if prior.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                        malformed.push(field(
                            at("value"),
                            format!("prior must be a distribution (sums to {sum})"),
                        ));
                        continue;
                    }
                    InterventionKind::PriorDo {
                        variable: d.target.clone(),
                        prior,
                    }
                }
            };
            interventions.push(Intervention {
                kind,
                window: SliceWindow::new(from, to),
            });
        }
        if let Some(u) = &self.utility {
            if let Err(e) = check_utility(u, dbn) {
                malformed.push(field("utility", e.to_string()));
            }
        }
        if !malformed.is_empty() {
            return Err(ScenarioError::Malformed(malformed));
        }
        let scenario = Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            interventions,
        };
        scenario.validate(dbn, self.horizon).map_err(|e| {
            let target = match &e {
                Error::InvalidIntervention { variable, .. } | Error::ConflictingInterventions { variable, .. } => self
                    .interventions
                    .iter()
                    .position(|d| &d.target == variable)
                    .map(|i| format!("interventions[{i}]")),
                _ => None,
            };
            ScenarioError::Infeasible(vec![field(
                target.unwrap_or_else(|| "interventions".into()),
                e.to_string(),
            )])
        })?;
        Ok(scenario)
    }
}
