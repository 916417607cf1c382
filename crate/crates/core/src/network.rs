//! Discrete Bayesian networks over named categorical variables.
//!
//! A [`DiscreteNetwork`] is only obtainable through [`NetworkBuilder::build`],
//! which runs the full set of structural and numeric checks. Once built the
//! network is immutable, so every query can assume a DAG whose CPT parent
//! lists agree with its edges and whose rows are normalised.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};

/// Rows whose sum is within this distance of 1 are rescaled on build.
pub const RENORMALISE_TOLERANCE: f64 = 1e-6;

/// Rows already this close to 1 are left alone, so that rebuilding from a
/// normalised table reproduces it bit for bit.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Rescale `row` to sum to 1 unless it already does up to rounding.
pub fn renormalise(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROUNDING_SLACK {
        row.iter_mut().for_each(|x| *x /= sum);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, states: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Conditional probability table `P(child | parents)`.
///
/// Rows are laid out in row-major order over the parent assignments (last
/// parent varies fastest); each row holds one probability per child state.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    child: usize,
    cardinality: usize,
    parents: Vec<usize>,
    table: Vec<f64>,
}

impl Cpt {
    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn child_cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn row_count(&self) -> usize {
        self.table.len() / self.cardinality
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.table[index * self.cardinality..(index + 1) * self.cardinality]
    }
}

/// A validated DAG with one CPT per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNetwork {
    variables: Vec<Variable>,
    index: HashMap<String, usize>,
    cpts: Vec<Cpt>,
    children: Vec<Vec<usize>>,
}

impl DiscreteNetwork {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: usize) -> &Variable {
        &self.variables[id]
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn state_id(&self, variable: &str, state: &str) -> Result<(usize, usize)> {
        let id = self.id(variable)?;
        let s = self.variables[id]
            .state_index(state)
            .ok_or_else(|| Error::UnknownState {
                variable: variable.to_string(),
                state: state.to_string(),
            })?;
        Ok((id, s))
    }

    pub fn cardinality(&self, id: usize) -> usize {
        self.variables[id].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn cpt(&self, id: usize) -> &Cpt {
        &self.cpts[id]
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.cpts[id].parents
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn is_root(&self, id: usize) -> bool {
        self.cpts[id].parents.is_empty()
    }

    /// Directed edges `(parent, child)` in child order, then parent order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.cpts
            .iter()
            .flat_map(|c| c.parents.iter().map(move |&p| (p, c.child)))
            .collect()
    }

    /// `P(child = state | parents = parent_states)`.
    pub fn probability(&self, child: usize, parent_states: &[usize], state: usize) -> f64 {
        let cpt = &self.cpts[child];
        let mut row = 0;
        for (&p, &s) in cpt.parents.iter().zip(parent_states) {
            row = row * self.cardinality(p) + s;
        }
        cpt.table[row * self.cardinality(child) + state]
    }

    /// Probability of a full joint assignment by the chain rule.
    pub fn joint_probability(&self, assignment: &[usize]) -> f64 {
        let mut p = 1.0;
        for (id, cpt) in self.cpts.iter().enumerate() {
            let mut row = 0;
            for &par in &cpt.parents {
                row = row * self.cardinality(par) + assignment[par];
            }
            p *= cpt.table[row * self.cardinality(id) + assignment[id]];
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Parents first; ties between ready variables broken by name.
    pub fn topological_order(&self) -> Vec<usize> {
        let names: Vec<&str> = self.variables.iter().map(Variable::name).collect();
        topological_sort(&names, &self.edges()).expect("built networks are acyclic")
    }

    pub fn ancestors(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if mask[v] {
                continue;
            }
            mask[v] = true;
            stack.extend(self.parents(v).iter().copied().filter(|&p| !mask[p]));
        }
        mask
    }

    pub fn descendants(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if mask[v] {
                continue;
            }
            mask[v] = true;
            stack.extend(self.children(v).iter().copied().filter(|&c| !mask[c]));
        }
        mask
    }

    /// `Nd(X)`: variables with no directed path from `id` to them.
    pub fn non_descendants(&self, id: usize) -> Vec<usize> {
        let desc = self.descendants(&[id]);
        (0..self.len()).filter(|&v| !desc[v]).collect()
    }

    /// True iff every trail between `x` and `y` is blocked by `given`.
    pub fn d_separated(&self, x: &str, y: &str, given: &[&str]) -> Result<bool> {
        let xi = self.id(x)?;
        let yi = self.id(y)?;
        let zi = given.iter().map(|g| self.id(g)).collect::<Result<Vec<_>>>()?;
        if xi == yi {
            return Err(Error::InvalidQuery(format!("`{x}` queried against itself")));
        }
        if zi.contains(&xi) || zi.contains(&yi) {
            return Err(Error::InvalidQuery(
                "query variables must not be in the conditioning set".into(),
            ));
        }
        Ok(!self.reachable(xi, &zi)[yi])
    }

    /// Variables reachable from `source` along active trails given `observed`.
    pub fn reachable(&self, source: usize, observed: &[usize]) -> Vec<bool> {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &z in observed {
            in_z[z] = true;
        }
        // Ancestors of the observed set decide whether a collider is open.
        let anc_z = self.ancestors(observed);

        // (node, arrived from a child = "up")
        let mut visited = vec![[false; 2]; n];
        let mut reached = vec![false; n];
        let mut queue = VecDeque::from([(source, true)]);
        while let Some((v, up)) = queue.pop_front() {
            let slot = usize::from(up);
            if visited[v][slot] {
                continue;
            }
            visited[v][slot] = true;
            if !in_z[v] {
                reached[v] = true;
            }
            if up && !in_z[v] {
                for &p in self.parents(v) {
                    queue.push_back((p, true));
                }
                for &c in self.children(v) {
                    queue.push_back((c, false));
                }
            } else if !up {
                if !in_z[v] {
                    for &c in self.children(v) {
                        queue.push_back((c, false));
                    }
                }
                if anc_z[v] {
                    for &p in self.parents(v) {
                        queue.push_back((p, true));
                    }
                }
            }
        }
        reached[source] = false;
        reached
    }

    /// Replace one variable's CPT. Used by interventions; keeps the
    /// child index consistent with the new parent list.
    pub(crate) fn with_cpt(&self, child: usize, parents: Vec<usize>, table: Vec<f64>) -> Self {
        let mut net = self.clone();
        net.cpts[child] = Cpt {
            child,
            cardinality: net.variables[child].cardinality(),
            parents,
            table,
        };
        net.children = child_lists(net.variables.len(), &net.cpts);
        net
    }

    /// Rebuild a builder holding exactly this network's content.
    pub fn to_builder(&self) -> NetworkBuilder {
        let mut b = NetworkBuilder::new();
        for v in &self.variables {
            b.variable(v.name.clone(), v.states.iter().cloned());
        }
        for cpt in &self.cpts {
            let child = self.variables[cpt.child].name.clone();
            let parents: Vec<String> = cpt.parents.iter().map(|&p| self.variables[p].name.clone()).collect();
            for p in &parents {
                b.edge(p.clone(), child.clone());
            }
            b.cpt(child, parents, cpt.table.clone());
        }
        b
    }
}

fn child_lists(n: usize, cpts: &[Cpt]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); n];
    for cpt in cpts {
        for &p in &cpt.parents {
            children[p].push(cpt.child);
        }
    }
    children
}

/// Kahn's algorithm with a lexicographic ready set.
pub fn topological_sort(names: &[&str], edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let n = names.len();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        indegree[b] += 1;
        out[a].push(b);
    }
    let mut ready: BTreeSet<(&str, usize)> = (0..n).filter(|&v| indegree[v] == 0).map(|v| (names[v], v)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(first) = ready.pop_first() {
        let v = first.1;
        order.push(v);
        for &c in &out[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert((names[c], c));
            }
        }
    }
    if order.len() < n {
        let cycles = cyclic_components(n, edges);
        let mut nodes: Vec<String> = cycles.into_iter().flatten().map(|v| names[v].to_string()).collect();
        nodes.sort();
        return Err(Error::Cycle(nodes));
    }
    Ok(order)
}

/// Strongly connected components that contain a cycle (size > 1, or a
/// self-loop), each sorted by index.
pub fn cyclic_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for &(a, b) in edges {
        adj[a].push(b);
        if a == b {
            self_loop[a] = true;
        }
    }
    // Tarjan, iterative.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut result = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut i)) = work.last_mut() {
            if *i == 0 {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                if comp.len() > 1 || self_loop[v] {
                    comp.sort_unstable();
                    result.push(comp);
                }
            }
        }
    }
    result.sort();
    result
}

/// One problem found by [`NetworkBuilder::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("variable `{0}` declared more than once")]
    DuplicateVariable(String),
    #[error("variable `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("variable `{variable}` lists state `{state}` more than once")]
    DuplicateState { variable: String, state: String },
    #[error("{context} refers to unknown variable `{name}`")]
    UnknownVariable { context: String, name: String },
    #[error("edge {from} -> {to} declared more than once")]
    DuplicateEdge { from: String, to: String },
    #[error("cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("variable `{0}` has no CPT")]
    MissingCpt(String),
    #[error("variable `{0}` has more than one CPT")]
    DuplicateCpt(String),
    #[error("CPT of `{variable}` conditions on {cpt:?} but the graph parents are {graph:?}")]
    ParentMismatch {
        variable: String,
        graph: Vec<String>,
        cpt: Vec<String>,
    },
    #[error("CPT of `{variable}` has {found} entries, expected {expected}")]
    TableShape {
        variable: String,
        expected: usize,
        found: usize,
    },
    #[error("CPT of `{variable}` row {row} ({assignment}) has entry {value} outside [0, 1]")]
    EntryOutOfRange {
        variable: String,
        row: usize,
        assignment: String,
        value: f64,
    },
    #[error("CPT of `{variable}` row {row} ({assignment}) sums to {sum}")]
    RowNotNormalised {
        variable: String,
        row: usize,
        assignment: String,
        sum: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct RawCpt {
    child: String,
    parents: Vec<String>,
    table: Vec<f64>,
}

/// Mutable staging area for a [`DiscreteNetwork`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    edges: Vec<(String, String)>,
    cpts: Vec<RawCpt>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.variables.push(Variable::new(name, states));
        self
    }

    pub fn edge(&mut self, from: impl Into<String>, to: impl Into<String>) -> &mut Self {
        self.edges.push((from.into(), to.into()));
        self
    }

    /// `table` is flat: one row per parent assignment, last parent fastest.
    pub fn cpt<S: Into<String>>(
        &mut self,
        child: impl Into<String>,
        parents: impl IntoIterator<Item = S>,
        table: Vec<f64>,
    ) -> &mut Self {
        self.cpts.push(RawCpt {
            child: child.into(),
            parents: parents.into_iter().map(Into::into).collect(),
            table,
        });
        self
    }

    /// Variable, its incoming edges and its CPT in one call.
    pub fn node<S: Into<String>>(
        &mut self,
        name: &str,
        states: &[&str],
        parents: impl IntoIterator<Item = S>,
        table: Vec<f64>,
    ) -> &mut Self {
        let parents: Vec<String> = parents.into_iter().map(Into::into).collect();
        self.variable(name, states.iter().copied());
        for p in &parents {
            self.edge(p.clone(), name);
        }
        self.cpt(name, parents, table)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Report every invariant violation; an empty report means `build` succeeds.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, var) in self.variables.iter().enumerate() {
            if index.insert(var.name(), i).is_some() {
                v.push(Violation::DuplicateVariable(var.name.clone()));
            }
            if var.states.len() < 2 {
                v.push(Violation::TooFewStates(var.name.clone()));
            }
            let mut seen = HashSet::new();
            for s in &var.states {
                if !seen.insert(s.as_str()) {
                    v.push(Violation::DuplicateState {
                        variable: var.name.clone(),
                        state: s.clone(),
                    });
                }
            }
        }

        let mut graph_parents: Vec<Vec<usize>> = vec![Vec::new(); self.variables.len()];
        let mut edge_ids = Vec::new();
        let mut seen_edges = HashSet::new();
        for (a, b) in &self.edges {
            let ctx = format!("edge {a} -> {b}");
            let (Some(&ai), Some(&bi)) = (index.get(a.as_str()), index.get(b.as_str())) else {
                for name in [a, b] {
                    if !index.contains_key(name.as_str()) {
                        v.push(Violation::UnknownVariable {
                            context: ctx.clone(),
                            name: name.clone(),
                        });
                    }
                }
                continue;
            };
            if !seen_edges.insert((ai, bi)) {
                v.push(Violation::DuplicateEdge {
                    from: a.clone(),
                    to: b.clone(),
                });
                continue;
            }
            graph_parents[bi].push(ai);
            edge_ids.push((ai, bi));
        }
        for comp in cyclic_components(self.variables.len(), &edge_ids) {
            let mut names: Vec<String> = comp.iter().map(|&i| self.variables[i].name.clone()).collect();
            names.sort();
            v.push(Violation::Cycle(names));
        }

        let mut has_cpt = vec![false; self.variables.len()];
        for raw in &self.cpts {
            let Some(&child) = index.get(raw.child.as_str()) else {
                v.push(Violation::UnknownVariable {
                    context: "CPT".into(),
                    name: raw.child.clone(),
                });
                continue;
            };
            if std::mem::replace(&mut has_cpt[child], true) {
                v.push(Violation::DuplicateCpt(raw.child.clone()));
                continue;
            }
            let mut parent_ids = Vec::new();
            let mut unknown = false;
            for p in &raw.parents {
                match index.get(p.as_str()) {
                    Some(&pi) => parent_ids.push(pi),
                    None => {
                        unknown = true;
                        v.push(Violation::UnknownVariable {
                            context: format!("CPT of `{}`", raw.child),
                            name: p.clone(),
                        });
                    }
                }
            }
            if unknown {
                continue;
            }
            let mut a = parent_ids.clone();
            let mut b = graph_parents[child].clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b || a.windows(2).any(|w| w[0] == w[1]) {
                let names =
                    |ids: &[usize]| -> Vec<String> { ids.iter().map(|&i| self.variables[i].name.clone()).collect() };
                v.push(Violation::ParentMismatch {
                    variable: raw.child.clone(),
                    graph: names(&graph_parents[child]),
                    cpt: raw.parents.clone(),
                });
                continue;
            }
            let cards: Vec<usize> = parent_ids.iter().map(|&p| self.variables[p].cardinality()).collect();
            let child_card = self.variables[child].cardinality();
            let rows: usize = cards.iter().product();
            let expected = rows * child_card;
            if raw.table.len() != expected || child_card == 0 {
                v.push(Violation::TableShape {
                    variable: raw.child.clone(),
                    expected,
                    found: raw.table.len(),
                });
                continue;
            }
            for (r, row) in raw.table.chunks(child_card).enumerate() {
                let assignment = || self.describe_row(&parent_ids, &cards, r);
                if let Some(&bad) = row.iter().find(|x| !x.is_finite() || **x < 0.0 || **x > 1.0) {
                    v.push(Violation::EntryOutOfRange {
                        variable: raw.child.clone(),
                        row: r,
                        assignment: assignment(),
                        value: bad,
                    });
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > RENORMALISE_TOLERANCE {
                    v.push(Violation::RowNotNormalised {
                        variable: raw.child.clone(),
                        row: r,
                        assignment: assignment(),
                        sum,
                    });
                }
            }
        }
        for (i, var) in self.variables.iter().enumerate() {
            if !has_cpt[i] && index.get(var.name()) == Some(&i) {
                v.push(Violation::MissingCpt(var.name.clone()));
            }
        }
        ValidationReport { violations: v }
    }

    fn describe_row(&self, parents: &[usize], cards: &[usize], mut row: usize) -> String {
        if parents.is_empty() {
            return "prior".into();
        }
        let mut states = vec![0; parents.len()];
        for k in (0..parents.len()).rev() {
            states[k] = row % cards[k];
            row /= cards[k];
        }
        parents
            .iter()
            .zip(states)
            .map(|(&p, s)| {
                let var = &self.variables[p];
                format!("{}={}", var.name, var.states[s])
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn build(&self) -> Result<DiscreteNetwork> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report));
        }
        let index: HashMap<String, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        let mut cpts: Vec<Option<Cpt>> = vec![None; self.variables.len()];
        for raw in &self.cpts {
            let child = index[&raw.child];
            let card = self.variables[child].cardinality();
            let mut table = raw.table.clone();
            table.chunks_mut(card).for_each(renormalise);
            cpts[child] = Some(Cpt {
                child,
                cardinality: card,
                parents: raw.parents.iter().map(|p| index[p]).collect(),
                table,
            });
        }
        let cpts: Vec<Cpt> = cpts.into_iter().map(|c| c.expect("validated")).collect();
        let children = child_lists(self.variables.len(), &cpts);
        Ok(DiscreteNetwork {
            variables: self.variables.clone(),
            index,
            cpts,
            children,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> DiscreteNetwork {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], Vec::<String>::new(), vec![0.4, 0.6])
            .node("B", &["f", "t"], ["A"], vec![0.9, 0.1, 0.2, 0.8])
            .node("C", &["f", "t"], ["B"], vec![0.7, 0.3, 0.5, 0.5]);
        b.build().unwrap()
    }

    #[test]
    fn valid_two_node_net_has_empty_report() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.5]).node(
            "B",
            &["f", "t"],
            ["A"],
            vec![1.0, 0.0, 0.0, 1.0],
        );
        assert!(b.validate().is_valid());
    }

    #[test]
    fn two_cycle_is_reported_with_both_nodes() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], ["B"], vec![0.5, 0.5, 0.5, 0.5]).node(
            "B",
            &["f", "t"],
            ["A"],
            vec![0.5, 0.5, 0.5, 0.5],
        );
        let report = b.validate();
        assert!(report
            .violations
            .contains(&Violation::Cycle(vec!["A".into(), "B".into()])));
        assert!(matches!(b.build(), Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn unnormalised_row_is_cited() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.5]).node(
            "B",
            &["f", "t"],
            ["A"],
            vec![0.5, 0.5, 0.6, 0.3],
        );
        let report = b.validate();
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::RowNotNormalised {
                variable,
                row,
                assignment,
                sum,
            } => {
                assert_eq!(variable, "B");
                assert_eq!(*row, 1);
                assert_eq!(assignment, "A=t");
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn near_normalised_rows_are_rescaled() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], Vec::<String>::new(), vec![0.3, 0.7000005]);
        let net = b.build().unwrap();
        let sum: f64 = net.cpt(0).table().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn missing_cpt_and_parent_mismatch() {
        let mut b = NetworkBuilder::new();
        b.variable("A", ["f", "t"])
            .variable("B", ["f", "t"])
            .edge("A", "B")
            .cpt("B", Vec::<String>::new(), vec![0.5, 0.5]);
        let report = b.validate();
        assert!(report.violations.contains(&Violation::MissingCpt("A".into())));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ParentMismatch { variable, .. } if variable == "B")));
    }

    #[test]
    fn bad_shapes_and_states() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["x"], Vec::<String>::new(), vec![1.0])
            .node("B", &["f", "f"], Vec::<String>::new(), vec![0.5, 0.5])
            .node("C", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.25, 0.25])
            .node("D", &["f", "t"], Vec::<String>::new(), vec![1.5, -0.5]);
        let report = b.validate();
        assert!(report.violations.contains(&Violation::TooFewStates("A".into())));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateState { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::TableShape { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::EntryOutOfRange { .. })));
    }

    #[test]
    fn topological_order_chain_and_ties() {
        let net = chain();
        let names: Vec<&str> = net
            .topological_order()
            .into_iter()
            .map(|i| net.variable(i).name())
            .collect();
        assert_eq!(names, ["A", "B", "C"]);

        let mut b = NetworkBuilder::new();
        b.node("B", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.5]).node(
            "A",
            &["f", "t"],
            Vec::<String>::new(),
            vec![0.5, 0.5],
        );
        let net = b.build().unwrap();
        let names: Vec<&str> = net
            .topological_order()
            .into_iter()
            .map(|i| net.variable(i).name())
            .collect();
        assert_eq!(names, ["A", "B"]);
    }

    #[test]
    fn topological_sort_reports_cycle() {
        let err = topological_sort(&["A", "B", "C"], &[(0, 1), (1, 0), (1, 2)]).unwrap_err();
        match err {
            Error::Cycle(nodes) => assert_eq!(nodes, ["A", "B"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_blocking() {
        let net = chain();
        assert!(net.d_separated("A", "C", &["B"]).unwrap());
        assert!(!net.d_separated("A", "C", &[]).unwrap());
    }

    #[test]
    fn collider_rule() {
        let mut b = NetworkBuilder::new();
        b.node("A", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.5])
            .node("B", &["f", "t"], Vec::<String>::new(), vec![0.5, 0.5])
            .node("C", &["f", "t"], ["A", "B"], vec![0.5; 8])
            .node("D", &["f", "t"], ["C"], vec![0.5; 4]);
        let net = b.build().unwrap();
        assert!(net.d_separated("A", "B", &[]).unwrap());
        assert!(!net.d_separated("A", "B", &["C"]).unwrap());
        // Observing a descendant of the collider also opens it.
        assert!(!net.d_separated("A", "B", &["D"]).unwrap());
    }

    #[test]
    fn d_separation_errors() {
        let net = chain();
        assert!(matches!(net.d_separated("A", "Z", &[]), Err(Error::UnknownVariable(_))));
        assert!(matches!(net.d_separated("A", "A", &[]), Err(Error::InvalidQuery(_))));
        assert!(matches!(net.d_separated("A", "C", &["A"]), Err(Error::InvalidQuery(_))));
    }

    #[test]
    fn non_descendants_of_middle_node() {
        let net = chain();
        assert_eq!(net.non_descendants(1), vec![0]);
    }

    #[test]
    fn builder_round_trip() {
        let net = chain();
        assert_eq!(net.to_builder().build().unwrap(), net);
    }
}
