use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::probability::AttackProbabilityModel;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub id: String,
    /// Loss incurred if the target is compromised.
    pub loss_value: f64,
    pub prob_model: AttackProbabilityModel,
    pub demand_lower: f64,
    /// `f64::INFINITY` when the target has no cap.
    pub demand_upper: f64,
}

impl TargetSpec {
    pub fn new(id: impl Into<String>, loss_value: f64, prob_model: AttackProbabilityModel) -> Self {
        Self {
            id: id.into(),
            loss_value,
            prob_model,
            demand_lower: 0.0,
            demand_upper: f64::INFINITY,
        }
    }

    pub fn with_demand(mut self, lower: f64, upper: f64) -> Self {
        self.demand_lower = lower;
        self.demand_upper = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_value > 0.0) || !self.loss_value.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "target {}: loss value must be positive, got {}",
                self.id, self.loss_value
            )));
        }
        self.prob_model
            .validate()
            .map_err(|e| Error::InvalidNetwork(format!("target {}: {e}", self.id)))?;
        if !(self.demand_lower >= 0.0 && self.demand_lower <= self.demand_upper) || !self.demand_lower.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "target {}: demand bounds must satisfy 0 <= lower <= upper, got [{}, {}]",
                self.id, self.demand_lower, self.demand_upper
            )));
        }
        if !(self.demand_upper > 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "target {}: demand upper bound must be positive, got {}",
                self.id, self.demand_upper
            )));
        }
        Ok(())
    }
}

/// Linear utility `s_xy(π) = c_xy π` of a source, with an optional slope per
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearUtility {
    pub default_slope: f64,
    pub per_target: BTreeMap<String, f64>,
}

impl LinearUtility {
    pub fn uniform(slope: f64) -> Self {
        Self {
            default_slope: slope,
            per_target: BTreeMap::new(),
        }
    }

    pub fn slope(&self, target_id: &str) -> f64 {
        self.per_target.get(target_id).copied().unwrap_or(self.default_slope)
    }
}

impl Default for LinearUtility {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub id: String,
    pub supply_lower: f64,
    pub supply_upper: f64,
    /// Weight of this source's utility in the planner objective.
    pub weight_tau: f64,
    pub utility: LinearUtility,
}

impl SourceSpec {
    pub fn new(id: impl Into<String>, supply_upper: f64) -> Self {
        Self {
            id: id.into(),
            supply_lower: 0.0,
            supply_upper,
            weight_tau: 0.0,
            utility: LinearUtility::default(),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.weight_tau = tau;
        self
    }

    pub fn with_supply_lower(mut self, lower: f64) -> Self {
        self.supply_lower = lower;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.supply_upper > 0.0) || !self.supply_upper.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "source {}: supply upper bound must be positive and finite, got {}",
                self.id, self.supply_upper
            )));
        }
        if !(self.supply_lower >= 0.0 && self.supply_lower <= self.supply_upper) {
            return Err(Error::InvalidNetwork(format!(
                "source {}: supply bounds must satisfy 0 <= lower <= upper, got [{}, {}]",
                self.id, self.supply_lower, self.supply_upper
            )));
        }
        if !(self.weight_tau >= 0.0) || !self.weight_tau.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "source {}: tau must be nonnegative, got {}",
                self.id, self.weight_tau
            )));
        }
        let slopes = std::iter::once(self.utility.default_slope).chain(self.utility.per_target.values().copied());
        for c in slopes {
            if !c.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "source {}: utility slope must be finite, got {c}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A feasible transport path, by index into the network's node lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub target: usize,
    pub source: usize,
}

/// Bipartite network of sources and targets. Edges are kept sorted by
/// `(target, source)` so that every edge-indexed vector has a canonical
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportNetwork {
    targets: Vec<TargetSpec>,
    sources: Vec<SourceSpec>,
    edges: Vec<Edge>,
    target_edges: Vec<Vec<usize>>,
    source_edges: Vec<Vec<usize>>,
}

impl TransportNetwork {
    pub fn new(targets: Vec<TargetSpec>, sources: Vec<SourceSpec>, edges: Vec<Edge>) -> Result<Self> {
        if targets.is_empty() || sources.is_empty() {
            return Err(Error::InvalidNetwork(
                "network needs at least one target and one source".into(),
            ));
        }
        for t in &targets {
            t.validate()?;
        }
        for s in &sources {
            s.validate()?;
        }
        check_unique_ids(targets.iter().map(|t| t.id.as_str()), "target")?;
        check_unique_ids(sources.iter().map(|s| s.id.as_str()), "source")?;

        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.target >= targets.len() || e.source >= sources.len() {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) references a missing node",
                    e.target, e.source
                )));
            }
            if !seen.insert(*e) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate edge ({}, {})",
                    targets[e.target].id, sources[e.source].id
                )));
            }
        }
        let edges: Vec<Edge> = seen.into_iter().collect();

        let mut target_edges = vec![Vec::new(); targets.len()];
        let mut source_edges = vec![Vec::new(); sources.len()];
        for (k, e) in edges.iter().enumerate() {
            target_edges[e.target].push(k);
            source_edges[e.source].push(k);
        }
        if let Some(x) = target_edges.iter().position(Vec::is_empty) {
            return Err(Error::InvalidNetwork(format!(
                "target {} has no incident edge",
                targets[x].id
            )));
        }
        if let Some(y) = source_edges.iter().position(Vec::is_empty) {
            return Err(Error::InvalidNetwork(format!(
                "source {} has no incident edge",
                sources[y].id
            )));
        }
        Ok(Self {
            targets,
            sources,
            edges,
            target_edges,
            source_edges,
        })
    }

    /// Every source connected to every target.
    pub fn complete(targets: Vec<TargetSpec>, sources: Vec<SourceSpec>) -> Result<Self> {
        let edges = (0..targets.len())
            .flat_map(|x| (0..sources.len()).map(move |y| Edge { target: x, source: y }))
            .collect();
        Self::new(targets, sources, edges)
    }

    pub fn targets(&self) -> &[TargetSpec] {
        &self.targets
    }

    pub fn sources(&self) -> &[SourceSpec] {
        &self.sources
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge indices incident to target `x`.
    pub fn target_edges(&self, x: usize) -> &[usize] {
        &self.target_edges[x]
    }

    /// Edge indices incident to source `y`.
    pub fn source_edges(&self, y: usize) -> &[usize] {
        &self.source_edges[y]
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.targets.len() * self.sources.len()
    }

    pub fn total_supply(&self) -> f64 {
        self.sources.iter().map(|s| s.supply_upper).sum()
    }

    pub fn target_index(&self, id: &str) -> Option<usize> {
        self.targets.iter().position(|t| t.id == id)
    }

    pub fn source_index(&self, id: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.id == id)
    }

    /// Utility slope `c_xy` of edge `k`.
    pub fn edge_slope(&self, k: usize) -> f64 {
        let e = self.edges[k];
        self.sources[e.source].utility.slope(&self.targets[e.target].id)
    }

    /// Copy of this network with every source weight set to `tau`.
    pub fn with_uniform_tau(&self, tau: f64) -> Result<Self> {
        let mut sources = self.sources.clone();
        for s in &mut sources {
            s.weight_tau = tau;
        }
        Self::new(self.targets.clone(), sources, self.edges.clone())
    }

    /// Copy of this network with new source capacities.
    pub fn with_supply_upper(&self, upper: &[f64]) -> Result<Self> {
        if upper.len() != self.sources.len() {
            return Err(Error::InvalidNetwork(format!(
                "expected {} capacities, got {}",
                self.sources.len(),
                upper.len()
            )));
        }
        let mut sources = self.sources.clone();
        for (s, &q) in sources.iter_mut().zip(upper) {
            s.supply_upper = q;
        }
        Self::new(self.targets.clone(), sources, self.edges.clone())
    }

    /// Copy of this network with every target using `model`.
    pub fn with_prob_model(&self, model: AttackProbabilityModel) -> Result<Self> {
        let mut targets = self.targets.clone();
        for t in &mut targets {
            t.prob_model = model;
        }
        Self::new(targets, self.sources.clone(), self.edges.clone())
    }
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>, kind: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidNetwork(format!("duplicate {kind} id {id:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> AttackProbabilityModel {
        AttackProbabilityModel::exponential(1.0).unwrap()
    }

    #[test]
    fn complete_network_layout() {
        let net = TransportNetwork::complete(
            vec![TargetSpec::new("a", 2.0, exp1()), TargetSpec::new("b", 1.0, exp1())],
            vec![SourceSpec::new("s", 3.0), SourceSpec::new("u", 1.0)],
        )
        .unwrap();
        assert_eq!(net.edge_count(), 4);
        assert!(net.is_complete());
        assert_eq!(net.target_edges(1), &[2, 3]);
        assert_eq!(net.source_edges(0), &[0, 2]);
        assert_eq!(net.total_supply(), 4.0);
    }

    #[test]
    fn rejects_isolated_nodes_and_duplicates() {
        let targets = vec![TargetSpec::new("a", 2.0, exp1()), TargetSpec::new("b", 1.0, exp1())];
        let sources = vec![SourceSpec::new("s", 3.0)];
        let only_a = vec![Edge { target: 0, source: 0 }];
        assert!(TransportNetwork::new(targets.clone(), sources.clone(), only_a).is_err());
        let dup = vec![
            Edge { target: 0, source: 0 },
            Edge { target: 0, source: 0 },
            Edge { target: 1, source: 0 },
        ];
        assert!(TransportNetwork::new(targets.clone(), sources.clone(), dup).is_err());
        let dangling = vec![Edge { target: 0, source: 0 }, Edge { target: 1, source: 4 }];
        assert!(TransportNetwork::new(targets, sources, dangling).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_loss = TargetSpec::new("a", 0.0, exp1());
        assert!(TransportNetwork::complete(vec![bad_loss], vec![SourceSpec::new("s", 1.0)]).is_err());
        let inverted = TargetSpec::new("a", 1.0, exp1()).with_demand(3.0, 2.0);
        assert!(TransportNetwork::complete(vec![inverted], vec![SourceSpec::new("s", 1.0)]).is_err());
        let neg_tau = SourceSpec::new("s", 1.0).with_tau(-0.1);
        assert!(TransportNetwork::complete(vec![TargetSpec::new("a", 1.0, exp1())], vec![neg_tau]).is_err());
        assert!(TransportNetwork::complete(vec![], vec![SourceSpec::new("s", 1.0)]).is_err());
    }
}
