use crate::error::{Error, Result};

use super::network::{Edge, TransportNetwork};

/// Edge-indexed transport amounts, laid out in the network's edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    edges: Vec<Edge>,
    amounts: Vec<f64>,
}

impl AllocationPlan {
    pub fn zeros(network: &TransportNetwork) -> Self {
        Self {
            edges: network.edges().to_vec(),
            amounts: vec![0.0; network.edge_count()],
        }
    }

    pub fn from_amounts(network: &TransportNetwork, amounts: Vec<f64>) -> Result<Self> {
        if amounts.len() != network.edge_count() {
            return Err(Error::Mismatch(format!(
                "expected {} edge amounts, got {}",
                network.edge_count(),
                amounts.len()
            )));
        }
        if let Some(k) = amounts.iter().position(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::Domain(format!("edge {k} carries invalid amount {}", amounts[k])));
        }
        Ok(Self {
            edges: network.edges().to_vec(),
            amounts,
        })
    }

    /// Builds a plan from amounts that may carry tiny negative round-off,
    /// clamping them to zero.
    pub(crate) fn from_clamped(network: &TransportNetwork, mut amounts: Vec<f64>) -> Self {
        for a in &mut amounts {
            if *a < 0.0 {
                *a = 0.0;
            }
        }
        Self {
            edges: network.edges().to_vec(),
            amounts,
        }
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn amount(&self, target: usize, source: usize) -> Option<f64> {
        self.edges
            .binary_search(&Edge { target, source })
            .ok()
            .map(|k| self.amounts[k])
    }

    pub fn check_network(&self, network: &TransportNetwork) -> Result<()> {
        if self.edges != network.edges() {
            return Err(Error::Mismatch("plan edge set differs from network edge set".into()));
        }
        Ok(())
    }

    pub fn aggregate_at_target(&self, network: &TransportNetwork, x: usize) -> f64 {
        network.target_edges(x).iter().map(|&k| self.amounts[k]).sum()
    }

    pub fn aggregate_at_source(&self, network: &TransportNetwork, y: usize) -> f64 {
        network.source_edges(y).iter().map(|&k| self.amounts[k]).sum()
    }

    pub fn target_aggregates(&self, network: &TransportNetwork) -> Vec<f64> {
        (0..network.targets().len())
            .map(|x| self.aggregate_at_target(network, x))
            .collect()
    }

    pub fn source_aggregates(&self, network: &TransportNetwork) -> Vec<f64> {
        (0..network.sources().len())
            .map(|y| self.aggregate_at_source(network, y))
            .collect()
    }
}
