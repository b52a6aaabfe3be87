//! In-process message passing between agents.
//!
//! Each edge owns a mailbox with one slot per endpoint. A round collects a
//! proposal from every agent for every incident edge, applies the consensus
//! and dual updates edge by edge, and broadcasts the result back to both
//! endpoints.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::agents::{EdgeView, Message, Side, SourceAgent, TargetAgent};
use super::{consensus_update, dual_update, EdgeState};

#[derive(Debug, Clone, PartialEq)]
pub struct Mailbox {
    slots: Vec<[Option<f64>; 2]>,
}

/// Disagreement and movement measured while closing a round.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundStats {
    /// `max |π^t - π^s|` over edges.
    pub primal_residual: f64,
    /// `max |π(k+1) - π(k)|` over edges.
    pub consensus_change: f64,
}

impl Mailbox {
    pub fn new(edges: usize) -> Self {
        Self {
            slots: vec![[None, None]; edges],
        }
    }

    pub fn post(&mut self, msg: Message) -> Result<()> {
        let slot = self
            .slots
            .get_mut(msg.edge)
            .ok_or_else(|| Error::Mismatch(format!("message for unknown edge {}", msg.edge)))?;
        let cell = &mut slot[side_index(msg.from)];
        if cell.is_some() {
            return Err(Error::Mismatch(format!(
                "duplicate {:?} message on edge {}",
                msg.from, msg.edge
            )));
        }
        if !(msg.amount >= 0.0) || !msg.amount.is_finite() {
            return Err(Error::Domain(format!(
                "invalid proposal {} on edge {}",
                msg.amount, msg.edge
            )));
        }
        *cell = Some(msg.amount);
        Ok(())
    }

    /// Applies the consensus and dual updates to every edge and empties the
    /// mailbox. Fails without touching `edges` if any slot is empty.
    pub fn close_round(&mut self, edges: &mut [EdgeState], eta: f64) -> Result<RoundStats> {
        if edges.len() != self.slots.len() {
            return Err(Error::Mismatch(format!(
                "mailbox has {} edges, state has {}",
                self.slots.len(),
                edges.len()
            )));
        }
        for (k, slot) in self.slots.iter().enumerate() {
            for (side, cell) in [Side::Target, Side::Source].into_iter().zip(slot) {
                if cell.is_none() {
                    return Err(Error::MissingMessage(format!("no {side:?} proposal on edge {k}")));
                }
            }
        }
        let mut stats = RoundStats::default();
        for (state, slot) in edges.iter_mut().zip(&mut self.slots) {
            let [Some(t), Some(s)] = std::mem::take(slot) else {
                unreachable!("slots checked above");
            };
            let before = state.consensus;
            let proposed = EdgeState {
                last_target_proposal: t,
                last_source_proposal: s,
                ..*state
            };
            *state = dual_update(&consensus_update(&proposed), eta);
            stats.primal_residual = stats.primal_residual.max((t - s).abs());
            stats.consensus_change = stats.consensus_change.max((state.consensus - before).abs());
        }
        Ok(stats)
    }
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Target => 0,
        Side::Source => 1,
    }
}

/// One synchronous round: every agent proposes against the last broadcast,
/// proposals go through the mailbox, and updated `(consensus, dual)` pairs
/// are sent back to both endpoints.
pub fn message_bus_round(
    targets: &mut [TargetAgent],
    sources: &mut [SourceAgent],
    edges: &mut [EdgeState],
    eta: f64,
) -> Result<RoundStats> {
    let target_msgs: Vec<Vec<Message>> = targets.par_iter_mut().map(|a| a.propose(eta)).collect::<Result<_>>()?;
    let source_msgs: Vec<Vec<Message>> = sources.par_iter_mut().map(|a| a.propose(eta)).collect::<Result<_>>()?;

    let mut mailbox = Mailbox::new(edges.len());
    for msg in target_msgs.into_iter().chain(source_msgs).flatten() {
        mailbox.post(msg)?;
    }
    let stats = mailbox.close_round(edges, eta)?;
    broadcast(targets, sources, edges);
    Ok(stats)
}

pub(crate) fn broadcast(targets: &mut [TargetAgent], sources: &mut [SourceAgent], edges: &[EdgeState]) {
    let view = |k: usize| EdgeView {
        consensus: edges[k].consensus,
        dual: edges[k].dual,
    };
    for a in targets.iter_mut() {
        let views = a.edges().iter().map(|&k| view(k)).collect();
        a.set_views(views);
    }
    for a in sources.iter_mut() {
        let views = a.edges().iter().map(|&k| view(k)).collect();
        a.set_views(views);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttackProbabilityModel, BehavioralModel, SourceSpec, TargetSpec};

    fn pair() -> (Vec<TargetAgent>, Vec<SourceAgent>, Vec<EdgeState>) {
        let t = TargetSpec::new("t", 4.0, AttackProbabilityModel::exponential(1.0).unwrap());
        let s = SourceSpec::new("s", 3.0).with_tau(0.2);
        (
            vec![TargetAgent::new(t, BehavioralModel::new(0.7).unwrap(), vec![0])],
            vec![SourceAgent::new(s, vec![0], vec![1.0])],
            vec![EdgeState::default()],
        )
    }

    #[test]
    fn endpoints_hold_identical_state_after_round() {
        let (mut ts, mut ss, mut es) = pair();
        message_bus_round(&mut ts, &mut ss, &mut es, 1.0).unwrap();
        let expected = EdgeView {
            consensus: es[0].consensus,
            dual: es[0].dual,
        };
        assert_eq!(ts[0].views()[0], expected);
        assert_eq!(ss[0].views()[0], expected);
        assert_eq!(
            es[0].consensus,
            0.5 * (es[0].last_target_proposal + es[0].last_source_proposal)
        );
    }

    #[test]
    fn posting_order_does_not_matter() {
        let msgs = [
            Message {
                edge: 0,
                from: Side::Target,
                amount: 1.0,
            },
            Message {
                edge: 1,
                from: Side::Source,
                amount: 2.0,
            },
            Message {
                edge: 0,
                from: Side::Source,
                amount: 0.5,
            },
            Message {
                edge: 1,
                from: Side::Target,
                amount: 0.25,
            },
        ];
        let run = |order: &[usize]| {
            let mut mb = Mailbox::new(2);
            for &i in order {
                mb.post(msgs[i]).unwrap();
            }
            let mut es = vec![EdgeState::default(); 2];
            let stats = mb.close_round(&mut es, 1.5).unwrap();
            (es, stats)
        };
        assert_eq!(run(&[0, 1, 2, 3]), run(&[3, 2, 1, 0]));
        assert_eq!(run(&[0, 1, 2, 3]), run(&[1, 3, 0, 2]));
    }

    #[test]
    fn dropped_message_is_an_error() {
        let mut mb = Mailbox::new(1);
        mb.post(Message {
            edge: 0,
            from: Side::Target,
            amount: 1.0,
        })
        .unwrap();
        let mut es = vec![EdgeState::default()];
        let err = mb.close_round(&mut es, 1.0).unwrap_err();
        assert!(matches!(err, Error::MissingMessage(_)));
        assert_eq!(es[0], EdgeState::default());
    }

    #[test]
    fn duplicate_message_is_an_error() {
        let mut mb = Mailbox::new(1);
        let m = Message {
            edge: 0,
            from: Side::Source,
            amount: 1.0,
        };
        mb.post(m).unwrap();
        assert!(mb.post(m).is_err());
        assert!(mb.post(Message { edge: 3, ..m }).is_err());
    }
}
