//! Attenuation and SINR feasibility of concurrent transmissions in one slot.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{InfrastructureNetwork, NodeIdx, Slot, Transmission};

/// Senders and receptions active in one time slot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SlotLoad {
    pub slot: Slot,
    pub active_senders: BTreeSet<NodeIdx>,
    pub receptions: BTreeSet<(NodeIdx, NodeIdx)>,
}

impl SlotLoad {
    pub fn new(slot: Slot) -> Self {
        Self { slot, ..Default::default() }
    }

    /// Adds a reception; its sender becomes active.
    pub fn add(&mut self, sender: NodeIdx, receiver: NodeIdx) {
        self.active_senders.insert(sender);
        self.receptions.insert((sender, receiver));
    }

    pub fn from_transmissions<'a>(slot: Slot, ts: impl IntoIterator<Item = &'a Transmission>) -> Self {
        let mut load = SlotLoad::new(slot);
        for t in ts.into_iter().filter(|t| t.slot == slot) {
            load.add(t.sender, t.receiver);
        }
        load
    }
}

/// `gamma[v][v'] = 1 / d(v, v')^2` with a zero diagonal.
pub fn attenuation_from_positions(ids: &[String], positions: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    let n = positions.len();
    let mut gamma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                let name = |k: usize| ids.get(k).cloned().unwrap_or_else(|| k.to_string());
                return Err(Error::CoincidentNodes(name(i), name(j)));
            }
            gamma[i][j] = 1.0 / d2;
        }
    }
    Ok(gamma)
}

/// Interference at `receiver` from every active sender except `sender`.
pub fn interference(sender: NodeIdx, receiver: NodeIdx, load: &SlotLoad, net: &InfrastructureNetwork) -> f64 {
    load.active_senders
        .iter()
        .filter(|&&u| u != sender)
        .map(|&u| net.gamma[u][receiver])
        .sum()
}

pub fn sinr_at(sender: NodeIdx, receiver: NodeIdx, load: &SlotLoad, net: &InfrastructureNetwork) -> f64 {
    net.signal(sender, receiver) / (net.noise_floor + interference(sender, receiver, load, net))
}

/// Half-duplex, single reception per node, and every reception meets the SINR threshold.
pub fn slot_feasible(load: &SlotLoad, net: &InfrastructureNetwork) -> bool {
    let mut receivers = BTreeSet::new();
    for &(_, r) in &load.receptions {
        if load.active_senders.contains(&r) || !receivers.insert(r) {
            return false;
        }
    }
    load.receptions
        .iter()
        .all(|&(s, r)| sinr_at(s, r, load, net) >= net.sinr_threshold)
}
