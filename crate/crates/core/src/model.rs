//! Problem instance and solution types.
//!
//! Nodes and blocks are addressed by their position in the ordered id lists
//! ([`NodeIdx`], [`BlockIdx`]); string ids only matter at the file boundary.
//! The forwarding indicator `f` and the used-slot indicator `beta` are not
//! stored: they are pure views over the transmission set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeIdx = usize;
pub type BlockIdx = usize;
pub type Slot = usize;

/// Received signal power model used by the SINR test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalModel {
    /// Received power is `gamma[sender][receiver]` (unit transmit power).
    #[default]
    Gamma,
    /// Received power is normalized to 1.
    Unit,
}

/// Flow-constraint interpretation shared by the validator, the solvers and the emitter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// A node hosting both ends of an overlay link needs a physical reception.
    Strict,
    /// Co-location counts as delivery.
    #[default]
    Relaxed,
}

impl std::str::FromStr for FlowMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strict" => Ok(FlowMode::Strict),
            "relaxed" => Ok(FlowMode::Relaxed),
            other => Err(format!("unknown mode `{other}` (expected strict|relaxed)")),
        }
    }
}

impl std::str::FromStr for SignalModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gamma" => Ok(SignalModel::Gamma),
            "unit" => Ok(SignalModel::Unit),
            other => Err(format!("unknown signal model `{other}` (expected gamma|unit)")),
        }
    }
}

/// The wireless infrastructure: nodes, capacities, attenuation and radio constants.
#[derive(Clone, Debug, PartialEq)]
pub struct InfrastructureNetwork {
    pub node_ids: Vec<String>,
    pub capacities: Vec<f64>,
    /// Long-term average attenuation, `gamma[from][to]`, zero diagonal.
    pub gamma: Vec<Vec<f64>>,
    /// Positions in meters when the attenuation was derived from geometry.
    pub positions: Option<Vec<(f64, f64)>>,
    pub noise_floor: f64,
    pub sinr_threshold: f64,
    pub max_slots: usize,
    pub sources: Vec<NodeIdx>,
    pub sink: NodeIdx,
    pub signal_model: SignalModel,
    /// Desired rate annotation in bit/s. Carried through files, never used numerically.
    pub rate: Option<f64>,
}

impl InfrastructureNetwork {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeIdx> {
        0..self.node_ids.len()
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.node_ids.iter().position(|n| n == id)
    }

    pub fn is_source(&self, v: NodeIdx) -> bool {
        self.sources.contains(&v)
    }

    /// Received signal power at `to` for a transmission from `from`.
    pub fn signal(&self, from: NodeIdx, to: NodeIdx) -> f64 {
        match self.signal_model {
            SignalModel::Gamma => self.gamma[from][to],
            SignalModel::Unit => 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.node_ids.len();
        let err = |m: String| Err(Error::InvalidInfrastructure(m));
        if n == 0 {
            return err("no nodes".into());
        }
        let unique: BTreeSet<&String> = self.node_ids.iter().collect();
        if unique.len() != n {
            return err("duplicate node ids".into());
        }
        if self.capacities.len() != n {
            return err(format!("{} capacities for {n} nodes", self.capacities.len()));
        }
        if let Some(c) = self.capacities.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return err(format!("capacity {c} is not a nonnegative number"));
        }
        if self.gamma.len() != n || self.gamma.iter().any(|row| row.len() != n) {
            return err(format!("attenuation matrix must be {n}x{n}"));
        }
        for (i, row) in self.gamma.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if !(g >= 0.0) || !g.is_finite() {
                    return err(format!("gamma[{i}][{j}] = {g} is not a nonnegative number"));
                }
                if i == j && g != 0.0 {
                    return err(format!("gamma[{i}][{i}] must be zero"));
                }
            }
        }
        if let Some(p) = &self.positions {
            if p.len() != n {
                return err(format!("{} positions for {n} nodes", p.len()));
            }
        }
        if !(self.noise_floor > 0.0) {
            return err("noise floor must be positive".into());
        }
        if !(self.sinr_threshold > 0.0) {
            return err("SINR threshold must be positive".into());
        }
        if self.max_slots == 0 {
            return err("max_slots must be at least 1".into());
        }
        if self.sources.is_empty() {
            return err("at least one source node is required".into());
        }
        let src: BTreeSet<_> = self.sources.iter().collect();
        if src.len() != self.sources.len() {
            return err("duplicate source nodes".into());
        }
        if self.sources.iter().any(|&s| s >= n) || self.sink >= n {
            return err("source or sink index out of range".into());
        }
        Ok(())
    }
}

/// The application: processing blocks with resource weights and directed data links.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlayApp {
    pub block_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub links: Vec<(BlockIdx, BlockIdx)>,
    pub source_block: BlockIdx,
    pub sink_block: BlockIdx,
}

impl OverlayApp {
    pub fn len(&self) -> usize {
        self.block_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_ids.is_empty()
    }

    pub fn blocks(&self) -> std::ops::Range<BlockIdx> {
        0..self.block_ids.len()
    }

    pub fn block_index(&self, id: &str) -> Option<BlockIdx> {
        self.block_ids.iter().position(|b| b == id)
    }

    pub fn successors(&self, p: BlockIdx) -> impl Iterator<Item = BlockIdx> + '_ {
        self.links.iter().filter(move |l| l.0 == p).map(|l| l.1)
    }

    pub fn predecessors(&self, p: BlockIdx) -> impl Iterator<Item = BlockIdx> + '_ {
        self.links.iter().filter(move |l| l.1 == p).map(|l| l.0)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.block_ids.len();
        let err = |m: String| Err(Error::InvalidOverlay(m));
        if n < 2 {
            return err("an overlay needs a source and a sink block".into());
        }
        let unique: BTreeSet<&String> = self.block_ids.iter().collect();
        if unique.len() != n {
            return err("duplicate block ids".into());
        }
        if self.weights.len() != n {
            return err(format!("{} weights for {n} blocks", self.weights.len()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return err(format!("weight {w} is not a nonnegative number"));
        }
        if self.source_block >= n || self.sink_block >= n {
            return err("source or sink block index out of range".into());
        }
        if self.source_block == self.sink_block {
            return err("source and sink block must differ".into());
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.links {
            if a >= n || b >= n {
                return err("link references an unknown block".into());
            }
            if a == b {
                return err(format!("self link on `{}`", self.block_ids[a]));
            }
            if !seen.insert((a, b)) {
                return err(format!(
                    "duplicate link {} -> {}",
                    self.block_ids[a], self.block_ids[b]
                ));
            }
        }
        if self.predecessors(self.source_block).next().is_some() {
            return err("source block has an incoming link".into());
        }
        if self.successors(self.sink_block).next().is_some() {
            return err("sink block has an outgoing link".into());
        }
        // every block must be fed from the source
        let mut reach = vec![false; n];
        let mut stack = vec![self.source_block];
        reach[self.source_block] = true;
        while let Some(p) = stack.pop() {
            for q in self.successors(p) {
                if !reach[q] {
                    reach[q] = true;
                    stack.push(q);
                }
            }
        }
        if let Some(p) = reach.iter().position(|r| !r) {
            return err(format!(
                "block `{}` is not reachable from the source block",
                self.block_ids[p]
            ));
        }
        Ok(())
    }
}

/// A problem instance: infrastructure plus overlay.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub net: InfrastructureNetwork,
    pub app: OverlayApp,
}

impl Instance {
    pub fn new(net: InfrastructureNetwork, app: OverlayApp) -> Result<Self> {
        net.check()?;
        app.check()?;
        Ok(Self { net, app })
    }
}

/// `s(sender, receiver, block, origin, slot) = 1`: `sender` transmits to
/// `receiver` in `slot` the output traffic of `block` hosted on `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transmission {
    pub sender: NodeIdx,
    pub receiver: NodeIdx,
    pub block: BlockIdx,
    pub origin: NodeIdx,
    pub slot: Slot,
}

impl Transmission {
    pub fn new(sender: NodeIdx, receiver: NodeIdx, block: BlockIdx, origin: NodeIdx, slot: Slot) -> Self {
        Self { sender, receiver, block, origin, slot }
    }

    fn key(&self) -> (Slot, NodeIdx, BlockIdx, NodeIdx, NodeIdx) {
        (self.slot, self.sender, self.block, self.origin, self.receiver)
    }
}

// Canonical order: by slot, then sender.
impl Ord for Transmission {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Transmission {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Block placement plus the transmission schedule.
///
/// The source block maps to a node set (it lives on every source node); every
/// other block is expected to map to exactly one node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Solution {
    pub placement: BTreeMap<BlockIdx, BTreeSet<NodeIdx>>,
    pub transmissions: BTreeSet<Transmission>,
}

impl Solution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, block: BlockIdx, node: NodeIdx) {
        self.placement.entry(block).or_default().insert(node);
    }

    pub fn hosts(&self, block: BlockIdx) -> impl Iterator<Item = NodeIdx> + '_ {
        self.placement.get(&block).into_iter().flatten().copied()
    }

    pub fn is_hosted_on(&self, block: BlockIdx, node: NodeIdx) -> bool {
        self.placement.get(&block).is_some_and(|s| s.contains(&node))
    }

    /// One past the highest slot index in use (0 for an empty schedule).
    pub fn frame_length(&self) -> usize {
        self.transmissions.iter().map(|t| t.slot + 1).max().unwrap_or(0)
    }

    /// Relabels slots through `perm` (old slot -> new slot).
    pub fn permute_slots(&self, perm: impl Fn(Slot) -> Slot) -> Solution {
        Solution {
            placement: self.placement.clone(),
            transmissions: self
                .transmissions
                .iter()
                .map(|t| Transmission { slot: perm(t.slot), ..*t })
                .collect(),
        }
    }
}

/// Result of a solver run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Solved(Solution),
    /// No solution exists within the searched frame bound.
    Infeasible,
    /// The search hit its node or backtrack budget first.
    BudgetExhausted,
}

impl Outcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Outcome::Solved(s) => Some(s),
            _ => None,
        }
    }

    pub fn into_solution(self) -> Option<Solution> {
        match self {
            Outcome::Solved(s) => Some(s),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            Outcome::Solved(_) => "solved",
            Outcome::Infeasible => "infeasible",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// The forwarding indicator `f(block, node, slot)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forwarding(BTreeSet<(BlockIdx, NodeIdx, Slot)>);

impl Forwarding {
    pub fn get(&self, block: BlockIdx, node: NodeIdx, slot: Slot) -> bool {
        self.0.contains(&(block, node, slot))
    }

    /// All `(block, node, slot)` triples with `f = 1`.
    pub fn active(&self) -> impl Iterator<Item = (BlockIdx, NodeIdx, Slot)> + '_ {
        self.0.iter().copied()
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }
}

/// The used-slot indicator `beta(slot)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsedSlots(BTreeSet<Slot>);

impl UsedSlots {
    pub fn get(&self, slot: Slot) -> bool {
        self.0.contains(&slot)
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.0.iter().copied()
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }
}

pub fn derive_forwarding(sol: &Solution) -> Forwarding {
    Forwarding(sol.transmissions.iter().map(|t| (t.block, t.sender, t.slot)).collect())
}

pub fn derive_used_slots(sol: &Solution) -> UsedSlots {
    UsedSlots(sol.transmissions.iter().map(|t| t.slot).collect())
}

/// Number of used time slots.
pub fn objective(sol: &Solution) -> usize {
    derive_used_slots(sol).count()
}
