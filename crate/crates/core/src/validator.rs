//! Constraint-by-constraint feasibility checks.
//!
//! Every solver output in this crate is judged by [`validate`]. Loop exclusion
//! is checked as plain reachability: a node may send a block's traffic only if
//! it is reachable from that traffic's origin over edges carrying it. Slot order
//! is irrelevant (frames repeat, so a relay may forward what it received in the
//! previous frame).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::model::{BlockIdx, FlowMode, InfrastructureNetwork, NodeIdx, OverlayApp, Slot, Solution, Transmission};
use crate::radio::{sinr_at, SlotLoad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintTag {
    PlacementUnique,
    Capacity,
    SlotExclusive,
    Sinr,
    DepDelivery,
    NoDeadEnd,
    SendLegitimacy,
    PhantomLoop,
    Structural,
}

impl ConstraintTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintTag::PlacementUnique => "PLACEMENT_UNIQUE",
            ConstraintTag::Capacity => "CAPACITY",
            ConstraintTag::SlotExclusive => "SLOT_EXCLUSIVE",
            ConstraintTag::Sinr => "SINR",
            ConstraintTag::DepDelivery => "DEP_DELIVERY",
            ConstraintTag::NoDeadEnd => "NO_DEAD_END",
            ConstraintTag::SendLegitimacy => "SEND_LEGITIMACY",
            ConstraintTag::PhantomLoop => "PHANTOM_LOOP",
            ConstraintTag::Structural => "STRUCTURAL",
        }
    }

    /// Tags produced by the routing/flow checks.
    pub fn is_flow(self) -> bool {
        matches!(
            self,
            ConstraintTag::DepDelivery
                | ConstraintTag::NoDeadEnd
                | ConstraintTag::SendLegitimacy
                | ConstraintTag::PhantomLoop
        )
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub tag: ConstraintTag,
    pub detail: String,
    pub entities: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self { ok: violations.is_empty(), violations }
    }

    pub fn has(&self, tag: ConstraintTag) -> bool {
        self.violations.iter().any(|v| v.tag == tag)
    }

    pub fn tags(&self) -> BTreeSet<ConstraintTag> {
        self.violations.iter().map(|v| v.tag).collect()
    }
}

struct Names<'a> {
    net: &'a InfrastructureNetwork,
    app: &'a OverlayApp,
}

impl Names<'_> {
    fn node(&self, v: NodeIdx) -> String {
        self.net.node_ids.get(v).cloned().unwrap_or_else(|| format!("#{v}"))
    }

    fn block(&self, p: BlockIdx) -> String {
        self.app.block_ids.get(p).cloned().unwrap_or_else(|| format!("#{p}"))
    }
}

fn violation(tag: ConstraintTag, detail: String, entities: Vec<String>) -> Violation {
    Violation { tag, detail, entities }
}

/// Out-of-range indices, slots beyond the frame bound and self transmissions.
pub fn check_structure(sol: &Solution, net: &InfrastructureNetwork, app: &OverlayApp) -> Vec<Violation> {
    let names = Names { net, app };
    let mut out = Vec::new();
    let n = net.len();
    for (&p, hosts) in &sol.placement {
        if p >= app.len() {
            out.push(violation(ConstraintTag::Structural, format!("unknown block index {p}"), vec![]));
        }
        for &v in hosts.iter().filter(|&&v| v >= n) {
            out.push(violation(ConstraintTag::Structural, format!("unknown node index {v}"), vec![names.block(p)]));
        }
    }
    for t in &sol.transmissions {
        let bad = t.sender >= n || t.receiver >= n || t.origin >= n || t.block >= app.len();
        if bad {
            out.push(violation(ConstraintTag::Structural, format!("transmission {t:?} references unknown ids"), vec![]));
            continue;
        }
        if t.slot >= net.max_slots {
            out.push(violation(
                ConstraintTag::Structural,
                format!("slot {} is outside the frame of {} slots", t.slot, net.max_slots),
                vec![names.node(t.sender), names.node(t.receiver)],
            ));
        }
        if t.sender == t.receiver {
            out.push(violation(
                ConstraintTag::Structural,
                "a node cannot transmit to itself".into(),
                vec![names.node(t.sender)],
            ));
        }
    }
    out
}

/// Unique placement (the source block on exactly the source nodes, the sink
/// block on the sink node) and node capacities.
pub fn check_placement(sol: &Solution, net: &InfrastructureNetwork, app: &OverlayApp) -> Vec<Violation> {
    let names = Names { net, app };
    let mut out = Vec::new();
    for p in app.blocks() {
        let hosts: BTreeSet<NodeIdx> = sol.hosts(p).collect();
        if p == app.source_block {
            let sources: BTreeSet<NodeIdx> = net.sources.iter().copied().collect();
            if hosts != sources {
                out.push(violation(
                    ConstraintTag::PlacementUnique,
                    "source block must be placed on exactly the source nodes".into(),
                    vec![names.block(p)],
                ));
            }
            continue;
        }
        if hosts.len() != 1 {
            out.push(violation(
                ConstraintTag::PlacementUnique,
                format!("block placed {} times", hosts.len()),
                vec![names.block(p)],
            ));
        } else if p == app.sink_block && !hosts.contains(&net.sink) {
            out.push(violation(
                ConstraintTag::PlacementUnique,
                "sink block must be placed on the sink node".into(),
                vec![names.block(p), names.node(net.sink)],
            ));
        }
    }
    for v in net.nodes() {
        let load: f64 = app.blocks().filter(|&p| sol.is_hosted_on(p, v)).map(|p| app.weights[p]).sum();
        if load > net.capacities[v] {
            out.push(violation(
                ConstraintTag::Capacity,
                format!("load {load} exceeds capacity {}", net.capacities[v]),
                vec![names.node(v)],
            ));
        }
    }
    out
}

fn by_slot(sol: &Solution) -> BTreeMap<Slot, Vec<&Transmission>> {
    let mut map: BTreeMap<Slot, Vec<&Transmission>> = BTreeMap::new();
    for t in &sol.transmissions {
        map.entry(t.slot).or_default().push(t);
    }
    map
}

/// Per node and slot: at most one block's traffic sent, never send and receive, at most one reception.
pub fn check_slot_exclusivity(sol: &Solution, net: &InfrastructureNetwork) -> Vec<Violation> {
    let mut out = Vec::new();
    for (slot, ts) in by_slot(sol) {
        let mut sent: BTreeMap<NodeIdx, BTreeSet<BlockIdx>> = BTreeMap::new();
        let mut received: BTreeMap<NodeIdx, usize> = BTreeMap::new();
        for t in &ts {
            sent.entry(t.sender).or_default().insert(t.block);
            *received.entry(t.receiver).or_default() += 1;
        }
        let nodes: BTreeSet<NodeIdx> = sent.keys().chain(received.keys()).copied().collect();
        for v in nodes {
            let blocks = sent.get(&v).map_or(0, |b| b.len());
            let rx = received.get(&v).copied().unwrap_or(0);
            if blocks + rx > 1 {
                let what = if blocks > 1 {
                    format!("sends traffic of {blocks} blocks")
                } else if blocks == 1 {
                    "sends and receives".to_string()
                } else {
                    format!("receives {rx} transmissions")
                };
                out.push(violation(
                    ConstraintTag::SlotExclusive,
                    format!("{what} in slot {slot}"),
                    vec![net.node_ids[v].clone(), slot.to_string()],
                ));
            }
        }
    }
    out
}

/// Every reception must reach the SINR threshold given all concurrent senders.
pub fn check_sinr(sol: &Solution, net: &InfrastructureNetwork) -> Vec<Violation> {
    let mut out = Vec::new();
    for (slot, ts) in by_slot(sol) {
        let load = SlotLoad::from_transmissions(slot, ts.iter().copied());
        for &(s, r) in &load.receptions {
            let sinr = sinr_at(s, r, &load, net);
            if sinr < net.sinr_threshold {
                out.push(violation(
                    ConstraintTag::Sinr,
                    format!("SINR {sinr:.4} below threshold {} in slot {slot}", net.sinr_threshold),
                    vec![net.node_ids[s].clone(), net.node_ids[r].clone(), slot.to_string()],
                ));
            }
        }
    }
    out
}

/// Delivery of dependencies, no dead ends, and send legitimacy.
///
/// In strict mode a co-located predecessor does not count as delivery, and
/// dead ends are counted: receptions of a traffic at a node may not exceed the
/// hosted successors plus the node's own sends of that traffic.
pub fn check_flow(sol: &Solution, net: &InfrastructureNetwork, app: &OverlayApp, mode: FlowMode) -> Vec<Violation> {
    let names = Names { net, app };
    let mut out = Vec::new();

    // (node, block) pairs that received some traffic of block
    let mut got_block: BTreeSet<(NodeIdx, BlockIdx)> = BTreeSet::new();
    // (node, block, origin) -> reception / send counts
    let mut rx: BTreeMap<(NodeIdx, BlockIdx, NodeIdx), usize> = BTreeMap::new();
    let mut tx: BTreeMap<(NodeIdx, BlockIdx, NodeIdx), usize> = BTreeMap::new();
    for t in &sol.transmissions {
        got_block.insert((t.receiver, t.block));
        *rx.entry((t.receiver, t.block, t.origin)).or_default() += 1;
        *tx.entry((t.sender, t.block, t.origin)).or_default() += 1;
    }

    for &(p1, p2) in &app.links {
        for v in sol.hosts(p2) {
            let delivered = got_block.contains(&(v, p1)) || (mode == FlowMode::Relaxed && sol.is_hosted_on(p1, v));
            if !delivered {
                out.push(violation(
                    ConstraintTag::DepDelivery,
                    format!("node hosts {} but never receives traffic of {}", names.block(p2), names.block(p1)),
                    vec![names.node(v), names.block(p1), names.block(p2)],
                ));
            }
        }
    }

    for (&(v, p, o), &count) in &rx {
        let successors_here = app.successors(p).filter(|&q| sol.is_hosted_on(q, v)).count();
        let sends = tx.get(&(v, p, o)).copied().unwrap_or(0);
        let dead = match mode {
            FlowMode::Relaxed => successors_here == 0 && sends == 0,
            FlowMode::Strict => count > successors_here + sends,
        };
        if dead {
            out.push(violation(
                ConstraintTag::NoDeadEnd,
                format!(
                    "receives traffic of {} from {} {count} time(s) but hosts {successors_here} successor(s) and forwards {sends} time(s)",
                    names.block(p),
                    names.node(o)
                ),
                vec![names.node(v), names.block(p), names.node(o)],
            ));
        }
    }

    for &(v, p, o) in tx.keys() {
        if !sol.is_hosted_on(p, o) {
            out.push(violation(
                ConstraintTag::SendLegitimacy,
                format!("traffic attributed to origin {} which does not host {}", names.node(o), names.block(p)),
                vec![names.node(v), names.block(p), names.node(o)],
            ));
            continue;
        }
        if !sol.is_hosted_on(p, v) && !rx.contains_key(&(v, p, o)) {
            out.push(violation(
                ConstraintTag::SendLegitimacy,
                format!("sends traffic of {} it neither hosts nor received", names.block(p)),
                vec![names.node(v), names.block(p), names.node(o)],
            ));
        }
    }
    out
}

/// Nodes reachable from `origin` over the edges carrying `(block, origin)` traffic.
pub fn reachable_from_origin(sol: &Solution, block: BlockIdx, origin: NodeIdx) -> BTreeSet<NodeIdx> {
    let mut adj: BTreeMap<NodeIdx, Vec<NodeIdx>> = BTreeMap::new();
    for t in sol.transmissions.iter().filter(|t| t.block == block && t.origin == origin) {
        adj.entry(t.sender).or_default().push(t.receiver);
    }
    let mut seen = BTreeSet::from([origin]);
    let mut stack = vec![origin];
    while let Some(u) = stack.pop() {
        for &w in adj.get(&u).into_iter().flatten() {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Senders of a traffic that no active path from its origin reaches.
pub fn check_no_phantom_loops(sol: &Solution, net: &InfrastructureNetwork, app: &OverlayApp) -> Vec<Violation> {
    let names = Names { net, app };
    let mut out = Vec::new();
    let flows: BTreeSet<(BlockIdx, NodeIdx)> = sol.transmissions.iter().map(|t| (t.block, t.origin)).collect();
    for (p, o) in flows {
        let reach = reachable_from_origin(sol, p, o);
        let senders: BTreeSet<NodeIdx> = sol
            .transmissions
            .iter()
            .filter(|t| t.block == p && t.origin == o)
            .map(|t| t.sender)
            .collect();
        for v in senders.into_iter().filter(|v| !reach.contains(v)) {
            out.push(violation(
                ConstraintTag::PhantomLoop,
                format!(
                    "sends traffic of {} from {} without an active path from the origin",
                    names.block(p),
                    names.node(o)
                ),
                vec![names.node(v), names.block(p), names.node(o)],
            ));
        }
    }
    out
}

pub fn validate(sol: &Solution, net: &InfrastructureNetwork, app: &OverlayApp, mode: FlowMode) -> ValidationReport {
    let structural = check_structure(sol, net, app);
    if !structural.is_empty() {
        return ValidationReport::from_violations(structural);
    }
    let mut violations = check_placement(sol, net, app);
    violations.extend(check_slot_exclusivity(sol, net));
    violations.extend(check_sinr(sol, net));
    violations.extend(check_flow(sol, net, app, mode));
    violations.extend(check_no_phantom_loops(sol, net, app));
    ValidationReport::from_violations(violations)
}
