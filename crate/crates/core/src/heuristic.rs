//! Link-by-link mapping search.
//!
//! Overlay links are mapped in topological order (loop-closing links last).
//! Mapping a link routes the sending block's traffic along a loop-free path
//! to the receiving block, placing the receiver at the path end if it has no
//! host yet. Every hop is slotted greedily: an identical edge is reused, then
//! a slot where the sender already transmits the same traffic (multicast),
//! then the first jointly feasible slot, then a new slot. `level` links are
//! decided together; when a decision leaves no feasible continuation the
//! search backtracks to the next-best alternative of the previous decision.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{BlockIdx, FlowMode, InfrastructureNetwork, NodeIdx, OverlayApp, Outcome, Slot, Solution, Transmission};
use crate::radio::{slot_feasible, SlotLoad};
use crate::validator::validate;

/// How many neighbors (by attenuation, best first) a path may continue to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "KRepr", into = "KRepr")]
pub enum NeighborLimit {
    Best(usize),
    All,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<KRepr> for NeighborLimit {
    type Error = String;

    fn try_from(r: KRepr) -> Result<Self, String> {
        match r {
            KRepr::Count(0) => Err("k must be at least 1".into()),
            KRepr::Count(k) => Ok(NeighborLimit::Best(k)),
            KRepr::Word(w) => w.parse(),
        }
    }
}

impl From<NeighborLimit> for KRepr {
    fn from(k: NeighborLimit) -> Self {
        match k {
            NeighborLimit::Best(k) => KRepr::Count(k),
            NeighborLimit::All => KRepr::Word("all".into()),
        }
    }
}

impl FromStr for NeighborLimit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(NeighborLimit::All);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("k must be at least 1".into()),
            Ok(k) => Ok(NeighborLimit::Best(k)),
            Err(_) => Err(format!("invalid k `{s}` (expected a positive integer or `all`)")),
        }
    }
}

impl fmt::Display for NeighborLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeighborLimit::Best(k) => write!(f, "{k}"),
            NeighborLimit::All => f.write_str("all"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Links decided together in one lookahead step.
    pub level: usize,
    pub k: NeighborLimit,
    pub seed: u64,
    /// Backtracking steps before giving up; `usize::MAX` is unbounded.
    pub backtrack_budget: usize,
    /// Longest path in hops; `None` means `min(|V| - 1, 3)`.
    pub max_path_hops: Option<usize>,
    /// Alternatives kept per decision for backtracking.
    pub max_alternatives: usize,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            level: 1,
            k: NeighborLimit::All,
            seed: 0,
            backtrack_budget: 10_000,
            max_path_hops: None,
            max_alternatives: 256,
        }
    }
}

impl HeuristicParams {
    pub fn hops(&self, net: &InfrastructureNetwork) -> usize {
        self.max_path_hops.unwrap_or_else(|| net.len().saturating_sub(1).min(3))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HeuristicStats {
    /// `candidate_mappings` calls.
    pub expansions: u64,
    /// Paths enumerated over all expansions, before scheduling.
    pub candidates: u64,
    pub backtracks: usize,
}

impl HeuristicStats {
    pub fn mean_candidates(&self) -> f64 {
        if self.expansions == 0 {
            0.0
        } else {
            self.candidates as f64 / self.expansions as f64
        }
    }
}

/// A partial embedding. Used slots always form the prefix `0..frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchState {
    pub hosts: Vec<Vec<NodeIdx>>,
    pub load: Vec<f64>,
    pub transmissions: Vec<Transmission>,
    pub frame: usize,
    pub mapped: Vec<(BlockIdx, BlockIdx)>,
}

impl SearchState {
    /// Source and sink blocks pinned; `None` if that already overloads a node.
    pub fn new(net: &InfrastructureNetwork, app: &OverlayApp) -> Option<Self> {
        let mut hosts = vec![Vec::new(); app.len()];
        let mut load = vec![0.0; net.len()];
        hosts[app.source_block] = net.sources.clone();
        for &s in &net.sources {
            load[s] += app.weights[app.source_block];
        }
        hosts[app.sink_block] = vec![net.sink];
        load[net.sink] += app.weights[app.sink_block];
        if net.nodes().any(|v| load[v] > net.capacities[v]) {
            return None;
        }
        Some(Self { hosts, load, transmissions: Vec::new(), frame: 0, mapped: Vec::new() })
    }

    pub fn cost(&self) -> usize {
        self.frame
    }

    pub fn to_solution(&self) -> Solution {
        let mut sol = Solution::new();
        for (p, hs) in self.hosts.iter().enumerate() {
            for &v in hs {
                sol.place(p, v);
            }
        }
        sol.transmissions = self.transmissions.iter().copied().collect();
        sol
    }
}

/// Links by DFS from the source block: forward links in topological order of
/// the graph without back edges, then the back edges that close loops.
pub fn order_links(app: &OverlayApp) -> Vec<(BlockIdx, BlockIdx)> {
    let n = app.len();
    let mut succ: Vec<Vec<BlockIdx>> = vec![Vec::new(); n];
    for &(a, b) in &app.links {
        succ[a].push(b);
    }
    for s in &mut succ {
        s.sort_unstable();
    }
    // 0 = unseen, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut post = Vec::with_capacity(n);
    let mut back = Vec::new();
    fn dfs(p: usize, succ: &[Vec<usize>], state: &mut [u8], post: &mut Vec<usize>, back: &mut Vec<(usize, usize)>) {
        state[p] = 1;
        for &q in &succ[p] {
            match state[q] {
                0 => dfs(q, succ, state, post, back),
                1 => back.push((p, q)),
                _ => {}
            }
        }
        state[p] = 2;
        post.push(p);
    }
    dfs(app.source_block, &succ, &mut state, &mut post, &mut back);
    for p in 0..n {
        if state[p] == 0 {
            dfs(p, &succ, &mut state, &mut post, &mut back);
        }
    }
    let mut pos = vec![0; n];
    for (i, &p) in post.iter().rev().enumerate() {
        pos[p] = i;
    }
    let back_set: BTreeSet<(usize, usize)> = back.iter().copied().collect();
    let mut forward: Vec<(BlockIdx, BlockIdx)> = app.links.iter().copied().filter(|l| !back_set.contains(l)).collect();
    forward.sort_by_key(|&(a, b)| (pos[a], pos[b]));
    back.sort_by_key(|&(a, b)| (pos[a], pos[b]));
    forward.extend(back);
    forward
}

fn neighbors(net: &InfrastructureNetwork, u: NodeIdx, visited: &[bool], k: NeighborLimit) -> Vec<NodeIdx> {
    let mut ns: Vec<NodeIdx> = net.nodes().filter(|&w| w != u && !visited[w]).collect();
    // best attenuation first, ties by index
    ns.sort_by(|&a, &b| net.gamma[u][b].total_cmp(&net.gamma[u][a]).then(a.cmp(&b)));
    if let NeighborLimit::Best(k) = k {
        ns.truncate(k);
    }
    ns
}

fn slot_accepts(ts: &[Transmission], net: &InfrastructureNetwork, t: Slot, u: NodeIdx, w: NodeIdx, p: BlockIdx) -> bool {
    let mut load = SlotLoad::new(t);
    for x in ts.iter().filter(|x| x.slot == t) {
        if x.receiver == w || x.sender == w || x.receiver == u || (x.sender == u && x.block != p) {
            return false;
        }
        load.add(x.sender, x.receiver);
    }
    load.add(u, w);
    slot_feasible(&load, net)
}

/// Slots every hop of `path` (node sequence, first node the origin's relay
/// chain start) and returns the new transmissions, or `None` when a hop fits
/// nowhere within the frame bound.
pub fn schedule_path(
    state: &SearchState,
    path: &[NodeIdx],
    block: BlockIdx,
    origin: NodeIdx,
    net: &InfrastructureNetwork,
) -> Option<Vec<Transmission>> {
    let mut ts = state.transmissions.clone();
    let mut frame = state.frame;
    let start = ts.len();
    for hop in path.windows(2) {
        let (u, w) = (hop[0], hop[1]);
        let same = |x: &Transmission| x.sender == u && x.block == block && x.origin == origin;
        if ts.iter().any(|x| same(x) && x.receiver == w) {
            continue;
        }
        let mut multicast: Vec<Slot> = ts.iter().filter(|x| same(x)).map(|x| x.slot).collect();
        multicast.sort_unstable();
        multicast.dedup();
        let slot = multicast
            .into_iter()
            .find(|&t| slot_accepts(&ts, net, t, u, w, block))
            .or_else(|| (0..frame).find(|&t| slot_accepts(&ts, net, t, u, w, block)))
            .or_else(|| {
                let t = frame;
                (t < net.max_slots && slot_accepts(&ts, net, t, u, w, block)).then_some(t)
            })?;
        frame = frame.max(slot + 1);
        ts.push(Transmission::new(u, w, block, origin, slot));
    }
    Some(ts.split_off(start))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub origin: NodeIdx,
    /// Node sequence from the origin; a single node means co-location.
    pub path: Vec<NodeIdx>,
    /// Host chosen for the receiving block when it had none.
    pub placed: Option<NodeIdx>,
    pub state: SearchState,
    pub cost: usize,
}

/// All ways to map `link` from `state`, cheapest first (stable in generation order).
pub fn candidate_mappings(
    state: &SearchState,
    link: (BlockIdx, BlockIdx),
    params: &HeuristicParams,
    net: &InfrastructureNetwork,
    app: &OverlayApp,
    stats: &mut HeuristicStats,
) -> Vec<Candidate> {
    let (p1, p2) = link;
    let max_hops = params.hops(net);
    let target = state.hosts[p2].first().copied();
    let fits = |v: NodeIdx| state.load[v] + app.weights[p2] <= net.capacities[v];

    let mut paths: Vec<(NodeIdx, Vec<NodeIdx>, Option<NodeIdx>)> = Vec::new();
    for &origin in &state.hosts[p1] {
        // zero hops
        match target {
            Some(v2) if v2 == origin => paths.push((origin, vec![origin], None)),
            None if fits(origin) => paths.push((origin, vec![origin], Some(origin))),
            _ => {}
        }
        let mut visited = vec![false; net.len()];
        visited[origin] = true;
        let mut path = vec![origin];
        walk(net, params.k, max_hops, target, &fits, &mut visited, &mut path, origin, &mut paths);
    }
    stats.expansions += 1;
    stats.candidates += paths.len() as u64;

    let mut out: Vec<Candidate> = Vec::new();
    for (origin, path, placed) in paths {
        let Some(delta) = schedule_path(state, &path, p1, origin, net) else { continue };
        let mut next = state.clone();
        next.frame = delta.iter().map(|t| t.slot + 1).fold(next.frame, usize::max);
        next.transmissions.extend(delta);
        if let Some(v) = placed {
            next.hosts[p2] = vec![v];
            next.load[v] += app.weights[p2];
        }
        next.mapped.push(link);
        let cost = next.cost();
        out.push(Candidate { origin, path, placed, state: next, cost });
    }
    out.sort_by_key(|c| c.cost);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    net: &InfrastructureNetwork,
    k: NeighborLimit,
    max_hops: usize,
    target: Option<NodeIdx>,
    fits: &dyn Fn(NodeIdx) -> bool,
    visited: &mut Vec<bool>,
    path: &mut Vec<NodeIdx>,
    origin: NodeIdx,
    out: &mut Vec<(NodeIdx, Vec<NodeIdx>, Option<NodeIdx>)>,
) {
    if path.len() > max_hops {
        return;
    }
    let u = *path.last().unwrap();
    for w in neighbors(net, u, visited, k) {
        path.push(w);
        match target {
            Some(v2) if w == v2 => {
                out.push((origin, path.clone(), None));
                path.pop();
                continue;
            }
            None if fits(w) => out.push((origin, path.clone(), Some(w))),
            _ => {}
        }
        visited[w] = true;
        walk(net, k, max_hops, target, fits, visited, path, origin, out);
        visited[w] = false;
        path.pop();
    }
}

enum Collector {
    /// Only the cheapest combination matters; ties are sampled uniformly.
    Best { best: Option<SearchState>, cost: usize, ties: u64 },
    /// Cheapest combinations, kept for backtracking.
    Ranked { alts: Vec<(usize, u64, SearchState)>, cap: usize, seq: u64 },
}

impl Collector {
    fn prunes(&self, cost: usize) -> bool {
        match self {
            Collector::Best { best: Some(_), cost: c, .. } => cost > *c,
            Collector::Best { .. } => false,
            Collector::Ranked { alts, cap, .. } => alts.len() >= *cap && alts.last().is_some_and(|a| cost > a.0),
        }
    }

    fn offer(&mut self, state: SearchState, rng: &mut ChaCha8Rng) {
        let cost = state.cost();
        match self {
            Collector::Best { best, cost: c, ties } => {
                if best.is_none() || cost < *c {
                    *best = Some(state);
                    *c = cost;
                    *ties = 1;
                } else if cost == *c {
                    *ties += 1;
                    if rng.gen_range(0..*ties) == 0 {
                        *best = Some(state);
                    }
                }
            }
            Collector::Ranked { alts, cap, seq } => {
                let key = (cost, *seq);
                *seq += 1;
                let at = alts.partition_point(|a| (a.0, a.1) < key);
                if at < *cap {
                    alts.insert(at, (cost, key.1, state));
                    alts.truncate(*cap);
                }
            }
        }
    }

    /// Alternatives in the order they will be tried.
    fn finish(self, rng: &mut ChaCha8Rng) -> Vec<SearchState> {
        match self {
            Collector::Best { best, .. } => best.into_iter().collect(),
            Collector::Ranked { alts, .. } => {
                let mut states: Vec<(usize, SearchState)> = alts.into_iter().map(|(c, _, s)| (c, s)).collect();
                if let Some(&(min, _)) = states.first() {
                    let ties = states.iter().take_while(|(c, _)| *c == min).count();
                    let pick = rng.gen_range(0..ties);
                    let chosen = states.remove(pick);
                    states.insert(0, chosen);
                }
                states.into_iter().map(|(_, s)| s).collect()
            }
        }
    }
}

struct Lookahead<'a> {
    net: &'a InfrastructureNetwork,
    app: &'a OverlayApp,
    params: &'a HeuristicParams,
    stats: HeuristicStats,
    rng: ChaCha8Rng,
}

impl Lookahead<'_> {
    fn combine(&mut self, state: &SearchState, links: &[(BlockIdx, BlockIdx)], col: &mut Collector) {
        let Some((&link, rest)) = links.split_first() else {
            col.offer(state.clone(), &mut self.rng);
            return;
        };
        for c in candidate_mappings(state, link, self.params, self.net, self.app, &mut self.stats) {
            // candidates are sorted, and adding links never frees a slot
            if col.prunes(c.cost) {
                break;
            }
            self.combine(&c.state, rest, col);
        }
    }

    /// Alternatives for mapping `links` together, best (after tie-breaking) first.
    fn search(&mut self, state: &SearchState, links: &[(BlockIdx, BlockIdx)], last: bool) -> Vec<SearchState> {
        let mut col = if last {
            Collector::Best { best: None, cost: 0, ties: 0 }
        } else {
            Collector::Ranked { alts: Vec::new(), cap: self.params.max_alternatives.max(1), seq: 0 }
        };
        self.combine(state, links, &mut col);
        col.finish(&mut self.rng)
    }
}

/// Best combined mapping of the next links from `state`, or `None` if no
/// combination is feasible.
pub fn lookahead_search(
    state: &SearchState,
    next_links: &[(BlockIdx, BlockIdx)],
    params: &HeuristicParams,
    net: &InfrastructureNetwork,
    app: &OverlayApp,
) -> Option<SearchState> {
    let mut la = Lookahead { net, app, params, stats: HeuristicStats::default(), rng: ChaCha8Rng::seed_from_u64(params.seed) };
    la.search(state, next_links, true).into_iter().next()
}

pub fn solve_heuristic(net: &InfrastructureNetwork, app: &OverlayApp, params: &HeuristicParams) -> Outcome {
    solve_heuristic_with_stats(net, app, params).0
}

struct Decision {
    alts: Vec<SearchState>,
    next: usize,
}

pub fn solve_heuristic_with_stats(
    net: &InfrastructureNetwork,
    app: &OverlayApp,
    params: &HeuristicParams,
) -> (Outcome, HeuristicStats) {
    let mut la = Lookahead { net, app, params, stats: HeuristicStats::default(), rng: ChaCha8Rng::seed_from_u64(params.seed) };
    let Some(root) = SearchState::new(net, app) else {
        return (Outcome::Infeasible, la.stats);
    };
    let links = order_links(app);
    let blocks: Vec<&[(BlockIdx, BlockIdx)]> = links.chunks(params.level.max(1)).collect();
    let mut stack: Vec<Decision> = Vec::new();
    let mut state = root;
    loop {
        let b = stack.len();
        if b == blocks.len() {
            let sol = state.to_solution();
            debug_assert!(validate(&sol, net, app, FlowMode::Relaxed).ok, "heuristic produced an invalid solution");
            return (Outcome::Solved(sol), la.stats);
        }
        let alts = la.search(&state, blocks[b], b + 1 == blocks.len());
        if let Some(first) = alts.first() {
            state = first.clone();
            stack.push(Decision { alts, next: 1 });
            continue;
        }
        // resume at the previous decision's next-best alternative
        loop {
            let Some(top) = stack.last_mut() else {
                return (Outcome::Infeasible, la.stats);
            };
            if la.stats.backtracks >= params.backtrack_budget {
                return (Outcome::BudgetExhausted, la.stats);
            }
            la.stats.backtracks += 1;
            if top.next < top.alts.len() {
                state = top.alts[top.next].clone();
                top.next += 1;
                break;
            }
            stack.pop();
        }
    }
}
