//! MIQCP model generation in LP text format and a substitution checker.
//!
//! Variables (all binary):
//!
//! - `th(p,v)`: block `p` placed on node `v`
//! - `f(p,v,t)`: node `v` sends traffic of `p` in slot `t`
//! - `s(v1,v2,p,v3,t)`: `v1` sends to `v2` in slot `t` the traffic of `p` hosted on `v3`
//! - `beta(t)`: slot `t` is used
//! - `z(p,v,vs,i)`: the `i`-th simple path from `v` to `vs` carries `p`'s traffic from `v`
//!
//! Coefficients are exact rationals. Path expressions come from [`track_flow`],
//! a literal transcription of the recursive continued-fraction construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    derive_forwarding, derive_used_slots, BlockIdx, FlowMode, Instance, NodeIdx, SignalModel, Slot, Solution,
};

pub type Coef = BigRational;

/// Longest path (in edges) whose coefficients are emitted.
pub const MAX_PATH_EDGES: usize = 32;

fn int(v: i64) -> Coef {
    BigRational::from_integer(BigInt::from(v))
}

fn pow2(k: usize) -> Coef {
    BigRational::from_integer(BigInt::one() << k)
}

fn half() -> Coef {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

fn exact(x: f64) -> Coef {
    BigRational::from_float(x).expect("finite instance constant")
}

/// `constant + sum coeff * var >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoolInequality<V> {
    pub terms: Vec<(Coef, V)>,
    pub constant: Coef,
}

impl<V> BoolInequality<V> {
    pub fn satisfied(&self, value: impl Fn(&V) -> bool) -> bool {
        let lhs = self
            .terms
            .iter()
            .filter(|(_, v)| value(v))
            .fold(self.constant.clone(), |acc, (c, _)| acc + c);
        lhs >= Coef::one()
    }
}

/// `1/2^n + sum x_i / 2^i >= 1`, true exactly when every `x_i` is 1.
pub fn conjunction_expr<V: Clone>(vars: &[V]) -> Result<BoolInequality<V>> {
    if vars.is_empty() {
        return Err(Error::EmptyExpression);
    }
    Ok(BoolInequality {
        terms: vars.iter().enumerate().map(|(i, v)| (Coef::one() / pow2(i + 1), v.clone())).collect(),
        constant: Coef::one() / pow2(vars.len()),
    })
}

/// `1/2 + sum x_i / 2^i >= 1`, as printed. Only `x_1` alone suffices: for
/// `n = 2` and `x = (0, 1)` the left side is 3/4.
pub fn disjunction_expr<V: Clone>(vars: &[V]) -> Result<BoolInequality<V>> {
    if vars.is_empty() {
        return Err(Error::EmptyExpression);
    }
    Ok(BoolInequality {
        terms: vars.iter().enumerate().map(|(i, v)| (Coef::one() / pow2(i + 1), v.clone())).collect(),
        constant: half(),
    })
}

/// Linear expression over edge activities `X(u, w) = sum_t s(u, w, p, v, t)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeExpr {
    pub terms: BTreeMap<(NodeIdx, NodeIdx), Coef>,
    pub constant: Coef,
}

impl EdgeExpr {
    pub fn constant(c: Coef) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    /// `(X(u, w) + self) / 2`
    fn halve_with(&self, u: NodeIdx, w: NodeIdx) -> Self {
        let mut out = self.clone();
        *out.terms.entry((u, w)).or_insert_with(Coef::zero) += Coef::one();
        for c in out.terms.values_mut() {
            *c = &*c * half();
        }
        out.constant = &out.constant * half();
        out
    }

    fn add(&mut self, other: &EdgeExpr) {
        for (e, c) in &other.terms {
            *self.terms.entry(*e).or_insert_with(Coef::zero) += c;
        }
        self.constant += &other.constant;
    }

    pub fn eval(&self, active: impl Fn(NodeIdx, NodeIdx) -> Coef) -> Coef {
        self.terms.iter().fold(self.constant.clone(), |acc, (&(u, w), c)| acc + c * active(u, w))
    }
}

/// One path term of [`track_flow`].
#[derive(Clone, Debug, PartialEq)]
pub struct PathConjunction {
    pub block: BlockIdx,
    /// Node sequence from the origin to the start node.
    pub path: Vec<NodeIdx>,
    /// Accumulator handed to the base case.
    pub r: EdgeExpr,
    pub expr: EdgeExpr,
}

impl PathConjunction {
    /// Number of halvings, so that `2^halvings * expr` has integer coefficients.
    pub fn halvings(&self) -> usize {
        self.path.len()
    }
}

/// Path terms for "can `v1` pass `p`'s traffic from `v` on to `v2`": every
/// simple path from `v` to `v1` avoiding `visited`, neighbors in ascending
/// index order. The sum of the returned expressions is the recursion's result.
pub fn track_flow(
    n: usize,
    v1: NodeIdx,
    v2: NodeIdx,
    p: BlockIdx,
    v: NodeIdx,
    visited: &BTreeSet<NodeIdx>,
    r: EdgeExpr,
) -> Vec<PathConjunction> {
    let mut out = Vec::new();
    let mut trail = Vec::new();
    let mut visited = visited.clone();
    track(n, v1, v2, p, v, &mut visited, r, &mut trail, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn track(
    n: usize,
    v1: NodeIdx,
    v2: NodeIdx,
    p: BlockIdx,
    v: NodeIdx,
    visited: &mut BTreeSet<NodeIdx>,
    r: EdgeExpr,
    trail: &mut Vec<NodeIdx>,
    out: &mut Vec<PathConjunction>,
) {
    trail.push(v1);
    if v1 == v {
        let expr = r.halve_with(v1, v2);
        let path: Vec<NodeIdx> = trail.iter().rev().copied().collect();
        out.push(PathConjunction { block: p, path, r, expr });
        trail.pop();
        return;
    }
    let fresh = visited.insert(v1);
    for vi in 0..n {
        if visited.contains(&vi) {
            continue;
        }
        let r_new = r.halve_with(vi, v1);
        track(n, vi, v1, p, v, visited, r_new, trail, out);
    }
    if fresh {
        visited.remove(&v1);
    }
    trail.pop();
}

/// Sum over all path terms.
pub fn track_flow_sum(n: usize, v1: NodeIdx, v2: NodeIdx, p: BlockIdx, v: NodeIdx, visited: &BTreeSet<NodeIdx>) -> EdgeExpr {
    let mut sum = EdgeExpr::default();
    for pc in track_flow(n, v1, v2, p, v, visited, EdgeExpr::constant(Coef::one())) {
        sum.add(&pc.expr);
    }
    sum
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarIndex {
    Theta { block: BlockIdx, node: NodeIdx },
    Forward { block: BlockIdx, node: NodeIdx, slot: Slot },
    Send { from: NodeIdx, to: NodeIdx, block: BlockIdx, origin: NodeIdx, slot: Slot },
    Used { slot: Slot },
    Select { block: BlockIdx, origin: NodeIdx, start: NodeIdx, path: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub index: VarIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    ForwardLower,
    ForwardUpper,
    UsedUpper,
    UsedLower,
    Placement,
    Capacity,
    Exclusive,
    Sinr,
    Delivery,
    DeadEnd,
    Legitimacy,
    OriginHost,
    PathSelect,
    LoopExclusion,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::ForwardLower => "fwd_lo",
            Family::ForwardUpper => "fwd_up",
            Family::UsedUpper => "used_up",
            Family::UsedLower => "used_lo",
            Family::Placement => "place",
            Family::Capacity => "cap",
            Family::Exclusive => "excl",
            Family::Sinr => "sinr",
            Family::Delivery => "deliver",
            Family::DeadEnd => "deadend",
            Family::Legitimacy => "legit",
            Family::OriginHost => "orighost",
            Family::PathSelect => "pathsel",
            Family::LoopExclusion => "loop",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn as_str(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub family: Family,
    pub linear: Vec<(Coef, usize)>,
    /// Bilinear terms `coef * x * y`; only the SINR family has them.
    pub quadratic: Vec<(Coef, usize, usize)>,
    pub sense: Sense,
    pub rhs: Coef,
}

impl LinearConstraint {
    pub fn holds(&self, x: &[bool]) -> bool {
        let mut lhs = Coef::zero();
        for (c, i) in &self.linear {
            if x[*i] {
                lhs += c;
            }
        }
        for (c, i, j) in &self.quadratic {
            if x[*i] && x[*j] {
                lhs += c;
            }
        }
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmitConfig {
    pub mode: FlowMode,
    /// Defaults to `|V|^2 |T| + 1`.
    pub big_m: Option<Coef>,
    /// Overrides the instance's signal model.
    pub signal_model: Option<SignalModel>,
    pub max_variables: u128,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self { mode: FlowMode::default(), big_m: None, signal_model: None, max_variables: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    n: usize,
    b: usize,
    t: usize,
}

impl Layout {
    fn theta(&self, p: BlockIdx, v: NodeIdx) -> usize {
        p * self.n + v
    }
    fn f(&self, p: BlockIdx, v: NodeIdx, t: Slot) -> usize {
        self.b * self.n + (p * self.n + v) * self.t + t
    }
    fn s(&self, v1: NodeIdx, v2: NodeIdx, p: BlockIdx, v3: NodeIdx, t: Slot) -> usize {
        let base = self.b * self.n * (1 + self.t);
        base + ((((v1 * self.n + v2) * self.b + p) * self.n + v3) * self.t) + t
    }
    fn beta(&self, t: Slot) -> usize {
        self.b * self.n * (1 + self.t) + self.n * self.n * self.b * self.n * self.t + t
    }
    fn base_count(&self) -> usize {
        self.beta(0) + self.t
    }
}

/// Closed-form size of the core variable set.
pub fn core_variable_count(nodes: usize, blocks: usize, slots: usize) -> u128 {
    let (n, b, t) = (nodes as u128, blocks as u128, slots as u128);
    b * n + b * n * t + n * n * b * n * t + t
}

/// Simple paths between two distinct nodes of the complete graph on `n` nodes.
pub fn simple_path_count(n: usize) -> u128 {
    if n < 2 {
        return 0;
    }
    let m = (n - 2) as u128;
    let mut total = 0u128;
    let mut term = 1u128;
    for k in 0..=m {
        total = total.saturating_add(term);
        term = term.saturating_mul(m - k);
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<(Coef, usize)>,
    pub big_m: Coef,
    pub mode: FlowMode,
    pub signal_model: SignalModel,
    /// Paths behind the selector variables, keyed by their index tuple.
    pub paths: BTreeMap<(BlockIdx, NodeIdx, NodeIdx), Vec<PathConjunction>>,
    layout: Layout,
}

fn sanitize(ids: &[String], fallback: char) -> Vec<String> {
    let clean: Vec<String> = ids
        .iter()
        .map(|id| id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect())
        .collect();
    let unique: BTreeSet<&String> = clean.iter().collect();
    if unique.len() == clean.len() && clean.iter().all(|c| !c.is_empty()) {
        clean
    } else {
        (0..ids.len()).map(|i| format!("{fallback}{i}")).collect()
    }
}

/// Affine expression builder.
#[derive(Default)]
struct Lin {
    terms: BTreeMap<usize, Coef>,
    quad: BTreeMap<(usize, usize), Coef>,
    constant: Coef,
}

impl Lin {
    fn add(&mut self, c: Coef, var: usize) -> &mut Self {
        if !c.is_zero() {
            *self.terms.entry(var).or_insert_with(Coef::zero) += c;
        }
        self
    }
    fn add_quad(&mut self, c: Coef, x: usize, y: usize) {
        if !c.is_zero() {
            *self.quad.entry((x, y)).or_insert_with(Coef::zero) += c;
        }
    }
    fn add_const(&mut self, c: Coef) {
        self.constant += c;
    }
}

struct Builder {
    constraints: Vec<LinearConstraint>,
}

impl Builder {
    fn push(&mut self, family: Family, key: String, lin: Lin, sense: Sense, rhs: Coef) {
        let linear: Vec<(Coef, usize)> = lin.terms.into_iter().filter(|(_, c)| !c.is_zero()).map(|(v, c)| (c, v)).collect();
        let quadratic: Vec<(Coef, usize, usize)> =
            lin.quad.into_iter().filter(|(_, c)| !c.is_zero()).map(|((x, y), c)| (c, x, y)).collect();
        self.constraints.push(LinearConstraint {
            name: format!("{}({key})", family.label()),
            family,
            linear,
            quadratic,
            sense,
            rhs: rhs - lin.constant,
        });
    }
}

pub fn emit_model(inst: &Instance, cfg: &EmitConfig) -> Result<ConstraintModel> {
    let net = &inst.net;
    let app = &inst.app;
    let lay = Layout { n: net.len(), b: app.len(), t: net.max_slots };
    let (n, nb, nt) = (lay.n, lay.b, lay.t);

    let paths_per_pair = simple_path_count(n);
    let selectors = if paths_per_pair > 1 { (nb * n * n.saturating_sub(1)) as u128 * paths_per_pair } else { 0 };
    let count = core_variable_count(n, nb, nt).saturating_add(selectors);
    if count > cfg.max_variables {
        return Err(Error::ModelTooLarge { count, cap: cfg.max_variables });
    }
    if n > MAX_PATH_EDGES + 1 {
        return Err(Error::PathTooLong { hops: n - 1, max: MAX_PATH_EDGES });
    }

    let big_m = cfg.big_m.clone().unwrap_or_else(|| int((n * n * nt + 1) as i64));
    let signal_model = cfg.signal_model.unwrap_or(net.signal_model);
    let vn = sanitize(&net.node_ids, 'v');
    let bn = sanitize(&app.block_ids, 'p');

    let mut variables = Vec::with_capacity(lay.base_count());
    for p in 0..nb {
        for v in 0..n {
            variables.push(Variable { name: format!("th({},{})", bn[p], vn[v]), index: VarIndex::Theta { block: p, node: v } });
        }
    }
    for p in 0..nb {
        for v in 0..n {
            for t in 0..nt {
                variables.push(Variable {
                    name: format!("f({},{},{t})", bn[p], vn[v]),
                    index: VarIndex::Forward { block: p, node: v, slot: t },
                });
            }
        }
    }
    for v1 in 0..n {
        for v2 in 0..n {
            for p in 0..nb {
                for v3 in 0..n {
                    for t in 0..nt {
                        variables.push(Variable {
                            name: format!("s({},{},{},{},{t})", vn[v1], vn[v2], bn[p], vn[v3]),
                            index: VarIndex::Send { from: v1, to: v2, block: p, origin: v3, slot: t },
                        });
                    }
                }
            }
        }
    }
    for t in 0..nt {
        variables.push(Variable { name: format!("beta({t})"), index: VarIndex::Used { slot: t } });
    }
    debug_assert_eq!(variables.len(), lay.base_count());

    let mut b = Builder { constraints: Vec::new() };
    let m = &big_m;

    // forwarding and used-slot indicators
    for p in 0..nb {
        for v in 0..n {
            for t in 0..nt {
                let key = format!("{},{},{t}", bn[p], vn[v]);
                let mut lo = Lin::default();
                let mut up = Lin::default();
                for vi in (0..n).filter(|&vi| vi != v) {
                    for vj in 0..n {
                        lo.add(int(1), lay.s(v, vi, p, vj, t));
                        up.add(int(1), lay.s(v, vi, p, vj, t));
                    }
                }
                lo.add(int(-1), lay.f(p, v, t));
                up.add(-m.clone(), lay.f(p, v, t));
                b.push(Family::ForwardLower, key.clone(), lo, Sense::Ge, Coef::zero());
                b.push(Family::ForwardUpper, key, up, Sense::Le, Coef::zero());
            }
        }
    }
    for t in 0..nt {
        let mut up = Lin::default();
        let mut lo = Lin::default();
        for v1 in 0..n {
            for v2 in 0..n {
                for p in 0..nb {
                    for v3 in 0..n {
                        up.add(int(1), lay.s(v1, v2, p, v3, t));
                        lo.add(int(1), lay.s(v1, v2, p, v3, t));
                    }
                }
            }
        }
        up.add(-m.clone(), lay.beta(t));
        lo.add(int(-1), lay.beta(t));
        b.push(Family::UsedUpper, t.to_string(), up, Sense::Le, Coef::zero());
        b.push(Family::UsedLower, t.to_string(), lo, Sense::Ge, Coef::zero());
    }

    // placement and capacity
    for p in 0..nb {
        if p == app.source_block {
            for v in 0..n {
                let mut l = Lin::default();
                l.add(int(1), lay.theta(p, v));
                let rhs = if net.is_source(v) { int(1) } else { int(0) };
                b.push(Family::Placement, format!("{},{}", bn[p], vn[v]), l, Sense::Eq, rhs);
            }
            continue;
        }
        let mut l = Lin::default();
        for v in 0..n {
            l.add(int(1), lay.theta(p, v));
        }
        b.push(Family::Placement, bn[p].clone(), l, Sense::Eq, int(1));
        if p == app.sink_block {
            let mut l = Lin::default();
            l.add(int(1), lay.theta(p, net.sink));
            b.push(Family::Placement, format!("{},{}", bn[p], vn[net.sink]), l, Sense::Eq, int(1));
        }
    }
    for v in 0..n {
        let mut l = Lin::default();
        for p in 0..nb {
            l.add(exact(app.weights[p]), lay.theta(p, v));
        }
        if !l.terms.is_empty() {
            b.push(Family::Capacity, vn[v].clone(), l, Sense::Le, exact(net.capacities[v]));
        }
    }

    // one activity per node and slot
    for v in 0..n {
        for t in 0..nt {
            let mut l = Lin::default();
            for p in 0..nb {
                l.add(int(1), lay.f(p, v, t));
                for vi in 0..n {
                    for vj in 0..n {
                        l.add(int(1), lay.s(vi, v, p, vj, t));
                    }
                }
            }
            b.push(Family::Exclusive, format!("{},{t}", vn[v]), l, Sense::Le, int(1));
        }
    }

    // SINR, denominators cleared:
    // sum s * (th * N - signal) + sum th * gamma(u, v') * s * f <= 0
    let th = exact(net.sinr_threshold);
    let noise = exact(net.noise_floor);
    for v in 0..n {
        for w in (0..n).filter(|&w| w != v) {
            let signal = match signal_model {
                SignalModel::Gamma => exact(net.gamma[v][w]),
                SignalModel::Unit => int(1),
            };
            let lin_coef = &th * &noise - &signal;
            let gains: Vec<(NodeIdx, Coef)> =
                (0..n).filter(|&u| u != v && net.gamma[u][w] != 0.0).map(|u| (u, &th * exact(net.gamma[u][w]))).collect();
            for t in 0..nt {
                let mut l = Lin::default();
                for p in 0..nb {
                    for vi in 0..n {
                        let sv = lay.s(v, w, p, vi, t);
                        l.add(lin_coef.clone(), sv);
                        for (u, g) in &gains {
                            for p2 in 0..nb {
                                l.add_quad(g.clone(), sv, lay.f(p2, *u, t));
                            }
                        }
                    }
                }
                b.push(Family::Sinr, format!("{},{},{t}", vn[v], vn[w]), l, Sense::Le, Coef::zero());
            }
        }
    }

    // dependency delivery
    for &(p1, p2) in &app.links {
        for v in 0..n {
            let mut l = Lin::default();
            for vi in 0..n {
                for vj in 0..n {
                    for t in 0..nt {
                        l.add(int(1), lay.s(vi, v, p1, vj, t));
                    }
                }
            }
            l.add(int(-1), lay.theta(p2, v));
            if cfg.mode == FlowMode::Relaxed {
                l.add(int(1), lay.theta(p1, v));
            }
            b.push(Family::Delivery, format!("{},{},{}", bn[p1], bn[p2], vn[v]), l, Sense::Ge, Coef::zero());
        }
    }

    // no dead ends: receptions against hosted successors and own sends
    for v in 0..n {
        for vj in 0..n {
            for p1 in 0..nb {
                let succ: Vec<BlockIdx> = app.successors(p1).collect();
                let mut l = Lin::default();
                let scale = match cfg.mode {
                    FlowMode::Strict => int(1),
                    FlowMode::Relaxed => m.clone(),
                };
                for vi in 0..n {
                    for t in 0..nt {
                        l.add(int(1), lay.s(vi, v, p1, vj, t));
                        if vi != v {
                            l.add(-scale.clone(), lay.s(v, vi, p1, vj, t));
                        }
                    }
                }
                for &p2 in &succ {
                    l.add(-scale.clone(), lay.theta(p2, v));
                }
                b.push(Family::DeadEnd, format!("{},{},{}", vn[v], vn[vj], bn[p1]), l, Sense::Le, Coef::zero());
            }
        }
    }

    // send legitimacy and origin consistency
    for v in 0..n {
        for vo in 0..n {
            for p in 0..nb {
                for t in 0..nt {
                    let mut l = Lin::default();
                    for vi in 0..n {
                        l.add(int(1), lay.s(v, vi, p, vo, t));
                    }
                    for vi in (0..n).filter(|&vi| vi != v) {
                        for ti in 0..nt {
                            l.add(-m.clone(), lay.s(vi, v, p, vo, ti));
                        }
                    }
                    l.add(-m.clone(), lay.theta(p, v));
                    b.push(Family::Legitimacy, format!("{},{},{},{t}", vn[v], vn[vo], bn[p]), l, Sense::Le, Coef::zero());
                }
            }
        }
    }
    for p in 0..nb {
        for vo in 0..n {
            let mut l = Lin::default();
            for v1 in 0..n {
                for v2 in 0..n {
                    for t in 0..nt {
                        l.add(int(1), lay.s(v1, v2, p, vo, t));
                    }
                }
            }
            l.add(-m.clone(), lay.theta(p, vo));
            b.push(Family::OriginHost, format!("{},{}", bn[p], vn[vo]), l, Sense::Le, Coef::zero());
        }
    }

    // loop exclusion: a node may send p's traffic from v only if some simple
    // path from v to it is fully active. gap = 2^K (1 - term) is 0 exactly
    // for a fully active path.
    let mut paths = BTreeMap::new();
    for p in 0..nb {
        for v in 0..n {
            for vs in (0..n).filter(|&vs| vs != v) {
                let terms = track_flow(n, vs, vs, p, v, &BTreeSet::new(), EdgeExpr::constant(Coef::one()));
                let key = format!("{},{},{}", bn[p], vn[v], vn[vs]);
                let gap = |pc: &PathConjunction, scale: &Coef| -> Result<Lin> {
                    if pc.path.len() - 1 > MAX_PATH_EDGES {
                        return Err(Error::PathTooLong { hops: pc.path.len() - 1, max: MAX_PATH_EDGES });
                    }
                    let k = pow2(pc.halvings());
                    let mut l = Lin::default();
                    l.add_const(scale * &k * (Coef::one() - &pc.expr.constant));
                    for (&(a, c), coef) in &pc.expr.terms {
                        for t in 0..nt {
                            l.add(-(scale * &k * coef), lay.s(a, c, p, v, t));
                        }
                    }
                    Ok(l)
                };
                let mut sends = Lin::default();
                for w in 0..n {
                    for t in 0..nt {
                        sends.add(int(1), lay.s(vs, w, p, v, t));
                    }
                }
                match terms.len() {
                    0 => b.push(Family::LoopExclusion, key, sends, Sense::Le, Coef::zero()),
                    1 => {
                        // gap >= g_min = 2^K * min coefficient whenever an edge is
                        // idle, so sends + (M / g_min) gap <= M
                        let pc = &terms[0];
                        let min_c = pc.expr.terms.values().min().cloned().unwrap_or_else(Coef::one);
                        let g_min = pow2(pc.halvings()) * min_c;
                        let mut l = gap(pc, &(m / g_min))?;
                        for (var, c) in sends.terms {
                            l.add(c, var);
                        }
                        b.push(Family::LoopExclusion, key, l, Sense::Le, m.clone());
                    }
                    _ => {
                        for (i, pc) in terms.iter().enumerate() {
                            let z = variables.len();
                            variables.push(Variable {
                                name: format!("z({},{},{},{i})", bn[p], vn[v], vn[vs]),
                                index: VarIndex::Select { block: p, origin: v, start: vs, path: i },
                            });
                            let k = pow2(pc.halvings());
                            let mut l = gap(pc, &int(1))?;
                            l.add(k.clone(), z);
                            b.push(Family::PathSelect, format!("{key},{i}"), l, Sense::Le, k);
                            sends.add(-m.clone(), z);
                        }
                        b.push(Family::LoopExclusion, key.clone(), sends, Sense::Le, Coef::zero());
                    }
                }
                paths.insert((p, v, vs), terms);
            }
        }
    }

    let objective = (0..nt).map(|t| (int(1), lay.beta(t))).collect();
    Ok(ConstraintModel {
        variables,
        constraints: b.constraints,
        objective,
        big_m,
        mode: cfg.mode,
        signal_model,
        paths,
        layout: lay,
    })
}

/// Exact decimal for dyadic values with denominator up to `2^64`, the
/// shortest round-trip float otherwise.
pub fn format_coef(c: &Coef) -> String {
    let den = c.denom();
    let k = den.bits() as usize - 1;
    if den.is_positive() && *den == (BigInt::one() << k) && k <= 64 {
        let scaled = c.numer().abs() * num_traits::pow(BigInt::from(5), k);
        let digits = scaled.to_string();
        let sign = if c.is_negative() { "-" } else { "" };
        if k == 0 {
            return format!("{sign}{digits}");
        }
        let padded = format!("{digits:0>width$}", width = k + 1);
        let (i, f) = padded.split_at(padded.len() - k);
        let f = f.trim_end_matches('0');
        return if f.is_empty() { format!("{sign}{i}") } else { format!("{sign}{i}.{f}") };
    }
    format!("{}", c.to_f64().unwrap_or(f64::NAN))
}

fn push_term(line: &mut String, out: &mut String, first: bool, c: &Coef, body: &str) {
    let (sign, mag) = if c.is_negative() { ("-", -c.clone()) } else { ("+", c.clone()) };
    let coef = if mag.is_one() { String::new() } else { format!("{} ", format_coef(&mag)) };
    let tok = if first && sign == "+" { format!("{coef}{body}") } else { format!("{sign} {coef}{body}") };
    if line.len() + tok.len() + 1 > 100 {
        out.push_str(line.trim_end());
        out.push('\n');
        line.clear();
        line.push_str("   ");
    }
    line.push(' ');
    line.push_str(&tok);
}

impl ConstraintModel {
    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn quadratic_families(&self) -> BTreeSet<Family> {
        self.constraints.iter().filter(|c| !c.quadratic.is_empty()).map(|c| c.family).collect()
    }

    /// LP text with a comment header describing the encoding choices.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            FlowMode::Strict => "strict",
            FlowMode::Relaxed => "relaxed",
        };
        let signal = match self.signal_model {
            SignalModel::Gamma => "gamma",
            SignalModel::Unit => "unit",
        };
        let header = [
            format!("MARVELO embedding model, flow mode {mode}, signal model {signal}"),
            format!("big-M = {}", format_coef(&self.big_m)),
            format!("{} binary variables, {} constraints", self.variables.len(), self.constraints.len()),
            "sinr: SINR constraint with the denominator cleared; its s * f products are the only".into(),
            "  quadratic terms".into(),
            "deadend: receptions <= hosted successors + own sends (counting form; relaxed mode".into(),
            "  uses a big-M boolean form)".into(),
            "orighost: traffic may only be attributed to an origin that hosts the block".into(),
            "loop, pathsel: RECONSTRUCTION. For each (p, v, vs) the simple paths v -> vs come from".into(),
            "  the recursive path expression term = (X + r) / 2 with r = 1 at the start, where".into(),
            "  X(a, b) = sum_t s(a, b, p, v, t). gap = 2^K (1 - term) vanishes iff the path is".into(),
            "  fully active. One path: sends(vs) + (M / g_min) gap <= M, g_min the least".into(),
            "  positive gap. Several paths: gap + 2^K z <= 2^K and sends(vs) <= M sum z.".into(),
            "  Assumes each edge is used in at most one slot per traffic; repeated edges can".into(),
            "  make X exceed 1.".into(),
        ];
        for h in header {
            let _ = writeln!(out, "\\ {h}");
        }
        out.push_str("Minimize\n");
        let mut line = String::from(" obj:");
        for (i, (c, v)) in self.objective.iter().enumerate() {
            push_term(&mut line, &mut out, i == 0, c, &self.variables[*v].name);
        }
        out.push_str(line.trim_end());
        out.push_str("\nSubject To\n");
        for con in &self.constraints {
            let mut line = format!(" {}:", con.name);
            let mut first = true;
            for (c, v) in &con.linear {
                push_term(&mut line, &mut out, first, c, &self.variables[*v].name);
                first = false;
            }
            if !con.quadratic.is_empty() {
                let tok = if first { "[" } else { "+ [" };
                line.push(' ');
                line.push_str(tok);
                let mut qfirst = true;
                for (c, x, y) in &con.quadratic {
                    let body = format!("{} * {}", self.variables[*x].name, self.variables[*y].name);
                    push_term(&mut line, &mut out, qfirst, c, &body);
                    qfirst = false;
                }
                line.push_str(" ]");
                first = false;
            }
            if first {
                line.push_str(" 0 ");
                line.push_str(&self.variables[0].name);
            }
            let _ = write!(line, " {} {}", con.sense.as_str(), format_coef(&con.rhs));
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("Binaries\n");
        let mut line = String::new();
        for v in &self.variables {
            if line.len() + v.name.len() + 1 > 100 {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            line.push(' ');
            line.push_str(&v.name);
        }
        if !line.is_empty() {
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("End\n");
        out
    }

    /// 0/1 assignment induced by a solution; selectors are set for fully active paths.
    pub fn assignment(&self, sol: &Solution) -> Vec<bool> {
        let lay = self.layout;
        let mut x = vec![false; self.variables.len()];
        for (&p, hosts) in &sol.placement {
            for &v in hosts {
                if p < lay.b && v < lay.n {
                    x[lay.theta(p, v)] = true;
                }
            }
        }
        for (p, v, t) in derive_forwarding(sol).active() {
            if p < lay.b && v < lay.n && t < lay.t {
                x[lay.f(p, v, t)] = true;
            }
        }
        for t in derive_used_slots(sol).slots() {
            if t < lay.t {
                x[lay.beta(t)] = true;
            }
        }
        let mut edges: BTreeSet<(BlockIdx, NodeIdx, NodeIdx, NodeIdx)> = BTreeSet::new();
        for tr in &sol.transmissions {
            let fits = tr.sender < lay.n && tr.receiver < lay.n && tr.origin < lay.n && tr.block < lay.b && tr.slot < lay.t;
            if fits {
                x[lay.s(tr.sender, tr.receiver, tr.block, tr.origin, tr.slot)] = true;
                edges.insert((tr.block, tr.origin, tr.sender, tr.receiver));
            }
        }
        for (i, var) in self.variables.iter().enumerate().skip(lay.base_count()) {
            if let VarIndex::Select { block, origin, start, path } = var.index {
                let pc = &self.paths[&(block, origin, start)][path];
                x[i] = pc.path.windows(2).all(|e| edges.contains(&(block, origin, e[0], e[1])));
            }
        }
        x
    }
}

/// Names of the emitted constraints violated by `sol`, evaluated exactly.
pub fn substitute_and_check(model: &ConstraintModel, sol: &Solution) -> Vec<String> {
    let x = model.assignment(sol);
    model.constraints.iter().filter(|c| !c.holds(&x)).map(|c| c.name.clone()).collect()
}

/// Families of the violated constraints.
pub fn violated_families(model: &ConstraintModel, sol: &Solution) -> BTreeSet<Family> {
    let x = model.assignment(sol);
    model.constraints.iter().filter(|c| !c.holds(&x)).map(|c| c.family).collect()
}

/// Edges that carry the same traffic in more than one slot; the path
/// expressions assume edge activities of at most 1.
pub fn repeated_edges(sol: &Solution) -> Vec<(BlockIdx, NodeIdx, NodeIdx, NodeIdx)> {
    let mut slots: BTreeMap<(BlockIdx, NodeIdx, NodeIdx, NodeIdx), usize> = BTreeMap::new();
    for t in &sol.transmissions {
        *slots.entry((t.block, t.origin, t.sender, t.receiver)).or_default() += 1;
    }
    slots.into_iter().filter(|(_, c)| *c > 1).map(|(k, _)| k).collect()
}

pub fn emit_lp(inst: &Instance, cfg: &EmitConfig) -> Result<String> {
    Ok(emit_model(inst, cfg)?.to_lp())
}
