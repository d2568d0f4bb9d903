//! Ordered, reduced decision diagrams over literal-probability slots, with
//! circuit-output probability (COP) evaluation and differentiation by
//! forward/backward message propagation, plus a dynamic-programming fast
//! path for symmetric constraints.
//!
//! Every decision node tests one slot; the `hi` edge means "the slot's
//! literal is true" and carries probability `p[slot]`. Diagrams are
//! negation-free: a slot fixes the polarity of its variable's first
//! occurrence, and occurrences of the opposite polarity swap children at
//! the leaves.

use crate::model::{Body, Constraint, SlotInfo, SymKind, VarRef};
use std::collections::HashMap;
use thiserror::Error;

/// Default compile cap; exceeding it signals the caller to fall back to the
/// symmetric path or give up.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum XbddError {
    #[error("node budget of {budget} nodes exceeded while compiling")]
    NodeBudgetExceeded { budget: usize },
    #[error("expected {expected} slot probabilities, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("backward pass requires messages from a forward pass with identical probabilities")]
    StaleMessages,
}

/// Reference to a decision node or terminal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeRef {
    False,
    True,
    Node(u32),
}

impl NodeRef {
    fn sort_key(self) -> u64 {
        match self {
            NodeRef::False => 0,
            NodeRef::True => 1,
            NodeRef::Node(i) => i as u64 + 2,
        }
    }
}

/// A decision node; `hi` is taken when the slot's literal is true.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Node {
    pub slot: u32,
    pub lo: NodeRef,
    pub hi: NodeRef,
}

/// An ordered, reduced decision diagram for one constraint.
///
/// `nodes` is topologically sorted: slot ids strictly increase along every
/// root-to-terminal path, and nodes are stored in ascending slot order, so a
/// plain index scan visits parents before children.
#[derive(Clone, Debug, PartialEq)]
pub struct Xbdd {
    slots: Vec<SlotInfo>,
    nodes: Vec<Node>,
    root: NodeRef,
}

impl Xbdd {
    pub fn slots(&self) -> &[SlotInfo] {
        &self.slots
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    /// Evaluates the diagram at a truth assignment of the slot literals.
    pub fn evaluate(&self, slot_literal_true: &[bool]) -> bool {
        assert_eq!(slot_literal_true.len(), self.slots.len());
        let mut cur = self.root;
        loop {
            match cur {
                NodeRef::False => return false,
                NodeRef::True => return true,
                NodeRef::Node(i) => {
                    let n = self.nodes[i as usize];
                    cur = if slot_literal_true[n.slot as usize] {
                        n.hi
                    } else {
                        n.lo
                    };
                }
            }
        }
    }

    /// GraphViz rendering for debugging.
    pub fn to_dot(&self, name: &str) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "digraph {name} {{");
        let _ = writeln!(out, "  T [shape=box,label=\"true\"];");
        let _ = writeln!(out, "  F [shape=box,label=\"false\"];");
        let label = |s: &SlotInfo| {
            let neg = if s.negated { "!" } else { "" };
            match s.var {
                VarRef::Bool(i) => format!("{neg}b{i}"),
                VarRef::Atom(id) => format!("{neg}a{id}"),
            }
        };
        let name_of = |r: NodeRef| match r {
            NodeRef::True => "T".to_string(),
            NodeRef::False => "F".to_string(),
            NodeRef::Node(i) => format!("n{i}"),
        };
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\"];",
                label(&self.slots[n.slot as usize])
            );
            let _ = writeln!(out, "  n{i} -> {} [style=solid];", name_of(n.hi));
            let _ = writeln!(out, "  n{i} -> {} [style=dashed];", name_of(n.lo));
        }
        let _ = writeln!(out, "  root -> {} [style=bold];", name_of(self.root));
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
    Xor,
}

struct Builder {
    nodes: Vec<Node>,
    unique: HashMap<(u32, NodeRef, NodeRef), u32>,
    op_cache: HashMap<(Op, NodeRef, NodeRef), NodeRef>,
    not_cache: HashMap<NodeRef, NodeRef>,
    budget: usize,
}

impl Builder {
    fn new(budget: usize) -> Builder {
        Builder {
            nodes: Vec::new(),
            unique: HashMap::new(),
            op_cache: HashMap::new(),
            not_cache: HashMap::new(),
            budget,
        }
    }

    fn slot_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Node(i) => self.nodes[i as usize].slot,
            _ => u32::MAX,
        }
    }

    fn mk(&mut self, slot: u32, lo: NodeRef, hi: NodeRef) -> Result<NodeRef, XbddError> {
        if lo == hi {
            return Ok(lo);
        }
        debug_assert!(self.slot_of(lo) > slot && self.slot_of(hi) > slot, "slot order");
        if let Some(&id) = self.unique.get(&(slot, lo, hi)) {
            return Ok(NodeRef::Node(id));
        }
        if self.nodes.len() >= self.budget {
            return Err(XbddError::NodeBudgetExceeded {
                budget: self.budget,
            });
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { slot, lo, hi });
        self.unique.insert((slot, lo, hi), id);
        Ok(NodeRef::Node(id))
    }

    fn literal(&mut self, slot: u32, same_polarity: bool) -> Result<NodeRef, XbddError> {
        if same_polarity {
            self.mk(slot, NodeRef::False, NodeRef::True)
        } else {
            self.mk(slot, NodeRef::True, NodeRef::False)
        }
    }

    fn not(&mut self, u: NodeRef) -> Result<NodeRef, XbddError> {
        match u {
            NodeRef::True => return Ok(NodeRef::False),
            NodeRef::False => return Ok(NodeRef::True),
            NodeRef::Node(_) => {}
        }
        if let Some(&r) = self.not_cache.get(&u) {
            return Ok(r);
        }
        let NodeRef::Node(i) = u else { unreachable!() };
        let n = self.nodes[i as usize];
        let lo = self.not(n.lo)?;
        let hi = self.not(n.hi)?;
        let r = self.mk(n.slot, lo, hi)?;
        self.not_cache.insert(u, r);
        Ok(r)
    }

    fn apply(&mut self, op: Op, u: NodeRef, v: NodeRef) -> Result<NodeRef, XbddError> {
        use NodeRef::{False, True};
        match (op, u, v) {
            (Op::And, False, _) | (Op::And, _, False) => return Ok(False),
            (Op::And, True, w) | (Op::And, w, True) => return Ok(w),
            (Op::Or, True, _) | (Op::Or, _, True) => return Ok(True),
            (Op::Or, False, w) | (Op::Or, w, False) => return Ok(w),
            (Op::Xor, False, w) | (Op::Xor, w, False) => return Ok(w),
            (Op::Xor, True, w) | (Op::Xor, w, True) => return self.not(w),
            _ => {}
        }
        if u == v {
            // Hash-consing makes structural equality semantic equality.
            return Ok(match op {
                Op::And | Op::Or => u,
                Op::Xor => False,
            });
        }
        let (a, b) = if u.sort_key() <= v.sort_key() {
            (u, v)
        } else {
            (v, u)
        };
        if let Some(&r) = self.op_cache.get(&(op, a, b)) {
            return Ok(r);
        }
        let top = self.slot_of(a).min(self.slot_of(b));
        let cof = |builder: &Builder, w: NodeRef| -> (NodeRef, NodeRef) {
            match w {
                NodeRef::Node(i) if builder.nodes[i as usize].slot == top => {
                    let n = builder.nodes[i as usize];
                    (n.lo, n.hi)
                }
                _ => (w, w),
            }
        };
        let (alo, ahi) = cof(self, a);
        let (blo, bhi) = cof(self, b);
        let lo = self.apply(op, alo, blo)?;
        let hi = self.apply(op, ahi, bhi)?;
        let r = self.mk(top, lo, hi)?;
        self.op_cache.insert((op, a, b), r);
        Ok(r)
    }

    fn build_expr(
        &mut self,
        e: &crate::model::Expr,
        slot_of_var: &HashMap<VarRef, u32>,
        slots: &[SlotInfo],
    ) -> Result<NodeRef, XbddError> {
        use crate::model::Expr;
        match e {
            Expr::Lit(l) => {
                let slot = slot_of_var[&l.var];
                let same = l.negated == slots[slot as usize].negated;
                self.literal(slot, same)
            }
            Expr::Not(inner) => {
                let r = self.build_expr(inner, slot_of_var, slots)?;
                self.not(r)
            }
            Expr::And(es) | Expr::Or(es) | Expr::Xor(es) => {
                let op = match e {
                    Expr::And(_) => Op::And,
                    Expr::Or(_) => Op::Or,
                    _ => Op::Xor,
                };
                let mut acc: Option<NodeRef> = None;
                for child in es {
                    let c = self.build_expr(child, slot_of_var, slots)?;
                    acc = Some(match acc {
                        None => c,
                        Some(a) => self.apply(op, a, c)?,
                    });
                }
                Ok(acc.expect("parser guarantees non-empty operand lists"))
            }
        }
    }

    /// Layered construction for symmetric bodies over distinct variables:
    /// one pass per literal in slot order, states tracked per kind. The
    /// unique table reduces merged states automatically.
    fn build_symmetric_layered(
        &mut self,
        kind: SymKind,
        lits: &[u32],
    ) -> Result<NodeRef, XbddError> {
        type State = u32;
        let len = lits.len();
        let step = |state: State, lit_true: bool| -> State {
            match kind {
                SymKind::Or => state | lit_true as State,
                SymKind::Xor => state ^ lit_true as State,
                SymKind::Card(k) => (state + lit_true as State).min(k as State + 1),
                SymKind::Nae => state | if lit_true { 1 } else { 2 },
            }
        };
        let accept = |state: State| -> bool {
            match kind {
                SymKind::Or => state == 1,
                SymKind::Xor => state == 1,
                SymKind::Card(k) => state <= k as State,
                SymKind::Nae => state == 3,
            }
        };
        fn rec(
            b: &mut Builder,
            lits: &[u32],
            level: usize,
            state: u32,
            step: &impl Fn(u32, bool) -> u32,
            accept: &impl Fn(u32) -> bool,
            memo: &mut HashMap<(usize, u32), NodeRef>,
        ) -> Result<NodeRef, XbddError> {
            if level == lits.len() {
                return Ok(if accept(state) {
                    NodeRef::True
                } else {
                    NodeRef::False
                });
            }
            if let Some(&r) = memo.get(&(level, state)) {
                return Ok(r);
            }
            let hi = rec(b, lits, level + 1, step(state, true), step, accept, memo)?;
            let lo = rec(b, lits, level + 1, step(state, false), step, accept, memo)?;
            let r = b.mk(lits[level], lo, hi)?;
            memo.insert((level, state), r);
            Ok(r)
        }
        let mut memo = HashMap::new();
        let _ = len;
        rec(self, lits, 0, 0, &step, &accept, &mut memo)
    }

    /// Symmetric bodies whose variables repeat fall back to generic apply
    /// composition, which handles the correlation correctly.
    fn build_symmetric_general(
        &mut self,
        kind: SymKind,
        leaves: &[(u32, bool)],
    ) -> Result<NodeRef, XbddError> {
        let lits: Vec<NodeRef> = leaves
            .iter()
            .map(|&(slot, same)| self.literal(slot, same))
            .collect::<Result<_, _>>()?;
        match kind {
            SymKind::Or => {
                let mut acc = NodeRef::False;
                for l in lits {
                    acc = self.apply(Op::Or, acc, l)?;
                }
                Ok(acc)
            }
            SymKind::Xor => {
                let mut acc = NodeRef::False;
                for l in lits {
                    acc = self.apply(Op::Xor, acc, l)?;
                }
                Ok(acc)
            }
            SymKind::Nae => {
                let mut any = NodeRef::False;
                let mut any_neg = NodeRef::False;
                for l in lits {
                    any = self.apply(Op::Or, any, l)?;
                    let nl = self.not(l)?;
                    any_neg = self.apply(Op::Or, any_neg, nl)?;
                }
                self.apply(Op::And, any, any_neg)
            }
            SymKind::Card(k) => {
                let mut memo: HashMap<(usize, usize), NodeRef> = HashMap::new();
                self.card_rec(&lits, 0, k, &mut memo)
            }
        }
    }

    fn card_rec(
        &mut self,
        lits: &[NodeRef],
        i: usize,
        k: usize,
        memo: &mut HashMap<(usize, usize), NodeRef>,
    ) -> Result<NodeRef, XbddError> {
        if lits.len() - i <= k {
            return Ok(NodeRef::True);
        }
        if let Some(&r) = memo.get(&(i, k)) {
            return Ok(r);
        }
        let lit = lits[i];
        let if_true = if k == 0 {
            NodeRef::False
        } else {
            self.card_rec(lits, i + 1, k - 1, memo)?
        };
        let if_false = self.card_rec(lits, i + 1, k, memo)?;
        let t = self.apply(Op::And, lit, if_true)?;
        let nl = self.not(lit)?;
        let e = self.apply(Op::And, nl, if_false)?;
        let r = self.apply(Op::Or, t, e)?;
        memo.insert((i, k), r);
        Ok(r)
    }

    /// Extracts the subgraph reachable from `root` into a fresh node table
    /// sorted by slot (which is a topological order). Deterministic.
    fn extract(&self, root: NodeRef, slots: Vec<SlotInfo>) -> Xbdd {
        let mut reachable: Vec<u32> = Vec::new();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(r) = stack.pop() {
            if let NodeRef::Node(i) = r {
                if !seen[i as usize] {
                    seen[i as usize] = true;
                    reachable.push(i);
                    stack.push(self.nodes[i as usize].lo);
                    stack.push(self.nodes[i as usize].hi);
                }
            }
        }
        reachable.sort_by_key(|&i| (self.nodes[i as usize].slot, i));
        let mut remap: HashMap<u32, u32> = HashMap::new();
        for (new, &old) in reachable.iter().enumerate() {
            remap.insert(old, new as u32);
        }
        let fix = |r: NodeRef| match r {
            NodeRef::Node(i) => NodeRef::Node(remap[&i]),
            t => t,
        };
        let nodes: Vec<Node> = reachable
            .iter()
            .map(|&old| {
                let n = self.nodes[old as usize];
                Node {
                    slot: n.slot,
                    lo: fix(n.lo),
                    hi: fix(n.hi),
                }
            })
            .collect();
        Xbdd {
            slots,
            nodes,
            root: fix(root),
        }
    }
}

/// Compiles a constraint under its canonical slot order.
pub fn compile(c: &Constraint, budget: usize) -> Result<Xbdd, XbddError> {
    compile_ordered(c, c.slot_infos(), budget)
}

/// Compiles under a caller-chosen slot order (the slots must cover exactly
/// the constraint's distinct variables).
pub fn compile_ordered(
    c: &Constraint,
    slots: Vec<SlotInfo>,
    budget: usize,
) -> Result<Xbdd, XbddError> {
    let slot_of_var: HashMap<VarRef, u32> = slots
        .iter()
        .enumerate()
        .map(|(i, s)| (s.var, i as u32))
        .collect();
    assert_eq!(slot_of_var.len(), slots.len(), "duplicate slot variables");

    let mut b = Builder::new(budget);
    let root = match &c.body {
        Body::Expr(e) => b.build_expr(e, &slot_of_var, &slots)?,
        Body::Symmetric { kind, literals } => {
            // (slot, polarity matches the slot's stored polarity)
            let mut leaves: Vec<(u32, bool)> = literals
                .iter()
                .map(|l| {
                    let slot = slot_of_var[&l.var];
                    (slot, l.negated == slots[slot as usize].negated)
                })
                .collect();
            leaves.sort_by_key(|&(slot, _)| slot);
            let distinct = leaves.windows(2).all(|w| w[0].0 != w[1].0);
            if distinct && leaves.iter().all(|&(_, same)| same) {
                let lits: Vec<u32> = leaves.iter().map(|&(s, _)| s).collect();
                b.build_symmetric_layered(*kind, &lits)?
            } else {
                b.build_symmetric_general(*kind, &leaves)?
            }
        }
    };
    Ok(b.extract(root, slots))
}

/// Top-down messages from a forward pass, tied to the probabilities they
/// were computed with.
#[derive(Clone, Debug)]
pub struct Messages {
    p: Vec<f64>,
    m_td: Vec<f64>,
    sat_prob: f64,
}

impl Messages {
    pub fn sat_prob(&self) -> f64 {
        self.sat_prob
    }
}

/// Single topological pass accumulating path probabilities into a
/// caller-owned buffer; returns the probability that the constraint is
/// satisfied. The expectation of the ±1 constraint value is
/// `1 - 2 * sat_prob`.
pub fn forward_into(d: &Xbdd, p: &[f64], m_td: &mut Vec<f64>) -> Result<f64, XbddError> {
    if p.len() != d.slots.len() {
        return Err(XbddError::DimensionMismatch {
            expected: d.slots.len(),
            got: p.len(),
        });
    }
    m_td.clear();
    m_td.resize(d.nodes.len(), 0.0);
    let mut sat_prob = 0.0f64;
    match d.root {
        NodeRef::True => sat_prob = 1.0,
        NodeRef::False => {}
        NodeRef::Node(r) => {
            m_td[r as usize] = 1.0;
            for i in 0..d.nodes.len() {
                let n = d.nodes[i];
                let m = m_td[i];
                if m == 0.0 {
                    continue;
                }
                let pt = p[n.slot as usize];
                match n.hi {
                    NodeRef::True => sat_prob += pt * m,
                    NodeRef::False => {}
                    NodeRef::Node(c) => m_td[c as usize] += pt * m,
                }
                match n.lo {
                    NodeRef::True => sat_prob += (1.0 - pt) * m,
                    NodeRef::False => {}
                    NodeRef::Node(c) => m_td[c as usize] += (1.0 - pt) * m,
                }
            }
        }
    }
    Ok(sat_prob)
}

/// Allocating wrapper around [`forward_into`].
pub fn forward(d: &Xbdd, p: &[f64]) -> Result<(Messages, f64), XbddError> {
    let mut m_td = Vec::new();
    let sat_prob = forward_into(d, p, &mut m_td)?;
    Ok((
        Messages {
            p: p.to_vec(),
            m_td,
            sat_prob,
        },
        sat_prob,
    ))
}

/// Reverse topological pass over caller-owned buffers; `m_td` must come
/// from [`forward_into`] with the same `p`. Gradients `d sat_prob / d p[s]`
/// are accumulated into `grad` (cleared first).
pub fn backward_into(
    d: &Xbdd,
    p: &[f64],
    m_td: &[f64],
    m_bu: &mut Vec<f64>,
    grad: &mut Vec<f64>,
) -> Result<(), XbddError> {
    if p.len() != d.slots.len() {
        return Err(XbddError::DimensionMismatch {
            expected: d.slots.len(),
            got: p.len(),
        });
    }
    m_bu.clear();
    m_bu.resize(d.nodes.len(), 0.0);
    grad.clear();
    grad.resize(d.slots.len(), 0.0);
    let bu = |m_bu: &[f64], r: NodeRef| -> f64 {
        match r {
            NodeRef::True => 1.0,
            NodeRef::False => 0.0,
            NodeRef::Node(c) => m_bu[c as usize],
        }
    };
    for i in (0..d.nodes.len()).rev() {
        let n = d.nodes[i];
        let pt = p[n.slot as usize];
        let hi = bu(m_bu, n.hi);
        let lo = bu(m_bu, n.lo);
        m_bu[i] = pt * hi + (1.0 - pt) * lo;
        grad[n.slot as usize] += m_td[i] * (hi - lo);
    }
    Ok(())
}

/// Reverse topological pass; returns `d sat_prob / d p[s]` per slot.
/// The per-slot derivative of the ±1 expectation is `-2` times this.
pub fn backward(d: &Xbdd, msgs: &Messages, p: &[f64]) -> Result<Vec<f64>, XbddError> {
    if msgs.p != p {
        return Err(XbddError::StaleMessages);
    }
    let mut m_bu = Vec::new();
    let mut grad = Vec::new();
    backward_into(d, p, &msgs.m_td, &mut m_bu, &mut grad)?;
    Ok(grad)
}

/// Satisfaction probability of a symmetric constraint from the
/// Poisson-binomial count distribution, O(L^2).
pub fn symmetric_sat_prob(kind: SymKind, p: &[f64]) -> f64 {
    let len = p.len();
    let accept = |t: usize| -> bool {
        match kind {
            SymKind::Or => t >= 1,
            SymKind::Card(k) => t <= k,
            SymKind::Nae => t >= 1 && t < len,
            SymKind::Xor => t % 2 == 1,
        }
    };
    let mut dist = vec![0.0f64; len + 1];
    dist[0] = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        for t in (0..=i).rev() {
            let q = dist[t];
            dist[t + 1] += q * pi;
            dist[t] = q * (1.0 - pi);
        }
    }
    dist.iter()
        .enumerate()
        .filter(|&(t, _)| accept(t))
        .map(|(_, &q)| q)
        .sum()
}

/// Satisfaction probability and its gradient for a symmetric constraint,
/// computed from the Poisson-binomial distribution of the number of true
/// literals by prefix/suffix count convolutions. `p[i]` is the probability
/// that literal `i` is true.
pub fn symmetric_cop(kind: SymKind, p: &[f64]) -> (f64, Vec<f64>) {
    let len = p.len();
    let accept = |t: usize| -> bool {
        match kind {
            SymKind::Or => t >= 1,
            SymKind::Card(k) => t <= k,
            SymKind::Nae => t >= 1 && t < len,
            SymKind::Xor => t % 2 == 1,
        }
    };
    // prefix[i]: count distribution of the first i literals.
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(len + 1);
    prefix.push(vec![1.0]);
    for (i, &pi) in p.iter().enumerate() {
        let prev = &prefix[i];
        let mut next = vec![0.0; i + 2];
        for (t, &q) in prev.iter().enumerate() {
            next[t] += q * (1.0 - pi);
            next[t + 1] += q * pi;
        }
        prefix.push(next);
    }
    // suffix[i]: count distribution of literals i..len.
    let mut suffix: Vec<Vec<f64>> = vec![Vec::new(); len + 1];
    suffix[len] = vec![1.0];
    for i in (0..len).rev() {
        let pi = p[i];
        let prev = &suffix[i + 1];
        let mut next = vec![0.0; prev.len() + 1];
        for (t, &q) in prev.iter().enumerate() {
            next[t] += q * (1.0 - pi);
            next[t + 1] += q * pi;
        }
        suffix[i] = next;
    }

    let sat_prob: f64 = prefix[len]
        .iter()
        .enumerate()
        .filter(|&(t, _)| accept(t))
        .map(|(_, &q)| q)
        .sum();

    // Leave-one-out gradient: conditional satisfaction probabilities with
    // literal i pinned true or false.
    let mut grad = vec![0.0f64; len];
    for i in 0..len {
        let a = &prefix[i];
        let b = &suffix[i + 1];
        let mut sat_true = 0.0;
        let mut sat_false = 0.0;
        for (ta, &qa) in a.iter().enumerate() {
            if qa == 0.0 {
                continue;
            }
            for (tb, &qb) in b.iter().enumerate() {
                let q = qa * qb;
                if accept(ta + tb + 1) {
                    sat_true += q;
                }
                if accept(ta + tb) {
                    sat_false += q;
                }
            }
        }
        grad[i] = sat_true - sat_false;
    }
    (sat_prob, grad)
}
