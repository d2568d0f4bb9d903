//! Problem-instance data model: atoms, literals, constraints, formulas,
//! exact evaluation, and the text formats (HSMT instances, SMT-LIB2 export).
//!
//! Everything here is immutable after construction and safe to share across
//! threads; all evaluation functions are pure.

mod parse;
mod smt2;

pub use parse::{parse_instance, serialize_instance, ParseError};
pub use smt2::export_smt2;

/// The ±1 encoding of logical truth used throughout the solver:
/// `-1.0` is True, `+1.0` is False. Every sign conversion routes through
/// [`sign_from_bool`] / [`is_true_sign`] so the convention lives here only.
pub const TRUE_SIGN: f64 = -1.0;

/// Maps a Boolean truth value onto its ±1 sign encoding.
#[inline]
pub fn sign_from_bool(truth: bool) -> f64 {
    if truth {
        TRUE_SIGN
    } else {
        -TRUE_SIGN
    }
}

/// Inverse of [`sign_from_bool`] for ±1 values (negative means True).
#[inline]
pub fn is_true_sign(value: f64) -> bool {
    value < 0.0
}

/// Rounds a relaxed value in [-1, 1] to a ±1 sign; ties at 0 round to False.
#[inline]
pub fn round_sign(a: f64) -> f64 {
    sign_from_bool(a < 0.0)
}

/// A canonical linear inequality `q·y <= q0` (or `< q0` when `strict`).
///
/// Input relations from `{<, <=, >, >=}` are rewritten at construction by
/// negating both sides for `>` / `>=`, so stored atoms always read `<=`/`<`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub id: usize,
    /// Sparse coefficients `(real variable index, q_j)`, sorted by index,
    /// non-empty, no zero entries.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub strict: bool,
}

/// Relation symbols accepted by the instance format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Atom {
    /// Builds a canonical atom from an arbitrary relation. Coefficients are
    /// sorted by variable index; `>`/`>=` flip the sign of both sides.
    pub fn from_rel(id: usize, mut coeffs: Vec<(usize, f64)>, rel: Rel, mut rhs: f64) -> Atom {
        coeffs.sort_by_key(|&(j, _)| j);
        let strict = match rel {
            Rel::Le => false,
            Rel::Lt => true,
            Rel::Ge => {
                for c in &mut coeffs {
                    c.1 = -c.1;
                }
                rhs = -rhs;
                false
            }
            Rel::Gt => {
                for c in &mut coeffs {
                    c.1 = -c.1;
                }
                rhs = -rhs;
                true
            }
        };
        Atom {
            id,
            coeffs,
            rhs,
            strict,
        }
    }

    /// `q·y - q0`, the signed margin of the inequality at `y`.
    pub fn margin(&self, y: &[f64]) -> f64 {
        self.dot(y) - self.rhs
    }

    /// `q·y` evaluated sparsely.
    pub fn dot(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, q)| q * y[j]).sum()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|&(_, q)| q * q)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest real-variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.coeffs.iter().map(|&(j, _)| j).max()
    }
}

/// Exact ±1 evaluation of an atom at a real assignment.
pub fn eval_atom(atom: &Atom, y: &[f64]) -> f64 {
    let lhs = atom.dot(y);
    let sat = if atom.strict {
        lhs < atom.rhs
    } else {
        lhs <= atom.rhs
    };
    sign_from_bool(sat)
}

/// A Boolean variable or a theory atom, the two things a literal can test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Bool(usize),
    Atom(usize),
}

/// A possibly negated reference to a Boolean variable or atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: VarRef,
    pub negated: bool,
}

impl Literal {
    pub fn bool_var(index: usize, negated: bool) -> Literal {
        Literal {
            var: VarRef::Bool(index),
            negated,
        }
    }

    pub fn atom(id: usize, negated: bool) -> Literal {
        Literal {
            var: VarRef::Atom(id),
            negated,
        }
    }
}

/// Expression tree over literals; the general (non-symmetric) constraint body.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Xor(Vec<Expr>),
}

/// Symmetric constraint kinds; `Card(k)` is satisfied when at most `k`
/// literals are true.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymKind {
    Or,
    Card(usize),
    Nae,
    Xor,
}

/// Constraint body: a symmetric literal set or a general expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Symmetric {
        kind: SymKind,
        literals: Vec<Literal>,
    },
    Expr(Expr),
}

/// A weighted constraint of the formula.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub body: Body,
    pub weight: f64,
}

/// A literal-probability slot of one constraint: a distinct variable together
/// with the polarity under which it first occurs. Negation of the underlying
/// relaxed value happens at this boundary, never inside a diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotInfo {
    pub var: VarRef,
    pub negated: bool,
}

impl Constraint {
    pub fn new(body: Body, weight: f64) -> Constraint {
        Constraint { body, weight }
    }

    /// Visits every literal occurrence in a fixed deterministic order
    /// (symmetric list order; expression trees in depth-first pre-order).
    pub fn for_each_literal(&self, mut f: impl FnMut(Literal)) {
        fn walk(e: &Expr, f: &mut impl FnMut(Literal)) {
            match e {
                Expr::Lit(l) => f(*l),
                Expr::Not(inner) => walk(inner, f),
                Expr::And(es) | Expr::Or(es) | Expr::Xor(es) => {
                    for e in es {
                        walk(e, f);
                    }
                }
            }
        }
        match &self.body {
            Body::Symmetric { literals, .. } => {
                for l in literals {
                    f(*l);
                }
            }
            Body::Expr(e) => walk(e, &mut f),
        }
    }

    /// The constraint's literal slots: distinct variables in canonical order
    /// (Booleans ascending, then atoms ascending), each tagged with the
    /// polarity of its first occurrence.
    pub fn slot_infos(&self) -> Vec<SlotInfo> {
        let mut seen: Vec<(VarRef, bool)> = Vec::new();
        self.for_each_literal(|lit| {
            if !seen.iter().any(|&(v, _)| v == lit.var) {
                seen.push((lit.var, lit.negated));
            }
        });
        seen.sort_by_key(|&(v, _)| v);
        seen.into_iter()
            .map(|(var, negated)| SlotInfo { var, negated })
            .collect()
    }

    /// `Some(atom id)` when the constraint is exactly one positive atom
    /// literal; these constraints double as hard halfspaces in the projection.
    pub fn unit_atom(&self) -> Option<usize> {
        let single = |lits: &[Literal]| match lits {
            [Literal {
                var: VarRef::Atom(id),
                negated: false,
            }] => Some(*id),
            _ => None,
        };
        match &self.body {
            Body::Symmetric {
                kind: SymKind::Or | SymKind::Xor,
                literals,
            } => single(literals),
            Body::Expr(Expr::Lit(Literal {
                var: VarRef::Atom(id),
                negated: false,
            })) => Some(*id),
            _ => None,
        }
    }

    /// ±1 evaluation with caller-supplied variable signs. `bool_sign` and
    /// `atom_sign` must return ±1 values.
    pub fn eval_with(
        &self,
        bool_sign: &impl Fn(usize) -> f64,
        atom_sign: &impl Fn(usize) -> f64,
    ) -> f64 {
        let lit_true = |lit: &Literal| -> bool {
            let v = match lit.var {
                VarRef::Bool(i) => bool_sign(i),
                VarRef::Atom(id) => atom_sign(id),
            };
            is_true_sign(v) != lit.negated
        };
        fn eval_expr(e: &Expr, lit_true: &impl Fn(&Literal) -> bool) -> bool {
            match e {
                Expr::Lit(l) => lit_true(l),
                Expr::Not(inner) => !eval_expr(inner, lit_true),
                Expr::And(es) => es.iter().all(|e| eval_expr(e, lit_true)),
                Expr::Or(es) => es.iter().any(|e| eval_expr(e, lit_true)),
                Expr::Xor(es) => es.iter().filter(|e| eval_expr(e, lit_true)).count() % 2 == 1,
            }
        }
        let sat = match &self.body {
            Body::Symmetric { kind, literals } => {
                let count = literals.iter().filter(|l| lit_true(l)).count();
                match kind {
                    SymKind::Or => count >= 1,
                    SymKind::Card(k) => count <= *k,
                    SymKind::Nae => count >= 1 && count < literals.len(),
                    SymKind::Xor => count % 2 == 1,
                }
            }
            Body::Expr(e) => eval_expr(e, &lit_true),
        };
        sign_from_bool(sat)
    }
}

/// Exact ±1 evaluation of a constraint at a discrete assignment. `x` holds
/// ±1 Boolean signs; atoms are evaluated against `y`.
pub fn eval_constraint(c: &Constraint, atoms: &[Atom], x: &[f64], y: &[f64]) -> f64 {
    c.eval_with(&|i| x[i], &|id| eval_atom(&atoms[id], y))
}

/// A full problem instance.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Formula {
    pub n_bool: usize,
    pub n_real: usize,
    pub atoms: Vec<Atom>,
    pub constraints: Vec<Constraint>,
}

/// A discrete assignment: ±1 Boolean signs plus real values.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Formula {
    /// Structural validation: dense atom ids, in-range indices, positive
    /// weights, non-degenerate atoms, cardinality thresholds within bounds.
    pub fn validate(&self) -> Result<(), String> {
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.id != i {
                return Err(format!("atom ids not dense: expected {i}, found {}", atom.id));
            }
            if atom.coeffs.is_empty() {
                return Err(format!("atom {i} has no coefficients"));
            }
            for &(j, q) in &atom.coeffs {
                if j >= self.n_real {
                    return Err(format!("atom {i} references real variable y{j} out of range"));
                }
                if q == 0.0 || !q.is_finite() {
                    return Err(format!("atom {i} has a zero or non-finite coefficient"));
                }
            }
            if !atom.rhs.is_finite() {
                return Err(format!("atom {i} has a non-finite right-hand side"));
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(format!("constraint {ci} has non-positive weight"));
            }
            let mut count = 0usize;
            let mut bad: Option<String> = None;
            c.for_each_literal(|lit| {
                count += 1;
                match lit.var {
                    VarRef::Bool(i) if i >= self.n_bool => {
                        bad.get_or_insert(format!("constraint {ci}: b{i} out of range"));
                    }
                    VarRef::Atom(id) if id >= self.atoms.len() => {
                        bad.get_or_insert(format!("constraint {ci}: a{id} out of range"));
                    }
                    _ => {}
                }
            });
            if let Some(msg) = bad {
                return Err(msg);
            }
            if count == 0 {
                return Err(format!("constraint {ci} has no literals"));
            }
            if let Body::Symmetric {
                kind: SymKind::Card(k),
                literals,
            } = &c.body
            {
                if *k > literals.len() {
                    return Err(format!(
                        "constraint {ci}: cardinality threshold {k} exceeds length {}",
                        literals.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Sum of all constraint weights (the satisfiable objective is its
    /// negation).
    pub fn total_weight(&self) -> f64 {
        self.constraints.iter().map(|c| c.weight).sum()
    }

    /// Atom ids enforced as hard halfspaces by the projection, one entry per
    /// unit atomic constraint.
    pub fn unit_atoms(&self) -> Vec<usize> {
        self.constraints
            .iter()
            .filter_map(|c| c.unit_atom())
            .collect()
    }

    /// Weighted objective `F_w` and per-constraint satisfaction flags at a
    /// discrete assignment. The objective equals `-total_weight()` exactly
    /// when every flag is set.
    pub fn eval_formula(&self, asg: &Assignment) -> (f64, Vec<bool>) {
        assert_eq!(asg.x.len(), self.n_bool, "Boolean assignment length");
        assert_eq!(asg.y.len(), self.n_real, "real assignment length");
        let mut objective = 0.0;
        let mut flags = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let v = eval_constraint(c, &self.atoms, &asg.x, &asg.y);
            objective += c.weight * v;
            flags.push(is_true_sign(v));
        }
        (objective, flags)
    }
}
