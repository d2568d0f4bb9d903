//! Shared helpers for integration tests: seeded random constraints,
//! formulas, and points.

#![allow(dead_code)]

use fsmt::model::{Atom, Body, Constraint, Expr, Formula, Literal, Rel, SymKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rand_atom(rng: &mut ChaCha8Rng, id: usize, n_real: usize) -> Atom {
    let n_vars = rng.gen_range(1..=3.min(n_real));
    let mut vars: Vec<usize> = (0..n_real).collect();
    for i in (1..vars.len()).rev() {
        vars.swap(i, rng.gen_range(0..=i));
    }
    let coeffs: Vec<(usize, f64)> = vars[..n_vars]
        .iter()
        .map(|&j| {
            let mag = rng.gen_range(1..=3) as f64;
            (j, if rng.gen() { mag } else { -mag })
        })
        .collect();
    let rel = match rng.gen_range(0..4) {
        0 => Rel::Le,
        1 => Rel::Lt,
        2 => Rel::Ge,
        _ => Rel::Gt,
    };
    Atom::from_rel(id, coeffs, rel, rng.gen_range(-1.0..1.0))
}

pub fn rand_literal(rng: &mut ChaCha8Rng, n_bool: usize, n_atoms: usize) -> Literal {
    let idx = rng.gen_range(0..n_bool + n_atoms);
    let negated = rng.gen();
    if idx < n_bool {
        Literal::bool_var(idx, negated)
    } else {
        Literal::atom(idx - n_bool, negated)
    }
}

pub fn rand_symmetric(
    rng: &mut ChaCha8Rng,
    n_bool: usize,
    n_atoms: usize,
    max_len: usize,
) -> Constraint {
    let len = rng.gen_range(1..=max_len);
    let literals: Vec<Literal> = (0..len)
        .map(|_| rand_literal(rng, n_bool, n_atoms))
        .collect();
    let kind = match rng.gen_range(0..4) {
        0 => SymKind::Or,
        1 => SymKind::Nae,
        2 => SymKind::Xor,
        _ => SymKind::Card(rng.gen_range(0..=len)),
    };
    Constraint::new(Body::Symmetric { kind, literals }, 1.0)
}

fn rand_expr(rng: &mut ChaCha8Rng, n_bool: usize, n_atoms: usize, budget: &mut usize) -> Expr {
    if *budget == 0 || rng.gen_range(0..3) == 0 {
        if *budget > 0 {
            *budget -= 1;
        }
        return Expr::Lit(rand_literal(rng, n_bool, n_atoms));
    }
    match rng.gen_range(0..4) {
        0 => match rand_expr(rng, n_bool, n_atoms, budget) {
            // Negation of a literal lives in the literal flag (the parser's
            // canonical form).
            Expr::Lit(l) => Expr::Lit(Literal {
                var: l.var,
                negated: !l.negated,
            }),
            child => Expr::Not(Box::new(child)),
        },
        op => {
            let arity = rng.gen_range(2..=3);
            let children: Vec<Expr> = (0..arity)
                .map(|_| rand_expr(rng, n_bool, n_atoms, budget))
                .collect();
            match op {
                1 => Expr::And(children),
                2 => Expr::Or(children),
                _ => Expr::Xor(children),
            }
        }
    }
}

/// Random constraint over at most `max_slots` distinct variables.
pub fn rand_constraint(
    rng: &mut ChaCha8Rng,
    n_bool: usize,
    n_atoms: usize,
    max_slots: usize,
) -> Constraint {
    // Drawing at most `max_slots` literal occurrences bounds the slot count.
    if rng.gen() {
        rand_symmetric(rng, n_bool, n_atoms, max_slots)
    } else {
        let mut budget = max_slots;
        let expr = rand_expr(rng, n_bool, n_atoms, &mut budget);
        Constraint::new(Body::Expr(expr), 1.0)
    }
}

/// Small mixed instance within the brute-force oracle's limits.
pub fn rand_small_formula(rng: &mut ChaCha8Rng) -> Formula {
    let n_bool = rng.gen_range(2..=10);
    let n_real = rng.gen_range(1..=3);
    let n_atoms = rng.gen_range(1..=5);
    let atoms: Vec<Atom> = (0..n_atoms).map(|id| rand_atom(rng, id, n_real)).collect();
    let n_constraints = rng.gen_range(1..=8);
    let constraints: Vec<Constraint> = (0..n_constraints)
        .map(|_| rand_constraint(rng, n_bool, n_atoms, 5))
        .collect();
    let f = Formula {
        n_bool,
        n_real,
        atoms,
        constraints,
    };
    f.validate().expect("generated formula is valid");
    f
}

pub const XOR_AND_TEXT: &str =
    "p hsmt 1 1\na 0 < 0 0:-1\ne 1 (xor (not b0) a0)\ne 1 (and b0 a0)\n";

pub fn xor_and_instance() -> Formula {
    fsmt::model::parse_instance(XOR_AND_TEXT).unwrap()
}
