//! SMT-LIB2 (QF_LRA) export, satisfiability-equivalent to the source
//! formula. Weights do not translate; external solvers decide the plain
//! conjunction. Coefficients are printed with the shortest round-trip
//! decimal form of their f64 value.

use super::{Atom, Body, Constraint, Expr, Formula, Literal, SymKind, VarRef};
use std::fmt::Write;

fn fmt_real(v: f64) -> String {
    if v < 0.0 {
        format!("(- {})", fmt_real(-v))
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{:.1}", v)
    } else {
        format!("{v}")
    }
}

fn atom_term(atom: &Atom) -> String {
    let mut terms: Vec<String> = Vec::new();
    for &(j, c) in &atom.coeffs {
        if c == 1.0 {
            terms.push(format!("y{j}"));
        } else {
            terms.push(format!("(* {} y{j})", fmt_real(c)));
        }
    }
    let sum = if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        format!("(+ {})", terms.join(" "))
    };
    let rel = if atom.strict { "<" } else { "<=" };
    format!("({rel} {sum} {})", fmt_real(atom.rhs))
}

fn literal_term(lit: &Literal, atoms: &[Atom]) -> String {
    let base = match lit.var {
        VarRef::Bool(i) => format!("b{i}"),
        VarRef::Atom(id) => atom_term(&atoms[id]),
    };
    if lit.negated {
        format!("(not {base})")
    } else {
        base
    }
}

fn expr_term(e: &Expr, atoms: &[Atom]) -> String {
    let nary = |op: &str, es: &[Expr]| -> String {
        if es.len() == 1 {
            expr_term(&es[0], atoms)
        } else {
            let parts: Vec<String> = es.iter().map(|e| expr_term(e, atoms)).collect();
            format!("({op} {})", parts.join(" "))
        }
    };
    match e {
        Expr::Lit(l) => literal_term(l, atoms),
        Expr::Not(inner) => format!("(not {})", expr_term(inner, atoms)),
        Expr::And(es) => nary("and", es),
        Expr::Or(es) => nary("or", es),
        Expr::Xor(es) => nary("xor", es),
    }
}

fn constraint_term(c: &Constraint, atoms: &[Atom]) -> String {
    match &c.body {
        Body::Expr(e) => expr_term(e, atoms),
        Body::Symmetric { kind, literals } => {
            let lits: Vec<String> = literals.iter().map(|l| literal_term(l, atoms)).collect();
            match kind {
                SymKind::Or => {
                    if lits.len() == 1 {
                        lits[0].clone()
                    } else {
                        format!("(or {})", lits.join(" "))
                    }
                }
                SymKind::Xor => {
                    if lits.len() == 1 {
                        lits[0].clone()
                    } else {
                        format!("(xor {})", lits.join(" "))
                    }
                }
                SymKind::Nae => {
                    // Not-all-equal is unsatisfiable for a single literal.
                    if lits.len() == 1 {
                        "false".to_string()
                    } else {
                        format!("(not (= {}))", lits.join(" "))
                    }
                }
                SymKind::Card(k) => {
                    // Integer-free pseudo-Boolean sum: at most k literals true.
                    let ites: Vec<String> =
                        lits.iter().map(|l| format!("(ite {l} 1.0 0.0)")).collect();
                    let sum = if ites.len() == 1 {
                        ites[0].clone()
                    } else {
                        format!("(+ {})", ites.join(" "))
                    };
                    format!("(<= {sum} {}.0)", k)
                }
            }
        }
    }
}

/// Renders the formula as an SMT-LIB2 script in the QF_LRA logic.
pub fn export_smt2(f: &Formula) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_LRA)\n");
    out.push_str("(set-info :status unknown)\n");
    for i in 0..f.n_bool {
        let _ = writeln!(out, "(declare-const b{i} Bool)");
    }
    for j in 0..f.n_real {
        let _ = writeln!(out, "(declare-const y{j} Real)");
    }
    for c in &f.constraints {
        let _ = writeln!(out, "(assert {})", constraint_term(c, &f.atoms));
    }
    out.push_str("(check-sat)\n(exit)\n");
    out
}
