//! HSMT instance format: line-oriented UTF-8 text with `#` comments.
//!
//! ```text
//! p hsmt <n_bool> <n_real>
//! a <id> <rel> <rhs> <j>:<coeff> ...      rel in { <=, <, >=, > }
//! c <kind> [<k>] <weight> <lit> ...       kind in { or, card, nae, xor }
//! e <weight> <sexpr>
//! ```
//!
//! Literal tokens are `+b<i>`, `-b<i>`, `+a<id>`, `-a<id>`. Expression
//! constraints use the s-expression grammar
//! `(and ...) | (or ...) | (xor ...) | (not <e>) | b<i> | a<id>`.
//! Numbers may be decimal or rational (`p/q`); both are converted to f64.

use super::{Atom, Body, Constraint, Expr, Formula, Literal, Rel, SymKind};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    fn new(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

/// Splits a line into tokens; parentheses are their own tokens and `#`
/// starts a comment. Columns are 1-based character offsets.
fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (byte offset, column)
    let mut col = 0usize;
    for (b, ch) in line.char_indices() {
        col += 1;
        if ch == '#' || ch.is_whitespace() || ch == '(' || ch == ')' {
            if let Some((sb, sc)) = start.take() {
                toks.push(Tok {
                    text: &line[sb..b],
                    col: sc,
                });
            }
            if ch == '#' {
                return toks;
            }
            if ch == '(' || ch == ')' {
                toks.push(Tok {
                    text: &line[b..b + ch.len_utf8()],
                    col,
                });
            }
        } else if start.is_none() {
            start = Some((b, col));
        }
    }
    if let Some((sb, sc)) = start.take() {
        toks.push(Tok {
            text: &line[sb..],
            col: sc,
        });
    }
    toks
}

fn parse_usize(line: usize, tok: &Tok) -> Result<usize, ParseError> {
    tok.text
        .parse::<usize>()
        .map_err(|_| ParseError::new(line, tok.col, format!("expected an integer, found `{}`", tok.text)))
}

/// Accepts decimal literals and rationals written `p/q`.
fn parse_number(line: usize, tok: &Tok) -> Result<f64, ParseError> {
    let bad = || ParseError::new(line, tok.col, format!("expected a number, found `{}`", tok.text));
    let v = if let Some((p, q)) = tok.text.split_once('/') {
        let p: f64 = p.parse().map_err(|_| bad())?;
        let q: f64 = q.parse().map_err(|_| bad())?;
        if q == 0.0 {
            return Err(ParseError::new(line, tok.col, "rational with zero denominator"));
        }
        p / q
    } else {
        tok.text.parse::<f64>().map_err(|_| bad())?
    };
    if !v.is_finite() {
        return Err(ParseError::new(line, tok.col, "number is not finite"));
    }
    Ok(v)
}

fn parse_literal(
    line: usize,
    tok: &Tok,
    n_bool: usize,
    n_atoms: usize,
) -> Result<Literal, ParseError> {
    let text = tok.text;
    let err = |msg: String| ParseError::new(line, tok.col, msg);
    let (negated, rest) = match text.as_bytes().first() {
        Some(b'+') => (false, &text[1..]),
        Some(b'-') => (true, &text[1..]),
        _ => return Err(err(format!("literal `{text}` must start with `+` or `-`"))),
    };
    parse_var(line, tok.col, rest, n_bool, n_atoms).map(|var| Literal { var, negated })
}

fn parse_var(
    line: usize,
    col: usize,
    text: &str,
    n_bool: usize,
    n_atoms: usize,
) -> Result<super::VarRef, ParseError> {
    let err = |msg: String| ParseError::new(line, col, msg);
    let (kind, idx) = text.split_at(1.min(text.len()));
    let index: usize = idx
        .parse()
        .map_err(|_| err(format!("bad variable reference `{text}`")))?;
    match kind {
        "b" => {
            if index >= n_bool {
                Err(err(format!("boolean index b{index} out of range (n_bool = {n_bool})")))
            } else {
                Ok(super::VarRef::Bool(index))
            }
        }
        "a" => {
            if index >= n_atoms {
                Err(err(format!("atom a{index} used before declaration")))
            } else {
                Ok(super::VarRef::Atom(index))
            }
        }
        _ => Err(err(format!("bad variable reference `{text}`"))),
    }
}

fn parse_sexpr(
    line: usize,
    toks: &[Tok],
    pos: &mut usize,
    n_bool: usize,
    n_atoms: usize,
) -> Result<Expr, ParseError> {
    let end_err = |toks: &[Tok]| {
        let col = toks.last().map(|t| t.col + t.text.len()).unwrap_or(1);
        ParseError::new(line, col, "unexpected end of expression")
    };
    let tok = *toks.get(*pos).ok_or_else(|| end_err(toks))?;
    *pos += 1;
    if tok.text == "(" {
        let head = *toks.get(*pos).ok_or_else(|| end_err(toks))?;
        *pos += 1;
        let mut children = Vec::new();
        loop {
            match toks.get(*pos) {
                None => return Err(end_err(toks)),
                Some(t) if t.text == ")" => {
                    *pos += 1;
                    break;
                }
                Some(_) => children.push(parse_sexpr(line, toks, pos, n_bool, n_atoms)?),
            }
        }
        match head.text {
            "and" | "or" | "xor" => {
                if children.is_empty() {
                    return Err(ParseError::new(line, head.col, format!("`{}` needs at least one operand", head.text)));
                }
                Ok(match head.text {
                    "and" => Expr::And(children),
                    "or" => Expr::Or(children),
                    _ => Expr::Xor(children),
                })
            }
            "not" => {
                if children.len() != 1 {
                    return Err(ParseError::new(line, head.col, "`not` takes exactly one operand"));
                }
                // Negated literals are a literal flag, not a tree node, so
                // serialize/parse round-trips are structurally exact.
                Ok(match children.into_iter().next().unwrap() {
                    Expr::Lit(l) => Expr::Lit(Literal {
                        var: l.var,
                        negated: !l.negated,
                    }),
                    child => Expr::Not(Box::new(child)),
                })
            }
            other => Err(ParseError::new(line, head.col, format!("unknown operator `{other}`"))),
        }
    } else if tok.text == ")" {
        Err(ParseError::new(line, tok.col, "unexpected `)`"))
    } else {
        let var = parse_var(line, tok.col, tok.text, n_bool, n_atoms)?;
        Ok(Expr::Lit(Literal { var, negated: false }))
    }
}

/// Parses an HSMT instance; atoms are canonicalized, equality relations are
/// rejected, and all indices are validated.
pub fn parse_instance(text: &str) -> Result<Formula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut atoms: Vec<Atom> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();

    for (line0, raw) in text.lines().enumerate() {
        let line = line0 + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let head = toks[0];
        let need = |idx: usize, what: &str| -> Result<Tok, ParseError> {
            toks.get(idx).copied().ok_or_else(|| {
                let col = toks.last().map(|t| t.col + t.text.len()).unwrap_or(1);
                ParseError::new(line, col, format!("missing {what}"))
            })
        };
        match head.text {
            "p" => {
                if header.is_some() {
                    return Err(ParseError::new(line, head.col, "duplicate header line"));
                }
                let fmt = need(1, "format name")?;
                if fmt.text != "hsmt" {
                    return Err(ParseError::new(line, fmt.col, format!("unknown format `{}`", fmt.text)));
                }
                let n = parse_usize(line, &need(2, "boolean variable count")?)?;
                let m = parse_usize(line, &need(3, "real variable count")?)?;
                if toks.len() > 4 {
                    return Err(ParseError::new(line, toks[4].col, "trailing tokens after header"));
                }
                header = Some((n, m));
            }
            "a" | "c" | "e" => {
                let (n_bool, n_real) = header
                    .ok_or_else(|| ParseError::new(line, head.col, "missing `p hsmt` header line"))?;
                match head.text {
                    "a" => {
                        let id = parse_usize(line, &need(1, "atom id")?)?;
                        if id != atoms.len() {
                            return Err(ParseError::new(line, toks[1].col, format!("atom ids must be dense: expected {}, found {id}", atoms.len())));
                        }
                        let rel_tok = need(2, "relation")?;
                        let rel = match rel_tok.text {
                            "<=" => Rel::Le,
                            "<" => Rel::Lt,
                            ">=" => Rel::Ge,
                            ">" => Rel::Gt,
                            "=" => {
                                return Err(ParseError::new(line, rel_tok.col, "equality atoms unsupported"))
                            }
                            other => {
                                return Err(ParseError::new(line, rel_tok.col, format!("unknown relation `{other}`")))
                            }
                        };
                        let rhs = parse_number(line, &need(3, "right-hand side")?)?;
                        let mut coeffs: Vec<(usize, f64)> = Vec::new();
                        for tok in &toks[4..] {
                            let (j, c) = tok.text.split_once(':').ok_or_else(|| {
                                ParseError::new(line, tok.col, format!("expected `<j>:<coeff>`, found `{}`", tok.text))
                            })?;
                            let j: usize = j.parse().map_err(|_| {
                                ParseError::new(line, tok.col, format!("bad variable index in `{}`", tok.text))
                            })?;
                            if j >= n_real {
                                return Err(ParseError::new(line, tok.col, format!("real index y{j} out of range (n_real = {n_real})")));
                            }
                            let c = parse_number(line, &Tok { text: c, col: tok.col })?;
                            if c == 0.0 {
                                return Err(ParseError::new(line, tok.col, "zero coefficient"));
                            }
                            if coeffs.iter().any(|&(jj, _)| jj == j) {
                                return Err(ParseError::new(line, tok.col, format!("duplicate coefficient for y{j}")));
                            }
                            coeffs.push((j, c));
                        }
                        if coeffs.is_empty() {
                            return Err(ParseError::new(line, head.col, "atom has no coefficients"));
                        }
                        atoms.push(Atom::from_rel(id, coeffs, rel, rhs));
                    }
                    "c" => {
                        let kind_tok = need(1, "constraint kind")?;
                        let (kind, weight_idx) = match kind_tok.text {
                            "or" => (SymKind::Or, 2),
                            "nae" => (SymKind::Nae, 2),
                            "xor" => (SymKind::Xor, 2),
                            "card" => {
                                let k = parse_usize(line, &need(2, "cardinality threshold")?)?;
                                (SymKind::Card(k), 3)
                            }
                            other => {
                                return Err(ParseError::new(line, kind_tok.col, format!("unknown constraint kind `{other}`")))
                            }
                        };
                        let w_tok = need(weight_idx, "weight")?;
                        let weight = parse_number(line, &w_tok)?;
                        if weight == 0.0 {
                            return Err(ParseError::new(line, w_tok.col, "zero weight"));
                        }
                        if weight < 0.0 {
                            return Err(ParseError::new(line, w_tok.col, "negative weight"));
                        }
                        let mut literals = Vec::new();
                        for tok in &toks[weight_idx + 1..] {
                            literals.push(parse_literal(line, tok, n_bool, atoms.len())?);
                        }
                        if literals.is_empty() {
                            return Err(ParseError::new(line, head.col, "constraint has no literals"));
                        }
                        if let SymKind::Card(k) = kind {
                            if k > literals.len() {
                                return Err(ParseError::new(line, toks[2].col, format!("cardinality threshold {k} exceeds literal count {}", literals.len())));
                            }
                        }
                        constraints.push(Constraint::new(Body::Symmetric { kind, literals }, weight));
                    }
                    _ => {
                        // e <weight> <sexpr>
                        let w_tok = need(1, "weight")?;
                        let weight = parse_number(line, &w_tok)?;
                        if weight == 0.0 {
                            return Err(ParseError::new(line, w_tok.col, "zero weight"));
                        }
                        if weight < 0.0 {
                            return Err(ParseError::new(line, w_tok.col, "negative weight"));
                        }
                        let mut pos = 2;
                        let expr = parse_sexpr(line, &toks, &mut pos, n_bool, atoms.len())?;
                        if pos != toks.len() {
                            return Err(ParseError::new(line, toks[pos].col, "trailing tokens after expression"));
                        }
                        constraints.push(Constraint::new(Body::Expr(expr), weight));
                    }
                }
            }
            other => {
                return Err(ParseError::new(line, head.col, format!("unknown line type `{other}`")));
            }
        }
    }

    let (n_bool, n_real) = header.ok_or_else(|| ParseError::new(1, 1, "missing `p hsmt` header line"))?;
    let formula = Formula {
        n_bool,
        n_real,
        atoms,
        constraints,
    };
    formula
        .validate()
        .map_err(|msg| ParseError::new(1, 1, msg))?;
    Ok(formula)
}

fn fmt_literal(lit: &Literal) -> String {
    let sign = if lit.negated { '-' } else { '+' };
    match lit.var {
        super::VarRef::Bool(i) => format!("{sign}b{i}"),
        super::VarRef::Atom(id) => format!("{sign}a{id}"),
    }
}

fn fmt_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(l) => {
            let var = match l.var {
                super::VarRef::Bool(i) => format!("b{i}"),
                super::VarRef::Atom(id) => format!("a{id}"),
            };
            if l.negated {
                format!("(not {var})")
            } else {
                var
            }
        }
        Expr::Not(inner) => format!("(not {})", fmt_expr(inner)),
        Expr::And(es) => format!("(and {})", es.iter().map(fmt_expr).collect::<Vec<_>>().join(" ")),
        Expr::Or(es) => format!("(or {})", es.iter().map(fmt_expr).collect::<Vec<_>>().join(" ")),
        Expr::Xor(es) => format!("(xor {})", es.iter().map(fmt_expr).collect::<Vec<_>>().join(" ")),
    }
}

/// Serializes a formula to the HSMT text format. Floats use the shortest
/// round-trip decimal representation, so `parse_instance` reproduces the
/// structure bit-exactly.
pub fn serialize_instance(f: &Formula) -> String {
    let mut out = String::new();
    out.push_str(&format!("p hsmt {} {}\n", f.n_bool, f.n_real));
    for atom in &f.atoms {
        let rel = if atom.strict { "<" } else { "<=" };
        out.push_str(&format!("a {} {} {}", atom.id, rel, atom.rhs));
        for &(j, c) in &atom.coeffs {
            out.push_str(&format!(" {j}:{c}"));
        }
        out.push('\n');
    }
    for c in &f.constraints {
        match &c.body {
            Body::Symmetric { kind, literals } => {
                let lits = literals.iter().map(fmt_literal).collect::<Vec<_>>().join(" ");
                match kind {
                    SymKind::Or => out.push_str(&format!("c or {} {lits}\n", c.weight)),
                    SymKind::Nae => out.push_str(&format!("c nae {} {lits}\n", c.weight)),
                    SymKind::Xor => out.push_str(&format!("c xor {} {lits}\n", c.weight)),
                    SymKind::Card(k) => out.push_str(&format!("c card {k} {} {lits}\n", c.weight)),
                }
            }
            Body::Expr(e) => {
                out.push_str(&format!("e {} {}\n", c.weight, fmt_expr(e)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn parses_minimal_instances() {
        let f = parse_instance("p hsmt 1 1\na 0 <= 0 0:1\ne 1 (and b0 a0)").unwrap();
        assert_eq!(f.n_bool, 1);
        assert_eq!(f.n_real, 1);
        assert_eq!(f.atoms.len(), 1);
        assert_eq!(f.atoms[0].coeffs, vec![(0, 1.0)]);
        assert!(!f.atoms[0].strict);
        assert_eq!(f.constraints.len(), 1);
        assert!(matches!(f.constraints[0].body, Body::Expr(Expr::And(_))));

        let f = parse_instance("p hsmt 2 0\nc xor 1 +b0 +b1").unwrap();
        assert_eq!(f.n_bool, 2);
        assert!(matches!(
            f.constraints[0].body,
            Body::Symmetric {
                kind: SymKind::Xor,
                ..
            }
        ));
        assert_eq!(f.constraints[0].weight, 1.0);
    }

    #[test]
    fn rejects_equality_atoms() {
        let err = parse_instance("p hsmt 1 1\na 0 = 0 0:1").unwrap_err();
        assert!(err.msg.contains("equality atoms unsupported"), "{err}");
        assert_eq!(err.line, 2);
    }

    #[test]
    fn rejects_zero_weight_and_bad_indices() {
        let err = parse_instance("p hsmt 2 0\nc or 0 +b0").unwrap_err();
        assert!(err.msg.contains("zero weight"), "{err}");

        let err = parse_instance("p hsmt 2 0\nc or 1 +b2").unwrap_err();
        assert!(err.msg.contains("out of range"), "{err}");

        let err = parse_instance("p hsmt 2 1\nc or 1 +a0").unwrap_err();
        assert!(err.msg.contains("before declaration"), "{err}");

        let err = parse_instance("p hsmt 1 1\na 0 <= 0 0:0").unwrap_err();
        assert!(err.msg.contains("zero coefficient"), "{err}");
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_instance("p hsmt 1 0\nc or 1 zzz").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.col, 8);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let f = parse_instance("# header comment\n\np hsmt 1 0  # inline\nc or 1 +b0 # tail\n").unwrap();
        assert_eq!(f.n_bool, 1);
        assert_eq!(f.constraints.len(), 1);
    }

    #[test]
    fn rational_coefficients() {
        let f = parse_instance("p hsmt 0 1\na 0 <= 1/2 0:3/4").unwrap();
        assert_eq!(f.atoms[0].rhs, 0.5);
        assert_eq!(f.atoms[0].coeffs, vec![(0, 0.75)]);
    }

    #[test]
    fn round_trip_examples() {
        let sources = [
            "p hsmt 1 1\na 0 <= 0 0:1\ne 1 (and b0 a0)",
            "p hsmt 2 0\nc xor 1 +b0 +b1",
            "p hsmt 3 2\na 0 < -0.25 0:1 1:-2\nc card 1 2.5 +b0 -b1 +a0\nc nae 1 -b2 +b0\ne 0.125 (or (not b0) (xor b1 a0))",
        ];
        for src in sources {
            let f = parse_instance(src).unwrap();
            let text = serialize_instance(&f);
            let g = parse_instance(&text).unwrap();
            assert_eq!(f, g, "round trip failed for {src}");
        }
    }

    #[test]
    fn serializes_constraint_free_formula() {
        let f = parse_instance("p hsmt 0 1\na 0 <= 0 0:1").unwrap();
        let text = serialize_instance(&f);
        assert_eq!(text, "p hsmt 0 1\na 0 <= 0 0:1\n");
    }
}
