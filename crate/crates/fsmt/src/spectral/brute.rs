//! Brute-force satisfiability for small instances: enumerate Boolean vectors
//! and atom truth patterns, then check real-arithmetic consistency of each
//! fully satisfying pattern with Fourier-Motzkin elimination.

use super::fm::{fm_feasible, FmResult, LinearIneq};
use super::OracleError;
use crate::model::{eval_atom, is_true_sign, sign_from_bool, Assignment, Formula, TRUE_SIGN};
use std::collections::HashMap;

pub const BRUTE_MAX_BOOL: usize = 16;
pub const BRUTE_MAX_REAL: usize = 12;
pub const BRUTE_MAX_ATOMS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum SatResult {
    Sat(Assignment),
    Unsat,
}

/// Complete satisfiability check within the size limits. The returned
/// witness satisfies every constraint under exact f64 evaluation.
pub fn brute_force_sat(f: &Formula) -> Result<SatResult, OracleError> {
    if f.n_bool > BRUTE_MAX_BOOL {
        return Err(OracleError::SizeLimitExceeded(format!(
            "{} Boolean variables exceed the limit of {BRUTE_MAX_BOOL}",
            f.n_bool
        )));
    }
    if f.n_real > BRUTE_MAX_REAL {
        return Err(OracleError::SizeLimitExceeded(format!(
            "{} real variables exceed the limit of {BRUTE_MAX_REAL}",
            f.n_real
        )));
    }
    let k = f.atoms.len();
    if k > BRUTE_MAX_ATOMS {
        return Err(OracleError::SizeLimitExceeded(format!(
            "{k} atoms exceed the limit of {BRUTE_MAX_ATOMS}"
        )));
    }

    // Pattern feasibility is independent of the Boolean vector; memoize it.
    let mut pattern_witness: HashMap<u64, Option<Vec<f64>>> = HashMap::new();

    for xbits in 0..1u64 << f.n_bool {
        let bool_sign = |i: usize| sign_from_bool(xbits >> i & 1 == 1);
        'patterns: for pattern in 0..1u64 << k {
            let atom_sign = |id: usize| sign_from_bool(pattern >> id & 1 == 1);
            for c in &f.constraints {
                if !is_true_sign(c.eval_with(&bool_sign, &atom_sign)) {
                    continue 'patterns;
                }
            }
            let witness = pattern_witness
                .entry(pattern)
                .or_insert_with(|| solve_pattern(f, pattern));
            if let Some(y) = witness {
                let x: Vec<f64> = (0..f.n_bool).map(bool_sign).collect();
                return Ok(SatResult::Sat(Assignment { x, y: y.clone() }));
            }
        }
    }
    Ok(SatResult::Unsat)
}

/// Finds a real assignment realizing the atom truth pattern, or `None`.
/// The f64 witness is re-verified against exact atom evaluation so a
/// `Sat` answer never rests on rounding.
fn solve_pattern(f: &Formula, pattern: u64) -> Option<Vec<f64>> {
    let mut system = Vec::with_capacity(f.atoms.len());
    for atom in &f.atoms {
        let wants_true = pattern >> atom.id & 1 == 1;
        if wants_true {
            system.push(LinearIneq {
                coeffs: atom.coeffs.clone(),
                rhs: atom.rhs,
                strict: atom.strict,
            });
        } else {
            // not (q·y <= q0)  <=>  -q·y < -q0 ; strictness flips.
            system.push(LinearIneq {
                coeffs: atom.coeffs.iter().map(|&(j, c)| (j, -c)).collect(),
                rhs: -atom.rhs,
                strict: !atom.strict,
            });
        }
    }
    match fm_feasible(&system, f.n_real).ok()? {
        FmResult::Infeasible => None,
        FmResult::Feasible(y) => {
            let consistent = f.atoms.iter().all(|atom| {
                let want = pattern >> atom.id & 1 == 1;
                (eval_atom(atom, &y) == TRUE_SIGN) == want
            });
            consistent.then_some(y)
        }
    }
}
