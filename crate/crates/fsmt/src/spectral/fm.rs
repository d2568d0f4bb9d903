//! Fourier-Motzkin elimination over exact rationals.
//!
//! Sound and complete for systems of strict and non-strict linear
//! inequalities at desk scale; a variable limit guards the worst-case
//! doubly-exponential blow-up. Witnesses are found by back-substitution,
//! picking interval midpoints so strict bounds keep positive margin, then
//! rendered as f64. The rational witness satisfies the system exactly;
//! callers re-check the f64 rendering where it matters.

use super::OracleError;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Elimination guard.
pub const FM_MAX_VARS: usize = 12;

const MAX_ROWS: usize = 200_000;

/// One inequality `sum coeffs[j] * y_j <= rhs` (`<` when `strict`).
#[derive(Clone, Debug)]
pub struct LinearIneq {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FmResult {
    Feasible(Vec<f64>),
    Infeasible,
}

#[derive(Clone)]
struct Row {
    coeffs: Vec<BigRational>,
    rhs: BigRational,
    strict: bool,
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

impl Row {
    fn max_var(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// A variable-free row is consistent iff `0 <= rhs` (or `< rhs`).
    fn constant_consistent(&self) -> bool {
        if self.strict {
            self.rhs.is_positive()
        } else {
            !self.rhs.is_negative()
        }
    }
}

/// Decides feasibility of the system over `n_vars` real variables and, when
/// feasible, produces a witness (unconstrained variables are set to zero).
pub fn fm_feasible(ineqs: &[LinearIneq], n_vars: usize) -> Result<FmResult, OracleError> {
    if n_vars > FM_MAX_VARS {
        return Err(OracleError::VariableLimitExceeded {
            vars: n_vars,
            max: FM_MAX_VARS,
        });
    }

    let mut rows: Vec<Row> = Vec::with_capacity(ineqs.len());
    for iq in ineqs {
        let mut coeffs = vec![BigRational::zero(); n_vars];
        for &(j, c) in &iq.coeffs {
            assert!(j < n_vars, "variable index out of range");
            coeffs[j] += rat(c);
        }
        rows.push(Row {
            coeffs,
            rhs: rat(iq.rhs),
            strict: iq.strict,
        });
    }

    // stages[j]: rows involving variable j as their highest variable, kept
    // for back-substitution.
    let mut stages: Vec<Vec<Row>> = vec![Vec::new(); n_vars];

    for j in (0..n_vars).rev() {
        let mut lower: Vec<Row> = Vec::new(); // coeff_j < 0
        let mut upper: Vec<Row> = Vec::new(); // coeff_j > 0
        let mut rest: Vec<Row> = Vec::new();
        for row in rows {
            match row.max_var() {
                None => {
                    if !row.constant_consistent() {
                        return Ok(FmResult::Infeasible);
                    }
                }
                Some(mv) if mv == j => {
                    if row.coeffs[j].is_positive() {
                        upper.push(row);
                    } else {
                        lower.push(row);
                    }
                }
                _ => rest.push(row),
            }
        }
        if rest.len() + lower.len() * upper.len() > MAX_ROWS {
            return Err(OracleError::SizeLimitExceeded(format!(
                "Fourier-Motzkin row blow-up while eliminating y{j}"
            )));
        }
        for lo in &lower {
            for up in &upper {
                // Positive combination cancelling y_j:
                //   up.coeffs[j] * lo - lo.coeffs[j] * up
                let cu = &up.coeffs[j];
                let cl = &lo.coeffs[j]; // negative
                let mut coeffs = vec![BigRational::zero(); n_vars];
                for k in 0..j {
                    coeffs[k] = cu * &lo.coeffs[k] - cl * &up.coeffs[k];
                }
                let rhs = cu * &lo.rhs - cl * &up.rhs;
                rest.push(Row {
                    coeffs,
                    rhs,
                    strict: lo.strict || up.strict,
                });
            }
        }
        stages[j] = lower;
        stages[j].extend(upper);
        rows = rest;
    }
    for row in &rows {
        if !row.constant_consistent() {
            return Ok(FmResult::Infeasible);
        }
    }

    // Back-substitution, lowest variable first; stages[j] rows touch only
    // variables <= j.
    let mut witness = vec![BigRational::zero(); n_vars];
    for j in 0..n_vars {
        let mut lo: Option<(BigRational, bool)> = None;
        let mut hi: Option<(BigRational, bool)> = None;
        for row in &stages[j] {
            let cj = &row.coeffs[j];
            let mut bound = row.rhs.clone();
            for k in 0..j {
                bound -= &row.coeffs[k] * &witness[k];
            }
            bound /= cj;
            if cj.is_positive() {
                match &hi {
                    Some((b, s)) if *b < bound || (*b == bound && (*s || !row.strict)) => {}
                    _ => hi = Some((bound, row.strict)),
                }
            } else {
                match &lo {
                    Some((b, s)) if *b > bound || (*b == bound && (*s || !row.strict)) => {}
                    _ => lo = Some((bound, row.strict)),
                }
            }
        }
        witness[j] = match (&lo, &hi) {
            (None, None) => BigRational::zero(),
            (Some((l, _)), None) => l + BigRational::one(),
            (None, Some((h, _))) => h - BigRational::one(),
            (Some((l, _)), Some((h, _))) => {
                // Completeness of the elimination guarantees l <= h, with
                // equality only when both bounds are non-strict.
                if l < h {
                    (l + h) / BigRational::from_integer(2.into())
                } else {
                    l.clone()
                }
            }
        };
    }

    Ok(FmResult::Feasible(
        witness
            .iter()
            .map(|w| w.to_f64().expect("rational fits f64"))
            .collect(),
    ))
}
