//! Ground-truth oracles: exact Walsh-Fourier coefficient tables by
//! enumeration, Monte-Carlo expectation estimates, an exact linear-arithmetic
//! feasibility check, and brute-force satisfiability for small instances.
//!
//! Everything in this module trades scalability for trustworthiness; the
//! solver proper never calls it, tests do.

mod brute;
mod fm;

pub use brute::{brute_force_sat, SatResult};
pub use fm::{fm_feasible, FmResult, LinearIneq, FM_MAX_VARS};

use crate::model::{eval_constraint, Atom, Constraint, SlotInfo, VarRef};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Enumeration guard for coefficient tables.
pub const WFE_MAX_SLOTS: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("constraint has {slots} literal slots, exceeding the enumeration limit of {max}")]
    SlotLimitExceeded { slots: usize, max: usize },
    #[error("system has {vars} real variables, exceeding the elimination limit of {max}")]
    VariableLimitExceeded { vars: usize, max: usize },
    #[error("instance exceeds oracle limits: {0}")]
    SizeLimitExceeded(String),
}

/// Sparse table of extended Walsh-Fourier coefficients of one constraint.
///
/// Entries are keyed by a pair of bitmasks over the constraint's slots:
/// `S` over Boolean-variable slots and `T` over atom slots. The table is the
/// unique multilinear representation of the constraint in the ±1 signs of its
/// distinct variables; literal negation is part of the represented function,
/// not of the slot encoding.
#[derive(Clone, Debug)]
pub struct WfeTable {
    /// Distinct variables in canonical order (Booleans first).
    pub slots: Vec<SlotInfo>,
    pub n_bool_slots: usize,
    pub n_atom_slots: usize,
    /// `(S, T, coefficient)` with exact zeros omitted.
    pub entries: Vec<(u32, u32, f64)>,
}

impl WfeTable {
    /// Sum of squared coefficients; equals 1 for every ±1-valued constraint
    /// (Parseval).
    pub fn coefficient_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, _, c)| c * c).sum()
    }

    /// Evaluates the multilinear polynomial at per-slot sign values
    /// (Booleans first, then atoms, matching `slots`).
    pub fn eval_at(&self, slot_values: &[f64]) -> f64 {
        let (a, d) = slot_values.split_at(self.n_bool_slots);
        xwfe_expectation(self, a, d)
    }
}

/// Computes the exact coefficient table of a constraint by enumerating all
/// slot valuations and applying a Walsh-Hadamard transform.
pub fn wfe_coefficients(c: &Constraint) -> Result<WfeTable, OracleError> {
    let slots = c.slot_infos();
    let len = slots.len();
    if len > WFE_MAX_SLOTS {
        return Err(OracleError::SlotLimitExceeded {
            slots: len,
            max: WFE_MAX_SLOTS,
        });
    }
    let n_bool_slots = slots
        .iter()
        .filter(|s| matches!(s.var, VarRef::Bool(_)))
        .count();
    let n_atom_slots = len - n_bool_slots;

    // Value of the constraint at every slot valuation. Bit i set in the index
    // means slot i carries the sign -1 (True).
    let size = 1usize << len;
    let mut values = vec![0.0f64; size];
    let slot_of = |var: VarRef| slots.iter().position(|s| s.var == var).unwrap();
    for (idx, value) in values.iter_mut().enumerate() {
        let sign = |var: VarRef| {
            if idx >> slot_of(var) & 1 == 1 {
                crate::model::TRUE_SIGN
            } else {
                -crate::model::TRUE_SIGN
            }
        };
        *value = c.eval_with(&|i| sign(VarRef::Bool(i)), &|id| sign(VarRef::Atom(id)));
    }

    // In-place Walsh-Hadamard transform: after the pass, values[mask] holds
    // sum over valuations z of f(z) * prod_{i in mask} z_i.
    let mut h = 1;
    while h < size {
        for block in (0..size).step_by(2 * h) {
            for i in block..block + h {
                let (u, v) = (values[i], values[i + h]);
                values[i] = u + v;
                values[i + h] = u - v;
            }
        }
        h *= 2;
    }

    let scale = 1.0 / size as f64;
    let bool_mask = (1u32 << n_bool_slots) - 1;
    let mut entries = Vec::new();
    for (mask, &sum) in values.iter().enumerate() {
        let coeff = sum * scale;
        if coeff != 0.0 {
            let mask = mask as u32;
            entries.push((mask & bool_mask, mask >> n_bool_slots, coeff));
        }
    }
    Ok(WfeTable {
        slots,
        n_bool_slots,
        n_atom_slots,
        entries,
    })
}

/// Expectation of the constraint under independent relaxed slot values:
/// `sum over (S,T) of coeff * prod_{i in S} a[i] * prod_{i in T} d[i]`.
pub fn xwfe_expectation(table: &WfeTable, a_slots: &[f64], d_slots: &[f64]) -> f64 {
    assert_eq!(a_slots.len(), table.n_bool_slots, "boolean slot count");
    assert_eq!(d_slots.len(), table.n_atom_slots, "atom slot count");
    let mut total = 0.0;
    for &(s, t, coeff) in &table.entries {
        let mut term = coeff;
        let mut s = s;
        while s != 0 {
            let i = s.trailing_zeros() as usize;
            term *= a_slots[i];
            s &= s - 1;
        }
        let mut t = t;
        while t != 0 {
            let i = t.trailing_zeros() as usize;
            term *= d_slots[i];
            t &= t - 1;
        }
        total += term;
    }
    total
}

/// Monte-Carlo estimate of `E[f_c]` under randomized rounding of the
/// Booleans at `a` and Gaussian sampling of the reals at `N(b, sigma^2 I)`.
/// Returns `(mean, standard error)`; deterministic for a given seed.
pub fn mc_expectation(
    c: &Constraint,
    atoms: &[Atom],
    a: &[f64],
    b: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    assert!(samples >= 1, "at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0f64; a.len()];
    let mut y = b.to_vec();
    let mut sum = 0.0f64;
    for _ in 0..samples {
        for (xi, &ai) in x.iter_mut().zip(a) {
            let p_true = (1.0 - ai) / 2.0;
            *xi = crate::model::sign_from_bool(rng.gen::<f64>() < p_true);
        }
        if sigma > 0.0 {
            for (yj, &bj) in y.iter_mut().zip(b) {
                let z: f64 = rng.sample(StandardNormal);
                *yj = bj + sigma * z;
            }
        }
        sum += eval_constraint(c, atoms, &x, &y);
    }
    let n = samples as f64;
    let mean = sum / n;
    // Values are ±1, so the sample variance is n(1 - mean^2)/(n - 1).
    let stderr = if samples > 1 {
        (n * (1.0 - mean * mean).max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    (mean, stderr)
}
