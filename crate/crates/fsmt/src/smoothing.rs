//! Maps relaxed variables to slot probabilities: randomized-rounding
//! probabilities for Booleans and Gaussian-smoothed atom indicators with
//! their gradients for the reals.
//!
//! For an atom `q·y <= q0` the smoothed indicator at mean `b` is
//! `d(b) = erf((q·b - q0) / (sqrt(2) ||q|| sigma))`, the expectation of the
//! ±1 indicator under `y ~ N(b, sigma^2 I)`. Strictness is ignored here
//! (the boundary has measure zero under sampling); sigma = 0 is a hard mode
//! switch to exact evaluation, not a limit.

use crate::model::{eval_atom, Atom};

/// Probability that a Boolean rounds to True from its relaxed value:
/// `(1 - a) / 2`.
#[inline]
pub fn round_prob(a: f64) -> f64 {
    assert!(
        (-1.0..=1.0).contains(&a),
        "relaxed value {a} outside [-1, 1]"
    );
    (1.0 - a) / 2.0
}

/// Smoothed ±1 indicator of an atom. `sigma = 0` returns the exact sign.
pub fn atom_smooth(atom: &Atom, b: &[f64], sigma: f64) -> f64 {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return eval_atom(atom, b);
    }
    let z = atom.margin(b);
    libm::erf(z / (std::f64::consts::SQRT_2 * atom.norm() * sigma))
}

/// Sparse gradient of [`atom_smooth`] with respect to `b`; support equals
/// the atom's coefficient support. Requires `sigma > 0`.
pub fn atom_smooth_grad(atom: &Atom, b: &[f64], sigma: f64) -> Vec<(usize, f64)> {
    assert!(sigma > 0.0, "gradient undefined at sigma = 0");
    let norm = atom.norm();
    let z = atom.margin(b);
    let common = std::f64::consts::SQRT_2 / (std::f64::consts::PI.sqrt() * sigma * norm)
        * (-z * z / (2.0 * sigma * sigma * norm * norm)).exp();
    atom.coeffs.iter().map(|&(j, q)| (j, common * q)).collect()
}

/// A smoothed atom bundled with the pieces the optimizer reuses.
#[derive(Clone, Debug)]
pub struct SmoothedAtom {
    /// `q·b - q0`.
    pub mean_arg: f64,
    /// `sqrt(2) ||q|| sigma`.
    pub scale: f64,
    pub d: f64,
    pub grad: Vec<(usize, f64)>,
}

/// Computes value and gradient together (`sigma > 0`).
pub fn smooth_atom(atom: &Atom, b: &[f64], sigma: f64) -> SmoothedAtom {
    assert!(sigma > 0.0, "smooth_atom requires sigma > 0");
    let z = atom.margin(b);
    let scale = std::f64::consts::SQRT_2 * atom.norm() * sigma;
    SmoothedAtom {
        mean_arg: z,
        scale,
        d: libm::erf(z / scale),
        grad: atom_smooth_grad(atom, b, sigma),
    }
}

/// Half-width of the transition region for a normalized atom (`||q|| = 1`,
/// unit coefficient): outside `|z| >= w` the smoothed gradient is at most
/// `1/beta`. Zero when the bound holds everywhere.
pub fn transition_halfwidth(sigma: f64, beta: f64) -> f64 {
    let arg = 2.0 * beta * beta / (std::f64::consts::PI * sigma * sigma);
    if arg <= 1.0 {
        0.0
    } else {
        (sigma * sigma * arg.ln()).sqrt()
    }
}
