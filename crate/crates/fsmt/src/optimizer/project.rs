//! Euclidean projection onto the feasible set: the box `[-1,1]^n` for the
//! Boolean relaxations and the intersection of unit-atom halfspaces
//! `{q·b <= q0}` for the reals. The quadratic projection problem separates
//! over `a` and `b`; the box part is a componentwise clamp, the halfspace
//! part is analytic for one halfspace and Dykstra's alternating projections
//! for several. Strict unit atoms are projected onto their closure.

use super::{Evaluator, Point};
use crate::model::Formula;

#[derive(Clone, Debug)]
struct Halfspace {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    norm_sq: f64,
}

impl Halfspace {
    fn violation(&self, b: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, q)| q * b[j]).sum::<f64>() - self.rhs
    }

    /// Projects `b` onto the halfspace in place.
    fn project(&self, b: &mut [f64]) {
        let v = self.violation(b);
        if v > 0.0 {
            let scale = v / self.norm_sq;
            for &(j, q) in &self.coeffs {
                b[j] -= scale * q;
            }
        }
    }
}

/// Projector built from a formula's unit atomic constraints.
pub struct Projector {
    halfspaces: Vec<Halfspace>,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Projector {
    pub fn from_formula(f: &Formula) -> Projector {
        let mut ids = f.unit_atoms();
        ids.sort_unstable();
        ids.dedup();
        let halfspaces = ids
            .into_iter()
            .map(|id| {
                let atom = &f.atoms[id];
                Halfspace {
                    coeffs: atom.coeffs.clone(),
                    rhs: atom.rhs,
                    norm_sq: atom.coeffs.iter().map(|&(_, q)| q * q).sum(),
                }
            })
            .collect();
        Projector {
            halfspaces,
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }

    pub fn halfspace_count(&self) -> usize {
        self.halfspaces.len()
    }

    /// Projects in place; returns false when Dykstra hit the sweep cap
    /// without converging (the last iterate is kept).
    pub fn project_in_place(&self, a: &mut [f64], b: &mut [f64]) -> bool {
        for ai in a.iter_mut() {
            *ai = ai.clamp(-1.0, 1.0);
        }
        match self.halfspaces.len() {
            0 => true,
            1 => {
                self.halfspaces[0].project(b);
                true
            }
            _ => self.dykstra(b),
        }
    }

    /// Dykstra's alternating projections with per-set correction vectors.
    fn dykstra(&self, b: &mut [f64]) -> bool {
        let m = b.len();
        let mut corrections = vec![vec![0.0f64; m]; self.halfspaces.len()];
        let mut prev = vec![0.0f64; m];
        for _ in 0..self.max_sweeps {
            prev.copy_from_slice(b);
            for (h, e) in self.halfspaces.iter().zip(corrections.iter_mut()) {
                // y = x + e; x = P(y); e = y - x. Corrections touch only the
                // halfspace's support, so the updates stay sparse.
                for &(j, _) in &h.coeffs {
                    b[j] += e[j];
                }
                let v = h.violation(b);
                let scale = if v > 0.0 { v / h.norm_sq } else { 0.0 };
                for &(j, q) in &h.coeffs {
                    let y = b[j];
                    b[j] -= scale * q;
                    e[j] = y - b[j];
                }
            }
            let change = b
                .iter()
                .zip(&prev)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            if change <= self.tol {
                return true;
            }
        }
        false
    }

    /// Projects a copy of the point.
    pub fn project(&self, pt: &Point) -> Point {
        let mut out = pt.clone();
        self.project_in_place(&mut out.a, &mut out.b);
        out
    }

    /// Worst halfspace violation at `b` (0 when feasible).
    pub fn max_violation(&self, b: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.violation(b).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Projected gradient mapping `g = (pt - proj(pt - eta * grad)) / eta`
/// (Booleans first, then reals); its squared norm below `eps^2` is the
/// stopping test.
pub fn grad_mapping(
    ev: &Evaluator,
    proj: &Projector,
    pt: &Point,
    sigma: f64,
    weights: &[f64],
    eta: f64,
) -> Vec<f64> {
    assert!(eta > 0.0);
    let (_, ga, gb) = ev.objective_and_gradient(pt, sigma, weights);
    let mut moved = Point {
        a: pt.a.iter().zip(&ga).map(|(x, g)| x - eta * g).collect(),
        b: pt.b.iter().zip(&gb).map(|(x, g)| x - eta * g).collect(),
    };
    proj.project_in_place(&mut moved.a, &mut moved.b);
    let mut g = Vec::with_capacity(pt.dim());
    g.extend(pt.a.iter().zip(&moved.a).map(|(x, y)| (x - y) / eta));
    g.extend(pt.b.iter().zip(&moved.b).map(|(x, y)| (x - y) / eta));
    g
}
