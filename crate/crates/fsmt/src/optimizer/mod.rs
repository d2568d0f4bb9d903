//! Smoothed-objective assembly and its gradient, projection onto the
//! feasible set, projected gradient descent, and the annealing /
//! weight-adaptation outer loop.

mod anneal;
mod project;

pub use anneal::{
    anneal_solve, default_sigma_schedule, pgd, EtaMode, PgdResult, SolveOutcome, SolveReport,
    SolverConfig, StageLog, WeightState,
};
pub use project::{grad_mapping, Projector};

use crate::model::{Formula, SlotInfo, VarRef};
use crate::smoothing::{atom_smooth, round_prob, smooth_atom};
use crate::xbdd::{self, Xbdd, XbddError};
use rayon::prelude::*;

/// A relaxed assignment: `a` in the box `[-1,1]^n`, `b` in `R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Point {
    pub fn dim(&self) -> usize {
        self.a.len() + self.b.len()
    }
}

/// Which machinery evaluates each constraint's satisfaction probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BackendChoice {
    /// Symmetric dynamic programming where possible, diagrams elsewhere.
    #[default]
    Auto,
    /// Compiled decision diagrams for every constraint.
    Xbdd,
    /// Symmetric dynamic programming where possible (same fallback as Auto).
    Symmetric,
}

impl std::str::FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(BackendChoice::Auto),
            "xbdd" => Ok(BackendChoice::Xbdd),
            "symmetric" => Ok(BackendChoice::Symmetric),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

enum Backend {
    Diagram(Xbdd),
    Symmetric {
        kind: crate::model::SymKind,
        slots: Vec<SlotInfo>,
    },
}

impl Backend {
    fn slots(&self) -> &[SlotInfo] {
        match self {
            Backend::Diagram(d) => d.slots(),
            Backend::Symmetric { slots, .. } => slots,
        }
    }
}

/// Per-constraint evaluation state shared by objective and gradient calls.
/// Immutable once built; evaluations may run concurrently.
pub struct Evaluator<'f> {
    formula: &'f Formula,
    backends: Vec<Backend>,
}

/// Constraint count below which evaluation stays serial.
const PAR_THRESHOLD: usize = 64;

impl<'f> Evaluator<'f> {
    pub fn new(
        formula: &'f Formula,
        choice: BackendChoice,
        node_budget: usize,
    ) -> Result<Evaluator<'f>, XbddError> {
        let mut backends = Vec::with_capacity(formula.constraints.len());
        for c in &formula.constraints {
            let slots = c.slot_infos();
            let symmetric_ok = match &c.body {
                crate::model::Body::Symmetric { literals, .. } => {
                    // The DP path treats literals as independent; it needs
                    // one occurrence per variable.
                    literals.len() == slots.len()
                }
                crate::model::Body::Expr(_) => false,
            };
            let use_symmetric = symmetric_ok && !matches!(choice, BackendChoice::Xbdd);
            if use_symmetric {
                let crate::model::Body::Symmetric { kind, .. } = &c.body else {
                    unreachable!()
                };
                backends.push(Backend::Symmetric {
                    kind: *kind,
                    slots,
                });
            } else {
                backends.push(Backend::Diagram(xbdd::compile_ordered(c, slots, node_budget)?));
            }
        }
        Ok(Evaluator { formula, backends })
    }

    pub fn formula(&self) -> &Formula {
        self.formula
    }

    /// Diagram backends, for DOT dumps.
    pub fn diagrams(&self) -> impl Iterator<Item = (usize, &Xbdd)> {
        self.backends.iter().enumerate().filter_map(|(i, b)| match b {
            Backend::Diagram(d) => Some((i, d)),
            Backend::Symmetric { .. } => None,
        })
    }

    fn smoothed_d(&self, b: &[f64], sigma: f64) -> Vec<f64> {
        self.formula
            .atoms
            .iter()
            .map(|atom| atom_smooth(atom, b, sigma))
            .collect()
    }

    fn slot_probs_into(slots: &[SlotInfo], a: &[f64], d: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(slots.iter().map(|s| {
            let raw = match s.var {
                VarRef::Bool(i) => a[i],
                VarRef::Atom(id) => d[id],
            };
            round_prob(if s.negated { -raw } else { raw })
        }));
    }

    fn constraint_expectation(&self, ci: usize, a: &[f64], d: &[f64], ws: &mut Workspace) -> f64 {
        let backend = &self.backends[ci];
        Self::slot_probs_into(backend.slots(), a, d, &mut ws.p);
        let sat = match backend {
            Backend::Diagram(diag) => {
                xbdd::forward_into(diag, &ws.p, &mut ws.m_td).expect("slot count fixed at compile")
            }
            Backend::Symmetric { kind, .. } => xbdd::symmetric_sat_prob(*kind, &ws.p),
        };
        1.0 - 2.0 * sat
    }

    /// Expectation of constraint `ci` and its per-slot satisfaction
    /// gradients, the latter left in `ws.slot_grad`.
    fn constraint_grad(&self, ci: usize, a: &[f64], d: &[f64], ws: &mut Workspace) -> f64 {
        let backend = &self.backends[ci];
        Self::slot_probs_into(backend.slots(), a, d, &mut ws.p);
        match backend {
            Backend::Diagram(diag) => {
                let sat = xbdd::forward_into(diag, &ws.p, &mut ws.m_td)
                    .expect("slot count fixed at compile");
                xbdd::backward_into(diag, &ws.p, &ws.m_td, &mut ws.m_bu, &mut ws.slot_grad)
                    .expect("messages are fresh");
                1.0 - 2.0 * sat
            }
            Backend::Symmetric { kind, .. } => {
                let (sat, grad) = xbdd::symmetric_cop(*kind, &ws.p);
                ws.slot_grad.clear();
                ws.slot_grad.extend_from_slice(&grad);
                1.0 - 2.0 * sat
            }
        }
    }

    /// Applies one constraint's contribution to the accumulators.
    /// dE/dp = -2 g and dp/dv = -(1/2) times the slot polarity, so dE/dv
    /// reduces to the signed sat-probability gradient.
    fn accumulate(&self, ci: usize, w: f64, slot_grad: &[f64], ga: &mut [f64], atom_coef: &mut [f64]) {
        for (s, info) in self.backends[ci].slots().iter().enumerate() {
            let sign = if info.negated { -1.0 } else { 1.0 };
            let dv = w * sign * slot_grad[s];
            match info.var {
                VarRef::Bool(i) => ga[i] += dv,
                VarRef::Atom(id) => atom_coef[id] += dv,
            }
        }
    }

    /// `C_sigma(a, b) = sum_c w_c (1 - 2 sat_prob_c)`. At `sigma = 0` the
    /// atom slots carry exact ±1 indicators and the value coincides with
    /// the discrete objective at Boolean vertices.
    pub fn objective(&self, pt: &Point, sigma: f64, weights: &[f64]) -> f64 {
        assert_eq!(weights.len(), self.backends.len());
        let d = self.smoothed_d(&pt.b, sigma);
        if self.backends.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
            // Parallel reduction order drifts by at most ~1e-12; the serial
            // path below is the bit-reproducible one.
            (0..self.backends.len())
                .into_par_iter()
                .map_init(Workspace::default, |ws, ci| {
                    weights[ci] * self.constraint_expectation(ci, &pt.a, &d, ws)
                })
                .sum()
        } else {
            let mut ws = Workspace::default();
            (0..self.backends.len())
                .map(|ci| weights[ci] * self.constraint_expectation(ci, &pt.a, &d, &mut ws))
                .sum()
        }
    }

    /// Objective value together with its gradient with respect to `(a, b)`,
    /// written into caller-owned buffers. Requires `sigma > 0`.
    pub fn objective_and_gradient_into(
        &self,
        pt: &Point,
        sigma: f64,
        weights: &[f64],
        ws: &mut Workspace,
        ga: &mut Vec<f64>,
        gb: &mut Vec<f64>,
    ) -> f64 {
        assert!(sigma > 0.0, "gradient undefined at sigma = 0");
        assert_eq!(weights.len(), self.backends.len());
        let smoothed: Vec<crate::smoothing::SmoothedAtom> = self
            .formula
            .atoms
            .iter()
            .map(|atom| smooth_atom(atom, &pt.b, sigma))
            .collect();
        let d: Vec<f64> = smoothed.iter().map(|s| s.d).collect();

        ga.clear();
        ga.resize(self.formula.n_bool, 0.0);
        let mut objective = 0.0;
        let mut atom_coef = vec![0.0; self.formula.atoms.len()];
        if self.backends.len() >= PAR_THRESHOLD && rayon::current_num_threads() > 1 {
            let n_bool = self.formula.n_bool;
            let n_atoms = self.formula.atoms.len();
            let (obj, part_ga, part_coef) = (0..self.backends.len())
                .into_par_iter()
                .fold(
                    || (0.0f64, vec![0.0; n_bool], vec![0.0; n_atoms], Workspace::default()),
                    |(mut obj, mut ga, mut coef, mut ws), ci| {
                        let e = self.constraint_grad(ci, &pt.a, &d, &mut ws);
                        obj += weights[ci] * e;
                        let grad = std::mem::take(&mut ws.slot_grad);
                        self.accumulate(ci, weights[ci], &grad, &mut ga, &mut coef);
                        ws.slot_grad = grad;
                        (obj, ga, coef, ws)
                    },
                )
                .map(|(obj, ga, coef, _)| (obj, ga, coef))
                .reduce(
                    || (0.0, vec![0.0; n_bool], vec![0.0; n_atoms]),
                    |(o1, mut g1, mut c1), (o2, g2, c2)| {
                        for (x, y) in g1.iter_mut().zip(&g2) {
                            *x += y;
                        }
                        for (x, y) in c1.iter_mut().zip(&c2) {
                            *x += y;
                        }
                        (o1 + o2, g1, c1)
                    },
                );
            objective = obj;
            ga.copy_from_slice(&part_ga);
            atom_coef.copy_from_slice(&part_coef);
        } else {
            for ci in 0..self.backends.len() {
                let e = self.constraint_grad(ci, &pt.a, &d, ws);
                objective += weights[ci] * e;
                let grad = std::mem::take(&mut ws.slot_grad);
                self.accumulate(ci, weights[ci], &grad, ga, &mut atom_coef);
                ws.slot_grad = grad;
            }
        }
        gb.clear();
        gb.resize(self.formula.n_real, 0.0);
        for (id, coef) in atom_coef.iter().enumerate() {
            if *coef != 0.0 {
                for &(j, g) in &smoothed[id].grad {
                    gb[j] += coef * g;
                }
            }
        }
        objective
    }

    /// Allocating wrapper around [`Evaluator::objective_and_gradient_into`].
    pub fn objective_and_gradient(
        &self,
        pt: &Point,
        sigma: f64,
        weights: &[f64],
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let mut ws = Workspace::default();
        let mut ga = Vec::new();
        let mut gb = Vec::new();
        let obj = self.objective_and_gradient_into(pt, sigma, weights, &mut ws, &mut ga, &mut gb);
        (obj, ga, gb)
    }
}

/// Reusable scratch buffers for constraint evaluations; one per thread.
#[derive(Default)]
pub struct Workspace {
    p: Vec<f64>,
    m_td: Vec<f64>,
    m_bu: Vec<f64>,
    slot_grad: Vec<f64>,
}

/// Convenience wrapper matching the operation contract; builds a fresh
/// evaluator per call. Use [`Evaluator`] directly in loops.
pub fn objective(f: &Formula, pt: &Point, sigma: f64, weights: &[f64]) -> f64 {
    Evaluator::new(f, BackendChoice::Auto, xbdd::DEFAULT_NODE_BUDGET)
        .expect("default budget suffices")
        .objective(pt, sigma, weights)
}

/// Convenience wrapper; returns `(d/da, d/db)` of the smoothed objective.
pub fn gradient(f: &Formula, pt: &Point, sigma: f64, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (_, ga, gb) = Evaluator::new(f, BackendChoice::Auto, xbdd::DEFAULT_NODE_BUDGET)
        .expect("default budget suffices")
        .objective_and_gradient(pt, sigma, weights);
    (ga, gb)
}

/// Structure-dependent inputs to the Lipschitz constants that do not change
/// across stages.
#[derive(Clone, Copy, Debug)]
pub struct LipschitzProfile {
    /// Max occurrences of any single real variable within one constraint
    /// (counting repeated atom literals).
    pub beta: f64,
    pub n: usize,
    pub m: usize,
}

impl LipschitzProfile {
    pub fn of(f: &Formula) -> LipschitzProfile {
        let mut beta = 0usize;
        for c in &f.constraints {
            let mut counts = std::collections::HashMap::new();
            c.for_each_literal(|lit| {
                if let VarRef::Atom(id) = lit.var {
                    for &(j, _) in &f.atoms[id].coeffs {
                        *counts.entry(j).or_insert(0usize) += 1;
                    }
                }
            });
            beta = beta.max(counts.values().copied().max().unwrap_or(0));
        }
        LipschitzProfile {
            beta: beta as f64,
            n: f.n_bool,
            m: f.n_real,
        }
    }

    /// `(rho, L)` for weight mass `alpha` at sampling parameter `sigma`:
    /// `gamma = sqrt(2) beta / (sqrt(pi) sigma)`,
    /// `rho = alpha sqrt(n+m) max(1, gamma)`, `L = sqrt(n + m gamma^2) rho`.
    pub fn constants(&self, alpha: f64, sigma: f64) -> (f64, f64) {
        assert!(sigma > 0.0);
        let gamma = std::f64::consts::SQRT_2 * self.beta / (std::f64::consts::PI.sqrt() * sigma);
        let rho = alpha * ((self.n + self.m) as f64).sqrt() * gamma.max(1.0);
        let l = (self.n as f64 + self.m as f64 * gamma * gamma).sqrt() * rho;
        (rho, l)
    }
}

/// Function- and gradient-Lipschitz constants of the smoothed objective.
pub fn lipschitz_constants(f: &Formula, sigma: f64) -> (f64, f64) {
    LipschitzProfile::of(f).constants(f.total_weight(), sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_instance, TRUE_SIGN};

    fn unit_weights(f: &Formula) -> Vec<f64> {
        vec![1.0; f.constraints.len()]
    }

    fn xor_and_instance() -> Formula {
        parse_instance(
            "p hsmt 1 1\na 0 < 0 0:-1\ne 1 (xor (not b0) a0)\ne 1 (and b0 a0)",
        )
        .unwrap()
    }

    #[test]
    fn objective_xor_and_at_global_minimum() {
        let f = xor_and_instance();
        let pt = Point {
            a: vec![TRUE_SIGN],
            b: vec![1.0],
        };
        // Exact mode.
        assert_eq!(objective(&f, &pt, 0.0, &unit_weights(&f)), -2.0);
        // Small sigma approaches the exact value.
        let near = objective(&f, &pt, 1e-3, &unit_weights(&f));
        assert!((near + 2.0).abs() < 1e-9, "{near}");
    }

    #[test]
    fn objective_huge_sigma_washes_out_atoms() {
        let f = xor_and_instance();
        let pt = Point {
            a: vec![0.3],
            b: vec![0.7],
        };
        let washed = objective(&f, &pt, 1e6, &unit_weights(&f));
        // All atom slots at p = 1/2: recompute with d = 0 by hand.
        // xor(not b0, a0): E = -a*d = 0; and(b0, a0): E = (1 + a + d - a*d)/2.
        let a = 0.3;
        let expect = 0.0 + (1.0 + a) / 2.0;
        assert!((washed - expect).abs() < 1e-6, "{washed} vs {expect}");
    }

    #[test]
    fn objective_or_matches_spectral_oracle() {
        let f = parse_instance("p hsmt 2 0\nc or 1 +b0 +b1").unwrap();
        let pt = Point {
            a: vec![0.0, 0.0],
            b: vec![],
        };
        let v = objective(&f, &pt, 1.0, &unit_weights(&f));
        assert!((v + 0.5).abs() < 1e-15);
        let table = crate::spectral::wfe_coefficients(&f.constraints[0]).unwrap();
        let oracle = crate::spectral::xwfe_expectation(&table, &[0.0, 0.0], &[]);
        assert!((v - oracle).abs() < 1e-15);
    }

    #[test]
    fn gradient_closed_forms() {
        // Single positive Boolean literal: E[f] = a, so dC/da = 1.
        let f = parse_instance("p hsmt 1 0\nc or 1 +b0").unwrap();
        let pt = Point {
            a: vec![0.0],
            b: vec![],
        };
        let (ga, _) = gradient(&f, &pt, 1.0, &unit_weights(&f));
        assert!((ga[0] - 1.0).abs() < 1e-15);

        // Single atom constraint y0 <= 0 at b = 0, sigma = 1: dC/db =
        // d'(0) = sqrt(2/pi).
        let f = parse_instance("p hsmt 0 1\na 0 <= 0 0:1\ne 1 a0").unwrap();
        let pt = Point {
            a: vec![],
            b: vec![0.0],
        };
        let (_, gb) = gradient(&f, &pt, 1.0, &unit_weights(&f));
        let expected = std::f64::consts::SQRT_2 / std::f64::consts::PI.sqrt();
        assert!((gb[0] - expected).abs() < 1e-15, "{}", gb[0]);
    }

    #[test]
    fn unused_variable_has_zero_gradient() {
        let f = parse_instance("p hsmt 2 0\nc or 1 +b0").unwrap();
        let pt = Point {
            a: vec![0.2, -0.4],
            b: vec![],
        };
        let (ga, _) = gradient(&f, &pt, 1.0, &unit_weights(&f));
        assert_eq!(ga[1], 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_mixed() {
        use rand::{Rng, SeedableRng};
        let f = parse_instance(
            "p hsmt 3 2\n\
             a 0 <= 0.5 0:1 1:-2\n\
             a 1 > -0.25 1:3\n\
             c or 1 +b0 -a0\n\
             c card 1 2 +b1 +b2 +a1\n\
             e 0.5 (xor b0 (and b1 a0) (not a1))",
        )
        .unwrap();
        let ev = Evaluator::new(&f, BackendChoice::Auto, crate::xbdd::DEFAULT_NODE_BUDGET).unwrap();
        let w = unit_weights(&f);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..10 {
            let pt = Point {
                a: (0..3).map(|_| rng.gen_range(-0.9..0.9)).collect(),
                b: (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            };
            let sigma = rng.gen_range(0.4..2.0);
            let (_, ga, gb) = ev.objective_and_gradient(&pt, sigma, &w);
            for i in 0..3 {
                let mut p = pt.clone();
                p.a[i] += h;
                let up = ev.objective(&p, sigma, &w);
                p.a[i] -= 2.0 * h;
                let dn = ev.objective(&p, sigma, &w);
                let fd = (up - dn) / (2.0 * h);
                assert!((ga[i] - fd).abs() <= 1e-6 * ga[i].abs().max(1.0), "a{i}: {} vs {fd}", ga[i]);
            }
            for j in 0..2 {
                let mut p = pt.clone();
                p.b[j] += h;
                let up = ev.objective(&p, sigma, &w);
                p.b[j] -= 2.0 * h;
                let dn = ev.objective(&p, sigma, &w);
                let fd = (up - dn) / (2.0 * h);
                assert!((gb[j] - fd).abs() <= 1e-6 * gb[j].abs().max(1.0), "b{j}: {} vs {fd}", gb[j]);
            }
        }
    }

    #[test]
    fn backends_agree() {
        let f = parse_instance(
            "p hsmt 4 1\na 0 <= 0 0:2\nc card 1 1 +b0 -b1 +a0\nc nae 2 +b2 +b3 -a0\nc xor 1 +b0 +b3",
        )
        .unwrap();
        let w = unit_weights(&f);
        let auto = Evaluator::new(&f, BackendChoice::Auto, 1 << 20).unwrap();
        let via_bdd = Evaluator::new(&f, BackendChoice::Xbdd, 1 << 20).unwrap();
        let pt = Point {
            a: vec![0.3, -0.2, 0.8, -0.6],
            b: vec![0.4],
        };
        let (o1, ga1, gb1) = auto.objective_and_gradient(&pt, 0.7, &w);
        let (o2, ga2, gb2) = via_bdd.objective_and_gradient(&pt, 0.7, &w);
        assert!((o1 - o2).abs() < 1e-12);
        for (x, y) in ga1.iter().zip(&ga2) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in gb1.iter().zip(&gb2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_formulas() {
        // Large sigma: gamma < 1, so rho = alpha sqrt(n+m) and L ~ sqrt(n) rho.
        let f = xor_and_instance();
        let (rho, l) = lipschitz_constants(&f, 1e9);
        let alpha = 2.0;
        assert!((rho - alpha * (2.0f64).sqrt()).abs() < 1e-9);
        assert!((l - (1.0f64).sqrt() * rho).abs() < 1e-6);

        // Doubling the weights doubles both constants.
        let mut g = xor_and_instance();
        for c in &mut g.constraints {
            c.weight *= 2.0;
        }
        let (rho1, l1) = lipschitz_constants(&f, 0.8);
        let (rho2, l2) = lipschitz_constants(&g, 0.8);
        assert!((rho2 - 2.0 * rho1).abs() < 1e-12);
        assert!((l2 - 2.0 * l1).abs() < 1e-12);

        // Re-derive gamma independently for a hand case: alpha=2, n=m=1,
        // beta=1, sigma = sqrt(pi/2) gives gamma = 2/pi.
        let sigma = (std::f64::consts::PI / 2.0).sqrt();
        let gamma = 2.0 / std::f64::consts::PI;
        let (rho, l) = lipschitz_constants(&f, sigma);
        let rho_expect = 2.0 * (2.0f64).sqrt() * gamma.max(1.0);
        assert!((rho - rho_expect).abs() < 1e-12);
        let l_expect = (1.0 + gamma * gamma).sqrt() * rho_expect;
        assert!((l - l_expect).abs() < 1e-12);
    }
}
