//! Deterministic benchmark generators (random hybrid constraints,
//! continuous-time scheduling, 3D placement) and domain verifiers that check
//! scheduling/placement witnesses against the original rules rather than
//! through the formula.

mod placement;
mod scheduling;

pub use placement::{
    gen_placement, verify_placement, Module, ModuleKind, PlacementInstance, PlacementSpec,
};
pub use scheduling::{
    gen_scheduling, verify_scheduling, Job, SchedulingInstance, SchedulingSpec,
};

use crate::model::{Assignment, Atom, Body, Constraint, Formula, Literal, Rel, SymKind};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random hybrid-constraint family: cardinality, not-all-equal, and parity
/// constraints over a shared pool of Boolean variables and linear atoms.
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub n: usize,
    pub seed: u64,
}

impl RandomSpec {
    pub fn m_card(&self) -> usize {
        self.n / 5
    }
    pub fn m_nae(&self) -> usize {
        self.n / 5
    }
    pub fn m_xor(&self) -> usize {
        self.n / 50
    }
    pub fn l_card(&self) -> usize {
        50.min(self.n / 5)
    }
    pub fn l_nae(&self) -> usize {
        50.min(self.n / 5)
    }
    pub fn l_xor(&self) -> usize {
        50
    }
}

/// Generates the random family instance: `n` Booleans, `n` reals, `n` atoms
/// (each a 3-variable inequality with coefficients in ±{1,2,3} and a uniform
/// threshold), and the derived constraint counts. Deterministic per seed.
pub fn gen_random(spec: &RandomSpec) -> Result<Formula, String> {
    if spec.n < 50 {
        return Err(format!("random family needs n >= 50, got {}", spec.n));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let atoms: Vec<Atom> = (0..n)
        .map(|id| {
            let vars = sample(&mut rng, n, 3);
            let coeffs: Vec<(usize, f64)> = vars
                .iter()
                .map(|j| {
                    let mag = rng.gen_range(1..=3) as f64;
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (j, mag * sign)
                })
                .collect();
            Atom::from_rel(id, coeffs, Rel::Le, rng.gen_range(-1.0..1.0))
        })
        .collect();

    let draw_literals = |len: usize, rng: &mut ChaCha8Rng| -> Vec<Literal> {
        sample(rng, 2 * n, len)
            .iter()
            .map(|slot| {
                let negated = rng.gen::<bool>();
                if slot < n {
                    Literal::bool_var(slot, negated)
                } else {
                    Literal::atom(slot - n, negated)
                }
            })
            .collect()
    };

    let mut constraints = Vec::new();
    for _ in 0..spec.m_card() {
        let lits = draw_literals(spec.l_card(), &mut rng);
        let k = lits.len() / 2;
        constraints.push(Constraint::new(
            Body::Symmetric {
                kind: SymKind::Card(k),
                literals: lits,
            },
            1.0,
        ));
    }
    for _ in 0..spec.m_nae() {
        let lits = draw_literals(spec.l_nae(), &mut rng);
        constraints.push(Constraint::new(
            Body::Symmetric {
                kind: SymKind::Nae,
                literals: lits,
            },
            1.0,
        ));
    }
    for _ in 0..spec.m_xor() {
        let lits = draw_literals(spec.l_xor(), &mut rng);
        constraints.push(Constraint::new(
            Body::Symmetric {
                kind: SymKind::Xor,
                literals: lits,
            },
            1.0,
        ));
    }

    let formula = Formula {
        n_bool: n,
        n_real: n,
        atoms,
        constraints,
    };
    formula.validate().expect("generator emits valid formulas");
    Ok(formula)
}

/// Interner deduplicating structurally identical atoms during generation.
pub(crate) struct AtomInterner {
    atoms: Vec<Atom>,
    seen: std::collections::HashMap<(Vec<(usize, u64)>, u64, bool), usize>,
}

impl AtomInterner {
    pub(crate) fn new() -> AtomInterner {
        AtomInterner {
            atoms: Vec::new(),
            seen: std::collections::HashMap::new(),
        }
    }

    pub(crate) fn intern(&mut self, coeffs: Vec<(usize, f64)>, rel: Rel, rhs: f64) -> usize {
        let atom = Atom::from_rel(self.atoms.len(), coeffs, rel, rhs);
        let key = (
            atom.coeffs.iter().map(|&(j, c)| (j, c.to_bits())).collect(),
            atom.rhs.to_bits(),
            atom.strict,
        );
        if let Some(&id) = self.seen.get(&key) {
            return id;
        }
        let id = atom.id;
        self.seen.insert(key, atom.id);
        self.atoms.push(atom);
        id
    }

    pub(crate) fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }
}

/// A domain-rule violation report; empty means the witness obeys every rule.
#[derive(Clone, Debug, Default)]
pub struct DomainReport {
    pub violations: Vec<String>,
}

impl DomainReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(msg());
        }
    }
}

/// Generated instance families with enough metadata for domain checking.
pub enum DomainInstance {
    Scheduling(SchedulingInstance),
    Placement(PlacementInstance),
}

/// Checks an assignment directly against the family's domain rules; must
/// agree with `eval_formula`'s satisfaction verdict.
pub fn verify_domain(inst: &DomainInstance, asg: &Assignment) -> DomainReport {
    match inst {
        DomainInstance::Scheduling(s) => verify_scheduling(s, asg),
        DomainInstance::Placement(p) => verify_placement(p, asg),
    }
}

/// Decodes a Booleanized index: bit `i` is set when the sign at
/// `base + i` is True.
pub(crate) fn decode_index(x: &[f64], base: usize, bits: usize) -> usize {
    let mut id = 0usize;
    for i in 0..bits {
        if crate::model::is_true_sign(x[base + i]) {
            id |= 1 << i;
        }
    }
    id
}
