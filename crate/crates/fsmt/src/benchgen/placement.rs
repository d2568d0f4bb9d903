//! 3D placement instances: modules with Booleanized macro/layer indices and
//! real coordinates inside unit macros. Routing-aware pairs must share a
//! macro and keep overlapping footprints (they end up on different layers),
//! modules sharing a macro and layer must not overlap, and every module
//! stays inside the macro boundary.

use super::{decode_index, AtomInterner, DomainReport};
use crate::model::{Assignment, Body, Constraint, Expr, Formula, Literal, Rel, SymKind};

#[derive(Clone, Copy, Debug)]
pub struct PlacementSpec {
    /// Macro count; power of two.
    pub n_m: usize,
    /// Layer count; power of two.
    pub n_l: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModuleKind {
    LargePe,
    SmallPe,
    LargeMem,
    SmallMem,
}

#[derive(Clone, Copy, Debug)]
pub struct Module {
    pub kind: ModuleKind,
    pub width: f64,
    pub height: f64,
}

pub struct PlacementInstance {
    pub spec: PlacementSpec,
    pub formula: Formula,
    pub modules: Vec<Module>,
    pub macro_bits: usize,
    pub layer_bits: usize,
    /// Routing-aware pairs (must share a macro, footprints must meet).
    pub pairs: Vec<(usize, usize)>,
}

impl PlacementInstance {
    fn bits_per_module(&self) -> usize {
        self.macro_bits + self.layer_bits
    }

    pub fn macro_of(&self, asg: &Assignment, j: usize) -> usize {
        decode_index(&asg.x, j * self.bits_per_module(), self.macro_bits)
    }

    pub fn layer_of(&self, asg: &Assignment, j: usize) -> usize {
        decode_index(
            &asg.x,
            j * self.bits_per_module() + self.macro_bits,
            self.layer_bits,
        )
    }
}

pub fn gen_placement(spec: &PlacementSpec) -> Result<PlacementInstance, String> {
    if !spec.n_m.is_power_of_two() || spec.n_m < 2 {
        return Err(format!("macro count must be a power of two >= 2, got {}", spec.n_m));
    }
    if !spec.n_l.is_power_of_two() || spec.n_l < 2 {
        return Err(format!("layer count must be a power of two >= 2, got {}", spec.n_l));
    }
    let (n_m, n_l) = (spec.n_m, spec.n_l);
    let macro_bits = n_m.trailing_zeros() as usize;
    let layer_bits = n_l.trailing_zeros() as usize;
    let bits = macro_bits + layer_bits;

    // Module table in a fixed order; small memories alternate their long
    // axis by index parity, with the phase drawn from the seed.
    let mut modules = Vec::new();
    for _ in 0..n_m {
        modules.push(Module {
            kind: ModuleKind::LargePe,
            width: 0.4,
            height: 0.4,
        });
    }
    let small_pe_base = modules.len();
    for _ in 0..n_m * n_l {
        modules.push(Module {
            kind: ModuleKind::SmallPe,
            width: 0.2,
            height: 0.2,
        });
    }
    let large_mem_base = modules.len();
    for _ in 0..n_m {
        modules.push(Module {
            kind: ModuleKind::LargeMem,
            width: 0.1,
            height: 0.1,
        });
    }
    let small_mem_base = modules.len();
    let phase = (spec.seed % 2) as usize;
    for i in 0..n_m * n_l / 2 {
        let along_x = (i + phase).is_multiple_of(2);
        modules.push(Module {
            kind: ModuleKind::SmallMem,
            width: if along_x { 0.1 } else { 0.05 },
            height: if along_x { 0.05 } else { 0.1 },
        });
    }
    let n_modules = modules.len();

    // Routing-aware pairs: each large PE with its large memory; each small
    // memory serves two small PEs.
    let mut pairs = Vec::new();
    for i in 0..n_m {
        pairs.push((i, large_mem_base + i));
    }
    for i in 0..n_m * n_l / 2 {
        pairs.push((small_mem_base + i, small_pe_base + 2 * i));
        pairs.push((small_mem_base + i, small_pe_base + 2 * i + 1));
    }

    let x_of = |j: usize| 2 * j;
    let y_of = |j: usize| 2 * j + 1;
    let mut interner = AtomInterner::new();
    let mut constraints = Vec::new();

    // Routing-aware: same macro (bitwise equality) and meeting footprints
    // (hard adjacency atoms).
    for &(j, j2) in &pairs {
        for i in 0..macro_bits {
            constraints.push(Constraint::new(
                Body::Expr(Expr::Not(Box::new(Expr::Xor(vec![
                    Expr::Lit(Literal::bool_var(j * bits + i, false)),
                    Expr::Lit(Literal::bool_var(j2 * bits + i, false)),
                ])))),
                1.0,
            ));
        }
        for (u, v, extent) in [
            (x_of(j), x_of(j2), modules[j2].width),
            (x_of(j2), x_of(j), modules[j].width),
            (y_of(j), y_of(j2), modules[j2].height),
            (y_of(j2), y_of(j), modules[j].height),
        ] {
            let atom = interner.intern(vec![(u, 1.0), (v, -1.0)], Rel::Le, extent);
            constraints.push(Constraint::new(
                Body::Symmetric {
                    kind: SymKind::Or,
                    literals: vec![Literal::atom(atom, false)],
                },
                1.0,
            ));
        }
    }

    // Non-overlap: different macro, different layer, or separated.
    for j in 0..n_modules {
        for j2 in j + 1..n_modules {
            let mut parts: Vec<Expr> = Vec::new();
            for i in 0..bits {
                parts.push(Expr::Xor(vec![
                    Expr::Lit(Literal::bool_var(j * bits + i, false)),
                    Expr::Lit(Literal::bool_var(j2 * bits + i, false)),
                ]));
            }
            // u - v >= extent(v): one module clears the other by the width
            // (height) of the module it passes.
            for (u, v, extent) in [
                (x_of(j), x_of(j2), modules[j2].width),
                (x_of(j2), x_of(j), modules[j].width),
                (y_of(j), y_of(j2), modules[j2].height),
                (y_of(j2), y_of(j), modules[j].height),
            ] {
                let atom = interner.intern(vec![(v, 1.0), (u, -1.0)], Rel::Le, -extent);
                parts.push(Expr::Lit(Literal::atom(atom, false)));
            }
            constraints.push(Constraint::new(Body::Expr(Expr::Or(parts)), 1.0));
        }
    }

    // Feasibility: inside the unit macro.
    for (j, module) in modules.iter().enumerate() {
        for (var, hi) in [
            (x_of(j), 1.0 - module.width),
            (y_of(j), 1.0 - module.height),
        ] {
            let lower = interner.intern(vec![(var, -1.0)], Rel::Le, 0.0);
            let upper = interner.intern(vec![(var, 1.0)], Rel::Le, hi);
            for atom in [lower, upper] {
                constraints.push(Constraint::new(
                    Body::Symmetric {
                        kind: SymKind::Or,
                        literals: vec![Literal::atom(atom, false)],
                    },
                    1.0,
                ));
            }
        }
    }

    let formula = Formula {
        n_bool: n_modules * bits,
        n_real: 2 * n_modules,
        atoms: interner.into_atoms(),
        constraints,
    };
    formula.validate().expect("generator emits valid formulas");

    Ok(PlacementInstance {
        spec: *spec,
        formula,
        modules,
        macro_bits,
        layer_bits,
        pairs,
    })
}

/// Checks the placement domain rules directly: boundary containment,
/// routing-aware adjacency within shared macros, and rectangle
/// non-overlap per (macro, layer) bin.
pub fn verify_placement(inst: &PlacementInstance, asg: &Assignment) -> DomainReport {
    let mut report = DomainReport::default();
    if asg.x.len() != inst.formula.n_bool || asg.y.len() != inst.formula.n_real {
        report.violations.push("assignment dimensions do not match".into());
        return report;
    }
    let n = inst.modules.len();
    let pos = |j: usize| (asg.y[2 * j], asg.y[2 * j + 1]);
    for (j, m) in inst.modules.iter().enumerate() {
        let (x, y) = pos(j);
        report.check(x >= 0.0 && x <= 1.0 - m.width, || {
            format!("module {j} leaves the macro along x")
        });
        report.check(y >= 0.0 && y <= 1.0 - m.height, || {
            format!("module {j} leaves the macro along y")
        });
    }
    for &(j, j2) in &inst.pairs {
        report.check(inst.macro_of(asg, j) == inst.macro_of(asg, j2), || {
            format!("paired modules {j} and {j2} sit in different macros")
        });
        let (xj, yj) = pos(j);
        let (xk, yk) = pos(j2);
        let (mj, mk) = (&inst.modules[j], &inst.modules[j2]);
        let adjacent = xj - xk <= mk.width
            && xk - xj <= mj.width
            && yj - yk <= mk.height
            && yk - yj <= mj.height;
        report.check(adjacent, || {
            format!("paired modules {j} and {j2} drift apart")
        });
    }
    for j in 0..n {
        for j2 in j + 1..n {
            if inst.macro_of(asg, j) == inst.macro_of(asg, j2)
                && inst.layer_of(asg, j) == inst.layer_of(asg, j2)
            {
                let (xj, yj) = pos(j);
                let (xk, yk) = pos(j2);
                let (mj, mk) = (&inst.modules[j], &inst.modules[j2]);
                let separated = xj - xk >= mk.width
                    || xk - xj >= mj.width
                    || yj - yk >= mk.height
                    || yk - yj >= mj.height;
                report.check(separated, || {
                    format!("modules {j} and {j2} overlap in their (macro, layer) bin")
                });
            }
        }
    }
    report
}
