//! Continuous-time scheduling instances: jobs with real start times are
//! assigned to workers through Booleanized worker indices, subject to task
//! dependencies, per-worker non-overlap, and worker activity windows. The
//! cutoff comes from a greedy list scheduler, so every instance is
//! satisfiable by construction and ships its own witness.

use super::{decode_index, AtomInterner, DomainReport};
use crate::model::{
    sign_from_bool, Assignment, Body, Constraint, Expr, Formula, Literal, Rel, SymKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Margin added to every greedy start time and to the cutoff so that both
/// the formula atoms and the independent domain checks hold with slack far
/// above f64 rounding.
const TIME_PAD: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct SchedulingSpec {
    /// Worker count; must be a power of two (worker ids are bit-encoded).
    pub n_w: usize,
    /// Jobs per worker.
    pub r: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Job {
    pub duration: f64,
    /// Index of the job this one depends on, if any (always smaller).
    pub dep: Option<usize>,
}

pub struct SchedulingInstance {
    pub spec: SchedulingSpec,
    pub formula: Formula,
    /// Bits per worker index.
    pub bits: usize,
    pub jobs: Vec<Job>,
    /// Admission time of each worker.
    pub worker_start: Vec<f64>,
    /// Shared activity budget: worker `w` stops at `worker_start[w] + cutoff`.
    pub cutoff: f64,
    /// The greedy schedule as a formula witness.
    pub greedy: Assignment,
}

impl SchedulingInstance {
    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    fn bool_index(&self, job: usize, bit: usize) -> usize {
        job * self.bits + bit
    }
}

pub fn gen_scheduling(spec: &SchedulingSpec) -> Result<SchedulingInstance, String> {
    if spec.n_w < 2 || !spec.n_w.is_power_of_two() {
        return Err(format!("worker count must be a power of two >= 2, got {}", spec.n_w));
    }
    if spec.r == 0 {
        return Err("jobs-per-worker ratio must be positive".into());
    }
    let n_w = spec.n_w;
    let bits = n_w.trailing_zeros() as usize;
    let n_j = spec.r * n_w;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let worker_start: Vec<f64> = (0..n_w).map(|_| rng.gen_range(0.0..1.0)).collect();
    let jobs: Vec<Job> = (0..n_j)
        .map(|j| Job {
            duration: rng.gen_range(0.0..1.0),
            dep: (j > 0 && rng.gen::<bool>()).then(|| rng.gen_range(0..j)),
        })
        .collect();

    // Greedy list scheduler: jobs in index order (a topological order since
    // dependencies point backwards), each on the worker that can start it
    // earliest.
    let mut free = worker_start.clone();
    let mut start = vec![0.0f64; n_j];
    let mut finish = vec![0.0f64; n_j];
    let mut assigned = vec![0usize; n_j];
    for j in 0..n_j {
        let avail = jobs[j].dep.map(|d| finish[d]).unwrap_or(0.0);
        let (w, s) = (0..n_w)
            .map(|w| (w, free[w].max(worker_start[w]).max(avail)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        let s = s + TIME_PAD;
        start[j] = s;
        finish[j] = s + jobs[j].duration;
        free[w] = finish[j];
        assigned[j] = w;
    }
    let cutoff = (0..n_j)
        .map(|j| finish[j] - worker_start[assigned[j]])
        .fold(0.0f64, f64::max)
        + TIME_PAD;

    // Atoms. "after(before, after)": y_after >= y_before + t_before, stored
    // canonically as y_before - y_after <= -t_before.
    let mut interner = AtomInterner::new();
    let after_atom = |before: usize, after: usize, interner: &mut AtomInterner| -> usize {
        interner.intern(
            vec![(before, 1.0), (after, -1.0)],
            Rel::Le,
            -jobs[before].duration,
        )
    };

    let mut constraints = Vec::new();

    // Task dependencies as hard unit atoms.
    for j in 0..n_j {
        if let Some(d) = jobs[j].dep {
            let atom = after_atom(d, j, &mut interner);
            constraints.push(Constraint::new(
                Body::Symmetric {
                    kind: SymKind::Or,
                    literals: vec![Literal::atom(atom, false)],
                },
                1.0,
            ));
        }
    }

    // Non-overlap: different workers or separated in time.
    for j in 0..n_j {
        for j2 in j + 1..n_j {
            let mut parts: Vec<Expr> = (0..bits)
                .map(|i| {
                    Expr::Xor(vec![
                        Expr::Lit(Literal::bool_var(j * bits + i, false)),
                        Expr::Lit(Literal::bool_var(j2 * bits + i, false)),
                    ])
                })
                .collect();
            parts.push(Expr::Lit(Literal::atom(after_atom(j2, j, &mut interner), false)));
            parts.push(Expr::Lit(Literal::atom(after_atom(j, j2, &mut interner), false)));
            constraints.push(Constraint::new(Body::Expr(Expr::Or(parts)), 1.0));
        }
    }

    // Worker activity windows: for every (job, worker), either the job is
    // elsewhere (some index bit differs) or its run fits the window.
    for j in 0..n_j {
        for w in 0..n_w {
            let mismatch: Vec<Literal> = (0..bits)
                .map(|i| Literal::bool_var(j * bits + i, (w >> i) & 1 == 1))
                .collect();
            let starts_after = interner.intern(vec![(j, -1.0)], Rel::Le, -worker_start[w]);
            let ends_before = interner.intern(
                vec![(j, 1.0)],
                Rel::Le,
                worker_start[w] + cutoff - jobs[j].duration,
            );
            for atom in [starts_after, ends_before] {
                let mut literals = mismatch.clone();
                literals.push(Literal::atom(atom, false));
                constraints.push(Constraint::new(
                    Body::Symmetric {
                        kind: SymKind::Or,
                        literals,
                    },
                    1.0,
                ));
            }
        }
    }

    let formula = Formula {
        n_bool: n_j * bits,
        n_real: n_j,
        atoms: interner.into_atoms(),
        constraints,
    };
    formula.validate().expect("generator emits valid formulas");

    let mut x = vec![0.0f64; n_j * bits];
    for j in 0..n_j {
        for i in 0..bits {
            x[j * bits + i] = sign_from_bool((assigned[j] >> i) & 1 == 1);
        }
    }
    let greedy = Assignment { x, y: start };

    Ok(SchedulingInstance {
        spec: *spec,
        formula,
        bits,
        jobs,
        worker_start,
        cutoff,
        greedy,
    })
}

/// Checks the scheduling domain rules directly: dependencies, per-worker
/// interval separation, and worker activity windows.
pub fn verify_scheduling(inst: &SchedulingInstance, asg: &Assignment) -> DomainReport {
    let mut report = DomainReport::default();
    let n_j = inst.n_jobs();
    if asg.x.len() != inst.formula.n_bool || asg.y.len() != inst.formula.n_real {
        report.violations.push("assignment dimensions do not match".into());
        return report;
    }
    let worker: Vec<usize> = (0..n_j)
        .map(|j| decode_index(&asg.x, inst.bool_index(j, 0), inst.bits))
        .collect();
    for j in 0..n_j {
        if let Some(d) = inst.jobs[j].dep {
            report.check(asg.y[j] >= asg.y[d] + inst.jobs[d].duration, || {
                format!("job {j} starts before its dependency {d} finishes")
            });
        }
        let w = worker[j];
        report.check(asg.y[j] >= inst.worker_start[w], || {
            format!("job {j} starts before worker {w} admits jobs")
        });
        report.check(
            asg.y[j] + inst.jobs[j].duration <= inst.worker_start[w] + inst.cutoff,
            || format!("job {j} overruns worker {w}'s cutoff"),
        );
    }
    for j in 0..n_j {
        for j2 in j + 1..n_j {
            if worker[j] == worker[j2] {
                let sep = asg.y[j] >= asg.y[j2] + inst.jobs[j2].duration
                    || asg.y[j2] >= asg.y[j] + inst.jobs[j].duration;
                report.check(sep, || {
                    format!("jobs {j} and {j2} overlap on worker {}", worker[j])
                });
            }
        }
    }
    report
}
