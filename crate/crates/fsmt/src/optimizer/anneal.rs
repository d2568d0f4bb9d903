//! Projected gradient descent to epsilon-projected-critical points and the
//! annealing outer loop with exponential recency-weighted constraint
//! weights. A satisfying assignment is claimed only after exact evaluation
//! confirms every constraint, so a `Sat` answer is self-certifying.

use super::project::Projector;
use super::{BackendChoice, Evaluator, LipschitzProfile, Point};
use crate::model::{round_sign, Assignment, Formula};
use crate::xbdd::{XbddError, DEFAULT_NODE_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

/// Step-size policy for the inner descent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EtaMode {
    /// `eta = 1/L` from the global gradient-Lipschitz constant, recomputed
    /// per stage. Safe but often impractically small at sharp sigma.
    #[default]
    Lipschitz,
    /// `eta = 1/(alpha (n+m))` from the local gradient-Lipschitz bound
    /// that holds away from the atoms' transition regions; independent of
    /// sigma, so sharp stages keep full mobility.
    Local,
    /// A caller-fixed step size.
    Fixed,
}

impl std::str::FromStr for EtaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lipschitz" => Ok(EtaMode::Lipschitz),
            "local" => Ok(EtaMode::Local),
            "fixed" => Ok(EtaMode::Fixed),
            other => Err(format!("unknown eta mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub eta: f64,
    pub eta_mode: EtaMode,
    pub eps: f64,
    /// Sampling parameters, strictly decreasing.
    pub sigma_schedule: Vec<f64>,
    pub max_inner_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub time_limit: Option<Duration>,
    /// ERWA decay factor.
    pub rho: f64,
    /// ERWA scaling base.
    pub gamma: f64,
    /// Weight-update period in stages.
    pub tau: usize,
    /// Value the violation history resets to after a weight update.
    pub erwa_reset_to: f64,
    pub backend: BackendChoice,
    pub node_budget: usize,
    pub threads: usize,
    /// Start override for the first restart; later restarts randomize.
    pub initial_point: Option<Point>,
    /// Keep unit atomic constraints in the smoothed objective sum (they are
    /// always enforced by the projection).
    pub include_unit_atoms_in_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            eta: 0.1,
            eta_mode: EtaMode::Lipschitz,
            eps: 1e-2,
            sigma_schedule: default_sigma_schedule(),
            max_inner_iters: 1000,
            restarts: 1,
            seed: 0,
            time_limit: None,
            rho: 0.5,
            gamma: 2.0,
            tau: 1,
            erwa_reset_to: 1.0,
            backend: BackendChoice::Auto,
            node_budget: DEFAULT_NODE_BUDGET,
            threads: 1,
            initial_point: None,
            include_unit_atoms_in_objective: true,
        }
    }
}

/// Inverse sampling parameters 0.1, 0.2, ..., 2.0.
pub fn default_sigma_schedule() -> Vec<f64> {
    (1..=20).map(|i| 1.0 / (0.1 * i as f64)).collect()
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps > 0.0) {
            return Err("eps must be positive".into());
        }
        if self.sigma_schedule.is_empty() {
            return Err("sigma schedule must be non-empty".into());
        }
        if self.sigma_schedule.iter().any(|&s| !(s > 0.0)) {
            return Err("sigma values must be positive".into());
        }
        if self.sigma_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err("sigma schedule must be strictly decreasing".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err("rho must lie in (0, 1)".into());
        }
        if !(self.gamma > 1.0) {
            return Err("gamma must exceed 1".into());
        }
        if self.tau == 0 {
            return Err("tau must be at least 1".into());
        }
        if self.eta_mode == EtaMode::Fixed && !(self.eta > 0.0) {
            return Err("fixed eta must be positive".into());
        }
        if self.restarts == 0 {
            return Err("at least one restart".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PgdResult {
    pub point: Point,
    /// Gradient evaluations performed.
    pub iters: usize,
    pub converged: bool,
    pub grad_norm_sq: f64,
}

/// Runs projected gradient descent at fixed sigma until the projected
/// gradient mapping satisfies `||g||^2 <= eps^2` or the iteration cap.
/// `trace`, when given, records the objective at every visited point.
#[allow(clippy::too_many_arguments)]
pub fn pgd(
    ev: &Evaluator,
    proj: &Projector,
    start: Point,
    sigma: f64,
    weights: &[f64],
    eta: f64,
    eps: f64,
    max_iters: usize,
    mut trace: Option<&mut Vec<f64>>,
    deadline: Option<Instant>,
    abort: Option<&AtomicBool>,
) -> PgdResult {
    assert!(sigma > 0.0 && eta > 0.0);
    let mut pt = start;
    let mut grad_norm_sq = f64::INFINITY;
    let mut ws = super::Workspace::default();
    let mut ga = Vec::new();
    let mut gb = Vec::new();
    let mut moved = pt.clone();
    for iter in 0..max_iters {
        let obj = ev.objective_and_gradient_into(&pt, sigma, weights, &mut ws, &mut ga, &mut gb);
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        moved.a.clear();
        moved.a.extend(pt.a.iter().zip(&ga).map(|(x, g)| x - eta * g));
        moved.b.clear();
        moved.b.extend(pt.b.iter().zip(&gb).map(|(x, g)| x - eta * g));
        proj.project_in_place(&mut moved.a, &mut moved.b);
        grad_norm_sq = pt
            .a
            .iter()
            .chain(&pt.b)
            .zip(moved.a.iter().chain(&moved.b))
            .map(|(x, y)| {
                let g = (x - y) / eta;
                g * g
            })
            .sum();
        if grad_norm_sq <= eps * eps {
            return PgdResult {
                point: pt,
                iters: iter + 1,
                converged: true,
                grad_norm_sq,
            };
        }
        std::mem::swap(&mut pt, &mut moved);
        if deadline.is_some_and(|d| Instant::now() >= d)
            || abort.is_some_and(|a| a.load(Ordering::Relaxed))
        {
            return PgdResult {
                point: pt,
                iters: iter + 1,
                converged: false,
                grad_norm_sq,
            };
        }
    }
    PgdResult {
        point: pt,
        iters: max_iters,
        converged: false,
        grad_norm_sq,
    }
}

/// One line of the structured run log.
#[derive(Clone, Debug, Serialize)]
pub struct StageLog {
    pub restart: usize,
    pub stage: usize,
    pub sigma: f64,
    pub iters: usize,
    pub grad_norm: f64,
    pub objective: f64,
    pub unsat_count: usize,
    pub weights_digest: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    Sat(Assignment),
    Unknown {
        best: Assignment,
        unsat_count: usize,
    },
}

#[derive(Debug)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub stages: Vec<StageLog>,
    pub restarts_run: usize,
    pub wall: Duration,
    pub timed_out: bool,
}

impl SolveReport {
    pub fn is_sat(&self) -> bool {
        matches!(self.outcome, SolveOutcome::Sat(_))
    }
}

fn weights_digest(w: &[f64]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in w {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Adaptive constraint-weight state: multiplicative weights driven by an
/// exponentially decayed violation history.
#[derive(Clone, Debug)]
pub struct WeightState {
    /// Per-constraint weight multiplier on top of the formula weights.
    pub w: Vec<f64>,
    /// Decayed violation history.
    pub h: Vec<f64>,
}

impl WeightState {
    pub fn new(n_constraints: usize) -> WeightState {
        WeightState {
            w: vec![1.0; n_constraints],
            h: vec![0.0; n_constraints],
        }
    }

    /// One recency-weighted averaging round: decay the history by `rho` and
    /// add this stage's violations; on update stages scale weights by
    /// `gamma^h` and reset the history. A uniform rescale caps unbounded
    /// growth (the argmin is invariant under it).
    pub fn record(&mut self, violated: &[bool], rho: f64, gamma: f64, update: bool, reset_to: f64) {
        for (c, &bad) in violated.iter().enumerate() {
            self.h[c] = rho * self.h[c] + if bad { 1.0 } else { 0.0 };
            if update {
                self.w[c] *= gamma.powf(self.h[c]);
                self.h[c] = reset_to;
            }
        }
        let max_w = self.w.iter().cloned().fold(0.0f64, f64::max);
        if max_w > 1e12 {
            for w in &mut self.w {
                *w /= max_w;
            }
        }
    }
}

struct RestartRun {
    outcome: SolveOutcome,
    stages: Vec<StageLog>,
    timed_out: bool,
}

/// Annealing with ERWA weight adaptation over one start point.
#[allow(clippy::too_many_arguments)]
fn solve_one(
    f: &Formula,
    ev: &Evaluator,
    proj: &Projector,
    profile: &LipschitzProfile,
    cfg: &SolverConfig,
    restart: usize,
    t0: Instant,
    deadline: Option<Instant>,
    abort: &AtomicBool,
) -> RestartRun {
    let n_c = f.constraints.len();
    let mut rng =
        ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((restart as u64).wrapping_mul(0x9E3779B97F4A7C15)));

    let mut pt = match (&cfg.initial_point, restart) {
        (Some(p), 0) => p.clone(),
        _ => Point {
            a: (0..f.n_bool).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            b: (0..f.n_real).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        },
    };
    proj.project_in_place(&mut pt.a, &mut pt.b);

    // Adaptive multipliers on top of the formula weights; the exact
    // satisfaction check below is weight-free.
    let mut weights = WeightState::new(n_c);
    let objective_mask: Vec<f64> = f
        .constraints
        .iter()
        .map(|c| {
            if !cfg.include_unit_atoms_in_objective && c.unit_atom().is_some() {
                0.0
            } else {
                1.0
            }
        })
        .collect();

    let mut stages = Vec::new();
    let mut best: Option<(usize, Assignment)> = None;
    let mut timed_out = false;

    for (stage_idx, &sigma) in cfg.sigma_schedule.iter().enumerate() {
        let t = stage_idx + 1;
        let mut effective: Vec<f64> = f
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| c.weight * weights.w[i] * objective_mask[i])
            .collect();
        // Normalize the weight mass to 1: the argmin is invariant under
        // uniform positive rescaling, the epsilon test stays meaningful as
        // the adaptive weights grow, and the 1/L step keeps a usable size
        // (alpha = 1 instead of growing with the constraint count).
        let total: f64 = effective.iter().sum();
        if total > 0.0 {
            for w in &mut effective {
                *w /= total;
            }
        }
        let eta = match cfg.eta_mode {
            EtaMode::Fixed => cfg.eta,
            EtaMode::Lipschitz => {
                let alpha: f64 = effective.iter().sum();
                let (_, l) = profile.constants(alpha, sigma);
                if l > 0.0 {
                    1.0 / l
                } else {
                    1.0
                }
            }
            EtaMode::Local => {
                let alpha: f64 = effective.iter().sum();
                let l = alpha * (profile.n + profile.m) as f64;
                if l > 0.0 {
                    1.0 / l
                } else {
                    1.0
                }
            }
        };
        let result = pgd(
            ev,
            proj,
            pt,
            sigma,
            &effective,
            eta,
            cfg.eps,
            cfg.max_inner_iters,
            None,
            deadline,
            Some(abort),
        );
        pt = result.point;

        // Round and evaluate exactly.
        let asg = Assignment {
            x: pt.a.iter().map(|&a| round_sign(a)).collect(),
            y: pt.b.clone(),
        };
        let (objective, flags) = f.eval_formula(&asg);
        let unsat_count = flags.iter().filter(|&&sat| !sat).count();
        let violated: Vec<bool> = flags.iter().map(|&sat| !sat).collect();
        weights.record(
            &violated,
            cfg.rho,
            cfg.gamma,
            t % cfg.tau == 0,
            cfg.erwa_reset_to,
        );

        stages.push(StageLog {
            restart,
            stage: t,
            sigma,
            iters: result.iters,
            grad_norm: result.grad_norm_sq.sqrt(),
            objective,
            unsat_count,
            weights_digest: weights_digest(&weights.w),
            wall_ms: t0.elapsed().as_millis() as u64,
        });

        if unsat_count == 0 {
            debug_assert_eq!(objective, -f.total_weight());
            return RestartRun {
                outcome: SolveOutcome::Sat(asg),
                stages,
                timed_out: false,
            };
        }
        if best.as_ref().is_none_or(|(u, _)| unsat_count < *u) {
            best = Some((unsat_count, asg));
        }

        if deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
        if abort.load(Ordering::Relaxed) {
            break;
        }
    }

    let (unsat_count, best) = best.expect("schedule is non-empty");
    RestartRun {
        outcome: SolveOutcome::Unknown {
            best,
            unsat_count,
        },
        stages,
        timed_out,
    }
}

/// Full solve: compiles the constraints once, then races restarts over the
/// annealing schedule. The first satisfying restart (lowest index) wins;
/// otherwise the best rounded assignment across restarts is reported.
pub fn anneal_solve(f: &Formula, cfg: &SolverConfig) -> Result<SolveReport, XbddError> {
    cfg.validate().expect("invalid solver configuration");
    let t0 = Instant::now();
    let deadline = cfg.time_limit.map(|d| t0 + d);
    let ev = Evaluator::new(f, cfg.backend, cfg.node_budget)?;
    let proj = Projector::from_formula(f);
    let profile = LipschitzProfile::of(f);
    let abort = AtomicBool::new(false);

    // The pool bounds evaluation parallelism as well: with one thread the
    // whole solve is serial and bit-reproducible.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .expect("thread pool");
    let mut runs: Vec<RestartRun> = Vec::with_capacity(cfg.restarts);
    let mut restarts_run = 0usize;
    if cfg.threads <= 1 {
        pool.install(|| {
            for r in 0..cfg.restarts {
                let run = solve_one(f, &ev, &proj, &profile, cfg, r, t0, deadline, &abort);
                restarts_run += 1;
                let sat = matches!(run.outcome, SolveOutcome::Sat(_));
                let timed_out = run.timed_out;
                runs.push(run);
                if sat || timed_out {
                    break;
                }
            }
        });
    } else {
        runs = pool.install(|| {
            (0..cfg.restarts)
                .into_par_iter()
                .map(|r| {
                    let run = solve_one(f, &ev, &proj, &profile, cfg, r, t0, deadline, &abort);
                    if matches!(run.outcome, SolveOutcome::Sat(_)) {
                        abort.store(true, Ordering::Relaxed);
                    }
                    run
                })
                .collect()
        });
        restarts_run = runs.len();
    }

    let timed_out = runs.iter().any(|r| r.timed_out);
    let mut stages: Vec<StageLog> = Vec::new();
    for r in &runs {
        stages.extend(r.stages.iter().cloned());
    }
    stages.sort_by_key(|s| (s.restart, s.stage));

    // First Sat by restart index, else the best Unknown.
    let mut outcome: Option<SolveOutcome> = None;
    for run in &runs {
        if let SolveOutcome::Sat(asg) = &run.outcome {
            outcome = Some(SolveOutcome::Sat(asg.clone()));
            break;
        }
    }
    if outcome.is_none() {
        let mut best: Option<(usize, Assignment)> = None;
        for run in &runs {
            if let SolveOutcome::Unknown { best: b, unsat_count } = &run.outcome {
                if best.as_ref().is_none_or(|(u, _)| unsat_count < u) {
                    best = Some((*unsat_count, b.clone()));
                }
            }
        }
        let (unsat_count, best) = best.expect("at least one restart ran");
        outcome = Some(SolveOutcome::Unknown { best, unsat_count });
    }

    Ok(SolveReport {
        outcome: outcome.unwrap(),
        stages,
        restarts_run,
        wall: t0.elapsed(),
        timed_out,
    })
}
