//! Lattice random walk for the diffusant coupled to an explicit Euler
//! update of the kinetic front.
//!
//! Walkers live on nodes `z_i = i·Δz` with `Δz = √(2Δτ)`, so one symmetric
//! ±Δz step per Δτ reproduces unit diffusivity. Stored counts are `n` times
//! the concentration. A walker at the node `k = ⌊h/Δz⌋` that tries to step
//! past it reaches the front: with probability
//!
//! ```text
//! P_b = √(2Δτ)·(A0/n)·(N_k − σ̃(h))
//! ```
//!
//! it sticks at `k` and advances the front by `δh = Δτ·(A0/n)·(N_k − σ̃(h))`,
//! otherwise it is reflected to `k − 1`. Walkers that step onto node 0 are
//! absorbed; node 0 is refilled every slice from the left boundary rule.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::{DimensionlessProblem, Profile};
use crate::observables::total_mass;
use crate::rng::{RandomStream, WalkerDraws};
use crate::trace::{digest, Diagnostics, Snapshot, SolutionTrace, SolverKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub dtau: f64,
    pub dz: f64,
    /// Index of the last node; nodes are `0..=nodes`.
    pub nodes: usize,
    /// Number of time steps.
    pub steps: usize,
    pub length: f64,
}

impl Lattice {
    pub fn z(&self, i: usize) -> f64 {
        i as f64 * self.dz
    }

    /// Part of `[0, L]` not covered by whole cells.
    pub fn truncation(&self) -> f64 {
        self.length - self.nodes as f64 * self.dz
    }

    fn spatial(dtau: f64, length: f64) -> Result<(f64, usize), SolverError> {
        if !(dtau > 0.0 && dtau < 1.0) {
            return Err(SolverError::Lattice(format!("dtau must lie in (0, 1), got {dtau}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SolverError::Lattice(format!("L must be > 0, got {length}")));
        }
        let dz = (2.0 * dtau).sqrt();
        let nodes = (length / dz).floor() as usize;
        if nodes < 2 {
            return Err(SolverError::Lattice(format!(
                "dz = {dz} leaves {nodes} cells on [0, {length}]; need at least 2"
            )));
        }
        Ok((dz, nodes))
    }
}

pub fn build_lattice(dtau: f64, length: f64, final_time: f64) -> Result<Lattice, SolverError> {
    let (dz, nodes) = Lattice::spatial(dtau, length)?;
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(SolverError::Lattice(format!("T must be > 0, got {final_time}")));
    }
    let steps = step_count(final_time, dtau);
    if steps < 1 {
        return Err(SolverError::Lattice(format!(
            "T = {final_time} is shorter than one step of {dtau}"
        )));
    }
    Ok(Lattice {
        dtau,
        dz,
        nodes,
        steps,
        length,
    })
}

/// `⌊T/Δτ⌋`, tolerating round-off when `T` is a whole number of steps.
fn step_count(final_time: f64, dtau: f64) -> usize {
    let ratio = final_time / dtau;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

#[inline]
pub fn front_index(h: f64, dz: f64) -> usize {
    (h / dz).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkerField {
    pub counts: Vec<u64>,
    /// Walkers per unit concentration.
    pub n: u64,
}

impl WalkerField {
    pub fn zeros(len: usize, n: u64) -> Self {
        WalkerField {
            counts: vec![0; len],
            n,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn concentration(&self, upto: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.counts[..=upto.min(self.counts.len() - 1)]
            .iter()
            .map(|&c| c as f64 / n)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontState {
    pub h: f64,
    pub k: usize,
    pub adsorbed_count: u64,
    pub violator_count: u64,
}

impl FrontState {
    pub fn new(h: f64, dz: f64) -> Self {
        FrontState {
            h,
            k: front_index(h, dz),
            adsorbed_count: 0,
            violator_count: 0,
        }
    }
}

/// Rule for the fixed boundary at `z = 0`.
///
/// The Robin rule takes `Bi`, `H` and the forcing from the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeftBoundary {
    Dirichlet { u_d: f64 },
    Robin,
}

impl LeftBoundary {
    pub fn validate(&self) -> Result<(), SolverError> {
        match self {
            LeftBoundary::Dirichlet { u_d } if !(*u_d >= 0.0 && u_d.is_finite()) => Err(
                SolverError::Numerics(format!("u_d must be finite and >= 0, got {u_d}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Fill nodes `0..=⌊h0/Δz⌋` with `round(n·u0(z_i))` walkers.
pub fn init_walkers(
    u0: &Profile,
    n: u64,
    lattice: &Lattice,
    h0: f64,
) -> Result<WalkerField, SolverError> {
    let mut field = WalkerField::zeros(lattice.nodes + 1, n);
    let k0 = front_index(h0, lattice.dz).min(lattice.nodes);
    for i in 0..=k0 {
        let z = lattice.z(i);
        let value = u0
            .eval(z)
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or(SolverError::UndefinedInitialData { node: i, z })?;
        field.counts[i] = (n as f64 * value).round() as u64;
    }
    Ok(field)
}

/// Reset node 0 to `round(n·u_D)`; returns the number of walkers placed.
pub fn apply_left_dirichlet(field: &mut WalkerField, u_d: f64) -> u64 {
    let value = (field.n as f64 * u_d).round() as u64;
    field.counts[0] = value;
    value
}

/// Reset node 0 from the discrete Robin balance
/// `N_0 = round((n·Δz·Bi·f + N_1) / (1 + Δz·Bi·H))`.
pub fn apply_left_robin(
    field: &mut WalkerField,
    bi: f64,
    henry: f64,
    forcing_value: f64,
    dz: f64,
) -> u64 {
    let n = field.n as f64;
    let value = ((n * dz * bi * forcing_value + field.counts[1] as f64) / (1.0 + dz * bi * henry))
        .round();
    assert!(value >= 0.0, "negative walker count at the left boundary");
    field.counts[0] = value as u64;
    field.counts[0]
}

#[inline]
pub fn reaction_probability(counts_at_k: f64, n: u64, dtau: f64, a0: f64, sigma: f64) -> f64 {
    (2.0 * dtau).sqrt() * a0 / n as f64 * (counts_at_k - sigma)
}

#[inline]
pub fn per_walker_increment(counts_at_k: f64, n: u64, dtau: f64, a0: f64, sigma: f64) -> f64 {
    dtau * a0 / n as f64 * (counts_at_k - sigma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inequality {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimestepReport {
    pub checks: Vec<Inequality>,
    /// `Δz/2`, the bound on any single-walker increment when all checks hold.
    pub increment_bound: f64,
    pub dz: f64,
}

impl TimestepReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

impl std::fmt::Display for TimestepReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<40} {:>14.6e} <= {:>14.6e}  {}",
                c.name,
                c.lhs,
                c.rhs,
                if c.holds { "ok" } else { "VIOLATED" }
            )?;
        }
        write!(
            f,
            "per-walker increment bound dz/2 = {:.6e} (dz = {:.6e})",
            self.increment_bound, self.dz
        )
    }
}

/// Check `√Δτ <= n / (√2·A0·U_max)` and `0 < Δτ < 1`.
///
/// `u_max` bounds `N_k − σ̃` in stored-count units; `u_max <= 0` makes the
/// first check hold trivially.
pub fn validate_timestep(n: u64, a0: f64, u_max: f64, dtau: f64) -> TimestepReport {
    let rhs = if u_max > 0.0 {
        n as f64 / (std::f64::consts::SQRT_2 * a0 * u_max)
    } else {
        f64::INFINITY
    };
    let sqrt_dtau = dtau.max(0.0).sqrt();
    let dz = (2.0 * dtau.max(0.0)).sqrt();
    TimestepReport {
        checks: vec![
            Inequality {
                name: "sqrt(dtau) <= n/(sqrt(2)*A0*U_max)",
                lhs: sqrt_dtau,
                rhs,
                holds: sqrt_dtau <= rhs,
            },
            Inequality {
                name: "0 < dtau",
                lhs: 0.0,
                rhs: dtau,
                holds: dtau > 0.0,
            },
            Inequality {
                name: "dtau < 1",
                lhs: dtau,
                rhs: 1.0,
                holds: dtau < 1.0,
            },
        ],
        increment_bound: dz / 2.0,
        dz,
    }
}

/// How the threshold `σ̃` enters the count-based reaction probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaCoupling {
    /// `N_k − σ̃`: the threshold is subtracted from the raw walker count.
    #[default]
    Counts,
    /// `N_k − n·σ̃`: the threshold is expressed in walker counts, so that
    /// `N_k/n − σ̃` is the concentration excess of the front law.
    Scaled,
}

/// Numerical settings of one random-walk run.
#[derive(Clone, Debug, PartialEq)]
pub struct Numerics {
    pub dtau: f64,
    pub n: u64,
    pub seed: u64,
    /// Ensemble member index; selects an independent stream of `seed`.
    pub member: u64,
    pub snapshot_times: Vec<f64>,
    /// Record the front, mass and boundary series every this many steps.
    pub record_every: usize,
    /// A-priori bound on `N_k − σ̃`; estimated from the data when absent.
    pub u_max: Option<f64>,
    pub strict: bool,
    pub coupling: SigmaCoupling,
}

impl Numerics {
    pub fn new(dtau: f64, n: u64, seed: u64) -> Self {
        Numerics {
            dtau,
            n,
            seed,
            member: 0,
            snapshot_times: Vec::new(),
            record_every: 1,
            u_max: None,
            strict: false,
            coupling: SigmaCoupling::Counts,
        }
    }

    pub fn validate(&self, final_time: f64) -> Result<(), SolverError> {
        if self.n == 0 {
            return Err(SolverError::Numerics("n must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(SolverError::Numerics("record_every must be >= 1".into()));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(t >= 0.0 && t <= final_time))
        {
            return Err(SolverError::Numerics(format!(
                "snapshot time {t} lies outside [0, {final_time}]"
            )));
        }
        Ok(())
    }
}

/// A-priori bound on `N_k − σ̃`: the largest boundary or initial level,
/// in stored-count units.
pub fn estimate_u_max(problem: &DimensionlessProblem, left: &LeftBoundary, field: &WalkerField) -> f64 {
    let n = field.n as f64;
    let boundary = match left {
        LeftBoundary::Dirichlet { u_d } => *u_d,
        LeftBoundary::Robin => problem.forcing.max_value() / problem.henry,
    };
    let initial = field.counts.iter().copied().max().unwrap_or(0) as f64;
    (n * boundary).max(initial)
}

/// Per-step event counts used for bookkeeping checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub injected: u64,
    pub absorbed: u64,
    pub pushes: u64,
    pub reflections: u64,
    pub violators: u64,
}

/// The random-walk scheme bound to one problem and lattice.
pub struct RandomWalk<'a> {
    pub problem: &'a DimensionlessProblem,
    pub lattice: Lattice,
    pub left: &'a LeftBoundary,
    pub n: u64,
    pub coupling: SigmaCoupling,
}

impl<'a> RandomWalk<'a> {
    /// Populate node 0 for slice `j` (`j > 0`; slice 0 holds the initial data).
    pub fn populate_left(&self, j: usize, field: &mut WalkerField) -> u64 {
        if j == 0 {
            return 0;
        }
        match self.left {
            LeftBoundary::Dirichlet { u_d } => apply_left_dirichlet(field, *u_d),
            LeftBoundary::Robin => {
                let tau = j as f64 * self.lattice.dtau;
                apply_left_robin(
                    field,
                    self.problem.bi,
                    self.problem.henry,
                    self.problem.forcing.eval(tau),
                    self.lattice.dz,
                )
            }
        }
    }

    /// Move every walker of the current slice once, node by node from the
    /// left, and advance the front.
    ///
    /// `next` is scratch space of the same length as `field.counts`; on
    /// return it holds the previous slice and `field` the new one.
    pub fn advance<R: WalkerDraws>(
        &self,
        field: &mut WalkerField,
        next: &mut Vec<u64>,
        front: &mut FrontState,
        rng: &mut R,
        diag: &mut Diagnostics,
    ) -> StepEvents {
        let nodes = self.lattice.nodes;
        let dz = self.lattice.dz;
        let dtau = self.lattice.dtau;
        let a0 = self.problem.a0;
        let n = self.n;
        let sigma = match self.coupling {
            SigmaCoupling::Counts => self.problem.sigma_tilde(front.h),
            SigmaCoupling::Scaled => n as f64 * self.problem.sigma_tilde(front.h),
        };
        let mut events = StepEvents::default();

        let k_start = front.k;
        let last = (k_start + 1).min(nodes);
        next.resize(field.counts.len(), 0);
        next[..=last].fill(0);

        for i in 0..=last {
            let count = field.counts[i];
            if count == 0 {
                continue;
            }
            let k = front.k;
            if i < k {
                // Both destinations lie in [i-1, i+1] ⊂ [0, k].
                let up = rng.count_up_steps(count);
                next[i + 1] += up;
                if i >= 2 {
                    next[i - 1] += count - up;
                } else {
                    events.absorbed += count - up;
                }
                continue;
            }
            for _ in 0..count {
                let k = front.k;
                let up = rng.draw_step() > 0;
                let dest = if up { i as i64 + 1 } else { i as i64 - 1 };
                if dest > 0 && dest <= k as i64 && i < nodes {
                    next[dest as usize] += 1;
                } else if dest == k as i64 + 1 {
                    let excess = count as f64 - sigma;
                    let pb = reaction_probability(count as f64, n, dtau, a0, sigma);
                    diag.pb.record(pb);
                    diag.front_arrivals += 1;
                    diag.realized_u_max = diag.realized_u_max.max(excess);
                    if !(0.0..1.0).contains(&pb) {
                        events.violators += 1;
                        front.violator_count += 1;
                        next[i] += 1;
                    } else if rng.draw_uniform() < pb {
                        let dh = per_walker_increment(count as f64, n, dtau, a0, sigma);
                        diag.max_increment = diag.max_increment.max(dh);
                        front.h += dh;
                        front.k = front_index(front.h, dz);
                        front.adsorbed_count += 1;
                        events.pushes += 1;
                        next[i] += 1;
                    } else {
                        events.reflections += 1;
                        if i >= 1 {
                            next[i - 1] += 1;
                        } else {
                            events.absorbed += 1;
                        }
                    }
                } else if dest <= 0 {
                    events.absorbed += 1;
                } else {
                    // Beyond the front's neighbour; cannot happen while the
                    // field is empty past k.
                    debug_assert!(false, "walker at node {i} beyond front index {k}");
                    next[i] += 1;
                }
            }
        }

        std::mem::swap(&mut field.counts, next);
        diag.adsorbed = front.adsorbed_count;
        diag.violators = front.violator_count;
        diag.absorbed_left += events.absorbed;
        events
    }

    /// One full time step from slice `j`: boundary population, then moves.
    pub fn step<R: WalkerDraws>(
        &self,
        j: usize,
        field: &mut WalkerField,
        next: &mut Vec<u64>,
        front: &mut FrontState,
        rng: &mut R,
        diag: &mut Diagnostics,
    ) -> StepEvents {
        let injected = self.populate_left(j, field);
        diag.injected_left += injected;
        let mut events = self.advance(field, next, front, rng, diag);
        events.injected = injected;
        events
    }
}

/// Problem identity used to match traces from different solvers.
pub fn problem_hash(problem: &DimensionlessProblem, left: &LeftBoundary) -> String {
    digest(&problem_echo(problem, left))
}

pub fn problem_echo(problem: &DimensionlessProblem, left: &LeftBoundary) -> String {
    #[derive(Serialize)]
    struct Echo<'a> {
        problem: &'a DimensionlessProblem,
        left: &'a LeftBoundary,
    }
    toml::to_string(&Echo { problem, left }).expect("problem serializes")
}

/// Map requested snapshot times onto step indices.
pub(crate) fn snapshot_plan(times: &[f64], dt: f64, steps: usize) -> Vec<(usize, f64)> {
    let mut plan: Vec<(usize, f64)> = times
        .iter()
        .map(|&t| (((t / dt).round() as usize).min(steps), t))
        .collect();
    plan.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    plan.dedup_by_key(|p| p.0);
    plan
}

/// Run the random walk from `τ = 0` to `T` or until the front reaches the
/// node before the far end.
pub fn run(
    problem: &DimensionlessProblem,
    numerics: &Numerics,
    left: &LeftBoundary,
) -> Result<SolutionTrace, SolverError> {
    problem.validate()?;
    left.validate()?;
    numerics.validate(problem.final_time)?;
    let started = Instant::now();

    let lattice = if problem.final_time == 0.0 {
        let (dz, nodes) = Lattice::spatial(numerics.dtau, problem.length)?;
        Lattice {
            dtau: numerics.dtau,
            dz,
            nodes,
            steps: 0,
            length: problem.length,
        }
    } else {
        build_lattice(numerics.dtau, problem.length, problem.final_time)?
    };
    if front_index(problem.h0, lattice.dz) >= lattice.nodes - 1 {
        return Err(SolverError::Lattice("h0 leaves no room for the front".into()));
    }

    let mut field = init_walkers(&problem.u0, numerics.n, &lattice, problem.h0)?;
    let u_max = numerics
        .u_max
        .unwrap_or_else(|| estimate_u_max(problem, left, &field));
    let report = validate_timestep(numerics.n, problem.a0, u_max, numerics.dtau);
    if !report.ok() {
        if numerics.strict {
            return Err(SolverError::StrictTimestep(report.to_string()));
        }
        log::warn!("time step condition fails for U_max = {u_max}:\n{report}");
    }

    let walk = RandomWalk {
        problem,
        lattice,
        left,
        n: numerics.n,
        coupling: numerics.coupling,
    };
    let mut rng = RandomStream::for_member(numerics.seed, numerics.member);
    let mut front = FrontState::new(problem.h0, lattice.dz);
    let mut next = vec![0u64; field.counts.len()];
    let mut diag = Diagnostics::default();
    let plan = snapshot_plan(&numerics.snapshot_times, lattice.dtau, lattice.steps);
    let mut plan_iter = plan.iter().peekable();

    let mut trace = SolutionTrace {
        solver: SolverKind::RandomWalk,
        tau: Vec::new(),
        front: Vec::new(),
        mass: Vec::new(),
        left: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Diagnostics::default(),
        wall_time: 0.0,
        final_time: problem.final_time,
        seed: Some(numerics.seed),
        problem_hash: problem_hash(problem, left),
        config_echo: problem_echo(problem, left),
        scales: problem.scales,
        dimensional: false,
    };

    let mut j = 0;
    loop {
        diag.injected_left += walk.populate_left(j, &mut field);
        let tau = j as f64 * lattice.dtau;
        let stop = j == lattice.steps || front.k >= lattice.nodes - 1;
        if j % numerics.record_every == 0 || stop {
            let u = field.concentration(front.k);
            trace.tau.push(tau);
            trace.front.push(front.h);
            trace.mass.push(total_mass(&u, front.h, lattice.dz));
            trace.left.push(u[0]);
        }
        while let Some(&&(js, requested)) = plan_iter.peek() {
            if js != j {
                break;
            }
            let upto = front.k;
            trace.snapshots.push(Snapshot {
                requested,
                tau,
                h: front.h,
                z: (0..=upto).map(|i| lattice.z(i)).collect(),
                u: field.concentration(upto),
            });
            plan_iter.next();
        }
        if stop {
            diag.reached_end = front.k >= lattice.nodes - 1;
            break;
        }
        walk.advance(&mut field, &mut next, &mut front, &mut rng, &mut diag);
        j += 1;
    }

    diag.steps = j;
    diag.realized_condition_ok =
        validate_timestep(numerics.n, problem.a0, diag.realized_u_max, numerics.dtau).ok();
    if diag.violators > 0 {
        log::warn!(
            "{} of {} front arrivals had P_b outside [0, 1)",
            diag.violators,
            diag.front_arrivals
        );
    }
    trace.diagnostics = diag;
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Forcing, SigmaSpec};
    use approx::assert_relative_eq;

    /// Draws replayed from fixed lists.
    struct Scripted {
        steps: Vec<i32>,
        uniforms: Vec<f64>,
    }

    impl WalkerDraws for Scripted {
        fn draw_step(&mut self) -> i32 {
            self.steps.remove(0)
        }
        fn draw_uniform(&mut self) -> f64 {
            self.uniforms.remove(0)
        }
    }

    fn dirichlet_problem() -> DimensionlessProblem {
        DimensionlessProblem {
            bi: 5000.0,
            a0: 2500.0,
            henry: 2.5,
            h0: 0.001,
            length: 1.0,
            final_time: 1e-4,
            u0: Profile::Constant(1.0),
            forcing: Forcing::Constant(10.0),
            sigma: SigmaSpec::Linear(0.05),
            scales: None,
        }
    }

    #[test]
    fn lattice_examples() {
        let l = build_lattice(5e-8, 1.0, 1e-4).unwrap();
        assert_relative_eq!(l.dz, 3.16228e-4, max_relative = 1e-5);
        assert_eq!(l.steps, 2000);
        assert_eq!(l.nodes, (1.0 / l.dz).floor() as usize);
        assert_eq!(build_lattice(0.5, 10.0, 1.0).unwrap().dz, 1.0);
        let l = build_lattice(2.5e-8, 1.0, 1e-4).unwrap();
        assert_relative_eq!(l.dz, 2.23607e-4, max_relative = 1e-5);
        assert!(l.truncation() >= 0.0 && l.truncation() < l.dz);
    }

    #[test]
    fn lattice_rejections() {
        assert!(build_lattice(0.5, 1.5, 1.0).is_err()); // one cell
        assert!(build_lattice(1e-4, 1.0, 1e-5).is_err()); // no step
        assert!(build_lattice(1.5, 10.0, 10.0).is_err());
        assert!(build_lattice(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn front_index_examples() {
        assert_eq!(front_index(0.001, 3.16228e-4), 3);
        assert_eq!(front_index(0.0, 3.16228e-4), 0);
        let dz = 0.25;
        assert_eq!(front_index(dz, dz), 1);
    }

    #[test]
    fn init_examples() {
        let l = build_lattice(5e-8, 1.0, 1e-4).unwrap();
        let f = init_walkers(&Profile::Constant(1.0), 1000, &l, 0.001).unwrap();
        assert_eq!(&f.counts[..6], &[1000, 1000, 1000, 1000, 0, 0]);
        let f = init_walkers(&Profile::Constant(0.0), 1000, &l, 0.001).unwrap();
        assert_eq!(f.total(), 0);
        let lin = Profile::Linear {
            intercept: 0.0,
            slope: 1.0 / 0.001,
        };
        let f = init_walkers(&lin, 100, &l, 0.001).unwrap();
        assert_eq!(&f.counts[..5], &[0, 32, 63, 95, 0]);
        let short = Profile::Table(vec![(0.0, 1.0), (0.0005, 1.0)]);
        assert!(matches!(
            init_walkers(&short, 10, &l, 0.001),
            Err(SolverError::UndefinedInitialData { node: 2, .. })
        ));
    }

    #[test]
    fn dirichlet_examples() {
        let mut f = WalkerField::zeros(5, 1000);
        assert_eq!(apply_left_dirichlet(&mut f, 10.0), 10_000);
        let mut f = WalkerField::zeros(5, 10);
        apply_left_dirichlet(&mut f, 0.4);
        assert_eq!(f.counts[0], 4);
        apply_left_dirichlet(&mut f, 0.0);
        assert_eq!(f.counts[0], 0);
    }

    #[test]
    fn robin_examples() {
        let dz = 3.16228e-4;
        let mut f = WalkerField::zeros(5, 1000);
        f.counts[1] = 5000;
        assert_eq!(apply_left_robin(&mut f, 5000.0, 2.5, 10.0, dz), 4202);
        let mut f = WalkerField::zeros(5, 1000);
        assert_eq!(apply_left_robin(&mut f, 5000.0, 2.5, 0.0, dz), 0);
        let mut f = WalkerField::zeros(5, 1000);
        assert_eq!(apply_left_robin(&mut f, 1e8, 2.5, 10.0, dz), 4000);
    }

    #[test]
    fn reaction_probability_examples() {
        let pb = reaction_probability(200.0, 1000, 5e-8, 2500.0, 5e-5);
        assert_relative_eq!(pb, 3.16228e-4 * 2.5 * 199.99995, max_relative = 1e-5);
        assert_relative_eq!(pb, 0.158114, max_relative = 1e-5);
        assert_eq!(reaction_probability(3.0, 1000, 5e-8, 2500.0, 3.0), 0.0);
        assert_eq!(reaction_probability(0.0, 1000, 5e-8, 2500.0, 0.0), 0.0);
    }

    #[test]
    fn increment_examples() {
        let dh = per_walker_increment(200.0, 1000, 5e-8, 2500.0, 0.0);
        assert_relative_eq!(dh, 2.5e-5, max_relative = 1e-12);
        assert!(dh < (1e-7f64).sqrt());
        assert_eq!(per_walker_increment(7.0, 1000, 5e-8, 2500.0, 7.0), 0.0);
        for c in [1.0, 50.0, 999.0] {
            let ratio = per_walker_increment(c, 1000, 5e-8, 2500.0, 0.5)
                / reaction_probability(c, 1000, 5e-8, 2500.0, 0.5);
            assert_relative_eq!(ratio, (5e-8f64 / 2.0).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn timestep_examples() {
        let r = validate_timestep(1000, 2500.0, 200.0, 5e-8);
        assert!(r.ok());
        assert_relative_eq!(r.checks[0].lhs, 2.236e-4, max_relative = 1e-3);
        assert_relative_eq!(r.checks[0].rhs, 1.414e-3, max_relative = 1e-3);
        assert!(validate_timestep(1000, 2500.0, 0.0, 5e-8).ok());
        let r = validate_timestep(1000, 2500.0, 1e4, 5e-8);
        assert!(!r.ok());
        assert_relative_eq!(r.checks[0].rhs, 2.83e-5, max_relative = 1e-3);
        assert!(!validate_timestep(1000, 2500.0, 0.0, 1.5).ok());
    }

    #[test]
    fn empty_field_stays_empty() {
        let mut p = dirichlet_problem();
        p.u0 = Profile::Constant(0.0);
        let left = LeftBoundary::Dirichlet { u_d: 0.0 };
        let walk = RandomWalk {
            problem: &p,
            lattice: build_lattice(5e-8, 1.0, 1e-4).unwrap(),
            left: &left,
            n: 1000,
            coupling: SigmaCoupling::Counts,
        };
        let mut field = init_walkers(&p.u0, 1000, &walk.lattice, p.h0).unwrap();
        let mut next = Vec::new();
        let mut front = FrontState::new(p.h0, walk.lattice.dz);
        let before = front;
        let mut rng = RandomStream::new(1);
        let mut diag = Diagnostics::default();
        for j in 0..10 {
            walk.step(j, &mut field, &mut next, &mut front, &mut rng, &mut diag);
        }
        assert_eq!(field.total(), 0);
        assert_eq!(front, before);
    }

    #[test]
    fn single_push_advances_by_one_increment() {
        let mut p = dirichlet_problem();
        p.sigma = SigmaSpec::Linear(0.0);
        let left = LeftBoundary::Dirichlet { u_d: 0.0 };
        let lattice = build_lattice(5e-8, 1.0, 1e-4).unwrap();
        let walk = RandomWalk {
            problem: &p,
            lattice,
            left: &left,
            n: 1,
            coupling: SigmaCoupling::Counts,
        };
        let mut front = FrontState::new(p.h0, lattice.dz);
        let k = front.k;
        let mut field = WalkerField::zeros(lattice.nodes + 1, 1);
        field.counts[k] = 1;
        let mut next = Vec::new();
        let mut draws = Scripted {
            steps: vec![1],
            uniforms: vec![1e-9],
        };
        let mut diag = Diagnostics::default();
        let h_before = front.h;
        let ev = walk.advance(&mut field, &mut next, &mut front, &mut draws, &mut diag);
        let dh = per_walker_increment(1.0, 1, lattice.dtau, p.a0, 0.0);
        assert_eq!(ev.pushes, 1);
        assert_eq!(front.h, h_before + dh);
        assert_eq!(field.counts[k], 1);
        assert_eq!(field.total(), 1);
    }

    #[test]
    fn failed_reaction_reflects_left() {
        let p = dirichlet_problem();
        let left = LeftBoundary::Dirichlet { u_d: 0.0 };
        let lattice = build_lattice(5e-8, 1.0, 1e-4).unwrap();
        let walk = RandomWalk {
            problem: &p,
            lattice,
            left: &left,
            n: 1000,
            coupling: SigmaCoupling::Counts,
        };
        let mut front = FrontState::new(p.h0, lattice.dz);
        let k = front.k;
        let mut field = WalkerField::zeros(lattice.nodes + 1, 1000);
        field.counts[k] = 1;
        let mut next = Vec::new();
        let mut draws = Scripted {
            steps: vec![1],
            uniforms: vec![0.999],
        };
        let mut diag = Diagnostics::default();
        let ev = walk.advance(&mut field, &mut next, &mut front, &mut draws, &mut diag);
        assert_eq!(ev.reflections, 1);
        assert_eq!(field.counts[k - 1], 1);
        assert_eq!(front.h, p.h0);
    }

    #[test]
    fn out_of_range_probability_keeps_walker_in_place() {
        let mut p = dirichlet_problem();
        p.sigma = SigmaSpec::Linear(1e6); // σ̃ ≫ counts, P_b < 0
        let left = LeftBoundary::Dirichlet { u_d: 0.0 };
        let lattice = build_lattice(5e-8, 1.0, 1e-4).unwrap();
        let walk = RandomWalk {
            problem: &p,
            lattice,
            left: &left,
            n: 10,
            coupling: SigmaCoupling::Counts,
        };
        let mut front = FrontState::new(p.h0, lattice.dz);
        let k = front.k;
        let mut field = WalkerField::zeros(lattice.nodes + 1, 10);
        field.counts[k] = 1;
        let mut next = Vec::new();
        let mut draws = Scripted {
            steps: vec![1],
            uniforms: vec![],
        };
        let mut diag = Diagnostics::default();
        let ev = walk.advance(&mut field, &mut next, &mut front, &mut draws, &mut diag);
        assert_eq!(ev.violators, 1);
        assert_eq!(field.counts[k], 1);
        assert_eq!(front.violator_count, 1);
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let mut p = dirichlet_problem();
        p.final_time = 0.0;
        let left = LeftBoundary::Dirichlet { u_d: 10.0 };
        let t = run(&p, &Numerics::new(5e-8, 100, 1), &left).unwrap();
        assert_eq!(t.tau, vec![0.0]);
        assert_eq!(t.front, vec![p.h0]);
    }

    #[test]
    fn strict_mode_rejects_bad_timestep() {
        let p = dirichlet_problem();
        let left = LeftBoundary::Dirichlet { u_d: 10.0 };
        let mut num = Numerics::new(5e-8, 1000, 1);
        num.strict = true;
        // Default estimate n·u_D = 1e4 violates the condition at this step.
        assert!(matches!(run(&p, &num, &left), Err(SolverError::StrictTimestep(_))));
        num.u_max = Some(1000.0);
        num.snapshot_times = vec![0.0];
        let mut short = p.clone();
        short.final_time = 1e-6;
        assert!(run(&short, &num, &left).is_ok());
    }

    #[test]
    fn snapshot_plan_dedups_and_clamps() {
        let plan = snapshot_plan(&[5e-5, 4.99999e-5, 1e-4, 0.0], 5e-8, 2000);
        assert_eq!(plan.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1000, 2000]);
    }
}
