//! Post-processing of solution traces: total mass, profiles, solver
//! comparison and ensemble statistics.
//!
//! Comparisons sample the reference profile onto the random-walk nodes by
//! linear interpolation in `z` and pair series by nearest recorded time.

use crate::error::ObservableError;
use crate::rwm::front_index;
use crate::trace::{Diagnostics, Snapshot, SolutionTrace};

/// Composite trapezoid over uniformly spaced `values`.
pub fn trapezoid(values: &[f64], dz: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dz * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// `∫₀^h u dz` for node values `u_i = u(i·dz)`.
///
/// Trapezoid over nodes `0..=k` with `k = ⌊h/dz⌋`, closed with the sliver
/// `[z_k, h]` at the value `u(z_k)`.
pub fn total_mass(profile: &[f64], h: f64, dz: f64) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let k = front_index(h, dz).min(profile.len() - 1);
    let sliver = (h - k as f64 * dz).max(0.0);
    trapezoid(&profile[..=k], dz) + profile[k] * sliver
}

/// The stored snapshot nearest `tau`.
pub fn profile_at(trace: &SolutionTrace, tau: f64) -> Result<&Snapshot, ObservableError> {
    if !(tau >= 0.0 && tau <= trace.final_time * (1.0 + 1e-12)) {
        return Err(ObservableError::OutOfRange {
            query: tau,
            final_time: trace.final_time,
        });
    }
    trace
        .snapshots
        .iter()
        .min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs()))
        .ok_or_else(|| ObservableError::NoSnapshot {
            query: tau,
            available: trace.snapshot_times(),
        })
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` increasing.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let idx = xs.partition_point(|&v| v < x);
    if idx == 0 {
        return ys[0];
    }
    if idx >= xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ys[idx - 1] + w * (ys[idx] - ys[idx - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileError {
    /// Requested comparison time.
    pub tau: f64,
    /// Realized times of the two snapshots used.
    pub tau_rwm: f64,
    pub tau_ref: f64,
    /// `sqrt(Δz·Σ e_i²)` over the compared nodes.
    pub l2: f64,
    pub linf: f64,
    pub reference_max: f64,
    /// Number of nodes compared (those inside both fronts).
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// `(τ, |h_rwm(τ) − h_ref(τ)|)` on the random-walk time axis.
    pub front_abs_error: Vec<(f64, f64)>,
    pub front_rel_error_at_t: f64,
    pub profiles: Vec<ProfileError>,
    pub mass_rel_error_at_t: f64,
    /// Mean over `τ > 0` of `|u_rwm(τ,0) − u_ref(τ,0)| / u_ref(τ,0)`.
    pub left_rel_error_mean: f64,
}

pub fn compare(
    rwm: &SolutionTrace,
    reference: &SolutionTrace,
    times: &[f64],
) -> Result<ErrorReport, ObservableError> {
    if rwm.problem_hash != reference.problem_hash {
        return Err(ObservableError::Incompatible(format!(
            "problem hashes differ ({} vs {})",
            rwm.problem_hash, reference.problem_hash
        )));
    }
    if rwm.dimensional != reference.dimensional {
        return Err(ObservableError::Incompatible(
            "one trace is dimensional and the other is not".into(),
        ));
    }

    let front_abs_error: Vec<(f64, f64)> = rwm
        .tau
        .iter()
        .zip(&rwm.front)
        .map(|(&t, &h)| (t, (h - reference.front[reference.nearest_index(t)]).abs()))
        .collect();

    let t_end = rwm.final_tau().min(reference.final_tau());
    let i_rwm = rwm.nearest_index(t_end);
    let i_ref = reference.nearest_index(t_end);
    let h_ref = reference.front[i_ref];
    let front_rel_error_at_t = (rwm.front[i_rwm] - h_ref).abs() / h_ref;
    let m_ref = reference.mass[i_ref];
    let mass_rel_error_at_t = if m_ref != 0.0 {
        (rwm.mass[i_rwm] - m_ref).abs() / m_ref
    } else {
        (rwm.mass[i_rwm] - m_ref).abs()
    };

    let mut profiles = Vec::with_capacity(times.len());
    for &tau in times {
        let a = profile_at(rwm, tau)?;
        let b = profile_at(reference, tau)?;
        profiles.push(profile_error(tau, a, b));
    }

    let mut left_sum = 0.0;
    let mut left_count = 0usize;
    for (&t, &u) in rwm.tau.iter().zip(&rwm.left) {
        if t <= 0.0 {
            continue;
        }
        let u_ref = reference.left[reference.nearest_index(t)];
        if u_ref != 0.0 {
            left_sum += (u - u_ref).abs() / u_ref.abs();
            left_count += 1;
        }
    }

    Ok(ErrorReport {
        front_abs_error,
        front_rel_error_at_t,
        profiles,
        mass_rel_error_at_t,
        left_rel_error_mean: if left_count > 0 {
            left_sum / left_count as f64
        } else {
            0.0
        },
    })
}

fn profile_error(tau: f64, a: &Snapshot, b: &Snapshot) -> ProfileError {
    let limit = a.h.min(b.h);
    let dz = if a.z.len() > 1 { a.z[1] - a.z[0] } else { 0.0 };
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    let mut nodes = 0;
    for (&z, &u) in a.z.iter().zip(&a.u) {
        if z > limit {
            break;
        }
        let e = (u - interp(&b.z, &b.u, z)).abs();
        sq += e * e;
        linf = linf.max(e);
        nodes += 1;
    }
    ProfileError {
        tau,
        tau_rwm: a.tau,
        tau_ref: b.tau,
        l2: (dz * sq).sqrt(),
        linf,
        reference_max: b.u.iter().copied().fold(0.0, f64::max),
        nodes,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub members: usize,
    pub tau: Vec<f64>,
    pub mean_front: Vec<f64>,
    /// Sample standard deviation (zero for a single member).
    pub std_front: Vec<f64>,
    pub mean_mass: Vec<f64>,
    pub mean_left: Vec<f64>,
    pub mean_snapshots: Vec<Snapshot>,
}

pub fn ensemble_stats(traces: &[SolutionTrace]) -> Result<EnsembleStats, ObservableError> {
    let first = traces.first().ok_or(ObservableError::EmptyEnsemble)?;
    for t in &traces[1..] {
        if t.problem_hash != first.problem_hash {
            return Err(ObservableError::Incompatible(
                "ensemble members solve different problems".into(),
            ));
        }
        if t.tau != first.tau {
            return Err(ObservableError::Incompatible(
                "ensemble members have different time axes".into(),
            ));
        }
        if t.snapshots.len() != first.snapshots.len() {
            return Err(ObservableError::Incompatible(
                "ensemble members have different snapshots".into(),
            ));
        }
    }
    let m = traces.len() as f64;
    let len = first.tau.len();
    let mean_of = |f: &dyn Fn(&SolutionTrace) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|i| traces.iter().map(|t| f(t)[i]).sum::<f64>() / m)
            .collect()
    };
    let mean_front = mean_of(&|t| &t.front);
    let mean_mass = mean_of(&|t| &t.mass);
    let mean_left = mean_of(&|t| &t.left);
    let std_front = (0..len)
        .map(|i| {
            if traces.len() < 2 {
                return 0.0;
            }
            let ss: f64 = traces
                .iter()
                .map(|t| (t.front[i] - mean_front[i]).powi(2))
                .sum();
            (ss / (m - 1.0)).sqrt()
        })
        .collect();

    let mean_snapshots = (0..first.snapshots.len())
        .map(|s| {
            let widest = traces
                .iter()
                .map(|t| &t.snapshots[s])
                .max_by_key(|snap| snap.z.len())
                .expect("non-empty ensemble");
            let mut u = vec![0.0; widest.z.len()];
            for t in traces {
                for (acc, v) in u.iter_mut().zip(&t.snapshots[s].u) {
                    *acc += v;
                }
            }
            u.iter_mut().for_each(|v| *v /= m);
            Snapshot {
                requested: first.snapshots[s].requested,
                tau: first.snapshots[s].tau,
                h: traces.iter().map(|t| t.snapshots[s].h).sum::<f64>() / m,
                z: widest.z.clone(),
                u,
            }
        })
        .collect();

    Ok(EnsembleStats {
        members: traces.len(),
        tau: first.tau.clone(),
        mean_front,
        std_front,
        mean_mass,
        mean_left,
        mean_snapshots,
    })
}

impl EnsembleStats {
    /// Trace of the ensemble mean, usable wherever a single trace is.
    pub fn mean_trace(&self, template: &SolutionTrace, members: &[SolutionTrace]) -> SolutionTrace {
        let mut diagnostics = Diagnostics::default();
        for t in members {
            let d = &t.diagnostics;
            diagnostics.front_arrivals += d.front_arrivals;
            diagnostics.adsorbed += d.adsorbed;
            diagnostics.violators += d.violators;
            diagnostics.injected_left += d.injected_left;
            diagnostics.absorbed_left += d.absorbed_left;
            diagnostics.max_increment = diagnostics.max_increment.max(d.max_increment);
            diagnostics.realized_u_max = diagnostics.realized_u_max.max(d.realized_u_max);
            diagnostics.pb.evaluations += d.pb.evaluations;
            diagnostics.pb.min = diagnostics.pb.min.min(d.pb.min);
            diagnostics.pb.max = diagnostics.pb.max.max(d.pb.max);
            for (a, b) in diagnostics.pb.histogram.iter_mut().zip(d.pb.histogram) {
                *a += b;
            }
            diagnostics.steps = diagnostics.steps.max(d.steps);
            diagnostics.reached_end |= d.reached_end;
        }
        diagnostics.realized_condition_ok =
            members.iter().all(|t| t.diagnostics.realized_condition_ok);
        SolutionTrace {
            tau: self.tau.clone(),
            front: self.mean_front.clone(),
            mass: self.mean_mass.clone(),
            left: self.mean_left.clone(),
            snapshots: self.mean_snapshots.clone(),
            diagnostics,
            wall_time: members.iter().map(|t| t.wall_time).sum(),
            seed: None,
            ..template.clone()
        }
    }
}
