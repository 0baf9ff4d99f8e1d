//! Max-min transmit-power allocation for the LSFD receiver.
//!
//! The common rate target is bisected: each candidate target is tested by a
//! normalized fixed-point power update projected onto the per-user cap
//! `eta <= 1`, starting from full power. Feasibility of a target is monotone
//! (any rate below a feasible one is feasible), which is what makes bisection
//! sound. The returned allocation's minimum rate never falls below the
//! equal-power minimum rate: full power is always kept as a candidate.

use crate::channel::{EstimationState, PilotAssignment};
use crate::error::Result;
use crate::receivers::{lsfd_combiner_and_sinr, lsfd_load, lsfd_statistics_with_load};

/// Everything held fixed while powers are optimized: the pilot-derived
/// estimation statistics (pilot powers are not an optimization variable)
/// and the pilot assignment.
#[derive(Clone, Copy)]
pub struct LsfdContext<'a> {
    pub est: &'a EstimationState,
    pub assignment: &'a PilotAssignment,
}

impl<'a> LsfdContext<'a> {
    pub fn new(est: &'a EstimationState, assignment: &'a PilotAssignment) -> Self {
        LsfdContext { est, assignment }
    }

    pub fn n_users(&self) -> usize {
        self.est.n_users()
    }
}

/// Closed-form LSFD SINR of every user at transmit powers `eta` (which need
/// not match `est.eta`; the estimation statistics are pilot-side and do not
/// depend on the data powers).
pub fn lsfd_sinrs(ctx: &LsfdContext, eta: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(eta.len(), ctx.n_users());
    let load = lsfd_load(ctx.est, eta);
    let mut sinrs = Vec::with_capacity(ctx.n_users());
    for k in 0..ctx.n_users() {
        if eta[k] <= 0.0 {
            sinrs.push(0.0);
            continue;
        }
        let stats = lsfd_statistics_with_load(k, ctx.est, ctx.assignment, &load);
        let (_, sinr) = lsfd_combiner_and_sinr(&stats, ctx.est.rho, eta)?;
        sinrs.push(sinr);
    }
    Ok(sinrs)
}

/// Minimum over users of the LSFD rate `log2(1 + SINR_k(eta))`.
pub fn min_rate(ctx: &LsfdContext, eta: &[f64]) -> Result<f64> {
    let sinrs = lsfd_sinrs(ctx, eta)?;
    Ok(sinrs
        .iter()
        .map(|&s| (1.0 + s).log2())
        .fold(f64::INFINITY, f64::min))
}

/// Smallest rate ceiling no feasible allocation can exceed: every user's
/// SINR is bounded by its interference-free SINR at full own power, so the
/// best such rate over users caps the max-min optimum.
pub fn solo_rate_upper_bound(ctx: &LsfdContext) -> Result<f64> {
    let k = ctx.n_users();
    let mut best = 0.0f64;
    for u in 0..k {
        let mut eta = vec![0.0; k];
        eta[u] = 1.0;
        let sinrs = lsfd_sinrs(ctx, &eta)?;
        best = best.max((1.0 + sinrs[u]).log2());
    }
    Ok(best)
}

/// Outcome of one feasibility test at a fixed rate target.
#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    /// Powers at exit; a feasibility witness when `feasible`.
    pub eta: Vec<f64>,
    /// Power-update sweeps performed (0 when full power already qualifies).
    pub iterations: usize,
    /// Diagnostic: min over users of `SINR_k / gamma` at exit
    /// (`+inf` when the target rate is zero).
    pub margin: f64,
}

/// Relative power change below which the update is considered settled.
const FIXED_POINT_TOL: f64 = 1e-12;

/// Tests whether every user can reach `target_rate` under the cap
/// `eta <= 1`, by the normalized power update
/// `eta_k <- min(1, gamma * eta_k / SINR_k(eta))` with
/// `gamma = 2^target_rate - 1`, started from full power.
///
/// Declares feasible as soon as every SINR is at least `gamma * (1 - tol)`
/// (the current powers are then a witness); declares infeasible when the
/// update settles, or exhausts `max_iter`, without producing one.
pub fn feasibility_probe(
    ctx: &LsfdContext,
    target_rate: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FeasibilityOutcome> {
    assert!(
        target_rate >= 0.0 && target_rate.is_finite(),
        "target rate must be finite and nonnegative, got {target_rate}"
    );
    let k = ctx.n_users();
    let gamma = 2f64.powf(target_rate) - 1.0;
    let mut eta = vec![1.0; k];
    let mut sinrs = lsfd_sinrs(ctx, &eta)?;
    let margin = |sinrs: &[f64]| -> f64 {
        if gamma == 0.0 {
            f64::INFINITY
        } else {
            sinrs.iter().map(|&s| s / gamma).fold(f64::INFINITY, f64::min)
        }
    };
    if sinrs.iter().all(|&s| s >= gamma) {
        return Ok(FeasibilityOutcome {
            feasible: true,
            eta,
            iterations: 0,
            margin: margin(&sinrs),
        });
    }
    for it in 1..=max_iter {
        let mut change = 0.0f64;
        for u in 0..k {
            let next = (gamma * eta[u] / sinrs[u]).min(1.0);
            let scale = eta[u].max(next);
            change = change.max((next - eta[u]).abs() / scale);
            eta[u] = next;
        }
        sinrs = lsfd_sinrs(ctx, &eta)?;
        let witness = sinrs.iter().all(|&s| s >= gamma * (1.0 - tol));
        if witness || change < FIXED_POINT_TOL {
            return Ok(FeasibilityOutcome {
                feasible: witness,
                eta,
                iterations: it,
                margin: margin(&sinrs),
            });
        }
    }
    Ok(FeasibilityOutcome {
        feasible: false,
        eta,
        iterations: max_iter,
        margin: margin(&sinrs),
    })
}

/// Tuning knobs for [`maxmin_bisection`].
#[derive(Debug, Clone, Copy)]
pub struct MaxMinOptions {
    /// Stop once the rate bracket is narrower than this (bits/s/Hz).
    pub eps_rate: f64,
    /// Relative SINR slack accepted by the feasibility probe.
    pub tol: f64,
    /// Power-update sweep budget per feasibility probe.
    pub max_iter: usize,
}

impl Default for MaxMinOptions {
    fn default() -> Self {
        MaxMinOptions {
            eps_rate: 1e-3,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// A max-min power allocation and how it was reached.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    /// Per-user transmit powers, each in (0, 1].
    pub eta: Vec<f64>,
    /// min over users of `log2(1 + SINR_k(eta))`; never below the
    /// equal-power value (full power stays a candidate throughout).
    pub achieved_min_rate: f64,
    /// False when some probe exhausted its sweep budget before settling;
    /// the allocation is still valid but may be conservative.
    pub converged: bool,
    /// Number of feasibility probes run.
    pub iterations: usize,
}

/// Maximizes the minimum user rate over per-user power caps by bisecting the
/// common rate target between the equal-power minimum rate (feasible by
/// witness) and the interference-free single-user ceiling.
pub fn maxmin_bisection(ctx: &LsfdContext, opts: &MaxMinOptions) -> Result<PowerAllocation> {
    assert!(opts.eps_rate > 0.0, "eps_rate must be positive");
    let ones = vec![1.0; ctx.n_users()];
    let equal_power_rate = min_rate(ctx, &ones)?;
    let mut lo = equal_power_rate;
    let mut hi = solo_rate_upper_bound(ctx)?.max(lo);
    let mut best_eta = ones.clone();
    let mut probes = 0usize;
    let mut converged = true;
    // Feasibility must be monotone in the target; track the frontier so a
    // probe that contradicts it is caught in debug builds.
    let mut max_feasible = lo;
    let mut min_infeasible = f64::INFINITY;
    while hi - lo > opts.eps_rate {
        let mid = 0.5 * (lo + hi);
        let probe = feasibility_probe(ctx, mid, opts.tol, opts.max_iter)?;
        probes += 1;
        if probe.feasible {
            debug_assert!(
                mid <= min_infeasible,
                "feasible target {mid} above an infeasible one {min_infeasible}"
            );
            max_feasible = max_feasible.max(mid);
            lo = mid;
            best_eta = probe.eta;
        } else {
            debug_assert!(
                mid >= max_feasible,
                "infeasible target {mid} below a feasible one {max_feasible}"
            );
            if probe.iterations == opts.max_iter {
                converged = false;
            }
            min_infeasible = min_infeasible.min(mid);
            hi = mid;
        }
    }
    // Return the better of the last feasibility witness and full power, so
    // the probe's tolerance slack can never drop the result below the
    // equal-power baseline.
    let best_rate = min_rate(ctx, &best_eta)?;
    let (eta, achieved_min_rate) = if best_rate >= equal_power_rate {
        (best_eta, best_rate)
    } else {
        (ones, equal_power_rate)
    };
    Ok(PowerAllocation {
        eta,
        achieved_min_rate,
        converged,
        iterations: probes,
    })
}
