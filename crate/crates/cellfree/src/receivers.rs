//! Linear uplink receivers and their SINR evaluation.
//!
//! Four receiver families operate on the same estimated channels:
//!
//! * **MMSE** — the optimal linear combiner against estimated channels and
//!   worst-case Gaussian residual interference, with a closed-form SINR that
//!   needs only one quadratic form per user;
//! * **partial MMSE (PMMSE)** — MMSE restricted to a per-user index set
//!   (the user's own pilot group plus one selected user per other pilot
//!   group), with everything outside the set treated as uncorrelated noise;
//! * **LSFD** — each AP forwards only the matched-filter statistic, and a
//!   central node combines per-AP statistics using large-scale coefficients
//!   only; its SINR is a closed form in the large-scale state;
//! * **MF** — the LSFD frame evaluated at a fixed combining vector
//!   (all-ones by default), plus its infinite-M limit.
//!
//! The M×M solves that define MMSE/PMMSE are carried out through the
//! matrix-inversion lemma: with `Σ = Q + ρ G E G^H` (Q diagonal, rank ≤ K
//! update), every application of `Σ^{-1}` reduces to one small Hermitian
//! Cholesky of the capacitance matrix `E^{-1}/ρ + G^H Q^{-1} G`, factorized
//! once per fading realization and shared across users.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{EstimationState, PilotAssignment};
use crate::error::{Error, Result};
use crate::linalg::{
    cdot_weighted, cholesky_complex, cholesky_complex_solve, cholesky_real, cholesky_real_solve,
    ComplexMatrix, RealMatrix,
};
use crate::network::{distance, generate_layout, path_loss, AreaConfig, PathLossParams,
    ShadowingParams};

/// Which receiver produced a combining vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerKind {
    Mf,
    Mmse,
    Pmmse,
    Lsfd,
}

/// A length-M combining vector for one user.
#[derive(Debug, Clone)]
pub struct Combiner {
    pub v: Vec<Complex64>,
    pub kind: CombinerKind,
}

/// Instantaneous SINR of combiner `v` for user `k` against the estimated
/// channels of all users:
///
/// `rho*eta_k*|v^H ghat_k|^2 / (rho*Σ_{i≠k} eta_i*|v^H ghat_i|^2 + v^H D v)`
///
/// where `D = diag(est.d)` lumps receiver noise and channel-estimation error.
/// Scale-invariant in `v`; `v` must be nonzero.
pub fn instantaneous_sinr(
    v: &[Complex64],
    k: usize,
    ghat: &ComplexMatrix,
    est: &EstimationState,
) -> f64 {
    let m = ghat.rows();
    let n_users = ghat.cols();
    assert_eq!(v.len(), m);
    assert!(
        v.iter().any(|c| c.re != 0.0 || c.im != 0.0),
        "combiner must be nonzero"
    );
    let mut interference = 0.0;
    let mut signal = 0.0;
    for i in 0..n_users {
        let gi = ghat.col(i);
        let mut re = 0.0;
        let mut im = 0.0;
        for (a, b) in v.iter().zip(gi) {
            // conj(v) * ghat
            re += a.re * b.re + a.im * b.im;
            im += a.re * b.im - a.im * b.re;
        }
        let p = est.rho * est.eta[i] * (re * re + im * im);
        if i == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    let mut noise = 0.0;
    for (a, &dm) in v.iter().zip(&est.d) {
        noise += (a.re * a.re + a.im * a.im) * dm;
    }
    signal / (interference + noise)
}

/// Per-realization MMSE state shared across users: the D-weighted Gram
/// `S = Ghat^H D^{-1} Ghat` over all users and the Cholesky factor of the
/// capacitance matrix `W = diag(1/(rho*eta)) + S` over users with positive
/// power.
pub struct MmseRealization {
    n_users: usize,
    /// Row-major K×K Hermitian Gram (full matrix stored).
    s: Vec<Complex64>,
    /// Users with eta > 0, ascending; rows/cols of `w_chol` follow this order.
    active: Vec<usize>,
    /// Lower Cholesky factor of W (row-major, |active|²).
    w_chol: Vec<Complex64>,
}

impl MmseRealization {
    pub fn new(ghat: &ComplexMatrix, est: &EstimationState) -> Result<MmseRealization> {
        let k = ghat.cols();
        assert_eq!(est.n_users(), k);
        assert_eq!(est.n_aps(), ghat.rows());
        let inv_d: Vec<f64> = est.d.iter().map(|&d| 1.0 / d).collect();
        let mut s = vec![Complex64::new(0.0, 0.0); k * k];
        for i in 0..k {
            for j in i..k {
                let v = cdot_weighted(ghat.col(i), ghat.col(j), &inv_d);
                s[i * k + j] = v;
                s[j * k + i] = v.conj();
            }
        }
        let active: Vec<usize> = (0..k).filter(|&i| est.eta[i] > 0.0).collect();
        let r = active.len();
        let mut w = vec![Complex64::new(0.0, 0.0); r * r];
        for (ai, &i) in active.iter().enumerate() {
            for (aj, &j) in active.iter().enumerate() {
                w[ai * r + aj] = s[i * k + j];
            }
            w[ai * r + ai] += 1.0 / (est.rho * est.eta[i]);
        }
        cholesky_complex(&mut w, r, "MMSE capacitance")?;
        Ok(MmseRealization {
            n_users: k,
            s,
            active,
            w_chol: w,
        })
    }

    /// `x_k = ghat_k^H Sigma^{-1} ghat_k` via the inversion lemma:
    /// `x_k = S[k,k] - S[act,k]^H W^{-1} S[act,k]`.
    fn quadratic_form(&self, k: usize) -> f64 {
        let kk = self.n_users;
        let r = self.active.len();
        let mut col: Vec<Complex64> = self.active.iter().map(|&i| self.s[i * kk + k]).collect();
        let raw = col.clone();
        cholesky_complex_solve(&self.w_chol, r, &mut col);
        let mut corr = 0.0;
        for (a, b) in raw.iter().zip(&col) {
            corr += a.re * b.re + a.im * b.im; // Re(conj(a)*b)
        }
        // Schur complement of a PD matrix; clamp the inevitable -1e-300-style
        // roundoff for vanishing channels.
        (self.s[k * kk + k].re - corr).max(0.0)
    }

    /// Closed-form SINR of the MMSE combiner for user `k`:
    /// `t / (1 - t)` with `t = rho*eta_k*x_k`.
    pub fn sinr(&self, k: usize, est: &EstimationState) -> Result<f64> {
        if est.eta[k] == 0.0 {
            return Ok(0.0);
        }
        let t = est.rho * est.eta[k] * self.quadratic_form(k);
        let denom = 1.0 - t;
        if denom <= 0.0 {
            return Err(Error::NumericalBreakdown {
                what: format!("MMSE SINR denominator, user {k}"),
                value: denom,
            });
        }
        Ok(t / denom)
    }

    /// The MMSE combining vector
    /// `v = sqrt(rho*eta_k) * Sigma^{-1} ghat_k`, expanded through the
    /// inversion lemma so only diagonal and rank-r operations appear.
    pub fn combiner(
        &self,
        k: usize,
        ghat: &ComplexMatrix,
        est: &EstimationState,
    ) -> Combiner {
        let m = ghat.rows();
        let kk = self.n_users;
        if est.eta[k] == 0.0 {
            return Combiner {
                v: vec![Complex64::new(0.0, 0.0); m],
                kind: CombinerKind::Mmse,
            };
        }
        let r = self.active.len();
        let mut y: Vec<Complex64> = self.active.iter().map(|&i| self.s[i * kk + k]).collect();
        cholesky_complex_solve(&self.w_chol, r, &mut y);
        let scale = (est.rho * est.eta[k]).sqrt();
        let gk = ghat.col(k);
        let mut v = vec![Complex64::new(0.0, 0.0); m];
        for (row, vm) in v.iter_mut().enumerate() {
            let mut acc = gk[row];
            for (aj, &j) in self.active.iter().enumerate() {
                acc -= ghat.at(row, j) * y[aj];
            }
            *vm = acc * (scale / est.d[row]);
        }
        Combiner {
            v,
            kind: CombinerKind::Mmse,
        }
    }
}

/// MMSE combining vector for user `k` (one-shot convenience; the harness
/// builds [`MmseRealization`] once per realization instead).
pub fn mmse_combiner(k: usize, ghat: &ComplexMatrix, est: &EstimationState) -> Result<Combiner> {
    Ok(MmseRealization::new(ghat, est)?.combiner(k, ghat, est))
}

/// Closed-form MMSE SINR for user `k` (one-shot convenience).
pub fn mmse_sinr_closed_form(
    k: usize,
    ghat: &ComplexMatrix,
    est: &EstimationState,
) -> Result<f64> {
    MmseRealization::new(ghat, est)?.sinr(k, est)
}

/// The index set of a partial-MMSE receiver for one user: the user's own
/// pilot group plus one selected user per other pilot group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmmseIndexSet {
    /// Target user.
    pub k: usize,
    /// Sorted members of the index set (always contains `k`).
    pub members: Vec<usize>,
    /// Selected user per pilot group (index j holds the choice from group j;
    /// the choice from the target's own group is absorbed into it).
    pub neighbors: Vec<usize>,
}

fn index_set_from_neighbors(
    k: usize,
    assignment: &PilotAssignment,
    neighbors: Vec<usize>,
) -> PmmseIndexSet {
    let mut members: Vec<usize> = assignment.group_of(k).to_vec();
    for (j, &u) in neighbors.iter().enumerate() {
        if j != assignment.pilot_of(k) {
            members.push(u);
        }
    }
    members.sort_unstable();
    PmmseIndexSet {
        k,
        members,
        neighbors,
    }
}

/// Smart index-set selection: from every pilot group, pick the user whose
/// large-scale profile overlaps the target's the most
/// (`argmax_i beta_k^T beta_i`, ties broken toward the lowest user index).
pub fn pmmse_index_set(
    k: usize,
    beta: &RealMatrix,
    assignment: &PilotAssignment,
) -> PmmseIndexSet {
    let bk = beta.col(k);
    let overlap = |i: usize| -> f64 {
        beta.col(i)
            .iter()
            .zip(bk)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
    };
    let neighbors: Vec<usize> = (0..assignment.n_pilots())
        .map(|j| {
            let mut best = assignment.group(j)[0];
            let mut best_val = overlap(best);
            for &i in &assignment.group(j)[1..] {
                let v = overlap(i);
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            best
        })
        .collect();
    index_set_from_neighbors(k, assignment, neighbors)
}

/// Random index-set selection: one uniformly chosen user per pilot group
/// (the baseline the smart selection is compared against).
pub fn pmmse_index_set_random(
    k: usize,
    assignment: &PilotAssignment,
    rng: &mut impl Rng,
) -> PmmseIndexSet {
    let neighbors: Vec<usize> = (0..assignment.n_pilots())
        .map(|j| {
            let g = assignment.group(j);
            g[rng.gen_range(0..g.len())]
        })
        .collect();
    index_set_from_neighbors(k, assignment, neighbors)
}

/// Effective diagonal noise for a partial-MMSE receiver: users outside the
/// index set contribute their full channel statistics,
/// `q = d + rho * Σ_{i not in members} eta_i * alpha_i`.
/// For the full index set this is exactly `d`.
pub fn pmmse_q_diagonal(est: &EstimationState, members: &[usize]) -> Vec<f64> {
    let k = est.n_users();
    let mut inside = vec![false; k];
    for &i in members {
        inside[i] = true;
    }
    let mut q = est.d.clone();
    for i in 0..k {
        if !inside[i] && est.eta[i] > 0.0 {
            let ai = est.alpha.col(i);
            let w = est.rho * est.eta[i];
            for (qm, &a) in q.iter_mut().zip(ai) {
                *qm += w * a;
            }
        }
    }
    q
}

/// Partial-MMSE combiner for user `k` over the given index set, with `q` the
/// precomputed diagonal from [`pmmse_q_diagonal`]. When the index set covers
/// every user this delegates to the MMSE path (bit-identical results).
pub fn pmmse_combiner_with_q(
    k: usize,
    ghat: &ComplexMatrix,
    est: &EstimationState,
    iset: &PmmseIndexSet,
    q: &[f64],
) -> Result<Combiner> {
    assert_eq!(iset.k, k);
    let m = ghat.rows();
    if iset.members.len() == est.n_users() {
        let mut c = mmse_combiner(k, ghat, est)?;
        c.kind = CombinerKind::Pmmse;
        return Ok(c);
    }
    if est.eta[k] == 0.0 {
        return Ok(Combiner {
            v: vec![Complex64::new(0.0, 0.0); m],
            kind: CombinerKind::Pmmse,
        });
    }
    let inv_q: Vec<f64> = q.iter().map(|&v| 1.0 / v).collect();
    let active: Vec<usize> = iset
        .members
        .iter()
        .copied()
        .filter(|&i| est.eta[i] > 0.0)
        .collect();
    let r = active.len();
    // Capacitance W = diag(1/(rho*eta)) + G_I^H Q^{-1} G_I over active members.
    let mut w = vec![Complex64::new(0.0, 0.0); r * r];
    for ai in 0..r {
        for aj in ai..r {
            let v = cdot_weighted(ghat.col(active[ai]), ghat.col(active[aj]), &inv_q);
            w[ai * r + aj] = v;
            w[aj * r + ai] = v.conj();
        }
    }
    let mut s_col = vec![Complex64::new(0.0, 0.0); r];
    let pos_k = active
        .iter()
        .position(|&i| i == k)
        .expect("target user has positive power, so it is active");
    for ai in 0..r {
        s_col[ai] = w[ai * r + pos_k];
    }
    for ai in 0..r {
        w[ai * r + ai] += 1.0 / (est.rho * est.eta[active[ai]]);
    }
    cholesky_complex(&mut w, r, "PMMSE capacitance")?;
    let mut y = s_col;
    cholesky_complex_solve(&w, r, &mut y);
    let scale = (est.rho * est.eta[k]).sqrt();
    let gk = ghat.col(k);
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    for (row, vm) in v.iter_mut().enumerate() {
        let mut acc = gk[row];
        for (aj, &j) in active.iter().enumerate() {
            acc -= ghat.at(row, j) * y[aj];
        }
        *vm = acc * (scale * inv_q[row]);
    }
    Ok(Combiner {
        v,
        kind: CombinerKind::Pmmse,
    })
}

/// Partial-MMSE combiner (one-shot convenience; computes `q` itself).
pub fn pmmse_combiner(
    k: usize,
    ghat: &ComplexMatrix,
    est: &EstimationState,
    iset: &PmmseIndexSet,
) -> Result<Combiner> {
    let q = pmmse_q_diagonal(est, &iset.members);
    pmmse_combiner_with_q(k, ghat, est, iset, &q)
}

/// Large-scale statistics of the LSFD receiver for one user: the mean
/// vectors `mu_i` of the per-AP matched-filter statistic for every co-pilot
/// user i (columns follow `group`), and the diagonal `lambda` of its
/// non-coherent variance.
#[derive(Debug, Clone)]
pub struct LsfdStatistics {
    pub k: usize,
    /// The user's pilot group (sorted; contains `k`).
    pub group: Vec<usize>,
    /// M×|group| matrix; column for user i is `mu_i[m] = beta[m][k]*c[m][i]`.
    pub mu: RealMatrix,
    /// `lambda[m] = alpha[m][k] * (rho * Σ_i eta_i beta[m][i] + 1)`.
    pub lambda: Vec<f64>,
}

/// Per-AP interference-plus-noise load `rho * Σ_i eta_i beta[m][i] + 1`,
/// shared by every user's `lambda`; compute once per power vector.
pub fn lsfd_load(est: &EstimationState, eta: &[f64]) -> Vec<f64> {
    let m = est.n_aps();
    let mut load = vec![1.0; m];
    for i in 0..est.n_users() {
        if eta[i] > 0.0 {
            let w = est.rho * eta[i];
            let bi = est.beta.col(i);
            for (lm, &b) in load.iter_mut().zip(bi) {
                *lm += w * b;
            }
        }
    }
    load
}

/// LSFD statistics for user `k` at transmit powers `eta` (which may differ
/// from `est.eta`: power control re-evaluates these at candidate powers).
pub fn lsfd_statistics_with_load(
    k: usize,
    est: &EstimationState,
    assignment: &PilotAssignment,
    load: &[f64],
) -> LsfdStatistics {
    let m = est.n_aps();
    let group = assignment.group_of(k).to_vec();
    let bk = est.beta.col(k);
    let mut mu = RealMatrix::zeros(m, group.len());
    for (pos, &i) in group.iter().enumerate() {
        let ci = est.c.col(i);
        let col = mu.col_mut(pos);
        for row in 0..m {
            col[row] = bk[row] * ci[row];
        }
    }
    let ak = est.alpha.col(k);
    let lambda: Vec<f64> = ak.iter().zip(load).map(|(&a, &l)| a * l).collect();
    LsfdStatistics {
        k,
        group,
        mu,
        lambda,
    }
}

/// One-shot LSFD statistics (computes the shared load itself).
pub fn lsfd_statistics(
    k: usize,
    est: &EstimationState,
    assignment: &PilotAssignment,
    eta: &[f64],
) -> LsfdStatistics {
    let load = lsfd_load(est, eta);
    lsfd_statistics_with_load(k, est, assignment, &load)
}

/// SINR of the LSFD frame at an arbitrary real combining vector `v`:
///
/// `rho*eta_k*(v^T mu_k)^2 /
///  (rho*Σ_{i in group, i≠k} eta_i*(v^T mu_i)^2 + v^T diag(lambda) v)`.
pub fn lsfd_sinr_at(stats: &LsfdStatistics, rho: f64, eta: &[f64], v: &[f64]) -> f64 {
    assert_eq!(v.len(), stats.lambda.len());
    let mut signal = 0.0;
    let mut coherent = 0.0;
    for (pos, &i) in stats.group.iter().enumerate() {
        let dot: f64 = stats.mu.col(pos).iter().zip(v).map(|(&a, &b)| a * b).sum();
        let p = rho * eta[i] * dot * dot;
        if i == stats.k {
            signal = p;
        } else {
            coherent += p;
        }
    }
    let noise: f64 = stats
        .lambda
        .iter()
        .zip(v)
        .map(|(&l, &vm)| l * vm * vm)
        .sum();
    signal / (coherent + noise)
}

/// Optimal LSFD combiner and its SINR:
/// `v = Psi^{-1} mu_k` with
/// `Psi = diag(lambda) + rho*Σ_{i in group, i≠k} eta_i mu_i mu_i^T`,
/// `SINR = rho*eta_k * mu_k^T Psi^{-1} mu_k`.
///
/// Solved through the inversion lemma over the (|group|-1)-dimensional
/// coherent-interference subspace.
pub fn lsfd_combiner_and_sinr(
    stats: &LsfdStatistics,
    rho: f64,
    eta: &[f64],
) -> Result<(Combiner, f64)> {
    let m = stats.lambda.len();
    let k = stats.k;
    let others: Vec<usize> = stats
        .group
        .iter()
        .enumerate()
        .filter(|&(_, &i)| i != k && eta[i] > 0.0)
        .map(|(pos, _)| pos)
        .collect();
    let pos_k = stats
        .group
        .iter()
        .position(|&i| i == k)
        .expect("group contains the target");
    let inv_lambda: Vec<f64> = stats.lambda.iter().map(|&l| 1.0 / l).collect();
    let r = others.len();
    // W = I + U^T Lambda^{-1} U with U columns sqrt(rho*eta_i)*mu_i.
    let mut w = vec![0.0; r * r];
    for (a, &pa) in others.iter().enumerate() {
        let ia = stats.group[pa];
        for (b, &pb) in others.iter().enumerate().skip(a) {
            let ib = stats.group[pb];
            let mut s = 0.0;
            for row in 0..m {
                s += stats.mu.at(row, pa) * stats.mu.at(row, pb) * inv_lambda[row];
            }
            let v = rho * (eta[ia] * eta[ib]).sqrt() * s;
            w[a * r + b] = v;
            w[b * r + a] = v;
        }
        w[a * r + a] += 1.0;
    }
    cholesky_real(&mut w, r, "LSFD capacitance")?;
    // t = W^{-1} U^T Lambda^{-1} mu_k
    let mut t = vec![0.0; r];
    for (a, &pa) in others.iter().enumerate() {
        let ia = stats.group[pa];
        let mut s = 0.0;
        for row in 0..m {
            s += stats.mu.at(row, pa) * stats.mu.at(row, pos_k) * inv_lambda[row];
        }
        t[a] = (rho * eta[ia]).sqrt() * s;
    }
    cholesky_real_solve(&w, r, &mut t);
    // v = Lambda^{-1} mu_k - Lambda^{-1} U t
    let mut v = vec![0.0; m];
    for row in 0..m {
        let mut acc = stats.mu.at(row, pos_k);
        for (a, &pa) in others.iter().enumerate() {
            let ia = stats.group[pa];
            acc -= (rho * eta[ia]).sqrt() * stats.mu.at(row, pa) * t[a];
        }
        v[row] = acc * inv_lambda[row];
    }
    // SINR = rho*eta_k * mu_k^T v (quadratic form through the solved vector).
    let quad: f64 = (0..m).map(|row| stats.mu.at(row, pos_k) * v[row]).sum();
    let sinr = rho * eta[stats.k] * quad.max(0.0);
    let combiner = Combiner {
        v: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        kind: CombinerKind::Lsfd,
    };
    Ok((combiner, sinr))
}

/// Which fixed combining vector the MF receiver uses in the LSFD frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum MfConvention {
    /// Equal-gain combining across APs (the default).
    #[default]
    AllOnes,
    /// The literal index ramp `[1, 2, ..., M]`, kept selectable for audit.
    IndexRamp,
}

/// Matched-filter SINR: the LSFD frame evaluated at the convention's fixed
/// combining vector.
pub fn mf_sinr_lsfd_frame(
    stats: &LsfdStatistics,
    rho: f64,
    eta: &[f64],
    convention: MfConvention,
) -> f64 {
    let m = stats.lambda.len();
    let v: Vec<f64> = match convention {
        MfConvention::AllOnes => vec![1.0; m],
        MfConvention::IndexRamp => (1..=m).map(|i| i as f64).collect(),
    };
    lsfd_sinr_at(stats, rho, eta, &v)
}

/// The statistical ensemble the asymptotic MF limit is computed over.
#[derive(Debug, Clone, Copy)]
pub struct GeometryEnsemble<'a> {
    pub area: AreaConfig,
    pub path_loss: &'a PathLossParams,
    pub shadowing: &'a ShadowingParams,
}

/// Infinite-M limit of the MF (all-ones LSFD-frame) SINR for a user in a
/// pilot group of statistically exchangeable members:
///
/// `eta_t * E[beta*c_t]^2 / Σ_{i≠t} eta_i * E[beta*c_i]^2`
///
/// with the expectations estimated over `n_samples` independent draws of one
/// AP position, the group members' positions, and their shadowing. A user
/// alone on its pilot has no coherent interference and the limit is
/// `+infinity` (returned as such).
pub fn mf_asymptotic_sinr(
    target: usize,
    eta_group: &[f64],
    rho: f64,
    tau: usize,
    ens: &GeometryEnsemble,
    n_samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    use rand_distr::StandardNormal;
    let size = eta_group.len();
    assert!(target < size);
    if size == 1 {
        return f64::INFINITY;
    }
    let rt = rho * tau as f64;
    let sigma = ens.shadowing.sigma_db;
    let mut mean_tt = 0.0;
    let mut mean_ti = vec![0.0; size];
    let mut beta = vec![0.0; size];
    for _ in 0..n_samples {
        // One AP, `size` users, all fresh.
        let layout = generate_layout(1, size, ens.area, rng);
        let ap = layout.ap_positions[0];
        // Shadow factors for this AP row.
        let mut z = vec![1.0; size];
        if sigma > 0.0 {
            if ens.shadowing.independent {
                for zi in z.iter_mut() {
                    let x: f64 = rng.sample(StandardNormal);
                    *zi = 10f64.powf(sigma * x / 10.0);
                }
            } else {
                // Two-component model restricted to one AP row: a common AP
                // term plus spatially correlated per-user terms.
                let a: f64 = {
                    let x: f64 = rng.sample(StandardNormal);
                    sigma * x
                };
                let n = size;
                let mut cov = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let d = distance(
                            layout.user_positions[i],
                            layout.user_positions[j],
                            &ens.area,
                        );
                        cov[i * n + j] = sigma
                            * sigma
                            * ens.shadowing.corr_base.powf(-d / ens.shadowing.d_decorr_km);
                    }
                }
                let mut l = cov.clone();
                if cholesky_real(&mut l, n, "asymptotic shadowing").is_err() {
                    l.copy_from_slice(&cov);
                    for i in 0..n {
                        l[i * n + i] += 1e-10 * sigma * sigma;
                    }
                    cholesky_real(&mut l, n, "asymptotic shadowing")
                        .expect("jittered covariance is positive definite");
                }
                let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let wa = ens.shadowing.split_delta.sqrt();
                let wb = (1.0 - ens.shadowing.split_delta).sqrt();
                for i in 0..n {
                    let mut b = 0.0;
                    for j in 0..=i {
                        b += l[i * n + j] * x[j];
                    }
                    z[i] = 10f64.powf((wa * a + wb * b) / 10.0);
                }
            }
        }
        let mut s = 0.0;
        for i in 0..size {
            let d = distance(ap, layout.user_positions[i], &ens.area);
            beta[i] = path_loss(d, ens.path_loss, z[i]);
            s += beta[i];
        }
        let denom = 1.0 + rt * s;
        let bt = beta[target];
        for i in 0..size {
            let ci = rt * beta[i] / denom;
            if i == target {
                mean_tt += bt * ci;
            } else {
                mean_ti[i] += bt * ci;
            }
        }
    }
    let nf = n_samples as f64;
    let num = eta_group[target] * (mean_tt / nf) * (mean_tt / nf);
    let mut den = 0.0;
    for i in 0..size {
        if i != target {
            den += eta_group[i] * (mean_ti[i] / nf) * (mean_ti[i] / nf);
        }
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}
