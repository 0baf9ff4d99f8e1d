//! Deterministic (large-system) approximation of the partial-MMSE SINR.
//!
//! As the number of APs and users grow together, the instantaneous
//! partial-MMSE SINR concentrates around a deterministic value that depends
//! on the large-scale state only — estimate variances `alpha`, the receiver's
//! effective noise diagonal `q`, transmit powers, and the index-set
//! structure. This module evaluates that limit for finite sizes.
//!
//! Because every per-user covariance in this model is diagonal, each of the
//! matrix functionals below reduces to an O(M) weighted trace, and the whole
//! evaluation needs no M×M algebra:
//!
//! * a fixed point `delta_j = (rho*eta_j/M) tr(A_j T)` over the selected
//!   out-of-group users, with
//!   `T = ((rho/M) Σ_j eta_j A_j/(1+delta_j) + Q/M)^{-1}`;
//! * its directional derivatives `delta'(H)`, `T'(H)` obtained through the
//!   linear system `(I - J) delta' = b(H)`, whose LU factorization is reused
//!   for every evaluation point `H`;
//! * a small dense correction over the user's own pilot group (whose channel
//!   estimates are exactly collinear and cannot be treated as independent
//!   columns), producing the gamma/Gamma/lambda/theta quantities;
//! * leave-one-out resolvents `T''_i` for the selected out-of-group users,
//!   each via the same fixed point with user `i` removed.

use crate::channel::{EstimationState, PilotAssignment};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_real, cholesky_real_solve, Lu, RealMatrix};
use crate::receivers::PmmseIndexSet;

/// Convergence policy for the scalar fixed points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Relative change (per coordinate, max over coordinates) below which the
    /// iteration is declared converged.
    pub rel_tol: f64,
    /// Iteration budget before a non-convergence error.
    pub max_iters: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            rel_tol: 1e-9,
            max_iters: 10_000,
        }
    }
}

/// `t_m = 1 / ((rho/M) Σ_j eta_j alpha_m_j / (1 + delta_j) + q_m / M)`
/// for `j` running over `active`.
fn t_from_deltas(
    alpha: &RealMatrix,
    q: &[f64],
    rho: f64,
    eta: &[f64],
    active: &[usize],
    deltas: &[f64],
    t: &mut [f64],
) {
    let m = q.len();
    let mf = m as f64;
    for (row, tm) in t.iter_mut().enumerate() {
        let mut s = q[row] / mf;
        for (pos, &j) in active.iter().enumerate() {
            s += rho / mf * eta[j] * alpha.at(row, j) / (1.0 + deltas[pos]);
        }
        *tm = 1.0 / s;
    }
}

/// Solve the fixed point `delta_j = (rho*eta_j/M) tr(A_j T(delta))` over the
/// users in `active`, starting from `delta_j = M`. Returns the converged
/// deltas (parallel to `active`) and the matching resolvent diagonal `t`.
pub fn fixed_point_deltas(
    alpha: &RealMatrix,
    q: &[f64],
    rho: f64,
    eta: &[f64],
    active: &[usize],
    opts: &FixedPointOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = q.len();
    let mf = m as f64;
    let mut t = vec![0.0; m];
    if active.is_empty() {
        t_from_deltas(alpha, q, rho, eta, active, &[], &mut t);
        return Ok((Vec::new(), t));
    }
    let mut deltas = vec![mf; active.len()];
    let mut next = vec![0.0; active.len()];
    let mut residual = f64::INFINITY;
    for _iter in 0..opts.max_iters {
        t_from_deltas(alpha, q, rho, eta, active, &deltas, &mut t);
        for (pos, &j) in active.iter().enumerate() {
            let tr: f64 = alpha
                .col(j)
                .iter()
                .zip(t.iter())
                .map(|(&a, &tm)| a * tm)
                .sum();
            next[pos] = rho * eta[j] / mf * tr;
        }
        residual = deltas
            .iter()
            .zip(&next)
            .map(|(&old, &new)| (new - old).abs() / new.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        std::mem::swap(&mut deltas, &mut next);
        if residual < opts.rel_tol {
            t_from_deltas(alpha, q, rho, eta, active, &deltas, &mut t);
            return Ok((deltas, t));
        }
    }
    Err(Error::NonConvergence {
        what: "resolvent fixed point".into(),
        iterations: opts.max_iters,
        residual,
    })
}

/// Everything needed for one user's deterministic SINR, prepared once so the
/// per-evaluation-point work is a handful of weighted traces.
struct DeContext<'a> {
    est: &'a EstimationState,
    k: usize,
    /// The user's own pilot group, sorted.
    s_users: Vec<usize>,
    pos_k: usize,
    /// Selected out-of-group members of the index set, sorted.
    r_users: Vec<usize>,
    /// Users outside the index set.
    outside: Vec<usize>,
    /// M×|S| columns of sqrt(alpha) for the own group.
    sqrt_alpha: RealMatrix,
    /// Fixed-point state.
    deltas: Vec<f64>,
    t: Vec<f64>,
    t2: Vec<f64>,
    /// LU of (I - J) over `r_users` (None when `r_users` is empty).
    lu: Option<Lu>,
    /// `Gamma^{-1} gamma_k`.
    gs: Vec<f64>,
    /// `G[i][k] - gamma_i^T Gamma^{-1} gamma_k` for i in the own group.
    lambdas: Vec<f64>,
}

impl<'a> DeContext<'a> {
    fn prepare(
        k: usize,
        est: &'a EstimationState,
        assignment: &PilotAssignment,
        iset: &PmmseIndexSet,
        q: &[f64],
        opts: &FixedPointOptions,
    ) -> Result<DeContext<'a>> {
        let m = est.n_aps();
        let mf = m as f64;
        let rho = est.rho;
        let eta = &est.eta;
        let s_users = assignment.group_of(k).to_vec();
        let pos_k = s_users.iter().position(|&i| i == k).expect("k in group");
        let in_group = |i: usize| s_users.binary_search(&i).is_ok();
        let r_users: Vec<usize> = iset
            .members
            .iter()
            .copied()
            .filter(|&i| !in_group(i))
            .collect();
        let in_set = |i: usize| iset.members.binary_search(&i).is_ok();
        let outside: Vec<usize> = (0..est.n_users()).filter(|&i| !in_set(i)).collect();

        let (deltas, t) = fixed_point_deltas(&est.alpha, q, rho, eta, &r_users, opts)?;
        let t2: Vec<f64> = t.iter().map(|&x| x * x).collect();

        let lu = if r_users.is_empty() {
            None
        } else {
            let r = r_users.len();
            // a = I - J with
            // J_jl = rho^2 eta_j eta_l tr(A_j T A_l T) / (M^2 (1+delta_l)^2).
            let mut a = vec![0.0; r * r];
            for (pj, &j) in r_users.iter().enumerate() {
                for (pl, &l) in r_users.iter().enumerate() {
                    let tr: f64 = (0..m)
                        .map(|row| est.alpha.at(row, j) * est.alpha.at(row, l) * t2[row])
                        .sum();
                    let jjl = rho * rho * eta[j] * eta[l] * tr
                        / (mf * mf * (1.0 + deltas[pl]).powi(2));
                    a[pj * r + pl] = if pj == pl { 1.0 - jjl } else { -jjl };
                }
            }
            Some(Lu::factor(a, r, "resolvent-derivative system")?)
        };

        let ns = s_users.len();
        let sqrt_alpha = RealMatrix::from_fn(m, ns, |row, pos| est.alpha.at(row, s_users[pos]).sqrt());
        // G_ij = (1/M) tr(A_i^{1/2} A_j^{1/2} T) over the own group.
        let mut g = vec![0.0; ns * ns];
        for i in 0..ns {
            for j in i..ns {
                let tr: f64 = (0..m)
                    .map(|row| sqrt_alpha.at(row, i) * sqrt_alpha.at(row, j) * t[row])
                    .sum();
                g[i * ns + j] = tr / mf;
                g[j * ns + i] = tr / mf;
            }
        }
        // Gamma = I + rho * diag(sqrt(eta)) G diag(sqrt(eta)).
        let se: Vec<f64> = s_users.iter().map(|&i| eta[i].sqrt()).collect();
        let mut gamma = vec![0.0; ns * ns];
        for i in 0..ns {
            for j in 0..ns {
                gamma[i * ns + j] = rho * se[i] * se[j] * g[i * ns + j];
            }
            gamma[i * ns + i] += 1.0;
        }
        cholesky_real(&mut gamma, ns, "own-group correction")?;
        // gs = Gamma^{-1} gamma_k with gamma_k[j] = sqrt(rho)*se_j*G[j][pos_k].
        let mut gs: Vec<f64> = (0..ns)
            .map(|j| rho.sqrt() * se[j] * g[j * ns + pos_k])
            .collect();
        cholesky_real_solve(&gamma, ns, &mut gs);
        // lambda_i = G[i][pos_k] - gamma_i^T gs.
        let lambdas: Vec<f64> = (0..ns)
            .map(|i| {
                let corr: f64 = (0..ns)
                    .map(|j| rho.sqrt() * se[j] * g[i * ns + j] * gs[j])
                    .sum();
                g[i * ns + pos_k] - corr
            })
            .collect();

        Ok(DeContext {
            est,
            k,
            s_users,
            pos_k,
            r_users,
            outside,
            sqrt_alpha,
            deltas,
            t,
            t2,
            lu,
            gs,
            lambdas,
        })
    }

    /// Diagonal of the resolvent derivative `T'(H)` for a diagonal `H`.
    fn t_prime(&self, h: &[f64]) -> Vec<f64> {
        let m = self.t.len();
        let mf = m as f64;
        let rho = self.est.rho;
        let eta = &self.est.eta;
        let dprime: Vec<f64> = match &self.lu {
            None => Vec::new(),
            Some(lu) => {
                let b: Vec<f64> = self
                    .r_users
                    .iter()
                    .map(|&j| {
                        let tr: f64 = (0..m)
                            .map(|row| self.est.alpha.at(row, j) * h[row] * self.t2[row])
                            .sum();
                        rho * eta[j] / mf * tr
                    })
                    .collect();
                lu.solve(&b)
            }
        };
        (0..m)
            .map(|row| {
                let mut inner = h[row];
                for (pos, &j) in self.r_users.iter().enumerate() {
                    inner += rho / mf * eta[j] * self.est.alpha.at(row, j) * dprime[pos]
                        / (1.0 + self.deltas[pos]).powi(2);
                }
                self.t2[row] * inner
            })
            .collect()
    }

    /// The interference functional
    /// `theta(H) = tr(A_k T'(H))/M^2 - 2 nu_k(H)^T Gamma^{-1} gamma_k
    ///  + gamma_k^T Gamma^{-1} N(H) Gamma^{-1} gamma_k`.
    fn theta(&self, h: &[f64]) -> f64 {
        let m = self.t.len();
        let mf = m as f64;
        let rho = self.est.rho;
        let tp = self.t_prime(h);
        let ns = self.s_users.len();
        // P_ij = tr(A_i^{1/2} A_j^{1/2} T'(H)) / M^2 over the own group.
        let mut p = vec![0.0; ns * ns];
        for i in 0..ns {
            for j in i..ns {
                let tr: f64 = (0..m)
                    .map(|row| self.sqrt_alpha.at(row, i) * self.sqrt_alpha.at(row, j) * tp[row])
                    .sum();
                p[i * ns + j] = tr / (mf * mf);
                p[j * ns + i] = tr / (mf * mf);
            }
        }
        let trk: f64 = (0..m)
            .map(|row| self.est.alpha.at(row, self.k) * tp[row])
            .sum::<f64>()
            / (mf * mf);
        // u_j = sqrt(eta_j) * gs_j folds the nu/N power weights into gs.
        let u: Vec<f64> = self
            .s_users
            .iter()
            .zip(&self.gs)
            .map(|(&i, &gsj)| self.est.eta[i].sqrt() * gsj)
            .collect();
        let cross: f64 = (0..ns).map(|j| u[j] * p[j * ns + self.pos_k]).sum();
        let quad: f64 = (0..ns)
            .map(|i| (0..ns).map(|j| u[i] * p[i * ns + j] * u[j]).sum::<f64>())
            .sum();
        trk - 2.0 * rho.sqrt() * cross + rho * quad
    }

    fn assemble(&self, assignment: &PilotAssignment, q: &[f64], opts: &FixedPointOptions) -> Result<f64> {
        let est = self.est;
        let rho = est.rho;
        let eta = &est.eta;
        let mf = self.t.len() as f64;
        if eta[self.k] == 0.0 {
            return Ok(0.0);
        }
        let lambda_k = self.lambdas[self.pos_k];
        let mut den = self.theta(&est.d);
        for (pos, &i) in self.s_users.iter().enumerate() {
            if i != self.k {
                den += rho * eta[i] * self.lambdas[pos] * self.lambdas[pos];
            }
        }
        for &i in &self.outside {
            if eta[i] > 0.0 {
                den += rho * eta[i] * self.theta(est.alpha.col(i));
            }
        }
        for &i in &self.r_users {
            if eta[i] == 0.0 {
                continue;
            }
            // Leave-one-out resolvent for the selected user i: the same fixed
            // point over the remaining index-set members.
            let active: Vec<usize> = self
                .s_users
                .iter()
                .chain(self.r_users.iter())
                .copied()
                .filter(|&j| j != i)
                .collect();
            let (_, t_loo) = fixed_point_deltas(&est.alpha, q, rho, eta, &active, opts)?;
            let tr: f64 = est
                .alpha
                .col(i)
                .iter()
                .zip(&t_loo)
                .map(|(&a, &tm)| a * tm)
                .sum();
            let suppression = (1.0 + rho * eta[i] / mf * tr).powi(2);
            den += rho * eta[i] * self.theta(est.alpha.col(i)) / suppression;
        }
        let _ = assignment;
        Ok(rho * eta[self.k] * lambda_k * lambda_k / den)
    }
}

/// Deterministic approximation of the partial-MMSE SINR for user `k`, from
/// large-scale quantities only. `iset` is the user's index set and `q` its
/// effective noise diagonal ([`crate::receivers::pmmse_q_diagonal`]).
pub fn de_sinr_pmmse(
    k: usize,
    est: &EstimationState,
    assignment: &PilotAssignment,
    iset: &PmmseIndexSet,
    q: &[f64],
    opts: &FixedPointOptions,
) -> Result<f64> {
    assert_eq!(iset.k, k);
    let ctx = DeContext::prepare(k, est, assignment, iset, q, opts)?;
    ctx.assemble(assignment, q, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::alpha_coefficients;
    use crate::receivers::{pmmse_index_set, pmmse_q_diagonal};
    use crate::rng::{stream, Stage};
    use rand::Rng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        stream(seed, Stage::Aux, 3, seed)
    }

    fn round_robin(k: usize, tau: usize) -> PilotAssignment {
        let mut groups = vec![Vec::new(); tau];
        for u in 0..k {
            groups[u % tau].push(u);
        }
        PilotAssignment::from_groups(groups, k).unwrap()
    }

    /// Random large-scale state at physical scales.
    fn scene(m: usize, k: usize, tau: usize, seed: u64) -> (EstimationState, PilotAssignment) {
        let mut r = rng(seed);
        let beta = RealMatrix::from_fn(m, k, |_, _| 10f64.powf(r.gen_range(-14.0..-11.0)));
        let assignment = round_robin(k, tau);
        let eta = vec![1.0; k];
        let est = alpha_coefficients(&beta, &assignment, 3.0e11, tau, &eta);
        (est, assignment)
    }

    fn context<'a>(
        k: usize,
        est: &'a EstimationState,
        assignment: &PilotAssignment,
        q: &[f64],
    ) -> DeContext<'a> {
        let iset = pmmse_index_set(k, &est.beta, assignment);
        DeContext::prepare(k, est, assignment, &iset, q, &FixedPointOptions::default()).unwrap()
    }

    #[test]
    fn empty_active_set_resolvent_is_inverse_noise() {
        let (est, _) = scene(16, 4, 4, 1);
        let q: Vec<f64> = est.d.clone();
        let (deltas, t) =
            fixed_point_deltas(&est.alpha, &q, est.rho, &est.eta, &[], &FixedPointOptions::default())
                .unwrap();
        assert!(deltas.is_empty());
        for (tm, qm) in t.iter().zip(&q) {
            let expect = 16.0 / qm;
            assert!((tm - expect).abs() / expect < 1e-14);
        }
    }

    #[test]
    fn scalar_fixed_point_matches_quadratic_root() {
        // One AP, one active user: delta solves q*delta^2 + q*delta - a = 0
        // with a = rho*eta*alpha, i.e. delta = (-q + sqrt(q^2+4qa))/(2q).
        let mut alpha = RealMatrix::zeros(1, 1);
        alpha.set(0, 0, 4.2e-13);
        let q = vec![1.7];
        let rho = 3.0e11;
        let eta = vec![0.8];
        let (deltas, t) = fixed_point_deltas(
            &alpha,
            &q,
            rho,
            &eta,
            &[0],
            &FixedPointOptions::default(),
        )
        .unwrap();
        let a = rho * eta[0] * alpha.at(0, 0);
        let qq = q[0];
        let expect = (-qq + (qq * qq + 4.0 * qq * a).sqrt()) / (2.0 * qq);
        assert!(
            (deltas[0] - expect).abs() / expect < 1e-8,
            "{} vs {}",
            deltas[0],
            expect
        );
        // t must be consistent with the converged delta.
        let expect_t = 1.0 / (rho * eta[0] * alpha.at(0, 0) / (1.0 + deltas[0]) + q[0]);
        assert!((t[0] - expect_t).abs() / expect_t < 1e-12);
    }

    #[test]
    fn fixed_point_self_consistent() {
        let (est, assignment) = scene(64, 12, 4, 2);
        let iset = pmmse_index_set(0, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let group = assignment.group_of(0);
        let r_users: Vec<usize> = iset
            .members
            .iter()
            .copied()
            .filter(|i| !group.contains(i))
            .collect();
        assert_eq!(r_users.len(), 3);
        let (deltas, t) = fixed_point_deltas(
            &est.alpha,
            &q,
            est.rho,
            &est.eta,
            &r_users,
            &FixedPointOptions::default(),
        )
        .unwrap();
        for (pos, &j) in r_users.iter().enumerate() {
            let tr: f64 = est
                .alpha
                .col(j)
                .iter()
                .zip(&t)
                .map(|(&a, &tm)| a * tm)
                .sum();
            let rhs = est.rho * est.eta[j] / 64.0 * tr;
            assert!(
                (deltas[pos] - rhs).abs() / rhs < 1e-7,
                "delta[{pos}] = {} vs {rhs}",
                deltas[pos]
            );
        }
    }

    #[test]
    fn interaction_matrix_detailed_balance_and_contraction() {
        let (est, assignment) = scene(48, 15, 5, 3);
        let q_all = {
            let iset = pmmse_index_set(1, &est.beta, &assignment);
            pmmse_q_diagonal(&est, &iset.members)
        };
        let ctx = context(1, &est, &assignment, &q_all);
        let r = ctx.r_users.len();
        assert_eq!(r, 4);
        // Rebuild J explicitly.
        let mf = 48.0;
        let mut j_mat = vec![0.0; r * r];
        for (pj, &j) in ctx.r_users.iter().enumerate() {
            for (pl, &l) in ctx.r_users.iter().enumerate() {
                let tr: f64 = (0..48)
                    .map(|row| est.alpha.at(row, j) * est.alpha.at(row, l) * ctx.t2[row])
                    .sum();
                j_mat[pj * r + pl] = est.rho * est.rho * est.eta[j] * est.eta[l] * tr
                    / (mf * mf * (1.0 + ctx.deltas[pl]).powi(2));
            }
        }
        // Detailed balance: J_jl (1+delta_l)^2 == J_lj (1+delta_j)^2.
        for pj in 0..r {
            for pl in 0..r {
                let a = j_mat[pj * r + pl] * (1.0 + ctx.deltas[pl]).powi(2);
                let b = j_mat[pl * r + pj] * (1.0 + ctx.deltas[pj]).powi(2);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            }
        }
        // Spectral radius below one (nonnegative matrix: power iteration).
        let mut x = vec![1.0; r];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let y: Vec<f64> = (0..r)
                .map(|i| (0..r).map(|l| j_mat[i * r + l] * x[l]).sum())
                .collect();
            lambda = y.iter().fold(0.0f64, |m, &v| m.max(v));
            if lambda == 0.0 {
                break;
            }
            x = y.iter().map(|&v| v / lambda).collect();
        }
        assert!(lambda < 1.0, "spectral radius {lambda} >= 1");
    }

    #[test]
    fn derivative_single_member_closed_form() {
        // |R| = 1: delta' = b / (1 - J_11); verify through t_prime by
        // reconstructing the scalar system.
        let (est, assignment) = scene(32, 4, 2, 4);
        let iset = pmmse_index_set(0, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let ctx = context(0, &est, &assignment, &q);
        assert_eq!(ctx.r_users.len(), 1);
        let j0 = ctx.r_users[0];
        let mf = 32.0;
        let h: Vec<f64> = est.d.clone();
        let b: f64 = est.rho * est.eta[j0] / mf
            * (0..32)
                .map(|row| est.alpha.at(row, j0) * h[row] * ctx.t2[row])
                .sum::<f64>();
        let tr_jj: f64 = (0..32)
            .map(|row| est.alpha.at(row, j0) * est.alpha.at(row, j0) * ctx.t2[row])
            .sum();
        let j11 = est.rho * est.rho * est.eta[j0] * est.eta[j0] * tr_jj
            / (mf * mf * (1.0 + ctx.deltas[0]).powi(2));
        let dp = b / (1.0 - j11);
        let tp = ctx.t_prime(&h);
        for row in 0..32 {
            let expect = ctx.t2[row]
                * (h[row]
                    + est.rho / mf * est.eta[j0] * est.alpha.at(row, j0) * dp
                        / (1.0 + ctx.deltas[0]).powi(2));
            assert!((tp[row] - expect).abs() / expect.abs() < 1e-10);
        }
    }

    #[test]
    fn resolvent_derivative_zero_and_linearity() {
        let (est, assignment) = scene(24, 8, 4, 5);
        let iset = pmmse_index_set(2, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let ctx = context(2, &est, &assignment, &q);
        let zero = vec![0.0; 24];
        assert!(ctx.t_prime(&zero).iter().all(|&v| v == 0.0));
        let h1: Vec<f64> = est.d.clone();
        let h2: Vec<f64> = est.alpha.col(0).to_vec();
        let sum: Vec<f64> = h1.iter().zip(&h2).map(|(&a, &b)| a + b).collect();
        let tp1 = ctx.t_prime(&h1);
        let tp2 = ctx.t_prime(&h2);
        let tps = ctx.t_prime(&sum);
        for row in 0..24 {
            let lin = tp1[row] + tp2[row];
            assert!(
                (tps[row] - lin).abs() <= 1e-12 * lin.abs().max(f64::MIN_POSITIVE),
                "row {row}"
            );
        }
    }

    #[test]
    fn no_selected_users_derivative_is_sandwich() {
        // tau = 1: the index set is the whole user set, no out-of-group
        // members remain and T'(H) = T H T exactly.
        let (est, assignment) = scene(16, 5, 1, 6);
        let iset = pmmse_index_set(0, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let ctx = context(0, &est, &assignment, &q);
        assert!(ctx.r_users.is_empty());
        let h: Vec<f64> = est.d.clone();
        let tp = ctx.t_prime(&h);
        for row in 0..16 {
            let expect = ctx.t2[row] * h[row];
            assert!((tp[row] - expect).abs() / expect < 1e-14);
        }
    }

    #[test]
    fn singleton_group_lambda_closed_form() {
        // Alone on its pilot: lambda_k = x / (1 + rho*eta_k*x) with
        // x = tr(A_k T)/M.
        let (est, assignment) = scene(40, 8, 8, 7);
        let iset = pmmse_index_set(3, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let ctx = context(3, &est, &assignment, &q);
        assert_eq!(ctx.s_users, vec![3]);
        let x: f64 = est
            .alpha
            .col(3)
            .iter()
            .zip(&ctx.t)
            .map(|(&a, &tm)| a * tm)
            .sum::<f64>()
            / 40.0;
        let expect = x / (1.0 + est.rho * est.eta[3] * x);
        assert!((ctx.lambdas[0] - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn zero_group_power_trivializes_own_group_correction() {
        let (mut est, assignment) = scene(20, 6, 2, 8);
        for &i in assignment.group_of(0) {
            est.eta[i] = 0.0;
        }
        let iset = pmmse_index_set(0, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let ctx = context(0, &est, &assignment, &q);
        // gamma vectors vanish, so Gamma = I and lambda_i = G_ik.
        assert!(ctx.gs.iter().all(|&v| v == 0.0));
        for (pos, &i) in ctx.s_users.iter().enumerate() {
            let g_ik: f64 = (0..20)
                .map(|row| {
                    (est.alpha.at(row, i) * est.alpha.at(row, 0)).sqrt() * ctx.t[row]
                })
                .sum::<f64>()
                / 20.0;
            let rel = (ctx.lambdas[pos] - g_ik).abs() / g_ik;
            assert!(rel < 1e-12, "user {i}");
        }
    }

    #[test]
    fn theta_nonnegative_on_psd_arguments() {
        for seed in 0..5 {
            let (est, assignment) = scene(32, 10, 5, 100 + seed);
            for k in [0usize, 4, 9] {
                let iset = pmmse_index_set(k, &est.beta, &assignment);
                let q = pmmse_q_diagonal(&est, &iset.members);
                let ctx = context(k, &est, &assignment, &q);
                let th_d = ctx.theta(&est.d);
                assert!(th_d >= 0.0, "theta(D) = {th_d}");
                for i in 0..10 {
                    let th = ctx.theta(est.alpha.col(i));
                    assert!(th >= -1e-30, "theta(A_{i}) = {th}");
                }
            }
        }
    }

    #[test]
    fn full_evaluation_positive_and_zero_power_guard() {
        let (mut est, assignment) = scene(64, 8, 4, 9);
        let iset = pmmse_index_set(1, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let opts = FixedPointOptions::default();
        let sinr = de_sinr_pmmse(1, &est, &assignment, &iset, &q, &opts).unwrap();
        assert!(sinr.is_finite() && sinr > 0.0, "sinr = {sinr}");
        est.eta[1] = 0.0;
        let zero = de_sinr_pmmse(1, &est, &assignment, &iset, &q, &opts).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn tight_budget_reports_nonconvergence() {
        let (est, assignment) = scene(32, 8, 4, 10);
        let iset = pmmse_index_set(0, &est.beta, &assignment);
        let q = pmmse_q_diagonal(&est, &iset.members);
        let opts = FixedPointOptions {
            rel_tol: 1e-12,
            max_iters: 1,
        };
        let err = de_sinr_pmmse(0, &est, &assignment, &iset, &q, &opts).unwrap_err();
        match err {
            Error::NonConvergence { iterations, .. } => assert_eq!(iterations, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
