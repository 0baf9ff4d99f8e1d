//! Pilot assignment, small-scale fading, and MMSE channel estimation.
//!
//! Users share a pool of `tau` mutually orthogonal pilot sequences, so an AP
//! can only observe the superposition of the channels of users on the same
//! pilot (pilot contamination). Each AP forms the linear MMSE estimate of
//! every user's channel from its projected pilot observation; estimates of
//! co-pilot users are collinear per AP by construction.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix};

/// Maximum redraws before random pilot assignment gives up. Rejection is fast
/// in the operating regime (tau well below K); near tau == K the conditioned
/// distribution is unreachable by rejection and the sampler errors out
/// (tau == K itself is handled exactly, see `assign_pilots_random`).
const MAX_ASSIGNMENT_REDRAWS: usize = 1_000_000;

/// A partition of users into pilot groups: `pilot_of_user[k]` is the pilot
/// index of user k, `groups[j]` the sorted users on pilot j. Every group is
/// non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    pilot_of_user: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl PilotAssignment {
    /// Build from explicit groups; validates that they partition `0..k` and
    /// that none is empty.
    pub fn from_groups(groups: Vec<Vec<usize>>, k: usize) -> Result<PilotAssignment> {
        let mut pilot_of_user = vec![usize::MAX; k];
        for (j, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::invalid_config("pilot_groups", "empty pilot group"));
            }
            for &u in group {
                if u >= k || pilot_of_user[u] != usize::MAX {
                    return Err(Error::invalid_config(
                        "pilot_groups",
                        "groups must partition the user set",
                    ));
                }
                pilot_of_user[u] = j;
            }
        }
        if pilot_of_user.iter().any(|&p| p == usize::MAX) {
            return Err(Error::invalid_config(
                "pilot_groups",
                "groups must cover every user",
            ));
        }
        let mut groups = groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        Ok(PilotAssignment {
            pilot_of_user,
            groups,
        })
    }

    pub fn n_users(&self) -> usize {
        self.pilot_of_user.len()
    }

    pub fn n_pilots(&self) -> usize {
        self.groups.len()
    }

    /// Pilot index of user `k`.
    pub fn pilot_of(&self, k: usize) -> usize {
        self.pilot_of_user[k]
    }

    /// Users on pilot `j`, sorted ascending.
    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    /// Users sharing user `k`'s pilot (including `k` itself), sorted.
    pub fn group_of(&self, k: usize) -> &[usize] {
        &self.groups[self.pilot_of_user[k]]
    }
}

/// Assign each of `k` users a pilot uniformly at random, conditioned on every
/// pilot being used at least once (redraw otherwise).
///
/// `tau == k` is sampled exactly as a uniform random bijection — the
/// conditional law of the rejection sampler — because rejection would almost
/// never terminate there for large k. In between (tau close to but below k at
/// large k) rejection can exhaust its retry budget, which is reported as an
/// error rather than looping forever.
pub fn assign_pilots_random(k: usize, tau: usize, rng: &mut impl Rng) -> Result<PilotAssignment> {
    if tau == 0 || tau > k {
        return Err(Error::invalid_config("tau", "need 1 <= tau <= K"));
    }
    let pilot_of_user: Vec<usize> = if tau == k {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(rng);
        perm
    } else {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let draw: Vec<usize> = (0..k).map(|_| rng.gen_range(0..tau)).collect();
            let mut seen = vec![false; tau];
            for &p in &draw {
                seen[p] = true;
            }
            if seen.iter().all(|&s| s) {
                break draw;
            }
            if attempt >= MAX_ASSIGNMENT_REDRAWS {
                return Err(Error::PilotAssignmentUnreachable {
                    k,
                    tau,
                    attempts: attempt,
                });
            }
        }
    };
    let mut groups = vec![Vec::new(); tau];
    for (u, &p) in pilot_of_user.iter().enumerate() {
        groups[p].push(u); // ascending by construction
    }
    Ok(PilotAssignment {
        pilot_of_user,
        groups,
    })
}

/// One small-scale fading draw: `h` has i.i.d. unit-variance complex Gaussian
/// entries, `g[m][k] = sqrt(beta[m][k]) * h[m][k]` is the channel itself.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
}

/// Draw the i.i.d. CN(0,1) fast-fading matrix (real and imaginary parts
/// N(0, 1/2), column by column).
pub fn draw_small_scale(m: usize, k: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(m, k);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for col in 0..k {
        for row in 0..m {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            h.set(row, col, Complex64::new(re * scale, im * scale));
        }
    }
    h
}

/// Draw a full channel realization over the given large-scale gains.
pub fn channel_realization(beta: &RealMatrix, rng: &mut impl Rng) -> ChannelRealization {
    let (m, k) = (beta.rows(), beta.cols());
    let h = draw_small_scale(m, k, rng);
    let mut g = ComplexMatrix::zeros(m, k);
    for col in 0..k {
        let bc = beta.col(col);
        let hc = h.col(col);
        let gc = g.col_mut(col);
        for row in 0..m {
            gc[row] = hc[row] * bc[row].sqrt();
        }
    }
    ChannelRealization { h, g }
}

/// Large-scale estimation state for one snapshot: everything about the MMSE
/// channel estimator that does not depend on the fast-fading draw.
///
/// Per AP m and user k (with S the pilot group of k):
/// * `c[m][k] = rho*tau*beta[m][k] / (1 + rho*tau*Σ_{i in S} beta[m][i])` —
///   the estimator gain against the group's summed observation;
/// * `alpha[m][k] = beta[m][k] * c[m][k]` — the estimate's variance;
/// * estimation-error variance `beta - alpha` (see [`Self::error_variance`]);
/// * `d[m] = 1 + rho * Σ_i eta[i] * (beta[m][i] - alpha[m][i])` — the
///   effective per-AP noise-plus-estimation-error level.
#[derive(Debug, Clone)]
pub struct EstimationState {
    pub beta: RealMatrix,
    pub alpha: RealMatrix,
    pub c: RealMatrix,
    pub d: Vec<f64>,
    pub rho: f64,
    pub tau: usize,
    pub eta: Vec<f64>,
}

impl EstimationState {
    pub fn n_aps(&self) -> usize {
        self.beta.rows()
    }

    pub fn n_users(&self) -> usize {
        self.beta.cols()
    }

    /// Estimation-error variance `beta[m][k] - alpha[m][k]`.
    #[inline]
    pub fn error_variance(&self, m: usize, k: usize) -> f64 {
        self.beta.at(m, k) - self.alpha.at(m, k)
    }

    /// Sanity checks used by tests: 0 < alpha <= beta entrywise, d >= 1.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.n_users() {
            for m in 0..self.n_aps() {
                let (a, b) = (self.alpha.at(m, k), self.beta.at(m, k));
                if !(a > 0.0 && a <= b && b.is_finite()) {
                    return Err(Error::invalid_config(
                        "estimation_state",
                        format!("alpha[{m}][{k}] = {a:e} out of (0, beta = {b:e}]"),
                    ));
                }
            }
        }
        if self.d.iter().any(|&v| v < 1.0 || !v.is_finite()) {
            return Err(Error::invalid_config("estimation_state", "d entries < 1"));
        }
        Ok(())
    }
}

/// Compute the estimator statistics for one snapshot at transmit powers
/// `eta` (one entry per user, each in [0, 1]).
pub fn alpha_coefficients(
    beta: &RealMatrix,
    assignment: &PilotAssignment,
    rho: f64,
    tau: usize,
    eta: &[f64],
) -> EstimationState {
    let (m, k) = (beta.rows(), beta.cols());
    assert_eq!(assignment.n_users(), k);
    assert_eq!(eta.len(), k);
    assert!(rho > 0.0, "normalized transmit SNR must be positive");
    assert!(tau >= assignment.n_pilots());
    let rt = rho * tau as f64;
    let mut c = RealMatrix::zeros(m, k);
    let mut alpha = RealMatrix::zeros(m, k);
    for j in 0..assignment.n_pilots() {
        let group = assignment.group(j);
        for row in 0..m {
            let s: f64 = group.iter().map(|&i| beta.at(row, i)).sum();
            let denom = 1.0 + rt * s;
            for &i in group {
                let cv = rt * beta.at(row, i) / denom;
                c.set(row, i, cv);
                alpha.set(row, i, beta.at(row, i) * cv);
            }
        }
    }
    let mut d = vec![0.0; m];
    for (row, dm) in d.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..k {
            s += eta[i] * (beta.at(row, i) - alpha.at(row, i));
        }
        *dm = 1.0 + rho * s;
    }
    EstimationState {
        beta: beta.clone(),
        alpha,
        c,
        d,
        rho,
        tau,
        eta: eta.to_vec(),
    }
}

/// Simulate the pilot phase for one fast-fading draw and return the MMSE
/// channel estimates `ghat` (M×K).
///
/// Per AP m and pilot j the (normalized) projected observation is
/// `w[m][j] = Σ_{i in S_j} g[m][i] + n / sqrt(rho*tau)` with n ~ CN(0,1);
/// the estimate of user k on pilot j is `ghat[m][k] = c[m][k] * w[m][j]`.
/// All co-pilot estimates therefore share the factor `w[m][j]` — exact
/// per-AP collinearity.
pub fn estimate_channels(
    g: &ComplexMatrix,
    est: &EstimationState,
    assignment: &PilotAssignment,
    rng: &mut impl Rng,
) -> ComplexMatrix {
    let (m, k) = (g.rows(), g.cols());
    assert_eq!(est.n_aps(), m);
    assert_eq!(est.n_users(), k);
    let noise_scale = std::f64::consts::FRAC_1_SQRT_2 / (est.rho * est.tau as f64).sqrt();
    let mut ghat = ComplexMatrix::zeros(m, k);
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..assignment.n_pilots() {
        let group = assignment.group(j);
        for (row, wm) in w.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for &i in group {
                s += g.at(row, i);
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *wm = s + Complex64::new(re * noise_scale, im * noise_scale);
        }
        for &i in group {
            let ci = est.c.col(i);
            let gi = ghat.col_mut(i);
            for row in 0..m {
                gi[row] = w[row] * ci[row];
            }
        }
    }
    ghat
}

/// Boltzmann constant (J/K).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Physical noise model: converts transmit power, bandwidth, and receiver
/// noise figure into the normalized transmit SNR `rho` used everywhere else
/// (receiver noise variance normalized to 1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Reference temperature for the thermal-noise floor (K).
    pub ref_temperature_k: f64,
    pub tx_power_w: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            ref_temperature_k: 290.0,
            tx_power_w: 0.2,
        }
    }
}

impl NoiseModel {
    /// Receiver noise power `T_ref * k_B * B * 10^(NF/10)` in watts.
    pub fn noise_variance_w(&self) -> f64 {
        self.ref_temperature_k
            * BOLTZMANN_J_PER_K
            * self.bandwidth_hz
            * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Normalized transmit SNR: transmit power over noise power.
    pub fn normalized_rho(&self) -> f64 {
        self.tx_power_w / self.noise_variance_w()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::invalid_config("noise.bandwidth_hz", "must be > 0"));
        }
        if self.noise_figure_db < 0.0 {
            return Err(Error::invalid_config("noise.noise_figure_db", "must be >= 0"));
        }
        if self.ref_temperature_k <= 0.0 {
            return Err(Error::invalid_config("noise.ref_temperature_k", "must be > 0"));
        }
        if self.tx_power_w <= 0.0 {
            return Err(Error::invalid_config("noise.tx_power_w", "must be > 0"));
        }
        Ok(())
    }
}
