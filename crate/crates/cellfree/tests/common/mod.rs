//! Helpers shared by the integration suites: one-call network snapshots and
//! Monte-Carlo SINR statistics for the partial-MMSE receiver.
#![allow(dead_code)]

use cellfree::channel::{
    alpha_coefficients, assign_pilots_random, channel_realization, estimate_channels,
    EstimationState, PilotAssignment,
};
use cellfree::det_equiv::{de_sinr_pmmse, FixedPointOptions};
use cellfree::network::{
    generate_layout, large_scale_fading, AreaConfig, PathLossParams, ShadowingParams,
};
use cellfree::receivers::{
    instantaneous_sinr, pmmse_combiner_with_q, pmmse_index_set, PmmseIndexSet,
};
use cellfree::rng::{stream, Stage};

/// Transmit SNR for 200 mW over 20 MHz at 9 dB noise figure (290 K reference).
pub const RHO: f64 = 3.144_263_3e11;

pub struct Snapshot {
    pub est: EstimationState,
    pub assignment: PilotAssignment,
    pub isets: Vec<PmmseIndexSet>,
    pub qs: Vec<Vec<f64>>,
}

/// One network draw: AP/user layout, path loss with shadowing, random pilots,
/// estimation statistics at full power, and per-user partial-MMSE index sets.
pub fn snapshot(m: usize, k: usize, tau: usize, seed: u64, snap: u64) -> Snapshot {
    let area = AreaConfig::default();
    let path = PathLossParams::from_cost231(1900.0, 15.0, 1.65);
    let shadowing = ShadowingParams::default();
    let layout = generate_layout(m, k, area, &mut stream(seed, Stage::Layout, snap, 0));
    let lsf = large_scale_fading(
        &layout,
        &path,
        &shadowing,
        &mut stream(seed, Stage::Shadowing, snap, 0),
    )
    .expect("shadowing factorization succeeds");
    let assignment =
        assign_pilots_random(k, tau, &mut stream(seed, Stage::Pilots, snap, 0)).unwrap();
    let eta = vec![1.0; k];
    let est = alpha_coefficients(&lsf.beta, &assignment, RHO, tau, &eta);
    let isets: Vec<PmmseIndexSet> = (0..k)
        .map(|u| pmmse_index_set(u, &est.beta, &assignment))
        .collect();
    let qs: Vec<Vec<f64>> = isets
        .iter()
        .map(|iset| cellfree::receivers::pmmse_q_diagonal(&est, &iset.members))
        .collect();
    Snapshot {
        est,
        assignment,
        isets,
        qs,
    }
}

pub struct UserGaps {
    /// |log2(1 + mean SINR) - log2(1 + predicted SINR)| per user.
    pub sinr_level: Vec<f64>,
    /// log2(1 + predicted SINR) - mean log2(1 + SINR) per user (signed).
    pub rate_deficit: Vec<f64>,
}

/// Monte-Carlo SINR statistics for every user of one snapshot, compared
/// against the deterministic predictor.
pub fn gaps_one_snapshot(sn: &Snapshot, seed: u64, snap: u64, n_real: usize) -> UserGaps {
    let k = sn.est.n_users();
    let mut mean_sinr = vec![0.0; k];
    let mut mean_rate = vec![0.0; k];
    for real in 0..n_real {
        let chan = channel_realization(
            &sn.est.beta,
            &mut stream(seed, Stage::SmallScale, snap, real as u64),
        );
        let ghat = estimate_channels(
            &chan.g,
            &sn.est,
            &sn.assignment,
            &mut stream(seed, Stage::PilotNoise, snap, real as u64),
        );
        for u in 0..k {
            let comb = pmmse_combiner_with_q(u, &ghat, &sn.est, &sn.isets[u], &sn.qs[u])
                .expect("combiner solve succeeds");
            let s = instantaneous_sinr(&comb.v, u, &ghat, &sn.est);
            mean_sinr[u] += s / n_real as f64;
            mean_rate[u] += (1.0 + s).log2() / n_real as f64;
        }
    }
    let opts = FixedPointOptions::default();
    let mut sinr_level = Vec::with_capacity(k);
    let mut rate_deficit = Vec::with_capacity(k);
    for u in 0..k {
        let predicted = de_sinr_pmmse(u, &sn.est, &sn.assignment, &sn.isets[u], &sn.qs[u], &opts)
            .expect("predictor converges");
        let de_rate = (1.0 + predicted).log2();
        sinr_level.push(((1.0 + mean_sinr[u]).log2() - de_rate).abs());
        rate_deficit.push(de_rate - mean_rate[u]);
    }
    UserGaps {
        sinr_level,
        rate_deficit,
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
