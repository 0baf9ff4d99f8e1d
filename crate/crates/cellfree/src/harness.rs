//! Monte Carlo experiment orchestration.
//!
//! A run sweeps network snapshots (layout, shadowing, pilot assignment) in
//! parallel. Inside each snapshot, receivers whose SINR depends on the
//! small-scale channel (MMSE, partial MMSE) are averaged over channel
//! realizations, while the statistics-based receivers (LSFD, MF) and the
//! deterministic partial-MMSE predictor are evaluated once — they need no
//! channel draws. Every random draw comes from a stream keyed by
//! (master seed, stage, snapshot, realization), so a given config produces
//! bit-identical results regardless of thread count or receiver selection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    alpha_coefficients, assign_pilots_random, channel_realization, estimate_channels,
    EstimationState, NoiseModel, PilotAssignment,
};
use crate::det_equiv::{de_sinr_pmmse, FixedPointOptions};
use crate::error::{Error, Result};
use crate::network::{
    generate_layout, large_scale_fading, AreaConfig, PathLossParams, ShadowingParams,
};
use crate::power::{maxmin_bisection, LsfdContext, MaxMinOptions};
use crate::receivers::{
    instantaneous_sinr, lsfd_combiner_and_sinr, lsfd_load, lsfd_statistics_with_load,
    mf_sinr_lsfd_frame, pmmse_combiner_with_q, pmmse_index_set, pmmse_index_set_random,
    pmmse_q_diagonal, MfConvention, MmseRealization, PmmseIndexSet,
};
use crate::rng::{stream, Stage};

/// The receivers an experiment can evaluate. Serialized names double as the
/// labels used in output tables and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiverKind {
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "PMMSE-smart")]
    PmmseSmart,
    #[serde(rename = "PMMSE-random")]
    PmmseRandom,
    #[serde(rename = "LSFD")]
    Lsfd,
    #[serde(rename = "DE-PMMSE")]
    DePmmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 6] = [
        ReceiverKind::Mf,
        ReceiverKind::Mmse,
        ReceiverKind::PmmseSmart,
        ReceiverKind::PmmseRandom,
        ReceiverKind::Lsfd,
        ReceiverKind::DePmmse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReceiverKind::Mf => "MF",
            ReceiverKind::Mmse => "MMSE",
            ReceiverKind::PmmseSmart => "PMMSE-smart",
            ReceiverKind::PmmseRandom => "PMMSE-random",
            ReceiverKind::Lsfd => "LSFD",
            ReceiverKind::DePmmse => "DE-PMMSE",
        }
    }

    pub fn from_label(label: &str) -> Option<ReceiverKind> {
        ReceiverKind::ALL.iter().copied().find(|r| r.label() == label)
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Number of access points.
    pub m: usize,
    /// Number of users.
    pub k: usize,
    /// Number of orthogonal pilot sequences.
    pub tau: usize,
    pub area: AreaConfig,
    pub path_loss: PathLossParams,
    pub shadowing: ShadowingParams,
    pub noise: NoiseModel,
    /// Receivers to evaluate; order fixes the output order.
    pub receivers: Vec<ReceiverKind>,
    pub n_snapshots: usize,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Apply max-min power allocation to the LSFD receiver (all other
    /// receivers always run at full power).
    pub power_control: bool,
    /// Fixed combining vector used by the MF receiver.
    pub mf_convention: MfConvention,
}

impl ExperimentConfig {
    /// A config with the standard physical layer (2 km wrapped square,
    /// 1.9 GHz three-slope path loss, 8 dB correlated shadowing, 200 mW /
    /// 20 MHz / NF 9 dB radio), all receivers, and default sample counts.
    pub fn new(m: usize, k: usize, tau: usize) -> ExperimentConfig {
        ExperimentConfig {
            m,
            k,
            tau,
            area: AreaConfig::default(),
            path_loss: PathLossParams::from_cost231(1900.0, 15.0, 1.65),
            shadowing: ShadowingParams::default(),
            noise: NoiseModel::default(),
            receivers: ReceiverKind::ALL.to_vec(),
            n_snapshots: 100,
            n_realizations: 200,
            master_seed: 1,
            power_control: false,
            mf_convention: MfConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid_config("m", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid_config("k", "must be at least 1"));
        }
        if self.tau == 0 {
            return Err(Error::invalid_config("tau", "must be at least 1"));
        }
        if self.tau > self.k {
            return Err(Error::invalid_config(
                "tau",
                format!("must not exceed k (tau = {}, k = {})", self.tau, self.k),
            ));
        }
        if self.n_snapshots == 0 {
            return Err(Error::invalid_config("n_snapshots", "must be at least 1"));
        }
        if self.n_realizations == 0 {
            return Err(Error::invalid_config(
                "n_realizations",
                "must be at least 1",
            ));
        }
        if self.receivers.is_empty() {
            return Err(Error::invalid_config(
                "receivers",
                "at least one receiver must be enabled",
            ));
        }
        let mut seen = Vec::new();
        for r in &self.receivers {
            if seen.contains(r) {
                return Err(Error::invalid_config(
                    "receivers",
                    format!("duplicate receiver {r}"),
                ));
            }
            seen.push(*r);
        }
        self.area.validate()?;
        self.path_loss.validate()?;
        self.shadowing.validate()?;
        self.noise.validate()?;
        Ok(())
    }

    fn wants(&self, r: ReceiverKind) -> bool {
        self.receivers.contains(&r)
    }
}

/// Rate samples of one receiver over the (snapshot, user) grid.
#[derive(Debug, Clone)]
pub struct ReceiverSamples {
    pub receiver: ReceiverKind,
    /// Snapshot-major grid: the sample for (snapshot s, user u) sits at
    /// `s * n_users + u`. `+inf` marks a diverging predictor value, NaN a
    /// unit that failed and was skipped (keep-going runs only).
    pub samples: Vec<f64>,
}

impl ReceiverSamples {
    /// The finite samples, pooled for CDF/outage/mean statistics.
    pub fn pool(&self) -> Vec<f64> {
        self.samples.iter().copied().filter(|s| s.is_finite()).collect()
    }

    /// How many samples diverged to `+inf` (excluded from the pool).
    pub fn n_infinite(&self) -> usize {
        self.samples.iter().filter(|s| s.is_infinite()).count()
    }

    /// How many samples belong to skipped work units (keep-going runs).
    pub fn n_failed(&self) -> usize {
        self.samples.iter().filter(|s| s.is_nan()).count()
    }
}

/// All rate samples of an experiment, one grid per enabled receiver, in the
/// config's receiver order.
#[derive(Debug, Clone)]
pub struct RateSamples {
    pub n_users: usize,
    pub n_snapshots: usize,
    pub per_receiver: Vec<ReceiverSamples>,
}

impl RateSamples {
    pub fn receiver(&self, kind: ReceiverKind) -> Option<&ReceiverSamples> {
        self.per_receiver.iter().find(|r| r.receiver == kind)
    }

    /// The rate sample of `kind` at (snapshot, user), if that receiver ran.
    pub fn at(&self, kind: ReceiverKind, snapshot: usize, user: usize) -> Option<f64> {
        self.receiver(kind)
            .map(|r| r.samples[snapshot * self.n_users + user])
    }
}

/// A work unit skipped by a keep-going run.
#[derive(Debug, Clone, Serialize)]
pub struct FailedUnit {
    pub snapshot: usize,
    /// `None` when the whole snapshot (or work shared across its users) failed.
    pub user: Option<usize>,
    pub message: String,
}

/// Samples plus the work units a keep-going run skipped.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub samples: RateSamples,
    pub failures: Vec<FailedUnit>,
}

/// Per-snapshot result produced by the worker.
struct SnapshotOutcome {
    /// One length-K rate row per enabled receiver (config order); NaN cells
    /// mark skipped users in keep-going mode.
    rates: Vec<Vec<f64>>,
    /// User-scoped failures collected in keep-going mode.
    failures: Vec<(Option<usize>, Error)>,
}

/// Runs the experiment, stopping at the first numerical failure (reported
/// with its snapshot/user coordinates; the earliest snapshot wins ties).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RateSamples> {
    config.validate()?;
    let rho = config.noise.normalized_rho();
    let outcomes: Vec<Result<SnapshotOutcome>> = (0..config.n_snapshots)
        .into_par_iter()
        .map(|s| run_snapshot(config, rho, s, false))
        .collect();
    let mut samples = empty_grids(config);
    for (s, outcome) in outcomes.into_iter().enumerate() {
        fill_snapshot(&mut samples, config.k, s, outcome?.rates);
    }
    Ok(samples)
}

/// Runs the experiment, skipping failing work units instead of aborting:
/// their cells stay NaN (excluded from pools) and each failure is recorded.
/// Config errors still fail the run.
pub fn run_experiment_keep_going(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let rho = config.noise.normalized_rho();
    let outcomes: Vec<Result<SnapshotOutcome>> = (0..config.n_snapshots)
        .into_par_iter()
        .map(|s| run_snapshot(config, rho, s, true))
        .collect();
    let mut samples = empty_grids(config);
    let mut failures = Vec::new();
    for (s, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(snap) => {
                for (user, error) in &snap.failures {
                    failures.push(FailedUnit {
                        snapshot: s,
                        user: *user,
                        message: error.to_string(),
                    });
                }
                fill_snapshot(&mut samples, config.k, s, snap.rates);
            }
            Err(error) => failures.push(FailedUnit {
                snapshot: s,
                user: None,
                message: error.to_string(),
            }),
        }
    }
    Ok(ExperimentOutcome { samples, failures })
}

fn empty_grids(config: &ExperimentConfig) -> RateSamples {
    RateSamples {
        n_users: config.k,
        n_snapshots: config.n_snapshots,
        per_receiver: config
            .receivers
            .iter()
            .map(|&receiver| ReceiverSamples {
                receiver,
                samples: vec![f64::NAN; config.n_snapshots * config.k],
            })
            .collect(),
    }
}

fn fill_snapshot(samples: &mut RateSamples, k: usize, s: usize, rates: Vec<Vec<f64>>) {
    for (grid, row) in samples.per_receiver.iter_mut().zip(rates) {
        grid.samples[s * k..(s + 1) * k].copy_from_slice(&row);
    }
}

/// Evaluates every enabled receiver for one network snapshot.
fn run_snapshot(
    config: &ExperimentConfig,
    rho: f64,
    s: usize,
    keep_going: bool,
) -> Result<SnapshotOutcome> {
    let (m, k, tau) = (config.m, config.k, config.tau);
    let seed = config.master_seed;
    let snap = s as u64;

    let layout = generate_layout(m, k, config.area, &mut stream(seed, Stage::Layout, snap, 0));
    let lsf = large_scale_fading(
        &layout,
        &config.path_loss,
        &config.shadowing,
        &mut stream(seed, Stage::Shadowing, snap, 0),
    )
    .map_err(|e| e.at_snapshot(s))?;
    let assignment = assign_pilots_random(k, tau, &mut stream(seed, Stage::Pilots, snap, 0))
        .map_err(|e| e.at_snapshot(s))?;
    let eta = vec![1.0; k];
    let est = alpha_coefficients(&lsf.beta, &assignment, rho, tau, &eta);

    let mut rates: Vec<Vec<f64>> = vec![vec![f64::NAN; k]; config.receivers.len()];
    let mut failures: Vec<(Option<usize>, Error)> = Vec::new();
    let slot = |r: ReceiverKind| config.receivers.iter().position(|&x| x == r);

    // Index sets and effective noise diagonals, shared by the partial-MMSE
    // receiver and its deterministic predictor.
    let smart_sets: Option<Vec<(PmmseIndexSet, Vec<f64>)>> =
        (config.wants(ReceiverKind::PmmseSmart) || config.wants(ReceiverKind::DePmmse)).then(
            || {
                (0..k)
                    .map(|u| {
                        let iset = pmmse_index_set(u, &est.beta, &assignment);
                        let q = pmmse_q_diagonal(&est, &iset.members);
                        (iset, q)
                    })
                    .collect()
            },
        );
    let random_sets: Option<Vec<(PmmseIndexSet, Vec<f64>)>> = config
        .wants(ReceiverKind::PmmseRandom)
        .then(|| {
            let mut rng = stream(seed, Stage::PmmseRandomSelect, snap, 0);
            (0..k)
                .map(|u| {
                    let iset = pmmse_index_set_random(u, &assignment, &mut rng);
                    let q = pmmse_q_diagonal(&est, &iset.members);
                    (iset, q)
                })
                .collect()
        });

    // Statistics-based receivers: no channel draws needed.
    if let Some(pos) = slot(ReceiverKind::Lsfd) {
        match lsfd_rates(config, &est, &assignment, &eta) {
            Ok(row) => rates[pos] = row,
            Err(e) if keep_going => failures.push((None, e)),
            Err(e) => return Err(e.at_snapshot(s)),
        }
    }
    if let Some(pos) = slot(ReceiverKind::Mf) {
        let load = lsfd_load(&est, &eta);
        for u in 0..k {
            let stats = lsfd_statistics_with_load(u, &est, &assignment, &load);
            let sinr = mf_sinr_lsfd_frame(&stats, rho, &eta, config.mf_convention);
            rates[pos][u] = (1.0 + sinr).log2();
        }
    }
    if let Some(pos) = slot(ReceiverKind::DePmmse) {
        let sets = smart_sets.as_ref().expect("smart sets exist for DE");
        let opts = FixedPointOptions::default();
        for u in 0..k {
            match de_sinr_pmmse(u, &est, &assignment, &sets[u].0, &sets[u].1, &opts) {
                Ok(sinr) => rates[pos][u] = (1.0 + sinr).log2(),
                Err(e) if keep_going => failures.push((Some(u), e)),
                Err(e) => return Err(e.at(s, u)),
            }
        }
    }

    // Channel-realization loop for the instantaneous receivers.
    let mmse_pos = slot(ReceiverKind::Mmse);
    let pmmse_runs: Vec<(usize, &Vec<(PmmseIndexSet, Vec<f64>)>)> = [
        (slot(ReceiverKind::PmmseSmart), smart_sets.as_ref()),
        (slot(ReceiverKind::PmmseRandom), random_sets.as_ref()),
    ]
    .into_iter()
    .filter_map(|(pos, sets)| Some((pos?, sets.expect("sets exist when enabled"))))
    .collect();

    if mmse_pos.is_some() || !pmmse_runs.is_empty() {
        let mut acc: Vec<Vec<f64>> = vec![vec![0.0; k]; config.receivers.len()];
        for real in 0..config.n_realizations {
            let chan = channel_realization(
                &est.beta,
                &mut stream(seed, Stage::SmallScale, snap, real as u64),
            );
            let ghat = estimate_channels(
                &chan.g,
                &est,
                &assignment,
                &mut stream(seed, Stage::PilotNoise, snap, real as u64),
            );
            if let Some(pos) = mmse_pos {
                match MmseRealization::new(&ghat, &est) {
                    Ok(mmse) => {
                        for u in 0..k {
                            if acc[pos][u].is_nan() {
                                continue;
                            }
                            match mmse.sinr(u, &est) {
                                Ok(sinr) => acc[pos][u] += (1.0 + sinr).log2(),
                                Err(e) if keep_going => {
                                    failures.push((Some(u), e));
                                    acc[pos][u] = f64::NAN;
                                }
                                Err(e) => return Err(e.at(s, u)),
                            }
                        }
                    }
                    Err(e) if keep_going => {
                        failures.push((None, e));
                        acc[pos] = vec![f64::NAN; k];
                    }
                    Err(e) => return Err(e.at_snapshot(s)),
                }
            }
            for &(pos, sets) in &pmmse_runs {
                for u in 0..k {
                    if acc[pos][u].is_nan() {
                        continue;
                    }
                    match pmmse_combiner_with_q(u, &ghat, &est, &sets[u].0, &sets[u].1) {
                        Ok(comb) => {
                            let sinr = instantaneous_sinr(&comb.v, u, &ghat, &est);
                            acc[pos][u] += (1.0 + sinr).log2();
                        }
                        Err(e) if keep_going => {
                            failures.push((Some(u), e));
                            acc[pos][u] = f64::NAN;
                        }
                        Err(e) => return Err(e.at(s, u)),
                    }
                }
            }
        }
        let scale = 1.0 / config.n_realizations as f64;
        for pos in mmse_pos.into_iter().chain(pmmse_runs.iter().map(|&(p, _)| p)) {
            for u in 0..k {
                rates[pos][u] = acc[pos][u] * scale;
            }
        }
    }

    Ok(SnapshotOutcome { rates, failures })
}

/// Per-user LSFD rates, at full power or (with power control) at the max-min
/// allocation.
fn lsfd_rates(
    config: &ExperimentConfig,
    est: &EstimationState,
    assignment: &PilotAssignment,
    full_power: &[f64],
) -> Result<Vec<f64>> {
    let eta: Vec<f64> = if config.power_control {
        let ctx = LsfdContext::new(est, assignment);
        maxmin_bisection(&ctx, &MaxMinOptions::default())?.eta
    } else {
        full_power.to_vec()
    };
    let load = lsfd_load(est, &eta);
    (0..config.k)
        .map(|u| {
            let stats = lsfd_statistics_with_load(u, est, assignment, &load);
            let (_, sinr) = lsfd_combiner_and_sinr(&stats, est.rho, &eta)?;
            Ok((1.0 + sinr).log2())
        })
        .collect()
}

/// A right-continuous empirical CDF: `ps[i]` is the fraction of samples
/// `<= xs[i]`, with `xs` strictly increasing and `ps` ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    if samples.is_empty() {
        return Err(Error::EmptySamplePool);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        // Keep only the last index of each run of equal values.
        if i + 1 == sorted.len() || sorted[i + 1] > x {
            xs.push(x);
            ps.push((i + 1) as f64 / n);
        }
    }
    Ok(EmpiricalCdf { xs, ps })
}

/// Nearest-rank `p`-quantile of the pooled rates: the smallest sample whose
/// rank is at least `ceil(p * n)`. With `p = 0.05` this is the 5%-outage
/// rate.
pub fn outage_rate(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamplePool);
    }
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1)");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // The epsilon absorbs representation slop in p*n (e.g. 0.05 * 60) so
    // exact-rank inputs land on their intended rank.
    let rank = (p * sorted.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank - 1])
}

pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamplePool);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// The three preset experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetId {
    /// One dense network, per-user rate CDFs across all receivers.
    Dense,
    /// Antenna-count sweep at fixed user count, correlated vs independent
    /// shadowing.
    AntennaSweep,
    /// Proportionally grown networks (fixed M/K and K/tau ratios).
    NetworkScaling,
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<PresetId> {
        match s {
            "dense" => Ok(PresetId::Dense),
            "antenna-sweep" => Ok(PresetId::AntennaSweep),
            "network-scaling" => Ok(PresetId::NetworkScaling),
            other => Err(Error::invalid_config(
                "preset",
                format!(
                    "unknown preset id {other:?} (expected dense, antenna-sweep, or network-scaling)"
                ),
            )),
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetId::Dense => "dense",
            PresetId::AntennaSweep => "antenna-sweep",
            PresetId::NetworkScaling => "network-scaling",
        })
    }
}

/// One labeled config of a preset family.
#[derive(Debug, Clone)]
pub struct PresetRun {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Preset experiment lists:
///
/// * `dense` — one dense network (M = 1000, K = 50, tau = 10), independent
///   shadowing, all six receivers: per-user rate CDFs.
/// * `antenna-sweep` — K = 16, tau = 4, M swept over {32, 64, 128, 256, 512}
///   with correlated and with independent shadowing; MMSE, smart partial
///   MMSE, and the deterministic predictor: outage/mean versus M.
/// * `network-scaling` — proportionally grown networks (M/K = 8, K/tau ≈ 4)
///   at K ∈ {16, 32, 50}, independent shadowing, MMSE and smart partial
///   MMSE: outage versus network size. tau = 13 for K = 50 (nearest integer
///   to K/4).
pub fn preset_runs(id: PresetId) -> Vec<PresetRun> {
    match id {
        PresetId::Dense => {
            let mut config = ExperimentConfig::new(1000, 50, 10);
            config.shadowing.independent = true;
            config.n_snapshots = 100;
            config.n_realizations = 100;
            vec![PresetRun {
                label: "M1000".to_string(),
                config,
            }]
        }
        PresetId::AntennaSweep => {
            let mut runs = Vec::new();
            for &m in &[32usize, 64, 128, 256, 512] {
                for independent in [false, true] {
                    let mut config = ExperimentConfig::new(m, 16, 4);
                    config.shadowing.independent = independent;
                    config.receivers = vec![
                        ReceiverKind::Mmse,
                        ReceiverKind::PmmseSmart,
                        ReceiverKind::DePmmse,
                    ];
                    let kind = if independent { "independent" } else { "correlated" };
                    runs.push(PresetRun {
                        label: format!("M{m}-{kind}"),
                        config,
                    });
                }
            }
            runs
        }
        PresetId::NetworkScaling => [(128usize, 16usize, 4usize), (256, 32, 8), (400, 50, 13)]
            .iter()
            .map(|&(m, k, tau)| {
                let mut config = ExperimentConfig::new(m, k, tau);
                config.shadowing.independent = true;
                config.receivers = vec![ReceiverKind::Mmse, ReceiverKind::PmmseSmart];
                PresetRun {
                    label: format!("K{k}"),
                    config,
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::new(12, 4, 2);
        config.n_snapshots = 2;
        config.n_realizations = 3;
        config.master_seed = 77;
        config
    }

    fn bits(samples: &RateSamples) -> Vec<Vec<u64>> {
        samples
            .per_receiver
            .iter()
            .map(|r| r.samples.iter().map(|s| s.to_bits()).collect())
            .collect()
    }

    #[test]
    fn identical_runs_are_bit_identical_across_thread_counts() {
        let config = tiny_config();
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_experiment(&config).unwrap())
        };
        let single = run_with(1);
        let multi = run_with(4);
        assert_eq!(bits(&single), bits(&multi));
        let again = run_with(4);
        assert_eq!(bits(&multi), bits(&again));
    }

    #[test]
    fn disabling_a_receiver_leaves_the_rest_bit_exact() {
        let full = run_experiment(&tiny_config()).unwrap();
        let mut reduced_config = tiny_config();
        reduced_config.receivers = vec![ReceiverKind::Mmse, ReceiverKind::PmmseSmart];
        let reduced = run_experiment(&reduced_config).unwrap();
        for kind in [ReceiverKind::Mmse, ReceiverKind::PmmseSmart] {
            let a = full.receiver(kind).unwrap();
            let b = reduced.receiver(kind).unwrap();
            let a_bits: Vec<u64> = a.samples.iter().map(|s| s.to_bits()).collect();
            let b_bits: Vec<u64> = b.samples.iter().map(|s| s.to_bits()).collect();
            assert_eq!(a_bits, b_bits, "{kind} changed when others were disabled");
        }
        assert!(reduced.receiver(ReceiverKind::Lsfd).is_none());
        assert!(reduced.at(ReceiverKind::Lsfd, 0, 0).is_none());
    }

    #[test]
    fn mmse_rate_dominates_pmmse_rate_per_user() {
        let samples = run_experiment(&tiny_config()).unwrap();
        let mmse = samples.receiver(ReceiverKind::Mmse).unwrap();
        let pmmse = samples.receiver(ReceiverKind::PmmseSmart).unwrap();
        for (a, b) in mmse.samples.iter().zip(&pmmse.samples) {
            assert!(a + 1e-10 >= *b, "MMSE rate {a} below PMMSE rate {b}");
        }
    }

    #[test]
    fn keep_going_matches_strict_on_clean_runs() {
        let config = tiny_config();
        let strict = run_experiment(&config).unwrap();
        let lenient = run_experiment_keep_going(&config).unwrap();
        assert!(lenient.failures.is_empty());
        assert_eq!(bits(&strict), bits(&lenient.samples));
        for r in &lenient.samples.per_receiver {
            assert_eq!(r.n_failed(), 0);
            assert_eq!(r.n_infinite(), 0);
            assert_eq!(r.pool().len(), config.n_snapshots * config.k);
        }
    }

    #[test]
    fn power_control_never_lowers_the_lsfd_minimum_rate() {
        let mut config = tiny_config();
        config.receivers = vec![ReceiverKind::Lsfd];
        let equal = run_experiment(&config).unwrap();
        config.power_control = true;
        let controlled = run_experiment(&config).unwrap();
        for s in 0..config.n_snapshots {
            let row_min = |samples: &RateSamples| {
                (0..config.k)
                    .map(|u| samples.at(ReceiverKind::Lsfd, s, u).unwrap())
                    .fold(f64::INFINITY, f64::min)
            };
            assert!(row_min(&controlled) >= row_min(&equal) - 1e-12);
        }
    }

    #[test]
    fn grid_layout_matches_pool_contents() {
        let samples = run_experiment(&tiny_config()).unwrap();
        let mf = samples.receiver(ReceiverKind::Mf).unwrap();
        assert_eq!(mf.samples.len(), 2 * 4);
        assert_eq!(
            samples.at(ReceiverKind::Mf, 1, 3).unwrap(),
            mf.samples[1 * 4 + 3]
        );
        assert!(mf.samples.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn config_validation_names_the_offending_field() {
        let mut config = tiny_config();
        config.tau = 0;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
        let mut config = tiny_config();
        config.tau = 9;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("must not exceed k"), "{err}");
        let mut config = tiny_config();
        config.receivers.clear();
        assert!(config.validate().is_err());
        let mut config = tiny_config();
        config.receivers = vec![ReceiverKind::Mf, ReceiverKind::Mf];
        assert!(config.validate().unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn empirical_cdf_handles_the_textbook_pools() {
        let single = empirical_cdf(&[2.5, 2.5, 2.5]).unwrap();
        assert_eq!(single.xs, vec![2.5]);
        assert_eq!(single.ps, vec![1.0]);
        let two = empirical_cdf(&[3.0, 1.0]).unwrap();
        assert_eq!(two.xs, vec![1.0, 3.0]);
        assert_eq!(two.ps, vec![0.5, 1.0]);
        assert!(empirical_cdf(&[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn empirical_cdf_is_monotone_on_random_pools(
            pool in proptest::collection::vec(-3.0..9.0f64, 1..60)
        ) {
            let cdf = empirical_cdf(&pool).unwrap();
            proptest::prop_assert!(cdf.xs.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert!(cdf.ps.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert_eq!(*cdf.ps.last().unwrap(), 1.0);
            // Right-continuity at the sample points: each step carries the
            // cumulative count through its own x.
            let n = pool.len() as f64;
            for (x, p) in cdf.xs.iter().zip(&cdf.ps) {
                let count = pool.iter().filter(|v| *v <= x).count() as f64;
                proptest::prop_assert_eq!(count / n, *p);
            }
        }

        #[test]
        fn outage_never_exceeds_the_mean_on_generated_pools(
            pool in proptest::collection::vec(0.0..10.0f64, 2..200),
            p in 0.01..0.2f64
        ) {
            proptest::prop_assert!(
                outage_rate(&pool, p).unwrap() <= mean(&pool).unwrap() + 1e-12
            );
        }
    }

    #[test]
    fn outage_rate_uses_nearest_rank() {
        let pool: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(outage_rate(&pool, 0.05).unwrap(), 5.0);
        assert_eq!(outage_rate(&[7.0; 9], 0.05).unwrap(), 7.0);
        // 0.05 * 60 is 3.0000000000000004 in floating point; the intended
        // rank is still 3.
        let pool60: Vec<f64> = (1..=60).map(|i| i as f64).collect();
        assert_eq!(outage_rate(&pool60, 0.05).unwrap(), 3.0);
        assert_eq!(outage_rate(&pool, 0.001).unwrap(), 1.0);
    }

    #[test]
    fn presets_match_their_descriptions() {
        let dense = preset_runs(PresetId::Dense);
        assert_eq!(dense.len(), 1);
        let c = &dense[0].config;
        assert_eq!((c.m, c.k, c.tau), (1000, 50, 10));
        assert!(c.shadowing.independent);
        assert!(c.n_snapshots >= 100 && c.n_realizations >= 100);
        assert_eq!(c.receivers.len(), 6);
        assert!(!c.power_control);

        let sweep = preset_runs(PresetId::AntennaSweep);
        assert_eq!(sweep.len(), 10);
        assert!(sweep.iter().all(|r| r.config.k == 16 && r.config.tau == 4));
        assert_eq!(
            sweep.iter().filter(|r| r.config.shadowing.independent).count(),
            5
        );
        assert!(sweep.iter().any(|r| r.label == "M512-correlated"));

        let scaling = preset_runs(PresetId::NetworkScaling);
        assert_eq!(scaling.len(), 3);
        for run in &scaling {
            assert_eq!(run.config.m, 8 * run.config.k);
            assert!(run.config.shadowing.independent);
        }
        let labels: Vec<&str> = scaling.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["K16", "K32", "K50"]);
    }

    #[test]
    fn preset_ids_round_trip_through_strings() {
        for id in [
            PresetId::Dense,
            PresetId::AntennaSweep,
            PresetId::NetworkScaling,
        ] {
            assert_eq!(id.to_string().parse::<PresetId>().unwrap(), id);
        }
        assert!("bogus".parse::<PresetId>().is_err());
    }

    #[test]
    fn receiver_labels_round_trip() {
        for kind in ReceiverKind::ALL {
            assert_eq!(ReceiverKind::from_label(kind.label()), Some(kind));
        }
        assert_eq!(ReceiverKind::from_label("mmse"), None);
    }
}
