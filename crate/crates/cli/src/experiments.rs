//! The six experiments. Each turns an [`ExperimentSpec`] into one result table.
//!
//! Monte Carlo trials draw from `rng::stream(seed, key)` with a key fixed by the
//! trial's position in the sweep, and rayon's ordered `collect` keeps rows in
//! sweep order. Thread count therefore never changes an output byte.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use fda_core::channel::{array_factor, beta, propagate_with, LinkChannel, Scatterer};
use fda_core::commrx::{capacity_curves, combine_full_band, combine_single_block, Combined, ReceiverKind};
use fda_core::config::{BlockIndex, FdaSystem};
use fda_core::sensing::{
    equalize_full_band, equalize_full_band_guarded, estimate_channel_zf, full_band_max_range,
    full_band_resolution, isl, measure_range_error, predict_range_error, predict_range_error_refined,
    range_profile_full_band, range_profile_single_block, sense, single_block_max_range,
    single_block_resolution, ProfileOptions, RangeProfile,
};
use fda_core::txchain::steered_spectrum;
use fda_core::{rng, Complex64};
use rand::Rng;
use rayon::prelude::*;

use crate::spec::{system_config_for, ExperimentSpec, SceneSpec, ScattererSpec};
use crate::table::{ExperimentResult, Table, Value};

/// Symbols per receiver for the capacity Monte Carlo when trials are not given.
pub const CAPACITY_SYMBOLS: usize = 100_000;

/// Oversampling of the profiles written by the two-target demo.
pub const DEMO_OVERSAMPLE: usize = 4;

/// Range of the ISL and range-error targets, in full-band bins.
pub const SWEEP_TARGET_BINS: f64 = 20.0;

/// Lowest dB value written to a table; exact zeros map here.
pub const DB_FLOOR: f64 = -300.0;

const LINK_DISTANCE_M: f64 = 50.0;

/// Validates `spec` and runs its experiment on the current rayon pool.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let table = match spec.experiment.as_str() {
        "beampattern" => beampattern(spec),
        "capacity" => capacity(spec),
        "sensing-tradeoff" => sensing_tradeoff(spec),
        "isl-sweep" => isl_sweep(spec),
        "range-error-sweep" => range_error_sweep(spec),
        "two-target" => two_target(spec),
        other => bail!("unknown experiment `{other}`"),
    }
    .with_context(|| format!("running {}", spec.experiment))?;
    Ok(ExperimentResult::new(spec, table))
}

pub fn run_beampattern(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "beampattern"))
}

pub fn run_capacity(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "capacity"))
}

pub fn run_sensing_tradeoff(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "sensing-tradeoff"))
}

pub fn run_isl_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "isl-sweep"))
}

pub fn run_range_error_sweep(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "range-error-sweep"))
}

pub fn run_two_target_demo(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run(&named(spec, "two-target"))
}

fn named(spec: &ExperimentSpec, name: &str) -> ExperimentSpec {
    ExperimentSpec { experiment: name.to_string(), ..spec.clone() }
}

fn system(spec: &ExperimentSpec, antennas: usize) -> Result<FdaSystem> {
    Ok(FdaSystem::new(system_config_for(&spec.config, antennas))?)
}

fn db_power(p: f64) -> f64 {
    (10.0 * p.log10()).max(DB_FLOOR)
}

fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Per-block `|AF|²` over a receive-angle grid, analytic and measured through
/// noisy propagation (coherent estimate of the per-block gain after removing `β`).
fn beampattern(spec: &ExperimentSpec) -> Result<Table> {
    let theta_tx = 0.0;
    let n_angles = spec.angles_deg.len() as u64;
    let trials = spec.trials as u64;
    let mut jobs = Vec::new();
    for (i_snr, &snr_db) in spec.snr_db.iter().enumerate() {
        for (i_m, &m) in spec.antennas.iter().enumerate() {
            for (i_a, &deg) in spec.angles_deg.iter().enumerate() {
                let base = ((i_snr * spec.antennas.len() + i_m) as u64 * n_angles + i_a as u64) * trials;
                jobs.push((snr_db, m, deg, base));
            }
        }
    }
    let rows: Vec<Vec<Vec<Value>>> = jobs
        .par_iter()
        .map(|&(snr_db, m, deg, base)| -> Result<Vec<Vec<Value>>> {
            let sys = system(spec, m)?;
            let theta = deg.to_radians();
            let rx_point = Scatterer::new(theta, LINK_DISTANCE_M, Complex64::new(1.0, 0.0))?;
            let link = LinkChannel::new(&[rx_point], &sys);
            let blocks: Vec<BlockIndex> = sys.block_indices().collect();
            let mut acc = vec![Complex64::new(0.0, 0.0); blocks.len()];
            for t in 0..trials {
                let mut r = rng::stream(spec.seed, base + t);
                let tx = steered_spectrum(&mut r, theta_tx, &sys);
                let rx = propagate_with(&tx, &link, noise_variance(snr_db), &mut r);
                for (a, &b) in acc.iter_mut().zip(&blocks) {
                    for (k, s) in sys.in_block_indices().zip(tx.symbols().values()) {
                        *a += rx.r.get(b, k) / (beta(b, k, &rx_point, &sys) * s);
                    }
                }
            }
            let n = (trials as usize * sys.block_len()) as f64;
            Ok(blocks
                .iter()
                .zip(&acc)
                .map(|(&b, a)| {
                    let analytic = array_factor(b, theta, theta_tx, &sys).norm_sqr();
                    let measured = (a / n).norm_sqr();
                    vec![
                        m.into(),
                        snr_db.into(),
                        b.value().into(),
                        deg.into(),
                        db_power(analytic).into(),
                        db_power(measured).into(),
                        trials.into(),
                        spec.seed.into(),
                    ]
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["M", "snr_db", "b_f", "theta_deg", "gain_db", "gain_mc_db", "trials", "seed"]);
    rows.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

/// Trials needed to collect [`CAPACITY_SYMBOLS`] symbols per receiver.
pub fn capacity_trials(spec: &ExperimentSpec, sys: &FdaSystem) -> usize {
    if spec.trials > 0 {
        spec.trials
    } else {
        CAPACITY_SYMBOLS.div_ceil(sys.block_len())
    }
}

/// Both receivers on the same noisy symbols, with the analytic values alongside.
fn capacity(spec: &ExperimentSpec) -> Result<Table> {
    let theta = spec.angles_deg[0].to_radians();
    let mut table = Table::new(&[
        "M",
        "snr_db",
        "receiver_kind",
        "post_snr_db",
        "gain_db",
        "analytic_gain_db",
        "capacity",
        "analytic_capacity",
        "capacity_normalized",
        "analytic_capacity_normalized",
        "ser",
        "evm",
        "trials",
        "seed",
    ]);
    let n_m = spec.antennas.len() as u64;
    for (i_snr, &snr_db) in spec.snr_db.iter().enumerate() {
        let analytic = capacity_curves(snr_db, &spec.antennas);
        let single_antenna = (1.0 + 10f64.powf(snr_db / 10.0)).log2();
        for (i_m, (&m, point)) in spec.antennas.iter().zip(&analytic).enumerate() {
            let sys = system(spec, m)?;
            let trials = capacity_trials(spec, &sys);
            let rx_point = Scatterer::new(theta, LINK_DISTANCE_M, Complex64::new(1.0, 0.0))?;
            let link = LinkChannel::new(&[rx_point], &sys);
            let base = (i_snr as u64 * n_m + i_m as u64) << 32;
            let parts: Vec<(Combined, Combined)> = (0..trials as u64)
                .into_par_iter()
                .map(|t| -> Result<(Combined, Combined)> {
                    let mut r = rng::stream(spec.seed, base + t);
                    let tx = steered_spectrum(&mut r, theta, &sys);
                    let rx = propagate_with(&tx, &link, noise_variance(snr_db), &mut r);
                    Ok((
                        combine_single_block(&rx, tx.symbols(), &rx_point, &sys)?,
                        combine_full_band(&rx, tx.symbols(), &rx_point, theta, &sys)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let mut parts = parts.into_iter();
            let (mut sb, mut fb) = parts.next().context("no trials")?;
            for (a, b) in parts {
                sb.extend(a);
                fb.extend(b);
            }
            for (combined, kind, cap) in [
                (sb, ReceiverKind::SingleBlock, point.single_block),
                (fb, ReceiverKind::FullBand, point.full_band),
            ] {
                let rep = combined.report();
                table.push(vec![
                    m.into(),
                    snr_db.into(),
                    kind.label().into(),
                    rep.post_snr_db.into(),
                    rep.gain_db.into(),
                    (10.0 * kind.analytic_gain(m).log10()).into(),
                    rep.capacity_bps_hz.into(),
                    cap.into(),
                    (rep.capacity_bps_hz / single_antenna).into(),
                    (cap / single_antenna).into(),
                    rep.ser.into(),
                    rep.evm.into(),
                    trials.into(),
                    spec.seed.into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Resolution and range limits per `M`, normalized to a single antenna with the
/// same total bandwidth, plus measured `-3 dB` widths from a noiseless target.
///
/// The path-loss factor `M^{1/4}` is the monostatic radar equation with a
/// transmit beamforming power gain of `M`.
fn sensing_tradeoff(spec: &ExperimentSpec) -> Result<Table> {
    let reference = system(spec, 1)?;
    let res_1 = single_block_resolution(&reference);
    let mut table = Table::new(&[
        "M",
        "resolution_sb_m",
        "resolution_fb_m",
        "resolution_factor",
        "range_factor_pathloss",
        "r_max_sb_m",
        "r_max_fb_m",
        "measured_width_sb_m",
        "measured_width_fb_m",
        "seed",
    ]);
    for &m in &spec.antennas {
        let sys = system(spec, m)?;
        let sb = single_block_resolution(&sys);
        let fb = full_band_resolution(&sys);
        // Off-grid target well inside both unambiguous ranges.
        let target = Scatterer::target(0.0, 10.3 * sb, Complex64::new(1.0, 0.0))?;
        let est = sense(0.0, &LinkChannel::new(&[target], &sys), 0.0, &mut rng::stream(spec.seed, m as u64), &sys)?;
        let opts = ProfileOptions::oversampled(16);
        let width_sb = range_profile_single_block(&est, BlockIndex::CENTER, &sys, opts).mainlobe_width_m();
        let eq = equalize_full_band(&est, 0.0, 0.0, &sys)?;
        let width_fb = range_profile_full_band(&eq, &sys, opts).mainlobe_width_m();
        table.push(vec![
            m.into(),
            sb.into(),
            fb.into(),
            (sb / res_1).into(),
            (m as f64).powf(0.25).into(),
            single_block_max_range(&sys).into(),
            full_band_max_range(&sys).into(),
            width_sb.into(),
            width_fb.into(),
            spec.seed.into(),
        ]);
    }
    Ok(table)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// ISL of the equalized full-band profile of a boresight target against the
/// angle error `θ_ε`. Every `θ_ε` reuses the same noisy estimate per trial, so
/// the degradation columns are paired differences.
fn isl_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = Table::new(&[
        "M",
        "snr_db",
        "theta_err_deg",
        "isl_db",
        "isl_std_db",
        "isl_degradation_db",
        "isl_degradation_se_db",
        "excluded_blocks",
        "trials",
        "seed",
    ]);
    let n_m = spec.antennas.len() as u64;
    for (i_snr, &snr_db) in spec.snr_db.iter().enumerate() {
        for (i_m, &m) in spec.antennas.iter().enumerate() {
            let sys = system(spec, m)?;
            let range = SWEEP_TARGET_BINS * full_band_resolution(&sys);
            let base = (i_snr as u64 * n_m + i_m as u64) << 32;
            // Per trial: (ISL per θ_ε, excluded block count per θ_ε).
            let per_trial: Vec<Vec<(f64, usize)>> = (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<Vec<(f64, usize)>> {
                    let mut r = rng::stream(spec.seed, base + t);
                    let phase = r.random_range(0.0..2.0 * PI);
                    let target = Scatterer::target(0.0, range, Complex64::from_polar(1.0, phase))?;
                    let est = sense(0.0, &LinkChannel::new(&[target], &sys), noise_variance(snr_db), &mut r, &sys)?;
                    spec.theta_err_deg
                        .iter()
                        .map(|deg| {
                            let (eq, excluded) = equalize_full_band_guarded(&est, deg.to_radians(), 0.0, &sys);
                            Ok((isl(&range_profile_full_band(&eq, &sys, ProfileOptions::default()))?, excluded.len()))
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            let zero = spec.theta_err_deg.iter().position(|d| *d == 0.0);
            for (j, &deg) in spec.theta_err_deg.iter().enumerate() {
                let values: Vec<f64> = per_trial.iter().map(|v| v[j].0).collect();
                let (mean, std) = mean_std(&values);
                let (deg_mean, deg_se) = match zero {
                    Some(z) => {
                        let diffs: Vec<f64> = per_trial.iter().map(|v| v[j].0 - v[z].0).collect();
                        let (dm, ds) = mean_std(&diffs);
                        (dm, ds / (diffs.len() as f64).sqrt())
                    }
                    None => (f64::NAN, f64::NAN),
                };
                table.push(vec![
                    m.into(),
                    snr_db.into(),
                    deg.into(),
                    mean.into(),
                    std.into(),
                    deg_mean.into(),
                    deg_se.into(),
                    per_trial[0][j].1.into(),
                    spec.trials.into(),
                    spec.seed.into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Peak-shift range error of a boresight target against `θ_ε`, with the
/// first-order prediction and its least-squares refinement.
///
/// Noiseless unless the scene sets `noise_db`; with noise the error is averaged
/// over the trials.
fn range_error_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let noise = spec.scene.as_ref().map_or(0.0, SceneSpec::noise_variance);
    let trials = if noise > 0.0 { spec.trials } else { 1 };
    let mut table = Table::new(&[
        "M",
        "theta_err_deg",
        "range_err_m",
        "predicted_range_err_m",
        "predicted_refined_range_err_m",
        "ties",
        "trials",
        "seed",
    ]);
    let mut jobs = Vec::new();
    for (i_m, &m) in spec.antennas.iter().enumerate() {
        for &deg in &spec.theta_err_deg {
            jobs.push((i_m, m, deg));
        }
    }
    let rows: Vec<Vec<Value>> = jobs
        .par_iter()
        .map(|&(i_m, m, deg)| -> Result<Vec<Value>> {
            let sys = system(spec, m)?;
            let target = Scatterer::target(0.0, SWEEP_TARGET_BINS * full_band_resolution(&sys), Complex64::new(1.0, 0.0))?;
            let err = deg.to_radians();
            let mut sum = 0.0;
            let mut ties = 0usize;
            for t in 0..trials as u64 {
                // Trials at different θ_ε share noise draws.
                let seed = rng::stream(spec.seed, (i_m as u64) << 32 | t).random::<u64>();
                let meas = measure_range_error(&target, noise, err, &sys, seed)?;
                sum += meas.error_m;
                ties += meas.tie as usize;
            }
            Ok(vec![
                m.into(),
                deg.into(),
                (sum / trials as f64).into(),
                predict_range_error(err, &sys).into(),
                predict_range_error_refined(err, &sys).into(),
                ties.into(),
                trials.into(),
                spec.seed.into(),
            ])
        })
        .collect::<Result<_>>()?;
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

/// Default two-target scene: 30 m and 33 m, the second target 5° off boresight.
pub fn default_two_target_scene() -> SceneSpec {
    SceneSpec { noise_db: None, scatterer: vec![ScattererSpec::new(0.0, 30.0), ScattererSpec::new(5.0, 33.0)] }
}

/// Per-block and full-band range profiles of a multi-target scene. The array is
/// steered at the first target and the full-band profile is equalized with its
/// angle; `full_band_target1_only` repeats that without the other targets.
fn two_target(spec: &ExperimentSpec) -> Result<Table> {
    let scene = spec.scene.clone().unwrap_or_else(default_two_target_scene);
    let targets: Vec<Scatterer> = scene.scatterer.iter().map(ScattererSpec::to_target).collect::<fda_core::Result<_>>()?;
    let Some(first) = targets.first().copied() else {
        bail!("the two-target demo needs at least one scatterer");
    };
    let mut table = Table::new(&["M", "profile", "bin", "range_m", "mag_db", "seed"]);
    let opts = ProfileOptions::oversampled(DEMO_OVERSAMPLE);
    for (i_m, &m) in spec.antennas.iter().enumerate() {
        let sys = system(spec, m)?;
        let estimate = |scatterers: &[Scatterer]| {
            let mut r = rng::stream(spec.seed, i_m as u64);
            let tx = steered_spectrum(&mut r, first.theta, &sys);
            let rx = propagate_with(&tx, &LinkChannel::new(scatterers, &sys), scene.noise_variance(), &mut r);
            estimate_channel_zf(&rx.r, tx.symbols())
        };
        let est = estimate(&targets)?;
        let mut profiles: Vec<(String, RangeProfile)> = sys
            .block_indices()
            .map(|b| (format!("block_{}", b.value()), range_profile_single_block(&est, b, &sys, opts)))
            .collect();
        let eq = equalize_full_band_guarded(&est, first.theta, first.theta, &sys).0;
        profiles.push(("full_band".into(), range_profile_full_band(&eq, &sys, opts)));
        let eq_one = equalize_full_band_guarded(&estimate(&[first])?, first.theta, first.theta, &sys).0;
        profiles.push(("full_band_target1_only".into(), range_profile_full_band(&eq_one, &sys, opts)));
        for (name, p) in &profiles {
            for (i, db) in p.magnitude_db().into_iter().enumerate() {
                table.push(vec![
                    m.into(),
                    name.as_str().into(),
                    i.into(),
                    p.range_at(i as f64).into(),
                    db.max(DB_FLOOR).into(),
                    spec.seed.into(),
                ]);
            }
        }
    }
    Ok(table)
}
