//! Receiver behaviour across SNR and beam mismatch.

use fda_core::channel::{array_factor, LinkChannel, Scatterer};
use fda_core::commrx::{combine_single_block, Combined, CommReport};
use fda_core::config::{BlockIndex, FdaSystem, SystemConfig};
use fda_core::txchain::steered_spectrum;
use fda_core::{rng, Complex64};

fn single_block(s: &FdaSystem, theta_tx: f64, theta_rt: f64, snr_db: f64, symbols: usize) -> CommReport {
    let sc = Scatterer::new(theta_rt, 100.0, Complex64::new(1.0, 0.0)).unwrap();
    let link = LinkChannel::new(&[sc], s);
    let noise = 10f64.powf(-snr_db / 10.0);
    let mut acc: Option<Combined> = None;
    let trials = symbols.div_ceil(s.block_len());
    for t in 0..trials as u64 {
        let mut r = rng::stream(77, t);
        let spec = steered_spectrum(&mut r, theta_tx, s);
        let rx = fda_core::channel::propagate_with(&spec, &link, noise, &mut r);
        let c = combine_single_block(&rx, spec.symbols(), &sc, s).unwrap();
        match acc.as_mut() {
            Some(a) => a.extend(c),
            None => acc = Some(c),
        }
    }
    acc.unwrap().report()
}

#[test]
fn ser_falls_with_snr_and_vanishes_at_high_snr() {
    let s = FdaSystem::new(SystemConfig::default().with_antennas(2)).unwrap();
    let reports: Vec<CommReport> = [-6.0, -3.0, 0.0, 3.0, 6.0, 17.0]
        .iter()
        .map(|snr| single_block(&s, 0.0, 0.0, *snr, 100_000))
        .collect();
    for w in reports.windows(2) {
        assert!(w[1].post_snr_db > w[0].post_snr_db);
        // Allow three binomial standard deviations.
        let sd = (w[0].ser * (1.0 - w[0].ser) / w[0].symbols as f64).sqrt();
        assert!(w[1].ser <= w[0].ser + 3.0 * sd, "{:?} then {:?}", w[0], w[1]);
    }
    let last = reports.last().unwrap();
    assert!(last.post_snr_db >= 20.0);
    assert_eq!(last.ser, 0.0);
    assert!(last.symbols >= 100_000);
}

#[test]
fn mismatch_loss_follows_array_factor() {
    let s = FdaSystem::new(SystemConfig::default().with_antennas(4)).unwrap();
    let theta_tx = 0.1;
    for theta_rt in [0.1, 0.2, 0.3, -0.1] {
        let rep = single_block(&s, theta_tx, theta_rt, 10.0, 100_000);
        let af2 = array_factor(BlockIndex::CENTER, theta_rt, theta_tx, &s).norm_sqr();
        assert!((rep.gain_db - 10.0 * af2.log10()).abs() < 0.2, "θ_RT = {theta_rt}: {rep:?} vs {af2}");
    }
}
