//! The `fda-ofdm` binary: flags, config files, output location and the CSV contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fda_cli::table::ExperimentResult;

fn fda_ofdm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fda-ofdm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FDA_OUT_DIR")
        .output()
        .unwrap()
}

fn columns(name: &str) -> &'static [&'static str] {
    match name {
        "beampattern" => &["M", "snr_db", "b_f", "theta_deg", "gain_db", "gain_mc_db", "trials", "seed"],
        "capacity" => &[
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
        ],
        "sensing-tradeoff" => &[
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
        ],
        "isl-sweep" => &[
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
        ],
        "range-error-sweep" => &[
            "M",
            "theta_err_deg",
            "range_err_m",
            "predicted_range_err_m",
            "predicted_refined_range_err_m",
            "ties",
            "trials",
            "seed",
        ],
        "two-target" => &["M", "profile", "bin", "range_m", "mag_db", "seed"],
        _ => unreachable!(),
    }
}

#[test]
fn every_subcommand_writes_its_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 6] = [
        ("beampattern", &["--angles", "-30,0,30", "--trials", "2"]),
        ("capacity", &["--antennas", "2,4", "--trials", "3"]),
        ("sensing-tradeoff", &["--antennas", "1,2"]),
        ("isl-sweep", &["--antennas", "2", "--trials", "3", "--theta-err-deg", "-1,0,1"]),
        ("range-error-sweep", &["--antennas", "2", "--theta-err-deg", "0,2"]),
        ("two-target", &[]),
    ];
    for (name, extra) in runs {
        let mut args = vec![name, "--seed", "11"];
        args.extend_from_slice(extra);
        let out = fda_ofdm(&args, dir.path());
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let path = dir.path().join(format!("{name}.csv"));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), path.display().to_string());
        let res = ExperimentResult::load(&path).unwrap();
        assert_eq!(res.table.columns, columns(name), "{name}");
        assert!(!res.table.rows.is_empty());
        assert_eq!(res.provenance.seed, 11);
        assert_eq!(res.provenance.experiment, name);
        assert!(res.table.floats("seed").unwrap().iter().all(|s| *s == 11.0), "{name}: every row carries the seed");
    }
}

#[test]
fn provenance_header_reconstructs_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = fda_ofdm(&["range-error-sweep", "--antennas", "2,4", "--theta-err-deg", "-1,1", "--seed", "5"], dir.path());
    assert!(out.status.success());
    let path = dir.path().join("range-error-sweep.csv");
    let first = ExperimentResult::load(&path).unwrap();
    let again = fda_cli::experiments::run(&first.provenance.spec).unwrap();
    assert_eq!(again.to_csv(), fs::read_to_string(&path).unwrap());

    // Editing the recorded spec without updating the hash is detected.
    let text = fs::read_to_string(&path).unwrap().replacen("\"antennas\":[2,4]", "\"antennas\":[2,8]", 1);
    fs::write(&path, text).unwrap();
    let err = format!("{:#}", ExperimentResult::load(&path).unwrap_err());
    assert!(err.contains("config hash mismatch"), "{err}");
}

#[test]
fn config_file_sets_system_and_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.toml");
    fs::write(
        &cfg,
        "[system]\nbandwidth_hz = 200e6\n\n[[scatterer]]\nangle_deg = 0.0\ndistance_m = 15.0\n\n[[scatterer]]\nangle_deg = 0.0\ndistance_m = 16.5\n",
    )
    .unwrap();
    let out = fda_ofdm(&["two-target", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = ExperimentResult::load(&dir.path().join("two-target.csv")).unwrap();
    assert_eq!(res.provenance.spec.config.bandwidth_hz, 200e6);
    let scene = res.provenance.spec.scene.unwrap();
    assert_eq!(scene.scatterer[1].distance_m, 16.5);
    // Half the bin size at twice the bandwidth.
    let ranges = res.table.floats("range_m").unwrap();
    let step = ranges[1] - ranges[0];
    assert!((step * 4.0 - 299_792_458.0 / 4e8 * 3.0).abs() < 1e-9, "single-block bin at M = 2: {step}");
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fda-ofdm"))
        .args(["sensing-tradeoff", "--antennas", "1"])
        .env("FDA_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("sensing-tradeoff.csv").exists());
}

#[test]
fn contract_violations_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[system]\nantennas = 3\nsubcarriers = 100\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["isl-sweep", "--trials", "0"],
        &["capacity", "--antennas", "0"],
        &["beampattern", "--config", "/nonexistent/cfg.toml"],
        &["capacity", "--config", bad_cfg.to_str().unwrap()],
    ];
    for args in cases {
        let out = fda_ofdm(args, dir.path());
        assert!(!out.status.success(), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert_eq!(stderr.trim_end().lines().count(), 1, "{args:?}: {stderr}");
        assert!(stderr.starts_with("error: "), "{stderr}");
    }
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| e.unwrap().path().extension().unwrap() != "csv"));
}

#[test]
fn thread_count_does_not_change_output() {
    let bodies: Vec<String> = ["1", "4"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let out = fda_ofdm(&["capacity", "--antennas", "2,4", "--trials", "40", "--threads", threads], dir.path());
            assert!(out.status.success());
            fs::read_to_string(dir.path().join("capacity.csv")).unwrap()
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
}
