use land_sim::harness::export::{fmt_sig, trial_rows, write_summary_csv, write_trial_csv, TRIAL_COLUMNS};
use land_sim::harness::metrics::aggregate;
use land_sim::harness::{run_experiment, run_trial, summarize_errors, ControllerKind, Event, TrialConfig};

fn zero_noise_from(x: f64, y: f64) -> TrialConfig {
    let mut cfg = TrialConfig { controller: ControllerKind::Pd, ..TrialConfig::default() };
    cfg.noise.preset = "zero".into();
    cfg.initial.x = x;
    cfg.initial.y = y;
    cfg.initial.z = 3.5;
    cfg
}

#[test]
fn zero_noise_pd_lands_on_pad() {
    let log = run_trial(&zero_noise_from(1.0, 1.0)).unwrap();
    let td = log.touchdown.expect("touchdown");
    assert!(td.landed_flag);
    let s = summarize_errors(&log).unwrap();
    assert!(s.planar_offset() < 0.05, "offset {}", s.planar_offset());
    let last = log.records.last().unwrap();
    assert_eq!(last.events, vec![Event::Touchdown]);
    assert_eq!(log.records.iter().filter(|r| r.events.contains(&Event::DescentStart)).count(), 1);
}

#[test]
fn every_controller_lands_without_noise() {
    for kind in [ControllerKind::P, ControllerKind::Pd, ControllerKind::Pid] {
        let cfg = TrialConfig { controller: kind, ..zero_noise_from(0.8, 0.6) };
        let log = run_trial(&cfg).unwrap();
        assert!(log.touchdown.is_some(), "{kind}");
    }
}

#[test]
fn dropout_trial_times_out() {
    let mut cfg = TrialConfig { max_duration: 10.0, ..TrialConfig::default() };
    cfg.noise.dropout_rate = Some(1.0);
    let log = run_trial(&cfg).unwrap();
    assert!(log.timed_out());
    assert!(log.records.iter().all(|r| !r.z_valid() && r.cmd.u_z == cfg.initial.z));
    let s = summarize_errors(&log).unwrap();
    assert!(!s.success() && s.samples == 0);
}

#[test]
fn single_trial_experiment_matches_trial() {
    let cfg = TrialConfig { seed: 9, ..TrialConfig::default() };
    let exp = run_experiment(&cfg, 1, &[9]).unwrap();
    let direct = summarize_errors(&run_trial(&cfg).unwrap()).unwrap();
    assert_eq!(exp.summaries, vec![direct.clone()]);
    assert_eq!(exp.success_rate, 1.0);
    assert_eq!(exp.mean_touchdown_s(), direct.touchdown_s.unwrap());
}

#[test]
fn experiment_is_reproducible_and_ordered() {
    let cfg = TrialConfig::default();
    let a = run_experiment(&cfg, 3, &[12, 3, 7]).unwrap();
    let b = run_experiment(&cfg, 3, &[12, 3, 7]).unwrap();
    assert_eq!(a.summaries, b.summaries);
    assert_eq!(a.aggregate, b.aggregate);
    assert_eq!(a.summaries.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![12, 3, 7]);
}

#[test]
fn trial_csv_round_trip() {
    let cfg = TrialConfig::default();
    let mut log = run_trial(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    write_trial_csv(&log, &path).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), TRIAL_COLUMNS);
    let expected = trial_rows(&log);
    let mut n = 0;
    for (row, want) in reader.records().zip(&expected) {
        let row = row.unwrap();
        assert_eq!(row.len(), TRIAL_COLUMNS.len());
        n += 1;
        for (got, want) in row.iter().zip(want) {
            assert_eq!(got, want);
        }
    }
    assert_eq!(n, log.records.len());

    // Values survive the text round trip to the 9-digit precision.
    let first = &log.records[0];
    let row: Vec<f64> = expected[0][..5].iter().map(|v| v.parse().unwrap()).collect();
    for (got, want) in row.iter().zip([first.t, first.truth.x, first.truth.y, first.truth.z, first.truth.psi]) {
        assert!((got - want).abs() <= 5e-9 * want.abs().max(1e-300), "{got} vs {want}");
    }

    log.records.truncate(1);
    write_trial_csv(&log, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn summary_csv_has_aggregate_rows() {
    let exp = run_experiment(&TrialConfig::default(), 2, &[1, 2]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary_csv(&exp.summaries, aggregate(&exp.summaries).as_ref(), &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][0], "pd");
    assert_eq!(&rows[2][0], "pd:mean");
    assert_eq!(&rows[3][0], "pd:std");
    let t: Vec<f64> = rows[..2].iter().map(|r| r[11].parse().unwrap()).collect();
    let mean: f64 = rows[2][11].parse().unwrap();
    assert!((mean - (t[0] + t[1]) / 2.0).abs() < 1e-8);
    assert_eq!(&rows[2][11], fmt_sig(exp.aggregate.mean[9]));
}
