//! CSV output.
//!
//! Floats are written with 9 significant digits; missing values as `NaN`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::metrics::{summary_values, Aggregate, ErrorSummary};
use super::sweep::{DetectorRow, WindRow};
use super::trial::TrialLog;
use super::HarnessError;

pub const TRIAL_COLUMNS: [&str; 24] = [
    "t", "gt_x", "gt_y", "gt_z", "gt_psi", "z_valid", "z_xc", "z_yc", "z_ow", "z_oh", "z_theta", "kf_xc", "kf_yc",
    "kf_ow", "kf_oh", "kf_theta", "e_x", "e_y", "e_theta", "u_vx", "u_vy", "u_psirate", "u_z", "event",
];

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "controller",
    "seed",
    "rmse_x_px",
    "rmse_y_px",
    "rmse_theta_deg",
    "std_x_px",
    "std_y_px",
    "std_theta_deg",
    "land_offset_x_m",
    "land_offset_y_m",
    "land_angle_deg",
    "touchdown_s",
    "success",
];

pub const DETECTOR_COLUMNS: [&str; 8] =
    ["preset", "variable", "raw_avg", "raw_std", "kf_avg", "kf_std", "valid_frames", "frames"];

pub const WIND_COLUMNS: [&str; 6] = ["bias_mps", "seed", "success", "touchdown_s", "land_offset_m", "land_angle_deg"];

/// Formats `v` with 9 significant digits, positional for moderate
/// magnitudes and scientific otherwise.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), fmt_sig)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    let mut file = w.into_inner().map_err(|e| io_err(path, e))?;
    file.flush().map_err(|e| io_err(path, e))
}

pub fn trial_rows(log: &TrialLog) -> Vec<Vec<String>> {
    log.records
        .iter()
        .map(|r| {
            let mut row = vec![
                fmt_sig(r.t),
                fmt_sig(r.truth.x),
                fmt_sig(r.truth.y),
                fmt_sig(r.truth.z),
                fmt_sig(r.truth.psi),
                u8::from(r.z_valid()).to_string(),
            ];
            let z = r.raw.map(|o| o.z.to_array());
            row.extend((0..5).map(|i| opt(z.map(|z| z[i]))));
            let kf = r.kf.map(|k| k.to_array());
            row.extend((0..5).map(|i| opt(kf.map(|k| k[i]))));
            row.extend((0..3).map(|i| opt(r.e.map(|e| e[i]))));
            row.extend(r.cmd.u.iter().map(|v| fmt_sig(*v)));
            row.push(fmt_sig(r.cmd.u_z));
            row.push(r.events.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(";"));
            row
        })
        .collect()
}

pub fn write_trial_csv(log: &TrialLog, path: &Path) -> Result<(), HarnessError> {
    write_rows(path, &TRIAL_COLUMNS, trial_rows(log))
}

/// Per-trial rows, followed by `mean` and `std` rows when an aggregate is
/// given. Aggregate rows leave the seed empty.
pub fn write_summary_csv(
    summaries: &[ErrorSummary],
    aggregate: Option<&Aggregate>,
    path: &Path,
) -> Result<(), HarnessError> {
    let mut rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut row = vec![s.controller.to_string(), s.seed.to_string()];
            let values = summary_values(s);
            row.extend(values[..10].iter().map(|v| fmt_sig(*v)));
            row.push(u8::from(s.success()).to_string());
            row
        })
        .collect();
    if let (Some(a), Some(first)) = (aggregate, summaries.first()) {
        for (label, values) in [("mean", &a.mean), ("std", &a.std)] {
            let mut row = vec![format!("{}:{label}", first.controller), String::new()];
            row.extend(values.iter().map(|v| fmt_sig(*v)));
            rows.push(row);
        }
    }
    write_rows(path, &SUMMARY_COLUMNS, rows)
}

pub fn write_detector_csv(rows: &[DetectorRow], path: &Path) -> Result<(), HarnessError> {
    write_rows(
        path,
        &DETECTOR_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.preset.clone(),
                r.variable.to_string(),
                fmt_sig(r.raw.mean),
                fmt_sig(r.raw.std),
                fmt_sig(r.filtered.mean),
                fmt_sig(r.filtered.std),
                r.valid_frames.to_string(),
                r.frames.to_string(),
            ]
        }),
    )
}

pub fn write_wind_csv(rows: &[WindRow], path: &Path) -> Result<(), HarnessError> {
    write_rows(
        path,
        &WIND_COLUMNS,
        rows.iter().map(|r| {
            vec![
                fmt_sig(r.bias),
                r.seed.to_string(),
                u8::from(r.touchdown_s.is_some()).to_string(),
                opt(r.touchdown_s),
                fmt_sig(r.land_offset_m),
                fmt_sig(r.land_angle_deg),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(3.5), "3.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(-1234.56789012), "-1234.56789");
        assert_eq!(fmt_sig(9.9999999999), "10");
        assert_eq!(fmt_sig(1e-7), "1e-7");
        assert_eq!(fmt_sig(2.5e20), "2.5e20");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
        assert_eq!(fmt_sig(120.0), "120");
    }

    proptest! {
        #[test]
        fn reparse_within_tolerance(v in prop::num::f64::NORMAL) {
            let back: f64 = fmt_sig(v).parse().unwrap();
            prop_assert!(((back - v) / v).abs() <= 5e-9);
        }
    }

    #[test]
    fn empty_summary_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&[], None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", SUMMARY_COLUMNS.join(",")));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let path = Path::new("/nonexistent-dir/x.csv");
        match write_summary_csv(&[], None, path) {
            Err(HarnessError::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("unexpected {other:?}"),
        }
    }
}
