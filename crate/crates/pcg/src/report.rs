//! CSV and plain-text renderings of evaluation reports, segment statistics
//! and training histories.

use std::fmt::Write as _;
use std::path::Path;

use pcg_core::metrics::{EvalReport, Metrics};
use pcg_core::nn::History;
use pcg_core::synth::SegmentStats;

/// `recording_id` of the per-method mean rows.
pub const MEAN_ROW: &str = "MEAN";

fn fmt_snr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn metric_fields(m: &Metrics) -> [String; 4] {
    [
        m.rmse_paper.to_string(),
        m.rmse_standard.to_string(),
        m.med_abs_err.to_string(),
        fmt_snr(m.snr_db),
    ]
}

/// Per-recording rows followed by one `MEAN` row per method.
pub fn write_report_csv(report: &EvalReport, path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "recording_id",
        "rmse_paper",
        "rmse_standard",
        "med_abs_err",
        "snr_db",
    ])?;
    for r in &report.rows {
        let [a, b, c, d] = metric_fields(&r.metrics);
        w.write_record([r.method.as_str(), r.recording_id.as_str(), &a, &b, &c, &d])?;
    }
    for (method, m) in report.means() {
        let [a, b, c, d] = metric_fields(&m);
        w.write_record([method.as_str(), MEAN_ROW, &a, &b, &c, &d])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean table with one row per method, in report order.
pub fn report_table(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>14} {:>14} {:>14} {:>12}",
        "method", "mean RMSE", "mean MAE", "rmse_standard", "mean SNR dB"
    );
    for (method, m) in report.means() {
        let _ = writeln!(
            s,
            "{:<10} {:>14.4} {:>14.6} {:>14.6} {:>12}",
            method,
            m.rmse_paper,
            m.med_abs_err,
            m.rmse_standard,
            if m.snr_db.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.3}", m.snr_db)
            }
        );
    }
    s
}

pub fn write_stats_csv(stats: &[SegmentStats], path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "category",
        "count",
        "mean_s",
        "std_s",
        "mode_s",
        "target_mean_s",
        "target_std_s",
    ])?;
    for s in stats {
        let (tm, ts) = s.category.duration_moments();
        w.write_record([
            s.category.label().to_string(),
            s.count.to_string(),
            format!("{:.4}", s.mean_s),
            format!("{:.4}", s.std_s),
            format!("{:.2}", s.mode_s),
            tm.to_string(),
            ts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn stats_table(stats: &[SegmentStats]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>8} {:>8} {:>8} {:>8} {:>12}",
        "category", "count", "mean s", "std s", "mode s", "target mean"
    );
    for st in stats {
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>8.3} {:>8.3} {:>8.2} {:>12.2}",
            st.category.label(),
            st.count,
            st.mean_s,
            st.std_s,
            st.mode_s,
            st.category.duration_moments().0
        );
    }
    s
}

pub fn write_history_csv(history: &History, path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_mse", "val_mse", "improved"])?;
    for e in &history.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_mse.to_string(),
            e.val_mse.to_string(),
            e.improved.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
