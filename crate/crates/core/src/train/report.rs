use std::fmt::Write;

use super::{AblationReport, MetricsReport, TrainHistory, ABLATION_SPATIAL, ABLATION_TEMPORAL};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub window: usize,
    pub metrics: MetricsReport,
}

fn header(provenance: &str) -> String {
    provenance.lines().map(|l| format!("# {l}\n")).collect()
}

fn flags(m: &MetricsReport) -> String {
    let mut f = Vec::new();
    if m.precision_undefined {
        f.push("precision_undefined");
    }
    if m.recall_undefined {
        f.push("recall_undefined");
    }
    if m.f1_undefined {
        f.push("f1_undefined");
    }
    f.join(";")
}

const METRIC_COLUMNS: &str = "model,window,tp,fp,fn,tn,accuracy,precision,recall,f1,flags";

fn metric_fields(m: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
        m.tp,
        m.fp,
        m.fn_,
        m.tn,
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        flags(m)
    )
}

/// CSV with `# `-prefixed provenance lines (command line, seed) above the header.
pub fn metrics_csv(rows: &[ReportRow], provenance: &str) -> String {
    let mut s = header(provenance);
    s.push_str(METRIC_COLUMNS);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.model, r.window, metric_fields(&r.metrics));
    }
    s
}

pub fn metrics_table(rows: &[ReportRow]) -> String {
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut s = format!(
        "{:<width$}  {:>6}  {:>8}  {:>9}  {:>6}  {:>6}\n",
        "model", "window", "accuracy", "precision", "recall", "f1"
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>8.4}  {:>9.4}  {:>6.4}  {:>6.4}{}",
            r.model,
            r.window,
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            if flags(m).is_empty() { String::new() } else { format!("  ({})", flags(m)) }
        );
    }
    s
}

/// One row per cell; failed cells carry the error in the flags column.
pub fn ablation_csv(report: &AblationReport, provenance: &str) -> String {
    let mut s = header(provenance);
    s.push_str(METRIC_COLUMNS);
    s.push('\n');
    for c in &report.cells {
        match &c.result {
            Ok((m, _)) => {
                let _ = writeln!(s, "{},{},{}", c.name(), report.window, metric_fields(m));
            }
            Err(e) => {
                let e = e.replace([',', '\n'], " ");
                let _ = writeln!(s, "{},{},,,,,,,,,failed: {e}", c.name(), report.window);
            }
        }
    }
    s
}

/// F1 grid: spatial encoders down, temporal encoders across.
pub fn ablation_table(report: &AblationReport) -> String {
    let mut s = format!("F1, window {}\n{:<8}", report.window, "");
    for t in ABLATION_TEMPORAL {
        let _ = write!(s, "{:>8}", t.name());
    }
    s.push('\n');
    for sp in ABLATION_SPATIAL {
        let _ = write!(s, "{:<8}", sp.name());
        for t in ABLATION_TEMPORAL {
            let cell = match report.get(sp, t).map(|c| &c.result) {
                Some(Ok((m, _))) => format!("{:.4}", m.f1),
                Some(Err(_)) => "failed".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(s, "{cell:>8}");
        }
        s.push('\n');
    }
    s
}

pub fn loss_csv(history: &TrainHistory, provenance: &str) -> String {
    let mut s = header(provenance);
    s.push_str("epoch,train_loss,val_loss,skipped_batches\n");
    for e in &history.epochs {
        let _ = writeln!(s, "{},{:.6},{:.6},{}", e.epoch, e.train_loss, e.val_loss, e.skipped_batches);
    }
    s
}
