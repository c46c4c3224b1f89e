use std::fmt::Write as _;
use std::path::Path;

use super::evaluate::EvaluationResult;
use super::runtime::RuntimeStats;
use super::{write_file, HarnessError};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: String,
    pub kind: String,
    pub evaluation: EvaluationResult,
}

pub fn report_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,kind,loitering_events,normal_tracks,alarms,tp,fp,fn\n");
    for r in results {
        let e = &r.evaluation;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.name, r.kind, e.loitering_events, e.normal_labels, e.alarms, e.tp, e.fp, e.fn_
        )
        .unwrap();
    }
    out
}

/// Plain-text TP/FP table: ground truth against this run, then one line per scenario.
pub fn summary_text(results: &[ScenarioResult], threshold: Option<f64>, window: f64) -> String {
    let events: usize = results.iter().map(|r| r.evaluation.loitering_events).sum();
    let tp: usize = results.iter().map(|r| r.evaluation.tp).sum();
    let fp: usize = results.iter().map(|r| r.evaluation.fp).sum();
    let fn_: usize = results.iter().map(|r| r.evaluation.fn_).sum();
    let threshold = threshold.map_or_else(|| "per camera policy".to_string(), |t| format!("{t}%"));
    let column = format!("Suite ({} scenarios)", results.len());
    let width = column.len().max(12);

    let mut s = String::new();
    writeln!(s, "Loitering detection").unwrap();
    writeln!(
        s,
        "threshold: {threshold}; an alarm matches an event up to {window} s after it ends"
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<16}| {:^width$}", "Detection Model", column).unwrap();
    writeln!(
        s,
        "{:<16}| {:^width$}",
        "",
        format!("{:>5} {:>5}", "TP", "FP")
    )
    .unwrap();
    writeln!(s, "{}+{}", "-".repeat(16), "-".repeat(width + 1)).unwrap();
    writeln!(
        s,
        "{:<16}| {:^width$}",
        "Ground Truth",
        format!("{events:>5} {:>5}", 0)
    )
    .unwrap();
    writeln!(
        s,
        "{:<16}| {:^width$}",
        "Fuzzy scorer",
        format!("{tp:>5} {fp:>5}")
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "missed events (FN): {fn_}").unwrap();
    writeln!(s).unwrap();

    let name_w = results
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let kind_w = results
        .iter()
        .map(|r| r.kind.len())
        .max()
        .unwrap_or(4)
        .max(4);
    writeln!(
        s,
        "{:<name_w$}  {:<kind_w$}  {:>6}  {:>6}  {:>3}  {:>3}  {:>3}",
        "scenario", "kind", "events", "alarms", "TP", "FP", "FN"
    )
    .unwrap();
    for r in results {
        let e = &r.evaluation;
        writeln!(
            s,
            "{:<name_w$}  {:<kind_w$}  {:>6}  {:>6}  {:>3}  {:>3}  {:>3}",
            r.name, r.kind, e.loitering_events, e.alarms, e.tp, e.fp, e.fn_
        )
        .unwrap();
    }
    s
}

pub fn runtime_text(stats: &RuntimeStats) -> String {
    let opt = |v: Option<f64>, unit: &str| {
        v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}{unit}"))
    };
    let mut s = String::new();
    writeln!(s, "records decided:      {}", stats.records).unwrap();
    writeln!(s, "decision time mean:   {:.1} us", stats.decision_mean_us).unwrap();
    writeln!(s, "decision time p95:    {:.1} us", stats.decision_p95_us).unwrap();
    writeln!(s, "decision time max:    {:.1} us", stats.decision_max_us).unwrap();
    writeln!(s, "wall time:            {:.2} s", stats.wall_seconds).unwrap();
    writeln!(s, "process cpu:          {}", opt(stats.cpu_percent, "%")).unwrap();
    writeln!(s, "peak memory:          {}", opt(stats.peak_rss_mb, " MB")).unwrap();
    writeln!(s, "reference deployment: 68.3% cpu on one thread, 96 MB").unwrap();
    s
}

/// Writes `report.csv` and `summary.txt`, plus `runtime.txt` when stats are given.
///
/// The first two depend only on the results, so identical runs give identical files.
pub fn emit_report(
    results: &[ScenarioResult],
    threshold: Option<f64>,
    window: f64,
    runtime: Option<&RuntimeStats>,
    dir: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    write_file(&dir.join("report.csv"), report_csv(results))?;
    write_file(
        &dir.join("summary.txt"),
        summary_text(results, threshold, window),
    )?;
    if let Some(stats) = runtime {
        write_file(&dir.join("runtime.txt"), runtime_text(stats))?;
    }
    Ok(())
}
