use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use isafe::context::{ContextConfig, DecisionMaker, MemoryDecisionLog, ThresholdPolicy};
use isafe::fuzzy::{validate_config, FuzzyConfig, FuzzyEngine, MemoryErrorLog};
use isafe::harness::{
    default_suite, emit_report, evaluate, generate_scenario, read_timeline, read_track_hints,
    replay, runtime_text, summary_text, timeline_csv, track_hints_csv, HarnessError, ReplayOptions,
    ReplayOutput, RuntimeSnapshot, RuntimeStats, Scenario, ScenarioKind, ScenarioParams,
    ScenarioResult, DEFAULT_MATCH_WINDOW, SUITE_EPOCH,
};
use isafe::transport::{
    latency_csv, loopback_stream, synthetic_records, LatencyStats, Mode, TransportConfig,
};

#[derive(Parser)]
#[command(
    name = "isafe",
    version,
    about = "Fuzzy loitering detection: scenario replay, evaluation and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled scenario (or the 12-scenario suite) to a directory.
    Generate(GenerateArgs),
    /// Run scenarios through tracking, optional transport, context and scoring.
    Replay(ReplayArgs),
    /// Score replay timelines against scenario labels and print a TP/FP table.
    Evaluate(EvaluateArgs),
    /// Evaluate and write report.csv, summary.txt and runtime.txt.
    Report(ReportArgs),
    /// Check fuzzy, context and transport configuration files.
    ValidateConfig(ValidateArgs),
    /// Measure loopback transport latency for every confidentiality mode.
    BenchTransport(BenchTransportArgs),
    /// Measure fog decision time over synthetic feature records.
    BenchDecision(BenchDecisionArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Fuzzy configuration JSON; the shipped default when omitted.
    #[arg(long)]
    fuzzy_config: Option<PathBuf>,
    /// Camera context JSON; each scenario's own camera when omitted.
    #[arg(long)]
    context: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind, required_unless_present = "suite")]
    kind: Option<ScenarioKind>,
    /// Generate the fixed evaluation suite instead of one scenario.
    #[arg(long, conflicts_with = "kind")]
    suite: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scenario parameters as JSON; flags below override single fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    hour: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    people: Option<usize>,
    #[arg(long)]
    reversals: Option<usize>,
    #[arg(long)]
    stops: Option<usize>,
    #[arg(long)]
    turns: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// A scenario directory, or a directory of them.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Frames per second; 0 replays as fast as possible.
    #[arg(long, default_value_t = 5.0)]
    fps: f64,
    /// Stream records over loopback TCP in this mode.
    #[arg(long, value_parser = parse_mode)]
    transport: Option<Mode>,
    /// Transport config JSON (keys, window, buffering); implies loopback transport.
    #[arg(long)]
    transport_config: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Replay output directory matching `--scenario`.
    #[arg(long)]
    run: PathBuf,
    /// Recompute alarms as score >= threshold instead of using the logged alarms.
    #[arg(long)]
    threshold: Option<f64>,
    /// Seconds after an event during which an alarm still counts for it.
    #[arg(long, default_value_t = DEFAULT_MATCH_WINDOW)]
    window: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Replay output to evaluate; without it the scenarios are replayed in-process.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MATCH_WINDOW)]
    window: f64,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    fuzzy_config: Option<PathBuf>,
    #[arg(long)]
    context: Option<PathBuf>,
    #[arg(long)]
    transport_config: Option<PathBuf>,
}

#[derive(Args)]
struct BenchTransportArgs {
    /// Records per payload class and mode.
    #[arg(long, default_value_t = 1000)]
    frames: usize,
    /// One mode only; all three by default.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Directory for per-run latency CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchDecisionArgs {
    #[arg(long, default_value_t = 10_000)]
    records: usize,
    #[arg(long, default_value_t = 2)]
    objects: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    fuzzy_config: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::ValidateConfig(a) => validate_cmd(a),
        Command::BenchTransport(a) => bench_transport(a),
        Command::BenchDecision(a) => bench_decision(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isafe: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn harness_err(e: HarnessError) -> anyhow::Error {
    match e {
        HarnessError::Stage { .. } => anyhow!(e),
        other => anyhow!("{} stage: {other}", other.stage_name()),
    }
}

fn load_engine(path: Option<&Path>) -> Result<Arc<FuzzyEngine>> {
    let config = match path {
        Some(p) => {
            FuzzyConfig::load(p).map_err(|e| anyhow!("config stage: {}: {e}", p.display()))?
        }
        None => FuzzyConfig::default_config(),
    };
    Ok(Arc::new(
        FuzzyEngine::new(config).map_err(|e| anyhow!("config stage: fuzzy config: {e}"))?,
    ))
}

fn load_context(path: Option<&Path>) -> Result<Option<ContextConfig>> {
    path.map(|p| ContextConfig::load(p).map_err(|e| anyhow!("config stage: {}: {e}", p.display())))
        .transpose()
}

fn load_transport(path: Option<&Path>) -> Result<Option<TransportConfig>> {
    path.map(|p| {
        TransportConfig::load(p).map_err(|e| anyhow!("config stage: {}: {e}", p.display()))
    })
    .transpose()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("report stage: creating {}", parent.display()))?;
    }
    std::fs::write(path, contents)
        .with_context(|| format!("report stage: writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    if a.suite {
        let suite = default_suite(a.seed).map_err(harness_err)?;
        for s in &suite {
            s.save(a.out.join(&s.name)).map_err(harness_err)?;
        }
        println!("wrote {} scenarios to {}", suite.len(), a.out.display());
        return Ok(());
    }
    let kind = a.kind.expect("clap requires --kind without --suite");
    let mut p = match &a.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("generate stage: {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("generate stage: {}", path.display()))?
        }
        None => ScenarioParams::defaults(kind),
    };
    p.start_hour = a.hour.unwrap_or(p.start_hour);
    p.duration = a.duration.unwrap_or(p.duration);
    p.people = a.people.unwrap_or(p.people);
    p.reversals = a.reversals.unwrap_or(p.reversals);
    p.stops = a.stops.unwrap_or(p.stops);
    p.turns = a.turns.unwrap_or(p.turns);
    p.dropout = a.dropout.unwrap_or(p.dropout);
    let s = generate_scenario(kind, &p, a.seed).map_err(harness_err)?;
    s.save(&a.out).map_err(harness_err)?;
    println!(
        "{}: {} rows, {} labels -> {}",
        s.name,
        s.detections.len(),
        s.labels.len(),
        a.out.display()
    );
    Ok(())
}

/// A single scenario directory, or every scenario directory directly inside it, by name.
fn scenario_dirs(root: &Path) -> Result<Vec<(Option<String>, PathBuf)>> {
    if root.join("scenario.json").is_file() {
        return Ok(vec![(None, root.to_path_buf())]);
    }
    let entries =
        std::fs::read_dir(root).with_context(|| format!("dataset stage: {}", root.display()))?;
    let mut dirs: Vec<(Option<String>, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("scenario.json").is_file())
        .map(|p| (p.file_name().map(|n| n.to_string_lossy().into_owned()), p))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!(
            "dataset stage: no scenario.json in {} or its subdirectories",
            root.display()
        );
    }
    Ok(dirs)
}

fn load_scenarios(root: &Path) -> Result<Vec<(Option<String>, Scenario)>> {
    scenario_dirs(root)?
        .into_iter()
        .map(|(name, dir)| Ok((name, Scenario::load(dir).map_err(harness_err)?)))
        .collect()
}

fn run_dir(root: &Path, name: &Option<String>) -> PathBuf {
    name.as_ref()
        .map_or_else(|| root.to_path_buf(), |n| root.join(n))
}

fn replay_cmd(a: ReplayArgs) -> Result<()> {
    if !(a.fps.is_finite() && a.fps >= 0.0) {
        bail!("replay stage: fps must be a non-negative number");
    }
    let engine = load_engine(a.engine.fuzzy_config.as_deref())?;
    let context = load_context(a.engine.context.as_deref())?;
    let transport = match (load_transport(a.transport_config.as_deref())?, a.transport) {
        (Some(mut cfg), mode) => {
            cfg.mode = mode.unwrap_or(cfg.mode);
            cfg.validate()
                .map_err(|e| anyhow!("config stage: transport: {e}"))?;
            Some(cfg)
        }
        (None, Some(mode)) => Some(TransportConfig::demo(mode)),
        (None, None) => None,
    };
    let options = ReplayOptions {
        fps: a.fps,
        transport,
        context,
        ..ReplayOptions::default()
    };
    let started = RuntimeSnapshot::now();
    let mut all_us = Vec::new();
    for (name, scenario) in load_scenarios(&a.scenario)? {
        let out = replay(&scenario, engine.clone(), &options).map_err(harness_err)?;
        let dir = run_dir(&a.out, &name);
        save_run(&dir, &out)?;
        let alarms = out.timeline.iter().filter(|r| r.alarm).count();
        println!(
            "{}: {} frames, {} scores, {} alarms -> {}",
            out.scenario,
            out.frames,
            out.timeline.len(),
            alarms,
            dir.display()
        );
        all_us.extend_from_slice(&out.decision_us);
    }
    let stats = RuntimeStats::measure(&all_us, &started);
    print!("{}", runtime_text(&stats));
    Ok(())
}

fn save_run(dir: &Path, out: &ReplayOutput) -> Result<()> {
    write(&dir.join("timeline.csv"), timeline_csv(&out.timeline))?;
    write(&dir.join("tracks.csv"), track_hints_csv(&out.track_hints))?;
    write(&dir.join("decisions.csv"), &out.decisions)?;
    let errors: String = out.errors.iter().map(|l| format!("{l}\n")).collect();
    write(&dir.join("errors.log"), errors)?;
    if !out.latency.is_empty() {
        write(&dir.join("latency.csv"), latency_csv(&out.latency))?;
    }
    Ok(())
}

fn check_scoring(threshold: Option<f64>, window: f64) -> Result<()> {
    if let Some(t) = threshold {
        if !(0.0..=100.0).contains(&t) {
            bail!("evaluate stage: threshold {t} outside [0, 100]");
        }
    }
    if !(window.is_finite() && window >= 0.0) {
        bail!("evaluate stage: window must be a non-negative number of seconds");
    }
    Ok(())
}

fn score_runs(
    scenarios: &Path,
    runs: &Path,
    threshold: Option<f64>,
    window: f64,
) -> Result<Vec<ScenarioResult>> {
    load_scenarios(scenarios)?
        .into_iter()
        .map(|(name, s)| {
            let dir = run_dir(runs, &name);
            let read = |f: &str| {
                let path = dir.join(f);
                std::fs::read_to_string(&path)
                    .with_context(|| format!("evaluate stage: {}", path.display()))
                    .map(|text| (text, path.display().to_string()))
            };
            let (text, origin) = read("timeline.csv")?;
            let timeline = read_timeline(&text, &origin).map_err(harness_err)?;
            let (text, origin) = read("tracks.csv")?;
            let hints = read_track_hints(&text, &origin).map_err(harness_err)?;
            Ok(ScenarioResult {
                name: s.name.clone(),
                kind: s.kind.to_string(),
                evaluation: evaluate(&timeline, &hints, &s.labels, threshold, window),
            })
        })
        .collect()
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    check_scoring(a.threshold, a.window)?;
    let results = score_runs(&a.scenario, &a.run, a.threshold, a.window)?;
    print!("{}", summary_text(&results, a.threshold, a.window));
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    check_scoring(a.threshold, a.window)?;
    let (results, runtime) = match &a.run {
        Some(run) => (score_runs(&a.scenario, run, a.threshold, a.window)?, None),
        None => {
            let engine = load_engine(a.engine.fuzzy_config.as_deref())?;
            let options = ReplayOptions {
                context: load_context(a.engine.context.as_deref())?,
                ..ReplayOptions::as_fast_as_possible()
            };
            let started = RuntimeSnapshot::now();
            let mut all_us = Vec::new();
            let mut results = Vec::new();
            for (name, s) in load_scenarios(&a.scenario)? {
                let out = replay(&s, engine.clone(), &options).map_err(harness_err)?;
                save_run(&run_dir(&a.out.join("runs"), &name), &out)?;
                all_us.extend_from_slice(&out.decision_us);
                results.push(ScenarioResult {
                    name: s.name.clone(),
                    kind: s.kind.to_string(),
                    evaluation: evaluate(
                        &out.timeline,
                        &out.track_hints,
                        &s.labels,
                        a.threshold,
                        a.window,
                    ),
                });
            }
            (results, Some(RuntimeStats::measure(&all_us, &started)))
        }
    };
    emit_report(&results, a.threshold, a.window, runtime.as_ref(), &a.out).map_err(harness_err)?;
    print!("{}", summary_text(&results, a.threshold, a.window));
    println!("report written to {}", a.out.display());
    Ok(())
}

fn validate_cmd(a: ValidateArgs) -> Result<()> {
    let config = match &a.fuzzy_config {
        Some(p) => {
            FuzzyConfig::load(p).map_err(|e| anyhow!("config stage: {}: {e}", p.display()))?
        }
        None => FuzzyConfig::default_config(),
    };
    let report = validate_config(&config);
    let label = a.fuzzy_config.as_ref().map_or_else(
        || "default fuzzy config".into(),
        |p| p.display().to_string(),
    );
    print!("{label}: {report}");
    if let Some(ctx) = load_context(a.context.as_deref())? {
        for camera in ctx.cameras.values() {
            camera
                .validate()
                .map_err(|e| anyhow!("config stage: camera {}: {e}", camera.camera_id))?;
        }
        println!(
            "{}: ok ({} cameras)",
            a.context.as_ref().unwrap().display(),
            ctx.cameras.len()
        );
    }
    if let Some(t) = load_transport(a.transport_config.as_deref())? {
        t.validate()
            .map_err(|e| anyhow!("config stage: transport: {e}"))?;
        println!(
            "{}: ok ({} mode)",
            a.transport_config.as_ref().unwrap().display(),
            t.mode
        );
    }
    if !report.is_ok() {
        bail!(
            "config stage: {label} has {} violation(s)",
            report.violations.len()
        );
    }
    Ok(())
}

fn bench_transport(a: BenchTransportArgs) -> Result<()> {
    if a.frames == 0 {
        bail!("transport stage: --frames must be positive");
    }
    let modes: Vec<Mode> = a.mode.map_or_else(|| Mode::ALL.to_vec(), |m| vec![m]);
    let classes = [("0-2", 0..=2usize), ("6-10", 6..=10usize)];
    println!(
        "{:<10} {:>7} {:>10} {:>10} {:>10} {:>10} {:>12}",
        "mode", "objects", "bytes", "mean_us", "p95_us", "max_us", "setup_us"
    );
    for mode in modes {
        for (i, (label, objects)) in classes.iter().enumerate() {
            let records =
                synthetic_records(a.frames, objects.clone(), SUITE_EPOCH, a.seed + i as u64);
            let run = loopback_stream(&TransportConfig::demo(mode), "bench", &records, None)
                .map_err(|e| anyhow!("transport stage: {mode}: {e}"))?;
            let stats = LatencyStats::from_samples(&run.latency);
            let bytes = run.latency.iter().map(|s| s.bytes as f64).sum::<f64>()
                / run.latency.len().max(1) as f64;
            println!(
                "{:<10} {:>7} {:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>12.1}",
                mode.as_str(),
                label,
                bytes,
                stats.mean_us,
                stats.p95_us,
                stats.max_us,
                run.setup.elapsed.as_secs_f64() * 1e6
            );
            if let Some(dir) = &a.out {
                write(
                    &dir.join(format!("latency-{}-{label}.csv", mode.as_str())),
                    latency_csv(&run.latency),
                )?;
            }
        }
    }
    Ok(())
}

fn bench_decision(a: BenchDecisionArgs) -> Result<()> {
    if a.records == 0 {
        bail!("context-fog stage: --records must be positive");
    }
    let engine = load_engine(a.fuzzy_config.as_deref())?;
    let camera = ScenarioParams::defaults(ScenarioKind::StraightWalk).camera;
    let camera_id = camera.camera_id.clone();
    let config = ContextConfig {
        policy: ThresholdPolicy::default(),
        ..ContextConfig::single(camera)
    };
    let maker = DecisionMaker::new(
        engine,
        config,
        Arc::new(MemoryErrorLog::new()),
        Arc::new(MemoryDecisionLog::new()),
    );
    let records = synthetic_records(a.records, a.objects..=a.objects, SUITE_EPOCH, a.seed);
    let started = RuntimeSnapshot::now();
    let mut times = Vec::with_capacity(records.len());
    for r in &records {
        let t = Instant::now();
        maker
            .process_record(&camera_id, r)
            .map_err(|e| anyhow!("context-fog stage: {e}"))?;
        times.push(t.elapsed().as_secs_f64() * 1e6);
    }
    print!("{}", runtime_text(&RuntimeStats::measure(&times, &started)));
    Ok(())
}
