mod args;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use probcast_core::bounds::{bound_forecaster, verify_run, BoundKind, BoundReport};
use probcast_core::harness::{
    adversarial_stream, build_forecaster, emit_report, prepare_stream, random_stream, read_series_file,
    render_table, run_experiment, run_online, split_index, synth_series, AlgorithmKind, ExperimentConfig,
    ExperimentReport, LabeledStream,
};
use probcast_core::{brier_loss, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use args::{Algo, BenchArgs, Cli, Command, ForecastArgs, LabelArgs, RunArgs, SeriesArgs, VerifyArgs};

const EXIT_INPUT: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Debug)]
enum Failure {
    Core(Error),
    /// A guarantee failed to hold.
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Forecast(a) => forecast(a),
        Command::Bench(a) => bench(a),
        Command::VerifyBounds(a) => verify_bounds(a),
        Command::Label(a) => label(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_INVARIANT })
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}

fn load_series(s: &SeriesArgs) -> Result<(Vec<f64>, String, Option<u64>), Failure> {
    match (&s.input, s.synth) {
        (Some(path), _) => Ok((read_series_file(path)?, path.display().to_string(), None)),
        (None, Some(kind)) => {
            let kind = kind.kind();
            Ok((synth_series(kind, s.length, s.seed), format!("synth:{}", kind.name()), Some(s.seed)))
        }
        (None, None) => Err(Error::InvalidParameter("give --input or --synth".into()).into()),
    }
}

fn algorithm(algo: Algo, run: &RunArgs) -> Result<AlgorithmKind, Failure> {
    Ok(match algo {
        Algo::Caar => AlgorithmKind::Caar,
        Algo::Maar => AlgorithmKind::Maar,
        Algo::Kaar => AlgorithmKind::Kaar { kernel: run.kernel.kernel()? },
        Algo::Simple => AlgorithmKind::Simple,
    })
}

fn experiment(run: &RunArgs, algorithms: Vec<AlgorithmKind>) -> Result<(ExperimentReport, Vec<f64>), Failure> {
    let (series, source, seed) = load_series(&run.series)?;
    let mut cfg = ExperimentConfig::new(algorithms);
    cfg.window = run.series.window;
    cfg.epsilon = run.series.epsilon.0;
    cfg.ridge = run.ridge.0.clone();
    cfg.source = source;
    cfg.seed = seed;
    cfg.record_timing = !run.omit_timing;
    Ok((run_experiment(&series, &cfg)?, series))
}

fn check_slack(report: &ExperimentReport) -> Outcome {
    for r in &report.results {
        if let Some(s) = r.bound_slack {
            if s < -probcast_core::bounds::SLACK_TOLERANCE {
                return Err(Failure::Invariant(format!("{} has bound slack {s}", r.algorithm)));
            }
        }
    }
    Ok(())
}

fn finish(report: &ExperimentReport, out: Option<&Path>) -> Outcome {
    print!("{}", render_table(&report.results));
    println!(
        "stream {} steps, test from step {}, epsilon {:.6}",
        report.stream_len, report.split_index, report.epsilon
    );
    if let Some(dir) = out {
        let paths = emit_report(report, dir)?;
        log::info!("wrote {}", paths.csv.display());
    }
    check_slack(report)
}

#[derive(Serialize)]
struct ForecastRow {
    step: usize,
    segment: &'static str,
    up: f64,
    down: f64,
    tube: f64,
    outcome: &'static str,
    loss: f64,
}

fn class_name(k: usize) -> &'static str {
    ["up", "down", "tube"][k]
}

fn forecast(a: ForecastArgs) -> Outcome {
    let kind = algorithm(a.algo, &a.run)?;
    let (report, series) = experiment(&a.run, vec![kind])?;
    if let Some(dir) = &a.run.out {
        let stream = prepare_stream(&series, report.config.window, report.config.epsilon)?;
        let ridge = report.results[0].ridge.unwrap_or(1.0);
        let mut f = build_forecaster(&kind, stream.meta.window, 3, ridge)?;
        let (_, forecasts) = run_online(&stream.examples, &mut f)?;
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("forecasts.csv"))?;
        let split = split_index(stream.len());
        for (t, (e, p)) in stream.examples.iter().zip(&forecasts).enumerate() {
            let k = e.y.as_slice().iter().position(|&v| v == 1.0).unwrap_or(2);
            let p = p.as_slice();
            w.serialize(ForecastRow {
                step: t,
                segment: if t < split { "train" } else { "test" },
                up: p[0],
                down: p[1],
                tube: p[2],
                outcome: class_name(k),
                loss: brier_loss(&e.y, &p.to_vec())?,
            })?;
        }
        w.flush()?;
    }
    finish(&report, a.run.out.as_deref())
}

fn bench(a: BenchArgs) -> Outcome {
    if a.algos.is_empty() {
        return Err(Error::InvalidParameter("no algorithms selected".into()).into());
    }
    let kinds = a.algos.iter().map(|&k| algorithm(k, &a.run)).collect::<Result<Vec<_>, _>>()?;
    let (report, _) = experiment(&a.run, kinds)?;
    finish(&report, a.run.out.as_deref())
}

#[derive(Serialize)]
struct BoundRow {
    stream: usize,
    source: &'static str,
    bound: String,
    trials: usize,
    ridge: f64,
    algorithm_loss: f64,
    expert_loss: f64,
    bound_value: f64,
    slack: f64,
}

impl BoundRow {
    fn new(stream: usize, source: &'static str, r: BoundReport) -> Self {
        Self {
            stream,
            source,
            bound: r.bound,
            trials: r.trials,
            ridge: r.ridge,
            algorithm_loss: r.algorithm_loss,
            expert_loss: r.expert_loss,
            bound_value: r.bound_value,
            slack: r.slack,
        }
    }

    fn holds(&self) -> bool {
        self.slack >= -probcast_core::bounds::SLACK_TOLERANCE
    }
}

fn verify_bounds(a: VerifyArgs) -> Outcome {
    if a.length < 1 || a.dims < 1 || a.classes < 2 || !(a.ridge > 0.0) {
        return Err(Error::InvalidParameter("need length >= 1, dims >= 1, classes >= 2, ridge > 0".into()).into());
    }
    let kernel = a.kernel.kernel()?;
    let kinds = [
        BoundKind::CaarComponentSum,
        BoundKind::MaarDoubleRidge,
        BoundKind::MaarEigenSplit,
        BoundKind::KaarLogDet { kernel },
        BoundKind::KaarHorizonTuned { kernel, f_budget: 1.0 },
    ];
    let (n, d) = (a.dims, a.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rows = Vec::new();
    for s in 0..a.streams {
        let t = rng.random_range(1..=a.length);
        let data = random_stream(&mut rng, t, n, d, 1.0);
        for kind in kinds {
            rows.push(BoundRow::new(s, "random", verify_run(&data, kind, a.ridge)?));
        }
    }
    for s in 0..a.adversarial {
        let t = rng.random_range(1..=a.length);
        // The horizon-tuned ridge depends on the stream, so the adversary
        // plays against the fixed-ridge kinds only.
        for kind in &kinds[..4] {
            let ridge = if matches!(kind, BoundKind::MaarDoubleRidge) { 2.0 * a.ridge } else { a.ridge };
            let mut f = bound_forecaster(kind, n, d, ridge)?;
            let data = adversarial_stream(&mut f, &mut rng, t, 1.0)?;
            rows.push(BoundRow::new(s, "adversarial", verify_run(&data, *kind, a.ridge)?));
        }
    }

    let mut summary: Vec<(String, f64, usize)> = Vec::new();
    for row in &rows {
        match summary.iter_mut().find(|(b, _, _)| *b == row.bound) {
            Some(entry) => {
                entry.1 = entry.1.min(row.slack);
                entry.2 += 1;
            }
            None => summary.push((row.bound.clone(), row.slack, 1)),
        }
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<20} {:>7} {:>14}", "bound", "checks", "min slack")?;
    for (bound, min, count) in &summary {
        writeln!(stdout, "{bound:<20} {count:>7} {min:>14.6}")?;
    }
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("bound_reports.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
        serde_json::to_writer_pretty(std::fs::File::create(dir.join("bound_reports.json"))?, &rows)?;
    }
    match rows.iter().find(|r| !r.holds()) {
        Some(r) => Err(Failure::Invariant(format!(
            "{} on {} stream {}: slack {}",
            r.bound, r.source, r.stream, r.slack
        ))),
        None => Ok(()),
    }
}

fn write_labels<W: Write>(stream: &LabeledStream, out: W) -> Outcome {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "label".to_string()];
    header.extend((1..=stream.meta.window).map(|k| format!("lag{k}")));
    w.write_record(&header)?;
    for (t, e) in stream.examples.iter().enumerate() {
        let k = e.y.as_slice().iter().position(|&v| v == 1.0).unwrap_or(2);
        let mut rec = vec![t.to_string(), class_name(k).to_string()];
        // lag1 is the most recent observation
        rec.extend(e.x.as_slice().iter().rev().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn label(a: LabelArgs) -> Outcome {
    let (series, _, _) = load_series(&a.series)?;
    let stream = prepare_stream(&series, a.series.window, a.series.epsilon.0)?;
    let norm = stream.meta.normalization.expect("set by prepare_stream");
    eprintln!(
        "{} steps, window {}, epsilon {}, mean {}, scale {}",
        stream.len(),
        stream.meta.window,
        stream.meta.epsilon,
        norm.mean,
        norm.max_abs
    );
    match &a.out {
        Some(path) => write_labels(&stream, std::fs::File::create(path)?),
        None => write_labels(&stream, std::io::stdout().lock()),
    }
}
