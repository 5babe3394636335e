use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use synoptic_space::builtin;
use synoptic_space::corpus::evaluate::{evaluate_corpus, EvalConfig, ModeSelection};
use synoptic_space::corpus::synth::{self, SynthOptions};
use synoptic_space::corpus::{Climatology, Prediction};
use synoptic_space::extraction::PhenomenonConfig;
use synoptic_space::hierarchy::LocationHierarchy;
use synoptic_space::ingest::client::{ArchiveClient, FixtureTransport, Transport, DEFAULT_BASE_URL};
use synoptic_space::ingest::{sample_from_product, Sample, StationRegistry};
use synoptic_space::jsonl::{read_jsonl, write_jsonl};
use synoptic_space::preprocess::{filter_afd_traced, quality_control, FilterRules};
use synoptic_space::scoring::space_local;

use crate::config::{layer, FileConfig};
use crate::{BaselineCommand, Cli, Command, EvaluateArgs, FetchArgs, FixturesCommand, IngestArgs, ModelFiles, PreprocessArgs, ScoreArgs};

/// Bad flag values found after parsing; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => ingest(args, &file),
        Command::Preprocess(args) => preprocess(args, &file),
        Command::Score(args) => score(args, &file),
        Command::Evaluate(args) => evaluate(args, &file),
        Command::Baseline(BaselineCommand::Climatology { train, test, seed, model, out }) => {
            let train: Vec<Sample> = read_records(&train)?;
            let test: Vec<Sample> = read_records(&test)?;
            let seed = layer(seed, file.seed, 0);
            let preds = Climatology::new(&train).predictions(&test, seed, &model)?;
            write_records(&out, &preds)
        }
        Command::Fixtures(cmd) => fixtures(cmd, &file),
    }
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(open_input(path)?).with_context(|| format!("reading {}", path.display()))
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_jsonl(create_output(path)?, records).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create_output(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

struct Model {
    hierarchy: &'static LocationHierarchy,
    stations: &'static StationRegistry,
    phenomenon: &'static PhenomenonConfig,
}

fn leak<T>(v: T) -> &'static T {
    Box::leak(Box::new(v))
}

fn load_hierarchy(path: Option<PathBuf>) -> Result<&'static LocationHierarchy> {
    Ok(match path {
        Some(p) => leak(
            LocationHierarchy::parse(&read_to_string(&p)?)
                .with_context(|| format!("loading hierarchy {}", p.display()))?,
        ),
        None => builtin::hierarchy(),
    })
}

fn load_stations(path: Option<PathBuf>) -> Result<&'static StationRegistry> {
    Ok(match path {
        Some(p) => leak(
            StationRegistry::parse(&read_to_string(&p)?)
                .with_context(|| format!("loading stations {}", p.display()))?,
        ),
        None => builtin::stations(),
    })
}

fn load_model(m: ModelFiles, file: &FileConfig) -> Result<Model> {
    let hierarchy = load_hierarchy(m.hierarchy.or_else(|| file.hierarchy.clone()))?;
    let stations = load_stations(m.stations.or_else(|| file.stations.clone()))?;
    stations
        .validate(hierarchy)
        .context("station registry does not fit the hierarchy")?;
    let name = layer(m.phenomenon, file.phenomenon.clone(), "pressure".into());
    let phenomenon = builtin::phenomenon(&name)
        .ok_or_else(|| usage(format!("unknown phenomenon `{name}` (expected pressure or temperature)")))?;
    Ok(Model { hierarchy, stations, phenomenon })
}

fn score(args: ScoreArgs, file: &FileConfig) -> Result<()> {
    let model = load_model(args.model, file)?;
    let pred = read_to_string(&args.pred)?;
    let reference = read_to_string(&args.reference)?;
    let node = model
        .stations
        .home_node(&args.station, model.hierarchy)
        .ok_or_else(|| anyhow::anyhow!("unknown station `{}`", args.station))?;
    let result = space_local(&pred, &reference, node, model.phenomenon, model.hierarchy)?;
    let json = if args.pretty {
        serde_json::to_string_pretty(&result)?
    } else {
        serde_json::to_string(&result)?
    };
    println!("{json}");
    Ok(())
}

fn evaluate(args: EvaluateArgs, file: &FileConfig) -> Result<()> {
    let model = load_model(args.model, file)?;
    let mode_name = layer(args.mode, file.mode.clone(), "both".into());
    let modes: ModeSelection = mode_name.parse().map_err(usage)?;
    let jobs = layer(args.jobs, file.jobs, 1);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let seed = args.seed.or(file.seed);

    let samples: Vec<Sample> = read_records(&args.samples)?;
    let mut predictions: Vec<Prediction> = read_records(&args.predictions)?;
    if let Some(train) = &args.climatology_train {
        let train: Vec<Sample> = read_records(train)?;
        let scored: std::collections::HashSet<&str> =
            predictions.iter().map(|p| p.sample_id.as_str()).collect();
        let targets: Vec<Sample> = samples
            .iter()
            .filter(|s| scored.contains(s.sample_id.as_str()))
            .cloned()
            .collect();
        let extra = Climatology::new(&train).predictions(&targets, seed.unwrap_or(0), "climatology")?;
        predictions.extend(extra);
    }

    let cfg = EvalConfig {
        phenomenon: model.phenomenon,
        hierarchy: model.hierarchy,
        stations: model.stations,
        modes,
        jobs,
        seed,
    };
    let eval = evaluate_corpus(&samples, &predictions, &cfg)?;
    if let Some(path) = &args.scores {
        write_records(path, &eval.records)?;
    }
    soft_aggregate_check(&eval.report);
    let text = if args.pretty {
        eval.report.to_table()
    } else {
        eval.report.to_json(true)
    };
    write_text(args.report.as_deref().unwrap_or(Path::new("-")), &text)
}

fn soft_aggregate_check(report: &synoptic_space::corpus::Report) {
    for (model, metrics) in &report.rows {
        if let (Some(local), Some(agg)) = (metrics.get("space_local.s"), metrics.get("space_aggregate.s")) {
            if agg.mean < local.mean {
                log::warn!(
                    "{model}: mean aggregate score {:.4} is below mean local score {:.4}",
                    agg.mean,
                    local.mean
                );
            }
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct PreprocessSummary {
    input: usize,
    sentences: usize,
    dropped_no_keyword: usize,
    dropped_excluded: usize,
    dropped_truncated: usize,
    rejected: BTreeMap<&'static str, usize>,
    kept: usize,
}

impl PreprocessSummary {
    fn table(&self) -> String {
        let mut rows = vec![
            ("input samples".to_string(), self.input),
            ("sentences".to_string(), self.sentences),
            ("dropped: no keyword".to_string(), self.dropped_no_keyword),
            ("dropped: excluded keyword".to_string(), self.dropped_excluded),
            ("dropped: beyond horizon".to_string(), self.dropped_truncated),
        ];
        rows.extend(self.rejected.iter().map(|(k, v)| (format!("rejected: {k}"), *v)));
        rows.push(("kept samples".to_string(), self.kept));
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v:>8}\n"))
            .collect()
    }
}

/// Reads `*.txt` products from a directory, sorted by file name. The office
/// is the file-name prefix before the first `_`.
fn read_raw_dir(dir: &Path) -> Result<Vec<Sample>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let office = stem.split('_').next().unwrap_or_default().to_string();
        let text = read_to_string(&path)?;
        let product = synoptic_space::ingest::RawProduct {
            product_id: stem,
            entered: chrono::DateTime::UNIX_EPOCH,
            text,
        };
        out.extend(sample_from_product(&office, &product));
    }
    Ok(out)
}

fn preprocess(args: PreprocessArgs, file: &FileConfig) -> Result<()> {
    let rules: &FilterRules = match args.rules.or_else(|| file.rules.clone()) {
        Some(p) => leak(FilterRules::parse(&read_to_string(&p)?).with_context(|| format!("loading rules {}", p.display()))?),
        None => builtin::filter_rules(),
    };
    let registry = match args.stations.or_else(|| file.stations.clone()) {
        Some(p) => Some(load_stations(Some(p))?),
        None => Some(builtin::stations()),
    };
    let raw = if args.input.is_dir() {
        read_raw_dir(&args.input)?
    } else {
        read_records(&args.input)?
    };

    let mut summary = PreprocessSummary { input: raw.len(), ..Default::default() };
    let mut filtered = Vec::new();
    for mut sample in raw {
        let outcome = filter_afd_traced(&sample.reference_text, sample.local_issue_time(), rules);
        let t = &outcome.trace;
        summary.sentences += t.sentences;
        summary.dropped_no_keyword += t.dropped_no_keyword;
        summary.dropped_excluded += t.dropped_excluded;
        summary.dropped_truncated += t.dropped_truncated;
        match outcome.text {
            Some(text) => {
                sample.reference_text = text;
                filtered.push(sample);
            }
            None => {
                let code = t.rejection.as_ref().map_or("rejected", |r| r.code());
                *summary.rejected.entry(code).or_default() += 1;
            }
        }
    }
    let qc = quality_control(filtered, registry);
    for (code, n) in qc.counts() {
        *summary.rejected.entry(code).or_default() += n;
    }
    summary.kept = qc.kept.len();
    write_records(&args.out, &qc.kept)?;

    let text = if args.pretty {
        summary.table()
    } else {
        serde_json::to_string_pretty(&summary)? + "\n"
    };
    match &args.summary {
        Some(path) => write_text(path, &text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn resolve_offices(offices: &[String], registry: &StationRegistry) -> Result<Vec<String>> {
    if offices.len() == 1 && offices[0].eq_ignore_ascii_case("all") {
        return Ok(registry.iter().map(|s| s.office.clone()).collect());
    }
    offices
        .iter()
        .map(|o| match registry.get(o) {
            Some(s) => Ok(s.office.clone()),
            None => Err(usage(format!("unknown office `{o}`"))),
        })
        .collect()
}

fn fetch_with(transport: &dyn Transport, fetch: &FetchArgs, file: &FileConfig) -> Result<Vec<Sample>> {
    let registry = load_stations(fetch.stations.clone().or_else(|| file.stations.clone()))?;
    let offices = resolve_offices(&fetch.offices, registry)?;
    let jobs = layer(fetch.jobs, file.jobs, 4);
    let mut client = ArchiveClient::new(transport);
    if let Some(rate) = fetch.rate.or(file.rate) {
        client = client.with_rate_limit(rate);
    }
    let samples = client.ingest(&offices, fetch.start, fetch.end, jobs)?;
    log::info!("{} samples from {} offices", samples.len(), offices.len());
    Ok(samples)
}

#[cfg(feature = "http")]
fn http_transport(fetch: &FetchArgs, file: &FileConfig) -> Box<dyn Transport> {
    use synoptic_space::ingest::client::HttpTransport;
    let endpoint = layer(fetch.endpoint.clone(), file.endpoint.clone(), DEFAULT_BASE_URL.to_string());
    Box::new(HttpTransport::new(&endpoint, std::time::Duration::from_secs(30)))
}

#[cfg(not(feature = "http"))]
fn http_transport(_: &FetchArgs, _: &FileConfig) -> Box<dyn Transport> {
    let _ = DEFAULT_BASE_URL;
    struct Offline;
    impl Transport for Offline {
        fn get(&self, _: &str) -> Result<String, synoptic_space::ingest::client::TransportError> {
            Err(synoptic_space::ingest::client::TransportError::Network(
                "built without the `http` feature; use --fixtures".into(),
            ))
        }
    }
    Box::new(Offline)
}

fn ingest(args: IngestArgs, file: &FileConfig) -> Result<()> {
    let samples = match (&args.fixtures, &args.record) {
        (Some(dir), _) => fetch_with(&FixtureTransport::new(dir), &args.fetch, file)?,
        (None, Some(dir)) => {
            let rec = synoptic_space::ingest::RecordingTransport::new(http_transport(&args.fetch, file), dir)?;
            fetch_with(&rec, &args.fetch, file)?
        }
        (None, None) => fetch_with(http_transport(&args.fetch, file).as_ref(), &args.fetch, file)?,
    };
    write_records(&args.out, &samples)
}

fn fixtures(cmd: FixturesCommand, file: &FileConfig) -> Result<()> {
    match cmd {
        FixturesCommand::Record { fetch, dir, out } => {
            let rec = synoptic_space::ingest::RecordingTransport::new(http_transport(&fetch, file), &dir)?;
            let samples = fetch_with(&rec, &fetch, file)?;
            eprintln!("recorded {} samples into {}", samples.len(), dir.display());
            match out {
                Some(path) => write_records(&path, &samples),
                None => Ok(()),
            }
        }
        FixturesCommand::Replay { fetch, dir, out } => {
            let samples = fetch_with(&FixtureTransport::new(&dir), &fetch, file)?;
            write_records(&out, &samples)
        }
        FixturesCommand::Synth { out, seed, forecasts, stations_per_forecast, raw } => {
            if forecasts == 0 || stations_per_forecast == 0 {
                bail!(usage("--forecasts and --stations-per-forecast must be positive"));
            }
            write_synth(&out, seed, forecasts, stations_per_forecast, raw)
        }
    }
}

fn write_synth(out: &Path, seed: u64, forecasts: usize, per: usize, raw: usize) -> Result<()> {
    let opts = SynthOptions { forecasts, stations_per_forecast: per, seed, ..Default::default() };
    let corpus = synth::generate(&opts, builtin::hierarchy(), builtin::stations());
    let corpus_dir = out.join("corpus");
    write_records(&corpus_dir.join("samples.jsonl"), &corpus.samples)?;
    write_records(&corpus_dir.join("training.jsonl"), &corpus.training)?;
    write_records(&corpus_dir.join("predictions.jsonl"), &corpus.predictions)?;

    let raw_dir = out.join("raw_afd");
    fs::create_dir_all(&raw_dir)?;
    for (name, _, _, text) in synth::raw_products(raw, builtin::stations(), seed) {
        fs::write(raw_dir.join(name), text)?;
    }

    let api_dir = out.join("api");
    fs::create_dir_all(&api_dir)?;
    for (name, body) in synth::api_fixtures(builtin::stations(), seed) {
        fs::write(api_dir.join(name), body)?;
    }
    eprintln!(
        "wrote {} samples, {} predictions, {} training samples, {} raw products to {}",
        corpus.samples.len(),
        corpus.predictions.len(),
        corpus.training.len(),
        raw,
        out.display()
    );
    Ok(())
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
