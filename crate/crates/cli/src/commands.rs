use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pubcast::cohort::{count_matrices, productivity, CohortOptions};
use pubcast::corpus::{
    parse_counts_file, parse_dblp_xml, CorpusSummary, DblpOptions, IngestReport, PublicationCorpus, YearSpan,
};
use pubcast::creativity::{train, CreativityModel, FitRecord, FitSource};
use pubcast::evaluation::{
    compare_distributions, event_auc, trend_fit, AUCResult, DistributionComparison, EvalError, Grouping,
    PredictedPaths, TrendReport,
};
use pubcast::oracle::generate_corpus;
use pubcast::predictor::{predict, PredictionRun};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    /// `.xml` files are dblp exports, anything else the flat counts format.
    Auto,
    Dblp,
    Counts,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_corpus(path: &Path) -> Result<PublicationCorpus, CliError> {
    parse_counts_file(open(path)?, None).map_err(|e| CliError::in_file(path, e))
}

fn load_model(path: &Path) -> Result<CreativityModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    CreativityModel::from_json(&text).map_err(|e| CliError::in_file(path, e))
}

fn save_corpus(corpus: &PublicationCorpus, path: &Path) -> Result<(), CliError> {
    corpus.write_counts(create(path)?).map_err(|e| CliError::in_file(path, e))
}

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub source: PathBuf,
    pub format: &'static str,
    pub corpus: CorpusSummary,
    /// Only for dblp input, where distinct publications are known.
    pub dblp: Option<DblpCounts>,
}

#[derive(Debug, Serialize)]
pub struct DblpCounts {
    pub report: IngestReport,
    pub average_authors: Option<f64>,
}

pub fn ingest(config: &RunConfig, input: &Path, format: InputFormat) -> Result<IngestSummary, CliError> {
    let span = YearSpan::new(config.ingest.from, config.ingest.to)?;
    let dblp = match format {
        InputFormat::Dblp => true,
        InputFormat::Counts => false,
        InputFormat::Auto => input
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("xml")),
    };
    let (corpus, report) = if dblp {
        let venues: BTreeSet<String> = config.ingest.venues.iter().cloned().collect();
        let options = DblpOptions {
            year_range: span,
            venue_filter: (!venues.is_empty()).then_some(venues),
        };
        let (corpus, report) = parse_dblp_xml(open(input)?, &options).map_err(|e| CliError::in_file(input, e))?;
        (corpus, Some(report))
    } else {
        let corpus = parse_counts_file(open(input)?, Some(span)).map_err(|e| CliError::in_file(input, e))?;
        (corpus, None)
    };
    let corpus_summary = corpus.summary();
    let summary = IngestSummary {
        source: input.to_path_buf(),
        format: if dblp { "dblp" } else { "counts" },
        dblp: report.map(|report| DblpCounts {
            average_authors: (report.publications > 0)
                .then(|| corpus_summary.publication_total as f64 / report.publications as f64),
            report,
        }),
        corpus: corpus_summary,
    };
    save_corpus(&corpus, &config.corpus_path())?;
    write_json(&config.output("corpus_summary.json"), &summary)?;

    println!("source                {}", input.display());
    println!("researchers           {}", summary.corpus.researchers);
    if let Some(d) = &summary.dblp {
        println!("publications          {}", d.report.publications);
    }
    println!("authorship credits    {}", summary.corpus.publication_total);
    println!("avg per researcher    {:.3}", summary.corpus.average_publications);
    if let Some(d) = &summary.dblp {
        if let Some(f) = d.average_authors {
            println!("avg authors           {f:.3}");
        }
        println!(
            "skipped               {} (missing year {}, other kinds {}), out of range {}, venue filtered {}",
            d.report.skipped(),
            d.report.missing_year,
            d.report.other_kind,
            d.report.out_of_range,
            d.report.venue_filtered
        );
    }
    println!("wrote                 {}", config.corpus_path().display());
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct SignificanceRow {
    route: String,
    index: usize,
    points: usize,
    intercept: f64,
    slope: f64,
    slope_std_error: f64,
    slope_p_value: f64,
    chi2: Option<f64>,
    chi2_p_value: Option<f64>,
    source: String,
}

impl From<&FitRecord> for SignificanceRow {
    fn from(r: &FitRecord) -> Self {
        Self {
            route: r.route.to_string(),
            index: r.index,
            points: r.fit.n_points,
            intercept: r.fit.intercept,
            slope: r.fit.slope,
            slope_std_error: r.fit.slope_std_error,
            slope_p_value: r.fit.p_value,
            chi2: r.chi2.as_ref().map(|c| c.statistic),
            chi2_p_value: r.chi2.as_ref().map(|c| c.p_value),
            source: match &r.source {
                FitSource::Fitted => "fitted".to_string(),
                FitSource::Fallback { from, reason } => format!("from {from}: {reason}"),
            },
        }
    }
}

fn print_significance(title: &str, rows: &[SignificanceRow]) {
    println!("{title}");
    println!(
        "{:>5} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10}  source",
        "index", "pts", "intercept", "slope", "p(slope)", "chi2", "p(chi2)"
    );
    let opt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$e}"));
    for r in rows {
        println!(
            "{:>5} {:>4} {:>10.4} {:>10.4} {:>10.2e} {:>10} {:>10}  {}",
            r.index,
            r.points,
            r.intercept,
            r.slope,
            r.slope_p_value,
            opt(r.chi2, 2),
            opt(r.chi2_p_value, 2),
            r.source
        );
    }
}

pub fn train_model(config: &RunConfig) -> Result<CreativityModel, CliError> {
    let params = config.params();
    let corpus = load_corpus(&config.corpus_path())?;
    let grid = params.grid()?;
    let counts = count_matrices(
        &corpus,
        &grid,
        params.train_cohorts,
        params.train_steps,
        CohortOptions::default(),
    )?;
    let eta = productivity(&counts);
    let model = train(&eta, &counts, &params)?;

    write_text(&config.model_path(), &model.to_json()?)?;
    write_text(&config.output("lambda.csv"), &model.lambda_csv())?;
    write_text(&config.output("eta.csv"), &eta.to_csv_string())?;
    let rows: Vec<SignificanceRow> = model
        .row_fits
        .iter()
        .chain(&model.column_fits)
        .map(SignificanceRow::from)
        .collect();
    write_rows(&config.output("significance.csv"), &rows)?;

    let observed = |route: &str| -> Vec<SignificanceRow> {
        model
            .row_fits
            .iter()
            .chain(&model.column_fits)
            .filter(|r| r.route.to_string() == route)
            .map(SignificanceRow::from)
            .collect()
    };
    print_significance("time-row fits (i <= K)", &observed("time-row"));
    println!();
    print_significance("cohort-column fits (j <= L)", &observed("cohort-column"));
    let fallbacks = rows.iter().filter(|r| r.source != "fitted").count();
    println!();
    println!(
        "trained I={} J={} on K={} L={}: {} fits, {} fallbacks",
        params.max_cohort,
        params.steps,
        params.train_cohorts,
        params.train_steps,
        rows.len(),
        fallbacks
    );
    println!("wrote {}", config.model_path().display());
    Ok(model)
}

#[derive(Debug, Default, Serialize)]
pub struct Selection {
    pub initial: Vec<(String, i64)>,
    pub unknown: Vec<String>,
    pub over_cap: usize,
}

fn read_ids(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Initial histories `h(t_X)` of the researchers to predict.
pub fn select(config: &RunConfig, corpus: &PublicationCorpus) -> Result<Selection, CliError> {
    let origin = config.model.origin;
    let year = config.prediction.start_year;
    let ids: Vec<String> = match &config.prediction.researchers {
        Some(path) => read_ids(path)?,
        None => corpus
            .researchers()
            .filter(|r| corpus.count_in(r, year) > 0)
            .map(String::from)
            .collect(),
    };
    let mut selection = Selection::default();
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.clone()) {
            continue;
        }
        if !corpus.contains(&id) {
            selection.unknown.push(id);
            continue;
        }
        let h = corpus.history_between(&id, origin, year);
        if config.prediction.max_history.is_some_and(|cap| h > cap) {
            selection.over_cap += 1;
            continue;
        }
        selection.initial.push((id, h as i64));
    }
    Ok(selection)
}

pub fn run_predict(config: &RunConfig) -> Result<PredictionRun, CliError> {
    let model = load_model(&config.model_path())?;
    let (start, end) = config.window(&model.params)?;
    let corpus = load_corpus(&config.truth_path())?;
    let selection = select(config, &corpus)?;
    if !selection.unknown.is_empty() {
        eprintln!(
            "warning: skipped {} unknown researcher(s): {}",
            selection.unknown.len(),
            selection.unknown.join(", ")
        );
    }
    if selection.over_cap > 0 {
        eprintln!(
            "warning: skipped {} researcher(s) above max_history",
            selection.over_cap
        );
    }
    if selection.initial.is_empty() {
        return Err(CliError::Insufficient("no researchers to predict".into()));
    }
    let p = &config.prediction;
    let run = predict(&model, &selection.initial, start, end, p.replicates, p.seed)?;

    let path = config.predictions_path();
    run.write_csv(create(&path)?).map_err(|e| CliError::in_file(&path, e))?;
    let summary = config.output("trajectory_summary.csv");
    run.write_summary_csv(create(&summary)?)
        .map_err(|e| CliError::in_file(&summary, e))?;

    let clamped = (0..run.researchers.len())
        .filter(|&r| (0..run.replicates).any(|k| run.was_clamped(r, k)))
        .count();
    let last = run.width() - 1;
    let mean_gain = (0..run.researchers.len())
        .map(|r| run.mean_at(r, run.end_step) - run.path(r, 0)[0] as f64)
        .sum::<f64>()
        / run.researchers.len() as f64;
    println!(
        "predicted {} researchers x {} replicates over {}..{} ({} steps)",
        run.researchers.len(),
        run.replicates,
        run.year_of(run.start_step),
        run.year_of(run.end_step),
        last
    );
    println!("mean predicted gain   {mean_gain:.3}");
    println!("hit cohort cap I      {clamped}");
    println!(
        "skipped               {} unknown, {} above max_history",
        selection.unknown.len(),
        selection.over_cap
    );
    println!("wrote {}", path.display());
    Ok(run)
}

#[derive(Debug, Serialize)]
struct TrendRow {
    i: u64,
    year: i32,
    researchers: usize,
    actual_mean: f64,
    predicted_mean: f64,
    s1: Option<f64>,
    s2: Option<f64>,
}

#[derive(Debug, Serialize)]
struct KsRow {
    year: i32,
    researchers: usize,
    actual_mean: f64,
    predicted_mean: f64,
    actual_p95: u64,
    predicted_p95: u64,
    statistic: f64,
    p_value: f64,
}

#[derive(Debug, Serialize)]
struct AucRow {
    i: Option<u64>,
    year: i32,
    m1: u64,
    m2: u64,
    m: u64,
    auc: f64,
}

impl From<&AUCResult> for AucRow {
    fn from(a: &AUCResult) -> Self {
        Self {
            i: a.cohort,
            year: a.year,
            m1: a.m1,
            m2: a.m2,
            m: a.m,
            auc: a.auc,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct EvaluationReport {
    pub trend: Vec<TrendReport>,
    pub distributions: Vec<DistributionComparison>,
    pub auc: Vec<AUCResult>,
}

fn fmt_corr(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

pub fn evaluate(config: &RunConfig) -> Result<EvaluationReport, CliError> {
    let model = load_model(&config.model_path())?;
    let origin = model.params.origin;
    let path = config.predictions_path();
    let run = PredictionRun::read_csv(open(&path)?, model.params.start).map_err(|e| CliError::in_file(&path, e))?;
    let truth = load_corpus(&config.truth_path())?;
    if !run.researchers.iter().any(|r| truth.contains(r)) {
        return Err(EvalError::NoOverlap.into());
    }
    let toggles = &config.evaluation;
    let mut report = EvaluationReport::default();

    if toggles.trend {
        let paths = PredictedPaths::from_run(&run);
        let mut rows = Vec::new();
        for &i in &toggles.trend_cohorts {
            let trend = trend_fit(&paths, &truth, origin, i)?;
            rows.extend(trend.points.iter().map(|p| TrendRow {
                i,
                year: p.year,
                researchers: trend.researchers,
                actual_mean: p.actual_mean,
                predicted_mean: p.predicted_mean,
                s1: p.correlation.s1,
                s2: p.correlation.s2,
            }));
            report.trend.push(trend);
        }
        write_rows(&config.output("trend.csv"), &rows)?;
        println!("trend (mean cumulative publications, actual vs predicted)");
        println!("{:>4} {:>6} {:>6} {:>9} {:>9} {:>7} {:>7}", "i", "year", "n", "actual", "predicted", "s1", "s2");
        for r in rows.iter().filter(|r| r.year == config.prediction.end_year) {
            println!(
                "{:>4} {:>6} {:>6} {:>9.3} {:>9.3} {:>7} {:>7}",
                r.i,
                r.year,
                r.researchers,
                r.actual_mean,
                r.predicted_mean,
                fmt_corr(r.s1),
                fmt_corr(r.s2)
            );
        }
        println!();
    }

    if toggles.ks {
        report.distributions = compare_distributions(&run, &truth, origin, None)?;
        let rows: Vec<KsRow> = report
            .distributions
            .iter()
            .map(|d| KsRow {
                year: d.year,
                researchers: d.ks.n,
                actual_mean: d.actual.mean,
                predicted_mean: d.predicted.mean,
                actual_p95: d.actual.p95,
                predicted_p95: d.predicted.p95,
                statistic: d.ks.statistic,
                p_value: d.ks.p_value,
            })
            .collect();
        write_rows(&config.output("ks.csv"), &rows)?;
        println!("two-sample KS on cumulative publications");
        println!("{:>6} {:>9} {:>9} {:>8} {:>9}", "year", "actual", "predicted", "D", "p");
        for r in &rows {
            println!(
                "{:>6} {:>9.3} {:>9.3} {:>8.4} {:>9.3e}",
                r.year, r.actual_mean, r.predicted_mean, r.statistic, r.p_value
            );
        }
        println!();
    }

    if toggles.auc {
        let mut rows = Vec::new();
        for year in run.year_of(run.start_step) + 1..=run.year_of(run.end_step) {
            match event_auc(&model, &truth, Some(&run.researchers), year, Grouping::PerCohort) {
                Ok(r) => {
                    rows.push(AucRow::from(&r.pooled));
                    rows.extend(r.per_cohort.iter().map(AucRow::from));
                    report.auc.push(r.pooled);
                    report.auc.extend(r.per_cohort);
                }
                Err(EvalError::NothingScored) => eprintln!("warning: no researcher scored in {year}"),
                Err(e) => return Err(e.into()),
            }
        }
        write_rows(&config.output("auc.csv"), &rows)?;
        println!("event AUC (all cohorts)");
        for r in rows.iter().filter(|r| r.i.is_none()) {
            println!("{:>6} {:>7.4}  ({} researchers)", r.year, r.auc, r.m);
        }
        println!();
    }

    write_json(&config.output("evaluation.json"), &report)?;
    println!("wrote reports to {}", config.paths.output.display());
    Ok(report)
}

pub fn synth(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.generator();
    let (corpus, truth) = generate_corpus(&spec)?;
    save_corpus(&corpus, &config.corpus_path())?;
    let path = config.output("ground_truth.json");
    truth.write_json(create(&path)?).map_err(|e| CliError::in_file(&path, e))?;
    let summary = corpus.summary();
    println!(
        "generated {} researchers, {} publications over {} steps (seed {})",
        summary.researchers, summary.publication_total, spec.params.steps, spec.seed
    );
    if spec.heavy_tail.is_some() {
        println!("heavy-tail draws      {}", truth.heavy_tail_draws);
    }
    println!("wrote {} and {}", config.corpus_path().display(), path.display());
    Ok(())
}
