//! Command-line front end: argument parsing, the analysis pipeline over
//! dataset rows, and table rendering.
//!
//! Every command returns its output as a string so that output is
//! byte-identical for identical input, options and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datasets::{load, to_distribution, DatasetRow};
use crate::error::{Error, Result};
use crate::hypothesis::{
    holm_correct_flagged, left_pvalue_exact_rp, left_pvalue_from_values, wilcoxon_left, TestResult,
    WilcoxonResult,
};
use crate::measures::{avg_swap_distance_of_freqs, dominance, entropy_plugin, OrderDistribution};
use crate::nullmodels::{
    expected_d_die_rolling, expected_d_random_permutation, expected_h_die_rolling, rounded_total, trial_seed,
    MonteCarloSummary, NullModel, NullSampler, PolyaCounting, SamplerOptions, Score,
};
use crate::permutohedron::Permutohedron;
use crate::powerbound::{compute_pa, compute_pm, find_multiset_counterexample, min_pm_by_size};
use crate::spectral::spectrum_report;

/// Seed used when neither `--seed` nor the environment variable is set.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const SEED_ENV_VAR: &str = "SWAPDIST_SEED";

pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "swapdist", version, about = "Swap-distance and entropy analysis of word-order frequencies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scores, null-model expectations and left p-values for every dataset row.
    Analyze(AnalyzeArgs),
    /// Left-sided Wilcoxon signed-rank test of observed scores against a null expectation.
    Wilcoxon(WilcoxonArgs),
    /// Mask-class probabilities and other lower bounds of the permutation-test p-value.
    Power(PowerArgs),
    /// Eigenvalues of D - (d_max/2) O.
    Spectra(SpectraArgs),
    /// Graphviz rendering of a permutohedron, optionally weighted by a dataset row.
    Graph(GraphArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Correction {
    Holm,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NullChoice {
    Dr,
    Rw,
    Pu,
    Rp,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScoreChoice {
    /// Plug-in entropy.
    H,
    /// Average swap distance.
    D,
}

impl From<ScoreChoice> for Score {
    fn from(s: ScoreChoice) -> Score {
        match s {
            ScoreChoice::H => Score::Entropy,
            ScoreChoice::D => Score::AvgSwapDistance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolyaChoice {
    /// Final ball counts, including the initial ball of each order.
    Balls,
    /// Draws only, i.e. ball counts minus one.
    Draws,
}

/// Accepts plain integers and scientific notation such as `1e6`.
fn parse_trials(s: &str) -> std::result::Result<u64, String> {
    let value = match s.replace('_', "").parse::<u64>() {
        Ok(v) => v,
        Err(_) => {
            let f: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
            if !(f.is_finite() && f.fract() == 0.0 && f >= 0.0 && f <= u64::MAX as f64) {
                return Err(format!("{s:?} is not a whole number"));
            }
            f as u64
        }
    };
    if value == 0 {
        return Err("at least one trial is required".into());
    }
    Ok(value)
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("{s:?} is not a boolean")),
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: OutputFormat,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    /// Monte Carlo trials per null model and row.
    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = parse_trials)]
    pub trials: u64,
    #[arg(long, env = SEED_ENV_VAR, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Row filter: `all`, `n=<k>`, `dominant`, `corpus` or `kind=<text>`;
    /// several may be joined with commas.
    #[arg(long, default_value = "all")]
    pub filter: String,
    #[arg(long, value_enum, default_value = "balls")]
    pub polya_counting: PolyaChoice,
    /// Random-walk length; defaults to the rounded total frequency of the row.
    #[arg(long)]
    pub walk_steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Dataset in CSV (or JSON with a `.json` extension).
    pub input: PathBuf,
    #[command(flatten)]
    pub simulation: SimulationArgs,
    #[arg(long, value_enum, default_value = "holm")]
    pub correction: Correction,
    /// Exact permutation test for n = 3 (`--exact false` for Monte Carlo).
    #[arg(long, default_value_t = true, value_parser = parse_bool, action = clap::ArgAction::Set)]
    pub exact: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub null: Vec<NullChoice>,
    /// Significance level reported alongside the results; it changes nothing.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct WilcoxonArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub simulation: SimulationArgs,
    #[arg(long, value_enum, default_value = "d")]
    pub score: ScoreChoice,
    /// Null model whose expectation is paired with the observed score.
    #[arg(long, value_enum, default_value = "rp")]
    pub null: NullChoice,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub n: usize,
    /// Mask size; every feasible size when omitted.
    #[arg(long)]
    pub m: Option<usize>,
    /// Print the automorphism bound instead of mask classes.
    #[arg(long, conflicts_with_all = ["m", "counterexample", "minimum"])]
    pub automorphisms: bool,
    /// Search two 4-vertex masks with equal distance multisets and different probabilities.
    #[arg(long, conflicts_with_all = ["m", "minimum"])]
    pub counterexample: bool,
    /// Smallest class probability for each mask size.
    #[arg(long, conflicts_with = "m")]
    pub minimum: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub n: usize,
    /// Allow n = 7 (a dense 5040 x 5040 eigenproblem).
    #[arg(long)]
    pub allow_large: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub n: usize,
    /// Dataset whose row weights the vertices and edges.
    #[arg(long, requires = "row")]
    pub input: Option<PathBuf>,
    /// Zero-based row index in the dataset.
    #[arg(long, requires = "input")]
    pub row: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Options of the analysis pipeline, independent of argument parsing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub trials: u64,
    pub seed: u64,
    pub alpha: f64,
    pub correction: Correction,
    pub exact: bool,
    pub nulls: Vec<NullModel>,
    pub filter: String,
    pub polya_counting: PolyaCounting,
    pub walk_steps: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
            correction: Correction::Holm,
            exact: true,
            nulls: NullModel::ALL.to_vec(),
            filter: "all".into(),
            polya_counting: PolyaCounting::BallCounts,
            walk_steps: None,
        }
    }
}

impl RunConfig {
    fn sampler_options(&self) -> SamplerOptions {
        SamplerOptions { polya_counting: self.polya_counting, walk_steps: self.walk_steps }
    }

    fn uses(&self, model: NullModel) -> bool {
        self.nulls.contains(&model)
    }
}

fn expand_nulls(choices: &[NullChoice]) -> Vec<NullModel> {
    let mut out: Vec<NullModel> = Vec::new();
    for c in choices {
        let models: &[NullModel] = match c {
            NullChoice::All => &NullModel::ALL,
            NullChoice::Dr => &[NullModel::DieRolling],
            NullChoice::Rw => &[NullModel::RandomWalk],
            NullChoice::Pu => &[NullModel::PolyaUrn],
            NullChoice::Rp => &[NullModel::RandomPermutation],
        };
        for m in models {
            if !out.contains(m) {
                out.push(*m);
            }
        }
    }
    out.sort();
    out
}

fn polya_counting(choice: PolyaChoice) -> PolyaCounting {
    match choice {
        PolyaChoice::Balls => PolyaCounting::BallCounts,
        PolyaChoice::Draws => PolyaCounting::DrawCounts,
    }
}

/// A parsed `--filter` expression: a conjunction of simple conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowFilter {
    conditions: Vec<Condition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Condition {
    Order(usize),
    Dominant,
    Corpus,
    Kind(String),
}

const DOMINANT_KIND: &str = "dominant order";

impl RowFilter {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut conditions = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let cond = if part.eq_ignore_ascii_case("all") {
                continue;
            } else if part.eq_ignore_ascii_case("dominant") {
                Condition::Dominant
            } else if part.eq_ignore_ascii_case("corpus") {
                Condition::Corpus
            } else if let Some(v) = part.strip_prefix("n=") {
                Condition::Order(v.parse().map_err(|_| Error::Argument(format!("bad filter {part:?}")))?)
            } else if let Some(v) = part.strip_prefix("kind=") {
                Condition::Kind(v.to_string())
            } else {
                return Err(Error::Argument(format!(
                    "bad filter {part:?}; use all, n=<k>, dominant, corpus or kind=<text>"
                )));
            };
            conditions.push(cond);
        }
        Ok(RowFilter { conditions })
    }

    pub fn matches(&self, row: &DatasetRow) -> bool {
        self.conditions.iter().all(|c| match c {
            Condition::Order(n) => row.n == *n,
            Condition::Dominant => row.kind.eq_ignore_ascii_case(DOMINANT_KIND),
            Condition::Corpus => !row.kind.eq_ignore_ascii_case(DOMINANT_KIND),
            Condition::Kind(k) => row.kind == *k,
        })
    }
}

/// Two significant digits; scientific notation below 0.01. Upper bounds get
/// a `<` prefix.
pub fn format_pvalue(p: f64, is_upper_bound: bool) -> String {
    let body = if p >= 0.01 {
        let decimals = (1 - p.log10().floor() as i32).max(0) as usize;
        let s = format!("{p:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{p:.1e}");
        s.replace(".0e", "e")
    };
    if is_upper_bound {
        format!("<{body}")
    } else {
        body
    }
}

fn fmt_value(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.4}"),
        None => "NA".into(),
    }
}

/// Scores, expectations and tests of one dataset row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReport {
    pub database: String,
    pub kind: String,
    pub n: usize,
    pub structure: String,
    pub unit: String,
    pub total: f64,
    pub support: usize,
    pub dominance: f64,
    pub entropy: f64,
    pub entropy_pu: Option<f64>,
    pub entropy_dr: f64,
    pub entropy_rw: Option<f64>,
    pub entropy_max: f64,
    pub avg_swap_distance: f64,
    pub avg_swap_distance_rp: f64,
    pub avg_swap_distance_pu: Option<f64>,
    pub avg_swap_distance_dr: f64,
    pub avg_swap_distance_rw: Option<f64>,
    pub avg_swap_distance_max: f64,
    /// Standard errors of the Monte Carlo means, keyed `H_pu`, `d_rw`, ...
    pub monte_carlo_std_errors: BTreeMap<String, f64>,
    /// One entry per tested (score, null model) column; `None` when the
    /// null model does not apply to the row.
    pub tests: Vec<Option<TestResult>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub config: RunConfig,
    pub rows: Vec<RowReport>,
}

/// The (score, null model) pairs tested for the configured models. Entropy
/// is not tested against random permutations, which preserve it exactly.
fn test_columns(config: &RunConfig) -> Vec<(Score, NullModel)> {
    let mut out = Vec::new();
    for score in [Score::Entropy, Score::AvgSwapDistance] {
        for &model in &config.nulls {
            if !(score == Score::Entropy && model == NullModel::RandomPermutation) {
                out.push((score, model));
            }
        }
    }
    out
}

fn model_index(model: NullModel) -> u64 {
    NullModel::ALL.iter().position(|&m| m == model).unwrap() as u64
}

fn analyze_row(
    row_index: usize,
    row: &DatasetRow,
    g: &Permutohedron,
    config: &RunConfig,
) -> Result<RowReport> {
    let d = to_distribution(row, g)?;
    let total = d.total();
    let count_total = rounded_total(total);
    let h = entropy_plugin(&d);
    let avg = avg_swap_distance_of_freqs(g, d.freqs());

    let mut tests: Vec<TestResult> = Vec::new();
    let mut report = RowReport {
        database: row.database.clone(),
        kind: row.kind.clone(),
        n: row.n,
        structure: row.structure.clone(),
        unit: row.unit.clone(),
        total,
        support: d.support_size(),
        dominance: dominance(&d),
        entropy: h,
        entropy_pu: None,
        entropy_dr: expected_h_die_rolling(count_total.max(1), g.vertex_count())?,
        entropy_rw: None,
        entropy_max: (g.vertex_count() as f64).ln(),
        avg_swap_distance: avg,
        avg_swap_distance_rp: expected_d_random_permutation(g, &d)?,
        avg_swap_distance_pu: None,
        avg_swap_distance_dr: expected_d_die_rolling(count_total.max(1), g)?,
        avg_swap_distance_rw: None,
        avg_swap_distance_max: g.d_max() as f64 / 2.0,
        monte_carlo_std_errors: BTreeMap::new(),
        tests: Vec::new(),
    };

    for &model in &config.nulls {
        let stream = trial_seed(config.seed, row_index as u64 * NullModel::ALL.len() as u64 + model_index(model));
        let sampler = match NullSampler::new(model, g, &d, config.sampler_options()) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("row {row_index}: null model {model} skipped: {e}");
                continue;
            }
        };
        if model == NullModel::RandomPermutation {
            let result = if config.exact && g.order() == 3 {
                left_pvalue_exact_rp(g, &d)?
            } else {
                let values = sampler.simulate_scores(Score::AvgSwapDistance, config.trials, stream);
                mc_result(Score::AvgSwapDistance, model, avg, &values)?
            };
            tests.push(result);
            continue;
        }
        let (h_values, d_values) = sampler.simulate_both_scores(config.trials, stream);
        let h_summary = MonteCarloSummary::from_values(&h_values);
        let d_summary = MonteCarloSummary::from_values(&d_values);
        let code = model.code();
        match model {
            NullModel::PolyaUrn => {
                report.entropy_pu = Some(h_summary.mean);
                report.avg_swap_distance_pu = Some(d_summary.mean);
            }
            NullModel::RandomWalk => {
                report.entropy_rw = Some(h_summary.mean);
                report.avg_swap_distance_rw = Some(d_summary.mean);
            }
            _ => {}
        }
        if model != NullModel::DieRolling {
            report.monte_carlo_std_errors.insert(format!("H_{code}"), h_summary.std_error);
            report.monte_carlo_std_errors.insert(format!("d_{code}"), d_summary.std_error);
        }
        tests.push(mc_result(Score::Entropy, model, h, &h_values)?);
        tests.push(mc_result(Score::AvgSwapDistance, model, avg, &d_values)?);
    }
    report.tests = test_columns(config)
        .into_iter()
        .map(|(score, model)| tests.iter().find(|t| t.statistic == score && t.model == model).cloned())
        .collect();
    Ok(report)
}

fn mc_result(score: Score, model: NullModel, observed: f64, values: &[f64]) -> Result<TestResult> {
    let (p_left, is_upper_bound) = left_pvalue_from_values(observed, values)?;
    Ok(TestResult {
        statistic: score,
        observed,
        model,
        p_left,
        is_upper_bound,
        trials: values.len() as u64,
        exact: false,
        adjusted: None,
        adjusted_is_upper_bound: false,
    })
}

/// Graphs of the orders present in `rows`.
fn graphs_for(rows: &[&DatasetRow]) -> Result<BTreeMap<usize, Permutohedron>> {
    let mut graphs = BTreeMap::new();
    for row in rows {
        if let std::collections::btree_map::Entry::Vacant(slot) = graphs.entry(row.n) {
            slot.insert(Permutohedron::build(row.n)?);
        }
    }
    Ok(graphs)
}

/// Runs the analysis over the rows selected by the filter, then applies the
/// multiple-comparison correction column by column.
pub fn cmd_analyze(rows: &[DatasetRow], config: &RunConfig) -> Result<AnalysisReport> {
    if config.trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let filter = RowFilter::parse(&config.filter)?;
    let selected: Vec<(usize, &DatasetRow)> = rows.iter().enumerate().filter(|(_, r)| filter.matches(r)).collect();
    if selected.is_empty() {
        return Err(Error::Argument(format!("no dataset row matches filter {:?}", config.filter)));
    }
    let graphs = graphs_for(&selected.iter().map(|(_, r)| *r).collect::<Vec<_>>())?;
    let mut reports = selected
        .iter()
        .map(|&(i, row)| {
            analyze_row(i, row, &graphs[&row.n], config)
                .map_err(|e| e.context(format!("row {} ({})", i, row.title())))
        })
        .collect::<Result<Vec<RowReport>>>()?;

    for column in 0..test_columns(config).len() {
        let present: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].tests[column].is_some()).collect();
        if present.is_empty() {
            continue;
        }
        let raw: Vec<(f64, bool)> = present
            .iter()
            .map(|&i| reports[i].tests[column].as_ref().map(|t| (t.p_left, t.is_upper_bound)).unwrap())
            .collect();
        let adjusted = match config.correction {
            Correction::Holm => holm_correct_flagged(&raw)?,
            Correction::None => raw,
        };
        for (&i, (p, flag)) in present.iter().zip(adjusted) {
            let test = reports[i].tests[column].as_mut().unwrap();
            test.adjusted = Some(p);
            test.adjusted_is_upper_bound = flag;
        }
    }
    Ok(AnalysisReport { config: config.clone(), rows: reports })
}

impl AnalysisReport {
    pub fn to_tsv(&self) -> String {
        let columns = test_columns(&self.config);
        let random_walk = self.config.uses(NullModel::RandomWalk);
        let mut header = vec![
            "database", "kind", "n", "structure", "unit", "F", "m", "S_bar", "H", "H_pu", "H_dr",
        ];
        if random_walk {
            header.push("H_rw");
        }
        header.extend(["H_max", "d", "d_rp", "d_pu", "d_dr"]);
        if random_walk {
            header.push("d_rw");
        }
        header.push("d_max");
        let mut out = header.join("\t");
        for (score, model) in &columns {
            let _ = write!(out, "\tp_{}_{}\tp_{}_{}_raw", score.code(), model.code(), score.code(), model.code());
        }
        out.push('\n');

        for r in &self.rows {
            let mut fields = vec![
                r.database.clone(),
                r.kind.clone(),
                r.n.to_string(),
                r.structure.clone(),
                r.unit.clone(),
                format!("{}", r.total),
                r.support.to_string(),
                fmt_value(Some(r.dominance)),
                fmt_value(Some(r.entropy)),
                fmt_value(r.entropy_pu),
                fmt_value(Some(r.entropy_dr)),
            ];
            if random_walk {
                fields.push(fmt_value(r.entropy_rw));
            }
            fields.extend([
                fmt_value(Some(r.entropy_max)),
                fmt_value(Some(r.avg_swap_distance)),
                fmt_value(Some(r.avg_swap_distance_rp)),
                fmt_value(r.avg_swap_distance_pu),
                fmt_value(Some(r.avg_swap_distance_dr)),
            ]);
            if random_walk {
                fields.push(fmt_value(r.avg_swap_distance_rw));
            }
            fields.push(fmt_value(Some(r.avg_swap_distance_max)));
            for t in &r.tests {
                match t {
                    Some(t) => {
                        fields.push(format_pvalue(t.adjusted.unwrap_or(t.p_left), t.adjusted_is_upper_bound));
                        fields.push(format_pvalue(t.p_left, t.is_upper_bound));
                    }
                    None => fields.extend(["NA".to_string(), "NA".to_string()]),
                }
            }
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Paired observed scores and null expectations, with the test on them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WilcoxonReport {
    pub score: Score,
    pub model: NullModel,
    pub filter: String,
    pub rows: Vec<String>,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    pub result: WilcoxonResult,
}

impl WilcoxonReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("score\tnull\tfilter\trows\tn_eff\tV\tp_left\tp_exact\tp_normal\n");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.score.code(),
            self.model.code(),
            self.filter,
            self.rows.len(),
            self.result.n_eff,
            self.result.v,
            format_pvalue(self.result.p_left, false),
            self.result.p_exact.map_or("NA".into(), |p| format_pvalue(p, false)),
            format_pvalue(self.result.p_normal, false),
        );
        out
    }
}

/// Null expectation of `score` for one row: closed forms for die rolling and
/// random permutations, Monte Carlo means otherwise.
fn expectation(
    row_index: usize,
    g: &Permutohedron,
    d: &OrderDistribution,
    score: Score,
    model: NullModel,
    config: &RunConfig,
) -> Result<f64> {
    let total = rounded_total(d.total()).max(1);
    match (score, model) {
        (Score::Entropy, NullModel::DieRolling) => expected_h_die_rolling(total, g.vertex_count()),
        (Score::AvgSwapDistance, NullModel::DieRolling) => expected_d_die_rolling(total, g),
        (Score::Entropy, NullModel::RandomPermutation) => Ok(entropy_plugin(d)),
        (Score::AvgSwapDistance, NullModel::RandomPermutation) => expected_d_random_permutation(g, d),
        _ => {
            let stream = trial_seed(config.seed, row_index as u64 * NullModel::ALL.len() as u64 + model_index(model));
            let sampler = NullSampler::new(model, g, d, config.sampler_options())?;
            let values = sampler.simulate_scores(score, config.trials, stream);
            Ok(MonteCarloSummary::from_values(&values).mean)
        }
    }
}

pub fn cmd_wilcoxon(rows: &[DatasetRow], config: &RunConfig, score: Score, model: NullModel) -> Result<WilcoxonReport> {
    let filter = RowFilter::parse(&config.filter)?;
    let selected: Vec<(usize, &DatasetRow)> = rows.iter().enumerate().filter(|(_, r)| filter.matches(r)).collect();
    if selected.is_empty() {
        return Err(Error::Argument(format!("no dataset row matches filter {:?}", config.filter)));
    }
    let graphs = graphs_for(&selected.iter().map(|(_, r)| *r).collect::<Vec<_>>())?;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    for &(i, row) in &selected {
        let g = &graphs[&row.n];
        let d = to_distribution(row, g).map_err(|e| e.context(format!("row {i} ({})", row.title())))?;
        observed.push(score.evaluate(g, d.freqs()));
        expected.push(
            expectation(i, g, &d, score, model, config).map_err(|e| e.context(format!("row {i} ({})", row.title())))?,
        );
    }
    let result = wilcoxon_left(&observed, &expected)?;
    Ok(WilcoxonReport {
        score,
        model,
        filter: config.filter.clone(),
        rows: selected.iter().map(|(_, r)| r.title()).collect(),
        observed,
        expected,
        result,
    })
}

pub fn cmd_power(args: &PowerArgs) -> Result<String> {
    let g = Permutohedron::build(args.n)?;
    let json = args.output.format == OutputFormat::Json;
    if args.automorphisms {
        let pa = compute_pa(&g)?;
        return Ok(if json {
            serde_json::to_string_pretty(&serde_json::json!({
                "n": args.n,
                "numerator": pa.numer().to_string(),
                "denominator": pa.denom().to_string(),
            }))? + "\n"
        } else {
            format!("n\tp_a\n{}\t{}/{}\n", args.n, pa.numer(), pa.denom())
        });
    }
    if args.counterexample {
        let c = find_multiset_counterexample(&g)?;
        return Ok(if json {
            serde_json::to_string_pretty(&c)? + "\n"
        } else {
            let multiset = c.multiset.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            format!(
                "mask\tmultiset\tp_m\n{}\t{{{multiset}}}\t{}/{}\n{}\t{{{multiset}}}\t{}/{}\n",
                c.first_labels.join(";"),
                c.first_probability.0,
                c.first_probability.1,
                c.second_labels.join(";"),
                c.second_probability.0,
                c.second_probability.1,
            )
        });
    }
    if args.minimum {
        let rows = min_pm_by_size(&g)?;
        return Ok(if json {
            let entries: Vec<_> = rows
                .iter()
                .map(|(m, p)| serde_json::json!({"m": m, "numerator": p.numer(), "denominator": p.denom()}))
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({"n": args.n, "minimum": entries}))? + "\n"
        } else {
            let mut out = String::from("n\tm\tmin_p_m\n");
            for (m, p) in rows {
                let _ = writeln!(out, "{}\t{m}\t{}/{}", args.n, p.numer(), p.denom());
            }
            out
        });
    }
    let sizes: Vec<usize> = match args.m {
        Some(m) => vec![m],
        None => (1..=if args.n == 4 { crate::powerbound::MAX_MASK_SIZE_N4 } else { g.vertex_count() }).collect(),
    };
    let tables = sizes.iter().map(|&m| compute_pm(&g, m)).collect::<Result<Vec<_>>>()?;
    if json {
        return Ok(serde_json::to_string_pretty(&tables)? + "\n");
    }
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        let tsv = t.to_tsv();
        // One header for the concatenated tables.
        let body = if i == 0 { tsv.as_str() } else { tsv.split_once('\n').map_or("", |(_, b)| b) };
        out.push_str(body);
    }
    Ok(out)
}

pub fn cmd_spectra(args: &SpectraArgs) -> Result<String> {
    if args.n > crate::spectral::DEFAULT_MAX_ORDER && !args.allow_large {
        return Err(Error::Argument(format!(
            "n = {} builds a {}-row dense matrix; pass --allow-large to run it",
            args.n,
            crate::permutohedron::factorial(args.n.min(20))
        )));
    }
    let g = Permutohedron::build(args.n)?;
    let report = spectrum_report(&g, args.allow_large)?;
    Ok(match args.output.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        OutputFormat::Tsv => report.to_tsv(),
    })
}

pub fn cmd_graph(args: &GraphArgs) -> Result<String> {
    let g = Permutohedron::build(args.n)?;
    let weights = match (&args.input, args.row) {
        (Some(path), Some(index)) => {
            let rows = load(path)?;
            let row = rows.get(index).ok_or_else(|| {
                Error::Argument(format!("row {index} out of range ({} rows in {})", rows.len(), path.display()))
            })?;
            Some(to_distribution(row, &g)?)
        }
        _ => None,
    };
    g.export_dot(weights.as_ref())
}

fn run_config(simulation: &SimulationArgs) -> RunConfig {
    RunConfig {
        trials: simulation.trials,
        seed: simulation.seed,
        filter: simulation.filter.clone(),
        polya_counting: polya_counting(simulation.polya_counting),
        walk_steps: simulation.walk_steps,
        ..RunConfig::default()
    }
}

/// Executes a parsed command line. Returns the rendered output and the
/// optional destination file.
pub fn run(cli: &Cli) -> Result<(String, Option<PathBuf>)> {
    match &cli.command {
        Command::Analyze(args) => {
            let config = RunConfig {
                alpha: args.alpha,
                correction: args.correction,
                exact: args.exact,
                nulls: expand_nulls(&args.null),
                ..run_config(&args.simulation)
            };
            let rows = load(&args.input)?;
            let report = cmd_analyze(&rows, &config)?;
            let text = match args.output.format {
                OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
                OutputFormat::Tsv => report.to_tsv(),
            };
            Ok((text, args.output.output.clone()))
        }
        Command::Wilcoxon(args) => {
            let config = run_config(&args.simulation);
            let model = match args.null {
                NullChoice::All => return Err(Error::Argument("the Wilcoxon test takes a single null model".into())),
                other => expand_nulls(&[other])[0],
            };
            let rows = load(&args.input)?;
            let report = cmd_wilcoxon(&rows, &config, args.score.into(), model)?;
            let text = match args.output.format {
                OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
                OutputFormat::Tsv => report.to_tsv(),
            };
            Ok((text, args.output.output.clone()))
        }
        Command::Power(args) => Ok((cmd_power(args)?, args.output.output.clone())),
        Command::Spectra(args) => Ok((cmd_spectra(args)?, args.output.output.clone())),
        Command::Graph(args) => Ok((cmd_graph(args)?, args.output.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn pvalue_formatting() {
        let cases = [
            (0.2134, false, "0.21"),
            (0.05, false, "0.05"),
            (0.1, false, "0.1"),
            (1.0, false, "1"),
            (0.0096, false, "9.6e-3"),
            (1e-5, false, "1e-5"),
            (1.5e-6, true, "<1.5e-6"),
            (1e-7, true, "<1e-7"),
            (0.0999, false, "0.1"),
            (6.2e-3, false, "6.2e-3"),
        ];
        for (p, flag, expected) in cases {
            assert_eq!(format_pvalue(p, flag), expected, "{p}");
        }
    }

    #[test]
    fn trials_parsing() {
        assert_eq!(parse_trials("1e6"), Ok(1_000_000));
        assert_eq!(parse_trials("1_000"), Ok(1000));
        assert_eq!(parse_trials("250"), Ok(250));
        assert!(parse_trials("0").is_err());
        assert!(parse_trials("1.5").is_err());
        assert!(parse_trials("x").is_err());
    }

    #[test]
    fn filters() {
        let row = |n: usize, kind: &str| DatasetRow {
            database: "X".into(),
            kind: kind.into(),
            n,
            structure: if n == 3 { "SOV".into() } else { "SOVI".into() },
            unit: "u".into(),
            orders: vec![],
        };
        let f = RowFilter::parse("n=4").unwrap();
        assert!(f.matches(&row(4, "corpus")) && !f.matches(&row(3, "corpus")));
        let f = RowFilter::parse("dominant").unwrap();
        assert!(f.matches(&row(3, "dominant order")) && !f.matches(&row(3, "experiments")));
        let f = RowFilter::parse("corpus,n=3").unwrap();
        assert!(f.matches(&row(3, "experiments")) && !f.matches(&row(4, "experiments")));
        assert!(RowFilter::parse("all").unwrap().matches(&row(3, "x")));
        assert!(RowFilter::parse("kind=experiments").unwrap().matches(&row(3, "experiments")));
        assert!(RowFilter::parse("size=3").is_err());
        assert!(RowFilter::parse("n=x").is_err());
    }

    #[test]
    fn null_expansion() {
        assert_eq!(expand_nulls(&[NullChoice::All]), NullModel::ALL.to_vec());
        assert_eq!(
            expand_nulls(&[NullChoice::Rp, NullChoice::Dr, NullChoice::Rp]),
            vec![NullModel::DieRolling, NullModel::RandomPermutation]
        );
    }
}
