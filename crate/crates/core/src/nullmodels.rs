//! Synthetic frequency vectors under the four null hypotheses, closed-form
//! expectations where they exist, and the Monte Carlo driver.
//!
//! Every trial draws from its own generator, seeded from the master seed and
//! the trial index through a mixing function. Trials can therefore run in
//! any order on any number of threads and still produce the same values,
//! which are reduced in trial order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::measures::{avg_swap_distance_of_freqs, entropy_of_freqs, simpson, OrderDistribution};
use crate::permutohedron::Permutohedron;

/// Largest total for which the die-rolling entropy expectation is summed
/// exactly; above it a Monte Carlo estimate is used.
pub const MAX_EXACT_ENTROPY_TOTAL: u64 = 50_000_000;

/// Trials used by the Monte Carlo fallback of [`expected_h_die_rolling`].
const ENTROPY_FALLBACK_TRIALS: u64 = 20_000;
const ENTROPY_FALLBACK_SEED: u64 = 0x005e_ed0f_d1e5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NullModel {
    DieRolling,
    RandomWalk,
    PolyaUrn,
    RandomPermutation,
}

impl NullModel {
    pub const ALL: [NullModel; 4] = [
        NullModel::DieRolling,
        NullModel::RandomWalk,
        NullModel::PolyaUrn,
        NullModel::RandomPermutation,
    ];

    /// Short code used in column names and on the command line.
    pub fn code(self) -> &'static str {
        match self {
            NullModel::DieRolling => "dr",
            NullModel::RandomWalk => "rw",
            NullModel::PolyaUrn => "pu",
            NullModel::RandomPermutation => "rp",
        }
    }
}

impl fmt::Display for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for NullModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(NullModel::DieRolling),
            "rw" => Ok(NullModel::RandomWalk),
            "pu" => Ok(NullModel::PolyaUrn),
            "rp" => Ok(NullModel::RandomPermutation),
            other => Err(Error::Argument(format!("unknown null model {other:?}"))),
        }
    }
}

/// Test statistic evaluated on a frequency vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Score {
    Entropy,
    AvgSwapDistance,
}

impl Score {
    pub fn code(self) -> &'static str {
        match self {
            Score::Entropy => "H",
            Score::AvgSwapDistance => "d",
        }
    }

    pub fn evaluate(self, g: &Permutohedron, freqs: &[f64]) -> f64 {
        match self {
            Score::Entropy => entropy_of_freqs(freqs),
            Score::AvgSwapDistance => avg_swap_distance_of_freqs(g, freqs),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// What the Polya urn reports as the frequency of a color.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyaCounting {
    /// Final number of balls of each color, seed ball included.
    #[default]
    BallCounts,
    /// Number of draws of each color, i.e. ball counts minus one.
    DrawCounts,
}

/// One synthetic frequency vector and the seed that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullModelSample {
    pub model: NullModel,
    pub freqs: Vec<f64>,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under master seed `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rounds a possibly non-integer total to the count used by count-based
/// null models.
pub fn rounded_total(total: f64) -> u64 {
    total.round().max(0.0) as u64
}

fn multinomial_uniform<R: Rng>(total: u64, bins: usize, rng: &mut R, out: &mut [f64]) {
    let mut remaining = total;
    for (i, slot) in out.iter_mut().enumerate().take(bins) {
        if i + 1 == bins {
            *slot = remaining as f64;
            break;
        }
        let k = if remaining == 0 {
            0
        } else {
            let p = 1.0 / (bins - i) as f64;
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        *slot = k as f64;
        remaining -= k;
    }
}

fn polya_counts<R: Rng>(total: u64, bins: usize, counting: PolyaCounting, rng: &mut R, out: &mut [f64]) {
    let mut balls: Vec<u32> = Vec::with_capacity(total as usize);
    balls.extend(0..bins as u32);
    let mut counts = vec![1u64; bins];
    while (balls.len() as u64) < total {
        let drawn = balls[rng.random_range(0..balls.len())];
        balls.push(drawn);
        counts[drawn as usize] += 1;
    }
    let offset = match counting {
        PolyaCounting::BallCounts => 0,
        PolyaCounting::DrawCounts => 1,
    };
    for (slot, c) in out.iter_mut().zip(counts) {
        *slot = (c - offset) as f64;
    }
}

fn walk<R: Rng>(g: &Permutohedron, start: usize, steps: u64, rng: &mut R, mut visit: impl FnMut(usize)) {
    let mut current = start;
    visit(current);
    for _ in 1..steps {
        let nbrs = g.neighbors(current);
        if !nbrs.is_empty() {
            current = nbrs[rng.random_range(0..nbrs.len())];
        }
        visit(current);
    }
}

/// Frequencies of `total` rolls of a fair die with one face per vertex.
pub fn die_rolling(total: u64, g: &Permutohedron, seed: u64) -> Result<NullModelSample> {
    if total == 0 {
        return Err(Error::Argument("die rolling needs at least one roll".into()));
    }
    let mut freqs = vec![0.0; g.vertex_count()];
    multinomial_uniform(total, g.vertex_count(), &mut rng_from_seed(seed), &mut freqs);
    Ok(NullModelSample { model: NullModel::DieRolling, freqs, seed })
}

/// Polya urn starting from one ball per vertex, drawing a ball uniformly and
/// adding a copy of it until the urn holds `total` balls.
pub fn polya_urn(
    total: u64,
    g: &Permutohedron,
    seed: u64,
    counting: PolyaCounting,
) -> Result<NullModelSample> {
    let bins = g.vertex_count() as u64;
    let minimum = match counting {
        PolyaCounting::BallCounts => bins,
        PolyaCounting::DrawCounts => bins + 1,
    };
    if total < minimum {
        return Err(Error::Argument(format!(
            "Polya urn needs a total of at least {minimum} balls for {bins} colors, got {total}"
        )));
    }
    let mut freqs = vec![0.0; g.vertex_count()];
    polya_counts(total, g.vertex_count(), counting, &mut rng_from_seed(seed), &mut freqs);
    Ok(NullModelSample { model: NullModel::PolyaUrn, freqs, seed })
}

/// Uniformly random shuffle of the observed frequencies across vertices.
pub fn random_permutation(d: &OrderDistribution, seed: u64) -> NullModelSample {
    let mut freqs = d.freqs().to_vec();
    freqs.shuffle(&mut rng_from_seed(seed));
    NullModelSample { model: NullModel::RandomPermutation, freqs, seed }
}

/// Vertices visited by an unbiased walk of `steps` visits starting at `start`.
pub fn random_walk_path(g: &Permutohedron, start: usize, steps: u64, seed: u64) -> Result<Vec<usize>> {
    check_walk(g, start, steps)?;
    let mut path = Vec::with_capacity(steps as usize);
    walk(g, start, steps, &mut rng_from_seed(seed), |v| path.push(v));
    Ok(path)
}

/// Visit counts of an unbiased random walk of `steps` visits.
pub fn random_walk(g: &Permutohedron, start: usize, steps: u64, seed: u64) -> Result<NullModelSample> {
    check_walk(g, start, steps)?;
    let mut freqs = vec![0.0; g.vertex_count()];
    walk(g, start, steps, &mut rng_from_seed(seed), |v| freqs[v] += 1.0);
    Ok(NullModelSample { model: NullModel::RandomWalk, freqs, seed })
}

fn check_walk(g: &Permutohedron, start: usize, steps: u64) -> Result<()> {
    if steps == 0 {
        return Err(Error::Argument("random walk needs at least one step".into()));
    }
    if start >= g.vertex_count() {
        return Err(Error::Argument(format!("start vertex {start} out of range")));
    }
    Ok(())
}

/// `(F - 1)/F · d_max/2`, the die-rolling expectation of `<d>`.
pub fn expected_d_die_rolling(total: u64, g: &Permutohedron) -> Result<f64> {
    if total == 0 {
        return Err(Error::Argument("die rolling needs at least one roll".into()));
    }
    let f = total as f64;
    Ok((f - 1.0) / f * g.d_max() as f64 / 2.0)
}

/// `S̄ · N/(N - 1) · d_max/2`, the expectation of `<d>` over uniformly random
/// shuffles of the frequencies.
pub fn expected_d_random_permutation(g: &Permutohedron, d: &OrderDistribution) -> Result<f64> {
    if d.order() != g.order() {
        return Err(Error::Dimension { expected: g.order(), got: d.order() });
    }
    let n = g.vertex_count() as f64;
    if g.vertex_count() == 1 {
        return Ok(0.0);
    }
    Ok((1.0 - simpson(d)) * n / (n - 1.0) * g.d_max() as f64 / 2.0)
}

/// Die-rolling expectation of the plug-in entropy over `bins` equiprobable
/// faces: `log F - (N/F) Σ_{a=2}^{F} Binom(a; F, 1/N) a log a`, with the
/// binomial weights evaluated in log space.
pub fn expected_h_die_rolling(total: u64, bins: usize) -> Result<f64> {
    if total == 0 || bins == 0 {
        return Err(Error::Argument("die rolling needs F >= 1 and N >= 1".into()));
    }
    if bins == 1 || total == 1 {
        return Ok(0.0);
    }
    if total > MAX_EXACT_ENTROPY_TOTAL {
        log::warn!(
            "F = {total} too large for the exact entropy sum; using {ENTROPY_FALLBACK_TRIALS} Monte Carlo trials"
        );
        let values: Vec<f64> = (0..ENTROPY_FALLBACK_TRIALS)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(trial_seed(ENTROPY_FALLBACK_SEED, t));
                let mut freqs = vec![0.0; bins];
                multinomial_uniform(total, bins, &mut rng, &mut freqs);
                entropy_of_freqs(&freqs)
            })
            .collect();
        return Ok(neumaier_sum(&values) / values.len() as f64);
    }
    let f = total as f64;
    let ln_q = -(bins as f64).ln();
    let ln_1mq = (1.0 - 1.0 / bins as f64).ln();
    let terms: Vec<f64> = (2..=total)
        .map(|a| {
            let ln_pmf = ln_binomial(total, a) + a as f64 * ln_q + (total - a) as f64 * ln_1mq;
            let af = a as f64;
            (ln_pmf + af.ln() + af.ln().ln()).exp()
        })
        .collect();
    Ok(f.ln() - bins as f64 / f * neumaier_sum(&terms))
}

/// Compensated (Neumaier) summation in slice order.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Options shared by the samplers that need them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub polya_counting: PolyaCounting,
    /// Number of visits of a random walk; `None` uses the rounded total `F`.
    pub walk_steps: Option<u64>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { polya_counting: PolyaCounting::BallCounts, walk_steps: None }
    }
}

/// Draws synthetic frequency vectors for one observed distribution under one
/// null model.
#[derive(Clone, Debug)]
pub struct NullSampler<'g> {
    model: NullModel,
    graph: &'g Permutohedron,
    observed: Vec<f64>,
    total: u64,
    options: SamplerOptions,
}

impl<'g> NullSampler<'g> {
    pub fn new(
        model: NullModel,
        graph: &'g Permutohedron,
        observed: &OrderDistribution,
        options: SamplerOptions,
    ) -> Result<Self> {
        if observed.order() != graph.order() {
            return Err(Error::Dimension { expected: graph.order(), got: observed.order() });
        }
        let total = rounded_total(observed.total());
        let bins = graph.vertex_count() as u64;
        match model {
            NullModel::DieRolling if total == 0 => {
                return Err(Error::Argument("rounded total F is zero".into()))
            }
            NullModel::PolyaUrn => {
                let minimum = match options.polya_counting {
                    PolyaCounting::BallCounts => bins,
                    PolyaCounting::DrawCounts => bins + 1,
                };
                if total < minimum {
                    return Err(Error::Argument(format!(
                        "Polya urn needs F >= {minimum} for N = {bins}, got F = {total}"
                    )));
                }
            }
            NullModel::RandomWalk if options.walk_steps.unwrap_or(total) == 0 => {
                return Err(Error::Argument("random walk needs at least one step".into()))
            }
            _ => {}
        }
        Ok(NullSampler { model, graph, observed: observed.freqs().to_vec(), total, options })
    }

    pub fn model(&self) -> NullModel {
        self.model
    }

    pub fn graph(&self) -> &'g Permutohedron {
        self.graph
    }

    /// Fills `out` (length `N`) with one sample drawn from `rng`.
    pub fn draw_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let bins = self.graph.vertex_count();
        match self.model {
            NullModel::DieRolling => multinomial_uniform(self.total, bins, rng, out),
            NullModel::PolyaUrn => polya_counts(self.total, bins, self.options.polya_counting, rng, out),
            NullModel::RandomPermutation => {
                out.copy_from_slice(&self.observed);
                out.shuffle(rng);
            }
            NullModel::RandomWalk => {
                out.iter_mut().for_each(|x| *x = 0.0);
                let start = rng.random_range(0..bins);
                let steps = self.options.walk_steps.unwrap_or(self.total);
                walk(self.graph, start, steps, rng, |v| out[v] += 1.0);
            }
        }
    }

    /// The sample of trial `trial` under master seed `master`.
    pub fn sample(&self, master: u64, trial: u64) -> NullModelSample {
        let seed = trial_seed(master, trial);
        let mut freqs = vec![0.0; self.graph.vertex_count()];
        self.draw_into(&mut rng_from_seed(seed), &mut freqs);
        NullModelSample { model: self.model, freqs, seed }
    }

    /// Score of every trial `0..trials`, in trial order.
    pub fn simulate_scores(&self, score: Score, trials: u64, master: u64) -> Vec<f64> {
        (0..trials)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.graph.vertex_count()],
                |buf, t| {
                    self.draw_into(&mut rng_from_seed(trial_seed(master, t)), buf);
                    score.evaluate(self.graph, buf)
                },
            )
            .collect()
    }

    /// Entropy and `<d>` of every trial, both taken from the same sample.
    pub fn simulate_both_scores(&self, trials: u64, master: u64) -> (Vec<f64>, Vec<f64>) {
        (0..trials)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.graph.vertex_count()],
                |buf, t| {
                    self.draw_into(&mut rng_from_seed(trial_seed(master, t)), buf);
                    (entropy_of_freqs(buf), avg_swap_distance_of_freqs(self.graph, buf))
                },
            )
            .unzip()
    }
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl MonteCarloSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let t = values.len() as f64;
        let mean = neumaier_sum(values) / t;
        let deviations: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let variance = if values.len() > 1 { neumaier_sum(&deviations) / (t - 1.0) } else { 0.0 };
        MonteCarloSummary { mean, std_error: (variance / t).sqrt(), trials: values.len() as u64 }
    }
}

pub fn monte_carlo_expectation(
    sampler: &NullSampler<'_>,
    score: Score,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    Ok(MonteCarloSummary::from_values(&sampler.simulate_scores(score, trials, seed)))
}

/// Null-model expectations of both scores for one dataset row. Monte Carlo
/// entries are `None` when that model was not simulated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValues {
    pub d_dr: f64,
    pub d_rp: f64,
    pub d_pu: Option<f64>,
    pub d_rw: Option<f64>,
    pub h_dr: f64,
    pub h_pu: Option<f64>,
    pub h_rw: Option<f64>,
    pub trials_used: u64,
}
