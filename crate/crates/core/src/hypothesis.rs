//! Left-tailed significance tests: Monte Carlo and exact permutation
//! p-values, Holm's step-down correction and the left-sided Wilcoxon
//! signed-rank test.
//!
//! Monte Carlo p-values count simulated scores `x' <= x` (ties included, so
//! ties make the test conservative). A zero count is reported as `1/T` with
//! the upper-bound flag set.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::measures::{avg_swap_distance_of_freqs, OrderDistribution};
use crate::nullmodels::{NullModel, NullSampler, Score};
use crate::permutohedron::{factorial, hamiltonian_enumeration, Permutohedron};

/// Relative slack when comparing scores, so that values equal up to
/// floating-point rounding count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest sample size for which the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// `a <= b` up to [`TIE_TOLERANCE`].
pub fn le_with_ties(a: f64, b: f64) -> bool {
    a <= b + TIE_TOLERANCE * b.abs().max(1.0)
}

/// `a == b` up to [`TIE_TOLERANCE`].
pub fn eq_with_ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: Score,
    pub observed: f64,
    pub model: NullModel,
    pub p_left: f64,
    /// The estimate hit zero and was replaced by `1/T`.
    pub is_upper_bound: bool,
    /// Monte Carlo trials, or the number of enumerated permutations for an
    /// exact test.
    pub trials: u64,
    pub exact: bool,
    pub adjusted: Option<f64>,
    pub adjusted_is_upper_bound: bool,
}

/// Left p-value of `observed` against already simulated null scores.
pub fn left_pvalue_from_values(observed: f64, null_scores: &[f64]) -> Result<(f64, bool)> {
    if null_scores.is_empty() {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let hits = null_scores.iter().filter(|&&x| le_with_ties(x, observed)).count();
    let t = null_scores.len() as f64;
    if hits == 0 {
        Ok((1.0 / t, true))
    } else {
        Ok((hits as f64 / t, false))
    }
}

/// Monte Carlo left p-value over `trials` samples of `sampler`.
pub fn left_pvalue_mc(
    observed: f64,
    sampler: &NullSampler<'_>,
    score: Score,
    trials: u64,
    seed: u64,
) -> Result<TestResult> {
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let values = sampler.simulate_scores(score, trials, seed);
    let (p_left, is_upper_bound) = left_pvalue_from_values(observed, &values)?;
    Ok(TestResult {
        statistic: score,
        observed,
        model: sampler.model(),
        p_left,
        is_upper_bound,
        trials,
        exact: false,
        adjusted: None,
        adjusted_is_upper_bound: false,
    })
}

/// `<d>` of every rearrangement of the frequency vector across the `N = 6`
/// vertices of the order-3 permutohedron.
fn permuted_scores_n3(g: &Permutohedron, d: &OrderDistribution) -> Result<Vec<f64>> {
    if g.order() != 3 || d.order() != 3 {
        return Err(Error::Unsupported(format!(
            "exact permutation test needs n = 3 (got n = {}); enable the Monte Carlo fallback",
            d.order()
        )));
    }
    let freqs = d.freqs();
    let mut buf = vec![0.0; freqs.len()];
    Ok(hamiltonian_enumeration(freqs.len())?
        .iter()
        .map(|perm| {
            for (slot, &e) in buf.iter_mut().zip(perm.elements()) {
                *slot = freqs[e as usize - 1];
            }
            avg_swap_distance_of_freqs(g, &buf)
        })
        .collect())
}

/// Exact left p-value of the random-permutation test on `<d>`, by
/// enumerating all `N!` rearrangements (n = 3 only).
pub fn left_pvalue_exact_rp(g: &Permutohedron, d: &OrderDistribution) -> Result<TestResult> {
    let scores = permuted_scores_n3(g, d)?;
    let observed = avg_swap_distance_of_freqs(g, d.freqs());
    let hits = scores.iter().filter(|&&x| le_with_ties(x, observed)).count();
    Ok(TestResult {
        statistic: Score::AvgSwapDistance,
        observed,
        model: NullModel::RandomPermutation,
        p_left: hits as f64 / scores.len() as f64,
        is_upper_bound: false,
        trials: scores.len() as u64,
        exact: true,
        adjusted: None,
        adjusted_is_upper_bound: false,
    })
}

/// Random-permutation test on `<d>`: exact for n = 3 when requested,
/// otherwise Monte Carlo if `allow_monte_carlo`, otherwise unsupported.
pub fn left_pvalue_rp(
    g: &Permutohedron,
    d: &OrderDistribution,
    exact: bool,
    allow_monte_carlo: bool,
    trials: u64,
    seed: u64,
    sampler: &NullSampler<'_>,
) -> Result<TestResult> {
    if exact && g.order() == 3 {
        return left_pvalue_exact_rp(g, d);
    }
    if !allow_monte_carlo {
        return Err(Error::Unsupported(format!(
            "exact permutation test is limited to n = 3 ({}! = {} rearrangements at n = {})",
            g.vertex_count(),
            if g.vertex_count() <= 20 { factorial(g.vertex_count()).to_string() } else { "too many".into() },
            g.order()
        )));
    }
    let observed = avg_swap_distance_of_freqs(g, d.freqs());
    left_pvalue_mc(observed, sampler, Score::AvgSwapDistance, trials, seed)
}

/// Proportion of the `N!` rearrangements that leave `<d>` unchanged (n = 3,
/// exact enumeration).
pub fn unchanged_proportion_exact(g: &Permutohedron, d: &OrderDistribution) -> Result<f64> {
    let scores = permuted_scores_n3(g, d)?;
    let observed = avg_swap_distance_of_freqs(g, d.freqs());
    let same = scores.iter().filter(|&&x| eq_with_ties(x, observed)).count();
    Ok(same as f64 / scores.len() as f64)
}

/// Holm's step-down adjustment. The output is in input order.
pub fn holm_correct(pvalues: &[f64]) -> Result<Vec<f64>> {
    let flagged: Vec<(f64, bool)> = pvalues.iter().map(|&p| (p, false)).collect();
    Ok(holm_correct_flagged(&flagged)?.into_iter().map(|(p, _)| p).collect())
}

/// Holm adjustment carrying an upper-bound flag: an adjusted value is an
/// upper bound when the raw value that determines it is one.
pub fn holm_correct_flagged(pvalues: &[(f64, bool)]) -> Result<Vec<(f64, bool)>> {
    if pvalues.is_empty() {
        return Err(Error::Argument("Holm correction of an empty set of p-values".into()));
    }
    if let Some((p, _)) = pvalues.iter().find(|(p, _)| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::Argument(format!("p-value {p} outside (0, 1]")));
    }
    let k = pvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| pvalues[a].0.total_cmp(&pvalues[b].0));

    let mut adjusted = vec![(0.0, false); k];
    let mut running = (0.0f64, false);
    for (rank, &idx) in order.iter().enumerate() {
        let (p, flag) = pvalues[idx];
        let candidate = ((k - rank) as f64 * p).min(1.0);
        if candidate > running.0 {
            running = (candidate, flag);
        } else if candidate == running.0 {
            running.1 |= flag;
        }
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub v: f64,
    /// Pairs left after dropping zero differences.
    pub n_eff: usize,
    /// Exact p-value when `n_eff <= WILCOXON_EXACT_MAX`, else the normal
    /// approximation.
    pub p_left: f64,
    pub p_exact: Option<f64>,
    pub p_normal: f64,
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Left-sided Wilcoxon signed-rank test of `x` against paired `x_null`: small
/// p-values indicate `x` tends to lie below `x_null`.
pub fn wilcoxon_left(x: &[f64], x_null: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != x_null.len() {
        return Err(Error::Dimension { expected: x.len(), got: x_null.len() });
    }
    let diffs: Vec<f64> = x.iter().zip(x_null).map(|(a, b)| a - b).filter(|&d| d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::UndefinedTest("all paired differences are zero".into()));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let v: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    // Doubled midranks are integers, so the null distribution of 2V can be
    // tabulated exactly over all 2^n sign assignments.
    let p_exact = (n <= WILCOXON_EXACT_MAX).then(|| {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let threshold = (2.0 * v).round() as usize;
        let below: u64 = counts[..=threshold.min(max_sum)].iter().sum();
        below as f64 / (1u64 << n) as f64
    });

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties_term += t * t * t - t;
        i = j + 1;
    }
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties_term / 48.0;
    let z = (v - mean + 0.5) / variance.sqrt();
    let p_normal = Normal::standard().cdf(z);

    Ok(WilcoxonResult { v, n_eff: n, p_left: p_exact.unwrap_or(p_normal), p_exact, p_normal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullmodels::SamplerOptions;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn holm_examples() {
        let adj = holm_correct(&[0.01, 0.04]).unwrap();
        assert!((adj[0] - 0.02).abs() < 1e-15 && (adj[1] - 0.04).abs() < 1e-15);
        assert_eq!(holm_correct(&[0.3]).unwrap(), vec![0.3]);
        let adj = holm_correct(&[0.03, 0.03]).unwrap();
        assert!((adj[0] - 0.06).abs() < 1e-15 && (adj[1] - 0.06).abs() < 1e-15);
        assert!(holm_correct(&[]).is_err());
        assert!(holm_correct(&[0.0]).is_err());
        assert!(holm_correct(&[1.5]).is_err());
        // Input order is preserved and values cap at one.
        let adj = holm_correct(&[0.9, 0.01, 0.5]).unwrap();
        assert_eq!(adj, vec![1.0, 0.03, 1.0]);
    }

    #[test]
    fn holm_flags_follow_the_determining_value() {
        let raw = vec![(1e-7, true); 15];
        let adj = holm_correct_flagged(&raw).unwrap();
        for (p, flag) in adj {
            assert!((p - 1.5e-6).abs() < 1e-18);
            assert!(flag);
        }
        let adj = holm_correct_flagged(&[(1e-6, true), (0.2, false)]).unwrap();
        assert_eq!(adj, vec![(2e-6, true), (0.2, false)]);
    }

    proptest! {
        #[test]
        fn holm_monotone_and_dominating(p in prop::collection::vec(1e-9f64..=1.0, 1..30)) {
            let adj = holm_correct(&p).unwrap();
            let mut pairs: Vec<(f64, f64)> = p.iter().copied().zip(adj.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            for (raw, a) in pairs {
                prop_assert!(a >= raw && a <= 1.0);
            }
        }
    }

    #[test]
    fn mc_pvalue_edges() {
        assert_eq!(left_pvalue_from_values(-1.0, &[0.0, 1.0, 2.0, 3.0]).unwrap(), (0.25, true));
        assert_eq!(left_pvalue_from_values(3.0, &[0.0, 1.0, 2.0, 3.0]).unwrap(), (1.0, false));
        assert_eq!(left_pvalue_from_values(1.0, &[0.0, 1.0, 2.0, 3.0]).unwrap(), (0.5, false));
        assert!(left_pvalue_from_values(1.0, &[]).is_err());
    }

    #[test]
    fn mc_pvalue_at_null_median() {
        let g = Permutohedron::build(3).unwrap();
        let d = OrderDistribution::new(3, vec![10.0, 5.0, 3.0, 1.0, 1.0, 0.0]).unwrap();
        let sampler = NullSampler::new(NullModel::DieRolling, &g, &d, SamplerOptions::default()).unwrap();
        let mut values = sampler.simulate_scores(Score::AvgSwapDistance, 20_001, 1);
        values.sort_by(f64::total_cmp);
        let median = values[10_000];
        let r = left_pvalue_mc(median, &sampler, Score::AvgSwapDistance, 20_000, 77).unwrap();
        // Discrete scores: the mass of the median atom widens the window.
        assert!((r.p_left - 0.5).abs() < 0.1, "{}", r.p_left);
        assert!(!r.is_upper_bound);
    }

    #[test]
    fn exact_rp_examples() {
        let g = Permutohedron::build(3).unwrap();
        let u = OrderDistribution::uniform(3).unwrap();
        assert_eq!(left_pvalue_exact_rp(&g, &u).unwrap().p_left, 1.0);
        let point = OrderDistribution::point_mass(3, 1).unwrap();
        assert_eq!(left_pvalue_exact_rp(&g, &point).unwrap().p_left, 1.0);
        let d = OrderDistribution::new(3, vec![0.31, 0.22, 0.17, 0.13, 0.1, 0.07]).unwrap();
        let r = left_pvalue_exact_rp(&g, &d).unwrap();
        assert!(r.p_left >= 1.0 / 60.0 && r.exact && r.trials == 720);

        let g4 = Permutohedron::build(4).unwrap();
        let d4 = OrderDistribution::uniform(4).unwrap();
        assert!(matches!(left_pvalue_exact_rp(&g4, &d4), Err(Error::Unsupported(_))));
        let sampler = NullSampler::new(NullModel::RandomPermutation, &g4, &d4, SamplerOptions::default()).unwrap();
        assert!(left_pvalue_rp(&g4, &d4, true, false, 10, 1, &sampler).is_err());
        let r = left_pvalue_rp(&g4, &d4, true, true, 10, 1, &sampler).unwrap();
        assert_eq!(r.p_left, 1.0);
        assert!(!r.exact);
    }

    #[test]
    fn wilcoxon_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let null: Vec<f64> = x.iter().map(|v| v + 1.0 + v * 0.1).collect();
        let r = wilcoxon_left(&x, &null).unwrap();
        assert_eq!(r.v, 0.0);
        assert_eq!(r.n_eff, 10);
        assert_eq!(r.p_left, 1.0 / 1024.0);

        let r = wilcoxon_left(&[2.0], &[1.0]).unwrap();
        assert_eq!((r.v, r.p_left), (1.0, 1.0));
        let r = wilcoxon_left(&[1.0], &[2.0]).unwrap();
        assert_eq!((r.v, r.p_left), (0.0, 0.5));

        assert!(matches!(wilcoxon_left(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::UndefinedTest(_))));
        assert!(wilcoxon_left(&[1.0], &[1.0, 2.0]).is_err());

        // Zero differences are dropped.
        let r = wilcoxon_left(&[1.0, 5.0, 3.0], &[1.0, 6.0, 4.0]).unwrap();
        assert_eq!(r.n_eff, 2);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn brute_force_left(ranks: &[f64], v: f64) -> f64 {
        let n = ranks.len();
        let mut below = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= v + 1e-9 {
                below += 1;
            }
        }
        below as f64 / (1u64 << n) as f64
    }

    #[test]
    fn exact_distribution_matches_sign_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(1..=12);
            // Integer-valued differences give plenty of ties.
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
            let zeros = vec![0.0; n];
            let Ok(r) = wilcoxon_left(&x, &zeros) else { continue };
            let nonzero: Vec<f64> = x.iter().copied().filter(|&d| d != 0.0).map(f64::abs).collect();
            let ranks = midranks(&nonzero);
            assert!((r.p_exact.unwrap() - brute_force_left(&ranks, r.v)).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_approximation_close_at_twenty() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let x: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.4).collect();
            let r = wilcoxon_left(&x, &[0.0; 20]).unwrap();
            assert!((r.p_exact.unwrap() - r.p_normal).abs() < 0.01, "{r:?}");
        }
    }

    #[test]
    fn large_samples_use_normal() {
        let x: Vec<f64> = (0..25).map(|i| i as f64 - 5.0).collect();
        let r = wilcoxon_left(&x, &[0.5; 25]).unwrap();
        assert!(r.p_exact.is_none());
        assert_eq!(r.p_left, r.p_normal);
    }
}
