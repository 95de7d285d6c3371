//! Lower bounds on the left p-value of the random-permutation test.
//!
//! A mask is the support of a probability vector. Two vertex sequences of
//! the same length are equivalent when their induced ordered distance
//! matrices coincide, since then `<d>` is the same quadratic form of the
//! probabilities. For a mask realised by sequence `s`, the proportion of
//! sequences equivalent to `s` bounds the permutation-test p-value from
//! below. By vertex transitivity it suffices to enumerate sequences that
//! start at a fixed vertex.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypothesis::{eq_with_ties, unchanged_proportion_exact};
use crate::measures::{avg_swap_distance_of_freqs, OrderDistribution};
use crate::nullmodels::{rng_from_seed, trial_seed};
use crate::permutohedron::{automorphism_count, Permutation, Permutohedron, MAX_AUTOMORPHISM_ORDER};

/// Largest mask size enumerated at n = 4.
pub const MAX_MASK_SIZE_N4: usize = 5;

/// A set of distinct vertices, kept in the order given.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Mask {
    vertices: Vec<usize>,
}

impl Mask {
    pub fn new(g: &Permutohedron, vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Argument("a mask needs at least one vertex".into()));
        }
        let mut seen = vec![false; g.vertex_count()];
        for &v in &vertices {
            if v >= g.vertex_count() {
                return Err(Error::Argument(format!("vertex {v} out of range")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Argument(format!("vertex {v} repeated in mask")));
            }
        }
        Ok(Mask { vertices })
    }

    /// Mask from order labels written as digit strings, e.g. `["1234", "2134"]`.
    pub fn from_labels(g: &Permutohedron, labels: &[&str]) -> Result<Self> {
        let vertices = labels
            .iter()
            .map(|label| {
                let elements = label
                    .chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as u8)
                            .ok_or_else(|| Error::Argument(format!("bad order label {label:?}")))
                    })
                    .collect::<Result<Vec<u8>>>()?;
                g.vertex_of(&Permutation::new(elements)?)
            })
            .collect::<Result<Vec<usize>>>()?;
        Mask::new(g, vertices)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Sorted multiset of pairwise distances.
    pub fn distance_multiset(&self, g: &Permutohedron) -> Vec<usize> {
        let mut out = upper_triangle(g, &self.vertices).into_iter().map(usize::from).collect::<Vec<_>>();
        out.sort_unstable();
        out
    }
}

/// Row-major upper triangle of the distance matrix induced by `seq`.
fn upper_triangle(g: &Permutohedron, seq: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(seq.len() * seq.len().saturating_sub(1) / 2);
    for (i, &u) in seq.iter().enumerate() {
        let row = g.distance_row(u);
        out.extend(seq[i + 1..].iter().map(|&v| row[v]));
    }
    out
}

/// One equivalence class of vertex sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaskClass {
    /// First sequence of the class in lexicographic enumeration order.
    pub representative: Vec<usize>,
    pub representative_labels: Vec<String>,
    /// Induced distances `d(s_i, s_j)` for `i < j`, row-major.
    pub pattern: Vec<u8>,
    pub multiset: Vec<usize>,
    /// Every class sharing this multiset has the same probability.
    pub multiset_determines_probability: bool,
    pub size: u64,
    /// Class size over the number of sequences, not reduced.
    pub numerator: u64,
    pub denominator: u64,
}

impl MaskClass {
    pub fn probability(&self) -> Ratio<u64> {
        Ratio::new(self.numerator, self.denominator)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaskClassTable {
    pub n: usize,
    pub m: usize,
    /// Number of sequences enumerated.
    pub sequences: u64,
    pub classes: Vec<MaskClass>,
    #[serde(skip)]
    index: HashMap<Vec<u8>, usize>,
}

impl MaskClassTable {
    /// Probability of the class containing `seq` (any starting vertex).
    pub fn probability_of(&self, g: &Permutohedron, seq: &[usize]) -> Result<Ratio<u64>> {
        if seq.len() != self.m {
            return Err(Error::Dimension { expected: self.m, got: seq.len() });
        }
        self.class_of(g, seq).map(MaskClass::probability)
    }

    pub fn mask_probability(&self, g: &Permutohedron, mask: &Mask) -> Result<Ratio<u64>> {
        self.probability_of(g, mask.vertices())
    }

    /// Class containing `seq` (any starting vertex).
    pub fn class_of(&self, g: &Permutohedron, seq: &[usize]) -> Result<&MaskClass> {
        if seq.len() != self.m {
            return Err(Error::Dimension { expected: self.m, got: seq.len() });
        }
        self.index
            .get(&upper_triangle(g, seq))
            .map(|&i| &self.classes[i])
            .ok_or_else(|| Error::Argument("sequence does not consist of distinct vertices".into()))
    }

    /// Distinct class probabilities in increasing order.
    pub fn distinct_probabilities(&self) -> Vec<Ratio<u64>> {
        let mut out: Vec<Ratio<u64>> = self.classes.iter().map(MaskClass::probability).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn min_probability(&self) -> Ratio<u64> {
        self.classes.iter().map(MaskClass::probability).min().expect("at least one class")
    }

    /// Distance multisets grouped by probability, as `(P_m, multisets)`.
    pub fn multisets_by_probability(&self) -> Vec<(Ratio<u64>, Vec<Vec<usize>>)> {
        let mut groups: BTreeMap<Ratio<u64>, Vec<Vec<usize>>> = BTreeMap::new();
        for c in &self.classes {
            let entry = groups.entry(c.probability()).or_default();
            if !entry.contains(&c.multiset) {
                entry.push(c.multiset.clone());
            }
        }
        groups
            .into_iter()
            .map(|(p, mut sets)| {
                sets.sort();
                (p, sets)
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("n\tm\tp_m\tclass_size\tsequences\tmultiset\tmultiset_determines_p_m\trepresentative\n");
        for c in &self.classes {
            let p = c.probability();
            let multiset = c.multiset.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            out.push_str(&format!(
                "{}\t{}\t{}/{}\t{}\t{}\t{{{}}}\t{}\t{}\n",
                self.n,
                self.m,
                p.numer(),
                p.denom(),
                c.size,
                self.sequences,
                multiset,
                c.multiset_determines_probability,
                c.representative_labels.join(";")
            ));
        }
        out
    }
}

fn check_gate(g: &Permutohedron, m: usize) -> Result<()> {
    let n = g.order();
    if !(3..=4).contains(&n) {
        return Err(Error::Cost(format!("mask classes are enumerated for n = 3 or 4 only (got n = {n})")));
    }
    if m == 0 || m > g.vertex_count() {
        return Err(Error::Argument(format!("mask size must lie in 1..={} (got {m})", g.vertex_count())));
    }
    if n == 4 && m > MAX_MASK_SIZE_N4 {
        return Err(Error::Cost(format!("n = 4 is limited to mask sizes up to {MAX_MASK_SIZE_N4} (got {m})")));
    }
    Ok(())
}

/// Visits every sequence of `m` distinct vertices whose first vertex is one
/// of `starts`, in lexicographic order.
fn for_each_sequence(g: &Permutohedron, m: usize, starts: &[usize], mut visit: impl FnMut(&[usize])) {
    fn extend(n: usize, m: usize, seq: &mut Vec<usize>, used: &mut [bool], visit: &mut impl FnMut(&[usize])) {
        if seq.len() == m {
            visit(seq);
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                seq.push(v);
                extend(n, m, seq, used, visit);
                seq.pop();
                used[v] = false;
            }
        }
    }
    let mut used = vec![false; g.vertex_count()];
    let mut seq = Vec::with_capacity(m);
    for &s in starts {
        used[s] = true;
        seq.push(s);
        extend(g.vertex_count(), m, &mut seq, &mut used, &mut visit);
        seq.pop();
        used[s] = false;
    }
}

fn classify(g: &Permutohedron, m: usize, starts: &[usize]) -> MaskClassTable {
    let mut buckets: HashMap<Vec<u8>, (u64, Vec<usize>)> = HashMap::new();
    let mut total = 0u64;
    for_each_sequence(g, m, starts, |seq| {
        total += 1;
        buckets.entry(upper_triangle(g, seq)).or_insert_with(|| (0, seq.to_vec())).0 += 1;
    });

    let mut classes: Vec<MaskClass> = buckets
        .into_iter()
        .map(|(pattern, (size, representative))| {
            let mut multiset: Vec<usize> = pattern.iter().map(|&d| usize::from(d)).collect();
            multiset.sort_unstable();
            MaskClass {
                representative_labels: representative.iter().map(|&v| g.vertex(v).to_string()).collect(),
                representative,
                pattern,
                multiset,
                multiset_determines_probability: true,
                size,
                numerator: size,
                denominator: total,
            }
        })
        .collect();
    classes.sort_by(|a, b| {
        a.probability().cmp(&b.probability()).then_with(|| a.multiset.cmp(&b.multiset)).then_with(|| a.pattern.cmp(&b.pattern))
    });

    let mut by_multiset: HashMap<&[usize], Vec<Ratio<u64>>> = HashMap::new();
    for c in &classes {
        by_multiset.entry(&c.multiset).or_default().push(c.probability());
    }
    let ambiguous: Vec<Vec<usize>> = by_multiset
        .into_iter()
        .filter(|(_, ps)| ps.iter().any(|p| *p != ps[0]))
        .map(|(k, _)| k.to_vec())
        .collect();
    for c in &mut classes {
        c.multiset_determines_probability = !ambiguous.contains(&c.multiset);
    }

    let index = classes.iter().enumerate().map(|(i, c)| (c.pattern.clone(), i)).collect();
    MaskClassTable { n: g.order(), m, sequences: total, classes, index }
}

/// Mask classes of size `m` with their probabilities, enumerating sequences
/// that start at vertex 0.
pub fn compute_pm(g: &Permutohedron, m: usize) -> Result<MaskClassTable> {
    check_gate(g, m)?;
    Ok(classify(g, m, &[0]))
}

/// Same as [`compute_pm`] but enumerating sequences from every starting
/// vertex. Only used to confirm that fixing the first vertex is harmless.
pub fn compute_pm_all_starts(g: &Permutohedron, m: usize) -> Result<MaskClassTable> {
    check_gate(g, m)?;
    let starts: Vec<usize> = (0..g.vertex_count()).collect();
    Ok(classify(g, m, &starts))
}

/// Smallest class probability for every feasible mask size.
pub fn min_pm_by_size(g: &Permutohedron) -> Result<Vec<(usize, Ratio<u64>)>> {
    let max_m = if g.order() == 4 { MAX_MASK_SIZE_N4 } else { g.vertex_count() };
    (1..=max_m).map(|m| Ok((m, compute_pm(g, m)?.min_probability()))).collect()
}

/// Proportion of the `N!` vertex permutations that are automorphisms.
pub fn compute_pa(g: &Permutohedron) -> Result<BigRational> {
    if g.order() > MAX_AUTOMORPHISM_ORDER {
        return Err(Error::Cost(format!(
            "automorphisms are counted up to n = {MAX_AUTOMORPHISM_ORDER} (got n = {})",
            g.order()
        )));
    }
    let count = automorphism_count(g)?;
    let total: BigUint = (1..=g.vertex_count() as u64).map(BigUint::from).product();
    Ok(BigRational::new(BigUint::from(count).into(), total.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnchangedProportion {
    pub value: f64,
    pub exact: bool,
    pub trials: u64,
}

/// Proportion of frequency-vector permutations that leave `<d>` unchanged:
/// exact at n = 3, Monte Carlo over `trials` shuffles otherwise.
pub fn p_equal(g: &Permutohedron, d: &OrderDistribution, trials: u64, seed: u64) -> Result<UnchangedProportion> {
    if g.order() == 3 {
        return Ok(UnchangedProportion { value: unchanged_proportion_exact(g, d)?, exact: true, trials: 720 });
    }
    if d.order() != g.order() {
        return Err(Error::Dimension { expected: g.order(), got: d.order() });
    }
    if trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    let observed = avg_swap_distance_of_freqs(g, d.freqs());
    let mut buf = d.freqs().to_vec();
    let mut same = 0u64;
    for t in 0..trials {
        buf.copy_from_slice(d.freqs());
        buf.shuffle(&mut rng_from_seed(trial_seed(seed, t)));
        if eq_with_ties(avg_swap_distance_of_freqs(g, &buf), observed) {
            same += 1;
        }
    }
    Ok(UnchangedProportion { value: same as f64 / trials as f64, exact: false, trials })
}

/// Two masks whose pairwise-distance multisets agree but whose classes have
/// different probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultisetCounterexample {
    pub first: Mask,
    pub second: Mask,
    pub first_labels: Vec<String>,
    pub second_labels: Vec<String>,
    pub multiset: Vec<usize>,
    /// Class sizes over the number of sequences, not reduced.
    pub first_probability: (u64, u64),
    pub second_probability: (u64, u64),
}

/// Searches 4-vertex masks of the order-4 permutohedron containing vertex 0
/// for two with the same distance multiset and different probabilities.
pub fn find_multiset_counterexample(g: &Permutohedron) -> Result<MultisetCounterexample> {
    if g.order() != 4 {
        return Err(Error::Argument(format!("the search runs on n = 4 (got n = {})", g.order())));
    }
    let table = compute_pm(g, 4)?;
    let n = g.vertex_count();
    let mut seen: BTreeMap<Vec<usize>, (Vec<usize>, u64)> = BTreeMap::new();
    for a in 1..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let mask = Mask::new(g, vec![0, a, b, c])?;
                let p = table.class_of(g, mask.vertices())?.size;
                let multiset = mask.distance_multiset(g);
                match seen.get(&multiset) {
                    Some((other, q)) if *q != p => {
                        let first = Mask::new(g, other.clone())?;
                        let labels = |m: &Mask| m.vertices().iter().map(|&v| g.vertex(v).to_string()).collect();
                        return Ok(MultisetCounterexample {
                            first_labels: labels(&first),
                            second_labels: labels(&mask),
                            first,
                            second: mask,
                            multiset,
                            first_probability: (*q, table.sequences),
                            second_probability: (p, table.sequences),
                        });
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(multiset, (mask.vertices().to_vec(), p));
                    }
                }
            }
        }
    }
    Err(Error::SearchExhausted("every distance multiset determines its class probability".into()))
}
