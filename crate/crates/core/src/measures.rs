//! Diversity scores of a frequency distribution over the vertices of a
//! permutohedron: plug-in entropy, Simpson and dominance indices, average
//! swap distance and its decompositions.
//!
//! All logarithms are natural, so entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutohedron::{factorial, Permutation, Permutohedron, MAX_ORDER};

/// Nonnegative frequencies `f_i` indexed by vertex id (Lehmer rank), plus the
/// element names used to print orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDistribution {
    n: usize,
    labels: Vec<char>,
    freqs: Vec<f64>,
}

impl OrderDistribution {
    /// Distribution with digit labels `1..=n`.
    pub fn new(n: usize, freqs: Vec<f64>) -> Result<Self> {
        if n == 0 || n > 9 {
            return Err(Error::Size { n, min: 1, max: 9 });
        }
        let labels = (1..=n as u32).map(|d| char::from_digit(d, 10).unwrap()).collect();
        Self::with_labels(labels, freqs)
    }

    /// Distribution whose element `k` (1-based) is printed as `labels[k - 1]`.
    pub fn with_labels(labels: Vec<char>, freqs: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 || n > MAX_ORDER {
            return Err(Error::Size { n, min: 1, max: MAX_ORDER });
        }
        let expected = factorial(n) as usize;
        if freqs.len() != expected {
            return Err(Error::Dimension { expected, got: freqs.len() });
        }
        if let Some(bad) = freqs.iter().find(|f| !f.is_finite() || **f < 0.0) {
            return Err(Error::Argument(format!("frequency {bad} is not a finite nonnegative number")));
        }
        if !freqs.iter().any(|&f| f > 0.0) {
            return Err(Error::Argument("all frequencies are zero".into()));
        }
        Ok(OrderDistribution { n, labels, freqs })
    }

    /// All mass on one vertex.
    pub fn point_mass(n: usize, vertex: usize) -> Result<Self> {
        let len = factorial(n) as usize;
        if vertex >= len {
            return Err(Error::Argument(format!("vertex {vertex} out of range")));
        }
        let mut freqs = vec![0.0; len];
        freqs[vertex] = 1.0;
        Self::new(n, freqs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(n, vec![1.0; factorial(n) as usize])
    }

    /// Same labels, different frequency vector.
    pub fn with_freqs(&self, freqs: Vec<f64>) -> Result<Self> {
        Self::with_labels(self.labels.clone(), freqs)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of vertices `N`.
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// `F = Σ f_i`.
    pub fn total(&self) -> f64 {
        self.freqs.iter().sum()
    }

    /// `m`, the number of strictly positive frequencies.
    pub fn support_size(&self) -> usize {
        self.freqs.iter().filter(|&&f| f > 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.freqs.len()).filter(|&i| self.freqs[i] > 0.0).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        self.freqs.iter().map(|f| f / total).collect()
    }

    /// Order label such as `SOV` for a permutation of `1..=n`.
    pub fn vertex_label(&self, p: &Permutation) -> String {
        p.elements().iter().map(|&e| self.labels[e as usize - 1]).collect()
    }

    fn check_graph(&self, g: &Permutohedron) -> Result<()> {
        if g.order() != self.n {
            return Err(Error::Dimension { expected: g.order(), got: self.n });
        }
        Ok(())
    }
}

/// Plug-in entropy `log F - (1/F) Σ f_i log f_i` of a raw frequency vector,
/// with `0 log 0 = 0`. The caller guarantees a positive total.
pub fn entropy_of_freqs(freqs: &[f64]) -> f64 {
    let total: f64 = freqs.iter().sum();
    // Same value as `-Σ p_i log p_i`; this form is exactly zero for a single
    // order and every term is nonnegative.
    freqs
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| {
            let p = f / total;
            -p * p.ln()
        })
        .sum()
}

pub fn entropy_plugin(d: &OrderDistribution) -> f64 {
    entropy_of_freqs(d.freqs())
}

/// Simpson index `S = Σ p_i²`.
pub fn simpson(d: &OrderDistribution) -> f64 {
    simpson_of_freqs(d.freqs())
}

pub fn simpson_of_freqs(freqs: &[f64]) -> f64 {
    let total: f64 = freqs.iter().sum();
    freqs.iter().map(|f| (f / total).powi(2)).sum()
}

/// Dominance index `1 - S`.
pub fn dominance(d: &OrderDistribution) -> f64 {
    1.0 - simpson(d)
}

/// `<d> = (1/F²) Σ_i f_i Σ_j f_j d_ij` for a raw frequency vector of length
/// `N`. The caller guarantees matching dimensions and a positive total.
pub fn avg_swap_distance_of_freqs(g: &Permutohedron, freqs: &[f64]) -> f64 {
    let total: f64 = freqs.iter().sum();
    let mut acc = 0.0;
    for (i, &fi) in freqs.iter().enumerate() {
        if fi == 0.0 {
            continue;
        }
        let row = g.distance_row(i);
        let inner: f64 = freqs
            .iter()
            .zip(row)
            .map(|(&fj, &dij)| fj * dij as f64)
            .sum();
        acc += fi * inner;
    }
    acc / (total * total)
}

/// Average swap distance `<d>`.
pub fn avg_swap_distance(g: &Permutohedron, d: &OrderDistribution) -> Result<f64> {
    d.check_graph(g)?;
    Ok(avg_swap_distance_of_freqs(g, d.freqs()))
}

/// Mean swap distance from a source order, `<d|i> = Σ_j d_ij p_j`.
pub fn conditional_mean(g: &Permutohedron, d: &OrderDistribution, source: usize) -> Result<f64> {
    d.check_graph(g)?;
    if source >= g.vertex_count() {
        return Err(Error::Argument(format!("vertex {source} out of range")));
    }
    let p = d.probabilities();
    Ok(g.distance_row(source)
        .iter()
        .zip(&p)
        .map(|(&dij, pj)| dij as f64 * pj)
        .sum())
}

/// Probability mass `P(k)` that two independent draws lie at distance `k`,
/// for `k` in `0..=d_max`.
pub fn distance_spectrum(g: &Permutohedron, d: &OrderDistribution) -> Result<Vec<f64>> {
    d.check_graph(g)?;
    let p = d.probabilities();
    let mut spectrum = vec![0.0; g.d_max() + 1];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (&dij, &pj) in g.distance_row(i).iter().zip(&p) {
            spectrum[dij as usize] += pi * pj;
        }
    }
    Ok(spectrum)
}

/// The six vertices of the order-3 permutohedron in cyclic order around the
/// hexagon, starting at vertex 0 and stepping first to its lower-ranked
/// neighbor. Opposite positions `k` and `k + 3` are reversals of each other.
pub fn hexagon_ring(g: &Permutohedron) -> Result<[usize; 6]> {
    if g.order() != 3 {
        return Err(Error::Unsupported(format!("hexagon ring needs n = 3, got n = {}", g.order())));
    }
    let mut ring = [0usize; 6];
    let mut prev = usize::MAX;
    let mut current = 0usize;
    for slot in ring.iter_mut() {
        *slot = current;
        let mut next: Vec<usize> = g.neighbors(current).iter().copied().filter(|&v| v != prev).collect();
        next.sort_unstable();
        prev = current;
        current = next[0];
    }
    Ok(ring)
}

/// `Δ` of the compact order-3 form `<d> = (3 - Δ)/2`, computed from
/// `q_k = p_{ring[k]} - p_{ring[k+3]}` around the hexagon.
pub fn delta_n3(g: &Permutohedron, d: &OrderDistribution) -> Result<f64> {
    d.check_graph(g)?;
    let ring = hexagon_ring(g)?;
    let p = d.probabilities();
    let q: Vec<f64> = (0..3).map(|k| p[ring[k]] - p[ring[k + 3]]).collect();
    let (q1, q2, q3) = (q[0], q[1], q[2]);
    Ok(q1 * q1 + q2 * q2 + q3 * q3 + (q1 + q2).powi(2) + (q2 + q3).powi(2) + (q1 - q3).powi(2))
}

/// Rényi entropy `R_α = log(Σ p_i^α) / (1 - α)` for `α ≥ 0`, `α ≠ 1`.
pub fn renyi_entropy(d: &OrderDistribution, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::Argument(format!("alpha must be a finite nonnegative number, got {alpha}")));
    }
    if alpha == 1.0 {
        return Err(Error::Argument(
            "alpha = 1 is the Shannon limit; use entropy_plugin".into(),
        ));
    }
    let sum: f64 = d
        .probabilities()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p.powf(alpha))
        .sum();
    Ok(sum.ln() / (1.0 - alpha))
}

/// Scores of one distribution, without any null-model expectations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub total: f64,
    pub support: usize,
    pub simpson: f64,
    pub dominance: f64,
    pub entropy: f64,
    pub entropy_max: f64,
    pub avg_swap_distance: f64,
    pub avg_swap_distance_max: f64,
    pub spectrum: Vec<f64>,
}

pub fn diversity_report(g: &Permutohedron, d: &OrderDistribution) -> Result<DiversityReport> {
    let simpson = simpson(d);
    Ok(DiversityReport {
        total: d.total(),
        support: d.support_size(),
        simpson,
        dominance: 1.0 - simpson,
        entropy: entropy_plugin(d),
        entropy_max: (g.vertex_count() as f64).ln(),
        avg_swap_distance: avg_swap_distance(g, d)?,
        avg_swap_distance_max: g.d_max() as f64 / 2.0,
        spectrum: distance_spectrum(g, d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g3() -> Permutohedron {
        Permutohedron::build(3).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert!(OrderDistribution::new(3, vec![0.0; 6]).is_err());
        assert!(OrderDistribution::new(3, vec![1.0; 5]).is_err());
        assert!(OrderDistribution::new(3, vec![-1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(OrderDistribution::new(3, vec![f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        let single = OrderDistribution::point_mass(3, 2).unwrap();
        assert_eq!(entropy_plugin(&single), 0.0);
        let uniform = OrderDistribution::uniform(3).unwrap();
        assert!((entropy_plugin(&uniform) - 6f64.ln()).abs() < 1e-12);
        let d = OrderDistribution::new(3, vec![2.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = 4f64.ln() - 2.0 * 2f64.ln() / 4.0;
        assert!((entropy_plugin(&d) - expected).abs() < 1e-12);
        assert!((expected - 1.0397207708399179).abs() < 1e-12);
    }

    #[test]
    fn simpson_examples() {
        let single = OrderDistribution::point_mass(3, 0).unwrap();
        assert_eq!((simpson(&single), dominance(&single)), (1.0, 0.0));
        let d = OrderDistribution::new(3, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((simpson(&d) - 0.5).abs() < 1e-15);
        let d = OrderDistribution::new(4, (0..24).map(|i| if i % 3 == 0 { 2.5 } else { 0.0 }).collect()).unwrap();
        assert!((simpson(&d) - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn swap_distance_examples() {
        let g = g3();
        assert_eq!(avg_swap_distance(&g, &OrderDistribution::point_mass(3, 4).unwrap()).unwrap(), 0.0);
        let u = OrderDistribution::uniform(3).unwrap();
        assert!((avg_swap_distance(&g, &u).unwrap() - 1.5).abs() < 1e-15);

        let g4 = Permutohedron::build(4).unwrap();
        let mut f = vec![0.0; 24];
        f[5] = 1.0;
        f[g4.reversal(5)] = 1.0;
        let d = OrderDistribution::new(4, f).unwrap();
        assert!((avg_swap_distance(&g4, &d).unwrap() - 3.0).abs() < 1e-15);

        assert!(avg_swap_distance(&g4, &u).is_err());
    }

    #[test]
    fn conditional_mean_examples() {
        let g = g3();
        let u = OrderDistribution::uniform(3).unwrap();
        for i in 0..6 {
            assert!((conditional_mean(&g, &u, i).unwrap() - 1.5).abs() < 1e-15);
        }
        let point = OrderDistribution::point_mass(3, 1).unwrap();
        assert_eq!(conditional_mean(&g, &point, 1).unwrap(), 0.0);
        assert_eq!(conditional_mean(&g, &point, g.reversal(1)).unwrap(), 3.0);
        assert!(conditional_mean(&g, &point, 6).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let g = g3();
        let s = distance_spectrum(&g, &OrderDistribution::point_mass(3, 3).unwrap()).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0]);
        let s = distance_spectrum(&g, &OrderDistribution::uniform(3).unwrap()).unwrap();
        for (got, want) in s.iter().zip([1.0, 2.0, 2.0, 1.0]) {
            assert!((got - want / 6.0).abs() < 1e-15);
        }
        let mut f = vec![0.0; 6];
        f[0] = 1.0;
        f[5] = 1.0;
        let s = distance_spectrum(&g, &OrderDistribution::new(3, f).unwrap()).unwrap();
        assert_eq!(s, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn ring_is_a_hexagon_with_antipodes() {
        let g = g3();
        let ring = hexagon_ring(&g).unwrap();
        for k in 0..6 {
            assert_eq!(g.distance(ring[k], ring[(k + 1) % 6]), 1);
        }
        for k in 0..3 {
            assert_eq!(ring[k + 3], g.reversal(ring[k]));
        }
        assert!(hexagon_ring(&Permutohedron::build(4).unwrap()).is_err());
    }

    #[test]
    fn delta_examples() {
        let g = g3();
        let u = OrderDistribution::uniform(3).unwrap();
        assert!(delta_n3(&g, &u).unwrap().abs() < 1e-15);
        for v in 0..6 {
            let d = OrderDistribution::point_mass(3, v).unwrap();
            assert!((delta_n3(&g, &d).unwrap() - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn renyi_examples() {
        let u = OrderDistribution::uniform(3).unwrap();
        assert!((renyi_entropy(&u, 2.0).unwrap() - 6f64.ln()).abs() < 1e-12);
        let d = OrderDistribution::new(3, vec![3.0, 1.0, 0.0, 2.0, 0.0, 0.5]).unwrap();
        assert!((renyi_entropy(&d, 2.0).unwrap() + simpson(&d).ln()).abs() < 1e-12);
        assert!((renyi_entropy(&d, 0.0).unwrap() - 4f64.ln()).abs() < 1e-12);
        let h = entropy_plugin(&d);
        assert!((renyi_entropy(&d, 1.0 + 1e-4).unwrap() - h).abs() < 1e-3);
        assert!((renyi_entropy(&d, 1.0 - 1e-4).unwrap() - h).abs() < 1e-3);
        assert!(renyi_entropy(&d, 1.0).is_err());
        assert!(renyi_entropy(&d, -0.5).is_err());
    }

    #[test]
    fn labels_render_orders() {
        let d = OrderDistribution::with_labels(vec!['S', 'O', 'V'], vec![1.0; 6]).unwrap();
        let p = Permutation::new(vec![1, 3, 2]).unwrap();
        assert_eq!(d.vertex_label(&p), "SVO");
    }

    fn freqs_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..100.0], len)
            .prop_filter("positive total", |v| v.iter().any(|&x| x > 1e-9))
    }

    proptest! {
        #[test]
        fn spectrum_identities(f in freqs_strategy(24)) {
            let g = Permutohedron::build(4).unwrap();
            let d = OrderDistribution::new(4, f).unwrap();
            let s = distance_spectrum(&g, &d).unwrap();
            let avg = avg_swap_distance(&g, &d).unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((s[0] - simpson(&d)).abs() < 1e-12);
            let mean: f64 = s.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            prop_assert!((mean - avg).abs() < 1e-12);
        }

        #[test]
        fn scale_invariance(f in freqs_strategy(6), c in 1e-3f64..1e3) {
            let g = Permutohedron::build(3).unwrap();
            let d = OrderDistribution::new(3, f.clone()).unwrap();
            let scaled = OrderDistribution::new(3, f.iter().map(|x| x * c).collect()).unwrap();
            prop_assert!((entropy_plugin(&d) - entropy_plugin(&scaled)).abs() < 1e-9);
            prop_assert!((simpson(&d) - simpson(&scaled)).abs() < 1e-12);
            prop_assert!((avg_swap_distance(&g, &d).unwrap() - avg_swap_distance(&g, &scaled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn entropy_bounded_by_log_support(f in freqs_strategy(6)) {
            let d = OrderDistribution::new(3, f).unwrap();
            let h = entropy_plugin(&d);
            let m = d.support_size();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (m as f64).ln() + 1e-12);
            prop_assert_eq!(h == 0.0, m == 1);
        }

        #[test]
        fn conditional_means_complement_and_average(f in freqs_strategy(6)) {
            let g = Permutohedron::build(3).unwrap();
            let d = OrderDistribution::new(3, f).unwrap();
            let p = d.probabilities();
            let mut weighted = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                let ci = conditional_mean(&g, &d, i).unwrap();
                let cr = conditional_mean(&g, &d, g.reversal(i)).unwrap();
                prop_assert!((ci + cr - 3.0).abs() < 1e-12);
                weighted += pi * ci;
            }
            prop_assert!((weighted - avg_swap_distance(&g, &d).unwrap()).abs() < 1e-12);
        }
    }
}
