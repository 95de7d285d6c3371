//! Eigenvalue certificate for the bound `<d> <= d_max / 2`.
//!
//! If `D - (d_max/2) O` is negative semidefinite (`O` all ones) then
//! `p^T D p <= d_max/2` for every `p` summing to one. The eigenvalues are
//! computed with cyclic Jacobi rotations on the dense matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::permutohedron::Permutohedron;

/// Largest order handled unless the caller opts in.
pub const DEFAULT_MAX_ORDER: usize = 6;

/// Relative off-diagonal norm at which Jacobi iteration stops.
pub const DEFAULT_JACOBI_TOLERANCE: f64 = 1e-13;

pub const MAX_SWEEPS: usize = 100;

/// Relative tolerance for the semidefiniteness test, scaled by `‖M‖∞`.
pub const SEMIDEFINITE_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance when grouping eigenvalues.
pub const GROUPING_TOLERANCE: f64 = 1e-6;

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedMatrix {
    n: usize,
    size: usize,
    entries: Vec<f64>,
}

impl ShiftedMatrix {
    /// Arbitrary symmetric matrix; `n` is reported as 0.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::Dimension { expected: size, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        let m = ShiftedMatrix { n: 0, size, entries };
        for i in 0..size {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::Argument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.size).map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.size {
            return Err(Error::Dimension { expected: self.size, got: x.len() });
        }
        Ok((0..self.size)
            .map(|i| x[i] * self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum())
    }
}

/// `D - (d_max/2) O` for the permutohedron `g`. Orders above
/// [`DEFAULT_MAX_ORDER`] need `allow_large`.
pub fn build_shifted(g: &Permutohedron, allow_large: bool) -> Result<ShiftedMatrix> {
    let n = g.order();
    if n > DEFAULT_MAX_ORDER && !allow_large {
        return Err(Error::Size { n, min: 1, max: DEFAULT_MAX_ORDER });
    }
    let size = g.vertex_count();
    let half = g.d_max() as f64 / 2.0;
    let mut entries = Vec::with_capacity(size * size);
    for u in 0..size {
        entries.extend(g.distance_row(u).iter().map(|&d| d as f64 - half));
    }
    Ok(ShiftedMatrix { n, size, entries })
}

/// All eigenvalues of a symmetric matrix in increasing order. Stops when the
/// off-diagonal Frobenius norm falls below `tol` times the full norm.
pub fn symmetric_eigenvalues(m: &ShiftedMatrix, tol: f64) -> Result<Vec<f64>> {
    let size = m.size;
    let mut a = m.entries.clone();
    let total_norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..size {
            for j in i + 1..size {
                s += 2.0 * a[i * size + j] * a[i * size + j];
            }
        }
        s.sqrt()
    };
    let threshold = tol * total_norm.max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..size {
            for q in p + 1..size {
                let apq = a[p * size + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * size + p];
                let aqq = a[q * size + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * size + p] = app - t * apq;
                a[q * size + q] = aqq + t * apq;
                a[p * size + q] = 0.0;
                a[q * size + p] = 0.0;
                for k in 0..size {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * size + p];
                    let akq = a[k * size + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * size + p] = new_kp;
                    a[p * size + k] = new_kp;
                    a[k * size + q] = new_kq;
                    a[q * size + k] = new_kq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..size).map(|i| a[i * size + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemidefiniteCheck {
    pub negative_semidefinite: bool,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
}

/// Negative semidefiniteness from precomputed eigenvalues of `m`.
pub fn semidefinite_from_eigenvalues(m: &ShiftedMatrix, eigenvalues: &[f64]) -> SemidefiniteCheck {
    let tolerance = SEMIDEFINITE_TOLERANCE * m.inf_norm();
    let max_eigenvalue = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SemidefiniteCheck { negative_semidefinite: max_eigenvalue <= tolerance, max_eigenvalue, tolerance }
}

pub fn check_negative_semidefinite(m: &ShiftedMatrix) -> Result<SemidefiniteCheck> {
    let eig = symmetric_eigenvalues(m, DEFAULT_JACOBI_TOLERANCE)?;
    Ok(semidefinite_from_eigenvalues(m, &eig))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenGroup {
    pub value: f64,
    pub multiplicity: usize,
}

/// Groups sorted eigenvalues lying within `tol` of each other. Values within
/// `tol` of an integer are snapped to it.
pub fn group_eigenvalues(sorted: &[f64], tol: f64) -> Vec<EigenGroup> {
    let mut groups: Vec<(f64, f64, usize)> = Vec::new();
    for &x in sorted {
        match groups.last_mut() {
            Some((first, sum, count)) if (x - *first).abs() <= tol => {
                *sum += x;
                *count += 1;
            }
            _ => groups.push((x, x, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(_, sum, count)| {
            let mean = sum / count as f64;
            let rounded = mean.round();
            let value = if (mean - rounded).abs() <= tol { rounded + 0.0 } else { mean };
            EigenGroup { value, multiplicity: count }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub half_d_max: f64,
    pub groups: Vec<EigenGroup>,
    pub trace: f64,
    pub eigenvalue_sum: f64,
    pub check: SemidefiniteCheck,
}

pub fn spectrum_report(g: &Permutohedron, allow_large: bool) -> Result<SpectrumReport> {
    let m = build_shifted(g, allow_large)?;
    let eig = symmetric_eigenvalues(&m, DEFAULT_JACOBI_TOLERANCE)?;
    Ok(SpectrumReport {
        n: g.order(),
        half_d_max: g.d_max() as f64 / 2.0,
        groups: group_eigenvalues(&eig, GROUPING_TOLERANCE),
        trace: m.trace(),
        eigenvalue_sum: eig.iter().sum(),
        check: semidefinite_from_eigenvalues(&m, &eig),
    })
}

impl SpectrumReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\thalf_d_max\teigenvalue\tmultiplicity\n");
        for grp in &self.groups {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", self.n, self.half_d_max, grp.value, grp.multiplicity));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(n: usize) -> Vec<(f64, usize)> {
        let g = Permutohedron::build(n).unwrap();
        spectrum_report(&g, false).unwrap().groups.into_iter().map(|e| (e.value, e.multiplicity)).collect()
    }

    #[test]
    fn n3_matrix_entries() {
        let g = Permutohedron::build(3).unwrap();
        let m = build_shifted(&g, false).unwrap();
        for i in 0..6 {
            assert_eq!(m.get(i, i), -1.5);
            assert_eq!(m.row(i).iter().sum::<f64>(), 0.0);
            for j in 0..6 {
                assert!([-1.5, -0.5, 0.5, 1.5].contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn small_spectra() {
        assert_eq!(groups(3), vec![(-4.0, 2), (-1.0, 1), (0.0, 3)]);
        assert_eq!(groups(4), vec![(-20.0, 3), (-4.0, 3), (0.0, 18)]);
        assert_eq!(groups(2), vec![(-1.0, 1), (0.0, 1)]);
    }

    #[test]
    fn row_sums_vanish() {
        for n in 2..=5 {
            let m = build_shifted(&Permutohedron::build(n).unwrap(), false).unwrap();
            for i in 0..m.size() {
                assert_eq!(m.row(i).iter().sum::<f64>(), 0.0);
            }
        }
    }

    #[test]
    fn known_spectrum_of_small_matrix() {
        let m = ShiftedMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = symmetric_eigenvalues(&m, 1e-14).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-12 && (eig[1] - 3.0).abs() < 1e-12);
        assert!(ShiftedMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(ShiftedMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn positive_matrix_is_not_negative_semidefinite() {
        let m = ShiftedMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let c = check_negative_semidefinite(&m).unwrap();
        assert!(!c.negative_semidefinite);
        assert!((c.max_eigenvalue - 2.0).abs() < 1e-12);
    }

    #[test]
    fn size_gate() {
        let g = Permutohedron::build(7).unwrap();
        assert!(matches!(build_shifted(&g, false), Err(Error::Size { .. })));
    }

    #[test]
    fn grouping_snaps_to_integers() {
        let g = group_eigenvalues(&[-4.0000000001, -3.9999999999, -0.5, 1e-12], 1e-6);
        assert_eq!(
            g,
            vec![
                EigenGroup { value: -4.0, multiplicity: 2 },
                EigenGroup { value: -0.5, multiplicity: 1 },
                EigenGroup { value: 0.0, multiplicity: 1 }
            ]
        );
    }
}
