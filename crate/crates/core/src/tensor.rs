//! Dense tensor values at a point, plus small matrix helpers over jets.

use serde::Serialize;

use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variance {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    BaseCoordinate,
    BundleCoordinate,
    Adapted,
}

/// Components of a tensor at one point. Every axis has length `dim`;
/// storage is row-major in the order of `variance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorValue {
    pub dim: usize,
    pub variance: Vec<Variance>,
    pub frame: Frame,
    pub point: Vec<f64>,
    pub components: Vec<f64>,
}

impl TensorValue {
    pub fn zeros(dim: usize, variance: Vec<Variance>, frame: Frame, point: &[f64]) -> Self {
        let len = dim.pow(variance.len() as u32);
        TensorValue {
            dim,
            variance,
            frame,
            point: point.to_vec(),
            components: vec![0.0; len],
        }
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.rank(), "tensor index rank mismatch");
        index.iter().fold(0, |acc, &i| {
            assert!(i < self.dim, "tensor index {i} out of range");
            acc * self.dim + i
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.components[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let at = self.offset(index);
        self.components[at] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_diff(&self, other: &TensorValue) -> f64 {
        assert_eq!(self.components.len(), other.components.len());
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// All multi-indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let rank = self.rank();
        let dim = self.dim;
        (0..self.components.len()).map(move |mut flat| {
            let mut idx = vec![0; rank];
            for slot in (0..rank).rev() {
                idx[slot] = flat % dim;
                flat /= dim;
            }
            idx
        })
    }
}

pub type JetMatrix = Vec<Vec<Jet>>;

pub(crate) fn jet_matmul(a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
    let rows = a.len();
    let inner = b.len();
    let cols = b[0].len();
    (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let mut acc = a[r][0].zero_like();
                    for k in 0..inner {
                        if a[r][k].max_abs_coefficient() != 0.0 && b[k][c].max_abs_coefficient() != 0.0 {
                            acc = acc + &a[r][k] * &b[k][c];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub(crate) fn jet_transpose(a: &JetMatrix) -> JetMatrix {
    (0..a[0].len())
        .map(|c| a.iter().map(|row| row[c].clone()).collect())
        .collect()
}

/// Gauss–Jordan inverse with partial pivoting on the jet values.
/// Returns `None` when a pivot vanishes.
pub(crate) fn jet_inverse(a: &JetMatrix) -> Option<JetMatrix> {
    let n = a.len();
    let zero = a[0][0].zero_like();
    let one = a[0][0].lift(1.0);
    let mut work: JetMatrix = a.to_vec();
    let mut inv: JetMatrix = (0..n)
        .map(|r| (0..n).map(|c| if r == c { one.clone() } else { zero.clone() }).collect())
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, j| m.max(j.value().abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                work[x][col]
                    .value()
                    .abs()
                    .total_cmp(&work[y][col].value().abs())
            })
            .unwrap();
        if !(work[pivot][col].value().abs() > scale * 1e-14) {
            return None;
        }
        work.swap(col, pivot);
        inv.swap(col, pivot);
        let recip = work[col][col].recip().ok()?;
        for c in 0..n {
            work[col][c] = &work[col][c] * &recip;
            inv[col][c] = &inv[col][c] * &recip;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[r][col].clone();
            if factor.max_abs_coefficient() == 0.0 {
                continue;
            }
            for c in 0..n {
                work[r][c] = &work[r][c] - &(&factor * &work[col][c]);
                inv[r][c] = &inv[r][c] - &(&factor * &inv[col][c]);
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::seed;

    #[test]
    fn indexing_round_trip() {
        let mut t = TensorValue::zeros(3, vec![Variance::Upper, Variance::Lower], Frame::BaseCoordinate, &[0.0; 3]);
        t.set(&[2, 1], 4.0);
        assert_eq!(t.get(&[2, 1]), 4.0);
        assert_eq!(t.components[7], 4.0);
        let idx: Vec<_> = t.indices().collect();
        assert_eq!(idx[7], vec![2, 1]);
        assert_eq!(t.max_abs(), 4.0);
    }

    #[test]
    fn jet_inverse_matches_derivative_of_inverse() {
        // A(t) = [[2 + t, t], [0, 1 + t²]]; d/dt A⁻¹ = -A⁻¹ A' A⁻¹ at t = 0.5
        let t = &seed(&[0.5], 2).unwrap()[0];
        let a = vec![
            vec![t + 2.0, t.clone()],
            vec![t.zero_like(), &(t * t) + 1.0],
        ];
        let inv = jet_inverse(&a).unwrap();
        let prod = jet_matmul(&a, &inv);
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((prod[r][c].value() - expect).abs() < 1e-14);
                assert!(prod[r][c].partial(&[0]).abs() < 1e-14);
                assert!(prod[r][c].partial(&[0, 0]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let t = &seed(&[1.0], 1).unwrap()[0];
        let a = vec![vec![t.clone(), t.clone()], vec![t.clone(), t.clone()]];
        assert!(jet_inverse(&a).is_none());
    }
}
