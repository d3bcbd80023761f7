//! Dense complex linear algebra used by the solver.
//!
//! Thin newtypes over `nalgebra` storage that enforce finiteness and expose
//! only what the allocation code needs: row stacking, column norms and an
//! SVD-based Moore–Penrose pseudo-inverse.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};

fn all_finite<'a>(mut it: impl Iterator<Item = &'a Complex64>) -> bool {
    it.all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Complex column vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(DVector<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if !all_finite(entries.iter()) {
            return Err(invalid("vector has non-finite entries"));
        }
        Ok(Self(DVector::from_vec(entries)))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Row-by-column product `self · other` with no conjugation. `self` plays
    /// the role of a channel row vector, `other` of a beamforming column.
    pub fn dot_row(&self, other: &ComplexVector) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * Complex64::new(factor, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn inner(&self) -> &DVector<Complex64> {
        &self.0
    }
}

/// Dense complex matrix with at least one row and one column, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn from_dmatrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(invalid("matrix must have at least one row and column"));
        }
        if !all_finite(m.iter()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        Ok(Self(m))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Self(&self.0 * &other.0))
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(invalid("shape mismatch in subtraction"));
        }
        Ok(Self(&self.0 - &other.0))
    }

    pub fn mul_vector(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if self.cols() != v.len() {
            return Err(invalid("matrix-vector shape mismatch"));
        }
        Ok(ComplexVector(&self.0 * &v.0))
    }

    pub fn column(&self, j: usize) -> Result<ComplexVector> {
        if j >= self.cols() {
            return Err(invalid(format!(
                "column {j} out of range for {} columns",
                self.cols()
            )));
        }
        Ok(ComplexVector(self.0.column(j).into_owned()))
    }

    /// Euclidean norm of column `j`.
    pub fn column_norm(&self, j: usize) -> Result<f64> {
        if j >= self.cols() {
            return Err(invalid(format!(
                "column {j} out of range for {} columns",
                self.cols()
            )));
        }
        Ok(self.0.column(j).norm())
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }
}

/// Stacks equal-length vectors as the rows of a matrix, preserving order.
pub fn stack_rows(rows: &[ComplexVector]) -> Result<ComplexMatrix> {
    let first = rows
        .first()
        .ok_or_else(|| invalid("cannot stack an empty list of rows"))?;
    let cols = first.len();
    if cols == 0 {
        return Err(invalid("rows must be non-empty"));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(invalid(format!(
            "row length mismatch: expected {cols}, got {}",
            bad.len()
        )));
    }
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i].0[j]);
    Ok(ComplexMatrix(m))
}

/// Pseudo-inverse together with the numerical rank that was used.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: ComplexMatrix,
    pub rank: usize,
}

/// Moore–Penrose pseudo-inverse via complex SVD.
///
/// Singular values at or below `rank_tol` are dropped. A `rank_tol` of zero
/// selects `max(rows, cols) * EPSILON * sigma_max`.
pub fn pseudo_inverse(a: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    pseudo_inverse_with_rank(a, rank_tol).map(|p| p.matrix)
}

pub fn pseudo_inverse_with_rank(a: &ComplexMatrix, rank_tol: f64) -> Result<PseudoInverse> {
    if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
        return Err(invalid(format!("rank tolerance must be >= 0, got {rank_tol}")));
    }
    if !all_finite(a.0.iter()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let svd = a.0.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(invalid("SVD did not produce singular vectors")),
    };
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let tol = if rank_tol > 0.0 {
        rank_tol
    } else {
        rows.max(cols) as f64 * f64::EPSILON * sigma_max
    };

    // A+ = V diag(1/sigma) U^H over the retained singular triplets.
    let mut out = DMatrix::<Complex64>::zeros(cols, rows);
    let mut rank = 0;
    for (i, &s) in sigma.iter().enumerate() {
        if s <= tol || s == 0.0 {
            continue;
        }
        rank += 1;
        let inv = 1.0 / s;
        for r in 0..cols {
            let v_ri = v_t[(i, r)].conj() * inv;
            for c in 0..rows {
                out[(r, c)] += v_ri * u[(c, i)].conj();
            }
        }
    }
    Ok(PseudoInverse {
        matrix: ComplexMatrix(out),
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let entries: Vec<_> = (0..rows * cols)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c(re * scale, im * scale)
            })
            .collect();
        ComplexMatrix::from_row_slice(rows, cols, &entries).unwrap()
    }

    fn penrose_residuals(a: &ComplexMatrix, p: &ComplexMatrix) -> [f64; 4] {
        let ap = a.mul(p).unwrap();
        let pa = p.mul(a).unwrap();
        [
            ap.mul(a).unwrap().sub(a).unwrap().frobenius_norm(),
            pa.mul(p).unwrap().sub(p).unwrap().frobenius_norm(),
            ap.adjoint().sub(&ap).unwrap().frobenius_norm(),
            pa.adjoint().sub(&pa).unwrap().frobenius_norm(),
        ]
    }

    #[test]
    fn identity_is_its_own_pseudo_inverse() {
        let i = ComplexMatrix::identity(3);
        let p = pseudo_inverse(&i, 0.0).unwrap();
        assert!(p.sub(&i).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_maps_to_transposed_zero() {
        let z = ComplexMatrix::zeros(2, 3);
        let p = pseudo_inverse_with_rank(&z, 0.0).unwrap();
        assert_eq!((p.matrix.rows(), p.matrix.cols()), (3, 2));
        assert_eq!(p.matrix.frobenius_norm(), 0.0);
        assert_eq!(p.rank, 0);
    }

    #[test]
    fn random_wide_matrix_meets_penrose_conditions() {
        let a = random_matrix(2, 4, 7);
        let p = pseudo_inverse(&a, 0.0).unwrap();
        let scale = a.frobenius_norm();
        for r in penrose_residuals(&a, &p) {
            assert!(r <= 1e-10 * scale, "residual {r}");
        }
    }

    #[test]
    fn rank_deficient_matrix_still_meets_penrose_conditions() {
        let row = [c(1.0, 0.5), c(-0.3, 2.0), c(0.0, -1.0)];
        let mut entries = row.to_vec();
        entries.extend(row.iter().map(|z| z * c(0.0, 2.0)));
        let a = ComplexMatrix::from_row_slice(2, 3, &entries).unwrap();
        let p = pseudo_inverse_with_rank(&a, 0.0).unwrap();
        assert_eq!(p.rank, 1);
        for r in penrose_residuals(&a, &p.matrix) {
            assert!(r <= 1e-10 * a.frobenius_norm());
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(ComplexMatrix::from_dmatrix(m).is_err());
        assert!(ComplexVector::new(vec![c(f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn stack_rows_preserves_order_and_rejects_bad_input() {
        let h = ComplexVector::new(vec![c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0)]).unwrap();
        let single = stack_rows(std::slice::from_ref(&h)).unwrap();
        assert_eq!((single.rows(), single.cols()), (1, 3));
        assert_eq!(single.get(0, 0), c(1.0, 2.0));

        let h1 = ComplexVector::from_real(&[1.0, 2.0]).unwrap();
        let h2 = ComplexVector::from_real(&[3.0, 4.0]).unwrap();
        let two = stack_rows(&[h1.clone(), h2]).unwrap();
        assert_eq!(two.get(1, 0), c(3.0, 0.0));
        assert_eq!(two.get(0, 1), c(2.0, 0.0));

        assert!(stack_rows(&[]).is_err());
        assert!(stack_rows(&[h1, h]).is_err());
    }

    #[test]
    fn column_norms() {
        let i = ComplexMatrix::identity(3);
        assert_eq!(i.column_norm(0).unwrap(), 1.0);
        assert_eq!(ComplexMatrix::zeros(2, 2).column_norm(1).unwrap(), 0.0);
        assert!(i.column_norm(3).is_err());
    }

    #[test]
    fn pinv_of_row_vector_has_inverse_norm_column() {
        let h = ComplexVector::new(vec![c(0.3, -1.2), c(2.0, 0.1), c(-0.7, 0.4)]).unwrap();
        let a = stack_rows(std::slice::from_ref(&h)).unwrap();
        let p = pseudo_inverse(&a, 0.0).unwrap();
        let got = p.column_norm(0).unwrap();
        assert!((got - 1.0 / h.norm()).abs() < 1e-14);
    }

    #[test]
    fn dot_row_does_not_conjugate() {
        let h = ComplexVector::new(vec![c(0.0, 1.0)]).unwrap();
        let w = ComplexVector::new(vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(h.dot_row(&w).unwrap(), c(-1.0, 0.0));
        assert!(h.dot_row(&ComplexVector::zeros(2)).is_err());
    }
}
