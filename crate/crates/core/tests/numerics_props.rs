use num_complex::Complex64;
use proptest::prelude::*;
use zfbound::model::zf_rate;
use zfbound::numerics::{pseudo_inverse, ComplexMatrix, ComplexVector};

fn matrix(rows: usize, cols: usize, vals: &[(f64, f64)]) -> ComplexMatrix {
    let entries: Vec<Complex64> = vals.iter().take(rows * cols).map(|&(re, im)| Complex64::new(re, im)).collect();
    ComplexMatrix::from_row_slice(rows, cols, &entries).unwrap()
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.sub(b).unwrap().frobenius_norm() <= tol * (1.0 + a.frobenius_norm())
}

proptest! {
    #[test]
    fn penrose_conditions(
        rows in 1usize..4,
        extra in 0usize..3,
        vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 18),
    ) {
        let cols = rows + extra;
        let a = matrix(rows, cols, &vals);
        let p = pseudo_inverse(&a, 0.0).unwrap();
        let apa = a.mul(&p).unwrap().mul(&a).unwrap();
        let pap = p.mul(&a).unwrap().mul(&p).unwrap();
        prop_assert!(close(&apa, &a, 1e-9));
        prop_assert!(close(&pap, &p, 1e-9));
        let ap = a.mul(&p).unwrap();
        let pa = p.mul(&a).unwrap();
        prop_assert!(close(&ap, &ap.adjoint(), 1e-9));
        prop_assert!(close(&pa, &pa.adjoint(), 1e-9));
    }

    #[test]
    fn wide_full_rank_gives_right_inverse(
        rows in 1usize..4,
        vals in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 12),
    ) {
        let a = matrix(rows, 3, &vals);
        let p = pseudo_inverse(&a, 0.0).unwrap();
        let ap = a.mul(&p).unwrap();
        // Random continuous draws are full rank almost surely; skip ill-conditioned ones.
        prop_assume!(close(&ap, &ComplexMatrix::identity(rows), 1e-6));
        for i in 0..rows {
            for j in 0..rows {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ap.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn zf_rate_is_log_of_gain(
        h in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
        w in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
    ) {
        let hv = ComplexVector::new(h.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
        let wv = ComplexVector::new(w.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
        let g: Complex64 = h.iter().zip(&w).map(|(&(a, b), &(c, d))| Complex64::new(a, b) * Complex64::new(c, d)).sum();
        let r = zf_rate(&hv, &wv).unwrap();
        prop_assert!((r - (1.0 + g.norm_sqr()).log2()).abs() < 1e-12);
    }
}

#[test]
fn rank_deficient_rows_are_dropped() {
    let a = matrix(2, 2, &[(1.0, 0.0), (2.0, 0.0), (2.0, 0.0), (4.0, 0.0)]);
    let p = pseudo_inverse(&a, 0.0).unwrap();
    // A = u v^T with u = v = (1, 2); A+ = A / 25.
    for i in 0..2 {
        for j in 0..2 {
            assert!((p.get(i, j) - a.get(i, j) / 25.0).norm() < 1e-12);
        }
    }
}
