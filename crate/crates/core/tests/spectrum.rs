use proptest::prelude::*;
use specsmooth::linalg::{ausc, smoothing_loss, spectrum_report, svd, Matrix};
use specsmooth::Error;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

fn nonzero(a: &Matrix) -> bool {
    a.frobenius_norm() > 1e-6
}

fn orthonormality_error(q: &Matrix) -> f64 {
    let g = q.transpose().matmul(q);
    g.sub(&Matrix::identity(g.rows())).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_reconstructs_with_orthonormal_factors(a in matrix(24, 24)) {
        let d = svd(&a).unwrap();
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!(d.reconstruct().sub(&a).frobenius_norm() / scale < 1e-10);
        prop_assert!(orthonormality_error(&d.u) < 1e-10);
        prop_assert!(orthonormality_error(&d.v) < 1e-10);
        prop_assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(d.sigma.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn ratio_is_bounded_by_one_root_k_and_the_area(a in matrix(16, 16)) {
        prop_assume!(nonzero(&a));
        let ratio = -smoothing_loss(&a).unwrap();
        let k = a.rows().min(a.cols()) as f64;
        prop_assert!(ratio >= 1.0 - 1e-12);
        prop_assert!(ratio <= k.sqrt() + 1e-12);
        prop_assert!(ratio <= ausc(&a).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn smoothing_loss_is_scale_invariant(a in matrix(12, 12), c in prop_oneof![-50.0f64..-1e-3, 1e-3f64..50.0]) {
        prop_assume!(nonzero(&a));
        let base = smoothing_loss(&a).unwrap();
        let scaled = smoothing_loss(&a.scale(c)).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-10 * base.abs());
    }

    #[test]
    fn report_fields_are_consistent(a in matrix(12, 12)) {
        prop_assume!(nonzero(&a));
        let r = spectrum_report(&a).unwrap();
        prop_assert_eq!(r.sigma.len(), a.rows().min(a.cols()));
        prop_assert_eq!(r.normalized[0], 1.0);
        prop_assert!(r.ausc >= 1.0 && r.ausc <= r.sigma.len() as f64 + 1e-12);
        prop_assert!((r.nuclear_norm - r.sigma.iter().sum::<f64>()).abs() < 1e-9 * r.nuclear_norm);
        prop_assert!((r.frobenius_norm - a.frobenius_norm()).abs() < 1e-9 * r.frobenius_norm);
    }

    #[test]
    fn rank_one_matrices_sit_at_the_lower_end(
        u in prop::collection::vec(0.5f64..3.0, 1..10),
        v in prop::collection::vec(-3.0f64..-0.5, 1..10),
    ) {
        let a = Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]);
        prop_assert!((smoothing_loss(&a).unwrap() + 1.0).abs() < 1e-9);
    }
}

#[test]
fn equal_singular_values_reach_root_k() {
    // Scaled orthogonal matrix: a rotation in the plane times 3.
    let (c, s) = (0.6, 0.8);
    let a = Matrix::from_rows(&[[3.0 * c, -3.0 * s], [3.0 * s, 3.0 * c]]).unwrap();
    assert!((smoothing_loss(&a).unwrap() + 2f64.sqrt()).abs() < 1e-12);
    assert!((ausc(&a).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn spec_examples() {
    assert_eq!(smoothing_loss(&Matrix::identity(4)).unwrap(), -2.0);
    assert!((smoothing_loss(&Matrix::from_diag(&[3.0, 4.0])).unwrap() + 1.4).abs() < 1e-15);
    assert_eq!(ausc(&Matrix::from_diag(&[4.0, 2.0, 1.0, 1.0])).unwrap(), 2.0);
    let mut d = vec![1.0; 30];
    d[0] = 10.0;
    assert!((ausc(&Matrix::from_diag(&d)).unwrap() - 3.9).abs() < 1e-12);
}

#[test]
fn vanishing_matrices_are_degenerate() {
    for a in [Matrix::zeros(3, 2), Matrix::from_diag(&[1e-14, 0.0])] {
        assert!(matches!(smoothing_loss(&a), Err(Error::DegenerateMatrix(_))));
        assert!(matches!(ausc(&a), Err(Error::DegenerateMatrix(_))));
    }
}

#[test]
fn svd_is_deterministic() {
    let a = Matrix::from_fn(9, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
    let x = svd(&a).unwrap();
    let y = svd(&a).unwrap();
    assert_eq!(x.sigma, y.sigma);
    assert_eq!(x.u, y.u);
    assert_eq!(x.v, y.v);
}
