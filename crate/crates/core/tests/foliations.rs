use shapecoh::foliations::*;
use shapecoh::{Mat2, Vec2};
use std::f64::consts::FRAC_PI_2;

#[test]
fn svd_of_diagonal() {
    let s = svd2(Mat2::diag(2.0, 0.5));
    assert!((s.sigma1 - 2.0).abs() < 1e-15 && (s.sigma2 - 0.5).abs() < 1e-15);
    assert!(s.v1.dist(Vec2::E1) < 1e-15 && s.u1.dist(Vec2::E1) < 1e-15);
}

#[test]
fn svd_of_shear_is_golden() {
    let s = svd2(Mat2::new(1.0, 1.0, 0.0, 1.0));
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((s.sigma1 - phi).abs() < 1e-14);
    assert!((s.sigma2 - 1.0 / phi).abs() < 1e-14);
    assert!(s.reconstruct().max_abs_diff(&Mat2::new(1.0, 1.0, 0.0, 1.0)) < 1e-14);
}

#[test]
fn identity_and_rotation_are_degenerate() {
    assert!(svd2(Mat2::IDENTITY).is_degenerate());
    assert!(svd2(Mat2::rotation(0.7)).is_degenerate());
    assert!(svd2(Mat2::ZERO).is_degenerate());
}

#[test]
fn svd_reflection_and_singular() {
    for m in [Mat2::new(0.0, 1.0, 1.0, 0.0), Mat2::new(1.0, 2.0, 2.0, 4.0), Mat2::new(-3.0, 0.1, 0.2, 5.0)] {
        let s = svd2(m);
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-12 * m.norm(), "{m:?}");
        assert!(s.sigma1 >= s.sigma2 && s.sigma2 >= 0.0);
        assert!(s.u1.dot(s.u2).abs() < 1e-12 && s.v1.dot(s.v2).abs() < 1e-12);
    }
}

#[test]
fn splitting_examples() {
    assert!((splitting_angle(Vec2::E1, Vec2::E2).unwrap() - FRAC_PI_2).abs() < 1e-15);
    assert_eq!(splitting_angle(Vec2::E1, -Vec2::E1), Some(0.0));
    assert!((splitting_angle(Vec2::E1, Vec2::from_angle(0.3)).unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(splitting_signed(Vec2::E1, Vec2::E1), Some(0.0));
    assert_eq!(splitting_signed(Vec2::E1, Vec2::E2), Some(1.0));
    let s = splitting_signed(Vec2::from_angle(0.1), Vec2::from_angle(0.2)).unwrap();
    assert!((s - 0.1f64.sin()).abs() < 1e-15);
    assert_eq!(splitting_angle(Vec2::ZERO, Vec2::E1), None);
    assert_eq!(splitting_signed(Vec2::E1, Vec2::new(f64::NAN, 0.0)), None);
}

#[test]
fn signed_is_orientation_free() {
    for k in 0..50 {
        let a = Vec2::from_angle(0.37 * k as f64);
        let b = Vec2::from_angle(1.1 * k as f64 + 0.2);
        let s = splitting_signed(a, b).unwrap();
        assert_eq!(s, splitting_signed(-a, b).unwrap());
        assert_eq!(s, splitting_signed(a, -b).unwrap());
        let theta = splitting_angle(a, b).unwrap();
        assert!((theta - s.abs().asin()).abs() < 1e-10);
        assert!((0.0..=FRAC_PI_2).contains(&theta));
    }
}

#[test]
fn dips_are_counted_as_runs() {
    let slice: Vec<(f64, Option<f64>)> =
        [1.0, 0.001, 0.002, 1.0, 0.0, 1.0, 0.005].iter().enumerate().map(|(i, t)| (i as f64, Some(*t))).collect();
    assert_eq!(count_dips(&slice, 1e-2), 3);
    assert_eq!(count_dips(&[(0.0, None)], 1e-2), 0);
}
