use slitcpw_wasm::{depth_curve, lateral_curve, odmr_fit};

#[test]
fn depth_curve_has_subsurface_peak() {
    let c = depth_curve(100.0, 40.0, 1.0).unwrap();
    assert_eq!(c.x().len(), c.y().len());
    assert!((20.0..40.0).contains(&c.peak_x()), "{}", c.peak_x());
    assert!((4.0..5.5).contains(&c.peak_y()), "{}", c.peak_y());
}

#[test]
fn plain_line_decays_from_the_surface() {
    let c = depth_curve(100.0, 0.0, 1.0).unwrap();
    assert_eq!(c.peak_x(), c.x()[0]);
    assert!(c.y().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn lateral_curve_is_even_and_spans_the_gaps() {
    let c = lateral_curve(100.0, 40.0, 1.0, 5.0).unwrap();
    let (x, y) = (c.x(), c.y());
    assert!(x[0] < -90.0 && *x.last().unwrap() > 90.0);
    for (a, b) in y.iter().zip(y.iter().rev()) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn invalid_layout_is_reported() {
    let err = depth_curve(100.0, 150.0, 1.0).unwrap_err();
    assert!(!err.is_empty());
    assert!(depth_curve(100.0, 40.0, -1.0).is_err());
}

#[test]
fn odmr_fit_recovers_field() {
    let demo = odmr_fit(97.0, 35.0, 0.0, 0).unwrap();
    assert_eq!(demo.centers().len(), 2);
    assert!((demo.high_field_b0() - 97.0).abs() < 1e-3, "{}", demo.high_field_b0());
    assert!((demo.high_field_d() - 35.0).abs() < 1e-3);
    let resid = demo.data().iter().zip(demo.fitted()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(resid < 1e-6, "{resid}");
}

#[test]
fn noisy_odmr_is_seeded() {
    let a = odmr_fit(150.0, 35.0, 2e-4, 3).unwrap();
    let b = odmr_fit(150.0, 35.0, 2e-4, 3).unwrap();
    assert_eq!(a, b);
    assert!((a.high_field_b0() - 150.0).abs() < 0.5);
}
