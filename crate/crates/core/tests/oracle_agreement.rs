use spikecal::mp::{self, SeriesPolicy};
use spikecal::oracle::{self, ExtraKind, MpKernel, QuadPolicy};

fn grid() -> impl Iterator<Item = f64> {
    (1..10).map(|i| i as f64 / 10.0)
}

#[test]
fn series_constants_match_contour_integrals() {
    let quad = QuadPolicy::default();
    let series = SeriesPolicy::default();
    for c in grid() {
        let pairs = [
            (mp::series_constants_u(c, &series).unwrap(), oracle::contour_series_u(c, &quad).unwrap()),
            (mp::series_constants_v(c, &series).unwrap(), oracle::contour_series_v(c, &quad).unwrap()),
        ];
        for (closed, contour) in pairs {
            assert!(contour.max_imaginary() < 1e-9);
            let num = contour.real();
            for (a, b) in [(closed.i1, num.i1), (closed.i2, num.i2), (closed.j1, num.j1), (closed.j2, num.j2)] {
                assert!((a - b).abs() <= 1e-6, "c = {c}: {closed:?} vs {num:?}");
            }
        }
    }
}

#[test]
fn centering_matches_mp_quadrature() {
    let quad = QuadPolicy::default();
    for c in grid() {
        let log = oracle::mp_expectation(MpKernel::Log1p, c, &quad).unwrap().re;
        let ratio = oracle::mp_expectation(MpKernel::Ratio, c, &quad).unwrap().re;
        assert!((log - mp::ct_value(c).unwrap()).abs() <= 1e-8, "c = {c}");
        assert!((ratio - mp::v_center(c).unwrap()).abs() <= 1e-8, "c = {c}");
    }
}

#[test]
fn extra_terms_match_arctan_integral() {
    let quad = QuadPolicy::default();
    for c in grid() {
        let closed = mp::extra_terms(c, 1).unwrap();
        let u = oracle::extra_term_num(ExtraKind::U, c, &quad).unwrap();
        let w = oracle::extra_term_num(ExtraKind::W, c, &quad).unwrap();
        let v = oracle::extra_term_num(ExtraKind::V, c, &quad).unwrap();
        assert!((u - closed.u).abs() <= 1e-6, "c = {c}: {u} vs {}", closed.u);
        assert!((w + c).abs() <= 1e-8, "c = {c}: {w}");
        assert!((v - closed.v).abs() <= 1e-6, "c = {c}: {v} vs {}", closed.v);
    }
}
