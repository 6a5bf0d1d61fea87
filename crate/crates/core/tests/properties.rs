//! Property tests for geometric identities, layer algebra and round trips.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use ekman_core::assembler::make_cutoff;
use ekman_core::config::parse_config;
use ekman_core::geometry::{Jet, PointGeometry};
use ekman_core::io::FieldFile;
use ekman_core::profiles::eigen::{eigenvectors, layer_operator, mat_inv, pair_residuals};
use ekman_core::profiles::{ExpPoly, Root};
use ekman_core::spectral::{Grid, Spectral};
use ekman_core::verify::loglog_slope;

fn jet() -> impl Strategy<Value = Jet> {
    (-3.0..3.0, -3.0..3.0, -5.0..5.0, -5.0..5.0, -5.0..5.0)
        .prop_map(|(bx, by, bxx, bxy, byy)| Jet { bx, by, bxx, bxy, byy, ..Jet::default() })
}

fn root() -> impl Strategy<Value = Root> {
    prop_oneof![Just(Root::Plus), Just(Root::Minus)]
}

fn exppoly() -> impl Strategy<Value = ExpPoly> {
    prop::collection::vec((0usize..4, root(), -2.0..2.0, -2.0..2.0), 1..4).prop_map(|terms| {
        let mut e = ExpPoly::zero(1);
        for (p, r, a, b) in terms {
            e.push(p, r, vec![C::new(a, b)]);
        }
        e
    })
}

/// Composite Simpson rule for `int_a^b f`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let s: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h)).sum();
    (f(a) + f(b) + s) * h / 3.0
}

proptest! {
    #[test]
    fn metric_determinant_times_cos_squared_is_one(j in jet()) {
        let g = PointGeometry::from_jet(j);
        let det = g.h0[0] * g.h0[2] - g.h0[1] * g.h0[1];
        prop_assert!((det * g.cos_gamma * g.cos_gamma - 1.0).abs() < 1e-12);
        prop_assert!((g.det_h0 - det).abs() < 1e-9 * det);
    }

    #[test]
    fn direction_cosines_encode_the_slope(j in jet()) {
        let g = PointGeometry::from_jet(j);
        let q = (g.cos_alpha.powi(2) + g.cos_beta.powi(2)) / g.cos_gamma.powi(2);
        let s = j.bx * j.bx + j.by * j.by;
        prop_assert!((q - s).abs() < 1e-10 * (1.0 + s));
        let unit = g.cos_alpha.powi(2) + g.cos_beta.powi(2) + g.cos_gamma.powi(2);
        prop_assert!((unit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_pack_diagonalizes_the_layer_operator(j in jet()) {
        let c = PointGeometry::from_jet(j).cos_gamma;
        let m = layer_operator(c, j.bx, j.by);
        let q = eigenvectors(m);
        let (inv, diag) = pair_residuals(&q, &mat_inv(&q), m);
        prop_assert!(inv < 1e-10 && diag < 1e-10, "inverse {inv:e}, diagonal {diag:e}");
    }

    #[test]
    fn tail_is_an_antiderivative(e in exppoly(), xi in 0.0..6.0) {
        let t = e.tail();
        let d = t.d_xi();
        prop_assert!((d.eval(0, xi) + e.eval(0, xi)).abs() < 1e-10);
        let direct = simpson(|s| e.eval(0, s), xi, xi + 60.0, 6000);
        prop_assert!((t.eval(0, xi) - direct).abs() < 1e-6, "{} vs {direct}", t.eval(0, xi));
    }

    #[test]
    fn derivative_matches_eval3(e in exppoly(), xi in 0.01..6.0) {
        let xi: f64 = xi;
        let ex = |r: Root| (-r.value() * xi).exp();
        let v = e.eval3(0, xi, [ex(Root::Plus), ex(Root::Minus)]);
        prop_assert!((v[0] - e.eval(0, xi)).abs() < 1e-12);
        prop_assert!((v[1] - e.d_xi().eval(0, xi)).abs() < 1e-10);
        prop_assert!((v[2] - e.d_xi().d_xi().eval(0, xi)).abs() < 1e-10);
    }

    #[test]
    fn second_order_solve_satisfies_its_equation(e in exppoly(), r in root(), xi in 0.0..6.0) {
        let w = e.solve_second(r);
        let mu = -(r.value() * r.value());
        let lhs = w.d_xi().d_xi().add(&w.scale_const(mu));
        prop_assert!((lhs.eval(0, xi) - e.eval(0, xi)).abs() < 1e-9);
    }

    #[test]
    fn first_order_solve_satisfies_its_equation(e in exppoly(), r in root(), xi in 0.0..6.0) {
        let w = e.solve_first(r);
        let lhs = w.d_xi().add(&w.scale_const(r.value()));
        prop_assert!((lhs.eval(0, xi) - e.eval(0, xi)).abs() < 1e-9);
    }

    #[test]
    fn cutoff_is_symmetric_and_monotone(order in 2usize..6, t in 0.0..1.0) {
        let chi = make_cutoff(order).unwrap();
        prop_assert!((chi.value(0.5 + t) + chi.value(1.5 - t) - 1.0).abs() < 1e-10);
        prop_assert!(chi.jet(0.5 + t)[1] >= -1e-12);
    }

    #[test]
    fn config_canonical_form_round_trips(
        n in 3u32..8,
        nu in 1e-3..1.0,
        amp in 0.0..0.3,
        seed in any::<u32>(),
        eps in prop::collection::btree_set(1u32..999, 1..5),
    ) {
        let ladder: Vec<String> = eps.iter().rev().map(|k| format!("{}", *k as f64 * 1e-3)).collect();
        let text = format!(
            "surface = eggcarton(amp={amp})\nn = {}\nnu = {nu}\nseed = {seed}\neps = {}\ninit = random\n",
            1usize << n,
            ladder.join(","),
        );
        let a = parse_config(&text).unwrap();
        let b = parse_config(&a.canonical()).unwrap();
        prop_assert_eq!(a.canonical(), b.canonical());
        prop_assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn field_file_round_trips(
        k in 0u32..3,
        nz in 1usize..4,
        nc in 1usize..4,
        seed in prop::collection::vec(-1e3..1e3, 64),
    ) {
        let grid = Grid::new(8 << k, 8, 1.5, 2.5).unwrap();
        let npts = grid.len() * nz;
        let f = FieldFile {
            grid,
            zeta: (0..nz).map(|k| k as f64 / nz as f64).collect(),
            eps: 1e-3,
            nu: 0.1,
            time: 2.0,
            components: (0..nc).map(|c| (0..npts).map(|k| seed[(k + 7 * c) % 64]).collect()).collect(),
        };
        prop_assert_eq!(FieldFile::decode(&f.encode().unwrap()).unwrap(), f);
    }

    #[test]
    fn loglog_slope_recovers_power_laws(p in -3.0..3.0, a in 0.1..10.0) {
        let x: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|v| a * v.powf(p)).collect();
        let s = loglog_slope(&x, &y).unwrap();
        prop_assert!((s.slope - p).abs() < 1e-9);
        prop_assert!(s.stderr < 1e-8);
    }

    #[test]
    fn leray_projection_is_divergence_free(seed in prop::collection::vec(-1.0..1.0, 8)) {
        let sp = Spectral::new(Grid::new(16, 16, 2.0 * PI, 2.0 * PI).unwrap());
        let g = sp.grid;
        let u = g.sample(|x, y| seed[0] * x.sin() * (2.0 * y).cos() + seed[1] * (3.0 * y).sin() + seed[2] * (x + y).cos() + seed[3]);
        let v = g.sample(|x, y| seed[4] * (2.0 * x).cos() + seed[5] * y.sin() * x.cos() + seed[6] * (x - 2.0 * y).sin() + seed[7]);
        let (pu, pv) = sp.leray(&u, &v);
        prop_assert!(g.linf(&sp.divergence(&pu, &pv)) < 1e-12);
        let (qu, qv) = sp.leray(&pu, &pv);
        let drift = pu.iter().zip(&qu).chain(pv.iter().zip(&qv)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-12);
    }
}
