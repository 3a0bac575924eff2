use arboreal::frd::{self, Backend};
use arboreal::freefield;
use arboreal::grassmann::{gaussian_convolution, Grassmann, PsiTable};
use arboreal::lattice::Torus;
use arboreal::rgflow::*;
use proptest::prelude::*;

fn couplings() -> impl Strategy<Value = BulkCouplings> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(z, y, a, b)| BulkCouplings { z, y, a, b, u: 0.0 })
}

fn wick(d: usize) -> impl Strategy<Value = WickCoefficients> {
    (0.0f64..1.0, -1.0f64..0.0).prop_map(move |(c0, lap)| WickCoefficients::new(c0, lap, d))
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn steps_are_additive(c in couplings(), w1 in wick(3), w2 in wick(3)) {
        let two = bulk_step(&bulk_step(&c, &w1), &w2);
        let one = bulk_step(&c, &w1.plus(&w2));
        prop_assert!(near(two.y, one.y) && near(two.a, one.a));
        prop_assert_eq!(two.z, one.z);
        prop_assert_eq!(two.b, one.b);
    }

    #[test]
    fn rescaled_step_matches_bulk_step(c in couplings(), w in wick(3), j in 0usize..5, l in 2usize..4) {
        let d = 3;
        let via_rescaled = rescaled_step(&rescale(&c, l, d, j), &w, l, j);
        let direct = rescale(&bulk_step(&c, &w), l, d, j + 1);
        prop_assert!(near(via_rescaled.y, direct.y));
        prop_assert!(near(via_rescaled.a, direct.a));
        prop_assert!(near(via_rescaled.b, direct.b));
        prop_assert_eq!(via_rescaled.z, direct.z);
    }

    #[test]
    fn rescale_round_trip(c in couplings(), j in 0usize..6, l in 2usize..5, d in 2usize..5) {
        let back = unrescale(&rescale(&c, l, d, j), l, d, j, c.u);
        prop_assert!(near(back.a, c.a) && near(back.b, c.b));
        prop_assert_eq!(back.y, c.y);
    }

    #[test]
    fn telescoping(c in couplings(), ws in prop::collection::vec(wick(2), 1..8)) {
        let mut cur = c;
        for w in &ws {
            cur = bulk_step(&cur, w);
        }
        let c0: f64 = ws.iter().map(|w| w.c0).sum();
        let lap: f64 = ws.iter().map(|w| w.lap).sum();
        prop_assert!(near(cur.y, c.y - c.b * c0));
        prop_assert!(near(cur.a, c.a + c.b * lap));
    }

    #[test]
    fn susceptibility_decreases_in_a(a in 0.0f64..1.0, da in 1e-3f64..1.0, m2 in 0.01f64..2.0, t in 0.0f64..10.0) {
        let chi = |a: f64| susceptibility(a, a * t, m2).unwrap();
        prop_assert!(chi(a + da) < chi(a));
    }

    #[test]
    fn observable_flow_is_bilinear_in_lambda(lambda in 0.1f64..3.0, cab in prop::collection::vec(-0.5f64..0.5, 1..6)) {
        for case in [ObservableCase::One, ObservableCase::Two] {
            let run = |lam: f64| {
                let mut o = ObservableCouplings::initial(case, lam);
                for &c in &cab {
                    o = observable_step(&o, &PairKernel { c_ab: c, c_00: 0.4 });
                }
                o
            };
            let (unit, scaled) = (run(1.0), run(lambda));
            prop_assert!(near(scaled.q, lambda * lambda * unit.q));
            prop_assert!(near(scaled.gamma_a, lambda * unit.gamma_a));
        }
    }
}

#[test]
fn contraction_and_growth() {
    let (l, d) = (2, 3);
    let c = BulkCouplings { z: 0.0, y: 0.0, a: 0.3, b: 0.0, u: 0.0 };
    let w = WickCoefficients::new(0.2, -0.1, d);
    let r = rescale(&c, l, d, 1);
    let next = rescaled_step(&r, &w, l, 1);
    assert!(near(next.a, 4.0 * r.a));
    let rb = RescaledCouplings { b: 1.0, ..r };
    assert!(near(rescaled_step(&rb, &w, l, 1).b, 0.5));
}

#[test]
fn observables_vanish_below_coalescence_scale() {
    let t = Torus::new(2, 2, 4).unwrap();
    let dec = frd::decompose(&t, 0.3, Backend::Polynomial).unwrap();
    let b = t.index(&[2, 0]);
    let jab = coalescence_scale(0, b, &t);
    assert_eq!(jab, 2);
    let bulk = BulkCouplings::default();
    for case in [ObservableCase::One, ObservableCase::Two] {
        let res = run_flow(&dec, bulk, ObservableCouplings::initial(case, 1.0), 0, b).unwrap();
        for row in &res.rows[..=jab] {
            let o = row.observable;
            assert!(o.q.abs().max(o.eta.abs()).max(o.r.abs()) < 1e-15, "{o:?}");
        }
        let o = res.rows[jab + 1].observable;
        assert!(o.q.abs().max(o.eta.abs()) > 1e-4, "{o:?}");
    }
}

#[test]
fn gamma_accumulates_diagonal_covariance() {
    let t = Torus::new(3, 2, 3).unwrap();
    let dec = frd::decompose(&t, 0.5, Backend::Polynomial).unwrap();
    let lambda = 1.7;
    let res = run_flow(&dec, BulkCouplings::default(), ObservableCouplings::initial(ObservableCase::Two, lambda), 0, 5).unwrap();
    let mut sum = 0.0;
    for (j, row) in res.rows.iter().enumerate() {
        assert!(near(row.observable.gamma_a, lambda * sum));
        if j < dec.scales() {
            sum += dec.kernel(j + 1).values[0];
        }
    }
    let g = freefield::green(&t, 0.5).unwrap();
    let gamma = res.observable_n1.unwrap().gamma_a;
    assert!((gamma - lambda * g.value(0)).abs() < 1e-12);
}

#[test]
fn initial_q_only_shifts_the_result() {
    let t = Torus::new(2, 2, 3).unwrap();
    let dec = frd::decompose(&t, 0.3, Backend::Polynomial).unwrap();
    let o0 = ObservableCouplings::initial(ObservableCase::Two, 1.0);
    let shifted = ObservableCouplings { q: 0.25, ..o0 };
    let a = run_flow(&dec, BulkCouplings::default(), o0, 0, 1).unwrap();
    let b = run_flow(&dec, BulkCouplings::default(), shifted, 0, 1).unwrap();
    let (oa, ob) = (a.observable_n1.unwrap(), b.observable_n1.unwrap());
    assert!(near(ob.q - oa.q, 0.25));
    assert_eq!((oa.eta, oa.gamma_a, oa.gamma_b), (ob.eta, ob.gamma_a, ob.gamma_b));
}

/// Coefficient of `psi_x psibar_y` in `f`.
fn quad_coeff(f: &Grassmann, x: usize, y: usize) -> f64 {
    f.deriv(2 * x + 1).deriv(2 * y).scalar_part()
}

#[test]
fn bulk_step_is_the_wick_projection() {
    // Sum the local potential over a 3x3 torus, convolve exactly and read
    // back the quadratic couplings. On a torus the y and z terms have the
    // same lattice sum, so only y + z is identified.
    let t = Torus::with_side(2, 3).unwrap();
    let n = t.volume();
    let d = 2;
    let g = freefield::green(&t, 0.7).unwrap();
    let cov: Vec<f64> = (0..n * n).map(|i| g.at(i / n, i % n)).collect();
    let w = WickCoefficients::new(g.value(0), freefield::laplacian_at_origin(&t, g.values()), d);
    let c = BulkCouplings { z: 0.2, y: -0.3, a: 0.45, b: 0.8, u: 0.0 };

    let p = PsiTable::new(n);
    let mut v = p.scalar(0.0);
    for x in 0..n {
        let mut grad = p.scalar(0.0);
        let mut lap_psi = p.psi(x).scale(2.0 * d as f64);
        let mut lap_psibar = p.psibar(x).scale(2.0 * d as f64);
        for axis in 0..d {
            let f = t.step(x, axis, true);
            let gp = &p.psi(f) - &p.psi(x);
            let gb = &p.psibar(f) - &p.psibar(x);
            grad = &grad + &(&gp * &gb);
            for y in [f, t.step(x, axis, false)] {
                lap_psi = &lap_psi - &p.psi(y);
                lap_psibar = &lap_psibar - &p.psibar(y);
            }
        }
        let pp = &p.psi(x) * &p.psibar(x);
        let zterm = &(&lap_psi * &p.psibar(x)) + &(&p.psi(x) * &lap_psibar);
        v = &v + &grad.scale(c.y);
        v = &v + &zterm.scale(c.z / 2.0);
        v = &v + &pp.scale(c.a);
        v = &v + &(&pp * &grad).scale(c.b);
    }
    let out = gaussian_convolution(&cov, n, &v).unwrap();

    let next = bulk_step(&c, &w);
    let e = t.step(0, 0, true);
    let yz = -quad_coeff(&out, 0, e);
    let a = quad_coeff(&out, 0, 0) - 2.0 * d as f64 * yz;
    assert!((yz - (next.y + next.z + exact_z_shift(&c, &w))).abs() < 1e-12, "{yz}");
    assert!((a - next.a).abs() < 1e-12, "{a} vs {}", next.a);
    assert!((out.scalar_part() - n as f64 * next.u).abs() < 1e-12);
    // quartic part untouched
    let quartic = |f: &Grassmann| f.deriv(1).deriv(0).deriv(2 * e + 1).deriv(2 * e).scalar_part();
    assert!((quartic(&out) - quartic(&v)).abs() < 1e-15);
}
