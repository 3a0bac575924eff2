use arboreal::exact;
use arboreal::grassmann::{dictionary_check, gaussian_convolution, Grassmann, H02Model, H02Table, PsiTable};
use arboreal::lattice::Graph;
use proptest::prelude::*;

fn element(ngen: usize) -> impl Strategy<Value = Grassmann> {
    prop::collection::vec((0u64..1 << ngen, -2.0f64..2.0), 0..12)
        .prop_map(move |t| Grassmann::from_terms(ngen, t))
}

fn homogeneous(ngen: usize) -> impl Strategy<Value = Grassmann> {
    (element(ngen), any::<bool>()).prop_map(|(a, even)| if even { a.even_part() } else { a.odd_part() })
}

fn close(a: &Grassmann, b: &Grassmann) -> bool {
    (a - b).max_abs() <= 1e-12 * (1.0 + a.max_abs())
}

proptest! {
    #[test]
    fn associativity(a in element(6), b in element(6), c in element(6)) {
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c))));
    }

    #[test]
    fn graded_commutativity(a in homogeneous(6), b in homogeneous(6)) {
        let sign = if a.is_odd() && b.is_odd() { -1.0 } else { 1.0 };
        prop_assert!(close(&(&a * &b), &(&b * &a).scale(sign)));
    }

    #[test]
    fn even_elements_commute(a in element(6), b in element(6)) {
        let (a, b) = (a.even_part(), b.even_part());
        prop_assert!(close(&(&a * &b), &(&b * &a)));
    }

    #[test]
    fn leibniz(a in homogeneous(6), b in element(6), i in 0usize..6) {
        let sign = if a.is_odd() { -1.0 } else { 1.0 };
        let lhs = (&a * &b).deriv(i);
        let rhs = &(&a.deriv(i) * &b) + &(&a * &b.deriv(i)).scale(sign);
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn distributivity(a in element(5), b in element(5), c in element(5)) {
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c))));
    }
}

#[test]
fn exp_terminates_and_inverts() {
    let t = H02Table { n: 3 };
    let a = &(&t.xi_eta(0, 1).scale(0.3) + &t.xi_eta(2, 2).scale(-1.1)) + &(&t.xi_eta(0, 0) * &t.xi_eta(1, 2));
    let e = a.exp_even_nilpotent().unwrap();
    let back = a.scale(-1.0).exp_even_nilpotent().unwrap();
    assert!(close(&(&e * &back), &Grassmann::one(6)));
}

#[test]
fn berezin_calibrated_by_single_vertex() {
    let g = Graph::builtin("k1").unwrap();
    let model = H02Model::new(&g).unwrap();
    assert_eq!(model.partition_function(), exact::partition_function(&g).unwrap());
}

#[test]
fn single_edge_ghost_connection() {
    let g = Graph::builtin("k2").unwrap().reweighted(1.0, 0.5);
    let m = H02Model::new(&g).unwrap();
    let z0 = m.expectation(&m.table().z(0));
    let p = exact::ghost_probability(&g, 0).unwrap();
    assert!((z0 - p).abs() <= 1e-12);
}

#[test]
fn triangle_unrooted_connection() {
    let g = Graph::builtin("c3").unwrap().reweighted(2.0, 0.3);
    let m = H02Model::new(&g).unwrap();
    let xe = m.expectation(&m.table().xi_eta(0, 1));
    let ex = exact::exact_summary(&g).unwrap();
    assert!((xe - ex.conn_unrooted(0, 1)).abs() <= 1e-12);
}

#[test]
fn ward_identity_on_builtins() {
    for name in ["k2", "p3", "c3", "p4", "c4", "star4", "k4"] {
        for (beta, h) in [(0.5, 0.0), (2.0, 0.3), (1.0, 1.5)] {
            let r = dictionary_check(&Graph::builtin(name).unwrap().reweighted(beta, h)).unwrap();
            assert!(r.ward <= 1e-12, "{name} {beta} {h}: {}", r.ward);
            assert!(r.max() <= 1e-12, "{name} {beta} {h}: {:?}", r.rows());
        }
    }
}

#[test]
fn nonuniform_weights_dictionary() {
    let g = Graph::new(4, vec![(0, 1, 0.3), (1, 2, 2.0), (2, 3, 1.1), (3, 0, 0.7), (0, 2, 1.6)])
        .unwrap()
        .with_h(vec![0.0, 0.4, 1.3, 0.05])
        .unwrap();
    let r = dictionary_check(&g).unwrap();
    assert!(r.max() <= 1e-12, "{:?}", r.rows());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn ward_identities_at_zero_field(f in element(8), beta in 0.1f64..3.0) {
        let m = H02Model::new(&Graph::builtin("c4").unwrap().reweighted(beta, 0.0)).unwrap();
        let t = m.table();
        prop_assert!(m.expectation(&t.apply_t(&f)).abs() <= 1e-12 * (1.0 + f.max_abs()));
        prop_assert!(m.expectation(&t.apply_tbar(&f)).abs() <= 1e-12 * (1.0 + f.max_abs()));
    }
}

#[test]
fn density_in_psi_variables() {
    // xi = psibar / sqrt(beta), eta = psi / sqrt(beta) turns the density into
    // exp[-(1+h)/beta sum psi psibar + sum_e grad psibar grad psi
    //     - (1/beta) sum_e psibar_x psi_x psibar_y psi_y]
    let (beta, h) = (1.7, 0.35);
    let g = Graph::builtin("p3").unwrap().reweighted(beta, h);
    let m = H02Model::new(&g).unwrap();
    let n = 3;
    let s = 1.0 / beta.sqrt();
    let rescaled = m.density().scale_generators(&vec![s; 2 * n]);
    let p = PsiTable::new(n);
    let mut expo = p.scalar(0.0);
    for x in 0..n {
        expo = &expo - &(&p.psi(x) * &p.psibar(x)).scale((1.0 + h) / beta);
    }
    for e in g.edges() {
        let gb = &p.psibar(e.u) - &p.psibar(e.v);
        let gp = &p.psi(e.u) - &p.psi(e.v);
        expo = &expo + &(&gb * &gp);
        let quartic = &(&p.psibar(e.u) * &p.psi(e.u)) * &(&p.psibar(e.v) * &p.psi(e.v));
        expo = &expo - &quartic.scale(1.0 / beta);
    }
    let expected = expo.exp_even_nilpotent().unwrap();
    assert!(close(&rescaled, &expected));
}

#[test]
fn convolution_of_quadratic_form() {
    // E_C exp(-a psi psibar) on one vertex: 1 - a psi psibar + a C
    let p = PsiTable::new(1);
    let a = 0.4;
    let f = (&p.psi(0) * &p.psibar(0)).scale(-a).exp_even_nilpotent().unwrap();
    let out = gaussian_convolution(&[0.7], 1, &f).unwrap();
    let expected = &f + &p.scalar(a * 0.7);
    assert!(close(&out, &expected));
}

#[test]
fn extra_generators_commute_through() {
    let p = PsiTable::with_extra(2, 2);
    let sigma = &p.extra(0) * &p.extra(1);
    let f = &(&p.psibar(0) * &p.psi(1)) * &sigma;
    let out = gaussian_convolution(&[0.5, 0.2, 0.2, 0.7], 2, &f).unwrap();
    assert!(close(&out, &(&f + &sigma.scale(0.2))));
}
