use arboreal::exact;
use arboreal::forest::ForestState;
use arboreal::lattice::{Graph, Torus};
use arboreal::mcmc::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn single_edge_occupation() {
    let (beta, h) = (1.5, 0.4);
    let g = Graph::builtin("k2").unwrap();
    let mut st = ForestState::empty(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let steps = 200_000;
    let mut on = 0usize;
    for _ in 0..steps {
        metropolis_step(&mut st, &mut rng, beta, h);
        on += st.edge_count();
    }
    let w = beta * (1.0 + 2.0 * h);
    let exact = w / ((1.0 + h) * (1.0 + h) + w);
    let freq = on as f64 / steps as f64;
    assert!((freq - exact).abs() < 0.01, "{freq} vs {exact}");
}

#[test]
fn chains_are_reproducible() {
    let g = Graph::builtin("c4").unwrap();
    let mut cfg = ChainConfig::new(g, 0.8, 0.2, 17, 3000);
    cfg.targets = vec![1, 2];
    let a = run_chain(&cfg).unwrap();
    let b = run_chain(&cfg).unwrap();
    assert_eq!(a.sums.sums, b.sums.sums);
    assert_eq!(a.histogram, b.histogram);
    cfg.seed = 18;
    let c = run_chain(&cfg).unwrap();
    assert_ne!(a.sums.sums, c.sums.sums);
}

#[test]
fn tree_size_equals_connection_sum() {
    let g = Graph::builtin("k4").unwrap();
    let mut cfg = ChainConfig::new(g, 0.6, 0.3, 2, 2000);
    cfg.targets = (0..4).collect();
    let est = run_chain(&cfg).unwrap();
    let (s, c) = est.size_totals();
    assert!((s - c).abs() <= 1e-9 * s, "{s} {c}");

    let t = Torus::with_side(2, 3).unwrap();
    let mut cfg = ChainConfig::torus(&t, 0.6, 0.3, 2, 2000);
    cfg.targets = (0..9).collect();
    let est = run_chain(&cfg).unwrap();
    let (s, c) = est.size_totals();
    assert!((s - c).abs() <= 1e-9 * s, "{s} {c}");
}

#[test]
fn estimates_agree_with_enumeration() {
    let (beta, h) = (1.0, 0.3);
    let g = Graph::builtin("p4").unwrap();
    let ex = exact::exact_summary(&g.reweighted(beta, h)).unwrap();
    let mut cfg = ChainConfig::new(g, beta, h, 23, 200_000);
    cfg.targets = vec![1, 3];
    let est = run_chain(&cfg).unwrap();
    let within = |(v, s): (f64, f64), want: f64, what: &str| {
        assert!((v - want).abs() <= 4.0 * s + 1e-12, "{what}: {v} +- {s} vs {want}");
    };
    within(est.theta(), ex.theta(0), "theta");
    for &x in &[1, 3] {
        within(est.connection(x).unwrap(), ex.conn(0, x), "conn");
        within(est.tau(x).unwrap(), ex.tau(0, x), "tau");
        within(est.sigma(x).unwrap(), ex.sigma(0, x), "sigma");
    }
}

#[test]
fn standard_error_shrinks_with_budget() {
    let g = Graph::builtin("c4").unwrap();
    let err = |sweeps: usize| {
        let mut cfg = ChainConfig::new(g.clone(), 1.0, 0.5, 4, sweeps);
        cfg.observables = vec![Observable::Theta];
        run_chain(&cfg).unwrap().theta().1
    };
    let ratio = err(8_000) / err(128_000);
    assert!(ratio > 2.5 && ratio < 6.5, "{ratio}");
}

#[test]
fn connection_decays_on_a_cycle() {
    let fit = decay_fit(1, 64, 1.0, 1.0, 1..=8, Budget::new(20_000, 3)).unwrap();
    assert!(fit.slope < 0.0, "{fit:?}");
    assert!(fit.r2 > 0.95, "{fit:?}");
}

#[test]
fn zero_field_connection_is_monotone() {
    let t = Torus::with_side(1, 32).unwrap();
    let mut cfg = ChainConfig::torus(&t, 0.5, 0.0, 9, 20_000);
    cfg.targets = (1..=5).collect();
    cfg.observables = vec![Observable::Connection];
    let est = run_chain(&cfg).unwrap();
    let p: Vec<f64> = (1..=5).map(|x| est.connection(x).unwrap().0).collect();
    assert!(p.windows(2).all(|w| w[0] > w[1]), "{p:?}");
}

#[test]
fn merged_chains_pool_batches() {
    let g = Graph::builtin("c3").unwrap();
    let mut cfg = ChainConfig::new(g, 1.0, 0.5, 12, 4000);
    cfg.observables = vec![Observable::Theta];
    let merged = run_chains(&cfg, 2).unwrap();
    let first = run_chain(&cfg).unwrap();
    let second = run_chain(&ChainConfig { stream: 1, ..cfg.clone() }).unwrap();
    assert_eq!(merged.batches(), first.batches() + second.batches());
    let mean = 0.5 * (first.theta().0 + second.theta().0);
    assert!((merged.theta().0 - mean).abs() < 1e-12);
    assert!(run_chains(&cfg, 0).is_err());
}

#[test]
fn theta_scan_rejects_zero_field() {
    assert!(theta_scan(2, 4, &[1.0], 0.0, Budget::new(100, 1)).is_err());
    let rows = theta_scan(2, 4, &[0.0, 1.0], 0.5, Budget::new(400, 1)).unwrap();
    // at beta = 0 every tree is a single vertex
    assert!((rows[0].theta - 0.5 / 1.5).abs() < 1e-12);
    assert!(rows[1].theta > rows[0].theta);
}
