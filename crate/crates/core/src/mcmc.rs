//! Single-edge Metropolis sampler for the arboreal gas and its estimators.
//!
//! The ghost vertex is not part of the state. Rooted quantities are obtained
//! by weighting each sample with the conditional probability that a tree of
//! size `s` is unrooted, `1 / (1 + h s)`.

use crate::error::{Error, Result};
use crate::forest::{ForestState, Proposal};
use crate::lattice::{Graph, Torus};
use crate::numeric::linear_fit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Observables reported by [`run_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Observable {
    Connection,
    Theta,
    Tau,
    Sigma,
    MeanTreeSize,
}

impl Observable {
    pub const ALL: [Observable; 5] =
        [Observable::Connection, Observable::Theta, Observable::Tau, Observable::Sigma, Observable::MeanTreeSize];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Connection => "connection",
            Observable::Theta => "theta",
            Observable::Tau => "tau",
            Observable::Sigma => "sigma",
            Observable::MeanTreeSize => "mean_tree_size",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Observable::ALL
            .iter()
            .copied()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown observable {s:?}")))
    }
}

/// Configuration of one chain.
#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub graph: Graph,
    /// Present when `graph` is a torus; enables translation averaging.
    pub torus: Option<Torus>,
    pub beta: f64,
    pub h: f64,
    pub seed: u64,
    /// Independent stream of the seed used by this chain.
    pub stream: u64,
    /// Total sweeps including burn-in. A sweep is `|E|` proposals.
    pub sweeps: usize,
    pub burnin: usize,
    /// Sweeps between measurements.
    pub stride: usize,
    pub batches: usize,
    /// Reference vertex `0`.
    pub origin: usize,
    /// Target vertices `x` for two-point observables. On a torus with
    /// translation averaging these are read as displacements from the origin.
    pub targets: Vec<usize>,
    pub translation_average: bool,
    pub observables: Vec<Observable>,
}

impl ChainConfig {
    pub fn new(graph: Graph, beta: f64, h: f64, seed: u64, sweeps: usize) -> Self {
        ChainConfig {
            graph,
            torus: None,
            beta,
            h,
            seed,
            stream: 0,
            sweeps,
            burnin: sweeps / 10,
            stride: 1,
            batches: 32,
            origin: 0,
            targets: Vec::new(),
            translation_average: false,
            observables: Observable::ALL.to_vec(),
        }
    }

    /// Chain on a torus, translation averaged.
    pub fn torus(torus: &Torus, beta: f64, h: f64, seed: u64, sweeps: usize) -> Self {
        ChainConfig {
            torus: Some(torus.clone()),
            translation_average: true,
            ..ChainConfig::new(torus.graph(1.0, 0.0), beta, h, seed, sweeps)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be finite and >= 0", self.beta));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return bad(format!("h = {} must be finite and >= 0", self.h));
        }
        if self.sweeps <= self.burnin {
            return bad(format!("sweeps {} must exceed burn-in {}", self.sweeps, self.burnin));
        }
        if self.stride == 0 || self.batches < 2 {
            return bad("stride must be >= 1 and batches >= 2".into());
        }
        if self.measurements() < self.batches {
            return bad(format!("{} measurements for {} batches", self.measurements(), self.batches));
        }
        let n = self.graph.vertex_count();
        if self.origin >= n || self.targets.iter().any(|&t| t >= n) {
            return bad("origin or target outside the graph".into());
        }
        if self.translation_average {
            match &self.torus {
                Some(t) if t.volume() == n && t.edge_count() == self.graph.edge_count() => {}
                _ => return bad("translation averaging needs a matching torus".into()),
            }
        }
        if self.graph.edge_count() == 0 {
            return bad("graph has no edges".into());
        }
        Ok(())
    }

    pub fn measurements(&self) -> usize {
        self.sweeps.saturating_sub(self.burnin) / self.stride.max(1)
    }
}

/// One Metropolis update at a uniformly chosen edge. Returns whether the
/// forest changed.
pub fn metropolis_step<R: Rng + ?Sized>(state: &mut ForestState, rng: &mut R, beta: f64, h: f64) -> bool {
    let e = rng.random_range(0..state.edge_slots());
    let p = state.propose(e);
    if let Proposal::Cycle { .. } = p {
        state.abort(p);
        return false;
    }
    let acc = p.acceptance(beta, h);
    if acc >= 1.0 || rng.random::<f64>() < acc {
        state.commit(p);
        true
    } else {
        state.abort(p);
        false
    }
}

/// A batch-means estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub observable: Observable,
    pub argument: Option<usize>,
    pub estimate: f64,
    pub stderr: f64,
    pub batches: usize,
}

/// Per-batch sums of the primitive per-sample quantities.
///
/// Layout: `[theta, u_0, |T_0|]` followed, for each target `x`, by
/// `[1{0<->x}, 1{0<->x} u_0, u_x, 1{0 !<-> x} u_0 u_x]` where
/// `u_y = 1 / (1 + h |T_y|)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSums {
    pub width: usize,
    pub per_batch: usize,
    pub sums: Vec<Vec<f64>>,
}

const HEAD: usize = 3;
const PER_TARGET: usize = 4;

impl BatchSums {
    fn new(width: usize, batches: usize, per_batch: usize) -> Self {
        BatchSums { width, per_batch, sums: vec![vec![0.0; width]; batches] }
    }

    /// Concatenate the batches of two chains; associative, order-preserving.
    pub fn merge(mut self, other: BatchSums) -> Result<BatchSums> {
        if self.width != other.width || self.per_batch != other.per_batch {
            return Err(Error::InvalidArgument("incompatible batch layouts".into()));
        }
        self.sums.extend(other.sums);
        Ok(self)
    }

    fn batch_means(&self, i: usize) -> Vec<f64> {
        self.sums.iter().map(|b| b[i] / self.per_batch as f64).collect()
    }

    fn total(&self, i: usize) -> f64 {
        self.sums.iter().map(|b| b[i]).sum()
    }

    fn mean(&self, i: usize) -> f64 {
        self.total(i) / (self.per_batch * self.sums.len()) as f64
    }

    fn linear(&self, i: usize) -> (f64, f64) {
        (self.mean(i), stderr_of(&self.batch_means(i)))
    }
}

fn stderr_of(v: &[f64]) -> f64 {
    let b = v.len() as f64;
    let m = v.iter().sum::<f64>() / b;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Estimates of one or more chains with a common configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorSet {
    pub seed: u64,
    pub beta: f64,
    pub h: f64,
    pub targets: Vec<usize>,
    pub observables: Vec<Observable>,
    pub sums: BatchSums,
    /// `histogram[s]` counts trees of size `s`, summed over measurements.
    pub histogram: Vec<u64>,
    pub proposals: u64,
    pub accepted: u64,
}

impl EstimatorSet {
    pub fn batches(&self) -> usize {
        self.sums.sums.len()
    }

    pub fn samples(&self) -> usize {
        self.sums.per_batch * self.batches()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals.max(1) as f64
    }

    fn target_slot(&self, x: usize) -> Option<usize> {
        self.targets.iter().position(|&t| t == x)
    }

    /// `P[0 <-> x]`.
    pub fn connection(&self, x: usize) -> Option<(f64, f64)> {
        self.target_slot(x).map(|k| self.sums.linear(HEAD + PER_TARGET * k))
    }

    /// `theta^ = E[h |T_0| / (1 + h |T_0|)]`.
    pub fn theta(&self) -> (f64, f64) {
        self.sums.linear(0)
    }

    /// `tau^(x) = E[1{0<->x} / (1 + h |T_0|)]`.
    pub fn tau(&self, x: usize) -> Option<(f64, f64)> {
        self.target_slot(x).map(|k| self.sums.linear(HEAD + PER_TARGET * k + 1))
    }

    /// `sigma^(x) = E[u_0] E[u_x] - E[1{0 !<-> x} u_0 u_x]`, error by the
    /// delta method on batch means.
    pub fn sigma(&self, x: usize) -> Option<(f64, f64)> {
        let k = self.target_slot(x)?;
        let (io, ix, inn) = (1, HEAD + PER_TARGET * k + 2, HEAD + PER_TARGET * k + 3);
        let (mo, mx, mn) = (self.sums.mean(io), self.sums.mean(ix), self.sums.mean(inn));
        let (bo, bx, bn) = (self.sums.batch_means(io), self.sums.batch_means(ix), self.sums.batch_means(inn));
        let lin: Vec<f64> = (0..bo.len()).map(|b| mx * bo[b] + mo * bx[b] - bn[b]).collect();
        Some((mo * mx - mn, stderr_of(&lin)))
    }

    /// `E|T_0|`.
    pub fn mean_tree_size(&self) -> (f64, f64) {
        self.sums.linear(2)
    }

    /// Sum over measurements of `|T_0|` and of `sum_x 1{0<->x}` over the
    /// targets. They coincide when the targets are all vertices.
    pub fn size_totals(&self) -> (f64, f64) {
        let s = self.sums.total(2);
        let c = (0..self.targets.len()).map(|k| self.sums.total(HEAD + PER_TARGET * k)).sum();
        (s, c)
    }

    /// All requested estimates in a fixed order.
    pub fn estimates(&self) -> Vec<Estimate> {
        let b = self.batches();
        let mk = |observable, argument, (estimate, stderr): (f64, f64)| Estimate { observable, argument, estimate, stderr, batches: b };
        let mut out = Vec::new();
        for &o in &self.observables {
            match o {
                Observable::Theta => out.push(mk(o, None, self.theta())),
                Observable::MeanTreeSize => out.push(mk(o, None, self.mean_tree_size())),
                Observable::Connection | Observable::Tau | Observable::Sigma => {
                    for &x in &self.targets {
                        let v = match o {
                            Observable::Connection => self.connection(x),
                            Observable::Tau => self.tau(x),
                            _ => self.sigma(x),
                        };
                        out.push(mk(o, Some(x), v.expect("target present")));
                    }
                }
            }
        }
        out
    }

    /// Merge estimates of chains with the same configuration and stream
    /// layout; batches are concatenated in argument order.
    pub fn merge(self, other: EstimatorSet) -> Result<EstimatorSet> {
        if self.targets != other.targets || self.beta != other.beta || self.h != other.h {
            return Err(Error::InvalidArgument("merging chains of different configurations".into()));
        }
        let mut hist = self.histogram;
        if hist.len() < other.histogram.len() {
            hist.resize(other.histogram.len(), 0);
        }
        for (i, c) in other.histogram.iter().enumerate() {
            hist[i] += c;
        }
        Ok(EstimatorSet {
            sums: self.sums.merge(other.sums)?,
            histogram: hist,
            proposals: self.proposals + other.proposals,
            accepted: self.accepted + other.accepted,
            ..self
        })
    }
}

/// Per-chain measurement workspace.
struct Meter {
    h: f64,
    origins: Vec<usize>,
    /// `shifted[k][i]` is the partner of `origins[i]` for target `k`.
    shifted: Vec<Vec<usize>>,
    buf: Vec<f64>,
}

impl Meter {
    fn new(cfg: &ChainConfig) -> Self {
        let (origins, shifted) = match (&cfg.torus, cfg.translation_average) {
            (Some(t), true) => {
                let origins: Vec<usize> = (0..t.volume()).collect();
                let shifted = cfg
                    .targets
                    .iter()
                    .map(|&x| {
                        let cx = t.coords(x);
                        origins
                            .iter()
                            .map(|&o| {
                                let c: Vec<i64> = t.coords(o).iter().zip(&cx).map(|(a, b)| (*a + *b) as i64).collect();
                                t.index(&c)
                            })
                            .collect()
                    })
                    .collect();
                (origins, shifted)
            }
            _ => (vec![cfg.origin], cfg.targets.iter().map(|&x| vec![x]).collect()),
        };
        Meter { h: cfg.h, origins, shifted, buf: vec![0.0; HEAD + PER_TARGET * cfg.targets.len()] }
    }

    fn measure(&mut self, st: &ForestState, into: &mut [f64]) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        let h = self.h;
        for (i, &o) in self.origins.iter().enumerate() {
            let (lo, so) = st.tree_of(o);
            let ho = h * so as f64;
            let uo = 1.0 / (1.0 + ho);
            self.buf[0] += ho * uo;
            self.buf[1] += uo;
            self.buf[2] += so as f64;
            for (k, sh) in self.shifted.iter().enumerate() {
                let x = sh[i];
                let (lx, sx) = st.tree_of(x);
                let ux = 1.0 / (1.0 + h * sx as f64);
                let base = HEAD + PER_TARGET * k;
                if lx == lo {
                    self.buf[base] += 1.0;
                    self.buf[base + 1] += uo;
                } else {
                    self.buf[base + 3] += uo * ux;
                }
                self.buf[base + 2] += ux;
            }
        }
        let norm = self.origins.len() as f64;
        for (t, v) in into.iter_mut().zip(&self.buf) {
            *t += v / norm;
        }
    }
}

/// Run one chain from the empty forest.
pub fn run_chain(cfg: &ChainConfig) -> Result<EstimatorSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let mut st = ForestState::empty(&cfg.graph);
    let m = cfg.graph.edge_count();
    let n = cfg.graph.vertex_count();
    let total = cfg.measurements();
    let per_batch = total / cfg.batches;
    let skip = total - per_batch * cfg.batches;
    let mut meter = Meter::new(cfg);
    let mut sums = BatchSums::new(meter.buf.len(), cfg.batches, per_batch);
    let mut histogram = vec![0u64; n + 1];
    let (mut proposals, mut accepted) = (0u64, 0u64);
    let mut sweep = |st: &mut ForestState, rng: &mut ChaCha8Rng| {
        for _ in 0..m {
            proposals += 1;
            if metropolis_step(st, rng, cfg.beta, cfg.h) {
                accepted += 1;
            }
        }
    };
    for _ in 0..cfg.burnin {
        sweep(&mut st, &mut rng);
    }
    for i in 0..total {
        for _ in 0..cfg.stride {
            sweep(&mut st, &mut rng);
        }
        if i < skip {
            continue;
        }
        let b = (i - skip) / per_batch;
        meter.measure(&st, &mut sums.sums[b]);
        for s in st.tree_sizes() {
            histogram[s] += 1;
        }
    }
    Ok(EstimatorSet {
        seed: cfg.seed,
        beta: cfg.beta,
        h: cfg.h,
        targets: cfg.targets.clone(),
        observables: cfg.observables.clone(),
        sums,
        histogram,
        proposals,
        accepted,
    })
}

/// Run `chains` independent streams of `cfg` in parallel and merge them in
/// stream order.
pub fn run_chains(cfg: &ChainConfig, chains: usize) -> Result<EstimatorSet> {
    if chains == 0 {
        return Err(Error::InvalidArgument("at least one chain".into()));
    }
    let parts: Vec<Result<EstimatorSet>> = (0..chains as u64)
        .into_par_iter()
        .map(|s| run_chain(&ChainConfig { stream: cfg.stream + s, ..cfg.clone() }))
        .collect();
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("one chain")?;
    for p in it {
        acc = acc.merge(p?)?;
    }
    Ok(acc)
}

/// Sampling budget shared by scans and fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Budget {
    pub sweeps: usize,
    pub burnin: usize,
    pub stride: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Budget {
    pub fn new(sweeps: usize, seed: u64) -> Self {
        Budget { sweeps, burnin: sweeps / 5, stride: 1, batches: 32, seed }
    }

    fn apply(&self, mut cfg: ChainConfig) -> ChainConfig {
        cfg.sweeps = self.sweeps;
        cfg.burnin = self.burnin;
        cfg.stride = self.stride;
        cfg.batches = self.batches;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaRow {
    pub beta: f64,
    pub theta: f64,
    pub stderr: f64,
    pub acceptance: f64,
}

/// `theta^(beta)` on the torus of dimension `d` and the given side, one
/// chain per `beta` (stream = position in the list), run in parallel.
pub fn theta_scan(d: usize, side: usize, betas: &[f64], h: f64, budget: Budget) -> Result<Vec<ThetaRow>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("theta scan needs h > 0, got {h}")));
    }
    let torus = Torus::with_side(d, side)?;
    betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let mut cfg = budget.apply(ChainConfig::torus(&torus, beta, h, budget.seed, budget.sweeps));
            cfg.stream = i as u64;
            cfg.observables = vec![Observable::Theta];
            let est = run_chain(&cfg)?;
            let (theta, stderr) = est.theta();
            Ok(ThetaRow { beta, theta, stderr, acceptance: est.acceptance_rate() })
        })
        .collect()
}

/// Result of [`decay_fit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(|x|, P^[0<->x], stderr, used in the fit)`.
    pub points: Vec<(usize, f64, f64, bool)>,
}

/// Noise floor: estimates within this many standard errors of zero are
/// excluded from the fit.
pub const NOISE_FLOOR_SIGMAS: f64 = 3.0;

/// Fit `log P^[0 <-> x]` against `|x|` for `x = r e_0`, `r` in `range`, on a
/// torus (`d >= 1`; `d = 1` is the cycle).
pub fn decay_fit(d: usize, side: usize, beta: f64, h: f64, range: std::ops::RangeInclusive<usize>, budget: Budget) -> Result<DecayFit> {
    let torus = Torus::with_side(d, side)?;
    let rs: Vec<usize> = range.collect();
    if rs.is_empty() || *rs.last().unwrap() > side / 2 {
        return Err(Error::InvalidArgument("distance range must lie in 0..=side/2".into()));
    }
    let targets: Vec<usize> = rs
        .iter()
        .map(|&r| {
            let mut c = vec![0i64; d];
            c[0] = r as i64;
            torus.index(&c)
        })
        .collect();
    let mut cfg = budget.apply(ChainConfig::torus(&torus, beta, h, budget.seed, budget.sweeps));
    cfg.targets = targets.clone();
    cfg.observables = vec![Observable::Connection];
    let est = run_chain(&cfg)?;
    fit_points(rs.iter().zip(&targets).map(|(&r, &t)| {
        let (p, s) = est.connection(t).expect("target");
        (r, p, s)
    }))
}

/// Least-squares fit of `log p` against `r` over points above the noise
/// floor.
pub fn fit_points(points: impl IntoIterator<Item = (usize, f64, f64)>) -> Result<DecayFit> {
    let points: Vec<(usize, f64, f64, bool)> =
        points.into_iter().map(|(r, p, s)| (r, p, s, p > 0.0 && p > NOISE_FLOOR_SIGMAS * s)).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter(|p| p.3).map(|p| (p.0 as f64, p.1.ln())).unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientSignal(format!("{} of {} points above the noise floor", x.len(), points.len())));
    }
    let (slope, intercept, r2) = linear_fit(&x, &y);
    Ok(DecayFit { slope, intercept, r2, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_rejects_additions() {
        let g = Graph::builtin("c3").unwrap();
        let mut st = ForestState::empty(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(!metropolis_step(&mut st, &mut rng, 0.0, 0.5));
        }
        assert_eq!(st.edge_count(), 0);
    }

    #[test]
    fn theta_vanishes_at_zero_field() {
        let g = Graph::builtin("c4").unwrap();
        let mut cfg = ChainConfig::new(g, 1.0, 0.0, 3, 2000);
        cfg.targets = vec![1, 2];
        let est = run_chain(&cfg).unwrap();
        assert_eq!(est.theta(), (0.0, 0.0));
    }

    #[test]
    fn invalid_configs() {
        let g = Graph::builtin("c3").unwrap();
        let mut cfg = ChainConfig::new(g, 1.0, 0.0, 3, 100);
        cfg.burnin = 100;
        assert!(run_chain(&cfg).is_err());
        cfg.burnin = 10;
        cfg.beta = -1.0;
        assert!(run_chain(&cfg).is_err());
        cfg.beta = 1.0;
        cfg.targets = vec![7];
        assert!(run_chain(&cfg).is_err());
    }

    #[test]
    fn fit_flags_noise() {
        assert!(matches!(fit_points([(1, 0.0, 0.1), (2, 0.01, 0.1)]), Err(Error::InsufficientSignal(_))));
        let f = fit_points((1..6).map(|r| (r, (-0.5 * r as f64).exp(), 1e-6))).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.r2 > 1.0 - 1e-12);
    }
}
