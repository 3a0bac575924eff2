//! Finite-range decomposition of `(-Delta + m^2)^{-1}` on a torus:
//! `C = C_1 + ... + C_{N-1} + C_{N,N}` with `C_{N,N} = C_N + t_N Q_N`.
//!
//! # Polynomial backend
//!
//! Write `u = (lambda + m^2) / (2d + m^2)`, which lies in `(0, 2]`, and
//! `cos(theta) = 1 - u`. Let `w` be the centred cardinal B-spline of order 8
//! squeezed onto `[-1, 1]`; its Fourier transform is a positive multiple of
//! `sinc^8`, hence non-negative. By Poisson summation the trigonometric
//! polynomial
//!
//! `F_t(theta) = sum_n w(n / t) cos(n theta)`
//!
//! is non-negative, has degree below `t` in `cos(theta)` (so in `lambda`),
//! and satisfies `int_0^inf F_t dt = M / (2u)` with
//! `M = int_0^inf s w^(s) ds = 2 w(0) - 2 int_0^1 (w(s) - w(0)) / s^2 ds`.
//! Let `S_T(u) = (2/M) int_0^T F_t dt`, `T_j = L^j / 2 - 1` and
//! `p(lambda) = (4d - lambda) / (4d + m^2)`. Since
//! `1/(lambda + m^2) = 1/(4d + m^2) + p(lambda) / (lambda + m^2)`,
//!
//! `C_j^(k) = p(lambda_k) (S_{T_j} - S_{T_{j-1}})(u_k) / (2d + m^2)`, `j < N`,
//!
//! plus the constant `1/(4d + m^2)` for `j = 1`. This is a polynomial in
//! `lambda` of degree below `L^j / 2`. Its kernel is therefore supported in
//! `|x|_inf < L^j / 2`, it is positive semidefinite since `0 <= p <= 1`,
//! and it does not depend on the torus. At large mass `C_1` carries almost
//! all of `G(0, 0)`. `C_{N,N}` is the remainder
//! `p (1/u - S_{T_{N-1}}(u)) / (2d + m^2)`, `t_N` is its value at `k = 0`, and
//! `C_N` is the remainder with the constant mode removed. The time integrals
//! reduce to `A_0(T) = T w(0)` and, for `1 <= n < T`,
//! `A_n(T) = n J(n/T) + w(0) (T - n)` with `J(a) = int_a^1 (w - w(0)) / s^2`.
//!
//! # Heat-kernel backend
//!
//! `C_j^(k) = int_{s_{j-1}}^{s_j} e^{-s (lambda + m^2)} ds` with the cut
//! times `s_j` chosen so that the heat-kernel mass beyond `|x|_inf = L^j/2`
//! stays below a tolerance. Reconstruction and positivity are exact; the
//! range property holds only up to the tolerance, which is measured and
//! reported. Cut times collapse towards zero when `L^j / 2` is small, so this
//! backend is a cross-check, not a replacement.

use crate::error::{Error, Result};
use crate::freefield::{self, kernel_from_symbol, laplacian_symbol};
use crate::lattice::Torus;
use crate::numeric::{gauss_legendre, integrate_gl, ksum};
use serde::Serialize;

/// Which construction to use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Backend {
    /// Exact-range polynomial kernels.
    Polynomial,
    /// Heat-kernel time slices with range tolerance `tolerance`.
    Bump { tolerance: f64 },
}

/// Centred cardinal B-spline of order `k` (support `[-k/2, k/2]`), by the
/// Cox-de Boor recursion.
pub fn cardinal_bspline(k: usize, x: f64) -> f64 {
    fn rec(k: usize, x: f64) -> f64 {
        // uncentred, support [0, k]
        if k == 1 {
            return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        }
        if x <= 0.0 || x >= k as f64 {
            return 0.0;
        }
        let km = (k - 1) as f64;
        (x * rec(k - 1, x) + (k as f64 - x) * rec(k - 1, x - 1.0)) / km
    }
    rec(k, x + k as f64 / 2.0)
}

/// The window `w(s) = B_8(4 s)`, supported in `[-1, 1]`.
pub fn window(s: f64) -> f64 {
    cardinal_bspline(8, 4.0 * s)
}

/// Precomputed time-integral coefficients of the polynomial backend.
#[derive(Clone, Debug)]
pub struct PolyWindow {
    w0: f64,
    m: f64,
    nodes: (Vec<f64>, Vec<f64>),
}

impl PolyWindow {
    const NODES: usize = 24;

    pub fn new() -> Result<Self> {
        let w0 = window(0.0);
        let coarse = PolyWindow { w0, m: 1.0, nodes: gauss_legendre(Self::NODES) };
        let fine = PolyWindow { w0, m: 1.0, nodes: gauss_legendre(2 * Self::NODES) };
        for a in [0.0, 0.1, 0.3, 0.55, 0.8] {
            let diff = (coarse.j(a) - fine.j(a)).abs();
            if diff > 1e-11 {
                return Err(Error::Contract(format!("window quadrature not converged at a={a}: {diff:e}")));
            }
        }
        let m = 2.0 * w0 - 2.0 * coarse.j(0.0);
        Ok(PolyWindow { m, ..coarse })
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    /// The normalisation `M = int_0^inf s w^(s) ds`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// `J(a) = int_a^1 (w(s) - w(0)) / s^2 ds`, piecewise over the spline
    /// knots `j/4`.
    pub fn j(&self, a: f64) -> f64 {
        let f = |s: f64| {
            if s == 0.0 {
                // (w(s) - w0)/s^2 -> w''(0)/2; never sampled by Gauss nodes
                0.0
            } else {
                (window(s) - self.w0) / (s * s)
            }
        };
        let mut parts = Vec::new();
        let mut lo = a;
        for k in 1..=4 {
            let knot = k as f64 / 4.0;
            if knot <= lo {
                continue;
            }
            parts.push(integrate_gl(f, lo, knot, &self.nodes));
            lo = knot;
        }
        ksum(parts)
    }

    /// Coefficients `(2/M) A_n(T)` of `S_T = sum_n c_n cos(n theta)` with the
    /// `n >= 1` terms doubled, i.e. `S_T = c_0 + sum_{n>=1} c_n cos(n theta)`.
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return vec![0.0];
        }
        let scale = 2.0 / self.m;
        let mut c = vec![scale * t * self.w0];
        let mut n = 1usize;
        while (n as f64) < t {
            let nf = n as f64;
            let a_n = nf * self.j(nf / t) + self.w0 * (t - nf);
            c.push(2.0 * scale * a_n);
            n += 1;
        }
        c
    }
}

/// Evaluate `sum_n c_n T_n(1 - u)` by the Chebyshev recurrence.
pub fn eval_cos_series(c: &[f64], u: f64) -> f64 {
    let x = 1.0 - u;
    let (mut t0, mut t1) = (1.0, x);
    let mut acc = c[0];
    for (n, &cn) in c.iter().enumerate().skip(1) {
        if n > 1 {
            let t2 = 2.0 * x * t1 - t0;
            t0 = t1;
            t1 = t2;
        }
        acc += cn * t1;
    }
    acc
}

/// One scale of the decomposition.
#[derive(Clone, Debug)]
pub struct ScaleKernel {
    /// Scale index `j` in `1..=N`.
    pub j: usize,
    /// Real-space kernel `C_j(0, x)`.
    pub values: Vec<f64>,
    /// Fourier symbol `C_j^(k)`.
    pub symbol: Vec<f64>,
}

impl ScaleKernel {
    /// `C_j(0, 0)`.
    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }
}

/// Contract measurements.
#[derive(Clone, Debug, Serialize)]
pub struct ContractReport {
    /// `max |sum_j C_j + t_N Q_N - G| / max |G|` (zero mode projected out
    /// when `m^2 = 0`).
    pub reconstruction: f64,
    /// Per scale `j < N`: `max |C_j(x)|` over `|x|_inf >= L^j / 2`.
    pub range_violation: Vec<f64>,
    /// Per scale: smallest Fourier eigenvalue.
    pub min_eigenvalue: Vec<f64>,
    /// Per scale: `max_x |C_j(x)| * L^{(d-2)(j-1)}`.
    pub scaled_sup: Vec<f64>,
    /// `t_N`, absent at `m^2 = 0`.
    pub t_n: Option<f64>,
    /// `(1/m^2 - t_N) / L^{2N}`.
    pub zero_mode_ratio: Option<f64>,
}

impl ContractReport {
    pub fn max_range_violation(&self) -> f64 {
        self.range_violation.iter().copied().fold(0.0, f64::max)
    }
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min)
    }
    /// `0 < t_N < 1/m^2` (vacuously true at `m^2 = 0`).
    pub fn t_n_in_bounds(&self, m2: f64) -> bool {
        match self.t_n {
            Some(t) => t > 0.0 && t < 1.0 / m2,
            None => true,
        }
    }
}

/// The decomposition `C = sum_{j<=N} C_j + t_N Q_N`.
#[derive(Clone, Debug)]
pub struct CovarianceDecomposition {
    pub torus: Torus,
    pub m2: f64,
    pub backend: Backend,
    kernels: Vec<ScaleKernel>,
    t_n: Option<f64>,
    zero_mode_rest: f64,
    pub report: ContractReport,
}

impl CovarianceDecomposition {
    /// Number of scales `N`.
    pub fn scales(&self) -> usize {
        self.kernels.len()
    }

    /// `C_j` for `j` in `1..=N`.
    pub fn kernel(&self, j: usize) -> &ScaleKernel {
        &self.kernels[j - 1]
    }

    pub fn kernels(&self) -> &[ScaleKernel] {
        &self.kernels
    }

    /// `t_N`; `None` at `m^2 = 0`.
    pub fn t_n(&self) -> Option<f64> {
        self.t_n
    }

    /// `1/m^2 - t_N`, computed without cancellation. At `m^2 = 0` this is
    /// the limit value.
    pub fn zero_mode_rest(&self) -> f64 {
        self.zero_mode_rest
    }

    /// `t_N / |Lambda|`, the constant kernel of `t_N Q_N`.
    pub fn zero_mode_kernel(&self) -> Option<f64> {
        self.t_n.map(|t| t / self.torus.volume() as f64)
    }

    /// `C_j(x, y)`.
    pub fn at(&self, j: usize, x: usize, y: usize) -> f64 {
        self.kernel(j).values[self.torus.difference(y, x)]
    }

    /// `W_N = sum_{j<=N} C_j`, which equals `G - t_N Q_N`.
    pub fn w_kernel(&self) -> Vec<f64> {
        let v = self.torus.volume();
        (0..v).map(|x| ksum(self.kernels.iter().map(|k| k.values[x]))).collect()
    }
}

/// `(C_j(0, 0), Delta C_j(0, 0))`, the two Wick coefficients of the bulk
/// flow, computed in real space.
pub fn laplacian_at_zero(torus: &Torus, kernel: &ScaleKernel) -> (f64, f64) {
    (kernel.values[0], freefield::laplacian_at_origin(torus, &kernel.values))
}

/// `Delta C_j(0, 0) = -|Lambda|^{-1} sum_k lambda(k) C_j^(k)`, from the symbol.
pub fn laplacian_at_zero_fourier(torus: &Torus, kernel: &ScaleKernel) -> f64 {
    let lam = laplacian_symbol(torus);
    -ksum(lam.iter().zip(&kernel.symbol).map(|(l, c)| l * c)) / torus.volume() as f64
}

/// Build the decomposition and measure its contract.
pub fn decompose(torus: &Torus, m2: f64, backend: Backend) -> Result<CovarianceDecomposition> {
    if m2.is_nan() || m2 < 0.0 || !m2.is_finite() {
        return Err(Error::InvalidArgument(format!("m^2 = {m2} must be finite and >= 0")));
    }
    let n = torus.scales();
    let l = torus.block() as f64;
    let d = torus.dim();
    let lam = laplacian_symbol(torus);
    let norm = 2.0 * d as f64 + m2;
    let vol = torus.volume();

    // symbols[j-1] for j = 1..N-1, plus remainder
    let mut symbols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let rest_at_zero;
    match backend {
        Backend::Polynomial => {
            let pw = PolyWindow::new()?;
            let top = 4.0 * d as f64 + m2;
            let coeffs: Vec<Vec<f64>> = (0..n)
                .map(|j| if j == 0 { vec![0.0] } else { pw.coefficients(l.powi(j as i32) / 2.0 - 1.0) })
                .collect();
            let s = |j: usize, u: f64| if j == 0 { 0.0 } else { eval_cos_series(&coeffs[j], u) };
            let p = |lk: f64| (4.0 * d as f64 - lk) / top;
            for j in 1..n {
                symbols.push(lam.iter().map(|&lk| {
                    let u = (lk + m2) / norm;
                    let c = p(lk) * (s(j, u) - s(j - 1, u)) / norm;
                    if j == 1 { c + 1.0 / top } else { c }
                }).collect());
            }
            let mut last: Vec<f64> = lam.iter().map(|&lk| {
                let u = (lk + m2) / norm;
                if lk + m2 == 0.0 { 0.0 } else { p(lk) * (1.0 / u - s(n - 1, u)) / norm }
            }).collect();
            rest_at_zero = 1.0 / top + p(0.0) * s(n - 1, m2 / norm) / norm;
            if n == 1 {
                // no C_1 slot below the remainder: the constant joins C_{N,N}
                last.iter_mut().for_each(|v| *v += 1.0 / top);
            }
            last[0] = 0.0;
            symbols.push(last);
        }
        Backend::Bump { tolerance } => {
            let cuts = heat_cut_times(torus, tolerance);
            let slice = |a: f64, b: f64, x: f64| -> f64 {
                if x == 0.0 {
                    b - a
                } else {
                    ((-a * x).exp() - (-b * x).exp()) / x
                }
            };
            for j in 1..n {
                symbols.push(lam.iter().map(|&lk| slice(cuts[j - 1], cuts[j], lk + m2)).collect());
            }
            let s_last = cuts[n - 1];
            let mut last: Vec<f64> = lam.iter().map(|&lk| {
                let x = lk + m2;
                if x == 0.0 { 0.0 } else { (-s_last * x).exp() / x }
            }).collect();
            rest_at_zero = if m2 == 0.0 { s_last } else { -(-s_last * m2).exp_m1() / m2 };
            last[0] = 0.0;
            symbols.push(last);
        }
    }
    let t_n = (m2 > 0.0).then(|| 1.0 / m2 - rest_at_zero);

    let kernels: Vec<ScaleKernel> = symbols
        .into_iter()
        .enumerate()
        .map(|(i, sym)| ScaleKernel { j: i + 1, values: kernel_from_symbol(torus, &sym), symbol: sym })
        .collect();

    // contract
    let target = if m2 > 0.0 {
        freefield::green(torus, m2)?
    } else {
        freefield::green_zero_mode_removed(torus, 0.0)?
    };
    let zm = t_n.map_or(0.0, |t| t / vol as f64);
    let mut sum: Vec<f64> = (0..vol).map(|x| ksum(kernels.iter().map(|k| k.values[x])) + zm).collect();
    if m2 == 0.0 {
        let mean = ksum(sum.iter().copied()) / vol as f64;
        sum.iter_mut().for_each(|v| *v -= mean);
    }
    let gmax = target.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let reconstruction = sum.iter().zip(target.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / gmax;

    let linf: Vec<usize> = (0..vol).map(|x| torus.distances(0, x).0).collect();
    let range_violation = (1..n)
        .map(|j| {
            let r = l.powi(j as i32) / 2.0;
            kernels[j - 1]
                .values
                .iter()
                .zip(&linf)
                .filter(|(_, &dx)| dx as f64 >= r)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let min_eigenvalue = kernels.iter().map(|k| k.symbol.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let scaled_sup = kernels
        .iter()
        .map(|k| {
            let sup = k.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            sup * l.powi(((d as i32) - 2) * (k.j as i32 - 1))
        })
        .collect();
    let report = ContractReport {
        reconstruction,
        range_violation,
        min_eigenvalue,
        scaled_sup,
        t_n,
        zero_mode_ratio: t_n.map(|_| rest_at_zero / l.powi(2 * n as i32)),
    };
    if let Backend::Bump { tolerance } = backend {
        let v = report.max_range_violation();
        if v > tolerance {
            return Err(Error::Contract(format!(
                "heat-kernel backend range violation {v:e} exceeds tolerance {tolerance:e}"
            )));
        }
    }
    Ok(CovarianceDecomposition { torus: torus.clone(), m2, backend, kernels, t_n, zero_mode_rest: rest_at_zero, report })
}

/// `e^{-2t} I_r(2t)`: the one-dimensional continuous-time walk kernel at
/// distance `r`, by its power series.
pub fn walk_kernel_1d(r: usize, t: f64) -> f64 {
    if t == 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    // log of first term t^r / r!
    let mut log_term = r as f64 * t.ln() - (1..=r).map(|k| (k as f64).ln()).sum::<f64>();
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let term = (log_term - 2.0 * t).exp();
        sum += term;
        if k > 10 && term < 1e-18 * sum {
            break;
        }
        k += 1;
        log_term += 2.0 * t.ln() - ((k * (k + r)) as f64).ln();
        if k > 100_000 {
            break;
        }
    }
    sum
}

/// Cut times `s_0 = 0 < s_1 < ... < s_{N-1}` such that
/// `int_0^{s_j} e^{-2t} I_R(2t) dt <= tolerance` with `R = ceil(L^j / 2)`:
/// the mass the slice can put at `|x|_inf >= L^j / 2`.
pub fn heat_cut_times(torus: &Torus, tolerance: f64) -> Vec<f64> {
    let n = torus.scales();
    let l = torus.block() as f64;
    let gl = gauss_legendre(24);
    let mut cuts = vec![0.0];
    for j in 1..n {
        let r = (l.powi(j as i32) / 2.0).ceil() as usize;
        let tail = |s: f64| integrate_gl(|t| walk_kernel_1d(r, t), 0.0, s, &gl);
        let (mut lo, mut hi) = (0.0, 1.0);
        while tail(hi) < tolerance && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) < tolerance {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let prev = *cuts.last().unwrap();
        cuts.push(lo.max(prev));
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bspline_is_normalised_and_symmetric() {
        let gl = gauss_legendre(16);
        let total: f64 = (-4..4).map(|k| integrate_gl(|x| cardinal_bspline(8, x), k as f64, k as f64 + 1.0, &gl)).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!((cardinal_bspline(8, 0.0) - 151.0 / 315.0).abs() < 1e-15);
        assert_eq!(cardinal_bspline(8, 1.3), cardinal_bspline(8, -1.3));
    }

    #[test]
    fn normalisation_matches_sinc_integral() {
        // M = 16 int_0^inf sin^8(y) / y^7 dy, an independent route
        let gl = gauss_legendre(32);
        let f = |y: f64| if y == 0.0 { 0.0 } else { y.sin().powi(8) / y.powi(7) };
        let mut parts = Vec::new();
        let step = std::f64::consts::PI / 2.0;
        for k in 0..20000 {
            parts.push(integrate_gl(f, k as f64 * step, (k + 1) as f64 * step, &gl));
        }
        // tail beyond the last node: sin^8 averages to 35/128
        let y_end = 20000.0 * step;
        let tail = 35.0 / 128.0 / (6.0 * y_end.powi(6));
        let m = 16.0 * (ksum(parts) + tail);
        let pw = PolyWindow::new().unwrap();
        assert!((pw.m() - m).abs() < 1e-12, "{} vs {m}", pw.m());
    }

    #[test]
    fn partial_sums_converge_to_inverse() {
        let pw = PolyWindow::new().unwrap();
        for &u in &[0.3, 0.7, 1.0, 1.5, 2.0] {
            let c = pw.coefficients(800.0);
            assert!((eval_cos_series(&c, u) - 1.0 / u).abs() < 1e-10, "u={u} {}", eval_cos_series(&c, u));
        }
        // monotone in T and below 1/u
        for &u in &[0.05, 0.5, 1.9] {
            let mut prev = 0.0;
            for t in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
                let v = eval_cos_series(&pw.coefficients(t), u);
                assert!(v >= prev - 1e-14 && v <= 1.0 / u + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn walk_kernel_sums_to_one() {
        let t = 3.7;
        let total = walk_kernel_1d(0, t) + 2.0 * (1..80).map(|r| walk_kernel_1d(r, t)).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn decompose_small_example() {
        let t = Torus::new(2, 2, 3).unwrap();
        let dec = decompose(&t, 0.5, Backend::Polynomial).unwrap();
        assert!(dec.report.reconstruction < 1e-10);
        assert!(dec.report.max_range_violation() < 1e-13);
        assert!(dec.report.min_eigenvalue() > -1e-10);
        let t4 = Torus::new(2, 2, 2).unwrap();
        let dec = decompose(&t4, 4.0, Backend::Polynomial).unwrap();
        let tn = dec.t_n().unwrap();
        assert!(tn > 0.0 && tn < 0.25);
    }
}
