//! Lattice Green functions on tori by FFT, the kernel `W_N`, and reference
//! values of the Green function of `Z^d`.
//!
//! Fourier modes use the same index layout as vertices: mode `n` has
//! wavevector `k = 2 pi n / side` componentwise, and the Laplacian symbol is
//! `lambda(k) = 4 sum_j sin^2(k_j / 2)`.

use crate::error::{Error, Result};
use crate::lattice::Torus;
use crate::numeric::ksum;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place multidimensional DFT along every axis of a torus-shaped array.
/// Unnormalised in both directions.
pub fn fft_nd(torus: &Torus, data: &mut [Complex64], inverse: bool) {
    let side = torus.side();
    let d = torus.dim();
    assert_eq!(data.len(), torus.volume());
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = side.pow((d - 1 - axis) as u32);
        for start in 0..torus.volume() {
            // visit each line once: coordinate along `axis` must be zero
            if (start / stride) % side != 0 {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

/// `lambda(k)` at every Fourier mode.
pub fn laplacian_symbol(torus: &Torus) -> Vec<f64> {
    let side = torus.side() as f64;
    let s1: Vec<f64> = (0..torus.side())
        .map(|n| {
            let s = (std::f64::consts::PI * n as f64 / side).sin();
            4.0 * s * s
        })
        .collect();
    (0..torus.volume()).map(|k| torus.coords(k).iter().map(|&n| s1[n]).sum()).collect()
}

/// Kernel `K(x) = |Lambda|^{-1} sum_k s(k) e^{ikx}` of a translation-invariant
/// operator with real even symbol `s`.
pub fn kernel_from_symbol(torus: &Torus, symbol: &[f64]) -> Vec<f64> {
    assert_eq!(symbol.len(), torus.volume());
    let mut buf: Vec<Complex64> = symbol.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fft_nd(torus, &mut buf, true);
    let v = torus.volume() as f64;
    buf.iter().map(|c| c.re / v).collect()
}

/// Symbol `s(k) = sum_x K(x) e^{-ikx}` of a real even kernel.
pub fn symbol_from_kernel(torus: &Torus, kernel: &[f64]) -> Vec<f64> {
    assert_eq!(kernel.len(), torus.volume());
    let mut buf: Vec<Complex64> = kernel.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fft_nd(torus, &mut buf, false);
    buf.iter().map(|c| c.re).collect()
}

/// Apply `(-Delta + m^2)` to a kernel in real space.
pub fn apply_massive_laplacian(torus: &Torus, m2: f64, kernel: &[f64]) -> Vec<f64> {
    let d2 = 2.0 * torus.dim() as f64;
    (0..torus.volume())
        .map(|x| {
            let nb = ksum(torus.neighbors(x).map(|y| kernel[y]));
            (d2 + m2) * kernel[x] - nb
        })
        .collect()
}

/// `Delta K (0) = sum_{y ~ 0} (K(y) - K(0))`, computed in real space.
pub fn laplacian_at_origin(torus: &Torus, kernel: &[f64]) -> f64 {
    ksum(torus.neighbors(0).map(|y| kernel[y] - kernel[0]))
}

/// Translation-invariant Green function `G(x) = (-Delta + m^2)^{-1}(0, x)`.
#[derive(Clone, Debug)]
pub struct GreenKernel {
    pub torus: Torus,
    pub m2: f64,
    /// Whether the constant mode was projected out.
    pub zero_mode_removed: bool,
    values: Vec<f64>,
}

impl GreenKernel {
    /// Kernel value at offset vertex `x` (displacement from the origin).
    pub fn value(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// `G(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[self.torus.difference(y, x)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        ksum(self.values.iter().copied())
    }

    /// `max_x |((-Delta + m^2) G)(x) - delta_0(x)|`, with the delta replaced
    /// by `delta_0 - 1/|Lambda|` when the zero mode is removed.
    pub fn operator_residual(&self) -> f64 {
        let r = apply_massive_laplacian(&self.torus, self.m2, &self.values);
        let proj = if self.zero_mode_removed { 1.0 / self.torus.volume() as f64 } else { 0.0 };
        r.iter()
            .enumerate()
            .map(|(x, v)| (v - if x == 0 { 1.0 } else { 0.0 } + proj).abs())
            .fold(0.0, f64::max)
    }
}

/// `(-Delta + m^2)^{-1}` on the torus; requires `m^2 > 0`.
pub fn green(torus: &Torus, m2: f64) -> Result<GreenKernel> {
    if m2.is_nan() || m2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "m^2 = {m2}: the full inverse needs m^2 > 0; use green_zero_mode_removed"
        )));
    }
    let sym: Vec<f64> = laplacian_symbol(torus).iter().map(|l| 1.0 / (l + m2)).collect();
    Ok(GreenKernel { torus: torus.clone(), m2, zero_mode_removed: false, values: kernel_from_symbol(torus, &sym) })
}

/// `(-Delta + m^2)^{-1}` restricted to the complement of constants;
/// `m^2 >= 0`.
pub fn green_zero_mode_removed(torus: &Torus, m2: f64) -> Result<GreenKernel> {
    if m2.is_nan() || m2 < 0.0 {
        return Err(Error::InvalidArgument(format!("m^2 = {m2} must be >= 0")));
    }
    let mut sym: Vec<f64> = laplacian_symbol(torus).iter().map(|l| 1.0 / (l + m2)).collect();
    sym[0] = 0.0;
    Ok(GreenKernel { torus: torus.clone(), m2, zero_mode_removed: true, values: kernel_from_symbol(torus, &sym) })
}

/// `W_N(x) = G(x) - t_N / |Lambda|`. The zero mode is evaluated as
/// `1/m^2 - t_N`, so the large constant `1/m^2` never enters real space.
pub fn w_kernel(torus: &Torus, m2: f64, t_n: f64) -> Result<Vec<f64>> {
    if m2.is_nan() || m2 <= 0.0 {
        return Err(Error::InvalidArgument(format!("m^2 = {m2} must be > 0")));
    }
    w_kernel_from_zero_mode(torus, m2, 1.0 / m2 - t_n)
}

/// `W_N` with its zero-mode symbol `1/m^2 - t_N` supplied directly, which is
/// well defined down to `m^2 = 0`.
pub fn w_kernel_from_zero_mode(torus: &Torus, m2: f64, zero_mode: f64) -> Result<Vec<f64>> {
    let mut sym: Vec<f64> = laplacian_symbol(torus).iter().map(|l| 1.0 / (l + m2)).collect();
    sym[0] = zero_mode;
    Ok(kernel_from_symbol(torus, &sym))
}

/// Torus approximations of the `Z^d` Green function, extrapolated in the
/// side length.
#[derive(Clone, Debug)]
pub struct ZdGreen {
    pub d: usize,
    /// Sides used, increasing.
    pub sides: Vec<usize>,
    kernels: Vec<GreenKernel>,
}

impl ZdGreen {
    /// Default side sequence for dimension `d`.
    pub fn default_sides(d: usize) -> Vec<usize> {
        match d {
            3 => vec![32, 64, 128],
            4 => vec![12, 16, 24],
            _ => vec![6, 8, 12],
        }
    }

    /// Zero-mode-removed massless kernels for each side.
    pub fn compute(d: usize, sides: &[usize]) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidArgument(format!("the Z^d Green function needs d >= 3, got {d}")));
        }
        if sides.len() < 2 {
            return Err(Error::InvalidArgument("need at least two sides to extrapolate".into()));
        }
        let kernels = sides
            .iter()
            .map(|&s| green_zero_mode_removed(&Torus::with_side(d, s)?, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(ZdGreen { d, sides: sides.to_vec(), kernels })
    }

    fn raw(&self, i: usize, x: &[i64]) -> f64 {
        let k = &self.kernels[i];
        k.value(k.torus.index(x))
    }

    /// Torus values `G_S(x)` for each side.
    pub fn raw_values(&self, x: &[i64]) -> Vec<f64> {
        (0..self.sides.len()).map(|i| self.raw(i, x)).collect()
    }

    /// Richardson extrapolation from sides `i` and `i + 1`, assuming a
    /// finite-size correction proportional to `S^{-(d-2)}`.
    pub fn extrapolate_pair(&self, i: usize, x: &[i64]) -> f64 {
        let p = (self.d - 2) as i32;
        let (s1, s2) = (self.sides[i] as f64, self.sides[i + 1] as f64);
        let (g1, g2) = (self.raw(i, x), self.raw(i + 1, x));
        (s2.powi(p) * g2 - s1.powi(p) * g1) / (s2.powi(p) - s1.powi(p))
    }

    /// Extrapolated value from the two largest sides.
    pub fn value(&self, x: &[i64]) -> f64 {
        self.extrapolate_pair(self.sides.len() - 2, x)
    }

    /// Difference between the extrapolations from the two largest pairs of
    /// sides (zero if only two sides are available).
    pub fn stability(&self, x: &[i64]) -> f64 {
        let k = self.sides.len();
        if k < 3 {
            return 0.0;
        }
        (self.extrapolate_pair(k - 2, x) - self.extrapolate_pair(k - 3, x)).abs()
    }

    /// Least-squares fit of `G(r e_1) ~ c_d r^{-(d-2)}` over
    /// `r in [r_min, r_max]`.
    pub fn fit_cd(&self, r_min: usize, r_max: usize) -> f64 {
        let p = (self.d - 2) as i32;
        let mut num = Vec::new();
        let mut den = Vec::new();
        for r in r_min..=r_max {
            let mut x = vec![0i64; self.d];
            x[0] = r as i64;
            let f = (r as f64).powi(-p);
            num.push(self.value(&x) * f);
            den.push(f * f);
        }
        ksum(num) / ksum(den)
    }
}

/// `(-Delta^{Z^d})^{-1}(0, x)` by torus extrapolation over the default sides.
pub fn zd_green_reference(d: usize, x: &[i64]) -> Result<f64> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(ZdGreen::compute(d, &ZdGreen::default_sides(d))?.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_sums_to_inverse_mass() {
        let t = Torus::new(2, 2, 3).unwrap();
        let g = green(&t, 0.3).unwrap();
        assert!((g.sum() * 0.3 - 1.0).abs() < 1e-12);
        assert!(g.value(0) <= 1.0 / 0.3);
        assert!(g.operator_residual() < 1e-10);
        assert!(green(&t, 0.0).is_err());
    }

    #[test]
    fn green_matches_dense_inverse() {
        let t = Torus::with_side(1, 3).unwrap();
        let m2 = 0.7;
        let g = green(&t, m2).unwrap();
        let mut a = nalgebra::DMatrix::<f64>::zeros(3, 3);
        for x in 0..3 {
            a[(x, x)] = 2.0 + m2;
            for y in t.neighbors(x) {
                a[(x, y)] -= 1.0;
            }
        }
        let inv = a.try_inverse().unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert!((inv[(x, y)] - g.at(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fft_round_trip() {
        let t = Torus::with_side(3, 5).unwrap();
        let k: Vec<f64> = (0..t.volume()).map(|x| ((x * 7919) % 13) as f64).collect();
        // symmetrise: only even kernels have real symbols
        let keven: Vec<f64> = (0..t.volume()).map(|x| {
            let c: Vec<i64> = t.coords(x).iter().map(|&c| -(c as i64)).collect();
            0.5 * (k[x] + k[t.index(&c)])
        }).collect();
        let sym_even = symbol_from_kernel(&t, &keven);
        let back = kernel_from_symbol(&t, &sym_even);
        for (a, b) in back.iter().zip(&keven) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
