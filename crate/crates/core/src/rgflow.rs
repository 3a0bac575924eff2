//! Coupling-constant flows of the renormalisation group at `K = 0`.
//!
//! The bulk potential at a point is
//! `V = y (grad psi)(grad psibar) + (z/2)((-Delta psi) psibar + psi (-Delta psibar))
//!      + a psi psibar + b psi psibar (grad psi)(grad psibar)`
//! and one step `V_j -> V_{j+1}` is the Wick convolution with `C_{j+1}`.
//! Observable couplings follow the free observable flow; the last step is
//! either a convolution with `C_{N+1} = t_N Q_N` (the `N+1` pipeline) or the
//! explicit zero-mode integration (the `(N,N)` pipeline).

use crate::error::{Error, Result};
use crate::frd::{self, CovarianceDecomposition};
use crate::lattice::Torus;
use serde::Serialize;

/// Wick coefficients of one covariance kernel at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WickCoefficients {
    /// `C(0, 0)`.
    pub c0: f64,
    /// `Delta C(0, 0) = sum_{e} (C(e) - C(0))` over the `2d` unit vectors.
    pub lap: f64,
    pub d: usize,
}

impl WickCoefficients {
    pub fn new(c0: f64, lap: f64, d: usize) -> Self {
        WickCoefficients { c0, lap, d }
    }

    /// `C(e)` for a unit vector `e`.
    pub fn c_e(&self) -> f64 {
        self.c0 + self.lap / (2.0 * self.d as f64)
    }

    /// `kappa^{yb} = -C(0)`.
    pub fn kappa_yb(&self) -> f64 {
        -self.c0
    }

    /// `kappa^{ab} = Delta C(0)`.
    pub fn kappa_ab(&self) -> f64 {
        self.lap
    }

    /// Coefficients of the sum of two kernels.
    pub fn plus(&self, o: &Self) -> Self {
        WickCoefficients { c0: self.c0 + o.c0, lap: self.lap + o.lap, d: self.d }
    }
}

/// Bulk couplings `(z, y, a, b)` and the accumulated constant `u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BulkCouplings {
    pub z: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
    pub u: f64,
}

/// One bulk step: `z~ = z`, `y~ = y - C(0) b`, `a~ = a + Delta C(0) b`,
/// `b~ = b`. The constant part of the Wick convolution,
/// `-a C(0) + (y + z) Delta C(0) + d b (C(0)^2 - C(e)^2)` per site, is added
/// to `u`.
///
/// The exact convolution also shifts `z` by `(C(0) - C(e)) b`; that term is
/// not part of this recursion (see [`exact_z_shift`]).
pub fn bulk_step(c: &BulkCouplings, w: &WickCoefficients) -> BulkCouplings {
    let ce = w.c_e();
    let du = -c.a * w.c0 + (c.y + c.z) * w.lap + c.b * w.d as f64 * (w.c0 * w.c0 - ce * ce);
    BulkCouplings {
        z: c.z,
        y: c.y + w.kappa_yb() * c.b,
        a: c.a + w.kappa_ab() * c.b,
        b: c.b,
        u: c.u + du,
    }
}

/// The `z` shift `(C(0) - C(e)) b` produced by the exact Wick convolution of
/// the quartic term, which the bulk recursion omits.
pub fn exact_z_shift(c: &BulkCouplings, w: &WickCoefficients) -> f64 {
    (w.c0 - w.c_e()) * c.b
}

/// Rescaled couplings `z^ = z`, `y^ = y`, `a^ = L^{2j} a`,
/// `b^ = L^{-(d-2) j} b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RescaledCouplings {
    pub z: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

pub fn rescale(c: &BulkCouplings, l: usize, d: usize, j: usize) -> RescaledCouplings {
    let lf = l as f64;
    RescaledCouplings {
        z: c.z,
        y: c.y,
        a: lf.powi(2 * j as i32) * c.a,
        b: lf.powi(-((d as i32 - 2) * j as i32)) * c.b,
    }
}

/// Inverse of [`rescale`]; `u` is not part of the rescaled state.
pub fn unrescale(r: &RescaledCouplings, l: usize, d: usize, j: usize, u: f64) -> BulkCouplings {
    let lf = l as f64;
    BulkCouplings {
        z: r.z,
        y: r.y,
        a: lf.powi(-2 * j as i32) * r.a,
        b: lf.powi((d as i32 - 2) * j as i32) * r.b,
        u,
    }
}

/// Rescaled coefficients `(kappa^{yb}, kappa^{ab})` at scale `j`:
/// `L^{(d-2) j} kappa^{yb}` and `L^{d j + 2} kappa^{ab}`. The extra `L^2`
/// in the second makes the rescaled step agree exactly with [`bulk_step`].
pub fn rescaled_kappas(w: &WickCoefficients, l: usize, j: usize) -> (f64, f64) {
    let lf = l as f64;
    let d = w.d as i32;
    (lf.powi((d - 2) * j as i32) * w.kappa_yb(), lf.powi(d * j as i32 + 2) * w.kappa_ab())
}

/// One rescaled step from scale `j` to `j + 1`:
/// `y^ += kappa^^{yb} b^`, `a^ = L^2 a^ + kappa^^{ab} b^`, `b^ = L^{-(d-2)} b^`.
pub fn rescaled_step(r: &RescaledCouplings, w: &WickCoefficients, l: usize, j: usize) -> RescaledCouplings {
    let (kyb, kab) = rescaled_kappas(w, l, j);
    let lf = l as f64;
    RescaledCouplings {
        z: r.z,
        y: r.y + kyb * r.b,
        a: lf * lf * r.a + kab * r.b,
        b: lf.powi(-(w.d as i32 - 2)) * r.b,
    }
}

/// Which observable pair is tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ObservableCase {
    /// `sigma_a psibar_a` and `psi_b sigmabar_b`: the two-point function
    /// `<psibar_a psi_b>`.
    One,
    /// `sigma_a psibar_a psi_a` and `sigma_b psibar_b psi_b`: the truncated
    /// energy-energy correlation.
    Two,
}

/// Observable couplings. `gamma_a`, `gamma_b` and `eta` are used only in
/// case two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObservableCouplings {
    pub case: ObservableCase,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub q: f64,
    pub eta: f64,
    pub r: f64,
}

impl ObservableCouplings {
    /// Initial couplings `lambda_a = lambda_b = lambda`, all others zero.
    pub fn initial(case: ObservableCase, lambda: f64) -> Self {
        ObservableCouplings { case, lambda_a: lambda, lambda_b: lambda, gamma_a: 0.0, gamma_b: 0.0, q: 0.0, eta: 0.0, r: 0.0 }
    }
}

/// Covariance values entering an observable step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairKernel {
    /// `C(a, b)`.
    pub c_ab: f64,
    /// `C(0, 0)`.
    pub c_00: f64,
}

/// One step of the free observable flow, all right-hand sides evaluated at
/// the incoming couplings.
pub fn observable_step(o: &ObservableCouplings, k: &PairKernel) -> ObservableCouplings {
    let ll = o.lambda_a * o.lambda_b;
    match o.case {
        ObservableCase::One => ObservableCouplings { q: o.q + ll * k.c_ab + o.r * k.c_00, ..*o },
        ObservableCase::Two => ObservableCouplings {
            gamma_a: o.gamma_a + o.lambda_a * k.c_00,
            gamma_b: o.gamma_b + o.lambda_b * k.c_00,
            q: o.q + o.eta * k.c_ab + o.r * k.c_00 - ll * k.c_ab * k.c_ab,
            eta: o.eta - 2.0 * ll * k.c_ab,
            ..*o
        },
    }
}

/// Sentinel for an infinite coalescence scale.
pub const J_INFINITE: usize = usize::MAX;

/// `j_ab = floor(log_L(2 |a - b|_inf))`, or [`J_INFINITE`] when `a = b`.
pub fn coalescence_scale(a: usize, b: usize, torus: &Torus) -> usize {
    let (dist, _) = torus.distances(a, b);
    if dist == 0 {
        return J_INFINITE;
    }
    let l = torus.block();
    let target = 2 * dist;
    let mut j = 0;
    let mut p = l;
    while p <= target {
        j += 1;
        p *= l;
    }
    j
}

/// Zero-mode state `(a~, u~, k0, k2)` with `u~ = k0 + a~ t_N`. At `K = 0`
/// both `k0` and `k2` vanish.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroModeState {
    pub a_tilde: f64,
    pub u_tilde: f64,
    pub k0: f64,
    pub k2: f64,
}

impl ZeroModeState {
    pub fn new(a_tilde: f64, t_n: f64) -> Self {
        ZeroModeState { a_tilde, u_tilde: a_tilde * t_n, k0: 0.0, k2: 0.0 }
    }
}

/// `chi = 1/m^2 - a~ / (m^4 (1 + u~))`.
pub fn susceptibility(a_tilde: f64, u_tilde: f64, m2: f64) -> Result<f64> {
    if m2.is_nan() || m2 <= 0.0 {
        return Err(Error::InvalidArgument(format!("m^2 = {m2} must be > 0")));
    }
    if 1.0 + u_tilde == 0.0 {
        return Err(Error::InvalidArgument("1 + u~ = 0".into()));
    }
    Ok(1.0 / m2 - a_tilde / (m2 * m2 * (1.0 + u_tilde)))
}

/// Zero-mode observable coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ZeroModeObservables {
    /// `Z~^{sigmabar_b sigma_a}`.
    One { sigma_ba: f64 },
    /// `Z~^{sigma_a}`, `Z~^{sigma_b}`, `Z~^{sigma_a sigma_b}`.
    Two { sigma_a: f64, sigma_b: f64, sigma_ab: f64 },
}

/// The zero-mode observable formulas with all remainder constants zero.
pub fn zero_mode_observables(o: &ObservableCouplings, zm: &ZeroModeState, t_n: f64, volume: usize) -> ZeroModeObservables {
    let tp = t_n / volume as f64;
    let one_u = 1.0 + zm.u_tilde;
    match o.case {
        ObservableCase::One => ZeroModeObservables::One {
            sigma_ba: o.q * one_u + (o.lambda_a * o.lambda_b + o.r) * tp,
        },
        ObservableCase::Two => ZeroModeObservables::Two {
            sigma_a: o.gamma_a * one_u + o.lambda_a * tp,
            sigma_b: o.gamma_b * one_u + o.lambda_b * tp,
            sigma_ab: (o.q + o.gamma_a * o.gamma_b) * one_u
                + (o.eta + o.r + o.lambda_a * o.gamma_b + o.lambda_b * o.gamma_a) * tp,
        },
    }
}

/// Correlation functions read off from zero-mode observables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlators {
    /// Case one: `<psibar_a psi_b>`. Case two: `<psibar_a psi_a; psibar_b psi_b>`.
    pub two_point: f64,
    /// Case two: `<psibar_a psi_a>` and `<psibar_b psi_b>`.
    pub one_point: Option<(f64, f64)>,
}

/// Correlators from the `(N,N)` pipeline.
pub fn correlators_nn(o0: &ObservableCouplings, z: &ZeroModeObservables, zm: &ZeroModeState) -> Correlators {
    let one_u = 1.0 + zm.u_tilde;
    let ll = o0.lambda_a * o0.lambda_b;
    match *z {
        ZeroModeObservables::One { sigma_ba } => Correlators { two_point: sigma_ba / (ll * one_u), one_point: None },
        ZeroModeObservables::Two { sigma_a, sigma_b, sigma_ab } => {
            let (a, b, dd) = (sigma_a / one_u, sigma_b / one_u, sigma_ab / one_u);
            Correlators {
                two_point: (dd - a * b) / ll,
                one_point: Some((a / o0.lambda_a, b / o0.lambda_b)),
            }
        }
    }
}

/// Correlators from the `N+1` pipeline.
pub fn correlators_n1(o0: &ObservableCouplings, o: &ObservableCouplings) -> Correlators {
    let ll = o0.lambda_a * o0.lambda_b;
    match o.case {
        ObservableCase::One => Correlators { two_point: o.q / ll, one_point: None },
        ObservableCase::Two => Correlators {
            two_point: o.q / ll,
            one_point: Some((o.gamma_a / o0.lambda_a, o.gamma_b / o0.lambda_b)),
        },
    }
}

/// `(beta, h)` from `(m^2, s_0, a_0, b_0)`:
/// `beta = (1 + s_0)^2 / b_0`, `h = -1 + (a_0 + m^2)(1 + s_0) / b_0`.
pub fn beta_h_from_couplings(m2: f64, s0: f64, a0: f64, b0: f64) -> Result<(f64, f64)> {
    if b0 == 0.0 {
        return Err(Error::InvalidArgument("b_0 = 0".into()));
    }
    if 1.0 + s0 <= 0.0 {
        return Err(Error::InvalidArgument("1 + s_0 must be positive".into()));
    }
    Ok(((1.0 + s0).powi(2) / b0, -1.0 + (a0 + m2) * (1.0 + s0) / b0))
}

/// Inverse direction: `(m^2, b_0)` from `(beta, h, s_0, a_0)`:
/// `b_0 = (1 + s_0)^2 / beta`, `m^2 = (1 + s_0)(1 + h) / beta - a_0`.
pub fn couplings_from_beta_h(beta: f64, h: f64, s0: f64, a0: f64) -> Result<(f64, f64)> {
    if beta == 0.0 {
        return Err(Error::InvalidArgument("beta = 0".into()));
    }
    if 1.0 + s0 <= 0.0 {
        return Err(Error::InvalidArgument("1 + s_0 must be positive".into()));
    }
    Ok(((1.0 + s0) * (1.0 + h) / beta - a0, (1.0 + s0).powi(2) / beta))
}

/// Final step convention of the observable flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FinalStep {
    /// Convolve once more with `C_{N+1} = t_N Q_N`.
    ZeroModeStep,
    /// Stop at `N` and apply the zero-mode formulas.
    ZeroModeIntegration,
}

/// One row of a flow trajectory: couplings at scale `j`.
#[derive(Clone, Debug, Serialize)]
pub struct FlowRow {
    pub j: usize,
    pub bulk: BulkCouplings,
    pub rescaled: RescaledCouplings,
    pub observable: ObservableCouplings,
    /// `C_{j+1}(a, b)` and `C_{j+1}(0, 0)` used to leave scale `j` (absent
    /// on the last row).
    pub next_kernel: Option<PairKernel>,
}

/// Full flow output.
#[derive(Clone, Debug, Serialize)]
pub struct FlowResult {
    pub rows: Vec<FlowRow>,
    /// Observable couplings after the `C_{N+1}` step (requires `m^2 > 0`).
    pub observable_n1: Option<ObservableCouplings>,
    pub zero_mode: Option<ZeroModeState>,
    pub zero_mode_observables: Option<ZeroModeObservables>,
    pub correlators_n1: Option<Correlators>,
    pub correlators_nn: Option<Correlators>,
    pub coalescence_scale: usize,
}

/// Run bulk and observable flows through all scales of `dec` for the marked
/// points `a`, `b`, and evaluate both final-step pipelines when `m^2 > 0`.
pub fn run_flow(dec: &CovarianceDecomposition, bulk0: BulkCouplings, obs0: ObservableCouplings, a: usize, b: usize) -> Result<FlowResult> {
    let torus = &dec.torus;
    let n = dec.scales();
    let (l, d) = (torus.block(), torus.dim());
    if a >= torus.volume() || b >= torus.volume() {
        return Err(Error::InvalidArgument("marked point outside the torus".into()));
    }
    let mut rows = Vec::with_capacity(n + 1);
    let mut bulk = bulk0;
    let mut obs = obs0;
    for j in 0..n {
        let k = dec.kernel(j + 1);
        let (c0, lap) = frd::laplacian_at_zero(torus, k);
        let w = WickCoefficients::new(c0, lap, d);
        let pk = PairKernel { c_ab: dec.at(j + 1, a, b), c_00: c0 };
        rows.push(FlowRow { j, bulk, rescaled: rescale(&bulk, l, d, j), observable: obs, next_kernel: Some(pk) });
        bulk = bulk_step(&bulk, &w);
        obs = observable_step(&obs, &pk);
    }
    rows.push(FlowRow { j: n, bulk, rescaled: rescale(&bulk, l, d, n), observable: obs, next_kernel: None });

    let mut res = FlowResult {
        rows,
        observable_n1: None,
        zero_mode: None,
        zero_mode_observables: None,
        correlators_n1: None,
        correlators_nn: None,
        coalescence_scale: coalescence_scale(a, b, torus),
    };
    if let Some(t_n) = dec.t_n() {
        let tp = t_n / torus.volume() as f64;
        let o1 = observable_step(&obs, &PairKernel { c_ab: tp, c_00: tp });
        let zm = ZeroModeState::new(bulk.a, t_n);
        let zo = zero_mode_observables(&obs, &zm, t_n, torus.volume());
        res.correlators_n1 = Some(correlators_n1(&obs0, &o1));
        res.correlators_nn = Some(correlators_nn(&obs0, &zo, &zm));
        res.observable_n1 = Some(o1);
        res.zero_mode = Some(zm);
        res.zero_mode_observables = Some(zo);
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> WickCoefficients {
        WickCoefficients::new(0.3, -0.4, 3)
    }

    #[test]
    fn zero_b_leaves_couplings() {
        let c = BulkCouplings { z: 0.1, y: 0.2, a: 0.3, b: 0.0, u: 0.0 };
        let n = bulk_step(&c, &w());
        assert_eq!((n.z, n.y, n.a, n.b), (c.z, c.y, c.a, c.b));
    }

    #[test]
    fn first_step_from_pure_quartic() {
        let c = BulkCouplings { b: 0.05, ..Default::default() };
        let n = bulk_step(&c, &w());
        assert_eq!(n.y, -0.3 * 0.05);
        assert_eq!(n.a, -0.4 * 0.05);
    }

    #[test]
    fn coalescence_examples() {
        let t = Torus::new(2, 2, 3).unwrap();
        assert_eq!(coalescence_scale(0, t.index(&[1, 0]), &t), 1);
        assert_eq!(coalescence_scale(0, 0, &t), J_INFINITE);
        assert_eq!(coalescence_scale(0, t.index(&[2, 1]), &t), 2);
        assert_eq!(coalescence_scale(0, t.index(&[3, 0]), &t), 2);
        assert_eq!(coalescence_scale(0, t.index(&[4, 4]), &t), 3);
    }

    #[test]
    fn susceptibility_basics() {
        assert_eq!(susceptibility(0.0, 0.0, 0.5).unwrap(), 2.0);
        assert!(susceptibility(0.1, -1.0, 0.5).is_err());
        assert!(susceptibility(0.01, 0.0, 0.5).unwrap() < susceptibility(0.0, 0.0, 0.5).unwrap());
    }

    #[test]
    fn change_of_variables() {
        let (beta, h) = beta_h_from_couplings(0.0, 0.0, 0.0, 0.1).unwrap();
        assert!((beta - 10.0).abs() < 1e-14 && (h + 1.0).abs() < 1e-14);
        let (m2, s0, a0, b0) = (0.3, 0.2, 0.05, 0.4);
        let (beta, h) = beta_h_from_couplings(m2, s0, a0, b0).unwrap();
        let (m2b, b0b) = couplings_from_beta_h(beta, h, s0, a0).unwrap();
        assert!((m2b - m2).abs() < 1e-14 && (b0b - b0).abs() < 1e-14);
        // h = 0 exactly when (a0 + m2)(1 + s0) = b0
        let (_, h) = beta_h_from_couplings(0.25, 0.0, 0.25, 0.5).unwrap();
        assert_eq!(h, 0.0);
        assert!(beta_h_from_couplings(0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_couplings_give_zero_observables() {
        let o = ObservableCouplings::initial(ObservableCase::Two, 0.0);
        let zm = ZeroModeState::new(0.0, 1.0);
        assert_eq!(
            zero_mode_observables(&o, &zm, 1.0, 8),
            ZeroModeObservables::Two { sigma_a: 0.0, sigma_b: 0.0, sigma_ab: 0.0 }
        );
    }
}
