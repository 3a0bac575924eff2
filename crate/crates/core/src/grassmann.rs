//! Sparse Grassmann algebra over at most 64 ordered generators.
//!
//! An element is a finite sum `sum_S c_S g^S`, where `S` is a bitmask and
//! `g^S` is the product of the generators in `S` in increasing index order.
//! Elements are stored as mask-sorted coefficient vectors with exact zeros
//! removed.
//!
//! For the H^{0|2} model on `n` vertices the generator table is
//! `xi_0, eta_0, xi_1, eta_1, ...` (`xi_x = 2x`, `eta_x = 2x + 1`). For
//! fermionic Gaussian convolution the table is
//! `psibar_0, psi_0, psibar_1, psi_1, ...` (`psibar_x = 2x`, `psi_x = 2x + 1`).
//! Extra generators beyond `2n` are spectators (observable fields).
//!
//! Sign convention: the Berezin integral `int prod_x d_{eta_x} d_{xi_x}` of
//! `xi_0 eta_0 xi_1 eta_1 ...` is `+1`. With it the one-vertex model at
//! `h = 0` has partition function 1, matching the forest side; the choice is
//! locked in by the tests below.

use crate::error::{Error, Result};
use crate::lattice::Graph;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Coefficients with absolute value below this are dropped.
pub const PRUNE: f64 = 1e-300;

/// Named, ordered generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorTable {
    names: Vec<String>,
}

impl GeneratorTable {
    /// `xi_x, eta_x` for `n` vertices.
    pub fn h02(n: usize) -> Self {
        let names = (0..n).flat_map(|x| [format!("xi_{x}"), format!("eta_{x}")]).collect();
        GeneratorTable { names }
    }

    /// `psibar_x, psi_x` for `n` vertices.
    pub fn psi(n: usize) -> Self {
        let names = (0..n).flat_map(|x| [format!("psibar_{x}"), format!("psi_{x}")]).collect();
        GeneratorTable { names }
    }

    /// Append extra generators, e.g. observable fields.
    pub fn with_extra(mut self, extra: &[&str]) -> Self {
        self.names.extend(extra.iter().map(|s| s.to_string()));
        self
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }
    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// The generator with the given name as an element.
    pub fn gen(&self, name: &str) -> Grassmann {
        let i = self.index(name).unwrap_or_else(|| panic!("unknown generator {name}"));
        Grassmann::generator(self.len(), i)
    }

    /// Human-readable form of an element.
    pub fn format(&self, a: &Grassmann) -> String {
        if a.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = a
            .terms
            .iter()
            .map(|&(m, c)| {
                let mono: Vec<&str> = (0..64).filter(|i| m >> i & 1 == 1).map(|i| self.names[i].as_str()).collect();
                if mono.is_empty() {
                    format!("{c}")
                } else {
                    format!("{c}*{}", mono.join("*"))
                }
            })
            .collect();
        parts.join(" + ")
    }
}

/// An element of the Grassmann algebra on `ngen` generators.
#[derive(Clone, PartialEq)]
pub struct Grassmann {
    ngen: usize,
    terms: Vec<(u64, f64)>,
}

impl fmt::Debug for Grassmann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grassmann[{}]{{", self.ngen)?;
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{m:#b}: {c}")?;
        }
        write!(f, "}}")
    }
}

/// Sign of reordering `g^a g^b` into `g^{a|b}` for disjoint masks: the
/// parity of pairs `(i in a, j in b)` with `i > j`.
#[inline]
pub fn reorder_sign(a: u64, b: u64) -> f64 {
    let mut rest = b;
    let mut parity = 0u32;
    while rest != 0 {
        let j = rest.trailing_zeros();
        parity ^= (a.checked_shr(j + 1).unwrap_or(0)).count_ones() & 1;
        rest &= rest - 1;
    }
    if parity == 0 {
        1.0
    } else {
        -1.0
    }
}

fn full_mask(ngen: usize) -> u64 {
    if ngen == 64 {
        u64::MAX
    } else {
        (1u64 << ngen) - 1
    }
}

impl Grassmann {
    fn check(ngen: usize) {
        assert!(ngen <= 64, "at most 64 generators");
    }

    fn from_map(ngen: usize, map: HashMap<u64, f64>) -> Self {
        let mut terms: Vec<(u64, f64)> = map.into_iter().filter(|(_, c)| c.abs() >= PRUNE).collect();
        terms.sort_unstable_by_key(|t| t.0);
        Grassmann { ngen, terms }
    }

    pub fn zero(ngen: usize) -> Self {
        Self::check(ngen);
        Grassmann { ngen, terms: Vec::new() }
    }

    pub fn scalar(ngen: usize, c: f64) -> Self {
        Self::check(ngen);
        let terms = if c.abs() >= PRUNE { vec![(0, c)] } else { Vec::new() };
        Grassmann { ngen, terms }
    }

    pub fn one(ngen: usize) -> Self {
        Self::scalar(ngen, 1.0)
    }

    pub fn generator(ngen: usize, i: usize) -> Self {
        Self::check(ngen);
        assert!(i < ngen, "generator {i} out of range");
        Grassmann { ngen, terms: vec![(1 << i, 1.0)] }
    }

    /// `c * g_{i_1} g_{i_2} ...` in the given order; zero if an index repeats.
    pub fn monomial(ngen: usize, c: f64, gens: &[usize]) -> Self {
        let mut a = Self::scalar(ngen, c);
        for &i in gens {
            a = &a * &Self::generator(ngen, i);
        }
        a
    }

    /// Build from `(mask, coefficient)` pairs; duplicates are summed.
    pub fn from_terms(ngen: usize, terms: impl IntoIterator<Item = (u64, f64)>) -> Self {
        Self::check(ngen);
        let full = full_mask(ngen);
        let mut map = HashMap::new();
        for (m, c) in terms {
            assert_eq!(m & !full, 0, "mask uses generators beyond {ngen}");
            *map.entry(m).or_insert(0.0) += c;
        }
        Self::from_map(ngen, map)
    }

    pub fn ngen(&self) -> usize {
        self.ngen
    }

    pub fn terms(&self) -> &[(u64, f64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mask: u64) -> f64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeff(0)
    }

    /// Coefficient of the product of all generators in table order.
    pub fn top(&self) -> f64 {
        self.coeff(full_mask(self.ngen))
    }

    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| t.0.count_ones() % 2 == 0)
    }

    pub fn is_odd(&self) -> bool {
        self.terms.iter().all(|t| t.0.count_ones() % 2 == 1)
    }

    pub fn even_part(&self) -> Self {
        let terms = self.terms.iter().copied().filter(|t| t.0.count_ones() % 2 == 0).collect();
        Grassmann { ngen: self.ngen, terms }
    }

    pub fn odd_part(&self) -> Self {
        let terms = self.terms.iter().copied().filter(|t| t.0.count_ones() % 2 == 1).collect();
        Grassmann { ngen: self.ngen, terms }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.ngen);
        }
        let terms = self.terms.iter().map(|&(m, x)| (m, c * x)).filter(|t| t.1.abs() >= PRUNE).collect();
        Grassmann { ngen: self.ngen, terms }
    }

    /// Multiply every generator `g_i` by `factors[i]`.
    pub fn scale_generators(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.ngen);
        let terms = self.terms.iter().map(|&(m, c)| {
            let mut f = c;
            let mut rest = m;
            while rest != 0 {
                f *= factors[rest.trailing_zeros() as usize];
                rest &= rest - 1;
            }
            (m, f)
        });
        Self::from_terms(self.ngen, terms)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.ngen, other.ngen, "generator tables differ");
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
            let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
            if take_a {
                out.push(a[i]);
                i += 1;
            } else if take_b {
                out.push((b[j].0, sign * b[j].1));
                j += 1;
            } else {
                let c = a[i].1 + sign * b[j].1;
                if c.abs() >= PRUNE {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Grassmann { ngen: self.ngen, terms: out }
    }

    /// Product in the algebra.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.ngen, other.ngen, "generator tables differ");
        let mut map: HashMap<u64, f64> = HashMap::with_capacity(self.len() * other.len().min(64));
        for &(ma, ca) in &self.terms {
            for &(mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                *map.entry(ma | mb).or_insert(0.0) += reorder_sign(ma, mb) * ca * cb;
            }
        }
        Self::from_map(self.ngen, map)
    }

    /// Left derivative `d/dg_i`: move `g_i` to the front, then delete it.
    pub fn deriv(&self, i: usize) -> Self {
        assert!(i < self.ngen);
        let bit = 1u64 << i;
        let below = bit - 1;
        let terms = self
            .terms
            .iter()
            .filter(|t| t.0 & bit != 0)
            .map(|&(m, c)| {
                let s = if (m & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (m & !bit, s * c)
            })
            .collect();
        Grassmann { ngen: self.ngen, terms }
    }

    /// `exp(A)` for even `A`: `e^{A_0} sum_k N^k / k!` with `N = A - A_0`
    /// nilpotent, so the series stops after at most `ngen / 2 + 1` terms.
    pub fn exp_even_nilpotent(&self) -> Result<Self> {
        if !self.is_even() {
            return Err(Error::InvalidArgument("exp of an element with odd part".into()));
        }
        let c0 = self.scalar_part();
        let nil = self.combine(&Self::scalar(self.ngen, c0), -1.0);
        let mut sum = Self::one(self.ngen);
        let mut term = Self::one(self.ngen);
        let mut k = 1;
        loop {
            term = (&term * &nil).scale(1.0 / k as f64);
            if term.is_zero() {
                break;
            }
            sum = &sum + &term;
            k += 1;
            debug_assert!(k <= self.ngen / 2 + 2);
        }
        Ok(sum.scale(c0.exp()))
    }

    /// Berezin integral `d_{o_1} d_{o_2} ... d_{o_k} A` (the rightmost
    /// derivative acts first). `order` must list every generator once.
    pub fn berezin(&self, order: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.ngen];
        if order.len() != self.ngen {
            return Err(Error::InvalidArgument(format!(
                "Berezin order has {} entries for {} generators",
                order.len(),
                self.ngen
            )));
        }
        for &o in order {
            if o >= self.ngen || seen[o] {
                return Err(Error::InvalidArgument("Berezin order is not a permutation".into()));
            }
            seen[o] = true;
        }
        let full = full_mask(self.ngen);
        let mut top = Grassmann { ngen: self.ngen, terms: vec![(full, self.top())] };
        if top.terms[0].1 == 0.0 {
            return Ok(0.0);
        }
        for &o in order.iter().rev() {
            top = top.deriv(o);
        }
        Ok(top.scalar_part())
    }

    /// The Berezin order `d_{eta_0} d_{xi_0} d_{eta_1} d_{xi_1} ...` of the
    /// H^{0|2} table.
    pub fn h02_order(n: usize) -> Vec<usize> {
        (0..n).flat_map(|x| [2 * x + 1, 2 * x]).collect()
    }
}

impl Add for &Grassmann {
    type Output = Grassmann;
    fn add(self, o: &Grassmann) -> Grassmann {
        self.combine(o, 1.0)
    }
}
impl Sub for &Grassmann {
    type Output = Grassmann;
    fn sub(self, o: &Grassmann) -> Grassmann {
        self.combine(o, -1.0)
    }
}
impl Mul for &Grassmann {
    type Output = Grassmann;
    fn mul(self, o: &Grassmann) -> Grassmann {
        Grassmann::mul(self, o)
    }
}
impl Neg for &Grassmann {
    type Output = Grassmann;
    fn neg(self) -> Grassmann {
        self.scale(-1.0)
    }
}
impl Add for Grassmann {
    type Output = Grassmann;
    fn add(self, o: Grassmann) -> Grassmann {
        &self + &o
    }
}
impl Sub for Grassmann {
    type Output = Grassmann;
    fn sub(self, o: Grassmann) -> Grassmann {
        &self - &o
    }
}
impl Mul for Grassmann {
    type Output = Grassmann;
    fn mul(self, o: Grassmann) -> Grassmann {
        &self * &o
    }
}

/// Largest vertex count accepted by [`H02Model`].
pub const MAX_H02_VERTICES: usize = 10;

/// The H^{0|2} model on a weighted graph, with density
/// `prod_x (1/z_x) exp(sum_{xy} beta_xy (u_x.u_y + 1) - sum_x h_x (z_x - 1))`.
#[derive(Clone, Debug)]
pub struct H02Model {
    n: usize,
    density: Grassmann,
    z: f64,
}

impl H02Model {
    pub fn new(graph: &Graph) -> Result<Self> {
        let n = graph.vertex_count();
        if n > MAX_H02_VERTICES {
            return Err(Error::TooLarge(format!("{n} vertices exceeds {MAX_H02_VERTICES}")));
        }
        if graph.ghost().is_some() {
            return Err(Error::InvalidArgument("the ghost is represented by the field h, not a vertex".into()));
        }
        let ng = 2 * n;
        let t = H02Table { n };
        let mut rho = Grassmann::one(ng);
        for x in 0..n {
            let inv_z = t.inv_z(x);
            let field = (&t.z(x) - &Grassmann::one(ng)).scale(-graph.h()[x]).exp_even_nilpotent()?;
            rho = &(&rho * &inv_z) * &field;
        }
        for e in graph.edges() {
            let w = (&t.u_dot(e.u, e.v) + &Grassmann::one(ng)).scale(e.beta);
            rho = &rho * &w.exp_even_nilpotent()?;
        }
        let z = rho.berezin(&Grassmann::h02_order(n))?;
        assert!(z > 0.0, "partition function must be positive for non-negative weights");
        Ok(H02Model { n, density: rho, z })
    }

    pub fn table(&self) -> H02Table {
        H02Table { n: self.n }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Unnormalised density.
    pub fn density(&self) -> &Grassmann {
        &self.density
    }

    /// `Z = int rho`.
    pub fn partition_function(&self) -> f64 {
        self.z
    }

    /// `<F> = int rho F / Z`. Only the coefficients of `rho` complementary
    /// to the terms of `F` are needed.
    pub fn expectation(&self, f: &Grassmann) -> f64 {
        assert_eq!(f.ngen(), 2 * self.n);
        let full = full_mask(2 * self.n);
        let mut s = crate::numeric::CompensatedSum::new();
        for &(m, c) in f.terms() {
            let comp = full & !m;
            let r = self.density.coeff(comp);
            if r != 0.0 {
                s.add(reorder_sign(comp, m) * r * c);
            }
        }
        s.value() / self.z
    }

    /// Truncated expectation `<F; G> = <FG> - <F><G>`.
    pub fn covariance(&self, f: &Grassmann, g: &Grassmann) -> f64 {
        self.expectation(&(f * g)) - self.expectation(f) * self.expectation(g)
    }
}

/// Element constructors for the H^{0|2} generator table on `n` vertices.
#[derive(Clone, Copy, Debug)]
pub struct H02Table {
    pub n: usize,
}

impl H02Table {
    fn ng(&self) -> usize {
        2 * self.n
    }
    pub fn one(&self) -> Grassmann {
        Grassmann::one(self.ng())
    }
    pub fn xi(&self, x: usize) -> Grassmann {
        Grassmann::generator(self.ng(), 2 * x)
    }
    pub fn eta(&self, x: usize) -> Grassmann {
        Grassmann::generator(self.ng(), 2 * x + 1)
    }
    /// `xi_x eta_y`.
    pub fn xi_eta(&self, x: usize, y: usize) -> Grassmann {
        &self.xi(x) * &self.eta(y)
    }
    /// `z_x = 1 - xi_x eta_x`.
    pub fn z(&self, x: usize) -> Grassmann {
        &self.one() - &self.xi_eta(x, x)
    }
    /// `1 / z_x = 1 + xi_x eta_x`.
    pub fn inv_z(&self, x: usize) -> Grassmann {
        &self.one() + &self.xi_eta(x, x)
    }
    /// `u_x . u_y = -xi_x eta_y - xi_y eta_x - z_x z_y`.
    pub fn u_dot(&self, x: usize, y: usize) -> Grassmann {
        let a = &self.xi_eta(x, y) + &self.xi_eta(y, x);
        &(-&a) - &(&self.z(x) * &self.z(y))
    }
    /// The supersymmetry generator `T = sum_x z_x d_{xi_x}` applied to `F`.
    pub fn apply_t(&self, f: &Grassmann) -> Grassmann {
        (0..self.n).fold(Grassmann::zero(self.ng()), |acc, x| &acc + &(&self.z(x) * &f.deriv(2 * x)))
    }
    /// `Tbar = sum_x z_x d_{eta_x}` applied to `F`.
    pub fn apply_tbar(&self, f: &Grassmann) -> Grassmann {
        (0..self.n).fold(Grassmann::zero(self.ng()), |acc, x| &acc + &(&self.z(x) * &f.deriv(2 * x + 1)))
    }
}

/// Element constructors for the `psibar_x, psi_x` table on `n` vertices,
/// optionally followed by `extra` spectator generators.
#[derive(Clone, Copy, Debug)]
pub struct PsiTable {
    pub n: usize,
    pub extra: usize,
}

impl PsiTable {
    pub fn new(n: usize) -> Self {
        PsiTable { n, extra: 0 }
    }
    pub fn with_extra(n: usize, extra: usize) -> Self {
        PsiTable { n, extra }
    }
    pub fn ngen(&self) -> usize {
        2 * self.n + self.extra
    }
    pub fn one(&self) -> Grassmann {
        Grassmann::one(self.ngen())
    }
    pub fn scalar(&self, c: f64) -> Grassmann {
        Grassmann::scalar(self.ngen(), c)
    }
    pub fn psibar(&self, x: usize) -> Grassmann {
        Grassmann::generator(self.ngen(), 2 * x)
    }
    pub fn psi(&self, x: usize) -> Grassmann {
        Grassmann::generator(self.ngen(), 2 * x + 1)
    }
    /// The `k`-th extra generator.
    pub fn extra(&self, k: usize) -> Grassmann {
        assert!(k < self.extra);
        Grassmann::generator(self.ngen(), 2 * self.n + k)
    }
}

/// Fermionic Gaussian convolution `E_C theta F = exp(L_C) F` with
/// `L_C = sum_{x,y} C_xy d_{psi_y} d_{psibar_x}` on the psi table.
/// `c` is the row-major `n x n` covariance.
pub fn gaussian_convolution(c: &[f64], n: usize, f: &Grassmann) -> Result<Grassmann> {
    if c.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: c.len() });
    }
    if f.ngen() < 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: f.ngen() });
    }
    let lc = |g: &Grassmann| -> Grassmann {
        let mut map: HashMap<u64, f64> = HashMap::new();
        for &(m, coef) in g.terms() {
            for x in 0..n {
                let bx = 1u64 << (2 * x);
                if m & bx == 0 {
                    continue;
                }
                // d_{psibar_x}
                let s1 = if (m & (bx - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let m1 = m & !bx;
                for y in 0..n {
                    let cxy = c[x * n + y];
                    let by = 1u64 << (2 * y + 1);
                    if cxy == 0.0 || m1 & by == 0 {
                        continue;
                    }
                    let s2 = if (m1 & (by - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    *map.entry(m1 & !by).or_insert(0.0) += s1 * s2 * cxy * coef;
                }
            }
        }
        Grassmann::from_map(g.ngen(), map)
    };
    let mut sum = f.clone();
    let mut term = f.clone();
    let mut k = 1;
    loop {
        term = lc(&term).scale(1.0 / k as f64);
        if term.is_zero() {
            break;
        }
        sum = &sum + &term;
        k += 1;
    }
    Ok(sum)
}

/// Maximum absolute discrepancy of each identity relating the H^{0|2}
/// model to the arboreal gas, over all vertex pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DictionaryReport {
    /// `|Z_fermion - Z_forest|`, relative to `Z_forest`.
    pub normalisation: f64,
    /// `<z_x> = P[x <-> g]`.
    pub z_ghost: f64,
    /// `<xi_x eta_y> = P[x <-> y, x !<-> g]`.
    pub xi_eta: f64,
    /// `-<u_x . u_y> = P[x <-> y] + P[x !<-> y, x <-> g, y <-> g]`.
    pub u_dot: f64,
    /// At `h = 0`: `P[x <-> y] = -<u.u> = -<z z> = <xi eta> = 1 - <xi eta xi eta>`;
    /// `None` when the field is nonzero.
    pub four_point: Option<f64>,
    /// `<z_x> = sum_y h_y <xi_x eta_y>`.
    pub ward: f64,
    /// `<z_x> = 0` when all `h_x = 0`; `None` otherwise.
    pub ward_zero_field: Option<f64>,
    /// `h_x <1 - z_x> = P[x g]`.
    pub ghost_edge: f64,
    /// `h_x h_y <z_x - 1; z_y - 1> = P[xg, yg] - P[xg] P[yg]`, `x != y`.
    pub ghost_edge_cov: f64,
}

impl DictionaryReport {
    /// Largest discrepancy over all identities.
    pub fn max(&self) -> f64 {
        [
            self.normalisation,
            self.z_ghost,
            self.xi_eta,
            self.u_dot,
            self.four_point.unwrap_or(0.0),
            self.ward,
            self.ward_zero_field.unwrap_or(0.0),
            self.ghost_edge,
            self.ghost_edge_cov,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `(name, value)` rows for reporting.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut r = vec![
            ("normalisation", self.normalisation),
            ("z_ghost", self.z_ghost),
            ("xi_eta", self.xi_eta),
            ("u_dot", self.u_dot),
        ];
        if let Some(v) = self.four_point {
            r.push(("four_point", v));
        }
        r.push(("ward", self.ward));
        if let Some(v) = self.ward_zero_field {
            r.push(("ward_zero_field", v));
        }
        r.push(("ghost_edge", self.ghost_edge));
        r.push(("ghost_edge_cov", self.ghost_edge_cov));
        r
    }
}

/// Compare the Grassmann engine with the enumeration oracle on `graph`
/// (its own edge and vertex weights).
pub fn dictionary_check(graph: &Graph) -> Result<DictionaryReport> {
    let model = H02Model::new(graph)?;
    let ex = crate::exact::exact_summary(graph)?;
    let t = model.table();
    let n = graph.vertex_count();
    let h = graph.h();
    let zero_field = h.iter().all(|&v| v == 0.0);
    let mut r = DictionaryReport {
        normalisation: (model.partition_function() - ex.z).abs() / ex.z,
        four_point: zero_field.then_some(0.0),
        ward_zero_field: zero_field.then_some(0.0),
        ..Default::default()
    };
    let upd = |slot: &mut f64, v: f64| *slot = slot.max(v.abs());
    let z: Vec<f64> = (0..n).map(|x| model.expectation(&t.z(x))).collect();
    let mut xe = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            xe[x * n + y] = model.expectation(&t.xi_eta(x, y));
        }
    }
    for x in 0..n {
        upd(&mut r.z_ghost, z[x] - ex.ghost[x]);
        let ward_rhs = crate::numeric::ksum((0..n).map(|y| h[y] * xe[x * n + y]));
        upd(&mut r.ward, z[x] - ward_rhs);
        if let Some(w) = r.ward_zero_field.as_mut() {
            *w = w.max(z[x].abs());
        }
        upd(&mut r.ghost_edge, h[x] * (1.0 - z[x]) - ex.ghost_edge[x]);
        for y in 0..n {
            upd(&mut r.xi_eta, xe[x * n + y] - ex.conn_unrooted(x, y));
            let ud = -model.expectation(&t.u_dot(x, y));
            upd(&mut r.u_dot, ud - (ex.conn(x, y) + ex.both_rooted_apart(x, y)));
            if let Some(fp) = r.four_point.as_mut() {
                let p = ex.conn(x, y);
                let zz = -model.expectation(&(&t.z(x) * &t.z(y)));
                let four = 1.0 - model.expectation(&(&t.xi_eta(x, x) * &t.xi_eta(y, y)));
                for v in [ud, zz, xe[x * n + y], four] {
                    *fp = fp.max((v - p).abs());
                }
            }
            if x != y {
                let zx1 = &t.z(x) - &t.one();
                let zy1 = &t.z(y) - &t.one();
                let cov = h[x] * h[y] * model.covariance(&zx1, &zy1);
                let rhs = ex.ghost_edge_pair(x, y) - ex.ghost_edge[x] * ex.ghost_edge[y];
                upd(&mut r.ghost_edge_cov, cov - rhs);
            }
        }
    }
    Ok(r)
}
