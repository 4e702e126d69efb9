//! Taylor models over the fixed symbol set `{x̂, ŷ, θ̂, t}`.
//!
//! The three state symbols range over `[-1, 1]` (the initial box is mapped
//! onto them affinely) and `t` is the local time of a flow step, ranging
//! over `[0, h]`. A Taylor model is a polynomial in these symbols plus an
//! interval remainder; it encloses a function `g` when
//! `g(z) ∈ poly(z) + remainder` for every `z` in the domain.
//!
//! Coefficient arithmetic is carried out in interval arithmetic and then
//! split into a float coefficient (the midpoint) and a rounding residue that
//! is range-bounded into the remainder, so every operation stays sound in
//! floating point.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::interval::Interval;

pub const NUM_SYMBOLS: usize = 4;
pub const SYM_X: usize = 0;
pub const SYM_Y: usize = 1;
pub const SYM_THETA: usize = 2;
pub const SYM_T: usize = 3;

/// Exponent vector, one entry per symbol.
pub type Exponents = [u8; NUM_SYMBOLS];

pub fn total_degree(e: &Exponents) -> u32 {
    e.iter().map(|&k| k as u32).sum()
}

/// Per-symbol ranges a Taylor model is defined over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    ranges: [Interval; NUM_SYMBOLS],
}

impl Domain {
    /// State symbols on `[-1, 1]`, time on `[0, h]`. `h = 0` gives a
    /// time-independent (point in time) domain.
    pub fn normalized(h: f64) -> Self {
        Domain {
            ranges: [
                Interval::UNIT,
                Interval::UNIT,
                Interval::UNIT,
                Interval::raw(0.0, h.max(0.0)),
            ],
        }
    }

    pub fn range(&self, sym: usize) -> Interval {
        self.ranges[sym]
    }

    pub fn time_step(&self) -> f64 {
        self.ranges[SYM_T].hi()
    }

    /// Range of the monomial `z^e` over the domain. Even powers of
    /// `[-1, 1]` give `[0, 1]`.
    pub fn monomial_range(&self, e: &Exponents) -> Interval {
        // unit factors multiply exactly: any odd power gives [-1, 1]
        let mut unit_odd = false;
        let mut unit_even = false;
        let mut r = Interval::point(1.0);
        for (sym, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if self.ranges[sym] == Interval::UNIT {
                if k % 2 == 1 {
                    unit_odd = true;
                } else {
                    unit_even = true;
                }
            } else {
                r = r * self.ranges[sym].powi(k as u32);
            }
        }
        if unit_odd {
            r * Interval::UNIT
        } else if unit_even {
            r * Interval::raw(0.0, 1.0)
        } else {
            r
        }
    }
}

/// Multivariate polynomial with float coefficients; zero coefficients are
/// never stored.
#[derive(Clone, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<Exponents, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Polynomial::zero();
        p.set(ZERO_EXP, c);
        p
    }

    /// `coef * sym`.
    pub fn symbol(sym: usize, coef: f64) -> Self {
        let mut e = ZERO_EXP;
        e[sym] = 1;
        let mut p = Polynomial::zero();
        p.set(e, coef);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Exponents, f64)>) -> Self {
        let mut p = Polynomial::zero();
        for (e, c) in terms {
            p.set(e, c);
        }
        p
    }

    fn set(&mut self, e: Exponents, c: f64) {
        if c == 0.0 {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, c);
        }
    }

    pub fn coeff(&self, e: &Exponents) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&ZERO_EXP)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(total_degree).max().unwrap_or(0)
    }

    pub fn depends_on(&self, sym: usize) -> bool {
        self.terms.keys().any(|e| e[sym] > 0)
    }

    /// Float evaluation (not rounding-safe; see [`Polynomial::eval_interval`]).
    pub fn eval(&self, z: &[f64; NUM_SYMBOLS]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * monomial_value(e, z))
            .sum()
    }

    /// Rigorous evaluation at a point, as an interval.
    pub fn eval_interval(&self, z: &[f64; NUM_SYMBOLS]) -> Interval {
        let point = z.map(Interval::point);
        self.eval_box(&point)
    }

    /// Interval evaluation over a box of symbol values.
    pub fn eval_box(&self, z: &[Interval; NUM_SYMBOLS]) -> Interval {
        let mut acc = Interval::ZERO;
        for (e, &c) in &self.terms {
            let mut m = Interval::point(c);
            for (sym, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = m * z[sym].powi(k as u32);
                }
            }
            acc = acc + m;
        }
        acc
    }

    /// Per-monomial range over the domain.
    pub fn range(&self, domain: &Domain) -> Interval {
        let mut acc = Interval::ZERO;
        for (e, &c) in &self.terms {
            acc = acc + domain.monomial_range(e) * c;
        }
        acc
    }

    fn to_accumulator(&self) -> Accumulator {
        self.terms
            .iter()
            .map(|(e, &c)| (*e, Interval::point(c)))
            .collect()
    }
}

fn monomial_value(e: &Exponents, z: &[f64; NUM_SYMBOLS]) -> f64 {
    e.iter()
        .zip(z)
        .map(|(&k, &v)| v.powi(k as i32))
        .product()
}

const ZERO_EXP: Exponents = [0; NUM_SYMBOLS];

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        const NAMES: [&str; NUM_SYMBOLS] = ["x", "y", "th", "t"];
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:e}")?;
            for (sym, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*{}", NAMES[sym])?,
                    _ => write!(f, "*{}^{k}", NAMES[sym])?,
                }
            }
        }
        Ok(())
    }
}

/// Polynomial with interval coefficients, used while an operation is in
/// flight.
///
/// Kept as a flat list: polynomials here have a few dozen monomials at most,
/// so a linear scan beats a tree.
#[derive(Default)]
struct Accumulator(Vec<(Exponents, Interval)>);

impl Accumulator {
    fn new() -> Self {
        Accumulator(Vec::with_capacity(16))
    }
}

impl FromIterator<(Exponents, Interval)> for Accumulator {
    fn from_iter<I: IntoIterator<Item = (Exponents, Interval)>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for (e, c) in iter {
            acc_add(&mut acc, e, c);
        }
        acc
    }
}

fn acc_add(acc: &mut Accumulator, e: Exponents, c: Interval) {
    match acc.0.iter_mut().find(|(k, _)| *k == e) {
        Some((_, v)) => *v = *v + c,
        None => acc.0.push((e, c)),
    }
}

/// Splits interval coefficients into float coefficients plus a remainder:
/// terms above `max_degree` are range-bounded entirely, kept terms
/// contribute their coefficient width times the monomial range.
fn settle(mut acc: Accumulator, domain: &Domain, max_degree: u32) -> (Polynomial, Interval) {
    let mut poly = Polynomial::zero();
    let mut rem = Interval::ZERO;
    // fixed summation order, independent of insertion order
    acc.0.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    for (e, c) in acc.0 {
        if total_degree(&e) > max_degree {
            rem = rem + c * domain.monomial_range(&e);
            continue;
        }
        let m = c.mid();
        if !c.is_point() {
            rem = rem + (c - Interval::point(m)) * domain.monomial_range(&e);
        }
        poly.set(e, m);
    }
    (poly, rem)
}

/// `sum_i weights[i] * polys[i] + constant`, with the coefficient rounding
/// bounded over `domain` and returned separately.
pub fn affine_combination(
    weights: &[f64],
    polys: &[&Polynomial],
    constant: f64,
    domain: &Domain,
) -> (Polynomial, Interval) {
    let mut acc = Accumulator::new();
    for (&w, p) in weights.iter().zip(polys) {
        if w == 0.0 {
            continue;
        }
        let wi = Interval::point(w);
        for (e, &c) in &p.terms {
            acc_add(&mut acc, *e, wi * c);
        }
    }
    if constant != 0.0 {
        acc_add(&mut acc, ZERO_EXP, Interval::point(constant));
    }
    settle(acc, domain, u32::MAX)
}

/// Univariate polynomial in power basis, ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariatePoly {
    pub coeffs: Vec<f64>,
}

impl UnivariatePoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        UnivariatePoly { coeffs }
    }

    pub fn identity() -> Self {
        UnivariatePoly::new(vec![0.0, 1.0])
    }

    pub fn zero() -> Self {
        UnivariatePoly::new(vec![0.0])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// Interval Horner evaluation.
    pub fn eval_interval(&self, y: Interval) -> Interval {
        self.coeffs
            .iter()
            .rev()
            .fold(Interval::ZERO, |acc, &c| acc * y + c)
    }

    pub fn derivative(&self) -> UnivariatePoly {
        if self.coeffs.len() <= 1 {
            return UnivariatePoly::zero();
        }
        UnivariatePoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }
}

/// Polynomial plus interval remainder over a [`Domain`].
#[derive(Clone, PartialEq)]
pub struct TaylorModel {
    pub poly: Polynomial,
    pub remainder: Interval,
    pub domain: Domain,
}

impl fmt::Debug for TaylorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}) + {:?}", self.poly, self.remainder)
    }
}

impl TaylorModel {
    pub fn new(poly: Polynomial, remainder: Interval, domain: Domain) -> Self {
        TaylorModel {
            poly,
            remainder,
            domain,
        }
    }

    pub fn constant(c: f64, domain: Domain) -> Self {
        TaylorModel::new(Polynomial::constant(c), Interval::ZERO, domain)
    }

    pub fn zero(domain: Domain) -> Self {
        TaylorModel::new(Polynomial::zero(), Interval::ZERO, domain)
    }

    /// Any constant from `iv`: midpoint in the polynomial, the rest in the
    /// remainder.
    pub fn from_interval(iv: Interval, domain: Domain) -> Self {
        let m = iv.mid();
        TaylorModel::new(
            Polynomial::constant(m),
            iv - Interval::point(m),
            domain,
        )
    }

    /// Affine image of one normalized state symbol: the set `box_range`
    /// written as `center + radius * sym`.
    pub fn from_box_dimension(sym: usize, box_range: Interval, domain: Domain) -> Self {
        let c = box_range.mid();
        let r = box_range.radius();
        let mut poly = Polynomial::constant(c);
        poly.set(
            {
                let mut e = ZERO_EXP;
                e[sym] = 1;
                e
            },
            r,
        );
        TaylorModel::new(poly, Interval::ZERO, domain)
    }

    fn check_domain(&self, other: &TaylorModel) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &TaylorModel) -> Result<TaylorModel> {
        self.check_domain(other)?;
        let mut acc = self.poly.to_accumulator();
        for (e, &c) in &other.poly.terms {
            acc_add(&mut acc, *e, Interval::point(c));
        }
        let degree = self.poly.degree().max(other.poly.degree());
        let (poly, rounding) = settle(acc, &self.domain, degree);
        Ok(TaylorModel::new(
            poly,
            self.remainder + other.remainder + rounding,
            self.domain,
        ))
    }

    pub fn neg(&self) -> TaylorModel {
        TaylorModel::new(
            Polynomial {
                terms: self.poly.terms.iter().map(|(e, c)| (*e, -c)).collect(),
            },
            -self.remainder,
            self.domain,
        )
    }

    pub fn sub(&self, other: &TaylorModel) -> Result<TaylorModel> {
        self.add(&other.neg())
    }

    pub fn add_interval(&self, iv: Interval) -> TaylorModel {
        self.add(&TaylorModel::from_interval(iv, self.domain))
            .expect("same domain")
    }

    pub fn add_constant(&self, c: f64) -> TaylorModel {
        self.add(&TaylorModel::constant(c, self.domain))
            .expect("same domain")
    }

    /// Multiplies by a constant known only to lie in `k`.
    pub fn mul_interval(&self, k: Interval) -> TaylorModel {
        let m = k.mid();
        let dk = k - Interval::point(m);
        let acc: Accumulator = self
            .poly
            .terms
            .iter()
            .map(|(e, &c)| (*e, Interval::point(c) * m))
            .collect();
        let (poly, rounding) = settle(acc, &self.domain, u32::MAX);
        let rem = self.remainder * k + self.poly.range(&self.domain) * dk + rounding;
        TaylorModel::new(poly, rem, self.domain)
    }

    pub fn scale(&self, k: f64) -> TaylorModel {
        self.mul_interval(Interval::point(k))
    }

    /// Product truncated to `max_degree`; spilled terms and the cross terms
    /// involving remainders go into the result remainder.
    pub fn mul(&self, other: &TaylorModel, max_degree: u32) -> Result<TaylorModel> {
        self.check_domain(other)?;
        let mut acc = Accumulator::new();
        for (ea, &ca) in &self.poly.terms {
            for (eb, &cb) in &other.poly.terms {
                let mut e = ZERO_EXP;
                for i in 0..NUM_SYMBOLS {
                    e[i] = ea[i] + eb[i];
                }
                acc_add(&mut acc, e, Interval::point(ca) * Interval::point(cb));
            }
        }
        let (poly, spill) = settle(acc, &self.domain, max_degree);
        let ra = self.remainder;
        let rb = other.remainder;
        let mut rem = spill;
        if rb != Interval::ZERO {
            rem = rem + self.poly.range(&self.domain) * rb;
        }
        if ra != Interval::ZERO {
            rem = rem + ra * other.poly.range(&self.domain) + ra * rb;
        }
        Ok(TaylorModel::new(poly, rem, self.domain))
    }

    /// Drops terms above `max_degree` into the remainder.
    pub fn truncate(&self, max_degree: u32) -> TaylorModel {
        let (poly, spill) = settle(self.poly.to_accumulator(), &self.domain, max_degree);
        TaylorModel::new(poly, self.remainder + spill, self.domain)
    }

    /// Sound enclosure of the model's image over its domain.
    pub fn range(&self) -> Interval {
        self.poly.range(&self.domain) + self.remainder
    }

    /// Antiderivative in the time symbol, `∫_0^t g(z, s) ds`. The remainder
    /// is scaled by the time range `[0, h]`.
    pub fn integrate_time(&self, max_degree: u32) -> TaylorModel {
        let mut acc = Accumulator::new();
        for (e, &c) in &self.poly.terms {
            let mut ne = *e;
            let k = e[SYM_T] as f64 + 1.0;
            ne[SYM_T] += 1;
            acc_add(&mut acc, ne, Interval::point(c).div_scalar(k));
        }
        let (poly, spill) = settle(acc, &self.domain, max_degree);
        let t_range = self.domain.range(SYM_T);
        TaylorModel::new(poly, self.remainder * t_range + spill, self.domain)
    }

    /// Evaluates at a fixed time `tau` inside the time range and returns a
    /// time-independent model over `target` (whose state ranges must match).
    pub fn substitute_time(&self, tau: f64, target: Domain) -> TaylorModel {
        let tau_iv = Interval::point(tau);
        let mut acc = Accumulator::new();
        for (e, &c) in &self.poly.terms {
            let k = e[SYM_T];
            let mut ne = *e;
            ne[SYM_T] = 0;
            acc_add(&mut acc, ne, Interval::point(c) * tau_iv.powi(k as u32));
        }
        let (poly, rounding) = settle(acc, &target, u32::MAX);
        TaylorModel::new(poly, self.remainder + rounding, target)
    }

    /// Reinterprets a time-independent model over a new time range.
    pub fn with_time_domain(&self, domain: Domain) -> Result<TaylorModel> {
        if self.poly.depends_on(SYM_T) {
            return Err(Error::DomainMismatch);
        }
        for sym in [SYM_X, SYM_Y, SYM_THETA] {
            if self.domain.range(sym) != domain.range(sym) {
                return Err(Error::DomainMismatch);
            }
        }
        Ok(TaylorModel::new(self.poly.clone(), self.remainder, domain))
    }

    /// Re-centres the model: the remainder midpoint moves into the constant
    /// term and coefficients below `sweep` in magnitude are bounded into the
    /// remainder. The represented set is unchanged or grows.
    pub fn recenter(&self, sweep: f64) -> TaylorModel {
        let mut acc = Accumulator::new();
        let mut rem = self.remainder;
        for (e, &c) in &self.poly.terms {
            if *e != ZERO_EXP && c.abs() < sweep {
                rem = rem + self.domain.monomial_range(e) * c;
            } else {
                acc_add(&mut acc, *e, Interval::point(c));
            }
        }
        let m = rem.mid();
        acc_add(&mut acc, ZERO_EXP, Interval::point(m));
        let (poly, rounding) = settle(acc, &self.domain, u32::MAX);
        TaylorModel::new(poly, rem - Interval::point(m) + rounding, self.domain)
    }

    /// Rigorous enclosure of the model at a domain point.
    pub fn eval_interval(&self, z: &[f64; NUM_SYMBOLS]) -> Interval {
        self.poly.eval_interval(z) + self.remainder
    }

    pub fn remainder_width(&self) -> f64 {
        self.remainder.width()
    }

    /// Horner evaluation `u(self)`.
    pub fn compose(&self, u: &UnivariatePoly, max_degree: u32) -> TaylorModel {
        let (poly, rems) = self.compose_many(&[self.remainder], u, max_degree);
        TaylorModel::new(poly, rems[0], self.domain)
    }

    /// `u(p + r)` for one polynomial part and several alternative
    /// remainders `r`. The polynomial part of the result does not depend
    /// on `r`, so it is computed once; remainder `k` equals that of
    /// `TaylorModel::new(p, remainders[k]).compose(u)`.
    pub fn compose_many(
        &self,
        remainders: &[Interval],
        u: &UnivariatePoly,
        max_degree: u32,
    ) -> (Polynomial, Vec<Interval>) {
        let domain = &self.domain;
        let mut coeffs = u.coeffs.iter().rev();
        let lead = coeffs.next().copied().unwrap_or(0.0);
        let mut poly = Polynomial::constant(lead);
        let mut rems = vec![Interval::ZERO; remainders.len()];
        let self_range = self.poly.range(domain);
        for &c in coeffs {
            // acc * self
            let mut acc = Accumulator::new();
            for (ea, &ca) in &poly.terms {
                for (eb, &cb) in &self.poly.terms {
                    let mut e = ZERO_EXP;
                    for i in 0..NUM_SYMBOLS {
                        e[i] = ea[i] + eb[i];
                    }
                    acc_add(&mut acc, e, Interval::point(ca) * Interval::point(cb));
                }
            }
            let acc_range = poly.range(domain);
            let (product, spill) = settle(acc, domain, max_degree);
            for (ra, &rb) in rems.iter_mut().zip(remainders) {
                let mut rem = spill;
                if rb != Interval::ZERO {
                    rem = rem + acc_range * rb;
                }
                if *ra != Interval::ZERO {
                    rem = rem + *ra * self_range + *ra * rb;
                }
                *ra = rem;
            }
            poly = product;
            // + c
            if c != 0.0 {
                let mut acc = poly.to_accumulator();
                acc_add(&mut acc, ZERO_EXP, Interval::point(c));
                let (sum, rounding) = settle(acc, domain, poly.degree());
                for r in rems.iter_mut() {
                    *r = *r + rounding;
                }
                poly = sum;
            }
        }
        (poly, rems)
    }
}

/// One Taylor model per state dimension (x, y, θ), all over one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorModelVector {
    pub components: Vec<TaylorModel>,
}

impl TaylorModelVector {
    pub fn new(components: Vec<TaylorModel>) -> Result<Self> {
        if let Some(first) = components.first() {
            if components.iter().any(|c| c.domain != first.domain) {
                return Err(Error::DomainMismatch);
            }
        }
        Ok(TaylorModelVector { components })
    }

    /// The box `center ± halfwidth` in the normalized state symbols.
    pub fn from_box(boxes: &[Interval; 3]) -> Self {
        let domain = Domain::normalized(0.0);
        TaylorModelVector {
            components: boxes
                .iter()
                .enumerate()
                .map(|(sym, &b)| TaylorModel::from_box_dimension(sym, b, domain))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn domain(&self) -> Domain {
        self.components
            .first()
            .map(|c| c.domain)
            .unwrap_or_else(|| Domain::normalized(0.0))
    }

    pub fn ranges(&self) -> Vec<Interval> {
        self.components.iter().map(TaylorModel::range).collect()
    }

    pub fn remainder_widths(&self) -> Vec<f64> {
        self.components.iter().map(TaylorModel::remainder_width).collect()
    }

    /// Absorbs the remainders into the polynomials (shrink wrapping).
    ///
    /// Finds `q ≥ 1` such that every point `p(z) + i` of the set, with
    /// `z ∈ [-1, 1]³` and `i` in the remainders, equals `p(z + w)` for some
    /// `|w| ≤ q - 1`, and returns `p̂(ẑ) = p(q ẑ)`. The new remainders hold
    /// only the rounding of the rescaled coefficients. Existence of `w` is
    /// a Krawczyk test: with `A` an approximate inverse of the linear part,
    /// `w ↦ w - A (p(z + w) - p(z) - i)` must map the box `|w| ≤ ω` into
    /// itself, using the interval Jacobian of `p` over `(1 + max ω)·[-1, 1]³`.
    ///
    /// The set is preserved but the correspondence between symbols and
    /// initial states is not. `None` for time-dependent or non-3D models,
    /// a singular linear part, or when no `q ≤ max_factor` is certified.
    pub fn shrink_wrap(&self, max_factor: f64) -> Option<TaylorModelVector> {
        let domain = self.domain();
        if self.dim() != 3
            || domain != Domain::normalized(0.0)
            || self.components.iter().any(|c| c.poly.depends_on(SYM_T))
        {
            return None;
        }
        if self.components.iter().all(|c| c.remainder == Interval::ZERO) {
            return Some(self.clone());
        }
        let unit = |k: usize| {
            let mut e = ZERO_EXP;
            e[k] = 1;
            e
        };
        let lin: [[f64; 3]; 3] = std::array::from_fn(|j| std::array::from_fn(|k| self.components[j].poly.coeff(&unit(k))));
        let a = invert3(&lin)?;
        let pt = Interval::point;
        let ai: [f64; 3] = std::array::from_fn(|j| {
            (0..3)
                .fold(Interval::ZERO, |acc, k| acc + self.components[k].remainder * a[j][k])
                .mag()
        });
        let mut omega = ai.map(|x| x * 1.1 + f64::MIN_POSITIVE);
        for _ in 0..12 {
            let q = (pt(1.0) + pt(omega.iter().fold(0.0f64, |m, &x| m.max(x)))).hi();
            if !(q <= max_factor) {
                return None;
            }
            let jac: [[Interval; 3]; 3] = std::array::from_fn(|l| std::array::from_fn(|k| partial_over(&self.components[l].poly, k, q)));
            let next: [f64; 3] = std::array::from_fn(|j| {
                (0..3)
                    .fold(pt(ai[j]), |acc, k| {
                        let aj = (0..3).fold(Interval::ZERO, |s, l| s + jac[l][k] * a[j][l]);
                        let m = pt(if j == k { 1.0 } else { 0.0 }) - aj;
                        acc + pt(m.mag()) * pt(omega[k])
                    })
                    .hi()
            });
            if next.iter().zip(&omega).all(|(n, o)| n <= o) {
                return Some(self.rescaled(q));
            }
            omega = next.map(|x| x * 1.1);
        }
        None
    }

    /// `p(q ẑ)` with the coefficient rounding in the remainder.
    fn rescaled(&self, q: f64) -> TaylorModelVector {
        let domain = self.domain();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut rounding = Interval::ZERO;
                let terms: Vec<(Exponents, f64)> = c
                    .poly
                    .terms()
                    .map(|(e, &coef)| {
                        let k = total_degree(e);
                        if k == 0 {
                            return (*e, coef);
                        }
                        let exact = Interval::point(coef) * Interval::point(q).powi(k);
                        let m = exact.mid();
                        rounding = rounding + (exact - Interval::point(m)) * domain.monomial_range(e);
                        (*e, m)
                    })
                    .collect();
                TaylorModel::new(Polynomial::from_terms(terms), rounding, domain)
            })
            .collect();
        TaylorModelVector { components }
    }
}

/// Range of `∂p/∂z_k` over `[-s, s]³` (time at 0).
fn partial_over(p: &Polynomial, k: usize, s: f64) -> Interval {
    let zs = Interval::raw(-s, s);
    p.terms()
        .filter(|(e, _)| e[k] > 0 && e[SYM_T] == 0)
        .fold(Interval::ZERO, |acc, (e, &c)| {
            let mut d = *e;
            d[k] -= 1;
            let mono = (0..3)
                .filter(|&l| d[l] > 0)
                .fold(Interval::point(1.0), |m, l| m * zs.powi(d[l] as u32));
            acc + Interval::point(c) * Interval::point(e[k] as f64) * mono
        })
}

/// Float inverse of a 3×3 matrix; `None` if it is singular or the result
/// is not finite.
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |r: usize, c: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    let det = (0..3).map(|c| m[0][c] * cof(0, c)).sum::<f64>();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| cof(c, r) / det));
    inv.iter().flatten().all(|x| x.is_finite()).then_some(inv)
}

/// Free-function forms of the core operations.
pub fn tm_add(a: &TaylorModel, b: &TaylorModel) -> Result<TaylorModel> {
    a.add(b)
}

pub fn tm_mul(a: &TaylorModel, b: &TaylorModel, max_degree: u32) -> Result<TaylorModel> {
    a.mul(b, max_degree)
}

pub fn tm_range(a: &TaylorModel) -> Interval {
    a.range()
}

pub fn tm_integrate_time(a: &TaylorModel, max_degree: u32) -> TaylorModel {
    a.integrate_time(max_degree)
}

pub fn tm_compose_poly(u: &UnivariatePoly, a: &TaylorModel, max_degree: u32) -> TaylorModel {
    a.compose(u, max_degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> Domain {
        Domain::normalized(0.0)
    }

    /// Affine map with a small quadratic part and remainders, roughly the
    /// shape of a state set after a few control periods.
    fn random_set(rng: &mut ChaCha8Rng) -> TaylorModelVector {
        let components = (0..3)
            .map(|j| {
                let mut terms = vec![([0u8; NUM_SYMBOLS], rng.gen_range(-3.0..3.0))];
                for k in 0..3 {
                    let mut e = [0u8; NUM_SYMBOLS];
                    e[k] = 1;
                    let diag = if k == j { 0.05 } else { 0.0 };
                    terms.push((e, diag + rng.gen_range(-0.01..0.01)));
                    for l in k..3 {
                        let mut e2 = e;
                        e2[l] += 1;
                        terms.push((e2, rng.gen_range(-2e-3..2e-3)));
                    }
                }
                let r = rng.gen_range(0.0..5e-3);
                TaylorModel::new(Polynomial::from_terms(terms), Interval::new(-r, r * rng.gen_range(0.0..1.0)).unwrap(), dom())
            })
            .collect();
        TaylorModelVector::new(components).unwrap()
    }

    /// Newton solve of `p(ẑ) = target` from `start`.
    fn preimage(v: &TaylorModelVector, target: [f64; 3], start: [f64; 3]) -> [f64; 3] {
        let f = |z: [f64; 3]| -> [f64; 3] {
            std::array::from_fn(|j| v.components[j].poly.eval(&[z[0], z[1], z[2], 0.0]) - target[j])
        };
        let mut z = start;
        for _ in 0..50 {
            let r = f(z);
            let jac: [[f64; 3]; 3] = std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    let mut zp = z;
                    zp[k] += 1e-7;
                    (f(zp)[j] - r[j]) / 1e-7
                })
            });
            let inv = invert3(&jac).unwrap();
            for j in 0..3 {
                z[j] -= (0..3).map(|k| inv[j][k] * r[k]).sum::<f64>();
            }
        }
        z
    }

    #[test]
    fn shrink_wrap_covers_the_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let v = random_set(&mut rng);
            let w = v.shrink_wrap(2.0).expect("well-conditioned set wraps");
            for (a, b) in w.components.iter().zip(&v.components) {
                assert!(a.remainder_width() < 1e-12);
                assert!(a.range().width() >= b.poly.range(&dom()).width());
            }
            for _ in 0..50 {
                let z: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
                let target: [f64; 3] = std::array::from_fn(|j| {
                    let rem = v.components[j].remainder;
                    v.components[j].poly.eval(&[z[0], z[1], z[2], 0.0]) + rng.gen_range(rem.lo()..=rem.hi())
                });
                let zh = preimage(&w, target, z.map(|c| c * 0.9));
                assert!(zh.iter().all(|c| c.abs() <= 1.0 + 1e-9), "{zh:?}");
                for j in 0..3 {
                    let got = w.components[j].poly.eval(&[zh[0], zh[1], zh[2], 0.0]);
                    assert!((got - target[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shrink_wrap_declines_degenerate_sets() {
        let flat = TaylorModelVector::from_box(&[Interval::new(0.0, 1.0).unwrap(), Interval::point(2.0), Interval::new(-1.0, 1.0).unwrap()]);
        let mut with_rem = flat.clone();
        with_rem.components[1].remainder = Interval::new(-1e-3, 1e-3).unwrap();
        assert!(with_rem.shrink_wrap(2.0).is_none());
        // nothing to absorb
        assert_eq!(flat.shrink_wrap(2.0), Some(flat.clone()));
        let mut big = TaylorModelVector::from_box(&[Interval::new(0.0, 0.01).unwrap(); 3]);
        big.components[0].remainder = Interval::new(-1.0, 1.0).unwrap();
        assert!(big.shrink_wrap(2.0).is_none());
    }

    fn xhat() -> Exponents {
        [1, 0, 0, 0]
    }

    fn tm(poly: Polynomial, r: (f64, f64)) -> TaylorModel {
        TaylorModel::new(poly, Interval::new(r.0, r.1).unwrap(), dom())
    }

    fn x_poly() -> Polynomial {
        Polynomial::symbol(SYM_X, 1.0)
    }

    #[test]
    fn add_examples() {
        let a = tm(x_poly(), (0.0, 0.0));
        let one = tm(Polynomial::constant(1.0), (0.0, 0.0));
        let s = a.add(&one).unwrap();
        assert_eq!(s.poly, Polynomial::from_terms([(xhat(), 1.0), (ZERO_EXP, 1.0)]));
        assert_eq!(s.remainder, Interval::ZERO);

        let p = tm(x_poly(), (-0.3, 0.2));
        let z = TaylorModel::zero(dom());
        assert_eq!(p.add(&z).unwrap(), p);

        let h = tm(x_poly(), (-0.1, 0.1));
        let s = h.add(&h).unwrap();
        assert_eq!(s.poly, Polynomial::symbol(SYM_X, 2.0));
        // interval addition oracle: [-0.1,0.1] + [-0.1,0.1] = [-0.2,0.2]
        assert!(s.remainder.contains_interval(&Interval::new(-0.2, 0.2).unwrap()));
        assert!(s.remainder.width() < 0.4 + 1e-15);
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let a = TaylorModel::zero(Domain::normalized(0.0));
        let b = TaylorModel::zero(Domain::normalized(0.1));
        assert!(matches!(a.add(&b), Err(Error::DomainMismatch)));
        assert!(matches!(a.mul(&b, 2), Err(Error::DomainMismatch)));
    }

    #[test]
    fn mul_examples() {
        let one_plus = tm(x_poly(), (0.0, 0.0)).add_constant(1.0);
        let one_minus = tm(x_poly(), (0.0, 0.0)).neg().add_constant(1.0);
        let p = one_plus.mul(&one_minus, 2).unwrap();
        assert_eq!(
            p.poly,
            Polynomial::from_terms([(ZERO_EXP, 1.0), ([2, 0, 0, 0], -1.0)])
        );
        assert_eq!(p.remainder, Interval::ZERO);

        let p = one_plus.mul(&one_minus, 1).unwrap();
        assert_eq!(p.poly, Polynomial::constant(1.0));
        // monomial-range oracle: -x^2 over [-1,1] is [-1,0]
        assert!(p.remainder.contains_interval(&Interval::new(-1.0, 0.0).unwrap()));

        let q = tm(
            Polynomial::from_terms([(xhat(), 3.0), ([0, 1, 1, 0], -2.0)]),
            (0.0, 0.0),
        );
        let z = TaylorModel::zero(dom());
        let r = q.mul(&z, 2).unwrap();
        assert!(r.poly.is_zero());
        assert_eq!(r.remainder, Interval::ZERO);
    }

    #[test]
    fn range_examples() {
        let a = tm(x_poly(), (0.0, 0.0));
        assert!(a.range().contains_interval(&Interval::UNIT));

        let sq = tm(Polynomial::from_terms([([2, 0, 0, 0], 1.0)]), (0.0, 0.0));
        assert_eq!(sq.range(), Interval::new(0.0, 1.0).unwrap());

        let b = tm(
            Polynomial::from_terms([(ZERO_EXP, 1.0), (xhat(), 2.0)]),
            (-0.1, 0.1),
        );
        let r = b.range();
        assert!(r.contains_interval(&Interval::new(-1.1, 3.1).unwrap()));
        assert!(r.width() < 4.2 + 1e-12);
    }

    #[test]
    fn integrate_time_examples() {
        let h = 0.02;
        let d = Domain::normalized(h);
        let one = TaylorModel::constant(1.0, d);
        let i = one.integrate_time(2);
        assert_eq!(i.poly, Polynomial::symbol(SYM_T, 1.0));
        assert_eq!(i.remainder, Interval::ZERO);

        let r = TaylorModel::new(Polynomial::zero(), Interval::UNIT, d);
        let i = r.integrate_time(2);
        assert!(i.poly.is_zero());
        assert!(i.remainder.contains_interval(&Interval::new(-0.02, 0.02).unwrap()));
        assert!(i.remainder.width() < 0.04 + 1e-15);

        let t = TaylorModel::new(Polynomial::symbol(SYM_T, 1.0), Interval::ZERO, d);
        let i = t.integrate_time(2);
        assert_eq!(i.poly, Polynomial::from_terms([([0, 0, 0, 2], 0.5)]));
        assert_eq!(i.remainder, Interval::ZERO);
    }

    #[test]
    fn compose_examples() {
        let a = tm(
            Polynomial::from_terms([(xhat(), 0.7), ([0, 1, 0, 0], -0.2), (ZERO_EXP, 0.1)]),
            (-0.01, 0.02),
        );
        let id = a.compose(&UnivariatePoly::identity(), 2);
        assert_eq!(id, a);

        let x = tm(x_poly(), (0.0, 0.0));
        let sq = x.compose(&UnivariatePoly::new(vec![0.0, 0.0, 1.0]), 2);
        assert_eq!(sq.poly, Polynomial::from_terms([([2, 0, 0, 0], 1.0)]));
        assert_eq!(sq.remainder, Interval::ZERO);

        // (y+1)^2/4 expanded by hand: 0.25 + 0.5 y + 0.25 y^2
        let u = UnivariatePoly::new(vec![0.25, 0.5, 0.25]);
        let c = x.compose(&u, 2);
        assert_eq!(
            c.poly,
            Polynomial::from_terms([(ZERO_EXP, 0.25), (xhat(), 0.5), ([2, 0, 0, 0], 0.25)])
        );
        assert_eq!(c.remainder, Interval::ZERO);
    }

    #[test]
    fn recenter_preserves_enclosure() {
        let a = tm(
            Polynomial::from_terms([(xhat(), 0.5), ([0, 1, 0, 0], 1e-14), (ZERO_EXP, 2.0)]),
            (0.1, 0.3),
        );
        let r = a.recenter(1e-12);
        assert!(r.remainder.lo() <= 0.0 && r.remainder.hi() >= 0.0);
        assert!(!r.poly.depends_on(SYM_Y));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let z = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), 0.0, 0.0];
            let inner = a.eval_interval(&z);
            let outer = r.eval_interval(&z);
            assert!(outer.contains_interval(&inner));
        }
    }

    // ---- enclosure soundness by sampling ----

    /// A random TM over the flow domain with small remainder, plus a random
    /// representative: poly + a smooth perturbation that stays inside the
    /// remainder.
    struct Sample {
        tm: TaylorModel,
        wiggle: [f64; 3],
    }

    impl Sample {
        fn value(&self, z: &[f64; NUM_SYMBOLS]) -> f64 {
            let r = self.tm.remainder;
            // convex combination of remainder endpoints, varying with z
            let s = 0.5 + 0.5 * (self.wiggle[0] * z[0] + self.wiggle[1] * z[3] + self.wiggle[2]).sin();
            self.tm.poly.eval(z) + r.lo() + s * (r.hi() - r.lo())
        }
    }

    fn random_tm(rng: &mut ChaCha8Rng, domain: Domain) -> Sample {
        let mut terms = Vec::new();
        for _ in 0..rng.gen_range(1..6) {
            let mut e = ZERO_EXP;
            let deg = rng.gen_range(0..=2);
            for _ in 0..deg {
                e[rng.gen_range(0..NUM_SYMBOLS)] += 1;
            }
            terms.push((e, rng.gen_range(-2.0..2.0)));
        }
        let lo = rng.gen_range(-0.1..0.0);
        let hi = rng.gen_range(0.0..0.1);
        Sample {
            tm: TaylorModel::new(Polynomial::from_terms(terms), Interval::new(lo, hi).unwrap(), domain),
            wiggle: [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)],
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, d: &Domain) -> [f64; NUM_SYMBOLS] {
        let mut z = [0.0; NUM_SYMBOLS];
        for (sym, v) in z.iter_mut().enumerate() {
            let r = d.range(sym);
            *v = if r.is_point() { r.lo() } else { rng.gen_range(r.lo()..=r.hi()) };
        }
        z
    }

    /// Containment check robust to the float evaluation of the reference:
    /// the exact value is enclosed by the point evaluation +- a few ulps.
    fn encloses(tm: &TaylorModel, z: &[f64; NUM_SYMBOLS], v: f64) -> bool {
        tm.eval_interval(z).inflate(1e-12 * (1.0 + v.abs())).contains(v)
    }

    #[test]
    fn enclosure_soundness_by_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = Domain::normalized(0.2);
        for _ in 0..100 {
            let a = random_tm(&mut rng, d);
            let b = random_tm(&mut rng, d);
            for deg in [1u32, 2, 3] {
                let sum = a.tm.add(&b.tm).unwrap();
                let prod = a.tm.mul(&b.tm, deg).unwrap();
                let integ = a.tm.integrate_time(deg);
                let u = UnivariatePoly::new(vec![0.3, -1.0, 0.5, 0.25]);
                let comp = a.tm.compose(&u, deg);
                for _ in 0..10 {
                    let z = random_point(&mut rng, &d);
                    let (va, vb) = (a.value(&z), b.value(&z));
                    assert!(encloses(&sum, &z, va + vb));
                    assert!(encloses(&prod, &z, va * vb));
                    assert!(encloses(&comp, &z, u.eval(va)));
                    // ∫_0^t a(z, s) ds by Simpson on a fine grid
                    let t = z[3];
                    let n = 200;
                    let hstep = t / n as f64;
                    let mut integral = 0.0;
                    for k in 0..n {
                        let s0 = k as f64 * hstep;
                        let f = |s: f64| a.value(&[z[0], z[1], z[2], s]);
                        integral += hstep / 6.0 * (f(s0) + 4.0 * f(s0 + hstep / 2.0) + f(s0 + hstep));
                    }
                    assert!(encloses(&integ, &z, integral), "{integ:?} at {z:?}: {integral}");
                    for tm in [&sum, &prod, &integ, &comp] {
                        assert!(tm.poly.degree() <= deg.max(2));
                    }
                    assert!(prod.poly.degree() <= deg);
                    assert!(comp.poly.degree() <= deg);
                    assert!(integ.poly.degree() <= deg);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn widening_remainder_never_shrinks_output(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
            r in 0.0f64..0.2, extra in 0.0f64..0.2,
        ) {
            let d = Domain::normalized(0.1);
            let poly = Polynomial::from_terms([(ZERO_EXP, c0), (xhat(), c1), ([0, 0, 1, 1], c2)]);
            let other = TaylorModel::new(Polynomial::from_terms([(xhat(), c2), ([0,0,0,1], c0)]), Interval::symmetric(0.05), d);
            let narrow = TaylorModel::new(poly.clone(), Interval::symmetric(r), d);
            let wide = TaylorModel::new(poly, Interval::symmetric(r + extra), d);
            prop_assert!(wide.add(&other).unwrap().remainder.contains_interval(&narrow.add(&other).unwrap().remainder));
            prop_assert!(wide.mul(&other, 2).unwrap().remainder.contains_interval(&narrow.mul(&other, 2).unwrap().remainder));
            prop_assert!(wide.integrate_time(2).remainder.contains_interval(&narrow.integrate_time(2).remainder));
            let u = UnivariatePoly::new(vec![0.1, 0.5, 0.25]);
            prop_assert!(wide.compose(&u, 2).remainder.contains_interval(&narrow.compose(&u, 2).remainder));
        }

        #[test]
        fn compose_many_matches_tm_horner(
            c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0,
            u0 in -1.0f64..1.0, u1 in -1.0f64..1.0, u2 in -1.0f64..1.0, u3 in -1.0f64..1.0,
            r1 in 0.0f64..0.2, r2 in 0.0f64..0.2, deg in 1u32..4,
        ) {
            let d = Domain::normalized(0.1);
            let poly = Polynomial::from_terms([(ZERO_EXP, c0), (xhat(), c1), ([0, 1, 1, 0], c2)]);
            let u = UnivariatePoly::new(vec![u0, u1, u2, u3]);
            let rems = [Interval::symmetric(r1), Interval::new(-r2, r1).unwrap(), Interval::ZERO];
            let base = TaylorModel::new(poly.clone(), Interval::ZERO, d);
            let (p, out) = base.compose_many(&rems, &u, deg);
            for (r, got) in rems.iter().zip(out) {
                let x = TaylorModel::new(poly.clone(), *r, d);
                let mut acc = TaylorModel::constant(u3, d);
                for &c in [u2, u1, u0].iter() {
                    acc = acc.mul(&x, deg).unwrap();
                    if c != 0.0 {
                        acc = acc.add_constant(c);
                    }
                }
                prop_assert_eq!(&acc.poly, &p);
                prop_assert_eq!(acc.remainder, got);
            }
        }
    }
}
