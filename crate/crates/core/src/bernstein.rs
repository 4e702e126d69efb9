//! Bernstein-polynomial enclosures of ReLU over an interval.
//!
//! On an input range that straddles zero, ReLU is replaced by its order-`n`
//! Bernstein interpolant on that range (expanded to the power basis) and a
//! symmetric error interval `[-E, E]`. `E` is certified by evaluating the
//! error on a uniform grid and adding a Lipschitz pad for the gaps between
//! grid points.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::taylor::UnivariatePoly;

/// Grid samples per side of the kink used to certify the approximation error.
pub const CERT_GRID: usize = 33;

/// Widths below this are treated as a point.
pub const DEGENERATE_WIDTH: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationEnclosure {
    /// Interpolant in power basis of the input variable `y`.
    pub poly: UnivariatePoly,
    pub error_bound: Interval,
    pub source_interval: Interval,
    pub order: usize,
}

impl ActivationEnclosure {
    /// `ReLU(y) ∈ poly(y) + error_bound` for `y` in the source interval.
    pub fn encloses(&self, y: f64) -> bool {
        let v = self.poly.eval_interval(Interval::point(y)) + self.error_bound;
        v.contains(relu(y))
    }

    /// The enclosure is exact (no interpolation) on one-signed ranges.
    pub fn is_exact(&self) -> bool {
        self.error_bound == Interval::ZERO
    }
}

#[inline]
pub fn relu(y: f64) -> f64 {
    y.max(0.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Power-basis coefficients of the Bernstein interpolant of ReLU on
/// `[lo, hi]` with nodes `lo + k (hi - lo) / n`.
fn bernstein_coefficients(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let w = hi - lo;
    // coefficients in s = (y - lo) / w
    let mut in_s = vec![0.0; n + 1];
    for k in 0..=n {
        let fk = relu(lo + w * k as f64 / n as f64);
        if fk == 0.0 {
            continue;
        }
        // C(n,k) s^k (1-s)^(n-k) = C(n,k) sum_j C(n-k,j) (-1)^j s^(k+j)
        let ck = binomial(n, k);
        for j in 0..=(n - k) {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            in_s[k + j] += fk * ck * binomial(n - k, j) * sign;
        }
    }
    // substitute s = a y + b with a = 1/w, b = -lo/w
    let a = 1.0 / w;
    let b = -lo / w;
    let mut out = vec![0.0; n + 1];
    // (a y + b)^m expanded by the binomial theorem
    for (m, &cm) in in_s.iter().enumerate() {
        if cm == 0.0 {
            continue;
        }
        for i in 0..=m {
            out[i] += cm * binomial(m, i) * a.powi(i as i32) * b.powi((m - i) as i32);
        }
    }
    out
}

/// Builds the ReLU enclosure on `range` with Bernstein order `order`.
pub fn bernstein_enclose_relu(range: Interval, order: usize) -> Result<ActivationEnclosure> {
    if order < 1 {
        return Err(Error::InvalidOrder(order));
    }
    let (lo, hi) = (range.lo(), range.hi());
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let exact = |poly| ActivationEnclosure {
        poly,
        error_bound: Interval::ZERO,
        source_interval: range,
        order,
    };
    if lo >= 0.0 {
        return Ok(exact(UnivariatePoly::identity()));
    }
    if hi <= 0.0 {
        return Ok(exact(UnivariatePoly::zero()));
    }
    if hi - lo < DEGENERATE_WIDTH {
        // constant ReLU(mid); ReLU is 1-Lipschitz so the image lies within
        // the half width of the midpoint value
        let c = relu(range.mid());
        let e = Interval::point(hi) - Interval::point(lo);
        return Ok(ActivationEnclosure {
            poly: UnivariatePoly::new(vec![c]),
            error_bound: Interval::symmetric(e.hi()),
            source_interval: range,
            order,
        });
    }

    let poly = UnivariatePoly::new(bernstein_coefficients(lo, hi, order));
    let e = certify_error(&poly, range);
    Ok(ActivationEnclosure {
        poly,
        error_bound: Interval::symmetric(e),
        source_interval: range,
        order,
    })
}

/// Upper bound on `max |ReLU(y) - poly(y)|` over `range`, `lo < 0 < hi`.
///
/// On each side of the kink the error is a polynomial `e` with
/// `e'' = -poly''`. Between grid nodes `|e|` exceeds its linear
/// interpolant by at most `max|e''| * h^2 / 8`.
fn certify_error(poly: &UnivariatePoly, range: Interval) -> f64 {
    let second = poly.derivative().derivative();
    let piece = |a: f64, b: f64, err: &dyn Fn(Interval) -> Interval| -> f64 {
        let n = CERT_GRID - 1;
        let mut worst = 0.0f64;
        for i in 0..=n {
            let y = if i == n { b } else { a + (b - a) * (i as f64 / n as f64) };
            worst = worst.max(err(Interval::point(y)).mag());
        }
        // interior nodes are not exactly equispaced in floating point
        let h = (Interval::point(b) - Interval::point(a)).div_scalar(n as f64).hi() * (1.0 + 1e-12);
        let curv = second.eval_interval(Interval::new(a, b).expect("ordered piece")).mag();
        let pad = Interval::point(curv) * Interval::point(h) * Interval::point(h) * 0.125;
        (Interval::point(worst) + pad).hi()
    };
    let left = piece(range.lo(), 0.0, &|y| -poly.eval_interval(y));
    let right = piece(0.0, range.hi(), &|y| y - poly.eval_interval(y));
    left.max(right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn one_signed_ranges_are_exact() {
        for order in 1..=5 {
            let pos = bernstein_enclose_relu(iv(2.0, 5.0), order).unwrap();
            assert_eq!(pos.poly, UnivariatePoly::identity());
            assert_eq!(pos.error_bound, Interval::ZERO);
            let neg = bernstein_enclose_relu(iv(-3.0, 0.0), order).unwrap();
            assert_eq!(neg.poly.eval(-1.0), 0.0);
            assert_eq!(neg.error_bound, Interval::ZERO);
        }
    }

    #[test]
    fn order_two_on_unit_interval() {
        let enc = bernstein_enclose_relu(iv(-1.0, 1.0), 2).unwrap();
        // nodes -1, 0, 1 carry ReLU values 0, 0, 1: B(s) = s^2 with
        // s = (y+1)/2, i.e. (y+1)^2/4
        let expect = [0.25, 0.5, 0.25];
        for (c, e) in enc.poly.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-15, "{:?}", enc.poly);
        }
        // |ReLU(y) - (y+1)^2/4| peaks at y = 0 with value 1/4 (on [0,1] the
        // difference is -(y-1)^2/4, on [-1,0] it is -(y+1)^2/4)
        let e = enc.error_bound.hi();
        assert!(e >= 0.25 && e <= 0.26, "E = {e}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            bernstein_enclose_relu(iv(-1.0, 1.0), 0),
            Err(Error::InvalidOrder(0))
        ));
    }

    #[test]
    fn degenerate_width_is_constant() {
        let enc = bernstein_enclose_relu(iv(-1e-12, 1e-12), 3).unwrap();
        assert_eq!(enc.poly.degree(), 0);
        assert!(enc.encloses(-1e-12) && enc.encloses(1e-12) && enc.encloses(0.0));
    }

    #[test]
    fn soundness_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let lo: f64 = rng.gen_range(-5.0..0.5);
            let hi: f64 = lo + rng.gen_range(0.0..5.0);
            let order = rng.gen_range(1..=5);
            let enc = bernstein_enclose_relu(iv(lo, hi), order).unwrap();
            for _ in 0..3 {
                let y = rng.gen_range(lo..=hi);
                assert!(enc.encloses(y), "[{lo},{hi}] n={order} y={y} {:?}", enc);
            }
            assert!(enc.encloses(lo) && enc.encloses(hi));
        }
    }

    #[test]
    fn error_weakly_shrinks_with_order() {
        let errs: Vec<f64> = (1..=5)
            .map(|n| bernstein_enclose_relu(iv(-1.0, 1.0), n).unwrap().error_bound.hi())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{errs:?}");
        }
    }
}
