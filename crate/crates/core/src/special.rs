//! Hypergeometric series, Pochhammer symbols and the Hurwitz zeta function.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Stopping rule shared by the infinite series in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Relative size below which a term counts as negligible.
    pub tolerance: f64,
    /// Hard cap on the number of terms.
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            tolerance: 1e-15,
            max_terms: 100_000,
        }
    }
}

/// Counts consecutive negligible terms; the series stops after three.
#[derive(Debug, Default)]
pub(crate) struct Negligible {
    run: usize,
}

impl Negligible {
    pub(crate) fn push(&mut self, term: f64, sum: f64, tolerance: f64) -> bool {
        if term.abs() <= tolerance * sum.abs() {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= 3
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `ln Γ(a + n) − ln Γ(a)` for `a > 0`.
pub fn ln_pochhammer(a: f64, n: f64) -> f64 {
    ln_gamma(a + n) - ln_gamma(a)
}

/// Rising factorial `(a)_n` by direct product; exact for small integer inputs.
pub fn pochhammer(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// Confluent hypergeometric function `₁F₁(a; b; z)`.
///
/// Negative arguments go through Kummer's transformation
/// `₁F₁(a;b;z) = e^z ₁F₁(b−a;b;−z)` so that the summed series has no
/// alternating cancellation once `b − a > 0`.
pub fn hyp1f1(a: f64, b: f64, z: f64, ctl: SeriesControl) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter("1F1 arguments must be finite".into()));
    }
    if z < 0.0 {
        return Ok(z.exp() * hyp1f1_series(b - a, b, -z, ctl)?);
    }
    hyp1f1_series(a, b, z, ctl)
}

fn hyp1f1_series(a: f64, b: f64, z: f64, ctl: SeriesControl) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut stop = Negligible::default();
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        if a + kf == 0.0 || z == 0.0 {
            return Ok(sum);
        }
        if b + kf == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "1F1 lower parameter {b} is a nonpositive integer"
            )));
        }
        term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
        sum += term;
        if !sum.is_finite() {
            break;
        }
        // Terms grow while k < z·|a|/|b|; only stop in the decreasing tail.
        if (kf + 1.0) > z && stop.push(term, sum, ctl.tolerance) {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence {
        terms: ctl.max_terms,
        partial: sum,
        last_term: term,
    })
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)`.
///
/// Terminating series (`a` or `b` a nonpositive integer) are summed over
/// their finite range for any `z`; otherwise `|z| < 1` is required.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64, ctl: SeriesControl) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter("2F1 arguments must be finite".into()));
    }
    let terminates = is_nonpositive_integer(a) || is_nonpositive_integer(b);
    if !terminates && z.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "2F1 series diverges at |z| = {} >= 1",
            z.abs()
        )));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut stop = Negligible::default();
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        if a + kf == 0.0 || b + kf == 0.0 || z == 0.0 {
            return Ok(sum);
        }
        if c + kf == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "2F1 lower parameter {c} hits zero before the series ends"
            )));
        }
        term *= (a + kf) * (b + kf) * z / ((c + kf) * (kf + 1.0));
        sum += term;
        if !terminates && stop.push(term, sum, ctl.tolerance) {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence {
        terms: ctl.max_terms,
        partial: sum,
        last_term: term,
    })
}

/// A real number stored as `sign · exp(ln_abs)` to survive magnitudes
/// outside the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogValue {
    pub fn value(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

/// An `f64` as `m · 2^e` with integer `m`.
fn dyadic(x: f64) -> (BigInt, i64) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    (BigInt::from(mant) * sign, e)
}

fn bits_of(x: &BigInt) -> i64 {
    x.bits() as i64
}

/// `ln |x · 2^{-scale}|` for a nonzero big integer.
fn ln_abs_scaled(x: &BigInt, scale: i64) -> f64 {
    let nb = bits_of(x);
    let shift = (nb - 60).max(0);
    let top = (x.abs() >> shift as usize).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + (shift - scale) as f64 * std::f64::consts::LN_2
}

/// Terminating `₂F₁(−n, b; c; z)` evaluated exactly.
///
/// Every `f64` is a dyadic rational, so each term ratio
/// `(l−n)(b+l)z / ((c+l)(l+1))` is a quotient of integers and the nested
/// (Horner) form of the polynomial is carried as one big-integer fraction.
/// Used where the alternating terms exceed the result by hundreds of
/// binary orders of magnitude.
pub fn hyp2f1_terminating_exact(n: usize, b: f64, c: f64, z: f64) -> Result<LogValue> {
    if !(b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter("2F1 arguments must be finite".into()));
    }
    let (bm, be) = dyadic(b);
    let (cm, ce) = dyadic(c);
    let (zm, ze) = dyadic(z);
    // Common denominator 2^s for b and c so that b + l and c + l stay integral.
    let s = (-be).max(-ce).max(0);
    let b_int = &bm << (be + s) as usize;
    let c_int = &cm << (ce + s) as usize;
    let one_s = BigInt::one() << s as usize;

    let ratio = |l: usize| -> (BigInt, BigInt) {
        let lb = BigInt::from(l);
        let mut num = BigInt::from(l as i64 - n as i64) * (&b_int + &lb * &one_s) * &zm;
        let mut den = (&c_int + &lb * &one_s) * BigInt::from(l + 1);
        if ze >= 0 {
            num <<= ze as usize;
        } else {
            den <<= (-ze) as usize;
        }
        (num, den)
    };
    // The denominator only matters up to the first vanishing numerator.
    for l in 0..n {
        let (num, den) = ratio(l);
        if num.is_zero() {
            break;
        }
        if den.is_zero() {
            return Err(Error::InvalidParameter(format!(
                "2F1 lower parameter {c} hits zero before the series ends"
            )));
        }
    }
    let mut p = BigInt::one();
    let mut q = BigInt::one();
    for l in (0..n).rev() {
        let (num, den) = ratio(l);
        if num.is_zero() {
            p = BigInt::one();
            q = BigInt::one();
            continue;
        }
        // 1 + (num/den)(p/q) = (den q + num p) / (den q)
        let dq = den * &q;
        p = &dq + num * &p;
        q = dq;
    }
    if p.is_zero() {
        return Ok(LogValue {
            sign: 0.0,
            ln_abs: f64::NEG_INFINITY,
        });
    }
    let sign = if p.is_negative() == q.is_negative() { 1.0 } else { -1.0 };
    Ok(LogValue {
        sign,
        ln_abs: ln_abs_scaled(&p, 0) - ln_abs_scaled(&q, 0),
    })
}

const BERNOULLI_2K: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{i≥0} (q + i)^{−s}` for `s > 1`, `q > 0`, by
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> Result<f64> {
    if !(s > 1.0) || !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Hurwitz zeta needs s > 1 and q > 0, got s = {s}, q = {q}"
        )));
    }
    const M: usize = 12;
    let head: f64 = (0..M).map(|i| (q + i as f64).powf(-s)).sum();
    let x = q + M as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Σ B_{2k}/(2k)! · s(s+1)…(s+2k−2) · x^{−s−2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (k, b2k) in BERNOULLI_2K.iter().enumerate() {
        let t = b2k / fact * rising * xpow;
        tail += t;
        let k2 = 2.0 * (k as f64 + 1.0);
        rising *= (s + k2 - 1.0) * (s + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        xpow /= x * x;
    }
    Ok(head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CTL: SeriesControl = SeriesControl {
        tolerance: 1e-16,
        max_terms: 100_000,
    };

    #[test]
    fn hyp1f1_identities() {
        assert_eq!(hyp1f1(0.7, 1.3, 0.0, CTL).unwrap(), 1.0);
        let e = hyp1f1(1.0, 1.0, 1.0, CTL).unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-15);
        let e = hyp1f1(1.0, 1.0, -3.0, CTL).unwrap();
        assert!((e - (-3.0f64).exp()).abs() < 1e-15);
        // ₁F₁(½; 3/2; −x²) = √π erf(x) / (2x)
        let got = hyp1f1(0.5, 1.5, -1.0, CTL).unwrap();
        let want = 0.746_824_132_812_427;
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn hyp1f1_large_negative_argument() {
        // ₁F₁(a; a; z) = e^z at any size of z.
        let got = hyp1f1(2.5, 2.5, -40.0, CTL).unwrap();
        assert!((got / (-40.0f64).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyp2f1_basics() {
        assert_eq!(hyp2f1(0.3, 0.2, 0.9, 0.0, CTL).unwrap(), 1.0);
        let got = hyp2f1(-1.0, 2.5, 4.0, 3.0, CTL).unwrap();
        assert!((got - (1.0 - 2.5 * 3.0 / 4.0)).abs() < 1e-15);
        let v = hyp2f1(-0.5, -0.5, 0.5, 0.25, CTL).unwrap();
        let want = std::f64::consts::PI / 12.0 + 3f64.sqrt() / 2.0;
        assert!((v - want).abs() < 1e-14);
        assert!(hyp2f1(0.5, 0.5, 1.5, 1.0, CTL).is_err());
        // ₂F₁(1,1;2;z) = −ln(1−z)/z
        let got = hyp2f1(1.0, 1.0, 2.0, 0.5, CTL).unwrap();
        assert!((got - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn exact_terminating_matches_float_when_benign() {
        for &(n, b, c, z) in &[(3usize, 0.5, 1.25, 2.0), (6, -2.5, -9.75, 2.0), (10, 1.0, 3.0, 0.5)] {
            let exact = hyp2f1_terminating_exact(n, b, c, z).unwrap().value();
            let float = hyp2f1(-(n as f64), b, c, z, CTL).unwrap();
            assert!((exact - float).abs() < 1e-12 * float.abs().max(1.0), "{n} {b} {c}: {exact} {float}");
        }
    }

    #[test]
    fn exact_terminating_survives_cancellation() {
        // ₂F₁(−n, b; b; z) = (1 − z)^n, here (−1)^n, with enormous intermediate terms.
        for n in [40usize, 41, 200] {
            let v = hyp2f1_terminating_exact(n, -300.5, -300.5, 2.0).unwrap();
            assert!(v.ln_abs.abs() < 1e-12, "n = {n}: {:?}", v);
            assert_eq!(v.sign, if n % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn hurwitz_zeta_values() {
        let z2 = hurwitz_zeta(2.0, 1.0).unwrap();
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        // ζ(2.5, 1) = 1.341487257250917...
        assert!((hurwitz_zeta(2.5, 1.0).unwrap() - 1.341_487_257_250_917_2).abs() < 1e-14);
        let shifted = hurwitz_zeta(3.0, 5.0).unwrap();
        let direct = hurwitz_zeta(3.0, 1.0).unwrap() - (1..5).map(|i| (i as f64).powi(-3)).sum::<f64>();
        assert!((shifted - direct).abs() < 1e-15);
        assert!(hurwitz_zeta(1.0, 1.0).is_err());
    }
}
