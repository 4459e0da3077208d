//! Globally adaptive Gauss–Kronrod (7/15) quadrature, with maps for
//! half-infinite and infinite intervals and vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    /// Sum of the Gauss/Kronrod disagreement over all final subintervals,
    /// maximized over components.
    pub error: f64,
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> Piece<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += wk * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..N {
        k[i] *= h;
        g[i] *= h;
        error = error.max((k[i] - g[i]).abs());
    }
    Piece {
        a,
        b,
        value: k,
        error,
    }
}

/// Integrates a vector-valued `f` over the finite interval `[a, b]`.
pub fn integrate_vec<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Estimate<N>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("finite interval required".into()));
    }
    if a == b {
        return Ok(Estimate {
            value: [0.0; N],
            error: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b);
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    let done = |total: &[f64; N], error: f64| {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        error <= opts.abs_tol.max(opts.rel_tol * scale)
    };
    while !done(&total, error) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: total[0],
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        for i in 0..N {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
        }
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum from the pieces to shed drift from the incremental updates.
    let mut value = [0.0; N];
    let mut err = 0.0;
    for p in heap.iter() {
        for i in 0..N {
            value[i] += p.value[i];
        }
        err += p.error;
    }
    if !value.iter().all(|v| v.is_finite()) {
        return Err(Error::Quadrature {
            estimate: value[0],
            error: f64::INFINITY,
        });
    }
    if !done(&value, err) {
        return Err(Error::Quadrature {
            estimate: value[0],
            error: err,
        });
    }
    Ok(Estimate { value, error: err })
}

/// Integrates `f` over `[a, b]`, where either end may be infinite.
///
/// Infinite ends are mapped onto a finite range by `x = a + t/(1−t)`,
/// `x = b − t/(1−t)` or `x = t/(1−t²)`.
pub fn integrate_vec_any<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Estimate<N>> {
    let scaled = |v: [f64; N], w: f64| -> [f64; N] {
        let mut out = [0.0; N];
        if w == 0.0 || !w.is_finite() {
            return out;
        }
        for i in 0..N {
            out[i] = v[i] * w;
        }
        out
    };
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_vec(f, a, b, opts),
        (true, false) => integrate_vec(
            |t| {
                let u = 1.0 - t;
                scaled(f(a + t / u), 1.0 / (u * u))
            },
            0.0,
            1.0,
            opts,
        ),
        (false, true) => integrate_vec(
            |t| {
                let u = 1.0 - t;
                scaled(f(b - t / u), 1.0 / (u * u))
            },
            0.0,
            1.0,
            opts,
        ),
        (false, false) => integrate_vec(
            |t| {
                let u = 1.0 - t * t;
                scaled(f(t / u), (1.0 + t * t) / (u * u))
            },
            -1.0,
            1.0,
            opts,
        ),
    }
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    Ok(integrate_vec_any(|x| [f(x)], a, b, opts)?.value[0])
}
