//! Summation helpers with bounded rounding error.

const BLOCK: usize = 32;

/// Pairwise (tree) summation. The reduction tree depends only on the length,
/// so results are reproducible for a fixed input.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise summation of `f(i)` for `i` in `lo..hi`, without materializing the terms.
pub fn pairwise_sum_by(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= BLOCK {
        return (lo..hi).map(f).sum();
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_sum_by(lo, mid, f) + pairwise_sum_by(mid, hi, f)
}

/// Running compensated (Neumaier) sum, used for prefix sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let xs: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 50_005_000.0);
        assert_eq!(pairwise_sum_by(0, 10_000, &|i| xs[i]), 50_005_000.0);
    }

    #[test]
    fn compensated_recovers_small_terms() {
        let mut c = Compensated::default();
        c.add(1.0);
        for _ in 0..1000 {
            c.add(1e-16);
        }
        c.add(-1.0);
        assert!((c.value() - 1e-13).abs() < 1e-20);
    }
}
