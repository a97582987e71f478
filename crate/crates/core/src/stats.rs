//! Compensated accumulators and parallel Monte Carlo driver.

use rayon::prelude::*;
use serde::Serialize;

/// Trials per work unit. Sums are formed per chunk and merged in chunk
/// order, so results are identical for any thread count.
pub const CHUNK: u64 = 4096;

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
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

/// Running mean and variance from compensated first and second moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAcc {
    n: u64,
    s1: KahanSum,
    s2: KahanSum,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.n += other.n;
        self.s1.add(other.s1.sum);
        self.s1.add(other.s1.comp);
        self.s2.add(other.s2.sum);
        self.s2.add(other.s2.comp);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate { mean: 0.0, std_err: 0.0, n: 0 };
        }
        let n = self.n as f64;
        let mean = self.s1.value() / n;
        let var = if self.n > 1 { ((self.s2.value() - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean, std_err: (var / n).sqrt(), n: self.n }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors of the mean. A
    /// zero-variance estimate must match to within rounding.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let slack = k * self.std_err + 1e-12 * target.abs().max(1.0);
        (self.mean - target).abs() <= slack
    }
}

/// Correctly rounded sum of `xs` (Shewchuk's exact partials).
///
/// The result depends only on the multiset of inputs, never on their order
/// or grouping, so totals assembled from the same payments in different
/// ways compare bit-equal.
pub fn exact_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in xs {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Round half-even across the remaining partials.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Runs `f(i)` for `i in 0..trials` in parallel and accumulates each of the
/// `width` returned values.
pub fn monte_carlo<F>(trials: u64, width: usize, f: F) -> Vec<MeanAcc>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Vec<MeanAcc>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![MeanAcc::default(); width];
            let mut buf = vec![0.0; width];
            let end = ((c + 1) * CHUNK).min(trials);
            for i in c * CHUNK..end {
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(i, &mut buf);
                for (a, &x) in acc.iter_mut().zip(&buf) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![MeanAcc::default(); width];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}

/// Single-output convenience wrapper around [`monte_carlo`].
pub fn estimate<F>(trials: u64, f: F) -> Estimate
where
    F: Fn(u64) -> f64 + Sync,
{
    monte_carlo(trials, 1, |i, out| out[0] = f(i))[0].estimate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn exact_sum_ignores_grouping() {
        let xs = [0.1, 0.2, 0.3, 1e16, -1e16, 1e-6, 2.0 + 1e-6];
        let a = exact_sum(xs);
        let b = exact_sum([exact_sum([0.1, 0.2]), 0.3, 1e16, -1e16, 1e-6, 2.0 + 1e-6]);
        let mut rev = xs;
        rev.reverse();
        assert_eq!(a.to_bits(), exact_sum(rev).to_bits());
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert!((a - b).abs() <= 1e-15);
        assert_eq!(exact_sum([]), 0.0);
    }

    #[test]
    fn mean_and_se_of_known_sample() {
        let mut m = MeanAcc::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        let e = m.estimate();
        assert_eq!(e.mean, 2.5);
        let var = 5.0 / 3.0;
        assert!((e.std_err - (var / 4.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let f = |i: u64| crate::oracle::uniform(&[&i.to_be_bytes()]);
        let a = estimate(20_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate(20_000, f));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }
}
