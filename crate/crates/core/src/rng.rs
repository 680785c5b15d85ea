//! Counter-based random numbers.
//!
//! Every draw is `mix(key + counter * GOLDEN)`, the SplitMix64 output
//! function applied to a Weyl sequence. The stream is a pure function of
//! `(key, counter)`, so results are identical on every platform and trial
//! seeds can be derived without sharing state between threads.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of counters
/// (e.g. `[cell, trial]`). Distinct paths give unrelated seeds.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base ^ GOLDEN), |acc, &p| {
        mix64(acc.wrapping_add(mix64(p.wrapping_add(1).wrapping_mul(GOLDEN))))
    })
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal via Box-Muller; one output per call.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.open01();
        let u2 = self.unit();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
    }

    pub fn exponential(&mut self) -> f64 {
        -libm::log(self.open01())
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            p.swap(i, j);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible() {
        let a: Vec<u64> = {
            let mut r = CounterRng::new(42);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let mut r = CounterRng::new(42);
        let b: Vec<u64> = (0..8).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
        let mut other = CounterRng::new(43);
        assert_ne!(a[0], other.next_u64());
    }

    #[test]
    fn frozen_first_draws() {
        // Guards against accidental algorithm changes: golden files depend on it.
        let mut r = CounterRng::new(0);
        let first = r.next_u64();
        assert_eq!(first, mix64(mix64(0).wrapping_add(GOLDEN)));
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        let s1 = derive_seed(7, &[0, 1]);
        let s2 = derive_seed(7, &[1, 0]);
        let s3 = derive_seed(7, &[0, 1]);
        assert_ne!(s1, s2);
        assert_eq!(s1, s3);
        assert_ne!(derive_seed(7, &[]), derive_seed(8, &[]));
    }

    #[test]
    fn uniform_moments() {
        let mut r = CounterRng::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.open01()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.002);
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn normal_moments() {
        let mut r = CounterRng::new(2);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut r = CounterRng::new(3);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[r.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut r = CounterRng::new(4);
        let mut p = r.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
