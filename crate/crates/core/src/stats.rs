//! Moment accumulators and seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream `stream` of master seed `seed`. Streams are independent and
/// each one is a pure function of `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Running central moments up to order four.
///
/// Accumulators from disjoint samples combine with [`Moments::merge`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        *self = self.merge(&Moments { n: 1.0, mean: x, ..Default::default() });
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0.0 {
            return *other;
        }
        if other.n == 0.0 {
            return *self;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        Moments { n, mean, m2, m3, m4 }
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        self.m2 / self.n
    }

    pub fn skewness(&self) -> f64 {
        self.n.sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.n * self.m4 / (self.m2 * self.m2) - 3.0
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample covariance (denominator `n - 1`) of paired observations.
pub fn covariance2(samples: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let n = samples.len() as f64;
    let mean = samples.iter().fold([0.0; 2], |acc, s| [acc[0] + s[0] / n, acc[1] + s[1] / n]);
    let mut c = [[0.0; 2]; 2];
    for s in samples {
        let d = [s[0] - mean[0], s[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    for row in &mut c {
        for v in row {
            *v /= n - 1.0;
        }
    }
    c
}

pub fn frobenius(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||a - b||_F / ||b||_F`
pub fn frobenius_rel_err(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            d[i][j] = a[i][j] - b[i][j];
        }
    }
    frobenius(&d) / frobenius(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Two-pass textbook moments.
    fn direct(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
        let var = c(2);
        (mean, var, c(3) / var.powf(1.5), c(4) / (var * var) - 3.0)
    }

    #[test]
    fn moments_match_two_pass() {
        let mut rng = substream(1, 0);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>().powi(3)).collect();
        let m: Moments = xs.iter().copied().collect();
        let (mean, var, skew, kurt) = direct(&xs);
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-12);
        assert!((m.skewness() - skew).abs() < 1e-9);
        assert!((m.excess_kurtosis() - kurt).abs() < 1e-9);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| substream(7, 3).random()).collect();
        assert_eq!(a, b);
        assert_ne!(substream(7, 3).random::<u64>(), substream(7, 4).random::<u64>());
    }

    #[test]
    fn covariance_of_known_pairs() {
        let c = covariance2(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        assert!((c[0][0] - 1.0).abs() < 1e-15);
        assert!((c[0][1] - 2.0).abs() < 1e-15);
        assert!((c[1][1] - 4.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_is_split_invariant(xs in prop::collection::vec(-100.0f64..100.0, 4..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let whole: Moments = xs.iter().copied().collect();
            let left: Moments = xs[..cut].iter().copied().collect();
            let right: Moments = xs[cut..].iter().copied().collect();
            let merged = left.merge(&right);
            let tol = |a: f64| 1e-9 * a.abs().max(1.0);
            prop_assert!((merged.mean() - whole.mean()).abs() <= tol(whole.mean()));
            prop_assert!((merged.m2 - whole.m2).abs() <= tol(whole.m2));
            prop_assert!((merged.m3 - whole.m3).abs() <= 1e-7 * whole.m2.powf(1.5).max(1.0));
            prop_assert!((merged.m4 - whole.m4).abs() <= 1e-7 * whole.m4.max(1.0));
        }
    }
}
