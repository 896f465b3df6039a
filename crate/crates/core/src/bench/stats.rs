use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation (n - 1). Summation runs over the
/// sorted sample so the result does not depend on input order.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, (sq.iter().sum::<f64>() / (n - 1.0)).sqrt())
}

/// `m ± s` with the given decimals.
pub fn pm(mean: f64, std: f64, decimals: usize) -> String {
    format!("{mean:.decimals$} ± {std:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Welch {
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test. `None` with fewer than two samples on
/// either side or when both samples are constant.
pub fn welch(a: &[f64], b: &[f64]) -> Option<Welch> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let va = sa * sa / a.len() as f64;
    let vb = sb * sb / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return None;
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Some(Welch {
        mean_a: ma,
        std_a: sa,
        mean_b: mb,
        std_b: sb,
        t,
        df,
        p,
    })
}

/// `rate ± k·σ` for the fraction of `n` Bernoulli trials, clamped to [0, 1].
pub fn binomial_bounds(rate: f64, n: usize, k: f64) -> (f64, f64) {
    let sigma = (rate * (1.0 - rate) / n as f64).sqrt();
    ((rate - k * sigma).max(0.0), (rate + k * sigma).min(1.0))
}

/// Percentile bootstrap interval for the statistic `f` over resamples of `xs`.
pub fn bootstrap_ci(xs: &[f64], resamples: usize, level: f64, seed: u64, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; xs.len()];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            f(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

/// SplitMix64 step, used to derive per-trial seeds.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welch_matches_reference_values() {
        // reference values from an independent statistics package
        let w = welch(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        assert_relative_eq!(w.t, -1.8973665961010275, epsilon = 1e-12);
        assert_relative_eq!(w.p, 0.10753119493062718, epsilon = 1e-9);
        let w = welch(&[7.1, 7.4, 6.9, 7.3, 7.2, 7.5, 7.0], &[6.8, 6.9, 6.6, 7.0, 6.7]).unwrap();
        assert_relative_eq!(w.t, 3.703280399090208, epsilon = 1e-9);
        assert_relative_eq!(w.df, 9.966101694915253, epsilon = 1e-9);
        assert_relative_eq!(w.p, 0.004109962479828926, epsilon = 1e-9);
        assert_relative_eq!(w.std_a, 0.21602468994692867, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_samples() {
        assert!(welch(&[1.0], &[1.0, 2.0]).is_none());
        assert!(welch(&[1.0, 1.0], &[1.0, 1.0]).is_none());
        assert!(mean_std(&[]).0.is_nan());
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn mean_std_ignores_order() {
        let a = [0.1, 0.7, 1e9, 0.2, 3.3, -5.0];
        let mut b = a;
        b.reverse();
        assert_eq!(mean_std(&a), mean_std(&b));
    }

    #[test]
    fn bounds_and_bootstrap() {
        assert_eq!(binomial_bounds(1.0, 100, 3.0), (1.0, 1.0));
        let (lo, hi) = binomial_bounds(0.2, 100, 3.0);
        assert_relative_eq!(lo, 0.08, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.32, epsilon = 1e-12);
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = bootstrap_ci(&xs, 500, 0.95, 7, mean);
        assert!(lo < 99.5 && 99.5 < hi && hi - lo < 30.0);
        assert_eq!(bootstrap_ci(&xs, 500, 0.95, 7, mean), (lo, hi));
    }
}
