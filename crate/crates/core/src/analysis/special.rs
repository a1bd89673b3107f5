//! Binomial reception counts and the full-rank law of random binary
//! generator matrices.

use statrs::function::factorial::ln_binomial;

use super::AnalysisError;

/// `C(M,N) (1-Pe)^N Pe^(M-N)`: probability that exactly `successes` of
/// `trials` packets survive an erasure channel.
pub fn binomial_pmf(trials: u64, pe: f64, successes: u64) -> Result<f64, AnalysisError> {
    if successes > trials {
        return Err(AnalysisError::Domain(format!(
            "binomial: {successes} successes out of {trials} trials"
        )));
    }
    check_probability("erasure probability", pe)?;
    Ok(binomial_term(trials, 1.0 - pe, successes))
}

/// Same as [`binomial_pmf`] parameterised by the success probability,
/// without validation.
pub(crate) fn binomial_term(trials: u64, success: f64, k: u64) -> f64 {
    if success <= 0.0 {
        return (k == 0) as u8 as f64;
    }
    if success >= 1.0 {
        return (k == trials) as u8 as f64;
    }
    let ln = ln_binomial(trials, k) + k as f64 * success.ln() + (trials - k) as f64 * (-success).ln_1p();
    ln.exp()
}

/// Whole pmf of Binomial(trials, success) as a vector over `0..=trials`.
pub(crate) fn binomial_vec(trials: usize, success: f64) -> Vec<f64> {
    (0..=trials)
        .map(|k| binomial_term(trials as u64, success, k as u64))
        .collect()
}

/// One Bernoulli(success) step applied to a count distribution, in place.
/// The vector grows by one entry.
pub(crate) fn bernoulli_step(dist: &mut Vec<f64>, success: f64) {
    let fail = 1.0 - success;
    dist.push(0.0);
    for n in (1..dist.len()).rev() {
        dist[n] = dist[n] * fail + dist[n - 1] * success;
    }
    dist[0] *= fail;
}

/// Probability that `n` uniformly random binary columns span GF(2)^K.
pub fn full_rank_cdf(k: usize, n: usize) -> f64 {
    if n < k {
        return 0.0;
    }
    let ln: f64 = (0..k).map(|i| (-pow2_neg(n - i)).ln_1p()).sum();
    ln.exp()
}

/// Probability that the decoder reaches full rank exactly at the `n`-th
/// received packet.
pub fn decode_pmf(k: usize, n: usize) -> f64 {
    if n < k {
        return 0.0;
    }
    if n == k {
        return full_rank_cdf(k, n);
    }
    // F(n-1) * 2^-n (2^K - 1) / (1 - 2^(K-n)), rearranged to stay finite
    let num = pow2_neg(n - k) - pow2_neg(n);
    let den = 1.0 - pow2_neg(n - k);
    full_rank_cdf(k, n - 1) * num / den
}

/// `f_{n_p}`: decode-time pmf for a receiver already holding `held`
/// packets. At `n = 0` it is the chance that the held packets suffice.
pub fn aux_fnp(k: usize, held: usize, n: usize) -> f64 {
    if n == 0 {
        full_rank_cdf(k, held)
    } else {
        decode_pmf(k, n + held)
    }
}

fn pow2_neg(e: usize) -> f64 {
    if e > 1100 {
        0.0
    } else {
        (0.5f64).powi(e as i32)
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<(), AnalysisError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalysisError::Domain(format!("{name} {p} outside [0, 1]")));
    }
    Ok(())
}

/// Tabulated `F` and `f` for one block length.
#[derive(Clone, Debug)]
pub(crate) struct RankTable {
    k: usize,
    cdf: Vec<f64>,
    pmf: Vec<f64>,
}

impl RankTable {
    pub fn new(k: usize, max_n: usize) -> Self {
        let cdf = (0..=max_n).map(|n| full_rank_cdf(k, n)).collect();
        let pmf = (0..=max_n).map(|n| decode_pmf(k, n)).collect();
        Self { k, cdf, pmf }
    }

    pub fn cdf(&self, n: usize) -> f64 {
        self.cdf.get(n).copied().unwrap_or_else(|| full_rank_cdf(self.k, n))
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or_else(|| decode_pmf(self.k, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_examples() {
        assert!((binomial_pmf(2, 0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(binomial_pmf(7, 0.0, 7).unwrap(), 1.0);
        assert_eq!(binomial_pmf(7, 0.0, 6).unwrap(), 0.0);
        assert_eq!(binomial_pmf(7, 1.0, 0).unwrap(), 1.0);
        // 3 * 0.8^2 * 0.2
        assert!((binomial_pmf(3, 0.2, 2).unwrap() - 0.384).abs() < 1e-14);
        assert!(binomial_pmf(2, 0.5, 3).is_err());
        assert!(binomial_pmf(2, 1.5, 1).is_err());
    }

    #[test]
    fn binomial_large_trials_sum_to_one() {
        let total: f64 = (0..=5000).map(|n| binomial_pmf(5000, 0.37, n).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_step_matches_binomial() {
        let mut d = vec![1.0];
        for _ in 0..40 {
            bernoulli_step(&mut d, 0.3);
        }
        let b = binomial_vec(40, 0.3);
        for (x, y) in d.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn full_rank_small_values() {
        assert_eq!(full_rank_cdf(100, 99), 0.0);
        assert!((full_rank_cdf(2, 2) - 0.375).abs() < 1e-15);
        assert!((full_rank_cdf(2, 3) - 0.65625).abs() < 1e-15);
        assert_eq!(full_rank_cdf(3, 0), 0.0);
    }

    #[test]
    fn decode_pmf_examples() {
        assert_eq!(decode_pmf(2, 1), 0.0);
        assert!((decode_pmf(1, 1) - 0.5).abs() < 1e-15);
        assert!((decode_pmf(1, 2) - 0.25).abs() < 1e-15);
        for m in 1..30 {
            assert!((decode_pmf(1, m) - 0.5f64.powi(m as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_pmf_closed_form_equals_cdf_difference() {
        for k in [1, 2, 5, 20, 100] {
            for n in k + 1..k + 60 {
                let diff = full_rank_cdf(k, n) - full_rank_cdf(k, n - 1);
                assert!((decode_pmf(k, n) - diff).abs() < 1e-14, "K={k} N={n}");
            }
        }
    }

    #[test]
    fn cdf_tail_bound() {
        // 1 - F(N) <= 2^(K-N) for N >= K
        for k in [1, 3, 10, 100] {
            for n in k + 1..k + 50 {
                let gap = 1.0 - full_rank_cdf(k, n);
                assert!(gap <= (0.5f64).powi((n - k) as i32) * 1.0000001, "K={k} N={n}");
            }
        }
    }

    #[test]
    fn mean_decode_index_k100() {
        // E[N] = sum_{N>=0} (1 - F(N))
        let mean: f64 = (0..400).map(|n| 1.0 - full_rank_cdf(100, n)).sum();
        assert!((mean - 101.6067).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn aux_fnp_examples() {
        assert_eq!(aux_fnp(3, 0, 0), 0.0);
        assert!((aux_fnp(2, 2, 0) - 0.375).abs() < 1e-15);
        for n in 1..20 {
            assert_eq!(aux_fnp(5, 0, n), decode_pmf(5, n));
        }
        assert!((aux_fnp(2, 1, 1) - 0.375).abs() < 1e-15);
    }
}
