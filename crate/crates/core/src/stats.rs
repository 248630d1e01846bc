//! Finite-sample estimators and inference.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::stream_rng;

/// Sample excess kurtosis of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisEstimate<T> {
    pub value: T,
    #[serde(rename = "T")]
    pub len: usize,
    pub sigma0_hat: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub coefficient: T,
    pub r_squared: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// W⁺, the sum of ranks of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
}

/// `(1/T) Σ ((v_t − v̄)/σ̂)⁴ − 3` with `σ̂² = (1/T) Σ (v_t − v̄)²`.
pub fn excess_kurtosis<T: Scalar>(v: &[T]) -> Result<T> {
    if v.len() < 4 {
        return Err(Error::Input(format!("kurtosis needs at least 4 values, got {}", v.len())));
    }
    let n = T::of_usize(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let (mut m2, mut m4) = (T::zero(), T::zero());
    for &x in v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    let scale = mean.abs().max(v.iter().fold(T::zero(), |m, x| m.max(x.abs())));
    if !(m2 > T::epsilon() * T::epsilon() * scale * scale) || !(m2 > T::zero()) {
        return Err(Error::DegenerateVariance("series has zero empirical variance".into()));
    }
    Ok(m4 / (m2 * m2) - T::of(3.0))
}

pub fn sample_excess_kurtosis<T: Scalar>(v: &[T]) -> Result<KurtosisEstimate<T>> {
    Ok(KurtosisEstimate { value: excess_kurtosis(v)?, len: v.len(), sigma0_hat: None })
}

/// `√T · std(κ̂*)` over `resamples` bootstrap resamples drawn with
/// replacement. Resample `b` uses stream `b` of `seed`.
pub fn bootstrap_sigma0<T: Scalar>(v: &[T], resamples: usize, seed: u64) -> Result<T> {
    if resamples < 2 {
        return Err(Error::Input(format!("bootstrap needs at least 2 resamples, got {resamples}")));
    }
    excess_kurtosis(v)?;
    let n = v.len();
    let estimates: Vec<T> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let resample: Vec<T> = (0..n).map(|_| v[rng.random_range(0..n)]).collect();
            // A resample of a non-constant series can be constant.
            excess_kurtosis(&resample).unwrap_or(T::of(-2.0))
        })
        .collect();
    Ok(std_dev(&estimates) * T::of_usize(n).sqrt())
}

/// Population standard deviation (1/n).
pub fn std_dev<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let n = T::of_usize(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    (v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n).sqrt()
}

pub fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::of_usize(v.len().max(1))
}

/// Minimum of `|κ_r − κ_ℓ|` over `r ≠ ℓ`.
pub fn min_pairwise_gap<T: Scalar>(kappas: &[T]) -> Result<T> {
    if kappas.len() < 2 {
        return Err(Error::Input("need at least two kurtoses".into()));
    }
    let mut sorted = kappas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sorted.windows(2).fold(T::infinity(), |m, w| m.min(w[1] - w[0])))
}

fn median_sorted<T: Scalar>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * T::of(0.5)
    }
}

pub fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    median_sorted(&s)
}

/// `mean(top_m |κ̂|) − median(|κ̂|)`.
pub fn kurtosis_gap_statistic<T: Scalar>(kappas: &[T], top_m: usize) -> Result<T> {
    if top_m == 0 || kappas.len() < top_m {
        return Err(Error::Input(format!(
            "gap statistic needs at least top_m = {top_m} ≥ 1 values, got {}",
            kappas.len()
        )));
    }
    let mut abs: Vec<T> = kappas.iter().map(|k| k.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let top = abs[abs.len() - top_m..].iter().copied().sum::<T>() / T::of_usize(top_m);
    Ok(top - median_sorted(&abs))
}

/// Largest `n_effective` for which the null distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `P(W⁺ ≥ observed)` under the symmetric null, by dynamic programming over
/// doubled ranks (midranks are half-integers, so doubled ranks are integral).
fn exact_upper_tail(ranks: &[f64], observed: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &d in &doubled {
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + d] += c;
            }
        }
        reach += d;
    }
    let threshold = (2.0 * observed).round() as usize;
    let tail: f64 = counts[threshold.min(total + 1)..].iter().sum();
    tail / 2f64.powi(ranks.len() as i32)
}

fn normal_upper_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Paired one-sided Wilcoxon signed-rank test of `x > y`.
///
/// Zero differences are dropped and tied magnitudes receive midranks. The
/// null is enumerated exactly up to [`WILCOXON_EXACT_MAX_N`] nonzero pairs;
/// above that a normal approximation with tie-corrected variance and a
/// continuity correction is used.
pub fn wilcoxon_signed_rank_one_sided<T: Scalar>(x: &[T], y: &[T]) -> Result<RankTestResult> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Input(format!(
            "paired test needs equal nonempty lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let d: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - b).as_f64())
        .filter(|v| *v != 0.0)
        .collect();
    if d.is_empty() {
        return Err(Error::DegenerateTest("all paired differences are zero".into()));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("differences must be finite".into()));
    }
    let n = d.len();
    let magnitudes: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&magnitudes);
    let statistic: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    let p_value = if n <= WILCOXON_EXACT_MAX_N {
        exact_upper_tail(&ranks, statistic)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut sorted = magnitudes.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut tie_term = 0.0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            normal_upper_tail((statistic - mean - 0.5) / var.sqrt())
        }
    };
    Ok(RankTestResult { statistic, p_value: p_value.clamp(0.0, 1.0), n_effective: n })
}

/// Least-squares fit of `κ = c / R` through the origin.
pub fn fit_inverse_law<T: Scalar>(r_values: &[usize], kappa_values: &[T]) -> Result<FitResult<T>> {
    if r_values.len() != kappa_values.len() || r_values.len() < 2 {
        return Err(Error::Input("fit needs matching series of length ≥ 2".into()));
    }
    if r_values.contains(&0) {
        return Err(Error::Input("R values must be positive".into()));
    }
    if r_values.iter().all(|&r| r == r_values[0]) {
        return Err(Error::Input("fit needs at least two distinct R values".into()));
    }
    let x: Vec<T> = r_values.iter().map(|&r| T::one() / T::of_usize(r)).collect();
    let sxx: T = x.iter().map(|&v| v * v).sum();
    let sxy: T = x.iter().zip(kappa_values).map(|(&a, &b)| a * b).sum();
    let coefficient = sxy / sxx;
    let ybar = mean(kappa_values);
    let ss_res: T = x
        .iter()
        .zip(kappa_values)
        .map(|(&a, &b)| (b - coefficient * a) * (b - coefficient * a))
        .sum();
    let ss_tot: T = kappa_values.iter().map(|&b| (b - ybar) * (b - ybar)).sum();
    Ok(FitResult { coefficient, r_squared: r_squared(ss_res, ss_tot) })
}

fn r_squared<T: Scalar>(ss_res: T, ss_tot: T) -> T {
    if ss_tot == T::zero() {
        if ss_res == T::zero() {
            T::one()
        } else {
            T::neg_infinity()
        }
    } else {
        T::one() - ss_res / ss_tot
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

/// Ordinary least squares `y = slope · x + intercept`.
pub fn linear_fit<T: Scalar>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input("linear fit needs matching series of length ≥ 2".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    if sxx == T::zero() {
        return Err(Error::Input("linear fit needs at least two distinct x values".into()));
    }
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: T = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let ss_tot: T = y.iter().map(|&b| (b - my) * (b - my)).sum();
    Ok(LinearFit { slope, intercept, r_squared: r_squared(ss_res, ss_tot) })
}

/// OLS slope of `ln y` against `ln x`.
pub fn loglog_slope<T: Scalar>(x_values: &[T], y_values: &[T]) -> Result<T> {
    if x_values.iter().chain(y_values).any(|v| !(*v > T::zero())) {
        return Err(Error::Input("log-log slope needs strictly positive values".into()));
    }
    let lx: Vec<T> = x_values.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y_values.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kurtosis_examples() {
        for n in [4usize, 10, 1000] {
            let v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            assert!((sample_excess_kurtosis(&v).unwrap().value + 2.0).abs() < 1e-12);
        }
        let k = sample_excess_kurtosis(&[1.0f64, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((k.value + 1.3).abs() < 1e-12);
        assert_eq!(k.len, 5);
        assert!(matches!(sample_excess_kurtosis(&[2.0; 8]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(sample_excess_kurtosis(&[1.0, 2.0, 3.0]), Err(Error::Input(_))));
        let k32 = sample_excess_kurtosis(&[1.0f32, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((k32.value + 1.3).abs() < 1e-5);
    }

    #[test]
    fn kurtosis_can_not_go_below_minus_two() {
        let v = [0.3, -1.2, 5.0, 2.2, 0.0, -0.7];
        assert!(sample_excess_kurtosis(&v).unwrap().value >= -2.0);
    }

    #[test]
    fn bootstrap_contract() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let s = bootstrap_sigma0(&v, 2, 1).unwrap();
        assert!(s.is_finite() && s >= 0.0);
        assert_eq!(bootstrap_sigma0(&v, 50, 9).unwrap(), bootstrap_sigma0(&v, 50, 9).unwrap());
        assert!(bootstrap_sigma0(&v, 1, 9).is_err());
        assert!(bootstrap_sigma0(&[1.0; 10], 10, 9).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(min_pairwise_gap(&[1.5, 1.5]).unwrap(), 0.0);
        assert_eq!(min_pairwise_gap(&[0.0, 1.0, 3.0]).unwrap(), 1.0);
        let k: Vec<f64> = [6.0, 10.0, 30.0].iter().map(|df| 6.0 / (df - 4.0)).collect();
        // brute force over pairs
        let mut brute = f64::INFINITY;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    brute = brute.min((k[i] - k[j]).abs());
                }
            }
        }
        assert_eq!(min_pairwise_gap(&k).unwrap(), brute);
        assert!((brute - (1.0 - 6.0 / 26.0)).abs() < 1e-15);
        assert!(min_pairwise_gap(&[1.0]).is_err());
    }

    #[test]
    fn gap_statistic_examples() {
        assert_eq!(kurtosis_gap_statistic(&[0.7; 9], 5).unwrap(), 0.0);
        let v = [5.0f64, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((kurtosis_gap_statistic(&v, 5).unwrap() - 2.5).abs() < 1e-15);
        let v = [10.0f64, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((kurtosis_gap_statistic(&v, 5).unwrap() - 2.0).abs() < 1e-15);
        // absolute values are used
        let v = [-10.0f64, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((kurtosis_gap_statistic(&v, 5).unwrap() - 2.0).abs() < 1e-15);
        assert!(kurtosis_gap_statistic(&[1.0, 2.0], 5).is_err());
    }

    #[test]
    fn wilcoxon_examples() {
        let r = wilcoxon_signed_rank_one_sided(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.125).abs() < 1e-15);
        assert_eq!(r.n_effective, 3);
        let r = wilcoxon_signed_rank_one_sided(&[-1.0, -2.0, -3.0], &[0.0; 3]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(matches!(
            wilcoxon_signed_rank_one_sided(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegenerateTest(_))
        ));
        assert!(wilcoxon_signed_rank_one_sided(&[1.0], &[1.0, 2.0]).is_err());
        // Zeros are dropped.
        let r = wilcoxon_signed_rank_one_sided(&[1.0, 5.0, 2.0], &[0.0, 5.0, 0.0]).unwrap();
        assert_eq!(r.n_effective, 2);
        assert!((r.p_value - 0.25).abs() < 1e-15);
        // Single pair
        let up = wilcoxon_signed_rank_one_sided(&[1.0], &[0.0]).unwrap();
        let down = wilcoxon_signed_rank_one_sided(&[0.0], &[1.0]).unwrap();
        assert_eq!((up.p_value, down.p_value), (0.5, 1.0));
    }

    #[test]
    fn wilcoxon_ties_use_midranks() {
        // |d| = (1, 1, 2): midranks (1.5, 1.5, 3). Enumerate 8 patterns by hand:
        // sums 0,1.5,1.5,3,3,4.5,4.5,6 -> P(W⁺ ≥ 4.5) = 3/8.
        let r = wilcoxon_signed_rank_one_sided(&[1.0, -1.0, 2.0], &[0.0; 3]).unwrap();
        assert_eq!(r.statistic, 4.5);
        assert!((r.p_value - 0.375).abs() < 1e-15);
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wilcoxon_normal_branch() {
        let x: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let y = vec![0.0; 30];
        let r = wilcoxon_signed_rank_one_sided(&x, &y).unwrap();
        assert_eq!(r.statistic, 465.0);
        assert!(r.p_value < 1e-5);
        let r = wilcoxon_signed_rank_one_sided(&y, &x).unwrap();
        assert!(r.p_value > 0.99999);
        // Balanced signs around the null mean.
        let d: Vec<f64> = (1..=40).map(|i| if i % 4 < 2 { i as f64 } else { -(i as f64) }).collect();
        let r = wilcoxon_signed_rank_one_sided(&d, &vec![0.0; 40]).unwrap();
        assert!(r.p_value > 0.2 && r.p_value < 0.8, "{}", r.p_value);
    }

    #[test]
    fn inverse_law_examples() {
        let rs: Vec<usize> = (2..=10).collect();
        let k: Vec<f64> = rs.iter().map(|&r| 2.0 / r as f64).collect();
        let fit = fit_inverse_law(&rs, &k).unwrap();
        assert!((fit.coefficient - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_inverse_law(&rs, &vec![0.0; rs.len()]).unwrap();
        assert_eq!(fit.coefficient, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit_inverse_law(&[3, 3, 3], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_inverse_law(&[3, 4], &[1.0]).is_err());
    }

    #[test]
    fn loglog_examples() {
        let x = [1e3, 1e4, 1e5];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.3 / v.sqrt()).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&x, &[2.0, 2.0, 2.0]).unwrap().abs() < 1e-15);
        assert!(loglog_slope(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn linear_fit_basic() {
        let f = linear_fit(&[0.0f64, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
    }
}
