//! Sample statistics and the Kolmogorov-Smirnov test against `Exp(1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum sample size for the asymptotic KS p-value.
pub const KS_MIN_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub sd: f64,
    pub std_error: f64,
}

/// Two-pass mean and standard deviation; summing in slice order keeps the
/// result independent of how the samples were produced.
pub fn summarize(xs: &[f64]) -> Option<Summary> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        n,
        mean,
        sd,
        std_error: sd / (n as f64).sqrt(),
    })
}

/// Ratio estimate `sum(num) / sum(den)` over independent batches with its
/// delta-method standard error; `None` for fewer than two batches or a
/// zero denominator.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> Option<(f64, f64)> {
    let m = num.len();
    if m < 2 || den.len() != m {
        return None;
    }
    let total: f64 = den.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let ratio = num.iter().sum::<f64>() / total;
    let ss: f64 = num
        .iter()
        .zip(den)
        .map(|(a, b)| (a - ratio * b).powi(2))
        .sum();
    let mean_den = total / m as f64;
    let se = (ss / (m * (m - 1)) as f64).sqrt() / mean_den;
    Some((ratio, se))
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x:
        // P(K <= x) = sqrt(2 pi)/x sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let cdf: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        if term < 1e-300 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS statistic of a sample against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Normalizes `samples` by their sample mean and tests against `Exp(1)`
/// with the asymptotic Kolmogorov p-value.
pub fn exp_law_test(samples: &[f64]) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            n: samples.len(),
            min: KS_MIN_SAMPLES,
        });
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParameter(
            "transition times must be finite and nonnegative".into(),
        ));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidParameter("sample mean is zero".into()));
    }
    let normalized: Vec<f64> = samples.iter().map(|x| x / mean).collect();
    let statistic = ks_statistic(&normalized, |x| 1.0 - (-x).exp());
    let p_value = kolmogorov_survival((samples.len() as f64).sqrt() * statistic);
    Ok(KsResult { statistic, p_value })
}
