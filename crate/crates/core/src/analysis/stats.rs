//! Summary statistics and hypothesis tests.
//!
//! Tail probabilities are computed in-crate. Student t tails use the
//! regularized incomplete beta function, evaluated with its continued
//! fraction (modified Lentz); the normal tail uses erfc via the regularized
//! upper incomplete gamma function Q(1/2, x²), by series below a + 1 and by
//! continued fraction above. ln Γ uses the Lanczos approximation (g = 7).

use serde::{Deserialize, Serialize};

use super::AnalysisError;

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;

pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_inc(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else {
        gamma_q(0.5, x * x)
    }
}

/// P(|Z| ≥ |z|) for a standard normal Z.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Sample mean and standard error (n − 1 denominator). The error is `None`
/// for a single value.
pub fn mean_sem(values: &[f64]) -> Result<(f64, Option<f64>), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if values.len() == 1 {
        return Ok((values[0], None));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], Some(0.0)));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Some((var / n).sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// One-sample t-test of the differences against zero, two-sided.
pub fn paired_t_test(differences: &[f64]) -> Result<TTest, AnalysisError> {
    let n = differences.len();
    if n < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: n });
    }
    let (mean, sem) = mean_sem(differences)?;
    let sem = sem.expect("n >= 2");
    if sem == 0.0 || sem < mean.abs() * 1e-14 {
        return Err(AnalysisError::ZeroVariance);
    }
    let t = mean / sem;
    let df = n - 1;
    Ok(TTest {
        t,
        p: t_two_sided(t, df as f64),
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Rank sum of `a` minus n_a(n_a + 1)/2: the number of (a, b) pairs with
    /// a > b, ties counting one half.
    pub u: f64,
    pub p: f64,
    pub method: PValueMethod,
}

/// Products n_a·n_b up to this use the exact permutation distribution.
pub const MANN_WHITNEY_EXACT_LIMIT: usize = 400;

/// Midranks of `values` (1-based), doubled so they are integers.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut tie_sizes = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1..=end, average doubled = start + 1 + end
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        tie_sizes.push(end - start);
        start = end;
    }
    (ranks, tie_sizes)
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// Exact regime: every assignment of n_a of the pooled midranks to sample a
/// is equally likely; p is the share with |U − n_a n_b/2| at least the
/// observed distance, counted by dynamic programming over rank sums. Large
/// regime: normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let doubled_sum_a: u64 = ranks[..na].iter().sum();
    // 2U = 2R_a − n_a(n_a + 1)
    let doubled_u = doubled_sum_a as i64 - (na * (na + 1)) as i64;
    let u = doubled_u as f64 / 2.0;
    let doubled_mean = (na * nb) as i64;

    if na * nb <= MANN_WHITNEY_EXACT_LIMIT {
        let max_sum: usize = ranks.iter().map(|&r| r as usize).sum();
        // ways[k][s]: subsets of size k with doubled rank sum s
        let mut ways = vec![vec![0f64; max_sum + 1]; na + 1];
        ways[0][0] = 1.0;
        for &r in &ranks {
            let r = r as usize;
            for k in (1..=na).rev() {
                let (lower, upper) = ways.split_at_mut(k);
                let prev = &lower[k - 1];
                let cur = &mut upper[0];
                for s in (r..=max_sum).rev() {
                    if prev[s - r] != 0.0 {
                        cur[s] += prev[s - r];
                    }
                }
            }
        }
        let observed = (doubled_u - doubled_mean).abs();
        let offset = (na * (na + 1)) as i64;
        let (mut extreme, mut total) = (0.0, 0.0);
        for (s, &w) in ways[na].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            total += w;
            if (s as i64 - offset - doubled_mean).abs() >= observed {
                extreme += w;
            }
        }
        return Ok(MannWhitney {
            u,
            p: (extreme / total).min(1.0),
            method: PValueMethod::Exact,
        });
    }

    let n = (na + nb) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - (na * nb) as f64 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        normal_two_sided(z)
    };
    Ok(MannWhitney {
        u,
        p,
        method: PValueMethod::NormalApproximation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Pearson correlation with a two-sided p from t = r √((n−2)/(1−r²)).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(AnalysisError::TooFew { needed: 3, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p, n })
}

/// Area under the ROC curve of `scores` for the positives in `labels`, by
/// the trapezoid rule over every distinct threshold.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, AnalysisError> {
    let points = roc_points(scores, labels)?;
    Ok(trapezoid(&points))
}

pub(crate) fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// (FPR, TPR) pairs for thresholds from +∞ down to the smallest score; a
/// score at or above the threshold predicts positive.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if scores.len() != labels.len() {
        return Err(AnalysisError::LengthMismatch(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(AnalysisError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}
