//! Hypothesis tests used in the analyses: Spearman rank correlation, paired
//! and Welch t-tests, and Bonferroni adjustment. Student-t tail
//! probabilities come from the regularized incomplete beta function,
//! evaluated here by continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance tier at 0.05 / 0.01 / 0.001.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Significance {
    None,
    P05,
    P01,
    P001,
}

impl Significance {
    pub fn of(p: f64) -> Self {
        if p < 0.001 {
            Significance::P001
        } else if p < 0.01 {
            Significance::P01
        } else if p < 0.05 {
            Significance::P05
        } else {
            Significance::None
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::P05 => "*",
            Significance::P01 => "**",
            Significance::P001 => "***",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    /// rho for Spearman, t otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub dof: f64,
    pub n: usize,
    pub significance: Significance,
}

impl StatResult {
    fn new(statistic: f64, p_value: f64, dof: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        StatResult {
            statistic,
            p_value,
            dof,
            n,
            significance: Significance::of(p_value),
        }
    }

    pub fn marker(&self) -> &'static str {
        self.significance.marker()
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, nine coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
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
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=10_000 {
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

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(dof / 2.0, 0.5, dof / (dof + t * t))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
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

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with average-rank ties; p from the t approximation with
/// n - 2 degrees of freedom. A perfect correlation reports p = 0.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<StatResult> {
    if x.len() != y.len() {
        return Err(Error::Stats(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Stats(format!("spearman needs at least 3 points, got {n}")));
    }
    check_finite(x)?;
    check_finite(y)?;
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Stats("constant input, rho undefined".into()))?;
    let dof = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(rho * (dof / (1.0 - rho * rho)).sqrt(), dof)
    };
    Ok(StatResult::new(rho, p, dof, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
    NoChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedResult {
    pub result: StatResult,
    pub mean_a: f64,
    pub mean_b: f64,
    pub direction: Direction,
}

/// Paired t-test on `d = b - a`, two-sided with n - 1 degrees of freedom.
/// Constant non-zero differences give t = ±inf and p = 0; all-zero
/// differences give t = 0 and p = 1.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedResult> {
    if a.len() != b.len() {
        return Err(Error::Stats(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Stats(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    check_finite(a)?;
    check_finite(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let md = mean(&d);
    let sd = variance(&d).sqrt();
    let dof = (n - 1) as f64;
    let (t, p) = if sd == 0.0 {
        if md == 0.0 {
            (0.0, 1.0)
        } else {
            (md.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = md / (sd / (n as f64).sqrt());
        (t, student_t_two_sided(t, dof))
    };
    let direction = if t > 0.0 {
        Direction::Increase
    } else if t < 0.0 {
        Direction::Decrease
    } else {
        Direction::NoChange
    };
    Ok(PairedResult {
        result: StatResult::new(t, p, dof, n),
        mean_a: mean(a),
        mean_b: mean(b),
        direction,
    })
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<StatResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats("welch t-test needs at least 2 values per sample".into()));
    }
    check_finite(a)?;
    check_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Stats("both samples have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(StatResult::new(t, student_t_two_sided(t, dof), dof, a.len() + b.len()))
}

/// Student's two-sample t-test with pooled variance.
pub fn pooled_ttest(a: &[f64], b: &[f64]) -> Result<StatResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats("pooled t-test needs at least 2 values per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let dof = na + nb - 2.0;
    let sp2 = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / dof;
    if sp2 == 0.0 {
        return Err(Error::Stats("zero pooled variance".into()));
    }
    let t = (mean(a) - mean(b)) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(StatResult::new(t, student_t_two_sided(t, dof), dof, a.len() + b.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bonferroni {
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
    pub alpha: f64,
}

/// `min(1, p * m)` for a family of m tests; reject when adjusted < alpha.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Bonferroni> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Stats(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len() as f64;
    let adjusted: Vec<f64> = p_values.iter().map(|p| (p * m).min(1.0)).collect();
    let reject = adjusted.iter().map(|&p| p < alpha).collect();
    Ok(Bonferroni {
        adjusted,
        reject,
        alpha,
    })
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Stats("non-finite input".into()))
    }
}
