//! Self-contained statistics: sample summaries with Student-t confidence
//! intervals, the paired t-test, and a balanced full-factorial ANOVA with
//! main effects and two-way interactions. The special functions (log-gamma,
//! regularized incomplete beta) are implemented here so p-values need no
//! external dependency.

use crate::error::Error;

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection for the few calls below 0.5.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (std::f64::consts::TAU).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued-fraction kernel for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
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

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(Error::data(format!("incomplete beta: x = {x} outside [0, 1]")));
    }
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::data(format!("incomplete beta: a = {a}, b = {b} must be > 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
        + a * x.ln()
        + b * (1.0 - x).ln())
    .exp();
    Ok(if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    })
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: u64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let df = df as f64;
    let x = df / (df + t * t);
    let half_tail =
        0.5 * regularized_incomplete_beta(x, df / 2.0, 0.5).expect("domain checked above");
    if t >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Two-sided p-value for a t statistic.
pub fn t_two_sided_p(t: f64, df: u64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dff = df as f64;
    regularized_incomplete_beta(dff / (dff + t * t), dff / 2.0, 0.5)
        .expect("domain checked above")
}

/// Quantile of Student's t by bisection on the CDF, to 1e-9.
pub fn t_quantile(p: f64, df: u64) -> Result<f64, Error> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::data(format!("t quantile: p = {p} outside (0, 1)")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Symmetric: solve for the upper half.
    let (target, negate) = if p >= 0.5 { (p, false) } else { (1.0 - p, true) };
    let mut hi = 1.0;
    while t_cdf(hi, df) < target {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if negate { -q } else { q })
}

/// Upper-tail probability of the F(d1, d2) distribution.
pub fn f_sf(f: f64, d1: u64, d2: u64) -> Result<f64, Error> {
    if !(f >= 0.0) {
        return Err(Error::data(format!("F survival: F = {f} must be >= 0")));
    }
    if d1 == 0 || d2 == 0 {
        return Err(Error::data("F survival: degrees of freedom must be positive"));
    }
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    let x = d2f / (d2f + d1f * f);
    regularized_incomplete_beta(x, d2f / 2.0, d1f / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci95: (f64, f64),
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.max(0.0).sqrt())
}

/// Mean, sample standard deviation and 95% t confidence interval.
pub fn summarize(xs: &[f64]) -> Result<SampleSummary, Error> {
    if xs.len() < 2 {
        return Err(Error::data("summarize requires at least 2 observations"));
    }
    let n = xs.len();
    let (mean, sd) = mean_sd(xs);
    let half = t_quantile(0.975, (n - 1) as u64)? * sd / (n as f64).sqrt();
    Ok(SampleSummary {
        n,
        mean,
        sd,
        ci95: (mean - half, mean + half),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTestResult {
    pub t: f64,
    pub df: u64,
    pub p: f64,
}

/// Two-sided paired t-test on equal-length samples. Zero-variance
/// differences degenerate to t = 0, p = 1 (all zero) or p = 0 (constant
/// nonzero shift).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTestResult, Error> {
    if a.len() != b.len() {
        return Err(Error::data(format!(
            "paired t-test: length mismatch ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::data("paired t-test requires at least 2 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let (mean, sd) = mean_sd(&d);
    let df = d.len() as u64 - 1;
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            PairedTestResult { t: 0.0, df, p: 1.0 }
        } else {
            PairedTestResult { t: f64::INFINITY * mean.signum(), df, p: 0.0 }
        });
    }
    let t = mean / (sd / n.sqrt());
    Ok(PairedTestResult { t, df, p: t_two_sided_p(t, df) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnovaRow {
    pub name: String,
    pub df: u64,
    pub ss: f64,
    pub ms: f64,
    pub f: f64,
    pub p: f64,
}

/// ANOVA decomposition of a balanced full factorial: one row per main effect
/// and per two-way interaction; three-way and higher interactions are pooled
/// into the error term.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaTable {
    pub effects: Vec<AnovaRow>,
    pub error_df: u64,
    pub error_ss: f64,
    pub error_ms: f64,
    pub total_df: u64,
    pub total_ss: f64,
    pub adjusted_r_squared: f64,
}

impl AnovaTable {
    pub fn model_df(&self) -> u64 {
        self.effects.iter().map(|e| e.df).sum()
    }

    pub fn model_ss(&self) -> f64 {
        self.effects.iter().map(|e| e.ss).sum()
    }

    pub fn effect(&self, name: &str) -> Option<&AnovaRow> {
        self.effects.iter().find(|e| e.name == name)
    }
}

/// Balanced full-factorial ANOVA from cell and marginal means.
///
/// `levels_per_factor` gives the number of levels of each factor,
/// `assignments[i]` the level of each factor for observation `i`, and `y`
/// the responses. Every cell must hold the same number (>= 2) of
/// observations.
pub fn factorial_anova(
    names: &[&str],
    levels_per_factor: &[usize],
    assignments: &[Vec<usize>],
    y: &[f64],
) -> Result<AnovaTable, Error> {
    let k = levels_per_factor.len();
    if k == 0 || names.len() != k {
        return Err(Error::data("factorial ANOVA: factor names/levels mismatch"));
    }
    if assignments.len() != y.len() || y.is_empty() {
        return Err(Error::data("factorial ANOVA: assignments/responses mismatch"));
    }
    let n_cells: usize = levels_per_factor.iter().product();
    let cell_of = |obs: &[usize]| -> Result<usize, Error> {
        let mut idx = 0;
        for (f, &l) in obs.iter().enumerate() {
            if l >= levels_per_factor[f] {
                return Err(Error::data("factorial ANOVA: level out of range"));
            }
            idx = idx * levels_per_factor[f] + l;
        }
        Ok(idx)
    };

    let mut cell_count = vec![0usize; n_cells];
    let mut cell_sum = vec![0.0f64; n_cells];
    for (obs, &v) in assignments.iter().zip(y) {
        if obs.len() != k {
            return Err(Error::data("factorial ANOVA: observation with wrong factor count"));
        }
        let c = cell_of(obs)?;
        cell_count[c] += 1;
        cell_sum[c] += v;
    }
    let r = cell_count[0];
    if r < 2 || cell_count.iter().any(|&c| c != r) {
        return Err(Error::data(
            "factorial ANOVA requires a balanced design with >= 2 replicates per cell",
        ));
    }

    let n = y.len() as f64;
    let grand = y.iter().sum::<f64>() / n;
    let total_ss: f64 = y.iter().map(|v| (v - grand) * (v - grand)).sum();
    let total_df = y.len() as u64 - 1;

    // Marginal means per factor level.
    let mut marg: Vec<Vec<f64>> = levels_per_factor.iter().map(|&l| vec![0.0; l]).collect();
    let mut marg_n: Vec<Vec<f64>> = levels_per_factor.iter().map(|&l| vec![0.0; l]).collect();
    // Pair means per ordered factor pair (f, g), f < g.
    let mut pair_mean: Vec<Vec<f64>> = Vec::new();
    let mut pair_n: Vec<Vec<f64>> = Vec::new();
    let mut pair_index = Vec::new();
    for f in 0..k {
        for g in (f + 1)..k {
            pair_index.push((f, g));
            pair_mean.push(vec![0.0; levels_per_factor[f] * levels_per_factor[g]]);
            pair_n.push(vec![0.0; levels_per_factor[f] * levels_per_factor[g]]);
        }
    }
    for (obs, &v) in assignments.iter().zip(y) {
        for f in 0..k {
            marg[f][obs[f]] += v;
            marg_n[f][obs[f]] += 1.0;
        }
        for (pi, &(f, g)) in pair_index.iter().enumerate() {
            let idx = obs[f] * levels_per_factor[g] + obs[g];
            pair_mean[pi][idx] += v;
            pair_n[pi][idx] += 1.0;
        }
    }
    for f in 0..k {
        for l in 0..levels_per_factor[f] {
            marg[f][l] /= marg_n[f][l];
        }
    }
    for (pi, means) in pair_mean.iter_mut().enumerate() {
        for (m, cnt) in means.iter_mut().zip(&pair_n[pi]) {
            *m /= cnt;
        }
    }

    let mut effects = Vec::new();
    for f in 0..k {
        let ss: f64 = (0..levels_per_factor[f])
            .map(|l| marg_n[f][l] * (marg[f][l] - grand) * (marg[f][l] - grand))
            .sum();
        effects.push((names[f].to_string(), (levels_per_factor[f] - 1) as u64, ss));
    }
    for (pi, &(f, g)) in pair_index.iter().enumerate() {
        let mut ss = 0.0;
        for lf in 0..levels_per_factor[f] {
            for lg in 0..levels_per_factor[g] {
                let idx = lf * levels_per_factor[g] + lg;
                let dev = pair_mean[pi][idx] - marg[f][lf] - marg[g][lg] + grand;
                ss += pair_n[pi][idx] * dev * dev;
            }
        }
        let df = (levels_per_factor[f] - 1) as u64 * (levels_per_factor[g] - 1) as u64;
        effects.push((format!("{}:{}", names[f], names[g]), df, ss));
    }

    let model_df: u64 = effects.iter().map(|(_, df, _)| df).sum();
    let model_ss: f64 = effects.iter().map(|(_, _, ss)| ss).sum();
    let error_df = total_df - model_df;
    let error_ss = (total_ss - model_ss).max(0.0);
    let error_ms = error_ss / error_df as f64;

    let rows: Vec<AnovaRow> = effects
        .into_iter()
        .map(|(name, df, ss)| {
            let ms = ss / df as f64;
            let f = if error_ms > 0.0 { ms / error_ms } else { f64::INFINITY };
            let p = if f.is_finite() {
                f_sf(f, df, error_df).expect("valid F arguments")
            } else {
                0.0
            };
            AnovaRow { name, df, ss, ms, f, p }
        })
        .collect();

    let adjusted_r_squared =
        1.0 - (error_ss / error_df as f64) / (total_ss / total_df as f64);

    Ok(AnovaTable {
        effects: rows,
        error_df,
        error_ss,
        error_ms,
        total_df,
        total_ss,
        adjusted_r_squared,
    })
}
