//! Replication campaigns and the full-factorial experimental design.
//!
//! Replicates are independent simulated days; replicate `i` of every
//! configuration shares the same population stream (common random numbers),
//! so paired comparisons between configurations reflect the configuration
//! change rather than sampling noise. Days run in parallel and results are
//! merged by replicate index, so the output never depends on scheduling.

use rayon::prelude::*;

use crate::clinic::{run_day, SeedTriple};
use crate::error::Error;
use crate::kpi::{day_kpis, expected_kpi, percent_deviation, DayKpi};
use crate::scenario::{apply_factor_levels, FactorLevels, Scenario};
use crate::stats::{
    factorial_anova, paired_t_test, summarize, AnovaTable, PairedTestResult, SampleSummary,
};

/// All replicates of one configuration, with per-KPI summaries.
#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub label: String,
    pub omega: usize,
    pub kpis: Vec<DayKpi>,
    pub mean_flowtime: SampleSummary,
    pub mean_waiting: SampleSummary,
    pub efficiency: SampleSummary,
}

impl ReplicationResult {
    /// Rebuilds the summaries from raw per-replicate KPIs.
    pub fn from_kpis(label: String, kpis: Vec<DayKpi>) -> Result<Self, Error> {
        let f: Vec<f64> = kpis.iter().map(|k| k.mean_flowtime).collect();
        let w: Vec<f64> = kpis.iter().map(|k| k.mean_waiting).collect();
        let e: Vec<f64> = kpis.iter().map(|k| k.efficiency).collect();
        Ok(ReplicationResult {
            label,
            omega: kpis.len(),
            mean_flowtime: summarize(&f)?,
            mean_waiting: summarize(&w)?,
            efficiency: summarize(&e)?,
            kpis,
        })
    }

    pub fn expected_mean_flowtime(&self) -> f64 {
        self.mean_flowtime.mean
    }
}

/// Runs `omega` replicates of one scenario. Replicate `i` uses the stream
/// triple `(base_seed, config_index, i)`; the result is independent of
/// execution order.
pub fn run_replications(
    s: &Scenario,
    omega: usize,
    base_seed: u64,
    config_index: u64,
) -> Result<ReplicationResult, Error> {
    if omega < 1 {
        return Err(Error::data("at least one replicate is required"));
    }
    let kpis: Vec<DayKpi> = (0..omega as u64)
        .into_par_iter()
        .map(|rep| {
            let seed = SeedTriple { base_seed, config_index, replicate_index: rep };
            day_kpis(&run_day(s, seed)?)
        })
        .collect::<Result<_, _>>()?;
    if omega == 1 {
        // Summaries need n >= 2; a single replicate still yields its KPIs.
        let k = kpis[0];
        let point = |v: f64| SampleSummary { n: 1, mean: v, sd: 0.0, ci95: (v, v) };
        return Ok(ReplicationResult {
            label: format!("config {config_index}"),
            omega,
            mean_flowtime: point(k.mean_flowtime),
            mean_waiting: point(k.mean_waiting),
            efficiency: point(k.efficiency),
            kpis,
        });
    }
    ReplicationResult::from_kpis(format!("config {config_index}"), kpis)
}

/// One configuration's row in the campaign table.
#[derive(Debug, Clone)]
pub struct DoeRow {
    pub levels: FactorLevels,
    /// One-based configuration number (campaign ordering).
    pub number: usize,
    pub mean_flowtime_values: Vec<f64>,
    pub expected_mean_flowtime: f64,
    pub ci95: (f64, f64),
    /// 1 = lowest expected mean flowtime.
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct Marginal {
    pub factor: &'static str,
    pub level: String,
    pub mean_expected_flowtime: f64,
}

#[derive(Debug, Clone)]
pub struct DoeResult {
    pub rows: Vec<DoeRow>,
    pub marginals: Vec<Marginal>,
    pub omega: usize,
}

/// Runs the full factorial campaign: all 36 level combinations of the base
/// scenario, `omega` replicates each, common random numbers across
/// configurations.
pub fn run_doe(base: &Scenario, omega: usize, base_seed: u64) -> Result<DoeResult, Error> {
    if omega < 2 {
        return Err(Error::data("the campaign needs at least 2 replicates per configuration"));
    }
    let all = FactorLevels::all();
    let per_config: Vec<Vec<f64>> = all
        .par_iter()
        .map(|levels| {
            let s = apply_factor_levels(base, *levels);
            let r = run_replications(&s, omega, base_seed, levels.index() as u64)?;
            Ok(r.kpis.iter().map(|k| k.mean_flowtime).collect())
        })
        .collect::<Result<_, Error>>()?;

    let mut rows: Vec<DoeRow> = all
        .iter()
        .zip(per_config)
        .map(|(levels, values)| {
            let summary = summarize(&values)?;
            Ok(DoeRow {
                levels: *levels,
                number: levels.number(),
                expected_mean_flowtime: summary.mean,
                ci95: summary.ci95,
                mean_flowtime_values: values,
                rank: 0,
            })
        })
        .collect::<Result<_, Error>>()?;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        rows[i]
            .expected_mean_flowtime
            .total_cmp(&rows[j].expected_mean_flowtime)
            .then(rows[i].number.cmp(&rows[j].number))
    });
    for (rank, idx) in order.iter().enumerate() {
        rows[*idx].rank = rank + 1;
    }

    let marginals = compute_marginals(&rows);
    Ok(DoeResult { rows, marginals, omega })
}

fn compute_marginals(rows: &[DoeRow]) -> Vec<Marginal> {
    let mut out = Vec::new();
    let mut push = |factor: &'static str, level: String, selected: Vec<&DoeRow>| {
        let mean = selected.iter().map(|r| r.expected_mean_flowtime).sum::<f64>()
            / selected.len() as f64;
        out.push(Marginal { factor, level, mean_expected_flowtime: mean });
    };
    for level in ["A", "B"] {
        let sel = rows.iter().filter(|r| r.levels.alpha.to_string() == level).collect();
        push("alpha", level.to_string(), sel);
    }
    for level in ["A", "B", "C"] {
        let sel = rows.iter().filter(|r| r.levels.beta.to_string() == level).collect();
        push("beta", level.to_string(), sel);
    }
    for level in ["A", "B", "C"] {
        let sel = rows.iter().filter(|r| r.levels.gamma.to_string() == level).collect();
        push("gamma", level.to_string(), sel);
    }
    for level in ["A", "B"] {
        let sel = rows.iter().filter(|r| r.levels.delta.to_string() == level).collect();
        push("delta", level.to_string(), sel);
    }
    out
}

impl DoeResult {
    pub fn row(&self, levels: FactorLevels) -> &DoeRow {
        &self.rows[levels.index()]
    }

    pub fn marginal(&self, factor: &str, level: &str) -> Option<f64> {
        self.marginals
            .iter()
            .find(|m| m.factor == factor && m.level == level)
            .map(|m| m.mean_expected_flowtime)
    }

    /// Rows sorted ascending by expected mean flowtime, ties by
    /// configuration number.
    pub fn ranked(&self) -> Vec<&DoeRow> {
        let mut sorted: Vec<&DoeRow> = self.rows.iter().collect();
        sorted.sort_by_key(|r| r.rank);
        sorted
    }
}

/// Sorts campaign rows ascending by expected mean flowtime (ties by
/// configuration number).
pub fn rank_configurations(d: &DoeResult) -> Vec<&DoeRow> {
    d.ranked()
}

/// ANOVA over the raw per-replicate mean flowtimes of a campaign: main
/// effects and two-way interactions of the four factors.
pub fn anova_on_doe(d: &DoeResult) -> Result<AnovaTable, Error> {
    let mut assignments = Vec::new();
    let mut y = Vec::new();
    for row in &d.rows {
        let levels = vec![
            row.levels.alpha as usize,
            row.levels.beta as usize,
            row.levels.gamma as usize,
            row.levels.delta as usize,
        ];
        for v in &row.mean_flowtime_values {
            assignments.push(levels.clone());
            y.push(*v);
        }
    }
    factorial_anova(
        &["alpha", "beta", "gamma", "delta"],
        &[2, 3, 3, 2],
        &assignments,
        &y,
    )
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub kpi: &'static str,
    pub a: SampleSummary,
    pub b: SampleSummary,
    /// Percentage deviation of `a`'s expected value, with `b` as reference.
    pub deviation_pct: f64,
    pub test: PairedTestResult,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub a_label: String,
    pub b_label: String,
    pub rows: Vec<ComparisonRow>,
}

/// Compares two replication results KPI by KPI, pairing replicates by index
/// (common random numbers).
pub fn compare_scenarios(
    a: &ReplicationResult,
    b: &ReplicationResult,
) -> Result<ComparisonReport, Error> {
    if a.omega != b.omega {
        return Err(Error::data(format!(
            "replicate count mismatch: {} vs {}",
            a.omega, b.omega
        )));
    }
    let extract: [(&'static str, fn(&DayKpi) -> f64); 3] = [
        ("F_bar", |k| k.mean_flowtime),
        ("WT_bar", |k| k.mean_waiting),
        ("Eff", |k| k.efficiency),
    ];
    let mut rows = Vec::new();
    for (name, f) in extract {
        let xa: Vec<f64> = a.kpis.iter().map(|k| f(k)).collect();
        let xb: Vec<f64> = b.kpis.iter().map(|k| f(k)).collect();
        rows.push(ComparisonRow {
            kpi: name,
            a: summarize(&xa)?,
            b: summarize(&xb)?,
            deviation_pct: percent_deviation(expected_kpi(&xa)?, expected_kpi(&xb)?)?,
            test: paired_t_test(&xa, &xb)?,
        });
    }
    Ok(ComparisonReport {
        a_label: a.label.clone(),
        b_label: b.label.clone(),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub kpi: &'static str,
    pub real: SampleSummary,
    pub sim: SampleSummary,
    pub deviation_pct: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub observed_days: usize,
}

/// Historical-data validation: observed per-day KPIs against the simulated
/// expectation. Day `i` is paired with replicate `i` for the t-test.
pub fn validation_report(
    real_days: &[DayKpi],
    sim: &ReplicationResult,
) -> Result<ValidationReport, Error> {
    if real_days.is_empty() {
        return Err(Error::data("no observed days provided"));
    }
    if sim.omega < real_days.len() {
        return Err(Error::data(format!(
            "need at least {} replicates to pair with the observed days, got {}",
            real_days.len(),
            sim.omega
        )));
    }
    let extract: [(&'static str, fn(&DayKpi) -> f64); 3] = [
        ("F_bar", |k| k.mean_flowtime),
        ("WT_bar", |k| k.mean_waiting),
        ("Eff", |k| k.efficiency),
    ];
    let mut rows = Vec::new();
    for (name, f) in extract {
        let real: Vec<f64> = real_days.iter().map(|k| f(k)).collect();
        let sim_all: Vec<f64> = sim.kpis.iter().map(|k| f(k)).collect();
        let sim_paired = &sim_all[..real.len()];
        rows.push(ValidationRow {
            kpi: name,
            real: summarize(&real)?,
            sim: summarize(&sim_all)?,
            deviation_pct: percent_deviation(expected_kpi(&sim_all)?, expected_kpi(&real)?)?,
            p_value: paired_t_test(sim_paired, &real)?.p,
        });
    }
    Ok(ValidationReport { rows, observed_days: real_days.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::status_quo_scenario;

    #[test]
    fn single_replicate_expectation_is_the_day_itself() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 1, 42, 0).unwrap();
        assert_eq!(r.omega, 1);
        assert_eq!(r.expected_mean_flowtime(), r.kpis[0].mean_flowtime);
    }

    #[test]
    fn expectation_is_the_mean_of_replicates() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 3, 42, 0).unwrap();
        let mean = r.kpis.iter().map(|k| k.mean_flowtime).sum::<f64>() / 3.0;
        assert!((r.expected_mean_flowtime() - mean).abs() < 1e-12);
    }

    #[test]
    fn parallel_runs_are_reproducible() {
        let s = status_quo_scenario();
        let a = run_replications(&s, 40, 7, 3).unwrap();
        let serial: Vec<DayKpi> = (0..40u64)
            .map(|rep| {
                let seed = SeedTriple { base_seed: 7, config_index: 3, replicate_index: rep };
                day_kpis(&run_day(&s, seed).unwrap()).unwrap()
            })
            .collect();
        assert_eq!(
            serde_json::to_string(&a.kpis).unwrap(),
            serde_json::to_string(&serial).unwrap()
        );
    }

    #[test]
    fn doe_has_36_rows_and_recomputable_expectations() {
        let base = status_quo_scenario();
        let d = run_doe(&base, 3, 11).unwrap();
        assert_eq!(d.rows.len(), 36);
        for row in &d.rows {
            let e = expected_kpi(&row.mean_flowtime_values).unwrap();
            assert!((e - row.expected_mean_flowtime).abs() < 1e-9);
        }
        let ranks: Vec<usize> = {
            let mut r: Vec<usize> = d.rows.iter().map(|x| x.rank).collect();
            r.sort();
            r
        };
        assert_eq!(ranks, (1..=36).collect::<Vec<_>>());
        // The status-quo row really runs the unmodified base scenario.
        let sq = d.row(FactorLevels::status_quo());
        let direct = run_replications(&base, 3, 11, FactorLevels::status_quo().index() as u64)
            .unwrap();
        assert!((sq.expected_mean_flowtime - direct.expected_mean_flowtime()).abs() < 1e-9);
    }

    #[test]
    fn ranking_is_stable_and_ascending() {
        let base = status_quo_scenario();
        let d = run_doe(&base, 2, 5).unwrap();
        let ranked = rank_configurations(&d);
        for w in ranked.windows(2) {
            assert!(
                w[0].expected_mean_flowtime <= w[1].expected_mean_flowtime
                    || (w[0].expected_mean_flowtime == w[1].expected_mean_flowtime
                        && w[0].number < w[1].number)
            );
        }
    }

    #[test]
    fn self_comparison_is_null() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 10, 42, 0).unwrap();
        let c = compare_scenarios(&r, &r).unwrap();
        for row in &c.rows {
            assert_eq!(row.deviation_pct, 0.0);
            assert_eq!(row.test.p, 1.0);
        }
        let other = run_replications(&s, 11, 42, 0).unwrap();
        assert!(compare_scenarios(&r, &other).is_err());
    }

    #[test]
    fn validation_of_identical_data_is_null() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 15, 42, 0).unwrap();
        let report = validation_report(&r.kpis, &r).unwrap();
        for row in &report.rows {
            assert_eq!(row.deviation_pct, 0.0);
            assert_eq!(row.p_value, 1.0);
        }
    }
}
