//! CSV serialization of simulation results: per-replicate KPIs, campaign
//! tables, ANOVA tables, scenario comparisons, validation reports, patient
//! traces — and parsing of observed per-day KPI files.
//!
//! Numeric formatting is fixed-point (two decimals for minutes and percents,
//! six for test statistics), so identical inputs produce byte-identical
//! files.

use std::io::Write as _;

use crate::clinic::DayResult;
use crate::error::Error;
use crate::experiments::{ComparisonReport, DoeResult, ReplicationResult, ValidationReport};
use crate::kpi::DayKpi;
use crate::stats::AnovaTable;

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_stat(v: f64) -> String {
    if v.is_infinite() {
        (if v > 0.0 { "inf" } else { "-inf" }).to_string()
    } else {
        format!("{v:.6}")
    }
}

fn fmt_p(p: f64) -> String {
    // Small p-values still need to be distinguishable from zero.
    if p > 0.0 && p < 1e-6 {
        format!("{p:.3e}")
    } else {
        format!("{p:.6}")
    }
}

fn write_rows(path: &str, rows: &[Vec<String>]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per replicate: patient count and the day's KPIs.
pub fn write_replication_csv(path: &str, r: &ReplicationResult) -> Result<(), Error> {
    let mut rows = vec![vec![
        "replicate".to_string(),
        "patients".to_string(),
        "F_min".to_string(),
        "F_bar_min".to_string(),
        "WT_bar_min".to_string(),
        "Eff_pct".to_string(),
    ]];
    for (i, k) in r.kpis.iter().enumerate() {
        rows.push(vec![
            i.to_string(),
            k.patients.to_string(),
            fmt2(k.flowtime),
            fmt2(k.mean_flowtime),
            fmt2(k.mean_waiting),
            fmt2(k.efficiency),
        ]);
    }
    write_rows(path, &rows)
}

/// The campaign table: one row per configuration in campaign order.
pub fn write_doe_csv(path: &str, d: &DoeResult) -> Result<(), Error> {
    let mut rows = vec![vec![
        "config".to_string(),
        "alpha".to_string(),
        "beta".to_string(),
        "gamma".to_string(),
        "delta".to_string(),
        "E_F_bar_min".to_string(),
        "ci_low_min".to_string(),
        "ci_high_min".to_string(),
        "rank".to_string(),
    ]];
    for row in &d.rows {
        rows.push(vec![
            row.number.to_string(),
            row.levels.alpha.to_string(),
            row.levels.beta.to_string(),
            row.levels.gamma.to_string(),
            row.levels.delta.to_string(),
            fmt2(row.expected_mean_flowtime),
            fmt2(row.ci95.0),
            fmt2(row.ci95.1),
            row.rank.to_string(),
        ]);
    }
    write_rows(path, &rows)
}

/// Factor-level marginal means of the expected mean flowtime.
pub fn write_marginals_csv(path: &str, d: &DoeResult) -> Result<(), Error> {
    let mut rows = vec![vec![
        "factor".to_string(),
        "level".to_string(),
        "mean_E_F_bar_min".to_string(),
    ]];
    for m in &d.marginals {
        rows.push(vec![
            m.factor.to_string(),
            m.level.clone(),
            fmt2(m.mean_expected_flowtime),
        ]);
    }
    write_rows(path, &rows)
}

/// The ANOVA table, with error and total rows and the adjusted R².
pub fn write_anova_csv(path: &str, t: &AnovaTable) -> Result<(), Error> {
    let mut rows = vec![vec![
        "source".to_string(),
        "df".to_string(),
        "SS".to_string(),
        "MS".to_string(),
        "F".to_string(),
        "p".to_string(),
    ]];
    for e in &t.effects {
        rows.push(vec![
            e.name.clone(),
            e.df.to_string(),
            fmt_stat(e.ss),
            fmt_stat(e.ms),
            fmt_stat(e.f),
            fmt_p(e.p),
        ]);
    }
    rows.push(vec![
        "error".to_string(),
        t.error_df.to_string(),
        fmt_stat(t.error_ss),
        fmt_stat(t.error_ms),
        String::new(),
        String::new(),
    ]);
    rows.push(vec![
        "total".to_string(),
        t.total_df.to_string(),
        fmt_stat(t.total_ss),
        String::new(),
        String::new(),
        String::new(),
    ]);
    rows.push(vec![
        "adjusted_R2".to_string(),
        String::new(),
        fmt_stat(t.adjusted_r_squared),
        String::new(),
        String::new(),
        String::new(),
    ]);
    write_rows(path, &rows)
}

/// KPI-by-KPI comparison of two scenarios, with the paired test.
pub fn write_comparison_csv(path: &str, c: &ComparisonReport) -> Result<(), Error> {
    let mut rows = vec![vec![
        "kpi".to_string(),
        "a_mean".to_string(),
        "a_ci_low".to_string(),
        "a_ci_high".to_string(),
        "b_mean".to_string(),
        "b_ci_low".to_string(),
        "b_ci_high".to_string(),
        "dev_pct".to_string(),
        "t".to_string(),
        "p".to_string(),
    ]];
    for r in &c.rows {
        rows.push(vec![
            r.kpi.to_string(),
            fmt2(r.a.mean),
            fmt2(r.a.ci95.0),
            fmt2(r.a.ci95.1),
            fmt2(r.b.mean),
            fmt2(r.b.ci95.0),
            fmt2(r.b.ci95.1),
            fmt2(r.deviation_pct),
            fmt_stat(r.test.t),
            fmt_p(r.test.p),
        ]);
    }
    write_rows(path, &rows)
}

/// Observed-vs-simulated KPI table.
pub fn write_validation_csv(path: &str, v: &ValidationReport) -> Result<(), Error> {
    let mut rows = vec![vec![
        "kpi".to_string(),
        "real_mean".to_string(),
        "real_ci_low".to_string(),
        "real_ci_high".to_string(),
        "sim_mean".to_string(),
        "sim_ci_low".to_string(),
        "sim_ci_high".to_string(),
        "dev_pct".to_string(),
        "p".to_string(),
    ]];
    for r in &v.rows {
        rows.push(vec![
            r.kpi.to_string(),
            fmt2(r.real.mean),
            fmt2(r.real.ci95.0),
            fmt2(r.real.ci95.1),
            fmt2(r.sim.mean),
            fmt2(r.sim.ci95.0),
            fmt2(r.sim.ci95.1),
            fmt2(r.deviation_pct),
            fmt_p(r.p_value),
        ]);
    }
    write_rows(path, &rows)
}

/// Per-patient timestamp trace of one simulated day, in seconds from day
/// open; absent stages are empty cells.
pub fn write_trace_csv(path: &str, day: &DayResult) -> Result<(), Error> {
    let opt = |v: Option<u64>| v.map(|t| t.to_string()).unwrap_or_default();
    let mut rows = vec![vec![
        "id".to_string(),
        "class".to_string(),
        "arrival".to_string(),
        "registration_start".to_string(),
        "registration_end".to_string(),
        "consult_start".to_string(),
        "consult_end".to_string(),
        "request_sent".to_string(),
        "prep_start".to_string(),
        "prep_end".to_string(),
        "delivered".to_string(),
        "treatment_start".to_string(),
        "treatment_end".to_string(),
    ]];
    for p in &day.patients {
        let r = &p.record;
        rows.push(vec![
            p.id.to_string(),
            p.class.code().to_string(),
            r.arrival.to_string(),
            opt(r.registration_start),
            opt(r.registration_end),
            opt(r.consult_start),
            opt(r.consult_end),
            opt(r.request_sent),
            opt(r.prep_start),
            opt(r.prep_end),
            opt(r.delivered),
            opt(r.treatment_start),
            opt(r.treatment_end),
        ]);
    }
    write_rows(path, &rows)
}

/// Parses observed per-day KPIs: `day,F_bar_min,WT_bar_min,Eff_pct`, one
/// row per historical day. The total flowtime and patient count are not part
/// of the observed data and are set to zero.
pub fn read_real_days_csv(path: &str) -> Result<Vec<DayKpi>, Error> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let expect = ["day", "F_bar_min", "WT_bar_min", "Eff_pct"];
    let idx: Vec<usize> = expect
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}` in {path}")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<f64, Error> {
            record
                .get(idx[i])
                .ok_or_else(|| Error::Parse(format!("short row {} in {path}", line + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|_| {
                    Error::Parse(format!(
                        "row {} in {path}: `{}` is not a number",
                        line + 2,
                        record.get(idx[i]).unwrap_or("")
                    ))
                })
        };
        out.push(DayKpi {
            patients: 0,
            flowtime: 0.0,
            mean_flowtime: field(1)?,
            mean_waiting: field(2)?,
            efficiency: field(3)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("{path} contains no data rows")));
    }
    Ok(out)
}

/// Parses a per-replicate KPI file previously written by
/// [`write_replication_csv`], for offline comparison of two runs.
pub fn read_replication_csv(path: &str) -> Result<ReplicationResult, Error> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let expect = ["patients", "F_min", "F_bar_min", "WT_bar_min", "Eff_pct"];
    let idx: Vec<usize> = expect
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}` in {path}")))
        })
        .collect::<Result<_, _>>()?;
    let mut kpis = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<f64, Error> {
            record
                .get(idx[i])
                .ok_or_else(|| Error::Parse(format!("short row in {path}")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("non-numeric value in {path}")))
        };
        kpis.push(DayKpi {
            patients: field(0)? as u32,
            flowtime: field(1)?,
            mean_flowtime: field(2)?,
            mean_waiting: field(3)?,
            efficiency: field(4)?,
        });
    }
    if kpis.len() < 2 {
        return Err(Error::Parse(format!("{path} holds fewer than 2 replicates")));
    }
    ReplicationResult::from_kpis(path.to_string(), kpis)
}

/// Writes arbitrary text (used for scenario echoes next to result files).
pub fn write_text(path: &str, text: &str) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clinic::{run_day, SeedTriple};
    use crate::experiments::run_replications;
    use crate::scenario::status_quo_scenario;

    fn tmp(name: &str) -> String {
        let dir = tempfile::tempdir().unwrap();
        // Leak the dir so the file survives the test body.
        let path = dir.path().join(name).to_string_lossy().into_owned();
        std::mem::forget(dir);
        path
    }

    #[test]
    fn replication_csv_round_numbers() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 3, 1, 0).unwrap();
        let path = tmp("rep.csv");
        write_replication_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "replicate,patients,F_min,F_bar_min,WT_bar_min,Eff_pct");
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn real_days_round_trip() {
        let path = tmp("real.csv");
        std::fs::write(
            &path,
            "day,F_bar_min,WT_bar_min,Eff_pct\n1,265.46,138.28,47.91\n2,250.00,120.00,52.00\n",
        )
        .unwrap();
        let days = read_real_days_csv(&path).unwrap();
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].mean_flowtime, 265.46);
        assert_eq!(days[1].efficiency, 52.00);
    }

    #[test]
    fn real_days_rejects_bad_input() {
        let path = tmp("bad.csv");
        std::fs::write(&path, "day,F_bar_min\n1,100\n").unwrap();
        let err = read_real_days_csv(&path).unwrap_err();
        assert!(err.to_string().contains("WT_bar_min"), "{err}");
        let path2 = tmp("bad2.csv");
        std::fs::write(&path2, "day,F_bar_min,WT_bar_min,Eff_pct\n1,abc,1,1\n").unwrap();
        assert!(read_real_days_csv(&path2).is_err());
        let path3 = tmp("empty.csv");
        std::fs::write(&path3, "day,F_bar_min,WT_bar_min,Eff_pct\n").unwrap();
        assert!(read_real_days_csv(&path3).is_err());
    }

    #[test]
    fn trace_csv_has_one_row_per_patient() {
        let s = status_quo_scenario();
        let day = run_day(
            &s,
            SeedTriple { base_seed: 4, config_index: 0, replicate_index: 0 },
        )
        .unwrap();
        let path = tmp("trace.csv");
        write_trace_csv(&path, &day).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), day.patients.len() + 1);
        assert!(text.lines().nth(0).unwrap().starts_with("id,class,arrival"));
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let s = status_quo_scenario();
        let r = run_replications(&s, 4, 9, 2).unwrap();
        let (p1, p2) = (tmp("a.csv"), tmp("b.csv"));
        write_replication_csv(&p1, &r).unwrap();
        write_replication_csv(&p2, &r).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
