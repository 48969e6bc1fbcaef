//! Patient- and day-level key performance indicators.
//!
//! Length of stay runs from arrival to the final discharge event (treatment
//! end, or consultation end for control patients). Waiting time is the stay
//! minus the value-added service time (registration + consultation +
//! treatment), so therapy preparation and courier delivery count as waiting.
//! Day-level flowtime statistics aggregate the patients whose pathway ends
//! with a treatment; consultation-only visits are excluded from the means.
//! Everything is computed in seconds and reported in minutes.

use serde::{Deserialize, Serialize};

use crate::clinic::{DayResult, PatientRecord};
use crate::error::Error;

/// One day's KPIs, in minutes (efficiency in percent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayKpi {
    /// Treated patients entering the day's means.
    pub patients: u32,
    /// Total flowtime: sum of lengths of stay.
    pub flowtime: f64,
    pub mean_flowtime: f64,
    pub mean_waiting: f64,
    pub efficiency: f64,
}

/// Length of stay and waiting time of one patient, in minutes.
pub fn patient_kpis(r: &PatientRecord) -> Result<(f64, f64), Error> {
    let last_end = match (r.treatment_end, r.consult_end) {
        (Some(t), _) => t,
        (None, Some(c)) => c,
        (None, None) => {
            return Err(Error::data("patient record has neither treatment nor consultation end"))
        }
    };
    let span = |a: Option<u64>, b: Option<u64>, name: &str| -> Result<u64, Error> {
        match (a, b) {
            (Some(a), Some(b)) => Ok(b - a),
            (None, None) => Ok(0),
            _ => Err(Error::data(format!("patient record has a half-open {name} stage"))),
        }
    };
    let value_added = span(r.registration_start, r.registration_end, "registration")?
        + span(r.consult_start, r.consult_end, "consultation")?
        + span(r.treatment_start, r.treatment_end, "treatment")?;
    let stay = last_end - r.arrival;
    let los = stay as f64 / 60.0;
    let waiting = (stay - value_added.min(stay)) as f64 / 60.0;
    Ok((los, waiting))
}

/// Aggregates one day's patient traces into the flowtime KPIs. Only
/// patients whose stay ends with a chemotherapy treatment enter the means:
/// the flowtime measures the full registration-to-treatment pathway, and
/// consultation-only visits would dilute it (their value-added share also
/// does not match the treated pathway's).
pub fn day_kpis(d: &DayResult) -> Result<DayKpi, Error> {
    let mut flowtime = 0.0;
    let mut waiting_total = 0.0;
    let mut n = 0u32;
    for p in &d.patients {
        if p.record.treatment_end.is_none() {
            continue;
        }
        let (los, waiting) = patient_kpis(&p.record)?;
        flowtime += los;
        waiting_total += waiting;
        n += 1;
    }
    if n == 0 {
        return Err(Error::data("day with no treated patients"));
    }
    let mean_flowtime = flowtime / n as f64;
    let mean_waiting = waiting_total / n as f64;
    Ok(DayKpi {
        patients: n,
        flowtime,
        mean_flowtime,
        mean_waiting,
        efficiency: efficiency(mean_flowtime, mean_waiting),
    })
}

/// `Eff = (F̄ − W̄T) / F̄ · 100`.
pub fn efficiency(mean_flowtime: f64, mean_waiting: f64) -> f64 {
    (mean_flowtime - mean_waiting) / mean_flowtime * 100.0
}

/// Expected value of a KPI across replicates: the arithmetic mean.
pub fn expected_kpi(values: &[f64]) -> Result<f64, Error> {
    if values.is_empty() {
        return Err(Error::data("expected value of an empty KPI sequence"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Absolute percentage deviation of a simulated KPI from a reference value.
pub fn percent_deviation(sim: f64, reference: f64) -> Result<f64, Error> {
    if reference == 0.0 {
        return Err(Error::data("percentage deviation against a zero reference"));
    }
    Ok(((sim - reference) / reference * 100.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(scale: u64) -> PatientRecord {
        // The hand-computed single-patient day, optionally time-scaled.
        PatientRecord {
            arrival: 1800 * scale,
            registration_start: Some(1800 * scale),
            registration_end: Some(1860 * scale),
            consult_start: Some(1860 * scale),
            consult_end: Some(3060 * scale),
            request_sent: Some(3060 * scale),
            prep_start: Some(3060 * scale),
            prep_end: Some(3360 * scale),
            delivered: Some(3960 * scale),
            treatment_start: Some(3960 * scale),
            treatment_end: Some(7560 * scale),
        }
    }

    #[test]
    fn hand_trace_kpis() {
        let (los, waiting) = patient_kpis(&trace(1)).unwrap();
        assert_eq!(los, 96.0);
        assert_eq!(waiting, 15.0);
    }

    #[test]
    fn doubling_the_trace_doubles_stay_but_not_efficiency() {
        let (los1, w1) = patient_kpis(&trace(1)).unwrap();
        let (los2, w2) = patient_kpis(&trace(2)).unwrap();
        assert_eq!(los2, 2.0 * los1);
        assert_eq!(w2, 2.0 * w1);
        assert_eq!(efficiency(los1, w1), efficiency(los2, w2));
    }

    #[test]
    fn zero_wait_patient() {
        // Prep 0, delivery 0, batch 1: treatment starts at consult end.
        let r = PatientRecord {
            arrival: 0,
            registration_start: Some(0),
            registration_end: Some(60),
            consult_start: Some(60),
            consult_end: Some(660),
            request_sent: Some(660),
            prep_start: Some(660),
            prep_end: Some(660),
            delivered: Some(660),
            treatment_start: Some(660),
            treatment_end: Some(4260),
        };
        let (_, waiting) = patient_kpis(&r).unwrap();
        assert_eq!(waiting, 0.0);
    }

    #[test]
    fn control_patient_without_queues_waits_zero() {
        let r = PatientRecord {
            arrival: 1000,
            registration_start: Some(1000),
            registration_end: Some(1060),
            consult_start: Some(1060),
            consult_end: Some(2260),
            ..Default::default()
        };
        let (los, waiting) = patient_kpis(&r).unwrap();
        assert_eq!(los, 21.0);
        assert_eq!(waiting, 0.0);
    }

    #[test]
    fn missing_mandatory_timestamp_is_an_error() {
        let mut r = trace(1);
        r.treatment_start = None;
        assert!(patient_kpis(&r).is_err());
        assert!(patient_kpis(&PatientRecord::default()).is_err());
    }

    #[test]
    fn efficiency_identity_on_reported_inputs() {
        // Validated department: F̄ 265.46, W̄T 138.28 gives 47.91%.
        let eff = efficiency(265.46, 138.28);
        assert!((eff - 47.91).abs() < 0.005, "{eff}");
        assert_eq!(efficiency(100.0, 0.0), 100.0);
        let eff = efficiency(96.0, 15.0);
        assert_eq!(eff, 84.375);
    }

    #[test]
    fn expected_kpi_examples() {
        assert_eq!(expected_kpi(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(expected_kpi(&[7.5]).unwrap(), 7.5);
        assert!(expected_kpi(&[]).is_err());
    }

    #[test]
    fn percent_deviation_examples() {
        assert!((percent_deviation(259.50, 265.46).unwrap() - 2.25).abs() < 0.005);
        assert!((percent_deviation(133.99, 138.28).unwrap() - 3.10).abs() < 0.005);
        assert_eq!(percent_deviation(4.2, 4.2).unwrap(), 0.0);
        assert!(percent_deviation(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn expected_kpi_is_permutation_invariant(mut xs in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let before = expected_kpi(&xs).unwrap();
            xs.reverse();
            let after = expected_kpi(&xs).unwrap();
            prop_assert!((before - after).abs() < 1e-6);
        }
    }
}
