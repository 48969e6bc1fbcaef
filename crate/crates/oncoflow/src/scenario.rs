//! Scenario data model: the full parameterization of one department
//! configuration, its JSON form, the status-quo defaults, and the mapping
//! from experimental factor levels onto scenario fields.
//!
//! JSON documents may specify any subset of fields; missing fields take the
//! status-quo values, so `{}` loads the department as observed. All times
//! are seconds (durations) or `"HH:MM:SS"` (clock times); probabilities are
//! decimals in `[0, 1]`; distribution parameters for durations are minutes.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::stochastics::{ArrivalWindow, DistributionSpec};

/// Wall-clock time of day, serialized as `"HH:MM:SS"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockTime(pub u64);

impl Serialize for ClockTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (h, m, sec) = (self.0 / 3600, self.0 % 3600 / 60, self.0 % 60);
        s.serialize_str(&format!("{h:02}:{m:02}:{sec:02}"))
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(serde::de::Error::custom("expected HH:MM:SS"));
        }
        let nums: Result<Vec<u64>, _> = parts.iter().map(|p| p.parse()).collect();
        let nums = nums.map_err(|_| serde::de::Error::custom("expected HH:MM:SS"))?;
        if nums[1] > 59 || nums[2] > 59 {
            return Err(serde::de::Error::custom("minutes/seconds out of range"));
        }
        Ok(ClockTime(nums[0] * 3600 + nums[1] * 60 + nums[2]))
    }
}

/// Courier batch-size policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchPolicy {
    Fixed { k: u32 },
    Variable { a: u32, b: u32 },
}

/// One therapy-preparation or treatment typology: its occurrence probability
/// and the duration distribution (minutes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDuration {
    pub probability: f64,
    pub duration: DistributionSpec,
}

/// Patient class mix `(standard, repetitive, control)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub standard: f64,
    pub repetitive: f64,
    pub control: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub day_open: ClockTime,
    pub oncologists: u32,
    pub chairs: u32,
    pub treatment_nurses: u32,
    pub reception_nurses: u32,
    pub pharmacy_technicians: u32,
    pub couriers: u32,
    /// Patients one nurse may monitor simultaneously.
    pub n_max: u32,
    /// Seconds.
    pub registration_duration: u64,
    /// Seconds a nurse is tied up preparing a patient at treatment start,
    /// consumed from the front of the treatment time.
    pub setup_duration: u64,
    pub patient_count: DistributionSpec,
    pub class_mix: ClassMix,
    pub arrival_windows: Vec<ArrivalWindow>,
    /// Minutes.
    pub consult_duration: DistributionSpec,
    pub prep_classes: Vec<WeightedDuration>,
    pub treatment_classes: Vec<WeightedDuration>,
    pub batch_policy: BatchPolicy,
    /// One-way courier travel, seconds.
    pub delivery_base: u64,
    /// Probability of a traffic delay, applied independently per leg.
    pub delay_probability: f64,
    /// Extra travel time when delayed, minutes.
    pub delay_extra: DistributionSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        status_quo_scenario()
    }
}

/// The five observed arrival windows, as offsets from an 08:00 day open.
pub fn table2_arrival_windows() -> Vec<ArrivalWindow> {
    let w = |start: u64, p: f64| ArrivalWindow {
        start_offset: start,
        end_offset: start + 3600,
        probability: p,
    };
    vec![
        w(1800, 0.5658),  // 08:30-09:30
        w(5460, 0.1254),  // 09:31-10:30
        w(9060, 0.0581),  // 10:31-11:30
        w(12660, 0.1376), // 11:31-12:30
        w(16260, 0.1131), // 12:31-13:30
    ]
}

/// The department as observed: 3 oncologists, 13 chairs, 3 treatment nurses,
/// 1 reception nurse, 1 pharmacy technician, 1 courier, variable batches.
pub fn status_quo_scenario() -> Scenario {
    let u = |a: f64, b: f64| DistributionSpec::UniformReal { a, b };
    Scenario {
        day_open: ClockTime(8 * 3600),
        oncologists: 3,
        chairs: 13,
        treatment_nurses: 3,
        reception_nurses: 1,
        pharmacy_technicians: 1,
        couriers: 1,
        n_max: 4,
        registration_duration: 60,
        setup_duration: 600,
        patient_count: DistributionSpec::Normal { mu: 28.07, sigma: 3.94 },
        class_mix: ClassMix {
            standard: 0.7150,
            repetitive: 0.0618,
            control: 0.2232,
        },
        arrival_windows: table2_arrival_windows(),
        consult_duration: u(5.0, 35.0),
        prep_classes: vec![
            WeightedDuration { probability: 0.7138, duration: u(1.0, 5.0) },
            WeightedDuration { probability: 0.2034, duration: u(6.0, 10.0) },
            WeightedDuration { probability: 0.0828, duration: u(11.0, 27.0) },
        ],
        treatment_classes: vec![
            WeightedDuration { probability: 0.3013, duration: u(15.0, 60.0) },
            WeightedDuration { probability: 0.3891, duration: u(61.0, 120.0) },
            WeightedDuration { probability: 0.1423, duration: u(121.0, 180.0) },
            WeightedDuration { probability: 0.1213, duration: u(181.0, 240.0) },
            WeightedDuration { probability: 0.0460, duration: u(241.0, 300.0) },
        ],
        batch_policy: BatchPolicy::Variable { a: 2, b: 12 },
        delivery_base: 600,
        delay_probability: 0.2653,
        delay_extra: u(2.0, 10.0),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("oncologists", self.oncologists),
            ("chairs", self.chairs),
            ("treatment_nurses", self.treatment_nurses),
            ("reception_nurses", self.reception_nurses),
            ("pharmacy_technicians", self.pharmacy_technicians),
            ("couriers", self.couriers),
            ("n_max", self.n_max),
        ];
        for (name, v) in positive {
            if v < 1 {
                return Err(Error::validation(name, "must be >= 1"));
            }
        }
        self.patient_count.validate()?;
        if !matches!(self.patient_count, DistributionSpec::Normal { .. }) {
            return Err(Error::validation("patient_count", "must be a normal distribution"));
        }
        let mix_sum = self.class_mix.standard + self.class_mix.repetitive + self.class_mix.control;
        if (mix_sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "class_mix",
                format!("probabilities must sum to 1 (got {mix_sum})"),
            ));
        }
        if [self.class_mix.standard, self.class_mix.repetitive, self.class_mix.control]
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::validation("class_mix", "probabilities must lie in [0, 1]"));
        }
        ArrivalWindow::validate(&self.arrival_windows)?;
        self.consult_duration.validate()?;
        for (field, classes) in [
            ("prep_classes", &self.prep_classes),
            ("treatment_classes", &self.treatment_classes),
        ] {
            if classes.is_empty() {
                return Err(Error::validation(field, "must be non-empty"));
            }
            let total: f64 = classes.iter().map(|c| c.probability).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::validation(
                    field,
                    format!("probabilities must sum to 1 (got {total})"),
                ));
            }
            for c in classes {
                c.duration.validate()?;
            }
        }
        match self.batch_policy {
            BatchPolicy::Fixed { k } => {
                if k < 1 {
                    return Err(Error::validation("batch_policy", "fixed size must be >= 1"));
                }
            }
            BatchPolicy::Variable { a, b } => {
                if a < 1 || b < a {
                    return Err(Error::validation("batch_policy", "requires 1 <= a <= b"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.delay_probability) {
            return Err(Error::validation("delay_probability", "must lie in [0, 1]"));
        }
        self.delay_extra.validate()?;
        Ok(())
    }
}

/// Parses a scenario from JSON; unspecified fields take status-quo defaults.
pub fn load_scenario(text: &str) -> Result<Scenario, Error> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    s.validate()?;
    Ok(s)
}

pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serialization cannot fail")
}

/// A two-valued factor level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level2 {
    A,
    B,
}

/// A three-valued factor level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level3 {
    A,
    B,
    C,
}

impl std::fmt::Display for Level2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level2::A => "A",
            Level2::B => "B",
        })
    }
}

impl std::fmt::Display for Level3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level3::A => "A",
            Level3::B => "B",
            Level3::C => "C",
        })
    }
}

/// One cell of the experimental design: levels for the couriers (alpha),
/// batch-size (beta), appointment-distribution (gamma) and daily-patients
/// (delta) factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorLevels {
    pub alpha: Level2,
    pub beta: Level3,
    pub gamma: Level3,
    pub delta: Level2,
}

impl std::fmt::Display for FactorLevels {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-{}-{}", self.alpha, self.beta, self.gamma, self.delta)
    }
}

impl std::str::FromStr for FactorLevels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let letters: Vec<char> = s.chars().filter(|c| *c != '-').collect();
        if letters.len() != 4 {
            return Err(Error::Parse(format!(
                "expected four factor levels like B-A-B-A, got `{s}`"
            )));
        }
        let two = |c: char, name: &str| match c {
            'A' | 'a' => Ok(Level2::A),
            'B' | 'b' => Ok(Level2::B),
            _ => Err(Error::Parse(format!("factor {name} admits levels A and B, got `{c}`"))),
        };
        let three = |c: char, name: &str| match c {
            'A' | 'a' => Ok(Level3::A),
            'B' | 'b' => Ok(Level3::B),
            'C' | 'c' => Ok(Level3::C),
            _ => Err(Error::Parse(format!("factor {name} admits levels A, B and C, got `{c}`"))),
        };
        Ok(FactorLevels {
            alpha: two(letters[0], "alpha")?,
            beta: three(letters[1], "beta")?,
            gamma: three(letters[2], "gamma")?,
            delta: two(letters[3], "delta")?,
        })
    }
}

impl FactorLevels {
    /// The status-quo configuration {A-C-C-A}.
    pub fn status_quo() -> Self {
        FactorLevels {
            alpha: Level2::A,
            beta: Level3::C,
            gamma: Level3::C,
            delta: Level2::A,
        }
    }

    /// All 36 level combinations, lexicographic over (alpha, beta, gamma,
    /// delta) with delta varying fastest. The position in this sequence is
    /// the configuration index; position + 1 matches the configuration
    /// numbers used in the campaign reports.
    pub fn all() -> Vec<FactorLevels> {
        let mut out = Vec::with_capacity(36);
        for alpha in [Level2::A, Level2::B] {
            for beta in [Level3::A, Level3::B, Level3::C] {
                for gamma in [Level3::A, Level3::B, Level3::C] {
                    for delta in [Level2::A, Level2::B] {
                        out.push(FactorLevels { alpha, beta, gamma, delta });
                    }
                }
            }
        }
        out
    }

    /// Rank of this combination within [`FactorLevels::all`].
    pub fn index(&self) -> usize {
        let a = self.alpha as usize;
        let b = self.beta as usize;
        let g = self.gamma as usize;
        let d = self.delta as usize;
        ((a * 3 + b) * 3 + g) * 2 + d
    }

    /// One-based configuration number as used in the campaign reports.
    pub fn number(&self) -> usize {
        self.index() + 1
    }
}

/// Applies the four factor levels onto a base scenario. Only the courier
/// count, batch policy, arrival windows and patient-count mean change; all
/// other fields are preserved.
pub fn apply_factor_levels(base: &Scenario, levels: FactorLevels) -> Scenario {
    let mut s = base.clone();
    s.couriers = match levels.alpha {
        Level2::A => 1,
        Level2::B => 2,
    };
    s.batch_policy = match levels.beta {
        Level3::A => BatchPolicy::Fixed { k: 3 },
        Level3::B => BatchPolicy::Fixed { k: 6 },
        Level3::C => BatchPolicy::Variable { a: 2, b: 12 },
    };
    s.arrival_windows = match levels.gamma {
        Level3::A => equal_windows(3, 90),
        Level3::B => equal_windows(5, 60),
        Level3::C => table2_arrival_windows(),
    };
    // Delta level A keeps the observed mean (28.07) so that {A-C-C-A} is the
    // status quo exactly; level B raises the mean to 31. The standard
    // deviation stays at 3.94 in both cases.
    s.patient_count = DistributionSpec::Normal {
        mu: match levels.delta {
            Level2::A => 28.07,
            Level2::B => 31.0,
        },
        sigma: 3.94,
    };
    s
}

/// `count` contiguous windows of `minutes` each, starting at 08:30, with
/// equal occurrence probability.
fn equal_windows(count: u64, minutes: u64) -> Vec<ArrivalWindow> {
    (0..count)
        .map(|i| ArrivalWindow {
            start_offset: 1800 + i * minutes * 60,
            end_offset: 1800 + (i + 1) * minutes * 60,
            probability: 1.0 / count as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_quo_matches_observed_department() {
        let s = status_quo_scenario();
        assert_eq!(s.chairs, 13);
        assert_eq!(s.oncologists, 3);
        assert_eq!(s.treatment_nurses, 3);
        assert_eq!(s.reception_nurses, 1);
        assert_eq!(s.pharmacy_technicians, 1);
        assert_eq!(s.couriers, 1);
        assert_eq!(s.n_max, 4);
        assert_eq!(s.delay_probability, 0.2653);
        assert_eq!(s.batch_policy, BatchPolicy::Variable { a: 2, b: 12 });
        s.validate().unwrap();
    }

    #[test]
    fn empty_document_loads_defaults() {
        let s = load_scenario("{}").unwrap();
        assert_eq!(s, status_quo_scenario());
    }

    #[test]
    fn zero_chairs_is_rejected_by_name() {
        let err = load_scenario(r#"{"chairs": 0}"#).unwrap_err();
        assert!(err.to_string().contains("chairs"), "{err}");
    }

    #[test]
    fn single_field_override() {
        let s = load_scenario(r#"{"batch_policy": {"kind": "fixed", "k": 3}}"#).unwrap();
        assert_eq!(s.batch_policy, BatchPolicy::Fixed { k: 3 });
        let mut expected = status_quo_scenario();
        expected.batch_policy = BatchPolicy::Fixed { k: 3 };
        assert_eq!(s, expected);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = load_scenario("{ not json").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("column"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(load_scenario(r#"{"charis": 12}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let mut s = status_quo_scenario();
        s.couriers = 2;
        s.batch_policy = BatchPolicy::Fixed { k: 6 };
        let text = serialize_scenario(&s);
        assert_eq!(load_scenario(&text).unwrap(), s);
    }

    #[test]
    fn status_quo_levels_reproduce_status_quo() {
        let base = status_quo_scenario();
        let applied = apply_factor_levels(&base, FactorLevels::status_quo());
        assert_eq!(applied, base);
    }

    #[test]
    fn best_configuration_levels() {
        let base = status_quo_scenario();
        let levels: FactorLevels = "B-A-B-A".parse().unwrap();
        let s = apply_factor_levels(&base, levels);
        assert_eq!(s.couriers, 2);
        assert_eq!(s.batch_policy, BatchPolicy::Fixed { k: 3 });
        assert_eq!(s.arrival_windows.len(), 5);
        assert_eq!(s.arrival_windows[0].end_offset - s.arrival_windows[0].start_offset, 3600);
        assert!(matches!(s.patient_count, DistributionSpec::Normal { mu, .. } if mu == 28.07));
    }

    #[test]
    fn level_aab_b_layout() {
        let base = status_quo_scenario();
        let s = apply_factor_levels(&base, "A-A-A-B".parse().unwrap());
        assert_eq!(s.couriers, 1);
        assert_eq!(s.batch_policy, BatchPolicy::Fixed { k: 3 });
        assert_eq!(s.arrival_windows.len(), 3);
        assert_eq!(s.arrival_windows[1].start_offset, 1800 + 90 * 60);
        assert!(matches!(s.patient_count, DistributionSpec::Normal { mu, .. } if mu == 31.0));
    }

    #[test]
    fn apply_touches_only_governed_fields() {
        let base = status_quo_scenario();
        for levels in FactorLevels::all() {
            let s = apply_factor_levels(&base, levels);
            let mut reverted = s.clone();
            reverted.couriers = base.couriers;
            reverted.batch_policy = base.batch_policy.clone();
            reverted.arrival_windows = base.arrival_windows.clone();
            reverted.patient_count = base.patient_count.clone();
            assert_eq!(reverted, base, "levels {levels}");
        }
    }

    #[test]
    fn all_36_configurations_distinct_and_contain_status_quo() {
        let base = status_quo_scenario();
        let all = FactorLevels::all();
        assert_eq!(all.len(), 36);
        let scenarios: Vec<Scenario> =
            all.iter().map(|l| apply_factor_levels(&base, *l)).collect();
        for i in 0..scenarios.len() {
            for j in (i + 1)..scenarios.len() {
                assert_ne!(scenarios[i], scenarios[j], "{} vs {}", all[i], all[j]);
            }
        }
        let matching: Vec<usize> = scenarios
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == base)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(matching.len(), 1);
        assert_eq!(all[matching[0]], FactorLevels::status_quo());
        // Paper numbering: status quo is configuration 17, best is 21.
        assert_eq!(FactorLevels::status_quo().number(), 17);
        assert_eq!("B-A-B-A".parse::<FactorLevels>().unwrap().number(), 21);
        for (i, l) in all.iter().enumerate() {
            assert_eq!(l.index(), i);
        }
    }
}
