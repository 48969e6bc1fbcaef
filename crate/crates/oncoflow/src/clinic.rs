//! The day-hospital state machine: patients flow through registration,
//! medical consultation, therapy preparation at the detached pharmacy,
//! batched courier delivery and chair-based treatment under nurse
//! monitoring. One run simulates a single working day, opening at 08:00 and
//! ending when the last treatment (or consultation) concludes.
//!
//! Resource semantics:
//! - the reception nurse registers patients FIFO by arrival;
//! - each consulting patient is assigned to one oncologist at creation
//!   (uniformly at random) and waits in that oncologist's own FIFO queue,
//!   ordered by registration time;
//! - standard patients' therapy requests leave at consultation end,
//!   repetitive patients' at registration end;
//! - pharmacy technicians prepare requests FIFO, one at a time;
//! - a courier departs once enough therapies are ready to fill the current
//!   batch target, clamped to the number of therapies still to be carried,
//!   so a day never deadlocks on a partial last batch;
//! - every therapy patient is likewise assigned a specific chair and a
//!   specific monitoring nurse at creation. Delivered therapies form a
//!   single line ordered by delivery time; patients whose chair is still
//!   occupied let the line move past them, and the first patient whose
//!   chair is free is seated next — the line halts behind them while they
//!   wait for their nurse's setup slot and monitoring headroom (`n_max`).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::{EventKind, EventQueue};
use crate::error::Error;
use crate::scenario::{BatchPolicy, Scenario, WeightedDuration};
use crate::stochastics::{
    categorical_index, sample, sample_arrival, sample_patient_count, DistributionSpec,
    RandomSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PatientClass {
    /// "OC": consultation, therapy and treatment.
    Standard,
    /// "C": skips the consultation, therapy ordered at registration.
    Repetitive,
    /// "O": consultation only, no therapy.
    Control,
}

impl PatientClass {
    pub fn code(&self) -> &'static str {
        match self {
            PatientClass::Standard => "OC",
            PatientClass::Repetitive => "C",
            PatientClass::Control => "O",
        }
    }
}

/// Per-patient timestamp trace, all in seconds from day open. Fields are
/// absent exactly when the class skips that stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PatientRecord {
    pub arrival: u64,
    pub registration_start: Option<u64>,
    pub registration_end: Option<u64>,
    pub consult_start: Option<u64>,
    pub consult_end: Option<u64>,
    pub request_sent: Option<u64>,
    pub prep_start: Option<u64>,
    pub prep_end: Option<u64>,
    pub delivered: Option<u64>,
    pub treatment_start: Option<u64>,
    pub treatment_end: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatientSummary {
    pub id: u32,
    pub class: PatientClass,
    pub oncologist: Option<u32>,
    pub nurse: Option<u32>,
    pub chair: Option<u32>,
    pub record: PatientRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub standard: u32,
    pub repetitive: u32,
    pub control: u32,
}

/// The outcome of one simulated day.
#[derive(Debug, Clone, Serialize)]
pub struct DayResult {
    pub patients: Vec<PatientSummary>,
    pub day_end: u64,
    pub event_count: u64,
    pub counts: ClassCounts,
}

/// Identifies one replicate of one configuration under a campaign seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTriple {
    pub base_seed: u64,
    pub config_index: u64,
    pub replicate_index: u64,
}

#[derive(Debug, Clone)]
pub struct NurseState {
    pub id: u32,
    pub setup_busy_until: Option<u64>,
    pub monitoring: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Courier {
    at_pharmacy: bool,
    carrying: Vec<u32>,
}

#[derive(Debug, Clone)]
struct PatientData {
    class: PatientClass,
    oncologist: Option<u32>,
    consult_len: Option<u64>,
    prep_len: Option<u64>,
    treat_len: Option<u64>,
    nurse: Option<u32>,
    chair: Option<u32>,
    record: PatientRecord,
}

/// FIFO queue keyed by (ready time, patient id).
pub type OncologistQueue = BTreeSet<(u64, u32)>;

/// Head of one oncologist's queue: earliest registration end, ties by
/// lowest patient id.
pub fn select_next_for_oncologist(queue: &OncologistQueue) -> Option<u32> {
    queue.iter().next().map(|&(_, id)| id)
}

/// Among nurses with a free setup slot at `now` and monitoring headroom,
/// the least loaded one, ties by lowest id.
pub fn select_treatment_nurse(nurses: &[NurseState], now: u64, n_max: u32) -> Option<u32> {
    nurses
        .iter()
        .filter(|n| n.setup_busy_until.map_or(true, |u| u <= now))
        .filter(|n| (n.monitoring.len() as u32) < n_max)
        .min_by_key(|n| (n.monitoring.len(), n.id))
        .map(|n| n.id)
}

/// Batch size for the next courier trip: the policy's draw clamped to the
/// number of therapies still outstanding.
pub fn next_batch_target(policy: &BatchPolicy, outstanding: u32, src: &mut RandomSource) -> u32 {
    debug_assert!(outstanding >= 1);
    let raw = match policy {
        BatchPolicy::Fixed { k } => *k,
        BatchPolicy::Variable { a, b } => {
            let spec = DistributionSpec::UniformInt { a: *a as i64, b: *b as i64 };
            sample(&spec, src).expect("validated batch bounds") as u32
        }
    };
    raw.min(outstanding)
}

fn minutes_to_secs(minutes: f64) -> u64 {
    (minutes * 60.0).round().max(0.0) as u64
}

fn sample_weighted(classes: &[WeightedDuration], src: &mut RandomSource) -> Result<u64, Error> {
    let weights: Vec<f64> = classes.iter().map(|c| c.probability).collect();
    let idx = categorical_index(&weights, src);
    Ok(minutes_to_secs(sample(&classes[idx].duration, src)?))
}

pub struct DayState<'a> {
    s: &'a Scenario,
    queue: EventQueue,
    dynamics: RandomSource,
    patients: Vec<PatientData>,
    counts: ClassCounts,
    reception_waiting: BTreeSet<(u64, u32)>,
    reception_busy: u32,
    onc_busy: Vec<bool>,
    onc_queues: Vec<OncologistQueue>,
    request_list: BTreeSet<(u64, u32)>,
    techs_busy: u32,
    ready_list: Vec<u32>,
    raw_batch_target: Option<u32>,
    picked_up: u32,
    total_therapies: u32,
    couriers: Vec<Courier>,
    treatment_ready: BTreeSet<(u64, u32)>,
    chairs_busy: Vec<bool>,
    nurses: Vec<NurseState>,
    day_end: u64,
}

/// Samples the patient population for one day and schedules every arrival.
/// All stage durations are drawn up-front from the population stream; the
/// dynamics stream feeds only in-day draws (batch sizes, courier delays).
pub fn init_day<'a>(
    s: &'a Scenario,
    population: &mut RandomSource,
    dynamics: RandomSource,
) -> Result<DayState<'a>, Error> {
    s.validate()?;
    let (mu, sigma) = match s.patient_count {
        DistributionSpec::Normal { mu, sigma } => (mu, sigma),
        _ => unreachable!("validated: patient_count is normal"),
    };
    let p = sample_patient_count(mu, sigma, population);

    let mix = [s.class_mix.standard, s.class_mix.repetitive, s.class_mix.control];
    let mut patients = Vec::with_capacity(p as usize);
    let mut counts = ClassCounts { standard: 0, repetitive: 0, control: 0 };
    let mut total_therapies = 0;
    let mut queue = EventQueue::new();
    for id in 0..p {
        // A fixed draw layout per patient: every field is sampled for every
        // class and unused ones are discarded, which keeps replicate streams
        // aligned across configurations.
        let class = match categorical_index(&mix, population) {
            0 => PatientClass::Standard,
            1 => PatientClass::Repetitive,
            _ => PatientClass::Control,
        };
        let arrival = sample_arrival(&s.arrival_windows, population);
        let oncologist = (population.next_f64() * s.oncologists as f64) as u32;
        let oncologist = oncologist.min(s.oncologists - 1);
        let nurse = (population.next_f64() * s.treatment_nurses as f64) as u32;
        let nurse = nurse.min(s.treatment_nurses - 1);
        let chair = (population.next_f64() * s.chairs as f64) as u32;
        let chair = chair.min(s.chairs - 1);
        let consult_len = minutes_to_secs(sample(&s.consult_duration, population)?);
        let prep_len = sample_weighted(&s.prep_classes, population)?;
        let treat_len = sample_weighted(&s.treatment_classes, population)?;
        let (oncologist, consult_len, prep_len, treat_len, nurse, chair) = match class {
            PatientClass::Standard => {
                counts.standard += 1;
                total_therapies += 1;
                (
                    Some(oncologist),
                    Some(consult_len),
                    Some(prep_len),
                    Some(treat_len),
                    Some(nurse),
                    Some(chair),
                )
            }
            PatientClass::Repetitive => {
                counts.repetitive += 1;
                total_therapies += 1;
                (None, None, Some(prep_len), Some(treat_len), Some(nurse), Some(chair))
            }
            PatientClass::Control => {
                counts.control += 1;
                (Some(oncologist), Some(consult_len), None, None, None, None)
            }
        };
        patients.push(PatientData {
            class,
            oncologist,
            consult_len,
            prep_len,
            treat_len,
            nurse,
            chair,
            record: PatientRecord { arrival, ..Default::default() },
        });
        queue.schedule(arrival, EventKind::Arrival, id)?;
    }

    Ok(DayState {
        queue,
        dynamics,
        patients,
        counts,
        reception_waiting: BTreeSet::new(),
        reception_busy: 0,
        onc_busy: vec![false; s.oncologists as usize],
        onc_queues: vec![BTreeSet::new(); s.oncologists as usize],
        request_list: BTreeSet::new(),
        techs_busy: 0,
        ready_list: Vec::new(),
        raw_batch_target: None,
        picked_up: 0,
        total_therapies,
        couriers: (0..s.couriers)
            .map(|_| Courier { at_pharmacy: true, carrying: Vec::new() })
            .collect(),
        treatment_ready: BTreeSet::new(),
        chairs_busy: vec![false; s.chairs as usize],
        nurses: (0..s.treatment_nurses)
            .map(|id| NurseState { id, setup_busy_until: None, monitoring: Vec::new() })
            .collect(),
        day_end: 0,
        s,
    })
}

impl<'a> DayState<'a> {
    pub fn nurses(&self) -> &[NurseState] {
        &self.nurses
    }

    /// Therapies requested (or still to be requested today) and not yet
    /// picked up by a courier.
    fn outstanding(&self) -> u32 {
        self.total_therapies - self.picked_up
    }

    /// One travel leg: base duration plus an occasional traffic delay,
    /// applied independently per direction.
    fn travel_leg(&mut self) -> Result<u64, Error> {
        let mut leg = self.s.delivery_base;
        if self.dynamics.next_f64() < self.s.delay_probability {
            leg += minutes_to_secs(sample(&self.s.delay_extra, &mut self.dynamics)?);
        }
        Ok(leg)
    }

    fn try_reception(&mut self, now: u64) -> Result<(), Error> {
        while self.reception_busy < self.s.reception_nurses {
            let Some(&key) = self.reception_waiting.iter().next() else { break };
            self.reception_waiting.remove(&key);
            let id = key.1;
            self.reception_busy += 1;
            self.patients[id as usize].record.registration_start = Some(now);
            self.queue.schedule(
                now + self.s.registration_duration,
                EventKind::RegistrationDone,
                id,
            )?;
        }
        Ok(())
    }

    /// Calls the next patient from one oncologist's own FIFO queue when
    /// that oncologist is free.
    fn try_consult(&mut self, onc: usize, now: u64) -> Result<(), Error> {
        if self.onc_busy[onc] {
            return Ok(());
        }
        let Some(id) = select_next_for_oncologist(&self.onc_queues[onc]) else {
            return Ok(());
        };
        let key = *self.onc_queues[onc].iter().next().expect("non-empty");
        self.onc_queues[onc].remove(&key);
        self.onc_busy[onc] = true;
        self.queue.schedule(now, EventKind::ConsultStart, id)?;
        Ok(())
    }

    fn try_prep(&mut self, now: u64) -> Result<(), Error> {
        while self.techs_busy < self.s.pharmacy_technicians {
            let Some(&key) = self.request_list.iter().next() else { break };
            self.request_list.remove(&key);
            self.techs_busy += 1;
            self.queue.schedule(now, EventKind::PrepStart, key.1)?;
        }
        Ok(())
    }

    fn try_dispatch(&mut self, now: u64) -> Result<(), Error> {
        loop {
            let outstanding = self.outstanding();
            if outstanding == 0 {
                return Ok(());
            }
            let raw = match self.raw_batch_target {
                Some(t) => t,
                None => {
                    let t = match &self.s.batch_policy {
                        BatchPolicy::Fixed { k } => *k,
                        BatchPolicy::Variable { a, b } => {
                            let spec =
                                DistributionSpec::UniformInt { a: *a as i64, b: *b as i64 };
                            sample(&spec, &mut self.dynamics)? as u32
                        }
                    };
                    self.raw_batch_target = Some(t);
                    t
                }
            };
            // The end-of-day completion rule: the target never exceeds what
            // is left to carry.
            let target = raw.min(outstanding);
            if (self.ready_list.len() as u32) < target {
                return Ok(());
            }
            let Some(c) = self.couriers.iter().position(|c| c.at_pharmacy) else {
                return Ok(());
            };
            let batch: Vec<u32> = self.ready_list.drain(..target as usize).collect();
            self.picked_up += target;
            self.couriers[c].at_pharmacy = false;
            self.couriers[c].carrying = batch;
            self.raw_batch_target = None;
            self.queue.schedule(now, EventKind::BatchDispatch, c as u32)?;
        }
    }

    /// Seats delivered patients. The line is ordered by delivery time;
    /// patients whose assigned chair is still occupied let the line move
    /// past them, and the first patient whose chair is free is seated
    /// next: the line halts behind them while they wait for their assigned
    /// nurse's setup slot and monitoring headroom.
    fn try_treatment(&mut self, now: u64) -> Result<(), Error> {
        let keys: Vec<(u64, u32)> = self.treatment_ready.iter().copied().collect();
        for key in keys {
            let id = key.1;
            let c = self.patients[id as usize]
                .chair
                .ok_or_else(|| Error::Internal(format!("patient {id} has no chair")))?
                as usize;
            if self.chairs_busy[c] {
                continue;
            }
            let n = self.patients[id as usize]
                .nurse
                .ok_or_else(|| Error::Internal(format!("patient {id} has no nurse")))?
                as usize;
            let nurse_free = self.nurses[n].setup_busy_until.map_or(true, |u| u <= now)
                && (self.nurses[n].monitoring.len() as u32) < self.s.n_max;
            if !nurse_free {
                break;
            }
            self.treatment_ready.remove(&key);
            let treat_len = self.patients[id as usize]
                .treat_len
                .ok_or_else(|| Error::Internal(format!("patient {id} has no treatment")))?;
            self.chairs_busy[c] = true;
            self.nurses[n].monitoring.push(id);
            self.nurses[n].setup_busy_until =
                Some(now + self.s.setup_duration.min(treat_len));
            self.queue.schedule(now, EventKind::TreatmentStart, id)?;
        }
        Ok(())
    }

    /// Pops one event and applies its transition. Returns `false` when the
    /// queue is empty, i.e. the day is over.
    pub fn step(&mut self) -> Result<bool, Error> {
        let Some(e) = self.queue.pop_next() else {
            return Ok(false);
        };
        let now = e.time;
        self.day_end = self.day_end.max(now);
        let id = e.subject;
        match e.kind {
            EventKind::Arrival => {
                self.reception_waiting.insert((now, id));
                self.try_reception(now)?;
            }
            EventKind::RegistrationDone => {
                self.patients[id as usize].record.registration_end = Some(now);
                self.reception_busy -= 1;
                match self.patients[id as usize].class {
                    PatientClass::Standard | PatientClass::Control => {
                        let onc = self.patients[id as usize]
                            .oncologist
                            .ok_or_else(|| Error::Internal("unassigned oncologist".into()))?
                            as usize;
                        self.onc_queues[onc].insert((now, id));
                        self.try_consult(onc, now)?;
                    }
                    PatientClass::Repetitive => {
                        self.patients[id as usize].record.request_sent = Some(now);
                        self.request_list.insert((now, id));
                        self.try_prep(now)?;
                    }
                }
                self.try_reception(now)?;
            }
            EventKind::ConsultStart => {
                self.patients[id as usize].record.consult_start = Some(now);
                let len = self.patients[id as usize]
                    .consult_len
                    .ok_or_else(|| Error::Internal("consult without duration".into()))?;
                self.queue.schedule(now + len, EventKind::ConsultEnd, id)?;
            }
            EventKind::ConsultEnd => {
                self.patients[id as usize].record.consult_end = Some(now);
                let onc = self.patients[id as usize].oncologist.expect("consulting patient");
                self.onc_busy[onc as usize] = false;
                if self.patients[id as usize].class == PatientClass::Standard {
                    self.patients[id as usize].record.request_sent = Some(now);
                    self.request_list.insert((now, id));
                    self.try_prep(now)?;
                }
                self.try_consult(onc as usize, now)?;
            }
            EventKind::PrepStart => {
                self.patients[id as usize].record.prep_start = Some(now);
                let len = self.patients[id as usize]
                    .prep_len
                    .ok_or_else(|| Error::Internal("prep without duration".into()))?;
                self.queue.schedule(now + len, EventKind::PrepDone, id)?;
            }
            EventKind::PrepDone => {
                self.patients[id as usize].record.prep_end = Some(now);
                self.techs_busy -= 1;
                self.ready_list.push(id);
                self.try_prep(now)?;
                self.try_dispatch(now)?;
            }
            EventKind::BatchDispatch => {
                let leg = self.travel_leg()?;
                self.queue.schedule(now + leg, EventKind::DeliveryArrive, id)?;
            }
            EventKind::DeliveryArrive => {
                let carried = std::mem::take(&mut self.couriers[id as usize].carrying);
                for pid in carried {
                    self.patients[pid as usize].record.delivered = Some(now);
                    self.treatment_ready.insert((now, pid));
                }
                let leg = self.travel_leg()?;
                self.queue.schedule(now + leg, EventKind::CourierReturn, id)?;
                self.try_treatment(now)?;
            }
            EventKind::CourierReturn => {
                self.couriers[id as usize].at_pharmacy = true;
                self.try_dispatch(now)?;
            }
            EventKind::TreatmentStart => {
                self.patients[id as usize].record.treatment_start = Some(now);
                let len = self.patients[id as usize].treat_len.expect("treated patient");
                self.queue.schedule(now + len, EventKind::TreatmentEnd, id)?;
                let nurse = self.patients[id as usize].nurse.expect("assigned nurse");
                let setup_end = self.nurses[nurse as usize]
                    .setup_busy_until
                    .expect("setup reserved at selection");
                self.queue.schedule(setup_end, EventKind::SetupComplete, nurse)?;
            }
            EventKind::TreatmentEnd => {
                self.patients[id as usize].record.treatment_end = Some(now);
                let chair = self.patients[id as usize].chair.expect("seated patient");
                self.chairs_busy[chair as usize] = false;
                let nurse = self.patients[id as usize].nurse.expect("assigned nurse");
                self.nurses[nurse as usize].monitoring.retain(|&p| p != id);
                self.try_treatment(now)?;
            }
            EventKind::SetupComplete => {
                if self.nurses[id as usize].setup_busy_until == Some(now) {
                    self.nurses[id as usize].setup_busy_until = None;
                }
                self.try_treatment(now)?;
            }
        }
        Ok(true)
    }

    pub fn finish(self) -> DayResult {
        DayResult {
            patients: self
                .patients
                .into_iter()
                .enumerate()
                .map(|(id, p)| PatientSummary {
                    id: id as u32,
                    class: p.class,
                    oncologist: p.oncologist,
                    nurse: p.nurse,
                    chair: p.chair,
                    record: p.record,
                })
                .collect(),
            day_end: self.day_end,
            event_count: self.queue.popped_count(),
            counts: self.counts,
        }
    }
}

/// Simulates one working day. A pure function of the scenario and the seed
/// triple.
pub fn run_day(s: &Scenario, seed: SeedTriple) -> Result<DayResult, Error> {
    let mut population = RandomSource::population_stream(seed.base_seed, seed.replicate_index);
    let dynamics =
        RandomSource::make_stream(seed.base_seed, seed.config_index, seed.replicate_index);
    let mut state = init_day(s, &mut population, dynamics)?;
    while state.step()? {}
    Ok(state.finish())
}

/// Post-hoc audit of one day against the model invariants: capacity bounds,
/// timestamp monotonicity, FIFO orders, therapy conservation and day
/// completion. Independent of the in-simulation bookkeeping.
pub fn check_day_invariants(s: &Scenario, r: &DayResult) -> Result<(), String> {
    let c = &r.counts;
    if c.standard + c.repetitive + c.control != r.patients.len() as u32 {
        return Err("class counts do not sum to the patient count".into());
    }

    let mut registrations = Vec::new();
    let mut preps = Vec::new();
    let mut treatments = Vec::new();
    let mut consults_by_onc: Vec<Vec<(u64, u64, u64)>> = vec![vec![]; s.oncologists as usize];
    let mut by_nurse: Vec<Vec<(u64, u64)>> = vec![vec![]; s.treatment_nurses as usize];
    let mut setups_by_nurse: Vec<Vec<(u64, u64)>> = vec![vec![]; s.treatment_nurses as usize];

    for p in &r.patients {
        let rec = &p.record;
        let chain = [
            ("arrival", Some(rec.arrival)),
            ("registration_start", rec.registration_start),
            ("registration_end", rec.registration_end),
            ("consult_start", rec.consult_start),
            ("consult_end", rec.consult_end),
            ("request_sent", rec.request_sent),
            ("prep_start", rec.prep_start),
            ("prep_end", rec.prep_end),
            ("delivered", rec.delivered),
            ("treatment_start", rec.treatment_start),
            ("treatment_end", rec.treatment_end),
        ];
        let mut last = 0;
        for (name, t) in chain {
            if let Some(t) = t {
                if t < last {
                    return Err(format!("patient {}: {name} out of order", p.id));
                }
                last = t;
                if t > r.day_end {
                    return Err(format!("patient {}: {name} after day end", p.id));
                }
            }
        }

        let (rs, re) = match (rec.registration_start, rec.registration_end) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(format!("patient {}: missing registration", p.id)),
        };
        registrations.push((rs, re));

        let has_consult = rec.consult_start.is_some();
        let has_therapy = rec.delivered.is_some();
        match p.class {
            PatientClass::Standard => {
                if !has_consult || !has_therapy || rec.treatment_end.is_none() {
                    return Err(format!("patient {}: incomplete standard pathway", p.id));
                }
                if rec.request_sent != rec.consult_end {
                    return Err(format!("patient {}: request not at consult end", p.id));
                }
            }
            PatientClass::Repetitive => {
                if has_consult {
                    return Err(format!("patient {}: repetitive patient consulted", p.id));
                }
                if !has_therapy || rec.treatment_end.is_none() {
                    return Err(format!("patient {}: incomplete repetitive pathway", p.id));
                }
                if rec.request_sent != rec.registration_end {
                    return Err(format!("patient {}: request not at registration end", p.id));
                }
            }
            PatientClass::Control => {
                if rec.consult_end.is_none() {
                    return Err(format!("patient {}: control patient not consulted", p.id));
                }
                if rec.request_sent.is_some() || has_therapy || rec.treatment_start.is_some() {
                    return Err(format!("patient {}: control patient got a therapy", p.id));
                }
            }
        }

        if let (Some(cs), Some(ce)) = (rec.consult_start, rec.consult_end) {
            let onc = p
                .oncologist
                .ok_or_else(|| format!("patient {}: consulted without oncologist", p.id))?;
            consults_by_onc[onc as usize].push((cs, ce, re));
        }
        if let (Some(ps), Some(pe)) = (rec.prep_start, rec.prep_end) {
            preps.push((ps, pe));
            let d = rec.delivered.expect("checked above");
            if d < pe + s.delivery_base {
                return Err(format!("patient {}: delivered faster than one travel leg", p.id));
            }
        }
        if let (Some(ts), Some(te)) = (rec.treatment_start, rec.treatment_end) {
            treatments.push((ts, te));
            let nurse = p.nurse.ok_or_else(|| format!("patient {}: treated without nurse", p.id))?;
            by_nurse[nurse as usize].push((ts, te));
            setups_by_nurse[nurse as usize].push((ts, ts + s.setup_duration.min(te - ts)));
        } else if rec.treatment_start.is_some() {
            return Err(format!("patient {}: treatment not concluded by day end", p.id));
        }
    }

    let cap = |name: &str, intervals: &[(u64, u64)], limit: u32| -> Result<(), String> {
        if max_overlap(intervals) > limit {
            Err(format!("{name} concurrency exceeds {limit}"))
        } else {
            Ok(())
        }
    };
    cap("reception", &registrations, s.reception_nurses)?;
    cap("pharmacy preparation", &preps, s.pharmacy_technicians)?;
    cap("chairs", &treatments, s.chairs)?;
    for (n, ivs) in by_nurse.iter().enumerate() {
        cap(&format!("nurse {n} monitoring"), ivs, s.n_max)?;
    }
    for (n, ivs) in setups_by_nurse.iter().enumerate() {
        cap(&format!("nurse {n} setup"), ivs, 1)?;
    }
    for (onc, consults) in consults_by_onc.iter().enumerate() {
        let ivs: Vec<(u64, u64)> = consults.iter().map(|&(a, b, _)| (a, b)).collect();
        cap(&format!("oncologist {onc}"), &ivs, 1)?;
        // FIFO: consultation order matches registration order.
        for a in consults {
            for b in consults {
                if a.2 < b.2 && a.0 > b.0 {
                    return Err(format!("oncologist {onc}: consultation order breaks FIFO"));
                }
            }
        }
    }

    // Chair assignment: a chair hosts one patient at a time, and patients
    // sharing a chair are seated in delivery order.
    let mut by_chair: Vec<Vec<(u64, u64, u64)>> = vec![vec![]; s.chairs as usize];
    for p in &r.patients {
        if let (Some(ts), Some(te)) = (p.record.treatment_start, p.record.treatment_end) {
            let chair =
                p.chair.ok_or_else(|| format!("patient {}: treated without chair", p.id))?;
            let d = p.record.delivered.expect("treated implies delivered");
            by_chair[chair as usize].push((d, ts, te));
        }
    }
    for (c, visits) in by_chair.iter().enumerate() {
        let ivs: Vec<(u64, u64)> = visits.iter().map(|&(_, ts, te)| (ts, te)).collect();
        cap(&format!("chair {c}"), &ivs, 1)?;
        let mut ordered = visits.clone();
        ordered.sort();
        for w in ordered.windows(2) {
            if w[0].1 > w[1].1 {
                return Err(format!("chair {c}: seating order breaks delivery FIFO"));
            }
        }
    }

    Ok(())
}

/// Maximum number of simultaneously open `[start, end)` intervals.
fn max_overlap(intervals: &[(u64, u64)]) -> u32 {
    let mut events: Vec<(u64, i32)> = Vec::with_capacity(intervals.len() * 2);
    for &(a, b) in intervals {
        events.push((a, 1));
        events.push((b, -1));
    }
    // Ends sort before starts at equal times: a resource freed at t may be
    // reused at t.
    events.sort_by_key(|&(t, d)| (t, d));
    let mut open = 0i32;
    let mut max = 0i32;
    for (_, d) in events {
        open += d;
        max = max.max(open);
    }
    max as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{status_quo_scenario, ClassMix};
    use crate::stochastics::ArrivalWindow;

    fn constant(v: f64) -> DistributionSpec {
        DistributionSpec::Constant { v }
    }

    /// One standard patient arriving 08:30, all durations constant.
    fn single_patient_scenario() -> Scenario {
        let mut s = status_quo_scenario();
        s.patient_count = DistributionSpec::Normal { mu: 1.0, sigma: 0.0 };
        s.class_mix = ClassMix { standard: 1.0, repetitive: 0.0, control: 0.0 };
        s.arrival_windows = vec![ArrivalWindow {
            start_offset: 1800,
            end_offset: 1860,
            probability: 1.0,
        }];
        s.consult_duration = constant(20.0);
        s.prep_classes = vec![WeightedDuration { probability: 1.0, duration: constant(5.0) }];
        s.treatment_classes =
            vec![WeightedDuration { probability: 1.0, duration: constant(60.0) }];
        s.batch_policy = BatchPolicy::Fixed { k: 1 };
        s.delay_probability = 0.0;
        s
    }

    fn seed(replicate: u64) -> SeedTriple {
        SeedTriple { base_seed: 42, config_index: 0, replicate_index: replicate }
    }

    #[test]
    fn hand_computed_single_patient_trace() {
        let s = single_patient_scenario();
        let r = run_day(&s, seed(0)).unwrap();
        assert_eq!(r.patients.len(), 1);
        let rec = &r.patients[0].record;
        assert_eq!(rec.arrival, 1800); // 08:30
        assert_eq!(rec.registration_start, Some(1800));
        assert_eq!(rec.registration_end, Some(1860)); // 08:31
        assert_eq!(rec.consult_start, Some(1860));
        assert_eq!(rec.consult_end, Some(3060)); // 08:51
        assert_eq!(rec.request_sent, Some(3060));
        assert_eq!(rec.prep_start, Some(3060));
        assert_eq!(rec.prep_end, Some(3360)); // 08:56
        assert_eq!(rec.delivered, Some(3960)); // 09:06
        assert_eq!(rec.treatment_start, Some(3960));
        assert_eq!(rec.treatment_end, Some(7560)); // 10:06
        assert_eq!(r.day_end, 7560);
        check_day_invariants(&s, &r).unwrap();
    }

    #[test]
    fn run_day_is_deterministic() {
        let s = status_quo_scenario();
        let a = run_day(&s, seed(3)).unwrap();
        let b = run_day(&s, seed(3)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn control_only_day_ends_at_last_consult() {
        let mut s = status_quo_scenario();
        s.class_mix = ClassMix { standard: 0.0, repetitive: 0.0, control: 1.0 };
        let r = run_day(&s, seed(1)).unwrap();
        assert_eq!(r.counts.standard, 0);
        assert_eq!(r.counts.repetitive, 0);
        let last_consult = r
            .patients
            .iter()
            .map(|p| p.record.consult_end.unwrap())
            .max()
            .unwrap();
        assert_eq!(r.day_end, last_consult);
        assert!(r.patients.iter().all(|p| p.record.delivered.is_none()));
        check_day_invariants(&s, &r).unwrap();
    }

    #[test]
    fn class_mix_fraction_converges() {
        let s = status_quo_scenario();
        let mut standard = 0u64;
        let mut total = 0u64;
        for rep in 0..4000 {
            let mut population = RandomSource::population_stream(7, rep);
            let dynamics = RandomSource::make_stream(7, 0, rep);
            let state = init_day(&s, &mut population, dynamics).unwrap();
            standard += state.counts.standard as u64;
            total += state.patients.len() as u64;
        }
        assert!(total > 100_000);
        let frac = standard as f64 / total as f64;
        assert!((frac - 0.7150).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn batch_target_clamps_to_outstanding() {
        let mut src = RandomSource::make_stream(1, 0, 0);
        assert_eq!(next_batch_target(&BatchPolicy::Fixed { k: 3 }, 10, &mut src), 3);
        assert_eq!(next_batch_target(&BatchPolicy::Fixed { k: 3 }, 2, &mut src), 2);
        // Forced draw: a degenerate variable policy always draws 9.
        assert_eq!(next_batch_target(&BatchPolicy::Variable { a: 9, b: 9 }, 5, &mut src), 5);
    }

    #[test]
    fn nurse_selection_rules() {
        let nurse = |id, busy_until, monitoring: &[u32]| NurseState {
            id,
            setup_busy_until: busy_until,
            monitoring: monitoring.to_vec(),
        };
        let all_busy = vec![nurse(0, Some(100), &[]), nurse(1, Some(200), &[])];
        assert_eq!(select_treatment_nurse(&all_busy, 50, 4), None);
        let loads = vec![nurse(0, None, &[1, 2, 3]), nurse(1, None, &[4]), nurse(2, None, &[5, 6])];
        assert_eq!(select_treatment_nurse(&loads, 0, 4), Some(1));
        let tie = vec![nurse(7, None, &[1, 2]), nurse(3, None, &[4, 5])];
        assert_eq!(select_treatment_nurse(&tie, 0, 4), Some(3));
        let full = vec![nurse(0, None, &[1, 2, 3, 4])];
        assert_eq!(select_treatment_nurse(&full, 0, 4), None);
        // A setup that finished exactly now is free again.
        let edge = vec![nurse(0, Some(100), &[])];
        assert_eq!(select_treatment_nurse(&edge, 100, 4), Some(0));
    }

    #[test]
    fn oncologist_queue_rules() {
        let mut q = OncologistQueue::new();
        assert_eq!(select_next_for_oncologist(&q), None);
        q.insert((100, 7));
        q.insert((90, 9));
        assert_eq!(select_next_for_oncologist(&q), Some(9));
        let mut tie = OncologistQueue::new();
        tie.insert((50, 4));
        tie.insert((50, 2));
        assert_eq!(select_next_for_oncologist(&tie), Some(2));
    }

    #[test]
    fn capacity_gate_under_scarce_chairs() {
        let mut s = status_quo_scenario();
        s.chairs = 1;
        s.treatment_nurses = 1;
        for rep in 0..20 {
            let r = run_day(&s, seed(rep)).unwrap();
            check_day_invariants(&s, &r).unwrap();
        }
    }

    #[test]
    fn status_quo_invariants_hold() {
        let s = status_quo_scenario();
        for rep in 0..50 {
            let r = run_day(&s, seed(rep)).unwrap();
            let total = r.counts.standard + r.counts.repetitive + r.counts.control;
            assert_eq!(total as usize, r.patients.len());
            check_day_invariants(&s, &r).unwrap();
        }
    }

    #[test]
    fn population_is_shared_across_configurations() {
        // Same replicate, different config index: the sampled patient
        // populations coincide because arrival/count parameters do.
        let s = status_quo_scenario();
        let mut s2 = s.clone();
        s2.couriers = 2;
        let a = run_day(&s, SeedTriple { base_seed: 5, config_index: 0, replicate_index: 9 })
            .unwrap();
        let b = run_day(&s2, SeedTriple { base_seed: 5, config_index: 31, replicate_index: 9 })
            .unwrap();
        assert_eq!(a.patients.len(), b.patients.len());
        for (x, y) in a.patients.iter().zip(&b.patients) {
            assert_eq!(x.class, y.class);
            assert_eq!(x.record.arrival, y.record.arrival);
            assert_eq!(x.oncologist, y.oncologist);
        }
    }
}
