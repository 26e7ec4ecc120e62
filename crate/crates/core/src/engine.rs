//! Exact event-driven simulation of the symmetric queue.
//!
//! The state is the vector of residual works in position order. Between
//! events every position is depleted at its rate share, so the next
//! departure is the winner of the race `min_i w_i / gamma(n, i)` and can be
//! computed exactly; no time discretization is involved. Rates change at
//! every event (they depend on the queue length and on positions), so the
//! race is recomputed from scratch each time, giving an O(n)-per-event
//! simulator.
//!
//! Two drivers share the stepping logic: [`simulate`] observes the queue
//! length and workload on a fixed time grid, and [`busy_cycles`] collects
//! regeneration cycles (from one arrival into an empty system to the next)
//! for regenerative estimation.
//!
//! Conventions:
//! - positions are 1-based, position 1 at the head;
//! - the recorded queue length is right-continuous: at an event time the
//!   post-event value is observed;
//! - when an arrival and a departure coincide, the departure is processed
//!   first;
//! - a residual at or below [`RESIDUAL_ZERO_TOL`] after depletion counts as
//!   zero and triggers the departure.

use crate::disciplines::{Discipline, DisciplineError};
use crate::service_dist::ServiceDistribution;
use crate::special::Kahan;
use rand::Rng;
use thiserror::Error;

/// Residuals at or below this value are treated as exhausted.
pub const RESIDUAL_ZERO_TOL: f64 = 1e-12;

/// Default safety cap on processed events.
pub const DEFAULT_EVENT_CAP: u64 = 10_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("operation requires a nonempty queue")]
    EmptyQueue,
    #[error("position {pos} out of range for queue of length {len}")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("advance by {delta} would drive position {pos} negative ({value})")]
    NegativeResidual { pos: usize, delta: f64, value: f64 },
    #[error("invalid time increment {0}")]
    InvalidDelta(f64),
    #[error("unstable configuration: rho = {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("invalid engine parameter: {0}")]
    InvalidParameter(String),
    #[error("event cap of {cap} events exceeded at simulated time {time}")]
    EventCapExceeded { cap: u64, time: f64 },
    #[error("invalid observation grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Discipline(#[from] DisciplineError),
}

/// The exact simulation state: residual works in position order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    residuals: Vec<f64>,
    time: f64,
}

impl QueueState {
    pub fn empty() -> Self {
        QueueState {
            residuals: Vec::new(),
            time: 0.0,
        }
    }

    /// State with the given residuals at time zero, head first.
    pub fn with_residuals(residuals: Vec<f64>) -> Self {
        QueueState {
            residuals,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Total residual work (the workload).
    pub fn total_work(&self) -> f64 {
        self.residuals.iter().sum()
    }

    /// Position (1-based) and time until the next departure if no arrival
    /// intervenes: the winner of the race `w_i / gamma(n, i)` over positions
    /// with positive rate, ties going to the lowest position.
    pub fn next_departure(&self, d: &Discipline) -> Result<(usize, f64), EngineError> {
        if self.residuals.is_empty() {
            return Err(EngineError::EmptyQueue);
        }
        let rates = d.rates(self.residuals.len());
        Ok(departure_race(&self.residuals, &rates))
    }

    /// Depletes every position by its rate share for `delta` time units and
    /// advances the clock. `delta` must not exceed the departure race bound.
    pub fn advance(&mut self, delta: f64, d: &Discipline) -> Result<(), EngineError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(EngineError::InvalidDelta(delta));
        }
        if self.residuals.is_empty() {
            self.time += delta;
            return Ok(());
        }
        let rates = d.rates(self.residuals.len());
        deplete(&mut self.residuals, &rates, delta)?;
        self.time += delta;
        Ok(())
    }

    /// Inserts `work` at position `pos` (1-based, up to `len + 1`); former
    /// occupants of `pos` and above shift up by one.
    pub fn arrive(&mut self, work: f64, pos: usize) -> Result<(), EngineError> {
        if !(work > 0.0) || !work.is_finite() {
            return Err(EngineError::InvalidParameter(format!(
                "arriving work must be positive, got {work}"
            )));
        }
        if pos < 1 || pos > self.residuals.len() + 1 {
            return Err(EngineError::PositionOutOfRange {
                pos,
                len: self.residuals.len(),
            });
        }
        self.residuals.insert(pos - 1, work);
        Ok(())
    }

    /// Removes position `pos` (1-based); higher positions shift down.
    pub fn depart(&mut self, pos: usize) -> Result<f64, EngineError> {
        if pos < 1 || pos > self.residuals.len() {
            return Err(EngineError::PositionOutOfRange {
                pos,
                len: self.residuals.len(),
            });
        }
        Ok(self.residuals.remove(pos - 1))
    }
}

fn departure_race(residuals: &[f64], rates: &[f64]) -> (usize, f64) {
    let mut best_pos = 0;
    let mut best_delta = f64::INFINITY;
    for (j, (&w, &g)) in residuals.iter().zip(rates).enumerate() {
        if g > 0.0 {
            let delta = w / g;
            if delta < best_delta {
                best_delta = delta;
                best_pos = j + 1;
            }
        }
    }
    debug_assert!(best_pos >= 1, "work-conserving row has a positive rate");
    (best_pos, best_delta)
}

fn deplete(residuals: &mut [f64], rates: &[f64], delta: f64) -> Result<(), EngineError> {
    for (j, (w, &g)) in residuals.iter_mut().zip(rates).enumerate() {
        let next = *w - g * delta;
        if next < -RESIDUAL_ZERO_TOL {
            return Err(EngineError::NegativeResidual {
                pos: j + 1,
                delta,
                value: next,
            });
        }
        *w = next.max(0.0);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Departure,
}

/// One simulation event; `queue_len` is the post-event length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub position: usize,
    pub queue_len: usize,
}

/// Queue length and workload observed at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub time: f64,
    pub queue_len: usize,
    pub workload: f64,
}

/// Observation settings for [`simulate`] and [`simulate_with_arrivals`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    /// Strictly increasing observation times within `[0, horizon]`.
    pub grid: Vec<f64>,
    pub event_cap: u64,
    /// Keep the full event log (`time, kind, position, queue length`).
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(horizon: f64) -> Self {
        SimConfig {
            horizon,
            grid: Vec::new(),
            event_cap: DEFAULT_EVENT_CAP,
            record_events: false,
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_event_log(mut self) -> Self {
        self.record_events = true;
        self
    }

    fn validate(&self) -> Result<(), EngineError> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(EngineError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        for w in self.grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(EngineError::InvalidGrid(format!(
                    "observation times must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&first) = self.grid.first() {
            if first < 0.0 {
                return Err(EngineError::InvalidGrid(format!(
                    "observation time {first} is negative"
                )));
            }
        }
        if let Some(&last) = self.grid.last() {
            if last > self.horizon {
                return Err(EngineError::InvalidGrid(format!(
                    "observation time {last} exceeds horizon {}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// A simulated trajectory: grid observations plus conservation bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub samples: Vec<PathSample>,
    pub event_count: u64,
    pub final_state: QueueState,
    /// Total work brought by arrivals (compensated summation).
    pub arrived_work: f64,
    /// Total time with at least one customer present.
    pub busy_time: f64,
    /// Accumulated per-event violation of work conservation,
    /// `sum |delta workload + busy delta t|`; stays near zero.
    pub conservation_drift: f64,
    pub events: Option<Vec<EventRecord>>,
}

impl SamplePath {
    /// Gap in the global work balance
    /// `arrived work = remaining work + busy time`.
    pub fn work_balance_gap(&self) -> f64 {
        (self.arrived_work - self.final_state.total_work() - self.busy_time).abs()
    }
}

/// Summary of one regeneration cycle: from an arrival into an empty system
/// to the next such arrival. The trailing idle period belongs to the cycle,
/// so ratio estimates against `cycle_length` are time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    /// Full cycle span (busy period plus trailing idle).
    pub cycle_length: f64,
    /// Integral of the queue length over the cycle.
    pub area: f64,
    /// Maximum queue length attained.
    pub max_q: usize,
    /// Departures during the cycle.
    pub customers_served: u64,
    /// Time spent at each queue length; entry `k` is the time with exactly
    /// `k` customers. Entry 0 is the trailing idle.
    pub occupancy: Vec<f64>,
}

impl CycleStats {
    pub fn idle_length(&self) -> f64 {
        self.occupancy.first().copied().unwrap_or(0.0)
    }

    pub fn busy_length(&self) -> f64 {
        self.cycle_length - self.idle_length()
    }

    /// Time during the cycle with at least `k` customers present.
    pub fn time_at_or_above(&self, k: usize) -> f64 {
        self.occupancy.iter().skip(k).sum()
    }
}

enum Arrivals<'a> {
    Poisson {
        lambda: f64,
        service: &'a ServiceDistribution,
        next_time: f64,
    },
    Scripted {
        list: &'a [(f64, f64)],
        idx: usize,
    },
}

impl<'a> Arrivals<'a> {
    fn next_time(&self) -> Option<f64> {
        match self {
            Arrivals::Poisson { next_time, .. } => Some(*next_time),
            Arrivals::Scripted { list, idx } => list.get(*idx).map(|&(t, _)| t),
        }
    }

    /// Work of the arrival being processed; schedules the next one.
    fn take<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        match self {
            Arrivals::Poisson {
                lambda,
                service,
                next_time,
            } => {
                let work = loop {
                    let w = service.sample(rng);
                    if w > 0.0 {
                        break w;
                    }
                };
                *next_time += exp_variate(rng, *lambda);
                work
            }
            Arrivals::Scripted { list, idx } => {
                let work = list[*idx].1;
                *idx += 1;
                work
            }
        }
    }
}

fn exp_variate<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Shared stepping core for both drivers.
struct Driver<'a, R: Rng + ?Sized> {
    discipline: &'a Discipline,
    state: QueueState,
    arrivals: Arrivals<'a>,
    rng: &'a mut R,
    event_count: u64,
    event_cap: u64,
    arrived_work: Kahan,
    busy_time: Kahan,
    drift: Kahan,
}

impl<'a, R: Rng + ?Sized> Driver<'a, R> {
    fn new(
        discipline: &'a Discipline,
        arrivals: Arrivals<'a>,
        event_cap: u64,
        rng: &'a mut R,
    ) -> Self {
        Driver {
            discipline,
            state: QueueState::empty(),
            arrivals,
            rng,
            event_count: 0,
            event_cap,
            arrived_work: Kahan::default(),
            busy_time: Kahan::default(),
            drift: Kahan::default(),
        }
    }

    /// Time of the next event, or `None` when the queue is empty and no
    /// arrival is pending.
    fn next_event_time(&self) -> Option<f64> {
        let t_arr = self.arrivals.next_time();
        let t_dep = if self.state.is_empty() {
            None
        } else {
            let (_, delta) = self
                .state
                .next_departure(self.discipline)
                .expect("nonempty queue");
            Some(self.state.time + delta)
        };
        match (t_dep, t_arr) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.min(b)),
        }
    }

    /// Advances the clock by exactly `delta`, depleting residuals and
    /// keeping the conservation books. `delta` is always a race or
    /// interarrival gap, never a difference of large absolute times, so it
    /// cannot overshoot the race bound.
    fn advance_by(&mut self, delta: f64) -> Result<(), EngineError> {
        if delta == 0.0 {
            return Ok(());
        }
        if self.state.is_empty() {
            self.state.time += delta;
            return Ok(());
        }
        let before = self.state.total_work();
        self.state.advance(delta, self.discipline)?;
        let after = self.state.total_work();
        self.drift.add((before - after - delta).abs());
        self.busy_time.add(delta);
        Ok(())
    }

    /// Moves the clock to `t` with no event in between (horizon endings).
    /// The gap is capped at the race bound: `t` can sit an ulp past the
    /// next departure when absolute times this large round.
    fn advance_to(&mut self, t: f64) -> Result<(), EngineError> {
        let mut delta = (t - self.state.time).max(0.0);
        if !self.state.is_empty() {
            let (_, race) = self.state.next_departure(self.discipline)?;
            delta = delta.min(race);
        }
        self.advance_by(delta)?;
        self.state.time = self.state.time.max(t);
        Ok(())
    }

    /// Processes every event at the next event time (a departure plus any
    /// simultaneous zero residuals, or one arrival), appending records to
    /// `out`. Departure-versus-arrival ordering is decided in delta space,
    /// so the advance never exceeds the departure race bound; a tie goes to
    /// the departure.
    fn step(&mut self, out: &mut Vec<EventRecord>) -> Result<(), EngineError> {
        let race = if self.state.is_empty() {
            None
        } else {
            Some(self.state.next_departure(self.discipline)?)
        };
        let arrival = self
            .arrivals
            .next_time()
            .map(|ta| (ta, (ta - self.state.time).max(0.0)));
        let take_departure = match (&race, &arrival) {
            (Some((_, dd)), Some((_, da))) => *dd <= *da,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return Err(EngineError::EmptyQueue),
        };
        if take_departure {
            let (pos, delta) = race.expect("departure chosen");
            self.advance_by(delta)?;
            let t_event = self.state.time;
            self.state.depart(pos)?;
            self.record(out, t_event, EventKind::Departure, pos)?;
            // Simultaneous exhaustions (exact rate/work ties) leave further
            // zero residuals; they depart at the same instant, lowest
            // position first.
            while let Some(j) = self
                .state
                .residuals()
                .iter()
                .position(|&w| w <= RESIDUAL_ZERO_TOL)
            {
                self.state.depart(j + 1)?;
                self.record(out, t_event, EventKind::Departure, j + 1)?;
            }
        } else {
            let (ta, delta) = arrival.expect("arrival chosen");
            self.advance_by(delta)?;
            // Pin the clock to the scheduled arrival time so interarrival
            // roundoff does not accumulate.
            self.state.time = self.state.time.max(ta);
            let t_event = self.state.time;
            let work = self.arrivals.take(self.rng);
            self.arrived_work.add(work);
            let u: f64 = self.rng.random();
            let pos = self.discipline.insertion_position(self.state.len(), u)?;
            self.state.arrive(work, pos)?;
            self.record(out, t_event, EventKind::Arrival, pos)?;
        }
        Ok(())
    }

    fn record(
        &mut self,
        out: &mut Vec<EventRecord>,
        time: f64,
        kind: EventKind,
        position: usize,
    ) -> Result<(), EngineError> {
        self.event_count += 1;
        if self.event_count > self.event_cap {
            return Err(EngineError::EventCapExceeded {
                cap: self.event_cap,
                time,
            });
        }
        out.push(EventRecord {
            time,
            kind,
            position,
            queue_len: self.state.len(),
        });
        Ok(())
    }
}

/// Workload at time `t`, with `t` between the state clock and the next
/// event: the queue depletes total work at unit rate while busy.
fn workload_at(state: &QueueState, t: f64) -> f64 {
    let w = state.total_work();
    if state.is_empty() {
        w
    } else {
        (w - (t - state.time)).max(0.0)
    }
}

fn run_path<R: Rng + ?Sized>(
    discipline: &Discipline,
    arrivals: Arrivals<'_>,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SamplePath, EngineError> {
    cfg.validate()?;
    let mut driver = Driver::new(discipline, arrivals, cfg.event_cap, rng);
    let mut samples = Vec::with_capacity(cfg.grid.len());
    let mut log = if cfg.record_events {
        Some(Vec::new())
    } else {
        None
    };
    let mut buf = Vec::with_capacity(4);
    let mut grid_idx = 0;

    while let Some(te) = driver.next_event_time() {
        if te > cfg.horizon {
            break;
        }
        // Observation times strictly before the event see the pre-event
        // state; a time equal to the event time is recorded on a later
        // round, after every event at that instant has been applied.
        while grid_idx < cfg.grid.len() && cfg.grid[grid_idx] < te {
            let g = cfg.grid[grid_idx];
            samples.push(PathSample {
                time: g,
                queue_len: driver.state.len(),
                workload: workload_at(&driver.state, g),
            });
            grid_idx += 1;
        }
        buf.clear();
        driver.step(&mut buf)?;
        if let Some(log) = log.as_mut() {
            log.extend_from_slice(&buf);
        }
    }

    // No further events up to the horizon: the remaining observation times
    // see the current queue length, with the workload draining linearly.
    while grid_idx < cfg.grid.len() {
        let g = cfg.grid[grid_idx];
        samples.push(PathSample {
            time: g,
            queue_len: driver.state.len(),
            workload: workload_at(&driver.state, g),
        });
        grid_idx += 1;
    }
    driver.advance_to(cfg.horizon)?;

    Ok(SamplePath {
        samples,
        event_count: driver.event_count,
        arrived_work: driver.arrived_work.value(),
        busy_time: driver.busy_time.value(),
        conservation_drift: driver.drift.value(),
        final_state: driver.state,
        events: log,
    })
}

/// Simulates the symmetric queue with Poisson arrivals of rate `lambda` and
/// i.i.d. service works, from empty, up to `cfg.horizon`. Deterministic
/// given `(discipline, service, lambda, cfg, rng seed)`.
pub fn simulate<R: Rng + ?Sized>(
    discipline: &Discipline,
    service: &ServiceDistribution,
    lambda: f64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SamplePath, EngineError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(EngineError::InvalidParameter(format!(
            "arrival rate must be nonnegative, got {lambda}"
        )));
    }
    let next_time = if lambda > 0.0 {
        exp_variate(rng, lambda)
    } else {
        f64::INFINITY
    };
    let arrivals = Arrivals::Poisson {
        lambda,
        service,
        next_time,
    };
    run_path(discipline, arrivals, cfg, rng)
}

/// Simulates with a fixed list of `(arrival time, work)` pairs instead of a
/// Poisson stream; the rng only drives insertion positions. Feeding the same
/// list to different disciplines couples their workload processes exactly.
pub fn simulate_with_arrivals<R: Rng + ?Sized>(
    discipline: &Discipline,
    arrivals: &[(f64, f64)],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SamplePath, EngineError> {
    for pair in arrivals.windows(2) {
        if !(pair[1].0 >= pair[0].0) {
            return Err(EngineError::InvalidParameter(
                "scripted arrival times must be nondecreasing".to_string(),
            ));
        }
    }
    if let Some(&(t0, _)) = arrivals.first() {
        if t0 < 0.0 {
            return Err(EngineError::InvalidParameter(
                "scripted arrival times must be nonnegative".to_string(),
            ));
        }
    }
    if arrivals.iter().any(|&(_, w)| !(w > 0.0)) {
        return Err(EngineError::InvalidParameter(
            "scripted works must be positive".to_string(),
        ));
    }
    run_path(
        discipline,
        Arrivals::Scripted { list: arrivals, idx: 0 },
        cfg,
        rng,
    )
}

/// Collects exactly `n_cycles` regeneration cycles under Poisson arrivals.
/// Requires a stable configuration (`rho = lambda * mean < 1`).
pub fn busy_cycles<R: Rng + ?Sized>(
    discipline: &Discipline,
    service: &ServiceDistribution,
    lambda: f64,
    n_cycles: usize,
    rng: &mut R,
) -> Result<Vec<CycleStats>, EngineError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(EngineError::InvalidParameter(format!(
            "arrival rate must be positive, got {lambda}"
        )));
    }
    let rho = lambda * service.mean();
    if rho >= 1.0 {
        return Err(EngineError::Unstable { rho });
    }
    if n_cycles == 0 {
        return Err(EngineError::InvalidParameter(
            "need at least one cycle".to_string(),
        ));
    }

    let arrivals = Arrivals::Poisson {
        lambda,
        service,
        next_time: exp_variate(rng, lambda),
    };
    let mut driver = Driver::new(discipline, arrivals, DEFAULT_EVENT_CAP, rng);
    let mut cycles: Vec<CycleStats> = Vec::with_capacity(n_cycles);
    let mut buf = Vec::with_capacity(4);

    struct OpenCycle {
        start: f64,
        occupancy: Vec<f64>,
        max_q: usize,
        served: u64,
    }
    let mut open: Option<OpenCycle> = None;

    while cycles.len() < n_cycles {
        let te = driver
            .next_event_time()
            .expect("poisson stream never runs dry");
        if let Some(c) = open.as_mut() {
            let n = driver.state.len();
            if c.occupancy.len() <= n {
                c.occupancy.resize(n + 1, 0.0);
            }
            c.occupancy[n] += te - driver.state.time();
        }
        buf.clear();
        driver.step(&mut buf)?;
        for ev in &buf {
            match ev.kind {
                EventKind::Arrival => {
                    let starts_cycle = ev.queue_len == 1;
                    if starts_cycle {
                        if let Some(c) = open.take() {
                            let area = c
                                .occupancy
                                .iter()
                                .enumerate()
                                .map(|(k, &t)| k as f64 * t)
                                .sum();
                            cycles.push(CycleStats {
                                cycle_length: ev.time - c.start,
                                area,
                                max_q: c.max_q,
                                customers_served: c.served,
                                occupancy: c.occupancy,
                            });
                            if cycles.len() == n_cycles {
                                return Ok(cycles);
                            }
                        }
                        open = Some(OpenCycle {
                            start: ev.time,
                            occupancy: vec![0.0; 2],
                            max_q: 1,
                            served: 0,
                        });
                    } else if let Some(c) = open.as_mut() {
                        c.max_q = c.max_q.max(ev.queue_len);
                    }
                }
                EventKind::Departure => {
                    if let Some(c) = open.as_mut() {
                        c.served += 1;
                    }
                }
            }
        }
    }
    Ok(cycles)
}
