//! Event-driven simulation of the telegraph process.
//!
//! A single kernel, [`Walker`], runs in the reflected frame `(X, V)` and keeps
//! a sign `s` so that `(Y, W) = (s·X, s·V)` is the unreflected process; each
//! visit of the origin flips `s`.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_sampler::sample_jump;
use crate::rate_model::RatePair;
use crate::rng::unit_exponential;
use crate::state::{sgn, Flavor, State, Velocity};

pub const DEFAULT_EVENT_GUARD: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// velocity switch at a jump of the rate process
    Switch,
    /// forced flip to `+1` at the origin (reflected frame only)
    Reflection,
    /// the path coalesced with its coupled partner; no velocity change
    Merge,
}

/// A point of a trajectory; `velocity` is the post-event value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub position: f64,
    pub velocity: Velocity,
    pub kind: EventKind,
}

impl Event {
    pub fn state(&self) -> State {
        State::at(self.position, self.velocity, self.time)
    }
}

/// Maps a reflected-frame point to the unreflected frame under sign `s`.
#[inline]
pub fn unfold(sign: f64, x: f64, v: Velocity) -> (f64, Velocity) {
    let y = if x == 0.0 { 0.0 } else { sign * x };
    (y, if sign > 0.0 { v } else { v.flip() })
}

/// Event-driven reflected-frame kernel with a sign tracker.
///
/// The next event is always drawn ahead of time, so the walker can be
/// advanced to any instant before it without consuming randomness.
#[derive(Clone, Debug)]
pub struct Walker<'p> {
    pair: &'p RatePair,
    x: f64,
    v: Velocity,
    sign: f64,
    clock: f64,
    next_time: f64,
    next_kind: EventKind,
    events: u64,
    guard: u64,
}

impl<'p> Walker<'p> {
    /// Reflected-frame walker at `(x, v)` with sign `+1`.
    pub fn new<R: Rng + ?Sized>(
        pair: &'p RatePair,
        x: f64,
        v: Velocity,
        clock: f64,
        rng: &mut R,
    ) -> Self {
        Self::with_sign(pair, x, v, 1.0, clock, rng)
    }

    /// Walker for the unreflected state `(y, w)`.
    pub fn signed<R: Rng + ?Sized>(
        pair: &'p RatePair,
        y: f64,
        w: Velocity,
        clock: f64,
        rng: &mut R,
    ) -> Self {
        let s = sgn(y);
        Self::with_sign(
            pair,
            y.abs(),
            if s > 0.0 { w } else { w.flip() },
            s,
            clock,
            rng,
        )
    }

    pub fn with_sign<R: Rng + ?Sized>(
        pair: &'p RatePair,
        x: f64,
        v: Velocity,
        sign: f64,
        clock: f64,
        rng: &mut R,
    ) -> Self {
        debug_assert!(x >= 0.0);
        let mut w = Self::with_pending(pair, x, v, sign, clock, clock, EventKind::Switch);
        w.schedule(rng);
        w
    }

    /// Walker whose next event is already known.
    pub fn with_pending(
        pair: &'p RatePair,
        x: f64,
        v: Velocity,
        sign: f64,
        clock: f64,
        next_time: f64,
        next_kind: EventKind,
    ) -> Self {
        Walker {
            pair,
            x,
            v,
            sign,
            clock,
            next_time,
            next_kind,
            events: 0,
            guard: DEFAULT_EVENT_GUARD,
        }
    }

    pub fn with_guard(mut self, guard: u64) -> Self {
        self.guard = guard;
        self
    }

    pub fn pair(&self) -> &'p RatePair {
        self.pair
    }

    /// Draws the next event from the current state, discarding any pending one.
    pub fn schedule<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self.v {
            Velocity::Plus => {
                self.next_time = self.clock + sample_jump(self.pair, self.x, Velocity::Plus, rng);
                self.next_kind = EventKind::Switch;
            }
            Velocity::Minus => {
                let e = unit_exponential(rng);
                let floor = self.clock + self.x;
                match self.pair.a().retreat(self.x, e) {
                    Some(t) if self.clock + t < floor => {
                        self.next_time = self.clock + t;
                        self.next_kind = EventKind::Switch;
                    }
                    _ => {
                        self.next_time = floor;
                        self.next_kind = EventKind::Reflection;
                    }
                }
            }
        }
    }

    /// Replaces the pending event by a velocity switch after `delay`.
    pub fn set_pending_switch(&mut self, delay: f64) {
        self.next_time = self.clock + delay;
        self.next_kind = EventKind::Switch;
        if self.v == Velocity::Minus && delay >= self.x {
            self.next_time = self.clock + self.x;
            self.next_kind = EventKind::Reflection;
        }
    }

    pub fn next_event(&self) -> (f64, EventKind) {
        (self.next_time, self.next_kind)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn position(&self) -> f64 {
        self.x
    }

    pub fn velocity(&self) -> Velocity {
        self.v
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Reflected position at `t ∈ [clock, next event]`.
    #[inline]
    pub fn position_at(&self, t: f64) -> f64 {
        (self.x + self.v.value() * (t - self.clock)).max(0.0)
    }

    /// Reflected state.
    pub fn state(&self) -> State {
        State::at(self.x, self.v, self.clock)
    }

    /// Unreflected state.
    pub fn signed_state(&self) -> State {
        let (y, w) = unfold(self.sign, self.x, self.v);
        State::at(y, w, self.clock)
    }

    /// Moves along the current segment to `t`, which must not pass the next event.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.clock && t <= self.next_time);
        if t > self.clock {
            self.x = self.position_at(t);
            self.clock = t;
        }
    }

    /// Jumps to `(x, v)` at time `t` without drawing; used when a coupling
    /// dictates the state.
    pub fn place(&mut self, x: f64, v: Velocity, t: f64) {
        self.x = x;
        self.v = v;
        self.clock = t;
    }

    pub fn set_sign(&mut self, sign: f64) {
        self.sign = sign;
    }

    /// Executes the pending event and draws the following one. Returns the
    /// event in the reflected frame.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Event> {
        self.events += 1;
        if self.events > self.guard {
            return Err(Error::EventGuard {
                events: self.events,
            });
        }
        let t = self.next_time;
        match self.next_kind {
            EventKind::Reflection => {
                self.x = 0.0;
                self.v = Velocity::Plus;
                self.sign = -self.sign;
            }
            _ => {
                let dt = t - self.clock;
                self.x = match self.v {
                    Velocity::Plus => self.x + dt,
                    Velocity::Minus => (self.x - dt).max(f64::MIN_POSITIVE),
                };
                self.v = self.v.flip();
            }
        }
        self.clock = t;
        let kind = self.next_kind;
        self.schedule(rng);
        Ok(Event {
            time: t,
            position: self.x,
            velocity: self.v,
            kind,
        })
    }

    /// Runs events up to and including time `t`, then moves to `t`.
    pub fn run_until<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> Result<()> {
        while self.next_time <= t {
            self.step(rng)?;
        }
        self.advance_to(t);
        Ok(())
    }
}

/// A piecewise-linear path stored as its list of events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: State,
    pub events: Vec<Event>,
    /// final time of the path
    pub horizon: f64,
    pub flavor: Flavor,
}

impl Trajectory {
    /// Last event at or before `t`, or `None` before the first event.
    fn anchor(&self, t: f64) -> (f64, f64, Velocity) {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            (
                self.initial.clock,
                self.initial.position,
                self.initial.velocity,
            )
        } else {
            let e = &self.events[k - 1];
            (e.time, e.position, e.velocity)
        }
    }

    /// Position at time `t`.
    pub fn position_at(&self, t: f64) -> f64 {
        let (t0, p, v) = self.anchor(t);
        p + v.value() * (t - t0)
    }

    /// State at time `t` with the càdlàg convention for the velocity.
    pub fn state_at(&self, t: f64) -> State {
        let (_, _, v) = self.anchor(t);
        State::at(self.position_at(t), v, t)
    }

    pub fn final_state(&self) -> State {
        self.state_at(self.horizon)
    }

    /// Number of velocity switches.
    pub fn switches(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Switch)
            .count()
    }

    /// Writes `t,position,velocity` rows: initial state, events, final state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,position,velocity")?;
        let row = |out: &mut W, s: State| {
            writeln!(
                out,
                "{:.16e},{:.16e},{}",
                s.clock,
                s.position,
                s.velocity.value() as i8
            )
        };
        row(&mut out, self.initial)?;
        for e in &self.events {
            row(&mut out, e.state())?;
        }
        row(&mut out, self.final_state())
    }
}

/// Exact simulation on `[initial.clock, initial.clock + horizon]`.
pub fn simulate<R: Rng + ?Sized>(
    pair: &RatePair,
    initial: State,
    horizon: f64,
    flavor: Flavor,
    rng: &mut R,
) -> Result<Trajectory> {
    simulate_guarded(pair, initial, horizon, flavor, DEFAULT_EVENT_GUARD, rng)
}

pub fn simulate_guarded<R: Rng + ?Sized>(
    pair: &RatePair,
    initial: State,
    horizon: f64,
    flavor: Flavor,
    guard: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut walker = start_walker(pair, initial, flavor, rng)?.with_guard(guard);
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    let end = initial.clock + horizon;
    let mut events = Vec::new();
    while walker.next_event().0 <= end {
        let e = walker.step(rng)?;
        match flavor {
            Flavor::Reflected => events.push(e),
            Flavor::Unreflected => {
                if e.kind == EventKind::Switch {
                    let (y, w) = unfold(walker.sign(), e.position, e.velocity);
                    events.push(Event {
                        time: e.time,
                        position: y,
                        velocity: w,
                        kind: e.kind,
                    });
                }
            }
        }
    }
    Ok(Trajectory {
        initial,
        events,
        horizon: end,
        flavor,
    })
}

fn start_walker<'p, R: Rng + ?Sized>(
    pair: &'p RatePair,
    initial: State,
    flavor: Flavor,
    rng: &mut R,
) -> Result<Walker<'p>> {
    if !initial.position.is_finite() {
        return Err(Error::Domain("initial position must be finite".into()));
    }
    match flavor {
        Flavor::Reflected => {
            if initial.position < 0.0 {
                return Err(Error::Domain(format!(
                    "reflected start needs position >= 0, got {}",
                    initial.position
                )));
            }
            Ok(Walker::new(
                pair,
                initial.position,
                initial.velocity,
                initial.clock,
                rng,
            ))
        }
        Flavor::Unreflected => Ok(Walker::signed(
            pair,
            initial.position,
            initial.velocity,
            initial.clock,
            rng,
        )),
    }
}

/// States at the given non-decreasing times, without storing the path.
pub fn states_at<R: Rng + ?Sized>(
    pair: &RatePair,
    initial: State,
    times: &[f64],
    flavor: Flavor,
    rng: &mut R,
) -> Result<Vec<State>> {
    let mut walker = start_walker(pair, initial, flavor, rng)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < walker.clock() {
            return Err(Error::Domain(
                "query times must be non-decreasing and after the start".into(),
            ));
        }
        walker.run_until(t, rng)?;
        out.push(match flavor {
            Flavor::Reflected => walker.state(),
            Flavor::Unreflected => walker.signed_state(),
        });
    }
    Ok(out)
}

/// Maps an unreflected path to `(|Y|, W·sgn(Y))`, inserting a reflection at
/// each zero of `Y`.
pub fn reflect(traj: &Trajectory) -> Result<Trajectory> {
    if traj.flavor != Flavor::Unreflected {
        return Err(Error::Precondition(
            "reflect needs an unreflected trajectory".into(),
        ));
    }
    let mut events = Vec::with_capacity(traj.events.len() + 8);
    let zero_in =
        |events: &mut Vec<Event>, from: (f64, f64, Velocity), until: f64, inclusive: bool| {
            let folded = State::new(from.1, from.2).folded();
            if folded.velocity == Velocity::Minus {
                let tz = from.0 + folded.position;
                if tz < until || (inclusive && tz <= until) {
                    events.push(Event {
                        time: tz,
                        position: 0.0,
                        velocity: Velocity::Plus,
                        kind: EventKind::Reflection,
                    });
                }
            }
        };
    let mut cur = (
        traj.initial.clock,
        traj.initial.position,
        traj.initial.velocity,
    );
    for e in &traj.events {
        zero_in(&mut events, cur, e.time, false);
        let folded = e.state().folded();
        events.push(Event {
            time: e.time,
            position: folded.position,
            velocity: folded.velocity,
            kind: e.kind,
        });
        cur = (e.time, e.position, e.velocity);
    }
    zero_in(&mut events, cur, traj.horizon, true);
    Ok(Trajectory {
        initial: traj.initial.folded(),
        events,
        horizon: traj.horizon,
        flavor: Flavor::Reflected,
    })
}

/// Maps a reflected path back to `(Y, W)` starting at `y0`, flipping the
/// sign at each reflection.
pub fn unreflect(traj: &Trajectory, y0: f64) -> Result<Trajectory> {
    if traj.flavor != Flavor::Reflected {
        return Err(Error::Precondition(
            "unreflect needs a reflected trajectory".into(),
        ));
    }
    if y0.abs() != traj.initial.position {
        return Err(Error::Precondition(format!(
            "|y0| = {} does not match the initial position {}",
            y0.abs(),
            traj.initial.position
        )));
    }
    let mut sign = sgn(y0);
    let (_, w0) = unfold(sign, traj.initial.position, traj.initial.velocity);
    let initial = State::at(y0, w0, traj.initial.clock);
    let mut events = Vec::with_capacity(traj.events.len());
    for e in &traj.events {
        if e.kind == EventKind::Reflection {
            sign = -sign;
            continue;
        }
        let (y, w) = unfold(sign, e.position, e.velocity);
        events.push(Event {
            time: e.time,
            position: y,
            velocity: w,
            kind: e.kind,
        });
    }
    Ok(Trajectory {
        initial,
        events,
        horizon: traj.horizon,
        flavor: Flavor::Unreflected,
    })
}

/// First hitting time of `(0, +1)` in the reflected frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HittingSample {
    pub start: State,
    pub z_time: f64,
}

/// Runs the reflected process from `start` until it first reflects at the origin.
pub fn hitting_time_zero<R: Rng + ?Sized>(
    pair: &RatePair,
    start: State,
    rng: &mut R,
) -> Result<HittingSample> {
    if !(start.position >= 0.0) {
        return Err(Error::Domain(format!(
            "hitting time needs position >= 0, got {}",
            start.position
        )));
    }
    let mut w = Walker::new(pair, start.position, start.velocity, 0.0, rng);
    loop {
        if w.step(rng)?.kind == EventKind::Reflection {
            return Ok(HittingSample {
                start,
                z_time: w.clock(),
            });
        }
    }
}

/// `λ_c = (√b − √a)²/2` for constant rates.
pub fn constant_rate_lambda_c(a: f64, b: f64) -> f64 {
    0.5 * (b.sqrt() - a.sqrt()).powi(2)
}

/// Closed-form `E[e^{λ Z(x, v)}]` for constant rates `a < b`, `+∞` beyond `λ_c`.
pub fn constant_rate_hitting_laplace(a: f64, b: f64, x: f64, v: Velocity, lambda: f64) -> f64 {
    if lambda > constant_rate_lambda_c(a, b) {
        return f64::INFINITY;
    }
    let s = a + b - 2.0 * lambda;
    let root = (s * s - 4.0 * a * b).max(0.0).sqrt();
    let c = 0.5 * (b - a - root);
    let psi = (s - root) / (2.0 * a);
    match v {
        Velocity::Minus => (x * c).exp(),
        Velocity::Plus => psi * (x * c).exp(),
    }
}
