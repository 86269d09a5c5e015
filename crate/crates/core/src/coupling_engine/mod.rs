//! Coalescent coupling of two telegraph paths.
//!
//! Two reflected paths run independently until their positions first meet;
//! from then on they stay glued at the corners of a sequence of rectangles
//! until exactly one of two Bernoulli marks fires, at which point the paths
//! coincide forever. The unreflected coupling wraps the reflected one and
//! adds a maximal coupling at the origin.

mod unreflected;
pub mod window;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jump_sampler::{alpha_mark, beta_mark, sample_jump};
use crate::pdmp_sim::{Event, EventKind, Trajectory, Walker, DEFAULT_EVENT_GUARD};
use crate::rate_model::RatePair;
use crate::state::{Flavor, State, Velocity};

pub use unreflected::{couple_unreflected, couple_unreflected_paths, DEFAULT_WINDOW};
pub use window::epsilon_t;

/// Summary of one coupling run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingOutcome {
    pub t_crossing: f64,
    pub x_crossing: f64,
    pub t_star: f64,
    /// number of stick attempts
    pub attempts: u64,
    /// number of origin windows tried (unreflected flavor only)
    pub windows: u64,
    pub flavor: Flavor,
}

/// Both coupled paths together with the outcome.
#[derive(Clone, Debug)]
pub struct CoupledPaths {
    pub outcome: CouplingOutcome,
    pub first: Trajectory,
    pub second: Trajectory,
}

/// Result of one stick attempt from a crossing height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StickAttempt {
    pub success: bool,
    pub next_x: f64,
    pub elapsed: f64,
    /// length of the upward run of the rising path
    pub rise: f64,
}

/// The embedded chain of rectangle corners.
///
/// Index 0 holds the starting height with `σ₀ = 0` and `ξ₀ = χ₀ = 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StickChain {
    pub phi: Vec<f64>,
    pub sigma: Vec<f64>,
    pub marks_xi: Vec<bool>,
    pub marks_chi: Vec<bool>,
    pub kappa: Vec<bool>,
    pub rho: usize,
    pub t_star: f64,
}

/// One rectangle of the stick scheme at height `y`.
#[derive(Clone, Copy, Debug)]
struct Rectangle {
    up: f64,
    down: f64,
    atom: bool,
    xi: bool,
    chi: bool,
    next_y: f64,
    excess_xi: Option<f64>,
    excess_chi: Option<f64>,
}

/// Draws the marks and excesses of one rectangle. `carried` supplies the two
/// run lengths when they were fixed by the previous rectangle.
fn rectangle<R: Rng + ?Sized>(
    pair: &RatePair,
    y: f64,
    carried: Option<(f64, f64)>,
    rng: &mut R,
) -> Rectangle {
    let (up, down) = match carried {
        Some(d) => d,
        None => {
            let up = sample_jump(pair, y, Velocity::Plus, rng);
            let down = sample_jump(pair, y, Velocity::Minus, rng);
            (up, down)
        }
    };
    let atom = down >= y;
    let down = if atom { y } else { down };
    let next_y = if atom { up } else { (y + up) - down };
    let xi_p = beta_mark(pair, y, y - down, up);
    let chi_p = if atom {
        1.0
    } else {
        alpha_mark(pair, y + up, y, down)
    };
    let xi = rng.random::<f64>() < xi_p;
    let chi = rng.random::<f64>() < chi_p;
    let excess_xi = xi.then(|| sample_jump(pair, next_y, Velocity::Plus, rng));
    let excess_chi = chi.then(|| sample_jump(pair, next_y, Velocity::Minus, rng));
    Rectangle {
        up,
        down,
        atom,
        xi,
        chi,
        next_y,
        excess_xi,
        excess_chi,
    }
}

/// One stick attempt from height `x` with fresh run lengths.
pub fn stick_attempt<R: Rng + ?Sized>(
    pair: &RatePair,
    x: f64,
    rng: &mut R,
) -> Result<StickAttempt> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "stick attempt needs x >= 0, got {x}"
        )));
    }
    let r = rectangle(pair, x, None, rng);
    Ok(StickAttempt {
        success: r.xi != r.chi,
        next_x: r.next_y,
        elapsed: r.up + r.down,
        rise: r.up,
    })
}

/// Runs the stick scheme from height `x` until success and returns the chain.
pub fn stick_chain<R: Rng + ?Sized>(pair: &RatePair, x: f64, rng: &mut R) -> Result<StickChain> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("stick chain needs x >= 0, got {x}")));
    }
    let mut chain = StickChain {
        phi: vec![x],
        sigma: vec![0.0],
        marks_xi: vec![true],
        marks_chi: vec![true],
        kappa: vec![false],
        rho: 0,
        t_star: 0.0,
    };
    let mut logs = Logs::silent([1.0, 1.0]);
    let mut guard = Guard::new(DEFAULT_EVENT_GUARD);
    stick(
        pair,
        x,
        0.0,
        [0, 1],
        &mut logs,
        Flavor::Reflected,
        Some(&mut chain),
        &mut guard,
        rng,
    )?;
    chain.rho = chain.phi.len() - 1;
    chain.t_star = chain.sigma.iter().sum();
    Ok(chain)
}

/// Per-path event logs and sign trackers.
struct Logs {
    signs: [f64; 2],
    events: Option<[Vec<Event>; 2]>,
}

impl Logs {
    fn silent(signs: [f64; 2]) -> Self {
        Logs {
            signs,
            events: None,
        }
    }

    fn recording(signs: [f64; 2]) -> Self {
        Logs {
            signs,
            events: Some([Vec::new(), Vec::new()]),
        }
    }

    fn push(&mut self, i: usize, e: Event) {
        if e.kind == EventKind::Reflection {
            self.signs[i] = -self.signs[i];
        }
        if let Some(ev) = self.events.as_mut() {
            ev[i].push(e);
        }
    }

    fn push_both(&mut self, e: Event) {
        self.push(0, e);
        self.push(1, e);
    }

    fn signs_agree(&self) -> bool {
        self.signs[0] == self.signs[1]
    }
}

struct Guard {
    count: u64,
    limit: u64,
}

impl Guard {
    fn new(limit: u64) -> Self {
        Guard { count: 0, limit }
    }

    fn tick(&mut self) -> Result<()> {
        self.count += 1;
        if self.count > self.limit {
            Err(Error::EventGuard { events: self.count })
        } else {
            Ok(())
        }
    }
}

fn ev(time: f64, position: f64, velocity: Velocity, kind: EventKind) -> Event {
    Event {
        time,
        position,
        velocity,
        kind,
    }
}

/// Stick scheme from a crossing at height `y` and time `clock`; `roles[0]`
/// is the path leaving upwards. Returns the common walker after success
/// and the number of attempts.
#[allow(clippy::too_many_arguments)]
fn stick<'p, R: Rng + ?Sized>(
    pair: &'p RatePair,
    y: f64,
    clock: f64,
    roles: [usize; 2],
    logs: &mut Logs,
    flavor: Flavor,
    mut chain: Option<&mut StickChain>,
    guard: &mut Guard,
    rng: &mut R,
) -> Result<(Walker<'p>, f64, u64)> {
    let (mut y, mut tau) = (y, clock);
    let [mut rising, mut falling] = roles;
    let mut carried = None;
    let mut attempts = 0;
    loop {
        guard.tick()?;
        attempts += 1;
        let r = rectangle(pair, y, carried.take(), rng);
        logs.push(
            rising,
            ev(tau + r.up, y + r.up, Velocity::Minus, EventKind::Switch),
        );
        if r.atom {
            logs.push(
                falling,
                ev(tau + r.down, 0.0, Velocity::Plus, EventKind::Reflection),
            );
        } else {
            logs.push(
                falling,
                ev(tau + r.down, y - r.down, Velocity::Plus, EventKind::Switch),
            );
        }
        let corner = tau + (r.up + r.down);
        let ny = r.next_y;
        if let Some(c) = chain.as_deref_mut() {
            c.phi.push(ny);
            c.sigma.push(r.up + r.down);
            c.marks_xi.push(r.xi);
            c.marks_chi.push(r.chi);
            c.kappa.push(r.xi != r.chi);
        }
        match (r.xi, r.chi) {
            (false, false) => {
                logs.push(rising, ev(corner, ny, Velocity::Plus, EventKind::Switch));
                logs.push(falling, ev(corner, ny, Velocity::Minus, EventKind::Switch));
            }
            (true, true) => {
                std::mem::swap(&mut rising, &mut falling);
                carried = Some((r.excess_xi.expect("drawn"), r.excess_chi.expect("drawn")));
            }
            (false, true) => {
                // the rising path turns down and joins the falling one
                logs.push(falling, ev(corner, ny, Velocity::Minus, EventKind::Switch));
                if merge_visible(flavor, logs) {
                    logs.push(rising, ev(corner, ny, Velocity::Minus, EventKind::Merge));
                }
                let mut w = Walker::with_pending(
                    pair,
                    ny,
                    Velocity::Minus,
                    1.0,
                    corner,
                    corner,
                    EventKind::Switch,
                );
                w.set_pending_switch(r.excess_chi.expect("drawn"));
                return Ok((w, corner, attempts));
            }
            (true, false) => {
                logs.push(rising, ev(corner, ny, Velocity::Plus, EventKind::Switch));
                if merge_visible(flavor, logs) {
                    logs.push(falling, ev(corner, ny, Velocity::Plus, EventKind::Merge));
                }
                let mut w = Walker::with_pending(
                    pair,
                    ny,
                    Velocity::Plus,
                    1.0,
                    corner,
                    corner,
                    EventKind::Switch,
                );
                w.set_pending_switch(r.excess_xi.expect("drawn"));
                return Ok((w, corner, attempts));
            }
        }
        y = ny;
        tau = corner;
    }
}

/// Coalescence of the reflected copies is only coalescence of the
/// unreflected ones when their signs agree.
fn merge_visible(flavor: Flavor, logs: &Logs) -> bool {
    flavor == Flavor::Reflected || logs.signs_agree()
}

/// First meeting of two reflected paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub t_crossing: f64,
    pub x_crossing: f64,
    /// index (0 = first input, 1 = second) of the path moving upwards at the crossing
    pub rising: usize,
}

/// Runs two independent reflected walkers until their positions meet.
/// Pending draws are discarded at the meeting time. Also returns the first
/// walker as it stood at the meeting, pending draw intact.
fn run_crossing<'p, R: Rng + ?Sized>(
    walkers: &mut [Walker<'p>; 2],
    logs: &mut Logs,
    guard: &mut Guard,
    rng: &mut R,
) -> Result<(Crossing, Walker<'p>)> {
    loop {
        let now = walkers[0].clock();
        let (x0, x1) = (walkers[0].position(), walkers[1].position());
        let (v0, v1) = (walkers[0].velocity(), walkers[1].velocity());
        if x0 == x1 && v0 != v1 {
            let rising = if v0 == Velocity::Plus { 0 } else { 1 };
            return Ok((
                Crossing {
                    t_crossing: now,
                    x_crossing: x0,
                    rising,
                },
                walkers[0].clone(),
            ));
        }
        let next = walkers[0].next_event().0.min(walkers[1].next_event().0);
        let (hi, lo) = if x0 >= x1 { (0, 1) } else { (1, 0) };
        if walkers[hi].velocity() == Velocity::Minus && walkers[lo].velocity() == Velocity::Plus {
            let meet = now + 0.5 * (walkers[hi].position() - walkers[lo].position());
            if meet <= next {
                let mut shadow = walkers[0].clone();
                shadow.advance_to(meet);
                let x = walkers[hi].position_at(meet);
                walkers[hi].place(x, Velocity::Minus, meet);
                walkers[lo].place(x, Velocity::Plus, meet);
                return Ok((
                    Crossing {
                        t_crossing: meet,
                        x_crossing: x,
                        rising: lo,
                    },
                    shadow,
                ));
            }
        }
        for (i, w) in walkers.iter_mut().enumerate() {
            if w.next_event().0 == next {
                guard.tick()?;
                let e = w.step(rng)?;
                logs.push(i, e);
            } else {
                w.advance_to(next);
            }
        }
    }
}

fn check_ordered(upper: &State, lower: &State) -> Result<()> {
    if !(upper.position >= lower.position && lower.position >= 0.0) {
        return Err(Error::Precondition(
            "crossing needs upper >= lower >= 0".into(),
        ));
    }
    Ok(())
}

/// Crossing of the reflected paths started at `upper` and `lower`.
pub fn crossing<R: Rng + ?Sized>(
    pair: &RatePair,
    upper: State,
    lower: State,
    rng: &mut R,
) -> Result<Crossing> {
    crossing_with_upper_hitting(pair, upper, lower, rng).map(|(c, _)| c)
}

/// Crossing together with the first hitting time of the origin of the
/// upper path, which is continued past the crossing on its own.
pub fn crossing_with_upper_hitting<R: Rng + ?Sized>(
    pair: &RatePair,
    upper: State,
    lower: State,
    rng: &mut R,
) -> Result<(Crossing, f64)> {
    check_ordered(&upper, &lower)?;
    let mut walkers = [
        Walker::new(pair, upper.position, upper.velocity, 0.0, rng),
        Walker::new(pair, lower.position, lower.velocity, 0.0, rng),
    ];
    let mut guard = Guard::new(DEFAULT_EVENT_GUARD);
    let (c, mut shadow) =
        run_crossing(&mut walkers, &mut Logs::silent([1.0, 1.0]), &mut guard, rng)?;
    let z = loop {
        let e = shadow.step(rng)?;
        if e.kind == EventKind::Reflection {
            break e.time;
        }
    };
    Ok((c, z))
}

/// Reflected coupling from `(x, v, sign)` triples at time `clock`.
struct CoreResult<'p> {
    crossing: Crossing,
    t_star: f64,
    attempts: u64,
    common: Walker<'p>,
}

fn reflected_core<'p, R: Rng + ?Sized>(
    pair: &'p RatePair,
    starts: [State; 2],
    clock: f64,
    logs: &mut Logs,
    flavor: Flavor,
    rng: &mut R,
) -> Result<CoreResult<'p>> {
    let mut guard = Guard::new(DEFAULT_EVENT_GUARD);
    if starts[0].same_phase(&starts[1]) {
        let s = starts[0];
        let mut common = Walker::with_pending(
            pair,
            s.position,
            s.velocity,
            1.0,
            clock,
            clock,
            EventKind::Switch,
        );
        common.schedule(rng);
        let crossing = Crossing {
            t_crossing: clock,
            x_crossing: s.position,
            rising: 0,
        };
        return Ok(CoreResult {
            crossing,
            t_star: clock,
            attempts: 0,
            common,
        });
    }
    let mut walkers = [
        Walker::new(pair, starts[0].position, starts[0].velocity, clock, rng),
        Walker::new(pair, starts[1].position, starts[1].velocity, clock, rng),
    ];
    let (c, _) = run_crossing(&mut walkers, logs, &mut guard, rng)?;
    let (t, x) = (c.t_crossing, c.x_crossing);
    if x == 0.0 {
        // the falling path reflects at once and both leave the origin together
        let falling = 1 - c.rising;
        logs.push(falling, ev(t, 0.0, Velocity::Plus, EventKind::Reflection));
        if merge_visible(flavor, logs) {
            logs.push(c.rising, ev(t, 0.0, Velocity::Plus, EventKind::Merge));
        }
        let mut common =
            Walker::with_pending(pair, 0.0, Velocity::Plus, 1.0, t, t, EventKind::Switch);
        common.schedule(rng);
        return Ok(CoreResult {
            crossing: c,
            t_star: t,
            attempts: 0,
            common,
        });
    }
    let (common, t_star, attempts) = stick(
        pair,
        x,
        t,
        [c.rising, 1 - c.rising],
        logs,
        flavor,
        None,
        &mut guard,
        rng,
    )?;
    Ok(CoreResult {
        crossing: c,
        t_star,
        attempts,
        common,
    })
}

fn check_reflected(s: &State) -> Result<()> {
    if !(s.position >= 0.0) || !s.position.is_finite() {
        return Err(Error::Precondition(format!(
            "reflected state needs position >= 0, got {}",
            s.position
        )));
    }
    Ok(())
}

/// Couples two reflected paths and returns crossing and coalescence times.
pub fn couple_reflected<R: Rng + ?Sized>(
    pair: &RatePair,
    s1: State,
    s2: State,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    check_reflected(&s1)?;
    check_reflected(&s2)?;
    let mut logs = Logs::silent([1.0, 1.0]);
    let core = reflected_core(
        pair,
        [s1.at_clock(0.0), s2.at_clock(0.0)],
        0.0,
        &mut logs,
        Flavor::Reflected,
        rng,
    )?;
    Ok(CouplingOutcome {
        t_crossing: core.crossing.t_crossing,
        x_crossing: core.crossing.x_crossing,
        t_star: core.t_star,
        attempts: core.attempts,
        windows: 0,
        flavor: Flavor::Reflected,
    })
}

/// Like [`couple_reflected`], also returning both paths on `[0, horizon]`.
pub fn couple_reflected_paths<R: Rng + ?Sized>(
    pair: &RatePair,
    s1: State,
    s2: State,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledPaths> {
    check_reflected(&s1)?;
    check_reflected(&s2)?;
    let (s1, s2) = (s1.at_clock(0.0), s2.at_clock(0.0));
    let mut logs = Logs::recording([1.0, 1.0]);
    let mut core = reflected_core(pair, [s1, s2], 0.0, &mut logs, Flavor::Reflected, rng)?;
    continue_common(&mut core.common, &mut logs, horizon, rng)?;
    let outcome = CouplingOutcome {
        t_crossing: core.crossing.t_crossing,
        x_crossing: core.crossing.x_crossing,
        t_star: core.t_star,
        attempts: core.attempts,
        windows: 0,
        flavor: Flavor::Reflected,
    };
    let [e1, e2] = logs.events.expect("recording");
    Ok(CoupledPaths {
        outcome,
        first: finish(s1, e1, horizon, Flavor::Reflected),
        second: finish(s2, e2, horizon, Flavor::Reflected),
    })
}

fn continue_common<R: Rng + ?Sized>(
    common: &mut Walker<'_>,
    logs: &mut Logs,
    until: f64,
    rng: &mut R,
) -> Result<()> {
    while common.next_event().0 <= until {
        let e = common.step(rng)?;
        logs.push_both(e);
    }
    Ok(())
}

fn finish(initial: State, mut events: Vec<Event>, horizon: f64, flavor: Flavor) -> Trajectory {
    events.retain(|e| e.time <= horizon);
    Trajectory {
        initial,
        events,
        horizon,
        flavor,
    }
}

trait AtClock {
    fn at_clock(self, t: f64) -> State;
}

impl AtClock for State {
    fn at_clock(self, t: f64) -> State {
        State::at(self.position, self.velocity, t)
    }
}
