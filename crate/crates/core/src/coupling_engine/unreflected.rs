//! Coupling of two unreflected paths.
//!
//! The reflected copies are coupled first. If the unreflected paths then sit
//! on opposite sides of the origin, the common reflected path is followed to
//! its next visit of the origin, where the two unreflected paths leave with
//! opposite velocities. Over a window of length `t0` they are maximally
//! coupled on the events of one and two switches; on failure the window is
//! finished with the residual law and the whole procedure restarts.

use rand::Rng;

use super::window::{h_minus, h_plus, sample_bridge_first_run};
use super::{continue_common, ev, finish, reflected_core, CoupledPaths, CouplingOutcome, Logs};
use crate::error::{Error, Result};
use crate::pdmp_sim::{reflect, unreflect, Event, EventKind, Trajectory, Walker};
use crate::rate_model::RatePair;
use crate::state::{sgn, Flavor, State, Velocity};

/// Default window length.
pub const DEFAULT_WINDOW: f64 = 1.0;

const MAX_WINDOWS: u64 = 1_000_000;

/// Unreflected path from `(0, +1)` at `start` over the window, in the
/// reflected frame, with its number of switches and final unreflected state.
struct Piece<'p> {
    events: Vec<Event>,
    switches: usize,
    end: State,
    walker: Walker<'p>,
}

fn run_piece<'p, R: Rng + ?Sized>(
    pair: &'p RatePair,
    sign: f64,
    start: f64,
    t0: f64,
    rng: &mut R,
) -> Result<Piece<'p>> {
    let mut w = Walker::with_sign(pair, 0.0, Velocity::Plus, sign, start, rng);
    let stop = start + t0;
    let mut events = Vec::new();
    while w.next_event().0 <= stop {
        events.push(w.step(rng)?);
    }
    w.advance_to(stop);
    let switches = events
        .iter()
        .filter(|e| e.kind == EventKind::Switch)
        .count();
    Ok(Piece {
        events,
        switches,
        end: w.signed_state(),
        walker: w,
    })
}

/// `(own, other)` sub-densities at the end of a piece started at `(0, −1)`,
/// or `None` outside the coupled events.
fn densities(
    pair: &RatePair,
    t0: f64,
    switches: usize,
    end: &State,
    from_minus: bool,
) -> Option<(f64, f64)> {
    // a path from (0, +1) is the mirror image of one from (0, −1)
    let (u, w) = if from_minus {
        (end.position, end.velocity)
    } else {
        (-end.position, end.velocity.flip())
    };
    match (switches, w) {
        (1, Velocity::Plus) => Some((h_minus(pair, t0, u), h_plus(pair, t0, u))),
        (2, Velocity::Minus) => Some((h_plus(pair, t0, -u), h_minus(pair, t0, -u))),
        _ => None,
    }
}

/// Unreflected events from `(0, +1)` at `start` that end at `end` after a
/// window of length `t0` with `3 − p_switches` switches.
fn bridge<R: Rng + ?Sized>(
    pair: &RatePair,
    start: f64,
    t0: f64,
    p_switches: usize,
    end: &State,
    rng: &mut R,
) -> Result<Vec<Event>> {
    let u = end.position;
    let events = if p_switches == 1 {
        let s2 = 0.5 * (t0 - u);
        let s1 = sample_bridge_first_run(pair, t0, u, rng.random::<f64>())?;
        vec![
            ev(start + s1, s1, Velocity::Minus, EventKind::Switch),
            ev(start + s1 + s2, s1 - s2, Velocity::Plus, EventKind::Switch),
        ]
    } else {
        let s = 0.5 * (t0 + u);
        vec![ev(start + s, s, Velocity::Minus, EventKind::Switch)]
    };
    let traj = Trajectory {
        initial: State::at(0.0, Velocity::Plus, start),
        events,
        horizon: start + t0,
        flavor: Flavor::Unreflected,
    };
    Ok(reflect(&traj)?.events)
}

struct Run<'p> {
    outcome: CouplingOutcome,
    common: Walker<'p>,
}

fn run<'p, R: Rng + ?Sized>(
    pair: &'p RatePair,
    y: [State; 2],
    t0: f64,
    logs: &mut Logs,
    rng: &mut R,
) -> Result<Run<'p>> {
    let mut starts = [y[0].folded(), y[1].folded()];
    let mut clock = 0.0;
    let mut first = None;
    let mut attempts = 0;
    let mut windows = 0;
    loop {
        let core = reflected_core(pair, starts, clock, logs, Flavor::Unreflected, rng)?;
        let crossing = *first.get_or_insert(core.crossing);
        attempts += core.attempts;
        if logs.signs_agree() {
            let outcome = CouplingOutcome {
                t_crossing: crossing.t_crossing,
                x_crossing: crossing.x_crossing,
                t_star: core.t_star,
                attempts,
                windows,
                flavor: Flavor::Unreflected,
            };
            return Ok(Run {
                outcome,
                common: core.common,
            });
        }
        windows += 1;
        if windows > MAX_WINDOWS {
            return Err(Error::IterationGuard(windows));
        }
        let mut common = core.common;
        let h = if common.position() == 0.0 && common.velocity() == Velocity::Plus {
            common.clock()
        } else {
            loop {
                let e = common.step(rng)?;
                logs.push_both(e);
                if e.kind == EventKind::Reflection {
                    break e.time;
                }
            }
        };
        let p = if logs.signs[0] < 0.0 { 0 } else { 1 };
        let q = 1 - p;
        let piece_p = run_piece(pair, -1.0, h, t0, rng)?;
        for e in &piece_p.events {
            logs.push(p, *e);
        }
        let end = h + t0;
        let coupled = densities(pair, t0, piece_p.switches, &piece_p.end, true);
        let accept = match coupled {
            Some((gp, gq)) if gp > 0.0 => rng.random::<f64>() < gp.min(gq) / gp,
            _ => false,
        };
        if accept {
            for e in bridge(pair, h, t0, piece_p.switches, &piece_p.end, rng)? {
                logs.push(q, e);
            }
            let s = piece_p.walker.state();
            logs.push(q, ev(end, s.position, s.velocity, EventKind::Merge));
            debug_assert!(logs.signs_agree());
            let common = Walker::with_sign(pair, s.position, s.velocity, 1.0, end, rng);
            let outcome = CouplingOutcome {
                t_crossing: crossing.t_crossing,
                x_crossing: crossing.x_crossing,
                t_star: end,
                attempts,
                windows,
                flavor: Flavor::Unreflected,
            };
            return Ok(Run { outcome, common });
        }
        let mut tries = 0u64;
        let piece_q = loop {
            tries += 1;
            if tries > MAX_WINDOWS {
                return Err(Error::IterationGuard(tries));
            }
            let cand = run_piece(pair, 1.0, h, t0, rng)?;
            match densities(pair, t0, cand.switches, &cand.end, false) {
                Some((gq, gp)) if gq > 0.0 => {
                    if rng.random::<f64>() < 1.0 - gq.min(gp) / gq {
                        break cand;
                    }
                }
                _ => break cand,
            }
        };
        for e in &piece_q.events {
            logs.push(q, *e);
        }
        let mut next = [State::new(0.0, Velocity::Plus); 2];
        next[p] = piece_p.walker.state();
        next[q] = piece_q.walker.state();
        starts = next;
        clock = end;
    }
}

fn check(s: &State) -> Result<()> {
    if !s.position.is_finite() {
        return Err(Error::Precondition(format!(
            "state position must be finite, got {}",
            s.position
        )));
    }
    Ok(())
}

/// Couples two unreflected paths started at `s1` and `s2` using origin
/// windows of length `t0`.
pub fn couple_unreflected<R: Rng + ?Sized>(
    pair: &RatePair,
    s1: State,
    s2: State,
    t0: f64,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    check(&s1)?;
    check(&s2)?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::Domain(format!(
            "window length must be positive, got {t0}"
        )));
    }
    let mut logs = Logs::silent([sgn(s1.position), sgn(s2.position)]);
    let y = [
        State::new(s1.position, s1.velocity),
        State::new(s2.position, s2.velocity),
    ];
    Ok(run(pair, y, t0, &mut logs, rng)?.outcome)
}

/// Like [`couple_unreflected`], also returning both unreflected paths on
/// `[0, horizon]`.
pub fn couple_unreflected_paths<R: Rng + ?Sized>(
    pair: &RatePair,
    s1: State,
    s2: State,
    t0: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledPaths> {
    check(&s1)?;
    check(&s2)?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::Domain(format!(
            "window length must be positive, got {t0}"
        )));
    }
    let y = [
        State::new(s1.position, s1.velocity),
        State::new(s2.position, s2.velocity),
    ];
    let mut logs = Logs::recording([sgn(s1.position), sgn(s2.position)]);
    let mut r = run(pair, y, t0, &mut logs, rng)?;
    continue_common(&mut r.common, &mut logs, horizon, rng)?;
    let [e1, e2] = logs.events.expect("recording");
    let first = unreflect(
        &finish(y[0].folded(), e1, horizon, Flavor::Reflected),
        y[0].position,
    )?;
    let second = unreflect(
        &finish(y[1].folded(), e2, horizon, Flavor::Reflected),
        y[1].position,
    )?;
    Ok(CoupledPaths {
        outcome: r.outcome,
        first,
        second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling_engine::window::epsilon_t;
    use crate::rng::replica_stream;

    fn gaussian() -> RatePair {
        RatePair::affine(1.0, 1.0).unwrap()
    }

    #[test]
    fn mirror_states_need_a_window() {
        let pair = gaussian();
        let mut rng = replica_stream(7, 0);
        let o = couple_unreflected(
            &pair,
            State::new(1.0, Velocity::Plus),
            State::new(-1.0, Velocity::Minus),
            1.0,
            &mut rng,
        )
        .unwrap();
        assert!(o.windows >= 1);
        assert!(o.t_star >= 1.0);
    }

    #[test]
    fn paths_coincide_after_coalescence() {
        let pair = gaussian();
        for i in 0..40 {
            let mut rng = replica_stream(8, i);
            let p = couple_unreflected_paths(
                &pair,
                State::new(1.5, Velocity::Plus),
                State::new(-0.5, Velocity::Plus),
                1.0,
                60.0,
                &mut rng,
            )
            .unwrap();
            let o = p.outcome;
            assert!(o.t_star >= o.t_crossing);
            assert_eq!(p.first.initial.position, 1.5);
            assert_eq!(p.second.initial.position, -0.5);
            if o.t_star < 60.0 {
                for k in 0..200 {
                    let t = o.t_star + (60.0 - o.t_star) * k as f64 / 199.0;
                    let (a, b) = (p.first.state_at(t), p.second.state_at(t));
                    assert!((a.position - b.position).abs() < 1e-9, "t={t} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn window_acceptance_matches_overlap() {
        let pair = gaussian();
        let t0 = 1.0;
        let eps = epsilon_t(&pair, t0);
        let n = 20_000;
        let mut rng = replica_stream(9, 0);
        let mut hits = 0.0;
        for _ in 0..n {
            let piece = run_piece(&pair, -1.0, 0.0, t0, &mut rng).unwrap();
            if let Some((gp, gq)) = densities(&pair, t0, piece.switches, &piece.end, true) {
                hits += gp.min(gq) / gp;
            }
        }
        let est = hits / n as f64;
        assert!((est - eps).abs() < 0.02, "est {est} eps {eps}");
    }
}
