//! Hybrid-time execution for systems whose only clocks are two affinely
//! decreasing timers: exact event scheduling, jump-priority semantics, arc
//! storage and jump bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vector;
use crate::model::{JumpPolicy, JumpSelector, ModelError, State};

/// Two timer events closer than this (seconds) are simultaneous.
pub const EVENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HybridError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("timer rates must be negative, got ({rate_c}, {rate_g})")]
    NonNegativeRate { rate_c: f64, rate_g: f64 },
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error("state left the flow and jump sets at (t = {}, j = {}): tau_c = {tau_c}, tau_g = {tau_g}", at.t, at.j)]
    LeftDomain { at: HybridTime, tau_c: f64, tau_g: f64 },
    #[error("({}, {}) is outside the arc's domain", at.t, at.j)]
    OutsideDomain { at: HybridTime },
    #[error("malformed jump log: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, HybridError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

impl HybridTime {
    pub fn new(t: f64, j: usize) -> Self {
        Self { t, j }
    }
}

/// The two primitive jump maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMap {
    /// One optimizer iteration.
    Gradient,
    /// New input applied and output sampled.
    Input,
}

/// Which case of the jump map produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    G1,
    G2,
    G3First(JumpMap),
    G3Second(JumpMap),
}

impl JumpKind {
    pub fn map(self) -> JumpMap {
        match self {
            JumpKind::G1 => JumpMap::Gradient,
            JumpKind::G2 => JumpMap::Input,
            JumpKind::G3First(m) | JumpKind::G3Second(m) => m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            JumpKind::G1 => "G1",
            JumpKind::G2 => "G2",
            JumpKind::G3First(_) => "G3a",
            JumpKind::G3Second(_) => "G3b",
        }
    }
}

/// One primitive step returned by a jump map.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpStep {
    pub kind: JumpKind,
    pub state: State,
}

/// Executable hybrid system with timer-driven flow and jump sets.
pub trait HybridSystem {
    /// `(dτ_c/dt, dτ_g/dt)`, both negative.
    fn timer_rates(&self) -> (f64, f64);
    /// Membership in `C`, which here also contains `D`.
    fn in_flow_set(&self, s: &State) -> bool;
    /// Shortest possible flow time between two consecutive resets of `(τ_c, τ_g)`.
    fn min_dwell(&self) -> (f64, f64);
    /// Plant state after flowing `dt` seconds with the input held.
    fn flow_x(&self, s: &State, dt: f64) -> std::result::Result<Vector, ModelError>;
    /// Applies the jump map at `s ∈ D`; one or two primitive steps.
    fn jump(&self, s: &State, selector: &mut JumpSelector) -> std::result::Result<Vec<JumpStep>, ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    C,
    G,
    Both,
}

/// Time until the first timer reaches zero and which timer(s) it is.
pub fn next_event(tau_c: f64, tau_g: f64, rate_c: f64, rate_g: f64) -> Result<(f64, Event)> {
    if !(rate_c < 0.0 && rate_g < 0.0) {
        return Err(HybridError::NonNegativeRate { rate_c, rate_g });
    }
    if !(tau_c >= 0.0 && tau_g >= 0.0) {
        return Err(HybridError::Invalid(format!(
            "timers must be non-negative, got ({tau_c}, {tau_g})"
        )));
    }
    let dc = tau_c / -rate_c;
    let dg = tau_g / -rate_g;
    Ok(if (dc - dg).abs() <= EVENT_TOL {
        (dc.min(dg), Event::Both)
    } else if dc < dg {
        (dc, Event::C)
    } else {
        (dg, Event::G)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    /// Continuous-time limit in seconds.
    pub t_end: f64,
    /// Jump-count limit.
    pub max_jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State,
}

/// Flow interval `[t_start, t_end]` at fixed jump index `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub j: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// First sample is the segment start, last is the segment end.
    pub samples: Vec<Sample>,
}

impl Segment {
    pub fn start(&self) -> &State {
        &self.samples[0].state
    }

    pub fn end(&self) -> &State {
        &self.samples[self.samples.len() - 1].state
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: HybridTime,
    pub kind: JumpKind,
    pub state_before: State,
    pub state_after: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridArc {
    pub segments: Vec<Segment>,
    pub jumps: Vec<JumpRecord>,
    pub rng_seed: u64,
    pub timer_rates: (f64, f64),
    pub min_dwell: (f64, f64),
}

impl HybridArc {
    pub fn final_time(&self) -> HybridTime {
        let last = self.segments.last().expect("arc has at least one segment");
        HybridTime::new(last.t_end, last.j)
    }

    pub fn final_state(&self) -> &State {
        self.segments.last().expect("arc has at least one segment").end()
    }

    pub fn segment(&self, j: usize) -> Option<&Segment> {
        self.segments.get(j).filter(|s| s.j == j)
    }

    /// Every stored `(t, j, state)`, in hybrid-time order.
    pub fn points(&self) -> impl Iterator<Item = (HybridTime, &State)> {
        self.segments
            .iter()
            .flat_map(|seg| seg.samples.iter().map(move |s| (HybridTime::new(s.t, seg.j), &s.state)))
    }
}

fn in_domain<S: HybridSystem>(sys: &S, s: &State, at: HybridTime) -> Result<()> {
    if sys.in_flow_set(s) {
        Ok(())
    } else {
        Err(HybridError::LeftDomain {
            at,
            tau_c: s.tau_c,
            tau_g: s.tau_g,
        })
    }
}

/// Flows `s` for `dt` seconds. Timers named by `hit` are set to exactly zero.
fn flow_state<S: HybridSystem>(sys: &S, s: &State, dt: f64, hit: Option<Event>) -> Result<State> {
    let (rc, rg) = sys.timer_rates();
    let mut out = State {
        x: sys.flow_x(s, dt)?,
        tau_c: (s.tau_c + rc * dt).max(0.0),
        tau_g: (s.tau_g + rg * dt).max(0.0),
        ..s.clone()
    };
    match hit {
        Some(Event::C) => out.tau_c = 0.0,
        Some(Event::G) => out.tau_g = 0.0,
        Some(Event::Both) => {
            out.tau_c = 0.0;
            out.tau_g = 0.0;
        }
        None => {}
    }
    Ok(out)
}

/// Runs the system from `z0` under jump-priority semantics.
///
/// Jumps pending when the time limit is reached are still executed, and a
/// two-step jump for simultaneous timer expiry is always completed even if that passes the jump
/// limit.
pub fn simulate<S: HybridSystem>(
    sys: &S,
    z0: &State,
    policy: JumpPolicy,
    horizon: Horizon,
    sample_dt: f64,
) -> Result<HybridArc> {
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(HybridError::Invalid(format!("sample_dt must be positive, got {sample_dt}")));
    }
    if !(horizon.t_end >= 0.0 && horizon.t_end.is_finite()) {
        return Err(HybridError::Invalid(format!("time horizon must be non-negative, got {}", horizon.t_end)));
    }
    let (rate_c, rate_g) = sys.timer_rates();
    if !(rate_c < 0.0 && rate_g < 0.0) {
        return Err(HybridError::NonNegativeRate { rate_c, rate_g });
    }
    in_domain(sys, z0, HybridTime::new(0.0, 0))?;

    let mut selector = JumpSelector::new(policy);
    let mut segments = Vec::new();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut j = 0;
    let mut state = z0.clone();
    let mut samples = vec![Sample { t, state: state.clone() }];

    loop {
        if state.in_jump_set() && j < horizon.max_jumps {
            segments.push(Segment {
                j,
                t_start: samples[0].t,
                t_end: t,
                samples: std::mem::take(&mut samples),
            });
            let steps = sys.jump(&state, &mut selector)?;
            let n_steps = steps.len();
            for (i, step) in steps.into_iter().enumerate() {
                in_domain(sys, &step.state, HybridTime::new(t, j + 1))?;
                let before = std::mem::replace(&mut state, step.state);
                jumps.push(JumpRecord {
                    time: HybridTime::new(t, j),
                    kind: step.kind,
                    state_before: before,
                    state_after: state.clone(),
                });
                j += 1;
                if i + 1 < n_steps {
                    segments.push(Segment {
                        j,
                        t_start: t,
                        t_end: t,
                        samples: vec![Sample { t, state: state.clone() }],
                    });
                }
            }
            samples.push(Sample { t, state: state.clone() });
            continue;
        }
        if t >= horizon.t_end - EVENT_TOL || j >= horizon.max_jumps || state.in_jump_set() {
            break;
        }

        let (to_event, which) = next_event(state.tau_c, state.tau_g, rate_c, rate_g)?;
        let remaining = horizon.t_end - t;
        let (dt, hit) = if to_event <= remaining + EVENT_TOL {
            (to_event, Some(which))
        } else {
            (remaining, None)
        };
        let t0 = t;
        let start = state.clone();
        let t1 = t0 + dt;
        let mut k = (t0 / sample_dt).floor() as i64 + 1;
        loop {
            let tk = k as f64 * sample_dt;
            if tk >= t1 - EVENT_TOL {
                break;
            }
            if tk > t0 + EVENT_TOL {
                samples.push(Sample {
                    t: tk,
                    state: flow_state(sys, &start, tk - t0, None)?,
                });
            }
            k += 1;
        }
        state = flow_state(sys, &start, dt, hit)?;
        t = if hit.is_none() { horizon.t_end } else { t1 };
        in_domain(sys, &state, HybridTime::new(t, j))?;
        samples.push(Sample { t, state: state.clone() });
    }

    let t_start = samples[0].t;
    segments.push(Segment {
        j,
        t_start,
        t_end: t,
        samples,
    });
    Ok(HybridArc {
        segments,
        jumps,
        rng_seed: policy.seed,
        timer_rates: (rate_c, rate_g),
        min_dwell: sys.min_dwell(),
    })
}

/// State at hybrid time `at`. Between samples `x` is interpolated linearly;
/// timers are exact and the remaining components are constant on a segment.
pub fn arc_lookup(arc: &HybridArc, at: HybridTime) -> Result<State> {
    let seg = arc.segment(at.j).ok_or(HybridError::OutsideDomain { at })?;
    if at.t < seg.t_start - EVENT_TOL || at.t > seg.t_end + EVENT_TOL {
        return Err(HybridError::OutsideDomain { at });
    }
    let idx = seg.samples.partition_point(|s| s.t < at.t);
    if let Some(s) = seg.samples.get(idx).filter(|s| s.t == at.t) {
        return Ok(s.state.clone());
    }
    if idx == 0 {
        return Ok(seg.start().clone());
    }
    if idx == seg.samples.len() {
        return Ok(seg.end().clone());
    }
    let (lo, hi) = (&seg.samples[idx - 1], &seg.samples[idx]);
    let w = (at.t - lo.t) / (hi.t - lo.t);
    let (rc, rg) = arc.timer_rates;
    let start = seg.start();
    let elapsed = at.t - seg.t_start;
    Ok(State {
        x: lo
            .state
            .x
            .iter()
            .zip(&hi.state.x)
            .map(|(a, b)| a + w * (b - a))
            .collect(),
        tau_c: start.tau_c + rc * elapsed,
        tau_g: start.tau_g + rg * elapsed,
        ..start.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpStats {
    /// Gradient steps in each completed input period.
    pub alpha: Vec<usize>,
    /// `alpha_bar[p] = alpha[0] + ... + alpha[p-1]`.
    pub alpha_bar: Vec<usize>,
    /// Gradient steps after the last input change.
    pub trailing: usize,
    /// Post-jump index of every input change; the `p`-th (1-based) equals `alpha_bar[p] + p`.
    pub input_changes: Vec<usize>,
}

/// Counts gradient steps per input period.
pub fn jump_stats(arc: &HybridArc) -> Result<JumpStats> {
    let mut alpha = Vec::new();
    let mut input_changes = Vec::new();
    let mut count = 0;
    for (i, rec) in arc.jumps.iter().enumerate() {
        if rec.time.j != i {
            return Err(HybridError::Malformed(format!("record {i} has jump index {}", rec.time.j)));
        }
        match rec.kind.map() {
            JumpMap::Gradient => count += 1,
            JumpMap::Input => {
                alpha.push(count);
                input_changes.push(rec.time.j + 1);
                count = 0;
            }
        }
    }
    let mut alpha_bar = vec![0];
    for a in &alpha {
        alpha_bar.push(alpha_bar[alpha_bar.len() - 1] + a);
    }
    for (p, &idx) in input_changes.iter().enumerate() {
        if idx != alpha_bar[p + 1] + p + 1 {
            return Err(HybridError::Malformed(format!(
                "input change {} at jump index {idx}, expected {}",
                p + 1,
                alpha_bar[p + 1] + p + 1
            )));
        }
    }
    Ok(JumpStats {
        alpha,
        alpha_bar,
        trailing: count,
        input_changes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoViolation {
    pub check: &'static str,
    pub at: HybridTime,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonZenoReport {
    pub passed: bool,
    pub max_jumps_at_one_time: usize,
    pub max_jumps_time: Option<f64>,
    /// Shortest flow between two consecutive jump sequences.
    pub min_flow_between_sequences: Option<f64>,
    pub violations: Vec<ZenoViolation>,
}

/// Checks that jump sequences terminate, that no more than two jumps share a
/// continuous time, and that each timer's resets are separated by at least
/// its minimum dwell.
pub fn check_non_zeno(arc: &HybridArc) -> NonZenoReport {
    let mut violations = Vec::new();
    let mut groups: Vec<&[JumpRecord]> = Vec::new();
    let mut start = 0;
    for i in 1..=arc.jumps.len() {
        if i == arc.jumps.len() || arc.jumps[i].time.t - arc.jumps[start].time.t > EVENT_TOL {
            groups.push(&arc.jumps[start..i]);
            start = i;
        }
    }

    let (mut max_jumps, mut max_time) = (0, None);
    for g in &groups {
        if g.len() > max_jumps {
            max_jumps = g.len();
            max_time = Some(g[0].time.t);
        }
        let last = &g[g.len() - 1];
        let s = &last.state_after;
        if !(s.tau_c > 0.0 && s.tau_g > 0.0) {
            violations.push(ZenoViolation {
                check: "timers_positive_after_jumps",
                at: HybridTime::new(last.time.t, last.time.j + 1),
                detail: format!("tau_c = {}, tau_g = {}", s.tau_c, s.tau_g),
            });
        }
        if g.len() > 2 {
            violations.push(ZenoViolation {
                check: "at_most_two_jumps_per_instant",
                at: g[0].time,
                detail: format!("{} jumps at t = {}", g.len(), g[0].time.t),
            });
        }
    }

    let min_flow = groups
        .windows(2)
        .map(|w| w[1][0].time.t - w[0][0].time.t)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));

    let (dwell_c, dwell_g) = arc.min_dwell;
    for (map, dwell, check) in [
        (JumpMap::Input, dwell_c, "input_dwell"),
        (JumpMap::Gradient, dwell_g, "gradient_dwell"),
    ] {
        let mut prev: Option<&JumpRecord> = None;
        for rec in arc.jumps.iter().filter(|r| r.kind.map() == map) {
            if let Some(p) = prev {
                let gap = rec.time.t - p.time.t;
                if gap < dwell - EVENT_TOL {
                    violations.push(ZenoViolation {
                        check,
                        at: rec.time,
                        detail: format!("{gap} s since the previous {map:?} jump (minimum {dwell} s)"),
                    });
                }
            }
            prev = Some(rec);
        }
    }

    NonZenoReport {
        passed: violations.is_empty(),
        max_jumps_at_one_time: max_jumps,
        max_jumps_time: max_time,
        min_flow_between_sequences: min_flow,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::step_lti;
    use crate::model::{FoSystem, JumpPolicy};
    use crate::scenarios::s1;

    fn run_s1(tau_g_comp: f64, t_end: f64) -> HybridArc {
        let mut sc = s1();
        sc.params.timers.tau_g_comp = tau_g_comp;
        sc.params.timers.ell = 3;
        sc.initial.tau_g = tau_g_comp;
        let sys = FoSystem::new(sc.params).unwrap();
        let horizon = Horizon {
            t_end,
            max_jumps: 1000,
        };
        simulate(&sys, &sc.initial, JumpPolicy::default(), horizon, 0.01).unwrap()
    }

    #[test]
    fn next_event_examples() {
        assert_eq!(next_event(1.0, 0.25, -1.0, -1.0).unwrap(), (0.25, Event::G));
        assert_eq!(next_event(0.5, 0.5, -1.0, -1.0).unwrap(), (0.5, Event::Both));
        assert_eq!(next_event(1.0, 0.3, -0.5, -1.0).unwrap(), (0.3, Event::G));
        assert_eq!(next_event(0.2, 0.3, -1.0, -1.0).unwrap(), (0.2, Event::C));
        assert!(matches!(next_event(1.0, 1.0, 0.0, -1.0), Err(HybridError::NonNegativeRate { .. })));
    }

    #[test]
    fn s1_schedule() {
        let arc = run_s1(0.25, 1.0);
        let times: Vec<(f64, &str)> = arc.jumps.iter().map(|r| (r.time.t, r.kind.label())).collect();
        assert_eq!(
            times,
            vec![(0.25, "G1"), (0.5, "G1"), (0.75, "G1"), (1.0, "G3a"), (1.0, "G3b")]
        );
        assert_eq!(arc.final_time(), HybridTime::new(1.0, 5));
        let stats = jump_stats(&arc).unwrap();
        assert_eq!(stats.alpha, vec![4]);
        assert_eq!(stats.alpha_bar, vec![0, 4]);
        assert_eq!(stats.input_changes, vec![5]);
    }

    #[test]
    fn s1_two_periods() {
        let stats = jump_stats(&run_s1(0.25, 2.0)).unwrap();
        assert_eq!(stats.alpha, vec![4, 4]);
        assert_eq!(stats.alpha_bar, vec![0, 4, 8]);
    }

    #[test]
    fn s1_slower_gradient() {
        let arc = run_s1(0.3, 1.0);
        let kinds: Vec<&str> = arc.jumps.iter().map(|r| r.kind.label()).collect();
        assert_eq!(kinds, vec!["G1", "G1", "G1", "G2"]);
        for (rec, want) in arc.jumps.iter().zip([0.3, 0.6, 0.9, 1.0]) {
            assert!((rec.time.t - want).abs() < 1e-12, "{} vs {want}", rec.time.t);
        }
        assert_eq!(jump_stats(&arc).unwrap().alpha, vec![3]);
    }

    #[test]
    fn zero_horizon() {
        let sc = s1();
        let sys = FoSystem::new(sc.params).unwrap();
        let arc = simulate(
            &sys,
            &sc.initial,
            JumpPolicy::default(),
            Horizon { t_end: 0.0, max_jumps: 0 },
            0.01,
        )
        .unwrap();
        assert_eq!(arc.segments.len(), 1);
        assert_eq!(arc.segments[0].samples.len(), 1);
        assert!(arc.jumps.is_empty());
        let stats = jump_stats(&arc).unwrap();
        assert!(stats.alpha.is_empty());
        assert_eq!(stats.alpha_bar, vec![0]);
        assert!(check_non_zeno(&arc).passed);
    }

    #[test]
    fn domain_structure() {
        let arc = run_s1(0.25, 3.0);
        assert_eq!(arc.segments[0].t_start, 0.0);
        for (k, w) in arc.segments.windows(2).enumerate() {
            assert_eq!(w[0].t_end, w[1].t_start);
            assert_eq!(w[1].j, w[0].j + 1);
            assert_eq!(arc.jumps[k].time, HybridTime::new(w[0].t_end, w[0].j));
            assert_eq!(&arc.jumps[k].state_before, w[0].end());
            assert_eq!(&arc.jumps[k].state_after, w[1].start());
        }
        for seg in &arc.segments {
            assert_eq!(seg.samples[0].t, seg.t_start);
            assert_eq!(seg.samples.last().unwrap().t, seg.t_end);
            if seg.duration() > 0.0 {
                assert!(!seg.start().in_jump_set());
            }
        }
    }

    #[test]
    fn lookup() {
        let arc = run_s1(0.25, 1.0);
        let seg = &arc.segments[1];
        let stored = &seg.samples[3];
        assert_eq!(&arc_lookup(&arc, HybridTime::new(stored.t, 1)).unwrap(), &stored.state);
        assert_eq!(&arc_lookup(&arc, HybridTime::new(0.25, 1)).unwrap(), seg.start());
        assert_eq!(&arc_lookup(&arc, HybridTime::new(0.25, 0)).unwrap(), arc.segments[0].end());

        let t = 0.305;
        let got = arc_lookup(&arc, HybridTime::new(t, 1)).unwrap();
        let sc = s1();
        let exact = step_lti(&sc.params.plant.a, &sc.params.plant.b, &seg.start().x, &seg.start().u, t - 0.25).unwrap();
        assert!((got.x[0] - exact[0]).abs() < 1e-6);
        assert!((got.tau_g - 0.195).abs() < 1e-12);

        assert!(arc_lookup(&arc, HybridTime::new(0.6, 1)).is_err());
        assert!(arc_lookup(&arc, HybridTime::new(0.1, 9)).is_err());
    }

    #[test]
    fn s1_is_non_zeno() {
        let report = check_non_zeno(&run_s1(0.25, 5.0));
        assert!(report.passed, "{:?}", report.violations);
        assert_eq!(report.max_jumps_at_one_time, 2);
        assert_eq!(report.max_jumps_time, Some(1.0));
        assert_eq!(report.min_flow_between_sequences, Some(0.25));
    }

    #[test]
    fn deterministic() {
        let sc = s1();
        let sys = FoSystem::new(sc.params).unwrap();
        let policy = JumpPolicy {
            tau_c_reset: crate::model::TauCReset::UniformRandom,
            case3_order: crate::model::Case3Order::Random,
            seed: 9,
        };
        let h = Horizon { t_end: 4.0, max_jumps: 100 };
        let a = simulate(&sys, &sc.initial, policy, h, 0.05).unwrap();
        let b = simulate(&sys, &sc.initial, policy, h, 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jump_cap_stops_but_completes_pair() {
        let sc = s1();
        let sys = FoSystem::new(sc.params).unwrap();
        let h = Horizon { t_end: 10.0, max_jumps: 4 };
        let arc = simulate(&sys, &sc.initial, JumpPolicy::default(), h, 0.01).unwrap();
        assert_eq!(arc.jumps.len(), 5);
        assert_eq!(arc.final_time(), HybridTime::new(1.0, 5));
    }
}
