//! Structured perturbations of the feedback-optimization system and the
//! `(τ, ε)`-closeness distance between hybrid arcs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hybrid::{arc_lookup, simulate, HybridArc, HybridError, HybridTime, Horizon, Segment};
use crate::linalg::{self, Matrix};
use crate::model::{FoSystem, JumpPolicy, ModelError, ModelParams, State};

/// Offsets to the plant matrices, output gain, timer rates and timer resets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    #[serde(rename = "A_hat")]
    pub a_hat: Matrix,
    #[serde(rename = "B_hat")]
    pub b_hat: Matrix,
    #[serde(rename = "H_hat")]
    pub h_hat: Matrix,
    /// Timer rates become `-1 + kappa`.
    pub kappa_c: f64,
    pub kappa_g: f64,
    pub theta_g_comp: f64,
    pub theta_c_min: f64,
    pub theta_c_max: f64,
}

impl Perturbation {
    pub fn zero(n: usize, m: usize, p: usize) -> Self {
        Self {
            a_hat: Matrix::zeros(n, n),
            b_hat: Matrix::zeros(n, m),
            h_hat: Matrix::zeros(p, m),
            kappa_c: 0.0,
            kappa_g: 0.0,
            theta_g_comp: 0.0,
            theta_c_min: 0.0,
            theta_c_max: 0.0,
        }
    }

    pub fn scaled(&self, delta: f64) -> Self {
        Self {
            a_hat: self.a_hat.scale(delta),
            b_hat: self.b_hat.scale(delta),
            h_hat: self.h_hat.scale(delta),
            kappa_c: delta * self.kappa_c,
            kappa_g: delta * self.kappa_g,
            theta_g_comp: delta * self.theta_g_comp,
            theta_c_min: delta * self.theta_c_min,
            theta_c_max: delta * self.theta_c_max,
        }
    }

    /// Checks the offsets against the nominal parameters.
    pub fn check(&self, params: &ModelParams) -> Result<(), ModelError> {
        let (n, m, p) = (params.plant.n(), params.plant.m(), params.plant.p());
        for (what, mat, rows, cols) in [
            ("A_hat", &self.a_hat, n, n),
            ("B_hat", &self.b_hat, n, m),
            ("H_hat", &self.h_hat, p, m),
        ] {
            if mat.shape() != (rows, cols) {
                return Err(ModelError::Invalid(format!(
                    "{what} has shape {:?}, expected ({rows}, {cols})",
                    mat.shape()
                )));
            }
        }
        let t = params.timers;
        let problems = [
            (self.kappa_c < 1.0, format!("kappa_c = {} must be below 1", self.kappa_c)),
            (self.kappa_g < 1.0, format!("kappa_g = {} must be below 1", self.kappa_g)),
            (
                t.tau_g_comp + self.theta_g_comp > 0.0,
                format!("tau_g_comp + theta_g_comp = {} must be positive", t.tau_g_comp + self.theta_g_comp),
            ),
            (
                0.0 < t.tau_c_min + self.theta_c_min && t.tau_c_min + self.theta_c_min <= t.tau_c_max + self.theta_c_max,
                format!(
                    "reset interval [{}, {}] must be nonempty and positive",
                    t.tau_c_min + self.theta_c_min,
                    t.tau_c_max + self.theta_c_max
                ),
            ),
        ];
        match problems.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ModelError::Invalid(msg)),
            None => Ok(()),
        }
    }
}

/// Size of the perturbation at `state`: the largest of the timer offsets,
/// rate offsets and `|Â x|`, `|B̂ u|`, `|Ĥ u|`.
pub fn iota_magnitude(pert: &Perturbation, state: &State) -> Result<f64, ModelError> {
    let terms = [
        pert.theta_g_comp,
        linalg::norm2(&pert.a_hat.matvec(&state.x)?),
        linalg::norm2(&pert.b_hat.matvec(&state.u)?),
        linalg::norm2(&pert.h_hat.matvec(&state.u)?),
        pert.kappa_c,
        pert.kappa_g,
        pert.theta_c_min,
        pert.theta_c_max,
    ];
    Ok(terms.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// The system with every offset scaled by `delta`.
pub fn perturbed_model(params: &ModelParams, pert: &Perturbation, delta: f64) -> Result<FoSystem, ModelError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ModelError::Invalid(format!("delta must be non-negative, got {delta}")));
    }
    let scaled = pert.scaled(delta);
    scaled.check(params)?;
    let mut sys = FoSystem::new(params.clone())?;
    let t = params.timers;
    sys.a_flow = params.plant.a.add(&scaled.a_hat)?;
    sys.b_flow = params.plant.b.add(&scaled.b_hat)?;
    sys.sample_gain = sys.gain.add(&scaled.h_hat)?;
    sys.rate_c = -1.0 + scaled.kappa_c;
    sys.rate_g = -1.0 + scaled.kappa_g;
    sys.tau_g_reset = t.tau_g_comp + scaled.theta_g_comp;
    sys.tau_c_reset = (t.tau_c_min + scaled.theta_c_min, t.tau_c_max + scaled.theta_c_max);
    sys.tau_c_bound = t.tau_c_max + scaled.theta_c_max;
    sys.tau_g_bound = t.tau_g_comp + scaled.theta_g_comp;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Arc (1 or 2) whose sample is worst matched.
    pub arc: u8,
    pub at: HybridTime,
    /// Best partner in the other arc, when its segment exists.
    pub partner: Option<HybridTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessResult {
    pub epsilon: f64,
    pub tau: f64,
    pub witness: Option<Witness>,
    /// Some arc ends before reaching `t + j = tau`.
    pub truncated: bool,
}

fn sup_dist(a: &State, b: &State) -> f64 {
    linalg::norm_inf(&linalg::sub(&a.flatten(), &b.flatten()))
}

/// Smallest `max(|t - s|, |ζ - ζ'|∞)` over the stored samples of `other`
/// and the interpolated state at the same time.
fn best_match(t: f64, state: &State, other: &HybridArc, seg: &Segment) -> (f64, HybridTime) {
    let mut best = (f64::INFINITY, HybridTime::new(seg.t_start, seg.j));
    for s in &seg.samples {
        let e = (t - s.t).abs().max(sup_dist(state, &s.state));
        if e < best.0 {
            best = (e, HybridTime::new(s.t, seg.j));
        }
    }
    let s = t.clamp(seg.t_start, seg.t_end);
    if let Ok(interp) = arc_lookup(other, HybridTime::new(s, seg.j)) {
        let e = (t - s).abs().max(sup_dist(state, &interp));
        if e < best.0 {
            best = (e, HybridTime::new(s, seg.j));
        }
    }
    best
}

fn directed(from: &HybridArc, to: &HybridArc, tau: f64, label: u8) -> (f64, Option<Witness>) {
    let mut worst = (0.0, None);
    for (at, state) in from.points().filter(|(at, _)| at.t + at.j as f64 <= tau) {
        let (e, partner) = match to.segment(at.j) {
            Some(seg) => {
                let (e, p) = best_match(at.t, state, to, seg);
                (e, Some(p))
            }
            None => (f64::INFINITY, None),
        };
        if e > worst.0 || worst.1.is_none() && e == f64::INFINITY {
            worst = (e, Some(Witness { arc: label, at, partner }));
        }
    }
    worst
}

fn covers(arc: &HybridArc, tau: f64) -> bool {
    let end = arc.final_time();
    end.t + end.j as f64 >= tau
}

/// Smallest `ε` for which the two arcs are `(τ, ε)`-close, measured on
/// stored samples with `t + j ≤ τ` in both directions.
pub fn closeness(arc1: &HybridArc, arc2: &HybridArc, tau: f64) -> ClosenessResult {
    let (e12, w12) = directed(arc1, arc2, tau, 1);
    let (e21, w21) = directed(arc2, arc1, tau, 2);
    let (epsilon, witness) = if e21 > e12 { (e21, w21) } else { (e12, w12) };
    ClosenessResult {
        epsilon,
        tau,
        witness: if epsilon > 0.0 { witness } else { None },
        truncated: !covers(arc1, tau) || !covers(arc2, tau),
    }
}

/// Horizon whose arcs cover every hybrid time with `t + j ≤ tau`.
pub fn closeness_horizon(tau: f64) -> Horizon {
    Horizon {
        t_end: tau,
        max_jumps: tau.ceil() as usize + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub epsilon: f64,
    pub witness: Option<Witness>,
    /// Perturbation size at the initial state.
    pub iota: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub tau: f64,
    pub rows: Vec<SweepRow>,
    /// `ε` does not increase as `δ` decreases.
    pub nonincreasing: bool,
    /// Kendall rank correlation between `δ` and `ε`; +1 for a perfectly monotone trend.
    pub kendall_tau: f64,
}

/// Kendall's tau-a between two equally long sequences.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 1.0;
    }
    let mut score = 0.0;
    for i in 0..n {
        for k in (i + 1)..n {
            score += ((xs[i] - xs[k]) * (ys[i] - ys[k])).signum() * ((ys[i] - ys[k]) != 0.0) as u8 as f64;
        }
    }
    score / (n * (n - 1) / 2) as f64
}

/// Simulates the nominal system and each `δ`-scaled perturbation from the
/// same initial state with the same policy and seed, and measures closeness.
pub fn robustness_sweep(
    params: &ModelParams,
    initial: &State,
    pert: &Perturbation,
    deltas: &[f64],
    tau: f64,
    policy: JumpPolicy,
    sample_dt: f64,
) -> Result<SweepResult, HybridError> {
    let horizon = closeness_horizon(tau);
    let nominal = simulate(&FoSystem::new(params.clone())?, initial, policy, horizon, sample_dt)?;
    let rows = deltas
        .par_iter()
        .map(|&delta| -> Result<SweepRow, HybridError> {
            let sys = perturbed_model(params, pert, delta)?;
            let arc = simulate(&sys, initial, policy, horizon, sample_dt)?;
            let c = closeness(&nominal, &arc, tau);
            Ok(SweepRow {
                delta,
                epsilon: c.epsilon,
                witness: c.witness,
                iota: iota_magnitude(&pert.scaled(delta), initial)?,
                truncated: c.truncated,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<&SweepRow> = rows.iter().collect();
    order.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let nonincreasing = order.windows(2).all(|w| w[1].epsilon <= w[0].epsilon);
    let ds: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    Ok(SweepResult {
        tau,
        nonincreasing,
        kendall_tau: kendall_tau(&ds, &es),
        rows,
    })
}
