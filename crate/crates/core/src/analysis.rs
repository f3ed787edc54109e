//! Optimal steady state, per-sample fixed points, stability constants,
//! convergence-bound evaluation and trajectory self-checks.

use serde::{Deserialize, Serialize};

use crate::hybrid::{jump_stats, HybridArc, HybridError, HybridTime, JumpMap};
use crate::linalg::{self, eig_general, eig_sym, mat_exp, solve, spectral_norm, LtiStep, Matrix, Vector};
use crate::model::{contraction_factor, curvature, InputSet, ModelError, ModelParams, State, Timers};

pub type Result<T> = std::result::Result<T, ModelError>;

const PGD_MAX_ITERS: usize = 200_000;
const FIXED_POINT_TOL: f64 = 1e-12;

/// Projected gradient descent on `½ uᵀ P u + cᵀ u` over `set`, run with the
/// stepsize `2 / (λ_min(P) + λ_max(P))` until the step is below `FIXED_POINT_TOL`.
fn minimize_quadratic(hess: &Matrix, lin: &[f64], set: &InputSet, start: Vector) -> Result<Vector> {
    let ev = eig_sym(hess)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(ModelError::Invalid(format!("quadratic is not strongly convex (lambda_min = {lo})")));
    }
    let step = 2.0 / (lo + hi);
    let mut u = set.project(&start);
    for _ in 0..PGD_MAX_ITERS {
        let g = linalg::add(&hess.matvec(&u)?, lin);
        let next = set.project(&linalg::axpy(&u, -step, &g));
        let moved = linalg::dist2(&next, &u);
        u = next;
        if moved <= FIXED_POINT_TOL * linalg::norm2(&u).max(1.0) {
            return Ok(u);
        }
    }
    Err(ModelError::Invalid(format!(
        "projected gradient did not converge in {PGD_MAX_ITERS} iterations"
    )))
}

/// `|u - Π_U[u - γ g(u)]|` for the quadratic gradient `g(u) = P u + c`.
fn fixed_point_residual(hess: &Matrix, lin: &[f64], set: &InputSet, gamma: f64, u: &[f64]) -> Result<f64> {
    let g = linalg::add(&hess.matvec(u)?, lin);
    Ok(linalg::dist2(u, &set.project(&linalg::axpy(u, -gamma, &g))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub u_tilde: Vector,
    pub y_tilde: Vector,
    pub x_tilde: Vector,
    /// Projected-gradient fixed-point residual at `u_tilde`, evaluated with the model stepsize.
    pub residual: f64,
}

/// Minimizer over `U` of `Φ(u, H u + d)` and the matching steady state.
pub fn solve_optimal(params: &ModelParams) -> Result<Optimum> {
    let h = params.gain()?;
    let obj = &params.objective;
    let hty = h.transpose().matmul(&obj.q_y)?;
    let hess = obj.q_u.add(&hty.matmul(&h)?)?;
    let hess = hess.add(&hess.transpose())?.scale(0.5);
    let offset = linalg::sub(&params.plant.d, &obj.y_hat);
    let lin = hty.matvec(&offset)?;
    let u = minimize_quadratic(&hess, &lin, &params.input_set, vec![0.0; hess.rows()])?;
    let residual = fixed_point_residual(&hess, &lin, &params.input_set, obj.gamma, &u)?;
    let y_tilde = linalg::add(&h.matvec(&u)?, &params.plant.d);
    let x_tilde = linalg::scale(&linalg::solve_vec(&params.plant.a, &params.plant.b.matvec(&u)?)?, -1.0);
    Ok(Optimum {
        u_tilde: u,
        y_tilde,
        x_tilde,
        residual,
    })
}

/// How the per-sample target `z*` of the optimizer is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointReading {
    /// Fixed point of the update law the optimizer actually runs.
    #[default]
    Gradient,
    /// Minimizer of `Φ(·, y_s)` with the sample frozen, whose gradient is `Q_u u` alone.
    LiteralArgmin,
}

/// Fixed point `z* = Π_U[z* - γ (Q_u z* + Hᵀ Q_y (y_s - ŷ))]`.
pub fn fixed_point_z(y_s: &[f64], params: &ModelParams) -> Result<Vector> {
    fixed_point_z_with(y_s, params, FixedPointReading::Gradient)
}

pub fn fixed_point_z_with(y_s: &[f64], params: &ModelParams, reading: FixedPointReading) -> Result<Vector> {
    let obj = &params.objective;
    let m = obj.q_u.rows();
    let lin = match reading {
        FixedPointReading::Gradient => {
            let h = params.gain()?;
            h.transpose().matmul(&obj.q_y)?.matvec(&linalg::sub(y_s, &obj.y_hat))?
        }
        FixedPointReading::LiteralArgmin => vec![0.0; m],
    };
    let hess = obj.q_u.add(&obj.q_u.transpose())?.scale(0.5);
    minimize_quadratic(&hess, &lin, &params.input_set, vec![0.0; m])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub m_hat: f64,
    /// `sup_t |e^{At}|₂ e^{ρt}` over the grid, before the margin.
    pub sup: f64,
    pub argmax_t: f64,
    pub horizon: f64,
    pub notes: Vec<String>,
}

const M_GRID: usize = 2000;
const M_MARGIN: f64 = 0.05;

/// Overshoot constant `M̂` with `|e^{At}|₂ ≤ M̂ e^{-ρt}`, estimated on a grid
/// over `[0, 10/ρ]` with a 5% margin.
#[allow(non_snake_case)]
pub fn estimate_M(a: &Matrix, rho: f64) -> Result<MEstimate> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ModelError::Invalid(format!("rho must be positive, got {rho}")));
    }
    let horizon = 10.0 / rho;
    let dt = horizon / M_GRID as f64;
    let step = mat_exp(a, dt)?;
    let mut e = Matrix::identity(a.rows());
    let (mut sup, mut argmax_t) = (1.0, 0.0);
    for k in 1..=M_GRID {
        e = e.matmul(&step)?;
        let t = k as f64 * dt;
        let v = spectral_norm(&e)? * (rho * t).exp();
        if v > sup {
            sup = v;
            argmax_t = t;
        }
    }
    let mut notes = Vec::new();
    if argmax_t >= horizon - dt {
        notes.push(format!(
            "supremum attained at the grid end t = {horizon:.4}; the estimate may be low (defective or nearly defective A)"
        ));
    }
    let fro2 = a.norm_fro().powi(2);
    if fro2 > 0.0 {
        let comm = a.matmul(&a.transpose())?.sub(&a.transpose().matmul(a)?)?;
        let departure = comm.norm_fro() / fro2;
        if departure > 0.5 {
            notes.push(format!("A is strongly non-normal (|AAᵀ - AᵀA|_F / |A|_F² = {departure:.3})"));
        }
    }
    Ok(MEstimate {
        m_hat: sup.max(1.0) * (1.0 + M_MARGIN),
        sup,
        argmax_t,
        horizon,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub rho: f64,
    pub m_hat: f64,
    pub lambda_min_qu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub q: f64,
    pub d_u: f64,
    pub norm_b: f64,
    pub r: f64,
    pub u_tilde: Vector,
    pub y_tilde: Vector,
    pub x_tilde: Vector,
    /// Grid estimate backing `m_hat`; absent when `M` was overridden.
    pub m_estimate: Option<MEstimate>,
}

/// `r = M ‖B‖ d_U / ρ · (2 - e^{-ρ τ_c,min} + q^{ℓ/2})`.
pub fn radius(m: f64, norm_b: f64, d_u: f64, rho: f64, q: f64, timers: &Timers) -> f64 {
    m * norm_b * d_u / rho * (2.0 - (-rho * timers.tau_c_min).exp() + q.powf(timers.ell as f64 / 2.0))
}

pub fn constants(params: &ModelParams) -> Result<Constants> {
    let a = &params.plant.a;
    let rho = match params.overrides.rho {
        Some(r) => r,
        None => eig_general(a)?.min_abs_real(),
    };
    let (m_hat, m_estimate) = match params.overrides.m {
        Some(m) => (m, None),
        None => {
            let est = estimate_M(a, rho)?;
            (est.m_hat, Some(est))
        }
    };
    let h = params.gain()?;
    let (lambda_min_qu, l) = curvature(&params.objective, &h)?;
    let q = contraction_factor(params.objective.gamma, lambda_min_qu, l);
    let d_u = params.input_set.diameter();
    let norm_b = spectral_norm(&params.plant.b)?;
    let r = radius(m_hat, norm_b, d_u, rho, q, &params.timers) * params.overrides.r_scale.unwrap_or(1.0);
    let opt = solve_optimal(params)?;
    Ok(Constants {
        rho,
        m_hat,
        lambda_min_qu,
        l,
        q,
        d_u,
        norm_b,
        r,
        u_tilde: opt.u_tilde,
        y_tilde: opt.y_tilde,
        x_tilde: opt.x_tilde,
        m_estimate,
    })
}

/// Distance of the plant state from the ball `B_r(x̃)`. The remaining factors
/// of the target set contain their components by construction.
#[allow(non_snake_case)]
pub fn dist_to_A(state: &State, c: &Constants) -> f64 {
    (linalg::dist2(&state.x, &c.x_tilde) - c.r).max(0.0)
}

fn bound(t: f64, init_dist: f64, c: &Constants, timers: &Timers, middle_exp: f64) -> f64 {
    let decay = (-c.rho * t).exp();
    let qh = c.q.powf(timers.ell as f64 / 2.0);
    let gain = c.norm_b * c.d_u / c.rho;
    c.m_hat * decay * init_dist + c.m_hat * c.m_hat * gain * (2.0 - middle_exp + qh) * decay
        - c.m_hat * gain * (1.0 + qh * (c.rho * timers.tau_c_min).exp()) * decay
}

/// Right-hand side of the convergence bound for strictly initialized solutions.
pub fn bound_thm1(t: f64, init_dist: f64, c: &Constants, timers: &Timers) -> f64 {
    bound(t, init_dist, c, timers, (-c.rho * timers.tau_c_max).exp())
}

/// Right-hand side of the convergence bound for arbitrary initial states.
pub fn bound_thm2(t: f64, init_dist: f64, c: &Constants, timers: &Timers) -> f64 {
    bound(t, init_dist, c, timers, (-2.0 * c.rho * timers.tau_c_max).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Thm1,
    Thm2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub t: f64,
    pub j: usize,
    pub lhs: f64,
    pub rhs_raw: f64,
    /// `rhs_raw` clipped at zero.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub samples: Vec<BoundSample>,
    pub tolerance: f64,
    /// `max(lhs - rhs)` over all samples.
    pub max_violation: f64,
    pub violations: usize,
    pub first_violation: Option<HybridTime>,
    /// First time the distance to the target set is at most `1e-6`.
    pub first_entry: Option<f64>,
    pub final_lhs: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const BOUND_TOL: f64 = 1e-9;
pub const ENTRY_TOL: f64 = 1e-6;

/// Compares the distance to the target set with the bound at every stored sample.
pub fn check_bound(arc: &HybridArc, c: &Constants, timers: &Timers, which: Theorem) -> BoundReport {
    let f = match which {
        Theorem::Thm1 => bound_thm1,
        Theorem::Thm2 => bound_thm2,
    };
    let init_dist = dist_to_A(arc.segments[0].start(), c);
    let mut report = BoundReport {
        theorem: which,
        samples: Vec::new(),
        tolerance: BOUND_TOL,
        max_violation: f64::NEG_INFINITY,
        violations: 0,
        first_violation: None,
        first_entry: None,
        final_lhs: 0.0,
    };
    for (at, state) in arc.points() {
        let lhs = dist_to_A(state, c);
        let rhs_raw = f(at.t, init_dist, c, timers);
        let rhs = rhs_raw.max(0.0);
        report.max_violation = report.max_violation.max(lhs - rhs);
        if lhs > rhs + BOUND_TOL {
            report.violations += 1;
            report.first_violation.get_or_insert(at);
        }
        if lhs <= ENTRY_TOL && report.first_entry.is_none() {
            report.first_entry = Some(at.t);
        }
        report.final_lhs = lhs;
        report.samples.push(BoundSample {
            t: at.t,
            j: at.j,
            lhs,
            rhs_raw,
            rhs,
        });
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub points: Vec<(HybridTime, Vector)>,
    pub max_deviation: f64,
}

/// Rebuilds `x` from `x(0,0)` and the logged input sequence alone:
/// `x(t) = e^{At} x0 + Σ_p e^{A(t - t_{p+1})} Γ(t_{p+1} - t_p) u_p + Γ(t - t_P) u_P`
/// with `Γ(Δ) = A^{-1}(e^{AΔ} - I) B`.
pub fn reconstruct_x(arc: &HybridArc, params: &ModelParams) -> std::result::Result<Reconstruction, HybridError> {
    jump_stats(arc)?;
    Ok(reconstruct_checked(arc, params)?)
}

fn reconstruct_checked(arc: &HybridArc, params: &ModelParams) -> Result<Reconstruction> {
    let (a, b) = (&params.plant.a, &params.plant.b);
    let x0 = arc.segments[0].start().x.clone();

    // Input periods: (start time, first jump index, input held).
    let mut periods: Vec<(f64, usize, Vector)> = vec![(0.0, 0, arc.segments[0].start().u.clone())];
    for rec in arc.jumps.iter().filter(|r| r.kind.map() == JumpMap::Input) {
        periods.push((rec.time.t, rec.time.j + 1, rec.state_after.u.clone()));
    }

    let forced = |u: &[f64], dt: f64| -> Result<Vector> {
        let growth = mat_exp(a, dt)?.sub(&Matrix::identity(a.rows()))?.matmul(b)?;
        Ok(solve(a, &growth)?.matvec(u)?)
    };

    // x at the start of each input period, from the closed-form sum over earlier periods.
    let mut starts: Vec<Vector> = Vec::with_capacity(periods.len());
    for (k, &(tk, _, _)) in periods.iter().enumerate() {
        let mut x = mat_exp(a, tk)?.matvec(&x0)?;
        for p in 0..k {
            let (tp, _, ref up) = periods[p];
            let tnext = periods[p + 1].0;
            let carried = mat_exp(a, tk - tnext)?.matvec(&forced(up, tnext - tp)?)?;
            x = linalg::add(&x, &carried);
        }
        starts.push(x);
    }

    let mut points = Vec::new();
    let mut max_dev: f64 = 0.0;
    for (at, state) in arc.points() {
        let k = periods.partition_point(|p| p.1 <= at.j) - 1;
        let (tk, _, ref uk) = periods[k];
        let dt = at.t - tk;
        let x = if dt == 0.0 {
            starts[k].clone()
        } else {
            LtiStep::new(a, b, dt)?.apply(&starts[k], uk)?
        };
        max_dev = max_dev.max(linalg::dist2(&x, &state.x));
        points.push((at, x));
    }
    Ok(Reconstruction {
        points,
        max_deviation: max_dev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRate {
    pub period: usize,
    pub steps: usize,
    pub z_star: Vector,
    /// `|z_1 - z*|`, distance after the first step of the period.
    pub first_dist: f64,
    pub last_dist: f64,
    /// `q^{(α-1)/2} |z_1 - z*|`.
    pub aggregate_bound: f64,
    pub aggregate_ok: bool,
    /// Largest `|z_{k+1} - z*|² - q |z_k - z*|²` over the period's steps.
    pub worst_step_margin: f64,
    pub steps_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub q: f64,
    pub periods: Vec<PeriodRate>,
    pub passed: bool,
}

pub const STEP_TOL: f64 = 1e-12;
pub const AGGREGATE_TOL: f64 = 1e-9;

/// Verifies the per-step and per-period contraction of the optimizer iterates.
pub fn rate_check(arc: &HybridArc, params: &ModelParams) -> std::result::Result<RateReport, HybridError> {
    let h = params.gain()?;
    let (mu, l) = curvature(&params.objective, &h)?;
    rate_check_with(arc, params, contraction_factor(params.objective.gamma, mu, l))
}

/// As [`rate_check`] with an explicit contraction factor.
pub fn rate_check_with(arc: &HybridArc, params: &ModelParams, q: f64) -> std::result::Result<RateReport, HybridError> {
    let mut periods = Vec::new();
    let mut current: Vec<(&State, &State)> = Vec::new();
    let mut flush = |steps: &mut Vec<(&State, &State)>| -> std::result::Result<(), HybridError> {
        if steps.is_empty() {
            return Ok(());
        }
        let z_star = fixed_point_z(&steps[0].0.y_s, params)?;
        let mut worst = f64::NEG_INFINITY;
        for (before, after) in steps.iter() {
            let d0 = linalg::dist2(&before.z, &z_star).powi(2);
            let d1 = linalg::dist2(&after.z, &z_star).powi(2);
            worst = worst.max(d1 - q * d0);
        }
        let first_dist = linalg::dist2(&steps[0].1.z, &z_star);
        let last_dist = linalg::dist2(&steps[steps.len() - 1].1.z, &z_star);
        let aggregate_bound = q.powf((steps.len() as f64 - 1.0) / 2.0) * first_dist;
        periods.push(PeriodRate {
            period: periods.len(),
            steps: steps.len(),
            z_star,
            first_dist,
            last_dist,
            aggregate_bound,
            aggregate_ok: last_dist <= aggregate_bound + AGGREGATE_TOL,
            worst_step_margin: worst,
            steps_ok: worst <= STEP_TOL,
        });
        steps.clear();
        Ok(())
    };
    for rec in &arc.jumps {
        match rec.kind.map() {
            JumpMap::Gradient => current.push((&rec.state_before, &rec.state_after)),
            JumpMap::Input => flush(&mut current)?,
        }
    }
    flush(&mut current)?;
    let passed = periods.iter().all(|p| p.aggregate_ok && p.steps_ok);
    Ok(RateReport { q, periods, passed })
}
