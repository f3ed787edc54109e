//! The feedback-optimization hybrid system: an LTI plant driven by inputs
//! that a projected-gradient optimizer computes from sampled outputs.
//!
//! The state is `ζ = (x, u, y_s, z, τ_c, τ_g)`. Both timers count down
//! during flows; when `τ_g` hits zero the optimizer takes one projected
//! gradient step (G1), when `τ_c` hits zero the latest iterate is applied as
//! the new input and a fresh output sample is taken (G2), and when both hit
//! zero together both maps run back to back (G3).

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{HybridSystem, JumpKind, JumpMap, JumpStep};
use crate::linalg::{self, eig_general, eig_sym, solve, LinalgError, LtiStep, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{map} precondition violated: {detail}")]
    Precondition { map: &'static str, detail: String },
    #[error("state is not in the jump set (tau_c = {tau_c}, tau_g = {tau_g})")]
    NotInJumpSet { tau_c: f64, tau_g: f64 },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { what, expected, got })
    }
}

/// `x' = A x + B u`, `y = C x + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "C")]
    pub c_out: Matrix,
    pub d: Vector,
}

impl Plant {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn p(&self) -> usize {
        self.c_out.rows()
    }
}

/// `Φ(u, y) = ½ uᵀQ_u u + ½ (y - ŷ)ᵀ Q_y (y - ŷ)` and the optimizer stepsize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    #[serde(rename = "Q_u")]
    pub q_u: Matrix,
    #[serde(rename = "Q_y")]
    pub q_y: Matrix,
    pub y_hat: Vector,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timers {
    pub tau_c_min: f64,
    pub tau_c_max: f64,
    pub tau_g_comp: f64,
    /// Guaranteed number of gradient steps per input period.
    pub ell: u32,
}

/// Compact convex set of admissible inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSet {
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
}

impl InputSet {
    pub fn dim(&self) -> usize {
        match self {
            InputSet::Box { lo, .. } => lo.len(),
            InputSet::Ball { center, .. } => center.len(),
        }
    }

    /// Euclidean projection.
    pub fn project(&self, v: &[f64]) -> Vector {
        match self {
            InputSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&x, (&l, &h))| x.max(l).min(h))
                .collect(),
            InputSet::Ball { center, radius } => {
                let off = linalg::sub(v, center);
                let dist = linalg::norm2(&off);
                if dist <= *radius {
                    v.to_vec()
                } else {
                    linalg::axpy(center, radius / dist, &off)
                }
            }
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            InputSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&x, (&l, &h))| x >= l - tol && x <= h + tol),
            InputSet::Ball { center, radius } => linalg::dist2(v, center) <= radius + tol,
        }
    }

    /// `max |u1 - u2|` over the set.
    pub fn diameter(&self) -> f64 {
        match self {
            InputSet::Box { lo, hi } => linalg::dist2(hi, lo),
            InputSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Empty-free, bounded and well-formed.
    pub fn is_valid(&self) -> bool {
        match self {
            InputSet::Box { lo, hi } => {
                lo.len() == hi.len()
                    && lo.iter().chain(hi).all(|v| v.is_finite())
                    && lo.iter().zip(hi).all(|(l, h)| l <= h)
            }
            InputSet::Ball { center, radius } => {
                center.iter().all(|v| v.is_finite()) && radius.is_finite() && *radius > 0.0
            }
        }
    }
}

/// Which input the G2 output sample is evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleWith {
    /// `y_s+ = H z + d`, the steady-state output of the input being applied.
    #[default]
    NewInput,
    /// `y_s+ = H u + d` with the pre-jump input.
    OldInput,
}

/// Optional replacements for derived quantities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<Matrix>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Multiplies the computed radius `r`. Only meant for negative controls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub plant: Plant,
    pub objective: Objective,
    pub timers: Timers,
    pub input_set: InputSet,
    #[serde(default)]
    pub sample_with: SampleWith,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ModelParams {
    /// Steady-state gain, honoring the `H` override.
    pub fn gain(&self) -> Result<Matrix> {
        match &self.overrides.h {
            Some(h) => Ok(h.clone()),
            None => steady_state_gain(&self.plant),
        }
    }

    /// State satisfying the strict initialization: `τ_g = τ_g,comp`, `z = u`,
    /// and `y_s = H u + d`. `tau_c` defaults to `τ_c,max`.
    pub fn strict_initial_state(&self, x0: Vector, u0: Vector, tau_c: Option<f64>) -> Result<State> {
        let h = self.gain()?;
        let y_s = linalg::add(&h.matvec(&u0)?, &self.plant.d);
        Ok(State {
            x: x0,
            z: u0.clone(),
            u: u0,
            y_s,
            tau_c: tau_c.unwrap_or(self.timers.tau_c_max),
            tau_g: self.timers.tau_g_comp,
        })
    }

    fn check_dimensions(&self) -> Result<()> {
        let (n, m, p) = (self.plant.n(), self.plant.m(), self.plant.p());
        check_dim("A columns", n, self.plant.a.cols())?;
        check_dim("B rows", n, self.plant.b.rows())?;
        check_dim("C columns", n, self.plant.c_out.cols())?;
        check_dim("d", p, self.plant.d.len())?;
        check_dim("Q_u rows", m, self.objective.q_u.rows())?;
        check_dim("Q_u columns", m, self.objective.q_u.cols())?;
        check_dim("Q_y rows", p, self.objective.q_y.rows())?;
        check_dim("Q_y columns", p, self.objective.q_y.cols())?;
        check_dim("y_hat", p, self.objective.y_hat.len())?;
        check_dim("input set", m, self.input_set.dim())?;
        if let InputSet::Box { hi, .. } = &self.input_set {
            check_dim("input box upper bound", m, hi.len())?;
        }
        if let Some(h) = &self.overrides.h {
            check_dim("H override rows", p, h.rows())?;
            check_dim("H override columns", m, h.cols())?;
        }
        Ok(())
    }

    fn check_state(&self, s: &State) -> Result<()> {
        check_dim("state x", self.plant.n(), s.x.len())?;
        check_dim("state u", self.plant.m(), s.u.len())?;
        check_dim("state y_s", self.plant.p(), s.y_s.len())?;
        check_dim("state z", self.plant.m(), s.z.len())?;
        Ok(())
    }
}

/// Hybrid state `ζ = (x, u, y_s, z, τ_c, τ_g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: Vector,
    pub u: Vector,
    pub y_s: Vector,
    pub z: Vector,
    pub tau_c: f64,
    pub tau_g: f64,
}

impl State {
    /// All components stacked in `(x, u, y_s, z, τ_c, τ_g)` order.
    pub fn flatten(&self) -> Vector {
        let mut v = Vec::with_capacity(self.x.len() + 2 * self.u.len() + self.y_s.len() + 2);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.y_s);
        v.extend_from_slice(&self.z);
        v.push(self.tau_c);
        v.push(self.tau_g);
        v
    }

    pub fn in_jump_set(&self) -> bool {
        self.tau_c <= 0.0 || self.tau_g <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauCReset {
    Fixed(f64),
    UniformRandom,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case3Order {
    #[default]
    G1First,
    G2First,
    Random,
}

/// How the executor resolves the set-valued parts of the jump map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpPolicy {
    pub tau_c_reset: TauCReset,
    #[serde(default)]
    pub case3_order: Case3Order,
    #[serde(default)]
    pub seed: u64,
}

impl Default for JumpPolicy {
    fn default() -> Self {
        Self {
            tau_c_reset: TauCReset::Max,
            case3_order: Case3Order::G1First,
            seed: 0,
        }
    }
}

/// Policy plus the RNG stream it draws from. Owned by one simulation run.
#[derive(Debug, Clone)]
pub struct JumpSelector {
    policy: JumpPolicy,
    rng: ChaCha8Rng,
}

impl JumpSelector {
    pub fn new(policy: JumpPolicy) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            policy,
        }
    }

    pub fn policy(&self) -> &JumpPolicy {
        &self.policy
    }

    /// Picks a reset for `τ_c` in `[lo, hi]`. `Fixed` values are given in the
    /// nominal interval and mapped to the same relative position in `[lo, hi]`,
    /// so nominal and perturbed runs make matching selections.
    pub fn tau_c_reset(&mut self, lo: f64, hi: f64, nominal: (f64, f64)) -> f64 {
        let frac = match self.policy.tau_c_reset {
            TauCReset::Min => 0.0,
            TauCReset::Max => 1.0,
            TauCReset::UniformRandom => self.rng.gen::<f64>(),
            TauCReset::Fixed(v) => {
                let width = nominal.1 - nominal.0;
                if width > 0.0 {
                    ((v - nominal.0) / width).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            }
        };
        if frac == 1.0 {
            hi
        } else {
            lo + frac * (hi - lo)
        }
    }

    pub fn gradient_first(&mut self) -> bool {
        match self.policy.case3_order {
            Case3Order::G1First => true,
            Case3Order::G2First => false,
            Case3Order::Random => self.rng.gen::<bool>(),
        }
    }
}

/// `H = -C A^{-1} B`.
pub fn steady_state_gain(plant: &Plant) -> Result<Matrix> {
    check_dim("B rows", plant.n(), plant.b.rows())?;
    check_dim("C columns", plant.n(), plant.c_out.cols())?;
    let ainv_b = solve(&plant.a, &plant.b)?;
    Ok(plant.c_out.matmul(&ainv_b)?.scale(-1.0))
}

/// Objective value `Φ(u, y_s)`.
pub fn phi(u: &[f64], y_s: &[f64], obj: &Objective) -> Result<f64> {
    check_dim("u", obj.q_u.rows(), u.len())?;
    check_dim("y_s", obj.q_y.rows(), y_s.len())?;
    let e = linalg::sub(y_s, &obj.y_hat);
    Ok(0.5 * linalg::dot(u, &obj.q_u.matvec(u)?) + 0.5 * linalg::dot(&e, &obj.q_y.matvec(&e)?))
}

/// Gradient used by the optimizer: `Q_u z + Hᵀ Q_y (y_s - ŷ)`.
pub fn grad_u_phi(z: &[f64], y_s: &[f64], obj: &Objective, h: &Matrix) -> Result<Vector> {
    check_dim("z", obj.q_u.rows(), z.len())?;
    check_dim("y_s", obj.q_y.rows(), y_s.len())?;
    check_dim("H rows", y_s.len(), h.rows())?;
    check_dim("H columns", z.len(), h.cols())?;
    let e = linalg::sub(y_s, &obj.y_hat);
    let pull = h.transpose().matvec(&obj.q_y.matvec(&e)?)?;
    Ok(linalg::add(&obj.q_u.matvec(z)?, &pull))
}

/// `λ_min(Q_u)` and `L = λ_max(Q_u + Hᵀ Q_y H)`.
pub fn curvature(obj: &Objective, h: &Matrix) -> Result<(f64, f64)> {
    let mu = eig_sym(&obj.q_u)?.first().copied().unwrap_or(0.0);
    let hess = obj.q_u.add(&h.transpose().matmul(&obj.q_y)?.matmul(h)?)?;
    let hess = hess.add(&hess.transpose())?.scale(0.5);
    let l = eig_sym(&hess)?.last().copied().unwrap_or(0.0);
    Ok((mu, l))
}

/// `q = 1 - 2 γ λ_min(Q_u) + γ² L²`.
pub fn contraction_factor(gamma: f64, lambda_min_qu: f64, l: f64) -> f64 {
    1.0 - 2.0 * gamma * lambda_min_qu + gamma * gamma * l * l
}

/// Executable hybrid system built from [`ModelParams`].
///
/// The nominal system uses the parameters as given; the perturbed variants
/// built by [`crate::robustness`] swap in modified flow matrices, output
/// gain, timer rates and reset values.
#[derive(Debug, Clone)]
pub struct FoSystem {
    pub(crate) params: ModelParams,
    pub(crate) gain: Matrix,
    pub(crate) a_flow: Matrix,
    pub(crate) b_flow: Matrix,
    pub(crate) sample_gain: Matrix,
    pub(crate) rate_c: f64,
    pub(crate) rate_g: f64,
    pub(crate) tau_g_reset: f64,
    pub(crate) tau_c_reset: (f64, f64),
    pub(crate) tau_c_bound: f64,
    pub(crate) tau_g_bound: f64,
    steps: std::sync::Arc<std::sync::Mutex<Vec<LtiStep>>>,
}

const STEP_CACHE: usize = 64;

impl FoSystem {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.check_dimensions()?;
        let gain = params.gain()?;
        let t = params.timers;
        Ok(Self {
            a_flow: params.plant.a.clone(),
            b_flow: params.plant.b.clone(),
            sample_gain: gain.clone(),
            gain,
            rate_c: -1.0,
            rate_g: -1.0,
            tau_g_reset: t.tau_g_comp,
            tau_c_reset: (t.tau_c_min, t.tau_c_max),
            tau_c_bound: t.tau_c_max,
            tau_g_bound: t.tau_g_comp,
            params,
            steps: Default::default(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Steady-state gain used by the optimizer's gradient.
    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    /// Plant matrices driving the flow.
    pub fn flow_matrices(&self) -> (&Matrix, &Matrix) {
        (&self.a_flow, &self.b_flow)
    }

    /// Exact flow step for `x`, reusing cached discretizations of repeated step lengths.
    pub fn lti_step(&self, dt: f64) -> Result<LtiStep> {
        {
            let cache = self.steps.lock().expect("step cache poisoned");
            if let Some(s) = cache.iter().find(|s| s.dt.to_bits() == dt.to_bits()) {
                return Ok(s.clone());
            }
        }
        let step = LtiStep::new(&self.a_flow, &self.b_flow, dt)?;
        let mut cache = self.steps.lock().expect("step cache poisoned");
        if cache.len() >= STEP_CACHE {
            cache.remove(0);
        }
        cache.push(step.clone());
        Ok(step)
    }

    /// G1: one projected gradient step on `z`, `τ_g` reset.
    pub fn jump_g1(&self, s: &State) -> Result<State> {
        self.params.check_state(s)?;
        if s.tau_g != 0.0 {
            return Err(ModelError::Precondition {
                map: "G1",
                detail: format!("tau_g = {} (must be 0)", s.tau_g),
            });
        }
        let obj = &self.params.objective;
        let g = grad_u_phi(&s.z, &s.y_s, obj, &self.gain)?;
        let z = self.params.input_set.project(&linalg::axpy(&s.z, -obj.gamma, &g));
        Ok(State {
            z,
            tau_g: self.tau_g_reset,
            ..s.clone()
        })
    }

    /// G2: apply `z` as the input, sample the output, reset `τ_c`.
    pub fn jump_g2(&self, s: &State, selector: &mut JumpSelector) -> Result<State> {
        self.params.check_state(s)?;
        if s.tau_c != 0.0 {
            return Err(ModelError::Precondition {
                map: "G2",
                detail: format!("tau_c = {} (must be 0)", s.tau_c),
            });
        }
        let sampled_input = match self.params.sample_with {
            SampleWith::NewInput => &s.z,
            SampleWith::OldInput => &s.u,
        };
        let y_s = linalg::add(&self.sample_gain.matvec(sampled_input)?, &self.params.plant.d);
        let t = self.params.timers;
        let (lo, hi) = self.tau_c_reset;
        Ok(State {
            u: s.z.clone(),
            y_s,
            tau_c: selector.tau_c_reset(lo, hi, (t.tau_c_min, t.tau_c_max)),
            ..s.clone()
        })
    }

    /// Full jump map. When both timers are zero it yields two steps in policy order.
    pub fn jump(&self, s: &State, selector: &mut JumpSelector) -> Result<Vec<JumpStep>> {
        match (s.tau_c == 0.0, s.tau_g == 0.0) {
            (false, true) => Ok(vec![JumpStep {
                kind: JumpKind::G1,
                state: self.jump_g1(s)?,
            }]),
            (true, false) => Ok(vec![JumpStep {
                kind: JumpKind::G2,
                state: self.jump_g2(s, selector)?,
            }]),
            (true, true) => {
                let (first, mid) = if selector.gradient_first() {
                    (JumpMap::Gradient, self.jump_g1(s)?)
                } else {
                    (JumpMap::Input, self.jump_g2(s, selector)?)
                };
                let (second, end) = match first {
                    JumpMap::Gradient => (JumpMap::Input, self.jump_g2(&mid, selector)?),
                    JumpMap::Input => (JumpMap::Gradient, self.jump_g1(&mid)?),
                };
                Ok(vec![
                    JumpStep {
                        kind: JumpKind::G3First(first),
                        state: mid,
                    },
                    JumpStep {
                        kind: JumpKind::G3Second(second),
                        state: end,
                    },
                ])
            }
            (false, false) => Err(ModelError::NotInJumpSet {
                tau_c: s.tau_c,
                tau_g: s.tau_g,
            }),
        }
    }
}

impl HybridSystem for FoSystem {
    fn timer_rates(&self) -> (f64, f64) {
        (self.rate_c, self.rate_g)
    }

    fn in_flow_set(&self, s: &State) -> bool {
        (0.0..=self.tau_c_bound).contains(&s.tau_c) && (0.0..=self.tau_g_bound).contains(&s.tau_g)
    }

    fn min_dwell(&self) -> (f64, f64) {
        (
            self.tau_c_reset.0 / self.rate_c.abs(),
            self.tau_g_reset / self.rate_g.abs(),
        )
    }

    fn flow_x(&self, s: &State, dt: f64) -> Result<Vector> {
        if dt == 0.0 {
            return Ok(s.x.clone());
        }
        Ok(self.lti_step(dt)?.apply(&s.x, &s.u)?)
    }

    fn jump(&self, s: &State, selector: &mut JumpSelector) -> Result<Vec<JumpStep>> {
        FoSystem::jump(self, s, selector)
    }
}

/// Initialization regime for [`validate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// The initial state must satisfy the timer and iterate initialization.
    #[default]
    Strict,
    /// Any state in the flow or jump set.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub check: &'static str,
    pub status: Status,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub items: Vec<Diagnostic>,
    /// Contraction factor, when it could be computed.
    pub q: Option<f64>,
}

impl Diagnostics {
    fn push(&mut self, check: &'static str, ok: bool, fail_status: Status, message: String) {
        self.items.push(Diagnostic {
            check,
            status: if ok { Status::Pass } else { fail_status },
            message,
        });
    }

    pub fn is_ok(&self) -> bool {
        self.items.iter().all(|d| d.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Diagnostic> {
        self.items.iter().filter(|d| d.status == Status::Fail)
    }

    pub fn get(&self, check: &str) -> Option<&Diagnostic> {
        self.items.iter().find(|d| d.check == check)
    }

    /// True when every strict-initialization check passed.
    pub fn strict_init_ok(&self) -> bool {
        self.items
            .iter()
            .filter(|d| d.check.starts_with("init_"))
            .all(|d| d.status == Status::Pass)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.items {
            writeln!(f, "[{:?}] {}: {}", d.status, d.check, d.message)?;
        }
        Ok(())
    }
}

fn spd_check(diag: &mut Diagnostics, check: &'static str, name: &str, q: &Matrix) {
    match eig_sym(q) {
        Ok(ev) => {
            let min = ev.first().copied().unwrap_or(f64::NAN);
            diag.push(
                check,
                min > 0.0,
                Status::Fail,
                format!("{name} symmetric with lambda_min = {min:.6e} (must be positive definite)"),
            );
        }
        Err(e) => diag.push(check, false, Status::Fail, format!("{name}: {e}")),
    }
}

/// Checks every standing assumption and the initial condition.
pub fn validate(params: &ModelParams, z0: &State, mode: InitMode) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if let Err(e) = params.check_dimensions().and_then(|_| params.check_state(z0)) {
        diag.push("dimensions", false, Status::Fail, e.to_string());
        return diag;
    }
    diag.push("dimensions", true, Status::Fail, "consistent".into());

    let plant = &params.plant;
    match eig_general(&plant.a) {
        Ok(spectrum) => {
            let abscissa = spectrum.abscissa();
            diag.push(
                "plant_hurwitz",
                abscissa < 0.0,
                Status::Fail,
                format!("max Re(lambda(A)) = {abscissa:.6e} (must be negative)"),
            );
        }
        Err(e) => diag.push("plant_hurwitz", false, Status::Fail, format!("eigenvalues of A: {e}")),
    }

    let obj = &params.objective;
    spd_check(&mut diag, "q_u_spd", "Q_u", &obj.q_u);
    spd_check(&mut diag, "q_y_spd", "Q_y", &obj.q_y);

    diag.push(
        "input_set",
        params.input_set.is_valid(),
        Status::Fail,
        format!("{:?} must be nonempty, bounded and finite", params.input_set),
    );

    let t = params.timers;
    let timers_ok = t.tau_c_min > 0.0 && t.tau_c_min <= t.tau_c_max && t.tau_g_comp > 0.0 && t.ell >= 1;
    diag.push(
        "timers",
        timers_ok,
        Status::Fail,
        format!(
            "need 0 < tau_c_min <= tau_c_max, tau_g_comp > 0, ell >= 1; got {:?}",
            t
        ),
    );
    let budget = t.ell as f64 * t.tau_g_comp;
    diag.push(
        "timescale",
        budget <= t.tau_c_min,
        Status::Fail,
        format!(
            "ell * tau_g_comp = {budget} must not exceed tau_c_min = {} (at least ell gradient steps per input)",
            t.tau_c_min
        ),
    );

    match params.gain().and_then(|h| curvature(obj, &h)) {
        Ok((mu, l)) => {
            let upper = 2.0 / (mu + l);
            diag.push(
                "stepsize",
                obj.gamma > 0.0 && obj.gamma < upper,
                Status::Fail,
                format!(
                    "stepsize condition gamma in (0, 2/(lambda_min(Q_u) + L)) = (0, {upper:.6}); gamma = {}, L = {l:.6}",
                    obj.gamma
                ),
            );
            let q = contraction_factor(obj.gamma, mu, l);
            diag.q = Some(q);
            diag.push(
                "contraction",
                q > 0.0 && q < 1.0,
                Status::Fail,
                format!("q = 1 - 2 gamma lambda_min(Q_u) + gamma^2 L^2 = {q:.6} (must lie in (0, 1))"),
            );
        }
        Err(e) => diag.push("stepsize", false, Status::Fail, format!("steady-state gain: {e}")),
    }

    let in_c_or_d = (0.0..=t.tau_c_max).contains(&z0.tau_c) && (0.0..=t.tau_g_comp).contains(&z0.tau_g);
    diag.push(
        "initial_state",
        in_c_or_d,
        Status::Fail,
        format!(
            "tau_c(0,0) = {} in [0, {}], tau_g(0,0) = {} in [0, {}]",
            z0.tau_c, t.tau_c_max, z0.tau_g, t.tau_g_comp
        ),
    );

    let strict = match mode {
        InitMode::Strict => Status::Fail,
        InitMode::Global => Status::Warn,
    };
    diag.push(
        "init_tau_c",
        (t.tau_c_min..=t.tau_c_max).contains(&z0.tau_c),
        strict,
        format!("tau_c(0,0) = {} in [{}, {}]", z0.tau_c, t.tau_c_min, t.tau_c_max),
    );
    diag.push(
        "init_tau_g",
        z0.tau_g == t.tau_g_comp,
        strict,
        format!("tau_g(0,0) = {} equals tau_g_comp = {}", z0.tau_g, t.tau_g_comp),
    );
    diag.push(
        "init_z_equals_u",
        z0.z == z0.u,
        strict,
        format!("z(0,0) = {:?}, u(0,0) = {:?}", z0.z, z0.u),
    );
    diag.push(
        "init_u_in_set",
        params.input_set.contains(&z0.u, 1e-12),
        strict,
        format!("u(0,0) = {:?} in the input set", z0.u),
    );
    diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::s1;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn gain_examples() {
        let p = s1().params;
        assert_eq!(steady_state_gain(&p.plant).unwrap()[(0, 0)], 1.0);

        let zero_out = Plant {
            c_out: Matrix::zeros(1, 1),
            ..p.plant.clone()
        };
        assert_eq!(steady_state_gain(&zero_out).unwrap().max_abs(), 0.0);

        let diag = Plant {
            a: Matrix::from_diag(&[-1.0, -2.0]),
            b: Matrix::identity(2),
            c_out: Matrix::identity(2),
            d: vec![0.0, 0.0],
        };
        let h = steady_state_gain(&diag).unwrap();
        assert!(h.sub(&Matrix::from_diag(&[1.0, 0.5])).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn singular_plant_rejected() {
        let mut p = s1().params.plant;
        p.a = Matrix::zeros(1, 1);
        assert!(matches!(steady_state_gain(&p), Err(ModelError::Linalg(LinalgError::Singular { .. }))));
    }

    #[test]
    fn objective_examples() {
        let obj = s1().params.objective;
        assert_eq!(phi(&[0.0], &[2.0], &obj).unwrap(), 0.0);
        assert_eq!(phi(&[1.0], &[0.5], &obj).unwrap(), 1.625);
        let doubled = Objective {
            q_u: obj.q_u.scale(2.0),
            ..obj.clone()
        };
        let base = phi(&[1.0], &[0.5], &obj).unwrap();
        assert_eq!(phi(&[1.0], &[0.5], &doubled).unwrap(), base + 0.5);
        assert!(phi(&[1.0, 2.0], &[0.5], &obj).is_err());
    }

    #[test]
    fn gradient_examples() {
        let obj = s1().params.objective;
        let h = Matrix::identity(1);
        assert_eq!(grad_u_phi(&[0.0], &[0.5], &obj, &h).unwrap(), vec![-1.5]);
        assert_eq!(grad_u_phi(&[0.0], &[2.0], &obj, &h).unwrap(), vec![0.0]);
    }

    #[test]
    fn projection_examples() {
        let b = InputSet::Box {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        assert_eq!(b.project(&[0.6]), vec![0.6]);
        assert_eq!(b.project(&[1.4]), vec![1.0]);
        let ball = InputSet::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = ball.project(&[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(b.diameter(), 2.0);
        assert_eq!(ball.diameter(), 2.0);
    }

    #[test]
    fn g1_first_step_in_s1() {
        let sc = s1();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        let s = State {
            tau_g: 0.0,
            tau_c: 0.75,
            ..sc.initial.clone()
        };
        let next = sys.jump_g1(&s).unwrap();
        assert!((next.z[0] - 0.6).abs() < 1e-15);
        assert_eq!(next.tau_g, 0.25);
        assert_eq!((next.x.clone(), next.u.clone(), next.y_s.clone(), next.tau_c), (s.x, s.u, s.y_s, s.tau_c));
    }

    #[test]
    fn g1_fixed_point_is_stationary() {
        let sc = s1();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        // With y_s = 0.5 the unconstrained root is 1.5, so the box clamps it to 1.
        let s = State {
            z: vec![1.0],
            tau_g: 0.0,
            ..sc.initial.clone()
        };
        assert_eq!(sys.jump_g1(&s).unwrap().z, vec![1.0]);
    }

    #[test]
    fn g2_applies_iterate_and_samples() {
        let sc = s1();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        let mut sel = JumpSelector::new(JumpPolicy {
            tau_c_reset: TauCReset::Fixed(1.0),
            ..Default::default()
        });
        let s = State {
            z: vec![0.6],
            tau_c: 0.0,
            tau_g: 0.1,
            ..sc.initial.clone()
        };
        let next = sys.jump_g2(&s, &mut sel).unwrap();
        assert_eq!(next.u, vec![0.6]);
        assert!((next.y_s[0] - 1.1).abs() < 1e-15);
        assert_eq!(next.z, vec![0.6]);
        assert_eq!(next.tau_c, 1.0);
        assert_eq!(next.tau_g, 0.1);

        let mut old = sc.params.clone();
        old.sample_with = SampleWith::OldInput;
        let sys_old = FoSystem::new(old).unwrap();
        let next_old = sys_old.jump_g2(&s, &mut sel).unwrap();
        assert!((next_old.y_s[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_reset_interval_is_deterministic() {
        for reset in [TauCReset::Min, TauCReset::Max, TauCReset::UniformRandom, TauCReset::Fixed(1.0)] {
            let mut sel = JumpSelector::new(JumpPolicy {
                tau_c_reset: reset,
                case3_order: Case3Order::Random,
                seed: 42,
            });
            assert_eq!(sel.tau_c_reset(1.0, 1.0, (1.0, 1.0)), 1.0);
        }
    }

    #[test]
    fn jump_dispatch() {
        let sc = s1();
        let sys = FoSystem::new(sc.params.clone()).unwrap();
        let mut sel = JumpSelector::new(JumpPolicy::default());
        let base = sc.initial.clone();

        let case1 = State { tau_g: 0.0, ..base.clone() };
        let steps = sys.jump(&case1, &mut sel).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].kind, JumpKind::G1);
        assert_eq!(steps[0].state, sys.jump_g1(&case1).unwrap());

        let case2 = State { tau_c: 0.0, ..base.clone() };
        let steps = sys.jump(&case2, &mut sel).unwrap();
        assert_eq!(steps[0].kind, JumpKind::G2);

        let case3 = State {
            tau_c: 0.0,
            tau_g: 0.0,
            ..base.clone()
        };
        let steps = sys.jump(&case3, &mut sel).unwrap();
        assert_eq!(steps.len(), 2);
        let composed = sys.jump_g2(&sys.jump_g1(&case3).unwrap(), &mut sel).unwrap();
        assert_eq!(steps[1].state, composed);
        assert_eq!(steps[0].kind, JumpKind::G3First(JumpMap::Gradient));
        assert_eq!(steps[1].kind, JumpKind::G3Second(JumpMap::Input));

        assert!(matches!(sys.jump(&base, &mut sel), Err(ModelError::NotInJumpSet { .. })));
        assert!(matches!(sys.jump_g1(&base), Err(ModelError::Precondition { map: "G1", .. })));
        assert!(matches!(sys.jump_g2(&base, &mut sel), Err(ModelError::Precondition { map: "G2", .. })));
    }

    #[test]
    fn validate_s1_passes() {
        let sc = s1();
        let d = validate(&sc.params, &sc.initial, InitMode::Strict);
        assert!(d.is_ok(), "{d}");
        assert!((d.q.unwrap() - 0.84).abs() < 1e-12);
        assert!(d.strict_init_ok());
    }

    #[test]
    fn validate_rejects_large_stepsize() {
        let mut sc = s1();
        sc.params.objective.gamma = 0.7;
        let d = validate(&sc.params, &sc.initial, InitMode::Strict);
        let item = d.get("stepsize").unwrap();
        assert_eq!(item.status, Status::Fail);
        assert!(item.message.contains("stepsize condition"));
        assert!(item.message.contains("0.666667"));
    }

    #[test]
    fn validate_rejects_timescale_violation() {
        let mut sc = s1();
        sc.params.timers.ell = 5;
        let d = validate(&sc.params, &sc.initial, InitMode::Strict);
        assert_eq!(d.get("timescale").unwrap().status, Status::Fail);
    }

    #[test]
    fn validate_init_modes() {
        let sc = s1();
        let off = State {
            tau_g: 0.1,
            z: vec![0.3],
            ..sc.initial.clone()
        };
        let strict = validate(&sc.params, &off, InitMode::Strict);
        assert!(!strict.is_ok());
        let global = validate(&sc.params, &off, InitMode::Global);
        assert!(global.is_ok());
        assert!(!global.strict_init_ok());
        assert_eq!(global.get("init_tau_g").unwrap().status, Status::Warn);

        let outside = State {
            tau_c: 3.0,
            ..sc.initial.clone()
        };
        assert!(!validate(&sc.params, &outside, InitMode::Global).is_ok());
    }

    #[test]
    fn validate_rejects_unstable_and_indefinite() {
        let mut sc = s1();
        sc.params.plant.a = Matrix::from_rows(&[[0.5]]).unwrap();
        sc.params.objective.q_y = Matrix::from_rows(&[[-1.0]]).unwrap();
        let d = validate(&sc.params, &sc.initial, InitMode::Strict);
        assert_eq!(d.get("plant_hurwitz").unwrap().status, Status::Fail);
        assert_eq!(d.get("q_y_spd").unwrap().status, Status::Fail);
    }

    fn random_instance(seed: u64) -> (ModelParams, Matrix, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = crate::scenarios::random_params(&mut rng);
        let h = params.gain().unwrap();
        (params, h, rng)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..50 {
            let (params, h, mut rng) = random_instance(seed);
            let obj = &params.objective;
            let z = random_vec(&mut rng, params.plant.m());
            let y_s = random_vec(&mut rng, params.plant.p());
            let e = linalg::sub(&y_s, &obj.y_hat);
            let pull = h.transpose().matvec(&obj.q_y.matvec(&e).unwrap()).unwrap();
            let psi = |u: &[f64]| 0.5 * linalg::dot(u, &obj.q_u.matvec(u).unwrap()) + linalg::dot(u, &pull);
            let g = grad_u_phi(&z, &y_s, obj, &h).unwrap();
            let step = 1e-6;
            let fd: Vector = (0..z.len())
                .map(|i| {
                    let mut up = z.clone();
                    let mut dn = z.clone();
                    up[i] += step;
                    dn[i] -= step;
                    (psi(&up) - psi(&dn)) / (2.0 * step)
                })
                .collect();
            assert!(linalg::dist2(&fd, &g) <= 1e-6 * linalg::norm2(&g).max(1.0), "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn gradient_monotone_and_lipschitz(seed in 0u64..10_000) {
            let (params, h, mut rng) = random_instance(seed);
            let obj = &params.objective;
            let (mu, l) = curvature(obj, &h).unwrap();
            let y_s = random_vec(&mut rng, params.plant.p());
            let z1 = random_vec(&mut rng, params.plant.m());
            let z2 = random_vec(&mut rng, params.plant.m());
            let dg = linalg::sub(&grad_u_phi(&z1, &y_s, obj, &h).unwrap(), &grad_u_phi(&z2, &y_s, obj, &h).unwrap());
            let dz = linalg::sub(&z1, &z2);
            let dz2 = linalg::dot(&dz, &dz);
            prop_assert!(linalg::dot(&dz, &dg) >= mu * dz2 - 1e-12 * dz2.max(1.0));
            prop_assert!(linalg::norm2(&dg) <= l * linalg::norm2(&dz) + 1e-12);
        }

        #[test]
        fn jump_sequences_leave_the_jump_set(seed in 0u64..10_000, which in 0usize..3, order in 0usize..3) {
            let (params, _, mut rng) = random_instance(seed);
            let sys = FoSystem::new(params.clone()).unwrap();
            let t = params.timers;
            let mut s = params
                .strict_initial_state(random_vec(&mut rng, params.plant.n()), params.input_set.project(&random_vec(&mut rng, params.plant.m())), None)
                .unwrap();
            match which {
                0 => s.tau_g = 0.0,
                1 => s.tau_c = 0.0,
                _ => { s.tau_c = 0.0; s.tau_g = 0.0; }
            }
            if which == 0 { s.tau_c = rng.gen_range(1e-3..t.tau_c_max); }
            if which == 1 { s.tau_g = rng.gen_range(1e-3..t.tau_g_comp); }
            let mut sel = JumpSelector::new(JumpPolicy {
                tau_c_reset: TauCReset::UniformRandom,
                case3_order: [Case3Order::G1First, Case3Order::G2First, Case3Order::Random][order],
                seed,
            });
            let steps = sys.jump(&s, &mut sel).unwrap();
            for step in &steps {
                prop_assert!(sys.in_flow_set(&step.state));
            }
            let last = &steps[steps.len() - 1].state;
            prop_assert!(last.tau_c > 0.0 && last.tau_g > 0.0);
        }
    }

    fn input_set_strategy() -> impl Strategy<Value = InputSet> {
        prop_oneof![
            (prop::collection::vec(-3.0f64..3.0, 3), prop::collection::vec(0.0f64..2.0, 3)).prop_map(|(lo, w)| {
                let hi = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
                InputSet::Box { lo, hi }
            }),
            (prop::collection::vec(-3.0f64..3.0, 3), 0.1f64..3.0)
                .prop_map(|(center, radius)| InputSet::Ball { center, radius }),
        ]
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_nonexpansive(
            set in input_set_strategy(),
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let pa = set.project(&a);
            let pb = set.project(&b);
            prop_assert!(set.contains(&pa, 1e-12));
            prop_assert!(linalg::dist2(&set.project(&pa), &pa) <= 1e-12);
            prop_assert!(linalg::dist2(&pa, &pb) <= linalg::dist2(&a, &b) + 1e-12);
        }
    }
}
