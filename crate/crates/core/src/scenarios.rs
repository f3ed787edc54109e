//! Reference scenario and a generator of random validated scenarios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{inverse, Matrix, Vector};
use crate::model::{
    contraction_factor, curvature, validate, Case3Order, InitMode, InputSet, JumpPolicy, ModelParams, Objective,
    Overrides, Plant, SampleWith, State, TauCReset, Timers,
};
use crate::robustness::Perturbation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub initial: State,
    pub policy: JumpPolicy,
}

fn m1(v: f64) -> Matrix {
    Matrix::from_rows(&[[v]]).expect("1x1")
}

/// Scalar plant `x' = -x + u`, `y = x + 0.5`, target output 2, inputs in `[-1, 1]`.
pub fn s1() -> Scenario {
    let params = ModelParams {
        plant: Plant {
            a: m1(-1.0),
            b: m1(1.0),
            c_out: m1(1.0),
            d: vec![0.5],
        },
        objective: Objective {
            q_u: m1(1.0),
            q_y: m1(1.0),
            y_hat: vec![2.0],
            gamma: 0.4,
        },
        timers: Timers {
            tau_c_min: 1.0,
            tau_c_max: 1.0,
            tau_g_comp: 0.25,
            ell: 4,
        },
        input_set: InputSet::Box {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
        sample_with: SampleWith::NewInput,
        overrides: Overrides::default(),
    };
    let initial = params
        .strict_initial_state(vec![0.0], vec![0.0], None)
        .expect("reference scenario is well formed");
    Scenario {
        name: "s1".into(),
        params,
        initial,
        policy: JumpPolicy {
            tau_c_reset: TauCReset::Fixed(1.0),
            case3_order: Case3Order::G1First,
            seed: 0,
        },
    }
}

/// Perturbation shipped with [`s1`]. Every field is small enough that the
/// nominal event order survives at any scale up to 1.
pub fn s1_perturbation() -> Perturbation {
    Perturbation {
        a_hat: m1(0.05),
        b_hat: m1(0.0),
        h_hat: m1(0.0),
        kappa_c: 0.1,
        kappa_g: 0.0,
        theta_g_comp: 0.02,
        theta_c_min: 0.02,
        theta_c_max: 0.02,
    }
}

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape")
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let r = uniform_matrix(rng, n, n, -1.0, 1.0);
    let g = r.matmul(&r.transpose()).expect("square");
    let shift = rng.gen_range(0.2..1.5);
    g.add(&Matrix::identity(n).scale(shift)).expect("square")
}

/// Diagonalizable Hurwitz matrix `P D P^{-1}` with eigenvalues whose real
/// parts are spread over `[-3, -0.3]`, including complex pairs when n ≥ 2.
pub fn random_hurwitz<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut d = Matrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let re = -rng.gen_range(0.3..3.0);
        if i + 1 < n && rng.gen_bool(0.4) {
            let im = rng.gen_range(0.2..2.0);
            d[(i, i)] = re;
            d[(i + 1, i + 1)] = re;
            d[(i, i + 1)] = im;
            d[(i + 1, i)] = -im;
            i += 2;
        } else {
            d[(i, i)] = re;
            i += 1;
        }
    }
    loop {
        let p = Matrix::identity(n)
            .add(&uniform_matrix(rng, n, n, -0.4, 0.4))
            .expect("square");
        if let Ok(pinv) = inverse(&p) {
            if pinv.norm_1() * p.norm_1() < 20.0 {
                return p.matmul(&d).and_then(|m| m.matmul(&pinv)).expect("square");
            }
        }
    }
}

fn random_input_set<R: Rng>(rng: &mut R, m: usize) -> InputSet {
    if rng.gen_bool(0.5) {
        let lo: Vector = (0..m).map(|_| rng.gen_range(-2.0..0.0)).collect();
        let hi = lo.iter().map(|l| l + rng.gen_range(0.5..2.5)).collect();
        InputSet::Box { lo, hi }
    } else {
        InputSet::Ball {
            center: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            radius: rng.gen_range(0.3..1.5),
        }
    }
}

fn random_point_in<R: Rng>(rng: &mut R, set: &InputSet) -> Vector {
    let raw: Vector = (0..set.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
    set.project(&raw)
}

/// Random parameters satisfying every standing assumption.
pub fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=3);
    let p = rng.gen_range(1..=3);
    let plant = Plant {
        a: random_hurwitz(rng, n),
        b: uniform_matrix(rng, n, m, -1.0, 1.0),
        c_out: uniform_matrix(rng, p, n, -1.0, 1.0),
        d: (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let mut objective = Objective {
        q_u: random_spd(rng, m),
        q_y: random_spd(rng, p),
        y_hat: (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        gamma: 0.0,
    };
    let h = crate::model::steady_state_gain(&plant).expect("Hurwitz plant is invertible");
    let (mu, l) = curvature(&objective, &h).expect("symmetric");
    // q < 1 needs γ < 2μ/L², which can be tighter than the stepsize range.
    let gamma_max = (2.0 / (mu + l)).min(2.0 * mu / (l * l));
    objective.gamma = rng.gen_range(0.05..0.95) * gamma_max;
    debug_assert!(contraction_factor(objective.gamma, mu, l) < 1.0);

    let tau_g_comp = rng.gen_range(0.05..0.3);
    let ell = rng.gen_range(1..=4);
    let tau_c_min = ell as f64 * tau_g_comp * rng.gen_range(1.0..1.5);
    let tau_c_max = tau_c_min * rng.gen_range(1.0..1.5);
    ModelParams {
        plant,
        objective,
        timers: Timers {
            tau_c_min,
            tau_c_max,
            tau_g_comp,
            ell,
        },
        input_set: random_input_set(rng, m),
        sample_with: SampleWith::NewInput,
        overrides: Overrides::default(),
    }
}

/// Random validated scenario. `Strict` initial states satisfy the timer and
/// iterate initialization; `Global` ones draw timers anywhere in their
/// ranges (possibly zero) and start the iterate away from the input.
pub fn random_scenario<R: Rng>(rng: &mut R, mode: InitMode) -> Scenario {
    loop {
        let params = random_params(rng);
        let n = params.plant.n();
        let x0: Vector = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let u0 = random_point_in(rng, &params.input_set);
        let t = params.timers;
        let initial = match mode {
            InitMode::Strict => {
                let tau_c = rng.gen_range(t.tau_c_min..=t.tau_c_max);
                params.strict_initial_state(x0, u0, Some(tau_c)).expect("dimensions match")
            }
            InitMode::Global => {
                let pick = |rng: &mut R, hi: f64| match rng.gen_range(0..5) {
                    0 => 0.0,
                    1 => hi,
                    _ => rng.gen_range(0.0..hi),
                };
                State {
                    x: x0,
                    z: random_point_in(rng, &params.input_set),
                    y_s: (0..params.plant.p()).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    u: u0,
                    tau_c: pick(rng, t.tau_c_max),
                    tau_g: pick(rng, t.tau_g_comp),
                }
            }
        };
        if validate(&params, &initial, mode).is_ok() {
            let policy = JumpPolicy {
                tau_c_reset: TauCReset::UniformRandom,
                case3_order: Case3Order::Random,
                seed: rng.gen(),
            };
            return Scenario {
                name: format!("random-{mode:?}").to_lowercase(),
                params,
                initial,
                policy,
            };
        }
    }
}
