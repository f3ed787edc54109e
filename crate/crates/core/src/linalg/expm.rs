//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant, plus the exact zero-order-hold step built on it.

use super::{solve, LinalgError, Matrix, Result, Vector};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled [13/13] approximant is accurate to
/// double precision.
const THETA13: f64 = 5.371920351148152;

/// `e^{A t}`.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    let n = a.require_square("mat_exp")?;
    a.check_finite("mat_exp")?;
    if !t.is_finite() {
        return Err(LinalgError::NonFinite("mat_exp time"));
    }
    if t == 0.0 || n == 0 {
        return Ok(Matrix::identity(n));
    }
    let at = a.scale(t);
    let norm = at.norm_1();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = at.scale(2f64.powi(-squarings));
    let mut e = pade13(&scaled)?;
    for _ in 0..squarings {
        e = e.matmul(&e)?;
    }
    e.check_finite("mat_exp result")?;
    Ok(e)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let b = &PADE13;
    let id = Matrix::identity(n);
    let a2 = a.matmul(a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;

    let u_hi = a6.scale(b[13]).add_scaled(b[11], &a4)?.add_scaled(b[9], &a2)?;
    let u_inner = a6
        .matmul(&u_hi)?
        .add_scaled(b[7], &a6)?
        .add_scaled(b[5], &a4)?
        .add_scaled(b[3], &a2)?
        .add_scaled(b[1], &id)?;
    let u = a.matmul(&u_inner)?;

    let v_hi = a6.scale(b[12]).add_scaled(b[10], &a4)?.add_scaled(b[8], &a2)?;
    let v = a6
        .matmul(&v_hi)?
        .add_scaled(b[6], &a6)?
        .add_scaled(b[4], &a4)?
        .add_scaled(b[2], &a2)?
        .add_scaled(b[0], &id)?;

    solve(&v.sub(&u)?, &v.add(&u)?)
}

/// Exact discretization of `x' = A x + B u` over a step of length `dt` with
/// `u` held constant: `x+ = Φ x + Γ u`, `Φ = e^{A dt}`, `Γ = A^{-1}(Φ - I) B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiStep {
    pub dt: f64,
    pub phi: Matrix,
    pub gamma: Matrix,
}

impl LtiStep {
    pub fn new(a: &Matrix, b: &Matrix, dt: f64) -> Result<Self> {
        let n = a.require_square("step_lti")?;
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "step_lti",
                lhs: a.shape(),
                rhs: b.shape(),
            });
        }
        if dt == 0.0 {
            return Ok(Self {
                dt,
                phi: Matrix::identity(n),
                gamma: Matrix::zeros(n, b.cols()),
            });
        }
        let phi = mat_exp(a, dt)?;
        let gamma = solve(a, &phi.sub(&Matrix::identity(n))?.matmul(b)?)?;
        Ok(Self { dt, phi, gamma })
    }

    pub fn apply(&self, x: &[f64], u: &[f64]) -> Result<Vector> {
        let free = self.phi.matvec(x)?;
        let forced = self.gamma.matvec(u)?;
        Ok(free.iter().zip(&forced).map(|(a, b)| a + b).collect())
    }
}

/// State of `x' = A x + B u` after `dt` seconds with constant `u`.
pub fn step_lti(a: &Matrix, b: &Matrix, x: &[f64], u: &[f64], dt: f64) -> Result<Vector> {
    if x.len() != a.rows() || u.len() != b.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "step_lti",
            lhs: (x.len(), u.len()),
            rhs: (a.rows(), b.cols()),
        });
    }
    if dt == 0.0 {
        return Ok(x.to_vec());
    }
    LtiStep::new(a, b, dt)?.apply(x, u)
}
