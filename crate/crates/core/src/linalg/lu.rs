use super::{LinalgError, Matrix, NumericSettings, Result, Vector};

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    rcond: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        Self::factor_with(a, &NumericSettings::default())
    }

    pub fn factor_with(a: &Matrix, settings: &NumericSettings) -> Result<Self> {
        let n = a.require_square("lu")?;
        a.check_finite("lu")?;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 {
                return Err(LinalgError::Singular { rcond: 0.0 });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        let mut out = Self {
            lu,
            perm,
            rcond: 0.0,
        };
        // Explicit inverse is cheap at the sizes we handle and gives an exact
        // 1-norm condition number instead of an estimate.
        let inv = out.solve_matrix(&Matrix::identity(n));
        let inv_norm = inv.norm_1();
        let a_norm = a.norm_1();
        out.rcond = if inv_norm.is_finite() && a_norm > 0.0 {
            1.0 / (a_norm * inv_norm)
        } else {
            0.0
        };
        if !(out.rcond >= settings.min_rcond) {
            return Err(LinalgError::Singular { rcond: out.rcond });
        }
        Ok(out)
    }

    /// Reciprocal 1-norm condition number of the factored matrix.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vector {
        let n = self.dim();
        let mut y: Vector = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[(i, k)] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.lu[(i, k)] * y[k];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.col(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Solves `A X = B` and checks the residual `|AX - B| <= tol (|A||X| + |B|)`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let settings = NumericSettings::default();
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    b.check_finite("solve")?;
    let lu = Lu::factor_with(a, &settings)?;
    let x = lu.solve_matrix(b);
    let residual = a.matmul(&x)?.sub(b)?.norm_1();
    let scale = a.norm_1() * x.norm_1() + b.norm_1();
    if residual > settings.solve_residual_tol * scale {
        return Err(LinalgError::Singular { rcond: lu.rcond() });
    }
    Ok(x)
}

pub fn solve_vec(a: &Matrix, b: &[f64]) -> Result<Vector> {
    Ok(solve(a, &Matrix::column(b))?.col(0))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square("inverse")?;
    solve(a, &Matrix::identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve_returns_rhs() {
        let b = vec![1.5, -2.0, 3.25];
        assert_eq!(solve_vec(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn scalar_solve() {
        let a = Matrix::from_rows(&[[-1.0]]).unwrap();
        let x = solve_vec(&a, &[-0.75]).unwrap();
        assert_eq!(x, vec![0.75]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut a = Matrix::identity(4).scale(4.0);
            for i in 0..4 {
                for j in 0..4 {
                    a[(i, j)] += rng.gen_range(-1.0..1.0);
                }
            }
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = solve_vec(&a, &b).unwrap();
            let r = sub(&a.matvec(&x).unwrap(), &b);
            let scale = a.norm_1() * norm2(&x) + norm2(&b);
            assert!(norm2(&r) <= 1e-10 * scale);
        }
    }

    #[test]
    fn singular_reports_condition() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(solve_vec(&a, &[1.0, 1.0]), Err(LinalgError::Singular { .. })));
        let near = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0 + 1e-17]]).unwrap();
        assert!(matches!(inverse(&near), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn non_square_rejected() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(Lu::factor(&a), Err(LinalgError::NotSquare { .. })));
    }
}
