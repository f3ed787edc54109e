//! Eigenvalue routines.
//!
//! General real matrices go through Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR iteration. Every
//! returned eigenvalue is then checked by a few steps of complex inverse
//! iteration on the original matrix, which produces an eigenvector whose
//! residual must be small relative to `|A|`. Symmetric matrices use cyclic
//! Jacobi rotations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LinalgError, Matrix, NumericSettings, Result};

/// Eigenvalues of a square matrix, in the order the QR iteration deflated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest real part (the spectral abscissa).
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_i |Re λ_i|`, the decay rate used throughout the convergence analysis.
    pub fn min_abs_real(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> Complex64 {
        self.eigenvalues.iter().sum()
    }

    /// True when every non-real eigenvalue has its conjugate in the list.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let mut used = vec![false; self.len()];
        for (i, l) in self.eigenvalues.iter().enumerate() {
            if l.im == 0.0 || used[i] {
                continue;
            }
            let partner = self.eigenvalues.iter().enumerate().position(|(k, m)| {
                k != i && !used[k] && (m - l.conj()).norm() <= tol * (1.0 + l.norm())
            });
            match partner {
                Some(k) => {
                    used[i] = true;
                    used[k] = true;
                }
                None => return false,
            }
        }
        true
    }

    /// Eigenvalues sorted by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

pub fn eig_general(a: &Matrix) -> Result<Spectrum> {
    eig_general_with(a, &NumericSettings::default())
}

pub fn eig_general_with(a: &Matrix, settings: &NumericSettings) -> Result<Spectrum> {
    let n = a.require_square("eig_general")?;
    a.check_finite("eig_general")?;
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![] });
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    let eigenvalues = hqr(&mut h, settings.max_qr_iterations)?;

    let a_norm = a.norm_fro();
    let tolerance = settings.eig_residual_tol * a_norm.max(f64::MIN_POSITIVE);
    for &lambda in &eigenvalues {
        let residual = inverse_iteration_residual(a, lambda);
        if residual > tolerance {
            return Err(LinalgError::ResidualCheck { residual, tolerance });
        }
    }
    Ok(Spectrum { eigenvalues })
}

/// Householder reduction to upper Hessenberg form (entries below the first
/// subdiagonal are zeroed explicitly).
fn hessenberg(h: &mut Matrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f: f64 = (m..=high).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f: f64 = (m..=high).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in (m + 1)..=high {
            h[(i, m - 1)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
#[allow(unused_assignments)]
fn hqr(h: &mut Matrix, max_iter: usize) -> Result<Vec<Complex64>> {
    let nn = h.rows() as isize;
    let mut d = vec![0.0; nn as usize];
    let mut e = vec![0.0; nn as usize];
    let eps = f64::EPSILON;
    let low: isize = 0;
    let mut n = nn - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut x;
    let mut y;
    let mut w;

    let at = |h: &Matrix, i: isize, j: isize| h[(i as usize, j as usize)];

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += at(h, i, j).abs();
        }
    }

    let mut iter = 0;
    while n >= low {
        let mut l = n;
        while l > low {
            s = at(h, l - 1, l - 1).abs() + at(h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at(h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h[(n as usize, n as usize)] += exshift;
            d[n as usize] = at(h, n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = at(h, n, n - 1) * at(h, n - 1, n);
            p = (at(h, n - 1, n - 1) - at(h, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(n as usize, n as usize)] += exshift;
            h[((n - 1) as usize, (n - 1) as usize)] += exshift;
            x = at(h, n, n);
            let (nu, nm) = (n as usize, (n - 1) as usize);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nm] = x + z;
                d[nu] = d[nm];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nm] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nm] = x + p;
                d[nu] = x + p;
                e[nm] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = at(h, n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = at(h, n - 1, n - 1);
                w = at(h, n, n - 1) * at(h, n - 1, n);
            }
            // Exceptional shifts break rare cycles.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h[(i as usize, i as usize)] -= x;
                }
                s = at(h, n, n - 1).abs() + at(h, n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[(i as usize, i as usize)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > max_iter {
                return Err(LinalgError::NoConvergence {
                    op: "eig_general",
                    iterations: iter,
                });
            }

            let mut m = n - 2;
            while m >= l {
                z = at(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(h, m + 1, m) + at(h, m, m + 1);
                q = at(h, m + 1, m + 1) - z - r - s;
                r = at(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at(h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (at(h, m - 1, m - 1).abs() + z.abs() + at(h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = at(h, k, k - 1);
                    q = at(h, k + 1, k - 1);
                    r = if notlast { at(h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        h[(k as usize, (k - 1) as usize)] = -at(h, k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        let (ku, k1, jj) = (k as usize, (k + 1) as usize, j as usize);
                        p = h[(ku, jj)] + q * h[(k1, jj)];
                        if notlast {
                            let k2 = (k + 2) as usize;
                            p += r * h[(k2, jj)];
                            h[(k2, jj)] -= p * z;
                        }
                        h[(ku, jj)] -= p * x;
                        h[(k1, jj)] -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        let (iu, ku, k1) = (i as usize, k as usize, (k + 1) as usize);
                        p = x * h[(iu, ku)] + y * h[(iu, k1)];
                        if notlast {
                            let k2 = (k + 2) as usize;
                            p += z * h[(iu, k2)];
                            h[(iu, k2)] -= p * r;
                        }
                        h[(iu, ku)] -= p;
                        h[(iu, k1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    Ok(d.into_iter().zip(e).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Residual `|A v - λ v|` of the unit vector produced by three steps of
/// inverse iteration with shift `λ`.
fn inverse_iteration_residual(a: &Matrix, lambda: Complex64) -> f64 {
    let n = a.rows();
    let floor = f64::EPSILON * a.norm_fro().max(f64::MIN_POSITIVE);
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex64::new(a[(i, j)], 0.0);
                    if i == j {
                        v - lambda
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();

    // LU with partial pivoting; exactly singular pivots are nudged to the
    // rounding floor, which is what makes inverse iteration converge in one step.
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))
            .unwrap_or(k);
        m.swap(k, p);
        perm.swap(k, p);
        if m[k][k].norm() < floor {
            m[k][k] = Complex64::new(floor, 0.0);
        }
        let pivot = m[k][k];
        for i in (k + 1)..n {
            let f = m[i][k] / pivot;
            m[i][k] = f;
            for j in (k + 1)..n {
                let mkj = m[k][j];
                m[i][j] -= f * mkj;
            }
        }
    }

    let solve = |b: &[Complex64]| -> Vec<Complex64> {
        let mut y: Vec<Complex64> = perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let yk = y[k];
                y[i] -= m[i][k] * yk;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let yk = y[k];
                y[i] -= m[i][k] * yk;
            }
            y[i] /= m[i][i];
        }
        y
    };

    let normalize = |v: Vec<Complex64>| -> Vec<Complex64> {
        let s = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / s).collect()
    };

    let mut v: Vec<Complex64> = normalize(
        (0..n)
            .map(|i| Complex64::new(1.0 + 0.37 * i as f64, 0.11 * (i as f64 + 1.0).sin()))
            .collect(),
    );
    for _ in 0..3 {
        let w = solve(&v);
        if w.iter().any(|c| !c.is_finite()) {
            break;
        }
        v = normalize(w);
    }

    (0..n)
        .map(|i| {
            let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Eigen-decomposition `S = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn eig_sym(s: &Matrix) -> Result<Vec<f64>> {
    Ok(eig_sym_vectors(s)?.values)
}

pub fn eig_sym_vectors(s: &Matrix) -> Result<SymmetricEigen> {
    eig_sym_with(s, &NumericSettings::default())
}

pub fn eig_sym_with(s: &Matrix, settings: &NumericSettings) -> Result<SymmetricEigen> {
    let n = s.require_square("eig_sym")?;
    s.check_finite("eig_sym")?;
    let asymmetry = s.asymmetry();
    if asymmetry > settings.symmetry_tol * s.max_abs().max(1.0) {
        return Err(LinalgError::NotSymmetric { asymmetry });
    }
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = 0.5 * (s[(i, j)] + s[(j, i)]);
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.norm_fro();

    let off = |a: &Matrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > f64::EPSILON * scale {
        sweeps += 1;
        if sweeps > settings.max_jacobi_sweeps {
            return Err(LinalgError::NoConvergence {
                op: "eig_sym",
                iterations: sweeps,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// `sqrt(λ_max(B^T B))`.
pub fn spectral_norm(b: &Matrix) -> Result<f64> {
    b.check_finite("spectral_norm")?;
    if b.rows() == 0 || b.cols() == 0 {
        return Ok(0.0);
    }
    let gram = if b.cols() <= b.rows() {
        b.transpose().matmul(b)?
    } else {
        b.matmul(&b.transpose())?
    };
    let top = eig_sym_vectors(&gram)?.max();
    Ok(top.max(0.0).sqrt())
}
