//! Small fixed-size complex linear algebra used throughout the crate.
//!
//! Everything here is 2x2 or 4x4, so the kernels are written out directly
//! instead of pulling in a general-purpose matrix library.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A 2x2 complex matrix in row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

/// A 4x4 complex matrix in row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = ZERO;
                for k in 0..2 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out[i][j] = s;
            }
        }
        Mat2(out)
    }

    pub fn adjoint(&self) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.0[j][i].conj();
            }
        }
        Mat2(out)
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut out = self.0;
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Mat2(out)
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn unitarity_residual(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut r: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { ONE } else { ZERO };
                r = r.max((p.0[i][j] - target).norm());
            }
        }
        r
    }

    /// Rescales so the first entry with magnitude above 1e-12 (row-major)
    /// becomes real and nonnegative.
    pub fn phase_normalized(&self) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                let v = out.0[i][j];
                if v.norm() > 1e-12 {
                    let ph = v / v.norm();
                    return out.scale(ph.conj());
                }
                out.0[i][j] = ZERO;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, rhs: &Mat2) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                r = r.max((self.0[i][j] - rhs.0[i][j]).norm());
            }
        }
        r
    }
}

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn mul(&self, rhs: &Mat4) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out[i][j] += a * rhs.0[k][j];
                }
            }
        }
        Mat4(out)
    }

    pub fn adjoint(&self) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = self.0[j][i].conj();
            }
        }
        Mat4(out)
    }

    pub fn transpose(&self) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = self.0[j][i];
            }
        }
        Mat4(out)
    }

    pub fn scale(&self, s: C64) -> Mat4 {
        let mut out = self.0;
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Mat4(out)
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                    }
                }
            }
        }
        Mat4(out)
    }

    pub fn det(&self) -> C64 {
        // LU with partial pivoting.
        let mut m = self.0;
        let mut det = ONE;
        for col in 0..4 {
            let mut piv = col;
            for r in col + 1..4 {
                if m[r][col].norm() > m[piv][col].norm() {
                    piv = r;
                }
            }
            if m[piv][col].norm() == 0.0 {
                return ZERO;
            }
            if piv != col {
                m.swap(piv, col);
                det = -det;
            }
            det *= m[col][col];
            for r in col + 1..4 {
                let f = m[r][col] / m[col][col];
                for cidx in col..4 {
                    let sub = f * m[col][cidx];
                    m[r][cidx] -= sub;
                }
            }
        }
        det
    }

    pub fn unitarity_residual(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut r: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { ONE } else { ZERO };
                r = r.max((p.0[i][j] - target).norm());
            }
        }
        r
    }

    pub fn max_abs_diff(&self, rhs: &Mat4) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                r = r.max((self.0[i][j] - rhs.0[i][j]).norm());
            }
        }
        r
    }

    /// Rescales so the first entry with magnitude above 1e-12 (row-major)
    /// becomes real and nonnegative.
    pub fn phase_normalized(&self) -> Mat4 {
        for i in 0..4 {
            for j in 0..4 {
                let v = self.0[i][j];
                if v.norm() > 1e-12 {
                    let ph = v / v.norm();
                    return self.scale(ph.conj());
                }
            }
        }
        *self
    }

    /// QR factorization by Householder reflections; returns (Q, R).
    pub fn qr(&self) -> (Mat4, Mat4) {
        let mut r = self.0;
        let mut q = Mat4::identity().0;
        for k in 0..4 {
            // Householder vector for column k below the diagonal.
            let mut normx: f64 = 0.0;
            for i in k..4 {
                normx += r[i][k].norm_sqr();
            }
            let normx = normx.sqrt();
            if normx < 1e-300 {
                continue;
            }
            let akk = r[k][k];
            let alpha = if akk.norm() == 0.0 {
                c(-normx, 0.0)
            } else {
                -(akk / akk.norm()) * normx
            };
            let mut v = [ZERO; 4];
            for i in k..4 {
                v[i] = r[i][k];
            }
            v[k] -= alpha;
            let mut vnorm2: f64 = 0.0;
            for vi in v.iter() {
                vnorm2 += vi.norm_sqr();
            }
            if vnorm2 < 1e-300 {
                continue;
            }
            // Apply H = I - 2 v v^dagger / |v|^2 to R (left) and accumulate into Q.
            for j in 0..4 {
                let mut s = ZERO;
                for i in k..4 {
                    s += v[i].conj() * r[i][j];
                }
                s *= 2.0 / vnorm2;
                for i in k..4 {
                    let sub = s * v[i];
                    r[i][j] -= sub;
                }
            }
            for j in 0..4 {
                let mut s = ZERO;
                for i in k..4 {
                    s += v[i].conj() * q[i][j];
                }
                s *= 2.0 / vnorm2;
                for i in k..4 {
                    let sub = s * v[i];
                    q[i][j] -= sub;
                }
            }
        }
        // q currently holds Q^dagger acting from the left.
        (Mat4(q).adjoint(), Mat4(r))
    }
}

/// Joint diagonalization of a family of (nearly) commuting real symmetric
/// 4x4 matrices by Jacobi rotations (Cardoso-Souloumiac).
///
/// Returns the accumulated orthogonal matrix `O` such that `O^T A_k O` is
/// diagonal for every input matrix.
pub fn joint_diagonalize(mats: &mut [[[f64; 4]; 4]]) -> [[f64; 4]; 4] {
    let mut o = [[0.0; 4]; 4];
    for (i, row) in o.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for a in mats.iter() {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        off += a[i][j] * a[i][j];
                    }
                }
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..4 {
                // 2x2 objective matrix G = sum_k h h^T with h = (a_pp - a_qq, 2 a_pq).
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for a in mats.iter() {
                    let h1 = a[p][p] - a[q][q];
                    let h2 = a[p][q] + a[q][p];
                    g11 += h1 * h1;
                    g12 += h1 * h2;
                    g22 += h2 * h2;
                }
                // Dominant eigenvector (x, y) of [[g11, g12], [g12, g22]], x >= 0.
                let delta = g11 - g22;
                let radius = (delta * delta + 4.0 * g12 * g12).sqrt();
                let (x, y) = if radius < 1e-300 {
                    (1.0, 0.0)
                } else {
                    let x = ((radius + delta) / (2.0 * radius)).max(0.0).sqrt();
                    let y = if x.abs() < 1e-150 {
                        1.0
                    } else {
                        g12 / (radius * x)
                    };
                    (x, y)
                };
                let cth = ((1.0 + x) / 2.0).sqrt();
                let sth = y / (2.0 * cth).max(1e-300);
                if sth.abs() < 1e-18 {
                    continue;
                }
                let norm = (cth * cth + sth * sth).sqrt();
                let (cth, sth) = (cth / norm, sth / norm);
                // Apply the Givens rotation on (p, q) to every matrix and to O.
                for a in mats.iter_mut() {
                    for i in 0..4 {
                        let (aip, aiq) = (a[i][p], a[i][q]);
                        a[i][p] = cth * aip + sth * aiq;
                        a[i][q] = -sth * aip + cth * aiq;
                    }
                    for j in 0..4 {
                        let (apj, aqj) = (a[p][j], a[q][j]);
                        a[p][j] = cth * apj + sth * aqj;
                        a[q][j] = -sth * apj + cth * aqj;
                    }
                }
                for i in 0..4 {
                    let (oip, oiq) = (o[i][p], o[i][q]);
                    o[i][p] = cth * oip + sth * oiq;
                    o[i][q] = -sth * oip + cth * oiq;
                }
            }
        }
    }
    o
}

/// Solves a 3x3 linear system `A x = b`; returns None when |det| falls below
/// `tol` times the matrix scale.
pub fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3], tol: f64) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let mut scale: f64 = 0.0;
    for row in a.iter() {
        for v in row.iter() {
            scale = scale.max(v.abs());
        }
    }
    if det.abs() <= tol * scale.powi(3).max(1e-30) {
        return None;
    }
    let inv_det = 1.0 / det;
    let x0 = b[0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (b[1] * a[2][2] - a[1][2] * b[2])
        + a[0][2] * (b[1] * a[2][1] - a[1][1] * b[2]);
    let x1 = a[0][0] * (b[1] * a[2][2] - a[1][2] * b[2]) - b[0] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * b[2] - b[1] * a[2][0]);
    let x2 = a[0][0] * (a[1][1] * b[2] - b[1] * a[2][1]) - a[0][1] * (a[1][0] * b[2] - b[1] * a[2][0])
        + b[0] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    Some([x0 * inv_det, x1 * inv_det, x2 * inv_det])
}

/// Gaussian elimination with full pivoting for a small dense system
/// `A x = b` with `A` of size rows x cols (rows >= rank). Free variables are
/// set to zero. Returns None if the system is numerically inconsistent.
pub fn solve_small(a: &[Vec<f64>], b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    let rows = a.len();
    if rows == 0 {
        return Some(Vec::new());
    }
    let cols = a[0].len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    for step in 0..cols.min(rows) {
        // Full pivot search.
        let (mut pr, mut pc, mut pv) = (step, step, 0.0f64);
        for r in step..rows {
            for ci in step..cols {
                if m[r][ci].abs() > pv {
                    pv = m[r][ci].abs();
                    pr = r;
                    pc = ci;
                }
            }
        }
        if pv <= pivot_tol {
            break;
        }
        m.swap(step, pr);
        rhs.swap(step, pr);
        for row in m.iter_mut() {
            row.swap(step, pc);
        }
        col_perm.swap(step, pc);
        for r in 0..rows {
            if r == step {
                continue;
            }
            let f = m[r][step] / m[step][step];
            if f == 0.0 {
                continue;
            }
            for ci in step..cols {
                let sub = f * m[step][ci];
                m[r][ci] -= sub;
            }
            let sub = f * rhs[step];
            rhs[r] -= sub;
        }
        rank = step + 1;
    }
    // Consistency check on the zeroed-out rows.
    for r in rank..rows {
        if rhs[r].abs() > 1e-7 {
            return None;
        }
    }
    let mut x_perm = vec![0.0; cols];
    for r in 0..rank {
        x_perm[r] = rhs[r] / m[r][r];
    }
    let mut x = vec![0.0; cols];
    for (i, &pi) in col_perm.iter().enumerate() {
        x[pi] = x_perm[i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reproduces_input() {
        let mut m = Mat4::zeros();
        let mut v: f64 = 0.3;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = c(v.sin(), (v * 1.7).cos());
                v += 0.37;
            }
        }
        let (q, r) = m.qr();
        assert!(q.unitarity_residual() < 1e-13);
        let back = q.mul(&r);
        assert!(back.max_abs_diff(&m) < 1e-13);
        // R is upper triangular.
        for i in 0..4 {
            for j in 0..i {
                assert!(r.0[i][j].norm() < 1e-13);
            }
        }
    }

    #[test]
    fn det_of_identity_and_swap() {
        assert!((Mat4::identity().det() - ONE).norm() < 1e-15);
        let mut swap = Mat4::zeros();
        swap.0[0][0] = ONE;
        swap.0[1][2] = ONE;
        swap.0[2][1] = ONE;
        swap.0[3][3] = ONE;
        assert!((swap.det() + ONE).norm() < 1e-15);
    }

    #[test]
    fn joint_diagonalize_commuting_pair() {
        // Build commuting symmetric matrices from a shared eigenbasis.
        let th: f64 = 0.7;
        let (cth, sth) = (th.cos(), th.sin());
        let mut o = [[0.0; 4]; 4];
        o[0][0] = cth;
        o[0][1] = -sth;
        o[1][0] = sth;
        o[1][1] = cth;
        o[2][2] = 1.0;
        o[3][3] = 1.0;
        let d1 = [1.0, 2.0, 3.0, 4.0];
        let d2 = [-1.0, 0.5, 0.25, 2.0];
        let build = |d: &[f64; 4]| {
            let mut a = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += o[i][k] * d[k] * o[j][k];
                    }
                    a[i][j] = s;
                }
            }
            a
        };
        let mut mats = [build(&d1), build(&d2)];
        let rot = joint_diagonalize(&mut mats);
        for a in mats.iter() {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(a[i][j].abs() < 1e-10, "off-diagonal {}", a[i][j]);
                    }
                }
            }
        }
        // rot is orthogonal.
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += rot[k][i] * rot[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_small_square_and_rank_deficient() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
        ];
        let b = vec![5.0, 4.0, 3.0];
        let x = solve_small(&a, &b, 1e-12).unwrap();
        for (row, bi) in a.iter().zip(&b) {
            let s: f64 = row.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
            assert!((s - bi).abs() < 1e-12);
        }
        // Rank-1 system: consistent duplicate rows.
        let a2 = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let b2 = vec![3.0, 6.0];
        let x2 = solve_small(&a2, &b2, 1e-12).unwrap();
        assert!((x2[0] + x2[1] - 3.0).abs() < 1e-12);
    }
}
