//! Two-qubit gates, canonical coordinates, and the monodromy map.
//!
//! A two-qubit unitary, considered up to one-qubit gates on either side,
//! is characterized by a triple of interaction angles: the canonical gate
//! `CAN(a1, a2, a3) = exp(-i (a1 XX + a2 YY + a3 ZZ))`. This module builds
//! canonical gates, extracts the unique positive canonical coordinate of an
//! arbitrary unitary (the monodromy map), performs the full KAK
//! decomposition with explicit local gates, and provides the average-gate
//! infidelity metrics and Haar-measure utilities the rest of the crate
//! relies on.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c, joint_diagonalize, C64, Mat2, Mat4, ONE, ZERO};

/// Max allowed deviation of `U\u{2020}U` from the identity.
pub const UNITARY_TOL: f64 = 1e-12;

/// Coordinates with `a3` below this are snapped onto the `a3 = 0` seam.
pub const SEAM_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Gate constants and elementary gates.
// ---------------------------------------------------------------------------

pub fn pauli_x() -> Mat2 {
    Mat2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> Mat2 {
    Mat2([[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]])
}

pub fn pauli_z() -> Mat2 {
    Mat2([[ONE, ZERO], [ZERO, c(-1.0, 0.0)]])
}

pub fn hadamard() -> Mat2 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat2([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
}

/// `exp(-i theta Z)`.
pub fn rz(theta: f64) -> Mat2 {
    Mat2([
        [c(theta.cos(), -theta.sin()), ZERO],
        [ZERO, c(theta.cos(), theta.sin())],
    ])
}

/// `exp(-i theta X)`.
pub fn rx(theta: f64) -> Mat2 {
    Mat2([
        [c(theta.cos(), 0.0), c(0.0, -theta.sin())],
        [c(0.0, -theta.sin()), c(theta.cos(), 0.0)],
    ])
}

pub fn swap_gate() -> Mat4 {
    let mut m = Mat4::zeros();
    m.0[0][0] = ONE;
    m.0[1][2] = ONE;
    m.0[2][1] = ONE;
    m.0[3][3] = ONE;
    m
}

pub fn cx_gate() -> Mat4 {
    let mut m = Mat4::zeros();
    m.0[0][0] = ONE;
    m.0[1][1] = ONE;
    m.0[2][3] = ONE;
    m.0[3][2] = ONE;
    m
}

/// The canonical two-qubit gate `exp(-i (a1 XX + a2 YY + a3 ZZ))`.
pub fn can(a1: f64, a2: f64, a3: f64) -> Mat4 {
    // Block-diagonal in the {|00>,|11>} / {|01>,|10>} split: the outer block
    // is e^{-i a3} exp(-i (a1 - a2) X), the inner e^{+i a3} exp(-i (a1 + a2) X).
    let (cm, sm) = ((a1 - a2).cos(), (a1 - a2).sin());
    let (cp, sp) = ((a1 + a2).cos(), (a1 + a2).sin());
    let ep = c(a3.cos(), a3.sin());
    let em = ep.conj();
    let mi = c(0.0, -1.0);
    let mut m = Mat4::zeros();
    m.0[0][0] = em * cm;
    m.0[0][3] = mi * em * sm;
    m.0[1][1] = ep * cp;
    m.0[1][2] = mi * ep * sp;
    m.0[2][1] = mi * ep * sp;
    m.0[2][2] = ep * cp;
    m.0[3][0] = mi * em * sm;
    m.0[3][3] = em * cm;
    m
}

/// The XX interaction `exp(-i beta XX)` of strength `beta`.
pub fn xx(beta: f64) -> Mat4 {
    can(beta, 0.0, 0.0)
}

/// The magic (Bell) basis. Local gates become real orthogonal matrices in
/// this basis and canonical gates become diagonal.
pub fn magic_basis() -> Mat4 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = c(0.0, s);
    let r = c(s, 0.0);
    Mat4([
        [r, ZERO, ZERO, i],
        [ZERO, i, r, ZERO],
        [ZERO, i, -r, ZERO],
        [r, ZERO, ZERO, -i],
    ])
}

/// Sign patterns (x, y, z) of XX, YY, ZZ on each magic-basis column: the
/// magic representation of CAN(a) is `diag(exp(-i p_k . a))`.
const MAGIC_PATTERNS: [[f64; 3]; 4] = [
    [1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
    [-1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
];

// ---------------------------------------------------------------------------
// Domain types.
// ---------------------------------------------------------------------------

/// A 4x4 unitary representing a two-qubit gate, compared projectively.
#[derive(Clone, Copy, Debug)]
pub struct Unitary4 {
    m: Mat4,
}

#[derive(Serialize, Deserialize)]
struct RawUnitary {
    re: [[f64; 4]; 4],
    im: [[f64; 4]; 4],
}

impl Unitary4 {
    pub fn new(m: Mat4) -> Result<Self> {
        let residual = m.unitarity_residual();
        if residual > UNITARY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Unitary4 { m })
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn new_unchecked(m: Mat4) -> Self {
        Unitary4 { m }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    pub fn from_parts(re: [[f64; 4]; 4], im: [[f64; 4]; 4]) -> Result<Self> {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = c(re[i][j], im[i][j]);
            }
        }
        Self::new(m)
    }

    /// Parses the JSON wire form `{"re": [[..]], "im": [[..]]}`.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: RawUnitary =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidValue {
                field: "unitary".into(),
                reason: e.to_string(),
            })?;
        Self::from_parts(raw.re, raw.im)
    }

    /// Serializes to the JSON wire form, phase-normalized so the first
    /// nonzero entry (row-major) is real nonnegative.
    pub fn to_json(&self) -> serde_json::Value {
        let m = self.m.phase_normalized();
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = m.0[i][j].re;
                im[i][j] = m.0[i][j].im;
            }
        }
        serde_json::to_value(RawUnitary { re, im }).expect("serializing a unitary cannot fail")
    }
}

/// A point of the Weyl alcove: `a1 >= a2 >= a3 >= 0`, `a1 + a2 <= pi/2`,
/// and `a3 > 0 or a1 <= pi/4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCoordinate(pub [f64; 3]);

impl CanonicalCoordinate {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let tol = 1e-9;
        let coord = [a1, a2, a3];
        let reason = if !(a1 >= a2 - tol && a2 >= a3 - tol && a3 >= -tol) {
            Some("not sorted descending and nonnegative")
        } else if a1 + a2 > FRAC_PI_2 + tol {
            Some("a1 + a2 exceeds pi/2")
        } else if a3 <= tol && a1 > FRAC_PI_4 + tol {
            Some("a3 = 0 requires a1 <= pi/4")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidCoordinate {
                coord,
                reason: reason.into(),
            }),
            None => Ok(CanonicalCoordinate(coord)),
        }
    }

    pub fn a1(&self) -> f64 {
        self.0[0]
    }
    pub fn a2(&self) -> f64 {
        self.0[1]
    }
    pub fn a3(&self) -> f64 {
        self.0[2]
    }
}

/// An order-free coordinate triple: `aj >= 0` and `aj + ak <= pi/2` for all
/// pairs. Sorting such a triple produces a positive canonical coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsortedCoordinate(pub [f64; 3]);

impl UnsortedCoordinate {
    pub fn new(a: [f64; 3]) -> Result<Self> {
        let tol = 1e-9;
        for j in 0..3 {
            if a[j] < -tol {
                return Err(Error::InvalidCoordinate {
                    coord: a,
                    reason: format!("coordinate {} is negative", j),
                });
            }
            for k in j + 1..3 {
                if a[j] + a[k] > FRAC_PI_2 + tol {
                    return Err(Error::InvalidCoordinate {
                        coord: a,
                        reason: format!("coordinates {} + {} exceed pi/2", j, k),
                    });
                }
            }
        }
        Ok(UnsortedCoordinate(a))
    }

    /// Sorts descending and applies the `a3 = 0` seam reflection, landing in
    /// the positive canonical region.
    pub fn to_canonical(&self) -> CanonicalCoordinate {
        CanonicalCoordinate(canonicalize(self.0).coord)
    }
}

impl From<CanonicalCoordinate> for UnsortedCoordinate {
    fn from(value: CanonicalCoordinate) -> Self {
        UnsortedCoordinate(value.0)
    }
}

/// A pair of one-qubit gates acting on the two wires, `q0 (x) q1`.
#[derive(Clone, Copy, Debug)]
pub struct LocalGatePair {
    pub q0: Mat2,
    pub q1: Mat2,
}

impl LocalGatePair {
    pub fn identity() -> Self {
        LocalGatePair {
            q0: Mat2::identity(),
            q1: Mat2::identity(),
        }
    }

    pub fn to_mat4(&self) -> Mat4 {
        Mat4::kron(&self.q0, &self.q1)
    }
}

/// Result of a full KAK decomposition: `U = left . CAN(coordinate) . right`
/// up to global phase.
#[derive(Clone, Copy, Debug)]
pub struct KakDecomposition {
    pub left: LocalGatePair,
    pub coordinate: CanonicalCoordinate,
    pub right: LocalGatePair,
}

impl KakDecomposition {
    pub fn reconstruct(&self) -> Mat4 {
        let a = self.coordinate.0;
        self.left
            .to_mat4()
            .mul(&can(a[0], a[1], a[2]))
            .mul(&self.right.to_mat4())
    }
}

// ---------------------------------------------------------------------------
// Alcove canonicalization with explicit local-gate bookkeeping.
// ---------------------------------------------------------------------------

/// Outcome of alcove reduction: `CAN(input) = left . CAN(coord) . right`
/// exactly, where both locals are tensor pairs.
pub(crate) struct Canonicalized {
    pub coord: [f64; 3],
    pub left: LocalGatePair,
    pub right: LocalGatePair,
}

fn pauli(axis: usize) -> Mat2 {
    match axis {
        0 => pauli_x(),
        1 => pauli_y(),
        _ => pauli_z(),
    }
}

/// Gate pair conjugating CAN so that coordinates `j` and `k` swap.
fn swap_conj_gate(j: usize, k: usize) -> Mat2 {
    match (j.min(k), j.max(k)) {
        (0, 1) => rz(FRAC_PI_4),
        (0, 2) => hadamard(),
        (1, 2) => rx(FRAC_PI_4),
        _ => unreachable!("swap axes must differ"),
    }
}

struct Reducer {
    coord: [f64; 3],
    l: LocalGatePair,
    r: LocalGatePair,
}

impl Reducer {
    fn new(a: [f64; 3]) -> Self {
        Reducer {
            coord: a,
            l: LocalGatePair::identity(),
            r: LocalGatePair::identity(),
        }
    }

    /// `CAN(coord) = phase (s (x) s) CAN(coord - k pi/2 e_j)` with
    /// `s = sigma_j^k`, `phase = (-i)^k`.
    fn shift(&mut self, j: usize, k: i32) {
        if k == 0 {
            return;
        }
        let s = pauli(j);
        let steps = k.rem_euclid(4) as usize;
        let mut factor = Mat2::identity();
        for _ in 0..steps {
            factor = factor.mul(&s);
        }
        // (-i)^k for the actual (possibly negative) k.
        let phase = match k.rem_euclid(4) {
            0 => ONE,
            1 => c(0.0, -1.0),
            2 => c(-1.0, 0.0),
            _ => c(0.0, 1.0),
        };
        self.l.q0 = self.l.q0.mul(&factor.scale(phase));
        self.l.q1 = self.l.q1.mul(&factor);
        self.coord[j] -= k as f64 * FRAC_PI_2;
    }

    /// Conjugation swapping coordinates `j` and `k`.
    fn swap(&mut self, j: usize, k: usize) {
        if j == k {
            return;
        }
        let g = swap_conj_gate(j, k);
        let gd = g.adjoint();
        self.l.q0 = self.l.q0.mul(&g);
        self.l.q1 = self.l.q1.mul(&g);
        self.r.q0 = gd.mul(&self.r.q0);
        self.r.q1 = gd.mul(&self.r.q1);
        self.coord.swap(j, k);
    }

    /// Conjugation negating the two coordinates other than `fixed_axis`.
    fn flip_pair(&mut self, fixed_axis: usize) {
        let s = pauli(fixed_axis);
        self.l.q0 = self.l.q0.mul(&s);
        self.r.q0 = s.mul(&self.r.q0);
        for j in 0..3 {
            if j != fixed_axis {
                self.coord[j] = -self.coord[j];
            }
        }
    }

    fn sort_descending(&mut self) {
        for _ in 0..3 {
            for j in 0..2 {
                if self.coord[j] < self.coord[j + 1] {
                    self.swap(j, j + 1);
                }
            }
        }
    }
}

/// Reduces an arbitrary real triple to the positive canonical region,
/// tracking the local gates that realize each move.
pub(crate) fn canonicalize(a: [f64; 3]) -> Canonicalized {
    let mut red = Reducer::new(a);
    // Step 1: shift each coordinate into [0, pi/2).
    for j in 0..3 {
        let k = (red.coord[j] / FRAC_PI_2).floor() as i32;
        red.shift(j, k);
        if red.coord[j] > FRAC_PI_2 - 1e-12 {
            red.shift(j, 1);
            red.coord[j] = 0.0;
        }
        if red.coord[j] < 0.0 {
            // Guard against floating-point droop from the shift arithmetic.
            red.coord[j] = 0.0;
        }
    }
    // Step 2: sort descending.
    red.sort_descending();
    // Step 3: enforce a1 + a2 <= pi/2 via (a1, a2) -> (pi/2 - a1, pi/2 - a2).
    if red.coord[0] + red.coord[1] > FRAC_PI_2 {
        red.flip_pair(2);
        red.shift(0, -1);
        red.shift(1, -1);
        red.sort_descending();
    }
    // Step 4: the a3 = 0 seam identification (a1, a2, 0) ~ (pi/2 - a1, a2, 0).
    if red.coord[2] < SEAM_TOL {
        red.coord[2] = 0.0;
        if red.coord[0] > FRAC_PI_4 {
            red.flip_pair(1);
            red.shift(0, -1);
            red.coord[2] = 0.0;
            red.sort_descending();
        }
    }
    for c in red.coord.iter_mut() {
        // Normalize negative zeros left by sign flips.
        if *c == 0.0 {
            *c = 0.0;
        }
    }
    debug_assert!(
        red.coord[0] >= red.coord[1]
            && red.coord[1] >= red.coord[2]
            && red.coord[2] >= 0.0
            && red.coord[0] + red.coord[1] <= FRAC_PI_2 + 1e-9,
        "canonicalization left the alcove: {:?}",
        red.coord
    );
    Canonicalized {
        coord: red.coord,
        left: red.l,
        right: red.r,
    }
}

/// Local gates realizing an alcove symmetry: a permutation of the XX/YY/ZZ
/// axes together with sign flips on an even number of them. Returns
/// `(W0, W1)` with `(W0 (x) W1) CAN(a) (W0 (x) W1)^dagger = CAN(w a)`.
pub fn weyl_conjugation_gates(permutation: [usize; 3], flips: [bool; 3]) -> Result<LocalGatePair> {
    let mut seen = [false; 3];
    for &p in permutation.iter() {
        if p > 2 || seen[p] {
            return Err(Error::InvalidValue {
                field: "permutation".into(),
                reason: format!("{:?} is not a permutation of 0..3", permutation),
            });
        }
        seen[p] = true;
    }
    if flips.iter().filter(|&&f| f).count() % 2 == 1 {
        return Err(Error::UnrealizableSymmetry { flips });
    }
    // Build as a product of primitive conjugations acting on a symbolic
    // coordinate: track where each axis currently sits.
    let mut pair = LocalGatePair::identity();
    let mut state: [usize; 3] = [0, 1, 2]; // state[slot] = original axis in that slot
    let compose = |pair: &mut LocalGatePair, g0: &Mat2, g1: &Mat2| {
        pair.q0 = g0.mul(&pair.q0);
        pair.q1 = g1.mul(&pair.q1);
    };
    // Realize the permutation: we need slot s to end up holding the axis
    // permutation[s]. Work with transpositions.
    for s in 0..3 {
        if state[s] != permutation[s] {
            let t = (s + 1..3)
                .find(|&t| state[t] == permutation[s])
                .expect("valid permutation");
            // Conjugation by swap_conj_gate(s, t) exchanges slots s and t.
            let g = swap_conj_gate(s, t);
            compose(&mut pair, &g, &g);
            state.swap(s, t);
        }
    }
    // Apply sign flips (in pairs) on the requested slots.
    let flipped = (0..3).filter(|&j| flips[j]).count();
    if flipped == 2 {
        let fixed = (0..3).find(|&j| !flips[j]).expect("two of three flipped");
        let s = pauli(fixed);
        compose(&mut pair, &s, &Mat2::identity());
    }
    Ok(pair)
}

// ---------------------------------------------------------------------------
// Monodromy map and KAK decomposition.
// ---------------------------------------------------------------------------

struct MagicSpectrum {
    /// Half eigenphases, one per magic coordinate slot.
    theta: [f64; 4],
    /// Orthogonal diagonalizer of the magic Gram matrix.
    o: [[f64; 4]; 4],
    /// Determinant-normalized magic-basis representation of the input.
    v: Mat4,
    /// Phase removed during determinant normalization.
    det_phase: C64,
}

fn magic_spectrum(u: &Unitary4) -> MagicSpectrum {
    let q = magic_basis();
    let qd = q.adjoint();
    let v0 = qd.mul(u.matrix()).mul(&q);
    let det = v0.det();
    let det_phase = C64::from_polar(1.0, det.arg() / 4.0);
    let v = v0.scale(det_phase.conj());
    let m = v.transpose().mul(&v);
    let mut re = [[0.0; 4]; 4];
    let mut im = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            re[i][j] = m.0[i][j].re;
            im[i][j] = m.0[i][j].im;
        }
    }
    let mut mats = [re, im];
    let o = joint_diagonalize(&mut mats);
    let mut theta = [0.0; 4];
    for k in 0..4 {
        theta[k] = mats[1][k][k].atan2(mats[0][k][k]) / 2.0;
    }
    // The half eigenphases are each defined mod pi; branches whose sum is an
    // odd multiple of pi correspond to the wrong sheet (quarter-shifted
    // coordinates outside the local-equivalence class). Force the sum to an
    // even multiple.
    let half_turns = (theta.iter().sum::<f64>() / PI).round() as i64;
    if half_turns.rem_euclid(2) == 1 {
        theta[0] += PI;
    }
    MagicSpectrum {
        theta,
        o,
        v,
        det_phase,
    }
}

fn raw_triple_from_theta(theta: &[f64; 4]) -> [f64; 3] {
    let mut a = [0.0; 3];
    for (ax, item) in a.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..4 {
            s += MAGIC_PATTERNS[k][ax] * theta[k];
        }
        *item = -s / 4.0;
    }
    a
}

/// The monodromy map: the unique positive canonical coordinate of `U`.
pub fn monodromy_coordinate(u: &Unitary4) -> CanonicalCoordinate {
    let spec = magic_spectrum(u);
    let raw = raw_triple_from_theta(&spec.theta);
    CanonicalCoordinate(canonicalize(raw).coord)
}

fn det4_real(m: &[[f64; 4]; 4]) -> f64 {
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..4 {
        let mut piv = col;
        for r in col + 1..4 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for cc in col..4 {
                a[r][cc] -= f * a[col][cc];
            }
        }
    }
    det
}

/// Splits a tensor-product 4x4 into its 2x2 factors.
pub(crate) fn factor_local(m: &Mat4) -> Result<LocalGatePair> {
    // Rearrange so the tensor structure becomes a rank-1 outer product:
    // R[2i+j][2k+l] = M[2i+k][2j+l] = A[i][j] B[k][l].
    let mut r = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    r[2 * i + j][2 * k + l] = m.0[2 * i + k][2 * j + l];
                }
            }
        }
    }
    let (mut bi, mut bj, mut best) = (0, 0, 0.0f64);
    for i in 0..4 {
        for j in 0..4 {
            if r[i][j].norm() > best {
                best = r[i][j].norm();
                bi = i;
                bj = j;
            }
        }
    }
    if best < 1e-9 {
        return Err(Error::PhaseSolveFailed(
            "matrix is numerically zero; cannot factor".into(),
        ));
    }
    let avec: [C64; 4] = [r[0][bj], r[1][bj], r[2][bj], r[3][bj]];
    let pivot = r[bi][bj];
    let bvec: [C64; 4] = [
        r[bi][0] / pivot,
        r[bi][1] / pivot,
        r[bi][2] / pivot,
        r[bi][3] / pivot,
    ];
    let mut a = Mat2([[avec[0], avec[1]], [avec[2], avec[3]]]);
    let mut b = Mat2([[bvec[0], bvec[1]], [bvec[2], bvec[3]]]);
    // Balance scales so both factors are unitary.
    let ga = a.mul(&a.adjoint());
    let sa = ga.0[0][0].re.max(1e-300).sqrt();
    a = a.scale(c(1.0 / sa, 0.0));
    b = b.scale(c(sa, 0.0));
    let residual = Mat4::kron(&a, &b).max_abs_diff(m);
    if residual > 1e-8 {
        return Err(Error::PhaseSolveFailed(format!(
            "matrix is not a tensor product (residual {:.3e})",
            residual
        )));
    }
    Ok(LocalGatePair { q0: a, q1: b })
}

/// Full KAK decomposition `U = left . CAN(coordinate) . right` (up to
/// global phase), with the coordinate in the positive canonical region.
pub fn kak_decompose(u: &Unitary4) -> Result<KakDecomposition> {
    let mut spec = magic_spectrum(u);
    // Ensure det O = +1 by flipping a column if needed.
    if det4_real(&spec.o) < 0.0 {
        for row in spec.o.iter_mut() {
            row[0] = -row[0];
        }
    }
    let q = magic_basis();
    let qd = q.adjoint();
    // K1 = V O A^{-1}, real orthogonal by construction.
    let mut oa = Mat4::zeros();
    for i in 0..4 {
        for k in 0..4 {
            oa.0[i][k] = c(spec.o[i][k], 0.0) * C64::from_polar(1.0, -spec.theta[k]);
        }
    }
    let k1 = spec.v.mul(&oa);
    let mut k1r = [[0.0; 4]; 4];
    let mut max_imag: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            k1r[i][j] = k1.0[i][j].re;
            max_imag = max_imag.max(k1.0[i][j].im.abs());
        }
    }
    if max_imag > 1e-8 {
        return Err(Error::SynthesisInconsistency(format!(
            "KAK inner factor not real (residual {:.3e})",
            max_imag
        )));
    }
    let raw = raw_triple_from_theta(&spec.theta);
    // Residual global phase: diag phases are -P a_raw plus (sum theta)/4 shared.
    let theta_sum: f64 = spec.theta.iter().sum();
    let phase_a = C64::from_polar(1.0, theta_sum / 4.0);
    let reduced = canonicalize(raw);
    // U = det_phase . (Q K1 Q^dag) . phase_a CAN(raw) . (Q O^T Q^dag)
    let k1_mat = Mat4(k1r.map(|row| row.map(|x| c(x, 0.0))));
    let ot_mat = {
        let mut t = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                t[i][j] = c(spec.o[j][i], 0.0);
            }
        }
        Mat4(t)
    };
    let left4 = q
        .mul(&k1_mat)
        .mul(&qd)
        .scale(spec.det_phase * phase_a)
        .mul(&reduced.left.to_mat4());
    let right4 = reduced.right.to_mat4().mul(&q.mul(&ot_mat).mul(&qd));
    let left = factor_local(&left4)?;
    let right = factor_local(&right4)?;
    Ok(KakDecomposition {
        left,
        coordinate: CanonicalCoordinate(reduced.coord),
        right,
    })
}

// ---------------------------------------------------------------------------
// Infidelity metrics.
// ---------------------------------------------------------------------------

/// Average gate infidelity `I(U, V) = (16 - |tr(U^dag V)|^2) / 20`, valued
/// in [0, 4/5] and zero exactly when `U = V` up to global phase.
pub fn average_infidelity(u: &Unitary4, v: &Unitary4) -> f64 {
    let t = u.matrix().adjoint().mul(v.matrix()).trace();
    ((16.0 - t.norm_sqr()) / 20.0).max(0.0)
}

/// Average gate infidelity between two canonical gates, via the closed form
/// `20 I = 16 - 16 (prod cos^2 d_j + prod sin^2 d_j)` with `d_j = a_j - b_j`.
pub fn canonical_infidelity(a: &CanonicalCoordinate, b: &CanonicalCoordinate) -> f64 {
    infidelity_from_deltas([a.0[0] - b.0[0], a.0[1] - b.0[1], a.0[2] - b.0[2]])
}

pub(crate) fn infidelity_from_deltas(d: [f64; 3]) -> f64 {
    let mut pc = 1.0;
    let mut ps = 1.0;
    for dj in d {
        pc *= dj.cos().powi(2);
        ps *= dj.sin().powi(2);
    }
    ((16.0 - 16.0 * (pc + ps)) / 20.0).max(0.0)
}

// ---------------------------------------------------------------------------
// Mirror transform.
// ---------------------------------------------------------------------------

/// The canonical coordinate of `U . SWAP` given that of `U`.
pub fn mirror_coordinate(a: &CanonicalCoordinate) -> CanonicalCoordinate {
    let [a1, a2, a3] = a.0;
    let raw = if a1 <= FRAC_PI_4 {
        [FRAC_PI_4 + a3, FRAC_PI_4 - a2, FRAC_PI_4 - a1]
    } else {
        [FRAC_PI_4 - a3, FRAC_PI_4 - a2, a1 - FRAC_PI_4]
    };
    CanonicalCoordinate(canonicalize(raw).coord)
}

// ---------------------------------------------------------------------------
// Haar measure: pushforward density and random sampling.
// ---------------------------------------------------------------------------

/// Probability density of the monodromy image of a Haar-random unitary,
/// `(384/pi) prod_{j<k} sin(2cj + 2ck) sin(2cj - 2ck)` on the alcove.
pub fn haar_density(a: &UnsortedCoordinate) -> f64 {
    let mut cs = a.0;
    cs.sort_by(|x, y| y.partial_cmp(x).expect("coordinates are finite"));
    let mut p = 384.0 / PI;
    for j in 0..3 {
        for k in j + 1..3 {
            p *= (2.0 * cs[j] + 2.0 * cs[k]).sin() * (2.0 * cs[j] - 2.0 * cs[k]).sin();
        }
    }
    p.max(0.0)
}

/// Draws a Haar-random two-qubit unitary, deterministically in `seed`:
/// complex Gaussian matrix, QR decomposition, R-diagonal phase correction.
pub fn haar_random_unitary(seed: u64) -> Unitary4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_from_rng(&mut rng)
}

/// Same construction from a caller-managed RNG stream.
pub fn haar_random_from_rng<R: Rng>(rng: &mut R) -> Unitary4 {
    let mut g = Mat4::zeros();
    let mut normal = || {
        // Box-Muller transform.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    for i in 0..4 {
        for j in 0..4 {
            g.0[i][j] = c(normal(), normal());
        }
    }
    let (q, r) = g.qr();
    let mut u = q;
    for k in 0..4 {
        let d = r.0[k][k];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..4 {
            u.0[i][k] *= phase;
        }
    }
    Unitary4::new_unchecked(u)
}
