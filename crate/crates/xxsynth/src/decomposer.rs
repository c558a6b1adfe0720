//! Constructive synthesis: extending a canonical gate by one XX interaction
//! with Z-rotation inner gates, choosing a predecessor coordinate inside the
//! smaller circuit polytope, and recursing until the strength sequence is
//! exhausted.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::circuit_polytope::{disordered_member, member, StrengthSequence};
use crate::error::{Error, Result};
use crate::matrix::{c, Mat2, Mat4};
use crate::polytope::MEMBERSHIP_TOL;
pub use crate::weyl::weyl_conjugation_gates;
use crate::weyl::{
    average_infidelity, can, canonicalize, rz, xx, CanonicalCoordinate, LocalGatePair, Unitary4,
    UnsortedCoordinate,
};

/// Denominators below this are treated as degenerate in the inner-angle
/// equations (the constraint degenerates to an identity).
const DEGENERATE_DEN: f64 = 1e-12;
/// Quotients may overshoot [-1, 1] by this much before arccos clamping.
const CLAMP_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Circuit representation.
// ---------------------------------------------------------------------------

/// One step of a two-qubit circuit: a pair of one-qubit gates or an XX
/// interaction of a given strength.
#[derive(Clone, Debug)]
pub enum CircuitStep {
    Local { q0: Mat2, q1: Mat2 },
    Xx { beta: f64 },
}

impl CircuitStep {
    pub fn matrix(&self) -> Mat4 {
        match self {
            CircuitStep::Local { q0, q1 } => Mat4::kron(q0, q1),
            CircuitStep::Xx { beta } => xx(*beta),
        }
    }
}

/// An alternating sequence of local and XX steps, beginning and ending with
/// local steps. `steps[0]` is the leftmost factor of the operator product.
#[derive(Clone, Debug, Default)]
pub struct TwoQubitCircuit {
    pub steps: Vec<CircuitStep>,
}

impl TwoQubitCircuit {
    pub fn identity() -> Self {
        TwoQubitCircuit {
            steps: vec![CircuitStep::Local {
                q0: Mat2::identity(),
                q1: Mat2::identity(),
            }],
        }
    }

    /// Strengths of the XX steps, in circuit order.
    pub fn xx_strengths(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                CircuitStep::Xx { beta } => Some(*beta),
                _ => None,
            })
            .collect()
    }

    fn premultiply_local(&mut self, g: &LocalGatePair) {
        match self.steps.first_mut() {
            Some(CircuitStep::Local { q0, q1 }) => {
                *q0 = g.q0.mul(q0);
                *q1 = g.q1.mul(q1);
            }
            _ => self
                .steps
                .insert(0, CircuitStep::Local { q0: g.q0, q1: g.q1 }),
        }
    }

    fn postmultiply_local(&mut self, g: &LocalGatePair) {
        match self.steps.last_mut() {
            Some(CircuitStep::Local { q0, q1 }) => {
                *q0 = q0.mul(&g.q0);
                *q1 = q1.mul(&g.q1);
            }
            _ => self.steps.push(CircuitStep::Local { q0: g.q0, q1: g.q1 }),
        }
    }

    /// JSON wire form `{"steps": [...]}` with 2x2 factors as re/im arrays.
    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<RawStep> = self.steps.iter().map(RawStep::from_step).collect();
        serde_json::to_value(RawCircuit { steps }).expect("circuit serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: RawCircuit =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidValue {
                field: "circuit".into(),
                reason: e.to_string(),
            })?;
        Ok(TwoQubitCircuit {
            steps: raw.steps.iter().map(RawStep::to_step).collect(),
        })
    }

    /// One line per step.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            match s {
                CircuitStep::Local { q0, q1 } => {
                    out.push_str(&format!(
                        "local q0=[[{:.6},{:.6}],[{:.6},{:.6}]] q1=[[{:.6},{:.6}],[{:.6},{:.6}]]\n",
                        q0.0[0][0],
                        q0.0[0][1],
                        q0.0[1][0],
                        q0.0[1][1],
                        q1.0[0][0],
                        q1.0[0][1],
                        q1.0[1][0],
                        q1.0[1][1],
                    ));
                }
                CircuitStep::Xx { beta } => out.push_str(&format!("xx beta={:.16e}\n", beta)),
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct Raw2x2 {
    re: [[f64; 2]; 2],
    im: [[f64; 2]; 2],
}

impl Raw2x2 {
    fn from_mat(m: &Mat2) -> Self {
        let mut re = [[0.0; 2]; 2];
        let mut im = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                re[i][j] = m.0[i][j].re;
                im[i][j] = m.0[i][j].im;
            }
        }
        Raw2x2 { re, im }
    }

    fn to_mat(&self) -> Mat2 {
        let mut m = Mat2::identity();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = c(self.re[i][j], self.im[i][j]);
            }
        }
        m
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawStep {
    Local { q0: Raw2x2, q1: Raw2x2 },
    Xx { beta: f64 },
}

impl RawStep {
    fn from_step(s: &CircuitStep) -> Self {
        match s {
            CircuitStep::Local { q0, q1 } => RawStep::Local {
                q0: Raw2x2::from_mat(q0),
                q1: Raw2x2::from_mat(q1),
            },
            CircuitStep::Xx { beta } => RawStep::Xx { beta: *beta },
        }
    }

    fn to_step(&self) -> CircuitStep {
        match self {
            RawStep::Local { q0, q1 } => CircuitStep::Local {
                q0: q0.to_mat(),
                q1: q1.to_mat(),
            },
            RawStep::Xx { beta } => CircuitStep::Xx { beta: *beta },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawCircuit {
    steps: Vec<RawStep>,
}

/// Ordered product of the steps' matrices.
pub fn reconstruct(circuit: &TwoQubitCircuit) -> Unitary4 {
    let mut m = Mat4::identity();
    for s in &circuit.steps {
        m = m.mul(&s.matrix());
    }
    Unitary4::new_unchecked(m)
}

// ---------------------------------------------------------------------------
// Interference step: CAN(a1, a2, 0) . (Z_d x Z_e) . XX_beta = CAN(b1, b2, 0)
// up to Z-rotation outer gates.
// ---------------------------------------------------------------------------

/// The inner and outer Z-rotation angles of a single extension step.
#[derive(Clone, Copy, Debug)]
pub struct InterferenceAngles {
    pub d: f64,
    pub e: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

/// The region of pairs (b1, b2) reachable from (a1, a2) by appending one
/// XX interaction of strength `beta` with Z-rotation inner gates: a box in
/// the (sum, difference) coordinates.
#[derive(Clone, Copy, Debug)]
pub struct InterferenceBounds {
    pub sum_lo: f64,
    pub sum_hi: f64,
    pub diff_lo: f64,
    pub diff_hi: f64,
}

impl InterferenceBounds {
    pub fn contains(&self, b: (f64, f64), tol: f64) -> bool {
        let s = b.0 + b.1;
        let d = b.0 - b.1;
        s >= self.sum_lo - tol
            && s <= self.sum_hi + tol
            && d >= self.diff_lo - tol
            && d <= self.diff_hi + tol
    }
}

/// Reachability bounds for one appended interaction:
/// `a1+a2-beta <= b1+b2 <= pi/2 - |pi/2 - (a1+a2+beta)|` and
/// `|a1-a2-beta| <= b1-b2 <= a1-a2+beta`.
pub fn interference_bounds(a: (f64, f64), beta: f64) -> InterferenceBounds {
    let s = a.0 + a.1;
    let d = a.0 - a.1;
    InterferenceBounds {
        sum_lo: s - beta,
        sum_hi: FRAC_PI_2 - (FRAC_PI_2 - (s + beta)).abs(),
        diff_lo: (d - beta).abs(),
        diff_hi: d + beta,
    }
}

/// One double-angle cosine from the inner-angle equations, or None when the
/// denominator degenerates (the angle combination is then free).
fn inner_cosine(half_a: f64, beta: f64, half_b: f64, which: &str) -> Result<Option<f64>> {
    let (ca, sa) = (half_a.cos(), half_a.sin());
    let (cb, sb) = (beta.cos(), beta.sin());
    let target = half_b.cos();
    let den = 2.0 * ca * cb * sa * sb;
    let num = ca * ca * cb * cb + sa * sa * sb * sb - target * target;
    if den.abs() < DEGENERATE_DEN {
        if num.abs() > 1e-9 {
            return Err(Error::OutsideRegion {
                point: vec![half_b],
                bound: format!("{} interference bound (degenerate denominator)", which),
                violation: num.abs(),
            });
        }
        return Ok(None);
    }
    let q = num / den;
    if q.abs() > 1.0 + CLAMP_TOL {
        return Err(Error::OutsideRegion {
            point: vec![half_b],
            bound: format!("{} interference bound", which),
            violation: q.abs() - 1.0,
        });
    }
    Ok(Some(q.clamp(-1.0, 1.0)))
}

/// Inner Z-rotation angles (d, e) making
/// `CAN(a1, a2, 0) . (Z_d x Z_e) . XX_beta` locally Z-equivalent to
/// `CAN(b1, b2, 0)`; the returned pair passes the reconstruction check.
pub fn solve_interference_angles(a: (f64, f64), b: (f64, f64), beta: f64) -> Result<(f64, f64)> {
    connect_pair(a, b, beta).map(|angles| (angles.d, angles.e))
}

/// Full single-step solution: inner angles plus outer Z-rotations with
/// `CAN(a1,a2,0) . (Z_d x Z_e) . XX_beta = (Z_r x Z_s) . CAN(b1,b2,0) . (Z_t x Z_u)`
/// up to global phase.
pub fn connect_pair(a: (f64, f64), b: (f64, f64), beta: f64) -> Result<InterferenceAngles> {
    // cos 2(d+e) comes from the (a1-a2, b1-b2) equation, cos 2(d-e) from
    // the sums.
    let q_de_sum = inner_cosine(a.0 - a.1, beta, b.0 - b.1, "difference")?;
    let q_de_diff = inner_cosine(a.0 + a.1, beta, b.0 + b.1, "sum")?;
    let u_base = q_de_sum.map_or(0.0, |q| q.acos() / 2.0); // d + e
    let v_base = q_de_diff.map_or(0.0, |q| q.acos() / 2.0); // d - e
    let dressed_can = can(b.0, b.1, 0.0);
    let mut last_err = None;
    for su in [1.0, -1.0] {
        for sv in [1.0, -1.0] {
            let du = su * u_base;
            let dv = sv * v_base;
            let (d, e) = ((du + dv) / 2.0, (du - dv) / 2.0);
            let step_product = can(a.0, a.1, 0.0)
                .mul(&Mat4::kron(&rz(d), &rz(e)))
                .mul(&xx(beta));
            match solve_outer_phases(&step_product, &dressed_can) {
                Ok(outer) => {
                    return Ok(InterferenceAngles {
                        d,
                        e,
                        r: outer.0,
                        s: outer.1,
                        t: outer.2,
                        u: outer.3,
                    })
                }
                Err(e) => last_err = Some(e),
            }
            if v_base == 0.0 {
                break;
            }
        }
        if u_base == 0.0 {
            break;
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::PhaseSolveFailed("no inner-angle sign pattern reproduced the target".into())
    }))
}

/// Row phase coefficients of `Z_r x Z_s` in (r, s); the same pattern holds
/// for columns of `Z_t x Z_u` in (t, u).
const PHASE_SIGNS: [[f64; 2]; 4] = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];

/// Solves `(Z_r x Z_s) . inner . (Z_t x Z_u) = target` (up to global phase)
/// for the outer angles from the entry phases, using a full-rank set of
/// entries with magnitude above 1e-8 on both sides. Verified by
/// reconstruction to infidelity 1e-10.
pub fn solve_outer_phases(target: &Mat4, inner: &Mat4) -> Result<(f64, f64, f64, f64)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..4 {
        for k in 0..4 {
            let tv = target.0[j][k];
            let iv = inner.0[j][k];
            if tv.norm() < 1e-8 || iv.norm() < 1e-8 {
                if tv.norm().max(iv.norm()) > 1e-6 {
                    return Err(Error::PhaseSolveFailed(format!(
                        "entry ({}, {}) magnitudes differ: {:.3e} vs {:.3e}",
                        j,
                        k,
                        tv.norm(),
                        iv.norm()
                    )));
                }
                continue;
            }
            let row = vec![
                PHASE_SIGNS[j][0],
                PHASE_SIGNS[j][1],
                PHASE_SIGNS[k][0],
                PHASE_SIGNS[k][1],
                1.0,
            ];
            // Keep only rows that grow the rank.
            let mut w = row.clone();
            for b in &basis {
                let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= dot * bi;
                }
            }
            let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue;
            }
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            basis.push(w);
            rhs.push((tv.arg() - iv.arg()).rem_euclid(2.0 * PI));
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::PhaseSolveFailed(
            "no usable nonzero entries for the phase system".into(),
        ));
    }
    let x = crate::matrix::solve_small(&rows, &rhs, 1e-10)
        .ok_or_else(|| Error::PhaseSolveFailed("phase system inconsistent".into()))?;
    let (r, s, t, u) = (x[0], x[1], x[2], x[3]);
    let dressed = Mat4::kron(&rz(r), &rz(s))
        .mul(inner)
        .mul(&Mat4::kron(&rz(t), &rz(u)));
    let infid = average_infidelity(
        &Unitary4::new_unchecked(dressed),
        &Unitary4::new_unchecked(*target),
    );
    if infid > 1e-10 {
        return Err(Error::PhaseSolveFailed(format!(
            "phase solution failed verification (infidelity {:.3e})",
            infid
        )));
    }
    Ok((r, s, t, u))
}

// ---------------------------------------------------------------------------
// Predecessor choice: the four projected regions over (a_h, a_l).
// ---------------------------------------------------------------------------

/// Which of the four predecessor regions produced the answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionTag {
    pub reflected: bool,
    /// Index (1 or 3) of the target coordinate shared with the predecessor.
    pub fixed_index: usize,
}

/// A halfspace `cx * a_h + cy * a_l <= rhs`.
#[derive(Clone, Copy, Debug)]
struct Row2 {
    cx: f64,
    cy: f64,
    rhs: f64,
}

fn region_rows(
    b: &[f64; 3],
    totals: crate::circuit_polytope::StrengthTotals,
    beta: f64,
    reflected: bool,
    fixed_index: usize,
) -> Vec<Row2> {
    let (shared, pair) = if fixed_index == 3 {
        (b[2], (b[0], b[1]))
    } else {
        (b[0], (b[1], b[2]))
    };
    let (ps, pd) = (pair.0 + pair.1, pair.0 - pair.1);
    #[rustfmt::skip]
    let mut rows = vec![
        // Ordering and positivity of the free coordinates.
        Row2 { cx: -1.0, cy: 1.0, rhs: 0.0 },
        Row2 { cx: 0.0, cy: -1.0, rhs: 0.0 },
        // The disordered triple must respect the pairwise-sum bounds.
        Row2 { cx: 1.0, cy: 0.0, rhs: FRAC_PI_2 - shared },
        Row2 { cx: 0.0, cy: 1.0, rhs: FRAC_PI_2 - shared },
        Row2 { cx: 1.0, cy: 1.0, rhs: FRAC_PI_2 },
        // Frustrum bound, always imposed on a_l.
        Row2 { cx: 0.0, cy: 1.0, rhs: totals.sum - totals.max - totals.second },
        // Interference box against the target pair.
        Row2 { cx: 1.0, cy: 1.0, rhs: ps + beta },
        Row2 { cx: 1.0, cy: 1.0, rhs: PI - ps - beta },
        Row2 { cx: -1.0, cy: -1.0, rhs: -ps + beta },
        Row2 { cx: 1.0, cy: -1.0, rhs: pd + beta },
        Row2 { cx: -1.0, cy: 1.0, rhs: -pd + beta },
        Row2 { cx: -1.0, cy: 1.0, rhs: pd - beta },
    ];
    // Prefix-membership rows for the disordered predecessor triple; the
    // reflected regions use the reflected inequality family.
    #[rustfmt::skip]
    match (reflected, fixed_index) {
        (false, 3) => {
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: totals.sum - shared });
            rows.push(Row2 { cx: -1.0, cy: 1.0, rhs: totals.sum - 2.0 * totals.max - shared });
        }
        (true, 3) => {
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: FRAC_PI_2 - shared + totals.sum - 2.0 * totals.max });
            rows.push(Row2 { cx: -1.0, cy: 1.0, rhs: -FRAC_PI_2 - shared + totals.sum });
        }
        (false, 1) => {
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: totals.sum - shared });
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: shared + totals.sum - 2.0 * totals.max });
        }
        (true, 1) => {
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: FRAC_PI_2 - shared + totals.sum - 2.0 * totals.max });
            rows.push(Row2 { cx: 1.0, cy: 1.0, rhs: -FRAC_PI_2 + shared + totals.sum });
        }
        _ => unreachable!("fixed index is 1 or 3"),
    };
    rows
}

/// Feasible vertices of a 2D halfspace system, deduplicated.
fn region_vertices(rows: &[Row2]) -> Vec<(f64, f64)> {
    let tol = 1e-9;
    let mut verts: Vec<(f64, f64)> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let det = rows[i].cx * rows[j].cy - rows[i].cy * rows[j].cx;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (rows[i].rhs * rows[j].cy - rows[i].cy * rows[j].rhs) / det;
            let y = (rows[i].cx * rows[j].rhs - rows[i].rhs * rows[j].cx) / det;
            if rows.iter().all(|r| r.cx * x + r.cy * y <= r.rhs + tol)
                && !verts
                    .iter()
                    .any(|v| (v.0 - x).abs() <= 1e-9 && (v.1 - y).abs() <= 1e-9)
            {
                verts.push((x, y));
            }
        }
    }
    verts
}

/// Chooses a predecessor coordinate for one synthesis step: a disordered
/// triple `(a_h, a_l, a_f)` feasible for the prefix polytope and reachable
/// to the target by appending `XX_beta`. Regions are tried in a fixed order
/// (unreflected before reflected, shared third coordinate before shared
/// first); within a region the feasible vertex minimizing `a_h + a_l` wins,
/// ties broken lexicographically.
pub fn choose_predecessor(
    b: &CanonicalCoordinate,
    prefix: &StrengthSequence,
    beta: f64,
) -> Result<(UnsortedCoordinate, RegionTag, usize)> {
    let totals = prefix.totals();
    let order = [
        (false, 3usize),
        (false, 1usize),
        (true, 3usize),
        (true, 1usize),
    ];
    for (reflected, fixed_index) in order {
        let rows = region_rows(&b.0, totals, beta, reflected, fixed_index);
        let mut verts = region_vertices(&rows);
        if verts.is_empty() {
            continue;
        }
        verts.sort_by(|p, q| {
            (p.0 + p.1, p.0, p.1)
                .partial_cmp(&(q.0 + q.1, q.0, q.1))
                .expect("finite vertices")
        });
        let shared = if fixed_index == 3 { b.0[2] } else { b.0[0] };
        for &(ah, al) in &verts {
            let ah = ah.max(0.0);
            let al = al.max(0.0).min(ah);
            let dis = UnsortedCoordinate([ah, al, shared]);
            if disordered_member(prefix, &dis, 1e-8) {
                let tag = RegionTag {
                    reflected,
                    fixed_index,
                };
                return Ok((dis, tag, fixed_index));
            }
        }
    }
    Err(Error::SynthesisInconsistency(format!(
        "no predecessor region is feasible for {:?} with beta {}",
        b.0, beta
    )))
}

// ---------------------------------------------------------------------------
// Recursive synthesis.
// ---------------------------------------------------------------------------

/// Synthesizes a circuit with exactly the given XX strengths (as a multiset)
/// whose reconstruction is `CAN(a)` up to global phase.
pub fn synthesize_canonical(
    a: &CanonicalCoordinate,
    alphas: &StrengthSequence,
) -> Result<TwoQubitCircuit> {
    if !member(alphas, a, MEMBERSHIP_TOL.max(1e-9)) {
        return Err(Error::OutsideRegion {
            point: a.0.to_vec(),
            bound: "circuit polytope".into(),
            violation: f64::NAN,
        });
    }
    // Largest strength first: late steps, which must land exactly on the
    // target, stay small.
    let mut remaining: Vec<f64> = alphas.strengths().to_vec();
    remaining.sort_by(|x, y| y.partial_cmp(x).expect("finite strengths"));
    synth_rec(*a, &remaining)
}

fn synth_rec(target: CanonicalCoordinate, strengths: &[f64]) -> Result<TwoQubitCircuit> {
    if strengths.is_empty() {
        let scale: f64 = target.0.iter().map(|x| x.abs()).sum();
        if scale > 1e-6 {
            return Err(Error::SynthesisInconsistency(format!(
                "strengths exhausted away from the origin: {:?}",
                target.0
            )));
        }
        return Ok(TwoQubitCircuit::identity());
    }
    let beta = strengths[0];
    let prefix = StrengthSequence::new(strengths[1..].to_vec())?;
    let (dis, _region, fixed_index) = choose_predecessor(&target, &prefix, beta)?;
    let [ah, al, shared] = dis.0;
    // Move the shared coordinate of the target into the third slot.
    let (pair_target, perm_gates) = if fixed_index == 3 {
        ((target.0[0], target.0[1]), LocalGatePair::identity())
    } else {
        (
            (target.0[1], target.0[2]),
            weyl_conjugation_gates([2, 0, 1], [false; 3])?,
        )
    };
    let angles = connect_pair((ah, al), pair_target, beta)?;
    // Reduce the disordered predecessor to canonical position with exact
    // gate bookkeeping: CAN(dis) = l_pre . CAN(pred) . r_pre.
    let reduced = canonicalize([ah, al, shared]);
    let pred = CanonicalCoordinate(reduced.coord);
    debug_assert!(
        member(&prefix, &pred, 1e-7),
        "predecessor {:?} escaped the prefix polytope",
        pred.0
    );
    let mut circuit = synth_rec(pred, prefix.strengths())?;
    // CAN(target) = G (Z_-r x Z_-s) l_pre [CAN(pred)] r_pre (Z_d x Z_e)
    //               XX_beta (Z_-t x Z_-u) G^dagger, up to global phase.
    let left = LocalGatePair {
        q0: perm_gates.q0.mul(&rz(-angles.r)).mul(&reduced.left.q0),
        q1: perm_gates.q1.mul(&rz(-angles.s)).mul(&reduced.left.q1),
    };
    let mid = LocalGatePair {
        q0: reduced.right.q0.mul(&rz(angles.d)),
        q1: reduced.right.q1.mul(&rz(angles.e)),
    };
    let right = LocalGatePair {
        q0: rz(-angles.t).mul(&perm_gates.q0.adjoint()),
        q1: rz(-angles.u).mul(&perm_gates.q1.adjoint()),
    };
    circuit.premultiply_local(&left);
    circuit.postmultiply_local(&mid);
    circuit.steps.push(CircuitStep::Xx { beta });
    circuit.steps.push(CircuitStep::Local {
        q0: right.q0,
        q1: right.q1,
    });
    Ok(circuit)
}
