//! H-representation polytope geometry over alcove coordinates.
//!
//! Polytopes are intersections of halfspaces `coeffs . x <= rhs` in three
//! dimensions. The module provides membership, vertex enumeration by plane
//! triples, orthogonal projection onto facet hulls, density-weighted convex
//! volumes by simplex quadrature, and nonconvex union volumes through an
//! inclusion-exclusion traversal with vanishing-intersection and
//! child-cancellation skip lists.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::solve3;

/// Default membership slack tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Vertex deduplication tolerance.
pub const VERTEX_DEDUP_TOL: f64 = 1e-9;
/// A vertex ties to a facet when its slack is below this.
pub const ON_FACET_TOL: f64 = 1e-8;
/// Feasibility slack allowed when filtering candidate vertices.
pub const VERTEX_FEAS_TOL: f64 = 1e-9;
/// Default quadrature order (Gauss points per collapsed axis).
pub const DEFAULT_QUADRATURE_ORDER: usize = 25;

/// A halfspace `coeffs . x <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearInequality {
    pub coeffs: [f64; 3],
    pub rhs: f64,
}

impl LinearInequality {
    pub fn new(coeffs: [f64; 3], rhs: f64) -> Self {
        LinearInequality { coeffs, rhs }
    }

    /// Signed slack `rhs - coeffs . x`; nonnegative inside.
    pub fn slack(&self, x: &[f64; 3]) -> f64 {
        self.rhs - self.coeffs[0] * x[0] - self.coeffs[1] * x[1] - self.coeffs[2] * x[2]
    }
}

/// A convex polytope as a list of halfspaces, with a diagnostic label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexPolytope {
    #[serde(rename = "ineqs")]
    pub inequalities: Vec<LinearInequality>,
    pub label: String,
}

/// A finite union of convex polytopes; components may overlap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolytopeUnion {
    pub components: Vec<ConvexPolytope>,
}

impl PolytopeUnion {
    pub fn contains(&self, x: &[f64; 3], tol: f64) -> bool {
        self.components.iter().any(|p| p.contains(x, tol))
    }
}

impl ConvexPolytope {
    pub fn new(inequalities: Vec<LinearInequality>, label: impl Into<String>) -> Self {
        ConvexPolytope {
            inequalities,
            label: label.into(),
        }
    }

    /// True iff every inequality slack is at least `-tol`.
    pub fn contains(&self, x: &[f64; 3], tol: f64) -> bool {
        self.inequalities.iter().all(|b| b.slack(x) >= -tol)
    }

    /// Intersection by concatenating inequality lists, dropping rows that
    /// duplicate an earlier row exactly.
    pub fn intersect(&self, other: &ConvexPolytope) -> ConvexPolytope {
        let mut rows = self.inequalities.clone();
        for r in &other.inequalities {
            if !rows.iter().any(|q| q == r) {
                rows.push(*r);
            }
        }
        ConvexPolytope {
            inequalities: rows,
            label: format!("{}*{}", self.label, other.label),
        }
    }

    /// All vertices, deduplicated; `Ok(vec![])` when infeasible.
    ///
    /// An unbounded feasible polytope is reported as an error, distinct from
    /// the infeasible case.
    pub fn vertices(&self) -> Result<Vec<[f64; 3]>> {
        let feasible_point = self.any_feasible_point();
        if feasible_point.is_some() && self.recession_nontrivial() {
            return Err(Error::Unbounded(self.label.clone()));
        }
        Ok(self.bounded_vertices())
    }

    fn bounded_vertices(&self) -> Vec<[f64; 3]> {
        let rows = &self.inequalities;
        let n = rows.len();
        let mut verts: Vec<[f64; 3]> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let a = [rows[i].coeffs, rows[j].coeffs, rows[k].coeffs];
                    let b = [rows[i].rhs, rows[j].rhs, rows[k].rhs];
                    let Some(x) = solve3(&a, &b, 1e-10) else {
                        continue;
                    };
                    if !self.contains(&x, VERTEX_FEAS_TOL) {
                        continue;
                    }
                    let dup = verts.iter().any(|v| {
                        (v[0] - x[0]).abs() <= VERTEX_DEDUP_TOL
                            && (v[1] - x[1]).abs() <= VERTEX_DEDUP_TOL
                            && (v[2] - x[2]).abs() <= VERTEX_DEDUP_TOL
                    });
                    if !dup {
                        verts.push(x);
                    }
                }
            }
        }
        verts
    }

    /// Cheap feasibility probe: tries plane feet, pairwise line feet,
    /// plane-triple intersections, and the origin.
    fn any_feasible_point(&self) -> Option<[f64; 3]> {
        let rows = &self.inequalities;
        if self.contains(&[0.0; 3], VERTEX_FEAS_TOL) {
            return Some([0.0; 3]);
        }
        for r in rows {
            let n2: f64 = r.coeffs.iter().map(|c| c * c).sum();
            if n2 < 1e-20 {
                continue;
            }
            let t = r.rhs / n2;
            let p = [r.coeffs[0] * t, r.coeffs[1] * t, r.coeffs[2] * t];
            if self.contains(&p, VERTEX_FEAS_TOL) {
                return Some(p);
            }
        }
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if let Ok(p) =
                    project_to_affine_hull(&[0.0; 3], &[rows[i], rows[j]])
                {
                    if self.contains(&p, VERTEX_FEAS_TOL) {
                        return Some(p);
                    }
                }
                for k in j + 1..rows.len() {
                    let a = [rows[i].coeffs, rows[j].coeffs, rows[k].coeffs];
                    let b = [rows[i].rhs, rows[j].rhs, rows[k].rhs];
                    if let Some(x) = solve3(&a, &b, 1e-10) {
                        if self.contains(&x, VERTEX_FEAS_TOL) {
                            return Some(x);
                        }
                    }
                }
            }
        }
        None
    }

    /// True when the recession cone `{v : coeffs . v <= 0}` contains a
    /// nonzero direction, detected on a box-capped copy of the cone.
    fn recession_nontrivial(&self) -> bool {
        let mut rows: Vec<LinearInequality> = self
            .inequalities
            .iter()
            .map(|r| LinearInequality::new(r.coeffs, 0.0))
            .collect();
        for axis in 0..3 {
            let mut up = [0.0; 3];
            up[axis] = 1.0;
            rows.push(LinearInequality::new(up, 1.0));
            let mut dn = [0.0; 3];
            dn[axis] = -1.0;
            rows.push(LinearInequality::new(dn, 1.0));
        }
        let capped = ConvexPolytope::new(rows, "recession");
        capped
            .bounded_vertices()
            .iter()
            .any(|v| v.iter().any(|c| c.abs() > 0.5))
    }
}

/// Least-squares orthogonal projection of `x` onto the affine hull of the
/// given equality rows (each `coeffs . p = rhs`).
pub fn project_to_affine_hull(x: &[f64; 3], equalities: &[LinearInequality]) -> Result<[f64; 3]> {
    let k = equalities.len();
    if k == 0 {
        return Ok(*x);
    }
    if k > 3 {
        return Err(Error::DegenerateSystem {
            rank: 3,
            expected: k,
        });
    }
    // p = x - N^T (N N^T)^{-1} (N x - d).
    let mut gram = vec![vec![0.0; k]; k];
    let mut resid = vec![0.0; k];
    for (i, ei) in equalities.iter().enumerate() {
        for (j, ej) in equalities.iter().enumerate() {
            gram[i][j] = ei.coeffs.iter().zip(&ej.coeffs).map(|(a, b)| a * b).sum();
        }
        resid[i] = -ei.slack(x);
    }
    // Solve gram . y = resid with a rank check.
    let norm: f64 = gram
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let y = crate::matrix::solve_small(&gram, &resid, 1e-12 * norm.max(1e-12))
        .ok_or(Error::DegenerateSystem {
            rank: 0,
            expected: k,
        })?;
    // Rank check: solve_small zeroes free variables, so verify consistency.
    for (i, row) in gram.iter().enumerate() {
        let s: f64 = row.iter().zip(&y).map(|(a, b)| a * b).sum();
        if (s - resid[i]).abs() > 1e-8 * (1.0 + norm) {
            return Err(Error::DegenerateSystem {
                rank: i,
                expected: k,
            });
        }
    }
    let mut p = *x;
    for (yi, e) in y.iter().zip(equalities) {
        for ax in 0..3 {
            p[ax] -= yi * e.coeffs[ax];
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Exact order-independent summation.
// ---------------------------------------------------------------------------

const ACC_LIMBS: usize = 72;
const LIMB_BITS: i64 = 32;
// Limb 0 holds bit weights 2^ACC_MIN_EXP .. 2^(ACC_MIN_EXP + 31).
const ACC_MIN_EXP: i64 = -1120;

/// Exact accumulator for f64 terms: a fixed-point integer wide enough to
/// hold any double exactly. Addition order cannot affect the result, and
/// terms that cancel exactly leave no residue.
pub struct ExactAccumulator {
    limbs: [i64; ACC_LIMBS],
    count: u32,
}

impl Default for ExactAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactAccumulator {
    pub fn new() -> Self {
        ExactAccumulator {
            limbs: [0; ACC_LIMBS],
            count: 0,
        }
    }

    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        assert!(x.is_finite(), "cannot accumulate non-finite term");
        if self.count >= (1 << 30) {
            self.normalize();
        }
        self.count += 1;
        let bits = x.to_bits();
        let neg = (bits >> 63) == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        // mantissa * 2^exp with a 53-bit (or subnormal) mantissa.
        let (mant, exp) = if biased == 0 {
            (frac as i64, -1074i64)
        } else {
            ((frac | (1 << 52)) as i64, biased - 1075)
        };
        let mant = if neg { -mant } else { mant };
        let offset = exp - ACC_MIN_EXP;
        debug_assert!(offset >= 0);
        let limb = (offset / LIMB_BITS) as usize;
        let shift = offset % LIMB_BITS;
        // mant << shift spans at most 85 bits: three 32-bit windows.
        let wide = (mant as i128) << shift;
        for w in 0..3 {
            let part = ((wide >> (w as i32 * 32)) & 0xffff_ffff) as i64;
            // Two's-complement windows: sign-extend the top window.
            let part = if w == 2 { (wide >> 64) as i64 } else { part };
            if limb + w < ACC_LIMBS {
                self.limbs[limb + w] += part;
            } else {
                assert!(part == 0, "accumulator overflow");
            }
        }
    }

    fn normalize(&mut self) {
        let mut carry: i64 = 0;
        for limb in self.limbs.iter_mut() {
            let v = *limb + carry;
            let low = v & 0xffff_ffff;
            *limb = low;
            carry = (v - low) >> LIMB_BITS;
        }
        assert!(carry == 0 || carry == -1, "accumulator overflow");
        if carry == -1 {
            // Negative total: leave the sign in the top limb.
            self.limbs[ACC_LIMBS - 1] += carry << LIMB_BITS;
        }
        self.count = 0;
    }

    /// Correctly rounded (nearest-even) value of the exact sum.
    pub fn value(&mut self) -> f64 {
        self.normalize();
        // Determine the sign by scanning from the top.
        let mut top = ACC_LIMBS;
        while top > 0 && self.limbs[top - 1] == 0 {
            top -= 1;
        }
        if top == 0 {
            return 0.0;
        }
        let negative = self.limbs[top - 1] < 0;
        let mut mag: Vec<u64> = Vec::with_capacity(ACC_LIMBS);
        if negative {
            // Negate the multi-limb value into magnitude form.
            let mut borrow: i128 = 0;
            for &l in self.limbs.iter() {
                let v = -(l as i128) + borrow;
                let low = v & 0xffff_ffff;
                mag.push(low as u64);
                borrow = (v - low) >> 32;
            }
        } else {
            mag.extend(self.limbs.iter().map(|&l| l as u64));
        }
        let mut hi = mag.len();
        while hi > 0 && mag[hi - 1] == 0 {
            hi -= 1;
        }
        if hi == 0 {
            return 0.0;
        }
        // Position of the most significant bit.
        let top_limb = mag[hi - 1];
        let msb_in_limb = 63 - top_limb.leading_zeros() as i64;
        let msb = (hi as i64 - 1) * LIMB_BITS + msb_in_limb + ACC_MIN_EXP;
        // Collect the top 54 bits (53 mantissa + 1 rounding) plus sticky.
        let mut mantissa: u64 = 0;
        let mut sticky = false;
        for bitpos in (msb - 53..=msb).rev() {
            mantissa <<= 1;
            if bitpos >= ACC_MIN_EXP {
                let off = bitpos - ACC_MIN_EXP;
                let limb = (off / LIMB_BITS) as usize;
                let bit = (mag[limb] >> (off % LIMB_BITS)) & 1;
                mantissa |= bit;
            }
        }
        if msb - 54 >= ACC_MIN_EXP {
            'outer: for bitpos in (ACC_MIN_EXP..=msb - 54).rev() {
                let off = bitpos - ACC_MIN_EXP;
                let limb = (off / LIMB_BITS) as usize;
                if (mag[limb] >> (off % LIMB_BITS)) & 1 == 1 {
                    sticky = true;
                    break 'outer;
                }
            }
        }
        let round_bit = mantissa & 1;
        let mut mant53 = mantissa >> 1;
        if round_bit == 1 && (sticky || mant53 & 1 == 1) {
            mant53 += 1;
        }
        let mut value = mant53 as f64;
        let mut exp = msb - 52;
        // Apply the binary exponent in safe chunks.
        while exp > 0 {
            let step = exp.min(512);
            value *= 2f64.powi(step as i32);
            exp -= step;
        }
        while exp < 0 {
            let step = (-exp).min(512);
            value *= 2f64.powi(-(step as i32));
            exp += step;
        }
        if negative {
            -value
        } else {
            value
        }
    }
}

/// Exact, order-independent sum of f64 terms.
pub fn exact_sum(terms: &[f64]) -> f64 {
    let mut acc = ExactAccumulator::new();
    for &t in terms {
        acc.add(t);
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules and simplex quadrature.
// ---------------------------------------------------------------------------

fn gauss_legendre_unit(n: usize) -> std::sync::Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<(Vec<f64>, Vec<f64>)>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some(rule) = guard.get(&n) {
        return rule.clone();
    }
    // Nodes and weights on [-1, 1] by Newton iteration on P_n.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let dpn = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dpn = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    // Map to [0, 1].
    for k in 0..n {
        nodes[k] = 0.5 * (nodes[k] + 1.0);
        weights[k] *= 0.5;
    }
    let rule = std::sync::Arc::new((nodes, weights));
    guard.insert(n, rule.clone());
    rule
}

/// Integral of `density` over the tetrahedron (a, b, c, d) via a collapsed
/// (Duffy) tensor Gauss rule with `order` points per axis.
fn tetrahedron_integral<F: Fn(&[f64; 3]) -> f64>(
    verts: &[[f64; 3]; 4],
    density: &F,
    order: usize,
) -> f64 {
    let [a, b, c_, d] = verts;
    let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let e2 = [c_[0] - a[0], c_[1] - a[1], c_[2] - a[2]];
    let e3 = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let det = e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0])
        + e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]);
    let jac = det.abs();
    if jac == 0.0 {
        return 0.0;
    }
    let rule = gauss_legendre_unit(order);
    let (nodes, weights) = (&rule.0, &rule.1);
    let mut total = 0.0;
    for (i, &xi) in nodes.iter().enumerate() {
        let mut slice_eta = 0.0;
        for (j, &eta) in nodes.iter().enumerate() {
            let mut slice_zeta = 0.0;
            for (k, &zeta) in nodes.iter().enumerate() {
                let l1 = xi;
                let l2 = eta * (1.0 - xi);
                let l3 = zeta * (1.0 - xi) * (1.0 - eta);
                let p = [
                    a[0] + e1[0] * l1 + e2[0] * l2 + e3[0] * l3,
                    a[1] + e1[1] * l1 + e2[1] * l2 + e3[1] * l3,
                    a[2] + e1[2] * l1 + e2[2] * l2 + e3[2] * l3,
                ];
                slice_zeta += weights[k] * density(&p);
            }
            slice_eta += weights[j] * slice_zeta * (1.0 - eta);
        }
        total += weights[i] * slice_eta * (1.0 - xi) * (1.0 - xi);
    }
    jac * total
}

fn affine_rank(verts: &[[f64; 3]]) -> usize {
    if verts.len() < 2 {
        return 0;
    }
    let base = verts[0];
    let mut basis: Vec<[f64; 3]> = Vec::new();
    for v in verts.iter().skip(1) {
        let mut w = [v[0] - base[0], v[1] - base[1], v[2] - base[2]];
        for b in &basis {
            let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for ax in 0..3 {
                w[ax] -= dot * b[ax];
            }
        }
        let n: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            for wx in w.iter_mut() {
                *wx /= n;
            }
            basis.push(w);
            if basis.len() == 3 {
                break;
            }
        }
    }
    basis.len()
}

/// Facets as deduplicated vertex-index lists, one per distinct supporting
/// plane with at least three incident vertices.
fn facet_index_sets(rows: &[LinearInequality], verts: &[[f64; 3]]) -> Vec<Vec<usize>> {
    let mut seen_keys: Vec<Vec<usize>> = Vec::new();
    let mut facets: Vec<Vec<usize>> = Vec::new();
    for row in rows {
        let mut idx: Vec<usize> = (0..verts.len())
            .filter(|&i| row.slack(&verts[i]).abs() <= ON_FACET_TOL)
            .collect();
        if idx.len() < 3 {
            continue;
        }
        // Order the facet vertices by angle in the facet plane.
        let n = row.coeffs;
        let nn: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nn < 1e-12 {
            continue;
        }
        let n = [n[0] / nn, n[1] / nn, n[2] / nn];
        let least = (0..3)
            .min_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).expect("finite"))
            .expect("three axes");
        let mut e = [0.0; 3];
        e[least] = 1.0;
        let mut u = [
            e[1] * n[2] - e[2] * n[1],
            e[2] * n[0] - e[0] * n[2],
            e[0] * n[1] - e[1] * n[0],
        ];
        let un: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for ux in u.iter_mut() {
            *ux /= un;
        }
        let w = [
            n[1] * u[2] - n[2] * u[1],
            n[2] * u[0] - n[0] * u[2],
            n[0] * u[1] - n[1] * u[0],
        ];
        let center = centroid(&idx.iter().map(|&i| verts[i]).collect::<Vec<_>>());
        idx.sort_by(|&i, &j| {
            let ang = |vi: &[f64; 3]| {
                let d = [vi[0] - center[0], vi[1] - center[1], vi[2] - center[2]];
                let du: f64 = d.iter().zip(&u).map(|(x, y)| x * y).sum();
                let dw: f64 = d.iter().zip(&w).map(|(x, y)| x * y).sum();
                dw.atan2(du)
            };
            ang(&verts[i])
                .partial_cmp(&ang(&verts[j]))
                .expect("finite angles")
        });
        let mut key = idx.clone();
        key.sort_unstable();
        if seen_keys.iter().any(|s| *s == key) {
            continue;
        }
        seen_keys.push(key);
        facets.push(idx);
    }
    facets
}

fn centroid(verts: &[[f64; 3]]) -> [f64; 3] {
    let n = verts.len() as f64;
    let mut c = [0.0; 3];
    for v in verts {
        for ax in 0..3 {
            c[ax] += v[ax];
        }
    }
    for cx in c.iter_mut() {
        *cx /= n;
    }
    c
}

fn dedup_rows(rows: &[LinearInequality]) -> Vec<LinearInequality> {
    let mut out: Vec<LinearInequality> = Vec::with_capacity(rows.len());
    for r in rows {
        if !out.iter().any(|q| q == r) {
            out.push(*r);
        }
    }
    out
}

/// Density-weighted volume of a bounded convex polytope: triangulate into
/// tetrahedra (facet fans against the vertex centroid) and integrate each
/// with the collapsed Gauss rule. Lower-dimensional polytopes have volume
/// exactly zero.
pub fn convex_volume_weighted<F: Fn(&[f64; 3]) -> f64>(
    p: &ConvexPolytope,
    density: &F,
    order: usize,
) -> Result<f64> {
    let rows = dedup_rows(&p.inequalities);
    let deduped = ConvexPolytope::new(rows.clone(), p.label.clone());
    let verts = deduped.vertices()?;
    if verts.len() < 4 || affine_rank(&verts) < 3 {
        return Ok(0.0);
    }
    // Drop rows with no vertex contact; they cannot support a facet and
    // removing them keeps region-equal polytopes on identical row sets.
    let binding: Vec<LinearInequality> = rows
        .iter()
        .copied()
        .filter(|r| verts.iter().any(|v| r.slack(v).abs() <= ON_FACET_TOL))
        .collect();
    let (rows, verts) = if binding.len() != rows.len() {
        let reduced = ConvexPolytope::new(binding.clone(), p.label.clone());
        let vs = reduced.bounded_vertices();
        (binding, vs)
    } else {
        (rows, verts)
    };
    if verts.len() < 4 || affine_rank(&verts) < 3 {
        return Ok(0.0);
    }
    let center = centroid(&verts);
    let facets = facet_index_sets(&rows, &verts);
    let mut terms: Vec<f64> = Vec::new();
    for facet in &facets {
        let anchor = verts[facet[0]];
        for t in 1..facet.len() - 1 {
            let tet = [anchor, verts[facet[t]], verts[facet[t + 1]], center];
            terms.push(tetrahedron_integral(&tet, density, order));
        }
    }
    Ok(exact_sum(&terms))
}

// ---------------------------------------------------------------------------
// Union volume by inclusion-exclusion with skip lists.
// ---------------------------------------------------------------------------

/// Counters reported by the union-volume engine.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnionStats {
    /// Convex volume evaluations actually performed.
    pub volume_evals: usize,
    /// Terms of the naive alternating sum, `2^n - 1`.
    pub naive_terms: u64,
    /// Terms restored by the double-count correction pass.
    pub corrections: usize,
}

struct MaskVolumes<'a, F: Fn(&[f64; 3]) -> f64> {
    components: &'a [ConvexPolytope],
    density: &'a F,
    order: usize,
    memo: HashMap<u64, f64>,
    evals: usize,
}

impl<'a, F: Fn(&[f64; 3]) -> f64> MaskVolumes<'a, F> {
    fn polytope(&self, mask: u64) -> ConvexPolytope {
        let mut acc: Option<ConvexPolytope> = None;
        for (i, p) in self.components.iter().enumerate() {
            if mask & (1 << i) != 0 {
                acc = Some(match acc {
                    None => p.clone(),
                    Some(q) => q.intersect(p),
                });
            }
        }
        acc.expect("nonempty mask")
    }

    fn volume(&mut self, mask: u64) -> Result<f64> {
        if let Some(&v) = self.memo.get(&mask) {
            return Ok(v);
        }
        let p = self.polytope(mask);
        let v = convex_volume_weighted(&p, self.density, self.order)?;
        self.evals += 1;
        self.memo.insert(mask, v);
        Ok(v)
    }

    fn cached(&self, mask: u64) -> Option<f64> {
        self.memo.get(&mask).copied()
    }
}

fn sign_for(mask: u64) -> f64 {
    if mask.count_ones() % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Volume of a union of convex polytopes under `density`.
///
/// Inclusion-exclusion over intersection masks, pruned by two skip lists:
/// vanishing intersections (all supersets skipped) and child cancellations
/// (an intersection whose volume bit-equals one of its immediate parents
/// zeroes out, together with all supersets of that parent, by pairing masks
/// that differ in the witnessing component). A correction pass reintroduces
/// terms whose cancellation partner was already claimed by an earlier entry.
/// The result equals the naive alternating sum over all 2^n - 1 masks.
pub fn union_volume_with_stats<F: Fn(&[f64; 3]) -> f64>(
    components: &[ConvexPolytope],
    density: &F,
    order: usize,
) -> Result<(f64, UnionStats)> {
    let n = components.len();
    assert!(n <= 63, "union engine supports at most 63 components");
    if n == 0 {
        return Ok((0.0, UnionStats::default()));
    }
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let mut vols = MaskVolumes {
        components,
        density,
        order,
        memo: HashMap::new(),
        evals: 0,
    };
    // Contributions recorded per mask so a child-cancellation can retract
    // its parent's term exactly.
    let mut contributions: HashMap<u64, f64> = HashMap::new();
    let mut type1: Vec<u64> = Vec::new(); // masks with vanishing volume
    let mut type2: Vec<(u64, u32)> = Vec::new(); // (parent mask, toggled component)
    let skip = |type1: &[u64], type2: &[(u64, u32)], mask: u64| -> bool {
        type1.iter().any(|&m| m & mask == m && m != mask)
            || type2.iter().any(|&(m, _)| m & mask == m && m != mask)
    };
    for depth in 1..=n as u32 {
        let mut did_work = false;
        // Ascending numeric order within a depth keeps runs deterministic.
        for mask in 1..=full {
            if mask.count_ones() != depth {
                continue;
            }
            if skip(&type1, &type2, mask) {
                continue;
            }
            let v = vols.volume(mask)?;
            if v == 0.0 {
                type1.push(mask);
                continue;
            }
            // Compare against immediate parents whose volume is known.
            let mut cancelled = false;
            for b in 0..n as u32 {
                if mask & (1 << b) == 0 {
                    continue;
                }
                let parent = mask & !(1 << b);
                if parent == 0 {
                    continue;
                }
                if vols.cached(parent) == Some(v) {
                    // The whole superset family of `parent` cancels in pairs
                    // differing by component b. Retract anything from that
                    // family counted so far (the parent, plus same-depth
                    // siblings visited earlier in this sweep).
                    contributions.retain(|&m, _| m & parent != parent);
                    type2.push((parent, b));
                    cancelled = true;
                    break;
                }
            }
            if cancelled {
                continue;
            }
            contributions.insert(mask, sign_for(mask) * v);
            did_work = true;
        }
        if !did_work {
            break;
        }
    }
    let mut corrections = 0usize;
    // Correction pass: a mask in entry t's family whose cancellation partner
    // was already claimed by an earlier entry lost its partner; its own term
    // must be restored. Constraints, for entry t = (I_t, j_t) and mask I:
    // I_t <= I, j_t not in I, no earlier entry claims I, and some earlier
    // entry claims I + {j_t}.
    for t in 0..type2.len() {
        let (mask_t, toggle_t) = type2[t];
        let toggle_bit = 1u64 << toggle_t;
        // Enumerate supersets of mask_t avoiding the toggle bit.
        let free = full & !mask_t & !toggle_bit;
        let mut extra = free;
        loop {
            let i_mask = mask_t | extra;
            let claimed_before_t = |m: u64| -> bool {
                type2[..t].iter().any(|&(ms, _)| ms & m == ms)
            };
            if !claimed_before_t(i_mask) && claimed_before_t(i_mask | toggle_bit) {
                let v = vols.volume(i_mask)?;
                *contributions.entry(i_mask).or_insert(0.0) += sign_for(i_mask) * v;
                corrections += 1;
            }
            if extra == 0 {
                break;
            }
            extra = (extra - 1) & free;
        }
    }
    // Deterministic readout: ascending mask order, exact accumulation.
    let mut masks: Vec<u64> = contributions.keys().copied().collect();
    masks.sort_unstable();
    let mut acc = ExactAccumulator::new();
    for m in masks {
        acc.add(contributions[&m]);
    }
    let stats = UnionStats {
        volume_evals: vols.evals,
        naive_terms: (1u128 << n) as u64 - 1,
        corrections,
    };
    Ok((acc.value(), stats))
}

/// Volume of a union of convex polytopes under `density`.
pub fn union_volume<F: Fn(&[f64; 3]) -> f64>(
    components: &[ConvexPolytope],
    density: &F,
    order: usize,
) -> Result<f64> {
    union_volume_with_stats(components, density, order).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn unit_box(lo: [f64; 3], hi: [f64; 3], label: &str) -> ConvexPolytope {
        let mut rows = Vec::new();
        for ax in 0..3 {
            let mut up = [0.0; 3];
            up[ax] = 1.0;
            rows.push(LinearInequality::new(up, hi[ax]));
            let mut dn = [0.0; 3];
            dn[ax] = -1.0;
            rows.push(LinearInequality::new(dn, -lo[ax]));
        }
        ConvexPolytope::new(rows, label)
    }

    fn unit_simplex() -> ConvexPolytope {
        ConvexPolytope::new(
            vec![
                LinearInequality::new([-1.0, 0.0, 0.0], 0.0),
                LinearInequality::new([0.0, -1.0, 0.0], 0.0),
                LinearInequality::new([0.0, 0.0, -1.0], 0.0),
                LinearInequality::new([1.0, 1.0, 1.0], 1.0),
            ],
            "simplex",
        )
    }

    #[test]
    fn contains_examples() {
        let s = unit_simplex();
        assert!(s.contains(&[0.0, 0.0, 0.0], 1e-10));
        assert!(!s.contains(&[1.0, 1.0, 1.0], 1e-10));
    }

    #[test]
    fn vertices_of_simplex_and_infeasible() {
        let s = unit_simplex();
        let vs = s.vertices().unwrap();
        assert_eq!(vs.len(), 4);
        let infeasible = ConvexPolytope::new(
            vec![
                LinearInequality::new([1.0, 0.0, 0.0], 0.0),
                LinearInequality::new([-1.0, 0.0, 0.0], -1.0),
                LinearInequality::new([0.0, 1.0, 0.0], 1.0),
                LinearInequality::new([0.0, -1.0, 0.0], 1.0),
                LinearInequality::new([0.0, 0.0, 1.0], 1.0),
                LinearInequality::new([0.0, 0.0, -1.0], 1.0),
            ],
            "empty",
        );
        assert!(infeasible.vertices().unwrap().is_empty());
        let halfspace = ConvexPolytope::new(
            vec![LinearInequality::new([1.0, 0.0, 0.0], -5.0)],
            "halfspace",
        );
        assert!(matches!(halfspace.vertices(), Err(Error::Unbounded(_))));
    }

    #[test]
    fn projection_examples() {
        // Point already on the hull.
        let plane = [LinearInequality::new([0.0, 0.0, 1.0], 0.0)];
        let p = project_to_affine_hull(&[1.0, 1.0, 0.0], &plane).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[2]).abs() < 1e-12);
        // (1,1,1) onto z = 0.
        let p = project_to_affine_hull(&[1.0, 1.0, 1.0], &plane).unwrap();
        assert!((p[2]).abs() < 1e-12 && (p[0] - 1.0).abs() < 1e-12);
        // Origin onto x + y + z = 1.
        let plane = [LinearInequality::new([1.0, 1.0, 1.0], 1.0)];
        let p = project_to_affine_hull(&[0.0, 0.0, 0.0], &plane).unwrap();
        for c in p {
            assert!((c - 1.0 / 3.0).abs() < 1e-12);
        }
        // Degenerate: two parallel planes.
        let bad = [
            LinearInequality::new([0.0, 0.0, 1.0], 0.0),
            LinearInequality::new([0.0, 0.0, 1.0], 1.0),
        ];
        assert!(project_to_affine_hull(&[0.0; 3], &bad).is_err());
    }

    #[test]
    fn volume_examples() {
        let one = |_: &[f64; 3]| 1.0;
        let s = unit_simplex();
        let v = convex_volume_weighted(&s, &one, 8).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12, "simplex volume {}", v);
        let b = unit_box([0.0; 3], [1.0, 2.0, 0.5], "box");
        let v = convex_volume_weighted(&b, &one, 8).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "box volume {}", v);
        // 2D-degenerate polytope has volume exactly zero.
        let flat = unit_box([0.0; 3], [1.0, 1.0, 0.0], "flat");
        assert_eq!(convex_volume_weighted(&flat, &one, 8).unwrap(), 0.0);
        // Weighted volume cross-check against a closed form:
        // integral of x*y*z over the unit box is 1/8.
        let cube = unit_box([0.0; 3], [1.0; 3], "cube");
        let xyz = |p: &[f64; 3]| p[0] * p[1] * p[2];
        let v = convex_volume_weighted(&cube, &xyz, 10).unwrap();
        assert!((v - 0.125).abs() < 1e-12, "weighted volume {}", v);
    }

    #[test]
    fn intersect_examples() {
        let a = unit_box([0.0; 3], [1.0; 3], "a");
        let same = a.intersect(&a);
        assert_eq!(same.inequalities.len(), a.inequalities.len());
        let b = unit_box([0.5; 3], [1.5; 3], "b");
        let ab = a.intersect(&b);
        let one = |_: &[f64; 3]| 1.0;
        let v = convex_volume_weighted(&ab, &one, 8).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
        let far = unit_box([2.0; 3], [3.0; 3], "far");
        let afar = a.intersect(&far);
        assert!(afar.vertices().unwrap().is_empty());
    }

    #[test]
    fn union_volume_disjoint_and_identical() {
        let one = |_: &[f64; 3]| 1.0;
        let a = unit_box([0.0; 3], [1.0; 3], "a");
        let b = unit_box([2.0; 3], [3.0; 3], "b");
        let v = union_volume(&[a.clone(), b], &one, 8).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "disjoint union {}", v);
        let v = union_volume(&[a.clone(), a.clone()], &one, 8).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "identical union {}", v);
        let v = union_volume(&[a.clone(), a.clone(), a], &one, 8).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "triple identical union {}", v);
    }

    #[test]
    fn exact_accumulator_is_exact_and_order_free() {
        let terms = [1e16, 1.0, -1e16, 2.5, -0.5, 1e-30, -1e-30];
        assert_eq!(exact_sum(&terms), 3.0);
        let mut rev = terms;
        rev.reverse();
        assert_eq!(exact_sum(&rev), 3.0);
        // Cancelling pairs leave no residue.
        let with_pairs = [0.1, 0.3, -0.3, 0.2];
        let without = [0.1, 0.2];
        assert_eq!(exact_sum(&with_pairs), exact_sum(&without));
        assert_eq!(exact_sum(&[]), 0.0);
        assert_eq!(exact_sum(&[-0.0, 0.0]), 0.0);
    }

    // The naive alternating-sum oracle, sharing convex_volume_weighted and
    // exact summation so agreement can be checked bit-for-bit.
    pub fn naive_union_volume(components: &[ConvexPolytope], order: usize) -> f64 {
        let one = |_: &[f64; 3]| 1.0;
        let n = components.len();
        let mut acc = ExactAccumulator::new();
        for mask in 1u64..(1 << n) {
            let mut p: Option<ConvexPolytope> = None;
            for (i, comp) in components.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    p = Some(match p {
                        None => comp.clone(),
                        Some(q) => q.intersect(comp),
                    });
                }
            }
            let v = convex_volume_weighted(&p.unwrap(), &one, order).unwrap();
            acc.add(sign_for(mask) * v);
        }
        acc.value()
    }

    #[test]
    fn union_volume_matches_naive_on_degenerate_families() {
        let one = |_: &[f64; 3]| 1.0;
        // Nested, duplicated, and disjoint boxes: heavy skip-list traffic.
        let fams: Vec<Vec<ConvexPolytope>> = vec![
            vec![
                unit_box([0.0; 3], [4.0; 3], "big"),
                unit_box([0.0; 3], [4.0; 3], "big2"),
                unit_box([1.0; 3], [2.0; 3], "inner"),
                unit_box([5.0; 3], [6.0; 3], "off"),
            ],
            vec![
                unit_box([0.0; 3], [3.0; 3], "a"),
                unit_box([1.0; 3], [2.0; 3], "b"),
                unit_box([1.0; 3], [2.0; 3], "b2"),
                unit_box([1.5; 3], [1.75; 3], "c"),
                unit_box([10.0; 3], [11.0; 3], "d"),
            ],
            vec![
                unit_box([0.0; 3], [1.0; 3], "x"),
                unit_box([0.0; 3], [1.0; 3], "x2"),
                unit_box([0.0; 3], [1.0; 3], "x3"),
                unit_box([0.5, 0.0, 0.0], [1.5, 1.0, 1.0], "y"),
            ],
        ];
        for (fi, fam) in fams.iter().enumerate() {
            let fast = union_volume(fam, &one, 6).unwrap();
            let naive = naive_union_volume(fam, 6);
            assert_eq!(fast, naive, "family {} fast {} naive {}", fi, fast, naive);
        }
    }

    #[test]
    fn union_volume_random_boxes_match_naive_exactly() {
        use rand::Rng;
        use rand::SeedableRng;
        let one = |_: &[f64; 3]| 1.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12345);
        for trial in 0..40 {
            let n = rng.gen_range(2..=6);
            let mut fam: Vec<ConvexPolytope> = Vec::new();
            for b in 0..n {
                // Mix fresh boxes with exact duplicates of earlier ones.
                if b > 0 && rng.gen_bool(0.3) {
                    let src: usize = rng.gen_range(0..fam.len());
                    let mut dup: ConvexPolytope = fam[src].clone();
                    dup.label = format!("dup{}", b);
                    fam.push(dup);
                    continue;
                }
                let lo = [
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(0.0..2.0),
                ];
                let hi = [
                    lo[0] + rng.gen_range(0.2..2.0),
                    lo[1] + rng.gen_range(0.2..2.0),
                    lo[2] + rng.gen_range(0.2..2.0),
                ];
                fam.push(unit_box(lo, hi, &format!("r{}", b)));
            }
            let fast = union_volume(&fam, &one, 5).unwrap();
            let naive = naive_union_volume(&fam, 5);
            assert_eq!(fast, naive, "trial {}", trial);
        }
    }

    #[test]
    fn union_volume_correction_pass_restores_double_cancellations() {
        // Two cancellation families overlap: the intersection of p1 and p2
        // equals its extension by p0, and the intersection of p3 and p4
        // equals its extension by p2. The doubly-claimed masks must be
        // restored by the correction pass.
        let one = |_: &[f64; 3]| 1.0;
        let fam = vec![
            unit_box([0.0, 0.0, 0.0], [2.5, 2.0, 2.0], "p0"),
            unit_box([1.0, 0.0, 0.0], [2.5, 5.0, 2.0], "p1"),
            unit_box([1.0, 0.0, 0.0], [3.0, 2.0, 2.0], "p2"),
            unit_box([2.0, 0.0, 0.0], [3.0, 2.0, 5.0], "p3"),
            unit_box([2.0, 0.0, 0.0], [3.0, 5.0, 2.0], "p4"),
        ];
        let (fast, stats) = union_volume_with_stats(&fam, &one, 4).unwrap();
        let slow = naive_union_volume(&fam, 4);
        assert!(stats.corrections > 0, "correction pass did not engage");
        assert_eq!(fast, slow);
    }

    #[test]
    fn union_volume_skips_most_evaluations_on_false_complexity() {
        let one = |_: &[f64; 3]| 1.0;
        // Many duplicated boxes: true complexity is tiny.
        let mut fam = Vec::new();
        for i in 0..10 {
            let mut b = unit_box([0.0; 3], [1.0; 3], &format!("m{}", i));
            if i >= 5 {
                b = unit_box([3.0; 3], [4.0; 3], &format!("m{}", i));
            }
            fam.push(b);
        }
        let (v, stats) = union_volume_with_stats(&fam, &one, 5).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(
            (stats.volume_evals as f64) < 0.25 * stats.naive_terms as f64,
            "evals {} of {}",
            stats.volume_evals,
            stats.naive_terms
        );
    }
}
