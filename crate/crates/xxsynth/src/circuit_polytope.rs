//! Circuit polytopes: the set of canonical coordinates reachable by a
//! circuit with a prescribed sequence of XX interaction strengths and
//! arbitrary interleaved one-qubit gates.
//!
//! For strengths `(alpha_j)` with derived quantities `alpha_plus` (sum),
//! `alpha_max` (largest) and `alpha_second` (second largest, padding with
//! zeros), the reachable set is the union of two convex bodies cut out of
//! the alcove by three inequality families: the strength, slant, and
//! frustrum bounds, with the second body the reflection image of the first
//! under `a1 -> pi/2 - a1`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::polytope::{ConvexPolytope, LinearInequality, PolytopeUnion};
use crate::weyl::{CanonicalCoordinate, UnsortedCoordinate};

/// An ordered list of XX interaction strengths, each in [0, pi/4].
#[derive(Clone, Debug, PartialEq)]
pub struct StrengthSequence {
    alphas: Vec<f64>,
}

/// Derived strength data: total, largest, and second largest entry under
/// the zero-padding convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrengthTotals {
    pub sum: f64,
    pub max: f64,
    pub second: f64,
}

impl StrengthSequence {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        for &a in &alphas {
            if !(0.0..=FRAC_PI_4 + 1e-12).contains(&a) {
                return Err(Error::StrengthOutOfRange { strength: a });
            }
        }
        Ok(StrengthSequence { alphas })
    }

    /// Interprets each entry as a CX fraction, mapping `f` to `f * pi/4`.
    pub fn from_cx_fractions(fractions: &[f64]) -> Result<Self> {
        Self::new(fractions.iter().map(|f| f * FRAC_PI_4).collect())
    }

    pub fn strengths(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Totals computed as if the list were padded with zeros, so the second
    /// largest of a singleton is 0 and both extremes of an empty list are 0.
    /// Zero entries themselves change nothing.
    pub fn totals(&self) -> StrengthTotals {
        let mut sum = 0.0;
        let mut max = 0.0f64;
        let mut second = 0.0f64;
        for &a in &self.alphas {
            sum += a;
            if a > max {
                second = max;
                max = a;
            } else if a > second {
                second = a;
            }
        }
        StrengthTotals { sum, max, second }
    }
}

/// Alcove inequalities: `a1 >= a2 >= a3 >= 0`, `a1 + a2 <= pi/2`.
pub fn alcove_rows() -> Vec<LinearInequality> {
    vec![
        LinearInequality::new([-1.0, 1.0, 0.0], 0.0),
        LinearInequality::new([0.0, -1.0, 1.0], 0.0),
        LinearInequality::new([0.0, 0.0, -1.0], 0.0),
        LinearInequality::new([1.0, 1.0, 0.0], FRAC_PI_2),
    ]
}

/// The closed alcove as a polytope (vertices 0, CX, the reflected CX image,
/// and SWAP).
pub fn alcove_polytope() -> ConvexPolytope {
    ConvexPolytope::new(alcove_rows(), "alcove")
}

fn body_rows(t: StrengthTotals, reflected: bool) -> Vec<LinearInequality> {
    let mut rows = alcove_rows();
    if !reflected {
        rows.push(LinearInequality::new([1.0, 1.0, 1.0], t.sum));
        rows.push(LinearInequality::new([-1.0, 1.0, 1.0], t.sum - 2.0 * t.max));
    } else {
        rows.push(LinearInequality::new([-1.0, 1.0, 1.0], t.sum - FRAC_PI_2));
        rows.push(LinearInequality::new(
            [1.0, 1.0, 1.0],
            FRAC_PI_2 + t.sum - 2.0 * t.max,
        ));
    }
    rows.push(LinearInequality::new(
        [0.0, 0.0, 1.0],
        t.sum - t.max - t.second,
    ));
    rows
}

/// The circuit polytope of a strength sequence: a union of exactly two
/// convex bodies (unreflected and reflected), intersected with the alcove.
pub fn circuit_polytope(alphas: &StrengthSequence) -> PolytopeUnion {
    let t = alphas.totals();
    let label: String = format!(
        "xx[{}]",
        alphas
            .strengths()
            .iter()
            .map(|a| format!("{:.4}", a))
            .collect::<Vec<_>>()
            .join(",")
    );
    PolytopeUnion {
        components: vec![
            ConvexPolytope::new(body_rows(t, false), format!("{}:unreflected", label)),
            ConvexPolytope::new(body_rows(t, true), format!("{}:reflected", label)),
        ],
    }
}

/// Membership of a canonical coordinate in the circuit polytope.
pub fn member(alphas: &StrengthSequence, a: &CanonicalCoordinate, tol: f64) -> bool {
    circuit_polytope(alphas).contains(&a.0, tol)
}

/// Membership for an order-free triple: sort (and reflect across the
/// `a3 = 0` seam) first.
pub fn disordered_member(alphas: &StrengthSequence, a: &UnsortedCoordinate, tol: f64) -> bool {
    member(alphas, &a.to_canonical(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::MEMBERSHIP_TOL;

    fn fig1_point() -> CanonicalCoordinate {
        CanonicalCoordinate([0.968, 0.273, 0.038])
    }

    fn seq(fracs: &[f64]) -> StrengthSequence {
        StrengthSequence::from_cx_fractions(fracs).unwrap()
    }

    #[test]
    fn totals_follow_zero_padding() {
        let t = StrengthSequence::new(vec![]).unwrap().totals();
        assert_eq!((t.sum, t.max, t.second), (0.0, 0.0, 0.0));
        let t = StrengthSequence::new(vec![0.3]).unwrap().totals();
        assert_eq!((t.sum, t.max, t.second), (0.3, 0.3, 0.0));
        let t = StrengthSequence::new(vec![0.1, 0.3, 0.2]).unwrap().totals();
        assert!((t.sum - 0.6).abs() < 1e-15);
        assert_eq!((t.max, t.second), (0.3, 0.2));
        // Explicit zeros change nothing.
        let t2 = StrengthSequence::new(vec![0.1, 0.0, 0.3, 0.2, 0.0])
            .unwrap()
            .totals();
        assert_eq!((t2.max, t2.second), (0.3, 0.2));
    }

    #[test]
    fn out_of_range_strengths_rejected() {
        assert!(StrengthSequence::new(vec![FRAC_PI_4 * 1.01]).is_err());
        assert!(StrengthSequence::new(vec![-0.1]).is_err());
    }

    #[test]
    fn empty_sequence_is_identity_point() {
        let p = circuit_polytope(&StrengthSequence::new(vec![]).unwrap());
        let verts = p.components[0].vertices().unwrap();
        assert_eq!(verts.len(), 1);
        for c in verts[0] {
            assert!(c.abs() < 1e-12);
        }
        assert!(p.contains(&[0.0, 0.0, 0.0], MEMBERSHIP_TOL));
        assert!(!p.contains(&[0.1, 0.0, 0.0], MEMBERSHIP_TOL));
    }

    #[test]
    fn uniform_strengths_degenerate_to_common_bound() {
        // With n equal strengths, slant and frustrum both reduce to (n-2)a.
        let a = 0.3;
        for n in 2..6 {
            let t = StrengthSequence::new(vec![a; n]).unwrap().totals();
            let slant = t.sum - 2.0 * t.max;
            let frustrum = t.sum - t.max - t.second;
            assert!((slant - (n as f64 - 2.0) * a).abs() < 1e-12);
            assert!((frustrum - (n as f64 - 2.0) * a).abs() < 1e-12);
        }
    }

    #[test]
    fn three_cx_covers_alcove() {
        let p = circuit_polytope(&seq(&[1.0, 1.0, 1.0]));
        for v in alcove_polytope().vertices().unwrap() {
            assert!(p.contains(&v, MEMBERSHIP_TOL), "vertex {:?}", v);
        }
    }

    #[test]
    fn fig1_membership_matrix() {
        let x = fig1_point();
        assert!(member(&seq(&[1.0, 1.0, 1.0]), &x, MEMBERSHIP_TOL));
        assert!(member(&seq(&[0.5, 0.5, 0.5]), &x, MEMBERSHIP_TOL));
        assert!(member(
            &seq(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            &x,
            MEMBERSHIP_TOL
        ));
        assert!(member(
            &seq(&[1.0 / 3.0, 1.0 / 3.0, 0.5]),
            &x,
            MEMBERSHIP_TOL
        ));
        assert!(!member(
            &seq(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            &x,
            MEMBERSHIP_TOL
        ));
    }

    #[test]
    fn disordered_membership_examples() {
        let x = UnsortedCoordinate([0.0, 0.273, 0.968]);
        // Invalid-looking orderings are fine; sorting recovers membership.
        assert!(disordered_member(&seq(&[0.5, 0.5, 0.5]), &x, MEMBERSHIP_TOL));
        assert!(disordered_member(
            &StrengthSequence::new(vec![]).unwrap(),
            &UnsortedCoordinate([0.0, 0.0, 0.0]),
            MEMBERSHIP_TOL
        ));
        // Permutations of a member point stay members.
        let perms = [
            [0.968, 0.273, 0.038],
            [0.273, 0.968, 0.038],
            [0.038, 0.273, 0.968],
        ];
        for p in perms {
            assert!(disordered_member(
                &seq(&[0.5, 0.5, 0.5]),
                &UnsortedCoordinate(p),
                MEMBERSHIP_TOL
            ));
        }
    }

    #[test]
    fn reflection_closure() {
        let alphas = seq(&[0.5, 1.0 / 3.0]);
        let pts = [[0.3, 0.2, 0.1], [0.6, 0.3, 0.05], [0.2, 0.2, 0.2]];
        for p in pts {
            let refl = [FRAC_PI_2 - p[0], p[1], p[2]];
            let u = circuit_polytope(&alphas);
            assert_eq!(
                u.contains(&p, MEMBERSHIP_TOL),
                u.contains(&refl, MEMBERSHIP_TOL),
                "point {:?}",
                p
            );
        }
    }
}
