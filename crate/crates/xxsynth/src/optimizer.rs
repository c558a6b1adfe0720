//! Cost models, the best-first optimal synthesis driver, mirror synthesis,
//! and exact / Monte-Carlo evaluation of expected gate-set cost under an
//! affine error model.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::approximator::nearest_point;
use crate::circuit_polytope::{alcove_polytope, circuit_polytope, StrengthSequence};
use crate::decomposer::{synthesize_canonical, CircuitStep, TwoQubitCircuit};
use crate::error::{Error, Result};
use crate::polytope::{
    convex_volume_weighted, union_volume, ConvexPolytope, PolytopeUnion, MEMBERSHIP_TOL,
};
use crate::weyl::{
    haar_density, haar_random_from_rng, kak_decompose, mirror_coordinate, monodromy_coordinate,
    swap_gate, CanonicalCoordinate, Unitary4, UnsortedCoordinate,
};

/// Quadrature order used for the Haar-weighted volumes of the expected-cost
/// integrals. Trigonometric densities over alcove tetrahedra converge far
/// below the 2% acceptance tolerances at this order.
const COST_QUADRATURE_ORDER: usize = 10;

/// Residual Haar volume at which the exact expected-cost enumeration stops.
const COVERAGE_RESIDUAL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Cost model and gate sets.
// ---------------------------------------------------------------------------

/// Affine per-gate error model: an XX interaction of strength `beta` costs
/// `m * beta + b` in average infidelity.
#[derive(Clone, Copy, Debug)]
pub struct ErrorModel {
    pub m: f64,
    pub b: f64,
}

impl ErrorModel {
    pub fn new(m: f64, b: f64) -> Result<Self> {
        if m < 0.0 || b < 0.0 {
            return Err(Error::InvalidValue {
                field: "error model".into(),
                reason: format!("m = {}, b = {} must be nonnegative", m, b),
            });
        }
        Ok(ErrorModel { m, b })
    }

    /// Reference experimental values: full-strength slope
    /// `m * pi/4 = 5.76e-3` and offset `b = 1.909e-3`.
    pub fn reference() -> Self {
        ErrorModel {
            m: 5.76e-3 / FRAC_PI_4,
            b: 1.909e-3,
        }
    }

    pub fn gate_cost(&self, beta: f64) -> f64 {
        self.m * beta + self.b
    }
}

/// A finite set of distinct interaction strengths in (0, pi/4].
#[derive(Clone, Debug)]
pub struct GateSet {
    strengths: Vec<f64>,
}

impl GateSet {
    pub fn new(mut strengths: Vec<f64>) -> Result<Self> {
        strengths.sort_by(|a, b| a.partial_cmp(b).expect("finite strengths"));
        strengths.dedup();
        if strengths.is_empty() {
            return Err(Error::InvalidGateSet("no strengths given".into()));
        }
        for &s in &strengths {
            if !(s > 0.0 && s <= FRAC_PI_4 + 1e-12) {
                return Err(Error::InvalidGateSet(format!(
                    "strength {} outside (0, pi/4]",
                    s
                )));
            }
        }
        Ok(GateSet { strengths })
    }

    pub fn from_cx_fractions(fracs: &[f64]) -> Result<Self> {
        Self::new(fracs.iter().map(|f| f * FRAC_PI_4).collect())
    }

    /// Strengths in ascending order.
    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }
}

/// Additive template cost: the sum of per-gate costs of a word.
pub fn template_cost(word: &StrengthSequence, em: &ErrorModel) -> f64 {
    word.strengths().iter().map(|&a| em.gate_cost(a)).sum()
}

/// Synthesis behavior switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthesisMode {
    Exact,
    Approximate,
}

#[derive(Clone, Copy, Debug)]
pub struct SynthesisOptions {
    pub mode: SynthesisMode,
    pub mirror: bool,
    /// Membership slack for polytope queries.
    pub membership_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            mode: SynthesisMode::Exact,
            mirror: false,
            membership_tol: MEMBERSHIP_TOL,
        }
    }
}

/// Outcome of optimal synthesis.
#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub circuit: TwoQubitCircuit,
    pub approximant: CanonicalCoordinate,
    pub total_cost: f64,
    pub mirrored: bool,
}

// ---------------------------------------------------------------------------
// Best-first template enumeration.
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct QueueItem {
    cost: f64,
    word: Vec<usize>,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.word == other.word
    }
}
impl Eq for QueueItem {}
impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed for a min-heap; ties lexicographic on the sorted word.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.word.cmp(&self.word))
    }
}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multiset words over the gate set, yielded in ascending template cost.
struct TemplateStream<'a> {
    gs: &'a GateSet,
    em: &'a ErrorModel,
    heap: BinaryHeap<QueueItem>,
}

impl<'a> TemplateStream<'a> {
    fn new(gs: &'a GateSet, em: &'a ErrorModel) -> Self {
        let mut heap = BinaryHeap::new();
        heap.push(QueueItem {
            cost: 0.0,
            word: vec![],
        });
        TemplateStream { gs, em, heap }
    }

    fn next_word(&mut self) -> (f64, Vec<usize>) {
        let item = self.heap.pop().expect("template stream never empties");
        let last = item.word.last().copied().unwrap_or(0);
        for g in last..self.gs.strengths.len() {
            let mut w = item.word.clone();
            w.push(g);
            self.heap.push(QueueItem {
                cost: item.cost + self.em.gate_cost(self.gs.strengths[g]),
                word: w,
            });
        }
        (item.cost, item.word)
    }
}

/// One enumerated circuit template with its polytope.
pub struct Template {
    pub cost: f64,
    pub strengths: Vec<f64>,
    pub polytope: PolytopeUnion,
}

/// All templates with cost up to (and including) the cheapest one whose
/// polytope covers the whole alcove, in ascending cost order.
pub fn covering_templates(gs: &GateSet, em: &ErrorModel) -> Result<Vec<Template>> {
    let alcove_verts = alcove_polytope().vertices()?;
    let mut stream = TemplateStream::new(gs, em);
    let mut out: Vec<Template> = Vec::new();
    let mut cover_cost: Option<f64> = None;
    for iter in 0..200_000 {
        let _ = iter;
        let (cost, word) = stream.next_word();
        if let Some(bound) = cover_cost {
            if cost > bound + 1e-12 {
                break;
            }
        }
        let strengths: Vec<f64> = word.iter().map(|&g| gs.strengths[g]).collect();
        let seq = StrengthSequence::new(strengths.clone())?;
        let polytope = circuit_polytope(&seq);
        let covers = alcove_verts
            .iter()
            .all(|v| polytope.contains(v, MEMBERSHIP_TOL));
        out.push(Template {
            cost,
            strengths,
            polytope,
        });
        if covers && cover_cost.is_none() {
            cover_cost = Some(cost);
        }
    }
    if cover_cost.is_none() {
        return Err(Error::InvalidGateSet(
            "gate set cannot cover the alcove within the enumeration cap".into(),
        ));
    }
    Ok(out)
}

/// Winning template and approximant for one coordinate, without building
/// the circuit.
struct Plan {
    template_index: usize,
    approximant: CanonicalCoordinate,
    total: f64,
}

fn plan_for_coordinate(
    coord: &CanonicalCoordinate,
    templates: &[Template],
    mode: SynthesisMode,
    tol: f64,
) -> Result<Plan> {
    let mut best: Option<Plan> = None;
    for (i, t) in templates.iter().enumerate() {
        if let Some(ref b) = best {
            if t.cost >= b.total {
                break;
            }
        }
        match mode {
            SynthesisMode::Exact => {
                if t.polytope.contains(&coord.0, tol) {
                    return Ok(Plan {
                        template_index: i,
                        approximant: *coord,
                        total: t.cost,
                    });
                }
            }
            SynthesisMode::Approximate => {
                let near = nearest_point(coord, &t.polytope)?;
                let total = t.cost + near.infidelity;
                let better = match best {
                    None => true,
                    Some(ref b) => total < b.total,
                };
                if better {
                    best = Some(Plan {
                        template_index: i,
                        approximant: near.point,
                        total,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::SynthesisInconsistency("no covering template reached the coordinate".into())
    })
}

// ---------------------------------------------------------------------------
// Optimal synthesis of a single unitary.
// ---------------------------------------------------------------------------

fn synthesize_plan(
    u: &Unitary4,
    plan: &Plan,
    templates: &[Template],
) -> Result<TwoQubitCircuit> {
    let seq = StrengthSequence::new(templates[plan.template_index].strengths.clone())?;
    let mut circuit = synthesize_canonical(&plan.approximant, &seq)?;
    // Dress with the target's own KAK locals: for fixed canonical cores the
    // infidelity to the target is minimized by reusing its local frame.
    let kak = kak_decompose(u)?;
    let left = CircuitStep::Local {
        q0: kak.left.q0,
        q1: kak.left.q1,
    };
    let right = CircuitStep::Local {
        q0: kak.right.q0,
        q1: kak.right.q1,
    };
    match circuit.steps.first_mut() {
        Some(CircuitStep::Local { q0, q1 }) => {
            *q0 = kak.left.q0.mul(q0);
            *q1 = kak.left.q1.mul(q1);
        }
        _ => circuit.steps.insert(0, left),
    }
    match circuit.steps.last_mut() {
        Some(CircuitStep::Local { q0, q1 }) => {
            *q0 = q0.mul(&kak.right.q0);
            *q1 = q1.mul(&kak.right.q1);
        }
        _ => circuit.steps.push(right),
    }
    Ok(circuit)
}

/// Globally optimal synthesis of `u` over all words in the gate set, under
/// the separable cost `infidelity(target, approximant) + sum of gate costs`.
///
/// In exact mode the approximant is the target coordinate itself and the
/// circuit reconstructs `u` up to global phase; in approximate mode the
/// approximant is the best point of the chosen template's polytope. With
/// mirroring enabled, both `u` and `u . SWAP` are optimized and the cheaper
/// result is returned with its flag set.
pub fn optimal_synthesize(
    u: &Unitary4,
    gs: &GateSet,
    em: &ErrorModel,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let templates = covering_templates(gs, em)?;
    let coord = monodromy_coordinate(u);
    let mut branches = vec![(coord, false)];
    if opts.mirror {
        branches.push((mirror_coordinate(&coord), true));
    }
    let mut best: Option<(Plan, bool)> = None;
    for (target, mirrored) in branches {
        let plan = plan_for_coordinate(&target, &templates, opts.mode, opts.membership_tol)?;
        let better = match best {
            None => true,
            Some((ref b, _)) => plan.total < b.total,
        };
        if better {
            best = Some((plan, mirrored));
        }
    }
    let (plan, mirrored) = best.expect("at least one branch planned");
    let effective = if mirrored {
        Unitary4::new_unchecked(u.matrix().mul(&swap_gate()))
    } else {
        *u
    };
    let circuit = synthesize_plan(&effective, &plan, &templates)?;
    Ok(SynthesisResult {
        circuit,
        approximant: plan.approximant,
        total_cost: plan.total,
        mirrored,
    })
}

// ---------------------------------------------------------------------------
// Exact expected cost.
// ---------------------------------------------------------------------------

fn haar_weight(x: &[f64; 3]) -> f64 {
    haar_density(&UnsortedCoordinate(*x))
}

/// Vertex-based containment of convex `inner` in convex `outer`.
fn convex_contained(inner: &ConvexPolytope, outer: &ConvexPolytope) -> bool {
    match inner.vertices() {
        Ok(vs) if !vs.is_empty() => vs.iter().all(|v| outer.contains(v, 1e-9)),
        _ => true, // empty is contained in anything
    }
}

/// Exact Haar-expected cost of optimal exact synthesis: enumerate templates
/// by ascending cost and accumulate `cost * volume(region won)`, where each
/// region is the template polytope minus everything cheaper, until the
/// alcove is covered.
pub fn expected_cost_exact(gs: &GateSet, em: &ErrorModel) -> Result<f64> {
    let alcove_verts = alcove_polytope().vertices()?;
    let mut stream = TemplateStream::new(gs, em);
    let mut covered = 0.0;
    let mut expected = 0.0;
    let mut max_contributing = 0.0f64;
    let mut geometrically_covered = false;
    // Maximal previous components (containment-pruned).
    let mut prev: Vec<ConvexPolytope> = Vec::new();
    for iter in 0..200_000 {
        if iter == 199_999 {
            return Err(Error::InvalidGateSet(
                "expected-cost enumeration failed to converge".into(),
            ));
        }
        let (cost, word) = stream.next_word();
        // Numeric coverage can stall a few quadrature ulps below the
        // residual threshold; once some processed polytope contains the
        // whole alcove, every later region is exactly empty.
        if (covered >= 1.0 - COVERAGE_RESIDUAL || geometrically_covered)
            && cost > max_contributing + 1e-15
        {
            break;
        }
        if word.len() < 3 {
            // Fewer than three interactions span at most a surface: no
            // Haar volume. (They are also always dominated in cost later.)
            continue;
        }
        let strengths: Vec<f64> = word.iter().map(|&g| gs.strengths[g]).collect();
        let seq = StrengthSequence::new(strengths)?;
        let pu = circuit_polytope(&seq);
        let own = union_volume(&pu.components, &haar_weight, COST_QUADRATURE_ORDER)?;
        if own == 0.0 {
            continue;
        }
        let covers_alcove = alcove_verts
            .iter()
            .all(|v| pu.contains(v, MEMBERSHIP_TOL));
        // Intersections of this polytope with everything already won.
        let mut parts: Vec<ConvexPolytope> = Vec::new();
        let mut fully_covered = false;
        'comp: for comp in &pu.components {
            for p in &prev {
                if convex_contained(comp, p) {
                    // The whole component was already won by a cheaper word;
                    // represent it by itself in the overlap union.
                    parts.push(comp.clone());
                    continue 'comp;
                }
            }
            for p in &prev {
                let inter = comp.intersect(p);
                if !inter.vertices()?.is_empty() {
                    parts.push(inter);
                }
            }
        }
        let overlap = if parts.is_empty() {
            0.0
        } else {
            let v = union_volume(&parts, &haar_weight, COST_QUADRATURE_ORDER)?;
            if (v - own).abs() < 1e-12 {
                fully_covered = true;
            }
            v
        };
        let region = (own - overlap).max(0.0);
        if region > 1e-12 {
            expected += cost * region;
            covered += region;
            max_contributing = max_contributing.max(cost);
        }
        if covers_alcove {
            geometrically_covered = true;
        }
        if !fully_covered {
            for comp in pu.components {
                if prev.iter().any(|p| convex_contained(&comp, p)) {
                    continue;
                }
                prev.retain(|p| !convex_contained(p, &comp));
                prev.push(comp);
            }
        }
    }
    Ok(expected)
}

// ---------------------------------------------------------------------------
// Monte-Carlo expected cost.
// ---------------------------------------------------------------------------

/// Histogram key: the winning template's strengths and the mirror flag.
pub type TemplateKey = (Vec<u64>, bool);

/// Monte-Carlo estimate of the expected total cost.
#[derive(Clone, Debug)]
pub struct MonteCarloResult {
    pub mean: f64,
    pub stderr: f64,
    /// Counts keyed by (winning strengths as f64 bits, mirrored).
    pub histogram: Vec<(TemplateKey, u64)>,
}

impl MonteCarloResult {
    /// Histogram rows as (strengths, mirrored, count), most frequent first.
    pub fn histogram_rows(&self) -> Vec<(Vec<f64>, bool, u64)> {
        let mut rows: Vec<(Vec<f64>, bool, u64)> = self
            .histogram
            .iter()
            .map(|((bits, mirrored), count)| {
                (
                    bits.iter().map(|&b| f64::from_bits(b)).collect(),
                    *mirrored,
                    *count,
                )
            })
            .collect();
        rows.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.partial_cmp(&b.0).unwrap().reverse()));
        rows
    }
}

/// Mean total cost of `optimal_synthesize` over `n` Haar samples, with a
/// per-template histogram. Deterministic in `seed` (samples are drawn from
/// counter-split streams, so the result is independent of thread count).
pub fn expected_cost_monte_carlo(
    gs: &GateSet,
    em: &ErrorModel,
    opts: &SynthesisOptions,
    n: usize,
    seed: u64,
) -> Result<MonteCarloResult> {
    if n == 0 {
        return Err(Error::InvalidValue {
            field: "samples".into(),
            reason: "need at least one sample".into(),
        });
    }
    let templates = covering_templates(gs, em)?;
    let outcomes: Vec<Result<(f64, usize, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let u = haar_random_from_rng(&mut rng);
            let coord = monodromy_coordinate(&u);
            let mut best: Option<(Plan, bool)> = None;
            let mut branches = vec![(coord, false)];
            if opts.mirror {
                branches.push((mirror_coordinate(&coord), true));
            }
            for (target, mirrored) in branches {
                let plan =
                    plan_for_coordinate(&target, &templates, opts.mode, opts.membership_tol)?;
                let better = match best {
                    None => true,
                    Some((ref b, _)) => plan.total < b.total,
                };
                if better {
                    best = Some((plan, mirrored));
                }
            }
            let (plan, mirrored) = best.expect("planned");
            Ok((plan.total, plan.template_index, mirrored))
        })
        .collect();
    let mut totals = Vec::with_capacity(n);
    let mut hist: std::collections::HashMap<TemplateKey, u64> = std::collections::HashMap::new();
    for o in outcomes {
        let (total, idx, mirrored) = o?;
        totals.push(total);
        let mut strengths = templates[idx].strengths.clone();
        strengths.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let key: TemplateKey = (strengths.iter().map(|s| s.to_bits()).collect(), mirrored);
        *hist.entry(key).or_insert(0) += 1;
    }
    let mean = totals.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let mut histogram: Vec<(TemplateKey, u64)> = hist.into_iter().collect();
    histogram.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(MonteCarloResult {
        mean,
        stderr: (var / n as f64).sqrt(),
        histogram,
    })
}

/// Cost of the continuous-limit decomposition of a target: the canonical
/// gate factors into three commuting single-interaction gates, one per
/// nonzero coordinate. Each factor has zero remaining interaction on the
/// other axes, so its own class folds across the a3 = 0 seam: a factor of
/// parameter a is an XX gate of strength min(a, pi/2 - a).
pub fn continuous_limit_cost(em: &ErrorModel, target: &CanonicalCoordinate) -> f64 {
    target
        .0
        .iter()
        .map(|&a| a.min(FRAC_PI_2 - a))
        .filter(|&a| a > 0.0)
        .map(|a| em.gate_cost(a))
        .sum()
}

// ---------------------------------------------------------------------------
// Landscape scans.
// ---------------------------------------------------------------------------

/// Expected-cost evaluation mode for landscape scans.
#[derive(Clone, Copy, Debug)]
pub enum ScanMode {
    Exact,
    /// Monte-Carlo with the given sample count and seed (approximate mode).
    Approximate { samples: usize, seed: u64 },
}

/// 1D landscape: expected cost of `fixed + {x}` for `grid` values of x
/// spanning (0, pi/4].
pub fn scan_1d(
    fixed: &[f64],
    grid: usize,
    em: &ErrorModel,
    mode: ScanMode,
) -> Result<Vec<(f64, f64)>> {
    if grid == 0 {
        return Err(Error::InvalidValue {
            field: "grid".into(),
            reason: "grid size must be positive".into(),
        });
    }
    let xs: Vec<f64> = (1..=grid).map(|i| i as f64 * FRAC_PI_4 / grid as f64).collect();
    let rows: Vec<Result<(f64, f64)>> = xs
        .par_iter()
        .map(|&x| {
            let mut strengths = fixed.to_vec();
            strengths.push(x);
            let gs = GateSet::new(strengths)?;
            let cost = match mode {
                ScanMode::Exact => expected_cost_exact(&gs, em)?,
                ScanMode::Approximate { samples, seed } => {
                    let opts = SynthesisOptions {
                        mode: SynthesisMode::Approximate,
                        ..Default::default()
                    };
                    expected_cost_monte_carlo(&gs, em, &opts, samples, seed)?.mean
                }
            };
            Ok((x, cost))
        })
        .collect();
    rows.into_iter().collect()
}

/// 2D landscape over pairs x >= y from the same grid.
pub fn scan_2d(
    fixed: &[f64],
    grid: usize,
    em: &ErrorModel,
    mode: ScanMode,
) -> Result<Vec<(f64, f64, f64)>> {
    if grid == 0 {
        return Err(Error::InvalidValue {
            field: "grid".into(),
            reason: "grid size must be positive".into(),
        });
    }
    let xs: Vec<f64> = (1..=grid).map(|i| i as f64 * FRAC_PI_4 / grid as f64).collect();
    let mut pairs = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        for &y in xs.iter().take(i + 1) {
            pairs.push((x, y));
        }
    }
    let rows: Vec<Result<(f64, f64, f64)>> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let mut strengths = fixed.to_vec();
            strengths.push(x);
            if (y - x).abs() > 1e-15 {
                strengths.push(y);
            }
            let gs = GateSet::new(strengths)?;
            let cost = match mode {
                ScanMode::Exact => expected_cost_exact(&gs, em)?,
                ScanMode::Approximate { samples, seed } => {
                    let opts = SynthesisOptions {
                        mode: SynthesisMode::Approximate,
                        ..Default::default()
                    };
                    expected_cost_monte_carlo(&gs, em, &opts, samples, seed)?.mean
                }
            };
            Ok((x, y, cost))
        })
        .collect();
    rows.into_iter().collect()
}

/// Haar-averaged continuous-limit cost via Monte Carlo.
pub fn continuous_limit_mean(em: &ErrorModel, n: usize, seed: u64) -> (f64, f64) {
    let costs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let coord = monodromy_coordinate(&haar_random_from_rng(&mut rng));
            continuous_limit_cost(em, &coord)
        })
        .collect();
    let mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Haar volume of a circuit polytope (used by the CLI volume command).
pub fn polytope_haar_volume(seq: &StrengthSequence, order: usize) -> Result<f64> {
    let pu = circuit_polytope(seq);
    union_volume(&pu.components, &haar_weight, order)
}

/// Euclidean volume of a circuit polytope.
pub fn polytope_euclidean_volume(seq: &StrengthSequence, order: usize) -> Result<f64> {
    let pu = circuit_polytope(seq);
    union_volume(&pu.components, &|_: &[f64; 3]| 1.0, order)
}

/// Density-weighted volume of the full alcove (normalization check).
pub fn alcove_haar_volume(order: usize) -> Result<f64> {
    convex_volume_weighted(&alcove_polytope(), &haar_weight, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposer::reconstruct;
    use crate::weyl::{average_infidelity, can, haar_random_unitary};

    const PI_8: f64 = FRAC_PI_4 / 2.0;
    const PI_12: f64 = std::f64::consts::PI / 12.0;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{} vs {}", a, b);
    }

    #[test]
    fn template_cost_examples() {
        let em = ErrorModel::reference();
        let empty = StrengthSequence::new(vec![]).unwrap();
        assert_eq!(template_cost(&empty, &em), 0.0);
        let one = StrengthSequence::new(vec![FRAC_PI_4]).unwrap();
        assert_close(template_cost(&one, &em), 7.669e-3, 1e-6);
        let two = StrengthSequence::new(vec![PI_8, PI_12]).unwrap();
        assert_close(
            template_cost(&two, &em),
            em.m * (PI_8 + PI_12) + 2.0 * em.b,
            1e-15,
        );
    }

    #[test]
    fn best_first_stream_is_sorted_and_deduplicated() {
        let gs = GateSet::from_cx_fractions(&[1.0, 0.5]).unwrap();
        let em = ErrorModel::reference();
        let mut stream = TemplateStream::new(&gs, &em);
        let mut last = -1.0;
        let mut seen = std::collections::HashSet::new();
        for _ in 0..40 {
            let (cost, word) = stream.next_word();
            assert!(cost >= last - 1e-15, "costs must ascend");
            last = cost;
            assert!(seen.insert(word.clone()), "duplicate word {:?}", word);
            // Words are sorted index multisets.
            for w in word.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn exact_synthesis_of_basis_gate_and_haar() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0]).unwrap();
        let opts = SynthesisOptions::default();
        // CX itself needs exactly one gate.
        let cx = Unitary4::new(crate::weyl::cx_gate()).unwrap();
        let r = optimal_synthesize(&cx, &gs, &em, &opts).unwrap();
        assert_eq!(r.circuit.xx_strengths().len(), 1);
        assert_close(r.total_cost, em.gate_cost(FRAC_PI_4), 1e-12);
        let recon = reconstruct(&r.circuit);
        assert!(average_infidelity(&recon, &cx) < 1e-9);
        // Haar-random needs three.
        let u = haar_random_unitary(5);
        let r = optimal_synthesize(&u, &gs, &em, &opts).unwrap();
        assert_eq!(r.circuit.xx_strengths().len(), 3);
        assert!(average_infidelity(&reconstruct(&r.circuit), &u) < 1e-9);
    }

    #[test]
    fn mixed_gate_set_picks_cheapest_template() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0, 0.5, 1.0 / 3.0]).unwrap();
        let opts = SynthesisOptions::default();
        let target = can(0.968, 0.273, 0.038);
        let u = Unitary4::new_unchecked(target);
        let r = optimal_synthesize(&u, &gs, &em, &opts).unwrap();
        let mut emitted = r.circuit.xx_strengths();
        emitted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(emitted.len(), 3);
        assert_close(emitted[0], PI_12, 1e-12);
        assert_close(emitted[1], PI_12, 1e-12);
        assert_close(emitted[2], PI_8, 1e-12);
        assert_close(
            r.total_cost,
            em.m * (PI_12 + PI_12 + PI_8) + 3.0 * em.b,
            1e-12,
        );
        assert!(average_infidelity(&reconstruct(&r.circuit), &u) < 1e-9);
    }

    #[test]
    fn approximate_mode_never_costs_more_than_exact() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0, 0.5]).unwrap();
        for seed in 0..10u64 {
            let u = haar_random_unitary(100 + seed);
            let exact = optimal_synthesize(&u, &gs, &em, &SynthesisOptions::default()).unwrap();
            let approx = optimal_synthesize(
                &u,
                &gs,
                &em,
                &SynthesisOptions {
                    mode: SynthesisMode::Approximate,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(approx.total_cost <= exact.total_cost + 1e-12);
            // Approximate-mode circuit hits its approximant's class.
            let a = approx.approximant.0;
            let infid = average_infidelity(
                &reconstruct(&approx.circuit),
                &Unitary4::new_unchecked(
                    kak_decompose(&u)
                        .unwrap()
                        .left
                        .to_mat4()
                        .mul(&can(a[0], a[1], a[2]))
                        .mul(&kak_decompose(&u).unwrap().right.to_mat4()),
                ),
            );
            assert!(infid < 1e-9, "approximant reconstruction {:.3e}", infid);
        }
    }

    #[test]
    fn mirror_never_costs_more() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0, 0.5]).unwrap();
        for seed in 0..10u64 {
            let u = haar_random_unitary(200 + seed);
            let plain = optimal_synthesize(&u, &gs, &em, &SynthesisOptions::default()).unwrap();
            let mirrored = optimal_synthesize(
                &u,
                &gs,
                &em,
                &SynthesisOptions {
                    mirror: true,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(mirrored.total_cost <= plain.total_cost + 1e-12);
            if mirrored.mirrored {
                // The circuit models U . SWAP.
                let us = Unitary4::new_unchecked(u.matrix().mul(&swap_gate()));
                assert!(average_infidelity(&reconstruct(&mirrored.circuit), &us) < 1e-9);
            }
        }
    }

    #[test]
    fn exact_expected_cost_single_cx() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0]).unwrap();
        let cost = expected_cost_exact(&gs, &em).unwrap();
        assert_close(cost, 3.0 * em.gate_cost(FRAC_PI_4), 1e-9);
    }

    #[test]
    fn continuous_limit_examples() {
        let em = ErrorModel::reference();
        assert_eq!(
            continuous_limit_cost(&em, &CanonicalCoordinate([0.0; 3])),
            0.0
        );
        assert_close(
            continuous_limit_cost(&em, &CanonicalCoordinate([FRAC_PI_4, 0.0, 0.0])),
            em.gate_cost(FRAC_PI_4),
            1e-15,
        );
        // A first coordinate past pi/4 folds across the reflection seam.
        assert_close(
            continuous_limit_cost(&em, &CanonicalCoordinate([1.2, 0.1, 0.05])),
            em.gate_cost(FRAC_PI_2 - 1.2) + em.gate_cost(0.1) + em.gate_cost(0.05),
            1e-15,
        );
    }

    #[test]
    fn monte_carlo_exact_single_cx_is_three_gates() {
        let em = ErrorModel::reference();
        let gs = GateSet::from_cx_fractions(&[1.0]).unwrap();
        let r = expected_cost_monte_carlo(&gs, &em, &SynthesisOptions::default(), 200, 9).unwrap();
        assert_close(r.mean, 3.0 * em.gate_cost(FRAC_PI_4), 1e-12);
        assert_eq!(r.histogram.len(), 1);
        // Determinism.
        let r2 = expected_cost_monte_carlo(&gs, &em, &SynthesisOptions::default(), 200, 9).unwrap();
        assert_eq!(r.mean, r2.mean);
    }
}
