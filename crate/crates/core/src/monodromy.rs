//! Numerical monodromy of `f^N`: closed loops in the plane punctured at
//! the critical values, lifted through the inverse branches of `f^N` by
//! predictor–corrector continuation.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::escape_radius;
use crate::error::{Error, Result};
use crate::permgroup::{restrict_to_level, tree_compatible, Perm};
use crate::polycore::{
    critical_data, fiber_tol, min_separation, preimage_levels, ComplexPoly, C64,
};

/// Waypoints per full turn of a circular arc.
const CIRCLE_SEGMENTS: usize = 96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LoopKind {
    Lollipop { value: C64, radius: f64, angle: f64 },
    Infinity { radius: f64, angle: f64 },
    Composite,
}

/// A closed polyline based at `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    pub base: C64,
    pub waypoints: Vec<C64>,
    pub kind: LoopKind,
    /// Smallest distance from the polyline to the critical values it was
    /// routed against.
    pub clearance: f64,
}

fn segment_distance(a: C64, b: C64, z: C64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (a + ab * t - z).norm()
}

fn arc(center: C64, radius: f64, from_angle: f64, sweep: f64) -> Vec<C64> {
    let steps = ((sweep.abs() / TAU) * CIRCLE_SEGMENTS as f64)
        .ceil()
        .max(2.0) as usize;
    (0..=steps)
        .map(|k| center + C64::from_polar(radius, from_angle + sweep * k as f64 / steps as f64))
        .collect()
}

impl LoopPath {
    /// A composite loop through the given waypoints; the polyline is closed
    /// at `base` on both ends.
    pub fn closed(base: C64, interior: &[C64]) -> LoopPath {
        let mut waypoints = vec![base];
        waypoints.extend_from_slice(interior);
        waypoints.push(base);
        LoopPath {
            base,
            waypoints,
            kind: LoopKind::Composite,
            clearance: f64::NAN,
        }
    }

    /// Stem out along `stem`, `turns` full counterclockwise turns (negative
    /// for clockwise) of the circle around `center` through the stem's end,
    /// and back along the stem.
    pub fn stem_and_circle(stem: &[C64], center: C64, turns: f64) -> LoopPath {
        let tip = *stem.last().unwrap();
        let radius = (tip - center).norm();
        let phi = (tip - center).arg();
        let mut waypoints = stem.to_vec();
        waypoints.extend(arc(center, radius, phi, TAU * turns).into_iter().skip(1));
        *waypoints.last_mut().unwrap() = tip;
        waypoints.extend(stem.iter().rev().skip(1).copied());
        LoopPath {
            base: stem[0],
            waypoints,
            kind: LoopKind::Composite,
            clearance: f64::NAN,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.waypoints.first() == Some(&self.base) && self.waypoints.last() == Some(&self.base)
    }

    pub fn arclength(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }

    pub fn distance_to(&self, z: C64) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| segment_distance(w[0], w[1], z))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_distance(&self, points: &[C64]) -> f64 {
        points
            .iter()
            .map(|&z| self.distance_to(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// Winding number of the closed polyline around `z`.
    pub fn winding_number(&self, z: C64) -> i64 {
        let total: f64 = self
            .waypoints
            .windows(2)
            .map(|w| ((w[1] - z) / (w[0] - z)).arg())
            .sum();
        (total / TAU).round() as i64
    }

    /// Moves every interior waypoint by a deterministic offset of size
    /// `amount` (base and closure stay fixed).
    pub fn perturbed(&self, amount: f64, seed: u64) -> LoopPath {
        let mut out = self.clone();
        let n = out.waypoints.len();
        for (k, w) in out.waypoints.iter_mut().enumerate().take(n - 1).skip(1) {
            let phase = (seed as f64 * 1.618_033_988_75 + k as f64 * 2.399_963) % TAU;
            *w += C64::from_polar(amount, phase);
        }
        out
    }

    /// Concatenation: `self` first, then `other` (same base).
    pub fn then(&self, other: &LoopPath) -> LoopPath {
        let mut waypoints = self.waypoints.clone();
        waypoints.extend(other.waypoints.iter().skip(1));
        LoopPath {
            base: self.base,
            waypoints,
            kind: LoopKind::Composite,
            clearance: self.clearance.min(other.clearance),
        }
    }
}

/// Levels `0..=N` of preimages of `base`; node `i` at level `k` has parent
/// `i / d` at level `k - 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreimageTree {
    pub base: C64,
    pub degree: usize,
    pub levels: Vec<Vec<C64>>,
    pub separations: Vec<f64>,
}

impl PreimageTree {
    pub fn new(f: &ComplexPoly, base: C64, depth: usize) -> Result<PreimageTree> {
        if depth == 0 {
            return Err(Error::InvalidInput("tree depth must be >= 1".into()));
        }
        let levels = preimage_levels(f, base, depth)?;
        let separations: Vec<f64> = levels.iter().map(|l| min_separation(l)).collect();
        let tree = PreimageTree {
            base,
            degree: f.degree(),
            levels,
            separations,
        };
        for k in 1..=depth {
            let fib = crate::polycore::Fiber::from_points(f, base, k, tree.levels[k].clone());
            if !fib.simple {
                return Err(Error::NonSimpleFiber {
                    base: [base.re, base.im],
                    separation: fib.separation,
                });
            }
        }
        Ok(tree)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[C64] {
        &self.levels[k]
    }

    pub fn ancestor(&self, level: usize, index: usize, target_level: usize) -> usize {
        index / self.degree.pow((level - target_level) as u32)
    }

    /// Checks `f(child) = parent` for every node.
    pub fn verify(&self, f: &ComplexPoly) -> bool {
        (1..self.levels.len()).all(|k| {
            self.levels[k].iter().enumerate().all(|(i, &w)| {
                let parent = self.levels[k - 1][i / self.degree];
                (f.eval(w) - parent).norm() <= fiber_tol(self.base) * 10.0 * (1.0 + parent.norm())
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePermutation {
    pub level: usize,
    pub perm: Perm,
}

impl TreePermutation {
    pub fn restrict(&self, d: usize, k: usize) -> Option<TreePermutation> {
        restrict_to_level(&self.perm, d, self.level, k)
            .map(|perm| TreePermutation { level: k, perm })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackOptions {
    pub initial_divisions: f64,
    pub min_step_fraction: f64,
    pub max_newton: usize,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            initial_divisions: 512.0,
            min_step_fraction: 1e-8,
            max_newton: 4,
        }
    }
}

/// Distinct critical values of `f^n` together with geometric scales used
/// for routing loops based at `p`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Punctures {
    pub values: Vec<C64>,
    /// Smallest distance among the critical values and the base point.
    pub gap: f64,
}

impl Punctures {
    pub fn new(f: &ComplexPoly, n: usize, p: C64) -> Result<Punctures> {
        let values = critical_data(f, n)?.values();
        let mut gap = values
            .iter()
            .map(|&v| (v - p).norm())
            .fold(f64::INFINITY, f64::min);
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                gap = gap.min((values[i] - values[j]).norm());
            }
        }
        if !(gap > 0.0) {
            return Err(Error::Precondition(
                "base point sits on a critical value".into(),
            ));
        }
        Ok(Punctures { values, gap })
    }

    pub fn circle_radius(&self) -> f64 {
        0.3 * self.gap
    }

    pub fn clearance(&self) -> f64 {
        0.4 * self.gap
    }
}

fn polyline_clear(points: &[C64], avoid: &[C64], clearance: f64) -> bool {
    points.windows(2).all(|w| {
        avoid
            .iter()
            .all(|&z| segment_distance(w[0], w[1], z) >= clearance)
    })
}

/// Stem from `p` to the circle of radius `rho` around `v`, straight when
/// possible, otherwise bent once through a point off the segment.
fn route_stem(p: C64, v: C64, rho: f64, others: &[C64], clearance: f64) -> Option<Vec<C64>> {
    let tip = |from: C64| v - (v - from).unscale((v - from).norm()) * rho;
    let straight = vec![p, tip(p)];
    if polyline_clear(&straight, others, clearance) {
        return Some(straight);
    }
    let dir = v - p;
    let perp = C64::new(-dir.im, dir.re);
    for t in [
        0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 1.0, -1.0, 1.5, -1.5, 2.0, -2.0,
    ] {
        for frac in [0.5, 0.25, 0.75] {
            let q = p + dir * frac + perp * t;
            let path = vec![p, q, tip(q)];
            if (tip(q) - v).norm() > 0.0 && polyline_clear(&path, others, clearance) {
                return Some(path);
            }
        }
    }
    None
}

/// One counterclockwise lollipop per distinct critical value of `f^n`,
/// listed in counterclockwise order of their stems' departure angles.
pub fn lollipop_generators(f: &ComplexPoly, n: usize, p: C64) -> Result<Vec<LoopPath>> {
    let punct = Punctures::new(f, n, p)?;
    let rho = punct.circle_radius();
    let clearance = punct.clearance();
    let mut loops = Vec::with_capacity(punct.values.len());
    for (i, &v) in punct.values.iter().enumerate() {
        let others: Vec<C64> = punct
            .values
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &w)| w)
            .collect();
        let stem = route_stem(p, v, rho, &others, clearance).ok_or_else(|| {
            Error::Routing(format!(
                "no clear stem to critical value {v}; move the base point"
            ))
        })?;
        let angle = (stem[1] - stem[0]).arg().rem_euclid(TAU);
        let mut path = LoopPath::stem_and_circle(&stem, v, 1.0);
        path.kind = LoopKind::Lollipop {
            value: v,
            radius: rho,
            angle,
        };
        path.clearance = path.min_distance(&others).min(rho);
        if path.winding_number(v) != 1 || others.iter().any(|&w| path.winding_number(w) != 0) {
            return Err(Error::Consistency(format!(
                "lollipop around {v} has wrong winding"
            )));
        }
        loops.push(path);
    }
    loops.sort_by(|a, b| lollipop_angle(a).partial_cmp(&lollipop_angle(b)).unwrap());
    Ok(loops)
}

fn lollipop_angle(l: &LoopPath) -> f64 {
    match l.kind {
        LoopKind::Lollipop { angle, .. } => angle,
        _ => 0.0,
    }
}

/// Direction of the radial stem of the loop at infinity: the middle of the
/// widest angular gap between lollipop departures that keeps clear of every
/// critical value.
pub fn infinity_angle(
    lollipops: &[LoopPath],
    p: C64,
    punct: &Punctures,
    radius: f64,
) -> Result<f64> {
    let mut angles: Vec<f64> = lollipops.iter().map(lollipop_angle).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    if angles.is_empty() {
        candidates.push((TAU, 0.3));
    }
    for i in 0..angles.len() {
        let a = angles[i];
        let b = if i + 1 < angles.len() {
            angles[i + 1]
        } else {
            angles[0] + TAU
        };
        candidates.push((b - a, 0.5 * (a + b)));
    }
    candidates.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for (_, mid) in candidates {
        let dir = C64::from_polar(1.0, mid);
        let end = ray_to_circle(p, dir, radius);
        if polyline_clear(&[p, end], &punct.values, punct.clearance()) {
            return Ok(mid.rem_euclid(TAU));
        }
    }
    Err(Error::Routing(
        "no clear ray to infinity; move the base point".into(),
    ))
}

fn ray_to_circle(p: C64, dir: C64, radius: f64) -> C64 {
    // |p + t dir| = radius, t > 0
    let b = (p * dir.conj()).re;
    let c = p.norm_sqr() - radius * radius;
    let t = -b + (b * b - c).sqrt();
    p + dir * t
}

/// Radial stem from `p` out to `|z| = R`, one counterclockwise turn, and
/// back. `R` lies beyond every critical value, `p` and the escape radius.
pub fn infinity_loop(f: &ComplexPoly, n: usize, p: C64) -> Result<LoopPath> {
    let punct = Punctures::new(f, n, p)?;
    let lollipops = lollipop_generators(f, n, p)?;
    infinity_loop_with(f, p, &punct, &lollipops)
}

fn infinity_loop_with(
    f: &ComplexPoly,
    p: C64,
    punct: &Punctures,
    lollipops: &[LoopPath],
) -> Result<LoopPath> {
    let far = punct
        .values
        .iter()
        .map(|v| v.norm())
        .fold(p.norm(), f64::max);
    let radius = (2.0 * far).max(escape_radius(f)) + 1.0;
    let angle = infinity_angle(lollipops, p, punct, radius)?;
    let end = ray_to_circle(p, C64::from_polar(1.0, angle), radius);
    let mut path = LoopPath::stem_and_circle(&[p, end], C64::new(0.0, 0.0), 1.0);
    path.kind = LoopKind::Infinity { radius, angle };
    path.clearance = path.min_distance(&punct.values);
    Ok(path)
}

struct Tracker<'a> {
    f: &'a ComplexPoly,
    n: usize,
    opts: &'a TrackOptions,
}

impl Tracker<'_> {
    fn newton(&self, start: C64, target: C64) -> Option<C64> {
        let tol = 1e-11 * target.norm().max(1.0);
        let mut w = start;
        for _ in 0..self.opts.max_newton {
            let (v, dv) = self.f.eval_iterate(w, self.n);
            let r = v - target;
            if r.norm() <= tol {
                return Some(w);
            }
            let step = r / dv;
            if !step.is_finite() {
                return None;
            }
            w -= step;
        }
        let (v, _) = self.f.eval_iterate(w, self.n);
        ((v - target).norm() <= tol).then_some(w)
    }

    /// Follows every point of `start` (lying over `path[0]`) along the
    /// polyline and returns the endpoints.
    fn track(&self, path: &[C64], start: &[C64]) -> Result<Vec<C64>> {
        let total: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let h_max = total / self.opts.initial_divisions;
        let h_min = total * self.opts.min_step_fraction;
        let mut w = start.to_vec();
        let mut h = h_max;
        let mut travelled = 0.0;
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b - a).norm();
            if len == 0.0 {
                continue;
            }
            let dir = (b - a) / len;
            let mut s = 0.0;
            let mut streak = 0;
            while s < len {
                let step = h.min(len - s);
                let from = a + dir * s;
                let to = if s + step >= len {
                    b
                } else {
                    a + dir * (s + step)
                };
                match self.step(&w, from, to) {
                    Some(next) => {
                        w = next;
                        s += step;
                        streak += 1;
                        if streak >= 3 {
                            h = (2.0 * h).min(h_max);
                            streak = 0;
                        }
                    }
                    None => {
                        h *= 0.5;
                        streak = 0;
                        if h < h_min {
                            return Err(Error::LostTrack {
                                t: (travelled + s) / total,
                                step: h,
                            });
                        }
                    }
                }
            }
            travelled += len;
        }
        Ok(w)
    }

    fn step(&self, w: &[C64], from: C64, to: C64) -> Option<Vec<C64>> {
        let sep = min_separation(w);
        let limit = if sep.is_finite() {
            sep / 3.0
        } else {
            f64::INFINITY
        };
        let mut next = Vec::with_capacity(w.len());
        for &x in w {
            let (_, dv) = self.f.eval_iterate(x, self.n);
            let pred = x + (to - from) / dv;
            if !pred.is_finite() {
                return None;
            }
            let corr = self.newton(pred, to)?;
            if (corr - x).norm() > limit {
                return None;
            }
            next.push(corr);
        }
        if w.len() > 1 && min_separation(&next) <= limit {
            return None;
        }
        Some(next)
    }
}

/// Lifts `path` at level `level` of the tree: entry `i` of the result is the
/// index of the fiber point where the lift starting at point `i` ends.
pub fn lift_loop(
    f: &ComplexPoly,
    level: usize,
    tree: &PreimageTree,
    path: &LoopPath,
) -> Result<TreePermutation> {
    lift_loop_with(f, level, tree, path, &TrackOptions::default())
}

pub fn lift_loop_with(
    f: &ComplexPoly,
    level: usize,
    tree: &PreimageTree,
    path: &LoopPath,
    opts: &TrackOptions,
) -> Result<TreePermutation> {
    if level == 0 || level > tree.depth() {
        return Err(Error::InvalidInput(format!(
            "level {level} outside tree depth {}",
            tree.depth()
        )));
    }
    if !path.is_closed() || (path.base - tree.base).norm() > 0.0 {
        return Err(Error::InvalidInput(
            "loop must be closed and based at the tree base".into(),
        ));
    }
    let fiber = tree.level(level);
    let tracker = Tracker { f, n: level, opts };
    let ends = tracker.track(&path.waypoints, fiber)?;
    let radius = tree.separations[level] / 3.0;
    let mut images = Vec::with_capacity(fiber.len());
    for (i, &e) in ends.iter().enumerate() {
        let hits: Vec<usize> = (0..fiber.len())
            .filter(|&j| (fiber[j] - e).norm() < radius)
            .collect();
        match hits.as_slice() {
            [j] => images.push(*j),
            _ => return Err(Error::AmbiguousMatch { index: i }),
        }
    }
    let perm = Perm::from_images(images)
        .map_err(|_| Error::Consistency("lifted endpoints are not a bijection".into()))?;
    if !tree_compatible(&perm, tree.degree, level) {
        return Err(Error::Consistency(
            "lifted permutation does not respect the tree".into(),
        ));
    }
    Ok(TreePermutation { level, perm })
}

/// Monodromy of the loop at infinity; always a single `d^N`-cycle.
pub fn infinity_cycle(
    f: &ComplexPoly,
    level: usize,
    tree: &PreimageTree,
) -> Result<TreePermutation> {
    let path = infinity_loop(f, level, tree.base)?;
    let lift = lift_loop(f, level, tree, &path)?;
    if !lift.perm.is_full_cycle() {
        return Err(Error::Consistency(format!(
            "monodromy at infinity has cycle type {:?}",
            lift.perm.cycle_type()
        )));
    }
    Ok(lift)
}

/// Lollipop loops, their lifts and the loop at infinity for one level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonodromyData {
    pub level: usize,
    pub tree: PreimageTree,
    pub critical_values: Vec<C64>,
    pub lollipops: Vec<LoopPath>,
    pub lifts: Vec<TreePermutation>,
    pub infinity: LoopPath,
    pub infinity_lift: TreePermutation,
}

impl MonodromyData {
    /// Lollipop lifts followed by the loop at infinity.
    pub fn generators(&self) -> Vec<Perm> {
        self.lifts
            .iter()
            .chain(std::iter::once(&self.infinity_lift))
            .map(|t| t.perm.clone())
            .collect()
    }

    /// Product of the lollipop lifts in counterclockwise order starting at
    /// the ray to infinity; the first lollipop after the ray acts first.
    /// Equals the lift of the loop at infinity.
    pub fn planar_product(&self) -> Perm {
        let angle = match self.infinity.kind {
            LoopKind::Infinity { angle, .. } => angle,
            _ => 0.0,
        };
        let mut order: Vec<usize> = (0..self.lollipops.len()).collect();
        order.sort_by(|&a, &b| {
            let ka = (lollipop_angle(&self.lollipops[a]) - angle).rem_euclid(TAU);
            let kb = (lollipop_angle(&self.lollipops[b]) - angle).rem_euclid(TAU);
            ka.partial_cmp(&kb).unwrap()
        });
        let n = self.infinity_lift.perm.degree();
        order
            .iter()
            .fold(Perm::identity(n), |acc, &i| acc.then(&self.lifts[i].perm))
    }
}

/// Builds the preimage tree to `level` and lifts every generator loop.
pub fn monodromy_data(f: &ComplexPoly, level: usize, p: C64) -> Result<MonodromyData> {
    let tree = PreimageTree::new(f, p, level)?;
    let punct = Punctures::new(f, level, p)?;
    let lollipops = lollipop_generators(f, level, p)?;
    let infinity = infinity_loop_with(f, p, &punct, &lollipops)?;
    let lifts: Vec<TreePermutation> = lollipops
        .par_iter()
        .map(|l| lift_loop(f, level, &tree, l))
        .collect::<Result<_>>()?;
    let infinity_lift = lift_loop(f, level, &tree, &infinity)?;
    if !infinity_lift.perm.is_full_cycle() {
        return Err(Error::Consistency(format!(
            "monodromy at infinity has cycle type {:?}",
            infinity_lift.perm.cycle_type()
        )));
    }
    Ok(MonodromyData {
        level,
        tree,
        critical_values: punct.values,
        lollipops,
        lifts,
        infinity,
        infinity_lift,
    })
}

/// Picks a base point near `target` whose distance to the critical values
/// of `f^n` is as large as possible among a ring of candidates, subject to
/// `accept`.
pub fn choose_base_point(
    f: &ComplexPoly,
    n: usize,
    target: C64,
    max_offset: f64,
    accept: impl Fn(C64) -> bool,
) -> Result<C64> {
    let values = critical_data(f, n)?.values();
    let mut best: Option<(f64, C64)> = None;
    for ring in 1..=6 {
        let r = max_offset * ring as f64 / 6.0;
        for k in 0..24 {
            // irrational twist keeps candidates off symmetry lines
            let z = target + C64::from_polar(r, TAU * k as f64 / 24.0 + 0.137 * PI);
            if !accept(z) {
                continue;
            }
            let d = values
                .iter()
                .map(|&v| (v - z).norm())
                .fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(bd, _)| d > bd) {
                best = Some((d, z));
            }
        }
    }
    best.map(|(_, z)| z)
        .ok_or_else(|| Error::Precondition("no admissible base point near the target".into()))
}
