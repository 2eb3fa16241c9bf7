//! Escaping-set analytics: escape radius, Green's function, periodic cycles
//! and a pixel chart of the bounded Fatou components.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::{ComplexPoly, C64};

/// Radius `R >= 1` with `|z| > R  =>  |f(z)| >= 2|z|`.
pub fn escape_radius(f: &ComplexPoly) -> f64 {
    let lead = f.leading().norm();
    let rest: f64 = f.coeffs()[..f.degree()].iter().map(|c| c.norm()).sum();
    ((2.0 + rest) / lead).max(1.0)
}

/// Radius `r*` beyond which `|f(z)| > |z|` and orbits increase to infinity:
/// the largest positive root of `|a_d| r^d - Σ_{i<d} |a_i| r^i - r`. The
/// filled Julia set lies in the closed disk of this radius.
pub fn filled_julia_radius(f: &ComplexPoly) -> f64 {
    let d = f.degree();
    if d < 2 {
        return f64::INFINITY;
    }
    let lead = f.leading().norm();
    let g = |r: f64| {
        let lower: f64 = f.coeffs()[..d]
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm() * r.powi(i as i32))
            .sum();
        lead * r.powi(d as i32) - lower - r
    };
    let (mut lo, mut hi) = (0.0, escape_radius(f));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Square chart around the origin that contains the filled Julia set with a
/// 5% margin.
pub fn default_chart_box(f: &ComplexPoly) -> ChartBox {
    ChartBox::centered(C64::new(0.0, 0.0), 1.05 * filled_julia_radius(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensEstimate {
    pub value: f64,
    pub iterations_used: usize,
    pub error_bound: f64,
}

pub const DEFAULT_GREEN_BUDGET: usize = 10_000;

/// `G(z) = lim d^{-n} log+|f^n(z)|` to absolute accuracy `tol`.
pub fn green_value(f: &ComplexPoly, z: C64, tol: f64) -> Result<GreensEstimate> {
    green_value_budget(f, z, tol, DEFAULT_GREEN_BUDGET)
}

pub fn green_value_budget(
    f: &ComplexPoly,
    z: C64,
    tol: f64,
    budget: usize,
) -> Result<GreensEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let d = f.degree();
    if d < 2 {
        return Err(Error::InvalidInput(
            "Green's function needs degree >= 2".into(),
        ));
    }
    let df = d as f64;
    let lead = f.leading().norm();
    let rest: f64 = f.coeffs()[..d].iter().map(|c| c.norm()).sum();
    let radius = escape_radius(f);
    let shift = lead.ln() / (df - 1.0);

    let mut w = z;
    let mut scale = 1.0; // d^{-n}
    for n in 0..=budget {
        let r = w.norm();
        if r > radius {
            // |log|f(w)| - d log|w| - log|a_d|| <= 2 rest / (|a_d| |w|) once
            // that ratio is below 1/2; the tail sums geometrically.
            let local = 2.0 * rest / (lead * r);
            let bound = scale * 2.0 * local;
            if (local <= 0.5 && bound <= tol) || r > 1e150 {
                let value = scale * (r.ln() + shift);
                return Ok(GreensEstimate {
                    value: value.max(0.0),
                    iterations_used: n,
                    error_bound: if r > 1e150 {
                        scale * 2.0 * local
                    } else {
                        bound
                    },
                });
            }
        }
        if n == budget {
            break;
        }
        w = f.eval(w);
        scale /= df;
    }
    Ok(GreensEstimate {
        value: 0.0,
        iterations_used: budget,
        error_bound: 0.0,
    })
}

/// Escape time against `escape_radius`, or `None` within `budget`.
pub fn escape_time(f: &ComplexPoly, z: C64, radius: f64, budget: usize) -> Option<u32> {
    let mut w = z;
    for n in 0..=budget {
        if w.norm() > radius {
            return Some(n as u32);
        }
        w = f.eval(w);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleClass {
    Superattracting,
    Attracting,
    Parabolic,
    Rotation,
    Repelling,
}

pub const SUPERATTRACTING_TOL: f64 = 1e-8;
pub const NEUTRAL_TOL: f64 = 1e-6;
pub const ROOT_OF_UNITY_MAX_ORDER: u32 = 64;

pub fn classify_multiplier(lambda: C64) -> CycleClass {
    let r = lambda.norm();
    if r < SUPERATTRACTING_TOL {
        CycleClass::Superattracting
    } else if r < 1.0 - NEUTRAL_TOL {
        CycleClass::Attracting
    } else if r <= 1.0 + NEUTRAL_TOL {
        let root_of_unity =
            (1..=ROOT_OF_UNITY_MAX_ORDER).any(|q| (lambda.powu(q) - 1.0).norm() < NEUTRAL_TOL);
        if root_of_unity {
            CycleClass::Parabolic
        } else {
            CycleClass::Rotation
        }
    } else {
        CycleClass::Repelling
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleInfo {
    pub period: usize,
    pub points: Vec<C64>,
    pub multiplier: C64,
    pub class: CycleClass,
}

impl CycleInfo {
    pub fn is_attracting_type(&self) -> bool {
        matches!(
            self.class,
            CycleClass::Superattracting | CycleClass::Attracting | CycleClass::Parabolic
        )
    }
}

const CYCLE_TOL: f64 = 1e-7;

/// All cycles of period `<= max_period`, each listed once and started at
/// its lexicographically smallest point.
pub fn find_cycles(f: &ComplexPoly, max_period: usize) -> Result<Vec<CycleInfo>> {
    find_cycles_capped(f, max_period, 1024)
}

pub fn find_cycles_capped(
    f: &ComplexPoly,
    max_period: usize,
    cap: usize,
) -> Result<Vec<CycleInfo>> {
    let mut out: Vec<CycleInfo> = Vec::new();
    if f.degree() < 2 {
        // affine maps: the fixed point only
        let a = f.coeffs().get(1).copied().unwrap_or_default();
        if (a - 1.0).norm() > 1e-14 {
            let fixed = -f.coeffs()[0] / (a - 1.0);
            out.push(CycleInfo {
                period: 1,
                points: vec![fixed],
                multiplier: a,
                class: classify_multiplier(a),
            });
        }
        return Ok(out);
    }
    for m in 1..=max_period {
        let fm = f.iterate_capped(m, cap)?;
        let g = fm.add(&ComplexPoly::identity().scale(C64::new(-1.0, 0.0)));
        let roots = g.roots()?;
        for z in roots {
            let close = |a: C64, b: C64| (a - b).norm() <= CYCLE_TOL * (1.0 + a.norm());
            // refine with Newton on f^m(z) - z
            let mut z = z;
            for _ in 0..6 {
                let (v, dv) = f.eval_iterate(z, m);
                let denom = dv - 1.0;
                if denom.norm() < 1e-14 {
                    break;
                }
                let next = z - (v - z) / denom;
                if !next.is_finite() {
                    break;
                }
                z = next;
            }
            if (1..m).any(|k| m % k == 0 && close(f.eval_iterate(z, k).0, z)) {
                continue;
            }
            if out
                .iter()
                .any(|c| c.period == m && c.points.iter().any(|&p| close(p, z)))
            {
                continue;
            }
            let mut points = Vec::with_capacity(m);
            let mut w = z;
            let mut multiplier = C64::new(1.0, 0.0);
            for _ in 0..m {
                points.push(w);
                let (v, dv) = f.eval_with_derivative(w);
                multiplier *= dv;
                w = v;
            }
            let start = (0..m)
                .min_by(|&a, &b| {
                    let (pa, pb) = (points[a], points[b]);
                    (pa.re, pa.im).partial_cmp(&(pb.re, pb.im)).unwrap()
                })
                .unwrap();
            points.rotate_left(start);
            out.push(CycleInfo {
                period: m,
                points,
                multiplier,
                class: classify_multiplier(multiplier),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ChartBox {
    pub fn centered(center: C64, half_width: f64) -> ChartBox {
        ChartBox {
            re_min: center.re - half_width,
            re_max: center.re + half_width,
            im_min: center.im - half_width,
            im_max: center.im + half_width,
        }
    }

    pub fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_min, self.im_max),
            C64::new(self.re_max, self.im_max),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelLabel {
    Escaping(u32),
    Component(u32),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub id: u32,
    pub pixels: usize,
    pub sample: C64,
    /// Index into `ComponentChart::cycles` of the cycle the sample orbit is
    /// attracted to (or rotates around).
    pub limit_cycle: Option<usize>,
    /// Iterate count at which the sample reached the cycle, if attracted.
    pub arrival: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentChart {
    pub bounds: ChartBox,
    pub width: usize,
    pub height: usize,
    pub max_iter: usize,
    pub escape_radius: f64,
    #[serde(skip)]
    pub labels: Vec<PixelLabel>,
    pub components: Vec<ComponentInfo>,
    pub cycles: Vec<CycleInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PointClass {
    Escaping { green: f64 },
    Bounded { component: u32 },
    NearJulia,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartOptions {
    pub max_iter: usize,
    pub max_period: usize,
    /// Iterates used to decide which cycle a component sample tends to.
    pub settle_iter: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            max_iter: 400,
            max_period: 6,
            settle_iter: 20_000,
        }
    }
}

impl ComponentChart {
    pub fn pixel_center(&self, col: usize, row: usize) -> C64 {
        let b = &self.bounds;
        let dx = (b.re_max - b.re_min) / self.width as f64;
        let dy = (b.im_max - b.im_min) / self.height as f64;
        C64::new(
            b.re_min + (col as f64 + 0.5) * dx,
            b.im_min + (row as f64 + 0.5) * dy,
        )
    }

    pub fn pixel_size(&self) -> f64 {
        let b = &self.bounds;
        ((b.re_max - b.re_min) / self.width as f64).max((b.im_max - b.im_min) / self.height as f64)
    }

    pub fn pixel_of(&self, z: C64) -> Option<(usize, usize)> {
        let b = &self.bounds;
        let u = (z.re - b.re_min) / (b.re_max - b.re_min) * self.width as f64;
        let v = (z.im - b.im_min) / (b.im_max - b.im_min) * self.height as f64;
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as usize, v as usize))
    }

    pub fn label_at(&self, col: usize, row: usize) -> PixelLabel {
        self.labels[row * self.width + col]
    }

    pub fn label_of(&self, z: C64) -> Option<PixelLabel> {
        self.pixel_of(z).map(|(c, r)| self.label_at(c, r))
    }

    /// Component id of `z` if every pixel within Chebyshev distance
    /// `margin` carries that same id.
    pub fn interior_component(&self, z: C64, margin: usize) -> Option<u32> {
        let (c, r) = self.pixel_of(z)?;
        let id = match self.label_at(c, r) {
            PixelLabel::Component(id) => id,
            PixelLabel::Escaping(_) => return None,
        };
        let m = margin as isize;
        for dr in -m..=m {
            for dc in -m..=m {
                let (cc, rr) = (c as isize + dc, r as isize + dr);
                if cc < 0 || rr < 0 || cc >= self.width as isize || rr >= self.height as isize {
                    return None;
                }
                if self.label_at(cc as usize, rr as usize) != PixelLabel::Component(id) {
                    return None;
                }
            }
        }
        Some(id)
    }

    pub fn component(&self, id: u32) -> Option<&ComponentInfo> {
        self.components.get(id as usize)
    }

    pub fn limit_cycle_of(&self, id: u32) -> Option<&CycleInfo> {
        self.component(id)
            .and_then(|c| c.limit_cycle)
            .map(|i| &self.cycles[i])
    }

    /// Escape-time grayscale in binary PGM; component pixels are drawn
    /// black, escaping pixels brighter the faster they escape.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                let v = match self.label_at(col, row) {
                    PixelLabel::Component(_) => 0u8,
                    PixelLabel::Escaping(t) => {
                        let s = 1.0 - (t as f64 / self.max_iter as f64).sqrt();
                        (40.0 + 215.0 * s).round().clamp(0.0, 255.0) as u8
                    }
                };
                out.push(v);
            }
        }
        out
    }
}

/// Largest searched period, reduced so that `d^period <= CHART_CYCLE_DEGREE`.
fn chart_period(d: usize, max_period: usize) -> usize {
    let mut p = max_period.max(1);
    while p > 1 && (d as f64).powi(p as i32) > CHART_CYCLE_DEGREE as f64 {
        p -= 1;
    }
    p
}

const CHART_CYCLE_DEGREE: usize = 256;

pub fn component_chart(
    f: &ComplexPoly,
    bounds: ChartBox,
    width: usize,
    height: usize,
    opts: &ChartOptions,
) -> Result<ComponentChart> {
    if width == 0
        || height == 0
        || !(bounds.re_max > bounds.re_min && bounds.im_max > bounds.im_min)
    {
        return Err(Error::InvalidInput("empty chart".into()));
    }
    if f.degree() < 2 {
        return Err(Error::Precondition("charts need degree >= 2".into()));
    }
    let radius = escape_radius(f);
    if bounds
        .corners()
        .iter()
        .any(|&c| escape_time(f, c, radius, opts.max_iter).is_none())
    {
        return Err(Error::Precondition("chart corners do not escape".into()));
    }
    let mut chart = ComponentChart {
        bounds,
        width,
        height,
        max_iter: opts.max_iter,
        escape_radius: radius,
        labels: Vec::new(),
        components: Vec::new(),
        cycles: find_cycles(f, chart_period(f.degree(), opts.max_period))?,
    };
    const UNSET: u32 = u32::MAX;
    // Each non-escaping pixel carries the attracting-cycle point its orbit
    // sits next to after exactly `max_iter` steps; only pixels with equal
    // phases are joined, which keeps touching basins apart.
    let cycle_points: Vec<C64> = chart
        .cycles
        .iter()
        .filter(|c| c.is_attracting_type())
        .flat_map(|c| c.points.iter().copied())
        .collect();
    let pixels: Vec<(Option<u32>, u32)> = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let chart = &chart;
            let cycle_points = &cycle_points;
            (0..width).map(move |col| {
                let mut w = chart.pixel_center(col, row);
                for n in 0..=opts.max_iter {
                    if w.norm() > radius {
                        return (Some(n as u32), UNSET);
                    }
                    if n < opts.max_iter {
                        w = f.eval(w);
                    }
                }
                let phase = cycle_points
                    .iter()
                    .position(|&p| (p - w).norm() < 1e-2 * (1.0 + p.norm()))
                    .map_or(UNSET, |i| i as u32);
                (None, phase)
            })
        })
        .collect();
    let times: Vec<Option<u32>> = pixels.iter().map(|p| p.0).collect();
    let phases: Vec<u32> = pixels.iter().map(|p| p.1).collect();
    let mut ids = vec![UNSET; width * height];
    let mut counts: Vec<usize> = Vec::new();
    for start in 0..width * height {
        if times[start].is_some() || ids[start] != UNSET {
            continue;
        }
        let id = counts.len() as u32;
        let mut queue = VecDeque::from([start]);
        ids[start] = id;
        let mut count = 0;
        while let Some(p) = queue.pop_front() {
            count += 1;
            let (col, row) = (p % width, p / width);
            let mut visit = |q: usize| {
                if times[q].is_none() && ids[q] == UNSET && phases[q] == phases[p] {
                    ids[q] = id;
                    queue.push_back(q);
                }
            };
            if col > 0 {
                visit(p - 1);
            }
            if col + 1 < width {
                visit(p + 1);
            }
            if row > 0 {
                visit(p - width);
            }
            if row + 1 < height {
                visit(p + width);
            }
        }
        counts.push(count);
    }
    chart.labels = times
        .iter()
        .zip(&ids)
        .map(|(t, &id)| match t {
            Some(t) => PixelLabel::Escaping(*t),
            None => PixelLabel::Component(id),
        })
        .collect();

    let samples = interior_samples(&chart, &ids, counts.len());
    let components: Vec<ComponentInfo> = samples
        .into_par_iter()
        .enumerate()
        .map(|(id, sample)| {
            let (limit_cycle, arrival) = settle(f, &chart, sample, opts.settle_iter);
            ComponentInfo {
                id: id as u32,
                pixels: counts[id],
                sample,
                limit_cycle,
                arrival,
            }
        })
        .collect();
    chart.components = components;
    Ok(chart)
}

/// For every component, the member pixel farthest (in 4-steps) from any
/// non-member pixel.
fn interior_samples(chart: &ComponentChart, ids: &[u32], n: usize) -> Vec<C64> {
    let (w, h) = (chart.width, chart.height);
    let mut dist = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for p in 0..w * h {
        let (col, row) = (p % w, p / w);
        let border = ids[p] == u32::MAX
            || col == 0
            || row == 0
            || col + 1 == w
            || row + 1 == h
            || [p.wrapping_sub(1), p + 1, p.wrapping_sub(w), p + w]
                .iter()
                .any(|&q| q < w * h && ids[q] != ids[p]);
        if border {
            dist[p] = 0;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        let (col, row) = (p % w, p / w);
        let mut nbrs = Vec::with_capacity(4);
        if col > 0 {
            nbrs.push(p - 1);
        }
        if col + 1 < w {
            nbrs.push(p + 1);
        }
        if row > 0 {
            nbrs.push(p - w);
        }
        if row + 1 < h {
            nbrs.push(p + w);
        }
        for q in nbrs {
            if dist[q] == usize::MAX {
                dist[q] = dist[p] + 1;
                queue.push_back(q);
            }
        }
    }
    let mut best: Vec<Option<(usize, usize)>> = vec![None; n];
    for p in 0..w * h {
        let id = ids[p];
        if id == u32::MAX {
            continue;
        }
        let entry = &mut best[id as usize];
        if entry.map_or(true, |(d, _)| dist[p] > d) {
            *entry = Some((dist[p], p));
        }
    }
    best.into_iter()
        .map(|b| {
            let p = b.expect("component has pixels").1;
            chart.pixel_center(p % w, p / w)
        })
        .collect()
}

fn settle(
    f: &ComplexPoly,
    chart: &ComponentChart,
    sample: C64,
    iters: usize,
) -> (Option<usize>, Option<usize>) {
    let attracting: Vec<usize> = (0..chart.cycles.len())
        .filter(|&i| chart.cycles[i].is_attracting_type())
        .collect();
    let rotation: Vec<usize> = (0..chart.cycles.len())
        .filter(|&i| chart.cycles[i].class == CycleClass::Rotation)
        .collect();
    let rotation_components: Vec<(usize, u32)> = rotation
        .iter()
        .flat_map(|&i| {
            chart.cycles[i]
                .points
                .iter()
                .filter_map(move |&p| match chart.label_of(p) {
                    Some(PixelLabel::Component(id)) => Some((i, id)),
                    _ => None,
                })
        })
        .collect();
    let scale = chart.pixel_size();
    let mut w = sample;
    for n in 0..=iters {
        if w.norm() > chart.escape_radius {
            return (None, None);
        }
        for &i in &attracting {
            let c = &chart.cycles[i];
            let tol = match c.class {
                CycleClass::Parabolic => scale,
                _ => 1e-6 * (1.0 + c.points[0].norm()),
            };
            if c.points.iter().any(|&p| (p - w).norm() < tol) {
                return (Some(i), Some(n));
            }
        }
        if n < 64 {
            if let Some(PixelLabel::Component(id)) = chart.label_of(w) {
                if let Some(&(i, _)) = rotation_components.iter().find(|(_, cid)| *cid == id) {
                    return (Some(i), None);
                }
            }
        }
        w = f.eval(w);
    }
    (None, None)
}

/// Classifies `z` as escaping (by its Green value), interior to a bounded
/// component of the chart, or too close to the Julia set to tell.
pub fn classify_point(f: &ComplexPoly, chart: &ComponentChart, z: C64) -> Result<PointClass> {
    let g = green_value_budget(f, z, 1e-12, chart.max_iter.max(DEFAULT_GREEN_BUDGET))?;
    if g.value > 0.0 {
        return Ok(PointClass::Escaping { green: g.value });
    }
    let (col, row) = chart
        .pixel_of(z)
        .ok_or_else(|| Error::Precondition("point outside the chart".into()))?;
    if col == 0 || row == 0 || col + 1 == chart.width || row + 1 == chart.height {
        return Ok(PointClass::NearJulia);
    }
    match chart.interior_component(z, 1) {
        Some(id) => Ok(PointClass::Bounded { component: id }),
        None => Ok(PointClass::NearJulia),
    }
}

/// Points on the level curve `G = level` along `rays` equally spaced
/// directions from the origin (outermost crossing on each ray).
pub fn level_curve(f: &ComplexPoly, level: f64, rays: usize) -> Result<Vec<(C64, f64)>> {
    if !(level > 0.0) {
        return Err(Error::InvalidInput("level must be positive".into()));
    }
    let mut far = escape_radius(f);
    while green_value(f, C64::new(far, 0.0), 1e-12)?.value < level * 2.0 {
        far *= 2.0;
    }
    let mut out = Vec::with_capacity(rays);
    for k in 0..rays {
        let dir = C64::from_polar(1.0, TAU * k as f64 / rays as f64);
        let (mut lo, mut hi) = (0.0, far);
        if green_value(f, dir * lo, 1e-12)?.value >= level {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if green_value(f, dir * mid, 1e-12)?.value >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let z = dir * hi;
        out.push((z, green_value(f, z, 1e-12)?.value));
    }
    Ok(out)
}
