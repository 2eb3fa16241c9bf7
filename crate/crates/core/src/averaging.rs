//! Weighted sums of iterates `F = Σ a_n f^n`: the pair-splitting weight
//! construction on rotation domains, partial-sum norm traces, and the
//! certificate pipeline deciding whether such a sum can converge to a
//! constant near a point.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    classify_point, component_chart, default_chart_box, escape_radius, find_cycles, green_value,
    ChartOptions, ComponentChart, CycleClass, GreensEstimate, PixelLabel, PointClass,
};
use crate::error::{Error, Result};
use crate::monodromy::{choose_base_point, lift_loop, monodromy_data, LoopPath, PreimageTree};
use crate::permgroup::{
    chain_closure, minimal_block, Block, ChainClosure, ChainStep, Perm, PermGroup,
};
use crate::polycore::{fiber, ComplexPoly, C64};

pub const CERTIFICATE_VERSION: u32 = 1;
pub const DEFAULT_SCAN_HORIZON: usize = 10_000_000;
pub const DEFAULT_ITERATION_BUDGET: usize = 10_000_000;
/// Replay tolerance for stored norm traces.
pub const TRACE_REPLAY_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Where convergence is claimed and how it is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SampleGrid {
    /// The center plus `rings` concentric circles of `per_ring` points, the
    /// outermost on the boundary circle.
    Disk {
        center: C64,
        radius: f64,
        rings: usize,
        per_ring: usize,
    },
    Points {
        points: Vec<C64>,
    },
}

impl SampleGrid {
    pub fn disk(center: C64, radius: f64) -> SampleGrid {
        SampleGrid::Disk {
            center,
            radius,
            rings: 2,
            per_ring: 32,
        }
    }

    pub fn points(&self) -> Vec<C64> {
        match self {
            SampleGrid::Disk {
                center,
                radius,
                rings,
                per_ring,
            } => {
                let mut out = vec![*center];
                for j in 1..=*rings {
                    let r = radius * j as f64 / *rings as f64;
                    let twist = 0.5 * (j - 1) as f64 / *per_ring as f64;
                    for k in 0..*per_ring {
                        out.push(
                            center
                                + C64::from_polar(r, TAU * (k as f64 / *per_ring as f64 + twist)),
                        );
                    }
                }
                out
            }
            SampleGrid::Points { points } => points.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub index: usize,
    pub weight: C64,
    /// Earlier index whose iterate this one nearly repeats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<usize>,
}

/// Sparse weights `a_n`, split into correction groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub entries: Vec<WeightEntry>,
    pub group_sizes: Vec<usize>,
    pub region: SampleGrid,
    /// Median of the last partial sum over the samples (the raw constant;
    /// the telescoped construction has limit 0).
    pub limit_estimate: C64,
}

impl WeightSequence {
    pub fn new(
        entries: Vec<WeightEntry>,
        group_sizes: Vec<usize>,
        region: SampleGrid,
    ) -> Result<WeightSequence> {
        if entries.is_empty() || entries.iter().all(|e| e.weight.norm() == 0.0) {
            return Err(Error::InvalidInput(
                "weight sequence needs a nonzero weight".into(),
            ));
        }
        if entries.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::InvalidInput(
                "weight indices must be strictly increasing".into(),
            ));
        }
        if group_sizes.iter().sum::<usize>() != entries.len() || group_sizes.contains(&0) {
            return Err(Error::InvalidInput(
                "group sizes do not partition the entries".into(),
            ));
        }
        Ok(WeightSequence {
            entries,
            group_sizes,
            region,
            limit_estimate: C64::new(0.0, 0.0),
        })
    }

    pub fn groups(&self) -> Vec<&[WeightEntry]> {
        let mut out = Vec::with_capacity(self.group_sizes.len());
        let mut start = 0;
        for &s in &self.group_sizes {
            out.push(&self.entries[start..start + s]);
            start += s;
        }
        out
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map_or(0, |e| e.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub group: usize,
    /// Index of the last iterate in the partial sum.
    pub index: usize,
    /// `sup |F|` over the samples.
    pub sup_norm: f64,
    /// `sup |F - median(F)|` over the samples.
    pub centered_norm: f64,
    pub median: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub grid: SampleGrid,
    pub entries: Vec<TraceEntry>,
}

impl NormTrace {
    pub fn agrees_with(&self, other: &NormTrace, tol: f64) -> bool {
        self.grid == other.grid
            && self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.group == b.group
                    && a.index == b.index
                    && (a.sup_norm - b.sup_norm).abs() <= tol
                    && (a.centered_norm - b.centered_norm).abs() <= tol
                    && (a.median - b.median).norm() <= tol
            })
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn trace_entry(group: usize, index: usize, sums: &[C64]) -> TraceEntry {
    let re: Vec<f64> = sums.iter().map(|s| s.re).collect();
    let im: Vec<f64> = sums.iter().map(|s| s.im).collect();
    let med = C64::new(median(&re), median(&im));
    TraceEntry {
        group,
        index,
        sup_norm: sums.iter().map(|s| s.norm()).fold(0.0, f64::max),
        centered_norm: sums.iter().map(|s| (s - med).norm()).fold(0.0, f64::max),
        median: med,
    }
}

fn orbit_guard(f: &ComplexPoly) -> f64 {
    if f.degree() >= 2 {
        escape_radius(f)
    } else {
        f64::INFINITY
    }
}

fn step_all(f: &ComplexPoly, state: &mut [C64], guard: f64, index: usize) -> Result<()> {
    for w in state.iter_mut() {
        *w = f.eval(*w);
        if !w.is_finite() || w.norm() > guard {
            return Err(Error::Overflow { index });
        }
    }
    Ok(())
}

/// Norms of the partial sums at every group boundary.
pub fn evaluate_partial_sums(
    f: &ComplexPoly,
    weights: &WeightSequence,
    grid: &SampleGrid,
    budget: usize,
) -> Result<NormTrace> {
    if weights.max_index() > budget {
        return Err(Error::Budget(format!(
            "weight index {} exceeds iteration budget {budget}",
            weights.max_index()
        )));
    }
    let guard = orbit_guard(f);
    let mut state = grid.points();
    let mut sums = vec![C64::new(0.0, 0.0); state.len()];
    let mut entries = Vec::with_capacity(weights.group_sizes.len());
    let mut n = 0;
    for (g, group) in weights.groups().into_iter().enumerate() {
        for e in group {
            while n < e.index {
                n += 1;
                step_all(f, &mut state, guard, n)?;
            }
            for (s, w) in sums.iter_mut().zip(&state) {
                *s += e.weight * w;
            }
        }
        entries.push(trace_entry(g, n, &sums));
    }
    Ok(NormTrace {
        grid: grid.clone(),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiegelOptions {
    pub rings: usize,
    pub per_ring: usize,
    /// Largest iterate index the near-return scan may reach.
    pub scan_horizon: usize,
    pub chart_resolution: usize,
    pub chart_max_iter: usize,
}

impl Default for SiegelOptions {
    fn default() -> Self {
        SiegelOptions {
            rings: 2,
            per_ring: 32,
            scan_horizon: DEFAULT_SCAN_HORIZON,
            chart_resolution: 400,
            chart_max_iter: 400,
        }
    }
}

/// Index `N >= 0` at which the orbit of `center` enters a periodic rotation
/// component, after checking that every sample of the disk lies in one
/// rotation-class component of the chart.
fn rotation_preperiod(
    f: &ComplexPoly,
    chart: Option<&ComponentChart>,
    center: C64,
    samples: &[C64],
) -> Result<usize> {
    if f.degree() < 2 {
        let cycles = find_cycles(f, 1)?;
        return match cycles.first() {
            // every neutral affine map is a rigid rotation
            Some(c) if matches!(c.class, CycleClass::Rotation | CycleClass::Parabolic) => Ok(0),
            Some(c) => Err(Error::Precondition(format!(
                "affine map has a {:?} fixed point",
                c.class
            ))),
            None => Err(Error::Precondition(
                "translation has no rotation domain".into(),
            )),
        };
    }
    let chart = chart.ok_or_else(|| Error::Precondition("a component chart is required".into()))?;
    let id = chart.interior_component(center, 1).ok_or_else(|| {
        Error::Precondition("center is not interior to a bounded component".into())
    })?;
    if samples
        .iter()
        .any(|&w| chart.interior_component(w, 1) != Some(id))
    {
        return Err(Error::Precondition(
            "sample disk leaves the component of its center".into(),
        ));
    }
    let cycle = chart
        .limit_cycle_of(id)
        .ok_or_else(|| Error::Precondition("no limit cycle identified for the component".into()))?;
    if cycle.class != CycleClass::Rotation {
        return Err(Error::Precondition(format!(
            "component is of {:?} class, not rotation",
            cycle.class
        )));
    }
    let periodic: Vec<PixelLabel> = cycle
        .points
        .iter()
        .filter_map(|&p| chart.label_of(p))
        .collect();
    let mut w = center;
    for n in 0..=64 {
        if chart.label_of(w).is_some_and(|l| periodic.contains(&l)) {
            return Ok(n);
        }
        w = f.eval(w);
    }
    Err(Error::Precondition(
        "orbit of the center does not reach the periodic component".into(),
    ))
}

/// `c f^a - c f^b`, a term of the telescoped partial sum.
#[derive(Clone, Copy, Debug)]
struct Pair {
    a: usize,
    b: usize,
    c: f64,
}

/// A pending request for an index `m` with `‖f^m - f^target‖ < tol`.
#[derive(Clone, Copy, Debug)]
struct Request {
    target: usize,
    weight: f64,
    /// Which side of the new pair the selected index takes.
    new_is_a: bool,
    c: f64,
    other: usize,
}

struct Scan<'a> {
    f: &'a ComplexPoly,
    guard: f64,
    index: usize,
    state: Vec<C64>,
    stored: HashMap<usize, Vec<C64>>,
}

impl Scan<'_> {
    fn advance(&mut self) -> Result<()> {
        self.index += 1;
        step_all(self.f, &mut self.state, self.guard, self.index)
    }

    /// Scans forward for one new index per request, in increasing order.
    fn serve(
        &mut self,
        requests: &[Request],
        tol: f64,
        horizon: usize,
        group: usize,
    ) -> Result<Vec<(usize, usize)>> {
        let cell = |z: C64| ((z.re / tol).floor() as i64, (z.im / tol).floor() as i64);
        // a boundary sample; the center may be a fixed point
        let key = self.state.len() - 1;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (r, req) in requests.iter().enumerate() {
            buckets
                .entry(cell(self.stored[&req.target][key]))
                .or_default()
                .push(r);
        }
        let mut pending = requests.len();
        let mut served = vec![false; requests.len()];
        let mut out = Vec::with_capacity(requests.len());
        let mut best = f64::INFINITY;
        while pending > 0 {
            if self.index >= horizon {
                return Err(Error::NoNearReturn {
                    group,
                    horizon,
                    best,
                    target: tol,
                });
            }
            self.advance()?;
            let reference = self.state[key];
            let (cx, cy) = cell(reference);
            let mut hit = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(list) = buckets.get(&(cx + dx, cy + dy)) else {
                        continue;
                    };
                    for &r in list {
                        if served[r] {
                            continue;
                        }
                        let target = &self.stored[&requests[r].target];
                        if (target[key] - reference).norm() >= tol {
                            continue;
                        }
                        let sup = target
                            .iter()
                            .zip(&self.state)
                            .map(|(a, b)| (a - b).norm())
                            .fold(0.0, f64::max);
                        best = best.min(sup);
                        if sup < tol {
                            hit = Some(r);
                            break 'search;
                        }
                    }
                }
            }
            if let Some(r) = hit {
                served[r] = true;
                pending -= 1;
                self.stored.insert(self.index, self.state.clone());
                out.push((r, self.index));
            }
        }
        Ok(out)
    }
}

fn orbit_diameter(points: &[C64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Greedy construction of weights whose partial sums tend to 0 uniformly
/// on the disk: start from `a_N = 1`, then in group `k` pick new indices
/// whose iterates nearly repeat earlier ones, with weights of modulus
/// `2^{-(k-1)}`, so that the sup-norm after group `k` is at most `s·2^{-k}`,
/// `s` being the diameter of the first sampled iterate, capped at 1.
pub fn build_siegel_weights(
    f: &ComplexPoly,
    center: C64,
    radius: f64,
    groups: usize,
    opts: &SiegelOptions,
) -> Result<(WeightSequence, NormTrace)> {
    let chart = if f.degree() >= 2 {
        let copts = ChartOptions {
            max_iter: opts.chart_max_iter,
            ..ChartOptions::default()
        };
        Some(component_chart(
            f,
            default_chart_box(f),
            opts.chart_resolution,
            opts.chart_resolution,
            &copts,
        )?)
    } else {
        None
    };
    build_siegel_weights_in(f, chart.as_ref(), center, radius, groups, opts)
}

fn build_siegel_weights_in(
    f: &ComplexPoly,
    chart: Option<&ComponentChart>,
    center: C64,
    radius: f64,
    groups: usize,
    opts: &SiegelOptions,
) -> Result<(WeightSequence, NormTrace)> {
    if groups == 0 || !(radius > 0.0) || opts.rings == 0 || opts.per_ring == 0 {
        return Err(Error::InvalidInput(
            "need groups >= 1, radius > 0 and a nonempty grid".into(),
        ));
    }
    if groups > 20 {
        return Err(Error::CapExceeded {
            what: "correction groups",
            cap: 20,
        });
    }
    let grid = SampleGrid::Disk {
        center,
        radius,
        rings: opts.rings,
        per_ring: opts.per_ring,
    };
    let samples = grid.points();
    let start = rotation_preperiod(f, chart, center, &samples)?;

    let mut scan = Scan {
        f,
        guard: orbit_guard(f),
        index: 0,
        state: samples.clone(),
        stored: HashMap::new(),
    };
    for _ in 0..start {
        scan.advance()?;
    }
    scan.stored.insert(start, scan.state.clone());
    // After group k there are 3^{k-1} pairs of weight 2^{-(k-1)}; a common
    // pair tolerance of scale/(2·3^{K-1}) keeps group k within scale·2^{-k}.
    let scale = orbit_diameter(&scan.state).min(1.0);
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("sample orbit is a single point".into()));
    }
    let tol = scale * 0.5 / 3f64.powi(groups as i32 - 1) * (1.0 - 1e-9);

    let mut entries = vec![WeightEntry {
        index: start,
        weight: C64::new(1.0, 0.0),
        partner: None,
    }];
    let mut group_sizes = vec![1];
    let mut pairs: Vec<Pair> = Vec::new();
    let mut trace = vec![trace_entry(0, start, &scan.stored[&start])];

    for k in 1..=groups {
        let requests: Vec<Request> = if k == 1 {
            vec![Request {
                target: start,
                weight: -1.0,
                new_is_a: false,
                c: 1.0,
                other: start,
            }]
        } else {
            pairs
                .iter()
                .flat_map(|p| {
                    let h = 0.5 * p.c;
                    [
                        Request {
                            target: p.b,
                            weight: h,
                            new_is_a: true,
                            c: h,
                            other: p.b,
                        },
                        Request {
                            target: p.a,
                            weight: -h,
                            new_is_a: false,
                            c: h,
                            other: p.a,
                        },
                    ]
                })
                .collect()
        };
        let served = scan.serve(&requests, tol, opts.scan_horizon, k)?;
        if k > 1 {
            for p in pairs.iter_mut() {
                p.c *= 0.5;
            }
        }
        for &(r, m) in &served {
            let req = requests[r];
            entries.push(WeightEntry {
                index: m,
                weight: C64::new(req.weight, 0.0),
                partner: Some(req.target),
            });
            pairs.push(if req.new_is_a {
                Pair {
                    a: m,
                    b: req.other,
                    c: req.c,
                }
            } else {
                Pair {
                    a: req.other,
                    b: m,
                    c: req.c,
                }
            });
        }
        group_sizes.push(served.len());

        let mut sums = vec![C64::new(0.0, 0.0); samples.len()];
        for e in &entries {
            for (s, w) in sums.iter_mut().zip(&scan.stored[&e.index]) {
                *s += e.weight * w;
            }
        }
        let entry = trace_entry(k, scan.index, &sums);
        if entry.sup_norm > scale * 0.5f64.powi(k as i32) + 1e-9 {
            return Err(Error::Consistency(format!(
                "group {k} norm {:e} exceeds its target",
                entry.sup_norm
            )));
        }
        trace.push(entry);
    }
    let mut weights = WeightSequence::new(entries, group_sizes, grid.clone())?;
    weights.limit_estimate = trace.last().unwrap().median;
    Ok((
        weights,
        NormTrace {
            grid,
            entries: trace,
        },
    ))
}

/// Numerical rank of the matrix `(w_j^k)` for `k = 0..=max_power`, after
/// scaling the points into the unit disk and normalizing columns.
pub fn vandermonde_rank(points: &[C64], max_power: usize) -> usize {
    let scale = points
        .iter()
        .map(|w| w.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut m = DMatrix::<C64>::from_fn(points.len(), max_power + 1, |i, k| {
        (points[i] / scale).powu(k as u32)
    });
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
    }
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    NoTimeAverage { forced_zero_prefix_length: usize },
    TimeAverageExists { weights: WeightSequence },
    Inconclusive { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Global,
    Escaping,
    Julia,
    MonodromyBlock,
    SiegelConstruction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorWitness {
    pub path: LoopPath,
    pub perm: Perm,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub base: Option<C64>,
    pub fiber: Vec<C64>,
    pub generators: Vec<GeneratorWitness>,
    pub s0: Vec<usize>,
    pub chain: Vec<ChainStep>,
    /// Final set of the chain.
    pub chain_set: Vec<usize>,
    pub block: Vec<usize>,
    pub block_system: Vec<Vec<usize>>,
    pub norm_trace: Vec<TraceEntry>,
    pub green: Option<GreensEstimate>,
    pub vandermonde_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Fibers are simple at relative tolerance `1e-9 max(1, |p|)`.
    pub fiber_rel: f64,
    pub pixel_size: Option<f64>,
    pub guard_pixels: usize,
    pub trace_replay: f64,
    pub rank_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub chart_resolution: usize,
    pub chart_max_iter: usize,
    pub closure_cap: usize,
    pub scan_horizon: usize,
    pub siegel_groups: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub polynomial: ComplexPoly,
    pub point: Option<C64>,
    #[serde(rename = "N")]
    pub level: usize,
    pub verdict: Verdict,
    pub rule: Option<Rule>,
    pub witnesses: Witnesses,
    pub tolerances: Tolerances,
    pub budgets: Budgets,
    /// RNG seed for randomized rules.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Options of a `certify` run, for reruns.
    #[serde(default)]
    pub options: Option<CertifyOptions>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub chart_resolution: usize,
    pub chart_max_iter: usize,
    pub guard_pixels: usize,
    /// Largest distance of the base point from its target.
    pub base_offset: f64,
    pub closure_cap: usize,
    pub siegel_radius: f64,
    pub siegel_groups: usize,
    pub scan_horizon: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            chart_resolution: 512,
            chart_max_iter: 400,
            guard_pixels: 2,
            base_offset: 0.05,
            closure_cap: crate::permgroup::DEFAULT_CLOSURE_CAP,
            siegel_radius: 1e-2,
            siegel_groups: 5,
            scan_horizon: DEFAULT_SCAN_HORIZON,
        }
    }
}

impl CertifyOptions {
    fn budgets(&self) -> Budgets {
        Budgets {
            chart_resolution: self.chart_resolution,
            chart_max_iter: self.chart_max_iter,
            closure_cap: self.closure_cap,
            scan_horizon: self.scan_horizon,
            siegel_groups: self.siegel_groups,
            trials: 0,
        }
    }

    fn siegel(&self) -> SiegelOptions {
        SiegelOptions {
            scan_horizon: self.scan_horizon,
            chart_resolution: self.chart_resolution,
            chart_max_iter: self.chart_max_iter,
            ..SiegelOptions::default()
        }
    }
}

fn tolerances(pixel: Option<f64>, guard: usize) -> Tolerances {
    Tolerances {
        fiber_rel: 1e-9,
        pixel_size: pixel,
        guard_pixels: guard,
        trace_replay: TRACE_REPLAY_TOL,
        rank_rel: RANK_TOL,
    }
}

/// Checks that constancy of a degree-`d^{N-1}` polynomial on the `d^N`
/// points of a simple fiber forces it to be constant, for a random base
/// point; a global average would have to be such a polynomial.
pub fn refute_global(
    f: &ComplexPoly,
    level: usize,
    trials: usize,
    seed: u64,
) -> Result<Certificate> {
    let d = f.degree();
    if d < 2 {
        return Err(Error::Precondition(
            "affine maps have global averages; nothing to refute".into(),
        ));
    }
    if level == 0 {
        return Err(Error::InvalidInput("level must be at least 1".into()));
    }
    let count = d
        .checked_pow(level as u32)
        .filter(|&c| c <= 1 << 14)
        .ok_or(Error::CapExceeded {
            what: "fiber size",
            cap: 1 << 14,
        })?;
    let max_power = count / d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..trials.max(1) {
        let p = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let fib = match fiber(f, p, level) {
            Ok(fib) => fib,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let rank = vandermonde_rank(&fib.points, max_power);
        let verdict = if rank == max_power + 1 {
            Verdict::NoTimeAverage {
                forced_zero_prefix_length: level,
            }
        } else {
            Verdict::Inconclusive {
                reason: format!("Vandermonde rank {rank} < {}", max_power + 1),
            }
        };
        return Ok(Certificate {
            version: CERTIFICATE_VERSION,
            polynomial: f.clone(),
            point: None,
            level,
            verdict,
            rule: Some(Rule::Global),
            witnesses: Witnesses {
                base: Some(p),
                fiber: fib.points,
                vandermonde_rank: Some(rank),
                ..Witnesses::default()
            },
            tolerances: tolerances(None, 0),
            budgets: Budgets {
                chart_resolution: 0,
                chart_max_iter: 0,
                closure_cap: 0,
                scan_horizon: 0,
                siegel_groups: 0,
                trials,
            },
            seed: Some(seed),
            options: None,
            notes: vec![],
        });
    }
    Err(last_err.unwrap_or_else(|| Error::Budget("no simple fiber found".into())))
}

/// Decides whether `Σ a_n f^n` can converge to a constant near `z`.
pub fn certify(
    f: &ComplexPoly,
    z: C64,
    level: usize,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if level < 2 {
        return Err(Error::InvalidInput("certify needs N >= 2".into()));
    }
    if f.degree() == 0 {
        return Err(Error::InvalidInput(
            "constant maps are not dynamical".into(),
        ));
    }
    if !z.is_finite() {
        return Err(Error::InvalidInput("point must be finite".into()));
    }
    let mut cert = Certificate {
        version: CERTIFICATE_VERSION,
        polynomial: f.clone(),
        point: Some(z),
        level,
        verdict: Verdict::Inconclusive {
            reason: String::new(),
        },
        rule: None,
        witnesses: Witnesses::default(),
        tolerances: tolerances(None, opts.guard_pixels),
        budgets: opts.budgets(),
        seed: None,
        options: Some(opts.clone()),
        notes: vec![],
    };
    if f.degree() == 1 {
        certify_affine(f, z, opts, &mut cert)?;
        return Ok(cert);
    }
    let green = green_value(f, z, 1e-12)?;
    if green.value > 0.0 {
        cert.witnesses.green = Some(green);
        cert.rule = Some(Rule::Escaping);
        cert.verdict = Verdict::NoTimeAverage {
            forced_zero_prefix_length: level,
        };
        cert.notes
            .push("positive Green value: every finite prefix is forced to vanish".into());
        return Ok(cert);
    }
    let copts = ChartOptions {
        max_iter: opts.chart_max_iter,
        ..ChartOptions::default()
    };
    let chart = match component_chart(
        f,
        default_chart_box(f),
        opts.chart_resolution,
        opts.chart_resolution,
        &copts,
    ) {
        Ok(c) => c,
        Err(e) => return Ok(inconclusive(cert, format!("chart failed: {e}"))),
    };
    cert.tolerances.pixel_size = Some(chart.pixel_size());
    let component = match classify_point(f, &chart, z)? {
        PointClass::Escaping { green } => {
            cert.witnesses.green = Some(GreensEstimate {
                value: green,
                iterations_used: 0,
                error_bound: 0.0,
            });
            cert.rule = Some(Rule::Escaping);
            cert.verdict = Verdict::NoTimeAverage {
                forced_zero_prefix_length: level,
            };
            return Ok(cert);
        }
        PointClass::NearJulia => {
            cert.rule = Some(Rule::Julia);
            return Ok(inconclusive(
                cert,
                "point is within a pixel of the Julia set".into(),
            ));
        }
        PointClass::Bounded { component } => component,
    };
    let Some(cycle) = chart.limit_cycle_of(component).cloned() else {
        return Ok(inconclusive(
            cert,
            "limit cycle of the component not identified".into(),
        ));
    };
    match cycle.class {
        CycleClass::Rotation => {
            let r = opts.siegel_radius;
            match build_siegel_weights_in(f, Some(&chart), z, r, opts.siegel_groups, &opts.siegel())
            {
                Ok((weights, trace)) => {
                    cert.rule = Some(Rule::SiegelConstruction);
                    cert.witnesses.norm_trace = trace.entries;
                    cert.verdict = Verdict::TimeAverageExists { weights };
                    cert.notes
                        .push("rotation domain: partial sums telescope to 0".into());
                    Ok(cert)
                }
                Err(e) => Ok(inconclusive(
                    cert,
                    format!("weight construction failed: {e}"),
                )),
            }
        }
        CycleClass::Repelling => Ok(inconclusive(
            cert,
            "component limit is a repelling cycle".into(),
        )),
        _ => match certify_basin(
            f,
            &chart,
            z,
            component,
            &cycle.points,
            level,
            opts,
            &mut cert,
        ) {
            Ok(()) => Ok(cert),
            Err(e) => Ok(inconclusive(
                cert,
                format!("monodromy pipeline failed: {e}"),
            )),
        },
    }
}

fn inconclusive(mut cert: Certificate, reason: String) -> Certificate {
    cert.verdict = Verdict::Inconclusive { reason };
    cert
}

fn certify_affine(
    f: &ComplexPoly,
    z: C64,
    opts: &CertifyOptions,
    cert: &mut Certificate,
) -> Result<()> {
    // a_0 = -a, a_1 = 1 gives F = f - a·id = b
    let a = f.coeffs()[1];
    let grid = SampleGrid::disk(z, opts.siegel_radius);
    let weights = WeightSequence::new(
        vec![
            WeightEntry {
                index: 0,
                weight: -a,
                partner: None,
            },
            WeightEntry {
                index: 1,
                weight: C64::new(1.0, 0.0),
                partner: None,
            },
        ],
        vec![2],
        grid.clone(),
    )?;
    let trace = evaluate_partial_sums(f, &weights, &grid, 1)?;
    let mut weights = weights;
    weights.limit_estimate = trace.entries[0].median;
    cert.witnesses.norm_trace = trace.entries;
    cert.rule = Some(Rule::Global);
    cert.verdict = Verdict::TimeAverageExists { weights };
    cert.notes.push("affine map: f - a·id is constant".into());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn certify_basin(
    f: &ComplexPoly,
    chart: &ComponentChart,
    z: C64,
    component: u32,
    cycle: &[C64],
    level: usize,
    opts: &CertifyOptions,
    cert: &mut Certificate,
) -> Result<()> {
    let d = f.degree();
    let image = f.eval_iterate(z, level).0;
    let Some(PixelLabel::Component(target_component)) = chart.label_of(image) else {
        cert.verdict = Verdict::Inconclusive {
            reason: "f^N(z) is not in a bounded component".into(),
        };
        return Ok(());
    };
    let target = cycle
        .iter()
        .copied()
        .find(|&c| chart.label_of(c) == Some(PixelLabel::Component(target_component)))
        .unwrap_or(image);
    let guard = opts.guard_pixels;
    let p = choose_base_point(f, level, target, opts.base_offset, |q| {
        chart.interior_component(q, guard) == Some(target_component)
    })?;
    let data = monodromy_data(f, level, p)?;
    let points = data.tree.level(level).to_vec();
    let s0: Vec<usize> = (0..points.len())
        .filter(|&i| chart.interior_component(points[i], guard) == Some(component))
        .collect();
    let generators = data.generators();
    cert.witnesses.base = Some(p);
    cert.witnesses.fiber = points.clone();
    cert.witnesses.generators = data
        .lollipops
        .iter()
        .chain(std::iter::once(&data.infinity))
        .zip(&generators)
        .map(|(path, perm)| GeneratorWitness {
            path: path.clone(),
            perm: perm.clone(),
        })
        .collect();
    cert.witnesses.s0 = s0.clone();
    cert.rule = Some(Rule::MonodromyBlock);
    cert.notes.push(
        "S0 uses the component chart; convergence on compact subsets of basin and petal components is assumed"
            .into(),
    );
    if s0.len() < 2 {
        cert.verdict = Verdict::Inconclusive {
            reason: format!("S0 has {} point(s); need two", s0.len()),
        };
        return Ok(());
    }
    let distinct_parents = s0.iter().any(|&i| {
        data.tree.ancestor(level, i, level - 1) != data.tree.ancestor(level, s0[0], level - 1)
    });
    if !distinct_parents {
        cert.notes
            .push("S0 lies under a single level-(N-1) vertex".into());
    }
    let group = PermGroup::new(points.len(), generators)?;
    let closure = chain_closure(&group, &s0, opts.closure_cap)?;
    let block = minimal_block(&group, &s0)?;
    cert.witnesses.chain = closure.steps.clone();
    cert.witnesses.chain_set = closure.set.clone();
    cert.witnesses.block = block.points.clone();
    cert.witnesses.block_system = block.system.clone();
    let bound = d.pow(level as u32 - 1);
    cert.verdict = if !closure.witness_complete {
        Verdict::Inconclusive {
            reason: "chain witness incomplete within the closure cap".into(),
        }
    } else if closure.set.len() > bound {
        Verdict::NoTimeAverage {
            forced_zero_prefix_length: level,
        }
    } else {
        Verdict::Inconclusive {
            reason: format!(
                "block of size {} does not exceed d^(N-1) = {bound}",
                closure.set.len()
            ),
        }
    };
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub permutations: Option<bool>,
    pub chain: Option<bool>,
    pub block: Option<bool>,
    pub cardinality: Option<bool>,
    pub norm_trace: Option<bool>,
    pub green: Option<bool>,
    pub rank: Option<bool>,
}

impl ReplayReport {
    pub fn all_ok(&self) -> bool {
        [
            self.permutations,
            self.chain,
            self.block,
            self.cardinality,
            self.norm_trace,
            self.green,
            self.rank,
        ]
        .iter()
        .all(|c| c.unwrap_or(true))
    }
}

/// Recomputes every witness stored in a certificate.
/// Recomputes a certificate from its stored inputs; equal to the original
/// for a deterministic run.
pub fn rerun_certificate(cert: &Certificate) -> Result<Certificate> {
    match (cert.point, &cert.options) {
        (Some(z), Some(opts)) => certify(&cert.polynomial, z, cert.level, opts),
        (None, _) => {
            let seed = cert
                .seed
                .ok_or_else(|| Error::InvalidInput("certificate lacks its seed".into()))?;
            refute_global(&cert.polynomial, cert.level, cert.budgets.trials, seed)
        }
        (Some(_), None) => Err(Error::InvalidInput("certificate lacks its options".into())),
    }
}

pub fn replay_certificate(cert: &Certificate) -> Result<ReplayReport> {
    let f = &cert.polynomial;
    let w = &cert.witnesses;
    let mut report = ReplayReport::default();
    match (&cert.rule, &cert.verdict) {
        (Some(Rule::MonodromyBlock), _) if !w.generators.is_empty() => {
            let base = w
                .base
                .ok_or_else(|| Error::InvalidInput("certificate lacks a base point".into()))?;
            let tree = PreimageTree::new(f, base, cert.level)?;
            let fiber_ok = tree.level(cert.level).len() == w.fiber.len()
                && tree
                    .level(cert.level)
                    .iter()
                    .zip(&w.fiber)
                    .all(|(a, b)| (a - b).norm() < 1e-8);
            let mut perms_ok = fiber_ok;
            for g in &w.generators {
                perms_ok &= lift_loop(f, cert.level, &tree, &g.path)?.perm == g.perm;
            }
            report.permutations = Some(perms_ok);
            let gens: Vec<Perm> = w.generators.iter().map(|g| g.perm.clone()).collect();
            let n = w.fiber.len();
            let closure = ChainClosure {
                start: w.s0.clone(),
                set: w.chain_set.clone(),
                steps: w.chain.clone(),
                witness_complete: true,
                used_block_fallback: false,
            };
            report.chain = Some(closure.replay(&gens, n));
            let block = Block {
                points: w.block.clone(),
                system: w.block_system.clone(),
            };
            report.block =
                Some(block.verify(&gens) && w.s0.iter().all(|x| block.points.contains(x)));
            if matches!(cert.verdict, Verdict::NoTimeAverage { .. }) {
                report.cardinality =
                    Some(w.chain_set.len() > f.degree().pow(cert.level as u32 - 1));
            }
        }
        (Some(Rule::SiegelConstruction | Rule::Global), Verdict::TimeAverageExists { weights }) => {
            let trace =
                evaluate_partial_sums(f, weights, &weights.region, DEFAULT_ITERATION_BUDGET)?;
            let stored = NormTrace {
                grid: weights.region.clone(),
                entries: w.norm_trace.clone(),
            };
            report.norm_trace = Some(trace.agrees_with(&stored, TRACE_REPLAY_TOL));
        }
        (Some(Rule::Escaping), _) => {
            let z = cert
                .point
                .ok_or_else(|| Error::InvalidInput("certificate lacks its point".into()))?;
            report.green = Some(green_value(f, z, 1e-12)?.value > 0.0);
        }
        (Some(Rule::Global), Verdict::NoTimeAverage { .. }) => {
            let max_power = w.fiber.len() / f.degree();
            report.rank = Some(
                w.vandermonde_rank == Some(vandermonde_rank(&w.fiber, max_power))
                    && w.vandermonde_rank == Some(max_power + 1),
            );
        }
        _ => {}
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn rotation(theta: f64) -> ComplexPoly {
        ComplexPoly::new(vec![c(0.0, 0.0), C64::from_polar(1.0, TAU * theta)]).unwrap()
    }

    #[test]
    fn identity_weight_trace_is_radius() {
        let f = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let grid = SampleGrid::disk(c(0.1, 0.0), 0.05);
        let w = WeightSequence::new(
            vec![WeightEntry {
                index: 0,
                weight: c(1.0, 0.0),
                partner: None,
            }],
            vec![1],
            grid.clone(),
        )
        .unwrap();
        let t = evaluate_partial_sums(&f, &w, &grid, 10).unwrap();
        assert!((t.entries[0].centered_norm - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rational_rotation_returns_exactly() {
        let f = rotation(0.2);
        let (w, t) =
            build_siegel_weights(&f, c(0.0, 0.0), 0.5, 3, &SiegelOptions::default()).unwrap();
        for e in &w.entries {
            assert_eq!(e.index % 5, 0);
        }
        assert!(t.entries.iter().skip(1).all(|e| e.sup_norm < 1e-12));
    }

    #[test]
    fn group_weights_follow_the_pattern() {
        let f = rotation(golden());
        let (w, t) =
            build_siegel_weights(&f, c(0.0, 0.0), 0.5, 4, &SiegelOptions::default()).unwrap();
        assert_eq!(w.group_sizes, vec![1, 1, 2, 6, 18]);
        for (k, g) in w.groups().iter().enumerate().skip(1) {
            for e in g.iter() {
                assert!((e.weight.norm() - 0.5f64.powi(k as i32 - 1)).abs() < 1e-15);
            }
        }
        for e in &t.entries[1..] {
            assert!(e.sup_norm <= 0.5f64.powi(e.group as i32) + 1e-9);
        }
        let replay = evaluate_partial_sums(&f, &w, &t.grid, 1 << 24).unwrap();
        assert!(replay.agrees_with(&t, 1e-9));
    }

    #[test]
    fn superattracting_center_rejected() {
        let f = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let err =
            build_siegel_weights(&f, c(0.0, 0.0), 0.01, 2, &SiegelOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
    }

    #[test]
    fn vandermonde_ranks() {
        let sq = ComplexPoly::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let fib = fiber(&sq, c(0.3, 0.7), 2).unwrap();
        assert_eq!(vandermonde_rank(&fib.points, 2), 3);
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let fib = fiber(&f, c(-0.4, 0.9), 3).unwrap();
        assert_eq!(vandermonde_rank(&fib.points, 4), 5);
    }

    #[test]
    fn affine_refutation_rejected() {
        let f = ComplexPoly::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            refute_global(&f, 2, 5, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn escaping_point_certified() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let cert = certify(&f, c(3.0, 0.0), 2, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.rule, Some(Rule::Escaping));
        assert!(matches!(cert.verdict, Verdict::NoTimeAverage { .. }));
        assert!(replay_certificate(&cert).unwrap().all_ok());
    }
}
