//! Polynomial endomorphisms of C^k in sparse monomial form: composition,
//! degree growth, polynomial relations among iterates, and the
//! elementary/Hénon split in dimension two.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::C64;

/// Coefficients at most this fraction of the largest one are pruned.
pub const PRUNE_REL: f64 = 1e-14;
pub const DEFAULT_MONOMIAL_CAP: usize = 200_000;
/// Relative tolerance of the symbolic relation check.
pub const RELATION_TOL: f64 = 1e-9;

/// Sparse polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> MultiPoly {
        MultiPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C64) -> MultiPoly {
        let mut p = MultiPoly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p.prune();
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> MultiPoly {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = MultiPoly::zero(nvars);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, C64)>,
    ) -> Result<MultiPoly> {
        let mut p = MultiPoly::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::InvalidInput(format!(
                    "exponent tuple {e:?} has length != {nvars}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            p.add_term(e, c);
        }
        p.prune();
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms sorted by exponent tuple.
    pub fn terms(&self) -> Vec<(Vec<u32>, C64)> {
        self.terms.iter().map(|(e, c)| (e.clone(), *c)).collect()
    }

    pub fn coeff(&self, exps: &[u32]) -> C64 {
        self.terms.get(exps).copied().unwrap_or_default()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn add_term(&mut self, e: Vec<u32>, c: C64) {
        *self.terms.entry(e).or_default() += c;
    }

    fn prune(&mut self) {
        let cut = PRUNE_REL * self.max_abs();
        self.terms.retain(|_, c| c.norm() > cut);
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out.prune();
        out
    }

    pub fn scale(&self, s: C64) -> MultiPoly {
        let mut out = MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        };
        out.prune();
        out
    }

    pub fn mul(&self, other: &MultiPoly, cap: usize) -> Result<MultiPoly> {
        let mut out = MultiPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
            if out.terms.len() > cap {
                return Err(Error::CapExceeded {
                    what: "monomial count",
                    cap,
                });
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(x).fold(*c, |acc, (&k, &xi)| acc * xi.powu(k)))
            .sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TermLiteral {
    exps: Vec<u32>,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MapLiteral {
    dim: usize,
    components: Vec<Vec<TermLiteral>>,
}

/// Polynomial map `C^k -> C^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapLiteral", into = "MapLiteral")]
pub struct MultiPolyMap {
    components: Vec<MultiPoly>,
}

impl TryFrom<MapLiteral> for MultiPolyMap {
    type Error = Error;

    fn try_from(lit: MapLiteral) -> Result<Self> {
        if lit.components.len() != lit.dim {
            return Err(Error::InvalidInput(format!(
                "{} components for dimension {}",
                lit.components.len(),
                lit.dim
            )));
        }
        let components = lit
            .components
            .into_iter()
            .map(|terms| {
                MultiPoly::from_terms(
                    lit.dim,
                    terms.into_iter().map(|t| (t.exps, C64::new(t.re, t.im))),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MultiPolyMap::new(components)
    }
}

impl From<MultiPolyMap> for MapLiteral {
    fn from(m: MultiPolyMap) -> Self {
        MapLiteral {
            dim: m.dim(),
            components: m
                .components
                .iter()
                .map(|p| {
                    p.terms()
                        .into_iter()
                        .map(|(exps, c)| TermLiteral {
                            exps,
                            re: c.re,
                            im: c.im,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl MultiPolyMap {
    pub fn new(components: Vec<MultiPoly>) -> Result<MultiPolyMap> {
        let k = components.len();
        if k == 0 || components.iter().any(|p| p.nvars() != k) {
            return Err(Error::InvalidInput(
                "a map of C^k needs k components in k variables".into(),
            ));
        }
        Ok(MultiPolyMap { components })
    }

    pub fn identity(dim: usize) -> MultiPolyMap {
        MultiPolyMap {
            components: (0..dim).map(|i| MultiPoly::var(dim, i)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[MultiPoly] {
        &self.components
    }

    /// Algebraic degree: the largest component degree.
    pub fn degree(&self) -> u32 {
        self.components
            .iter()
            .map(MultiPoly::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn monomial_count(&self) -> usize {
        self.components.iter().map(MultiPoly::len).sum()
    }

    pub fn eval(&self, x: &[C64]) -> Vec<C64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    pub fn add(&self, other: &MultiPolyMap) -> MultiPolyMap {
        MultiPolyMap {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> MultiPolyMap {
        MultiPolyMap {
            components: self.components.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(MultiPoly::is_empty)
    }
}

/// `F ∘ G`, expanded exactly in sparse form.
pub fn compose(f: &MultiPolyMap, g: &MultiPolyMap) -> Result<MultiPolyMap> {
    compose_capped(f, g, DEFAULT_MONOMIAL_CAP)
}

pub fn compose_capped(f: &MultiPolyMap, g: &MultiPolyMap, cap: usize) -> Result<MultiPolyMap> {
    let k = f.dim();
    if g.dim() != k {
        return Err(Error::InvalidInput(
            "composition of maps of different dimensions".into(),
        ));
    }
    // powers[j][e] = G_j^e
    let mut powers: Vec<Vec<MultiPoly>> = Vec::with_capacity(k);
    for j in 0..k {
        let top = f
            .components
            .iter()
            .flat_map(|p| p.terms.keys().map(move |e| e[j]))
            .max()
            .unwrap_or(0);
        let mut list = vec![MultiPoly::constant(k, C64::new(1.0, 0.0))];
        for e in 1..=top as usize {
            let next = list[e - 1].mul(&g.components[j], cap)?;
            list.push(next);
        }
        powers.push(list);
    }
    let mut out = Vec::with_capacity(k);
    for p in &f.components {
        let mut acc = MultiPoly::zero(k);
        for (e, c) in p.terms() {
            let mut term = MultiPoly::constant(k, c);
            for (j, &ej) in e.iter().enumerate() {
                if ej > 0 {
                    term = term.mul(&powers[j][ej as usize], cap)?;
                }
            }
            for (te, tc) in term.terms {
                acc.add_term(te, tc);
            }
            if acc.len() > cap {
                return Err(Error::CapExceeded {
                    what: "monomial count",
                    cap,
                });
            }
        }
        acc.prune();
        out.push(acc);
    }
    MultiPolyMap::new(out)
}

/// `F^1, ..., F^n`, stopping early (with `truncated`) at the monomial cap.
#[derive(Clone, Debug)]
pub struct Iterates {
    pub maps: Vec<MultiPolyMap>,
    pub truncated: bool,
}

pub fn iterates(f: &MultiPolyMap, n: usize, cap: usize) -> Iterates {
    let mut maps: Vec<MultiPolyMap> = Vec::with_capacity(n);
    if n == 0 {
        return Iterates {
            maps,
            truncated: false,
        };
    }
    maps.push(f.clone());
    for _ in 1..n {
        match compose_capped(f, maps.last().unwrap(), cap) {
            Ok(m) => maps.push(m),
            Err(_) => {
                return Iterates {
                    maps,
                    truncated: true,
                }
            }
        }
    }
    Iterates {
        maps,
        truncated: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeGrowth {
    pub degrees: Vec<u32>,
    /// True when the cap stopped the list before `n_max`.
    pub truncated: bool,
}

pub fn degree_growth(f: &MultiPolyMap, n_max: usize) -> DegreeGrowth {
    degree_growth_capped(f, n_max, DEFAULT_MONOMIAL_CAP)
}

pub fn degree_growth_capped(f: &MultiPolyMap, n_max: usize, cap: usize) -> DegreeGrowth {
    let it = iterates(f, n_max, cap);
    DegreeGrowth {
        degrees: it.maps.iter().map(MultiPolyMap::degree).collect(),
        truncated: it.truncated,
    }
}

/// Geometric growth rate `(deg_n / deg_1)^{1/(n-1)}` of a degree list.
pub fn fitted_rate(degrees: &[u32]) -> f64 {
    match degrees {
        [] | [_] => 1.0,
        [first, .., last] => (*last as f64 / *first as f64).powf(1.0 / (degrees.len() - 1) as f64),
    }
}

fn is_bounded(degrees: &[u32]) -> bool {
    let n = degrees.len();
    n >= 3 && degrees[n - 1] == degrees[n - 2] && degrees[n - 2] == degrees[n - 3]
}

fn is_geometric(degrees: &[u32]) -> bool {
    degrees.len() >= 3
        && degrees
            .windows(2)
            .skip(1)
            .all(|w| w[1] as f64 >= 1.5 * w[0] as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Finiteness {
    /// `Σ a_i F^i = 0`; `coefficients[0]` multiplies `F^0` when the
    /// identity is included, `F^1` otherwise.
    LocallyFinite {
        coefficients: Vec<C64>,
        includes_identity: bool,
    },
    DegreeGrowth {
        rate: f64,
    },
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    pub degrees: Vec<u32>,
    pub verdict: Finiteness,
    /// Largest coefficient of `Σ a_i F^i` relative to the largest
    /// coefficient among the summands.
    pub residual: Option<f64>,
}

/// Flattens the maps into coefficient columns over their union support.
fn coefficient_matrix(maps: &[&MultiPolyMap]) -> DMatrix<C64> {
    let mut rows: HashMap<(usize, Vec<u32>), usize> = HashMap::new();
    let mut keys: Vec<(usize, Vec<u32>)> = Vec::new();
    for m in maps {
        for (i, p) in m.components.iter().enumerate() {
            for (e, _) in p.terms() {
                rows.entry((i, e.clone())).or_insert_with(|| {
                    keys.push((i, e));
                    keys.len() - 1
                });
            }
        }
    }
    let nrows = keys.len().max(maps.len());
    let mut mat = DMatrix::<C64>::zeros(nrows, maps.len());
    for (col, m) in maps.iter().enumerate() {
        for (i, p) in m.components.iter().enumerate() {
            for (e, c) in p.terms() {
                mat[(rows[&(i, e)], col)] = c;
            }
        }
    }
    mat
}

/// Residual of `Σ a_i maps[i]` relative to its summands; `None` if the
/// maps have different dimensions.
pub fn relation_residual(maps: &[&MultiPolyMap], coefficients: &[C64]) -> f64 {
    let dim = maps[0].dim();
    let mut total = MultiPolyMap {
        components: vec![MultiPoly::zero(dim); dim],
    };
    let mut scale: f64 = 0.0;
    for (m, &a) in maps.iter().zip(coefficients) {
        let term = m.scale(a);
        scale = scale.max(
            term.components
                .iter()
                .map(MultiPoly::max_abs)
                .fold(0.0, f64::max),
        );
        for (acc, t) in total.components.iter_mut().zip(&term.components) {
            for (e, c) in &t.terms {
                acc.add_term(e.clone(), *c);
            }
        }
    }
    let worst = total
        .components
        .iter()
        .map(MultiPoly::max_abs)
        .fold(0.0, f64::max);
    if scale == 0.0 {
        f64::INFINITY
    } else {
        worst / scale
    }
}

/// Smallest `D <= d_max` with a nontrivial relation among the iterates,
/// found as a numerical kernel vector and accepted only after exact
/// recomposition.
pub fn locally_finite_relation(
    f: &MultiPolyMap,
    d_max: usize,
    include_identity: bool,
) -> Result<FinitenessReport> {
    if d_max == 0 {
        return Err(Error::InvalidInput("d_max must be positive".into()));
    }
    let it = iterates(f, d_max.max(3), DEFAULT_MONOMIAL_CAP);
    let degrees: Vec<u32> = it.maps.iter().map(MultiPolyMap::degree).collect();
    if is_geometric(&degrees) {
        return Ok(FinitenessReport {
            verdict: Finiteness::DegreeGrowth {
                rate: fitted_rate(&degrees),
            },
            degrees,
            residual: None,
        });
    }
    let identity = MultiPolyMap::identity(f.dim());
    let mut last_residual = None;
    for dd in 1..=d_max.min(it.maps.len()) {
        let mut cols: Vec<&MultiPolyMap> = Vec::new();
        if include_identity {
            cols.push(&identity);
        }
        cols.extend(it.maps[..dd].iter());
        if cols.len() < 2 && !include_identity {
            // a single nonzero map has no relation with itself
            if !cols[0].is_zero() {
                continue;
            }
        }
        let mut mat = coefficient_matrix(&cols);
        let mut scales = Vec::with_capacity(cols.len());
        for mut col in mat.column_iter_mut() {
            let n = col.norm();
            let s = if n > 0.0 { n } else { 1.0 };
            col /= C64::new(s, 0.0);
            scales.push(s);
        }
        let svd = mat.svd(false, true);
        let sv = &svd.singular_values;
        let top = sv.iter().copied().fold(0.0, f64::max);
        let (imin, smin) = sv
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |b, (i, s)| if s < b.1 { (i, s) } else { b },
            );
        if smin > 1e-8 * top {
            continue;
        }
        let vt = svd.v_t.as_ref().unwrap();
        let mut coeffs: Vec<C64> = (0..cols.len())
            .map(|j| vt[(imin, j)].conj() / scales[j])
            .collect();
        let pivot = coeffs
            .iter()
            .copied()
            .find(|c| c.norm() > 1e-12 * coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max));
        let Some(pivot) = pivot else { continue };
        for c in coeffs.iter_mut() {
            *c /= pivot;
        }
        // prefer exact small integers when they verify
        let rounded: Vec<C64> = coeffs
            .iter()
            .map(|c| C64::new(c.re.round(), c.im.round()))
            .collect();
        let near_integer = coeffs
            .iter()
            .zip(&rounded)
            .all(|(a, b)| (a - b).norm() < 1e-6);
        let candidates = if near_integer {
            vec![rounded, coeffs]
        } else {
            vec![coeffs]
        };
        for cand in candidates {
            let residual = relation_residual(&cols, &cand);
            last_residual = Some(residual);
            if residual <= RELATION_TOL {
                return Ok(FinitenessReport {
                    degrees,
                    verdict: Finiteness::LocallyFinite {
                        coefficients: cand,
                        includes_identity: include_identity,
                    },
                    residual: Some(residual),
                });
            }
        }
    }
    Ok(FinitenessReport {
        degrees,
        verdict: Finiteness::Undetermined,
        residual: last_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C2Class {
    Affine,
    ElementaryLike,
    HenonLike,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2Classification {
    pub class: C2Class,
    pub degrees: Vec<u32>,
    pub rate: f64,
    /// Whether the map admits a global time average (`None` if undecided).
    pub global_average: Option<bool>,
    /// Result of checking `F∘G = G∘F = id` for a supplied inverse.
    pub inverse_verified: Option<bool>,
}

fn is_identity_map(m: &MultiPolyMap) -> bool {
    let id = MultiPolyMap::identity(m.dim());
    relation_residual(&[m, &id], &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]) <= RELATION_TOL
}

/// Affine / elementary-like / Hénon-like split of a map of C² by the growth
/// of `deg F^n` for `n <= 8`.
pub fn classify_c2(f: &MultiPolyMap, inverse: Option<&MultiPolyMap>) -> Result<C2Classification> {
    if f.dim() != 2 {
        return Err(Error::InvalidInput("classify_c2 needs a map of C^2".into()));
    }
    let inverse_verified = match inverse {
        Some(g) => Some(is_identity_map(&compose(f, g)?) && is_identity_map(&compose(g, f)?)),
        None => None,
    };
    let mut degrees = vec![f.degree()];
    let mut current = f.clone();
    while degrees.len() < 8 {
        // four geometric steps settle the Hénon case early
        if degrees.len() >= 5 && is_geometric(&degrees) {
            break;
        }
        match compose(f, &current) {
            Ok(next) => {
                degrees.push(next.degree());
                current = next;
            }
            Err(_) => break,
        }
    }
    let rate = fitted_rate(&degrees);
    let class = if f.degree() <= 1 {
        C2Class::Affine
    } else if is_bounded(&degrees) {
        C2Class::ElementaryLike
    } else if is_geometric(&degrees) {
        C2Class::HenonLike
    } else {
        C2Class::Undetermined
    };
    let global_average = match class {
        C2Class::Affine | C2Class::ElementaryLike => Some(true),
        C2Class::HenonLike => Some(false),
        C2Class::Undetermined => None,
    };
    Ok(C2Classification {
        class,
        degrees,
        rate,
        global_average,
        inverse_verified,
    })
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitWitness {
    pub start: Vec<C64>,
    /// `‖F^n(start)‖` for `n = 0, 1, ...`.
    pub norms: Vec<f64>,
    /// Fitted `r` with `log ‖F^n‖ >= n log r - c`.
    pub rate: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeWitnesses {
    /// Forward orbit escaping geometrically.
    pub forward: Option<OrbitWitness>,
    /// Forward orbit bounded over the budget, backward orbit escaping.
    pub backward: Option<OrbitWitness>,
    pub forward_of_backward_max: Option<f64>,
}

const ESCAPE_NORM: f64 = 1e12;

fn orbit_norms(f: &MultiPolyMap, start: &[C64], budget: usize, stop: f64) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut norms = vec![norm(&x)];
    for _ in 0..budget {
        x = f.eval(&x);
        let n = norm(&x);
        if !n.is_finite() {
            break;
        }
        norms.push(n);
        if n > stop {
            break;
        }
    }
    norms
}

/// Least-squares slope of `log ‖F^n‖` against `n` over the escaping tail
/// (the monotone run above radius 2), with the offset that makes
/// `n log r - c` a lower bound on the whole orbit.
fn fit_growth(norms: &[f64]) -> (f64, f64) {
    let logs: Vec<f64> = norms.iter().map(|v| v.max(1e-300).ln()).collect();
    let mut tail = logs.len().saturating_sub(1);
    while tail > 0 && norms[tail - 1] >= 2.0 && norms[tail - 1] < norms[tail] {
        tail -= 1;
    }
    if logs.len() - tail < 2 {
        tail = 0;
    }
    let pts: Vec<(f64, f64)> = (tail..logs.len()).map(|n| (n as f64, logs[n])).collect();
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = if m >= 2.0 {
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    } else {
        0.0
    };
    let offset = logs
        .iter()
        .enumerate()
        .map(|(n, l)| n as f64 * slope - l)
        .fold(f64::NEG_INFINITY, f64::max);
    (slope.exp(), offset)
}

fn escapes(norms: &[f64]) -> bool {
    norms.len() >= 4 && *norms.last().unwrap() > ESCAPE_NORM
}

/// A point escaping forward and a point with bounded forward orbit whose
/// backward orbit escapes; the second is found by bisecting rays from the
/// origin toward the boundary of the forward escaping set.
pub fn henon_escape_witnesses(
    f: &MultiPolyMap,
    inverse: &MultiPolyMap,
    budget: usize,
    seed: u64,
) -> Result<EscapeWitnesses> {
    let class = classify_c2(f, Some(inverse))?;
    if class.class != C2Class::HenonLike {
        return Err(Error::Precondition(format!(
            "map is {:?}, not Hénon-like",
            class.class
        )));
    }
    if class.inverse_verified != Some(true) {
        return Err(Error::Precondition(
            "supplied inverse does not invert the map".into(),
        ));
    }
    let mut out = EscapeWitnesses {
        forward: None,
        backward: None,
        forward_of_backward_max: None,
    };
    for r in [3.0, 5.0, 10.0, 100.0] {
        let start = vec![C64::new(r, 0.0), C64::new(0.0, 0.0)];
        let norms = orbit_norms(f, &start, budget, ESCAPE_NORM);
        if escapes(&norms) {
            let (rate, offset) = fit_growth(&norms);
            out.forward = Some(OrbitWitness {
                start,
                norms,
                rate,
                offset,
            });
            break;
        }
    }

    let bounded_steps = budget.min(40);
    let bound = 10.0;
    let forward_bounded = |x: &[C64]| {
        let n = orbit_norms(f, x, bounded_steps, bound);
        n.len() == bounded_steps + 1 && n.iter().all(|&v| v <= bound)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let dir: Vec<C64> = (0..2)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let at = |t: f64| -> Vec<C64> { dir.iter().map(|d| d * t).collect() };
        let (mut lo, mut hi) = (0.0, 4.0);
        if !forward_bounded(&at(lo)) || forward_bounded(&at(hi)) {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if forward_bounded(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let start = at(lo);
        let back = orbit_norms(inverse, &start, budget, ESCAPE_NORM);
        if !escapes(&back) {
            continue;
        }
        let fwd = orbit_norms(f, &start, bounded_steps, f64::INFINITY);
        let (rate, offset) = fit_growth(&back);
        out.forward_of_backward_max = Some(fwd.iter().copied().fold(0.0, f64::max));
        out.backward = Some(OrbitWitness {
            start,
            norms: back,
            rate,
            offset,
        });
        break;
    }
    Ok(out)
}

/// Standard fixtures used by tests and the command line.
pub mod fixtures {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn poly(nvars: usize, terms: &[(&[u32], f64)]) -> MultiPoly {
        MultiPoly::from_terms(nvars, terms.iter().map(|(e, v)| (e.to_vec(), c(*v)))).unwrap()
    }

    /// `(z, w) -> (w + z^2, z)`.
    pub fn henon() -> MultiPolyMap {
        MultiPolyMap::new(vec![
            poly(2, &[(&[0, 1], 1.0), (&[2, 0], 1.0)]),
            poly(2, &[(&[1, 0], 1.0)]),
        ])
        .unwrap()
    }

    /// `(z, w) -> (w, z - w^2)`, the inverse of [`henon`].
    pub fn henon_inverse() -> MultiPolyMap {
        MultiPolyMap::new(vec![
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[1, 0], 1.0), (&[0, 2], -1.0)]),
        ])
        .unwrap()
    }

    /// `(z, w) -> (w + z^3 + 1, z)`.
    pub fn henon_cubic() -> MultiPolyMap {
        MultiPolyMap::new(vec![
            poly(2, &[(&[0, 1], 1.0), (&[3, 0], 1.0), (&[0, 0], 1.0)]),
            poly(2, &[(&[1, 0], 1.0)]),
        ])
        .unwrap()
    }

    /// `(z, w) -> (z, w + z^3)`.
    pub fn elementary() -> MultiPolyMap {
        MultiPolyMap::new(vec![
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 1], 1.0), (&[3, 0], 1.0)]),
        ])
        .unwrap()
    }

    /// `(z, w) -> (2z + 5, w + z^2)`.
    pub fn elementary_affine_base() -> MultiPolyMap {
        MultiPolyMap::new(vec![
            poly(2, &[(&[1, 0], 2.0), (&[0, 0], 5.0)]),
            poly(2, &[(&[0, 1], 1.0), (&[2, 0], 1.0)]),
        ])
        .unwrap()
    }

    /// Rotation of C² by angles 1 and sqrt(2) radians.
    pub fn linear_rotation() -> MultiPolyMap {
        let a = C64::from_polar(1.0, 1.0);
        let b = C64::from_polar(1.0, 2f64.sqrt());
        MultiPolyMap::new(vec![
            MultiPoly::from_terms(2, [(vec![1, 0], a)]).unwrap(),
            MultiPoly::from_terms(2, [(vec![0, 1], b)]).unwrap(),
        ])
        .unwrap()
    }

    pub fn by_name(name: &str) -> Option<MultiPolyMap> {
        Some(match name {
            "henon" => henon(),
            "henon-inverse" => henon_inverse(),
            "henon-cubic" => henon_cubic(),
            "elementary" => elementary(),
            "elementary-affine" => elementary_affine_base(),
            "rotation" => linear_rotation(),
            "nagata" => nagata(),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &[
        "henon",
        "henon-inverse",
        "henon-cubic",
        "elementary",
        "elementary-affine",
        "rotation",
        "nagata",
    ];

    /// The Nagata automorphism `(x + Δz, y + 2Δx + Δ²z, z)` with
    /// `Δ = x² - yz`.
    pub fn nagata() -> MultiPolyMap {
        let x = MultiPoly::var(3, 0);
        let y = MultiPoly::var(3, 1);
        let z = MultiPoly::var(3, 2);
        let cap = DEFAULT_MONOMIAL_CAP;
        let delta = x
            .mul(&x, cap)
            .unwrap()
            .add(&y.mul(&z, cap).unwrap().scale(c(-1.0)));
        let dz = delta.mul(&z, cap).unwrap();
        let first = x.add(&dz);
        let second = y
            .add(&delta.mul(&x, cap).unwrap().scale(c(2.0)))
            .add(&delta.mul(&dz, cap).unwrap());
        MultiPolyMap::new(vec![first, second, z]).unwrap()
    }
}
