//! One-variable complex polynomials: evaluation, composition, roots,
//! critical data and level-by-level preimage fibers.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative threshold below which trailing coefficients are dropped.
pub const NORMALIZE_REL: f64 = 1e-12;
/// Largest degree `iterate` will expand to by default.
pub const DEFAULT_DEGREE_CAP: usize = 4096;

const ROOT_MAX_ITER: usize = 800;
const ROOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ComplexPoly {
    coeffs: Vec<C64>,
}

impl TryFrom<Vec<[f64; 2]>> for ComplexPoly {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        ComplexPoly::new(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl From<ComplexPoly> for Vec<[f64; 2]> {
    fn from(p: ComplexPoly) -> Self {
        p.coeffs.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl ComplexPoly {
    /// Builds a polynomial from ascending coefficients, stripping trailing
    /// terms below `NORMALIZE_REL * max|coeff|`.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidInput(
                "non-finite polynomial coefficient".into(),
            ));
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::InvalidInput("zero polynomial".into()));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= NORMALIZE_REL * scale {
            coeffs.pop();
        }
        Ok(ComplexPoly { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// The polynomial z.
    pub fn identity() -> Self {
        ComplexPoly {
            coeffs: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    }

    pub fn constant(c: C64) -> Self {
        ComplexPoly { coeffs: vec![c] }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            coeffs = next;
        }
        ComplexPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative in a single Horner pass.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let zero = C64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Value of the n-th iterate and its derivative (chain rule, no expansion).
    pub fn eval_iterate(&self, z: C64, n: usize) -> (C64, C64) {
        let mut w = z;
        let mut der = C64::new(1.0, 0.0);
        for _ in 0..n {
            let (v, dv) = self.eval_with_derivative(w);
            der *= dv;
            w = v;
        }
        (w, der)
    }

    pub fn derivative(&self) -> ComplexPoly {
        if self.coeffs.len() == 1 {
            return ComplexPoly::constant(C64::new(0.0, 0.0));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        ComplexPoly { coeffs }
    }

    /// Sum; a trailing coefficient is dropped when it is below
    /// `NORMALIZE_REL` times the summands it came from (cancellation noise).
    pub fn add(&self, other: &ComplexPoly) -> ComplexPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let term = |p: &ComplexPoly, i: usize| p.coeffs.get(i).copied().unwrap_or_default();
        let mut coeffs: Vec<C64> = (0..n).map(|i| term(self, i) + term(other, i)).collect();
        while coeffs.len() > 1 {
            let i = coeffs.len() - 1;
            let scale = term(self, i).norm() + term(other, i).norm();
            if coeffs[i].norm() <= NORMALIZE_REL * scale {
                coeffs.pop();
            } else {
                break;
            }
        }
        ComplexPoly { coeffs }
    }

    pub fn scale(&self, s: C64) -> ComplexPoly {
        ComplexPoly {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn mul(&self, other: &ComplexPoly) -> ComplexPoly {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() == 0.0 {
            coeffs.pop();
        }
        ComplexPoly { coeffs }
    }

    /// `self ∘ inner`, expanded by Horner's scheme over polynomials.
    pub fn compose(&self, inner: &ComplexPoly) -> ComplexPoly {
        let mut acc = ComplexPoly::constant(self.leading());
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(inner).add(&ComplexPoly::constant(c));
        }
        acc
    }

    /// Coefficients of `f^n`; `f^0` is `z`.
    pub fn iterate(&self, n: usize) -> Result<ComplexPoly> {
        self.iterate_capped(n, DEFAULT_DEGREE_CAP)
    }

    pub fn iterate_capped(&self, n: usize, cap: usize) -> Result<ComplexPoly> {
        let d = self.degree();
        let mut deg: usize = 1;
        for _ in 0..n {
            deg = deg
                .checked_mul(d)
                .filter(|&v| v <= cap)
                .ok_or(Error::CapExceeded {
                    what: "iterate degree",
                    cap,
                })?;
        }
        let mut acc = ComplexPoly::identity();
        for _ in 0..n {
            acc = self.compose(&acc);
        }
        Ok(acc)
    }

    /// Cauchy bound: every root has modulus at most `1 + max|a_i / a_d|`.
    pub fn cauchy_bound(&self) -> f64 {
        let lead = self.leading().norm();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max)
    }

    /// Fujiwara bound `2 max |a_{d-k}/a_d|^{1/k}`, much tighter than the
    /// Cauchy bound for high-degree iterates.
    pub fn fujiwara_bound(&self) -> f64 {
        let d = self.degree();
        let lead = self.leading().norm();
        (1..=d)
            .map(|k| {
                let c = self.coeffs[d - k].norm() / lead;
                let c = if k == d { c / 2.0 } else { c };
                c.powf(1.0 / k as f64)
            })
            .fold(0.0, f64::max)
            * 2.0
    }

    /// `p(z) / p'(z)` and the relative backward error `|p(z)| / Σ|a_i| r^i`
    /// with `r = max(1, |z|)`;
    /// for `|z| > 1` both come from the reversed polynomial in `1/z`, which
    /// cannot overflow.
    fn newton_ratio(&self, z: C64) -> (C64, f64) {
        let zero = C64::new(0.0, 0.0);
        if z.norm() <= 1.0 {
            let (p, dp) = self.eval_with_derivative(z);
            if p.norm() == 0.0 {
                return (zero, 0.0);
            }
            let scale: f64 = self.coeffs.iter().map(|c| c.norm()).sum();
            return (p / dp, p.norm() / scale);
        }
        let w = C64::new(1.0, 0.0) / z;
        let r = w.norm();
        let (mut q, mut dq, mut scale) = (zero, zero, 0.0);
        for &c in &self.coeffs {
            dq = dq * w + q;
            q = q * w + c;
            scale = scale * r + c.norm();
        }
        if q.norm() == 0.0 {
            return (zero, 0.0);
        }
        // p(z) = z^d q(w), p'(z) = z^{d-1} (d q(w) - w q'(w))
        let d = self.degree() as f64;
        (z * q / (q * d - w * dq), q.norm() / scale)
    }

    /// All roots with multiplicity (Aberth–Ehrlich iteration, Newton polish).
    pub fn roots(&self) -> Result<Vec<C64>> {
        let d = self.degree();
        if d == 0 {
            return Err(Error::InvalidInput("roots of a constant polynomial".into()));
        }
        let lead = self.leading();
        if d == 1 {
            return Ok(vec![-self.coeffs[0] / lead]);
        }
        let monic = self.scale(C64::new(1.0, 0.0) / lead);
        let radius = monic.fujiwara_bound().min(monic.cauchy_bound()).max(1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_a6e7);
        let offset: f64 = rng.gen_range(0.0..1.0);
        let mut z: Vec<C64> = (0..d)
            .map(|k| {
                let jitter: f64 = rng.gen_range(-0.1..0.1);
                let theta = std::f64::consts::TAU * (k as f64 + offset + jitter) / d as f64;
                C64::from_polar(radius * (1.0 + 0.01 * jitter), theta)
            })
            .collect();

        let mut converged = vec![false; d];
        for _ in 0..ROOT_MAX_ITER {
            let mut all = true;
            for k in 0..d {
                if converged[k] {
                    continue;
                }
                let (ratio, backward) = monic.newton_ratio(z[k]);
                if backward <= f64::EPSILON {
                    converged[k] = true;
                    continue;
                }
                let repulsion: C64 = (0..d)
                    .filter(|&j| j != k)
                    .map(|j| C64::new(1.0, 0.0) / (z[k] - z[j]))
                    .sum();
                let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
                let step = if step.is_finite() { step } else { ratio };
                z[k] -= step;
                if step.norm() <= 1e-15 * z[k].norm().max(1e-300) {
                    converged[k] = true;
                } else {
                    all = false;
                }
            }
            if all {
                break;
            }
        }

        for r in z.iter_mut() {
            for _ in 0..3 {
                let (ratio, backward) = monic.newton_ratio(*r);
                let cand = *r - ratio;
                if cand.is_finite() && monic.newton_ratio(cand).1 < backward {
                    *r = cand;
                } else {
                    break;
                }
            }
        }

        let worst = z
            .iter()
            .map(|&r| monic.newton_ratio(r).1)
            .fold(0.0, |a: f64, b| {
                if a.is_nan() || b.is_nan() {
                    f64::NAN
                } else {
                    a.max(b)
                }
            });
        if z.iter().any(|r| !r.is_finite()) || !worst.is_finite() || worst > ROOT_TOL {
            return Err(Error::RootsNoConvergence {
                iterations: ROOT_MAX_ITER,
                residual: worst,
            });
        }
        Ok(z)
    }
}

impl fmt::Display for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.norm() == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Deduplication tolerance for critical values.
pub fn dedup_tol(v: C64) -> f64 {
    1e-8 * (1.0 + v.norm())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: C64,
    /// Number of (critical point of f, k) pairs with f^k(c) = value, counted
    /// with the multiplicity of c as a root of f'.
    pub multiplicity: usize,
    /// Smallest k >= 1 with f^k(c) = value for some critical point c.
    pub first_level: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalData {
    pub level: usize,
    /// Roots of f', with multiplicity, deduplicated.
    pub base_critical_points: Vec<C64>,
    /// Roots of (f^n)', i.e. all w with f^k(w) a critical point of f, k < n.
    pub critical_points: Vec<C64>,
    pub critical_values: Vec<CriticalValue>,
    pub max_cardinality: bool,
}

impl CriticalData {
    pub fn values(&self) -> Vec<C64> {
        self.critical_values.iter().map(|v| v.value).collect()
    }
}

fn push_dedup(list: &mut Vec<(C64, usize)>, v: C64) -> usize {
    if let Some(pos) = list
        .iter()
        .position(|(w, _)| (*w - v).norm() <= dedup_tol(v))
    {
        list[pos].1 += 1;
        pos
    } else {
        list.push((v, 1));
        list.len() - 1
    }
}

pub fn critical_data(f: &ComplexPoly, n: usize) -> Result<CriticalData> {
    let d = f.degree();
    if d < 2 {
        return Err(Error::InvalidInput(
            "critical data needs degree >= 2".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput(
            "critical data level must be >= 1".into(),
        ));
    }
    let raw = f.derivative().roots()?;
    let mut crit: Vec<(C64, usize)> = Vec::new();
    for c in raw {
        push_dedup(&mut crit, c);
    }
    // values with first level and multiplicity
    let mut values: Vec<(C64, usize)> = Vec::new();
    let mut first_level: Vec<usize> = Vec::new();
    for &(c, mult) in &crit {
        let mut w = c;
        for k in 1..=n {
            w = f.eval(w);
            let before = values.len();
            let pos = push_dedup(&mut values, w);
            if values.len() > before {
                first_level.push(k);
                values[pos].1 = mult;
            } else {
                values[pos].1 += mult - 1;
                first_level[pos] = first_level[pos].min(k);
            }
        }
    }
    let mut pulled: Vec<C64> = Vec::new();
    for &(c, _) in &crit {
        let mut layer = vec![c];
        pulled.push(c);
        for _ in 1..n {
            let mut next = Vec::new();
            for t in layer {
                let g = f.add(&ComplexPoly::constant(-t));
                next.extend(g.roots()?);
            }
            pulled.extend(next.iter().copied());
            layer = next;
        }
    }
    let max_cardinality = values.len() == n * (d - 1);
    Ok(CriticalData {
        level: n,
        base_critical_points: crit.iter().map(|(c, _)| *c).collect(),
        critical_points: pulled,
        critical_values: values
            .into_iter()
            .zip(first_level)
            .map(|((value, multiplicity), first_level)| CriticalValue {
                value,
                multiplicity,
                first_level,
            })
            .collect(),
        max_cardinality,
    })
}

/// Residual tolerance used for fibers over `p`.
pub fn fiber_tol(p: C64) -> f64 {
    1e-9 * p.norm().max(1.0)
}

/// Preimage levels `f^{-k}(p)`, `k = 0..=n`; the children of node `j` at
/// level `k - 1` are the entries `j*d .. (j+1)*d` of level `k`.
pub fn preimage_levels(f: &ComplexPoly, p: C64, n: usize) -> Result<Vec<Vec<C64>>> {
    let mut levels = vec![vec![p]];
    for k in 1..=n {
        let prev = &levels[k - 1];
        let mut next = Vec::with_capacity(prev.len() * f.degree());
        for &t in prev {
            let g = f.add(&ComplexPoly::constant(-t));
            let mut children = g.roots()?;
            for w in children.iter_mut() {
                *w = polish_preimage(f, *w, p, k);
            }
            next.extend(children);
        }
        levels.push(next);
    }
    Ok(levels)
}

fn polish_preimage(f: &ComplexPoly, w: C64, p: C64, n: usize) -> C64 {
    let mut w = w;
    for _ in 0..4 {
        let (v, dv) = f.eval_iterate(w, n);
        let r = v - p;
        if r.norm() == 0.0 || dv.norm() == 0.0 {
            break;
        }
        let cand = w - r / dv;
        if cand.is_finite() && (f.eval_iterate(cand, n).0 - p).norm() < r.norm() {
            w = cand;
        } else {
            break;
        }
    }
    w
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fiber {
    pub level: usize,
    pub base: C64,
    pub points: Vec<C64>,
    pub separation: f64,
    pub max_residual: f64,
    pub simple: bool,
}

impl Fiber {
    pub fn from_points(f: &ComplexPoly, base: C64, level: usize, points: Vec<C64>) -> Fiber {
        let separation = min_separation(&points);
        let max_residual = points
            .iter()
            .map(|&w| (f.eval_iterate(w, level).0 - base).norm())
            .fold(0.0, f64::max);
        // |(f^N)'(w)| * separation bounds the distance of `base` from the
        // critical values of f^N from below, up to a constant.
        let conditioning = points
            .iter()
            .map(|&w| f.eval_iterate(w, level).1.norm())
            .fold(f64::INFINITY, f64::min);
        let simple = separation > 10.0 * fiber_tol(base)
            && max_residual <= fiber_tol(base)
            && conditioning * separation > 20.0 * fiber_tol(base);
        Fiber {
            level,
            base,
            points,
            separation,
            max_residual,
            simple,
        }
    }
}

pub fn min_separation(points: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}

/// The level-`n` fiber over `p`; errors if it is not simple.
pub fn fiber(f: &ComplexPoly, p: C64, n: usize) -> Result<Fiber> {
    if n == 0 {
        return Err(Error::InvalidInput("fiber level must be >= 1".into()));
    }
    let levels = preimage_levels(f, p, n)?;
    let fib = Fiber::from_points(f, p, n, levels.into_iter().last().unwrap());
    if !fib.simple {
        return Err(Error::NonSimpleFiber {
            base: [p.re, p.im],
            separation: fib.separation,
        });
    }
    Ok(fib)
}

/// Named polynomials shared by tests and the command line.
pub mod fixtures {
    use std::f64::consts::TAU;

    use super::*;

    /// Golden mean rotation number `(sqrt(5) - 1) / 2`.
    pub fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    pub fn z2p1() -> ComplexPoly {
        ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap()
    }

    /// `z^2 - 1`.
    pub fn basilica() -> ComplexPoly {
        ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap()
    }

    pub fn z2m07() -> ComplexPoly {
        ComplexPoly::from_real(&[-0.7, 0.0, 1.0]).unwrap()
    }

    /// `z^4 - 2z^2`.
    pub fn quartic() -> ComplexPoly {
        ComplexPoly::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0]).unwrap()
    }

    /// `z^2 + e^{2 pi i theta} z` with golden `theta`.
    pub fn siegel_quadratic() -> ComplexPoly {
        ComplexPoly::new(vec![
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, TAU * golden()),
            C64::new(1.0, 0.0),
        ])
        .unwrap()
    }

    /// Monic polynomial of degree `d` with lower coefficients uniform in
    /// the square `[-1, 1]^2`.
    pub fn random_monic(d: usize, seed: u64) -> ComplexPoly {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs: Vec<C64> = (0..d)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        coeffs.push(C64::new(1.0, 0.0));
        ComplexPoly::new(coeffs).unwrap()
    }

    /// `e^{2πiθ} z` with the golden θ.
    pub fn golden_rotation() -> ComplexPoly {
        ComplexPoly::new(vec![
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, std::f64::consts::TAU * golden()),
        ])
        .unwrap()
    }

    /// Looks up a fixture by name; `random-cubic` uses `seed`.
    pub fn by_name(name: &str, seed: u64) -> Option<ComplexPoly> {
        Some(match name {
            "z2p1" => z2p1(),
            "basilica" => basilica(),
            "z2m07" => z2m07(),
            "quartic" => quartic(),
            "siegel" => siegel_quadratic(),
            "golden-rotation" => golden_rotation(),
            "random-cubic" => random_monic(3, seed),
            "random-quadratic" => random_monic(2, seed),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &[
        "z2p1",
        "basilica",
        "z2m07",
        "quartic",
        "siegel",
        "golden-rotation",
        "random-cubic",
        "random-quadratic",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn contains(set: &[C64], z: C64, tol: f64) -> bool {
        set.iter().any(|w| (*w - z).norm() < tol)
    }

    #[test]
    fn eval_examples() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.eval(c(0.0, 0.0)), c(1.0, 0.0));
        assert!(f.eval(c(0.0, 1.0)).norm() < 1e-15);
        // 2z^2(z-2)^2 = 2z^4 - 8z^3 + 8z^2
        let g = ComplexPoly::from_real(&[0.0, 0.0, 8.0, -8.0, 2.0]).unwrap();
        assert_eq!(g.eval(c(1.0, 0.0)), c(2.0, 0.0));
    }

    #[test]
    fn normalization_strips_noise() {
        let p = ComplexPoly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(1e-14, 0.0)]).unwrap();
        assert_eq!(p.degree(), 1);
        assert!(ComplexPoly::new(vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn iterate_examples() {
        let f = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let f2 = f.iterate(2).unwrap();
        let want = [0.0, 0.0, -2.0, 0.0, 1.0];
        assert_eq!(f2.degree(), 4);
        for (a, b) in f2.coeffs().iter().zip(want) {
            assert!((a - c(b, 0.0)).norm() < 1e-14);
        }
        assert_eq!(f.iterate(0).unwrap(), ComplexPoly::identity());
        let sq = ComplexPoly::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let s3 = sq.iterate(3).unwrap();
        assert_eq!(s3.degree(), 8);
        assert!((s3.leading() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(s3.coeffs()[..8].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn iterate_cap() {
        let f = ComplexPoly::from_real(&[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            f.iterate_capped(5, 16),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn roots_examples() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let r = f.roots().unwrap();
        assert!(contains(&r, c(0.0, 1.0), 1e-12) && contains(&r, c(0.0, -1.0), 1e-12));

        let sq = ComplexPoly::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let r = sq.roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|z| z.norm() < 1e-7));

        let q = ComplexPoly::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
        let r = q.roots().unwrap();
        let s2 = 2f64.sqrt();
        assert!(contains(&r, c(s2, 0.0), 1e-10) && contains(&r, c(-s2, 0.0), 1e-10));
        assert_eq!(r.iter().filter(|z| z.norm() < 1e-6).count(), 2);
    }

    #[test]
    fn critical_examples() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let cd = critical_data(&f, 2).unwrap();
        let v = cd.values();
        assert_eq!(v.len(), 2);
        assert!(contains(&v, c(1.0, 0.0), 1e-12) && contains(&v, c(2.0, 0.0), 1e-12));
        assert!(cd.max_cardinality);
        // (f^2)' = 4z(z^2+1): roots 0, i, -i
        assert_eq!(cd.critical_points.len(), 3);

        let g = ComplexPoly::from_real(&[0.0, 0.0, 8.0, -8.0, 2.0]).unwrap();
        let cd = critical_data(&g, 1).unwrap();
        let pts = &cd.base_critical_points;
        assert_eq!(pts.len(), 3);
        for z in [0.0, 1.0, 2.0] {
            assert!(contains(pts, c(z, 0.0), 1e-9));
        }

        let b = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let cd = critical_data(&b, 3).unwrap();
        let v = cd.values();
        assert_eq!(v.len(), 2);
        assert!(contains(&v, c(-1.0, 0.0), 1e-12) && contains(&v, c(0.0, 0.0), 1e-12));
        assert!(!cd.max_cardinality);
    }

    #[test]
    fn fiber_examples() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let fb = fiber(&f, c(0.0, 0.0), 1).unwrap();
        assert!(contains(&fb.points, c(0.0, 1.0), 1e-12));
        assert!(contains(&fb.points, c(0.0, -1.0), 1e-12));

        let sq = ComplexPoly::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let fb = fiber(&sq, c(1.0, 0.0), 2).unwrap();
        for z in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
            assert!(contains(&fb.points, z, 1e-12));
        }

        // square roots of i - 1 and -i - 1, computed independently
        let fb = fiber(&f, c(0.0, 0.0), 2).unwrap();
        for t in [c(-1.0, 1.0), c(-1.0, -1.0)] {
            let s = t.sqrt();
            assert!(contains(&fb.points, s, 1e-12));
            assert!(contains(&fb.points, -s, 1e-12));
        }
    }

    #[test]
    fn tree_layout_parent_links() {
        let f = ComplexPoly::from_real(&[0.3, -0.2, 1.0, 0.5]).unwrap();
        let levels = preimage_levels(&f, c(0.7, 0.2), 3).unwrap();
        for k in 1..levels.len() {
            assert_eq!(levels[k].len(), 3usize.pow(k as u32));
            for (i, &w) in levels[k].iter().enumerate() {
                assert!((f.eval(w) - levels[k - 1][i / 3]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn non_simple_fiber_rejected() {
        let f = ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            fiber(&f, c(1.0, 0.0), 1),
            Err(Error::NonSimpleFiber { .. })
        ));
    }
}
