//! Permutation groups on `{0, .., n-1}`: stabilizer chains, transitivity,
//! minimal blocks of imprimitivity, chain closures and tree automorphisms.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A permutation stored as its image array: `self.apply(i) == images[i]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Perm(Vec<u32>);

impl TryFrom<Vec<usize>> for Perm {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Perm::from_images(images)
    }
}

impl From<Perm> for Vec<usize> {
    fn from(p: Perm) -> Self {
        p.images()
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            write!(f, "(")?;
            for (k, x) in c.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl Perm {
    pub fn identity(n: usize) -> Perm {
        Perm((0..n as u32).collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Perm> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || seen[x] {
                return Err(Error::InvalidInput(format!("not a bijection on 0..{n}")));
            }
            seen[x] = true;
        }
        Ok(Perm(images.into_iter().map(|x| x as u32).collect()))
    }

    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Perm> {
        let mut images: Vec<usize> = (0..n).collect();
        for c in cycles {
            for (k, &x) in c.iter().enumerate() {
                if x >= n {
                    return Err(Error::InvalidInput(format!("cycle point {x} out of range")));
                }
                images[x] = c[(k + 1) % c.len()];
            }
        }
        Perm::from_images(images)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn images(&self) -> Vec<usize> {
        self.0.iter().map(|&x| x as usize).collect()
    }

    /// `self` first, then `other`.
    pub fn then(&self, other: &Perm) -> Perm {
        Perm(self.0.iter().map(|&x| other.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x as usize] = i as u32;
        }
        Perm(inv)
    }

    pub fn pow(&self, k: usize) -> Perm {
        (0..k).fold(Perm::identity(self.degree()), |acc, _| acc.then(self))
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i as u32 == x)
    }

    /// Nontrivial cycles, each starting at its smallest point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut c = vec![start];
            seen[start] = true;
            let mut x = self.apply(start);
            while x != start {
                seen[x] = true;
                c.push(x);
                x = self.apply(x);
            }
            if c.len() > 1 {
                out.push(c);
            }
        }
        out
    }

    /// Cycle lengths including fixed points, sorted descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut lens: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        let moved: usize = lens.iter().sum();
        lens.extend(std::iter::repeat(1).take(self.degree() - moved));
        lens.sort_unstable_by(|a, b| b.cmp(a));
        lens
    }

    pub fn is_full_cycle(&self) -> bool {
        let n = self.degree();
        n > 0 && self.cycle_type() == vec![n]
    }

    pub fn image_of_set(&self, set: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().map(|&x| self.apply(x)).collect();
        out.sort_unstable();
        out
    }
}

/// The induced action on level `k` of a `d`-ary tree whose level-`n` leaves
/// are indexed so that the ancestor of leaf `i` at level `k` is
/// `i / d^(n-k)`. `None` if the permutation does not respect the tree.
pub fn restrict_to_level(perm: &Perm, d: usize, n: usize, k: usize) -> Option<Perm> {
    if k > n || perm.degree() != d.pow(n as u32) {
        return None;
    }
    let block = d.pow((n - k) as u32);
    let m = d.pow(k as u32);
    let mut images = vec![usize::MAX; m];
    for i in 0..perm.degree() {
        let a = i / block;
        let b = perm.apply(i) / block;
        if images[a] == usize::MAX {
            images[a] = b;
        } else if images[a] != b {
            return None;
        }
    }
    Perm::from_images(images).ok()
}

pub fn tree_compatible(perm: &Perm, d: usize, n: usize) -> bool {
    (1..n).all(|k| restrict_to_level(perm, d, n, k).is_some())
}

/// `(d!)^((d^n - 1)/(d - 1))`, the order of the automorphism group of the
/// depth-`n` `d`-ary rooted tree.
pub fn tree_aut_order(d: usize, n: usize) -> BigUint {
    let fact: BigUint = (1..=d)
        .map(BigUint::from)
        .fold(BigUint::one(), |a, b| a * b);
    let internal: usize = (0..n).map(|k| d.pow(k as u32)).sum();
    num_traits::pow(fact, internal)
}

#[derive(Clone, Debug)]
struct Level {
    base: usize,
    gens: Vec<Perm>,
    transversal: Vec<Option<Perm>>,
}

impl Level {
    fn new(base: usize, n: usize) -> Level {
        let mut transversal = vec![None; n];
        transversal[base] = Some(Perm::identity(n));
        Level {
            base,
            gens: Vec::new(),
            transversal,
        }
    }

    fn rebuild_orbit(&mut self) {
        let n = self.transversal.len();
        let mut queue: VecDeque<usize> =
            (0..n).filter(|&x| self.transversal[x].is_some()).collect();
        while let Some(x) = queue.pop_front() {
            let ux = self.transversal[x].clone().unwrap();
            for g in &self.gens {
                let y = g.apply(x);
                if self.transversal[y].is_none() {
                    self.transversal[y] = Some(ux.then(g));
                    queue.push_back(y);
                }
            }
        }
    }

    fn orbit(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.transversal.len()).filter(move |&x| self.transversal[x].is_some())
    }
}

/// Base and strong generating set built by the deterministic Schreier–Sims
/// algorithm.
#[derive(Clone, Debug)]
pub struct StabChain {
    levels: Vec<Level>,
    degree: usize,
}

impl StabChain {
    pub fn new(degree: usize, gens: &[Perm]) -> StabChain {
        let mut chain = StabChain {
            levels: Vec::new(),
            degree,
        };
        for g in gens {
            if !g.is_identity() {
                chain.add_strong(0, g.clone());
            }
        }
        loop {
            let mut pending = None;
            'outer: for i in (0..chain.levels.len()).rev() {
                let lvl = &chain.levels[i];
                for x in lvl.orbit() {
                    let ux = lvl.transversal[x].as_ref().unwrap();
                    for s in &lvl.gens {
                        let y = s.apply(x);
                        let uy = lvl.transversal[y].as_ref().unwrap();
                        let schreier = ux.then(s).then(&uy.inverse());
                        let (res, _) = chain.sift(i + 1, schreier);
                        if !res.is_identity() {
                            pending = Some((i + 1, res));
                            break 'outer;
                        }
                    }
                }
            }
            match pending {
                Some((from, res)) => chain.add_strong(from, res),
                None => break,
            }
        }
        chain
    }

    /// Adds `g` (which fixes the base points before level `from`) to every
    /// level it belongs to, creating a new level if `g` fixes all base points.
    fn add_strong(&mut self, from: usize, g: Perm) {
        let mut k = from;
        loop {
            if k == self.levels.len() {
                let moved = (0..self.degree)
                    .find(|&x| g.apply(x) != x)
                    .expect("non-identity");
                self.levels.push(Level::new(moved, self.degree));
            }
            self.levels[k].gens.push(g.clone());
            self.levels[k].rebuild_orbit();
            if g.apply(self.levels[k].base) != self.levels[k].base {
                break;
            }
            k += 1;
        }
    }

    fn sift(&self, start: usize, g: Perm) -> (Perm, usize) {
        let mut g = g;
        for k in start..self.levels.len() {
            let lvl = &self.levels[k];
            let x = g.apply(lvl.base);
            match &lvl.transversal[x] {
                Some(u) => g = g.then(&u.inverse()),
                None => return (g, k),
            }
        }
        (g, self.levels.len())
    }

    pub fn base(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.base).collect()
    }

    pub fn orbit_lengths(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.orbit().count()).collect()
    }

    pub fn order(&self) -> BigUint {
        self.orbit_lengths()
            .into_iter()
            .map(BigUint::from)
            .fold(BigUint::one(), |a, b| a * b)
    }

    pub fn contains(&self, g: &Perm) -> bool {
        g.degree() == self.degree && self.sift(0, g.clone()).0.is_identity()
    }
}

#[derive(Debug)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Perm>,
    chain: OnceLock<StabChain>,
}

impl Clone for PermGroup {
    fn clone(&self) -> Self {
        PermGroup {
            degree: self.degree,
            generators: self.generators.clone(),
            chain: OnceLock::new(),
        }
    }
}

impl PermGroup {
    pub fn new(degree: usize, generators: Vec<Perm>) -> Result<PermGroup> {
        if let Some(g) = generators.iter().find(|g| g.degree() != degree) {
            return Err(Error::InvalidInput(format!(
                "generator of degree {} in a group of degree {degree}",
                g.degree()
            )));
        }
        Ok(PermGroup {
            degree,
            generators,
            chain: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    pub fn chain(&self) -> &StabChain {
        self.chain
            .get_or_init(|| StabChain::new(self.degree, &self.generators))
    }

    pub fn order(&self) -> BigUint {
        self.chain().order()
    }

    pub fn contains(&self, g: &Perm) -> bool {
        self.chain().contains(g)
    }

    pub fn orbit(&self, point: usize) -> Vec<usize> {
        let mut seen = vec![false; self.degree];
        seen[point] = true;
        let mut queue = VecDeque::from([point]);
        let mut out = vec![point];
        while let Some(x) = queue.pop_front() {
            for g in &self.generators {
                let y = g.apply(x);
                if !seen[y] {
                    seen[y] = true;
                    out.push(y);
                    queue.push_back(y);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_transitive(&self) -> bool {
        self.degree <= 1 || self.orbit(0).len() == self.degree
    }

    /// Group elements with their shortlex-least generator words, stopping
    /// after `cap` elements. The flag is true when the group was exhausted.
    pub fn enumerate(&self, cap: usize) -> (Vec<(Vec<usize>, Perm)>, bool) {
        let id = Perm::identity(self.degree);
        let mut seen: HashSet<Perm> = HashSet::from([id.clone()]);
        let mut out = vec![(Vec::new(), id)];
        let mut head = 0;
        while head < out.len() {
            for (i, g) in self.generators.iter().enumerate() {
                let next = out[head].1.then(g);
                if seen.insert(next.clone()) {
                    if out.len() >= cap {
                        return (out, false);
                    }
                    let mut word = out[head].0.clone();
                    word.push(i);
                    out.push((word, next));
                }
            }
            head += 1;
        }
        (out, true)
    }
}

/// Evaluates a generator word left to right.
pub fn word_to_perm(generators: &[Perm], word: &[usize], degree: usize) -> Perm {
    word.iter()
        .fold(Perm::identity(degree), |acc, &i| acc.then(&generators[i]))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns the pair of old roots when a merge happened.
    fn union(&mut self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        Some((lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub points: Vec<usize>,
    pub system: Vec<Vec<usize>>,
}

impl Block {
    /// Exact check against the generators: every generator maps every class
    /// of the system onto a class.
    pub fn verify(&self, generators: &[Perm]) -> bool {
        let n: usize = self.system.iter().map(Vec::len).sum();
        let mut class_of = vec![usize::MAX; n];
        for (c, cls) in self.system.iter().enumerate() {
            for &x in cls {
                if x >= n || class_of[x] != usize::MAX {
                    return false;
                }
                class_of[x] = c;
            }
        }
        if !self.system.iter().any(|cls| *cls == self.points) {
            return false;
        }
        generators.iter().all(|g| {
            self.system.iter().all(|cls| {
                let target = class_of[g.apply(cls[0])];
                cls.iter().all(|&x| class_of[g.apply(x)] == target)
            })
        })
    }
}

/// The smallest block containing `seed`, by union-find closure of the pairs
/// `{seed[0], s}` under the generators.
pub fn minimal_block(group: &PermGroup, seed: &[usize]) -> Result<Block> {
    let n = group.degree();
    if seed.is_empty() || seed.iter().any(|&x| x >= n) {
        return Err(Error::InvalidInput(
            "seed must be a nonempty subset of the domain".into(),
        ));
    }
    let mut uf = UnionFind::new(n);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for &s in &seed[1..] {
        if let Some(pair) = uf.union(seed[0], s) {
            queue.push_back(pair);
        }
    }
    while let Some((a, b)) = queue.pop_front() {
        for g in group.generators() {
            if let Some(pair) = uf.union(g.apply(a), g.apply(b)) {
                queue.push_back(pair);
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        let r = uf.find(x);
        classes[r].push(x);
    }
    let root = uf.find(seed[0]);
    let points = classes[root].clone();
    let system: Vec<Vec<usize>> = classes.into_iter().filter(|c| !c.is_empty()).collect();
    Ok(Block { points, system })
}

/// One step `S_j = σ_j(S_{j-1}) ∪ S_{j-1}` of a chain closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub word: Vec<usize>,
    pub perm: Perm,
    pub added: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainClosure {
    pub start: Vec<usize>,
    pub set: Vec<usize>,
    pub steps: Vec<ChainStep>,
    /// True when `steps` replays from `start` all the way to `set`.
    pub witness_complete: bool,
    /// True when the element enumeration hit its cap and `set` came from
    /// [`minimal_block`].
    pub used_block_fallback: bool,
}

impl ChainClosure {
    /// Replays the witness chain: each step must meet the current set and
    /// contribute exactly `added`.
    pub fn replay(&self, generators: &[Perm], degree: usize) -> bool {
        let mut cur: Vec<bool> = vec![false; degree];
        for &x in &self.start {
            cur[x] = true;
        }
        for step in &self.steps {
            if word_to_perm(generators, &step.word, degree) != step.perm {
                return false;
            }
            let members: Vec<usize> = (0..degree).filter(|&x| cur[x]).collect();
            let img = step.perm.image_of_set(&members);
            if !img.iter().any(|&y| cur[y]) {
                return false;
            }
            let added: Vec<usize> = img.iter().copied().filter(|&y| !cur[y]).collect();
            if added.is_empty() || added != step.added {
                return false;
            }
            for y in added {
                cur[y] = true;
            }
        }
        let end: Vec<usize> = (0..degree).filter(|&x| cur[x]).collect();
        !self.witness_complete || end == self.set
    }
}

pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

/// Grows `s0` by `σ(T) ∪ T` whenever `σ(T) ∩ T ≠ ∅`, always choosing the
/// shortlex-least applicable group element.
pub fn chain_closure(group: &PermGroup, s0: &[usize], cap: usize) -> Result<ChainClosure> {
    let n = group.degree();
    if s0.is_empty() || s0.iter().any(|&x| x >= n) {
        return Err(Error::InvalidInput(
            "S0 must be a nonempty subset of the domain".into(),
        ));
    }
    let mut start = s0.to_vec();
    start.sort_unstable();
    start.dedup();
    let (elements, exhausted) = group.enumerate(cap);
    let mut cur = vec![false; n];
    for &x in &start {
        cur[x] = true;
    }
    let mut steps = Vec::new();
    'grow: loop {
        let members: Vec<usize> = (0..n).filter(|&x| cur[x]).collect();
        for (word, perm) in &elements {
            let img = perm.image_of_set(&members);
            if img.iter().any(|&y| cur[y]) {
                let added: Vec<usize> = img.iter().copied().filter(|&y| !cur[y]).collect();
                if !added.is_empty() {
                    for &y in &added {
                        cur[y] = true;
                    }
                    steps.push(ChainStep {
                        word: word.clone(),
                        perm: perm.clone(),
                        added,
                    });
                    continue 'grow;
                }
            }
        }
        break;
    }
    let reached: Vec<usize> = (0..n).filter(|&x| cur[x]).collect();
    if exhausted {
        return Ok(ChainClosure {
            start,
            set: reached,
            steps,
            witness_complete: true,
            used_block_fallback: false,
        });
    }
    let block = minimal_block(group, &start)?;
    let complete = block.points == reached;
    Ok(ChainClosure {
        start,
        set: block.points,
        steps,
        witness_complete: complete,
        used_block_fallback: !complete,
    })
}

/// True iff the group is the whole automorphism group of the depth-`n`
/// `d`-ary tree; errors if a generator does not respect the tree.
pub fn is_full_tree_aut(group: &PermGroup, d: usize, n: usize) -> Result<bool> {
    if group.degree() != d.pow(n as u32) {
        return Err(Error::InvalidInput("group degree is not d^N".into()));
    }
    if let Some(i) = group
        .generators()
        .iter()
        .position(|g| !tree_compatible(g, d, n))
    {
        return Err(Error::InvalidInput(format!(
            "generator {i} does not respect the tree"
        )));
    }
    Ok(group.order() == tree_aut_order(d, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(n: usize, cycles: &[&[usize]]) -> Perm {
        Perm::from_cycles(n, cycles).unwrap()
    }

    #[test]
    fn orders() {
        let g = PermGroup::new(2, vec![perm(2, &[&[0, 1]])]).unwrap();
        assert_eq!(g.order(), BigUint::from(2u32));
        let s4 = PermGroup::new(4, vec![perm(4, &[&[0, 1]]), perm(4, &[&[0, 1, 2, 3]])]).unwrap();
        assert_eq!(s4.order(), BigUint::from(24u32));
        let trivial = PermGroup::new(5, vec![]).unwrap();
        assert_eq!(trivial.order(), BigUint::one());
    }

    #[test]
    fn transitivity() {
        let g = PermGroup::new(4, vec![perm(4, &[&[0, 1]])]).unwrap();
        assert!(!g.is_transitive());
        let c = PermGroup::new(4, vec![perm(4, &[&[0, 1, 2, 3]])]).unwrap();
        assert!(c.is_transitive());
    }

    #[test]
    fn klein_block() {
        let g = PermGroup::new(
            4,
            vec![perm(4, &[&[0, 1], &[2, 3]]), perm(4, &[&[0, 2], &[1, 3]])],
        )
        .unwrap();
        let b = minimal_block(&g, &[0, 1]).unwrap();
        assert_eq!(b.points, vec![0, 1]);
        assert!(b.verify(g.generators()));
    }

    #[test]
    fn s4_is_primitive() {
        let s4 = PermGroup::new(4, vec![perm(4, &[&[0, 1]]), perm(4, &[&[0, 1, 2, 3]])]).unwrap();
        let b = minimal_block(&s4, &[0, 1]).unwrap();
        assert_eq!(b.points, vec![0, 1, 2, 3]);
        let cc = chain_closure(&s4, &[0, 1], DEFAULT_CLOSURE_CAP).unwrap();
        assert_eq!(cc.set, vec![0, 1, 2, 3]);
        assert_eq!(cc.steps.len(), 2);
        assert!(cc.replay(s4.generators(), 4));
    }

    #[test]
    fn closure_stays_put_under_double_transposition() {
        let g = PermGroup::new(4, vec![perm(4, &[&[0, 1], &[2, 3]])]).unwrap();
        let cc = chain_closure(&g, &[0, 1], DEFAULT_CLOSURE_CAP).unwrap();
        assert_eq!(cc.set, vec![0, 1]);
        assert!(cc.steps.is_empty());
    }

    #[test]
    fn tree_restriction() {
        // swap the two level-1 subtrees of a binary depth-2 tree
        let g = Perm::from_images(vec![2, 3, 0, 1]).unwrap();
        assert!(tree_compatible(&g, 2, 2));
        assert_eq!(
            restrict_to_level(&g, 2, 2, 1).unwrap(),
            Perm::from_images(vec![1, 0]).unwrap()
        );
        let bad = perm(4, &[&[1, 2]]);
        assert!(!tree_compatible(&bad, 2, 2));
        let grp = PermGroup::new(4, vec![bad]).unwrap();
        assert!(is_full_tree_aut(&grp, 2, 2).is_err());
    }

    #[test]
    fn tree_aut_orders() {
        assert_eq!(tree_aut_order(2, 2), BigUint::from(8u32));
        assert_eq!(tree_aut_order(3, 2), BigUint::from(1296u32));
        assert_eq!(tree_aut_order(2, 3), BigUint::from(128u32));
        // (3!)^13 does not fit in 32 bits of headroom, check it exactly
        assert_eq!(
            tree_aut_order(3, 3),
            num_traits::pow(BigUint::from(6u32), 13)
        );
    }

    #[test]
    fn full_binary_tree_group() {
        // root swap and a swap below the left child generate Aut(T_2)
        let a = Perm::from_images(vec![2, 3, 0, 1]).unwrap();
        let b = perm(4, &[&[0, 1]]);
        let g = PermGroup::new(4, vec![a, b]).unwrap();
        assert!(is_full_tree_aut(&g, 2, 2).unwrap());
    }

    #[test]
    fn cycle_type_and_display() {
        let p = perm(5, &[&[0, 3], &[1, 2, 4]]);
        assert_eq!(p.cycle_type(), vec![3, 2]);
        assert_eq!(format!("{p:?}"), "(0 3)(1 2 4)");
        assert!(perm(3, &[&[0, 1, 2]]).is_full_cycle());
        assert!(Perm::from_images(vec![0, 0]).is_err());
    }
}
