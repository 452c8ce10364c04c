//! Compiled navigating-net core.
//!
//! Mirrors `dynkcenter/_pynet.py` step for step: same descent, same insert
//! placement, same ghost-and-promote deletion, same furthest-point loop.
//! Distances use the same operation order, so both cores build identical
//! structures and return identical answers.

use std::collections::{BTreeMap, BTreeSet};

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyTuple;
use rustc_hash::{FxHashMap, FxHashSet};

type Id = i64;
type Lists = FxHashMap<i32, FxHashSet<Id>>;

/// 2^e as a double, exact over the whole representable range.
fn ldexp1(e: i32) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// Exponent of `frexp`: smallest e with 2^e > d for d > 0, and 0 for d == 0.
fn exp_above(d: f64) -> i32 {
    if d == 0.0 {
        return 0;
    }
    let bits = d.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        let m = bits & ((1u64 << 52) - 1);
        return (64 - m.leading_zeros() as i32) - 1074;
    }
    raw - 1022
}

#[derive(Clone)]
enum Loc {
    V(Vec<f64>),
    I(usize),
}

enum Metric {
    Euclid,
    Matrix { n: usize, m: Vec<f64> },
}

impl Metric {
    #[inline]
    fn dist(&self, a: &Loc, b: &Loc) -> f64 {
        match (self, a, b) {
            (Metric::Euclid, Loc::V(x), Loc::V(y)) => {
                let mut s = 0.0f64;
                for (p, q) in x.iter().zip(y.iter()) {
                    let t = p - q;
                    s += t * t;
                }
                s.sqrt()
            }
            (Metric::Matrix { n, m }, Loc::I(i), Loc::I(j)) => m[i * n + j],
            _ => f64::NAN,
        }
    }
}

struct Node {
    loc: Loc,
    top: i32,
    others: Lists,
    rev: Lists,
}

fn dec(counter: &mut BTreeMap<i32, usize>, key: i32) {
    if let Some(c) = counter.get_mut(&key) {
        *c -= 1;
        if *c == 0 {
            counter.remove(&key);
        }
    }
}

fn inc(counter: &mut BTreeMap<i32, usize>, key: i32) {
    *counter.entry(key).or_insert(0) += 1;
}

type Levels = Vec<(i32, Vec<(Id, f64)>)>;

#[pyclass(module = "dynkcenter._core")]
pub struct NetCore {
    #[pyo3(get)]
    kind: String,
    #[pyo3(get)]
    gamma: f64,
    dim: usize,
    metric: Metric,
    nodes: FxHashMap<Id, Node>,
    nontriv: BTreeMap<i32, usize>,
    topcount: BTreeMap<i32, usize>,
    root: Option<Id>,
    emax: i32,
}

fn key_err(pid: Id) -> PyErr {
    PyKeyError::new_err(pid)
}

impl NetCore {
    fn clear(&mut self) {
        self.nodes.clear();
        self.nontriv.clear();
        self.topcount.clear();
        self.root = None;
        self.emax = 0;
    }

    fn node(&self, pid: Id) -> PyResult<&Node> {
        self.nodes.get(&pid).ok_or_else(|| key_err(pid))
    }

    fn to_loc(&self, obj: &Bound<'_, PyAny>) -> PyResult<Loc> {
        match self.metric {
            Metric::Euclid => {
                let v: Vec<f64> = obj.extract()?;
                if v.len() != self.dim {
                    return Err(PyValueError::new_err(format!(
                        "expected {} coordinates, got {}",
                        self.dim,
                        v.len()
                    )));
                }
                Ok(Loc::V(v))
            }
            Metric::Matrix { n, .. } => {
                let i: usize = obj.extract()?;
                if i >= n {
                    return Err(PyValueError::new_err(format!("row {i} out of range")));
                }
                Ok(Loc::I(i))
            }
        }
    }

    #[inline]
    fn d_ids(&self, a: Id, b: Id) -> f64 {
        self.metric.dist(&self.nodes[&a].loc, &self.nodes[&b].loc)
    }

    #[inline]
    fn in_level(&self, pid: Id, level: i32) -> bool {
        Some(pid) == self.root || self.nodes[&pid].top >= level
    }

    fn e_min_value(&self) -> i32 {
        match self.nontriv.keys().next() {
            Some(&lo) => lo - 1,
            None => self.emax,
        }
    }

    fn link(&mut self, owner: Id, level: i32, member: Id) {
        let per = &mut self.nodes.get_mut(&owner).unwrap().others;
        match per.get_mut(&level) {
            Some(s) => {
                s.insert(member);
            }
            None => {
                let mut s = FxHashSet::default();
                s.insert(member);
                per.insert(level, s);
                inc(&mut self.nontriv, level);
            }
        }
        self.nodes
            .get_mut(&member)
            .unwrap()
            .rev
            .entry(level)
            .or_default()
            .insert(owner);
    }

    fn unlink(&mut self, owner: Id, level: i32, member: Id) {
        let per = &mut self.nodes.get_mut(&owner).unwrap().others;
        let empty = match per.get_mut(&level) {
            Some(s) => {
                s.remove(&member);
                s.is_empty()
            }
            None => return,
        };
        if empty {
            per.remove(&level);
            dec(&mut self.nontriv, level);
        }
    }

    fn descend(&self, loc: &Loc, lo: Option<i32>, min_top: Option<i32>, extra: &[Id]) -> Levels {
        let g = self.gamma;
        let root = self.root.unwrap();
        let mut cache: FxHashMap<Id, f64> = FxHashMap::default();
        let d_root = self.metric.dist(loc, &self.nodes[&root].loc);
        cache.insert(root, d_root);
        let mut j = self.emax.max(exp_above(d_root));
        if let Some(mt) = min_top {
            if mt > j {
                j = mt;
            }
        }
        let mut out: Levels = Vec::new();
        let mut w: Vec<(Id, f64)> = if d_root <= g * ldexp1(j + 1) {
            vec![(root, d_root)]
        } else {
            Vec::new()
        };
        let mut level = j;
        loop {
            let reach = (g + 1.0) * ldexp1(level);
            let a: Vec<Id> = w.iter().filter(|(_, d)| *d <= reach).map(|(y, _)| *y).collect();
            out.push((level, std::mem::take(&mut w)));
            if let Some(l) = lo {
                if level <= l {
                    break;
                }
            }
            if a.is_empty() && extra.is_empty() && lo.is_none() {
                break;
            }
            let mut cand: FxHashSet<Id> = FxHashSet::default();
            for y in &a {
                cand.insert(*y);
                if let Some(per) = self.nodes[y].others.get(&level) {
                    cand.extend(per.iter().copied());
                }
            }
            for &u in extra {
                if self.in_level(u, level - 1) {
                    cand.insert(u);
                }
            }
            let radius = g * ldexp1(level);
            let mut wn = Vec::new();
            for z in cand {
                let d = match cache.get(&z) {
                    Some(&d) => d,
                    None => {
                        let d = self.metric.dist(loc, &self.nodes[&z].loc);
                        cache.insert(z, d);
                        d
                    }
                };
                if d <= radius {
                    wn.push((z, d));
                }
            }
            level -= 1;
            w = wn;
            if lo.is_none() && (w.is_empty() || w.iter().any(|(_, d)| *d == 0.0)) {
                // a coincident point would keep w non-empty forever
                if !w.is_empty() {
                    out.push((level, std::mem::take(&mut w)));
                }
                break;
            }
        }
        out
    }

    fn normalize_top(&mut self) {
        let root = self.root.unwrap();
        self.emax = match self.topcount.keys().next_back() {
            Some(&t) => t + 1,
            None => self.nodes[&root].top,
        };
        self.nodes.get_mut(&root).unwrap().top = self.emax;
    }

    fn promote(&mut self, x: Id, j: i32, extra: &[Id]) {
        let xloc = self.nodes[&x].loc.clone();
        let levels = self.descend(&xloc, Some(j - 1), Some(j + 1), extra);
        let gr = self.gamma * ldexp1(j + 1);
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (level, w) in &levels {
            if *level == j + 1 {
                up.extend(w.iter().filter(|(y, d)| *y != x && *d <= gr).map(|(y, _)| *y));
            } else if *level == j - 1 {
                down.extend(w.iter().filter(|(z, _)| *z != x).map(|(z, _)| *z));
            }
        }
        for y in up {
            self.link(y, j + 1, x);
        }
        for z in down {
            self.link(x, j, z);
        }
        dec(&mut self.topcount, j - 1);
        inc(&mut self.topcount, j);
        self.nodes.get_mut(&x).unwrap().top = j;
        if j + 1 > self.emax {
            self.emax = j + 1;
            let root = self.root.unwrap();
            self.nodes.get_mut(&root).unwrap().top = self.emax;
        }
    }

    fn remove_ghost(&mut self, pid: Id) {
        let node = self.nodes.remove(&pid).unwrap();
        for (level, members) in &node.others {
            for z in members {
                if let Some(zn) = self.nodes.get_mut(z) {
                    let empty = match zn.rev.get_mut(level) {
                        Some(s) => {
                            s.remove(&pid);
                            s.is_empty()
                        }
                        None => false,
                    };
                    if empty {
                        zn.rev.remove(level);
                    }
                }
            }
            dec(&mut self.nontriv, *level);
        }
        for (level, owners) in &node.rev {
            for y in owners {
                if self.nodes.contains_key(y) {
                    self.unlink(*y, *level, pid);
                }
            }
        }
        if Some(pid) != self.root {
            dec(&mut self.topcount, node.top);
        }
    }

    fn dq(&self, y: Id, query: &[Loc]) -> f64 {
        let ly = &self.nodes[&y].loc;
        let mut best = f64::INFINITY;
        for c in query {
            let d = self.metric.dist(ly, c);
            if d < best {
                best = d;
            }
        }
        best
    }
}

type AfnResult = (Id, f64, i32, i32, Vec<usize>, Option<Vec<Vec<Id>>>, usize);

#[pymethods]
impl NetCore {
    #[new]
    #[pyo3(signature = (kind, dim=0, matrix=None, gamma=4.0))]
    fn new(kind: &str, dim: usize, matrix: Option<Vec<Vec<f64>>>, gamma: f64) -> PyResult<Self> {
        if !(gamma >= 4.0) {
            return Err(PyValueError::new_err(format!("gamma must be >= 4, got {gamma}")));
        }
        let metric = match kind {
            "euclidean-l2" => Metric::Euclid,
            "explicit-matrix" => {
                let rows = matrix.ok_or_else(|| PyValueError::new_err("matrix required"))?;
                let n = rows.len();
                let mut m = Vec::with_capacity(n * n);
                for r in &rows {
                    if r.len() != n {
                        return Err(PyValueError::new_err("matrix is not square"));
                    }
                    m.extend_from_slice(r);
                }
                Metric::Matrix { n, m }
            }
            _ => return Err(PyValueError::new_err(format!("unknown metric kind '{kind}'"))),
        };
        Ok(NetCore {
            kind: kind.to_string(),
            gamma,
            dim,
            metric,
            nodes: FxHashMap::default(),
            nontriv: BTreeMap::new(),
            topcount: BTreeMap::new(),
            root: None,
            emax: 0,
        })
    }

    fn _clear(&mut self) {
        self.clear();
    }

    fn __len__(&self) -> usize {
        self.nodes.len()
    }

    fn __contains__(&self, pid: &Bound<'_, PyAny>) -> bool {
        match pid.extract::<Id>() {
            Ok(p) => self.nodes.contains_key(&p),
            Err(_) => false,
        }
    }

    fn ids(&self) -> Vec<Id> {
        let mut v: Vec<Id> = self.nodes.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn location<'py>(&self, py: Python<'py>, pid: Id) -> PyResult<Bound<'py, PyAny>> {
        match &self.node(pid)?.loc {
            Loc::V(v) => Ok(PyTuple::new(py, v.iter().copied())?.into_any()),
            Loc::I(i) => Ok((*i).into_pyobject(py)?.into_any()),
        }
    }

    fn top(&self, pid: Id) -> PyResult<i32> {
        Ok(self.node(pid)?.top)
    }

    #[getter]
    fn root(&self) -> Option<Id> {
        self.root
    }

    #[getter]
    fn e_max(&self) -> i32 {
        self.emax
    }

    #[getter]
    fn e_min(&self) -> i32 {
        self.e_min_value()
    }

    fn others(&self, pid: Id, level: i32) -> PyResult<Vec<Id>> {
        let mut v: Vec<Id> = match self.node(pid)?.others.get(&level) {
            Some(s) => s.iter().copied().collect(),
            None => Vec::new(),
        };
        v.sort_unstable();
        Ok(v)
    }

    fn owners(&self, pid: Id, level: i32) -> PyResult<Vec<Id>> {
        let mut v: Vec<Id> = match self.node(pid)?.rev.get(&level) {
            Some(s) => s.iter().copied().collect(),
            None => Vec::new(),
        };
        v.sort_unstable();
        Ok(v)
    }

    fn stored_lists(&self) -> Vec<(Id, i32, Vec<Id>)> {
        let mut out = Vec::new();
        for (y, n) in &self.nodes {
            for (level, s) in &n.others {
                let mut m: Vec<Id> = s.iter().copied().collect();
                m.sort_unstable();
                out.push((*y, *level, m));
            }
        }
        out.sort();
        out
    }

    fn stored_owners(&self) -> Vec<(Id, i32, Vec<Id>)> {
        let mut out = Vec::new();
        for (z, n) in &self.nodes {
            for (level, s) in &n.rev {
                if !s.is_empty() {
                    let mut m: Vec<Id> = s.iter().copied().collect();
                    m.sort_unstable();
                    out.push((*z, *level, m));
                }
            }
        }
        out.sort();
        out
    }

    /// Drop one list entry without repair (fault injection for tests).
    fn debug_unlink(&mut self, owner: Id, level: i32, member: Id) -> PyResult<()> {
        self.node(owner)?;
        self.node(member)?;
        self.unlink(owner, level, member);
        let rev = &mut self.nodes.get_mut(&member).unwrap().rev;
        let empty = match rev.get_mut(&level) {
            Some(s) => {
                s.remove(&owner);
                s.is_empty()
            }
            None => false,
        };
        if empty {
            rev.remove(&level);
        }
        Ok(())
    }

    fn dist(&self, a: Id, b: Id) -> PyResult<f64> {
        Ok(self.metric.dist(&self.node(a)?.loc, &self.node(b)?.loc))
    }

    fn insert(&mut self, pid: Id, loc: &Bound<'_, PyAny>) -> PyResult<()> {
        if self.nodes.contains_key(&pid) {
            return Err(PyKeyError::new_err(format!("point id {pid} already present")));
        }
        let loc = self.to_loc(loc)?;
        let fresh = |loc: Loc, top: i32| Node {
            loc,
            top,
            others: FxHashMap::default(),
            rev: FxHashMap::default(),
        };
        if self.root.is_none() {
            self.nodes.insert(pid, fresh(loc, 0));
            self.root = Some(pid);
            self.emax = 0;
            return Ok(());
        }
        let levels = self.descend(&loc, None, None, &[]);
        let mut lowest_fail: Option<i32> = None;
        for (level, w) in &levels {
            if w.is_empty() {
                continue;
            }
            let near = w.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
            if near == 0.0 {
                let y = w.iter().filter(|(_, d)| *d == 0.0).map(|(y, _)| *y).min().unwrap();
                return Err(PyValueError::new_err(format!(
                    "duplicate location: coincides with point {y}"
                )));
            }
            if near < ldexp1(*level) {
                lowest_fail = Some(*level);
            }
        }
        let t = lowest_fail.ok_or_else(|| PyRuntimeError::new_err("descent found no level"))? - 1;
        let g = self.gamma;
        self.nodes.insert(pid, fresh(loc, t));
        inc(&mut self.topcount, t);
        for (level, w) in &levels {
            if *level <= t + 1 {
                let gr = g * ldexp1(*level);
                for (y, d) in w {
                    if *d <= gr {
                        self.link(*y, *level, pid);
                    }
                }
            }
            if level + 1 <= t {
                for (z, _) in w {
                    self.link(pid, level + 1, *z);
                }
            }
        }
        self.normalize_top();
        Ok(())
    }

    fn delete(&mut self, pid: Id) -> PyResult<()> {
        if !self.nodes.contains_key(&pid) {
            return Err(PyKeyError::new_err(format!("unknown point id {pid}")));
        }
        if self.nodes.len() == 1 {
            self.clear();
            return Ok(());
        }
        let root = self.root.unwrap();
        let is_root = pid == root;
        let mut cand: BTreeMap<i32, BTreeSet<Id>> = BTreeMap::new();
        {
            let p = &self.nodes[&pid];
            for (level, members) in &p.others {
                let r = ldexp1(*level);
                for &x in members {
                    if x != root
                        && self.nodes[&x].top == level - 1
                        && self.metric.dist(&self.nodes[&x].loc, &p.loc) <= r
                    {
                        cand.entry(*level).or_default().insert(x);
                    }
                }
            }
        }
        let mut promoted: Vec<Id> = Vec::new();
        let mut new_root: Option<Id> = None;
        while let Some((j, xs)) = cand.pop_first() {
            if is_root {
                let above: usize = self.topcount.range(j - 1..).map(|(_, c)| *c).sum();
                if above == 1 {
                    new_root = xs.iter().next().copied();
                    break;
                }
            }
            let r = ldexp1(j);
            for x in xs {
                if self.nodes[&x].top != j - 1 {
                    continue;
                }
                let covered = match self.nodes[&x].rev.get(&j) {
                    Some(owners) => owners.iter().any(|&y| y != pid && self.d_ids(x, y) <= r),
                    None => false,
                };
                if !covered {
                    self.promote(x, j, &promoted);
                    promoted.push(x);
                    cand.entry(j + 1).or_default().insert(x);
                }
            }
        }
        self.remove_ghost(pid);
        if is_root {
            let nr = new_root.ok_or_else(|| PyRuntimeError::new_err("no successor for the root"))?;
            self.root = Some(nr);
            let t = self.nodes[&nr].top;
            dec(&mut self.topcount, t);
        }
        self.normalize_top();
        Ok(())
    }

    #[pyo3(signature = (query, eps, record=false))]
    fn afn(&self, query: Vec<Bound<'_, PyAny>>, eps: f64, record: bool) -> PyResult<AfnResult> {
        let root = self.root.ok_or_else(|| PyValueError::new_err("net is empty"))?;
        if query.is_empty() {
            return Err(PyValueError::new_err("query set is empty"));
        }
        if !(eps > 0.0) {
            return Err(PyValueError::new_err(format!("eps must be > 0, got {eps}")));
        }
        let q: Vec<Loc> = query.iter().map(|o| self.to_loc(o)).collect::<PyResult<_>>()?;
        let mut cache: FxHashMap<Id, f64> = FxHashMap::default();
        let mut e = self.emax;
        let e_min = self.e_min_value();
        let d0 = self.dq(root, &q);
        cache.insert(root, d0);
        let mut z: Vec<Id> = vec![root];
        let mut m = d0;
        let mut sizes = vec![1usize];
        let mut frontiers = if record { Some(vec![vec![root]]) } else { None };
        let start = e;
        let half_eps = 0.5 * eps;
        let mut seen: FxHashSet<Id> = FxHashSet::default();
        while e > e_min && ldexp1(e) > half_eps * m {
            let thr = m - ldexp1(e);
            seen.clear();
            let mut nz = Vec::new();
            for &zz in &z {
                let per = self.nodes[&zz].others.get(&e);
                let it = std::iter::once(zz).chain(per.into_iter().flat_map(|s| s.iter().copied()));
                for y in it {
                    if !seen.insert(y) {
                        continue;
                    }
                    let d = match cache.get(&y) {
                        Some(&d) => d,
                        None => {
                            let d = self.dq(y, &q);
                            cache.insert(y, d);
                            d
                        }
                    };
                    if d >= thr {
                        nz.push(y);
                    }
                }
            }
            nz.sort_unstable();
            z = nz;
            e -= 1;
            m = z.iter().map(|y| cache[y]).fold(f64::NEG_INFINITY, f64::max);
            sizes.push(z.len());
            if let Some(f) = frontiers.as_mut() {
                f.push(z.clone());
            }
        }
        let best = *z.iter().find(|y| cache[*y] == m).unwrap();
        Ok((best, m, start, e, sizes, frontiers, cache.len() * q.len()))
    }
}

#[pymodule]
fn _core(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<NetCore>()?;
    Ok(())
}
