//! Contraction of small index networks
//! `sum_x prod_v w_v[x_v] prod_e M_e[x_u(e), x_v(e)]` where every index ranges
//! over the same D values.

use std::sync::Arc;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::C64;

#[derive(Clone, Debug)]
struct Edge {
    u: usize,
    v: usize,
    m: Arc<CMat>,
}

#[derive(Clone, Debug)]
pub struct Network {
    dim: usize,
    alive: Vec<bool>,
    weights: Vec<Option<Array1<C64>>>,
    edges: Vec<Edge>,
    scalar: C64,
}

/// Above this many vertices left after reduction, slicing is refused.
const SLICE_LIMIT: usize = 12;

impl Network {
    pub fn new(dim: usize, vertices: usize) -> Self {
        Network {
            dim,
            alive: vec![true; vertices],
            weights: vec![None; vertices],
            edges: Vec::new(),
            scalar: C64::new(1.0, 0.0),
        }
    }

    pub fn add_vertex(&mut self) -> usize {
        self.alive.push(true);
        self.weights.push(None);
        self.alive.len() - 1
    }

    /// Multiplies the vertex factor of `v` by `w`.
    pub fn weight(&mut self, v: usize, w: &[C64]) {
        let w = Array1::from(w.to_vec());
        self.mul_weight(v, w);
    }

    fn mul_weight(&mut self, v: usize, w: Array1<C64>) {
        self.weights[v] = Some(match self.weights[v].take() {
            None => w,
            Some(old) => old * w,
        });
    }

    /// Adds the factor `m[x_u, x_v]`.
    pub fn edge(&mut self, u: usize, v: usize, m: Arc<CMat>) {
        self.edges.push(Edge { u, v, m });
    }

    fn ones(&self) -> Array1<C64> {
        Array1::from_elem(self.dim, C64::new(1.0, 0.0))
    }

    fn weight_of(&self, v: usize) -> Array1<C64> {
        self.weights[v].clone().unwrap_or_else(|| self.ones())
    }

    fn degree(&self, v: usize) -> usize {
        self.edges.iter().map(|e| usize::from(e.u == v) + usize::from(e.v == v)).sum()
    }

    /// Edge matrix oriented as rows on `a`, columns on `b`.
    fn oriented(e: &Edge, a: usize) -> CMat {
        if e.u == a {
            (*e.m).clone()
        } else {
            e.m.t().to_owned()
        }
    }

    fn step(&mut self) -> bool {
        // Self-loops become vertex factors.
        if let Some(i) = self.edges.iter().position(|e| e.u == e.v) {
            let e = self.edges.swap_remove(i);
            let d = e.m.diag().to_owned();
            self.mul_weight(e.u, d);
            return true;
        }
        // Parallel edges merge by Hadamard product.
        for i in 0..self.edges.len() {
            for j in (i + 1)..self.edges.len() {
                let (a, b) = (&self.edges[i], &self.edges[j]);
                let same = (a.u == b.u && a.v == b.v) || (a.u == b.v && a.v == b.u);
                if same {
                    let u = a.u;
                    let v = a.v;
                    let merged = Self::oriented(a, u) * Self::oriented(b, u);
                    let j_edge = self.edges.swap_remove(j);
                    drop(j_edge);
                    self.edges[i] = Edge { u, v, m: Arc::new(merged) };
                    return true;
                }
            }
        }
        let live: Vec<usize> = (0..self.alive.len()).filter(|&v| self.alive[v]).collect();
        for &v in &live {
            match self.degree(v) {
                0 => {
                    let s: C64 = match &self.weights[v] {
                        None => C64::new(self.dim as f64, 0.0),
                        Some(w) => w.sum(),
                    };
                    self.scalar *= s;
                    self.alive[v] = false;
                    return true;
                }
                1 => {
                    let i = self.edges.iter().position(|e| e.u == v || e.v == v).expect("degree 1");
                    let e = self.edges.swap_remove(i);
                    let other = if e.u == v { e.v } else { e.u };
                    let m = Self::oriented(&e, other);
                    let vec = match &self.weights[v] {
                        None => m.sum_axis(ndarray::Axis(1)),
                        Some(w) => m.dot(w),
                    };
                    self.mul_weight(other, vec);
                    self.alive[v] = false;
                    return true;
                }
                2 => {
                    let idx: Vec<usize> = (0..self.edges.len())
                        .filter(|&i| self.edges[i].u == v || self.edges[i].v == v)
                        .collect();
                    let (e1, e2) = (self.edges[idx[0]].clone(), self.edges[idx[1]].clone());
                    let a = if e1.u == v { e1.v } else { e1.u };
                    let b = if e2.u == v { e2.v } else { e2.u };
                    let mut p = Self::oriented(&e1, a);
                    if let Some(w) = &self.weights[v] {
                        for (mut col, x) in p.columns_mut().into_iter().zip(w.iter()) {
                            col.mapv_inplace(|y| y * x);
                        }
                    }
                    let q = Self::oriented(&e2, v);
                    let m = p.dot(&q);
                    self.edges.swap_remove(idx[1]);
                    self.edges.swap_remove(idx[0]);
                    self.edges.push(Edge { u: a, v: b, m: Arc::new(m) });
                    self.alive[v] = false;
                    return true;
                }
                _ => {}
            }
        }
        false
    }

    pub fn contract(mut self) -> Result<C64> {
        while self.step() {}
        let live: Vec<usize> = (0..self.alive.len()).filter(|&v| self.alive[v]).collect();
        if live.is_empty() {
            return Ok(self.scalar);
        }
        if live.len() > SLICE_LIMIT {
            return Err(Error::Size(format!("network with {} irreducible vertices", live.len())));
        }
        // Slice the vertex of largest degree.
        let v = *live.iter().max_by_key(|&&v| self.degree(v)).expect("non-empty");
        let w = self.weight_of(v);
        let mut total = C64::new(0.0, 0.0);
        for y in 0..self.dim {
            if w[y] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut sub = Network {
                dim: self.dim,
                alive: self.alive.clone(),
                weights: self.weights.clone(),
                edges: Vec::new(),
                scalar: self.scalar * w[y],
            };
            sub.alive[v] = false;
            sub.weights[v] = None;
            for e in &self.edges {
                if e.u == v && e.v == v {
                    sub.scalar *= e.m[[y, y]];
                } else if e.u == v {
                    sub.mul_weight(e.v, e.m.row(y).to_owned());
                } else if e.v == v {
                    sub.mul_weight(e.u, e.m.column(y).to_owned());
                } else {
                    sub.edges.push(e.clone());
                }
            }
            total += sub.contract()?;
        }
        Ok(total)
    }
}

/// Union-find over network variables.
#[derive(Clone, Debug)]
pub struct Merge {
    parent: Vec<usize>,
}

impl Merge {
    pub fn new(n: usize) -> Self {
        Merge { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let n = self.parent[y];
            self.parent[y] = r;
            y = n;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Dense relabelling of the classes, in order of first appearance.
    pub fn classes(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut count = 0;
        for x in 0..n {
            let r = self.find(x);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            out[x] = label[r];
        }
        (out, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn mat(d: usize, s: usize) -> CMat {
        Array2::from_shape_fn((d, d), |(i, j)| C64::new(((i * 5 + j * 3 + s) % 7) as f64 - 3.0, ((i + j * s) % 3) as f64))
    }

    #[test]
    fn four_cycle_is_trace() {
        let d = 5;
        let ms: Vec<CMat> = (0..4).map(|s| mat(d, s)).collect();
        let mut net = Network::new(d, 4);
        for i in 0..4 {
            net.edge(i, (i + 1) % 4, Arc::new(ms[i].clone()));
        }
        let direct = ms[0].dot(&ms[1]).dot(&ms[2]).dot(&ms[3]).diag().sum();
        assert!((net.contract().unwrap() - direct).norm() < 1e-9);
    }

    #[test]
    fn complete_graph_needs_slicing() {
        let d = 4;
        let mut net = Network::new(d, 4);
        let mut brute = C64::new(0.0, 0.0);
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let ms: Vec<CMat> = (0..6).map(|s| mat(d, s)).collect();
        for (p, m) in pairs.iter().zip(&ms) {
            net.edge(p.0, p.1, Arc::new(m.clone()));
        }
        for x in 0..d.pow(4) {
            let idx = [x % d, x / d % d, x / d / d % d, x / d / d / d];
            let mut v = C64::new(1.0, 0.0);
            for (p, m) in pairs.iter().zip(&ms) {
                v *= m[[idx[p.0], idx[p.1]]];
            }
            brute += v;
        }
        assert!((net.contract().unwrap() - brute).norm() < 1e-8 * brute.norm().max(1.0));
    }
}
