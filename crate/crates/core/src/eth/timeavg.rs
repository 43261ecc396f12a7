//! Products of thermal moments as functions of time: direct evaluation,
//! finite-window and strict long-time averages, distinct-index sums.
//!
//! In a [`SpectralExpr`] the time tag of a letter is a rate `s` in {-1, 0, 1}:
//! the letter stands for `A(s t)`. Elsewhere time tags are absolute.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::time_window_kernel;
use crate::error::{Error, Result};
use crate::eth::model::SpectralModel;
use crate::eth::network::{Merge, Network};
use crate::eth::thermal::{evolve, ThermalFunctional, ThermalState};
use crate::lattice::{partition_lattice_moebius, set_partitions, NcLattice, Partition};
use crate::linalg::CMat;
use crate::moments::{mixed_moment_free, Letter};
use crate::perm::Permutation;
use crate::C64;

/// Largest number of index assignments a brute-force sum will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 50_000_000;

const GL_NODES: usize = 12;

/// Energies, thermal weights and observables in the eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralContext<'a> {
    energies: &'a [f64],
    weights: &'a [f64],
    ops: Vec<&'a CMat>,
    width: f64,
}

impl<'a> SpectralContext<'a> {
    pub fn new(model: &'a SpectralModel, state: &'a ThermalState, ops: Vec<&'a CMat>) -> Result<Self> {
        let d = model.dim();
        if state.dim() != d {
            return Err(Error::domain("thermal state and model differ in dimension"));
        }
        if ops.iter().any(|m| m.dim() != (d, d)) {
            return Err(Error::domain(format!("observables must be {d}x{d}")));
        }
        let energies = model.energies().as_slice().expect("contiguous energies");
        Ok(SpectralContext { energies, weights: &state.weights, ops, width: model.spectral_width() })
    }

    pub fn by_name(model: &'a SpectralModel, state: &'a ThermalState, names: &[&str]) -> Result<Self> {
        let ops = names.iter().map(|n| model.observable(n)).collect::<Result<Vec<_>>>()?;
        Self::new(model, state, ops)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        self.energies
    }

    pub fn weights(&self) -> &[f64] {
        self.weights
    }

    pub fn op(&self, i: usize) -> Result<&'a CMat> {
        self.ops
            .get(i)
            .copied()
            .ok_or_else(|| Error::MissingMoment(format!("no observable with id {i}")))
    }

    /// Thermal functional over the same observables at absolute times.
    pub fn functional(&self) -> ThermalFunctional<'a> {
        ThermalFunctional::from_parts(self.energies, self.weights, self.ops.clone())
    }

    /// Same spectrum and weights with a different observable list.
    pub fn with_ops(&self, ops: Vec<&'a CMat>) -> Self {
        SpectralContext { ops, ..self.clone() }
    }

    fn weight_vec(&self) -> Vec<C64> {
        self.weights.iter().map(|&w| C64::new(w, 0.0)).collect()
    }
}

/// `coeff * prod_b <trace_b>`.
#[derive(Clone, Debug, Serialize)]
pub struct TraceProduct {
    pub coeff: C64,
    pub traces: Vec<Vec<Letter>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SpectralExpr {
    pub terms: Vec<TraceProduct>,
}

fn rate(l: &Letter) -> Result<i32> {
    match l.time {
        x if x == 0.0 => Ok(0),
        x if x == 1.0 => Ok(1),
        x if x == -1.0 => Ok(-1),
        x => Err(Error::domain(format!("time rate must be -1, 0 or 1, got {x}"))),
    }
}

impl SpectralExpr {
    pub fn moment(word: Vec<Letter>) -> Self {
        Self::product(vec![word])
    }

    pub fn product(traces: Vec<Vec<Letter>>) -> Self {
        SpectralExpr { terms: vec![TraceProduct { coeff: C64::new(1.0, 0.0), traces }] }
    }

    /// `kappa_n(word)` written out over NC(n).
    pub fn cumulant(word: &[Letter]) -> Result<Self> {
        let n = word.len();
        if n == 0 {
            return Err(Error::domain("cumulant of the empty word"));
        }
        let lattice = NcLattice::shared(n)?;
        let mut terms = Vec::new();
        for &(s, mu) in lattice.moebius_down(lattice.top()) {
            if mu == 0 {
                continue;
            }
            let traces = lattice.get(s).blocks().iter().map(|b| b.iter().map(|&i| word[i]).collect()).collect();
            terms.push(TraceProduct { coeff: C64::new(mu as f64, 0.0), traces });
        }
        Ok(SpectralExpr { terms })
    }

    pub fn plus(mut self, other: SpectralExpr, scale: C64) -> Self {
        self.terms.extend(other.terms.into_iter().map(|mut t| {
            t.coeff *= scale;
            t
        }));
        self
    }

    fn validate(&self, ctx: &SpectralContext) -> Result<()> {
        for t in &self.terms {
            for l in t.traces.iter().flatten() {
                rate(l)?;
                ctx.op(l.op)?;
            }
        }
        Ok(())
    }

    fn max_rate_sum(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.traces.iter().flatten().filter(|l| l.time != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Value at time `t`.
    pub fn evaluate(&self, ctx: &SpectralContext, t: f64) -> Result<C64> {
        self.validate(ctx)?;
        let mut p = Products::new(ctx, t);
        let mut acc = C64::new(0.0, 0.0);
        for term in &self.terms {
            let mut v = term.coeff;
            for tr in &term.traces {
                v *= p.moment(tr)?;
            }
            acc += v;
        }
        Ok(acc)
    }
}

/// Memoized products of evolved letters at one time.
struct Products<'c, 'a> {
    ctx: &'c SpectralContext<'a>,
    t: f64,
    cache: HashMap<Vec<Letter>, Arc<CMat>>,
}

impl<'c, 'a> Products<'c, 'a> {
    fn new(ctx: &'c SpectralContext<'a>, t: f64) -> Self {
        Products { ctx, t, cache: HashMap::new() }
    }

    fn prod(&mut self, w: &[Letter]) -> Result<Arc<CMat>> {
        if let Some(m) = self.cache.get(w) {
            return Ok(m.clone());
        }
        let m = if w.len() == 1 {
            Arc::new(evolve(self.ctx.op(w[0].op)?, self.ctx.energies, w[0].time * self.t))
        } else {
            let l = self.prod(&w[..w.len() - 1])?;
            let r = self.prod(&w[w.len() - 1..])?;
            Arc::new(l.dot(&*r))
        };
        self.cache.insert(w.to_vec(), m.clone());
        Ok(m)
    }

    fn moment(&mut self, w: &[Letter]) -> Result<C64> {
        let wts = self.ctx.weights;
        match w.len() {
            0 => Ok(C64::new(1.0, 0.0)),
            1 => {
                let m = self.ctx.op(w[0].op)?;
                Ok(m.diag().iter().zip(wts).map(|(x, p)| x * p).sum())
            }
            n => {
                let l = self.prod(&w[..n / 2])?;
                let r = self.prod(&w[n / 2..])?;
                let mut acc = C64::new(0.0, 0.0);
                for (i, row) in l.outer_iter().enumerate() {
                    let s: C64 = row.iter().zip(r.column(i).iter()).map(|(a, b)| a * b).sum();
                    acc += s * wts[i];
                }
                Ok(acc)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    Finite,
    StrictInfinite,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeWindow {
    pub t_max: f64,
    pub mode: WindowMode,
}

impl TimeWindow {
    pub fn finite(t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::domain(format!("finite window needs 0 < t_max < inf, got {t_max}")));
        }
        Ok(TimeWindow { t_max, mode: WindowMode::Finite })
    }

    pub fn strict() -> Self {
        TimeWindow { t_max: f64::INFINITY, mode: WindowMode::StrictInfinite }
    }
}

/// Average of the expression over the window.
pub fn time_average(ctx: &SpectralContext, expr: &SpectralExpr, window: TimeWindow) -> Result<C64> {
    expr.validate(ctx)?;
    match window.mode {
        WindowMode::StrictInfinite => {
            let mut acc = C64::new(0.0, 0.0);
            for term in &expr.terms {
                acc += term.coeff * strict_product(ctx, &term.traces)?;
            }
            Ok(acc)
        }
        WindowMode::Finite => {
            let w = TimeWindow::finite(window.t_max)?;
            Ok(finite_averages(ctx, expr, &[w.t_max])?[0])
        }
    }
}

/// Finite-window averages for several `t_max` sharing one quadrature grid.
pub fn finite_averages(ctx: &SpectralContext, expr: &SpectralExpr, t_maxes: &[f64]) -> Result<Vec<C64>> {
    expr.validate(ctx)?;
    let max_freq = expr.max_rate_sum() as f64 * ctx.width;
    window_averages(|t| expr.evaluate(ctx, t), t_maxes, max_freq)
}

/// `(1/T) int_0^T f(t) dt` for each `T` by composite Gauss-Legendre quadrature.
/// Panels are short enough to resolve frequencies up to `max_freq`.
pub fn window_averages<F>(f: F, t_maxes: &[f64], max_freq: f64) -> Result<Vec<C64>>
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    if t_maxes.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::domain("every t_max must be positive and finite"));
    }
    let h = if max_freq > 0.0 { (8.0 / max_freq).min(1.0) } else { 1.0 };
    let mut stops: Vec<f64> = t_maxes.to_vec();
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup();
    let mut panels: Vec<(f64, f64)> = Vec::new();
    let mut a = 0.0;
    for &s in &stops {
        let n = ((s - a) / h).ceil().max(1.0) as usize;
        let step = (s - a) / n as f64;
        for i in 0..n {
            panels.push((a + i as f64 * step, if i + 1 == n { s } else { a + (i + 1) as f64 * step }));
        }
        a = s;
    }
    let (x, w) = gauss_legendre(GL_NODES);
    let integrals: Vec<C64> = panels
        .par_iter()
        .map(|&(lo, hi)| {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut acc = C64::new(0.0, 0.0);
            for (xi, wi) in x.iter().zip(&w) {
                acc += f(mid + half * xi)? * (wi * half);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t_maxes.len());
    for &t in t_maxes {
        let s: C64 = panels.iter().zip(&integrals).filter(|(p, _)| p.1 <= t).map(|(_, v)| v).sum();
        out.push(s / t);
    }
    Ok(out)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `h_n = sum_{P in Pi(n)} mu(P, 1) / prod_{b in P} |b|!`. The block weights that
/// turn coincidence sums into the indicator of equal multisets.
fn multiset_block_weight(n: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = CACHE.get_or_init(|| {
        (0..=8)
            .map(|n| {
                if n == 0 {
                    return 1.0;
                }
                let top = Partition::full(n);
                set_partitions(n)
                    .iter()
                    .map(|p| {
                        let mu = partition_lattice_moebius(p, &top).expect("below top") as f64;
                        let g: f64 = p.blocks().iter().map(|b| (1..=b.len()).product::<usize>() as f64).product();
                        mu / g
                    })
                    .sum()
            })
            .collect()
    });
    table[n]
}

/// Row and column index variables of the time-dependent letters.
struct Layout {
    offsets: Vec<usize>,
    vars: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn layout(traces: &[Vec<Letter>]) -> Result<Layout> {
    let mut offsets = Vec::with_capacity(traces.len());
    let mut vars = 0;
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for tr in traces {
        offsets.push(vars);
        let n = tr.len();
        for (p, l) in tr.iter().enumerate() {
            let (u, v) = (vars + p, vars + (p + 1) % n);
            match rate(l)? {
                1 => {
                    rows.push(u);
                    cols.push(v);
                }
                -1 => {
                    rows.push(v);
                    cols.push(u);
                }
                _ => {}
            }
        }
        vars += n;
    }
    Ok(Layout { offsets, vars, rows, cols })
}

/// Sums the product of traces over index assignments constant on the classes
/// of `merge`, with letters evolved to absolute time `rate * t`.
fn contract_merged(ctx: &SpectralContext, traces: &[Vec<Letter>], lay: &Layout, merge: &mut Merge, mats: &HashMap<Letter, Arc<CMat>>) -> Result<C64> {
    let (cls, n) = merge.classes();
    let mut net = Network::new(ctx.dim(), n);
    let w = ctx.weight_vec();
    for (b, tr) in traces.iter().enumerate() {
        if tr.is_empty() {
            continue;
        }
        let o = lay.offsets[b];
        net.weight(cls[o], &w);
        for (p, l) in tr.iter().enumerate() {
            let (u, v) = (o + p, o + (p + 1) % tr.len());
            net.edge(cls[u], cls[v], mats[l].clone());
        }
    }
    net.contract()
}

fn static_mats(ctx: &SpectralContext, traces: &[Vec<Letter>], t: f64) -> Result<HashMap<Letter, Arc<CMat>>> {
    let mut mats = HashMap::new();
    for l in traces.iter().flatten() {
        if !mats.contains_key(l) {
            mats.insert(*l, Arc::new(evolve(ctx.op(l.op)?, ctx.energies, l.time * t)));
        }
    }
    Ok(mats)
}

/// Strict long-time average of a product of traces, assuming no resonances
/// beyond equal multisets of row and column energies.
pub fn strict_product(ctx: &SpectralContext, traces: &[Vec<Letter>]) -> Result<C64> {
    let traces: Vec<Vec<Letter>> = traces.iter().filter(|t| !t.is_empty()).cloned().collect();
    let lay = layout(&traces)?;
    let mats = static_mats(ctx, &traces, 0.0)?;
    let m = lay.rows.len();
    if m > 8 {
        return Err(Error::Size(format!("{m} time-dependent letters")));
    }
    if m == 0 {
        return contract_merged(ctx, &traces, &lay, &mut Merge::new(lay.vars), &mats);
    }
    let mut jobs = Vec::new();
    for sigma in Permutation::all(m) {
        for q in set_partitions(m) {
            let h: f64 = q.blocks().iter().map(|b| multiset_block_weight(b.len())).product();
            jobs.push((sigma.clone(), q, h));
        }
    }
    let parts: Vec<C64> = jobs
        .par_iter()
        .map(|(sigma, q, h)| {
            let mut merge = Merge::new(lay.vars);
            for l in 0..m {
                merge.union(lay.rows[l], lay.cols[sigma.apply(l)]);
            }
            for b in q.blocks() {
                for &x in &b[1..] {
                    merge.union(lay.rows[b[0]], lay.rows[x]);
                }
            }
            Ok(contract_merged(ctx, &traces, &lay, &mut merge, &mats)? * *h)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().sum())
}

/// Sum over every index assignment with the phase of each assignment replaced
/// by `kernel(delta)`, `delta = sum rate (E_row - E_col)`.
pub fn spectral_bruteforce<K>(ctx: &SpectralContext, traces: &[Vec<Letter>], kernel: K) -> Result<C64>
where
    K: Fn(f64) -> C64,
{
    let traces: Vec<Vec<Letter>> = traces.iter().filter(|t| !t.is_empty()).cloned().collect();
    let lay = layout(&traces)?;
    let d = ctx.dim();
    if (d as u128).pow(lay.vars as u32) > BRUTE_FORCE_LIMIT {
        return Err(Error::Size(format!("brute force over {d}^{} assignments", lay.vars)));
    }
    let mats = static_mats(ctx, &traces, 0.0)?;
    let mut letters: Vec<(usize, usize, Arc<CMat>)> = Vec::new();
    for (b, tr) in traces.iter().enumerate() {
        let o = lay.offsets[b];
        for (p, l) in tr.iter().enumerate() {
            letters.push((o + p, o + (p + 1) % tr.len(), mats[l].clone()));
        }
    }
    let e = ctx.energies;
    let mut idx = vec![0usize; lay.vars];
    let mut total = C64::new(0.0, 0.0);
    loop {
        let mut v = C64::new(1.0, 0.0);
        for &o in &lay.offsets {
            v *= ctx.weights[idx[o]];
        }
        for (u, w, m) in &letters {
            v *= m[[idx[*u], idx[*w]]];
        }
        if v != C64::new(0.0, 0.0) {
            let delta: f64 = lay.rows.iter().zip(&lay.cols).map(|(&r, &c)| e[idx[r]] - e[idx[c]]).sum();
            total += v * kernel(delta);
        }
        let mut p = 0;
        loop {
            if p == lay.vars {
                return Ok(total);
            }
            idx[p] += 1;
            if idx[p] < d {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Strict average by grouping exact resonances: terms with `|delta| < eps`.
pub fn time_average_resonant(ctx: &SpectralContext, expr: &SpectralExpr, eps: f64) -> Result<C64> {
    expr.validate(ctx)?;
    let mut acc = C64::new(0.0, 0.0);
    for term in &expr.terms {
        let v = spectral_bruteforce(ctx, &term.traces, |d| {
            if d.abs() < eps {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })?;
        acc += term.coeff * v;
    }
    Ok(acc)
}

/// Exact finite-window average by summing the window kernel over assignments.
pub fn time_average_kernel(ctx: &SpectralContext, expr: &SpectralExpr, t_max: f64) -> Result<C64> {
    expr.validate(ctx)?;
    let mut acc = C64::new(0.0, 0.0);
    for term in &expr.terms {
        acc += term.coeff * spectral_bruteforce(ctx, &term.traces, |d| time_window_kernel(d, t_max))?;
    }
    Ok(acc)
}

/// Alternating word `A B A B ..` (`k` copies each) with `A` at rate 1; ops 0 and 1.
pub fn otoc_rates(k: usize) -> Vec<Letter> {
    (0..2 * k).map(|i| if i % 2 == 0 { Letter::at(0, 1.0) } else { Letter::new(1) }).collect()
}

fn unrestricted(ctx: &SpectralContext, word: &[Letter], q: &Partition) -> Result<C64> {
    let traces = vec![word.to_vec()];
    let lay = Layout { offsets: vec![0], vars: word.len(), rows: vec![], cols: vec![] };
    let mats = static_mats(ctx, &traces, 1.0)?;
    let mut merge = Merge::new(word.len());
    for b in q.blocks() {
        for &x in &b[1..] {
            merge.union(b[0], x);
        }
    }
    contract_merged(ctx, &traces, &lay, &mut merge, &mats)
}

fn check_word(ctx: &SpectralContext, word: &[Letter]) -> Result<()> {
    if word.is_empty() || word.len() > 8 {
        return Err(Error::domain("distinct-index sums take words of length 1..=8"));
    }
    for l in word {
        ctx.op(l.op)?;
    }
    Ok(())
}

/// `sum_{i_1..i_n pairwise distinct} w_{i_1} M1_{i_1 i_2} .. Mn_{i_n i_1}`
/// with letters evolved to their absolute times, by inclusion-exclusion over
/// coincidence patterns.
pub fn distinct_index_sum(ctx: &SpectralContext, word: &[Letter]) -> Result<C64> {
    check_word(ctx, word)?;
    let n = word.len();
    let bottom = Partition::singletons(n);
    let parts = set_partitions(n);
    let vals: Vec<C64> = parts
        .par_iter()
        .map(|q| Ok(unrestricted(ctx, word, q)? * partition_lattice_moebius(&bottom, q)? as f64))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().sum())
}

/// Sums restricted to each exact coincidence pattern; the singleton pattern is
/// the distinct-index sum and all of them add up to the word moment.
pub fn coincidence_terms(ctx: &SpectralContext, word: &[Letter]) -> Result<Vec<(Partition, C64)>> {
    check_word(ctx, word)?;
    let parts = set_partitions(word.len());
    let u: Vec<C64> = parts.par_iter().map(|q| unrestricted(ctx, word, q)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(parts.len());
    for p in &parts {
        let mut s = C64::new(0.0, 0.0);
        for (q, v) in parts.iter().zip(&u) {
            if p.leq(q)? {
                s += *v * partition_lattice_moebius(p, q)? as f64;
            }
        }
        out.push((p.clone(), s));
    }
    Ok(out)
}

/// Direct loop over pairwise distinct indices.
pub fn distinct_index_bruteforce(ctx: &SpectralContext, word: &[Letter]) -> Result<C64> {
    check_word(ctx, word)?;
    let d = ctx.dim();
    let n = word.len();
    if n > d {
        return Ok(C64::new(0.0, 0.0));
    }
    let falling: u128 = (0..n).map(|i| (d - i) as u128).product();
    if falling > BRUTE_FORCE_LIMIT {
        return Err(Error::Size(format!("brute force over {falling} distinct index tuples")));
    }
    let mats: Vec<CMat> = word.iter().map(|l| Ok(evolve(ctx.op(l.op)?, ctx.energies, l.time))).collect::<Result<_>>()?;
    let mut used = vec![false; d];
    let mut idx = vec![0usize; n];
    fn rec(pos: usize, partial: C64, idx: &mut [usize], used: &mut [bool], mats: &[CMat]) -> C64 {
        let n = idx.len();
        if pos == n {
            return partial * mats[n - 1][[idx[n - 1], idx[0]]];
        }
        let mut acc = C64::new(0.0, 0.0);
        for x in 0..used.len() {
            if used[x] {
                continue;
            }
            let f = mats[pos - 1][[idx[pos - 1], x]];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            used[x] = true;
            idx[pos] = x;
            acc += rec(pos + 1, partial * f, idx, used, mats);
            used[x] = false;
        }
        acc
    }
    let mut total = C64::new(0.0, 0.0);
    for i0 in 0..d {
        used[i0] = true;
        idx[0] = i0;
        total += if n == 1 {
            mats[0][[i0, i0]] * ctx.weights[i0]
        } else {
            rec(1, C64::new(ctx.weights[i0], 0.0), &mut idx, &mut used, &mats)
        };
        used[i0] = false;
    }
    Ok(total)
}

/// Distinct-index form of `kappa_{2k}(A(t), B, .., A(t), B)`; ops 0 and 1.
pub fn distinct_index_cumulant(ctx: &SpectralContext, k: usize, t: f64) -> Result<C64> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    distinct_index_sum(ctx, &crate::eth::thermal::otoc_word(k, t))
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub k: usize,
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

/// Strict-averaged 2k-OTOC against `sum_pi kappa_pi(A) <B>_{K(pi)}`; ops 0 and 1.
pub fn otoc_long_time_factorization(ctx: &SpectralContext, k: usize) -> Result<FactorizationReport> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let lhs = strict_product(ctx, &[otoc_rates(k)])?;
    let f = ctx.functional();
    let a: Vec<Letter> = vec![Letter::new(0); k];
    let b: Vec<Letter> = vec![Letter::new(1); k];
    let rhs = mixed_moment_free(&a, &f, &b, &f)?;
    Ok(FactorizationReport { k, lhs, rhs, residual: (lhs - rhs).norm() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FreeTime {
    Reached { t: f64 },
    NotReachedInWindow,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeTimeReport {
    pub k: usize,
    pub threshold: f64,
    pub initial: f64,
    pub time: FreeTime,
    pub series: Vec<(f64, C64)>,
}

/// Mixed cumulant `kappa_{2k}(A(t), B, ..)` on a grid; ops 0 and 1.
pub fn cumulant_series(ctx: &SpectralContext, k: usize, grid: &[f64]) -> Result<Vec<(f64, C64)>> {
    let expr = SpectralExpr::cumulant(&otoc_rates(k))?;
    grid.par_iter().map(|&t| Ok((t, expr.evaluate(ctx, t)?))).collect()
}

/// First grid time after which `|kappa_{2k}|` stays below `threshold` times its
/// value at the first grid point.
pub fn free_k_time(ctx: &SpectralContext, k: usize, threshold: f64, grid: &[f64]) -> Result<FreeTimeReport> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time grid must be non-empty and increasing"));
    }
    if !(threshold > 0.0) {
        return Err(Error::domain("threshold must be positive"));
    }
    let series = cumulant_series(ctx, k, grid)?;
    let initial = series[0].1.norm();
    let time = free_time_from_series(&series, threshold * initial);
    Ok(FreeTimeReport { k, threshold, initial, time, series })
}

pub fn free_time_from_series(series: &[(f64, C64)], bound: f64) -> FreeTime {
    let mut first = None;
    for &(t, v) in series.iter().rev() {
        if v.norm() < bound {
            first = Some(t);
        } else {
            break;
        }
    }
    match first {
        Some(t) => FreeTime::Reached { t },
        None => FreeTime::NotReachedInWindow,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixBReport {
    pub window: TimeWindow,
    pub joint: C64,
    pub product: C64,
    pub gap: C64,
    /// `sum_{i != j} w_i w_j A_ij B_ji A_ji B_ij`.
    pub crossing: C64,
}

/// `E_t[<A(t)B>^2]` against `(E_t[<A(t)B>])^2`; ops 0 and 1.
pub fn appendix_b_factorization(ctx: &SpectralContext, window: TimeWindow) -> Result<AppendixBReport> {
    let two = vec![Letter::at(0, 1.0), Letter::new(1)];
    let single = time_average(ctx, &SpectralExpr::moment(two.clone()), window)?;
    let joint = time_average(ctx, &SpectralExpr::product(vec![two.clone(), two]), window)?;
    let product = single * single;
    Ok(AppendixBReport { window, joint, product, gap: joint - product, crossing: crossing_term(ctx)? })
}

pub fn crossing_term(ctx: &SpectralContext) -> Result<C64> {
    let (a, b) = (ctx.op(0)?, ctx.op(1)?);
    let w = ctx.weights;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..ctx.dim() {
        for j in 0..ctx.dim() {
            if i != j {
                acc += a[[i, j]] * b[[j, i]] * a[[j, i]] * b[[i, j]] * (w[i] * w[j]);
            }
        }
    }
    Ok(acc)
}

/// Term-by-term comparison on every tuple `(i, j, i', j')` of the resonance
/// condition `E_i - E_j + E_i' - E_j' = 0` with the pairing structure.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaStructureReport {
    pub dim: usize,
    pub eps: f64,
    pub tuples: usize,
    pub resonant: usize,
    /// Tuples where the resonance test disagrees with the pairing deltas.
    pub resonance_mismatches: usize,
    /// Tuples where the coincidence-sum weights disagree with the pairing deltas.
    pub weight_mismatches: usize,
}

pub fn delta_structure_check(energies: &[f64], eps: f64) -> DeltaStructureReport {
    let d = energies.len();
    let sigmas = Permutation::all(2);
    let parts = set_partitions(2);
    let mut resonant = 0;
    let (mut rm, mut wm) = (0, 0);
    for i in 0..d {
        for j in 0..d {
            for ib in 0..d {
                for jb in 0..d {
                    let delta = energies[i] - energies[j] + energies[ib] - energies[jb];
                    let res = delta.abs() < eps;
                    let structure = f64::from(u8::from(i == j && ib == jb)) + f64::from(u8::from(i == jb && ib == j))
                        - f64::from(u8::from(i == j && j == ib && ib == jb));
                    resonant += usize::from(res);
                    if res != (structure == 1.0) {
                        rm += 1;
                    }
                    let (r, c) = ([i, ib], [j, jb]);
                    let mut weight = 0.0;
                    for s in &sigmas {
                        for q in &parts {
                            let const_on_q = q.blocks().iter().all(|b| b.iter().all(|&x| r[x] == r[b[0]]));
                            let paired = (0..2).all(|l| r[l] == c[s.apply(l)]);
                            if const_on_q && paired {
                                weight += q.blocks().iter().map(|b| multiset_block_weight(b.len())).product::<f64>();
                            }
                        }
                    }
                    if (weight - structure).abs() > 1e-12 {
                        wm += 1;
                    }
                }
            }
        }
    }
    DeltaStructureReport { dim: d, eps, tuples: d.pow(4), resonant, resonance_mismatches: rm, weight_mismatches: wm }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_weights() {
        assert_eq!(multiset_block_weight(1), 1.0);
        assert!((multiset_block_weight(2) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((i - 2.0 / 23.0).abs() < 1e-13);
        let (x, w) = gauss_legendre(5);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i - 2.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn free_time_definition() {
        let s: Vec<(f64, C64)> = [1.0, 0.5, 0.01, 0.2, 0.01, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, C64::new(v, 0.0)))
            .collect();
        assert_eq!(free_time_from_series(&s, 0.05), FreeTime::Reached { t: 4.0 });
        assert_eq!(free_time_from_series(&s, 0.5), FreeTime::Reached { t: 2.0 });
        assert_eq!(free_time_from_series(&s[..4], 0.1), FreeTime::NotReachedInWindow);
    }
}
