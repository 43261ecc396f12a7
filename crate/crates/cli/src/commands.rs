//! Parameter resolution and execution of each subcommand. Resolution reads and
//! checks every input; the returned closure does the computation.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

use kfree::channel::{channel_asymptotic, channel_exact, otoc_report};
use kfree::ensemble::{
    channel_distance, clifford_group, commutant_rank, design_check, k_freeness_test, otoc_monte_carlo,
    pauli_group, DenseOperator, EnsembleSpec,
};
use kfree::eth::deutsch::{deutsch_ensemble, DeutschSpec};
use kfree::eth::model::{sign_diagonal, ISING_DEFAULT};
use kfree::eth::thermal::{otoc_word, thermal_free_cumulant};
use kfree::eth::timeavg::{
    appendix_b_factorization, distinct_index_cumulant, finite_averages, free_k_time, otoc_rates, time_average,
    SpectralContext, SpectralExpr, TimeWindow,
};
use kfree::eth::{ModelKind, SpectralModel, ThermalState};
use kfree::io::{moment_table_from_json, read_matrix, write_matrix};
use kfree::lattice::{catalan, kreweras_complement, DEFAULT_NC_LIMIT};
use kfree::linalg::{CMat, TraceFunctional};
use kfree::moments::{cumulants_from_moments, ExpectationFunctional, Letter, MomentTable};
use kfree::perm::geodesic_set;
use kfree::{NcLattice, Permutation, WeingartenTable};

use crate::config::{parse_list, Resolver};
use crate::output::{num, Outcome, Table};
use crate::{CliError, Command, EthCommand, Global, ModelArgs, PairArgs};

pub type Plan = Box<dyn FnOnce() -> Result<Outcome, CliError>>;

fn invalid(s: impl Into<String>) -> CliError {
    CliError::Validation(s.into())
}

fn load(path: &Path) -> Result<CMat, CliError> {
    Ok(read_matrix(path)?)
}

fn load_list(raw: &str, key: &str) -> Result<Vec<CMat>, CliError> {
    let paths: Vec<PathBuf> = parse_list(key, raw)?;
    if paths.is_empty() {
        return Err(invalid(format!("--{key} lists no files")));
    }
    paths.iter().map(|p| load(p)).collect()
}

fn c64_cells(v: C64) -> [String; 2] {
    [num(v.re), num(v.im)]
}

pub fn plan(cmd: &Command, r: &mut Resolver, g: &Global) -> Result<(String, Plan), CliError> {
    Ok(match cmd {
        Command::Nc(a) => ("nc".into(), nc(a, r)?),
        Command::Perm(a) => ("perm".into(), perm(a, r)?),
        Command::Wg(a) => {
            let k: usize = r.require("k", a.k)?;
            let dim: u64 = r.require("dim", a.dim)?;
            ("wg".into(), Box::new(move || wg(k, dim)))
        }
        Command::Cumulants(a) => ("cumulants".into(), cumulants(a, r)?),
        Command::Channel(a) => ("channel".into(), channel(a, r)?),
        Command::Otoc(a) => ("otoc".into(), otoc(a, r)?),
        Command::HaarTest(a) => ("haar-test".into(), haar_test(a, r, g)?),
        Command::DesignCheck(a) => ("design-check".into(), design(a, r, g)?),
        Command::Distance(a) => ("distance".into(), distance(a, r, g)?),
        Command::Eth(e) => eth(e, r, g)?,
    })
}

fn nc(a: &crate::NcArgs, r: &mut Resolver) -> Result<Plan, CliError> {
    let n: usize = r.require("n", a.n)?;
    let count = r.switch("count", a.count)?;
    let moebius = r.switch("moebius", a.moebius)?;
    let kreweras = r.switch("kreweras", a.kreweras)?;
    let limit: usize = r.get("limit", a.limit, DEFAULT_NC_LIMIT)?;
    if n == 0 {
        return Err(invalid("--n must be positive"));
    }
    if count && n > 30 {
        return Err(invalid("counting is limited to n <= 30"));
    }
    Ok(Box::new(move || {
        if count {
            let c = catalan(n);
            return Ok(Outcome::new(&json!({ "n": n, "count": c }))?
                .with_table(Table { headers: vec!["n", "count"], rows: vec![vec![n.to_string(), c.to_string()]] }));
        }
        let lattice = NcLattice::with_limit(n, limit)?;
        let mu: Vec<i64> = {
            let mut v = vec![0; lattice.len()];
            if moebius {
                for &(s, m) in lattice.moebius_down(lattice.top()) {
                    v[s] = m;
                }
            }
            v
        };
        let mut items = Vec::new();
        let mut headers = vec!["partition", "blocks"];
        if moebius {
            headers.push("mu_to_top");
        }
        if kreweras {
            headers.push("kreweras");
        }
        let mut rows = Vec::new();
        for (i, p) in lattice.partitions().iter().enumerate() {
            let mut item = json!({ "partition": p.to_string(), "blocks": p.num_blocks() });
            let mut row = vec![p.to_string(), p.num_blocks().to_string()];
            if moebius {
                item["mu_to_top"] = json!(mu[i]);
                row.push(mu[i].to_string());
            }
            if kreweras {
                let k = kreweras_complement(p)?.to_string();
                item["kreweras"] = json!(k);
                row.push(k);
            }
            items.push(item);
            rows.push(row);
        }
        Ok(Outcome::new(&json!({ "n": n, "count": lattice.len(), "partitions": items }))?
            .with_table(Table { headers, rows }))
    }))
}

fn parse_cycles(k: usize, s: &str) -> Result<Permutation, CliError> {
    let mut cycles = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| invalid(format!("bad cycle notation {s}")))?;
        let end = open.find(')').ok_or_else(|| invalid(format!("unclosed cycle in {s}")))?;
        let c: Vec<usize> = open[..end]
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| match t.parse::<usize>() {
                Ok(x) if x >= 1 => Ok(x - 1),
                _ => Err(invalid(format!("bad point {t} in {s}; points are 1-based"))),
            })
            .collect::<Result<_, _>>()?;
        if !c.is_empty() {
            cycles.push(c);
        }
        rest = open[end + 1..].trim_start();
    }
    Ok(Permutation::from_cycles(k, &cycles)?)
}

fn perm(a: &crate::PermArgs, r: &mut Resolver) -> Result<Plan, CliError> {
    let one: Option<String> = r.optional("perm", a.perm.clone())?;
    let cyc: Option<String> = r.optional("cycles", a.cycles.clone())?;
    let k: Option<usize> = r.optional("k", a.k)?;
    let p = match (one, cyc) {
        (Some(s), None) => s.parse::<Permutation>()?,
        (None, Some(s)) => parse_cycles(k.ok_or_else(|| invalid("--cycles needs --k"))?, &s)?,
        _ => return Err(invalid("give exactly one of --perm and --cycles")),
    };
    if let Some(k) = k {
        if k != p.k() {
            return Err(invalid(format!("--k {k} does not match a permutation of {} points", p.k())));
        }
    }
    Ok(Box::new(move || {
        let nc = match p.to_noncrossing() {
            Ok(q) => json!({ "embeds": true, "partition": q.to_string() }),
            Err(e) => json!({ "embeds": false, "reason": e.to_string() }),
        };
        let geo = match geodesic_set(&p) {
            Ok(v) => json!({ "count": v.len(), "elements": v.iter().map(|x| x.to_string()).collect::<Vec<_>>() }),
            Err(e) => json!({ "skipped": e.to_string() }),
        };
        Outcome::new(&json!({
            "permutation": p.to_string(),
            "cycles": p.cycle_string(),
            "num_cycles": p.num_cycles(),
            "length": p.length(),
            "noncrossing": nc,
            "geodesic": geo,
        }))
    }))
}

fn wg(k: usize, dim: u64) -> Result<Outcome, CliError> {
    let t = WeingartenTable::new(k, dim)?;
    let doc = t.to_document();
    let names: Vec<String> = t.permutations().iter().map(|p| p.to_string()).collect();
    let mut rows = Vec::new();
    for (i, row) in doc.wg.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            rows.push(vec![names[i].clone(), names[j].clone(), v.clone()]);
        }
    }
    Ok(Outcome::new(&doc)?.with_table(Table { headers: vec!["alpha", "beta", "wg"], rows }))
}

enum Source {
    Table(MomentTable),
    Trace(TraceFunctional),
}

fn cumulants(a: &crate::CumulantsArgs, r: &mut Resolver) -> Result<Plan, CliError> {
    let moments: Option<PathBuf> = r.optional("moments", a.moments.clone())?;
    let matrix: Option<String> = r.optional("matrix", a.matrix.clone())?;
    let word_s: Option<String> = r.optional("word", a.word.clone())?;
    let order: Option<usize> = r.optional("order", a.order)?;
    let src = match (moments, matrix) {
        (Some(p), None) => {
            let text = std::fs::read_to_string(&p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            Source::Table(moment_table_from_json(&text)?)
        }
        (None, Some(list)) => Source::Trace(TraceFunctional::new(load_list(&list, "matrix")?)?),
        _ => return Err(invalid("give exactly one of --moments and --matrix")),
    };
    let word: Vec<Letter> = match (word_s, order) {
        (Some(w), None) => parse_list::<usize>("word", &w)?.into_iter().map(Letter::new).collect(),
        (None, Some(n)) => vec![Letter::new(0); n],
        _ => return Err(invalid("give exactly one of --word and --order")),
    };
    if word.is_empty() {
        return Err(invalid("the word is empty"));
    }
    Ok(Box::new(move || {
        let f: &dyn ExpectationFunctional = match &src {
            Source::Table(t) => t,
            Source::Trace(t) => t,
        };
        let set = cumulants_from_moments(&word, f)?;
        let all = set.all_partitions()?;
        let rows = all
            .iter()
            .map(|(p, v)| {
                let [re, im] = c64_cells(*v);
                vec![p.to_string(), re, im]
            })
            .collect();
        let parts: Vec<_> = all.iter().map(|(p, v)| json!({ "partition": p.to_string(), "value": v })).collect();
        let ops: Vec<usize> = word.iter().map(|l| l.op).collect();
        Ok(Outcome::new(&json!({ "word": ops, "kappa": set.full(), "partitions": parts }))?
            .with_table(Table { headers: vec!["partition", "real", "imag"], rows }))
    }))
}

fn channel(a: &crate::ChannelArgs, r: &mut Resolver) -> Result<Plan, CliError> {
    let k: usize = r.require("k", a.k)?;
    let mode: String = r.get("mode", a.mode.clone(), "exact".into())?;
    let ops_s: String = r.require("ops", a.ops.clone())?;
    let mut ops = load_list(&ops_s, "ops")?;
    if ops.len() == 1 {
        ops = vec![ops[0].clone(); k];
    }
    if ops.len() != k {
        return Err(invalid(format!("--ops lists {} matrices for k = {k}", ops.len())));
    }
    let d = ops[0].nrows() as u64;
    let dim: u64 = r.get("dim", a.dim, d)?;
    if mode != "exact" && mode != "asymptotic" {
        return Err(invalid(format!("unknown mode {mode}")));
    }
    if mode == "exact" && dim != d {
        return Err(invalid(format!("--dim {dim} differs from the {d}x{d} matrices")));
    }
    let f = TraceFunctional::new(ops)?;
    Ok(Box::new(move || {
        let letters: Vec<Letter> = (0..k).map(Letter::new).collect();
        let c = if mode == "exact" {
            channel_exact(k, dim, &letters, &f)?
        } else {
            channel_asymptotic(k, dim, &letters, &f)?
        };
        let rows = c
            .perms
            .iter()
            .zip(&c.coeffs)
            .map(|(p, v)| {
                let [re, im] = c64_cells(*v);
                vec![p.to_string(), p.cycle_string(), re, im]
            })
            .collect();
        Ok(Outcome::new(&c)?.with_table(Table { headers: vec!["alpha", "cycles", "real", "imag"], rows }))
    }))
}

fn otoc(a: &crate::OtocArgs, r: &mut Resolver) -> Result<Plan, CliError> {
    let k: usize = r.get("k", a.k, 2)?;
    let pa: PathBuf = r.require("a", a.a.clone())?;
    let pb: PathBuf = r.require("b", a.b.clone())?;
    let (ma, mb) = (load(&pa)?, load(&pb)?);
    let dim: u64 = r.get("dim", a.dim, ma.nrows() as u64)?;
    let fa = TraceFunctional::new(vec![ma])?;
    let fb = TraceFunctional::new(vec![mb])?;
    if k == 0 {
        return Err(invalid("--k must be positive"));
    }
    Ok(Box::new(move || {
        let w = vec![Letter::new(0); k];
        Outcome::new(&otoc_report(dim, &w, &fa, &w, &fb)?)
    }))
}

fn ensemble(name: &str, dim: Option<usize>, seed: u64) -> Result<EnsembleSpec, CliError> {
    match name {
        "haar" => Ok(EnsembleSpec::haar(dim.ok_or_else(|| invalid("the Haar ensemble needs a dimension"))?, seed)?),
        "pauli" => Ok(EnsembleSpec::uniform(pauli_group(), seed)?),
        "clifford" => Ok(EnsembleSpec::uniform(clifford_group(), seed)?),
        _ => Err(invalid(format!("unknown ensemble {name}"))),
    }
}

fn haar_test(a: &crate::HaarTestArgs, r: &mut Resolver, g: &Global) -> Result<Plan, CliError> {
    let pa: PathBuf = r.require("a", a.a.clone())?;
    let pb: PathBuf = r.require("b", a.b.clone())?;
    let k: usize = r.get("k", a.k, 2)?;
    let n: usize = r.get("n-samples", a.n_samples, 1000)?;
    let name: String = r.get("ensemble", a.ensemble.clone(), "haar".into())?;
    let quantity: String = r.get("quantity", a.quantity.clone(), "kappa".into())?;
    let oa = DenseOperator::new(load(&pa)?)?;
    let ob = DenseOperator::new(load(&pb)?)?;
    let e = ensemble(&name, Some(oa.dim), g.seed)?;
    if e.dim() != oa.dim || ob.dim != oa.dim {
        return Err(invalid("operators and ensemble differ in dimension"));
    }
    if quantity != "kappa" && quantity != "otoc" {
        return Err(invalid(format!("unknown quantity {quantity}")));
    }
    Ok(Box::new(move || {
        let est = if quantity == "kappa" {
            k_freeness_test(&e, &oa, &ob, k, n)?
        } else {
            otoc_monte_carlo(&e, &oa, &ob, k, n)?
        };
        let [re, im] = c64_cells(est.estimate);
        let row = vec![re, im, num(est.std_error), est.n_samples.to_string(), est.seed.to_string()];
        Ok(Outcome::new(&est)?
            .with_table(Table { headers: vec!["real", "imag", "std_error", "n_samples", "seed"], rows: vec![row] }))
    }))
}

fn design(a: &crate::DesignArgs, r: &mut Resolver, g: &Global) -> Result<Plan, CliError> {
    let name: String = r.require("ensemble", a.ensemble.clone())?;
    let k: usize = r.require("k", a.k)?;
    let dim: Option<usize> = r.optional("dim", a.dim)?;
    let tol: f64 = r.get("tol", a.tol, 1e-10)?;
    let e = ensemble(&name, dim, g.seed)?;
    Ok(Box::new(move || Outcome::new(&design_check(&e, k, tol)?)))
}

#[derive(Serialize)]
struct DistanceResult {
    ensemble: String,
    k: usize,
    dim: usize,
    distance: f64,
    /// `sqrt(k!) D^(k/2)`.
    reference: f64,
    ratio: f64,
    commutant_rank: usize,
}

fn distance(a: &crate::DistanceArgs, r: &mut Resolver, g: &Global) -> Result<Plan, CliError> {
    let name: String = r.get("ensemble", a.ensemble.clone(), "hamiltonian".into())?;
    let k: usize = r.get("k", a.k, 1)?;
    let dim: Option<usize> = r.optional("dim", a.dim)?;
    let seed = g.seed;
    let e = if name == "hamiltonian" {
        let t_max: f64 = r.get("t-max", a.t_max, f64::INFINITY)?;
        let d = dim.ok_or_else(|| invalid("--dim is required for the Hamiltonian ensemble"))?;
        let model = SpectralModel::goe(d, seed)?;
        EnsembleSpec::hamiltonian(&model, t_max, 1000, seed)?
    } else {
        ensemble(&name, dim, seed)?
    };
    Ok(Box::new(move || {
        let d = e.dim();
        let distance = channel_distance(&e, k)?;
        let fact: f64 = (1..=k).map(|x| x as f64).product();
        let reference = fact.sqrt() * (d as f64).powf(k as f64 / 2.0);
        Outcome::new(&DistanceResult {
            ensemble: name,
            k,
            dim: d,
            distance,
            reference,
            ratio: distance / reference,
            commutant_rank: commutant_rank(k, d)?,
        })
    }))
}

struct ModelPlan {
    kind: String,
    dim: usize,
    sites: usize,
    jhh: (f64, f64, f64),
    hamiltonian: Option<CMat>,
    extra: Vec<(String, CMat)>,
    beta: f64,
    seed: u64,
}

impl ModelPlan {
    fn resolve(m: &ModelArgs, r: &mut Resolver, seed: u64) -> Result<Self, CliError> {
        let kind: String = r.get("model", m.model.clone(), "goe".into())?;
        let beta: f64 = r.get("beta", m.beta, 0.0)?;
        let extra_s: Option<String> = r.optional("observables", m.observables.clone())?;
        let mut extra = Vec::new();
        for item in parse_list::<String>("observables", extra_s.as_deref().unwrap_or(""))? {
            let (n, p) = item.split_once('=').ok_or_else(|| invalid(format!("observable {item} is not NAME=FILE")))?;
            extra.push((n.to_string(), load(Path::new(p))?));
        }
        let mut plan = ModelPlan { kind: kind.clone(), dim: 0, sites: 0, jhh: ISING_DEFAULT, hamiltonian: None, extra, beta, seed };
        match kind.as_str() {
            "goe" => plan.dim = r.get("dim", m.dim, 256)?,
            "ising" => {
                plan.sites = r.get("sites", m.sites, 8)?;
                plan.jhh = (r.get("j", m.j, ISING_DEFAULT.0)?, r.get("hx", m.hx, ISING_DEFAULT.1)?, r.get("hz", m.hz, ISING_DEFAULT.2)?);
            }
            "file" => {
                let p: PathBuf = r.require("hamiltonian", m.hamiltonian.clone())?;
                let h = load(&p)?;
                plan.dim = h.nrows();
                plan.hamiltonian = Some(h);
            }
            _ => return Err(invalid(format!("unknown model {kind}"))),
        }
        if !beta.is_finite() {
            return Err(invalid("--beta must be finite"));
        }
        Ok(plan)
    }

    fn default_pair(&self) -> (&'static str, &'static str) {
        match self.kind.as_str() {
            "ising" => ("sz_1", "sz_mid"),
            _ => ("a", "b"),
        }
    }

    fn build(&self) -> Result<SpectralModel, CliError> {
        let mut m = match self.kind.as_str() {
            "goe" => {
                let mut m = SpectralModel::goe(self.dim, self.seed)?;
                if self.dim >= 2 && self.dim % 2 == 0 {
                    m.add_observable("a", &sign_diagonal(self.dim, self.dim / 2)?)?;
                    m.add_observable("b", &sign_diagonal(self.dim, 1)?)?;
                }
                m
            }
            "ising" => SpectralModel::ising(self.sites, self.jhh.0, self.jhh.1, self.jhh.2)?,
            _ => SpectralModel::from_hamiltonian(self.hamiltonian.as_ref().expect("resolved"), vec![], ModelKind::User)?,
        };
        for (n, o) in &self.extra {
            m.add_observable(n, o)?;
        }
        Ok(m)
    }
}

struct Pair {
    a: Option<String>,
    b: Option<String>,
    k: usize,
}

fn pair(p: &PairArgs, r: &mut Resolver) -> Result<Pair, CliError> {
    Ok(Pair { a: r.optional("a", p.a.clone())?, b: r.optional("b", p.b.clone())?, k: r.get("k", p.k, 2)? })
}

impl Pair {
    fn names(&self, m: &ModelPlan) -> (String, String) {
        let (da, db) = m.default_pair();
        (self.a.clone().unwrap_or(da.into()), self.b.clone().unwrap_or(db.into()))
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|e| invalid(format!("--t-grid {s}: {e}"))))
        .collect::<Result<_, _>>()?;
    let [a, b, h] = parts[..] else {
        return Err(invalid("--t-grid takes start:stop:step"));
    };
    if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(invalid("--t-grid needs step > 0 and stop >= start"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * h).collect())
}

fn series_table(rows: &[(f64, C64)]) -> Table {
    Table {
        headers: vec!["t", "real", "imag", "std_error"],
        rows: rows.iter().map(|(t, v)| vec![num(*t), num(v.re), num(v.im), num(0.0)]).collect(),
    }
}

fn eth(e: &EthCommand, r: &mut Resolver, g: &Global) -> Result<(String, Plan), CliError> {
    let seed = g.seed;
    Ok(match e {
        EthCommand::Build(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let export: Option<PathBuf> = r.optional("export-dir", a.export_dir.clone())?;
            let samples: usize = r.get("resonance-samples", a.resonance_samples, 10_000)?;
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let st = ThermalState::new(&model, m.beta)?;
                let res = model.resonance_report(model.default_resonance_tol(), samples, seed);
                if let Some(dir) = &export {
                    std::fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
                    for n in model.observable_names() {
                        write_matrix(&dir.join(format!("{n}.bin")), model.observable(&n)?)?;
                    }
                    write_matrix(&dir.join("basis.bin"), model.basis())?;
                    let en = serde_json::to_string(&model.energies().to_vec()).map_err(|e| invalid(e.to_string()))?;
                    std::fs::write(dir.join("energies.json"), en).map_err(|e| invalid(e.to_string()))?;
                }
                let en = model.energies();
                Outcome::new(&json!({
                    "provenance": model.provenance(),
                    "dim": model.dim(),
                    "energy_min": en[0],
                    "energy_max": en[en.len() - 1],
                    "spectral_width": model.spectral_width(),
                    "level_spacing_ratio": model.level_spacing_ratio(),
                    "basis_unitarity_residual": model.basis_unitarity_residual(),
                    "resonance": res,
                    "observables": model.observable_names(),
                    "beta": m.beta,
                    "log_z": st.log_z,
                    "effective_dimension": st.effective_dimension(),
                }))
            });
            ("eth build".into(), plan)
        }
        EthCommand::Cumulant(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let p = pair(&a.pair, r)?;
            let t: f64 = r.get("t", a.t, 0.0)?;
            let distinct = r.switch("distinct", a.distinct)?;
            let (na, nb) = p.names(&m);
            let k = p.k;
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let st = ThermalState::new(&model, m.beta)?;
                let ops = vec![model.observable(&na)?, model.observable(&nb)?];
                let kappa = thermal_free_cumulant(&model, &st, &ops, &otoc_word(k, t))?;
                let d = if distinct {
                    Some(distinct_index_cumulant(&SpectralContext::new(&model, &st, ops)?, k, t)?)
                } else {
                    None
                };
                Outcome::new(&json!({
                    "k": k, "t": t, "a": na, "b": nb, "kappa": kappa, "distinct_index": d,
                    "effective_dimension": st.effective_dimension(),
                }))
            });
            ("eth cumulant".into(), plan)
        }
        EthCommand::Timeavg(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let p = pair(&a.pair, r)?;
            let quantity: String = r.get("quantity", a.quantity.clone(), "kappa".into())?;
            let window: String = r.get("window", a.window.clone(), "strict".into())?;
            let t_max: Vec<f64> = if window == "finite" { r.list("t-max", a.t_max.clone(), "10")? } else { vec![] };
            if quantity != "kappa" && quantity != "otoc" {
                return Err(invalid(format!("unknown quantity {quantity}")));
            }
            if window != "strict" && window != "finite" {
                return Err(invalid(format!("unknown window {window}")));
            }
            for &t in &t_max {
                TimeWindow::finite(t)?;
            }
            let (na, nb) = p.names(&m);
            let k = p.k;
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let st = ThermalState::new(&model, m.beta)?;
                let ctx = SpectralContext::new(&model, &st, vec![model.observable(&na)?, model.observable(&nb)?])?;
                let expr = if quantity == "kappa" {
                    SpectralExpr::cumulant(&otoc_rates(k))?
                } else {
                    SpectralExpr::moment(otoc_rates(k))
                };
                let rows: Vec<(f64, C64)> = if window == "strict" {
                    vec![(f64::INFINITY, time_average(&ctx, &expr, TimeWindow::strict())?)]
                } else {
                    t_max.iter().copied().zip(finite_averages(&ctx, &expr, &t_max)?).collect()
                };
                let values: Vec<_> =
                    rows.iter().map(|(t, v)| json!({ "t_max": if t.is_finite() { json!(t) } else { json!("inf") }, "value": v })).collect();
                Ok(Outcome::new(&json!({
                    "quantity": quantity, "window": window, "k": k, "a": na, "b": nb, "values": values,
                    "effective_dimension": st.effective_dimension(),
                }))?
                .with_table(series_table(&rows)))
            });
            ("eth timeavg".into(), plan)
        }
        EthCommand::Freetime(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let p = pair(&a.pair, r)?;
            let threshold: f64 = r.get("threshold", a.threshold, 0.05)?;
            let grid_s: String = r.get("t-grid", a.t_grid.clone(), "0:20:0.25".into())?;
            let grid = parse_grid(&grid_s)?;
            let (na, nb) = p.names(&m);
            let k = p.k;
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let st = ThermalState::new(&model, m.beta)?;
                let ctx = SpectralContext::new(&model, &st, vec![model.observable(&na)?, model.observable(&nb)?])?;
                let rep = free_k_time(&ctx, k, threshold, &grid)?;
                let table = series_table(&rep.series);
                Ok(Outcome::new(&rep)?.with_table(table))
            });
            ("eth freetime".into(), plan)
        }
        EthCommand::Appendixb(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let p = pair(&a.pair, r)?;
            let window: String = r.get("window", a.window.clone(), "strict".into())?;
            let w = match window.as_str() {
                "strict" => TimeWindow::strict(),
                "finite" => TimeWindow::finite(r.require("t-max", a.t_max)?)?,
                _ => return Err(invalid(format!("unknown window {window}"))),
            };
            let (na, nb) = p.names(&m);
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let st = ThermalState::new(&model, m.beta)?;
                let ctx = SpectralContext::new(&model, &st, vec![model.observable(&na)?, model.observable(&nb)?])?;
                Outcome::new(&appendix_b_factorization(&ctx, w)?)
            });
            ("eth appendixb".into(), plan)
        }
        EthCommand::Deutsch(a) => {
            let m = ModelPlan::resolve(&a.model, r, seed)?;
            let name: String = r.get("a", a.a.clone(), m.default_pair().0.into())?;
            let exponent: f64 = r.get("exponent", a.exponent, 0.5)?;
            let lambdas: Vec<f64> = r.list("lambdas", a.lambdas.clone(), "1,2")?;
            let pseed: u64 = r.get("perturbation-seed", a.perturbation_seed, seed.wrapping_add(1))?;
            let plan: Plan = Box::new(move || {
                let model = m.build()?;
                let spec = DeutschSpec::goe(model.dim(), pseed, exponent, lambdas)?;
                let res = deutsch_ensemble(&model, &spec, model.observable(&name)?, m.beta)?;
                Outcome::new(&res.report)
            });
            ("eth deutsch".into(), plan)
        }
    })
}
