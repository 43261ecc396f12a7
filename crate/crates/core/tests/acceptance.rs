//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
//! status 1 if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use kfree::channel::{channel_asymptotic, channel_exact, DenseHaarChannel};
use kfree::ensemble::{
    channel_distance, channel_monte_carlo, clifford_group, commutant_rank, design_check, k_freeness_test,
    otoc_monte_carlo, pauli_group, time_window_kernel, DenseOperator, EnsembleSpec,
};
use kfree::eth::model::{diagonal, sign_diagonal};
use kfree::eth::thermal::otoc_word;
use kfree::eth::timeavg::{
    appendix_b_factorization, delta_structure_check, distinct_index_bruteforce, distinct_index_cumulant,
    finite_averages, otoc_rates, time_average, SpectralContext, SpectralExpr, TimeWindow,
};
use kfree::eth::{SpectralModel, ThermalState};
use kfree::lattice::{
    catalan, enumerate_nc, inverse_kreweras, kreweras_complement, moebius, set_partitions,
};
use kfree::linalg::{dagger, identity, kron, trace, CMat, TraceFunctional};
use kfree::moments::{cumulant, cumulants_from_moments, free_product_terms, word, MomentTable};
use kfree::perm::geodesic_set;
use kfree::{Letter, NcLattice, Partition, Permutation, WeingartenTable, C64};

type Check = Result<(bool, String), String>;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = Array2::from_shape_fn((d, d), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&g + &dagger(&g)) * c(0.5)
}

fn cycle_type(p: &Permutation) -> String {
    let mut lens: Vec<usize> = p.cycles().cycles.iter().map(|c| c.len()).filter(|&l| l > 1).collect();
    lens.sort_unstable_by(|a, b| b.cmp(a));
    format!("({})", lens.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","))
}

// 1. Weingarten golden values and exact inversion.
fn weingarten_golden() -> Check {
    let golden: Value = serde_json::from_str(include_str!("golden/weingarten_small.json")).map_err(e)?;
    let mut compared = 0;
    for k in 1..=3usize {
        for row in golden[k.to_string()].as_array().ok_or("golden file layout")? {
            let d = row["dim"].as_u64().ok_or("golden dim")?;
            let t = WeingartenTable::new(k, d).map_err(e)?;
            let perms = t.permutations().to_vec();
            for (i, a) in perms.iter().enumerate() {
                for (j, b) in perms.iter().enumerate() {
                    let class = cycle_type(&a.inverse().compose(b).map_err(e)?);
                    let want: BigRational = row["classes"][&class].as_str().ok_or("golden class")?.parse().map_err(e)?;
                    if t.entry_idx(i, j) != want {
                        return Ok((false, format!("k={k} D={d} ({a},{b}): {} vs golden {want}", t.entry_idx(i, j))));
                    }
                    compared += 1;
                }
            }
        }
    }
    // The k = 2 matrix as displayed: Wg = [[D, -1], [-1, D]] / (D (D^2 - 1)).
    for d in 3..=8i64 {
        let t = WeingartenTable::new(2, d as u64).map_err(e)?;
        let den = BigInt::from(d * (d * d - 1));
        let shown = [[d, -1], [-1, d]];
        for i in 0..2 {
            for j in 0..2 {
                if t.entry_idx(i, j) != BigRational::new(BigInt::from(shown[i][j]), den.clone()) {
                    return Ok((false, format!("k=2 D={d} differs from the displayed matrix")));
                }
            }
        }
    }
    let mut inverses = 0;
    for k in 1..=5usize {
        for d in k as u64..=12 {
            let t = WeingartenTable::new(k, d).map_err(e)?;
            if !t.verify_inverse() || !group_row_inverse(&t).map_err(e)? {
                return Ok((false, format!("Wg Q != I at k={k} D={d}")));
            }
            inverses += 1;
        }
    }
    Ok((true, format!("{compared} golden entries bit-exact, Wg Q = I exactly for {inverses} tables")))
}

/// Independent exact check: rows are left translates of the identity row, and
/// the identity row times Q is `denominator * e_id` in integers.
fn group_row_inverse(t: &WeingartenTable) -> kfree::Result<bool> {
    let perms = t.permutations();
    let id = perms.iter().position(|p| p.is_identity()).expect("identity present");
    let rank: BTreeMap<Vec<usize>, usize> = perms.iter().enumerate().map(|(i, p)| (p.images().to_vec(), i)).collect();
    for (i, a) in perms.iter().enumerate() {
        for (j, b) in perms.iter().enumerate() {
            let rel = rank[a.inverse().compose(b)?.images()];
            if t.numerator(i, j) != t.numerator(id, rel) {
                return Ok(false);
            }
        }
    }
    let d = BigInt::from(t.dim());
    for (g, gamma) in perms.iter().enumerate() {
        let mut s = BigInt::zero();
        for (j, b) in perms.iter().enumerate() {
            let cycles = b.inverse().compose(gamma)?.num_cycles();
            s += t.numerator(id, j) * num_traits::pow(d.clone(), cycles);
        }
        let want = if g == id { t.common_denominator().clone() } else { BigInt::zero() };
        if s != want {
            return Ok(false);
        }
    }
    Ok(true)
}

// 2. Cumulant formulas.
fn brute_cumulant(w: &[usize], m: &dyn Fn(&[usize]) -> C64) -> C64 {
    // kappa_n = m_n - sum over non-crossing pi < 1 of prod kappa(blocks).
    let n = w.len();
    let mut acc = m(w);
    for p in set_partitions(n) {
        if p.num_blocks() == 1 || !p.is_noncrossing() {
            continue;
        }
        let mut term = c(1.0);
        for b in p.blocks() {
            let sub: Vec<usize> = b.iter().map(|&i| w[i]).collect();
            term *= brute_cumulant(&sub, m);
        }
        acc -= term;
    }
    acc
}

fn cumulant_formulas() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mv: Vec<C64> = (0..4).map(|_| C64::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() - 0.5)).collect();
        let f = MomentTable::univariate(&mv);
        let (m1, m2, m3, m4) = (mv[0], mv[1], mv[2], mv[3]);
        let k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
        let k4 = m4 - 2.0 * m2 * m2 - 4.0 * m1 * m3 + 10.0 * m1 * m1 * m2 - 5.0 * m1.powi(4);
        let got3 = cumulant(&word(&[0, 0, 0]), &f).map_err(e)?;
        let got4 = cumulant(&word(&[0, 0, 0, 0]), &f).map_err(e)?;
        worst = worst.max((got3 - k3).norm()).max((got4 - k4).norm());
    }
    // Mixed words with distinct letters against a direct recursion.
    let words: Vec<Vec<usize>> = (1u32..16)
        .map(|mask| (0..4).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    let mut random = BTreeMap::new();
    for w in &words {
        random.insert(w.clone(), C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    }
    let table_of = |vals: &BTreeMap<Vec<usize>, C64>| {
        let mut t = MomentTable::new(false);
        for (w, v) in vals {
            t.insert(word(w), *v);
        }
        t
    };
    let f = table_of(&random);
    let lookup = |w: &[usize]| random[&w.to_vec()];
    for w in [vec![0, 1, 2], vec![0, 1, 2, 3]] {
        let set = cumulants_from_moments(&word(&w), &f).map_err(e)?;
        let oracle = brute_cumulant(&w, &lookup);
        worst = worst.max((set.full() - oracle).norm());
    }
    let semi: Vec<C64> = (1..=10).map(|n| if n % 2 == 1 { c(0.0) } else { c(catalan(n / 2) as f64) }).collect();
    let sf = MomentTable::univariate(&semi);
    let mut semi_worst: f64 = 0.0;
    for n in 3..=10 {
        semi_worst = semi_worst.max(cumulant(&word(&vec![0; n]), &sf).map_err(e)?.norm());
    }
    let k2 = cumulant(&word(&[0, 0]), &sf).map_err(e)?;
    let ok = worst <= 1e-12 && semi_worst <= 1e-12 && (k2 - 1.0).norm() <= 1e-12;
    Ok((ok, format!("max formula error {worst:.1e}, semicircle max |kappa_n>=3| {semi_worst:.1e}")))
}

// 3. Channel consistency.
fn channel_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ops: Vec<CMat> = (0..3)
        .map(|i| random_hermitian(5, &mut rng) + kfree::linalg::identity(5) * c(0.7 + 0.2 * i as f64))
        .collect();
    let f = TraceFunctional::new(ops).map_err(e)?;
    let dims = [16u64, 32, 64, 128];
    let mut worst_slope: f64 = 0.0;
    let mut slopes = Vec::new();
    for k in 1..=3usize {
        let letters: Vec<Letter> = (0..k).map(Letter::new).collect();
        let mut rel: Vec<Vec<f64>> = vec![];
        for &d in &dims {
            let ex = channel_exact(k, d, &letters, &f).map_err(e)?;
            let asy = channel_asymptotic(k, d, &letters, &f).map_err(e)?;
            rel.push(ex.coeffs.iter().zip(&asy.coeffs).map(|(x, y)| (x - y).norm() / y.norm()).collect());
        }
        for a in 0..rel[0].len() {
            let ys: Vec<f64> = rel.iter().map(|r| r[a]).collect();
            if k == 1 {
                if ys.iter().any(|&y| y > 1e-12) {
                    return Ok((false, format!("k=1 exact and asymptotic differ by {ys:?}")));
                }
                continue;
            }
            let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
            let s = loglog_slope(&xs, &ys);
            worst_slope = worst_slope.max((s + 2.0).abs());
            slopes.push(s);
        }
    }
    // k = 2, D = 2, traceless A with <A^2> = 1.
    let x = ndarray::array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
    let fx = TraceFunctional::new(vec![x.clone()]).map_err(e)?;
    let ex = channel_exact(2, 2, &[Letter::new(0), Letter::new(0)], &fx).map_err(e)?;
    let want = [-1.0 / 3.0, 2.0 / 3.0];
    let exact_ok = ex.coeffs.iter().zip(want).all(|(v, w)| (v - w).norm() < 1e-14);
    // Dense Haar averaging of U^{†⊗2} (X⊗X) U^{⊗2} in 20 independent batches,
    // entry by entry against -1/3 I + 2/3 SWAP.
    let o = kron(&x, &x);
    let swap = kfree::channel::PermutationOperator::new(Permutation::from_one_line(&[2, 1]).map_err(e)?, 2)
        .to_dense()
        .map_err(e)?;
    let target = identity(4) * c(want[0]) + swap * c(want[1]);
    let mut batches = Vec::new();
    for b in 0..20u64 {
        let ens = EnsembleSpec::haar(2, 1000 + b).map_err(e)?;
        batches.push(channel_monte_carlo(&ens, 2, &o, 2000).map_err(e)?);
    }
    let n = batches.len() as f64;
    let mut mc_ok = true;
    let mut worst_z = 0.0f64;
    let mut max_se = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let vals: Vec<C64> = batches.iter().map(|m| m[[i, j]]).collect();
            let mean = vals.iter().sum::<C64>() / n;
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let dev = (mean - target[[i, j]]).norm();
            // Entries fixed by symmetry have zero spread and must match to rounding.
            mc_ok &= dev <= 4.0 * se + 1e-12;
            max_se = max_se.max(se);
            if se > 0.0 {
                worst_z = worst_z.max(dev / se);
            }
        }
    }
    let detail = format!(" worst entry {worst_z:.2} sigma, max standard error {max_se:.1e}");
    let ok = worst_slope <= 0.3 && exact_ok && mc_ok;
    let (lo, hi) = slopes.iter().fold((f64::MAX, f64::MIN), |(l, h), &s| (l.min(s), h.max(s)));
    Ok((ok, format!("relative-error slopes in [{lo:.3}, {hi:.3}], D=2 exact {exact_ok}, Monte Carlo{detail}")))
}

// 4. Haar OTOC factorization and the eight-point term structure.
fn otoc_factorization() -> Check {
    let d = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let av: Vec<f64> = (0..d).map(|i| if i < 32 { 1.3 } else { 0.3 }).collect();
    let bv: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
    let mean = |v: &[f64], p: i32| v.iter().map(|x| x.powi(p)).sum::<f64>() / v.len() as f64;
    let (a1, a2, b1, b2) = (mean(&av, 1), mean(&av, 2), mean(&bv, 1), mean(&bv, 2));
    let formula = a2 * b1 * b1 + b2 * a1 * a1 - b1 * b1 * a1 * a1;
    let a = DenseOperator::new(diagonal(&av)).map_err(e)?;
    let b = DenseOperator::new(diagonal(&bv)).map_err(e)?;
    let est = otoc_monte_carlo(&EnsembleSpec::haar(d, 4).map_err(e)?, &a, &b, 2, 10_000).map_err(e)?;
    let mc_ok = (est.estimate - formula).norm() <= 3.0 * est.std_error;
    let (terms_ok, terms_detail) = eight_point_terms().map_err(e)?;
    Ok((
        mc_ok && terms_ok,
        format!(
            "MC {:.6} ± {:.1e} vs formula {formula:.6} ({:.2} sigma); {terms_detail}",
            est.estimate.re,
            est.std_error,
            (est.estimate - formula).norm() / est.std_error
        ),
    ))
}

fn orbit(p: &Partition) -> BTreeSet<String> {
    (0..p.n()).map(|s| p.rotate(s).to_string()).collect()
}

fn one_based(blocks: &[&[usize]]) -> kfree::Result<Partition> {
    Partition::from_one_based(4, &blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>())
}

/// The displayed eight-point expansion, one representative per class with its
/// number of companions; the first B factor is read as <B1 B2 B3 B4>.
fn eight_point_terms() -> kfree::Result<(bool, String)> {
    let shown: Vec<(Partition, Partition, usize)> = vec![
        (one_based(&[&[1], &[2], &[3], &[4]])?, one_based(&[&[1, 2, 3, 4]])?, 0),
        (one_based(&[&[1, 2], &[3], &[4]])?, one_based(&[&[1, 2, 3], &[4]])?, 3),
        (one_based(&[&[1, 2], &[3, 4]])?, one_based(&[&[1, 3], &[2], &[4]])?, 1),
        (one_based(&[&[1, 2, 3], &[4]])?, one_based(&[&[1, 4], &[2], &[3]])?, 3),
        (one_based(&[&[1, 2, 3, 4]])?, one_based(&[&[1], &[2], &[3], &[4]])?, 0),
    ];
    let ours = free_product_terms(4)?;
    let mut used = BTreeSet::new();
    for (pa, pb, extra) in &shown {
        let oa = orbit(pa);
        let matched: Vec<_> = ours.iter().filter(|t| oa.contains(&t.a_partition.to_string())).collect();
        let a_set: BTreeSet<String> = matched.iter().map(|t| t.a_partition.to_string()).collect();
        let b_set: BTreeSet<String> = matched.iter().map(|t| t.b_partition.to_string()).collect();
        if matched.len() != 1 + extra || a_set != oa || b_set != orbit(pb) {
            return Ok((false, format!("class of {pa} does not match: {} terms", matched.len())));
        }
        used.extend(a_set);
    }
    let rest: Vec<_> = ours.iter().filter(|t| !used.contains(&t.a_partition.to_string())).collect();
    let omitted = orbit(&one_based(&[&[1, 3], &[2], &[4]])?);
    let rest_a: BTreeSet<String> = rest.iter().map(|t| t.a_partition.to_string()).collect();
    let ok = ours.len() == catalan(4) as usize && rest_a == omitted && rest.len() == 2;
    Ok((ok, format!("{} terms: 12 in the displayed classes, {} in the pair class {{1,3}}", ours.len(), rest.len())))
}

// 5. k-freeness under Haar conjugation.
fn haar_k_freeness() -> Check {
    let d = 256;
    let x = (1.0f64 / 7.0).sqrt();
    let av: Vec<f64> = (0..d).map(|i| if i < 32 { 7.0 * x } else { -x }).collect();
    let bv: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let a = DenseOperator::new(diagonal(&av)).map_err(e)?;
    let b = DenseOperator::new(diagonal(&bv)).map_err(e)?;
    let est = k_freeness_test(&EnsembleSpec::haar(d, 5).map_err(e)?, &a, &b, 2, 4000).map_err(e)?;
    let bound = (5.0 / d as f64).max(4.0 * est.std_error);
    let v = est.estimate.norm();
    Ok((v <= bound, format!("|kappa_4| = {v:.2e}, bound {bound:.2e} (sigma {:.1e})", est.std_error)))
}

// 6. Design checks with a frame-potential oracle.
fn frame_potential(us: &[CMat], k: usize) -> f64 {
    let n = us.len() as f64;
    let mut acc = 0.0;
    for u in us {
        for v in us {
            acc += trace(&dagger(u).dot(v)).norm().powi(2 * k as i32);
        }
    }
    acc / (n * n)
}

fn design_checks() -> Check {
    let pauli = EnsembleSpec::uniform(pauli_group(), 0).map_err(e)?;
    let cliff = EnsembleSpec::uniform(clifford_group(), 0).map_err(e)?;
    let p1 = design_check(&pauli, 1, 1e-10).map_err(e)?;
    let p2 = design_check(&pauli, 2, 1e-10).map_err(e)?;
    let c3 = design_check(&cliff, 3, 1e-10).map_err(e)?;
    let fp_p1 = frame_potential(&pauli_group(), 1) - commutant_rank(1, 2).map_err(e)? as f64;
    let fp_p2 = frame_potential(&pauli_group(), 2) - commutant_rank(2, 2).map_err(e)? as f64;
    let fp_c3 = frame_potential(&clifford_group(), 3) - commutant_rank(3, 2).map_err(e)? as f64;
    let oracle = fp_p1.abs() < 1e-10 && fp_p2 > 0.5 && fp_c3.abs() < 1e-10;
    let ok = p1.is_design && !p2.is_design && c3.is_design && c3.max_deviation <= 1e-10 && oracle
        && clifford_group().len() == 24;
    Ok((
        ok,
        format!(
            "Pauli k=1 {} (dev {:.1e}), k=2 {} (dev {:.2}); Clifford k=3 {} (dev {:.1e}); frame potential excess {fp_p1:.1e}, {fp_p2:.2}, {fp_c3:.1e}",
            p1.is_design, p1.max_deviation, p2.is_design, p2.max_deviation, c3.is_design, c3.max_deviation
        ),
    ))
}

// 7. Channel distance of the Hamiltonian time-average ensemble.
fn distance_oracle(model: &SpectralModel, k: usize, t_max: f64) -> kfree::Result<f64> {
    // Superoperators compared on matrix units of the product eigenbasis.
    let d = model.dim();
    let n = d.pow(k as u32);
    let en = model.energies();
    let sums: Vec<f64> = (0..n)
        .map(|mut i| {
            let mut s = 0.0;
            for _ in 0..k {
                s += en[i % d];
                i /= d;
            }
            s
        })
        .collect();
    let haar = DenseHaarChannel::new(k, d)?;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut unit: CMat = Array2::zeros((n, n));
            unit[[i, j]] = c(1.0);
            let mut diff = haar.apply(&unit)?;
            diff[[i, j]] -= time_window_kernel(sums[i] - sums[j], t_max);
            acc += diff.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
    }
    Ok(acc.sqrt())
}

fn distance_scaling() -> Check {
    let t_max = 1e6;
    let dims = [4usize, 8, 16];
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 1..=2usize {
        let fact: f64 = (1..=k).map(|x| x as f64).product();
        let mut ds = Vec::new();
        for &d in &dims {
            let model = SpectralModel::goe(d, 70 + d as u64).map_err(e)?;
            let ens = EnsembleSpec::hamiltonian(&model, t_max, 1000, 7).map_err(e)?;
            let dist = channel_distance(&ens, k).map_err(e)?;
            let reference = fact.sqrt() * (d as f64).powf(k as f64 / 2.0);
            let ratio = dist / reference;
            ok &= (0.5..=2.0).contains(&ratio);
            if d == 4 {
                let oracle = distance_oracle(&model, k, t_max).map_err(e)?;
                ok &= (oracle - dist).abs() <= 1e-8 * dist.max(1.0);
            }
            ds.push(dist);
            detail.push(format!("k={k} D={d} ratio {ratio:.3}"));
        }
        let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
        let s = loglog_slope(&xs, &ds);
        ok &= (s - k as f64 / 2.0).abs() <= 0.3;
        detail.push(format!("k={k} slope {s:.3}"));
    }
    Ok((ok, detail.join(", ")))
}

fn goe_with_signs(d: usize, seed: u64) -> kfree::Result<SpectralModel> {
    let mut m = SpectralModel::goe(d, seed)?;
    m.add_observable("a", &sign_diagonal(d, d / 2)?)?;
    m.add_observable("b", &sign_diagonal(d, 1)?)?;
    Ok(m)
}

// 8. Long-time freeness under GOE dynamics.
fn eth_long_time() -> Check {
    let d = 512;
    let m = goe_with_signs(d, 11).map_err(e)?;
    let expr = SpectralExpr::cumulant(&otoc_rates(2)).map_err(e)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for beta in [0.0, 1.0 / m.spectral_width()] {
        let st = ThermalState::new(&m, beta).map_err(e)?;
        let ctx = SpectralContext::by_name(&m, &st, &["a", "b"]).map_err(e)?;
        let strict = time_average(&ctx, &expr, TimeWindow::strict()).map_err(e)?;
        let bound = 10.0 / st.effective_dimension();
        ok &= strict.norm() <= bound;
        detail.push(format!("beta {beta:.3}: |avg kappa_4| {:.1e} <= {bound:.1e}", strict.norm()));
        if beta == 0.0 {
            let ts = [2.0, 4.0, 8.0, 16.0];
            let fin = finite_averages(&ctx, &expr, &ts).map_err(e)?;
            let gaps: Vec<f64> = fin.iter().map(|v| (v - strict).norm()).collect();
            let s = loglog_slope(&ts, &gaps);
            ok &= (s + 1.0).abs() <= 0.3;
            detail.push(format!("finite-window slope {s:.3}"));
        }
    }
    Ok((ok, detail.join("; ")))
}

// 9. Distinct-index identity.
fn distinct_index() -> Check {
    let mut worst: f64 = 0.0;
    for (d, seed, beta, t) in [(24usize, 90u64, 0.0, 0.0), (40, 91, 0.4, 0.7), (60, 92, 0.0, 1.3)] {
        let m = goe_with_signs(d, seed).map_err(e)?;
        let st = ThermalState::new(&m, beta).map_err(e)?;
        let ctx = SpectralContext::by_name(&m, &st, &["a", "b"]).map_err(e)?;
        let ie = distinct_index_cumulant(&ctx, 2, t).map_err(e)?;
        let brute = distinct_index_bruteforce(&ctx, &otoc_word(2, t)).map_err(e)?;
        worst = worst.max((ie - brute).norm());
    }
    let d = 512;
    let m = goe_with_signs(d, 12).map_err(e)?;
    let st = ThermalState::new(&m, 0.0).map_err(e)?;
    let ctx = SpectralContext::by_name(&m, &st, &["a", "b"]).map_err(e)?;
    let di = distinct_index_cumulant(&ctx, 2, 0.0).map_err(e)?;
    let kappa = cumulant(&otoc_word(2, 0.0), &ctx.functional()).map_err(e)?;
    let diff = (di - kappa).norm();
    let ok = worst <= 1e-10 && diff <= 10.0 / d as f64;
    Ok((
        ok,
        format!(
            "inclusion-exclusion vs brute force {worst:.1e}; D=512 |distinct - kappa_4| = {diff:.4} (x D = {:.2}), band {:.4}",
            diff * d as f64,
            10.0 / d as f64
        ),
    ))
}

// 10. Factorization gap of the time-averaged two-point function.
fn appendix_b() -> Check {
    let dims = [64usize, 128, 256, 512];
    let mut gaps = Vec::new();
    let mut crossing_ok = true;
    for &d in &dims {
        let m = goe_with_signs(d, 13).map_err(e)?;
        let st = ThermalState::new(&m, 0.0).map_err(e)?;
        let ctx = SpectralContext::by_name(&m, &st, &["a", "b"]).map_err(e)?;
        let r = appendix_b_factorization(&ctx, TimeWindow::strict()).map_err(e)?;
        crossing_ok &= (r.gap - r.crossing).norm() <= 1e-12;
        gaps.push(r.gap.norm());
    }
    let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
    let s = loglog_slope(&xs, &gaps);
    let m = SpectralModel::goe(16, 14).map_err(e)?;
    let rep = delta_structure_check(m.energies().as_slice().ok_or("energies")?, m.default_resonance_tol());
    let delta_ok = rep.resonance_mismatches == 0 && rep.weight_mismatches == 0 && rep.resonant > 0;
    let ok = (s + 1.0).abs() <= 0.3 && delta_ok && crossing_ok;
    let scaled: Vec<String> = gaps.iter().zip(&dims).map(|(g, &d)| format!("{:.2}", g * (d * d) as f64)).collect();
    Ok((
        ok,
        format!(
            "gap slope {s:.3} (gap x D^2 = {}); gap equals crossing sum {crossing_ok}; D=16 delta structure: {} resonant of {} tuples, {} + {} mismatches",
            scaled.join(", "),
            rep.resonant,
            rep.tuples,
            rep.resonance_mismatches,
            rep.weight_mismatches
        ),
    ))
}

// 11. Combinatorial suites.
fn combinatorics() -> Check {
    for n in 1..=10 {
        if enumerate_nc(n).map_err(e)?.len() as u64 != catalan(n) {
            return Ok((false, format!("|NC({n})| != Catalan({n})")));
        }
    }
    let mut checked = 0usize;
    for n in 1..=7 {
        let lat = NcLattice::new(n).map_err(e)?;
        let ps = lat.partitions();
        // Zeta inversion: sum over sigma <= tau <= pi of mu(sigma, tau) = [sigma = pi].
        for s in ps {
            for p in ps {
                if !s.leq(p).map_err(e)? {
                    continue;
                }
                let mut acc = 0i64;
                for t in ps {
                    if s.leq(t).map_err(e)? && t.leq(p).map_err(e)? {
                        acc += moebius(s, t).map_err(e)?;
                    }
                }
                if acc != i64::from(s == p) {
                    return Ok((false, format!("zeta inversion fails at {s} <= {p}")));
                }
                checked += 1;
            }
        }
        let images: BTreeSet<String> = ps.iter().map(|p| kreweras_complement(p).map(|k| k.to_string())).collect::<Result<_, _>>().map_err(e)?;
        if images.len() != ps.len() {
            return Ok((false, format!("Kreweras map is not a bijection on NC({n})")));
        }
        for p in ps {
            let k = kreweras_complement(p).map_err(e)?;
            if p.num_blocks() + k.num_blocks() != n + 1 || inverse_kreweras(&k).map_err(e)? != *p {
                return Ok((false, format!("Kreweras identity fails at {p}")));
            }
        }
    }
    for k in 1..=6 {
        let geo = geodesic_set(&Permutation::long_cycle(k)).map_err(e)?;
        let parts: BTreeSet<String> = geo
            .iter()
            .map(|g| g.to_noncrossing().map(|p| p.to_string()).map_err(|r| r.to_string()))
            .collect::<Result<_, _>>()?;
        let nc: BTreeSet<String> = enumerate_nc(k).map_err(e)?.iter().map(|p| p.to_string()).collect();
        let back = geo.iter().all(|g| Permutation::from_noncrossing(&g.to_noncrossing().unwrap()) == *g);
        if geo.len() != nc.len() || parts != nc || !back {
            return Ok((false, format!("geodesic set of the long cycle does not match NC({k})")));
        }
    }
    Ok((true, format!("Catalan n<=10, {checked} Moebius intervals, Kreweras n<=7, geodesic bijection k<=6")))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("weingarten golden values", Duration::from_secs(10), weingarten_golden),
        ("cumulant formulas", Duration::from_secs(1), cumulant_formulas),
        ("channel consistency", Duration::from_secs(60), channel_consistency),
        ("haar otoc factorization", Duration::from_secs(120), otoc_factorization),
        ("haar k-freeness", Duration::from_secs(120), haar_k_freeness),
        ("design checks", Duration::from_secs(30), design_checks),
        ("channel distance scaling", Duration::from_secs(300), distance_scaling),
        ("eth long-time freeness", Duration::from_secs(300), eth_long_time),
        ("distinct-index identity", Duration::from_secs(300), distinct_index),
        ("time-averaged factorization gap", Duration::from_secs(300), appendix_b),
        ("combinatorial suites", Duration::from_secs(30), combinatorics),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((p, d)) => (p && took <= limit, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !pass {
            failed += 1;
        }
        let status = if pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {name}: {detail} [{:.1}s of {}s]", i + 1, took.as_secs_f64(), limit.as_secs());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}

