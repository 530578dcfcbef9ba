//! Numerical checks of the structure behind the moment formulas: local and global
//! relations, Hecke-algebra identities, shift invariance of cut heights, and Monte
//! Carlo estimates against exact moments.
//!
//! Every check returns a [`CheckReport`]; none of them panics on a mismatch.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hecke::{apply_t, kappa_all, z_partition, HeckeTPi, Permutation, PointFunction, Variant};
use crate::lattice::{height_in, Color, ColorComposition, Cut, DualPoint, EdgeView, ModelParams, SkewDomain, Step, UpLeftPath};
use crate::qmoments::{
    base_case_exact, base_case_integral, beta_moment, build_contours, iterated_integral, permute_colors, polymer_point, qmoment_higher_spin,
    qmoment_higher_spin_kappa, qmoment_qhahn, qmoment_skew, qmoment_skew_many, shifted_coefficient, shifted_observable_exact, shifted_observable_value,
    MomentQuery, MomentResult, PoleSpec, QuadOptions,
};
use crate::sampler::{
    enumerate_sc6v, polymer_mean, sample_mean, GridSampler, HigherSpinSampler, MeanAccumulator, Plan, PolymerParams, QHahnParams, QHahnSampler, Sc6vSampler,
    WeightedEnsemble,
};
use crate::weights::{l_outcomes, qhahn_split_weight, r_outcomes, r_weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    /// Largest discrepancy found. Statistical checks report the discrepancy of their worst case.
    pub max_abs_error: f64,
    /// The bound `max_abs_error` was held to.
    pub tolerance: f64,
    pub cases: usize,
    pub details: String,
    pub seed: Option<u64>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_abs_error: f64, tolerance: f64, cases: usize) -> Self {
        let status = if max_abs_error <= tolerance { Status::Pass } else { Status::Fail };
        CheckReport { name: name.into(), status, max_abs_error, tolerance, cases, details: String::new(), seed: None }
    }

    pub fn with_details(mut self, details: impl Into<String>) -> Self {
        self.details = details.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Worst case of a sweep.
#[derive(Default)]
struct Worst {
    err: f64,
    case: String,
    cases: usize,
}

impl Worst {
    fn push(&mut self, err: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        if (err.is_nan() && !self.err.is_nan()) || err > self.err {
            self.err = err;
            self.case = case();
        }
    }

    fn report(self, name: &str, tol: f64, seed: u64) -> CheckReport {
        let details = if self.case.is_empty() { String::new() } else { format!("worst case: {}", self.case) };
        CheckReport::new(name, self.err, tol, self.cases).with_details(details).with_seed(seed)
    }
}

/// Worst z-score of a set of statistical comparisons.
#[derive(Default)]
struct WorstZ {
    z: f64,
    diff: f64,
    sigma: f64,
    case: String,
    cases: usize,
}

impl WorstZ {
    fn push(&mut self, diff: f64, sigma: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        let z = if sigma > 0.0 {
            diff.abs() / sigma
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        if z.is_nan() || z >= self.z {
            self.z = if z.is_nan() { f64::INFINITY } else { z };
            self.diff = diff.abs();
            self.sigma = sigma;
            self.case = case();
        }
    }

    fn report(self, name: &str, z_max: f64, seed: u64) -> CheckReport {
        let tol = if self.sigma > 0.0 { z_max * self.sigma } else { 1e-12 };
        let mut r = CheckReport::new(name, self.diff, tol, self.cases).with_details(format!("worst z-score {:.3} at {}", self.z, self.case)).with_seed(seed);
        if self.z > z_max {
            r.status = Status::Fail;
        }
        r
    }
}

/// Runs a statistical check and, if it fails, once more with four times the samples
/// and a fresh seed.
pub fn with_rerun(samples: usize, seed: u64, run: impl Fn(usize, u64) -> Result<CheckReport>) -> Result<CheckReport> {
    let first = run(samples, seed)?;
    if first.passed() {
        return Ok(first);
    }
    let reseed = seed ^ 0x005e_ed0f_4a11_u64;
    let mut second = run(4 * samples, reseed)?;
    second.details = format!("{} (rerun at {} samples after failing at {samples}: {})", second.details, 4 * samples, first.details);
    Ok(second)
}

fn random_colors(rng: &mut ChaCha8Rng, r: usize, n: Color) -> Vec<Color> {
    let mut c: Vec<Color> = (0..r).map(|_| rng.gen_range(0..=n)).collect();
    c.sort_unstable();
    c
}

/// Random `h_{>c}` for `c = 0..=n`, nonincreasing in `c`.
fn random_heights(rng: &mut ChaCha8Rng, n: Color) -> Vec<u32> {
    let n = n as usize;
    let mut h = vec![0u32; n + 1];
    h[n] = rng.gen_range(0..3);
    for c in (0..n).rev() {
        h[c] = h[c + 1] + rng.gen_range(0..3);
    }
    h
}

// ---------------------------------------------------------------------------
// Local relation

/// `a q^{Σ h^se} + Σ_t q^{t-1} (b q^{.. h^sw_{c_t} ..} + c q^{.. h^nw_{c_t} ..})`.
fn corner_combination(colors: &[Color], h_se: &[u32], h_sw: &[u32], h_nw: &[u32], coef: (f64, f64, f64), q: f64) -> f64 {
    let base: u32 = colors.iter().map(|&c| h_se[c as usize]).sum();
    let mut out = coef.0 * q.powi(base as i32);
    for (t, &c) in colors.iter().enumerate() {
        let rest = base - h_se[c as usize];
        out += coef.1 * q.powi((t as u32 + rest + h_sw[c as usize]) as i32);
        out += coef.2 * q.powi((t as u32 + rest + h_nw[c as usize]) as i32);
    }
    out
}

/// Both sides of the local relation at one six-vertex vertex.
///
/// `i` enters from below and `j` from the left, `h_se[c]` is `h_{>c}` at the lower-right
/// corner (`c = 0..=n`) and `colors` is nondecreasing. The left side averages
/// `q^{Σ_t h^{ne}_{>c_t}}` over the vertex outcomes; the right side is the linear
/// combination of the heights at the other three corners.
pub fn local_relation_sides(i: Color, j: Color, colors: &[Color], h_se: &[u32], z: f64, q: f64) -> Result<(f64, f64)> {
    let ind = |a: Color, c: usize| (a as usize > c) as u32;
    let h_sw: Vec<u32> = (0..h_se.len()).map(|c| h_se[c] + ind(i, c)).collect();
    let h_nw: Vec<u32> = (0..h_se.len()).map(|c| h_sw[c] + ind(j, c)).collect();
    let mut lhs = 0.0;
    for (_, l, w) in r_outcomes(i, j, &z, &q)? {
        let e: u32 = colors.iter().map(|&c| h_se[c as usize] + ind(l, c as usize)).sum();
        lhs += w * q.powi(e as i32);
    }
    let r = colors.len() as i32;
    let d = q - z;
    let coef = ((q - q.powi(r) * z) / d, (q * z - 1.0) / d, (1.0 - z) / d);
    Ok((lhs, corner_combination(colors, h_se, &h_sw, &h_nw, coef, q)))
}

/// Both sides of the local relation at a higher-spin vertex `L_u^{(s)}` with the
/// composition `big_i` below and color `j` on the left.
pub fn local_relation_sides_fused(big_i: &ColorComposition, j: Color, colors: &[Color], h_se: &[u32], u: f64, s: f64, q: f64) -> Result<(f64, f64)> {
    let h_sw: Vec<u32> = (0..h_se.len()).map(|c| h_se[c] + big_i.count_gt(c as Color)).collect();
    let h_nw: Vec<u32> = (0..h_se.len()).map(|c| h_sw[c] + (j as usize > c) as u32).collect();
    let mut lhs = 0.0;
    for (_, l, w) in l_outcomes(big_i, j, &u, &s, &q)? {
        let e: u32 = colors.iter().map(|&c| h_se[c as usize] + (l > c) as u32).sum();
        lhs += w * q.powi(e as i32);
    }
    let r = colors.len() as i32;
    let d = 1.0 - s * u;
    let coef = ((1.0 - q.powi(r) * s * u) / d, (q * s * u - s * s) / d, (s * s - s * u) / d);
    Ok((lhs, corner_combination(colors, h_se, &h_sw, &h_nw, coef, q)))
}

/// Random trials of the local relation with `r` colors.
pub fn check_local_relation(r: usize, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        let n: Color = rng.gen_range(1..=5);
        let q = rng.gen_range(0.05..0.95);
        let z = rng.gen_range(1.0..6.0);
        let (i, j) = (rng.gen_range(0..=n), rng.gen_range(0..=n));
        let colors = random_colors(&mut rng, r, n);
        let h = random_heights(&mut rng, n);
        let (lhs, rhs) = local_relation_sides(i, j, &colors, &h, z, q)?;
        worst.push((lhs - rhs).abs(), || format!("i={i} j={j} colors={colors:?} z={z} q={q}: {lhs} vs {rhs}"));
    }
    Ok(worst.report(&format!("local_relation_r{r}"), tol, seed))
}

/// Random trials of the higher-spin local relation with `r` colors.
pub fn check_local_relation_fused(r: usize, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        let n: Color = rng.gen_range(1..=4);
        let q = rng.gen_range(0.05..0.95);
        let s: f64 = rng.gen_range(1.2..3.0);
        let u = loop {
            let u = rng.gen_range(0.2..3.0);
            if (1.0 - s * u).abs() > 0.1 {
                break u;
            }
        };
        let mut counts = vec![0u32; n as usize];
        for _ in 0..rng.gen_range(0..=4) {
            counts[rng.gen_range(0..n as usize)] += 1;
        }
        let big_i = ColorComposition::from_counts(counts);
        let j = rng.gen_range(0..=n);
        let colors = random_colors(&mut rng, r, n);
        let h = random_heights(&mut rng, n);
        let (lhs, rhs) = local_relation_sides_fused(&big_i, j, &colors, &h, u, s, q)?;
        let scale = lhs.abs().max(1.0);
        worst.push((lhs - rhs).abs() / scale, || format!("I={:?} j={j} colors={colors:?} u={u} s={s} q={q}: {lhs} vs {rhs}", big_i.counts));
    }
    Ok(worst.report(&format!("local_relation_fused_r{r}"), tol, seed))
}

// ---------------------------------------------------------------------------
// Global relation

/// `E q^{Σ_a h_{>c_a}(points[π(a)])}` summed over an enumerated ensemble.
pub fn enumerated_moment(ens: &WeightedEnsemble<C64>, q: f64, query: &MomentQuery) -> Result<f64> {
    let mut total = 0.0;
    for (w, g) in &ens.entries {
        let mut e = 0;
        for a in 0..query.k() {
            e += height_in(&ens.domain, g, query.points[query.pi.apply(a + 1) - 1], query.colors[a])?;
        }
        total += w.re * q.powi(e as i32);
    }
    Ok(total)
}

fn nondecreasing_tuples(k: usize, max: Color) -> Vec<Vec<Color>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for mut t in nondecreasing_tuples(k - 1, max) {
        let lo = t.last().copied().unwrap_or(0);
        for c in lo..=max {
            t.push(c);
            out.push(t.clone());
            t.pop();
        }
    }
    out
}

/// Checks the linear relation that removes a corner `v` of the upper path: moments on
/// `P` against moments on `P` with the corner pushed in, both by exact enumeration.
pub fn check_global_relation(domain: &SkewDomain, params: &ModelParams, max_t: usize, tol: f64) -> Result<CheckReport> {
    let q = params.q;
    let ens = enumerate_sc6v(Arc::new(domain.clone()), params)?;
    let steps = &domain.upper().steps;
    let pts = domain.upper().points();
    let max_color = domain.max_color();
    let mut worst = Worst::default();
    for s in 0..steps.len().saturating_sub(1) {
        if !(steps[s] == Step::V && steps[s + 1] == Step::H) {
            continue;
        }
        let (v_se, v_ne, v_nw) = (pts[s], pts[s + 1], pts[s + 2]);
        let v_sw = DualPoint { a2: v_nw.a2, b2: v_se.b2 };
        let mut inner = domain.upper().clone();
        inner.steps.swap(s, s + 1);
        let Ok(small) = SkewDomain::new(domain.lower().clone(), inner, domain.coloring().to_vec()) else {
            continue;
        };
        let small_ens = enumerate_sc6v(Arc::new(small), params)?;
        let col = ((v_ne.a2 - 1) / 2) as usize;
        let row = ((v_ne.b2 - 1) / 2) as usize;
        let z = params.row_rapidities[row - 1] / params.col_rapidities[col - 1];
        let before: Vec<DualPoint> = pts.iter().copied().filter(|p| p.a2 < v_ne.a2 && p.b2 > v_ne.b2).collect();
        let after: Vec<DualPoint> = pts.iter().copied().filter(|p| p.a2 > v_ne.a2 && p.b2 < v_ne.b2).collect();
        let mut extras: Vec<(Option<DualPoint>, bool)> = vec![(None, false)];
        extras.extend(before.iter().map(|p| (Some(*p), true)));
        extras.extend(after.iter().map(|p| (Some(*p), false)));
        for t in 1..=max_t {
            for (extra, is_before) in &extras {
                let k = t + extra.is_some() as usize;
                let r = if *is_before { 2 } else { 1 };
                let layout = |block: &[DualPoint]| -> Vec<DualPoint> {
                    let mut out = Vec::with_capacity(k);
                    if *is_before {
                        out.push(extra.unwrap());
                    }
                    out.extend_from_slice(block);
                    if let (Some(p), false) = (extra, is_before) {
                        out.push(*p);
                    }
                    out
                };
                let block_ne = vec![v_ne; t];
                let block_se = vec![v_se; t];
                let mut block_sw = vec![v_se; t];
                block_sw[0] = v_sw;
                let mut block_nw = vec![v_se; t];
                block_nw[0] = v_nw;
                let d = q - z;
                let (ca, cb, cc) = ((q - q.powi(t as i32) * z) / d, (q * z - 1.0) / d, (1.0 - z) / d);
                for colors in nondecreasing_tuples(k, max_color) {
                    for pi in Permutation::all(k) {
                        let inv = pi.inverse();
                        if (r..r + t - 1).any(|i| inv.apply(i) > inv.apply(i + 1)) {
                            continue;
                        }
                        let qm = |points: Vec<DualPoint>, p: &Permutation| MomentQuery { points, colors: colors.clone(), pi: p.clone() };
                        let lq = q.powi(pi.length() as i32);
                        let lhs = lq * enumerated_moment(&ens, q, &qm(layout(&block_ne), &pi))?;
                        let mut rhs = ca * lq * enumerated_moment(&small_ens, q, &qm(layout(&block_se), &pi))?;
                        for i in 0..t {
                            let word: Vec<usize> = (r..r + i).collect();
                            let sp = Permutation::from_word(&word, k).compose(&pi);
                            let ls = q.powi(sp.length() as i32);
                            rhs += cb * ls * enumerated_moment(&small_ens, q, &qm(layout(&block_sw), &sp))?;
                            rhs += cc * ls * enumerated_moment(&small_ens, q, &qm(layout(&block_nw), &sp))?;
                        }
                        worst.push((lhs - rhs).abs(), || {
                            format!("corner {v_ne}, t={t}, extra={extra:?}, colors={colors:?}, pi={:?}: {lhs} vs {rhs}", pi.images())
                        });
                    }
                }
            }
        }
    }
    Ok(worst.report("global_relation", tol, 0))
}

// ---------------------------------------------------------------------------
// Vertex-weight identities

/// Stochasticity and the Yang–Baxter equation for `R` with colors `0..=n`.
pub fn check_ybe(n: Color, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let range: Vec<Color> = (0..=n).collect();
    for _ in 0..trials {
        let q = rng.gen_range(0.1..0.9);
        let (x, y, z) = (rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0));
        let (xy, xz, yz) = (C64::new(x / y, 0.0), C64::new(x / z, 0.0), C64::new(y / z, 0.0));
        let qc = C64::new(q, 0.0);
        let rw = |i, j, k, l, s: &C64| r_weight(i, j, k, l, s, &qc);
        for &a1 in &range {
            for &a2 in &range {
                for &a3 in &range {
                    for &b1 in &range {
                        for &b2 in &range {
                            for &b3 in &range {
                                let mut sa = [a1, a2, a3];
                                let mut sb = [b1, b2, b3];
                                sa.sort_unstable();
                                sb.sort_unstable();
                                if sa != sb {
                                    continue;
                                }
                                let mut lhs = C64::default();
                                let mut rhs = C64::default();
                                for &k1 in &range {
                                    for &k2 in &range {
                                        for &k3 in &range {
                                            lhs += rw(a2, a3, k2, k3, &xy)? * rw(a1, k3, k1, b3, &xz)? * rw(k1, k2, b1, b2, &yz)?;
                                            rhs += rw(a1, a2, k1, k2, &yz)? * rw(k1, a3, b1, k3, &xz)? * rw(k2, k3, b2, b3, &xy)?;
                                        }
                                    }
                                }
                                worst.push((lhs - rhs).norm(), || format!("a=({a1},{a2},{a3}) b=({b1},{b2},{b3}) x={x} y={y} z={z} q={q}"));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(worst.report("yang_baxter", tol, seed))
}

/// Applies the row operator `C_k(x)` (left input `k`, right output 0) to a vector of column states.
fn apply_row(state: &HashMap<Vec<Color>, f64>, k: Color, x: f64, ys: &[f64], q: f64) -> Result<HashMap<Vec<Color>, f64>> {
    let mut out: HashMap<Vec<Color>, f64> = HashMap::new();
    for (bottom, weight) in state {
        let mut partial: Vec<(Vec<Color>, Color, f64)> = vec![(Vec::with_capacity(bottom.len()), k, *weight)];
        for (col, &b) in bottom.iter().enumerate() {
            let z = x / ys[col];
            let mut next = Vec::with_capacity(partial.len() * 2);
            for (top, left, w) in partial {
                for (kk, l, wt) in r_outcomes(b, left, &z, &q)? {
                    if wt != 0.0 {
                        let mut t = top.clone();
                        t.push(kk);
                        next.push((t, l, w * wt));
                    }
                }
            }
            partial = next;
        }
        for (top, right, w) in partial {
            if right == 0 {
                *out.entry(top).or_default() += w;
            }
        }
    }
    Ok(out)
}

/// The exchange relation between row operators `C_{k1}(x1) C_{k2}(x2)` with `k1 < k2`.
pub fn check_exchange(cols: usize, n: Color, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        let q = rng.gen_range(0.1..0.9);
        let ys: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.5..2.0)).collect();
        let (x1, x2) = (rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0));
        let k1 = rng.gen_range(1..n);
        let k2 = rng.gen_range(k1 + 1..=n);
        let mut bottom = vec![0 as Color; cols];
        loop {
            let start: HashMap<Vec<Color>, f64> = [(bottom.clone(), 1.0)].into_iter().collect();
            let lhs = apply_row(&apply_row(&start, k2, x2, &ys, q)?, k1, x1, &ys, q)?;
            let r1 = apply_row(&apply_row(&start, k1, x1, &ys, q)?, k2, x2, &ys, q)?;
            let r2 = apply_row(&apply_row(&start, k1, x2, &ys, q)?, k2, x1, &ys, q)?;
            let (ca, cb) = ((x2 - q * x1) / (x2 - x1), -x1 * (1.0 - q) / (x2 - x1));
            let tops: BTreeSet<&Vec<Color>> = lhs.keys().chain(r1.keys()).chain(r2.keys()).collect();
            for top in tops {
                let l = lhs.get(top).copied().unwrap_or(0.0);
                let r = ca * r1.get(top).copied().unwrap_or(0.0) + cb * r2.get(top).copied().unwrap_or(0.0);
                worst.push((l - r).abs(), || format!("k=({k1},{k2}) x=({x1},{x2}) bottom={bottom:?} top={top:?}: {l} vs {r}"));
            }
            // Next bottom state in {0..=n}^cols.
            let mut a = 0;
            while a < cols && bottom[a] == n {
                bottom[a] = 0;
                a += 1;
            }
            if a == cols {
                break;
            }
            bottom[a] += 1;
        }
    }
    Ok(worst.report("exchange_relation", tol, seed))
}

/// Row sums of the q-Hahn split law for every composition with at most `max_total` paths.
pub fn check_qhahn_stochasticity(n: usize, max_total: u32, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        let q = rng.gen_range(0.05..0.95);
        let z = rng.gen_range(0.1..0.95);
        let s = rng.gen_range(0.02..z);
        for a in ColorComposition::all_up_to(n, max_total) {
            let mut total = 0.0;
            let mut negative = 0.0f64;
            for d in a.all_below() {
                let w = qhahn_split_weight(&a, &d, &s, &z, &q)?;
                negative = negative.max(-w);
                total += w;
            }
            worst.push((total - 1.0).abs().max(negative), || format!("A={:?} s={s} z={z} q={q}: sum {total}", a.counts));
        }
    }
    Ok(worst.report("qhahn_stochasticity", tol, seed))
}

// ---------------------------------------------------------------------------
// Hecke-algebra identities

fn random_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<C64> {
    (0..k).map(|_| C64::from_polar(rng.gen_range(0.4..2.5), rng.gen_range(0.0..std::f64::consts::TAU))).collect()
}

/// A non-symmetric rational test function.
fn test_function(rng: &mut ChaCha8Rng, k: usize) -> Arc<dyn PointFunction> {
    let a: Vec<C64> = random_point(rng, k);
    let b: Vec<f64> = (0..k).map(|_| rng.gen_range(3.0..5.0)).collect();
    let c: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Arc::new(move |w: &[C64]| -> C64 {
        let mut p = C64::new(1.0, 0.0);
        let mut s = C64::default();
        for i in 0..w.len() {
            p *= (w[i] - a[i]) / (w[i] - b[i]);
            s += c[i] * w[i].powi(i as i32 + 1);
        }
        p + s
    })
}

/// Error relative to `max(1, |b|)`.
fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// `(T_i - q)(T_i + 1) = 0`, the braid relations and far commutation, pointwise on random
/// rational functions.
pub fn check_hecke_relations(k: usize, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let v = Variant::QDeformed;
    for _ in 0..trials {
        let q = rng.gen_range(0.1..0.9);
        let f = test_function(&mut rng, k);
        let w = random_point(&mut rng, k);
        for i in 1..k {
            let ti = apply_t(i, f.clone(), q, v);
            let tti = apply_t(i, ti.clone(), q, v);
            let quad = tti.eval(&w)? - (q - 1.0) * ti.eval(&w)? - q * f.eval(&w)?;
            worst.push(quad.norm() / f.eval(&w)?.norm().max(1.0), || format!("quadratic i={i} q={q} w={w:?}"));
            for j in i + 1..k {
                let (lhs, rhs) = if j == i + 1 {
                    let l = apply_t(i, apply_t(j, apply_t(i, f.clone(), q, v), q, v), q, v);
                    let r = apply_t(j, apply_t(i, apply_t(j, f.clone(), q, v), q, v), q, v);
                    (l.eval(&w)?, r.eval(&w)?)
                } else {
                    let l = apply_t(i, apply_t(j, f.clone(), q, v), q, v);
                    let r = apply_t(j, apply_t(i, f.clone(), q, v), q, v);
                    (l.eval(&w)?, r.eval(&w)?)
                };
                worst.push(rel(lhs, rhs), || format!("braid/commute i={i} j={j} q={q}"));
            }
        }
    }
    Ok(worst.report(&format!("hecke_relations_k{k}"), tol, seed))
}

/// A random reduced word of `pi`, peeling right descents in random order.
pub fn random_reduced_word(pi: &Permutation, rng: &mut impl Rng) -> Vec<usize> {
    let k = pi.k();
    let mut cur = pi.clone();
    let mut word = Vec::with_capacity(pi.length());
    while cur.length() > 0 {
        let descents: Vec<usize> = (1..k).filter(|&i| cur.apply(i) > cur.apply(i + 1)).collect();
        let i = *descents.choose(rng).expect("a nontrivial permutation has a descent");
        word.push(i);
        cur = cur.compose(&Permutation::simple(i, k));
    }
    word.reverse();
    word
}

/// Properties of the expansion coefficients `κ_π^ρ` and of `T_π`, at random points.
///
/// Returns one report per property: the expansion `T_π f = Σ_ρ κ_π^ρ f(w_ρ)`, Bruhat
/// support, vanishing at `w_b = q w_a`, at `w_a = 0` and as `w_a → ∞`, the relation to
/// the partition functions `Z_π^ρ`, and independence of `T_π` from the reduced word.
pub fn check_kappa_properties(k: usize, points: usize, seed: u64, tol: f64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "kappa_expansion",
        "kappa_bruhat_support",
        "kappa_vanishing_qline",
        "kappa_vanishing_zero",
        "kappa_vanishing_infinity",
        "kappa_partition_function",
        "reduced_word_independence",
    ];
    let mut worst: Vec<Worst> = names.iter().map(|_| Worst::default()).collect();
    let perms = Permutation::all(k);
    for _ in 0..points {
        let q = rng.gen_range(0.1..0.9);
        let w = random_point(&mut rng, k);
        let f = test_function(&mut rng, k);
        for pi in &perms {
            let kap = kappa_all(pi, &w, q)?;
            let direct = HeckeTPi::with_word(pi.reduced_word(), f.clone(), q, Variant::QDeformed).eval(&w)?;
            let mut expanded = C64::default();
            for (rho, c) in &kap {
                expanded += c * f.eval(&rho.pull(&w))?;
            }
            worst[0].push(rel(expanded, direct), || format!("pi={:?} q={q}", pi.images()));
            let mut cross = C64::new(1.0, 0.0);
            for a in 0..k {
                for b in a + 1..k {
                    cross *= (w[b] - q * w[a]) / (w[b] - w[a]);
                }
            }
            for rho in &perms {
                let value = kap.get(rho).copied().unwrap_or_default();
                if !rho.bruhat_le(pi) {
                    worst[1].push(value.norm(), || format!("pi={:?} rho={:?}", pi.images(), rho.images()));
                }
                let sign = if (pi.length() + rho.length()) % 2 == 0 { 1.0 } else { -1.0 };
                let via_z = sign * cross * z_partition(pi, rho, &w, q)?;
                worst[5].push(rel(value, via_z), || format!("pi={:?} rho={:?} q={q}", pi.images(), rho.images()));
            }
            for a in 1..=k {
                for b in a + 1..=k {
                    let mut wq = w.clone();
                    wq[b - 1] = q * wq[a - 1];
                    let kq = kappa_all(pi, &wq, q)?;
                    for rho in &perms {
                        let inv = rho.inverse();
                        if inv.apply(a) > inv.apply(b) {
                            let v = kq.get(rho).copied().unwrap_or_default();
                            worst[2].push(v.norm(), || format!("pi={:?} rho={:?} a={a} b={b}", pi.images(), rho.images()));
                        }
                    }
                }
                let mut w0 = w.clone();
                w0[a - 1] = C64::default();
                let k0 = kappa_all(pi, &w0, q)?;
                let mut winf = w.clone();
                winf[a - 1] = C64::from_polar(1e14, rng.gen_range(0.0..std::f64::consts::TAU));
                let kinf = kappa_all(pi, &winf, q)?;
                for rho in &perms {
                    let target = pi.apply(rho.inverse().apply(a));
                    if target < a {
                        let v = k0.get(rho).copied().unwrap_or_default();
                        worst[3].push(v.norm(), || format!("pi={:?} rho={:?} a={a}", pi.images(), rho.images()));
                    } else if target > a {
                        let v = kinf.get(rho).copied().unwrap_or_default();
                        worst[4].push(v.norm(), || format!("pi={:?} rho={:?} a={a}", pi.images(), rho.images()));
                    }
                }
            }
            let word = random_reduced_word(pi, &mut rng);
            let other = HeckeTPi::with_word(word.clone(), f.clone(), q, Variant::QDeformed).eval(&w)?;
            let consistent = Permutation::from_word(&word, k) == *pi && word.len() == pi.length();
            let err = if consistent { rel(other, direct) } else { f64::INFINITY };
            worst[6].push(err, || format!("pi={:?} word={word:?}", pi.images()));
        }
    }
    Ok(worst.into_iter().zip(names).map(|(w, n)| w.report(&format!("{n}_k{k}"), tol, seed)).collect())
}

/// `(q - λq^t)/(q - λ) + Σ_{i<t} T_i ⋯ T_1 g = Π_i (1 - qμw_i)/(1 - μw_i)` with
/// `g(w) = (q-1)(λ - qμw_1) / ((q-λ)(1 - μw_1))`.
pub fn check_hecke_geometric_sum(t_max: usize, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        for t in 1..=t_max {
            let q = rng.gen_range(0.1..0.9);
            let lambda = C64::from_polar(rng.gen_range(0.2..3.0), rng.gen_range(0.0..std::f64::consts::TAU));
            let mu = C64::from_polar(rng.gen_range(0.1..0.3), rng.gen_range(0.0..std::f64::consts::TAU));
            let w = random_point(&mut rng, t);
            let g: Arc<dyn PointFunction> = Arc::new(move |w: &[C64]| (q - 1.0) * (lambda - q * mu * w[0]) / ((q - lambda) * (1.0 - mu * w[0])));
            let mut lhs = (q - lambda * q.powi(t as i32)) / (q - lambda);
            for i in 0..t {
                let word: Vec<usize> = (1..=i).rev().collect();
                lhs += HeckeTPi::with_word(word, g.clone(), q, Variant::QDeformed).eval(&w)?;
            }
            let rhs: C64 = w.iter().map(|&wi| (1.0 - q * mu * wi) / (1.0 - mu * wi)).product();
            worst.push(rel(lhs, rhs), || format!("t={t} q={q} lambda={lambda} mu={mu}"));
        }
    }
    Ok(worst.report("hecke_geometric_sum", tol, seed))
}

/// `Π_j (Y_j - q^{j-m} X_j) = (1-q)^m Σ_τ q^{l(τ) - C(m,2)} Σ_j coef(m,j) Π_{i≤j} X_{τ(i)} Π_{i>j} Y_{τ(i)}`.
pub fn check_symmetrization_identity(m_max: usize, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    for _ in 0..trials {
        for m in 1..=m_max {
            let q: f64 = rng.gen_range(0.1..0.9);
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs: f64 = (1..=m).map(|j| y[j - 1] - q.powi(j as i32 - m as i32) * x[j - 1]).product();
            let mut sum = 0.0;
            for tau in Permutation::all(m) {
                let pre = q.powi(tau.length() as i32 - (m * (m - 1) / 2) as i32);
                for j in 0..=m {
                    let mut p = shifted_coefficient(m as u32, j as u32, q);
                    for i in 1..=m {
                        p *= if i <= j { x[tau.apply(i) - 1] } else { y[tau.apply(i) - 1] };
                    }
                    sum += pre * p;
                }
            }
            let rhs = (1.0 - q).powi(m as i32) * sum;
            worst.push((lhs - rhs).abs() / rhs.abs().max(1.0), || format!("m={m} q={q}: {lhs} vs {rhs}"));
        }
    }
    Ok(worst.report("symmetrization_identity", tol, seed))
}

/// `⟨T_π Φ, Ψ⟩ = ⟨Φ, T_{π^{-1}} Ψ⟩` for products of the base-case factors.
pub fn check_self_adjoint(k: usize, trials: usize, seed: u64, tol: f64, opts: &QuadOptions) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let mut done = 0;
    while done < trials {
        let q = rng.gen_range(0.25..0.5);
        let n = 2;
        let zeta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let l: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n)).collect();
        let f: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n)).collect();
        let spec = PoleSpec {
            q,
            inside: vec![zeta.iter().map(|z| C64::new(1.0 / z, 0.0)).collect(); k],
            excluded: zeta.iter().map(|z| C64::new(1.0 / (q * z), 0.0)).collect(),
        };
        let Ok(family) = build_contours(&spec) else {
            continue;
        };
        let pi = Permutation::all(k).choose(&mut rng).unwrap().clone();
        let (zp, zs) = (zeta.clone(), zeta.clone());
        let phi: Arc<dyn PointFunction> = Arc::new(move |w: &[C64]| -> C64 {
            let mut p = C64::new(1.0, 0.0);
            for a in 0..w.len() {
                for z in &zp[..l[a]] {
                    p *= (1.0 - z * w[a]) / (1.0 - q * z * w[a]);
                }
            }
            p
        });
        let psi: Arc<dyn PointFunction> = Arc::new(move |w: &[C64]| -> C64 {
            let mut p = C64::new(1.0, 0.0);
            for a in 0..w.len() {
                for z in &zs[..f[a]] {
                    p *= (1.0 - q * z * w[a]) / (1.0 - z * w[a]);
                }
            }
            p
        });
        let t_phi = HeckeTPi::with_word(pi.reduced_word(), phi.clone(), q, Variant::QDeformed);
        let t_psi = HeckeTPi::with_word(pi.inverse().reduced_word(), psi.clone(), q, Variant::QDeformed);
        let (phi2, psi2) = (phi.clone(), psi.clone());
        let left = move |w: &[C64]| -> C64 { t_phi.eval(w).unwrap_or(C64::new(f64::NAN, 0.0)) * psi2.eval(w).unwrap_or_default() };
        let right = move |w: &[C64]| -> C64 { phi2.eval(w).unwrap_or_default() * t_psi.eval(w).unwrap_or(C64::new(f64::NAN, 0.0)) };
        let a = iterated_integral(&left, &family, q, opts)?;
        let b = iterated_integral(&right, &family, q, opts)?;
        worst.push(rel(a.value, b.value), || format!("k={k} pi={:?} zeta={zeta:?} q={q}: {} vs {}", pi.images(), a.value, b.value));
        done += 1;
    }
    Ok(worst.report(&format!("self_adjoint_k{k}"), tol, seed))
}

// ---------------------------------------------------------------------------
// Base case

/// The base-case integral against its closed form on random inputs, every `π`.
pub fn check_base_case(cases: usize, k_max: usize, seed: u64, tol: f64, opts: &QuadOptions) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::default();
    let mut done = 0;
    while done < cases {
        let k = rng.gen_range(1..=k_max);
        let n = rng.gen_range(1..=3);
        let q = rng.gen_range(0.2..0.6);
        let mut zeta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..2.5)).collect();
        zeta.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut f: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n)).collect();
        f.sort_unstable_by(|a, b| b.cmp(a));
        let mut l: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n)).collect();
        l.sort_unstable();
        let mut ok = true;
        let mut local = Worst::default();
        for pi in Permutation::all(k) {
            match base_case_integral(&f, &l, &zeta, q, &pi, opts) {
                Ok(v) => {
                    let exact = base_case_exact(&f, &l, q, &pi);
                    local.push((v.value - exact).norm(), || format!("f={f:?} l={l:?} zeta={zeta:?} q={q} pi={:?}: {} vs {exact}", pi.images(), v.value));
                }
                Err(Error::InfeasibleContour(_)) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            let case = local.case.clone();
            worst.cases += local.cases - 1;
            worst.push(local.err, || case);
            done += 1;
        }
    }
    Ok(worst.report("base_case", tol, seed))
}

/// Re-evaluates a contour integral with twice the nodes of the converged rule and with
/// radii scaled by 0.9 and 1.1 and jittered by up to 10%; returns the largest drift.
pub fn contour_drift(eval: impl Fn(&QuadOptions) -> Result<MomentResult>, opts: &QuadOptions) -> Result<f64> {
    let base = eval(opts)?;
    let n2 = 2 * base.nodes;
    let doubled = eval(&QuadOptions { nodes: n2, max_nodes: n2, ..*opts })?;
    let mut drift = (doubled.value - base.value).norm();
    for (scale, jitter) in [(0.9, 0.0), (1.1, 0.0), (1.0, 0.1)] {
        let v = eval(&QuadOptions { radius_scale: scale, radius_jitter: jitter, ..*opts })?;
        drift = drift.max((v.value - base.value).norm());
    }
    Ok(drift)
}

// ---------------------------------------------------------------------------
// Moment formulas against exact values

/// Every query of size `k` on `points`: point tuples with `α` nondecreasing and `β`
/// nonincreasing, nondecreasing colors up to `max_color`, and every `π`.
pub fn moment_queries(points: &[DualPoint], max_color: Color, k: usize) -> Vec<MomentQuery> {
    shapes(points, max_color, k)
        .into_iter()
        .flat_map(|(pts, cols)| Permutation::all(k).into_iter().map(move |pi| MomentQuery { points: pts.clone(), colors: cols.clone(), pi }))
        .collect()
}

fn shapes(points: &[DualPoint], max_color: Color, k: usize) -> Vec<(Vec<DualPoint>, Vec<Color>)> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| (p.a2, -p.b2));
    sorted.dedup();
    let mut tuples: Vec<Vec<DualPoint>> = vec![vec![]];
    for _ in 0..k {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                let last = t.last().copied();
                sorted
                    .iter()
                    .filter(move |p| last.is_none_or(|l| l.a2 <= p.a2 && l.b2 >= p.b2))
                    .map(|p| {
                        let mut t = t.clone();
                        t.push(*p);
                        t
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let colors = nondecreasing_tuples(k, max_color);
    tuples.iter().flat_map(|t| colors.iter().map(move |c| (t.clone(), c.clone()))).collect()
}

/// Queries on the upper boundary of `domain` with `k = 1, 2, ...` points, with all `π` for
/// each choice of points and colors. At most `caps[k - 1]` choices are kept for each `k`,
/// drawn at random.
pub fn boundary_queries(domain: &SkewDomain, caps: &[usize], seed: u64) -> Vec<MomentQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (k, &per_k) in (1..).zip(caps) {
        let mut all = shapes(&domain.upper().points(), domain.max_color(), k);
        if all.len() > per_k {
            all.shuffle(&mut rng);
            all.truncate(per_k);
        }
        for (pts, cols) in all {
            for pi in Permutation::all(k) {
                out.push(MomentQuery { points: pts.clone(), colors: cols.clone(), pi });
            }
        }
    }
    out
}

/// Skew domains with at most nine vertices, with their boundary colorings.
pub fn skew_corpus() -> Result<Vec<Arc<SkewDomain>>> {
    let specs: [(&str, &str, &[Color]); 9] = [
        ("HV", "VH", &[1, 2]),
        ("HHVV", "VVHH", &[1, 2, 3, 4]),
        ("HVHV", "VVHH", &[0, 1, 1, 2]),
        ("HHHVV", "VVHHH", &[1, 1, 2, 3, 3]),
        ("HHVHVV", "VVHVHH", &[0, 1, 1, 1, 2, 3]),
        ("HVHVHV", "VVVHHH", &[1, 1, 2, 2, 3, 3]),
        ("HHHVVV", "VVVHHH", &[0, 0, 0, 1, 2, 2]),
        ("HHHVVV", "VVVHHH", &[1, 2, 3, 4, 5, 6]),
        ("HHHHVV", "VVHHHH", &[0, 1, 1, 2, 2, 3]),
    ];
    specs.iter().map(|(q, p, c)| Ok(Arc::new(SkewDomain::new(UpLeftPath::from_word(q)?, UpLeftPath::from_word(p)?, c.to_vec())?))).collect()
}

/// Compares a formula with exact values query by query.
pub fn check_against_exact(
    name: &str,
    queries: &[MomentQuery],
    exact: impl Fn(&MomentQuery) -> Result<f64>,
    formula: impl Fn(&MomentQuery) -> Result<MomentResult>,
    tol: f64,
) -> Result<CheckReport> {
    let mut worst = Worst::default();
    for query in queries {
        let e = exact(query)?;
        let v = formula(query)?;
        worst.push((v.value - e).norm(), || format!("{query:?}: {} vs {e}", v.value));
    }
    Ok(worst.report(name, tol, 0))
}

/// [`qmoment_skew`] against exhaustive enumeration on one domain.
pub fn check_skew_formula(domain: &Arc<SkewDomain>, params: &ModelParams, queries: &[MomentQuery], tol: f64, opts: &QuadOptions) -> Result<CheckReport> {
    let ens = enumerate_sc6v(domain.clone(), params)?;
    let name = format!("skew_formula_{}_{}", domain.lower().word(), domain.upper().word());
    let values = qmoment_skew_many(domain, params, queries, opts)?;
    let mut worst = Worst::default();
    for (query, v) in queries.iter().zip(values) {
        let e = enumerated_moment(&ens, params.q, query)?;
        worst.push((v.value - e).norm(), || format!("{query:?}: {} vs {e}", v.value));
    }
    Ok(worst.report(&name, tol, 0))
}

/// The six-vertex model on a quadrant that the higher-spin model with every spin equal to
/// `q^{-1/2}` reduces to; column rapidities are multiplied by the spin.
pub fn unfused_equivalent(params: &ModelParams, rows: usize, cols: usize) -> Result<(Arc<SkewDomain>, ModelParams, ModelParams)> {
    let s = params.q.powf(-0.5);
    let fused = ModelParams { col_spins: vec![s; cols], ..params.clone() };
    let row_colors: Vec<Color> = (1..=rows).map(|r| params.row_color(r)).collect();
    let domain = Arc::new(SkewDomain::quadrant(&row_colors, cols)?);
    let plain = ModelParams {
        row_rapidities: params.row_rapidities[..rows].to_vec(),
        col_rapidities: params.col_rapidities[..cols].iter().map(|y| y * s).collect(),
        col_spins: Vec::new(),
        ..params.clone()
    };
    Ok((domain, fused, plain))
}

/// The higher-spin formula at spins `q^{-1/2}` against the skew-domain formula on the
/// equivalent six-vertex quadrant.
pub fn check_fusion_consistency(params: &ModelParams, rows: usize, cols: usize, queries: &[MomentQuery], tol: f64, opts: &QuadOptions) -> Result<CheckReport> {
    let (domain, fused, plain) = unfused_equivalent(params, rows, cols)?;
    check_against_exact(
        "fusion_consistency",
        queries,
        |q| qmoment_skew(&domain, &plain, q, opts).map(|v| v.value.re),
        |q| qmoment_higher_spin(&fused, q, opts),
        tol,
    )
}

/// The kappa expansion of the higher-spin formula against direct evaluation.
pub fn check_kappa_form(params: &ModelParams, queries: &[MomentQuery], tol: f64, opts: &QuadOptions) -> Result<CheckReport> {
    let mut worst = Worst::default();
    for query in queries {
        let a = qmoment_higher_spin(params, query, opts)?;
        let b = qmoment_higher_spin_kappa(params, query, opts)?;
        worst.push((a.value - b.value).norm(), || format!("{query:?}: {} vs {}", a.value, b.value));
    }
    Ok(worst.report("kappa_form", tol, 0))
}

/// `E Z_(0)^(1,t) = ((σ - ρ)/σ)^(t-1)` for `t <= t_max`, checked against [`beta_moment`]
/// and against simulation.
#[allow(clippy::too_many_arguments)]
pub fn check_polymer_geometric(
    params: &PolymerParams,
    t_max: usize,
    samples: usize,
    seed: u64,
    workers: usize,
    z_max: f64,
    tol: f64,
    opts: &QuadOptions,
) -> Result<(CheckReport, CheckReport)> {
    let law = |t: usize| ((params.sigma - params.rho) / params.sigma).powi(t as i32 - 1);
    let mut worst = Worst::default();
    for t in 1..=t_max {
        let query = MomentQuery { points: vec![DualPoint::new(0.5, t as f64 - 0.5)], colors: vec![0], pi: Permutation::identity(1) };
        let v = beta_moment(params, &query, opts)?;
        worst.push((v.value - law(t)).norm(), || format!("t = {t}: {} vs {}", v.value, law(t)));
    }
    let integral = worst.report("polymer_geometric_integral", tol, 0);
    let mc = with_rerun(samples, seed, |n, s| {
        let acc = polymer_mean(*params, t_max, &[0], &Plan::new(s, n).with_workers(workers), t_max, |z, out| {
            for (t, o) in (1..=t_max).zip(out.iter_mut()) {
                *o = z.get(0, 1, t).unwrap_or(f64::NAN);
            }
        })?;
        let mut w = WorstZ::default();
        for t in 1..=t_max {
            let (m, se) = (acc.mean(t - 1), acc.std_err(t - 1));
            w.push(m - law(t), se, || format!("t = {t}: mc {m} ± {se} vs {}", law(t)));
        }
        Ok(w.report("polymer_geometric_mc", z_max, s))
    })?;
    Ok((integral, mc))
}

// ---------------------------------------------------------------------------
// Shift invariance

/// Cuts of a skew domain whose boundary colors are `1, 2, ..., N + M` along `Q`.
#[derive(Clone, Debug)]
pub struct CutCollection {
    pub domain: Arc<SkewDomain>,
    pub cuts: Vec<Cut>,
}

/// A cut as `((α, β) on Q, (α, β) on P)`.
pub type CutEnds = ((f64, f64), (f64, f64));

impl CutCollection {
    /// Builds the domain from step words and the cuts from `((α, β) on Q, (α, β) on P)` pairs.
    pub fn new(lower: &str, upper: &str, cuts: &[CutEnds]) -> Result<Self> {
        let q = UpLeftPath::from_word(lower)?;
        let p = UpLeftPath::from_word(upper)?;
        let coloring = (1..=q.len() as Color).collect();
        let domain = Arc::new(SkewDomain::new(q, p, coloring)?);
        let cuts = cuts.iter().map(|&((a, b), (c, d))| Cut::new(&domain, DualPoint::try_new(a, b)?, DualPoint::try_new(c, d)?)).collect::<Result<Vec<_>>>()?;
        Ok(CutCollection { domain, cuts })
    }

    pub fn from_parts(domain: Arc<SkewDomain>, cuts: Vec<Cut>) -> Result<Self> {
        if domain.coloring().windows(2).any(|w| w[0] >= w[1]) || domain.coloring().first() == Some(&0) {
            return Err(Error::InvalidShiftIsomorphism("boundary colors along Q must be distinct and positive".into()));
        }
        Ok(CutCollection { domain, cuts })
    }

    /// `h[C_i] = h_{>c(q_i)}(p_i)` for every cut.
    pub fn heights<E: EdgeView + ?Sized>(&self, view: &E) -> Result<Vec<u32>> {
        self.cuts.iter().map(|c| height_in(&self.domain, view, c.p_point, c.color_threshold(&self.domain))).collect()
    }

    /// The moment query for `E q^{Σ_i a_i h[C_i]}`; `None` when all powers vanish.
    pub fn moment_query(&self, powers: &[u32]) -> Option<MomentQuery> {
        let mut pairs: Vec<(DualPoint, Color)> = Vec::new();
        for (c, &a) in self.cuts.iter().zip(powers) {
            for _ in 0..a {
                pairs.push((c.p_point, c.color_threshold(&self.domain)));
            }
        }
        if pairs.is_empty() {
            return None;
        }
        pairs.sort_by_key(|(p, _)| (p.a2, -p.b2));
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by_key(|&i| pairs[i].1);
        Some(MomentQuery {
            points: pairs.iter().map(|p| p.0).collect(),
            colors: order.iter().map(|&i| pairs[i].1).collect(),
            pi: Permutation::from_images(&order.iter().map(|i| i + 1).collect::<Vec<_>>()).ok()?,
        })
    }
}

/// Two cut collections together with a shift-isomorphism `(φ, ψ)` (1-based images).
#[derive(Clone, Debug)]
pub struct ShiftPair {
    pub left: CutCollection,
    pub right: CutCollection,
    pub phi: Vec<usize>,
    pub psi: Vec<usize>,
}

fn image_set(map: &[usize], set: &[usize]) -> BTreeSet<usize> {
    set.iter().map(|&i| map[i - 1]).collect()
}

fn order_matches(a: &CutCollection, b: &CutCollection) -> Result<()> {
    if a.cuts.len() != b.cuts.len() {
        return Err(Error::InvalidShiftIsomorphism(format!("{} cuts against {}", a.cuts.len(), b.cuts.len())));
    }
    for i in 0..a.cuts.len() {
        for j in 0..a.cuts.len() {
            if i != j && a.cuts[i].greater_than(&a.cuts[j]) != b.cuts[i].greater_than(&b.cuts[j]) {
                return Err(Error::InvalidShiftIsomorphism(format!("order of cuts {} and {} differs", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

fn is_permutation(map: &[usize]) -> bool {
    Permutation::from_images(map).is_ok()
}

/// Checks that `(phi, psi)` is a shift-isomorphism from `a` to `b`.
pub fn validate_shift_isomorphism(a: &CutCollection, b: &CutCollection, phi: &[usize], psi: &[usize]) -> Result<()> {
    let (n, m) = (a.domain.rows(), a.domain.cols());
    if b.domain.rows() != n || b.domain.cols() != m {
        return Err(Error::InvalidShiftIsomorphism("domains have different sizes".into()));
    }
    if phi.len() != n || psi.len() != m || !is_permutation(phi) || !is_permutation(psi) {
        return Err(Error::InvalidShiftIsomorphism("phi and psi must be permutations of the rows and columns".into()));
    }
    order_matches(a, b)?;
    for (i, (ca, cb)) in a.cuts.iter().zip(&b.cuts).enumerate() {
        if image_set(phi, &ca.rows()) != cb.rows().into_iter().collect() {
            return Err(Error::InvalidShiftIsomorphism(format!("phi does not carry the rows of cut {}", i + 1)));
        }
        if image_set(psi, &ca.cols()) != cb.cols().into_iter().collect() {
            return Err(Error::InvalidShiftIsomorphism(format!("psi does not carry the columns of cut {}", i + 1)));
        }
    }
    Ok(())
}

fn find_map(size: usize, from: &[Vec<usize>], to: &[Vec<usize>]) -> Option<Vec<usize>> {
    let targets: Vec<BTreeSet<usize>> = to.iter().map(|s| s.iter().copied().collect()).collect();
    Permutation::all(size).into_iter().map(|p| p.images()).find(|map| from.iter().zip(&targets).all(|(s, t)| image_set(map, s) == *t))
}

/// Searches for a shift-isomorphism by brute force over row and column permutations.
pub fn find_shift_isomorphism(a: &CutCollection, b: &CutCollection) -> Option<(Vec<usize>, Vec<usize>)> {
    if a.domain.rows() != b.domain.rows() || a.domain.cols() != b.domain.cols() || order_matches(a, b).is_err() {
        return None;
    }
    let rows = |c: &CutCollection| c.cuts.iter().map(|x| x.rows()).collect::<Vec<_>>();
    let cols = |c: &CutCollection| c.cuts.iter().map(|x| x.cols()).collect::<Vec<_>>();
    let phi = find_map(a.domain.rows(), &rows(a), &rows(b))?;
    let psi = find_map(a.domain.cols(), &cols(a), &cols(b))?;
    Some((phi, psi))
}

/// Rapidities of the image model: `x̃_{φ(r)} = x_r` and `ỹ_{ψ(c)} = y_c`.
pub fn transport_params(params: &ModelParams, phi: &[usize], psi: &[usize]) -> ModelParams {
    let mut x = params.row_rapidities.clone();
    for (r, &img) in phi.iter().enumerate() {
        x[img - 1] = params.row_rapidities[r];
    }
    let mut y = params.col_rapidities.clone();
    for (c, &img) in psi.iter().enumerate() {
        y[img - 1] = params.col_rapidities[c];
    }
    ModelParams { row_rapidities: x, col_rapidities: y, ..params.clone() }
}

/// The pair of four-cut collections on `6 x 6` domains used as the standard example.
///
/// Both domains are skew: the lower path passes through the lower cut endpoints and the
/// upper path through the upper ones.
pub fn figure_pair() -> Result<ShiftPair> {
    let left = CutCollection::new(
        "HHHHVHHVVVVV",
        "VVVHVVHVHHHH",
        &[((5.5, 0.5), (6.5, 1.5)), ((2.5, 1.5), (4.5, 6.5)), ((2.5, 1.5), (6.5, 2.5)), ((0.5, 4.5), (5.5, 5.5))],
    )?;
    let right = CutCollection::new(
        "HHHVHVHHVVVV",
        "VVVHVVVHHHHH",
        &[((5.5, 0.5), (6.5, 1.5)), ((3.5, 1.5), (5.5, 6.5)), ((2.5, 2.5), (6.5, 3.5)), ((0.5, 3.5), (5.5, 4.5))],
    )?;
    let phi = vec![1, 3, 6, 2, 4, 5];
    let psi = vec![2, 1, 4, 5, 3, 6];
    validate_shift_isomorphism(&left, &right, &phi, &psi)?;
    Ok(ShiftPair { left, right, phi, psi })
}

fn random_word(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> String {
    let mut w: Vec<char> = std::iter::repeat_n('H', cols).chain(std::iter::repeat_n('V', rows)).collect();
    w.shuffle(rng);
    w.into_iter().collect()
}

fn random_domain(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Option<Arc<SkewDomain>> {
    let q = UpLeftPath::from_word(&random_word(rng, rows, cols)).ok()?;
    let p = UpLeftPath::from_word(&random_word(rng, rows, cols)).ok()?;
    let coloring = (1..=q.len() as Color).collect();
    SkewDomain::new(q, p, coloring).ok().filter(|d| d.vertex_count() > 0).map(Arc::new)
}

fn all_cuts(domain: &SkewDomain) -> Vec<Cut> {
    let mut out = Vec::new();
    for qp in domain.lower().points() {
        for pp in domain.upper().points() {
            if let Ok(c) = Cut::new(domain, qp, pp) {
                out.push(c);
            }
        }
    }
    out
}

/// Random nontrivial shift-isomorphic pairs on domains of at most `max_rows x max_cols`,
/// with a number of cuts drawn from `cuts`.
pub fn random_shift_pairs(count: usize, max_rows: usize, max_cols: usize, cuts: std::ops::RangeInclusive<usize>, seed: u64) -> Result<Vec<ShiftPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::InvalidParameters(format!("found only {} shift-isomorphic pairs", out.len())));
        }
        let (n, m) = (rng.gen_range(2..=max_rows), rng.gen_range(2..=max_cols));
        let (Some(da), Some(db)) = (random_domain(&mut rng, n, m), random_domain(&mut rng, n, m)) else {
            continue;
        };
        let (ca, cb) = (all_cuts(&da), all_cuts(&db));
        let k = rng.gen_range(cuts.clone());
        if ca.len() < k {
            continue;
        }
        let left: Vec<Cut> = ca.choose_multiple(&mut rng, k).copied().collect();
        let mut right = Vec::with_capacity(left.len());
        for c in &left {
            let shape = (c.rows().len(), c.cols().len());
            let fits: Vec<&Cut> = cb.iter().filter(|d| (d.rows().len(), d.cols().len()) == shape).collect();
            match fits.choose(&mut rng) {
                Some(d) => right.push(**d),
                None => break,
            }
        }
        if right.len() != left.len() || (da == db && left == right) {
            continue;
        }
        let a = CutCollection { domain: da, cuts: left };
        let b = CutCollection { domain: db, cuts: right };
        if let Some((phi, psi)) = find_shift_isomorphism(&a, &b) {
            out.push(ShiftPair { left: a, right: b, phi, psi });
        }
    }
    Ok(out)
}

/// Exact joint law of the cut heights.
pub fn height_distribution(coll: &CutCollection, params: &ModelParams) -> Result<HashMap<Vec<u32>, f64>> {
    let ens = enumerate_sc6v(coll.domain.clone(), params)?;
    let mut out: HashMap<Vec<u32>, f64> = HashMap::new();
    for (w, g) in &ens.entries {
        *out.entry(coll.heights(g)?).or_default() += w.re;
    }
    Ok(out)
}

fn power_vectors(k: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out.into_iter().flat_map(|v: Vec<u32>| (0..=max_total).map(move |a| [v.clone(), vec![a]].concat())).collect();
    }
    out.retain(|v| (1..=max_total).contains(&v.iter().sum()));
    out
}

/// Exact shift-invariance check on one pair: the joint laws of the cut heights by
/// enumeration, and the moments `E q^{Σ a_i h[C_i]}` by the integral formula on both sides.
///
/// Returns `(distribution report, moment report)`.
pub fn check_shift_exact(pair: &ShiftPair, params: &ModelParams, opts: &QuadOptions, tol: (f64, f64)) -> Result<(CheckReport, CheckReport)> {
    validate_shift_isomorphism(&pair.left, &pair.right, &pair.phi, &pair.psi)?;
    let moved = transport_params(params, &pair.phi, &pair.psi);
    let da = height_distribution(&pair.left, params)?;
    let db = height_distribution(&pair.right, &moved)?;
    let mut dist = Worst::default();
    let keys: BTreeSet<&Vec<u32>> = da.keys().chain(db.keys()).collect();
    for key in keys {
        let (a, b) = (da.get(key).copied().unwrap_or(0.0), db.get(key).copied().unwrap_or(0.0));
        dist.push((a - b).abs(), || format!("heights {key:?}: {a} vs {b}"));
    }
    let mut mom = Worst::default();
    let q = params.q;
    for powers in power_vectors(pair.left.cuts.len(), 2) {
        let (Some(qa), Some(qb)) = (pair.left.moment_query(&powers), pair.right.moment_query(&powers)) else {
            continue;
        };
        let exact: f64 = da.iter().map(|(h, p)| p * q.powi(h.iter().zip(&powers).map(|(h, a)| h * a).sum::<u32>() as i32)).sum();
        let va = qmoment_skew(&pair.left.domain, params, &qa, opts)?.value;
        let vb = qmoment_skew(&pair.right.domain, &moved, &qb, opts)?.value;
        let err = (va - vb).norm().max((va - exact).norm()).max((vb - exact).norm());
        mom.push(err, || format!("powers {powers:?}: {va} / {vb} / enumeration {exact}"));
    }
    Ok((dist.report("shift_invariance_distribution", tol.0, 0), mom.report("shift_invariance_moments", tol.1, 0)))
}

/// Monte Carlo comparison of `E q^{h[C_i]}` and `E q^{h[C_i] + h[C_j]}` between the two
/// models of a pair, and of the first moments against the integral formula.
pub fn check_shift_mc(
    pair: &ShiftPair,
    params: &ModelParams,
    samples: usize,
    seed: u64,
    workers: usize,
    z_max: f64,
    opts: &QuadOptions,
) -> Result<CheckReport> {
    validate_shift_isomorphism(&pair.left, &pair.right, &pair.phi, &pair.psi)?;
    let moved = transport_params(params, &pair.phi, &pair.psi);
    let k = pair.left.cuts.len();
    let mut combos: Vec<Vec<u32>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u32).collect()).collect();
    for i in 0..k {
        for j in i + 1..k {
            combos.push((0..k).map(|a| (a == i || a == j) as u32).collect());
        }
    }
    let q = params.q;
    let mut exact = Vec::with_capacity(k);
    for c in combos.iter().take(k) {
        let query = pair.left.moment_query(c).expect("nonzero powers");
        exact.push(qmoment_skew(&pair.left.domain, params, &query, opts)?.value.re);
    }
    with_rerun(samples, seed, |n, s| {
        let means = |coll: &CutCollection, p: &ModelParams, s: u64| -> Result<MeanAccumulator> {
            let sampler = Sc6vSampler::new(coll.domain.clone(), p)?;
            sample_mean(&sampler, &Plan::new(s, n).with_workers(workers), combos.len(), |g, out| {
                let h = coll.heights(g).unwrap_or_else(|_| vec![u32::MAX; k]);
                for (o, c) in out.iter_mut().zip(&combos) {
                    let e: u32 = h.iter().zip(c).map(|(h, a)| h.saturating_mul(*a)).sum();
                    *o = q.powi(e as i32);
                }
            })
        };
        let a = means(&pair.left, params, s)?;
        let b = means(&pair.right, &moved, s.wrapping_add(1))?;
        let mut worst = WorstZ::default();
        for (i, c) in combos.iter().enumerate() {
            let sigma = a.std_err(i).hypot(b.std_err(i));
            worst.push(a.mean(i) - b.mean(i), sigma, || format!("powers {c:?}: {} vs {}", a.mean(i), b.mean(i)));
            if i < k {
                worst.push(a.mean(i) - exact[i], a.std_err(i), || format!("left cut {}: {} vs exact {}", i + 1, a.mean(i), exact[i]));
                worst.push(b.mean(i) - exact[i], b.std_err(i), || format!("right cut {}: {} vs exact {}", i + 1, b.mean(i), exact[i]));
            }
        }
        Ok(worst.report("shift_invariance_mc", z_max, s))
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo against exact moments

/// A model together with the formula that computes its moments.
#[derive(Clone, Debug)]
pub enum MomentModel {
    /// Six-vertex model on a skew domain; moments of `q^{Σ h_{>c_a}}` at points of `P`.
    Skew {
        domain: Arc<SkewDomain>,
        params: ModelParams,
    },
    /// Higher-spin quadrant model, observed on a `rows x cols` window.
    HigherSpin {
        params: ModelParams,
        rows: usize,
        cols: usize,
    },
    /// Higher-spin quadrant model with the shifted product observable.
    Shifted {
        params: ModelParams,
        rows: usize,
        cols: usize,
    },
    QHahn {
        params: QHahnParams,
        rows: usize,
        cols: usize,
    },
    /// Beta polymer; the colors of a query are the delays.
    Polymer {
        params: PolymerParams,
    },
}

fn grid_observable<E: EdgeView + ?Sized>(domain: &SkewDomain, g: &E, q: f64, query: &MomentQuery, shifted: bool) -> Result<f64> {
    let k = query.k();
    if shifted {
        let pc = permute_colors(&query.pi, &query.colors);
        let mut hg = Vec::with_capacity(k);
        let mut he = Vec::with_capacity(k);
        for (&p, &c) in query.points.iter().zip(&pc) {
            hg.push(height_in(domain, g, p, c)?);
            he.push(height_in(domain, g, p, c - 1)?);
        }
        Ok(shifted_observable_value(q, &pc, &hg, &he))
    } else {
        let mut e = 0;
        for a in 0..k {
            e += height_in(domain, g, query.points[query.pi.apply(a + 1) - 1], query.colors[a])?;
        }
        Ok(q.powi(e as i32))
    }
}

fn grid_means<S: GridSampler>(sampler: &S, queries: &[MomentQuery], q: f64, plan: &Plan, shifted: bool) -> Result<MeanAccumulator> {
    let domain = sampler.domain().clone();
    for query in queries {
        for p in &query.points {
            if !domain.contains_point(p) {
                return Err(Error::PointOutsideDomain { alpha: p.alpha(), beta: p.beta() });
            }
        }
        if shifted && query.colors.contains(&0) {
            return Err(Error::Constraint("the shifted observable needs colors >= 1".into()));
        }
    }
    sample_mean(sampler, plan, queries.len(), |g, out| {
        for (o, query) in out.iter_mut().zip(queries) {
            *o = grid_observable(&domain, g, q, query, shifted).unwrap_or(f64::NAN);
        }
    })
}

impl MomentModel {
    /// The moment from its exact formula.
    pub fn exact(&self, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
        match self {
            MomentModel::Skew { domain, params } => qmoment_skew(domain, params, query, opts),
            MomentModel::HigherSpin { params, .. } => qmoment_higher_spin(params, query, opts),
            MomentModel::Shifted { params, .. } => shifted_observable_exact(params, query, opts),
            MomentModel::QHahn { params, .. } => qmoment_qhahn(params, query, opts),
            MomentModel::Polymer { params } => beta_moment(params, query, opts),
        }
    }

    /// Monte Carlo means of all `queries` from one stream of samples.
    pub fn monte_carlo(&self, queries: &[MomentQuery], plan: &Plan) -> Result<MeanAccumulator> {
        match self {
            MomentModel::Skew { domain, params } => grid_means(&Sc6vSampler::new(domain.clone(), params)?, queries, params.q, plan, false),
            MomentModel::HigherSpin { params, rows, cols } => grid_means(&HigherSpinSampler::new(params, *rows, *cols)?, queries, params.q, plan, false),
            MomentModel::Shifted { params, rows, cols } => grid_means(&HigherSpinSampler::new(params, *rows, *cols)?, queries, params.q, plan, true),
            MomentModel::QHahn { params, rows, cols } => grid_means(&QHahnSampler::new(params, *rows, *cols)?, queries, params.q, plan, false),
            MomentModel::Polymer { params } => {
                let t_max = queries.iter().flat_map(|q| q.points.iter().map(|p| polymer_point(p).1)).max().unwrap_or(1);
                let delays: Vec<usize> = queries.iter().flat_map(|q| q.colors.iter().map(|&c| c as usize)).collect::<BTreeSet<_>>().into_iter().collect();
                polymer_mean(*params, t_max, &delays, plan, queries.len(), |s, out| {
                    for (o, query) in out.iter_mut().zip(queries) {
                        *o = (0..query.k())
                            .map(|a| {
                                let (m, t) = polymer_point(&query.points[query.pi.apply(a + 1) - 1]);
                                s.z(query.colors[a] as usize, m, t).unwrap_or(f64::NAN)
                            })
                            .product();
                    }
                })
            }
        }
    }
}

/// Monte Carlo estimates of `queries` against their exact values, passing when every
/// estimate is within `z_max` standard errors. A failure is rerun once at four times
/// the samples.
pub fn mc_vs_exact(
    model: &MomentModel,
    queries: &[MomentQuery],
    samples: usize,
    seed: u64,
    workers: usize,
    z_max: f64,
    opts: &QuadOptions,
) -> Result<CheckReport> {
    let exact = queries.iter().map(|q| model.exact(q, opts).map(|v| v.value.re)).collect::<Result<Vec<_>>>()?;
    with_rerun(samples, seed, |n, s| {
        let acc = model.monte_carlo(queries, &Plan::new(s, n).with_workers(workers))?;
        let mut worst = WorstZ::default();
        for (i, e) in exact.iter().enumerate() {
            worst.push(acc.mean(i) - e, acc.std_err(i), || format!("query {i}: mc {} ± {} vs exact {e}", acc.mean(i), acc.std_err(i)));
        }
        Ok(worst.report("mc_vs_exact", z_max, s))
    })
}

// ---------------------------------------------------------------------------
// Suites

/// Named groups of checks run by `vertexflow verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Local,
    Shift,
    Identities,
    Moments,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "local" => Suite::Local,
            "shift" => Suite::Shift,
            "identities" => Suite::Identities,
            "moments" => Suite::Moments,
            "all" => Suite::All,
            other => return Err(Error::InvalidParameters(format!("unknown suite '{other}'"))),
        })
    }
}

/// Sizes and seeds for a suite run.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random trials for algebraic checks.
    pub trials: usize,
    /// Monte Carlo samples per statistical check.
    pub samples: usize,
    pub workers: usize,
    /// Overrides the tolerance of every deterministic check.
    pub tolerance: Option<f64>,
    pub quad: QuadOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 1, trials: 1000, samples: 200_000, workers: 0, tolerance: None, quad: QuadOptions::default() }
    }
}

/// Standard parameters shared by the suites and the examples.
pub fn standard_higher_spin() -> ModelParams {
    let mut p = ModelParams::new(0.4, vec![3.0, 3.4, 3.9, 3.2], vec![1.0, 1.1, 0.95, 1.05]);
    p.col_spins = vec![2.5; 4];
    p.boundary_levels = vec![1, 3];
    p
}

/// Runs a suite.
pub fn run_suite(suite: Suite, o: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let tol = |t: f64| o.tolerance.unwrap_or(t);
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Local {
        for r in 0..=4 {
            out.push(check_local_relation(r, o.trials, o.seed + r as u64, tol(1e-12))?);
            out.push(check_local_relation_fused(r, o.trials, o.seed + 10 + r as u64, tol(1e-12))?);
        }
        let params = ModelParams::new(0.35, vec![2.2, 3.1, 2.7], vec![1.0, 1.3, 0.9]);
        for (q, p, coloring) in [("HHVV", "VVHH", vec![1, 2, 3, 4]), ("HVHV", "VVHH", vec![0, 1, 1, 2]), ("HHHVV", "VVHHH", vec![1, 1, 2, 3, 3])] {
            let domain = SkewDomain::new(UpLeftPath::from_word(q)?, UpLeftPath::from_word(p)?, coloring)?;
            let mut r = check_global_relation(&domain, &params, 2, tol(1e-12))?;
            r.name = format!("global_relation_{q}_{p}");
            out.push(r);
        }
        out.push(check_qhahn_stochasticity(3, 6, 20, o.seed + 20, tol(1e-12))?);
    }
    if all || suite == Suite::Identities {
        out.push(check_ybe(2, 20, o.seed + 30, tol(1e-12))?);
        out.push(check_exchange(2, 3, 20, o.seed + 31, tol(1e-12))?);
        out.push(check_hecke_geometric_sum(4, 100, o.seed + 32, tol(1e-10))?);
        out.push(check_symmetrization_identity(3, 100, o.seed + 33, tol(1e-10))?);
        for k in 2..=4 {
            out.push(check_hecke_relations(k, 100, o.seed + 40 + k as u64, tol(1e-10))?);
            out.extend(check_kappa_properties(k, if k == 4 { 20 } else { 100 }, o.seed + 50 + k as u64, tol(1e-10))?);
        }
        out.push(check_self_adjoint(2, 5, o.seed + 60, tol(1e-9), &o.quad)?);
    }
    if all || suite == Suite::Shift {
        let params = ModelParams::new(0.4, vec![2.23, 2.91, 2.57, 2.74, 2.13, 2.46], vec![1.03, 0.81, 1.12, 0.93, 1.19, 0.87]);
        let mut dist = Worst::default();
        let mut mom = Worst::default();
        for (i, pair) in random_shift_pairs(20, 4, 4, 2..=3, o.seed + 70)?.iter().enumerate() {
            let sub = ModelParams {
                row_rapidities: params.row_rapidities[..pair.left.domain.rows()].to_vec(),
                col_rapidities: params.col_rapidities[..pair.left.domain.cols()].to_vec(),
                ..params.clone()
            };
            let (a, b) = check_shift_exact(pair, &sub, &o.quad, (1e-10, 1e-8))?;
            dist.push(a.max_abs_error, || format!("pair {i}: {}", a.details));
            mom.push(b.max_abs_error, || format!("pair {i}: {}", b.details));
        }
        out.push(dist.report("shift_invariance_random_pairs", tol(1e-10), o.seed + 70));
        out.push(mom.report("shift_invariance_random_moments", tol(1e-8), o.seed + 70));
        out.push(check_shift_mc(&figure_pair()?, &params, o.samples, o.seed + 71, o.workers, 4.0, &o.quad)?);
    }
    if all || suite == Suite::Moments {
        out.push(check_base_case(20, 3, o.seed + 80, tol(1e-9), &o.quad)?);
        let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word("HHVHVV")?, UpLeftPath::from_word("VVHVHH")?, vec![0, 1, 1, 1, 2, 3])?);
        let params = ModelParams::new(0.35, vec![2.3, 3.1, 4.4], vec![1.0, 1.3, 0.9]);
        let sk = [
            MomentQuery { points: vec![DualPoint::new(1.5, 3.5), DualPoint::new(3.5, 1.5)], colors: vec![1, 2], pi: Permutation::identity(2) },
            MomentQuery { points: vec![DualPoint::new(1.5, 3.5), DualPoint::new(3.5, 1.5)], colors: vec![0, 2], pi: Permutation::from_images(&[2, 1])? },
        ];
        let mut r = mc_vs_exact(&MomentModel::Skew { domain, params }, &sk, o.samples, o.seed + 81, o.workers, 4.0, &o.quad)?;
        r.name = "mc_vs_exact_skew".into();
        out.push(r);
        let hs = standard_higher_spin();
        let hq = [
            MomentQuery { points: vec![DualPoint::new(1.5, 3.5), DualPoint::new(2.5, 2.5)], colors: vec![1, 2], pi: Permutation::identity(2) },
            MomentQuery { points: vec![DualPoint::new(0.5, 3.5), DualPoint::new(2.5, 1.5)], colors: vec![1, 1], pi: Permutation::from_images(&[2, 1])? },
        ];
        let mut r = mc_vs_exact(&MomentModel::HigherSpin { params: hs.clone(), rows: 3, cols: 3 }, &hq, o.samples, o.seed + 82, o.workers, 4.0, &o.quad)?;
        r.name = "mc_vs_exact_higher_spin".into();
        out.push(r);
        let mut r = mc_vs_exact(&MomentModel::Shifted { params: hs, rows: 3, cols: 3 }, &hq, o.samples, o.seed + 83, o.workers, 4.0, &o.quad)?;
        r.name = "mc_vs_exact_shifted".into();
        out.push(r);
        let qh = QHahnParams { q: 0.4, s: 0.3, z: 0.6, boundary_levels: vec![2, 4] };
        let qq = [
            MomentQuery { points: vec![DualPoint::new(2.5, 4.5)], colors: vec![0], pi: Permutation::identity(1) },
            MomentQuery { points: vec![DualPoint::new(1.5, 4.5), DualPoint::new(3.5, 4.5)], colors: vec![0, 1], pi: Permutation::from_images(&[2, 1])? },
        ];
        let mut r = mc_vs_exact(&MomentModel::QHahn { params: qh, rows: 4, cols: 4 }, &qq, o.samples, o.seed + 84, o.workers, 4.0, &o.quad)?;
        r.name = "mc_vs_exact_qhahn".into();
        out.push(r);
        let pq = [
            MomentQuery { points: vec![DualPoint::new(0.5, 3.5)], colors: vec![0], pi: Permutation::identity(1) },
            MomentQuery { points: vec![DualPoint::new(1.5, 4.5), DualPoint::new(2.5, 3.5)], colors: vec![0, 1], pi: Permutation::identity(2) },
        ];
        let mut r =
            mc_vs_exact(&MomentModel::Polymer { params: PolymerParams { sigma: 6.0, rho: 2.0 } }, &pq, o.samples, o.seed + 85, o.workers, 4.0, &o.quad)?;
        r.name = "mc_vs_exact_polymer".into();
        out.push(r);
    }
    Ok(out)
}
