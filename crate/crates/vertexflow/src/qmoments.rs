//! Nested contour integrals and the exact q-moment formulas built on them.
//!
//! Every integral here is a tensor-product trapezoid rule on unions of circles.
//! For a circle `|w - c| = r` with `N` nodes the rule reads
//! `∮ g(w) dw / (2πi) ≈ (1/N) Σ_j g(w_j) (w_j - c)`, which converges geometrically
//! for integrands analytic on an annulus around the circle. The error estimate is
//! the difference between the full rule and the rule on the even-indexed nodes,
//! computed in the same pass.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hecke::{kappa_all, t_coefficient, t_scalar, Permutation, PointFunction, Variant};
use crate::lattice::{Color, DualPoint, Line, ModelParams, SkewDomain};
use crate::sampler::{PolymerParams, QHahnParams};
use crate::weights::qpoch;

/// A counterclockwise circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
}

/// Per-variable unions of circles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourFamily {
    /// `contours[a]` is the contour of variable `a + 1`.
    pub contours: Vec<Vec<Circle>>,
    /// Smallest ratio `distance to nearest singularity / radius` over all circles.
    pub margin: f64,
}

impl ContourFamily {
    pub fn k(&self) -> usize {
        self.contours.len()
    }

    /// The same family with every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ContourFamily {
            contours: self.contours.iter().map(|c| c.iter().map(|ci| Circle { center: ci.center, radius: ci.radius * factor }).collect()).collect(),
            margin: self.margin / factor,
        }
    }

    /// The family with radii scaled by `scale` and then by per-circle factors in
    /// `[1 - jitter, 1 + jitter]` that depend only on the circle's position in the family.
    pub fn perturbed(&self, scale: f64, jitter: f64) -> Self {
        if scale == 1.0 && jitter == 0.0 {
            return self.clone();
        }
        let mut worst = 1.0f64;
        let contours = self
            .contours
            .iter()
            .enumerate()
            .map(|(a, c)| {
                c.iter()
                    .enumerate()
                    .map(|(i, ci)| {
                        let f = scale * (1.0 + jitter * unit_hash((a as u64) << 32 | i as u64));
                        worst = worst.max(f);
                        Circle { center: ci.center, radius: ci.radius * f }
                    })
                    .collect()
            })
            .collect();
        ContourFamily { contours, margin: self.margin / worst }
    }
}

/// A deterministic value in `[-1, 1]` (splitmix64 finalizer).
fn unit_hash(x: u64) -> f64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// Poles that each variable's contour must encircle, and poles that must stay outside.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleSpec {
    pub q: f64,
    /// `inside[a]`: poles encircled by the contour of variable `a + 1` (besides 0).
    pub inside: Vec<Vec<C64>>,
    pub excluded: Vec<C64>,
}

const SAME_POINT: f64 = 1e-12;

fn dedupe(points: impl IntoIterator<Item = C64>) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for p in points {
        if !out.iter().any(|o| (o - p).norm() <= SAME_POINT * o.norm().max(1.0)) {
            out.push(p);
        }
    }
    out
}

/// Builds small circles around every inside pole plus `q`-nested circles around 0.
///
/// Pole circles have radius `1/4` of the distance to the nearest point among 0, the other
/// inside poles, the excluded poles and the `q`-shifts `q p'`, `p'/q` of all inside poles;
/// variable `a` uses that radius times `1 - 0.08 (a - 1)` so that no two variables share nodes.
/// The circle around 0 for variable `a` has radius `q^{2a} r_0`, `r_0` being a quarter of the
/// distance from 0 to the nearest pole.
pub fn build_contours(spec: &PoleSpec) -> Result<ContourFamily> {
    let q = spec.q;
    let k = spec.inside.len();
    let all_inside = dedupe(spec.inside.iter().flatten().copied());
    let mut radius: Vec<f64> = Vec::with_capacity(all_inside.len());
    for &p in &all_inside {
        let mut best = (p.norm(), "0".to_string());
        let mut consider = |d: f64, label: String| {
            if d < best.0 {
                best = (d, label);
            }
        };
        for &o in &all_inside {
            if o != p {
                consider((p - o).norm(), format!("inside pole {o}"));
            }
            consider((p - o * q).norm(), format!("q * {o}"));
            consider((p - o / q).norm(), format!("{o} / q"));
        }
        for &e in &spec.excluded {
            consider((p - e).norm(), format!("excluded pole {e}"));
        }
        if best.0 <= 1e-9 * p.norm().max(1e-300) {
            return Err(Error::InfeasibleContour(format!("pole {p} collides with {}", best.1)));
        }
        radius.push(best.0 / 4.0);
    }
    let nearest = all_inside.iter().chain(spec.excluded.iter()).map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    if nearest <= 1e-300 {
        return Err(Error::InfeasibleContour("a pole sits at 0".into()));
    }
    let r0 = if nearest.is_finite() { nearest / 4.0 } else { 1.0 };
    let mut contours = Vec::with_capacity(k);
    for (a, inside) in spec.inside.iter().enumerate() {
        let shrink = 1.0 - 0.08 * a as f64;
        let mut circles: Vec<Circle> = dedupe(inside.iter().copied())
            .into_iter()
            .map(|p| {
                let idx = all_inside.iter().position(|o| (o - p).norm() <= SAME_POINT * o.norm().max(1.0)).expect("listed");
                Circle { center: p, radius: radius[idx] * shrink }
            })
            .collect();
        circles.push(Circle { center: C64::new(0.0, 0.0), radius: q.powi(2 * (a as i32 + 1)) * r0 });
        contours.push(circles);
    }
    // Margin: for pole circles the radius is at most a quarter of the distance to the nearest
    // singularity; for the circles around 0 the nearest singularity sits at a factor q away.
    let margin = if all_inside.is_empty() { 1.0 / q } else { (1.0 / q).min(4.0 / (1.0 - 0.08 * (k.max(1) - 1) as f64)) };
    Ok(ContourFamily { contours, margin })
}

/// Quadrature controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadOptions {
    /// Starting nodes per circle (even).
    pub nodes: usize,
    /// Largest nodes per circle tried by the adaptive loop.
    pub max_nodes: usize,
    /// Target for the nested-rule error estimate.
    pub tol: f64,
    /// Upper bound on the number of node tuples per evaluation.
    pub max_tuples: f64,
    /// Worker threads (`0` uses the global pool).
    pub workers: usize,
    /// Every circle radius is multiplied by this factor before integrating.
    pub radius_scale: f64,
    /// Each circle radius is further multiplied by a fixed pseudo-random factor in
    /// `[1 - radius_jitter, 1 + radius_jitter]`.
    pub radius_jitter: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { nodes: 32, max_nodes: 4096, tol: 1e-11, max_tuples: 4e8, workers: 0, radius_scale: 1.0, radius_jitter: 0.0 }
    }
}

impl QuadOptions {
    /// A single pass at exactly `n` nodes per circle.
    pub fn fixed(n: usize) -> Self {
        QuadOptions { nodes: n, max_nodes: n, ..Default::default() }
    }
}

/// Result of a contour integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralValue {
    pub value: C64,
    /// `|I_N - I_{N/2}|` for the final node count `N`.
    pub error: f64,
    /// Nodes per circle used for `value`.
    pub nodes: usize,
    pub contours: ContourFamily,
}

struct NodeSet {
    w: Vec<C64>,
    weight: Vec<C64>,
    even: Vec<bool>,
}

fn nodes_for(circles: &[Circle], n: usize, a: usize) -> NodeSet {
    // Irrational per-variable rotation, as a fraction of the node spacing.
    let phase = ((a as f64 + 1.0) * 0.618_033_988_749_894_9).fract() * std::f64::consts::TAU / n as f64;
    let mut out = NodeSet { w: Vec::new(), weight: Vec::new(), even: Vec::new() };
    for c in circles {
        for j in 0..n {
            let theta = std::f64::consts::TAU * j as f64 / n as f64 + phase;
            let d = C64::from_polar(c.radius, theta);
            out.w.push(c.center + d);
            out.weight.push(d / n as f64);
            out.even.push(j % 2 == 0);
        }
    }
    out
}

fn pairwise_sum(v: &[(Vec<C64>, Vec<C64>)], m: usize) -> (Vec<C64>, Vec<C64>) {
    if v.len() <= 8 {
        let mut acc = (vec![C64::default(); m], vec![C64::default(); m]);
        for (f, e) in v {
            for i in 0..m {
                acc.0[i] += f[i];
                acc.1[i] += e[i];
            }
        }
        return acc;
    }
    let (l, r) = v.split_at(v.len() / 2);
    let (mut a, b) = (pairwise_sum(l, m), pairwise_sum(r, m));
    for i in 0..m {
        a.0[i] += b.0[i];
        a.1[i] += b.1[i];
    }
    a
}

fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        job()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        }
    }
}

/// Runs `pass(n)` for `n = nodes, 2 nodes, ...` until the estimate meets the tolerance.
fn adaptive(family: &ContourFamily, opts: &QuadOptions, pass: impl Fn(usize) -> Result<(C64, C64)>) -> Result<IntegralValue> {
    let mut out = adaptive_many(family, opts, |n| pass(n).map(|(full, half)| (vec![full], vec![half])))?;
    Ok(out.pop().expect("one output"))
}

/// [`adaptive`] for several integrals over the same contours. Doubling continues until every
/// output meets the tolerance.
fn adaptive_many(family: &ContourFamily, opts: &QuadOptions, pass: impl Fn(usize) -> Result<(Vec<C64>, Vec<C64>)>) -> Result<Vec<IntegralValue>> {
    let k = family.k();
    let mut n = opts.nodes.max(2) & !1;
    loop {
        let (full, half) = pass(n)?;
        let errors: Vec<f64> = full.iter().zip(&half).map(|(f, h)| (f - h).norm()).collect();
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let next = 2 * n;
        let circles: usize = family.contours.iter().map(|c| c.len()).max().unwrap_or(0);
        let next_tuples = ((circles * next) as f64).powi(k as i32);
        if worst <= opts.tol || next > opts.max_nodes || next_tuples > opts.max_tuples {
            return Ok(full.into_iter().zip(errors).map(|(value, error)| IntegralValue { value, error, nodes: n, contours: family.clone() }).collect());
        }
        n = next;
    }
}

/// Visits every node tuple; `f(indices, nodes)` returns the summand without node weights.
/// Returns the full rule and the rule on even nodes only.
fn tensor_sum(sets: &[NodeSet], workers: usize, f: impl Fn(&[usize], &[C64]) -> C64 + Sync) -> Result<(C64, C64)> {
    let (full, half) = tensor_sum_many(sets, workers, 1, |idx, w, out, _: &mut ()| out[0] = f(idx, w))?;
    Ok((full[0], half[0]))
}

/// [`tensor_sum`] for `m` summands at once; `f(indices, nodes, out, scratch)` fills `out[..m]`.
/// Each worker gets its own `scratch`.
fn tensor_sum_many<S: Default>(
    sets: &[NodeSet],
    workers: usize,
    m: usize,
    f: impl Fn(&[usize], &[C64], &mut [C64], &mut S) + Sync,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let k = sets.len();
    if k == 0 {
        let mut v = vec![C64::default(); m];
        f(&[], &[], &mut v, &mut S::default());
        return Ok((v.clone(), v));
    }
    let scale = 2f64.powi(k as i32);
    let outer: Vec<(Vec<C64>, Vec<C64>)> = in_pool(workers, || {
        (0..sets[0].w.len())
            .into_par_iter()
            .map(|j0| {
                let mut idx = vec![0usize; k];
                idx[0] = j0;
                let mut w = vec![C64::default(); k];
                let mut buf = vec![C64::default(); m];
                let mut scratch = S::default();
                let mut full = vec![C64::default(); m];
                let mut even = vec![C64::default(); m];
                loop {
                    let mut weight = C64::new(1.0, 0.0);
                    let mut all_even = true;
                    for a in 0..k {
                        w[a] = sets[a].w[idx[a]];
                        weight *= sets[a].weight[idx[a]];
                        all_even &= sets[a].even[idx[a]];
                    }
                    f(&idx, &w, &mut buf, &mut scratch);
                    for i in 0..m {
                        let v = weight * buf[i];
                        full[i] += v;
                        if all_even {
                            even[i] += v;
                        }
                    }
                    // Odometer over variables 2..k.
                    let mut a = k - 1;
                    loop {
                        if a == 0 {
                            return (full, even);
                        }
                        idx[a] += 1;
                        if idx[a] < sets[a].w.len() {
                            break;
                        }
                        idx[a] = 0;
                        a -= 1;
                    }
                }
            })
            .collect()
    });
    let (full, even) = pairwise_sum(&outer, m);
    if full.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::ContourResolution);
    }
    Ok((full, even.into_iter().map(|v| v * scale).collect()))
}

/// `∮ ... ∮ g(w) Π dw_a / (2πi)` with no extra factors.
pub fn quadrature(g: &(dyn Fn(&[C64]) -> C64 + Sync), family: &ContourFamily, opts: &QuadOptions) -> Result<IntegralValue> {
    let family = &family.perturbed(opts.radius_scale, opts.radius_jitter);
    adaptive(family, opts, |n| {
        let sets: Vec<NodeSet> = family.contours.iter().enumerate().map(|(a, c)| nodes_for(c, n, a)).collect();
        tensor_sum(&sets, opts.workers, |_, w| g(w))
    })
}

/// Cross factor between variables `a < b`.
#[inline]
pub fn cross_factor(variant: Variant, q: f64, wa: C64, wb: C64) -> C64 {
    match variant {
        Variant::QDeformed => (wb - wa) / (wb - wa * q),
        Variant::Polymer => (wb - wa) / (wb - wa + 1.0),
    }
}

/// The pairing `∮ Π_{a<b} (w_b - w_a)/(w_b - q w_a) f(w) Π dw_a / (2πi w_a)`.
pub fn iterated_integral(f: &dyn PointFunction, family: &ContourFamily, q: f64, opts: &QuadOptions) -> Result<IntegralValue> {
    let g = |w: &[C64]| -> C64 {
        let mut v = match f.eval(w) {
            Ok(v) => v,
            Err(_) => return C64::new(f64::NAN, f64::NAN),
        };
        for a in 0..w.len() {
            v /= w[a];
            for b in a + 1..w.len() {
                v *= cross_factor(Variant::QDeformed, q, w[a], w[b]);
            }
        }
        v
    };
    quadrature(&g, family, opts)
}

/// A univariate factor.
pub type UniFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

/// One summand `coef * T_word( Π_a slot_fns[slots[a]](w_a) )`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeckeTerm {
    pub coef: C64,
    pub word: Vec<usize>,
    pub slots: Vec<usize>,
}

/// `prefactor * ∮ Π_{a<b} cross(w_a, w_b) Σ_terms coef T_word(Π φ_slot(w_a)) Π ψ_a(w_a) dw_a/(2πi)`.
/// The measure (for example `1/w_a`) is part of `psi`.
#[derive(Clone)]
pub struct HeckeIntegrand {
    pub variant: Variant,
    pub q: f64,
    pub slot_fns: Vec<UniFn>,
    pub terms: Vec<HeckeTerm>,
    pub psi: Vec<UniFn>,
    pub prefactor: C64,
}

/// The Hecke parts `Σ coef T_word(Π_a φ_{slots[a]})` of several integrands, compiled into one
/// DAG over `(slots, remaining word, argument order)` states so that shared subterms are
/// evaluated once per node tuple.
struct HeckeProgram {
    /// Children always precede their parents.
    nodes: Vec<ProgramNode>,
    /// Per integrand, its terms as `(coef, root node)`.
    roots: Vec<Vec<(C64, usize)>>,
}

enum ProgramNode {
    /// `Π_a φ_{slots[a]}(w_{perm[a]})`.
    Leaf { slots: Vec<usize>, perm: Vec<usize> },
    /// `T_i` with variables `u`, `v` in slots `i`, `i + 1`: `q g + c(w_u, w_v) (g∘s_i - g)`.
    Step { u: usize, v: usize, same: usize, swap: usize },
}

impl HeckeProgram {
    fn compile(k: usize, integrands: &[&[HeckeTerm]]) -> Self {
        type Key = (Vec<usize>, Vec<usize>, Vec<usize>);
        fn visit(slots: &[usize], word: &[usize], perm: Vec<usize>, nodes: &mut Vec<ProgramNode>, index: &mut HashMap<Key, usize>) -> usize {
            let key = (slots.to_vec(), word.to_vec(), perm);
            if let Some(&id) = index.get(&key) {
                return id;
            }
            let perm = key.2.clone();
            let node = match word.split_first() {
                None => ProgramNode::Leaf { slots: slots.to_vec(), perm },
                Some((&i, rest)) => {
                    let i = i - 1;
                    let same = visit(slots, rest, perm.clone(), nodes, index);
                    let mut swapped = perm.clone();
                    swapped.swap(i, i + 1);
                    let swap = visit(slots, rest, swapped, nodes, index);
                    ProgramNode::Step { u: perm[i], v: perm[i + 1], same, swap }
                }
            };
            nodes.push(node);
            index.insert(key, nodes.len() - 1);
            nodes.len() - 1
        }
        let mut nodes = Vec::new();
        let mut index = HashMap::new();
        let roots = integrands
            .iter()
            .map(|terms| terms.iter().map(|t| (t.coef, visit(&t.slots, &t.word, (0..k).collect(), &mut nodes, &mut index))).collect())
            .collect();
        HeckeProgram { nodes, roots }
    }

    /// Fills `vals` with every node value at one point. `leaf(slots, perm)` evaluates a leaf
    /// and `coef(u, v)` is the `T_i` coefficient for variables `u`, `v`.
    fn eval(&self, vals: &mut Vec<C64>, scalar: f64, leaf: impl Fn(&[usize], &[usize]) -> C64, coef: impl Fn(usize, usize) -> C64) {
        vals.clear();
        for node in &self.nodes {
            let v = match node {
                ProgramNode::Leaf { slots, perm } => leaf(slots, perm),
                ProgramNode::Step { u, v, same, swap } => vals[*same] * scalar + coef(*u, *v) * (vals[*swap] - vals[*same]),
            };
            vals.push(v);
        }
    }

    /// `Σ coef T_word(...)` for integrand `j`, after [`HeckeProgram::eval`].
    fn output(&self, vals: &[C64], j: usize) -> C64 {
        self.roots[j].iter().map(|&(c, id)| c * vals[id]).sum()
    }
}

/// Per-worker buffers for [`integrate_hecke_many`].
#[derive(Default)]
struct HeckeScratch {
    vals: Vec<C64>,
    phi: Vec<C64>,
    tco: Vec<C64>,
}

/// Evaluates a [`HeckeIntegrand`] over a contour family.
pub fn integrate_hecke(integrand: &HeckeIntegrand, family: &ContourFamily, opts: &QuadOptions) -> Result<IntegralValue> {
    let mut out = integrate_hecke_many(std::slice::from_ref(integrand), family, opts)?;
    Ok(out.pop().expect("one integrand"))
}

/// Several integrands over one contour family in a single pass. They must share `variant`,
/// `q`, and (as the same `Arc`s) `slot_fns` and `psi`; only `terms` and `prefactor` differ.
pub fn integrate_hecke_many(integrands: &[HeckeIntegrand], family: &ContourFamily, opts: &QuadOptions) -> Result<Vec<IntegralValue>> {
    let Some(first) = integrands.first() else { return Ok(Vec::new()) };
    let same_fns = |a: &[UniFn], b: &[UniFn]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| Arc::ptr_eq(x, y));
    if integrands.iter().any(|i| i.variant != first.variant || i.q != first.q || !same_fns(&i.slot_fns, &first.slot_fns) || !same_fns(&i.psi, &first.psi)) {
        return Err(Error::InvalidParameters("integrands integrated together must share slot functions and psi".into()));
    }
    let family = &family.perturbed(opts.radius_scale, opts.radius_jitter);
    let k = family.k();
    if first.psi.len() != k || integrands.iter().flat_map(|i| &i.terms).any(|t| t.slots.len() != k) {
        return Err(Error::InvalidParameters("integrand arity does not match the contour family".into()));
    }
    let program = HeckeProgram::compile(k, &integrands.iter().map(|i| i.terms.as_slice()).collect::<Vec<_>>());
    let (variant, q) = (first.variant, first.q);
    let scalar = t_scalar(variant, q);
    let needs_t = integrands.iter().flat_map(|i| &i.terms).any(|t| !t.word.is_empty());
    let mut out = adaptive_many(family, opts, |n| {
        let sets: Vec<NodeSet> = family.contours.iter().enumerate().map(|(a, c)| nodes_for(c, n, a)).collect();
        let sizes: Vec<usize> = sets.iter().map(|s| s.w.len()).collect();
        // psi_a at the nodes of variable a.
        let psi: Vec<Vec<C64>> = (0..k).map(|a| sets[a].w.iter().map(|&w| (first.psi[a])(w)).collect()).collect();
        // phi_f at the nodes of every variable.
        let phi: Vec<Vec<Vec<C64>>> = first.slot_fns.iter().map(|f| sets.iter().map(|s| s.w.iter().map(|&w| f(w)).collect()).collect()).collect();
        // Pair tables indexed by ordered variable pairs.
        let pair_table = |u: usize, v: usize, g: &dyn Fn(C64, C64) -> C64| -> Vec<C64> {
            let mut t = Vec::with_capacity(sizes[u] * sizes[v]);
            for &wu in &sets[u].w {
                for &wv in &sets[v].w {
                    t.push(g(wu, wv));
                }
            }
            t
        };
        let mut cross: Vec<Vec<C64>> = vec![Vec::new(); k * k];
        let mut tco: Vec<Vec<C64>> = vec![Vec::new(); k * k];
        for u in 0..k {
            for v in 0..k {
                if u < v {
                    cross[u * k + v] = pair_table(u, v, &|a, b| cross_factor(variant, q, a, b));
                }
                if u != v && needs_t {
                    tco[u * k + v] = pair_table(u, v, &|a, b| t_coefficient(variant, q, a, b));
                }
            }
        }
        tensor_sum_many(&sets, opts.workers, integrands.len(), |idx, _, out, scratch: &mut HeckeScratch| {
            let mut base = C64::new(1.0, 0.0);
            for a in 0..k {
                base *= psi[a][idx[a]];
                for b in a + 1..k {
                    base *= cross[a * k + b][idx[a] * sizes[b] + idx[b]];
                }
            }
            // phi_f(w_var) at phi[f * k + var], T coefficients at tco[u * k + v].
            scratch.phi.clear();
            for f in &phi {
                scratch.phi.extend((0..k).map(|var| f[var][idx[var]]));
            }
            if needs_t {
                scratch.tco.clear();
                scratch.tco.extend((0..k * k).map(|uv| tco[uv].get(idx[uv / k] * sizes[uv % k] + idx[uv % k]).copied().unwrap_or_default()));
            }
            let (phi_at, tco_at) = (&scratch.phi, &scratch.tco);
            program.eval(
                &mut scratch.vals,
                scalar,
                |slot, perm| slot.iter().zip(perm).map(|(&f, &var)| phi_at[f * k + var]).product(),
                |u, v| tco_at[u * k + v],
            );
            for (j, o) in out.iter_mut().enumerate() {
                *o = base * program.output(&scratch.vals, j);
            }
        })
    })?;
    for (value, integrand) in out.iter_mut().zip(integrands) {
        value.value *= integrand.prefactor;
        value.error *= integrand.prefactor.norm();
    }
    Ok(out)
}

/// `Π_{ζ ∈ num} (1 - ζ w) / Π_{ζ ∈ den} (1 - ζ w)` as a univariate factor.
pub fn linear_ratio(num: Vec<f64>, den: Vec<f64>) -> UniFn {
    Arc::new(move |w: C64| {
        let mut v = C64::new(1.0, 0.0);
        for z in &num {
            v *= C64::new(1.0, 0.0) - w * *z;
        }
        for z in &den {
            v /= C64::new(1.0, 0.0) - w * *z;
        }
        v
    })
}

fn q_pow(q: f64, e: i64) -> f64 {
    q.powi(e as i32)
}

/// A q-moment query: points, nondecreasing colors and a permutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub points: Vec<DualPoint>,
    pub colors: Vec<Color>,
    pub pi: Permutation,
}

impl MomentQuery {
    pub fn k(&self) -> usize {
        self.points.len()
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.k();
        if self.colors.len() != k || self.pi.k() != k {
            return Err(Error::Constraint(format!("{} points, {} colors and a permutation of {} letters", k, self.colors.len(), self.pi.k())));
        }
        if k == 0 {
            return Err(Error::Constraint("at least one point is required".into()));
        }
        for (i, w) in self.colors.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(Error::Constraint(format!("colors must be nondecreasing (position {})", i + 2)));
            }
        }
        Ok(())
    }

    /// alpha nondecreasing and beta nonincreasing.
    fn check_order(&self) -> Result<()> {
        for (i, w) in self.points.windows(2).enumerate() {
            if w[0].a2 > w[1].a2 || w[0].b2 < w[1].b2 {
                return Err(Error::Constraint(format!("points must have alpha nondecreasing and beta nonincreasing (position {})", i + 2)));
            }
        }
        Ok(())
    }
}

/// Value and diagnostics of a moment formula.
pub type MomentResult = IntegralValue;

fn q_prefactor(q: f64, pi: &Permutation) -> C64 {
    let k = pi.k() as i64;
    C64::new(q_pow(q, k * (k - 1) / 2 - pi.length() as i64), 0.0)
}

/// Base case of the moment formula: `q^{Σ R(f_{π(a)} - l_a)}` as an integral, with `Φ_a = Π_{j ≤ l_a}` and
/// `Ψ_a = Π_{j ≤ f_a}` over the parameters `zeta`.
pub fn base_case_integral(f: &[usize], l: &[usize], zeta: &[f64], q: f64, pi: &Permutation, opts: &QuadOptions) -> Result<IntegralValue> {
    let k = f.len();
    if l.len() != k || pi.k() != k {
        return Err(Error::Constraint("f, l and pi must have equal length".into()));
    }
    if f.windows(2).any(|w| w[0] < w[1]) || l.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Constraint("need f nonincreasing and l nondecreasing".into()));
    }
    if f.iter().chain(l.iter()).any(|&x| x > zeta.len()) {
        return Err(Error::Constraint("indices exceed the number of parameters".into()));
    }
    let slot_fns = (0..k).map(|a| linear_ratio(zeta[..l[a]].to_vec(), zeta[..l[a]].iter().map(|z| q * z).collect())).collect();
    let psi = (0..k)
        .map(|a| {
            let r = linear_ratio(zeta[..f[a]].iter().map(|z| q * z).collect(), zeta[..f[a]].to_vec());
            Arc::new(move |w: C64| r(w) / w) as UniFn
        })
        .collect();
    let integrand = HeckeIntegrand {
        variant: Variant::QDeformed,
        q,
        slot_fns,
        terms: vec![HeckeTerm { coef: C64::new(1.0, 0.0), word: pi.reduced_word(), slots: (0..k).collect() }],
        psi,
        prefactor: q_prefactor(q, pi),
    };
    let spec = PoleSpec {
        q,
        inside: (0..k).map(|a| zeta[..f[a]].iter().map(|z| C64::new(1.0 / z, 0.0)).collect()).collect(),
        excluded: zeta.iter().map(|z| C64::new(1.0 / (q * z), 0.0)).collect(),
    };
    integrate_hecke(&integrand, &build_contours(&spec)?, opts)
}

/// The ramp function `max(a, 0)`.
pub fn ramp(a: i64) -> i64 {
    a.max(0)
}

/// Exact value of the base case: `q^{Σ_a R(f_{π(a)} - l_a)}`.
pub fn base_case_exact(f: &[usize], l: &[usize], q: f64, pi: &Permutation) -> f64 {
    let e: i64 = (0..f.len()).map(|a| ramp(f[pi.apply(a + 1) - 1] as i64 - l[a] as i64)).sum();
    q.powi(e as i32)
}

/// Rapidities of the lines crossed on the way from the start of `Q` to `(alpha, beta)`:
/// rows below `beta` and columns right of `alpha`.
fn lines_below(domain: &SkewDomain, params: &ModelParams, p: &DualPoint) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 1..=domain.rows() {
        if (2 * y as i64) < p.b2 {
            out.push(params.row_rapidities[y - 1]);
        }
    }
    for x in 1..=domain.cols() {
        if (2 * x as i64) > p.a2 {
            out.push(params.col_rapidities[x - 1]);
        }
    }
    out
}

/// Integral formula for `E q^{Σ_a h_{>c_a}(α_{π(a)}, β_{π(a)})}` on a skew domain.
pub fn qmoment_skew(domain: &SkewDomain, params: &ModelParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    let mut out = qmoment_skew_many(domain, params, std::slice::from_ref(query), opts)?;
    Ok(out.pop().expect("one query"))
}

/// [`qmoment_skew`] for many queries. Queries with the same points and colors share their
/// contours and are integrated in one pass, one output per permutation.
pub fn qmoment_skew_many(domain: &SkewDomain, params: &ModelParams, queries: &[MomentQuery], opts: &QuadOptions) -> Result<Vec<MomentResult>> {
    params.validate()?;
    if params.row_rapidities.len() < domain.rows() || params.col_rapidities.len() < domain.cols() {
        return Err(Error::InvalidParameters("missing rapidities".into()));
    }
    let upper = domain.upper().points();
    for query in queries {
        query.check_shape()?;
        query.check_order()?;
        for p in &query.points {
            if !upper.contains(p) {
                return Err(Error::Constraint(format!("point {p} is not on the upper path")));
            }
        }
    }
    let q = params.q;
    let zeta = domain.zeta(params);
    let mut groups: Vec<(&[DualPoint], &[Color], Vec<usize>)> = Vec::new();
    for (i, query) in queries.iter().enumerate() {
        match groups.iter_mut().find(|(p, c, _)| *p == query.points.as_slice() && *c == query.colors.as_slice()) {
            Some(g) => g.2.push(i),
            None => groups.push((&query.points, &query.colors, vec![i])),
        }
    }
    let mut out: Vec<Option<MomentResult>> = vec![None; queries.len()];
    for (points, colors, members) in groups {
        let k = points.len();
        let slot_fns: Vec<UniFn> = colors
            .iter()
            .map(|&c| {
                let l = domain.level(c);
                linear_ratio(zeta[..l].to_vec(), zeta[..l].iter().map(|z| q * z).collect())
            })
            .collect();
        let crossed: Vec<Vec<f64>> = points.iter().map(|p| lines_below(domain, params, p)).collect();
        let psi: Vec<UniFn> = crossed
            .iter()
            .map(|zs| {
                let r = linear_ratio(zs.iter().map(|z| q * z).collect(), zs.clone());
                Arc::new(move |w: C64| r(w) / w) as UniFn
            })
            .collect();
        let integrands: Vec<HeckeIntegrand> = members
            .iter()
            .map(|&i| {
                let pi = &queries[i].pi;
                HeckeIntegrand {
                    variant: Variant::QDeformed,
                    q,
                    slot_fns: slot_fns.clone(),
                    terms: vec![HeckeTerm { coef: C64::new(1.0, 0.0), word: pi.reduced_word(), slots: (0..k).collect() }],
                    psi: psi.clone(),
                    prefactor: q_prefactor(q, pi),
                }
            })
            .collect();
        let spec = PoleSpec {
            q,
            inside: crossed.iter().map(|zs| zs.iter().map(|z| C64::new(1.0 / z, 0.0)).collect()).collect(),
            excluded: zeta.iter().map(|z| C64::new(1.0 / (q * z), 0.0)).collect(),
        };
        let values = integrate_hecke_many(&integrands, &build_contours(&spec)?, opts)?;
        for (i, v) in members.into_iter().zip(values) {
            out[i] = Some(v);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every query is in a group")).collect())
}

/// Parts of the higher-spin integrand shared by the direct, κ-expanded and shifted forms.
struct HigherSpinParts {
    level_fn: Box<dyn Fn(u32) -> UniFn>,
    psi: Vec<UniFn>,
    spec: PoleSpec,
}

fn higher_spin_parts(params: &ModelParams, query: &MomentQuery) -> Result<HigherSpinParts> {
    query.check_shape()?;
    query.check_order()?;
    params.validate()?;
    let q = params.q;
    let top_row = query.points.iter().map(|p| ((p.b2 - 1) / 2) as usize).max().unwrap_or(0);
    let right_col = query.points.iter().map(|p| ((p.a2 - 1) / 2) as usize).max().unwrap_or(0);
    if query.points.iter().any(|p| p.a2 <= 0 || p.b2 <= 0) {
        return Err(Error::Constraint("points must lie in the positive quadrant".into()));
    }
    if params.row_rapidities.len() < top_row || params.col_rapidities.len() < right_col || params.col_spins.len() < right_col {
        return Err(Error::InvalidParameters(format!("need {top_row} row rapidities and {right_col} column rapidities and spins")));
    }
    if params.level(params.boundary_levels.len() as Color) < top_row as u32 {
        return Err(Error::Constraint(format!("boundary levels must color every row up to {top_row}")));
    }
    let u = params.row_rapidities.clone();
    let uq = u.clone();
    let levels = params.clone();
    let level_fn = Box::new(move |c: u32| {
        let l = levels.level(c) as usize;
        linear_ratio(uq[..l].to_vec(), uq[..l].iter().map(|z| q * z).collect())
    });
    let mut psi = Vec::new();
    let mut inside = Vec::new();
    let mut excluded: Vec<C64> = u.iter().map(|z| C64::new(1.0 / (q * z), 0.0)).collect();
    for p in &query.points {
        let rows = ((p.b2 - 1) / 2) as usize;
        let cols = ((p.a2 - 1) / 2) as usize;
        let us: Vec<f64> = u[..rows].to_vec();
        let spins: Vec<(f64, f64)> = (0..cols).map(|j| (params.col_spins[j], params.col_rapidities[j])).collect();
        for &(s, y) in &spins {
            excluded.push(C64::new(s / y, 0.0));
        }
        let r = linear_ratio(us.iter().map(|z| q * z).collect(), us.clone());
        psi.push(Arc::new(move |w: C64| {
            let mut v = r(w) / w;
            for &(s, y) in &spins {
                v *= (w * s - 1.0 / y) * s / (w - s / y);
            }
            v
        }) as UniFn);
        inside.push(us.iter().map(|z| C64::new(1.0 / z, 0.0)).collect());
    }
    Ok(HigherSpinParts { level_fn, psi, spec: PoleSpec { q, inside, excluded } })
}

/// Integral formula for the higher-spin quadrant model.
pub fn qmoment_higher_spin(params: &ModelParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    let parts = higher_spin_parts(params, query)?;
    let k = query.k();
    let integrand = HeckeIntegrand {
        variant: Variant::QDeformed,
        q: params.q,
        slot_fns: query.colors.iter().map(|&c| (parts.level_fn)(c)).collect(),
        terms: vec![HeckeTerm { coef: C64::new(1.0, 0.0), word: query.pi.reduced_word(), slots: (0..k).collect() }],
        psi: parts.psi,
        prefactor: q_prefactor(params.q, &query.pi),
    };
    integrate_hecke(&integrand, &build_contours(&parts.spec)?, opts)
}

/// The same moment through the expansion `T_π = Σ_ρ κ_π^ρ t_ρ`.
pub fn qmoment_higher_spin_kappa(params: &ModelParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    let parts = higher_spin_parts(params, query)?;
    let q = params.q;
    let phis: Vec<UniFn> = query.colors.iter().map(|&c| (parts.level_fn)(c)).collect();
    let pi = query.pi.clone();
    let psi = parts.psi;
    let g = move |w: &[C64]| -> C64 {
        let k = w.len();
        let Ok(kap) = kappa_all(&pi, w, q) else {
            return C64::new(f64::NAN, f64::NAN);
        };
        let mut sum = C64::default();
        for (rho, coef) in &kap {
            let mut p = *coef;
            for a in 0..k {
                p *= phis[a](w[rho.apply(a + 1) - 1]);
            }
            sum += p;
        }
        let mut v = sum;
        for a in 0..k {
            v *= psi[a](w[a]);
            for b in a + 1..k {
                v *= cross_factor(Variant::QDeformed, q, w[a], w[b]);
            }
        }
        v
    };
    let mut out = quadrature(&g, &build_contours(&parts.spec)?, opts)?;
    let pref = q_prefactor(q, &query.pi);
    out.value *= pref;
    out.error *= pref.norm();
    Ok(out)
}

/// Coefficient `(-1)^j q^{binom(m-j, 2)} / ((q;q)_j (q;q)_{m-j})`.
pub fn shifted_coefficient(m: u32, j: u32, q: f64) -> f64 {
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let e = (m - j) as i32 * (m as i32 - j as i32 - 1) / 2;
    sign * q.powi(e) / (qpoch(&q, &q, j) * qpoch(&q, &q, m - j))
}

/// Blocks `(color, start, size)` of a monotone color tuple.
fn color_blocks(colors: &[Color]) -> Vec<(Color, usize, usize)> {
    let mut out: Vec<(Color, usize, usize)> = Vec::new();
    for (i, &c) in colors.iter().enumerate() {
        match out.last_mut() {
            Some(b) if b.0 == c => b.2 += 1,
            _ => out.push((c, i, 1)),
        }
    }
    out
}

/// The coset `π S_c` of the stabilizer of `c`.
pub fn coset(pi: &Permutation, colors: &[Color]) -> Vec<Permutation> {
    let k = colors.len();
    let blocks = color_blocks(colors);
    Permutation::all(k)
        .into_iter()
        .filter(|s| blocks.iter().all(|&(_, start, size)| (start..start + size).all(|i| s.images0()[i] >= start && s.images0()[i] < start + size)))
        .map(|s| pi.compose(&s))
        .collect()
}

/// Exact integral formula for the shifted observable `E O^p_{π.c}` of the higher-spin model.
pub fn shifted_observable_exact(params: &ModelParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    if query.colors.contains(&0) {
        return Err(Error::Constraint("shifted observables use colors >= 1".into()));
    }
    let parts = higher_spin_parts(params, query)?;
    let q = params.q;
    let k = query.k();
    let blocks = color_blocks(&query.colors);
    let distinct: Vec<Color> = blocks.iter().flat_map(|b| [b.0 - 1, b.0]).collect::<BTreeSet<_>>().into_iter().collect();
    let slot_fns: Vec<UniFn> = distinct.iter().map(|&c| (parts.level_fn)(c)).collect();
    let slot_of = |c: Color| distinct.iter().position(|&d| d == c).expect("listed");
    // All splits (j_1, ..., j_n) with their coefficient and slot assignment.
    let mut splits: Vec<(f64, Vec<usize>)> = vec![(1.0, Vec::new())];
    for &(c, _, m) in &blocks {
        let mut next = Vec::new();
        for (coef, slots) in &splits {
            for j in 0..=m {
                let mut s = slots.clone();
                s.extend(std::iter::repeat_n(slot_of(c - 1), j));
                s.extend(std::iter::repeat_n(slot_of(c), m - j));
                next.push((coef * shifted_coefficient(m as u32, j as u32, q), s));
            }
        }
        splits = next;
    }
    let mut terms = Vec::new();
    for tau in coset(&query.pi, &query.colors) {
        let word = tau.reduced_word();
        for (coef, slots) in &splits {
            terms.push(HeckeTerm { coef: C64::new(*coef, 0.0), word: word.clone(), slots: slots.clone() });
        }
    }
    let integrand = HeckeIntegrand { variant: Variant::QDeformed, q, slot_fns, terms, psi: parts.psi, prefactor: C64::new((1.0 - q).powi(k as i32), 0.0) };
    integrate_hecke(&integrand, &build_contours(&parts.spec)?, opts)
}

/// The shifted observable `O^p_{π.c}` of one configuration, from the heights
/// `h_gt[i] = h_{>c'_i}(p_i)` and `h_ge[i] = h_{≥c'_i}(p_i)` with `c' = π.c`.
pub fn shifted_observable_value(q: f64, permuted_colors: &[Color], h_gt: &[u32], h_ge: &[u32]) -> f64 {
    let k = permuted_colors.len();
    let mut out = 1.0;
    for i in 0..k {
        let c = permuted_colors[i];
        let r_gt = permuted_colors[i + 1..].iter().filter(|&&x| x > c).count() as i32;
        let r_ge = permuted_colors[i + 1..].iter().filter(|&&x| x >= c).count() as i32;
        out *= q.powi(h_gt[i] as i32 - r_gt) - q.powi(h_ge[i] as i32 - r_ge);
    }
    out
}

/// `π.c`: the tuple with `(π.c)_i = c_{π^{-1}(i)}`.
pub fn permute_colors(pi: &Permutation, colors: &[Color]) -> Vec<Color> {
    let inv = pi.inverse();
    (1..=colors.len()).map(|i| colors[inv.apply(i) - 1]).collect()
}

/// Integral formula for the q-Hahn quadrant model.
pub fn qmoment_qhahn(params: &QHahnParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    query.check_shape()?;
    query.check_order()?;
    params.validate()?;
    let (q, s, z) = (params.q, params.s, params.z);
    let levels = ModelParams { boundary_levels: params.boundary_levels.clone(), ..ModelParams::new(q, vec![], vec![]) };
    let k = query.k();
    let beta_k = query.points[k - 1].b2;
    let top_level = levels.level(query.colors[k - 1]) as i64;
    if beta_k <= 2 * top_level {
        return Err(Error::Unsupported(format!("need beta_k > l_(c_k) = {top_level}")));
    }
    let top_row = query.points.iter().map(|p| (p.b2 - 1) / 2).max().unwrap_or(0);
    if (levels.level(params.boundary_levels.len() as Color) as i64) < top_row {
        return Err(Error::Constraint(format!("boundary levels must color every row up to {top_row}")));
    }
    let zi2 = 1.0 / (z * z);
    let slot_fns = query
        .colors
        .iter()
        .map(|&c| {
            let l = levels.level(c) as i32;
            Arc::new(move |w: C64| ((C64::new(1.0, 0.0) - w * s) / (C64::new(1.0, 0.0) - w * (zi2 * s))).powi(l)) as UniFn
        })
        .collect();
    let psi = query
        .points
        .iter()
        .map(|p| {
            let eb = ((p.b2 - 1) / 2) as i32;
            let ea = ((p.a2 - 1) / 2) as i32;
            Arc::new(move |w: C64| {
                let one = C64::new(1.0, 0.0);
                ((one - w * (zi2 * s)) / (one - w * s)).powi(eb) * ((w * s - 1.0) * s / (w - s)).powi(ea) * s / (w * (s - w))
            }) as UniFn
        })
        .collect();
    let integrand = HeckeIntegrand {
        variant: Variant::QDeformed,
        q,
        slot_fns,
        terms: vec![HeckeTerm { coef: C64::new(1.0, 0.0), word: query.pi.reduced_word(), slots: (0..k).collect() }],
        psi,
        prefactor: q_prefactor(q, &query.pi),
    };
    integrate_hecke(&integrand, &qhahn_contours(params, k), opts)
}

/// Contours for the q-Hahn formula: q-nested circles around 0 together with circles
/// around `1/s` centered on the real axis.
///
/// The component around `1/s` of variable `a` spans the real interval `[z/s, U_a]` with
/// `U_k = 1/(s z)` and `U_a = 1.5 U_{a+1} / q`, so it contains `q^{-1}` times the component
/// of every later variable while keeping `s` and the removable point `z^2/s` outside.
pub fn qhahn_contours(params: &QHahnParams, k: usize) -> ContourFamily {
    let (q, s, z) = (params.q, params.s, params.z);
    let left = z / s;
    let mut right = vec![0.0; k];
    for a in (0..k).rev() {
        right[a] = if a + 1 == k { 1.0 / (s * z) } else { 1.5 * right[a + 1] / q };
    }
    let r0 = s / 4.0;
    let contours = (0..k)
        .map(|a| {
            vec![
                Circle { center: C64::new((left + right[a]) / 2.0, 0.0), radius: (right[a] - left) / 2.0 },
                Circle { center: C64::default(), radius: q.powi(2 * (a as i32 + 1)) * r0 },
            ]
        })
        .collect();
    let margin = ((left - z * z / s) / (right[0] - left)).min(1.0 / q);
    ContourFamily { contours, margin }
}

/// A Beta-polymer query: `E Π_i Z_(c_i)^(m, t)` at `(m, t) = (α_{π(i)} + 1/2, β_{π(i)} + 1/2)`.
pub fn polymer_point(p: &DualPoint) -> (usize, usize) {
    (((p.a2 + 1) / 2) as usize, ((p.b2 + 1) / 2) as usize)
}

/// Concentric circles around `-σ/2` with radii `i (1 + δ)`; `δ` is the largest value in
/// `[1/4, 1]` keeping the outer radius below `0.6 σ`.
pub fn polymer_contours(params: &PolymerParams, k: usize) -> Result<(ContourFamily, f64)> {
    let delta = (0.6 * params.sigma / k as f64 - 1.0).min(1.0);
    if delta < 0.25 {
        return Err(Error::InfeasibleContour(format!("sigma = {} is too small for {k} nested circles around -sigma/2 avoiding sigma/2", params.sigma)));
    }
    let center = C64::new(-params.sigma / 2.0, 0.0);
    let contours = (1..=k).map(|i| vec![Circle { center, radius: i as f64 * (1.0 + delta) }]).collect();
    let r_max = k as f64 * (1.0 + delta);
    Ok((ContourFamily { contours, margin: (params.sigma / r_max).min(1.0 + delta) }, delta))
}

/// Integral formula for moments of delayed Beta-polymer partition functions.
pub fn beta_moment(params: &PolymerParams, query: &MomentQuery, opts: &QuadOptions) -> Result<MomentResult> {
    query.check_shape()?;
    query.check_order()?;
    params.validate()?;
    let k = query.k();
    if query.points[k - 1].b2 <= 2 * query.colors[k - 1] as i64 {
        return Err(Error::Constraint("need beta_k > c_k".into()));
    }
    for i in 0..k {
        let p = query.points[query.pi.apply(i + 1) - 1];
        if p.a2 + 2 * query.colors[i] as i64 > p.b2 {
            return Err(Error::Constraint(format!("alpha_pi({}) + c_{} exceeds beta_pi({})", i + 1, i + 1, i + 1)));
        }
    }
    let (sig, rho) = (params.sigma, params.rho);
    let h = sig / 2.0;
    let slot_fns = query.colors.iter().map(|&c| Arc::new(move |w: C64| ((w - h) / (w - h + rho)).powi(c as i32)) as UniFn).collect();
    let psi = query
        .points
        .iter()
        .map(|p| {
            let eb = ((p.b2 - 1) / 2) as i32;
            let ea = ((p.a2 - 1) / 2) as i32;
            Arc::new(move |w: C64| ((w - h + rho) / (w - h)).powi(eb) * ((w - h) / (w + h)).powi(ea) / (w + h)) as UniFn
        })
        .collect();
    let integrand = HeckeIntegrand {
        variant: Variant::Polymer,
        q: 1.0,
        slot_fns,
        terms: vec![HeckeTerm { coef: C64::new(1.0, 0.0), word: query.pi.reduced_word(), slots: (0..k).collect() }],
        psi,
        prefactor: C64::new(1.0, 0.0),
    };
    let (family, _) = polymer_contours(params, k)?;
    integrate_hecke(&integrand, &family, opts)
}

/// Lines of a skew domain in the order their steps appear on `Q`, with rapidities.
pub fn zeta_lines(domain: &SkewDomain, params: &ModelParams) -> Vec<(Line, f64)> {
    domain.lines().iter().copied().zip(domain.zeta(params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hecke::HeckeTPi;

    #[test]
    fn hecke_dag_matches_operator_for_every_word() {
        let w: Vec<C64> = [(0.7, 0.2), (1.9, -0.4), (-1.1, 0.8), (2.6, 1.3)].iter().map(|&(a, b)| C64::new(a, b)).collect();
        let phi = |a: usize, x: C64| (x - 0.3 * (a as f64 + 1.0)) / (x - 3.0 - a as f64);
        for variant in [Variant::QDeformed, Variant::Polymer] {
            let q = 0.45;
            for k in 1..=4 {
                let w = &w[..k];
                // All permutations share one program, so shared subterms are exercised too.
                let perms = Permutation::all(k);
                let terms: Vec<HeckeTerm> =
                    perms.iter().map(|pi| HeckeTerm { coef: C64::new(1.0, 0.0), word: pi.reduced_word(), slots: (0..k).collect() }).collect();
                let program = HeckeProgram::compile(k, &terms.iter().map(std::slice::from_ref).collect::<Vec<_>>());
                let mut vals = Vec::new();
                program.eval(
                    &mut vals,
                    t_scalar(variant, q),
                    |slots, perm| slots.iter().zip(perm).map(|(&a, &var)| phi(a, w[var])).product(),
                    |u, v| t_coefficient(variant, q, w[u], w[v]),
                );
                for (j, pi) in perms.iter().enumerate() {
                    let f = Arc::new(move |x: &[C64]| x.iter().enumerate().map(|(a, &v)| phi(a, v)).product::<C64>());
                    let direct = HeckeTPi::with_word(pi.reduced_word(), f, q, variant).eval(w).unwrap();
                    let via_dag = program.output(&vals, j);
                    assert!((direct - via_dag).norm() < 1e-12 * direct.norm().max(1.0), "{variant:?} pi={:?}: {direct} vs {via_dag}", pi.images());
                }
            }
        }
    }

    #[test]
    fn unit_circle_residue() {
        let fam = ContourFamily { contours: vec![vec![Circle { center: C64::default(), radius: 0.7 }]], margin: 1.0 };
        let v = quadrature(&|w: &[C64]| C64::new(1.0, 0.0) / w[0], &fam, &QuadOptions::default()).unwrap();
        assert!((v.value - 1.0).norm() < 1e-14);
    }

    #[test]
    fn single_pole_family() {
        let spec = PoleSpec { q: 0.5, inside: vec![vec![C64::new(1.0, 0.0)]; 2], excluded: vec![] };
        let fam = build_contours(&spec).unwrap();
        let r0 = fam.contours[0][1].radius / 0.25;
        assert!((fam.contours[1][1].radius - 0.5f64.powi(4) * r0).abs() < 1e-15);
        // q-nesting: the inner circle divided by q stays inside the outer one.
        assert!(fam.contours[1][1].radius / 0.5 < fam.contours[0][1].radius);
    }

    #[test]
    fn colliding_poles_rejected() {
        let spec = PoleSpec { q: 0.4, inside: vec![vec![C64::new(1.0, 0.0), C64::new(2.5, 0.0)]], excluded: vec![] };
        assert!(matches!(build_contours(&spec), Err(Error::InfeasibleContour(_))));
        let spec = PoleSpec { q: 0.4, inside: vec![vec![C64::new(1.0, 0.0), C64::new(1.0 / 1.3, 0.0)]], excluded: vec![] };
        assert!(build_contours(&spec).is_ok());
    }

    #[test]
    fn base_case_single_variable() {
        let q = 0.4;
        let v = base_case_integral(&[2], &[1], &[1.0, 2.0], q, &Permutation::identity(1), &QuadOptions::default()).unwrap();
        assert!((v.value - q).norm() < 1e-12, "{:?}", v);
    }

    #[test]
    fn shifted_coefficients_k1() {
        let q = 0.3;
        assert!((shifted_coefficient(1, 0, q) - 1.0 / (1.0 - q)).abs() < 1e-15);
        assert!((shifted_coefficient(1, 1, q) + 1.0 / (1.0 - q)).abs() < 1e-15);
    }
}
