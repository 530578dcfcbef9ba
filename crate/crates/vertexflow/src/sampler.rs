//! Monte Carlo samplers for the unfused, higher-spin, q-Hahn and Beta-polymer models,
//! and exhaustive-enumeration oracles for small domains.
//!
//! Randomness: samples are grouped in blocks of [`BLOCK_SIZE`]; block `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `b`. Blocks are distributed
//! over the worker pool and merged in block order, so results depend only on
//! `(seed, count)` and never on the number of workers.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Color, ColorComposition, Configuration, EdgeRef, EdgeView, LabelGrid, ModelParams, SkewDomain};
use crate::weights::{l_outcomes, qhahn_boundary_prob, qhahn_split_weight, r_outcomes, Field};

/// Samples per RNG stream.
pub const BLOCK_SIZE: usize = 1024;

/// Default enumeration cap for unfused domains.
pub const DEFAULT_CAP: usize = 16;

/// Probability slack tolerated before a weight is reported out of range.
const PROB_TOL: f64 = 1e-12;

/// The generator for one block of samples.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// How many samples to draw, from which seed, on how many workers (`0` means all cores).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub seed: u64,
    pub count: usize,
    pub workers: usize,
}

impl Plan {
    pub fn new(seed: u64, count: usize) -> Self {
        Plan { seed, count, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Runs `f(rng, n)` once per block and returns the block results in block order.
pub fn run_blocks<T, F>(plan: &Plan, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync + Send,
{
    let blocks = plan.count.div_ceil(BLOCK_SIZE);
    let job = || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let n = BLOCK_SIZE.min(plan.count - b * BLOCK_SIZE);
                f(&mut block_rng(plan.seed, b as u64), n)
            })
            .collect::<Vec<T>>()
    };
    if plan.workers == 0 {
        job()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(plan.workers).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        }
    }
}

/// Running sums for the sample mean and standard error of a vector of observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAccumulator {
    pub n: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl MeanAccumulator {
    pub fn new(dim: usize) -> Self {
        MeanAccumulator { n: 0, sum: vec![0.0; dim], sum_sq: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, values: &[f64]) {
        self.n += 1;
        for (i, v) in values.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        self.n += other.n;
        for i in 0..self.dim() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    /// Standard error of the mean of observable `i`.
    pub fn std_err(&self, i: usize) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean(i);
        let var = ((self.sum_sq[i] - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Which model produced a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sc6vSkew,
    HigherSpinQuadrant,
    QhahnQuadrant,
}

/// Parameters of the q-Hahn quadrant model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QHahnParams {
    pub q: f64,
    pub s: f64,
    pub z: f64,
    /// `l_1 <= l_2 <= ...`; color `c` enters rows `l_{c-1}+1 ..= l_c`.
    pub boundary_levels: Vec<u32>,
}

impl QHahnParams {
    pub fn validate(&self) -> Result<()> {
        let (q, s, z) = (self.q, self.s, self.z);
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameters(format!("q = {q} is not in (0,1)")));
        }
        if !(s * s > 0.0 && s * s < z * z && z * z < 1.0) {
            return Err(Error::InvalidParameters(format!("need 0 < s^2 < z^2 < 1, got s = {s}, z = {z}")));
        }
        if self.boundary_levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameters("boundary_levels must be nondecreasing".into()));
        }
        Ok(())
    }

    pub fn row_color(&self, r: usize) -> Color {
        self.boundary_levels.iter().position(|&l| r as u32 <= l).map_or(0, |i| i as Color + 1)
    }
}

/// Parameter record attached to a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchParams {
    Model(ModelParams),
    QHahn(QHahnParams),
}

/// A batch of sampled configurations.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub configs: Vec<Configuration>,
    pub seed: u64,
    pub params: BatchParams,
    pub model_kind: ModelKind,
}

/// A sampler that fills a reusable edge grid with one random configuration at a time.
pub trait GridSampler: Sync {
    type Grid: EdgeView + Clone + Send;
    type Scratch: Default + Send;

    fn domain(&self) -> &Arc<SkewDomain>;
    fn n_colors(&self) -> usize;
    fn blank(&self) -> Self::Grid;
    fn draw(&self, rng: &mut ChaCha8Rng, grid: &mut Self::Grid, scratch: &mut Self::Scratch) -> Result<()>;
    fn to_configuration(&self, grid: &Self::Grid) -> Configuration;
}

/// Draws `plan.count` grids.
pub fn sample_grids<S: GridSampler>(sampler: &S, plan: &Plan) -> Result<Vec<S::Grid>> {
    let blocks = run_blocks(plan, |rng, n| -> Result<Vec<S::Grid>> {
        let mut grid = sampler.blank();
        let mut scratch = S::Scratch::default();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            sampler.draw(rng, &mut grid, &mut scratch)?;
            out.push(grid.clone());
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(plan.count);
    for b in blocks {
        all.extend(b?);
    }
    Ok(all)
}

/// Streams `plan.count` samples through `observe`, which writes `dim` values per sample.
pub fn sample_mean<S, F>(sampler: &S, plan: &Plan, dim: usize, observe: F) -> Result<MeanAccumulator>
where
    S: GridSampler,
    F: Fn(&S::Grid, &mut [f64]) + Sync + Send,
{
    let blocks = run_blocks(plan, |rng, n| -> Result<MeanAccumulator> {
        let mut grid = sampler.blank();
        let mut scratch = S::Scratch::default();
        let mut acc = MeanAccumulator::new(dim);
        let mut buf = vec![0.0; dim];
        for _ in 0..n {
            sampler.draw(rng, &mut grid, &mut scratch)?;
            observe(&grid, &mut buf);
            acc.push(&buf);
        }
        Ok(acc)
    });
    let mut total = MeanAccumulator::new(dim);
    for b in blocks {
        total.merge(&b?);
    }
    Ok(total)
}

/// Draws a batch of full configurations.
pub fn sample_batch<S: GridSampler>(sampler: &S, plan: &Plan, params: BatchParams, model_kind: ModelKind) -> Result<SampleBatch> {
    let grids = sample_grids(sampler, plan)?;
    Ok(SampleBatch { configs: grids.iter().map(|g| sampler.to_configuration(g)).collect(), seed: plan.seed, params, model_kind })
}

// ---------------------------------------------------------------------------
// Unfused model
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Sc6vVertex {
    bottom: usize,
    left: usize,
    top: usize,
    right: usize,
    /// Probability of passing straight through when the smaller color arrives from below.
    p_low: f64,
    /// The same when the larger color arrives from below.
    p_high: f64,
}

/// Sampler for the unfused model on a skew domain.
#[derive(Clone, Debug)]
pub struct Sc6vSampler {
    domain: Arc<SkewDomain>,
    vertices: Vec<Sc6vVertex>,
    boundary: Vec<(EdgeRef, Color)>,
}

impl Sc6vSampler {
    /// Precomputes vertex probabilities and checks that they lie in `[0, 1]`.
    pub fn new(domain: Arc<SkewDomain>, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        check_rapidities(&domain, params)?;
        let grid = LabelGrid::new(domain.rows(), domain.cols());
        let q = params.q;
        let mut vertices = Vec::with_capacity(domain.vertex_count());
        for &(x, y) in domain.vertices() {
            let z = params.row_rapidities[y - 1] / params.col_rapidities[x - 1];
            if (z - q).abs() < 1e-14 {
                return Err(Error::ParameterSingularity(format!("z = q at vertex (col {x}, row {y})")));
            }
            let p_low = (z - 1.0) / (z - q);
            let p_high = q * p_low;
            for p in [p_low, p_high] {
                if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
                    return Err(Error::ParameterRange { col: x, row: y, value: format!("{p}") });
                }
            }
            vertices.push(Sc6vVertex {
                bottom: grid.v_index(x, y - 1),
                left: grid.h_index(x - 1, y),
                top: grid.v_index(x, y),
                right: grid.h_index(x, y),
                p_low,
                p_high,
            });
        }
        let boundary = domain.incoming_edges().into_iter().zip(domain.coloring().iter().copied()).collect();
        Ok(Sc6vSampler { domain, vertices, boundary })
    }
}

fn check_rapidities(domain: &SkewDomain, params: &ModelParams) -> Result<()> {
    if params.row_rapidities.len() < domain.rows() || params.col_rapidities.len() < domain.cols() {
        return Err(Error::InvalidParameters(format!("need {} row and {} column rapidities", domain.rows(), domain.cols())));
    }
    Ok(())
}

impl GridSampler for Sc6vSampler {
    type Grid = LabelGrid;
    type Scratch = ();

    fn domain(&self) -> &Arc<SkewDomain> {
        &self.domain
    }

    fn n_colors(&self) -> usize {
        self.domain.max_color() as usize
    }

    fn blank(&self) -> LabelGrid {
        let mut g = LabelGrid::new(self.domain.rows(), self.domain.cols());
        for &(e, c) in &self.boundary {
            g.set(e, c);
        }
        g
    }

    fn draw(&self, rng: &mut ChaCha8Rng, g: &mut LabelGrid, _: &mut ()) -> Result<()> {
        for v in &self.vertices {
            let i = g.v[v.bottom];
            let j = g.h[v.left];
            let (k, l) = if i == j {
                (i, j)
            } else {
                let p = if i < j { v.p_low } else { v.p_high };
                if rng.gen::<f64>() < p {
                    (i, j)
                } else {
                    (j, i)
                }
            };
            g.v[v.top] = k;
            g.h[v.right] = l;
        }
        Ok(())
    }

    fn to_configuration(&self, g: &LabelGrid) -> Configuration {
        Configuration::from_labels(self.domain.clone(), self.n_colors(), g)
    }
}

/// Samples `count` configurations of the unfused model on a skew domain.
pub fn sample_sc6v(domain: Arc<SkewDomain>, params: &ModelParams, seed: u64, count: usize) -> Result<SampleBatch> {
    let sampler = Sc6vSampler::new(domain, params)?;
    sample_batch(&sampler, &Plan::new(seed, count), BatchParams::Model(params.clone()), ModelKind::Sc6vSkew)
}

/// Every configuration of an unfused domain with its product weight.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble<T = C64> {
    pub domain: Arc<SkewDomain>,
    pub entries: Vec<(T, LabelGrid)>,
}

impl<T: Field> WeightedEnsemble<T> {
    pub fn total_weight(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, (w, _)| acc + w.clone())
    }

    /// `sum_config weight(config) * f(config)`.
    pub fn expect<F: Fn(&LabelGrid) -> T>(&self, f: F) -> T {
        self.entries.iter().fold(T::zero(), |acc, (w, g)| acc + w.clone() * f(g))
    }

    pub fn configuration(&self, i: usize) -> Configuration {
        Configuration::from_labels(self.domain.clone(), self.domain.max_color() as usize, &self.entries[i].1)
    }
}

/// Enumerates all configurations with weights `R_{z(x,y)}` in any field.
pub fn enumerate_sc6v_with<T: Field>(domain: Arc<SkewDomain>, z: impl Fn(usize, usize) -> T, q: &T, cap: usize) -> Result<WeightedEnsemble<T>> {
    if domain.vertex_count() > cap {
        return Err(Error::CapExceeded { found: domain.vertex_count(), cap });
    }
    let mut grid = LabelGrid::new(domain.rows(), domain.cols());
    for (e, c) in domain.incoming_edges().into_iter().zip(domain.coloring().iter().copied()) {
        grid.set(e, c);
    }
    let zs: Vec<T> = domain.vertices().iter().map(|&(x, y)| z(x, y)).collect();
    let mut entries = Vec::new();
    let mut stack = vec![(0usize, T::one(), grid)];
    while let Some((idx, w, g)) = stack.pop() {
        if idx == zs.len() {
            entries.push((w, g));
            continue;
        }
        let (x, y) = domain.vertices()[idx];
        let i = g.v_at(x, y - 1);
        let j = g.h_at(x - 1, y);
        for (k, l, r) in r_outcomes(i, j, &zs[idx], q)? {
            if r.is_zero() {
                continue;
            }
            let mut g2 = g.clone();
            g2.set(EdgeRef::V(x, y), k);
            g2.set(EdgeRef::H(x, y), l);
            stack.push((idx + 1, w.clone() * r, g2));
        }
    }
    entries.reverse();
    Ok(WeightedEnsemble { domain, entries })
}

/// Enumerates all configurations of the unfused model with their complex weights.
pub fn enumerate_sc6v(domain: Arc<SkewDomain>, params: &ModelParams) -> Result<WeightedEnsemble<C64>> {
    enumerate_sc6v_capped(domain, params, DEFAULT_CAP)
}

pub fn enumerate_sc6v_capped(domain: Arc<SkewDomain>, params: &ModelParams, cap: usize) -> Result<WeightedEnsemble<C64>> {
    check_rapidities(&domain, params)?;
    let z = |x: usize, y: usize| C64::new(params.row_rapidities[y - 1] / params.col_rapidities[x - 1], 0.0);
    enumerate_sc6v_with(domain, z, &C64::new(params.q, 0.0), cap)
}

// ---------------------------------------------------------------------------
// Fused models
// ---------------------------------------------------------------------------

/// Weighted configurations of a fused model together with their domain.
pub type FusedEnsemble = (Arc<SkewDomain>, Vec<(f64, CompGrid)>);

/// Outcome law of one fused vertex given its position and incoming compositions.
type FusedKernel<'a> = dyn Fn(usize, usize, &[u32], &[u32]) -> Result<FusedOutcomes> + 'a;

/// Dense composition storage: `n` counts per edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompGrid {
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    pub h: Vec<u32>,
    pub v: Vec<u32>,
}

impl CompGrid {
    pub fn new(rows: usize, cols: usize, n: usize) -> Self {
        CompGrid { rows, cols, n, h: vec![0; (cols + 1) * rows * n], v: vec![0; cols * (rows + 1) * n] }
    }

    #[inline]
    pub fn h_offset(&self, x: usize, y: usize) -> usize {
        ((y - 1) * (self.cols + 1) + x) * self.n
    }

    #[inline]
    pub fn v_offset(&self, x: usize, y: usize) -> usize {
        (y * self.cols + (x - 1)) * self.n
    }

    pub fn h_slice(&self, x: usize, y: usize) -> &[u32] {
        let o = self.h_offset(x, y);
        &self.h[o..o + self.n]
    }

    pub fn v_slice(&self, x: usize, y: usize) -> &[u32] {
        let o = self.v_offset(x, y);
        &self.v[o..o + self.n]
    }

    pub fn set_h(&mut self, x: usize, y: usize, counts: &[u32]) {
        let o = self.h_offset(x, y);
        self.h[o..o + self.n].copy_from_slice(counts);
    }

    pub fn set_v(&mut self, x: usize, y: usize, counts: &[u32]) {
        let o = self.v_offset(x, y);
        self.v[o..o + self.n].copy_from_slice(counts);
    }

    pub fn to_configuration(&self, domain: Arc<SkewDomain>) -> Configuration {
        let mut out = Configuration::empty(domain, self.n);
        for y in 1..=self.rows {
            for x in 0..=self.cols {
                out.set(EdgeRef::H(x, y), ColorComposition::from_counts(self.h_slice(x, y).to_vec()));
            }
        }
        for y in 0..=self.rows {
            for x in 1..=self.cols {
                out.set(EdgeRef::V(x, y), ColorComposition::from_counts(self.v_slice(x, y).to_vec()));
            }
        }
        out
    }
}

impl EdgeView for CompGrid {
    fn h_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        self.h_slice(x, y)[(c as usize).min(self.n)..].iter().sum()
    }
    fn v_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        self.v_slice(x, y)[(c as usize).min(self.n)..].iter().sum()
    }
}

/// `(probability, top counts, right counts)` for each outcome of a fused vertex.
pub type FusedOutcomes = Vec<(f64, Vec<u32>, Vec<u32>)>;

fn check_prob(p: f64, x: usize, y: usize) -> Result<()> {
    if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) || !p.is_finite() {
        return Err(Error::ParameterRange { col: x, row: y, value: format!("{p}") });
    }
    Ok(())
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [(f64, T)]) -> &'a T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (p, item) in items {
        acc += p;
        if u < acc {
            return item;
        }
    }
    &items[items.len() - 1].1
}

/// Enumerates all configurations of a fused model given per-row boundary laws and a vertex kernel.
fn enumerate_fused(domain: &SkewDomain, n: usize, boundary: &[Vec<(f64, Vec<u32>)>], kernel: &FusedKernel<'_>, cap: usize) -> Result<Vec<(f64, CompGrid)>> {
    if domain.vertex_count() > cap {
        return Err(Error::CapExceeded { found: domain.vertex_count(), cap });
    }
    let rows = domain.rows();
    let mut starts: Vec<(f64, CompGrid)> = vec![(1.0, CompGrid::new(rows, domain.cols(), n))];
    for (y, law) in boundary.iter().enumerate() {
        let mut next = Vec::with_capacity(starts.len() * law.len());
        for (w, g) in &starts {
            for (p, counts) in law {
                let mut g2 = g.clone();
                g2.set_h(0, y + 1, counts);
                next.push((w * p, g2));
            }
        }
        starts = next;
    }
    let mut out = Vec::new();
    let mut stack: Vec<(usize, f64, CompGrid)> = starts.into_iter().map(|(w, g)| (0, w, g)).collect();
    while let Some((idx, w, g)) = stack.pop() {
        if idx == domain.vertex_count() {
            out.push((w, g));
            continue;
        }
        let (x, y) = domain.vertices()[idx];
        for (p, top, right) in kernel(x, y, g.v_slice(x, y - 1), g.h_slice(x - 1, y))? {
            if p == 0.0 {
                continue;
            }
            let mut g2 = g.clone();
            g2.set_v(x, y, &top);
            g2.set_h(x, y, &right);
            stack.push((idx + 1, w * p, g2));
        }
    }
    Ok(out)
}

/// Sampler for the higher-spin model on an `N x M` quadrant window.
#[derive(Clone, Debug)]
pub struct HigherSpinSampler {
    domain: Arc<SkewDomain>,
    params: ModelParams,
    n: usize,
}

impl HigherSpinSampler {
    pub fn new(params: &ModelParams, rows: usize, cols: usize) -> Result<Self> {
        params.validate()?;
        if params.row_rapidities.len() < rows || params.col_rapidities.len() < cols || params.col_spins.len() < cols {
            return Err(Error::InvalidParameters(format!("need {rows} row rapidities and {cols} column rapidities and spins")));
        }
        let row_colors: Vec<Color> = (1..=rows).map(|r| params.row_color(r)).collect();
        let n = row_colors.iter().copied().max().unwrap_or(0).max(1) as usize;
        let domain = Arc::new(SkewDomain::quadrant(&row_colors, cols)?);
        Ok(HigherSpinSampler { domain, params: params.clone(), n })
    }

    /// Outcomes of vertex `(x, y)` given the composition below and the counts on the left.
    pub fn outcomes(&self, x: usize, y: usize, below: &[u32], left: &[u32]) -> Result<FusedOutcomes> {
        let z = self.params.row_rapidities[y - 1] / self.params.col_rapidities[x - 1];
        let s = self.params.col_spins[x - 1];
        let j = left.iter().position(|&c| c > 0).map_or(0, |i| i as Color + 1);
        let big_i = ColorComposition::from_counts(below.to_vec());
        let mut out = Vec::new();
        for (k, l, w) in l_outcomes(&big_i, j, &z, &s, &self.params.q)? {
            check_prob(w, x, y)?;
            let mut right = vec![0; self.n];
            if l > 0 {
                right[l as usize - 1] = 1;
            }
            out.push((w, k.counts, right));
        }
        Ok(out)
    }

    fn boundary(&self) -> Vec<Vec<(f64, Vec<u32>)>> {
        (1..=self.domain.rows())
            .map(|r| {
                let mut counts = vec![0; self.n];
                let c = self.params.row_color(r);
                if c > 0 {
                    counts[c as usize - 1] = 1;
                }
                vec![(1.0, counts)]
            })
            .collect()
    }
}

impl GridSampler for HigherSpinSampler {
    type Grid = CompGrid;
    type Scratch = ();

    fn domain(&self) -> &Arc<SkewDomain> {
        &self.domain
    }

    fn n_colors(&self) -> usize {
        self.n
    }

    fn blank(&self) -> CompGrid {
        let mut g = CompGrid::new(self.domain.rows(), self.domain.cols(), self.n);
        for (y, law) in self.boundary().iter().enumerate() {
            g.set_h(0, y + 1, &law[0].1);
        }
        g
    }

    fn draw(&self, rng: &mut ChaCha8Rng, g: &mut CompGrid, _: &mut ()) -> Result<()> {
        for &(x, y) in self.domain.vertices() {
            let outs = self.outcomes(x, y, g.v_slice(x, y - 1), g.h_slice(x - 1, y))?;
            let items: Vec<(f64, _)> = outs.into_iter().map(|(p, t, r)| (p, (t, r))).collect();
            let (top, right) = pick(rng, &items);
            g.set_v(x, y, top);
            g.set_h(x, y, right);
        }
        Ok(())
    }

    fn to_configuration(&self, g: &CompGrid) -> Configuration {
        g.to_configuration(self.domain.clone())
    }
}

/// Samples the higher-spin model on an `N x M` quadrant window.
pub fn sample_higher_spin(params: &ModelParams, rect: (usize, usize), seed: u64, count: usize) -> Result<SampleBatch> {
    let sampler = HigherSpinSampler::new(params, rect.0, rect.1)?;
    sample_batch(&sampler, &Plan::new(seed, count), BatchParams::Model(params.clone()), ModelKind::HigherSpinQuadrant)
}

/// Exhaustive enumeration of the higher-spin model on a small window.
pub fn enumerate_higher_spin(params: &ModelParams, rows: usize, cols: usize, cap: usize) -> Result<FusedEnsemble> {
    let s = HigherSpinSampler::new(params, rows, cols)?;
    let entries = enumerate_fused(&s.domain, s.n, &s.boundary(), &|x, y, a, b| s.outcomes(x, y, a, b), cap)?;
    Ok((s.domain.clone(), entries))
}

/// The truncated law of the number of paths entering a q-Hahn row, as `(k, P(k))`.
/// Truncation stops once the remaining mass is below `1e-14`.
pub fn qhahn_boundary_law(s: f64, z: f64, q: f64) -> Result<Vec<(u32, f64)>> {
    let mut out = Vec::new();
    let mut total = 0.0;
    for k in 0..10_000u32 {
        let p = qhahn_boundary_prob(k, s, z, q);
        if !(0.0..=1.0 + PROB_TOL).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidParameters(format!("boundary probability P({k}) = {p}")));
        }
        total += p;
        out.push((k, p));
        if 1.0 - total < 1e-14 {
            break;
        }
    }
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameters(format!("boundary law sums to {total}")));
    }
    Ok(out)
}

/// Sampler for the q-Hahn quadrant model.
#[derive(Clone, Debug)]
pub struct QHahnSampler {
    domain: Arc<SkewDomain>,
    params: QHahnParams,
    n: usize,
    row_colors: Vec<Color>,
    /// Boundary law as `(probability, count)`.
    law: Vec<(f64, u32)>,
}

/// Per-worker cache of split laws keyed by the composition below.
#[derive(Default)]
pub struct SplitCache(HashMap<Vec<u32>, Vec<(f64, Vec<u32>)>>);

impl QHahnSampler {
    pub fn new(params: &QHahnParams, rows: usize, cols: usize) -> Result<Self> {
        params.validate()?;
        let row_colors: Vec<Color> = (1..=rows).map(|r| params.row_color(r)).collect();
        let n = row_colors.iter().copied().max().unwrap_or(0).max(1) as usize;
        let domain = Arc::new(SkewDomain::quadrant(&row_colors, cols)?);
        let law: Vec<(f64, u32)> = qhahn_boundary_law(params.s, params.z, params.q)?.into_iter().map(|(k, p)| (p, k)).collect();
        Ok(QHahnSampler { domain, params: params.clone(), n, row_colors, law })
    }

    /// Law of the counts `D` sent right out of `A` arriving from below.
    pub fn split_law(&self, below: &[u32]) -> Result<Vec<(f64, Vec<u32>)>> {
        let a = ColorComposition::from_counts(below.to_vec());
        let (s, z, q) = (self.params.s, self.params.z, self.params.q);
        let mut out = Vec::new();
        for d in a.all_below() {
            let p = qhahn_split_weight(&a, &d, &s, &z, &q)?;
            check_prob(p, 0, 0)?;
            out.push((p, d.counts));
        }
        Ok(out)
    }

    pub fn outcomes(&self, below: &[u32], left: &[u32]) -> Result<FusedOutcomes> {
        Ok(self
            .split_law(below)?
            .into_iter()
            .map(|(p, d)| {
                let top = (0..self.n).map(|i| below[i] + left[i] - d[i]).collect();
                (p, top, d)
            })
            .collect())
    }

    fn row_counts(&self, y: usize, k: u32) -> Vec<u32> {
        let mut counts = vec![0; self.n];
        let c = self.row_colors[y - 1];
        if c > 0 {
            counts[c as usize - 1] = k;
        }
        counts
    }
}

impl GridSampler for QHahnSampler {
    type Grid = CompGrid;
    type Scratch = SplitCache;

    fn domain(&self) -> &Arc<SkewDomain> {
        &self.domain
    }

    fn n_colors(&self) -> usize {
        self.n
    }

    fn blank(&self) -> CompGrid {
        CompGrid::new(self.domain.rows(), self.domain.cols(), self.n)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, g: &mut CompGrid, cache: &mut SplitCache) -> Result<()> {
        for y in 1..=self.domain.rows() {
            let k = *pick(rng, &self.law);
            let counts = self.row_counts(y, k);
            g.set_h(0, y, &counts);
        }
        let n = self.n;
        let mut top = vec![0; n];
        for &(x, y) in self.domain.vertices() {
            let below = g.v_slice(x, y - 1).to_vec();
            if !cache.0.contains_key(&below) {
                let law = self.split_law(&below).map_err(|e| match e {
                    Error::ParameterRange { value, .. } => Error::ParameterRange { col: x, row: y, value },
                    e => e,
                })?;
                cache.0.insert(below.clone(), law);
            }
            let d = pick(rng, &cache.0[&below]);
            let left = g.h_slice(x - 1, y);
            for i in 0..n {
                top[i] = below[i] + left[i] - d[i];
            }
            g.set_v(x, y, &top);
            g.set_h(x, y, d);
        }
        Ok(())
    }

    fn to_configuration(&self, g: &CompGrid) -> Configuration {
        g.to_configuration(self.domain.clone())
    }
}

/// Samples the q-Hahn model on an `N x M` quadrant window.
pub fn sample_qhahn(params: &QHahnParams, rect: (usize, usize), seed: u64, count: usize) -> Result<SampleBatch> {
    let sampler = QHahnSampler::new(params, rect.0, rect.1)?;
    sample_batch(&sampler, &Plan::new(seed, count), BatchParams::QHahn(params.clone()), ModelKind::QhahnQuadrant)
}

/// Enumerates the q-Hahn model with the boundary counts truncated at `k_max` per row.
/// The returned weights sum to the probability that no row exceeds `k_max`.
pub fn enumerate_qhahn(params: &QHahnParams, rows: usize, cols: usize, k_max: u32, cap: usize) -> Result<FusedEnsemble> {
    let s = QHahnSampler::new(params, rows, cols)?;
    let law: Vec<(u32, f64)> = s.law.iter().map(|&(p, k)| (k, p)).filter(|&(k, _)| k <= k_max).collect();
    let boundary: Vec<Vec<(f64, Vec<u32>)>> = (1..=rows)
        .map(|y| if s.row_colors[y - 1] == 0 { vec![(1.0, vec![0; s.n])] } else { law.iter().map(|&(k, p)| (p, s.row_counts(y, k))).collect() })
        .collect();
    let entries = enumerate_fused(&s.domain, s.n, &boundary, &|_, _, a, b| s.outcomes(a, b), cap)?;
    Ok((s.domain.clone(), entries))
}

// ---------------------------------------------------------------------------
// Beta polymer
// ---------------------------------------------------------------------------

/// Parameters `sigma > rho > 0` of the Beta polymer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerParams {
    pub sigma: f64,
    pub rho: f64,
}

impl PolymerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > self.rho && self.rho > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameters(format!("need sigma > rho > 0, got sigma = {}, rho = {}", self.sigma, self.rho)));
        }
        Ok(())
    }
}

/// Delayed partition functions `Z_(k)^(m,t)` of one environment sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerSample {
    pub t_max: usize,
    pub delays: Vec<usize>,
    /// `values[d][(t, m)]` flattened as `t * (t_max + 1) + m`; `NaN` where undefined.
    pub values: Vec<Vec<f64>>,
}

impl PolymerSample {
    /// `Z_(k)^(m,t)` for delay index `d`, or `None` outside `1 <= m <= t - k`, `t <= t_max`.
    pub fn get(&self, d: usize, m: usize, t: usize) -> Option<f64> {
        if t > self.t_max || m == 0 {
            return None;
        }
        let v = self.values.get(d)?[t * (self.t_max + 1) + m];
        (!v.is_nan()).then_some(v)
    }

    /// `Z_(k)^(m,t)` by delay value.
    pub fn z(&self, k: usize, m: usize, t: usize) -> Option<f64> {
        let d = self.delays.iter().position(|&x| x == k)?;
        self.get(d, m, t)
    }
}

/// Beta polymer sampler with a shared environment across delays.
#[derive(Clone, Debug)]
pub struct PolymerSampler {
    params: PolymerParams,
    t_max: usize,
    delays: Vec<usize>,
    ga: Gamma<f64>,
    gb: Gamma<f64>,
}

impl PolymerSampler {
    pub fn new(params: PolymerParams, t_max: usize, delays: &[usize]) -> Result<Self> {
        params.validate()?;
        let ga = Gamma::new(params.sigma - params.rho, 1.0).map_err(|e| Error::InvalidParameters(e.to_string()))?;
        let gb = Gamma::new(params.rho, 1.0).map_err(|e| Error::InvalidParameters(e.to_string()))?;
        Ok(PolymerSampler { params, t_max, delays: delays.to_vec(), ga, gb })
    }

    pub fn params(&self) -> PolymerParams {
        self.params
    }

    /// A `Beta(sigma - rho, rho)` variate as `X / (X + Y)` with independent Gamma variates.
    fn beta(&self, rng: &mut ChaCha8Rng) -> f64 {
        let x = self.ga.sample(rng);
        let y = self.gb.sample(rng);
        if x + y == 0.0 {
            return if self.params.sigma - self.params.rho >= self.params.rho { 1.0 } else { 0.0 };
        }
        x / (x + y)
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> PolymerSample {
        let w = self.t_max + 1;
        let mut eta = vec![f64::NAN; w * w];
        for t in 2..=self.t_max {
            for m in 1..t {
                eta[t * w + m] = self.beta(rng);
            }
        }
        let values = self
            .delays
            .iter()
            .map(|&k| {
                let mut z = vec![f64::NAN; w * w];
                for t in k + 1..=self.t_max {
                    let mut edge = 1.0;
                    for i in k + 2..=t {
                        edge *= eta[i * w + 1];
                    }
                    z[t * w + 1] = edge;
                    z[t * w + t - k] = 1.0;
                    for m in 2..t - k {
                        let e = eta[t * w + m];
                        z[t * w + m] = e * z[(t - 1) * w + m] + (1.0 - e) * z[(t - 1) * w + m - 1];
                    }
                }
                z
            })
            .collect();
        PolymerSample { t_max: self.t_max, delays: self.delays.clone(), values }
    }
}

/// Simulates `count` independent environments.
pub fn simulate_beta_polymer(params: PolymerParams, t_max: usize, delays: &[usize], plan: &Plan) -> Result<Vec<PolymerSample>> {
    let sampler = PolymerSampler::new(params, t_max, delays)?;
    Ok(run_blocks(plan, |rng, n| (0..n).map(|_| sampler.draw(rng)).collect::<Vec<_>>()).into_iter().flatten().collect())
}

/// Streams polymer samples through `observe`.
pub fn polymer_mean<F>(params: PolymerParams, t_max: usize, delays: &[usize], plan: &Plan, dim: usize, observe: F) -> Result<MeanAccumulator>
where
    F: Fn(&PolymerSample, &mut [f64]) + Sync + Send,
{
    let sampler = PolymerSampler::new(params, t_max, delays)?;
    let blocks = run_blocks(plan, |rng, n| {
        let mut acc = MeanAccumulator::new(dim);
        let mut buf = vec![0.0; dim];
        for _ in 0..n {
            observe(&sampler.draw(rng), &mut buf);
            acc.push(&buf);
        }
        acc
    });
    let mut total = MeanAccumulator::new(dim);
    for b in &blocks {
        total.merge(b);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_do_not_depend_on_workers() {
        let plan = Plan::new(7, 3000);
        let a: Vec<u64> = run_blocks(&plan.with_workers(1), |rng, n| (0..n).fold(0u64, |a, _| a ^ rng.gen::<u64>()));
        let b: Vec<u64> = run_blocks(&plan.with_workers(3), |rng, n| (0..n).fold(0u64, |a, _| a ^ rng.gen::<u64>()));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn accumulator_statistics() {
        let mut acc = MeanAccumulator::new(1);
        for v in [1.0, 2.0, 3.0, 4.0] {
            acc.push(&[v]);
        }
        assert_eq!(acc.mean(0), 2.5);
        assert!((acc.std_err(0) - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn polymer_boundaries() {
        let s = PolymerSampler::new(PolymerParams { sigma: 2.0, rho: 0.7 }, 6, &[0, 2]).unwrap();
        let sample = s.draw(&mut block_rng(1, 0));
        for t in 3..=6 {
            assert_eq!(sample.z(2, t - 2, t), Some(1.0));
        }
        assert_eq!(sample.z(0, 1, 1), Some(1.0));
        assert_eq!(sample.z(2, 5, 6), None);
        for t in 1..=6 {
            for m in 1..=t {
                let v = sample.z(0, m, t).unwrap();
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
