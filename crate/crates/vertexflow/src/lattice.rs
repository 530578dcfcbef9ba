//! Lattice geometry, boundary data, configurations and colored height functions.
//!
//! Vertices sit at integer points `(x, y)` with columns `x = 1..=M` counted from
//! the left and rows `y = 1..=N` counted from the bottom. Dual points
//! `(alpha, beta)` are half-integers and are stored doubled so that all
//! geometry stays in exact integer arithmetic.
//!
//! Edge indexing used throughout the crate:
//! * horizontal edge `(x, y)` joins vertex `(x, y)` to `(x + 1, y)`, with
//!   `x = 0..=M`, so `(0, y)` enters column 1 from the left;
//! * vertical edge `(x, y)` joins vertex `(x, y)` to `(x, y + 1)`, with
//!   `y = 0..=N`, so `(x, 0)` enters row 1 from below.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Path color; `0` means "no path".
pub type Color = u32;

/// Parameters shared by every weight family and formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    /// Row rapidities `x_1, x_2, ...` (or `u_i` for fused models), bottom row first.
    #[serde(default)]
    pub row_rapidities: Vec<f64>,
    /// Column rapidities `y_1, y_2, ...`, leftmost column first.
    #[serde(default)]
    pub col_rapidities: Vec<f64>,
    /// Column spins `s_j`; empty for unfused models.
    #[serde(default)]
    pub col_spins: Vec<f64>,
    /// Boundary levels `l_1 <= l_2 <= ...` (the implicit `l_0 = 0` is not stored).
    #[serde(default)]
    pub boundary_levels: Vec<u32>,
}

impl ModelParams {
    pub fn new(q: f64, row_rapidities: Vec<f64>, col_rapidities: Vec<f64>) -> Self {
        ModelParams { q, row_rapidities, col_rapidities, col_spins: Vec::new(), boundary_levels: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameters(format!("q = {} is not in (0,1)", self.q)));
        }
        for (name, list) in [("row_rapidities", &self.row_rapidities), ("col_rapidities", &self.col_rapidities)] {
            if let Some(bad) = list.iter().find(|v| **v == 0.0 || !v.is_finite()) {
                return Err(Error::InvalidParameters(format!("{name} contains {bad}")));
            }
        }
        if self.boundary_levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameters("boundary_levels must be nondecreasing".into()));
        }
        Ok(())
    }

    /// `l_c` with `l_0 = 0`; colors past the stored list reuse the last level.
    pub fn level(&self, c: Color) -> u32 {
        if c == 0 {
            return 0;
        }
        let idx = (c as usize).min(self.boundary_levels.len());
        if idx == 0 {
            0
        } else {
            self.boundary_levels[idx - 1]
        }
    }

    /// Color of the path entering row `r` (1-based), or 0 if the row is empty.
    pub fn row_color(&self, r: usize) -> Color {
        for (i, &l) in self.boundary_levels.iter().enumerate() {
            if (r as u32) <= l {
                return i as Color + 1;
            }
        }
        0
    }
}

/// A point of the dual lattice stored as `(2 alpha, 2 beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualPoint {
    pub a2: i64,
    pub b2: i64,
}

impl DualPoint {
    /// Builds a point from half-integer coordinates; panics on non-half-integers.
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self::try_new(alpha, beta).expect("coordinates must be half-integers")
    }

    pub fn try_new(alpha: f64, beta: f64) -> Result<Self> {
        let a2 = (2.0 * alpha).round();
        let b2 = (2.0 * beta).round();
        if (a2 - 2.0 * alpha).abs() > 1e-9 || (b2 - 2.0 * beta).abs() > 1e-9 || a2 as i64 % 2 == 0 || b2 as i64 % 2 == 0 {
            return Err(Error::InvalidParameters(format!("({alpha}, {beta}) is not a dual-lattice point")));
        }
        Ok(DualPoint { a2: a2 as i64, b2: b2 as i64 })
    }

    pub fn alpha(&self) -> f64 {
        self.a2 as f64 / 2.0
    }

    pub fn beta(&self) -> f64 {
        self.b2 as f64 / 2.0
    }

    /// Column just left of the point, `alpha - 1/2`.
    pub fn col_left(&self) -> i64 {
        (self.a2 - 1) / 2
    }

    /// Row just below the point, `beta - 1/2`.
    pub fn row_below(&self) -> i64 {
        (self.b2 - 1) / 2
    }

    /// `self` lies weakly up-left of `other` (`self ↘ other` in the arrow notation).
    pub fn weakly_up_left_of(&self, other: &DualPoint) -> bool {
        self.a2 <= other.a2 && self.b2 >= other.b2
    }

    /// `self` lies strictly down-left of `other`.
    pub fn strictly_down_left_of(&self, other: &DualPoint) -> bool {
        self.a2 < other.a2 && self.b2 < other.b2
    }
}

impl fmt::Display for DualPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.alpha(), self.beta())
    }
}

impl Serialize for DualPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.alpha(), self.beta()].serialize(s)
    }
}

impl<'de> Deserialize<'de> for DualPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        DualPoint::try_new(a, b).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    /// `alpha -> alpha - 1`
    H,
    /// `beta -> beta + 1`
    V,
}

/// An up-left path given by its start and a word in `H`/`V`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UpLeftPath {
    pub start: DualPoint,
    pub steps: Vec<Step>,
}

impl UpLeftPath {
    /// Parses a step word and starts it at the lower-right corner `(M + 1/2, 1/2)`.
    pub fn from_word(word: &str) -> Result<Self> {
        let mut steps = Vec::with_capacity(word.len());
        for ch in word.chars() {
            match ch {
                'H' | 'h' => steps.push(Step::H),
                'V' | 'v' => steps.push(Step::V),
                c if c.is_whitespace() => {}
                other => return Err(Error::PathMismatch(format!("unknown step '{other}'"))),
            }
        }
        let m = steps.iter().filter(|s| **s == Step::H).count() as i64;
        Ok(UpLeftPath { start: DualPoint { a2: 2 * m + 1, b2: 1 }, steps })
    }

    pub fn word(&self) -> String {
        self.steps.iter().map(|s| if *s == Step::H { 'H' } else { 'V' }).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// All `len + 1` points of the path, starting with the start point.
    pub fn points(&self) -> Vec<DualPoint> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut p = self.start;
        out.push(p);
        for s in &self.steps {
            match s {
                Step::H => p.a2 -= 2,
                Step::V => p.b2 += 2,
            }
            out.push(p);
        }
        out
    }

    pub fn end(&self) -> DualPoint {
        *self.points().last().unwrap()
    }
}

impl Serialize for UpLeftPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.word().serialize(s)
    }
}

impl<'de> Deserialize<'de> for UpLeftPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = String::deserialize(d)?;
        UpLeftPath::from_word(&w).map_err(serde::de::Error::custom)
    }
}

/// The lattice line crossed by a step of the lower boundary path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Line {
    Row(usize),
    Col(usize),
}

/// A skew domain `P - Q` with a monotone coloring of the steps of `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewDomain {
    lower: UpLeftPath,
    upper: UpLeftPath,
    coloring: Vec<Color>,
    rows: usize,
    cols: usize,
    /// Per row `y` (index `y - 1`): inclusive column range of domain vertices.
    row_span: Vec<(usize, usize)>,
    vertices: Vec<(usize, usize)>,
    lines: Vec<Line>,
}

/// Validates and builds a skew domain.
pub fn build_skew_domain(q: UpLeftPath, p: UpLeftPath, coloring: Vec<Color>) -> Result<SkewDomain> {
    SkewDomain::new(q, p, coloring)
}

impl SkewDomain {
    pub fn new(q: UpLeftPath, p: UpLeftPath, coloring: Vec<Color>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::PathMismatch(format!("lengths differ: {} vs {}", q.len(), p.len())));
        }
        if q.start != p.start || q.end() != p.end() {
            return Err(Error::PathMismatch("paths do not share endpoints".into()));
        }
        let cols = q.steps.iter().filter(|s| **s == Step::H).count();
        let rows = q.len() - cols;
        if q.start != (DualPoint { a2: 2 * cols as i64 + 1, b2: 1 }) {
            return Err(Error::PathMismatch(format!("paths must start at ({}, 0.5), found {}", cols as f64 + 0.5, q.start)));
        }
        if coloring.len() != q.len() {
            return Err(Error::PathMismatch(format!("coloring has {} entries for a path of length {}", coloring.len(), q.len())));
        }
        for (i, w) in coloring.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(Error::NonMonotoneColoring { index: i + 1, prev: w[0], next: w[1] });
            }
        }
        let qp = q.points();
        let pp = p.points();
        for (i, (a, b)) in qp.iter().zip(pp.iter()).enumerate() {
            if a.a2 + a.b2 > b.a2 + b.b2 {
                return Err(Error::NotBelow { index: i });
            }
        }
        // Column of the vertical step crossing each row.
        let cross = |path: &UpLeftPath| -> Vec<i64> {
            let mut out = vec![0; rows];
            let pts = path.points();
            for (t, s) in path.steps.iter().enumerate() {
                if *s == Step::V {
                    let y = pts[t].row_below() as usize + 1;
                    out[y - 1] = pts[t].a2;
                }
            }
            out
        };
        let qa = cross(&q);
        let pa = cross(&p);
        let mut row_span = Vec::with_capacity(rows);
        let mut vertices = Vec::new();
        for y in 0..rows {
            let lo = ((qa[y] + 1) / 2) as usize;
            let hi = ((pa[y] - 1) / 2) as usize;
            row_span.push((lo, hi));
            for x in lo..=hi {
                if x >= 1 && x <= cols && lo <= hi {
                    vertices.push((x, y + 1));
                }
            }
        }
        vertices.sort_by_key(|&(x, y)| (x + y, x));
        let lines = q
            .steps
            .iter()
            .zip(qp.iter())
            .map(|(s, pt)| match s {
                Step::H => Line::Col(pt.col_left() as usize),
                Step::V => Line::Row(pt.row_below() as usize + 1),
            })
            .collect();
        Ok(SkewDomain { lower: q, upper: p, coloring, rows, cols, row_span, vertices, lines })
    }

    /// The `rows x cols` rectangle: `Q = H^cols V^rows`, `P = V^rows H^cols`.
    pub fn rectangle(rows: usize, cols: usize, coloring: Vec<Color>) -> Result<Self> {
        let q = UpLeftPath::from_word(&("H".repeat(cols) + &"V".repeat(rows)))?;
        let p = UpLeftPath::from_word(&("V".repeat(rows) + &"H".repeat(cols)))?;
        SkewDomain::new(q, p, coloring)
    }

    /// Rectangle whose bottom inputs are empty and whose left inputs have the given colors.
    pub fn quadrant(row_colors: &[Color], cols: usize) -> Result<Self> {
        let mut coloring = vec![0; cols];
        coloring.extend_from_slice(row_colors);
        Self::rectangle(row_colors.len(), cols, coloring)
    }

    pub fn lower(&self) -> &UpLeftPath {
        &self.lower
    }

    pub fn upper(&self) -> &UpLeftPath {
        &self.upper
    }

    pub fn coloring(&self) -> &[Color] {
        &self.coloring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn max_color(&self) -> Color {
        self.coloring.iter().copied().max().unwrap_or(0)
    }

    /// Vertices in sampling order (anti-diagonals `x + y` increasing).
    pub fn vertices(&self) -> &[(usize, usize)] {
        &self.vertices
    }

    pub fn contains_vertex(&self, x: usize, y: usize) -> bool {
        if y == 0 || y > self.rows {
            return false;
        }
        let (lo, hi) = self.row_span[y - 1];
        x >= lo && x <= hi && x >= 1
    }

    /// Lattice lines crossed by the steps of `Q`, in order.
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Rapidity `zeta_t` attached to step `t` of `Q`.
    pub fn zeta(&self, params: &ModelParams) -> Vec<f64> {
        self.lines
            .iter()
            .map(|l| match l {
                Line::Row(y) => params.row_rapidities[y - 1],
                Line::Col(x) => params.col_rapidities[x - 1],
            })
            .collect()
    }

    /// Number of steps colored `<= c`.
    pub fn level(&self, c: Color) -> usize {
        self.coloring.iter().filter(|&&ci| ci <= c).count()
    }

    /// The threshold point on `Q` reached after the steps colored `<= c`.
    pub fn threshold(&self, c: Color) -> DualPoint {
        self.lower.points()[self.level(c)]
    }

    /// Incoming boundary edges, one per step of `Q`: `(is_horizontal_edge, x, y)`.
    pub fn incoming_edges(&self) -> Vec<EdgeRef> {
        let pts = self.lower.points();
        self.lower
            .steps
            .iter()
            .zip(pts.iter())
            .map(|(s, pt)| match s {
                Step::H => EdgeRef::V(pt.col_left() as usize, pt.row_below() as usize),
                Step::V => EdgeRef::H(pt.col_left() as usize, pt.row_below() as usize + 1),
            })
            .collect()
    }

    /// Lowest point of `Q` and highest point of `P` on the dual column `a2`.
    fn column_extent(&self, a2: i64) -> Option<(i64, i64)> {
        let lo = self.lower.points().into_iter().filter(|p| p.a2 == a2).map(|p| p.b2).min()?;
        let hi = self.upper.points().into_iter().filter(|p| p.a2 == a2).map(|p| p.b2).max()?;
        Some((lo, hi))
    }

    /// Whether a dual point lies in the closed region between `Q` and `P`.
    pub fn contains_point(&self, p: &DualPoint) -> bool {
        match self.column_extent(p.a2) {
            Some((lo, hi)) => p.b2 >= lo && p.b2 <= hi,
            None => false,
        }
    }

    /// Number of interior vertices.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }
}

/// A lattice edge reference using the crate-wide indexing convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeRef {
    H(usize, usize),
    V(usize, usize),
}

/// Multiplicities `(I_1, ..., I_n)` of colors on an edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorComposition {
    pub counts: Vec<u32>,
}

impl ColorComposition {
    pub fn zero(n: usize) -> Self {
        ColorComposition { counts: vec![0; n] }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        ColorComposition { counts }
    }

    /// Composition holding one path of color `c` (or nothing when `c = 0`).
    pub fn single(n: usize, c: Color) -> Self {
        let mut out = Self::zero(n);
        if c > 0 {
            out.counts[c as usize - 1] = 1;
        }
        out
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Count of color `i` (1-based); 0 for colors out of range.
    pub fn get(&self, i: Color) -> u32 {
        if i == 0 || i as usize > self.counts.len() {
            0
        } else {
            self.counts[i as usize - 1]
        }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// `I_[a;b]`, the number of paths with colors in `a..=b`.
    pub fn range(&self, a: Color, b: Color) -> u32 {
        (a.max(1)..=b).map(|i| self.get(i)).sum()
    }

    /// Number of paths of color strictly greater than `c`.
    pub fn count_gt(&self, c: Color) -> u32 {
        self.counts.iter().enumerate().filter(|(i, _)| *i as Color + 1 > c).map(|(_, v)| v).sum()
    }

    /// The unique color on an edge with at most one path.
    pub fn label(&self) -> Color {
        self.counts.iter().position(|&v| v > 0).map_or(0, |i| i as Color + 1)
    }

    pub fn add(&self, other: &Self) -> Self {
        ColorComposition { counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect() }
    }

    /// Componentwise difference, or `None` if it would go negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let mut out = Vec::with_capacity(self.counts.len());
        for (a, b) in self.counts.iter().zip(&other.counts) {
            out.push(a.checked_sub(*b)?);
        }
        Some(ColorComposition { counts: out })
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.counts.iter().zip(&other.counts).all(|(a, b)| a <= b)
    }

    /// Adds `delta` paths of color `c`; color 0 is ignored.
    pub fn shifted(&self, c: Color, delta: i64) -> Option<Self> {
        let mut out = self.clone();
        if c == 0 {
            return Some(out);
        }
        let v = out.counts[c as usize - 1] as i64 + delta;
        if v < 0 {
            return None;
        }
        out.counts[c as usize - 1] = v as u32;
        Some(out)
    }

    /// Image under a monotone color map `theta` (`theta[i - 1]` is the image of color `i`).
    pub fn push_forward(&self, theta: &[Color], m: usize) -> Self {
        let mut out = Self::zero(m);
        for (i, &v) in self.counts.iter().enumerate() {
            let t = theta[i];
            if t > 0 {
                out.counts[t as usize - 1] += v;
            }
        }
        out
    }

    /// All compositions with `n` parts and total at most `max_total`.
    pub fn all_up_to(n: usize, max_total: u32) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<ColorComposition>) {
            if i == cur.len() {
                out.push(ColorComposition { counts: cur.clone() });
                return;
            }
            for v in 0..=left {
                cur[i] = v;
                rec(i + 1, left - v, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, max_total, &mut cur, &mut out);
        out
    }

    /// All compositions `D` with `D <= self` componentwise.
    pub fn all_below(&self) -> Vec<Self> {
        let mut out = vec![ColorComposition::zero(self.n())];
        for i in 0..self.n() {
            let mut next = Vec::with_capacity(out.len() * (self.counts[i] as usize + 1));
            for d in &out {
                for v in 0..=self.counts[i] {
                    let mut e = d.clone();
                    e.counts[i] = v;
                    next.push(e);
                }
            }
            out = next;
        }
        out
    }
}

/// Read access to edge contents, enough to evaluate height functions.
pub trait EdgeView {
    /// Paths of color `> c` on horizontal edge `(x, y)`.
    fn h_count_gt(&self, x: usize, y: usize, c: Color) -> u32;
    /// Paths of color `> c` on vertical edge `(x, y)`.
    fn v_count_gt(&self, x: usize, y: usize, c: Color) -> u32;
}

/// Dense single-label edge storage used by the unfused samplers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelGrid {
    pub rows: usize,
    pub cols: usize,
    pub h: Vec<Color>,
    pub v: Vec<Color>,
}

impl LabelGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        LabelGrid { rows, cols, h: vec![0; (cols + 1) * rows], v: vec![0; cols * (rows + 1)] }
    }

    #[inline]
    pub fn h_index(&self, x: usize, y: usize) -> usize {
        (y - 1) * (self.cols + 1) + x
    }

    #[inline]
    pub fn v_index(&self, x: usize, y: usize) -> usize {
        y * self.cols + (x - 1)
    }

    #[inline]
    pub fn h_at(&self, x: usize, y: usize) -> Color {
        self.h[self.h_index(x, y)]
    }

    #[inline]
    pub fn v_at(&self, x: usize, y: usize) -> Color {
        self.v[self.v_index(x, y)]
    }

    pub fn set(&mut self, e: EdgeRef, c: Color) {
        match e {
            EdgeRef::H(x, y) => {
                let i = self.h_index(x, y);
                self.h[i] = c;
            }
            EdgeRef::V(x, y) => {
                let i = self.v_index(x, y);
                self.v[i] = c;
            }
        }
    }
}

impl EdgeView for LabelGrid {
    fn h_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        (self.h_at(x, y) > c) as u32
    }
    fn v_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        (self.v_at(x, y) > c) as u32
    }
}

/// A configuration: color compositions on every edge of the domain's bounding box.
/// Edges outside the domain carry the empty composition.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub domain: Arc<SkewDomain>,
    pub n_colors: usize,
    pub h_edges: Vec<ColorComposition>,
    pub v_edges: Vec<ColorComposition>,
}

/// Serialized form of a configuration (the domain travels separately).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationRecord {
    pub rows: usize,
    pub cols: usize,
    pub n_colors: usize,
    /// `h_edges[y - 1][x]` for `x = 0..=cols`.
    pub h_edges: Vec<Vec<ColorComposition>>,
    /// `v_edges[y][x - 1]` for `y = 0..=rows`.
    pub v_edges: Vec<Vec<ColorComposition>>,
}

impl Configuration {
    pub fn empty(domain: Arc<SkewDomain>, n_colors: usize) -> Self {
        let (r, c) = (domain.rows(), domain.cols());
        Configuration {
            domain,
            n_colors,
            h_edges: vec![ColorComposition::zero(n_colors); (c + 1) * r],
            v_edges: vec![ColorComposition::zero(n_colors); c * (r + 1)],
        }
    }

    pub fn from_labels(domain: Arc<SkewDomain>, n_colors: usize, grid: &LabelGrid) -> Self {
        let mut out = Self::empty(domain, n_colors);
        out.h_edges = grid.h.iter().map(|&c| ColorComposition::single(n_colors, c)).collect();
        out.v_edges = grid.v.iter().map(|&c| ColorComposition::single(n_colors, c)).collect();
        out
    }

    fn h_index(&self, x: usize, y: usize) -> usize {
        (y - 1) * (self.domain.cols() + 1) + x
    }

    fn v_index(&self, x: usize, y: usize) -> usize {
        y * self.domain.cols() + (x - 1)
    }

    pub fn h(&self, x: usize, y: usize) -> &ColorComposition {
        &self.h_edges[self.h_index(x, y)]
    }

    pub fn v(&self, x: usize, y: usize) -> &ColorComposition {
        &self.v_edges[self.v_index(x, y)]
    }

    pub fn set(&mut self, e: EdgeRef, comp: ColorComposition) {
        match e {
            EdgeRef::H(x, y) => {
                let i = self.h_index(x, y);
                self.h_edges[i] = comp;
            }
            EdgeRef::V(x, y) => {
                let i = self.v_index(x, y);
                self.v_edges[i] = comp;
            }
        }
    }

    /// Checks color conservation at every vertex of the domain.
    pub fn is_conserving(&self) -> bool {
        self.domain.vertices().iter().all(|&(x, y)| {
            let inflow = self.h(x - 1, y).add(self.v(x, y - 1));
            let outflow = self.h(x, y).add(self.v(x, y));
            inflow == outflow
        })
    }

    pub fn to_record(&self) -> ConfigurationRecord {
        let (r, c) = (self.domain.rows(), self.domain.cols());
        ConfigurationRecord {
            rows: r,
            cols: c,
            n_colors: self.n_colors,
            h_edges: (1..=r).map(|y| (0..=c).map(|x| self.h(x, y).clone()).collect()).collect(),
            v_edges: (0..=r).map(|y| (1..=c).map(|x| self.v(x, y).clone()).collect()).collect(),
        }
    }

    pub fn from_record(domain: Arc<SkewDomain>, rec: &ConfigurationRecord) -> Result<Self> {
        if rec.rows != domain.rows() || rec.cols != domain.cols() {
            return Err(Error::PathMismatch("record shape does not match the domain".into()));
        }
        let mut out = Self::empty(domain, rec.n_colors);
        for y in 1..=rec.rows {
            for x in 0..=rec.cols {
                out.set(EdgeRef::H(x, y), rec.h_edges[y - 1][x].clone());
            }
        }
        for y in 0..=rec.rows {
            for x in 1..=rec.cols {
                out.set(EdgeRef::V(x, y), rec.v_edges[y][x - 1].clone());
            }
        }
        Ok(out)
    }
}

impl EdgeView for Configuration {
    fn h_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        self.h(x, y).count_gt(c)
    }
    fn v_count_gt(&self, x: usize, y: usize, c: Color) -> u32 {
        self.v(x, y).count_gt(c)
    }
}

/// Height function `h_{>c}` at a dual point, anchored at `h = 0` at the start of `Q`.
///
/// The walk follows `Q` until it reaches the column of the point and then climbs
/// straight up, adding the paths crossed on the way.
pub fn height_in<E: EdgeView + ?Sized>(domain: &SkewDomain, view: &E, point: DualPoint, c: Color) -> Result<u32> {
    let outside = || Error::PointOutsideDomain { alpha: point.alpha(), beta: point.beta() };
    if !domain.contains_point(&point) {
        return Err(outside());
    }
    let mut cur = domain.lower().start;
    let mut acc = 0u32;
    let mut steps = domain.lower().steps.iter();
    while cur.a2 != point.a2 {
        match steps.next().ok_or_else(outside)? {
            Step::H => {
                acc += view.v_count_gt(cur.col_left() as usize, cur.row_below() as usize, c);
                cur.a2 -= 2;
            }
            Step::V => {
                acc += view.h_count_gt(cur.col_left() as usize, cur.row_below() as usize + 1, c);
                cur.b2 += 2;
            }
        }
    }
    while cur.b2 < point.b2 {
        acc += view.h_count_gt(cur.col_left() as usize, cur.row_below() as usize + 1, c);
        cur.b2 += 2;
    }
    Ok(acc)
}

/// Height function `h_{>c}` of a configuration at a dual point.
pub fn height(config: &Configuration, point: DualPoint, c: Color) -> Result<u32> {
    height_in(&config.domain, config, point, c)
}

/// Checks that `theta` is a monotone map on colors `1..=n`.
pub fn validate_color_map(theta: &[Color]) -> Result<()> {
    for (i, w) in theta.windows(2).enumerate() {
        if w[0] > w[1] {
            return Err(Error::NonMonotoneMap(i as Color + 2));
        }
    }
    Ok(())
}

/// Applies a monotone color merge to every edge and to the boundary coloring.
pub fn merge_colors(config: &Configuration, theta: &[Color]) -> Result<Configuration> {
    validate_color_map(theta)?;
    if theta.len() < config.n_colors {
        return Err(Error::InvalidParameters("color map shorter than the number of colors".into()));
    }
    let m = theta.iter().copied().max().unwrap_or(0) as usize;
    let d = &config.domain;
    let coloring = d.coloring().iter().map(|&c| if c == 0 { 0 } else { theta[c as usize - 1] }).collect();
    let domain = Arc::new(SkewDomain::new(d.lower().clone(), d.upper().clone(), coloring)?);
    Ok(Configuration {
        domain,
        n_colors: m,
        h_edges: config.h_edges.iter().map(|e| e.push_forward(theta, m)).collect(),
        v_edges: config.v_edges.iter().map(|e| e.push_forward(theta, m)).collect(),
    })
}

/// A cut: a point on `Q` strictly down-left of a point on `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cut {
    pub q_point: DualPoint,
    pub p_point: DualPoint,
}

impl Cut {
    pub fn new(domain: &SkewDomain, q_point: DualPoint, p_point: DualPoint) -> Result<Self> {
        if !domain.lower().points().contains(&q_point) {
            return Err(Error::Constraint(format!("{q_point} is not on the lower path")));
        }
        if !domain.upper().points().contains(&p_point) {
            return Err(Error::Constraint(format!("{p_point} is not on the upper path")));
        }
        if !q_point.strictly_down_left_of(&p_point) {
            return Err(Error::Constraint(format!("{q_point} is not strictly down-left of {p_point}")));
        }
        Ok(Cut { q_point, p_point })
    }

    /// Rows strictly between the two points.
    pub fn rows(&self) -> Vec<usize> {
        let lo = (self.q_point.b2 + 1) / 2;
        let hi = (self.p_point.b2 - 1) / 2;
        (lo..=hi).map(|v| v as usize).collect()
    }

    /// Columns strictly between the two points.
    pub fn cols(&self) -> Vec<usize> {
        let lo = (self.q_point.a2 + 1) / 2;
        let hi = (self.p_point.a2 - 1) / 2;
        (lo..=hi).map(|v| v as usize).collect()
    }

    /// Two cuts cross when their endpoints interleave.
    pub fn crosses(&self, other: &Cut) -> bool {
        let (q, p, q2, p2) = (self.q_point, self.p_point, other.q_point, other.p_point);
        // `a ↖ b`: a lies weakly down-right of b; `a ↘ b`: a lies weakly up-left of b.
        let nw = |a: &DualPoint, b: &DualPoint| a.a2 >= b.a2 && a.b2 <= b.b2;
        let se = |a: &DualPoint, b: &DualPoint| a.weakly_up_left_of(b);
        (nw(&q, &q2) && se(&p, &p2)) || (se(&q, &q2) && nw(&p, &p2))
    }

    /// `self > other`: non-crossing and strictly up-left.
    pub fn greater_than(&self, other: &Cut) -> bool {
        !self.crosses(other) && self.q_point.weakly_up_left_of(&other.q_point) && self.p_point.weakly_up_left_of(&other.p_point)
    }

    /// The observable color threshold: the number of steps of `Q` before `q_point`.
    pub fn color_threshold(&self, domain: &SkewDomain) -> Color {
        domain.lower().points().iter().position(|p| *p == self.q_point).unwrap_or(0) as Color
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staircase() -> SkewDomain {
        let q = UpLeftPath::from_word("HVHHVHVV").unwrap();
        let p = UpLeftPath::from_word("VVVHVHHH").unwrap();
        SkewDomain::new(q, p, vec![1, 2, 2, 3, 4, 5, 5, 5]).unwrap()
    }

    #[test]
    fn staircase_geometry() {
        let d = staircase();
        assert_eq!(d.vertex_count(), 11);
        assert_eq!(d.lines(), &[Line::Col(4), Line::Row(1), Line::Col(3), Line::Col(2), Line::Row(2), Line::Col(1), Line::Row(3), Line::Row(4)]);
        assert!(d.contains_vertex(4, 1) && !d.contains_vertex(3, 1) && !d.contains_vertex(4, 4));
    }

    #[test]
    fn non_monotone_coloring_rejected() {
        let q = UpLeftPath::from_word("HV").unwrap();
        let p = UpLeftPath::from_word("VH").unwrap();
        assert!(matches!(SkewDomain::new(q, p, vec![2, 1]), Err(Error::NonMonotoneColoring { .. })));
    }

    #[test]
    fn q_above_p_rejected() {
        let q = UpLeftPath::from_word("VH").unwrap();
        let p = UpLeftPath::from_word("HV").unwrap();
        assert!(matches!(SkewDomain::new(q, p, vec![0, 0]), Err(Error::NotBelow { .. })));
    }

    #[test]
    fn degenerate_domain_has_no_vertices() {
        let q = UpLeftPath::from_word("HVHV").unwrap();
        let d = SkewDomain::new(q.clone(), q, vec![0, 1, 1, 2]).unwrap();
        assert_eq!(d.vertex_count(), 0);
    }

    #[test]
    fn dual_point_roundtrip() {
        let p = DualPoint::new(2.5, 0.5);
        assert_eq!((p.a2, p.b2), (5, 1));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<DualPoint>(&s).unwrap(), p);
        assert!(DualPoint::try_new(1.0, 0.5).is_err());
    }

    #[test]
    fn composition_helpers() {
        let a = ColorComposition::from_counts(vec![1, 0, 2]);
        assert_eq!(a.count_gt(1), 2);
        assert_eq!(a.count_gt(0), 3);
        assert_eq!(a.range(1, 2), 1);
        assert_eq!(a.all_below().len(), 6);
        assert_eq!(ColorComposition::all_up_to(2, 2).len(), 6);
    }
}
