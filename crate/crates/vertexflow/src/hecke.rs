//! Permutations, Demazure–Lusztig operators evaluated pointwise, the
//! expansion coefficients `kappa`, and the square-grid partition functions `Z`.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Color;
use crate::weights::r_weight;

/// A permutation of `{1, ..., k}`, stored 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    img: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation { img: (0..k).collect() }
    }

    /// Builds from 1-based images `(pi(1), ..., pi(k))`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &v in images {
            if v == 0 || v > k || seen[v - 1] {
                return Err(Error::InvalidParameters(format!("{images:?} is not a permutation")));
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { img: images.iter().map(|v| v - 1).collect() })
    }

    /// The simple transposition `sigma_i` of `S_k` (1-based `i`).
    pub fn simple(i: usize, k: usize) -> Self {
        let mut img: Vec<usize> = (0..k).collect();
        img.swap(i - 1, i);
        Permutation { img }
    }

    /// Builds `sigma_{i_1} ... sigma_{i_l}` from a word of 1-based letters.
    pub fn from_word(word: &[usize], k: usize) -> Self {
        word.iter().fold(Self::identity(k), |acc, &i| acc.compose(&Self::simple(i, k)))
    }

    pub fn k(&self) -> usize {
        self.img.len()
    }

    /// `pi(i)` with 1-based input and output.
    pub fn apply(&self, i: usize) -> usize {
        self.img[i - 1] + 1
    }

    /// 0-based images.
    pub fn images0(&self) -> &[usize] {
        &self.img
    }

    /// 1-based images.
    pub fn images(&self) -> Vec<usize> {
        self.img.iter().map(|v| v + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.k()];
        for (i, &v) in self.img.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { img: inv }
    }

    /// `(self * other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Permutation { img: other.img.iter().map(|&v| self.img[v]).collect() }
    }

    /// Number of inversions.
    pub fn length(&self) -> usize {
        let mut out = 0;
        for a in 0..self.k() {
            for b in a + 1..self.k() {
                out += (self.img[a] > self.img[b]) as usize;
            }
        }
        out
    }

    /// A reduced word `(i_1, ..., i_l)` with `pi = sigma_{i_1} ... sigma_{i_l}`, found by bubble sort.
    pub fn reduced_word(&self) -> Vec<usize> {
        let mut a = self.img.clone();
        let mut swaps = Vec::new();
        loop {
            let mut done = true;
            for i in 0..a.len().saturating_sub(1) {
                if a[i] > a[i + 1] {
                    a.swap(i, i + 1);
                    swaps.push(i + 1);
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        swaps.reverse();
        swaps
    }

    /// Bruhat order `self ⪯ other`, by the rank-matrix criterion.
    pub fn bruhat_le(&self, other: &Self) -> bool {
        let k = self.k();
        for i in 0..k {
            for j in 0..k {
                let a = self.img[..=i].iter().filter(|&&v| v >= j).count();
                let b = other.img[..=i].iter().filter(|&&v| v >= j).count();
                if a > b {
                    return false;
                }
            }
        }
        true
    }

    /// All permutations of `S_k` in lexicographic order.
    pub fn all(k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..k).collect();
        fn rec(i: usize, cur: &mut Vec<usize>, out: &mut Vec<Permutation>) {
            if i == cur.len() {
                out.push(Permutation { img: cur.clone() });
                return;
            }
            for j in i..cur.len() {
                cur.swap(i, j);
                rec(i + 1, cur, out);
                cur.swap(i, j);
            }
        }
        rec(0, &mut cur, &mut out);
        out.sort();
        out
    }

    /// `rho^{-1}.w = (w_{rho(1)}, ..., w_{rho(k)})`, the argument used by `t_rho`.
    pub fn pull<T: Copy>(&self, w: &[T]) -> Vec<T> {
        self.img.iter().map(|&v| w[v]).collect()
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.images().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Permutation::from_images(&v).map_err(serde::de::Error::custom)
    }
}

/// Which Hecke action is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `T_i = q + (w_{i+1} - q w_i)/(w_{i+1} - w_i) (t_i - 1)`
    QDeformed,
    /// `T_i = 1 + (w_{i+1} - w_i + 1)/(w_{i+1} - w_i) (t_i - 1)`
    Polymer,
}

/// A function of `k` complex variables evaluated pointwise.
pub trait PointFunction: Send + Sync {
    fn eval(&self, w: &[C64]) -> Result<C64>;
}

impl<F> PointFunction for F
where
    F: Fn(&[C64]) -> C64 + Send + Sync,
{
    fn eval(&self, w: &[C64]) -> Result<C64> {
        Ok(self(w))
    }
}

/// Fails when two variables are closer than the coincidence tolerance.
pub fn check_distinct(w: &[C64], i: usize, j: usize) -> Result<()> {
    let scale = w[i].norm().max(w[j].norm()).max(f64::MIN_POSITIVE);
    if (w[i] - w[j]).norm() < 1e-12 * scale || w[i] == w[j] {
        return Err(Error::SingularEvaluation(i + 1, j + 1));
    }
    Ok(())
}

/// Coefficient multiplying `(t_i - 1)` in `T_i` (0-based `i` acting on slots `i`, `i+1`).
#[inline]
pub fn t_coefficient(variant: Variant, q: f64, a: C64, b: C64) -> C64 {
    match variant {
        Variant::QDeformed => (b - a * q) / (b - a),
        Variant::Polymer => (b - a + 1.0) / (b - a),
    }
}

#[inline]
pub fn t_scalar(variant: Variant, q: f64) -> f64 {
    match variant {
        Variant::QDeformed => q,
        Variant::Polymer => 1.0,
    }
}

/// The operator `T_i` applied to a function; `i` is 1-based.
pub struct HeckeT {
    i: usize,
    q: f64,
    variant: Variant,
    inner: Arc<dyn PointFunction>,
}

impl PointFunction for HeckeT {
    fn eval(&self, w: &[C64]) -> Result<C64> {
        let a = self.i - 1;
        check_distinct(w, a, a + 1)?;
        let base = self.inner.eval(w)?;
        let mut sw = w.to_vec();
        sw.swap(a, a + 1);
        let swapped = self.inner.eval(&sw)?;
        let c = t_coefficient(self.variant, self.q, w[a], w[a + 1]);
        let scalar = t_scalar(self.variant, self.q);
        Ok(base * (scalar - 1.0) + base + c * (swapped - base))
    }
}

/// `T_i f`.
pub fn apply_t(i: usize, f: Arc<dyn PointFunction>, q: f64, variant: Variant) -> Arc<dyn PointFunction> {
    Arc::new(HeckeT { i, q, variant, inner: f })
}

/// `T_pi f = T_{i_1}( ... T_{i_l}(f))` along the canonical reduced word, evaluated with memoization.
pub struct HeckeTPi {
    word: Vec<usize>,
    q: f64,
    variant: Variant,
    inner: Arc<dyn PointFunction>,
}

impl HeckeTPi {
    pub fn with_word(word: Vec<usize>, f: Arc<dyn PointFunction>, q: f64, variant: Variant) -> Self {
        HeckeTPi { word, q, variant, inner: f }
    }

    fn eval_rec(&self, depth: usize, perm: &mut Vec<usize>, w: &[C64], memo: &mut HashMap<(usize, Vec<usize>), C64>) -> Result<C64> {
        if let Some(v) = memo.get(&(depth, perm.clone())) {
            return Ok(*v);
        }
        let value = if depth == self.word.len() {
            let args: Vec<C64> = perm.iter().map(|&p| w[p]).collect();
            self.inner.eval(&args)?
        } else {
            let a = self.word[depth] - 1;
            let (wa, wb) = (w[perm[a]], w[perm[a + 1]]);
            let scale = wa.norm().max(wb.norm()).max(f64::MIN_POSITIVE);
            if (wa - wb).norm() < 1e-12 * scale || wa == wb {
                return Err(Error::SingularEvaluation(perm[a] + 1, perm[a + 1] + 1));
            }
            let base = self.eval_rec(depth + 1, perm, w, memo)?;
            perm.swap(a, a + 1);
            let swapped = self.eval_rec(depth + 1, perm, w, memo);
            perm.swap(a, a + 1);
            let swapped = swapped?;
            let c = t_coefficient(self.variant, self.q, wa, wb);
            base * t_scalar(self.variant, self.q) + c * (swapped - base)
        };
        memo.insert((depth, perm.clone()), value);
        Ok(value)
    }
}

impl PointFunction for HeckeTPi {
    fn eval(&self, w: &[C64]) -> Result<C64> {
        let mut perm: Vec<usize> = (0..w.len()).collect();
        let mut memo = HashMap::new();
        self.eval_rec(0, &mut perm, w, &mut memo)
    }
}

/// `T_pi f`.
pub fn apply_t_pi(pi: &Permutation, f: Arc<dyn PointFunction>, q: f64, variant: Variant) -> Arc<dyn PointFunction> {
    Arc::new(HeckeTPi::with_word(pi.reduced_word(), f, q, variant))
}

/// All coefficients `kappa_pi^rho(w)`, keyed by `rho`, from the prefix recursion.
pub fn kappa_all(pi: &Permutation, w: &[C64], q: f64) -> Result<HashMap<Permutation, C64>> {
    let k = pi.k();
    let mut cur: HashMap<Permutation, C64> = HashMap::new();
    cur.insert(Permutation::identity(k), C64::new(1.0, 0.0));
    for &i in &pi.reduced_word() {
        let s = Permutation::simple(i, k);
        let mut next: HashMap<Permutation, C64> = HashMap::new();
        let keys: Vec<Permutation> = cur.keys().cloned().chain(cur.keys().map(|r| r.compose(&s))).collect();
        for rho in keys {
            if next.contains_key(&rho) {
                continue;
            }
            let a = w[rho.apply(i) - 1];
            let b = w[rho.apply(i + 1) - 1];
            let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
            if (a - b).norm() < 1e-12 * scale {
                return Err(Error::SingularEvaluation(rho.apply(i), rho.apply(i + 1)));
            }
            let coef_same = (q - 1.0) * b / (b - a);
            let coef_swap = (a - b * q) / (a - b);
            let v_same = cur.get(&rho).copied().unwrap_or_default();
            let v_swap = cur.get(&rho.compose(&s)).copied().unwrap_or_default();
            next.insert(rho, coef_same * v_same + coef_swap * v_swap);
        }
        cur = next;
    }
    Ok(cur)
}

/// `kappa_pi^rho(w)`.
pub fn kappa(pi: &Permutation, rho: &Permutation, w: &[C64], q: f64) -> Result<C64> {
    Ok(kappa_all(pi, w, q)?.get(rho).copied().unwrap_or_default())
}

/// The `k x k` partition function `Z_pi^rho(w)`: row `a` (from the bottom) carries rapidity
/// `w_{rho(a)}` and receives color `pi(a)` from the left, column `j` carries `w_j`,
/// bottoms and right exits are empty and column `j` exits the top with color `j`.
pub fn z_partition(pi: &Permutation, rho: &Permutation, w: &[C64], q: f64) -> Result<C64> {
    let k = pi.k();
    let qc = C64::new(q, 0.0);
    let mut states: HashMap<Vec<Color>, C64> = HashMap::new();
    states.insert(vec![0; k], C64::new(1.0, 0.0));
    for a in 1..=k {
        let x = w[rho.apply(a) - 1];
        let mut next: HashMap<Vec<Color>, C64> = HashMap::new();
        for (bottom, weight) in &states {
            // Sweep the row left to right, branching on each vertex's outcomes.
            let mut partial: Vec<(Vec<Color>, Color, C64)> = vec![(Vec::with_capacity(k), pi.apply(a) as Color, *weight)];
            for (j, &below) in bottom.iter().enumerate() {
                let z = x / w[j];
                if (z - qc).norm() < 1e-14 {
                    return Err(Error::ParameterSingularity(format!("w_{} = q w_{}", rho.apply(a), j + 1)));
                }
                let mut grown = Vec::with_capacity(partial.len() * 2);
                for (top, left, wt) in partial {
                    for (kk, ll) in [(below, left), (left, below)] {
                        if below == left && kk != below {
                            continue;
                        }
                        let r = r_weight(below, left, kk, ll, &z, &qc)?;
                        if r != C64::new(0.0, 0.0) {
                            let mut t = top.clone();
                            t.push(kk);
                            grown.push((t, ll, wt * r));
                        }
                        if below == left {
                            break;
                        }
                    }
                }
                partial = grown;
            }
            for (top, right, wt) in partial {
                if right == 0 {
                    *next.entry(top).or_default() += wt;
                }
            }
        }
        states = next;
    }
    let target: Vec<Color> = (1..=k as Color).collect();
    Ok(states.get(&target).copied().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_word_reconstructs() {
        for pi in Permutation::all(4) {
            let w = pi.reduced_word();
            assert_eq!(w.len(), pi.length());
            assert_eq!(Permutation::from_word(&w, 4), pi);
        }
    }

    #[test]
    fn bruhat_extremes() {
        let id = Permutation::identity(3);
        let w0 = Permutation::from_images(&[3, 2, 1]).unwrap();
        for p in Permutation::all(3) {
            assert!(id.bruhat_le(&p) && p.bruhat_le(&w0));
        }
        let a = Permutation::from_images(&[2, 1, 3]).unwrap();
        let b = Permutation::from_images(&[1, 3, 2]).unwrap();
        assert!(!a.bruhat_le(&b) && !b.bruhat_le(&a));
    }

    #[test]
    fn kappa_two_variables() {
        let w = [C64::new(0.3, 0.1), C64::new(-0.7, 0.4)];
        let q = 0.4;
        let s = Permutation::simple(1, 2);
        let id = Permutation::identity(2);
        let k_ss = kappa(&s, &s, &w, q).unwrap();
        let k_si = kappa(&s, &id, &w, q).unwrap();
        assert!((k_ss - (w[1] - w[0] * q) / (w[1] - w[0])).norm() < 1e-14);
        assert!((k_si - (q - 1.0) * w[1] / (w[1] - w[0])).norm() < 1e-14);
        assert_eq!(kappa(&id, &id, &w, q).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(kappa(&id, &s, &w, q).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn t_on_constant() {
        let one: Arc<dyn PointFunction> = Arc::new(|_: &[C64]| C64::new(1.0, 0.0));
        let t = apply_t(1, one, 0.3, Variant::QDeformed);
        let v = t.eval(&[C64::new(0.2, 0.0), C64::new(0.5, 0.1)]).unwrap();
        assert!((v - 0.3).norm() < 1e-15);
    }

    #[test]
    fn coincident_variables_rejected() {
        let one: Arc<dyn PointFunction> = Arc::new(|_: &[C64]| C64::new(1.0, 0.0));
        let t = apply_t(1, one, 0.3, Variant::QDeformed);
        let z = C64::new(0.2, 0.0);
        assert!(matches!(t.eval(&[z, z]), Err(Error::SingularEvaluation(1, 2))));
    }
}
