//! Vertex weights and the q-special functions they are built from.
//!
//! Everything here is generic over [`Field`], so the same code runs in
//! double-precision complex arithmetic and in exact rational arithmetic.
//! Vertex orientation follows `(bottom, left; top, right)` throughout.

use std::fmt::Debug;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{NumOps, One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{Color, ColorComposition};

/// Scalars the weight formulas can be evaluated in.
pub trait Field: Clone + Debug + PartialEq + Zero + One + NumOps + std::ops::Neg<Output = Self> {
    fn from_i64(v: i64) -> Self;
}

impl Field for Complex64 {
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
}

impl Field for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Field for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
}

/// Integer power, negative exponents allowed.
pub fn powi<T: Field>(x: &T, n: i64) -> T {
    let mut out = T::one();
    for _ in 0..n.unsigned_abs() {
        out = out * x.clone();
    }
    if n < 0 {
        T::one() / out
    } else {
        out
    }
}

/// `(x; q)_n = prod_{i=0}^{n-1} (1 - x q^i)`.
pub fn qpoch<T: Field>(x: &T, q: &T, n: u32) -> T {
    let mut out = T::one();
    let mut term = x.clone();
    for _ in 0..n {
        out = out * (T::one() - term.clone());
        term = term * q.clone();
    }
    out
}

/// `(x; q)_inf` for `|q| < 1`, truncated once the factors stop moving the product.
pub fn qpoch_inf(x: f64, q: f64) -> f64 {
    let mut out = 1.0;
    let mut term = x;
    for _ in 0..100_000 {
        out *= 1.0 - term;
        term *= q;
        if term.abs() < 1e-18 {
            break;
        }
    }
    out
}

/// Gaussian binomial `[n, m]_q`; zero outside `0 <= m <= n`.
pub fn qbinom<T: Field>(n: i64, m: i64, q: &T) -> T {
    if m < 0 || m > n || n < 0 {
        return T::zero();
    }
    qpoch(q, q, n as u32) / (qpoch(q, q, m as u32) * qpoch(q, q, (n - m) as u32))
}

/// `Z_q(N, I) = (q;q)_N / prod_k (q;q)_{I_k}` with `I_0 = N - |I|`.
pub fn zq<T: Field>(n: u32, comp: &ColorComposition, q: &T) -> T {
    let total = comp.total();
    if total > n {
        return T::zero();
    }
    let mut den = qpoch(q, q, n - total);
    for &c in &comp.counts {
        den = den * qpoch(q, q, c);
    }
    qpoch(q, q, n) / den
}

/// Number of pairs `a < b` with `word[a] > word[b]`.
pub fn inv(word: &[Color]) -> u32 {
    let mut out = 0;
    for a in 0..word.len() {
        for b in a + 1..word.len() {
            out += (word[a] > word[b]) as u32;
        }
    }
    out
}

/// Number of pairs `a < b` with `word[a] < word[b]`.
pub fn tinv(word: &[Color]) -> u32 {
    let mut out = 0;
    for a in 0..word.len() {
        for b in a + 1..word.len() {
            out += (word[a] < word[b]) as u32;
        }
    }
    out
}

/// Color composition of a word over `{0, ..., n}`.
pub fn comp_of(word: &[Color], n: usize) -> ColorComposition {
    let mut out = ColorComposition::zero(n);
    for &c in word {
        if c > 0 {
            out.counts[c as usize - 1] += 1;
        }
    }
    out
}

/// The auxiliary function `Phi(A, B; x, y)` of the explicit fused weights.
pub fn phi<T: Field>(a: &ColorComposition, b: &ColorComposition, x: &T, y: &T, q: &T) -> Result<T> {
    let Some(diff) = b.checked_sub(a) else {
        return Ok(T::zero());
    };
    let den = qpoch(y, q, b.total());
    if den.is_zero() {
        return Err(Error::ParameterSingularity("(y;q)_|B| vanishes".into()));
    }
    if x.is_zero() {
        return Err(Error::ParameterSingularity("x = 0 in Phi".into()));
    }
    let yx = y.clone() / x.clone();
    let mut out = qpoch(x, q, a.total()) * qpoch(&yx, q, diff.total()) / den * powi(&yx, a.total() as i64);
    let n = a.n();
    let mut e = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            e += diff.counts[i] as i64 * a.counts[j] as i64;
        }
    }
    out = out * powi(q, e);
    for i in 0..n {
        out = out * qbinom(b.counts[i] as i64, a.counts[i] as i64, q);
    }
    Ok(out)
}

/// Which evaluation of the q-special layer to perform, for callers that dispatch by name.
#[derive(Clone, Debug)]
pub enum QSpecial {
    Pochhammer { x: Complex64, n: u32 },
    Binom { n: i64, m: i64 },
    Zq { n: u32, comp: ColorComposition },
    Inv(Vec<Color>),
    Tinv(Vec<Color>),
    Phi { a: ColorComposition, b: ColorComposition, x: Complex64, y: Complex64 },
}

/// Evaluates one member of the q-special family at real `q`.
pub fn q_special(kind: &QSpecial, q: f64) -> Result<Complex64> {
    let qc = Complex64::new(q, 0.0);
    Ok(match kind {
        QSpecial::Pochhammer { x, n } => qpoch(x, &qc, *n),
        QSpecial::Binom { n, m } => qbinom(*n, *m, &qc),
        QSpecial::Zq { n, comp } => zq(*n, comp, &qc),
        QSpecial::Inv(w) => Complex64::new(inv(w) as f64, 0.0),
        QSpecial::Tinv(w) => Complex64::new(tinv(w) as f64, 0.0),
        QSpecial::Phi { a, b, x, y } => phi(a, b, x, y, &qc)?,
    })
}

/// Stochastic colored six-vertex weight `R_z(i, j; k, l)`:
/// `i` bottom, `j` left, `k` top, `l` right.
pub fn r_weight<T: Field>(i: Color, j: Color, k: Color, l: Color, z: &T, q: &T) -> Result<T> {
    let den = z.clone() - q.clone();
    if den.is_zero() {
        return Err(Error::ParameterSingularity("z = q".into()));
    }
    let one = T::one();
    Ok(if i == j {
        if k == i && l == i {
            one
        } else {
            T::zero()
        }
    } else if i > j {
        // Larger color arrives from below.
        if k == i && l == j {
            q.clone() * (z.clone() - one) / den
        } else if k == j && l == i {
            z.clone() * (one - q.clone()) / den
        } else {
            T::zero()
        }
    } else if k == i && l == j {
        (z.clone() - one) / den
    } else if k == j && l == i {
        (one - q.clone()) / den
    } else {
        T::zero()
    })
}

/// Possible `(top, right, weight)` outcomes of an `R_z` vertex with inputs `(i, j)`.
pub fn r_outcomes<T: Field>(i: Color, j: Color, z: &T, q: &T) -> Result<Vec<(Color, Color, T)>> {
    if i == j {
        return Ok(vec![(i, i, T::one())]);
    }
    Ok(vec![(i, j, r_weight(i, j, i, j, z, q)?), (j, i, r_weight(i, j, j, i, z, q)?)])
}

fn sz_den<T: Field>(z: &T, s: &T) -> Result<T> {
    let den = T::one() - s.clone() * z.clone();
    if den.is_zero() {
        return Err(Error::ParameterSingularity("s z = 1".into()));
    }
    Ok(den)
}

/// Higher-spin weight `L_z^{(s)}(I, j; K, l)`: composition `I` below, color `j` on the left,
/// composition `K` on top, color `l` on the right.
pub fn l_weight<T: Field>(big_i: &ColorComposition, j: Color, big_k: &ColorComposition, l: Color, z: &T, s: &T, q: &T) -> Result<T> {
    let den = sz_den(z, s)?;
    let expected = big_i.shifted(j, 1).and_then(|c| c.shifted(l, -1));
    if expected.as_ref() != Some(big_k) {
        return Ok(T::zero());
    }
    let n = big_i.n() as Color;
    let sz = s.clone() * z.clone();
    let s2 = s.clone() * s.clone();
    let above = |c: Color| powi(q, big_i.range(c + 1, n) as i64);
    let qi = |c: Color| powi(q, big_i.get(c) as i64);
    let one = T::one();
    let num = match (j, l) {
        (0, 0) => one - sz * powi(q, big_i.total() as i64),
        (j, l) if j == l => (s2 * qi(j) - sz) * above(j),
        (0, l) => sz * (qi(l) - one) * above(l),
        (_, 0) => one - s2 * powi(q, big_i.total() as i64),
        (j, l) if j < l => sz * (qi(l) - one) * above(l),
        (_, l) => s2 * (qi(l) - one) * above(l),
    };
    Ok(num / den)
}

/// Possible `(top, right, weight)` outcomes of an `L` vertex with inputs `(I, j)`.
pub fn l_outcomes<T: Field>(big_i: &ColorComposition, j: Color, z: &T, s: &T, q: &T) -> Result<Vec<(ColorComposition, Color, T)>> {
    let mut out = Vec::with_capacity(big_i.n() + 1);
    for l in 0..=big_i.n() as Color {
        let Some(k) = big_i.shifted(j, 1).and_then(|c| c.shifted(l, -1)) else {
            continue;
        };
        let w = l_weight(big_i, j, &k, l, z, s, q)?;
        out.push((k, l, w));
    }
    Ok(out)
}

/// Fused weight `W_z^{(N,M)}(A, B; C, D)` with `q^N` and `q^M` treated as free parameters:
/// `A` bottom, `B` left, `C` top, `D` right.
#[allow(clippy::too_many_arguments)]
pub fn fused_weight<T: Field>(
    a: &ColorComposition,
    b: &ColorComposition,
    c: &ColorComposition,
    d: &ColorComposition,
    z: &T,
    q_n: &T,
    q_m: &T,
    q: &T,
) -> Result<T> {
    if a.total() + b.total() != c.total() + d.total() || a.add(b) != c.add(d) {
        return Ok(T::zero());
    }
    let n = a.n();
    let pref = powi(z, d.total() as i64 - b.total() as i64) * powi(q_n, a.total() as i64) * powi(q_m, -(d.total() as i64));
    let x1 = q_n.clone() / q_m.clone() * z.clone();
    let y1 = z.clone() / q_m.clone();
    let x2 = T::one() / (q_n.clone() * z.clone());
    let y2 = T::one() / q_n.clone();
    let bound = ColorComposition::from_counts((0..n).map(|i| b.counts[i].min(c.counts[i])).collect());
    let mut sum = T::zero();
    for p in bound.all_below() {
        let cp = c.checked_sub(&p).expect("P <= C");
        let cdp = c.add(d).checked_sub(&p).expect("P <= C");
        let t1 = phi(&cp, &cdp, &x1, &y1, q)?;
        if t1.is_zero() {
            continue;
        }
        sum = sum + t1 * phi(&p, b, &x2, &y2, q)?;
    }
    Ok(pref * sum)
}

/// q-Hahn weight `W^{qH}_{s,z}(A, B; C, D)`: `A` bottom, `B` left, `C` top, `D` right.
/// Left-entering paths go up, so `C = A + B - D`; the value depends on `A` and `D` only.
#[allow(clippy::too_many_arguments)]
pub fn qhahn_weight<T: Field>(a: &ColorComposition, b: &ColorComposition, c: &ColorComposition, d: &ColorComposition, s: &T, z: &T, q: &T) -> Result<T> {
    if !d.le(a) || a.add(b).checked_sub(d).as_ref() != Some(c) {
        return Ok(T::zero());
    }
    qhahn_split_weight(a, d, s, z, q)
}

/// The q-Hahn probability of sending `D` of the paths `A` arriving from below to the right.
pub fn qhahn_split_weight<T: Field>(a: &ColorComposition, d: &ColorComposition, s: &T, z: &T, q: &T) -> Result<T> {
    if !d.le(a) {
        return Ok(T::zero());
    }
    let s2 = s.clone() * s.clone();
    let z2 = z.clone() * z.clone();
    let den = qpoch(&s2, q, a.total());
    if den.is_zero() {
        return Err(Error::ParameterSingularity("(s^2;q)_|A| vanishes".into()));
    }
    let r = s2 / z2.clone();
    let mut out = powi(&r, d.total() as i64) * qpoch(&r, q, a.total() - d.total()) * qpoch(&z2, q, d.total()) / den;
    let n = a.n();
    let mut e = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            e += d.counts[i] as i64 * (a.counts[j] - d.counts[j]) as i64;
        }
    }
    out = out * powi(q, e);
    for i in 0..n {
        out = out * qbinom(a.counts[i] as i64, (a.counts[i] - d.counts[i]) as i64, q);
    }
    Ok(out)
}

/// Probability that `k` paths enter a q-Hahn row from the left boundary.
pub fn qhahn_boundary_prob(k: u32, s: f64, z: f64, q: f64) -> f64 {
    let r = s * s / (z * z);
    qpoch_inf(r, q) / qpoch_inf(s * s, q) * qpoch(&(z * z), &q, k) / qpoch(&q, &q, k) * r.powi(k as i32)
}

pub fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(v: &[u32]) -> ColorComposition {
        ColorComposition::from_counts(v.to_vec())
    }

    #[test]
    fn r_weight_table_example() {
        let w = r_weight(2, 1, 1, 2, &2.0f64, &0.5).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r_weight(3, 3, 3, 3, &7.0f64, &0.3).unwrap(), 1.0);
        assert!(r_weight(0, 1, 0, 1, &0.5f64, &0.5).is_err());
    }

    #[test]
    fn r_weight_stochastic() {
        for (i, j) in [(0, 1), (1, 0), (2, 1), (1, 2), (1, 1)] {
            let s: f64 = (0..3).flat_map(|k| (0..3).map(move |l| (k, l))).map(|(k, l)| r_weight(i, j, k, l, &1.7, &0.4).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn l_weight_entries() {
        let i = comp(&[1, 2]);
        let (z, s, q) = (0.7f64, -0.4, 0.3);
        let w = l_weight(&i, 1, &comp(&[2, 2]), 0, &z, &s, &q).unwrap();
        assert!((w - (1.0 - s * s * q.powi(3)) / (1.0 - s * z)).abs() < 1e-14);
        assert_eq!(l_weight(&ColorComposition::zero(2), 0, &ColorComposition::zero(2), 0, &z, &s, &q).unwrap(), 1.0);
    }

    #[test]
    fn qbinom_matches_definition() {
        let q = 0.37f64;
        assert!((qbinom(4, 2, &q) - (1.0 + q + 2.0 * q * q + q.powi(3) + q.powi(4))).abs() < 1e-14);
        assert_eq!(qbinom(3, 4, &q), 0.0);
        assert_eq!(qpoch(&0.2, &q, 0), 1.0);
    }

    #[test]
    fn qhahn_zero_split() {
        let a = comp(&[2, 1]);
        let (s, z, q) = (0.3f64, 0.6, 0.45);
        let w = qhahn_split_weight(&a, &ColorComposition::zero(2), &s, &z, &q).unwrap();
        let expected = qpoch(&(s * s / (z * z)), &q, 3) / qpoch(&(s * s), &q, 3);
        assert!((w - expected).abs() < 1e-14);
        assert_eq!(qhahn_split_weight(&a, &comp(&[3, 0]), &s, &z, &q).unwrap(), 0.0);
    }
}
