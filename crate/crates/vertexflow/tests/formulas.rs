//! Contour-integral moment formulas against exact enumeration.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use vertexflow::hecke::Permutation;
use vertexflow::lattice::{height_in, Color, DualPoint, EdgeView, ModelParams, SkewDomain, UpLeftPath};
use vertexflow::qmoments::*;
use vertexflow::sampler::{enumerate_higher_spin, enumerate_qhahn, enumerate_sc6v, QHahnParams};

fn exact_moment<E: EdgeView>(domain: &SkewDomain, entries: &[(f64, &E)], q: f64, query: &MomentQuery) -> f64 {
    let k = query.k();
    entries
        .iter()
        .map(|(w, g)| {
            let mut e = 0;
            for a in 0..k {
                let p = query.points[query.pi.apply(a + 1) - 1];
                e += height_in(domain, *g, p, query.colors[a]).unwrap();
            }
            w * q.powi(e as i32)
        })
        .sum()
}

/// All queries of size k on the given points: nondecreasing colors, ordered points, any pi.
fn queries(points: &[DualPoint], max_color: Color, k: usize) -> Vec<MomentQuery> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| (p.a2, -p.b2));
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let pts: Vec<DualPoint> = idx.iter().map(|&i| sorted[i]).collect();
        if pts.windows(2).all(|w| w[0].a2 <= w[1].a2 && w[0].b2 >= w[1].b2) {
            let mut cols = vec![0 as Color; k];
            loop {
                for pi in Permutation::all(k) {
                    out.push(MomentQuery { points: pts.clone(), colors: cols.clone(), pi });
                }
                let mut a = k;
                loop {
                    if a == 0 {
                        break;
                    }
                    a -= 1;
                    if cols[a] < max_color {
                        cols[a] += 1;
                        for b in a + 1..k {
                            cols[b] = cols[a];
                        }
                        break;
                    }
                    if a == 0 {
                        a = usize::MAX;
                        break;
                    }
                }
                if a == usize::MAX {
                    break;
                }
            }
        }
        let mut a = k;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < sorted.len() {
                for b in a + 1..k {
                    idx[b] = idx[a];
                }
                break;
            }
            if a == 0 {
                return out;
            }
        }
    }
}

#[test]
fn skew_formula_matches_enumeration() {
    let q = 0.35;
    let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word("HHVHVV").unwrap(), UpLeftPath::from_word("VVHVHH").unwrap(), vec![0, 1, 1, 1, 2, 3]).unwrap());
    let params = ModelParams::new(q, vec![2.3, 3.1, 4.4], vec![1.0, 1.3, 0.9]);
    let ens = enumerate_sc6v(domain.clone(), &params).unwrap();
    let entries: Vec<(f64, _)> = ens.entries.iter().map(|(w, g)| (w.re, g)).collect();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for k in 1..=2 {
        for query in queries(&domain.upper().points(), 3, k) {
            let exact = exact_moment(&domain, &entries, q, &query);
            let got = qmoment_skew(&domain, &params, &query, &QuadOptions::default()).unwrap();
            let err = (got.value - C64::new(exact, 0.0)).norm();
            worst = worst.max(err);
            n += 1;
            assert!(err < 1e-8, "{query:?}: {} vs {exact} (est {}, N {})", got.value, got.error, got.nodes);
        }
    }
    eprintln!("{n} queries, worst {worst:e}");
}

#[test]
fn skew_formula_three_points_every_permutation() {
    // Two points coincide, so only the longest permutation (whose reduced word repeats a
    // generator) can tell the Hecke evaluation apart from a symmetric one.
    let q = 0.35;
    let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word("HHVV").unwrap(), UpLeftPath::from_word("VVHH").unwrap(), vec![1, 2, 3, 4]).unwrap());
    let params = ModelParams::new(q, vec![2.3, 3.1], vec![1.0, 1.3]);
    let ens = enumerate_sc6v(domain.clone(), &params).unwrap();
    let entries: Vec<(f64, _)> = ens.entries.iter().map(|(w, g)| (w.re, g)).collect();
    let points = vec![DualPoint::new(1.5, 2.5), DualPoint::new(2.5, 2.5), DualPoint::new(2.5, 2.5)];
    for colors in [vec![1, 2, 2], vec![2, 2, 2], vec![0, 1, 3]] {
        let batch: Vec<MomentQuery> = Permutation::all(3).into_iter().map(|pi| MomentQuery { points: points.clone(), colors: colors.clone(), pi }).collect();
        let together = qmoment_skew_many(&domain, &params, &batch, &QuadOptions::default()).unwrap();
        for (query, got) in batch.iter().zip(&together) {
            let exact = exact_moment(&domain, &entries, q, query);
            assert!((got.value - C64::new(exact, 0.0)).norm() < 1e-9, "{query:?}: {} vs {exact}", got.value);
            let alone = qmoment_skew(&domain, &params, query, &QuadOptions::default()).unwrap();
            assert!((alone.value - got.value).norm() < 1e-10, "{query:?}: alone {} vs batched {}", alone.value, got.value);
        }
    }
}

fn higher_spin_params() -> ModelParams {
    let mut p = ModelParams::new(0.4, vec![3.0, 3.4, 3.9], vec![1.0, 1.1]);
    p.col_spins = vec![2.5, 2.5];
    p.boundary_levels = vec![1, 3];
    p
}

fn quadrant_points(rows: usize, cols: usize) -> Vec<DualPoint> {
    let mut out = Vec::new();
    for x in 0..=cols {
        for y in 0..=rows {
            out.push(DualPoint::new(x as f64 + 0.5, y as f64 + 0.5));
        }
    }
    out
}

#[test]
fn higher_spin_formula_matches_enumeration() {
    let params = higher_spin_params();
    let (domain, entries) = enumerate_higher_spin(&params, 3, 2, 1 << 20).unwrap();
    let total: f64 = entries.iter().map(|e| e.0).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let refs: Vec<(f64, _)> = entries.iter().map(|(w, g)| (*w, g)).collect();
    let mut worst: f64 = 0.0;
    let all = queries(&quadrant_points(3, 2), 2, 2);
    for (i, query) in all.iter().enumerate() {
        let exact = exact_moment(&domain, &refs, params.q, query);
        let got = qmoment_higher_spin(&params, query, &QuadOptions::default()).unwrap();
        let err = (got.value - C64::new(exact, 0.0)).norm();
        worst = worst.max(err);
        assert!(err < 1e-8, "{query:?}: {} vs {exact}", got.value);
        if i % 7 == 0 {
            let kap = qmoment_higher_spin_kappa(&params, query, &QuadOptions::default()).unwrap();
            assert!((kap.value - got.value).norm() < 1e-8, "kappa form {query:?}: {} vs {}", kap.value, got.value);
        }
    }
    eprintln!("{} higher-spin queries, worst {worst:e}", all.len());
}

#[test]
fn shifted_observable_matches_enumeration() {
    let params = higher_spin_params();
    let q = params.q;
    let (domain, entries) = enumerate_higher_spin(&params, 3, 2, 1 << 20).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for query in queries(&quadrant_points(3, 2), 2, 2) {
        if query.colors.contains(&0) {
            continue;
        }
        let pc = permute_colors(&query.pi, &query.colors);
        let exact: f64 = entries
            .iter()
            .map(|(w, g)| {
                let hg: Vec<u32> = (0..query.k()).map(|i| height_in(&domain, g, query.points[i], pc[i]).unwrap()).collect();
                let he: Vec<u32> = (0..query.k()).map(|i| height_in(&domain, g, query.points[i], pc[i] - 1).unwrap()).collect();
                w * shifted_observable_value(q, &pc, &hg, &he)
            })
            .sum();
        let got = shifted_observable_exact(&params, &query, &QuadOptions::default()).unwrap();
        let err = (got.value - C64::new(exact, 0.0)).norm();
        worst = worst.max(err);
        count += 1;
        assert!(err < 1e-8, "{query:?}: {} vs {exact}", got.value);
    }
    eprintln!("{count} shifted queries, worst {worst:e}");
}

#[test]
fn qhahn_formula_matches_enumeration() {
    let params = QHahnParams { q: 0.4, s: 0.3, z: 0.6, boundary_levels: vec![1, 2] };
    let (domain, entries) = enumerate_qhahn(&params, 2, 2, 8, 1 << 22).unwrap();
    let total: f64 = entries.iter().map(|e| e.0).sum();
    let refs: Vec<(f64, _)> = entries.iter().map(|(w, g)| (*w, g)).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for query in queries(&quadrant_points(2, 2), 2, 2) {
        let levels = ModelParams { boundary_levels: params.boundary_levels.clone(), ..ModelParams::new(0.4, vec![], vec![]) };
        if query.points.last().unwrap().b2 <= 2 * levels.level(*query.colors.last().unwrap()) as i64 {
            continue;
        }
        let exact = exact_moment(&domain, &refs, params.q, &query);
        let got = qmoment_qhahn(&params, &query, &QuadOptions::default()).unwrap();
        let err = (got.value - C64::new(exact, 0.0)).norm();
        worst = worst.max(err);
        count += 1;
        assert!(err < 1e-8 + (1.0 - total), "{query:?}: {} vs {exact}", got.value);
    }
    eprintln!("{count} q-Hahn queries, worst {worst:e}, missing mass {:e}", 1.0 - total);
}

#[test]
fn beta_polymer_formula_matches_simulation() {
    use vertexflow::sampler::{polymer_mean, Plan, PolymerParams};
    let params = PolymerParams { sigma: 6.0, rho: 2.0 };
    // Closed forms: E Z^(1,t) = ((sigma - rho)/sigma)^(t-1) and Z^(t,t) = 1.
    for t in 1..5 {
        let q1 = MomentQuery { points: vec![DualPoint::new(0.5, t as f64 - 0.5)], colors: vec![0], pi: Permutation::identity(1) };
        let v = beta_moment(&params, &q1, &QuadOptions::default()).unwrap();
        assert!((v.value - (4.0f64 / 6.0).powi(t - 1)).norm() < 1e-10, "t = {t}: {}", v.value);
        let qt = MomentQuery { points: vec![DualPoint::new(t as f64 - 0.5, t as f64 - 0.5)], colors: vec![0], pi: Permutation::identity(1) };
        assert!((beta_moment(&params, &qt, &QuadOptions::default()).unwrap().value - 1.0).norm() < 1e-10);
    }
    let queries = [
        MomentQuery { points: vec![DualPoint::new(1.5, 4.5), DualPoint::new(2.5, 3.5)], colors: vec![0, 1], pi: Permutation::identity(2) },
        MomentQuery { points: vec![DualPoint::new(0.5, 4.5), DualPoint::new(1.5, 3.5)], colors: vec![1, 1], pi: Permutation::from_images(&[2, 1]).unwrap() },
        MomentQuery { points: vec![DualPoint::new(1.5, 4.5), DualPoint::new(1.5, 4.5)], colors: vec![0, 2], pi: Permutation::identity(2) },
    ];
    let acc = polymer_mean(params, 5, &[0, 1, 2], &Plan::new(7, 400_000), queries.len(), |s, out| {
        for (i, q) in queries.iter().enumerate() {
            out[i] = (0..2)
                .map(|a| {
                    let (m, t) = polymer_point(&q.points[q.pi.apply(a + 1) - 1]);
                    s.z(q.colors[a] as usize, m, t).unwrap()
                })
                .product();
        }
    })
    .unwrap();
    for (i, q) in queries.iter().enumerate() {
        let v = beta_moment(&params, q, &QuadOptions::default()).unwrap();
        let z = (v.value.re - acc.mean(i)) / acc.std_err(i);
        eprintln!("{q:?}: exact {} (err {:e}, N {}), mc {} ± {}", v.value, v.error, v.nodes, acc.mean(i), acc.std_err(i));
        assert!(z.abs() < 5.0);
    }
}

#[test]
fn rational_enumeration_is_exactly_stochastic() {
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive};
    use vertexflow::sampler::enumerate_sc6v_with;

    let rat = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let q = rat(7, 20);
    let rows = [rat(23, 10), rat(31, 10), rat(44, 10)];
    let cols = [rat(1, 1), rat(13, 10), rat(9, 10)];
    for (lower, upper, coloring) in
        [("HHVV", "VVHH", vec![1, 2, 3, 4]), ("HVHVHV", "VVVHHH", vec![1, 1, 2, 2, 3, 3]), ("HHHVVV", "VVVHHH", vec![0, 0, 0, 1, 2, 2])]
    {
        let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word(lower).unwrap(), UpLeftPath::from_word(upper).unwrap(), coloring).unwrap());
        let exact = enumerate_sc6v_with(domain.clone(), |x, y| &rows[y - 1] / &cols[x - 1], &q, 12).unwrap();
        assert!(exact.total_weight().is_one(), "{lower}/{upper}: total weight {}", exact.total_weight());

        let params = ModelParams::new(0.35, vec![2.3, 3.1, 4.4][..domain.rows()].to_vec(), vec![1.0, 1.3, 0.9][..domain.cols()].to_vec());
        let float = enumerate_sc6v(domain.clone(), &params).unwrap();
        assert_eq!(exact.entries.len(), float.entries.len());
        for ((we, ge), (wf, gf)) in exact.entries.iter().zip(&float.entries) {
            assert_eq!(ge, gf);
            assert!((we.to_f64().unwrap() - wf.re).abs() < 1e-13, "{lower}/{upper}: {we} vs {wf}");
        }
    }
}
