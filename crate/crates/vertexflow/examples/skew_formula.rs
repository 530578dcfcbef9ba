//! The contour-integral q-moment on a skew domain against exhaustive enumeration.

use std::sync::Arc;

use vertexflow::hecke::Permutation;
use vertexflow::lattice::{DualPoint, ModelParams, SkewDomain, UpLeftPath};
use vertexflow::qmoments::{qmoment_skew, MomentQuery, QuadOptions};
use vertexflow::sampler::enumerate_sc6v;
use vertexflow::verify::enumerated_moment;

fn main() -> vertexflow::Result<()> {
    let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word("HHVHVV")?, UpLeftPath::from_word("VVHVHH")?, vec![0, 1, 1, 1, 2, 3])?);
    let params = ModelParams::new(0.35, vec![2.3, 3.1, 4.4], vec![1.0, 1.3, 0.9]);
    let ensemble = enumerate_sc6v(domain.clone(), &params)?;
    println!("{} configurations on {} vertices", ensemble.entries.len(), domain.vertex_count());

    let query = MomentQuery { points: vec![DualPoint::new(1.5, 3.5), DualPoint::new(3.5, 1.5)], colors: vec![0, 2], pi: Permutation::from_images(&[2, 1])? };
    let exact = enumerated_moment(&ensemble, params.q, &query)?;
    let integral = qmoment_skew(&domain, &params, &query, &QuadOptions::default())?;
    println!("enumeration: {exact:.15}");
    println!("integral:    {:.15} (estimated error {:.1e}, {} nodes per circle)", integral.value.re, integral.error, integral.nodes);
    Ok(())
}
