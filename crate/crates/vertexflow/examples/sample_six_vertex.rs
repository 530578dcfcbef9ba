//! Sample the colored six-vertex model on a 3x3 skew domain and histogram one height.

use std::collections::BTreeMap;
use std::sync::Arc;

use vertexflow::lattice::{height, DualPoint, ModelParams, SkewDomain, UpLeftPath};
use vertexflow::sampler::sample_sc6v;

fn main() -> vertexflow::Result<()> {
    let domain = Arc::new(SkewDomain::new(UpLeftPath::from_word("HHHVVV")?, UpLeftPath::from_word("VVVHHH")?, vec![1, 2, 3, 4, 5, 6])?);
    let params = ModelParams::new(0.4, vec![2.2, 3.1, 2.7], vec![1.0, 1.3, 0.9]);
    let batch = sample_sc6v(domain, &params, 42, 20_000)?;

    let point = DualPoint::new(3.5, 1.5);
    let mut hist = BTreeMap::new();
    for config in &batch.configs {
        *hist.entry(height(config, point, 3)?).or_insert(0usize) += 1;
    }
    println!("h_(>3) at (3.5, 1.5) over {} samples:", batch.configs.len());
    for (h, n) in hist {
        println!("  {h}: {:.4}", n as f64 / batch.configs.len() as f64);
    }
    Ok(())
}
