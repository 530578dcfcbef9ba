//! Higher-spin q-moments: direct formula, kappa expansion, and Monte Carlo.

use vertexflow::hecke::Permutation;
use vertexflow::lattice::DualPoint;
use vertexflow::qmoments::{qmoment_higher_spin, qmoment_higher_spin_kappa, MomentQuery, QuadOptions};
use vertexflow::sampler::Plan;
use vertexflow::verify::{standard_higher_spin, MomentModel};

fn main() -> vertexflow::Result<()> {
    let params = standard_higher_spin();
    let query = MomentQuery { points: vec![DualPoint::new(1.5, 3.5), DualPoint::new(2.5, 2.5)], colors: vec![1, 2], pi: Permutation::from_images(&[2, 1])? };
    let opts = QuadOptions::default();
    let direct = qmoment_higher_spin(&params, &query, &opts)?;
    let kappa = qmoment_higher_spin_kappa(&params, &query, &opts)?;
    let model = MomentModel::HigherSpin { params, rows: 3, cols: 3 };
    let mc = model.monte_carlo(std::slice::from_ref(&query), &Plan::new(7, 100_000))?;
    println!("direct formula: {:.12}", direct.value.re);
    println!("kappa form:     {:.12}", kappa.value.re);
    println!("monte carlo:    {:.5} ± {:.5}", mc.mean(0), mc.std_err(0));
    Ok(())
}
