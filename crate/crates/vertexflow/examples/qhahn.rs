//! q-Hahn quadrant model: the nested-contour formula against simulation.

use vertexflow::hecke::Permutation;
use vertexflow::lattice::DualPoint;
use vertexflow::qmoments::{qmoment_qhahn, MomentQuery, QuadOptions};
use vertexflow::sampler::{Plan, QHahnParams};
use vertexflow::verify::MomentModel;

fn main() -> vertexflow::Result<()> {
    let params = QHahnParams { q: 0.4, s: 0.3, z: 0.6, boundary_levels: vec![2, 4] };
    let queries = [
        MomentQuery { points: vec![DualPoint::new(1.5, 4.5)], colors: vec![0], pi: Permutation::identity(1) },
        MomentQuery { points: vec![DualPoint::new(1.5, 4.5), DualPoint::new(3.5, 4.5)], colors: vec![0, 1], pi: Permutation::from_images(&[2, 1])? },
    ];
    let model = MomentModel::QHahn { params: params.clone(), rows: 4, cols: 4 };
    let mc = model.monte_carlo(&queries, &Plan::new(3, 100_000))?;
    for (i, query) in queries.iter().enumerate() {
        let v = qmoment_qhahn(&params, query, &QuadOptions::default())?;
        println!("query {i}: integral {:.10}, monte carlo {:.5} ± {:.5}", v.value.re, mc.mean(i), mc.std_err(i));
    }
    Ok(())
}
