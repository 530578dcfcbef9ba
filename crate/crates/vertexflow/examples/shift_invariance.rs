//! Two cut collections with equal joint height laws after permuting rapidities.

use vertexflow::lattice::ModelParams;
use vertexflow::qmoments::QuadOptions;
use vertexflow::verify::{check_shift_exact, figure_pair, find_shift_isomorphism, random_shift_pairs};

fn main() -> vertexflow::Result<()> {
    let pair = figure_pair()?;
    let (phi, psi) = find_shift_isomorphism(&pair.left, &pair.right).expect("the figure pair is shift-isomorphic");
    println!("figure pair: row map {phi:?}, column map {psi:?}");

    let params = ModelParams::new(0.4, vec![2.23, 2.91, 2.57, 2.74], vec![1.03, 0.81, 1.12, 0.93]);
    for (i, pair) in random_shift_pairs(3, 4, 4, 2..=3, 9)?.iter().enumerate() {
        let sub = ModelParams {
            row_rapidities: params.row_rapidities[..pair.left.domain.rows()].to_vec(),
            col_rapidities: params.col_rapidities[..pair.left.domain.cols()].to_vec(),
            ..params.clone()
        };
        let (dist, moments) = check_shift_exact(pair, &sub, &QuadOptions::default(), (1e-10, 1e-8))?;
        println!("pair {i}: distribution gap {:.1e}, moment gap {:.1e}", dist.max_abs_error, moments.max_abs_error);
    }
    Ok(())
}
