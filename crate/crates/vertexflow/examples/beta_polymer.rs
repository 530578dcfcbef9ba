//! Beta polymer: simulated delayed partition functions against the integral formula.

use vertexflow::hecke::Permutation;
use vertexflow::lattice::DualPoint;
use vertexflow::qmoments::{beta_moment, MomentQuery, QuadOptions};
use vertexflow::sampler::{polymer_mean, Plan, PolymerParams};

fn main() -> vertexflow::Result<()> {
    let params = PolymerParams { sigma: 6.0, rho: 2.0 };
    let t_max = 6;
    let acc = polymer_mean(params, t_max, &[0], &Plan::new(1, 200_000), t_max, |s, out| {
        for t in 1..=t_max {
            out[t - 1] = s.get(0, 1, t).unwrap_or(f64::NAN);
        }
    })?;
    println!("  t   E Z(1,t) simulated      integral        ((sigma-rho)/sigma)^(t-1)");
    for t in 1..=t_max {
        let query = MomentQuery { points: vec![DualPoint::new(0.5, t as f64 - 0.5)], colors: vec![0], pi: Permutation::identity(1) };
        let v = beta_moment(&params, &query, &QuadOptions::default())?;
        let law = ((params.sigma - params.rho) / params.sigma).powi(t as i32 - 1);
        println!("{t:>3}   {:.5} ± {:.5}   {:.12}   {law:.12}", acc.mean(t - 1), acc.std_err(t - 1), v.value.re);
    }
    Ok(())
}
