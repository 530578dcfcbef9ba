//! Expansion coefficients of the Demazure-Lusztig operator T_pi at a point.

use num_complex::Complex64 as C64;
use vertexflow::hecke::{kappa_all, z_partition, Permutation};

fn main() -> vertexflow::Result<()> {
    let pi = Permutation::from_images(&[3, 1, 2])?;
    let w = [C64::new(0.5, 0.1), C64::new(1.5, -0.3), C64::new(2.5, 0.2)];
    let q = 0.4;
    let mut coefs: Vec<_> = kappa_all(&pi, &w, q)?.into_iter().collect();
    coefs.sort_by_key(|(rho, _)| rho.images());
    println!("T_pi for pi = {:?} at q = {q}", pi.images());
    // kappa equals a signed lattice partition function times a cross ratio product.
    let mut cross = C64::new(1.0, 0.0);
    for a in 0..w.len() {
        for b in a + 1..w.len() {
            cross *= (w[b] - q * w[a]) / (w[b] - w[a]);
        }
    }
    for (rho, k) in coefs {
        let sign = if (pi.length() + rho.length()) % 2 == 0 { 1.0 } else { -1.0 };
        let z = sign * cross * z_partition(&pi, &rho, &w, q)?;
        println!("  rho = {:?}: kappa = {k:.6}, from Z = {z:.6}", rho.images());
    }
    Ok(())
}
