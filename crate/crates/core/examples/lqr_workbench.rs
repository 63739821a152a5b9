//! LQR design for the double integrator and the cloud-only closed loop.
//!
//! Prints the gain, checks it against the Riccati residual, and tabulates
//! the sampled closed-loop response against the matrix exponential of the
//! continuous loop.

use neuroedge::cloud::CloudPolicy;
use neuroedge::linalg::{care_residual, care_solve, lqr_gain, matrix_exponential, DenseMatrix};
use neuroedge::plant::{make_workbench, WORKBENCH_X0};

fn main() -> neuroedge::Result<()> {
    let dt = 0.01;
    let mut plant = make_workbench(WORKBENCH_X0, dt)?;
    let q = DenseMatrix::identity(2);
    let r = DenseMatrix::identity(1);

    let s = care_solve(plant.a(), plant.b(), &q, &r)?;
    let k = lqr_gain(plant.a(), plant.b(), &q, &r)?;
    println!("K = [{:.4}, {:.4}]", k[(0, 0)], k[(0, 1)]);
    println!("CARE residual = {:.2e}", care_residual(plant.a(), plant.b(), &q, &r, &s)?);

    let closed = plant.a() - &(plant.b() * &k);
    let x0 = plant.state().to_vec();
    let policy = CloudPolicy::new(k, Vec::new(), Default::default())?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "t", "x1", "x2", "u", "|x-xc|");
    for step in 0..=1000 {
        let t = step as f64 * dt;
        let x = plant.state().to_vec();
        let u = policy.cloud_step(&x, t)?;
        if step % 100 == 0 {
            // Continuous closed loop as a yardstick for the zero-order hold.
            let xc = matrix_exponential(&closed, t)?.mul_vec(&x0)?;
            let gap = x.iter().zip(&xc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            println!("{t:>5.1} {:>10.4} {:>10.4} {:>10.4} {gap:>10.2e}", x[0], x[1], u[0]);
        }
        plant.rk4_step(&u)?;
    }
    Ok(())
}
