//! A spiking network tracking a signal under supervision, then on its own.
//!
//! The network gets error feedback and plasticity for the first half of
//! the run and is left alone for the second half, with no external input,
//! as on the edge. Prints a decimated trace and a raster of the busiest
//! neurons.

use neuroedge::snn::{init_network, NetworkSpec};

fn main() -> neuroedge::Result<()> {
    let spec = NetworkSpec {
        neurons: 30,
        dims: 1,
        basis: 100,
        decoder_variance: 10.0,
        leak: 1e-3,
        l2_cost: 1e-3,
        l1_cost: 1e-3,
        feedback_gain: 500.0,
        learning_rate: 1e-3,
    };
    let (params, mut state) = init_network(7, spec)?;
    println!("redundant code (N > 2K): {}", params.has_redundancy());

    let (dt, substeps, steps) = (0.01, 10u32, 600u64);
    let dt_sub = dt / substeps as f64;
    let target = |t: f64| 2.0 * (0.8 * t).sin() + 0.5;
    let no_input = [0.0];

    let mut sq_err = [0.0; 2];
    for step in 0..steps {
        let t = step as f64 * dt;
        let u = [target(t)];
        let supervised = step < steps / 2;
        if supervised {
            let e = [u[0] - state.decode(&params)[0]];
            state.plasticity_update(&params, &e)?;
        }
        for sub in 0..substeps {
            let e = [u[0] - state.decode(&params)[0]];
            state.substep(&params, &no_input, supervised.then_some(&e[..]), dt_sub, 1, step, sub)?;
        }
        let u_hat = state.decode(&params)[0];
        sq_err[usize::from(!supervised)] += (u[0] - u_hat).powi(2);
        if step % 50 == 0 {
            println!("t={t:>4.1}  u={:>7.3}  u_hat={u_hat:>7.3}  {}", u[0], if supervised { "supervised" } else { "free" });
        }
    }
    let half = (steps / 2) as f64;
    println!(
        "rms error: supervised {:.4}, free {:.4}",
        (sq_err[0] / half).sqrt(),
        (sq_err[1] / half).sqrt()
    );

    let mut counts = vec![0usize; params.neurons()];
    for s in &state.spike_log {
        counts[s.neuron as usize] += 1;
    }
    let mut busiest: Vec<usize> = (0..counts.len()).collect();
    busiest.sort_by_key(|&i| std::cmp::Reverse(counts[i]));
    println!("{} spikes; raster (one column per 10 steps):", state.spike_log.len());
    for &n in busiest.iter().take(6) {
        let mut row = vec![b'.'; (steps / 10) as usize];
        for s in state.spike_log.iter().filter(|s| s.neuron as usize == n) {
            row[(s.step / 10) as usize] = b'|';
        }
        println!("{n:>3} {}", String::from_utf8_lossy(&row));
    }
    Ok(())
}
