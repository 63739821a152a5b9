//! Chaser approaching a target in low Earth orbit.
//!
//! Runs the full cloud-edge loop on the relative-motion model and writes the
//! run artifacts. Pass an output directory as the first argument to keep
//! them somewhere other than `out/rendezvous`.

use std::path::PathBuf;

use neuroedge::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> neuroedge::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/rendezvous".into()).into();
    let cfg = ScenarioConfig::defaults(ScenarioKind::Rendezvous);
    println!(
        "mean motion {:.4e} rad/s, {} steps of {} s, N = {}",
        cfg.orbit.mean_motion(),
        cfg.steps(),
        cfg.dt,
        cfg.network.neurons
    );

    let out = run_scenario(&cfg)?;
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "t", "|r|", "|r_ref|", "|v|", "spikes");
    let norm3 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for r in out.records.iter().step_by(300) {
        println!(
            "{:>6.0} {:>9.3} {:>9.3} {:>9.4} {:>9}",
            r.t,
            norm3(&r.x_plant[..3]),
            norm3(&r.x_cloud_ref[..3]),
            norm3(&r.x_plant[3..]),
            r.spikes
        );
    }
    let s = &out.summary;
    println!(
        "final |r| = {:.3} m, NTE(states) = {:.4}, {} spikes ({} pJ), {} control messages",
        s.final_position_norm.unwrap_or(f64::NAN),
        s.nte_states,
        s.total_spikes,
        s.total_energy_pj,
        s.supervision_messages
    );
    out.write(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
