//! Rendezvous with no obstacle, a fixed one and a drifting one.
//!
//! The cloud adds a bounded repulsive acceleration near obstacles; the edge
//! network learns whatever the cloud commands. Compares clearance, control
//! effort and spike energy across the three cases over a few seeds.

use neuroedge::cloud::Obstacle;
use neuroedge::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> neuroedge::Result<()> {
    let kinds = [
        ScenarioKind::Rendezvous,
        ScenarioKind::RendezvousStaticObstacle,
        ScenarioKind::RendezvousDynamicObstacle,
    ];
    println!("{:<28} {:>4} {:>10} {:>8} {:>8} {:>10}", "scenario", "seed", "clearance", "effort", "spikes", "energy pJ");
    for kind in kinds {
        for seed in 0..3 {
            let mut cfg = ScenarioConfig::defaults(kind);
            cfg.seed = seed;
            let out = run_scenario(&cfg)?;
            let s = &out.summary;
            let clearance = s
                .min_obstacle_clearance
                .map_or("-".to_string(), |c| format!("{c:.2} m"));
            println!(
                "{:<28} {seed:>4} {clearance:>10} {:>8.2} {:>8} {:>10.1}",
                kind.name(),
                s.control_effort,
                s.total_spikes,
                s.total_energy_pj
            );
        }
    }

    // Obstacles are plain config data; this one sits across the approach.
    let mut cfg = ScenarioConfig::defaults(ScenarioKind::Rendezvous);
    cfg.obstacles = vec![Obstacle::fixed([40.0, 17.0, -3.0], 4.0)];
    let out = run_scenario(&cfg)?;
    println!(
        "custom obstacle: clearance {:.2} m, effort {:.2}",
        out.summary.min_obstacle_clearance.unwrap_or(f64::NAN),
        out.summary.control_effort
    );
    Ok(())
}
