//! Tracking error and traffic against network size.
//!
//! Usage: `n_sweep [SEEDS]`, default 3 seeds per size.

use neuroedge::runner::median;
use neuroedge::{run_sweep, ScenarioConfig, ScenarioKind, SweepSpec};

fn main() -> neuroedge::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spec = SweepSpec {
        base: ScenarioConfig::defaults(ScenarioKind::Workbench),
        n_values: vec![5, 15, 30, 50],
        seeds: (0..seeds).collect(),
    };
    let rows = run_sweep(&spec)?;
    println!("{:>4} {:>12} {:>12} {:>10} {:>10}", "N", "NTE(u)", "NTE(x)", "spikes", "messages");
    for &n in &spec.n_values {
        let pick = |f: fn(&neuroedge::SweepRow) -> f64| {
            median(&rows.iter().filter(|r| r.n == n).map(f).collect::<Vec<_>>())
        };
        println!(
            "{n:>4} {:>12.4} {:>12.4} {:>10.0} {:>10.0}",
            pick(|r| r.nte_control),
            pick(|r| r.nte_states),
            pick(|r| r.total_spikes as f64),
            pick(|r| r.supervision_messages as f64)
        );
    }
    println!("(medians over {seeds} seeds)");
    Ok(())
}
