//! Spike energy bookkeeping for a workbench run.
//!
//! Every spike costs a fixed 23.6 pJ, so the energy column is a relabelled
//! spike count. This prints where the spikes go: by gate mode and by neuron.

use std::collections::BTreeMap;

use neuroedge::telemetry::{spike_energy, ENERGY_PER_SPIKE_PJ};
use neuroedge::{run_scenario, ScenarioConfig, ScenarioKind};

fn main() -> neuroedge::Result<()> {
    for n in [1444u64, 3434, 4704] {
        println!("{n} spikes -> {} pJ", spike_energy(n));
    }

    let out = run_scenario(&ScenarioConfig::defaults(ScenarioKind::Workbench))?;
    let s = &out.summary;
    println!(
        "\n{} spikes over {} steps: {} pJ ({ENERGY_PER_SPIKE_PJ} pJ each), {:.2}% of N x steps",
        s.total_spikes,
        s.steps,
        s.total_energy_pj,
        100.0 * s.total_spikes as f64 / s.step_spike_budget as f64
    );

    let mut by_mode: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in &out.records {
        let e = by_mode.entry(r.mode.as_str()).or_default();
        e.0 += 1;
        e.1 += r.spikes;
    }
    for (mode, (steps, spikes)) in &by_mode {
        println!(
            "{mode:<11} {steps:>5} steps {spikes:>6} spikes {:>10.1} pJ {:>6.3} spikes/step",
            spike_energy(*spikes),
            *spikes as f64 / *steps as f64
        );
    }

    let mut per_neuron = vec![0u64; s.neurons];
    for sp in &out.spikes {
        per_neuron[sp.neuron as usize] += 1;
    }
    let active = per_neuron.iter().filter(|c| **c > 0).count();
    println!("{active} of {} neurons fired; busiest fired {} times", s.neurons, per_neuron.iter().max().unwrap());
    Ok(())
}
