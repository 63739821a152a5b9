//! Closed-loop orchestration: plant, cloud, link and edge network stepped
//! together, plus the network-size sweep.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{min_clearance, norm, CloudNode, CloudPolicy};
use crate::error::{Error, Result};
use crate::linalg::{lqr_gain, DenseMatrix};
use crate::link::{supervision_count, EdgeLink, LinkStats};
use crate::plant::{make_cw, make_workbench, LtiPlant};
use crate::scenario::{LinkSpec, ScenarioConfig};
use crate::snn::{init_network, GateMode, NetworkParams, Spike, SupervisionGate};
use crate::telemetry::{
    normalized_tracking_error, spike_energy, spiking_cost, write_run, RunSummary, StepRecord,
};

/// Builds the scenario's plant at its initial state.
pub fn build_plant(cfg: &ScenarioConfig) -> Result<LtiPlant> {
    if cfg.scenario.is_rendezvous() {
        let x = &cfg.x0;
        if x.len() != 6 {
            return Err(Error::Validation(vec!["x0 must hold 6 values".into()]));
        }
        make_cw(&cfg.orbit, [x[0], x[1], x[2]], [x[3], x[4], x[5]], cfg.dt)
    } else {
        if cfg.x0.len() != 2 {
            return Err(Error::Validation(vec!["x0 must hold 2 values".into()]));
        }
        make_workbench([cfg.x0[0], cfg.x0[1]], cfg.dt)
    }
}

/// LQR gain and obstacle set of the cloud controller.
pub fn build_policy(cfg: &ScenarioConfig, plant: &LtiPlant) -> Result<CloudPolicy> {
    let gain = lqr_gain(plant.a(), plant.b(), &cfg.q_matrix()?, &cfg.r_matrix()?)?;
    CloudPolicy::new(gain, cfg.obstacles.clone(), cfg.repulsion)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub spikes: Vec<Spike>,
    pub summary: RunSummary,
    pub link_stats: LinkStats,
    /// Steps supervised because of relearning, including the check step
    /// that triggered it.
    pub relearn_windows: Vec<Range<u64>>,
    /// `u - û` measured at the start of each supervised step.
    pub measured_errors: Vec<Option<Vec<f64>>>,
    /// Digest of the slow weights after each step.
    pub weight_digests: Vec<u64>,
    pub gain: DenseMatrix,
    pub params: NetworkParams,
    pub final_state: Vec<f64>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_run(dir, &self.records, &self.spikes, &self.summary)
    }

    pub fn plant_states(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.x_plant.as_slice()).collect()
    }
}

fn digest(m: &DenseMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    for v in m.as_slice() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

fn push_step(windows: &mut Vec<Range<u64>>, step: u64) {
    match windows.last_mut() {
        Some(w) if w.end == step => w.end += 1,
        _ => windows.push(step..step + 1),
    }
}

/// Runs one closed-loop scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut plant = build_plant(cfg)?;
    let policy = build_policy(cfg, &plant)?;
    let node = CloudNode::new(policy.clone(), plant.clone());
    let mut link = match &cfg.link {
        LinkSpec::InProc => EdgeLink::inproc(node, steps),
        LinkSpec::Tcp(addr) => EdgeLink::tcp(addr, node, steps)?,
    };

    let (params, mut net) = init_network(cfg.seed, cfg.network_spec())?;
    let lcfg = cfg.learning_config();
    let mut gate = SupervisionGate::new();
    let substeps = lcfg.substeps_per_step;
    let dt_sub = cfg.dt / substeps as f64;
    let k = params.dims();
    let command = vec![0.0; k];

    let mut records = Vec::with_capacity(steps as usize);
    let mut measured_errors = Vec::with_capacity(steps as usize);
    let mut weight_digests = Vec::with_capacity(steps as usize);
    let mut rates = Vec::with_capacity(steps as usize);
    let mut windows = Vec::new();
    let mut clearance: Option<f64> = None;
    let mut track_clearance = |p: &[f64], t: f64| {
        if let Some(c) = min_clearance(&cfg.obstacles, p, t) {
            clearance = Some(clearance.map_or(c, |m| m.min(c)));
        }
    };

    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        let x = plant.state().to_vec();
        track_clearance(&x, t);
        // Also flags a collision of the plant with an obstacle.
        let u_expected = policy.cloud_step(&x, t)?;

        let mode_before = gate.mode_for(&lcfg, step);
        let supervised = gate.needs_supervision(&lcfg, step);
        let u_cloud = if supervised {
            Some(link.supervise(step, &x)?)
        } else {
            None
        };
        let u_hat0 = net.decode(&params);
        let error0: Option<Vec<f64>> = u_cloud
            .as_ref()
            .map(|u| u.iter().zip(&u_hat0).map(|(a, b)| a - b).collect());
        let decision = gate.step(&lcfg, step, error0.as_deref());
        debug_assert_eq!(decision.request_supervision, supervised);
        if mode_before == GateMode::Relearn || gate.mode == GateMode::Relearn {
            push_step(&mut windows, step);
        }

        let teacher = u_cloud.as_ref().filter(|_| decision.learn);
        if let (Some(_), Some(e)) = (teacher, &error0) {
            net.plasticity_update(&params, e)?;
        }
        let spikes_before = net.spike_log.len();
        let mut acc = vec![0.0; k];
        for sub in 0..substeps {
            let feedback: Option<Vec<f64>> = teacher.map(|u| {
                let u_hat = net.decode(&params);
                u.iter().zip(&u_hat).map(|(a, b)| a - b).collect()
            });
            net.substep(
                &params,
                &command,
                feedback.as_deref(),
                dt_sub,
                lcfg.max_spikes_per_substep,
                step,
                sub,
            )?;
            for (a, v) in acc.iter_mut().zip(net.decode(&params)) {
                *a += v;
            }
        }
        let u_hat: Vec<f64> = acc.iter().map(|a| a / substeps as f64).collect();
        let spikes = (net.spike_log.len() - spikes_before) as u64;
        let total = net.spike_log.len() as u64;

        let actuation = match &u_cloud {
            Some(u) if cfg.cloud_actuates_warmup && mode_before == GateMode::Warmup => u.clone(),
            _ => u_hat.clone(),
        };
        records.push(StepRecord {
            t,
            x_plant: x,
            x_cloud_ref: Vec::new(),
            u_cloud,
            u_expected,
            u_hat,
            spikes,
            energy_step: spike_energy(spikes),
            energy_cum: spike_energy(total),
            mode: gate.mode,
            supervised,
        });
        measured_errors.push(error0);
        weight_digests.push(digest(&net.slow));
        rates.push(net.rates.clone());
        plant.rk4_step(&actuation)?;
    }
    let final_state = plant.state().to_vec();
    track_clearance(&final_state, steps as f64 * cfg.dt);
    if let Some(c) = clearance.filter(|c| *c <= 0.0) {
        log::warn!("plant touched an obstacle (clearance {c})");
    }

    let (reference, link_stats) = link.finish()?;
    for (r, x_ref) in records.iter_mut().zip(reference) {
        r.x_cloud_ref = x_ref;
    }

    let total_spikes = net.spike_log.len() as u64;
    let n = params.neurons() as u64;
    let start = if (lcfg.warmup_steps as usize) < records.len() {
        lcfg.warmup_steps as usize
    } else {
        0
    };
    let (nte_states, nte_control) = if records.is_empty() {
        (0.0, 0.0)
    } else {
        let xr: Vec<&[f64]> = records.iter().map(|r| r.x_cloud_ref.as_slice()).collect();
        let xp: Vec<&[f64]> = records.iter().map(|r| r.x_plant.as_slice()).collect();
        let ue: Vec<&[f64]> = records.iter().map(|r| r.u_expected.as_slice()).collect();
        let uh: Vec<&[f64]> = records.iter().map(|r| r.u_hat.as_slice()).collect();
        let nte_or_zero = |r: Result<f64>| match r {
            Err(Error::DegenerateTarget) => Ok(0.0),
            other => other,
        };
        (
            nte_or_zero(normalized_tracking_error(&xr, &xp, start))?,
            nte_or_zero(normalized_tracking_error(&ue, &uh, start))?,
        )
    };
    let ue: Vec<&[f64]> = records.iter().map(|r| r.u_expected.as_slice()).collect();
    let uh: Vec<&[f64]> = records.iter().map(|r| r.u_hat.as_slice()).collect();
    let horizon = steps as f64 * cfg.dt;
    let spec = &params.spec;
    let cost = spiking_cost(&ue, &uh, &rates, spec.l1_cost, spec.l2_cost, cfg.dt, horizon);
    let effort: f64 = records.iter().map(|r| norm(&r.u_hat) * cfg.dt).sum();

    let spike_budget = n * steps * substeps as u64;
    let summary = RunSummary {
        scenario: cfg.scenario.name().to_owned(),
        seed: cfg.seed,
        neurons: params.neurons(),
        steps,
        substeps_per_step: substeps,
        total_spikes,
        total_energy_pj: spike_energy(total_spikes),
        spike_fraction: if spike_budget > 0 {
            total_spikes as f64 / spike_budget as f64
        } else {
            0.0
        },
        spike_budget,
        step_spike_budget: n * steps,
        nte_states,
        nte_control,
        supervision_messages: link_stats.controls,
        expected_supervision_messages: supervision_count(steps, &lcfg, &windows),
        state_reports: link_stats.states,
        payload_bytes: link_stats.payload_bytes,
        relearn_windows: windows.iter().map(|w| [w.start, w.end]).collect(),
        final_state_norm: norm(&final_state),
        final_position_norm: cfg
            .scenario
            .is_rendezvous()
            .then(|| norm(&final_state[..3])),
        min_obstacle_clearance: clearance,
        spiking_cost: cost,
        control_effort: effort,
    };
    log::info!(
        "{} seed {}: {} spikes, NTE(states) {:.4}, NTE(control) {:.4}, {} control messages",
        summary.scenario,
        summary.seed,
        summary.total_spikes,
        summary.nte_states,
        summary.nte_control,
        summary.supervision_messages
    );

    Ok(RunOutput {
        records,
        spikes: std::mem::take(&mut net.spike_log),
        summary,
        link_stats,
        relearn_windows: windows,
        measured_errors,
        weight_digests,
        gain: policy.gain().clone(),
        params,
        final_state,
    })
}

/// Network sizes and seeds to sweep over a base configuration.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub nte_control: f64,
    pub nte_states: f64,
    pub total_spikes: u64,
    #[serde(rename = "total_energy_pJ")]
    pub total_energy_pj: f64,
    pub supervision_messages: u64,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.n_values.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Validation(vec![
            "sweep needs at least one N value and one seed".into(),
        ]));
    }
    let mut rows = Vec::with_capacity(spec.n_values.len() * spec.seeds.len());
    for &n in &spec.n_values {
        for &seed in &spec.seeds {
            let mut cfg = spec.base.clone();
            cfg.network.neurons = n;
            cfg.seed = seed;
            let out = run_scenario(&cfg)?;
            let s = out.summary;
            rows.push(SweepRow {
                n,
                seed,
                nte_control: s.nte_control,
                nte_states: s.nte_states,
                total_spikes: s.total_spikes,
                total_energy_pj: s.total_energy_pj,
                supervision_messages: s.supervision_messages,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "N",
            "seed",
            "nte_control",
            "nte_states",
            "total_spikes",
            "total_energy_pJ",
            "supervision_messages",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioKind;

    fn short_workbench() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::Workbench);
        cfg.horizon = 2.0;
        cfg
    }

    #[test]
    fn push_step_extends_windows() {
        let mut w = Vec::new();
        for s in [3, 4, 5, 9, 10] {
            push_step(&mut w, s);
        }
        assert_eq!(w, vec![3..6, 9..11]);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn short_run_bookkeeping() {
        let out = run_scenario(&short_workbench()).unwrap();
        let s = &out.summary;
        assert_eq!(s.steps, 200);
        assert_eq!(out.records.len(), 200);
        assert_eq!(s.total_energy_pj, spike_energy(s.total_spikes));
        assert_eq!(s.total_spikes, out.spikes.len() as u64);
        assert_eq!(s.supervision_messages, s.expected_supervision_messages);
        assert_eq!(s.supervision_messages, out.records.iter().filter(|r| r.supervised).count() as u64);
        assert!(s.spike_fraction <= 1.0);
        assert_eq!(out.records[0].x_cloud_ref, vec![5.0, 2.0]);
        assert!(out.records.windows(2).all(|w| w[0].energy_cum <= w[1].energy_cum));
    }

    #[test]
    fn sweep_single_row() {
        let spec = SweepSpec {
            base: short_workbench(),
            n_values: vec![30],
            seeds: vec![0],
        };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("N,seed,nte_control,nte_states,total_spikes,total_energy_pJ,supervision_messages"));
    }
}
