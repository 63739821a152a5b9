//! Energy accounting, tracking metrics and run output files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::snn::{GateMode, Spike};

/// Energy of one spike, pJ.
pub const ENERGY_PER_SPIKE_PJ: f64 = 23.6;

/// `23.6 × count` pJ, correctly rounded.
///
/// Computed as `236 × count / 10` so the result is the double nearest to
/// the exact decimal product (a plain `23.6 * count` can land one ulp off).
pub fn spike_energy(count: u64) -> f64 {
    (count as u128 * 236) as f64 / 10.0
}

/// `Σ‖target - actual‖ / Σ‖target‖` over samples `start..`.
pub fn normalized_tracking_error<T: AsRef<[f64]>, A: AsRef<[f64]>>(
    target: &[T],
    actual: &[A],
    start: usize,
) -> Result<f64> {
    if target.len() != actual.len() {
        return Err(mismatch(format!(
            "{} target samples vs {} actual",
            target.len(),
            actual.len()
        )));
    }
    if start >= target.len() {
        return Err(mismatch(format!(
            "start {start} beyond series of length {}",
            target.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, a) in target[start..].iter().zip(&actual[start..]) {
        let (t, a) = (t.as_ref(), a.as_ref());
        if t.len() != a.len() {
            return Err(mismatch("sample widths differ"));
        }
        num += t.iter().zip(a).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        den += t.iter().map(|p| p * p).sum::<f64>().sqrt();
    }
    if den == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    Ok(num / den)
}

/// Discretized spiking cost
/// `J = (1/t) Σ dt (‖x - x̂‖² + ν‖r‖₁ + μ‖r‖²)`.
pub fn spiking_cost<X, H, R>(x: &[X], x_hat: &[H], r: &[R], nu: f64, mu: f64, dt: f64, horizon: f64) -> f64
where
    X: AsRef<[f64]>,
    H: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    let total: f64 = x
        .iter()
        .zip(x_hat)
        .zip(r)
        .map(|((x, h), r)| {
            let err: f64 = x
                .as_ref()
                .iter()
                .zip(h.as_ref())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let l1: f64 = r.as_ref().iter().map(|v| v.abs()).sum();
            let l2: f64 = r.as_ref().iter().map(|v| v * v).sum();
            dt * (err + nu * l1 + mu * l2)
        })
        .sum();
    if horizon > 0.0 {
        total / horizon
    } else {
        0.0
    }
}

/// One row of `run.csv`, describing step `t / dt`.
///
/// States are sampled at the start of the step; `u_hat` is the command the
/// network applied over it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x_plant: Vec<f64>,
    pub x_cloud_ref: Vec<f64>,
    /// Control received from the cloud, on supervised steps only.
    pub u_cloud: Option<Vec<f64>>,
    /// Cloud policy evaluated at the plant state (not transmitted).
    pub u_expected: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub spikes: u64,
    pub energy_step: f64,
    pub energy_cum: f64,
    pub mode: GateMode,
    pub supervised: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub neurons: usize,
    pub steps: u64,
    pub substeps_per_step: u32,
    pub total_spikes: u64,
    #[serde(rename = "total_energy_pJ")]
    pub total_energy_pj: f64,
    /// `total_spikes / spike_budget`.
    pub spike_fraction: f64,
    /// `N × steps × substeps`.
    pub spike_budget: u64,
    /// `N × steps`, one potential spike per neuron and step.
    pub step_spike_budget: u64,
    pub nte_states: f64,
    pub nte_control: f64,
    /// Control signals received from the cloud.
    pub supervision_messages: u64,
    /// What the gate schedule predicts for the realized relearn windows.
    pub expected_supervision_messages: u64,
    pub state_reports: u64,
    pub payload_bytes: u64,
    /// Half-open `[start, end)` step ranges spent relearning.
    pub relearn_windows: Vec<[u64; 2]>,
    pub final_state_norm: f64,
    /// Norm of the position part of the final state (rendezvous only).
    pub final_position_norm: Option<f64>,
    /// Smallest plant-to-obstacle surface distance, when obstacles exist.
    pub min_obstacle_clearance: Option<f64>,
    pub spiking_cost: f64,
    /// `Σ ‖û‖ dt`.
    pub control_effort: f64,
}

impl RunSummary {
    pub fn empty(scenario: &str, seed: u64, neurons: usize, substeps: u32) -> Self {
        Self {
            scenario: scenario.to_owned(),
            seed,
            neurons,
            steps: 0,
            substeps_per_step: substeps,
            total_spikes: 0,
            total_energy_pj: 0.0,
            spike_fraction: 0.0,
            spike_budget: 0,
            step_spike_budget: 0,
            nte_states: 0.0,
            nte_control: 0.0,
            supervision_messages: 0,
            expected_supervision_messages: 0,
            state_reports: 0,
            payload_bytes: 0,
            relearn_windows: Vec::new(),
            final_state_norm: 0.0,
            final_position_norm: None,
            min_obstacle_clearance: None,
            spiking_cost: 0.0,
            control_effort: 0.0,
        }
    }
}

fn width_of(records: &[StepRecord], f: impl Fn(&StepRecord) -> usize) -> usize {
    records.first().map(f).unwrap_or(0)
}

fn run_header(nx: usize, nu: usize) -> Vec<String> {
    let mut h = vec!["t".to_owned()];
    let mut push = |prefix: &str, n: usize| h.extend((0..n).map(|i| format!("{prefix}_{i}")));
    push("x_plant", nx);
    push("x_cloud_ref", nx);
    push("u_cloud", nu);
    push("u_expected", nu);
    push("u_hat", nu);
    h.extend(
        ["spikes", "energy_step", "energy_cum", "mode", "supervised"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn fmt(v: f64) -> String {
    // Display prints the shortest string that parses back to `v`.
    format!("{v}")
}

/// Writes `run.csv`, `spikes.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, records: &[StepRecord], spikes: &[Spike], summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let nx = width_of(records, |r| r.x_plant.len());
    let nu = width_of(records, |r| r.u_hat.len());

    let mut w = csv::Writer::from_path(dir.join("run.csv"))?;
    w.write_record(run_header(nx, nu))?;
    for r in records {
        let mut row = vec![fmt(r.t)];
        row.extend(r.x_plant.iter().map(|v| fmt(*v)));
        row.extend(r.x_cloud_ref.iter().map(|v| fmt(*v)));
        match &r.u_cloud {
            Some(u) => row.extend(u.iter().map(|v| fmt(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), nu)),
        }
        row.extend(r.u_expected.iter().map(|v| fmt(*v)));
        row.extend(r.u_hat.iter().map(|v| fmt(*v)));
        row.push(r.spikes.to_string());
        row.push(fmt(r.energy_step));
        row.push(fmt(r.energy_cum));
        row.push(r.mode.as_str().to_owned());
        row.push(r.supervised.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("spikes.csv"))?;
    w.write_record(["step", "substep", "neuron"])?;
    for s in spikes {
        w.serialize((s.step, s.substep, s.neuron))?;
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(summary)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

fn parse_mode(s: &str) -> Result<GateMode> {
    match s {
        "warmup" => Ok(GateMode::Warmup),
        "autonomous" => Ok(GateMode::Autonomous),
        "relearn" => Ok(GateMode::Relearn),
        other => Err(Error::Parse(format!("unknown mode {other:?}"))),
    }
}

/// Reads a `run.csv` written by [`write_run`].
pub fn read_run_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let nx = count("x_plant_");
    let nu = count("u_hat_");
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
    };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f: Vec<&str> = row.iter().collect();
        let vec_at = |start: usize, n: usize| -> Result<Vec<f64>> {
            f[start..start + n].iter().map(|s| num(s)).collect()
        };
        let mut i = 1;
        let x_plant = vec_at(i, nx)?;
        i += nx;
        let x_cloud_ref = vec_at(i, nx)?;
        i += nx;
        let u_cloud = if f[i].is_empty() {
            None
        } else {
            Some(vec_at(i, nu)?)
        };
        i += nu;
        let u_expected = vec_at(i, nu)?;
        i += nu;
        let u_hat = vec_at(i, nu)?;
        i += nu;
        out.push(StepRecord {
            t: num(f[0])?,
            x_plant,
            x_cloud_ref,
            u_cloud,
            u_expected,
            u_hat,
            spikes: f[i]
                .parse()
                .map_err(|e| Error::Parse(format!("bad spike count: {e}")))?,
            energy_step: num(f[i + 1])?,
            energy_cum: num(f[i + 2])?,
            mode: parse_mode(f[i + 3])?,
            supervised: f[i + 4] == "true",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_examples() {
        assert_eq!(spike_energy(0), 0.0);
        assert_eq!(spike_energy(1444), 34078.4);
        assert_eq!(spike_energy(3434), 81042.4);
        assert_eq!(spike_energy(4704), 111014.4);
        assert_eq!(spike_energy(1), ENERGY_PER_SPIKE_PJ);
    }

    #[test]
    fn nte_examples() {
        let t = [[2.0], [2.0]];
        assert_eq!(normalized_tracking_error(&t, &[[1.0], [3.0]], 0).unwrap(), 0.5);
        assert_eq!(normalized_tracking_error(&t, &t, 0).unwrap(), 0.0);
        assert_eq!(normalized_tracking_error(&t, &[[0.0], [0.0]], 1).unwrap(), 1.0);
        assert!(matches!(
            normalized_tracking_error(&[[0.0]], &[[1.0]], 0),
            Err(Error::DegenerateTarget)
        ));
        assert!(normalized_tracking_error(&t, &t, 2).is_err());
    }

    #[test]
    fn spiking_cost_examples() {
        let one = spiking_cost(&[[1.0]], &[[0.0]], &[[2.0]], 1.0, 1.0, 0.5, 0.5);
        assert_eq!(one, 7.0);
        let x = [[1.0, 2.0], [0.0, 1.0]];
        assert_eq!(spiking_cost(&x, &x, &[[0.0; 3]; 2], 0.3, 0.2, 0.1, 0.2), 0.0);
        let mse = spiking_cost(&[[1.0], [3.0]], &[[0.0], [0.0]], &[[5.0], [5.0]], 0.0, 0.0, 1.0, 2.0);
        assert_eq!(mse, 5.0);
    }

    fn record(t: f64, supervised: bool) -> StepRecord {
        StepRecord {
            t,
            x_plant: vec![0.1 + 0.2, -1.0 / 3.0],
            x_cloud_ref: vec![1e-17, 5.0],
            u_cloud: supervised.then(|| vec![-3.6071]),
            u_expected: vec![-3.607_100_000_000_001],
            u_hat: vec![f64::MIN_POSITIVE],
            spikes: 3,
            energy_step: spike_energy(3),
            energy_cum: spike_energy(10),
            mode: if supervised { GateMode::Warmup } else { GateMode::Autonomous },
            supervised,
        }
    }

    #[test]
    fn run_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![record(0.0, true), record(0.01, false)];
        let spikes = vec![Spike {
            step: 0,
            substep: 2,
            neuron: 4,
        }];
        let summary = RunSummary::empty("workbench", 1, 30, 10);
        write_run(dir.path(), &records, &spikes, &summary).unwrap();
        assert_eq!(read_run_csv(&dir.path().join("run.csv")).unwrap(), records);
        let spikes_csv = fs::read_to_string(dir.path().join("spikes.csv")).unwrap();
        assert_eq!(spikes_csv, "step,substep,neuron\n0,2,4\n");
        let back: RunSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(back, summary);
    }

    #[test]
    fn empty_run_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let summary = RunSummary::empty("workbench", 0, 5, 1);
        write_run(dir.path(), &[], &[], &summary).unwrap();
        let run = fs::read_to_string(dir.path().join("run.csv")).unwrap();
        assert_eq!(run.lines().count(), 1);
        let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(json.contains("\"total_energy_pJ\": 0.0"));
    }
}
