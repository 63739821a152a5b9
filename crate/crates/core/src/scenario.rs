//! Scenario configuration: built-in defaults per scenario and JSON loading.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cloud::{Obstacle, RepulsionParams};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::plant::{CwParams, RENDEZVOUS_R0, RENDEZVOUS_V0, WORKBENCH_X0};
use crate::snn::{LearningConfig, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Workbench,
    Rendezvous,
    RendezvousStaticObstacle,
    RendezvousDynamicObstacle,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Workbench,
        ScenarioKind::Rendezvous,
        ScenarioKind::RendezvousStaticObstacle,
        ScenarioKind::RendezvousDynamicObstacle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Workbench => "workbench",
            ScenarioKind::Rendezvous => "rendezvous",
            ScenarioKind::RendezvousStaticObstacle => "rendezvous_static_obstacle",
            ScenarioKind::RendezvousDynamicObstacle => "rendezvous_dynamic_obstacle",
        }
    }

    pub fn is_rendezvous(self) -> bool {
        self != ScenarioKind::Workbench
    }

    pub fn state_dim(self) -> usize {
        if self.is_rendezvous() {
            6
        } else {
            2
        }
    }

    pub fn input_dim(self) -> usize {
        if self.is_rendezvous() {
            3
        } else {
            1
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the cloud endpoint lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LinkSpec {
    InProc,
    /// `HOST:PORT` to bind the loopback cloud server on.
    Tcp(String),
}

impl FromStr for LinkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inproc" {
            return Ok(LinkSpec::InProc);
        }
        match s.strip_prefix("tcp://") {
            Some(addr) if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) => {
                Ok(LinkSpec::Tcp(addr.to_owned()))
            }
            _ => Err(Error::Validation(vec![format!(
                "link must be \"inproc\" or \"tcp://HOST:PORT\", got {s:?}"
            )])),
        }
    }
}

impl TryFrom<String> for LinkSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LinkSpec> for String {
    fn from(l: LinkSpec) -> String {
        l.to_string()
    }
}

impl fmt::Display for LinkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkSpec::InProc => f.write_str("inproc"),
            LinkSpec::Tcp(addr) => write!(f, "tcp://{addr}"),
        }
    }
}

/// Network constants as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(rename = "N")]
    pub neurons: usize,
    #[serde(rename = "P")]
    pub basis: usize,
    pub decoder_variance: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub k_fb: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningFile {
    pub e_th: Vec<f64>,
    pub warmup_steps: u64,
    pub check_interval: u64,
    pub substeps_per_step: u32,
    pub max_spikes_per_substep: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// s.
    pub horizon: f64,
    /// s.
    pub dt: f64,
    pub x0: Vec<f64>,
    /// LQR state weight, row-major rows.
    pub q: Vec<Vec<f64>>,
    /// LQR input weight, row-major rows.
    pub r: Vec<Vec<f64>>,
    pub network: NetworkConfig,
    pub learning: LearningFile,
    /// Target orbit; only used by the rendezvous scenarios.
    pub orbit: CwParams,
    pub obstacles: Vec<Obstacle>,
    pub repulsion: RepulsionParams,
    /// Let the cloud command actuate the plant during warmup.
    pub cloud_actuates_warmup: bool,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub link: LinkSpec,
}

fn scaled_identity(n: usize, s: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect())
        .collect()
}

pub fn static_obstacle() -> Obstacle {
    Obstacle::fixed([26.0, 8.7, -1.5], 3.0)
}

pub fn dynamic_obstacle() -> Obstacle {
    Obstacle {
        center: [10.0, 2.0, -1.5],
        velocity: [0.5, 0.2, 0.0],
        radius: 3.0,
    }
}

impl ScenarioConfig {
    /// Built-in defaults for `kind`.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let learning = |e_th: Vec<f64>, substeps| LearningFile {
            e_th,
            warmup_steps: 50,
            check_interval: 50,
            substeps_per_step: substeps,
            max_spikes_per_substep: 1,
        };
        let base = |horizon, dt, x0, q, r, network, learning| ScenarioConfig {
            scenario: kind,
            horizon,
            dt,
            x0,
            q,
            r,
            network,
            learning,
            orbit: CwParams::default(),
            obstacles: Vec::new(),
            repulsion: RepulsionParams::default(),
            cloud_actuates_warmup: false,
            seed: 0,
            output_dir: None,
            link: LinkSpec::InProc,
        };
        if kind == ScenarioKind::Workbench {
            return base(
                10.0,
                0.01,
                WORKBENCH_X0.to_vec(),
                scaled_identity(2, 1.0),
                scaled_identity(1, 1.0),
                NetworkConfig {
                    neurons: 30,
                    basis: 100,
                    decoder_variance: 10.0,
                    lambda: 1e-3,
                    mu: 1e-3,
                    nu: 1e-3,
                    k_fb: 500.0,
                    eta: 1e-3,
                },
                learning(vec![0.1], 10),
            );
        }
        let mut cfg = base(
            360.0,
            0.1,
            RENDEZVOUS_R0.iter().chain(&RENDEZVOUS_V0).copied().collect(),
            scaled_identity(6, 1e-6),
            scaled_identity(3, 1.0),
            NetworkConfig {
                neurons: 50,
                basis: 100,
                decoder_variance: 1e-3,
                lambda: 1e-4,
                mu: 1e-4,
                nu: 1e-4,
                k_fb: 250.0,
                eta: 1e-3,
            },
            learning(vec![1e-4; 3], 50),
        );
        match kind {
            ScenarioKind::RendezvousStaticObstacle => cfg.obstacles.push(static_obstacle()),
            ScenarioKind::RendezvousDynamicObstacle => cfg.obstacles.push(dynamic_obstacle()),
            _ => {}
        }
        cfg
    }

    /// Number of plant steps, `horizon / dt`.
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let n = &self.network;
        NetworkSpec {
            neurons: n.neurons,
            dims: self.scenario.input_dim(),
            basis: n.basis,
            decoder_variance: n.decoder_variance,
            leak: n.lambda,
            l2_cost: n.mu,
            l1_cost: n.nu,
            feedback_gain: n.k_fb,
            learning_rate: n.eta,
        }
    }

    pub fn learning_config(&self) -> LearningConfig {
        let l = &self.learning;
        LearningConfig {
            error_threshold: l.e_th.clone(),
            warmup_steps: l.warmup_steps,
            check_interval: l.check_interval,
            substeps_per_step: l.substeps_per_step,
            max_spikes_per_substep: l.max_spikes_per_substep,
        }
    }

    pub fn q_matrix(&self) -> Result<DenseMatrix> {
        DenseMatrix::from_rows(&self.q)
    }

    pub fn r_matrix(&self) -> Result<DenseMatrix> {
        DenseMatrix::from_rows(&self.r)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let (nx, nu) = (self.scenario.state_dim(), self.scenario.input_dim());
        check(self.dt > 0.0 && self.dt.is_finite(), format!("dt must be positive, got {}", self.dt));
        check(
            self.horizon > 0.0 && self.horizon.is_finite(),
            format!("horizon must be positive, got {}", self.horizon),
        );
        if self.dt > 0.0 && self.horizon > 0.0 {
            let ratio = self.horizon / self.dt;
            check(
                (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0,
                format!("horizon/dt = {ratio} is not a positive integer"),
            );
        }
        check(
            self.x0.len() == nx && self.x0.iter().all(|v| v.is_finite()),
            format!("x0 must hold {nx} finite values"),
        );
        let square = |m: &[Vec<f64>], n: usize| m.len() == n && m.iter().all(|r| r.len() == n && r.iter().all(|v| v.is_finite()));
        check(square(&self.q, nx), format!("q must be {nx}x{nx}"));
        check(square(&self.r, nu), format!("r must be {nu}x{nu}"));
        let n = &self.network;
        check(n.neurons >= 1, "network.N must be at least 1".into());
        check(n.basis >= 1, "network.P must be at least 1".into());
        check(
            n.decoder_variance > 0.0 && n.decoder_variance.is_finite(),
            "network.decoder_variance must be positive".into(),
        );
        for (name, v) in [("lambda", n.lambda), ("mu", n.mu), ("nu", n.nu), ("k_fb", n.k_fb), ("eta", n.eta)] {
            check(v >= 0.0 && v.is_finite(), format!("network.{name} must be non-negative, got {v}"));
        }
        let l = &self.learning;
        check(
            l.e_th.len() == nu && l.e_th.iter().all(|v| *v > 0.0 && v.is_finite()),
            format!("learning.e_th must hold {nu} positive values"),
        );
        check(l.check_interval >= 1, "learning.check_interval must be at least 1".into());
        check(l.substeps_per_step >= 1, "learning.substeps_per_step must be at least 1".into());
        check(
            l.max_spikes_per_substep >= 1,
            "learning.max_spikes_per_substep must be at least 1".into(),
        );
        if self.dt > 0.0 && l.substeps_per_step >= 1 {
            let dt_sub = self.dt / l.substeps_per_step as f64;
            check(
                n.lambda * dt_sub < 1.0,
                format!("lambda * dt_sub = {} must be below 1", n.lambda * dt_sub),
            );
        }
        if self.scenario.is_rendezvous() {
            if let Err(Error::Validation(v)) = self.orbit.validate() {
                errs.extend(v);
            }
        } else if !self.obstacles.is_empty() {
            errs.push("obstacles need a rendezvous scenario".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let finite = o.center.iter().chain(&o.velocity).all(|v| v.is_finite());
            if !(o.radius >= 0.0 && finite) {
                errs.push(format!("obstacle {i} needs finite center/velocity and radius >= 0"));
            }
        }
        let rep = &self.repulsion;
        if !(rep.gain >= 0.0 && rep.influence_radius > 0.0 && rep.max_accel > 0.0) {
            errs.push("repulsion needs gain >= 0, influence_radius > 0, max_accel > 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses a JSON config; fields left out take the named scenario's defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let user: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let kind_value = user
        .get("scenario")
        .cloned()
        .ok_or_else(|| Error::Parse("missing field `scenario`".into()))?;
    let kind: ScenarioKind = serde_json::from_value(kind_value)
        .map_err(|e| Error::Parse(format!("field `scenario`: {e}")))?;
    let mut merged = serde_json::to_value(ScenarioConfig::defaults(kind))?;
    merge(&mut merged, user);
    let cfg: ScenarioConfig =
        serde_json::from_value(merged).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workbench_defaults() {
        let cfg = parse_config(r#"{"scenario":"workbench"}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::defaults(ScenarioKind::Workbench));
        assert_eq!(cfg.x0, vec![5.0, 2.0]);
        assert_eq!(cfg.network.neurons, 30);
        assert_eq!(cfg.network.k_fb, 500.0);
        assert_eq!(cfg.network.eta, 0.001);
        assert_eq!(cfg.network.lambda, 0.001);
        assert_eq!(cfg.learning.e_th, vec![0.1]);
        assert_eq!(cfg.horizon, 10.0);
        assert_eq!(cfg.steps(), 1000);
    }

    #[test]
    fn rendezvous_defaults() {
        let cfg = parse_config(r#"{"scenario":"rendezvous"}"#).unwrap();
        assert_eq!(cfg.network.k_fb, 250.0);
        assert_eq!(cfg.learning.e_th, vec![1e-4; 3]);
        assert_eq!(cfg.network.neurons, 50);
        assert_eq!(cfg.network.decoder_variance, 0.001);
        assert_eq!(cfg.dt, 0.1);
        assert_eq!(cfg.steps(), 3600);
        assert_eq!(cfg.q[0][0], 1e-6);
        assert!(cfg.obstacles.is_empty());
        let s = parse_config(r#"{"scenario":"rendezvous_static_obstacle"}"#).unwrap();
        assert_eq!(s.obstacles.len(), 1);
        assert_eq!(s.obstacles[0].velocity, [0.0; 3]);
    }

    #[test]
    fn partial_overrides_merge() {
        let cfg = parse_config(
            r#"{"scenario":"workbench","seed":9,"network":{"N":5},"learning":{"substeps_per_step":1},"link":"tcp://127.0.0.1:0"}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.network.neurons, 5);
        assert_eq!(cfg.network.k_fb, 500.0);
        assert_eq!(cfg.learning.substeps_per_step, 1);
        assert_eq!(cfg.learning.warmup_steps, 50);
        assert_eq!(cfg.link, LinkSpec::Tcp("127.0.0.1:0".into()));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            parse_config(r#"{"scenario":"workbench","dt":0}"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_config(r#"{"scenario":"workbench","dt":0.03}"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(parse_config(r#"{"scenario":"mars"}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_config("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_config(r#"{"scenario":"workbench","bogus":1}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            parse_config(r#"{"scenario":"workbench","link":"udp://x"}"#),
            Err(Error::Parse(_))
        ));
        match parse_config(r#"{"scenario":"workbench","dt":-1,"learning":{"e_th":[0.1,0.1]}}"#) {
            Err(Error::Validation(v)) => assert!(v.len() >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn link_spec_parsing() {
        assert_eq!("inproc".parse::<LinkSpec>().unwrap(), LinkSpec::InProc);
        assert_eq!(
            "tcp://localhost:7000".parse::<LinkSpec>().unwrap().to_string(),
            "tcp://localhost:7000"
        );
        assert!("tcp://localhost".parse::<LinkSpec>().is_err());
    }

    #[test]
    fn defaults_validate() {
        for kind in ScenarioKind::ALL {
            ScenarioConfig::defaults(kind).validate().unwrap();
        }
    }
}
