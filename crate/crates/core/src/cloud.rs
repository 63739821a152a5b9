//! Cloud-side controller: LQR feedback, obstacle repulsion and the
//! reference model that produces the "expected" trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::link::LinkMessage;
use crate::plant::LtiPlant;

/// Spherical obstacle moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    /// Center at `t = 0`, m.
    pub center: [f64; 3],
    /// m/s; zero for a static obstacle.
    #[serde(default)]
    pub velocity: [f64; 3],
    /// m.
    pub radius: f64,
}

impl Obstacle {
    pub fn fixed(center: [f64; 3], radius: f64) -> Self {
        Self {
            center,
            velocity: [0.0; 3],
            radius,
        }
    }

    pub fn center_at(&self, t: f64) -> [f64; 3] {
        std::array::from_fn(|i| self.center[i] + self.velocity[i] * t)
    }

    /// Distance from `p` to the obstacle surface at time `t`; negative inside.
    pub fn surface_distance(&self, p: &[f64], t: f64) -> f64 {
        let c = self.center_at(t);
        let d2: f64 = (0..3).map(|i| (p[i] - c[i]).powi(2)).sum();
        d2.sqrt() - self.radius
    }
}

/// Potential-field repulsion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsionParams {
    /// `k_rep`.
    pub gain: f64,
    /// `d0`, m: no repulsion at or beyond this surface distance.
    pub influence_radius: f64,
    /// Per-axis bound on the repulsive acceleration, m/s² (N per unit mass).
    pub max_accel: f64,
}

impl Default for RepulsionParams {
    fn default() -> Self {
        Self {
            gain: 5.0,
            influence_radius: 8.0,
            max_accel: 1.0,
        }
    }
}

/// Khatib-style repulsive acceleration from one obstacle.
///
/// Inside the influence shell the magnitude is `k(1/d - 1/d0)/d²`, pointing
/// away from the obstacle center. If a component would exceed `max_accel`
/// the whole vector is scaled down, so the direction stays radial.
pub fn repulsive_accel(
    p: &[f64],
    obstacle: &Obstacle,
    t: f64,
    params: &RepulsionParams,
) -> Result<[f64; 3]> {
    if p.len() < 3 || p[..3].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(format!("position {p:?}")));
    }
    let c = obstacle.center_at(t);
    let offset: [f64; 3] = std::array::from_fn(|i| p[i] - c[i]);
    let dist = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = dist - obstacle.radius;
    if d <= 0.0 {
        return Err(Error::InsideObstacle { index: 0, time: t });
    }
    if d >= params.influence_radius {
        return Ok([0.0; 3]);
    }
    let magnitude = params.gain * (1.0 / d - 1.0 / params.influence_radius) / (d * d);
    let mut accel = offset.map(|v| magnitude * v / dist);
    let peak = accel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > params.max_accel {
        let s = params.max_accel / peak;
        accel.iter_mut().for_each(|v| *v *= s);
    }
    Ok(accel)
}

/// LQR gain plus the obstacles the cloud knows about.
#[derive(Debug, Clone)]
pub struct CloudPolicy {
    gain: DenseMatrix,
    obstacles: Vec<Obstacle>,
    repulsion: RepulsionParams,
}

impl CloudPolicy {
    pub fn new(
        gain: DenseMatrix,
        obstacles: Vec<Obstacle>,
        repulsion: RepulsionParams,
    ) -> Result<Self> {
        if !gain.is_finite() {
            return Err(Error::NonFiniteState("LQR gain".into()));
        }
        if !obstacles.is_empty() && (gain.rows() != 3 || gain.cols() < 3) {
            return Err(mismatch(format!(
                "obstacle repulsion needs three force channels and a position state, gain is {:?}",
                gain.shape()
            )));
        }
        Ok(Self {
            gain,
            obstacles,
            repulsion,
        })
    }

    pub fn lqr_only(gain: DenseMatrix) -> Result<Self> {
        Self::new(gain, Vec::new(), RepulsionParams::default())
    }

    pub fn gain(&self) -> &DenseMatrix {
        &self.gain
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn repulsion(&self) -> &RepulsionParams {
        &self.repulsion
    }

    /// `u = -Kx`.
    pub fn lqr_control(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gain.mul_vec(x)?.into_iter().map(|v| -v).collect())
    }

    /// LQR command plus the summed repulsion of every obstacle at time `t`.
    pub fn cloud_step(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut u = self.lqr_control(x)?;
        for (index, obstacle) in self.obstacles.iter().enumerate() {
            let a = repulsive_accel(x, obstacle, t, &self.repulsion).map_err(|e| match e {
                Error::InsideObstacle { time, .. } => Error::InsideObstacle { index, time },
                other => other,
            })?;
            for (ui, ai) in u.iter_mut().zip(a) {
                *ui += ai;
            }
        }
        Ok(u)
    }
}

/// The cloud endpoint of the link.
///
/// Answers supervision requests with `u = cloud_step(x_plant)` and keeps a
/// reference copy of the plant driven by the cloud policy in closed loop.
/// That reference is the trajectory the plant is expected to follow; it is
/// advanced lazily, up to the step of each request.
#[derive(Debug)]
pub struct CloudNode {
    policy: CloudPolicy,
    reference: LtiPlant,
    trajectory: Vec<Vec<f64>>,
    report: Option<(u64, Vec<f64>)>,
    last_request: Option<u64>,
}

impl CloudNode {
    pub fn new(policy: CloudPolicy, reference: LtiPlant) -> Self {
        let trajectory = vec![reference.state().to_vec()];
        Self {
            policy,
            reference,
            trajectory,
            report: None,
            last_request: None,
        }
    }

    pub fn policy(&self) -> &CloudPolicy {
        &self.policy
    }

    fn current_step(&self) -> u64 {
        self.trajectory.len() as u64 - 1
    }

    fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.reference.dt()
    }

    fn predict_to(&mut self, step: u64) -> Result<()> {
        while self.current_step() < step {
            let t = self.time_of(self.current_step());
            let u = self.policy.cloud_step(self.reference.state(), t)?;
            let next = self.reference.rk4_step(&u)?.to_vec();
            self.trajectory.push(next);
        }
        Ok(())
    }

    /// Processes one incoming message and returns the reply, if any.
    pub fn handle(&mut self, msg: LinkMessage) -> Result<Option<LinkMessage>> {
        match msg {
            LinkMessage::StateReport { step, x } => {
                if x.len() != self.reference.state_dim() {
                    return Err(Error::MalformedMessage(format!(
                        "state report of length {}, expected {}",
                        x.len(),
                        self.reference.state_dim()
                    )));
                }
                self.report = Some((step, x));
                Ok(None)
            }
            LinkMessage::SupervisionRequest { step } => {
                if self.last_request.is_some_and(|prev| step <= prev) {
                    return Err(Error::MalformedMessage(format!(
                        "request for step {step} after step {}",
                        self.last_request.unwrap_or_default()
                    )));
                }
                let x = match &self.report {
                    Some((s, x)) if *s == step => x.clone(),
                    _ => {
                        return Err(Error::MalformedMessage(format!(
                            "request for step {step} without a state report"
                        )))
                    }
                };
                self.last_request = Some(step);
                self.predict_to(step)?;
                let u = self.policy.cloud_step(&x, self.time_of(step))?;
                Ok(Some(LinkMessage::ControlSignal { step, u }))
            }
            LinkMessage::ControlSignal { step, .. } => Err(Error::MalformedMessage(format!(
                "cloud received a control signal (step {step})"
            ))),
        }
    }

    /// Completes the reference run and returns its state at the start of
    /// every step `0..total_steps`.
    pub fn finish(mut self, total_steps: u64) -> Result<Vec<Vec<f64>>> {
        self.predict_to(total_steps.saturating_sub(1))?;
        self.trajectory.truncate(total_steps as usize);
        Ok(self.trajectory)
    }
}

/// Smallest surface distance between `p` and any obstacle at time `t`.
pub fn min_clearance(obstacles: &[Obstacle], p: &[f64], t: f64) -> Option<f64> {
    obstacles
        .iter()
        .map(|o| o.surface_distance(p, t))
        .min_by(f64::total_cmp)
}

/// Cross product, used to check that repulsion is radial.
pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
