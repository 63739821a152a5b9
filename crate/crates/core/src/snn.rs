//! Edge controller: an efficient balanced network of leaky integrate-and-fire
//! neurons that learns to reproduce the cloud's control signal.
//!
//! The membrane update is
//!
//! ```text
//! σ̇ = -λσ + Fc - Ω_f s + Ω_s ψ(r) + k Dᵀe,     ṙ = -λr + s
//! ```
//!
//! with `F = Dᵀ`, fast weights `Ω_f = DᵀD + μI`, thresholds
//! `T_i = (|D_i|² + ν + μ)/2` and dendritic features
//! `ψ_j(r) = tanh(M_jᵀ r + θ_j)`. The slow weights follow the local rule
//! `ΔΩ_s = η (Dᵀe) ψ(r)ᵀ`, stored `N × P` so that `Ω_s ψ(r)` drives the
//! membranes directly.
//!
//! Time is discretized with forward Euler inside each substep; spikes are
//! instantaneous events and at most `max_spikes_per_substep` neurons fire
//! per substep (greatest threshold excess first, ties to the lowest index).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::linalg::DenseMatrix;

/// Sizes and constants used to build a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub neurons: usize,
    /// Decoded dimension, equal to the plant's input dimension.
    pub dims: usize,
    /// Number of dendritic basis functions.
    pub basis: usize,
    pub decoder_variance: f64,
    /// λ, 1/s.
    pub leak: f64,
    /// μ.
    pub l2_cost: f64,
    /// ν.
    pub l1_cost: f64,
    /// k.
    pub feedback_gain: f64,
    /// η.
    pub learning_rate: f64,
}

/// Fixed network parameters; immutable once initialized.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    /// `D`, dims × neurons.
    pub decoder: DenseMatrix,
    /// `F = Dᵀ`, neurons × dims.
    pub encoder: DenseMatrix,
    /// `Ω_f = DᵀD + μI`.
    pub fast: DenseMatrix,
    /// `M`, neurons × basis.
    pub dendritic: DenseMatrix,
    /// `θ`, one offset per basis function.
    pub offsets: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl NetworkParams {
    /// Assembles parameters from an explicit decoder and dendritic weights.
    pub fn from_parts(
        spec: NetworkSpec,
        decoder: DenseMatrix,
        dendritic: DenseMatrix,
        offsets: Vec<f64>,
    ) -> Result<Self> {
        if decoder.shape() != (spec.dims, spec.neurons) {
            return Err(mismatch(format!(
                "decoder is {:?}, expected ({}, {})",
                decoder.shape(),
                spec.dims,
                spec.neurons
            )));
        }
        if dendritic.shape() != (spec.neurons, spec.basis) || offsets.len() != spec.basis {
            return Err(mismatch(format!(
                "dendritic matrix {:?} with {} offsets, expected ({}, {})",
                dendritic.shape(),
                offsets.len(),
                spec.neurons,
                spec.basis
            )));
        }
        let encoder = decoder.transpose();
        let fast = fast_weights(&decoder, spec.l2_cost);
        let thresholds = compute_thresholds(&decoder, spec.l2_cost, spec.l1_cost);
        if spec.neurons <= 2 * spec.dims {
            log::warn!(
                "N = {} does not exceed 2K = {}; the network loses its robustness margin",
                spec.neurons,
                2 * spec.dims
            );
        }
        Ok(Self {
            spec,
            decoder,
            encoder,
            fast,
            dendritic,
            offsets,
            thresholds,
        })
    }

    pub fn neurons(&self) -> usize {
        self.spec.neurons
    }

    pub fn dims(&self) -> usize {
        self.spec.dims
    }

    pub fn basis(&self) -> usize {
        self.spec.basis
    }

    /// `N > 2K`, the redundancy condition for noise-robust coding.
    pub fn has_redundancy(&self) -> bool {
        self.spec.neurons > 2 * self.spec.dims
    }
}

/// `DᵀD + μI`.
pub fn fast_weights(decoder: &DenseMatrix, mu: f64) -> DenseMatrix {
    let mut fast = &decoder.transpose() * decoder;
    for i in 0..fast.rows() {
        fast[(i, i)] += mu;
    }
    fast
}

/// `T_i = (D_iᵀD_i + ν + μ) / 2` for every column `D_i` of the decoder.
pub fn compute_thresholds(decoder: &DenseMatrix, mu: f64, nu: f64) -> Vec<f64> {
    (0..decoder.cols())
        .map(|i| {
            let sq: f64 = decoder.column(i).iter().map(|d| d * d).sum();
            (sq + nu + mu) / 2.0
        })
        .collect()
}

/// `ψ_j = tanh(M_jᵀ r + θ_j)` where `M_j` is column `j` of `M`.
pub fn dendritic_basis(dendritic: &DenseMatrix, offsets: &[f64], rates: &[f64]) -> Vec<f64> {
    let mut pre = dendritic
        .tr_mul_vec(rates)
        .expect("rate vector sized to the network");
    for (p, t) in pre.iter_mut().zip(offsets) {
        *p = (*p + t).tanh();
    }
    pre
}

/// A single spike event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spike {
    pub step: u64,
    pub substep: u32,
    pub neuron: u32,
}

/// Mutable network state owned by the edge loop.
#[derive(Debug, Clone)]
pub struct NetworkState {
    /// Membrane potentials `σ`.
    pub sigma: Vec<f64>,
    /// Filtered spike trains `r`.
    pub rates: Vec<f64>,
    /// Learned slow weights `Ω_s`, neurons × basis.
    pub slow: DenseMatrix,
    pub spike_log: Vec<Spike>,
}

impl NetworkState {
    pub fn new(params: &NetworkParams) -> Self {
        Self {
            sigma: vec![0.0; params.neurons()],
            rates: vec![0.0; params.neurons()],
            slow: DenseMatrix::zeros(params.neurons(), params.basis()),
            spike_log: Vec::new(),
        }
    }

    /// Decoded output `û = D r`.
    pub fn decode(&self, params: &NetworkParams) -> Vec<f64> {
        params
            .decoder
            .mul_vec(&self.rates)
            .expect("rates sized to the network")
    }

    pub fn dendritic_basis(&self, params: &NetworkParams) -> Vec<f64> {
        dendritic_basis(&params.dendritic, &params.offsets, &self.rates)
    }

    /// Advances the network by one substep and returns the neurons that fired.
    ///
    /// `error` is the supervision error `u - û`; pass `None` when the cloud
    /// signal is unavailable, which also removes the feedback term.
    #[allow(clippy::too_many_arguments)]
    pub fn substep(
        &mut self,
        params: &NetworkParams,
        command: &[f64],
        error: Option<&[f64]>,
        dt_sub: f64,
        max_spikes: u32,
        step: u64,
        substep: u32,
    ) -> Result<Vec<usize>> {
        if !(dt_sub > 0.0) {
            return Err(Error::InvalidDimension(format!("dt_sub must be positive, got {dt_sub}")));
        }
        let k = params.dims();
        if command.len() != k || error.is_some_and(|e| e.len() != k) {
            return Err(mismatch(format!(
                "command/error must have length {k}, got {} and {:?}",
                command.len(),
                error.map(<[f64]>::len)
            )));
        }
        let spec = &params.spec;

        let mut drive = params.decoder.tr_mul_vec(command)?;
        if let Some(e) = error {
            let fb = params.decoder.tr_mul_vec(e)?;
            for (d, f) in drive.iter_mut().zip(fb) {
                *d += spec.feedback_gain * f;
            }
        }
        if self.slow.max_abs() > 0.0 {
            let psi = self.dendritic_basis(params);
            let slow = self.slow.mul_vec(&psi)?;
            for (d, s) in drive.iter_mut().zip(slow) {
                *d += s;
            }
        }
        for (s, d) in self.sigma.iter_mut().zip(&drive) {
            *s += dt_sub * (-spec.leak * *s + d);
        }

        let mut fired = Vec::new();
        for _ in 0..max_spikes {
            let mut best = 0;
            let mut excess = f64::NEG_INFINITY;
            for (i, (s, t)) in self.sigma.iter().zip(&params.thresholds).enumerate() {
                if s - t > excess {
                    excess = s - t;
                    best = i;
                }
            }
            if !(excess > 0.0) {
                break;
            }
            for (s, w) in self.sigma.iter_mut().zip(params.fast.row(best)) {
                *s -= w;
            }
            self.rates[best] += 1.0;
            self.spike_log.push(Spike {
                step,
                substep,
                neuron: best as u32,
            });
            fired.push(best);
        }

        let decay = 1.0 - spec.leak * dt_sub;
        self.rates.iter_mut().for_each(|r| *r *= decay);

        if self.sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteState(format!(
                "membrane potential at step {step}, substep {substep}"
            )));
        }
        Ok(fired)
    }

    /// Local plasticity: `Ω_s[i][j] += η (Dᵀe)_i ψ_j(r)`.
    pub fn plasticity_update(&mut self, params: &NetworkParams, error: &[f64]) -> Result<()> {
        if error.len() != params.dims() {
            return Err(mismatch(format!(
                "error of length {}, expected {}",
                error.len(),
                params.dims()
            )));
        }
        let eta = params.spec.learning_rate;
        if eta == 0.0 || error.iter().all(|e| *e == 0.0) {
            return Ok(());
        }
        let projected = params.decoder.tr_mul_vec(error)?;
        let psi = self.dendritic_basis(params);
        for (i, p) in projected.iter().enumerate() {
            let scale = eta * p;
            for (w, q) in self.slow.row_mut(i).iter_mut().zip(&psi) {
                *w += scale * q;
            }
        }
        Ok(())
    }
}

/// Draws a network from a seeded generator.
///
/// `D ~ N(0, decoder_variance)`, `M ~ N(0, 1/N)`, `θ ~ N(0, 1)`; slow
/// weights, potentials and rates start at zero.
pub fn init_network(seed: u64, spec: NetworkSpec) -> Result<(NetworkParams, NetworkState)> {
    if spec.neurons == 0 || spec.dims == 0 || spec.basis == 0 {
        return Err(Error::InvalidDimension(format!(
            "N = {}, K = {}, P = {} must all be at least 1",
            spec.neurons, spec.dims, spec.basis
        )));
    }
    if !(spec.decoder_variance > 0.0) {
        return Err(Error::InvalidDimension(format!(
            "decoder variance must be positive, got {}",
            spec.decoder_variance
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize, var: f64| -> Vec<f64> {
        let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
        (0..count).map(|_| normal.sample(&mut rng)).collect()
    };
    let (n, k, p) = (spec.neurons, spec.dims, spec.basis);
    let decoder = DenseMatrix::new(k, n, draw(k * n, spec.decoder_variance))?;
    let dendritic = DenseMatrix::new(n, p, draw(n * p, 1.0 / n as f64))?;
    let offsets = draw(p, 1.0);
    let params = NetworkParams::from_parts(spec, decoder, dendritic, offsets)?;
    let state = NetworkState::new(&params);
    Ok((params, state))
}

/// Learning schedule of the supervision gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    /// Per-channel error threshold `e_th`.
    pub error_threshold: Vec<f64>,
    pub warmup_steps: u64,
    pub check_interval: u64,
    pub substeps_per_step: u32,
    pub max_spikes_per_substep: u32,
}

impl LearningConfig {
    pub fn with_threshold(error_threshold: Vec<f64>) -> Self {
        Self {
            error_threshold,
            warmup_steps: 50,
            check_interval: 50,
            substeps_per_step: 1,
            max_spikes_per_substep: 1,
        }
    }

    pub fn is_check_step(&self, step: u64) -> bool {
        step >= self.warmup_steps && step.is_multiple_of(self.check_interval)
    }

    pub fn exceeds_threshold(&self, error: &[f64]) -> bool {
        error
            .iter()
            .zip(&self.error_threshold)
            .any(|(e, th)| e.abs() > *th)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Warmup,
    Autonomous,
    Relearn,
}

impl GateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GateMode::Warmup => "warmup",
            GateMode::Autonomous => "autonomous",
            GateMode::Relearn => "relearn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    pub learn: bool,
    pub request_supervision: bool,
}

/// Threshold-gated supervision schedule.
///
/// Supervised learning runs every step during warmup. Afterwards the edge
/// only asks the cloud on check steps; a check whose error exceeds the
/// threshold switches to relearning, which stays supervised every step
/// until the error is back under the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervisionGate {
    pub mode: GateMode,
    pub steps_in_mode: u64,
}

impl Default for SupervisionGate {
    fn default() -> Self {
        Self {
            mode: GateMode::Warmup,
            steps_in_mode: 0,
        }
    }
}

impl SupervisionGate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mode the gate is in when `step` begins.
    pub fn mode_for(&self, cfg: &LearningConfig, step: u64) -> GateMode {
        if step < cfg.warmup_steps {
            GateMode::Warmup
        } else if self.mode == GateMode::Warmup {
            GateMode::Autonomous
        } else {
            self.mode
        }
    }

    /// Whether the edge should contact the cloud at `step`.
    pub fn needs_supervision(&self, cfg: &LearningConfig, step: u64) -> bool {
        match self.mode_for(cfg, step) {
            GateMode::Warmup | GateMode::Relearn => true,
            GateMode::Autonomous => cfg.is_check_step(step),
        }
    }

    fn enter(&mut self, mode: GateMode) {
        if self.mode != mode {
            self.mode = mode;
            self.steps_in_mode = 0;
        }
    }

    /// Advances the gate through `step` given the measured error, if any.
    pub fn step(
        &mut self,
        cfg: &LearningConfig,
        step: u64,
        measured: Option<&[f64]>,
    ) -> GateDecision {
        let request_supervision = self.needs_supervision(cfg, step);
        let mode = self.mode_for(cfg, step);
        self.enter(mode);
        let learn = match (mode, measured) {
            (GateMode::Warmup, _) => true,
            (_, None) => false,
            (GateMode::Autonomous, Some(e)) => {
                if request_supervision && cfg.exceeds_threshold(e) {
                    self.enter(GateMode::Relearn);
                    true
                } else {
                    false
                }
            }
            (GateMode::Relearn, Some(e)) => {
                if cfg.exceeds_threshold(e) {
                    true
                } else {
                    self.enter(GateMode::Autonomous);
                    false
                }
            }
        };
        self.steps_in_mode += 1;
        GateDecision {
            learn,
            request_supervision,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, k: usize, p: usize) -> NetworkSpec {
        NetworkSpec {
            neurons: n,
            dims: k,
            basis: p,
            decoder_variance: 10.0,
            leak: 0.001,
            l2_cost: 0.001,
            l1_cost: 0.001,
            feedback_gain: 500.0,
            learning_rate: 0.001,
        }
    }

    fn manual(decoder: &[&[f64]], p: usize, mu: f64, nu: f64, leak: f64) -> NetworkParams {
        let d = DenseMatrix::from_rows(decoder).unwrap();
        let n = d.cols();
        let spec = NetworkSpec {
            neurons: n,
            dims: d.rows(),
            basis: p,
            decoder_variance: 1.0,
            leak,
            l2_cost: mu,
            l1_cost: nu,
            feedback_gain: 1.0,
            learning_rate: 0.001,
        };
        NetworkParams::from_parts(spec, d, DenseMatrix::zeros(n, p), vec![0.0; p]).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let (a, _) = init_network(7, spec(30, 1, 40)).unwrap();
        let (b, _) = init_network(7, spec(30, 1, 40)).unwrap();
        assert_eq!(a.decoder, b.decoder);
        assert_eq!(a.dendritic, b.dendritic);
        assert_eq!(a.offsets, b.offsets);
        let (c, _) = init_network(8, spec(30, 1, 40)).unwrap();
        assert_ne!(a.decoder, c.decoder);
    }

    #[test]
    fn init_decoder_variance() {
        let (p, state) = init_network(1, spec(30, 1, 10)).unwrap();
        let d = p.decoder.as_slice();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((6.0..=14.0).contains(&var), "sample variance {var}");
        assert!(state.slow.max_abs() == 0.0);
        assert!(state.sigma.iter().chain(&state.rates).all(|v| *v == 0.0));
    }

    #[test]
    fn init_invariants() {
        let (p, _) = init_network(3, spec(50, 3, 20)).unwrap();
        assert!(p.has_redundancy());
        let expect = fast_weights(&p.decoder, p.spec.l2_cost);
        assert!((&p.fast - &expect).max_abs() <= 1e-12);
        assert_eq!(p.encoder, p.decoder.transpose());
        for i in 0..50 {
            let sq: f64 = p.decoder.column(i).iter().map(|d| d * d).sum();
            assert!((p.thresholds[i] - (sq + 0.002) / 2.0).abs() <= 1e-12 * (1.0 + sq));
        }
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(init_network(0, spec(0, 1, 1)), Err(Error::InvalidDimension(_))));
        let mut s = spec(3, 1, 1);
        s.decoder_variance = 0.0;
        assert!(matches!(init_network(0, s), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn threshold_examples() {
        let d = DenseMatrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 0.0, 0.0]]).unwrap();
        let t = compute_thresholds(&d, 0.001, 0.001);
        assert!((t[0] - 0.501).abs() < 1e-15);
        let t0 = compute_thresholds(&d, 0.0, 0.0);
        assert_eq!(t0[1], 0.0);
        assert_eq!(t0[2], 2.0);
    }

    #[test]
    fn dendritic_basis_examples() {
        let m = DenseMatrix::zeros(3, 4);
        assert_eq!(dendritic_basis(&m, &[0.0; 4], &[1.0, 2.0, 3.0]), vec![0.0; 4]);
        // One unit of rate through a unit weight: tanh(1).
        let mut m = DenseMatrix::zeros(2, 1);
        m[(0, 0)] = 1.0;
        let psi = dendritic_basis(&m, &[0.0], &[1.0, 5.0]);
        assert!((psi[0] - 0.761_594).abs() < 1e-6);
        let big = DenseMatrix::from_rows(&[[40.0, -40.0]]).unwrap();
        let psi = dendritic_basis(&big, &[0.5, -0.5], &[1.0]);
        assert!(psi.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn quiet_network_stays_quiet() {
        let p = manual(&[&[1.0, -1.0]], 2, 0.001, 0.001, 0.001);
        let mut s = NetworkState::new(&p);
        s.rates = vec![1.0, 0.0];
        let fired = s.substep(&p, &[0.0], None, 0.1, 1, 0, 0).unwrap();
        assert!(fired.is_empty());
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        assert!((s.rates[0] - 0.9999).abs() < 1e-15);
    }

    #[test]
    fn argmax_neuron_fires_and_resets() {
        let p = manual(&[&[1.0, 1.0]], 1, 0.0, 0.0, 0.0);
        assert_eq!(p.thresholds, vec![0.5, 0.5]);
        let mut s = NetworkState::new(&p);
        s.sigma = vec![0.6, 0.2];
        let fired = s.substep(&p, &[0.0], None, 0.1, 1, 3, 2).unwrap();
        assert_eq!(fired, vec![0]);
        assert_eq!(s.rates, vec![1.0, 0.0]);
        // σ -= Ω_f[:, 0] = [1, 1]
        assert!((s.sigma[0] + 0.4).abs() < 1e-15);
        assert!((s.sigma[1] + 0.8).abs() < 1e-15);
        assert!(s.sigma[0] < p.thresholds[0]);
        assert_eq!(
            s.spike_log,
            vec![Spike {
                step: 3,
                substep: 2,
                neuron: 0
            }]
        );
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let p = manual(&[&[1.0, 1.0, 1.0]], 1, 0.0, 0.0, 0.0);
        let mut s = NetworkState::new(&p);
        s.sigma = vec![0.2, 0.7, 0.7];
        assert_eq!(s.substep(&p, &[0.0], None, 0.1, 1, 0, 0).unwrap(), vec![1]);
    }

    #[test]
    fn error_feedback_drives_firing() {
        let p = manual(&[&[1.0, -1.0]], 1, 0.0, 0.0, 0.0);
        let mut s = NetworkState::new(&p);
        // k·dt·Dᵀe = [0.6, -0.6]
        let fired = s.substep(&p, &[0.0], Some(&[6.0]), 0.1, 1, 0, 0).unwrap();
        assert_eq!(fired, vec![0]);
        assert_eq!(s.decode(&p), vec![1.0]);
    }

    #[test]
    fn decode_examples() {
        let p = manual(&[&[1.0, 0.0], &[0.0, 1.0]], 1, 0.0, 0.0, 0.0);
        let mut s = NetworkState::new(&p);
        s.rates = vec![1.0, 2.0];
        assert_eq!(s.decode(&p), vec![1.0, 2.0]);
        s.rates = vec![0.0, 0.0];
        assert_eq!(s.decode(&p), vec![0.0, 0.0]);
        let q = manual(&[&[1.0, -1.0]], 1, 0.0, 0.0, 0.0);
        let mut s = NetworkState::new(&q);
        s.rates = vec![3.0, 1.0];
        assert_eq!(s.decode(&q), vec![2.0]);
    }

    #[test]
    fn plasticity_outer_product() {
        // Dᵀe = [0.5, -0.5] with D = [[1, -1]] and e = [0.5]; ψ = [1, 1] is
        // approximated by saturating the dendrites through large offsets.
        let d = DenseMatrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let spec = NetworkSpec {
            neurons: 2,
            dims: 1,
            basis: 2,
            decoder_variance: 1.0,
            leak: 0.0,
            l2_cost: 0.0,
            l1_cost: 0.0,
            feedback_gain: 1.0,
            learning_rate: 0.001,
        };
        let p = NetworkParams::from_parts(spec, d, DenseMatrix::zeros(2, 2), vec![30.0, 30.0])
            .unwrap();
        let mut s = NetworkState::new(&p);
        s.plasticity_update(&p, &[0.5]).unwrap();
        let expected = [[5e-4, 5e-4], [-5e-4, -5e-4]];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((s.slow[(i, j)] - v).abs() < 1e-15);
            }
        }
        let before = s.slow.clone();
        s.plasticity_update(&p, &[0.0]).unwrap();
        assert_eq!(s.slow, before);
    }

    #[test]
    fn plasticity_is_local() {
        // Two states that differ in σ but share ψ(r) and e give equal updates.
        let (p, mut a) = init_network(11, spec(8, 1, 5)).unwrap();
        let mut b = a.clone();
        a.rates = vec![1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        b.rates = a.rates.clone();
        b.sigma = vec![3.0; 8];
        a.plasticity_update(&p, &[0.3]).unwrap();
        b.plasticity_update(&p, &[0.3]).unwrap();
        assert_eq!(a.slow, b.slow);
    }

    #[test]
    fn rates_never_negative() {
        let (p, mut s) = init_network(5, spec(20, 1, 10)).unwrap();
        for step in 0..200 {
            let e = [(step as f64 * 0.1).sin() * 3.0 - s.decode(&p)[0]];
            s.substep(&p, &[0.0], Some(&e), 0.001, 1, step, 0).unwrap();
            assert!(s.rates.iter().all(|r| *r >= 0.0));
        }
    }

    fn gate_cfg() -> LearningConfig {
        LearningConfig::with_threshold(vec![0.1])
    }

    #[test]
    fn gate_warmup() {
        let mut g = SupervisionGate::new();
        let d = g.step(&gate_cfg(), 10, Some(&[5.0]));
        assert_eq!(
            d,
            GateDecision {
                learn: true,
                request_supervision: true
            }
        );
        assert_eq!(g.mode, GateMode::Warmup);
    }

    #[test]
    fn gate_stays_autonomous_below_threshold() {
        let cfg = gate_cfg();
        let mut g = SupervisionGate {
            mode: GateMode::Autonomous,
            steps_in_mode: 3,
        };
        assert!(g.needs_supervision(&cfg, 100));
        let d = g.step(&cfg, 100, Some(&[0.05]));
        assert!(!d.learn);
        assert_eq!(g.mode, GateMode::Autonomous);
        assert!(!g.needs_supervision(&cfg, 101));
    }

    #[test]
    fn gate_relearn_cycle() {
        let cfg = gate_cfg();
        let mut g = SupervisionGate {
            mode: GateMode::Autonomous,
            steps_in_mode: 0,
        };
        let d = g.step(&cfg, 100, Some(&[0.2]));
        assert!(d.learn && d.request_supervision);
        assert_eq!(g.mode, GateMode::Relearn);
        assert!(g.needs_supervision(&cfg, 101));
        assert!(g.step(&cfg, 101, Some(&[-0.3])).learn);
        let d = g.step(&cfg, 102, Some(&[0.01]));
        assert!(!d.learn && d.request_supervision);
        assert_eq!(g.mode, GateMode::Autonomous);
        assert!(!g.needs_supervision(&cfg, 103));
    }

    #[test]
    fn gate_leaves_warmup_on_schedule() {
        let cfg = gate_cfg();
        let mut g = SupervisionGate::new();
        for s in 0..50 {
            assert!(g.step(&cfg, s, Some(&[1.0])).learn);
        }
        assert_eq!(g.mode_for(&cfg, 50), GateMode::Autonomous);
        assert!(g.needs_supervision(&cfg, 50));
        assert!(!g.needs_supervision(&cfg, 51));
        let d = g.step(&cfg, 50, Some(&[0.0]));
        assert!(!d.learn);
        let d = g.step(&cfg, 51, None);
        assert_eq!(
            d,
            GateDecision {
                learn: false,
                request_supervision: false
            }
        );
    }
}
