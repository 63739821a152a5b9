//! Linear time-invariant plants and their fixed-step integrator.

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::linalg::DenseMatrix;

/// `ẋ = Ax + Bu` with its current state and integration step.
#[derive(Debug, Clone)]
pub struct LtiPlant {
    a: DenseMatrix,
    b: DenseMatrix,
    state: Vec<f64>,
    dt: f64,
}

impl LtiPlant {
    pub fn new(a: DenseMatrix, b: DenseMatrix, x0: Vec<f64>, dt: f64) -> Result<Self> {
        if !a.is_square() || a.rows() != x0.len() || b.rows() != x0.len() {
            return Err(mismatch(format!(
                "A {:?}, B {:?}, x0 of length {}",
                a.shape(),
                b.shape(),
                x0.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidDimension(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            a,
            b,
            state: x0,
            dt,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state_dim(&self) -> usize {
        self.state.len()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    fn derivative(&self, x: &[f64], bu: &[f64]) -> Vec<f64> {
        let ax = self.a.mul_vec(x).expect("state dimension checked at construction");
        ax.iter().zip(bu).map(|(p, q)| p + q).collect()
    }

    /// Classical fourth-order Runge–Kutta step with `u` held over `dt`.
    pub fn rk4_step(&mut self, u: &[f64]) -> Result<&[f64]> {
        if u.len() != self.input_dim() {
            return Err(mismatch(format!(
                "input of length {}, plant expects {}",
                u.len(),
                self.input_dim()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(format!("plant input {u:?}")));
        }
        let h = self.dt;
        let bu = self.b.mul_vec(u)?;
        let x = &self.state;
        let axpy = |s: f64, k: &[f64]| -> Vec<f64> {
            x.iter().zip(k).map(|(xi, ki)| xi + s * ki).collect()
        };
        let k1 = self.derivative(x, &bu);
        let k2 = self.derivative(&axpy(0.5 * h, &k1), &bu);
        let k3 = self.derivative(&axpy(0.5 * h, &k2), &bu);
        let k4 = self.derivative(&axpy(h, &k3), &bu);
        let next: Vec<f64> = (0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(format!("plant state {next:?}")));
        }
        self.state = next;
        Ok(&self.state)
    }
}

pub const WORKBENCH_X0: [f64; 2] = [5.0, 2.0];

/// Second-order workbench system `ẋ = [[0, 1], [-2, 0]]x + [0, 1]ᵀu`.
pub fn make_workbench(x0: [f64; 2], dt: f64) -> Result<LtiPlant> {
    let a = DenseMatrix::from_rows(&[[0.0, 1.0], [-2.0, 0.0]])?;
    let b = DenseMatrix::from_rows(&[[0.0], [1.0]])?;
    LtiPlant::new(a, b, x0.to_vec(), dt)
}

/// Orbit of the rendezvous target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    /// Gravitational parameter, km³/s².
    pub mu_earth: f64,
    /// Target orbital radius, km.
    pub orbit_radius: f64,
}

impl Default for CwParams {
    fn default() -> Self {
        Self {
            mu_earth: 398_600.0,
            orbit_radius: 6_771.0,
        }
    }
}

impl CwParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu_earth > 0.0 && self.orbit_radius > 0.0 {
            Ok(())
        } else {
            Err(Error::Validation(vec![format!(
                "mu_earth and orbit_radius must be positive, got {} and {}",
                self.mu_earth, self.orbit_radius
            )]))
        }
    }

    /// Mean motion `n = sqrt(μ / R₀³)` in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.mu_earth / self.orbit_radius.powi(3)).sqrt()
    }
}

pub const RENDEZVOUS_R0: [f64; 3] = [70.0, 30.0, -5.0];
pub const RENDEZVOUS_V0: [f64; 3] = [-1.7, -0.9, 0.25];

/// Relative-motion system matrix over `[x, y, z, ẋ, ẏ, ż]`.
///
/// The acceleration rows are taken as published for this model:
/// `ẍ = 2nż`, `ÿ = -n²ẏ`, `z̈ = -2nẋ + 2n²ż`. They differ from the
/// textbook Hill equations (no position terms), and the gain design and
/// reference trajectories all follow this matrix.
pub fn cw_system_matrix(n: f64) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(6, 6);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
    }
    a[(3, 5)] = 2.0 * n;
    a[(4, 4)] = -n * n;
    a[(5, 3)] = -2.0 * n;
    a[(5, 5)] = 2.0 * n * n;
    a
}

pub fn make_cw(params: &CwParams, r0: [f64; 3], v0: [f64; 3], dt: f64) -> Result<LtiPlant> {
    params.validate()?;
    let a = cw_system_matrix(params.mean_motion());
    let mut b = DenseMatrix::zeros(6, 3);
    for i in 0..3 {
        b[(i + 3, i)] = 1.0;
    }
    let x0 = r0.iter().chain(v0.iter()).copied().collect();
    LtiPlant::new(a, b, x0, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_exponential;

    #[test]
    fn rk4_scalar_decay() {
        let a = DenseMatrix::from_rows(&[[-1.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[0.0]]).unwrap();
        let mut p = LtiPlant::new(a, b, vec![1.0], 0.1).unwrap();
        let x = p.rk4_step(&[0.0]).unwrap()[0];
        // 1 - h + h²/2 - h³/6 + h⁴/24 at h = 0.1
        assert!((x - 0.904_837_5).abs() < 1e-7);
        assert!((x - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn rk4_pure_integrator() {
        let mut p = LtiPlant::new(
            DenseMatrix::zeros(1, 1),
            DenseMatrix::identity(1),
            vec![0.0],
            0.1,
        )
        .unwrap();
        let x = p.rk4_step(&[1.0]).unwrap()[0];
        assert!((x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rk4_workbench_matches_expm() {
        let mut p = make_workbench(WORKBENCH_X0, 0.01).unwrap();
        let phi = matrix_exponential(p.a(), 0.01).unwrap();
        let expected = phi.mul_vec(&WORKBENCH_X0).unwrap();
        let x = p.rk4_step(&[0.0]).unwrap();
        for (a, b) in x.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rk4_rejects_wrong_input() {
        let mut p = make_workbench(WORKBENCH_X0, 0.1).unwrap();
        assert!(matches!(p.rk4_step(&[0.0, 1.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(p.rk4_step(&[f64::NAN]), Err(Error::NonFiniteState(_))));
    }

    #[test]
    fn workbench_defaults() {
        let p = make_workbench(WORKBENCH_X0, 0.1).unwrap();
        assert_eq!(p.state(), &[5.0, 2.0]);
        assert_eq!(p.a()[(1, 0)], -2.0);
        assert_eq!(p.input_dim(), 1);
    }

    #[test]
    fn workbench_uncontrolled_stays_bounded() {
        // Eigenvalues ±i√2: energy 2x₁² + x₂² is conserved.
        let mut p = make_workbench(WORKBENCH_X0, 0.01).unwrap();
        let e0 = 2.0 * 25.0 + 4.0;
        for _ in 0..1000 {
            let x = p.rk4_step(&[0.0]).unwrap();
            let e = 2.0 * x[0] * x[0] + x[1] * x[1];
            assert!((e - e0).abs() < 1e-6 * e0);
        }
    }

    #[test]
    fn mean_motion_from_orbit() {
        let n = CwParams::default().mean_motion();
        assert!((n - 1.1332e-3).abs() < 1e-7);
    }

    #[test]
    fn cw_matrix_layout() {
        let n = 1.1e-3;
        let a = cw_system_matrix(n);
        assert_eq!(a[(3, 5)], 2.0 * n);
        assert_eq!(a[(5, 3)], -2.0 * n);
        assert_eq!(a[(4, 4)], -n * n);
        assert_eq!(a[(5, 5)], 2.0 * n * n);
        let nonzero = a.as_slice().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 7);
    }

    #[test]
    fn cw_zero_mean_motion_is_free_flight() {
        let params = CwParams {
            mu_earth: 398_600.0,
            orbit_radius: f64::INFINITY,
        };
        assert_eq!(params.mean_motion(), 0.0);
        let mut p = make_cw(&params, RENDEZVOUS_R0, RENDEZVOUS_V0, 0.5).unwrap();
        for _ in 0..20 {
            p.rk4_step(&[0.0; 3]).unwrap();
        }
        for i in 0..3 {
            let expected = RENDEZVOUS_R0[i] + RENDEZVOUS_V0[i] * 10.0;
            assert!((p.state()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cw_initial_state() {
        let p = make_cw(&CwParams::default(), RENDEZVOUS_R0, RENDEZVOUS_V0, 0.1).unwrap();
        assert_eq!(p.state(), &[70.0, 30.0, -5.0, -1.7, -0.9, 0.25]);
        assert!(make_cw(
            &CwParams {
                mu_earth: -1.0,
                orbit_radius: 1.0
            },
            RENDEZVOUS_R0,
            RENDEZVOUS_V0,
            0.1
        )
        .is_err());
    }
}
