//! Exact stationary covariances of linear Gaussian dynamics.
//!
//! When `U` is quadratic with Hessian `H`, the slow-fast system is the linear
//! SDE `dz = A z dt + √(2D) dW` (centred at the joint minimiser) with
//!
//! ```text
//! A = -[[H_θθ, H_θx], [H_xθ/ε, H_xx/ε]],   D = diag(β⁻¹ I_{dθ}, ε⁻¹ I_{dx})
//! ```
//!
//! Its stationary covariance solves `AΣ + ΣAᵀ + 2D = 0`; the Euler chain with
//! step `δ` has `Σ = FΣFᵀ + 2δD` with `F = I + δA`. Both are solved through
//! the Kronecker (vectorised) form, which is plenty for desk-scale `d_x`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::GaussianHierarchicalModel;

/// Drift and diffusion matrices of a linear SDE `dz = A z dt + √(2D) dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSde {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
}

impl LinearSde {
    /// Linearised slow-fast system for a quadratic potential with Hessian
    /// `hessian`, whose first `d_theta` coordinates are parameters.
    pub fn slow_fast(hessian: &DMatrix<f64>, d_theta: usize, epsilon: f64, beta: f64) -> Self {
        let n = hessian.nrows();
        let rate = |i: usize| if i < d_theta { 1.0 } else { 1.0 / epsilon };
        let drift = DMatrix::from_fn(n, n, |i, j| -rate(i) * hessian[(i, j)]);
        let diffusion = DMatrix::from_fn(n, n, |i, j| match (i == j, i < d_theta) {
            (false, _) => 0.0,
            (true, true) => 1.0 / beta,
            (true, false) => 1.0 / epsilon,
        });
        Self { drift, diffusion }
    }

    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        solve_continuous_lyapunov(&self.drift, &(&self.diffusion * 2.0))
    }

    /// Stationary covariance of the Euler–Maruyama chain with step `delta`.
    pub fn euler_stationary_covariance(&self, delta: f64) -> Result<DMatrix<f64>> {
        let n = self.drift.nrows();
        let f = DMatrix::identity(n, n) + &self.drift * delta;
        solve_discrete_lyapunov(&f, &(&self.diffusion * (2.0 * delta)))
    }

    /// Exact transition over a step `h`, expressed against the Brownian
    /// increment `ΔW` that an Euler step of the same length would use:
    ///
    /// ```text
    /// z(t + h) = F z(t) + G ΔW + L r,   r ~ N(0, I) independent of ΔW
    /// ```
    ///
    /// where the Euler step reads `z + h A z + S ΔW` with `S Sᵀ = 2D`.
    pub fn exact_transition(&self, h: f64) -> Result<ExactTransition> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::config(format!("step must be positive, got {h}")));
        }
        let n = self.drift.nrows();
        let q = &self.diffusion * 2.0;
        let s = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::config("diffusion matrix is not positive definite"))?
            .l();
        // exp([[A, I], [0, 0]] h) carries ∫₀ʰ e^{Au} du in its top-right block.
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(&self.drift * h));
        m.view_mut((0, n), (n, n)).fill_with_identity();
        m.view_mut((0, n), (n, n)).scale_mut(h);
        let e = m.exp();
        let f = e.view((0, 0), (n, n)).into_owned();
        let phi = e.view((0, n), (n, n)).into_owned();
        // exp([[A, Q], [0, -Aᵀ]] h) = [[F, X], [0, ·]] with X Fᵀ = ∫₀ʰ e^{Au} Q e^{Aᵀu} du.
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(&self.drift * h));
        m.view_mut((0, n), (n, n)).copy_from(&(&q * h));
        m.view_mut((n, n), (n, n)).copy_from(&(-self.drift.transpose() * h));
        let e = m.exp();
        let noise_cov = e.view((0, n), (n, n)) * f.transpose();
        let cross = &phi * &s;
        let residual = &noise_cov - &cross * cross.transpose() / h;
        let residual = (&residual + residual.transpose()) * 0.5;
        let eig = residual.symmetric_eigen();
        let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let residual_factor = &eig.eigenvectors * roots * eig.eigenvectors.transpose();
        Ok(ExactTransition {
            step: h,
            transition: f,
            gain: cross / h,
            residual_factor,
            noise_factor: s,
        })
    }
}

/// Exact one-step law of a linear SDE, coupled to the Brownian increment.
/// See [`LinearSde::exact_transition`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTransition {
    pub step: f64,
    /// `F = e^{Ah}`.
    pub transition: DMatrix<f64>,
    /// `G = (∫₀ʰ e^{Au} du) S / h`.
    pub gain: DMatrix<f64>,
    /// Symmetric square root of the noise covariance left after conditioning
    /// on `ΔW`.
    pub residual_factor: DMatrix<f64>,
    /// `S`, the lower Cholesky factor of `2D`.
    pub noise_factor: DMatrix<f64>,
}

fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn vec_to_matrix(v: &nalgebra::DVector<f64>, n: usize) -> DMatrix<f64> {
    // Column-major vec, so this is a plain reshape.
    let m = DMatrix::from_column_slice(n, n, v.as_slice());
    (&m + m.transpose()) * 0.5
}

/// Solves `AΣ + ΣAᵀ + Q = 0` for Hurwitz `A`.
pub fn solve_continuous_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::config("Lyapunov solve needs square matrices of equal size"));
    }
    let re = max_real_eigenvalue(a);
    if re >= 0.0 {
        return Err(Error::Unstable(re));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::config("singular Lyapunov operator"))?;
    Ok(vec_to_matrix(&sol, n))
}

/// Solves `Σ = FΣFᵀ + Q` for Schur-stable `F`.
pub fn solve_discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    if f.ncols() != n || q.shape() != (n, n) {
        return Err(Error::config("Lyapunov solve needs square matrices of equal size"));
    }
    let rho = spectral_radius(f);
    if rho >= 1.0 {
        return Err(Error::Unstable(rho - 1.0));
    }
    let k = DMatrix::<f64>::identity(n * n, n * n) - f.kronecker(f);
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::config("singular discrete Lyapunov operator"))?;
    Ok(vec_to_matrix(&sol, n))
}

/// Exact stationary covariance of the slow-fast diffusion on the Gaussian
/// model, ordered `(θ, x_1, ..., x_{d_x})`.
pub fn stationary_covariance_lyapunov(
    model: &GaussianHierarchicalModel,
    epsilon: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    if !(epsilon > 0.0 && beta > 0.0) {
        return Err(Error::config("epsilon and beta must be positive"));
    }
    LinearSde::slow_fast(&model.hessian(), 1, epsilon, beta).stationary_covariance()
}

/// Exact stationary covariance of SFLA (Euler chain) on the Gaussian model.
pub fn stationary_covariance_euler(
    model: &GaussianHierarchicalModel,
    epsilon: f64,
    beta: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if !(epsilon > 0.0 && beta > 0.0 && delta > 0.0) {
        return Err(Error::config("epsilon, beta and delta must be positive"));
    }
    LinearSde::slow_fast(&model.hessian(), 1, epsilon, beta).euler_stationary_covariance(delta)
}

/// Stationary variance `1/(β μ_G)` of the averaged (Ornstein–Uhlenbeck)
/// parameter dynamics on the Gaussian model.
pub fn averaged_stationary_variance(model: &GaussianHierarchicalModel, beta: f64) -> f64 {
    1.0 / (beta * model.mu_marginal())
}

/// Stationary variance of the Euler chain for the averaged dynamics,
/// `(2δ/β) / (1 - (1 - δμ_G)²)`.
pub fn averaged_euler_stationary_variance(model: &GaussianHierarchicalModel, beta: f64, delta: f64) -> f64 {
    let mu = model.mu_marginal();
    let r = 1.0 - delta * mu;
    (2.0 * delta / beta) / (1.0 - r * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_transition_preserves_the_stationary_law() {
        let m = GaussianHierarchicalModel::new(vec![0.3, -1.0], 1.0, 1.0).unwrap();
        let sde = LinearSde::slow_fast(&m.hessian(), 1, 0.1, 1e3);
        let sigma = sde.stationary_covariance().unwrap();
        for h in [1e-3, 0.05, 0.5] {
            let t = sde.exact_transition(h).unwrap();
            let noise = &t.gain * t.gain.transpose() * h + &t.residual_factor * &t.residual_factor;
            let pushed = &t.transition * &sigma * t.transition.transpose() + noise;
            assert!(
                (pushed - &sigma).abs().max() < 1e-12 * sigma.abs().max().max(1.0),
                "h={h}"
            );
        }
        // Small steps are nearly Euler: the gain approaches S.
        let t = sde.exact_transition(1e-7).unwrap();
        assert!((&t.gain - &t.noise_factor).abs().max() < 1e-4 * t.noise_factor.abs().max());
        assert!(sde.exact_transition(0.0).is_err());
    }

    #[test]
    fn reversible_identity_case() {
        let h = DMatrix::<f64>::identity(3, 3);
        let sde = LinearSde::slow_fast(&h, 1, 1.0, 1.0);
        let s = sde.stationary_covariance().unwrap();
        assert!((s - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_unstable_drift() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -1.0]);
        let q = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(solve_continuous_lyapunov(&a, &q), Err(Error::Unstable(_))));
        let f = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        assert!(solve_discrete_lyapunov(&f, &q).is_err());
    }

    #[test]
    fn residual_and_symmetry() {
        let m = GaussianHierarchicalModel::new(vec![0.3, 1.1, -0.7], 0.9, 1.4).unwrap();
        let sde = LinearSde::slow_fast(&m.hessian(), 1, 0.07, 50.0);
        let s = sde.stationary_covariance().unwrap();
        let d2 = &sde.diffusion * 2.0;
        let res = &sde.drift * &s + &s * sde.drift.transpose() + &d2;
        assert!(res.abs().max() <= 1e-10 * d2.abs().max());
        assert!((&s - s.transpose()).abs().max() <= 1e-12);
        assert!(s.clone().cholesky().is_some());
    }

    #[test]
    fn euler_covariance_converges_to_continuous() {
        let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
        let cont = stationary_covariance_lyapunov(&m, 0.1, 1e3).unwrap()[(0, 0)];
        let gaps: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&d| (stationary_covariance_euler(&m, 0.1, 1e3, d).unwrap()[(0, 0)] - cont).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        // First order in δ.
        assert!((gaps[0] / gaps[1] - 2.0).abs() < 0.1);
    }

    #[test]
    fn averaged_euler_variance_tends_to_ou() {
        let m = GaussianHierarchicalModel::new(vec![1.0, 3.0], 1.0, 1.0).unwrap();
        let ou = averaged_stationary_variance(&m, 100.0);
        assert!((ou - 0.01).abs() < 1e-15);
        let e = averaged_euler_stationary_variance(&m, 100.0, 1e-6);
        assert!((e / ou - 1.0).abs() < 1e-5);
    }
}
