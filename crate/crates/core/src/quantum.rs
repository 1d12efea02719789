//! Quantized models: truncated Fock-basis representation of the
//! noncommutative plane [x1, x2] = -i theta, the angular-momentum
//! operator J = alpha B k + (alpha B rho / 2)(x1^2 + x2^2) built on it,
//! and the Fourier-grid check that the unreduced model's angular momentum
//! has an integer spectrum.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::models::{FieldSelection, ModelConfig};

/// Relative tolerance on the plane's theta against the config's
/// hbar / (alpha rho B).
const THETA_REL_TOL: f64 = 1e-9;

/// Entry-wise Hermiticity tolerance for observables.
const HERMITICITY_TOL: f64 = 1e-12;

/// Agreement required between the N and 2N spectra on the trusted prefix.
const TRUNCATION_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum QuantumError {
    #[error("truncation dimension must be >= 4, got {0}")]
    BadDimension(usize),
    #[error("theta must be nonzero")]
    ZeroTheta,
    #[error("plane theta {plane} inconsistent with config theta {config}")]
    ThetaMismatch { plane: f64, config: f64 },
    #[error("operator is not Hermitian (max defect {0:.3e})")]
    NonHermitian(f64),
    #[error("eigensolver failed to converge")]
    ConvergenceFailure,
    #[error("grid size must be even and >= 8, got {0}")]
    BadGrid(usize),
}

/// A truncated Hermitian operator in the Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub mat: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut max = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                max = max.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        max
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITICITY_TOL * self.norm_scale()
    }

    fn norm_scale(&self) -> f64 {
        self.mat.iter().map(|c| c.norm()).fold(1.0, f64::max)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: &self.mat * Complex64::new(c, 0.0),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        }
    }
}

/// Sorted eigenvalues with a certified prefix length.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub truncation_dim: usize,
    /// Leading eigenvalues certified against truncation error.
    pub trusted_count: usize,
}

/// Fock-space annihilation operator: a |n> = sqrt(n) |n-1>.
fn annihilation(n: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Noncommutative coordinates on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct NoncommutativePlane {
    pub theta: f64,
    pub x1: OperatorMatrix,
    pub x2: OperatorMatrix,
}

/// Ladder construction with the orientation fixed so that
/// [X1, X2] = -i theta and X1^2 + X2^2 = |theta| (2 a'a + 1) on the
/// interior block. The truncation corrupts only the trailing corner.
pub fn build_noncommutative_plane(
    theta: f64,
    n: usize,
) -> Result<NoncommutativePlane, QuantumError> {
    if n < 4 {
        return Err(QuantumError::BadDimension(n));
    }
    if theta == 0.0 {
        return Err(QuantumError::ZeroTheta);
    }
    let a = annihilation(n);
    let adag = a.adjoint();
    let s = (theta.abs() / 2.0).sqrt();
    let x1 = (&a + &adag) * Complex64::new(s, 0.0);
    // X2 = sign(theta) * i * sqrt(|theta|/2) (a - a')
    let x2 = (&a - &adag) * Complex64::new(0.0, s * theta.signum());
    Ok(NoncommutativePlane {
        theta,
        x1: OperatorMatrix { mat: x1 },
        x2: OperatorMatrix { mat: x2 },
    })
}

impl NoncommutativePlane {
    /// X1^2 + X2^2; equals |theta|(2n+1) on the diagonal away from the
    /// truncation corner.
    pub fn radius_squared(&self) -> OperatorMatrix {
        self.x1.mul(&self.x1).add(&self.x2.mul(&self.x2))
    }

    /// Max entry of [X1, X2] + i theta on the leading (N-1)x(N-1) block.
    pub fn commutator_defect_interior(&self) -> f64 {
        let c = self.x1.commutator(&self.x2);
        let n = c.dim();
        let mut max = 0.0_f64;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let expected = if i == j {
                    Complex64::new(0.0, -self.theta)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                max = max.max((c.mat[(i, j)] - expected).norm());
            }
        }
        max
    }
}

/// The angular-momentum operator on the constraint-reduced model:
/// Both     -> alpha B k I + (alpha B rho / 2)(X1^2 + X2^2)
/// E2Only   -> (alpha B rho / 2)(X1^2 + X2^2)
/// E1Only   -> alpha B k I (constant; the reduced model has no dynamics)
pub fn fam_operator(
    config: &ModelConfig,
    selection: FieldSelection,
    plane: &NoncommutativePlane,
) -> Result<OperatorMatrix, QuantumError> {
    if selection.includes_e2() {
        let expected = config.theta();
        if (plane.theta - expected).abs() > THETA_REL_TOL * expected.abs() {
            return Err(QuantumError::ThetaMismatch {
                plane: plane.theta,
                config: expected,
            });
        }
    }
    let n = plane.x1.dim();
    let abk = config.alpha * config.b * config.k;
    let oscillator = plane
        .radius_squared()
        .scale(config.alpha * config.b * config.rho / 2.0);
    let op = match selection {
        FieldSelection::Both => OperatorMatrix::identity(n).scale(abk).add(&oscillator),
        FieldSelection::E2Only => oscillator,
        FieldSelection::E1Only => OperatorMatrix::identity(n).scale(abk),
    };
    Ok(op)
}

/// Hermitian eigenvalues, ascending. trusted_count = floor(fraction * N);
/// certification against truncation is done by the caller (see
/// [`certified_spectrum`]).
pub fn spectrum(
    op: &OperatorMatrix,
    trusted_fraction: f64,
) -> Result<SpectrumResult, QuantumError> {
    let defect = op.hermiticity_defect();
    if defect > HERMITICITY_TOL * op.norm_scale() {
        return Err(QuantumError::NonHermitian(defect));
    }
    let eig = nalgebra::SymmetricEigen::try_new(op.mat.clone(), f64::EPSILON, 10_000)
        .ok_or(QuantumError::ConvergenceFailure)?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(QuantumError::ConvergenceFailure);
    }
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = op.dim();
    let trusted_count = ((trusted_fraction * n as f64).floor() as usize).min(n);
    Ok(SpectrumResult {
        eigenvalues,
        truncation_dim: n,
        trusted_count,
    })
}

/// Builds the operator at N and 2N via `build`, diagonalizes both and
/// certifies the trusted prefix by agreement within 1e-8. The returned
/// trusted count never exceeds the agreeing prefix.
pub fn certified_spectrum(
    build: impl Fn(usize) -> Result<OperatorMatrix, QuantumError>,
    n: usize,
    trusted_fraction: f64,
) -> Result<SpectrumResult, QuantumError> {
    let coarse = spectrum(&build(n)?, trusted_fraction)?;
    let fine = spectrum(&build(2 * n)?, 1.0)?;
    let mut certified = 0;
    for i in 0..coarse.trusted_count {
        if (coarse.eigenvalues[i] - fine.eigenvalues[i]).abs() <= TRUNCATION_TOL {
            certified += 1;
        } else {
            break;
        }
    }
    Ok(SpectrumResult {
        eigenvalues: coarse.eigenvalues,
        truncation_dim: n,
        trusted_count: certified,
    })
}

/// Certified spectrum of the reduced-model angular momentum for a config
/// and field selection.
pub fn fam_spectrum(
    config: &ModelConfig,
    selection: FieldSelection,
    n: usize,
    trusted_fraction: f64,
) -> Result<SpectrumResult, QuantumError> {
    let theta = config.theta();
    certified_spectrum(
        |dim| {
            let plane = build_noncommutative_plane(theta, dim)?;
            fam_operator(config, selection, &plane)
        },
        n,
        trusted_fraction,
    )
}

/// J = -i hbar d/dphi on a uniform periodic grid via spectral (Fourier)
/// differentiation: J = F^H diag(hbar m) F with m = -N/2 .. N/2 - 1.
/// Each Fourier mode is exact, so the whole spectrum is trusted.
pub fn full_model_angular_spectrum(
    grid_size: usize,
    hbar: f64,
) -> Result<SpectrumResult, QuantumError> {
    if grid_size < 8 || grid_size % 2 != 0 {
        return Err(QuantumError::BadGrid(grid_size));
    }
    let n = grid_size;
    let norm = 1.0 / (n as f64).sqrt();
    let mut dft = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let phase = -std::f64::consts::TAU * (j as f64) * (l as f64) / n as f64;
            dft[(j, l)] = Complex64::from_polar(norm, phase);
        }
    }
    let mut diag = DMatrix::zeros(n, n);
    for j in 0..n {
        let mode = if j < n / 2 {
            j as f64
        } else {
            j as f64 - n as f64
        };
        diag[(j, j)] = Complex64::new(hbar * mode, 0.0);
    }
    let j_op = OperatorMatrix {
        mat: dft.adjoint() * diag * dft,
    };
    spectrum(&j_op, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_small_dimension_and_zero_theta() {
        assert!(matches!(
            build_noncommutative_plane(1.0, 3),
            Err(QuantumError::BadDimension(3))
        ));
        assert!(matches!(
            build_noncommutative_plane(0.0, 8),
            Err(QuantumError::ZeroTheta)
        ));
    }

    #[test]
    fn commutator_interior_block() {
        let plane = build_noncommutative_plane(1.0, 8).unwrap();
        assert!(plane.commutator_defect_interior() < 1e-12);
        let plane = build_noncommutative_plane(-0.7, 8).unwrap();
        assert!(plane.commutator_defect_interior() < 1e-12);
    }

    #[test]
    fn oscillator_identity_spectrum() {
        // eigenvalues of X1^2 + X2^2 on the trusted block: theta(2n+1)
        let plane = build_noncommutative_plane(1.0, 16).unwrap();
        let s = spectrum(&plane.radius_squared(), 0.5).unwrap();
        for (n, &ev) in s.eigenvalues.iter().take(s.trusted_count).enumerate() {
            assert_abs_diff_eq!(ev, (2 * n + 1) as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn oscillator_identity_scales_with_theta() {
        let plane = build_noncommutative_plane(0.5, 16).unwrap();
        let s = spectrum(&plane.radius_squared(), 0.5).unwrap();
        for (n, &ev) in s.eigenvalues.iter().take(s.trusted_count).enumerate() {
            assert_abs_diff_eq!(ev, 0.5 * (2 * n + 1) as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn hermiticity_preserved_by_construction() {
        let plane = build_noncommutative_plane(0.3, 12).unwrap();
        assert!(plane.x1.is_hermitian());
        assert!(plane.x2.is_hermitian());
        assert!(plane.radius_squared().is_hermitian());
    }

    #[test]
    fn fam_spectrum_default_config() {
        // alpha = B = rho = hbar = 1, k = 1/2: J_n = 0.5 + (n + 1/2)
        let config = ModelConfig::default();
        let s = fam_spectrum(&config, FieldSelection::Both, 16, 0.5).unwrap();
        assert!(s.trusted_count >= 8);
        for (n, &ev) in s.eigenvalues.iter().take(s.trusted_count).enumerate() {
            assert_abs_diff_eq!(ev, 0.5 + n as f64 + 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn fam_spectrum_e2_only_half_integers() {
        let config = ModelConfig::default();
        let s = fam_spectrum(&config, FieldSelection::E2Only, 16, 0.5).unwrap();
        for (n, &ev) in s.eigenvalues.iter().take(s.trusted_count).enumerate() {
            assert_abs_diff_eq!(ev, n as f64 + 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn fam_spectrum_e1_only_constant() {
        let config = ModelConfig::default();
        let plane = build_noncommutative_plane(config.theta(), 8).unwrap();
        let op = fam_operator(&config, FieldSelection::E1Only, &plane).unwrap();
        let s = spectrum(&op, 1.0).unwrap();
        for &ev in &s.eigenvalues {
            assert_abs_diff_eq!(ev, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn theta_mismatch_detected() {
        let config = ModelConfig::default();
        let plane = build_noncommutative_plane(2.0 * config.theta(), 8).unwrap();
        assert!(matches!(
            fam_operator(&config, FieldSelection::Both, &plane),
            Err(QuantumError::ThetaMismatch { .. })
        ));
    }

    #[test]
    fn identity_spectrum_trivial() {
        let s = spectrum(&OperatorMatrix::identity(6), 1.0).unwrap();
        for &ev in &s.eigenvalues {
            assert_abs_diff_eq!(ev, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let op = OperatorMatrix { mat: m };
        assert!(matches!(
            spectrum(&op, 1.0),
            Err(QuantumError::NonHermitian(_))
        ));
    }

    #[test]
    fn fourier_grid_integer_spectrum() {
        let s = full_model_angular_spectrum(16, 1.0).unwrap();
        let expected: Vec<f64> = (-8..8).map(|n| n as f64).collect();
        assert_eq!(s.eigenvalues.len(), 16);
        for (ev, want) in s.eigenvalues.iter().zip(&expected) {
            assert_abs_diff_eq!(*ev, *want, epsilon = 1e-10);
        }
    }

    #[test]
    fn fourier_grid_scales_with_hbar() {
        let s = full_model_angular_spectrum(16, 2.0).unwrap();
        for (i, ev) in s.eigenvalues.iter().enumerate() {
            assert_abs_diff_eq!(*ev, 2.0 * (i as f64 - 8.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn fourier_grid_rejects_bad_sizes() {
        assert!(matches!(
            full_model_angular_spectrum(6, 1.0),
            Err(QuantumError::BadGrid(6))
        ));
        assert!(matches!(
            full_model_angular_spectrum(15, 1.0),
            Err(QuantumError::BadGrid(15))
        ));
    }

    #[test]
    fn shift_law_in_k() {
        let base = ModelConfig::default();
        let shifted = ModelConfig {
            k: base.k + 0.3,
            ..base
        };
        let s0 = fam_spectrum(&base, FieldSelection::Both, 16, 0.5).unwrap();
        let s1 = fam_spectrum(&shifted, FieldSelection::Both, 16, 0.5).unwrap();
        let n = s0.trusted_count.min(s1.trusted_count);
        for i in 0..n {
            assert_abs_diff_eq!(
                s1.eigenvalues[i] - s0.eigenvalues[i],
                0.3,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn spacing_law_is_hbar() {
        let config = ModelConfig {
            hbar: 2.0,
            ..Default::default()
        };
        let s = fam_spectrum(&config, FieldSelection::Both, 16, 0.5).unwrap();
        for w in s.eigenvalues[..s.trusted_count].windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn ground_state_fractional_part() {
        // frac((J_0 - hbar/2)/hbar) = frac(alpha B k / hbar)
        let config = ModelConfig {
            k: 0.7,
            ..Default::default()
        };
        let s = fam_spectrum(&config, FieldSelection::Both, 16, 0.5).unwrap();
        let got = ((s.eigenvalues[0] - 0.5) / config.hbar).fract();
        let want = (config.alpha * config.b * config.k / config.hbar).fract();
        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn truncation_robustness() {
        let config = ModelConfig::default();
        let s16 = fam_spectrum(&config, FieldSelection::Both, 16, 0.5).unwrap();
        let s32 = fam_spectrum(&config, FieldSelection::Both, 32, 0.5).unwrap();
        for i in 0..s16.trusted_count {
            assert!((s16.eigenvalues[i] - s32.eigenvalues[i]).abs() < 1e-8);
        }
    }
}
