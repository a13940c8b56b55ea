//! Eigendecomposition of coupling matrices, the free single-magnon propagator
//! U(t) = e^{i2S₀Kt}, closed-form transfer times and swap certification.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::spin::Spin;
use crate::topology::{CouplingMatrix, NetworkKind, NetworkSpec, PathBlock};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Orthogonal eigenbasis of K. Row q of `q` is the eigenvector of `eigenvalues[q]`,
/// so Λ = Q K Qᵀ. Eigenvalues are ascending.
#[derive(Clone, Debug)]
pub struct SpectralForm {
    eigenvalues: DVector<f64>,
    q: DMatrix<f64>,
}

impl SpectralForm {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Qᵀ f(Λ) Q.
    pub fn matrix_function(&self, f: impl Fn(f64) -> Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let phases: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = DMatrix::zeros(n, n);
        for u in 0..n {
            for m in u..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (qi, p) in phases.iter().enumerate() {
                    acc += p * (self.q[(qi, u)] * self.q[(qi, m)]);
                }
                out[(u, m)] = acc;
                out[(m, u)] = acc;
            }
        }
        out
    }
}

/// Symmetric eigendecomposition with a hard iteration limit.
pub fn diagonalize(k: &CouplingMatrix) -> Result<SpectralForm> {
    diagonalize_symmetric(k.as_matrix())
}

pub(crate) fn diagonalize_symmetric(m: &DMatrix<f64>) -> Result<SpectralForm> {
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        let echo = if m.nrows() <= 16 { format!("\n{m}") } else { format!(" ({}x{} matrix)", m.nrows(), m.ncols()) };
        Error::Numeric(format!("symmetric eigensolver did not converge{echo}"))
    })?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut q = DMatrix::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        q.row_mut(row).copy_from(&eig.eigenvectors.column(i).transpose());
    }
    Ok(SpectralForm { eigenvalues, q })
}

/// U_um = (e^{i2S₀Kt})_um at a fixed time.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub time: f64,
    pub matrix: DMatrix<Complex64>,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Rows `u,m,re,im` with 1-based site indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,m,re,im\n");
        let n = self.dim();
        for u in 0..n {
            for m in 0..n {
                let z = self.matrix[(u, m)];
                let _ = writeln!(out, "{},{},{:?},{:?}", u + 1, m + 1, z.re, z.im);
            }
        }
        out
    }
}

/// U = Qᵀ diag(e^{i2S₀λ_q t}) Q.
pub fn propagator(spectral: &SpectralForm, s0: Spin, t: f64) -> Propagator {
    let w = f64::from(s0.twice()) * t;
    let matrix = spectral.matrix_function(|l| Complex64::from_polar(1.0, w * l));
    Propagator { time: t, matrix }
}

/// τ_θ = π / (2^{1+1/θ} S₀ κ); independent of the fold count.
pub fn optimal_time_hypercube(block: PathBlock, s0: Spin, kappa: f64) -> f64 {
    let factor = match block {
        PathBlock::Two => 4.0,
        PathBlock::Three => 2.0 * SQRT_2,
    };
    PI / (factor * s0.value() * kappa)
}

/// τ′ = π / (2S₀g₀); independent of the chain length.
pub fn optimal_time_chain(s0: Spin, g0: f64) -> f64 {
    PI / (2.0 * s0.value() * g0)
}

/// arg of the antipodal amplitude expected at the closed-form time:
/// i^{θg} for hypercubes and i^{N₀−1} for engineered chains.
pub fn expected_swap_phase(spec: &NetworkSpec) -> Option<f64> {
    let power = match spec.kind {
        NetworkKind::Hypercube { block, g } => block.theta() as usize * g,
        NetworkKind::EngineeredChain { n0 } => n0 - 1,
        _ => return None,
    };
    Some(i_power_phase(power))
}

/// arg(iᵏ) in (−π, π].
pub fn i_power_phase(k: usize) -> f64 {
    match k % 4 {
        0 => 0.0,
        1 => PI / 2.0,
        2 => PI,
        _ => -PI / 2.0,
    }
}

/// Closed-form transfer time of a network. Uniform chains use π/(2S₀κ) as a
/// reference time; they have no perfect transfer time beyond three sites.
pub fn closed_form_time(spec: &NetworkSpec) -> Result<f64> {
    match spec.kind {
        NetworkKind::Hypercube { block, .. } => Ok(optimal_time_hypercube(block, spec.s0, spec.kappa)),
        NetworkKind::EngineeredChain { .. } => Ok(optimal_time_chain(spec.s0, spec.g0)),
        NetworkKind::UniformChain { .. } => Ok(optimal_time_chain(spec.s0, spec.kappa)),
        NetworkKind::Custom(_) => Err(Error::Unsupported("custom topologies need an explicit time".into())),
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyTolerance {
    pub modulus: f64,
    pub phase: f64,
}

impl Default for CertifyTolerance {
    fn default() -> Self {
        CertifyTolerance { modulus: 1e-8, phase: 1e-6 }
    }
}

/// Transfer quality of the amplitude from site m to site m̄.
#[derive(Clone, Debug, PartialEq)]
pub struct SwapCertificate {
    /// (m, m̄), 1-based.
    pub pair: (usize, usize),
    pub time: f64,
    pub amplitude_modulus: f64,
    pub phase: f64,
    pub residual: f64,
    /// Σ_{u≠m̄} |U_{u,m}|².
    pub leakage: f64,
    pub expected_phase: Option<f64>,
    /// Wrapped difference between the observed and expected phase.
    pub phase_deviation: Option<f64>,
}

impl SwapCertificate {
    pub fn passes(&self, tol: &CertifyTolerance) -> bool {
        self.residual <= tol.modulus && self.phase_deviation.is_none_or(|d| d.abs() <= tol.phase)
    }

    pub const CSV_HEADER: &'static str =
        "m,mbar,time,modulus,phase,residual,leakage,expected_phase,phase_deviation";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            self.pair.0,
            self.pair.1,
            self.time,
            self.amplitude_modulus,
            self.phase,
            self.residual,
            self.leakage,
            opt(self.expected_phase),
            opt(self.phase_deviation)
        )
    }
}

/// Reads U_{m̄,m} and the leakage out of column m.
pub fn certify_swap(u: &Propagator, pair: (usize, usize), expected_phase: Option<f64>) -> Result<SwapCertificate> {
    let n = u.dim();
    let (m, mbar) = pair;
    if m == 0 || mbar == 0 || m > n || mbar > n {
        return domain(format!("pair ({m}, {mbar}) out of range for {n} sites"));
    }
    let amp = u.matrix[(mbar - 1, m - 1)];
    let leakage: f64 = (0..n).filter(|&r| r != mbar - 1).map(|r| u.matrix[(r, m - 1)].norm_sqr()).sum();
    let modulus = amp.norm();
    let phase = amp.arg();
    Ok(SwapCertificate {
        pair,
        time: u.time,
        amplitude_modulus: modulus,
        phase,
        residual: 1.0 - modulus,
        leakage,
        expected_phase,
        phase_deviation: expected_phase.map(|p| wrap_phase(phase - p)),
    })
}
