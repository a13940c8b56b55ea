//! d-level sent states, Hurwitz coordinates on CP^{d−1}, and seeded uniform
//! sampling over the state manifold.
//!
//! Sampling is counter based: sample `i` of a run with seed `s` draws from a
//! ChaCha8 stream keyed by `(s, i)`, so any partition of the sample range over
//! workers reproduces the serial result bit for bit.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};

const NORM_TOL: f64 = 1e-12;

/// Pure state Σ_ν C_ν |ν⟩ of a d-level system.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    amplitudes: Vec<Complex64>,
}

impl QuditState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return domain(format!("qudit dimension must be at least 2, got {}", amplitudes.len()));
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return domain(format!("amplitudes are not normalized (norm² = {norm})"));
        }
        Ok(QuditState { amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return domain("cannot normalize a zero vector");
        }
        Self::new(amplitudes.into_iter().map(|c| c / norm).collect())
    }

    pub fn basis(d: usize, level: usize) -> Result<Self> {
        if level >= d {
            return domain(format!("level {level} does not exist for d = {d}"));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); d];
        a[level] = Complex64::new(1.0, 0.0);
        Self::new(a)
    }

    pub fn d(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// |C_ν|².
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Polar angles ϑ_p ∈ [0, π/2] and azimuths χ_p ∈ [0, 2π) for p = 1…d−1,
/// stored at index p−1.
#[derive(Clone, Debug, PartialEq)]
pub struct HurwitzAngles {
    polar: Vec<f64>,
    azimuthal: Vec<f64>,
}

impl HurwitzAngles {
    pub fn new(polar: Vec<f64>, azimuthal: Vec<f64>) -> Result<Self> {
        if polar.is_empty() || polar.len() != azimuthal.len() {
            return domain(format!(
                "need d−1 ≥ 1 polar and azimuthal angles, got {} and {}",
                polar.len(),
                azimuthal.len()
            ));
        }
        if let Some(x) = polar.iter().find(|&&x| !(0.0..=PI / 2.0).contains(&x)) {
            return domain(format!("polar angle {x} outside [0, π/2]"));
        }
        if let Some(x) = azimuthal.iter().find(|&&x| !(0.0..2.0 * PI).contains(&x)) {
            return domain(format!("azimuthal angle {x} outside [0, 2π)"));
        }
        Ok(HurwitzAngles { polar, azimuthal })
    }

    pub fn d(&self) -> usize {
        self.polar.len() + 1
    }

    pub fn polar(&self) -> &[f64] {
        &self.polar
    }

    pub fn azimuthal(&self) -> &[f64] {
        &self.azimuthal
    }

    /// Unnormalized volume density Π_p cos ϑ_p (sin ϑ_p)^{2p−1}.
    pub fn volume_density(&self) -> f64 {
        self.polar
            .iter()
            .enumerate()
            .map(|(i, &t)| t.cos() * t.sin().powi(2 * (i as i32 + 1) - 1))
            .product()
    }
}

/// Maps Hurwitz angles to amplitudes. Level 0 gets cos ϑ_{d−1}; level k
/// (1 ≤ k ≤ d−2) gets sin ϑ_{d−1}⋯sin ϑ_{d−k} cos ϑ_{d−k−1} e^{iχ_{d−k}};
/// level d−1 gets Π sin ϑ_p e^{iχ_1}.
pub fn hurwitz_to_state(angles: &HurwitzAngles) -> QuditState {
    let d = angles.d();
    let theta = |p: usize| angles.polar[p - 1];
    let chi = |p: usize| angles.azimuthal[p - 1];
    let mut amps = Vec::with_capacity(d);
    amps.push(Complex64::new(theta(d - 1).cos(), 0.0));
    let mut sin_prod = 1.0;
    for k in 1..d {
        sin_prod *= theta(d - k).sin();
        let cos_next = if k < d - 1 { theta(d - k - 1).cos() } else { 1.0 };
        amps.push(Complex64::from_polar(sin_prod * cos_next, chi(d - k)));
    }
    QuditState { amplitudes: amps }
}

/// Draws angles with density ∝ Π cos ϑ_p (sin ϑ_p)^{2p−1}: ϑ_p = arcsin(u^{1/(2p)}).
pub fn sample_angles<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HurwitzAngles {
    let mut polar = Vec::with_capacity(d - 1);
    let mut azimuthal = Vec::with_capacity(d - 1);
    for p in 1..d {
        let u: f64 = rng.random();
        polar.push(u.powf(1.0 / (2.0 * p as f64)).asin());
        azimuthal.push(rng.random::<f64>() * 2.0 * PI);
    }
    HurwitzAngles { polar, azimuthal }
}

/// A state drawn from the unitarily invariant measure on CP^{d−1}.
pub fn sample_uniform<R: Rng + ?Sized>(d: usize, rng: &mut R) -> QuditState {
    assert!(d >= 2, "qudit dimension must be at least 2");
    hurwitz_to_state(&sample_angles(d, rng))
}

/// V_d = π^{d−1} / (d−1).
pub fn total_volume(d: usize) -> Result<f64> {
    if d < 2 {
        return domain(format!("qudit dimension must be at least 2, got {d}"));
    }
    Ok(PI.powi(d as i32 - 1) / (d - 1) as f64)
}

/// RNG for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Sample standard deviation over √n.
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MonteCarloEstimate {
    /// Reduces per-sample values in index order.
    pub fn from_samples(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        MonteCarloEstimate { mean, std_error: (var / n as f64).sqrt(), n_samples: n, seed }
    }

    pub const CSV_HEADER: &'static str = "d,n_samples,seed,mean,std_error";

    pub fn csv_row(&self, d: usize) -> String {
        format!("{},{},{},{:?},{:?}", d, self.n_samples, self.seed, self.mean, self.std_error)
    }
}

pub const MIN_SAMPLES: usize = 100;

/// Uniform-measure average of a state functional.
pub fn average<F>(f: F, d: usize, n_samples: usize, seed: u64) -> Result<MonteCarloEstimate>
where
    F: Fn(&QuditState) -> f64 + Sync,
{
    let values = sample_values(f, d, n_samples, seed)?;
    Ok(MonteCarloEstimate::from_samples(&values, seed))
}

/// Evaluates `f` on sample states `0..n_samples`, returned in index order.
pub fn sample_values<T, F>(f: F, d: usize, n_samples: usize, seed: u64) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&QuditState) -> T + Sync,
{
    if d < 2 {
        return domain(format!("qudit dimension must be at least 2, got {d}"));
    }
    if n_samples < MIN_SAMPLES {
        return domain(format!("need at least {MIN_SAMPLES} samples, got {n_samples}"));
    }
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|i| f(&sample_uniform(d, &mut sample_rng(seed, i))))
        .collect())
}
