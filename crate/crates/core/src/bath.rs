//! Pure dephasing of the transferred qudit by an antiferromagnetic spin bath
//! at low temperature (k_B = ħ = 1).
//!
//! The bath enters only through the decoherence factors D_{νν′} multiplying
//! the coherences of the received state. In the thermodynamic limit
//! D_{νν′} = exp(−(ν−ν′)²τ′²/τ_c²) with τ_c = π/(J₀√ξ₀); for a finite bath the
//! factor follows from the magnon integral f_±(φ) evaluated by quadrature.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::qudit::{average, MonteCarloEstimate, QuditState};
use crate::quad::{integrate, QuadOptions};
use crate::spectral::optimal_time_chain;
use crate::spin::Spin;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lattice {
    SimpleCubic,
    BodyCenteredCubic,
}

impl Lattice {
    /// Nearest-neighbour count z₀.
    pub fn coordination(self) -> u32 {
        match self {
            Lattice::SimpleCubic => 6,
            Lattice::BodyCenteredCubic => 8,
        }
    }

    /// γ_k = z₀⁻¹ Σ_δ e^{ik·δ}, lattice constant 1.
    pub fn structure_factor(self, k: [f64; 3]) -> f64 {
        match self {
            Lattice::SimpleCubic => (k[0].cos() + k[1].cos() + k[2].cos()) / 3.0,
            Lattice::BodyCenteredCubic => (0.5 * k[0]).cos() * (0.5 * k[1]).cos() * (0.5 * k[2]).cos(),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Lattice::SimpleCubic => "sc",
            Lattice::BodyCenteredCubic => "bcc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sc" | "simple-cubic" | "simplecubic" => Ok(Lattice::SimpleCubic),
            "bcc" | "body-centered-cubic" | "bodycenteredcubic" => Ok(Lattice::BodyCenteredCubic),
            _ => domain(format!("unknown lattice `{s}` (expected sc or bcc)")),
        }
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Tabulated Brillouin-zone average ζ of (1 − γ_k)⁻¹.
pub fn zeta(lattice: Lattice) -> f64 {
    match lattice {
        Lattice::SimpleCubic => 1.51638,
        Lattice::BodyCenteredCubic => 1.39320,
    }
}

pub const MIN_ZETA_RESOLUTION: usize = 32;

/// Recomputes ζ = ⟨(1 − γ_k)⁻¹⟩ over the zone.
///
/// The integral over the last axis is done in closed form,
/// ∫ du/2π (A − B cos u)⁻¹ = (A² − B²)^{−1/2}; the remaining square [0, π]² is
/// integrated by the midpoint rule in `resolution` points per axis after the
/// substitution u = π·s³(10 − 15s + 6s²), which flattens the k → 0 (and for
/// bcc, zone-corner) singularities.
pub fn zeta_integral(lattice: Lattice, resolution: usize) -> Result<f64> {
    if resolution < MIN_ZETA_RESOLUTION {
        return domain(format!("resolution must be at least {MIN_ZETA_RESOLUTION}, got {resolution}"));
    }
    let n = resolution;
    let nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            let u = PI * s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s);
            let w = 30.0 * PI * s * s * (1.0 - s).powi(2) / n as f64;
            (u, w)
        })
        .collect();
    let reduced = |u1: f64, u2: f64| -> f64 {
        match lattice {
            Lattice::SimpleCubic => {
                // (a − 1/3)(a + 1/3) with a = 1 − (cos u₁ + cos u₂)/3.
                let lo = 2.0 / 3.0 * ((0.5 * u1).sin().powi(2) + (0.5 * u2).sin().powi(2));
                let hi = (4.0 - u1.cos() - u2.cos()) / 3.0;
                (lo * hi).sqrt().recip()
            }
            Lattice::BodyCenteredCubic => {
                // 1 − cos²u₁ cos²u₂
                let q = u1.sin().powi(2) + u1.cos().powi(2) * u2.sin().powi(2);
                q.sqrt().recip()
            }
        }
    };
    let mut acc = 0.0;
    for &(u1, w1) in &nodes {
        let row: f64 = nodes.iter().map(|&(u2, w2)| w2 * reduced(u1, u2)).sum();
        acc += w1 * row;
    }
    let value = acc / (PI * PI);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("zeta integral for {lattice} is not finite")));
    }
    Ok(value)
}

/// T_N = z₀JS(S+1)/(3ζ).
pub fn neel_temperature(j: f64, s: Spin, lattice: Lattice) -> f64 {
    let s = s.value();
    f64::from(lattice.coordination()) * j * s * (s + 1.0) / (3.0 * zeta(lattice))
}

/// Bath and coupling parameters. Construction enforces T ≤ 0.1·T_N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    pub j: f64,
    pub j0: f64,
    pub s: Spin,
    pub lattice: Lattice,
    pub t: f64,
}

pub const MAX_T_OVER_TN: f64 = 0.1;

impl BathParams {
    pub fn new(j: f64, j0: f64, s: Spin, lattice: Lattice, t: f64) -> Result<Self> {
        if !(j > 0.0) || !j.is_finite() {
            return domain(format!("exchange J must be positive, got {j}"));
        }
        if !(j0 >= 0.0) || !j0.is_finite() {
            return domain(format!("channel-bath coupling J0 must be nonnegative, got {j0}"));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return domain(format!("temperature must be nonnegative, got {t}"));
        }
        let tn = neel_temperature(j, s, lattice);
        if t > MAX_T_OVER_TN * tn * (1.0 + 1e-9) {
            return Err(Error::Validation(format!(
                "T = {t} exceeds the spin-wave validity window T <= {MAX_T_OVER_TN} T_N = {}",
                MAX_T_OVER_TN * tn
            )));
        }
        Ok(BathParams { j, j0, s, lattice, t })
    }

    /// Parameters at temperature `fraction`·T_N.
    pub fn at_neel_fraction(j: f64, j0: f64, s: Spin, lattice: Lattice, fraction: f64) -> Result<Self> {
        Self::new(j, j0, s, lattice, fraction * neel_temperature(j, s, lattice))
    }

    pub fn z0(&self) -> f64 {
        f64::from(self.lattice.coordination())
    }

    pub fn neel_temperature(&self) -> f64 {
        neel_temperature(self.j, self.s, self.lattice)
    }

    /// Magnon velocity √(2z₀)·J·S in ω = v·(kl).
    pub fn magnon_velocity(&self) -> f64 {
        (2.0 * self.z0()).sqrt() * self.j * self.s.value()
    }
}

/// ω_k = z₀JS√(1 − γ_k²).
pub fn dispersion_exact(k: [f64; 3], params: &BathParams) -> f64 {
    let g = params.lattice.structure_factor(k);
    params.z0() * params.j * params.s.value() * (1.0 - g * g).max(0.0).sqrt()
}

/// Long-wavelength branch ω = √(2z₀)·J·S·x with x = kl.
pub fn dispersion_linear(x: f64, params: &BathParams) -> f64 {
    params.magnon_velocity() * x
}

/// ξ₀ = π²T³ / (12 z₀ √(2z₀) J³ S³).
pub fn xi0(params: &BathParams) -> f64 {
    let z0 = params.z0();
    PI * PI * params.t.powi(3) / (12.0 * z0 * (2.0 * z0).sqrt() * params.j.powi(3) * params.s.value().powi(3))
}

/// f_±(φ) = ∫₀^∞ x² ln[(1 − e^{±iφ}e^{−ω/T}) / (1 − e^{−ω/T})] dx on the
/// linear branch, truncated where e^{−ω/T} < 10⁻¹⁶.
pub fn f_pm_quadrature(phi: f64, params: &BathParams) -> Result<(Complex64, Complex64)> {
    if !phi.is_finite() {
        return domain(format!("phase must be finite, got {phi}"));
    }
    if !(params.t > 0.0) {
        return domain("f± quadrature needs T > 0");
    }
    if phi == 0.0 {
        let zero = Complex64::new(0.0, 0.0);
        return Ok((zero, zero));
    }
    let a = params.magnon_velocity() / params.t;
    let x_max = 16.0 * LN_10 / a * 1.01;
    // ratio = 1 + w, w = z(1 − e^{iφ})/(1 − z), z = e^{−ax}
    let (one_minus_cos, sin) = (2.0 * (0.5 * phi).sin().powi(2), phi.sin());
    let w = move |x: f64| -> (f64, f64) {
        let z = (-a * x).exp();
        let scale = z / -(-a * x).exp_m1();
        (scale * one_minus_cos, -scale * sin)
    };
    let opts = QuadOptions::default();
    let re = integrate(
        |x| {
            let (wr, wi) = w(x);
            x * x * 0.5 * (2.0 * wr + wr * wr + wi * wi).ln_1p()
        },
        0.0,
        x_max,
        opts,
    )?;
    let im = integrate(
        |x| {
            let (wr, wi) = w(x);
            x * x * wi.atan2(1.0 + wr)
        },
        0.0,
        x_max,
        opts,
    )?;
    let plus = Complex64::new(re.value, im.value);
    Ok((plus, plus.conj()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DephasingMode {
    ThermodynamicLimit,
    /// Finite bath with N spins per sublattice.
    FiniteN(f64),
}

/// Bath parameters bound to a transfer time and qudit dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingModel {
    pub params: BathParams,
    pub tau_prime: f64,
    pub xi0: f64,
    pub tau_c: f64,
    pub d: usize,
}

impl DephasingModel {
    pub fn new(params: BathParams, tau_prime: f64, d: usize) -> Result<Self> {
        if d < 2 {
            return domain(format!("qudit dimension must be at least 2, got {d}"));
        }
        if !(tau_prime >= 0.0) || !tau_prime.is_finite() {
            return domain(format!("transfer time must be nonnegative, got {tau_prime}"));
        }
        let xi0 = xi0(&params);
        let tau_c = PI / (params.j0 * xi0.sqrt());
        Ok(DephasingModel { params, tau_prime, xi0, tau_c, d })
    }

    /// Exponent of D for a level difference Δ in the thermodynamic limit,
    /// Δ²ξ₀J₀²τ′²/π² (= Δ²τ′²/τ_c², finite even when τ_c is infinite).
    fn limit_exponent(&self, delta: f64) -> f64 {
        delta * delta * self.xi0 * (self.params.j0 * self.tau_prime / PI).powi(2)
    }

    pub fn decoherence_matrix(&self, mode: DephasingMode) -> Result<DecoherenceMatrix> {
        let by_gap = (0..self.d).map(|gap| decoherence_factor(0, gap, self, mode)).collect::<Result<Vec<f64>>>()?;
        Ok(DecoherenceMatrix { entries: DMatrix::from_fn(self.d, self.d, |a, b| by_gap[a.abs_diff(b)]) })
    }
}

/// D_{νν′} under the chosen bath treatment.
pub fn decoherence_factor(nu: usize, nu_prime: usize, model: &DephasingModel, mode: DephasingMode) -> Result<f64> {
    if nu == nu_prime {
        return Ok(1.0);
    }
    let delta = nu as f64 - nu_prime as f64;
    match mode {
        DephasingMode::ThermodynamicLimit => Ok((-model.limit_exponent(delta)).exp()),
        DephasingMode::FiniteN(n) => {
            if !(n >= 1.0) || !n.is_finite() {
                return domain(format!("bath size N must be at least 1, got {n}"));
            }
            let p = &model.params;
            let phi = delta * p.j0 * model.tau_prime / n.sqrt();
            if phi == 0.0 || p.t == 0.0 {
                return Ok(1.0);
            }
            let (fp, fm) = f_pm_quadrature(phi, p)?;
            let xi_sum = (fp + fm).re / (phi * phi);
            Ok((-xi_sum * (delta * p.j0 * model.tau_prime).powi(2) / (2.0 * PI * PI)).exp())
        }
    }
}

/// Symmetric d×d matrix of factors with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceMatrix {
    entries: DMatrix<f64>,
}

impl DecoherenceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let d = entries.nrows();
        if d < 2 || entries.ncols() != d {
            return domain("decoherence matrix must be square with d >= 2");
        }
        for a in 0..d {
            if entries[(a, a)] != 1.0 {
                return domain("decoherence matrix must have a unit diagonal");
            }
            for b in 0..d {
                let x = entries[(a, b)];
                if !(0.0..=1.0).contains(&x) || x != entries[(b, a)] {
                    return domain(format!("entry ({a}, {b}) = {x} is not a symmetric factor in [0, 1]"));
                }
            }
        }
        Ok(DecoherenceMatrix { entries })
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// F = Σ_{νν′} |C_ν|²|C_ν′|² D_{νν′}.
pub fn fidelity_dephased(state: &QuditState, dmat: &DecoherenceMatrix) -> Result<f64> {
    if state.d() != dmat.d() {
        return domain(format!("state has d = {}, decoherence matrix has d = {}", state.d(), dmat.d()));
    }
    let p = state.populations();
    Ok((0..p.len()).map(|a| (0..p.len()).map(|b| p[a] * p[b] * dmat.get(a, b)).sum::<f64>()).sum())
}

/// Closed-form uniform average: Σ (1 + δ_{νν′}) D_{νν′} / (d(d+1)).
pub fn average_fidelity_dephased(dmat: &DecoherenceMatrix) -> f64 {
    let d = dmat.d();
    let total: f64 = (0..d).map(|a| (0..d).map(|b| if a == b { 2.0 } else { dmat.get(a, b) }).sum::<f64>()).sum();
    total / (d * (d + 1)) as f64
}

/// Monte Carlo counterpart of [`average_fidelity_dephased`].
pub fn average_fidelity_dephased_mc(dmat: &DecoherenceMatrix, n_samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    average(|s| fidelity_dephased(s, dmat).expect("dimension checked"), dmat.d(), n_samples, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    /// Sweep J₀ at g₀ = J, T = 0.05 T_N.
    A,
    /// Sweep T at g₀ = J, S = 1/2.
    B,
    /// Sweep g₀ at J₀ = 5000 J, S = 1/2.
    C,
}

impl Panel {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Panel::A),
            "b" => Ok(Panel::B),
            "c" => Ok(Panel::C),
            _ => domain(format!("unknown panel `{s}` (expected a, b or c)")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Panel::A => "a",
            Panel::B => "b",
            Panel::C => "c",
        }
    }

    pub fn sweep_var(self) -> &'static str {
        match self {
            Panel::A => "J0",
            Panel::B => "T",
            Panel::C => "g0",
        }
    }
}

/// Parameters of one dephasing sweep. Energies are in units of `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Config {
    pub panel: Panel,
    pub ds: Vec<usize>,
    pub lattice: Lattice,
    pub j: f64,
    pub s: Spin,
    /// Channel spin; enters only through τ′ = π/(2S₀g₀).
    pub s0: Spin,
    /// Fixed J₀ for panels b and c.
    pub j0: f64,
    /// Fixed g₀ for panels a and b.
    pub g0: f64,
    /// Fixed T/T_N for panels a and c.
    pub t_over_tn: f64,
    /// Sweep range; panel b sweeps T/T_N, the others J₀/J and g₀/J.
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub mode: DephasingMode,
}

impl Fig3Config {
    pub fn defaults(panel: Panel) -> Self {
        let (j0, min, max) = match panel {
            Panel::A => (0.0, 0.0, 500.0),
            Panel::B => (200.0, 0.01, 0.1),
            Panel::C => (5000.0, 6.0, 60.0),
        };
        Fig3Config {
            panel,
            ds: vec![3, 5],
            lattice: Lattice::SimpleCubic,
            j: 1.0,
            s: Spin::HALF,
            s0: Spin::HALF,
            j0,
            g0: 1.0,
            t_over_tn: 0.05,
            min,
            max,
            points: 101,
            mode: DephasingMode::ThermodynamicLimit,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|i| if i + 1 == self.points { self.max } else { self.min + step * i as f64 }).collect()
    }

    /// (bath parameters, g₀) at one sweep value.
    fn point(&self, value: f64) -> Result<(BathParams, f64)> {
        let j = self.j;
        match self.panel {
            Panel::A => Ok((BathParams::at_neel_fraction(j, value * j, self.s, self.lattice, self.t_over_tn)?, self.g0 * j)),
            Panel::B => Ok((BathParams::at_neel_fraction(j, self.j0 * j, self.s, self.lattice, value)?, self.g0 * j)),
            Panel::C => Ok((BathParams::at_neel_fraction(j, self.j0 * j, self.s, self.lattice, self.t_over_tn)?, value * j)),
        }
    }

    /// `key = value` lines describing the resolved sweep.
    pub fn describe(&self) -> Vec<String> {
        let ds: Vec<String> = self.ds.iter().map(|d| d.to_string()).collect();
        vec![
            format!("panel = {}", self.panel.name()),
            format!("d = {}", ds.join(",")),
            format!("lattice = {}", self.lattice),
            format!("J = {}", self.j),
            format!("S = {}", self.s.value()),
            format!("S0 = {}", self.s0.value()),
            format!("J0 = {}", self.j0),
            format!("g0 = {}", self.g0),
            format!("T_over_TN = {}", self.t_over_tn),
            format!("T_N = {}", neel_temperature(self.j, self.s, self.lattice)),
            format!("sweep = {} in [{}, {}] x {}", self.panel.sweep_var(), self.min, self.max, self.points),
            format!(
                "mode = {}",
                match self.mode {
                    DephasingMode::ThermodynamicLimit => "thermodynamic-limit".to_string(),
                    DephasingMode::FiniteN(n) => format!("finite-N {n}"),
                }
            ),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Row {
    pub panel: Panel,
    pub d: usize,
    /// Sweep value in units of J (panel b: temperature T/J).
    pub sweep_value: f64,
    pub s0: Spin,
    pub tau_prime: f64,
    pub tau_c: f64,
    pub avg_f: f64,
}

impl Fig3Row {
    pub const CSV_HEADER: &'static str = "panel,d,sweep_var,sweep_value,S0,tau_prime,tau_c,avg_F";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:?},{},{:?},{:?},{:?}",
            self.panel.name(),
            self.d,
            self.panel.sweep_var(),
            self.sweep_value,
            self.s0.value(),
            self.tau_prime,
            self.tau_c,
            self.avg_f
        )
    }
}

/// Closed-form average fidelity over the sweep grid, ordered by d then grid index.
pub fn fig3_sweeps(cfg: &Fig3Config) -> Result<Vec<Fig3Row>> {
    if cfg.points == 0 {
        return domain("sweep needs at least one point");
    }
    if cfg.ds.iter().any(|&d| d < 2) {
        return domain("every d must be at least 2");
    }
    let mut rows = Vec::with_capacity(cfg.ds.len() * cfg.points);
    for &d in &cfg.ds {
        for value in cfg.grid() {
            let (params, g0) = cfg.point(value)?;
            let tau_prime = optimal_time_chain(cfg.s0, g0);
            let model = DephasingModel::new(params, tau_prime, d)?;
            let dmat = model.decoherence_matrix(cfg.mode)?;
            let sweep_value = match cfg.panel {
                Panel::A => params.j0 / cfg.j,
                Panel::B => params.t / cfg.j,
                Panel::C => g0 / cfg.j,
            };
            rows.push(Fig3Row {
                panel: cfg.panel,
                d,
                sweep_value,
                s0: cfg.s0,
                tau_prime: tau_prime * cfg.j,
                tau_c: model.tau_c * cfg.j,
                avg_f: average_fidelity_dephased(&dmat),
            });
        }
    }
    Ok(rows)
}

pub fn fig3_csv(cfg: &Fig3Config, rows: &[Fig3Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", cfg.describe().join("; "));
    let _ = writeln!(out, "{}", Fig3Row::CSV_HEADER);
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sc_params(j0: f64, frac: f64) -> BathParams {
        BathParams::at_neel_fraction(1.0, j0, Spin::HALF, Lattice::SimpleCubic, frac).unwrap()
    }

    #[test]
    fn structure_factor_and_dispersion() {
        for lat in [Lattice::SimpleCubic, Lattice::BodyCenteredCubic] {
            assert_eq!(lat.structure_factor([0.0; 3]), 1.0);
            let p = BathParams::new(1.0, 1.0, Spin::HALF, lat, 0.0).unwrap();
            assert_eq!(dispersion_exact([0.0; 3], &p), 0.0);
            // Along an axis and along a diagonal the ratio to the linear branch tends to 1.
            for dir in [[1.0_f64, 0.0, 0.0], [1.0, 1.0, 1.0]] {
                let norm = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
                let norm = norm.sqrt();
                let mut last = f64::INFINITY;
                for x in [1e-1, 1e-2, 1e-3] {
                    let k = dir.map(|c| c * x / norm);
                    let ratio = dispersion_exact(k, &p) / dispersion_linear(x, &p);
                    let err = (ratio - 1.0).abs();
                    assert!(err < last);
                    last = err;
                }
                assert!(last < 1e-5, "{lat}: {last}");
            }
        }
    }

    #[test]
    fn xi0_values() {
        let p = BathParams { j: 1.0, j0: 1.0, s: Spin::from_twice(2).unwrap(), lattice: Lattice::SimpleCubic, t: 1.0 };
        assert_relative_eq!(xi0(&p), PI * PI / (12.0 * 6.0 * 12f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(xi0(&p), 0.039_570_7, max_relative = 1e-5);
        let hot = BathParams { t: 2.0, ..p };
        assert_relative_eq!(xi0(&hot), 8.0 * xi0(&p), max_relative = 1e-14);
        assert_eq!(xi0(&BathParams { t: 0.0, ..p }), 0.0);
    }

    #[test]
    fn neel_and_zeta_constants() {
        assert_eq!(zeta(Lattice::SimpleCubic), 1.51638);
        assert_eq!(zeta(Lattice::BodyCenteredCubic), 1.39320);
        let tn = neel_temperature(1.0, Spin::HALF, Lattice::SimpleCubic);
        assert_relative_eq!(tn, 4.5 / (3.0 * 1.51638), max_relative = 1e-14);
        assert_relative_eq!(tn, 0.98919, max_relative = 1e-5);
    }

    #[test]
    fn validity_window() {
        let tn = neel_temperature(1.0, Spin::HALF, Lattice::SimpleCubic);
        assert!(BathParams::new(1.0, 1.0, Spin::HALF, Lattice::SimpleCubic, 0.1 * tn).is_ok());
        let r = BathParams::new(1.0, 1.0, Spin::HALF, Lattice::SimpleCubic, 0.11 * tn);
        assert!(matches!(r, Err(Error::Validation(_))));
        assert!(BathParams::new(0.0, 1.0, Spin::HALF, Lattice::SimpleCubic, 0.0).is_err());
        assert!(BathParams::new(1.0, -1.0, Spin::HALF, Lattice::SimpleCubic, 0.0).is_err());
    }

    #[test]
    fn f_pm_basics() {
        let p = sc_params(1.0, 0.05);
        let (fp, fm) = f_pm_quadrature(0.0, &p).unwrap();
        assert_eq!(fp, Complex64::new(0.0, 0.0));
        assert_eq!(fm, Complex64::new(0.0, 0.0));
        let (fp, fm) = f_pm_quadrature(0.7, &p).unwrap();
        assert_eq!(fm, fp.conj());
        assert!(fp.re > 0.0 && fp.im < 0.0);
        let cold = BathParams { t: 0.0, ..p };
        assert!(f_pm_quadrature(0.7, &cold).is_err());
    }

    #[test]
    fn f_pm_matches_series_at_finite_phase() {
        // Independent route: ln((1 − 2z cos φ + z²)/(1 − z)²) = 2Σ_n zⁿ(1 − cos nφ)/n, and
        // ∫ x² e^{−n a x} dx = 2/(n a)³, so f₊ + f₋ = (4/a³) Σ_n (1 − cos nφ)/n⁴.
        let p = sc_params(1.0, 0.07);
        let a = p.magnon_velocity() / p.t;
        for phi in [0.3, 1.0, 2.5] {
            let series: f64 = (1..200_000).map(|n| (1.0 - (n as f64 * phi).cos()) / (n as f64).powi(4)).sum();
            let expected = 4.0 / a.powi(3) * series;
            let (fp, fm) = f_pm_quadrature(phi, &p).unwrap();
            assert_relative_eq!((fp + fm).re, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn small_phase_limit_is_twice_xi0() {
        let p = sc_params(1.0, 0.05);
        let phi = 1e-3;
        let (fp, fm) = f_pm_quadrature(phi, &p).unwrap();
        let ratio = (fp + fm).re / (phi * phi) / (2.0 * xi0(&p));
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn decoherence_factor_limits() {
        let p = sc_params(1000.0, 0.05);
        let m = DephasingModel::new(p, PI, 3).unwrap();
        assert_relative_eq!(m.tau_c, PI / (p.j0 * m.xi0.sqrt()), max_relative = 1e-12);
        for mode in [DephasingMode::ThermodynamicLimit, DephasingMode::FiniteN(1e6)] {
            assert_eq!(decoherence_factor(1, 1, &m, mode).unwrap(), 1.0);
        }
        let cold = DephasingModel::new(BathParams { t: 0.0, ..p }, PI, 3).unwrap();
        for mode in [DephasingMode::ThermodynamicLimit, DephasingMode::FiniteN(1e6)] {
            assert_eq!(decoherence_factor(0, 2, &cold, mode).unwrap(), 1.0);
        }
        let limit = decoherence_factor(0, 1, &m, DephasingMode::ThermodynamicLimit).unwrap();
        assert_relative_eq!(limit, (-(PI / m.tau_c).powi(2)).exp(), max_relative = 1e-12);
        assert!(decoherence_factor(0, 1, &m, DephasingMode::FiniteN(0.5)).is_err());
    }

    #[test]
    fn finite_bath_converges_to_limit_in_the_exponent() {
        let p = sc_params(1000.0, 0.05);
        let m = DephasingModel::new(p, optimal_time_chain(Spin::HALF, 1.0), 3).unwrap();
        for gap in [1, 2] {
            let lim = -decoherence_factor(0, gap, &m, DephasingMode::ThermodynamicLimit).unwrap().ln();
            let fin = -decoherence_factor(0, gap, &m, DephasingMode::FiniteN(1e12)).unwrap().ln();
            assert!((fin / lim - 1.0).abs() < 5e-3, "gap {gap}: {fin} vs {lim}");
            // At N = 1e10 the deviation is about φ/π (1-2%), larger than the limit above.
            let coarse = -decoherence_factor(0, gap, &m, DephasingMode::FiniteN(1e10)).unwrap().ln();
            assert!((coarse / lim - 1.0).abs() > 5e-3);
            assert!((coarse / lim - 1.0).abs() < 3e-2);
        }
    }

    #[test]
    fn decoherence_matrix_structure() {
        let m = DephasingModel::new(sc_params(100.0, 0.08), PI, 4).unwrap();
        let dm = m.decoherence_matrix(DephasingMode::ThermodynamicLimit).unwrap();
        for a in 0..4 {
            assert_eq!(dm.get(a, a), 1.0);
            for b in 0..4 {
                assert_eq!(dm.get(a, b), dm.get(b, a));
                if b + 1 < 4 && b >= a {
                    assert!(dm.get(a, b + 1) <= dm.get(a, b));
                }
            }
        }
        let ratio = dm.get(0, 2).ln() / dm.get(0, 1).ln();
        assert!((ratio - 4.0).abs() < 1e-10);
        assert!(DecoherenceMatrix::new(dm.as_matrix().clone()).is_ok());
        let mut bad = dm.as_matrix().clone();
        bad[(0, 1)] = 0.5;
        assert!(DecoherenceMatrix::new(bad).is_err());
    }

    #[test]
    fn dephased_fidelity_examples() {
        let ones = DecoherenceMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let none = DecoherenceMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let equal = QuditState::normalized(vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert_relative_eq!(fidelity_dephased(&equal, &ones).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(fidelity_dephased(&equal, &none).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(fidelity_dephased(&QuditState::basis(3, 1).unwrap(), &none).unwrap(), 1.0);
        assert!(fidelity_dephased(&QuditState::basis(2, 0).unwrap(), &none).is_err());
        assert_relative_eq!(average_fidelity_dephased(&ones), 1.0, epsilon = 1e-15);
        assert_relative_eq!(average_fidelity_dephased(&none), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_average_matches_monte_carlo() {
        let none = DecoherenceMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let mc = average_fidelity_dephased_mc(&none, 20_000, 5).unwrap();
        assert!((mc.mean - 0.5).abs() < 3.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn zeta_converges() {
        for lat in [Lattice::SimpleCubic, Lattice::BodyCenteredCubic] {
            let coarse = (zeta_integral(lat, 32).unwrap() - zeta(lat)).abs();
            let fine = (zeta_integral(lat, 128).unwrap() - zeta(lat)).abs();
            assert!(fine < coarse);
            assert!(fine < 1e-4, "{lat}: {fine}");
        }
        assert!(zeta_integral(Lattice::SimpleCubic, 16).is_err());
    }

    #[test]
    fn fig3_defaults_are_monotone() {
        for panel in [Panel::A, Panel::B, Panel::C] {
            let cfg = Fig3Config::defaults(panel);
            let rows = fig3_sweeps(&cfg).unwrap();
            assert_eq!(rows.len(), 2 * 101);
            for d_rows in rows.chunks(101) {
                for w in d_rows.windows(2) {
                    match panel {
                        Panel::A | Panel::B => assert!(w[1].avg_f < w[0].avg_f, "{panel:?} {w:?}"),
                        Panel::C => assert!(w[1].avg_f > w[0].avg_f, "{panel:?} {w:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn fig3_rejects_hot_bath() {
        let cfg = Fig3Config { max: 0.2, ..Fig3Config::defaults(Panel::B) };
        assert!(matches!(fig3_sweeps(&cfg), Err(Error::Validation(_))));
    }
}
