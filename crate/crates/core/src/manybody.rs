//! Exact spin-S₀ dynamics of the XX network, without the free-spin-wave
//! truncation.
//!
//! The Hamiltonian conserves the number of spin deviations (magnons), so it is
//! block diagonal. A sector holds every occupation vector (n₁…n_{N₀}) with
//! Σ n_u = n and 0 ≤ n_u ≤ 2S₀. Hopping a magnon from v to u carries the exact
//! ladder coefficient √((n_u+1)(2S₀−n_u))·√(n_v(2S₀−n_v+1)).
//!
//! States evolve forward in time with e^{−iHt}; in the one-magnon sector this
//! is the free propagator evaluated at −t.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::qudit::{sample_values, MonteCarloEstimate, QuditState};
use crate::spectral::{closed_form_time, diagonalize_symmetric, expected_swap_phase, SpectralForm};
use crate::spin::Spin;
use crate::topology::{CouplingMatrix, NetworkKind, NetworkSpec};

pub const DEFAULT_SECTOR_CAP: usize = 5_000_000;
/// Largest sector the dense eigensolver is asked to handle.
pub const DENSE_SECTOR_CAP: usize = 8192;

/// Number of compositions of `n` into `parts` parts each at most `cap`.
pub fn bounded_composition_count(parts: usize, n: usize, cap: usize) -> u128 {
    let mut ways = vec![0u128; n + 1];
    ways[0] = 1;
    for _ in 0..parts {
        let mut next = vec![0u128; n + 1];
        for (total, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for k in 0..=cap.min(n - total) {
                next[total + k] = next[total + k].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[n]
}

/// Occupation vectors of a fixed-magnon sector in descending lexicographic order.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_sites: usize,
    magnons: usize,
    cap: usize,
    states: Vec<u8>,
    index: HashMap<Box<[u8]>, usize>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn magnons(&self) -> usize {
        self.magnons
    }

    /// Per-site occupation cap 2S₀.
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i * self.n_sites..(i + 1) * self.n_sites]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.states.chunks_exact(self.n_sites)
    }

    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        self.index.get(occupations).copied()
    }
}

pub fn build_sector_basis(n0: usize, n: usize, s0: Spin) -> Result<SectorBasis> {
    build_sector_basis_capped(n0, n, s0, DEFAULT_SECTOR_CAP)
}

pub fn build_sector_basis_capped(n0: usize, n: usize, s0: Spin, limit: usize) -> Result<SectorBasis> {
    if n0 == 0 {
        return domain("network has no sites");
    }
    if n > u8::MAX as usize {
        return domain(format!("magnon number {n} exceeds the supported maximum of 255"));
    }
    let cap = (s0.twice() as usize).min(n);
    let count = bounded_composition_count(n0, n, cap);
    if count > limit as u128 {
        return Err(Error::Size { what: format!("sector basis (N0={n0}, n={n})"), size: count, cap: limit as u128 });
    }
    let mut states = Vec::with_capacity(count as usize * n0);
    let mut current = vec![0u8; n0];
    enumerate(&mut current, 0, n, cap, &mut states);
    let index = states.chunks_exact(n0).enumerate().map(|(i, s)| (Box::from(s), i)).collect();
    Ok(SectorBasis { n_sites: n0, magnons: n, cap: s0.twice() as usize, states, index })
}

fn enumerate(current: &mut [u8], site: usize, remaining: usize, cap: usize, out: &mut Vec<u8>) {
    let n0 = current.len();
    if site == n0 - 1 {
        if remaining <= cap {
            current[site] = remaining as u8;
            out.extend_from_slice(current);
        }
        return;
    }
    // Remaining sites can absorb at most (n0 - site - 1) * cap.
    let room = (n0 - site - 1) * cap;
    let lo = remaining.saturating_sub(room);
    for occ in (lo..=remaining.min(cap)).rev() {
        current[site] = occ as u8;
        enumerate(current, site + 1, remaining - occ, cap, out);
    }
    current[site] = 0;
}

/// The XX Hamiltonian restricted to one magnon sector.
#[derive(Clone, Debug)]
pub struct SectorHamiltonian {
    pub basis: SectorBasis,
    pub matrix: DMatrix<f64>,
}

pub fn build_sector_hamiltonian(k: &CouplingMatrix, s0: Spin, basis: SectorBasis) -> Result<SectorHamiltonian> {
    let n0 = k.n_sites();
    if basis.n_sites() != n0 {
        return domain(format!("basis has {} sites, coupling matrix has {n0}", basis.n_sites()));
    }
    if basis.cap() != s0.twice() as usize {
        return domain("basis was built for a different spin magnitude");
    }
    let dim = basis.len();
    let cap = s0.twice() as usize;
    let bonds: Vec<(usize, usize, f64)> = (0..n0)
        .flat_map(|u| (0..n0).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && k.get(u, v) != 0.0)
        .map(|(u, v)| (u, v, k.get(u, v)))
        .collect();
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut scratch = vec![0u8; n0];
    for j in 0..dim {
        scratch.copy_from_slice(basis.state(j));
        for &(u, v, kuv) in &bonds {
            let (nu, nv) = (scratch[u] as usize, scratch[v] as usize);
            if nv == 0 || nu >= cap {
                continue;
            }
            // S⁻_u S⁺_v moves one magnon from v to u. One square root of the
            // integer product keeps the matrix exactly symmetric and makes the
            // one-magnon block exactly 2S₀K.
            let ladder = (((nu + 1) * (cap - nu) * nv * (cap - nv + 1)) as f64).sqrt();
            scratch[u] += 1;
            scratch[v] -= 1;
            let i = basis.index_of(&scratch).expect("hop stays inside the sector");
            matrix[(i, j)] += kuv * ladder;
            scratch[u] -= 1;
            scratch[v] += 1;
        }
    }
    Ok(SectorHamiltonian { basis, matrix })
}

/// A sector Hamiltonian with its eigendecomposition, ready for repeated evolution.
#[derive(Clone, Debug)]
pub struct SectorDynamics {
    pub hamiltonian: SectorHamiltonian,
    spectral: SpectralForm,
}

impl SectorDynamics {
    pub fn new(hamiltonian: SectorHamiltonian) -> Result<Self> {
        let dim = hamiltonian.basis.len();
        if dim > DENSE_SECTOR_CAP {
            return Err(Error::Size {
                what: format!(
                    "dense sector eigendecomposition (N0={}, n={})",
                    hamiltonian.basis.n_sites(),
                    hamiltonian.basis.magnons()
                ),
                size: dim as u128,
                cap: DENSE_SECTOR_CAP as u128,
            });
        }
        let spectral = diagonalize_symmetric(&hamiltonian.matrix)?;
        Ok(SectorDynamics { hamiltonian, spectral })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.hamiltonian.basis
    }

    pub fn energies(&self) -> &DVector<f64> {
        self.spectral.eigenvalues()
    }

    /// Basis vector with the given occupations.
    pub fn basis_vector(&self, occupations: &[u8]) -> Option<DVector<Complex64>> {
        let i = self.basis().index_of(occupations)?;
        let mut v = DVector::zeros(self.basis().len());
        v[i] = Complex64::new(1.0, 0.0);
        Some(v)
    }
}

/// amplitudes ← Vᵀ e^{−iEt} V amplitudes.
pub fn evolve_sector(dynamics: &SectorDynamics, amplitudes: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
    let q = dynamics.spectral.q();
    if amplitudes.len() != q.ncols() {
        return domain(format!("amplitude vector has length {}, sector has {}", amplitudes.len(), q.ncols()));
    }
    let mut coeffs: Vec<Complex64> = (0..q.nrows())
        .map(|r| q.row(r).iter().zip(amplitudes.iter()).map(|(&a, &c)| c * a).sum())
        .collect();
    for (c, &e) in coeffs.iter_mut().zip(dynamics.energies().iter()) {
        *c *= Complex64::from_polar(1.0, -e * t);
    }
    Ok(DVector::from_iterator(
        q.ncols(),
        (0..q.ncols()).map(|s| coeffs.iter().enumerate().map(|(r, &c)| c * q[(r, s)]).sum()),
    ))
}

/// Sector dynamics for magnon numbers 0…max_n of one network and spin.
#[derive(Clone, Debug)]
pub struct SectorSet {
    pub s0: Spin,
    sectors: Vec<SectorDynamics>,
}

impl SectorSet {
    pub fn build(k: &CouplingMatrix, s0: Spin, max_n: usize) -> Result<Self> {
        let sectors = (0..=max_n)
            .map(|n| {
                let basis = build_sector_basis(k.n_sites(), n, s0)?;
                SectorDynamics::new(build_sector_hamiltonian(k, s0, basis)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SectorSet { s0, sectors })
    }

    pub fn max_magnons(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn sector(&self, n: usize) -> &SectorDynamics {
        &self.sectors[n]
    }
}

/// Sent state C_ν on the sender site, every other site in its vacuum.
#[derive(Clone, Debug)]
pub struct EncodedInput {
    pub sender: usize,
    pub state: QuditState,
}

impl EncodedInput {
    pub fn new(sender: usize, state: QuditState, s0: Spin) -> Result<Self> {
        if state.d() - 1 > s0.twice() as usize {
            return domain(format!("a spin-{s0} site has no level {} (d = {})", state.d() - 1, state.d()));
        }
        Ok(EncodedInput { sender, state })
    }

    /// C_ν times the sector-ν basis vector with ν magnons on the sender.
    pub fn sector_component(&self, nu: usize, basis: &SectorBasis) -> Result<DVector<Complex64>> {
        if basis.magnons() != nu || self.sender >= basis.n_sites() {
            return domain("sector does not match the requested level or sender");
        }
        let mut occ = vec![0u8; basis.n_sites()];
        occ[self.sender] = nu as u8;
        let i = basis.index_of(&occ).ok_or_else(|| Error::Domain(format!("level {nu} exceeds the site cap")))?;
        let mut v = DVector::zeros(basis.len());
        v[i] = self.state.amplitudes()[nu];
        Ok(v)
    }
}

/// Visits every pair of basis states (sector a+k, state i) and (sector b+k,
/// state j) that have `a` and `b` magnons on the receiver and the same
/// occupations elsewhere; `k` is the environment magnon count.
fn for_each_receiver_pair(
    bases: &[&SectorBasis],
    receiver: usize,
    d: usize,
    mut visit: impl FnMut(usize, usize, usize, usize, usize),
) {
    let mut key = Vec::new();
    for (nu, basis) in bases.iter().enumerate() {
        for (i, occ) in basis.iter().enumerate() {
            let a = occ[receiver] as usize;
            if a >= d {
                continue;
            }
            let env = nu - a;
            key.clear();
            key.extend_from_slice(occ);
            for b in 0..d {
                let nu2 = b + env;
                if nu2 >= bases.len() {
                    break;
                }
                key[receiver] = b as u8;
                if let Some(j) = bases[nu2].index_of(&key) {
                    visit(a, b, env, i, j);
                }
            }
        }
    }
}

/// Reduced d×d density matrix of the receiver site. `sectors[ν]` is the
/// evolved sector-ν component (already weighted by C_ν).
pub fn receiver_density_matrix(
    sectors: &[(&SectorBasis, &DVector<Complex64>)],
    receiver: usize,
    d: usize,
) -> Result<DMatrix<Complex64>> {
    if sectors.len() != d {
        return domain(format!("need {d} sectors, got {}", sectors.len()));
    }
    for (nu, (basis, amps)) in sectors.iter().enumerate() {
        if basis.magnons() != nu || amps.len() != basis.len() || receiver >= basis.n_sites() {
            return domain(format!("sector {nu} is inconsistent with its amplitudes or the receiver"));
        }
    }
    let bases: Vec<&SectorBasis> = sectors.iter().map(|(b, _)| *b).collect();
    let mut rho = DMatrix::zeros(d, d);
    for_each_receiver_pair(&bases, receiver, d, |a, b, env, i, j| {
        rho[(a, b)] += sectors[a + env].1[i] * sectors[b + env].1[j].conj();
    });
    Ok(rho)
}

/// ρ[ν,ν′] ← e^{−i(ν−ν′)φ} ρ[ν,ν′], undoing a per-magnon phase φ at the receiver.
pub fn gauge_correct(rho: &DMatrix<Complex64>, phase: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |a, b| {
        rho[(a, b)] * Complex64::from_polar(1.0, -(a as f64 - b as f64) * phase)
    })
}

/// F = ⟨φ|ρ|φ⟩.
pub fn fidelity(rho: &DMatrix<Complex64>, target: &QuditState) -> Result<f64> {
    let c = target.amplitudes();
    if rho.nrows() != c.len() || rho.ncols() != c.len() {
        return domain(format!("density matrix is {}x{}, state has d = {}", rho.nrows(), rho.ncols(), c.len()));
    }
    let mut f = Complex64::new(0.0, 0.0);
    for a in 0..c.len() {
        for b in 0..c.len() {
            f += c[a].conj() * rho[(a, b)] * c[b];
        }
    }
    Ok(f.re)
}

/// Transfer of a d-level state from `sender` to `receiver` over time `t`.
///
/// The evolved sector vectors do not depend on the sent amplitudes beyond an
/// overall C_ν, so the receiver matrix is assembled from kernels
/// M_k[a,b] = Σ_{|e|=k} ψ_{a+k}(a,e)·conj ψ_{b+k}(b,e) as
/// ρ[a,b] = Σ_k C_{a+k} conj(C_{b+k}) M_k[a,b].
#[derive(Clone, Debug)]
pub struct ExactTransfer {
    pub d: usize,
    pub sender: usize,
    pub receiver: usize,
    pub time: f64,
    /// Per-magnon phase a perfectly transferred state carries at the receiver.
    pub gauge_phase: f64,
    kernels: Vec<DMatrix<Complex64>>,
    evolved: Vec<DVector<Complex64>>,
}

impl ExactTransfer {
    pub fn new(sectors: &SectorSet, d: usize, sender: usize, receiver: usize, t: f64, gauge_phase: f64) -> Result<Self> {
        if d < 2 {
            return domain(format!("qudit dimension must be at least 2, got {d}"));
        }
        if d - 1 > sectors.s0.twice() as usize {
            return domain(format!("d = {d} needs 2S0 >= {}, got S0 = {}", d - 1, sectors.s0));
        }
        if sectors.max_magnons() + 1 < d {
            return domain(format!("sector set only reaches n = {}", sectors.max_magnons()));
        }
        let n0 = sectors.sector(0).basis().n_sites();
        if sender >= n0 || receiver >= n0 {
            return domain(format!("sites ({}, {}) out of range for {n0} sites", sender + 1, receiver + 1));
        }
        let evolved = (0..d)
            .map(|nu| {
                let sector = sectors.sector(nu);
                let mut occ = vec![0u8; n0];
                occ[sender] = nu as u8;
                let start = sector.basis_vector(&occ).expect("sender level fits the cap");
                evolve_sector(sector, &start, t)
            })
            .collect::<Result<Vec<_>>>()?;
        let bases: Vec<&SectorBasis> = (0..d).map(|nu| sectors.sector(nu).basis()).collect();
        let mut kernels = vec![DMatrix::zeros(d, d); d];
        for_each_receiver_pair(&bases, receiver, d, |a, b, env, i, j| {
            kernels[env][(a, b)] += evolved[a + env][i] * evolved[b + env][j].conj();
        });
        Ok(ExactTransfer { d, sender, receiver, time: t, gauge_phase, kernels, evolved })
    }

    /// Transfer from site 1 to its antipode with the closed-form gauge phase.
    pub fn for_network(spec: &NetworkSpec, sectors: &SectorSet, d: usize, t: f64) -> Result<Self> {
        let n0 = spec.n_sites();
        let receiver = match spec.kind {
            NetworkKind::Custom(_) => {
                return Err(Error::Unsupported("custom topologies need an explicit receiver".into()))
            }
            _ => n0 - 1,
        };
        Self::new(sectors, d, 0, receiver, t, receiver_gauge_phase(spec))
    }

    /// Evolved sector-ν vector for unit amplitude C_ν = 1.
    pub fn evolved_sector(&self, nu: usize) -> &DVector<Complex64> {
        &self.evolved[nu]
    }

    pub fn receiver_state(&self, state: &QuditState) -> DMatrix<Complex64> {
        let c = state.amplitudes();
        let d = self.d;
        DMatrix::from_fn(d, d, |a, b| {
            (0..d - a.max(b)).map(|k| c[a + k] * c[b + k].conj() * self.kernels[k][(a, b)]).sum()
        })
    }

    pub fn fidelity(&self, state: &QuditState, gauge: bool) -> f64 {
        let rho = self.receiver_state(state);
        let rho = if gauge { gauge_correct(&rho, self.gauge_phase) } else { rho };
        fidelity(&rho, state).expect("dimensions agree")
    }
}

/// Per-magnon receiver phase after forward evolution: the conjugate of the
/// propagator phase i^{θg} (hypercube) or i^{N₀−1} (engineered chain).
pub fn receiver_gauge_phase(spec: &NetworkSpec) -> f64 {
    expected_swap_phase(spec).map(|p| -p).unwrap_or(0.0)
}

/// Gauge-corrected and uncorrected average fidelity from the same samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactFidelity {
    pub corrected: MonteCarloEstimate,
    pub uncorrected: MonteCarloEstimate,
}

pub fn average_fidelity_exact(spec: &NetworkSpec, d: usize, t: f64, n_samples: usize, seed: u64) -> Result<ExactFidelity> {
    if d < 2 || d - 1 > spec.s0.twice() as usize {
        return domain(format!("d = {d} is not admissible for S0 = {}", spec.s0));
    }
    let sectors = SectorSet::build(&spec.coupling_matrix()?, spec.s0, d - 1)?;
    let transfer = ExactTransfer::for_network(spec, &sectors, d, t)?;
    average_transfer(&transfer, n_samples, seed)
}

pub fn average_transfer(transfer: &ExactTransfer, n_samples: usize, seed: u64) -> Result<ExactFidelity> {
    let pairs = sample_values(|s| (transfer.fidelity(s, true), transfer.fidelity(s, false)), transfer.d, n_samples, seed)?;
    let (corr, raw): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(ExactFidelity {
        corrected: MonteCarloEstimate::from_samples(&corr, seed),
        uncorrected: MonteCarloEstimate::from_samples(&raw, seed),
    })
}

/// One row of the spin-magnitude sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Row {
    pub topology: String,
    pub d: usize,
    pub s0: Spin,
    pub time: f64,
    pub estimate: MonteCarloEstimate,
    pub gauge_corrected: bool,
}

impl Fig2Row {
    pub const CSV_HEADER: &'static str = "topology,d,S0,t,mean_F,std_err,n_samples,seed,gauge_corrected";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{:?},{},{},{}",
            self.topology,
            self.d,
            self.s0.value(),
            self.time,
            self.estimate.mean,
            self.estimate.std_error,
            self.estimate.n_samples,
            self.estimate.seed,
            self.gauge_corrected
        )
    }
}

/// Smallest spin on the default grid that admits d levels: max((d−1)/2, 3/2).
pub fn smallest_admissible_spin(d: usize) -> Spin {
    Spin::from_twice((d as u32).saturating_sub(1).max(3)).expect("positive")
}

/// Average exact fidelity at the closed-form time for every (d, S₀) point.
/// Each S₀ builds its sectors once and shares them across all d. Rows are
/// ordered by d, then S₀, gauge-corrected row first.
pub fn fig2_sweep(spec: &NetworkSpec, ds: &[usize], spins: &[Spin], n_samples: usize, seed: u64) -> Result<Vec<Fig2Row>> {
    let max_d = ds.iter().copied().max().unwrap_or(0);
    let mut by_point: Vec<(usize, Spin, ExactFidelity, f64)> = Vec::new();
    for &s0 in spins {
        let admissible: Vec<usize> = ds.iter().copied().filter(|&d| d >= 2 && d - 1 <= s0.twice() as usize).collect();
        if admissible.len() != ds.len() {
            return domain(format!("S0 = {s0} cannot host d = {max_d} levels (need 2S0 >= d-1)"));
        }
        let at_spin = spec.with_spin(s0);
        let t = closed_form_time(&at_spin)?;
        let sectors = SectorSet::build(&at_spin.coupling_matrix()?, s0, max_d - 1)?;
        for &d in ds {
            let transfer = ExactTransfer::for_network(&at_spin, &sectors, d, t)?;
            by_point.push((d, s0, average_transfer(&transfer, n_samples, seed)?, t));
        }
    }
    by_point.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let label = spec.label();
    Ok(by_point
        .into_iter()
        .flat_map(|(d, s0, fid, t)| {
            [(fid.corrected, true), (fid.uncorrected, false)].map(|(estimate, gauge_corrected)| Fig2Row {
                topology: label.clone(),
                d,
                s0,
                time: t,
                estimate,
                gauge_corrected,
            })
        })
        .collect())
}

pub fn fig2_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", Fig2Row::CSV_HEADER);
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}
