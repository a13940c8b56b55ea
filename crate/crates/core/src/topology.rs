//! Coupling matrices for spin networks.
//!
//! Hypercubes are g-fold Cartesian powers of a 2-site or 3-site path. Vertices
//! are numbered by the base-(θ+1) digit string of their coordinates with the
//! first factor as the most significant digit, so reflecting every digit maps
//! vertex `m` to `N₀ + 1 − m` (1-based). Site indices are 0-based inside this
//! crate; the 1-based convention only appears in [`antipodal_pairs`] and in
//! the text formats.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::spin::Spin;

/// Largest network the dense routines accept by default.
pub const DEFAULT_SITE_CAP: usize = 4096;

/// The basic block of a hypercube: the 2-site path (θ = 1) or the 3-site path (θ = 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathBlock {
    Two,
    Three,
}

impl PathBlock {
    pub fn from_theta(theta: u32) -> Result<Self> {
        match theta {
            1 => Ok(PathBlock::Two),
            2 => Ok(PathBlock::Three),
            _ => domain(format!("path block selector theta must be 1 or 2, got {theta}")),
        }
    }

    pub fn theta(self) -> u32 {
        match self {
            PathBlock::Two => 1,
            PathBlock::Three => 2,
        }
    }

    pub fn sites(self) -> usize {
        self.theta() as usize + 1
    }
}

/// Real symmetric, zero-diagonal, nonnegative matrix of inter-site couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Validates and wraps a dense matrix.
    pub fn from_dense(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return domain(format!(
                "coupling matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        for u in 0..n {
            if entries[(u, u)] != 0.0 {
                return domain(format!("nonzero diagonal entry at site {}", u + 1));
            }
            for v in 0..n {
                let k = entries[(u, v)];
                if !k.is_finite() || k < 0.0 {
                    return domain(format!("coupling ({}, {}) = {k} is not a finite nonnegative number", u + 1, v + 1));
                }
                if k != entries[(v, u)] {
                    return domain(format!("coupling matrix is not symmetric at ({}, {})", u + 1, v + 1));
                }
            }
        }
        Ok(CouplingMatrix { entries })
    }

    pub fn n_sites(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.entries[(u, v)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// K = κ·A.
    pub fn scale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return domain(format!("coupling strength must be positive, got {kappa}"));
        }
        Ok(CouplingMatrix { entries: &self.entries * kappa })
    }

    /// Row sums, i.e. the weighted degree of every site.
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// Reads either a dense matrix (rows of whitespace/comma separated numbers)
    /// or an edge list of `u v weight` lines with 1-based sites. A file is an
    /// edge list when every data line has exactly three fields and the first
    /// two are integers, and it is not a valid 3×3 dense matrix.
    pub fn parse(text: &str) -> Result<Self> {
        let rows = data_lines(text);
        let dense_shaped = !rows.is_empty() && rows.iter().all(|(_, f)| f.len() == rows.len());
        if dense_shaped {
            if let Ok(m) = Self::parse_dense(text) {
                return Ok(m);
            }
        }
        if rows.iter().all(|(_, f)| f.len() == 3) {
            return Self::parse_edge_list(text);
        }
        Self::parse_dense(text)
    }

    pub fn parse_dense(text: &str) -> Result<Self> {
        let rows = data_lines(text);
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse { line: 0, msg: "no matrix rows found".into() });
        }
        let mut entries = DMatrix::zeros(n, n);
        for (r, (line, fields)) in rows.iter().enumerate() {
            if fields.len() != n {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("expected {n} entries, found {}", fields.len()),
                });
            }
            for (c, f) in fields.iter().enumerate() {
                entries[(r, c)] = parse_number(f, *line)?;
            }
        }
        Self::from_dense(entries)
    }

    /// Parses `u v weight` lines. The site count is the largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let rows = data_lines(text);
        let mut edges = Vec::with_capacity(rows.len());
        let mut n = 0usize;
        for (line, fields) in &rows {
            if fields.len() != 3 {
                return Err(Error::Parse { line: *line, msg: "expected `u v weight`".into() });
            }
            let site = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .ok()
                    .filter(|&u| u >= 1)
                    .ok_or_else(|| Error::Parse { line: *line, msg: format!("bad 1-based site index `{s}`") })
            };
            let (u, v) = (site(fields[0])?, site(fields[1])?);
            if u == v {
                return Err(Error::Parse { line: *line, msg: "self-coupling is not allowed".into() });
            }
            let w = parse_number(fields[2], *line)?;
            n = n.max(u).max(v);
            edges.push((u - 1, v - 1, w));
        }
        if n == 0 {
            return Err(Error::Parse { line: 0, msg: "no edges found".into() });
        }
        let mut entries = DMatrix::zeros(n, n);
        for (u, v, w) in edges {
            entries[(u, v)] = w;
            entries[(v, u)] = w;
        }
        Self::from_dense(entries)
    }

    /// Dense text format accepted by [`CouplingMatrix::parse_dense`].
    pub fn to_dense_text(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let fields: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }
}

fn data_lines(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                return None;
            }
            let fields: Vec<&str> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            Some((i + 1, fields))
        })
        .collect()
}

fn parse_number(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("`{s}` is not a number") })
}

/// Unit-weight adjacency of the (θ+1)-site path.
pub fn path_adjacency(theta: u32) -> Result<CouplingMatrix> {
    let n = PathBlock::from_theta(theta)?.sites();
    Ok(path_matrix(n, |_| 1.0))
}

fn path_matrix(n: usize, coupling: impl Fn(usize) -> f64) -> CouplingMatrix {
    let mut k = DMatrix::zeros(n, n);
    for u in 0..n.saturating_sub(1) {
        let c = coupling(u + 1);
        k[(u, u + 1)] = c;
        k[(u + 1, u)] = c;
    }
    CouplingMatrix { entries: k }
}

/// A(G) = Σ_j I^{⊗j} ⊗ A(block) ⊗ I^{⊗(g−j−1)}, capped at [`DEFAULT_SITE_CAP`] sites.
pub fn cartesian_power(block: &CouplingMatrix, g: usize) -> Result<CouplingMatrix> {
    cartesian_power_capped(block, g, DEFAULT_SITE_CAP)
}

pub fn cartesian_power_capped(block: &CouplingMatrix, g: usize, cap: usize) -> Result<CouplingMatrix> {
    if g == 0 {
        return domain("fold count g must be at least 1");
    }
    let b = block.n_sites();
    let size = (b as u128).checked_pow(g as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::Size { what: format!("{g}-fold Cartesian power of a {b}-site block"), size, cap: cap as u128 });
    }
    let n = size as usize;
    let mut k = DMatrix::zeros(n, n);
    // Factor j owns digit position j counted from the most significant end.
    for j in 0..g {
        let stride = b.pow((g - j - 1) as u32);
        for row in 0..n {
            let digit = (row / stride) % b;
            for other in 0..b {
                let w = block.get(digit, other);
                if w != 0.0 {
                    let col = row - digit * stride + other * stride;
                    k[(row, col)] += w;
                }
            }
        }
    }
    Ok(CouplingMatrix { entries: k })
}

/// Mirror-symmetric chain with K = g₀·L_x for a fictitious spin L = (N₀−1)/2,
/// i.e. κ_u = (g₀/2)·√(u(N₀−u)) between sites u and u+1.
pub fn engineered_chain(n0: usize, g0: f64) -> Result<CouplingMatrix> {
    if n0 < 2 {
        return domain(format!("chain needs at least 2 sites, got {n0}"));
    }
    if !(g0 > 0.0) || !g0.is_finite() {
        return domain(format!("coupling parameter g0 must be positive, got {g0}"));
    }
    Ok(path_matrix(n0, |u| 0.5 * g0 * ((u * (n0 - u)) as f64).sqrt()))
}

pub fn uniform_chain(n0: usize, kappa: f64) -> Result<CouplingMatrix> {
    if n0 < 2 {
        return domain(format!("chain needs at least 2 sites, got {n0}"));
    }
    path_matrix(n0, |_| 1.0).scale(kappa)
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkKind {
    Hypercube { block: PathBlock, g: usize },
    UniformChain { n0: usize },
    EngineeredChain { n0: usize },
    /// User adjacency; the coupling matrix is κ times this matrix.
    Custom(CouplingMatrix),
}

/// A network together with its coupling scale and site spin.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    /// κ for hypercubes, uniform chains and custom adjacencies.
    pub kappa: f64,
    /// g₀ for engineered chains.
    pub g0: f64,
    pub s0: Spin,
}

impl NetworkSpec {
    pub fn hypercube(theta: u32, g: usize, kappa: f64, s0: Spin) -> Result<Self> {
        let block = PathBlock::from_theta(theta)?;
        if g == 0 {
            return domain("fold count g must be at least 1");
        }
        check_positive("kappa", kappa)?;
        Ok(NetworkSpec { kind: NetworkKind::Hypercube { block, g }, kappa, g0: 1.0, s0 })
    }

    pub fn engineered_chain(n0: usize, g0: f64, s0: Spin) -> Result<Self> {
        if n0 < 2 {
            return domain(format!("chain needs at least 2 sites, got {n0}"));
        }
        check_positive("g0", g0)?;
        Ok(NetworkSpec { kind: NetworkKind::EngineeredChain { n0 }, kappa: 1.0, g0, s0 })
    }

    pub fn uniform_chain(n0: usize, kappa: f64, s0: Spin) -> Result<Self> {
        if n0 < 2 {
            return domain(format!("chain needs at least 2 sites, got {n0}"));
        }
        check_positive("kappa", kappa)?;
        Ok(NetworkSpec { kind: NetworkKind::UniformChain { n0 }, kappa, g0: 1.0, s0 })
    }

    pub fn custom(adjacency: CouplingMatrix, kappa: f64, s0: Spin) -> Result<Self> {
        check_positive("kappa", kappa)?;
        Ok(NetworkSpec { kind: NetworkKind::Custom(adjacency), kappa, g0: 1.0, s0 })
    }

    pub fn with_spin(&self, s0: Spin) -> Self {
        NetworkSpec { s0, ..self.clone() }
    }

    pub fn n_sites(&self) -> usize {
        match &self.kind {
            NetworkKind::Hypercube { block, g } => block.sites().saturating_pow(*g as u32),
            NetworkKind::UniformChain { n0 } | NetworkKind::EngineeredChain { n0 } => *n0,
            NetworkKind::Custom(a) => a.n_sites(),
        }
    }

    pub fn coupling_matrix(&self) -> Result<CouplingMatrix> {
        match &self.kind {
            NetworkKind::Hypercube { block, g } => {
                cartesian_power(&path_adjacency(block.theta())?, *g)?.scale(self.kappa)
            }
            NetworkKind::UniformChain { n0 } => uniform_chain(*n0, self.kappa),
            NetworkKind::EngineeredChain { n0 } => engineered_chain(*n0, self.g0),
            NetworkKind::Custom(a) => a.scale(self.kappa),
        }
    }

    /// Short label without commas, usable as a CSV field.
    pub fn label(&self) -> String {
        match &self.kind {
            NetworkKind::Hypercube { block, g } => format!("hypercube-t{}-g{}", block.theta(), g),
            NetworkKind::UniformChain { n0 } => format!("uniform-chain-N{n0}"),
            NetworkKind::EngineeredChain { n0 } => format!("engineered-chain-N{n0}"),
            NetworkKind::Custom(a) => format!("custom-N{}", a.n_sites()),
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (S0={}", self.label(), self.s0)?;
        match self.kind {
            NetworkKind::EngineeredChain { .. } => write!(f, ", g0={})", self.g0),
            _ => write!(f, ", kappa={})", self.kappa),
        }
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive, got {x}"))
    }
}

/// Sender/receiver pairs (m, m̄), 1-based, with m < m̄. A site that is its own
/// mirror (odd chains, hypercubes of the 3-path) is listed as (m, m).
pub fn antipodal_pairs(spec: &NetworkSpec) -> Result<Vec<(usize, usize)>> {
    match &spec.kind {
        NetworkKind::Hypercube { block, g } => {
            let b = block.sites();
            let n = spec.n_sites();
            let mut pairs = Vec::new();
            for m in 0..n {
                let mut rest = m;
                let mut mirror = 0;
                let mut place = 1;
                for _ in 0..*g {
                    let digit = rest % b;
                    mirror += (b - 1 - digit) * place;
                    rest /= b;
                    place *= b;
                }
                if m <= mirror {
                    pairs.push((m + 1, mirror + 1));
                }
            }
            Ok(pairs)
        }
        NetworkKind::UniformChain { n0 } | NetworkKind::EngineeredChain { n0 } => {
            Ok((1..=n0.div_ceil(2)).map(|m| (m, n0 + 1 - m)).collect())
        }
        NetworkKind::Custom(_) => Err(Error::Unsupported(
            "custom topologies have no canonical antipodes; designate the pair explicitly".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eigenvalues(k: &CouplingMatrix) -> Vec<f64> {
        let mut ev: Vec<f64> = k.as_matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn path_blocks() {
        let p2 = path_adjacency(1).unwrap();
        assert_eq!(p2.as_matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let p3 = path_adjacency(2).unwrap();
        assert_eq!(
            p3.as_matrix(),
            &DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        );
        let ev = eigenvalues(&p3);
        let r2 = 2f64.sqrt();
        for (a, b) in ev.iter().zip([-r2, 0.0, r2]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(matches!(path_adjacency(3), Err(Error::Domain(_))));
        assert!(path_adjacency(0).is_err());
    }

    #[test]
    fn square_is_four_cycle() {
        let sq = cartesian_power(&path_adjacency(1).unwrap(), 2).unwrap();
        // Digits (00, 01, 10, 11): 1-2, 1-3, 2-4, 3-4.
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 1., 0., 1., 0., 0., 1., 1., 0., 0., 1., 0., 1., 1., 0.],
        );
        assert_eq!(sq.as_matrix(), &expected);
    }

    #[test]
    fn cube_is_three_regular() {
        let cube = cartesian_power(&path_adjacency(1).unwrap(), 3).unwrap();
        assert_eq!(cube.n_sites(), 8);
        assert!(cube.row_sums().iter().all(|&s| s == 3.0));
        for g in 1..=6 {
            let h = cartesian_power(&path_adjacency(1).unwrap(), g).unwrap();
            assert!(h.row_sums().iter().all(|&s| s == g as f64));
        }
    }

    #[test]
    fn power_one_is_block() {
        let p3 = path_adjacency(2).unwrap();
        assert_eq!(cartesian_power(&p3, 1).unwrap(), p3);
        assert!(cartesian_power(&p3, 0).is_err());
    }

    #[test]
    fn size_cap() {
        let p2 = path_adjacency(1).unwrap();
        assert!(matches!(cartesian_power(&p2, 13), Err(Error::Size { .. })));
        assert!(cartesian_power(&p2, 12).is_ok());
        assert!(matches!(cartesian_power_capped(&p2, 4, 8), Err(Error::Size { .. })));
    }

    #[test]
    fn power_spectrum_is_sums_of_block_spectrum() {
        for theta in [1, 2] {
            let block = path_adjacency(theta).unwrap();
            let be = eigenvalues(&block);
            for g in 1..=3usize {
                let mut sums = vec![0.0];
                for _ in 0..g {
                    sums = sums.iter().flat_map(|s| be.iter().map(move |e| s + e)).collect();
                }
                sums.sort_by(f64::total_cmp);
                let direct = eigenvalues(&cartesian_power(&block, g).unwrap());
                for (a, b) in direct.iter().zip(&sums) {
                    assert_relative_eq!(*a, *b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn factor_order_permutation_similarity() {
        // Swapping two coordinate digits is a vertex permutation P with P A Pᵀ = A.
        for (theta, g) in [(1u32, 2usize), (2, 2), (1, 3), (2, 3)] {
            let b = theta as usize + 1;
            let a = cartesian_power(&path_adjacency(theta).unwrap(), g).unwrap();
            let n = a.n_sites();
            let swap_digits = |i: usize| -> usize {
                let mut digits: Vec<usize> = (0..g).map(|j| (i / b.pow((g - 1 - j) as u32)) % b).collect();
                digits.swap(0, g - 1);
                digits.iter().fold(0, |acc, d| acc * b + d)
            };
            for u in 0..n {
                for v in 0..n {
                    assert_eq!(a.get(u, v), a.get(swap_digits(u), swap_digits(v)));
                }
            }
        }
    }

    #[test]
    fn engineered_chain_couplings() {
        let k2 = engineered_chain(2, 1.0).unwrap();
        assert_relative_eq!(k2.get(0, 1), 0.5);
        let k8 = engineered_chain(8, 1.0).unwrap();
        assert_relative_eq!(k8.get(0, 1), 0.5 * 7f64.sqrt());
        assert_relative_eq!(k8.get(3, 4), 2.0);
        let k5 = engineered_chain(5, 2.0).unwrap();
        let c: Vec<f64> = (0..4).map(|u| k5.get(u, u + 1)).collect();
        let expected = [2.0, 6f64.sqrt(), 6f64.sqrt(), 2.0];
        for (a, b) in c.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        assert!(engineered_chain(1, 1.0).is_err());
        assert!(engineered_chain(4, 0.0).is_err());
    }

    #[test]
    fn engineered_chain_is_mirror_symmetric() {
        for n in 2..=16 {
            let k = engineered_chain(n, 1.3).unwrap();
            for u in 0..n {
                for v in 0..n {
                    assert_eq!(k.get(u, v), k.get(n - 1 - u, n - 1 - v));
                }
            }
        }
    }

    #[test]
    fn scaling() {
        let p2 = path_adjacency(1).unwrap();
        let s = p2.scale(2.0).unwrap();
        assert_eq!(s.as_matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        assert_eq!(p2.scale(1.0).unwrap(), p2);
        assert!(p2.scale(0.0).is_err());
        assert!(p2.scale(-1.0).is_err());
    }

    #[test]
    fn antipodes() {
        let s = Spin::HALF;
        let cube = NetworkSpec::hypercube(1, 3, 1.0, s).unwrap();
        let pairs = antipodal_pairs(&cube).unwrap();
        assert!(pairs.contains(&(1, 8)));
        assert_eq!(pairs.len(), 4);
        assert!(pairs.iter().all(|&(m, mb)| mb == 9 - m));

        let sq = NetworkSpec::hypercube(1, 2, 1.0, s).unwrap();
        assert_eq!(antipodal_pairs(&sq).unwrap(), vec![(1, 4), (2, 3)]);

        let chain = NetworkSpec::engineered_chain(8, 1.0, s).unwrap();
        assert_eq!(antipodal_pairs(&chain).unwrap(), vec![(1, 8), (2, 7), (3, 6), (4, 5)]);

        let h = NetworkSpec::hypercube(2, 3, 1.0, s).unwrap();
        assert!(antipodal_pairs(&h).unwrap().iter().all(|&(m, mb)| mb == 28 - m));

        let custom = NetworkSpec::custom(path_adjacency(1).unwrap(), 1.0, s).unwrap();
        assert!(matches!(antipodal_pairs(&custom), Err(Error::Unsupported(_))));
    }

    #[test]
    fn from_dense_validation() {
        assert!(CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[0., 1., 2., 0.])).is_err());
        assert!(CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[1., 1., 1., 0.])).is_err());
        assert!(CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[0., -1., -1., 0.])).is_err());
        assert!(CouplingMatrix::from_dense(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn text_formats() {
        let dense = "0, 1, 0\n1 0 2\n# comment\n0 2 0\n";
        let k = CouplingMatrix::parse(dense).unwrap();
        assert_eq!(k.get(1, 2), 2.0);
        let again = CouplingMatrix::parse_dense(&k.to_dense_text()).unwrap();
        assert_eq!(again, k);

        let edges = "1 2 1.5\n2 3 0.5\n3 4 1\n";
        let e = CouplingMatrix::parse(edges).unwrap();
        assert_eq!(e.n_sites(), 4);
        assert_eq!(e.get(0, 1), 1.5);
        assert_eq!(e.get(3, 2), 1.0);

        let bad = CouplingMatrix::parse_dense("0 1\n1\n");
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
        assert!(CouplingMatrix::parse_edge_list("1 1 2\n").is_err());
        assert!(CouplingMatrix::parse_edge_list("0 1 2\n").is_err());
    }

    #[test]
    fn disconnected_custom_is_legal() {
        let k = CouplingMatrix::parse_edge_list("1 2 1\n3 4 1\n").unwrap();
        assert_eq!(k.n_sites(), 4);
        assert_eq!(k.row_sums(), vec![1.0; 4]);
    }
}
