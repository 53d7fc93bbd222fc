//! Couplings, longitudinal fields and Hamiltonian construction.
//!
//! Energies are in units of the nearest-neighbor coupling `J₀` and the chain
//! is open (no periodic wrap).

use std::path::Path;

use crate::error::{Error, Result};
use crate::spinspace::{check_sites, sector_indices, spin_at, StateVector, C64};

/// Symmetric `n×n` coupling matrix `J_{jj'}` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    j: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_sites(n)?;
        Ok(Self {
            n,
            j: vec![0.0; n * n],
        })
    }

    /// `J_{ab} = 1/|a−b|^α`.
    pub fn power_law(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power-law exponent must be positive, got {alpha}"
            )));
        }
        let mut c = Self::zeros(n)?;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    c.j[a * n + b] = (a.abs_diff(b) as f64).powf(-alpha);
                }
            }
        }
        Ok(c)
    }

    /// Nearest-neighbor-only chain with bond strength `j0`.
    pub fn nearest_neighbor(n: usize, j0: f64) -> Result<Self> {
        let mut c = Self::zeros(n)?;
        for a in 0..n.saturating_sub(1) {
            c.j[a * n + a + 1] = j0;
            c.j[(a + 1) * n + a] = j0;
        }
        Ok(c)
    }

    /// Validates a dense row-major matrix. Asymmetry beyond `1e-9` is
    /// rejected; the stored matrix is exactly symmetrized.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        check_sites(n)?;
        for (a, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::CouplingFormat {
                    line: a + 2,
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::CouplingFormat {
                    line: a + 2,
                    message: format!("non-finite entry {x}"),
                });
            }
        }
        let mut c = Self::zeros(n)?;
        for a in 0..n {
            if rows[a][a].abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "coupling diagonal must vanish, J[{a}][{a}] = {}",
                    rows[a][a]
                )));
            }
            for b in (a + 1)..n {
                let dev = (rows[a][b] - rows[b][a]).abs();
                if dev > 1e-9 {
                    return Err(Error::Asymmetric {
                        a,
                        b,
                        deviation: dev,
                    });
                }
                let v = 0.5 * (rows[a][b] + rows[b][a]);
                c.j[a * n + b] = v;
                c.j[b * n + a] = v;
            }
        }
        Ok(c)
    }

    /// Parses the coupling text format: first non-comment line `n`, then `n`
    /// rows of `n` whitespace-separated reals. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::CouplingFormat {
            line: 1,
            message: "missing site count".into(),
        })?;
        let n: usize = header.parse().map_err(|_| Error::CouplingFormat {
            line,
            message: format!("invalid site count {header:?}"),
        })?;
        check_sites(n)?;
        let mut rows = Vec::with_capacity(n);
        for (line, l) in lines {
            if rows.len() == n {
                return Err(Error::CouplingFormat {
                    line,
                    message: format!("more than {n} rows"),
                });
            }
            let row = l
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::CouplingFormat {
                        line,
                        message: format!("invalid number {tok:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(Error::CouplingFormat {
                    line,
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::CouplingFormat {
                line: text.lines().count(),
                message: format!("expected {n} rows, found {}", rows.len()),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for a in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|b| crate::export::format_number(self.get(a, b)))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coupling between 0-based sites `a` and `b`.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.j[a * self.n + b]
    }

    /// Coupling between 1-based sites.
    pub fn site(&self, a: usize, b: usize) -> f64 {
        self.get(a - 1, b - 1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            j: self.j.iter().map(|x| x * factor).collect(),
        }
    }

    /// Nonzero couplings `(a, b, J_ab)` with `a < b`, 0-based.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |a| {
            ((a + 1)..self.n)
                .map(move |b| (a, b, self.get(a, b)))
                .filter(|&(_, _, v)| v != 0.0)
        })
    }

    /// Log-log least-squares fit `J ≈ J₀/d^α` over all positive couplings.
    /// Returns `(J₀, α)`.
    pub fn fit_power_law(&self) -> Result<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .bonds()
            .filter(|&(_, _, v)| v > 0.0)
            .map(|(a, b, v)| ((b as f64 - a as f64).ln(), v.ln()))
            .collect();
        let m = pts.len() as f64;
        let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        if pts.len() < 2 || sxx == 0.0 {
            return Err(Error::InsufficientData(
                "power-law fit needs couplings at two or more distances".into(),
            ));
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        let slope = sxy / sxx;
        Ok(((mean_y - slope * mean_x).exp(), -slope))
    }
}

/// Per-site longitudinal field `Bᶻ_j`, the coefficient of `σᶻ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    bz: Vec<f64>,
}

impl FieldProfile {
    pub fn from_values(bz: Vec<f64>) -> Result<Self> {
        check_sites(bz.len())?;
        if let Some(x) = bz.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite field value {x}"
            )));
        }
        Ok(Self { bz })
    }

    pub fn uniform(n: usize, bz0: f64) -> Result<Self> {
        Self::from_values(vec![bz0; n])
    }

    /// `Bᶻ_j = bz0 + (j−1)·g`.
    pub fn linear(n: usize, bz0: f64, g: f64) -> Result<Self> {
        Self::from_values((0..n).map(|j| bz0 + j as f64 * g).collect())
    }

    /// `Bᶻ_j = bz0 + γ (j − (n+1)/2 − offset)² / (n−1)`; the slope at the
    /// chain ends is `±γ` for zero offset.
    pub fn quadratic(n: usize, bz0: f64, gamma: f64, center_offset: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(
                "quadratic field needs at least two sites".into(),
            ));
        }
        let center = quadratic_center(n, center_offset);
        let denom = (n - 1) as f64;
        Self::from_values(
            (1..=n)
                .map(|j| bz0 + gamma * (j as f64 - center).powi(2) / denom)
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.bz.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.bz
    }

    /// Value on 1-based `site`.
    pub fn site(&self, site: usize) -> f64 {
        self.bz[site - 1]
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            bz: self.bz.iter().map(|b| b + c).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bz: self.bz.iter().map(|b| b * factor).collect(),
        }
    }

    /// Diagonal energy `Σ_j Bᶻ_j s_j` of basis state `b`.
    pub fn energy_of(&self, b: usize) -> f64 {
        self.bz
            .iter()
            .enumerate()
            .map(|(j, &h)| if (b >> j) & 1 == 1 { h } else { -h })
            .sum()
    }

    /// CSV `site,bz_over_j0`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("site,bz_over_j0\n");
        for (j, &b) in self.bz.iter().enumerate() {
            s.push_str(&format!("{},{}\n", j + 1, crate::export::format_number(b)));
        }
        s
    }
}

/// Continuous position of the quadratic-field minimum (1-based sites).
pub fn quadratic_center(n: usize, center_offset: f64) -> f64 {
    (n as f64 + 1.0) / 2.0 + center_offset
}

/// Bias `bz0/J₀ = 4.4 (1 + 3g/5)` used when the gradient is scanned through
/// the Trotter duty cycle at fixed instantaneous parameters.
pub fn experimental_bias(g: f64) -> f64 {
    4.4 * (1.0 + 3.0 * g / 5.0)
}

/// Anything that can act on a complex vector.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// Overwrites `y` with `H x`.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

/// Off-diagonal term flipping the spins in `mask`: `⟨b ⊕ mask|H|b⟩ = value`
/// for every basis index `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipTerm {
    pub mask: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
enum OffDiagonal {
    /// Compressed rows, both triangles stored.
    Stored {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
    /// Matrix-free double spin flips.
    Flips(Vec<FlipTerm>),
}

/// Requested storage for the off-diagonal part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    /// Matrix-free from 12 sites up, stored below.
    #[default]
    Auto,
    Stored,
    MatrixFree,
}

/// Site count from which [`Storage::Auto`] switches to matrix-free apply.
pub const MATRIX_FREE_SITES: usize = 12;

/// Real symmetric operator: explicit diagonal plus sparse or matrix-free
/// off-diagonal part.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    diagonal: Vec<f64>,
    offdiag: OffDiagonal,
}

impl SparseOperator {
    /// Builds a stored operator from a diagonal and upper-triangle entries
    /// `(row, col, value)` with `row < col`; duplicates are summed.
    pub fn from_entries(diagonal: Vec<f64>, upper: &[(usize, usize, f64)]) -> Result<Self> {
        let dim = diagonal.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in upper {
            if r >= c || c >= dim {
                return Err(Error::InvalidParameter(format!(
                    "off-diagonal entry ({r}, {c}) must satisfy row < col < {dim}"
                )));
            }
            rows[r].push((c, v));
            rows[c].push((r, v));
        }
        Ok(Self::from_rows(diagonal, rows))
    }

    fn from_rows(diagonal: Vec<f64>, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            diagonal,
            offdiag: OffDiagonal::Stored {
                row_ptr,
                cols,
                vals,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn is_matrix_free(&self) -> bool {
        matches!(self.offdiag, OffDiagonal::Flips(_))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// Visits every off-diagonal entry with `row < col` once.
    pub fn for_each_upper(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.offdiag {
            OffDiagonal::Stored {
                row_ptr,
                cols,
                vals,
            } => {
                for r in 0..self.dim() {
                    for k in row_ptr[r]..row_ptr[r + 1] {
                        if cols[k] > r {
                            f(r, cols[k], vals[k]);
                        }
                    }
                }
            }
            OffDiagonal::Flips(terms) => {
                for b in 0..self.dim() {
                    for t in terms {
                        let c = b ^ t.mask;
                        if c > b {
                            f(b, c, t.value);
                        }
                    }
                }
            }
        }
    }

    /// Upper-triangle entries `(row, col, value)`, `row < col`.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        self.for_each_upper(|r, c, v| out.push((r, c, v)));
        out
    }

    /// Same operator with the off-diagonal part stored explicitly.
    pub fn to_stored(&self) -> Self {
        match &self.offdiag {
            OffDiagonal::Stored { .. } => self.clone(),
            OffDiagonal::Flips(_) => {
                let dim = self.dim();
                let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
                self.for_each_upper(|r, c, v| {
                    rows[r].push((c, v));
                    rows[c].push((r, v));
                });
                Self::from_rows(self.diagonal.clone(), rows)
            }
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        for (i, &v) in self.diagonal.iter().enumerate() {
            m[i * d + i] = v;
        }
        self.for_each_upper(|r, c, v| {
            m[r * d + c] += v;
            m[c * d + r] += v;
        });
        m
    }

    /// Operator plus a diagonal shift per basis state.
    pub fn with_added_diagonal(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: extra.len(),
            });
        }
        let mut out = self.clone();
        out.diagonal
            .iter_mut()
            .zip(extra)
            .for_each(|(d, e)| *d += e);
        Ok(out)
    }

    /// `H ψ` for a full-space state (unnormalized image).
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: psi.dim(),
            });
        }
        let mut out = StateVector::zeros(psi.n_sites())?;
        self.apply_into(psi.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `⟨ψ|H|ψ⟩` for a vector in this operator's space.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut y);
        crate::spinspace::inner(psi, &y).re
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim(), "operator/vector dimension mismatch");
        assert_eq!(y.len(), self.dim(), "operator/vector dimension mismatch");
        match &self.offdiag {
            OffDiagonal::Stored {
                row_ptr,
                cols,
                vals,
            } => {
                for (r, yr) in y.iter_mut().enumerate() {
                    let mut acc = x[r] * self.diagonal[r];
                    for k in row_ptr[r]..row_ptr[r + 1] {
                        acc += x[cols[k]] * vals[k];
                    }
                    *yr = acc;
                }
            }
            OffDiagonal::Flips(terms) => {
                for (b, yb) in y.iter_mut().enumerate() {
                    let mut acc = x[b] * self.diagonal[b];
                    for t in terms {
                        acc += x[b ^ t.mask] * t.value;
                    }
                    *yb = acc;
                }
            }
        }
    }
}

fn check_dims(c: &CouplingMatrix, f: &FieldProfile) -> Result<()> {
    if c.n() != f.n() {
        return Err(Error::DimensionMismatch {
            expected: c.n(),
            found: f.n(),
        });
    }
    Ok(())
}

/// Purely diagonal `Σ_j Bᶻ_j σᶻ_j` on the full space.
pub fn field_diagonal(f: &FieldProfile) -> Vec<f64> {
    (0..1usize << f.n()).map(|b| f.energy_of(b)).collect()
}

/// `H = Σ_{j<j'} J_{jj'} σˣ_j σˣ_{j'} + Σ_j Bᶻ_j σᶻ_j` with automatic storage.
pub fn build_ising(c: &CouplingMatrix, f: &FieldProfile) -> Result<SparseOperator> {
    build_ising_with(c, f, Storage::Auto)
}

pub fn build_ising_with(
    c: &CouplingMatrix,
    f: &FieldProfile,
    storage: Storage,
) -> Result<SparseOperator> {
    check_dims(c, f)?;
    let flips: Vec<FlipTerm> = c
        .bonds()
        .map(|(a, b, v)| FlipTerm {
            mask: (1 << a) | (1 << b),
            value: v,
        })
        .collect();
    let op = SparseOperator {
        diagonal: field_diagonal(f),
        offdiag: OffDiagonal::Flips(flips),
    };
    let matrix_free = match storage {
        Storage::Auto => c.n() >= MATRIX_FREE_SITES,
        Storage::Stored => false,
        Storage::MatrixFree => true,
    };
    Ok(if matrix_free { op } else { op.to_stored() })
}

/// XY Hamiltonian restricted to one magnetization sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub n: usize,
    pub mz: i64,
    /// Full-space basis index of each sector row, ascending.
    pub basis: Vec<usize>,
    pub op: SparseOperator,
}

impl SectorOperator {
    /// Row of a full-space basis index, if it belongs to the sector.
    pub fn position(&self, b: usize) -> Option<usize> {
        self.basis.binary_search(&b).ok()
    }

    /// Embeds a sector vector into the full `2^n` space.
    pub fn embed(&self, v: &[C64]) -> Result<StateVector> {
        let mut psi = StateVector::zeros(self.n)?;
        for (&b, &a) in self.basis.iter().zip(v) {
            psi.amplitudes_mut()[b] = a;
        }
        Ok(psi)
    }

    /// Projects a full-space state onto the sector rows.
    pub fn restrict(&self, psi: &StateVector) -> Vec<C64> {
        self.basis.iter().map(|&b| psi.amplitudes()[b]).collect()
    }
}

/// `H_XY = Σ_{j<j'} (J_{jj'}/2)(σ⁺_j σ⁻_{j'} + h.c.) + Σ_j Bᶻ_j σᶻ_j` on the
/// sector of total magnetization `mz`.
pub fn build_xy_sector(c: &CouplingMatrix, f: &FieldProfile, mz: i64) -> Result<SectorOperator> {
    check_dims(c, f)?;
    let n = c.n();
    let basis = sector_indices(n, mz)?;
    let diagonal: Vec<f64> = basis.iter().map(|&b| f.energy_of(b)).collect();
    let bonds: Vec<(usize, usize, f64)> = c.bonds().collect();
    let mut upper = Vec::new();
    for (row, &b) in basis.iter().enumerate() {
        for &(a, d, v) in &bonds {
            if spin_at(b, a + 1) != spin_at(b, d + 1) {
                let flipped = b ^ ((1 << a) | (1 << d));
                let col = basis
                    .binary_search(&flipped)
                    .expect("flip-flop stays inside the sector");
                if col > row {
                    upper.push((row, col, 0.5 * v));
                }
            }
        }
    }
    Ok(SectorOperator {
        n,
        mz,
        basis,
        op: SparseOperator::from_entries(diagonal, &upper)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn power_law_examples() {
        let c = CouplingMatrix::power_law(3, 1.3).unwrap();
        assert_abs_diff_eq!(c.site(1, 3), 2f64.powf(-1.3), epsilon = 1e-15);
        assert_abs_diff_eq!(c.site(1, 3), 0.406126, epsilon = 1e-5);
        let c = CouplingMatrix::power_law(9, 2.7).unwrap();
        for a in 1..9 {
            assert_eq!(c.site(a, a + 1), 1.0);
            assert_eq!(c.site(a, a), 0.0);
        }
        let c = CouplingMatrix::power_law(4, 60.0).unwrap();
        assert!(c.site(1, 3) < 1e-17);
        assert!(CouplingMatrix::power_law(4, 0.0).is_err());
        assert!(CouplingMatrix::power_law(4, -1.0).is_err());
    }

    #[test]
    fn coupling_file_parsing() {
        let c = CouplingMatrix::parse("# two ions\n2\n0 1\n1 0 # trailing\n").unwrap();
        assert_eq!(c.site(1, 2), 1.0);
        let err = CouplingMatrix::parse("2\n0 1\n1.5 0\n").unwrap_err();
        assert!(matches!(err, Error::Asymmetric { .. }));
        let err = CouplingMatrix::parse("2\n0 1\n1 zz\n").unwrap_err();
        assert!(matches!(err, Error::CouplingFormat { line: 3, .. }));
        assert!(CouplingMatrix::parse("3\n0 1 1\n1 0 1\n").is_err());
        assert!(CouplingMatrix::parse("2\n0 1 2\n1 0\n").is_err());
        assert!(CouplingMatrix::parse("2\n1 1\n1 0\n").is_err());
    }

    #[test]
    fn coupling_text_round_trip() {
        let c = CouplingMatrix::power_law(6, 1.3).unwrap();
        assert_eq!(CouplingMatrix::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn linear_field_examples() {
        assert_eq!(
            FieldProfile::linear(3, 5.0, 1.0).unwrap().values(),
            &[5.0, 6.0, 7.0]
        );
        let flat = FieldProfile::linear(4, 2.0, 0.0).unwrap();
        assert!(flat.values().iter().all(|&b| b == 2.0));
        let f = FieldProfile::linear(5, experimental_bias(2.5), 2.5).unwrap();
        assert_abs_diff_eq!(f.site(1), 11.0, epsilon = 1e-12);
        for j in 0..4 {
            assert_eq!(f.values()[j + 1] - f.values()[j], 2.5);
        }
    }

    #[test]
    fn quadratic_field_examples() {
        let f = FieldProfile::quadratic(15, 5.0, 1.8, 0.0).unwrap();
        // Finite difference at the end equals γ(n−2)/(n−1).
        let end = f.site(1) - f.site(2);
        assert_abs_diff_eq!(end, 1.8 * 13.0 / 14.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end, 1.671, epsilon = 1e-3);
        assert_abs_diff_eq!(f.site(8), 5.0, epsilon = 1e-15);
        let flat = FieldProfile::quadratic(7, 3.0, 0.0, 0.0).unwrap();
        assert!(flat.values().iter().all(|&b| b == 3.0));
        let shifted = FieldProfile::quadratic(8, 0.0, 2.0, 0.25).unwrap();
        assert_abs_diff_eq!(quadratic_center(8, 0.25), 4.75, epsilon = 1e-15);
        // Minimum between sites 4 and 5, closer to 5.
        assert!(shifted.site(5) < shifted.site(4));
        assert!(FieldProfile::quadratic(1, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn field_csv() {
        let f = FieldProfile::linear(2, 1.0, 0.5).unwrap();
        let csv = f.to_csv();
        assert!(csv.starts_with("site,bz_over_j0\n1,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn single_site_and_pair() {
        let c = CouplingMatrix::zeros(1).unwrap();
        let h = build_ising(&c, &FieldProfile::from_values(vec![0.7]).unwrap()).unwrap();
        assert_eq!(h.to_dense(), vec![-0.7, 0.0, 0.0, 0.7]);

        let c = CouplingMatrix::power_law(2, 1.0).unwrap();
        let h = build_ising(&c, &FieldProfile::uniform(2, 0.0).unwrap()).unwrap();
        let d = h.to_dense();
        // σˣσˣ couples 00↔11 and 01↔10.
        assert_eq!(d[3], 1.0);
        assert_eq!(d[6], 1.0);
        let psi = crate::spinspace::StateVector::basis(2, 0).unwrap();
        let out = h.apply(&psi).unwrap();
        assert_eq!(out.amplitudes()[3], C64::new(1.0, 0.0));
        assert_eq!(out.probabilities().filter(|&p| p > 0.0).count(), 1);
    }

    #[test]
    fn ising_row_structure() {
        let n = 6;
        let c = CouplingMatrix::power_law(n, 1.3).unwrap();
        let f = FieldProfile::linear(n, 5.0, 0.4).unwrap();
        let h = build_ising_with(&c, &f, Storage::Stored).unwrap();
        let d = h.dim();
        let dense = h.to_dense();
        for r in 0..d {
            let nnz = (0..d)
                .filter(|&col| col != r && dense[r * d + col] != 0.0)
                .count();
            assert_eq!(nnz, n * (n - 1) / 2);
            assert_abs_diff_eq!(dense[r * d + r], f.energy_of(r), epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_apply_scales_basis_state() {
        let c = CouplingMatrix::zeros(3).unwrap();
        let f = FieldProfile::linear(3, 1.0, 0.5).unwrap();
        let h = build_ising(&c, &f).unwrap();
        let psi = StateVector::basis(3, 5).unwrap();
        let out = h.apply(&psi).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[5].re, f.energy_of(5), epsilon = 1e-15);
        assert_eq!(out.probabilities().filter(|&p| p > 0.0).count(), 1);
        assert!(h.apply(&StateVector::zeros(4).unwrap()).is_err());
    }

    #[test]
    fn xy_two_sites() {
        let c = CouplingMatrix::power_law(2, 1.0).unwrap();
        let s = build_xy_sector(&c, &FieldProfile::uniform(2, 0.0).unwrap(), 0).unwrap();
        assert_eq!(s.basis, vec![1, 2]);
        assert_eq!(s.op.to_dense(), vec![0.0, 0.5, 0.5, 0.0]);
        assert!(build_xy_sector(&c, &FieldProfile::uniform(2, 0.0).unwrap(), 1).is_err());
    }

    #[test]
    fn xy_single_magnon_reduction() {
        let n = 6;
        let c = CouplingMatrix::power_law(n, 1.5).unwrap();
        let f = FieldProfile::linear(n, 2.0, 0.3).unwrap();
        let s = build_xy_sector(&c, &f, -(n as i64) + 2).unwrap();
        assert_eq!(s.basis.len(), n);
        let d = s.op.to_dense();
        let total: f64 = f.values().iter().sum();
        for a in 0..n {
            assert_abs_diff_eq!(d[a * n + a], 2.0 * f.values()[a] - total, epsilon = 1e-12);
            for b in 0..n {
                if a != b {
                    assert_abs_diff_eq!(d[a * n + b], c.get(a, b) / 2.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn xy_sector_size() {
        let c = CouplingMatrix::power_law(15, 1.3).unwrap();
        let f = FieldProfile::linear(15, 5.0, 1.0).unwrap();
        assert_eq!(build_xy_sector(&c, &f, -1).unwrap().basis.len(), 6435);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let c = CouplingMatrix::power_law(10, 1.3).unwrap().scaled(0.8);
        let (j0, alpha) = c.fit_power_law().unwrap();
        assert_abs_diff_eq!(alpha, 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(j0, 0.8, epsilon = 1e-12);
    }
}
