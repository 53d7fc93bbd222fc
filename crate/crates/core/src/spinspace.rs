//! Computational-basis bookkeeping for an N-site spin-1/2 chain.
//!
//! Site `j` (1-based) lives in bit `j - 1` of a basis index and a set bit
//! means spin up (`σᶻ = +1`). Pattern strings read left to right as sites
//! `1..=N`, so `"01"` is site 1 down, site 2 up, basis index `0b10 = 2`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest chain handled by the dynamics code (2^20 amplitudes).
pub const MAX_SITES: usize = 20;

pub(crate) fn check_sites(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::SiteCount(n));
    }
    Ok(())
}

/// `σᶻ` eigenvalue of 1-based `site` in basis state `b`.
#[inline]
pub fn spin_at(b: usize, site: usize) -> f64 {
    if (b >> (site - 1)) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Total magnetization `Σ σᶻ` of basis index `b`.
pub fn magnetization_of_index(b: usize, n: usize) -> Result<i64> {
    check_sites(n)?;
    if b >= 1usize << n {
        return Err(Error::IndexOutOfRange { index: b, n });
    }
    Ok(2 * b.count_ones() as i64 - n as i64)
}

/// Ascending basis indices with total magnetization `mz`.
pub fn sector_indices(n: usize, mz: i64) -> Result<Vec<usize>> {
    check_sites(n)?;
    let n_i = n as i64;
    if mz.abs() > n_i || (n_i + mz) % 2 != 0 {
        return Err(Error::EmptySector { n, mz });
    }
    let ups = ((n_i + mz) / 2) as u32;
    Ok((0..1usize << n).filter(|b| b.count_ones() == ups).collect())
}

/// A product configuration of up/down spins, site 1 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinPattern {
    up: Vec<bool>,
}

impl SpinPattern {
    pub fn from_bits(up: Vec<bool>) -> Result<Self> {
        check_sites(up.len())?;
        Ok(Self { up })
    }

    /// Parses a pattern and checks it against the chain length.
    pub fn parse_for(s: &str, n: usize) -> Result<Self> {
        let p: Self = s.parse()?;
        if p.len() != n {
            return Err(Error::PatternLength {
                expected: n,
                found: p.len(),
            });
        }
        Ok(p)
    }

    /// Néel pattern `0101…` starting with a down spin on site 1.
    pub fn neel(n: usize) -> Result<Self> {
        Self::from_bits((0..n).map(|j| j % 2 == 1).collect())
    }

    pub fn from_index(b: usize, n: usize) -> Result<Self> {
        check_sites(n)?;
        if b >= 1usize << n {
            return Err(Error::IndexOutOfRange { index: b, n });
        }
        Self::from_bits((0..n).map(|j| (b >> j) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    /// Whether 1-based `site` is up.
    pub fn is_up(&self, site: usize) -> bool {
        self.up[site - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.up
    }

    pub fn basis_index(&self) -> usize {
        self.up
            .iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .fold(0, |b, (j, _)| b | (1 << j))
    }

    pub fn magnetization(&self) -> i64 {
        self.up.iter().map(|&u| if u { 1 } else { -1 }).sum()
    }

    /// Dipole moment `Σ j·s_j` with 1-based `j`.
    pub fn dipole_moment(&self) -> i64 {
        self.up
            .iter()
            .enumerate()
            .map(|(j, &u)| (j as i64 + 1) * if u { 1 } else { -1 })
            .sum()
    }

    /// `σᶻ` values of the pattern, site 1 first.
    pub fn spins(&self) -> Vec<f64> {
        self.up
            .iter()
            .map(|&u| if u { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn is_fully_polarized(&self) -> bool {
        self.up.iter().all(|&u| u) || self.up.iter().all(|&u| !u)
    }
}

impl FromStr for SpinPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::PatternChar(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(up)
    }
}

impl fmt::Display for SpinPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &u in &self.up {
            f.write_str(if u { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Complex amplitudes over the `2^n` computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Result<Self> {
        check_sites(n)?;
        Ok(Self {
            n,
            amps: vec![C64::new(0.0, 0.0); 1 << n],
        })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        check_sites(n)?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        Ok(Self { n, amps })
    }

    pub fn basis(n: usize, b: usize) -> Result<Self> {
        let mut s = Self::zeros(n)?;
        if b >= s.amps.len() {
            return Err(Error::IndexOutOfRange { index: b, n });
        }
        s.amps[b] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical(format!(
                "cannot normalize state of norm {nrm}"
            )));
        }
        let inv = 1.0 / nrm;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Basis-state probabilities `|a_b|²`.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.amps.iter().map(|a| a.norm_sqr())
    }
}

/// Single nonzero amplitude at the pattern's basis index.
pub fn product_state(pattern: &SpinPattern) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); 1 << pattern.len()];
    amps[pattern.basis_index()] = C64::new(1.0, 0.0);
    StateVector {
        n: pattern.len(),
        amps,
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
