//! Third-order dipole-conserving effective Hamiltonian in the strong-tilt
//! limit: terms `A (σ⁺_i σ⁻_j σ⁻_k σ⁺_l + h.c.)` with `i<j<k<l` and
//! `i + l = j + k`, amplitudes in units of `J₀³/g²`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::format_number;
use crate::model::CouplingMatrix;
use crate::spinspace::SpinPattern;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipoleTerm {
    /// 1-based `(i, j, k, l)`.
    pub sites: [usize; 4],
    /// Coefficient in units of `J₀³/g²`.
    pub amplitude: f64,
}

impl DipoleTerm {
    /// Coefficient in units of `J₀` at tilt `g`.
    pub fn energy(&self, g: f64) -> f64 {
        self.amplitude / (g * g)
    }

    fn flip_mask(&self) -> usize {
        self.sites.iter().fold(0, |m, s| m | (1 << (s - 1)))
    }
}

fn check_g(g: f64) -> Result<()> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tilt g = {g} must be positive"
        )));
    }
    Ok(())
}

/// Every `i<j<k<l ≤ n` with `i + l = j + k`.
pub fn dipole_quadruples(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            for k in j + 1..=n {
                let l = j + k - i;
                if l > k && l <= n {
                    out.push([i, j, k, l]);
                }
            }
        }
    }
    out
}

/// Closed form for `J_ab = 1/|a−b|^α`:
/// `6 / ((j−i)^{α+1} (k−i)^{α+1}) · [1/(k−j)^α − 1/(l−i)^α]`.
pub fn power_law_amplitude(sites: [usize; 4], alpha: f64) -> f64 {
    let [i, j, k, l] = sites.map(|s| s as f64);
    6.0 / ((j - i).powf(alpha + 1.0) * (k - i).powf(alpha + 1.0))
        * ((k - j).powf(-alpha) - (l - i).powf(-alpha))
}

/// General form for an arbitrary coupling matrix:
/// `3 (J_ij J_jk J_jl + J_ik J_jk J_kl − J_ij J_ik J_il − J_il J_jl J_kl) / ((j−i)(k−i))`.
pub fn matrix_amplitude(c: &CouplingMatrix, sites: [usize; 4]) -> f64 {
    let [i, j, k, l] = sites;
    let jj = |a, b| c.site(a, b);
    let bracket = jj(i, j) * jj(j, k) * jj(j, l) + jj(i, k) * jj(j, k) * jj(k, l)
        - jj(i, j) * jj(i, k) * jj(i, l)
        - jj(i, l) * jj(j, l) * jj(k, l);
    3.0 * bracket / (((j - i) * (k - i)) as f64)
}

pub fn heff3_power_law(n: usize, alpha: f64, g: f64) -> Result<Vec<DipoleTerm>> {
    check_g(g)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    Ok(dipole_quadruples(n)
        .into_par_iter()
        .map(|sites| DipoleTerm {
            sites,
            amplitude: power_law_amplitude(sites, alpha),
        })
        .collect())
}

pub fn heff3_matrix(c: &CouplingMatrix, g: f64) -> Result<Vec<DipoleTerm>> {
    check_g(g)?;
    Ok(dipole_quadruples(c.n())
        .into_par_iter()
        .map(|sites| DipoleTerm {
            sites,
            amplitude: matrix_amplitude(c, sites),
        })
        .collect())
}

/// Direct third-order amplitude of a term for hopping `h·J_ab (σ⁺_a σ⁻_b + h.c.)`:
/// the closed-form coefficient times `h³/6`.
pub fn process_amplitude(amplitude: f64, hopping: f64) -> f64 {
    amplitude * hopping.powi(3) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixElement {
    pub value: f64,
    /// Set when the two patterns differ in magnetization or dipole moment.
    pub mismatch: bool,
}

/// `⟨a|H_eff|b⟩` in units of `J₀³/g²`.
pub fn effective_matrix_element(
    a: &SpinPattern,
    b: &SpinPattern,
    terms: &[DipoleTerm],
) -> Result<MatrixElement> {
    if a.len() != b.len() {
        return Err(Error::PatternLength {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.magnetization() != b.magnetization() || a.dipole_moment() != b.dipole_moment() {
        return Ok(MatrixElement {
            value: 0.0,
            mismatch: true,
        });
    }
    let diff = a.basis_index() ^ b.basis_index();
    let (ia, ib) = (a.basis_index(), b.basis_index());
    let value = terms
        .iter()
        .filter(|t| t.flip_mask() == diff && diff != 0)
        .filter(|t| {
            let [i, j, k, l] = t.sites.map(|s| 1usize << (s - 1));
            let raised = |x: usize, y: usize| {
                x & (i | l) == i | l && x & (j | k) == 0 && y & (j | k) == j | k && y & (i | l) == 0
            };
            raised(ia, ib) || raised(ib, ia)
        })
        .map(|t| t.amplitude)
        .sum();
    Ok(MatrixElement {
        value,
        mismatch: false,
    })
}

/// CSV `i,j,k,l,amplitude_j0cubed_over_g2`.
pub fn terms_to_csv(terms: &[DipoleTerm]) -> String {
    let mut s = String::from("i,j,k,l,amplitude_j0cubed_over_g2\n");
    for t in terms {
        let [i, j, k, l] = t.sites;
        s.push_str(&format!("{i},{j},{k},{l},{}\n", format_number(t.amplitude)));
    }
    s
}
