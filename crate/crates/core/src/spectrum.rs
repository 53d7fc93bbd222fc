//! Full-spectrum diagonalization and adjacent-gap-ratio statistics.

use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SparseOperator;

/// Largest dimension accepted by [`dense_eigenvalues`].
pub const DENSE_LIMIT: usize = 1 << 14;

/// Sorted real spectrum of a real symmetric operator.
///
/// The operator is split into the connected components of its off-diagonal
/// graph (for the Ising model these are the two `Π σᶻ` parity blocks) and
/// each block is diagonalized densely, so the result is the exact full
/// spectrum.
pub fn dense_eigenvalues(h: &SparseOperator) -> Result<Vec<f64>> {
    let mut eigs: Vec<f64> = dense_block_spectra(h)?.into_iter().flatten().collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Sorted spectrum of each connected block, blocks ordered by their lowest
/// basis index.
pub fn dense_block_spectra(h: &SparseOperator) -> Result<Vec<Vec<f64>>> {
    let dim = h.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::ResourceGuard {
            dim,
            limit: DENSE_LIMIT,
        });
    }
    let blocks = connected_blocks(h);
    let upper = h.upper_entries();
    let mut position = vec![0usize; dim];
    let mut block_of = vec![0usize; dim];
    for (k, block) in blocks.iter().enumerate() {
        for (p, &i) in block.iter().enumerate() {
            position[i] = p;
            block_of[i] = k;
        }
    }
    let mut mats: Vec<Mat<f64>> = blocks
        .iter()
        .map(|b| {
            let mut m = Mat::<f64>::zeros(b.len(), b.len());
            for (p, &i) in b.iter().enumerate() {
                m[(p, p)] = h.diagonal()[i];
            }
            m
        })
        .collect();
    for (r, c, v) in upper {
        let k = block_of[r];
        let (pr, pc) = (position[r], position[c]);
        mats[k][(pr, pc)] += v;
        mats[k][(pc, pr)] += v;
    }
    let mut spectra = Vec::with_capacity(mats.len());
    for m in mats {
        let mut vals = if m.nrows() == 1 {
            vec![m[(0, 0)]]
        } else {
            m.self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?
        };
        vals.sort_by(f64::total_cmp);
        spectra.push(vals);
    }
    let trace = h.trace();
    let sum: f64 = spectra.iter().flatten().sum();
    if (sum - trace).abs() > 1e-6 * dim as f64 {
        return Err(Error::Numerical(format!(
            "eigenvalue sum {sum} disagrees with trace {trace}"
        )));
    }
    Ok(spectra)
}

/// Connected components of the off-diagonal coupling graph, each sorted.
fn connected_blocks(h: &SparseOperator) -> Vec<Vec<usize>> {
    let dim = h.dim();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    h.for_each_upper(|r, c, v| {
        if v != 0.0 {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    });
    let mut index_of_root = vec![usize::MAX; dim];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..dim {
        let root = find(&mut parent, i);
        if index_of_root[root] == usize::MAX {
            index_of_root[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[index_of_root[root]].push(i);
    }
    blocks
}

/// Gap ratios together with the count of near-degenerate triples skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRatios {
    pub values: Vec<f64>,
    pub excluded: usize,
}

/// `r_n = min(δ_n, δ_{n−1}) / max(δ_n, δ_{n−1})` over consecutive gaps of a
/// sorted spectrum. Triples whose larger gap is below `degeneracy_tol` are
/// excluded and counted.
pub fn gap_ratios(eigs: &[f64], degeneracy_tol: f64) -> Result<GapRatios> {
    if eigs.len() < 3 {
        return Err(Error::TooFewLevels {
            needed: 3,
            found: eigs.len(),
        });
    }
    let mut values = Vec::with_capacity(eigs.len() - 2);
    let mut excluded = 0;
    for w in eigs.windows(3) {
        let lower = w[1] - w[0];
        let upper = w[2] - w[1];
        let (lo, hi) = if lower < upper {
            (lower, upper)
        } else {
            (upper, lower)
        };
        if hi < degeneracy_tol || hi <= 0.0 {
            excluded += 1;
        } else {
            values.push((lo / hi).clamp(0.0, 1.0));
        }
    }
    Ok(GapRatios { values, excluded })
}

fn check_unit(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "gap ratio {r} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `P(r) = 2/(1+r)²` for uncorrelated levels.
pub fn poisson_pdf(r: f64) -> Result<f64> {
    check_unit(r)?;
    Ok(2.0 / (1.0 + r).powi(2))
}

/// Surmise-based GOE density `27(r+r²) / (4(1+r+r²)^{5/2})`.
pub fn wigner_dyson_pdf(r: f64) -> Result<f64> {
    check_unit(r)?;
    Ok(27.0 * (r + r * r) / (4.0 * (1.0 + r + r * r).powf(2.5)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceDistribution {
    Poisson,
    WignerDyson,
}

impl ReferenceDistribution {
    pub fn pdf(self, r: f64) -> Result<f64> {
        match self {
            Self::Poisson => poisson_pdf(r),
            Self::WignerDyson => wigner_dyson_pdf(r),
        }
    }
}

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `∫₀¹ r P(r) dr` by quadrature.
pub fn mean_r_reference(kind: ReferenceDistribution) -> f64 {
    simpson(|r| r * kind.pdf(r).expect("r in [0,1]"), 0.0, 1.0, 4000)
}

/// Density-normalized histogram on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// CSV `bin_lo,bin_hi,density`.
    pub fn to_csv(&self) -> String {
        use crate::export::format_number as f;
        let mut s = String::from("bin_lo,bin_hi,density\n");
        for (d, e) in self.densities.iter().zip(self.edges.windows(2)) {
            s.push_str(&format!("{},{},{}\n", f(e[0]), f(e[1]), f(*d)));
        }
        s
    }
}

pub fn r_histogram(rs: &[f64], n_bins: usize) -> Result<Histogram> {
    if rs.is_empty() {
        return Err(Error::InsufficientData("no gap ratios to histogram".into()));
    }
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    let width = 1.0 / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &r in rs {
        check_unit(r)?;
        let k = ((r / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let total = rs.len() as f64;
    Ok(Histogram {
        edges: (0..=n_bins).map(|k| k as f64 * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStatsOptions {
    /// Defaults to `1e-12` times the spectral width.
    pub degeneracy_tol: Option<f64>,
    /// Central fraction of levels kept; `1.0` keeps the whole spectrum.
    pub inner_fraction: f64,
    pub n_bins: usize,
}

impl Default for LevelStatsOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: None,
            inner_fraction: 1.0,
            n_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStatsReport {
    pub eigenvalues: Vec<f64>,
    pub r_values: Vec<f64>,
    pub mean_r: f64,
    pub histogram: Histogram,
    pub excluded_degenerate: usize,
}

pub fn level_statistics(eigs: &[f64], opts: &LevelStatsOptions) -> Result<LevelStatsReport> {
    pooled_level_statistics(&[eigs.to_vec()], opts)
}

/// Gap ratios taken inside each block separately and pooled; with a single
/// block this is [`level_statistics`].
pub fn pooled_level_statistics(
    blocks: &[Vec<f64>],
    opts: &LevelStatsOptions,
) -> Result<LevelStatsReport> {
    if !(opts.inner_fraction > 0.0 && opts.inner_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inner fraction {} outside (0, 1]",
            opts.inner_fraction
        )));
    }
    let mut ratios = GapRatios {
        values: Vec::new(),
        excluded: 0,
    };
    for block in blocks.iter().filter(|b| b.len() >= 3) {
        let mut sorted = block.clone();
        sorted.sort_by(f64::total_cmp);
        let keep = ((sorted.len() as f64) * opts.inner_fraction).round() as usize;
        let start = (sorted.len() - keep) / 2;
        let kept = &sorted[start..start + keep];
        let width = kept.last().copied().unwrap_or(0.0) - kept.first().copied().unwrap_or(0.0);
        let tol = opts.degeneracy_tol.unwrap_or(1e-12 * width.abs());
        let r = gap_ratios(kept, tol)?;
        ratios.values.extend(r.values);
        ratios.excluded += r.excluded;
    }
    let mut sorted: Vec<f64> = blocks.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    if ratios.values.is_empty() && ratios.excluded == 0 {
        return Err(Error::TooFewLevels {
            needed: 3,
            found: blocks.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    if ratios.values.is_empty() {
        return Err(Error::InsufficientData(
            "every level triple is degenerate".into(),
        ));
    }
    let mean_r = ratios.values.iter().sum::<f64>() / ratios.values.len() as f64;
    let histogram = r_histogram(&ratios.values, opts.n_bins)?;
    Ok(LevelStatsReport {
        eigenvalues: sorted,
        r_values: ratios.values,
        mean_r,
        histogram,
        excluded_degenerate: ratios.excluded,
    })
}
