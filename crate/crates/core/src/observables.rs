//! Measured quantities: magnetizations, generalized imbalance, correlators,
//! staggered-magnetization QFI, entanglement entropy and time-series tools.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::csv_table;
use crate::spinspace::{spin_at, SpinPattern, StateVector, C64};

/// Scalar samples on strictly ascending times (`tJ₀`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

fn check_times(times: &[f64], len: usize) -> Result<()> {
    if times.len() != len {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: len,
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "times must be strictly ascending".into(),
        ));
    }
    Ok(())
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_times(&times, values.len())?;
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// CSV `t_j0,<name>`.
    pub fn to_csv(&self, name: &str) -> String {
        csv_table(
            &["t_j0".to_string(), name.to_string()],
            self.iter().map(|(t, v)| vec![t, v]),
        )
    }
}

/// Per-site samples: `values[k][j]` is site `j+1` at `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteSeries {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SiteSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_times(&times, values.len())?;
        if let Some(first) = values.first() {
            if let Some(row) = values.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_sites(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Series of one 1-based site.
    pub fn site(&self, site: usize) -> Result<TimeSeries> {
        if site == 0 || site > self.n_sites() {
            return Err(Error::InvalidSite {
                site,
                n: self.n_sites(),
            });
        }
        TimeSeries::new(
            self.times.clone(),
            self.values.iter().map(|r| r[site - 1]).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Result<f64>) -> Result<TimeSeries> {
        let values = self
            .values
            .iter()
            .map(|r| f(r))
            .collect::<Result<Vec<_>>>()?;
        TimeSeries::new(self.times.clone(), values)
    }

    /// CSV `t_j0,sz_1,…,sz_n`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["t_j0".to_string()];
        header.extend((1..=self.n_sites()).map(|j| format!("sz_{j}")));
        csv_table(
            &header,
            self.times.iter().zip(&self.values).map(|(t, r)| {
                let mut row = vec![*t];
                row.extend(r);
                row
            }),
        )
    }
}

/// `⟨σᶻ_j⟩` for every site.
pub fn site_magnetizations(psi: &StateVector) -> Vec<f64> {
    let n = psi.n_sites();
    let mut mags = vec![0.0; n];
    for (b, p) in psi.probabilities().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (j, m) in mags.iter_mut().enumerate() {
            *m += if (b >> j) & 1 == 1 { p } else { -p };
        }
    }
    mags
}

/// Mean magnetization of initially-up sites minus that of initially-down sites.
pub fn generalized_imbalance(mags: &[f64], pattern: &SpinPattern) -> Result<f64> {
    if mags.len() != pattern.len() {
        return Err(Error::PatternLength {
            expected: mags.len(),
            found: pattern.len(),
        });
    }
    if pattern.is_fully_polarized() {
        return Err(Error::UndefinedImbalance);
    }
    let (mut up, mut n_up, mut down, mut n_down) = (0.0, 0usize, 0.0, 0usize);
    for (m, &u) in mags.iter().zip(pattern.bits()) {
        if u {
            up += m;
            n_up += 1;
        } else {
            down += m;
            n_down += 1;
        }
    }
    Ok(up / n_up as f64 - down / n_down as f64)
}

/// Sample mean over `t_lo ≤ t ≤ t_hi`.
pub fn late_time_average(ts: &TimeSeries, t_lo: f64, t_hi: f64) -> Result<f64> {
    window_stats(ts, t_lo, t_hi).map(|(m, _)| m)
}

/// Sample mean and population standard deviation over `t_lo ≤ t ≤ t_hi`.
pub fn window_stats(ts: &TimeSeries, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
    let vals: Vec<f64> = ts
        .iter()
        .filter(|(t, _)| *t >= t_lo && *t <= t_hi)
        .map(|(_, v)| v)
        .collect();
    if vals.is_empty() {
        return Err(Error::EmptyWindow { lo: t_lo, hi: t_hi });
    }
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    Ok((mean, var.sqrt()))
}

/// Late-time summary of an imbalance trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceRecord {
    pub series: TimeSeries,
    pub late_time_mean: f64,
    pub window: (f64, f64),
}

impl ImbalanceRecord {
    pub fn new(series: TimeSeries, window: (f64, f64)) -> Result<Self> {
        let late_time_mean = late_time_average(&series, window.0, window.1)?;
        Ok(Self {
            series,
            late_time_mean,
            window,
        })
    }
}

/// `Σ_j (−1)^j σᶻ_j` in basis state `b`, with `(−1)¹ = −1`.
fn staggered(b: usize, n: usize) -> f64 {
    (1..=n)
        .map(|j| {
            if j % 2 == 1 {
                -spin_at(b, j)
            } else {
                spin_at(b, j)
            }
        })
        .sum()
}

/// `f_Q = (⟨W²⟩ − ⟨W⟩²)/n` for the staggered witness `W = Σ_j (−1)^j σᶻ_j`,
/// equal to `(1/n)[Σ_{jj'} (−1)^{j+j'} ⟨σᶻ_j σᶻ_j'⟩ − (Σ_j (−1)^j ⟨σᶻ_j⟩)²]`.
pub fn qfi_staggered(psi: &StateVector) -> f64 {
    let n = psi.n_sites();
    let (mut w1, mut w2) = (0.0, 0.0);
    for (b, p) in psi.probabilities().enumerate() {
        if p != 0.0 {
            let w = staggered(b, n);
            w1 += p * w;
            w2 += p * w * w;
        }
    }
    ((w2 - w1 * w1) / n as f64).max(0.0)
}

/// `⟨σᶻ_j σᶻ_j'⟩` for 1-based sites.
pub fn zz_correlator(psi: &StateVector, j: usize, jp: usize) -> Result<f64> {
    let n = psi.n_sites();
    for site in [j, jp] {
        if site == 0 || site > n {
            return Err(Error::InvalidSite { site, n });
        }
    }
    if j == jp {
        return Ok(1.0);
    }
    Ok(psi
        .probabilities()
        .enumerate()
        .map(|(b, p)| p * spin_at(b, j) * spin_at(b, jp))
        .sum())
}

/// Base-2 von Neumann entropy of sites `1..=cut`.
pub fn bipartite_entropy(psi: &StateVector, cut: usize) -> Result<f64> {
    let n = psi.n_sites();
    if cut == 0 || cut >= n {
        return Err(Error::InvalidParameter(format!(
            "cut {cut} must satisfy 1 ≤ cut < {n}"
        )));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    let a = psi.amplitudes();
    let m = Mat::<C64>::from_fn(rows, cols, |r, c| a[r + c * rows]);
    let sv = m
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    Ok(sv
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-14)
        .map(|p| -p * p.log2())
        .sum())
}

/// Centered mean over `[t − w/2, t + w/2]`, truncated at the ends.
pub fn moving_average(ts: &TimeSeries, window: f64) -> Result<TimeSeries> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window {window} must be positive"
        )));
    }
    let t = ts.times();
    let v = ts.values();
    // Grid points on the window edge count as inside despite rounding.
    let half = window / 2.0 * (1.0 + 1e-9);
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut out = Vec::with_capacity(t.len());
    for &tc in t {
        while hi < t.len() && t[hi] <= tc + half {
            hi += 1;
        }
        while t[lo] < tc - half {
            lo += 1;
        }
        out.push(v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
    }
    TimeSeries::new(t.to_vec(), out)
}

/// Log-linear least-squares fit of `A e^{−t/τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    /// `f64::INFINITY` when the data do not decay.
    pub tau: f64,
    pub tau_stderr: f64,
}

pub fn fit_exponential_decay(ts: &TimeSeries, t_start: f64) -> Result<ExponentialFit> {
    let pts: Vec<(f64, f64)> = ts.iter().filter(|(t, _)| *t >= t_start).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} points after t = {t_start}, need 4",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "nonpositive sample {v} at t = {t}"
        )));
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum();
    let slope_se = (rss / (k - 2.0) / sxx).sqrt();
    let (tau, tau_stderr) = if slope < 0.0 {
        (-1.0 / slope, slope_se / (slope * slope))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(ExponentialFit {
        amplitude: intercept.exp(),
        tau,
        tau_stderr,
    })
}
