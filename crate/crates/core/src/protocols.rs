//! Experiment emulations: quenches, DEER versus spin echo, quadratic-field
//! relaxation and long-time stability runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_ising, quadratic_center, CouplingMatrix, FieldProfile, SparseOperator};
use crate::observables::{
    bipartite_entropy, generalized_imbalance, late_time_average, moving_average, qfi_staggered,
    site_magnetizations, window_stats, ImbalanceRecord, SiteSeries, TimeSeries,
};
use crate::propagate::{
    instantaneous_parameters, krylov_evolve_in_place, rotate_site_in_place, Axis, KrylovSettings,
    TrotterCycle, TrotterSettings,
};
use crate::spinspace::{product_state, SpinPattern, StateVector};

/// Couplings plus longitudinal field split into a uniform bias and a local
/// part: `Bᶻ_j = bias + local_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub couplings: CouplingMatrix,
    pub bias: f64,
    pub local: FieldProfile,
}

impl ChainModel {
    pub fn new(couplings: CouplingMatrix, bias: f64, local: FieldProfile) -> Result<Self> {
        if couplings.n() != local.n() {
            return Err(Error::DimensionMismatch {
                expected: couplings.n(),
                found: local.n(),
            });
        }
        if !bias.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bias {bias} must be finite"
            )));
        }
        Ok(Self {
            couplings,
            bias,
            local,
        })
    }

    /// Power-law couplings with a linear gradient `(j−1)g`.
    pub fn linear(n: usize, alpha: f64, bias: f64, g: f64) -> Result<Self> {
        Self::new(
            CouplingMatrix::power_law(n, alpha)?,
            bias,
            FieldProfile::linear(n, 0.0, g)?,
        )
    }

    /// Power-law couplings with the quadratic profile of curvature `gamma`.
    pub fn quadratic(
        n: usize,
        alpha: f64,
        bias: f64,
        gamma: f64,
        center_offset: f64,
    ) -> Result<Self> {
        Self::new(
            CouplingMatrix::power_law(n, alpha)?,
            bias,
            FieldProfile::quadratic(n, 0.0, gamma, center_offset)?,
        )
    }

    pub fn n(&self) -> usize {
        self.couplings.n()
    }

    pub fn field(&self) -> FieldProfile {
        self.local.shifted(self.bias)
    }

    pub fn hamiltonian(&self) -> Result<SparseOperator> {
        build_ising(&self.couplings, &self.field())
    }
}

/// `n_points` uniform samples on `[0, t_max]`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            t_max: 7.0,
            n_points: 40,
        }
    }
}

impl TimeGrid {
    pub fn long() -> Self {
        Self {
            t_max: 100.0,
            n_points: 400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() || self.n_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs t_max > 0 and ≥ 2 points, got t_max = {}, n_points = {}",
                self.t_max, self.n_points
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.t_max * k as f64 / last)
            .collect()
    }
}

/// Continuous evolution under the model, or the Trotter cycle whose average
/// reproduces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Evolution {
    #[default]
    Continuous,
    /// Segment durations in `1/J₀`.
    Trotter { dt1: f64, dt2: f64 },
}

enum Engine {
    Continuous(SparseOperator, KrylovSettings),
    Trotter(TrotterCycle),
}

impl Engine {
    fn new(model: &ChainModel, evolution: Evolution, krylov: KrylovSettings) -> Result<Self> {
        krylov.validate()?;
        Ok(match evolution {
            Evolution::Continuous => Engine::Continuous(model.hamiltonian()?, krylov),
            Evolution::Trotter { dt1, dt2 } => {
                let settings = TrotterSettings {
                    dt1,
                    dt2,
                    cycles: 0,
                };
                let (c, f) = instantaneous_parameters(&model.couplings, &model.local, &settings)?;
                Engine::Trotter(TrotterCycle::new(&c, &f, model.bias, settings, krylov)?)
            }
        })
    }

    /// Times actually reached for the requested grid.
    fn snap(&self, times: &[f64]) -> Result<Vec<f64>> {
        match self {
            Engine::Continuous(..) => Ok(times.to_vec()),
            Engine::Trotter(cycle) => {
                let period = cycle.period();
                let snapped: Vec<f64> = times
                    .iter()
                    .map(|t| (t / period).round() * period)
                    .collect();
                if snapped.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(format!(
                        "Trotter period {period} is too long for the time grid"
                    )));
                }
                Ok(snapped)
            }
        }
    }

    fn advance(&self, psi: &mut StateVector, from: f64, to: f64) -> Result<()> {
        match self {
            Engine::Continuous(h, k) => {
                krylov_evolve_in_place(h, psi.amplitudes_mut(), to - from, k)?;
            }
            Engine::Trotter(cycle) => {
                let p = cycle.period();
                let cycles = ((to / p).round() - (from / p).round()).max(0.0) as usize;
                for _ in 0..cycles {
                    cycle.apply_in_place(psi.amplitudes_mut())?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuenchConfig {
    pub model: ChainModel,
    pub pattern: SpinPattern,
    pub grid: TimeGrid,
    pub evolution: Evolution,
    pub window: (f64, f64),
    pub krylov: KrylovSettings,
}

impl QuenchConfig {
    pub fn new(model: ChainModel, pattern: SpinPattern) -> Self {
        Self {
            model,
            pattern,
            grid: TimeGrid::default(),
            evolution: Evolution::Continuous,
            window: (5.0, 7.0),
            krylov: KrylovSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.pattern.len() != self.model.n() {
            return Err(Error::PatternLength {
                expected: self.model.n(),
                found: self.pattern.len(),
            });
        }
        if self.pattern.is_fully_polarized() {
            return Err(Error::UndefinedImbalance);
        }
        if !(self.window.0 <= self.window.1)
            || self.window.1 < 0.0
            || self.window.0 > self.grid.t_max
        {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] outside time grid [0, {}]",
                self.window.0, self.window.1, self.grid.t_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchResult {
    pub magnetizations: SiteSeries,
    pub imbalance: ImbalanceRecord,
    pub qfi: TimeSeries,
    /// Half-chain entropy, cut after site `n/2`.
    pub entropy: TimeSeries,
}

pub fn run_quench(cfg: &QuenchConfig) -> Result<QuenchResult> {
    run_quench_from(cfg, &product_state(&cfg.pattern))
}

/// Quench from an arbitrary initial state; the imbalance stays referenced to
/// `cfg.pattern`.
pub fn run_quench_from(cfg: &QuenchConfig, psi0: &StateVector) -> Result<QuenchResult> {
    cfg.validate()?;
    let n = cfg.model.n();
    if psi0.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi0.n_sites(),
        });
    }
    let engine = Engine::new(&cfg.model, cfg.evolution, cfg.krylov)?;
    let times = engine.snap(&cfg.grid.times())?;
    let cut = (n / 2).max(1);
    let mut psi = psi0.clone();
    let mut mags = Vec::with_capacity(times.len());
    let mut qfi = Vec::with_capacity(times.len());
    let mut entropy = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in &times {
        engine.advance(&mut psi, prev, t)?;
        prev = t;
        mags.push(site_magnetizations(&psi));
        qfi.push(qfi_staggered(&psi));
        entropy.push(if n > 1 {
            bipartite_entropy(&psi, cut)?
        } else {
            0.0
        });
    }
    let magnetizations = SiteSeries::new(times.clone(), mags)?;
    let imbalance = magnetizations.map(|m| generalized_imbalance(m, &cfg.pattern))?;
    Ok(QuenchResult {
        magnetizations,
        imbalance: ImbalanceRecord::new(imbalance, cfg.window)?,
        qfi: TimeSeries::new(times.clone(), qfi)?,
        entropy: TimeSeries::new(times, entropy)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeerConfig {
    pub model: ChainModel,
    pub probe: usize,
    /// Distance `R` from the probe to the first region site.
    pub offset: usize,
    pub region_size: usize,
    pub axis: Axis,
    pub echo: EchoKind,
    pub grid: TimeGrid,
    pub window: (f64, f64),
    pub krylov: KrylovSettings,
}

/// Probe sequence shared by both DEER arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EchoKind {
    /// `π/2 – t/2 – π – t/2 – π/2` on the probe; with all pulses about one
    /// axis a perfect echo is a 2π rotation.
    #[default]
    Hahn,
    /// Only the refocusing π pulse; the probe is read out as `−⟨σᶻ⟩`.
    PiOnly,
}

impl DeerConfig {
    pub fn new(model: ChainModel, offset: usize) -> Self {
        Self {
            model,
            probe: 1,
            offset,
            region_size: 3,
            axis: Axis::X,
            echo: EchoKind::Hahn,
            grid: TimeGrid::default(),
            window: (2.0, 4.0),
            krylov: KrylovSettings::default(),
        }
    }

    /// 1-based sites receiving the perturbing pulses.
    pub fn region(&self) -> Vec<usize> {
        (0..self.region_size)
            .map(|k| self.probe + self.offset + k)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.model.n();
        if self.probe == 0 || self.probe > n {
            return Err(Error::InvalidSite {
                site: self.probe,
                n,
            });
        }
        if self.offset == 0 || self.region_size == 0 {
            return Err(Error::InvalidParameter(
                "DEER region must be nonempty and separated from the probe".into(),
            ));
        }
        if let Some(&site) = self.region().iter().find(|&&s| s > n) {
            return Err(Error::InvalidSite { site, n });
        }
        if self.window.0 > self.window.1 {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] is reversed",
                self.window.0, self.window.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeerResult {
    pub echo: TimeSeries,
    pub deer: TimeSeries,
    pub difference: TimeSeries,
    pub windowed_difference: f64,
}

/// Spin echo and DEER on the Néel state. At each grid time `t` both arms
/// evolve `t/2`, receive a π pulse on the probe (the DEER arm then also a
/// π/2 pulse on every region site) and evolve another `t/2`. Depending on
/// [`EchoKind`] the probe is additionally prepared and read out with π/2
/// pulses. The probe signal is reported so that a perfect echo returns the
/// initial magnetization.
pub fn run_deer(cfg: &DeerConfig) -> Result<DeerResult> {
    use std::f64::consts::{FRAC_PI_2, PI};
    cfg.validate()?;
    let n = cfg.model.n();
    let h = cfg.model.hamiltonian()?;
    let region = cfg.region();
    let times = cfg.grid.times();
    let mut half = product_state(&SpinPattern::neel(n)?);
    if cfg.echo == EchoKind::Hahn {
        rotate_site_in_place(half.amplitudes_mut(), n, cfg.probe, cfg.axis, FRAC_PI_2)?;
    }
    let mut prev = 0.0;
    let mut echo = Vec::with_capacity(times.len());
    let mut deer = Vec::with_capacity(times.len());
    for &t in &times {
        let tau = t / 2.0;
        krylov_evolve_in_place(&h, half.amplitudes_mut(), tau - prev, &cfg.krylov)?;
        prev = tau;
        let arm = |perturb: bool| -> Result<f64> {
            let mut psi = half.clone();
            rotate_site_in_place(psi.amplitudes_mut(), n, cfg.probe, cfg.axis, PI)?;
            if perturb {
                for &site in &region {
                    rotate_site_in_place(psi.amplitudes_mut(), n, site, cfg.axis, FRAC_PI_2)?;
                }
            }
            krylov_evolve_in_place(&h, psi.amplitudes_mut(), tau, &cfg.krylov)?;
            let sz = match cfg.echo {
                EchoKind::Hahn => {
                    rotate_site_in_place(psi.amplitudes_mut(), n, cfg.probe, cfg.axis, FRAC_PI_2)?;
                    site_magnetizations(&psi)[cfg.probe - 1]
                }
                EchoKind::PiOnly => -site_magnetizations(&psi)[cfg.probe - 1],
            };
            Ok(sz)
        };
        let (e, d) = rayon::join(|| arm(false), || arm(true));
        echo.push(e?);
        deer.push(d?);
    }
    let difference: Vec<f64> = deer.iter().zip(&echo).map(|(d, e)| d - e).collect();
    let difference = TimeSeries::new(times.clone(), difference)?;
    let windowed_difference = late_time_average(&difference, cfg.window.0, cfg.window.1)?;
    Ok(DeerResult {
        echo: TimeSeries::new(times.clone(), echo)?,
        deer: TimeSeries::new(times, deer)?,
        difference,
        windowed_difference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConfig {
    pub n: usize,
    pub alpha: f64,
    pub bias: f64,
    pub gamma: f64,
    pub center_offset: f64,
    pub pattern: SpinPattern,
    pub grid: TimeGrid,
    /// Trailing grid points used for the classification statistics.
    pub tail_points: usize,
    pub krylov: KrylovSettings,
}

impl QuadraticConfig {
    pub fn new(n: usize, gamma: f64) -> Result<Self> {
        Ok(Self {
            n,
            alpha: 1.3,
            bias: 5.0,
            gamma,
            center_offset: 0.0,
            pattern: SpinPattern::neel(n)?,
            grid: TimeGrid::default(),
            tail_points: 5,
            krylov: KrylovSettings::default(),
        })
    }

    pub fn model(&self) -> Result<ChainModel> {
        ChainModel::quadratic(
            self.n,
            self.alpha,
            self.bias,
            self.gamma,
            self.center_offset,
        )
    }

    /// 1-based site nearest the field minimum.
    pub fn center_site(&self) -> usize {
        (quadratic_center(self.n, self.center_offset).round() as usize).clamp(1, self.n)
    }

    /// `|dBᶻ/dj| = 2γ|j − x₀|/(n−1)` at 1-based `site`.
    pub fn local_slope(&self, site: usize) -> f64 {
        2.0 * self.gamma * (site as f64 - quadratic_center(self.n, self.center_offset)).abs()
            / (self.n - 1) as f64
    }

    /// Slope change between neighboring sites, `2γ/(n−1)`.
    pub fn slope_increment(&self) -> f64 {
        2.0 * self.gamma.abs() / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteClass {
    Center,
    Localized,
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteSummary {
    pub site: usize,
    pub tail_mean: f64,
    pub tail_std: f64,
    pub class: SiteClass,
}

/// Innermost pair `c ± distance` that are both separated from the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationBoundary {
    pub distance: usize,
    pub sites: (usize, usize),
    pub local_slope: f64,
    pub slope_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticResult {
    pub magnetizations: SiteSeries,
    pub sites: Vec<SiteSummary>,
    pub boundary: Option<LocalizationBoundary>,
}

pub fn run_quadratic(cfg: &QuadraticConfig) -> Result<QuadraticResult> {
    if cfg.tail_points < 2 || cfg.tail_points > cfg.grid.n_points {
        return Err(Error::InvalidParameter(format!(
            "tail of {} points invalid for a {}-point grid",
            cfg.tail_points, cfg.grid.n_points
        )));
    }
    let mut q = QuenchConfig::new(cfg.model()?, cfg.pattern.clone());
    q.grid = cfg.grid;
    q.window = (0.0, cfg.grid.t_max);
    q.krylov = cfg.krylov;
    let quench = run_quench(&q)?;
    let mags = quench.magnetizations;
    let times = mags.times();
    let t_tail = times[times.len() - cfg.tail_points];
    let stats = (1..=cfg.n)
        .map(|j| window_stats(&mags.site(j)?, t_tail, cfg.grid.t_max))
        .collect::<Result<Vec<_>>>()?;
    let sites = classify_sites(&stats, cfg.center_site());
    let c = cfg.center_site();
    let separated = |s: usize| sites[s - 1].class == SiteClass::Localized;
    let boundary = (1..cfg.n)
        .filter(|d| c > *d && c + d <= cfg.n)
        .find(|&d| separated(c - d) && separated(c + d))
        .map(|d| LocalizationBoundary {
            distance: d,
            sites: (c - d, c + d),
            local_slope: cfg.local_slope(c - d).max(cfg.local_slope(c + d)),
            slope_increment: cfg.slope_increment(),
        });
    Ok(QuadraticResult {
        magnetizations: mags,
        sites,
        boundary,
    })
}

/// A site is localized when its tail mean differs from the center site's by
/// more than the sum of their tail standard deviations.
pub fn classify_sites(stats: &[(f64, f64)], center: usize) -> Vec<SiteSummary> {
    let (mc, sc) = stats[center - 1];
    stats
        .iter()
        .enumerate()
        .map(|(k, &(m, s))| {
            let site = k + 1;
            let class = if site == center {
                SiteClass::Center
            } else if (m - mc).abs() > s + sc {
                SiteClass::Localized
            } else {
                SiteClass::Thermal
            };
            SiteSummary {
                site,
                tail_mean: m,
                tail_std: s,
                class,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub model: ChainModel,
    pub patterns: Vec<SpinPattern>,
    pub grid: TimeGrid,
    /// Moving-average window in `1/J₀`.
    pub smoothing: f64,
    /// Length of the trailing window summarizing each run.
    pub final_window: f64,
    pub krylov: KrylovSettings,
}

impl StabilityConfig {
    /// Néel and two-block patterns on the long grid.
    pub fn new(model: ChainModel) -> Result<Self> {
        let n = model.n();
        let two_block: String = (0..n)
            .map(|j| if (j + 1) % 4 < 2 { '0' } else { '1' })
            .collect();
        Ok(Self {
            patterns: vec![
                SpinPattern::neel(n)?,
                SpinPattern::parse_for(&two_block, n)?,
            ],
            model,
            grid: TimeGrid::long(),
            smoothing: 5.0,
            final_window: 5.0,
            krylov: KrylovSettings::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRun {
    pub pattern: String,
    pub imbalance: ImbalanceRecord,
    pub smoothed: TimeSeries,
    /// Mean of the smoothed series over the final window.
    pub final_value: f64,
}

pub fn run_stability(cfg: &StabilityConfig) -> Result<Vec<StabilityRun>> {
    if !(cfg.final_window > 0.0) || cfg.final_window > cfg.grid.t_max {
        return Err(Error::InvalidParameter(format!(
            "final window {} invalid for t_max = {}",
            cfg.final_window, cfg.grid.t_max
        )));
    }
    let window = (cfg.grid.t_max - cfg.final_window, cfg.grid.t_max);
    cfg.patterns
        .par_iter()
        .map(|p| {
            let mut q = QuenchConfig::new(cfg.model.clone(), p.clone());
            q.grid = cfg.grid;
            q.window = window;
            q.krylov = cfg.krylov;
            let res = run_quench(&q)?;
            let smoothed = moving_average(&res.imbalance.series, cfg.smoothing)?;
            let final_value = late_time_average(&smoothed, window.0, window.1)?;
            Ok(StabilityRun {
                pattern: p.to_string(),
                imbalance: res.imbalance,
                smoothed,
                final_value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decoupled(n: usize, g: f64) -> ChainModel {
        ChainModel::new(
            CouplingMatrix::zeros(n).unwrap(),
            5.0,
            FieldProfile::linear(n, 0.0, g).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn grid_includes_endpoints() {
        let t = TimeGrid::default().times();
        assert_eq!(t.len(), 40);
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 7.0);
        assert!(TimeGrid {
            t_max: 1.0,
            n_points: 1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn decoupled_quench_keeps_imbalance() {
        let cfg = QuenchConfig::new(decoupled(6, 0.7), SpinPattern::neel(6).unwrap());
        let res = run_quench(&cfg).unwrap();
        assert!(res
            .imbalance
            .series
            .values()
            .iter()
            .all(|&i| (i - 2.0).abs() < 1e-12));
        assert_abs_diff_eq!(res.imbalance.late_time_mean, 2.0, epsilon = 1e-12);
        assert!(res.qfi.values().iter().all(|&q| q.abs() < 1e-12));
    }

    #[test]
    fn quench_validation() {
        let m = decoupled(4, 1.0);
        assert!(run_quench(&QuenchConfig::new(m.clone(), "0000".parse().unwrap())).is_err());
        assert!(run_quench(&QuenchConfig::new(m.clone(), "010".parse().unwrap())).is_err());
        let mut cfg = QuenchConfig::new(m, "0101".parse().unwrap());
        cfg.window = (8.0, 9.0);
        assert!(run_quench(&cfg).is_err());
    }

    /// Strong bias approximately conserves total magnetization.
    #[test]
    fn strong_bias_conserves_magnetization() {
        let n = 8;
        let cfg = QuenchConfig::new(
            ChainModel::linear(n, 1.3, 5.0, 0.5).unwrap(),
            SpinPattern::neel(n).unwrap(),
        );
        let res = run_quench(&cfg).unwrap();
        for row in res.magnetizations.rows() {
            assert!(row.iter().sum::<f64>().abs() < 0.05 * n as f64);
        }
    }

    #[test]
    fn trotter_mode_tracks_continuous() {
        let n = 6;
        let model = ChainModel::linear(n, 1.3, 5.0, 1.0).unwrap();
        let mut cfg = QuenchConfig::new(model, SpinPattern::neel(n).unwrap());
        let cont = run_quench(&cfg).unwrap();
        cfg.evolution = Evolution::Trotter {
            dt1: 0.005,
            dt2: 0.005,
        };
        let trot = run_quench(&cfg).unwrap();
        for ((_, a), (_, b)) in cont
            .imbalance
            .series
            .iter()
            .zip(trot.imbalance.series.iter())
        {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
        cfg.evolution = Evolution::Trotter { dt1: 0.2, dt2: 0.2 };
        assert!(run_quench(&cfg).is_err());
    }

    #[test]
    fn echo_is_exact_without_couplings() {
        let n = 7;
        let bz: Vec<f64> = (0..n).map(|j| 3.0 + (j as f64 * 1.37).sin()).collect();
        let model = ChainModel::new(
            CouplingMatrix::zeros(n).unwrap(),
            0.0,
            FieldProfile::from_values(bz).unwrap(),
        )
        .unwrap();
        for kind in [EchoKind::Hahn, EchoKind::PiOnly] {
            let mut cfg = DeerConfig::new(model.clone(), 2);
            cfg.echo = kind;
            let res = run_deer(&cfg).unwrap();
            for (_, e) in res.echo.iter() {
                assert_abs_diff_eq!(e, -1.0, epsilon = 1e-12);
            }
            assert!(res.difference.values().iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn deer_validation() {
        let m = decoupled(6, 1.0);
        assert!(run_deer(&DeerConfig::new(m.clone(), 0)).is_err());
        assert!(run_deer(&DeerConfig::new(m.clone(), 4)).is_err());
        let mut cfg = DeerConfig::new(m, 1);
        cfg.probe = 7;
        assert!(run_deer(&cfg).is_err());
        assert_eq!(
            DeerConfig::new(decoupled(6, 1.0), 2).region(),
            vec![3, 4, 5]
        );
    }

    #[test]
    fn deer_signal_appears_with_couplings() {
        let n = 7;
        let mut cfg = DeerConfig::new(ChainModel::linear(n, 1.3, 5.0, 0.7).unwrap(), 1);
        cfg.grid = TimeGrid {
            t_max: 4.0,
            n_points: 17,
        };
        let res = run_deer(&cfg).unwrap();
        assert_abs_diff_eq!(res.difference.values()[0], 0.0, epsilon = 1e-12);
        assert!(res.windowed_difference.abs() > 1e-3);
    }

    #[test]
    fn uniform_field_has_no_localized_edge() {
        let mut cfg = QuadraticConfig::new(9, 0.0).unwrap();
        cfg.grid = TimeGrid {
            t_max: 5.0,
            n_points: 26,
        };
        let res = run_quadratic(&cfg).unwrap();
        assert!(res.boundary.is_none(), "{:?}", res.boundary);
        assert_eq!(res.sites[4].class, SiteClass::Center);
    }

    #[test]
    fn classification_rule() {
        let stats = [
            (0.9, 0.01),
            (0.1, 0.05),
            (0.0, 0.05),
            (-0.02, 0.05),
            (-0.8, 0.02),
        ];
        let s = classify_sites(&stats, 3);
        let classes: Vec<SiteClass> = s.iter().map(|x| x.class).collect();
        assert_eq!(
            classes,
            vec![
                SiteClass::Localized,
                SiteClass::Thermal,
                SiteClass::Center,
                SiteClass::Thermal,
                SiteClass::Localized
            ]
        );
    }

    #[test]
    fn quadratic_slopes() {
        let cfg = QuadraticConfig::new(15, 1.8).unwrap();
        assert_eq!(cfg.center_site(), 8);
        assert_abs_diff_eq!(cfg.local_slope(6), 2.0 * 1.8 * 2.0 / 14.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.slope_increment(), 3.6 / 14.0, epsilon = 1e-15);
    }

    #[test]
    fn stability_patterns_and_summary() {
        let model = decoupled(8, 2.0);
        let mut cfg = StabilityConfig::new(model).unwrap();
        assert_eq!(cfg.patterns[1].to_string(), "01100110");
        cfg.grid = TimeGrid {
            t_max: 12.0,
            n_points: 49,
        };
        let runs = run_stability(&cfg).unwrap();
        assert_eq!(runs.len(), 2);
        for r in runs {
            assert_abs_diff_eq!(r.final_value, 2.0, epsilon = 1e-12);
        }
    }
}
