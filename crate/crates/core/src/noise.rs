//! Shot-to-shot noise emulation: Gaussian bias, gradient and per-site field
//! errors plus a global preparation rotation, averaged over seeded instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FieldProfile;
use crate::observables::{late_time_average, TimeSeries};
use crate::propagate::{rotate_global, Axis};
use crate::protocols::ChainModel;
use crate::spinspace::{product_state, SpinPattern, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Global y rotation of the initial product state, radians.
    pub init_rotation_angle: f64,
    /// Standard deviation of the bias, `J₀` units.
    pub sigma_bz0: f64,
    /// Relative standard deviation of the gradient scale.
    pub sigma_g_frac: f64,
    /// Relative standard deviation of each site's field.
    pub sigma_local_frac: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            init_rotation_angle: 0.075 * std::f64::consts::PI,
            sigma_bz0: khz_to_j0(0.6, 0.25),
            sigma_g_frac: 0.0625,
            sigma_local_frac: 0.03125,
            n_samples: 50,
            seed: 0,
        }
    }
}

/// A field spread quoted as `2π · khz` expressed in units of `J₀ = 2π · j0_khz`.
pub fn khz_to_j0(khz: f64, j0_khz: f64) -> f64 {
    khz / j0_khz
}

impl NoiseModel {
    /// No perturbation at all.
    pub fn noiseless(n_samples: usize, seed: u64) -> Self {
        Self {
            init_rotation_angle: 0.0,
            sigma_bz0: 0.0,
            sigma_g_frac: 0.0,
            sigma_local_frac: 0.0,
            n_samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_bz0, self.sigma_g_frac, self.sigma_local_frac];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise standard deviations must be finite and ≥ 0, got {sigmas:?}"
            )));
        }
        if !self.init_rotation_angle.is_finite() {
            return Err(Error::InvalidParameter(
                "rotation angle must be finite".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter(
                "need at least one noise sample".into(),
            ));
        }
        Ok(())
    }
}

/// Independent stream for instance `index`, unaffected by execution order.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseInstance {
    pub model: ChainModel,
    pub initial: StateVector,
}

/// Draws bias, gradient scale and per-site factors in that order, then
/// rotates the product state of `pattern`.
pub fn sample_instance(
    noise: &NoiseModel,
    base: &ChainModel,
    pattern: &SpinPattern,
    rng: &mut impl Rng,
) -> Result<NoiseInstance> {
    noise.validate()?;
    if pattern.len() != base.n() {
        return Err(Error::PatternLength {
            expected: base.n(),
            found: pattern.len(),
        });
    }
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let bias = base.bias + noise.sigma_bz0 * normal();
    let scale = 1.0 + noise.sigma_g_frac * normal();
    let local: Vec<f64> = base
        .local
        .values()
        .iter()
        .map(|f| f * scale * (1.0 + noise.sigma_local_frac * normal()))
        .collect();
    let model = ChainModel::new(
        base.couplings.clone(),
        bias,
        FieldProfile::from_values(local)?,
    )?;
    let mut initial = product_state(pattern);
    if noise.init_rotation_angle != 0.0 {
        initial = rotate_global(&initial, Axis::Y, noise.init_rotation_angle)?;
    }
    Ok(NoiseInstance { model, initial })
}

/// Pointwise mean and standard error over noise instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseAverage {
    pub mean: TimeSeries,
    pub stderr: TimeSeries,
    pub instances: Vec<TimeSeries>,
}

impl NoiseAverage {
    /// Mean and standard error of the per-instance window averages.
    pub fn late_time(&self, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
        let vals = self
            .instances
            .iter()
            .map(|s| late_time_average(s, t_lo, t_hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean_and_stderr(&vals))
    }
}

/// Runs `run` on `noise.n_samples` instances (in parallel) and averages the
/// returned series.
pub fn noise_average<F>(
    noise: &NoiseModel,
    base: &ChainModel,
    pattern: &SpinPattern,
    run: F,
) -> Result<NoiseAverage>
where
    F: Fn(&NoiseInstance) -> Result<TimeSeries> + Sync,
{
    noise.validate()?;
    let instances = (0..noise.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(noise.seed, i);
            run(&sample_instance(noise, base, pattern, &mut rng)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = instances[0].times().to_vec();
    if let Some(bad) = instances.iter().find(|s| s.times() != times.as_slice()) {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: bad.len(),
        });
    }
    let (mean, stderr): (Vec<f64>, Vec<f64>) = (0..times.len())
        .map(|k| {
            let column: Vec<f64> = instances.iter().map(|s| s.values()[k]).collect();
            mean_and_stderr(&column)
        })
        .unzip();
    Ok(NoiseAverage {
        mean: TimeSeries::new(times.clone(), mean)?,
        stderr: TimeSeries::new(times, stderr)?,
        instances,
    })
}

/// Sample mean and `s/√k`; the error is 0 for a single sample.
pub fn mean_and_stderr(vals: &[f64]) -> (f64, f64) {
    let k = vals.len() as f64;
    let mean = pairwise_sum(vals) / k;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (pairwise_sum(&dev) / (k - 1.0) / k).sqrt())
}

/// Recursive pairwise summation.
pub fn pairwise_sum(vals: &[f64]) -> f64 {
    if vals.len() <= 8 {
        return vals.iter().sum();
    }
    let (a, b) = vals.split_at(vals.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{generalized_imbalance, site_magnetizations};
    use crate::protocols::{run_quench, run_quench_from, QuenchConfig, TimeGrid};
    use approx::assert_abs_diff_eq;

    fn small_model() -> ChainModel {
        ChainModel::linear(6, 1.3, 4.5, 1.2).unwrap()
    }

    #[test]
    fn default_parameters() {
        let m = NoiseModel::default();
        assert_abs_diff_eq!(m.sigma_bz0, 2.4, epsilon = 1e-15);
        assert_eq!(m.n_samples, 50);
        assert!(NoiseModel {
            sigma_g_frac: -0.1,
            ..m
        }
        .validate()
        .is_err());
        assert!(NoiseModel { n_samples: 0, ..m }.validate().is_err());
    }

    #[test]
    fn zero_noise_reproduces_base() {
        let base = small_model();
        let p = SpinPattern::neel(6).unwrap();
        let inst = sample_instance(
            &NoiseModel::noiseless(1, 3),
            &base,
            &p,
            &mut instance_rng(3, 0),
        )
        .unwrap();
        assert_eq!(inst.model, base);
        assert_eq!(inst.initial, product_state(&p));
    }

    #[test]
    fn rotated_neel_imbalance() {
        let noise = NoiseModel {
            sigma_bz0: 0.0,
            sigma_g_frac: 0.0,
            sigma_local_frac: 0.0,
            ..Default::default()
        };
        let p = SpinPattern::neel(6).unwrap();
        let inst = sample_instance(&noise, &small_model(), &p, &mut instance_rng(0, 0)).unwrap();
        let mags = site_magnetizations(&inst.initial);
        let c = (0.075 * std::f64::consts::PI).cos();
        assert!(mags.iter().all(|m| (m.abs() - c).abs() < 1e-12));
        assert_abs_diff_eq!(c, 0.9724, epsilon = 1e-4);
        assert_abs_diff_eq!(
            generalized_imbalance(&mags, &p).unwrap(),
            2.0 * c,
            epsilon = 1e-12
        );
    }

    #[test]
    fn seeded_draws_repeat() {
        let base = small_model();
        let p = SpinPattern::neel(6).unwrap();
        let m = NoiseModel::default();
        let a = sample_instance(&m, &base, &p, &mut instance_rng(42, 5)).unwrap();
        let b = sample_instance(&m, &base, &p, &mut instance_rng(42, 5)).unwrap();
        let c = sample_instance(&m, &base, &p, &mut instance_rng(42, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn noiseless_average_equals_single_run() {
        let base = small_model();
        let p = SpinPattern::neel(6).unwrap();
        let mut cfg = QuenchConfig::new(base.clone(), p.clone());
        cfg.grid = TimeGrid {
            t_max: 3.0,
            n_points: 13,
        };
        cfg.window = (2.0, 3.0);
        let direct = run_quench(&cfg).unwrap().imbalance.series;
        for k in [1, 3] {
            let avg = noise_average(&NoiseModel::noiseless(k, 0), &base, &p, |inst| {
                let mut c = cfg.clone();
                c.model = inst.model.clone();
                Ok(run_quench_from(&c, &inst.initial)?.imbalance.series)
            })
            .unwrap();
            for (a, b) in avg.mean.values().iter().zip(direct.values()) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!(avg.stderr.values().iter().all(|s| *s < 1e-14));
        }
    }

    #[test]
    fn constant_observable_averages_to_constant() {
        let base = small_model();
        let p = SpinPattern::neel(6).unwrap();
        let avg = noise_average(
            &NoiseModel {
                n_samples: 7,
                ..Default::default()
            },
            &base,
            &p,
            |_| TimeSeries::new(vec![0.0, 1.0], vec![0.25, 0.25]),
        )
        .unwrap();
        assert!(avg.mean.values().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(avg.late_time(0.0, 1.0).unwrap(), (0.25, 0.0));
    }

    #[test]
    fn pairwise_matches_naive_sum() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert_abs_diff_eq!(pairwise_sum(&v), v.iter().sum::<f64>(), epsilon = 1e-12);
        let (m, se) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_abs_diff_eq!(se, 1.0, epsilon = 1e-15);
    }

    /// The averaged imbalance starts below 2 and oscillates less than the
    /// noiseless trace at late times.
    #[test]
    fn noise_damps_oscillations() {
        let n = 6;
        let base = ChainModel::linear(n, 1.3, 4.5, 1.8).unwrap();
        let p = SpinPattern::neel(n).unwrap();
        let mut cfg = QuenchConfig::new(base.clone(), p.clone());
        cfg.grid = TimeGrid {
            t_max: 7.0,
            n_points: 57,
        };
        let clean = run_quench(&cfg).unwrap().imbalance.series;
        let noisy = noise_average(
            &NoiseModel {
                n_samples: 24,
                seed: 1,
                ..Default::default()
            },
            &base,
            &p,
            |inst| {
                let mut c = cfg.clone();
                c.model = inst.model.clone();
                Ok(run_quench_from(&c, &inst.initial)?.imbalance.series)
            },
        )
        .unwrap();
        assert_abs_diff_eq!(
            noisy.mean.values()[0],
            2.0 * (0.075 * std::f64::consts::PI).cos(),
            epsilon = 1e-12
        );
        let spread = |s: &TimeSeries| {
            let late: Vec<f64> = s
                .iter()
                .filter(|(t, _)| *t >= 4.0)
                .map(|(_, v)| v)
                .collect();
            late.iter().cloned().fold(f64::MIN, f64::max)
                - late.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(
            spread(&noisy.mean) < spread(&clean),
            "{} vs {}",
            spread(&noisy.mean),
            spread(&clean)
        );
    }
}
