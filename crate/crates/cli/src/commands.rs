use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use starkmbl::export::{csv_table, metadata_header};
use starkmbl::noise::noise_average;
use starkmbl::observables::TimeSeries;
use starkmbl::protocols::{
    run_deer, run_quadratic, run_quench, run_quench_from, run_stability, DeerConfig,
    QuadraticConfig, QuenchConfig, SiteClass, StabilityConfig,
};
use starkmbl::spectrum::{
    dense_block_spectra, level_statistics, mean_r_reference, pooled_level_statistics,
    LevelStatsOptions, ReferenceDistribution,
};
use starkmbl::spinspace::SpinPattern;
use starkmbl::sweff::{heff3_matrix, heff3_power_law, terms_to_csv};

use crate::config::{Command, FieldSpec, RunConfig};
use crate::error::CliError;

/// Where and how a single command writes its files.
pub struct Context {
    pub cfg: RunConfig,
    /// Directory relative paths in the config resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Context {
    fn header(&self, command: Command) -> String {
        metadata_header(&[
            ("command", command.name().to_string()),
            ("seed", self.cfg.seed.to_string()),
            ("j0_khz", self.cfg.j0_khz.to_string()),
            ("config", self.cfg.to_compact_json()),
        ])
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::create_dir_all(&self.out)
            .and_then(|_| std::fs::write(&path, body))
            .map_err(|source| CliError::Write {
                path: path.display().to_string(),
                source,
            })
    }

    fn write_csv(&self, command: Command, name: &str, table: &str) -> Result<(), CliError> {
        self.write(name, &format!("{}{table}", self.header(command)))
    }

    fn write_json(&self, command: Command, name: &str, payload: Value) -> Result<(), CliError> {
        let doc = json!({
            "command": command.name(),
            "seed": self.cfg.seed,
            "config": &self.cfg,
            "result": payload,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn run_command(ctx: &Context, command: Command) -> Result<Value, CliError> {
    let summary = match command {
        Command::Levels => levels(ctx)?,
        Command::Quench => quench(ctx)?,
        Command::Deer => deer(ctx)?,
        Command::Quad => quad(ctx)?,
        Command::Stability => stability(ctx)?,
        Command::Sweff => sweff(ctx)?,
    };
    ctx.write_json(command, "summary.json", summary.clone())?;
    Ok(summary)
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn levels(ctx: &Context) -> Result<Value, CliError> {
    let model = ctx.cfg.chain.model(&ctx.base)?;
    let blocks = dense_block_spectra(&model.hamiltonian()?)?;
    let mut eigs: Vec<f64> = blocks.iter().flatten().copied().collect();
    eigs.sort_by(f64::total_cmp);
    let spec = &ctx.cfg.levels;
    let opts = LevelStatsOptions {
        degeneracy_tol: spec.degeneracy_tol,
        inner_fraction: spec.inner_fraction,
        n_bins: spec.n_bins,
    };
    let report = level_statistics(&eigs, &opts)?;
    let per_block = pooled_level_statistics(&blocks, &opts).ok();
    ctx.write_csv(
        Command::Levels,
        "r_histogram.csv",
        &report.histogram.to_csv(),
    )?;
    ctx.write_json(
        Command::Levels,
        "levels.json",
        serde_json::to_value(&report).expect("report"),
    )?;
    Ok(json!({
        "mean_r": report.mean_r,
        "n_levels": report.eigenvalues.len(),
        "n_ratios": report.r_values.len(),
        "excluded_degenerate": report.excluded_degenerate,
        "n_blocks": blocks.len(),
        "mean_r_within_blocks": per_block.as_ref().map(|r| r.mean_r),
        "n_ratios_within_blocks": per_block.as_ref().map(|r| r.r_values.len()),
        "mean_r_poisson": mean_r_reference(ReferenceDistribution::Poisson),
        "mean_r_wigner_dyson": mean_r_reference(ReferenceDistribution::WignerDyson),
    }))
}

fn patterns_or(
    list: &[String],
    n: usize,
    fallback: impl FnOnce() -> Vec<String>,
) -> Result<Vec<SpinPattern>, CliError> {
    let names = if list.is_empty() {
        fallback()
    } else {
        list.to_vec()
    };
    names
        .iter()
        .map(|p| SpinPattern::parse_for(p, n).map_err(CliError::from))
        .collect()
}

fn quench(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.cfg;
    let spec = &cfg.quench;
    let model = cfg.chain.model(&ctx.base)?;
    let n = model.n();
    let patterns = patterns_or(&spec.patterns, n, || {
        vec![SpinPattern::neel(n)
            .map(|p| p.to_string())
            .unwrap_or_default()]
    })?;
    let evolution = spec.evolution.resolve(cfg.j0_khz)?;
    let base_cfg = |p: &SpinPattern| {
        let mut q = QuenchConfig::new(model.clone(), p.clone());
        q.grid = spec.grid;
        q.window = spec.window;
        q.evolution = evolution;
        q.krylov = cfg.krylov;
        q
    };

    let mut summary = Vec::new();
    match spec.noise {
        None => {
            let results: Vec<_> = patterns
                .par_iter()
                .map(|p| run_quench(&base_cfg(p)))
                .collect::<Result<_, _>>()?;
            for (p, r) in patterns.iter().zip(&results) {
                let s = &r.imbalance.series;
                let rows = (0..s.len()).map(|k| {
                    vec![
                        s.times()[k],
                        s.values()[k],
                        r.qfi.values()[k],
                        r.entropy.values()[k],
                    ]
                });
                let table = csv_table(&columns(&["t_j0", "imbalance", "qfi", "entropy"]), rows);
                ctx.write_csv(Command::Quench, &format!("quench_{p}.csv"), &table)?;
                ctx.write_csv(
                    Command::Quench,
                    &format!("quench_{p}_sz.csv"),
                    &r.magnetizations.to_csv(),
                )?;
                summary.push(json!({
                    "pattern": p.to_string(),
                    "late_time_imbalance": r.imbalance.late_time_mean,
                    "window": r.imbalance.window,
                }));
            }
        }
        Some(noise) => {
            let noise = noise.resolve(cfg.seed, cfg.j0_khz);
            for p in &patterns {
                let q = base_cfg(p);
                q.validate()?;
                let avg = noise_average(&noise, &model, p, |inst| {
                    let mut c = q.clone();
                    c.model = inst.model.clone();
                    Ok(run_quench_from(&c, &inst.initial)?.imbalance.series)
                })?;
                let rows = (0..avg.mean.len()).map(|k| {
                    vec![
                        avg.mean.times()[k],
                        avg.mean.values()[k],
                        avg.stderr.values()[k],
                    ]
                });
                let table = csv_table(
                    &columns(&["t_j0", "imbalance_mean", "imbalance_stderr"]),
                    rows,
                );
                ctx.write_csv(Command::Quench, &format!("quench_{p}.csv"), &table)?;
                let (mean, stderr) = avg.late_time(spec.window.0, spec.window.1)?;
                summary.push(json!({
                    "pattern": p.to_string(),
                    "late_time_imbalance": mean,
                    "late_time_stderr": stderr,
                    "n_samples": noise.n_samples,
                    "window": spec.window,
                }));
            }
        }
    }
    Ok(json!({ "runs": summary }))
}

fn deer(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.cfg;
    let spec = &cfg.deer;
    let model = cfg.chain.model(&ctx.base)?;
    let runs: Vec<_> = spec
        .offsets
        .par_iter()
        .map(|&r| {
            let mut d = DeerConfig::new(model.clone(), r);
            d.probe = spec.probe;
            d.region_size = spec.region_size;
            d.axis = spec.axis;
            d.echo = spec.echo;
            d.grid = spec.grid;
            d.window = spec.window;
            d.krylov = cfg.krylov;
            run_deer(&d).map(|res| (d.region(), res))
        })
        .collect::<Result<_, _>>()?;
    let mut summary = Vec::new();
    for (&r, (region, res)) in spec.offsets.iter().zip(&runs) {
        let rows = (0..res.echo.len()).map(|k| {
            vec![
                res.echo.times()[k],
                res.echo.values()[k],
                res.deer.values()[k],
                res.difference.values()[k],
            ]
        });
        let table = csv_table(&columns(&["t_j0", "echo", "deer", "difference"]), rows);
        ctx.write_csv(Command::Deer, &format!("deer_R{r}.csv"), &table)?;
        summary.push(json!({
            "offset": r,
            "region": region,
            "windowed_difference": res.windowed_difference,
        }));
    }
    Ok(json!({ "runs": summary, "window": spec.window }))
}

fn quad(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.cfg;
    let FieldSpec::Quadratic {
        bias,
        gamma,
        center_offset,
    } = cfg.chain.field
    else {
        return Err(CliError::Config(
            "quad needs chain.field.kind = \"quadratic\"".into(),
        ));
    };
    if cfg.chain.couplings_file.is_some() {
        return Err(CliError::Config(
            "quad uses power-law couplings; remove chain.couplings_file".into(),
        ));
    }
    let n = cfg.chain.n;
    let mut q = QuadraticConfig::new(n, gamma)?;
    q.alpha = cfg.chain.alpha;
    q.bias = bias;
    q.center_offset = center_offset;
    if let Some(p) = &cfg.quad.pattern {
        q.pattern = SpinPattern::parse_for(p, n)?;
    }
    q.grid = cfg.quad.grid;
    q.tail_points = cfg.quad.tail_points;
    q.krylov = cfg.krylov;
    let res = run_quadratic(&q)?;
    ctx.write_csv(Command::Quad, "quad_sz.csv", &res.magnetizations.to_csv())?;
    let mut table = String::from("site,local_slope,tail_mean,tail_std,class\n");
    for s in &res.sites {
        let class = match s.class {
            SiteClass::Center => "center",
            SiteClass::Localized => "localized",
            SiteClass::Thermal => "thermal",
        };
        table.push_str(&format!(
            "{},{},{},{},{class}\n",
            s.site,
            starkmbl::export::format_number(q.local_slope(s.site)),
            starkmbl::export::format_number(s.tail_mean),
            starkmbl::export::format_number(s.tail_std),
        ));
    }
    ctx.write_csv(Command::Quad, "quad_sites.csv", &table)?;
    Ok(json!({
        "center_site": q.center_site(),
        "slope_increment": q.slope_increment(),
        "boundary": res.boundary,
        "sites": res.sites,
    }))
}

fn stability(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.cfg;
    let spec = &cfg.stability;
    let model = cfg.chain.model(&ctx.base)?;
    let mut s = StabilityConfig::new(model)?;
    if !spec.patterns.is_empty() {
        s.patterns = patterns_or(&spec.patterns, cfg.chain.n, Vec::new)?;
    }
    s.grid = spec.grid;
    s.smoothing = spec.smoothing;
    s.final_window = spec.final_window;
    s.krylov = cfg.krylov;
    let runs = run_stability(&s)?;
    let mut summary = Vec::new();
    for r in &runs {
        let raw: &TimeSeries = &r.imbalance.series;
        let rows =
            (0..raw.len()).map(|k| vec![raw.times()[k], raw.values()[k], r.smoothed.values()[k]]);
        let table = csv_table(&columns(&["t_j0", "imbalance", "smoothed"]), rows);
        ctx.write_csv(
            Command::Stability,
            &format!("stability_{}.csv", r.pattern),
            &table,
        )?;
        summary.push(json!({ "pattern": r.pattern, "final_value": r.final_value }));
    }
    Ok(json!({ "runs": summary }))
}

fn sweff(ctx: &Context) -> Result<Value, CliError> {
    let cfg = &ctx.cfg;
    let g = cfg
        .sweff
        .g
        .or(cfg.chain.gradient())
        .ok_or_else(|| CliError::Config("sweff needs sweff.g or a linear field".into()))?;
    let terms = match cfg.chain.couplings_file {
        None => heff3_power_law(cfg.chain.n, cfg.chain.alpha, g)?,
        Some(_) => heff3_matrix(&cfg.chain.couplings(&ctx.base)?, g)?,
    };
    ctx.write_csv(Command::Sweff, "sweff_terms.csv", &terms_to_csv(&terms))?;
    let listed: Vec<Value> = terms
        .iter()
        .map(|t| json!({ "sites": t.sites, "amplitude": t.amplitude, "energy_j0": t.energy(g) }))
        .collect();
    Ok(json!({ "g": g, "n_terms": terms.len(), "terms": listed }))
}

/// Sets `pointer` in `doc`, creating intermediate objects.
pub fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<(), CliError> {
    let mut cur = doc;
    let keys: Vec<String> = pointer
        .split('/')
        .skip(1)
        .map(|k| k.replace("~1", "/").replace("~0", "~"))
        .collect();
    let Some((last, parents)) = keys.split_last() else {
        return Err(CliError::Config(format!("empty sweep pointer {pointer:?}")));
    };
    for k in parents {
        let obj = cur.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("sweep pointer {pointer:?} crosses a non-object"))
        })?;
        cur = obj.entry(k.clone()).or_insert_with(|| json!({}));
    }
    match cur {
        Value::Object(m) => {
            m.insert(last.clone(), value);
            Ok(())
        }
        Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| {
                CliError::Config(format!(
                    "sweep pointer {pointer:?} indexes an array by name"
                ))
            })?;
            let slot = a.get_mut(i).ok_or_else(|| {
                CliError::Config(format!("sweep pointer {pointer:?} out of range"))
            })?;
            *slot = value;
            Ok(())
        }
        _ => Err(CliError::Config(format!(
            "sweep pointer {pointer:?} crosses a scalar"
        ))),
    }
}

pub struct SweepOutcome {
    pub report: Value,
    pub first_failure: Option<i32>,
}

/// Runs every grid point; failures are recorded and do not stop the others.
pub fn run_sweep(ctx: &Context) -> Result<SweepOutcome, CliError> {
    let spec = ctx
        .cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a \"sweep\" section".into()))?;
    let mut base = ctx.cfg.clone();
    base.sweep = None;
    let base_doc = serde_json::to_value(&base).expect("config serializes");

    let axes: Vec<(&String, &Vec<Value>)> = spec.axes.iter().collect();
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let points: Vec<Vec<usize>> = (0..total)
        .map(|mut idx| {
            let mut digits = vec![0; axes.len()];
            for (d, (_, vals)) in digits.iter_mut().zip(&axes).rev() {
                *d = idx % vals.len();
                idx /= vals.len();
            }
            digits
        })
        .collect();

    let width = total.to_string().len();
    let results: Vec<(Value, Result<Value, CliError>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, digits)| {
            let params: serde_json::Map<String, Value> = axes
                .iter()
                .zip(digits)
                .map(|((k, vals), &d)| ((*k).clone(), vals[d].clone()))
                .collect();
            let run = || -> Result<Value, CliError> {
                let mut doc = base_doc.clone();
                for (k, v) in &params {
                    set_pointer(&mut doc, k, v.clone())?;
                }
                let text = serde_json::to_string(&doc).expect("json serializes");
                let cfg = RunConfig::parse(&text)?;
                let sub = Context {
                    cfg,
                    base: ctx.base.clone(),
                    out: ctx.out.join(format!("point_{i:0width$}")),
                };
                run_command(&sub, spec.command)
            };
            let res = run();
            (Value::Object(params), res)
        })
        .collect();

    let mut entries = Vec::new();
    let mut failed = Vec::new();
    let mut first_failure = None;
    let mut table = String::from("index,status");
    for (k, _) in &axes {
        table.push(',');
        table.push_str(k);
    }
    table.push('\n');
    for (i, (params, res)) in results.into_iter().enumerate() {
        let status = if res.is_ok() { "ok" } else { "failed" };
        table.push_str(&format!("{i},{status}"));
        for (k, _) in &axes {
            table.push(',');
            table.push_str(&params[k.as_str()].to_string().replace(',', ";"));
        }
        table.push('\n');
        match res {
            Ok(summary) => entries.push(
                json!({ "index": i, "params": params, "status": status, "summary": summary }),
            ),
            Err(e) => {
                first_failure.get_or_insert(e.exit_code());
                failed.push(i);
                entries.push(json!({ "index": i, "params": params, "status": status, "error": e.to_string(), "exit_code": e.exit_code() }))
            }
        }
    }
    let report = json!({ "command": spec.command.name(), "points": entries, "failed": failed });
    ctx.write_csv(spec.command, "sweep.csv", &table)?;
    ctx.write(
        "sweep.json",
        &format!(
            "{}\n",
            serde_json::to_string_pretty(
                &json!({ "seed": ctx.cfg.seed, "config": &ctx.cfg, "result": &report })
            )
            .expect("json serializes")
        ),
    )?;
    Ok(SweepOutcome {
        report,
        first_failure,
    })
}

pub fn resolve_base(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}
