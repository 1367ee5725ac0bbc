//! Sweep orchestration: grids, warm-started point chains, caching and
//! curve-file output.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use critx_core::eigen::{LanczosOptions, SolveOptions};
use critx_core::fidelity::{DrivenModel, FsMethod};
use log::{info, warn};

use crate::cache::{key_of, CachedPoint, CurveCache};
use crate::config::{fmt_f64, CurveJob, GridSpec, SweepConfig};
use crate::curvefile::{model_header, CurveFile, CurveRow};
use crate::CliError;

/// Memory shared by the Lanczos bases of all workers.
pub const MEMORY_BUDGET: usize = 2 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub x: f64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct CurveOutcome {
    pub job: CurveJob,
    pub key: String,
    pub path: PathBuf,
    pub file: CurveFile,
    pub computed: usize,
    pub cached: usize,
    pub failures: Vec<PointFailure>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub curves: Vec<CurveOutcome>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.curves.iter().map(|c| c.failures.len()).sum()
    }

    pub fn computed(&self) -> usize {
        self.curves.iter().map(|c| c.computed).sum()
    }
}

/// Cache key fields of one curve.
pub fn key_fields(cfg: &SweepConfig, job: &CurveJob) -> Result<Vec<(String, String)>, CliError> {
    let mut f = model_header(&job.params, job.tag);
    f.extend(cfg.physics_fields()?.into_iter().map(|(k, v)| (k.to_string(), v)));
    Ok(f)
}

/// Evaluates points along one curve, reusing the previous ground state
/// as the Lanczos start while consecutive points are computed.
struct Chain<'a> {
    model: DrivenModel,
    method: FsMethod,
    delta: f64,
    cache: &'a CurveCache,
    warm: Option<Vec<f64>>,
    computed: usize,
    cached: usize,
}

impl Chain<'_> {
    fn eval(&mut self, x: f64) -> Result<CachedPoint, String> {
        if let Some(p) = self.cache.load(x) {
            self.cached += 1;
            self.warm = None;
            return Ok(p);
        }
        match self.model.fs_near(x, self.method, self.delta, self.warm.as_deref()) {
            Ok((p, state)) => {
                self.warm = state;
                self.computed += 1;
                let c = CachedPoint::from_point(&p);
                self.cache.store(&c).map_err(|e| e.to_string())?;
                Ok(c)
            }
            Err(e) => {
                self.warm = None;
                Err(e.to_string())
            }
        }
    }
}

/// Points of a grid; a two-tier grid is handled by [`run_curve`].
pub fn grid_points(grid: &GridSpec) -> Vec<f64> {
    match grid {
        GridSpec::Range { start, stop, count } => {
            if *count == 1 {
                return vec![*start];
            }
            (0..*count).map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64).collect()
        }
        GridSpec::List { values } => values.clone(),
        GridSpec::TwoTier { start, stop, coarse, fine, .. } => {
            let k_max = ((stop - start) / fine + 1e-9).floor() as i64;
            let r = (coarse / fine).round() as i64;
            (0..=k_max).filter(|k| k % r == 0).map(|k| start + k as f64 * fine).collect()
        }
    }
}

fn run_curve(cfg: &SweepConfig, job: &CurveJob, cache_root: &Path, workers: usize) -> Result<CurveOutcome, CliError> {
    let fields = key_fields(cfg, job)?;
    let key = key_of(&fields);
    let cache = CurveCache::new(cache_root, &key);
    cache.write_manifest(&fields)?;

    let model = DrivenModel::new(job.params.clone(), job.tag).map_err(|e| CliError::Config(e.to_string()))?;
    let dim = model.system().dim();
    let lanczos = LanczosOptions {
        tol: cfg.lanczos_tol,
        max_iter: cfg.max_iter,
        seed: cfg.seed,
        ..LanczosOptions::default()
    }
    .with_memory_budget(dim, MEMORY_BUDGET / workers);
    let solve = SolveOptions { tol: cfg.solve_tol, ..SolveOptions::default() };
    let model = model.with_options(lanczos, solve);
    let mut chain = Chain {
        model,
        method: cfg.method()?,
        delta: cfg.delta,
        cache: &cache,
        warm: None,
        computed: 0,
        cached: 0,
    };

    let mut results: Vec<(f64, Result<CachedPoint, String>)> = Vec::new();
    for x in grid_points(&cfg.grid) {
        let r = chain.eval(x);
        results.push((x, r));
    }
    if let GridSpec::TwoTier { start, stop, coarse, fine, window } = cfg.grid {
        let best = results
            .iter()
            .filter_map(|(x, r)| r.as_ref().ok().map(|p| (*x, p.chi)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((xb, _)) = best {
            let r = (coarse / fine).round() as i64;
            let k_max = ((stop - start) / fine + 1e-9).floor() as i64;
            let kb = ((xb - start) / fine).round() as i64;
            let w = (window / fine + 1e-9).floor() as i64;
            chain.warm = None;
            for k in (kb - w).max(0)..=(kb + w).min(k_max) {
                if k % r != 0 {
                    let x = start + k as f64 * fine;
                    let res = chain.eval(x);
                    results.push((x, res));
                }
            }
        }
        results.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (x, r) in results {
        match r {
            Ok(p) => rows.push(CurveRow {
                t: p.x,
                chi: p.chi,
                method: p.method()?,
                delta_used: p.delta_used,
                residual: p.residual,
            }),
            Err(error) => {
                warn!("{} at {x}: {error}", job.label());
                failures.push(PointFailure { x, error });
            }
        }
    }

    let mut header = vec![("critx_curve".to_string(), "1".to_string())];
    header.extend(fields);
    header.push(("filling".into(), job.filling.clone().unwrap_or_default()));
    header.push(("dim".into(), dim.to_string()));
    header.push(("grid".into(), serde_json::to_string(&cfg.grid).map_err(|e| CliError::Io(e.to_string()))?));
    header.push(("code_version".into(), env!("CARGO_PKG_VERSION").into()));
    header.push(("cache_key".into(), key.clone()));
    header.push(("diagnostics".into(), cache.dir().display().to_string()));
    header.push((
        "failed_points".into(),
        failures.iter().map(|f| fmt_f64(f.x)).collect::<Vec<_>>().join(";"),
    ));
    header.push(("config".into(), serde_json::to_string(cfg).map_err(|e| CliError::Io(e.to_string()))?));
    let file = CurveFile { header, rows };
    let path = cfg.output.join(format!("{}.csv", job.label()));
    file.write(&path)?;
    info!(
        "{}: {} computed, {} cached, {} failed -> {}",
        job.label(),
        chain.computed,
        chain.cached,
        failures.len(),
        path.display()
    );
    Ok(CurveOutcome {
        job: job.clone(),
        key,
        path,
        file,
        computed: chain.computed,
        cached: chain.cached,
        failures,
    })
}

/// Run every curve of `cfg`, up to `cfg.workers` curves at a time.
pub fn run_sweep(cfg: &SweepConfig, cache_root: &Path) -> Result<SweepOutcome, CliError> {
    let jobs = cfg.jobs()?;
    let workers = cfg.workers.min(jobs.len()).max(1);
    let queue = Mutex::new((0..jobs.len()).collect::<VecDeque<_>>());
    let slots: Mutex<Vec<Option<Result<CurveOutcome, CliError>>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let next = queue.lock().unwrap_or_else(|p| p.into_inner()).pop_front();
                let Some(i) = next else { break };
                let r = run_curve(cfg, &jobs[i], cache_root, workers);
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
            });
        }
    });
    let mut curves = Vec::new();
    for r in slots.into_inner().unwrap_or_else(|p| p.into_inner()) {
        curves.push(r.ok_or_else(|| CliError::Io("worker exited without a result".into()))??);
    }
    Ok(SweepOutcome { curves })
}
