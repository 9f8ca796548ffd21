//! Parameter-sweep harness mapping the quality-accepted region over the
//! injection parameters (error mean, error predictability, error rate,
//! approximate-iteration budget).
//!
//! Grid points are independent; the sweep runs them in parallel and merges
//! results by grid index, so the profile is identical for any worker count.
//! Every (point, trial) pair derives its own seed from the base seed, which
//! keeps individual runs reproducible in isolation.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::CalibrationProblem;
use crate::errormodel::{ErrorModelConfig, InjectionSite, NaxBudget};
use crate::stefcal::{quality_acceptance, run, Backend, RunTrace, StefcalConfig};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("reference run did not converge within {0} iterations")]
    ReferenceDidNotConverge(usize),
    #[error("sweep grid axis '{0}' is empty")]
    EmptyAxis(&'static str),
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("reference run failed: {0}")]
    Reference(#[from] crate::stefcal::StefcalError),
    #[error("error model: {0}")]
    ErrorModel(#[from] crate::errormodel::ErrorModelError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Sweep axes and trial settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub em: Vec<f64>,
    pub ep: Vec<f64>,
    pub er: Vec<f64>,
    pub n_ax: Vec<NaxBudget>,
    pub trials: u32,
    pub base_seed: u64,
    pub sites: BTreeSet<InjectionSite>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.em.is_empty() {
            return Err(SweepError::EmptyAxis("em"));
        }
        if self.ep.is_empty() {
            return Err(SweepError::EmptyAxis("ep"));
        }
        if self.er.is_empty() {
            return Err(SweepError::EmptyAxis("er"));
        }
        if self.n_ax.is_empty() {
            return Err(SweepError::EmptyAxis("n_ax"));
        }
        if self.trials == 0 {
            return Err(SweepError::NoTrials);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.em.len() * self.ep.len() * self.er.len() * self.n_ax.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of an axis coordinate, row-major over (em, ep, er, n_ax).
    pub fn index_of(&self, i_em: usize, i_ep: usize, i_er: usize, i_nax: usize) -> usize {
        ((i_em * self.ep.len() + i_ep) * self.er.len() + i_er) * self.n_ax.len() + i_nax
    }

    fn points(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut pts = Vec::with_capacity(self.len());
        for i_em in 0..self.em.len() {
            for i_ep in 0..self.ep.len() {
                for i_er in 0..self.er.len() {
                    for i_nax in 0..self.n_ax.len() {
                        pts.push((i_em, i_ep, i_er, i_nax));
                    }
                }
            }
        }
        pts
    }
}

/// Aggregated outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub em: f64,
    pub ep: f64,
    pub er: f64,
    pub n_ax: NaxBudget,
    pub trials: u32,
    pub accepted_trials: u32,
    pub acceptance_rate: f64,
    /// Mean final relative distance to the reference over the trials that
    /// produced a trace; NaN when none did.
    pub mean_final_diff_rel: f64,
    pub mean_iterations: f64,
    pub failed_trials: u32,
}

/// Per-axis maxima with full acceptance at the fixed error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub er: f64,
    pub n_ax: NaxBudget,
    pub em: f64,
    pub ep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceProfile {
    pub grid: SweepGrid,
    pub points: Vec<GridPointResult>,
    pub reference_iterations: usize,
    pub frontier: Option<Frontier>,
}

/// Derives a per-(point, trial) seed from the base seed (SplitMix64 mixing).
pub fn derive_seed(base: u64, point_index: u64, trial: u64) -> u64 {
    let mut z = base
        .wrapping_add(point_index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(trial.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs the sweep: one reference run, then `trials` injected runs per grid
/// point, each judged by quality acceptance against the reference.
///
/// `backend_base` builds a fresh inner backend per run.
pub fn run_sweep<B, F>(
    problem: &CalibrationProblem,
    cfg: &StefcalConfig,
    grid: &SweepGrid,
    backend_base: F,
    er_fixed_for_frontier: f64,
) -> Result<ResilienceProfile, SweepError>
where
    B: Backend,
    F: Fn() -> B + Sync,
{
    grid.validate()?;
    let mut reference_backend = backend_base();
    let reference = run(problem, cfg, &mut reference_backend, None)?;
    if !reference.converged() {
        return Err(SweepError::ReferenceDidNotConverge(cfg.max_iters));
    }
    let ref_iters = reference.iterations();

    let coords = grid.points();
    let points: Vec<GridPointResult> = coords
        .par_iter()
        .map(|&(i_em, i_ep, i_er, i_nax)| {
            let index = grid.index_of(i_em, i_ep, i_er, i_nax);
            evaluate_point(
                problem,
                cfg,
                grid,
                &backend_base,
                &reference,
                ref_iters,
                index as u64,
                grid.em[i_em],
                grid.ep[i_ep],
                grid.er[i_er],
                grid.n_ax[i_nax],
            )
        })
        .collect::<Result<_, _>>()?;

    let mut profile = ResilienceProfile {
        grid: grid.clone(),
        points,
        reference_iterations: ref_iters,
        frontier: None,
    };
    profile.frontier = frontier(&profile, er_fixed_for_frontier);
    Ok(profile)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_point<B, F>(
    problem: &CalibrationProblem,
    cfg: &StefcalConfig,
    grid: &SweepGrid,
    backend_base: &F,
    reference: &RunTrace,
    ref_iters: usize,
    point_index: u64,
    em: f64,
    ep: f64,
    er: f64,
    n_ax: NaxBudget,
) -> Result<GridPointResult, SweepError>
where
    B: Backend,
    F: Fn() -> B + Sync,
{
    let mut accepted = 0u32;
    let mut failed = 0u32;
    let mut diff_sum = 0.0;
    let mut diff_count = 0u32;
    let mut iter_sum = 0.0;
    for trial in 0..grid.trials {
        let model = ErrorModelConfig {
            em,
            ep,
            er,
            n_ax,
            sites: grid.sites.clone(),
            seed: derive_seed(grid.base_seed, point_index, trial as u64),
        };
        let mut backend = model.wrap(backend_base(), Some(ref_iters))?;
        match run(problem, cfg, &mut backend, Some(reference)) {
            Ok(trace) => {
                if quality_acceptance(&trace, reference).accepted {
                    accepted += 1;
                }
                if let Some(d) = trace.final_diff_rel() {
                    diff_sum += d;
                    diff_count += 1;
                }
                iter_sum += trace.iterations() as f64;
            }
            // Diverged arithmetic counts as a rejected trial.
            Err(_) => failed += 1,
        }
    }
    Ok(GridPointResult {
        em,
        ep,
        er,
        n_ax,
        trials: grid.trials,
        accepted_trials: accepted,
        acceptance_rate: accepted as f64 / grid.trials as f64,
        mean_final_diff_rel: if diff_count > 0 {
            diff_sum / diff_count as f64
        } else {
            f64::NAN
        },
        mean_iterations: if grid.trials > failed {
            iter_sum / (grid.trials - failed) as f64
        } else {
            f64::NAN
        },
        failed_trials: failed,
    })
}

/// Greedy axis-wise frontier at a fixed error rate.
///
/// Axes are scanned in the order `n_ax`, `em`, `ep`, each in its grid order
/// (assumed ascending). The frontier value of an axis is the last value in
/// the contiguous fully-accepted prefix while the already-scanned axes sit
/// at their frontier values and the not-yet-scanned axes at their first grid
/// value. Returns `None` when even the base point is not fully accepted or
/// the fixed error rate is not on the grid.
pub fn frontier(profile: &ResilienceProfile, er_fixed: f64) -> Option<Frontier> {
    let grid = &profile.grid;
    let i_er = grid.er.iter().position(|e| *e == er_fixed)?;
    let full = |i_em: usize, i_ep: usize, i_nax: usize| -> bool {
        let p = &profile.points[grid.index_of(i_em, i_ep, i_er, i_nax)];
        p.accepted_trials == p.trials
    };

    let mut best_nax = None;
    for i in 0..grid.n_ax.len() {
        if full(0, 0, i) {
            best_nax = Some(i);
        } else {
            break;
        }
    }
    let i_nax = best_nax?;
    let mut i_em = 0;
    for i in 0..grid.em.len() {
        if full(i, 0, i_nax) {
            i_em = i;
        } else {
            break;
        }
    }
    let mut i_ep = 0;
    for i in 0..grid.ep.len() {
        if full(i_em, i, i_nax) {
            i_ep = i;
        } else {
            break;
        }
    }
    Some(Frontier {
        er: er_fixed,
        n_ax: grid.n_ax[i_nax],
        em: grid.em[i_em],
        ep: grid.ep[i_ep],
    })
}

/// Analytic per-kernel share of the floating-point work in one iteration.
///
/// Weights per antenna pair: the element-wise product costs one complex
/// multiply (6 flops), the numerator one complex multiply-accumulate
/// (8 flops), the denominator one self-conjugate multiply-accumulate
/// (8 flops); each column ends with one complex-by-real division (2 flops).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelLoadShares {
    pub z_percent: f64,
    pub mac_percent: f64,
    pub sac_percent: f64,
    pub division_percent: f64,
}

impl KernelLoadShares {
    pub fn dot_products_percent(&self) -> f64 {
        self.mac_percent + self.sac_percent
    }
}

/// Computes the kernel load shares for a problem with `p` antennas.
pub fn profile_kernels(p: usize) -> KernelLoadShares {
    let p = p as f64;
    let z = 6.0 * p * p;
    let mac = 8.0 * p * p;
    let sac = 8.0 * p * p;
    let div = 2.0 * p;
    let total = z + mac + sac + div;
    KernelLoadShares {
        z_percent: 100.0 * z / total,
        mac_percent: 100.0 * mac / total,
        sac_percent: 100.0 * sac / total,
        division_percent: 100.0 * div / total,
    }
}

/// Spearman rank correlation with average ranks for ties. Returns zero for
/// degenerate inputs (fewer than two points or a constant sequence).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return 0.0;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn nax_label(b: &NaxBudget) -> String {
    match b {
        NaxBudget::Unlimited => "unlimited".into(),
        NaxBudget::Iterations(n) => n.to_string(),
        NaxBudget::PercentOfReference(p) => format!("{p}%"),
    }
}

impl ResilienceProfile {
    /// Long-format CSV, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SweepError> {
        writeln!(
            w,
            "em,ep,er,n_ax,trials,accepted_trials,acceptance_rate,mean_final_diff_rel,mean_iterations,failed_trials"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                p.em,
                p.ep,
                p.er,
                nax_label(&p.n_ax),
                p.trials,
                p.accepted_trials,
                p.acceptance_rate,
                p.mean_final_diff_rel,
                p.mean_iterations,
                p.failed_trials
            )?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), SweepError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Mean final diff_rel along the `n_ax` axis at fixed (em, ep, er)
    /// indices, in axis order. Used for trend checks.
    pub fn diff_rel_along_nax(&self, i_em: usize, i_ep: usize, i_er: usize) -> Vec<f64> {
        (0..self.grid.n_ax.len())
            .map(|i| self.points[self.grid.index_of(i_em, i_ep, i_er, i)].mean_final_diff_rel)
            .collect()
    }

    /// Mean final diff_rel along the `em` axis at fixed (ep, er, n_ax).
    pub fn diff_rel_along_em(&self, i_ep: usize, i_er: usize, i_nax: usize) -> Vec<f64> {
        (0..self.grid.em.len())
            .map(|i| self.points[self.grid.index_of(i, i_ep, i_er, i_nax)].mean_final_diff_rel)
            .collect()
    }
}
