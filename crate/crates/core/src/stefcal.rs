//! The StEFCal alternating least-squares calibration kernel.
//!
//! Each iteration solves `P` independent linear least-squares problems
//!
//! ```text
//! g_p = (V[:,p]^H · Z[:,p]) / (Z[:,p]^H · Z[:,p]),   Z[:,p] = M[:,p] ⊙ g_prev
//! ```
//!
//! through three kernels — the element-wise product (Z), the
//! multiply-accumulate numerator (MAC) and the square-accumulate denominator
//! (SAC) — exposed by the [`Backend`] trait so the same loop can run in
//! double precision, through a fixed-point datapath, or under statistical
//! error injection. On even iterations the solution is replaced by the
//! average of the current and previous iterates, which damps the kernel's
//! natural oscillation. The loop stops when the relative change between
//! consecutive gain vectors drops to the configured tolerance.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::CalibrationProblem;

#[derive(Debug, Error)]
pub enum StefcalError {
    #[error("singular denominator for antenna {antenna} at iteration {iteration}")]
    SingularDenominator { antenna: usize, iteration: usize },
    #[error("non-finite value at iteration {iteration}")]
    NumericFailure { iteration: usize },
    #[error("zero-norm gain vector in metric")]
    ZeroNorm,
    #[error("gain vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Which compute fabric produced an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreTag {
    Reference,
    Accurate,
    Approximate,
}

impl std::fmt::Display for CoreTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoreTag::Reference => write!(f, "reference"),
            CoreTag::Accurate => write!(f, "accurate"),
            CoreTag::Approximate => write!(f, "approximate"),
        }
    }
}

/// Arithmetic seam for one calibration iteration.
///
/// `begin_iteration` is called once per iteration before any kernel;
/// wrappers use it to draw gating decisions, the switching core uses it to
/// select the active datapath. Kernel evaluation within an iteration is
/// sequential over antennas, which keeps stateful backends bit-reproducible.
pub trait Backend {
    fn begin_iteration(&mut self, iteration: usize);

    /// Element-wise product `Z[:,p] = M[:,p] ⊙ g_prev` into `out`.
    fn z_column(&mut self, m_col: &[Complex64], g_prev: &[Complex64], out: &mut [Complex64]);

    /// Numerator kernel `V[:,p]^H · Z[:,p]`.
    fn mac(&mut self, v_col: &[Complex64], z_col: &[Complex64]) -> Complex64;

    /// Denominator kernel `Z[:,p]^H · Z[:,p]`.
    fn sac(&mut self, z_col: &[Complex64]) -> f64;

    /// Core label recorded in the trace for the current iteration.
    fn core_tag(&self) -> CoreTag;

    /// Whether any error was injected during the current iteration.
    fn error_injected(&self) -> bool {
        false
    }

    /// Denominators at or below this value are treated as singular.
    fn denominator_floor(&self) -> f64 {
        1e-300
    }
}

/// Plain double-precision arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceBackend;

impl Backend for ReferenceBackend {
    fn begin_iteration(&mut self, _iteration: usize) {}

    fn z_column(&mut self, m_col: &[Complex64], g_prev: &[Complex64], out: &mut [Complex64]) {
        for ((m, g), o) in m_col.iter().zip(g_prev).zip(out.iter_mut()) {
            *o = m * g;
        }
    }

    fn mac(&mut self, v_col: &[Complex64], z_col: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, z) in v_col.iter().zip(z_col) {
            acc += v.conj() * z;
        }
        acc
    }

    fn sac(&mut self, z_col: &[Complex64]) -> f64 {
        z_col.iter().map(|z| z.norm_sqr()).sum()
    }

    fn core_tag(&self) -> CoreTag {
        CoreTag::Reference
    }
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StefcalConfig {
    /// Iteration budget.
    pub max_iters: usize,
    /// Convergence tolerance on the relative gain change.
    pub tol: f64,
    /// Replace even-iteration solutions by the mean of the current and
    /// previous iterates.
    pub even_averaging: bool,
}

impl Default for StefcalConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-6,
            even_averaging: true,
        }
    }
}

/// One iteration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gains: Vec<Complex64>,
    /// Relative change `‖g_i − g_{i-1}‖ / ‖g_i‖`.
    pub convergence: f64,
    /// `‖V − G M G^H‖_F / ‖V‖_F`, evaluated in double precision.
    pub residual: f64,
    /// Relative distance to the reference run at the same iteration index,
    /// when a reference was supplied.
    pub diff_rel: Option<f64>,
    pub core: CoreTag,
    pub error_injected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "iterations")]
pub enum RunOutcome {
    Converged(usize),
    Exhausted(usize),
}

/// Per-iteration record of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub outcome: RunOutcome,
}

impl RunTrace {
    pub fn converged(&self) -> bool {
        matches!(self.outcome, RunOutcome::Converged(_))
    }

    pub fn iterations(&self) -> usize {
        match self.outcome {
            RunOutcome::Converged(n) | RunOutcome::Exhausted(n) => n,
        }
    }

    /// Iteration count on the even basis (averaged pairs count once).
    pub fn even_basis_iterations(&self) -> usize {
        self.iterations().div_ceil(2)
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace holds at least one record")
    }

    pub fn final_gains(&self) -> &[Complex64] {
        &self.final_record().gains
    }

    pub fn final_diff_rel(&self) -> Option<f64> {
        self.final_record().diff_rel
    }

    /// Gains of iteration `i` (1-based), or the final gains when the trace
    /// ended earlier.
    pub fn gains_at(&self, iteration: usize) -> &[Complex64] {
        let idx = iteration.min(self.records.len());
        &self.records[idx - 1].gains
    }

    /// Writes the per-iteration metrics as CSV
    /// (`i,convergence,residual,diff_rel,core,error_flag`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), StefcalError> {
        writeln!(w, "i,convergence,residual,diff_rel,core,error_flag")?;
        for r in &self.records {
            let diff = r.diff_rel.map(|d| d.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration, r.convergence, r.residual, diff, r.core, r.error_injected
            )?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), StefcalError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn l2_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Relative change between consecutive solution vectors,
/// `‖g_i − g_prev‖ / ‖g_i‖`.
pub fn convergence_metric(g_i: &[Complex64], g_prev: &[Complex64]) -> Result<f64, StefcalError> {
    if g_i.len() != g_prev.len() {
        return Err(StefcalError::LengthMismatch(g_i.len(), g_prev.len()));
    }
    let norm = l2_norm(g_i);
    if norm == 0.0 {
        return Err(StefcalError::ZeroNorm);
    }
    Ok(l2_distance(g_i, g_prev) / norm)
}

/// Relative distance of a solution from a reference solution,
/// `‖g_ref − g_other‖ / ‖g_ref‖`.
pub fn diff_rel(g_ref: &[Complex64], g_other: &[Complex64]) -> Result<f64, StefcalError> {
    if g_ref.len() != g_other.len() {
        return Err(StefcalError::LengthMismatch(g_ref.len(), g_other.len()));
    }
    let norm = l2_norm(g_ref);
    if norm == 0.0 {
        return Err(StefcalError::ZeroNorm);
    }
    Ok(l2_distance(g_ref, g_other) / norm)
}

/// Rotates `estimate` by a global phase so its leading component has the
/// same phase as the reference's leading component. Calibration determines
/// gains only up to a common phase (the neutral mode of the update), so
/// comparisons between solutions go through this referencing first; the
/// solver itself never applies it.
pub fn align_global_phase(reference: &[Complex64], estimate: &[Complex64]) -> Vec<Complex64> {
    let (Some(r0), Some(e0)) = (reference.first(), estimate.first()) else {
        return estimate.to_vec();
    };
    if r0.norm() == 0.0 || e0.norm() == 0.0 {
        return estimate.to_vec();
    }
    let rotation = Complex64::from_polar(1.0, r0.arg() - e0.arg());
    estimate.iter().map(|z| z * rotation).collect()
}

/// [`diff_rel`] with the common-phase ambiguity quotiented out via
/// [`align_global_phase`]. Traces record this form: a perturbation that
/// merely twists the common phase is not a solution error.
pub fn diff_rel_aligned(g_ref: &[Complex64], g_other: &[Complex64]) -> Result<f64, StefcalError> {
    diff_rel(g_ref, &align_global_phase(g_ref, g_other))
}

/// Single least-squares gain update for one antenna: MAC numerator over SAC
/// denominator, with the final division in double precision.
pub fn gain_update(
    backend: &mut dyn Backend,
    v_col: &[Complex64],
    z_col: &[Complex64],
    antenna: usize,
    iteration: usize,
) -> Result<Complex64, StefcalError> {
    let num = backend.mac(v_col, z_col);
    let den = backend.sac(z_col);
    if !(den > backend.denominator_floor()) {
        return Err(StefcalError::SingularDenominator { antenna, iteration });
    }
    Ok(num / den)
}

/// Element-wise product kernel for one column, allocating the output.
pub fn z_column(
    backend: &mut dyn Backend,
    m_col: &[Complex64],
    g_prev: &[Complex64],
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m_col.len()];
    backend.z_column(m_col, g_prev, &mut out);
    out
}

/// Runs the calibration loop.
///
/// Gains start at all-ones. When `reference` is supplied, each record
/// carries the relative distance to the reference gains at the same
/// iteration index (the reference's final gains once it has terminated).
pub fn run(
    problem: &CalibrationProblem,
    cfg: &StefcalConfig,
    backend: &mut dyn Backend,
    reference: Option<&RunTrace>,
) -> Result<RunTrace, StefcalError> {
    let p = problem.p;
    let mut g_prev = vec![Complex64::new(1.0, 0.0); p];
    let mut g = vec![Complex64::new(0.0, 0.0); p];
    let mut z = vec![Complex64::new(0.0, 0.0); p];
    let mut records = Vec::new();

    for i in 1..=cfg.max_iters {
        backend.begin_iteration(i);
        for antenna in 0..p {
            backend.z_column(problem.model.column(antenna), &g_prev, &mut z);
            g[antenna] = gain_update(backend, problem.measured.column(antenna), &z, antenna, i)?;
        }
        if cfg.even_averaging && i % 2 == 0 {
            for (cur, prev) in g.iter_mut().zip(&g_prev) {
                *cur = (*cur + prev) / 2.0;
            }
        }
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StefcalError::NumericFailure { iteration: i });
        }

        let convergence = convergence_metric(&g, &g_prev)?;
        let residual = problem.relative_residual(&g);
        let diff = reference
            .map(|r| diff_rel_aligned(r.gains_at(i), &g))
            .transpose()?;
        records.push(IterationRecord {
            iteration: i,
            gains: g.clone(),
            convergence,
            residual,
            diff_rel: diff,
            core: backend.core_tag(),
            error_injected: backend.error_injected(),
        });

        if convergence <= cfg.tol {
            return Ok(RunTrace {
                records,
                outcome: RunOutcome::Converged(i),
            });
        }
        std::mem::swap(&mut g_prev, &mut g);
    }

    Ok(RunTrace {
        outcome: RunOutcome::Exhausted(cfg.max_iters),
        records,
    })
}

/// Verdict of the combined quality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAcceptance {
    pub accepted: bool,
    pub reasons: Vec<String>,
    pub final_diff_rel: Option<f64>,
    pub iterations: usize,
    pub reference_iterations: usize,
}

/// Relative-distance threshold between an approximate and the exact
/// solution for quality acceptance.
pub const DIFF_REL_LIMIT: f64 = 1e-5;

/// Quality acceptance: the run must have converged, its final solution must
/// lie within [`DIFF_REL_LIMIT`] of the reference at the matching iteration,
/// and it must not have used more iterations than the reference.
pub fn quality_acceptance(trace: &RunTrace, reference: &RunTrace) -> QualityAcceptance {
    let mut reasons = Vec::new();
    if !trace.converged() {
        reasons.push(format!(
            "convergence: not reached within {} iterations",
            trace.iterations()
        ));
    }
    let final_diff = trace.final_diff_rel();
    match final_diff {
        Some(d) if d <= DIFF_REL_LIMIT => {}
        Some(d) => reasons.push(format!("diff_rel: {d:.3e} above limit {DIFF_REL_LIMIT:.0e}")),
        None => reasons.push("diff_rel: not recorded (run had no reference)".into()),
    }
    if trace.iterations() > reference.iterations() {
        reasons.push(format!(
            "iterations: {} above reference {}",
            trace.iterations(),
            reference.iterations()
        ));
    }
    QualityAcceptance {
        accepted: reasons.is_empty(),
        reasons,
        final_diff_rel: final_diff,
        iterations: trace.iterations(),
        reference_iterations: reference.iterations(),
    }
}
