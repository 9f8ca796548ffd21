use serde::Serialize;
use serde_json::json;

use axcal_core::accel::{make_backend, DatapathConfig, FixedBackend, SwitchingBackend};
use axcal_core::datagen;
use axcal_core::stefcal::{
    quality_acceptance, run as run_solver, Backend, QualityAcceptance, ReferenceBackend, RunTrace,
    StefcalConfig,
};
use axcal_core::QuantStats;

use crate::args::{BackendKind, CalibrateArgs};
use crate::config;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::output;

enum AnyBackend {
    Reference(ReferenceBackend),
    Fixed(FixedBackend),
    Switching(SwitchingBackend),
}

impl AnyBackend {
    fn as_dyn(&mut self) -> &mut dyn Backend {
        match self {
            AnyBackend::Reference(b) => b,
            AnyBackend::Fixed(b) => b,
            AnyBackend::Switching(b) => b,
        }
    }

    fn stats(&self) -> Option<QuantStats> {
        match self {
            AnyBackend::Reference(_) => None,
            AnyBackend::Fixed(b) => Some(b.stats()),
            AnyBackend::Switching(b) => Some(b.stats()),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    converged: bool,
    iterations: usize,
    /// Iteration count with averaged pairs counted once.
    even_basis_iterations: usize,
    final_convergence: f64,
    final_residual: f64,
    final_diff_rel: Option<f64>,
    backend: &'a str,
    n_ax: Option<usize>,
    quantization_stats: Option<QuantStats>,
    acceptance: Option<QualityAcceptance>,
}

pub fn run(args: CalibrateArgs) -> Result<(), CliError> {
    let cfg_file = config::load(args.config.as_deref())?;
    let backend_kind = match args.backend {
        Some(k) => k,
        None => match cfg_file.calibrate.backend.as_deref() {
            None | Some("ref") => BackendKind::Ref,
            Some("acc") => BackendKind::Acc,
            Some("ax") => BackendKind::Ax,
            Some("hetero") => BackendKind::Hetero,
            Some(other) => {
                return Err(CliError::Validation(format!("unknown backend '{other}'")))
            }
        },
    };
    let tol = args.tol.or(cfg_file.calibrate.tol).unwrap_or(1e-6);
    let max_iters = args.max_iters.or(cfg_file.calibrate.max_iters).unwrap_or(500);
    let n_ax = args.n_ax.or(cfg_file.calibrate.n_ax);
    if tol <= 0.0 {
        return Err(CliError::Validation(format!("tolerance {tol} must be > 0")));
    }

    let problem = datagen::load_problem(&args.problem)?;
    let solver_cfg = StefcalConfig {
        max_iters,
        tol,
        even_averaging: !args.no_even_averaging,
    };

    let dp_acc = match &args.datapath {
        Some(p) => config::load_datapath(p)?,
        None => DatapathConfig::accurate(),
    };
    let dp_ax = match &args.datapath_ax {
        Some(p) => config::load_datapath(p)?,
        None => DatapathConfig::approximate(),
    };

    let (mut backend, backend_name) = match backend_kind {
        BackendKind::Ref => (AnyBackend::Reference(ReferenceBackend), "ref"),
        BackendKind::Acc => (AnyBackend::Fixed(make_backend(&dp_acc)?), "acc"),
        BackendKind::Ax => (AnyBackend::Fixed(make_backend(&dp_ax)?), "ax"),
        BackendKind::Hetero => {
            let n = n_ax.ok_or_else(|| {
                CliError::Validation("--n-ax is required for the hetero backend".into())
            })?;
            (
                AnyBackend::Switching(SwitchingBackend::new(&dp_acc, &dp_ax, n)?),
                "hetero",
            )
        }
    };

    let reference: Option<RunTrace> = match &args.ref_trace {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("ref trace {}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| {
                CliError::Validation(format!("ref trace {}: {e}", p.display()))
            })?)
        }
    };

    let trace = run_solver(&problem, &solver_cfg, backend.as_dyn(), reference.as_ref())?;

    output::ensure_dir(&args.out)?;
    let trace_csv = args.out.join("trace.csv");
    let trace_json = args.out.join("trace.json");
    let summary_json = args.out.join("summary.json");
    let manifest_json = args.out.join("manifest.json");

    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    output::write_atomic(&trace_csv, &csv)?;
    output::write_json_atomic(&trace_json, &trace)?;

    let acceptance = reference.as_ref().map(|r| quality_acceptance(&trace, r));
    let summary = Summary {
        converged: trace.converged(),
        iterations: trace.iterations(),
        even_basis_iterations: trace.even_basis_iterations(),
        final_convergence: trace.final_record().convergence,
        final_residual: trace.final_record().residual,
        final_diff_rel: trace.final_diff_rel(),
        backend: backend_name,
        n_ax: if backend_kind == BackendKind::Hetero { n_ax } else { None },
        quantization_stats: backend.stats(),
        acceptance,
    };
    output::write_json_atomic(&summary_json, &summary)?;

    Manifest::new(
        "calibrate",
        json!({
            "problem": args.problem,
            "backend": backend_name,
            "n_ax": summary.n_ax,
            "tol": tol,
            "max_iters": max_iters,
            "even_averaging": solver_cfg.even_averaging,
            "ref_trace": args.ref_trace,
            "datapath": args.datapath,
            "datapath_ax": args.datapath_ax,
        }),
        collect_inputs(&args),
        vec![trace_csv, trace_json, summary_json],
        None,
    )
    .write(&manifest_json)?;

    println!(
        "{}: {} in {} iterations (final convergence {:.3e})",
        backend_name,
        if trace.converged() { "converged" } else { "did not converge" },
        trace.iterations(),
        trace.final_record().convergence
    );
    if !trace.converged() {
        return Err(CliError::NonConvergence(max_iters));
    }
    Ok(())
}

fn collect_inputs(args: &CalibrateArgs) -> Vec<std::path::PathBuf> {
    let mut v = vec![args.problem.clone()];
    for p in [&args.ref_trace, &args.datapath, &args.datapath_ax, &args.config] {
        if let Some(p) = p {
            v.push(p.clone());
        }
    }
    v
}
