use std::collections::BTreeSet;

use serde_json::json;

use axcal_core::datagen;
use axcal_core::errormodel::{InjectionSite, NaxBudget};
use axcal_core::resilience::{run_sweep, SweepGrid};
use axcal_core::stefcal::{ReferenceBackend, StefcalConfig};

use crate::args::{NaxUnit, ResilienceArgs};
use crate::config;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::output;
use crate::ranges::parse_range;

fn parse_sites(text: &str) -> Result<BTreeSet<InjectionSite>, CliError> {
    let mut sites = BTreeSet::new();
    for part in text.split(',') {
        let site = match part.trim() {
            "z" => InjectionSite::ZKernel,
            "mac" => InjectionSite::MacKernel,
            "sac" => InjectionSite::SacKernel,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown site '{other}' (expected z, mac, sac)"
                )))
            }
        };
        sites.insert(site);
    }
    Ok(sites)
}

fn parse_nax_axis(text: &str, unit: NaxUnit) -> Result<Vec<NaxBudget>, CliError> {
    if text.trim().eq_ignore_ascii_case("inf") {
        return Ok(vec![NaxBudget::Unlimited]);
    }
    let values = parse_range(text)?;
    Ok(values
        .into_iter()
        .map(|v| match unit {
            NaxUnit::Percent => NaxBudget::PercentOfReference(v),
            NaxUnit::Iterations => NaxBudget::Iterations(v.round() as usize),
        })
        .collect())
}

pub fn run(args: ResilienceArgs) -> Result<(), CliError> {
    let cfg_file = config::load(args.config.as_deref())?;
    let r = &cfg_file.resilience;
    let em_text = args.em.clone().or_else(|| r.em.clone()).unwrap_or_else(|| "0".into());
    let ep_text = args.ep.clone().or_else(|| r.ep.clone()).unwrap_or_else(|| "0".into());
    let er_text = args.er.clone().or_else(|| r.er.clone()).unwrap_or_else(|| "100".into());
    let nax_text = args.nax.clone().or_else(|| r.nax.clone()).unwrap_or_else(|| "inf".into());
    let nax_unit = args.nax_unit.unwrap_or(match r.nax_unit.as_deref() {
        Some("iterations") => NaxUnit::Iterations,
        _ => NaxUnit::Percent,
    });
    let trials = args.trials.or(r.trials).unwrap_or(5);
    let sites_text = args.sites.clone().or_else(|| r.sites.clone()).unwrap_or_else(|| "z".into());
    let tol = args.tol.or(r.tol).unwrap_or(1e-6);
    let max_iters = args.max_iters.or(r.max_iters).unwrap_or(500);
    let seed = args
        .seed
        .or(r.seed)
        .ok_or_else(|| CliError::Validation("--seed is required".into()))?;
    let jobs = args.jobs.unwrap_or(0);

    let em = parse_range(&em_text)?;
    let ep = parse_range(&ep_text)?;
    let er = parse_range(&er_text)?;
    let n_ax = parse_nax_axis(&nax_text, nax_unit)?;
    let er_fixed = args
        .er_fixed
        .or(r.er_fixed)
        .unwrap_or_else(|| er.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let sites = parse_sites(&sites_text)?;

    let grid = SweepGrid {
        em,
        ep,
        er,
        n_ax,
        trials,
        base_seed: seed,
        sites,
    };
    let problem = datagen::load_problem(&args.problem)?;
    let solver_cfg = StefcalConfig {
        max_iters,
        tol,
        even_averaging: true,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let profile = pool.install(|| {
        run_sweep(&problem, &solver_cfg, &grid, || ReferenceBackend, er_fixed)
    })?;

    output::ensure_dir(&args.out)?;
    let csv_path = args.out.join("profile.csv");
    let json_path = args.out.join("profile.json");
    let manifest_path = args.out.join("manifest.json");

    let mut csv = Vec::new();
    profile.write_csv(&mut csv)?;
    output::write_atomic(&csv_path, &csv)?;
    output::write_json_atomic(&json_path, &profile)?;

    Manifest::new(
        "resilience",
        json!({
            "problem": args.problem,
            "em": em_text,
            "ep": ep_text,
            "er": er_text,
            "nax": nax_text,
            "nax_unit": match nax_unit { NaxUnit::Percent => "percent", NaxUnit::Iterations => "iterations" },
            "trials": trials,
            "sites": sites_text,
            "er_fixed": er_fixed,
            "tol": tol,
            "max_iters": max_iters,
            "seed": seed,
        }),
        vec![args.problem.clone()],
        vec![csv_path, json_path],
        Some(seed),
    )
    .write(&manifest_path)?;

    let accepted = profile
        .points
        .iter()
        .filter(|p| p.accepted_trials == p.trials)
        .count();
    println!(
        "swept {} grid points x {} trials: {} fully accepted; frontier {}",
        profile.points.len(),
        trials,
        accepted,
        match &profile.frontier {
            Some(f) => format!("em<={} ep<={} at er={}", f.em, f.ep, f.er),
            None => "empty".into(),
        }
    );
    Ok(())
}
