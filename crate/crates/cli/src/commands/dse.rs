use std::io::Write;

use serde_json::json;

use axcal_core::accel::{explore_dse, DatapathConfig, PowerModel};
use axcal_core::datagen;
use axcal_core::stefcal::StefcalConfig;

use crate::args::DseArgs;
use crate::config;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::output;

fn read_candidates(path: &std::path::Path) -> Result<Vec<[u32; 6]>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("candidates {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Validation("candidates file is empty".into()))?
        .1;
    let expect = "h,t,e_sac,f_sac,e_mac,f_mac";
    if header.trim() != expect {
        return Err(CliError::Validation(format!(
            "candidates header '{header}' (expected '{expect}')"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::Validation(format!(
                "candidates line {}: expected 6 fields",
                lineno + 1
            )));
        }
        let mut row = [0u32; 6];
        for (k, f) in fields.iter().enumerate() {
            row[k] = f.trim().parse().map_err(|_| {
                CliError::Validation(format!("candidates line {}: bad value '{f}'", lineno + 1))
            })?;
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(CliError::Validation("candidates file has no rows".into()));
    }
    Ok(out)
}

pub fn run(args: DseArgs) -> Result<(), CliError> {
    let cfg_file = config::load(args.config.as_deref())?;
    let d = &cfg_file.dse;
    let p_acc = args.p_acc.or(d.p_acc).unwrap_or(3.55);
    let anchor_power = args.anchor_power.or(d.anchor_power).unwrap_or(2.08);
    let anchor_bits = args.anchor_bits.or(d.anchor_bits).unwrap_or(36);
    let tol = args.tol.or(d.tol).unwrap_or(1e-6);
    let max_iters = args.max_iters.or(d.max_iters).unwrap_or(500);
    let jobs = args.jobs.unwrap_or(0);
    if p_acc <= 0.0 || anchor_power < 0.0 || anchor_bits == 0 {
        return Err(CliError::Validation(
            "power anchors must satisfy p_acc > 0, anchor_power >= 0, anchor_bits > 0".into(),
        ));
    }

    let candidates = read_candidates(&args.candidates)?;
    let problem = datagen::load_problem(&args.problem)?;
    let dp_acc = match &args.datapath {
        Some(p) => config::load_datapath(p)?,
        None => DatapathConfig::accurate(),
    };
    let power = PowerModel {
        p_acc_mw: p_acc,
        anchor_truncated_bits: anchor_bits,
        anchor_power_mw: anchor_power,
    };
    let solver_cfg = StefcalConfig {
        max_iters,
        tol,
        even_averaging: true,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let points =
        pool.install(|| explore_dse(&problem, &solver_cfg, &dp_acc, &candidates, &power))?;

    output::ensure_dir(&args.out)?;
    let csv_path = args.out.join("dse.csv");
    let json_path = args.out.join("dse.json");
    let manifest_path = args.out.join("manifest.json");

    let mut csv = Vec::new();
    writeln!(csv, "h,t,e_sac,f_sac,e_mac,f_mac,n_ax,p_ax_mw,s_e")?;
    for p in &points {
        let t = p.truncation;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            t[0], t[1], t[2], t[3], t[4], t[5], p.n_ax, p.p_ax_mw, p.s_e
        )?;
    }
    output::write_atomic(&csv_path, &csv)?;
    output::write_json_atomic(&json_path, &points)?;

    Manifest::new(
        "dse",
        json!({
            "problem": args.problem,
            "candidates": args.candidates,
            "p_acc": p_acc,
            "anchor_power": anchor_power,
            "anchor_bits": anchor_bits,
            "tol": tol,
            "max_iters": max_iters,
            "datapath": args.datapath,
        }),
        vec![args.problem.clone(), args.candidates.clone()],
        vec![csv_path, json_path],
        None,
    )
    .write(&manifest_path)?;

    if let Some(best) = points.first() {
        println!(
            "explored {} candidates; best truncation {:?}: n_ax={} p_ax={:.3} mW s_e={:.1}%",
            points.len(),
            best.truncation,
            best.n_ax,
            best.p_ax_mw,
            100.0 * best.s_e
        );
    }
    Ok(())
}
