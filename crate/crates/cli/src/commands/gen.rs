use serde_json::json;

use axcal_core::datagen;

use crate::args::GenArgs;
use crate::config;
use crate::error::CliError;
use crate::manifest::Manifest;

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let cfg = config::load(args.config.as_deref())?;
    let antennas = args.antennas.or(cfg.gen.antennas).unwrap_or(124);
    let gain_spread = args.gain_spread.or(cfg.gen.gain_spread).unwrap_or(0.2);
    let noise_sigma = args.noise_sigma.or(cfg.gen.noise_sigma).unwrap_or(0.0);
    let rank = args.rank.or(cfg.gen.rank).unwrap_or(4);
    let seed = args
        .seed
        .or(cfg.gen.seed)
        .ok_or_else(|| CliError::Validation("--seed is required".into()))?;

    let problem = datagen::synthesize(antennas, gain_spread, noise_sigma, rank, seed)?;

    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io)?;
    }
    let tmp = match args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(CliError::io)?;
    datagen::save_problem(&problem, tmp.path())?;
    tmp.persist(&args.out)
        .map_err(|e| CliError::Io(format!("persist {}: {e}", args.out.display())))?;

    let mut outputs = vec![args.out.clone()];
    if args.csv {
        let csv_path = args.out.with_extension("csv");
        datagen::export_problem_csv(&problem, &csv_path)?;
        outputs.push(csv_path);
    }

    let manifest_path = args.out.with_extension("manifest.json");
    Manifest::new(
        "gen",
        json!({
            "antennas": antennas,
            "gain_spread": gain_spread,
            "noise_sigma": noise_sigma,
            "rank": rank,
            "seed": seed,
            "csv": args.csv,
        }),
        vec![],
        outputs,
        Some(seed),
    )
    .write(&manifest_path)?;

    println!(
        "wrote {} (P={antennas}, rank={rank}, spread={gain_spread}, sigma={noise_sigma}, seed={seed})",
        args.out.display()
    );
    Ok(())
}
