use serde_json::json;

use axcal_core::accel::{energy_savings, EnergyModel};

use crate::args::EnergyArgs;
use crate::error::CliError;
use crate::manifest::Manifest;
use crate::output;

pub fn run(args: EnergyArgs) -> Result<(), CliError> {
    let model = EnergyModel {
        p_acc_mw: args.p_acc,
        p_ax_mw: args.p_ax,
        n_acc: args.n_acc,
        n_ax: args.n_ax,
        equal_frequency: true,
    };
    let breakdown = energy_savings(&model).map_err(CliError::validation)?;

    println!("E_accurate-only = {:.6} mW·iter", breakdown.accurate_only);
    println!("E_heterogeneous = {:.6} mW·iter", breakdown.heterogeneous);
    println!("S_E = {:.4} ({:.1}%)", breakdown.savings, 100.0 * breakdown.savings);

    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(CliError::io)?;
        }
        output::write_json_atomic(
            out,
            &json!({
                "model": model,
                "accurate_only": breakdown.accurate_only,
                "heterogeneous": breakdown.heterogeneous,
                "savings": breakdown.savings,
            }),
        )?;
        let manifest_path = out.with_extension("manifest.json");
        Manifest::new(
            "energy",
            json!({
                "p_acc": args.p_acc,
                "p_ax": args.p_ax,
                "n_acc": args.n_acc,
                "n_ax": args.n_ax,
            }),
            vec![],
            vec![out.clone()],
            None,
        )
        .write(&manifest_path)?;
    }
    Ok(())
}
