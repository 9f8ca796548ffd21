//! End-to-end acceptance suite.
//!
//! Each test prints one `ACCEPTANCE <n> ...: PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`). Tolerances and
//! thresholds are pinned in the assertions.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use axcal_core::accel::{
    energy_savings, explore_dse, make_backend, run_hetero, DatapathConfig, EnergyModel, PowerModel,
};
use axcal_core::datagen::synthesize;
use axcal_core::errormodel::{draw_epsilon, ErrorModelConfig, InjectionSite, NaxBudget};
use axcal_core::fixedpoint::{fx_add, fx_mul, FixedFormat, FixedScalar, QuantStats};
use axcal_core::resilience::{run_sweep, spearman, SweepGrid};
use axcal_core::stefcal::{
    quality_acceptance, run, ReferenceBackend, RunTrace, StefcalConfig,
};

fn criterion<F: FnOnce() -> Result<String, String>>(number: u32, label: &str, body: F) {
    match body() {
        Ok(detail) => println!("ACCEPTANCE {number} ({label}): PASS — {detail}"),
        Err(why) => {
            println!("ACCEPTANCE {number} ({label}): FAIL — {why}");
            panic!("acceptance criterion {number} failed: {why}");
        }
    }
}

#[test]
fn acceptance_1_energy_arithmetic() {
    criterion(1, "energy arithmetic", || {
        let b = energy_savings(&EnergyModel {
            p_acc_mw: 3.55,
            p_ax_mw: 2.08,
            n_acc: 92,
            n_ax: 52,
            equal_frequency: true,
        })
        .map_err(|e| e.to_string())?;
        let err_pp = (100.0 * b.savings - 23.4).abs();
        if err_pp <= 0.05 {
            Ok(format!("S_E = {:.4} (23.4% ± {:.3} pp)", b.savings, err_pp))
        } else {
            Err(format!("S_E = {:.4}, off by {err_pp:.3} pp", b.savings))
        }
    });
}

#[test]
fn acceptance_2_relative_error_statistics() {
    criterion(2, "relative-error statistics", || {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000usize;
        let mut inside = 0usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let e = draw_epsilon(10.0, 0.2, &mut rng);
            if (0.09..=0.11).contains(&e) {
                inside += 1;
            }
            sum += e;
        }
        let frac = inside as f64 / n as f64;
        let mean = sum / n as f64;
        let band = 4.0 * (0.2 / 100.0) / (n as f64).sqrt();
        if frac <= 0.997 {
            return Err(format!("fraction inside [0.09, 0.11] = {frac:.5}"));
        }
        if (mean - 0.100).abs() >= band {
            return Err(format!("mean {mean:.6} outside 0.100 ± {band:.2e}"));
        }
        Ok(format!(
            "P(ε ∈ [0.09, 0.11]) = {frac:.5} > 0.997; mean {mean:.6} within ±{band:.1e}"
        ))
    });
}

/// The statistical model (unlimited budget) on a seeded P=124 problem:
/// convergence holds only at ER = 100% with EP = 0 and breaks at
/// intermediate error rates or raised EP; quality acceptance fails off the
/// ER = 100% corner. The synthetic-data frontier is reported, not asserted.
#[test]
fn acceptance_3_sam_qualitative() {
    criterion(3, "statistical-model qualitative reproduction", || {
        let problem = synthesize(124, 0.5, 0.0, 31, 1).map_err(|e| e.to_string())?;
        let cfg = StefcalConfig {
            max_iters: 400,
            ..StefcalConfig::default()
        };
        let reference = run(&problem, &cfg, &mut ReferenceBackend, None).map_err(|e| e.to_string())?;
        if !reference.converged() {
            return Err("reference run did not converge".into());
        }

        let sam = |em: f64, ep: f64, er: f64| -> Result<(RunTrace, bool), String> {
            let model = ErrorModelConfig::sam(em, ep, er, 11);
            let mut backend = model.wrap(ReferenceBackend, None).map_err(|e| e.to_string())?;
            let trace =
                run(&problem, &cfg, &mut backend, Some(&reference)).map_err(|e| e.to_string())?;
            let accepted = quality_acceptance(&trace, &reference).accepted;
            Ok((trace, accepted))
        };

        // EP=0, EM=10: the run converges at ER=100% (every iteration sees
        // the same relative error, so consecutive iterates settle)...
        let (full_er, _) = sam(10.0, 0.0, 100.0)?;
        if !full_er.converged() {
            return Err("ER=100, EP=0, EM=10 did not converge".into());
        }
        // ...while quality acceptance fails at the intermediate rates.
        let mut detail = format!(
            "ER=100 converges in {} (diff_rel {:.2e}, biased as expected)",
            full_er.iterations(),
            full_er.final_diff_rel().unwrap_or(f64::NAN)
        );
        for er in [20.0, 40.0, 60.0, 80.0] {
            let (trace, accepted) = sam(10.0, 0.0, er)?;
            if accepted {
                return Err(format!("ER={er} unexpectedly passed quality acceptance"));
            }
            if trace.converged() && trace.iterations() <= reference.iterations() {
                return Err(format!(
                    "ER={er} converged within the reference count ({} <= {})",
                    trace.iterations(),
                    reference.iterations()
                ));
            }
        }
        // Raised EP breaks convergence entirely.
        let (with_ep, ep_accepted) = sam(10.0, 0.1, 100.0)?;
        if with_ep.converged() || ep_accepted {
            return Err("EP=0.1 unexpectedly converged or passed acceptance".into());
        }

        // Report this data set's own frontier over a small grid.
        let grid = SweepGrid {
            em: vec![0.0, 0.001, 0.002, 0.004],
            ep: vec![0.0, 1e-4, 2e-4, 4e-4],
            er: vec![100.0],
            n_ax: vec![NaxBudget::Unlimited],
            trials: 3,
            base_seed: 17,
            sites: BTreeSet::from([InjectionSite::ZKernel]),
        };
        let profile = run_sweep(&problem, &cfg, &grid, || ReferenceBackend, 100.0)
            .map_err(|e| e.to_string())?;
        match &profile.frontier {
            Some(f) => detail.push_str(&format!(
                "; intermediate ER and EP=0.1 rejected; synthetic frontier EM<={} EP<={} at ER=100",
                f.em, f.ep
            )),
            None => detail.push_str("; intermediate ER and EP=0.1 rejected; synthetic frontier empty"),
        }
        Ok(detail)
    });
}

/// Adaptive budgets: mean diff_rel grows along both the budget and the
/// error-mean axes (Spearman ρ ≥ 0), and a nonempty fully-accepted region
/// with N_ax > 0 and EM ≥ 1 exists.
#[test]
fn acceptance_4_adaptive_budget_trends() {
    criterion(4, "adaptive-budget trends", || {
        let problem = synthesize(124, 0.5, 0.0, 31, 1).map_err(|e| e.to_string())?;
        let cfg = StefcalConfig {
            max_iters: 400,
            ..StefcalConfig::default()
        };
        let nax_pcts = [10.0, 25.0, 50.0, 75.0];
        let ems = [1.0, 3.0, 6.0, 12.0];
        let grid = SweepGrid {
            em: ems.to_vec(),
            ep: vec![0.0],
            er: vec![100.0],
            n_ax: nax_pcts.map(NaxBudget::PercentOfReference).to_vec(),
            trials: 5,
            base_seed: 7,
            sites: BTreeSet::from([InjectionSite::ZKernel]),
        };
        let profile = run_sweep(&problem, &cfg, &grid, || ReferenceBackend, 100.0)
            .map_err(|e| e.to_string())?;

        for (i_em, em) in ems.iter().enumerate() {
            let d = profile.diff_rel_along_nax(i_em, 0, 0);
            let rho = spearman(&nax_pcts, &d);
            if rho < 0.0 {
                return Err(format!("diff_rel vs budget at EM={em}: ρ = {rho:.2} < 0"));
            }
        }
        for i_nax in 0..nax_pcts.len() {
            let d = profile.diff_rel_along_em(0, 0, i_nax);
            let rho = spearman(&ems, &d);
            if rho < 0.0 {
                return Err(format!(
                    "diff_rel vs error mean at budget {}%: ρ = {rho:.2} < 0",
                    nax_pcts[i_nax]
                ));
            }
        }
        let region: Vec<_> = profile
            .points
            .iter()
            .filter(|p| p.accepted_trials == p.trials && p.em >= 1.0)
            .collect();
        if region.is_empty() {
            return Err("no fully-accepted point with EM >= 1 and a positive budget".into());
        }
        let max_em = region.iter().map(|p| p.em).fold(f64::NEG_INFINITY, f64::max);
        Ok(format!(
            "ρ ≥ 0 on all axes; {} of {} points fully accepted (up to EM={max_em})",
            region.len(),
            profile.points.len()
        ))
    });
}

/// The untruncated datapath reproduces double precision: same iteration
/// count and final diff_rel ≤ 1e-5 on zero-noise problems at P = 8/32/124.
#[test]
fn acceptance_5_fixed_point_accurate_core() {
    criterion(5, "fixed-point accurate core", || {
        let mut detail = Vec::new();
        for (p, rank, seed) in [(8usize, 2usize, 20u64), (32, 3, 1), (124, 4, 2)] {
            let problem = synthesize(p, 0.2, 0.0, rank, seed).map_err(|e| e.to_string())?;
            let cfg = StefcalConfig::default();
            let reference =
                run(&problem, &cfg, &mut ReferenceBackend, None).map_err(|e| e.to_string())?;
            let mut backend =
                make_backend(&DatapathConfig::accurate()).map_err(|e| e.to_string())?;
            let trace = run(&problem, &cfg, &mut backend, Some(&reference))
                .map_err(|e| e.to_string())?;
            if !trace.converged() {
                return Err(format!("P={p}: fixed-point run did not converge"));
            }
            if trace.iterations() != reference.iterations() {
                return Err(format!(
                    "P={p}: iteration counts differ (double {}, fixed {})",
                    reference.iterations(),
                    trace.iterations()
                ));
            }
            let diff = trace.final_diff_rel().unwrap_or(f64::NAN);
            if !(diff <= 1e-5) {
                return Err(format!("P={p}: final diff_rel {diff:.3e} above 1e-5"));
            }
            if backend.stats().saturations != 0 {
                return Err(format!(
                    "P={p}: {} saturations on the accurate core",
                    backend.stats().saturations
                ));
            }
            detail.push(format!("P={p}: {} iters, diff {diff:.1e}", trace.iterations()));
        }
        Ok(detail.join("; "))
    });
}

/// Two-core schedule at the budget found by the design-space exploration:
/// convergence-metric jump at the switch, decreasing diff_rel afterwards,
/// and no extra iterations versus the accurate-only run.
#[test]
fn acceptance_6_heterogeneous_run_shape() {
    criterion(6, "heterogeneous run shape", || {
        let problem = synthesize(124, 0.5, 0.0, 31, 4).map_err(|e| e.to_string())?;
        let cfg = StefcalConfig {
            max_iters: 400,
            ..StefcalConfig::default()
        };
        let dp_acc = DatapathConfig::accurate();
        let table = DatapathConfig::approximate().truncation();
        let points = explore_dse(&problem, &cfg, &dp_acc, &[table], &PowerModel::default_anchors())
            .map_err(|e| e.to_string())?;
        let n_ax = points[0].n_ax;
        if n_ax == 0 {
            return Err("design-space exploration found no feasible budget".into());
        }

        let mut acc_backend = make_backend(&dp_acc).map_err(|e| e.to_string())?;
        let reference =
            run(&problem, &cfg, &mut acc_backend, None).map_err(|e| e.to_string())?;
        let dp_ax = dp_acc.with_truncation(table);
        let trace = run_hetero(&problem, &cfg, &dp_acc, &dp_ax, n_ax, Some(&reference))
            .map_err(|e| e.to_string())?;

        if !trace.converged() || trace.iterations() > reference.iterations() {
            return Err(format!(
                "hetero run: converged={} iterations {} vs accurate-only {}",
                trace.converged(),
                trace.iterations(),
                reference.iterations()
            ));
        }
        let before = trace.records[n_ax - 1].convergence;
        let after = trace.records[n_ax].convergence;
        if !(after > before) {
            return Err(format!(
                "no convergence jump at the switch ({before:.2e} -> {after:.2e})"
            ));
        }
        let at_switch = trace.records[n_ax - 1].diff_rel.unwrap();
        let final_diff = trace.final_diff_rel().unwrap();
        if !(final_diff < at_switch) {
            return Err(format!(
                "diff_rel did not decrease after the switch ({at_switch:.2e} -> {final_diff:.2e})"
            ));
        }
        // Tail behaviour: the last few recorded diffs keep shrinking.
        let tail: Vec<f64> = trace.records[trace.records.len().saturating_sub(4)..]
            .iter()
            .map(|r| r.diff_rel.unwrap())
            .collect();
        for pair in tail.windows(2) {
            if pair[1] > pair[0] * 1.10 {
                return Err(format!("diff_rel tail not monotone: {tail:?}"));
            }
        }
        Ok(format!(
            "budget {n_ax} of {}: jump {before:.1e}→{after:.1e}, diff {at_switch:.1e}→{final_diff:.1e}, S_E = {:.1}%",
            reference.iterations(),
            100.0 * points[0].s_e
        ))
    });
}

/// Exhaustive wide-integer oracle over every operand pair at word lengths
/// up to six bits, plus the one-antenna closed form |g| = sqrt(V).
#[test]
fn acceptance_7_oracle_equivalence() {
    criterion(7, "oracle equivalence", || {
        fn reduce(exact: i128, from: u32, out: FixedFormat) -> i64 {
            let raw = if from >= out.frac_len() {
                let s = from - out.frac_len();
                if s == 0 {
                    exact
                } else {
                    let q = exact.div_euclid(1i128 << s);
                    let r = exact.rem_euclid(1i128 << s);
                    let half = 1i128 << (s - 1);
                    if r > half || (r == half && q % 2 != 0) {
                        q + 1
                    } else {
                        q
                    }
                }
            } else {
                exact << (out.frac_len() - from)
            };
            raw.clamp(out.min_raw() as i128, out.max_raw() as i128) as i64
        }

        let mut checked = 0u64;
        for w in 1..=6u32 {
            for f in 0..w {
                let fmt = FixedFormat::new(w, f).unwrap();
                for (ow, of) in [(w, f), (10, (f + 2).min(9))] {
                    let out = FixedFormat::new(ow, of).unwrap();
                    for ra in fmt.min_raw()..=fmt.max_raw() {
                        for rb in fmt.min_raw()..=fmt.max_raw() {
                            let a = FixedScalar::from_raw(ra, fmt).unwrap();
                            let b = FixedScalar::from_raw(rb, fmt).unwrap();
                            let mut st = QuantStats::default();
                            let got_mul = fx_mul(a, b, out, &mut st).raw();
                            let want_mul = reduce(ra as i128 * rb as i128, 2 * f, out);
                            if got_mul != want_mul {
                                return Err(format!(
                                    "mul {ra}x{rb} fmt {w}/{f} out {ow}/{of}: {got_mul} != {want_mul}"
                                ));
                            }
                            let got_add = fx_add(a, b, out, &mut st).raw();
                            let want_add = reduce(ra as i128 + rb as i128, f, out);
                            if got_add != want_add {
                                return Err(format!(
                                    "add {ra}+{rb} fmt {w}/{f} out {ow}/{of}: {got_add} != {want_add}"
                                ));
                            }
                            checked += 2;
                        }
                    }
                }
            }
        }

        // One-antenna closed form: M=1, V=4 converges to |g| = 2.
        let mut model = axcal_core::ComplexMatrix::zeros(1);
        model.set(0, 0, num_complex::Complex64::new(1.0, 0.0));
        let mut measured = axcal_core::ComplexMatrix::zeros(1);
        measured.set(0, 0, num_complex::Complex64::new(4.0, 0.0));
        let problem = axcal_core::CalibrationProblem {
            p: 1,
            model,
            measured,
            true_gains: None,
            noise_sigma: 0.0,
        };
        let trace = run(&problem, &StefcalConfig::default(), &mut ReferenceBackend, None)
            .map_err(|e| e.to_string())?;
        let mag = trace.final_gains()[0].norm();
        if !(trace.converged() && (mag - 2.0).abs() < 1e-6) {
            return Err(format!("one-antenna closed form: |g| = {mag}"));
        }
        Ok(format!("{checked} exhaustive op checks; |g| − √V = {:.1e}", (mag - 2.0).abs()))
    });
}

fn axcal(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_axcal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn hash_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                // Manifests carry a timestamp and the worker count; the data
                // outputs are the determinism contract.
                if name.ends_with("manifest.json") {
                    continue;
                }
                entries.push((name, std::fs::read(&path).unwrap()));
            }
        }
    }
    entries.sort();
    entries
}

/// Re-running the arguments recorded in a manifest reproduces every CSV and
/// JSON output byte for byte, independent of the worker count.
#[test]
fn acceptance_8_manifest_determinism() {
    criterion(8, "manifest determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let ok = |out: std::process::Output, what: &str| -> Result<(), String> {
            if out.status.success() {
                Ok(())
            } else {
                Err(format!("{what}: {}", String::from_utf8_lossy(&out.stderr)))
            }
        };

        ok(axcal(&["gen", "-P", "16", "--rank", "3", "--seed", "7", "--out", "p.axcp"], d), "gen")?;
        ok(
            axcal(
                &[
                    "resilience", "--problem", "p.axcp", "--em", "0:5:5", "--ep", "0",
                    "--er", "100", "--nax", "50", "--trials", "2", "--max-iters", "200",
                    "--seed", "3", "--jobs", "1", "--out", "sweep",
                ],
                d,
            ),
            "resilience",
        )?;
        ok(
            axcal(&["calibrate", "--problem", "p.axcp", "--backend", "acc", "--out", "cal"], d),
            "calibrate",
        )?;

        let first = hash_outputs(d);

        // Re-run every subcommand from its recorded manifest args, with the
        // sweep switched to a different worker count.
        for manifest_path in ["p.manifest.json", "sweep/manifest.json", "cal/manifest.json"] {
            let manifest: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(d.join(manifest_path)).unwrap())
                    .unwrap();
            let mut args: Vec<String> = manifest["args"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_str().unwrap().to_string())
                .collect();
            if let Some(pos) = args.iter().position(|a| a == "--jobs") {
                args[pos + 1] = "4".into();
            }
            let arg_refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
            ok(axcal(&arg_refs, d), manifest_path)?;
        }

        let second = hash_outputs(d);
        if first.len() != second.len() {
            return Err("output sets differ between runs".into());
        }
        for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
            if name_a != name_b || bytes_a != bytes_b {
                return Err(format!("output {name_a} differs after the re-run"));
            }
        }
        Ok(format!(
            "{} outputs byte-identical across re-runs and worker counts",
            first.len()
        ))
    });
}
