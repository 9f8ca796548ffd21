use std::collections::BTreeSet;
use axcal_core::datagen::synthesize;
use axcal_core::errormodel::{ErrorModelConfig, InjectionSite, NaxBudget};
use axcal_core::resilience::{run_sweep, spearman, SweepGrid};
use axcal_core::stefcal::{quality_acceptance, run, ReferenceBackend, StefcalConfig};

fn main() {
    // C3 candidate: P=124 rank 31 spread 0.5 seed 1, SAM behavior
    let problem = synthesize(124, 0.5, 0.0, 31, 1).unwrap();
    let cfg = StefcalConfig { max_iters: 400, ..StefcalConfig::default() };
    let reference = run(&problem, &cfg, &mut ReferenceBackend, None).unwrap();
    println!("C3 ref: {} iters", reference.iterations());
    for (er, ep) in [(100.0, 0.0), (20.0, 0.0), (40.0, 0.0), (60.0, 0.0), (80.0, 0.0), (100.0, 0.1)] {
        let model = ErrorModelConfig::sam(10.0, ep, er, 11);
        let mut b = model.wrap(ReferenceBackend, None).unwrap();
        let tr = run(&problem, &cfg, &mut b, Some(&reference)).unwrap();
        let v = quality_acceptance(&tr, &reference);
        println!("  ER={er} EP={ep}: conv={} iters={} diff={:.2e} accepted={}",
            tr.converged(), tr.iterations(), tr.final_diff_rel().unwrap(), v.accepted);
    }
    // C4 candidate: adaptive grid on the same problem
    let grid = SweepGrid {
        em: vec![1.0, 3.0, 6.0, 12.0],
        ep: vec![0.0],
        er: vec![100.0],
        n_ax: vec![
            NaxBudget::PercentOfReference(10.0),
            NaxBudget::PercentOfReference(25.0),
            NaxBudget::PercentOfReference(50.0),
            NaxBudget::PercentOfReference(75.0),
        ],
        trials: 5,
        base_seed: 7,
        sites: BTreeSet::from([InjectionSite::ZKernel]),
    };
    let profile = run_sweep(&problem, &cfg, &grid, || ReferenceBackend, 100.0).unwrap();
    let mut accepted_region = Vec::new();
    for p in &profile.points {
        if p.accepted_trials == p.trials {
            accepted_region.push((p.em, format!("{:?}", p.n_ax)));
        }
    }
    println!("C4 fully-accepted points: {:?}", accepted_region);
    for i_em in 0..4 {
        let d = profile.diff_rel_along_nax(i_em, 0, 0);
        let rho = spearman(&[10.0, 25.0, 50.0, 75.0], &d);
        println!("  EM={} diff along nax {:?} rho={rho:.2}", grid.em[i_em], d.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>());
    }
    for i_nax in 0..4 {
        let d = profile.diff_rel_along_em(0, 0, i_nax);
        let rho = spearman(&[1.0, 3.0, 6.0, 12.0], &d);
        println!("  nax[{i_nax}] diff along em {:?} rho={rho:.2}", d.iter().map(|x| format!("{x:.1e}")).collect::<Vec<_>>());
    }
}
