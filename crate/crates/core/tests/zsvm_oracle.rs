use proptest::prelude::*;
use zfp_core::dataset::{synth_constellation, Label, LabeledDataset, Preset, Sample};
use zfp_core::oracle::{zsvm_grid_min, GridSpec};
use zfp_core::zsvm::{confusion, fit_zsvm, objective, sweep_costs, CostConfig, LinearBoundary, SolverConfig};

fn outliers() -> LabeledDataset {
    synth_constellation(&Preset::Outliers.spec(), 0).unwrap()
}

fn within_oracle(ds: &LabeledDataset, c: &CostConfig, got: f64) {
    let oracle = zsvm_grid_min(ds, c, &GridSpec::default()).unwrap();
    assert!(
        got <= oracle.objective * 1.02,
        "c=({},{}) objective {got} vs oracle {}",
        c.c1,
        c.c2,
        oracle.objective
    );
}

#[test]
fn larger_classic_cost_narrows_the_gutter() {
    let ds = outliers();
    let s = SolverConfig::default();
    let small = CostConfig::classic(1.0).unwrap();
    let large = CostConfig::classic(50.0).unwrap();
    let r1 = fit_zsvm(&ds, &small, &s).unwrap();
    let r50 = fit_zsvm(&ds, &large, &s).unwrap();
    within_oracle(&ds, &small, r1.objective);
    within_oracle(&ds, &large, r50.objective);
    assert!(r50.gutter < r1.gutter, "{} !< {}", r50.gutter, r1.gutter);
    let o1 = zsvm_grid_min(&ds, &small, &GridSpec::default()).unwrap();
    let o50 = zsvm_grid_min(&ds, &large, &GridSpec::default()).unwrap();
    let norm = |a: [f64; 2]| (a[0] * a[0] + a[1] * a[1]).sqrt();
    assert!(2.0 / norm(o50.a) < 2.0 / norm(o1.a));
}

#[test]
fn outliers_keep_false_positives_under_heavy_negative_cost() {
    let ds = outliers();
    let grid: Vec<CostConfig> = [1.0, 10.0, 100.0]
        .iter()
        .map(|r| CostConfig::new(*r, 1.0).unwrap())
        .collect();
    let rows = sweep_costs(&ds, &grid, &SolverConfig::default()).unwrap();
    let heavy_with_fp = rows.iter().any(|row| {
        let r = row.report.as_ref().unwrap();
        row.costs.c1 / row.costs.c2 >= 10.0 && r.confusion.fp > 0
    });
    assert!(heavy_with_fp);
    for row in &rows {
        within_oracle(&ds, &row.costs, row.report.as_ref().unwrap().objective);
    }
}

#[test]
fn same_ratio_different_outcome() {
    let ds = outliers();
    let s = SolverConfig::default();
    let a = fit_zsvm(&ds, &CostConfig::classic(1.0).unwrap(), &s).unwrap();
    let b = fit_zsvm(&ds, &CostConfig::classic(50.0).unwrap(), &s).unwrap();
    assert_ne!(a.confusion, b.confusion);
}

#[test]
fn equal_costs_match_classic_objective() {
    let ds = outliers();
    let c = CostConfig::classic(3.0).unwrap();
    let r = fit_zsvm(&ds, &c, &SolverConfig::default()).unwrap();
    let classic = 0.5 * r.boundary.a.iter().map(|v| v * v).sum::<f64>() + 3.0 * r.slacks.iter().sum::<f64>();
    assert!((classic - r.objective).abs() <= 1e-9 * classic);
}

#[test]
fn multiplicity_equals_duplication() {
    let base = vec![
        Sample::new(vec![0.0, 0.0], Label::Negative),
        Sample::new(vec![1.0, 1.0], Label::Negative).with_weight(3),
        Sample::new(vec![1.2, 0.9], Label::Positive),
        Sample::new(vec![2.0, 2.0], Label::Positive),
    ];
    let mut dup = base.clone();
    dup[1] = Sample::new(vec![1.0, 1.0], Label::Negative);
    dup.push(dup[1].clone());
    dup.push(dup[1].clone());
    let weighted = LabeledDataset::from_samples(2, base).unwrap();
    let expanded = LabeledDataset::from_samples(2, dup).unwrap();
    let c = CostConfig::new(5.0, 1.0).unwrap();
    let a = fit_zsvm(&weighted, &c, &SolverConfig::default()).unwrap();
    let b = fit_zsvm(&expanded, &c, &SolverConfig::default()).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-6 * a.objective);
    assert!((objective(&expanded, &a.boundary, &c) - b.objective).abs() <= 1e-6 * b.objective);
}

fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>(), 1u64..4), 2..30).prop_filter_map(
        "needs both classes",
        |pts| {
            let samples: Vec<Sample> = pts
                .iter()
                .map(|&(a, b, p, w)| {
                    Sample::new(vec![a, b], if p { Label::Positive } else { Label::Negative }).with_weight(w)
                })
                .collect();
            let ds = LabeledDataset::from_samples(2, samples).ok()?;
            (ds.n_pos() > 0 && ds.n_neg() > 0).then_some(ds)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn slacks_feasible_and_objective_dominates_zero(
        ds in arb_dataset(),
        c1 in 0.05f64..50.0,
        c2 in 0.05f64..50.0,
    ) {
        let c = CostConfig::new(c1, c2).unwrap();
        match fit_zsvm(&ds, &c, &SolverConfig::default()) {
            Ok(r) => {
                let tol = 1e-9;
                for i in 0..ds.len() {
                    let m = ds.label(i).sign() * r.boundary.score(ds.row(i));
                    prop_assert!(m >= 1.0 - r.slacks[i] - tol);
                    prop_assert!(r.slacks[i] >= -tol);
                }
                let zero = LinearBoundary { a: vec![0.0, 0.0], b0: 0.0 };
                prop_assert!(r.objective <= objective(&ds, &zero, &c) + 1e-9);
                prop_assert!(r.gutter > 0.0);
                prop_assert_eq!(r.confusion, confusion(&ds, &r.boundary));
                let oracle = zsvm_grid_min(&ds, &c, &GridSpec { angles: 120, scales: 40, ..Default::default() }).unwrap();
                prop_assert!(r.objective <= oracle.objective * 1.02 + 1e-9,
                    "{} vs oracle {}", r.objective, oracle.objective);
            }
            Err(zfp_core::Error::DegenerateBoundary) => {
                // Only legitimate when no direction beats the zero boundary.
                let oracle = zsvm_grid_min(&ds, &c, &GridSpec::default()).unwrap();
                let zero = LinearBoundary { a: vec![0.0, 0.0], b0: oracle.b0 };
                let at_zero = objective(&ds, &zero, &c);
                prop_assert!(oracle.a == [0.0, 0.0] || oracle.objective >= 0.999 * at_zero);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
