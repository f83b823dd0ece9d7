mod support;

use rand::Rng;
use spamsift_core::svm::{serialize_model, train, train_with_dim, LabeledExample, TrainConfig};
use spamsift_core::{FeatureVector, Label};
use support::instances::{dual_identities, kkt_violation, random_instance, rng, Instance, FP};
use support::qp_oracle;

fn fit(inst: &Instance) -> (spamsift_core::SvmModel, spamsift_core::TrainDiagnostics) {
    let cfg = TrainConfig::default().with_c(inst.c);
    train_with_dim(&inst.examples(), inst.dim(), &cfg).expect("training converges")
}

#[test]
fn dual_objective_matches_oracle() {
    let mut r = rng(11);
    for k in 0..200 {
        let c = if k % 2 == 0 { 1.0 } else { 100.0 };
        let inst = random_instance(&mut r, k % 4 < 2, c);
        let (model, diag) = fit(&inst);
        let oracle = qp_oracle::solve(&inst.xs, &inst.ys, inst.c, 1e-10, 1_000_000);
        assert!(oracle.gap <= 1e-9, "oracle did not certify instance {k}");
        assert!(
            (diag.objective - oracle.objective).abs() <= 1e-4,
            "instance {k}: objective {} vs oracle {}",
            diag.objective,
            oracle.objective
        );
        let dw: f64 = model
            .weights()
            .iter()
            .zip(&oracle.w)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dw <= 1e-3, "instance {k}: |w - w_oracle| = {dw}");
    }
}

#[test]
fn kkt_and_identities_hold() {
    let mut r = rng(12);
    for k in 0..200 {
        let inst = random_instance(&mut r, k % 3 == 0, if k % 2 == 0 { 1.0 } else { 100.0 });
        let (model, diag) = fit(&inst);
        let ex = inst.examples();
        assert!(kkt_violation(&model, &ex) <= 1e-3, "instance {k}");
        let (balance, recon) = dual_identities(&model, &ex);
        assert!(balance <= 1e-6, "instance {k}: sum a y = {balance}");
        assert!(recon <= 1e-8, "instance {k}: w reconstruction {recon}");
        assert!(diag.slacks.iter().all(|&s| s >= 0.0));
        assert!(model.alphas().iter().all(|a| a.alpha >= 0.0 && a.alpha <= inst.c));
    }
}

#[test]
fn separable_sets_touch_the_margin_without_bounded_alphas() {
    let mut r = rng(13);
    for k in 0..100 {
        let inst = random_instance(&mut r, true, 100.0);
        let (model, diag) = fit(&inst);
        let ex = inst.examples();
        let min_margin = ex
            .iter()
            .map(|e| e.y.sign() * model.decision_value(&e.x).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((min_margin - 1.0).abs() <= 1e-3, "instance {k}: min y f = {min_margin}");
        assert_eq!(diag.n_bounded, 0, "instance {k}");
    }
}

fn with_extra(inst: &Instance, x: Vec<f64>, y: f64) -> Instance {
    let mut out = inst.clone();
    out.xs.push(x);
    out.ys.push(y);
    out
}

fn support(model: &spamsift_core::SvmModel) -> Vec<String> {
    let mut s = model.support_ids().to_vec();
    s.sort();
    s
}

#[test]
fn far_points_keep_the_support_set() {
    let mut r = rng(14);
    let mut trials = 0;
    while trials < 100 {
        let inst = random_instance(&mut r, trials % 2 == 0, if trials % 3 == 0 { 1.0 } else { 100.0 });
        let (model, _) = fit(&inst);
        // a point well outside the margin on a random example's side
        let i = r.gen_range(0..inst.xs.len());
        let y = inst.ys[i];
        let w = model.weights();
        let wn: f64 = w.iter().map(|v| v * v).sum::<f64>();
        if wn < 1e-12 {
            continue;
        }
        let extra_margin = r.gen_range(0.1..3.0);
        let x: Vec<f64> = inst.xs[i]
            .iter()
            .zip(w)
            .map(|(xi, wi)| xi + y * wi * (2.0 + extra_margin) / wn)
            .collect();
        let fx = FeatureVector::from_dense(&x, FP);
        let yf = y * model.decision_value(&fx).unwrap();
        assert!(yf >= 1.0 + 1e-3);
        let (after, _) = fit(&with_extra(&inst, x, y));
        assert_eq!(support(&model), support(&after), "trial {trials}");
        trials += 1;
    }
}

#[test]
fn margin_violators_join_the_support_set() {
    let mut r = rng(15);
    for trial in 0..100 {
        let inst = random_instance(&mut r, trial % 2 == 0, if trial % 3 == 0 { 1.0 } else { 100.0 });
        let (model, diag) = fit(&inst);
        let d = inst.dim();
        // with every SV at the bound C the bias is not unique, and a new
        // violator can be absorbed by shifting b alone
        let b_pinned = diag.n_bounded < diag.n_support;
        let y = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        // sample until the point violates the current margin
        let x = loop {
            let x: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
            let f = model.decision_value(&FeatureVector::from_dense(&x, FP)).unwrap();
            if y * f < 1.0 - 1e-3 {
                break x;
            }
        };
        let (after, _) = fit(&with_extra(&inst, x, y));
        if !b_pinned {
            continue;
        }
        let new_id = format!("e{:02}", inst.xs.len());
        assert!(after.support_ids().contains(&new_id), "trial {trial}");
        assert_ne!(support(&model), support(&after));
    }
}

#[test]
fn duplicating_a_non_support_example_changes_nothing() {
    let mut r = rng(16);
    let mut trials = 0;
    let mut attempts = 0;
    while trials < 50 {
        attempts += 1;
        assert!(attempts < 2000);
        let inst = random_instance(&mut r, attempts % 2 == 0, 100.0);
        let ex = inst.examples();
        let cfg = TrainConfig::default();
        let (model, _) = train_with_dim(&ex, inst.dim(), &cfg).unwrap();
        let Some(victim) = ex.iter().find(|e| !model.support_ids().contains(&e.id)) else {
            continue;
        };
        let k = r.gen_range(1..=5);
        let mut grown = ex.clone();
        for j in 0..k {
            grown.push(LabeledExample::new(format!("{}#dup{j}", victim.id), victim.x.clone(), victim.y));
        }
        let (after, _) = train_with_dim(&grown, inst.dim(), &cfg).unwrap();
        assert_eq!(support(&model), support(&after));
        for _ in 0..20 {
            let p: Vec<f64> = (0..inst.dim()).map(|_| r.gen_range(-3.0..3.0)).collect();
            let p = FeatureVector::from_dense(&p, FP);
            let f0 = model.decision_value(&p).unwrap();
            if f0.abs() < 1e-6 {
                continue;
            }
            assert_eq!(Label::from_score(f0), after.classify(&p).unwrap());
        }
        trials += 1;
    }
}

#[test]
fn training_is_deterministic() {
    let mut r = rng(17);
    for _ in 0..20 {
        let inst = random_instance(&mut r, false, 100.0);
        let a = serialize_model(&fit(&inst).0);
        let b = serialize_model(&fit(&inst).0);
        assert_eq!(a, b);
    }
    let inst = random_instance(&mut r, true, 1.0);
    let ex = inst.examples();
    let m1 = train(&ex, &TrainConfig::default()).unwrap().0;
    let m2 = train(&ex, &TrainConfig::default()).unwrap().0;
    assert_eq!(m1, m2);
}
