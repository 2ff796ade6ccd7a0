use super::*;
use crate::retrieval::Record;

fn two_clusters() -> Vec<(Vec<f64>, usize)> {
    let offsets = [(0.0, 0.0), (0.1, 0.0), (0.0, 0.1), (0.1, 0.1)];
    let mut out = Vec::new();
    for (dx, dy) in offsets {
        out.push((vec![dx, dy], 0));
    }
    // Point reflection of the first cluster through (5.05, 5.05).
    for (dx, dy) in offsets {
        out.push((vec![10.1 - dx, 10.1 - dy], 1));
    }
    out
}

fn borrow(s: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
    s.iter().map(|(v, c)| (v.as_slice(), *c)).collect()
}

fn linear_cfg(c: f64) -> SvmConfig {
    SvmConfig {
        kernel: KernelSpec::Linear,
        c,
        ..SvmConfig::default()
    }
}

fn blob_db(classes: usize, per_class: usize) -> FeatureDatabase {
    let records = (0..classes * per_class)
        .map(|k| {
            let c = k / per_class;
            let t = (k % per_class) as f64;
            Record {
                id: format!("c{c}_{:02}", k % per_class),
                class_label: c,
                values: vec![
                    10.0 * c as f64 + 0.05 * t.sin(),
                    -3.0 * c as f64 + 0.05 * t.cos(),
                    (c * c) as f64 + 0.01 * t,
                ],
            }
        })
        .collect();
    FeatureDatabase::from_records(Method::Elm, 1, 3, records).unwrap()
}

#[test]
fn rbf_examples() {
    let x = [0.3, -2.0, 7.5];
    assert_eq!(rbf_kernel(&x, &x, 0.7).unwrap(), 1.0);
    let v = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
    assert!((v - 0.367_879_44).abs() < 1e-8);
    let mut last = 1.0;
    for g in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        let k = rbf_kernel(&[0.0], &[0.5], g).unwrap();
        assert!(k < last);
        last = k;
    }
    assert!(last < 1e-10);
    assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    assert!(rbf_kernel(&[0.0], &[0.0], 0.0).is_err());
}

#[test]
fn separable_clusters_linear() {
    let data = two_clusters();
    let model = train(&borrow(&data), &linear_cfg(10.0)).unwrap();
    assert_eq!(model.machines.len(), 1);
    for (x, c) in &data {
        assert_eq!(model.classify(x).unwrap().label, *c);
        // decision sign agrees with training label
        let d = model.machines[0].decision(&model.kernel, &model.standardization.apply(x));
        assert_eq!(d > 0.0, *c == 0);
    }
}

#[test]
fn dual_feasibility() {
    let data = two_clusters();
    for cfg in [linear_cfg(10.0), SvmConfig::default()] {
        let model = train(&borrow(&data), &cfg).unwrap();
        for m in &model.machines {
            assert!(m.converged);
            let sum: f64 = m.dual_coef.iter().sum();
            assert!(sum.abs() < 1e-6);
            assert!(m.dual_coef.iter().all(|a| a.abs() <= cfg.c + 1e-12));
        }
    }
}

#[test]
fn midpoint_ties_to_smaller_class() {
    let data = two_clusters();
    let model = train(&borrow(&data), &linear_cfg(10.0)).unwrap();
    let c = model.classify(&[5.05, 5.05]).unwrap();
    assert_eq!(c.label, 0);
    assert_eq!(c.votes, vec![(0, 0), (1, 0)]);
}

#[test]
fn xor_matches_brute_force_dual() {
    let data = vec![
        (vec![0.0, 0.0], 0),
        (vec![1.0, 1.0], 0),
        (vec![0.0, 1.0], 1),
        (vec![1.0, 0.0], 1),
    ];
    let cfg = SvmConfig {
        kernel: KernelSpec::Rbf { gamma: Some(1.0) },
        c: 100.0,
        tol: 1e-8,
        ..SvmConfig::default()
    };
    let model = train(&borrow(&data), &cfg).unwrap();
    for (x, c) in &data {
        assert_eq!(model.classify(x).unwrap().label, *c);
    }

    // Oracle: grid search of the dual over (α1, α2, α3), α4 = α1 + α2 − α3.
    let z: Vec<Vec<f64>> = data.iter().map(|(x, _)| model.standardization.apply(x)).collect();
    let y = [1.0, 1.0, -1.0, -1.0];
    let k = |i: usize, j: usize| Kernel::Rbf { gamma: 1.0 }.eval(&z[i], &z[j]);
    let dual = |a: &[f64; 4]| {
        let mut w: f64 = a.iter().sum();
        for i in 0..4 {
            for j in 0..4 {
                w -= 0.5 * a[i] * a[j] * y[i] * y[j] * k(i, j);
            }
        }
        w
    };
    let step = 0.01;
    let (mut best, mut best_a) = (f64::NEG_INFINITY, [0.0; 4]);
    for i1 in 0..=200 {
        for i2 in 0..=200 {
            for i3 in 0..=200 {
                let a = [i1 as f64 * step, i2 as f64 * step, i3 as f64 * step, 0.0];
                let a4 = a[0] + a[1] - a[2];
                if !(0.0..=cfg.c).contains(&a4) {
                    continue;
                }
                let a = [a[0], a[1], a[2], a4];
                let w = dual(&a);
                if w > best {
                    best = w;
                    best_a = a;
                }
            }
        }
    }
    let m = &model.machines[0];
    assert_eq!(m.support_vectors.len(), 4);
    let smo_alpha: Vec<f64> = m.dual_coef.iter().zip(y).map(|(c, y)| c * y).collect();
    for (s, g) in smo_alpha.iter().zip(best_a) {
        assert!((s - g).abs() <= 2.0 * step, "smo {smo_alpha:?} grid {best_a:?}");
    }
    let smo_w = dual(&[smo_alpha[0], smo_alpha[1], smo_alpha[2], smo_alpha[3]]);
    assert!(smo_w >= best - 1e-9);
    // decision values at the training points match those from the oracle α
    for (t, zt) in z.iter().enumerate() {
        let oracle: f64 = (0..4).map(|i| best_a[i] * y[i] * k(i, t)).sum();
        let d = m.decision(&model.kernel, zt) - m.bias;
        assert!((d - oracle).abs() < 0.05, "t={t} d={d} oracle={oracle}");
    }
}

#[test]
fn single_class_rejected() {
    let data = vec![(vec![0.0], 3), (vec![1.0], 3)];
    assert!(train(&borrow(&data), &SvmConfig::default()).is_err());
}

#[test]
fn deterministic_training() {
    let db = blob_db(4, 9);
    let cfg = SvmConfig {
        k: 5,
        ..SvmConfig::default()
    };
    assert_eq!(train_from_db(&db, &cfg).unwrap(), train_from_db(&db, &cfg).unwrap());
}

#[test]
fn scaling_features_keeps_labels() {
    let db = blob_db(3, 12);
    let scaled = db.scaled(37.5);
    let cfg = SvmConfig {
        k: 3,
        ..SvmConfig::default()
    };
    let (a, b) = (train_from_db(&db, &cfg).unwrap(), train_from_db(&scaled, &cfg).unwrap());
    for (r, s) in db.records().iter().zip(scaled.records()) {
        assert_eq!(a.classify(&r.values).unwrap().label, b.classify(&s.values).unwrap().label);
    }
}

#[test]
fn selection_rules() {
    assert_eq!(
        Selection::Even.pick(72, 7, 0).unwrap(),
        vec![0, 10, 21, 31, 41, 51, 62]
    );
    assert_eq!(Selection::Even.pick(72, 4, 0).unwrap(), vec![0, 18, 36, 54]);
    assert_eq!(Selection::First.pick(10, 3, 0).unwrap(), vec![0, 1, 2]);
    let r = Selection::Random(7).pick(72, 5, 2).unwrap();
    assert_eq!(r, Selection::Random(7).pick(72, 5, 2).unwrap());
    assert_eq!(r.len(), 5);
    assert!(Selection::Even.pick(3, 4, 0).is_err());
    assert_eq!("random:42".parse::<Selection>().unwrap(), Selection::Random(42));
    assert_eq!(Selection::Random(42).to_string(), "random:42");
    assert!("random:x".parse::<Selection>().is_err());
}

#[test]
fn separable_db_classifies_perfectly() {
    let db = blob_db(3, 10);
    for k in [1, 4, 10] {
        let cfg = SvmConfig {
            k,
            ..SvmConfig::default()
        };
        let out = classification_efficiency(&db, &cfg, EvalScope::All).unwrap();
        assert_eq!(out.efficiency, 100.0, "k={k}");
        assert_eq!(out.total, 30);
    }
    let cfg = SvmConfig {
        k: 4,
        ..SvmConfig::default()
    };
    let held = classification_efficiency(&db, &cfg, EvalScope::Heldout).unwrap();
    assert_eq!(held.total, 18);
    let too_many = SvmConfig {
        k: 11,
        ..SvmConfig::default()
    };
    assert!(classification_efficiency(&db, &too_many, EvalScope::All).is_err());
}

#[test]
fn classify_dimension_mismatch_and_json() {
    let db = blob_db(3, 6);
    let model = train_from_db(&db, &SvmConfig { k: 3, ..SvmConfig::default() }).unwrap();
    assert!(model.classify(&[1.0]).is_err());
    assert_eq!(model.machines.len(), 3);
    assert_eq!(model.training.train_ids.len(), 9);
    let back = SvmModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    assert!(matches!(model.kernel, Kernel::Rbf { gamma } if (gamma - 1.0 / 3.0).abs() < 1e-15));
}
