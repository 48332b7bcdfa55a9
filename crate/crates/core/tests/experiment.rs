use std::fmt::Write as _;
use std::path::Path;

use livfuse_core::clinical::LabelPolicy;
use livfuse_core::experiment::{
    fuse_files, generate_synthetic, train_image, train_tabular, ExperimentConfig, FuseInput, InputPipeline,
};
use livfuse_core::AlignMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pbc_like(dir: &Path) -> ExperimentConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut csv = String::from("ID,Age,Drug,Sex,Bilirubin,Albumin,Stage\n");
    for i in 0..240 {
        let stage = 1 + i % 4;
        let bilirubin = [0.5, 1.5, 2.5, 6.0][stage - 1] + rng.random_range(-0.3..0.3);
        let drug = if i % 17 == 0 { "NA" } else if rng.random_bool(0.5) { "D-penicillamine" } else { "Placebo" };
        let albumin = if i % 11 == 0 { String::new() } else { format!("{:.2}", rng.random_range(2.5..4.5)) };
        let sex = if rng.random_bool(0.9) { "F" } else { "M" };
        writeln!(csv, "{i},{},{drug},{sex},{bilirubin},{albumin},{stage}", rng.random_range(30..70)).unwrap();
    }
    std::fs::write(dir.join("pbc.csv"), csv).unwrap();
    let cfg = r#"{
        "seed": 21,
        "out_dir": "out",
        "clinical": {
            "path": "pbc.csv",
            "schema": [
                {"name": "ID", "kind": "identifier"},
                {"name": "Age", "kind": "numeric"},
                {"name": "Drug", "kind": "categorical", "categories": ["D-penicillamine", "Placebo"]},
                {"name": "Sex", "kind": "categorical"},
                {"name": "Bilirubin", "kind": "numeric"},
                {"name": "Albumin", "kind": "numeric"},
                {"name": "Stage", "kind": "label"}
            ],
            "drop_missing": ["Drug"]
        },
        "gbdt": {"rounds": 40}
    }"#;
    std::fs::write(dir.join("exp.json"), cfg).unwrap();
    ExperimentConfig::load(&dir.join("exp.json")).unwrap()
}

#[test]
fn clinical_branch_learns_separable_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pbc_like(dir.path());
    assert_eq!(cfg.clinical.as_ref().unwrap().label_policy, LabelPolicy::default_stage());
    let outcome = train_tabular(&cfg).unwrap();
    assert!(outcome.metrics.accuracy >= 0.9, "validation accuracy {}", outcome.metrics.accuracy);

    let written = outcome.write(&cfg.out_dir, "tabular").unwrap();
    assert!(written.iter().all(|p| p.exists()));
    let n_rows = outcome.validation.ids.len() + outcome.test.ids.len();
    // 15 rows carry a missing Drug and are dropped before splitting
    assert!(n_rows < 240 - 15);
    match &outcome.archive.pipeline {
        InputPipeline::Clinical { preprocess, .. } => {
            let names = preprocess.feature_names();
            assert!(names.contains(&"Drug=Placebo".to_string()) && names.contains(&"Sex=F".to_string()));
        }
        other => panic!("unexpected pipeline {other:?}"),
    }
}

#[test]
fn noiseless_generator_splits_the_work_between_modalities() {
    let d = generate_synthetic(90, 0.0, 1).unwrap();
    let mut tabular_only = 0;
    for (i, &y) in d.labels.iter().enumerate() {
        let t = d.tabular.get(i, 0);
        let u = d.image.get(i, 0);
        let joint = if t == 1.0 { 0 } else if u == 1.0 { 2 } else { 1 };
        assert_eq!(joint, y);
        // the best tabular-only rule guesses one fixed class whenever t = 0
        tabular_only += usize::from(if t == 1.0 { y == 0 } else { y == 1 });
    }
    assert_eq!(tabular_only, 60);
}

#[test]
fn shallow_boosting_lets_fusion_resolve_both_distinctions() {
    // Not the acceptance setting: boosting is cut to 20 rounds so the
    // tabular branch stays near 50/50 between classes 1 and 2.
    let mut hybrid = 0.0;
    for seed in 0..5u64 {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(600, 0.2, seed).unwrap();
        let mut cfg = ExperimentConfig::load(&data.write_to(dir.path(), seed).unwrap()).unwrap();
        cfg.gbdt.rounds = 20;
        let t = train_tabular(&cfg).unwrap();
        let i = train_image(&cfg).unwrap();
        assert!(t.metrics.accuracy <= 0.75 && i.metrics.accuracy <= 0.75);
        let inputs = [
            FuseInput { name: "tabular".into(), file: t.validation, accuracy: None },
            FuseInput { name: "image".into(), file: i.validation, accuracy: None },
        ];
        hybrid += fuse_files(&inputs, AlignMode::Strict, Some(&t.validation_labels)).unwrap().metrics.unwrap().accuracy / 5.0;
    }
    assert!(hybrid >= 0.9, "mean hybrid accuracy {hybrid}");
}
