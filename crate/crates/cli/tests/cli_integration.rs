//! End-to-end runs of the compiled binary: documented exit codes, file
//! layouts, and the cross-command pipeline (synth → train → apply →
//! eval/cohort), all driven the way a shell user would drive them.

mod common;

use std::fs;
use std::path::Path;

use common::{
    assert_success, exit_code, lesionbench, read_json, stderr_text, stdout_json, write_mask_file,
};
use lesionbench_core::conncomp::Connectivity;
use lesionbench_core::io::{write_volume, VolumeFormat};
use lesionbench_core::phantom::{generate_cohort, perturb, preset_spec, PerturbOp, PresetKind};

#[test]
fn eval_of_identical_masks_reports_dice_one() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("m.nii");
    write_mask_file(&mask, (8, 8, 6), &[(2, 2, 2), (2, 3, 2), (5, 5, 4)]);

    let out = lesionbench(dir.path(), &["eval", "--pred", "m.nii", "--gt", "m.nii"]);
    assert_success(&out, "eval");
    let v = stdout_json(&out);
    assert_eq!(v["report"]["dice"], 1.0);
    assert_eq!(v["report"]["ltpr"], 1.0);
    assert_eq!(v["report"]["lfpr"], 0.0);
}

#[test]
fn mismatched_grids_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    write_mask_file(&dir.path().join("a.nii"), (8, 8, 6), &[(1, 1, 1)]);
    write_mask_file(&dir.path().join("b.nii"), (9, 8, 6), &[(1, 1, 1)]);

    let out = lesionbench(dir.path(), &["eval", "--pred", "a.nii", "--gt", "b.nii"]);
    assert_eq!(exit_code(&out), 4, "stderr: {}", stderr_text(&out));
    assert!(stderr_text(&out).contains("grid-mismatch"));
}

#[test]
fn minimum_size_filter_drops_a_small_false_positive() {
    // Ground truth: a 2×2×2 cube (8 mm³). Prediction: the same cube
    // plus a 4-voxel line — 4 mm³, so it survives --min-mm3 0 as a
    // false positive and vanishes under --min-mm3 5.
    let dir = tempfile::tempdir().unwrap();
    let cube: Vec<(usize, usize, usize)> = (0..8)
        .map(|i| (2 + i % 2, 2 + (i / 2) % 2, 2 + i / 4))
        .collect();
    let mut pred = cube.clone();
    pred.extend((8..12).map(|x| (x, 8, 8)));
    write_mask_file(&dir.path().join("gt.nii"), (16, 12, 10), &cube);
    write_mask_file(&dir.path().join("pred.nii"), (16, 12, 10), &pred);

    let run = |min: &str| {
        let out = lesionbench(
            dir.path(),
            &["eval", "--pred", "pred.nii", "--gt", "gt.nii", "--min-mm3", min],
        );
        assert_success(&out, "eval");
        stdout_json(&out)
    };
    let loose = run("0");
    assert_eq!(loose["report"]["lfpr"], 0.5);
    assert_eq!(loose["report"]["counts"]["pred_lesions"], 2);

    let strict = run("5");
    assert_eq!(strict["report"]["lfpr"], 0.0);
    assert_eq!(strict["report"]["counts"]["pred_lesions"], 1);
    assert_eq!(strict["report"]["dice"], 1.0);
}

/// Writes `cases` ground-truth masks plus per-case method volumes and a
/// cohort manifest referencing them; returns nothing, files land in `dir`.
fn write_cohort(dir: &Path, methods: &[(&str, &dyn Fn(usize) -> String)], cases: usize) {
    let spec = preset_spec(PresetKind::Separable, 421);
    let cohort = generate_cohort(&spec, cases as u64).unwrap();
    let mut entries = Vec::new();
    for (i, case) in cohort.iter().enumerate() {
        let gt_name = format!("case{i}_gt.nii");
        write_volume(case.gt.volume(), dir.join(&gt_name), VolumeFormat::Nifti).unwrap();

        // One lesion dropped from an otherwise perfect prediction, a
        // different one per case so the panel is not six identical files.
        let victim = 1 + (i % spec.n_lesions) as u32;
        let (dropped, _) = perturb(
            &case.gt,
            &case.manifest,
            &[PerturbOp::DropLesion(victim)],
            Connectivity::TwentySix,
        )
        .unwrap();
        write_volume(
            dropped.volume(),
            dir.join(format!("case{i}_dropped.nii")),
            VolumeFormat::Nifti,
        )
        .unwrap();

        let method_map: serde_json::Map<String, serde_json::Value> = methods
            .iter()
            .map(|(name, path_of)| (name.to_string(), path_of(i).into()))
            .collect();
        entries.push(serde_json::json!({
            "id": format!("case{i}"),
            "gt": gt_name,
            "scanner": if i % 2 == 0 { "sx" } else { "sy" },
            "methods": method_map,
        }));
    }
    let manifest = serde_json::json!({ "cases": entries });
    fs::write(
        dir.join("cohort.json"),
        serde_json::to_vec_pretty(&manifest).unwrap(),
    )
    .unwrap();
}

#[test]
fn default_min_size_set_emits_three_roc_files() {
    let dir = tempfile::tempdir().unwrap();
    let gt = |i: usize| format!("case{i}_gt.nii");
    write_cohort(dir.path(), &[("alpha", &gt)], 2);

    let out = lesionbench(
        dir.path(),
        &["roc", "--manifest", "cohort.json", "--out-dir", "roc"],
    );
    assert_success(&out, "roc");

    let mut names: Vec<String> = fs::read_dir(dir.path().join("roc"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["roc_alpha_min10.csv", "roc_alpha_min15.csv", "roc_alpha_min5.csv"]
    );
}

#[test]
fn wilcoxon_flags_a_method_that_drops_one_lesion_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let gt = |i: usize| format!("case{i}_gt.nii");
    let dropped = |i: usize| format!("case{i}_dropped.nii");
    write_cohort(dir.path(), &[("alpha", &gt), ("bravo", &dropped)], 6);

    let out = lesionbench(
        dir.path(),
        &["cohort", "--manifest", "cohort.json", "--out-dir", "report"],
    );
    assert_success(&out, "cohort");

    let wilcoxon = read_json(&dir.path().join("report/wilcoxon.json"));
    let ltpr = wilcoxon["tests"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["metric"] == "ltpr")
        .expect("ltpr pairing present");
    assert_eq!(ltpr["method_a"], "alpha");
    assert_eq!(ltpr["method_b"], "bravo");
    assert_eq!(ltpr["n_pairs"], 6);
    // Six paired differences, all the same sign: the strongest possible
    // n = 6 outcome, exact two-sided p = 2/2⁶.
    let p = ltpr["result"]["p_value"].as_f64().unwrap();
    assert_eq!(p, 0.03125);
    assert!(p < 0.05);
    assert_eq!(ltpr["result"]["method"], "exact");
}

#[test]
fn pipeline_round_trip_recovers_the_lesions() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = lesionbench(dir.path(), args);
        assert_success(&out, args[0]);
        out
    };
    run(&["synth", "--preset", "separable", "--cases", "4", "--seed", "7", "--out-dir", "data"]);
    run(&["train", "--manifest", "data/manifest.json", "--seed", "3", "--out", "model.json"]);
    run(&["apply", "--model", "model.json", "--manifest", "data/manifest.json", "--out-dir", "preds"]);

    let out = run(&[
        "eval",
        "--pred",
        "preds/case000_mask.nii",
        "--gt",
        "data/case000_gt.nii",
    ]);
    let dice = stdout_json(&out)["report"]["dice"].as_f64().unwrap();
    assert!(dice >= 0.9, "round-trip dice {dice} below 0.9");
}

#[test]
fn retraining_with_the_same_seed_reproduces_the_archive() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["one", "two"] {
        let sub = dir.path().join(run);
        fs::create_dir(&sub).unwrap();
        let synth = lesionbench(
            &sub,
            &["synth", "--preset", "separable", "--cases", "3", "--seed", "5", "--out-dir", "data"],
        );
        assert_success(&synth, "synth");
        let train = lesionbench(
            &sub,
            &["train", "--manifest", "data/manifest.json", "--seed", "11", "--out", "model.json"],
        );
        assert_success(&train, "train");
    }
    let a = fs::read(dir.path().join("one/model.json")).unwrap();
    let b = fs::read(dir.path().join("two/model.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "model archives differ between identical training runs");
}

#[test]
fn applying_a_model_to_a_manifest_missing_its_channels_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = lesionbench(dir.path(), args);
        assert_success(&out, args[0]);
    };
    run(&["synth", "--preset", "separable", "--cases", "3", "--seed", "6", "--out-dir", "data"]);
    run(&["train", "--manifest", "data/manifest.json", "--seed", "2", "--out", "model.json"]);

    // Strip the T2 channel the model was trained on.
    let mut manifest = read_json(&dir.path().join("data/manifest.json"));
    manifest["channels"] = serde_json::json!(["FLAIR"]);
    for case in manifest["cases"].as_array_mut().unwrap() {
        case["channels"].as_object_mut().unwrap().remove("T2");
    }
    fs::write(
        dir.path().join("data/flair_only.json"),
        serde_json::to_vec_pretty(&manifest).unwrap(),
    )
    .unwrap();

    let out = lesionbench(
        dir.path(),
        &["apply", "--model", "model.json", "--manifest", "data/flair_only.json", "--out-dir", "p"],
    );
    assert_eq!(exit_code(&out), 2, "stderr: {}", stderr_text(&out));
    assert!(stderr_text(&out).contains("channel-mismatch"));
}

#[test]
fn unknown_flags_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = lesionbench(
        dir.path(),
        &["eval", "--pred", "a.nii", "--gt", "b.nii", "--frobnicate"],
    );
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("--frobnicate"));
}

#[test]
fn randomized_commands_demand_an_explicit_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = lesionbench(
        dir.path(),
        &["synth", "--preset", "separable", "--cases", "2", "--out-dir", "d"],
    );
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("--seed"));
}

#[test]
fn missing_case_files_are_listed_and_abort_without_skip_missing() {
    let dir = tempfile::tempdir().unwrap();
    let synth = lesionbench(
        dir.path(),
        &["synth", "--preset", "separable", "--cases", "3", "--seed", "8", "--out-dir", "data"],
    );
    assert_success(&synth, "synth");
    fs::remove_file(dir.path().join("data/case001_T2.nii")).unwrap();
    let train = |extra: &[&str]| {
        let mut args = vec![
            "train", "--manifest", "data/manifest.json", "--seed", "4", "--out", "model.json",
        ];
        args.extend_from_slice(extra);
        lesionbench(dir.path(), &args)
    };

    let strict = train(&[]);
    assert_eq!(exit_code(&strict), 3, "stderr: {}", stderr_text(&strict));
    let diagnostics = stderr_text(&strict);
    assert!(diagnostics.contains("missing: case001_T2.nii (case case001)"));
    assert!(diagnostics.contains("--skip-missing"));

    let lenient = train(&["--skip-missing"]);
    assert_success(&lenient, "train --skip-missing");
    assert!(stderr_text(&lenient).contains("dropped 1 of 3 cases"));
    assert!(dir.path().join("model.json").is_file());
}

#[test]
fn every_artifact_carries_a_provenance_block() {
    let dir = tempfile::tempdir().unwrap();
    let gt = |i: usize| format!("case{i}_gt.nii");
    write_cohort(dir.path(), &[("alpha", &gt)], 2);

    let out = lesionbench(
        dir.path(),
        &["cohort", "--manifest", "cohort.json", "--out-dir", "report"],
    );
    assert_success(&out, "cohort");

    for entry in fs::read_dir(dir.path().join("report")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => assert!(
                text.starts_with("# provenance: {"),
                "{} lacks a provenance header",
                path.display()
            ),
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                let p = &v["provenance"];
                assert_eq!(p["tool"], "lesionbench", "{}", path.display());
                assert!(p["config"].is_object());
                let digest = p["inputs"][0]["sha256"].as_str().unwrap();
                assert_eq!(digest.len(), 64);
            }
            other => panic!("unexpected artifact type {other:?} at {}", path.display()),
        }
    }

    // eval --out writes the same block into standalone reports.
    let eval = lesionbench(
        dir.path(),
        &["eval", "--pred", "case0_gt.nii", "--gt", "case0_gt.nii", "--out", "single.json"],
    );
    assert_success(&eval, "eval --out");
    let single = read_json(&dir.path().join("single.json"));
    assert_eq!(single["provenance"]["command"], "eval");
    assert_eq!(
        single["provenance"]["version"],
        env!("CARGO_PKG_VERSION"),
        "tool version recorded"
    );
}
