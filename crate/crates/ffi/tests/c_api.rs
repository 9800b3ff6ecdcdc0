use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use dsre_core::corpus::synthetic::{generate_synthetic, SyntheticConfig, SyntheticFiles};
use dsre_core::encoder::StaticEmbeddings;
use dsre_core::eval;
use dsre_core::model::ModelConfig;
use dsre_core::training::{checkpoint, train, TrainConfig};
use dsre_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    files: SyntheticFiles,
    checkpoint: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_synthetic(&SyntheticConfig {
        num_relations: 2,
        bags_per_relation: 4,
        bag_size: 2,
        noise_rate: 0.2,
        embedding_dim: 20,
        test_fraction: 0.5,
        ..Default::default()
    })
    .unwrap();
    let files = corpus.write(dir.path()).unwrap();
    let embeddings = StaticEmbeddings::load(&files.embeddings).unwrap();
    let config = TrainConfig {
        epochs: 1,
        embeddings: Some(files.embeddings.clone()),
        ..Default::default()
    };
    let mut model_config = ModelConfig::default();
    model_config.encoder.d_word = 20;
    let out = dir.path().join("run");
    train(&corpus.train, &corpus.schema, &embeddings, &config, model_config, None, Some(&out)).unwrap();
    Fixture {
        checkpoint: out.join("final.ckpt"),
        files,
        _dir: dir,
    }
}

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dsre_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn score_and_auc_match_the_rust_api() {
    let f = fixture();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(dsre_model_load(c(&f.checkpoint).as_ptr(), &mut model), DsreStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(dsre_model_num_relations(model), 3);
        assert_eq!(CStr::from_ptr(dsre_model_relation_name(model, 0)).to_str().unwrap(), "NA");
        assert!(dsre_model_relation_name(model, 3).is_null());

        let mut emb = ptr::null_mut();
        assert_eq!(dsre_embeddings_load(c(&f.files.embeddings).as_ptr(), &mut emb), DsreStatus::Ok);
        let mut corpus = ptr::null_mut();
        assert_eq!(dsre_corpus_load(c(&f.files.test).as_ptr(), &mut corpus), DsreStatus::Ok);
        assert_eq!(dsre_corpus_num_bags(corpus), 4);

        let mut preds = ptr::null_mut();
        assert_eq!(dsre_score_corpus(model, corpus, emb, 2, &mut preds), DsreStatus::Ok);
        assert_eq!(dsre_predictions_len(preds), 8);

        let (rust_model, _) = checkpoint::load(&f.checkpoint).unwrap();
        let rust_emb = StaticEmbeddings::load(&f.files.embeddings).unwrap();
        let bags = dsre_core::corpus::load_corpus(&f.files.test, &Default::default()).unwrap();
        let expected = eval::score_corpus(&rust_model, &bags, &rust_emb, 1).unwrap();
        for (i, e) in expected.iter().enumerate() {
            let mut p = DsrePrediction {
                e1: ptr::null(),
                e2: ptr::null(),
                relation: ptr::null(),
                score: 0.0,
            };
            assert_eq!(dsre_predictions_get(preds, i, &mut p), DsreStatus::Ok);
            assert_eq!(CStr::from_ptr(p.e1).to_str().unwrap(), e.pair_id.e1);
            assert_eq!(CStr::from_ptr(p.e2).to_str().unwrap(), e.pair_id.e2);
            assert_eq!(CStr::from_ptr(p.relation).to_str().unwrap(), e.relation);
            assert_eq!(p.score.to_bits(), e.score.to_bits());
        }

        let expected_auc = eval::pr_curve(&expected, &eval::gold_from_bags(&bags)).unwrap().auc;
        let mut auc = -1.0;
        assert_eq!(dsre_auc_pr(preds, ptr::null(), corpus, &mut auc), DsreStatus::Ok);
        assert_eq!(auc, expected_auc);
        let mut from_file = -1.0;
        assert_eq!(
            dsre_auc_pr(preds, c(&f.files.test_gold).as_ptr(), ptr::null(), &mut from_file),
            DsreStatus::Ok
        );
        assert_eq!(from_file, expected_auc);

        dsre_predictions_free(preds);
        dsre_corpus_free(corpus);
        dsre_embeddings_free(emb);
        dsre_model_free(model);
    }
}

#[test]
fn errors_report_status_and_message() {
    unsafe {
        let mut model = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.ckpt").unwrap();
        assert_eq!(dsre_model_load(missing.as_ptr(), &mut model), DsreStatus::Io);
        assert!(model.is_null());
        assert!(last_error().contains("/nonexistent/model.ckpt"), "{}", last_error());

        assert_eq!(dsre_model_load(ptr::null(), &mut model), DsreStatus::NullPointer);
        assert_eq!(dsre_model_load(missing.as_ptr(), ptr::null_mut()), DsreStatus::NullPointer);

        let dir = tempfile::tempdir().unwrap();
        let bogus = dir.path().join("bogus.ckpt");
        std::fs::write(&bogus, "not a checkpoint\n").unwrap();
        assert_eq!(dsre_model_load(c(&bogus).as_ptr(), &mut model), DsreStatus::Checkpoint);

        let bad_corpus = dir.path().join("bad.jsonl");
        std::fs::write(&bad_corpus, "{ nope\n").unwrap();
        let mut corpus = ptr::null_mut();
        assert_eq!(dsre_corpus_load(c(&bad_corpus).as_ptr(), &mut corpus), DsreStatus::Parse);
        assert!(last_error().contains(":1:"), "{}", last_error());

        let mut preds = ptr::null_mut();
        assert_eq!(
            dsre_score_corpus(ptr::null(), ptr::null(), ptr::null(), 1, &mut preds),
            DsreStatus::NullPointer
        );
        assert_eq!(dsre_predictions_len(ptr::null()), 0);
        assert_eq!(dsre_model_num_relations(ptr::null()), 0);

        dsre_model_free(ptr::null_mut());
        dsre_corpus_free(ptr::null_mut());
        dsre_embeddings_free(ptr::null_mut());
        dsre_predictions_free(ptr::null_mut());
    }
}

#[test]
fn out_of_range_prediction_index() {
    let f = fixture();
    unsafe {
        let (mut model, mut emb, mut corpus, mut preds) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(dsre_model_load(c(&f.checkpoint).as_ptr(), &mut model), DsreStatus::Ok);
        assert_eq!(dsre_embeddings_load(c(&f.files.embeddings).as_ptr(), &mut emb), DsreStatus::Ok);
        assert_eq!(dsre_corpus_load(c(&f.files.test).as_ptr(), &mut corpus), DsreStatus::Ok);
        assert_eq!(dsre_score_corpus(model, corpus, emb, 0, &mut preds), DsreStatus::Ok);
        let mut p = DsrePrediction {
            e1: ptr::null(),
            e2: ptr::null(),
            relation: ptr::null(),
            score: 0.0,
        };
        assert_eq!(dsre_predictions_get(preds, 99, &mut p), DsreStatus::OutOfRange);
        assert!(last_error().contains("99"));
        dsre_predictions_free(preds);
        dsre_corpus_free(corpus);
        dsre_embeddings_free(emb);
        dsre_model_free(model);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(dsre_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Directory holding the built `libdsre_ffi` shared library.
fn library_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let lib_dir = library_dir();
    if !lib_dir.join("libdsre_ffi.so").exists() && !lib_dir.join("libdsre_ffi.dylib").exists() {
        eprintln!("shared library not in {}; skipping", lib_dir.display());
        return;
    }
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "dsre.h"
int main(int argc, char **argv) {
    DsreModel *m = NULL; DsreEmbeddings *e = NULL; DsreCorpus *c = NULL; DsrePredictions *p = NULL;
    if (dsre_model_load(argv[1], &m) != DSRE_STATUS_OK) { fprintf(stderr, "%s\n", dsre_last_error()); return 1; }
    if (dsre_embeddings_load(argv[2], &e) != DSRE_STATUS_OK) return 2;
    if (dsre_corpus_load(argv[3], &c) != DSRE_STATUS_OK) return 3;
    if (dsre_score_corpus(m, c, e, 1, &p) != DSRE_STATUS_OK) return 4;
    double auc = -1.0;
    if (dsre_auc_pr(p, NULL, c, &auc) != DSRE_STATUS_OK) return 5;
    printf("%zu %.6f\n", dsre_predictions_len(p), auc);
    dsre_predictions_free(p); dsre_corpus_free(c); dsre_embeddings_free(e); dsre_model_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("probe");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-ldsre_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin)
        .args([&f.checkpoint, &f.files.embeddings, &f.files.test])
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("8 "), "{stdout}");
}

fn which_cc() -> Result<PathBuf, ()> {
    for name in ["cc", "gcc", "clang"] {
        if Command::new(name).arg("--version").output().is_ok() {
            return Ok(PathBuf::from(name));
        }
    }
    Err(())
}
