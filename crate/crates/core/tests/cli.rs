use pseudovox::io;
use std::fs;
use std::path::{Path, PathBuf};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("pseudovox").chain(args.iter().copied());
    let code = pseudovox::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

/// Small synthetic cohort whose files feed the other subcommands.
fn cohort(dir: &Path) -> PathBuf {
    let out = dir.join("sim");
    let (code, _, err) = run(&[
        "--seed",
        "11",
        "simulate",
        "--out-dir",
        p(&out),
        "--n-speakers-per-gender",
        "4",
        "--utts-per-speaker",
        "3",
        "--embed-dim",
        "8",
        "--pool-speakers-per-gender",
        "220",
        "--attack",
        "o-a",
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn stats_skips_unvoiced_utterances_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.txt");
    let output = dir.path().join("s.txt");
    fs::write(&input, "b 100 0 200\na 0 0 0\nc 150\n").unwrap();
    let (code, _, err) = run(&["stats", p(&input), p(&output)]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("a"), "{err}");
    let stats = io::parse_stats(&read(&output)).unwrap();
    let ids: Vec<&str> = stats.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["b", "c"]);
    assert_eq!(stats[0].stats.voiced_frame_count, 2);
    assert!((stats[0].stats.mean - (100f64.ln() + 200f64.ln()) / 2.0).abs() < 1e-12);
}

#[test]
fn stats_on_empty_input_writes_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.txt");
    let output = dir.path().join("s.txt");
    fs::write(&input, "# nothing here\n").unwrap();
    assert_eq!(run(&["stats", p(&input), p(&output)]).0, 0);
    assert_eq!(read(&output), "");
}

#[test]
fn parse_errors_exit_nonzero_and_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.txt");
    let output = dir.path().join("s.txt");
    fs::write(&input, "u 100 x\n").unwrap();
    let (code, _, err) = run(&["stats", p(&input), p(&output)]);
    assert_eq!(code, 1);
    assert!(err.contains("c.txt"), "{err}");
    assert!(!output.exists());
}

fn anonymize(sim: &Path, out: &Path, global: &[&str], extra: &[&str]) -> (i32, String) {
    let files = [
        ("--pool", sim.join("pool.txt")),
        ("--embeddings", sim.join("user_embeddings.txt")),
        ("--contours", sim.join("user_contours.txt")),
        ("--plda", sim.join("plda.txt")),
        ("--out-dir", out.to_path_buf()),
    ];
    let mut args: Vec<&str> = vec!["--seed", "5"];
    args.extend_from_slice(global);
    args.push("anonymize");
    for (flag, path) in &files {
        args.push(flag);
        args.push(p(path));
    }
    args.extend_from_slice(extra);
    let (code, _, err) = run(&args);
    (code, err)
}

#[test]
fn anonymize_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(anonymize(&sim, &a, &["--threads", "4"], &[]).0, 0);
    let (code, err) = anonymize(&sim, &b, &["--threads", "1"], &[]);
    assert_eq!(code, 0, "{err}");
    for f in ["mapping.txt", "pseudo_xvectors.txt", "pseudo_stats.txt", "contours.txt", "manifest.txt"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let mapping = io::parse_mapping(&read(a.join("mapping.txt"))).unwrap();
    assert_eq!(mapping.len(), 8);
    let manifest = read(a.join("manifest.txt"));
    assert!(manifest.contains("global_seed 5"), "{manifest}");
}

#[test]
fn anonymize_with_original_f0_copies_contours_through() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let out = dir.path().join("o");
    let (code, err) = anonymize(&sim, &out, &[], &["--f0", "original"]);
    assert_eq!(code, 0, "{err}");
    let before = io::parse_contours(&read(sim.join("user_contours.txt"))).unwrap();
    let after = io::parse_contours(&read(out.join("contours.txt"))).unwrap();
    assert_eq!(before, after);
}

#[test]
fn anonymize_modified_f0_keeps_unvoiced_frames() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let out = dir.path().join("m");
    assert_eq!(anonymize(&sim, &out, &[], &[]).0, 0);
    let before = io::parse_contours(&read(sim.join("user_contours.txt"))).unwrap();
    let after = io::parse_contours(&read(out.join("contours.txt"))).unwrap();
    assert_eq!(before.len(), after.len());
    for (x, y) in before.iter().zip(&after) {
        assert_eq!(x.utterance_id, y.utterance_id);
        for (a, b) in x.values.iter().zip(&y.values) {
            assert_eq!(*a == 0.0, *b == 0.0);
        }
    }
}

#[test]
fn anonymize_with_too_small_pool_fails_naming_the_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let out = dir.path().join("x");
    let (code, err) = anonymize(&sim, &out, &[], &["--k-far", "500", "--k-sel", "4"]);
    assert_eq!(code, 1);
    assert!(err.contains("user-"), "{err}");
    assert!(!out.join("mapping.txt").exists());
}

#[test]
fn score_matches_library_and_eval_reads_it_back() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let scores = dir.path().join("scores.txt");
    let report = dir.path().join("report.txt");
    let det = dir.path().join("det.txt");
    let emb = sim.join("user_embeddings.txt");
    let (code, _, err) = run(&[
        "score",
        "--plda",
        p(&sim.join("plda.txt")),
        "--enroll",
        p(&emb),
        "--trials",
        p(&emb),
        "--key",
        p(&sim.join("trial_key.txt")),
        "--out",
        p(&scores),
        "--no-length-norm",
    ]);
    assert_eq!(code, 0, "{err}");

    let plda = io::parse_plda(&read(sim.join("plda.txt"))).unwrap().with_length_norm(false);
    let embs = io::parse_embeddings(&read(&emb)).unwrap();
    let got = io::parse_scores(&read(&scores)).unwrap();
    assert!(!got.is_empty());
    for r in got.iter().take(10) {
        let enroll: Vec<_> = embs.iter().filter(|e| e.speaker_id == r.enroll_id).collect();
        let dim = enroll[0].vector.len();
        let mut avg = vec![0.0; dim];
        for e in &enroll {
            let proj = plda.project_vector(&e.vector).unwrap();
            for k in 0..dim {
                avg[k] += proj[k] / enroll.len() as f64;
            }
        }
        let test = embs.iter().find(|e| e.utterance_id.as_deref() == Some(r.test_id.as_str())).unwrap();
        let want = plda.score(&avg, &plda.project_vector(&test.vector).unwrap()).unwrap();
        assert!((r.score - want).abs() < 1e-9, "{} {}: {} vs {want}", r.enroll_id, r.test_id, r.score);
    }

    let (code, _, err) = run(&[
        "--det-out",
        p(&det),
        "eval",
        "--scores",
        p(&scores),
        "--key",
        p(&sim.join("trial_key.txt")),
        "--out",
        p(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    let rep = io::parse_report(&read(&report)).unwrap();
    assert!(rep.eer_pct >= 0.0 && rep.eer_pct <= 50.0);
    assert!(rep.min_cllr_bits <= 1.0 + 1e-12);
    assert!(!io::parse_det(&read(&det)).unwrap().is_empty());
}

#[test]
fn score_with_unknown_trial_id_fails() {
    let dir = tempfile::tempdir().unwrap();
    let sim = cohort(dir.path());
    let key = dir.path().join("key.txt");
    fs::write(&key, "user-f-000 nobody target\n").unwrap();
    let emb = sim.join("user_embeddings.txt");
    let out = dir.path().join("s.txt");
    let (code, _, err) = run(&[
        "score",
        "--scorer",
        "cosine",
        "--enroll",
        p(&emb),
        "--trials",
        p(&emb),
        "--key",
        p(&key),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("nobody"), "{err}");
    assert!(!out.exists());
}

#[test]
fn eval_on_separable_and_uninformative_scores() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("key.txt");
    let scores = dir.path().join("scores.txt");
    let report = dir.path().join("r.txt");
    fs::write(&key, "e t1 target\ne t2 target\ne n1 nontarget\ne n2 nontarget\n").unwrap();

    fs::write(&scores, "e t1 5\ne t2 3\ne n1 -2\ne n2 -4\n").unwrap();
    let args = ["eval", "--scores", p(&scores), "--key", p(&key), "--out", p(&report)];
    assert_eq!(run(&args).0, 0);
    let rep = io::parse_report(&read(&report)).unwrap();
    assert_eq!(rep.eer_pct, 0.0);
    assert_eq!(rep.min_cllr_bits, 0.0);

    fs::write(&scores, "e t1 0\ne t2 0\ne n1 0\ne n2 0\n").unwrap();
    assert_eq!(run(&args).0, 0);
    let rep = io::parse_report(&read(&report)).unwrap();
    assert_eq!(rep.cllr_bits, 1.0);
    assert_eq!(rep.eer_pct, 50.0);
}

#[test]
fn simulate_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = cohort(&dir.path().join("1"));
    let b = cohort(&dir.path().join("2"));
    for f in ["manifest.txt", "scores.txt", "report.txt", "pool.txt"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}

#[test]
fn simulate_rejects_equal_seeds_for_a_a() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let (code, _, err) = run(&[
        "simulate",
        "--out-dir",
        p(&out),
        "--attack",
        "a-a",
        "--enroll-seed",
        "3",
        "--trial-seed",
        "3",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("enroll_seed"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.txt");
    fs::write(
        &cfg,
        "seed 2\nn_speakers_per_gender 3\nutts_per_speaker 2\nembed_dim 4\nattack o-a\n",
    )
    .unwrap();
    let out = dir.path().join("s");
    let (code, _, err) = run(&["simulate", p(&cfg), "--out-dir", p(&out), "--embed-dim", "6"]);
    assert_eq!(code, 0, "{err}");
    let written = read(out.join("config.txt"));
    assert!(written.contains("embed_dim 6\n"), "{written}");
    assert!(written.contains("n_speakers_per_gender 3\n"), "{written}");
    let embs = io::parse_embeddings(&read(out.join("user_embeddings.txt"))).unwrap();
    assert_eq!(embs[0].vector.len(), 6);
    assert_eq!(embs.len(), 3 * 2 * 2);
}

#[test]
fn version_flag_prints_version() {
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(pseudovox::cli::VERSION), "{out}");
}
