//! Acceptance run. Prints one PASS/FAIL/SKIP line per criterion and fails if
//! any gating criterion fails. The pipeline criteria drive the `ccrv` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ccrv::agreement::{
    macro_f1, predict_agreement, train_agreement_encoded, AgreementConfig, AgreementDistribution, AgreementParams,
    EncodedStance, Stance,
};
use ccrv::embedding::{in_batch_ranking_loss, EncoderDims, EncoderParams, SentenceVector, SENTENCE_DIM};
use ccrv::features::{aggregate, features_from_vectors, NUM_FEATURES};
use ccrv::nn::{
    grad_check, ranking_loss_grad, softmax_cross_entropy, GradCheckOptions, GruCell, Linear, Matrix, Mlp,
    Parameter,
};
use ccrv::verifier::{VerifierConfig, VerifierParams};
use ccrv::RngState;

const SEED: u64 = 0;
const GRAD_TOL: f64 = 1e-3;
const INSTANCES: u64 = 10;

struct Outcome {
    name: &'static str,
    gating: bool,
    pass: Option<bool>,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, name: &'static str, gating: bool, pass: Option<bool>, detail: String) {
    let tag = match pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "SKIP",
    };
    println!("{tag}  {name}: {detail}");
    out.push(Outcome { name, gating, pass, detail });
}

fn ccrv(dir: &Path, args: &[&str]) -> Duration {
    let t = Instant::now();
    let res = Command::new(env!("CARGO_BIN_EXE_ccrv"))
        .args(["--seed", &SEED.to_string(), "--out-dir"])
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn ccrv");
    assert!(
        res.status.success(),
        "ccrv {args:?} failed: {}\n{}",
        res.status,
        String::from_utf8_lossy(&res.stderr)
    );
    t.elapsed()
}

fn tsv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

/// Value at (row whose column `key_col` equals `key`, column named `col`).
fn lookup(table: &[Vec<String>], key_col: usize, key: &str, col: &str) -> f64 {
    let c = table[0].iter().position(|h| h == col).unwrap_or_else(|| panic!("no column {col}"));
    let row = table.iter().find(|r| r[key_col] == key).unwrap_or_else(|| panic!("no row {key}"));
    row[c].parse().unwrap_or_else(|_| panic!("{key}/{col} = {}", row[c]))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn randomize(p: &mut Parameter, rng: &mut RngState, scale: f64) {
    p.value.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-scale, scale));
}

fn random_matrix(rows: usize, cols: usize, rng: &mut RngState) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    m.data_mut().iter_mut().for_each(|v| *v = rng.uniform(-1.0, 1.0));
    m
}

/// Finite differences are only meaningful away from the ReLU kink, so
/// instances with a hidden pre-activation within `KINK_MARGIN` of 0 are redrawn.
const KINK_MARGIN: f64 = 1e-3;

fn smooth_instance(
    rng: &mut RngState,
    seed: u64,
    mut draw: impl FnMut(&mut RngState) -> (Mlp, Matrix),
) -> (Mlp, Matrix) {
    loop {
        let (mlp, x) = draw(rng);
        let tr = mlp.forward_train(&x, Some(&mut RngState::new(seed))).unwrap();
        if tr.relu_margin() >= KINK_MARGIN {
            return (mlp, x);
        }
    }
}

fn check_mlp(mlp: &mut Mlp, x: &Matrix, targets: &[usize], seed: u64) -> f64 {
    let opts = GradCheckOptions { seed, ..Default::default() };
    grad_check(mlp, opts, |m, bp| {
        let tr = m.forward_train(x, Some(&mut RngState::new(seed)))?;
        let (loss, dl) = softmax_cross_entropy(&tr.logits, targets)?;
        if bp {
            m.backward(&tr, &dl)?;
        }
        Ok(loss)
    })
    .unwrap()
}

/// Worst relative error per differentiable operation over random instances.
fn gradient_suite() -> Vec<(&'static str, f64)> {
    let mut worst = vec![
        ("linear", 0.0f64),
        ("gru_cell", 0.0),
        ("encoder", 0.0),
        ("agreement_mlp", 0.0),
        ("verifier_mlp", 0.0),
        ("ranking_loss", 0.0),
        ("cross_entropy", 0.0),
    ];
    for seed in 0..INSTANCES {
        let mut rng = RngState::new(1000 + seed);
        let opts = GradCheckOptions { seed, ..Default::default() };
        let mut errs = Vec::new();

        let mut lin = Linear::new(5, 3, &mut rng);
        randomize(&mut lin.bias, &mut rng, 0.5);
        let x = random_matrix(4, 5, &mut rng);
        let w = random_matrix(4, 3, &mut rng);
        errs.push(
            grad_check(&mut lin, opts, |l, bp| {
                let y = l.forward(&x)?;
                if bp {
                    l.backward(&x, &w)?;
                }
                Ok(y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum())
            })
            .unwrap(),
        );

        let mut cell = GruCell::new(3, 4, &mut rng);
        for p in [&mut cell.b_z, &mut cell.b_r, &mut cell.b_h] {
            randomize(p, &mut rng, 0.5);
        }
        let len = 1 + rng.below(4);
        let inputs = random_matrix(len, 3, &mut rng);
        let weights = random_matrix(len, 4, &mut rng);
        let reverse = seed % 2 == 1;
        errs.push(
            grad_check(&mut cell, opts, |c, bp| {
                let steps = c.run(&inputs, reverse);
                let mut loss = 0.0;
                for (k, st) in steps.iter().enumerate() {
                    let t = if reverse { len - 1 - k } else { k };
                    loss += st.h.iter().zip(weights.row(t)).map(|(a, b)| a * b).sum::<f64>();
                }
                if bp {
                    c.run_backward(&inputs, &steps, &weights, reverse);
                }
                Ok(loss)
            })
            .unwrap(),
        );

        let dims = EncoderDims { vocab: 9, d_emb: 5, d_hidden: 3, max_len: 8 };
        let mut enc = EncoderParams::init(dims, &mut rng);
        let proj: Vec<f64> = (0..dims.output_dim()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ids: Vec<usize> = (0..2 + rng.below(4)).map(|_| 3 + rng.below(6)).collect();
        errs.push(
            grad_check(&mut enc, opts, |e, bp| {
                let tr = e.forward(&ids)?;
                if bp {
                    e.backward(&tr, &proj)?;
                }
                Ok(tr.output.0.iter().zip(&proj).map(|(a, b)| a * b).sum())
            })
            .unwrap(),
        );

        let (mut agr, x) = smooth_instance(&mut rng, seed, |r| {
            let p = AgreementParams::init(SENTENCE_DIM, &AgreementConfig::default(), r);
            (p.mlp, random_matrix(3, 2 * SENTENCE_DIM, r))
        });
        let t: Vec<usize> = (0..3).map(|_| rng.below(4)).collect();
        errs.push(check_mlp(&mut agr, &x, &t, seed));

        let (mut ver, x) = smooth_instance(&mut rng, seed, |r| {
            let p = VerifierParams::init(&VerifierConfig::default(), r);
            (p.mlp, random_matrix(5, NUM_FEATURES, r))
        });
        let t: Vec<usize> = (0..5).map(|_| rng.below(2)).collect();
        errs.push(check_mlp(&mut ver, &x, &t, seed));

        // triplet loss and the in-batch form used during training
        let mut vecs: Vec<Parameter> = (0..6).map(|_| Parameter::uniform(1, 6, 1, &mut rng)).collect();
        let triplet = grad_check(&mut vecs, opts, |ps, bp| {
            let g = ranking_loss_grad(ps[0].value.data(), ps[1].value.data(), ps[2].value.data(), 1.5)?;
            if bp {
                for (p, d) in ps.iter_mut().zip([&g.anchor, &g.positive, &g.negative]) {
                    p.grad.data_mut().iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
            }
            Ok(g.loss)
        })
        .unwrap();
        let batch = grad_check(&mut vecs, opts, |ps, bp| {
            let src: Vec<_> = ps[..3].iter().map(|p| SentenceVector(p.value.data().to_vec())).collect();
            let tgt: Vec<_> = ps[3..].iter().map(|p| SentenceVector(p.value.data().to_vec())).collect();
            let (loss, ds, dt) = in_batch_ranking_loss(&src, &tgt, 2.5)?;
            if bp {
                for (p, d) in ps.iter_mut().zip(ds.iter().chain(&dt)) {
                    p.grad.data_mut().iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
            }
            Ok(loss)
        })
        .unwrap();
        errs.push(triplet.max(batch));

        let mut logits = vec![Parameter::new(random_matrix(4, 5, &mut rng))];
        let t: Vec<usize> = (0..4).map(|_| rng.below(5)).collect();
        errs.push(
            grad_check(&mut logits, opts, |ps, bp| {
                let (loss, dl) = softmax_cross_entropy(&ps[0].value, &t)?;
                if bp {
                    ps[0].grad.add_assign(&dl)?;
                }
                Ok(loss)
            })
            .unwrap(),
        );

        for (slot, e) in worst.iter_mut().zip(errs) {
            slot.1 = slot.1.max(e);
        }
    }
    worst
}

/// Four classes, each with its own headline and body offset under unit noise.
fn separable_stance(n_per_class: usize, seed: u64) -> Vec<EncodedStance> {
    let mut dirs = RngState::new(4242);
    let offsets: Vec<[Vec<f64>; 2]> = (0..4)
        .map(|_| [0, 1].map(|_| (0..SENTENCE_DIM).map(|_| 0.3 * dirs.normal()).collect()))
        .collect();
    let mut rng = RngState::new(seed);
    (0..4 * n_per_class)
        .map(|i| {
            let c = i % 4;
            let mut side = |k: usize| SentenceVector(offsets[c][k].iter().map(|o| o + rng.normal()).collect());
            let headline = side(0);
            EncodedStance { headline, body: side(1), label: Stance::ALL[c] }
        })
        .collect()
}

/// Plain two-pass mean and population variance in input order.
fn oracle_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    let mean = total / n;
    let mut sq = 0.0;
    for x in xs {
        sq += (x - mean).powi(2);
    }
    (mean, sq / n)
}

fn oracle_features(distances: &[f64], agreements: &[AgreementDistribution]) -> [f64; NUM_FEATURES] {
    if distances.is_empty() {
        return [1.0, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0, 0.25, 0.0];
    }
    let mut out = [0.0; NUM_FEATURES];
    (out[0], out[1]) = oracle_stats(distances);
    for k in 0..4 {
        let col: Vec<f64> = agreements.iter().map(|a| a.0[k]).collect();
        (out[2 + 2 * k], out[3 + 2 * k]) = oracle_stats(&col);
    }
    out
}

fn oracle_distance(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (1.0 - dot / (nu * nv)).clamp(0.0, 2.0)
}

/// Largest deviation from the oracle over 100 random evidence sets; returns
/// (worst, cases with n = 0, cases with n = 1).
fn feature_oracle() -> (f64, usize, usize) {
    let mut rng = RngState::new(77);
    let dim = 16;
    let agr = AgreementParams::init(dim, &AgreementConfig { hidden: 12, ..Default::default() }, &mut rng);
    let (mut worst, mut empty, mut single) = (0.0f64, 0, 0);
    for case in 0..100 {
        let n = match case {
            0..=9 => 0,
            10..=19 => 1,
            _ => 2 + rng.below(30),
        };
        let vec = |rng: &mut RngState| SentenceVector((0..dim).map(|_| rng.normal()).collect());
        let rumor = vec(&mut rng);
        let titles: Vec<SentenceVector> = (0..n).map(|_| vec(&mut rng)).collect();
        let got = features_from_vectors(&rumor, &titles, &agr).unwrap();
        let dists: Vec<f64> = titles.iter().map(|t| oracle_distance(&rumor.0, &t.0)).collect();
        let dists_for_agg = dists.clone();
        let agreements: Vec<AgreementDistribution> =
            titles.iter().map(|t| predict_agreement(&rumor, t, &agr).unwrap()).collect();
        let want = oracle_features(&dists, &agreements);
        // direct aggregation of arbitrary distributions, not only model outputs
        let raw: Vec<AgreementDistribution> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 1.0) + 1e-3).collect();
                let z: f64 = w.iter().sum();
                AgreementDistribution([w[0] / z, w[1] / z, w[2] / z, w[3] / z])
            })
            .collect();
        let got_raw = aggregate(&dists_for_agg, &raw).unwrap();
        let want_raw = oracle_features(&dists, &raw);
        for k in 0..NUM_FEATURES {
            worst = worst.max((got.0[k] - want[k]).abs()).max((got_raw.0[k] - want_raw[k]).abs());
        }
        empty += usize::from(n == 0);
        single += usize::from(n == 1);
    }
    (worst, empty, single)
}

fn manifests_equal(a: &Path, b: &Path) -> bool {
    let read = |d: &Path| fs::read(d.join("manifest.tsv")).unwrap();
    let (ma, mb) = (read(a), read(b));
    let has_files = String::from_utf8_lossy(&ma).lines().any(|l| l.starts_with("file\t"));
    has_files && ma == mb
}

fn run_twice(root: &Path, name: &str, args: &[&str]) -> bool {
    let a = root.join(format!("det_{name}_a"));
    let b = root.join(format!("det_{name}_b"));
    ccrv(&a, args);
    ccrv(&b, args);
    manifests_equal(&a, &b)
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root: PathBuf = tmp.path().to_path_buf();
    let mut out: Vec<Outcome> = Vec::new();

    let t = Instant::now();
    let suite = gradient_suite();
    let elapsed = t.elapsed();
    let max = suite.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let parts: Vec<String> = suite.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    record(
        &mut out,
        "gradient suite",
        true,
        Some(max < GRAD_TOL && elapsed < Duration::from_secs(120)),
        format!(
            "max rel err {max:.2e} (< {GRAD_TOL:.0e}) over {INSTANCES} instances each [{}], {:.1}s (< 120s)",
            parts.join(" "),
            elapsed.as_secs_f64()
        ),
    );

    // corpus, 2,000 training pairs plus 200 held-out candidates
    let data = root.join("data");
    ccrv(&data, &["gen-synthetic", "--set", "synthetic.parallel_pairs=2200"]);
    let models = root.join("models");
    let pipeline = Instant::now();
    let emb_time = ccrv(
        &models,
        &["train-embedding", "--parallel", s(&data.join("parallel.tsv")), "--set", "embedding.holdout=200"],
    );
    let retrieval = tsv(&models.join("retrieval.tsv"));
    let candidates: usize = retrieval[1][0].parse().unwrap();
    let acc: f64 = retrieval[1][1].parse().unwrap();
    record(
        &mut out,
        "bilingual embedding",
        true,
        Some(acc >= 0.80 && candidates == 200 && emb_time < Duration::from_secs(300)),
        format!(
            "retrieval@1 {acc:.3} (>= 0.80) among {candidates} held-out candidates, {:.1}s (< 300s)",
            emb_time.as_secs_f64()
        ),
    );

    let t = Instant::now();
    let train = separable_stance(500, 1);
    let dev = separable_stance(250, 2);
    let (params, trace) =
        train_agreement_encoded(&train, &dev, &AgreementConfig::default(), &mut RngState::new(SEED)).unwrap();
    let preds: Vec<Stance> = dev
        .iter()
        .map(|e| predict_agreement(&e.headline, &e.body, &params).unwrap().argmax())
        .collect();
    let gold: Vec<Stance> = dev.iter().map(|e| e.label).collect();
    let f1 = macro_f1(&preds, &gold).unwrap();
    let elapsed = t.elapsed();
    record(
        &mut out,
        "agreement classifier (separable)",
        true,
        Some(f1 >= 0.95 && elapsed < Duration::from_secs(120)),
        format!(
            "dev macro-F1 {f1:.3} (>= 0.95), best epoch {}, {:.1}s (< 120s)",
            trace.best_epoch,
            elapsed.as_secs_f64()
        ),
    );

    let (worst, empty, single) = feature_oracle();
    record(
        &mut out,
        "feature oracle",
        true,
        Some(worst <= 1e-9 && empty > 0 && single > 0),
        format!("max abs diff {worst:.2e} (<= 1e-9) over 100 sets, {empty} empty, {single} with n=1"),
    );

    let enc = models.join("encoder.ckpt");
    let vocab = models.join("vocab.txt");
    let agr_path = models.join("agreement.ckpt");
    ccrv(
        &models,
        &["train-agreement", "--stance", s(&data.join("stance.tsv")), "--encoder", s(&enc), "--vocab", s(&vocab)],
    );
    let agr_trace = tsv(&models.join("agreement_trace.tsv"));
    let agr_best = agr_trace[1..].iter().map(|r| r[2].parse::<f64>().unwrap()).fold(0.0, f64::max);
    let model_args = ["--encoder", s(&enc), "--vocab", s(&vocab), "--agreement", s(&agr_path)];
    let event = root.join("event_tfg");
    let mut args = vec!["evaluate", "--setting", "event", "--source", "TFG", "--corpus", s(&data)];
    args.extend(model_args);
    ccrv(&event, &args);
    let report = tsv(&event.join("report.tsv"));
    let in_domain = lookup(&report, 1, "Avg", "TFG");
    let random = lookup(&report, 1, "Avg", "Random");
    let p = lookup(&tsv(&event.join("significance.tsv")), 0, "per_post", "p_value");
    let p_event = lookup(&tsv(&event.join("significance.tsv")), 0, "per_event", "p_value");
    let total = pipeline.elapsed();
    record(
        &mut out,
        "end-to-end synthetic benchmark",
        true,
        Some(in_domain >= 0.85 && p < 0.001 && total < Duration::from_secs(600)),
        format!(
            "LOEO avg fake-F1 {in_domain:.3} (>= 0.85) vs random {random:.3}, paired permutation p {p:.4} (< 0.001; \
             per-event p {p_event:.4}), agreement dev macro-F1 {agr_best:.3}, {:.1}s (< 600s)",
            total.as_secs_f64()
        ),
    );

    let features = event.join("features_TFG.tsv");
    let pcc_dir = root.join("pcc");
    ccrv(&pcc_dir, &["analyze-features", "--features", s(&features)]);
    let pcc = tsv(&pcc_dir.join("pcc.tsv"));
    let dist_var = lookup(&pcc, 1, "dist_var", "pcc");
    let unrelated_var = lookup(&pcc, 1, "unrelated_var", "pcc");
    record(
        &mut out,
        "feature-analysis signs",
        true,
        Some(dist_var > 0.0 && unrelated_var > 0.0),
        format!("PCC dist_var {dist_var:+.3}, unrelated_var {unrelated_var:+.3} (both > 0)"),
    );

    let ver_dir = root.join("verifier");
    ccrv(&ver_dir, &["train-verifier", "--features", s(&features)]);
    let transfer = root.join("transfer");
    let mut args = vec![
        "evaluate",
        "--setting",
        "transfer",
        "--source",
        "BFG",
        "--corpus",
        s(&data),
        "--verifier",
    ];
    let ver_ckpt = ver_dir.join("verifier.ckpt");
    args.push(s(&ver_ckpt));
    args.extend(model_args);
    ccrv(&transfer, &args);
    let report = tsv(&transfer.join("report.tsv"));
    let tr_f1 = lookup(&report, 1, "Avg", "Transfer");
    let tr_random = lookup(&report, 1, "Avg", "Random");
    record(
        &mut out,
        "transfer",
        true,
        Some((tr_f1 - in_domain).abs() <= 0.05 && tr_f1 > tr_random),
        format!(
            "transfer F1 {tr_f1:.3} vs in-domain {in_domain:.3} (|diff| {:.3} <= 0.05), random {tr_random:.3}",
            (tr_f1 - in_domain).abs()
        ),
    );

    let mut same = Vec::new();
    same.push(("gen-synthetic", run_twice(&root, "gen", &["gen-synthetic", "--set", "synthetic.events=3"])));
    same.push((
        "train-embedding",
        run_twice(
            &root,
            "emb",
            &["train-embedding", "--parallel", s(&data.join("parallel.tsv")), "--set", "embedding.epochs=1", "--set", "embedding.holdout=50"],
        ),
    ));
    same.push((
        "train-agreement",
        run_twice(
            &root,
            "agr",
            &["train-agreement", "--stance", s(&data.join("stance.tsv")), "--encoder", s(&enc), "--vocab", s(&vocab), "--set", "agreement.epochs=3"],
        ),
    ));
    let mut ex = vec!["extract-features", "--source", "TFB", "--corpus", s(&data)];
    ex.extend(model_args);
    same.push(("extract-features", run_twice(&root, "ext", &ex)));
    same.push(("train-verifier", run_twice(&root, "ver", &["train-verifier", "--features", s(&features)])));
    same.push((
        "evaluate",
        run_twice(
            &root,
            "eval",
            &["evaluate", "--setting", "task", "--source", "TFG", "--corpus", s(&data), "--features", s(&features)],
        ),
    ));
    same.push(("analyze-features", run_twice(&root, "pcc", &["analyze-features", "--features", s(&features)])));
    same.push((
        "validate-corpus",
        run_twice(&root, "val", &["validate-corpus", "--corpus", s(&data), "--stats", s(&data.join("stats.tsv"))]),
    ));
    let differing: Vec<&str> = same.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    record(
        &mut out,
        "determinism",
        true,
        Some(differing.is_empty()),
        if differing.is_empty() {
            format!("{} verbs run twice, manifest digests identical", same.len())
        } else {
            format!("manifests differ for {}", differing.join(", "))
        },
    );

    record(
        &mut out,
        "agreement on real stance data",
        false,
        None,
        "non-gating; needs the external stance dataset".into(),
    );
    match std::env::var_os("CCRV_CCMR_DIR") {
        Some(dir) => {
            let res = Command::new(env!("CARGO_BIN_EXE_ccrv"))
                .arg("--out-dir")
                .arg(root.join("ccmr"))
                .arg("validate-corpus")
                .arg("--corpus")
                .arg(&dir)
                .status()
                .unwrap();
            record(
                &mut out,
                "real corpus counts",
                false,
                Some(res.success()),
                format!("non-gating; validate-corpus against the published counts exited {res}"),
            );
        }
        None => record(&mut out, "real corpus counts", false, None, "non-gating; set CCRV_CCMR_DIR to run".into()),
    }
    record(
        &mut out,
        "real-data event-setting F1",
        false,
        None,
        "non-gating; needs the real corpus, a real parallel corpus and live retrieval results".into(),
    );

    let failed: Vec<String> = out
        .iter()
        .filter(|o| o.gating && o.pass != Some(true))
        .map(|o| format!("{}: {}", o.name, o.detail))
        .collect();
    drop(tmp);
    if !failed.is_empty() {
        eprintln!("gating criteria failed:\n{}", failed.join("\n"));
        std::process::exit(1);
    }
    println!("all gating criteria passed");
}
