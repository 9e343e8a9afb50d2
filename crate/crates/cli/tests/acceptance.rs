//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or overruns its time limit.

use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use camf_core::agents::{parse_leaning, parse_verdict, TemplateSet};
use camf_core::datasets::{make_toy_corpus, parse_corpus, Corpus, DatasetError};
use camf_core::eval::{
    ablation_configs, accuracy, confusion, macro_f1, run_ablations, run_round_sweep, strip_volatile,
    ConfusionMatrix, EvalReport, ABLATION_VARIANTS,
};
use camf_core::gateway::{
    CassetteEntry, CountingBackend, LiveBackend, LiveSettings, RecordingBackend, ScriptRule, ScriptedBackend,
};
use camf_core::model::{AgentId, AuthorshipLabel, PipelineConfig, TextSample, VerdictSource};
use camf_core::pipeline::Pipeline;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);
type ErrorCase = (String, fn(&DatasetError) -> bool, usize);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn strict(cfg: PipelineConfig) -> PipelineConfig {
    PipelineConfig {
        parse_retry_limit: 0,
        ..cfg
    }
}

fn templates() -> TemplateSet {
    TemplateSet::builtin(Default::default())
}

fn call_count_law() -> Outcome {
    let rt = runtime();
    let sample = TextSample::new("s", "A short paragraph of text.", None, None).unwrap();
    let run = |cfg: PipelineConfig| {
        let backend = CountingBackend::new();
        let result = rt
            .block_on(Pipeline::with_defaults(strict(cfg)).unwrap().detect(&sample, &backend))
            .unwrap();
        (backend, result.llm_calls)
    };
    let (backend, calls) = run(PipelineConfig::default());
    let expected = [
        (AgentId::Ls, 1),
        (AgentId::Sc, 1),
        (AgentId::Rl, 1),
        (AgentId::Gm, 2),
        (AgentId::De, 2),
        (AgentId::Sj, 1),
    ];
    for (agent, n) in expected {
        ensure!(backend.count(agent) == n, "{agent}: {} calls, expected {n}", backend.count(agent));
    }
    ensure!(backend.total() == 8 && calls == 8, "default: {} calls", backend.total());
    let (backend, _) = run(PipelineConfig {
        enable_probing: false,
        ..Default::default()
    });
    ensure!(backend.total() == 4, "w/o probing: {} calls", backend.total());
    for r in 1..=5u32 {
        let (backend, _) = run(PipelineConfig {
            rounds: r,
            ..Default::default()
        });
        ensure!(backend.total() == u64::from(4 + 2 * r), "rounds={r}: {} calls", backend.total());
    }
    Ok("default 8 {LS:1,SC:1,RL:1,GM:2,DE:2,SJ:1}; w/o probing 4; rounds r -> 4+2r".into())
}

fn forbidden_terms(variant: &str) -> &'static [&'static str] {
    match variant {
        "w/o LS" => &["stylistic", "[agent:ls]"],
        "w/o SC" => &["semantic", "coheren", "[agent:sc]"],
        "w/o RL" => &["logic", "[agent:rl]"],
        "w/o Adversarial Probing" => &[
            "adversarial",
            "probing",
            "generator-mimic",
            "detector-enhancer",
            "[agent:gm]",
            "[agent:de]",
        ],
        "w/o Synthesis Judge" => &["synthesis judge", "[agent:sj]"],
        _ => &[],
    }
}

fn ablation_structure() -> Outcome {
    let rt = runtime();
    let corpus = make_toy_corpus();
    let rows = rt.block_on(run_ablations(&corpus, &strict(PipelineConfig::default()), &templates(), &CountingBackend::new()));
    let names: Vec<&str> = rows.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(names == ABLATION_VARIANTS, "variants: {names:?}");
    ensure!(rows.iter().all(|(_, r)| r.is_ok()), "a variant failed to run");

    let dir = tempfile::tempdir().unwrap();
    let mut scanned = 0;
    for (name, cfg) in ablation_configs(&strict(PipelineConfig::default())) {
        let cassette = dir.path().join(format!("{}.jsonl", name.replace(['/', ' '], "_")));
        let recorder = RecordingBackend::new(Arc::new(ScriptedBackend::toy()), &cassette).unwrap();
        let pipeline = Pipeline::with_defaults(cfg).unwrap();
        rt.block_on(camf_core::eval::evaluate(&corpus, &pipeline, &recorder, name));
        drop(recorder);
        let prompts: Vec<String> = std::fs::read_to_string(&cassette)
            .unwrap()
            .lines()
            .map(|l| {
                let entry: CassetteEntry = serde_json::from_str(l).unwrap();
                entry.request.full_text().to_lowercase()
            })
            .collect();
        ensure!(!prompts.is_empty(), "{name}: nothing recorded");
        for term in forbidden_terms(name) {
            let hits = prompts.iter().filter(|p| p.contains(term)).count();
            ensure!(hits == 0, "{name}: `{term}` found in {hits} recorded prompts");
        }
        scanned += prompts.len();
    }
    Ok(format!("6 canonical variants; {scanned} recorded prompts scanned, 0 references to ablated parts"))
}

fn round_sweep() -> Outcome {
    let rt = runtime();
    let rows = rt
        .block_on(run_round_sweep(
            &make_toy_corpus(),
            &strict(PipelineConfig::default()),
            &templates(),
            &[1, 2, 3, 4, 5],
            &CountingBackend::new(),
        ))
        .map_err(|e| e.to_string())?;
    ensure!(rows.len() == 5, "{} rows", rows.len());
    let mut calls = Vec::new();
    for (r, report) in &rows {
        let report = report.as_ref().map_err(|e| e.to_string())?;
        ensure!(report.config.rounds == *r, "row {r} carries rounds={}", report.config.rounds);
        ensure!(report.n_scored == 20 && report.failures.is_empty(), "row {r} not fully scored");
        ensure!(report.accuracy.is_some() && report.macro_f1.is_some(), "row {r} lacks metrics");
        let round_trip: EvalReport = serde_json::from_str(&report.to_json()).map_err(|e| e.to_string())?;
        ensure!(round_trip.stable_json() == report.stable_json(), "row {r} JSON does not round-trip");
        calls.push(report.avg_llm_calls.unwrap());
    }
    ensure!(calls == [6.0, 8.0, 10.0, 12.0, 14.0], "avg_llm_calls {calls:?}");
    Ok("avg_llm_calls 6,8,10,12,14 over five well-formed reports".into())
}

/// Per-class tally straight from label pairs.
fn oracle(preds: &[AuthorshipLabel], golds: &[AuthorshipLabel]) -> (f64, f64) {
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count() as f64;
    let mut f1_sum = 0.0;
    for class in AuthorshipLabel::ALL {
        let hit = preds.iter().zip(golds).filter(|(p, g)| **p == class && **g == class).count() as f64;
        let predicted = preds.iter().filter(|p| **p == class).count() as f64;
        let actual = golds.iter().filter(|g| **g == class).count() as f64;
        let p = if predicted > 0.0 { hit / predicted } else { 0.0 };
        let r = if actual > 0.0 { hit / actual } else { 0.0 };
        f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    (correct / preds.len() as f64, f1_sum / 2.0)
}

fn metric_oracle() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let label = |m: bool| if m { AuthorshipLabel::Machine } else { AuthorshipLabel::Human };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let preds: Vec<_> = (0..n).map(|_| label(rng.random())).collect();
        let golds: Vec<_> = (0..n).map(|_| label(rng.random())).collect();
        let cm = confusion(&preds, &golds).map_err(|e| e.to_string())?;
        let (acc, f1) = oracle(&preds, &golds);
        let da = (accuracy(&cm).unwrap() - acc).abs();
        let df = (macro_f1(&cm).unwrap() - f1).abs();
        worst = worst.max(da).max(df);
        ensure!(da <= TOL && df <= TOL, "mismatch on {cm:?}: acc diff {da}, f1 diff {df}");
    }
    let cm = ConfusionMatrix::new(3, 1, 1, 5);
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for (n, p, g) in [(3, true, true), (1, true, false), (1, false, true), (5, false, false)] {
        for _ in 0..n {
            preds.push(label(p));
            golds.push(label(g));
        }
    }
    ensure!(confusion(&preds, &golds).unwrap() == cm, "worked case matrix");
    let (oacc, of1) = oracle(&preds, &golds);
    let (acc, f1) = (accuracy(&cm).unwrap(), macro_f1(&cm).unwrap());
    ensure!((acc - 0.8).abs() <= TOL && (acc - oacc).abs() <= TOL, "worked accuracy {acc}");
    ensure!((f1 - of1).abs() <= TOL && (f1 - 0.7917).abs() < 5e-5, "worked macro F1 {f1}");
    Ok(format!("1000 random vectors, max deviation {worst:e}; worked case acc {acc}, macro F1 {f1:.4}"))
}

fn camf(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_camf"))
        .args(args)
        .env_remove("CAMF_API_KEY")
        .env_remove("CAMF_BASE_URL")
        .output()
        .unwrap()
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (corpus, cassette, first, second) = (p("toy.jsonl"), p("toy.cassette.jsonl"), p("a.json"), p("b.json"));
    ensure!(camf(&["make-toy", "--out", &corpus]).status.success(), "make-toy failed");
    let out = camf(&["eval", "--corpus", &corpus, "--backend", "mock:scripted", "--record", &cassette, "--out", &first]);
    ensure!(out.status.success(), "eval failed: {}", String::from_utf8_lossy(&out.stderr));
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    ensure!(report.macro_f1 == Some(1.0) && report.accuracy == Some(1.0), "F1 {:?} acc {:?}", report.macro_f1, report.accuracy);
    let out = camf(&["eval", "--corpus", &corpus, "--replay", &cassette, "--out", &second]);
    ensure!(out.status.success(), "replay eval failed: {}", String::from_utf8_lossy(&out.stderr));
    let a = strip_volatile(&std::fs::read_to_string(&first).unwrap());
    let b = strip_volatile(&std::fs::read_to_string(&second).unwrap());
    ensure!(a == b, "replayed report differs outside the volatile section");
    Ok(format!("macro F1 1.0, accuracy 1.0; replayed report identical ({} bytes compared)", a.len()))
}

fn parser_totality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xfa22);
    let mut verdicts = 0;
    for i in 0..10_000 {
        let len = rng.random_range(0..256);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        // Every fourth input carries near-miss trailer fragments.
        if i % 4 == 0 {
            let frags: [&[u8]; 6] = [b"\nVERDICT: ", b"MACHINE", b"HUMAN", b"\nCONFIDENCE: ", b"1.5", b"\nLEANING: "];
            for _ in 0..3 {
                bytes.extend_from_slice(frags[rng.random_range(0..frags.len())]);
            }
        }
        let text = String::from_utf8_lossy(&bytes);
        let outcome = catch_unwind(|| (parse_verdict(&text), parse_leaning(&text)))
            .map_err(|_| format!("parser panicked on input #{i}"))?;
        if let Some((_, Some(c))) = outcome.0 {
            ensure!((0.0..=1.0).contains(&c), "confidence {c} out of range");
        }
        verdicts += usize::from(outcome.0.is_some());
    }
    let rt = runtime();
    let backend = ScriptedBackend::toy().with_overrides([ScriptRule::fallback("No idea.").for_agent(AgentId::Sj)]);
    let sample = TextSample::new("s", "Some text. [[MGT]]", None, None).unwrap();
    let result = rt
        .block_on(Pipeline::with_defaults(PipelineConfig::default()).unwrap().detect(&sample, &backend))
        .map_err(|e| e.to_string())?;
    let v = &result.verdict;
    ensure!(v.label == AuthorshipLabel::Human && v.parse_failed, "fallback verdict {v:?}");
    ensure!(v.source == VerdictSource::SynthesisJudge, "fallback source {:?}", v.source);
    Ok(format!("10000 inputs, no panic ({verdicts} yielded a verdict); fallback (HUMAN, parse_failed=true)"))
}

fn replay_safety() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (corpus, cassette) = (p("toy.jsonl"), p("c.jsonl"));
    ensure!(camf(&["make-toy", "--out", &corpus]).status.success(), "make-toy failed");
    let rec = camf(&["eval", "--corpus", &corpus, "--backend", "mock:scripted", "--record", &cassette]);
    ensure!(rec.status.success(), "recording failed");

    let stub = TcpListener::bind("127.0.0.1:0").unwrap();
    stub.set_nonblocking(true).unwrap();
    let addr = stub.local_addr().unwrap();
    let accepted = Arc::new(AtomicUsize::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let watcher = {
        let (accepted, stop) = (accepted.clone(), stop.clone());
        std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match stub.accept() {
                    Ok(_) => {
                        accepted.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(_) => std::thread::sleep(Duration::from_millis(2)),
                }
            }
        })
    };
    let with_stub = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_camf"))
            .args(args)
            .env("CAMF_API_KEY", "stub-key")
            .env("CAMF_BASE_URL", format!("http://{addr}"))
            .output()
            .unwrap()
    };
    let out = with_stub(&["eval", "--corpus", &corpus, "--replay", &cassette]);
    let during_replay = accepted.load(Ordering::SeqCst);
    // Control: the live backend with the same environment does reach the stub.
    with_stub(&["detect", "--backend", "live", "--timeout", "1", "--file", &corpus]);
    std::thread::sleep(Duration::from_millis(50));
    let control = accepted.load(Ordering::SeqCst) - during_replay;
    stop.store(true, Ordering::SeqCst);
    watcher.join().unwrap();
    ensure!(out.status.success(), "replay eval failed: {}", String::from_utf8_lossy(&out.stderr));
    ensure!(during_replay == 0, "{during_replay} connections during replay");
    ensure!(control > 0, "control run never reached the stub; the check is not observing anything");
    Ok(format!("0 connections during a 20-sample replay eval (control live run: {control})"))
}

fn generated_corpus(rng: &mut StdRng, idx: usize) -> Corpus {
    let alphabet: Vec<char> = "abcXYZ 019 \t\"\\/{}é漢🙂\n\r.,'".chars().collect();
    let n = rng.random_range(1..=25);
    let samples = (0..n)
        .map(|i| {
            let len = rng.random_range(1..60);
            let mut text: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
            // Only LF-normalized texts are canonical; a single pass can leave a new CRLF.
            while text.contains("\r\n") {
                text = text.replace("\r\n", "\n");
            }
            text.push('x');
            let label = if rng.random() { AuthorshipLabel::Machine } else { AuthorshipLabel::Human };
            let domain = rng.random::<bool>().then(|| format!("d{}", rng.random_range(0..4)));
            TextSample::new(format!("c{idx}-{i}"), text, Some(label), domain).unwrap()
        })
        .collect();
    Corpus::new(format!("gen{idx}"), samples).unwrap()
}

fn corpus_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xc0de);
    for idx in 0..100 {
        let corpus = generated_corpus(&mut rng, idx);
        let back = parse_corpus(corpus.name(), &corpus.to_jsonl()).map_err(|e| e.to_string())?;
        ensure!(back == corpus, "corpus {idx} changed on round trip");
    }
    let good = r#"{"id":"a","text":"t","label":0}"#;
    let cases: [ErrorCase; 4] = [
        (format!("{good}\n{good}\n"), |e| matches!(e, DatasetError::DuplicateId { .. }), 2),
        (format!("{good}\n\n\n{{\"id\":\"b\",\"text\":\"t\",\"label\":2}}\n"), |e| matches!(e, DatasetError::InvalidLabel { .. }), 4),
        (format!("{good}\n{{\"id\":\"b\",\"text\":\n"), |e| matches!(e, DatasetError::ParseError { .. }), 2),
        (format!("{good}\n{good}x\n"), |e| matches!(e, DatasetError::ParseError { .. }), 2),
    ];
    for (src, kind, line) in cases {
        let err = parse_corpus("bad", &src).err().ok_or("malformed corpus accepted")?;
        ensure!(kind(&err) && err.line() == Some(line), "wrong error for malformed input: {err}");
    }
    ensure!(matches!(parse_corpus("e", "\n"), Err(DatasetError::EmptyCorpus)), "empty corpus accepted");
    Ok("100 generated corpora round-trip; malformed lines report the right error and line".into())
}

fn live_smoke() -> Option<Outcome> {
    std::env::var("CAMF_API_KEY").ok().filter(|k| !k.is_empty())?;
    let rt = runtime();
    let backend = match LiveBackend::new(LiveSettings::from_env()) {
        Ok(b) => b,
        Err(e) => return Some(Err(e.to_string())),
    };
    let corpus = make_toy_corpus();
    let picks = ["h05", "h09", "m03", "m09"];
    let pipeline = Pipeline::with_defaults(PipelineConfig::default()).unwrap();
    let mut labels = Vec::new();
    for id in picks {
        let sample = corpus.samples().iter().find(|s| s.id() == id).unwrap();
        // The sentinel is a mock convenience; live models see the plain text.
        let plain = TextSample::new(id, sample.text().replace("[[MGT]] ", ""), None, None).unwrap();
        match rt.block_on(pipeline.detect(&plain, &backend)) {
            Ok(r) if !r.verdict.parse_failed => labels.push(format!("{id}={}", r.verdict.label)),
            Ok(_) => return Some(Err(format!("{id}: judge reply had no verdict line"))),
            Err(e) => return Some(Err(format!("{id}: {e}"))),
        }
    }
    Some(Ok(format!("4 live detections parsed: {}", labels.join(" "))))
}

fn main() {
    // Respect `cargo test <filter>` so unrelated filters skip the gate.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|f| !"acceptance".contains(f.as_str())) {
        return;
    }

    let criteria: [Criterion; 8] = [
        ("call-count law", Duration::from_secs(1), call_count_law),
        ("ablation structure", Duration::from_secs(5), ablation_structure),
        ("round sweep", Duration::from_secs(10), round_sweep),
        ("metric oracle", Duration::from_secs(5), metric_oracle),
        ("end-to-end determinism", Duration::from_secs(10), end_to_end_determinism),
        ("parser totality", Duration::from_secs(10), parser_totality),
        ("replay safety", Duration::from_secs(30), replay_safety),
        ("corpus round-trip", Duration::from_secs(5), corpus_round_trip),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} ({elapsed:.2?}) {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} ({elapsed:.2?}) {why}");
            }
        }
    }
    let started = Instant::now();
    match live_smoke() {
        None => println!("SKIP  {:<24} CAMF_API_KEY not set", "live smoke"),
        Some(Ok(detail)) => println!("PASS  {:<24} ({:.2?}) {detail}", "live smoke", started.elapsed()),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL  {:<24} ({:.2?}) {why}", "live smoke", started.elapsed());
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
