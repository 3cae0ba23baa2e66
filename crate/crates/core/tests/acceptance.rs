//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs as a plain binary so the lines appear in `cargo test`
//! output.
//!
//! `cargo test --release --test acceptance`

use std::time::{Duration, Instant};

use atpl::corpus::{bleu_score, parse_bracketed, synth_corpus, SynthGrammar};
use atpl::gradsuite::gradient_suite;
use atpl::parser::{build_tree, derive_gold_layers};
use atpl::pipeline::{run_pipeline, shipped_treebank, PipelineConfig, Report};
use atpl::tpr::{bind_sequence, hadamard_basis, unbind};
use atpl::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;
const JOHN: &str = "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))";

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, check: impl FnOnce() -> atpl::Result<Outcome>) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = check().unwrap_or_else(|e| Outcome {
        pass: false,
        detail: format!("error: {e}"),
    });
    let took = start.elapsed();
    if took > limit {
        out.pass = false;
        out.detail.push_str(&format!("; over the {limit:?} budget"));
    }
    (out, took)
}

fn algebraic_exactness() -> atpl::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for d in [2, 8, 16, 32] {
        let basis = hadamard_basis(d)?;
        for t in 1..=d {
            let fillers: Vec<Tensor> = (0..t).map(|_| Tensor::uniform(&[d], 1.0, &mut rng)).collect();
            let roles: Vec<Tensor> = (0..t).map(|j| basis.column(j)).collect();
            let s = bind_sequence(&fillers, &roles, d)?;
            for (f, r) in fillers.iter().zip(&roles) {
                worst = worst.max(unbind(&s, r)?.max_abs_diff(f));
            }
            cases += 1;
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-10,
        detail: format!("{cases} bindings, max abs error {worst:.2e} (limit 1e-10)"),
    })
}

fn gradient_checks() -> atpl::Result<Outcome> {
    let results = gradient_suite(SEED)?;
    let worst = results.iter().map(|(_, r)| r.max_rel_error()).fold(0.0, f64::max);
    let failed: Vec<&str> = results.iter().filter(|(_, r)| !r.passed()).map(|(b, _)| *b).collect();
    Ok(Outcome {
        pass: failed.is_empty() && results.iter().all(|(_, r)| r.tolerance <= 1e-4),
        detail: format!(
            "{} blocks, worst relative error {worst:.2e} (limit 1e-4){}",
            results.len(),
            if failed.is_empty() { String::new() } else { format!(", failed: {}", failed.join(",")) }
        ),
    })
}

fn round_trip() -> atpl::Result<Outcome> {
    let corpus = synth_corpus(&SynthGrammar::default(), 500, SEED)?;
    let mut exact = 0;
    for t in &corpus.trees {
        let enc = derive_gold_layers(t)?;
        if build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height())? == t.to_bracketed() {
            exact += 1;
        }
    }
    let enc = derive_gold_layers(&parse_bracketed(JOHN)?)?;
    let john = build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height())?;
    let codes_ok = enc.code(2) == [0, 1, 0, 0] && enc.code(3) == [0, 1, 1, 1];
    Ok(Outcome {
        pass: exact == 500 && john == JOHN && codes_ok,
        detail: format!(
            "{exact}/500 exact; worked example {john}, layer-2 code {:?}, layer-3 code {:?}",
            enc.code(2),
            enc.code(3)
        ),
    })
}

fn bleu_sanity() -> atpl::Result<Outcome> {
    let words = |s: &str| -> Vec<String> { s.split(' ').map(str::to_string).collect() };
    let same = bleu_score(&[words("a man rides a red horse")], &[vec![words("a man rides a red horse")]], 4)?;
    let disjoint = bleu_score(&[words("one two three four")], &[vec![words("five six seven eight")]], 4)?;
    Ok(Outcome {
        pass: same.scores.iter().all(|&s| s == 1.0) && disjoint.scores[0] <= 1e-6,
        detail: format!("identical BLEU-1..4 {:?}; disjoint BLEU-1 {:.1e}", same.scores, disjoint.scores[0]),
    })
}

fn metric(r: &Report, name: &str, split: &str) -> f64 {
    r.get(name, split).unwrap_or(f64::NAN)
}

fn main() {
    let mut lines: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let mut record = |n, name, (o, t): (Outcome, Duration)| {
        println!("{} {n}. {name}: {} [{t:.2?}]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((n, name, o, t));
    };

    record(1, "algebraic exactness", timed(Duration::from_secs(1), algebraic_exactness));
    record(2, "gradient suite", timed(Duration::from_secs(30), gradient_checks));
    record(3, "round-trip parsing", timed(Duration::from_secs(10), round_trip));

    let bank = shipped_treebank();
    let cfg = PipelineConfig::seeded(SEED);
    let start = Instant::now();
    let first = run_pipeline(&bank, &cfg).map(|(r, _)| r);
    let took = start.elapsed();
    let fail = |e: &atpl::Error| Outcome {
        pass: false,
        detail: format!("pipeline error: {e}"),
    };
    // The pipeline time covers every stage, so it is held to the tightest
    // per-stage budget.
    let within = |limit: Duration| (took <= limit, format!("; pipeline took {took:.1?}, budget {limit:?}"));

    let c4 = match &first {
        Ok(r) => {
            let acc = metric(r, "reconstruction_accuracy", "train");
            let (ok, t) = within(Duration::from_secs(600));
            Outcome {
                pass: acc >= 0.95 && ok,
                detail: format!("token reconstruction {acc:.4} on {} training sentences (target 0.95){t}", bank.train.len()),
            }
        }
        Err(e) => fail(e),
    };
    record(4, "autoencoder reconstruction", (c4, took));

    let c5 = match &first {
        Ok(r) => {
            let acc = metric(r, "tagger_accuracy", "test");
            let (ok, t) = within(Duration::from_secs(600));
            Outcome {
                pass: acc >= 0.99 && ok,
                detail: format!("held-out tagging accuracy {acc:.4} (target 0.99){t}"),
            }
        }
        Err(e) => fail(e),
    };
    record(5, "POS tagging", (c5, took));

    let c6 = match &first {
        Ok(r) => {
            let gold = metric(r, "parse_f1_gold_codes", "test");
            let pred = metric(r, "parse_f1_predicted_codes", "test");
            let (ok, t) = within(Duration::from_secs(1200));
            Outcome {
                pass: gold >= pred && gold >= 0.90 && ok,
                detail: format!("held-out F1 with gold codes {gold:.4} >= predicted codes {pred:.4}, gold >= 0.90{t}"),
            }
        }
        Err(e) => fail(e),
    };
    record(6, "parser ordering", (c6, took));

    record(7, "BLEU sanity", timed(Duration::from_secs(1), bleu_sanity));

    let start = Instant::now();
    let second = run_pipeline(&bank, &cfg).map(|(r, _)| r);
    let took2 = start.elapsed();
    let c8 = match (&first, &second) {
        (Ok(a), Ok(b)) => {
            let (a, b) = (a.to_csv(), b.to_csv());
            Outcome {
                pass: a == b,
                detail: format!("two seeded runs, {} report bytes, identical: {}", a.len(), a == b),
            }
        }
        (Err(e), _) | (_, Err(e)) => fail(e),
    };
    record(8, "determinism", (c8, took2));

    if let Ok(r) = &first {
        println!("\nreport of the seeded run:\n{}", r.to_csv());
    }
    let failed: Vec<String> = lines.iter().filter(|l| !l.2.pass).map(|l| format!("{}. {}", l.0, l.1)).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", lines.len());
    } else {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
