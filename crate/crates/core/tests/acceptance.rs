//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any fails. Pass criterion numbers as arguments to run
//! a subset.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use natcode::corpus::ExcludedLines;
use natcode::experiment::{regress, run_experiment, DeltaRecord, ExperimentConfig, ModelId, Models, TestFile, TransformRef};
use natcode::frontend::{analyze, parse_str, tokenize, NodeKind};
use natcode::lm::{abstract_stream, concrete_stream, score_file, AbstractionOptions, CacheState, NgramModel, DEFAULT_LAMBDA_CACHE, DEFAULT_LAMBDA_JM, DEFAULT_ORDER};
use natcode::pipeline::{deltas_from_jsonl, deltas_to_jsonl, run_pipeline, train_model, Paths, RunConfig};
use natcode::stats::{median, ols_fit, wilcoxon_signed_rank, OlsOptions};
use natcode::survey::{analyze_responses, emit_survey, line_is_eligible, select_pairs, Preference, RawResponse, Side, SurveyPair, ATTENTION_ID, SURVEY_KINDS};
use natcode::transforms::shuffle::shuffle_method;
use natcode::transforms::{find_sites, node_at_path, node_path, render_edited, transform_file, Covariates, Location, ShuffleMode, TransformKind, TransformRecord};
use rand::Rng;
use rayon::prelude::*;

use common::fixture::{expression_file, planted_file, var_slot, var_types, write_projects, GenFile, UNUSUAL_BLOCK, VARS};
use common::oracle::{self, eval, sexpr, token_texts, Ty, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_files(seed: u64, files: usize, methods: usize) -> Vec<GenFile> {
    let mut rng = common::rng(seed);
    (0..files).map(|i| expression_file(&mut rng, &format!("Fx{i}"), methods)).collect()
}

fn random_value<R: Rng>(ty: Ty, rng: &mut R) -> Value {
    use num::bigint::BigInt;
    use num::rational::BigRational;
    match ty {
        Ty::Int => Value::Int(match rng.random_range(0..10) {
            0 | 1 => [0, 1, -1, 2, -2, i32::MAX, i32::MIN, i32::MAX - 1, i32::MIN + 1][rng.random_range(0..9)],
            2..=6 => rng.random_range(-50..50),
            _ => rng.random(),
        }),
        Ty::Long => Value::Long(match rng.random_range(0..10) {
            0 | 1 => [0, 1, -1, i64::MAX, i64::MIN, i64::from(i32::MAX) + 1, i64::from(i32::MIN)][rng.random_range(0..7)],
            2..=6 => rng.random_range(-50..50),
            _ => rng.random(),
        }),
        Ty::Double => {
            let numer = if rng.random_bool(0.15) { 0 } else { rng.random_range(-1000i64..1000) };
            Value::Real(BigRational::new(BigInt::from(numer), BigInt::from(rng.random_range(1i64..=16))))
        }
        Ty::Bool => Value::Bool(rng.random()),
    }
}

fn swap_records(target: usize) -> Vec<TransformRecord> {
    let mut rng = common::rng(101);
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < target {
        let f = expression_file(&mut rng, &format!("Swap{i}"), 4);
        let parsed = analyze(&f.text).expect("fixture lexes");
        out.extend(transform_file(&parsed, &format!("Swap{i}.java"), &[TransformKind::ArithSwap, TransformKind::RelSwap], &ExcludedLines::default(), i as u64));
        i += 1;
    }
    out
}

fn uses_floating(text: &str) -> bool {
    token_texts(text).iter().any(|t| t.starts_with('#') && t.contains('.') || var_slot(t).is_some_and(|s| VARS[s].1 == Ty::Double))
}

fn meaning_preservation() -> Outcome {
    const ASSIGNMENTS: usize = 1000;
    let start = Instant::now();
    let records = swap_records(10_000);
    let types = var_types();
    let results: Vec<Result<bool, String>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let before = oracle::parse(&r.original_text, &var_slot).map_err(|e| format!("{:?}: {e}", r.original_text))?;
            let after = oracle::parse(&r.transformed_text, &var_slot).map_err(|e| format!("{:?}: {e}", r.transformed_text))?;
            let mut rng = common::rng(10_000 + i as u64);
            for _ in 0..ASSIGNMENTS {
                let env: Vec<Value> = types.iter().map(|&t| random_value(t, &mut rng)).collect();
                let (x, y) = (eval(&before, &env, &types), eval(&after, &env, &types));
                if x != y {
                    return Err(format!("{} -> {}: {x:?} vs {y:?} under {env:?}", r.original_text, r.transformed_text));
                }
            }
            Ok(uses_floating(&r.original_text))
        })
        .collect();
    let violations: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let floating = results.iter().filter(|r| matches!(r, Ok(true))).count();
    let arith = records.iter().filter(|r| r.kind == TransformKind::ArithSwap).count();
    let elapsed = start.elapsed();
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} swaps ({} arith_swap, {} rel_swap, {} with floating operands) x {ASSIGNMENTS} assignments, 0 violations",
        records.len(),
        arith,
        records.len() - arith,
        floating
    ))
}

fn paren_soundness() -> Outcome {
    let mut counts: BTreeMap<TransformKind, usize> = BTreeMap::new();
    for (i, f) in fixture_files(202, 300, 4).iter().enumerate() {
        let parsed = analyze(&f.text).expect("fixture lexes");
        let recs = transform_file(&parsed, &format!("P{i}.java"), &[TransformKind::ParenAdd, TransformKind::ParenRemove], &ExcludedLines::default(), i as u64);
        for r in recs {
            let before = oracle::parse(&r.original_text, &var_slot).map_err(|e| format!("{:?}: {e}", r.original_text))?;
            let after = oracle::parse(&r.transformed_text, &var_slot).map_err(|e| format!("{:?}: {e}", r.transformed_text))?;
            ensure(sexpr(&before, true) == sexpr(&after, true), || format!("{} -> {} changes the tree", r.original_text, r.transformed_text))?;
            ensure(sexpr(&before, false) != sexpr(&after, false), || format!("{} -> {} changes no parentheses", r.original_text, r.transformed_text))?;
            let (ta, a) = parse_str(&r.original_text).ok_or("original does not parse")?;
            let (tb, b) = parse_str(&r.transformed_text).ok_or("transformed does not parse")?;
            ensure(a.canonical(&ta, true) == b.canonical(&tb, true), || format!("{} -> {} differs in the library parser", r.original_text, r.transformed_text))?;
            *counts.entry(r.kind).or_default() += 1;
        }
    }
    let add = counts.get(&TransformKind::ParenAdd).copied().unwrap_or(0);
    let remove = counts.get(&TransformKind::ParenRemove).copied().unwrap_or(0);
    ensure(add > 0 && remove > 0, || format!("paren_add {add}, paren_remove {remove}"))?;
    Ok(format!("{add} paren_add and {remove} paren_remove transforms, 0 violations"))
}

fn round_trips() -> Outcome {
    let files = fixture_files(303, 260, 4);
    let mut rng = common::rng(304);
    let (mut swaps, mut parens, mut shuffles) = (0usize, 0usize, BTreeMap::<&str, usize>::new());
    for f in &files {
        let parsed = analyze(&f.text).expect("fixture lexes");
        let tokens = &parsed.tokens;
        for kind in [TransformKind::ArithSwap, TransformKind::RelSwap] {
            for (si, locs) in find_sites(&parsed, kind, &ExcludedLines::default()) {
                let tree = &parsed.sites[si].tree;
                let original = tree.text(tree.root, tokens);
                let loc = &locs[rng.random_range(0..locs.len())];
                let Location::Swap { node, pos } = loc else { return Err(format!("{kind} produced {loc:?}")) };
                let once = render_edited(tree, tokens, &[loc]).map_err(|e| format!("{e:?}"))?;
                let (t1, tr1) = parse_str(&once).ok_or_else(|| format!("{once:?} does not parse"))?;
                let again = node_at_path(&tr1, &node_path(tree, *node)).ok_or("swapped node moved")?;
                let twice = render_edited(&tr1, &t1, &[&Location::Swap { node: again, pos: *pos }]).map_err(|e| format!("{e:?}"))?;
                ensure(twice == original, || format!("{original:?} -> {once:?} -> {twice:?}"))?;
                swaps += 1;
            }
        }
        for (si, locs) in find_sites(&parsed, TransformKind::ParenAdd, &ExcludedLines::default()) {
            let tree = &parsed.sites[si].tree;
            let original = tree.text(tree.root, tokens);
            let loc = &locs[rng.random_range(0..locs.len())];
            let Location::Wrap { nodes } = loc else { return Err(format!("paren_add produced {loc:?}")) };
            let once = render_edited(tree, tokens, &[loc]).map_err(|e| format!("{e:?}"))?;
            let (t1, tr1) = parse_str(&once).ok_or_else(|| format!("{once:?} does not parse"))?;
            let mut unwraps = Vec::new();
            for &n in nodes {
                let p = node_at_path(&tr1, &node_path(tree, n)).ok_or("wrapped node moved")?;
                ensure(tr1.node(p).kind == NodeKind::Paren, || format!("{once:?}: no parenthesis where one was added"))?;
                unwraps.push(Location::Unwrap { node: p });
            }
            let refs: Vec<&Location> = unwraps.iter().collect();
            let twice = render_edited(&tr1, &t1, &refs).map_err(|e| format!("{e:?}"))?;
            ensure(twice == original, || format!("{original:?} -> {once:?} -> {twice:?}"))?;
            parens += 1;
        }
        for (mi, range) in f.methods.iter().enumerate() {
            for (mode, label) in [(ShuffleMode::Within, "within"), (ShuffleMode::Between, "between")] {
                let Some(sh) = shuffle_method(&parsed, mi, mode, &mut rng) else { continue };
                check_renaming(&f.text, &sh.new_text, range.start, range.end, mode)?;
                *shuffles.entry(label).or_default() += 1;
            }
        }
    }
    let within = shuffles.get("within").copied().unwrap_or(0);
    let between = shuffles.get("between").copied().unwrap_or(0);
    ensure(swaps >= 1000 && parens >= 1000 && within >= 1000 && between >= 1000, || {
        format!("too few sites: swaps {swaps}, paren pairs {parens}, shuffles {within}/{between}")
    })?;
    Ok(format!("double swap on {swaps} sites, add then remove on {parens} sites, shuffles on {within} (within) and {between} (between) methods"))
}

/// The rename must be a fixed-point-free permutation of variable names,
/// applied at every occurrence inside the method and nowhere else.
fn check_renaming(before: &str, after: &str, start: usize, end: usize, mode: ShuffleMode) -> Result<(), String> {
    ensure(before.len() == after.len() && before[..start] == after[..start] && before[end..] == after[end..], || "text outside the method changed".into())?;
    let (old, new) = (token_texts(&before[start..end]), token_texts(&after[start..end]));
    ensure(old.len() == new.len(), || "token count changed".into())?;
    let mut sigma: BTreeMap<&str, &str> = BTreeMap::new();
    for (o, n) in old.iter().zip(&new) {
        if o != n {
            ensure(var_slot(o).is_some() && var_slot(n).is_some(), || format!("{o} renamed to {n}"))?;
            if *sigma.entry(o).or_insert(n) != n.as_str() {
                return Err(format!("{o} renamed inconsistently"));
            }
        }
    }
    ensure(!sigma.is_empty(), || "nothing renamed".into())?;
    for (o, n) in old.iter().zip(&new) {
        if var_slot(o).is_some() {
            let expected = sigma.get(o.as_str()).copied().unwrap_or(o);
            ensure(n == expected, || format!("an occurrence of {o} kept its name"))?;
        }
    }
    let domain: BTreeSet<&str> = sigma.keys().copied().collect();
    let image: BTreeSet<&str> = sigma.values().copied().collect();
    ensure(domain == image && image.len() == sigma.len(), || format!("not a permutation: {sigma:?}"))?;
    if mode == ShuffleMode::Within {
        for (o, n) in &sigma {
            ensure(VARS[var_slot(o).unwrap_or(0)].1 == VARS[var_slot(n).unwrap_or(0)].1, || format!("{o} -> {n} crosses types"))?;
        }
    }
    Ok(())
}

fn markov_corpus(seed: u64, files: usize, vocab: usize) -> Vec<Vec<String>> {
    let mut rng = common::rng(seed);
    let next: Vec<[usize; 3]> = (0..vocab).map(|_| [rng.random_range(0..vocab), rng.random_range(0..vocab), rng.random_range(0..vocab)]).collect();
    (0..files)
        .map(|_| {
            let len = rng.random_range(20..120);
            let mut w = rng.random_range(0..vocab);
            (0..len)
                .map(|_| {
                    w = if rng.random_bool(0.8) { next[w][rng.random_range(0..3)] } else { rng.random_range(0..vocab) };
                    format!("w{w}")
                })
                .collect()
        })
        .collect()
}

fn random_history<R: Rng>(rng: &mut R, model: &NgramModel, streams: &[Vec<u32>]) -> Vec<u32> {
    let v = model.vocab().len() as u32;
    if rng.random_bool(0.5) {
        let s = &streams[rng.random_range(0..streams.len())];
        let end = rng.random_range(0..=s.len());
        let start = end.saturating_sub(rng.random_range(0..12));
        return s[start..end].to_vec();
    }
    let len = rng.random_range(0..12);
    (0..len).map(|_| if rng.random_bool(0.1) { v + rng.random_range(0..4) } else { rng.random_range(0..v) }).collect()
}

/// Largest deviation from 1 of the total mass over the vocabulary plus the
/// unseen slot, for the plain model and each cache weight.
fn mass_errors(model: &NgramModel, streams: &[Vec<u32>], contexts: usize, seed: u64) -> [f64; 4] {
    let mut rng = common::rng(seed);
    let v = model.vocab().len() as u32;
    let mut worst = [0f64; 4];
    for _ in 0..contexts {
        let h = random_history(&mut rng, model, streams);
        let total: f64 = (0..v).map(|t| model.prob(&h, t)).sum::<f64>() + model.unseen_prob(&h);
        worst[0] = worst[0].max((total - 1.0).abs());
        for (slot, lambda) in [0.0, 0.5, 0.9].into_iter().enumerate() {
            let mut cache = CacheState::new(model.order(), lambda);
            for &t in &h {
                cache.push(t);
            }
            let total: f64 = (0..v).map(|t| cache.prob(model, t)).sum::<f64>() + cache.unseen_mass(model);
            worst[slot + 1] = worst[slot + 1].max((total - 1.0).abs());
        }
    }
    worst
}

fn lm_normalization() -> Outcome {
    const CONTEXTS: usize = 1000;
    let mut worst = 0f64;
    let corpus = markov_corpus(404, 300, 40);
    for (order, lambda) in [(3, 0.2), (DEFAULT_ORDER, DEFAULT_LAMBDA_JM), (5, 0.9)] {
        let model = NgramModel::train(&corpus, order, lambda, false).map_err(|e| e.to_string())?;
        let streams: Vec<Vec<u32>> = corpus.iter().map(|f| model.encode(f).ids).collect();
        let e = mass_errors(&model, &streams, CONTEXTS, 405 + order as u64);
        worst = e.iter().copied().fold(worst, f64::max);
        ensure(e.iter().all(|x| *x <= 1e-9), || format!("order {order}, lambda {lambda}: errors {e:?}"))?;
    }
    let opts = AbstractionOptions::default();
    let java: Vec<Vec<String>> = fixture_files(406, 60, 3).iter().map(|f| abstract_stream(&tokenize(&f.text).expect("lexes"), opts)).collect();
    let model = NgramModel::train(&java[..40], 4, DEFAULT_LAMBDA_JM, true).map_err(|e| e.to_string())?;
    let streams: Vec<Vec<u32>> = java[40..].iter().map(|f| model.encode(f).ids).collect();
    let e = mass_errors(&model, &streams, CONTEXTS, 407);
    worst = e.iter().copied().fold(worst, f64::max);
    ensure(e.iter().all(|x| *x <= 1e-9), || format!("abstracted model: errors {e:?}"))?;
    Ok(format!("{CONTEXTS} contexts per model; global, cache (0, 0.5, 0.9) and abstracted mass within {worst:.1e} of 1"))
}

fn planted_convention() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(505);
    let train: Vec<TestFile> = (0..100).map(|i| TestFile { path: format!("train/T{i}.java"), text: planted_file(&mut rng, &format!("T{i}"), 500) }).collect();
    let lines: usize = train.iter().map(|f| f.text.lines().count()).sum();
    ensure(lines >= 50_000, || format!("only {lines} training lines"))?;
    let test: Vec<TestFile> = (0..30).map(|i| TestFile { path: format!("test/H{i}.java"), text: planted_file(&mut rng, &format!("H{i}"), 200) }).collect();
    let model = train_model(&train, DEFAULT_ORDER, DEFAULT_LAMBDA_JM, false, AbstractionOptions::default()).map_err(|e| e.to_string())?;
    let config = ExperimentConfig { kinds: vec![TransformKind::RelSwap], models: vec![ModelId::Global], seed: 505, ..ExperimentConfig::default() };
    let out = run_experiment(&test, &Models { global: Some(model), abstracted: None }, &config).map_err(|e| e.to_string())?;
    let deltas: Vec<f64> = out.records.iter().map(|r| r.delta).collect();
    let med = median(&deltas).ok_or("no relational swaps")?;
    let w = wilcoxon_signed_rank(&deltas, 0.05, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(med <= -1.0, || format!("median delta {med:.4}"))?;
    ensure(w.p_two_sided < 0.001, || format!("p = {:e}", w.p_two_sided))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{lines} training lines, {} test swaps, median delta {med:.4} bits, p = {:.2e}", deltas.len(), w.p_two_sided))
}

fn cache_discrimination() -> Outcome {
    let train: Vec<Vec<String>> = fixture_files(606, 100, 3).iter().map(|f| concrete_stream(&tokenize(&f.text).expect("lexes"))).collect();
    let model = NgramModel::train(&train, DEFAULT_ORDER, DEFAULT_LAMBDA_JM, false).map_err(|e| e.to_string())?;
    let header = "public class Repeats {\n    void churn(Widget zorp, int quux, int blarg) {\n";
    let footer = "    }\n}\n";
    let text = format!("{header}{}{footer}", UNUSUAL_BLOCK.repeat(50));
    let count = |s: &str| concrete_stream(&tokenize(s).expect("lexes")).len();
    let (h, b) = (count(header), count(UNUSUAL_BLOCK));
    let words = concrete_stream(&tokenize(&text).expect("lexes"));
    ensure(words.len() == h + 50 * b + count(footer), || "block boundaries do not line up".into())?;
    let ids = model.encode(&words).ids;
    let global = score_file(&model, &ids, None, ids.len());
    let cached = score_file(&model, &ids, Some(DEFAULT_LAMBDA_CACHE), ids.len());
    let reps = h + b..h + 50 * b;
    let mean = |v: &[f64]| v[reps.clone()].iter().sum::<f64>() / reps.len() as f64;
    let (g, c) = (mean(&global), mean(&cached));
    ensure(g - c >= 0.5, || format!("global {g:.3} bits, cache {c:.3} bits"))?;
    Ok(format!("repetitions 2-50: global {g:.3} bits/token, cache {c:.3} bits/token, gap {:.3}", g - c))
}

/// Exact two-sided p-value by listing every sign pattern.
fn enumerated_p(d: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let doubled: Vec<u64> = nz
        .iter()
        .map(|x| {
            let less = nz.iter().filter(|y| y.abs() < x.abs()).count() as u64;
            let equal = nz.iter().filter(|y| y.abs() == x.abs()).count() as u64;
            2 * less + equal + 1
        })
        .collect();
    let observed: u64 = nz.iter().zip(&doubled).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
        le += u64::from(w <= observed);
        ge += u64::from(w >= observed);
    }
    (observed as f64 / 2.0, ((2 * le.min(ge)) as f64 / (1u64 << n) as f64).min(1.0))
}

fn wilcoxon_oracle() -> Outcome {
    let mut rng = common::rng(707);
    let mut max_dp = 0f64;
    for trial in 0..600 {
        let n = rng.random_range(1..=10);
        let d: Vec<f64> = (0..n)
            .map(|_| if trial % 3 == 0 { common::normal(&mut rng) } else { f64::from(rng.random_range(-4i32..=4)) * 0.5 })
            .collect();
        let r = wilcoxon_signed_rank(&d, 0.05, 1).map_err(|e| e.to_string())?;
        let (w, p) = enumerated_p(&d);
        max_dp = max_dp.max((r.p_two_sided - p).abs());
        ensure(r.p_two_sided == p && r.statistic == w, || format!("{d:?}: library (W={}, p={}) vs enumeration (W={w}, p={p})", r.statistic, r.p_two_sided))?;
    }
    let mut worst = 0f64;
    for _ in 0..500 {
        let n = rng.random_range(3..80);
        let scale = 10f64.powi(rng.random_range(-2..3));
        let x: Vec<f64> = (0..n).map(|_| scale * common::normal(&mut rng) + 0.3 * scale).collect();
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = wilcoxon_signed_rank(&x, 0.05, 4).map_err(|e| e.to_string())?;
        let b = wilcoxon_signed_rank(&shifted, 0.05, 4).map_err(|e| e.to_string())?;
        let tol = 1e-9 * (1.0 + c.abs() + x.iter().fold(0f64, |m, v| m.max(v.abs())));
        for (u, v) in [(a.estimate, b.estimate), (a.ci_low, b.ci_low), (a.ci_high, b.ci_high)] {
            let err = (v - (u + c)).abs();
            worst = worst.max(err / tol);
            ensure(err <= tol, || format!("n={n}, shift {c}: {u} + c != {v}"))?;
        }
    }
    Ok(format!("600 exact p-values, max |dp| = {max_dp}; 500 shifted samples, worst error {worst:.1e} of tolerance"))
}

fn record(i: usize, kind: TransformKind, model: ModelId, orig: f64, delta: f64, line: Option<(&str, &str)>, cov: Covariates) -> DeltaRecord {
    DeltaRecord {
        transform: TransformRef { kind, file: format!("src/F{}.java", i % 97), site_index: i, variant: 0, line_span: (1, 1), span: (i * 10, i * 10 + 5), method: None },
        model_id: model,
        mean_surprisal_original: orig,
        mean_surprisal_transformed: orig - delta,
        delta,
        line_delta: delta,
        shared_count: 2,
        original_line: line.map(|l| l.0.to_string()),
        transformed_line: line.map(|l| l.1.to_string()),
        covariates: cov,
    }
}

fn ols_recovery() -> Outcome {
    const SLOPE: f64 = -0.279;
    let mut rng = common::rng(808);
    let parents = [("if", 0.0), ("while", 0.3), ("return", -0.2), ("assign", 0.1)];
    let ops = [("<", 0.0), (">", 0.15), ("<=", -0.1), ("==", 0.05)];
    let recs: Vec<DeltaRecord> = (0..5000)
        .map(|i| {
            let orig = rng.random_range(1.0..12.0);
            let tokens = rng.random_range(3..40usize);
            let (parent, pe) = parents[rng.random_range(0..4)];
            let (op, oe) = ops[rng.random_range(0..4)];
            let delta = 0.5 + SLOPE * orig + 0.15 * (tokens as f64).ln() + pe + oe + 0.4 * common::normal(&mut rng);
            record(i, TransformKind::RelSwap, ModelId::Global, orig, delta, None, Covariates { num_tokens: tokens, parent_node_kind: parent.into(), dominant_operator: op.into() })
        })
        .collect();
    let fit = regress(&recs, TransformKind::RelSwap, ModelId::Global, 100).map_err(|e| e.to_string())?;
    let slope = fit.coefficient("original_surprisal").ok_or("no slope")?;
    let z = (slope.estimate - SLOPE) / slope.std_error;
    ensure(z.abs() <= 3.0, || format!("slope {:.4} (se {:.4})", slope.estimate, slope.std_error))?;

    let mut max_vif = 0f64;
    let names: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
    let factorial: Vec<Vec<f64>> = (0..320).map(|i| (0..4).map(|j| if (i % 16) >> j & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect();
    let random: Vec<Vec<f64>> = (0..5000).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    for rows in [&factorial, &random] {
        let y: Vec<f64> = rows.iter().map(|r| r[0] - 0.5 * r[2] + common::normal(&mut rng)).collect();
        let fit = ols_fit(&names, rows, &y, OlsOptions { cook_filter: false, ..OlsOptions::default() }).map_err(|e| e.to_string())?;
        max_vif = fit.vif.values().copied().fold(max_vif, f64::max);
        ensure(fit.vif.values().all(|v| *v < 5.0) && fit.vif_warnings.is_empty(), || format!("VIFs {:?}", fit.vif))?;
    }

    let names: Vec<String> = vec!["x1".into(), "x2".into()];
    let rows: Vec<Vec<f64>> = (0..5000).map(|_| vec![common::normal(&mut rng), common::normal(&mut rng)]).collect();
    let mut y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - r[1] + common::normal(&mut rng)).collect();
    let planted: BTreeSet<usize> = rand::seq::index::sample(&mut rng, rows.len(), 50).into_iter().collect();
    for &i in &planted {
        y[i] += if rng.random_bool(0.5) { 50.0 } else { -50.0 };
    }
    let fit = ols_fit(&names, &rows, &y, OlsOptions::default()).map_err(|e| e.to_string())?;
    let hits = fit.removed_rows.iter().filter(|i| planted.contains(i)).count();
    let precision = hits as f64 / fit.removed_rows.len().max(1) as f64;
    ensure(precision >= 0.9 && !fit.removed_rows.is_empty(), || format!("removed {} rows, {hits} planted", fit.removed_rows.len()))?;
    Ok(format!(
        "slope {:.4} (se {:.4}, {z:+.2} se); max VIF {max_vif:.3}; Cook's filter removed {} rows, precision {:.0}%, recall {:.0}%",
        slope.estimate,
        slope.std_error,
        fit.removed_rows.len(),
        100.0 * precision,
        100.0 * hits as f64 / 50.0
    ))
}

const JAVA_KEYWORDS: [&str; 5] = ["if", "return", "int", "while", "for"];

fn masked(line: &str) -> Vec<String> {
    token_texts(line)
        .into_iter()
        .map(|t| if t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') && !JAVA_KEYWORDS.contains(&t.as_str()) { "<id>".into() } else { t })
        .collect()
}

/// Filters, sorts and picks both tails by brute force.
fn expected_pairs(records: &[DeltaRecord], per_cell: usize) -> Vec<(TransformKind, String, String, f64)> {
    let mut out = Vec::new();
    for kind in SURVEY_KINDS {
        let mut c: Vec<&DeltaRecord> = records
            .iter()
            .filter(|r| r.transform.kind == kind && r.model_id == ModelId::Global && r.line_delta != 0.0)
            .filter(|r| {
                let (o, t) = (r.original_line.as_deref().unwrap_or(""), r.transformed_line.as_deref().unwrap_or(""));
                o != t && line_is_eligible(o) && line_is_eligible(t)
            })
            .collect();
        c.sort_by(|a, b| a.line_delta.total_cmp(&b.line_delta));
        let mut seen: HashSet<Vec<String>> = HashSet::new();
        let mut used: HashSet<usize> = HashSet::new();
        for (label, order) in [("inc", (0..c.len()).collect::<Vec<_>>()), ("dec", (0..c.len()).rev().collect())] {
            let mut chosen = 0;
            for i in order.into_iter().take(2 * per_cell) {
                if chosen == per_cell || used.contains(&i) {
                    continue;
                }
                let r = c[i];
                let mut key = masked(r.original_line.as_deref().unwrap_or(""));
                key.push("|".into());
                key.extend(masked(r.transformed_line.as_deref().unwrap_or("")));
                if seen.insert(key) {
                    used.insert(i);
                    chosen += 1;
                    out.push((kind, format!("{kind}-{label}-{chosen:02}"), r.original_line.clone().unwrap_or_default(), r.line_delta));
                }
            }
        }
    }
    out
}

fn survey_fixture() -> Vec<DeltaRecord> {
    let mut rng = common::rng(909);
    let cov = || Covariates { num_tokens: 3, parent_node_kind: "if".into(), dominant_operator: "<".into() };
    let mut recs = Vec::new();
    let mut literal = 1000;
    let push = |recs: &mut Vec<DeltaRecord>, kind, model, delta: f64, o: String, t: String| {
        let i = recs.len();
        recs.push(record(i, kind, model, 5.0, delta, Some((&o, &t)), cov()));
    };
    for kind in SURVEY_KINDS {
        let mut deltas: Vec<f64> = (1..=70).map(|k| k as f64 * 0.07).flat_map(|d| [d, -d - 0.013]).collect();
        for d in &mut deltas {
            *d += rng.random_range(0.0..0.001);
        }
        for (j, d) in deltas.into_iter().enumerate() {
            literal += 1;
            push(&mut recs, kind, ModelId::Global, d, format!("if (v{j} < {literal}) {{"), format!("if ({literal} > v{j}) {{"));
            if j % 9 == 0 {
                push(&mut recs, kind, ModelId::Global, d + 0.0001, format!("if (alias{j} < {literal}) {{"), format!("if ({literal} > alias{j}) {{"));
            }
        }
        push(&mut recs, kind, ModelId::Global, -99.0, format!("int k = {} + 1;", "n".repeat(90)), "int k = 1 + n;".into());
        push(&mut recs, kind, ModelId::Global, -98.0, "int k = a << 2;".into(), "int k = 2 << a;".into());
        push(&mut recs, kind, ModelId::Global, 97.0, "return hashOf(a) + b;".into(), "return b + hashOf(a);".into());
        push(&mut recs, kind, ModelId::Global, 0.0, "if (z < 3) {".into(), "if (3 > z) {".into());
        push(&mut recs, kind, ModelId::Cache, -50.0, "if (m < 4) {".into(), "if (4 > m) {".into());
    }
    push(&mut recs, TransformKind::ShuffleWithin, ModelId::Global, -60.0, "int s = r;".into(), "int r = s;".into());
    recs
}

fn survey_mechanics() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("deltas.jsonl");
    std::fs::write(&path, deltas_to_jsonl(&survey_fixture())).map_err(|e| e.to_string())?;
    let records = deltas_from_jsonl(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| format!("{e:?}"))?;
    let set = select_pairs(&records, 20, ModelId::Global);
    ensure(set.pairs.len() == 160, || format!("{} pairs", set.pairs.len()))?;
    for kind in SURVEY_KINDS {
        let n = set.pairs.iter().filter(|p| p.kind == kind).count();
        ensure(n == 40, || format!("{kind}: {n} pairs"))?;
    }
    let got: Vec<(TransformKind, String, String, f64)> = set.pairs.iter().map(|p| (p.kind, p.id.clone(), p.text_a.clone(), p.line_delta)).collect();
    let want = expected_pairs(&records, 20);
    ensure(got == want, || {
        let first = got.iter().zip(&want).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
        format!("selection differs from the sort oracle at pair {first}: {:?} vs {:?}", got.get(first), want.get(first))
    })?;
    for p in &set.pairs {
        ensure(p.original_is == Side::A && (p.lm_prefers == Preference::Original) == (p.line_delta < 0.0), || format!("{}: sides", p.id))?;
    }

    for form in 0..5 {
        let f = emit_survey(&set.pairs, 80, 31, form).map_err(|e| e.to_string())?;
        ensure(f.questions.len() == 81, || format!("form {form}: {} questions", f.questions.len()))?;
        ensure(f.questions.iter().filter(|q| q.pair_id == ATTENTION_ID).count() == 1, || "attention item count".into())?;
        let ids: HashSet<&str> = f.questions.iter().map(|q| q.pair_id.as_str()).collect();
        ensure(ids.len() == 81, || "repeated pair in a form".into())?;
        for (q, k) in f.questions.iter().zip(&f.key) {
            if let Some(p) = set.pairs.iter().find(|p| p.id == q.pair_id) {
                let shown = if k.swapped { (&p.text_b, &p.text_a) } else { (&p.text_a, &p.text_b) };
                ensure((&q.option_a, &q.option_b) == shown, || format!("form {form} question {}: key mismatch", q.number))?;
            }
        }
    }

    let pair = |id: &str, kind, lm| SurveyPair {
        id: id.into(),
        kind,
        text_a: format!("{id} original"),
        text_b: format!("{id} transformed"),
        original_is: Side::A,
        lm_prefers: lm,
        line_delta: if lm == Preference::Original { -1.0 } else { 1.0 },
        file: "F.java".into(),
        span: (0, 1),
    };
    let pairs = vec![
        pair("P1", TransformKind::RelSwap, Preference::Original),
        pair("P2", TransformKind::ArithSwap, Preference::Transformed),
        pair("P3", TransformKind::ParenAdd, Preference::Original),
        pair("P4", TransformKind::ParenRemove, Preference::Transformed),
    ];
    let answers = [
        ("r1", ATTENTION_ID, Side::A),
        ("r1", "P1", Side::A),
        ("r1", "P2", Side::A),
        ("r1", "P3", Side::A),
        ("r1", "P4", Side::B),
        ("r2", ATTENTION_ID, Side::B),
        ("r2", "P1", Side::B),
        ("r2", "P2", Side::B),
        ("r2", "P3", Side::A),
        ("r2", "P4", Side::A),
        ("r3", "P1", Side::A),
        ("r3", "P2", Side::B),
        ("r3", "P3", Side::A),
        ("r3", "P4", Side::A),
        ("r3", "P9", Side::A),
    ];
    let responses: Vec<RawResponse> = answers.iter().map(|(r, p, c)| RawResponse { respondent: r.to_string(), pair_id: p.to_string(), choice: *c }).collect();
    let report = analyze_responses(&responses, &pairs);
    let rate = |r: &natcode::survey::Rate| (r.agree, r.total);
    let per_kind: Vec<(usize, usize)> = [TransformKind::RelSwap, TransformKind::ArithSwap, TransformKind::ParenAdd, TransformKind::ParenRemove]
        .iter()
        .map(|k| report.per_kind.get(k).map_or((0, 0), rate))
        .collect();
    let long_outcomes: Vec<(u8, u8)> = report.long.iter().filter(|r| r.respondent == "r1").map(|r| (r.outcome, r.lm_out)).collect();
    let checks = [
        (rate(&report.overall) == (8, 12), "overall agreement"),
        (per_kind == [(2, 3), (2, 3), (3, 3), (1, 3)], "per-kind agreement"),
        (rate(&report.majority) == (3, 4), "majority agreement"),
        (rate(&report.passed_attention) == (3, 4), "attention passed"),
        (rate(&report.failed_attention) == (5, 8), "attention failed"),
        ((report.respondents, report.respondents_passed) == (3, 1), "respondent counts"),
        (report.rejected.len() == 1, "rejected responses"),
        (long_outcomes == [(1, 1), (1, 0), (1, 1), (0, 0)], "long-format rows"),
    ];
    for (ok, what) in checks {
        ensure(ok, || format!("{what} differs from the hand-computed value: {report:?}"))?;
    }
    Ok("160 pairs (40 per kind) equal the sort oracle; 5 forms of 81 questions; 3-respondent agreement matches by hand".into())
}

fn pipeline_outputs(out: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for name in ["deltas.jsonl", "report.txt", "table.tsv", "pairs.json", "summary.json"] {
        files.insert(name.to_string(), std::fs::read(out.join(name)).unwrap_or_default());
    }
    if let Ok(entries) = std::fs::read_dir(out.join("forms")) {
        for e in entries.flatten() {
            files.insert(format!("forms/{}", e.file_name().to_string_lossy()), std::fs::read(e.path()).unwrap_or_default());
        }
    }
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    write_projects(&mut common::rng(1010), &corpus, 5, 6, 3);
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let config = RunConfig {
            seed: 1011,
            order: 4,
            min_category: 3,
            per_cell: 5,
            per_respondent: 12,
            n_forms: 2,
            paths: Paths { corpus: Some(corpus.clone()), out_dir: dir.path().join(name), ..Paths::default() },
            ..RunConfig::default()
        };
        run_pipeline(&config).map_err(|e| e.to_string())?;
        runs.push(pipeline_outputs(&config.paths.out_dir));
    }
    ensure(runs[0].keys().any(|k| k.starts_with("forms/")), || "no survey forms written".into())?;
    ensure(!runs[0]["deltas.jsonl"].is_empty(), || "empty delta file".into())?;
    for (name, bytes) in &runs[0] {
        ensure(runs[1].get(name) == Some(bytes), || format!("{name} differs between runs"))?;
    }
    ensure(runs[0].len() == runs[1].len(), || "different file sets".into())?;
    Ok(format!("{} output files byte-identical across two runs", runs[0].len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("meaning preservation of swaps", meaning_preservation),
        ("parenthesis soundness", paren_soundness),
        ("involution and round trips", round_trips),
        ("language model normalization", lm_normalization),
        ("planted convention recovery", planted_convention),
        ("cache discrimination", cache_discrimination),
        ("Wilcoxon oracle equivalence", wilcoxon_oracle),
        ("OLS recovery", ols_recovery),
        ("survey mechanics", survey_mechanics),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
