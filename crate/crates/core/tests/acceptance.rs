//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

mod common;

use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use matner::corpus::{decode_iob, encode_iob, read_iob, split_dataset, tokenize, write_iob, EntitySpan, Label, Tag};
use matner::metrics::{match_spans, MatchMode, MatchReport, NONE};
use matner::normalize::{normalize_mention, QuantityKind};
use matner::tagger::crf::{log_partition, viterbi_decode, Transitions};
use matner::tagger::matrix::Matrix;
use matner::tagger::{random_search, train, write_model, Example, SearchSpace, TaggerConfig, TaggerModel, Vocabulary};
use matner::trends::{
    condition_by_year, count_materials_by_year, tabulate_countries, write_conditions, write_countries,
    write_year_rankings, MaterialFilter,
};
use matner::wordvec::{pair_loss_and_grad, train_embeddings, WordVecConfig};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn decimal(v: f64) -> Decimal {
    Decimal::from_str(&v.to_string()).unwrap().normalize()
}

fn values_equal(got: &[f64], printed: &[&str]) -> bool {
    got.len() == printed.len()
        && got
            .iter()
            .zip(printed)
            .all(|(g, p)| decimal(*g) == Decimal::from_str(p).unwrap().normalize())
}

fn normalized(phrase: &str, kind: QuantityKind) -> Vec<f64> {
    normalize_mention(phrase, kind)
        .into_iter()
        .flat_map(|q| q.values)
        .collect()
}

// Rows of the normalization table with the values printed there.
fn table_rows() -> Vec<(&'static str, Vec<&'static str>, QuantityKind, Vec<&'static str>)> {
    use QuantityKind::*;
    vec![
        (
            "room temperature or RT",
            vec!["room temperature", "RT"],
            Temperature,
            vec!["22"],
        ),
        ("500 K", vec!["500 K"], Temperature, vec!["227"]),
        ("overnight", vec!["overnight"], Time, vec!["8"]),
        ("half an hour", vec!["half an hour"], Time, vec!["0.5"]),
        ("half a day", vec!["half a day"], Time, vec!["12"]),
        ("two hours or 2 h", vec!["two hours", "2 h"], Time, vec!["2"]),
        (
            "1.66 × 10 -4 S/cm",
            vec!["1.66 × 10 -4 S/cm"],
            Conductivity,
            vec!["0.000166"],
        ),
        ("4.2 mS/cm", vec!["4.2 mS/cm"], Conductivity, vec!["0.0042"]),
        ("0.93-1.04", vec!["0.93-1.04"], ActivationEnergy, vec!["0.93", "1.04"]),
        ("2.00(5) eV", vec!["2.00(5) eV"], ActivationEnergy, vec!["1.95", "2.05"]),
        (
            "0.44 < Ea(eV) < 0.46",
            vec!["0.44 < Ea(eV) < 0.46"],
            ActivationEnergy,
            vec!["0.44", "0.46"],
        ),
    ]
}

fn c1_table() -> Outcome {
    let t = Instant::now();
    let mut exact = 0;
    for (row, phrases, kind, printed) in table_rows() {
        for p in phrases {
            check(
                values_equal(&normalized(p, kind), &printed),
                format!("row {row:?}: {p:?} gave {:?}", normalized(p, kind)),
            )?;
        }
        exact += 1;
    }
    // The printed 3.87/4.69 drop the power of ten; applying it gives these.
    let pm = normalized("4.28 ± 0.41 × 10 -2", QuantityKind::Conductivity);
    check(values_equal(&pm, &["0.0387", "0.0469"]), format!("± row gave {pm:?}"))?;
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{exact} printed patterns other than ± exact, ± row 0.0387/0.0469 S/cm (documented deviation), {elapsed:?}"
    ))
}

fn c2_scientific() -> Outcome {
    let q = normalize_mention("1.03 × 10 -3 S/cm", QuantityKind::Conductivity);
    check(q.len() == 1 && q[0].unit == "S/cm", format!("{q:?}"))?;
    check(values_equal(&q[0].values, &["0.00103"]), format!("{:?}", q[0].values))?;
    Ok("0.00103 S/cm".into())
}

struct Instance {
    emissions: Matrix,
    transitions: Transitions,
}

fn random_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..200usize)
        .map(|k| {
            let n = rng.gen_range(1..=6);
            let t = rng.gen_range(1..=5);
            // Every other instance uses small integers so that ties occur.
            let draw = |rng: &mut ChaCha8Rng| {
                if k.is_multiple_of(2) {
                    rng.gen_range(-3.0..3.0)
                } else {
                    rng.gen_range(0..2) as f64
                }
            };
            let e: Vec<f64> = (0..n * t).map(|_| draw(&mut rng)).collect();
            let a: Vec<f64> = (0..(t + 2) * (t + 2)).map(|_| draw(&mut rng)).collect();
            Instance {
                emissions: Matrix::from_vec(n, t, e),
                transitions: Transitions::from_matrix(Matrix::from_vec(t + 2, t + 2, a)),
            }
        })
        .collect()
}

/// All tag sequences in lexicographic order with their brute-force scores.
fn enumerate(inst: &Instance) -> Vec<(Vec<usize>, f64)> {
    let n = inst.emissions.rows();
    let t = inst.emissions.cols();
    let a = inst.transitions.matrix();
    let (start, stop) = (t, t + 1);
    let mut out = Vec::new();
    let mut y = vec![0usize; n];
    loop {
        let mut s = a.get(start, y[0]) + a.get(y[n - 1], stop);
        for i in 0..n {
            s += inst.emissions.get(i, y[i]);
            if i > 0 {
                s += a.get(y[i - 1], y[i]);
            }
        }
        out.push((y.clone(), s));
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            y[i] += 1;
            if y[i] < t {
                break;
            }
            y[i] = 0;
        }
    }
}

fn c3_partition() -> Outcome {
    let t = Instant::now();
    let instances = random_instances();
    let mut worst: f64 = 0.0;
    for (k, inst) in instances.iter().enumerate() {
        let all = enumerate(inst);
        let m = all.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let brute = m + all.iter().map(|s| (s.1 - m).exp()).sum::<f64>().ln();
        let d = (log_partition(&inst.emissions, &inst.transitions) - brute).abs();
        worst = worst.max(d);
        check(d <= 1e-8, format!("instance {k}: |Δ| = {d:e}"))?;
    }
    let elapsed = t.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} instances, max |Δ| {worst:.1e}, {elapsed:?}",
        instances.len()
    ))
}

fn c4_viterbi() -> Outcome {
    let instances = random_instances();
    let mut ties = 0;
    for (k, inst) in instances.iter().enumerate() {
        let all = enumerate(inst);
        let best = all.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<&Vec<usize>> = all.iter().filter(|s| s.1 == best).map(|s| &s.0).collect();
        if winners.len() > 1 {
            ties += 1;
        }
        let (path, score) = viterbi_decode(&inst.emissions, &inst.transitions);
        check(
            (score - best).abs() <= 1e-9,
            format!("instance {k}: score {score} vs {best}"),
        )?;
        check(
            &path == winners[0],
            format!("instance {k}: path {path:?} vs {:?}", winners[0]),
        )?;
    }
    Ok(format!(
        "{} instances ({ties} with tied optima) match enumeration",
        instances.len()
    ))
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

fn tagger_fd_instance(seed: u64) -> Result<(usize, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = TaggerConfig {
        hidden_size: rng.gen_range(2..=3),
        rnn_layers: rng.gen_range(1..=2),
        embedding_dim: rng.gen_range(2..=4),
        dropout: if seed.is_multiple_of(2) { 0.25 } else { 0.0 },
        locked_dropout: if seed.is_multiple_of(2) { 0.25 } else { 0.0 },
        word_dropout: if seed.is_multiple_of(2) { 0.2 } else { 0.0 },
        weight_decay: 0.001,
        ..TaggerConfig::default()
    };
    let words = ["heated", "at", "80", "°", "C", "TiO2"];
    let mut model = TaggerModel::new(config, Vocabulary::build(words), &mut rng).map_err(|e| e.to_string())?;
    for v in model.dense.transitions.matrix_mut().as_mut_slice() {
        *v = rng.gen_range(-0.5..0.5);
    }
    let sentences: Vec<(Vec<matner::corpus::Token>, Vec<Tag>)> = (0..2)
        .map(|_| {
            let n = rng.gen_range(1..=4);
            let text: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let tokens: Vec<_> = tokenize(&(text.join(" ") + " unseen"));
            let tags = tokens
                .iter()
                .map(|_| Tag::from_index(rng.gen_range(0..Tag::COUNT)).unwrap())
                .collect();
            (tokens, tags)
        })
        .collect();
    let batch: Vec<Example> = sentences.iter().map(|(t, g)| Example { tokens: t, tags: g }).collect();
    let mask_seed = rng.gen::<u64>();
    let loss = |m: &TaggerModel| {
        m.nll_loss_and_grad(&batch, true, &mut ChaCha8Rng::seed_from_u64(mask_seed))
            .unwrap()
            .0
    };
    let (_, grads) = model
        .nll_loss_and_grad(&batch, true, &mut ChaCha8Rng::seed_from_u64(mask_seed))
        .unwrap();
    let analytic = grads.to_blocks(&model);
    let names: Vec<String> = model.blocks().iter().map(|b| b.0.clone()).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (b, name) in names.iter().enumerate() {
        for (j, &a) in analytic[b].iter().enumerate() {
            let orig = model.blocks()[b].1[j];
            model.blocks_mut()[b][j] = orig + h;
            let up = loss(&model);
            model.blocks_mut()[b][j] = orig - h;
            let down = loss(&model);
            model.blocks_mut()[b][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(a, numeric);
            worst = worst.max(err);
            checked += 1;
            check(err <= 1e-4, format!("seed {seed} {name}[{j}]: {a} vs {numeric}"))?;
        }
    }
    Ok((checked, worst))
}

fn sgns_fd_instance(seed: u64) -> Result<(usize, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=6);
    let k = rng.gen_range(1..=4);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut negs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let loss = |v: &[f64], u: &[f64], negs: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        pair_loss_and_grad(v, u, &refs).0
    };
    let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    let (_, g) = pair_loss_and_grad(&v, &u, &refs);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut compare = |a: f64, up: f64, down: f64, what: String| {
        let err = relative_error(a, (up - down) / (2.0 * h));
        worst = worst.max(err);
        checked += 1;
        check(
            err <= 1e-4,
            format!("seed {seed} {what}: {a} vs {}", (up - down) / (2.0 * h)),
        )
    };
    for i in 0..d {
        let o = v[i];
        v[i] = o + h;
        let up = loss(&v, &u, &negs);
        v[i] = o - h;
        let down = loss(&v, &u, &negs);
        v[i] = o;
        compare(g.center[i], up, down, format!("center[{i}]"))?;
        let o = u[i];
        u[i] = o + h;
        let up = loss(&v, &u, &negs);
        u[i] = o - h;
        let down = loss(&v, &u, &negs);
        u[i] = o;
        compare(g.context[i], up, down, format!("context[{i}]"))?;
        for n in 0..k {
            let o = negs[n][i];
            negs[n][i] = o + h;
            let up = loss(&v, &u, &negs);
            negs[n][i] = o - h;
            let down = loss(&v, &u, &negs);
            negs[n][i] = o;
            compare(g.negatives[n][i], up, down, format!("negative{n}[{i}]"))?;
        }
    }
    Ok((checked, worst))
}

fn c5_gradients() -> Outcome {
    let (mut tc, mut tw, mut sc, mut sw) = (0, 0.0f64, 0, 0.0f64);
    for seed in 0..6 {
        let (c, w) = tagger_fd_instance(seed)?;
        tc += c;
        tw = tw.max(w);
        let (c, w) = sgns_fd_instance(seed)?;
        sc += c;
        sw = sw.max(w);
    }
    Ok(format!(
        "BiLSTM-CRF 6 instances, {tc} coordinates, max rel err {tw:.1e}; SGNS 6 instances, {sc} coordinates, max rel err {sw:.1e}"
    ))
}

fn overfit_corpus() -> Vec<matner::corpus::AnnotatedParagraph> {
    read_iob(BufReader::new(File::open(common::fixture("overfit.iob")).unwrap())).unwrap()
}

fn overfit_config() -> TaggerConfig {
    TaggerConfig {
        hidden_size: 32,
        rnn_layers: 1,
        embedding_dim: 32,
        dropout: 0.1,
        locked_dropout: 0.1,
        word_dropout: 0.05,
        batch_size: 1,
        max_epochs: 200,
        seed: 11,
        ..TaggerConfig::default()
    }
}

fn c6_overfit() -> Outcome {
    let data = overfit_corpus();
    check(data.len() == 20, format!("{} sentences", data.len()))?;
    let t = Instant::now();
    let (_, report) = train(overfit_config(), &data, &data).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let reached = report.dev_f1.iter().position(|&f| f >= 0.95);
    check(reached.is_some(), format!("best micro-F1 {:.4}", report.best_f1()))?;
    check(report.dev_f1.len() <= 200, "more than 200 epochs")?;
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!(
        "micro-F1 ≥ 0.95 at epoch {}, best {:.4}, {} epochs in {elapsed:.1?}",
        reached.unwrap() + 1,
        report.best_f1(),
        report.dev_f1.len()
    ))
}

fn random_spans(rng: &mut ChaCha8Rng, length: usize) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < length {
        pos += rng.gen_range(0..4);
        let len = rng.gen_range(1..4);
        if pos + len > length {
            break;
        }
        if rng.gen_bool(0.7) {
            spans.push(EntitySpan {
                label: Label::ALL[rng.gen_range(0..3)],
                start: pos,
                end: pos + len,
                surface: String::new(),
            });
        }
        pos += len;
    }
    spans
}

/// Independent reference: exact boundary comparison of every pair.
fn naive_counts(gold: &[EntitySpan], pred: &[EntitySpan]) -> ([[u64; 3]; 12], [[u64; 13]; 13]) {
    let mut counts = [[0u64; 3]; 12];
    let mut matrix = [[0u64; 13]; 13];
    let mut pred_used = vec![false; pred.len()];
    for g in gold {
        let mut matched = false;
        for (j, p) in pred.iter().enumerate() {
            if p.start == g.start && p.end == g.end {
                matched = true;
                pred_used[j] = true;
                matrix[g.label.index()][p.label.index()] += 1;
                if p.label == g.label {
                    counts[g.label.index()][0] += 1;
                } else {
                    counts[g.label.index()][2] += 1;
                    counts[p.label.index()][1] += 1;
                }
            }
        }
        if !matched {
            counts[g.label.index()][2] += 1;
            matrix[g.label.index()][12] += 1;
        }
    }
    for (j, p) in pred.iter().enumerate() {
        if !pred_used[j] {
            counts[p.label.index()][1] += 1;
            matrix[12][p.label.index()] += 1;
        }
    }
    (counts, matrix)
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn c7_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pairs = 300;
    for k in 0..pairs {
        let gold = random_spans(&mut rng, 20);
        let pred = random_spans(&mut rng, 20);
        let report = match_spans(&gold, &pred, MatchMode::Exact).map_err(|e| e.to_string())?;
        let (counts, matrix) = naive_counts(&gold, &pred);
        for (label, want) in Label::ALL.iter().zip(&counts) {
            let c = report.label(*label);
            check(
                [c.tp, c.fp, c.fn_] == *want,
                format!("pair {k} {label:?}: counts differ"),
            )?;
        }
        check(report.confusion == matrix, format!("pair {k}: confusion differs"))?;
        let (tp, fp, fn_) = counts
            .iter()
            .fold((0, 0, 0), |a, c| (a.0 + c[0], a.1 + c[1], a.2 + c[2]));
        let (p, r) = (ratio(tp, tp + fp), ratio(tp, tp + fn_));
        check(
            (report.micro_f1() - harmonic(p, r)).abs() < 1e-12,
            format!("pair {k}: micro-F1"),
        )?;
        let active: Vec<&[u64; 3]> = counts.iter().filter(|c| c.iter().sum::<u64>() > 0).collect();
        let mean = |f: &dyn Fn(&[u64; 3]) -> f64| {
            if active.is_empty() {
                0.0
            } else {
                active.iter().map(|c| f(c)).sum::<f64>() / active.len() as f64
            }
        };
        let macro_p = mean(&|c| ratio(c[0], c[0] + c[1]));
        let macro_r = mean(&|c| ratio(c[0], c[0] + c[2]));
        let macro_f = mean(&|c| harmonic(ratio(c[0], c[0] + c[1]), ratio(c[0], c[0] + c[2])));
        check(
            (report.macro_precision() - macro_p).abs() < 1e-12,
            format!("pair {k}: macro-P"),
        )?;
        check(
            (report.macro_recall() - macro_r).abs() < 1e-12,
            format!("pair {k}: macro-R"),
        )?;
        check(
            (report.macro_f1() - macro_f).abs() < 1e-12,
            format!("pair {k}: macro-F1"),
        )?;
        check(matrix[NONE][NONE] == 0, "NONE/NONE cell")?;
    }
    let span = |label, start, end| EntitySpan {
        label,
        start,
        end,
        surface: String::new(),
    };
    let gold = [span(Label::Ope, 0, 5)];
    let pred = [span(Label::Ope, 0, 5), span(Label::PropTemp, 9, 14)];
    let r: MatchReport = match_spans(&gold, &pred, MatchMode::Exact).map_err(|e| e.to_string())?;
    check(
        r.micro_precision() == 0.5 && r.micro_recall() == 1.0,
        "worked example P/R",
    )?;
    check((r.micro_f1() - 2.0 / 3.0).abs() < 1e-15, "worked example F1")?;
    Ok(format!(
        "{pairs} random pairs equal the quadratic reference; worked example P 0.5, R 1.0, F1 2/3"
    ))
}

fn c8_iob_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let words = [
        "TiO2", "was", "annealed", "at", "450", "°", "C", "for", "2", "h", "in", "ethanol", ".",
    ];
    let inventory = Tag::inventory();
    check(inventory.len() == 25, "inventory size")?;
    let sets = 1500;
    for k in 0..sets {
        let n = rng.gen_range(1..25);
        let text = (0..n)
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ");
        let tokens = tokenize(&text);
        let chars: Vec<char> = text.chars().collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            i += rng.gen_range(0..3);
            let len = rng.gen_range(1..4);
            if i + len > tokens.len() {
                break;
            }
            if rng.gen_bool(0.6) {
                let (start, end) = (tokens[i].start, tokens[i + len - 1].end);
                spans.push(EntitySpan {
                    label: Label::ALL[rng.gen_range(0..Label::COUNT)],
                    start,
                    end,
                    surface: chars[start..end].iter().collect(),
                });
            }
            i += len;
        }
        let tags = encode_iob(&tokens, &spans).map_err(|e| format!("set {k}: {e}"))?;
        check(
            tags.iter().all(|t| inventory.contains(t)),
            format!("set {k}: tag outside inventory"),
        )?;
        let back = decode_iob(&text, &tokens, &tags).map_err(|e| format!("set {k}: {e}"))?;
        check(back == spans, format!("set {k}: {spans:?} -> {back:?}"))?;
    }
    Ok(format!(
        "{sets} random span sets round-trip, all tags within the 25-tag inventory"
    ))
}

fn c9_units() -> Outcome {
    let cases = [
        ("500 K", QuantityKind::Temperature, "227"),
        ("room temperature", QuantityKind::Temperature, "22"),
        ("overnight", QuantityKind::Time, "8"),
        ("4.2 mS/cm", QuantityKind::Conductivity, "0.0042"),
    ];
    for (phrase, kind, want) in cases {
        let q = normalize_mention(phrase, kind);
        check(
            q.len() == 1 && q[0].unit == kind.canonical_unit(),
            format!("{phrase}: {q:?}"),
        )?;
        check(
            values_equal(&q[0].values, &[want]),
            format!("{phrase}: {:?}", q[0].values),
        )?;
    }
    Ok("500 K → 227 °C, room temperature → 22 °C, overnight → 8 h, 4.2 mS/cm → 0.0042 S/cm".into())
}

fn c10_golden() -> Outcome {
    let records = common::fixture_records();
    let mut out = Vec::new();
    write_year_rankings(&mut out, &count_materials_by_year(&records, &["Abstract"], 2)).unwrap();
    check(
        out == common::golden("year_ranking.csv").into_bytes(),
        "year_ranking.csv differs",
    )?;
    let mut out = Vec::new();
    write_countries(&mut out, &tabulate_countries(&records)).unwrap();
    check(
        out == common::golden("countries.csv").into_bytes(),
        "countries.csv differs",
    )?;
    let mut out = Vec::new();
    write_conditions(&mut out, &condition_by_year(&records, &MaterialFilter::Any)).unwrap();
    check(
        out == common::golden("conditions.csv").into_bytes(),
        "conditions.csv differs",
    )?;
    Ok(format!(
        "3 golden CSVs byte-identical over {} paragraph records from 10 documents",
        records.len()
    ))
}

fn c12_determinism() -> Outcome {
    let data = overfit_corpus();
    let split_bytes = || {
        let s = split_dataset(&data, (0.6, 0.2, 0.2), 3).unwrap();
        let mut buf = Vec::new();
        for part in [&s.train, &s.dev, &s.test] {
            write_iob(&mut buf, part).unwrap();
        }
        buf
    };
    check(split_bytes() == split_bytes(), "split output differs")?;
    let config = TaggerConfig {
        max_epochs: 3,
        ..overfit_config()
    };
    let model_bytes = || {
        let (model, report) = train(config.clone(), &data[..14], &data[14..]).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &model).unwrap();
        (buf, report.dev_f1)
    };
    check(model_bytes() == model_bytes(), "trained model differs")?;
    let base = TaggerConfig {
        max_epochs: 2,
        embedding_dim: 8,
        ..TaggerConfig::default()
    };
    let space = SearchSpace {
        hidden_size: (4, 16),
        rnn_layers: (1, 2),
        ..SearchSpace::default()
    };
    let search_bytes =
        || serde_json::to_vec(&random_search(&space, &base, 2, 5, &data[..14], &data[14..]).unwrap()).unwrap();
    check(search_bytes() == search_bytes(), "search output differs")?;
    let sentences: Vec<Vec<String>> = data
        .iter()
        .map(|p| p.tokens.iter().map(|t| t.text.clone()).collect())
        .collect();
    let wv = WordVecConfig {
        dim: 10,
        min_count: 1,
        seed: 9,
        ..WordVecConfig::default()
    };
    let vector_bytes = || {
        let mut buf = Vec::new();
        train_embeddings(&sentences, &wv)
            .unwrap()
            .write_vectors(&mut buf)
            .unwrap();
        buf
    };
    check(vector_bytes() == vector_bytes(), "word vectors differ")?;
    Ok("split, train, search and wordvec-train outputs byte-identical across repeated seeded runs".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "normalization table fidelity", c1_table),
        (2, "scientific notation 0.00103", c2_scientific),
        (3, "CRF partition oracle", c3_partition),
        (4, "Viterbi oracle", c4_viterbi),
        (5, "finite-difference gradients", c5_gradients),
        (6, "overfit check", c6_overfit),
        (7, "metrics oracle", c7_metrics),
        (8, "IOB round trip", c8_iob_round_trip),
        (9, "unit conversions", c9_units),
        (10, "trend golden files", c10_golden),
        (12, "determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        match run() {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
        if n == 10 {
            println!(
                "criterion 11 INFO  not reproducible at desk scale: the 78.1% test micro-F1, the pretrained \
                 language-model comparison, the 0.736 IAA and the corpus-scale entity counts need the full \
                 annotated corpus, double annotation and pretrained contextual weights, none of which are \
                 available here; no informational F1 was produced"
            );
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
