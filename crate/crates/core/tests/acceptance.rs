//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! Set `STREAMFLOW_BASIN_DATA` and `STREAMFLOW_BASIN_SCHEMA` to run
//! criterion 6 on the published basin data instead of a synthetic CSV.

use std::time::{Duration, Instant};

use streamflow::baselines::{tree_fit, Node};
use streamflow::convnet::{conv_forward, pooled_len, window_count, CnnConfig, CnnModel, ConvKernel};
use streamflow::datapipe::{
    load_csv, make_windows, normalize_apply, normalize_fit, repeated_splits, split_712, synth_generate, window_rows,
    write_csv, DailyRecord, Sample, Schema, SplitMode, SynthConfig,
};
use streamflow::harness::{
    compare_all, evaluate_model, lookback_sweep, relative_error, sweep_argmin, EvalReport, ExperimentConfig, ModelKind,
};
use streamflow::model::{GradSession, NeuralRegressor};
use streamflow::recurrent::{lstm_cell_step, HiddenSize, LstmCellParams, LstmConfig, LstmNetwork, LstmState};
use streamflow::training::{
    huber_loss, relative_error_on, train_batch, AdaDelta, AdaDeltaConfig, TargetScale,
};
use streamflow::{Matrix, SeededRng};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()))
}

// ---------------------------------------------------------------- 1

fn worst_gradient_gap<M: NeuralRegressor>(model: &M, x: &Matrix) -> (f64, String) {
    const EPS: f64 = 1e-5;
    let mut session = GradSession::new(model);
    session.forward(x).unwrap();
    let analytic = session.backward(1.0).unwrap();
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let mut worst = (0.0, String::new());
    for (p, name) in names.iter().enumerate() {
        for i in 0..analytic[p].len() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.params_mut()[p].data_mut()[i] += delta;
                m.predict(x).unwrap()
            };
            let numeric = (eval(EPS) - eval(-EPS)) / (2.0 * EPS);
            let a = analytic[p].data()[i];
            let gap = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if gap > worst.0 {
                worst = (gap, format!("{name}[{i}]"));
            }
        }
    }
    worst
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(1);
    let mut worst = 0.0f64;
    for trial in 0..3 {
        let cnn = CnnModel::init(CnnConfig { channels_per_height: 2, ..CnnConfig::standard(4, 7) }, &mut rng).unwrap();
        let lstm_cfg = LstmConfig { input_features: 4, hidden: HiddenSize::PerDirection(3), bidirectional: true, layers: 1 };
        let lstm = LstmNetwork::init(lstm_cfg, &mut rng).unwrap();
        let x = Matrix::uniform(&mut rng, 7, 4, 1.0).unwrap();
        for (kind, (gap, at)) in [("CNN", worst_gradient_gap(&cnn, &x)), ("LSTM", worst_gradient_gap(&lstm, &x))] {
            check(gap < 1e-4, || format!("trial {trial} {kind} {at}: relative gap {gap:.3e}"))?;
            worst = worst.max(gap);
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("worst relative gap {worst:.2e}"))
}

// ---------------------------------------------------------------- 2

fn brute_conv(x: &Matrix, k: &ConvKernel) -> Vec<f64> {
    let h = k.weights.rows();
    (0..=x.rows() - h)
        .map(|i| {
            let mut s = k.bias;
            for a in 0..h {
                for b in 0..x.cols() {
                    s += k.weights.get(a, b) * x.get(i + a, b);
                }
            }
            s.max(0.0)
        })
        .collect()
}

fn best_split_sse(x: &Matrix, y: &[f64]) -> Option<f64> {
    let sse = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
    };
    let mut best: Option<f64> = None;
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = (0..x.rows()).partition(|&i| x.get(i, f) <= t);
            let total = sse(&l.iter().map(|&i| y[i]).collect::<Vec<_>>()) + sse(&r.iter().map(|&i| y[i]).collect::<Vec<_>>());
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(2);
    for case in 0..200 {
        let d = 1 + rng.index(5);
        let h = 1 + rng.index(7);
        let n = h + rng.index(10);
        let x = Matrix::uniform(&mut rng, n, d, 2.0).unwrap();
        let k = ConvKernel { weights: Matrix::uniform(&mut rng, h, d, 1.0).unwrap(), bias: rng.uniform(-0.5, 0.5) };
        let got = conv_forward(&x, &k, 1).map_err(|e| e.to_string())?;
        let want = brute_conv(&x, &k);
        let gap = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check(got.len() == want.len() && gap <= 1e-12, || format!("conv case {case}: gap {gap:e}"))?;
    }

    for case in 0..100 {
        let n = 2 + rng.index(49);
        let p = 1 + rng.index(4);
        // Coarse grid values create ties between candidate thresholds.
        let data: Vec<f64> = (0..n * p).map(|_| rng.index(8) as f64 / 2.0).collect();
        let x = Matrix::new(n, p, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let tree = tree_fit(&x, &y, Some(1), 1).map_err(|e| e.to_string())?;
        let Some(oracle) = best_split_sse(&x, &y) else { continue };
        let got: f64 = (0..n)
            .map(|i| {
                let r = y[i] - tree.predict(x.row(i));
                r * r
            })
            .sum();
        let scale = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
        check((got - oracle).abs() <= 1e-9 * scale, || format!("tree case {case}: tree SSE {got} vs exhaustive {oracle}"))?;
        if let Node::Split { feature, .. } = tree.nodes()[0] {
            check(feature < p, || format!("tree case {case}: feature {feature} out of range"))?;
        }
    }

    let mut tuples = 0;
    while tuples < 500 {
        let n = 1 + rng.index(60);
        let h = 1 + rng.index(10);
        let tc = 1 + rng.index(4);
        let hp = 1 + rng.index(6);
        let tp = 1 + rng.index(4);
        if h > n {
            continue;
        }
        let positions: Vec<usize> = (0..).map(|i| i * tc).take_while(|&s| s + h <= n).collect();
        let pooled: usize = (0..).map(|i| i * tp).take_while(|&s| s + hp <= positions.len()).count();
        let want = (pooled > 0).then_some(pooled);
        let got = pooled_len(n, h, tc, hp, tp);
        check(got == want, || format!("pooled_len({n},{h},{tc},{hp},{tp}) = {got:?}, enumeration {want:?}"))?;
        check(window_count(n, h, tc) == Some(positions.len()), || format!("window_count({n},{h},{tc})"))?;
        tuples += 1;
    }
    within(Duration::from_secs(30), start)?;
    Ok("200 conv cases, 100 trees, 500 length tuples".into())
}

// ---------------------------------------------------------------- 3

fn loss_and_optimizer() -> Outcome {
    for (diff, want) in [(0.0, 0.0), (0.5, 0.125), (1.0, 0.5), (2.0, 1.5)] {
        let got = huber_loss(&[diff], &[0.0]).map_err(|e| e.to_string())?;
        check(got == want, || format!("huber({diff}) = {got}, expected {want}"))?;
    }
    let mut opt = AdaDelta::new(AdaDeltaConfig::default(), [(1, 1)]).map_err(|e| e.to_string())?;
    let mut p = Matrix::zeros(1, 1);
    opt.step(&mut [&mut p], &[Matrix::filled(1, 1, 1.0)]).map_err(|e| e.to_string())?;
    let (rho, eps) = (0.95f64, 1e-6f64);
    let oracle = -(eps.sqrt() / ((1.0 - rho) + eps).sqrt());
    let got = p.get(0, 0);
    check((got - oracle).abs() <= 1e-12, || format!("first step {got} vs oracle {oracle}"))?;
    Ok(format!("first AdaDelta step {got:.9}"))
}

// ---------------------------------------------------------------- 4

fn memorize<M: NeuralRegressor>(mut model: M, data: &[Sample], scale: TargetScale) -> Result<(usize, f64), String> {
    let mut opt = AdaDelta::for_model(AdaDeltaConfig::default(), &model).map_err(|e| e.to_string())?;
    let mut grads = model.zero_grads();
    let mut rng = SeededRng::new(7);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut err = f64::INFINITY;
    for epoch in 1..=2000 {
        rng.shuffle(&mut order);
        for chunk in order.chunks(90) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            train_batch(&mut model, &mut opt, &batch, &mut grads).map_err(|e| e.to_string())?;
        }
        if epoch % 5 == 0 {
            err = relative_error_on(&model, data, scale).map_err(|e| e.to_string())?;
            if err < 0.05 {
                return Ok((epoch, err));
            }
        }
    }
    Err(format!("training relative error {:.2}% after 2000 epochs", 100.0 * err))
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let (d, lookback) = (4, 7);
    let records = synth_generate(200 + lookback, d, 42).map_err(|e| e.to_string())?;
    let rows: Vec<usize> = (0..records.len()).collect();
    let stats = normalize_fit(&records, &rows).map_err(|e| e.to_string())?;
    let data = make_windows(&normalize_apply(&records, &stats).unwrap(), lookback).unwrap().samples;
    let scale = stats.target_scale();
    check(data.len() == 200, || format!("{} samples", data.len()))?;

    let cnn = CnnModel::init(CnnConfig::standard(d, lookback), &mut SeededRng::new(1)).unwrap();
    let (cnn_epochs, cnn_err) = memorize(cnn, &data, scale).map_err(|e| format!("CNN: {e}"))?;
    let lstm = LstmNetwork::init(LstmConfig::standard(d), &mut SeededRng::new(1)).unwrap();
    let (lstm_epochs, lstm_err) = memorize(lstm, &data, scale).map_err(|e| format!("LSTM: {e}"))?;

    let clean = SynthConfig::new(2000, d, 42).noise_free().generate().unwrap();
    let split = split_712(clean.len() - lookback, &mut SeededRng::new(3)).unwrap();
    let ols = evaluate_model(ModelKind::Lr, &clean, &split, &ExperimentConfig::standard(lookback), 0)
        .map_err(|e| e.to_string())?;
    check(ols < 0.02, || format!("OLS test relative error {:.3}%", 100.0 * ols))?;
    within(Duration::from_secs(600), start)?;
    Ok(format!(
        "CNN {:.2}% at epoch {cnn_epochs}, LSTM {:.2}% at epoch {lstm_epochs}, OLS test {:.4}%",
        100.0 * cnn_err,
        100.0 * lstm_err,
        100.0 * ols
    ))
}

// ---------------------------------------------------------------- 5

/// Epoch budget that keeps ten repeats of the full-width LSTM, run twice,
/// inside the time limit on one core.
fn protocol_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::standard(7);
    c.train.max_epochs = 8;
    c.train.patience = 4;
    c
}

fn protocol_reproduction() -> Outcome {
    let start = Instant::now();
    let records = synth_generate(2000, 4, 2024).map_err(|e| e.to_string())?;
    let first = compare_all(&records, &protocol_config(), 10, 31337, "synthetic-2000").map_err(|e| e.to_string())?;
    let table = first.to_table();
    let lines: Vec<&str> = table.lines().collect();
    check(lines.len() == 6 && lines[0] == "Model | Mean Relative Error (%) | Standard Deviation", || table.clone())?;
    let order: Vec<&str> = lines[1..].iter().map(|l| l.split('|').next().unwrap().trim()).collect();
    check(order == ["LR", "GBR", "RF", "CNN", "LSTM"], || format!("row order {order:?}"))?;
    for row in &first.rows {
        check(row.per_repeat.len() == 10 && row.split_fingerprints == first.rows[0].split_fingerprints, || {
            format!("{} does not share the splits", row.kind.label())
        })?;
    }

    // Rerun from nothing but the persisted metadata.
    let stored = EvalReport::from_kv(&first.to_kv()).map_err(|e| e.to_string())?;
    let m = &stored.metadata;
    let second = compare_all(&records, &m.config, m.repeats, m.seed, &m.dataset_id).map_err(|e| e.to_string())?;
    for (a, b) in first.rows.iter().zip(&second.rows) {
        let same = a.per_repeat.iter().zip(&b.per_repeat).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.mean.to_bits() == b.mean.to_bits()
            && a.std.to_bits() == b.std.to_bits();
        check(same, || format!("{} differs between runs", a.kind.label()))?;
    }
    check(stored == first && second == first, || "report differs after rerun".into())?;
    within(Duration::from_secs(900), start)?;
    println!("{table}");
    Ok("five-row report reproduced bit for bit".into())
}

// ---------------------------------------------------------------- 6

fn published_results_caveat() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let supplied = std::env::var("STREAMFLOW_BASIN_DATA").ok().zip(std::env::var("STREAMFLOW_BASIN_SCHEMA").ok());
    let (records, config, label) = match &supplied {
        Some((data, schema)) => {
            let schema = Schema::load(schema).map_err(|e| e.to_string())?;
            (load_csv(data, &schema).map_err(|e| e.to_string())?.records, ExperimentConfig::standard(7), "published data")
        }
        None => {
            let synth = SynthConfig::new(600, 4, 8);
            let path = dir.path().join("basin.csv");
            write_csv(&synth.generate().unwrap(), &synth.schema(), std::fs::File::create(&path).unwrap())
                .map_err(|e| e.to_string())?;
            let mut c = ExperimentConfig::standard(7);
            c.train.max_epochs = 2;
            c.cnn_channels = 8;
            c.lstm_hidden = HiddenSize::Total(16);
            c.gbr.n_trees = 20;
            c.rf.n_trees = 10;
            (load_csv(&path, &synth.schema()).map_err(|e| e.to_string())?.records, c, "synthetic CSV")
        }
    };
    let report = compare_all(&records, &config, 2, 5, label).map_err(|e| e.to_string())?;
    check(report.to_table().lines().count() == 6, || report.to_table())?;
    let grid: Vec<usize> = (1..=14).collect();
    let sweep_kind = if supplied.is_some() { ModelKind::Lstm } else { ModelKind::Lr };
    let series = lookback_sweep(&records, &grid, sweep_kind, &config, 2, 5).map_err(|e| e.to_string())?;
    check(series.iter().map(|p| p.0).eq(grid.iter().copied()), || format!("{series:?}"))?;
    let best = sweep_argmin(&series).unwrap();
    // The published optimum at seven days is informational only.
    let note = if best == 7 { "minimum at L=7" } else { "minimum not at L=7 (informational)" };
    Ok(format!("{label}: report and 14-point {} sweep emitted, best L={best}, {note}", sweep_kind.name()))
}

// ---------------------------------------------------------------- 7

fn invariant_suites() -> Outcome {
    let mut rng = SeededRng::new(9);

    for _ in 0..200 {
        let (input, hidden) = (1 + rng.index(5), 1 + rng.index(6));
        let params = LstmCellParams::init(input, hidden, &mut rng).unwrap();
        let mut state = LstmState::zeros(hidden);
        for _ in 0..10 {
            let x: Vec<f64> = (0..input).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let next = lstm_cell_step(&params, &x, &state).unwrap();
            check(next.hidden.iter().all(|h| h.abs() < 1.0), || format!("|h| >= 1: {:?}", next.hidden))?;
            let bounded = next.cell.iter().zip(&state.cell).all(|(c, p)| c.abs() <= p.abs() + 1.0);
            check(bounded, || "cell grew by more than the candidate bound".into())?;
            state = next;
        }
    }

    let records = synth_generate(400, 3, 10).unwrap();
    let rows: Vec<usize> = (0..300).collect();
    let stats = normalize_fit(&records, &rows).unwrap();
    let z = normalize_apply(&records, &stats).unwrap();
    for (a, b) in records.iter().zip(&z) {
        let back = b.flow * stats.target_std + stats.target_mean;
        check((back - a.flow).abs() <= 1e-9 * a.flow.abs().max(1.0), || "target round trip".into())?;
        for (j, v) in b.features.iter().enumerate() {
            let back = v * stats.feature_std[j] + stats.feature_mean[j];
            check((back - a.features[j]).abs() <= 1e-9 * a.features[j].abs().max(1.0), || "feature round trip".into())?;
        }
    }

    for n in [10, 11, 99, 1000, 1993] {
        for s in repeated_splits(n, 5, rng.next_u64(), SplitMode::Shuffled).unwrap() {
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            check(all == (0..n).collect::<Vec<_>>(), || format!("split of {n} is not a partition"))?;
            check(s.train.len() == n * 7 / 10 && s.val.len() == n / 10, || format!("split sizes for {n}"))?;
        }
    }

    let split = split_712(records.len() - 7, &mut SeededRng::new(4)).unwrap();
    let train_rows = window_rows(&split.train, 7);
    let fitted = normalize_fit(&records, &train_rows).unwrap();
    let mut poisoned: Vec<DailyRecord> = records.clone();
    for (i, r) in poisoned.iter_mut().enumerate() {
        if train_rows.binary_search(&i).is_err() {
            r.flow *= 100.0;
            r.features.iter_mut().for_each(|v| *v += 1e3);
        }
    }
    check(normalize_fit(&poisoned, &train_rows).unwrap() == fitted, || "statistics read non-training rows".into())?;

    for _ in 0..200 {
        let n = 1 + rng.index(20);
        let p: Vec<f64> = (0..n).map(|_| rng.uniform(0.1, 50.0)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.uniform(0.1, 50.0)).collect();
        let c = 2f64.powi(rng.index(7) as i32 - 3);
        let scaled = |v: &[f64]| v.iter().map(|a| a * c).collect::<Vec<_>>();
        let (a, b) = (relative_error(&p, &r).unwrap(), relative_error(&scaled(&p), &scaled(&r)).unwrap());
        check(a == b, || format!("scale {c}: {a} vs {b}"))?;
    }
    Ok("gate/state bounds, round trip, partitions, leakage guard, scale covariance".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("gradient fidelity", gradient_fidelity),
        ("oracle equivalence", oracle_equivalence),
        ("loss and optimizer exactness", loss_and_optimizer),
        ("memorization", memorization),
        ("protocol reproduction", protocol_reproduction),
        ("published-results caveat", published_results_caveat),
        ("invariant suites", invariant_suites),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
