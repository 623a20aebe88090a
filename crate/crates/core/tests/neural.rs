use f0lab::corpus::{generate_synthetic, split_corpus, Corpus, FeatureValue, SynthConfig, UtteranceRecord};
use f0lab::neural::*;
use f0lab::{Contour, DeltaKind, CONTOUR_LEN};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTAS: [DeltaKind; 3] = [DeltaKind::None, DeltaKind::InDelta, DeltaKind::CrossDelta];

fn tiny_dims() -> NetDims {
    NetDims {
        lstm_hidden: 3,
        mlp_hidden: [4, 3],
        embed_dim: 2,
    }
}

fn small_dims() -> NetDims {
    NetDims {
        lstm_hidden: 6,
        mlp_hidden: [8, 6],
        embed_dim: 3,
    }
}

fn tiny_corpus() -> Corpus {
    generate_synthetic(&SynthConfig {
        n_utterances: 2,
        syllables_per_utterance: (2, 3),
        phrases_per_utterance: (1, 2),
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn corpus(n: usize, seed: u64) -> Corpus {
    generate_synthetic(&SynthConfig {
        n_utterances: n,
        syllables_per_utterance: (3, 8),
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

// ---- scalar oracles ----

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step evaluated gate by gate from the stacked parameter layout.
fn oracle_step(cell: &LstmCell<'_>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (ni, nh) = (cell.input, cell.hidden);
    let pre = |gate: usize, q: usize| {
        let r = gate * nh + q;
        let mut z = cell.b[r];
        for k in 0..ni {
            z += cell.wx[r * ni + k] * x[k];
        }
        for k in 0..nh {
            z += cell.wh[r * nh + k] * h[k];
        }
        z
    };
    let mut h_new = vec![0.0; nh];
    let mut c_new = vec![0.0; nh];
    for q in 0..nh {
        let i = sig(pre(0, q));
        let f = sig(pre(1, q));
        let o = sig(pre(2, q));
        let g = pre(3, q).tanh();
        c_new[q] = f * c[q] + i * g;
        h_new[q] = o * c_new[q].tanh();
    }
    (h_new, c_new)
}

fn oracle_run(cell: &LstmCell<'_>, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut out = vec![Vec::new(); n];
    let mut h = vec![0.0; cell.hidden];
    let mut c = vec![0.0; cell.hidden];
    for k in 0..n {
        let t = if reverse { n - 1 - k } else { k };
        let (h2, c2) = oracle_step(cell, &xs[t], &h, &c);
        out[t] = h2.clone();
        h = h2;
        c = c2;
    }
    out
}

fn oracle_dense(w: &[f64], b: &[f64], x: &[f64], relu: Option<bool>) -> Vec<f64> {
    let input = x.len();
    (0..b.len())
        .map(|r| {
            let mut z = b[r];
            for k in 0..input {
                z += w[r * input + k] * x[k];
            }
            match relu {
                Some(true) => z.max(0.0),
                Some(false) => z.tanh(),
                None => z,
            }
        })
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

struct CellParams {
    wx: Vec<f64>,
    wh: Vec<f64>,
    b: Vec<f64>,
    input: usize,
    hidden: usize,
}

impl CellParams {
    fn random(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Self {
        Self {
            wx: random_vec(rng, 4 * hidden * input, 0.8),
            wh: random_vec(rng, 4 * hidden * hidden, 0.8),
            b: random_vec(rng, 4 * hidden, 0.5),
            input,
            hidden,
        }
    }

    fn cell(&self) -> LstmCell<'_> {
        LstmCell {
            wx: &self.wx,
            wh: &self.wh,
            b: &self.b,
            input: self.input,
            hidden: self.hidden,
        }
    }
}

#[test]
fn lstm_step_zero_and_saturation() {
    let p = CellParams {
        wx: vec![0.0; 4 * 2 * 3],
        wh: vec![0.0; 4 * 2 * 2],
        b: vec![0.0; 8],
        input: 3,
        hidden: 2,
    };
    let (h, c) = lstm_step(&p.cell(), &[0.0; 3], &[0.0; 2], &[0.0; 2]);
    assert_eq!((h, c), (vec![0.0; 2], vec![0.0; 2]));

    let mut b = vec![0.0; 8];
    b[0..2].copy_from_slice(&[-20.0, -20.0]);
    b[2..4].copy_from_slice(&[20.0, 20.0]);
    let p = CellParams { b, ..p };
    let (_, c) = lstm_step(&p.cell(), &[1.0, -2.0, 0.5], &[0.3, 0.1], &[0.7, -1.2]);
    assert!((c[0] - 0.7).abs() < 1e-6 && (c[1] + 1.2).abs() < 1e-6);
}

#[test]
fn lstm_and_blstm_match_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = CellParams::random(&mut rng, 4, 3);
    let b = CellParams::random(&mut rng, 4, 3);
    let x = random_vec(&mut rng, 4, 1.0);
    let h = random_vec(&mut rng, 3, 0.5);
    let c = random_vec(&mut rng, 3, 0.5);
    let (h1, c1) = lstm_step(&f.cell(), &x, &h, &c);
    let (h2, c2) = oracle_step(&f.cell(), &x, &h, &c);
    for k in 0..3 {
        assert!((h1[k] - h2[k]).abs() < 1e-12 && (c1[k] - c2[k]).abs() < 1e-12);
    }

    let seq: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
    let out = blstm_forward(&f.cell(), &b.cell(), &seq).unwrap();
    let fo = oracle_run(&f.cell(), &seq, false);
    let bo = oracle_run(&b.cell(), &seq, true);
    for t in 0..3 {
        let want = [fo[t].as_slice(), bo[t].as_slice()].concat();
        for (a, w) in out[t].iter().zip(&want) {
            assert!((a - w).abs() < 1e-12);
        }
    }

    // length 1: one step of each direction from zero states
    let one = blstm_forward(&f.cell(), &b.cell(), &seq[..1]).unwrap();
    let zero = vec![0.0; 3];
    let want = [oracle_step(&f.cell(), &seq[0], &zero, &zero).0, oracle_step(&b.cell(), &seq[0], &zero, &zero).0].concat();
    assert_eq!(one[0].len(), 6);
    for (a, w) in one[0].iter().zip(&want) {
        assert!((a - w).abs() < 1e-12);
    }
    assert!(matches!(blstm_forward(&f.cell(), &b.cell(), &[]), Err(NnError::EmptySequence)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blstm_reversal_symmetry(seed in any::<u64>(), len in 1usize..7, input in 1usize..5, hidden in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = CellParams::random(&mut rng, input, hidden);
        let b = CellParams::random(&mut rng, input, hidden);
        let seq: Vec<Vec<f64>> = (0..len).map(|_| random_vec(&mut rng, input, 2.0)).collect();
        let out = blstm_forward(&f.cell(), &b.cell(), &seq).unwrap();
        let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let swapped = blstm_forward(&b.cell(), &f.cell(), &rev).unwrap();
        for t in 0..len {
            let s = &swapped[len - 1 - t];
            let want = [&s[hidden..], &s[..hidden]].concat();
            for (a, w) in out[t].iter().zip(&want) {
                prop_assert!((a - w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn in_delta_loss_bounds_mse(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Contour> {
            (0..n).map(|_| std::array::from_fn(|_| rng.random_range(50.0..300.0))).collect()
        };
        let pred = vec![mk(&mut rng)];
        let truth = vec![mk(&mut rng)];
        let mse = loss_with_delta(&pred, &truth, DeltaKind::None).unwrap();
        prop_assert!(mse >= 0.0);
        for d in [DeltaKind::InDelta, DeltaKind::CrossDelta] {
            prop_assert!(loss_with_delta(&pred, &truth, d).unwrap() >= mse);
        }
        // a constant offset keeps every delta equal
        let shifted = vec![truth[0].iter().map(|c| std::array::from_fn(|i| c[i] + 7.0)).collect::<Vec<Contour>>()];
        let plain = loss_with_delta(&shifted, &truth, DeltaKind::None).unwrap();
        prop_assert!((loss_with_delta(&shifted, &truth, DeltaKind::InDelta).unwrap() - plain).abs() < 1e-9);
        prop_assert!((loss_with_delta(&shifted, &truth, DeltaKind::CrossDelta).unwrap() - plain).abs() < 1e-9);
        prop_assert_eq!(loss_with_delta(&truth, &truth, DeltaKind::InDelta).unwrap(), 0.0);
    }
}

#[test]
fn loss_hand_cases() {
    let zero = [0.0; CONTOUR_LEN];
    let mut spike = zero;
    spike[0] = 1.0;
    let pred = vec![vec![zero, zero]];
    let truth = vec![vec![spike, zero]];
    // values: one error of 1; in-delta of the spike: (-1, 0, ...) → one error of 1
    assert!((loss_with_delta(&pred, &truth, DeltaKind::None).unwrap() - 1.0 / 20.0).abs() < 1e-15);
    assert!((loss_with_delta(&pred, &truth, DeltaKind::InDelta).unwrap() - 2.0 / 20.0).abs() < 1e-15);
    // cross: syllable 0 next block has -1 at 0, syllable 1 prev block has -1 at 0
    assert!((loss_with_delta(&pred, &truth, DeltaKind::CrossDelta).unwrap() - 3.0 / 20.0).abs() < 1e-15);

    let a: Contour = std::array::from_fn(|i| (i * i) as f64 * 0.5);
    let b: Contour = std::array::from_fn(|i| 3.0 - i as f64);
    let y1: Contour = std::array::from_fn(|i| (i as f64).sin());
    let y2: Contour = std::array::from_fn(|i| 1.0 + 0.2 * i as f64);
    let mut sse = 0.0;
    for (p, y) in [(a, y1), (b, y2)] {
        for i in 0..10 {
            sse += (p[i] - y[i]).powi(2);
        }
        for i in 0..9 {
            sse += ((p[i + 1] - p[i]) - (y[i + 1] - y[i])).powi(2);
        }
    }
    let got = loss_with_delta(&[vec![a, b]], &[vec![y1, y2]], DeltaKind::InDelta).unwrap();
    assert!((got - sse / 20.0).abs() < 1e-12);
    assert!(loss_with_delta(&[vec![a]], &[vec![y1, y2]], DeltaKind::None).is_err());
}

// ---- gradients ----

/// First seed from `base` whose initial model keeps every ReLU pre-activation
/// at least `margin` away from zero on `utts`, so that central differences
/// never straddle a kink.
fn seed_off_kinks(kind: ModelKind, train: &Corpus, utts: &[&UtteranceRecord], base: u64, margin: f64) -> NeuralModel {
    for s in base..base + 200 {
        let m = NeuralModel::new(kind, tiny_dims(), train, s).unwrap();
        if m.relu_margin(utts) >= margin {
            return m;
        }
    }
    panic!("no seed with ReLU margin {margin}");
}

fn worst_relative_error(model: &mut NeuralModel, utts: &[&UtteranceRecord], delta: DeltaKind) -> (f64, String) {
    let g = compute_gradients(model, utts, delta).unwrap();
    let tensors: Vec<TensorSpec> = model.layout().tensors().to_vec();
    let mut worst = (0.0, String::new());
    for t in &tensors {
        for i in t.range() {
            let orig = model.params[i];
            model.params[i] = orig + 1e-4;
            let lp = model.loss(utts, delta).unwrap();
            model.params[i] = orig - 1e-4;
            let lm = model.loss(utts, delta).unwrap();
            model.params[i] = orig;
            let num = (lp - lm) / 2e-4;
            let rel = (g.grad[i] - num).abs() / g.grad[i].abs().max(num.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, t.name.clone());
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let c = tiny_corpus();
    let utts: Vec<&UtteranceRecord> = c.utterances.iter().collect();
    for kind in ModelKind::ALL {
        let model = seed_off_kinks(kind, &c, &utts, 7, 1e-3);
        for delta in DELTAS {
            let mut m = model.clone();
            let (rel, name) = worst_relative_error(&mut m, &utts, delta);
            assert!(rel <= 1e-4, "{kind} {delta:?}: relative error {rel} at {name}");
        }
    }
}

#[test]
fn gradient_of_zero_loss_is_zero_and_reduction_is_mean() {
    let c = tiny_corpus();
    let model = NeuralModel::new(ModelKind::Additive, tiny_dims(), &c, 1).unwrap();
    // Replace the targets with the model's own predictions.
    let mut fitted = c.utterances[0].clone();
    let pred = predict_neural(&model, &fitted).unwrap();
    for (s, p) in fitted.syllables.iter_mut().zip(pred) {
        s.contour = p;
    }
    for delta in DELTAS {
        let g = compute_gradients(&model, &[&fitted], delta).unwrap();
        assert!(g.loss < 1e-24);
        assert!(g.grad.iter().all(|x| x.abs() < 1e-12));
    }

    let u = &c.utterances[1];
    let one = compute_gradients(&model, &[u], DeltaKind::InDelta).unwrap();
    let two = compute_gradients(&model, &[u, u], DeltaKind::InDelta).unwrap();
    assert!((one.loss - two.loss).abs() < 1e-12);
    for (a, b) in one.grad.iter().zip(&two.grad) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((one.loss - model.loss(&[u], DeltaKind::InDelta).unwrap()).abs() < 1e-12);
}

// ---- forward contracts ----

#[test]
fn additive_bundle_is_base_plus_residual() {
    let c = corpus(5, 2);
    let model = NeuralModel::new(ModelKind::Additive, small_dims(), &c, 3).unwrap();
    for u in &c.utterances {
        let b = additive_forward(&model, u, DeltaKind::InDelta).unwrap();
        for t in 0..u.syllables.len() {
            for i in 0..CONTOUR_LEN {
                assert!((b.total[t][i] - b.base[t][i] - b.residual[t][i]).abs() <= 1e-9);
            }
            assert_eq!(b.delta[t].len(), 9);
        }
        assert_eq!(predict_neural(&model, u).unwrap(), b.total);
    }
}

#[test]
fn zeroed_residual_head_gives_base_only() {
    let c = corpus(4, 4);
    let mut model = NeuralModel::new(ModelKind::Additive, small_dims(), &c, 5).unwrap();
    model.tensor_mut("mlp2.out.w").unwrap().fill(0.0);
    model.tensor_mut("mlp2.out.b").unwrap().fill(0.0);
    for u in &c.utterances {
        let b = model.forward(u, DeltaKind::InDelta).unwrap();
        assert!(b.residual.iter().flatten().all(|x| *x == 0.0));
        assert_eq!(b.total, b.base);
    }
}

#[test]
fn zeroed_output_layers_give_constant_contours() {
    let c = corpus(4, 5);
    let mut model = NeuralModel::new(ModelKind::Additive, small_dims(), &c, 6).unwrap();
    model.tensor_mut("mlp1.out.w").unwrap().fill(0.0);
    model.tensor_mut("mlp2.out.w").unwrap().fill(0.0);
    model.tensor_mut("mlp2.out.b").unwrap().copy_from_slice(&[0.5; 10]);
    let b1 = model.tensor("mlp1.out.b").unwrap().to_vec();
    let want: Contour = std::array::from_fn(|i| (b1[i] + 0.5) * TARGET_SCALE);
    for u in &c.utterances {
        let b = model.forward(u, DeltaKind::InDelta).unwrap();
        for p in &b.total {
            for i in 0..10 {
                assert!((p[i] - want[i]).abs() < 1e-9);
            }
        }
    }

    let mut blstm = make_baseline(ModelKind::Blstm, small_dims(), &c, 1).unwrap();
    blstm.tensor_mut("mlp.out.w").unwrap().fill(0.0);
    let bias = blstm.tensor("mlp.out.b").unwrap().to_vec();
    for u in &c.utterances {
        for p in predict_neural(&blstm, u).unwrap() {
            for i in 0..10 {
                assert!((p[i] - bias[i] * TARGET_SCALE).abs() < 1e-9);
            }
        }
    }
    // a flat prediction has an all-zero in-delta block
    blstm.tensor_mut("mlp.out.b").unwrap().fill(1.5);
    let b = blstm.forward(&c.utterances[0], DeltaKind::InDelta).unwrap();
    assert!(b.delta.iter().flatten().all(|d| d.abs() < 1e-12));
}

#[test]
fn additive_prediction_matches_forward_reimplementation() {
    let c = corpus(3, 6);
    let model = NeuralModel::new(ModelKind::Additive, small_dims(), &c, 8).unwrap();
    let u = &c.utterances[1];
    let h = small_dims().lstm_hidden;
    let mut total = vec![[0.0; 10]; u.syllables.len()];
    for (branch, tag, relu) in [(0, "1", true), (1, "2", false)] {
        let xs = model.encode(branch, u);
        let cell = |dir: &str| LstmCell {
            wx: model.tensor(&format!("blstm{tag}.{dir}.wx")).unwrap(),
            wh: model.tensor(&format!("blstm{tag}.{dir}.wh")).unwrap(),
            b: model.tensor(&format!("blstm{tag}.{dir}.b")).unwrap(),
            input: xs[0].len(),
            hidden: h,
        };
        let fo = oracle_run(&cell("fwd"), &xs, false);
        let bo = oracle_run(&cell("bwd"), &xs, true);
        for t in 0..xs.len() {
            let mut a = [fo[t].as_slice(), bo[t].as_slice()].concat();
            for layer in ["l0", "l1"] {
                let w = model.tensor(&format!("mlp{tag}.{layer}.w")).unwrap();
                let b = model.tensor(&format!("mlp{tag}.{layer}.b")).unwrap();
                a = oracle_dense(w, b, &a, Some(relu));
            }
            let out = oracle_dense(model.tensor(&format!("mlp{tag}.out.w")).unwrap(), model.tensor(&format!("mlp{tag}.out.b")).unwrap(), &a, None);
            for i in 0..10 {
                total[t][i] += out[i] * TARGET_SCALE;
            }
        }
    }
    let got = predict_neural(&model, u).unwrap();
    for (g, w) in got.iter().zip(&total) {
        for i in 0..10 {
            assert!((g[i] - w[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn encoder_rows_follow_tables_and_training_stats() {
    let c = corpus(20, 7);
    let model = make_baseline(ModelKind::Mlp, small_dims(), &c, 2).unwrap();
    let e = small_dims().embed_dim;
    let u = &c.utterances[0];
    let rows = model.encode(0, u);
    let stats = &model.encoder_stats()[0];
    // one slot per schema feature, in schema order
    assert_eq!(stats.len(), c.schema.len());
    for (t, s) in u.syllables.iter().enumerate() {
        let mut want = Vec::new();
        for (f, st) in stats {
            match (st, s.features[*f]) {
                (SlotStats::Seen(_), FeatureValue::Cat(v)) => {
                    let table = model.tensor(&format!("enc.{}", c.schema.get(*f).name)).unwrap();
                    want.extend_from_slice(&table[v as usize * e..(v as usize + 1) * e]);
                }
                (SlotStats::MeanStd(m, sd), FeatureValue::Num(x)) => want.push((x - m) / sd),
                other => panic!("kind mismatch {other:?}"),
            }
        }
        assert_eq!(rows[t], want);
    }

    // a numeric value equal to its training mean encodes to 0
    let (f, mean) = stats
        .iter()
        .find_map(|(f, s)| match s {
            SlotStats::MeanStd(m, _) => Some((*f, *m)),
            SlotStats::Seen(_) => None,
        })
        .unwrap();
    let mut probe = u.clone();
    probe.syllables[0].features[f] = FeatureValue::Num(mean);
    let enc = model.encode(0, &probe);
    let offset: usize = stats
        .iter()
        .take_while(|(g, _)| *g != f)
        .map(|(_, s)| if matches!(s, SlotStats::Seen(_)) { e } else { 1 })
        .sum();
    assert_eq!(enc[0][offset], 0.0);

    // identical syllables encode identically
    let mut twin = u.clone();
    twin.syllables[1].features = twin.syllables[0].features.clone();
    let enc = model.encode(0, &twin);
    assert_eq!(enc[0], enc[1]);
}

#[test]
fn unseen_category_uses_zero_unknown_row() {
    let c = corpus(20, 8);
    let model = make_baseline(ModelKind::Mlp, small_dims(), &c, 2).unwrap();
    let f = c.schema.index_of("word_id").unwrap();
    let (seen, categories) = match &model.encoder_stats()[0].iter().find(|(g, _)| *g == f).unwrap().1 {
        SlotStats::Seen(s) => (s.clone(), s.len()),
        SlotStats::MeanStd(..) => panic!("word_id is categorical"),
    };
    let unseen = seen.iter().position(|s| !s).expect("20 utterances do not cover the lexicon") as u32;
    let e = small_dims().embed_dim;
    assert_eq!(FeatureEncoder::row_for(categories, &seen, Some(&FeatureValue::Cat(unseen))), categories);
    assert_eq!(FeatureEncoder::row_for(categories, &seen, Some(&FeatureValue::Cat(categories as u32 + 5))), categories);
    let table = model.tensor("enc.word_id").unwrap();
    assert!(table[categories * e..].iter().all(|x| *x == 0.0));
}

#[test]
fn mlp_is_local_and_lstm_is_causal() {
    let c = corpus(6, 9);
    let mlp = make_baseline(ModelKind::Mlp, small_dims(), &c, 3).unwrap();
    let lstm = make_baseline(ModelKind::Lstm, small_dims(), &c, 3).unwrap();
    let u = c.utterances.iter().find(|u| u.syllables.len() >= 4).unwrap();

    let mut permuted = u.clone();
    let n = permuted.syllables.len();
    permuted.syllables[1..].rotate_left(1);
    permuted.syllables.swap(1, n - 1);
    assert_eq!(predict_neural(&mlp, u).unwrap()[0], predict_neural(&mlp, &permuted).unwrap()[0]);

    let mut changed = u.clone();
    let num = c.schema.index_of("duration").unwrap();
    for k in [3, n - 1] {
        let x = changed.syllables[k].features[num].as_num().unwrap();
        changed.syllables[k].features[num] = FeatureValue::Num(x + 1.0);
    }
    let a = predict_neural(&lstm, u).unwrap();
    let b = predict_neural(&lstm, &changed).unwrap();
    assert_eq!(a[..3], b[..3]);

    let blstm = make_baseline(ModelKind::Blstm, small_dims(), &c, 3).unwrap();
    assert_ne!(predict_neural(&blstm, u).unwrap()[0], predict_neural(&blstm, &changed).unwrap()[0]);
    assert!(make_baseline(ModelKind::Additive, small_dims(), &c, 3).is_err());
}

#[test]
fn schema_and_shape_errors() {
    let c = corpus(4, 10);
    let model = make_baseline(ModelKind::Blstm, small_dims(), &c, 3).unwrap();
    let mut bad = c.utterances[0].clone();
    bad.syllables[0].features.pop();
    assert!(matches!(predict_neural(&model, &bad), Err(NnError::FeatureCount { .. })));
    let mut empty = c.utterances[0].clone();
    empty.syllables.clear();
    assert!(predict_neural(&model, &empty).is_err());
    let other = generate_synthetic(&SynthConfig {
        n_utterances: 4,
        tone_count: 6,
        ..SynthConfig::default()
    })
    .unwrap();
    assert!(matches!(
        train(model, &other, &other, &TrainConfig::default()),
        Err(NnError::SchemaMismatch)
    ));
    let zero = NetDims {
        lstm_hidden: 0,
        ..small_dims()
    };
    assert!(NeuralModel::new(ModelKind::Lstm, zero, &c, 0).is_err());
}

// ---- training ----

fn quick(epochs: usize, lr: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        patience: 100,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let c = corpus(8, 11);
    let (tr, va, _) = split_corpus(&c, (0.75, 0.25, 0.0), 0).unwrap();
    let model = NeuralModel::new(ModelKind::Additive, small_dims(), &tr, 1).unwrap();
    let out = train(model.clone(), &tr, &va, &quick(3, 0.0, 0)).unwrap();
    assert_eq!(out.model.params, model.params);
    let first = &out.history[0];
    assert!(out.history.iter().all(|h| h.train_loss == first.train_loss && h.val_loss == first.val_loss));
    assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { patience: 0, ..TrainConfig::default() }.validate().is_err());
}

#[test]
fn training_is_deterministic() {
    let c = corpus(10, 12);
    let (tr, va, _) = split_corpus(&c, (0.8, 0.2, 0.0), 0).unwrap();
    let run = || {
        let m = NeuralModel::new(ModelKind::Additive, small_dims(), &tr, 4).unwrap();
        train(m, &tr, &va, &quick(3, 1e-3, 9)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
}

#[test]
fn training_reduces_loss_on_small_corpus() {
    let c = corpus(60, 13);
    let (tr, va, _) = split_corpus(&c, (50.0 / 60.0, 10.0 / 60.0, 0.0), 0).unwrap();
    assert_eq!(tr.utterances.len(), 50);
    let m = NeuralModel::new(ModelKind::Blstm, small_dims(), &tr, 0).unwrap();
    let out = train(m, &tr, &va, &quick(20, 3e-3, 0)).unwrap();
    assert_eq!(out.history.len(), 20);
    assert!(out.history[19].train_loss < out.history[0].train_loss);
    let best = out.history.iter().map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.history[out.best_epoch - 1].val_loss, best);
    assert!((out.model.loss(&va.utterances.iter().collect::<Vec<_>>(), DeltaKind::InDelta).unwrap() - best).abs() < 1e-12);
}

#[test]
fn neural_files_round_trip() {
    let c = corpus(6, 14);
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let m = NeuralModel::new(kind, small_dims(), &c, 5).unwrap();
        let path = dir.path().join(format!("{kind}.nn"));
        save_neural(&m, &path).unwrap();
        let back = load_neural(&path).unwrap();
        assert_eq!(back.kind, kind);
        assert_eq!(back.encoder_stats(), m.encoder_stats());
        for (a, b) in back.params.iter().zip(&m.params) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
        for u in &c.utterances {
            let (p, q) = (predict_neural(&m, u).unwrap(), predict_neural(&back, u).unwrap());
            for (x, y) in p.iter().flatten().zip(q.iter().flatten()) {
                assert!((x - y).abs() < 1e-5);
            }
        }
        // a reloaded model writes the same bytes again
        let mut first = Vec::new();
        write_neural(&back, &mut first).unwrap();
        assert!(first.starts_with(NN_HEADER.as_bytes()));
        let mut second = Vec::new();
        write_neural(&read_neural(&first[..]).unwrap(), &mut second).unwrap();
        assert_eq!(first, second);
        let cut = &first[..first.len() / 2];
        assert!(read_neural(cut).is_err());
    }
    assert!(matches!(load_neural(&dir.path().join("none.nn")), Err(NnError::MissingFile { .. })));
}
