use cipherfit::data::{reference_mixture, Dataset};
use cipherfit::emulator::{Backend, CipherBlock, Context, Emulator, OpCounts, SecretKey};
use cipherfit::encoding::{decode, encode, Tiling};
use cipherfit::matmul::{diag_abt, diag_atb, AtbPath};
use cipherfit::training::*;
use cipherfit::Error;
use ndarray::{array, s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk() -> (Emulator, SecretKey) {
    Emulator::new(Context::desk()).unwrap()
}

fn frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).mapv(|v| v * v).sum().sqrt()
}

fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

#[test]
fn nag_schedule_matches_recurrence() {
    let mut s = NagSchedule::new();
    let mut lam = [0.0f64; 1002];
    for t in 1..1002 {
        lam[t] = (1.0 + (1.0 + 4.0 * lam[t - 1] * lam[t - 1]).sqrt()) / 2.0;
    }
    for t in 1..=1000 {
        let gamma = (1.0 - lam[t]) / lam[t + 1];
        assert!((s.lambda() - lam[t]).abs() < 1e-12);
        assert!((s.advance() - gamma).abs() < 1e-12);
    }
}

#[test]
fn encrypted_logits_match_plaintext() {
    let (he, sk) = desk();
    let x = random(64, 17, 1);
    let w = random(3, 17, 2);
    let xe = encode(&he, &x, Tiling::None).unwrap();
    let we = encode(&he, &w, Tiling::fill_vertical(he.context(), 3).unwrap()).unwrap();
    let l = decode(&he, Some(&sk), &diag_abt(&he, &xe, &we, 1.0).unwrap()).unwrap();
    assert!(frob(&l, &x.dot(&w.t())) < 1e-9);

    let zero = encode(&he, &Array2::zeros((3, 17)), Tiling::fill_vertical(he.context(), 3).unwrap()).unwrap();
    let l0 = decode(&he, Some(&sk), &diag_abt(&he, &xe, &zero, 1.0).unwrap()).unwrap();
    assert!(l0.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn encrypted_gradient_matches_plaintext() {
    let (he, sk) = desk();
    let x = random(50, 9, 3);
    let p = random(50, 3, 4);
    let ht = Tiling::fill_horizontal(he.context(), 3).unwrap();
    let xe = encode(&he, &x, Tiling::None).unwrap();
    let pe = encode(&he, &p, ht).unwrap();
    let t = 0.3 / 50.0;
    let g = decode(&he, Some(&sk), &diag_atb(&he, &pe, &xe, t, AtbPath::Auto).unwrap()).unwrap();
    assert!(frob(&g, &(p.t().dot(&x) * t)) < 1e-9);

    // P == Y gives a zero gradient.
    let d = pe.try_zip(&pe, |a, b| he.sub(a, b)).unwrap();
    let g0 = decode(&he, Some(&sk), &diag_atb(&he, &d, &xe, t, AtbPath::Auto).unwrap()).unwrap();
    assert!(g0.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn single_sample_gradient_by_hand() {
    // One sample x = (2, 1), two classes, P = (0.7, 0.3), Y = (1, 0):
    // (P − Y)ᵀx = [[−0.6, −0.3], [0.6, 0.3]].
    let (he, sk) = desk();
    let xe = encode(&he, &array![[2.0, 1.0]], Tiling::None).unwrap();
    let d = encode(&he, &array![[-0.3, 0.3]], Tiling::fill_horizontal(he.context(), 2).unwrap()).unwrap();
    let g = decode(&he, Some(&sk), &diag_atb(&he, &d, &xe, 1.0, AtbPath::RotLeft).unwrap()).unwrap();
    assert!(frob(&g, &array![[-0.6, -0.3], [0.6, 0.3]]) < 1e-12);
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let x = random(20, 5, 5);
    let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
    let y = Dataset::new(Array2::zeros((20, 1)), labels.clone(), 3).unwrap().one_hot();
    let w = random(3, 5, 6);
    let p = PlainSoftmax::Exact.rows(&x.dot(&w.t()));
    let g = (&p - &y).t().dot(&x) / 20.0;
    let h = 1e-6;
    for i in 0..3 {
        for j in 0..5 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[[i, j]] += h;
            wm[[i, j]] -= h;
            let fd = (cross_entropy(&x.dot(&wp.t()), &labels) - cross_entropy(&x.dot(&wm.t()), &labels)) / (2.0 * h);
            assert!((fd - g[[i, j]]).abs() < 1e-5);
        }
    }
}

fn lockstep(steps: usize) -> (f64, f64) {
    let [train, _, _] = reference_mixture(1).unwrap();
    let cfg = TrainConfig::default();
    let (he, sk) = desk();
    let x = train.design();
    let y = train.one_hot();
    let w0 = initial_weights(3, 17, cfg.seed);
    let mut server = Server::new(&he, cfg.clone(), &w0).unwrap();
    let mut plain = PlainTrainer::new(w0, PlainSoftmax::Approx(cfg.softmax.clone()), cfg.learning_rate);
    let ranges = batch_ranges(train.len(), cfg.batch_size);
    let ht = Tiling::fill_horizontal(he.context(), 3).unwrap();
    let batches: Vec<_> = ranges
        .iter()
        .map(|&(lo, hi)| {
            let xb = x.slice(s![lo..hi, ..]).to_owned();
            let yb = y.slice(s![lo..hi, ..]).to_owned();
            let enc = (encode(&he, &xb, Tiling::None).unwrap(), encode(&he, &yb, ht).unwrap());
            (xb, yb, enc)
        })
        .collect();
    let mut first = f64::NAN;
    for k in 0..steps {
        let (xb, yb, (xe, ye)) = &batches[k % batches.len()];
        server.nag_step(xe, ye).unwrap();
        plain.step(xb, yb);
        let w = decode(&he, Some(&sk), server.w()).unwrap();
        if k == 0 {
            first = frob(&w, &plain.w);
        }
    }
    let w = decode(&he, Some(&sk), server.w()).unwrap();
    (first, frob(&w, &plain.w))
}

#[test]
fn one_encrypted_step_equals_plain_step() {
    let (first, _) = lockstep(1);
    assert!(first < 1e-8, "{first}");
}

#[test]
fn lockstep_divergence_after_50_steps() {
    let (_, last) = lockstep(50);
    assert!(last < 1e-6, "{last}");
}

#[test]
fn fit_matches_plain_reference_and_audits_clean() {
    let [train, val, test] = reference_mixture(1).unwrap();
    let cfg = TrainConfig::default();
    let (he, sk) = desk();
    let r = fit(&he, &sk, &train, &val, &cfg).unwrap();
    let p = fit_plain(&train, &val, &cfg, PlainSoftmax::Exact).unwrap();
    assert!((accuracy(&r.weights, &test) - accuracy(&p.weights, &test)).abs() <= 0.01);

    assert_eq!(r.server_violations, 0);
    assert!(r.audit.iter().all(|e| e.role != Role::Server));
    let client_weights = r
        .audit
        .iter()
        .find(|e| e.role == Role::Client && e.kind == DataKind::Weights)
        .map(|e| e.count);
    assert_eq!(client_weights, Some(1));

    let mut total = r.setup_counts;
    for s in &r.steps {
        total += s.counts;
    }
    for e in &r.epochs {
        total += e.counts;
    }
    assert_eq!(total, r.counts);
    assert!(r.counts.bootstrap > 0);
    assert!(r.steps.iter().all(|s| s.logit_max.unwrap() <= 128.0 && s.logit_min.unwrap() >= -128.0));

    // Early stopping hands back the weights of the best validation epoch.
    let best = r
        .epochs
        .iter()
        .min_by(|a, b| a.val_loss.partial_cmp(&b.val_loss).unwrap())
        .unwrap();
    assert_eq!(best.epoch, r.best_epoch);
    assert_eq!(r.best_epoch, p.best_epoch);
}

#[test]
fn separable_two_class_problem_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let feats = Array2::from_shape_fn((n, 2), |(i, j)| {
        let sign = if labels[i] == 0 { -1.0 } else { 1.0 };
        sign * (1.0 + j as f64) + rng.random_range(-0.5..0.5)
    });
    let data = Dataset::new(feats, labels, 2).unwrap();
    let cfg = TrainConfig { learning_rate: 0.5, ..Default::default() };
    let (he, sk) = desk();
    let r = fit(&he, &sk, &data, &data.slice(0, 50), &cfg).unwrap();
    assert!(r.epochs.len() <= 20);
    assert!(accuracy(&r.weights, &data) >= 0.99);
}

#[test]
fn step_without_bootstrapping_fails_with_depth_exhausted() {
    let (he, _) = desk();
    let he = he.with_auto_bootstrap(false);
    let [train, _, _] = reference_mixture(1).unwrap();
    let mut server = Server::new(&he, TrainConfig::default(), &initial_weights(3, 17, 1)).unwrap();
    let d = train.slice(0, 64);
    let xe = encode(&he, &d.design(), Tiling::None).unwrap();
    let ye = encode(&he, &d.one_hot(), Tiling::fill_horizontal(he.context(), 3).unwrap()).unwrap();
    assert!(matches!(server.nag_step(&xe, &ye), Err(Error::DepthExhausted { .. })));
}

#[test]
fn messages_round_trip_through_records() {
    let (he, _) = desk();
    let ctx = he.context().clone();
    let m = encode(&he, &random(10, 3, 7), Tiling::fill_horizontal(&ctx, 3).unwrap()).unwrap();
    let x = encode(&he, &random(10, 17, 8), Tiling::None).unwrap();
    let msgs: Vec<Message<CipherBlock>> = vec![
        Message::EncryptedBatch { purpose: BatchPurpose::Train, x: x.clone(), y: Some(m.clone()) },
        Message::EncryptedBatch { purpose: BatchPurpose::Validation, x, y: None },
        Message::EncryptedValLogits(m.clone()),
        Message::StopSignal(Decision::Continue { improved: true }),
        Message::StopSignal(Decision::Stop),
        Message::FinalWeights(m),
    ];
    let mut stream = Vec::new();
    for msg in &msgs {
        let rec = encode_message(msg);
        assert_eq!(rec[4], msg.type_byte());
        assert_eq!(u32::from_le_bytes(rec[..4].try_into().unwrap()) as usize, rec.len() - 4);
        write_record(&mut stream, &rec).unwrap();
    }
    let mut cursor = std::io::Cursor::new(stream);
    for msg in &msgs {
        let back: Message<CipherBlock> = decode_message(&read_record(&mut cursor).unwrap(), &ctx).unwrap();
        assert_eq!(encode_message(&back), encode_message(msg));
    }
}

#[test]
fn malformed_records_are_rejected() {
    let (he, _) = desk();
    let ctx = he.context().clone();
    let rec = encode_message::<CipherBlock>(&Message::FinalWeights(
        encode(&he, &random(3, 3, 9), Tiling::fill_vertical(&ctx, 3).unwrap()).unwrap(),
    ));
    assert!(decode_message::<CipherBlock>(&rec[..rec.len() - 1], &ctx).is_err());
    let mut bad = rec.clone();
    bad[4] = 9;
    assert!(matches!(decode_message::<CipherBlock>(&bad, &ctx), Err(Error::Protocol(_))));
    let other = Context::new(32, 32, 12).unwrap();
    assert!(decode_message::<CipherBlock>(&rec, &other).is_err());
}

#[test]
fn endpoints_deliver_in_order_and_report_empty_queues() {
    let (mut a, mut b) = duplex();
    a.send::<CipherBlock>(&Message::StopSignal(Decision::Stop)).unwrap();
    a.send::<CipherBlock>(&Message::StopSignal(Decision::Continue { improved: false })).unwrap();
    let ctx = Context::desk();
    assert!(matches!(b.recv::<CipherBlock>(&ctx).unwrap(), Message::StopSignal(Decision::Stop)));
    assert!(matches!(b.recv::<CipherBlock>(&ctx).unwrap(), Message::StopSignal(Decision::Continue { .. })));
    assert!(matches!(b.recv::<CipherBlock>(&ctx), Err(Error::Protocol(_))));
    assert_eq!(a.sent_bytes(), 12);
}

#[test]
fn server_rejects_client_only_messages() {
    let (he, _) = desk();
    let mut server = Server::new(&he, TrainConfig::default(), &initial_weights(3, 17, 1)).unwrap();
    assert!(server.receive(Message::StopSignal(Decision::Stop)).is_err());
    assert!(matches!(server.validation_logits(), Err(Error::Protocol(_))));
}

#[test]
fn per_step_counts_are_identical_across_steps() {
    let [train, val, _] = reference_mixture(2).unwrap();
    let cfg = TrainConfig { max_epochs: 1, trace: false, ..Default::default() };
    let (he, sk) = desk();
    let r = fit(&he, &sk, &train, &val, &cfg).unwrap();
    assert_eq!(r.steps.len(), 8);
    assert!(r.steps.iter().all(|s| s.logit_min.is_none()));
    let no_boot = |c: OpCounts| OpCounts { bootstrap: 0, ..c };
    assert!(r.steps[1..7].iter().all(|s| no_boot(s.counts).mult == no_boot(r.steps[1].counts).mult));
    assert_eq!(r.audit.iter().filter(|e| e.role == Role::Instrumentation).count(), 0);
}
