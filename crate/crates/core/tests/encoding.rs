use cipherfit::emulator::{Backend, Context, Emulator, OpCounts, SecretKey};
use cipherfit::encoding::*;
use cipherfit::Error;
use ndarray::{array, s, Array2};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn emu(s0: usize, s1: usize) -> (Emulator, SecretKey) {
    Emulator::new(Context::new(s0, s1, 12).unwrap()).unwrap()
}

fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `a` zero-padded to `rows × cols`.
fn padded(a: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let mut p = Array2::zeros((rows, cols));
    p.slice_mut(s![..a.nrows(), ..a.ncols()]).assign(a);
    p
}

/// Row roll by `k` inside each band of `s0` rows.
fn roll_rows(p: &Array2<f64>, s0: usize, k: usize, cols: impl Fn(usize) -> bool) -> Array2<f64> {
    Array2::from_shape_fn(p.dim(), |(i, j)| {
        if cols(j) {
            p[[i / s0 * s0 + (i % s0 + k) % s0, j]]
        } else {
            p[[i, j]]
        }
    })
}

fn roll_cols(p: &Array2<f64>, s1: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_fn(p.dim(), |(i, j)| p[[i, j / s1 * s1 + (j % s1 + k) % s1]])
}

fn counts(he: &Emulator, f: impl FnOnce()) -> OpCounts {
    let before = he.counts();
    f();
    he.counts() - before
}

fn level(m: &EncodedMatrix<cipherfit::emulator::CipherBlock>) -> u32 {
    m.blocks().iter().filter_map(|b| b.level()).min().unwrap()
}

#[test]
fn three_by_three_fills_one_four_by_four_block_row_major() {
    let (he, sk) = emu(4, 4);
    let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
    let e = encode(&he, &a, Tiling::None).unwrap();
    assert_eq!(e.grid(), (1, 1));
    let slots: Vec<f64> = he.decrypt(&sk, e.block(0, 0)).unwrap().iter().map(|z| z.re).collect();
    assert_eq!(slots, vec![1., 2., 3., 0., 4., 5., 6., 0., 7., 8., 9., 0., 0., 0., 0., 0.]);
}

#[test]
fn thirteen_by_twenty_one_splits_into_six_blocks() {
    let (he, sk) = emu(8, 8);
    let a = random(13, 21, 1);
    let e = encode(&he, &a, Tiling::None).unwrap();
    assert_eq!(e.grid(), (2, 3));
    assert_eq!(e.padded_shape(), (16, 24));
    assert_eq!(decode(&he, Some(&sk), &e).unwrap(), a);
    // The padded region holds exact zeros.
    let last: Vec<f64> = he.decrypt(&sk, e.block(1, 2)).unwrap().iter().map(|z| z.re).collect();
    for i in 0..8 {
        for j in 0..8 {
            if 8 + i >= 13 || 16 + j >= 21 {
                assert_eq!(last[i * 8 + j], 0.0);
            }
        }
    }
}

#[test]
fn tilings_repeat_the_padded_matrix() {
    let (he, sk) = emu(8, 8);
    let b = random(3, 8, 2);
    let v = encode(&he, &b, Tiling::fill_vertical(he.context(), 3).unwrap()).unwrap();
    assert_eq!(v.tiling(), Tiling::Vertical { copies: 2 });
    let slots = he.decrypt(&sk, v.block(0, 0)).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let want = if i % 4 < 3 { b[[i % 4, j]] } else { 0.0 };
            assert_eq!(slots[i * 8 + j].re, want);
        }
    }
    assert_eq!(decode(&he, Some(&sk), &v).unwrap(), b);

    let a = random(5, 2, 3);
    let h = encode(&he, &a, Tiling::fill_horizontal(he.context(), 2).unwrap()).unwrap();
    assert_eq!(h.tiling(), Tiling::Horizontal { copies: 4 });
    let slots = he.decrypt(&sk, h.block(0, 0)).unwrap();
    for i in 0..5 {
        for j in 0..8 {
            assert_eq!(slots[i * 8 + j].re, a[[i, j % 2]]);
        }
    }
    assert!(encode(&he, &a, Tiling::Horizontal { copies: 3 }).is_err());
    assert!(Tiling::fill_vertical(he.context(), 9).is_err());
}

#[test]
fn decode_rejects_residual_imaginary_parts_and_missing_keys() {
    let (he, sk) = emu(4, 4);
    let e = encode(&he, &random(4, 4, 4), Tiling::None).unwrap();
    assert!(matches!(decode(&he, None, &e), Err(Error::Protocol(_))));
    let shifted = e.try_map(|b| Ok(he.add_scalar(b, Complex64::new(0.0, 1e-6)))).unwrap();
    assert!(matches!(decode(&he, Some(&sk), &shifted), Err(Error::ResidualImaginary { .. })));
    let tiny = e.try_map(|b| Ok(he.add_scalar(b, Complex64::new(0.0, 1e-12)))).unwrap();
    assert!(decode(&he, Some(&sk), &tiny).is_ok());
    // Plaintext matrices decode without a key.
    let p = encode_plain(&he, &array![[1.0, 2.0]], Tiling::None).unwrap();
    assert_eq!(decode(&he, None, &p).unwrap(), array![[1.0, 2.0]]);
}

#[test]
fn rot_up_of_a_single_block_is_one_left_rotation() {
    let (he, sk) = emu(4, 8);
    let b = random(4, 8, 5);
    let e = encode(&he, &b, Tiling::None).unwrap();
    let want = he.lrot(e.block(0, 0), 8);
    let d = counts(&he, || {
        let r = rot_up(&he, &e, 1).unwrap();
        assert_eq!(r.blocks()[0], want);
        assert_eq!(level(&r), 12);
    });
    assert_eq!((d.rot, d.cmult), (1, 0));
    // A rotation by the tile period is the identity on a tiled operand.
    let t = encode(&he, &random(2, 8, 6), Tiling::fill_vertical(he.context(), 2).unwrap()).unwrap();
    let back = rot_up(&he, &t, 2).unwrap();
    assert_eq!(decode(&he, Some(&sk), &back).unwrap(), decode(&he, Some(&sk), &t).unwrap());
}

#[test]
fn rot_left_examples() {
    let (he, sk) = emu(4, 4);
    let i4 = Array2::eye(4);
    let e = encode(&he, &i4, Tiling::None).unwrap();
    let d = counts(&he, || {
        let r = rot_left(&he, &e, 0).unwrap();
        assert_eq!(level(&r), 12);
        assert_eq!(decode(&he, Some(&sk), &r).unwrap(), i4);
    });
    assert_eq!(d, OpCounts::default());
    let row = encode(&he, &array![[1.0, 2.0, 3.0, 4.0]], Tiling::None).unwrap();
    let r = rot_left(&he, &row, 1).unwrap();
    assert_eq!(decode(&he, Some(&sk), &r).unwrap(), array![[2.0, 3.0, 4.0, 1.0]]);
    assert_eq!(level(&r), 11);
}

#[test]
fn prot_up_matches_the_partial_roll() {
    let (he, sk) = emu(4, 8);
    let b = Array2::from_shape_fn((4, 8), |(i, j)| (10 * i + j) as f64);
    let e = encode(&he, &b, Tiling::None).unwrap();
    assert_eq!(decode(&he, Some(&sk), &prot_up(&he, &e, 0).unwrap()).unwrap(), b);
    let r = decode(&he, Some(&sk), &prot_up(&he, &e, 3).unwrap()).unwrap();
    let want = Array2::from_shape_fn((4, 8), |(i, j)| if j >= 5 { b[[(i + 1) % 4, j]] } else { b[[i, j]] });
    assert_eq!(r, want);
}

#[test]
fn sums_broadcast() {
    let (he, sk) = emu(4, 4);
    let ones = encode(&he, &Array2::ones((4, 4)), Tiling::None).unwrap();
    assert_eq!(decode(&he, Some(&sk), &col_sums(&he, &ones).unwrap()).unwrap(), Array2::from_elem((4, 4), 4.0));
    assert_eq!(decode(&he, Some(&sk), &row_sums(&he, &ones).unwrap()).unwrap(), Array2::from_elem((4, 4), 4.0));
    let mut one_col = Array2::zeros((4, 4));
    one_col.column_mut(2).assign(&ndarray::arr1(&[1.0, -2.0, 3.0, 0.5]));
    let cs = decode(&he, Some(&sk), &col_sums(&he, &encode(&he, &one_col, Tiling::None).unwrap()).unwrap()).unwrap();
    for j in 0..4 {
        assert_eq!(cs.column(j), one_col.column(2));
    }
}

#[test]
fn complexify_packs_a_row_swapped_copy() {
    let (he, sk) = emu(4, 8);
    let b = random(2, 8, 7);
    let e = encode(&he, &b, Tiling::fill_vertical(he.context(), 2).unwrap()).unwrap();
    let d = counts(&he, || {
        let x = complexify_ru(&he, &e, 2).unwrap();
        assert_eq!(level(&x), 12);
        let slots = he.decrypt(&sk, x.block(0, 0)).unwrap();
        for i in 0..4 {
            for j in 0..8 {
                assert_eq!(slots[i * 8 + j], Complex64::new(b[[i % 2, j]], b[[(i + 1) % 2, j]]));
            }
        }
    });
    assert_eq!((d.cmult, d.mult), (0, 0));
    let a = encode(&he, &random(4, 2, 8), Tiling::fill_horizontal(he.context(), 2).unwrap()).unwrap();
    assert_eq!(level(&complexify_rl(&he, &a, 2).unwrap()), 11);
    assert!(complexify_ru(&he, &e, 3).is_err());
}

#[test]
fn masks() {
    let (he, _) = emu(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let id = DiagMask::new(0, 4).value(i, j).re;
            assert_eq!(id, if i == j { 1.0 } else { 0.0 });
        }
    }
    let row0: Vec<f64> = (0..4).map(|j| DiagMask::new(1, 4).value(0, j).re).collect();
    assert_eq!(row0, vec![0.0, 1.0, 0.0, 0.0]);
    for k in 0..4 {
        let (m, mc) = (DiagMask::new(k, 4), DiagMask::complexified(k, 4));
        for i in 0..4 {
            for j in 0..4 {
                let z = mc.value(i, j);
                assert_eq!(z + z.conj(), m.value(i, j));
            }
        }
    }
    let blk = DiagMask::new(1, 2).scaled(0.5).block(&he).unwrap();
    let slots = he.read_plaintext(&blk).unwrap();
    assert_eq!(slots[1].re, 0.5);
    assert_eq!(slots[0].re, 0.0);
    assert!(DiagMask::new(0, 3).block(&he).is_err());
    assert!(DiagMask::new(4, 4).block(&he).is_err());
}

#[test]
fn per_block_ledger_and_depth_contracts() {
    let (he, _) = emu(8, 16);
    let e = encode(&he, &random(20, 40, 9), Tiling::None).unwrap();
    assert_eq!(e.grid(), (3, 3));
    let n = 9;
    let rl = counts(&he, || assert_eq!(level(&rot_left(&he, &e, 3).unwrap()), 11));
    assert_eq!((rl.cmult, rl.rot, rl.mult), (n, 2 * n, 0));
    let pru = counts(&he, || assert_eq!(level(&prot_up(&he, &e, 3).unwrap()), 11));
    assert_eq!((pru.cmult, pru.rot, pru.mult), (n, n, 0));
    let ru = counts(&he, || assert_eq!(level(&rot_up(&he, &e, 3).unwrap()), 12));
    assert_eq!((ru.cmult, ru.rot), (0, n));
    // Sums first add the block columns (rows), then work per output block.
    let cs = counts(&he, || assert_eq!(level(&col_sums(&he, &e).unwrap()), 11));
    assert_eq!((cs.cmult, cs.rot), (3, 3 * 2 * 4));
    let rs = counts(&he, || assert_eq!(level(&row_sums(&he, &e).unwrap()), 12));
    assert_eq!((rs.cmult, rs.rot), (0, 3 * 3));
}

#[test]
fn structural_ops_fail_at_level_zero_without_bootstrap() {
    let (he, _) = emu(4, 4);
    let he = he.with_auto_bootstrap(false);
    let e = encode_at_level(&he, &random(4, 4, 10), Tiling::None, 0).unwrap();
    assert!(matches!(rot_left(&he, &e, 1), Err(Error::DepthExhausted { .. })));
    assert!(matches!(prot_up(&he, &e, 1), Err(Error::DepthExhausted { .. })));
    assert!(matches!(col_sums(&he, &e), Err(Error::DepthExhausted { .. })));
    assert!(rot_up(&he, &e, 1).is_ok());
    assert!(row_sums(&he, &e).is_ok());
}

fn shapes() -> impl Strategy<Value = (usize, usize, usize, usize, u64)> {
    // (s0, s1, rows, cols, seed): single block, multi-block rows and columns.
    (1usize..4, 1usize..4)
        .prop_flat_map(|(l0, l1)| {
            let (s0, s1) = (1 << (l0 + 1), 1 << (l1 + 1));
            (Just(s0), Just(s1), 1..3 * s0, 1..3 * s1, any::<u64>())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encode_decode_round_trip((s0, s1, rows, cols, seed) in shapes()) {
        let (he, sk) = emu(s0, s1);
        let a = random(rows, cols, seed);
        prop_assert_eq!(decode(&he, Some(&sk), &encode(&he, &a, Tiling::None).unwrap()).unwrap(), a.clone());
        if rows <= s0 {
            let t = Tiling::fill_vertical(he.context(), rows).unwrap();
            prop_assert_eq!(decode(&he, Some(&sk), &encode(&he, &a, t).unwrap()).unwrap(), a.clone());
        }
        if cols <= s1 {
            let t = Tiling::fill_horizontal(he.context(), cols).unwrap();
            prop_assert_eq!(decode(&he, Some(&sk), &encode(&he, &a, t).unwrap()).unwrap(), a);
        }
    }

    #[test]
    fn structural_ops_match_plaintext_oracles((s0, s1, rows, cols, seed) in shapes(), k in 0usize..8) {
        let (he, sk) = emu(s0, s1);
        let a = random(rows, cols, seed);
        let e = encode(&he, &a, Tiling::None).unwrap();
        let (pr, pc) = e.padded_shape();
        let p = padded(&a, pr, pc);
        let crop = |m: Array2<f64>| m.slice(s![..rows, ..cols]).to_owned();
        let dec = |m: &EncodedMatrix<_>| decode(&he, Some(&sk), m).unwrap();

        let ku = k % s0;
        prop_assert!(max_diff(&dec(&rot_up(&he, &e, k).unwrap()), &crop(roll_rows(&p, s0, ku, |_| true))) < 1e-9);
        let kl = k % s1;
        prop_assert!(max_diff(&dec(&rot_left(&he, &e, k).unwrap()), &crop(roll_cols(&p, s1, kl))) < 1e-9);
        let tail = |j: usize| j % s1 >= s1 - kl;
        prop_assert!(max_diff(&dec(&prot_up(&he, &e, k).unwrap()), &crop(roll_rows(&p, s0, 1, tail))) < 1e-9);

        let cs = dec(&col_sums(&he, &e).unwrap());
        let row_tot = a.sum_axis(ndarray::Axis(1));
        prop_assert_eq!(cs.dim(), (rows, s1.min(pc)));
        prop_assert!(cs.indexed_iter().all(|((i, _), v)| (v - row_tot[i]).abs() < 1e-9));
        let rs = dec(&row_sums(&he, &e).unwrap());
        let col_tot = a.sum_axis(ndarray::Axis(0));
        prop_assert_eq!(rs.dim(), (s0.min(pr), cols));
        prop_assert!(rs.indexed_iter().all(|((_, j), v)| (v - col_tot[j]).abs() < 1e-9));
    }
}
