use bidi_zsl::error::HarnessError;
use bidi_zsl::io::{
    load_labels, load_matrix, load_matrix_auto, parse_csv_matrix, save_labels, save_matrix, MatrixFormat,
};
use bidi_zsl_core::RealMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(seed: u64, r: usize, c: usize) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealMatrix::from_fn(r, c, |_, _| rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-12..12)))
}

#[test]
fn bin_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let m = random(1, 10, 7);
    let p = dir.path().join("m.bin");
    save_matrix(&m, &p, MatrixFormat::Bin).unwrap();
    let back = load_matrix(&p, MatrixFormat::Bin).unwrap();
    assert_eq!(back.shape(), (10, 7));
    for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn csv_literal() {
    let m = parse_csv_matrix("1,2\n3,4", "inline").unwrap();
    assert_eq!(m, RealMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
}

#[test]
fn truncated_bin_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bin");
    save_matrix(&random(2, 4, 4), &p, MatrixFormat::Bin).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    for cut in [0, 3, 20, bytes.len() - 1] {
        std::fs::write(&p, &bytes[..cut]).unwrap();
        let err = load_matrix_auto(&p).unwrap_err();
        assert!(matches!(err, HarnessError::Parse { .. }), "{err}");
        assert_eq!(err.category(), "parse");
    }
}

#[test]
fn ragged_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    std::fs::write(&p, "1,2,3\n4,5,6\n7,8\n").unwrap();
    match load_matrix_auto(&p) {
        Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_matrix_auto(&dir.path().join("missing.csv")), Err(HarnessError::Io { .. })));
}

#[test]
fn csv_and_bin_agree_on_shared_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let m = random(3, 6, 5);
    save_matrix(&m, &dir.path().join("f.csv"), MatrixFormat::Csv).unwrap();
    save_matrix(&m, &dir.path().join("f.bin"), MatrixFormat::Bin).unwrap();
    let a = load_matrix_auto(&dir.path().join("f.csv")).unwrap();
    let b = load_matrix_auto(&dir.path().join("f.bin")).unwrap();
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - y).abs() <= 1e-15 * y.abs());
    }
}

#[test]
fn labels_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.csv");
    save_labels(&[3, 1, 4, 1, 5], &p).unwrap();
    assert_eq!(load_labels(&p).unwrap(), vec![3, 1, 4, 1, 5]);
    std::fs::write(&p, "2,9\n0,7\n1,8\n").unwrap();
    assert_eq!(load_labels(&p).unwrap(), vec![7, 8, 9]);
    std::fs::write(&p, "0,7\n2,8\n").unwrap();
    assert!(matches!(load_labels(&p), Err(HarnessError::Parse { .. })));
    std::fs::write(&p, "instance_id,label\n0,7\n1,x\n").unwrap();
    match load_labels(&p) {
        Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_within_tolerance(seed in any::<u64>(), r in 1usize..8, c in 1usize..8) {
        let dir = tempfile::tempdir().unwrap();
        let m = random(seed, r, c);
        let p = dir.path().join("m.csv");
        save_matrix(&m, &p, MatrixFormat::Csv).unwrap();
        let back = load_matrix_auto(&p).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs());
        }
    }

    #[test]
    fn bin_round_trip_any_values(seed in any::<u64>(), r in 1usize..6, c in 1usize..6) {
        let m = random(seed, r, c);
        let back = bidi_zsl::io::decode_bin(&bidi_zsl::io::encode_bin(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}
