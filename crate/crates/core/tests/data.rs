mod support;

use std::fs;
use std::path::Path;

use dseno_core::data::format::{decode_any, encode};
use dseno_core::data::synthetic::darcy_pairs;
use dseno_core::data::{
    darcy_subsample, load_dataset, ns_windows, read_any, read_tensor, select_channels, write_tensor, AnyTensor,
    DatasetManifest, NormPolicy, Normalizer, SplitKind, Windowing,
};
use dseno_core::{Error, ErrorKind, Tensor};
use proptest::prelude::*;
use rand::Rng;
use support::{random, rng};

fn random_f32(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.random_range(-10.0f32..10.0))
}

#[test]
fn f32_tensor_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.dsnt");
    let x = random_f32(&[2, 3, 4, 5], 1);
    write_tensor(&path, &x).unwrap();
    let back: Tensor<f32> = read_tensor(&path).unwrap();
    assert_eq!(back.shape(), x.shape());
    assert!(back.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(matches!(read_any(&path).unwrap(), AnyTensor::F32(_)));
}

#[test]
fn header_layout_is_fixed() {
    let bytes = encode(&Tensor::<f64>::from_vec(&[2, 1], vec![1.0, -2.0]).unwrap());
    assert_eq!(&bytes[..4], b"DSNT");
    assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
    assert_eq!(bytes[6], 1, "float64 code");
    assert_eq!(bytes[7], 2, "rank");
    assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
    assert_eq!(&bytes[16..24], &1u64.to_le_bytes());
    assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
    assert_eq!(bytes.len(), 40);
}

#[test]
fn unknown_dtype_byte_is_rejected() {
    let mut bytes = encode(&random_f32(&[3], 2));
    bytes[6] = 7;
    let err = decode_any(&bytes, Path::new("t")).unwrap_err();
    assert!(err.to_string().contains("unknown dtype"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn corrupt_files_are_rejected() {
    let good = encode(&random_f32(&[4, 4], 3));
    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(decode_any(&magic, Path::new("t")).unwrap_err().to_string().contains("bad magic"));
    let truncated = &good[..good.len() - 1];
    assert!(decode_any(truncated, Path::new("t")).unwrap_err().to_string().contains("truncated payload"));
    let mut version = good.clone();
    version[4] = 2;
    assert!(decode_any(&version, Path::new("t")).unwrap_err().to_string().contains("version"));
    assert!(decode_any(&good[..5], Path::new("t")).is_err());
}

#[test]
fn strict_read_reports_dtype_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.dsnt");
    write_tensor(&path, &random_f32(&[2], 4)).unwrap();
    assert!(matches!(read_tensor::<f64>(&path), Err(Error::DTypeMismatch { .. })));
}

#[test]
fn subsample_stride_five_gives_85() {
    let x = Tensor::<f64>::from_fn(&[1, 421, 421], |i| i as f64);
    let y = darcy_subsample(&x, 5).unwrap();
    assert_eq!(y.shape(), &[1, 85, 85]);
    assert_eq!(y.data()[84 * 85 + 84], (420 * 421 + 420) as f64);
}

#[test]
fn subsample_stride_one_is_identity() {
    let x = Tensor::<f64>::from_fn(&[2, 421, 421], |i| (i as f64).sin());
    assert_eq!(darcy_subsample(&x, 1).unwrap(), x);
}

#[test]
fn subsample_stride_four_matches_index_arithmetic() {
    let (n, s) = (421, 4);
    let x = Tensor::<f64>::from_fn(&[1, n, n], |i| (i / n * 1000 + i % n) as f64);
    let y = darcy_subsample(&x, s).unwrap();
    let r = (n - 1) / s + 1;
    assert_eq!((r, y.shape()), (106, &[1, 106, 106][..]));
    for (a, b) in [(0, 0), (0, r - 1), (r - 1, 0), (r - 1, r - 1)] {
        assert_eq!(y.data()[a * r + b], (a * s * 1000 + b * s) as f64);
    }
}

#[test]
fn subsample_rejects_non_divisor() {
    let x = Tensor::<f64>::zeros(&[1, 421, 421]);
    assert!(darcy_subsample(&x, 8).is_err());
    assert!(darcy_subsample(&x, 0).is_err());
}

#[test]
fn ns_windows_slice_frames() {
    let (t, h, w) = (20, 3, 4);
    let traj = Tensor::<f64>::from_fn(&[1, t, h, w], |i| i as f64);
    let (x, y) = ns_windows(&traj, 10, 10).unwrap();
    assert_eq!(x.shape(), &[10, h, w]);
    assert_eq!(y.shape(), &[10, h, w]);
    assert_eq!(x.data(), &traj.data()[..10 * h * w]);
    assert_eq!(y.data(), &traj.data()[10 * h * w..]);

    let reversed = Tensor::<f64>::from_fn(&[1, t, h, w], |i| {
        let (f, rest) = (i / (h * w), i % (h * w));
        traj.data()[(t - 1 - f) * h * w + rest]
    });
    let (rx, ry) = ns_windows(&reversed, 10, 10).unwrap();
    for f in 0..10 {
        let plane = |z: &Tensor<f64>, k: usize| z.data()[k * h * w..(k + 1) * h * w].to_vec();
        assert_eq!(plane(&rx, f), plane(&traj, t - 1 - f));
        assert_eq!(plane(&ry, f), plane(&traj, 9 - f));
    }
    assert!(ns_windows(&traj, 10, 11).is_err());
}

#[test]
fn vector_trajectories_stack_component_major() {
    let traj = Tensor::<f64>::from_fn(&[2, 5, 1, 1], |i| i as f64);
    let (x, y) = ns_windows(&traj, 3, 2).unwrap();
    assert_eq!(x.data(), &[0.0, 1.0, 2.0, 5.0, 6.0, 7.0]);
    assert_eq!(y.data(), &[3.0, 4.0, 8.0, 9.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn subsample_commutes_with_channel_selection(seed in any::<u64>(), c in 2usize..5, lo in 0usize..2) {
        let x = random(&[2, c, 13, 13], &mut rng(seed));
        let hi = c.min(lo + 2);
        let a = darcy_subsample(&select_channels(&x, lo, hi).unwrap(), 4).unwrap();
        let b = select_channels(&darcy_subsample(&x, 4).unwrap(), lo, hi).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalizer_ignores_sample_order(seed in any::<u64>()) {
        let x = random(&[6, 3, 5, 4], &mut rng(seed));
        let mut order: Vec<usize> = (0..6).collect();
        order.rotate_left((seed % 6) as usize);
        order.swap(0, 5);
        let plane = 3 * 5 * 4;
        let permuted = Tensor::from_fn(x.shape(), |i| x.data()[order[i / plane] * plane + i % plane]);
        let (a, b) = (Normalizer::fit(&x).unwrap(), Normalizer::fit(&permuted).unwrap());
        for (u, v) in a.mean().iter().zip(b.mean()).chain(a.scale().iter().zip(b.scale())) {
            prop_assert!((u - v).abs() <= 1e-7 * u.abs().max(1.0));
        }
    }

    #[test]
    fn encode_decode_round_trip_f32(seed in any::<u64>(), offset in -100.0f32..100.0, spread in 0.01f32..50.0) {
        let mut r = rng(seed);
        let x = Tensor::<f32>::from_fn(&[4, 2, 6, 6], |_| offset + spread * r.random_range(-1.0f32..1.0));
        let norm = Normalizer::fit(&x).unwrap();
        let back = norm.decode(&norm.encode(&x).unwrap()).unwrap();
        for (a, b) in x.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(spread));
        }
    }
}

fn write_manifest(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("data.manifest");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn darcy_files_feed_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let (a, u) = darcy_pairs(6, 85, 9).unwrap();
    write_tensor(dir.path().join("a.dsnt"), &a.cast::<f32>()).unwrap();
    write_tensor(dir.path().join("u.dsnt"), &u.cast::<f32>()).unwrap();
    let reread: Tensor<f32> = read_tensor(dir.path().join("u.dsnt")).unwrap();
    assert_eq!(reread, u.cast::<f32>());

    let path = write_manifest(
        dir.path(),
        "name = darcy\nn_train = 4\nn_test = 2\ninputs = a.dsnt\ntargets = u.dsnt\n\
         mesh = 85, 85\nchannels = a, u\nnormalize = zscore\nappend_coords = true\n",
    );
    let m = DatasetManifest::load(&path).unwrap();
    let data = load_dataset::<f32>(&m).unwrap();
    assert_eq!((data.train.len(), data.test.len()), (4, 2));
    let s = data.sample(SplitKind::Test, 1).unwrap();
    assert_eq!(s.input.shape(), &[1, 85, 85]);
    assert_eq!(s.encoded_input.shape(), &[3, 85, 85]);
    assert_eq!(s.target.data(), &u.cast::<f32>().data()[5 * 85 * 85..]);
    assert_eq!(data.model_in_channels(), 3);

    // Rendering and reparsing keeps every field.
    let again = DatasetManifest::parse(&m.render(dir.path()), dir.path(), "again").unwrap();
    assert_eq!(again, m);
}

#[test]
fn loader_subsamples_and_checks_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let x = Tensor::<f64>::from_fn(&[3, 1, 21, 21], |i| (i as f64 * 0.1).sin());
    write_tensor(dir.path().join("x.dsnt"), &x).unwrap();
    write_tensor(dir.path().join("y.dsnt"), &x.map(|v| 2.0 * v)).unwrap();
    let base = "n_train = 2\nn_test = 1\ninputs = x.dsnt\ntargets = y.dsnt\nsubsample = 4\n";
    let ok = write_manifest(dir.path(), &format!("{base}mesh = 6, 6\n"));
    let data = load_dataset::<f64>(&DatasetManifest::load(&ok).unwrap()).unwrap();
    assert_eq!(data.mesh(), (6, 6));
    let bad = write_manifest(dir.path(), &format!("{base}mesh = 21, 21\n"));
    let err = load_dataset::<f64>(&DatasetManifest::load(&bad).unwrap()).unwrap_err();
    assert!(err.to_string().contains("does not match manifest mesh"), "{err}");
}

#[test]
fn empty_paths_and_missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path(), "name = empty\nn_train = 1\nn_test = 1\ninputs =\nmesh = 4, 4\n");
    let err = load_dataset::<f32>(&DatasetManifest::load(&path).unwrap()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(err.to_string().contains("no inputs path"));

    let path = write_manifest(dir.path(), "n_train = 1\nn_test = 1\ninputs = gone.dsnt\ntargets = gone.dsnt\nmesh = 4, 4\n");
    let err = load_dataset::<f32>(&DatasetManifest::load(&path).unwrap()).unwrap_err();
    assert!(err.to_string().contains("gone.dsnt"), "{err}");
}

#[test]
fn too_many_requested_samples_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = Tensor::<f32>::zeros(&[3, 1, 4, 4]).map(|_| 1.0);
    write_tensor(dir.path().join("x.dsnt"), &x).unwrap();
    let path = write_manifest(dir.path(), "n_train = 3\nn_test = 1\ninputs = x.dsnt\ntargets = x.dsnt\nmesh = 4, 4\n");
    assert!(load_dataset::<f32>(&DatasetManifest::load(&path).unwrap()).is_err());
}

#[test]
fn overlapping_sample_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let x = random(&[3, 1, 4, 4], &mut rng(5));
    write_tensor(dir.path().join("x.dsnt"), &x).unwrap();
    write_tensor(dir.path().join("ids.dsnt"), &Tensor::<f64>::from_vec(&[3], vec![10.0, 11.0, 10.0]).unwrap()).unwrap();
    let path = write_manifest(
        dir.path(),
        "n_train = 2\nn_test = 1\ninputs = x.dsnt\ntargets = x.dsnt\nmesh = 4, 4\nsample_ids = ids.dsnt\n",
    );
    let err = load_dataset::<f64>(&DatasetManifest::load(&path).unwrap()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn unknown_manifest_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path(), "n_train = 1\nn_test = 1\nmesh = 4, 4\ncolour = blue\n");
    assert!(DatasetManifest::load(&path).unwrap_err().to_string().contains("colour"));
}

#[test]
fn trajectory_manifest_windows_and_pools_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let traj = random(&[3, 20, 8, 8], &mut rng(6));
    write_tensor(dir.path().join("w.dsnt"), &traj).unwrap();
    let path = write_manifest(
        dir.path(),
        "name = ns\nn_train = 2\nn_test = 1\ninputs = w.dsnt\nmesh = 8, 8\nchannels = w\nns_history = 10\nns_horizon = 10\n",
    );
    let m = DatasetManifest::load(&path).unwrap();
    assert_eq!(m.windowing, Some(Windowing { history: 10, horizon: 10 }));
    assert_eq!(m.normalize, NormPolicy::ZScore);
    let data = load_dataset::<f64>(&m).unwrap();
    assert_eq!(data.train.inputs.shape(), &[2, 10, 8, 8]);
    assert_eq!(data.train.targets.shape(), &[2, 10, 8, 8]);
    assert_eq!(data.model_in_channels(), 10);
    assert_eq!(data.model_out_channels(), 1);
    let norm = data.input_norm();
    assert!(norm.mean().iter().all(|&v| v == norm.mean()[0]));
}
