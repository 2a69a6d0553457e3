//! On-disk formats survive a write/read cycle.

use reltrack::config::{parse_kv, Config};
use reltrack::features::FeatureProvider;
use reltrack::head::HeadParams;
use reltrack::mot::{read_mot_file, read_seqinfo, track_rows};
use reltrack::synth::{generate, ScenarioSpec};

#[test]
fn synthetic_sequence_directory_round_trips() {
    let seq = generate(&ScenarioSpec {
        length: 6,
        width: 128,
        height: 96,
        n_targets: 3,
        size_range: (16.0, 24.0),
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    seq.write_to(dir.path(), true).unwrap();

    let gt = track_rows(&read_mot_file(&dir.path().join("gt/gt.txt")).unwrap()).unwrap();
    assert_eq!(gt.len(), seq.gt.len());
    for (a, b) in gt.iter().zip(&seq.gt) {
        assert_eq!((a.frame, a.id, a.class_id), (b.frame, b.id, b.class_id));
        assert!((a.bbox.x - b.bbox.x).abs() < 1e-3 && (a.bbox.w - b.bbox.w).abs() < 1e-3);
    }
    let det = read_mot_file(&dir.path().join("det/det.txt")).unwrap();
    assert_eq!(det.len(), seq.detections.len());
    assert_eq!(read_seqinfo(&dir.path().join("seqinfo.ini")).unwrap(), seq.meta);

    let on_disk = FeatureProvider::FileBacked {
        dir: dir.path().join("features"),
    };
    let in_memory = seq.feature_provider().unwrap();
    for f in seq.frames() {
        assert_eq!(on_disk.features(f).unwrap(), in_memory.features(f).unwrap());
    }
}

#[test]
fn weights_round_trip_at_single_precision() {
    let p = HeadParams::random(2, 12, 4, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.p2iw");
    p.save(&path).unwrap();
    assert_eq!(HeadParams::load(&path).unwrap(), p.quantized());
}

#[test]
fn config_serialization_round_trips() {
    let overrides = parse_kv("radius=3\nclass_correction=streaming\npos_weight=4.5\nhidden=16\n").unwrap();
    let cfg = Config::load(None, &overrides).unwrap();
    let again = Config::load(Some(&cfg.to_kv()), &[]).unwrap();
    assert_eq!(cfg, again);
}
