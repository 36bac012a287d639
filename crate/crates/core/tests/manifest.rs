use std::fs;

use nalgebra::DMatrix;
use sploc::packets::{load_manifest, write_dataset, TrajectoryFormat};
use sploc::{DataPacket, Label, SplocError};

fn packet(id: &str, label: Label, p: usize, m: usize) -> DataPacket {
    let frames = DMatrix::from_fn(m, p, |r, c| (r * p + c) as f64 * 0.01 + (r % 3) as f64);
    DataPacket::new(id, label, frames, "fixture").unwrap()
}

#[test]
fn dataset_round_trip_in_both_formats() {
    for format in [TrajectoryFormat::Csv, TrajectoryFormat::Binary] {
        let dir = tempfile::tempdir().unwrap();
        let packets = vec![
            packet("EFL.1", Label::Functional, 4, 5),
            packet("EFL.2", Label::Functional, 4, 6),
            packet("FFF.1", Label::Nonfunctional, 4, 5),
        ];
        let path = write_dataset(dir.path(), &packets, Some(2), format, Some(7), None).unwrap();
        let manifest = load_manifest(&path).unwrap();
        assert_eq!(manifest.dimension, 4);
        assert_eq!(manifest.atoms, Some(2));
        assert_eq!(manifest.seed, Some(7));
        assert_eq!(manifest.count(Label::Functional), 2);
        assert_eq!(manifest.packets[1].frames, 6);
        let loaded = manifest.load_packets().unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in loaded.iter().zip(&packets) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.label(), b.label());
            assert_eq!(a.frames(), b.frames());
        }
    }
}

fn write_manifest(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("manifest.json");
    fs::write(&path, body).unwrap();
    path
}

fn write_csv(dir: &std::path::Path, name: &str, rows: &[&str]) {
    fs::write(dir.join(name), rows.join("\n") + "\n").unwrap();
}

#[test]
fn manifest_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_csv(d, "a.csv", &["1,2,3,4", "2,3,4,5"]);
    write_csv(d, "b.csv", &["1,2,3", "2,3,4"]);

    let empty = write_manifest(d, r#"{"dimension": 4, "packets": []}"#);
    assert!(matches!(load_manifest(&empty), Err(SplocError::Manifest(_))));

    let missing = write_manifest(
        d,
        r#"{"dimension": 4, "packets": [{"id": "x", "label": "functional", "path": "nope.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&missing).is_err());

    let width = write_manifest(
        d,
        r#"{"dimension": 4, "packets": [{"id": "x", "label": "functional", "path": "b.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&width).is_err());

    let dup = write_manifest(
        d,
        r#"{"dimension": 4, "packets": [
            {"id": "x", "label": "functional", "path": "a.csv", "format": "csv"},
            {"id": "x", "label": "nonfunctional", "path": "a.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&dup).is_err());

    let label = write_manifest(
        d,
        r#"{"dimension": 4, "packets": [{"id": "x", "label": "maybe", "path": "a.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&label).is_err());

    let atoms = write_manifest(
        d,
        r#"{"dimension": 4, "atoms": 3, "packets": [{"id": "x", "label": "functional", "path": "a.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&atoms).is_err());

    let ok = write_manifest(
        d,
        r#"{"dimension": 4, "atoms": 2, "packets": [{"id": "x", "label": "functional", "path": "a.csv", "format": "csv"}]}"#,
    );
    let m = load_manifest(&ok).unwrap();
    assert_eq!(m.packets[0].frames, 2);
}

#[test]
fn malformed_csv_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_csv(d, "bad.csv", &["1,2,3,4", "2,x,4,5"]);
    let path = write_manifest(
        d,
        r#"{"dimension": 4, "packets": [{"id": "x", "label": "functional", "path": "bad.csv", "format": "csv"}]}"#,
    );
    assert!(load_manifest(&path).is_err());
}
