use std::path::Path;

use weakcal::dataio::{load_dataset, save_dataset, DataioError, RunConfig, RECORDS_FILE};
use weakcal::sme::{generate_dataset, ConstrainedParams};
use weakcal::{DatasetMeta, PhysicalModel};

fn meta(grid: Vec<f64>, counts: Vec<usize>) -> DatasetMeta {
    let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
    DatasetMeta::new(m, 0.04, 0.004, grid, counts, 17)
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn empty_dataset_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    let d = generate_dataset(&meta(vec![0.4], vec![0])).unwrap();
    assert!(d.is_empty());
    save_dataset(tmp.path(), &d).unwrap();
    assert_eq!(load_dataset(tmp.path()).unwrap(), d);
}

#[test]
fn thousand_shots_roundtrip_and_resave_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = meta(vec![0.0, 0.4, 1.0, 2.0], vec![14; 4]);
    m.store_truth = true;
    let d = generate_dataset(&m).unwrap();
    // 6 preparations x 3 axes per duration
    assert_eq!(d.len(), 1008);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    save_dataset(&a, &d).unwrap();
    let back = load_dataset(&a).unwrap();
    assert_eq!(back, d);
    save_dataset(&b, &back).unwrap();
    assert_eq!(read_all(&a), read_all(&b));
}

#[test]
fn truncation_names_the_last_shot() {
    let tmp = tempfile::tempdir().unwrap();
    let d = generate_dataset(&meta(vec![0.4, 0.8], vec![5, 5])).unwrap();
    save_dataset(tmp.path(), &d).unwrap();
    let path = tmp.path().join(RECORDS_FILE);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 13]).unwrap();
    match load_dataset(tmp.path()) {
        Err(DataioError::TruncatedStream { shot }) => assert_eq!(shot, d.len() - 1),
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn corrupted_payload_fails_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let d = generate_dataset(&meta(vec![0.4], vec![4])).unwrap();
    save_dataset(tmp.path(), &d).unwrap();
    let path = tmp.path().join(RECORDS_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[12] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_dataset(tmp.path()), Err(DataioError::ChecksumMismatch { .. })));
}

#[test]
fn config_drives_generation() {
    let cfg = RunConfig::from_json(r#"{"data": {"t_grid": [0.0, 0.8], "counts": [3, 4], "seed": 9}}"#).unwrap();
    let d = generate_dataset(&cfg.dataset_meta().unwrap()).unwrap();
    assert_eq!(d.len(), 18 * 7);
    assert!(RunConfig::from_json(r#"{"data": {"nonsense": 1}}"#).is_err());
}
