use std::fs;
use std::path::Path;

use obf::corpus::{load_corpus, load_dataset, Recordings};
use obf::recording::{parse_raw, write_raw};
use obf_core::RawSample;
use proptest::prelude::*;

const GEOMETRY: &str = "native_hz = 500\nwidth_px = 1920\nheight_px = 1080\n\
                        width_mm = 531\nheight_mm = 299\nviewing_distance_mm = 650\n";

fn dataset(dir: &Path, tag: &str, files: &[(&str, &str)]) {
    fs::create_dir_all(dir).unwrap();
    let mut m = format!("format = raw\nsource_tag = {tag}\n{GEOMETRY}");
    for (i, (name, body)) in files.iter().enumerate() {
        fs::write(dir.join(name), body).unwrap();
        m.push_str(&format!("file = {name}, p{i}, s{i}\n"));
    }
    fs::write(dir.join("manifest.txt"), m).unwrap();
}

fn samples(n: usize) -> Vec<RawSample> {
    (0..n)
        .map(|i| RawSample {
            t_ms: i as f64 * 2.0,
            left: Some([900.0 + i as f64, 500.0]),
            right: (i % 3 != 0).then_some([901.0, 501.0]),
            valid: true,
        })
        .collect()
}

#[test]
fn one_valid_csv_gives_one_recording_with_all_samples() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), "lab", &[("a.csv", &write_raw(&samples(37)))]);
    let d = load_dataset(tmp.path()).unwrap();
    let Recordings::Raw(recs) = &d.recordings else {
        panic!("raw dataset")
    };
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].samples.len(), 37);
    assert_eq!(
        (
            recs[0].participant_id.as_str(),
            recs[0].stimulus_id.as_str()
        ),
        ("p0", "s0")
    );
    assert_eq!(recs[0].native_hz, 500.0);
}

#[test]
fn empty_roster_gives_no_recordings() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), "lab", &[]);
    let d = load_dataset(tmp.path()).unwrap();
    assert_eq!(d.recordings, Recordings::Raw(vec![]));
}

#[test]
fn non_monotone_file_is_skipped_and_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = "t_ms,lx,ly,rx,ry,valid\n0,1,1,,,1\n4,1,1,,,1\n3,1,1,,,1\n";
    dataset(
        tmp.path(),
        "lab",
        &[("bad.csv", bad), ("good.csv", &write_raw(&samples(5)))],
    );
    let d = load_dataset(tmp.path()).unwrap();
    let Recordings::Raw(recs) = &d.recordings else {
        panic!("raw dataset")
    };
    assert_eq!(recs.len(), 1);
    assert_eq!(d.entries[0].path, "good.csv");
    assert!(d.reports[0].skipped());
    assert_eq!(d.reports[0].issues[0].line, 4);
}

#[test]
fn missing_manifest_and_bad_geometry_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(load_dataset(tmp.path()).is_err());
    fs::write(
        tmp.path().join("manifest.txt"),
        GEOMETRY.replace("width_mm = 531", "width_mm = -1") + "format = raw\nsource_tag = x\n",
    )
    .unwrap();
    let err = load_dataset(tmp.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn source_tags_must_be_unique_across_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(&tmp.path().join("one"), "lab", &[]);
    dataset(&tmp.path().join("two"), "lab", &[]);
    assert!(load_corpus(tmp.path()).is_err());
    dataset(&tmp.path().join("two"), "other", &[]);
    assert_eq!(load_corpus(tmp.path()).unwrap().len(), 2);
}

fn row() -> impl Strategy<Value = String> {
    let cell = prop_oneof![
        Just(String::new()),
        (-1000.0f64..3000.0).prop_map(|v| v.to_string()),
        Just("nan".to_string()),
        Just("abc".to_string()),
    ];
    let valid = prop_oneof![Just("1"), Just("0"), Just("2"), Just("")];
    (
        0.0f64..1000.0,
        proptest::collection::vec(cell, 4),
        valid,
        0usize..4,
    )
        .prop_map(|(t, cells, v, shape)| {
            match shape {
                // wrong field count
                0 => format!("{t},{}", cells[0]),
                _ => format!("{t},{},{v}", cells.join(",")),
            }
        })
}

proptest! {
    #[test]
    fn parsed_plus_rejected_equals_row_count(rows in proptest::collection::vec(row(), 0..40)) {
        let text = format!("t_ms,lx,ly,rx,ry,valid\n{}\n", rows.join("\n"));
        let p = parse_raw(&text);
        prop_assert_eq!(p.total_rows, rows.len());
        prop_assert_eq!(p.rows.len() + p.issues.len(), rows.len());
        for w in p.rows.windows(2) {
            prop_assert!(w[0].t_ms < w[1].t_ms);
        }
    }

    #[test]
    fn written_samples_parse_back_exactly(n in 0usize..50, offset in -1e3f64..1e3) {
        let mut s = samples(n);
        s.iter_mut().for_each(|x| x.t_ms += offset);
        let p = parse_raw(&write_raw(&s));
        prop_assert!(p.is_clean());
        prop_assert_eq!(p.rows, s);
    }
}
