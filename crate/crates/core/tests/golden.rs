//! Decoder outputs of frozen random models, compared bit for bit against
//! `tests/golden/decoders.txt`. Set `OBF_RECORD_GOLDEN=1` to rewrite the file
//! after an intentional change to initialization or decoder math.

use std::fmt::Write as _;
use std::path::PathBuf;

use obf_core::model::TaskSet;
use obf_core::{Backbone, ModelConfig, ObfModel};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/decoders.txt")
}

// Piecewise-linear path built from exact arithmetic only.
fn input() -> Vec<[f64; 2]> {
    (0..64)
        .map(|i| {
            let t = i as f64;
            let x = if i < 32 {
                0.25 * t - 4.0
            } else {
                4.0 - 0.125 * (t - 32.0)
            };
            [x, 0.0625 * ((i * 7) % 23) as f64 - 1.0]
        })
        .collect()
}

fn hex_points(out: &mut String, label: &str, points: &[[f64; 2]]) {
    write!(out, "{label}:").unwrap();
    for p in points {
        write!(out, " {:016x},{:016x}", p[0].to_bits(), p[1].to_bits()).unwrap();
    }
    out.push('\n');
}

fn render() -> String {
    let mut out = String::new();
    for backbone in [Backbone::Gru, Backbone::Transformer] {
        let cfg = ModelConfig {
            backbone,
            hidden: 8,
            conv_channels: 4,
            cl_hidden: 8,
            ..ModelConfig::default()
        };
        let model = ObfModel::new(cfg, TaskSet::all(), 17).unwrap();
        let x = input();
        let e = model.encode(&x).unwrap();
        let name = format!("{backbone:?}").to_lowercase();
        hex_points(
            &mut out,
            &format!("{name} rc free"),
            &model.decode_rc(&e, 12, None).unwrap(),
        );
        hex_points(
            &mut out,
            &format!("{name} rc teacher"),
            &model.decode_rc(&e, 12, Some(&x[..12])).unwrap(),
        );
        hex_points(
            &mut out,
            &format!("{name} pc free"),
            &model.decode_pc(&e, 12, None).unwrap(),
        );
    }
    out
}

#[test]
fn decoders_reproduce_recorded_bits() {
    let text = render();
    let path = golden_path();
    if std::env::var_os("OBF_RECORD_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
        return;
    }
    let recorded = std::fs::read_to_string(&path)
        .expect("golden file missing; record with OBF_RECORD_GOLDEN=1");
    for (got, want) in text.lines().zip(recorded.lines()) {
        assert_eq!(got, want);
    }
    assert_eq!(text.lines().count(), recorded.lines().count());
}

#[test]
fn decoding_is_repeatable_in_process() {
    assert_eq!(render(), render());
}
