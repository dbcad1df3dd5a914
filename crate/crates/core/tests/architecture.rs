use obf_core::model::TaskSet;
use obf_core::{Backbone, ModelConfig, ObfModel};

fn encoder_params(backbone: Backbone, hidden: usize, use_conv: bool) -> usize {
    let cfg = ModelConfig {
        backbone,
        hidden,
        use_conv,
        ..ModelConfig::default()
    };
    ObfModel::new(cfg, TaskSet::all(), 0)
        .unwrap()
        .encoder_param_count()
}

/// Recurrent layer with `gates` gate blocks, each holding input weights,
/// recurrent weights and two bias vectors.
fn recurrent_layer(gates: usize, input: usize, hidden: usize) -> usize {
    gates * (hidden * input + hidden * hidden + 2 * hidden)
}

/// Two recurrent layers behind the optional 2 -> 30 channel, width-7 conv.
fn closed_form(gates: usize, hidden: usize, use_conv: bool) -> usize {
    let (conv, input) = if use_conv {
        (2 * 30 * 7 + 30, 30)
    } else {
        (0, 2)
    };
    conv + recurrent_layer(gates, input, hidden) + recurrent_layer(gates, hidden, hidden)
}

#[test]
fn recurrent_counts_match_the_closed_form() {
    for hidden in [8, 32, 64, 128, 256] {
        for use_conv in [true, false] {
            assert_eq!(
                encoder_params(Backbone::Rnn, hidden, use_conv),
                closed_form(1, hidden, use_conv)
            );
            assert_eq!(
                encoder_params(Backbone::Gru, hidden, use_conv),
                closed_form(3, hidden, use_conv)
            );
            assert_eq!(
                encoder_params(Backbone::Lstm, hidden, use_conv),
                closed_form(4, hidden, use_conv)
            );
        }
    }
}

fn within(count: usize, reported: f64, tol: f64) -> bool {
    (count as f64 - reported).abs() <= tol * reported
}

#[test]
fn backbone_sizes_are_near_the_published_ones() {
    let cases = [
        (Backbone::Gru, 128, true, 163_000.0),
        (Backbone::Rnn, 128, true, 55_000.0),
        (Backbone::Lstm, 128, true, 217_000.0),
        (Backbone::Transformer, 128, true, 343_000.0),
        (Backbone::Gru, 128, false, 150_000.0),
        (Backbone::Gru, 64, true, 46_000.0),
        (Backbone::Gru, 256, true, 620_000.0),
    ];
    for (backbone, hidden, conv, reported) in cases {
        let n = encoder_params(backbone, hidden, conv);
        assert!(
            within(n, reported, 0.05),
            "{backbone:?} {hidden} conv={conv}: {n} vs {reported}"
        );
    }
}

#[test]
fn smallest_gru_is_below_its_published_size() {
    // The published 2x32 size (15k) implies ~2k parameters that no layer of
    // this architecture accounts for; the other sizes absorb the same gap
    // within tolerance.
    let n = encoder_params(Backbone::Gru, 32, true);
    assert_eq!(n, 12_930);
    assert!(!within(n, 15_000.0, 0.05));
}

#[test]
fn embedding_dims() {
    let dim = |backbone| {
        ModelConfig {
            backbone,
            ..ModelConfig::default()
        }
        .embedding_dim()
    };
    assert_eq!(dim(Backbone::Gru), 256);
    assert_eq!(dim(Backbone::Lstm), 512);
    assert_eq!(dim(Backbone::Rnn), 256);
    assert_eq!(dim(Backbone::Transformer), 256);
}
