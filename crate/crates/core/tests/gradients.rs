use std::time::Instant;

use silkforge::model::{attach_lora, check_model_gradients, init_params, LoraConfig, ModelConfig};
use silkforge::tokenizer::{TokenId, BIN_BASE, EOS, SEP, TASK_EST};

fn batch() -> (Vec<TokenId>, Vec<u8>, Vec<TokenId>, Vec<u8>) {
    let a: Vec<TokenId> = vec![EOS, 0, 7, 7, 0, 15, 19, 7, 7, 5, 0, 0, EOS];
    let b: Vec<TokenId> = vec![TASK_EST, 7, 7, 0, 18, SEP, BIN_BASE + 3, BIN_BASE + 50, BIN_BASE + 100, EOS];
    let ma = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
    let mb = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1];
    (a, ma, b, mb)
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let params = init_params::<f64>(&ModelConfig::desk_tiny(), 11).unwrap();
    let (a, ma, b, mb) = batch();
    let report = check_model_gradients(&params, None, &[(&a, &ma), (&b, &mb)], 200, 1e-5, 1).unwrap();
    assert_eq!(report.groups.len(), params.tensors().len());
    for g in &report.groups {
        assert!(g.max_rel_error < 1e-3, "{}: {}", g.name, g.max_rel_error);
    }
    assert!(t0.elapsed().as_secs() < 60, "{:?}", t0.elapsed());
}

#[test]
fn adapter_gradients_match_finite_differences() {
    let params = init_params::<f64>(&ModelConfig::desk_tiny(), 12).unwrap();
    let cfg = LoraConfig { rank: 2, alpha: 4.0, dropout: 0.0, ..LoraConfig::default() }
        .with_targets(&["wte", "wq", "wk", "wv", "wo", "w1", "w2"])
        .unwrap();
    let mut ad = attach_lora(&params, &cfg, 3).unwrap();
    // Non-zero factors on both sides so every adapter gradient is informative.
    for (i, p) in ad.pairs.iter_mut().enumerate() {
        p.a.iter_mut().enumerate().for_each(|(j, x)| *x += 0.05 * (((i * 31 + j * 7) % 11) as f64 - 5.0) / 5.0);
        p.b.iter_mut().enumerate().for_each(|(j, x)| *x += 0.05 * (((i * 17 + j * 3) % 13) as f64 - 6.0) / 6.0);
    }
    let (a, ma, b, mb) = batch();
    let report = check_model_gradients(&params, Some(&ad), &[(&a, &ma), (&b, &mb)], 200, 1e-5, 2).unwrap();
    assert_eq!(report.groups.len(), params.tensors().len() + ad.tensors().len());
    assert!(report.max_rel_error() < 1e-3, "{:?}", report.groups.iter().max_by(|x, y| x.max_rel_error.total_cmp(&y.max_rel_error)));
}
