use silkforge::model::{checkpoint_bytes, init_model, Checkpoint, LoraConfig, ModelConfig};
use silkforge::seqdata::{make_folds, AminoAcidSequence};
use silkforge::synthetic::{property_dataset, PropertyDesign, RepeatGrammar};
use silkforge::train::{
    lm_examples, train_clm, train_distill, train_level1, train_level2, DistillConfig, Level2Options, TeacherLogits,
    TeacherSource, TrainConfig,
};

fn corpus(n: usize, seed: u64) -> Vec<AminoAcidSequence> {
    RepeatGrammar::default().corpus(n, seed).unwrap()
}

fn cfg(steps: usize) -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        batch_size: 4,
        warmup_steps: 10,
        max_epochs: 100,
        patience: 100,
        seed: 7,
        max_steps: Some(steps),
        ..TrainConfig::level1()
    }
}

fn tiny_ck(seed: u64) -> Checkpoint {
    Checkpoint::new(init_model(&ModelConfig::desk_tiny(), seed).unwrap())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn clm_loss_falls_over_200_steps() {
    let out = train_clm(&tiny_ck(1), &corpus(60, 1), &cfg(200), 64).unwrap();
    let losses = out.report.train_losses();
    assert_eq!(out.report.steps, 200);
    let (head, tail) = (mean(&losses[..10]), mean(&losses[losses.len() - 10..]));
    assert!(tail < 0.7 * head, "{head} -> {tail}");
}

#[test]
fn training_is_deterministic() {
    let data = corpus(40, 2);
    let a = train_clm(&tiny_ck(3), &data, &cfg(100), 64).unwrap();
    let b = train_clm(&tiny_ck(3), &data, &cfg(100), 64).unwrap();
    assert_eq!(a.report.steps, 100);
    assert_eq!(checkpoint_bytes(&a.checkpoint).unwrap(), checkpoint_bytes(&b.checkpoint).unwrap());
    assert_eq!(a.report.log_jsonl(), b.report.log_jsonl());
}

#[test]
fn hard_only_distillation_follows_clm() {
    let data = corpus(30, 3);
    let teacher = tiny_ck(9);
    let student = ModelConfig::desk_tiny();
    let c = cfg(30);
    let hard = DistillConfig { temperature: 2.0, alpha: 1.0 };
    let d = train_distill(TeacherSource::Model(&teacher), &student, &data, &c, &hard, 64).unwrap();
    let clm = train_clm(&Checkpoint::new(init_model(&student, c.seed).unwrap()), &data, &c, 64).unwrap();
    let (a, b) = (d.report.train_losses(), clm.report.train_losses());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn logits_file_matches_live_teacher() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(20, 4);
    let teacher = tiny_ck(11);
    let student = ModelConfig::desk_tiny();
    let (examples, _) = lm_examples(&data, 64).unwrap();
    let path = dir.path().join("teacher.tlog");
    TeacherLogits::from_model(&teacher, &examples).unwrap().save(&path).unwrap();
    let c = cfg(15);
    let loss = DistillConfig::default();
    let live = train_distill(TeacherSource::Model(&teacher), &student, &data, &c, &loss, 64).unwrap();
    let file = train_distill(TeacherSource::Logits(TeacherLogits::load(&path).unwrap()), &student, &data, &c, &loss, 64)
        .unwrap();
    assert_eq!(checkpoint_bytes(&live.checkpoint).unwrap(), checkpoint_bytes(&file.checkpoint).unwrap());
}

#[test]
fn level1_only_moves_the_adapter() {
    let student = tiny_ck(5);
    let lora = LoraConfig { rank: 4, alpha: 8.0, ..LoraConfig::default() };
    let out = train_level1(&student, &corpus(30, 5), &cfg(40), &lora, 64).unwrap();
    assert_eq!(out.checkpoint.params, student.params);
    let adapter = out.checkpoint.adapter.as_ref().unwrap();
    assert!(adapter.pairs.iter().any(|p| p.b.iter().any(|&x| x != 0.0)));
}

#[test]
fn level2_runs_selected_folds() {
    let records = property_dataset(592, &PropertyDesign::default(), 6).unwrap();
    let lora = LoraConfig { rank: 2, alpha: 4.0, ..LoraConfig::default() };
    let level1 = train_level1(&tiny_ck(6), &corpus(20, 6), &cfg(5), &lora, 64).unwrap().checkpoint;
    let plan = make_folds(records.len(), 16, 5, 1).unwrap();
    let opts = Level2Options { lora: lora.with_targets(&["wte", "wq", "wv"]).unwrap(), reinit_adapter: false, max_len: 64 };
    let runs = train_level2(&level1, &records, &cfg(3), &opts, &plan).unwrap();
    assert_eq!(runs.len(), 5);
    let mut seen = std::collections::BTreeSet::new();
    for run in &runs {
        assert_eq!((run.train_indices.len(), run.val_indices.len()), (555, 37));
        assert!(run.val_indices.iter().all(|i| seen.insert(*i)));
        let ck = &run.result.checkpoint;
        assert!(ck.scaler.is_some());
        assert_eq!(ck.params, level1.params);
        let names: Vec<String> = ck.adapter.as_ref().unwrap().tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "wte.lora_a");
    }
}
