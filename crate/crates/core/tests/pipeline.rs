use wavessm::data::{generate_synthetic, read_split, write_split, CsvSchema, SyntheticSpec};
use wavessm::model::{Model, ModelConfig};
use wavessm::train::{evaluate, train, TrainConfig};

fn small_spec() -> SyntheticSpec {
    SyntheticSpec { length: 150, trials_per_class: 16, seed: 9, ..Default::default() }
}

#[test]
fn csv_split_survives_a_round_trip() {
    let data = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), &data).unwrap();
    let back = read_split(dir.path(), &CsvSchema::default()).unwrap();
    assert_eq!(back, data);
    assert_eq!(back.train.class_counts().values().copied().collect::<Vec<_>>(), vec![13, 13, 13]);
}

#[test]
fn train_save_load_evaluate() {
    let data = generate_synthetic(&small_spec()).unwrap();
    let cfg = ModelConfig { n: 16, d_model: 8, ..Default::default() };
    let mut model = Model::<f64>::new(cfg).unwrap();
    let history = train(&mut model, &data.train, Some(&data.test), &TrainConfig { epochs: 3, batch_size: 8, ..Default::default() }).unwrap();
    assert_eq!(history.epochs.len(), 3);
    assert!(history.aborted.is_none());
    assert!(history.epochs[2].loss < history.epochs[0].loss);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = Model::<f64>::load(&path).unwrap();
    let (a, b) = (evaluate(&model, &data.test).unwrap(), evaluate(&loaded, &data.test).unwrap());
    assert_eq!(a.confusion, b.confusion);
    for s in &data.test.samples {
        assert_eq!(model.logits(s.series.view()).unwrap(), loaded.logits(s.series.view()).unwrap());
    }
}

#[test]
fn single_precision_model_trains() {
    let data = generate_synthetic(&small_spec()).unwrap();
    let cfg = ModelConfig { n: 16, d_model: 8, ..Default::default() };
    let mut model = wavessm::Model32::new(cfg).unwrap();
    let history = train(&mut model, &data.train, None, &TrainConfig { epochs: 2, batch_size: 8, ..Default::default() }).unwrap();
    assert!(history.epochs.iter().all(|e| e.loss.is_finite()));
}
