use sigscat::dataset::synthesize_dataset;
use sigscat::model::{deserialize, init_model, load_weights, save_weights, serialize, ModelConfig, SiameseModel};

#[test]
fn weights_survive_serialization_bit_for_bit() {
    let w = init_model(&ModelConfig::default(), 11).unwrap();
    let bytes = serialize(&w).unwrap();
    let back = deserialize(&bytes).unwrap();
    assert_eq!(serialize(&back).unwrap(), bytes);
    for (a, b) in w.params().iter().zip(back.params()) {
        assert_eq!(a.name, b.name);
        let bits = |p: &sigscat::model::Parameter| p.tensor.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn a_reloaded_model_embeds_identically() {
    let w = init_model(&ModelConfig::default(), 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.ssnw");
    save_weights(&w, &path).unwrap();
    let image = synthesize_dataset(1, 1, 1, 4).unwrap().load(0).unwrap().pixels;
    let original = SiameseModel::new(w).unwrap().embed(&image).unwrap();
    let reloaded = SiameseModel::new(load_weights(&path).unwrap()).unwrap().embed(&image).unwrap();
    assert_eq!(original.values, reloaded.values);
}
