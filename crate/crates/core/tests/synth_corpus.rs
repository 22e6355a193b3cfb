use dynenh::dataio::{synth_texture_dataset, SynthConfig};

#[test]
fn default_corpus_rewards_sharpening() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig::default();
    let (m, r) = synth_texture_dataset(&cfg, dir.path()).unwrap();
    println!("{r:?}");
    assert_eq!(m.class_count(), 8);
    assert_eq!(m.all_samples().count(), 480);
    assert!(r.clean_accuracy >= 0.95);
    assert!(r.clean_accuracy - r.blurred_accuracy >= 0.10);
    assert!(r.clean_accuracy - r.sharpened_accuracy <= 0.05);
}
