use gazeperc_core::{
    aoi_time_share, Dimension, EventSet, FeatureVector, FixationEvent, PatchEmbeddingSet, Ratings, SemanticLabelMap, TokenSequence,
};
use gazeperc_nn::{read_checkpoint_from, write_checkpoint_to, TrainConfig, Variant};
use gazeperc_pipeline::{
    ablate, ablate_all, evaluate, macro_f1, predict, run, spec_for, split_dataset, train_eval, Ablation, Arch, Corpus,
    CorpusConfig, GazeRepr, PipelineError, RunPlan, RunTag, SplitData, TrialRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VEGETATION: u8 = 8;

/// Images of 4x4 random category blocks, trials of random fixations.
/// `label` maps a trial's vegetation dwell share to a 1..=5 score.
fn corpus(n_images: usize, raters: usize, seed: u64, label: impl Fn(f64, &mut ChaCha8Rng) -> u8) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Corpus::new(CorpusConfig::default()).unwrap();
    let d = c.config.display;
    for i in 0..n_images {
        let id = format!("im{i:03}");
        let labels: Vec<u8> = (0..16).map(|_| if rng.gen_bool(0.3) { VEGETATION } else { rng.gen_range(0..19) }).collect();
        let map = SemanticLabelMap::new(id.clone(), 4, 4, labels).unwrap();
        let emb: Vec<f64> = (0..196 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        c.add_embeddings(PatchEmbeddingSet::new(id.clone(), 14, 14, 4, emb).unwrap());
        for s in 0..raters {
            let n = rng.gen_range(4..12);
            let fixations: Vec<FixationEvent> = (0..n)
                .map(|k| {
                    let on = k as f64 * 400.0;
                    let dur = rng.gen_range(100.0..600.0);
                    FixationEvent {
                        onset_ms: on,
                        offset_ms: on + dur,
                        cx_px: rng.gen_range(0.0..d.width_px),
                        cy_px: rng.gen_range(0.0..d.height_px),
                        duration_ms: dur,
                        next_saccade_len_px: if k + 1 < n { rng.gen_range(50.0..600.0) } else { 0.0 },
                    }
                })
                .collect();
            let share = aoi_time_share(&fixations, &map, &d).shares[VEGETATION as usize];
            let score = label(share, &mut rng);
            c.trials.push(TrialRecord {
                image_id: id.clone(),
                subject_id: format!("s{s}"),
                ratings: Ratings::new(score, score, score).unwrap(),
                events: EventSet { fixations, saccades: Vec::new() },
                features: FeatureVector::default(),
            });
        }
        c.add_map(map);
    }
    c
}

fn threshold_label(share: f64, _: &mut ChaCha8Rng) -> u8 {
    if share < 0.2 {
        1
    } else if share < 0.4 {
        3
    } else {
        5
    }
}

fn small_train(epochs: usize) -> TrainConfig {
    TrainConfig { peak_lr: 3e-3, batch_size: 32, epochs, ..TrainConfig::default() }
}

#[test]
fn split_is_a_seeded_image_partition() {
    let ids: Vec<String> = (0..100).map(|i| format!("x{i}")).collect();
    let a = split_dataset(&ids, 4).unwrap();
    assert_eq!(a, split_dataset(&ids, 4).unwrap());
    assert_ne!(a, split_dataset(&ids, 5).unwrap());
    use gazeperc_pipeline::Split::*;
    assert_eq!((a.count(Train), a.count(Val), a.count(Test)), (70, 15, 15));
    assert!(split_dataset(&ids[..9], 0).is_err());
    // duplicates collapse to one image
    let dup: Vec<&str> = ids.iter().chain(&ids).map(String::as_str).collect();
    assert_eq!(split_dataset(&dup, 4).unwrap(), a);
}

#[test]
fn uniform_random_predictions_score_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = [[0u64; 3]; 3];
    for i in 0..300_000 {
        c[i % 3][rng.gen_range(0..3)] += 1;
    }
    assert!((macro_f1(&c).unwrap() - 100.0 / 3.0).abs() < 0.3);
}

#[test]
fn scene_inputs_follow_the_maps() {
    let mut c = corpus(3, 1, 1, threshold_label);
    let road = SemanticLabelMap::new("im000", 4, 4, vec![0; 16]).unwrap();
    c.add_map(road);
    let comp = c.input(&c.trials[0], Variant::AoiComposition, GazeRepr::Xy, Dimension::Safe).unwrap();
    let mut e0 = vec![0.0; 19];
    e0[0] = 1.0;
    assert_eq!(comp.tokens, e0);
    let aoi = c.input(&c.trials[0], Variant::AoiSeq, GazeRepr::Xy, Dimension::Safe).unwrap();
    assert!(aoi.tokens.iter().all(|&v| v == 0.0));
    assert_eq!(aoi.len(), c.trials[0].events.fixations.len());

    // pooling with uniform weights is the plain mean
    let set = &c.embeddings["im001"];
    let uniform = vec![1.0 / 196.0; 196];
    let pooled = set.weighted_mean(&uniform);
    let image = c.input(&c.trials[1], Variant::ImageOnly, GazeRepr::Xy, Dimension::Safe).unwrap();
    assert!(pooled.iter().zip(&image.tokens).all(|(a, b)| (a - b).abs() < 1e-12));

    let heat = c.input(&c.trials[1], Variant::HeatmapMlp, GazeRepr::Xy, Dimension::Safe).unwrap();
    assert_eq!(heat.width, 64 * 64);
    assert!((heat.tokens.iter().sum::<f64>() - 4096.0).abs() < 1e-6);
}

#[test]
fn missing_scene_names_the_image() {
    let mut c = corpus(2, 1, 1, threshold_label);
    c.maps.clear();
    match c.inputs(Variant::GazeAoi, GazeRepr::XyDur, Dimension::Safe) {
        Err(PipelineError::MissingScene { image_id, .. }) => assert_eq!(image_id, "im000"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn aoi_threshold_labels_are_learnable() {
    let c = corpus(200, 10, 7, threshold_label);
    let mut plan = RunPlan::new(Variant::GazeAoi, Dimension::Safe);
    plan.n_seeds = 1;
    plan.arch = Some(Arch { n_layers: 1, n_heads: 4, d_model: 32 });
    plan.train = small_train(30);
    let t = run(&c, &plan).unwrap();
    assert!(t.result.macro_f1.mean > 90.0, "{:?}", t.result.seeds);
}

#[test]
fn training_is_deterministic_and_checkpoints_reproduce_predictions() {
    let c = corpus(20, 4, 9, |_, rng| rng.gen_range(1..=5));
    let mut plan = RunPlan::new(Variant::GazeAoi, Dimension::Boring);
    plan.n_seeds = 2;
    plan.arch = Some(Arch { n_layers: 1, n_heads: 2, d_model: 8 });
    plan.train = small_train(3);
    let a = run(&c, &plan).unwrap();
    let b = run(&c, &plan).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.runs[1].model, b.runs[1].model);
    assert_eq!(a.runs[0].log, b.runs[0].log);
    assert_eq!(a.result.seeds.len(), 2);
    assert!(a.result.seeds.iter().all(|s| (1..=3).contains(&s.best_epoch)));
    assert!(a.result.macro_f1.std >= 0.0);

    let seqs = c.inputs(Variant::GazeAoi, GazeRepr::XyDurSacc, Dimension::Boring).unwrap();
    let refs: Vec<&TokenSequence> = seqs.iter().collect();
    let mut buf = Vec::new();
    write_checkpoint_to(&mut buf, &a.runs[0].model).unwrap();
    let restored = read_checkpoint_from(&buf[..]).unwrap();
    assert_eq!(predict(&restored, &refs).unwrap(), predict(&a.runs[0].model, &refs).unwrap());
}

#[test]
fn zero_gaze_ablation_is_zeroed_gaze_input() {
    let c = corpus(20, 3, 11, threshold_label);
    let seqs = c.inputs(Variant::GazeAoi, GazeRepr::XyDur, Dimension::Wealthy).unwrap();
    let split = split_dataset(&c.image_ids(), 0).unwrap();
    let data = SplitData::new(&seqs, &split).unwrap();
    let spec = spec_for(Variant::GazeAoi, &seqs).unwrap().resized(1, 2, 8);
    let tag = RunTag { dimension: Dimension::Wealthy, ablation: Ablation::None, repr: Some(GazeRepr::XyDur) };
    let t = train_eval(&data, &spec, &small_train(2), 1, tag).unwrap();
    let model = &t.runs[0].model;

    let ablated = ablate_all(&seqs, Ablation::ZeroGaze, 0);
    let mut manual = seqs.clone();
    for s in &mut manual {
        for i in 0..s.len() {
            let gw = s.gaze_width;
            s.row_mut(i)[..gw].fill(0.0);
        }
    }
    let a: Vec<&TokenSequence> = ablated.iter().collect();
    let m: Vec<&TokenSequence> = manual.iter().collect();
    assert_eq!(model.logits(&gazeperc_nn::Batch::from_sequences(&a).unwrap()).unwrap(),
               model.logits(&gazeperc_nn::Batch::from_sequences(&m).unwrap()).unwrap());
    assert_eq!(evaluate(model, &a).unwrap(), evaluate(model, &m).unwrap());
}

#[test]
fn single_token_shuffle_is_identity() {
    let c = corpus(1, 1, 2, threshold_label);
    let mut seq = c.input(&c.trials[0], Variant::GazeAoi, GazeRepr::Xy, Dimension::Safe).unwrap();
    seq.tokens.truncate(seq.width);
    seq.mask.truncate(1);
    assert_eq!(ablate(&seq, Ablation::ShuffleScene, 99), seq);
}

#[test]
fn exploding_learning_rate_aborts() {
    let c = corpus(12, 3, 5, threshold_label);
    let mut plan = RunPlan::new(Variant::GazeOnly, Dimension::Safe);
    plan.n_seeds = 1;
    plan.arch = Some(Arch { n_layers: 1, n_heads: 2, d_model: 8 });
    plan.train = TrainConfig { peak_lr: 1e305, warmup_epochs: 0.0, ..small_train(5) };
    match run(&c, &plan) {
        Err(PipelineError::NonFiniteLoss { .. }) | Err(PipelineError::Nn(_)) => {}
        other => panic!("expected an abort, got {:?}", other.map(|t| t.result)),
    }
}

#[test]
fn levels_cover_the_three_classes() {
    let c = corpus(30, 5, 3, threshold_label);
    let mut seen = [false; 3];
    for t in &c.trials {
        seen[t.level(Dimension::Safe).index()] = true;
    }
    assert_eq!(seen, [true; 3]);
}
