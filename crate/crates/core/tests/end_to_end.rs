use wasn_core::eval::{scene_metrics, NodeReferences, SceneReferences, DEFAULT_FILTER_LEN};
use wasn_core::fixtures::{speech_shaped_noise, synthetic_speech};
use wasn_core::pipeline::{run_pipeline, CompressedType, PipelineConfig, SceneInput};
use wasn_core::room::{render_scene, sample_scene, RenderedScene, Scene};
use wasn_core::scene::ConfigType;
use wasn_core::signal::TimeSignal;
use wasn_core::spatial::ChannelOrigin;
use wasn_core::{SceneInput32, SceneInput64};

fn rendered(config: ConfigType, seed: u64) -> (Scene, RenderedScene) {
    let desc = sample_scene(config, seed).unwrap();
    let scene = Scene::new(desc, Some(3)).unwrap();
    let speech = TimeSignal::at_pipeline_rate(synthetic_speech(32_000, seed)).unwrap();
    let noise = TimeSignal::at_pipeline_rate(speech_shaped_noise(40_000, seed)).unwrap();
    let r = render_scene(&scene, &speech, &noise).unwrap();
    (scene, r)
}

fn input(r: &RenderedScene) -> SceneInput64 {
    let first = |v: &Vec<Vec<TimeSignal>>| v.iter().map(|m| m[0].clone()).collect::<Vec<_>>();
    SceneInput {
        scene_id: "e2e".into(),
        mixtures: r.mixtures.clone(),
        speech_refs: Some(first(&r.speech_images)),
        noise_refs: Some(first(&r.noise_images)),
    }
}

#[test]
fn oracle_pipeline_improves_every_config() {
    for (i, config) in [ConfigType::Random, ConfigType::Living, ConfigType::Meeting].into_iter().enumerate() {
        let (scene, r) = rendered(config, 40 + i as u64);
        let out = run_pipeline(&input(&r), &PipelineConfig::default()).unwrap();
        let refs = SceneReferences {
            scene_id: "e2e".into(),
            nodes: (0..r.mixtures.len())
                .map(|k| NodeReferences {
                    speech_image: r.speech_images[k][0].clone(),
                    noise_image: r.noise_images[k][0].clone(),
                    mixture: r.mixtures[k][0].clone(),
                    direct_delay: (scene.direct_delay(k, true), scene.direct_delay(k, false)),
                })
                .collect(),
            dry_target: r.dry_target.clone(),
            dry_noise: r.dry_noise.clone(),
        };
        let outputs: Vec<_> = out.step1.iter().cloned().zip(out.step2.iter().cloned()).map(|(a, b)| [a, b]).collect();
        let rows = scene_metrics(&refs, &outputs, DEFAULT_FILTER_LEN).unwrap();
        assert_eq!(rows.len(), 8);
        for row in &rows {
            assert!(row.delta_sir_cnv > 3.0, "{config:?}: {row:?}");
        }
        let best = |step| rows.iter().filter(|r| r.step == step).map(|r| r.output_sir_cnv).fold(f64::MIN, f64::max);
        assert!(best(2) > best(1), "{config:?}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let (_, r) = rendered(ConfigType::Random, 5);
    let x64 = input(&r);
    let cast = |v: &Vec<TimeSignal>| v.iter().map(|s| s.cast::<f32>()).collect::<Vec<_>>();
    let x32: SceneInput32 = SceneInput {
        scene_id: x64.scene_id.clone(),
        mixtures: x64.mixtures.iter().map(cast).collect(),
        speech_refs: x64.speech_refs.as_ref().map(cast),
        noise_refs: x64.noise_refs.as_ref().map(cast),
    };
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&x64, &cfg).unwrap();
    let b = run_pipeline(&x32, &cfg).unwrap();
    for (s64, s32) in a.step1.iter().zip(&b.step1).chain(a.step2.iter().zip(&b.step2)) {
        let err: f64 = s64.samples().iter().zip(s32.samples()).map(|(x, y)| (x - f64::from(*y)).powi(2)).sum();
        assert!((err / s64.energy()).sqrt() < 5e-2);
    }
}

#[test]
fn compressed_both_stacks_ten_channels() {
    let (_, r) = rendered(ConfigType::Random, 9);
    let cfg = PipelineConfig {
        compressed: CompressedType::Both,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&input(&r), &cfg).unwrap();
    for node in &out.manifest.nodes {
        assert_eq!(node.step2_channels, 10);
        let received = node.step2_channel_order.iter().filter(|o| matches!(o, ChannelOrigin::Received { .. })).count();
        assert_eq!(received, 6);
    }
}
