use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use spiro_core::features::{FeatureVector, TargetVariant};
use spiro_core::learn::{fit, percentage_error, Dataset, Hyper, Row};
use spiro_core::signal::synth::{synth, BreathParams, SynthKind};
use spiro_core::signal::{detect_peaks, hilbert_envelope, kaiser_order, AudioRecording, Envelope};
use spiro_core::tidal::{
    respiration_rate, synthetic_corpus, train_on_corpus, vote, CnnConfig, CnnModel, CorpusConfig, TidalClass,
    VotedLabel, WindowConfig,
};

fn small_model() -> &'static CnnModel {
    static MODEL: OnceLock<CnnModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = synthetic_corpus(&CorpusConfig {
            per_class: 2,
            duration_s: 6.0,
            sample_rate_hz: 4000,
            seed: 5,
        })
        .unwrap();
        let cfg = CnnConfig {
            epochs: 2,
            ..Default::default()
        };
        train_on_corpus(&corpus, &WindowConfig::default(), &cfg, 5).unwrap()
    })
}

fn class() -> impl Strategy<Value = TidalClass> {
    prop_oneof![
        Just(TidalClass::Tidal),
        Just(TidalClass::Speech),
        Just(TidalClass::Noise)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_form_a_simplex(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let m = small_model();
        let (bands, frames) = m.window.map_shape(m.sample_rate_hz).unwrap();
        let mut rng = spiro_core::seed::rng(seed, 0);
        let map: Vec<f64> = (0..bands * frames)
            .map(|_| scale * (rng.random::<f64>() - 0.5))
            .collect();
        let p = m.probabilities(&map).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn voted_label_holds_ninety_percent(labels in prop::collection::vec(class(), 1..40)) {
        let (label, fraction) = vote(&labels);
        if label != VotedLabel::Uncertain {
            let n = labels.iter().filter(|&&l| VotedLabel::from(l) == label).count();
            prop_assert!(10 * n >= 9 * labels.len());
            prop_assert!((fraction - n as f64 / labels.len() as f64).abs() < 1e-15);
            prop_assert!(fraction >= 0.9);
        } else {
            for c in TidalClass::ALL {
                let n = labels.iter().filter(|&&l| l == c).count();
                prop_assert!(10 * n < 9 * labels.len());
            }
        }
    }

    #[test]
    fn peak_indices_increase_and_gap_matches(
        bumps in prop::collection::vec(50usize..400, 2..8),
        rate in 10u32..200,
    ) {
        let mut centers = Vec::new();
        let mut at = 100;
        for gap in &bumps {
            centers.push(at);
            at += gap;
        }
        let n = at + 100;
        let x: Vec<f64> = (0..n)
            .map(|i| centers.iter().map(|&c| (-((i as f64 - c as f64) / 10.0).powi(2)).exp()).sum())
            .collect();
        let p = detect_peaks(&Envelope::new(x, rate).unwrap(), 0.0, 0.1).unwrap();
        prop_assert!(p.indices.windows(2).all(|w| w[1] > w[0]));
        let gaps: Vec<f64> = p.indices.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64 / rate as f64;
        prop_assert!((p.mean_peak_to_peak_s - mean).abs() < 1e-9);
        prop_assert_eq!(p.indices, centers);
    }

    #[test]
    fn envelope_nonnegative_same_length(xs in prop::collection::vec(-1.0f64..1.0, 2..300)) {
        let rec = AudioRecording::new(xs.clone(), 1000, "p").unwrap();
        let env = hilbert_envelope(&rec).unwrap();
        prop_assert_eq!(env.len(), xs.len());
        prop_assert!(env.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn kaiser_order_is_minimal_even(w in 1e-5f64..0.2, a in 10.0f64..90.0) {
        let order = kaiser_order(w, a);
        let exact = (a - 7.95) / (14.36 * w);
        prop_assert!(order >= 2 && order % 2 == 0);
        prop_assert!(order as f64 >= exact);
        prop_assert!(order == 2 || ((order - 2) as f64) < exact);
    }

    #[test]
    fn percentage_error_scale_invariant(va in 0.1f64..20.0, ve in 0.0f64..20.0, k in -8i32..8) {
        let c = 2f64.powi(k);
        prop_assert_eq!(percentage_error(va, va).unwrap(), 0.0);
        let a = percentage_error(va, ve).unwrap();
        let b = percentage_error(c * va, c * ve).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rate_invariant_to_amplitude(bpm in 10.0f64..25.0, k in -6i32..6, seed in 0u64..1000) {
        let rec = synth(&SynthKind::Breath(BreathParams {
            bpm,
            seed,
            sample_rate_hz: 4000,
            ..Default::default()
        }))
        .unwrap();
        let c = 2f64.powi(k);
        let scaled = rec.with_samples(rec.samples().iter().map(|v| v * c).collect()).unwrap();
        let a = respiration_rate(&rec).unwrap();
        let b = respiration_rate(&scaled).unwrap();
        prop_assert_eq!(a.peak_set.map(|p| p.indices), b.peak_set.map(|p| p.indices));
    }

    #[test]
    fn forest_ignores_training_row_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut rng = spiro_core::seed::rng(seed, 1);
        let rows: Vec<(String, Vec<f64>, f64)> = (0..12)
            .map(|i| {
                let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                (format!("s{}", i % 4), x.clone(), 1.0 + 3.0 * x[0] + x[1])
            })
            .collect();
        let data = |rows: &[(String, Vec<f64>, f64)]| -> Dataset {
            let rows = rows
                .iter()
                .map(|(s, x, y)| Row {
                    subject_id: s.clone(),
                    row_id: format!("{s}-{:?}", x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()),
                    features: FeatureVector::new(vec!["a".into(), "b".into()], x.clone(), TargetVariant::Pef).unwrap(),
                    target: *y,
                    tags: Default::default(),
                })
                .collect();
            Dataset::new(rows, TargetVariant::Pef).unwrap()
        };
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut spiro_core::seed::rng(perm_seed, 2));
        let hyper = Hyper::RandomForest { trees: 8 };
        let features = vec!["a".to_string(), "b".to_string()];
        let a = fit(&data(&rows), &hyper, &features, 7).unwrap();
        let b = fit(&data(&shuffled), &hyper, &features, 7).unwrap();
        prop_assert_eq!(a.state, b.state);
    }
}
