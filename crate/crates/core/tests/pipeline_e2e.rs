use std::collections::BTreeMap;

use narrlab::corpus::{ingest, mask_numerals, MaskConfig, DEFAULT_MASK_TOKEN};
use narrlab::features::FeatureSpec;
use narrlab::gbm::Hyperparams;
use narrlab::pipeline::{self, planted_recovery, PipelineConfig};
use narrlab::synth::{generate_corpus, SynthConfig};
use narrlab::targets::Target;
use narrlab::NarrativeDimension;

fn quick() -> PipelineConfig {
    PipelineConfig {
        grid: vec![Hyperparams {
            n_trees: 150,
            min_samples_leaf: 10,
            ..Hyperparams::default()
        }],
        ..PipelineConfig::default()
    }
}

#[test]
fn masked_synth_corpus_has_no_digits() {
    let corpus = generate_corpus(&SynthConfig {
        n_firms: 25,
        n_events: 100,
        ..Default::default()
    })
    .unwrap();
    let (remarks, dropped) = ingest(corpus.transcripts);
    assert!(dropped.is_empty());
    let docs = pipeline::mask_all(&remarks, &MaskConfig::default()).unwrap();
    for d in &docs {
        let text = d.text();
        assert!(!text.chars().any(|c| c.is_ascii_digit()));
        assert!(d.mask_count > 0);
        assert_eq!(mask_numerals(&text, DEFAULT_MASK_TOKEN).unwrap(), (text.clone(), 0));
        assert_eq!(d.chunks.len(), 1);
    }
}

#[test]
fn spec_widths_differ_by_embedding_dim() {
    let corpus = generate_corpus(&SynthConfig {
        n_firms: 25,
        n_events: 100,
        ..Default::default()
    })
    .unwrap();
    let (remarks, _) = ingest(corpus.transcripts);
    let docs = pipeline::mask_all(&remarks, &MaskConfig::default()).unwrap();
    let embs = pipeline::embed_all(&docs, &narrlab::embed::hashing_embedder(0, 768)).unwrap();
    let rows = pipeline::targets(&corpus.events, &corpus.forecasts, &quick()).unwrap();
    let build = |s| pipeline::features(s, &corpus.fundamentals, &docs, &embs, &rows, &corpus.events).unwrap();
    let (s, t, st) = (build(FeatureSpec::S), build(FeatureSpec::T), build(FeatureSpec::ST));
    assert_eq!(st.width() - s.width(), 768);
    assert_eq!(t.width(), 768);
    assert_eq!(s.width(), 18);
}

#[test]
fn null_world_has_no_text_effect() {
    let zero: BTreeMap<NarrativeDimension, f64> = NarrativeDimension::ALL.iter().map(|d| (*d, 0.0)).collect();
    let cfg = SynthConfig {
        n_firms: 60,
        n_events: 400,
        narrative_loadings: zero.clone(),
        realized_loadings: zero.clone(),
        disagreement_loadings: zero,
        ..Default::default()
    };
    let r = planted_recovery(&cfg, &quick(), &[Target::ExpectedChange]).unwrap();
    for a in &r.aggregates {
        assert!(a.mean_bps.abs() < 3.0, "{:?}", a);
    }
}

#[test]
fn planted_world_signs_are_recovered_at_small_scale() {
    let cfg = SynthConfig {
        n_firms: 60,
        n_events: 400,
        ..Default::default()
    };
    let r = planted_recovery(&cfg, &quick(), &[Target::ExpectedChange]).unwrap();
    assert_eq!(r.morphs_accepted, r.morphs_total);
    assert_eq!(r.aggregates.len(), 18);
    for a in &r.aggregates {
        let planted = r.planted(a.dimension, Target::ExpectedChange);
        assert_eq!(a.mean_bps.signum(), planted.signum(), "{:?}", a);
    }
}
