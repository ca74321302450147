use mcnpower::datagen::{self, pad_dataset, GenMethod, GenSpec, LabeledDataset, WeightScheme};
use mcnpower::exact::{exact_alg4_estimand, exact_index};
use mcnpower::graph::correlation_report;
use mcnpower::mc::mc_index;
use mcnpower::rng::derive_seed;
use mcnpower::{AgentSet, IndexKind, McConfig, RuleSet, RuleSetDoc};

fn games(method: GenMethod, k: usize, n: usize, m: usize, seed: u64) -> Vec<RuleSet> {
    let spec = GenSpec {
        weights: WeightScheme::GaussHigh,
        seed,
        ..GenSpec::new(method, k, n, m)
    };
    datagen::generate(&spec).unwrap()
}

fn same_game(a: &RuleSet, b: &RuleSet) {
    assert_eq!(a.m(), b.m());
    for s in 0..1u64 << a.m() {
        let c = AgentSet::from_bits(s);
        // weights are stored as f32
        assert!((a.value(c) - b.value(c)).abs() < 1e-5, "coalition {c:?}");
    }
}

#[test]
fn labelled_dataset_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let rs = games(GenMethod::Coinflip, 25, 6, 5, 3);
    let ds = datagen::label_dataset(&rs, None, IndexKind::BanzhafAlg4, 500, 9, 1).unwrap();
    ds.save(dir.path()).unwrap();
    let back = LabeledDataset::load(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (orig, decoded) in rs.iter().zip(back.rulesets().unwrap()) {
        same_game(orig, &decoded);
    }
}

#[test]
fn stored_labels_are_per_game_estimates() {
    let rs = games(GenMethod::Uniform, 8, 5, 6, 11);
    let ds = datagen::label_dataset(&rs, None, IndexKind::ShapleyAlg5, 700, 21, 2).unwrap();
    for (i, game) in rs.iter().enumerate() {
        let direct = mc_index(game, IndexKind::ShapleyAlg5, &McConfig::new(700, derive_seed(21, i as u64))).unwrap();
        let stored = ds.label_row(i).unwrap();
        for (s, d) in stored.iter().zip(&direct.values) {
            assert_eq!(*s, *d as f32);
        }
    }
}

#[test]
fn sampling_approaches_exact_estimand() {
    for (i, game) in games(GenMethod::Mog, 4, 8, 6, 5).iter().enumerate() {
        let exact = exact_alg4_estimand(game).unwrap();
        let sampled = mc_index(game, IndexKind::BanzhafAlg4, &McConfig::new(100_000, i as u64)).unwrap();
        for (e, s) in exact.values.iter().zip(&sampled.values) {
            assert!((e - s).abs() < 0.01, "game {i}: exact {e} sampled {s}");
        }
    }
}

#[test]
fn padding_keeps_games_and_labels() {
    let rs = games(GenMethod::Uniform, 10, 4, 3, 2);
    let ds = datagen::label_dataset(&rs, None, IndexKind::BanzhafAlg4, 300, 1, 1).unwrap();
    let wide = pad_dataset(&ds, 7).unwrap();
    assert_eq!(wide.meta.width, 7);
    for i in 0..ds.len() {
        same_game(&ds.ruleset(i).unwrap(), &wide.ruleset(i).unwrap());
        let (narrow, padded) = (ds.label_row(i).unwrap(), wide.label_row(i).unwrap());
        assert_eq!(&padded[..3], narrow);
        assert!(padded[3..].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn json_games_give_the_same_indices() {
    for game in games(GenMethod::Coinflip, 5, 7, 5, 8) {
        let text = serde_json::to_string(&RuleSetDoc::from_ruleset(&game, None)).unwrap();
        let back = serde_json::from_str::<RuleSetDoc>(&text).unwrap().to_ruleset().unwrap();
        for kind in [IndexKind::BanzhafEq1, IndexKind::ShapleyEq2, IndexKind::BanzhafAlg4] {
            assert_eq!(exact_index(&game, kind).unwrap().values, exact_index(&back, kind).unwrap().values);
        }
    }
}

#[test]
fn correlation_report_covers_every_pair() {
    let rs = games(GenMethod::Uniform, 40, 6, 5, 4);
    let a = datagen::label_dataset(&rs, None, IndexKind::BanzhafAlg4, 400, 2, 1).unwrap();
    let b = datagen::label_dataset(&games(GenMethod::Mog, 40, 6, 5, 6), None, IndexKind::BanzhafAlg4, 400, 3, 1).unwrap();
    let report = correlation_report(&[a, b]).unwrap();
    assert_eq!(report.datasets, 2);
    assert_eq!(report.records.len(), 60);
    assert_eq!(report.prevalence.len(), 30);
    for r in &report.records {
        assert!(r.n <= 40);
        if let (Some(rho), Some(p)) = (r.rho, r.p_value) {
            assert!((-1.0..=1.0).contains(&rho) && (0.0..=1.0).contains(&p));
            assert_eq!(r.significant, rho.abs() > 0.2 && p <= 0.05);
        }
    }
}
