use evireg::data::{generate, split, GeneratorConfig};
use evireg::evidential::reg_sigma;
use evireg::metrics::nll_all;
use evireg::net::train;
use evireg::{AnnotatedItem, Dataset, HeadKind, LabelSet, Network, NigParams, TrainConfig};

fn linear_dataset(n: usize, offset: usize) -> Dataset {
    let items = (0..n)
        .map(|i| {
            let x = ((i * 37 + offset * 11) % 101) as f64 / 50.0 - 1.0;
            let mu = 1.5 * x - 0.3;
            let spread = 0.2 + 0.1 * ((i % 3) as f64);
            AnnotatedItem {
                id: format!("l{offset}-{i:04}"),
                features: vec![x],
                labels: vec![LabelSet::new(vec![mu - spread, mu, mu + spread]).unwrap()],
            }
        })
        .collect();
    Dataset::new(vec!["y".into()], items).unwrap()
}

fn corpus_nll_all(net: &Network, data: &Dataset) -> f64 {
    let preds: Vec<NigParams> = data.items.iter().map(|i| net.predict(&i.features).unwrap()[0]).collect();
    let labels: Vec<&LabelSet> = data.items.iter().map(|i| &i.labels[0]).collect();
    nll_all(&preds, &labels).unwrap()
}

#[test]
fn training_improves_validation_fit() {
    let (train_set, val) = (linear_dataset(120, 0), linear_dataset(40, 1));
    let net = Network::new(1, &[16], 1, HeadKind::Evidential, 0.0, 3).unwrap();
    let before = corpus_nll_all(&net, &val);
    let mut cfg = TrainConfig::new(1);
    cfg.epochs = 200;
    cfg.batch_size = 16;
    let (trained, report) = train(net, &train_set, Some(&val), &cfg).unwrap();
    let after = corpus_nll_all(&trained, &val);
    assert_eq!(report.epochs.len(), 200);
    assert!(after < before - 0.5, "{before} -> {after}");
}

#[test]
fn lambda_changes_regulariser_diagnostics() {
    let (data, _) = generate(&GeneratorConfig { n_items: 200, d: 3, ..GeneratorConfig::default() }).unwrap();
    let run = |lambda: f64| {
        let mut cfg = TrainConfig::new(3);
        cfg.epochs = 20;
        cfg.lambdas = vec![lambda; 3];
        let net = Network::new(3, &[16], 3, HeadKind::Evidential, 0.0, 1).unwrap();
        let (net, _) = train(net, &data, None, &cfg).unwrap();
        data.items
            .iter()
            .map(|i| {
                let omegas = net.predict(&i.features).unwrap();
                i.labels.iter().zip(&omegas).map(|(l, o)| reg_sigma(l, o)).sum::<f64>()
            })
            .sum::<f64>()
            / data.len() as f64
    };
    let (free, regularised) = (run(0.0), run(0.1));
    assert!((free - regularised).abs() > 1e-6, "{free} vs {regularised}");
}

#[test]
fn fixed_seed_gives_identical_traces() {
    let (data, _) = generate(&GeneratorConfig { n_items: 120, d: 4, ..GeneratorConfig::default() }).unwrap();
    let (tr, va, _) = split(&data, [0.7, 0.3, 0.0], 5).unwrap();
    let run = || {
        let mut cfg = TrainConfig::new(3);
        cfg.epochs = 8;
        cfg.seed = 9;
        let net = Network::new(4, &[8, 8], 3, HeadKind::Evidential, 0.3, 9).unwrap();
        train(net, &tr, Some(&va), &cfg).unwrap()
    };
    let ((net_a, rep_a), (net_b, rep_b)) = (run(), run());
    assert_eq!(rep_a, rep_b);
    assert!(net_a.params().iter().zip(net_b.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn early_stopping_keeps_best_epoch() {
    let (train_set, val) = (linear_dataset(60, 2), linear_dataset(30, 3));
    let mut cfg = TrainConfig::new(1);
    cfg.epochs = 300;
    cfg.learning_rate = 0.05;
    cfg.patience = Some(3);
    let net = Network::new(1, &[32], 1, HeadKind::Evidential, 0.0, 4).unwrap();
    let (_, report) = train(net, &train_set, Some(&val), &cfg).unwrap();
    let best = report.epochs[report.best_epoch - 1].val_loss.unwrap();
    assert!(report.epochs.iter().all(|e| e.val_loss.unwrap() >= best));
}

#[test]
fn empty_training_set_is_rejected() {
    let empty = Dataset {
        attributes: vec!["y".into()],
        items: vec![],
    };
    let net = Network::new(1, &[4], 1, HeadKind::Evidential, 0.0, 0).unwrap();
    assert!(train(net, &empty, None, &TrainConfig::new(1)).is_err());
}
