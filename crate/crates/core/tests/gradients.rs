use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evireg::evidential::neg_log_marginal_grad;
use evireg::net::{backward, head_activation};
use evireg::{AnnotatedItem, HeadKind, LabelSet, LossConfig, Network, NllKind};

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn items(rng: &mut ChaCha8Rng, d: usize, n_attr: usize) -> Vec<AnnotatedItem> {
    (0..rng.random_range(1..=4))
        .map(|i| AnnotatedItem {
            id: format!("i{i}"),
            features: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            labels: (0..n_attr)
                .map(|_| LabelSet::new((0..rng.random_range(1..=5)).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
                .collect(),
        })
        .collect()
}

fn max_rel_error(seed: u64, cfg: &LossConfig) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=4);
    let n_attr = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(2..=5)).collect();
    let dropout = if seed % 2 == 0 { 0.25 } else { 0.0 };
    let net = Network::new(d, &hidden, n_attr, HeadKind::Evidential, dropout, seed).unwrap();
    let eps = vec![1.0 / n_attr as f64; n_attr];
    let lambdas: Vec<f64> = (0..n_attr).map(|_| rng.random_range(0.0..0.6)).collect();
    let batch = items(&mut rng, d, n_attr);
    let refs: Vec<&AnnotatedItem> = batch.iter().collect();
    let eval = |net: &Network| backward(net, &refs, &eps, &lambdas, cfg, Some(&mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
    let (_, grads) = eval(&net);
    (0..net.n_params())
        .map(|k| {
            let (mut p, mut m) = (net.clone(), net.clone());
            p.params_mut()[k] += STEP;
            m.params_mut()[k] -= STEP;
            let fd = (eval(&p).0 - eval(&m).0) / (2.0 * STEP);
            (fd - grads[k]).abs() / fd.abs().max(grads[k].abs()).max(FLOOR)
        })
        .fold(0.0, f64::max)
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    for seed in 0..12 {
        let err = max_rel_error(seed, &LossConfig::default());
        assert!(err < REL_TOL, "seed {seed}: {err}");
    }
}

#[test]
fn averaged_and_unregularised_variants_match_finite_differences() {
    let variants = [
        LossConfig { nll: NllKind::Averaged, ..LossConfig::default() },
        LossConfig { reg_sigma: false, ..LossConfig::default() },
    ];
    for (v, cfg) in variants.iter().enumerate() {
        for seed in 20..26 {
            let err = max_rel_error(seed, cfg);
            assert!(err < REL_TOL, "variant {v} seed {seed}: {err}");
        }
    }
}

#[test]
fn single_label_without_regularisers_reduces_to_student_t_gradient() {
    let net = Network::new(2, &[], 1, HeadKind::Evidential, 0.0, 5).unwrap();
    let item = AnnotatedItem {
        id: "a".into(),
        features: vec![0.3, -0.8],
        labels: vec![LabelSet::new(vec![0.9]).unwrap()],
    };
    let (loss, grads) = backward(&net, &[&item], &[1.0], &[0.0], &LossConfig::default(), None::<&mut ChaCha8Rng>).unwrap();
    let raw = net.forward_raw::<ChaCha8Rng>(&item.features, None).unwrap();
    let omega = head_activation(&raw)[0];
    let (nll, _) = neg_log_marginal_grad(0.9, &omega);
    assert!((loss - nll).abs() < 1e-14);
    // With no hidden layer the bias gradients equal d(nll)/d(raw).
    let h = 1e-6;
    for j in 0..4 {
        let (mut p, mut m) = (raw.clone(), raw.clone());
        p[j] += h;
        m[j] -= h;
        let f = |r: &[f64]| neg_log_marginal_grad(0.9, &head_activation(r)[0]).0;
        let fd = (f(&p) - f(&m)) / (2.0 * h);
        let bias = grads[grads.len() - 4 + j];
        assert!((fd - bias).abs() < 1e-6 * fd.abs().max(1.0), "raw {j}: {fd} vs {bias}");
    }
}
