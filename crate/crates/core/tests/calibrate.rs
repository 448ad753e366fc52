use patchtree_core::calibrate::{
    ece, fit_temperature, span_confidence, token_entropy, LogitSample, TokenDistribution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Labels drawn from softmax(z); scores reported as `scale * z`.
fn scaled_set(seed: u64, n: usize, classes: usize, scale: f64) -> Vec<LogitSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.5).unwrap();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..classes).map(|_| normal.sample(&mut rng)).collect();
            let w: Vec<f64> = z.iter().map(|x| x.exp()).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.gen_range(0.0..total);
            let mut correct = classes - 1;
            for (i, wi) in w.iter().enumerate() {
                if u < *wi {
                    correct = i;
                    break;
                }
                u -= wi;
            }
            LogitSample {
                scores: z.iter().map(|x| scale * x).collect(),
                correct,
            }
        })
        .collect()
}

#[test]
fn recovers_forward_scaling() {
    let samples = scaled_set(42, 20_000, 4, 2.0);
    let fit = fit_temperature(&samples, 10).unwrap();
    assert!(
        (fit.model.temperature - 2.0).abs() <= 0.3,
        "T = {}",
        fit.model.temperature
    );
    assert!(fit.model.ece <= fit.ece_before + 1e-9);
    assert!(fit.ece_before > 0.05);
}

#[test]
fn calibrated_set_stays_near_one_and_never_worsens() {
    for seed in 0..5 {
        let samples = scaled_set(seed, 5_000, 3, 1.0);
        let fit = fit_temperature(&samples, 10).unwrap();
        assert!(fit.model.ece <= fit.ece_before + 1e-9);
        assert!(
            (fit.model.temperature - 1.0).abs() < 0.5,
            "T = {}",
            fit.model.temperature
        );
    }
}

#[test]
fn entropy_and_confidence_identities() {
    let uniform = TokenDistribution {
        probs: vec![("a".into(), 0.5), ("b".into(), 0.5)],
        tail_mass: 0.0,
    };
    let h = token_entropy(&uniform).unwrap();
    assert!((h - std::f64::consts::LN_2).abs() < 1e-9);
    assert!((span_confidence(&[h]).unwrap() - 0.5).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let mut entropies: Vec<f64> = (0..rng.gen_range(1..10))
            .map(|_| rng.gen_range(0.0..3.0))
            .collect();
        let c = span_confidence(&entropies).unwrap();
        let mean = entropies.iter().sum::<f64>() / entropies.len() as f64;
        assert!((c - (-mean).exp()).abs() < 1e-12);
        entropies.reverse();
        assert!((span_confidence(&entropies).unwrap() - c).abs() < 1e-12);
    }
}

#[test]
fn ece_is_bounded_and_matches_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let preds: Vec<(f64, bool)> = (0..rng.gen_range(1..60))
            .map(|_| (rng.gen_range(0.0..=1.0), rng.gen_bool(0.6)))
            .collect();
        let got = ece(&preds, 10).unwrap();
        // Right-inclusive bins: (b/10, (b+1)/10], with 0 in the first.
        let mut sums = [(0usize, 0.0f64, 0usize); 10];
        for (c, ok) in &preds {
            let b = ((c * 10.0).ceil() as usize).saturating_sub(1).min(9);
            sums[b].0 += 1;
            sums[b].1 += c;
            sums[b].2 += usize::from(*ok);
        }
        let n = preds.len() as f64;
        let want: f64 = sums
            .iter()
            .filter(|s| s.0 > 0)
            .map(|(k, conf, hits)| {
                *k as f64 / n * (*hits as f64 / *k as f64 - conf / *k as f64).abs()
            })
            .sum();
        assert!((got - want).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&got));
    }
}
