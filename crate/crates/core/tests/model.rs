mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use childvoice::balance::LabeledMatrix;
use childvoice::corpus::Sex;
use childvoice::model::{train_erf, CandidateCount, ErfParams};
use common::normal;

fn matrix(x: Vec<Vec<f64>>, y: Vec<Sex>) -> LabeledMatrix {
    let names = (0..x[0].len()).map(|j| format!("x{j}")).collect();
    let ids = (0..x.len()).map(|i| format!("s{i}")).collect();
    LabeledMatrix::new(names, x, y, ids).unwrap()
}

fn accuracy(d: &LabeledMatrix, p: &ErfParams, test: &LabeledMatrix) -> f64 {
    let f = train_erf(d, p).unwrap();
    let hits = test.x.iter().zip(&test.y).filter(|(x, y)| f.predict(x).unwrap().label == **y).count();
    hits as f64 / test.len() as f64
}

fn xor(n: usize, seed: u64) -> LabeledMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        x.push(vec![a, b]);
        y.push(if (a > 0.0) == (b > 0.0) { Sex::F } else { Sex::M });
    }
    matrix(x, y)
}

#[test]
fn xor_is_fitted() {
    let d = xor(400, 1);
    let p = ErfParams {
        n_trees: 100,
        k_features: CandidateCount::All,
        ..ErfParams::default()
    };
    let train_acc = accuracy(&d, &p, &d);
    assert!(train_acc >= 0.95, "training accuracy {train_acc}");
    let test_acc = accuracy(&d, &p, &xor(400, 2));
    assert!(test_acc >= 0.85, "held-out accuracy {test_acc}");
}

fn signal_and_noise(n: usize, seed: u64) -> LabeledMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let sex = if i % 2 == 0 { Sex::F } else { Sex::M };
        let mut row = vec![normal(&mut rng) + if sex == Sex::F { 1.0 } else { -1.0 }];
        row.extend((0..5).map(|_| normal(&mut rng)));
        x.push(row);
        y.push(sex);
    }
    matrix(x, y)
}

#[test]
fn informative_feature_ranks_first() {
    let mut first = 0;
    for seed in 0..20 {
        let d = signal_and_noise(200, seed);
        let f = train_erf(
            &d,
            &ErfParams {
                n_trees: 100,
                seed,
                ..ErfParams::default()
            },
        )
        .unwrap();
        if f.importance().ranked()[0].0 == "x0" {
            first += 1;
        }
    }
    assert!(first >= 19, "signal ranked first in {first}/20 seeds");
}

#[test]
fn larger_ensembles_generalize_better() {
    let (mut one, mut many) = (0.0, 0.0);
    for seed in 0..10 {
        let train = signal_and_noise(200, seed);
        let test = signal_and_noise(1000, 100 + seed);
        let p = |n_trees| ErfParams {
            n_trees,
            seed,
            ..ErfParams::default()
        };
        one += accuracy(&train, &p(1), &test);
        many += accuracy(&train, &p(100), &test);
    }
    assert!(many > one + 0.3, "100 trees {many:.3} vs 1 tree {one:.3} (summed over 10 seeds)");
}

#[test]
fn forest_json_round_trip_predicts_identically() {
    let d = signal_and_noise(100, 9);
    let f = train_erf(&d, &ErfParams::default()).unwrap();
    let g = childvoice::model::Forest::from_json(&f.to_json().unwrap()).unwrap();
    assert_eq!(f, g);
    for x in &d.x {
        assert_eq!(f.predict(x).unwrap(), g.predict(x).unwrap());
    }
}
