//! Seeded random networks for property tests.
#![allow(dead_code)]

use polinfer::network::{DiscreteNetwork, NetworkBuilder};
use polinfer::temporal::TwoSliceDbn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A strictly positive distribution over `card` states.
pub fn random_row(rng: &mut impl Rng, card: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn states(card: usize) -> Vec<String> {
    (0..card).map(|s| format!("s{s}")).collect()
}

pub struct Shape {
    pub names: Vec<String>,
    pub cards: Vec<usize>,
    /// Parents of node `i`, drawn from nodes before it.
    pub parents: Vec<Vec<usize>>,
}

/// Names are a shuffled numbering so that topological order, insertion
/// order and name order all differ.
pub fn random_shape(rng: &mut impl Rng, nodes: usize, max_card: usize, max_parents: usize) -> Shape {
    let mut labels: Vec<usize> = (0..nodes).collect();
    labels.shuffle(rng);
    let names = labels.iter().map(|l| format!("V{l}")).collect();
    let cards = (0..nodes).map(|_| rng.gen_range(2..=max_card)).collect();
    let parents = (0..nodes)
        .map(|i| {
            let mut earlier: Vec<usize> = (0..i).collect();
            earlier.shuffle(rng);
            let k = rng.gen_range(0..=max_parents.min(i));
            let mut p: Vec<usize> = earlier.into_iter().take(k).collect();
            p.sort_unstable();
            p
        })
        .collect();
    Shape { names, cards, parents }
}

pub fn build(rng: &mut impl Rng, shape: &Shape) -> DiscreteNetwork {
    let mut b = NetworkBuilder::new();
    for (i, name) in shape.names.iter().enumerate() {
        let rows: usize = shape.parents[i].iter().map(|&p| shape.cards[p]).product();
        let table = (0..rows).flat_map(|_| random_row(rng, shape.cards[i])).collect();
        let st = states(shape.cards[i]);
        let st: Vec<&str> = st.iter().map(String::as_str).collect();
        b.node(
            name,
            &st,
            shape.parents[i].iter().map(|&p| shape.names[p].clone()),
            table,
        );
    }
    b.build().expect("random network is valid")
}

pub fn random_network(seed: u64, max_nodes: usize, max_card: usize) -> DiscreteNetwork {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_nodes);
    let shape = random_shape(&mut r, n, max_card, 3);
    build(&mut r, &shape)
}

/// Random 2-slice DBN: the slice-1 graph is reused within later slices,
/// plus random lag-1 parents.
pub fn random_dbn(seed: u64, max_nodes: usize) -> TwoSliceDbn {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_nodes);
    let shape = random_shape(&mut r, n, 3, 2);
    let initial = build(&mut r, &shape);
    let transition = (0..n)
        .map(|i| {
            let mut parents: Vec<(String, u8)> =
                shape.parents[i].iter().map(|&p| (shape.names[p].clone(), 0)).collect();
            for j in 0..n {
                if r.gen_bool(if i == j { 0.7 } else { 0.2 }) {
                    parents.push((shape.names[j].clone(), 1));
                }
            }
            let rows: usize = parents
                .iter()
                .map(|(p, _)| shape.cards[shape.names.iter().position(|x| x == p).unwrap()])
                .product();
            let table = (0..rows).flat_map(|_| random_row(&mut r, shape.cards[i])).collect();
            (shape.names[i].clone(), parents, table)
        })
        .collect();
    TwoSliceDbn::new(initial, transition).expect("random DBN is valid")
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{what}: {a:?} vs {b:?}");
    }
}
