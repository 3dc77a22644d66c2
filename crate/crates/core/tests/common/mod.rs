#![allow(dead_code)]

use discrete_barycenter::centroid::GridSpec;
use discrete_barycenter::measure::{DiscreteMeasure, MeasureSet};
use rand::seq::index::sample;
use rand::Rng;

/// Random masses, positive and normalized.
pub fn masses<R: Rng>(rng: &mut R, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// N in `2..=max_n`, S_i in `1..=max_s`, d in `1..=max_d`. Half of the
/// instances use small integer coordinates, which makes ties common.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize, max_s: usize, max_d: usize) -> MeasureSet<f64> {
    let n = rng.gen_range(2..=max_n);
    let d = rng.gen_range(1..=max_d);
    let integer = rng.gen_bool(0.5);
    let measures = (0..n)
        .map(|_| {
            let s = rng.gen_range(1..=max_s);
            let points = (0..s)
                .map(|_| {
                    (0..d)
                        .map(|_| if integer { rng.gen_range(-3..=3) as f64 } else { rng.gen_range(-10.0..10.0) })
                        .collect()
                })
                .collect();
            DiscreteMeasure::new(d, points, masses(rng, s)).unwrap()
        })
        .collect();
    MeasureSet::new(measures).unwrap()
}

/// Measures on random subsets of a shared axis-aligned planar grid with
/// extents in `2..=max_l`; returns the grid as well.
pub fn grid_instance<R: Rng>(rng: &mut R, max_n: usize, max_l: usize) -> (MeasureSet<f64>, GridSpec) {
    let extents: Vec<usize> = (0..2).map(|_| rng.gen_range(2..=max_l)).collect();
    let origin: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let axes = vec![vec![rng.gen_range(0.5..4.0), 0.0], vec![0.0, rng.gen_range(0.5..4.0)]];
    let g = GridSpec::new(origin, axes, extents).unwrap();
    let nodes = g.node_count();
    let n = rng.gen_range(1..=max_n);
    let measures = (0..n)
        .map(|_| {
            let s = rng.gen_range(1..=nodes);
            let points = sample(rng, nodes, s)
                .into_iter()
                .map(|idx| g.node(&[idx % g.extents[0], idx / g.extents[0]]))
                .collect();
            DiscreteMeasure::new(2, points, masses(rng, s)).unwrap()
        })
        .collect();
    (MeasureSet::new(measures).unwrap(), g)
}
