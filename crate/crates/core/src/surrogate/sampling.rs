//! Latin hypercube and uniform grid designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::Bound;
use crate::rng::rng_from;

/// Bin of `v` among `n` equal-width bins of `b`; the upper end falls in the last bin.
pub fn bin_index(b: &Bound, v: f64, n: usize) -> usize {
    let k = (b.normalize(v) * n as f64).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(n - 1)
    }
}

/// `n` points with exactly one sample per equal-width bin in every dimension.
pub fn lhs_sample(bounds: &[Bound], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let mut pts = vec![vec![0.0; bounds.len()]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, b) in bounds.iter().enumerate() {
        perm.shuffle(&mut rng);
        for (i, &k) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let mut v = b.denormalize((k as f64 + u) / n as f64);
            if bin_index(b, v, n) != k || !b.contains(v) {
                v = b.denormalize((k as f64 + 0.5) / n as f64);
            }
            pts[i][j] = v;
        }
    }
    pts
}

/// Evenly spaced values over `b`, endpoints included; a single count gives the lower end.
pub fn linspace(b: &Bound, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![b.lo],
        _ => (0..count)
            .map(|i| if i + 1 == count { b.hi } else { b.lo + b.width() * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

/// Cartesian product of per-dimension linspaces, last dimension varying fastest.
pub fn uniform_grid(bounds: &[Bound], counts: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(bounds.len(), counts.len(), "one count per dimension");
    let axes: Vec<Vec<f64>> = bounds.iter().zip(counts).map(|(b, &c)| linspace(b, c)).collect();
    let mut out = vec![vec![]];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const UNIT: Bound = Bound::new(0.0, 1.0);

    fn one_per_bin(pts: &[Vec<f64>], bounds: &[Bound]) -> bool {
        let n = pts.len();
        (0..bounds.len()).all(|j| {
            let mut seen = vec![false; n];
            pts.iter().all(|p| {
                let k = bin_index(&bounds[j], p[j], n);
                !std::mem::replace(&mut seen[k], true)
            })
        })
    }

    #[test]
    fn four_points_one_per_quarter() {
        let pts = lhs_sample(&[UNIT], 4, 3);
        let mut bins: Vec<usize> = pts.iter().map(|p| (p[0] * 4.0).floor() as usize).collect();
        bins.sort();
        assert_eq!(bins, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lhs_is_deterministic() {
        let b = [UNIT, Bound::new(-2.0, 5.0)];
        assert_eq!(lhs_sample(&b, 50, 11), lhs_sample(&b, 50, 11));
        assert_ne!(lhs_sample(&b, 50, 11), lhs_sample(&b, 50, 12));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(uniform_grid(&[UNIT], &[3]), vec![vec![0.0], vec![0.5], vec![1.0]]);
        let g = uniform_grid(&[UNIT, Bound::new(2.0, 4.0)], &[2, 2]);
        assert_eq!(g, vec![vec![0.0, 2.0], vec![0.0, 4.0], vec![1.0, 2.0], vec![1.0, 4.0]]);
        assert_eq!(uniform_grid(&[UNIT, UNIT, UNIT], &[3, 4, 5]).len(), 60);
    }

    proptest! {
        #[test]
        fn stratified_in_every_dimension(n in 1usize..300, d in 1usize..6, seed in any::<u64>(),
                                         lo in -50.0f64..50.0, w in 1e-3f64..100.0) {
            let bounds: Vec<Bound> = (0..d).map(|j| Bound::new(lo + j as f64, lo + j as f64 + w)).collect();
            let pts = lhs_sample(&bounds, n, seed);
            prop_assert_eq!(pts.len(), n);
            prop_assert!(pts.iter().all(|p| p.iter().zip(&bounds).all(|(v, b)| b.contains(*v))));
            prop_assert!(one_per_bin(&pts, &bounds));
        }
    }
}
