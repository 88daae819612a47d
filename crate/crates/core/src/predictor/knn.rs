//! k-nearest-neighbour regression on standardized features.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub mean: Vec<f64>,
    /// Population std per feature; constant features get scale 1.
    pub scale: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], k: usize) -> Self {
        let d = inputs.first().map_or(0, Vec::len);
        let mut mean = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = inputs.iter().map(|x| x[j]).collect();
            mean.push(stats::mean(&col));
            let s = stats::population_std(&col);
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        let mut model = Self { k: k.max(1), mean, scale, points: Vec::new(), targets: targets.to_vec() };
        model.points = inputs.iter().map(|x| model.standardize(x)).collect();
        model
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Mean target of the k nearest training points (Euclidean). Equal
    /// distances resolve to the earlier training row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let q = self.standardize(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        if k == 0 {
            return 0.0;
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, cmp);
        dist[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }
}
