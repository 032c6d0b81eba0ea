//! Small dense-vector helpers for row-major sample matrices.

pub type Matrix = Vec<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn column_means(x: &[Vec<f64>]) -> Vec<f64> {
    let d = x.first().map_or(0, |r| r.len());
    let mut m = vec![0.0; d];
    for row in x {
        for (acc, v) in m.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n = x.len().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

pub fn select_columns(x: &[Vec<f64>], cols: &[usize]) -> Matrix {
    x.iter()
        .map(|row| cols.iter().map(|&c| row[c]).collect())
        .collect()
}
