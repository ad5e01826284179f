//! Learnable codebook and nearest-entry quantization.

use ndarray::{Array2, ArrayView1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelError;

pub const GAUSSIAN_INIT_STD: f64 = 0.1;
pub const KMEANS_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `K x d`, one entry per row.
    pub entries: Array2<f64>,
}

impl Codebook {
    pub fn new(entries: Array2<f64>) -> Result<Self, ModelError> {
        if entries.nrows() < 2 {
            return Err(ModelError::Config(format!(
                "codebook needs at least 2 entries, got {}",
                entries.nrows()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Config("codebook has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn gaussian<R: Rng>(k: usize, d: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite positive std");
        Self {
            entries: Array2::from_shape_fn((k, d), |_| normal.sample(rng)),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entry(&self, k: usize) -> ArrayView1<'_, f64> {
        self.entries.row(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSelection {
    pub indices: Vec<usize>,
    /// Row `i` is a copy of codebook entry `indices[i]`.
    pub quantized: Array2<f64>,
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest entry by Euclidean distance; ties go to the lowest index.
pub fn nearest_entry(h: ArrayView1<f64>, cb: &Codebook) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (k, c) in cb.entries.rows().into_iter().enumerate() {
        let d = squared_distance(h, c);
        if d < best_dist {
            best = k;
            best_dist = d;
        }
    }
    best
}

pub fn quantize(h: &Array2<f64>, cb: &Codebook) -> Result<QuantizedSelection, ModelError> {
    if h.ncols() != cb.dim() {
        return Err(ModelError::dims("latent dimension", cb.dim(), h.ncols()));
    }
    let indices: Vec<usize> = h.rows().into_iter().map(|r| nearest_entry(r, cb)).collect();
    let quantized = cb.entries.select(Axis(0), &indices);
    Ok(QuantizedSelection { indices, quantized })
}

/// Lloyd's k-means with k-means++ seeding over the distinct sample rows. When
/// there are fewer distinct rows than `k`, the remainder are jittered copies.
pub fn kmeans_codebook<R: Rng>(
    points: &Array2<f64>,
    k: usize,
    iters: usize,
    rng: &mut R,
) -> Result<Codebook, ModelError> {
    if points.nrows() == 0 {
        return Err(ModelError::Config(
            "k-means needs at least one point".into(),
        ));
    }
    let d = points.ncols();
    let mut distinct: Vec<usize> = Vec::new();
    {
        let mut seen: Vec<Vec<u64>> = Vec::new();
        for (i, row) in points.rows().into_iter().enumerate() {
            let bits: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if let Err(pos) = seen.binary_search(&bits) {
                seen.insert(pos, bits);
                distinct.push(i);
            }
        }
    }
    let seeds = kmeans_pp_seeds(points, &distinct, k.min(distinct.len()), rng);
    let normal = Normal::new(0.0, GAUSSIAN_INIT_STD).expect("finite positive std");
    let mut centers = Array2::zeros((k, d));
    for c in 0..k {
        let mut row = centers.row_mut(c);
        row.assign(&points.row(seeds[c % seeds.len()]));
        if c >= seeds.len() {
            row.mapv_inplace(|v| v + normal.sample(rng));
        }
    }
    let mut cb = Codebook { entries: centers };
    for _ in 0..iters {
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for row in points.rows() {
            let j = nearest_entry(row, &cb);
            counts[j] += 1;
            let mut s = sums.row_mut(j);
            s += &row;
        }
        let mut moved = false;
        for (j, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = sums.row(j).mapv(|v| v / count as f64);
                if mean != cb.entries.row(j) {
                    moved = true;
                }
                cb.entries.row_mut(j).assign(&mean);
            }
        }
        if !moved {
            break;
        }
    }
    Ok(cb)
}

/// Picks `count` rows from `candidates`, each next one with probability
/// proportional to its squared distance from the nearest row picked so far.
fn kmeans_pp_seeds<R: Rng>(
    points: &Array2<f64>,
    candidates: &[usize],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut chosen = vec![candidates[rng.random_range(0..candidates.len())]];
    let mut dist: Vec<f64> = candidates
        .iter()
        .map(|&i| squared_distance(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < count {
        let next = match WeightedIndex::new(&dist) {
            Ok(w) => candidates[w.sample(rng)],
            Err(_) => break,
        };
        chosen.push(next);
        for (d, &i) in dist.iter_mut().zip(candidates) {
            *d = d.min(squared_distance(points.row(i), points.row(next)));
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_examples() {
        let cb = Codebook::new(arr2(&[[1.0, 0.0], [0.0, 2.0]])).unwrap();
        let sel = quantize(&arr2(&[[0.0, 0.0], [0.0, 2.0]]), &cb).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
        assert_eq!(sel.quantized, arr2(&[[1.0, 0.0], [0.0, 2.0]]));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cb = Codebook::new(arr2(&[[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])).unwrap();
        let sel = quantize(&arr2(&[[0.0, 0.0], [1.0, 0.0]]), &cb).unwrap();
        assert_eq!(sel.indices, vec![0, 0]);
    }

    #[test]
    fn quantize_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let cb = Codebook::gaussian(8, 4, 1.0, &mut rng);
            let h = Codebook::gaussian(5, 4, 1.0, &mut rng).entries;
            let sel = quantize(&h, &cb).unwrap();
            for (i, row) in h.rows().into_iter().enumerate() {
                let dists: Vec<f64> = cb
                    .entries
                    .rows()
                    .into_iter()
                    .map(|c| (&row - &c).mapv(|v| v * v).sum().sqrt())
                    .collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let expect = dists.iter().position(|&d| d == min).unwrap();
                assert_eq!(sel.indices[i], expect);
                assert_eq!(sel.quantized.row(i), cb.entries.row(expect));
            }
        }
    }

    #[test]
    fn rejects_small_or_mismatched() {
        assert!(Codebook::new(arr2(&[[1.0, 0.0]])).is_err());
        let cb = Codebook::new(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert!(matches!(
            quantize(&arr2(&[[1.0, 0.0, 0.0]]), &cb),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kmeans_finds_separated_clusters() {
        let pts = arr2(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [5.0, 5.0],
            [5.1, 5.0],
            [5.0, 5.1],
        ]);
        let cb = kmeans_codebook(&pts, 2, KMEANS_ITERS, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut centers: Vec<(f64, f64)> = cb
            .entries
            .rows()
            .into_iter()
            .map(|r| (r[0], r[1]))
            .collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centers[0].0 - 1.0 / 30.0).abs() < 1e-12);
        assert!((centers[1].0 - 5.0 - 1.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_with_too_few_distinct_points() {
        let pts = arr2(&[[1.0, 1.0], [1.0, 1.0]]);
        let cb = kmeans_codebook(&pts, 4, KMEANS_ITERS, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(cb.len(), 4);
        assert!(cb.entries.iter().all(|v| v.is_finite()));
    }
}
