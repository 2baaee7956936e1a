//! Labelled feature sets and a seeded Gaussian-mixture generator.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Features (without the bias column) and integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset { features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// `X` with a trailing all-ones bias column.
    pub fn design(&self) -> Array2<f64> {
        concatenate![Axis(1), self.features, Array2::ones((self.len(), 1))]
    }

    /// One-hot label matrix.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut y = Array2::zeros((self.len(), self.classes));
        for (i, &l) in self.labels.iter().enumerate() {
            y[[i, l]] = 1.0;
        }
        y
    }

    /// Rows `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Dataset {
        Dataset {
            features: self.features.slice(ndarray::s![lo..hi, ..]).to_owned(),
            labels: self.labels[lo..hi].to_vec(),
            classes: self.classes,
        }
    }

    fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// Isotropic Gaussian clusters: class `k` is `μ_k + N(0, I)` with
/// `μ_k ~ separation · N(0, I/f)`, so centre distances do not grow with `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            classes: 3,
            features: 16,
            per_class: 234,
            separation: 2.0,
            seed: 7,
        }
    }
}

/// Samples a mixture, shuffled.
pub fn gaussian_mixture(spec: &MixtureSpec) -> Result<Dataset> {
    if spec.classes < 2 || spec.features == 0 {
        return Err(Error::Shape("a mixture needs at least 2 classes and 1 feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let f = spec.features;
    let spread = spec.separation / (f as f64).sqrt();
    let centres: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..f).map(|_| spread * normal(&mut rng)).collect())
        .collect();
    let n = spec.classes * spec.per_class;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut features = Array2::zeros((n, f));
    let mut labels = vec![0; n];
    for (row, &k) in order.iter().enumerate() {
        let class = k % spec.classes;
        labels[row] = class;
        for j in 0..f {
            features[[row, j]] = centres[class][j] + normal(&mut rng);
        }
    }
    Dataset::new(features, labels, spec.classes)
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Splits off consecutive train/validation/test parts of the given sizes.
pub fn split(data: &Dataset, sizes: [usize; 3]) -> Result<[Dataset; 3]> {
    let total: usize = sizes.iter().sum();
    if total > data.len() {
        return Err(Error::Shape(format!("split needs {total} rows, have {}", data.len())));
    }
    let idx: Vec<usize> = (0..total).collect();
    let (a, rest) = idx.split_at(sizes[0]);
    let (b, c) = rest.split_at(sizes[1]);
    Ok([data.select(a), data.select(b), data.select(c)])
}

/// The reference three-class problem: 16 features, 500/100/100 rows.
pub fn reference_mixture(seed: u64) -> Result<[Dataset; 3]> {
    let data = gaussian_mixture(&MixtureSpec { seed, ..Default::default() })?;
    split(&data, [500, 100, 100])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_appends_bias() {
        let d = Dataset::new(Array2::from_elem((3, 2), 2.0), vec![0, 1, 1], 2).unwrap();
        let x = d.design();
        assert_eq!(x.dim(), (3, 3));
        assert!(x.column(2).iter().all(|&v| v == 1.0));
        assert_eq!(d.one_hot().row(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(Dataset::new(Array2::zeros((2, 1)), vec![0, 3], 3).is_err());
        assert!(Dataset::new(Array2::zeros((2, 1)), vec![0], 3).is_err());
    }

    #[test]
    fn mixture_is_seeded_and_balanced() {
        let spec = MixtureSpec::default();
        let a = gaussian_mixture(&spec).unwrap();
        assert_eq!(a, gaussian_mixture(&spec).unwrap());
        assert_eq!(a.len(), 702);
        for k in 0..3 {
            assert_eq!(a.labels.iter().filter(|&&l| l == k).count(), 234);
        }
        let [tr, va, te] = reference_mixture(1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (500, 100, 100));
    }
}
