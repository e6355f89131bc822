//! Small generated datasets with known optimal predictors.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;

/// Φ(2): accuracy of the optimal rule `sign(x₀)` for unit-variance blobs
/// centred at (±2, 0) with equal priors.
pub const GAUSSIANS2_BAYES_ACCURACY: f64 = 0.977_249_868_051_820_8;

const SINE_DIM: usize = 4;
const SINE_OUTPUTS: usize = 4;

/// Frequencies `a_k` (one row per output) and phases `φ_k` for multi_sine.
const SINE_FREQ: [[f64; SINE_DIM]; SINE_OUTPUTS] = [
    [1.0, 0.5, 0.0, -0.5],
    [0.0, 1.0, -1.0, 0.5],
    [-0.5, 0.0, 1.0, 1.0],
    [0.5, -1.0, 0.5, 0.0],
];
const SINE_PHASE: [f64; SINE_OUTPUTS] = [0.0, 0.5, 1.0, 1.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Two classes, 2-D, unit-variance Gaussian blobs at (−2, 0) and (+2, 0).
    Gaussians2,
    /// Regression with `y_k = sin(a_k · x + φ_k)`, `x ~ U(−1, 1)^4`, no noise.
    MultiSine,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussians2" => Ok(SyntheticKind::Gaussians2),
            "multi_sine" => Ok(SyntheticKind::MultiSine),
            other => Err(Error::invalid(format!(
                "unknown synthetic dataset '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SyntheticKind::Gaussians2 => "gaussians2",
            SyntheticKind::MultiSine => "multi_sine",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// Best achievable test accuracy, for classification kinds.
    pub bayes_accuracy: Option<f64>,
}

pub fn make_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<Synthetic> {
    if n == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    let mut rng = seeded(seed);
    match kind {
        SyntheticKind::Gaussians2 => {
            let mut x = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let label = usize::from(rng.random_bool(0.5));
                let centre = if label == 1 { 2.0 } else { -2.0 };
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                x.push(centre + a);
                x.push(b);
                labels.push(label);
            }
            let dataset = Dataset::from_labels(Matrix::from_vec(n, 2, x)?, &labels, 2)?
                .with_class_names(vec!["left".into(), "right".into()])?;
            Ok(Synthetic {
                dataset,
                bayes_accuracy: Some(GAUSSIANS2_BAYES_ACCURACY),
            })
        }
        SyntheticKind::MultiSine => {
            let values = (0..n * SINE_DIM)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let x = Matrix::from_vec(n, SINE_DIM, values)?;
            let y = multi_sine_oracle(&x)?;
            let dataset = Dataset::new(
                x,
                y,
                Task::Regression {
                    outputs: SINE_OUTPUTS,
                },
            )?;
            Ok(Synthetic {
                dataset,
                bayes_accuracy: None,
            })
        }
    }
}

/// Noise-free multi_sine targets for arbitrary inputs.
pub fn multi_sine_oracle(x: &Matrix) -> Result<Matrix> {
    if x.cols() != SINE_DIM {
        return Err(Error::dim("multi_sine_oracle", SINE_DIM, x.cols()));
    }
    let mut y = Matrix::zeros(x.rows(), SINE_OUTPUTS);
    for i in 0..x.rows() {
        let row = x.row(i);
        for k in 0..SINE_OUTPUTS {
            let arg: f64 = SINE_FREQ[k].iter().zip(row).map(|(a, v)| a * v).sum();
            y.set(i, k, (arg + SINE_PHASE[k]).sin());
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        for kind in [SyntheticKind::Gaussians2, SyntheticKind::MultiSine] {
            let a = make_synthetic(kind, 50, 4).unwrap().dataset;
            let b = make_synthetic(kind, 50, 4).unwrap().dataset;
            let c = make_synthetic(kind, 50, 5).unwrap().dataset;
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(
            "spirals".parse::<SyntheticKind>(),
            Err(Error::Validation(_))
        ));
        assert_eq!(
            "multi_sine".parse::<SyntheticKind>().unwrap(),
            SyntheticKind::MultiSine
        );
    }

    #[test]
    fn oracle_predictor_has_zero_mse() {
        let ds = make_synthetic(SyntheticKind::MultiSine, 200, 1)
            .unwrap()
            .dataset;
        let pred = multi_sine_oracle(ds.features()).unwrap();
        assert_eq!(&pred, ds.targets());
    }

    #[test]
    fn bayes_rule_accuracy_is_close_to_reference() {
        let s = make_synthetic(SyntheticKind::Gaussians2, 20000, 9).unwrap();
        let labels = s.dataset.labels();
        let hits = s
            .dataset
            .features()
            .iter_rows()
            .zip(&labels)
            .filter(|(x, &l)| usize::from(x[0] > 0.0) == l)
            .count();
        let acc = hits as f64 / labels.len() as f64;
        // binomial std at n=20000 is ~0.001
        assert!((acc - s.bayes_accuracy.unwrap()).abs() < 0.005, "{acc}");
    }
}
