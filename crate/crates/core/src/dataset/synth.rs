use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledDataset, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub label: Label,
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub covariance: Vec<Vec<f64>>,
    pub count: usize,
}

impl GaussianComponent {
    pub fn isotropic(label: Label, mean: Vec<f64>, variance: f64, count: usize) -> Self {
        let d = mean.len();
        let covariance = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        GaussianComponent {
            label,
            mean,
            covariance,
            count,
        }
    }
}

/// Gaussian mixture per class plus explicit points injected verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub n_features: usize,
    pub components: Vec<GaussianComponent>,
    #[serde(default)]
    pub outliers: Vec<(Vec<f64>, Label)>,
    /// Snap drawn coordinates to multiples of this step, which creates exact
    /// duplicates (and label conflicts where the classes overlap). Outliers
    /// are never snapped.
    #[serde(default)]
    pub quantize: Option<f64>,
}

/// Shipped constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Two overlapping 2-D clusters with deep negative outliers inside the
    /// positive cluster. Linear and depth-1 separators both make mistakes.
    Outliers,
    /// Two well separated 2-D clusters.
    Separable,
    /// Moderately overlapping 2-D clusters.
    Overlap,
    /// Overlapping 10-D clusters.
    Overlap10d,
    /// Overlapping 2-D clusters snapped to a coarse grid, so some positives
    /// share coordinates with negatives.
    Quantized,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Outliers,
        Preset::Separable,
        Preset::Overlap,
        Preset::Overlap10d,
        Preset::Quantized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Outliers => "outliers",
            Preset::Separable => "separable",
            Preset::Overlap => "overlap",
            Preset::Overlap10d => "overlap-10d",
            Preset::Quantized => "quantized",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn spec(self) -> ConstellationSpec {
        use Label::{Negative as N, Positive as P};
        let full = |label, mean: [f64; 2], cov: [[f64; 2]; 2], count| GaussianComponent {
            label,
            mean: mean.to_vec(),
            covariance: cov.iter().map(|r| r.to_vec()).collect(),
            count,
        };
        match self {
            Preset::Outliers => ConstellationSpec {
                n_features: 2,
                components: vec![
                    full(N, [0.0, 0.0], [[1.0, 0.3], [0.3, 1.0]], 80),
                    full(P, [2.5, 2.5], [[1.0, -0.2], [-0.2, 1.0]], 60),
                ],
                outliers: vec![(vec![2.5, 2.5], N), (vec![3.2, 2.0], N)],
                quantize: None,
            },
            Preset::Separable => ConstellationSpec {
                n_features: 2,
                components: vec![
                    GaussianComponent::isotropic(N, vec![-3.0, 0.0], 0.5, 60),
                    GaussianComponent::isotropic(P, vec![3.0, 0.0], 0.5, 40),
                ],
                outliers: Vec::new(),
                quantize: None,
            },
            Preset::Overlap => ConstellationSpec {
                n_features: 2,
                components: vec![
                    GaussianComponent::isotropic(N, vec![0.0, 0.0], 1.0, 150),
                    GaussianComponent::isotropic(P, vec![1.5, 1.0], 1.0, 100),
                ],
                outliers: Vec::new(),
                quantize: None,
            },
            Preset::Overlap10d => ConstellationSpec {
                n_features: 10,
                components: vec![
                    GaussianComponent::isotropic(N, vec![0.0; 10], 1.0, 150),
                    GaussianComponent::isotropic(P, vec![0.6; 10], 1.0, 100),
                ],
                outliers: Vec::new(),
                quantize: None,
            },
            Preset::Quantized => ConstellationSpec {
                n_features: 2,
                components: vec![
                    GaussianComponent::isotropic(N, vec![0.0, 0.0], 1.0, 150),
                    GaussianComponent::isotropic(P, vec![1.2, 1.2], 1.0, 100),
                ],
                outliers: Vec::new(),
                quantize: Some(0.5),
            },
        }
    }
}

impl ConstellationSpec {
    /// Random mixture used for property runs: `components_per_class` isotropic
    /// blobs per class whose centres are drawn with spread `spread`. Small
    /// spreads give heavily mixed classes.
    pub fn random_mixture(
        n_features: usize,
        components_per_class: usize,
        spread: f64,
        count_per_component: usize,
        quantize: Option<f64>,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut components = Vec::new();
        for label in [Label::Negative, Label::Positive] {
            for _ in 0..components_per_class {
                let mean = (0..n_features)
                    .map(|_| rng.random_range(-spread..=spread))
                    .collect();
                let variance = rng.random_range(0.3..1.5);
                let count = rng.random_range(count_per_component / 2..=count_per_component).max(1);
                components.push(GaussianComponent::isotropic(label, mean, variance, count));
            }
        }
        ConstellationSpec {
            n_features,
            components,
            outliers: Vec::new(),
            quantize,
        }
    }
}

/// Lower-triangular Cholesky factor, or `None` if not positive definite.
fn cholesky(cov: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = cov.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        if cov[i].len() != d {
            return None;
        }
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let diag = cov[i][i] - s;
                if !(diag > 0.0) {
                    return None;
                }
                l[i][j] = diag.sqrt();
            } else {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return None;
                }
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Draw a dataset from `spec`. Components are sampled in order, then the
/// outliers are appended unchanged.
pub fn synth_constellation(spec: &ConstellationSpec, seed: u64) -> Result<LabeledDataset> {
    let d = spec.n_features;
    if let Some(step) = spec.quantize {
        if !(step > 0.0) {
            return Err(Error::InvalidConfig("quantize step must be positive".into()));
        }
    }
    let factors = spec
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.count == 0 {
                return Err(Error::InvalidConfig(format!("component {i} has zero count")));
            }
            if c.mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.mean.len(),
                });
            }
            if c.covariance.len() != d {
                return Err(Error::DegenerateCovariance(i));
            }
            cholesky(&c.covariance).ok_or(Error::DegenerateCovariance(i))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (c, l) in spec.components.iter().zip(&factors) {
        for _ in 0..c.count {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let x = (0..d)
                .map(|i| {
                    let v = c.mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
                    match spec.quantize {
                        Some(step) => (v / step).round() * step,
                        None => v,
                    }
                })
                .collect();
            samples.push(Sample::new(x, c.label));
        }
    }
    for (x, label) in &spec.outliers {
        samples.push(Sample::new(x.clone(), *label));
    }
    LabeledDataset::from_samples(d, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_dimension() {
        let spec = ConstellationSpec {
            n_features: 2,
            components: vec![
                GaussianComponent::isotropic(Label::Positive, vec![1.0, 1.0], 1.0, 50),
                GaussianComponent::isotropic(Label::Negative, vec![-1.0, -1.0], 1.0, 50),
            ],
            outliers: vec![],
            quantize: None,
        };
        let ds = synth_constellation(&spec, 1).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.n_features(), 2);
        assert_eq!((ds.n_pos(), ds.n_neg()), (50, 50));
    }

    #[test]
    fn outlier_injected_verbatim() {
        let mean = vec![2.0, 3.0];
        let spec = ConstellationSpec {
            n_features: 2,
            components: vec![GaussianComponent::isotropic(Label::Positive, mean.clone(), 1.0, 10)],
            outliers: vec![(mean.clone(), Label::Negative)],
            quantize: Some(0.25),
        };
        let ds = synth_constellation(&spec, 5).unwrap();
        let last = ds.len() - 1;
        assert_eq!(ds.row(last), mean.as_slice());
        assert_eq!(ds.label(last), Label::Negative);
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = Preset::Overlap.spec();
        assert_eq!(
            synth_constellation(&spec, 11).unwrap(),
            synth_constellation(&spec, 11).unwrap()
        );
        assert_ne!(
            synth_constellation(&spec, 11).unwrap().features(),
            synth_constellation(&spec, 12).unwrap().features()
        );
    }

    #[test]
    fn degenerate_covariance_rejected() {
        let spec = ConstellationSpec {
            n_features: 2,
            components: vec![GaussianComponent {
                label: Label::Positive,
                mean: vec![0.0, 0.0],
                covariance: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
                count: 3,
            }],
            outliers: vec![],
            quantize: None,
        };
        assert!(matches!(
            synth_constellation(&spec, 0),
            Err(Error::DegenerateCovariance(0))
        ));
    }

    #[test]
    fn presets_build() {
        for p in Preset::ALL {
            let ds = synth_constellation(&p.spec(), 0).unwrap();
            assert!(ds.n_pos() > 0 && ds.n_neg() > 0, "{}", p.name());
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
    }
}
