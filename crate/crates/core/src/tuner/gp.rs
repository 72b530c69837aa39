//! Gaussian-process regression surrogate over one-hot encoded assignments,
//! with an RBF kernel, Cholesky-based inference, marginal-likelihood
//! hyperparameter selection on a small grid, and expected improvement.

/// Kernel and noise hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Fitted model: training inputs, Cholesky factor of K + noise I, and the
/// solved weights, all over mean/variance-normalized targets.
pub struct GpModel {
    x: Vec<Vec<f64>>,
    chol: Cholesky,
    alpha: Vec<f64>,
    hyper: GpHyper,
    y_mean: f64,
    y_std: f64,
    pub log_marginal_likelihood: f64,
}

// One-hot encodings differing in j parameters sit at distance sqrt(2 j), so
// useful length scales live between "neighbors decorrelated" (~0.7) and
// "whole space correlated" (~3).
const LENGTH_SCALE_GRID: [f64; 4] = [0.35, 0.7, 1.4, 2.8];
const SIGNAL_VARIANCE_GRID: [f64; 3] = [0.5, 1.0, 2.0];
const NOISE_VARIANCE_GRID: [f64; 3] = [1e-6, 1e-5, 1e-4];

impl GpModel {
    /// Fit over the hyperparameter grid, keeping the highest marginal
    /// likelihood (first combination wins ties, so fits are deterministic).
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> GpModel {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty(), "cannot fit a GP to zero observations");
        let mut best: Option<GpModel> = None;
        for &length_scale in &LENGTH_SCALE_GRID {
            for &signal_variance in &SIGNAL_VARIANCE_GRID {
                for &noise_variance in &NOISE_VARIANCE_GRID {
                    let hyper = GpHyper {
                        length_scale,
                        signal_variance,
                        noise_variance,
                    };
                    if let Some(model) = GpModel::fit_with(x, y, hyper) {
                        let better = match &best {
                            Some(b) => model.log_marginal_likelihood > b.log_marginal_likelihood,
                            None => true,
                        };
                        if better {
                            best = Some(model);
                        }
                    }
                }
            }
        }
        best.unwrap_or_else(|| {
            // Pure-noise fallback; K + I is always positive definite.
            GpModel::fit_with(
                x,
                y,
                GpHyper {
                    length_scale: 1.0,
                    signal_variance: 1e-12,
                    noise_variance: 1.0,
                },
            )
            .expect("noise-dominated kernel must decompose")
        })
    }

    pub(crate) fn fit_with(x: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Option<GpModel> {
        let n = x.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y_norm: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rbf(&x[i], &x[j], hyper);
                k[i][j] = v;
                k[j][i] = v;
            }
            k[i][i] += hyper.noise_variance;
        }
        let chol = Cholesky::decompose(&k)?;
        let alpha = chol.solve(&y_norm);

        let fit_term: f64 = y_norm.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let log_det: f64 = chol.diag_log_sum();
        let lml = -0.5 * fit_term - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

        Some(GpModel {
            x: x.to_vec(),
            chol,
            alpha,
            hyper,
            y_mean,
            y_std,
            log_marginal_likelihood: lml,
        })
    }

    /// Posterior mean and variance at one point, in the original target scale.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let k_star: Vec<f64> = self.x.iter().map(|xi| rbf(xi, point, self.hyper)).collect();
        let mean_norm: f64 = k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.forward_solve(&k_star);
        let var_norm = (self.hyper.signal_variance - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (
            mean_norm * self.y_std + self.y_mean,
            var_norm * self.y_std * self.y_std,
        )
    }
}

fn rbf(a: &[f64], b: &[f64], hyper: GpHyper) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    hyper.signal_variance * (-d2 / (2.0 * hyper.length_scale * hyper.length_scale)).exp()
}

/// Expected improvement of a Gaussian posterior over the incumbent best,
/// for maximization.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let delta = mean - best;
    if std <= 1e-12 {
        return delta.max(0.0);
    }
    let z = delta / std;
    (delta * standard_normal_cdf(z) + std * standard_normal_pdf(z)).max(0.0)
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Abramowitz & Stegun 7.1.26 approximation; absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Lower-triangular Cholesky factor.
pub(crate) struct Cholesky {
    l: Vec<Vec<f64>>,
}

impl Cholesky {
    /// Returns None when the matrix is not numerically positive definite.
    fn decompose(a: &[Vec<f64>]) -> Option<Cholesky> {
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum();
                let sum = a[i][j] - dot;
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i][j] = sum.sqrt();
                } else {
                    l[i][j] = sum / l[j][j];
                }
            }
        }
        Some(Cholesky { l })
    }

    /// Solve L y = b.
    fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let dot: f64 = self.l[i][..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - dot) / self.l[i][i];
        }
        y
    }

    /// Solve (L L^T) x = b.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.forward_solve(b);
        let n = b.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let dot: f64 = ((i + 1)..n).map(|k| self.l[k][i] * x[k]).sum();
            x[i] = (y[i] - dot) / self.l[i][i];
        }
        x
    }

    fn diag_log_sum(&self) -> f64 {
        self.l.iter().enumerate().map(|(i, row)| row[i].ln()).sum()
    }
}
