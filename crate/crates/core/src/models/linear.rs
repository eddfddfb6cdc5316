use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_xy, dot, require_both_classes, Classifier};
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Svm,
    LogisticRegression,
}

/// Affine decision function `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub kind: LinearKind,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Logistic probability of the positive class. Meaningful for
    /// logistic regression only.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

impl Classifier for LinearModel {
    fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Margin tolerance: weight of the summed hinge loss against `½‖w‖²`.
    pub c: f64,
    pub seed: u64,
    /// Stop once the projected-gradient spread of an epoch falls below this.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl SvmConfig {
    pub fn new(c: f64, seed: u64) -> Self {
        SvmConfig {
            c,
            seed,
            tolerance: 1e-2,
            max_epochs: 20_000,
        }
    }
}

/// Soft-margin linear SVM:
/// `min ½‖w‖² + c Σ max(0, 1 − yᵢ(w·xᵢ + b))`,
/// equivalently the `1/(cN)`-regularized mean hinge loss.
///
/// Solved in the dual by cyclic coordinate descent with a seeded visiting
/// order. Inputs are centered and the intercept is carried by an extra
/// constant feature equal to the data radius, which keeps the intercept
/// penalty small next to the weight penalty.
pub fn train_svm(x: &[Vec<f64>], y: &[bool], cfg: &SvmConfig) -> Result<LinearModel> {
    let dim = check_xy(x, y)?;
    require_both_classes(y)?;
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(crate::Error::Shape(format!(
            "margin tolerance c = {} must be positive",
            cfg.c
        )));
    }
    let n = x.len();
    let mean: Vec<f64> = (0..dim)
        .map(|d| x.iter().map(|r| r[d]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let radius = centered
        .iter()
        .map(|r| dot(r, r).sqrt())
        .fold(0.0f64, f64::max);
    let bias_feature = if radius > 0.0 { radius } else { 1.0 };
    let sign: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let q_diag: Vec<f64> = centered
        .iter()
        .map(|r| dot(r, r) + bias_feature * bias_feature)
        .collect();

    let mut w = vec![0.0; dim];
    let mut wb = 0.0;
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(cfg.seed);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let xi = &centered[i];
            let g = sign[i] * (dot(&w, xi) + wb * bias_feature) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == cfg.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let next = (alpha[i] - g / q_diag[i]).clamp(0.0, cfg.c);
                let step = (next - alpha[i]) * sign[i];
                alpha[i] = next;
                for (wd, xd) in w.iter_mut().zip(xi) {
                    *wd += step * xd;
                }
                wb += step * bias_feature;
            }
        }
        if pg_max - pg_min < cfg.tolerance {
            break;
        }
    }
    let bias = wb * bias_feature - dot(&w, &mean);
    Ok(LinearModel {
        weights: w,
        bias,
        kind: LinearKind::Svm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogregConfig {
    /// Weight of `½‖w‖²` added to the mean log-loss. The intercept is not penalized.
    pub l2: f64,
    /// Convergence threshold on the gradient's ∞-norm.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl LogregConfig {
    pub fn new(l2: f64) -> Self {
        LogregConfig {
            l2,
            tolerance: 1e-6,
            max_iter: 20_000,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-penalized logistic regression by full-batch gradient descent from
/// zero, with the fixed step `1/L` for the smoothness bound
/// `L = ¼·mean(‖x‖² + 1) + l2`.
pub fn train_logreg(x: &[Vec<f64>], y: &[bool], cfg: &LogregConfig) -> Result<LinearModel> {
    let dim = check_xy(x, y)?;
    require_both_classes(y)?;
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(crate::Error::Shape(format!(
            "l2 = {} must be non-negative",
            cfg.l2
        )));
    }
    let n = x.len() as f64;
    let lipschitz = 0.25 * x.iter().map(|r| dot(r, r) + 1.0).sum::<f64>() / n + cfg.l2;
    let step = 1.0 / lipschitz;
    let sign: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut gw = vec![0.0; dim];
    for _ in 0..cfg.max_iter {
        gw.iter_mut().zip(&w).for_each(|(g, wd)| *g = cfg.l2 * wd);
        let mut gb = 0.0;
        for (xi, &s) in x.iter().zip(&sign) {
            // d/dz log(1 + exp(-s z)) = -s σ(-s z)
            let coef = -s * sigmoid(-s * (dot(&w, xi) + b)) / n;
            for (g, xd) in gw.iter_mut().zip(xi) {
                *g += coef * xd;
            }
            gb += coef;
        }
        let norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if norm < cfg.tolerance {
            break;
        }
        for (wd, g) in w.iter_mut().zip(&gw) {
            *wd -= step * g;
        }
        b -= step * gb;
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        kind: LinearKind::LogisticRegression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::f1;
    use crate::Error;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
        let cos = dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt());
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    }

    fn blobs(n: usize, dim: usize, center: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = seed::rng(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let pos = i % 2 == 0;
            let c = if pos { center } else { -center };
            x.push((0..dim).map(|_| c + noise.sample(&mut rng)).collect());
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn two_point_margin() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![true, false];
        for c in [1.0, 10.0, 100.0] {
            let m = train_svm(&x, &y, &SvmConfig::new(c, 0)).unwrap();
            assert!(m.predict(&x[0]) && !m.predict(&x[1]));
            assert!(angle_deg(&m.weights, &[1.0, 0.0]) < 5.0);
        }
    }

    #[test]
    fn xor_is_not_linearly_separable() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![true, true, false, false];
        let m = train_svm(&x, &y, &SvmConfig::new(1.0, 3)).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| m.predict(xi) == yi)
            .count();
        assert!(correct <= 3);
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(200, 5, 3.0, 1);
        let (xt, yt) = blobs(200, 5, 3.0, 2);
        let svm = train_svm(&x, &y, &SvmConfig::new(1.0, 0)).unwrap();
        assert!(f1(&svm.predict_all(&xt), &yt).unwrap().f1 >= 0.99);
        let lr = train_logreg(&x, &y, &LogregConfig::new(1e-3)).unwrap();
        assert!(f1(&lr.predict_all(&xt), &yt).unwrap().f1 >= 0.99);
    }

    #[test]
    fn deterministic_and_scale_equivariant() {
        let (x, y) = blobs(60, 4, 0.7, 9);
        let a = train_svm(&x, &y, &SvmConfig::new(10.0, 5)).unwrap();
        let b = train_svm(&x, &y, &SvmConfig::new(10.0, 5)).unwrap();
        assert_eq!(a, b);
        let scaled = LinearModel {
            weights: a.weights.iter().map(|w| w * 3.5).collect(),
            bias: a.bias * 3.5,
            kind: a.kind,
        };
        assert_eq!(a.predict_all(&x), scaled.predict_all(&x));
    }

    #[test]
    fn errors() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_svm(&x, &[true, true], &SvmConfig::new(1.0, 0)),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            train_logreg(
                &[vec![f64::NAN], vec![1.0]],
                &[true, false],
                &LogregConfig::new(0.0)
            ),
            Err(Error::NonFiniteInput { row: 0 })
        ));
        assert!(train_svm(&x, &[true, false], &SvmConfig::new(0.0, 0)).is_err());
    }

    #[test]
    fn logreg_sign_consistency() {
        let mut rng = seed::rng(4);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let pos = i % 3 == 0;
            x.push(vec![
                rng.random_range(-1.0..1.0),
                if pos { -1.0 } else { 1.0 },
                rng.random_range(-1.0..1.0),
            ]);
            y.push(pos);
        }
        let m = train_logreg(&x, &y, &LogregConfig::new(0.01)).unwrap();
        assert!(m.weights[1] < 0.0);
        assert!(m.weights[1].abs() > m.weights[0].abs() && m.weights[1].abs() > m.weights[2].abs());
    }

    #[test]
    fn logreg_on_noise_stays_small() {
        let mut total_f1 = 0.0;
        let mut total_base = 0.0;
        for s in 0..10 {
            let mut rng = seed::rng(100 + s);
            let x: Vec<Vec<f64>> = (0..300)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<bool> = (0..300).map(|_| rng.random_bool(0.5)).collect();
            let m = train_logreg(&x, &y, &LogregConfig::new(1.0)).unwrap();
            assert!(m.weights.iter().all(|w| w.abs() < 0.1), "{:?}", m.weights);
            let preds = m.predict_all(&x);
            let f_data = y.iter().filter(|&&b| b).count() as f64 / 300.0;
            let f_clf = preds.iter().filter(|&&b| b).count() as f64 / 300.0;
            total_f1 += f1(&preds, &y).unwrap().f1;
            total_base += if f_clf == 0.0 {
                0.0
            } else {
                crate::models::trivial_baseline_f1(f_data, f_clf).unwrap()
            };
        }
        assert!((total_f1 - total_base).abs() / 10.0 < 0.1);
    }
}
