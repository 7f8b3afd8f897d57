use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOISE_FLOOR: f64 = 1e-6;
const LENGTH_BOUNDS: (f64, f64) = (0.02, 5.0);
const NOISE_CEILING: f64 = 0.5;
const FIT_ITERATIONS: u64 = 60;

/// Surrogate hyperparameters on the standardized objective scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub length_scales: [f64; 2],
    pub signal_variance: f64,
    pub noise_variance: f64,
}

pub fn matern52(a: [f64; 2], b: [f64; 2], length_scales: [f64; 2]) -> f64 {
    let r2 = ((a[0] - b[0]) / length_scales[0]).powi(2) + ((a[1] - b[1]) / length_scales[1]).powi(2);
    let s = (5.0 * r2).sqrt();
    (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
}

fn correlation(x: &[[f64; 2]], length_scales: [f64; 2], nugget: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + nugget
        } else {
            matern52(x[i], x[j], length_scales)
        }
    })
}

/// Log-parameters clamped into the search box: (ln l1, ln l2, ln nugget).
fn unpack(theta: &[f64]) -> ([f64; 2], f64) {
    let (lo, hi) = LENGTH_BOUNDS;
    let l = |t: f64| t.exp().clamp(lo, hi);
    (
        [l(theta[0]), l(theta[1])],
        theta[2].exp().clamp(NOISE_FLOOR, NOISE_CEILING),
    )
}

struct Likelihood<'a> {
    x: &'a [[f64; 2]],
    y: &'a DVector<f64>,
}

impl Likelihood<'_> {
    /// Profile negative log likelihood with the signal variance concentrated out.
    fn value(&self, theta: &[f64]) -> f64 {
        let (ls, nugget) = unpack(theta);
        let Some(chol) = correlation(self.x, ls, nugget).cholesky() else {
            return f64::MAX;
        };
        let n = self.x.len() as f64;
        let alpha = chol.solve(self.y);
        let sigma2 = (self.y.dot(&alpha) / n).max(1e-300);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        n * sigma2.ln() + log_det
    }
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(p))
    }
}

/// Minimizes `f` from `start` with a Nelder-Mead simplex of edge `step`.
pub(crate) fn nelder_mead<C>(f: C, start: &[f64], step: f64, iterations: u64) -> (Vec<f64>, f64)
where
    C: CostFunction<Param = Vec<f64>, Output = f64>,
{
    let mut simplex = vec![start.to_vec()];
    for d in 0..start.len() {
        let mut v = start.to_vec();
        v[d] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-8)
        .expect("tolerance is positive");
    match Executor::new(f, solver)
        .configure(|s| s.max_iters(iterations))
        .run()
    {
        Ok(res) => {
            let state = res.state();
            let best = state.best_param.clone().unwrap_or_else(|| start.to_vec());
            (best, state.best_cost)
        }
        Err(_) => (start.to_vec(), f64::MAX),
    }
}

/// Gaussian-process posterior over the unit square with a Matérn-5/2 ARD kernel.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    x: Vec<[f64; 2]>,
    hyper: GpHyperparameters,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl GpPosterior {
    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    /// `y` on the standardized scale.
    pub(crate) fn standardized(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_scale
    }

    /// Mean and variance on the standardized scale.
    pub(crate) fn predict_standardized(&self, p: [f64; 2]) -> (f64, f64) {
        let sigma2 = self.hyper.signal_variance;
        let Some(chol) = &self.chol else {
            return (0.0, sigma2);
        };
        let ls = self.hyper.length_scales;
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| matern52(*xi, p, ls)));
        let mean = k.dot(&self.alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a positive diagonal");
        (mean, (sigma2 * (1.0 - v.norm_squared())).max(0.0))
    }

    /// Posterior mean and variance of the objective at `p`.
    pub fn predict(&self, p: [f64; 2]) -> (f64, f64) {
        let (m, v) = self.predict_standardized(p);
        (self.y_mean + self.y_scale * m, v * self.y_scale * self.y_scale)
    }
}

/// Fits hyperparameters by maximizing the marginal likelihood from several
/// simplex starts (plus `warm_start` when given) and conditions on `points`.
///
/// When every observation is identical the posterior is the prior around that
/// value with unit variance.
pub fn gp_fit(points: &[([f64; 2], f64)], warm_start: Option<&GpHyperparameters>) -> Result<GpPosterior> {
    let x: Vec<[f64; 2]> = points.iter().map(|(p, _)| *p).collect();
    let distinct = x
        .iter()
        .enumerate()
        .any(|(i, a)| x[..i].iter().any(|b| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) > 1e-9));
    if points.len() < 2 || !distinct {
        return Err(Error::InvalidConfig(
            "surrogate fit needs at least two distinct points".into(),
        ));
    }
    if let Some((_, y)) = points.iter().find(|(_, y)| !y.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite observation {y}")));
    }
    let n = points.len() as f64;
    let y_mean = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let var = points.iter().map(|(_, y)| (y - y_mean).powi(2)).sum::<f64>() / n;
    if var.sqrt() < 1e-12 {
        return Ok(GpPosterior {
            x,
            hyper: GpHyperparameters {
                length_scales: [0.5, 0.5],
                signal_variance: 1.0,
                noise_variance: NOISE_FLOOR,
            },
            chol: None,
            alpha: DVector::zeros(0),
            y_mean,
            y_scale: 1.0,
        });
    }
    let y_scale = var.sqrt();
    let y = DVector::from_iterator(points.len(), points.iter().map(|(_, v)| (v - y_mean) / y_scale));

    let mut starts: Vec<[f64; 3]> = vec![
        [0.3f64.ln(), 0.3f64.ln(), 1e-4f64.ln()],
        [1.0f64.ln(), 1.0f64.ln(), 1e-2f64.ln()],
    ];
    if let Some(h) = warm_start {
        let g = h.noise_variance / h.signal_variance;
        starts.insert(0, [h.length_scales[0].ln(), h.length_scales[1].ln(), g.ln()]);
    }
    let (theta, _) = starts
        .iter()
        .map(|s| nelder_mead(Likelihood { x: &x, y: &y }, s, 0.7, FIT_ITERATIONS))
        .fold((starts[0].to_vec(), f64::MAX), |best, cand| if cand.1 < best.1 { cand } else { best });

    let (ls, mut nugget) = unpack(&theta);
    let chol = loop {
        if let Some(c) = correlation(&x, ls, nugget).cholesky() {
            break c;
        }
        nugget *= 10.0;
    };
    let alpha = chol.solve(&y);
    let sigma2 = y.dot(&alpha) / n;
    Ok(GpPosterior {
        x,
        hyper: GpHyperparameters {
            length_scales: ls,
            signal_variance: sigma2,
            noise_variance: nugget * sigma2,
        },
        chol: Some(chol),
        alpha,
        y_mean,
        y_scale,
    })
}
