//! Batch normalization over the channel axis of [N, C, H, W] maps.

use lgir_core::Scalar;
use ndarray::{Array1, Array4, ArrayD, Ix4};

use crate::graph::{Graph, Var};

pub const BN_EPS: f64 = 1e-5;

/// Result of a batch-norm application. In training mode the batch moments
/// are reported so the owning layer can fold them into its running
/// statistics (the graph op itself never mutates persistent state).
pub struct BnOutput<'g, S: Scalar> {
    pub y: Var<'g, S>,
    /// per-channel batch mean (train mode only)
    pub batch_mean: Option<Array1<S>>,
    /// per-channel batch variance, unbiased when the reduction count allows
    /// it (train mode only) — this is the value running variance tracks
    pub batch_var: Option<Array1<S>>,
}

impl<S: Scalar> Graph<S> {
    /// Normalizes with batch moments in training mode and with the supplied
    /// running moments in eval mode, then applies the affine pair.
    pub fn batchnorm(
        &self,
        x: Var<'_, S>,
        gamma: Var<'_, S>,
        beta: Var<'_, S>,
        running_mean: &Array1<S>,
        running_var: &Array1<S>,
    ) -> BnOutput<'_, S> {
        let xv = x.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("bn input 4-D");
        let (n, c, h, w) = x4.dim();
        let m = n * h * w; // reduction count per channel
        assert!(m >= 1);
        assert_eq!(gamma.value().len(), c);
        assert_eq!(beta.value().len(), c);

        let eps = S::cast_from(BN_EPS);
        let (mean, var_biased) = if self.is_train() {
            let mut mean = Array1::<S>::zeros(c);
            let mut var = Array1::<S>::zeros(c);
            let inv_m = S::one() / S::cast_from(m as f64);
            for ci in 0..c {
                let ch = x4.index_axis(ndarray::Axis(1), ci);
                let mu = ch.iter().copied().sum::<S>() * inv_m;
                let ss = ch.iter().map(|&v| (v - mu) * (v - mu)).sum::<S>();
                mean[ci] = mu;
                var[ci] = ss * inv_m;
            }
            (mean, var)
        } else {
            (running_mean.clone(), running_var.clone())
        };

        let gv = gamma.value();
        let bv = beta.value();
        let mut invstd = Array1::<S>::zeros(c);
        for ci in 0..c {
            invstd[ci] = S::one() / (var_biased[ci] + eps).sqrt();
        }
        let mut out = Array4::<S>::zeros((n, c, h, w));
        for ci in 0..c {
            let (mu, is) = (mean[ci], invstd[ci]);
            let (ga, be) = (gv[[ci]], bv[[ci]]);
            for bi in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        out[[bi, ci, yy, xx]] = (x4[[bi, ci, yy, xx]] - mu) * is * ga + be;
                    }
                }
            }
        }

        let train = self.is_train();
        let requires = self.requires(&[x.id, gamma.id, beta.id]);
        let grad_fn = requires.then(|| {
            let xv = xv.clone();
            let gv = gv.clone();
            let mean_c = mean.clone();
            let invstd_c = invstd.clone();
            let (x_id, g_id, b_id) = (x.id, gamma.id, beta.id);
            let fun: crate::graph::GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
                let mut dgamma = Array1::<S>::zeros(c);
                let mut dbeta = Array1::<S>::zeros(c);
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                let m_s = S::cast_from(m as f64);
                for ci in 0..c {
                    let (mu, is) = (mean_c[ci], invstd_c[ci]);
                    let ga = gv[[ci]];
                    let mut sum_g = S::zero();
                    let mut sum_gx = S::zero();
                    for bi in 0..n {
                        for yy in 0..h {
                            for xx in 0..w {
                                let g = g4[[bi, ci, yy, xx]];
                                let xhat = (x4[[bi, ci, yy, xx]] - mu) * is;
                                sum_g = sum_g + g;
                                sum_gx = sum_gx + g * xhat;
                            }
                        }
                    }
                    dbeta[ci] = sum_g;
                    dgamma[ci] = sum_gx;
                    if train {
                        // dx = γ·invstd/m · (m·g − Σg − x̂·Σ(g·x̂))
                        let k = ga * is / m_s;
                        for bi in 0..n {
                            for yy in 0..h {
                                for xx in 0..w {
                                    let g = g4[[bi, ci, yy, xx]];
                                    let xhat = (x4[[bi, ci, yy, xx]] - mu) * is;
                                    dx[[bi, ci, yy, xx]] = k * (m_s * g - sum_g - xhat * sum_gx);
                                }
                            }
                        }
                    } else {
                        // eval stats are constants: plain affine chain rule
                        let k = ga * is;
                        for bi in 0..n {
                            for yy in 0..h {
                                for xx in 0..w {
                                    dx[[bi, ci, yy, xx]] = g4[[bi, ci, yy, xx]] * k;
                                }
                            }
                        }
                    }
                }
                sink(b_id, dbeta.into_dyn());
                sink(g_id, dgamma.into_dyn());
                sink(x_id, dx.into_dyn());
            });
            fun
        });
        let y = self.push(out.into_dyn(), requires, false, grad_fn);

        if train {
            // unbiased variance is what the running buffer integrates
            let var_run: Array1<S> = if m > 1 {
                let corr = S::cast_from(m as f64 / (m as f64 - 1.0));
                var_biased.mapv(|v| v * corr)
            } else {
                var_biased.clone()
            };
            BnOutput {
                y,
                batch_mean: Some(mean),
                batch_var: Some(var_run),
            }
        } else {
            BnOutput {
                y,
                batch_mean: None,
                batch_var: None,
            }
        }
    }
}

/// Eval-mode reference used by tests: y = γ·(x−μ)/√(σ²+ε) + β.
pub fn batchnorm_eval_reference<S: Scalar>(
    x: &ArrayD<S>,
    gamma: &Array1<S>,
    beta: &Array1<S>,
    mean: &Array1<S>,
    var: &Array1<S>,
) -> ArrayD<S> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let (n, c, h, w) = x4.dim();
    let eps = S::cast_from(BN_EPS);
    let mut out = Array4::<S>::zeros((n, c, h, w));
    for ci in 0..c {
        let is = S::one() / (var[ci] + eps).sqrt();
        for bi in 0..n {
            for yy in 0..h {
                for xx in 0..w {
                    out[[bi, ci, yy, xx]] = (x4[[bi, ci, yy, xx]] - mean[ci]) * is * gamma[ci] + beta[ci];
                }
            }
        }
    }
    out.into_dyn()
}
