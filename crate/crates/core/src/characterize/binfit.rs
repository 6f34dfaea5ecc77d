//! Classical parameter extraction: least-squares fit of ensemble-mean Bloch
//! components to the master equation, and a binned one-step variance
//! regression for the efficiency.

use serde::{Deserialize, Serialize};

use crate::autodiff::Dual;
use crate::qcore::{BlochVector, Scalar};

use super::CharError;

/// One observed mean of a Bloch component at step `step` of a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanPoint {
    pub step: usize,
    pub axis: usize,
    pub mean: f64,
    pub weight: f64,
}

/// Observed means for one initial state on a uniform grid of step `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanSeries {
    pub r0: BlochVector,
    pub dt: f64,
    pub points: Vec<MeanPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeFit {
    pub omega_r: f64,
    pub gamma_d: f64,
    pub omega_err: f64,
    pub gamma_err: f64,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub iterations: usize,
}

const SUBSTEPS: usize = 4;

fn bloch_rate<T: Scalar>(r: [T; 3], omega: T, gamma: T) -> [T; 3] {
    [-(gamma * r[0]), -(gamma * r[1]) - omega * r[2], omega * r[1]]
}

/// Bloch series of the constrained master equation
/// `ẋ = −Γx, ẏ = −Γy − Ωz, ż = Ωy` at steps `0..=n`.
pub fn me_bloch_ode<T: Scalar>(r0: [f64; 3], omega: T, gamma: T, dt: f64, n: usize) -> Vec<[T; 3]> {
    let h = dt / SUBSTEPS as f64;
    let add = |a: [T; 3], b: [T; 3], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s];
    let mut r = r0.map(T::cst);
    let mut out = Vec::with_capacity(n + 1);
    out.push(r);
    for _ in 0..n {
        for _ in 0..SUBSTEPS {
            let k1 = bloch_rate(r, omega, gamma);
            let k2 = bloch_rate(add(r, k1, h / 2.0), omega, gamma);
            let k3 = bloch_rate(add(r, k2, h / 2.0), omega, gamma);
            let k4 = bloch_rate(add(r, k3, h), omega, gamma);
            r = std::array::from_fn(|i| r[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0));
        }
        out.push(r);
    }
    out
}

fn residuals<T: Scalar>(series: &[MeanSeries], omega: T, gamma: T) -> Vec<T> {
    let mut res = Vec::new();
    for s in series {
        let n = s.points.iter().map(|p| p.step).max().unwrap_or(0);
        let traj = me_bloch_ode(s.r0.as_array(), omega, gamma, s.dt, n);
        for p in &s.points {
            res.push((traj[p.step][p.axis] - p.mean) * p.weight.sqrt());
        }
    }
    res
}

fn rss_at(series: &[MeanSeries], omega: f64, gamma: f64) -> f64 {
    residuals(series, omega, gamma).iter().map(|r| r * r).sum()
}

/// Weighted least-squares fit of `(Ω_R, Γ_d)` to mean Bloch data.
///
/// A coarse log-spaced grid picks the starting point, then
/// Levenberg–Marquardt iterations with a forward-mode Jacobian refine it.
pub fn fit_bloch_ode(series: &[MeanSeries]) -> Result<MeFit, CharError> {
    let n_obs: usize = series.iter().map(|s| s.points.len()).sum();
    if n_obs < 3 {
        return Err(CharError::FitSingular("fewer than three observations".into()));
    }
    let (mut best, mut best_rss) = ((1.0, 1.0), f64::INFINITY);
    for i in 0..24 {
        for j in 0..24 {
            let om = 0.05 * (400.0f64).powf(i as f64 / 23.0);
            let ga = 0.02 * (500.0f64).powf(j as f64 / 23.0);
            let r = rss_at(series, om, ga);
            if r < best_rss {
                best_rss = r;
                best = (om, ga);
            }
        }
    }
    let (mut om, mut ga) = best;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jtj = [[0.0; 2]; 2];
    for it in 0..200 {
        iterations = it + 1;
        let res = residuals(series, Dual::<2>::variable(om, 0), Dual::<2>::variable(ga, 1));
        let mut g = [0.0; 2];
        jtj = [[0.0; 2]; 2];
        let mut rss = 0.0;
        for r in &res {
            rss += r.v * r.v;
            for a in 0..2 {
                g[a] += r.d[a] * r.v;
                for b in 0..2 {
                    jtj[a][b] += r.d[a] * r.d[b];
                }
            }
        }
        let mut improved = false;
        let mut step = [0.0; 2];
        for _ in 0..30 {
            let a = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if !(det.abs() > 1e-300) {
                return Err(CharError::FitSingular("singular normal equations".into()));
            }
            step = [-(a[1][1] * g[0] - a[0][1] * g[1]) / det, -(-a[1][0] * g[0] + a[0][0] * g[1]) / det];
            let trial = rss_at(series, om + step[0], ga + step[1]);
            if trial <= rss {
                improved = true;
                om += step[0];
                ga += step[1];
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        let small = step[0].abs() <= 1e-13 * (1.0 + om.abs()) && step[1].abs() <= 1e-13 * (1.0 + ga.abs());
        if !improved || small {
            break;
        }
    }
    let rss = rss_at(series, om, ga);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let scale = jtj[0][0].abs().max(jtj[1][1].abs());
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(CharError::FitSingular("Jacobian is rank deficient".into()));
    }
    let s2 = if n_obs > 2 { rss / (n_obs - 2) as f64 } else { 0.0 };
    Ok(MeFit {
        omega_r: om,
        gamma_d: ga,
        omega_err: (jtj[1][1] / det * s2).sqrt(),
        gamma_err: (jtj[0][0] / det * s2).sqrt(),
        rss,
        iterations,
    })
}

/// One z bin of the variance regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBin {
    pub z_center: f64,
    pub count: usize,
    /// Mean of `(1 − z²)² dt` over the bin.
    pub regressor: f64,
    /// Mean squared one-step residual `(Δz − Ω̂ y dt)²`.
    pub mean_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinFitResult {
    pub omega_r: f64,
    pub gamma_d: f64,
    pub eta: f64,
    pub omega_err: f64,
    pub gamma_err: f64,
    pub eta_err: f64,
    pub delta: f64,
    pub bins: Vec<VarianceBin>,
    /// How the efficiency was regressed.
    pub variance_method: String,
}

/// Extracts `{Ω_R, Γ_d, η}` from state trajectories sharing the step `dt`.
///
/// `Ω_R` and `Γ_d` come from fitting the per-preparation ensemble means
/// (averaged over all trajectories reaching each step) to the master
/// equation started from the observed mean initial state. The efficiency
/// comes from the conditional variance of one-step residuals
/// `e = Δz − Ω̂ y dt`, binned by `z` with width `delta`: under `L ∝ σz` the
/// diffusion coefficient of `z` is `√(ηΓ_d)(1 − z²)`, so the slope of
/// `E[e²]` against `(1 − z²)² dt` is `ηΓ_d`.
pub fn bin_fit(trajs: &[(usize, &[BlochVector])], dt: f64, delta: f64) -> Result<BinFitResult, CharError> {
    if !(dt > 0.0) || !(delta > 0.0 && delta < 2.0) {
        return Err(CharError::InvalidInput(format!("dt {dt}, delta {delta}")));
    }
    let mut series = Vec::new();
    for prep in 0..6 {
        let members: Vec<&[BlochVector]> = trajs.iter().filter(|(p, _)| *p == prep).map(|(_, t)| *t).collect();
        let n_max = members.iter().map(|t| t.len()).max().unwrap_or(0);
        if n_max == 0 {
            continue;
        }
        let mut sum = vec![[0.0f64; 3]; n_max];
        let mut cnt = vec![0usize; n_max];
        for t in &members {
            for (i, r) in t.iter().enumerate() {
                for a in 0..3 {
                    sum[i][a] += r.component(a);
                }
                cnt[i] += 1;
            }
        }
        let m0 = sum[0].map(|v| v / cnt[0] as f64);
        let r0 = BlochVector::clipped(m0[0], m0[1], m0[2]);
        let mut points = Vec::new();
        for i in 1..n_max {
            for a in 0..3 {
                points.push(MeanPoint { step: i, axis: a, mean: sum[i][a] / cnt[i] as f64, weight: cnt[i] as f64 });
            }
        }
        series.push(MeanSeries { r0, dt, points });
    }
    let me = fit_bloch_ode(&series)?;

    let nb = (2.0 / delta).ceil() as usize;
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); nb];
    for (_, t) in trajs {
        for w in t.windows(2) {
            let (a, b) = (w[0], w[1]);
            let e = (b.z - a.z) - me.omega_r * a.y * dt;
            let z = a.z.clamp(-1.0, 1.0);
            let k = (((z + 1.0) / delta) as usize).min(nb - 1);
            let x = (1.0 - z * z).powi(2) * dt;
            acc[k].0 += 1;
            acc[k].1 += x;
            acc[k].2 += e * e;
        }
    }
    let bins: Vec<VarianceBin> = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(k, a)| VarianceBin {
            z_center: -1.0 + (k as f64 + 0.5) * delta,
            count: a.0,
            regressor: a.1 / a.0 as f64,
            mean_sq: a.2 / a.0 as f64,
        })
        .collect();
    // count-weighted least squares through the origin
    let sxx: f64 = bins.iter().map(|b| b.count as f64 * b.regressor * b.regressor).sum();
    let sxy: f64 = bins.iter().map(|b| b.count as f64 * b.regressor * b.mean_sq).sum();
    if !(sxx > 0.0) {
        return Err(CharError::FitSingular("no variance regressor support".into()));
    }
    let slope = sxy / sxx;
    let n: f64 = bins.iter().map(|b| b.count as f64).sum();
    let resid: f64 = bins.iter().map(|b| b.count as f64 * (b.mean_sq - slope * b.regressor).powi(2)).sum();
    let slope_err = if bins.len() > 1 { (resid / (bins.len() - 1) as f64 / sxx * (n / bins.len() as f64)).sqrt() } else { 0.0 };
    let eta = slope / me.gamma_d;
    let eta_err = eta.abs()
        * ((slope_err / slope.abs().max(1e-300)).powi(2) + (me.gamma_err / me.gamma_d).powi(2)).sqrt();
    Ok(BinFitResult {
        omega_r: me.omega_r,
        gamma_d: me.gamma_d,
        eta,
        omega_err: me.omega_err,
        gamma_err: me.gamma_err,
        eta_err,
        delta,
        bins,
        variance_method: "one-step increments of z, binned by z".into(),
    })
}
