use std::collections::BTreeMap;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::qcore::{logit, softplus_inv, Cx, Mat2, Scalar};
use crate::sme::{ConstrainedParams, ModelOps, PhysicalModel, SmeError};

/// Free-parameter families of increasing size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackKind {
    /// `{Ω_R, Γ_d, η}`
    Constrained,
    /// Traceless Hermitian `H_R`, arbitrary `L`, and `η`.
    Operator,
    /// `Operator` plus excitation and relaxation rates.
    Extended,
}

const OPERATOR_NAMES: [&str; 12] = [
    "h_x", "h_y", "h_z", "l_00_re", "l_00_im", "l_01_re", "l_01_im", "l_10_re", "l_10_im", "l_11_re",
    "l_11_im", "eta",
];

impl PackKind {
    pub fn n_params(self) -> usize {
        match self {
            PackKind::Constrained => 3,
            PackKind::Operator => 12,
            PackKind::Extended => 14,
        }
    }

    /// Names of the physical parameters, in raw-vector order.
    pub fn names(self) -> Vec<&'static str> {
        match self {
            PackKind::Constrained => vec!["omega_r", "gamma_d", "eta"],
            PackKind::Operator => OPERATOR_NAMES.to_vec(),
            PackKind::Extended => {
                let mut v = OPERATOR_NAMES.to_vec();
                v.extend(["gamma_up", "gamma_down"]);
                v
            }
        }
    }
}

/// Unconstrained parameter vector of one pack. Bounded quantities are
/// squashed on materialization: `η = logistic(·)`, rates `= softplus(·)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPack {
    pub kind: PackKind,
    pub raw: Vec<f64>,
}

/// Builds stepper operators from a raw vector of any scalar type.
pub fn ops_from_raw<T: Scalar>(kind: PackKind, raw: &[T]) -> ModelOps<T> {
    assert_eq!(raw.len(), kind.n_params(), "raw vector length does not match pack");
    let zero = Cx::<T>::zero();
    match kind {
        PackKind::Constrained => {
            let half_omega = raw[0] * 0.5;
            let h = Mat2::new([zero, Cx::real(half_omega), Cx::real(half_omega), zero]);
            let amp = (raw[1].softplus() * 0.5).sqrt();
            let l = Mat2::new([Cx::real(amp), zero, zero, Cx::real(-amp)]);
            let eta = raw[2].logistic();
            ModelOps::new(h, l, eta, T::zero(), T::zero(), false)
        }
        PackKind::Operator | PackKind::Extended => {
            let (hx, hy, hz) = (raw[0], raw[1], raw[2]);
            let h = Mat2::new([Cx::real(hz), Cx::new(hx, -hy), Cx::new(hx, hy), Cx::real(-hz)]);
            let l = Mat2::new([
                Cx::new(raw[3], raw[4]),
                Cx::new(raw[5], raw[6]),
                Cx::new(raw[7], raw[8]),
                Cx::new(raw[9], raw[10]),
            ]);
            let eta = raw[11].logistic();
            if kind == PackKind::Extended {
                ModelOps::new(h, l, eta, raw[12].softplus(), raw[13].softplus(), true)
            } else {
                ModelOps::new(h, l, eta, T::zero(), T::zero(), false)
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    Scalar::logistic(x)
}

fn softplus(x: f64) -> f64 {
    Scalar::softplus(x)
}

impl ParamPack {
    pub fn new(kind: PackKind, raw: Vec<f64>) -> Result<Self, SmeError> {
        if raw.len() != kind.n_params() || raw.iter().any(|v| !v.is_finite()) {
            return Err(SmeError::InvalidModel(format!(
                "{kind:?} pack needs {} finite values, got {}",
                kind.n_params(),
                raw.len()
            )));
        }
        Ok(Self { kind, raw })
    }

    /// Embeds the constrained model in any pack. Extended packs receive the
    /// given small relaxation rate for both channels.
    pub fn from_constrained(kind: PackKind, p: ConstrainedParams, relax_rate: f64) -> Self {
        let eta = logit(p.eta.clamp(1e-9, 1.0 - 1e-9));
        let raw = match kind {
            PackKind::Constrained => vec![p.omega_r, softplus_inv(p.gamma_d.max(1e-12)), eta],
            PackKind::Operator | PackKind::Extended => {
                let a = (p.gamma_d.max(0.0) / 2.0).sqrt();
                let mut v = vec![p.omega_r / 2.0, 0.0, 0.0, a, 0.0, 0.0, 0.0, 0.0, 0.0, -a, 0.0, eta];
                if kind == PackKind::Extended {
                    let g = softplus_inv(relax_rate.max(1e-12));
                    v.extend([g, g]);
                }
                v
            }
        };
        Self { kind, raw }
    }

    /// Randomized initialization around `center`: `Ω_R`, `Γ_d` and `η` are
    /// drawn log-uniformly within a factor `spread` of the center values
    /// (η capped at 0.95); operator packs add `N(0, sigma²)` perturbations on
    /// the entries the constrained model fixes to zero.
    pub fn init<R: Rng + ?Sized>(
        kind: PackKind,
        center: ConstrainedParams,
        spread: f64,
        sigma: f64,
        relax_rate: f64,
        rng: &mut R,
    ) -> Self {
        let s = spread.max(1.0).ln();
        let mut lu = |c: f64| {
            let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
            c * (u * s).exp()
        };
        let p = ConstrainedParams {
            omega_r: lu(center.omega_r),
            gamma_d: lu(center.gamma_d),
            eta: lu(center.eta).min(0.95),
        };
        let mut pack = Self::from_constrained(kind, p, relax_rate);
        if kind != PackKind::Constrained && sigma > 0.0 {
            for i in [1, 2, 4, 5, 6, 7, 8, 10] {
                pack.raw[i] += sigma * gaussian(rng);
            }
        }
        pack
    }

    pub fn ops<T: Scalar>(&self) -> ModelOps<T> {
        let raw: Vec<T> = self.raw.iter().map(|v| T::cst(*v)).collect();
        ops_from_raw(self.kind, &raw)
    }

    pub fn eta(&self) -> f64 {
        match self.kind {
            PackKind::Constrained => logistic(self.raw[2]),
            _ => logistic(self.raw[11]),
        }
    }

    pub fn to_model(&self) -> PhysicalModel {
        let ops = self.ops::<f64>();
        PhysicalModel {
            h: ops.h,
            l: ops.l,
            eta: ops.half_eta * 2.0,
            gamma_up: ops.gamma_up,
            gamma_down: ops.gamma_down,
        }
    }

    /// Physical parameter values keyed by name.
    pub fn named(&self) -> BTreeMap<String, f64> {
        let names = self.kind.names();
        let vals: Vec<f64> = match self.kind {
            PackKind::Constrained => vec![self.raw[0], softplus(self.raw[1]), logistic(self.raw[2])],
            _ => {
                let mut v = self.raw.clone();
                v[11] = logistic(v[11]);
                if self.kind == PackKind::Extended {
                    v[12] = softplus(v[12]);
                    v[13] = softplus(v[13]);
                }
                v
            }
        };
        names.into_iter().map(String::from).zip(vals).collect()
    }

    /// `{Ω_R, Γ_d, η}` read off any pack: `Ω_R = 2·|(h_x, h_y)|` and
    /// `Γ_d = 2·|ℓ_z|²` where `ℓ_z = (L₀₀ − L₁₁)/2` is the σz component of `L`.
    pub fn constrained_view(&self) -> ConstrainedParams {
        match self.kind {
            PackKind::Constrained => {
                ConstrainedParams { omega_r: self.raw[0], gamma_d: softplus(self.raw[1]), eta: self.eta() }
            }
            _ => {
                let r = &self.raw;
                let lz_re = (r[3] - r[9]) / 2.0;
                let lz_im = (r[4] - r[10]) / 2.0;
                ConstrainedParams {
                    omega_r: 2.0 * r[0].hypot(r[1]),
                    gamma_d: 2.0 * (lz_re * lz_re + lz_im * lz_im),
                    eta: self.eta(),
                }
            }
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{SIGMA_X, SIGMA_Z};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constrained_materializes_exactly() {
        let p = ConstrainedParams::DEVICE;
        let pack = ParamPack::from_constrained(PackKind::Constrained, p, 0.0);
        let m = pack.to_model();
        assert!(m.h.max_abs_diff(&SIGMA_X.scale(p.omega_r / 2.0)) < 1e-15);
        assert!(m.l.max_abs_diff(&SIGMA_Z.scale((p.gamma_d / 2.0).sqrt())) < 1e-12);
        assert!((m.eta - p.eta).abs() < 1e-12);
        let v = pack.constrained_view();
        assert!((v.gamma_d - p.gamma_d).abs() < 1e-12);
    }

    #[test]
    fn operator_embedding_matches_constrained() {
        let p = ConstrainedParams::DEVICE;
        let a = ParamPack::from_constrained(PackKind::Constrained, p, 0.0).to_model();
        let b = ParamPack::from_constrained(PackKind::Operator, p, 0.0).to_model();
        assert!(a.h.max_abs_diff(&b.h) < 1e-15);
        assert!(a.l.max_abs_diff(&b.l) < 1e-12);
        let v = ParamPack::from_constrained(PackKind::Extended, p, 0.0).constrained_view();
        assert!((v.omega_r - p.omega_r).abs() < 1e-12 && (v.gamma_d - p.gamma_d).abs() < 1e-12);
    }

    #[test]
    fn any_raw_vector_gives_valid_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [PackKind::Constrained, PackKind::Operator, PackKind::Extended] {
            for _ in 0..200 {
                let raw: Vec<f64> = (0..kind.n_params()).map(|_| (rng.random::<f64>() - 0.5) * 40.0).collect();
                let pack = ParamPack::new(kind, raw).unwrap();
                pack.to_model().validate().unwrap();
            }
        }
    }

    #[test]
    fn init_respects_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ConstrainedParams::DEVICE;
        for _ in 0..100 {
            let v = ParamPack::init(PackKind::Constrained, c, 2.0, 0.0, 0.0, &mut rng).constrained_view();
            assert!(v.omega_r >= c.omega_r / 2.0 - 1e-12 && v.omega_r <= c.omega_r * 2.0 + 1e-12);
            assert!(v.eta <= 0.95 + 1e-12);
        }
        assert_eq!(PackKind::Extended.names().len(), 14);
        let n = ParamPack::from_constrained(PackKind::Extended, c, 0.01).named();
        assert!((n["gamma_up"] - 0.01).abs() < 1e-12);
    }
}
