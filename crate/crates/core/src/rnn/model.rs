use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::qcore::RawBloch;
use crate::sme::TrajectoryRecord;

use super::RnnError;

pub const MODEL_VERSION: &str = "1.0";
/// Record quadratures fed per step.
pub const INPUT: usize = 2;
/// Decoder width: three Bloch components and two record predictions.
pub const OUTPUT: usize = 5;
pub const N_PREP: usize = 6;

/// GRU with a one-hot preparation encoder and an affine decoder.
///
/// Matrices are row-major; `w_i*` are `H×2`, `w_h*` are `H×H`, `enc_w` is
/// `H×6` and `dec_w` is `5×H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GruModel {
    pub format_version: String,
    pub hidden: usize,
    pub w_ir: Vec<f64>,
    pub w_iz: Vec<f64>,
    pub w_in: Vec<f64>,
    pub w_hr: Vec<f64>,
    pub w_hz: Vec<f64>,
    pub w_hn: Vec<f64>,
    pub b_ir: Vec<f64>,
    pub b_iz: Vec<f64>,
    pub b_in: Vec<f64>,
    pub b_hr: Vec<f64>,
    pub b_hz: Vec<f64>,
    pub b_hn: Vec<f64>,
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

/// Output of one unrolled pass.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnOutput {
    /// `r̃_0 … r̃_N`.
    pub states: Vec<RawBloch>,
    /// Record predictions in record units; entry `t` targets increment `t`.
    pub predictions: Vec<[f64; 2]>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GruModel {
    pub fn zeros(hidden: usize) -> Self {
        let h = hidden;
        Self {
            format_version: MODEL_VERSION.into(),
            hidden,
            w_ir: vec![0.0; h * INPUT],
            w_iz: vec![0.0; h * INPUT],
            w_in: vec![0.0; h * INPUT],
            w_hr: vec![0.0; h * h],
            w_hz: vec![0.0; h * h],
            w_hn: vec![0.0; h * h],
            b_ir: vec![0.0; h],
            b_iz: vec![0.0; h],
            b_in: vec![0.0; h],
            b_hr: vec![0.0; h],
            b_hz: vec![0.0; h],
            b_hn: vec![0.0; h],
            enc_w: vec![0.0; h * N_PREP],
            enc_b: vec![0.0; h],
            dec_w: vec![0.0; OUTPUT * h],
            dec_b: vec![0.0; OUTPUT],
        }
    }

    /// Every weight uniform in `±1/√H`.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(hidden);
        let k = 1.0 / (hidden as f64).sqrt();
        for t in m.tensors_mut() {
            for v in t.iter_mut() {
                *v = (rng.random::<f64>() * 2.0 - 1.0) * k;
            }
        }
        m
    }

    pub fn tensors(&self) -> [&Vec<f64>; 16] {
        [
            &self.w_ir, &self.w_iz, &self.w_in, &self.w_hr, &self.w_hz, &self.w_hn, &self.b_ir, &self.b_iz,
            &self.b_in, &self.b_hr, &self.b_hz, &self.b_hn, &self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 16] {
        [
            &mut self.w_ir, &mut self.w_iz, &mut self.w_in, &mut self.w_hr, &mut self.w_hz, &mut self.w_hn,
            &mut self.b_ir, &mut self.b_iz, &mut self.b_in, &mut self.b_hr, &mut self.b_hz, &mut self.b_hn,
            &mut self.enc_w, &mut self.enc_b, &mut self.dec_w, &mut self.dec_b,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length mismatch");
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// `self += o`, entry by entry.
    pub fn add_assign(&mut self, o: &GruModel) {
        for (a, b) in self.tensors_mut().into_iter().zip(o.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn validate(&self) -> Result<(), RnnError> {
        let h = self.hidden;
        if h == 0 {
            return Err(RnnError::InvalidModel("hidden width is zero".into()));
        }
        let want = [
            h * INPUT, h * INPUT, h * INPUT, h * h, h * h, h * h, h, h, h, h, h, h, h * N_PREP, h, OUTPUT * h, OUTPUT,
        ];
        for (i, (t, n)) in self.tensors().iter().zip(want).enumerate() {
            if t.len() != n {
                return Err(RnnError::InvalidModel(format!("tensor {i} has {} entries, expected {n}", t.len())));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(RnnError::InvalidModel(format!("tensor {i} has non-finite entries")));
            }
        }
        if self.format_version.split('.').next() != MODEL_VERSION.split('.').next() {
            return Err(RnnError::InvalidModel(format!("unsupported model version {}", self.format_version)));
        }
        Ok(())
    }

    /// `h_0 = tanh(W_enc e_p + b_enc)`.
    pub fn encode(&self, prep: usize, h0: &mut [f64]) {
        for i in 0..self.hidden {
            h0[i] = (self.enc_w[i * N_PREP + prep] + self.enc_b[i]).tanh();
        }
    }

    pub fn decode(&self, h: &[f64]) -> [f64; OUTPUT] {
        let hd = self.hidden;
        std::array::from_fn(|k| dot(&self.dec_w[k * hd..(k + 1) * hd], h) + self.dec_b[k])
    }

    /// One recurrent step, keeping the gate activations for BPTT.
    pub(crate) fn cell_into(&self, h: &[f64], x: [f64; 2], g: GateSlices<'_>) {
        let hd = self.hidden;
        for i in 0..hd {
            let row = i * hd..(i + 1) * hd;
            let ar = self.w_ir[2 * i] * x[0] + self.w_ir[2 * i + 1] * x[1] + self.b_ir[i] + dot(&self.w_hr[row.clone()], h) + self.b_hr[i];
            let az = self.w_iz[2 * i] * x[0] + self.w_iz[2 * i + 1] * x[1] + self.b_iz[i] + dot(&self.w_hz[row.clone()], h) + self.b_hz[i];
            let r = sigmoid(ar);
            let z = sigmoid(az);
            let hn = dot(&self.w_hn[row], h) + self.b_hn[i];
            let n = (self.w_in[2 * i] * x[0] + self.w_in[2 * i + 1] * x[1] + self.b_in[i] + r * hn).tanh();
            g.r[i] = r;
            g.z[i] = z;
            g.hn[i] = hn;
            g.n[i] = n;
            g.out[i] = (1.0 - z) * n + z * h[i];
        }
    }
}

pub(crate) struct GateSlices<'a> {
    pub r: &'a mut [f64],
    pub z: &'a mut [f64],
    pub n: &'a mut [f64],
    pub hn: &'a mut [f64],
    pub out: &'a mut [f64],
}

/// One GRU update `h' = (1 − z)∗n + z∗h` for input `x = (x_I, x_Q)`.
pub fn gru_cell(h: &[f64], x: [f64; 2], model: &GruModel) -> Vec<f64> {
    let hd = model.hidden;
    assert_eq!(h.len(), hd, "hidden state width mismatch");
    let mut buf = vec![0.0; 5 * hd];
    let (r, rest) = buf.split_at_mut(hd);
    let (z, rest) = rest.split_at_mut(hd);
    let (n, rest) = rest.split_at_mut(hd);
    let (hn, out) = rest.split_at_mut(hd);
    model.cell_into(h, x, GateSlices { r, z, n, hn, out });
    out.to_vec()
}

/// Standardized network input for increment `t`.
pub(crate) fn input_at(shot: &TrajectoryRecord, t: usize, inv_sqrt_dt: f64) -> [f64; 2] {
    [shot.record.dm_i[t] * inv_sqrt_dt, shot.record.dm_q[t] * inv_sqrt_dt]
}

/// Runs the network over one shot.
pub fn forward(model: &GruModel, shot: &TrajectoryRecord) -> RnnOutput {
    let hd = model.hidden;
    let n = shot.record.len();
    let sdt = shot.record.dt.sqrt();
    let mut h = vec![0.0; hd];
    let mut buf = vec![0.0; 5 * hd];
    model.encode(shot.prep.index(), &mut h);
    let mut states = Vec::with_capacity(n + 1);
    let mut predictions = Vec::with_capacity(n);
    let mut o = model.decode(&h);
    states.push(RawBloch { x: o[0], y: o[1], z: o[2] });
    for t in 0..n {
        predictions.push([o[3] * sdt, o[4] * sdt]);
        let (r, rest) = buf.split_at_mut(hd);
        let (z, rest) = rest.split_at_mut(hd);
        let (nn, rest) = rest.split_at_mut(hd);
        let (hn, out) = rest.split_at_mut(hd);
        model.cell_into(&h, input_at(shot, t, 1.0 / sdt), GateSlices { r, z, n: nn, hn, out });
        h.copy_from_slice(out);
        o = model.decode(&h);
        states.push(RawBloch { x: o[0], y: o[1], z: o[2] });
    }
    RnnOutput { states, predictions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::{Axis, Prep, WeakRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_halve_state() {
        let m = GruModel::zeros(3);
        let h = [0.4, -0.2, 0.9];
        let out = gru_cell(&h, [1.0, -2.0], &m);
        for i in 0..3 {
            assert!((out[i] - 0.5 * h[i]).abs() < 1e-15);
        }
        assert_eq!(gru_cell(&[0.0; 3], [0.3, 0.1], &m), vec![0.0; 3]);
    }

    #[test]
    fn cell_matches_scalar_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = GruModel::init(3, &mut rng);
        let h = [0.3, -0.7, 0.1];
        let x = [0.8, -1.1];
        let out = gru_cell(&h, x, &m);
        for i in 0..3 {
            let mut ar = m.b_ir[i] + m.b_hr[i];
            let mut az = m.b_iz[i] + m.b_hz[i];
            let mut an = m.b_in[i];
            let mut hn = m.b_hn[i];
            for k in 0..2 {
                ar += m.w_ir[i * 2 + k] * x[k];
                az += m.w_iz[i * 2 + k] * x[k];
                an += m.w_in[i * 2 + k] * x[k];
            }
            for j in 0..3 {
                ar += m.w_hr[i * 3 + j] * h[j];
                az += m.w_hz[i * 3 + j] * h[j];
                hn += m.w_hn[i * 3 + j] * h[j];
            }
            let r = 1.0 / (1.0 + (-ar).exp());
            let z = 1.0 / (1.0 + (-az).exp());
            let n = (an + r * hn).tanh();
            assert!((out[i] - ((1.0 - z) * n + z * h[i])).abs() < 1e-12);
        }
    }

    fn shot(prep: Prep, dm: &[(f64, f64)], dt: f64) -> TrajectoryRecord {
        let rec = WeakRecord::new(dm.iter().map(|p| p.0).collect(), dm.iter().map(|p| p.1).collect(), dt).unwrap();
        TrajectoryRecord { prep, record: rec, axis: Axis::Z, outcome: 1, truth: None }
    }

    #[test]
    fn empty_record_gives_single_state() {
        let m = GruModel::init(4, &mut ChaCha8Rng::seed_from_u64(1));
        let out = forward(&m, &shot(Prep::Plus, &[], 0.04));
        assert_eq!(out.states.len(), 1);
        assert!(out.predictions.is_empty());
    }

    #[test]
    fn prep_enters_only_through_encoder() {
        let mut m = GruModel::init(4, &mut ChaCha8Rng::seed_from_u64(2));
        let a = forward(&m, &shot(Prep::Zero, &[(0.1, 0.0)], 0.04));
        // swap encoder columns 0 and 3
        for i in 0..4 {
            m.enc_w.swap(i * N_PREP, i * N_PREP + 3);
        }
        let b = forward(&m, &shot(Prep::Minus, &[(0.1, 0.0)], 0.04));
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_model_by_hand() {
        // H = 2 with only a few nonzero weights
        let mut m = GruModel::zeros(2);
        m.enc_w[0] = 0.5; // h0[0] from prep 0
        m.w_in[0] = 1.0; // n[0] sees x_I
        m.w_hn[3] = 2.0; // n[1] sees h[1]
        m.b_hn[1] = 0.25;
        m.b_iz[0] = 1.0;
        m.dec_w[0] = 1.0; // x ← h[0]
        m.dec_w[2 * 2 + 1] = -1.0; // z ← −h[1]
        m.dec_b[3] = 0.5;
        let dt: f64 = 0.04;
        let dm = [(0.2, 0.0), (-0.1, 0.0), (0.05, 0.0)];
        let out = forward(&m, &shot(Prep::Zero, &dm, dt));
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = [0.5f64.tanh(), 0.0];
        let mut xs = vec![h[0]];
        let mut zs = vec![-h[1]];
        for (dmi, _) in dm {
            let x = dmi / dt.sqrt();
            let z0 = s(1.0);
            let n0 = x.tanh();
            let r1 = 0.5;
            let n1 = (r1 * (2.0 * h[1] + 0.25)).tanh();
            h = [(1.0 - z0) * n0 + z0 * h[0], 0.5 * n1 + 0.5 * h[1]];
            xs.push(h[0]);
            zs.push(-h[1]);
        }
        for t in 0..4 {
            assert!((out.states[t].x - xs[t]).abs() < 1e-12);
            assert!((out.states[t].z - zs[t]).abs() < 1e-12);
            assert_eq!(out.states[t].y, 0.0);
        }
        for p in &out.predictions {
            assert!((p[0] - 0.5 * dt.sqrt()).abs() < 1e-12 && p[1] == 0.0);
        }
    }

    #[test]
    fn flat_roundtrip() {
        let m = GruModel::init(5, &mut ChaCha8Rng::seed_from_u64(3));
        let mut z = GruModel::zeros(5);
        z.set_flat(&m.to_flat());
        assert_eq!(z, m);
        m.validate().unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: GruModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
