use crate::characterize::ce::{ce_term, PROB_CLIP};
use crate::qcore::BlochVector;
use crate::sme::TrajectoryRecord;

use super::loss::LossWeights;
use super::model::{input_at, GateSlices, GruModel, OUTPUT};

/// Per-shot share of each batch-mean term.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Norms {
    pub ce: f64,
    pub posit: f64,
    pub prep: f64,
    pub pred: f64,
}

impl Norms {
    /// Normalizers for a batch of `b` shots of `n` steps each.
    pub fn batch(b: usize, n: usize) -> Self {
        let b = b as f64;
        Self {
            ce: 1.0 / b,
            posit: 1.0 / (b * (n as f64 + 1.0)),
            prep: 1.0 / b,
            pred: if n > 0 { 1.0 / (b * 2.0 * n as f64) } else { 0.0 },
        }
    }
}

/// Unweighted loss terms, each already scaled by its normalizer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub ce: f64,
    pub posit: f64,
    pub prep: f64,
    pub pred: f64,
}

impl LossParts {
    pub fn total(&self, w: &LossWeights) -> f64 {
        self.ce + w.w_posit * self.posit + w.w_prep * self.prep + w.w_dm * self.pred
    }

    pub fn add(mut self, o: LossParts) -> Self {
        self.ce += o.ce;
        self.posit += o.posit;
        self.prep += o.prep;
        self.pred += o.pred;
        self
    }
}

pub(crate) struct ShotTarget<'a> {
    pub shot: &'a TrajectoryRecord,
    pub r0: BlochVector,
    pub visibility: f64,
}

struct OutCtx<'a> {
    n: usize,
    sdt: f64,
    tgt: &'a ShotTarget<'a>,
    w: &'a LossWeights,
    norms: Norms,
}

impl OutCtx<'_> {
    /// Loss terms of decoder output `o` at step `t` and their gradient.
    fn grad(&self, t: usize, o: &[f64; OUTPUT], parts: &mut LossParts) -> [f64; OUTPUT] {
        let (w, norms, shot) = (self.w, self.norms, self.tgt.shot);
        let mut d = [0.0; OUTPUT];
        let r2 = o[0] * o[0] + o[1] * o[1] + o[2] * o[2];
        if r2 > 1.0 {
            parts.posit += norms.posit * (r2 - 1.0);
            for k in 0..3 {
                d[k] += w.w_posit * norms.posit * 2.0 * o[k];
            }
        }
        if t == 0 {
            let r0 = self.tgt.r0;
            let e = [o[0] - r0.x, o[1] - r0.y, o[2] - r0.z];
            parts.prep += norms.prep * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
            for k in 0..3 {
                d[k] += w.w_prep * norms.prep * 2.0 * e[k];
            }
        }
        if t == self.n {
            let axis = shot.axis.index();
            let f = self.tgt.visibility;
            let raw = (o[axis] * f + 1.0) * 0.5;
            let pi = raw.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            parts.ce += norms.ce * ce_term(pi, shot.outcome);
            if pi == raw {
                let dpi = if shot.outcome > 0 { -1.0 / pi } else { 1.0 / (1.0 - pi) };
                d[axis] += norms.ce * dpi * 0.5 * f;
            }
        } else {
            let rec = [shot.record.dm_i[t], shot.record.dm_q[t]];
            for k in 0..2 {
                let e = o[3 + k] * self.sdt - rec[k];
                parts.pred += norms.pred * e * e;
                d[3 + k] += w.w_dm * norms.pred * 2.0 * e * self.sdt;
            }
        }
        d
    }
}

/// Forward pass plus reverse accumulation of the weighted loss into `grad`.
pub(crate) fn shot_loss_grad(
    m: &GruModel,
    tgt: &ShotTarget<'_>,
    w: &LossWeights,
    norms: Norms,
    grad: Option<&mut GruModel>,
) -> LossParts {
    let hd = m.hidden;
    let shot = tgt.shot;
    let n = shot.record.len();
    let sdt = shot.record.dt.sqrt();
    let inv = 1.0 / sdt;

    let mut hs = vec![0.0; (n + 1) * hd];
    let mut rs = vec![0.0; n * hd];
    let mut zs = vec![0.0; n * hd];
    let mut ns = vec![0.0; n * hd];
    let mut hns = vec![0.0; n * hd];
    m.encode(shot.prep.index(), &mut hs[..hd]);
    for t in 0..n {
        let (prev, next) = hs.split_at_mut((t + 1) * hd);
        let sl = t * hd..(t + 1) * hd;
        m.cell_into(
            &prev[t * hd..],
            input_at(shot, t, inv),
            GateSlices {
                r: &mut rs[sl.clone()],
                z: &mut zs[sl.clone()],
                n: &mut ns[sl.clone()],
                hn: &mut hns[sl],
                out: &mut next[..hd],
            },
        );
    }

    let mut parts = LossParts::default();
    let ctx = OutCtx { n, sdt, tgt, w, norms };

    let Some(g) = grad else {
        for t in 0..=n {
            ctx.grad(t, &m.decode(&hs[t * hd..(t + 1) * hd]), &mut parts);
        }
        return parts;
    };

    // reverse sweep; gh holds dL/dh_t
    let mut gh = vec![0.0; hd];
    let mut dar = vec![0.0; hd];
    let mut daz = vec![0.0; hd];
    let mut dhn = vec![0.0; hd];
    let add_decoder = |t: usize, gh: &mut [f64], g: &mut GruModel, parts: &mut LossParts| {
        let h = &hs[t * hd..(t + 1) * hd];
        let d = ctx.grad(t, &m.decode(h), parts);
        for k in 0..OUTPUT {
            if d[k] == 0.0 {
                continue;
            }
            g.dec_b[k] += d[k];
            let row = &mut g.dec_w[k * hd..(k + 1) * hd];
            for j in 0..hd {
                row[j] += d[k] * h[j];
                gh[j] += m.dec_w[k * hd + j] * d[k];
            }
        }
    };
    add_decoder(n, &mut gh, g, &mut parts);
    for t in (0..n).rev() {
        let h = &hs[t * hd..(t + 1) * hd];
        let sl = t * hd..(t + 1) * hd;
        let (r, z, nn, hn) = (&rs[sl.clone()], &zs[sl.clone()], &ns[sl.clone()], &hns[sl]);
        let x = input_at(shot, t, inv);
        let mut dh = vec![0.0; hd];
        for i in 0..hd {
            let dn = gh[i] * (1.0 - z[i]);
            let dz = gh[i] * (h[i] - nn[i]);
            dh[i] = gh[i] * z[i];
            let dan = dn * (1.0 - nn[i] * nn[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
            dar[i] = dan * hn[i] * r[i] * (1.0 - r[i]);
            dhn[i] = dan * r[i];
            for k in 0..2 {
                g.w_in[2 * i + k] += dan * x[k];
                g.w_iz[2 * i + k] += daz[i] * x[k];
                g.w_ir[2 * i + k] += dar[i] * x[k];
            }
            g.b_in[i] += dan;
            g.b_iz[i] += daz[i];
            g.b_hz[i] += daz[i];
            g.b_ir[i] += dar[i];
            g.b_hr[i] += dar[i];
            g.b_hn[i] += dhn[i];
        }
        for i in 0..hd {
            let row = i * hd..(i + 1) * hd;
            let (gz, gr, gn) = (&mut g.w_hz[row.clone()], &mut g.w_hr[row.clone()], &mut g.w_hn[row.clone()]);
            let (wz, wr, wn) = (&m.w_hz[row.clone()], &m.w_hr[row.clone()], &m.w_hn[row]);
            for j in 0..hd {
                gz[j] += daz[i] * h[j];
                gr[j] += dar[i] * h[j];
                gn[j] += dhn[i] * h[j];
                dh[j] += wz[j] * daz[i] + wr[j] * dar[i] + wn[j] * dhn[i];
            }
        }
        gh.copy_from_slice(&dh);
        add_decoder(t, &mut gh, g, &mut parts);
    }
    let prep = shot.prep.index();
    for i in 0..hd {
        let da = gh[i] * (1.0 - hs[i] * hs[i]);
        g.enc_w[i * super::model::N_PREP + prep] += da;
        g.enc_b[i] += da;
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::{Axis, Prep, WeakRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::RngExt;

    fn batch_loss(m: &GruModel, tg: &[ShotTarget<'_>], w: &LossWeights, g: Option<&mut GruModel>) -> f64 {
        let norms = Norms::batch(tg.len(), tg[0].shot.record.len());
        match g {
            Some(g) => tg.iter().map(|t| shot_loss_grad(m, t, w, norms, Some(g)).total(w)).sum(),
            None => tg.iter().map(|t| shot_loss_grad(m, t, w, norms, None).total(w)).sum(),
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dt = 0.04;
        let shots: Vec<TrajectoryRecord> = (0..2)
            .map(|i| {
                let dm_i = (0..5).map(|_| (rng.random::<f64>() - 0.5) * 0.6).collect();
                let dm_q = (0..5).map(|_| (rng.random::<f64>() - 0.5) * 0.6).collect();
                TrajectoryRecord {
                    prep: Prep::ALL[2 * i + 1],
                    record: WeakRecord::new(dm_i, dm_q, dt).unwrap(),
                    axis: Axis::ALL[i],
                    outcome: if i == 0 { 1 } else { -1 },
                    truth: None,
                }
            })
            .collect();
        let tg: Vec<ShotTarget> = shots
            .iter()
            .map(|s| ShotTarget { shot: s, r0: s.prep.bloch(), visibility: 0.97 })
            .collect();
        // large weights so the posit term is active
        let mut m = GruModel::init(3, &mut rng);
        for v in m.dec_w.iter_mut().chain(m.dec_b.iter_mut()) {
            *v *= 3.0;
        }
        let w = LossWeights { w_posit: 0.7, w_prep: 1.3, w_dm: 2.1 };
        let mut g = GruModel::zeros(3);
        batch_loss(&m, &tg, &w, Some(&mut g));
        let grad = g.to_flat();
        let theta = m.to_flat();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += h;
            m.set_flat(&p);
            let up = batch_loss(&m, &tg, &w, None);
            p[i] -= 2.0 * h;
            m.set_flat(&p);
            let dn = batch_loss(&m, &tg, &w, None);
            let fd = (up - dn) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
