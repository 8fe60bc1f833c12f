//! Forward scores for the four model kinds.
//!
//! Every kind evaluates `bias + main + pairwise [+ three-way]` with the same
//! generic kernels. Sums are folded left to right starting from the first
//! term, with no `0 +` seed.

use serde::{Deserialize, Serialize};

use super::config::{pair_index, ModelKind};
use super::instance::{Rows, SparseInstance};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest probability the model ever reports; also the log-loss clamp.
pub const PROB_EPS: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub phi: f64,
    pub prob: f64,
}

/// Per-component breakdown of a forward score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terms<S> {
    pub bias: S,
    pub main: S,
    pub pairwise: S,
    /// Present only for the 3-way kind.
    pub three_way: Option<S>,
}

impl<S: Scalar> Terms<S> {
    #[inline]
    pub fn combine(&self) -> S {
        let phi = self.bias + self.main + self.pairwise;
        match self.three_way {
            Some(t) => phi + t,
            None => phi,
        }
    }
}

/// Numerically stable logistic function, clamped to `[PROB_EPS, 1 - PROB_EPS]`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = a[0] * b[0];
    for i in 1..a.len() {
        acc = acc + a[i] * b[i];
    }
    acc
}

/// `sum_k a_k * b_k * c_k`
#[inline]
pub(crate) fn dot3<S: Scalar>(a: &[S], b: &[S], c: &[S]) -> S {
    let mut acc = a[0] * b[0] * c[0];
    for i in 1..a.len() {
        acc = acc + a[i] * b[i] * c[i];
    }
    acc
}

/// Borrowed parameter tensors of one task slot, generic over the scalar.
pub(crate) struct SlotView<'a, S> {
    pub k: usize,
    pub bias: S,
    pub embeddings: &'a [S],
    pub main: &'a [S],
    pub interactions: Option<&'a [S]>,
}

impl<S: Scalar> SlotView<'_, S> {
    #[inline]
    fn emb(&self, row: usize) -> &[S] {
        &self.embeddings[row * self.k..(row + 1) * self.k]
    }

    /// `sum_f <v_f, w_f>` over all input fields.
    pub fn main_term(&self, rows: &Rows<'_>) -> S {
        let k = self.k;
        let mut acc = dot(self.emb(rows.get(0)), &self.main[..k]);
        for f in 1..rows.len() {
            acc = acc + dot(self.emb(rows.get(f)), &self.main[f * k..(f + 1) * k]);
        }
        acc
    }

    /// `sum_{p<q} <v_p, v_q> r_pq` over the first `fields` input fields,
    /// with `r` taken from `weights` (packed over `fields`) or fixed to 1.
    pub fn pairwise_term(&self, rows: &Rows<'_>, fields: usize, weights: Option<&[S]>) -> S {
        let mut acc: Option<S> = None;
        let mut idx = 0;
        for p in 0..fields {
            let vp = self.emb(rows.get(p));
            for q in p + 1..fields {
                let d = dot(vp, self.emb(rows.get(q)));
                let term = match weights {
                    Some(r) => d * r[idx],
                    None => d,
                };
                idx += 1;
                acc = Some(match acc {
                    Some(a) => a + term,
                    None => term,
                });
            }
        }
        acc.expect("at least two fields")
    }

    /// `sum_{p<q<N} <v_p, v_q, v_t> r_pq` where `v_t` is the type embedding.
    pub fn three_way_term(&self, rows: &Rows<'_>, r: &[S]) -> S {
        let n = rows.base_len();
        let vt = self.emb(rows.type_row().expect("3-way term needs a type feature"));
        let mut acc: Option<S> = None;
        for p in 0..n {
            let vp = self.emb(rows.get(p));
            for q in p + 1..n {
                let term = dot3(vp, self.emb(rows.get(q)), vt) * r[pair_index(n, p, q)];
                acc = Some(match acc {
                    Some(a) => a + term,
                    None => term,
                });
            }
        }
        acc.expect("at least two fields")
    }

    pub fn terms(&self, kind: ModelKind, rows: &Rows<'_>) -> Terms<S> {
        let main = self.main_term(rows);
        match kind {
            ModelKind::FmCtf2 => Terms {
                bias: self.bias,
                main,
                pairwise: self.pairwise_term(rows, rows.len(), None),
                three_way: None,
            },
            ModelKind::FwfmCtf2 | ModelKind::MtFwfm => Terms {
                bias: self.bias,
                main,
                pairwise: self.pairwise_term(rows, rows.len(), self.interactions),
                three_way: None,
            },
            ModelKind::FwfmCtf3 => {
                let r = self.interactions.expect("3-way kind has interaction weights");
                Terms {
                    bias: self.bias,
                    main,
                    // Unweighted 2-way term over all N+1 fields.
                    pairwise: self.pairwise_term(rows, rows.len(), None),
                    three_way: Some(self.three_way_term(rows, r)),
                }
            }
        }
    }
}

impl ModelParams {
    pub(crate) fn view(&self, slot: usize) -> SlotView<'_, f64> {
        SlotView {
            k: self.config.embed_dim,
            bias: self.bias[slot],
            embeddings: &self.embeddings,
            main: self.main_slot(slot),
            interactions: self.interaction_slot(slot),
        }
    }

    /// Forward score broken into its components.
    pub fn terms(&self, inst: &SparseInstance) -> Result<Terms<f64>> {
        let rows = inst.rows(&self.config)?;
        Ok(self.view(self.slot(inst.conv_type)).terms(self.config.kind, &rows))
    }

    /// Forward score for whatever kind these parameters are.
    pub fn phi(&self, inst: &SparseInstance) -> Result<f64> {
        Ok(self.terms(inst)?.combine())
    }

    pub fn predict(&self, inst: &SparseInstance) -> Result<Prediction> {
        let phi = self.phi(inst)?;
        Ok(Prediction {
            phi,
            prob: sigmoid(phi),
        })
    }

    /// Probabilities for a whole dataset, evaluated in parallel.
    pub fn predict_all(&self, data: &[SparseInstance]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        data.par_iter()
            .map(|inst| self.predict(inst).map(|p| p.prob))
            .collect()
    }

    fn expect_kind(&self, allowed: &[ModelKind]) -> Result<()> {
        if allowed.contains(&self.config.kind) {
            Ok(())
        } else {
            Err(Error::WrongModelKind(self.config.kind.to_string()))
        }
    }
}

/// 2-way CTF score (FM or FwFM): the conversion type is an ordinary extra field.
pub fn phi_fwfm(params: &ModelParams, inst: &SparseInstance) -> Result<f64> {
    params.expect_kind(&[ModelKind::FmCtf2, ModelKind::FwfmCtf2])?;
    params.phi(inst)
}

/// Multi-task score: type-specific bias, main and interaction weights over
/// shared embeddings.
pub fn phi_mt_fwfm(params: &ModelParams, inst: &SparseInstance) -> Result<f64> {
    params.expect_kind(&[ModelKind::MtFwfm])?;
    params.phi(inst)
}

/// 3-way CTF FwFM score.
pub fn phi_3way_ctf(params: &ModelParams, inst: &SparseInstance) -> Result<f64> {
    params.expect_kind(&[ModelKind::FwfmCtf3])?;
    params.phi(inst)
}

pub fn predict(params: &ModelParams, inst: &SparseInstance) -> Result<Prediction> {
    params.predict(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-1.5), evaluated with mpmath at 30 digits.
        assert!((sigmoid(1.5) - 0.817_574_476_193_643_7).abs() < 1e-15);
        assert!((sigmoid(-1.5) - (1.0 - sigmoid(1.5))).abs() < 1e-15);
        assert_eq!(sigmoid(700.0), 1.0 - PROB_EPS);
        assert_eq!(sigmoid(-700.0), PROB_EPS);
        assert!(sigmoid(-1e300).is_finite());
    }

    #[test]
    fn sigmoid_symmetry_on_grid() {
        let mut x = -30.0;
        while x <= 30.0 {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() <= 1e-15, "x = {x}");
            x += 0.125;
        }
    }

    #[test]
    fn kind_specific_entry_points_reject_other_kinds() {
        let c = ModelConfig::new(ModelKind::MtFwfm, vec![2, 2], 1, 1).unwrap();
        let p = ModelParams::zeros(c).unwrap();
        let inst = SparseInstance::new(vec![0, 2], 0, false);
        assert!(phi_mt_fwfm(&p, &inst).is_ok());
        assert!(matches!(phi_fwfm(&p, &inst), Err(Error::WrongModelKind(_))));
        assert!(matches!(phi_3way_ctf(&p, &inst), Err(Error::WrongModelKind(_))));
    }
}
