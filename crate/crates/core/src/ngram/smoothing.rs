use serde::{Deserialize, Serialize};

use super::{Level, NgramModel};
use crate::error::{Error, Result};

/// Discount used at an order whose counts-of-counts leave the Chen-Goodman
/// estimate undefined or out of range.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KnDiscounts {
    /// Three count-bucketed discounts per order, estimated from
    /// counts-of-counts. The unigram level interpolates with a uniform
    /// distribution so unseen words keep non-zero mass.
    Modified,
    /// One absolute discount at orders >= 2 over a pure continuation
    /// unigram distribution. Words with no continuation count (`<unk>`)
    /// get zero probability in this mode.
    Fixed { discount: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SmoothingSpec {
    Laplace,
    AddLambda { lambda: f64 },
    KneserNey { discounts: KnDiscounts },
}

impl SmoothingSpec {
    pub const DEFAULT_LAMBDA: f64 = 0.1;

    pub fn add_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(SmoothingSpec::AddLambda { lambda })
    }

    pub fn kneser_ney() -> Self {
        SmoothingSpec::KneserNey {
            discounts: KnDiscounts::Modified,
        }
    }

    pub fn kn_fixed(discount: f64) -> Self {
        SmoothingSpec::KneserNey {
            discounts: KnDiscounts::Fixed { discount },
        }
    }

    /// Short name used in reports and cell keys.
    pub fn name(&self) -> &'static str {
        match self {
            SmoothingSpec::Laplace => "laplace",
            SmoothingSpec::AddLambda { .. } => "add-lambda",
            SmoothingSpec::KneserNey { .. } => "kneser-ney",
        }
    }
}

/// Discounts for one order: for adjusted counts 1, 2 and 3+.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderDiscounts {
    pub order: usize,
    pub d: [f64; 3],
    pub count_of_counts: [u64; 4],
    /// True when the estimate was undefined and [`FALLBACK_DISCOUNT`] was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscountReport {
    pub orders: Vec<OrderDiscounts>,
}

impl DiscountReport {
    pub(crate) fn estimate(levels: &[Level]) -> Self {
        let orders = levels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let (d, fallback) = match chen_goodman(l.count_of_counts) {
                    Some(d) => (d, false),
                    None => ([FALLBACK_DISCOUNT; 3], true),
                };
                OrderDiscounts {
                    order: k + 1,
                    d,
                    count_of_counts: l.count_of_counts,
                    fallback,
                }
            })
            .collect();
        DiscountReport { orders }
    }

    pub fn any_fallback(&self) -> bool {
        self.orders.iter().any(|o| o.fallback)
    }
}

/// `D_k = k - (k+1) Y N_{k+1} / N_k` with `Y = N1 / (N1 + 2 N2)`.
/// Undefined when N1, N2 or N3 is zero; rejected when any `D_k` leaves `[0, k]`.
pub(crate) fn chen_goodman(n: [u64; 4]) -> Option<[f64; 3]> {
    if n[0] == 0 || n[1] == 0 || n[2] == 0 {
        return None;
    }
    let nf = n.map(|x| x as f64);
    let y = nf[0] / (nf[0] + 2.0 * nf[1]);
    let mut d = [0.0; 3];
    for k in 0..3 {
        let kk = (k + 1) as f64;
        d[k] = kk - (kk + 1.0) * y * nf[k + 1] / nf[k];
        if !(d[k] >= 0.0 && d[k] <= kk) {
            return None;
        }
    }
    Some(d)
}

impl NgramModel {
    pub(crate) fn prob_ids(&self, spec: &SmoothingSpec, ctx: &[u32], w: u32) -> f64 {
        match *spec {
            SmoothingSpec::Laplace => self.prob_additive(ctx, w, 1.0),
            SmoothingSpec::AddLambda { lambda } => self.prob_additive(ctx, w, lambda),
            SmoothingSpec::KneserNey { discounts } => self.prob_kn(ctx, w, discounts),
        }
    }

    /// `(C(h, w) + lambda) / (C(h) + lambda |V|)`; an unseen context gives `1/|V|`.
    fn prob_additive(&self, ctx: &[u32], w: u32, lambda: f64) -> f64 {
        let top = &self.levels[self.order - 1];
        let v = self.vocab_size() as f64;
        let ctx_count = top.contexts.get(ctx).map_or(0, |s| s.raw_total);
        let count = if ctx_count == 0 {
            0
        } else {
            let mut g = Vec::with_capacity(ctx.len() + 1);
            g.extend_from_slice(ctx);
            g.push(w);
            top.raw.get(g.as_slice()).copied().unwrap_or(0)
        };
        (count as f64 + lambda) / (ctx_count as f64 + lambda * v)
    }

    /// Interpolated Kneser-Ney, evaluated bottom-up from the unigram level.
    /// An order whose context was never seen passes the lower-order estimate
    /// through unchanged.
    fn prob_kn(&self, ctx: &[u32], w: u32, mode: KnDiscounts) -> f64 {
        let n = self.order;
        let mut gram = Vec::with_capacity(n);
        let mut p = self.kn_unigram(w, mode, n == 1);
        for k in 2..=n {
            let level = &self.levels[k - 1];
            let h = &ctx[ctx.len() - (k - 1)..];
            let Some(st) = level.contexts.get(h) else { continue };
            if st.kn_total == 0 {
                continue;
            }
            gram.clear();
            gram.extend_from_slice(h);
            gram.push(w);
            let adjusted = if k == n {
                level.raw.get(gram.as_slice()).copied().unwrap_or(0)
            } else {
                level.cont.get(gram.as_slice()).copied().unwrap_or(0)
            };
            let d = self.discounts_for(k, mode);
            let total = st.kn_total as f64;
            let discounted = if adjusted == 0 {
                0.0
            } else {
                (adjusted as f64 - d[(adjusted.min(3) - 1) as usize]).max(0.0)
            };
            let gamma: f64 = (0..3).map(|b| d[b] * st.kn_buckets[b] as f64).sum::<f64>() / total;
            p = discounted / total + gamma * p;
        }
        p
    }

    fn discounts_for(&self, order: usize, mode: KnDiscounts) -> [f64; 3] {
        match mode {
            KnDiscounts::Modified => self.discounts.orders[order - 1].d,
            KnDiscounts::Fixed { discount } => [discount; 3],
        }
    }

    fn kn_unigram(&self, w: u32, mode: KnDiscounts, top_order: bool) -> f64 {
        let level = &self.levels[0];
        let v = self.vocab_size() as f64;
        let Some(st) = level.contexts.get(&[][..]) else {
            return 1.0 / v;
        };
        let adjusted = if top_order {
            level.raw.get(&[w][..]).copied().unwrap_or(0)
        } else {
            level.cont.get(&[w][..]).copied().unwrap_or(0)
        } as f64;
        let total = st.kn_total as f64;
        match mode {
            KnDiscounts::Fixed { .. } => adjusted / total,
            KnDiscounts::Modified => {
                let d = self.discounts.orders[0].d;
                let discounted = if adjusted == 0.0 {
                    0.0
                } else {
                    (adjusted - d[(adjusted.min(3.0) - 1.0) as usize]).max(0.0)
                };
                let gamma: f64 = (0..3).map(|b| d[b] * st.kn_buckets[b] as f64).sum::<f64>() / total;
                discounted / total + gamma / v
            }
        }
    }
}
