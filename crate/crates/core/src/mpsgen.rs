//! Matrix-product-state Born machine over fixed-length bitstrings.
//!
//! The model is a chain of real order-3 tensors `A[k]` with shape
//! `(left bond, 2, right bond)`; the probability of a bitstring `x` is
//! `(A[0][x0] A[1][x1] ... A[n-1][x(n-1)])^2`. The model is kept in mixed
//! canonical form around `center` and normalized, so probabilities need no
//! partition function.
//!
//! Training minimizes the weighted negative log-likelihood with two-site
//! gradient sweeps: the tensors of a bond are merged, moved along the
//! gradient, renormalized and split again by a truncated SVD, which lets
//! bonds grow up to `max_bond`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::encoding::BitString;
use crate::error::{Error, Result};

/// Smallest probability used inside a logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-300;
const AMPLITUDE_FLOOR: f64 = 1e-150;

const BINARY_MAGIC: &[u8; 4] = b"MPSB";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct Site {
    left: usize,
    right: usize,
    /// Row-major `(left, 2, right)`.
    data: Vec<f64>,
}

impl Site {
    #[inline]
    fn at(&self, l: usize, s: usize, r: usize) -> f64 {
        self.data[(l * 2 + s) * self.right + r]
    }

    /// `v * A[s]`
    fn apply_left(&self, v: &[f64], s: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.right, 0.0);
        for (l, &vl) in v.iter().enumerate() {
            if vl == 0.0 {
                continue;
            }
            let row = &self.data[(l * 2 + s) * self.right..(l * 2 + s + 1) * self.right];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += vl * a;
            }
        }
    }

    /// `A[s] * v`
    fn apply_right(&self, s: usize, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.left).map(|l| {
            let row = &self.data[(l * 2 + s) * self.right..(l * 2 + s + 1) * self.right];
            row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub sweeps: usize,
    pub learning_rate: f64,
    pub max_bond: usize,
    pub svd_cutoff: f64,
    /// Initial entries are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            sweeps: 10,
            learning_rate: 0.05,
            max_bond: 6,
            svd_cutoff: 1e-10,
            init_scale: 0.1,
        }
    }
}

/// Bitstrings with normalized positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    n_bits: usize,
    items: Vec<(BitString, f64)>,
}

impl WeightedDataset {
    pub fn new(items: Vec<(BitString, f64)>) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::Mps("dataset is empty".into()));
        };
        let n_bits = first.0.len();
        if items.iter().any(|(b, _)| b.len() != n_bits) {
            return Err(Error::Mps("dataset bitstrings differ in length".into()));
        }
        if items.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Mps("dataset weights must be positive".into()));
        }
        let total: f64 = items.iter().map(|(_, w)| w).sum();
        let items = items.into_iter().map(|(b, w)| (b, w / total)).collect();
        Ok(Self { n_bits, items })
    }

    pub fn uniform(strings: Vec<BitString>) -> Result<Self> {
        Self::new(strings.into_iter().map(|b| (b, 1.0)).collect())
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn items(&self) -> &[(BitString, f64)] {
        &self.items
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss before training followed by the loss after every sweep.
    pub loss_history: Vec<f64>,
    /// Sweeps rejected for raising the loss (each halves the learning rate).
    pub rejected_sweeps: usize,
    pub final_learning_rate: f64,
    /// Items whose probability fell below [`PROBABILITY_FLOOR`] at the end.
    pub floored_items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsModel {
    sites: Vec<Site>,
    max_bond: usize,
    center: Option<usize>,
}

fn capped_pow2(k: usize, cap: usize) -> usize {
    if k >= usize::BITS as usize - 1 {
        cap
    } else {
        (1usize << k).min(cap)
    }
}

impl MpsModel {
    /// Random model with entries uniform in `[-init_scale, init_scale]`,
    /// right-canonicalized and normalized, bonds `min(max_bond, 2^k, 2^(n-k))`.
    pub fn random(n_sites: usize, params: &TrainParams, rng: &mut impl Rng) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::Mps("an MPS needs at least one site".into()));
        }
        if params.max_bond == 0 {
            return Err(Error::Mps("max bond dimension must be at least 1".into()));
        }
        let bond = |k: usize| {
            capped_pow2(k, params.max_bond).min(capped_pow2(n_sites - k, params.max_bond))
        };
        let scale = params.init_scale;
        let sites = (0..n_sites)
            .map(|k| {
                let (left, right) = (bond(k), bond(k + 1));
                let data = (0..left * 2 * right)
                    .map(|_| rng.random_range(-scale..=scale))
                    .collect();
                Site { left, right, data }
            })
            .collect();
        let mut mps = Self {
            sites,
            max_bond: params.max_bond,
            center: None,
        };
        mps.move_center_to(0);
        mps.normalize();
        Ok(mps)
    }

    /// Product state putting all weight on `bits`.
    pub fn product_state(bits: &BitString, max_bond: usize) -> Self {
        let sites = bits
            .bits()
            .iter()
            .map(|&b| {
                let mut data = vec![0.0; 2];
                data[b as usize] = 1.0;
                Site {
                    left: 1,
                    right: 1,
                    data,
                }
            })
            .collect();
        Self {
            sites,
            max_bond,
            center: Some(0),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Internal bond dimensions, `n_sites - 1` of them.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(|s| s.right)
            .collect()
    }

    pub fn amplitude(&self, bits: &BitString) -> Result<f64> {
        if bits.len() != self.n_sites() {
            return Err(Error::Mps(format!(
                "bitstring has {} bits, model has {} sites",
                bits.len(),
                self.n_sites()
            )));
        }
        let mut v = vec![1.0];
        let mut next = Vec::new();
        for (site, &b) in self.sites.iter().zip(bits.bits()) {
            site.apply_left(&v, b as usize, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        Ok(v[0])
    }

    /// Born probability of `bits` for a normalized model.
    pub fn probability(&self, bits: &BitString) -> Result<f64> {
        Ok(self.amplitude(bits)?.powi(2))
    }

    /// Sum over all bitstrings of the squared amplitude, by transfer
    /// matrices.
    pub fn norm_squared(&self) -> f64 {
        let mut env = DMatrix::<f64>::from_element(1, 1, 1.0);
        for site in &self.sites {
            let mut next = DMatrix::<f64>::zeros(site.right, site.right);
            for s in 0..2 {
                let a = DMatrix::from_fn(site.left, site.right, |l, r| site.at(l, s, r));
                next += a.transpose() * &env * &a;
            }
            env = next;
        }
        env[(0, 0)]
    }

    fn normalize(&mut self) {
        let c = self.center.expect("normalize needs a canonical center");
        let norm = self.sites[c].data.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut self.sites[c].data {
            *x /= norm;
        }
    }

    /// Largest deviation from isometry over all non-center sites.
    pub fn isometry_residual(&self) -> f64 {
        let Some(c) = self.center else {
            return f64::INFINITY;
        };
        let mut worst = 0.0f64;
        for (k, site) in self.sites.iter().enumerate() {
            if k == c {
                continue;
            }
            let m = if k < c {
                // rows (l, s), columns r
                DMatrix::from_row_slice(site.left * 2, site.right, &site.data)
            } else {
                // rows l, columns (s, r)
                DMatrix::from_row_slice(site.left, 2 * site.right, &site.data).transpose()
            };
            let gram = m.transpose() * &m;
            let id = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
            worst = worst.max((gram - id).abs().max());
        }
        worst
    }

    /// Moves the orthogonality center to `target` with exact (untruncated)
    /// SVD steps.
    pub fn move_center_to(&mut self, target: usize) {
        assert!(target < self.n_sites());
        let c = match self.center {
            Some(c) => c,
            None => {
                // right-canonicalize the whole chain
                let last = self.n_sites() - 1;
                for k in (1..=last).rev() {
                    self.shift_left(k);
                }
                self.center = Some(0);
                0
            }
        };
        for k in c..target {
            self.shift_right(k);
        }
        for k in (target + 1..=c).rev() {
            self.shift_left(k);
        }
        self.center = Some(target);
    }

    fn shift_right(&mut self, k: usize) {
        let site = &self.sites[k];
        let m = DMatrix::from_row_slice(site.left * 2, site.right, &site.data);
        let svd = m.svd(true, true);
        let (u, s, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        let rank = s.len();
        let left = site.left;
        self.sites[k] = site_from_rows(left, rank, &u);
        let carry = DMatrix::from_diagonal(&s) * vt;
        let next = &self.sites[k + 1];
        let nm = DMatrix::from_row_slice(next.left, 2 * next.right, &next.data);
        let merged = carry * nm;
        let right = self.sites[k + 1].right;
        self.sites[k + 1] = site_from_rows(rank, right, &merged);
    }

    fn shift_left(&mut self, k: usize) {
        let site = &self.sites[k];
        let m = DMatrix::from_row_slice(site.left, 2 * site.right, &site.data);
        let svd = m.svd(true, true);
        let (u, s, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        let rank = s.len();
        let right = site.right;
        self.sites[k] = site_from_rows(rank, right, &vt);
        let carry = u * DMatrix::from_diagonal(&s);
        let prev = &self.sites[k - 1];
        let pm = DMatrix::from_row_slice(prev.left * 2, prev.right, &prev.data);
        let merged = pm * carry;
        let left = self.sites[k - 1].left;
        self.sites[k - 1] = site_from_rows(left, rank, &merged);
    }

    /// Weighted negative log-likelihood `-sum w log P(x)`, floored at
    /// [`PROBABILITY_FLOOR`]. Also returns how many items hit the floor.
    pub fn loss_with_floor_count(&self, data: &WeightedDataset) -> Result<(f64, usize)> {
        let mut loss = 0.0;
        let mut floored = 0;
        for (bits, w) in data.items() {
            let p = self.probability(bits)?;
            if p < PROBABILITY_FLOOR {
                floored += 1;
            }
            loss -= w * p.max(PROBABILITY_FLOOR).ln();
        }
        Ok((loss, floored))
    }

    pub fn loss(&self, data: &WeightedDataset) -> Result<f64> {
        Ok(self.loss_with_floor_count(data)?.0)
    }

    /// Independent i.i.d. draws from the Born distribution.
    pub fn sample(&mut self, count: usize, rng: &mut impl Rng) -> Vec<BitString> {
        self.move_center_to(0);
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Sampling on a model already centered at site 0.
    fn sample_one(&self, rng: &mut impl Rng) -> BitString {
        debug_assert_eq!(self.center, Some(0));
        let mut v = vec![1.0];
        let mut bits = Vec::with_capacity(self.n_sites());
        let mut w0 = Vec::new();
        let mut w1 = Vec::new();
        for site in &self.sites {
            site.apply_left(&v, 0, &mut w0);
            site.apply_left(&v, 1, &mut w1);
            let p0: f64 = w0.iter().map(|x| x * x).sum();
            let p1: f64 = w1.iter().map(|x| x * x).sum();
            let one = rng.random::<f64>() * (p0 + p1) >= p0;
            let (chosen, p) = if one { (&w1, p1) } else { (&w0, p0) };
            let norm = p.sqrt();
            v.clear();
            v.extend(chosen.iter().map(|x| x / norm));
            bits.push(one as u8);
        }
        BitString::from_bits(bits)
    }

    /// Trains in place with two-site gradient sweeps. A sweep that raises
    /// the loss is undone and the learning rate halved.
    pub fn train(&mut self, data: &WeightedDataset, params: &TrainParams) -> Result<TrainReport> {
        if data.n_bits() != self.n_sites() {
            return Err(Error::Mps(format!(
                "dataset has {} bits, model has {} sites",
                data.n_bits(),
                self.n_sites()
            )));
        }
        self.max_bond = params.max_bond;
        let mut lr = params.learning_rate;
        let mut loss = self.loss(data)?;
        check_finite(loss)?;
        let mut history = vec![loss];
        let mut rejected = 0;
        if self.n_sites() < 2 {
            // nothing to merge: fit the single site directly
            self.fit_single_site(data);
            loss = self.loss(data)?;
            history.extend(std::iter::repeat_n(loss, params.sweeps));
        } else {
            for _ in 0..params.sweeps {
                let saved = self.clone();
                self.sweep(data, lr, params.svd_cutoff);
                let new_loss = self.loss(data)?;
                check_finite(new_loss)?;
                if new_loss > loss + 1e-12 * loss.abs().max(1.0) {
                    *self = saved;
                    lr *= 0.5;
                    rejected += 1;
                } else {
                    loss = new_loss;
                }
                history.push(loss);
            }
        }
        let (_, floored_items) = self.loss_with_floor_count(data)?;
        Ok(TrainReport {
            loss_history: history,
            rejected_sweeps: rejected,
            final_learning_rate: lr,
            floored_items,
        })
    }

    fn fit_single_site(&mut self, data: &WeightedDataset) {
        let mut p = [0.0; 2];
        for (bits, w) in data.items() {
            p[bits.bits()[0] as usize] += w;
        }
        self.sites[0] = Site {
            left: 1,
            right: 1,
            data: vec![p[0].sqrt(), p[1].sqrt()],
        };
        self.center = Some(0);
    }

    /// One left-to-right then right-to-left pass over all bonds.
    fn sweep(&mut self, data: &WeightedDataset, lr: f64, cutoff: f64) {
        let n = self.n_sites();
        self.move_center_to(0);
        let items = data.items();
        // right[k][i]: contraction of sites k.. for item i; right[n] = [1]
        let mut right: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]; items.len()]; n + 1];
        for k in (2..n).rev() {
            for (i, (bits, _)) in items.iter().enumerate() {
                let mut out = Vec::new();
                self.sites[k].apply_right(bits.bits()[k] as usize, &right[k + 1][i], &mut out);
                right[k][i] = out;
            }
        }
        let mut left: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]; items.len()]; n + 1];

        for k in 0..n - 1 {
            let merged = self.merge(k);
            let updated = self.gradient_step(k, merged, data, &left[k], &right[k + 2], lr);
            self.split(k, &updated, true, cutoff);
            for (i, (bits, _)) in items.iter().enumerate() {
                let mut out = Vec::new();
                self.sites[k].apply_left(&left[k][i], bits.bits()[k] as usize, &mut out);
                left[k + 1][i] = out;
            }
        }
        for k in (0..n - 1).rev() {
            let merged = self.merge(k);
            let updated = self.gradient_step(k, merged, data, &left[k], &right[k + 2], lr);
            self.split(k, &updated, false, cutoff);
            for (i, (bits, _)) in items.iter().enumerate() {
                let mut out = Vec::new();
                self.sites[k + 1].apply_right(
                    bits.bits()[k + 1] as usize,
                    &right[k + 2][i],
                    &mut out,
                );
                right[k + 1][i] = out;
            }
        }
        debug_assert_eq!(self.center, Some(0));
    }

    /// Two-site tensor of bond `k`, row-major `(left, 2, 2, right)`.
    fn merge(&self, k: usize) -> Merged {
        let (a, b) = (&self.sites[k], &self.sites[k + 1]);
        let am = DMatrix::from_row_slice(a.left * 2, a.right, &a.data);
        let bm = DMatrix::from_row_slice(b.left, 2 * b.right, &b.data);
        let prod = am * bm;
        Merged {
            left: a.left,
            right: b.right,
            data: row_major(&prod),
        }
    }

    /// Loss gradient with respect to the merged tensor of bond `k`:
    /// `2 B / |B|^2 - 2 sum_i w_i (dpsi_i / dB) / psi_i`.
    fn merged_gradient(
        merged: &Merged,
        data: &WeightedDataset,
        left_env: &[Vec<f64>],
        right_env: &[Vec<f64>],
        k: usize,
    ) -> Vec<f64> {
        let z: f64 = merged.data.iter().map(|x| x * x).sum();
        let mut grad: Vec<f64> = merged.data.iter().map(|x| 2.0 * x / z).collect();
        let r = merged.right;
        for (i, (bits, w)) in data.items().iter().enumerate() {
            let (s1, s2) = (bits.bits()[k] as usize, bits.bits()[k + 1] as usize);
            let (lv, rv) = (&left_env[i], &right_env[i]);
            let mut psi = 0.0;
            for (l, &lx) in lv.iter().enumerate() {
                let base = ((l * 2 + s1) * 2 + s2) * r;
                psi += lx * merged.data[base..base + r]
                    .iter()
                    .zip(rv)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            let psi = if psi.abs() < AMPLITUDE_FLOOR {
                AMPLITUDE_FLOOR.copysign(if psi == 0.0 { 1.0 } else { psi })
            } else {
                psi
            };
            let coef = -2.0 * w / psi;
            for (l, &lx) in lv.iter().enumerate() {
                let base = ((l * 2 + s1) * 2 + s2) * r;
                for (g, &rx) in grad[base..base + r].iter_mut().zip(rv) {
                    *g += coef * lx * rx;
                }
            }
        }
        grad
    }

    fn gradient_step(
        &self,
        k: usize,
        mut merged: Merged,
        data: &WeightedDataset,
        left_env: &[Vec<f64>],
        right_env: &[Vec<f64>],
        lr: f64,
    ) -> Merged {
        let grad = Self::merged_gradient(&merged, data, left_env, right_env, k);
        for (x, g) in merged.data.iter_mut().zip(&grad) {
            *x -= lr * g;
        }
        let norm = merged.data.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut merged.data {
            *x /= norm;
        }
        merged
    }

    /// Splits a merged tensor back into sites `k`, `k + 1`, keeping at most
    /// `max_bond` singular values above `cutoff`; the center ends on
    /// `k + 1` when moving right, on `k` otherwise.
    fn split(&mut self, k: usize, merged: &Merged, moving_right: bool, cutoff: f64) {
        let (l, r) = (merged.left, merged.right);
        let m = DMatrix::from_row_slice(l * 2, 2 * r, &merged.data);
        let svd = m.svd(true, true);
        let (u, s, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        let kept = s
            .iter()
            .take(self.max_bond)
            .take_while(|&&x| x > cutoff)
            .count()
            .max(1);
        let norm = s.rows(0, kept).norm();
        let s = s.rows(0, kept) / norm;
        let u = u.columns(0, kept).into_owned();
        let vt = vt.rows(0, kept).into_owned();
        if moving_right {
            self.sites[k] = site_from_rows(l, kept, &u);
            self.sites[k + 1] = site_from_rows(kept, r, &(DMatrix::from_diagonal(&s) * vt));
            self.center = Some(k + 1);
        } else {
            self.sites[k] = site_from_rows(l, kept, &(u * DMatrix::from_diagonal(&s)));
            self.sites[k + 1] = site_from_rows(kept, r, &vt);
            self.center = Some(k);
        }
    }

    /// Merged tensor of bond `k` and the analytic loss gradient with respect
    /// to it, after moving the center onto the bond. Exposed for gradient
    /// checks.
    pub fn bond_gradient(&mut self, k: usize, data: &WeightedDataset) -> (Vec<f64>, Vec<f64>) {
        self.move_center_to(k);
        let items = data.items();
        let left: Vec<Vec<f64>> = items
            .iter()
            .map(|(bits, _)| {
                let mut v = vec![1.0];
                let mut next = Vec::new();
                for j in 0..k {
                    self.sites[j].apply_left(&v, bits.bits()[j] as usize, &mut next);
                    std::mem::swap(&mut v, &mut next);
                }
                v
            })
            .collect();
        let right: Vec<Vec<f64>> = items
            .iter()
            .map(|(bits, _)| {
                let mut v = vec![1.0];
                let mut next = Vec::new();
                for j in (k + 2..self.n_sites()).rev() {
                    self.sites[j].apply_right(bits.bits()[j] as usize, &v, &mut next);
                    std::mem::swap(&mut v, &mut next);
                }
                v
            })
            .collect();
        let merged = self.merge(k);
        let grad = Self::merged_gradient(&merged, data, &left, &right, k);
        (merged.data, grad)
    }

    /// Loss of the model with bond `k` replaced by `merged` (row-major
    /// `(left, 2, 2, right)`), normalizing by the full contraction of the
    /// modified chain. Exposed for gradient checks.
    pub fn loss_with_merged(&self, k: usize, merged: &[f64], data: &WeightedDataset) -> f64 {
        let (l, r) = (self.sites[k].left, self.sites[k + 1].right);
        let m = DMatrix::from_row_slice(l * 2, 2 * r, merged);
        let mut chain = self.clone();
        chain.sites[k] = site_from_rows(l, l * 2, &DMatrix::identity(l * 2, l * 2));
        chain.sites[k + 1] = site_from_rows(l * 2, r, &reshape_rows(&m, l * 2, 2 * r));
        chain.center = None;
        let z = chain.norm_squared();
        data.items()
            .iter()
            .map(|(bits, w)| {
                let a = chain.amplitude(bits).expect("length checked");
                -w * (a * a / z).max(PROBABILITY_FLOOR).ln()
            })
            .sum()
    }

    /// Structured text form; [`MpsModel::from_text`] restores it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mps {FORMAT_VERSION}");
        let _ = writeln!(out, "sites {}", self.n_sites());
        let _ = writeln!(out, "max_bond {}", self.max_bond);
        match self.center {
            Some(c) => {
                let _ = writeln!(out, "center {c}");
            }
            None => {
                let _ = writeln!(out, "center none");
            }
        }
        for (k, s) in self.sites.iter().enumerate() {
            let _ = writeln!(out, "site {k} {} {}", s.left, s.right);
            let values: Vec<String> = s.data.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", values.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::parse("mps text", msg);
        let mut lines = text.lines();
        let field = |lines: &mut std::str::Lines, name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("unexpected end of file"))?;
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| bad(&format!("malformed line {line:?}")))?;
            if key != name {
                return Err(bad(&format!("expected {name}, found {key}")));
            }
            Ok(value.to_string())
        };
        let version: u32 = field(&mut lines, "mps")?.parse().map_err(|_| bad("bad version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n: usize = field(&mut lines, "sites")?.parse().map_err(|_| bad("bad site count"))?;
        let max_bond: usize = field(&mut lines, "max_bond")?.parse().map_err(|_| bad("bad max_bond"))?;
        let center = match field(&mut lines, "center")?.as_str() {
            "none" => None,
            c => Some(c.parse().map_err(|_| bad("bad center"))?),
        };
        let mut sites = Vec::with_capacity(n);
        for k in 0..n {
            let header = field(&mut lines, "site")?;
            let dims: Vec<usize> = header
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad site header")))
                .collect::<Result<_>>()?;
            if dims.len() != 3 || dims[0] != k {
                return Err(bad(&format!("bad header for site {k}")));
            }
            let values = lines.next().ok_or_else(|| bad("missing site values"))?;
            let data: Vec<f64> = values
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad value")))
                .collect::<Result<_>>()?;
            sites.push(Site {
                left: dims[1],
                right: dims[2],
                data,
            });
        }
        Self::checked(sites, max_bond, center)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(self.n_sites() as u64).to_le_bytes())?;
        out.write_all(&(self.max_bond as u64).to_le_bytes())?;
        let center = self.center.map_or(-1i64, |c| c as i64);
        out.write_all(&center.to_le_bytes())?;
        for s in &self.sites {
            out.write_all(&(s.left as u64).to_le_bytes())?;
            out.write_all(&(s.right as u64).to_le_bytes())?;
            for x in &s.data {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let io = |e| Error::io("mps binary", e);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::parse("mps binary", "bad magic"));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4).map_err(io)?;
        if u32::from_le_bytes(b4) != FORMAT_VERSION {
            return Err(Error::parse("mps binary", "unsupported version"));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut b8).map_err(io)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = read_u64(&mut input)? as usize;
        let max_bond = read_u64(&mut input)? as usize;
        let center = read_u64(&mut input)? as i64;
        let mut sites = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let left = read_u64(&mut input)? as usize;
            let right = read_u64(&mut input)? as usize;
            let len = left
                .checked_mul(2 * right)
                .filter(|&l| l <= 1 << 24)
                .ok_or_else(|| Error::parse("mps binary", "site too large"))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_bits(read_u64(&mut input)?));
            }
            sites.push(Site { left, right, data });
        }
        Self::checked(sites, max_bond, (center >= 0).then_some(center as usize))
    }

    fn checked(sites: Vec<Site>, max_bond: usize, center: Option<usize>) -> Result<Self> {
        let bad = |m: String| Error::parse("mps", m);
        if sites.is_empty() {
            return Err(bad("no sites".into()));
        }
        if sites[0].left != 1 || sites[sites.len() - 1].right != 1 {
            return Err(bad("boundary bonds must be 1".into()));
        }
        for (k, s) in sites.iter().enumerate() {
            if s.data.len() != s.left * 2 * s.right {
                return Err(bad(format!("site {k} has the wrong number of values")));
            }
            if k + 1 < sites.len() && s.right != sites[k + 1].left {
                return Err(bad(format!("bond mismatch after site {k}")));
            }
        }
        if center.is_some_and(|c| c >= sites.len()) {
            return Err(bad("center out of range".into()));
        }
        Ok(Self {
            sites,
            max_bond,
            center,
        })
    }
}

struct Merged {
    left: usize,
    right: usize,
    data: Vec<f64>,
}

fn check_finite(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Mps(format!("training produced a non-finite loss ({loss})")))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for row in m.row_iter() {
        out.extend(row.iter());
    }
    out
}

/// Site of shape `(left, 2, right)` from a matrix whose row-major layout is
/// already `(left, 2, right)`.
fn site_from_rows(left: usize, right: usize, m: &DMatrix<f64>) -> Site {
    let data = row_major(m);
    debug_assert_eq!(data.len(), left * 2 * right);
    Site { left, right, data }
}

fn reshape_rows(m: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &row_major(m))
}
