//! Independent reference implementations used as test oracles. They share no
//! code with the library beyond plain data types.

#![allow(dead_code, clippy::needless_range_loop)]

use bytefuse::{iou, BBox, Detection};

/// Costs in units of 1/64 so sums are exact in f64.
pub const COST_UNIT: f64 = 1.0 / 64.0;

/// Exact gated matching value, used to compare objectives without rounding.
/// `gate_num / gate_den` is the gate; costs are `n * COST_UNIT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Objective(pub i64);

pub fn objective(pairs: usize, cost_units: i64, gate_num: i64, gate_den: i64) -> Objective {
    // Σ (gate - c) scaled by 64·gate_den.
    Objective(pairs as i64 * 64 * gate_num - cost_units * gate_den)
}

/// Exhaustive optimum of `max Σ(gate - c)` over partial injections using only
/// entries with `c <= gate`. Returns the optimal objective and every total cost
/// (in cost units) attained by an optimal matching.
pub fn brute_force_assignment(
    cost_units: &[Vec<i64>],
    cols: usize,
    gate_num: i64,
    gate_den: i64,
) -> (Objective, Vec<i64>) {
    fn rec(
        r: usize,
        cost: &[Vec<i64>],
        used: &mut Vec<bool>,
        pairs: usize,
        total: i64,
        g: (i64, i64),
        best: &mut (Objective, Vec<i64>),
    ) {
        if r == cost.len() {
            let obj = objective(pairs, total, g.0, g.1);
            if obj > best.0 {
                *best = (obj, vec![total]);
            } else if obj == best.0 && !best.1.contains(&total) {
                best.1.push(total);
            }
            return;
        }
        rec(r + 1, cost, used, pairs, total, g, best);
        for c in 0..used.len() {
            // c <= gate  ⇔  n/64 <= num/den  ⇔  n·den <= 64·num
            if !used[c] && cost[r][c] * g.1 <= 64 * g.0 {
                used[c] = true;
                rec(r + 1, cost, used, pairs + 1, total + cost[r][c], g, best);
                used[c] = false;
            }
        }
    }
    let mut used = vec![false; cols];
    let mut best = (Objective(i64::MIN), Vec::new());
    rec(0, cost_units, &mut used, 0, 0, (gate_num, gate_den), &mut best);
    best
}

/// Score-then-index order used by the greedy suppression.
pub fn greedy_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Exhaustive NMS oracle: among all subsets whose pairs overlap by at most
/// `threshold`, the lexicographically greatest indicator vector in score order.
/// Returns kept input indices in score order.
pub fn brute_force_nms(dets: &[Detection], threshold: f64) -> Vec<usize> {
    let order = greedy_order(dets);
    let n = dets.len();
    assert!(n <= 16);
    let mut best: Option<Vec<bool>> = None;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).map(|k| order[k]).collect();
        let valid = chosen.iter().enumerate().all(|(i, &a)| {
            chosen[i + 1..]
                .iter()
                .all(|&b| iou(&dets[a].bbox, &dets[b].bbox) <= threshold)
        });
        if !valid {
            continue;
        }
        let indicator: Vec<bool> = (0..n).map(|k| mask & (1 << k) != 0).collect();
        if best.as_ref().is_none_or(|b| indicator > *b) {
            best = Some(indicator);
        }
    }
    let best = best.unwrap_or_default();
    (0..n).filter(|&k| best[k]).map(|k| order[k]).collect()
}

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, p);
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut t = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Mat = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 0.0, "singular system");
        for row in 0..n {
            if row != col {
                let f = aug[row][col] / p;
                if f != 0.0 {
                    for k in col..n + m {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..m).map(|j| aug[i][n + j] / aug[i][i]).collect())
        .collect()
}

/// A plain dense constant-velocity filter over `(cx, cy, a, h, v…)` with the
/// same noise conventions, written without the library's linear algebra.
#[derive(Debug, Clone)]
pub struct RefFilter {
    pub mean: Vec<f64>,
    pub cov: Mat,
}

const WP: f64 = 1.0 / 20.0;
const WV: f64 = 1.0 / 160.0;

fn diag(v: &[f64]) -> Mat {
    let mut m = zeros(v.len(), v.len());
    for (i, x) in v.iter().enumerate() {
        m[i][i] = *x;
    }
    m
}

pub fn meas(b: &BBox) -> Vec<f64> {
    vec![b.x + b.w / 2.0, b.y + b.h / 2.0, b.w / b.h, b.h]
}

impl RefFilter {
    pub fn init(b: &BBox) -> Self {
        let z = meas(b);
        let h = z[3];
        let sd = [2.0 * WP * h, 2.0 * WP * h, 1e-2, 2.0 * WP * h, 10.0 * WV * h, 10.0 * WV * h, 1e-5, 10.0 * WV * h];
        let mut mean = z;
        mean.extend([0.0; 4]);
        Self {
            mean,
            cov: diag(&sd.map(|s| s * s)),
        }
    }

    fn f() -> Mat {
        let mut f = diag(&[1.0; 8]);
        for i in 0..4 {
            f[i][i + 4] = 1.0;
        }
        f
    }

    pub fn predict(&mut self) {
        let h = self.mean[3];
        let f = Self::f();
        let sd = [WP * h, WP * h, 1e-2, WP * h, WV * h, WV * h, 1e-5, WV * h];
        let m = matmul(&f, &self.mean.iter().map(|v| vec![*v]).collect());
        self.mean = m.into_iter().map(|r| r[0]).collect();
        self.cov = add(&matmul(&matmul(&f, &self.cov), &transpose(&f)), &diag(&sd.map(|s| s * s)));
    }

    /// Update with measurement noise `scale · R`.
    pub fn update(&mut self, b: &BBox, scale: f64) {
        let h = self.mean[3];
        let sd = [WP * h, WP * h, 1e-1, WP * h];
        let r = diag(&sd.map(|s| s * s * scale));
        let hm: Mat = (0..4).map(|i| (0..8).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let ph_t = matmul(&self.cov, &transpose(&hm));
        let s = add(&matmul(&hm, &ph_t), &r);
        // K = P Hᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ H P (S symmetric)
        let k = transpose(&solve(&s, &transpose(&ph_t)));
        let z = meas(b);
        let innov: Vec<f64> = (0..4).map(|i| z[i] - self.mean[i]).collect();
        for i in 0..8 {
            self.mean[i] += (0..4).map(|j| k[i][j] * innov[j]).sum::<f64>();
        }
        let mut i_kh = diag(&[1.0; 8]);
        for i in 0..8 {
            for j in 0..4 {
                i_kh[i][j] -= k[i][j];
            }
        }
        self.cov = add(
            &matmul(&matmul(&i_kh, &self.cov), &transpose(&i_kh)),
            &matmul(&matmul(&k, &r), &transpose(&k)),
        );
    }
}

/// Posterior mean of GP regression with a least-squares linear prior mean,
/// unit RBF kernel and noise variance `noise`, solved densely.
pub fn gp_oracle(t: &[f64], y: &[f64], length_scale: f64, noise: f64) -> Vec<f64> {
    let n = t.len();
    // Linear trend via the 2×2 normal equations.
    let st: f64 = t.iter().sum();
    let stt: f64 = t.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| a * b).sum();
    let nf = n as f64;
    let det = nf * stt - st * st;
    let (b0, b1) = if det.abs() > 1e-12 {
        ((stt * sy - st * sty) / det, (nf * sty - st * sy) / det)
    } else {
        (sy / nf, 0.0)
    };
    let trend: Vec<f64> = t.iter().map(|v| b0 + b1 * v).collect();
    let k: Mat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (-(t[i] - t[j]).powi(2) / (2.0 * length_scale * length_scale)).exp())
                .collect()
        })
        .collect();
    let mut ky = k.clone();
    for (i, row) in ky.iter_mut().enumerate() {
        row[i] += noise;
    }
    let resid: Mat = y.iter().zip(&trend).map(|(a, b)| vec![a - b]).collect();
    let alpha = solve(&ky, &resid);
    let fit = matmul(&k, &alpha);
    (0..n).map(|i| trend[i] + fit[i][0]).collect()
}
