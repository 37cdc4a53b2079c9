#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stlid_milp::{MilpModel, Sense, VarId, VarKind};

/// Dense LP `min c·x` over a bounded box with rows `(a, sense, rhs)`.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[i][k] -= f * a[col][k];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

impl DenseLp {
    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        for j in 0..x.len() {
            if x[j] < self.lo[j] - tol || x[j] > self.hi[j] + tol {
                return false;
            }
        }
        self.rows.iter().all(|(a, s, r)| {
            let act: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            match s {
                Sense::Le => act <= r + tol,
                Sense::Ge => act >= r - tol,
                Sense::Eq => (act - r).abs() <= tol,
            }
        })
    }

    /// Optimum by enumerating every vertex of the bounded polytope.
    pub fn vertex_optimum(&self) -> Option<(f64, Vec<f64>)> {
        let n = self.c.len();
        if n == 0 {
            return if self.feasible(&[], 1e-9) { Some((0.0, vec![])) } else { None };
        }
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), self.lo[j]));
            planes.push((e, self.hi[j]));
        }
        for (a, _, r) in &self.rows {
            planes.push((a.clone(), *r));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for combo in combinations(planes.len(), n) {
            let a: Vec<Vec<f64>> = combo.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = combo.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                if self.feasible(&x, 1e-9) {
                    let v: f64 = self.c.iter().zip(&x).map(|(p, q)| p * q).sum();
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, x));
                    }
                }
            }
        }
        best
    }

    pub fn to_model(&self) -> (MilpModel, Vec<VarId>) {
        let mut m = MilpModel::new();
        let vars: Vec<VarId> = (0..self.c.len())
            .map(|j| m.add_continuous(format!("x{j}"), self.lo[j], self.hi[j]))
            .collect();
        for (i, (a, s, r)) in self.rows.iter().enumerate() {
            m.add_constraint(format!("r{i}"), vars.iter().copied().zip(a.iter().copied()), *s, *r);
        }
        m.set_objective(vars.iter().copied().zip(self.c.iter().copied()), 0.0);
        (m, vars)
    }
}

fn small(rng: &mut ChaCha8Rng) -> f64 {
    // Integers and halves keep the vertex oracle well conditioned.
    (rng.gen_range(-8..=8) as f64) * 0.5
}

pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseLp {
    let c = (0..n).map(|_| small(rng)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-4..=0) as f64).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(1..=6) as f64).collect();
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.7) { small(rng) } else { 0.0 }).collect();
            let sense = match rng.gen_range(0..10) {
                0 => Sense::Eq,
                1..=4 => Sense::Le,
                _ => Sense::Ge,
            };
            (a, sense, small(rng))
        })
        .collect();
    DenseLp { c, lo, hi, rows }
}

/// Random model: `nb` binaries followed by `nc` continuous variables.
#[derive(Debug)]
pub struct Case {
    pub nb: usize,
    pub lp: DenseLp,
}

pub fn random_case(rng: &mut ChaCha8Rng, nb: usize, nc: usize, m: usize) -> Case {
    let n = nb + nc;
    let half = |rng: &mut ChaCha8Rng| (rng.gen_range(-8..=8) as f64) * 0.5;
    let c = (0..n).map(|_| half(rng)).collect();
    let mut lo = vec![0.0; n];
    let mut hi = vec![1.0; n];
    for j in nb..n {
        lo[j] = -3.0;
        hi[j] = 3.0;
    }
    let rows = (0..m)
        .map(|_| {
            let mut a: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { half(rng) } else { 0.0 }).collect();
            // Occasional big-M style coefficient on a binary.
            if rng.gen_bool(0.3) {
                a[rng.gen_range(0..nb)] = if rng.gen_bool(0.5) { 20.0 } else { -20.0 };
            }
            let sense = match rng.gen_range(0..8) {
                0 => Sense::Eq,
                1..=3 => Sense::Le,
                _ => Sense::Ge,
            };
            (a, sense, half(rng))
        })
        .collect();
    Case {
        nb,
        lp: DenseLp { c, lo, hi, rows },
    }
}

impl Case {
    pub fn model(&self) -> MilpModel {
        let (mut m, vars) = self.lp.to_model();
        for &v in &vars[..self.nb] {
            m.set_kind(v, VarKind::Binary);
        }
        m
    }

    /// Enumerates binary assignments; the continuous part goes to the vertex oracle.
    pub fn brute_force(&self) -> Option<f64> {
        let nb = self.nb;
        let n = self.lp.c.len();
        let mut best: Option<f64> = None;
        for mask in 0..(1u32 << nb) {
            let z: Vec<f64> = (0..nb).map(|k| ((mask >> k) & 1) as f64).collect();
            let fixed: f64 = z.iter().zip(&self.lp.c).map(|(a, b)| a * b).sum();
            let rows = self
                .lp
                .rows
                .iter()
                .map(|(a, s, r)| {
                    let shift: f64 = a[..nb].iter().zip(&z).map(|(p, q)| p * q).sum();
                    (a[nb..].to_vec(), *s, r - shift)
                })
                .collect();
            let sub = DenseLp {
                c: self.lp.c[nb..].to_vec(),
                lo: self.lp.lo[nb..n].to_vec(),
                hi: self.lp.hi[nb..n].to_vec(),
                rows,
            };
            if let Some((v, _)) = sub.vertex_optimum() {
                let total = v + fixed;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        best
    }
}

