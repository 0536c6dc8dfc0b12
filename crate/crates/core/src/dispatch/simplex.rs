//! Dense two-phase tableau simplex with Bland's rule.

use alloc::vec;
use alloc::vec::Vec;

pub const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `min costᵀx` subject to sparse rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub n: usize,
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (v, pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule iterations on the current objective row; columns at or
    /// beyond `allowed` never enter. Returns false when unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        loop {
            let Some(c) = (0..allowed).find(|&j| self.obj[j] < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((ratio, i)),
                        Some((br, bi)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((ratio, i))
                            } else {
                                Some((br, bi))
                            }
                        }
                    };
                }
            }
            match best {
                Some((_, r)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

impl LinearProgram {
    pub fn new(n: usize, cost: Vec<f64>) -> Self {
        LinearProgram {
            n,
            cost,
            rows: Vec::new(),
        }
    }

    pub fn add(&mut self, coef: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push((coef, cmp, rhs));
    }

    pub fn solve(&self) -> LpResult {
        let m = self.rows.len();
        let n = self.n;
        // orient rows so every right-hand side is non-negative
        let rows: Vec<(Vec<(usize, f64)>, Cmp, f64)> = self
            .rows
            .iter()
            .map(|(coef, cmp, rhs)| {
                if *rhs < 0.0 {
                    let flipped = match cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    };
                    (coef.iter().map(|&(j, a)| (j, -a)).collect(), flipped, -rhs)
                } else {
                    (coef.clone(), *cmp, *rhs)
                }
            })
            .collect();
        let slacks = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let arts = rows.iter().filter(|r| r.1 != Cmp::Le).count();
        let art_start = n + slacks;
        let width = art_start + arts + 1;
        let mut tab = Tableau {
            m,
            width,
            t: vec![0.0; m * width],
            obj: vec![0.0; width],
            basis: vec![0; m],
            pivots: 0,
        };
        let (mut s, mut a) = (n, art_start);
        for (i, (coef, cmp, rhs)) in rows.iter().enumerate() {
            for &(j, v) in coef {
                tab.t[i * width + j] += v;
            }
            tab.t[i * width + width - 1] = *rhs;
            match cmp {
                Cmp::Le => {
                    tab.t[i * width + s] = 1.0;
                    tab.basis[i] = s;
                    s += 1;
                }
                Cmp::Ge => {
                    tab.t[i * width + s] = -1.0;
                    s += 1;
                    tab.t[i * width + a] = 1.0;
                    tab.basis[i] = a;
                    a += 1;
                }
                Cmp::Eq => {
                    tab.t[i * width + a] = 1.0;
                    tab.basis[i] = a;
                    a += 1;
                }
            }
        }

        if arts > 0 {
            // phase 1: minimize the sum of artificials
            for i in 0..m {
                if tab.basis[i] >= art_start {
                    for j in 0..width {
                        if j < art_start || j == width - 1 {
                            tab.obj[j] -= tab.t[i * width + j];
                        }
                    }
                }
            }
            tab.run(art_start);
            if -tab.obj[width - 1] > FEAS_TOL * (1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max)) {
                return LpResult::Infeasible;
            }
            for i in 0..m {
                if tab.basis[i] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| tab.at(i, j).abs() > PIVOT_TOL) {
                        tab.pivot(i, j);
                    }
                }
            }
        }

        // phase 2
        tab.obj = vec![0.0; width];
        tab.obj[..n].copy_from_slice(&self.cost);
        for i in 0..m {
            let cb = if tab.basis[i] < n { self.cost[tab.basis[i]] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..width {
                    tab.obj[j] -= cb * tab.t[i * width + j];
                }
            }
        }
        if !tab.run(art_start) {
            return LpResult::Unbounded;
        }
        let mut x = vec![0.0; n];
        for i in 0..m {
            if tab.basis[i] < n {
                x[tab.basis[i]] = tab.rhs(i).max(0.0);
            }
        }
        let value = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        LpResult::Optimal { x, value }
    }
}
