//! Linear programs behind the time-allocation problems.
//!
//! Both the intra-cluster time allocation and the time step of the
//! inter-cluster alternation have the same shape: minimise `Σ c_j t_j`
//! subject to `0 ≤ t_j ≤ cap_j` and `Σ t_j ≤ budget`. [`BudgetedBoxLp`]
//! solves it greedily and, as an independent route, through the general
//! dense simplex in [`DenseLp`].

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// `minimize c·x  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0` (the origin is feasible).
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub costs: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl DenseLp {
    /// Tableau simplex with Bland's rule. Returns the primal solution.
    pub fn minimize(&self) -> Result<Vec<f64>> {
        let n = self.costs.len();
        let m = self.rows.len();
        if self.rhs.len() != m || self.rows.iter().any(|r| r.len() != n) {
            return Err(Error::NumericalFailure("inconsistent LP dimensions".into()));
        }
        if self.rhs.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::NumericalFailure(
                "right-hand side must be non-negative".into(),
            ));
        }
        let width = n + m + 1;
        let mut tab = vec![vec![0.0; width]; m + 1];
        for (i, row) in self.rows.iter().enumerate() {
            tab[i][..n].copy_from_slice(row);
            tab[i][n + i] = 1.0;
            tab[i][width - 1] = self.rhs[i];
        }
        tab[m][..n].copy_from_slice(&self.costs);
        let mut basis: Vec<usize> = (n..n + m).collect();

        let max_pivots = 50 * (n + m + 1);
        for _ in 0..max_pivots {
            let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -PIVOT_EPS) else {
                let mut x = vec![0.0; n];
                for (i, &b) in basis.iter().enumerate() {
                    if b < n {
                        x[b] = tab[i][width - 1];
                    }
                }
                return Ok(x);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = tab[i][enter];
                if a > PIVOT_EPS {
                    let ratio = tab[i][width - 1] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr || (ratio == lr && basis[i] < basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::NumericalFailure("LP is unbounded".into()));
            };
            pivot(&mut tab, row, enter);
            basis[row] = enter;
        }
        Err(Error::NumericalFailure(
            "simplex pivot limit reached".into(),
        ))
    }
}

fn pivot(tab: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
}

/// Separable LP with box caps and one shared budget row.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedBoxLp {
    pub coefficients: Vec<f64>,
    pub caps: Vec<f64>,
    pub budget: f64,
}

impl BudgetedBoxLp {
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(c, t)| c * t).sum()
    }

    /// Fill the budget in ascending coefficient order while coefficients are
    /// negative; ties by index.
    pub fn solve_greedy(&self) -> Vec<f64> {
        let mut order: Vec<usize> = (0..self.coefficients.len()).collect();
        order.sort_by(|&a, &b| {
            self.coefficients[a]
                .total_cmp(&self.coefficients[b])
                .then(a.cmp(&b))
        });
        let mut x = vec![0.0; self.coefficients.len()];
        let mut left = self.budget.max(0.0);
        for j in order {
            if self.coefficients[j] >= 0.0 || left <= 0.0 {
                break;
            }
            let t = self.caps[j].max(0.0).min(left);
            x[j] = t;
            left -= t;
        }
        x
    }

    pub fn to_dense(&self) -> DenseLp {
        let n = self.coefficients.len();
        let mut rows = Vec::with_capacity(n + 1);
        let mut rhs = Vec::with_capacity(n + 1);
        for (j, &cap) in self.caps.iter().enumerate() {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push(r);
            rhs.push(cap.max(0.0));
        }
        rows.push(vec![1.0; n]);
        rhs.push(self.budget.max(0.0));
        DenseLp {
            costs: self.coefficients.clone(),
            rows,
            rhs,
        }
    }

    pub fn solve_simplex(&self) -> Result<Vec<f64>> {
        let mut x = self.to_dense().minimize()?;
        for v in &mut x {
            *v = v.max(0.0);
        }
        Ok(x)
    }
}

/// Progressive equal sharing of `budget`: every entry receives the same
/// level, clipped to its cap, with the level raised until the budget or all
/// caps are used up.
pub fn equal_fill(caps: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0.0).collect();
    order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]));
    let mut level = f64::INFINITY;
    let mut left = budget.max(0.0);
    for (k, &i) in order.iter().enumerate() {
        let share = left / (order.len() - k) as f64;
        if caps[i] > share {
            level = share;
            break;
        }
        left -= caps[i];
    }
    caps.iter().map(|&c| c.max(0.0).min(level)).collect()
}
