//! Small dense two-phase simplex with Bland's rule.
//!
//! Solves `min c·x` subject to row constraints and `x ≥ 0`. Meant for the
//! handful of variables the verification oracle needs, not for speed.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

struct Tableau {
    // rows × (cols + 1); last column is the right-hand side
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimises `cost` over the current basis; `allowed[j]` marks columns
    /// that may enter. Returns false if unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            // reduced costs
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(r, &b)| cost[b] * self.a[r][j])
                    .sum();
                cost[j] - z < -EPS
            });
            let Some(col) = entering else { return true };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][col];
                if coef > EPS {
                    let ratio = self.a[r][rhs] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - EPS
                                || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return false,
            }
        }
    }
}

pub fn minimize(c: &[f64], rows: &[(Vec<f64>, Cmp, f64)]) -> LpOutcome {
    let n = c.len();
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
    let cols = n + slack_count + m;
    let art0 = n + slack_count;

    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut slack = n;
    for (r, (coef, cmp, rhs)) in rows.iter().enumerate() {
        assert_eq!(coef.len(), n);
        let flip = *rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for j in 0..n {
            a[r][j] = sign * coef[j];
        }
        a[r][cols] = sign * rhs;
        let cmp = match (cmp, flip) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (c, _) => *c,
        };
        match cmp {
            Cmp::Le => {
                a[r][slack] = 1.0;
                basis[r] = slack;
                slack += 1;
            }
            Cmp::Ge => {
                a[r][slack] = -1.0;
                slack += 1;
                a[r][art0 + r] = 1.0;
                basis[r] = art0 + r;
            }
            Cmp::Eq => {
                a[r][art0 + r] = 1.0;
                basis[r] = art0 + r;
            }
        }
    }
    let mut t = Tableau { a, basis, cols };

    // phase 1
    let mut phase1 = vec![0.0; cols];
    for v in phase1.iter_mut().skip(art0) {
        *v = 1.0;
    }
    let everything = vec![true; cols];
    t.optimise(&phase1, &everything);
    let infeasibility: f64 = t
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= art0)
        .map(|(r, _)| t.a[r][cols])
        .sum();
    if infeasibility > 1e-7 {
        return LpOutcome::Infeasible;
    }
    // drive remaining zero-level artificials out of the basis
    let mut r = 0;
    while r < t.a.len() {
        if t.basis[r] >= art0 {
            match (0..art0).find(|&j| t.a[r][j].abs() > EPS && !t.basis.contains(&j)) {
                Some(j) => t.pivot(r, j),
                None => {
                    t.a.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    if !t.optimise(&cost, &allowed) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.a[r][cols];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}
