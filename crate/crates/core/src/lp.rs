//! Dense two-phase simplex for small linear programs over `x >= 0`.
//!
//! Problems here have a few hundred rows and at most a few dozen structural
//! variables, so a full tableau is cheap and keeps the dual information needed
//! for infeasibility certificates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c.x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        iterations: usize,
    },
    /// `certificate` is a Farkas vector `z` for the original rows: `z_i >= 0` on
    /// `<=` rows, `z_i <= 0` on `>=` rows, `z^T A >= 0` and `z^T b < 0`.
    Infeasible {
        certificate: Vec<f64>,
        iterations: usize,
    },
    Unbounded {
        iterations: usize,
    },
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width mismatch");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run()
    }
}

/// Independent check of a Farkas certificate against the raw problem data.
pub fn verify_farkas(lp: &LinearProgram, z: &[f64], tol: f64) -> bool {
    if z.len() != lp.constraints.len() {
        return false;
    }
    let scale = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return false;
    }
    let signs_ok = lp.constraints.iter().zip(z).all(|(c, &zi)| match c.relation {
        Relation::Le => zi >= -tol * scale,
        Relation::Ge => zi <= tol * scale,
        Relation::Eq => true,
    });
    if !signs_ok {
        return false;
    }
    let columns_ok = (0..lp.num_vars()).all(|j| {
        let s: f64 = lp.constraints.iter().zip(z).map(|(c, &zi)| zi * c.coeffs[j]).sum();
        s >= -tol * scale
    });
    let zb: f64 = lp.constraints.iter().zip(z).map(|(c, &zi)| zi * c.rhs).sum();
    columns_ok && zb < -tol * scale
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_struct: usize,
    /// Column holding the identity in row `i` at the start (slack or artificial).
    initial_col: Vec<usize>,
    artificial_from: usize,
    /// `+1` or `-1`: the sign applied to make each rhs nonnegative.
    flip: Vec<f64>,
    objective: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars();
        let n_slack = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let mut flip = Vec::with_capacity(m);
        let mut relations = Vec::with_capacity(m);
        for c in &lp.constraints {
            let f = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            let rel = match (c.relation, f < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            flip.push(f);
            relations.push(rel);
        }
        let n_art = relations.iter().filter(|&&r| r != Relation::Le).count();
        let artificial_from = n + n_slack;
        let width = artificial_from + n_art + 1;

        let mut rows = vec![vec![0.0; width]; m + 1];
        let mut basis = vec![0; m];
        let mut initial_col = vec![0; m];
        let mut slack = n;
        let mut art = artificial_from;
        for (i, c) in lp.constraints.iter().enumerate() {
            let f = flip[i];
            for (j, &a) in c.coeffs.iter().enumerate() {
                rows[i][j] = f * a;
            }
            rows[i][width - 1] = f * c.rhs;
            match relations[i] {
                Relation::Le => {
                    rows[i][slack] = 1.0;
                    basis[i] = slack;
                    initial_col[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    rows[i][slack] = -1.0;
                    slack += 1;
                    rows[i][art] = 1.0;
                    basis[i] = art;
                    initial_col[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    rows[i][art] = 1.0;
                    basis[i] = art;
                    initial_col[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            rows,
            basis,
            n_struct: n,
            initial_col,
            artificial_from,
            flip,
            objective: lp.objective.clone(),
            iterations: 0,
            max_iterations: 50 * (m + width) + 1000,
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn width(&self) -> usize {
        self.rows[0].len()
    }

    /// Loads a cost vector over all columns into the objective row as reduced costs.
    fn set_costs(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.width();
        let mut obj = vec![0.0; w];
        obj[..cost.len()].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, r) in obj.iter_mut().zip(&self.rows[i]) {
                    *o -= cb * r;
                }
            }
        }
        self.rows[m] = obj;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex pivots over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let m = self.m();
        let rhs = self.width() - 1;
        let mut streak = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::LpNumericalFailure {
                    iterations: self.iterations,
                });
            }
            let obj = &self.rows[m];
            let entering = if streak < DEGENERATE_STREAK {
                (0..allowed)
                    .filter(|&j| obj[j] < -COST_TOL)
                    .min_by(|&a, &b| obj[a].total_cmp(&obj[b]))
            } else {
                (0..allowed).find(|&j| obj[j] < -COST_TOL)
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rows[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            streak = if ratio.abs() <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c);
            self.iterations += 1;
        }
    }

    fn run(mut self) -> Result<LpOutcome> {
        let m = self.m();
        let w = self.width();
        let rhs = w - 1;
        let n_total = w - 1;

        if self.artificial_from < n_total {
            let mut phase1 = vec![0.0; n_total];
            for c in phase1.iter_mut().skip(self.artificial_from) {
                *c = 1.0;
            }
            self.set_costs(&phase1);
            self.optimize(n_total)?;
            let infeasibility = -self.rows[m][rhs];
            let bscale = (0..m).fold(1.0f64, |s, i| s.max(self.rows[i][rhs].abs()));
            if infeasibility > 1e-9 * bscale {
                // y_i = c_init - reduced cost of the initial identity column.
                let certificate = (0..m)
                    .map(|i| {
                        let col = self.initial_col[i];
                        let y = phase1[col] - self.rows[m][col];
                        -self.flip[i] * y
                    })
                    .collect();
                return Ok(LpOutcome::Infeasible {
                    certificate,
                    iterations: self.iterations,
                });
            }
            self.evict_artificials();
        }

        let mut phase2 = vec![0.0; n_total];
        phase2[..self.n_struct].copy_from_slice(&self.objective);
        self.set_costs(&phase2);
        if !self.optimize(self.artificial_from)? {
            return Ok(LpOutcome::Unbounded {
                iterations: self.iterations,
            });
        }
        let mut x = vec![0.0; self.n_struct];
        for i in 0..m {
            if self.basis[i] < self.n_struct {
                x[self.basis[i]] = self.rows[i][rhs].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal {
            x,
            objective,
            iterations: self.iterations,
        })
    }

    /// Pivots zero-level artificials out of the basis where possible; rows
    /// where that fails are redundant and stay inert.
    fn evict_artificials(&mut self) {
        for i in 0..self.m() {
            if self.basis[i] < self.artificial_from {
                continue;
            }
            let col = (0..self.artificial_from)
                .filter(|&j| self.rows[i][j].abs() > PIVOT_TOL)
                .max_by(|&a, &b| self.rows[i][a].abs().total_cmp(&self.rows[i][b].abs()));
            if let Some(c) = col {
                self.pivot(i, c);
                self.iterations += 1;
            }
        }
    }
}
