use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::ParameterSpace;
use crate::linalg;

/// Linear constraints `re θ = r_e` and `ro θ > r_o` of one hypothesis.
#[derive(Debug, Clone)]
pub struct ConstraintMatrices {
    pub re: DMatrix<f64>,
    pub r_e: DVector<f64>,
    pub ro: DMatrix<f64>,
    pub r_o: DVector<f64>,
    /// The hypothesis as the user wrote it, whitespace collapsed.
    pub source: String,
}

impl PartialEq for ConstraintMatrices {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re && self.r_e == other.r_e && self.ro == other.ro && self.r_o == other.r_o
    }
}

impl ConstraintMatrices {
    /// A hypothesis with no constraints over `p` parameters.
    pub fn unconstrained(p: usize) -> Self {
        ConstraintMatrices {
            re: DMatrix::zeros(0, p),
            r_e: DVector::zeros(0),
            ro: DMatrix::zeros(0, p),
            r_o: DVector::zeros(0),
            source: String::new(),
        }
    }

    pub fn from_rows(p: usize, eq: &[(Vec<f64>, f64)], ord: &[(Vec<f64>, f64)]) -> Self {
        let build = |rows: &[(Vec<f64>, f64)]| {
            let m = DMatrix::from_fn(rows.len(), p, |i, j| rows[i].0[j]);
            let v = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            (m, v)
        };
        let (re, r_e) = build(eq);
        let (ro, r_o) = build(ord);
        ConstraintMatrices { re, r_e, ro, r_o, source: String::new() }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn n_params(&self) -> usize {
        self.re.ncols()
    }

    pub fn n_equalities(&self) -> usize {
        self.re.nrows()
    }

    pub fn n_orders(&self) -> usize {
        self.ro.nrows()
    }

    pub fn is_order_only(&self) -> bool {
        self.n_equalities() == 0 && self.n_orders() > 0
    }

    /// `[re; ro]`.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_params();
        (linalg::vstack(&[&self.re, &self.ro], p), linalg::vstack_vec(&[&self.r_e, &self.r_o]))
    }

    /// Rank of the stacked constraint rows.
    pub fn rank(&self) -> usize {
        linalg::rank(&self.stacked().0)
    }

    /// Whether `theta` satisfies every constraint, equalities within `tol`.
    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        let e = &self.re * theta - &self.r_e;
        let o = &self.ro * theta - &self.r_o;
        e.iter().all(|v| v.abs() <= tol) && o.iter().all(|v| *v > 0.0)
    }

    /// Parameter indices with a nonzero coefficient in some row.
    pub fn involved_params(&self) -> Vec<usize> {
        (0..self.n_params())
            .filter(|&j| self.re.column(j).iter().any(|v| *v != 0.0) || self.ro.column(j).iter().any(|v| *v != 0.0))
            .collect()
    }

    /// Keeps only the columns `cols`, in that order.
    pub fn restrict(&self, cols: &[usize]) -> Self {
        ConstraintMatrices {
            re: linalg::select_cols(&self.re, cols),
            r_e: self.r_e.clone(),
            ro: linalg::select_cols(&self.ro, cols),
            r_o: self.r_o.clone(),
            source: self.source.clone(),
        }
    }

    /// Renders the constraints in the hypothesis grammar, one row per
    /// `&`-separated constraint.
    pub fn pretty(&self, space: &ParameterSpace) -> String {
        let mut parts = Vec::new();
        for i in 0..self.re.nrows() {
            parts.push(format_row(self.re.row(i).iter().copied(), space, "=", self.r_e[i]));
        }
        for i in 0..self.ro.nrows() {
            parts.push(format_row(self.ro.row(i).iter().copied(), space, ">", self.r_o[i]));
        }
        parts.join(" & ")
    }
}

fn format_row(coefs: impl Iterator<Item = f64>, space: &ParameterSpace, op: &str, rhs: f64) -> String {
    let mut s = String::new();
    for (j, c) in coefs.enumerate() {
        if c == 0.0 {
            continue;
        }
        let name = space.name(j);
        let mag = c.abs();
        if s.is_empty() {
            if c < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if c < 0.0 { " - " } else { " + " });
        }
        if mag == 1.0 {
            s.push_str(name);
        } else {
            let _ = write!(s, "{mag}*{name}");
        }
    }
    let _ = write!(s, " {op} {rhs}");
    s
}
