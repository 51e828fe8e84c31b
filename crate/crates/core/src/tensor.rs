//! Dense complex operators over labeled tensor-product spaces.
//!
//! An [`Operator`] carries an ordered layout of [`SpaceLabel`]s. The layout
//! fixes the computational-basis ordering: basis index `i` of a layout with
//! dimensions `d_1, ..., d_n` is `((i_1 * d_2 + i_2) * d_3 + i_3) ...`, i.e.
//! the first label is the most significant digit. Every transpose is taken in
//! this basis.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest total dimension an operator may have.
pub const MAX_DIM: usize = 1 << 12;

/// Default tolerance for Hermiticity and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    Input,
    Output,
    /// Plain spatial subsystem without a temporal role.
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceLabel {
    pub party: String,
    pub port: Port,
    pub dim: usize,
}

impl SpaceLabel {
    pub fn new(party: impl Into<String>, port: Port, dim: usize) -> Self {
        assert!(dim >= 1, "space dimension must be positive");
        SpaceLabel {
            party: party.into(),
            port,
            dim,
        }
    }

    pub fn input(party: impl Into<String>, dim: usize) -> Self {
        Self::new(party, Port::Input, dim)
    }

    pub fn output(party: impl Into<String>, dim: usize) -> Self {
        Self::new(party, Port::Output, dim)
    }

    pub fn plain(party: impl Into<String>, dim: usize) -> Self {
        Self::new(party, Port::None, dim)
    }

    /// Labels are identified by (party, port); the dimension is a property.
    pub fn same_space(&self, other: &SpaceLabel) -> bool {
        self.party == other.party && self.port == other.port
    }
}

impl fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.port {
            Port::Input => "_I",
            Port::Output => "_O",
            Port::None => "",
        };
        write!(f, "{}{}[{}]", self.party, suffix, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    layout: Vec<SpaceLabel>,
    matrix: CMatrix,
}

fn product_dim(layout: &[SpaceLabel]) -> usize {
    layout.iter().map(|l| l.dim).product()
}

/// Row-major strides of a layout (last label has stride 1).
fn strides(layout: &[SpaceLabel]) -> Vec<usize> {
    let mut s = vec![1; layout.len()];
    for k in (0..layout.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * layout[k + 1].dim;
    }
    s
}

/// All offsets `sum_k digit_k * stride_k` for the selected positions, in
/// row-major order over those positions.
fn offsets(layout: &[SpaceLabel], strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * layout[p].dim);
        for &o in &out {
            for digit in 0..layout[p].dim {
                next.push(o + digit * strides[p]);
            }
        }
        out = next;
    }
    out
}

fn check_unique(layout: &[SpaceLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in layout {
        if !seen.insert((l.party.as_str(), l.port)) {
            return Err(Error::LayoutConflict(l.clone()));
        }
    }
    Ok(())
}

impl Operator {
    pub fn new(layout: Vec<SpaceLabel>, matrix: CMatrix) -> Result<Self> {
        check_unique(&layout)?;
        let d = product_dim(&layout);
        if d > MAX_DIM {
            return Err(Error::TooLarge(d));
        }
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Operator { layout, matrix })
    }

    pub fn identity(layout: Vec<SpaceLabel>) -> Result<Self> {
        let d = product_dim(&layout);
        Self::new(layout, CMatrix::identity(d, d))
    }

    /// 1x1 operator on the empty layout.
    pub fn scalar(value: C64) -> Self {
        Operator {
            layout: Vec::new(),
            matrix: CMatrix::from_element(1, 1, value),
        }
    }

    /// The rank-one operator `|psi><psi|`.
    pub fn from_ket(layout: Vec<SpaceLabel>, ket: &[C64]) -> Result<Self> {
        let d = product_dim(&layout);
        if ket.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: ket.len(),
            });
        }
        let v = nalgebra::DVector::from_column_slice(ket);
        Self::new(layout, &v * v.adjoint())
    }

    pub fn from_real_diagonal(layout: Vec<SpaceLabel>, diag: &[f64]) -> Result<Self> {
        let d = product_dim(&layout);
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: diag.len(),
            });
        }
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            diag.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(layout, m)
    }

    pub fn layout(&self) -> &[SpaceLabel] {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn position(&self, label: &SpaceLabel) -> Option<usize> {
        self.layout.iter().position(|l| l.same_space(label))
    }

    fn positions_of(&self, labels: &[SpaceLabel]) -> Result<Vec<usize>> {
        let mut pos = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l).ok_or_else(|| Error::UnknownLabel(l.clone()))?;
            if self.layout[p].dim != l.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.layout[p].dim,
                    found: l.dim,
                });
            }
            if !pos.contains(&p) {
                pos.push(p);
            }
        }
        Ok(pos)
    }

    /// Kronecker product; the result layout is `self.layout ++ other.layout`.
    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        for l in &other.layout {
            if self.position(l).is_some() {
                return Err(Error::LayoutConflict(l.clone()));
            }
        }
        let mut layout = self.layout.clone();
        layout.extend(other.layout.iter().cloned());
        Operator::new(layout, self.matrix.kronecker(&other.matrix))
    }

    /// Traces out `discard`; the remaining labels keep their relative order.
    pub fn partial_trace(&self, discard: &[SpaceLabel]) -> Result<Operator> {
        let gone = self.positions_of(discard)?;
        let kept: Vec<usize> = (0..self.layout.len()).filter(|p| !gone.contains(p)).collect();
        let st = strides(&self.layout);
        let kept_off = offsets(&self.layout, &st, &kept);
        let gone_off = offsets(&self.layout, &st, &gone);
        let n = kept_off.len();
        let m = CMatrix::from_fn(n, n, |r, c| {
            let (r0, c0) = (kept_off[r], kept_off[c]);
            gone_off
                .iter()
                .map(|&t| self.matrix[(r0 + t, c0 + t)])
                .sum()
        });
        let layout = kept.iter().map(|&p| self.layout[p].clone()).collect();
        Operator::new(layout, m)
    }

    /// Partial transpose of the targeted factors in the computational basis.
    pub fn transpose_subsystem(&self, targets: &[SpaceLabel]) -> Result<Operator> {
        let tpos = self.positions_of(targets)?;
        let st = strides(&self.layout);
        let d = self.dim();
        // Split every basis index into its targeted and remaining parts.
        let mut tpart = vec![0usize; d];
        for (i, slot) in tpart.iter_mut().enumerate() {
            for &p in &tpos {
                let digit = (i / st[p]) % self.layout[p].dim;
                *slot += digit * st[p];
            }
        }
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            let ri = i - tpart[i];
            for j in 0..d {
                let rj = j - tpart[j];
                out[(ri + tpart[j], rj + tpart[i])] = self.matrix[(i, j)];
            }
        }
        Operator::new(self.layout.clone(), out)
    }

    /// Permutes tensor factors so the layout becomes `new_layout`.
    pub fn reorder(&self, new_layout: &[SpaceLabel]) -> Result<Operator> {
        if new_layout.len() != self.layout.len() {
            return Err(Error::NotPermutation);
        }
        let src = self.positions_of(new_layout).map_err(|_| Error::NotPermutation)?;
        if src.len() != self.layout.len() {
            return Err(Error::NotPermutation);
        }
        let old_st = strides(&self.layout);
        let targets: Vec<SpaceLabel> = src.iter().map(|&p| self.layout[p].clone()).collect();
        // offsets over the old strides, enumerated in the new row-major order
        let map = offsets(&self.layout, &old_st, &src);
        let d = self.dim();
        let m = CMatrix::from_fn(d, d, |r, c| self.matrix[(map[r], map[c])]);
        Operator::new(targets, m)
    }

    /// Tensors with identities on the labels of `layout` missing here, then
    /// reorders to `layout`.
    pub fn extend_to(&self, layout: &[SpaceLabel]) -> Result<Operator> {
        let missing: Vec<SpaceLabel> = layout
            .iter()
            .filter(|l| self.position(l).is_none())
            .cloned()
            .collect();
        let ext = if missing.is_empty() {
            self.clone()
        } else {
            self.tensor(&Operator::identity(missing)?)?
        };
        ext.reorder(layout)
    }

    /// Same matrix, new labels (dimensions must agree position by position).
    pub fn relabel(&self, layout: Vec<SpaceLabel>) -> Result<Operator> {
        if layout.len() != self.layout.len() {
            return Err(Error::NotPermutation);
        }
        for (a, b) in layout.iter().zip(&self.layout) {
            if a.dim != b.dim {
                return Err(Error::DimensionMismatch {
                    expected: b.dim,
                    found: a.dim,
                });
            }
        }
        Operator::new(layout, self.matrix.clone())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        let dev = self.hermitian_deviation();
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(self.min_eigenvalue() >= -tol)
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator {
            layout: self.layout.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }

    fn aligned(&self, other: &Operator) -> Result<Operator> {
        if other.layout == self.layout {
            Ok(other.clone())
        } else {
            other.reorder(&self.layout)
        }
    }

    /// Sum; `other` is reordered to this layout first.
    pub fn add(&self, other: &Operator) -> Result<Operator> {
        let o = self.aligned(other)?;
        Ok(Operator {
            layout: self.layout.clone(),
            matrix: &self.matrix + o.matrix,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.add(&other.scale(-1.0))
    }

    /// Matrix product on a shared layout.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        let o = self.aligned(other)?;
        Ok(Operator {
            layout: self.layout.clone(),
            matrix: &self.matrix * o.matrix,
        })
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        let o = self.aligned(other)?;
        Ok(trace_of_product(&self.matrix, &o.matrix))
    }

    pub fn frobenius_distance(&self, other: &Operator) -> Result<f64> {
        let o = self.aligned(other)?;
        Ok((&self.matrix - o.matrix).norm())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        let o = self.aligned(other)?;
        Ok((&self.matrix - o.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }
}

/// `tr(a * b) = sum_ij a_ij b_ji`.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Hermitian matrix function via eigen-decomposition.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| C64::new(f(x), 0.0)),
    );
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}
