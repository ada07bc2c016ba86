//! Extended-precision complex matrices for the nested-commutator moment
//! problem, whose Hankel matrix is too ill-conditioned for `f64` at full
//! order.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

use crate::operator::{CMatrix, C64};

pub(crate) type F = FBig<HalfEven, 2>;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Ctx {
    pub bits: usize,
}

impl Ctx {
    pub fn real(&self, x: f64) -> F {
        F::try_from(x)
            .expect("finite input")
            .with_precision(self.bits)
            .value()
    }

    pub fn zero(&self) -> F {
        self.real(0.0)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Cx {
    pub re: F,
    pub im: F,
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug)]
pub(crate) struct XMatrix {
    pub dim: usize,
    pub data: Vec<Cx>,
}

impl XMatrix {
    pub fn from_matrix(m: &CMatrix, ctx: Ctx) -> Self {
        let dim = m.nrows();
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = m[(i, j)];
                data.push(Cx {
                    re: ctx.real(z.re),
                    im: ctx.real(z.im),
                });
            }
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize, ctx: Ctx) -> Self {
        let z = ctx.zero();
        Self {
            dim,
            data: vec![
                Cx {
                    re: z.clone(),
                    im: z
                };
                dim * dim
            ],
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let z = &self.data[i * self.dim + j];
            C64::new(z.re.to_f64().value(), z.im.to_f64().value())
        })
    }

    fn product(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut re: Option<F> = None;
                let mut im: Option<F> = None;
                for k in 0..d {
                    let a = &self.data[i * d + k];
                    let b = &other.data[k * d + j];
                    let r = &a.re * &b.re - &a.im * &b.im;
                    let s = &a.re * &b.im + &a.im * &b.re;
                    re = Some(match re {
                        Some(acc) => acc + r,
                        None => r,
                    });
                    im = Some(match im {
                        Some(acc) => acc + s,
                        None => s,
                    });
                }
                data.push(Cx {
                    re: re.expect("nonempty"),
                    im: im.expect("nonempty"),
                });
            }
        }
        Self { dim: d, data }
    }

    /// `self * other - other * self`.
    pub fn commutator_with(&self, other: &Self) -> Self {
        let ab = self.product(other);
        let ba = other.product(self);
        Self {
            dim: self.dim,
            data: ab
                .data
                .into_iter()
                .zip(ba.data)
                .map(|(x, y)| Cx {
                    re: x.re - y.re,
                    im: x.im - y.im,
                })
                .collect(),
        }
    }

    /// `sum |x_ij|^2 / D`.
    pub fn norm_sqr(&self, ctx: Ctx) -> F {
        let mut acc = ctx.zero();
        for z in &self.data {
            acc = acc + &z.re * &z.re + &z.im * &z.im;
        }
        acc / ctx.real(self.dim as f64)
    }

    /// `self += c * other` for real `c`.
    pub fn add_scaled(&mut self, c: &F, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            x.re = &x.re + c * &y.re;
            x.im = &x.im + c * &y.im;
        }
    }
}

/// Solves the leading `r x r` block of a symmetric positive semidefinite
/// system by Cholesky, where `r` is the number of pivots above
/// `rel_tol * max diagonal`. Returns the solution padded with zeros and `r`.
pub(crate) fn cholesky_leading(b: &[Vec<F>], u: &[F], rel_tol: f64, ctx: Ctx) -> (Vec<F>, usize) {
    let k = u.len();
    let zero = ctx.zero();
    let scale = b
        .iter()
        .enumerate()
        .map(|(i, row)| row[i].clone())
        .fold(zero.clone(), |a, x| if x > a { x } else { a });
    if scale <= zero {
        return (vec![zero; k], 0);
    }
    let mut l: Vec<Vec<F>> = vec![vec![zero.clone(); k]; k];
    let mut rank = 0;
    for j in 0..k {
        let mut diag = b[j][j].clone();
        for p in 0..j {
            diag = diag - &l[j][p] * &l[j][p];
        }
        let ratio = (&diag / &scale).to_f64().value();
        if !(ratio > rel_tol) {
            break;
        }
        let root = diag.sqrt();
        for i in (j + 1)..k {
            let mut s = b[i][j].clone();
            for p in 0..j {
                s = s - &l[i][p] * &l[j][p];
            }
            l[i][j] = s / &root;
        }
        l[j][j] = root;
        rank += 1;
    }
    let r = rank;
    let mut y = vec![zero.clone(); r];
    for i in 0..r {
        let mut s = u[i].clone();
        for p in 0..i {
            s = s - &l[i][p] * &y[p];
        }
        y[i] = s / &l[i][i];
    }
    let mut x = vec![zero; k];
    for i in (0..r).rev() {
        let mut s = y[i].clone();
        for p in (i + 1)..r {
            s = s - &l[p][i] * &x[p];
        }
        x[i] = s / &l[i][i];
    }
    (x, r)
}
