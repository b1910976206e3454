//! Linearized cart-pendulum and its eigen-decomposition.
//!
//! The state is `s = [y, dy, phi, dphi]` (cart position and velocity, pendulum
//! deviation from upright and its rate). Diagonalizing `A` decouples the single
//! unstable mode, which is then driven by the scalar event-triggered loop.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Rounded matrices and vectors as printed for the case study.
pub mod printed {
    pub const A: [f64; 16] = [
        0.0, 1.0, 0.0, 0.0, //
        0.0, -0.1818, 2.6730, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, -0.4545, 31.1800, 0.0,
    ];
    pub const B: [f64; 4] = [0.0, 1.8180, 0.0, 4.5450];
    pub const K: [f64; 4] = [-1.00, -2.04, 20.36, 3.93];
    pub const EIGENVALUES: [f64; 4] = [0.0, -5.6041, -0.1428, 5.5651];
    pub const B_MODAL: [f64; 4] = [10.0000, -2.3865, 10.0979, 2.2513];
    pub const K_MODAL: [f64; 4] = [-1.0000, -0.1295, 0.7422, 7.2624];
}

/// Physical constants of the cart-pendulum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumPhysics {
    /// Pendulum mass (kg).
    pub m_pend: f64,
    /// Cart mass (kg).
    pub m_cart: f64,
    /// Cart friction (N/m/s).
    pub friction: f64,
    /// Distance to the pendulum's centre of mass (m).
    pub length: f64,
    /// Pendulum moment of inertia (kg m^2).
    pub inertia: f64,
    pub gravity: f64,
}

impl Default for PendulumPhysics {
    fn default() -> Self {
        Self {
            m_pend: 0.2,
            m_cart: 0.5,
            friction: 0.1,
            length: 0.3,
            inertia: 0.006,
            gravity: 9.8,
        }
    }
}

impl PendulumPhysics {
    /// Small-angle linearization about the upright equilibrium.
    pub fn linearize(&self) -> (DMatrix<f64>, DVector<f64>) {
        let Self {
            m_pend: m,
            m_cart: mc,
            friction: nu,
            length: l,
            inertia: i,
            gravity: g,
        } = *self;
        let p = i * (mc + m) + mc * m * l * l;
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                -(i + m * l * l) * nu / p,
                m * m * g * l * l / p,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                0.0,
                -m * l * nu / p,
                m * g * l * (mc + m) / p,
                0.0,
            ],
        );
        let b = DVector::from_column_slice(&[0.0, (i + m * l * l) / p, 0.0, m * l / p]);
        (a, b)
    }
}

/// Where the pendulum matrices come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixSource {
    /// Linearized from [`PendulumPhysics::default`]; reproduces the printed spectra to four digits.
    Physical,
    /// The four-digit printed matrices.
    Printed,
}

impl std::str::FromStr for MatrixSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Self::Physical),
            "printed" => Ok(Self::Printed),
            other => Err(Error::Config(format!(
                "unknown pendulum matrices `{other}` (expected physical, printed)"
            ))),
        }
    }
}

impl std::fmt::Display for MatrixSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Physical => "physical",
            Self::Printed => "printed",
        })
    }
}

/// State-space model together with its modal form `A P = P diag(eigvals)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub k: RowDVector<f64>,
    pub eigvals: DVector<f64>,
    /// Eigenvector matrix; column `i` belongs to `eigvals[i]`, unit 2-norm.
    pub pmat: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    /// `P^-1 B`.
    pub b_modal: DVector<f64>,
    /// `k P`.
    pub k_modal: RowDVector<f64>,
}

impl PendulumModel {
    /// Diagonalized model aligned to the printed mode order and eigenvector signs.
    pub fn case_study(source: MatrixSource) -> Result<Self> {
        let (a, b) = match source {
            MatrixSource::Physical => PendulumPhysics::default().linearize(),
            MatrixSource::Printed => (
                DMatrix::from_row_slice(4, 4, &printed::A),
                DVector::from_column_slice(&printed::B),
            ),
        };
        let k = RowDVector::from_row_slice(&printed::K);
        diagonalize(&a, &b, &k)?.align_to(&printed::EIGENVALUES, &printed::B_MODAL)
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn modal_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.eigvals)
    }

    /// Index of the (single) mode with positive real eigenvalue.
    pub fn unstable_index(&self) -> Result<usize> {
        let unstable: Vec<usize> = (0..self.dim()).filter(|&i| self.eigvals[i] > 0.0).collect();
        match unstable.as_slice() {
            [i] => Ok(*i),
            _ => Err(Error::UnsupportedModel(format!(
                "expected exactly one unstable mode, found {}",
                unstable.len()
            ))),
        }
    }

    /// Reorders modes to follow `ref_eigs` (nearest match) and flips eigenvector
    /// signs so `b_modal` has the signs of `ref_b_modal`.
    pub fn align_to(&self, ref_eigs: &[f64], ref_b_modal: &[f64]) -> Result<Self> {
        let n = self.dim();
        if ref_eigs.len() != n || ref_b_modal.len() != n {
            return Err(Error::UnsupportedModel("reference size mismatch".into()));
        }
        let mut used = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for &target in ref_eigs {
            let best = (0..n)
                .filter(|&i| !used[i])
                .min_by(|&i, &j| {
                    (self.eigvals[i] - target)
                        .abs()
                        .total_cmp(&(self.eigvals[j] - target).abs())
                })
                .expect("one unused mode per reference eigenvalue");
            used[best] = true;
            order.push(best);
        }
        let mut pmat = DMatrix::zeros(n, n);
        let mut eigvals = DVector::zeros(n);
        for (dst, &src) in order.iter().enumerate() {
            let flip = self.b_modal[src] * ref_b_modal[dst] < 0.0;
            let col = self.pmat.column(src);
            pmat.set_column(dst, &if flip { -col } else { col.into_owned() });
            eigvals[dst] = self.eigvals[src];
        }
        modal_form(&self.a, &self.b, &self.k, eigvals, pmat)
    }
}

fn modal_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    k: &RowDVector<f64>,
    eigvals: DVector<f64>,
    pmat: DMatrix<f64>,
) -> Result<PendulumModel> {
    let pinv = pmat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("eigenvector matrix".into()))?;
    Ok(PendulumModel {
        a: a.clone(),
        b: b.clone(),
        k: k.clone(),
        b_modal: &pinv * b,
        k_modal: k * &pmat,
        eigvals,
        pmat,
        pinv,
    })
}

/// Eigen-decomposition of a matrix with distinct real eigenvalues.
///
/// Eigenvalues come from a real Schur form; each eigenvector is the right
/// singular vector of `A - lambda I` with the smallest singular value. Modes are
/// sorted by ascending eigenvalue, columns have unit 2-norm and their largest
/// entry positive.
pub fn diagonalize(a: &DMatrix<f64>, b: &DVector<f64>, k: &RowDVector<f64>) -> Result<PendulumModel> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || k.len() != n {
        return Err(Error::UnsupportedModel("dimension mismatch".into()));
    }
    let mut eigs: Vec<f64> = a
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::UnsupportedModel("complex eigenvalues".into()))?
        .iter()
        .copied()
        .collect();
    eigs.sort_by(f64::total_cmp);
    let scale = eigs.iter().fold(1.0f64, |s, e| s.max(e.abs()));
    if eigs.windows(2).any(|w| w[1] - w[0] <= 1e-8 * scale) {
        return Err(Error::UnsupportedModel("repeated eigenvalues".into()));
    }

    let mut pmat = DMatrix::zeros(n, n);
    for (col, &lambda) in eigs.iter().enumerate() {
        let shifted = a - DMatrix::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::UnsupportedModel("SVD failed".into()))?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty spectrum");
        let mut v: DVector<f64> = v_t.row(imin).transpose();
        v /= v.norm();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v = -v;
        }
        pmat.set_column(col, &v);
    }
    modal_form(a, b, k, DVector::from_vec(eigs), pmat)
}

/// Tight bound on `|(P^-1 w)_row|` when every physical component satisfies `|w_j| <= m`.
pub fn transformed_disturbance_bound(pmat: &DMatrix<f64>, row: usize, m: f64) -> Result<f64> {
    let pinv = pmat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("eigenvector matrix".into()))?;
    if row >= pinv.nrows() {
        return Err(Error::UnsupportedModel(format!("row {row} out of range")));
    }
    Ok(m * pinv.row(row).iter().map(|v| v.abs()).sum::<f64>())
}
