//! Truncated-Fock-space operator algebra: ladder operators, tensor
//! embeddings, state factories, and matrix functions.
//!
//! All values are immutable after construction and cheap to clone at the
//! dimensions used here; operations are pure functions.

use ndarray::Array2;
use thiserror::Error;

use crate::linalg::{self, C64};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("invalid dimension {0}: every mode needs at least 2 levels")]
    InvalidDimension(usize),
    #[error("mode index {index} out of range for a {n_modes}-mode space")]
    InvalidMode { index: usize, n_modes: usize },
    #[error("operator dimension {got} does not match mode dimension {expected}")]
    ModeDimensionMismatch { got: usize, expected: usize },
    #[error("displacement |beta|^2 = {nbar:.3} exceeds truncation budget dim/3 = {budget:.3}")]
    TruncationBudget { nbar: f64, budget: f64 },
    #[error("signatures do not match: {0:?} vs {1:?}")]
    SignatureMismatch(Vec<usize>, Vec<usize>),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidState(String),
}

/// Ordered per-mode truncation dimensions. The order (storage, qubit[,
/// readout]) is fixed for a whole simulation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceSignature {
    dims: Vec<usize>,
}

impl SpaceSignature {
    pub fn new(dims: &[usize]) -> Result<Self, OperatorError> {
        for &d in dims {
            if d < 2 {
                return Err(OperatorError::InvalidDimension(d));
            }
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of a Fock multi-index, row-major over the mode order.
    pub fn ravel(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.dims.len());
        let mut idx = 0;
        for (n, d) in levels.iter().zip(&self.dims) {
            debug_assert!(n < d);
            idx = idx * d + n;
        }
        idx
    }

    /// Fock multi-index of a flat basis index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }
}

/// Complex matrix labeled by the mode-dimension signature it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub signature: SpaceSignature,
    pub entries: Array2<C64>,
}

impl OperatorMatrix {
    pub fn new(signature: SpaceSignature, entries: Array2<C64>) -> Result<Self, OperatorError> {
        let n = signature.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(OperatorError::SignatureMismatch(
                signature.dims.clone(),
                vec![entries.nrows(), entries.ncols()],
            ));
        }
        Ok(Self { signature, entries })
    }

    pub fn zeros(signature: SpaceSignature) -> Self {
        let n = signature.total_dim();
        Self { signature, entries: Array2::zeros((n, n)) }
    }

    pub fn identity(signature: SpaceSignature) -> Self {
        let n = signature.total_dim();
        Self { signature, entries: linalg::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { signature: self.signature.clone(), entries: linalg::dagger(&self.entries) }
    }

    pub fn dot(&self, other: &Self) -> Result<Self, OperatorError> {
        if self.signature != other.signature {
            return Err(OperatorError::SignatureMismatch(
                self.signature.dims.clone(),
                other.signature.dims.clone(),
            ));
        }
        Ok(Self {
            signature: self.signature.clone(),
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { signature: self.signature.clone(), entries: self.entries.mapv(|e| e * z) }
    }

    pub fn add(&self, other: &Self) -> Result<Self, OperatorError> {
        if self.signature != other.signature {
            return Err(OperatorError::SignatureMismatch(
                self.signature.dims.clone(),
                other.signature.dims.clone(),
            ));
        }
        Ok(Self { signature: self.signature.clone(), entries: &self.entries + &other.entries })
    }

    /// True if the matrix is diagonal to within `tol` of its largest entry.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let scale = linalg::max_abs(&self.entries).max(1e-300);
        self.entries
            .indexed_iter()
            .all(|((i, j), z)| i == j || z.norm() <= tol * scale)
    }

    /// If the operator maps each Fock product basis state to (a multiple of)
    /// a single basis state shifted by a fixed per-mode offset, return that
    /// offset. Ladder operators, number operators, and their embeddings all
    /// qualify; this drives the sectored propagator fast path.
    pub fn ladder_offset(&self) -> Option<Vec<i64>> {
        let sig = &self.signature;
        let n = self.dim();
        let scale = linalg::max_abs(&self.entries).max(1e-300);
        let tol = 1e-14 * scale;
        let mut offset: Option<Vec<i64>> = None;
        for j in 0..n {
            let mut row_hit: Option<usize> = None;
            for i in 0..n {
                if self.entries[[i, j]].norm() > tol {
                    if row_hit.is_some() {
                        return None;
                    }
                    row_hit = Some(i);
                }
            }
            if let Some(i) = row_hit {
                let mi = sig.unravel(i);
                let mj = sig.unravel(j);
                let delta: Vec<i64> =
                    mi.iter().zip(&mj).map(|(&a, &b)| a as i64 - b as i64).collect();
                match &offset {
                    None => offset = Some(delta),
                    Some(d) if *d == delta => {}
                    Some(_) => return None,
                }
            }
        }
        Some(offset.unwrap_or_else(|| vec![0; sig.n_modes()]))
    }
}

/// System state rho: Hermitian, unit trace, positive semidefinite (up to
/// the stated numeric tolerances).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub signature: SpaceSignature,
    pub entries: Array2<C64>,
}

impl DensityMatrix {
    /// Construct with Hermiticity (1e-12) and trace (1e-9) checks. The
    /// eigenvalue floor is checked separately by [`DensityMatrix::min_eigenvalue`]
    /// since it costs an eigendecomposition.
    pub fn new(signature: SpaceSignature, entries: Array2<C64>) -> Result<Self, OperatorError> {
        let n = signature.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(OperatorError::SignatureMismatch(
                signature.dims.clone(),
                vec![entries.nrows(), entries.ncols()],
            ));
        }
        let dm = Self { signature, entries };
        dm.validate(1e-12, 1e-9)?;
        Ok(dm)
    }

    pub(crate) fn new_unchecked(signature: SpaceSignature, entries: Array2<C64>) -> Self {
        Self { signature, entries }
    }

    pub fn validate(&self, herm_tol: f64, trace_tol: f64) -> Result<(), OperatorError> {
        let n = self.entries.nrows();
        let scale = linalg::max_abs(&self.entries).max(1e-300);
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[[i, j]] - self.entries[[j, i]].conj()).norm();
                if d > herm_tol * scale.max(1.0) {
                    return Err(OperatorError::InvalidState(format!(
                        "Hermiticity violation {d:.2e} at ({i},{j})"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(OperatorError::InvalidState(format!("trace = {tr} != 1")));
        }
        Ok(())
    }

    pub fn from_pure(signature: SpaceSignature, ket: &[C64]) -> Result<Self, OperatorError> {
        let n = signature.total_dim();
        if ket.len() != n {
            return Err(OperatorError::SignatureMismatch(
                signature.dims.clone(),
                vec![ket.len()],
            ));
        }
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if norm2 < 1e-300 {
            return Err(OperatorError::InvalidState("zero ket".into()));
        }
        let mut entries = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                entries[[i, j]] = ket[i] * ket[j].conj() / norm2;
            }
        }
        Ok(Self { signature, entries })
    }

    /// Pure Fock product state |levels>.
    pub fn fock(signature: SpaceSignature, levels: &[usize]) -> Result<Self, OperatorError> {
        if levels.len() != signature.n_modes() {
            return Err(OperatorError::SignatureMismatch(
                signature.dims.clone(),
                vec![levels.len()],
            ));
        }
        for (m, (&l, &d)) in levels.iter().zip(signature.dims()).enumerate() {
            if l >= d {
                return Err(OperatorError::InvalidMode { index: m, n_modes: d });
            }
        }
        let n = signature.total_dim();
        let idx = signature.ravel(levels);
        let mut ket = vec![C64::new(0.0, 0.0); n];
        ket[idx] = C64::new(1.0, 0.0);
        Self::from_pure(signature, &ket)
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().iter().sum()
    }

    /// Population of the flat basis index `idx`.
    pub fn population(&self, idx: usize) -> f64 {
        self.entries[[idx, idx]].re
    }

    pub fn purity(&self) -> f64 {
        self.entries.dot(&self.entries).diag().iter().map(|z| z.re).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (w, _) = linalg::eigh(&self.entries);
        w[0]
    }
}

/// Bosonic annihilation operator on a `dim`-level truncated Fock space:
/// entries[n-1, n] = sqrt(n).
pub fn annihilation(dim: usize) -> Result<OperatorMatrix, OperatorError> {
    if dim < 2 {
        return Err(OperatorError::InvalidDimension(dim));
    }
    let signature = SpaceSignature::new(&[dim])?;
    let mut m = Array2::zeros((dim, dim));
    for n in 1..dim {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(signature, m)
}

/// Number operator diag(0, 1, ..., dim-1).
pub fn number(dim: usize) -> Result<OperatorMatrix, OperatorError> {
    let a = annihilation(dim)?;
    a.dagger().dot(&a)
}

/// Embed a single-mode operator into the full product space, identity on
/// every other mode.
pub fn embed(
    op: &OperatorMatrix,
    mode_index: usize,
    signature: &SpaceSignature,
) -> Result<OperatorMatrix, OperatorError> {
    if mode_index >= signature.n_modes() {
        return Err(OperatorError::InvalidMode {
            index: mode_index,
            n_modes: signature.n_modes(),
        });
    }
    let d = signature.dims()[mode_index];
    if op.dim() != d {
        return Err(OperatorError::ModeDimensionMismatch { got: op.dim(), expected: d });
    }
    let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for (m, &dm) in signature.dims().iter().enumerate() {
        if m == mode_index {
            acc = linalg::kron(&acc, &op.entries);
        } else {
            acc = linalg::kron(&acc, &linalg::identity(dm));
        }
    }
    OperatorMatrix::new(signature.clone(), acc)
}

fn check_truncation(beta: C64, dim: usize) -> Result<(), OperatorError> {
    let nbar = beta.norm_sqr();
    let budget = dim as f64 / 3.0;
    if nbar > budget {
        return Err(OperatorError::TruncationBudget { nbar, budget });
    }
    Ok(())
}

/// Displacement operator D(beta) = exp(beta a† - beta* a) on one mode.
pub fn displacement_operator(beta: C64, dim: usize) -> Result<OperatorMatrix, OperatorError> {
    check_truncation(beta, dim)?;
    let a = annihilation(dim)?;
    let gen = a.dagger().scale(beta).add(&a.scale(-beta.conj()))?;
    Ok(OperatorMatrix {
        signature: a.signature.clone(),
        entries: linalg::expm(&gen.entries),
    })
}

/// Pure coherent state with Poissonian photon statistics, renormalized
/// after truncation.
pub fn coherent_state(beta: C64, dim: usize) -> Result<DensityMatrix, OperatorError> {
    check_truncation(beta, dim)?;
    let signature = SpaceSignature::new(&[dim])?;
    let mut ket = vec![C64::new(0.0, 0.0); dim];
    let mut amp = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
    ket[0] = amp;
    for n in 1..dim {
        amp = amp * beta / C64::new((n as f64).sqrt(), 0.0);
        ket[n] = amp;
    }
    DensityMatrix::from_pure(signature, &ket)
}

/// Trace out every mode not in `keep_modes` (given in ascending order).
pub fn partial_trace(
    rho: &DensityMatrix,
    keep_modes: &[usize],
) -> Result<DensityMatrix, OperatorError> {
    let sig = &rho.signature;
    for &m in keep_modes {
        if m >= sig.n_modes() {
            return Err(OperatorError::InvalidMode { index: m, n_modes: sig.n_modes() });
        }
    }
    let keep_dims: Vec<usize> = keep_modes.iter().map(|&m| sig.dims()[m]).collect();
    let out_sig = SpaceSignature::new(&keep_dims)?;
    let n_out = out_sig.total_dim();
    let mut out = Array2::zeros((n_out, n_out));
    let n = sig.total_dim();
    for i in 0..n {
        let mi = sig.unravel(i);
        let ki: Vec<usize> = keep_modes.iter().map(|&m| mi[m]).collect();
        let oi = out_sig.ravel(&ki);
        for j in 0..n {
            let mj = sig.unravel(j);
            // traced-out modes must match between bra and ket
            let matches = (0..sig.n_modes())
                .filter(|m| !keep_modes.contains(m))
                .all(|m| mi[m] == mj[m]);
            if !matches {
                continue;
            }
            let kj: Vec<usize> = keep_modes.iter().map(|&m| mj[m]).collect();
            let oj = out_sig.ravel(&kj);
            out[[oi, oj]] += rho.entries[[i, j]];
        }
    }
    Ok(DensityMatrix::new_unchecked(out_sig, out))
}

/// tr(rho · op).
pub fn expectation(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C64, OperatorError> {
    if rho.signature != op.signature {
        return Err(OperatorError::SignatureMismatch(
            rho.signature.dims().to_vec(),
            op.signature.dims().to_vec(),
        ));
    }
    let prod = rho.entries.dot(&op.entries);
    Ok(prod.diag().iter().sum())
}

/// Uhlmann fidelity F(rho, sigma) = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
/// Equals |<psi|phi>|^2 for pure states.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, OperatorError> {
    if rho.signature != sigma.signature {
        return Err(OperatorError::SignatureMismatch(
            rho.signature.dims().to_vec(),
            sigma.signature.dims().to_vec(),
        ));
    }
    let sr = linalg::sqrtm_psd(&rho.entries);
    let inner = sr.dot(&sigma.entries).dot(&sr);
    let m = linalg::sqrtm_psd(&inner);
    let tr: f64 = m.diag().iter().map(|z| z.re).sum();
    Ok(tr * tr)
}
