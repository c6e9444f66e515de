//! The block-Toeplitz controllability matrix and the exact linear map
//! between free system entries and structured perturbations of it.
//!
//! Each free entry of `(E, A, B)` is one basis parameter; the replication
//! of that entry across the Toeplitz blocks (with the sign of the `-A`
//! blocks) is folded into the parameter's placement list. Coordinates
//! therefore live in system-entry space and `||alpha||_2` equals the
//! Frobenius norm of the stacked perturbation `[dE dA dB]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::systems::{DescriptorSystem, PerturbationMask};

/// Whether the assembled matrix has been transposed to make it tall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    AsBuilt,
    Transposed,
}

/// The assembled `n^2 x n(n+m-1)` controllability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityToeplitz {
    matrix: DMatrix<f64>,
    n: usize,
    m: usize,
    orientation: Orientation,
}

impl ControllabilityToeplitz {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// Assembles the controllability matrix in its as-built orientation:
/// block row 1 holds `[-A, B]`, block rows in between hold `[E, 0]` and
/// `[-A, B]` shifted one unit right per row, the last block row holds
/// `[E, 0]` and a trailing `B`.
pub fn assemble(sys: &DescriptorSystem) -> ControllabilityToeplitz {
    let n = sys.n();
    let m = sys.m();
    let unit = n + m;
    let rows = n * n;
    let cols = n * (n + m - 1);
    let mut t = DMatrix::zeros(rows, cols);

    for i in 0..n {
        let r0 = i * n;
        if i < n - 1 {
            let c0 = i * unit;
            t.view_mut((r0, c0), (n, n)).copy_from(&(-sys.a()));
            t.view_mut((r0, c0 + n), (n, m)).copy_from(sys.b());
        }
        if i > 0 {
            let c0 = (i - 1) * unit;
            t.view_mut((r0, c0), (n, n)).copy_from(sys.e());
        }
        if i == n - 1 {
            let c0 = (n - 1) * unit;
            t.view_mut((r0, c0), (n, m)).copy_from(sys.b());
        }
    }

    ControllabilityToeplitz {
        matrix: t,
        n,
        m,
        orientation: Orientation::AsBuilt,
    }
}

/// Transposes a wide controllability matrix so that rows >= cols; a matrix
/// that is already tall (single-input systems are square) passes through
/// unchanged. Idempotent.
pub fn orient_tall(t: ControllabilityToeplitz) -> ControllabilityToeplitz {
    if t.matrix.ncols() > t.matrix.nrows() {
        ControllabilityToeplitz {
            matrix: t.matrix.transpose(),
            n: t.n,
            m: t.m,
            orientation: Orientation::Transposed,
        }
    } else {
        t
    }
}

/// Which system matrix a basis parameter perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    E,
    A,
    B,
}

/// One free system entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parameter {
    pub source: Source,
    pub row: usize,
    pub col: usize,
}

/// One position a parameter occupies in the (oriented) Toeplitz matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub row: usize,
    pub col: usize,
    pub sign: f64,
}

/// Ordered basis of the structured perturbation space: the free mask
/// entries (E row-major, then A, then B) with their Toeplitz placements.
#[derive(Debug, Clone)]
pub struct StructureBasis {
    parameters: Vec<Parameter>,
    placements: Vec<Vec<Placement>>,
    n: usize,
    m: usize,
    rows: usize,
    cols: usize,
    orientation: Orientation,
}

impl StructureBasis {
    /// Number of free parameters.
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn placements(&self, k: usize) -> &[Placement] {
        &self.placements[k]
    }

    /// Shape of the oriented Toeplitz matrix this basis refers to.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn system_dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    fn check_len(&self, alpha: &DVector<f64>) -> Result<()> {
        if alpha.len() != self.len() {
            return Err(Error::CoordinateLength {
                expected: self.len(),
                found: alpha.len(),
            });
        }
        Ok(())
    }
}

/// Builds the structure basis for the free entries of `mask`, with
/// placements expressed in the given orientation.
pub fn build_basis(
    sys: &DescriptorSystem,
    mask: &PerturbationMask,
    orientation: Orientation,
) -> Result<StructureBasis> {
    if !mask.matches(sys) {
        return Err(Error::DimensionMismatch {
            context: "structure basis mask",
            expected: format!("mask for a {}x{} system", sys.n(), sys.m()),
            found: format!(
                "{}x{} / {}x{}",
                mask.mask_e().nrows(),
                mask.mask_e().ncols(),
                mask.mask_b().nrows(),
                mask.mask_b().ncols()
            ),
        });
    }
    let n = sys.n();
    let m = sys.m();
    let unit = n + m;
    let (built_rows, built_cols) = (n * n, n * (n + m - 1));

    let mut parameters = Vec::new();
    let mut placements = Vec::new();

    let orient = |r: usize, c: usize| -> (usize, usize) {
        match orientation {
            Orientation::AsBuilt => (r, c),
            Orientation::Transposed => (c, r),
        }
    };

    for r in 0..n {
        for c in 0..n {
            if mask.mask_e()[(r, c)] {
                parameters.push(Parameter {
                    source: Source::E,
                    row: r,
                    col: c,
                });
                let ps = (1..n)
                    .map(|i| {
                        let (pr, pc) = orient(i * n + r, (i - 1) * unit + c);
                        Placement {
                            row: pr,
                            col: pc,
                            sign: 1.0,
                        }
                    })
                    .collect();
                placements.push(ps);
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            if mask.mask_a()[(r, c)] {
                parameters.push(Parameter {
                    source: Source::A,
                    row: r,
                    col: c,
                });
                let ps = (0..n.saturating_sub(1))
                    .map(|i| {
                        let (pr, pc) = orient(i * n + r, i * unit + c);
                        Placement {
                            row: pr,
                            col: pc,
                            sign: -1.0,
                        }
                    })
                    .collect();
                placements.push(ps);
            }
        }
    }
    for r in 0..n {
        for c in 0..m {
            if mask.mask_b()[(r, c)] {
                parameters.push(Parameter {
                    source: Source::B,
                    row: r,
                    col: c,
                });
                let mut ps: Vec<Placement> = (0..n.saturating_sub(1))
                    .map(|i| {
                        let (pr, pc) = orient(i * n + r, i * unit + n + c);
                        Placement {
                            row: pr,
                            col: pc,
                            sign: 1.0,
                        }
                    })
                    .collect();
                let (pr, pc) = orient((n - 1) * n + r, (n - 1) * unit + c);
                ps.push(Placement {
                    row: pr,
                    col: pc,
                    sign: 1.0,
                });
                placements.push(ps);
            }
        }
    }

    if parameters.is_empty() {
        return Err(Error::EmptyMask);
    }

    let (rows, cols) = match orientation {
        Orientation::AsBuilt => (built_rows, built_cols),
        Orientation::Transposed => (built_cols, built_rows),
    };
    Ok(StructureBasis {
        parameters,
        placements,
        n,
        m,
        rows,
        cols,
        orientation,
    })
}

/// Dense image of the coordinates: `sum_k alpha_k * Phi_k` in the oriented
/// Toeplitz shape.
pub fn embed(basis: &StructureBasis, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
    basis.check_len(alpha)?;
    let mut out = DMatrix::zeros(basis.rows, basis.cols);
    for (k, ps) in basis.placements.iter().enumerate() {
        let v = alpha[k];
        if v == 0.0 {
            continue;
        }
        for p in ps {
            out[(p.row, p.col)] += p.sign * v;
        }
    }
    Ok(out)
}

/// Scatters coordinates back into system-shaped perturbations
/// `(dE, dA, dB)`; zero outside the mask. Signs are already unfolded, so a
/// unit coordinate at an A-parameter yields `+1` in `dA`.
pub fn extract(
    basis: &StructureBasis,
    alpha: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    basis.check_len(alpha)?;
    let (n, m) = (basis.n, basis.m);
    let mut de = DMatrix::zeros(n, n);
    let mut da = DMatrix::zeros(n, n);
    let mut db = DMatrix::zeros(n, m);
    for (k, param) in basis.parameters.iter().enumerate() {
        match param.source {
            Source::E => de[(param.row, param.col)] = alpha[k],
            Source::A => da[(param.row, param.col)] = alpha[k],
            Source::B => db[(param.row, param.col)] = alpha[k],
        }
    }
    Ok((de, da, db))
}

/// Frobenius norm of `[dE dA dB]` accumulated in parameter order, so that
/// it matches `||alpha||_2` bit for bit on extract output.
pub fn stacked_frobenius(de: &DMatrix<f64>, da: &DMatrix<f64>, db: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for r in 0..de.nrows() {
        for c in 0..de.ncols() {
            acc += de[(r, c)] * de[(r, c)];
        }
    }
    for r in 0..da.nrows() {
        for c in 0..da.ncols() {
            acc += da[(r, c)] * da[(r, c)];
        }
    }
    for r in 0..db.nrows() {
        for c in 0..db.ncols() {
            acc += db[(r, c)] * db[(r, c)];
        }
    }
    acc.sqrt()
}
