//! P1 finite elements on a structured [`Mesh`].
//!
//! Potentials live in `V_h` (all nodes), states in `X_h` (zero on the
//! boundary). Dirichlet conditions are imposed by eliminating boundary rows
//! and columns, so every state system is a pure interior SPD system.
//!
//! All element integrals are exact: products of up to three barycentric
//! coordinates are integrated with
//!
//! ```text
//!     ∫_T λ₁^a λ₂^b λ₃^c = |T| · d! · a! b! c! / (a + b + c + d)!
//! ```

use std::f64::consts::PI;
use std::path::Path;

use crate::mesh::{Mesh, PointSet};
use crate::sparse::{self, CsrMatrix, SolveStats};
use crate::{Error, Result};

const NO_DOF: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `V_h`: one coefficient per mesh node.
    Full,
    /// `X_h`: boundary coefficients fixed at zero.
    Interior,
}

/// Coefficient vector over all mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    space: Space,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: &Mesh, space: Space, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("nodal field has non-finite values".into()));
        }
        if space == Space::Interior && values.iter().zip(mesh.boundary_mask()).any(|(&v, &b)| b && v != 0.0) {
            return Err(Error::Config("X_h field must vanish on the boundary".into()));
        }
        Ok(Self { space, values })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            space: Space::Full,
            values: vec![c; mesh.num_nodes()],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Writes `field.csv`-style output: `node_id,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node_id", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Catalogue of analytic functions addressable by id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticFunction {
    /// `3 + ½ sin(πx) sin(πy)`
    Ex1Potential,
    /// `1 + ½ sin²(πx)`
    Ex3Potential,
    Constant(f64),
    /// `sin(πx)` (1-d) with source `π² sin(πx)` for `q = 0`.
    Mms1dSolution,
    Mms1dSource,
    /// `sin(πx) sin(πy)` with source `(2π² + 1) sin(πx) sin(πy)` for `q = 1`.
    Mms2dSolution,
    Mms2dSource,
}

impl AnalyticFunction {
    /// Accepts `ex1_q`, `ex3ab_q`, `const1`, `zero`, `const:<value>`,
    /// `mms1d_u`, `mms1d_f`, `mms2d_u`, `mms2d_f`.
    pub fn from_id(id: &str) -> Result<Self> {
        Ok(match id {
            "ex1_q" => Self::Ex1Potential,
            "ex3ab_q" => Self::Ex3Potential,
            "const1" => Self::Constant(1.0),
            "zero" => Self::Constant(0.0),
            "mms1d_u" => Self::Mms1dSolution,
            "mms1d_f" => Self::Mms1dSource,
            "mms2d_u" => Self::Mms2dSolution,
            "mms2d_f" => Self::Mms2dSource,
            other => match other.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => Self::Constant(c),
                _ => return Err(Error::UnknownFunction(other.to_string())),
            },
        })
    }

    pub fn supports_dim(&self, dim: usize) -> bool {
        match self {
            Self::Ex1Potential | Self::Mms2dSolution | Self::Mms2dSource => dim == 2,
            Self::Mms1dSolution | Self::Mms1dSource => dim == 1,
            Self::Ex3Potential | Self::Constant(_) => true,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = |c: f64| (PI * c).sin();
        match *self {
            Self::Ex1Potential => 3.0 + 0.5 * s(x[0]) * s(x[1]),
            Self::Ex3Potential => 1.0 + 0.5 * s(x[0]).powi(2),
            Self::Constant(c) => c,
            Self::Mms1dSolution => s(x[0]),
            Self::Mms1dSource => PI * PI * s(x[0]),
            Self::Mms2dSolution => s(x[0]) * s(x[1]),
            Self::Mms2dSource => (2.0 * PI * PI + 1.0) * s(x[0]) * s(x[1]),
        }
    }
}

/// Nodal interpolant `Π_h g`.
pub fn interpolate(mesh: &Mesh, func: AnalyticFunction) -> Result<NodalField> {
    if !func.supports_dim(mesh.dim()) {
        return Err(Error::Config(format!(
            "{func:?} is not defined in dimension {}",
            mesh.dim()
        )));
    }
    let values = (0..mesh.num_nodes()).map(|i| func.eval(mesh.node(i))).collect();
    NodalField::new(mesh, Space::Full, values)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫_T ∏ λ_{idx}` divided by `|T|`, for a simplex of dimension `dim`.
fn monomial_integral(dim: usize, idx: &[usize]) -> f64 {
    let mut exps = [0usize; 3];
    for &i in idx {
        exps[i] += 1;
    }
    factorial(dim) * exps.iter().map(|&a| factorial(a)).product::<f64>() / factorial(idx.len() + dim)
}

/// Element stiffness matrix `∫ ∇φ_a·∇φ_b`.
fn local_stiffness(mesh: &Mesh, e: usize) -> [[f64; 3]; 3] {
    let nodes = mesh.element(e);
    let mut k = [[0.0; 3]; 3];
    if mesh.dim() == 1 {
        let inv = 1.0 / mesh.element_measure(e);
        k[0][0] = inv;
        k[1][1] = inv;
        k[0][1] = -inv;
        k[1][0] = -inv;
        return k;
    }
    let p = [mesh.node(nodes[0]), mesh.node(nodes[1]), mesh.node(nodes[2])];
    let area = mesh.element_measure(e);
    let grad = |i: usize| {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        [(p[j][1] - p[l][1]) / (2.0 * area), (p[l][0] - p[j][0]) / (2.0 * area)]
    };
    let g = [grad(0), grad(1), grad(2)];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

/// Element mass matrix `∫ w φ_a φ_b` for a piecewise linear weight given by
/// its element nodal values (or `w ≡ 1`).
fn local_mass(mesh: &Mesh, e: usize, weight: Option<[f64; 3]>) -> [[f64; 3]; 3] {
    let dim = mesh.dim();
    let k = dim + 1;
    let measure = mesh.element_measure(e);
    let mut m = [[0.0; 3]; 3];
    for (a, row) in m.iter_mut().enumerate().take(k) {
        for (b, entry) in row.iter_mut().enumerate().take(k) {
            *entry = measure
                * match weight {
                    None => monomial_integral(dim, &[a, b]),
                    Some(w) => (0..k).map(|l| w[l] * monomial_integral(dim, &[a, b, l])).sum(),
                };
        }
    }
    m
}

/// Sparsity pattern of a P1 operator on one space, with the position of
/// every local element entry in the value array.
#[derive(Debug, Clone)]
struct Pattern {
    zero: CsrMatrix,
    /// `(dim+1)²` slots per element, `NO_DOF` for eliminated entries.
    slots: Vec<usize>,
}

impl Pattern {
    fn new(mesh: &Mesh, dofs: &[usize], ndof: usize) -> Self {
        let k = mesh.dim() + 1;
        let mut entries = Vec::with_capacity(mesh.num_elements() * k * k);
        for nodes in mesh.elements() {
            for &a in nodes {
                for &b in nodes {
                    if dofs[a] != NO_DOF && dofs[b] != NO_DOF {
                        entries.push((dofs[a], dofs[b], 0.0));
                    }
                }
            }
        }
        let zero = CsrMatrix::from_triplets(ndof, ndof, &entries).expect("dof indices are in range");
        let mut slots = Vec::with_capacity(mesh.num_elements() * k * k);
        for nodes in mesh.elements() {
            for &a in nodes {
                for &b in nodes {
                    slots.push(if dofs[a] != NO_DOF && dofs[b] != NO_DOF {
                        zero.slot(dofs[a], dofs[b]).expect("pattern contains element pairs")
                    } else {
                        NO_DOF
                    });
                }
            }
        }
        Self { zero, slots }
    }

    fn assemble(&self, mesh: &Mesh, local: impl Fn(usize) -> [[f64; 3]; 3]) -> CsrMatrix {
        let k = mesh.dim() + 1;
        let mut values = vec![0.0; self.zero.nnz()];
        for e in 0..mesh.num_elements() {
            let m = local(e);
            let slots = &self.slots[e * k * k..(e + 1) * k * k];
            for a in 0..k {
                for b in 0..k {
                    let s = slots[a * k + b];
                    if s != NO_DOF {
                        values[s] += m[a][b];
                    }
                }
            }
        }
        self.zero.with_values(values).expect("value count matches pattern")
    }
}

fn dof_map(mesh: &Mesh, space: Space) -> (Vec<usize>, usize) {
    match space {
        Space::Full => ((0..mesh.num_nodes()).collect(), mesh.num_nodes()),
        Space::Interior => {
            let mut next = 0;
            let map = mesh
                .boundary_mask()
                .iter()
                .map(|&b| {
                    if b {
                        NO_DOF
                    } else {
                        next += 1;
                        next - 1
                    }
                })
                .collect();
            (map, next)
        }
    }
}

fn element_weights(mesh: &Mesh, e: usize, w: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, &n) in out.iter_mut().zip(mesh.element(e)) {
        *o = w[n];
    }
    out
}

/// Stiffness matrix `K_ij = ∫ ∇φ_i·∇φ_j` on the given space.
pub fn assemble_stiffness(mesh: &Mesh, space: Space) -> CsrMatrix {
    let (dofs, ndof) = dof_map(mesh, space);
    Pattern::new(mesh, &dofs, ndof).assemble(mesh, |e| local_stiffness(mesh, e))
}

/// Mass matrix `∫ w φ_i φ_j`, `w ≡ 1` when no weight is given.
pub fn assemble_mass(mesh: &Mesh, space: Space, weight: Option<&NodalField>) -> Result<CsrMatrix> {
    if let Some(w) = weight {
        check_len(mesh, w.values())?;
    }
    let (dofs, ndof) = dof_map(mesh, space);
    let pattern = Pattern::new(mesh, &dofs, ndof);
    Ok(pattern.assemble(mesh, |e| {
        local_mass(mesh, e, weight.map(|w| element_weights(mesh, e, w.values())))
    }))
}

/// Load vector `b_i = ∫ (Π_h f) φ_i` over the dofs of `space`.
pub fn assemble_load(mesh: &Mesh, space: Space, f: &NodalField) -> Result<Vec<f64>> {
    check_len(mesh, f.values())?;
    let full = assemble_mass(mesh, Space::Full, None)?.spmv(f.values())?;
    let (dofs, ndof) = dof_map(mesh, space);
    let mut out = vec![0.0; ndof];
    for (node, &d) in dofs.iter().enumerate() {
        if d != NO_DOF {
            out[d] = full[node];
        }
    }
    Ok(out)
}

fn check_len(mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: values.len(),
        });
    }
    Ok(())
}

/// Point evaluation operator `P = [φ_i(x_j)]`, stored point-major
/// (one row per sampling point, at most `dim + 1` nonzeros each).
#[derive(Debug, Clone)]
pub struct EvaluationMatrix {
    by_point: CsrMatrix,
}

impl EvaluationMatrix {
    pub fn new(mesh: &Mesh, points: &PointSet) -> Result<Self> {
        if points.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: mesh.dim(),
                found: points.dim(),
            });
        }
        let mut entries = Vec::with_capacity(points.len() * (mesh.dim() + 1));
        for (j, x) in points.iter().enumerate() {
            let loc = mesh.locate(x)?;
            for (&node, &b) in mesh.element(loc.element).iter().zip(&loc.bary) {
                if b != 0.0 {
                    entries.push((j, node, b));
                }
            }
        }
        Ok(Self {
            by_point: CsrMatrix::from_triplets(points.len(), mesh.num_nodes(), &entries)?,
        })
    }

    pub fn num_points(&self) -> usize {
        self.by_point.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.by_point.ncols()
    }

    /// Values `(u_h(x_j))_j` of a nodal field at the sampling points.
    pub fn evaluate(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.by_point.spmv(values)
    }

    /// `P w`: `(Σ_j w_j φ_i(x_j))_i` over all nodes.
    pub fn scatter(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.num_points() {
            return Err(Error::DimensionMismatch {
                expected: self.num_points(),
                found: weights.len(),
            });
        }
        let mut out = vec![0.0; self.num_nodes()];
        let (offsets, cols, vals) = (
            self.by_point.row_offsets(),
            self.by_point.col_indices(),
            self.by_point.values(),
        );
        for (j, &w) in weights.iter().enumerate() {
            for k in offsets[j]..offsets[j + 1] {
                out[cols[k]] += vals[k] * w;
            }
        }
        Ok(out)
    }

    /// Point-major storage, `n × N`.
    pub fn point_major(&self) -> &CsrMatrix {
        &self.by_point
    }

    /// Node-major `N × n` matrix.
    pub fn node_major(&self) -> CsrMatrix {
        self.by_point.transpose()
    }
}

/// Assembled operators on one mesh, with the cached sparsity patterns used
/// to reassemble potential-weighted mass matrices.
#[derive(Debug, Clone)]
pub struct Operators {
    mesh: Mesh,
    full: Pattern,
    interior: Pattern,
    interior_nodes: Vec<usize>,
    stiffness_full: CsrMatrix,
    mass_full: CsrMatrix,
    stiffness_dir: CsrMatrix,
    mass_dir: CsrMatrix,
    h1: CsrMatrix,
    /// `∫ λ_a λ_b λ_c / |T|`, row-major over `(a, b, c)`.
    cubic: [f64; 27],
    pub tol: f64,
    pub max_iter: usize,
}

impl Operators {
    pub fn new(mesh: Mesh) -> Self {
        let (full_dofs, nfull) = dof_map(&mesh, Space::Full);
        let (int_dofs, nint) = dof_map(&mesh, Space::Interior);
        let full = Pattern::new(&mesh, &full_dofs, nfull);
        let interior = Pattern::new(&mesh, &int_dofs, nint);
        let stiffness_full = full.assemble(&mesh, |e| local_stiffness(&mesh, e));
        let mass_full = full.assemble(&mesh, |e| local_mass(&mesh, e, None));
        let stiffness_dir = interior.assemble(&mesh, |e| local_stiffness(&mesh, e));
        let mass_dir = interior.assemble(&mesh, |e| local_mass(&mesh, e, None));
        let h1_values = stiffness_full
            .values()
            .iter()
            .zip(mass_full.values())
            .map(|(k, m)| k + m)
            .collect();
        let h1 = stiffness_full.with_values(h1_values).expect("shared pattern");
        let interior_nodes = (0..mesh.num_nodes()).filter(|&i| !mesh.is_boundary(i)).collect();
        let k = mesh.dim() + 1;
        let mut cubic = [0.0; 27];
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    cubic[9 * a + 3 * b + c] = monomial_integral(mesh.dim(), &[a, b, c]);
                }
            }
        }
        let max_iter = 1000.max(10 * nint);
        Self {
            mesh,
            full,
            interior,
            interior_nodes,
            stiffness_full,
            mass_full,
            stiffness_dir,
            mass_dir,
            h1,
            cubic,
            tol: sparse::DEFAULT_TOL,
            max_iter,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn stiffness(&self, space: Space) -> &CsrMatrix {
        match space {
            Space::Full => &self.stiffness_full,
            Space::Interior => &self.stiffness_dir,
        }
    }

    pub fn mass(&self, space: Space) -> &CsrMatrix {
        match space {
            Space::Full => &self.mass_full,
            Space::Interior => &self.mass_dir,
        }
    }

    /// `K_full + M_full`, the Gram matrix of the H¹ inner product on `V_h`.
    pub fn h1_matrix(&self) -> &CsrMatrix {
        &self.h1
    }

    /// Interior coefficients of a full nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&i| full[i]).collect()
    }

    /// Full nodal vector with zero boundary values.
    pub fn extend(&self, interior: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (&i, &v) in self.interior_nodes.iter().zip(interior) {
            out[i] = v;
        }
        out
    }

    /// `∫ w φ_i φ_j` for a piecewise linear weight `w` given nodally.
    pub fn weighted_mass(&self, space: Space, weight: &[f64]) -> Result<CsrMatrix> {
        check_len(&self.mesh, weight)?;
        let pattern = match space {
            Space::Full => &self.full,
            Space::Interior => &self.interior,
        };
        Ok(pattern.assemble(&self.mesh, |e| {
            local_mass(&self.mesh, e, Some(element_weights(&self.mesh, e, weight)))
        }))
    }

    /// State operator `K_dir + M_dir[q]` on the interior dofs.
    pub fn state_matrix(&self, q: &[f64]) -> Result<CsrMatrix> {
        let mq = self.weighted_mass(Space::Interior, q)?;
        let values = self
            .stiffness_dir
            .values()
            .iter()
            .zip(mq.values())
            .map(|(k, m)| k + m)
            .collect();
        self.stiffness_dir.with_values(values)
    }

    /// Interior load vector `(Π_h f, φ_i)`.
    pub fn load(&self, f: &NodalField) -> Result<Vec<f64>> {
        check_len(&self.mesh, f.values())?;
        Ok(self.restrict(&self.mass_full.spmv(f.values())?))
    }

    /// Solves an interior SPD system at the operator tolerance and returns
    /// the full-node `X_h` field.
    pub fn solve_interior(
        &self,
        a: &CsrMatrix,
        rhs: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(NodalField, SolveStats)> {
        let guess = guess.map(|g| self.restrict(g));
        let (x, stats) = sparse::solve_spd_from(a, rhs, guess.as_deref(), self.tol, self.max_iter)?;
        if !acceptable(&stats) {
            return Err(no_convergence(&stats, rhs));
        }
        let field = NodalField {
            space: Space::Interior,
            values: self.extend(&x),
        };
        Ok((field, stats))
    }

    /// Galerkin solution `u_h ∈ X_h` of `(∇u,∇φ) + (q u, φ) = (f, φ)`.
    pub fn solve_forward(&self, q: &NodalField, f: &NodalField) -> Result<NodalField> {
        let a = self.state_matrix(q.values())?;
        let rhs = self.load(f)?;
        Ok(self.solve_interior(&a, &rhs, None)?.0)
    }

    /// Adjoint state `v_h ∈ X_h` with load `(2/n) P (Pᵀu_h − m)`.
    pub fn solve_adjoint(
        &self,
        q: &NodalField,
        u: &NodalField,
        data: &[f64],
        eval: &EvaluationMatrix,
    ) -> Result<NodalField> {
        let a = self.state_matrix(q.values())?;
        let rhs = self.adjoint_load(u.values(), data, eval)?;
        Ok(self.solve_interior(&a, &rhs, None)?.0)
    }

    /// Interior adjoint load `(2/n) P (Pᵀu − m)`.
    pub fn adjoint_load(&self, u: &[f64], data: &[f64], eval: &EvaluationMatrix) -> Result<Vec<f64>> {
        if data.len() != eval.num_points() {
            return Err(Error::DimensionMismatch {
                expected: eval.num_points(),
                found: data.len(),
            });
        }
        let scale = 2.0 / data.len() as f64;
        let residual: Vec<f64> = eval
            .evaluate(u)?
            .iter()
            .zip(data)
            .map(|(p, m)| scale * (p - m))
            .collect();
        Ok(self.restrict(&eval.scatter(&residual)?))
    }

    /// `W_k = ∫ u_h v_h φ_k` over all nodes.
    pub fn triple_products(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len(&self.mesh, u)?;
        check_len(&self.mesh, v)?;
        let k = self.mesh.dim() + 1;
        let mut out = vec![0.0; self.num_nodes()];
        for e in 0..self.mesh.num_elements() {
            let nodes = self.mesh.element(e);
            let measure = self.mesh.element_measure(e);
            for c in 0..k {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        acc += u[nodes[a]] * v[nodes[b]] * self.cubic[9 * a + 3 * b + c];
                    }
                }
                out[nodes[c]] += measure * acc;
            }
        }
        Ok(out)
    }

    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.mass_full.bilinear(a, b)
    }

    pub fn l2_norm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.mass_full.quadratic_form(v)?.max(0.0).sqrt())
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.stiffness_full.quadratic_form(v)?.max(0.0).sqrt())
    }

    pub fn h1_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.h1.bilinear(a, b)
    }

    pub fn h1_norm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.h1.quadratic_form(v)?.max(0.0).sqrt())
    }

    pub fn interpolate(&self, func: AnalyticFunction) -> Result<NodalField> {
        interpolate(&self.mesh, func)
    }

    /// `‖v_h − g‖_{L²}` by a composite midpoint rule on `refinement`
    /// subdivisions per element edge.
    ///
    /// Unlike comparing against the interpolant of `g`, this sees the
    /// genuine L² error of `v_h`.
    pub fn l2_error(&self, values: &[f64], exact: AnalyticFunction, refinement: usize) -> Result<f64> {
        let mesh = &self.mesh;
        if values.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_nodes(),
                found: values.len(),
            });
        }
        let sub = refinement.max(1);
        let third = 1.0 / 3.0;
        let mut bary: Vec<[f64; 3]> = Vec::new();
        if mesh.dim() == 1 {
            for i in 0..sub {
                let t = (i as f64 + 0.5) / sub as f64;
                bary.push([1.0 - t, t, 0.0]);
            }
        } else {
            // centroids of the sub-triangles, upright and inverted
            for i in 0..sub {
                for j in 0..sub - i {
                    let (l1, l2) = ((i as f64 + third) / sub as f64, (j as f64 + third) / sub as f64);
                    bary.push([1.0 - l1 - l2, l1, l2]);
                    if i + j + 1 < sub {
                        let (l1, l2) = (
                            (i as f64 + 2.0 * third) / sub as f64,
                            (j as f64 + 2.0 * third) / sub as f64,
                        );
                        bary.push([1.0 - l1 - l2, l1, l2]);
                    }
                }
            }
        }
        let dim = mesh.dim();
        let mut err2 = 0.0;
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element(e);
            let weight = mesh.element_measure(e) / bary.len() as f64;
            for l in &bary {
                let mut x = [0.0; 2];
                let mut vh = 0.0;
                for (a, &n) in nodes.iter().enumerate() {
                    for (d, xd) in x.iter_mut().enumerate().take(dim) {
                        *xd += l[a] * mesh.node(n)[d];
                    }
                    vh += l[a] * values[n];
                }
                err2 += weight * (vh - exact.eval(&x[..dim])).powi(2);
            }
        }
        Ok(err2.sqrt())
    }

    /// Solves `(K_full + M_full) x = rhs` (zero Neumann data).
    pub fn solve_neumann(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (x, stats) = sparse::solve_spd(&self.h1, rhs, self.tol, self.max_iter)?;
        if !acceptable(&stats) {
            return Err(no_convergence(&stats, rhs));
        }
        Ok(x)
    }
}

/// Converged to the requested tolerance, or to rounding level when that
/// tolerance is out of reach.
fn acceptable(stats: &SolveStats) -> bool {
    stats.converged || stats.backward_error <= sparse::ROUNDOFF_BACKWARD_ERROR
}

fn no_convergence(stats: &SolveStats, rhs: &[f64]) -> Error {
    let b = sparse::norm2(rhs);
    Error::NoConvergence {
        iterations: stats.iterations,
        relative_residual: if b > 0.0 {
            stats.residual_norm / b
        } else {
            stats.residual_norm
        },
    }
}
