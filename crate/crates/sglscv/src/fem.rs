//! Minimal piecewise-linear finite elements on uniform triangulations of the
//! unit square: mass/diffusion/advection assembly, Dirichlet elimination,
//! direct solves, and L2 inner products. Operators are stored dense; the
//! systems here stay near a thousand unknowns.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("diffusion coefficient must be positive, got {0}")]
    NonPositiveDiffusion(f64),
    #[error("mesh resolution must be at least 1")]
    EmptyMesh,
    #[error("singular system; check the boundary configuration")]
    SingularSystem,
}

/// Uniform triangulation of `[0,1]^2`: `n` cells per side, each split into
/// two triangles along the same diagonal.
#[derive(Clone, Debug)]
pub struct Mesh {
    n: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

/// Which part of the boundary carries homogeneous Dirichlet conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// The whole boundary.
    DirichletAll,
    /// Only the left edge `{0} x (0,1)`; the rest is natural (Neumann).
    DirichletLeft,
}

impl Mesh {
    pub fn unit_square(n: usize) -> Result<Mesh, FemError> {
        if n == 0 {
            return Err(FemError::EmptyMesh);
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut coords = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                coords.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Mesh {
            n,
            coords,
            triangles,
        })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.coords[i]
    }

    pub fn is_boundary(&self, node: usize, bc: BoundaryCondition) -> bool {
        let np = self.n + 1;
        let i = node % np;
        let j = node / np;
        match bc {
            BoundaryCondition::DirichletAll => {
                i == 0 || j == 0 || i == self.n || j == self.n
            }
            BoundaryCondition::DirichletLeft => i == 0,
        }
    }

    pub fn free_nodes(&self, bc: BoundaryCondition) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&v| !self.is_boundary(v, bc))
            .collect()
    }

    /// Interpolates a function at the mesh nodes.
    pub fn interpolate<F: Fn(f64, f64) -> f64>(&self, f: F) -> DVector<f64> {
        DVector::from_fn(self.node_count(), |i, _| {
            let [x, y] = self.coords[i];
            f(x, y)
        })
    }

    fn triangle_geometry(&self, t: usize) -> ([[f64; 2]; 3], f64, [[f64; 2]; 3]) {
        let [a, b, c] = self.triangles[t];
        let p = [self.coords[a], self.coords[b], self.coords[c]];
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det.abs();
        // Gradients of the P1 basis functions on this triangle.
        let mut grads = [[0.0f64; 2]; 3];
        for i in 0..3 {
            let pj = p[(i + 1) % 3];
            let pk = p[(i + 2) % 3];
            grads[i] = [(pj[1] - pk[1]) / det, (pk[0] - pj[0]) / det];
        }
        (p, area, grads)
    }
}

/// Affine vector field `V(x) = constant + linear * x`.
#[derive(Clone, Copy, Debug)]
pub struct AffineField {
    pub constant: [f64; 2],
    pub linear: [[f64; 2]; 2],
}

impl AffineField {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.constant[0] + self.linear[0][0] * x[0] + self.linear[0][1] * x[1],
            self.constant[1] + self.linear[1][0] * x[0] + self.linear[1][1] * x[1],
        ]
    }
}

/// Assembled Galerkin matrix over all mesh nodes (no boundary treatment).
#[derive(Clone, Debug)]
pub struct FemOperator {
    pub matrix: DMatrix<f64>,
}

/// Mass matrix `M_ij = int phi_i phi_j`.
pub fn mass_matrix(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.node_count();
    let mut m = DMatrix::zeros(n, n);
    for t in 0..mesh.triangle_count() {
        let (_, area, _) = mesh.triangle_geometry(t);
        let verts = mesh.triangles[t];
        for (li, &gi) in verts.iter().enumerate() {
            for (lj, &gj) in verts.iter().enumerate() {
                let val = if li == lj { area / 6.0 } else { area / 12.0 };
                m[(gi, gj)] += val;
            }
        }
    }
    m
}

/// Assembles `diffusion * int grad(phi_j) . grad(phi_i) + int (V . grad(phi_j)) phi_i`.
///
/// The advection term uses the three-edge-midpoint rule, which is exact for
/// the quadratic integrand produced by an affine field against P1 bases.
pub fn assemble(
    mesh: &Mesh,
    diffusion: f64,
    advection: Option<AffineField>,
) -> Result<FemOperator, FemError> {
    if diffusion <= 0.0 {
        return Err(FemError::NonPositiveDiffusion(diffusion));
    }
    let n = mesh.node_count();
    let mut a = DMatrix::zeros(n, n);
    for t in 0..mesh.triangle_count() {
        let (p, area, grads) = mesh.triangle_geometry(t);
        let verts = mesh.triangles[t];
        for (li, &gi) in verts.iter().enumerate() {
            for (lj, &gj) in verts.iter().enumerate() {
                let stiff = grads[li][0] * grads[lj][0] + grads[li][1] * grads[lj][1];
                a[(gi, gj)] += diffusion * stiff * area;
            }
        }
        if let Some(field) = advection {
            // Edge midpoints; phi_i is 1/2 on its two adjacent midpoints.
            let mids = [
                [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
                [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
                [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
            ];
            // phi values at midpoints: basis li at midpoint q.
            let phi_mid = |li: usize, q: usize| -> f64 {
                // Midpoint q joins vertices q and (q+1)%3.
                if li == q || li == (q + 1) % 3 {
                    0.5
                } else {
                    0.0
                }
            };
            for (li, &gi) in verts.iter().enumerate() {
                for (lj, &gj) in verts.iter().enumerate() {
                    let mut val = 0.0;
                    for (q, mid) in mids.iter().enumerate() {
                        let v = field.eval(*mid);
                        let conv = v[0] * grads[lj][0] + v[1] * grads[lj][1];
                        val += conv * phi_mid(li, q);
                    }
                    a[(gi, gj)] += val * area / 3.0;
                }
            }
        }
    }
    Ok(FemOperator { matrix: a })
}

/// `a^T M b`, the L2 inner product of two nodal fields.
pub fn l2_inner(mesh: &Mesh, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let m = mass_matrix(mesh);
    (a.transpose() * m * b)[(0, 0)]
}

/// Packed LU factorization with partial pivoting, supporting transpose
/// solves so one factorization serves state and adjoint equations.
#[derive(Clone, Debug)]
pub struct LuFactors {
    packed: DMatrix<f64>,
    pivots: Vec<usize>,
}

impl LuFactors {
    pub fn new(mut a: DMatrix<f64>) -> Result<LuFactors, FemError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                if a[(i, k)].abs() > best {
                    best = a[(i, k)].abs();
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(FemError::SingularSystem);
            }
            pivots[k] = piv;
            if piv != k {
                a.swap_rows(piv, k);
            }
            let diag = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / diag;
                a[(i, k)] = factor;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= factor * akj;
                }
            }
        }
        Ok(LuFactors { packed: a, pivots })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.packed.nrows();
        let mut x = b.clone();
        for k in 0..n {
            x.swap_rows(k, self.pivots[k]);
        }
        for k in 0..n {
            for i in k + 1..n {
                let xk = x[k];
                x[i] -= self.packed[(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            x[k] /= self.packed[(k, k)];
            let xk = x[k];
            for i in 0..k {
                x[i] -= self.packed[(i, k)] * xk;
            }
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.packed.nrows();
        let mut x = b.clone();
        // A^T = U^T L^T P, so solve U^T s = b, then L^T t = s, then x = P^T t.
        for k in 0..n {
            for i in 0..k {
                let xi = x[i];
                x[k] -= self.packed[(i, k)] * xi;
            }
            x[k] /= self.packed[(k, k)];
        }
        for k in (0..n).rev() {
            for i in k + 1..n {
                let xi = x[i];
                x[k] -= self.packed[(i, k)] * xi;
            }
        }
        for k in (0..n).rev() {
            x.swap_rows(k, self.pivots[k]);
        }
        x
    }
}

/// A boundary-reduced linear system: Dirichlet rows and columns eliminated
/// symmetrically, boundary values fixed to zero.
#[derive(Clone, Debug)]
pub struct DirichletSystem {
    free: Vec<usize>,
    lu: LuFactors,
    size: usize,
}

impl DirichletSystem {
    pub fn new(op: &FemOperator, mesh: &Mesh, bc: BoundaryCondition) -> Result<Self, FemError> {
        let free = mesh.free_nodes(bc);
        let nf = free.len();
        let mut reduced = DMatrix::zeros(nf, nf);
        for (i, &gi) in free.iter().enumerate() {
            for (j, &gj) in free.iter().enumerate() {
                reduced[(i, j)] = op.matrix[(gi, gj)];
            }
        }
        let lu = LuFactors::new(reduced)?;
        Ok(DirichletSystem {
            free,
            lu,
            size: mesh.node_count(),
        })
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.free.len(), |i, _| full[self.free[i]])
    }

    fn extend(&self, reduced: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.size);
        for (i, &g) in self.free.iter().enumerate() {
            full[g] = reduced[i];
        }
        full
    }

    /// Solves the reduced system for a full-size load vector, returning the
    /// full-size solution with zero boundary values.
    pub fn solve(&self, load_full: &DVector<f64>) -> DVector<f64> {
        self.extend(&self.lu.solve(&self.restrict(load_full)))
    }

    /// Same with the transposed operator (adjoint equations).
    pub fn solve_transpose(&self, load_full: &DVector<f64>) -> DVector<f64> {
        self.extend(&self.lu.solve_transpose(&self.restrict(load_full)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mesh_counts() {
        let mesh = Mesh::unit_square(8).unwrap();
        assert_eq!(mesh.node_count(), 81);
        assert_eq!(mesh.triangle_count(), 128);
        assert!(Mesh::unit_square(0).is_err());
    }

    #[test]
    fn triangles_have_positive_area() {
        let mesh = Mesh::unit_square(5).unwrap();
        for t in 0..mesh.triangle_count() {
            let (_, area, _) = mesh.triangle_geometry(t);
            assert!(area > 0.0);
        }
    }

    #[test]
    fn mass_matrix_total_mass_is_domain_area() {
        let mesh = Mesh::unit_square(6).unwrap();
        let ones = DVector::from_element(mesh.node_count(), 1.0);
        let total = l2_inner(&mesh, &ones, &ones);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_inner_is_symmetric_and_matches_known_integral() {
        let mesh = Mesh::unit_square(16).unwrap();
        let a = mesh.interpolate(|x, y| (PI * x).sin() * (PI * y).sin());
        let b = mesh.interpolate(|x, y| x * y);
        assert!((l2_inner(&mesh, &a, &b) - l2_inner(&mesh, &b, &a)).abs() < 1e-14);
        // ||sin sin||^2 = 1/4 up to O(h^2) interpolation error.
        let sq = l2_inner(&mesh, &a, &a);
        assert!((sq - 0.25).abs() < 4.0 / (16.0 * 16.0), "{sq}");
    }

    #[test]
    fn diffusion_matrix_is_symmetric_with_constant_kernel() {
        let mesh = Mesh::unit_square(8).unwrap();
        let op = assemble(&mesh, 1.0, None).unwrap();
        let asym = (&op.matrix - op.matrix.transpose())
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(asym < 1e-14);
        // Row sums vanish: constants are in the kernel without boundary
        // conditions.
        let ones = DVector::from_element(mesh.node_count(), 1.0);
        let rowsum = (&op.matrix * ones).abs().max();
        assert!(rowsum < 1e-12, "{rowsum}");
    }

    #[test]
    fn assemble_rejects_nonpositive_diffusion() {
        let mesh = Mesh::unit_square(4).unwrap();
        assert!(assemble(&mesh, 0.0, None).is_err());
        assert!(assemble(&mesh, -2.0, None).is_err());
    }

    #[test]
    fn advection_row_applied_to_linear_field_matches_quadrature() {
        // With V = (1,0) and z = x_1, (V . grad z) = 1, so B z integrates
        // phi_i over the domain: compare against the mass matrix row sums.
        let mesh = Mesh::unit_square(7).unwrap();
        let field = AffineField {
            constant: [1.0, 0.0],
            linear: [[0.0, 0.0], [0.0, 0.0]],
        };
        let pure_advection = {
            // Assemble with tiny diffusion then subtract it back out.
            let with = assemble(&mesh, 1.0, Some(field)).unwrap();
            let diff = assemble(&mesh, 1.0, None).unwrap();
            &with.matrix - &diff.matrix
        };
        let z = mesh.interpolate(|x, _| x);
        let bz = &pure_advection * z;
        let m = mass_matrix(&mesh);
        let ones = DVector::from_element(mesh.node_count(), 1.0);
        let phi_integrals = m * ones;
        let gap = (&bz - &phi_integrals)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(gap < 1e-13, "{gap}");
    }

    #[test]
    fn spatially_varying_advection_matches_dense_quadrature_oracle() {
        // One triangle entry check with a high-order oracle: integrate
        // (V . grad phi_j) phi_i over a triangle with a 7-point rule.
        let mesh = Mesh::unit_square(3).unwrap();
        let field = AffineField {
            constant: [0.3, 0.0],
            linear: [[-0.7, 0.0], [0.0, 0.7]],
        };
        let with = assemble(&mesh, 1.0, Some(field)).unwrap();
        let diff = assemble(&mesh, 1.0, None).unwrap();
        let b = &with.matrix - &diff.matrix;

        // Degree-5 exact 7-point rule on the reference triangle.
        let w0 = 9.0 / 40.0;
        let w1 = (155.0 - 15f64.sqrt()) / 1200.0;
        let w2 = (155.0 + 15f64.sqrt()) / 1200.0;
        let a1 = (6.0 - 15f64.sqrt()) / 21.0;
        let a2 = (6.0 + 15f64.sqrt()) / 21.0;
        let points: [([f64; 2], f64); 7] = [
            ([1.0 / 3.0, 1.0 / 3.0], w0),
            ([a1, a1], w1),
            ([1.0 - 2.0 * a1, a1], w1),
            ([a1, 1.0 - 2.0 * a1], w1),
            ([a2, a2], w2),
            ([1.0 - 2.0 * a2, a2], w2),
            ([a2, 1.0 - 2.0 * a2], w2),
        ];

        let mut oracle = DMatrix::zeros(mesh.node_count(), mesh.node_count());
        for t in 0..mesh.triangle_count() {
            let (p, area, grads) = mesh.triangle_geometry(t);
            let verts = mesh.triangles[t];
            for (li, &gi) in verts.iter().enumerate() {
                for (lj, &gj) in verts.iter().enumerate() {
                    let mut val = 0.0;
                    for (bary, w) in points.iter() {
                        let l = [1.0 - bary[0] - bary[1], bary[0], bary[1]];
                        let x = [
                            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                        ];
                        let v = field.eval(x);
                        let conv = v[0] * grads[lj][0] + v[1] * grads[lj][1];
                        val += w * conv * l[li];
                    }
                    // Weights sum to one over the reference triangle, so
                    // the physical-triangle integral carries a factor `area`.
                    oracle[(gi, gj)] += area * val;
                }
            }
        }
        let gap = (&b - &oracle).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(gap < 1e-13, "advection assembly mismatch {gap}");
    }

    fn poisson_l2_error(n: usize) -> f64 {
        let mesh = Mesh::unit_square(n).unwrap();
        let op = assemble(&mesh, 1.0, None).unwrap();
        let sys = DirichletSystem::new(&op, &mesh, BoundaryCondition::DirichletAll).unwrap();
        let m = mass_matrix(&mesh);
        let f = mesh.interpolate(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let z = sys.solve(&(&m * f));
        let exact = mesh.interpolate(|x, y| (PI * x).sin() * (PI * y).sin());
        let diff = &z - &exact;
        (diff.transpose() * m * diff)[(0, 0)].sqrt()
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let errors: Vec<f64> = [8usize, 16, 32].iter().map(|&n| poisson_l2_error(n)).collect();
        let slope1 = (errors[0] / errors[1]).log2();
        let slope2 = (errors[1] / errors[2]).log2();
        assert!((slope1 - 2.0).abs() < 0.2, "slope {slope1}");
        assert!((slope2 - 2.0).abs() < 0.2, "slope {slope2}");
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let mesh = Mesh::unit_square(8).unwrap();
        let op = assemble(&mesh, 2.0, None).unwrap();
        let sys = DirichletSystem::new(&op, &mesh, BoundaryCondition::DirichletAll).unwrap();
        let z = sys.solve(&DVector::zeros(mesh.node_count()));
        assert_eq!(z.abs().max(), 0.0);
    }

    #[test]
    fn solution_scales_inversely_with_diffusion() {
        let mesh = Mesh::unit_square(8).unwrap();
        let m = mass_matrix(&mesh);
        let f = mesh.interpolate(|x, y| x + y);
        let load = &m * f;
        let z1 = DirichletSystem::new(
            &assemble(&mesh, 1.0, None).unwrap(),
            &mesh,
            BoundaryCondition::DirichletAll,
        )
        .unwrap()
        .solve(&load);
        let z4 = DirichletSystem::new(
            &assemble(&mesh, 4.0, None).unwrap(),
            &mesh,
            BoundaryCondition::DirichletAll,
        )
        .unwrap()
        .solve(&load);
        let gap = (&z1 - 4.0 * z4).abs().max();
        assert!(gap < 1e-12 * z1.abs().max(), "{gap}");
    }

    #[test]
    fn lu_transpose_solve_matches_direct() {
        let mesh = Mesh::unit_square(4).unwrap();
        let field = AffineField {
            constant: [0.6, 0.0],
            linear: [[-0.2, 0.0], [0.0, 0.2]],
        };
        let op = assemble(&mesh, 0.9, Some(field)).unwrap();
        let sys = DirichletSystem::new(&op, &mesh, BoundaryCondition::DirichletLeft).unwrap();
        let rhs = mesh.interpolate(|x, y| x * x - y);
        let x1 = sys.solve_transpose(&rhs);
        // Oracle: solve with the explicitly transposed operator.
        let op_t = FemOperator {
            matrix: op.matrix.transpose(),
        };
        let sys_t = DirichletSystem::new(&op_t, &mesh, BoundaryCondition::DirichletLeft).unwrap();
        let x2 = sys_t.solve(&rhs);
        assert!((&x1 - &x2).abs().max() < 1e-11);
    }

    #[test]
    fn left_edge_dirichlet_keeps_other_boundaries_free() {
        let mesh = Mesh::unit_square(8).unwrap();
        let free = mesh.free_nodes(BoundaryCondition::DirichletLeft);
        assert_eq!(free.len(), 81 - 9);
        let all = mesh.free_nodes(BoundaryCondition::DirichletAll);
        assert_eq!(all.len(), 49);
    }
}
