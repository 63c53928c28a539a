//! Element loops: the heat system, the Newton tangent system for the
//! mechanics with its thermally coupled right-hand side, the nonlinear
//! residual norm, and symmetric Dirichlet elimination.
//!
//! All integrals use the 2x2 Gauss rule. Zero-traction and zero-flux
//! boundaries are natural and contribute no surface terms.

use crate::constitutive::{elasticity_apply, energy_norm, MaterialParams, SymTensor2, Tangent};
use crate::error::FemError;
use crate::fem::{gauss_rule, map_to_physical, shape_values, DofMap, FieldKind, MappedPoint};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;

/// One linearized system: matrix, right-hand side, and the dof map it was
/// assembled against.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
}

/// Optional body-force hook used by the manufactured-solution runs.
pub type Forcing<'a> = Option<&'a dyn Fn(f64, f64) -> [f64; 2]>;

/// Strain of the interpolated displacement at a mapped point.
fn strain_at(mp: &MappedPoint, cell_nodes: &[usize; 4], u: &[f64]) -> SymTensor2 {
    let mut e = SymTensor2::ZERO;
    for (a, &node) in cell_nodes.iter().enumerate() {
        let ux = u[2 * node];
        let uy = u[2 * node + 1];
        e.xx += mp.grads[a][0] * ux;
        e.yy += mp.grads[a][1] * uy;
        e.xy += 0.5 * (mp.grads[a][1] * ux + mp.grads[a][0] * uy);
    }
    e
}

/// Strains of the eight local vector basis functions at a mapped point,
/// ordered (node, component).
fn basis_strains(mp: &MappedPoint) -> [SymTensor2; 8] {
    let mut out = [SymTensor2::ZERO; 8];
    for a in 0..4 {
        let gx = mp.grads[a][0];
        let gy = mp.grads[a][1];
        out[2 * a] = SymTensor2::new(gx, 0.0, 0.5 * gy);
        out[2 * a + 1] = SymTensor2::new(0.0, gy, 0.5 * gx);
    }
    out
}

fn theta_gradient(mp: &MappedPoint, cell_nodes: &[usize; 4], theta: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (a, &node) in cell_nodes.iter().enumerate() {
        g[0] += mp.grads[a][0] * theta[node];
        g[1] += mp.grads[a][1] * theta[node];
    }
    g
}

/// Heat system before constraints: A_ij = int k grad(phi_i) . grad(phi_j),
/// b_i = int g phi_i.
pub fn assemble_heat(
    mesh: &Mesh,
    params: &MaterialParams,
    dof_map: &DofMap,
) -> Result<SparseSystem, FemError> {
    assert_eq!(dof_map.kind, FieldKind::Scalar);
    if dof_map.n_constrained() == 0 {
        return Err(FemError::EmptyDirichletSet);
    }
    let rule = gauss_rule(2)?;
    let mut triplets = Vec::with_capacity(mesh.n_cells() * 64);
    let mut rhs = vec![0.0; dof_map.n_dofs];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let coords = mesh.cell_coords(c);
        for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_to_physical(&coords, xi, eta)?;
            let jw = w * mp.det_j;
            let n = shape_values(xi, eta);
            for a in 0..4 {
                let i = cell.nodes[a];
                rhs[i] += jw * params.g * n[a];
                for b in 0..4 {
                    let j = cell.nodes[b];
                    let v = jw
                        * params.k
                        * (mp.grads[a][0] * mp.grads[b][0] + mp.grads[a][1] * mp.grads[b][1]);
                    triplets.push((i, j, v));
                }
            }
        }
    }
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(dof_map.n_dofs, &triplets),
        rhs,
        dof_map: dof_map.clone(),
    })
}

/// Newton tangent system at the state `u`, before constraints.
///
/// Matrix: int DL(eps(u))[eps(phi_j)] : eps(phi_i).
/// Rhs:    -int alpha grad(theta) . phi_i - int L(eps(u)) : eps(phi_i)
///         (+ int f . phi_i when a forcing hook is given).
pub fn assemble_newton_system(
    mesh: &Mesh,
    params: &MaterialParams,
    u: &[f64],
    theta: &[f64],
    dof_map: &DofMap,
    forcing: Forcing,
) -> Result<SparseSystem, FemError> {
    assert_eq!(dof_map.kind, FieldKind::Vector);
    assert_eq!(u.len(), dof_map.n_dofs);
    assert_eq!(theta.len(), mesh.n_nodes());
    let rule = gauss_rule(2)?;
    let alpha = params.alpha();
    let mut triplets = Vec::with_capacity(mesh.n_cells() * 256);
    let mut rhs = vec![0.0; dof_map.n_dofs];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let coords = mesh.cell_coords(c);
        for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_to_physical(&coords, xi, eta)?;
            let jw = w * mp.det_j;
            let n = shape_values(xi, eta);
            let eps_n = strain_at(&mp, &cell.nodes, u);
            let tangent = Tangent::at(eps_n, params).map_err(|e| match e {
                FemError::StrainLimitViolation { energy_norm, .. } => {
                    FemError::CoercivityViolation {
                        cell: c,
                        energy_norm,
                    }
                }
                other => other,
            })?;
            let grad_theta = theta_gradient(&mp, &cell.nodes, theta);
            let basis = basis_strains(&mp);
            // E applied to each basis strain, and the two scalar products
            // the tangent bilinear form is built from.
            let mut e_basis = [SymTensor2::ZERO; 8];
            let mut en_dot = [0.0f64; 8];
            for l in 0..8 {
                e_basis[l] = elasticity_apply(basis[l], params);
                en_dot[l] = tangent.e_n.ddot(&basis[l]);
            }
            let stress_n = tangent.e_n * tangent.psi; // L(eps(u)) at this point
            for a in 0..4 {
                for comp in 0..2 {
                    let li = 2 * a + comp;
                    let i = 2 * cell.nodes[a] + comp;
                    let mut f = -alpha * grad_theta[comp] * n[a] - stress_n.ddot(&basis[li]);
                    if let Some(body) = forcing {
                        f += body(mp.x, mp.y)[comp] * n[a];
                    }
                    rhs[i] += jw * f;
                    for b in 0..4 {
                        for comp_j in 0..2 {
                            let lj = 2 * b + comp_j;
                            let j = 2 * cell.nodes[b] + comp_j;
                            let v = tangent.psi * e_basis[lj].ddot(&basis[li])
                                + tangent.second_coef * en_dot[lj] * en_dot[li];
                            triplets.push((i, j, jw * v));
                        }
                    }
                }
            }
        }
    }
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(dof_map.n_dofs, &triplets),
        rhs,
        dof_map: dof_map.clone(),
    })
}

/// Euclidean norm over the free dofs of the nonlinear residual
/// R_i = int L(eps(u)) : eps(phi_i) + int alpha grad(theta) . phi_i
///       (- int f . phi_i with a forcing hook).
///
/// Assembled in its own loop rather than reusing the Newton rhs.
pub fn assemble_residual_norm(
    mesh: &Mesh,
    params: &MaterialParams,
    u: &[f64],
    theta: &[f64],
    dof_map: &DofMap,
    forcing: Forcing,
) -> Result<f64, FemError> {
    assert_eq!(dof_map.kind, FieldKind::Vector);
    let rule = gauss_rule(2)?;
    let alpha = params.alpha();
    let mut residual = vec![0.0; dof_map.n_dofs];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let coords = mesh.cell_coords(c);
        for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_to_physical(&coords, xi, eta)?;
            let jw = w * mp.det_j;
            let n = shape_values(xi, eta);
            let eps_n = strain_at(&mp, &cell.nodes, u);
            let nrm = energy_norm(eps_n, params);
            let psi = crate::constitutive::psi(nrm, params).map_err(|_| {
                FemError::CoercivityViolation {
                    cell: c,
                    energy_norm: nrm,
                }
            })?;
            let stress = elasticity_apply(eps_n, params) * psi;
            let grad_theta = theta_gradient(&mp, &cell.nodes, theta);
            let basis = basis_strains(&mp);
            for a in 0..4 {
                for comp in 0..2 {
                    let i = 2 * cell.nodes[a] + comp;
                    let mut r = stress.ddot(&basis[2 * a + comp]) + alpha * grad_theta[comp] * n[a];
                    if let Some(body) = forcing {
                        r -= body(mp.x, mp.y)[comp] * n[a];
                    }
                    residual[i] += jw * r;
                }
            }
        }
    }
    let mut s = 0.0;
    for (i, r) in residual.iter().enumerate() {
        if !dof_map.is_constrained(i) {
            s += r * r;
        }
    }
    Ok(s.sqrt())
}

/// Symmetric Dirichlet elimination: constrained columns move to the rhs,
/// constrained rows become identity rows carrying the prescribed value.
pub fn apply_dirichlet(system: SparseSystem, dof_map: &DofMap) -> SparseSystem {
    let mut m = system.matrix;
    let mut rhs = system.rhs;
    for i in 0..m.n {
        if let Some(v) = dof_map.constraints[i] {
            rhs[i] = v;
        }
    }
    for i in 0..m.n {
        let row_constrained = dof_map.is_constrained(i);
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let j = m.col_idx[k];
            if row_constrained {
                m.values[k] = if j == i { 1.0 } else { 0.0 };
            } else if let Some(v) = dof_map.constraints[j] {
                rhs[i] -= m.values[k] * v;
                m.values[k] = 0.0;
            }
        }
    }
    SparseSystem {
        matrix: m,
        rhs,
        dof_map: dof_map.clone(),
    }
}
