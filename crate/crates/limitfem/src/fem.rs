//! Q1 reference element, Gauss quadrature, isoparametric mapping, and
//! degree-of-freedom bookkeeping for scalar and vector fields.

use crate::error::FemError;
use crate::mesh::{BoundaryTag, Mesh};

/// Reference-cell node positions, counterclockwise from (-1, -1).
pub const REF_NODES: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Bilinear nodal basis values at a reference point.
pub fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Basis gradients in reference coordinates: `[i][0]` is d/dxi, `[i][1]`
/// is d/deta.
pub fn shape_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

// Gauss-Legendre abscissae/weights on [-1, 1].
const GAUSS_1D: [(&[f64], &[f64]); 5] = [
    (&[0.0], &[2.0]),
    (
        &[-0.5773502691896257, 0.5773502691896257],
        &[1.0, 1.0],
    ),
    (
        &[-0.7745966692414834, 0.0, 0.7745966692414834],
        &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
    ),
    (
        &[
            -0.8611363115940526,
            -0.3399810435848563,
            0.3399810435848563,
            0.8611363115940526,
        ],
        &[
            0.3478548451374537,
            0.6521451548625462,
            0.6521451548625462,
            0.3478548451374537,
        ],
    ),
    (
        &[
            -0.9061798459386640,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.9061798459386640,
        ],
        &[
            0.2369268850561894,
            0.4786286704993662,
            0.5688888888888889,
            0.4786286704993662,
            0.2369268850561894,
        ],
    ),
];

/// Tensor-product Gauss-Legendre rule, exact through degree 2n-1 per axis.
pub fn gauss_rule(points_per_axis: usize) -> Result<QuadratureRule, FemError> {
    if !(1..=5).contains(&points_per_axis) {
        return Err(FemError::UnsupportedQuadrature(points_per_axis));
    }
    let (xs, ws) = GAUSS_1D[points_per_axis - 1];
    let mut points = Vec::with_capacity(points_per_axis * points_per_axis);
    let mut weights = Vec::with_capacity(points_per_axis * points_per_axis);
    for (j, &eta) in xs.iter().enumerate() {
        for (i, &xi) in xs.iter().enumerate() {
            points.push((xi, eta));
            weights.push(ws[i] * ws[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Isoparametric data at one reference point of one cell.
#[derive(Clone, Copy, Debug)]
pub struct MappedPoint {
    pub x: f64,
    pub y: f64,
    pub det_j: f64,
    /// Physical basis gradients: `[i][0]` is dN_i/dx, `[i][1]` is dN_i/dy.
    pub grads: [[f64; 2]; 4],
}

/// Map a reference point into a cell given its corner coordinates.
pub fn map_to_physical(
    coords: &[[f64; 2]; 4],
    xi: f64,
    eta: f64,
) -> Result<MappedPoint, FemError> {
    let n = shape_values(xi, eta);
    let dn = shape_gradients(xi, eta);
    let mut x = 0.0;
    let mut y = 0.0;
    // J = [dx/dxi dx/deta; dy/dxi dy/deta]
    let mut j = [[0.0f64; 2]; 2];
    for i in 0..4 {
        x += n[i] * coords[i][0];
        y += n[i] * coords[i][1];
        j[0][0] += dn[i][0] * coords[i][0];
        j[0][1] += dn[i][1] * coords[i][0];
        j[1][0] += dn[i][0] * coords[i][1];
        j[1][1] += dn[i][1] * coords[i][1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det <= 0.0 {
        return Err(FemError::NonPositiveJacobian { det });
    }
    // grad_x N = J^{-T} grad_xi N
    let inv = [
        [j[1][1] / det, -j[1][0] / det],
        [-j[0][1] / det, j[0][0] / det],
    ];
    let mut grads = [[0.0f64; 2]; 4];
    for i in 0..4 {
        grads[i][0] = inv[0][0] * dn[i][0] + inv[0][1] * dn[i][1];
        grads[i][1] = inv[1][0] * dn[i][0] + inv[1][1] * dn[i][1];
    }
    Ok(MappedPoint { x, y, det_j: det, grads })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
}

impl FieldKind {
    pub fn components(&self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 2,
        }
    }
}

/// One Dirichlet prescription: a boundary tag, a field component, and a
/// value function of position. When two prescriptions meet at a node the
/// higher priority wins; equal priorities with different values are an
/// error.
#[derive(Clone, Copy)]
pub struct DirichletBc {
    pub tag: BoundaryTag,
    pub component: usize,
    pub value: fn(f64, f64) -> f64,
    pub priority: i32,
}

/// Dof numbering plus the constrained set. Vector fields interleave
/// (u_x, u_y) per node, so dof = node * components + component.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub kind: FieldKind,
    pub n_dofs: usize,
    /// Prescribed value per dof, `None` for free dofs.
    pub constraints: Vec<Option<f64>>,
}

impl DofMap {
    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.kind.components() + component
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constraints[dof].is_some()
    }

    pub fn n_constrained(&self) -> usize {
        self.constraints.iter().filter(|c| c.is_some()).count()
    }

    /// Same constrained set with all prescribed values zeroed; used for
    /// Newton increments, which must not move the boundary data.
    pub fn homogeneous(&self) -> DofMap {
        DofMap {
            kind: self.kind,
            n_dofs: self.n_dofs,
            constraints: self
                .constraints
                .iter()
                .map(|c| c.map(|_| 0.0))
                .collect(),
        }
    }
}

pub fn build_dof_map(
    mesh: &Mesh,
    kind: FieldKind,
    bcs: &[DirichletBc],
) -> Result<DofMap, FemError> {
    let ncomp = kind.components();
    let n_dofs = mesh.n_nodes() * ncomp;
    let mut constraints: Vec<Option<f64>> = vec![None; n_dofs];
    let mut priorities: Vec<i32> = vec![i32::MIN; n_dofs];

    for bc in bcs {
        if bc.component >= ncomp {
            return Err(FemError::InvalidArgument(format!(
                "component {} out of range for {:?} field",
                bc.component, kind
            )));
        }
        for node in mesh.nodes_on_tag(bc.tag) {
            let dof = node * ncomp + bc.component;
            let v = (bc.value)(mesh.nodes[node].x, mesh.nodes[node].y);
            match constraints[dof] {
                None => {
                    constraints[dof] = Some(v);
                    priorities[dof] = bc.priority;
                }
                Some(existing) => {
                    let same = (existing - v).abs()
                        <= 1e-12 * existing.abs().max(v.abs()).max(1.0);
                    if same {
                        priorities[dof] = priorities[dof].max(bc.priority);
                    } else if bc.priority > priorities[dof] {
                        constraints[dof] = Some(v);
                        priorities[dof] = bc.priority;
                    } else if bc.priority == priorities[dof] {
                        return Err(FemError::ConflictingConstraint {
                            dof,
                            existing,
                            requested: v,
                        });
                    }
                }
            }
        }
    }
    Ok(DofMap {
        kind,
        n_dofs,
        constraints,
    })
}
