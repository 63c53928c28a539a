//! Manufactured-solution verification of the nonlinear mechanics solver.
//!
//! The exact displacement u*(x, y) = (sin x sin y, cos x cos y) has a
//! trace-free diagonal strain c(x, y) diag(1, -1) with c = cos x sin y, so
//! the stress is s(c) diag(1, -1) with s(c) = 2 mu c Psi(2 sqrt(mu) c) and
//! the consistent body force comes out in closed form:
//!   f = s'(c) (sin x sin y, cos x cos y),
//!   s'(c) = 2 mu (1 - g)^-(1 + 1/a),  g = (2 sqrt(mu) beta c)^a.
//! The boundary data are the trace of u* on all four sides; the temperature
//! is zero throughout, so only the mechanics is exercised.

use crate::constitutive::{energy_norm, stress_from_strain, MaterialParams, SymTensor2};
use crate::error::FemError;
use crate::fem::{
    build_dof_map, gauss_rule, map_to_physical, shape_values, DirichletBc, FieldKind,
};
use crate::mesh::{build_unit_square, BoundaryTag, Mesh};
use crate::solver::{newton_solve, Model, NewtonConfig};
use std::io::{self, Write};

/// Parameters of the verification run: unit Lame coefficients and
/// (a, beta) = (1, 0.5); the thermal constants are inert here.
pub fn mms_params() -> MaterialParams {
    MaterialParams {
        lambda: 1.0,
        mu: 1.0,
        a: 1.0,
        beta: 0.5,
        k: 1.0,
        g: 0.0,
        alpha_t: 0.0,
    }
}

pub fn exact_displacement(x: f64, y: f64) -> [f64; 2] {
    [x.sin() * y.sin(), x.cos() * y.cos()]
}

pub fn exact_strain(x: f64, y: f64) -> SymTensor2 {
    let c = x.cos() * y.sin();
    SymTensor2::new(c, -c, 0.0)
}

/// Closed-form stress of the manufactured field.
pub fn exact_stress(x: f64, y: f64, p: &MaterialParams) -> Result<SymTensor2, FemError> {
    stress_from_strain(exact_strain(x, y), p)
}

/// Consistent body force f = -div L(eps(u*)), in closed form for any
/// (lambda, mu, a, beta); the strain is trace-free so lambda drops out.
pub fn manufactured_forcing(x: f64, y: f64, p: &MaterialParams) -> [f64; 2] {
    let c = x.cos() * y.sin();
    let sp = if p.beta == 0.0 {
        2.0 * p.mu
    } else {
        let g = (2.0 * p.mu.sqrt() * p.beta * c).powf(p.a);
        2.0 * p.mu * (1.0 - g).powf(-(1.0 + 1.0 / p.a))
    };
    [sp * x.sin() * y.sin(), sp * x.cos() * y.cos()]
}

/// Largest beta * energy_norm(eps(u*)) over a fine sample grid; must stay
/// below 1 for the study to be inside the coercive region.
pub fn coercive_margin(p: &MaterialParams) -> f64 {
    let n = 200;
    let mut worst = 0.0f64;
    for j in 0..=n {
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            worst = worst.max(p.beta * energy_norm(exact_strain(x, y), p));
        }
    }
    worst
}

fn ux(x: f64, y: f64) -> f64 {
    exact_displacement(x, y)[0]
}

fn uy(x: f64, y: f64) -> f64 {
    exact_displacement(x, y)[1]
}

/// Dirichlet trace of the exact displacement on the whole boundary.
pub fn boundary_trace_bcs() -> Vec<DirichletBc> {
    let mut bcs = Vec::new();
    for tag in [
        BoundaryTag::Gamma1,
        BoundaryTag::Gamma2,
        BoundaryTag::Gamma3,
        BoundaryTag::Gamma4,
    ] {
        bcs.push(DirichletBc {
            tag,
            component: 0,
            value: ux,
            priority: 0,
        });
        bcs.push(DirichletBc {
            tag,
            component: 1,
            value: uy,
            priority: 0,
        });
    }
    bcs
}

/// L2 norm of the difference between a nodal vector field and an exact
/// field, integrated with the 3x3 rule (two orders above assembly).
pub fn l2_error(mesh: &Mesh, u_h: &[f64], exact: impl Fn(f64, f64) -> [f64; 2]) -> f64 {
    let rule = gauss_rule(3).expect("3x3 rule is supported");
    let mut err2 = 0.0;
    for (c, cell) in mesh.cells.iter().enumerate() {
        let coords = mesh.cell_coords(c);
        for (&(xi, eta), &w) in rule.points.iter().zip(&rule.weights) {
            let mp = map_to_physical(&coords, xi, eta).expect("valid cell");
            let n = shape_values(xi, eta);
            let mut uh = [0.0f64; 2];
            for (a, &node) in cell.nodes.iter().enumerate() {
                uh[0] += n[a] * u_h[2 * node];
                uh[1] += n[a] * u_h[2 * node + 1];
            }
            let ue = exact(mp.x, mp.y);
            err2 += w * mp.det_j * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
        }
    }
    err2.sqrt()
}

/// L2 norm of a nodal vector field itself (3x3 rule).
pub fn l2_norm_of_field(mesh: &Mesh, u_h: &[f64]) -> f64 {
    l2_error(mesh, u_h, |_, _| [0.0, 0.0])
}

#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub cycle: usize,
    pub h: f64,
    pub n_dofs: usize,
    pub l2_error: f64,
    /// Dof-based reduction rate
    /// d ln(error_{i-1} / error_i) / ln(dofs_i / dofs_{i-1}) with d = 2;
    /// absent on the first row. Tends to 2 for an O(h^2) method and starts
    /// above it because the dof ratio is below 4 on coarse grids.
    pub rate: Option<f64>,
}

/// Bilinear interpolation of a coarse nodal vector field onto a finer
/// uniform grid of the same square, with the fine Dirichlet values
/// re-imposed on the constrained dofs.
fn project_to_fine(coarse: &Mesh, u_coarse: &[f64], fine: &Mesh, fine_map: &crate::fem::DofMap) -> Vec<f64> {
    let nc = (1.0 / coarse.h).round() as usize;
    let mut u = vec![0.0; 2 * fine.n_nodes()];
    for (i, node) in fine.nodes.iter().enumerate() {
        let ic = ((node.x / coarse.h) as usize).min(nc - 1);
        let jc = ((node.y / coarse.h) as usize).min(nc - 1);
        let xi = (node.x - ic as f64 * coarse.h) / coarse.h * 2.0 - 1.0;
        let eta = (node.y - jc as f64 * coarse.h) / coarse.h * 2.0 - 1.0;
        let n = shape_values(xi, eta);
        let cell = &coarse.cells[jc * nc + ic];
        for comp in 0..2 {
            u[2 * i + comp] = (0..4)
                .map(|a| n[a] * u_coarse[2 * cell.nodes[a] + comp])
                .sum();
        }
    }
    for (dof, c) in fine_map.constraints.iter().enumerate() {
        if let Some(v) = c {
            u[dof] = *v;
        }
    }
    u
}

/// Run the h-convergence study: cycle i uses the uniform mesh with edge
/// length 0.5^i and solves the nonlinear mechanics with the manufactured
/// forcing and boundary trace. The first cycle starts Newton from the
/// linear (beta = 0) solve; each finer cycle starts from the previous
/// converged solution projected onto its mesh, which keeps all iterates
/// inside the coercive region.
pub fn convergence_study(cycles: usize) -> Result<Vec<ConvergenceRow>, FemError> {
    if cycles < 2 {
        return Err(FemError::InvalidArgument(
            "convergence study needs at least 2 cycles".into(),
        ));
    }
    let p = mms_params();
    let margin = coercive_margin(&p);
    if margin >= 1.0 {
        return Err(FemError::InvalidParams(format!(
            "manufactured field leaves the coercive region: beta * energy norm reaches {margin}"
        )));
    }
    let cfg = NewtonConfig::default();
    let forcing = move |x: f64, y: f64| manufactured_forcing(x, y, &p);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cycles);
    let mut previous: Option<(Mesh, Vec<f64>)> = None;
    for cycle in 1..=cycles {
        let mesh = build_unit_square(cycle as u32);
        let map = build_dof_map(&mesh, FieldKind::Vector, &boundary_trace_bcs())?;
        let theta = vec![0.0; mesh.n_nodes()];
        let initial = previous
            .as_ref()
            .map(|(cm, cu)| project_to_fine(cm, cu, &mesh, &map));
        let state = newton_solve(
            &mesh,
            &p,
            &theta,
            &map,
            Some(&forcing),
            Model::Nonlinear,
            &cfg,
            initial.as_deref(),
        )?;
        if !state.converged {
            return Err(FemError::NewtonDidNotConverge {
                residual: *state.newton_history.last().unwrap_or(&f64::NAN),
                tol: cfg.tol,
            });
        }
        let error = l2_error(&mesh, &state.u, exact_displacement);
        let n_dofs = map.n_dofs;
        let rate = rows.last().map(|prev: &ConvergenceRow| {
            2.0 * (prev.l2_error / error).ln() / (n_dofs as f64 / prev.n_dofs as f64).ln()
        });
        rows.push(ConvergenceRow {
            cycle,
            h: mesh.h,
            n_dofs,
            l2_error: error,
            rate,
        });
        previous = Some((mesh, state.u));
    }
    Ok(rows)
}

/// CSV export with columns cycle, h, l2_error, rate (empty on row one).
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "cycle,h,l2_error,rate")?;
    for r in rows {
        match r.rate {
            Some(rate) => writeln!(w, "{},{},{:.12e},{:.6}", r.cycle, r.h, r.l2_error, rate)?,
            None => writeln!(w, "{},{},{:.12e},", r.cycle, r.h, r.l2_error)?,
        }
    }
    Ok(())
}
