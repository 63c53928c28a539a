//! Field recovery and export: nodal stress/strain by area-weighted corner
//! averaging, crack reference-line profiles, legacy VTK and CSV writers.

use crate::constitutive::{elasticity_apply, energy_norm, MaterialParams, SymTensor2};
use crate::error::FemError;
use crate::fem::{gauss_rule, map_to_physical, REF_NODES};
use crate::mesh::Mesh;
use crate::solver::{Model, SolutionState};
use std::io::{self, Write};

/// Nodal values of every recovered quantity. Duplicated crack nodes carry
/// their own side's value because averaging only visits the cells that
/// actually reference each node copy.
#[derive(Clone, Debug)]
pub struct RecoveredFields {
    pub method: &'static str,
    /// Set when a strain exceeded the limit during recovery (possible on
    /// non-converged states); the amplification is then clamped.
    pub limit_violated: bool,
    pub theta: Vec<f64>,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    pub t_xx: Vec<f64>,
    pub t_yy: Vec<f64>,
    pub t_xy: Vec<f64>,
    pub eps_xx: Vec<f64>,
    pub eps_yy: Vec<f64>,
    pub eps_xy: Vec<f64>,
}

impl RecoveredFields {
    /// Export list in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("theta", &self.theta),
            ("u_x", &self.u_x),
            ("u_y", &self.u_y),
            ("T_xx", &self.t_xx),
            ("T_yy", &self.t_yy),
            ("T_xy", &self.t_xy),
            ("eps_xx", &self.eps_xx),
            ("eps_yy", &self.eps_yy),
            ("eps_xy", &self.eps_xy),
        ]
    }
}

/// Stress amplification with the strain limit clamped a hair inside the
/// admissible region; non-converged states can carry strains past the
/// limit and must still recover to finite values.
fn psi_clamped(n: f64, p: &MaterialParams) -> (f64, bool) {
    if p.beta == 0.0 {
        return (1.0, false);
    }
    let t = (p.beta * n).powf(p.a);
    if t >= 1.0 - 1e-6 {
        ((1e-6f64).powf(-1.0 / p.a), true)
    } else {
        ((1.0 - t).powf(-1.0 / p.a), false)
    }
}

/// Recover nodal strain and mechanical stress from the displacement field.
///
/// Strains are evaluated at the four corners of every cell and averaged
/// per node with the cell area as weight; the nodal stress is the
/// constitutive map applied to the averaged nodal strain, so stress and
/// strain stay exactly consistent at every node. `include_thermal`
/// subtracts alpha theta I from the exported stress (the default export
/// is the mechanical stress alone).
pub fn recover_fields(
    mesh: &Mesh,
    params: &MaterialParams,
    state: &SolutionState,
    include_thermal: bool,
) -> RecoveredFields {
    let n_nodes = mesh.n_nodes();
    let alpha = params.alpha();
    let mut weight = vec![0.0f64; n_nodes];
    let mut acc: Vec<[f64; 3]> = vec![[0.0; 3]; n_nodes]; // exx eyy exy
    let rule = gauss_rule(2).expect("2x2 rule");

    for (c, cell) in mesh.cells.iter().enumerate() {
        let coords = mesh.cell_coords(c);
        let area: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(&(xi, eta), &w)| w * map_to_physical(&coords, xi, eta).unwrap().det_j)
            .sum();
        for (corner, &(xi, eta)) in REF_NODES.iter().enumerate() {
            let mp = map_to_physical(&coords, xi, eta).expect("valid cell");
            let mut e = SymTensor2::ZERO;
            for (a, &node) in cell.nodes.iter().enumerate() {
                let ux = state.u[2 * node];
                let uy = state.u[2 * node + 1];
                e.xx += mp.grads[a][0] * ux;
                e.yy += mp.grads[a][1] * uy;
                e.xy += 0.5 * (mp.grads[a][1] * ux + mp.grads[a][0] * uy);
            }
            let node = cell.nodes[corner];
            weight[node] += area;
            acc[node][0] += area * e.xx;
            acc[node][1] += area * e.yy;
            acc[node][2] += area * e.xy;
        }
    }

    let mut out = RecoveredFields {
        method: "area-weighted corner averaging",
        limit_violated: false,
        theta: state.theta.clone(),
        u_x: vec![0.0; n_nodes],
        u_y: vec![0.0; n_nodes],
        t_xx: vec![0.0; n_nodes],
        t_yy: vec![0.0; n_nodes],
        t_xy: vec![0.0; n_nodes],
        eps_xx: vec![0.0; n_nodes],
        eps_yy: vec![0.0; n_nodes],
        eps_xy: vec![0.0; n_nodes],
    };
    for node in 0..n_nodes {
        out.u_x[node] = state.u[2 * node];
        out.u_y[node] = state.u[2 * node + 1];
        let w = weight[node].max(f64::MIN_POSITIVE);
        let e = SymTensor2::new(acc[node][0] / w, acc[node][1] / w, acc[node][2] / w);
        out.eps_xx[node] = e.xx;
        out.eps_yy[node] = e.yy;
        out.eps_xy[node] = e.xy;
        let (psi, clamped) = psi_clamped(energy_norm(e, params), params);
        out.limit_violated |= clamped;
        let mut t = elasticity_apply(e, params) * psi;
        if include_thermal {
            let th = state.theta[node];
            t.xx -= alpha * th;
            t.yy -= alpha * th;
        }
        out.t_xx[node] = t.xx;
        out.t_yy[node] = t.yy;
        out.t_xy[node] = t.xy;
    }
    out
}

/// Samples of one nodal quantity along the reference line y = 0.5,
/// 0 <= x <= 0.5, ending at the crack tip.
#[derive(Clone, Debug)]
pub struct LineProfile {
    pub model: Model,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Interpolate a nodal field along the reference line. The line lies left
/// of the slit, so only shared nodes (and the tip itself) are touched;
/// duplicated crack pairs never enter.
pub fn sample_reference_line(
    mesh: &Mesh,
    nodal: &[f64],
    n_samples: usize,
    model: Model,
) -> Result<LineProfile, FemError> {
    if mesh.tip_node.is_none() {
        return Err(FemError::InvalidArgument(
            "reference line profiles need a slit mesh with a crack tip".into(),
        ));
    }
    if n_samples < 2 {
        return Err(FemError::InvalidArgument(
            "need at least 2 samples on the reference line".into(),
        ));
    }
    let mut line: Vec<(f64, f64)> = mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| (n.y - 0.5).abs() < 1e-12 && n.x <= 0.5 + 1e-12)
        .map(|(i, n)| (n.x, nodal[i]))
        .collect();
    line.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut xs = Vec::with_capacity(n_samples);
    let mut values = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let x = 0.5 * k as f64 / (n_samples - 1) as f64;
        let j = line
            .partition_point(|&(nx, _)| nx <= x + 1e-14)
            .clamp(1, line.len() - 1);
        let (x0, v0) = line[j - 1];
        let (x1, v1) = line[j];
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        xs.push(x);
        values.push(v0 + t * (v1 - v0));
    }
    Ok(LineProfile { model, xs, values })
}

/// Legacy ASCII VTK (version 3.0) unstructured grid with quad cells
/// (type 9) and one scalar point-data section per field.
pub fn write_vtk<W: Write>(
    mesh: &Mesh,
    fields: &[(&str, &[f64])],
    w: &mut W,
) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "limitfem fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} float", mesh.n_nodes())?;
    for n in &mesh.nodes {
        writeln!(w, "{} {} 0", n.x as f32, n.y as f32)?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_cells(), 5 * mesh.n_cells())?;
    for c in &mesh.cells {
        writeln!(w, "4 {} {} {} {}", c.nodes[0], c.nodes[1], c.nodes[2], c.nodes[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_cells())?;
    for _ in 0..mesh.n_cells() {
        writeln!(w, "9")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
    for (name, values) in fields {
        assert_eq!(values.len(), mesh.n_nodes(), "field {name} size mismatch");
        writeln!(w, "SCALARS {name} float 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(w, "{}", *v as f32)?;
        }
    }
    Ok(())
}

/// CSV layout: header `x,value,model`, one row per sample, 13 significant
/// digits.
pub fn write_profile_csv<W: Write>(profile: &LineProfile, w: &mut W) -> io::Result<()> {
    writeln!(w, "x,value,model")?;
    for (x, v) in profile.xs.iter().zip(&profile.values) {
        writeln!(w, "{:.12e},{:.12e},{}", x, v, profile.model.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_slit_square, build_unit_square};
    use crate::solver::{
        run_experiment, solve_heat, Domain, NewtonConfig, TemperatureCase,
    };
    use approx::assert_relative_eq;

    fn unit_params() -> MaterialParams {
        MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            ..Default::default()
        }
    }

    fn state_from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> [f64; 2]) -> SolutionState {
        let mut u = vec![0.0; 2 * mesh.n_nodes()];
        for (i, n) in mesh.nodes.iter().enumerate() {
            let v = f(n.x, n.y);
            u[2 * i] = v[0];
            u[2 * i + 1] = v[1];
        }
        SolutionState {
            theta: vec![0.0; mesh.n_nodes()],
            u,
            newton_history: vec![],
            converged: true,
        }
    }

    #[test]
    fn uniaxial_stretch_patch() {
        // u = (0, y) with beta = 0: eps_yy = 1 and T_yy = 2 mu + lambda = 3
        let mesh = build_unit_square(2);
        let p = unit_params().with_beta(0.0);
        let state = state_from_fn(&mesh, |_, y| [0.0, y]);
        let f = recover_fields(&mesh, &p, &state, false);
        for node in 0..mesh.n_nodes() {
            assert_relative_eq!(f.eps_yy[node], 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.t_yy[node], 3.0, epsilon = 1e-12);
            assert_relative_eq!(f.eps_xx[node], 0.0, epsilon = 1e-13);
            assert_relative_eq!(f.t_xx[node], 1.0, epsilon = 1e-12); // lambda tr(eps)
        }
        assert!(!f.limit_violated);
    }

    #[test]
    fn zero_displacement_recovers_zero() {
        let mesh = build_unit_square(2);
        let p = unit_params();
        let state = state_from_fn(&mesh, |_, _| [0.0, 0.0]);
        let f = recover_fields(&mesh, &p, &state, false);
        for node in 0..mesh.n_nodes() {
            for v in [
                f.eps_xx[node],
                f.eps_yy[node],
                f.eps_xy[node],
                f.t_xx[node],
                f.t_yy[node],
                f.t_xy[node],
                f.u_x[node],
                f.u_y[node],
            ] {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn affine_patch_recovery_is_exact() {
        let mesh = build_unit_square(1);
        let p = unit_params().with_beta(0.0);
        let state = state_from_fn(&mesh, |x, y| [0.1 * x + 0.3 * y, -0.2 * x + 0.05 * y]);
        let f = recover_fields(&mesh, &p, &state, false);
        for node in 0..mesh.n_nodes() {
            assert_relative_eq!(f.eps_xx[node], 0.1, epsilon = 1e-12);
            assert_relative_eq!(f.eps_yy[node], 0.05, epsilon = 1e-12);
            assert_relative_eq!(f.eps_xy[node], 0.5 * (0.3 - 0.2), epsilon = 1e-12);
        }
    }

    #[test]
    fn thermal_variant_shifts_normal_stress() {
        let mesh = build_unit_square(1);
        let p = unit_params();
        let mut state = state_from_fn(&mesh, |_, _| [0.0, 0.0]);
        state.theta = vec![10.0; mesh.n_nodes()];
        let mech = recover_fields(&mesh, &p, &state, false);
        let total = recover_fields(&mesh, &p, &state, true);
        let alpha = p.alpha();
        for node in 0..mesh.n_nodes() {
            assert_relative_eq!(total.t_xx[node], mech.t_xx[node] - alpha * 10.0, epsilon = 1e-12);
            assert_relative_eq!(total.t_yy[node], mech.t_yy[node] - alpha * 10.0, epsilon = 1e-12);
            assert_relative_eq!(total.t_xy[node], mech.t_xy[node], epsilon = 1e-13);
        }
    }

    #[test]
    fn limit_violation_is_flagged_and_finite() {
        let mesh = build_unit_square(1);
        let p = unit_params(); // limit 1/beta = 50
        let state = state_from_fn(&mesh, |_, y| [0.0, 100.0 * y * y]);
        let f = recover_fields(&mesh, &p, &state, false);
        assert!(f.limit_violated);
        assert!(f.t_yy.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn recovered_stress_consistent_with_strain_map() {
        // nodal T is the constitutive map of the nodal strain
        let p = unit_params();
        let r = run_experiment(
            Domain::Example1,
            TemperatureCase::Case1,
            crate::solver::Model::Nonlinear,
            3,
            &p,
            &NewtonConfig::default(),
        )
        .unwrap();
        let f = recover_fields(&r.mesh, &p, &r.state, false);
        for node in 0..r.mesh.n_nodes() {
            let e = SymTensor2::new(f.eps_xx[node], f.eps_yy[node], f.eps_xy[node]);
            let t = crate::constitutive::stress_from_strain(e, &p).unwrap();
            assert!((t.yy - f.t_yy[node]).abs() < 1e-12 * f.t_yy[node].abs().max(1.0));
            assert!((t.xx - f.t_xx[node]).abs() < 1e-12 * f.t_xx[node].abs().max(1.0));
            // certificate inherited by the recovered strain
            assert!(p.beta * energy_norm(e, &p) < 1.0);
        }
    }

    #[test]
    fn profile_needs_slit_mesh() {
        let mesh = build_unit_square(2);
        let nodal = vec![0.0; mesh.n_nodes()];
        assert!(sample_reference_line(&mesh, &nodal, 5, Model::Linear).is_err());
    }

    #[test]
    fn profile_endpoints_and_ordering() {
        let mesh = build_slit_square(3).unwrap();
        // nodal field = x so interpolation is exact
        let nodal: Vec<f64> = mesh.nodes.iter().map(|n| n.x).collect();
        let two = sample_reference_line(&mesh, &nodal, 2, Model::Linear).unwrap();
        assert_eq!(two.xs, vec![0.0, 0.5]);
        assert_relative_eq!(two.values[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(two.values[1], 0.5, epsilon = 1e-14);
        let many = sample_reference_line(&mesh, &nodal, 9, Model::Nonlinear).unwrap();
        for w in many.xs.windows(2) {
            assert!(w[1] > w[0]);
        }
        for (x, v) in many.xs.iter().zip(&many.values) {
            assert_relative_eq!(v, x, epsilon = 1e-13);
        }
    }

    #[test]
    fn nonlinear_tip_strain_below_linear() {
        let p = unit_params();
        let cfg = NewtonConfig::default();
        let lin = run_experiment(
            Domain::Example2,
            TemperatureCase::Case1,
            Model::Linear,
            4,
            &p,
            &cfg,
        )
        .unwrap();
        let non = run_experiment(
            Domain::Example2,
            TemperatureCase::Case1,
            Model::Nonlinear,
            4,
            &p,
            &cfg,
        )
        .unwrap();
        let fl = recover_fields(&lin.mesh, &p.with_beta(0.0), &lin.state, false);
        let fn_ = recover_fields(&non.mesh, &p, &non.state, false);
        let pl = sample_reference_line(&lin.mesh, &fl.eps_yy, 17, Model::Linear).unwrap();
        let pn = sample_reference_line(&non.mesh, &fn_.eps_yy, 17, Model::Nonlinear).unwrap();
        let last = pl.values.len() - 1;
        assert!(
            pn.values[last] < pl.values[last],
            "nonlinear tip strain {} !< linear {}",
            pn.values[last],
            pl.values[last]
        );
    }

    #[test]
    fn stress_non_decreasing_toward_tip() {
        let p = unit_params();
        let non = run_experiment(
            Domain::Example2,
            TemperatureCase::Case1,
            Model::Nonlinear,
            5,
            &p,
            &NewtonConfig::default(),
        )
        .unwrap();
        let f = recover_fields(&non.mesh, &p, &non.state, false);
        let n_samples = 17;
        let t = sample_reference_line(&non.mesh, &f.t_yy, n_samples, Model::Nonlinear).unwrap();
        for k in (n_samples - 5)..(n_samples - 1) {
            assert!(
                t.values[k + 1] >= t.values[k],
                "T_yy not non-decreasing near the tip: {:?}",
                &t.values[n_samples - 5..]
            );
        }
    }

    #[test]
    fn vtk_format_one_cell() {
        let mesh = build_unit_square(0);
        let field = vec![1.5; mesh.n_nodes()];
        let mut buf = Vec::new();
        write_vtk(&mesh, &[("theta", &field)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"CELLS 1 5"));
        let ct = lines.iter().position(|&l| l == "CELL_TYPES 1").unwrap();
        assert_eq!(lines[ct + 1], "9");
        assert!(lines.contains(&"SCALARS theta float 1"));
    }

    #[test]
    fn vtk_points_round_trip() {
        let mesh = build_unit_square(2);
        let field = vec![0.0; mesh.n_nodes()];
        let mut buf = Vec::new();
        write_vtk(&mesh, &[("z", &field)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        while let Some(l) = lines.next() {
            if l.starts_with("POINTS") {
                break;
            }
        }
        for n in &mesh.nodes {
            let parts: Vec<f32> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|s| s.parse().unwrap())
                .collect();
            assert_eq!(parts[0], n.x as f32);
            assert_eq!(parts[1], n.y as f32);
            assert_eq!(parts[2], 0.0);
        }
    }

    #[test]
    fn vtk_field_count_matches_request() {
        let mesh = build_unit_square(1);
        let f1 = vec![1.0; mesh.n_nodes()];
        let f2 = vec![2.0; mesh.n_nodes()];
        let mut buf = Vec::new();
        write_vtk(&mesh, &[("a", &f1), ("b", &f2)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("SCALARS").count(), 2);
    }

    #[test]
    fn profile_csv_round_trip() {
        let profile = LineProfile {
            model: Model::Nonlinear,
            xs: vec![0.0, 0.25, 0.5],
            values: vec![1.0, 2.5, -3.25e-7],
        };
        let mut buf = Vec::new();
        write_profile_csv(&profile, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "x,value,model");
        for (i, line) in lines[1..].iter().enumerate() {
            let parts: Vec<&str> = line.split(',').collect();
            assert_relative_eq!(
                parts[0].parse::<f64>().unwrap(),
                profile.xs[i],
                epsilon = 1e-12
            );
            assert_relative_eq!(
                parts[1].parse::<f64>().unwrap(),
                profile.values[i],
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            assert_eq!(parts[2], "nonlinear");
        }
    }

    #[test]
    fn crack_face_nodes_keep_their_side() {
        // pull the upper crack face up: duplicated nodes must disagree
        let mesh = build_slit_square(2).unwrap();
        let p = unit_params().with_beta(0.0);
        let state = state_from_fn(&mesh, |_, y| if y >= 0.5 { [0.0, y] } else { [0.0, 0.0] });
        // make the field discontinuous across the crack: shift upper copies
        let mut state = state;
        for (i, n) in mesh.nodes.iter().enumerate() {
            if (n.y - 0.5).abs() < 1e-12 && n.x > 0.5 + 1e-12 {
                // upper copies are the appended nodes (index >= 25)
                if i >= 25 {
                    state.u[2 * i + 1] = 0.6;
                }
            }
        }
        let f = recover_fields(&mesh, &p, &state, false);
        let (mut upper, mut lower) = (None, None);
        for (i, n) in mesh.nodes.iter().enumerate() {
            if (n.x - 0.75).abs() < 1e-12 && (n.y - 0.5).abs() < 1e-12 {
                if i >= 25 {
                    upper = Some(f.eps_yy[i]);
                } else {
                    lower = Some(f.eps_yy[i]);
                }
            }
        }
        let (u, l) = (upper.unwrap(), lower.unwrap());
        assert!((u - l).abs() > 0.1, "sides not independent: {u} vs {l}");
    }

    #[test]
    fn heat_field_passthrough() {
        let mesh = build_unit_square(2);
        let p = unit_params();
        let theta = solve_heat(&mesh, &p, TemperatureCase::Case1).unwrap();
        let state = SolutionState {
            theta: theta.clone(),
            u: vec![0.0; 2 * mesh.n_nodes()],
            newton_history: vec![],
            converged: true,
        };
        let f = recover_fields(&mesh, &p, &state, false);
        assert_eq!(f.theta, theta);
    }
}
