//! Structured quadrilateral meshes of the unit square, with or without an
//! interior slit.
//!
//! The slit runs from (0.5, 0.5) to (1.0, 0.5) and is represented by node
//! duplication: every grid point strictly right of x = 0.5 on the line
//! y = 0.5 exists twice (one copy for the cells above, one for the cells
//! below), while the tip at (0.5, 0.5) stays a single shared vertex. Cell
//! node ordering is counterclockwise; local face `f` joins local nodes `f`
//! and `(f + 1) % 4`.

use crate::error::FemError;
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::io::{self, Write};

const GEOM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadCell {
    /// Node indices in counterclockwise order.
    pub nodes: [usize; 4],
}

/// Boundary piece labels: Gamma1 is the bottom (y = 0) and the numbering
/// proceeds counterclockwise; the crack tags mark the two faces of the slit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
    CrackUpper,
    CrackLower,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub cells: Vec<QuadCell>,
    /// (cell, local face) -> tag for every exterior face.
    pub face_tags: BTreeMap<(usize, usize), BoundaryTag>,
    /// Shared crack-tip node at (0.5, 0.5), present only in slit meshes.
    pub tip_node: Option<usize>,
    /// Axis-aligned cell edge length.
    pub h: f64,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Corner coordinates of a cell, counterclockwise.
    pub fn cell_coords(&self, cell: usize) -> [[f64; 2]; 4] {
        let c = &self.cells[cell];
        let mut out = [[0.0; 2]; 4];
        for (k, &n) in c.nodes.iter().enumerate() {
            out[k] = [self.nodes[n].x, self.nodes[n].y];
        }
        out
    }

    /// Node ids lying on faces carrying the given tag.
    pub fn nodes_on_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut ids: Vec<usize> = Vec::new();
        for (&(cell, face), &t) in &self.face_tags {
            if t == tag {
                let (a, b) = face_nodes(&self.cells[cell], face);
                ids.push(a);
                ids.push(b);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Plain-text dump: one "id x y" line per node, then one
    /// "id n0 n1 n2 n3" line per cell.
    pub fn write_text<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(w, "{} {} {}", i, n.x, n.y)?;
        }
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(
                w,
                "{} {} {} {} {}",
                i, c.nodes[0], c.nodes[1], c.nodes[2], c.nodes[3]
            )?;
        }
        Ok(())
    }
}

/// Local face -> (first node, second node), counterclockwise.
pub fn face_nodes(cell: &QuadCell, face: usize) -> (usize, usize) {
    (cell.nodes[face], cell.nodes[(face + 1) % 4])
}

/// Uniform (2^r)^2-cell grid on the unit square.
pub fn build_unit_square(refinements: u32) -> Mesh {
    let (nodes, cells, h) = grid(refinements);
    let face_tags =
        classify_boundary(&nodes, &cells).expect("structured grid faces are always taggable");
    Mesh {
        nodes,
        cells,
        face_tags,
        tip_node: None,
        h,
    }
}

/// Unit-square grid with the slit {0.5 < x <= 1, y = 0.5} opened by node
/// duplication. Requires at least one refinement so the slit lies on grid
/// lines.
pub fn build_slit_square(refinements: u32) -> Result<Mesh, FemError> {
    if refinements == 0 {
        return Err(FemError::InvalidMesh(
            "slit mesh needs refinements >= 1 so the slit is a grid line".into(),
        ));
    }
    let (mut nodes, mut cells, h) = grid(refinements);
    let n = 1usize << refinements;
    let stride = n + 1;
    let js = n / 2; // grid row at y = 0.5
    let idx = |i: usize, j: usize| j * stride + i;

    // Duplicate nodes strictly right of the tip; upper cells get the copies.
    let mut upper_copy: HashMap<usize, usize> = HashMap::new();
    for i in (n / 2 + 1)..=n {
        let orig = idx(i, js);
        let copy = nodes.len();
        nodes.push(nodes[orig]);
        upper_copy.insert(orig, copy);
    }
    for i in (n / 2)..n {
        let cell = js * n + i;
        for nid in cells[cell].nodes.iter_mut() {
            if let Some(&copy) = upper_copy.get(nid) {
                *nid = copy;
            }
        }
    }

    let face_tags = classify_boundary(&nodes, &cells)?;
    Ok(Mesh {
        tip_node: Some(idx(n / 2, js)),
        nodes,
        cells,
        face_tags,
        h,
    })
}

fn grid(refinements: u32) -> (Vec<Node>, Vec<QuadCell>, f64) {
    let n = 1usize << refinements;
    let h = 1.0 / n as f64;
    let stride = n + 1;
    let mut nodes = Vec::with_capacity(stride * stride);
    for j in 0..stride {
        for i in 0..stride {
            nodes.push(Node {
                x: i as f64 * h,
                y: j as f64 * h,
            });
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(QuadCell {
                nodes: [
                    j * stride + i,
                    j * stride + i + 1,
                    (j + 1) * stride + i + 1,
                    (j + 1) * stride + i,
                ],
            });
        }
    }
    (nodes, cells, h)
}

/// Tag every exterior face of the mesh. Faces are exterior when their node
/// pair belongs to exactly one cell, which also uncovers the slit faces
/// after node duplication.
pub fn classify_boundary(
    nodes: &[Node],
    cells: &[QuadCell],
) -> Result<BTreeMap<(usize, usize), BoundaryTag>, FemError> {
    let mut edge_use: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (c, cell) in cells.iter().enumerate() {
        for f in 0..4 {
            let (a, b) = face_nodes(cell, f);
            let key = (a.min(b), a.max(b));
            edge_use.entry(key).or_default().push((c, f));
        }
    }

    let mut tags = BTreeMap::new();
    for (_, users) in edge_use {
        if users.len() != 1 {
            continue;
        }
        let (c, f) = users[0];
        let (a, b) = face_nodes(&cells[c], f);
        let (pa, pb) = (nodes[a], nodes[b]);
        let on = |v: f64, target: f64| (v - target).abs() < GEOM_EPS;
        let tag = if on(pa.y, 0.0) && on(pb.y, 0.0) {
            BoundaryTag::Gamma1
        } else if on(pa.x, 1.0) && on(pb.x, 1.0) {
            BoundaryTag::Gamma2
        } else if on(pa.y, 1.0) && on(pb.y, 1.0) {
            BoundaryTag::Gamma3
        } else if on(pa.x, 0.0) && on(pb.x, 0.0) {
            BoundaryTag::Gamma4
        } else if on(pa.y, 0.5)
            && on(pb.y, 0.5)
            && pa.x >= 0.5 - GEOM_EPS
            && pb.x >= 0.5 - GEOM_EPS
        {
            // Slit face; side decided by the owning cell's centroid.
            let cy: f64 = cells[c].nodes.iter().map(|&n| nodes[n].y).sum::<f64>() / 4.0;
            if cy > 0.5 {
                BoundaryTag::CrackUpper
            } else {
                BoundaryTag::CrackLower
            }
        } else {
            return Err(FemError::InvalidMesh(format!(
                "exterior face {f} of cell {c} at ({}, {})-({}, {}) matches no boundary",
                pa.x, pa.y, pb.x, pb.y
            )));
        };
        tags.insert((c, f), tag);
    }
    Ok(tags)
}
