//! Entrywise trapezoid quadrature of matrix-valued functions along closed
//! contours, residues on small circles and residue-theorem checks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::matrixcore::{ComplexMatrix, I};
use crate::par;

const MIN_NODES: usize = 16;
const RESIDUE_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContourShape {
    Circle { center: Complex64, radius: f64 },
    Rectangle { corner_a: Complex64, corner_b: Complex64 },
    Polyline { vertices: Vec<Complex64> },
}

/// A closed, counterclockwise quadrature path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    #[serde(flatten)]
    pub shape: ContourShape,
    pub nodes_per_unit_length: usize,
}

/// A quadrature node `z` with its complex weight (`dz` share).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub z: Complex64,
    pub weight: Complex64,
}

impl ContourSpec {
    pub fn circle(center: Complex64, radius: f64, nodes_per_unit_length: usize) -> Self {
        Self {
            shape: ContourShape::Circle { center, radius },
            nodes_per_unit_length,
        }
    }

    pub fn rectangle(corner_a: Complex64, corner_b: Complex64, nodes_per_unit_length: usize) -> Self {
        Self {
            shape: ContourShape::Rectangle { corner_a, corner_b },
            nodes_per_unit_length,
        }
    }

    pub fn polyline(vertices: Vec<Complex64>, nodes_per_unit_length: usize) -> Self {
        Self {
            shape: ContourShape::Polyline { vertices },
            nodes_per_unit_length,
        }
    }

    /// Circle around `center` with at least `count` nodes.
    pub fn circle_with_nodes(center: Complex64, radius: f64, count: usize) -> Self {
        let density = (count as f64 / (2.0 * PI * radius)).ceil().max(1.0) as usize;
        Self::circle(center, radius, density)
    }

    pub fn with_density(&self, nodes_per_unit_length: usize) -> Self {
        Self {
            shape: self.shape.clone(),
            nodes_per_unit_length,
        }
    }

    /// Quadrature nodes with weights; the path is traversed counterclockwise.
    pub fn nodes(&self) -> Result<Vec<Node>> {
        if self.nodes_per_unit_length == 0 {
            return Err(LabError::InvalidContour("nodes_per_unit_length must be positive".into()));
        }
        let density = self.nodes_per_unit_length as f64;
        match &self.shape {
            ContourShape::Circle { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !finite(*center) {
                    return Err(LabError::InvalidContour(format!("circle radius {radius} or centre not valid")));
                }
                let n = ((2.0 * PI * radius * density).ceil() as usize).max(MIN_NODES);
                let dtheta = 2.0 * PI / n as f64;
                Ok((0..n)
                    .map(|j| {
                        let e = Complex64::from_polar(1.0, (j as f64 + 0.5) * dtheta);
                        Node {
                            z: center + e * *radius,
                            weight: I * e * (*radius * dtheta),
                        }
                    })
                    .collect())
            }
            ContourShape::Rectangle { corner_a, corner_b } => {
                let (x0, x1) = (corner_a.re.min(corner_b.re), corner_a.re.max(corner_b.re));
                let (y0, y1) = (corner_a.im.min(corner_b.im), corner_a.im.max(corner_b.im));
                if !(x1 > x0 && y1 > y0) || !finite(*corner_a) || !finite(*corner_b) {
                    return Err(LabError::InvalidContour("rectangle corners are degenerate".into()));
                }
                let v = vec![
                    Complex64::new(x0, y0),
                    Complex64::new(x1, y0),
                    Complex64::new(x1, y1),
                    Complex64::new(x0, y1),
                ];
                polyline_nodes(&v, density)
            }
            ContourShape::Polyline { vertices } => {
                if vertices.len() < 3 || vertices.iter().any(|z| !finite(*z)) {
                    return Err(LabError::InvalidContour("polyline needs at least 3 finite vertices".into()));
                }
                let area = signed_area(vertices);
                if area.abs() < 1e-14 {
                    return Err(LabError::InvalidContour("polyline encloses no area".into()));
                }
                let mut v = vertices.clone();
                if area < 0.0 {
                    v.reverse();
                }
                polyline_nodes(&v, density)
            }
        }
    }
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn signed_area(v: &[Complex64]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.re * b.im - b.re * a.im
        })
        .sum::<f64>()
}

/// Trapezoid rule on each edge in the double-exponential variable
/// `s = (1 + tanh((π/2)·sinh u))/2`, `u ∈ [−U, U]`, with nodes at cell midpoints.
/// The map flattens the integrand at both vertices, so corners cost no
/// accuracy and the rule converges geometrically for analytic integrands.
fn polyline_nodes(v: &[Complex64], density: f64) -> Result<Vec<Node>> {
    const U: f64 = 3.2;
    let n = v.len();
    let perimeter: f64 = (0..n).map(|i| (v[(i + 1) % n] - v[i]).norm()).sum();
    let density = density.max(MIN_NODES as f64 / perimeter);
    let mut nodes = Vec::new();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let len = (b - a).norm();
        if len == 0.0 {
            return Err(LabError::InvalidContour(format!("polyline edge {i} has zero length")));
        }
        let count = ((len * density).ceil() as usize).max(32);
        let h = 2.0 * U / count as f64;
        for j in 0..count {
            let u = -U + (j as f64 + 0.5) * h;
            let arg = 0.5 * PI * u.sinh();
            let s = 0.5 * (1.0 + arg.tanh());
            let ds = 0.25 * PI * u.cosh() / arg.cosh().powi(2);
            nodes.push(Node {
                z: a + (b - a) * s,
                weight: (b - a) * (ds * h),
            });
        }
    }
    Ok(nodes)
}

fn check_sample(z: Complex64, m: &DMatrix<Complex64>) -> Result<()> {
    if m.iter().all(|x| finite(*x)) {
        Ok(())
    } else {
        Err(LabError::SampleOnSingularity(z))
    }
}

/// `∮ f(z) dz` entrywise by composite trapezoid quadrature.
pub fn integrate_contour<F>(f: F, contour: &ContourSpec) -> Result<ComplexMatrix>
where
    F: Fn(Complex64) -> DMatrix<Complex64> + Sync + Send,
{
    let nodes = contour.nodes()?;
    let terms = par::try_map_indexed(nodes.len(), |j| {
        let node = nodes[j];
        let m = f(node.z);
        check_sample(node.z, &m)?;
        Ok::<_, LabError>(ComplexMatrix::from_raw(m * node.weight))
    })?;
    par::pairwise_sum(&terms).ok_or_else(|| LabError::InvalidContour("contour has no nodes".into()))
}

/// Simple pole location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleSpec {
    pub location: Complex64,
}

impl PoleSpec {
    pub fn simple(location: Complex64) -> Self {
        Self { location }
    }
}

/// `(1/2πi)∮ f` over a circle of the given radius around the pole.
pub fn residue_at<F>(f: F, pole: PoleSpec, radius: f64) -> Result<ComplexMatrix>
where
    F: Fn(Complex64) -> DMatrix<Complex64> + Sync + Send,
{
    let c = ContourSpec::circle_with_nodes(pole.location, radius, RESIDUE_NODES);
    Ok(integrate_contour(f, &c)?.scale(1.0 / (2.0 * PI * I)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueCheck {
    pub lhs: ComplexMatrix,
    pub rhs: ComplexMatrix,
    pub residual: f64,
}

fn winding_number(nodes: &[Node], p: Complex64) -> f64 {
    let s: Complex64 = nodes.iter().map(|n| n.weight / (n.z - p)).sum();
    (s / (2.0 * PI * I)).re
}

fn check_enclosed(nodes: &[Node], poles: &[PoleSpec]) -> Result<()> {
    for p in poles {
        let w = winding_number(nodes, p.location);
        if (w - 1.0).abs() > 0.25 {
            return Err(LabError::InvalidContour(format!(
                "pole {} is not strictly inside the contour (winding {w:.3})",
                p.location
            )));
        }
    }
    Ok(())
}

/// Compares `∮ f` with `2πi` times the sum of numerically computed residues.
///
/// Residue circles shrink to a quarter of the distance to the nearest other
/// pole or contour node.
pub fn verify_residue_theorem<F>(f: F, contour: &ContourSpec, poles: &[PoleSpec]) -> Result<ResidueCheck>
where
    F: Fn(Complex64) -> DMatrix<Complex64> + Sync + Send,
{
    let nodes = contour.nodes()?;
    check_enclosed(&nodes, poles)?;
    let lhs = integrate_contour(&f, contour)?;
    let dim = lhs.dim();
    let mut rhs = ComplexMatrix::zeros(dim);
    for (i, p) in poles.iter().enumerate() {
        let to_pole = poles
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| (q.location - p.location).norm())
            .fold(f64::INFINITY, f64::min);
        let to_path = nodes.iter().map(|n| (n.z - p.location).norm()).fold(f64::INFINITY, f64::min);
        let radius = (0.25 * to_pole.min(to_path)).min(0.5);
        let r = residue_at(&f, *p, radius)?;
        rhs = &rhs + &r;
    }
    let rhs = rhs.scale(2.0 * PI * I);
    let residual = (lhs.inner() - rhs.inner()).norm();
    Ok(ResidueCheck { lhs, rhs, residual })
}

/// Compares `∮ f` with `2πi` times a supplied sum of residues.
pub fn verify_with_residues<F>(f: F, contour: &ContourSpec, residues: &[ComplexMatrix]) -> Result<ResidueCheck>
where
    F: Fn(Complex64) -> DMatrix<Complex64> + Sync + Send,
{
    let lhs = integrate_contour(f, contour)?;
    let mut rhs = ComplexMatrix::zeros(lhs.dim());
    for r in residues {
        if r.dim() != lhs.dim() {
            return Err(LabError::InvalidMatrix("residue dimension mismatch".into()));
        }
        rhs = &rhs + r;
    }
    let rhs = rhs.scale(2.0 * PI * I);
    let residual = (lhs.inner() - rhs.inner()).norm();
    Ok(ResidueCheck { lhs, rhs, residual })
}

/// A matrix-valued test function with known simple poles and residues.
pub struct RationalCase {
    pub name: &'static str,
    pub description: &'static str,
    pub contour: ContourSpec,
    pub poles: Vec<PoleSpec>,
    pub residues: Vec<ComplexMatrix>,
    func: Box<dyn Fn(Complex64) -> DMatrix<Complex64> + Sync + Send>,
}

impl RationalCase {
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        (self.func)(z)
    }

    /// Checks the residue theorem with numerical residues and with closed-form residues;
    /// returns the larger residual.
    pub fn check(&self) -> Result<f64> {
        let numeric = verify_residue_theorem(|z| self.eval(z), &self.contour, &self.poles)?;
        let closed = verify_with_residues(|z| self.eval(z), &self.contour, &self.residues)?;
        Ok(numeric.residual.max(closed.residual))
    }
}

fn sample_b() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, -1.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-3.0, 0.0),
        ],
    )
}

fn cm(m: DMatrix<Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_raw(m)
}

/// Rational and entire test functions with closed-form residues.
pub fn rational_catalog() -> Vec<RationalCase> {
    let b = sample_b();
    let one = Complex64::new(1.0, 0.0);
    let z0 = Complex64::new(0.3, 0.2);
    let p3 = [Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.5), Complex64::new(-0.7, 0.3)];
    let p3_res: Vec<ComplexMatrix> = (0..3)
        .map(|k| {
            let d: Complex64 = (0..3).filter(|&j| j != k).map(|j| p3[k] - p3[j]).product();
            cm(&b / d)
        })
        .collect();
    let zero = Complex64::new(0.0, 0.0);
    vec![
        RationalCase {
            name: "single-pole",
            description: "B/(z - z0) on the unit circle around z0",
            contour: ContourSpec::circle(z0, 1.0, 64),
            poles: vec![PoleSpec::simple(z0)],
            residues: vec![cm(b.clone())],
            func: {
                let b = b.clone();
                Box::new(move |z| &b / (z - z0))
            },
        },
        RationalCase {
            name: "two-pole",
            description: "B/(z^2 - 1) on the circle of radius 3",
            contour: ContourSpec::circle(zero, 3.0, 64),
            poles: vec![PoleSpec::simple(one), PoleSpec::simple(-one)],
            residues: vec![cm(&b * Complex64::new(0.5, 0.0)), cm(&b * Complex64::new(-0.5, 0.0))],
            func: {
                let b = b.clone();
                Box::new(move |z| &b / (z * z - 1.0))
            },
        },
        RationalCase {
            name: "z2p1-rect",
            description: "B/(z^2 + 1) on the rectangle [-1, 1] x [0, 2] enclosing only z = i",
            contour: ContourSpec::rectangle(Complex64::new(-1.0, 0.0), Complex64::new(1.0, 2.0), 40),
            poles: vec![PoleSpec::simple(I)],
            residues: vec![cm(&b / (2.0 * I))],
            func: {
                let b = b.clone();
                Box::new(move |z| &b / (z * z + 1.0))
            },
        },
        RationalCase {
            name: "exp-over-z",
            description: "B e^z / z on the unit circle",
            contour: ContourSpec::circle(zero, 1.0, 64),
            poles: vec![PoleSpec::simple(zero)],
            residues: vec![cm(b.clone())],
            func: {
                let b = b.clone();
                Box::new(move |z| &b * (z.exp() / z))
            },
        },
        RationalCase {
            name: "matrix-mixed",
            description: "entries 1/(z-1), e^z/(z+1), z/(z^2-1), 1 on the circle of radius 2",
            contour: ContourSpec::circle(zero, 2.0, 64),
            poles: vec![PoleSpec::simple(one), PoleSpec::simple(-one)],
            residues: vec![
                cm(DMatrix::from_row_slice(2, 2, &[one, zero, one * 0.5, zero])),
                cm(DMatrix::from_row_slice(2, 2, &[zero, one * (-1f64).exp(), one * 0.5, zero])),
            ],
            func: Box::new(move |z| {
                DMatrix::from_row_slice(2, 2, &[1.0 / (z - 1.0), z.exp() / (z + 1.0), z / (z * z - 1.0), one])
            }),
        },
        RationalCase {
            name: "polynomial",
            description: "entire entries z^2, z^3 + 1, 2z - i, 5 on a pentagon",
            contour: ContourSpec::polyline(
                vec![
                    Complex64::new(-1.5, -1.5),
                    Complex64::new(1.5, -1.5),
                    Complex64::new(2.0, 0.5),
                    Complex64::new(0.0, 2.0),
                    Complex64::new(-2.0, 0.5),
                ],
                40,
            ),
            poles: vec![],
            residues: vec![],
            func: Box::new(move |z| DMatrix::from_row_slice(2, 2, &[z * z, z * z * z + 1.0, 2.0 * z - I, one * 5.0])),
        },
        RationalCase {
            name: "partial-fractions-3",
            description: "B/((z - p1)(z - p2)(z - p3)) on a pentagon",
            contour: ContourSpec::polyline(
                vec![
                    Complex64::new(-1.5, -1.5),
                    Complex64::new(1.5, -1.5),
                    Complex64::new(2.0, 0.5),
                    Complex64::new(0.0, 2.0),
                    Complex64::new(-2.0, 0.5),
                ],
                40,
            ),
            poles: p3.iter().map(|&p| PoleSpec::simple(p)).collect(),
            residues: p3_res,
            func: {
                let b = b.clone();
                Box::new(move |z| &b / ((z - p3[0]) * (z - p3[1]) * (z - p3[2])))
            },
        },
    ]
}

pub fn rational_case(name: &str) -> Option<RationalCase> {
    rational_catalog().into_iter().find(|c| c.name == name)
}
