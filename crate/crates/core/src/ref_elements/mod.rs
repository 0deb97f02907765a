//! Reference-triangle finite elements: Raviart–Thomas `RT_k`, and nodal
//! Lagrange `P_k` (used both discontinuously and continuously).
//!
//! Every element is built the Ciarlet way: a spanning set of polynomials is
//! paired with its degrees of freedom, and the dual matrix is inverted so the
//! resulting basis satisfies `ℓ_i(φ_j) = δ_ij`.

pub mod quadrature;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::LOCAL_EDGE_VERTICES;
pub use quadrature::{gauss_legendre, quadrature_rule, shifted_legendre, QuadratureRule};

pub const MAX_DEGREE: usize = 3;

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Scalar polynomial as a list of `(coefficient, x power, y power)` terms.
#[derive(Debug, Clone, Default)]
struct Poly(Vec<(f64, i32, i32)>);

impl Poly {
    fn monomial(a: i32, b: i32) -> Poly {
        Poly(vec![(1.0, a, b)])
    }

    /// `(x - 1/3)^a (y - 1/3)^b` expanded binomially; centring keeps the
    /// dual matrix well conditioned for higher degrees.
    fn centered(a: i32, b: i32) -> Poly {
        let binom = |n: i32, r: i32| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        let c: f64 = -1.0 / 3.0;
        let mut terms = Vec::new();
        for i in 0..=a {
            for j in 0..=b {
                let coef = binom(a, i) * binom(b, j) * c.powi(a - i) * c.powi(b - j);
                terms.push((coef, i, j));
            }
        }
        Poly(terms)
    }

    /// Multiplies by `x^da y^db`.
    fn shifted(&self, da: i32, db: i32) -> Poly {
        Poly(self.0.iter().map(|&(c, a, b)| (c, a + da, b + db)).collect())
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.0
            .iter()
            .map(|&(c, a, b)| c * x[0].powi(a) * x[1].powi(b))
            .sum()
    }

    fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(c, a, b) in &self.0 {
            if a > 0 {
                g[0] += c * a as f64 * x[0].powi(a - 1) * x[1].powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * x[0].powi(a) * x[1].powi(b - 1);
            }
        }
        g
    }
}

/// Exponents of the monomial basis of `P_k`, ordered by total degree.
fn monomials(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for d in 0..=k as i32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    RaviartThomas,
    DiscLagrange,
    ContLagrange,
}

/// What a degree of freedom is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofEntity {
    /// Normal moment of order `moment` against the shifted Legendre
    /// polynomial on local edge `edge`.
    EdgeMoment { edge: usize, moment: usize },
    /// Interior moment (RT) against a component of `P_{k-1}²`.
    InteriorMoment(usize),
    Vertex(usize),
    /// `index`-th interior lattice node of local edge `edge`, counted in the
    /// counter-clockwise direction of the edge.
    EdgeNode { edge: usize, index: usize },
    CellNode(usize),
}

#[derive(Debug, Clone)]
pub struct RefBasis {
    pub family: Family,
    pub degree: usize,
    pub dofs: Vec<DofEntity>,
    /// Lattice nodes of Lagrange elements; empty for RT.
    pub nodes: Vec<[f64; 2]>,
    span: Vec<[Poly; 2]>,
    /// Column `j` holds the spanning-set coefficients of basis function `j`.
    coeffs: DMatrix<f64>,
}

fn check_degree(k: usize) -> Result<()> {
    if k == 0 || k > MAX_DEGREE {
        return Err(Error::Unsupported(format!(
            "element degree {k} (supported: 1..={MAX_DEGREE})"
        )));
    }
    Ok(())
}

/// Outward unit normal, length and CCW parametrisation of reference edge `e`.
pub fn reference_edge(e: usize) -> ([f64; 2], [f64; 2], f64, [f64; 2]) {
    let [a, b] = LOCAL_EDGE_VERTICES[e];
    let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
    let t = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    (pa, pb, len, [t[1] / len, -t[0] / len])
}

pub fn rt_basis(k: usize) -> Result<RefBasis> {
    check_degree(k)?;
    let mut span: Vec<[Poly; 2]> = Vec::new();
    for &(a, b) in &monomials(k) {
        span.push([Poly::centered(a, b), Poly::default()]);
        span.push([Poly::default(), Poly::centered(a, b)]);
    }
    // x·P̃_k modulo P_k² is spanned by x times any degree-k complement
    for b in 0..=k as i32 {
        let m = Poly::centered(k as i32 - b, b);
        span.push([m.shifted(1, 0), m.shifted(0, 1)]);
    }

    let mut dofs = Vec::new();
    for edge in 0..3 {
        for moment in 0..=k {
            dofs.push(DofEntity::EdgeMoment { edge, moment });
        }
    }
    let interior = monomials(k - 1);
    for i in 0..2 * interior.len() {
        dofs.push(DofEntity::InteriorMoment(i));
    }
    assert_eq!(dofs.len(), (k + 1) * (k + 3));
    assert_eq!(span.len(), dofs.len());

    let (gx, gw) = gauss_legendre(k + 2);
    let quad = quadrature_rule(2 * k)?;
    let n = dofs.len();
    let mut dual = DMatrix::zeros(n, n);
    for (i, dof) in dofs.iter().enumerate() {
        for (j, psi) in span.iter().enumerate() {
            dual[(i, j)] = match *dof {
                DofEntity::EdgeMoment { edge, moment } => {
                    let (pa, pb, len, nrm) = reference_edge(edge);
                    gx.iter()
                        .zip(&gw)
                        .map(|(s, w)| {
                            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                            let vn = psi[0].eval(x) * nrm[0] + psi[1].eval(x) * nrm[1];
                            w * len * vn * shifted_legendre(moment, *s)
                        })
                        .sum()
                }
                DofEntity::InteriorMoment(m) => {
                    let comp = m % 2;
                    let (a, b) = interior[m / 2];
                    quad.integrate(|x| psi[comp].eval(x) * x[0].powi(a) * x[1].powi(b))
                }
                _ => unreachable!(),
            };
        }
    }
    let coeffs = dual
        .try_inverse()
        .ok_or_else(|| Error::Numerical("RT dual matrix is singular".into()))?;
    Ok(RefBasis {
        family: Family::RaviartThomas,
        degree: k,
        dofs,
        nodes: Vec::new(),
        span,
        coeffs,
    })
}

/// Nodal `P_k` basis on the principal lattice: vertices, then edge nodes in
/// counter-clockwise order per local edge, then interior nodes.
pub fn lagrange_basis(k: usize, continuous: bool) -> Result<RefBasis> {
    check_degree(k)?;
    let kf = k as f64;
    let mut nodes = Vec::new();
    let mut dofs = Vec::new();
    for (v, p) in REF_VERTICES.iter().enumerate() {
        nodes.push(*p);
        dofs.push(DofEntity::Vertex(v));
    }
    for edge in 0..3 {
        let (pa, pb, _, _) = reference_edge(edge);
        for index in 0..k.saturating_sub(1) {
            let s = (index + 1) as f64 / kf;
            nodes.push([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
            dofs.push(DofEntity::EdgeNode { edge, index });
        }
    }
    let mut interior = 0;
    for j in 1..k {
        for i in 1..k {
            if i + j < k {
                nodes.push([i as f64 / kf, j as f64 / kf]);
                dofs.push(DofEntity::CellNode(interior));
                interior += 1;
            }
        }
    }
    let span: Vec<[Poly; 2]> = monomials(k)
        .into_iter()
        .map(|(a, b)| [Poly::monomial(a, b), Poly::default()])
        .collect();
    assert_eq!(span.len(), nodes.len());
    let n = nodes.len();
    let dual = DMatrix::from_fn(n, n, |i, j| span[j][0].eval(nodes[i]));
    let coeffs = dual
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Lagrange dual matrix is singular".into()))?;
    Ok(RefBasis {
        family: if continuous {
            Family::ContLagrange
        } else {
            Family::DiscLagrange
        },
        degree: k,
        dofs,
        nodes,
        span,
        coeffs,
    })
}

/// Dimension of `P_k` on a triangle.
pub fn pk_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

impl RefBasis {
    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_vector(&self) -> bool {
        self.family == Family::RaviartThomas
    }

    /// Vector values of every (RT) basis function at `x`.
    pub fn eval_vector(&self, x: [f64; 2]) -> Vec<[f64; 2]> {
        let sv: Vec<[f64; 2]> = self.span.iter().map(|p| [p[0].eval(x), p[1].eval(x)]).collect();
        (0..self.dof_count())
            .map(|j| {
                let mut v = [0.0; 2];
                for (i, s) in sv.iter().enumerate() {
                    let c = self.coeffs[(i, j)];
                    v[0] += c * s[0];
                    v[1] += c * s[1];
                }
                v
            })
            .collect()
    }

    /// Divergence of every (RT) basis function at `x`.
    pub fn eval_div(&self, x: [f64; 2]) -> Vec<f64> {
        let sd: Vec<f64> = self
            .span
            .iter()
            .map(|p| p[0].grad(x)[0] + p[1].grad(x)[1])
            .collect();
        (0..self.dof_count())
            .map(|j| sd.iter().enumerate().map(|(i, d)| self.coeffs[(i, j)] * d).sum())
            .collect()
    }

    /// Values of every scalar (Lagrange) basis function at `x`.
    pub fn eval_scalar(&self, x: [f64; 2]) -> Vec<f64> {
        let sv: Vec<f64> = self.span.iter().map(|p| p[0].eval(x)).collect();
        (0..self.dof_count())
            .map(|j| sv.iter().enumerate().map(|(i, s)| self.coeffs[(i, j)] * s).sum())
            .collect()
    }

    /// Gradients of every scalar (Lagrange) basis function at `x`.
    pub fn eval_grad(&self, x: [f64; 2]) -> Vec<[f64; 2]> {
        let sg: Vec<[f64; 2]> = self.span.iter().map(|p| p[0].grad(x)).collect();
        (0..self.dof_count())
            .map(|j| {
                let mut g = [0.0; 2];
                for (i, s) in sg.iter().enumerate() {
                    g[0] += self.coeffs[(i, j)] * s[0];
                    g[1] += self.coeffs[(i, j)] * s[1];
                }
                g
            })
            .collect()
    }

    /// Applies the RT degrees of freedom to a reference vector field.
    pub fn apply_rt_dofs(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        assert!(self.is_vector());
        let k = self.degree;
        // high orders so that interpolation commutes with div for smooth data
        let (gx, gw) = gauss_legendre(k + 8);
        let quad = quadrature_rule(quadrature::MAX_ORDER).expect("order in range");
        let interior = monomials(k - 1);
        self.dofs
            .iter()
            .map(|dof| match *dof {
                DofEntity::EdgeMoment { edge, moment } => {
                    let (pa, pb, len, nrm) = reference_edge(edge);
                    gx.iter()
                        .zip(&gw)
                        .map(|(s, w)| {
                            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                            let v = f(x);
                            w * len * (v[0] * nrm[0] + v[1] * nrm[1]) * shifted_legendre(moment, *s)
                        })
                        .sum()
                }
                DofEntity::InteriorMoment(m) => {
                    let (a, b) = interior[m / 2];
                    quad.integrate(|x| f(x)[m % 2] * x[0].powi(a) * x[1].powi(b))
                }
                _ => unreachable!(),
            })
            .collect()
    }
}

/// Basis values tabulated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: QuadratureRule,
    /// `values[q][i]`, vector-valued for RT (second entry zero for scalars).
    pub values: Vec<Vec<[f64; 2]>>,
    /// Divergence (RT) per point; empty for scalar elements.
    pub divs: Vec<Vec<f64>>,
}

impl Tabulation {
    pub fn new(basis: &RefBasis, rule: &QuadratureRule) -> Tabulation {
        let mut values = Vec::with_capacity(rule.len());
        let mut divs = Vec::new();
        for &p in &rule.points {
            if basis.is_vector() {
                values.push(basis.eval_vector(p));
                divs.push(basis.eval_div(p));
            } else {
                values.push(basis.eval_scalar(p).into_iter().map(|v| [v, 0.0]).collect());
            }
        }
        Tabulation {
            rule: rule.clone(),
            values,
            divs,
        }
    }
}
