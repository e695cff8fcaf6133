//! Local matrices for linear (P1) triangles, all closed-form. Every
//! integrand below is at most quadratic, so the exact mass matrix
//! `area * (1 + delta_ij) / 12` and constant-gradient identities cover
//! everything without a quadrature loop.
//!
//! Vector-valued blocks are 6x6, indexed by local dof `2 * vertex + component`
//! with rows as test functions and columns as trial functions.

use crate::mesh::Point2;

pub type Mat3 = [[f64; 3]; 3];
pub type Mat6 = [[f64; 6]; 6];

/// Gradients of the three P1 basis functions and the (signed) triangle area.
pub fn p1_gradients(p: &[Point2; 3]) -> ([[f64; 2]; 3], f64) {
    let a2 = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    let g = [
        [(p[1].y - p[2].y) / a2, (p[2].x - p[1].x) / a2],
        [(p[2].y - p[0].y) / a2, (p[0].x - p[2].x) / a2],
        [(p[0].y - p[1].y) / a2, (p[1].x - p[0].x) / a2],
    ];
    (g, 0.5 * a2)
}

pub fn longest_edge(p: &[Point2; 3]) -> f64 {
    p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]))
}

/// Exact P1 mass matrix of the scalar basis, integral of phi_i phi_j.
pub fn scalar_mass(area: f64) -> Mat3 {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] *= 2.0;
    }
    m
}

/// coef * integral of (phi_j e_l) . (phi_i e_k).
pub fn vector_mass(area: f64, coef: f64) -> Mat6 {
    let mphi = scalar_mass(area);
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                m[2 * i + k][2 * j + k] = coef * mphi[i][j];
            }
        }
    }
    m
}

/// rho_nu * integral of (grad u + grad u^T) : grad v for u = phi_j e_l,
/// v = phi_i e_k.
pub fn viscous(g: &[[f64; 2]; 3], area: f64, rho_nu: f64) -> Mat6 {
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let gij = g[i][0] * g[j][0] + g[i][1] * g[j][1];
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = g[j][k] * g[i][l];
                    if k == l {
                        v += gij;
                    }
                    m[2 * i + k][2 * j + l] = rho_nu * area * v;
                }
            }
        }
    }
    m
}

/// rho * integral of ((w . grad) u) . v with P1 advecting field w given by
/// nodal values.
pub fn convection(g: &[[f64; 2]; 3], area: f64, w: &[[f64; 2]; 3], rho: f64) -> Mat6 {
    let mphi = scalar_mass(area);
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            // integral of (w . grad phi_j) phi_i with w interpolated linearly
            let mut c = 0.0;
            for a in 0..3 {
                c += (w[a][0] * g[j][0] + w[a][1] * g[j][1]) * mphi[i][a];
            }
            for k in 0..2 {
                m[2 * i + k][2 * j + k] = rho * c;
            }
        }
    }
    m
}

/// Nodal-value gradient of a P1 vector field: result[k][l] = d u_k / d x_l.
pub fn velocity_gradient(g: &[[f64; 2]; 3], u: &[[f64; 2]; 3]) -> [[f64; 2]; 2] {
    let mut grad = [[0.0; 2]; 2];
    for j in 0..3 {
        for k in 0..2 {
            for l in 0..2 {
                grad[k][l] += u[j][k] * g[j][l];
            }
        }
    }
    grad
}

/// rho * integral of ((du . grad) u_frozen) . v, the transport-direction
/// part of the convection derivative, for du = phi_j e_l, v = phi_i e_k.
pub fn newton_convection(area: f64, grad_u: &[[f64; 2]; 2], rho: f64) -> Mat6 {
    let mphi = scalar_mass(area);
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * i + k][2 * j + l] = rho * mphi[i][j] * grad_u[k][l];
                }
            }
        }
    }
    m
}

/// integral of (div u) q for u = phi_j e_l, q = phi_i: rows are pressure test
/// functions, columns velocity dofs. The momentum-equation pressure block is
/// minus the transpose of this.
pub fn divergence(g: &[[f64; 2]; 3], area: f64) -> [[f64; 6]; 3] {
    let mut m = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..2 {
                m[i][2 * j + l] = area / 3.0 * g[j][l];
            }
        }
    }
    m
}

/// Linear elasticity: integral of 2 mu eps(u) : eps(v) + lambda div u div v.
pub fn elasticity(g: &[[f64; 2]; 3], area: f64, mu: f64, lambda: f64) -> Mat6 {
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let gij = g[i][0] * g[j][0] + g[i][1] * g[j][1];
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = mu * g[i][l] * g[j][k] + lambda * g[i][k] * g[j][l];
                    if k == l {
                        v += mu * gij;
                    }
                    m[2 * i + k][2 * j + l] = area * v;
                }
            }
        }
    }
    m
}

/// Scalar stiffness: integral of grad phi_j . grad phi_i. Shared by the
/// pressure stabilization (scaled) and the mesh-motion operator.
pub fn laplacian(g: &[[f64; 2]; 3], area: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    m
}
