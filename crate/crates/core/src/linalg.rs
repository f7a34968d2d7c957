//! Small dense kernels that need to be deterministic across platforms.
//!
//! The 3×3 singular value decomposition here is a one-sided (Hestenes) Jacobi
//! iteration. It only uses `+ - * / sqrt`, so for a given input it produces
//! the same bits everywhere, which the similarity fit and the fundamental
//! matrix rank check both rely on.

use nalgebra::{Matrix3, Vector3};

/// Off-diagonal convergence tolerance, relative to the column norms.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

/// `a = u * diag(singular_values) * vᵀ`, singular values sorted descending.
///
/// `u` and `v` are orthogonal but not necessarily proper rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd3 {
    pub u: Matrix3<f64>,
    pub singular_values: Vector3<f64>,
    pub v: Matrix3<f64>,
}

impl Svd3 {
    pub fn recompose(&self) -> Matrix3<f64> {
        self.u * Matrix3::from_diagonal(&self.singular_values) * self.v.transpose()
    }

    /// Ratio of the smallest to the largest singular value (0 for the zero matrix).
    pub fn condition_ratio(&self) -> f64 {
        let largest = self.singular_values[0];
        if largest == 0.0 {
            0.0
        } else {
            self.singular_values[2] / largest
        }
    }
}

pub fn svd3(a: &Matrix3<f64>) -> Svd3 {
    let mut b = *a;
    let mut v = Matrix3::<f64>::identity();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let alpha = b.column(p).norm_squared();
            let beta = b.column(q).norm_squared();
            let gamma = b.column(p).dot(&b.column(q));
            if gamma == 0.0 || gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            rotate_columns(&mut b, p, q, c, s);
            rotate_columns(&mut v, p, q, c, s);
        }
        if !rotated {
            break;
        }
    }

    let mut norms = [b.column(0).norm(), b.column(1).norm(), b.column(2).norm()];
    let mut order = [0usize, 1, 2];
    // Stable, so equal singular values keep their column order.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = Matrix3::<f64>::zeros();
    let mut v_sorted = Matrix3::<f64>::zeros();
    let mut sigma = Vector3::<f64>::zeros();
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        u.set_column(dst, &b.column(src));
    }
    norms = [sigma[0], sigma[1], sigma[2]];

    let floor = f64::EPSILON * 8.0 * norms[0];
    let mut rank = 0;
    for i in 0..3 {
        if norms[i] > floor && norms[i] > 0.0 {
            let col = u.column(i) / norms[i];
            u.set_column(i, &col);
            rank += 1;
        } else {
            sigma[i] = 0.0;
        }
    }
    complete_basis(&mut u, rank);

    Svd3 {
        u,
        singular_values: sigma,
        v: v_sorted,
    }
}

fn rotate_columns(m: &mut Matrix3<f64>, p: usize, q: usize, c: f64, s: f64) {
    for row in 0..3 {
        let mp = m[(row, p)];
        let mq = m[(row, q)];
        m[(row, p)] = c * mp - s * mq;
        m[(row, q)] = s * mp + c * mq;
    }
}

/// Fills columns `rank..3` of `u` so that it becomes orthonormal.
fn complete_basis(u: &mut Matrix3<f64>, rank: usize) {
    match rank {
        3 => {}
        2 => {
            let c = u.column(0).cross(&u.column(1)).normalize();
            u.set_column(2, &c);
        }
        1 => {
            let a: Vector3<f64> = u.column(0).into_owned();
            let b = any_orthogonal(&a);
            u.set_column(1, &b);
            u.set_column(2, &a.cross(&b).normalize());
        }
        _ => *u = Matrix3::identity(),
    }
}

/// A unit vector orthogonal to the unit vector `a`.
pub fn any_orthogonal(a: &Vector3<f64>) -> Vector3<f64> {
    let (ax, ay, az) = (a.x.abs(), a.y.abs(), a.z.abs());
    let helper = if ax <= ay && ax <= az {
        Vector3::x()
    } else if ay <= az {
        Vector3::y()
    } else {
        Vector3::z()
    };
    a.cross(&helper).normalize()
}

pub fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}
