//! Surface normals from local covariance.
//!
//! For each point, the covariance of its k nearest neighbors (plus the point
//! itself) is eigen-decomposed and the eigenvector of the smallest eigenvalue
//! is taken as the normal, sign-flipped toward the camera (z ≤ 0).

use super::kdtree::KdTree;
use super::{GeometryError, PointCloud};

/// Per-point unit normals aligned to the cloud ordering. `degenerate[i]` is
/// set where the neighborhood was rank-deficient and the fallback (0,0,−1)
/// was substituted.
#[derive(Debug, Clone)]
pub struct NormalField {
    normals: Vec<[f64; 3]>,
    degenerate: Vec<bool>,
}

impl NormalField {
    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    pub fn normal(&self, i: usize) -> [f64; 3] {
        self.normals[i]
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn from_raw(normals: Vec<[f64; 3]>) -> Self {
        let degenerate = vec![false; normals.len()];
        Self { normals, degenerate }
    }
}

pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalField, GeometryError> {
    let n = cloud.len();
    if n < k + 1 {
        return Err(GeometryError::TooFewPoints { points: n, needed: k + 1 });
    }
    let positions: Vec<[f64; 3]> = (0..n).map(|i| cloud.position(i)).collect();
    let tree = KdTree::build(positions.clone());

    let mut normals = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    let mut neighborhood = Vec::with_capacity(k + 1);
    for i in 0..n {
        neighborhood.clear();
        neighborhood.push(positions[i]);
        for j in tree.nearest(positions[i], k, Some(i as u32)) {
            neighborhood.push(positions[j as usize]);
        }
        let cov = covariance(&neighborhood);
        let (eigenvalues, eigenvectors) = sym_eigen_3x3(cov);
        // Ascending eigenvalues; rank deficiency means the normal direction
        // is not determined by the data.
        let trace = eigenvalues[0] + eigenvalues[1] + eigenvalues[2];
        let scale = 1.0 + positions[i].iter().map(|c| c * c).sum::<f64>();
        let rank_deficient = trace <= 1e-20 * scale || eigenvalues[1] <= 1e-12 * trace;
        if rank_deficient {
            normals.push([0.0, 0.0, -1.0]);
            degenerate.push(true);
            continue;
        }
        let mut normal = eigenvectors[0];
        if normal[2] > 0.0 {
            for c in &mut normal {
                *c = -*c;
            }
        }
        normals.push(normal);
        degenerate.push(false);
    }
    Ok(NormalField { normals, degenerate })
}

fn covariance(points: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0f64; 3];
    for p in points {
        for c in 0..3 {
            mean[c] += p[c];
        }
    }
    for c in &mut mean {
        *c /= n;
    }
    let mut cov = [[0.0f64; 3]; 3];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    cov
}

/// Cyclic Jacobi rotations for a symmetric 3×3 matrix. Returns eigenvalues
/// in ascending order with matching unit eigenvectors.
pub(crate) fn sym_eigen_3x3(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq.abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // Rotate rows/columns p and q.
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
            a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for r in 0..3 {
                if r != p && r != q {
                    let arp = a[r][p];
                    let arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[p][r] = a[r][p];
                    a[r][q] = s * arp + c * arq;
                    a[q][r] = a[r][q];
                }
            }
            for r in 0..3 {
                let vrp = v[r][p];
                let vrq = v[r][q];
                v[r][p] = c * vrp - s * vrq;
                v[r][q] = s * vrp + c * vrq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let eigenvalues = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut eigenvectors = [[0.0f64; 3]; 3];
    for (slot, &col) in order.iter().enumerate() {
        let mut vec = [v[0][col], v[1][col], v[2][col]];
        let norm = (vec[0] * vec[0] + vec[1] * vec[1] + vec[2] * vec[2]).sqrt();
        for c in &mut vec {
            *c /= norm;
        }
        eigenvectors[slot] = vec;
    }
    (eigenvalues, eigenvectors)
}
