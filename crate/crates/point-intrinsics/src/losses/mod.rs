//! Training objectives over per-point maps with lattice structure.
//!
//! Stage one supervises light directions and shading with squared error.
//! Stage two constrains albedo with a reconstruction term, a lattice
//! gradient term and a cross color ratio term; the three are reported
//! separately and summed.

use crate::autodiff::{Scalar, Tape, Tensor, Var};
use crate::geometry::PointCloud;
use thiserror::Error;

/// Channels are clamped to this floor inside cross color ratios so black
/// pixels cannot produce unbounded ratios or gradients.
pub const CCR_EPSILON: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("lattice error: {0}")]
    Lattice(String),
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Adjacency of points mapped onto an image lattice. `pairs_u` holds
/// (pixel, right neighbor) point indices, `pairs_v` (pixel, down neighbor);
/// together they enumerate each 4-neighborhood pair exactly once.
#[derive(Debug, Clone)]
pub struct Lattice {
    n_points: usize,
    pairs_u: Vec<(usize, usize)>,
    pairs_v: Vec<(usize, usize)>,
}

impl Lattice {
    pub fn from_cloud(cloud: &PointCloud) -> Result<Self> {
        let map = cloud
            .pixel_map()
            .ok_or_else(|| LossError::Lattice("point cloud has no pixel map".into()))?;
        Self::from_pixel_map(map, cloud.width(), cloud.height())
    }

    pub fn from_pixel_map(map: &[(u32, u32)], width: usize, height: usize) -> Result<Self> {
        let mut grid: Vec<Option<u32>> = vec![None; width * height];
        for (i, &(u, v)) in map.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            if u >= width || v >= height {
                return Err(LossError::Lattice(format!("pixel ({u}, {v}) out of bounds")));
            }
            if grid[v * width + u].is_some() {
                return Err(LossError::Lattice(format!("pixel ({u}, {v}) mapped twice")));
            }
            grid[v * width + u] = Some(i as u32);
        }
        let mut pairs_u = Vec::new();
        let mut pairs_v = Vec::new();
        for (i, &(u, v)) in map.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            if u + 1 < width {
                if let Some(j) = grid[v * width + u + 1] {
                    pairs_u.push((i, j as usize));
                }
            }
            if v + 1 < height {
                if let Some(j) = grid[(v + 1) * width + u] {
                    pairs_v.push((i, j as usize));
                }
            }
        }
        Ok(Self { n_points: map.len(), pairs_u, pairs_v })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// All adjacent pairs (horizontal then vertical).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs_u.iter().chain(self.pairs_v.iter()).copied()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs_u.len() + self.pairs_v.len()
    }
}

/// Cross color ratios of two points of an n×3 map, with channels clamped to
/// [`CCR_EPSILON`]: M_RG = R₁G₂/(R₂G₁), M_RB = R₁B₂/(R₂B₁), M_GB = G₁B₂/(G₂B₁).
pub fn ccr<T: Scalar>(values: &Tensor<T>, p1: usize, p2: usize) -> (T, T, T) {
    let eps = T::from_f64(CCR_EPSILON);
    let at = |p: usize, c: usize| values.data()[p * 3 + c].max(eps);
    let (r1, g1, b1) = (at(p1, 0), at(p1, 1), at(p1, 2));
    let (r2, g2, b2) = (at(p2, 0), at(p2, 1), at(p2, 2));
    (r1 * g2 / (r2 * g1), r1 * b2 / (r2 * b1), g1 * b2 / (g2 * b1))
}

fn check_points<T: Scalar>(
    tape: &Tape<T>,
    lattice: &Lattice,
    gt: &Tensor<T>,
    hat: Var,
    what: &str,
) -> Result<()> {
    let n = lattice.n_points();
    if gt.shape() != [n, 3] {
        return Err(LossError::CountMismatch(format!(
            "{what}: ground truth shape {:?}, lattice has {n} points",
            gt.shape()
        )));
    }
    if tape.shape(hat) != [n, 3] {
        return Err(LossError::CountMismatch(format!(
            "{what}: prediction shape {:?}, lattice has {n} points",
            tape.shape(hat)
        )));
    }
    Ok(())
}

/// Stage-one objective: mean |L−L̂|² + mean |S−Ŝ|². The light term is
/// present only when a light ground truth exists.
pub fn shading_loss<T: Scalar>(
    tape: &mut Tape<T>,
    light_gt: Option<&Tensor<T>>,
    light_hat: Var,
    shading_gt: &Tensor<T>,
    shading_hat: Var,
) -> Result<Var> {
    if shading_gt.shape() != tape.shape(shading_hat) {
        return Err(LossError::CountMismatch(format!(
            "shading_loss: {:?} vs {:?}",
            shading_gt.shape(),
            tape.shape(shading_hat)
        )));
    }
    let s_gt = tape.leaf(shading_gt);
    let s_term = tape.mse(s_gt, shading_hat)?;
    match light_gt {
        None => Ok(s_term),
        Some(light) => {
            if light.shape() != tape.shape(light_hat) {
                return Err(LossError::CountMismatch(format!(
                    "shading_loss: light {:?} vs {:?}",
                    light.shape(),
                    tape.shape(light_hat)
                )));
            }
            let l_gt = tape.leaf(light);
            let l_term = tape.mse(l_gt, light_hat)?;
            Ok(tape.add(l_term, s_term)?)
        }
    }
}

/// Mean over adjacent pairs of Σ|M_c − M̂_c| across the three cross color
/// ratios. Invariant to per-point positive scaling of the prediction.
pub fn ccr_loss<T: Scalar>(
    tape: &mut Tape<T>,
    lattice: &Lattice,
    albedo_gt: &Tensor<T>,
    albedo_hat: Var,
) -> Result<Var> {
    check_points(tape, lattice, albedo_gt, albedo_hat, "ccr_loss")?;
    let n_pairs = lattice.pair_count();
    if n_pairs == 0 {
        return Err(LossError::Lattice("no adjacent pairs on the lattice".into()));
    }
    let (mut p1s, mut p2s) = (Vec::with_capacity(n_pairs), Vec::with_capacity(n_pairs));
    let mut gt_ratios = [Vec::with_capacity(n_pairs), Vec::with_capacity(n_pairs), Vec::with_capacity(n_pairs)];
    for (p1, p2) in lattice.pairs() {
        p1s.push(p1);
        p2s.push(p2);
        let (rg, rb, gb) = ccr(albedo_gt, p1, p2);
        gt_ratios[0].push(rg);
        gt_ratios[1].push(rb);
        gt_ratios[2].push(gb);
    }

    let eps = T::from_f64(CCR_EPSILON);
    let clamped = tape.clamp_min(albedo_hat, eps)?;
    let a1 = tape.gather_rows(clamped, &p1s)?;
    let a2 = tape.gather_rows(clamped, &p2s)?;
    let chan = |tape: &mut Tape<T>, v: Var, c: usize| tape.select_columns(v, &[c]);
    let r1 = chan(tape, a1, 0)?;
    let g1 = chan(tape, a1, 1)?;
    let b1 = chan(tape, a1, 2)?;
    let r2 = chan(tape, a2, 0)?;
    let g2 = chan(tape, a2, 1)?;
    let b2 = chan(tape, a2, 2)?;

    // (numerator pair, denominator pair, gt ratio column)
    let combos = [((r1, g2), (r2, g1), 0usize), ((r1, b2), (r2, b1), 1), ((g1, b2), (g2, b1), 2)];
    let mut terms = Vec::with_capacity(3);
    for ((na, nb), (da, db), gt_col) in combos {
        let num = tape.mul(na, nb)?;
        let den = tape.mul(da, db)?;
        let ratio = tape.div(num, den)?;
        let gt = tape.constant(vec![n_pairs, 1], gt_ratios[gt_col].clone())?;
        let diff = tape.sub(gt, ratio)?;
        terms.push(tape.abs(diff)?);
    }
    let rg_rb = tape.add(terms[0], terms[1])?;
    let all = tape.add(rg_rb, terms[2])?;
    Ok(tape.mean(all)?)
}

/// Squared difference of forward-difference lattice gradients, averaged over
/// both directions, all points and all channels; pixels whose neighbor is
/// missing contribute zero in both maps.
pub fn gradient_loss<T: Scalar>(
    tape: &mut Tape<T>,
    lattice: &Lattice,
    albedo_gt: &Tensor<T>,
    albedo_hat: Var,
) -> Result<Var> {
    check_points(tape, lattice, albedo_gt, albedo_hat, "gradient_loss")?;
    let n = lattice.n_points();
    let denom = T::from_usize(2 * n * 3);

    let mut total: Option<Var> = None;
    for pairs in [&lattice.pairs_u, &lattice.pairs_v] {
        if pairs.is_empty() {
            continue;
        }
        let from: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
        let to: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        let mut gt_diff = Vec::with_capacity(pairs.len() * 3);
        for &(i, j) in pairs {
            for c in 0..3 {
                gt_diff.push(albedo_gt.data()[j * 3 + c] - albedo_gt.data()[i * 3 + c]);
            }
        }
        let gt = tape.constant(vec![pairs.len(), 3], gt_diff)?;
        let hat_to = tape.gather_rows(albedo_hat, &to)?;
        let hat_from = tape.gather_rows(albedo_hat, &from)?;
        let hat_diff = tape.sub(hat_to, hat_from)?;
        let residual = tape.sub(gt, hat_diff)?;
        let squared = tape.mul(residual, residual)?;
        let ssq = tape.sum(squared)?;
        total = Some(match total {
            None => ssq,
            Some(t) => tape.add(t, ssq)?,
        });
    }
    let total = match total {
        Some(t) => t,
        // A lattice with no neighbors at all: both gradients are zero maps.
        None => tape.constant(vec![1], vec![T::ZERO])?,
    };
    Ok(tape.scale(total, T::ONE / denom)?)
}

/// mse(A, Â) + mse(I, Î).
pub fn reconstruction_loss<T: Scalar>(
    tape: &mut Tape<T>,
    albedo_gt: &Tensor<T>,
    albedo_hat: Var,
    image_gt: &Tensor<T>,
    image_hat: Var,
) -> Result<Var> {
    if albedo_gt.shape() != tape.shape(albedo_hat) || image_gt.shape() != tape.shape(image_hat) {
        return Err(LossError::CountMismatch("reconstruction_loss: shapes differ".into()));
    }
    let a_gt = tape.leaf(albedo_gt);
    let i_gt = tape.leaf(image_gt);
    let a_term = tape.mse(a_gt, albedo_hat)?;
    let i_term = tape.mse(i_gt, image_hat)?;
    Ok(tape.add(a_term, i_term)?)
}

/// Multipliers for the stage-two terms; all 1.0 by default.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub gradient: f64,
    pub cross_ratio: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { reconstruction: 1.0, gradient: 1.0, cross_ratio: 1.0 }
    }
}

/// The stage-two total with its parts, each reported for logging.
pub struct AlbedoLossParts {
    pub total: Var,
    pub reconstruction: Var,
    pub gradient: Var,
    pub cross_ratio: Var,
}

/// L_albedo = L_rec + L_grad + L_ccr (optionally weighted).
#[allow(clippy::too_many_arguments)]
pub fn albedo_loss<T: Scalar>(
    tape: &mut Tape<T>,
    lattice: &Lattice,
    albedo_gt: &Tensor<T>,
    albedo_hat: Var,
    image_gt: &Tensor<T>,
    image_hat: Var,
    weights: &LossWeights,
) -> Result<AlbedoLossParts> {
    let reconstruction = reconstruction_loss(tape, albedo_gt, albedo_hat, image_gt, image_hat)?;
    let gradient = gradient_loss(tape, lattice, albedo_gt, albedo_hat)?;
    let cross_ratio = ccr_loss(tape, lattice, albedo_gt, albedo_hat)?;
    let total = if *weights == LossWeights::default() {
        let partial = tape.add(reconstruction, gradient)?;
        tape.add(partial, cross_ratio)?
    } else {
        let r = tape.scale(reconstruction, T::from_f64(weights.reconstruction))?;
        let g = tape.scale(gradient, T::from_f64(weights.gradient))?;
        let c = tape.scale(cross_ratio, T::from_f64(weights.cross_ratio))?;
        let partial = tape.add(r, g)?;
        tape.add(partial, c)?
    };
    Ok(AlbedoLossParts { total, reconstruction, gradient, cross_ratio })
}
