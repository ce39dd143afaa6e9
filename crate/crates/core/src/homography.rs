//! Descriptor matching and planar homography estimation.
//!
//! The homography maps template-image pixels to scene-image pixels,
//! `[x', y', w']^T = H [x, y, 1]^T`, and is stored with `H[2,2] == 1`.
//! Estimation is a Hartley-normalized DLT, wrapped in a fixed-budget
//! RANSAC loop for robustness against wrong matches.

use nalgebra::{DMatrix, Matrix3, Point2, SMatrix, SVector, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Smallest admissible `|det(H)|` after normalization.
pub const MIN_ABS_DET: f64 = 1e-12;

/// Smallest admissible homogeneous scale when dehomogenizing.
pub const MIN_HOMOGENEOUS_W: f64 = 1e-9;

const MIN_SAMPLE_AREA_PX2: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("descriptor dimension mismatch: {template} vs {scene}")]
    DimensionMismatch { template: usize, scene: usize },
    #[error("empty feature set")]
    EmptyInput,
    #[error("malformed feature set: {0}")]
    MalformedFeatureSet(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientMatches(usize),
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("no consensus: {found} inliers, at least {required} required")]
    NoConsensus { found: usize, required: usize },
    #[error("projective degeneracy: |w'| = {0:e}")]
    ProjectiveDegeneracy(f64),
}

pub type Result<T> = std::result::Result<T, HomographyError>;

/// Keypoints and their descriptors, stored row-major with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    points: Vec<Point2<f64>>,
    descriptors: Vec<f64>,
    dim: usize,
}

impl FeatureSet {
    pub fn new(points: Vec<Point2<f64>>, descriptors: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != descriptors.len() {
            return Err(HomographyError::MalformedFeatureSet(format!(
                "{} points but {} descriptors",
                points.len(),
                descriptors.len()
            )));
        }
        let dim = descriptors.first().map_or(0, Vec::len);
        if !descriptors.is_empty() && dim < 2 {
            return Err(HomographyError::MalformedFeatureSet(format!(
                "descriptor dimension {dim} < 2"
            )));
        }
        if let Some(bad) = descriptors.iter().find(|d| d.len() != dim) {
            return Err(HomographyError::MalformedFeatureSet(format!(
                "descriptor of length {} in a set of dimension {dim}",
                bad.len()
            )));
        }
        Ok(Self {
            points,
            descriptors: descriptors.into_iter().flatten().collect(),
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Descriptor dimension `k`; zero for an empty set.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point2<f64> {
        self.points[i]
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.descriptors[i * self.dim..(i + 1) * self.dim]
    }
}

/// A template feature paired with its nearest scene feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub template: usize,
    pub scene: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.matches.iter().map(|m| (m.template, m.scene)).collect()
    }

    /// Resolves matched indices into point correspondences.
    pub fn correspondences(&self, template: &FeatureSet, scene: &FeatureSet) -> Vec<Correspondence> {
        self.matches
            .iter()
            .map(|m| Correspondence::new(template.point(m.template), scene.point(m.scene)))
            .collect()
    }
}

/// A template point and the scene point it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: Point2<f64>,
    pub dst: Point2<f64>,
}

impl Correspondence {
    pub fn new(src: Point2<f64>, dst: Point2<f64>) -> Self {
        Self { src, dst }
    }
}

/// Template dimensions in template-image pixels plus the physical pad side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateSpec {
    pub width: f64,
    pub height: f64,
    /// Pad side length in meters.
    pub physical_side: f64,
}

impl TemplateSpec {
    pub fn new(width: f64, height: f64, physical_side: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(HomographyError::InvalidParameter("template dimensions must be positive"));
        }
        Ok(Self { width, height, physical_side })
    }

    /// Corners (clockwise from the origin in image coordinates) and the center.
    pub fn points(&self) -> [Point2<f64>; 5] {
        let (w, h) = (self.width, self.height);
        [
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(0.0, h),
            Point2::new(w / 2.0, h / 2.0),
        ]
    }
}

/// Projective map normalized so that `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Normalizes `m` by its bottom-right entry and checks invertibility.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let h33 = m[(2, 2)];
        if !h33.is_finite() || h33.abs() < f64::EPSILON * m.abs().max() {
            return Err(HomographyError::DegenerateConfiguration);
        }
        let m = m / h33;
        let det = m.determinant();
        if !det.is_finite() || det.abs() <= MIN_ABS_DET {
            return Err(HomographyError::DegenerateConfiguration);
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.0.try_inverse().ok_or(HomographyError::DegenerateConfiguration)?;
        Self::from_matrix(inv)
    }

    pub fn apply(&self, p: &Point2<f64>) -> Result<Point2<f64>> {
        transfer(&self.0, p)
    }
}

fn transfer(m: &Matrix3<f64>, p: &Point2<f64>) -> Result<Point2<f64>> {
    let q = m * Vector3::new(p.x, p.y, 1.0);
    if !(q.z.abs() >= MIN_HOMOGENEOUS_W) {
        return Err(HomographyError::ProjectiveDegeneracy(q.z.abs()));
    }
    Ok(Point2::new(q.x / q.z, q.y / q.z))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest-neighbor descriptor matching with a ratio test.
///
/// Every template descriptor is paired with its closest scene descriptor
/// (Euclidean distance). The pair survives only if
/// `nearest < ratio * second_nearest`; with a single scene feature there is
/// no second neighbor and the pair is kept.
pub fn match_descriptors(template: &FeatureSet, scene: &FeatureSet, ratio: f64) -> Result<MatchSet> {
    if template.is_empty() || scene.is_empty() {
        return Err(HomographyError::EmptyInput);
    }
    if template.dim() != scene.dim() {
        return Err(HomographyError::DimensionMismatch {
            template: template.dim(),
            scene: scene.dim(),
        });
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(HomographyError::InvalidParameter("ratio must lie in (0, 1]"));
    }

    let mut matches = Vec::new();
    for ti in 0..template.len() {
        let td = template.descriptor(ti);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for si in 0..scene.len() {
            let d = euclidean(td, scene.descriptor(si));
            if d < best.1 {
                second = best.1;
                best = (si, d);
            } else if d < second {
                second = d;
            }
        }
        if best.1 < ratio * second {
            matches.push(Match { template: ti, scene: best.0, distance: best.1 });
        }
    }
    Ok(MatchSet { matches })
}

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to `sqrt(2)`.
fn normalizing_transform(points: impl Iterator<Item = Point2<f64>> + Clone) -> Option<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (mx, my) = (sx / n, sy / n);
    let mean_dist = points.map(|p| ((p.x - mx).powi(2) + (p.y - my).powi(2)).sqrt()).sum::<f64>() / n;
    if !(mean_dist > 1e-12) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

fn apply_affine(t: &Matrix3<f64>, p: &Point2<f64>) -> (f64, f64) {
    (t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

/// Least-squares DLT with Hartley normalization of both point sets.
///
/// Fails with `DegenerateConfiguration` when the design matrix has a null
/// space of dimension above one (collinear or coincident points) or when
/// the solution is a singular map.
pub fn estimate_homography_dlt(pairs: &[Correspondence]) -> Result<Homography> {
    let n = pairs.len();
    if n < 4 {
        return Err(HomographyError::InsufficientMatches(n));
    }
    let t_src = normalizing_transform(pairs.iter().map(|c| c.src))
        .ok_or(HomographyError::DegenerateConfiguration)?;
    let t_dst = normalizing_transform(pairs.iter().map(|c| c.dst))
        .ok_or(HomographyError::DegenerateConfiguration)?;

    // Padded to at least 9 rows so the thin SVD still exposes the null vector.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let (x, y) = apply_affine(&t_src, &c.src);
        let (u, v) = apply_affine(&t_dst, &c.dst);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(HomographyError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let s_max = svd.singular_values[order[order.len() - 1]];
    let s_second = svd.singular_values[order[1]];
    if !(s_max > 0.0) || s_second / s_max < 1e-10 {
        return Err(HomographyError::DegenerateConfiguration);
    }

    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(HomographyError::DegenerateConfiguration)?;
    Homography::from_matrix(t_dst_inv * hn * t_src)
}

/// Exact homography through four pairs: an 8x8 solve with `h33 = 1` in
/// normalized coordinates, falling back to the SVD path when that system is
/// singular.
fn homography_from_sample(pairs: &[Correspondence; 4]) -> Result<Homography> {
    let t_src = normalizing_transform(pairs.iter().map(|c| c.src))
        .ok_or(HomographyError::DegenerateConfiguration)?;
    let t_dst = normalizing_transform(pairs.iter().map(|c| c.dst))
        .ok_or(HomographyError::DegenerateConfiguration)?;
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (i, c) in pairs.iter().enumerate() {
        let (x, y) = apply_affine(&t_src, &c.src);
        let (u, v) = apply_affine(&t_dst, &c.dst);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = x;
        a[(r0, 1)] = y;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -u * x;
        a[(r0, 7)] = -u * y;
        b[r0] = u;
        a[(r1, 3)] = x;
        a[(r1, 4)] = y;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -v * x;
        a[(r1, 7)] = -v * y;
        b[r1] = v;
    }
    let Some(h) = a.lu().solve(&b).filter(|h| h.iter().all(|v| v.is_finite())) else {
        return estimate_homography_dlt(pairs);
    };
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let t_dst_inv = t_dst.try_inverse().ok_or(HomographyError::DegenerateConfiguration)?;
    Homography::from_matrix(t_dst_inv * hn * t_src)
}

/// Root mean square of the forward and backward transfer distances, in px.
pub fn symmetric_transfer_error(h: &Matrix3<f64>, h_inv: &Matrix3<f64>, c: &Correspondence) -> f64 {
    let fwd = match transfer(h, &c.src) {
        Ok(p) => (p - c.dst).norm_squared(),
        Err(_) => return f64::INFINITY,
    };
    let bwd = match transfer(h_inv, &c.dst) {
        Ok(p) => (p - c.src).norm_squared(),
        Err(_) => return f64::INFINITY,
    };
    ((fwd + bwd) / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub inlier_threshold_px: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { inlier_threshold_px: 3.0, max_iters: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub homography: Homography,
    pub inliers: Vec<bool>,
}

impl RansacFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

fn twice_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
}

fn has_collinear_triple(pts: [Point2<f64>; 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .any(|t| twice_area(&pts[t[0]], &pts[t[1]], &pts[t[2]]) < 2.0 * MIN_SAMPLE_AREA_PX2)
}

fn consensus(h: &Homography, pairs: &[Correspondence], threshold: f64) -> Option<(Vec<bool>, usize, f64)> {
    let inv = h.inverse().ok()?;
    let mut mask = Vec::with_capacity(pairs.len());
    let mut count = 0;
    let mut cost = 0.0;
    for c in pairs {
        let e = symmetric_transfer_error(h.matrix(), inv.matrix(), c);
        let inlier = e < threshold;
        if inlier {
            count += 1;
            cost += e;
        }
        mask.push(inlier);
    }
    Some((mask, count, cost))
}

/// Fixed-budget RANSAC around the DLT.
///
/// Each iteration fits a minimal 4-pair sample and scores it by the number
/// of pairs whose symmetric transfer error is below the threshold (ties go
/// to the lower summed residual). The best hypothesis is refit on all of its
/// inliers. Fully deterministic for a given seed.
pub fn ransac_homography(pairs: &[Correspondence], params: &RansacParams) -> Result<RansacFit> {
    if !(params.inlier_threshold_px > 0.0) {
        return Err(HomographyError::InvalidParameter("inlier threshold must be positive"));
    }
    if params.max_iters == 0 {
        return Err(HomographyError::InvalidParameter("max_iters must be at least 1"));
    }
    let n = pairs.len();
    if n < 4 {
        return Err(HomographyError::NoConsensus { found: n, required: 4 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Vec<bool>, usize, f64)> = None;
    let mut sample_buf = [Correspondence::new(Point2::origin(), Point2::origin()); 4];

    for _ in 0..params.max_iters {
        let idx = sample(&mut rng, n, 4);
        for (slot, i) in sample_buf.iter_mut().zip(idx.iter()) {
            *slot = pairs[i];
        }
        let src = sample_buf.map(|c| c.src);
        let dst = sample_buf.map(|c| c.dst);
        if has_collinear_triple(src) || has_collinear_triple(dst) {
            continue;
        }
        let Ok(h) = homography_from_sample(&sample_buf) else {
            continue;
        };
        let Some((mask, count, cost)) = consensus(&h, pairs, params.inlier_threshold_px) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, _, bc, bcost)) => count > *bc || (count == *bc && cost < *bcost),
        };
        if better {
            best = Some((h, mask, count, cost));
        }
    }

    let (h, mask, count, _) = best.ok_or(HomographyError::DegenerateConfiguration)?;
    if count < 4 {
        return Err(HomographyError::NoConsensus { found: count, required: 4 });
    }

    let inlier_pairs: Vec<Correspondence> =
        pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| *c).collect();
    if let Ok(refit) = estimate_homography_dlt(&inlier_pairs) {
        if let Some((refit_mask, refit_count, _)) = consensus(&refit, pairs, params.inlier_threshold_px) {
            if refit_count >= 4 {
                return Ok(RansacFit { homography: refit, inliers: refit_mask });
            }
        }
    }
    Ok(RansacFit { homography: h, inliers: mask })
}

/// Maps the four template corners and the template center into the scene.
///
/// The returned array is `[c0, c1, c2, c3, center]` in the order of
/// [`TemplateSpec::points`]. The center is the mapped template center, never
/// the average of the mapped corners.
pub fn project_template(h: &Homography, template: &TemplateSpec) -> Result<[Point2<f64>; 5]> {
    let pts = template.points();
    let mut out = [Point2::origin(); 5];
    for (o, p) in out.iter_mut().zip(pts.iter()) {
        *o = h.apply(p)?;
    }
    Ok(out)
}
