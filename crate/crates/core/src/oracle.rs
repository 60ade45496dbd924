//! Exact Euclidean distance transform used as ground truth.
//!
//! Nothing here shares code with the propagation path.

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use crate::key::VoxelKey;
use crate::map::EsdfMap;

/// Exact distance (voxels) from each domain voxel to the nearest occupied
/// voxel, via a k-d tree. `+inf` when `occupied` is empty.
pub fn exact_edt(occupied: &[VoxelKey], domain: &[VoxelKey]) -> Vec<f64> {
    if occupied.is_empty() {
        return vec![f64::INFINITY; domain.len()];
    }
    let points: Vec<[f64; 3]> = occupied.iter().map(|&k| to_f64(k)).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&points);
    domain
        .iter()
        .map(|k| {
            let nn = tree.nearest_one::<SquaredEuclidean>(&to_f64(*k));
            // Squared distances between lattice points are exact integers.
            let sq = occupied[nn.item as usize].dist_sq(*k);
            (sq as f64).sqrt()
        })
        .collect()
}

/// Direct O(|domain|·|occupied|) scan; the cross-check for [`exact_edt`].
pub fn exact_edt_brute(occupied: &[VoxelKey], domain: &[VoxelKey]) -> Vec<f64> {
    domain
        .iter()
        .map(|v| {
            occupied
                .iter()
                .map(|o| o.dist_sq(*v))
                .min()
                .map_or(f64::INFINITY, |sq| (sq as f64).sqrt())
        })
        .collect()
}

fn to_f64(k: VoxelKey) -> [f64; 3] {
    [k.x as f64, k.y as f64, k.z as f64]
}

/// Comparison of a field against exact distances, in voxel units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub rms_error_voxels: f64,
    pub max_error_voxels: f64,
    /// Smallest `field - truth`; negative only if the field underestimates.
    pub min_signed_error_voxels: f64,
    pub compared_voxel_count: usize,
    /// Voxels skipped because the field or the truth is infinite.
    pub excluded_voxel_count: usize,
}

impl ErrorReport {
    /// No voxel had finite values on both sides.
    pub fn is_empty(&self) -> bool {
        self.compared_voxel_count == 0
    }
}

/// Compares paired field and truth values.
pub fn compare(field: &[f64], truth: &[f64]) -> ErrorReport {
    assert_eq!(field.len(), truth.len(), "field and truth must cover the same domain");
    let mut r = ErrorReport {
        min_signed_error_voxels: f64::INFINITY,
        ..Default::default()
    };
    let mut sum_sq = 0.0;
    for (&f, &t) in field.iter().zip(truth) {
        if !f.is_finite() || !t.is_finite() {
            r.excluded_voxel_count += 1;
            continue;
        }
        let e = f - t;
        sum_sq += e * e;
        r.max_error_voxels = r.max_error_voxels.max(e.abs());
        r.min_signed_error_voxels = r.min_signed_error_voxels.min(e);
        r.compared_voxel_count += 1;
    }
    if r.compared_voxel_count > 0 {
        r.rms_error_voxels = (sum_sq / r.compared_voxel_count as f64).sqrt();
    } else {
        r.min_signed_error_voxels = 0.0;
    }
    r
}

/// Ground truth over the map's observed voxels, with its occupied voxels as
/// obstacles. Returns `(domain, truth)`.
pub fn ground_truth(map: &EsdfMap) -> (Vec<VoxelKey>, Vec<f64>) {
    let domain = map.observed_keys();
    let truth = exact_edt(&map.occupied_keys(), &domain);
    (domain, truth)
}

/// RMS error of the map's field over its observed voxels.
pub fn rms_error(map: &EsdfMap, domain: &[VoxelKey], truth: &[f64]) -> ErrorReport {
    let field: Vec<f64> = domain
        .iter()
        .map(|&k| map.distance_voxels(k).unwrap_or(f64::INFINITY))
        .collect();
    compare(&field, truth)
}

/// Convenience: ground truth plus comparison in one call.
pub fn evaluate(map: &EsdfMap) -> ErrorReport {
    let (domain, truth) = ground_truth(map);
    rms_error(map, &domain, &truth)
}
