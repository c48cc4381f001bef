use nalgebra::Point3;

use super::cloud::PointCloud;
use crate::geometry::{ObjectModel, Pose};

/// Uniform voxel grid over a point cloud for fixed-radius nearest-neighbour
/// queries. Cells are spatially hashed into a flat bucket table; colliding
/// cells only add candidates, which the exact distance test rejects.
#[derive(Debug, Clone)]
pub struct CloudIndex {
    points: Vec<Point3<f64>>,
    cell: f64,
    mask: usize,
    /// Bucket `b` holds `order[starts[b]..starts[b + 1]]`.
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl CloudIndex {
    /// Grid with cells of the typical query radius; queries of any radius are exact.
    pub fn new(cloud: &PointCloud, radius: f64) -> Self {
        assert!(radius > 0.0 && radius.is_finite(), "query radius must be positive");
        let cell = radius;
        let buckets = (2 * cloud.points.len()).next_power_of_two().max(16);
        let mask = buckets - 1;
        let keys: Vec<usize> = cloud.points.iter().map(|p| Self::bucket(mask, Self::key(cell, p))).collect();
        let mut starts = vec![0u32; buckets + 1];
        for &k in &keys {
            starts[k + 1] += 1;
        }
        for b in 0..buckets {
            starts[b + 1] += starts[b];
        }
        let mut fill = starts.clone();
        let mut order = vec![0u32; keys.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        CloudIndex { points: cloud.points.clone(), cell, mask, starts, order }
    }

    fn key(cell: f64, p: &Point3<f64>) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    fn bucket(mask: usize, [x, y, z]: [i64; 3]) -> usize {
        let h = (x.wrapping_mul(73_856_093) ^ y.wrapping_mul(19_349_663) ^ z.wrapping_mul(83_492_791)) as u64;
        (h.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) as usize & mask
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point within `radius` (ties to the lowest index).
    pub fn nearest_within(&self, q: &Point3<f64>, radius: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let lo = Self::key(self.cell, &(q - nalgebra::Vector3::repeat(radius)));
        let hi = Self::key(self.cell, &(q + nalgebra::Vector3::repeat(radius)));
        let r2 = radius * radius;
        let mut best: Option<(u32, f64)> = None;
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let b = Self::bucket(self.mask, [x, y, z]);
                    for &i in &self.order[self.starts[b] as usize..self.starts[b + 1] as usize] {
                        let d2 = (self.points[i as usize] - q).norm_squared();
                        if d2 <= r2 && best.is_none_or(|(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                            best = Some((i, d2));
                        }
                    }
                }
            }
        }
        best.map(|(i, d2)| (i as usize, d2.sqrt()))
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    /// Pairs (posed model point, nearest cloud point) within `d_t`, at most one
    /// per model point. `keep` filters model points by index.
    pub fn correspondences_filtered(
        &self,
        model: &ObjectModel,
        pose: &Pose,
        d_t: f64,
        mut keep: impl FnMut(usize) -> bool,
    ) -> Vec<(Point3<f64>, Point3<f64>)> {
        let mut out = Vec::new();
        if self.points.is_empty() {
            return out;
        }
        for (i, s) in model.surface_points().iter().enumerate() {
            if !keep(i) {
                continue;
            }
            let p = pose.transform_point(&s.position);
            if let Some((j, _)) = self.nearest_within(&p, d_t) {
                out.push((p, self.points[j]));
            }
        }
        out
    }

    pub fn correspondences(&self, model: &ObjectModel, pose: &Pose, d_t: f64) -> Vec<(Point3<f64>, Point3<f64>)> {
        self.correspondences_filtered(model, pose, d_t, |_| true)
    }
}

/// Nearest cloud point within `d_t` for each posed surface point.
pub fn correspondences(model: &ObjectModel, pose: &Pose, cloud: &PointCloud, d_t: f64) -> Vec<(Point3<f64>, Point3<f64>)> {
    CloudIndex::new(cloud, d_t).correspondences(model, pose, d_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexShape;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> ObjectModel {
        ObjectModel::new("c", ConvexShape::cuboid(Vector3::new(0.05, 0.05, 0.05)).unwrap(), 500.0, 128, 1).unwrap()
    }

    fn posed_cloud(m: &ObjectModel, pose: &Pose, shift: Vector3<f64>) -> PointCloud {
        PointCloud::new(m.surface_points().iter().map(|s| pose.transform_point(&s.position) + shift).collect())
    }

    #[test]
    fn identical_cloud_matches_every_point() {
        let m = cube();
        let pose = Pose::from_translation(0.1, 0.2, 0.3);
        let pairs = correspondences(&m, &pose, &posed_cloud(&m, &pose, Vector3::zeros()), 0.01);
        assert_eq!(pairs.len(), m.surface_count());
        assert!(pairs.iter().all(|(a, b)| (a - b).norm() == 0.0));
    }

    #[test]
    fn empty_and_far_clouds() {
        let m = cube();
        let pose = Pose::identity();
        assert!(correspondences(&m, &pose, &PointCloud::default(), 0.01).is_empty());
        let far = posed_cloud(&m, &pose, Vector3::new(0.0, 0.0, 0.2));
        assert!(correspondences(&m, &pose, &far, 0.01).is_empty());
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3<f64>> = (0..2000)
            .map(|_| Point3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)))
            .collect();
        let cloud = PointCloud::new(pts.clone());
        let index = CloudIndex::new(&cloud, 0.02);
        for _ in 0..200 {
            let q = Point3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let brute = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm()))
                .filter(|(_, d)| *d <= 0.02)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            assert_eq!(index.nearest_within(&q, 0.02).map(|x| x.0), brute.map(|x| x.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn at_most_one_pair_per_model_point(seed in 0u64..10_000, n in 0usize..3000) {
            let m = cube();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = (0..n)
                .map(|_| Point3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)))
                .collect();
            let pairs = correspondences(&m, &Pose::identity(), &PointCloud::new(pts), 0.01);
            prop_assert!(pairs.len() <= m.surface_count());
        }
    }
}
