//! Structured P1 triangulations of `(0,1)^d`, `d ∈ {1, 2}`, and sampling
//! point sets.
//!
//! Node `(i, j)` of a 2-d mesh with `M` subdivisions sits at `(i/M, j/M)` and
//! has index `j (M+1) + i`. Every square is split along its lower-left to
//! upper-right diagonal into a lower triangle `[a, b, c]` and an upper
//! triangle `[a, c, d]` (counter-clockwise, `a` the lower-left corner).

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Seeded, counter-based generator for one named purpose.
pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const POINT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    divisions: usize,
    /// Flat coordinates, `dim` per node.
    coords: Vec<f64>,
    /// Flat connectivity, `dim + 1` per element.
    elements: Vec<usize>,
    boundary: Vec<bool>,
}

/// Element containing a point, with the point's barycentric coordinates
/// (only the first `dim + 1` entries are meaningful).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub element: usize,
    pub bary: [f64; 3],
}

impl Mesh {
    /// Uniform mesh of the unit interval (`dim = 1`) or square (`dim = 2`).
    pub fn structured(dim: usize, divisions: usize) -> Result<Self> {
        if divisions == 0 {
            return Err(Error::Config("mesh needs at least one subdivision".into()));
        }
        let m = divisions;
        let step = 1.0 / m as f64;
        match dim {
            1 => {
                let coords: Vec<f64> = (0..=m).map(|i| i as f64 * step).collect();
                let elements = (0..m).flat_map(|i| [i, i + 1]).collect();
                let boundary = (0..=m).map(|i| i == 0 || i == m).collect();
                Ok(Self {
                    dim,
                    divisions,
                    coords,
                    elements,
                    boundary,
                })
            }
            2 => {
                let mut coords = Vec::with_capacity(2 * (m + 1) * (m + 1));
                let mut boundary = Vec::with_capacity((m + 1) * (m + 1));
                for j in 0..=m {
                    for i in 0..=m {
                        coords.push(i as f64 * step);
                        coords.push(j as f64 * step);
                        boundary.push(i == 0 || i == m || j == 0 || j == m);
                    }
                }
                let mut elements = Vec::with_capacity(6 * m * m);
                for j in 0..m {
                    for i in 0..m {
                        let a = j * (m + 1) + i;
                        let b = a + 1;
                        let c = b + m + 1;
                        let d = a + m + 1;
                        elements.extend_from_slice(&[a, b, c, a, c, d]);
                    }
                }
                Ok(Self {
                    dim,
                    divisions,
                    coords,
                    elements,
                    boundary,
                })
            }
            _ => Err(Error::Config(format!("unsupported dimension {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Element diameter: `1/M` in 1-d, `√2/M` in 2-d.
    pub fn h(&self) -> f64 {
        (self.dim as f64).sqrt() / self.divisions as f64
    }

    /// Side length of the grid cells, `1/M`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks(self.dim + 1)
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Length (1-d) or area (2-d) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        let nodes = self.element(e);
        match self.dim {
            1 => self.node(nodes[1])[0] - self.node(nodes[0])[0],
            _ => {
                let (p0, p1, p2) = (self.node(nodes[0]), self.node(nodes[1]), self.node(nodes[2]));
                0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
            }
        }
    }

    /// Finds the element containing `x` in O(1).
    ///
    /// Points on the diagonal of a square go to the lower triangle.
    pub fn locate(&self, x: &[f64]) -> Result<Location> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let m = self.divisions;
        let cell = |c: f64| -> (usize, f64) {
            let scaled = c * m as f64;
            let i = (scaled.floor() as usize).min(m - 1);
            (i, (scaled - i as f64).clamp(0.0, 1.0))
        };
        match self.dim {
            1 => {
                let (i, t) = cell(x[0]);
                Ok(Location {
                    element: i,
                    bary: [1.0 - t, t, 0.0],
                })
            }
            _ => {
                let (i, fx) = cell(x[0]);
                let (j, fy) = cell(x[1]);
                let square = j * m + i;
                if fx >= fy {
                    Ok(Location {
                        element: 2 * square,
                        bary: [1.0 - fx, fx - fy, fy],
                    })
                } else {
                    Ok(Location {
                        element: 2 * square + 1,
                        bary: [1.0 - fy, fx, fy - fx],
                    })
                }
            }
        }
    }

    /// Writes `nodes.csv` (`id,x[,y]`) and `elements.csv` (`id,n0,n1[,n2]`).
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let mut nodes = csv::Writer::from_path(dir.join("nodes.csv"))?;
        let axes = ["x", "y"];
        let mut header = vec!["id".to_string()];
        header.extend(axes[..self.dim].iter().map(|s| s.to_string()));
        nodes.write_record(&header)?;
        for i in 0..self.num_nodes() {
            let mut row = vec![i.to_string()];
            row.extend(self.node(i).iter().map(|c| c.to_string()));
            nodes.write_record(&row)?;
        }
        nodes.flush()?;

        let mut elems = csv::Writer::from_path(dir.join("elements.csv"))?;
        let mut header = vec!["id".to_string()];
        header.extend((0..=self.dim).map(|k| format!("n{k}")));
        elems.write_record(&header)?;
        for (e, nodes) in self.elements().enumerate() {
            let mut row = vec![e.to_string()];
            row.extend(nodes.iter().map(|n| n.to_string()));
            elems.write_record(&row)?;
        }
        elems.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    /// `k^d` lattice including the boundary gridlines.
    Uniform,
    /// Element barycenters of a `k`-mesh, randomly displaced.
    Perturbed,
    /// Clustered at the origin, radius `u²` for uniform `u`.
    Radial,
}

impl std::str::FromStr for PointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "perturbed" => Ok(Self::Perturbed),
            "radial" => Ok(Self::Radial),
            other => Err(Error::Config(format!("unknown point kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    kind: PointKind,
}

impl PointSet {
    /// Wraps explicit coordinates (flat, `dim` per point).
    pub fn from_coords(dim: usize, coords: Vec<f64>, kind: PointKind) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("unsupported dimension {dim}")));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InsufficientPoints {
                needed: 1,
                found: coords.len() / dim,
            });
        }
        if let Some(bad) = coords.chunks(dim).find(|p| p.iter().any(|c| !(0.0..=1.0).contains(c))) {
            return Err(Error::OutOfDomain(bad.to_vec()));
        }
        Ok(Self { dim, coords, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    /// Writes `points.csv` (`id,x[,y]`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string(), "x".to_string()];
        if self.dim == 2 {
            header.push("y".into());
        }
        w.write_record(&header)?;
        for (i, p) in self.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generates a sampling point set.
///
/// `k` is the points per side (uniform), the grid resolution whose element
/// centers are perturbed (perturbed), or the square root of the number of
/// draws (radial).
pub fn generate_points(dim: usize, kind: PointKind, k: usize, seed: u64) -> Result<PointSet> {
    if k < 2 {
        return Err(Error::Config(format!("point generator needs k >= 2, got {k}")));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::Config(format!("unsupported dimension {dim}")));
    }
    let mut rng = rng_stream(seed, POINT_STREAM);
    let coords = match kind {
        PointKind::Uniform => {
            let t = |i: usize| i as f64 / (k - 1) as f64;
            if dim == 1 {
                (0..k).map(t).collect()
            } else {
                let mut c = Vec::with_capacity(2 * k * k);
                for j in 0..k {
                    for i in 0..k {
                        c.push(t(i));
                        c.push(t(j));
                    }
                }
                c
            }
        }
        PointKind::Perturbed => {
            let mesh = Mesh::structured(dim, k)?;
            let bound = 0.25 / k as f64;
            let mut c = Vec::with_capacity(mesh.num_elements() * dim);
            for nodes in mesh.elements() {
                for axis in 0..dim {
                    let center = nodes.iter().map(|&n| mesh.node(n)[axis]).sum::<f64>() / nodes.len() as f64;
                    c.push(center + rng.random_range(-bound..bound));
                }
            }
            c
        }
        PointKind::Radial => {
            let draws = k * k;
            let mut c = Vec::with_capacity(draws * dim);
            while c.len() < draws * dim {
                let u: f64 = rng.random();
                let r = u * u;
                if dim == 1 {
                    c.push(r);
                } else {
                    let theta = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
                    let (x, y) = (r * theta.cos(), r * theta.sin());
                    if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                        c.push(x);
                        c.push(y);
                    }
                }
            }
            c
        }
    };
    PointSet::from_coords(dim, coords, kind)
}

/// Fill distance, separation distance and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingQuality {
    pub d_max: f64,
    pub d_min: f64,
    pub ratio: f64,
}

pub const DEFAULT_PROBE_RESOLUTION: usize = 256;

/// Measures quasi-uniformity of a point set.
///
/// `d_min` is the exact minimal pairwise distance; `d_max` is the fill
/// distance `sup_x min_i |x − x_i|` with the sup taken over a probe lattice
/// of `probe_resolution` points per side.
pub fn quasi_uniformity(points: &PointSet, probe_resolution: usize) -> Result<SamplingQuality> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            found: points.len(),
        });
    }
    if probe_resolution < 64 {
        return Err(Error::Config(format!(
            "probe resolution must be at least 64, got {probe_resolution}"
        )));
    }
    let grid = BucketGrid::new(points);

    let d_min = (0..points.len())
        .map(|i| grid.nearest(points.point(i), Some(i)))
        .fold(f64::INFINITY, f64::min);

    let t = |i: usize| i as f64 / (probe_resolution - 1) as f64;
    let mut d_max = 0.0f64;
    let mut probe = [0.0; 2];
    let per_axis = probe_resolution;
    let total = per_axis.pow(points.dim() as u32);
    for idx in 0..total {
        probe[0] = t(idx % per_axis);
        probe[1] = t(idx / per_axis);
        d_max = d_max.max(grid.nearest(&probe[..points.dim()], None));
    }

    Ok(SamplingQuality {
        d_max,
        d_min,
        ratio: d_max / d_min,
    })
}

/// Uniform bucketing of points for nearest-neighbour queries in the unit cube.
struct BucketGrid<'a> {
    points: &'a PointSet,
    cells: usize,
    start: Vec<usize>,
    members: Vec<usize>,
}

impl<'a> BucketGrid<'a> {
    fn new(points: &'a PointSet) -> Self {
        let dim = points.dim();
        let n = points.len();
        let cells = ((n as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let total = cells.pow(dim as u32);
        let keys: Vec<usize> = points.iter().map(|p| Self::key(cells, p)).collect();
        let mut start = vec![0usize; total + 1];
        for &k in &keys {
            start[k + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut members = vec![0usize; n];
        for (i, &k) in keys.iter().enumerate() {
            members[fill[k]] = i;
            fill[k] += 1;
        }
        Self {
            points,
            cells,
            start,
            members,
        }
    }

    fn cell_index(cells: usize, c: f64) -> usize {
        ((c * cells as f64).floor() as usize).min(cells - 1)
    }

    fn key(cells: usize, p: &[f64]) -> usize {
        p.iter()
            .rev()
            .fold(0, |acc, &c| acc * cells + Self::cell_index(cells, c))
    }

    /// Distance from `x` to the nearest point other than `skip`.
    fn nearest(&self, x: &[f64], skip: Option<usize>) -> f64 {
        let dim = self.points.dim();
        let width = 1.0 / self.cells as f64;
        let home: Vec<usize> = x.iter().map(|&c| Self::cell_index(self.cells, c)).collect();
        let mut best = f64::INFINITY;
        let mut ring = 0usize;
        loop {
            // every point outside the visited block is at least ring*width away
            let lo: Vec<usize> = home.iter().map(|&h| h.saturating_sub(ring)).collect();
            let hi: Vec<usize> = home.iter().map(|&h| (h + ring).min(self.cells - 1)).collect();
            let mut visit = |cell: usize| {
                for &i in &self.members[self.start[cell]..self.start[cell + 1]] {
                    if Some(i) == skip {
                        continue;
                    }
                    let d2: f64 = self.points.point(i).iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                    best = best.min(d2.sqrt());
                }
            };
            if dim == 1 {
                for i in lo[0]..=hi[0] {
                    if ring == 0 || i.abs_diff(home[0]) == ring {
                        visit(i);
                    }
                }
            } else {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        if ring == 0 || i.abs_diff(home[0]) == ring || j.abs_diff(home[1]) == ring {
                            visit(j * self.cells + i);
                        }
                    }
                }
            }
            let covered = lo.iter().all(|&l| l == 0) && hi.iter().all(|&h| h == self.cells - 1);
            if best <= ring as f64 * width || covered {
                return best;
            }
            ring += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn point_in_triangle(mesh: &Mesh, e: usize, x: &[f64]) -> bool {
        let n = mesh.element(e);
        let (a, b, c) = (mesh.node(n[0]), mesh.node(n[1]), mesh.node(n[2]));
        let cross = |p: &[f64], q: &[f64], r: &[f64]| (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        let eps = 1e-14;
        cross(a, b, x) >= -eps && cross(b, c, x) >= -eps && cross(c, a, x) >= -eps
    }

    #[test]
    fn two_by_two_mesh() {
        let mesh = Mesh::structured(2, 2).unwrap();
        assert_eq!(mesh.num_nodes(), 9);
        assert_eq!(mesh.num_elements(), 8);
        let interior: Vec<_> = (0..9).filter(|&i| !mesh.is_boundary(i)).collect();
        assert_eq!(interior, vec![4]);
        assert_eq!(mesh.node(4), &[0.5, 0.5]);
    }

    #[test]
    fn interval_mesh() {
        let mesh = Mesh::structured(1, 4).unwrap();
        let xs: Vec<f64> = (0..5).map(|i| mesh.node(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(mesh.num_elements(), 4);
        assert_eq!((0..5).filter(|&i| !mesh.is_boundary(i)).count(), 3);
    }

    #[test]
    fn paper_mesh_size() {
        let mesh = Mesh::structured(2, 36).unwrap();
        assert_eq!(mesh.num_nodes(), 1369);
        assert_eq!(mesh.num_elements(), 2592);
        assert_abs_diff_eq!(mesh.h(), 2f64.sqrt() / 36.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mesh.spacing(), 1.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_mesh_config() {
        assert!(matches!(Mesh::structured(3, 4), Err(Error::Config(_))));
        assert!(matches!(Mesh::structured(2, 0), Err(Error::Config(_))));
    }

    #[test]
    fn mesh_invariants() {
        for dim in 1..=2 {
            for m in [1, 2, 3, 7, 16] {
                let mesh = Mesh::structured(dim, m).unwrap();
                assert_eq!(mesh.num_nodes(), (m + 1).pow(dim as u32));
                assert_eq!(mesh.num_elements(), if dim == 1 { m } else { 2 * m * m });
                let total: f64 = (0..mesh.num_elements()).map(|e| mesh.element_measure(e)).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                for e in 0..mesh.num_elements() {
                    assert!(mesh.element_measure(e) > 0.0);
                    let nodes = mesh.element(e);
                    assert!(nodes.iter().all(|&n| n < mesh.num_nodes()));
                    for a in 0..nodes.len() {
                        for b in a + 1..nodes.len() {
                            assert_ne!(nodes[a], nodes[b]);
                        }
                    }
                }
                for i in 0..mesh.num_nodes() {
                    let on_edge = mesh.node(i).iter().any(|&c| c == 0.0 || c == 1.0);
                    assert_eq!(mesh.is_boundary(i), on_edge);
                }
            }
        }
    }

    #[test]
    fn locate_at_nodes() {
        let mesh = Mesh::structured(2, 3).unwrap();
        for i in 0..mesh.num_nodes() {
            let loc = mesh.locate(mesh.node(i)).unwrap();
            let nodes = mesh.element(loc.element);
            let k = nodes.iter().position(|&n| n == i).expect("node belongs to element");
            assert_eq!(loc.bary[k], 1.0);
        }
    }

    #[test]
    fn locate_single_square() {
        let mesh = Mesh::structured(2, 1).unwrap();
        let x = [0.25, 0.5];
        let loc = mesh.locate(&x).unwrap();
        // frac_x < frac_y: upper triangle
        assert_eq!(loc.element, 1);
        let brute: Vec<_> = (0..2).filter(|&e| point_in_triangle(&mesh, e, &x)).collect();
        assert_eq!(brute, vec![1]);
        assert_abs_diff_eq!(loc.bary.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // on the diagonal: lower triangle
        assert_eq!(mesh.locate(&[0.4, 0.4]).unwrap().element, 0);
    }

    #[test]
    fn locate_interval() {
        let mesh = Mesh::structured(1, 4).unwrap();
        let loc = mesh.locate(&[0.3]).unwrap();
        assert_eq!(loc.element, 1);
        assert_abs_diff_eq!(loc.bary[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(loc.bary[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn locate_out_of_domain() {
        let mesh = Mesh::structured(2, 4).unwrap();
        assert!(matches!(mesh.locate(&[1.1, 0.5]), Err(Error::OutOfDomain(_))));
        assert!(matches!(mesh.locate(&[0.5, -1e-9]), Err(Error::OutOfDomain(_))));
        assert!(matches!(mesh.locate(&[f64::NAN, 0.5]), Err(Error::OutOfDomain(_))));
    }

    proptest! {
        #[test]
        fn locate_reproduces_point(m in 1usize..20, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let mesh = Mesh::structured(2, m).unwrap();
            let loc = mesh.locate(&[x, y]).unwrap();
            let nodes = mesh.element(loc.element);
            prop_assert!(loc.bary.iter().all(|&b| (0.0..=1.0).contains(&b)));
            prop_assert!((loc.bary.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for axis in 0..2 {
                let r: f64 = nodes.iter().zip(&loc.bary).map(|(&n, b)| b * mesh.node(n)[axis]).sum();
                prop_assert!((r - [x, y][axis]).abs() <= 1e-12);
            }
            prop_assert!(point_in_triangle(&mesh, loc.element, &[x, y]));
        }

        #[test]
        fn locate_reproduces_point_1d(m in 1usize..50, x in 0.0f64..=1.0) {
            let mesh = Mesh::structured(1, m).unwrap();
            let loc = mesh.locate(&[x]).unwrap();
            let nodes = mesh.element(loc.element);
            let r = loc.bary[0] * mesh.node(nodes[0])[0] + loc.bary[1] * mesh.node(nodes[1])[0];
            prop_assert!((r - x).abs() <= 1e-12);
        }

        #[test]
        fn perturbed_points_separated(seed in any::<u64>(), k in 2usize..10) {
            let ps = generate_points(2, PointKind::Perturbed, k, seed).unwrap();
            let q = quasi_uniformity(&ps, 64).unwrap();
            prop_assert!(q.d_min > 0.0);
        }
    }

    #[test]
    fn uniform_points() {
        let ps = generate_points(1, PointKind::Uniform, 5, 0).unwrap();
        let xs: Vec<f64> = ps.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let ps = generate_points(2, PointKind::Uniform, 401, 0).unwrap();
        assert_eq!(ps.len(), 401 * 401);
        assert!(matches!(
            generate_points(2, PointKind::Uniform, 1, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn perturbed_points_stay_near_centers() {
        let k = 8;
        let ps = generate_points(2, PointKind::Perturbed, k, 7).unwrap();
        assert_eq!(ps.len(), 128);
        // recompute centers independently of the generator
        let mut centers = Vec::new();
        for j in 0..k {
            for i in 0..k {
                let (x, y) = (i as f64 / k as f64, j as f64 / k as f64);
                let s = 1.0 / k as f64;
                centers.push([x + 2.0 * s / 3.0, y + s / 3.0]);
                centers.push([x + s / 3.0, y + 2.0 * s / 3.0]);
            }
        }
        let bound = 1.0 / (4.0 * k as f64);
        for (p, c) in ps.iter().zip(&centers) {
            assert!((p[0] - c[0]).abs() <= bound && (p[1] - c[1]).abs() <= bound);
        }
        assert_eq!(ps, generate_points(2, PointKind::Perturbed, k, 7).unwrap());
        assert_ne!(ps, generate_points(2, PointKind::Perturbed, k, 8).unwrap());
    }

    #[test]
    fn corner_lattice_quality() {
        let ps = generate_points(2, PointKind::Uniform, 2, 0).unwrap();
        let q = quasi_uniformity(&ps, 257).unwrap();
        assert_abs_diff_eq!(q.d_min, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.d_max, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.ratio, 0.5f64.sqrt(), epsilon = 1e-12);
        let q = quasi_uniformity(&ps, DEFAULT_PROBE_RESOLUTION).unwrap();
        assert_abs_diff_eq!(q.d_max, 0.5f64.sqrt(), epsilon = 1e-2);
    }

    #[test]
    fn uniform_lattice_quality() {
        for k in [2usize, 3, 5, 11, 20] {
            let ps = generate_points(2, PointKind::Uniform, k, 0).unwrap();
            let q = quasi_uniformity(&ps, 128).unwrap();
            let s = 1.0 / (k - 1) as f64;
            assert_abs_diff_eq!(q.d_min, s, epsilon = 1e-14);
            // brute-force fill distance on the same probe lattice
            let mut brute = 0.0f64;
            for a in 0..128 {
                for b in 0..128 {
                    let x = [a as f64 / 127.0, b as f64 / 127.0];
                    let d = ps
                        .iter()
                        .map(|p| ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min);
                    brute = brute.max(d);
                }
            }
            assert_abs_diff_eq!(q.d_max, brute, epsilon = 1e-15);
            assert!(q.d_max <= s / 2f64.sqrt() + 1e-12);
            assert!(q.d_max >= s / 2f64.sqrt() - 2f64.sqrt() / 127.0);
            assert!(q.ratio <= 1.0);
        }
    }

    #[test]
    fn radial_points_cluster() {
        let radial = generate_points(2, PointKind::Radial, 32, 3).unwrap();
        assert_eq!(radial.len(), 32 * 32);
        let uniform = generate_points(2, PointKind::Uniform, 32, 3).unwrap();
        let qr = quasi_uniformity(&radial, DEFAULT_PROBE_RESOLUTION).unwrap();
        let qu = quasi_uniformity(&uniform, DEFAULT_PROBE_RESOLUTION).unwrap();
        assert!(qr.ratio >= 10.0 * qu.ratio, "radial {:?} uniform {:?}", qr, qu);
    }

    #[test]
    fn quality_needs_two_points() {
        let ps = PointSet::from_coords(2, vec![0.5, 0.5], PointKind::Uniform).unwrap();
        assert!(matches!(
            quasi_uniformity(&ps, 64),
            Err(Error::InsufficientPoints { needed: 2, found: 1 })
        ));
    }
}
