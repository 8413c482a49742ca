use super::DiskMesh;

/// Uniform bucket grid over `[-1, 1]^2` for point location.
#[derive(Clone, Debug)]
pub struct PointLocator {
    cells: usize,
    size: f64,
    start: Vec<usize>,
    items: Vec<usize>,
}

const LO: f64 = -1.0 - 1e-9;

impl PointLocator {
    pub fn new(mesh: &DiskMesh) -> Self {
        let cells = ((2.0 / mesh.h()).ceil() as usize).clamp(1, 4096);
        let size = (2.0 + 2e-9) / cells as f64;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
        let to_cell = |x: f64| (((x - LO) / size).floor().max(0.0) as usize).min(cells - 1);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = tri.map(|v| mesh.vertices()[v]);
            let (x0, x1) =
                (p.iter().map(|q| q[0]).fold(f64::MAX, f64::min), p.iter().map(|q| q[0]).fold(f64::MIN, f64::max));
            let (y0, y1) =
                (p.iter().map(|q| q[1]).fold(f64::MAX, f64::min), p.iter().map(|q| q[1]).fold(f64::MIN, f64::max));
            for i in to_cell(x0)..=to_cell(x1) {
                for j in to_cell(y0)..=to_cell(y1) {
                    buckets[j * cells + i].push(t);
                }
            }
        }
        let mut start = Vec::with_capacity(buckets.len() + 1);
        let mut items = Vec::new();
        start.push(0);
        for b in buckets {
            items.extend(b);
            start.push(items.len());
        }
        PointLocator { cells, size, start, items }
    }

    fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let i = ((p[0] - LO) / self.size).floor();
        let j = ((p[1] - LO) / self.size).floor();
        if i < 0.0 || j < 0.0 || i >= self.cells as f64 || j >= self.cells as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    fn bucket(&self, i: usize, j: usize) -> &[usize] {
        let k = j * self.cells + i;
        &self.items[self.start[k]..self.start[k + 1]]
    }

    /// Triangle containing `p` and the barycentric coordinates of `p`.
    pub fn locate(&self, mesh: &DiskMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.cell_of(p)?;
        for &t in self.bucket(i, j) {
            let b = barycentric(mesh, t, p);
            if b.iter().all(|&x| x >= -1e-12) {
                return Some((t, b));
            }
        }
        None
    }

    /// Like [`locate`](Self::locate), but falls back to the nearby triangle
    /// that `p` is least outside of. Used for points in the thin sliver
    /// between the polygonal boundary and the unit circle.
    pub fn locate_nearest(&self, mesh: &DiskMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        if let Some(hit) = self.locate(mesh, p) {
            return Some(hit);
        }
        let q = [p[0].clamp(-1.0, 1.0), p[1].clamp(-1.0, 1.0)];
        let (ci, cj) = self.cell_of(q)?;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for i in ci.saturating_sub(1)..=(ci + 1).min(self.cells - 1) {
            for j in cj.saturating_sub(1)..=(cj + 1).min(self.cells - 1) {
                for &t in self.bucket(i, j) {
                    let b = barycentric(mesh, t, p);
                    let m = b.iter().copied().fold(f64::MAX, f64::min);
                    if best.as_ref().is_none_or(|x| m > x.2) {
                        best = Some((t, b, m));
                    }
                }
            }
        }
        best.map(|(t, b, _)| {
            let c = b.map(|x| x.max(0.0));
            let s: f64 = c.iter().sum();
            (t, c.map(|x| x / s))
        })
    }
}

pub(crate) fn barycentric(mesh: &DiskMesh, t: usize, p: [f64; 2]) -> [f64; 3] {
    let tri = mesh.triangles()[t];
    let a = mesh.vertices()[tri[0]];
    let g = mesh.hat_gradients(t);
    let d = [p[0] - a[0], p[1] - a[1]];
    let l1 = g[1][0] * d[0] + g[1][1] * d[1];
    let l2 = g[2][0] * d[0] + g[2][1] * d[1];
    [1.0 - l1 - l2, l1, l2]
}
