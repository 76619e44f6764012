use super::density::Metric;

/// Uniform grid over `[0, 1)^d` for strict-radius counting queries.
///
/// Cells are visited in rings of growing Chebyshev distance from the query cell so
/// that bounded counts terminate early. On the torus, rings that would wrap onto
/// themselves fall back to a linear scan, which keeps every point counted once.
#[derive(Debug, Clone)]
pub struct GridIndex {
    dim: usize,
    metric: Metric,
    cells_per_axis: usize,
    side: f64,
    starts: Vec<usize>,
    /// Point coordinates, grouped by cell.
    coords: Vec<f64>,
}

impl GridIndex {
    pub fn new(points: &[f64], dim: usize, metric: Metric) -> Self {
        assert!(dim >= 1 && points.len() % dim == 0);
        let n = points.len() / dim;
        // about two points per cell
        let g = ((n as f64 / 2.0).powf(1.0 / dim as f64).floor() as usize).clamp(1, 1 << 16);
        let n_cells = g.pow(dim as u32);
        let cell_of = |p: &[f64]| -> usize {
            p.iter().fold(0, |acc, &v| {
                let c = ((v - v.floor()) * g as f64) as usize;
                acc * g + c.min(g - 1)
            })
        };
        let mut counts = vec![0usize; n_cells + 1];
        let ids: Vec<usize> = points.chunks_exact(dim).map(cell_of).collect();
        for &c in &ids {
            counts[c + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut coords = vec![0.0; points.len()];
        for (p, &c) in points.chunks_exact(dim).zip(&ids) {
            let at = fill[c];
            coords[at * dim..(at + 1) * dim].copy_from_slice(p);
            fill[c] += 1;
        }
        Self {
            dim,
            metric,
            cells_per_axis: g,
            side: 1.0 / g as f64,
            starts: counts,
            coords,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn count_cell(&self, cell: usize, z: &[f64], r2: f64, limit: usize, count: &mut usize) {
        let d = self.dim;
        for p in self.coords[self.starts[cell] * d..self.starts[cell + 1] * d].chunks_exact(d) {
            if self.metric.dist_sq(p, z) < r2 {
                *count += 1;
                if *count >= limit {
                    return;
                }
            }
        }
    }

    /// Number of points strictly within squared distance `r2` of `z`, capped at `limit`.
    pub fn count_closer(&self, z: &[f64], r2: f64, limit: usize) -> usize {
        let mut count = 0;
        if limit == 0 || self.is_empty() {
            return 0;
        }
        let g = self.cells_per_axis as i64;
        let kmax = (r2.sqrt() / self.side).floor() as i64 + 1;
        let wraps = self.metric == Metric::Torus;
        if (wraps && 2 * kmax + 1 >= g) || (!wraps && kmax >= g) {
            let d = self.dim;
            for p in self.coords.chunks_exact(d) {
                if self.metric.dist_sq(p, z) < r2 {
                    count += 1;
                    if count >= limit {
                        break;
                    }
                }
            }
            return count;
        }
        let home: Vec<i64> = z
            .iter()
            .map(|&v| (((v - v.floor()) * g as f64) as i64).min(g - 1))
            .collect();
        let mut offset = vec![0i64; self.dim];
        for k in 0..=kmax {
            // odometer over [-k, k]^d, keeping only the shell max|o| = k
            offset.iter_mut().for_each(|o| *o = -k);
            loop {
                if offset.iter().any(|o| o.abs() == k) {
                    let mut cell = 0usize;
                    let mut valid = true;
                    for (h, o) in home.iter().zip(&offset) {
                        let mut c = h + o;
                        if wraps {
                            c = c.rem_euclid(g);
                        } else if !(0..g).contains(&c) {
                            valid = false;
                            break;
                        }
                        cell = cell * g as usize + c as usize;
                    }
                    if valid {
                        self.count_cell(cell, z, r2, limit, &mut count);
                        if count >= limit {
                            return count;
                        }
                    }
                }
                let mut axis = 0;
                while axis < self.dim {
                    offset[axis] += 1;
                    if offset[axis] <= k {
                        break;
                    }
                    offset[axis] = -k;
                    axis += 1;
                }
                if axis == self.dim {
                    break;
                }
            }
        }
        count
    }
}

/// Linear-scan reference for [`GridIndex::count_closer`].
pub fn count_closer_naive(points: &[f64], dim: usize, metric: Metric, z: &[f64], r2: f64, limit: usize) -> usize {
    points
        .chunks_exact(dim)
        .filter(|p| metric.dist_sq(p, z) < r2)
        .take(limit)
        .count()
}
