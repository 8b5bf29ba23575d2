//! Reservoir meshes with a well boundary Γ_i and an exterior boundary Γ_e.
//!
//! Unknowns live at mesh nodes (vertex-centred finite volumes). Every cell
//! hands a share of its measure to each of its nodes, couples node pairs with
//! two-point transmissibilities and reconstructs one gradient, so boundary
//! traces are plain nodal values.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) || ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!(
                "invalid rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    /// Rectangle of the given size centred at `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - 0.5 * width, cy - 0.5 * height, cx + 0.5 * width, cy + 0.5 * height)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn strictly_contains(&self, other: &Rect) -> bool {
        self.x_min < other.x_min
            && other.x_max < self.x_max
            && self.y_min < other.y_min
            && other.y_max < self.y_max
    }

    fn contains_point(&self, x: f64, y: f64) -> bool {
        x > self.x_min && x < self.x_max && y > self.y_min && y < self.y_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    /// Axisymmetric annulus `r_i ≤ r ≤ r_e` with measure `2π r dr`.
    Radial1D { r_inner: f64, r_outer: f64 },
    /// Planar region between two rectangles.
    Annulus2D { outer: Rect, inner: Rect },
}

/// Integration target for [`Grid::integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Volume,
    WellBoundary,
    OuterBoundary,
}

/// Nodes of one boundary component with their quadrature weights.
#[derive(Debug, Clone)]
pub struct BoundarySet {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    /// Arc-length coordinate of each node (0 on radial grids).
    pub coordinate: Vec<f64>,
    pub measure: f64,
}

/// One mesh cell: its nodes, measure, two-point couplings and gradient
/// reconstruction weights.
#[derive(Debug, Clone)]
pub struct Cell {
    pub nodes: Vec<usize>,
    pub measure: f64,
    /// `(a, b, T)`: the cell transmits `T · c · (p_b − p_a)` from `b` to `a`.
    pub pairs: Vec<(usize, usize, f64)>,
    /// `∇_c p = Σ_k grad[k] · p[nodes[k]]`.
    pub grad: Vec<[f64; 2]>,
}

impl Cell {
    pub fn gradient(&self, f: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (w, &n) in self.grad.iter().zip(&self.nodes) {
            g[0] += w[0] * f[n];
            g[1] += w[1] * f[n];
        }
        g
    }

    pub fn gradient_norm(&self, f: &[f64]) -> f64 {
        let g = self.gradient(f);
        g[0].hypot(g[1])
    }
}

/// Nodal field with an optional time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub time: Option<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, time: None }
    }

    pub fn at_time(values: Vec<f64>, time: f64) -> Self {
        Self { values, time: Some(time) }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::new(vec![c; grid.node_count()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub kind: GridKind,
    pub nodes: Vec<[f64; 2]>,
    pub node_volume: Vec<f64>,
    pub cells: Vec<Cell>,
    pub well: BoundarySet,
    pub outer: BoundarySet,
    pub volume: f64,
    is_well: Vec<bool>,
}

/// Geometric radial spacing: growth factor `min(ratio, (r_e/r_i)^(1/n))`.
fn radial_nodes(r_i: f64, r_e: f64, n: usize, ratio: f64) -> Vec<f64> {
    let q = ratio.min((r_e / r_i).powf(1.0 / n as f64));
    let mut widths: Vec<f64> = (0..n).map(|j| q.powi(j as i32)).collect();
    let total: f64 = widths.iter().sum();
    let scale = (r_e - r_i) / total;
    widths.iter_mut().for_each(|w| *w *= scale);
    let mut r = Vec::with_capacity(n + 1);
    r.push(r_i);
    let mut acc = r_i;
    for w in &widths[..n - 1] {
        acc += w;
        r.push(acc);
    }
    r.push(r_e);
    r
}

/// Splits `[lo, hi]` at the given breakpoints, `max(1, round(n·len/total))`
/// uniform cells per segment.
fn segment_nodes(breaks: &[f64], n: usize, total: f64) -> Vec<f64> {
    let mut xs = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let m = ((n as f64 * len / total).round() as usize).max(1);
        for k in 1..=m {
            xs.push(if k == m { w[1] } else { w[0] + len * k as f64 / m as f64 });
        }
    }
    xs
}

impl Grid {
    /// Axisymmetric radial mesh with `n` cells, refined geometrically toward
    /// the well (`ratio` is the maximal growth factor between neighbours).
    pub fn build_radial(r_inner: f64, r_outer: f64, n: usize, ratio: f64) -> Result<Grid> {
        if !(r_inner.is_finite() && r_outer.is_finite() && r_inner > 0.0 && r_outer > r_inner) {
            return Err(Error::Config(format!(
                "radial grid needs 0 < r_i < r_e, got r_i = {r_inner}, r_e = {r_outer}"
            )));
        }
        if n < 8 {
            return Err(Error::Config(format!("radial grid needs n >= 8, got {n}")));
        }
        if !(ratio >= 1.0 && ratio.is_finite()) {
            return Err(Error::Config(format!("grading ratio must be >= 1, got {ratio}")));
        }
        let r = radial_nodes(r_inner, r_outer, n, ratio);
        let pi = std::f64::consts::PI;
        let mut node_volume = vec![0.0; n + 1];
        let mut cells = Vec::with_capacity(n);
        for j in 0..n {
            let (r0, r1) = (r[j], r[j + 1]);
            let h = r1 - r0;
            let rm = 0.5 * (r0 + r1);
            node_volume[j] += pi * (rm * rm - r0 * r0);
            node_volume[j + 1] += pi * (r1 * r1 - rm * rm);
            cells.push(Cell {
                nodes: vec![j, j + 1],
                measure: pi * (r1 * r1 - r0 * r0),
                pairs: vec![(j, j + 1, 2.0 * pi * rm / h)],
                grad: vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]],
            });
        }
        let well = BoundarySet {
            nodes: vec![0],
            weights: vec![2.0 * pi * r_inner],
            coordinate: vec![0.0],
            measure: 2.0 * pi * r_inner,
        };
        let outer = BoundarySet {
            nodes: vec![n],
            weights: vec![2.0 * pi * r_outer],
            coordinate: vec![0.0],
            measure: 2.0 * pi * r_outer,
        };
        Ok(Self::finish(
            GridKind::Radial1D { r_inner, r_outer },
            r.iter().map(|&x| [x, 0.0]).collect(),
            node_volume,
            cells,
            well,
            outer,
        ))
    }

    /// Structured quadrilateral mesh of `outer \ inner`. `n` is the number of
    /// cells along the longer side of `outer`; each segment between rectangle
    /// edges gets a proportional, at least one, number of cells.
    pub fn build_annulus2d(outer: Rect, inner: Rect, n: usize) -> Result<Grid> {
        if !outer.strictly_contains(&inner) {
            return Err(Error::Config(
                "inner rectangle must lie strictly inside the outer rectangle".into(),
            ));
        }
        if n < 4 {
            return Err(Error::Config(format!("annulus grid needs n >= 4, got {n}")));
        }
        let total = outer.width().max(outer.height());
        let xs = segment_nodes(&[outer.x_min, inner.x_min, inner.x_max, outer.x_max], n, total);
        let ys = segment_nodes(&[outer.y_min, inner.y_min, inner.y_max, outer.y_max], n, total);
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);

        let active = |i: usize, j: usize| -> bool {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            !inner.contains_point(cx, cy)
        };
        let mut node_used = vec![false; (nx + 1) * (ny + 1)];
        for j in 0..ny {
            for i in 0..nx {
                if active(i, j) {
                    for (a, b) in [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)] {
                        node_used[b * (nx + 1) + a] = true;
                    }
                }
            }
        }
        let mut index = vec![usize::MAX; node_used.len()];
        let mut nodes = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if node_used[j * (nx + 1) + i] {
                    index[j * (nx + 1) + i] = nodes.len();
                    nodes.push([xs[i], ys[j]]);
                }
            }
        }
        let id = |i: usize, j: usize| index[j * (nx + 1) + i];

        let mut node_volume = vec![0.0; nodes.len()];
        let mut well_weight = vec![0.0; nodes.len()];
        let mut outer_weight = vec![0.0; nodes.len()];
        let mut cells = Vec::new();
        let on_inner_x = |x: f64| x == inner.x_min || x == inner.x_max;
        let on_inner_y = |y: f64| y == inner.y_min || y == inner.y_max;
        for j in 0..ny {
            for i in 0..nx {
                if !active(i, j) {
                    continue;
                }
                let (hx, hy) = (xs[i + 1] - xs[i], ys[j + 1] - ys[j]);
                let c = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
                for &k in &c {
                    node_volume[k] += 0.25 * hx * hy;
                }
                let tx = 0.5 * hy / hx;
                let ty = 0.5 * hx / hy;
                // Faces: bottom, right, top, left.
                let faces = [
                    (c[0], c[1], hx, j == 0, on_inner_y(ys[j]) && j > 0 && !active(i, j - 1)),
                    (c[1], c[2], hy, i + 1 == nx, on_inner_x(xs[i + 1]) && i + 1 < nx && !active(i + 1, j)),
                    (c[3], c[2], hx, j + 1 == ny, on_inner_y(ys[j + 1]) && j + 1 < ny && !active(i, j + 1)),
                    (c[0], c[3], hy, i == 0, on_inner_x(xs[i]) && i > 0 && !active(i - 1, j)),
                ];
                for (a, b, len, is_outer, is_inner) in faces {
                    if is_outer {
                        outer_weight[a] += 0.5 * len;
                        outer_weight[b] += 0.5 * len;
                    }
                    if is_inner {
                        well_weight[a] += 0.5 * len;
                        well_weight[b] += 0.5 * len;
                    }
                }
                cells.push(Cell {
                    nodes: c.to_vec(),
                    measure: hx * hy,
                    pairs: vec![(c[0], c[1], tx), (c[1], c[2], ty), (c[3], c[2], tx), (c[0], c[3], ty)],
                    grad: vec![
                        [-0.5 / hx, -0.5 / hy],
                        [0.5 / hx, -0.5 / hy],
                        [0.5 / hx, 0.5 / hy],
                        [-0.5 / hx, 0.5 / hy],
                    ],
                });
            }
        }

        let perimeter_coordinate = |x: f64, y: f64| -> f64 {
            let (w, h) = (inner.width(), inner.height());
            if y == inner.y_min && x < inner.x_max {
                x - inner.x_min
            } else if x == inner.x_max && y < inner.y_max {
                w + (y - inner.y_min)
            } else if y == inner.y_max && x > inner.x_min {
                w + h + (inner.x_max - x)
            } else {
                2.0 * w + h + (inner.y_max - y)
            }
        };
        let collect = |weights: &[f64], coord: &dyn Fn(f64, f64) -> f64| {
            let mut set = BoundarySet {
                nodes: Vec::new(),
                weights: Vec::new(),
                coordinate: Vec::new(),
                measure: 0.0,
            };
            for (k, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    set.nodes.push(k);
                    set.weights.push(w);
                    set.coordinate.push(coord(nodes[k][0], nodes[k][1]));
                    set.measure += w;
                }
            }
            set
        };
        let well = collect(&well_weight, &perimeter_coordinate);
        let outer_set = collect(&outer_weight, &|_, _| 0.0);
        Ok(Self::finish(
            GridKind::Annulus2D { outer, inner },
            nodes,
            node_volume,
            cells,
            well,
            outer_set,
        ))
    }

    fn finish(
        kind: GridKind,
        nodes: Vec<[f64; 2]>,
        node_volume: Vec<f64>,
        cells: Vec<Cell>,
        well: BoundarySet,
        outer: BoundarySet,
    ) -> Grid {
        let volume = cells.iter().map(|c| c.measure).sum();
        let mut is_well = vec![false; nodes.len()];
        for &k in &well.nodes {
            is_well[k] = true;
        }
        Grid {
            kind,
            nodes,
            node_volume,
            cells,
            well,
            outer,
            volume,
            is_well,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn well_measure(&self) -> f64 {
        self.well.measure
    }

    pub fn is_well(&self, node: usize) -> bool {
        self.is_well[node]
    }

    /// Spatial dimension of the underlying flow problem (the radial grid is
    /// the axisymmetric reduction of a planar problem).
    pub fn dimension(&self) -> usize {
        2
    }

    /// Distance of each node from the axis (radial) or its x coordinate.
    pub fn radius(&self, node: usize) -> f64 {
        self.nodes[node][0]
    }

    pub fn check(&self, f: &ScalarField) -> Result<()> {
        if f.values.len() != self.node_count() {
            return Err(Error::Shape {
                expected: self.node_count(),
                got: f.values.len(),
            });
        }
        Ok(())
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::new(self.nodes.iter().map(|p| f(p[0], p[1])).collect())
    }

    pub fn measure(&self, region: Region) -> f64 {
        match region {
            Region::Volume => self.volume,
            Region::WellBoundary => self.well.measure,
            Region::OuterBoundary => self.outer.measure,
        }
    }

    /// Quadrature of nodal values over a region (slice version).
    pub fn integrate_values(&self, f: &[f64], region: Region) -> f64 {
        match region {
            Region::Volume => self.node_volume.iter().zip(f).map(|(v, x)| v * x).sum(),
            Region::WellBoundary => boundary_sum(&self.well, f),
            Region::OuterBoundary => boundary_sum(&self.outer, f),
        }
    }

    pub fn integrate(&self, f: &ScalarField, region: Region) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_values(&f.values, region))
    }

    pub fn average_values(&self, f: &[f64], region: Region) -> f64 {
        self.integrate_values(f, region) / self.measure(region)
    }

    pub fn average(&self, f: &ScalarField, region: Region) -> Result<f64> {
        Ok(self.integrate(f, region)? / self.measure(region))
    }

    /// `∫_U |f|^q dx` by nodal quadrature.
    pub fn integral_abs_pow(&self, f: &[f64], q: f64) -> f64 {
        self.node_volume
            .iter()
            .zip(f)
            .map(|(v, x)| v * x.abs().powf(q))
            .sum()
    }

    /// `(∫_U |f|^q dx)^(1/q)`.
    pub fn lp_norm_values(&self, f: &[f64], q: f64) -> f64 {
        self.integral_abs_pow(f, q).powf(1.0 / q)
    }

    /// `∫_U |∇f|^q dx` from per-cell gradients.
    pub fn gradient_integral_pow(&self, f: &[f64], q: f64) -> f64 {
        self.cells
            .iter()
            .map(|c| c.measure * c.gradient_norm(f).powf(q))
            .sum()
    }

    pub fn lp_norm_gradient_values(&self, f: &[f64], q: f64) -> f64 {
        self.gradient_integral_pow(f, q).powf(1.0 / q)
    }

    /// `(∫_U |∇f|^q dx)^(1/q)` using the per-cell gradient reconstruction.
    pub fn lp_norm_gradient(&self, f: &ScalarField, q: f64) -> Result<f64> {
        self.check(f)?;
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Domain(format!("norm exponent must be positive, got {q}")));
        }
        Ok(self.lp_norm_gradient_values(&f.values, q))
    }

    /// Plain-text node and cell listing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind {:?}", self.kind);
        let _ = writeln!(out, "# nodes {} cells {}", self.node_count(), self.cell_count());
        let _ = writeln!(out, "# node x y volume tag");
        for (k, p) in self.nodes.iter().enumerate() {
            let tag = if self.is_well[k] {
                "well"
            } else if self.outer.nodes.contains(&k) {
                "outer"
            } else {
                "-"
            };
            let _ = writeln!(out, "n {k} {} {} {} {tag}", p[0], p[1], self.node_volume[k]);
        }
        let _ = writeln!(out, "# cell measure nodes");
        for (k, c) in self.cells.iter().enumerate() {
            let ids: Vec<String> = c.nodes.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "c {k} {} {}", c.measure, ids.join(" "));
        }
        out
    }
}

fn boundary_sum(set: &BoundarySet, f: &[f64]) -> f64 {
    set.nodes
        .iter()
        .zip(&set.weights)
        .map(|(&k, w)| w * f[k])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn radial_measures() {
        let g = Grid::build_radial(1.0, 2.0, 8, 1.05).unwrap();
        assert!((g.volume - 3.0 * PI).abs() < 1e-12);
        let node_sum: f64 = g.node_volume.iter().sum();
        assert!((node_sum - 3.0 * PI).abs() < 1e-12);
        let g = Grid::build_radial(1.0, 1000.0, 256, 1.05).unwrap();
        assert!((g.well_measure() - 2.0 * PI).abs() < 1e-12);
        assert!(Grid::build_radial(1.0, 1.0, 16, 1.05).is_err());
        assert!(Grid::build_radial(1.0, 2.0, 4, 1.05).is_err());
    }

    #[test]
    fn radial_grading_respects_ratio() {
        let g = Grid::build_radial(0.1, 1000.0, 64, 1.05).unwrap();
        let r: Vec<f64> = g.nodes.iter().map(|p| p[0]).collect();
        for w in r.windows(3) {
            let q = (w[2] - w[1]) / (w[1] - w[0]);
            assert!((1.0 - 1e-12..=1.05 + 1e-12).contains(&q));
        }
        assert_eq!(*r.last().unwrap(), 1000.0);
    }

    #[test]
    fn annulus_measures() {
        let outer = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let inner = Rect::centered(5.0, 5.0, 1.0, 1.0).unwrap();
        let g = Grid::build_annulus2d(outer, inner, 20).unwrap();
        assert!((g.volume - 99.0).abs() < 1e-12);
        assert!((g.well_measure() - 4.0).abs() < 1e-12);
        assert!((g.outer.measure - 40.0).abs() < 1e-12);
        let fine = Grid::build_annulus2d(outer, inner, 40).unwrap();
        assert_eq!(fine.cell_count(), 4 * g.cell_count());
        assert!((fine.volume - g.volume).abs() < 1e-12);
        let touching = Rect::new(0.0, 4.0, 1.0, 5.0).unwrap();
        assert!(Grid::build_annulus2d(outer, touching, 20).is_err());
    }

    #[test]
    fn well_and_outer_are_disjoint() {
        let outer = Rect::new(0.0, 0.0, 4.0, 3.0).unwrap();
        let inner = Rect::new(1.0, 1.0, 2.0, 1.5).unwrap();
        let g = Grid::build_annulus2d(outer, inner, 16).unwrap();
        for k in &g.well.nodes {
            assert!(!g.outer.nodes.contains(k));
        }
        let s = &g.well.coordinate;
        assert!(s.iter().all(|&v| (0.0..3.0).contains(&v)));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::build_radial(1.0, 3.0, 64, 1.05).unwrap();
        let c = ScalarField::constant(&g, 2.5);
        assert!((g.integrate(&c, Region::Volume).unwrap() - 2.5 * g.volume).abs() < 1e-12);
        let zero = ScalarField::constant(&g, 0.0);
        assert_eq!(g.integrate(&zero, Region::WellBoundary).unwrap(), 0.0);
        assert!(g.integrate(&ScalarField::new(vec![1.0; 3]), Region::Volume).is_err());
    }

    #[test]
    fn gradient_norm_of_radius() {
        let g = Grid::build_radial(1.0, 2.0, 32, 1.05).unwrap();
        let f = g.sample(|x, _| x);
        let n = g.lp_norm_gradient(&f, 2.0).unwrap();
        assert!((n - (3.0 * PI).sqrt()).abs() < 1e-12);
        let c = ScalarField::constant(&g, 4.0);
        assert_eq!(g.lp_norm_gradient(&c, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn dump_lists_everything() {
        let g = Grid::build_radial(1.0, 2.0, 8, 1.05).unwrap();
        let d = g.dump();
        assert_eq!(d.lines().filter(|l| l.starts_with("n ")).count(), 9);
        assert_eq!(d.lines().filter(|l| l.starts_with("c ")).count(), 8);
    }
}
