//! Tensor-product graded meshes of the four fracture benchmarks.
//!
//! Each axis carries a fine band (element size `refinement_ratio * l`)
//! through the expected fracture zone; sizes grow geometrically away from
//! it up to `coarse_h`. Notches are zero-width slits realised by duplicating
//! the grid nodes on the slit line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError};

/// Ratio between consecutive element sizes outside the fine band.
const GROWTH: f64 = 1.2;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    SenpTension,
    SenpShear,
    ThreePointBending,
    LPanel,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::SenpTension,
        Benchmark::SenpShear,
        Benchmark::ThreePointBending,
        Benchmark::LPanel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::SenpTension => "senp_tension",
            Benchmark::SenpShear => "senp_shear",
            Benchmark::ThreePointBending => "three_point_bending",
            Benchmark::LPanel => "l_panel",
        }
    }

    /// Out-of-plane thickness (mm).
    pub fn thickness(&self) -> f64 {
        match self {
            Benchmark::LPanel => 100.0,
            _ => 1.0,
        }
    }

    fn default_coarse_h(&self) -> f64 {
        match self {
            Benchmark::SenpTension | Benchmark::SenpShear => 0.05,
            Benchmark::ThreePointBending => 0.2,
            Benchmark::LPanel => 25.0,
        }
    }

    /// Default fracture band `(x range, y range)`.
    fn default_band(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Benchmark::SenpTension => ([0.45, 1.0], [0.4, 0.6]),
            Benchmark::SenpShear => ([0.45, 1.0], [0.0, 0.55]),
            Benchmark::ThreePointBending => ([3.5, 4.5], [0.0, 2.0]),
            Benchmark::LPanel => ([0.0, 265.0], [240.0, 330.0]),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| MeshError::InvalidSpec(format!("unknown benchmark '{s}'")))
    }
}

fn default_ratio() -> f64 {
    0.2
}

/// Geometry and discretization parameters of a benchmark mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub benchmark: Benchmark,
    /// Characteristic length of the phase field (mm).
    pub l: f64,
    /// Element size in the fracture band as a fraction of `l`.
    #[serde(default = "default_ratio")]
    pub refinement_ratio: f64,
    /// Element size away from the fracture band (mm); benchmark default if absent.
    #[serde(default)]
    pub coarse_h: Option<f64>,
    #[serde(default)]
    pub band_x: Option<[f64; 2]>,
    #[serde(default)]
    pub band_y: Option<[f64; 2]>,
}

impl GeometrySpec {
    pub fn new(benchmark: Benchmark, l: f64) -> Self {
        Self {
            benchmark,
            l,
            refinement_ratio: default_ratio(),
            coarse_h: None,
            band_x: None,
            band_y: None,
        }
    }

    pub fn fine_h(&self) -> f64 {
        self.refinement_ratio * self.l
    }

    pub fn coarse_h(&self) -> f64 {
        self.coarse_h.unwrap_or_else(|| self.benchmark.default_coarse_h())
    }

    pub fn band(&self) -> ([f64; 2], [f64; 2]) {
        let (bx, by) = self.benchmark.default_band();
        (self.band_x.unwrap_or(bx), self.band_y.unwrap_or(by))
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(MeshError::InvalidSpec(format!("l must be positive, got {}", self.l)));
        }
        if !(self.refinement_ratio > 0.0 && self.refinement_ratio <= 1.0) {
            return Err(MeshError::InvalidSpec(format!(
                "refinement_ratio must lie in (0, 1], got {}",
                self.refinement_ratio
            )));
        }
        if !(self.coarse_h() > 0.0) {
            return Err(MeshError::InvalidSpec("coarse_h must be positive".into()));
        }
        let (bx, by) = self.band();
        for b in [bx, by] {
            if !(b[1] > b[0]) {
                return Err(MeshError::InvalidSpec(format!("empty fracture band {b:?}")));
            }
        }
        let width = (bx[1] - bx[0]).min(by[1] - by[0]);
        if self.l > width {
            return Err(MeshError::LengthExceedsBand { length: self.l, band: width });
        }
        Ok(())
    }
}

/// Builds the graded, notched mesh of a benchmark.
pub fn build_benchmark_mesh(spec: &GeometrySpec) -> Result<Mesh, MeshError> {
    spec.validate()?;
    let (band_x, band_y) = spec.band();
    let h = spec.fine_h();
    let hc = spec.coarse_h();
    let mesh = match spec.benchmark {
        Benchmark::SenpTension | Benchmark::SenpShear => {
            let xs = graded_axis("x", 0.0, 1.0, band_x, h, hc, &[0.5])?;
            let ys = graded_axis("y", 0.0, 1.0, band_y, h, hc, &[0.5])?;
            let mut grid = Grid::new(xs, ys, |_, _| true);
            grid.horizontal_slit(0.5, 0.0, 0.5);
            let mut mesh = grid.finish(spec.benchmark.thickness());
            add_set(&mut mesh, "bottom_edge", |p| p[1].abs() < EPS);
            add_set(&mut mesh, "top_edge", |p| (p[1] - 1.0).abs() < EPS);
            add_set(&mut mesh, "left_edge", |p| p[0].abs() < EPS);
            add_set(&mut mesh, "right_edge", |p| (p[0] - 1.0).abs() < EPS);
            mesh
        }
        Benchmark::ThreePointBending => {
            let xs = graded_axis("x", 0.0, 8.0, band_x, h, hc, &[4.0])?;
            let ys = graded_axis("y", 0.0, 2.0, band_y, h, hc, &[0.4])?;
            let mut grid = Grid::new(xs, ys, |_, _| true);
            grid.vertical_slit(4.0, 0.0, 0.4);
            let mut mesh = grid.finish(spec.benchmark.thickness());
            add_point_set(&mut mesh, "support_left", [0.0, 0.0]);
            add_point_set(&mut mesh, "support_right", [8.0, 0.0]);
            add_point_set(&mut mesh, "load_node", [4.0, 2.0]);
            add_set(&mut mesh, "bottom_edge", |p| p[1].abs() < EPS);
            add_set(&mut mesh, "top_edge", |p| (p[1] - 2.0).abs() < EPS);
            mesh
        }
        Benchmark::LPanel => {
            let xs = graded_axis("x", 0.0, 500.0, band_x, h, hc, &[250.0, 470.0])?;
            let ys = graded_axis("y", 0.0, 500.0, band_y, h, hc, &[250.0])?;
            let grid = Grid::new(xs, ys, |cx, cy| !(cx > 250.0 && cy < 250.0));
            let mut mesh = grid.finish(spec.benchmark.thickness());
            add_set(&mut mesh, "bottom_edge", |p| p[1].abs() < EPS);
            add_point_set(&mut mesh, "load_node", [470.0, 250.0]);
            mesh
        }
    };
    mesh.validate()?;
    Ok(mesh)
}

fn add_set(mesh: &mut Mesh, name: &str, pred: impl Fn([f64; 2]) -> bool) {
    let ids = (0..mesh.nodes.len()).filter(|&i| pred(mesh.nodes[i])).collect();
    mesh.boundary_sets.insert(name.to_string(), ids);
}

fn add_point_set(mesh: &mut Mesh, name: &str, p: [f64; 2]) {
    add_set(mesh, name, |x| (x[0] - p[0]).abs() < EPS && (x[1] - p[1]).abs() < EPS);
}

/// Target element size at `x`: fine inside the band widened by one fine
/// element, growing geometrically outside.
fn size_at(x: f64, band: [f64; 2], h: f64, hc: f64) -> f64 {
    let dist = (band[0] - x).max(x - band[1]).max(0.0);
    let grown = h + (GROWTH - 1.0) * (dist - h).max(0.0);
    if hc <= h {
        hc
    } else {
        grown.min(hc)
    }
}

/// Grid coordinates on `[lo, hi]` that hit every anchor and keep each cell's
/// integral of `1 / size` at most one.
fn graded_axis(
    axis: &'static str,
    lo: f64,
    hi: f64,
    band: [f64; 2],
    h: f64,
    hc: f64,
    anchors: &[f64],
) -> Result<Vec<f64>, MeshError> {
    let mut stops: Vec<f64> = vec![lo, hi];
    stops.extend(anchors.iter().copied().filter(|&a| a > lo && a < hi));
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut coords = vec![lo];
    for w in stops.windows(2) {
        let (p, q) = (w[0], w[1]);
        // Cumulative integral of 1/size by the trapezoid rule on a fine sampling.
        let samples = (((q - p) / h.min(hc)) * 8.0).ceil().max(64.0) as usize;
        let dx = (q - p) / samples as f64;
        let mut cumulative = Vec::with_capacity(samples + 1);
        cumulative.push(0.0);
        let mut prev = 1.0 / size_at(p, band, h, hc);
        for k in 1..=samples {
            let x = p + dx * k as f64;
            let cur = 1.0 / size_at(x, band, h, hc);
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * (prev + cur) * dx);
            prev = cur;
        }
        let total = *cumulative.last().unwrap();
        let cells = ((total - EPS).ceil() as usize).max(1);
        let mut k = 0;
        for c in 1..cells {
            let target = total * c as f64 / cells as f64;
            while cumulative[k + 1] < target {
                k += 1;
            }
            let frac = (target - cumulative[k]) / (cumulative[k + 1] - cumulative[k]);
            coords.push(p + dx * (k as f64 + frac));
        }
        coords.push(q);
    }
    if coords.len() < 3 {
        return Err(MeshError::TooFewElements { axis, count: coords.len() - 1 });
    }
    Ok(coords)
}

/// Structured grid under construction, possibly with cells masked out.
struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    /// `(i, j)` cell -> connectivity, `None` for cells outside the domain.
    cells: Vec<Option<[usize; 4]>>,
}

impl Grid {
    fn new(xs: Vec<f64>, ys: Vec<f64>, inside: impl Fn(f64, f64) -> bool) -> Self {
        let nx = xs.len();
        let mut nodes = Vec::with_capacity(nx * ys.len());
        for &y in &ys {
            for &x in &xs {
                nodes.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * nx + i;
        let mut cells = Vec::with_capacity((nx - 1) * (ys.len() - 1));
        for j in 0..ys.len() - 1 {
            for i in 0..nx - 1 {
                let cx = 0.5 * (xs[i] + xs[i + 1]);
                let cy = 0.5 * (ys[j] + ys[j + 1]);
                cells.push(
                    inside(cx, cy)
                        .then(|| [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]),
                );
            }
        }
        Self { xs, ys, nodes, cells }
    }

    fn cell_index(&self, i: usize, j: usize) -> usize {
        j * (self.xs.len() - 1) + i
    }

    fn line_index(coords: &[f64], v: f64) -> usize {
        coords
            .iter()
            .position(|&c| (c - v).abs() < EPS)
            .expect("slit line is a grid anchor")
    }

    /// Splits the grid along `y = y0` for `x` in `[x_from, x_tip)`. Cells
    /// above the slit are reconnected to duplicated nodes.
    fn horizontal_slit(&mut self, y0: f64, x_from: f64, x_tip: f64) {
        let js = Self::line_index(&self.ys, y0);
        let nx = self.xs.len();
        let mut dup = BTreeMap::new();
        for i in 0..nx {
            let x = self.xs[i];
            if x >= x_from - EPS && x < x_tip - EPS {
                let old = js * nx + i;
                dup.insert(old, self.nodes.len());
                self.nodes.push(self.nodes[old]);
            }
        }
        for i in 0..nx - 1 {
            if self.xs[i + 1] <= x_tip + EPS && self.xs[i] >= x_from - EPS {
                let c = self.cell_index(i, js);
                if let Some(conn) = self.cells[c].as_mut() {
                    for n in conn.iter_mut() {
                        if let Some(&d) = dup.get(n) {
                            *n = d;
                        }
                    }
                }
            }
        }
    }

    /// Splits the grid along `x = x0` for `y` in `[y_from, y_tip)`. Cells to
    /// the right of the slit are reconnected to duplicated nodes.
    fn vertical_slit(&mut self, x0: f64, y_from: f64, y_tip: f64) {
        let is = Self::line_index(&self.xs, x0);
        let nx = self.xs.len();
        let mut dup = BTreeMap::new();
        for j in 0..self.ys.len() {
            let y = self.ys[j];
            if y >= y_from - EPS && y < y_tip - EPS {
                let old = j * nx + is;
                dup.insert(old, self.nodes.len());
                self.nodes.push(self.nodes[old]);
            }
        }
        for j in 0..self.ys.len() - 1 {
            if self.ys[j + 1] <= y_tip + EPS && self.ys[j] >= y_from - EPS {
                let c = self.cell_index(is, j);
                if let Some(conn) = self.cells[c].as_mut() {
                    for n in conn.iter_mut() {
                        if let Some(&d) = dup.get(n) {
                            *n = d;
                        }
                    }
                }
            }
        }
    }

    /// Drops unreferenced nodes and renumbers.
    fn finish(self, thickness: f64) -> Mesh {
        let mut used = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for conn in self.cells.into_iter().flatten() {
            let mut renumbered = [0; 4];
            for (a, &n) in conn.iter().enumerate() {
                if used[n] == usize::MAX {
                    used[n] = nodes.len();
                    nodes.push(self.nodes[n]);
                }
                renumbered[a] = used[n];
            }
            elements.push(renumbered);
        }
        Mesh { nodes, elements, boundary_sets: BTreeMap::new(), thickness }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_band_edge(mesh: &Mesh, band: ([f64; 2], [f64; 2])) -> f64 {
        let (bx, by) = band;
        let mut worst: f64 = 0.0;
        for e in 0..mesh.n_elements() {
            let c = mesh.element_coords(e);
            let (x0, x1) = (c[0][0].min(c[2][0]), c[0][0].max(c[2][0]));
            let (y0, y1) = (c[0][1].min(c[2][1]), c[0][1].max(c[2][1]));
            let intersects = x1 > bx[0] && x0 < bx[1] && y1 > by[0] && y0 < by[1];
            if intersects {
                worst = worst.max(x1 - x0).max(y1 - y0);
            }
        }
        worst
    }

    #[test]
    fn senp_tension_band_resolution() {
        let spec = GeometrySpec::new(Benchmark::SenpTension, 0.024);
        let mesh = build_benchmark_mesh(&spec).unwrap();
        let worst = max_band_edge(&mesh, spec.band());
        assert!(worst <= 0.0048 * (1.0 + 1e-9), "band edge {worst}");
    }

    #[test]
    fn uniform_senp_counts() {
        let spec = GeometrySpec {
            refinement_ratio: 1.0,
            coarse_h: Some(0.1),
            ..GeometrySpec::new(Benchmark::SenpTension, 0.1)
        };
        let mesh = build_benchmark_mesh(&spec).unwrap();
        assert_eq!(mesh.n_elements(), 100);
        // 11 x 11 grid nodes plus duplicates at x = 0, 0.1, 0.2, 0.3, 0.4 on the slit.
        assert_eq!(mesh.n_nodes(), 121 + 5);
        assert_eq!(mesh.set("bottom_edge").unwrap().len(), 11);
        assert_eq!(mesh.set("left_edge").unwrap().len(), 12);
    }

    #[test]
    fn slit_nodes_are_duplicated_and_disconnected() {
        for b in Benchmark::ALL {
            let l = match b {
                Benchmark::LPanel => 12.5,
                Benchmark::ThreePointBending => 0.4,
                _ => 0.1,
            };
            let mesh = build_benchmark_mesh(&GeometrySpec::new(b, l)).unwrap();
            let mut by_coord: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
            for (i, p) in mesh.nodes.iter().enumerate() {
                let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
                by_coord.entry(key).or_default().push(i);
            }
            let pairs: Vec<_> = by_coord.values().filter(|v| v.len() > 1).collect();
            if b == Benchmark::LPanel {
                assert!(pairs.is_empty());
                continue;
            }
            assert!(!pairs.is_empty());
            for pair in pairs {
                assert_eq!(pair.len(), 2);
                for conn in &mesh.elements {
                    assert!(!(conn.contains(&pair[0]) && conn.contains(&pair[1])));
                }
            }
        }
    }

    #[test]
    fn benchmark_sets_present() {
        let mesh = build_benchmark_mesh(&GeometrySpec::new(Benchmark::ThreePointBending, 0.4))
            .unwrap();
        for s in ["support_left", "support_right", "load_node"] {
            assert_eq!(mesh.set(s).unwrap().len(), 1, "{s}");
        }
        let lp = build_benchmark_mesh(&GeometrySpec::new(Benchmark::LPanel, 12.5)).unwrap();
        assert_eq!(lp.set("load_node").unwrap().len(), 1);
        assert_eq!(lp.thickness, 100.0);
        let area = lp.area();
        assert!((area - 0.75 * 500.0 * 500.0).abs() < 1e-6 * area);
    }

    #[test]
    fn rejects_bad_specs() {
        let too_long = GeometrySpec::new(Benchmark::SenpTension, 0.5);
        assert!(matches!(
            build_benchmark_mesh(&too_long),
            Err(MeshError::LengthExceedsBand { .. })
        ));
        let coarse = GeometrySpec {
            refinement_ratio: 1.0,
            coarse_h: Some(10.0),
            band_x: Some([0.0, 1.0]),
            band_y: Some([0.0, 1.0]),
            ..GeometrySpec::new(Benchmark::SenpTension, 0.9)
        };
        // One cell per half of the unit square still gives two cells per axis;
        // anchors stop it from collapsing further.
        assert!(build_benchmark_mesh(&coarse).is_ok());
        let bad_ratio = GeometrySpec { refinement_ratio: 1.5, ..GeometrySpec::new(Benchmark::SenpShear, 0.01) };
        assert!(build_benchmark_mesh(&bad_ratio).is_err());
    }

    #[test]
    fn too_few_elements_reported() {
        let r = graded_axis("x", 0.0, 1.0, [0.0, 1.0], 5.0, 5.0, &[]);
        assert!(matches!(r, Err(MeshError::TooFewElements { count: 1, .. })));
    }
}
