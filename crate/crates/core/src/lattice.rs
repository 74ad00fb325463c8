//! Discrete domains on the scaled square lattice `aZ²`.
//!
//! A domain is a connected, simply connected union of closed unit faces.
//! Its primal graph has the corners of those faces as vertices and their
//! sides as edges; its dual graph has one vertex per face plus a single
//! merged outer vertex, with one dual edge crossing each primal edge.
//!
//! Vertices are indexed in row-major order (by `y`, then `x`), which keeps
//! the bandwidth of [`TransitionMatrix`] at roughly one row of the domain.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A primal lattice vertex in integer coordinates (physical position `mesh * (x, y)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    pub fn step(self, step: Step) -> Site {
        let (dx, dy) = step.delta();
        Site::new(self.x + dx, self.y + dy)
    }

    fn row_major(&self) -> (i32, i32) {
        (self.y, self.x)
    }
}

/// A unit face, named by its lower-left corner. Faces are the dual vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub x: i32,
    pub y: i32,
}

impl Face {
    pub const fn new(x: i32, y: i32) -> Self {
        Face { x, y }
    }

    /// Corners in counterclockwise order starting from the lower-left one.
    pub fn corners(self) -> [Site; 4] {
        [
            Site::new(self.x, self.y),
            Site::new(self.x + 1, self.y),
            Site::new(self.x + 1, self.y + 1),
            Site::new(self.x, self.y + 1),
        ]
    }

    pub fn neighbor(self, step: Step) -> Face {
        let (dx, dy) = step.delta();
        Face::new(self.x + dx, self.y + dy)
    }

    /// Center of the face in physical coordinates.
    pub fn center(self, mesh: f64) -> [f64; 2] {
        [
            (self.x as f64 + 0.5) * mesh,
            (self.y as f64 + 0.5) * mesh,
        ]
    }

    fn row_major(&self) -> (i32, i32) {
        (self.y, self.x)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| Error::param(format!("face must be `x,y`, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|_| Error::param(format!("bad face coordinate `{v}`")))
        };
        Ok(Face::new(parse(x)?, parse(y)?))
    }
}

/// A nearest-neighbor move on the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    East,
    North,
    West,
    South,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::East, Step::North, Step::West, Step::South];

    pub const fn delta(self) -> (i32, i32) {
        match self {
            Step::East => (1, 0),
            Step::North => (0, 1),
            Step::West => (-1, 0),
            Step::South => (0, -1),
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn reverse(self) -> Step {
        match self {
            Step::East => Step::West,
            Step::North => Step::South,
            Step::West => Step::East,
            Step::South => Step::North,
        }
    }

    pub const fn letter(self) -> char {
        match self {
            Step::East => 'E',
            Step::North => 'N',
            Step::West => 'W',
            Step::South => 'S',
        }
    }

    pub fn from_letter(c: char) -> Option<Step> {
        match c {
            'E' => Some(Step::East),
            'N' => Some(Step::North),
            'W' => Some(Step::West),
            'S' => Some(Step::South),
            _ => None,
        }
    }
}

/// An undirected primal edge between vertex indices `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

/// A vertex of the dual graph: a face (by index) or the merged outer vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DualVertex {
    Face(usize),
    Outer,
}

/// Planar dual of a [`DiscreteDomain`]. Dual edge `e` crosses primal edge `e`.
#[derive(Clone, Debug)]
pub struct DualGraph {
    ends: Vec<[DualVertex; 2]>,
    adjacency: Vec<Vec<(DualVertex, usize)>>,
}

impl DualGraph {
    fn slot(&self, v: DualVertex) -> usize {
        match v {
            DualVertex::Face(i) => i,
            DualVertex::Outer => self.adjacency.len() - 1,
        }
    }

    /// Number of dual vertices, counting the outer vertex.
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }

    /// The two dual vertices joined by the dual of primal edge `edge`.
    pub fn ends(&self, edge: usize) -> [DualVertex; 2] {
        self.ends[edge]
    }

    /// Dual neighbors of `v` together with the primal edge each dual edge crosses.
    pub fn neighbors(&self, v: DualVertex) -> &[(DualVertex, usize)] {
        &self.adjacency[self.slot(v)]
    }

    /// Dual edges with both ends at faces.
    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.ends
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.contains(&DualVertex::Outer))
            .map(|(i, _)| i)
    }
}

/// Shape descriptor accepted by [`DiscreteDomain::from_spec`].
///
/// JSON form: `{"shape":"square","n":8,"mesh":0.125}`,
/// `{"shape":"disk","radius":1.0,"mesh":0.0078125}` or
/// `{"shape":"faces","list":[[0,0],[1,0]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DomainSpec {
    Square {
        n: u32,
        #[serde(default = "unit_mesh")]
        mesh: f64,
    },
    Rect {
        width: u32,
        height: u32,
        #[serde(default = "unit_mesh")]
        mesh: f64,
    },
    Disk {
        radius: f64,
        mesh: f64,
    },
    Faces {
        list: Vec<[i32; 2]>,
        #[serde(default = "unit_mesh")]
        mesh: f64,
    },
}

fn unit_mesh() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn mesh(&self) -> f64 {
        match self {
            DomainSpec::Square { mesh, .. }
            | DomainSpec::Rect { mesh, .. }
            | DomainSpec::Disk { mesh, .. }
            | DomainSpec::Faces { mesh, .. } => *mesh,
        }
    }

    pub fn with_mesh(mut self, new_mesh: f64) -> Self {
        match &mut self {
            DomainSpec::Square { mesh, .. }
            | DomainSpec::Rect { mesh, .. }
            | DomainSpec::Disk { mesh, .. }
            | DomainSpec::Faces { mesh, .. } => *mesh = new_mesh,
        }
        self
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    /// Accepts a JSON document or the shorthands `square:N`, `rect:WxH`,
    /// `disk:R` (mesh 1 unless overridden) and `faces:x,y;x,y;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let bad = || Error::param(format!("unrecognised domain `{s}`"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "square" => Ok(DomainSpec::Square {
                n: arg.parse().map_err(|_| bad())?,
                mesh: 1.0,
            }),
            "rect" => {
                let (w, h) = arg.split_once('x').ok_or_else(bad)?;
                Ok(DomainSpec::Rect {
                    width: w.parse().map_err(|_| bad())?,
                    height: h.parse().map_err(|_| bad())?,
                    mesh: 1.0,
                })
            }
            "disk" => Ok(DomainSpec::Disk {
                radius: arg.parse().map_err(|_| bad())?,
                mesh: 1.0,
            }),
            "faces" => {
                let list = arg
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.parse::<Face>().map(|f| [f.x, f.y]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DomainSpec::Faces { list, mesh: 1.0 })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for DomainSpec {
    /// The shorthand accepted by `FromStr` when the mesh is 1, JSON otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mesh() != 1.0 {
            return write!(f, "{}", serde_json::to_string(self).map_err(|_| fmt::Error)?);
        }
        match self {
            DomainSpec::Square { n, .. } => write!(f, "square:{n}"),
            DomainSpec::Rect { width, height, .. } => write!(f, "rect:{width}x{height}"),
            DomainSpec::Disk { radius, .. } => write!(f, "disk:{radius}"),
            DomainSpec::Faces { list, .. } => {
                let parts: Vec<String> = list.iter().map(|[x, y]| format!("{x},{y}")).collect();
                write!(f, "faces:{}", parts.join(";"))
            }
        }
    }
}

/// A finite, connected, simply connected union of faces of `aZ²`.
#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    mesh: f64,
    faces: Vec<Face>,
    face_index: HashMap<Face, usize>,
    vertices: Vec<Site>,
    vertex_index: HashMap<Site, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
    adjacency: Vec<[Option<(usize, usize)>; 4]>,
    boundary: Vec<Site>,
    dual: DualGraph,
    fingerprint: u64,
}

impl DiscreteDomain {
    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Square { n, mesh } => Self::square(*n, *mesh),
            DomainSpec::Rect {
                width,
                height,
                mesh,
            } => Self::rectangle(*width, *height, *mesh),
            DomainSpec::Disk { radius, mesh } => Self::disk(*radius, *mesh),
            DomainSpec::Faces { list, mesh } => {
                Self::from_faces(list.iter().map(|&[x, y]| Face::new(x, y)), *mesh)
            }
        }
    }

    /// The `n × n` block of faces with lower-left corner at the origin.
    pub fn square(n: u32, mesh: f64) -> Result<Self> {
        Self::rectangle(n, n, mesh)
    }

    pub fn rectangle(width: u32, height: u32, mesh: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyDomain);
        }
        let faces = (0..height as i32)
            .flat_map(|y| (0..width as i32).map(move |x| Face::new(x, y)));
        Self::from_faces(faces, mesh)
    }

    /// Largest face union inside the open disk of the given radius about the origin:
    /// the faces whose four corners all lie at distance `< radius`.
    pub fn disk(radius: f64, mesh: f64) -> Result<Self> {
        check_mesh(mesh)?;
        if !(radius.is_finite() && radius >= mesh) {
            return Err(Error::param(format!(
                "disk radius {radius} must be at least the mesh {mesh}"
            )));
        }
        let r = radius / mesh;
        let m = r.ceil() as i32 + 1;
        let r2 = r * r;
        let inside = |s: Site| (s.x as f64).powi(2) + (s.y as f64).powi(2) < r2;
        let faces: Vec<Face> = (-m..m)
            .flat_map(|y| (-m..m).map(move |x| Face::new(x, y)))
            .filter(|f| f.corners().iter().all(|&c| inside(c)))
            .collect();
        Self::from_faces(faces, mesh)
    }

    pub fn from_faces(faces: impl IntoIterator<Item = Face>, mesh: f64) -> Result<Self> {
        check_mesh(mesh)?;
        let mut faces: Vec<Face> = faces.into_iter().collect::<HashSet<_>>().into_iter().collect();
        if faces.is_empty() {
            return Err(Error::EmptyDomain);
        }
        faces.sort_by_key(Face::row_major);
        let face_index: HashMap<Face, usize> =
            faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();

        let components = face_components(&faces, &face_index);
        if components.len() > 1 {
            return Err(Error::Disconnected { components });
        }
        let holes = enclosed_holes(&faces, &face_index);
        if !holes.is_empty() {
            return Err(Error::NotSimplyConnected { holes });
        }

        let mut vertices: Vec<Site> = faces
            .iter()
            .flat_map(|f| f.corners())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        vertices.sort_by_key(Site::row_major);
        let vertex_index: HashMap<Site, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let mut edge_set: HashSet<(usize, usize)> = HashSet::new();
        for f in &faces {
            let c = f.corners();
            for k in 0..4 {
                let (u, v) = (vertex_index[&c[k]], vertex_index[&c[(k + 1) % 4]]);
                edge_set.insert((u.min(v), u.max(v)));
            }
        }
        let mut edge_list: Vec<(usize, usize)> = edge_set.into_iter().collect();
        edge_list.sort_unstable();
        let edges: Vec<Edge> = edge_list.iter().map(|&(a, b)| Edge { a, b }).collect();
        let edge_index: HashMap<(usize, usize), usize> =
            edge_list.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let mut adjacency = vec![[None; 4]; vertices.len()];
        for (i, v) in vertices.iter().enumerate() {
            for step in Step::ALL {
                if let Some(&j) = vertex_index.get(&v.step(step)) {
                    if let Some(&e) = edge_index.get(&(i.min(j), i.max(j))) {
                        adjacency[i][step.index()] = Some((j, e));
                    }
                }
            }
        }

        let mut boundary: Vec<Site> = vertices
            .iter()
            .flat_map(|v| Step::ALL.map(|s| v.step(s)))
            .filter(|s| !vertex_index.contains_key(s))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        boundary.sort_by_key(Site::row_major);

        let dual = build_dual(&faces, &face_index, &vertices, &edges);

        let mut hasher = DefaultHasher::new();
        faces.hash(&mut hasher);
        mesh.to_bits().hash(&mut hasher);
        let fingerprint = hasher.finish();

        Ok(DiscreteDomain {
            mesh,
            faces,
            face_index,
            vertices,
            vertex_index,
            edges,
            edge_index,
            adjacency,
            boundary,
            dual,
            fingerprint,
        })
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Vertices of `aZ²` outside the domain at graph distance one from it.
    pub fn boundary_vertices(&self) -> &[Site] {
        &self.boundary
    }

    pub fn dual(&self) -> &DualGraph {
        &self.dual
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_idx(&self, face: Face) -> Option<usize> {
        self.face_index.get(&face).copied()
    }

    pub fn require_face(&self, face: Face) -> Result<usize> {
        self.face_idx(face).ok_or(Error::FaceNotInDomain(face))
    }

    pub fn vertex_idx(&self, site: Site) -> Option<usize> {
        self.vertex_index.get(&site).copied()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_index.get(&(u.min(v), u.max(v))).copied()
    }

    /// Neighbor of vertex `v` in direction `step` and the connecting edge, if that edge belongs to the domain.
    #[inline]
    pub fn neighbor(&self, v: usize, step: Step) -> Option<(usize, usize)> {
        self.adjacency[v][step.index()]
    }

    /// Identifies the face set and mesh; used to match defect lines and caches to their domain.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// True when every edge between two domain vertices is a face side,
    /// i.e. every vertex has all four lattice neighbors reachable through domain edges or lies on ∂.
    pub fn is_interior_vertex(&self, v: usize) -> bool {
        self.adjacency[v].iter().all(Option::is_some)
    }

    /// Physical position of vertex `v`.
    pub fn site_point(&self, v: usize) -> [f64; 2] {
        let s = self.vertices[v];
        [s.x as f64 * self.mesh, s.y as f64 * self.mesh]
    }

    /// Face whose center is closest to `point`; ties go to the face with the
    /// smallest `(y, x)`.
    pub fn nearest_face(&self, point: [f64; 2]) -> Face {
        let mut best = (f64::INFINITY, self.faces[0]);
        for &f in &self.faces {
            let c = f.center(self.mesh);
            let d = (c[0] - point[0]).powi(2) + (c[1] - point[1]).powi(2);
            if d < best.0 - 1e-12 * self.mesh * self.mesh {
                best = (d, f);
            }
        }
        best.1
    }

    /// Physical L∞ diameter of the vertex set.
    pub fn diameter(&self) -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for s in &self.vertices {
            x0 = x0.min(s.x);
            x1 = x1.max(s.x);
            y0 = y0.min(s.y);
            y1 = y1.max(s.y);
        }
        ((x1 - x0).max(y1 - y0)) as f64 * self.mesh
    }

    /// True if every face of `self` is a face of `other` on the same lattice.
    pub fn is_subdomain_of(&self, other: &DiscreteDomain) -> bool {
        self.mesh == other.mesh && self.faces.iter().all(|f| other.face_index.contains_key(f))
    }

    /// Defect line from `face` to the outer vertex.
    pub fn defect_line(&self, face: Face, strategy: DefectStrategy) -> Result<DefectLine> {
        DefectLine::new(self, face, strategy)
    }
}

fn check_mesh(mesh: f64) -> Result<()> {
    if mesh.is_finite() && mesh > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("mesh must be positive, got {mesh}")))
    }
}

fn face_components(faces: &[Face], index: &HashMap<Face, usize>) -> Vec<Vec<Face>> {
    let mut seen = vec![false; faces.len()];
    let mut components = Vec::new();
    for start in 0..faces.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(faces[i]);
            for step in Step::ALL {
                if let Some(&j) = index.get(&faces[i].neighbor(step)) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_by_key(Face::row_major);
        components.push(comp);
    }
    components
}

/// Non-domain faces inside the bounding box that cannot reach its padded border.
fn enclosed_holes(faces: &[Face], index: &HashMap<Face, usize>) -> Vec<Face> {
    let x0 = faces.iter().map(|f| f.x).min().unwrap() - 1;
    let x1 = faces.iter().map(|f| f.x).max().unwrap() + 1;
    let y0 = faces.iter().map(|f| f.y).min().unwrap() - 1;
    let y1 = faces.iter().map(|f| f.y).max().unwrap() + 1;
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let cell = |f: Face| (f.y - y0) as usize * w + (f.x - x0) as usize;
    let mut reached = vec![false; w * h];
    let start = Face::new(x0, y0);
    reached[cell(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        for step in Step::ALL {
            let g = f.neighbor(step);
            if g.x < x0 || g.x > x1 || g.y < y0 || g.y > y1 {
                continue;
            }
            if index.contains_key(&g) || reached[cell(g)] {
                continue;
            }
            reached[cell(g)] = true;
            queue.push_back(g);
        }
    }
    let mut holes = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let f = Face::new(x, y);
            if !index.contains_key(&f) && !reached[cell(f)] {
                holes.push(f);
            }
        }
    }
    holes
}

fn build_dual(
    faces: &[Face],
    face_index: &HashMap<Face, usize>,
    vertices: &[Site],
    edges: &[Edge],
) -> DualGraph {
    let as_dual = |f: Face| match face_index.get(&f) {
        Some(&i) => DualVertex::Face(i),
        None => DualVertex::Outer,
    };
    let mut adjacency: Vec<Vec<(DualVertex, usize)>> = vec![Vec::new(); faces.len() + 1];
    let slot = |v: DualVertex| match v {
        DualVertex::Face(i) => i,
        DualVertex::Outer => faces.len(),
    };
    let ends: Vec<[DualVertex; 2]> = edges
        .iter()
        .map(|e| {
            let (p, q) = (vertices[e.a], vertices[e.b]);
            if p.y == q.y {
                // horizontal edge: faces above and below
                let x = p.x.min(q.x);
                [as_dual(Face::new(x, p.y)), as_dual(Face::new(x, p.y - 1))]
            } else {
                // vertical edge: faces to the east and west
                let y = p.y.min(q.y);
                [as_dual(Face::new(p.x, y)), as_dual(Face::new(p.x - 1, y))]
            }
        })
        .collect();
    for (e, &[u, v]) in ends.iter().enumerate() {
        adjacency[slot(u)].push((v, e));
        adjacency[slot(v)].push((u, e));
    }
    DualGraph { ends, adjacency }
}

/// How [`DiscreteDomain::defect_line`] routes a line to the outer vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectStrategy {
    /// Horizontal ray east of the face; the default gauge.
    #[default]
    StraightEast,
    /// A shortest dual path (breadth-first, ties broken by edge order).
    Shortest,
}

/// A simple dual path from a marked face to the outer vertex, together with
/// the primal edges it crosses. Flipping the sign of those edges turns the
/// winding parity around the face into a determinant observable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefectLine {
    face: Face,
    path: Vec<DualVertex>,
    crossed: Vec<usize>,
    domain: u64,
}

impl DefectLine {
    pub fn new(domain: &DiscreteDomain, face: Face, strategy: DefectStrategy) -> Result<Self> {
        let start = domain.require_face(face)?;
        let crossed = match strategy {
            DefectStrategy::StraightEast => {
                let mut crossed = Vec::new();
                let mut f = face;
                loop {
                    let lo = domain.vertex_idx(Site::new(f.x + 1, f.y)).unwrap();
                    let hi = domain.vertex_idx(Site::new(f.x + 1, f.y + 1)).unwrap();
                    crossed.push(domain.edge_between(lo, hi).unwrap());
                    f = f.neighbor(Step::East);
                    if domain.face_idx(f).is_none() {
                        break;
                    }
                }
                crossed
            }
            DefectStrategy::Shortest => shortest_to_outer(domain, start),
        };
        Self::from_crossings(domain, face, crossed)
    }

    /// Validates an explicit dual path given as the sequence of crossed primal edges.
    pub fn from_crossings(domain: &DiscreteDomain, face: Face, crossed: Vec<usize>) -> Result<Self> {
        let start = domain.require_face(face)?;
        let dual = domain.dual();
        let mut path = vec![DualVertex::Face(start)];
        let mut seen: HashSet<DualVertex> = path.iter().copied().collect();
        let mut used = HashSet::new();
        for (k, &e) in crossed.iter().enumerate() {
            if e >= dual.edge_count() {
                return Err(Error::InvalidDefectLine(format!("edge {e} out of range")));
            }
            if !used.insert(e) {
                return Err(Error::InvalidDefectLine(format!("edge {e} crossed twice")));
            }
            let here = *path.last().unwrap();
            let [u, v] = dual.ends(e);
            let next = if u == here {
                v
            } else if v == here {
                u
            } else {
                return Err(Error::InvalidDefectLine(format!(
                    "edge {e} is not incident to {here:?}"
                )));
            };
            if !seen.insert(next) {
                return Err(Error::InvalidDefectLine(format!("path revisits {next:?}")));
            }
            if next == DualVertex::Outer && k + 1 != crossed.len() {
                return Err(Error::InvalidDefectLine(
                    "path continues past the outer vertex".into(),
                ));
            }
            path.push(next);
        }
        if path.last() != Some(&DualVertex::Outer) {
            return Err(Error::InvalidDefectLine(
                "path does not reach the outer vertex".into(),
            ));
        }
        Ok(DefectLine {
            face,
            path,
            crossed,
            domain: domain.fingerprint(),
        })
    }

    pub fn face(&self) -> Face {
        self.face
    }

    pub fn path(&self) -> &[DualVertex] {
        &self.path
    }

    pub fn crossed_edges(&self) -> &[usize] {
        &self.crossed
    }

    /// Number of dual edges in the path.
    pub fn len(&self) -> usize {
        self.crossed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossed.is_empty()
    }

    pub fn domain_fingerprint(&self) -> u64 {
        self.domain
    }
}

fn shortest_to_outer(domain: &DiscreteDomain, start: usize) -> Vec<usize> {
    let dual = domain.dual();
    let n = domain.face_count();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n + 1];
    let mut seen = vec![false; n + 1];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let slot = |v: DualVertex| match v {
        DualVertex::Face(i) => i,
        DualVertex::Outer => n,
    };
    while let Some(i) = queue.pop_front() {
        for &(w, e) in dual.neighbors(DualVertex::Face(i)) {
            let s = slot(w);
            if seen[s] {
                continue;
            }
            seen[s] = true;
            parent[s] = Some((i, e));
            if w == DualVertex::Outer {
                let mut crossed = Vec::new();
                let mut cur = n;
                while let Some((p, e)) = parent[cur] {
                    crossed.push(e);
                    cur = p;
                }
                crossed.reverse();
                return crossed;
            }
            queue.push_back(s);
        }
    }
    unreachable!("every face of a finite domain reaches the outer vertex")
}

/// Sparse step matrix of the (massive, sign-twisted) random walk on domain vertices.
///
/// Nonzero entries are `±1/(4+κ)` for neighbors joined by a domain edge;
/// edges crossed by an odd number of defect lines carry the minus sign.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    twisted: Vec<usize>,
    kappa: f64,
}

impl TransitionMatrix {
    pub fn build(domain: &DiscreteDomain, twist: &[DefectLine], kappa: f64) -> Result<Self> {
        if kappa.is_nan() || kappa < 0.0 {
            return Err(Error::param(format!("mass κ must be ≥ 0, got {kappa}")));
        }
        let mut flips = vec![false; domain.edge_count()];
        for line in twist {
            if line.domain_fingerprint() != domain.fingerprint() {
                return Err(Error::InvalidDefectLine(format!(
                    "line from {:?} was built for another domain",
                    line.face()
                )));
            }
            for &e in line.crossed_edges() {
                flips[e] ^= true;
            }
        }
        let weight = if kappa.is_infinite() { 0.0 } else { 1.0 / (4.0 + kappa) };
        let n = domain.vertex_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        let mut vals = Vec::with_capacity(4 * n);
        row_ptr.push(0);
        for v in 0..n {
            let mut row: Vec<(usize, f64)> = Step::ALL
                .iter()
                .filter_map(|&s| domain.neighbor(v, s))
                .map(|(w, e)| (w, if flips[e] { -weight } else { weight }))
                .collect();
            row.sort_unstable_by_key(|&(w, _)| w);
            for (w, x) in row {
                cols.push(w);
                vals.push(x);
            }
            row_ptr.push(cols.len());
        }
        let twisted = flips
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(e, _)| e)
            .collect();
        Ok(TransitionMatrix {
            dim: n,
            row_ptr,
            cols,
            vals,
            twisted,
            kappa,
        })
    }

    /// Untwisted walk on `domain` with killing rate `κ`.
    pub fn untwisted(domain: &DiscreteDomain, kappa: f64) -> Result<Self> {
        Self::build(domain, &[], kappa)
    }

    /// A general sparse matrix; duplicate entries are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(i, j, x) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::param(format!("entry ({i}, {j}) outside dimension {dim}")));
            }
            if !x.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            match rows[i].iter_mut().find(|(c, _)| *c == j) {
                Some(slot) => slot.1 += x,
                None => rows[i].push((j, x)),
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, x) in row {
                cols.push(c);
                vals.push(x);
            }
            row_ptr.push(cols.len());
        }
        Ok(TransitionMatrix {
            dim,
            row_ptr,
            cols,
            vals,
            twisted: Vec::new(),
            kappa: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Primal edges whose entries carry a minus sign.
    pub fn twisted_edges(&self) -> &[usize] {
        &self.twisted
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero `(column, value)` pairs of row `i`, in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, x)| x)
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, x)| x.abs()).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, x)| self.get(j, i) == x))
    }

    /// Largest `|i - j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        (0..self.dim).find_map(|i| self.row(i).find(|(_, x)| !x.is_finite()).map(|(j, _)| (i, j)))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for (j, x) in self.row(i) {
                out[i * self.dim + j] = x;
            }
        }
        out
    }

    /// `y = P x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Collatz–Wielandt bounds `(lower, upper)` on the spectral radius of `|P|`
    /// after `iterations` steps of power iteration on the aperiodic `(I + |P|)/2`.
    pub fn spectral_radius_bounds(&self, iterations: usize) -> (f64, f64) {
        if self.dim == 0 || self.vals.iter().all(|&x| x == 0.0) {
            return (0.0, 0.0);
        }
        let mut v = vec![1.0; self.dim];
        let mut bounds = (0.0, f64::INFINITY);
        for _ in 0..iterations.max(1) {
            let w: Vec<f64> = (0..self.dim)
                .map(|i| 0.5 * (v[i] + self.row(i).map(|(j, x)| x.abs() * v[j]).sum::<f64>()))
                .collect();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..self.dim {
                let r = w[i] / v[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            bounds = ((2.0 * lo - 1.0).max(bounds.0), (2.0 * hi - 1.0).min(bounds.1));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.into_iter().map(|x| x / norm).collect();
            if bounds.1 - bounds.0 < 1e-12 {
                break;
            }
        }
        (bounds.0.max(0.0), bounds.1)
    }
}

/// All fixed polyominoes with `1..=max_faces` faces, translated so the
/// smallest `x` and `y` are zero. Each is listed once, faces in row-major order.
pub fn fixed_polyominoes(max_faces: usize) -> Vec<Vec<Face>> {
    fn normalize(mut faces: Vec<Face>) -> Vec<Face> {
        let x0 = faces.iter().map(|f| f.x).min().unwrap();
        let y0 = faces.iter().map(|f| f.y).min().unwrap();
        for f in &mut faces {
            *f = Face::new(f.x - x0, f.y - y0);
        }
        faces.sort_by_key(Face::row_major);
        faces
    }
    let mut all = Vec::new();
    let mut level = vec![vec![Face::new(0, 0)]];
    for size in 1..=max_faces {
        all.extend(level.iter().cloned());
        if size == max_faces {
            break;
        }
        let mut next = HashSet::new();
        for p in &level {
            for f in p {
                for step in Step::ALL {
                    let g = f.neighbor(step);
                    if !p.contains(&g) {
                        let mut q = p.clone();
                        q.push(g);
                        next.insert(normalize(q));
                    }
                }
            }
        }
        level = next.into_iter().collect();
        level.sort_by(|a, b| {
            a.iter()
                .map(Face::row_major)
                .collect::<Vec<_>>()
                .cmp(&b.iter().map(Face::row_major).collect::<Vec<_>>())
        });
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_squares_count() {
        let d = DiscreteDomain::square(1, 1.0).unwrap();
        assert_eq!((d.face_count(), d.vertex_count(), d.edge_count()), (1, 4, 4));
        assert_eq!(d.boundary_vertices().len(), 8);
        let d = DiscreteDomain::square(2, 1.0).unwrap();
        assert_eq!((d.face_count(), d.vertex_count(), d.edge_count()), (4, 9, 12));
    }

    #[test]
    fn disk_faces_lie_inside() {
        let d = DiscreteDomain::disk(1.0, 0.25).unwrap();
        let mut expected = 0;
        for y in -4..4 {
            for x in -4..4 {
                let f = Face::new(x, y);
                if f.corners().iter().all(|c| ((c.x * c.x + c.y * c.y) as f64) < 16.0) {
                    expected += 1;
                    assert!(d.face_idx(f).is_some());
                }
            }
        }
        assert_eq!(d.face_count(), expected);
        assert_eq!(expected, 32);
        assert!(DiscreteDomain::disk(1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_face_sets() {
        assert!(matches!(DiscreteDomain::from_faces([], 1.0), Err(Error::EmptyDomain)));
        match DiscreteDomain::from_faces([Face::new(0, 0), Face::new(2, 0)], 1.0) {
            Err(Error::Disconnected { components }) => assert_eq!(components.len(), 2),
            other => panic!("{other:?}"),
        }
        // corner-touching faces are not edge-connected
        assert!(DiscreteDomain::from_faces([Face::new(0, 0), Face::new(1, 1)], 1.0).is_err());
        let ring: Vec<Face> = (0..3)
            .flat_map(|y| (0..3).map(move |x| Face::new(x, y)))
            .filter(|f| *f != Face::new(1, 1))
            .collect();
        match DiscreteDomain::from_faces(ring, 1.0) {
            Err(Error::NotSimplyConnected { holes }) => assert_eq!(holes, vec![Face::new(1, 1)]),
            other => panic!("{other:?}"),
        }
        assert!(DiscreteDomain::square(2, 0.0).is_err());
    }

    #[test]
    fn defect_lines() {
        let d = DiscreteDomain::square(1, 1.0).unwrap();
        let l = d.defect_line(Face::new(0, 0), DefectStrategy::StraightEast).unwrap();
        assert_eq!(l.len(), 1);
        let e = d.edges()[l.crossed_edges()[0]];
        assert_eq!((d.vertices()[e.a], d.vertices()[e.b]), (Site::new(1, 0), Site::new(1, 1)));

        let d = DiscreteDomain::square(3, 1.0).unwrap();
        let c = Face::new(1, 1);
        assert_eq!(d.defect_line(c, DefectStrategy::StraightEast).unwrap().len(), 2);
        assert_eq!(d.defect_line(c, DefectStrategy::Shortest).unwrap().len(), 2);
        assert!(d.defect_line(Face::new(5, 5), DefectStrategy::Shortest).is_err());

        // a path that stops short of the outer vertex
        let east = d.defect_line(c, DefectStrategy::StraightEast).unwrap();
        assert!(DefectLine::from_crossings(&d, c, east.crossed_edges()[..1].to_vec()).is_err());
        assert!(DefectLine::from_crossings(&d, c, vec![east.crossed_edges()[1]]).is_err());

        let other = DiscreteDomain::square(4, 1.0).unwrap();
        assert!(TransitionMatrix::build(&other, &[east], 0.0).is_err());
    }

    #[test]
    fn transition_matrix_entries() {
        let d = DiscreteDomain::square(1, 1.0).unwrap();
        let p = TransitionMatrix::untwisted(&d, 0.0).unwrap();
        for i in 0..4 {
            let row: Vec<_> = p.row(i).collect();
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|&(_, x)| x == 0.25));
        }
        let line = d.defect_line(Face::new(0, 0), DefectStrategy::StraightEast).unwrap();
        let q = TransitionMatrix::build(&d, &[line.clone()], 0.0).unwrap();
        let negative: Vec<_> = (0..4)
            .flat_map(|i| q.row(i).filter(|&(_, x)| x < 0.0).map(move |(j, _)| (i, j)))
            .collect();
        assert_eq!(negative.len(), 2);
        assert!(q.is_symmetric());
        // the same line twice cancels
        let r = TransitionMatrix::build(&d, &[line.clone(), line], 0.0).unwrap();
        assert!(r.twisted_edges().is_empty());
        let m = TransitionMatrix::untwisted(&d, 1.0).unwrap();
        assert!((0..4).all(|i| m.row(i).all(|(_, x)| x == 0.2)));
        assert!(TransitionMatrix::untwisted(&d, -1.0).is_err());
    }

    #[test]
    fn polyomino_counts() {
        let counts: Vec<usize> = (1..=6)
            .map(|n| fixed_polyominoes(6).iter().filter(|p| p.len() == n).count())
            .collect();
        assert_eq!(counts, vec![1, 2, 6, 19, 63, 216]);
    }

    #[test]
    fn nearest_face_breaks_ties_low() {
        let d = DiscreteDomain::disk(1.0, 0.25).unwrap();
        assert_eq!(d.nearest_face([0.0, 0.0]), Face::new(-1, -1));
        assert_eq!(d.nearest_face([0.3, 0.1]), Face::new(1, 0));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("square:8".parse::<DomainSpec>().unwrap(), DomainSpec::Square { n: 8, mesh: 1.0 });
        let json = r#"{"shape":"disk","radius":1.0,"mesh":0.0078125}"#;
        assert_eq!(
            json.parse::<DomainSpec>().unwrap(),
            DomainSpec::Disk {
                radius: 1.0,
                mesh: 0.0078125
            }
        );
        let faces: DomainSpec = r#"{"shape":"faces","list":[[0,0],[1,0]]}"#.parse().unwrap();
        assert_eq!(DiscreteDomain::from_spec(&faces).unwrap().face_count(), 2);
        assert_eq!(
            "faces:0,0;0,1".parse::<DomainSpec>().unwrap(),
            DomainSpec::Faces {
                list: vec![[0, 0], [0, 1]],
                mesh: 1.0
            }
        );
        assert!("hexagon:3".parse::<DomainSpec>().is_err());
        for s in ["square:8", "rect:3x2", "disk:2.5", "faces:0,0;1,0"] {
            assert_eq!(s.parse::<DomainSpec>().unwrap().to_string(), s);
        }
        let fine = DomainSpec::Square { n: 4, mesh: 0.25 };
        assert_eq!(fine.to_string().parse::<DomainSpec>().unwrap(), fine);
    }

    fn polyomino(cells: Vec<(i32, i32)>) -> Vec<Face> {
        // grow a connected set by attaching each candidate next to an existing face
        let mut faces = vec![Face::new(0, 0)];
        for (k, (dir, pick)) in cells.into_iter().enumerate() {
            let base = faces[(pick as usize + k) % faces.len()];
            let f = base.neighbor(Step::ALL[dir as usize % 4]);
            if !faces.contains(&f) {
                faces.push(f);
            }
        }
        faces
    }

    proptest! {
        #[test]
        fn euler_and_matrix_invariants(cells in proptest::collection::vec((0i32..4, 0i32..50), 0..14), kappa in 0.0f64..2.0) {
            let faces = polyomino(cells);
            let d = match DiscreteDomain::from_faces(faces, 0.5) {
                Ok(d) => d,
                Err(Error::NotSimplyConnected { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            prop_assert_eq!(d.face_count() as i64 - d.edge_count() as i64 + d.vertex_count() as i64, 1);
            for s in d.boundary_vertices() {
                prop_assert!(d.vertex_idx(*s).is_none());
            }
            let f = d.faces()[d.face_count() / 2];
            let line = d.defect_line(f, DefectStrategy::Shortest).unwrap();
            let p = TransitionMatrix::build(&d, &[line], kappa).unwrap();
            prop_assert!(p.is_symmetric());
            for i in 0..p.dim() {
                prop_assert!(p.row_abs_sum(i) < 1.0);
            }
            let (_, hi) = p.spectral_radius_bounds(2000);
            prop_assert!(hi < 1.0);
        }
    }
}
