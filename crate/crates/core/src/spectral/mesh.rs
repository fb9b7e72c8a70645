use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::SpectralError;

/// Faces with area at or below this are rejected.
pub const DEGENERATE_AREA: f64 = 1e-12;
/// Distance within which a vertex counts as the antipode of another.
pub const ANTIPODE_TOL: f64 = 1e-8;

pub type Point = [f64; 3];

/// Triangle mesh of a closed surface, optionally with an identification of
/// vertices. Identified vertices share one degree of freedom; this is how
/// periodic grids and antipodal quotients are represented without a
/// geometric embedding of the quotient.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    /// Class id per vertex, compact in `0..classes`.
    identification: Option<Vec<usize>>,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

/// Cotangent of the angle at `apex` in triangle `(apex, p, q)`.
pub(crate) fn cot_at(apex: &Point, p: &Point, q: &Point) -> f64 {
    let u = sub(p, apex);
    let v = sub(q, apex);
    dot(&u, &v) / norm(&cross(&u, &v))
}

fn compact_classes(roots: &[usize]) -> Vec<usize> {
    let mut ids = HashMap::new();
    roots
        .iter()
        .map(|r| {
            let next = ids.len();
            *ids.entry(*r).or_insert(next)
        })
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl TriMesh {
    /// Checks face indices only; call [`validate`](Self::validate) for the
    /// closed-surface conditions.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self, SpectralError> {
        for (f, face) in faces.iter().enumerate() {
            if face.iter().any(|&v| v >= vertices.len()) {
                return Err(SpectralError::InvalidFace(f));
            }
        }
        Ok(Self {
            vertices,
            faces,
            identification: None,
        })
    }

    /// Identifies the given vertex pairs (transitively).
    pub fn with_identified_pairs(mut self, pairs: &[(usize, usize)]) -> Result<Self, SpectralError> {
        let nv = self.vertices.len();
        let mut parent: Vec<usize> = match &self.identification {
            // keep existing classes by linking each vertex to its class's first vertex
            Some(classes) => {
                let mut first = HashMap::new();
                classes
                    .iter()
                    .enumerate()
                    .map(|(v, c)| *first.entry(*c).or_insert(v))
                    .collect()
            }
            None => (0..nv).collect(),
        };
        for &(a, b) in pairs {
            if a >= nv || b >= nv {
                return Err(SpectralError::InvalidIdentification { a, b });
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let roots: Vec<usize> = (0..nv).map(|v| find(&mut parent, v)).collect();
        self.identification = Some(compact_classes(&roots));
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn identification(&self) -> Option<&[usize]> {
        self.identification.as_deref()
    }

    /// Identified vertex pairs `(representative, member)`, for serialization.
    pub fn identified_pairs(&self) -> Vec<(usize, usize)> {
        let Some(classes) = &self.identification else {
            return Vec::new();
        };
        let mut first: HashMap<usize, usize> = HashMap::new();
        let mut pairs = Vec::new();
        for (v, c) in classes.iter().enumerate() {
            match first.get(c) {
                Some(&rep) => pairs.push((rep, v)),
                None => {
                    first.insert(*c, v);
                }
            }
        }
        pairs
    }

    /// Degree-of-freedom index of vertex `v`.
    pub fn class_of(&self, v: usize) -> usize {
        match &self.identification {
            Some(c) => c[v],
            None => v,
        }
    }

    /// Number of degrees of freedom: vertex classes if identified, vertices otherwise.
    pub fn dof_count(&self) -> usize {
        match &self.identification {
            Some(c) => c.iter().copied().max().map_or(0, |m| m + 1),
            None => self.vertices.len(),
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Closed-surface checks on the degree-of-freedom level: no degenerate
    /// faces, no face touching one class twice, and every edge between classes
    /// shared by exactly two faces.
    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.faces.is_empty() {
            return Err(SpectralError::EmptyMesh);
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, face) in self.faces.iter().enumerate() {
            let area = self.face_area(f);
            if !(area > DEGENERATE_AREA) {
                return Err(SpectralError::DegenerateFace { face: f, area });
            }
            let c = face.map(|v| self.class_of(v));
            if c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                return Err(SpectralError::DegenerateFace { face: f, area: 0.0 });
            }
            for e in 0..3 {
                let (a, b) = (c[e], c[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<_> = edges.into_iter().filter(|&(_, count)| count != 2).collect();
        bad.sort_unstable();
        if let Some(&((a, b), count)) = bad.first() {
            return Err(SpectralError::NonManifoldEdge { a, b, count });
        }
        Ok(())
    }

    /// Regular tetrahedron inscribed in the unit sphere.
    pub fn tetrahedron() -> Self {
        let s = 1.0 / 3.0_f64.sqrt();
        let vertices = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        Self::new(vertices, faces).expect("static mesh")
    }

    /// Regular octahedron inscribed in the unit sphere.
    pub fn octahedron() -> Self {
        let vertices = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let faces = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        Self::new(vertices, faces).expect("static mesh")
    }

    /// Unit icosphere: the icosahedron with `level` rounds of 4-to-1
    /// subdivision, new vertices projected to the sphere. Has `10·4^level + 2`
    /// vertices and is centrally symmetric at every level.
    pub fn icosphere(level: u32) -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut vertices: Vec<Point> = raw.iter().map(normalized).collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[a], vertices[b]);
                    vertices.push(normalized(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Self::new(vertices, faces).expect("generated mesh")
    }

    /// Flat square torus of side `side` as an `cells × cells` grid on the
    /// fundamental square `[0, side]²` (in the plane z = 0) with opposite
    /// edges identified.
    pub fn flat_torus(cells: usize, side: f64) -> Result<Self, SpectralError> {
        if cells < 3 {
            return Err(SpectralError::GridTooCoarse(cells));
        }
        let h = side / cells as f64;
        let row = cells + 1;
        let mut vertices = Vec::with_capacity(row * row);
        for j in 0..row {
            for i in 0..row {
                vertices.push([i as f64 * h, j as f64 * h, 0.0]);
            }
        }
        let at = |i: usize, j: usize| j * row + i;
        let mut faces = Vec::with_capacity(2 * cells * cells);
        for j in 0..cells {
            for i in 0..cells {
                faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
        let mut pairs = Vec::new();
        for k in 0..row {
            pairs.push((at(0, k), at(cells, k)));
            pairs.push((at(k, 0), at(k, cells)));
        }
        Self::new(vertices, faces)?.with_identified_pairs(&pairs)
    }
}

fn normalized(p: &Point) -> Point {
    let r = norm(p);
    [p[0] / r, p[1] / r, p[2] / r]
}

/// Quotient by the antipodal map `v ↦ −v`.
///
/// Every vertex must have an antipode within [`ANTIPODE_TOL`] and the face set
/// must be invariant under the pairing. The result keeps the cover's vertex
/// positions, records the pairing as an identification and keeps one face from
/// each antipodal face pair, so its degrees of freedom are exactly half the
/// cover's vertices.
pub fn antipodal_quotient(m: &TriMesh) -> Result<TriMesh, SpectralError> {
    if m.identification.is_some() {
        return Err(SpectralError::AlreadyIdentified);
    }
    let vs = &m.vertices;
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| vs[a][0].total_cmp(&vs[b][0]));
    let xs: Vec<f64> = order.iter().map(|&i| vs[i][0]).collect();

    let mut partner = vec![usize::MAX; vs.len()];
    for v in 0..vs.len() {
        let target = [-vs[v][0], -vs[v][1], -vs[v][2]];
        let lo = xs.partition_point(|&x| x < target[0] - ANTIPODE_TOL);
        let found = order[lo..]
            .iter()
            .take_while(|&&w| vs[w][0] <= target[0] + ANTIPODE_TOL)
            .find(|&&w| w != v && norm(&sub(&vs[w], &target)) <= ANTIPODE_TOL);
        match found {
            Some(&w) => partner[v] = w,
            None => return Err(SpectralError::NotCentrallySymmetric(v)),
        }
    }
    if let Some(v) = (0..vs.len()).find(|&v| partner[partner[v]] != v) {
        return Err(SpectralError::NotCentrallySymmetric(v));
    }

    let key = |f: &[usize; 3]| {
        let mut k = *f;
        k.sort_unstable();
        k
    };
    let face_index: HashMap<[usize; 3], usize> = m.faces.iter().enumerate().map(|(i, f)| (key(f), i)).collect();
    let mut faces = Vec::with_capacity(m.faces.len() / 2);
    for (i, f) in m.faces.iter().enumerate() {
        let image = key(&f.map(|v| partner[v]));
        match face_index.get(&image) {
            Some(&j) if j == i => return Err(SpectralError::AsymmetricFace(i)),
            Some(&j) => {
                if i < j {
                    faces.push(*f);
                }
            }
            None => return Err(SpectralError::AsymmetricFace(i)),
        }
    }
    let pairs: Vec<(usize, usize)> = (0..vs.len())
        .filter(|&v| v < partner[v])
        .map(|v| (v, partner[v]))
        .collect();
    TriMesh::new(vs.clone(), faces)?.with_identified_pairs(&pairs)
}

/// JSON mesh file: vertices, triangles and optional identified index pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identification: Vec<(usize, usize)>,
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<TriMesh, SpectralError> {
        let m = TriMesh::new(self.vertices, self.faces)?;
        if self.identification.is_empty() {
            Ok(m)
        } else {
            m.with_identified_pairs(&self.identification)
        }
    }
}

impl From<&TriMesh> for MeshFile {
    fn from(m: &TriMesh) -> Self {
        Self {
            vertices: m.vertices.clone(),
            faces: m.faces.clone(),
            identification: m.identified_pairs(),
        }
    }
}

/// Parses an OFF file with triangular faces.
pub fn parse_off(text: &str) -> Result<TriMesh, SpectralError> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |msg: &str| SpectralError::Parse(msg.to_string());
    if tokens.next() != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut count = |what: &str| -> Result<usize, SpectralError> {
        tokens
            .next()
            .ok_or_else(|| bad(&format!("missing {what}")))?
            .parse()
            .map_err(|_| bad(&format!("invalid {what}")))
    };
    let nv = count("vertex count")?;
    let nf = count("face count")?;
    let _ne = count("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            *c = tokens
                .next()
                .ok_or_else(|| bad("truncated vertex list"))?
                .parse()
                .map_err(|_| bad("invalid vertex coordinate"))?;
        }
        vertices.push(p);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let arity: usize = tokens
            .next()
            .ok_or_else(|| bad("truncated face list"))?
            .parse()
            .map_err(|_| bad("invalid face arity"))?;
        if arity != 3 {
            return Err(bad("only triangular faces are supported"));
        }
        let mut f = [0usize; 3];
        for v in &mut f {
            *v = tokens
                .next()
                .ok_or_else(|| bad("truncated face"))?
                .parse()
                .map_err(|_| bad("invalid face index"))?;
        }
        faces.push(f);
    }
    TriMesh::new(vertices, faces)
}

pub fn write_off(m: &TriMesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", m.vertices.len(), m.faces.len());
    for v in &m.vertices {
        s.push_str(&format!("{:?} {:?} {:?}\n", v[0], v[1], v[2]));
    }
    for f in &m.faces {
        s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_symmetry() {
        for level in 0..4 {
            let m = TriMesh::icosphere(level);
            assert_eq!(m.vertices().len(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.faces().len(), 20 * 4usize.pow(level));
            m.validate().unwrap();
            for v in m.vertices() {
                assert!((norm(v) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quotient_halves_dofs() {
        for level in 0..3 {
            let m = TriMesh::icosphere(level);
            let q = antipodal_quotient(&m).unwrap();
            assert_eq!(q.dof_count() * 2, m.vertices().len());
            assert_eq!(q.faces().len() * 2, m.faces().len());
            q.validate().unwrap();
        }
        let q = antipodal_quotient(&TriMesh::octahedron()).unwrap();
        assert_eq!(q.dof_count(), 3);
    }

    #[test]
    fn tetrahedron_is_not_centrally_symmetric() {
        let t = TriMesh::tetrahedron();
        t.validate().unwrap();
        assert!(matches!(
            antipodal_quotient(&t),
            Err(SpectralError::NotCentrallySymmetric(0))
        ));
    }

    #[test]
    fn asymmetric_faces_are_rejected() {
        // octahedron vertices with one antipodal face pair replaced by a
        // non-matching triangle
        let mut faces = TriMesh::octahedron().faces().to_vec();
        faces[0] = [0, 2, 5];
        let m = TriMesh::new(TriMesh::octahedron().vertices().to_vec(), faces).unwrap();
        assert!(matches!(antipodal_quotient(&m), Err(SpectralError::AsymmetricFace(_))));
    }

    #[test]
    fn validation_errors() {
        let open = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            open.validate(),
            Err(SpectralError::NonManifoldEdge { count: 1, .. })
        ));

        let flat = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 1]],
        )
        .unwrap();
        assert!(matches!(
            flat.validate(),
            Err(SpectralError::DegenerateFace { face: 0, .. })
        ));

        assert!(matches!(
            TriMesh::new(vec![[0.0; 3]], vec![[0, 1, 2]]),
            Err(SpectralError::InvalidFace(0))
        ));
    }

    #[test]
    fn torus_grid_is_closed() {
        let t = TriMesh::flat_torus(8, 1.0).unwrap();
        assert_eq!(t.dof_count(), 64);
        t.validate().unwrap();
        assert!((t.total_area() - 1.0).abs() < 1e-12);
        assert!(matches!(
            TriMesh::flat_torus(2, 1.0),
            Err(SpectralError::GridTooCoarse(2))
        ));
    }

    #[test]
    fn off_and_json_round_trip() {
        let m = TriMesh::icosphere(1);
        let back = parse_off(&write_off(&m)).unwrap();
        assert_eq!(back, m);

        let q = antipodal_quotient(&m).unwrap();
        let json = serde_json::to_string(&MeshFile::from(&q)).unwrap();
        let back: MeshFile = serde_json::from_str(&json).unwrap();
        let back = back.into_mesh().unwrap();
        assert_eq!(back.dof_count(), q.dof_count());
        for v in 0..m.vertices().len() {
            for w in 0..m.vertices().len() {
                assert_eq!(back.class_of(v) == back.class_of(w), q.class_of(v) == q.class_of(w));
            }
        }
    }

    #[test]
    fn off_parse_errors() {
        assert!(matches!(parse_off("PLY\n"), Err(SpectralError::Parse(_))));
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n"),
            Err(SpectralError::Parse(_))
        ));
        let m = parse_off("OFF # comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.faces().len(), 1);
    }
}
