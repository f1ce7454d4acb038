use super::{MeshError, TriangleMesh};

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (ra_rank, rb_rank) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ra_rank < rb_rank {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ra_rank == rb_rank {
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Partitions faces into groups connected through shared vertices.
///
/// Each group lists face indices in ascending order. Groups are sorted by
/// descending size; equal sizes keep the group with the lower smallest face
/// index first.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<Vec<usize>> {
    let mut ds = DisjointSet::new(mesh.vertex_count());
    for f in mesh.faces() {
        ds.union(f[0], f[1]);
        ds.union(f[0], f[2]);
    }
    let mut slot_of_root = vec![usize::MAX; mesh.vertex_count()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, f) in mesh.faces().iter().enumerate() {
        let root = ds.find(f[0]) as usize;
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[root]].push(i);
    }
    // Groups were created in order of their first face, so a stable sort by
    // size leaves ties ordered by smallest face index.
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
    groups
}

/// Keeps the largest face-connected cluster and drops unreferenced vertices.
pub fn keep_largest_cluster(mesh: &TriangleMesh) -> Result<TriangleMesh, MeshError> {
    let groups = connected_components(mesh);
    let largest = groups.first().ok_or(MeshError::EmptyMesh)?;
    Ok(mesh.subset(largest))
}
