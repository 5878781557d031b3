/// Disjoint sets with path halving and union by size.
#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn reset(&mut self, n: usize) {
        self.parent.clear();
        self.parent.extend(0..n as u32);
        self.size.clear();
        self.size.resize(n, 1);
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns true when two distinct sets were merged.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    #[cfg(test)]
    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Union by size without path compression, so every union can be undone.
/// Used by the exhaustive enumerators, which walk the configuration tree
/// depth-first.
#[derive(Clone, Debug)]
pub(crate) struct RollbackUnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Per root: does the set contain a counted node (region vertex or wired block)?
    counted: Vec<bool>,
    /// Number of sets with `counted == true`.
    pub counted_sets: usize,
    history: Vec<Option<(u32, u32, bool)>>,
}

impl RollbackUnionFind {
    pub fn new(counted: Vec<bool>) -> Self {
        let n = counted.len();
        let counted_sets = counted.iter().filter(|&&c| c).count();
        RollbackUnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            counted,
            counted_sets,
            history: Vec::new(),
        }
    }

    #[inline]
    pub fn find(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    /// Merge; always pushes one history entry so `undo` pairs with `union`.
    pub fn union(&mut self, a: u32, b: u32) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            self.history.push(None);
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        let old_counted = self.counted[ra as usize];
        let cb = self.counted[rb as usize];
        if old_counted && cb {
            self.counted_sets -= 1;
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        self.counted[ra as usize] = old_counted || cb;
        self.history.push(Some((ra, rb, old_counted)));
    }

    pub fn undo(&mut self) {
        if let Some((ra, rb, old_counted)) = self.history.pop().expect("undo without union") {
            let cb = self.counted[rb as usize];
            if old_counted && cb {
                self.counted_sets += 1;
            }
            self.counted[ra as usize] = old_counted;
            self.size[ra as usize] -= self.size[rb as usize];
            self.parent[rb as usize] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_and_find() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0));
        assert!(uf.same(0, 1));
        assert!(!uf.same(1, 3));
        uf.union(1, 4);
        assert!(uf.same(0, 3));
    }

    #[test]
    fn rollback_restores_counts() {
        let mut uf = RollbackUnionFind::new(vec![true, true, false, true]);
        assert_eq!(uf.counted_sets, 3);
        uf.union(0, 1);
        assert_eq!(uf.counted_sets, 2);
        uf.union(1, 2);
        assert_eq!(uf.counted_sets, 2);
        uf.union(0, 2);
        uf.union(2, 3);
        assert_eq!(uf.counted_sets, 1);
        uf.undo();
        uf.undo();
        assert_eq!(uf.counted_sets, 2);
        uf.undo();
        uf.undo();
        assert_eq!(uf.counted_sets, 3);
        assert_ne!(uf.find(0), uf.find(1));
    }
}
