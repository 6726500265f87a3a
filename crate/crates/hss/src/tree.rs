//! The fully populated binary tree of contiguous index intervals that
//! underlies every hierarchical factorization.

use crate::error::{HssError, Result};

/// Node label `(level, position)`: levels run 0 (root) through the tree
/// depth, positions are 1-based within a level. The children of `(p, j)` are
/// `(p+1, 2j-1)` and `(p+1, 2j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub level: usize,
    pub pos: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { level: 0, pos: 1 };

    pub fn children(self) -> (NodeId, NodeId) {
        (
            NodeId {
                level: self.level + 1,
                pos: 2 * self.pos - 1,
            },
            NodeId {
                level: self.level + 1,
                pos: 2 * self.pos,
            },
        )
    }

    pub fn parent(self) -> Option<NodeId> {
        if self.level == 0 {
            None
        } else {
            Some(NodeId {
                level: self.level - 1,
                pos: self.pos.div_ceil(2),
            })
        }
    }

    pub fn sibling(self) -> Option<NodeId> {
        if self.level == 0 {
            None
        } else if self.pos % 2 == 1 {
            Some(NodeId {
                level: self.level,
                pos: self.pos + 1,
            })
        } else {
            Some(NodeId {
                level: self.level,
                pos: self.pos - 1,
            })
        }
    }

    pub fn is_left_child(self) -> bool {
        self.pos % 2 == 1
    }

    /// Index into level-major flat node storage.
    pub fn flat_index(self) -> usize {
        (1 << self.level) - 1 + (self.pos - 1)
    }
}

/// A depth-`P` fully populated binary partition of `0..n` into contiguous
/// intervals. Level-`P` intervals are nonempty, disjoint and concatenate in
/// order to `0..n`; every parent interval is the concatenation of its
/// children's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HssTree {
    n: usize,
    depth: usize,
    /// Half-open interval per node, in flat level-major order.
    intervals: Vec<(usize, usize)>,
}

/// Build the shallowest tree whose leaves hold at most `max_leaf` indices.
/// Intervals split as evenly as possible, the left child taking the larger
/// half, so every leaf size is within one of `n / 2^P`.
pub fn build_uniform_tree(n: usize, max_leaf: usize) -> Result<HssTree> {
    if n < 2 {
        return Err(HssError::InvalidArgument(format!(
            "tree requires n >= 2, got {n}"
        )));
    }
    if max_leaf < 2 {
        return Err(HssError::InvalidArgument(format!(
            "tree requires max_leaf >= 2, got {max_leaf}"
        )));
    }
    let mut depth = 0;
    while n.div_ceil(1 << depth) > max_leaf {
        depth += 1;
    }
    HssTree::with_depth(n, depth)
}

impl HssTree {
    /// Build the tree of a given depth directly (used when reloading a
    /// serialized factorization, whose depth is already fixed).
    pub fn with_depth(n: usize, depth: usize) -> Result<HssTree> {
        if n < 2 {
            return Err(HssError::InvalidArgument(format!(
                "tree requires n >= 2, got {n}"
            )));
        }
        if (1usize << depth) > n {
            return Err(HssError::InvalidArgument(format!(
                "depth {depth} leaves would be empty for n = {n}"
            )));
        }
        let node_count = (1 << (depth + 1)) - 1;
        let mut intervals = vec![(0usize, 0usize); node_count];
        intervals[0] = (0, n);
        for level in 0..depth {
            for pos in 1..=(1usize << level) {
                let node = NodeId { level, pos };
                let (start, end) = intervals[node.flat_index()];
                let len = end - start;
                let mid = start + len.div_ceil(2);
                let (left, right) = node.children();
                intervals[left.flat_index()] = (start, mid);
                intervals[right.flat_index()] = (mid, end);
            }
        }
        Ok(HssTree {
            n,
            depth,
            intervals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.level <= self.depth && node.pos >= 1 && node.pos <= (1 << node.level)
    }

    fn check(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(HssError::InvalidArgument(format!(
                "node ({},{}) outside tree of depth {}",
                node.level, node.pos, self.depth
            )))
        }
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        node.level == self.depth
    }

    /// The contiguous index interval owned by `node`.
    pub fn interval(&self, node: NodeId) -> Result<std::ops::Range<usize>> {
        self.check(node)?;
        let (s, e) = self.intervals[node.flat_index()];
        Ok(s..e)
    }

    pub fn node_size(&self, node: NodeId) -> Result<usize> {
        Ok(self.interval(node)?.len())
    }

    pub fn children(&self, node: NodeId) -> Result<(NodeId, NodeId)> {
        self.check(node)?;
        if self.is_leaf(node) {
            return Err(HssError::InvalidArgument(format!(
                "node ({},{}) is a leaf",
                node.level, node.pos
            )));
        }
        Ok(node.children())
    }

    pub fn parent(&self, node: NodeId) -> Result<Option<NodeId>> {
        self.check(node)?;
        Ok(node.parent())
    }

    pub fn sibling(&self, node: NodeId) -> Result<Option<NodeId>> {
        self.check(node)?;
        Ok(node.sibling())
    }

    pub fn nodes_at_level(&self, level: usize) -> impl Iterator<Item = NodeId> {
        (1..=(1usize << level)).map(move |pos| NodeId { level, pos })
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> {
        self.nodes_at_level(self.depth)
    }

    /// Largest leaf interval length.
    pub fn max_leaf_size(&self) -> usize {
        self.leaves()
            .map(|l| self.intervals[l.flat_index()])
            .map(|(s, e)| e - s)
            .max()
            .unwrap_or(0)
    }
}
