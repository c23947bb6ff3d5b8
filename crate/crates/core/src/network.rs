//! Rooted-tree party graphs.
//!
//! The root is the target party; every control party names exactly one
//! parent, and each edge carries one Bell pair. A connected graph on `n`
//! parties with `n − 1` edges is a tree, which is the entanglement-optimal
//! case this crate models.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::qsim::QubitId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyId(String);

impl PartyId {
    pub fn new(name: impl Into<String>) -> Self {
        PartyId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PartyId {
    fn from(s: &str) -> Self {
        PartyId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("tree spec has no root")]
    MissingRoot,
    #[error("tree spec declares more than one root")]
    MultipleRoots,
    #[error("party {0} is declared twice")]
    DuplicateParty(PartyId),
    #[error("party {party} names unknown parent {parent}, so it is disconnected from the root")]
    UnknownParent { party: PartyId, parent: PartyId },
    #[error("parent links through {0} form a cycle")]
    Cycle(PartyId),
    #[error("the root {0} cannot have a parent")]
    RootHasParent(PartyId),
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<NetworkError>,
    },
    #[error("numbering {numbering} requires the five-party reference tree")]
    NumberingMismatch { numbering: &'static str },
}

/// Validated rooted tree. Party 0 is the root; the remaining parties keep
/// declaration order, which also fixes the order of every child list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parties: Vec<PartyId>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl RootedTree {
    /// Builds a tree from `(child, parent)` links.
    pub fn new(root: PartyId, links: Vec<(PartyId, PartyId)>) -> Result<Self, NetworkError> {
        let mut parties = vec![root.clone()];
        for (child, _) in &links {
            if *child == root {
                return Err(NetworkError::RootHasParent(root));
            }
            if parties.contains(child) {
                return Err(NetworkError::DuplicateParty(child.clone()));
            }
            parties.push(child.clone());
        }
        let index_of = |p: &PartyId| parties.iter().position(|x| x == p);
        let mut parent = vec![None; parties.len()];
        for (i, (child, par)) in links.iter().enumerate() {
            let pi = index_of(par).ok_or_else(|| NetworkError::UnknownParent {
                party: child.clone(),
                parent: par.clone(),
            })?;
            parent[i + 1] = Some(pi);
        }
        // Every parent chain must reach the root within n steps.
        for start in 1..parties.len() {
            let mut cur = start;
            let mut hops = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                hops += 1;
                if hops > parties.len() {
                    return Err(NetworkError::Cycle(parties[start].clone()));
                }
            }
            if cur != 0 {
                return Err(NetworkError::Cycle(parties[start].clone()));
            }
        }
        let mut children = vec![Vec::new(); parties.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        Ok(RootedTree {
            parties,
            parent,
            children,
        })
    }

    /// The five-party example: `S11`, `S12` under `T`; `S21`, `S22` under `S11`.
    pub fn five_party() -> Self {
        let link = |c: &str, p: &str| (PartyId::from(c), PartyId::from(p));
        RootedTree::new(
            "T".into(),
            vec![
                link("S11", "T"),
                link("S12", "T"),
                link("S21", "S11"),
                link("S22", "S11"),
            ],
        )
        .expect("five-party tree is valid")
    }

    /// Every control party attached directly to the target.
    pub fn star(n: usize) -> Self {
        assert!(n >= 1);
        let links = (1..n)
            .map(|i| (PartyId::new(format!("P{i}")), PartyId::from("T")))
            .collect();
        RootedTree::new("T".into(), links).expect("star is valid")
    }

    /// A chain `T ← P1 ← P2 ← …`.
    pub fn path(n: usize) -> Self {
        assert!(n >= 1);
        let links = (1..n)
            .map(|i| {
                let parent = if i == 1 {
                    PartyId::from("T")
                } else {
                    PartyId::new(format!("P{}", i - 1))
                };
                (PartyId::new(format!("P{i}")), parent)
            })
            .collect();
        RootedTree::new("T".into(), links).expect("path is valid")
    }

    /// Builds a tree from a parent array where `parents[i - 1] < i` is the
    /// parent of party `i` and party 0 is the root `T`.
    pub fn from_parent_indices(parents: &[usize]) -> Result<Self, NetworkError> {
        let name = |i: usize| {
            if i == 0 {
                PartyId::from("T")
            } else {
                PartyId::new(format!("P{i}"))
            }
        };
        let links = parents
            .iter()
            .enumerate()
            .map(|(i, &p)| (name(i + 1), name(p)))
            .collect();
        RootedTree::new(name(0), links)
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn root(&self) -> &PartyId {
        &self.parties[0]
    }

    pub fn parties(&self) -> &[PartyId] {
        &self.parties
    }

    pub fn contains(&self, p: &PartyId) -> bool {
        self.parties.contains(p)
    }

    fn idx(&self, p: &PartyId) -> Result<usize, NetworkError> {
        self.parties
            .iter()
            .position(|x| x == p)
            .ok_or_else(|| NetworkError::UnknownParty(p.clone()))
    }

    pub fn parent(&self, p: &PartyId) -> Option<&PartyId> {
        let i = self.idx(p).ok()?;
        self.parent[i].map(|pi| &self.parties[pi])
    }

    /// Children in declaration order.
    pub fn children(&self, p: &PartyId) -> Vec<&PartyId> {
        match self.idx(p) {
            Ok(i) => self.children[i].iter().map(|&c| &self.parties[c]).collect(),
            Err(_) => Vec::new(),
        }
    }

    pub fn is_leaf(&self, p: &PartyId) -> bool {
        self.children(p).is_empty()
    }

    /// `(child, parent)` pairs in declaration order.
    pub fn edges(&self) -> Vec<(&PartyId, &PartyId)> {
        (1..self.parties.len())
            .map(|i| (&self.parties[i], &self.parties[self.parent[i].unwrap()]))
            .collect()
    }

    pub fn depth(&self, p: &PartyId) -> Option<usize> {
        let mut cur = self.idx(p).ok()?;
        let mut d = 0;
        while let Some(par) = self.parent[cur] {
            cur = par;
            d += 1;
        }
        Some(d)
    }

    /// Breadth-first order from the root, children in declaration order.
    pub fn bfs_order(&self) -> Vec<&PartyId> {
        let mut out = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            out.push(&self.parties[i]);
            queue.extend(self.children[i].iter().copied());
        }
        out
    }

    /// Parties of the subtree rooted at `p`, `p` first, in BFS order.
    pub fn subtree(&self, p: &PartyId) -> Vec<&PartyId> {
        let Ok(start) = self.idx(p) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            out.push(&self.parties[i]);
            queue.extend(self.children[i].iter().copied());
        }
        out
    }

    /// Strict ancestors of `p`, nearest first, ending at the root.
    pub fn ancestors(&self, p: &PartyId) -> Vec<&PartyId> {
        let mut out = Vec::new();
        let Ok(mut cur) = self.idx(p) else {
            return out;
        };
        while let Some(par) = self.parent[cur] {
            out.push(&self.parties[par]);
            cur = par;
        }
        out
    }

    /// Number of Bell pairs held by `p`: its degree in the tree.
    pub fn bell_pairs_at(&self, p: &PartyId) -> usize {
        match self.idx(p) {
            Ok(i) => self.children[i].len() + usize::from(self.parent[i].is_some()),
            Err(_) => 0,
        }
    }

    pub fn max_bell_pairs_per_party(&self) -> usize {
        self.parties
            .iter()
            .map(|p| self.bell_pairs_at(p))
            .max()
            .unwrap_or(0)
    }

    /// Canonical encoding of the unlabeled shape (AHU style).
    pub fn shape_key(&self) -> String {
        fn enc(t: &RootedTree, i: usize) -> String {
            let mut parts: Vec<String> = t.children[i].iter().map(|&c| enc(t, c)).collect();
            parts.sort();
            format!("({})", parts.concat())
        }
        enc(self, 0)
    }

    pub fn profile(&self) -> TreeProfile {
        let depths: BTreeMap<PartyId, usize> = self
            .parties
            .iter()
            .map(|p| (p.clone(), self.depth(p).expect("party is in tree")))
            .collect();
        let height = depths.values().copied().max().unwrap_or(0);
        let mut counts = BTreeMap::new();
        for &d in depths.values().filter(|&&d| d > 0) {
            *counts.entry(d).or_insert(0) += 1;
        }
        TreeProfile {
            depths,
            height,
            counts,
        }
    }
}

/// Depth, height and per-depth party counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeProfile {
    pub depths: BTreeMap<PartyId, usize>,
    pub height: usize,
    /// `d → n_d` for `d ≥ 1`.
    pub counts: BTreeMap<usize, usize>,
}

impl TreeProfile {
    /// Total parties: `Σ n_d + 1`.
    pub fn n(&self) -> usize {
        self.counts.values().sum::<usize>() + 1
    }

    pub fn count_at(&self, d: usize) -> usize {
        self.counts.get(&d).copied().unwrap_or(0)
    }
}

pub fn profile(tree: &RootedTree) -> TreeProfile {
    tree.profile()
}

/// One rooted tree per unlabeled shape on `n` parties, in a stable order.
pub fn enumerate_shapes(n: usize) -> Vec<RootedTree> {
    assert!(n >= 1);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut parents = vec![0usize; n.saturating_sub(1)];
    fn rec(
        i: usize,
        parents: &mut Vec<usize>,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<RootedTree>,
    ) {
        if i == parents.len() {
            let tree = RootedTree::from_parent_indices(parents).expect("parent < child");
            if seen.insert(tree.shape_key()) {
                out.push(tree);
            }
            return;
        }
        // Party i + 1 attaches to any earlier party.
        for p in 0..=i {
            parents[i] = p;
            rec(i + 1, parents, seen, out);
        }
    }
    rec(0, &mut parents, &mut seen, &mut out);
    out
}

/// Parses a tree-spec document:
///
/// ```text
/// # five-party example
/// root: T
/// party: S11 parent: T
/// party: S21 parent: S11
/// ```
pub fn parse_tree(text: &str) -> Result<RootedTree, NetworkError> {
    let mut root: Option<PartyId> = None;
    let mut links: Vec<(PartyId, PartyId)> = Vec::new();
    let mut line_of: BTreeMap<PartyId, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: &str| NetworkError::Syntax {
            line,
            message: message.to_string(),
        };
        if let Some(rest) = content.strip_prefix("root:") {
            let name = single_name(rest).ok_or_else(|| syntax("expected `root: <name>`"))?;
            if root.is_some() {
                return Err(NetworkError::AtLine {
                    line,
                    source: Box::new(NetworkError::MultipleRoots),
                });
            }
            line_of.entry(name.clone()).or_insert(line);
            root = Some(name);
        } else if let Some(rest) = content.strip_prefix("party:") {
            let (name, parent) = rest
                .split_once("parent:")
                .ok_or_else(|| syntax("expected `party: <name> parent: <name>`"))?;
            let name = single_name(name).ok_or_else(|| syntax("bad party name"))?;
            let parent = single_name(parent).ok_or_else(|| syntax("bad parent name"))?;
            if root.as_ref() == Some(&name) {
                return Err(NetworkError::AtLine {
                    line,
                    source: Box::new(NetworkError::RootHasParent(name)),
                });
            }
            if line_of.contains_key(&name) {
                return Err(NetworkError::AtLine {
                    line,
                    source: Box::new(NetworkError::DuplicateParty(name)),
                });
            }
            line_of.insert(name.clone(), line);
            links.push((name, parent));
        } else {
            return Err(syntax("expected `root:` or `party:`"));
        }
    }
    let root = root.ok_or(NetworkError::MissingRoot)?;
    RootedTree::new(root, links).map_err(|e| {
        let party = match &e {
            NetworkError::DuplicateParty(p)
            | NetworkError::Cycle(p)
            | NetworkError::RootHasParent(p) => Some(p.clone()),
            NetworkError::UnknownParent { party, .. } => Some(party.clone()),
            _ => None,
        };
        match party.and_then(|p| line_of.get(&p).copied()) {
            Some(line) => NetworkError::AtLine {
                line,
                source: Box::new(e),
            },
            None => e,
        }
    })
}

fn single_name(s: &str) -> Option<PartyId> {
    let mut words = s.split_whitespace();
    let name = words.next()?;
    if words.next().is_some() {
        return None;
    }
    Some(PartyId::new(name))
}

/// Writes a tree back out in the tree-spec format.
pub fn render_tree_spec(tree: &RootedTree) -> String {
    let mut out = format!("root: {}\n", tree.root());
    for (child, parent) in tree.edges() {
        let _ = writeln!(out, "party: {child} parent: {parent}");
    }
    out
}

/// Qubits of the Bell pair on one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeQubits {
    pub child: PartyId,
    pub parent: PartyId,
    /// Held by the child.
    pub child_half: QubitId,
    /// Held by the parent.
    pub parent_half: QubitId,
}

/// Assignment of input qubits and Bell-pair halves to parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitLayout {
    inputs: BTreeMap<PartyId, QubitId>,
    /// In tree edge (declaration) order.
    edges: Vec<EdgeQubits>,
    target: PartyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Numbering {
    /// The fixed labels 1..=13 of the five-party example.
    FiveParty,
    /// Deepest level first; within a party: child-shared halves, input,
    /// then the half toward the parent.
    Canonical,
}

impl QubitLayout {
    pub fn input(&self, p: &PartyId) -> Option<QubitId> {
        self.inputs.get(p).copied()
    }

    pub fn inputs(&self) -> &BTreeMap<PartyId, QubitId> {
        &self.inputs
    }

    pub fn target(&self) -> &PartyId {
        &self.target
    }

    pub fn target_input(&self) -> QubitId {
        self.inputs[&self.target]
    }

    /// Input labels sorted ascending; this is the ket order of input states.
    pub fn input_labels(&self) -> Vec<QubitId> {
        let mut v: Vec<QubitId> = self.inputs.values().copied().collect();
        v.sort();
        v
    }

    /// Control-party inputs sorted ascending.
    pub fn control_inputs(&self) -> Vec<QubitId> {
        let t = self.target_input();
        self.input_labels()
            .into_iter()
            .filter(|&q| q != t)
            .collect()
    }

    pub fn edges(&self) -> &[EdgeQubits] {
        &self.edges
    }

    /// The edge from `child` up to its parent.
    pub fn edge_above(&self, child: &PartyId) -> Option<&EdgeQubits> {
        self.edges.iter().find(|e| &e.child == child)
    }

    /// Edges from `p` down to its children, in child order.
    pub fn edges_below(&self, p: &PartyId) -> Vec<&EdgeQubits> {
        self.edges.iter().filter(|e| &e.parent == p).collect()
    }

    /// The edge whose parent holds `half`.
    pub fn edge_with_parent_half(&self, half: QubitId) -> Option<&EdgeQubits> {
        self.edges.iter().find(|e| e.parent_half == half)
    }

    pub fn all_labels(&self) -> Vec<QubitId> {
        let mut v: Vec<QubitId> = self.inputs.values().copied().collect();
        for e in &self.edges {
            v.push(e.child_half);
            v.push(e.parent_half);
        }
        v.sort();
        v
    }

    /// Party holding the input qubit `q`.
    pub fn owner_of_input(&self, q: QubitId) -> Option<&PartyId> {
        self.inputs.iter().find(|(_, &v)| v == q).map(|(p, _)| p)
    }
}

pub fn allocate_layout(
    tree: &RootedTree,
    numbering: Numbering,
) -> Result<QubitLayout, NetworkError> {
    match numbering {
        Numbering::Canonical => Ok(canonical_layout(tree)),
        Numbering::FiveParty => {
            if *tree != RootedTree::five_party() {
                return Err(NetworkError::NumberingMismatch {
                    numbering: "five_party",
                });
            }
            let q = QubitId;
            let inputs = [("S21", 1), ("S22", 3), ("S11", 7), ("S12", 9), ("T", 13)]
                .into_iter()
                .map(|(p, v)| (PartyId::from(p), q(v)))
                .collect();
            let edges = [
                ("S11", "T", 8, 11),
                ("S12", "T", 10, 12),
                ("S21", "S11", 2, 5),
                ("S22", "S11", 4, 6),
            ]
            .into_iter()
            .map(|(c, p, ch, ph)| EdgeQubits {
                child: c.into(),
                parent: p.into(),
                child_half: q(ch),
                parent_half: q(ph),
            })
            .collect();
            Ok(QubitLayout {
                inputs,
                edges,
                target: tree.root().clone(),
            })
        }
    }
}

/// Parties ordered deepest level first, BFS order within a level.
pub fn deepest_first(tree: &RootedTree) -> Vec<&PartyId> {
    let bfs = tree.bfs_order();
    let h = tree.profile().height;
    let mut out = Vec::with_capacity(bfs.len());
    for d in (0..=h).rev() {
        out.extend(bfs.iter().copied().filter(|p| tree.depth(p) == Some(d)));
    }
    out
}

fn canonical_layout(tree: &RootedTree) -> QubitLayout {
    let mut next = 1u32;
    let mut take = || {
        let v = QubitId(next);
        next += 1;
        v
    };
    let mut inputs = BTreeMap::new();
    let mut parent_half: BTreeMap<PartyId, QubitId> = BTreeMap::new();
    let mut child_half: BTreeMap<PartyId, QubitId> = BTreeMap::new();
    for p in deepest_first(tree) {
        for c in tree.children(p) {
            parent_half.insert(c.clone(), take());
        }
        inputs.insert(p.clone(), take());
        if tree.parent(p).is_some() {
            child_half.insert(p.clone(), take());
        }
    }
    let edges = tree
        .edges()
        .into_iter()
        .map(|(c, p)| EdgeQubits {
            child: c.clone(),
            parent: p.clone(),
            child_half: child_half[c],
            parent_half: parent_half[c],
        })
        .collect();
    QubitLayout {
        inputs,
        edges,
        target: tree.root().clone(),
    }
}

/// Graphviz rendering: root highlighted, edges directed away from the root,
/// one depth annotation per node.
pub fn export_dot(tree: &RootedTree, profile: &TreeProfile) -> String {
    let mut out = String::from("digraph rooted_tree {\n  rankdir=TB;\n");
    for p in tree.bfs_order() {
        let d = profile.depths.get(p).copied().unwrap_or(0);
        if p == tree.root() {
            let _ = writeln!(
                out,
                "  \"{p}\" [label=\"{p}\\nd={d}\", shape=doublecircle, style=filled, fillcolor=lightgray, root=true];"
            );
        } else {
            let _ = writeln!(out, "  \"{p}\" [label=\"{p}\\nd={d}\", shape=circle];");
        }
    }
    for p in tree.bfs_order() {
        for c in tree.children(p) {
            let _ = writeln!(out, "  \"{p}\" -> \"{c}\";");
        }
    }
    out.push_str("}\n");
    out
}
