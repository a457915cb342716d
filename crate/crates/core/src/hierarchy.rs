//! Term hierarchies over a facet's values.
//!
//! A [`TermTree`] is a forest keyed by label: every node has at most one
//! parent and parent links never form a cycle. Operations are pure and return
//! a new tree.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    DataTerm,
    GroupTerm,
    IntervalTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermNode {
    pub parent: Option<String>,
    pub kind: TermKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("making {parent:?} the parent of {child:?} would form a cycle")]
    CycleWouldForm { child: String, parent: String },
    #[error("unknown child term {0:?}")]
    UnknownChild(String),
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("no term matches {0:?}")]
    NoMatch(String),
    #[error("empty label")]
    EmptyLabel,
    #[error("add-parent needs at least one child")]
    NoChildren,
    #[error("letter range {from}-{to} is empty or not made of letters")]
    InvalidRange { from: char, to: char },
    #[error("group label {0:?} collides with an existing data term")]
    LabelCollision(String),
    #[error("term {term:?} has conflicting parents {first:?} and {second:?}")]
    ConflictingParent { term: String, first: String, second: String },
    #[error("hierarchy contains a cycle through {0:?}")]
    Cycle(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermTree {
    nodes: BTreeMap<String, TermNode>,
}

impl TermTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tree from child -> parent edges. Labels in `data_values`
    /// become data terms, all others group terms.
    pub fn from_edges(edges: &BTreeMap<String, String>, data_values: &HashSet<&str>) -> Result<Self, HierarchyError> {
        let kind_of = |label: &str| if data_values.contains(label) { TermKind::DataTerm } else { TermKind::GroupTerm };
        let mut tree = TermTree::new();
        for (child, parent) in edges {
            if child.is_empty() || parent.is_empty() {
                return Err(HierarchyError::EmptyLabel);
            }
            tree.nodes.entry(parent.clone()).or_insert(TermNode { parent: None, kind: kind_of(parent) });
            tree.nodes
                .entry(child.clone())
                .or_insert(TermNode { parent: None, kind: kind_of(child) })
                .parent = Some(parent.clone());
        }
        tree.check()?;
        Ok(tree)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.nodes.contains_key(label)
    }

    pub fn get(&self, label: &str) -> Option<&TermNode> {
        self.nodes.get(label)
    }

    pub fn parent(&self, label: &str) -> Option<&str> {
        self.nodes.get(label).and_then(|n| n.parent.as_deref())
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&str, &TermNode)> {
        self.nodes.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `(child, parent)` pairs in label order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.nodes.iter().filter_map(|(k, v)| v.parent.as_deref().map(|p| (k.as_str(), p)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn children(&self, label: &str) -> Vec<&str> {
        self.edges().filter(|(_, p)| *p == label).map(|(c, _)| c).collect()
    }

    pub fn roots(&self) -> Vec<&str> {
        self.nodes.iter().filter(|(_, n)| n.parent.is_none()).map(|(k, _)| k.as_str()).collect()
    }

    /// Ancestors from the direct parent up to the root.
    pub fn ancestors(&self, label: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = label;
        while let Some(p) = self.parent(cur) {
            if out.len() > self.nodes.len() {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    }

    /// True when `label` lies strictly below `ancestor`.
    pub fn is_descendant(&self, label: &str, ancestor: &str) -> bool {
        self.ancestors(label).contains(&ancestor)
    }

    /// Verifies acyclicity by walking every node to its root.
    pub fn check(&self) -> Result<(), HierarchyError> {
        for label in self.nodes.keys() {
            let mut steps = 0;
            let mut cur = label.as_str();
            while let Some(p) = self.parent(cur) {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(HierarchyError::Cycle(label.clone()));
                }
                cur = p;
            }
        }
        Ok(())
    }

    pub(crate) fn insert(&mut self, label: String, node: TermNode) {
        self.nodes.insert(label, node);
    }

    fn register(&mut self, label: &str, facet_values: &BTreeSet<String>) -> bool {
        if self.nodes.contains_key(label) {
            return true;
        }
        if facet_values.contains(label) {
            self.nodes.insert(label.to_string(), TermNode { parent: None, kind: TermKind::DataTerm });
            return true;
        }
        false
    }

    /// Makes `parent` the parent of every child. Children that are facet
    /// values but not yet in the tree are registered as data terms; a new
    /// parent becomes a group term unless it is itself a facet value.
    pub fn add_parent(&self, children: &[String], parent: &str, facet_values: &BTreeSet<String>) -> Result<TermTree, HierarchyError> {
        if parent.is_empty() {
            return Err(HierarchyError::EmptyLabel);
        }
        if children.is_empty() {
            return Err(HierarchyError::NoChildren);
        }
        let mut tree = self.clone();
        for child in children {
            if !tree.register(child, facet_values) {
                return Err(HierarchyError::UnknownChild(child.clone()));
            }
        }
        if !tree.register(parent, facet_values) {
            tree.nodes.insert(parent.to_string(), TermNode { parent: None, kind: TermKind::GroupTerm });
        }
        for child in children {
            if child == parent || tree.is_descendant(parent, child) {
                return Err(HierarchyError::CycleWouldForm { child: child.clone(), parent: parent.to_string() });
            }
            tree.nodes.get_mut(child.as_str()).expect("registered").parent = Some(parent.to_string());
        }
        Ok(tree)
    }

    /// Re-parents `term`; `None` makes it a root.
    pub fn move_term(&self, term: &str, new_parent: Option<&str>, facet_values: &BTreeSet<String>) -> Result<TermTree, HierarchyError> {
        let mut tree = self.clone();
        if !tree.register(term, facet_values) {
            return Err(HierarchyError::UnknownTerm(term.to_string()));
        }
        if let Some(p) = new_parent {
            if !tree.register(p, facet_values) {
                return Err(HierarchyError::UnknownTerm(p.to_string()));
            }
            if p == term || tree.is_descendant(p, term) {
                return Err(HierarchyError::CycleWouldForm { child: term.to_string(), parent: p.to_string() });
            }
        }
        tree.nodes.get_mut(term).expect("registered").parent = new_parent.map(str::to_string);
        Ok(tree)
    }

    /// Candidate data terms: facet values plus data terms already present.
    fn data_terms<'a>(&'a self, facet_values: &'a BTreeSet<String>) -> BTreeSet<&'a str> {
        let mut out: BTreeSet<&str> = facet_values.iter().map(String::as_str).collect();
        out.extend(self.nodes.iter().filter(|(_, n)| n.kind == TermKind::DataTerm).map(|(k, _)| k.as_str()));
        out
    }

    fn group_matching(&self, facet_values: &BTreeSet<String>, group: &str, matches: impl Fn(&str) -> bool) -> Result<TermTree, HierarchyError> {
        let matched: Vec<String> =
            self.data_terms(facet_values).into_iter().filter(|t| matches(t)).map(str::to_string).collect();
        if matched.is_empty() {
            return Err(HierarchyError::NoMatch(group.to_string()));
        }
        match self.nodes.get(group) {
            Some(node) if node.kind == TermKind::DataTerm => {
                return Err(HierarchyError::LabelCollision(group.to_string()))
            }
            None if facet_values.contains(group) => return Err(HierarchyError::LabelCollision(group.to_string())),
            _ => {}
        }
        let mut tree = self.clone();
        tree.nodes.entry(group.to_string()).or_insert(TermNode { parent: None, kind: TermKind::GroupTerm });
        for term in matched {
            tree.register(&term, facet_values);
            let node = tree.nodes.get_mut(term.as_str()).expect("registered");
            if node.parent.is_none() {
                node.parent = Some(group.to_string());
            }
        }
        tree.check()?;
        Ok(tree)
    }

    /// Gathers every parentless data term starting with `prefix` under a
    /// group term labeled `prefix`.
    pub fn group_by_prefix(&self, facet_values: &BTreeSet<String>, prefix: &str) -> Result<TermTree, HierarchyError> {
        if prefix.is_empty() {
            return Err(HierarchyError::EmptyLabel);
        }
        self.group_matching(facet_values, prefix, |t| t.starts_with(prefix))
    }

    /// Gathers parentless data terms whose case-folded first letter lies in
    /// `from..=to` under a group labeled `FROM-TO`.
    pub fn group_by_letter_range(&self, facet_values: &BTreeSet<String>, from: char, to: char) -> Result<TermTree, HierarchyError> {
        let (lo, hi) = (fold(from), fold(to));
        if !from.is_alphabetic() || !to.is_alphabetic() || lo > hi {
            return Err(HierarchyError::InvalidRange { from, to });
        }
        let label = format!("{}-{}", from.to_uppercase(), to.to_uppercase());
        self.group_matching(facet_values, &label, |t| {
            t.chars().next().is_some_and(|c| c.is_alphabetic() && (lo..=hi).contains(&fold(c)))
        })
    }

    /// Renames a node and repoints its children. No-op when `old` is absent
    /// or `new` is already taken.
    pub fn rename(&mut self, old: &str, new: &str) -> bool {
        if old == new || !self.nodes.contains_key(old) || self.nodes.contains_key(new) {
            return false;
        }
        let node = self.nodes.remove(old).expect("present");
        self.nodes.insert(new.to_string(), node);
        for n in self.nodes.values_mut() {
            if n.parent.as_deref() == Some(old) {
                n.parent = Some(new.to_string());
            }
        }
        true
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn add_parent_creates_path() {
        let vals = values(&["Chania", "Heraklion"]);
        let t = TermTree::new().add_parent(&s(&["Chania"]), "Crete", &vals).unwrap();
        assert_eq!(t.parent("Chania"), Some("Crete"));
        assert_eq!(t.get("Crete").unwrap().kind, TermKind::GroupTerm);
        assert_eq!(t.get("Chania").unwrap().kind, TermKind::DataTerm);
    }

    #[test]
    fn add_parent_rejects_self_and_unknown() {
        let vals = values(&["x"]);
        assert_eq!(
            TermTree::new().add_parent(&s(&["x"]), "x", &vals),
            Err(HierarchyError::CycleWouldForm { child: "x".into(), parent: "x".into() })
        );
        assert_eq!(TermTree::new().add_parent(&s(&["y"]), "P", &vals), Err(HierarchyError::UnknownChild("y".into())));
    }

    #[test]
    fn nested_parents_reach_root() {
        let vals = values(&["Chania", "Heraklion"]);
        let t = TermTree::new()
            .add_parent(&s(&["Chania", "Heraklion"]), "Crete", &vals)
            .unwrap()
            .add_parent(&s(&["Crete"]), "Greece", &vals)
            .unwrap();
        assert_eq!(t.ancestors("Chania"), vec!["Crete", "Greece"]);
        assert_eq!(t.ancestors("Heraklion"), vec!["Crete", "Greece"]);
        assert_eq!(t.roots(), vec!["Greece"]);
    }

    #[test]
    fn move_term_cases() {
        let vals = values(&["Chania"]);
        let t = TermTree::new()
            .add_parent(&s(&["Chania"]), "Crete", &vals)
            .unwrap()
            .add_parent(&s(&["Crete"]), "Greece", &vals)
            .unwrap();
        let moved = t.move_term("Chania", Some("Greece"), &vals).unwrap();
        assert_eq!(moved.parent("Chania"), Some("Greece"));
        assert_eq!(t.move_term("Greece", None, &vals).unwrap(), t);
        assert!(matches!(t.move_term("Crete", Some("Chania"), &vals), Err(HierarchyError::CycleWouldForm { .. })));
        assert_eq!(t.move_term("Nowhere", None, &vals), Err(HierarchyError::UnknownTerm("Nowhere".into())));
    }

    #[test]
    fn prefix_grouping() {
        let vals = values(&["Heraklion Port", "Heraklion Airport", "Chania"]);
        let t = TermTree::new().group_by_prefix(&vals, "Heraklion").unwrap();
        let mut kids = t.children("Heraklion");
        kids.sort();
        assert_eq!(kids, vec!["Heraklion Airport", "Heraklion Port"]);
        assert!(t.get("Chania").is_none());
        assert_eq!(t.group_by_prefix(&vals, "Heraklion").unwrap(), t);
        assert_eq!(TermTree::new().group_by_prefix(&vals, "Z"), Err(HierarchyError::NoMatch("Z".into())));
    }

    #[test]
    fn prefix_equal_to_a_value_collides() {
        let vals = values(&["Heraklion", "Heraklion Port", "Chania"]);
        assert_eq!(
            TermTree::new().group_by_prefix(&vals, "Heraklion"),
            Err(HierarchyError::LabelCollision("Heraklion".into()))
        );
    }

    #[test]
    fn grouping_skips_terms_with_parents() {
        let vals = values(&["Hania", "Heraklion"]);
        let t = TermTree::new().add_parent(&s(&["Heraklion"]), "Crete", &vals).unwrap();
        let g = t.group_by_prefix(&vals, "H").unwrap();
        assert_eq!(g.parent("Heraklion"), Some("Crete"));
        assert_eq!(g.parent("Hania"), Some("H"));
    }

    #[test]
    fn letter_ranges() {
        let vals = values(&["Athens", "Chania", "Xanthi", "4 Seasons", "ancient"]);
        let t = TermTree::new().group_by_letter_range(&vals, 'a', 'c').unwrap();
        let mut kids = t.children("A-C");
        kids.sort();
        assert_eq!(kids, vec!["Athens", "Chania", "ancient"]);
        assert!(t.get("4 Seasons").is_none());
        let single = TermTree::new().group_by_letter_range(&values(&["Athens"]), 'A', 'A').unwrap();
        assert_eq!(single.children("A-A"), vec!["Athens"]);
        assert!(matches!(TermTree::new().group_by_letter_range(&vals, 'D', 'B'), Err(HierarchyError::InvalidRange { .. })));
        assert_eq!(
            TermTree::new().group_by_letter_range(&values(&["4 Seasons"]), 'A', 'Z'),
            Err(HierarchyError::NoMatch("A-Z".into()))
        );
    }

    #[test]
    fn from_edges_detects_cycles() {
        let edges: BTreeMap<String, String> =
            [("a".to_string(), "b".to_string()), ("b".to_string(), "a".to_string())].into_iter().collect();
        assert!(matches!(TermTree::from_edges(&edges, &HashSet::new()), Err(HierarchyError::Cycle(_))));
    }

    #[test]
    fn rename_repoints_children() {
        let vals = values(&["Iraklio"]);
        let mut t = TermTree::new().add_parent(&s(&["Iraklio"]), "Crete", &vals).unwrap();
        assert!(t.rename("Iraklio", "Heraklion"));
        assert_eq!(t.parent("Heraklion"), Some("Crete"));
        assert!(t.rename("Crete", "Kriti"));
        assert_eq!(t.parent("Heraklion"), Some("Kriti"));
    }
}
