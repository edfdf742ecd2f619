use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("region file is not a JSON object of code -> [child codes]: {0}")]
    Json(#[from] serde_json::Error),
    #[error("region `{child}` has two parents (`{first}` and `{second}`)")]
    TwoParents {
        child: String,
        first: String,
        second: String,
    },
    #[error("region hierarchy contains a cycle through `{0}`")]
    Cycle(String),
}

/// Forest of region codes, e.g. `EU -> {AT, DE}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionHierarchy {
    parent: BTreeMap<String, String>,
    known: BTreeSet<String>,
}

impl RegionHierarchy {
    pub fn new(children: &BTreeMap<String, Vec<String>>) -> Result<Self, RegionError> {
        let mut h = RegionHierarchy::default();
        for (parent, kids) in children {
            h.known.insert(parent.clone());
            for kid in kids {
                h.known.insert(kid.clone());
                if let Some(prev) = h.parent.insert(kid.clone(), parent.clone()) {
                    if &prev != parent {
                        return Err(RegionError::TwoParents {
                            child: kid.clone(),
                            first: prev,
                            second: parent.clone(),
                        });
                    }
                }
            }
        }
        for start in h.known.iter() {
            let mut steps = 0;
            let mut cur = start;
            while let Some(p) = h.parent.get(cur) {
                steps += 1;
                if p == start || steps > h.known.len() {
                    return Err(RegionError::Cycle(start.clone()));
                }
                cur = p;
            }
        }
        Ok(h)
    }

    /// Parses `{"EU": ["AT", "DE"], ...}`.
    pub fn from_json(text: &str) -> Result<Self, RegionError> {
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        RegionHierarchy::new(&map)
    }

    pub fn is_known(&self, code: &str) -> bool {
        self.known.contains(code)
    }

    pub fn parent(&self, code: &str) -> Option<&str> {
        self.parent.get(code).map(String::as_str)
    }

    /// True iff `inner` is `outer` or lies below it. Unknown codes never match.
    pub fn contains(&self, outer: &str, inner: &str) -> bool {
        for code in [outer, inner] {
            if !self.is_known(code) {
                log::warn!("unknown region code `{code}`");
                return false;
            }
        }
        let mut cur = inner;
        loop {
            if cur == outer {
                return true;
            }
            match self.parent(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

pub fn region_contains(outer: &str, inner: &str, hierarchy: &RegionHierarchy) -> bool {
    hierarchy.contains(outer, inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn fixture() -> RegionHierarchy {
        RegionHierarchy::from_json(include_str!("../../fixtures/regions.json")).unwrap()
    }

    #[test]
    fn containment_examples() {
        let h = fixture();
        assert!(h.contains("EU", "AT"));
        assert!(h.contains("EU", "AT-9"));
        assert!(h.contains("AT", "AT"));
        assert!(!h.contains("AT", "EU"));
        assert!(!h.contains("US", "AT"));
        assert!(!h.contains("EU", "XX"));
        assert!(!h.contains("XX", "XX"));
    }

    #[test]
    fn rejects_non_forests() {
        let two = r#"{"EU": ["AT"], "DACH": ["AT"]}"#;
        assert!(matches!(RegionHierarchy::from_json(two), Err(RegionError::TwoParents { .. })));
        let cyc = r#"{"A": ["B"], "B": ["A"]}"#;
        assert!(matches!(RegionHierarchy::from_json(cyc), Err(RegionError::Cycle(_))));
        assert!(RegionHierarchy::from_json("[1]").is_err());
    }

    /// Breadth-first reachability over the child lists, independent of the parent walk.
    fn reachable(children: &BTreeMap<String, Vec<String>>, from: &str, to: &str) -> bool {
        let mut queue = VecDeque::from([from.to_string()]);
        let mut seen = BTreeSet::new();
        while let Some(cur) = queue.pop_front() {
            if cur == to {
                return true;
            }
            if seen.insert(cur.clone()) {
                if let Some(kids) = children.get(&cur) {
                    queue.extend(kids.iter().cloned());
                }
            }
        }
        false
    }

    proptest! {
        #[test]
        fn agrees_with_graph_search(parents in prop::collection::vec(prop::option::of(0usize..12), 12),
                                    queries in prop::collection::vec((0usize..12, 0usize..12), 20)) {
            // node i may only hang below a node with a smaller index, which keeps it a forest
            let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for (i, p) in parents.iter().enumerate() {
                let name = format!("R{i}");
                children.entry(name.clone()).or_default();
                if let Some(p) = p {
                    if *p < i {
                        children.entry(format!("R{p}")).or_default().push(name);
                    }
                }
            }
            let h = RegionHierarchy::new(&children).unwrap();
            for (a, b) in queries {
                let (a, b) = (format!("R{a}"), format!("R{b}"));
                prop_assert_eq!(h.contains(&a, &b), reachable(&children, &a, &b));
            }
        }
    }
}
