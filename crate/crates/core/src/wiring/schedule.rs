use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Violation, ViolationCode};
use crate::model::Project;

/// Level-by-level execution order. A node's level is the length of the
/// longest edge path reaching it; ids within a level are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: Vec<Vec<String>>,
}

impl Schedule {
    pub fn level_of(&self, node: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.iter().any(|n| n == node))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.levels.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn schedule(project: &Project) -> Result<Schedule, Violation> {
    let index: BTreeMap<&str, usize> = project
        .nodes
        .keys()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = index.len();
    let mut successors = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (i, edge) in project.edges.iter().enumerate() {
        let (Some(&s), Some(&d)) = (index.get(edge.src.node.as_str()), index.get(edge.dst.node.as_str())) else {
            return Err(Violation::new(
                ViolationCode::DanglingRef,
                format!("edges[{i}]"),
                format!("{edge} references a missing node"),
            ));
        };
        successors[s].push(d);
        indegree[d] += 1;
    }

    let mut level = vec![0usize; n];
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(i) = ready.pop() {
        visited += 1;
        for &j in &successors[i] {
            level[j] = level[j].max(level[i] + 1);
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    if visited < n {
        let stuck: Vec<&str> = index
            .iter()
            .filter(|(_, &i)| indegree[i] > 0)
            .map(|(id, _)| *id)
            .collect();
        return Err(Violation::new(
            ViolationCode::Cycle,
            "edges",
            format!("cycle through {}", stuck.join(", ")),
        ));
    }

    let depth = level.iter().max().map_or(0, |m| m + 1);
    let mut levels = vec![Vec::new(); depth];
    // index iterates ids in ascending order, so each level comes out sorted
    for (id, &i) in &index {
        levels[level[i]].push(id.to_string());
    }
    Ok(Schedule { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeSpec;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Project {
        let mut p = Project::default();
        for n in nodes {
            p = p.with_node(*n, NodeSpec::new("a.b".parse().unwrap(), Default::default()));
        }
        for (s, d) in edges {
            p = p.with_edge(&format!("{s}.y"), &format!("{d}.x"));
        }
        p
    }

    fn levels(p: &Project) -> Vec<Vec<String>> {
        schedule(p).unwrap().levels
    }

    #[test]
    fn chain() {
        let p = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert_eq!(levels(&p), [vec!["A"], vec!["B"], vec!["C"]]);
    }

    #[test]
    fn diamond() {
        let p = graph(&["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]);
        assert_eq!(levels(&p), [vec!["A"], vec!["B", "C"], vec!["D"]]);
    }

    #[test]
    fn longest_path_wins() {
        let p = graph(&["A", "B", "C"], &[("A", "C"), ("A", "B"), ("B", "C")]);
        assert_eq!(levels(&p), [vec!["A"], vec!["B"], vec!["C"]]);
    }

    #[test]
    fn cycle_rejected() {
        let p = graph(&["A", "B"], &[("A", "B"), ("B", "A")]);
        assert_eq!(schedule(&p).unwrap_err().code, ViolationCode::Cycle);
    }

    #[test]
    fn empty_project() {
        assert!(schedule(&Project::default()).unwrap().is_empty());
    }
}
