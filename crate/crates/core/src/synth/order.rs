use std::collections::{BTreeMap, BTreeSet};

use super::hcl::{ResourceGraph, ResourceGroup, ResourceKey, TfResource};
use super::SynthError;

fn find_cycle(edges: &BTreeMap<ResourceKey, BTreeSet<ResourceKey>>) -> Option<Vec<ResourceKey>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }

    fn visit(
        node: &ResourceKey,
        edges: &BTreeMap<ResourceKey, BTreeSet<ResourceKey>>,
        marks: &mut BTreeMap<ResourceKey, Mark>,
        stack: &mut Vec<ResourceKey>,
    ) -> Option<Vec<ResourceKey>> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => {
                let start = stack.iter().position(|k| k == node).unwrap_or(0);
                let mut cycle = stack[start..].to_vec();
                cycle.push(node.clone());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(node.clone(), Mark::Active);
        stack.push(node.clone());
        for next in edges.get(node).into_iter().flatten() {
            if let Some(cycle) = visit(next, edges, marks, stack) {
                return Some(cycle);
            }
        }
        stack.pop();
        marks.insert(node.clone(), Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    let mut stack = Vec::new();
    edges.keys().find_map(|node| visit(node, edges, &mut marks, &mut stack))
}

/// Orders resources group by group; inside a group, dependencies come first
/// and ties go to the smallest `(type, name)`.
pub fn order_resources(graph: &ResourceGraph) -> Result<Vec<TfResource>, SynthError> {
    let edges = graph.edges()?;
    if let Some(cycle) = find_cycle(&edges) {
        let path: Vec<String> = cycle.iter().map(|(t, n)| format!("{t}.{n}")).collect();
        return Err(SynthError::CyclicDependency(path));
    }

    let mut by_group: BTreeMap<ResourceGroup, Vec<&TfResource>> = BTreeMap::new();
    for r in graph.iter() {
        by_group.entry(r.group).or_default().push(r);
    }

    let mut ordered = Vec::with_capacity(graph.len());
    for group in ResourceGroup::ALL {
        let Some(members) = by_group.get(&group) else { continue };
        let in_group: BTreeMap<ResourceKey, &TfResource> = members.iter().map(|r| (r.key(), *r)).collect();

        // Kahn's algorithm on intra-group edges; the ready set is ordered, so
        // the smallest key is always emitted first.
        let mut pending: BTreeMap<&ResourceKey, usize> = BTreeMap::new();
        let mut dependents: BTreeMap<&ResourceKey, Vec<&ResourceKey>> = BTreeMap::new();
        for key in in_group.keys() {
            let deps: Vec<&ResourceKey> = edges[key]
                .iter()
                .filter(|d| in_group.contains_key(*d) && *d != key)
                .collect();
            pending.insert(key, deps.len());
            for d in deps {
                dependents.entry(d).or_default().push(key);
            }
        }
        let mut ready: BTreeSet<&ResourceKey> = pending.iter().filter(|(_, &n)| n == 0).map(|(k, _)| *k).collect();
        while let Some(key) = ready.pop_first() {
            ordered.push(in_group[key].clone());
            for &dependent in dependents.get(key).into_iter().flatten() {
                let n = pending.get_mut(dependent).expect("dependent is in group");
                *n -= 1;
                if *n == 0 {
                    ready.insert(dependent);
                }
            }
        }
    }
    Ok(ordered)
}
