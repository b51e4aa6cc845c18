use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::spec::{GameSpec, Statement, StatementId, StmtKind, Trigger};

/// How a statement depends on its control parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Hat of a start or every-tick script; no parent.
    Entry,
    /// Hat of an input handler; depends on the program having started.
    Event,
    /// Runs whenever its enclosing script runs.
    Sequence,
    /// Runs when the parent predicate is true.
    Then,
    /// Runs when the parent predicate is false.
    Else,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdgNode {
    pub parent: Option<StatementId>,
    pub edge: EdgeKind,
    pub children: Vec<StatementId>,
}

/// Statement-level control dependence graph. Every statement is a node;
/// roots are the hats of scripts that run without player input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDependenceGraph {
    nodes: BTreeMap<StatementId, CdgNode>,
    roots: Vec<StatementId>,
    entry: BTreeSet<StatementId>,
}

impl ControlDependenceGraph {
    pub fn build(spec: &GameSpec) -> Self {
        let mut nodes = BTreeMap::new();
        let mut roots = Vec::new();
        let mut entry = BTreeSet::new();

        let program_start = spec
            .scripts
            .iter()
            .find(|s| s.trigger == Trigger::Start)
            .or_else(|| spec.scripts.iter().find(|s| s.trigger.is_entry()))
            .map(|s| s.hat);

        for script in &spec.scripts {
            let (parent, edge) = if script.trigger.is_entry() {
                roots.push(script.hat);
                entry.insert(script.hat);
                (None, EdgeKind::Entry)
            } else {
                (program_start, EdgeKind::Event)
            };
            nodes.insert(
                script.hat,
                CdgNode {
                    parent,
                    edge,
                    children: Vec::new(),
                },
            );
            add_block(&mut nodes, script.hat, EdgeKind::Sequence, &script.body);
            if script.trigger == Trigger::Start {
                // The start script's straight-line body runs during loading.
                entry.extend(script.body.iter().map(|s| s.id));
            }
        }
        for script in spec.scripts.iter().filter(|s| !s.trigger.is_entry()) {
            if let Some(p) = program_start {
                add_child(&mut nodes, p, script.hat);
            }
        }
        for node in nodes.values_mut() {
            node.children.sort();
        }
        roots.sort();
        ControlDependenceGraph { nodes, roots, entry }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: StatementId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn roots(&self) -> &[StatementId] {
        &self.roots
    }

    /// Statements that every execution covers once the game is loaded.
    pub fn entry_statements(&self) -> &BTreeSet<StatementId> {
        &self.entry
    }

    pub fn node(&self, id: StatementId) -> Option<&CdgNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (StatementId, &CdgNode)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn parent(&self, id: StatementId) -> Option<StatementId> {
        self.nodes.get(&id).and_then(|n| n.parent)
    }

    pub fn children(&self, id: StatementId) -> &[StatementId] {
        self.nodes.get(&id).map(|n| n.children.as_slice()).unwrap_or(&[])
    }

    /// `(parent, child)` pairs.
    pub fn edges(&self) -> Vec<(StatementId, StatementId)> {
        self.nodes
            .iter()
            .filter_map(|(id, n)| n.parent.map(|p| (p, *id)))
            .collect()
    }

    /// Path from `id` up to its root, starting with `id` itself.
    pub fn ancestry(&self, id: StatementId) -> Vec<StatementId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }
}

fn add_child(nodes: &mut BTreeMap<StatementId, CdgNode>, parent: StatementId, child: StatementId) {
    if let Some(p) = nodes.get_mut(&parent) {
        p.children.push(child);
    }
}

fn add_block(
    nodes: &mut BTreeMap<StatementId, CdgNode>,
    parent: StatementId,
    edge: EdgeKind,
    block: &[Statement],
) {
    for s in block {
        nodes.insert(
            s.id,
            CdgNode {
                parent: Some(parent),
                edge,
                children: Vec::new(),
            },
        );
        add_child(nodes, parent, s.id);
        match &s.kind {
            StmtKind::If { then, .. } => add_block(nodes, s.id, EdgeKind::Then, then),
            StmtKind::IfElse { then, otherwise, .. } => {
                add_block(nodes, s.id, EdgeKind::Then, then);
                add_block(nodes, s.id, EdgeKind::Else, otherwise);
            }
            _ => {}
        }
    }
}
