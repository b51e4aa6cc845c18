//! NEAT genomes with a classification head per action and a regression head
//! per action parameter, plus a compiled feed-forward evaluator.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionKind, ActionLabel, ActionSchema};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub type NodeId = u64;
pub type Innovation = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Input(usize),
    Bias,
    Hidden,
    ClassOutput(ActionKind),
    RegOutput { action: ActionKind, param: usize },
}

impl NodeKind {
    pub fn is_output(self) -> bool {
        matches!(self, NodeKind::ClassOutput(_) | NodeKind::RegOutput { .. })
    }

    pub fn is_source(self) -> bool {
        matches!(self, NodeKind::Input(_) | NodeKind::Bias)
    }

    pub fn activation(self) -> Activation {
        match self {
            NodeKind::Hidden | NodeKind::RegOutput { .. } => Activation::Tanh,
            _ => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    pub enabled: bool,
    pub innovation: Innovation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    /// Sorted by innovation number.
    pub connections: Vec<ConnectionGene>,
    pub fitness: Option<f64>,
    pub species: Option<usize>,
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Softmax over the class heads, in action-schema order.
    pub action_probs: Vec<f64>,
    /// Regression outputs per action, each in `[-1, 1]`.
    pub params: Vec<Vec<f64>>,
}

/// Hands out innovation numbers and split-node ids so that the same
/// structural change always gets the same numbers within one search.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InnovationTracker {
    connections: HashMap<(NodeId, NodeId), Innovation>,
    splits: HashMap<Innovation, NodeId>,
    next_innovation: Innovation,
    next_node: NodeId,
}

impl InnovationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn connection(&mut self, from: NodeId, to: NodeId) -> Innovation {
        let next = &mut self.next_innovation;
        *self.connections.entry((from, to)).or_insert_with(|| {
            let i = *next;
            *next += 1;
            i
        })
    }

    /// Node id for splitting connection `innovation`.
    pub fn split(&mut self, innovation: Innovation) -> NodeId {
        let next = &mut self.next_node;
        *self.splits.entry(innovation).or_insert_with(|| {
            let i = *next;
            *next += 1;
            i
        })
    }

    pub fn fresh_node(&mut self) -> NodeId {
        let id = self.next_node;
        self.next_node += 1;
        id
    }

    fn reserve_nodes(&mut self, upto: NodeId) {
        self.next_node = self.next_node.max(upto);
    }
}

impl Genome {
    /// Inputs and bias fully connected to every output head, weights drawn
    /// uniformly from `[-1, 1]`.
    pub fn minimal<R: Rng>(
        inputs: usize,
        actions: &ActionSchema,
        tracker: &mut InnovationTracker,
        rng: &mut R,
    ) -> Genome {
        let mut nodes: Vec<NodeGene> = (0..inputs)
            .map(|i| NodeGene {
                id: i as NodeId,
                kind: NodeKind::Input(i),
            })
            .collect();
        nodes.push(NodeGene {
            id: inputs as NodeId,
            kind: NodeKind::Bias,
        });
        let mut next = inputs as NodeId + 1;
        for &a in &actions.actions {
            nodes.push(NodeGene {
                id: next,
                kind: NodeKind::ClassOutput(a),
            });
            next += 1;
        }
        for &a in &actions.actions {
            for p in 0..a.param_count() {
                nodes.push(NodeGene {
                    id: next,
                    kind: NodeKind::RegOutput { action: a, param: p },
                });
                next += 1;
            }
        }
        tracker.reserve_nodes(next);
        let mut connections = Vec::new();
        for src in nodes.iter().filter(|n| n.kind.is_source()) {
            for dst in nodes.iter().filter(|n| n.kind.is_output()) {
                connections.push(ConnectionGene {
                    from: src.id,
                    to: dst.id,
                    weight: rng.gen_range(-1.0..=1.0),
                    enabled: true,
                    innovation: tracker.connection(src.id, dst.id),
                });
            }
        }
        connections.sort_by_key(|c| c.innovation);
        Genome {
            nodes,
            connections,
            fitness: None,
            species: None,
        }
    }

    pub fn input_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Input(_)))
            .count()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.connections.iter().map(|c| c.weight).collect()
    }

    pub fn set_weights(&mut self, w: &[f64]) {
        for (c, &w) in self.connections.iter_mut().zip(w) {
            c.weight = w;
        }
    }

    pub fn scale_weights(&mut self, k: f64) {
        for c in &mut self.connections {
            c.weight *= k;
        }
    }

    /// The same nodes and connections, ignoring weights, fitness, species.
    pub fn same_structure(&self, other: &Genome) -> bool {
        self.nodes == other.nodes
            && self.connections.len() == other.connections.len()
            && self
                .connections
                .iter()
                .zip(&other.connections)
                .all(|(a, b)| (a.from, a.to, a.enabled, a.innovation) == (b.from, b.to, b.enabled, b.innovation))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome serializes")
    }

    pub fn from_json(text: &str) -> Result<Genome> {
        let g: Genome = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    /// Checks id uniqueness, connection endpoints, sink outputs and
    /// acyclicity.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(Error::Config(format!("duplicate node id {}", n.id)));
            }
        }
        let mut innovations = HashSet::new();
        for c in &self.connections {
            let (Some(a), Some(b)) = (self.node(c.from), self.node(c.to)) else {
                return Err(Error::Config(format!("connection {} has an unknown endpoint", c.innovation)));
            };
            if a.kind.is_output() || b.kind.is_source() {
                return Err(Error::Config(format!("connection {} has an invalid direction", c.innovation)));
            }
            if !innovations.insert(c.innovation) {
                return Err(Error::Config(format!("duplicate innovation {}", c.innovation)));
            }
        }
        Network::compile(self).map(|_| ())
    }

    /// True if an enabled path leads from `from` to `to`.
    fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.connections.iter().filter(|c| c.from == n).map(|c| c.to));
            }
        }
        false
    }

    /// Splits a random enabled connection with a new hidden node. Returns
    /// false if no connection could be split.
    pub fn mutate_add_node<R: Rng>(&mut self, tracker: &mut InnovationTracker, rng: &mut R) -> bool {
        let enabled: Vec<usize> = (0..self.connections.len())
            .filter(|&i| self.connections[i].enabled)
            .collect();
        if enabled.is_empty() {
            return false;
        }
        let ci = enabled[rng.gen_range(0..enabled.len())];
        let old = self.connections[ci].clone();
        let mut node = tracker.split(old.innovation);
        if self.node(node).is_some() {
            // Already split in this lineage; take a fresh id.
            node = tracker.fresh_node();
        }
        self.connections[ci].enabled = false;
        self.nodes.push(NodeGene {
            id: node,
            kind: NodeKind::Hidden,
        });
        self.push_connection(old.from, node, 1.0, tracker);
        self.push_connection(node, old.to, old.weight, tracker);
        true
    }

    /// Adds a feed-forward connection between two unconnected nodes.
    /// Returns false if no candidate was found.
    pub fn mutate_add_connection<R: Rng>(
        &mut self,
        tracker: &mut InnovationTracker,
        rng: &mut R,
        attempts: usize,
    ) -> bool {
        let sources: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| !n.kind.is_output())
            .map(|n| n.id)
            .collect();
        let sinks: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| !n.kind.is_source())
            .map(|n| n.id)
            .collect();
        for _ in 0..attempts {
            let from = sources[rng.gen_range(0..sources.len())];
            let to = sinks[rng.gen_range(0..sinks.len())];
            if from == to || self.connections.iter().any(|c| c.from == from && c.to == to) {
                continue;
            }
            if self.reaches(to, from) {
                continue;
            }
            let w = rng.gen_range(-1.0..=1.0);
            self.push_connection(from, to, w, tracker);
            return true;
        }
        false
    }

    fn push_connection(&mut self, from: NodeId, to: NodeId, weight: f64, tracker: &mut InnovationTracker) {
        let innovation = tracker.connection(from, to);
        let gene = ConnectionGene {
            from,
            to,
            weight,
            enabled: true,
            innovation,
        };
        let at = self.connections.partition_point(|c| c.innovation < innovation);
        self.connections.insert(at, gene);
    }

    /// Classic weight mutation: each weight is replaced by a fresh uniform
    /// draw with probability `replace`, otherwise perturbed by uniform noise
    /// of half-width `power` with probability `perturb`.
    pub fn perturb_weights<R: Rng>(&mut self, rng: &mut R, perturb: f64, replace: f64, power: f64) {
        for c in &mut self.connections {
            let u: f64 = rng.gen();
            if u < replace {
                c.weight = rng.gen_range(-1.0..=1.0);
            } else if u < replace + perturb {
                c.weight += rng.gen_range(-power..=power);
            }
        }
    }
}

/// Compiled evaluation order for a genome's enabled DAG. Weights are
/// supplied per call so training can reuse one compiled network.
#[derive(Debug, Clone)]
pub struct Network {
    /// Node index → activation.
    activations: Vec<Activation>,
    hidden: Vec<bool>,
    input_nodes: Vec<usize>,
    bias_node: Option<usize>,
    /// Non-source nodes in topological order.
    order: Vec<usize>,
    /// Per node: (source node index, connection index).
    incoming: Vec<Vec<(usize, usize)>>,
    /// Class head node index per action, in action order.
    class_heads: Vec<usize>,
    /// Regression head node indices per action.
    reg_heads: Vec<Vec<usize>>,
    actions: Vec<ActionKind>,
}

impl Network {
    pub fn compile(genome: &Genome) -> Result<Network> {
        let n = genome.nodes.len();
        let index: HashMap<NodeId, usize> = genome.nodes.iter().enumerate().map(|(i, g)| (g.id, i)).collect();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for (ci, c) in genome.connections.iter().enumerate() {
            if !c.enabled {
                continue;
            }
            let (Some(&a), Some(&b)) = (index.get(&c.from), index.get(&c.to)) else {
                return Err(Error::Config(format!("connection {} has an unknown endpoint", c.innovation)));
            };
            incoming[b].push((a, ci));
            outgoing[a].push(b);
            indegree[b] += 1;
        }

        // Kahn's algorithm; ties resolved by node order for determinism.
        let mut ready: std::collections::VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            topo.push(i);
            for &j in &outgoing[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push_back(j);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::Cycle);
        }

        let mut input_nodes = vec![usize::MAX; genome.input_count()];
        let mut bias_node = None;
        let mut class: Vec<(ActionKind, usize)> = Vec::new();
        let mut reg: Vec<(ActionKind, usize, usize)> = Vec::new();
        for (i, g) in genome.nodes.iter().enumerate() {
            match g.kind {
                NodeKind::Input(slot) => {
                    if slot >= input_nodes.len() {
                        return Err(Error::Config(format!("input slot {slot} out of range")));
                    }
                    input_nodes[slot] = i;
                }
                NodeKind::Bias => bias_node = Some(i),
                NodeKind::ClassOutput(a) => class.push((a, i)),
                NodeKind::RegOutput { action, param } => reg.push((action, param, i)),
                NodeKind::Hidden => {}
            }
        }
        if class.is_empty() {
            return Err(Error::Config("genome has no class outputs".into()));
        }
        let actions: Vec<ActionKind> = class.iter().map(|c| c.0).collect();
        let class_heads = class.iter().map(|c| c.1).collect();
        let mut reg_heads = vec![Vec::new(); actions.len()];
        reg.sort_by_key(|r| r.1);
        for (a, _, i) in reg {
            if let Some(k) = actions.iter().position(|&x| x == a) {
                reg_heads[k].push(i);
            }
        }
        let order = topo
            .into_iter()
            .filter(|&i| !genome.nodes[i].kind.is_source())
            .collect();
        Ok(Network {
            activations: genome.nodes.iter().map(|g| g.kind.activation()).collect(),
            hidden: genome.nodes.iter().map(|g| g.kind == NodeKind::Hidden).collect(),
            input_nodes,
            bias_node,
            order,
            incoming,
            class_heads,
            reg_heads,
            actions,
        })
    }

    pub fn input_count(&self) -> usize {
        self.input_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.activations.len()
    }

    pub fn actions(&self) -> &[ActionKind] {
        &self.actions
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn incoming(&self, node: usize) -> &[(usize, usize)] {
        &self.incoming[node]
    }

    pub(crate) fn is_hidden(&self, node: usize) -> bool {
        self.hidden[node]
    }

    pub(crate) fn class_heads(&self) -> &[usize] {
        &self.class_heads
    }

    pub(crate) fn reg_heads(&self) -> &[Vec<usize>] {
        &self.reg_heads
    }

    /// Fills `values` with every node's activation.
    pub fn forward_into(&self, weights: &[f64], x: &[f64], values: &mut Vec<f64>) -> Result<()> {
        if x.len() != self.input_nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_nodes.len(),
                got: x.len(),
            });
        }
        values.clear();
        values.resize(self.activations.len(), 0.0);
        for (&node, &v) in self.input_nodes.iter().zip(x) {
            values[node] = v;
        }
        if let Some(b) = self.bias_node {
            values[b] = 1.0;
        }
        for &node in &self.order {
            let z: f64 = self.incoming[node].iter().map(|&(src, ci)| values[src] * weights[ci]).sum();
            values[node] = match self.activations[node] {
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            };
        }
        Ok(())
    }

    pub fn predict(&self, weights: &[f64], x: &[f64], scratch: &mut Vec<f64>) -> Result<Prediction> {
        self.forward_into(weights, x, scratch)?;
        Ok(self.prediction(scratch))
    }

    pub(crate) fn prediction(&self, values: &[f64]) -> Prediction {
        let logits: Vec<f64> = self.class_heads.iter().map(|&i| values[i]).collect();
        Prediction {
            action_probs: softmax(&logits),
            params: self
                .reg_heads
                .iter()
                .map(|heads| heads.iter().map(|&i| values[i]).collect())
                .collect(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One forward pass. Compiles the genome each call; use [`Network`] in loops.
pub fn activate(genome: &Genome, x: &FeatureVector) -> Result<Prediction> {
    let net = Network::compile(genome)?;
    let mut scratch = Vec::new();
    net.predict(&genome.weights(), x.as_slice(), &mut scratch)
}

/// Picks the most probable action and denormalises its parameters.
pub fn decode_action(pred: &Prediction, schema: &ActionSchema) -> ActionLabel {
    let k = argmax(&pred.action_probs);
    let kind = schema.actions[k];
    schema.denormalize(kind, pred.params.get(k).map(Vec::as_slice).unwrap_or(&[]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Game, Key};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schema(actions: Vec<ActionKind>) -> ActionSchema {
        ActionSchema::new(actions, 30, 60)
    }

    fn mouse_noop() -> ActionSchema {
        schema(vec![ActionKind::MouseMove, ActionKind::NoOp])
    }

    fn random_genome(seed: u64, inputs: usize, mutations: usize) -> (Genome, InnovationTracker) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = InnovationTracker::new();
        let mut g = Genome::minimal(inputs, &mouse_noop(), &mut t, &mut rng);
        for _ in 0..mutations {
            if rng.gen_bool(0.5) {
                g.mutate_add_node(&mut t, &mut rng);
            } else {
                g.mutate_add_connection(&mut t, &mut rng, 20);
            }
        }
        (g, t)
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let (mut g, _) = random_genome(1, 4, 6);
        g.scale_weights(0.0);
        let p = activate(&g, &FeatureVector(vec![0.3, -0.2, 1.0, 0.5])).unwrap();
        assert_eq!(p.action_probs, vec![0.5, 0.5]);
    }

    #[test]
    fn single_connection_matches_closed_form() {
        let mut t = InnovationTracker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = schema(vec![ActionKind::KeyPress(Key::Left), ActionKind::KeyPress(Key::Right)]);
        let mut g = Genome::minimal(1, &s, &mut t, &mut rng);
        let w = 0.7;
        // Keep only input 0 → class head of the first action.
        for c in &mut g.connections {
            let to = g.nodes.iter().find(|n| n.id == c.to).unwrap().kind;
            let keep = c.from == 0 && to == NodeKind::ClassOutput(ActionKind::KeyPress(Key::Left));
            c.enabled = keep;
            if keep {
                c.weight = w;
            }
        }
        let p = activate(&g, &FeatureVector(vec![1.0])).unwrap();
        let e = w.exp();
        assert!((p.action_probs[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.action_probs[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn activation_is_pure() {
        let (g, _) = random_genome(2, 3, 10);
        let x = FeatureVector(vec![0.1, 0.2, -0.9]);
        assert_eq!(activate(&g, &x).unwrap(), activate(&g, &x).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (g, _) = random_genome(3, 3, 0);
        assert!(matches!(
            activate(&g, &FeatureVector(vec![0.0; 2])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn cycle_is_detected() {
        let (mut g, mut t) = random_genome(4, 2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        g.mutate_add_node(&mut t, &mut rng);
        g.mutate_add_node(&mut t, &mut rng);
        let hidden: Vec<NodeId> = g.nodes.iter().filter(|n| n.kind == NodeKind::Hidden).map(|n| n.id).collect();
        let (a, b) = (hidden[0], hidden[1]);
        for (from, to) in [(a, b), (b, a)] {
            g.connections.push(ConnectionGene {
                from,
                to,
                weight: 1.0,
                enabled: true,
                innovation: t.connection(from, to),
            });
        }
        assert!(matches!(Network::compile(&g), Err(Error::Cycle)));
    }

    #[test]
    fn decode_breaks_ties_to_lowest_index() {
        let pred = Prediction {
            action_probs: vec![0.5, 0.5],
            params: vec![vec![0.0, 0.0], vec![0.0]],
        };
        assert!(matches!(decode_action(&pred, &mouse_noop()), ActionLabel::MouseMove { .. }));
    }

    #[test]
    fn decode_denormalizes_parameters() {
        let s = mouse_noop();
        let pred = Prediction {
            action_probs: vec![0.9, 0.1],
            params: vec![vec![1.0, -1.0], vec![0.0]],
        };
        assert_eq!(decode_action(&pred, &s), ActionLabel::MouseMove { x: 240.0, y: -180.0 });
        let pred = Prediction {
            action_probs: vec![0.1, 0.9],
            params: vec![vec![0.0, 0.0], vec![1.0]],
        };
        assert_eq!(decode_action(&pred, &s), ActionLabel::NoOp { duration: 60 });
    }

    #[test]
    fn add_node_splits_a_connection() {
        let (mut g, mut t) = random_genome(5, 3, 0);
        let before = g.connections.len();
        let enabled = g.connections.iter().filter(|c| c.enabled).count();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(g.mutate_add_node(&mut t, &mut rng));
        assert_eq!(g.connections.len(), before + 2);
        assert_eq!(g.connections.iter().filter(|c| c.enabled).count(), enabled + 1);
        g.validate().unwrap();
    }

    #[test]
    fn same_split_gets_same_innovations() {
        let (g, mut t) = random_genome(6, 3, 0);
        let (mut a, mut b) = (g.clone(), g);
        // Both split the same connection.
        let mut ra = ChaCha8Rng::seed_from_u64(1);
        let mut rb = ChaCha8Rng::seed_from_u64(1);
        a.mutate_add_node(&mut t, &mut ra);
        b.mutate_add_node(&mut t, &mut rb);
        assert_eq!(a, b);
        // Same (from, to) pair added independently.
        let mut c = a.clone();
        let mut rc = ChaCha8Rng::seed_from_u64(3);
        let mut rd = ChaCha8Rng::seed_from_u64(3);
        c.mutate_add_connection(&mut t, &mut rc, 50);
        b.mutate_add_connection(&mut t, &mut rd, 50);
        let last = |g: &Genome| g.connections.iter().map(|c| (c.from, c.to, c.innovation)).collect::<Vec<_>>();
        assert_eq!(last(&c), last(&b));
    }

    #[test]
    fn genome_json_round_trip() {
        let (g, _) = random_genome(7, 4, 8);
        let back = Genome::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn minimal_genome_for_game() {
        let game = Game::new(crate::engine::BuiltinGame::PaddleBall.spec()).unwrap();
        let s = ActionSchema::for_game(&game);
        let mut t = InnovationTracker::new();
        let g = Genome::minimal(5, &s, &mut t, &mut ChaCha8Rng::seed_from_u64(0));
        // 2 class heads, 2 + 1 regression heads, 6 sources.
        assert_eq!(g.connections.len(), 6 * 5);
        assert!(g.connections.iter().all(|c| (-1.0..=1.0).contains(&c.weight)));
    }

    proptest! {
        #[test]
        fn structure_stays_acyclic(seed in 0u64..10_000, n in 0usize..40) {
            let (g, _) = random_genome(seed, 3, n);
            prop_assert!(g.validate().is_ok());
        }

        #[test]
        fn probabilities_are_a_distribution(seed in 0u64..10_000, x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let (g, _) = random_genome(seed, 3, 12);
            let p = activate(&g, &FeatureVector(x)).unwrap();
            let s: f64 = p.action_probs.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(p.action_probs.iter().all(|&v| v >= 0.0));
            prop_assert!(p.params.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn softmax_shift_invariant(z in proptest::collection::vec(-20.0f64..20.0, 1..8), c in -50.0f64..50.0) {
            let a = softmax(&z);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(argmax(&a), argmax(&z));
        }
    }
}
