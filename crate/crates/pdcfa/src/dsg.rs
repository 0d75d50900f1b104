//! Dyck state graph construction.
//!
//! A Dyck state graph (DSG) is the reachable, extensionally enumerated part
//! of a rooted pushdown system: every node is reachable from the root by a
//! path whose stack actions form a legal (never-pop-empty) string.
//!
//! Two algorithms are provided. [`worklist_fixpoint`] maintains an ε-closure
//! graph (ECG) — edges assert a no-net-stack-change path between control
//! states — and a work queue, so each new state or edge only triggers the
//! consequences it can actually have. [`naive_fixpoint`] is the plain
//! monotone fixpoint that rescans the whole graph every round, recomputing
//! the ε-closure from scratch; it exists for differential testing. A
//! breadth-first [`enumeration_oracle`] over explicit (state, stack)
//! configurations closes the triangle on systems small enough to enumerate.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::hash::Hash;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstracted::AFrame;
use crate::pushdown::{ControlState, PdsConfig, Rpds, StackAction};
use crate::syntax::Program;

// ---------------------------------------------------------------------------
// Interned graph representation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId(pub u32);

/// A stack action over interned frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Eps,
    Push(FrameId),
    Pop(FrameId),
}

#[derive(Debug, Clone)]
pub struct Interner<T> {
    items: Vec<T>,
    index: HashMap<T, u32>,
}

impl<T> Default for Interner<T> {
    fn default() -> Self {
        Interner {
            items: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Clone + Eq + Hash> Interner<T> {
    pub fn intern(&mut self, item: &T) -> u32 {
        if let Some(id) = self.index.get(item) {
            return *id;
        }
        let id = self.items.len() as u32;
        self.items.push(item.clone());
        self.index.insert(item.clone(), id);
        id
    }

    pub fn get(&self, id: u32) -> &T {
        &self.items[id as usize]
    }

    pub fn lookup(&self, item: &T) -> Option<u32> {
        self.index.get(item).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub type Edge = (StateId, Action, StateId);

/// The extensional Dyck state graph.
#[derive(Debug, Clone, Default)]
pub struct Dsg {
    nodes: BTreeSet<StateId>,
    edges: BTreeSet<Edge>,
    eps_out: BTreeMap<StateId, BTreeSet<StateId>>,
    push_out: BTreeMap<StateId, BTreeSet<(FrameId, StateId)>>,
    push_in: BTreeMap<StateId, BTreeSet<(StateId, FrameId)>>,
    pop_out: BTreeMap<StateId, BTreeSet<(FrameId, StateId)>>,
}

impl Dsg {
    pub fn contains_node(&self, q: StateId) -> bool {
        self.nodes.contains(&q)
    }

    fn insert_node(&mut self, q: StateId) -> bool {
        self.nodes.insert(q)
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }

    fn insert_edge(&mut self, e: Edge) -> bool {
        if !self.edges.insert(e) {
            return false;
        }
        let (q, act, q2) = e;
        match act {
            Action::Eps => {
                self.eps_out.entry(q).or_default().insert(q2);
            }
            Action::Push(f) => {
                self.push_out.entry(q).or_default().insert((f, q2));
                self.push_in.entry(q2).or_default().insert((q, f));
            }
            Action::Pop(f) => {
                self.pop_out.entry(q).or_default().insert((f, q2));
            }
        }
        true
    }

    pub fn nodes(&self) -> impl Iterator<Item = StateId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Push edges arriving at `q`, as (source, frame) pairs.
    pub fn pushes_into(&self, q: StateId) -> impl Iterator<Item = (StateId, FrameId)> + '_ {
        self.push_in.get(&q).into_iter().flatten().copied()
    }
}

/// The ε-closure graph. Self loops are implicit: every state is its own
/// ancestor and descendant.
#[derive(Debug, Clone, Default)]
pub struct Ecg {
    fwd: BTreeMap<StateId, BTreeSet<StateId>>,
    bwd: BTreeMap<StateId, BTreeSet<StateId>>,
    edge_count: usize,
}

impl Ecg {
    pub fn contains(&self, a: StateId, b: StateId) -> bool {
        a == b || self.fwd.get(&a).is_some_and(|s| s.contains(&b))
    }

    fn insert(&mut self, a: StateId, b: StateId) -> bool {
        if a == b || !self.fwd.entry(a).or_default().insert(b) {
            return false;
        }
        self.bwd.entry(b).or_default().insert(a);
        self.edge_count += 1;
        true
    }

    /// States with a no-net-stack-change path to `q`, including `q` itself.
    pub fn ancestors(&self, q: StateId) -> BTreeSet<StateId> {
        let mut out: BTreeSet<StateId> =
            self.bwd.get(&q).cloned().unwrap_or_default();
        out.insert(q);
        out
    }

    /// States reachable from `q` with no net stack change, including `q`.
    pub fn descendants(&self, q: StateId) -> BTreeSet<StateId> {
        let mut out: BTreeSet<StateId> =
            self.fwd.get(&q).cloned().unwrap_or_default();
        out.insert(q);
        out
    }

    /// Stored (non-reflexive) edges.
    pub fn edges(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.fwd
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |b| (*a, *b)))
    }

    pub fn non_reflexive_count(&self) -> usize {
        self.edge_count
    }
}

// ---------------------------------------------------------------------------
// Fixpoint driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_edges: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: 200_000,
            max_edges: 2_000_000,
        }
    }
}

/// Order in which pending work items are drained. `Fifo` is the default;
/// `Shuffled` draws the next item at a seeded-random queue position and is
/// used to check that the result does not depend on processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkOrder {
    Fifo,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixpointStatus {
    Complete,
    /// The node or edge limit was hit; the graphs are partial and must not
    /// be treated as a sound analysis result.
    LimitExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixpointStats {
    /// Work items applied (worklist) or rounds executed (naive).
    pub iterations: u64,
    pub nodes: usize,
    pub edges: usize,
    /// ε-closure edges including the reflexive ones.
    pub h_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum WorkItem {
    State(StateId),
    Edge(StateId, Action, StateId),
    H(StateId, StateId),
}

/// A computed Dyck state graph with its ε-closure graph and intern tables.
pub struct DsgAnalysis {
    states: Interner<ControlState>,
    frames: Interner<AFrame>,
    pub root: StateId,
    pub dsg: Dsg,
    pub ecg: Ecg,
    pub status: FixpointStatus,
    iterations: u64,
}

impl DsgAnalysis {
    pub fn state(&self, id: StateId) -> &ControlState {
        self.states.get(id.0)
    }

    pub fn frame(&self, id: FrameId) -> &AFrame {
        self.frames.get(id.0)
    }

    pub fn resolve(&self, q: &ControlState) -> Option<StateId> {
        let id = self.states.lookup(q)?;
        self.dsg.contains_node(StateId(id)).then_some(StateId(id))
    }

    pub fn node_states(&self) -> impl Iterator<Item = &ControlState> + '_ {
        self.dsg.nodes().map(|id| self.state(id))
    }

    pub fn action(&self, a: Action) -> StackAction {
        match a {
            Action::Eps => StackAction::Eps,
            Action::Push(f) => StackAction::Push(self.frame(f).clone()),
            Action::Pop(f) => StackAction::Pop(self.frame(f).clone()),
        }
    }

    pub fn stats(&self) -> FixpointStats {
        FixpointStats {
            iterations: self.iterations,
            nodes: self.dsg.node_count(),
            edges: self.dsg.edge_count(),
            h_edges: self.ecg.non_reflexive_count() + self.dsg.node_count(),
        }
    }

    /// Node set as plain control states, for comparisons across runs.
    pub fn canonical_nodes(&self) -> BTreeSet<ControlState> {
        self.node_states().cloned().collect()
    }

    /// Edge set as plain control states and stack actions.
    pub fn canonical_edges(&self) -> BTreeSet<(ControlState, StackAction, ControlState)> {
        self.dsg
            .edges()
            .map(|(q, a, q2)| (self.state(q).clone(), self.action(a), self.state(q2).clone()))
            .collect()
    }

    /// ε-closure edges as plain control states, reflexive edges included.
    pub fn canonical_h(&self) -> BTreeSet<(ControlState, ControlState)> {
        let mut out: BTreeSet<(ControlState, ControlState)> = self
            .ecg
            .edges()
            .map(|(a, b)| (self.state(a).clone(), self.state(b).clone()))
            .collect();
        for q in self.dsg.nodes() {
            out.insert((self.state(q).clone(), self.state(q).clone()));
        }
        out
    }

    pub fn eps_descendants(&self, q: &ControlState) -> Option<BTreeSet<ControlState>> {
        let id = self.resolve(q)?;
        Some(self.ecg.descendants(id).into_iter().map(|s| self.state(s).clone()).collect())
    }

    pub fn eps_ancestors(&self, q: &ControlState) -> Option<BTreeSet<ControlState>> {
        let id = self.resolve(q)?;
        Some(self.ecg.ancestors(id).into_iter().map(|s| self.state(s).clone()).collect())
    }

    /// Bounded search for a path from `a` to `b` whose action string is
    /// balanced: the running stack never dips below the start and finishes
    /// at it. Witnesses the meaning of an ε-closure edge.
    pub fn has_balanced_path(&self, a: StateId, b: StateId, max_len: usize) -> bool {
        // BFS over (state, relative stack) pairs.
        let mut queue: VecDeque<(StateId, Vec<FrameId>, usize)> = VecDeque::new();
        let mut seen: HashSet<(StateId, Vec<FrameId>)> = HashSet::new();
        queue.push_back((a, Vec::new(), 0));
        while let Some((q, stack, len)) = queue.pop_front() {
            if q == b && stack.is_empty() && len > 0 {
                return true;
            }
            if len >= max_len {
                continue;
            }
            for (src, act, tgt) in self.dsg.edges() {
                if src != q {
                    continue;
                }
                let mut next = stack.clone();
                match act {
                    Action::Eps => {}
                    Action::Push(f) => next.push(f),
                    Action::Pop(f) => {
                        if next.last() != Some(&f) {
                            continue;
                        }
                        next.pop();
                    }
                }
                if seen.insert((tgt, next.clone())) {
                    queue.push_back((tgt, next, len + 1));
                }
            }
        }
        false
    }
}

/// The incremental builder behind [`worklist_fixpoint`]. Exposed so the
/// per-event rules (sprout, push, pop, ε-edge consequences) can be driven
/// and inspected step by step.
pub struct DsgBuilder<'p, 'r> {
    rpds: &'r Rpds<'p>,
    states: Interner<ControlState>,
    frames: Interner<AFrame>,
    dsg: Dsg,
    ecg: Ecg,
    queue: VecDeque<WorkItem>,
    pending: HashSet<WorkItem>,
    pop_cache: HashMap<(StateId, FrameId), Vec<StateId>>,
    iterations: u64,
    root: StateId,
}

impl<'p, 'r> DsgBuilder<'p, 'r> {
    pub fn new(rpds: &'r Rpds<'p>) -> Self {
        let mut states = Interner::default();
        let root = StateId(states.intern(rpds.root()));
        let mut b = DsgBuilder {
            rpds,
            states,
            frames: Interner::default(),
            dsg: Dsg::default(),
            ecg: Ecg::default(),
            queue: VecDeque::new(),
            pending: HashSet::new(),
            pop_cache: HashMap::new(),
            iterations: 0,
            root,
        };
        b.enqueue(WorkItem::State(root));
        b
    }

    fn enqueue(&mut self, item: WorkItem) {
        let satisfied = match item {
            WorkItem::State(q) => self.dsg.contains_node(q),
            WorkItem::Edge(q, a, q2) => self.dsg.contains_edge(&(q, a, q2)),
            WorkItem::H(a, b) => self.ecg.contains(a, b),
        };
        if satisfied || self.pending.contains(&item) {
            return;
        }
        self.pending.insert(item);
        self.queue.push_back(item);
    }

    fn intern_action(&mut self, act: &StackAction) -> Action {
        match act {
            StackAction::Eps => Action::Eps,
            StackAction::Push(f) => Action::Push(FrameId(self.frames.intern(f))),
            StackAction::Pop(f) => Action::Pop(FrameId(self.frames.intern(f))),
        }
    }

    fn pop_successors(&mut self, q: StateId, f: FrameId) -> Vec<StateId> {
        if let Some(cached) = self.pop_cache.get(&(q, f)) {
            return cached.clone();
        }
        let state = self.states.get(q.0).clone();
        let frame = self.frames.get(f.0).clone();
        let targets: Vec<StateId> = self
            .rpds
            .pop_successors(&state, &frame)
            .into_iter()
            .map(|t| StateId(self.states.intern(&t)))
            .collect();
        self.pop_cache.insert((q, f), targets.clone());
        targets
    }

    /// ε and push edges contributed by a state newly added to the graph.
    fn sprout(&mut self, q: StateId) -> Vec<Edge> {
        let state = self.states.get(q.0).clone();
        self.rpds
            .successors(&state)
            .into_iter()
            .map(|(act, tgt)| {
                let a = self.intern_action(&act);
                let t = StateId(self.states.intern(&tgt));
                (q, a, t)
            })
            .collect()
    }

    /// Consequences of a new push edge: pops at ε-descendants of its target,
    /// plus the summary ε-edges they induce.
    fn add_push(&mut self, q: StateId, f: FrameId, q2: StateId) -> (Vec<Edge>, Vec<(StateId, StateId)>) {
        let mut edges = Vec::new();
        let mut hs = Vec::new();
        for desc in self.ecg.descendants(q2) {
            for tgt in self.pop_successors(desc, f) {
                edges.push((desc, Action::Pop(f), tgt));
                hs.push((q, tgt));
            }
        }
        (edges, hs)
    }

    /// Consequences of a new pop edge: summary ε-edges from matching pushes
    /// upstream of the popping state.
    fn add_pop(&mut self, q: StateId, f: FrameId, q2: StateId) -> Vec<(StateId, StateId)> {
        let mut hs = Vec::new();
        for anc in self.ecg.ancestors(q) {
            for (src, pf) in self.dsg.pushes_into(anc) {
                if pf == f {
                    hs.push((src, q2));
                }
            }
        }
        hs
    }

    /// Consequences of a new ε-closure edge (a, b): newly enabled pops
    /// beyond `b` matched with pushes above `a`, and the transitive stitch
    /// edges that keep the closure graph transitively closed.
    fn add_empty(&mut self, a: StateId, b: StateId) -> (Vec<Edge>, Vec<(StateId, StateId)>) {
        let mut edges = Vec::new();
        let mut hs = Vec::new();
        let ancestors = self.ecg.ancestors(a);
        let descendants = self.ecg.descendants(b);
        for anc in &ancestors {
            for (src, f) in self.dsg.pushes_into(*anc).collect::<Vec<_>>() {
                for desc in &descendants {
                    for tgt in self.pop_successors(*desc, f) {
                        edges.push((*desc, Action::Pop(f), tgt));
                        hs.push((src, tgt));
                    }
                }
            }
        }
        for anc in &ancestors {
            hs.push((*anc, b));
        }
        for desc in &descendants {
            hs.push((a, *desc));
        }
        for anc in &ancestors {
            for desc in &descendants {
                hs.push((*anc, *desc));
            }
        }
        (edges, hs)
    }

    fn over_limits(&self, limits: &Limits) -> bool {
        self.dsg.node_count() > limits.max_nodes || self.dsg.edge_count() > limits.max_edges
    }

    /// Apply one work item. Returns false once the queue is empty.
    pub fn step(&mut self, order: &mut OrderState) -> bool {
        let Some(item) = order.take(&mut self.queue) else {
            return false;
        };
        self.pending.remove(&item);
        self.iterations += 1;
        match item {
            WorkItem::State(q) => {
                if !self.dsg.insert_node(q) {
                    return true;
                }
                for (src, act, tgt) in self.sprout(q) {
                    self.enqueue(WorkItem::Edge(src, act, tgt));
                }
            }
            WorkItem::Edge(q, act, q2) => {
                if !self.dsg.insert_edge((q, act, q2)) {
                    return true;
                }
                self.enqueue(WorkItem::State(q2));
                match act {
                    Action::Eps => self.enqueue(WorkItem::H(q, q2)),
                    Action::Push(f) => {
                        let (edges, hs) = self.add_push(q, f, q2);
                        for e in edges {
                            self.enqueue(WorkItem::Edge(e.0, e.1, e.2));
                        }
                        for (x, y) in hs {
                            self.enqueue(WorkItem::H(x, y));
                        }
                    }
                    Action::Pop(f) => {
                        for (x, y) in self.add_pop(q, f, q2) {
                            self.enqueue(WorkItem::H(x, y));
                        }
                    }
                }
            }
            WorkItem::H(a, b) => {
                if !self.ecg.insert(a, b) {
                    return true;
                }
                let (edges, hs) = self.add_empty(a, b);
                for e in edges {
                    self.enqueue(WorkItem::Edge(e.0, e.1, e.2));
                }
                for (x, y) in hs {
                    self.enqueue(WorkItem::H(x, y));
                }
            }
        }
        true
    }

    pub fn finish(self, status: FixpointStatus) -> DsgAnalysis {
        DsgAnalysis {
            states: self.states,
            frames: self.frames,
            root: self.root,
            dsg: self.dsg,
            ecg: self.ecg,
            status,
            iterations: self.iterations,
        }
    }
}

/// Dequeue strategy state.
pub struct OrderState {
    rng: Option<ChaCha8Rng>,
}

impl OrderState {
    pub fn new(order: WorkOrder) -> Self {
        OrderState {
            rng: match order {
                WorkOrder::Fifo => None,
                WorkOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
        }
    }

    fn take(&mut self, queue: &mut VecDeque<WorkItem>) -> Option<WorkItem> {
        match &mut self.rng {
            None => queue.pop_front(),
            Some(rng) => {
                if queue.is_empty() {
                    return None;
                }
                let i = rng.gen_range(0..queue.len());
                queue.swap(0, i);
                queue.pop_front()
            }
        }
    }
}

/// Saturate the Dyck state graph and its ε-closure graph from the root.
pub fn worklist_fixpoint(rpds: &Rpds, limits: Limits, order: WorkOrder) -> DsgAnalysis {
    let mut builder = DsgBuilder::new(rpds);
    let mut order = OrderState::new(order);
    let mut status = FixpointStatus::Complete;
    while builder.step(&mut order) {
        if builder.over_limits(&limits) {
            status = FixpointStatus::LimitExceeded;
            break;
        }
    }
    builder.finish(status)
}

// ---------------------------------------------------------------------------
// Naive fixpoint
// ---------------------------------------------------------------------------

type CEdge = (ControlState, StackAction, ControlState);

/// ε-closure over an explicit edge set: reflexive, closed under ε edges,
/// push/pop summaries and transitivity.
fn closure_of(
    nodes: &BTreeSet<ControlState>,
    edges: &BTreeSet<CEdge>,
) -> BTreeSet<(ControlState, ControlState)> {
    let mut h: BTreeSet<(ControlState, ControlState)> = nodes
        .iter()
        .map(|q| (q.clone(), q.clone()))
        .collect();
    for (q, act, q2) in edges {
        if *act == StackAction::Eps {
            h.insert((q.clone(), q2.clone()));
        }
    }
    loop {
        let mut grew = false;
        let snapshot: Vec<_> = h.iter().cloned().collect();
        // push ⇝ pop summaries
        for (p, act, p2) in edges {
            let StackAction::Push(f) = act else { continue };
            for (a, b) in &snapshot {
                if a != p2 {
                    continue;
                }
                for (q, act2, q2) in edges {
                    if q == b && *act2 == StackAction::Pop(f.clone()) {
                        grew |= h.insert((p.clone(), q2.clone()));
                    }
                }
            }
        }
        // transitivity
        let snapshot: Vec<_> = h.iter().cloned().collect();
        for (a, b) in &snapshot {
            for (c, d) in &snapshot {
                if b == c {
                    grew |= h.insert((a.clone(), d.clone()));
                }
            }
        }
        if !grew {
            return h;
        }
    }
}

/// The plain monotone fixpoint: every round rescans all discovered states,
/// recomputing top-of-stack feasibility for pops from a fresh ε-closure.
pub fn naive_fixpoint(rpds: &Rpds, limits: Limits) -> DsgAnalysis {
    let prog = rpds.program();
    let mut nodes: BTreeSet<ControlState> = BTreeSet::from([rpds.root().clone()]);
    let mut edges: BTreeSet<CEdge> = BTreeSet::new();
    let mut rounds = 0u64;
    let mut status = FixpointStatus::Complete;
    let mut h = closure_of(&nodes, &edges);
    loop {
        rounds += 1;
        let mut new_edges = edges.clone();
        for q in &nodes {
            for (act, q2) in rpds.successors(q) {
                new_edges.insert((q.clone(), act, q2));
            }
        }
        // pops: feasible when a matching push reaches this state through h
        for q in &nodes {
            if !matches!(prog.expr(q.expr), crate::syntax::ExprKind::Return(_)) {
                continue;
            }
            for (_, act, p2) in &edges {
                let StackAction::Push(f) = act else { continue };
                if !h.contains(&(p2.clone(), q.clone())) {
                    continue;
                }
                for tgt in rpds.pop_successors(q, f) {
                    new_edges.insert((q.clone(), StackAction::Pop(f.clone()), tgt));
                }
            }
        }
        let mut new_nodes = nodes.clone();
        for (_, _, tgt) in &new_edges {
            new_nodes.insert(tgt.clone());
        }
        let grew = new_nodes.len() != nodes.len() || new_edges.len() != edges.len();
        nodes = new_nodes;
        edges = new_edges;
        h = closure_of(&nodes, &edges);
        if !grew {
            break;
        }
        if nodes.len() > limits.max_nodes || edges.len() > limits.max_edges {
            status = FixpointStatus::LimitExceeded;
            break;
        }
    }

    // Intern into the shared result shape.
    let mut states = Interner::default();
    let mut frames = Interner::default();
    let root = StateId(states.intern(rpds.root()));
    let mut dsg = Dsg::default();
    let mut ecg = Ecg::default();
    for q in &nodes {
        dsg.insert_node(StateId(states.intern(q)));
    }
    for (q, act, q2) in &edges {
        let a = match act {
            StackAction::Eps => Action::Eps,
            StackAction::Push(f) => Action::Push(FrameId(frames.intern(f))),
            StackAction::Pop(f) => Action::Pop(FrameId(frames.intern(f))),
        };
        let src = StateId(states.intern(q));
        let tgt = StateId(states.intern(q2));
        dsg.insert_edge((src, a, tgt));
    }
    for (a, b) in &h {
        if a != b {
            ecg.insert(StateId(states.intern(a)), StateId(states.intern(b)));
        }
    }
    DsgAnalysis {
        states,
        frames,
        root,
        dsg,
        ecg,
        status,
        iterations: rounds,
    }
}

// ---------------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    /// The configuration space closed within the limits; nodes and edges are
    /// the projections of all reachable configurations and transitions.
    Closed {
        nodes: BTreeSet<ControlState>,
        edges: BTreeSet<CEdge>,
    },
    /// Limits were hit before closure.
    Inconclusive,
}

/// Breadth-first enumeration of explicit (state, stack) configurations.
pub fn enumeration_oracle(rpds: &Rpds, max_configs: usize, max_depth: usize) -> OracleOutcome {
    let root = PdsConfig {
        state: rpds.root().clone(),
        stack: Vec::new(),
    };
    let mut seen: BTreeSet<PdsConfig> = BTreeSet::from([root.clone()]);
    let mut queue: VecDeque<PdsConfig> = VecDeque::from([root]);
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    while let Some(cfg) = queue.pop_front() {
        nodes.insert(cfg.state.clone());
        let mut moves: Vec<(StackAction, ControlState)> = rpds.successors(&cfg.state);
        if let Some(top) = cfg.stack.last() {
            for tgt in rpds.pop_successors(&cfg.state, top) {
                moves.push((StackAction::Pop(top.clone()), tgt));
            }
        }
        for (act, tgt) in moves {
            let next = crate::pushdown::apply_action(&cfg, &act, &tgt)
                .expect("actions constructed from the current stack always apply");
            if next.stack.len() > max_depth {
                return OracleOutcome::Inconclusive;
            }
            edges.insert((cfg.state.clone(), act, tgt));
            if seen.insert(next.clone()) {
                if seen.len() > max_configs {
                    return OracleOutcome::Inconclusive;
                }
                queue.push_back(next);
            }
        }
    }
    OracleOutcome::Closed { nodes, edges }
}

// ---------------------------------------------------------------------------
// DOT output
// ---------------------------------------------------------------------------

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn state_digest(q: &ControlState) -> String {
    let rendered = format!("{:?}|{:?}|{:?}", q.env, q.store, q.ctx);
    format!("{:08x}", fnv1a64(rendered.as_bytes()) & 0xffff_ffff)
}

fn action_label(analysis: &DsgAnalysis, prog: &Program, act: Action) -> String {
    match act {
        Action::Eps => "ε".to_string(),
        Action::Push(f) => format!("+{}", prog.var_name(analysis.frame(f).var)),
        Action::Pop(f) => format!("-{}", prog.var_name(analysis.frame(f).var)),
    }
}

/// Render the Dyck state graph. Nodes are labeled with their expression
/// label; `verbose` appends digests of the environment/store components.
pub fn dsg_to_dot(analysis: &DsgAnalysis, prog: &Program, verbose: bool) -> String {
    let mut out = String::from("digraph dsg {\n  rankdir=LR;\n");
    for q in analysis.dsg.nodes() {
        let state = analysis.state(q);
        let label = if verbose {
            format!("{}\\n{}", state.expr, state_digest(state))
        } else {
            format!("{}", state.expr)
        };
        let shape = if q == analysis.root { " shape=doublecircle" } else { "" };
        writeln!(out, "  n{} [label=\"{}\"{}];", q.0, label, shape).unwrap();
    }
    for (q, act, q2) in analysis.dsg.edges() {
        writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            q.0,
            q2.0,
            action_label(analysis, prog, act)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// Render the ε-closure graph with dashed edges, self loops included.
pub fn ecg_to_dot(analysis: &DsgAnalysis, _prog: &Program) -> String {
    let mut out = String::from("digraph ecg {\n  rankdir=LR;\n  edge [style=dashed];\n");
    for q in analysis.dsg.nodes() {
        writeln!(out, "  n{} [label=\"{}\"];", q.0, analysis.state(q).expr).unwrap();
    }
    for q in analysis.dsg.nodes() {
        writeln!(out, "  n{} -> n{};", q.0, q.0).unwrap();
    }
    for (a, b) in analysis.ecg.edges() {
        writeln!(out, "  n{} -> n{};", a.0, b.0).unwrap();
    }
    out.push_str("}\n");
    out
}
