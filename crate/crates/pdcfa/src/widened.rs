//! Store-widened pushdown analysis.
//!
//! The per-configuration stores of the unwidened analysis are collapsed into
//! one global store joined across the whole run. Nodes shrink to partial
//! control states (expression, environment, call history); the continuation
//! is encoded as paths through a Dyck state control-flow graph (DSCFG), and
//! an ε-closure relation over partial states gates pop edges exactly as in
//! the unwidened engine. Precision drops, the state space becomes
//! polynomial.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::abstracted::{
    ainject, astep, store_join, AConf, AEnv, AFrame, AStore, AbstractError, AllocPolicy, Ctx,
};
use crate::pushdown::StackAction;
use crate::syntax::{ExprKind, Label, Program};

/// A partial control state: a configuration with the store and continuation
/// factored out. The call history is retained so context-sensitive policies
/// keep their addresses; it is always empty under the monovariant policy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PState {
    pub expr: Label,
    pub env: AEnv,
    pub ctx: Ctx,
}

impl PState {
    fn to_conf(&self, store: &AStore, kont: Vec<AFrame>) -> AConf {
        AConf {
            expr: self.expr,
            env: self.env.clone(),
            store: store.clone(),
            kont,
            ctx: self.ctx.clone(),
        }
    }

    fn from_conf(conf: &AConf) -> Self {
        PState {
            expr: conf.expr,
            env: conf.env.clone(),
            ctx: conf.ctx.clone(),
        }
    }
}

pub type PEdge = (PState, StackAction, PState);

/// A Dyck state control-flow graph over partial control states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dscfg {
    pub root: PState,
    pub nodes: BTreeSet<PState>,
    pub edges: BTreeSet<PEdge>,
}

/// The widened analysis system: graph, ε-closure relation, global store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidenedSystem {
    pub dscfg: Dscfg,
    pub ecg: BTreeSet<(PState, PState)>,
    pub store: AStore,
}

impl WidenedSystem {
    fn injected(prog: &Program) -> Result<Self, AbstractError> {
        let root = PState::from_conf(&ainject(prog)?);
        Ok(WidenedSystem {
            dscfg: Dscfg {
                root: root.clone(),
                nodes: BTreeSet::from([root.clone()]),
                edges: BTreeSet::new(),
            },
            ecg: BTreeSet::from([(root.clone(), root)]),
            store: AStore::new(),
        })
    }
}

/// The stack- and action-factored transition relation: successors of a
/// partial state under the global store for one specific stack action,
/// paired with the store each transition produces.
pub fn factored_step(
    prog: &Program,
    policy: &AllocPolicy,
    p: &PState,
    store: &AStore,
    action: &StackAction,
) -> BTreeSet<(PState, AStore)> {
    let mut out = BTreeSet::new();
    match action {
        StackAction::Eps => {
            if matches!(prog.expr(p.expr), ExprKind::Call { .. }) {
                for succ in astep(prog, policy, &p.to_conf(store, vec![])) {
                    debug_assert!(succ.kont.is_empty());
                    out.insert((PState::from_conf(&succ), succ.store.clone()));
                }
            }
        }
        StackAction::Push(frame) => {
            if matches!(prog.expr(p.expr), ExprKind::LetCall { .. }) {
                for succ in astep(prog, policy, &p.to_conf(store, vec![])) {
                    if succ.kont.as_slice() == std::slice::from_ref(frame) {
                        out.insert((PState::from_conf(&succ), succ.store.clone()));
                    }
                }
            }
        }
        StackAction::Pop(frame) => {
            if matches!(prog.expr(p.expr), ExprKind::Return(_)) {
                for succ in astep(prog, policy, &p.to_conf(store, vec![frame.clone()])) {
                    debug_assert!(succ.kont.is_empty());
                    out.insert((PState::from_conf(&succ), succ.store.clone()));
                }
            }
        }
    }
    out
}

/// All ε and push transitions out of `p` under `store`.
fn sprout_transitions(
    prog: &Program,
    policy: &AllocPolicy,
    p: &PState,
    store: &AStore,
) -> Vec<(StackAction, PState, AStore)> {
    match prog.expr(p.expr) {
        ExprKind::Return(_) => Vec::new(),
        _ => astep(prog, policy, &p.to_conf(store, vec![]))
            .into_iter()
            .map(|succ| {
                let action = match succ.kont.len() {
                    0 => StackAction::Eps,
                    1 => StackAction::Push(succ.kont[0].clone()),
                    n => unreachable!("one step pushed {n} frames"),
                };
                (action, PState::from_conf(&succ), succ.store.clone())
            })
            .collect(),
    }
}

/// One application of the widened iteration function.
///
/// Push and ε edges are rederived from every current node; pop edges fire
/// only where a push edge with a matching frame reaches the popping state
/// through the ε-closure relation; the global store joins every produced
/// store; the closure relation absorbs ε edges, its own transitive pairs and
/// push–pop summaries, and stays reflexive over all nodes.
pub fn widened_iterate(prog: &Program, policy: &AllocPolicy, s: &WidenedSystem) -> WidenedSystem {
    let mut new_edges: BTreeSet<PEdge> = BTreeSet::new();
    let mut stores: Vec<AStore> = Vec::new();

    for p in &s.dscfg.nodes {
        for (action, target, store) in sprout_transitions(prog, policy, p, &s.store) {
            new_edges.insert((p.clone(), action, target));
            stores.push(store);
        }
    }
    for (_, action, push_target) in &s.dscfg.edges {
        let StackAction::Push(frame) = action else { continue };
        for (h_src, popping) in &s.ecg {
            if h_src != push_target {
                continue;
            }
            for (target, store) in
                factored_step(prog, policy, popping, &s.store, &StackAction::Pop(frame.clone()))
            {
                new_edges.insert((popping.clone(), StackAction::Pop(frame.clone()), target));
                stores.push(store);
            }
        }
    }

    let mut store = s.store.clone();
    for produced in &stores {
        store = store_join(&store, produced);
    }

    let mut nodes = s.dscfg.nodes.clone();
    for (_, _, target) in &new_edges {
        nodes.insert(target.clone());
    }

    let mut ecg = s.ecg.clone();
    for (src, action, target) in &new_edges {
        if *action == StackAction::Eps {
            ecg.insert((src.clone(), target.clone()));
        }
    }
    // transitive pairs
    let snapshot: Vec<_> = ecg.iter().cloned().collect();
    for (a, b) in &snapshot {
        for (c, d) in &snapshot {
            if b == c {
                ecg.insert((a.clone(), d.clone()));
            }
        }
    }
    // push–ε-path–pop summaries
    for (push_src, action, push_target) in &new_edges {
        let StackAction::Push(frame) = action else { continue };
        for (h_src, h_target) in &snapshot {
            if h_src != push_target {
                continue;
            }
            for (pop_src, pop_action, pop_target) in &new_edges {
                if pop_src == h_target && *pop_action == StackAction::Pop(frame.clone()) {
                    ecg.insert((push_src.clone(), pop_target.clone()));
                }
            }
        }
    }
    for p in &nodes {
        ecg.insert((p.clone(), p.clone()));
    }

    WidenedSystem {
        dscfg: Dscfg {
            root: s.dscfg.root.clone(),
            nodes,
            edges: new_edges,
        },
        ecg,
        store,
    }
}

/// Iterate [`widened_iterate`] to its least fixpoint. Returns the converged
/// system and the number of applications performed (the last of which
/// confirms stability).
pub fn widened_analyze(
    prog: &Program,
    policy: &AllocPolicy,
) -> Result<(WidenedSystem, u64), AbstractError> {
    let mut system = WidenedSystem::injected(prog)?;
    let mut iterations = 0u64;
    loop {
        iterations += 1;
        let next = widened_iterate(prog, policy, &system);
        if next == system {
            return Ok((system, iterations));
        }
        system = next;
    }
}

/// Worst-case number of iterations for the monovariant analysis, computed
/// from AST counts: `|Exp|·(2|Var|+1)·|Exp| + |Var|·|Lam|`.
pub fn iteration_bound(prog: &Program) -> u64 {
    let (exprs, vars, lams) = prog.counts();
    exprs * (2 * vars + 1) * exprs + vars * lams
}

/// Render the DSCFG in the same format as the unwidened graph.
pub fn dscfg_to_dot(system: &WidenedSystem, prog: &Program, verbose: bool) -> String {
    let mut ids: BTreeMap<&PState, usize> = BTreeMap::new();
    for (i, p) in system.dscfg.nodes.iter().enumerate() {
        ids.insert(p, i);
    }
    let mut out = String::from("digraph dscfg {\n  rankdir=LR;\n");
    for (p, i) in &ids {
        let label = if verbose {
            format!("{}\\nenv{}", p.expr, p.env.len())
        } else {
            format!("{}", p.expr)
        };
        let shape = if **p == system.dscfg.root { " shape=doublecircle" } else { "" };
        writeln!(out, "  n{i} [label=\"{label}\"{shape}];").unwrap();
    }
    for (src, action, target) in &system.dscfg.edges {
        let label = match action {
            StackAction::Eps => "ε".to_string(),
            StackAction::Push(f) => format!("+{}", prog.var_name(f.var)),
            StackAction::Pop(f) => format!("-{}", prog.var_name(f.var)),
        };
        writeln!(out, "  n{} -> n{} [label=\"{label}\"];", ids[src], ids[target]).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    const P_TAIL: &str = "((λ (x) x) (λ (y) y))";
    const P_OMEGA: &str = "((λ (f) (f f)) (λ (f) (f f)))";

    fn prog(src: &str) -> Program {
        crate::syntax::unique_binders(&parse(src).unwrap())
    }

    #[test]
    fn factored_eps_step_on_p_tail_root() {
        let p = prog(P_TAIL);
        let root = PState {
            expr: p.root(),
            env: AEnv::new(),
            ctx: Ctx::new(),
        };
        let succs = factored_step(&p, &AllocPolicy::ZeroCfa, &root, &AStore::new(), &StackAction::Eps);
        assert_eq!(succs.len(), 1);
        let (target, store) = succs.first().unwrap();
        let lam_x = p.lam_labels().next().unwrap();
        let (x, body_x) = p.lam(lam_x);
        assert_eq!(target.expr, body_x);
        assert!(store.get(&crate::abstracted::AAddr::Mono(x)).is_some());
    }

    #[test]
    fn factored_pop_on_non_return_state_is_empty() {
        let p = prog(P_TAIL);
        let root = PState { expr: p.root(), env: AEnv::new(), ctx: Ctx::new() };
        let (x, body_x) = p.lam(p.lam_labels().next().unwrap());
        let frame = AFrame { var: x, body: body_x, env: AEnv::new() };
        let succs = factored_step(
            &p,
            &AllocPolicy::ZeroCfa,
            &root,
            &AStore::new(),
            &StackAction::Pop(frame),
        );
        assert!(succs.is_empty());
    }

    #[test]
    fn factored_push_on_let_state_has_one_successor() {
        let p = prog("(let ((a ((λ (x) x) (λ (y) y)))) a)");
        let root = PState { expr: p.root(), env: AEnv::new(), ctx: Ctx::new() };
        let ExprKind::LetCall { var, body, .. } = p.expr(p.root()) else {
            panic!("root is a let");
        };
        let frame = AFrame { var: *var, body: *body, env: AEnv::new() };
        let succs = factored_step(
            &p,
            &AllocPolicy::ZeroCfa,
            &root,
            &AStore::new(),
            &StackAction::Push(frame),
        );
        assert_eq!(succs.len(), 1);
        // a push with a non-matching frame does not fire
        let bogus = AFrame { var: *var, body: p.root(), env: AEnv::new() };
        let none = factored_step(
            &p,
            &AllocPolicy::ZeroCfa,
            &root,
            &AStore::new(),
            &StackAction::Push(bogus),
        );
        assert!(none.is_empty());
    }

    #[test]
    fn p_tail_converges_quickly_to_two_nodes() {
        let p = prog(P_TAIL);
        let (system, iterations) = widened_analyze(&p, &AllocPolicy::ZeroCfa).unwrap();
        assert!(iterations <= 4, "took {iterations} iterations");
        assert_eq!(system.dscfg.nodes.len(), 2);
        assert_eq!(system.dscfg.edges.len(), 1);
        let (_, action, _) = system.dscfg.edges.first().unwrap();
        assert_eq!(*action, StackAction::Eps);
    }

    #[test]
    fn fixpoint_input_is_a_fixpoint() {
        let p = prog(P_TAIL);
        let (system, _) = widened_analyze(&p, &AllocPolicy::ZeroCfa).unwrap();
        assert_eq!(widened_iterate(&p, &AllocPolicy::ZeroCfa, &system), system);
    }

    #[test]
    fn omega_terminates_with_only_eps_edges() {
        let p = prog(P_OMEGA);
        let (system, _) = widened_analyze(&p, &AllocPolicy::ZeroCfa).unwrap();
        assert!(system
            .dscfg
            .edges
            .iter()
            .all(|(_, action, _)| *action == StackAction::Eps));
        // every binding carries the same singleton flow set (the second λ)
        let lam_b = p.lam_labels().nth(1).unwrap();
        for (_, flows) in system.store.iter() {
            assert_eq!(flows.len(), 1);
            assert_eq!(flows.first().unwrap().lam, lam_b);
        }
        assert!(!system.store.is_empty());
    }

    #[test]
    fn iteration_bound_formula_and_monotonicity() {
        let p = prog(P_TAIL);
        let (exprs, vars, lams) = p.counts();
        assert_eq!((exprs, vars, lams), (3, 2, 2));
        assert_eq!(iteration_bound(&p), 3 * 5 * 3 + 4);

        let single = prog("(λ (v) v)");
        let (e2, v2, l2) = single.counts();
        assert_eq!(iteration_bound(&single), e2 * (2 * v2 + 1) * e2 + v2 * l2);

        // growing the program never decreases the bound
        let bigger = prog("(let ((a ((λ (x) x) (λ (y) y)))) a)");
        assert!(iteration_bound(&bigger) >= iteration_bound(&p));
    }

    #[test]
    fn store_and_graph_grow_monotonically() {
        let p = prog("(let ((a ((λ (x) x) (λ (y) y)))) a)");
        let mut system = WidenedSystem::injected(&p).unwrap();
        for _ in 0..10 {
            let next = widened_iterate(&p, &AllocPolicy::ZeroCfa, &system);
            assert!(crate::abstracted::leq_store(&system.store, &next.store));
            assert!(system.dscfg.nodes.is_subset(&next.dscfg.nodes));
            assert!(system.dscfg.edges.is_subset(&next.dscfg.edges));
            assert!(system.ecg.is_subset(&next.ecg));
            system = next;
        }
    }
}
