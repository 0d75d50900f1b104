//! Analysis clients: queries over a converged analysis result.
//!
//! Every query runs against either the unwidened result (Dyck state graph,
//! ε-closure graph, per-state stores) or the widened one (Dyck state
//! control-flow graph with a single global store). Flow sets read the
//! store(s); may-call asks whether a closure over a given λ can be the
//! operator at a call; escape analysis closes closure-creation states
//! forward over ε/push edges; dependence reports the frames that can be on
//! the stack at a state, read off ε/pop paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::json;
use thiserror::Error;

use crate::abstracted::{aatomic_eval, AEnv, AFrame, AStore, AllocPolicy};
use crate::dsg::DsgAnalysis;
use crate::pushdown::{ControlState, StackAction};
use crate::syntax::{Atom, ExprKind, Label, Program, VarId};
use crate::widened::{PState, WidenedSystem};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("label {0} does not name the required kind of node")]
    UnknownLabel(Label),
    #[error("state is not a node of the analyzed graph")]
    UnknownState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Escape {
    StackSafe,
    MayEscape,
}

/// A converged analysis, either per-state-store or store-widened.
pub enum AnalysisResult {
    Unwidened {
        policy: AllocPolicy,
        analysis: DsgAnalysis,
    },
    Widened {
        policy: AllocPolicy,
        system: WidenedSystem,
        iterations: u64,
    },
}

/// Normalized node/edge view shared by the query implementations.
struct QueryGraph<'a> {
    exprs: Vec<Label>,
    envs: Vec<&'a AEnv>,
    stores: Vec<&'a AStore>,
    edges: Vec<(usize, StackAction, usize)>,
}

impl AnalysisResult {
    pub fn policy(&self) -> &AllocPolicy {
        match self {
            AnalysisResult::Unwidened { policy, .. } => policy,
            AnalysisResult::Widened { policy, .. } => policy,
        }
    }

    fn graph(&self) -> QueryGraph<'_> {
        let mut g = QueryGraph {
            exprs: Vec::new(),
            envs: Vec::new(),
            stores: Vec::new(),
            edges: Vec::new(),
        };
        match self {
            AnalysisResult::Unwidened { analysis, .. } => {
                let ids: Vec<_> = analysis.dsg.nodes().collect();
                let index: BTreeMap<_, _> =
                    ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
                for id in &ids {
                    let q = analysis.state(*id);
                    g.exprs.push(q.expr);
                    g.envs.push(&q.env);
                    g.stores.push(&q.store);
                }
                for (src, act, tgt) in analysis.dsg.edges() {
                    g.edges.push((index[&src], analysis.action(act), index[&tgt]));
                }
            }
            AnalysisResult::Widened { system, .. } => {
                let nodes: Vec<_> = system.dscfg.nodes.iter().collect();
                let index: BTreeMap<&PState, usize> =
                    nodes.iter().enumerate().map(|(i, p)| (*p, i)).collect();
                for p in &nodes {
                    g.exprs.push(p.expr);
                    g.envs.push(&p.env);
                    g.stores.push(&system.store);
                }
                for (src, act, tgt) in &system.dscfg.edges {
                    g.edges.push((index[src], act.clone(), index[tgt]));
                }
            }
        }
        g
    }

    /// Per-node stores of the unwidened result (each control state carries
    /// its own store).
    pub fn per_state_stores(&self) -> Option<BTreeMap<ControlState, AStore>> {
        match self {
            AnalysisResult::Unwidened { analysis, .. } => Some(
                analysis
                    .node_states()
                    .map(|q| (q.clone(), q.store.clone()))
                    .collect(),
            ),
            AnalysisResult::Widened { .. } => None,
        }
    }

    /// λ-terms a variable may be bound to: the union, over every node's
    /// store, of the flow sets at each address whose variable component is
    /// `v`.
    pub fn flow_set(&self, prog: &Program, v: VarId) -> Result<BTreeSet<Label>, QueryError> {
        if prog.var(v).binder.is_none() {
            return Err(QueryError::UnknownVariable(prog.var_name(v).to_string()));
        }
        let mut out = BTreeSet::new();
        let mut collect = |store: &AStore| {
            for (addr, flows) in store.iter() {
                if addr.var() == v {
                    out.extend(flows.iter().map(|c| c.lam));
                }
            }
        };
        match self {
            AnalysisResult::Unwidened { analysis, .. } => {
                for q in analysis.node_states() {
                    collect(&q.store);
                }
            }
            AnalysisResult::Widened { system, .. } => collect(&system.store),
        }
        Ok(out)
    }

    /// Flow set looked up by (unique) variable name.
    pub fn flow_set_by_name(
        &self,
        prog: &Program,
        name: &str,
    ) -> Result<BTreeSet<Label>, QueryError> {
        let v = prog
            .binder_by_name(name)
            .ok_or_else(|| QueryError::UnknownVariable(name.to_string()))?;
        self.flow_set(prog, v)
    }

    /// May a closure over `lam` be called at call site `call`?
    pub fn may_call(&self, prog: &Program, call: Label, lam: Label) -> Result<bool, QueryError> {
        if !prog.is_expr(call) || !matches!(prog.expr(call), ExprKind::Call { .. }) {
            return Err(QueryError::UnknownLabel(call));
        }
        if !prog.is_lam(lam) {
            return Err(QueryError::UnknownLabel(lam));
        }
        let g = self.graph();
        for i in 0..g.exprs.len() {
            if g.exprs[i] != call {
                continue;
            }
            let ExprKind::Call { fun, .. } = prog.expr(call) else {
                unreachable!()
            };
            if aatomic_eval(fun, g.envs[i], g.stores[i])
                .iter()
                .any(|c| c.lam == lam)
            {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Nodes whose outgoing transition constructs a closure over `lam`:
    /// calls with the literal in operator or operand position, and returns
    /// of the literal.
    fn creation_nodes(&self, prog: &Program, lam: Label, g: &QueryGraph) -> Vec<usize> {
        let mentions = |expr: Label| match prog.expr(expr) {
            ExprKind::Call { fun, arg } => *fun == Atom::Lam(lam) || *arg == Atom::Lam(lam),
            ExprKind::Return(atom) => *atom == Atom::Lam(lam),
            ExprKind::LetCall { .. } => false,
        };
        (0..g.exprs.len()).filter(|i| mentions(g.exprs[*i])).collect()
    }

    /// Can every closure over `lam` be stack-allocated? Closure-creating
    /// states are closed forward over ε and push edges only; if every state
    /// invoking a closure over `lam` lies inside that safe set, the closure
    /// never outlives its creating frame.
    pub fn escape_analysis(&self, prog: &Program, lam: Label) -> Result<Escape, QueryError> {
        if !prog.is_lam(lam) {
            return Err(QueryError::UnknownLabel(lam));
        }
        let g = self.graph();
        let creators = self.creation_nodes(prog, lam, &g);
        let mut safe: BTreeSet<usize> = creators.iter().copied().collect();
        let mut queue: VecDeque<usize> = creators.into_iter().collect();
        while let Some(i) = queue.pop_front() {
            for (src, act, tgt) in &g.edges {
                if *src != i || matches!(act, StackAction::Pop(_)) {
                    continue;
                }
                if safe.insert(*tgt) {
                    queue.push_back(*tgt);
                }
            }
        }
        for i in 0..g.exprs.len() {
            if let ExprKind::Call { fun, .. } = prog.expr(g.exprs[i]) {
                let invoked = aatomic_eval(fun, g.envs[i], g.stores[i])
                    .iter()
                    .any(|c| c.lam == lam);
                if invoked && !safe.contains(&i) {
                    return Ok(Escape::MayEscape);
                }
            }
        }
        Ok(Escape::StackSafe)
    }

    fn dependence_from(&self, g: &QueryGraph, start: usize) -> BTreeSet<AFrame> {
        let mut frames = BTreeSet::new();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for (src, act, tgt) in &g.edges {
                if *src != i {
                    continue;
                }
                match act {
                    StackAction::Push(_) => {}
                    StackAction::Eps => {
                        if seen.insert(*tgt) {
                            queue.push_back(*tgt);
                        }
                    }
                    StackAction::Pop(f) => {
                        frames.insert(f.clone());
                        if seen.insert(*tgt) {
                            queue.push_back(*tgt);
                        }
                    }
                }
            }
        }
        frames
    }

    /// Frames that may be on the stack at an unwidened graph node: the
    /// frames labeling pop edges on ε/pop-only paths from it.
    pub fn dependence_frames(&self, q: &ControlState) -> Result<BTreeSet<AFrame>, QueryError> {
        let AnalysisResult::Unwidened { analysis, .. } = self else {
            return Err(QueryError::UnknownState);
        };
        analysis.resolve(q).ok_or(QueryError::UnknownState)?;
        let ids: Vec<_> = analysis.dsg.nodes().collect();
        let idx = ids
            .iter()
            .position(|id| analysis.state(*id) == q)
            .ok_or(QueryError::UnknownState)?;
        let g = self.graph();
        Ok(self.dependence_from(&g, idx))
    }

    /// Frames that may be on the stack at a widened graph node.
    pub fn dependence_frames_widened(&self, p: &PState) -> Result<BTreeSet<AFrame>, QueryError> {
        let AnalysisResult::Widened { system, .. } = self else {
            return Err(QueryError::UnknownState);
        };
        let idx = system
            .dscfg
            .nodes
            .iter()
            .position(|n| n == p)
            .ok_or(QueryError::UnknownState)?;
        let g = self.graph();
        Ok(self.dependence_from(&g, idx))
    }
}

/// Convenience constructors for the common analysis pipelines.
impl AnalysisResult {
    pub fn unwidened(prog: &Program, policy: AllocPolicy) -> Result<Self, crate::abstracted::AbstractError> {
        let rpds = crate::pushdown::Rpds::new(prog, policy.clone())?;
        let analysis = crate::dsg::worklist_fixpoint(
            &rpds,
            crate::dsg::Limits::default(),
            crate::dsg::WorkOrder::Fifo,
        );
        Ok(AnalysisResult::Unwidened { policy, analysis })
    }

    pub fn widened(prog: &Program, policy: AllocPolicy) -> Result<Self, crate::abstracted::AbstractError> {
        let (system, iterations) = crate::widened::widened_analyze(prog, &policy)?;
        Ok(AnalysisResult::Widened { policy, system, iterations })
    }
}

/// Flow sets for every binder plus escape verdicts for every λ, as JSON:
/// `{"flows": {var: [lam-labels]}, "escape": {lam-label: verdict}}`.
pub fn flows_json(prog: &Program, result: &AnalysisResult) -> serde_json::Value {
    let mut flows = serde_json::Map::new();
    for v in prog.binders() {
        let set = result.flow_set(prog, v).unwrap_or_default();
        flows.insert(
            prog.var_name(v).to_string(),
            json!(set.iter().map(|l| l.0).collect::<Vec<_>>()),
        );
    }
    let mut escape = serde_json::Map::new();
    for lam in prog.lam_labels() {
        let verdict = match result.escape_analysis(prog, lam) {
            Ok(Escape::StackSafe) => "StackSafe",
            Ok(Escape::MayEscape) => "MayEscape",
            Err(_) => "MayEscape",
        };
        escape.insert(lam.to_string(), json!(verdict));
    }
    json!({ "flows": flows, "escape": escape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::syntax::{parse, unique_binders};

    fn prog(src: &str) -> Program {
        unique_binders(&parse(src).unwrap())
    }

    fn lam_by_param(p: &Program, name: &str) -> Label {
        p.lam_labels()
            .find(|l| p.var_name(p.lam(*l).0) == name)
            .unwrap_or_else(|| panic!("no λ with parameter {name}"))
    }

    /// What the monovariant pushdown analysis actually computes on the
    /// two-call identity example: the first result is precise, the second
    /// merges because both arguments share the single abstract address for
    /// the identity's parameter.
    #[test]
    fn monovariant_flow_sets_on_p_id() {
        let p = prog(corpus::P_ID);
        let lam_p = lam_by_param(&p, "p");
        let lam_q = lam_by_param(&p, "q");
        let r = AnalysisResult::unwidened(&p, AllocPolicy::ZeroCfa).unwrap();
        assert_eq!(r.flow_set_by_name(&p, "a").unwrap(), BTreeSet::from([lam_p]));
        assert_eq!(
            r.flow_set_by_name(&p, "b").unwrap(),
            BTreeSet::from([lam_p, lam_q]),
            "the second call reads the merged parameter flow"
        );

        // the widened analysis merges both results through the global store
        let w = AnalysisResult::widened(&p, AllocPolicy::ZeroCfa).unwrap();
        assert_eq!(
            w.flow_set_by_name(&p, "a").unwrap(),
            BTreeSet::from([lam_p, lam_q])
        );
        assert_eq!(
            w.flow_set_by_name(&p, "b").unwrap(),
            BTreeSet::from([lam_p, lam_q])
        );
    }

    /// One call-site of context (or marking the identity let-bound for
    /// polymorphic splitting) separates the two parameter addresses and
    /// recovers exact singleton flow sets, widened or not.
    #[test]
    fn context_sensitive_flow_sets_on_p_id_are_exact() {
        let p = prog(corpus::P_ID);
        let lam_p = lam_by_param(&p, "p");
        let lam_q = lam_by_param(&p, "q");
        let lam_x = lam_by_param(&p, "x");
        let policies = [
            AllocPolicy::OneCfa,
            AllocPolicy::kcfa(1),
            AllocPolicy::PolyCfa(BTreeSet::from([lam_x])),
        ];
        for policy in policies {
            for result in [
                AnalysisResult::unwidened(&p, policy.clone()).unwrap(),
                AnalysisResult::widened(&p, policy.clone()).unwrap(),
            ] {
                assert_eq!(
                    result.flow_set_by_name(&p, "a").unwrap(),
                    BTreeSet::from([lam_p]),
                    "{policy:?}"
                );
                assert_eq!(
                    result.flow_set_by_name(&p, "b").unwrap(),
                    BTreeSet::from([lam_q]),
                    "{policy:?}"
                );
            }
        }
    }

    #[test]
    fn flow_set_rejects_unbound_names() {
        let p = prog(corpus::P_ID);
        let r = AnalysisResult::unwidened(&p, AllocPolicy::ZeroCfa).unwrap();
        assert!(matches!(
            r.flow_set_by_name(&p, "nosuch"),
            Err(QueryError::UnknownVariable(_))
        ));
    }

    #[test]
    fn may_call_on_p_id() {
        let p = prog(corpus::P_ID);
        let lam_p = lam_by_param(&p, "p");
        let lam_x = lam_by_param(&p, "x");
        // the first call to id: `(id (λ (p) p))`
        let call_a = p
            .expr_labels()
            .find(|l| match p.expr(*l) {
                ExprKind::Call { arg: Atom::Lam(a), .. } => *a == lam_p,
                _ => false,
            })
            .unwrap();
        for result in [
            AnalysisResult::unwidened(&p, AllocPolicy::ZeroCfa).unwrap(),
            AnalysisResult::widened(&p, AllocPolicy::ZeroCfa).unwrap(),
        ] {
            assert!(result.may_call(&p, call_a, lam_x).unwrap());
            assert!(!result.may_call(&p, call_a, lam_p).unwrap());
        }

        // the operator literal of a tail call may trivially be called
        let pt = prog(corpus::P_TAIL);
        let rt = AnalysisResult::unwidened(&pt, AllocPolicy::ZeroCfa).unwrap();
        let lam_op = pt.lam_labels().next().unwrap();
        assert!(rt.may_call(&pt, pt.root(), lam_op).unwrap());

        // label errors
        let r = AnalysisResult::unwidened(&p, AllocPolicy::ZeroCfa).unwrap();
        assert!(matches!(
            r.may_call(&p, lam_x, lam_x),
            Err(QueryError::UnknownLabel(_))
        ));
        assert!(matches!(
            r.may_call(&p, call_a, call_a),
            Err(QueryError::UnknownLabel(_))
        ));
    }

    #[test]
    fn escape_analysis_examples() {
        // immediately-invoked operator: safe; the never-invoked argument is
        // vacuously safe
        let pt = prog(corpus::P_TAIL);
        let rt = AnalysisResult::unwidened(&pt, AllocPolicy::ZeroCfa).unwrap();
        for lam in pt.lam_labels() {
            assert_eq!(rt.escape_analysis(&pt, lam).unwrap(), Escape::StackSafe);
        }

        // a closure returned through a pop and invoked afterwards escapes
        let pe = prog(corpus::P_ESCAPE);
        let lam_z = lam_by_param(&pe, "z");
        let lam_w = lam_by_param(&pe, "w");
        for result in [
            AnalysisResult::unwidened(&pe, AllocPolicy::ZeroCfa).unwrap(),
            AnalysisResult::widened(&pe, AllocPolicy::ZeroCfa).unwrap(),
        ] {
            assert_eq!(result.escape_analysis(&pe, lam_z).unwrap(), Escape::MayEscape);
            assert_eq!(result.escape_analysis(&pe, lam_w).unwrap(), Escape::StackSafe);
        }
    }

    #[test]
    fn dependence_frames_examples() {
        // final state of the single tail call: empty stack, no frames
        let pt = prog(corpus::P_TAIL);
        let rt = AnalysisResult::unwidened(&pt, AllocPolicy::ZeroCfa).unwrap();
        let AnalysisResult::Unwidened { analysis, .. } = &rt else { unreachable!() };
        let final_state = analysis
            .node_states()
            .find(|q| matches!(pt.expr(q.expr), ExprKind::Return(_)))
            .unwrap()
            .clone();
        assert!(rt.dependence_frames(&final_state).unwrap().is_empty());

        // inside the first call of P_ID, the frame binding `a` is live
        let p = prog(corpus::P_ID);
        let r = AnalysisResult::unwidened(&p, AllocPolicy::ZeroCfa).unwrap();
        let AnalysisResult::Unwidened { analysis, .. } = &r else { unreachable!() };
        let a_var = p.binder_by_name("a").unwrap();
        let in_first_call = analysis
            .node_states()
            .filter(|q| matches!(p.expr(q.expr), ExprKind::Return(Atom::Var(_))))
            .find(|q| {
                let frames = r.dependence_frames(q).unwrap();
                frames.iter().any(|f| f.var == a_var)
            });
        assert!(in_first_call.is_some(), "some return state sees the `a` frame");

        // inside the doubly-nested call of P_NEST both frames are live
        let pn = prog(corpus::P_NEST);
        let rn = AnalysisResult::unwidened(&pn, AllocPolicy::ZeroCfa).unwrap();
        let AnalysisResult::Unwidened { analysis, .. } = &rn else { unreachable!() };
        let inner_var = pn.binder_by_name("inner").unwrap();
        let outer_var = pn.binder_by_name("outer").unwrap();
        let x_ret = analysis
            .node_states()
            .find(|q| {
                let frames = rn.dependence_frames(q).unwrap();
                frames.iter().any(|f| f.var == inner_var)
            })
            .expect("a state inside the inner call");
        let frames = rn.dependence_frames(x_ret).unwrap();
        let vars: BTreeSet<_> = frames.iter().map(|f| f.var).collect();
        assert_eq!(vars, BTreeSet::from([inner_var, outer_var]));

        // unknown states are rejected
        let foreign = ControlState {
            expr: Label(999),
            env: AEnv::new(),
            store: AStore::new(),
            ctx: Vec::new(),
        };
        assert!(rt.dependence_frames(&foreign).is_err());
    }

    #[test]
    fn flows_json_shape() {
        let p = prog(corpus::P_TAIL);
        let r = AnalysisResult::widened(&p, AllocPolicy::ZeroCfa).unwrap();
        let v = flows_json(&p, &r);
        assert!(v["flows"].is_object());
        assert!(v["escape"].is_object());
        let lam_y = p.lam_labels().nth(1).unwrap();
        assert_eq!(v["flows"]["x"], serde_json::json!([lam_y.0]));
        assert_eq!(v["escape"][p.lam_labels().next().unwrap().to_string()], "StackSafe");
    }
}
