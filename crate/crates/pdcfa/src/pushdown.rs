//! Rooted pushdown systems derived from the abstracted CESK machine.
//!
//! A control state is an abstract configuration minus its continuation; the
//! continuation lives on the pushdown stack as a sequence of frames. The
//! system is represented intensionally: the full control-state space is
//! exponential, so transitions are enumerated on demand.
//!
//! ε and push transitions are stack-independent and come from
//! [`Rpds::successors`]; pop transitions depend on the frame that may be on
//! top of the stack and are exposed through [`Rpds::pop_successors`], which
//! is exactly the question the ε-closure graph of the analysis engine can
//! answer.

use crate::abstracted::{
    ainject, astep, AConf, AEnv, AFrame, AStore, AbstractError, AllocPolicy, Ctx,
};
use crate::syntax::{ExprKind, Label, Program};

/// A stack action: no change, push a frame, or pop a frame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StackAction {
    Eps,
    Push(AFrame),
    Pop(AFrame),
}

/// An abstract configuration with the continuation stripped out.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControlState {
    pub expr: Label,
    pub env: AEnv,
    pub store: AStore,
    pub ctx: Ctx,
}

impl ControlState {
    pub fn from_conf(conf: &AConf) -> Self {
        ControlState {
            expr: conf.expr,
            env: conf.env.clone(),
            store: conf.store.clone(),
            ctx: conf.ctx.clone(),
        }
    }

    fn to_conf(&self, kont: Vec<AFrame>) -> AConf {
        AConf {
            expr: self.expr,
            env: self.env.clone(),
            store: self.store.clone(),
            kont,
            ctx: self.ctx.clone(),
        }
    }
}

/// A rooted pushdown system for one program under one allocation policy.
pub struct Rpds<'p> {
    prog: &'p Program,
    policy: AllocPolicy,
    root: ControlState,
}

impl<'p> Rpds<'p> {
    /// Convert a closed program into its rooted pushdown system.
    pub fn new(prog: &'p Program, policy: AllocPolicy) -> Result<Self, AbstractError> {
        let root = ControlState::from_conf(&ainject(prog)?);
        Ok(Rpds { prog, policy, root })
    }

    pub fn program(&self) -> &'p Program {
        self.prog
    }

    pub fn policy(&self) -> &AllocPolicy {
        &self.policy
    }

    pub fn root(&self) -> &ControlState {
        &self.root
    }

    /// Stack-independent successors: ε edges from tail calls and push edges
    /// from lets. Return states have no successors here; their pop edges
    /// come from [`Rpds::pop_successors`].
    pub fn successors(&self, q: &ControlState) -> Vec<(StackAction, ControlState)> {
        match self.prog.expr(q.expr) {
            ExprKind::Return(_) => Vec::new(),
            _ => astep(self.prog, &self.policy, &q.to_conf(Vec::new()))
                .into_iter()
                .map(|succ| {
                    let action = match succ.kont.len() {
                        0 => StackAction::Eps,
                        1 => StackAction::Push(succ.kont[0].clone()),
                        n => unreachable!("one step pushed {n} frames"),
                    };
                    (action, ControlState::from_conf(&succ))
                })
                .collect(),
        }
    }

    /// States reached by popping `frame` at `q`. Empty unless `q` is a
    /// return state whose atom evaluates to a non-empty flow set.
    pub fn pop_successors(&self, q: &ControlState, frame: &AFrame) -> Vec<ControlState> {
        match self.prog.expr(q.expr) {
            ExprKind::Return(_) => astep(self.prog, &self.policy, &q.to_conf(vec![frame.clone()]))
                .into_iter()
                .map(|succ| {
                    debug_assert!(succ.kont.is_empty());
                    ControlState::from_conf(&succ)
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// A pushdown configuration: a control state plus an explicit stack (top
/// frame last).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PdsConfig {
    pub state: ControlState,
    pub stack: Vec<AFrame>,
}

/// Apply one labeled transition to a configuration. A pop succeeds only when
/// the popped frame equals the top of the stack.
pub fn apply_action(
    config: &PdsConfig,
    action: &StackAction,
    target: &ControlState,
) -> Option<PdsConfig> {
    let mut stack = config.stack.clone();
    match action {
        StackAction::Eps => {}
        StackAction::Push(f) => stack.push(f.clone()),
        StackAction::Pop(f) => {
            if stack.last() != Some(f) {
                return None;
            }
            stack.pop();
        }
    }
    Some(PdsConfig {
        state: target.clone(),
        stack,
    })
}
