//! The concrete CESK machine for ANF programs.
//!
//! Configurations pair an expression with an environment, a store and a
//! stack of let-continuation frames. The machine is deterministic; it serves
//! as the ground-truth semantics the abstract analyses are checked against.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{Atom, ExprKind, Label, Program, VarId};

/// A concrete store address. Allocation picks the lowest unused address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Addr(pub u64);

pub type Env = BTreeMap<VarId, Addr>;

/// A closure: a λ-term paired with the environment it was created in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Clo {
    pub lam: Label,
    pub env: Env,
}

pub type Store = BTreeMap<Addr, Clo>;

/// A let-continuation frame `(v, e, ρ)`: bind `v`, then continue with `e`
/// under `ρ`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Frame {
    pub var: VarId,
    pub body: Label,
    pub env: Env,
}

/// Continuation stack; the top frame is the last element.
pub type Kont = Vec<Frame>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conf {
    pub expr: Label,
    pub env: Env,
    pub store: Store,
    pub kont: Kont,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("program has free variables: {0:?}")]
    OpenProgram(Vec<String>),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("dangling address {0:?}")]
    DanglingAddress(Addr),
}

/// Pair a closed program with empty environment, store and stack.
pub fn inject(prog: &Program) -> Result<Conf, MachineError> {
    if !prog.is_closed() {
        let names = prog
            .free_vars()
            .into_iter()
            .map(|v| prog.var_name(v).to_string())
            .collect();
        return Err(MachineError::OpenProgram(names));
    }
    Ok(Conf {
        expr: prog.root(),
        env: Env::new(),
        store: Store::new(),
        kont: Kont::new(),
    })
}

/// Value of an atomic expression: λ-terms close over the current
/// environment, variables are looked up through it.
pub fn atomic_eval(
    prog: &Program,
    atom: &Atom,
    env: &Env,
    store: &Store,
) -> Result<Clo, MachineError> {
    match atom {
        Atom::Lam(l) => Ok(Clo {
            lam: *l,
            env: env.clone(),
        }),
        Atom::Var(v) => {
            let addr = env
                .get(v)
                .ok_or_else(|| MachineError::UnboundVariable(prog.var_name(*v).to_string()))?;
            store
                .get(addr)
                .cloned()
                .ok_or(MachineError::DanglingAddress(*addr))
        }
    }
}

/// Lowest unused address: 0 for the empty store, `1 + max(dom σ)` otherwise.
pub fn alloc(_var: VarId, conf: &Conf) -> Addr {
    match conf.store.keys().next_back() {
        Some(Addr(n)) => Addr(n + 1),
        None => Addr(0),
    }
}

/// One machine step. Returns `None` exactly for final states: a return
/// expression with an empty stack.
pub fn step(prog: &Program, conf: &Conf) -> Result<Option<Conf>, MachineError> {
    match prog.expr(conf.expr) {
        // Tail call: enter the closure's body, binding the argument.
        ExprKind::Call { fun, arg } => {
            let clo = atomic_eval(prog, fun, &conf.env, &conf.store)?;
            let value = atomic_eval(prog, arg, &conf.env, &conf.store)?;
            let (param, body) = prog.lam(clo.lam);
            let addr = alloc(param, conf);
            let mut env = clo.env;
            env.insert(param, addr);
            let mut store = conf.store.clone();
            store.insert(addr, value);
            Ok(Some(Conf {
                expr: body,
                env,
                store,
                kont: conf.kont.clone(),
            }))
        }
        // Non-tail call: push a frame and evaluate the call.
        ExprKind::LetCall { var, call, body } => {
            let mut kont = conf.kont.clone();
            kont.push(Frame {
                var: *var,
                body: *body,
                env: conf.env.clone(),
            });
            Ok(Some(Conf {
                expr: *call,
                env: conf.env.clone(),
                store: conf.store.clone(),
                kont,
            }))
        }
        // Return: pop a frame and bind its variable to the returned value.
        ExprKind::Return(atom) => {
            let mut kont = conf.kont.clone();
            let Some(frame) = kont.pop() else {
                return Ok(None);
            };
            let value = atomic_eval(prog, atom, &conf.env, &conf.store)?;
            let addr = alloc(frame.var, conf);
            let mut env = frame.env;
            env.insert(frame.var, addr);
            let mut store = conf.store.clone();
            store.insert(addr, value);
            Ok(Some(Conf {
                expr: frame.body,
                env,
                store,
                kont,
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    /// Reached a return expression with an empty stack.
    Final,
    /// Stopped after the step budget was exhausted.
    StepLimit,
    /// The machine got stuck (only possible on open or malformed inputs).
    Failed(MachineError),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// All visited configurations, starting with the injected one.
    pub trace: Vec<Conf>,
    pub status: RunStatus,
}

impl RunOutcome {
    pub fn last(&self) -> &Conf {
        self.trace.last().expect("trace is never empty")
    }

    /// The final value for `Final` runs.
    pub fn final_value(&self, prog: &Program) -> Option<Clo> {
        if self.status != RunStatus::Final {
            return None;
        }
        let conf = self.last();
        match prog.expr(conf.expr) {
            ExprKind::Return(atom) => atomic_eval(prog, atom, &conf.env, &conf.store).ok(),
            _ => None,
        }
    }
}

/// Run the machine for at most `max_steps` steps.
pub fn run(prog: &Program, max_steps: usize) -> Result<RunOutcome, MachineError> {
    let mut trace = vec![inject(prog)?];
    for _ in 0..max_steps {
        match step(prog, trace.last().unwrap()) {
            Ok(Some(next)) => trace.push(next),
            Ok(None) => {
                return Ok(RunOutcome {
                    trace,
                    status: RunStatus::Final,
                })
            }
            Err(e) => {
                return Ok(RunOutcome {
                    trace,
                    status: RunStatus::Failed(e),
                })
            }
        }
    }
    // One more probe so that a run that lands exactly on a final state at the
    // budget reports Final rather than StepLimit.
    let status = match step(prog, trace.last().unwrap()) {
        Ok(None) => RunStatus::Final,
        _ => RunStatus::StepLimit,
    };
    Ok(RunOutcome { trace, status })
}

/// One line per configuration: `step-index expr-label kont-depth store-size`.
pub fn format_trace(trace: &[Conf]) -> String {
    let mut out = String::new();
    for (i, conf) in trace.iter().enumerate() {
        writeln!(
            out,
            "{} {} {} {}",
            i,
            conf.expr,
            conf.kont.len(),
            conf.store.len()
        )
        .unwrap();
    }
    out
}
