//! The abstracted CESK machine: addresses drawn from a finite set chosen by
//! an allocation policy, a store mapping each address to a *set* of
//! closures, and an exact (unabstracted) continuation stack.
//!
//! The allocation policy is the polyvariance knob: monovariant analysis uses
//! one address per variable, context-sensitive variants pair the variable
//! with expression labels or call histories.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::concrete;
use crate::syntax::{Atom, ExprKind, Label, Program, VarId};

/// An abstract address. The variant in use is uniform across one analysis
/// run, fixed by the [`AllocPolicy`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AAddr {
    /// Monovariant: the variable itself.
    Mono(VarId),
    /// The variable paired with the label of the allocating expression.
    Ctx1(VarId, Label),
    /// The variable paired with the most recent call-site labels, newest
    /// first, at most `k` of them.
    CtxK(VarId, Vec<Label>),
    /// Polymorphic splitting, non-let-bound operator.
    Poly(VarId),
    /// Polymorphic splitting at a call whose operator λ is marked let-bound.
    PolyCtx(VarId, Label),
}

impl AAddr {
    /// The variable component, shared by every variant.
    pub fn var(&self) -> VarId {
        match self {
            AAddr::Mono(v)
            | AAddr::Ctx1(v, _)
            | AAddr::CtxK(v, _)
            | AAddr::Poly(v)
            | AAddr::PolyCtx(v, _) => *v,
        }
    }
}

pub type AEnv = BTreeMap<VarId, AAddr>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AClo {
    pub lam: Label,
    pub env: AEnv,
}

/// Abstract store. Canonical: no address maps to an empty flow set.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AStore(BTreeMap<AAddr, BTreeSet<AClo>>);

impl AStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, addr: &AAddr) -> Option<&BTreeSet<AClo>> {
        self.0.get(addr)
    }

    /// Flow set at an address; missing addresses read as the empty set.
    pub fn flows(&self, addr: &AAddr) -> BTreeSet<AClo> {
        self.0.get(addr).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AAddr, &BTreeSet<AClo>)> {
        self.0.iter()
    }

    /// Join a single binding into the store. Empty sets are dropped to keep
    /// the representation canonical.
    pub fn join_binding(&mut self, addr: AAddr, clos: BTreeSet<AClo>) {
        if clos.is_empty() {
            return;
        }
        self.0.entry(addr).or_default().extend(clos);
    }

    pub fn joined(&self, addr: AAddr, clos: BTreeSet<AClo>) -> AStore {
        let mut out = self.clone();
        out.join_binding(addr, clos);
        out
    }
}

/// Pointwise union of two stores.
pub fn store_join(a: &AStore, b: &AStore) -> AStore {
    let mut out = a.clone();
    for (addr, clos) in b.iter() {
        out.join_binding(addr.clone(), clos.clone());
    }
    out
}

/// An abstract let-continuation frame.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AFrame {
    pub var: VarId,
    pub body: Label,
    pub env: AEnv,
}

/// Continuation stack; the top frame is the last element.
pub type AKont = Vec<AFrame>;

/// Call-site history for k-CFA, newest label first, already truncated.
pub type Ctx = Vec<Label>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AConf {
    pub expr: Label,
    pub env: AEnv,
    pub store: AStore,
    pub kont: AKont,
    /// k-CFA call history; empty under every other policy.
    pub ctx: Ctx,
}

/// Polyvariance of the analysis: how abstract addresses are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AllocPolicy {
    ZeroCfa,
    OneCfa,
    KCfa(u32),
    /// Labels of λ-terms marked let-bound; calls applying one of these split
    /// per call site, everything else is monovariant.
    PolyCfa(BTreeSet<Label>),
}

impl AllocPolicy {
    /// `k = 0` carries no history and is the monovariant analysis.
    pub fn kcfa(k: u32) -> Self {
        if k == 0 {
            AllocPolicy::ZeroCfa
        } else {
            AllocPolicy::KCfa(k)
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AbstractError {
    #[error("program has free variables: {0:?}")]
    OpenProgram(Vec<String>),
    #[error("concrete address {0:?} is not covered by the address map")]
    UncoveredAddress(concrete::Addr),
}

/// Pair a closed program with empty environment, store, stack and history.
pub fn ainject(prog: &Program) -> Result<AConf, AbstractError> {
    if !prog.is_closed() {
        let names = prog
            .free_vars()
            .into_iter()
            .map(|v| prog.var_name(v).to_string())
            .collect();
        return Err(AbstractError::OpenProgram(names));
    }
    Ok(AConf {
        expr: prog.root(),
        env: AEnv::new(),
        store: AStore::new(),
        kont: AKont::new(),
        ctx: Ctx::new(),
    })
}

/// Value of an atomic expression, as a set of closures. Missing variables or
/// addresses read as the empty set: the machine may probe contexts that are
/// not actually reachable, and an empty result simply produces no successor.
pub fn aatomic_eval(atom: &Atom, env: &AEnv, store: &AStore) -> BTreeSet<AClo> {
    match atom {
        Atom::Lam(l) => BTreeSet::from([AClo {
            lam: *l,
            env: env.clone(),
        }]),
        Atom::Var(v) => match env.get(v) {
            Some(addr) => store.flows(addr),
            None => BTreeSet::new(),
        },
    }
}

/// Choose the abstract address for binding `var` in configuration `conf`.
///
/// `applied` is the λ being invoked when the binding happens at a call; it
/// feeds the let-bound check of polymorphic splitting and is `None` at
/// return bindings.
pub fn aalloc(policy: &AllocPolicy, var: VarId, conf: &AConf, applied: Option<Label>) -> AAddr {
    match policy {
        AllocPolicy::ZeroCfa => AAddr::Mono(var),
        AllocPolicy::OneCfa => AAddr::Ctx1(var, conf.expr),
        AllocPolicy::KCfa(k) => {
            let take = (*k as usize).min(conf.ctx.len());
            AAddr::CtxK(var, conf.ctx[..take].to_vec())
        }
        AllocPolicy::PolyCfa(let_bound) => match applied {
            Some(lam) if let_bound.contains(&lam) => AAddr::PolyCtx(var, conf.expr),
            _ => AAddr::Poly(var),
        },
    }
}

/// Extend the k-CFA history with a call-site label; identity for the other
/// policies, which keep an empty history.
fn advance_ctx(policy: &AllocPolicy, ctx: &Ctx, call: Label) -> Ctx {
    match policy {
        AllocPolicy::KCfa(k) => {
            let mut out = Vec::with_capacity(*k as usize);
            out.push(call);
            out.extend(ctx.iter().copied());
            out.truncate(*k as usize);
            out
        }
        _ => Ctx::new(),
    }
}

/// One abstract step. A call may fork, one successor per closure the
/// operator evaluates to; a transition that needs an empty flow set has no
/// successor.
pub fn astep(prog: &Program, policy: &AllocPolicy, conf: &AConf) -> BTreeSet<AConf> {
    let mut out = BTreeSet::new();
    match prog.expr(conf.expr) {
        ExprKind::Call { fun, arg } => {
            let arg_flows = aatomic_eval(arg, &conf.env, &conf.store);
            if arg_flows.is_empty() {
                return out;
            }
            let ctx = advance_ctx(policy, &conf.ctx, conf.expr);
            for clo in aatomic_eval(fun, &conf.env, &conf.store) {
                let (param, body) = prog.lam(clo.lam);
                let addr = aalloc(policy, param, conf, Some(clo.lam));
                let mut env = clo.env;
                env.insert(param, addr.clone());
                out.insert(AConf {
                    expr: body,
                    env,
                    store: conf.store.joined(addr, arg_flows.clone()),
                    kont: conf.kont.clone(),
                    ctx: ctx.clone(),
                });
            }
        }
        ExprKind::LetCall { var, call, body } => {
            let mut kont = conf.kont.clone();
            kont.push(AFrame {
                var: *var,
                body: *body,
                env: conf.env.clone(),
            });
            out.insert(AConf {
                expr: *call,
                env: conf.env.clone(),
                store: conf.store.clone(),
                kont,
                ctx: conf.ctx.clone(),
            });
        }
        ExprKind::Return(atom) => {
            let mut kont = conf.kont.clone();
            let Some(frame) = kont.pop() else {
                return out;
            };
            let values = aatomic_eval(atom, &conf.env, &conf.store);
            if values.is_empty() {
                return out;
            }
            let addr = aalloc(policy, frame.var, conf, None);
            let mut env = frame.env;
            env.insert(frame.var, addr.clone());
            out.insert(AConf {
                expr: frame.body,
                env,
                store: conf.store.joined(addr, values),
                kont,
                ctx: conf.ctx.clone(),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Partial orders
// ---------------------------------------------------------------------------

/// Environments order pointwise: every binding of the smaller one is present
/// and equal in the larger.
pub fn leq_env(a: &AEnv, b: &AEnv) -> bool {
    a.iter().all(|(v, addr)| b.get(v) == Some(addr))
}

pub fn leq_clo(a: &AClo, b: &AClo) -> bool {
    a.lam == b.lam && leq_env(&a.env, &b.env)
}

fn leq_flow_set(a: &BTreeSet<AClo>, b: &BTreeSet<AClo>) -> bool {
    a.iter().all(|c| b.contains(c))
}

/// Stores order pointwise over flow sets.
pub fn leq_store(a: &AStore, b: &AStore) -> bool {
    a.iter().all(|(addr, clos)| match b.get(addr) {
        Some(other) => leq_flow_set(clos, other),
        None => false,
    })
}

pub fn leq_frame(a: &AFrame, b: &AFrame) -> bool {
    a.var == b.var && a.body == b.body && leq_env(&a.env, &b.env)
}

/// Continuations order elementwise and only at equal length.
pub fn leq_kont(a: &AKont, b: &AKont) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| leq_frame(x, y))
}

pub fn leq_conf(a: &AConf, b: &AConf) -> bool {
    a.expr == b.expr
        && a.ctx == b.ctx
        && leq_env(&a.env, &b.env)
        && leq_store(&a.store, &b.store)
        && leq_kont(&a.kont, &b.kont)
}

// ---------------------------------------------------------------------------
// Abstraction map
// ---------------------------------------------------------------------------

pub type AddrMap = BTreeMap<concrete::Addr, AAddr>;

fn abstract_env(env: &concrete::Env, map: &AddrMap) -> Result<AEnv, AbstractError> {
    env.iter()
        .map(|(v, a)| {
            map.get(a)
                .cloned()
                .map(|aa| (*v, aa))
                .ok_or(AbstractError::UncoveredAddress(*a))
        })
        .collect()
}

fn abstract_clo(clo: &concrete::Clo, map: &AddrMap) -> Result<AClo, AbstractError> {
    Ok(AClo {
        lam: clo.lam,
        env: abstract_env(&clo.env, map)?,
    })
}

/// Structural abstraction of a concrete configuration: environments compose
/// with the address map, the store groups bindings by abstract address and
/// joins them into flow sets, frames map elementwise. `ctx` supplies the
/// call history the abstract run would carry at this point.
pub fn abstract_conf(
    conf: &concrete::Conf,
    map: &AddrMap,
    ctx: Ctx,
) -> Result<AConf, AbstractError> {
    let env = abstract_env(&conf.env, map)?;
    let mut store = AStore::new();
    for (addr, clo) in &conf.store {
        let aaddr = map
            .get(addr)
            .cloned()
            .ok_or(AbstractError::UncoveredAddress(*addr))?;
        store.join_binding(aaddr, BTreeSet::from([abstract_clo(clo, map)?]));
    }
    let kont = conf
        .kont
        .iter()
        .map(|f| {
            Ok(AFrame {
                var: f.var,
                body: f.body,
                env: abstract_env(&f.env, map)?,
            })
        })
        .collect::<Result<AKont, AbstractError>>()?;
    Ok(AConf {
        expr: conf.expr,
        env,
        store,
        kont,
        ctx,
    })
}
