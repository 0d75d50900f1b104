//! A-normal form syntax: parsing, labeling, scope resolution and printing.
//!
//! The analyzed language is the unary λ-calculus in ANF:
//!
//! ```text
//! e ::= (let ((v call)) e)   non-tail call
//!     | call                 tail call
//!     | atom                 return
//! call ::= (f a)             f, a atomic
//! atom ::= v | (λ (v) e)
//! ```
//!
//! Every expression and λ-term carries a [`Label`], assigned in leftmost
//! depth-first order starting at 0. Labels are stable: parsing the output of
//! [`Program::to_source`] reproduces the same labeled tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Identifies one AST node (expression or λ-term) within a [`Program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies one variable. Distinct binders always get distinct ids, even
/// when they share a source name; free variables get one id per name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    /// Label of the λ or let expression that binds this variable; `None` for
    /// free variables.
    pub binder: Option<Label>,
}

/// An atomic expression: a variable reference or a literal λ-term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(VarId),
    Lam(Label),
}

/// The three expression forms of ANF. A call in tail position is itself an
/// expression; the call bound by a `let` is stored as a `Call` expression
/// node so the machine can transfer control to it directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    LetCall { var: VarId, call: Label, body: Label },
    Call { fun: Atom, arg: Atom },
    Return(Atom),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Expr(ExprKind),
    Lam { param: VarId, body: Label },
}

/// A parsed, labeled, scope-resolved program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    nodes: Vec<Node>,
    vars: Vec<VarInfo>,
    root: Label,
}

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    /// Malformed s-expression or token.
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    /// A well-formed s-expression that falls outside the ANF grammar.
    #[error("not ANF at {pos}: {msg}")]
    NotAnf { pos: Pos, msg: String },
}

impl ParseError {
    pub fn is_not_anf(&self) -> bool {
        matches!(self, ParseError::NotAnf { .. })
    }

    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::NotAnf { pos, .. } => *pos,
        }
    }
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Sym(String),
}

fn is_sym_char(c: char) -> bool {
    !c.is_whitespace() && c != '(' && c != ')' && c != ';'
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            _ if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                // comment to end of line
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                toks.push((Tok::LParen, pos));
            }
            ')' => {
                chars.next();
                col += 1;
                toks.push((Tok::RParen, pos));
            }
            _ if is_sym_char(c) => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if is_sym_char(c) {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if s.contains('#') {
                    // reserved for the binder-uniquing pass
                    return Err(ParseError::Syntax {
                        pos,
                        msg: format!("identifier `{s}` contains reserved character `#`"),
                    });
                }
                toks.push((Tok::Sym(s), pos));
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// S-expressions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Sexp {
    Sym(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Sym(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn parse_sexp(toks: &[(Tok, Pos)], at: &mut usize) -> Result<Sexp, ParseError> {
    let eof = Pos { line: 0, col: 0 };
    match toks.get(*at) {
        None => Err(ParseError::Syntax {
            pos: toks.last().map(|t| t.1).unwrap_or(eof),
            msg: "unexpected end of input".into(),
        }),
        Some((Tok::Sym(s), pos)) => {
            *at += 1;
            Ok(Sexp::Sym(s.clone(), *pos))
        }
        Some((Tok::RParen, pos)) => Err(ParseError::Syntax {
            pos: *pos,
            msg: "unexpected `)`".into(),
        }),
        Some((Tok::LParen, pos)) => {
            *at += 1;
            let mut items = Vec::new();
            loop {
                match toks.get(*at) {
                    None => {
                        return Err(ParseError::Syntax {
                            pos: *pos,
                            msg: "unclosed `(`".into(),
                        })
                    }
                    Some((Tok::RParen, _)) => {
                        *at += 1;
                        return Ok(Sexp::List(items, *pos));
                    }
                    _ => items.push(parse_sexp(toks, at)?),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ANF parsing with scope resolution and label assignment
// ---------------------------------------------------------------------------

struct Builder {
    nodes: Vec<Node>,
    vars: Vec<VarInfo>,
    /// lexical scope stack: innermost binding last
    scope: Vec<(String, VarId)>,
    /// one id per distinct free name
    free: BTreeMap<String, VarId>,
}

fn is_lambda_kw(s: &str) -> bool {
    s == "λ" || s == "lambda"
}

impl Builder {
    fn reserve(&mut self) -> Label {
        let l = Label(self.nodes.len() as u32);
        self.nodes.push(Node::Expr(ExprKind::Return(Atom::Var(VarId(0)))));
        l
    }

    fn fresh_var(&mut self, name: &str, binder: Option<Label>) -> VarId {
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: name.to_string(),
            binder,
        });
        id
    }

    fn lookup(&mut self, name: &str) -> VarId {
        for (n, id) in self.scope.iter().rev() {
            if n == name {
                return *id;
            }
        }
        if let Some(id) = self.free.get(name) {
            return *id;
        }
        let id = self.fresh_var(name, None);
        self.free.insert(name.to_string(), id);
        id
    }

    fn sym_of(sexp: &Sexp, what: &str) -> Result<(String, Pos), ParseError> {
        match sexp {
            Sexp::Sym(s, p) => Ok((s.clone(), *p)),
            Sexp::List(_, p) => Err(ParseError::Syntax {
                pos: *p,
                msg: format!("expected {what}, found a list"),
            }),
        }
    }

    /// Parse an atom. Lambdas are labeled; variable references resolve in the
    /// current scope.
    fn atom(&mut self, sexp: &Sexp) -> Result<Atom, ParseError> {
        match sexp {
            Sexp::Sym(name, _) => {
                if is_lambda_kw(name) || name == "let" {
                    return Err(ParseError::Syntax {
                        pos: sexp.pos(),
                        msg: format!("keyword `{name}` used as a variable"),
                    });
                }
                Ok(Atom::Var(self.lookup(name)))
            }
            Sexp::List(items, pos) => match items.first() {
                Some(Sexp::Sym(kw, _)) if is_lambda_kw(kw) => Ok(Atom::Lam(self.lam(items, *pos)?)),
                _ => Err(ParseError::NotAnf {
                    pos: *pos,
                    msg: "operand must be atomic (a variable or a λ-term)".into(),
                }),
            },
        }
    }

    fn lam(&mut self, items: &[Sexp], pos: Pos) -> Result<Label, ParseError> {
        if items.len() != 3 {
            return Err(ParseError::Syntax {
                pos,
                msg: "λ expects a parameter list and a body".into(),
            });
        }
        let params = match &items[1] {
            Sexp::List(ps, _) => ps,
            Sexp::Sym(_, p) => {
                return Err(ParseError::Syntax {
                    pos: *p,
                    msg: "λ parameter list must be parenthesized".into(),
                })
            }
        };
        if params.len() != 1 {
            return Err(ParseError::NotAnf {
                pos,
                msg: format!("λ takes exactly one parameter, found {}", params.len()),
            });
        }
        let (pname, _) = Self::sym_of(&params[0], "a parameter name")?;
        let label = self.reserve();
        let param = self.fresh_var(&pname, Some(label));
        self.scope.push((pname, param));
        let body = self.expr(&items[2])?;
        self.scope.pop();
        self.nodes[label.0 as usize] = Node::Lam { param, body };
        Ok(label)
    }

    /// Parse a call form `(f a)`; the call becomes an expression node.
    fn call(&mut self, items: &[Sexp], pos: Pos) -> Result<Label, ParseError> {
        if items.len() != 2 {
            return Err(ParseError::NotAnf {
                pos,
                msg: format!("calls are unary, found {} operands", items.len() - 1),
            });
        }
        let label = self.reserve();
        let fun = self.atom(&items[0])?;
        let arg = self.atom(&items[1])?;
        self.nodes[label.0 as usize] = Node::Expr(ExprKind::Call { fun, arg });
        Ok(label)
    }

    fn expr(&mut self, sexp: &Sexp) -> Result<Label, ParseError> {
        match sexp {
            Sexp::Sym(..) => {
                let label = self.reserve();
                let atom = self.atom(sexp)?;
                self.nodes[label.0 as usize] = Node::Expr(ExprKind::Return(atom));
                Ok(label)
            }
            Sexp::List(items, pos) => match items.first() {
                None => Err(ParseError::Syntax {
                    pos: *pos,
                    msg: "empty form".into(),
                }),
                Some(Sexp::Sym(kw, _)) if is_lambda_kw(kw) => {
                    let label = self.reserve();
                    let lam = self.lam(items, *pos)?;
                    self.nodes[label.0 as usize] = Node::Expr(ExprKind::Return(Atom::Lam(lam)));
                    Ok(label)
                }
                Some(Sexp::Sym(kw, _)) if kw == "let" => self.let_form(items, *pos),
                Some(_) => self.call(items, *pos),
            },
        }
    }

    fn let_form(&mut self, items: &[Sexp], pos: Pos) -> Result<Label, ParseError> {
        if items.len() != 3 {
            return Err(ParseError::Syntax {
                pos,
                msg: "let expects a binding list and a body".into(),
            });
        }
        let bindings = match &items[1] {
            Sexp::List(bs, _) => bs,
            Sexp::Sym(_, p) => {
                return Err(ParseError::Syntax {
                    pos: *p,
                    msg: "let bindings must be parenthesized".into(),
                })
            }
        };
        if bindings.len() != 1 {
            return Err(ParseError::NotAnf {
                pos,
                msg: format!("let binds exactly one variable, found {}", bindings.len()),
            });
        }
        let binding = match &bindings[0] {
            Sexp::List(b, _) if b.len() == 2 => b,
            other => {
                return Err(ParseError::Syntax {
                    pos: other.pos(),
                    msg: "let binding must have the form (v (f a))".into(),
                })
            }
        };
        let (vname, _) = Self::sym_of(&binding[0], "a variable name")?;
        // The bound form must be a call: `(let ((v atom)) e)` is not ANF.
        let call_sexp = &binding[1];
        let call_items = match call_sexp {
            Sexp::List(items, p) => match items.first() {
                Some(Sexp::Sym(kw, _)) if is_lambda_kw(kw) => {
                    return Err(ParseError::NotAnf {
                        pos: *p,
                        msg: "let must bind a call, not a λ-term".into(),
                    })
                }
                Some(Sexp::Sym(kw, _)) if kw == "let" => {
                    return Err(ParseError::NotAnf {
                        pos: *p,
                        msg: "let must bind a call, not a let".into(),
                    })
                }
                _ => items,
            },
            Sexp::Sym(_, p) => {
                return Err(ParseError::NotAnf {
                    pos: *p,
                    msg: "let must bind a call, not an atom".into(),
                })
            }
        };
        let label = self.reserve();
        // Binder id is created before the call is parsed (leftmost-depth-first
        // visit order), but scopes over the body only.
        let var = self.fresh_var(&vname, Some(label));
        let call = self.call(call_items, call_sexp.pos())?;
        self.scope.push((vname, var));
        let body = self.expr(&items[2])?;
        self.scope.pop();
        self.nodes[label.0 as usize] = Node::Expr(ExprKind::LetCall { var, call, body });
        Ok(label)
    }
}

/// Parse one ANF program from source text.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut at = 0;
    let sexp = parse_sexp(&toks, &mut at)?;
    if at != toks.len() {
        return Err(ParseError::Syntax {
            pos: toks[at].1,
            msg: "trailing input after program".into(),
        });
    }
    let mut b = Builder {
        nodes: Vec::new(),
        vars: Vec::new(),
        scope: Vec::new(),
        free: BTreeMap::new(),
    };
    let root = b.expr(&sexp)?;
    Ok(Program {
        nodes: b.nodes,
        vars: b.vars,
        root,
    })
}

impl Program {
    pub fn root(&self) -> Label {
        self.root
    }

    pub fn node(&self, l: Label) -> &Node {
        &self.nodes[l.0 as usize]
    }

    pub fn expr(&self, l: Label) -> &ExprKind {
        match self.node(l) {
            Node::Expr(k) => k,
            Node::Lam { .. } => panic!("label {l} is a λ-term, not an expression"),
        }
    }

    pub fn is_expr(&self, l: Label) -> bool {
        matches!(self.node(l), Node::Expr(_))
    }

    pub fn is_lam(&self, l: Label) -> bool {
        matches!(self.node(l), Node::Lam { .. })
    }

    /// Parameter and body of the λ-term at `l`.
    pub fn lam(&self, l: Label) -> (VarId, Label) {
        match self.node(l) {
            Node::Lam { param, body } => (*param, *body),
            Node::Expr(_) => panic!("label {l} is an expression, not a λ-term"),
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.nodes.len() as u32).map(Label)
    }

    pub fn expr_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels().filter(|l| self.is_expr(*l))
    }

    pub fn lam_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.labels().filter(|l| self.is_lam(*l))
    }

    pub fn var(&self, v: VarId) -> &VarInfo {
        &self.vars[v.0 as usize]
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0 as usize].name
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len() as u32).map(VarId)
    }

    /// All variables introduced by a λ or let.
    pub fn binders(&self) -> impl Iterator<Item = VarId> + '_ {
        self.var_ids().filter(|v| self.var(*v).binder.is_some())
    }

    /// Look up a bound variable by (unique) name.
    pub fn binder_by_name(&self, name: &str) -> Option<VarId> {
        self.binders().find(|v| self.var_name(*v) == name)
    }

    /// Free variables of the whole program.
    pub fn free_vars(&self) -> BTreeSet<VarId> {
        self.var_ids().filter(|v| self.var(*v).binder.is_none()).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Counts used by the analysis iteration bound: expressions, variables,
    /// λ-terms.
    pub fn counts(&self) -> (u64, u64, u64) {
        let exprs = self.expr_labels().count() as u64;
        let vars = self.vars.len() as u64;
        let lams = self.lam_labels().count() as u64;
        (exprs, vars, lams)
    }

    fn write_atom(&self, a: &Atom, out: &mut String) {
        match a {
            Atom::Var(v) => out.push_str(self.var_name(*v)),
            Atom::Lam(l) => self.write_lam(*l, out),
        }
    }

    fn write_lam(&self, l: Label, out: &mut String) {
        let (param, body) = self.lam(l);
        out.push_str("(λ (");
        out.push_str(self.var_name(param));
        out.push_str(") ");
        self.write_expr(body, out);
        out.push(')');
    }

    fn write_expr(&self, l: Label, out: &mut String) {
        match self.expr(l) {
            ExprKind::Return(a) => self.write_atom(a, out),
            ExprKind::Call { fun, arg } => {
                out.push('(');
                self.write_atom(fun, out);
                out.push(' ');
                self.write_atom(arg, out);
                out.push(')');
            }
            ExprKind::LetCall { var, call, body } => {
                out.push_str("(let ((");
                out.push_str(self.var_name(*var));
                out.push(' ');
                self.write_expr(*call, out);
                out.push_str(")) ");
                self.write_expr(*body, out);
                out.push(')');
            }
        }
    }

    /// Canonical printer. `parse(p.to_source()) == p` for every parsed `p`
    /// (same labels, same variable ids).
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        self.write_expr(self.root, &mut out);
        out
    }

    /// Render an expression label for diagnostics.
    pub fn expr_source(&self, l: Label) -> String {
        let mut out = String::new();
        self.write_expr(l, &mut out);
        out
    }
}

/// α-rename binders so that no two binders share a name and no binder shares
/// a name with a free variable. Only colliding binders are renamed; the new
/// name is `name#k` where `k` is the binder's index among same-named binders
/// in leftmost-depth-first order. Free variables are never touched.
pub fn unique_binders(p: &Program) -> Program {
    let mut binder_count: BTreeMap<&str, u32> = BTreeMap::new();
    let mut free_names: BTreeSet<&str> = BTreeSet::new();
    for v in p.var_ids() {
        let info = p.var(v);
        if info.binder.is_some() {
            *binder_count.entry(info.name.as_str()).or_insert(0) += 1;
        } else {
            free_names.insert(info.name.as_str());
        }
    }
    let mut out = p.clone();
    let mut seen: BTreeMap<String, u32> = BTreeMap::new();
    // VarId order is binder visit order in the leftmost-depth-first walk.
    for v in p.var_ids() {
        let info = p.var(v);
        if info.binder.is_none() {
            continue;
        }
        let collides =
            binder_count[info.name.as_str()] > 1 || free_names.contains(info.name.as_str());
        let k = seen.entry(info.name.clone()).or_insert(0);
        if collides {
            out.vars[v.0 as usize].name = format!("{}#{}", info.name, k);
        }
        *k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Program {
        parse(src).expect("parse")
    }

    #[test]
    fn parses_tail_call_of_two_lambdas() {
        let prog = p("((λ (x) x) (λ (y) y))");
        match prog.expr(prog.root()) {
            ExprKind::Call { fun: Atom::Lam(f), arg: Atom::Lam(a) } => {
                let (px, bx) = prog.lam(*f);
                assert_eq!(prog.var_name(px), "x");
                assert!(matches!(prog.expr(bx), ExprKind::Return(Atom::Var(v)) if *v == px));
                let (py, _) = prog.lam(*a);
                assert_eq!(prog.var_name(py), "y");
            }
            other => panic!("unexpected root: {other:?}"),
        }
        assert!(prog.is_closed());
    }

    #[test]
    fn parses_bare_identifier_as_free_return() {
        let prog = p("x");
        match prog.expr(prog.root()) {
            ExprKind::Return(Atom::Var(v)) => {
                assert_eq!(prog.var_name(*v), "x");
                assert!(prog.var(*v).binder.is_none());
            }
            other => panic!("unexpected root: {other:?}"),
        }
        assert_eq!(prog.free_vars().len(), 1);
    }

    #[test]
    fn parses_let_of_call() {
        let prog = p("(let ((a ((λ (x) x) (λ (y) y)))) a)");
        match prog.expr(prog.root()) {
            ExprKind::LetCall { var, call, body } => {
                assert_eq!(prog.var_name(*var), "a");
                assert!(matches!(prog.expr(*call), ExprKind::Call { .. }));
                assert!(matches!(prog.expr(*body), ExprKind::Return(Atom::Var(v)) if v == var));
            }
            other => panic!("unexpected root: {other:?}"),
        }
    }

    #[test]
    fn rejects_let_binding_an_atom() {
        let err = parse("(let ((a (λ (x) x))) a)").unwrap_err();
        assert!(err.is_not_anf(), "{err}");
        let err = parse("(let ((a b)) a)").unwrap_err();
        assert!(err.is_not_anf(), "{err}");
    }

    #[test]
    fn rejects_non_atomic_operand_and_multiarg_call() {
        let err = parse("(f (g x))").unwrap_err();
        assert!(err.is_not_anf(), "{err}");
        let err = parse("(f x y)").unwrap_err();
        assert!(err.is_not_anf(), "{err}");
        let err = parse("(let ((a (f x)) (b (g y))) a)").unwrap_err();
        assert!(err.is_not_anf(), "{err}");
    }

    #[test]
    fn rejects_malformed_sexprs() {
        for src in ["((λ (x) x)", ")", "", "(λ (x))", "()", "(let a b)"] {
            let err = parse(src).unwrap_err();
            assert!(!err.is_not_anf(), "expected syntax error for {src:?}, got {err}");
        }
    }

    #[test]
    fn lambda_keyword_spelling_is_accepted() {
        let a = p("((λ (x) x) (λ (y) y))");
        let b = p("((lambda (x) x) (lambda (y) y))");
        assert_eq!(a, b);
    }

    #[test]
    fn labels_are_preorder_and_stable() {
        let prog = p("((λ (x) x) (λ (y) y))");
        // call = 0, λx = 1, x-return = 2, λy = 3, y-return = 4
        assert!(matches!(prog.expr(Label(0)), ExprKind::Call { .. }));
        assert!(prog.is_lam(Label(1)));
        assert!(matches!(prog.expr(Label(2)), ExprKind::Return(_)));
        assert!(prog.is_lam(Label(3)));
        assert!(matches!(prog.expr(Label(4)), ExprKind::Return(_)));
        let again = p("((λ (x) x) (λ (y) y))");
        assert_eq!(prog, again);
    }

    #[test]
    fn unique_binders_renames_duplicates_deterministically() {
        let prog = p("((λ (x) x) (λ (x) x))");
        let uniq = unique_binders(&prog);
        assert_eq!(uniq.to_source(), "((λ (x#0) x#0) (λ (x#1) x#1))");
    }

    #[test]
    fn unique_binders_keeps_already_unique_programs() {
        let prog = p("((λ (x) x) (λ (y) y))");
        let uniq = unique_binders(&prog);
        assert_eq!(prog, uniq);
    }

    #[test]
    fn unique_binders_leaves_free_variables_untouched() {
        let prog = p("(let ((a (f g))) a)");
        let uniq = unique_binders(&prog);
        // `a` collides with nothing, `f` and `g` stay free.
        assert_eq!(uniq.to_source(), "(let ((a (f g))) a)");
        assert_eq!(uniq.free_vars().len(), 2);

        // A binder that shadows a free name is renamed so names stay unambiguous.
        let prog = p("(x (λ (x) x))");
        let uniq = unique_binders(&prog);
        assert_eq!(uniq.to_source(), "(x (λ (x#0) x#0))");
    }

    #[test]
    fn unique_binders_preserves_structure() {
        let prog = p("((λ (x) x) (λ (x) x))");
        let uniq = unique_binders(&prog);
        assert_eq!(prog.nodes, uniq.nodes);
        for (a, b) in prog.var_ids().zip(uniq.var_ids()) {
            assert_eq!(prog.var(a).binder, uniq.var(b).binder);
        }
        // Idempotent once unique.
        assert_eq!(unique_binders(&uniq), uniq);
    }

    #[test]
    fn free_vars_examples() {
        assert_eq!(p("x").free_vars().len(), 1);
        assert_eq!(p("(λ (x) x)").free_vars().len(), 0);
        let prog = p("((λ (x) y) z)");
        let names: BTreeSet<_> =
            prog.free_vars().into_iter().map(|v| prog.var_name(v).to_string()).collect();
        assert_eq!(names, BTreeSet::from(["y".to_string(), "z".to_string()]));
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "((λ (x) x) (λ (y) y))",
            "(let ((a ((λ (x) x) (λ (y) y)))) a)",
            "((λ (f) (f f)) (λ (f) (f f)))",
            "(λ (x) (let ((r (x x))) r))",
            "x",
        ] {
            let prog = p(src);
            let printed = prog.to_source();
            assert_eq!(parse(&printed).unwrap(), prog, "roundtrip for {src}");
        }
    }
}
