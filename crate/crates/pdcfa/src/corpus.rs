//! The test corpus: a handful of named programs exercising the interesting
//! control-flow shapes, plus a seeded generator of random closed ANF
//! programs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A single tail call; converges in one step.
pub const P_TAIL: &str = "((λ (x) x) (λ (y) y))";

/// An identity function applied at two call sites; the classic return-flow
/// precision example.
pub const P_ID: &str =
    "((λ (id) (let ((a (id (λ (p) p)))) (let ((b (id (λ (q) q)))) a))) (λ (x) x))";

/// Self-application loop: diverges concretely, the analysis must terminate.
pub const P_OMEGA: &str = "((λ (f) (f f)) (λ (f) (f f)))";

/// A loop that pushes a frame on every cycle: the abstract configuration
/// space is infinite (unbounded stacks) but the control-state space is not.
pub const P_GROW: &str = "((λ (f) (let ((r (f f))) r)) (λ (f) (let ((r (f f))) r)))";

/// `mk` returns its argument's closure, which is then invoked beyond the pop
/// edge: the inner λ escapes its creating frame.
pub const P_ESCAPE: &str = "((λ (mk) (let ((g (mk (λ (z) z)))) (g g))) (λ (w) w))";

/// Two nested lets around identity calls: a state inside the inner call has
/// both frames on the stack, and closing the inner call/return pair enables
/// the outer pop.
pub const P_NEST: &str =
    "((λ (id) (let ((outer ((λ (t) (let ((inner (id t))) inner)) (λ (s) s)))) outer)) (λ (x) x))";

/// All named corpus programs.
pub fn named() -> Vec<(&'static str, &'static str)> {
    vec![
        ("P_TAIL", P_TAIL),
        ("P_ID", P_ID),
        ("P_OMEGA", P_OMEGA),
        ("P_GROW", P_GROW),
        ("P_ESCAPE", P_ESCAPE),
        ("P_NEST", P_NEST),
    ]
}

struct Gen {
    rng: ChaCha8Rng,
    next_var: u32,
}

impl Gen {
    fn fresh(&mut self) -> String {
        let v = format!("v{}", self.next_var);
        self.next_var += 1;
        v
    }

    fn atom(&mut self, depth: u32, scope: &mut Vec<String>) -> String {
        if !scope.is_empty() && (depth == 0 || self.rng.gen_bool(0.6)) {
            let i = self.rng.gen_range(0..scope.len());
            scope[i].clone()
        } else {
            let param = self.fresh();
            scope.push(param.clone());
            let body = self.expr(depth.saturating_sub(1), scope);
            scope.pop();
            format!("(λ ({param}) {body})")
        }
    }

    fn expr(&mut self, depth: u32, scope: &mut Vec<String>) -> String {
        let choice = if depth == 0 { 9 } else { self.rng.gen_range(0..10) };
        match choice {
            0..=2 => {
                let var = self.fresh();
                let fun = self.atom(depth - 1, scope);
                let arg = self.atom(depth - 1, scope);
                scope.push(var.clone());
                let body = self.expr(depth - 1, scope);
                scope.pop();
                format!("(let (({var} ({fun} {arg}))) {body})")
            }
            3..=6 => {
                let fun = self.atom(depth - 1, scope);
                let arg = self.atom(depth - 1, scope);
                format!("({fun} {arg})")
            }
            _ => self.atom(depth, scope),
        }
    }
}

/// Generate one closed ANF program. Same seed, same program.
pub fn generate(seed: u64) -> String {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(seed.rotate_left(17));
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(mixed),
        next_var: 0,
    };
    let depth = g.rng.gen_range(2..=5);
    let mut scope = Vec::new();
    let src = g.expr(depth, &mut scope);
    debug_assert!(scope.is_empty());
    src
}

/// The seeded random suite shipped in the corpus directory.
pub fn random_suite(base_seed: u64, count: usize) -> Vec<(String, String)> {
    (0..count)
        .map(|i| {
            (
                format!("rand{i:02}"),
                generate(base_seed.wrapping_add(i as u64)),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn named_programs_parse_and_are_closed() {
        for (name, src) in named() {
            let prog = parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(prog.is_closed(), "{name} has free variables");
        }
    }

    #[test]
    fn generator_is_deterministic_and_produces_closed_programs() {
        for seed in 0..50 {
            let a = generate(seed);
            let b = generate(seed);
            assert_eq!(a, b);
            let prog = parse(&a).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{a}"));
            assert!(prog.is_closed(), "seed {seed} produced an open program:\n{a}");
        }
    }
}
