//! The corpus files shipped in `corpus/` are exactly what the named
//! programs and the seeded generator produce, and they behave as expected
//! under the concrete machine.

use std::path::PathBuf;

use pdcfa::concrete::{run, RunStatus};
use pdcfa::corpus;
use pdcfa::syntax::{parse, unique_binders, ExprKind};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn shipped_files_match_the_generator() {
    for (name, src) in corpus::named() {
        let path = corpus_dir().join(format!("{name}.anf"));
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk.trim_end(), src, "{name}.anf differs from the source");
    }
    for (name, src) in corpus::random_suite(7, 10) {
        let path = corpus_dir().join(format!("{name}.anf"));
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk.trim_end(), src, "{name}.anf differs from the generator");
    }
}

#[test]
fn p_id_concretely_returns_the_first_identity_argument() {
    let p = unique_binders(&parse(corpus::P_ID).unwrap());
    let out = run(&p, 100).unwrap();
    assert_eq!(out.status, RunStatus::Final);
    let value = out.final_value(&p).unwrap();
    let lam_p = p
        .lam_labels()
        .find(|l| p.var_name(p.lam(*l).0) == "p")
        .unwrap();
    assert_eq!(value.lam, lam_p, "the program returns `a`, bound to (λ (p) p)");
}

#[test]
fn p_omega_and_p_grow_diverge() {
    for src in [corpus::P_OMEGA, corpus::P_GROW] {
        let p = unique_binders(&parse(src).unwrap());
        let out = run(&p, 200).unwrap();
        assert_eq!(out.status, RunStatus::StepLimit);
    }
}

#[test]
fn p_escape_concretely_invokes_the_escaping_closure() {
    let p = unique_binders(&parse(corpus::P_ESCAPE).unwrap());
    let out = run(&p, 100).unwrap();
    assert_eq!(out.status, RunStatus::Final);
    // the final expression is the body of (λ (z) z)
    let last = out.last();
    assert!(matches!(p.expr(last.expr), ExprKind::Return(_)));
}
