//! Runs every preset once and prints one verdict line per criterion.

use cusp_core::harness::{evaluate, ExperimentSpec, Preset, Session, Summary};

#[test]
fn acceptance() {
    let mut session = Session::default();
    let mut summary = Summary::default();
    for p in Preset::ALL {
        let out = evaluate(&ExperimentSpec::preset(p), &mut session).expect("experiment runs");
        for r in &out.rows {
            println!(
                "  [{}] {}: {:.6e} ({} {:.3e}) {}",
                p.id(),
                r.check,
                r.value,
                r.relation_label(),
                r.bound,
                if r.pass { "ok" } else { "VIOLATED" }
            );
        }
        println!("  [{}] {:.1} s", p.id(), out.elapsed_s);
        summary.outcomes.push(out);
    }
    let verdicts = summary.criteria();
    for (c, pass) in &verdicts {
        println!("criterion {c}: {}", if *pass { "PASS" } else { "FAIL" });
    }
    assert_eq!(verdicts.len(), 8);
    assert!(summary.passed(), "at least one acceptance criterion failed");
}
