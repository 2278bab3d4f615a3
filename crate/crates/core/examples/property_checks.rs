//! The built-in suites behind `dsos check`, driven from code. Pass a suite
//! name to run only that one, or `mutant` to plant a broken endofunctor.

use dsos::checks::{default_corpus, run_checks, CheckOptions};

fn main() {
    let arg = std::env::args().nth(1);
    let mutant = arg.as_deref() == Some("mutant");
    let only = arg.filter(|a| a != "mutant");
    let opts = CheckOptions { corpus: default_corpus(), only, mutant, seed: 0 };
    let results = run_checks(&opts).unwrap_or_else(|e| panic!("{e}"));
    for r in &results {
        println!("{} {} / {}: {} checked", if r.passed { "ok  " } else { "FAIL" }, r.suite, r.property, r.checked);
        if let Some(w) = &r.witness {
            println!("      {w}");
        }
    }
}
