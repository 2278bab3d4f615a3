//! Drives the interactive front end with a scripted session: inspect the
//! enabled transitions, inject upgrade data, step past the upgrade point.

use std::io::Cursor;

use dsos::checks::default_corpus;
use dsos::cli::{main_with, Io};

fn main() {
    let program = default_corpus().join("proteus").join("update_var.prot");
    let script = "enabled\ninject U_S {\"x\": 2}\nstep 10\nshow S\njump-log\nquit\n";
    let mut input = Cursor::new(script.as_bytes());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut io = Io { input: &mut input, out: &mut out, err: &mut err, env_seed: None };
    let code = main_with(["dsos", "repl", program.to_str().expect("utf-8 path")], &mut io);
    print!("{}", String::from_utf8_lossy(&out));
    eprint!("{}", String::from_utf8_lossy(&err));
    println!("\nexit {code}");
}
