use std::io;

fn main() {
    let stdin = io::stdin();
    let mut io = dsos::cli::Io {
        input: &mut stdin.lock(),
        out: &mut io::stdout(),
        err: &mut io::stderr(),
        env_seed: std::env::var("DSOS_SEED").ok(),
    };
    std::process::exit(dsos::cli::main_with(std::env::args_os(), &mut io));
}
