use std::io::{self, IsTerminal};

fn main() {
    let stdin = io::stdin();
    let mut io = dbnet::cli::Streams {
        stdin: &mut stdin.lock(),
        stdout: &mut io::stdout().lock(),
        stderr: &mut io::stderr(),
        color: dbnet::cli::color_enabled(io::stderr().is_terminal()),
    };
    let code = dbnet::cli::run(std::env::args_os(), &mut io);
    std::process::exit(code);
}
