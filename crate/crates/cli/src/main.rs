fn main() {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr();
    let code = rades_cli::main_with_args(std::env::args_os(), &mut out, &mut err);
    std::process::exit(code);
}
