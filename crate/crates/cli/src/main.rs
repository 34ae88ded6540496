fn main() {
    let outcome = protograde_cli::run(std::env::args_os());
    std::process::exit(outcome.exit_code);
}
