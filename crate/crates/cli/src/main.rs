fn main() {
    std::process::exit(gausscap_cli::main_with_args(std::env::args_os()));
}
