fn main() {
    std::process::exit(qctrl::harness::cli::main_with_args(std::env::args_os()));
}
