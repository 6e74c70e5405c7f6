fn main() {
    std::process::exit(singplap_core::cli::main_with_args(std::env::args_os()));
}
