fn main() {
    std::process::exit(rpm_core::cli::main_with_args(std::env::args_os()));
}
