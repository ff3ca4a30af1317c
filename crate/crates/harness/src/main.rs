fn main() {
    std::process::exit(fj_harness::cli::main_with(std::env::args_os()));
}
