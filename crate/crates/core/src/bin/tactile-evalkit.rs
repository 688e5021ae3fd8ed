fn main() {
    std::process::exit(tactile_evalkit::cli::main_exit_code());
}
