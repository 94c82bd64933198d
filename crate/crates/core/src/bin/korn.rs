fn main() {
    std::process::exit(objective_korn::cli::main_with_args(std::env::args_os()));
}
