fn main() {
    std::process::exit(quarter_walk::cli::main_with_args(std::env::args_os()));
}
