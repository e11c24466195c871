fn main() {
    std::process::exit(jacobi_greedy_cli::run(std::env::args_os()));
}
