fn main() {
    std::process::exit(manifold_ridge::cli::run(std::env::args_os()));
}
