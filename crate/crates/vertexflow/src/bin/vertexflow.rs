fn main() {
    std::process::exit(vertexflow::cli::run(std::env::args_os()));
}
