fn main() {
    std::process::exit(polyform::cli::run(std::env::args_os()));
}
