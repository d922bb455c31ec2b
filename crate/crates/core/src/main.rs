fn main() {
    std::process::exit(nodefeat::cli::run(std::env::args_os()));
}
