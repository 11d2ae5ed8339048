fn main() {
    std::process::exit(nvforge::cli::run(std::env::args_os()));
}
