fn main() {
    std::process::exit(mimo_placement::cli::run(std::env::args_os()));
}
