fn main() {
    std::process::exit(ness_core::cli::run(std::env::args_os()));
}
