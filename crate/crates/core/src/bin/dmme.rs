fn main() {
    std::process::exit(dmme_core::cli::run(std::env::args_os()));
}
