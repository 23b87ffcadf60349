fn main() {
    std::process::exit(procinv::cli::run(std::env::args_os()));
}
