fn main() {
    std::process::exit(stpca::cli::run(std::env::args_os()));
}
