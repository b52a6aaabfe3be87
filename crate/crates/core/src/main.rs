fn main() {
    std::process::exit(secalloc::cli::run(std::env::args_os()));
}
