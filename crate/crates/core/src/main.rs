fn main() {
    std::process::exit(gpfourier::cli::run(std::env::args_os()));
}
