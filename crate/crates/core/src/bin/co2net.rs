fn main() {
    std::process::exit(co2net::cli::run(std::env::args_os()));
}
