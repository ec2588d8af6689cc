fn main() {
    std::process::exit(momentlab::cli::run(std::env::args().collect()));
}
