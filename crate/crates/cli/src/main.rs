fn main() {
    std::process::exit(diasim::cli::run());
}
