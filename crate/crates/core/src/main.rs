fn main() {
    std::process::exit(ringsource::cli::run());
}
