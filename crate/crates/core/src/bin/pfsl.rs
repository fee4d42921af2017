fn main() {
    std::process::exit(pfsl::cli::run());
}
