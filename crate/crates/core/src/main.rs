fn main() {
    std::process::exit(bnsl::cli::run());
}
