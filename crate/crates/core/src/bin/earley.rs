fn main() {
    std::process::exit(earley_core::cli::run());
}
