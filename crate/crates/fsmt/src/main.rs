fn main() {
    std::process::exit(fsmt::cli::run());
}
