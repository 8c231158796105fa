fn main() {
    std::process::exit(peakfit::cli::run());
}
