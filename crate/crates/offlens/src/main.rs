fn main() {
    std::process::exit(offlens::cli::run());
}
