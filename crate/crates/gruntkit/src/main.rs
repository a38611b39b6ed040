fn main() {
    std::process::exit(gruntkit::cli::run());
}
