fn main() {
    std::process::exit(shellrig::cli::run());
}
