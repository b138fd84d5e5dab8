fn main() {
    std::process::exit(vsumm::cli::main());
}
