fn main() {
    std::process::exit(marketsim::cli::main());
}
