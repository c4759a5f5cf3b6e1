fn main() {
    std::process::exit(bioqa::cli::main());
}
