fn main() {
    std::process::exit(hgpair::cli::main());
}
