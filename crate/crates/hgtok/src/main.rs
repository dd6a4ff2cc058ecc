fn main() {
    std::process::exit(hgtok::cli::main());
}
