fn main() {
    std::process::exit(ustatlab::cli::main());
}
