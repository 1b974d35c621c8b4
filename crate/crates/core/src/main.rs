fn main() {
    std::process::exit(mfrpn::cli::main());
}
