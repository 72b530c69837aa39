fn main() {
    std::process::exit(reltune::cli::run());
}
