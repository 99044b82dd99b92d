fn main() {
    std::process::exit(pseudovox::cli::main());
}
