fn main() {
    std::process::exit(coldplasma_cli::run(std::env::args_os().collect()));
}
