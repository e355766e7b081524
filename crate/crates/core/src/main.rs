fn main() {
    std::process::exit(mdebif::cli::run(std::env::args_os()));
}
