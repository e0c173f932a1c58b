fn main() {
    std::process::exit(hilbert_fc::cli::run(std::env::args_os()));
}
