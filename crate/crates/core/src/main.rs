fn main() {
    std::process::exit(microquake::cli::run(std::env::args_os()));
}
