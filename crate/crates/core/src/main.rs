fn main() {
    std::process::exit(ehrsynth::cli::run(std::env::args_os()));
}
