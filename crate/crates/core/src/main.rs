fn main() {
    std::process::exit(cbmd_lab::cli::run(std::env::args_os()));
}
