fn main() {
    std::process::exit(zfp_cli::run(std::env::args_os()));
}
