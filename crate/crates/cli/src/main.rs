fn main() {
    std::process::exit(corrgan_cli::run(std::env::args_os()));
}
