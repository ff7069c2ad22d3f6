fn main() {
    std::process::exit(wunet_cli::run(std::env::args_os()));
}
