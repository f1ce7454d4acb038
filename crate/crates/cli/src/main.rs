fn main() {
    std::process::exit(splatstereo_cli::run(std::env::args_os()));
}
