fn main() {
    std::process::exit(retarget_cli::run(std::env::args_os()));
}
