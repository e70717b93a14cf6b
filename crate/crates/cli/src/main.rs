fn main() {
    std::process::exit(quasiconvex_cli::run(std::env::args_os()));
}
