fn main() {
    std::process::exit(qpmaxwell_cli::run(std::env::args_os()));
}
