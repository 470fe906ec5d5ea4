fn main() {
    std::process::exit(cone_sobolev::cli::run(std::env::args_os()));
}
