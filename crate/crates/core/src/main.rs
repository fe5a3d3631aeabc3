fn main() {
    std::process::exit(latcorr::cli::run(std::env::args_os()));
}
