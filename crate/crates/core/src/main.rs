fn main() {
    std::process::exit(discrete_barycenter::cli::run(std::env::args_os()));
}
