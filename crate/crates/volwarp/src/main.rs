fn main() {
    std::process::exit(volwarp::cli::run(std::env::args_os()));
}
