fn main() {
    std::process::exit(agemdp_cli::run(std::env::args_os()));
}
